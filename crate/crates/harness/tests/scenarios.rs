use std::collections::BTreeMap;
use std::path::PathBuf;

use rbks_core::cloud::Rejection;
use rbks_harness::random::{random_scenario, Limits};
use rbks_harness::scenario::{run_scenario, Expect, Scenario, Step, StepOutcome};
use rbks_harness::HarnessError;
use sha2::{Digest, Sha256};

fn load(name: &str) -> Scenario {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("scenarios")
        .join(name);
    Scenario::load(&path).unwrap()
}

type QueryView<'a> = (
    &'a Vec<String>,
    &'a BTreeMap<String, String>,
    &'a BTreeMap<String, Rejection>,
    Option<Rejection>,
);

fn query(outcome: &StepOutcome) -> QueryView<'_> {
    match outcome {
        StepOutcome::Query {
            matched,
            plaintext_sha256,
            skipped,
            rejected,
            ..
        } => (matched, plaintext_sha256, skipped, *rejected),
        other => panic!("not a query outcome: {other:?}"),
    }
}

#[test]
fn running_example_outcomes() {
    let r = run_scenario(&load("running-example.toml")).unwrap();
    assert_eq!(r.documents, 2);
    assert_eq!(r.queries, 9);

    let (matched, sha, _, _) = query(&r.steps[0].outcome);
    assert_eq!(matched, &vec!["study".to_owned()]);
    assert_eq!(
        sha["study"],
        hex::encode(Sha256::digest(b"joint oncology study, cohort B"))
    );

    let (matched, _, skipped, _) = query(&r.steps[1].outcome);
    assert!(matched.is_empty());
    assert_eq!(skipped["study"], Rejection::UnqualifiedRoles);

    let (_, _, _, rejected) = query(&r.steps[5].outcome);
    assert_eq!(rejected, Some(Rejection::Replayed));
    let (_, _, _, rejected) = query(&r.steps[7].outcome);
    assert_eq!(rejected, Some(Rejection::Stale));

    assert_eq!(
        r.steps[8].outcome,
        StepOutcome::Revoked {
            reencrypted: vec!["study".into()]
        }
    );
    // Alice's stale researcher key no longer opens the study...
    assert!(query(&r.steps[9].outcome).0.is_empty());
    // ...while carol still reaches it through the proxy keys.
    assert_eq!(query(&r.steps[10].outcome).0, &vec!["study".to_owned()]);
}

#[test]
fn checked_in_scenarios_pass_and_are_deterministic() {
    for name in ["running-example.toml", "revocation.toml", "empty.toml"] {
        let s = load(name);
        assert_eq!(
            run_scenario(&s).unwrap(),
            run_scenario(&s).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn empty_scenario_has_no_queries() {
    let r = run_scenario(&load("empty.toml")).unwrap();
    assert_eq!(r.queries, 0);
    assert!(r.summary().contains("0 queries"));
}

#[test]
fn failed_expectation_names_the_step() {
    let mut s = load("running-example.toml");
    let Step::Query(q) = &mut s.steps[2] else {
        panic!("step 3 is a query")
    };
    q.expect = Expect::NoMatch;
    q.documents.clear();
    match run_scenario(&s) {
        Err(HarnessError::ExpectationFailed { step, action, .. }) => {
            assert_eq!(step, 3);
            assert_eq!(action, "query");
        }
        other => panic!("expected a failed expectation, got {other:?}"),
    }
}

#[test]
fn invalid_scenarios_are_rejected_before_running() {
    let base = load("running-example.toml").to_toml();
    let cases = [
        base.replace("version = 1", "version = 7"),
        base.replace("\"hospital/nurse\"]", "\"hospital/porter\"]"),
        base.replace(
            "roles = [\"hospital/chief\", \"lab/head\"]",
            "roles = [\"hospital/director\"]",
        ),
        base.replace("user = \"bob\"", "user = \"mallory\""),
        base.replace("engine = \"bls12-381\"", "engine = \"rsa\""),
    ];
    for (i, text) in cases.iter().enumerate() {
        assert_ne!(text, &base, "case {i} did not change the scenario");
        match Scenario::parse(text).and_then(|s| run_scenario(&s)) {
            Err(HarnessError::ScenarioInvalid(_) | HarnessError::Toml(_)) => {}
            other => panic!("case {i}: {other:?}"),
        }
    }
}

#[test]
fn generated_scenarios_round_trip_and_pass() {
    let limits = Limits {
        max_orgs: 2,
        max_roles_per_org: 6,
        max_documents: 4,
        max_users: 3,
        ..Limits::default()
    };
    for seed in 0..3 {
        let s = random_scenario(seed, "type-a", &limits);
        assert_eq!(Scenario::parse(&s.to_toml()).unwrap(), s);
        run_scenario(&s).unwrap();
    }
}
