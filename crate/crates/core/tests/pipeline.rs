mod common;

use std::collections::BTreeSet;

use common::{World, NOW};
use rbks_core::authority::revoke_role;
use rbks_core::client::{full_dec, recover_key, trap_gen_with_v, PartialCiphertext};
use rbks_core::cloud::{
    authenticate, key_search, partial_dec, role_factor, select_roles, Coverage, Rejection,
    ReplayCache,
};
use rbks_core::hierarchy::OrgId;
use rbks_core::owner::{encrypt_with_randomness, EncryptionRandomness};
use rbks_core::pairing::{Bls12Paired, GtElement, Scalar, TypeA};
use rbks_core::role_manager::update_role_keys;
use rbks_core::{telemetry, Error};

type E = Bls12Paired;

fn r(org: &str, name: &str) -> rbks_core::hierarchy::RoleId {
    World::<E>::role(org, name)
}

#[test]
fn exact_role_round_trip() {
    let mut w = World::<E>::two_orgs(1);
    w.enroll("alice", &[r("clinic", "doctor")]);
    let p = World::<E>::policy(&[r("clinic", "doctor")], "clinic");
    let id = w.store(b"chart 17", &["alpha"], &p);
    let (outcome, plain) = w.query("alice", "clinic", &["alpha"]).unwrap();
    assert_eq!(outcome.matches.len(), 1);
    assert_eq!(outcome.matches[0].0, id);
    assert_eq!(plain, vec![b"chart 17".to_vec()]);
}

#[test]
fn ancestor_reaches_descendant_data() {
    let mut w = World::<E>::two_orgs(2);
    w.enroll("hank", &[r("clinic", "head")]);
    let p = World::<E>::policy(&[r("clinic", "intern")], "clinic");
    w.store(b"rota", &["schedule"], &p);
    let (_, plain) = w.query("hank", "clinic", &["schedule"]).unwrap();
    assert_eq!(plain, vec![b"rota".to_vec()]);
}

#[test]
fn descendant_cannot_reach_ancestor_data() {
    let mut w = World::<E>::two_orgs(3);
    w.enroll("ivy", &[r("clinic", "intern")]);
    let p = World::<E>::policy(&[r("clinic", "doctor")], "clinic");
    let id = w.store(b"x", &["k"], &p);
    telemetry::reset();
    let (outcome, plain) = w.query("ivy", "clinic", &["k"]).unwrap();
    assert!(plain.is_empty());
    assert_eq!(outcome.skipped[&id], Rejection::UnqualifiedRoles);
}

#[test]
fn cross_org_conjunctive_policy() {
    let mut w = World::<E>::two_orgs(4);
    w.enroll("both", &[r("clinic", "doctor"), r("lab", "researcher")]);
    w.enroll("doconly", &[r("clinic", "doctor")]);
    let p = World::<E>::policy(&[r("clinic", "doctor"), r("lab", "researcher")], "lab");
    let id = w.store(b"trial data", &["oncology"], &p);

    let (_, plain) = w.query("both", "lab", &["oncology"]).unwrap();
    assert_eq!(plain, vec![b"trial data".to_vec()]);

    let (outcome, plain) = w.query("doconly", "lab", &["oncology"]).unwrap();
    assert!(plain.is_empty());
    assert_eq!(outcome.skipped[&id], Rejection::UnqualifiedRoles);

    // the owner org anchors C2/C3: a clinic-keyed trapdoor never applies
    let (outcome, _) = w.query("both", "clinic", &["oncology"]).unwrap();
    assert_eq!(outcome.skipped[&id], Rejection::OrgMismatch);
}

#[test]
fn wrong_keyword_is_a_mismatch() {
    let mut w = World::<E>::two_orgs(5);
    w.enroll("alice", &[r("clinic", "doctor")]);
    let p = World::<E>::policy(&[r("clinic", "doctor")], "clinic");
    let id = w.store(b"x", &["alpha"], &p);
    let (outcome, plain) = w.query("alice", "clinic", &["beta"]).unwrap();
    assert!(plain.is_empty());
    assert_eq!(outcome.skipped[&id], Rejection::KeywordMismatch);
}

#[test]
fn conjunctive_search_is_order_free_and_strict() {
    let mut w = World::<E>::two_orgs(6);
    w.enroll("alice", &[r("clinic", "doctor")]);
    let p = World::<E>::policy(&[r("clinic", "doctor")], "clinic");
    let both = w.store(b"ab", &["a", "b"], &p);
    let only_a = w.store(b"a", &["a"], &p);

    let (o1, _) = w.query("alice", "clinic", &["a", "b"]).unwrap();
    let (o2, _) = w.query("alice", "clinic", &["b", "a"]).unwrap();
    let ids =
        |o: &rbks_core::cloud::SearchOutcome<E>| o.matches.iter().map(|m| m.0).collect::<Vec<_>>();
    assert_eq!(ids(&o1), vec![both]);
    assert_eq!(ids(&o2), vec![both]);
    assert_eq!(o1.skipped[&only_a], Rejection::KeywordMismatch);
}

#[test]
fn replay_and_freshness() {
    let mut w = World::<E>::two_orgs(7);
    w.enroll("alice", &[r("clinic", "doctor")]);
    let p = World::<E>::policy(&[r("clinic", "doctor")], "clinic");
    w.store(b"x", &["k"], &p);

    let (trap, _) = w.trapdoor("alice", "clinic", &["k"], None, NOW);
    assert_eq!(
        w.cloud.search(&trap, &w.board, NOW).unwrap().matches.len(),
        1
    );
    assert!(matches!(
        w.cloud.search(&trap, &w.board, NOW + 1),
        Err(Error::Rejected(Rejection::Replayed))
    ));

    let (old, _) = w.trapdoor("alice", "clinic", &["k"], None, NOW - 301);
    assert!(matches!(
        w.cloud.search(&old, &w.board, NOW),
        Err(Error::Rejected(Rejection::Stale))
    ));
    let (edge, _) = w.trapdoor("alice", "clinic", &["k"], None, NOW - 300);
    assert!(w.cloud.search(&edge, &w.board, NOW).is_ok());
}

#[test]
fn complete_user_revocation() {
    let mut w = World::<E>::two_orgs(8);
    w.enroll("alice", &[r("clinic", "doctor")]);
    w.enroll("bob", &[r("clinic", "doctor")]);
    let p = World::<E>::policy(&[r("clinic", "doctor")], "clinic");
    w.store(b"x", &["k"], &p);
    w.board
        .revoke_user_complete(&OrgId::new("clinic"), "alice")
        .unwrap();
    assert!(matches!(
        w.query("alice", "clinic", &["k"]),
        Err(Error::Rejected(Rejection::UnknownIdentity))
    ));
    assert_eq!(w.query("bob", "clinic", &["k"]).unwrap().1.len(), 1);
}

#[test]
fn forged_user_key_fails_authentication() {
    let mut w = World::<E>::two_orgs(9);
    w.enroll("alice", &[r("clinic", "doctor")]);
    w.enroll("mallory", &[r("clinic", "doctor")]);
    let p = World::<E>::policy(&[r("clinic", "doctor")], "clinic");
    w.store(b"x", &["k"], &p);
    // mallory presents a trapdoor under alice's name
    let (mut trap, _) = w.trapdoor("mallory", "clinic", &["k"], None, NOW);
    trap.user_id = "alice".into();
    assert!(matches!(
        w.cloud.search(&trap, &w.board, NOW),
        Err(Error::Rejected(Rejection::AuthenticationFailed))
    ));
}

#[test]
fn role_revocation_secrecy() {
    let mut w = World::<E>::two_orgs(10);
    let (doctor, intern, head) = (
        r("clinic", "doctor"),
        r("clinic", "intern"),
        r("clinic", "head"),
    );
    w.enroll("revoked", std::slice::from_ref(&doctor));
    w.enroll("peer", std::slice::from_ref(&doctor));
    w.enroll("junior", std::slice::from_ref(&intern));
    w.enroll("boss", std::slice::from_ref(&head));
    let before_doc = w.store(
        b"old-doc",
        &["k"],
        &World::<E>::policy(std::slice::from_ref(&doctor), "clinic"),
    );
    let before_int = w.store(
        b"old-int",
        &["k"],
        &World::<E>::policy(std::slice::from_ref(&intern), "clinic"),
    );

    let clinic = OrgId::new("clinic");
    let h = w.hierarchies[&clinic].clone();
    let mut proxy_shadow = rbks_core::authority::ProxyKeySet::new();
    let token = revoke_role(
        &h,
        w.secrets.get_mut(&clinic).unwrap(),
        &mut proxy_shadow,
        &doctor,
        &mut w.rng,
    )
    .unwrap();
    w.board.publish_role_pks(w.secrets[&clinic].public_keys());
    let changed = w.cloud.apply_revocation(&token, &h).unwrap();
    assert_eq!(changed, vec![before_doc, before_int]);
    for user in ["peer", "junior", "boss"] {
        update_role_keys(&mut w.users.get_mut(user).unwrap().ring, &token, &h).unwrap();
    }
    let after = w.store(
        b"new-doc",
        &["k"],
        &World::<E>::policy(std::slice::from_ref(&doctor), "clinic"),
    );

    let (o, plain) = w.query("revoked", "clinic", &["k"]).unwrap();
    assert!(plain.is_empty());
    for id in [before_doc, after] {
        assert_eq!(o.skipped[&id], Rejection::KeywordMismatch);
    }
    let (_, plain) = w.query("peer", "clinic", &["k"]).unwrap();
    assert_eq!(
        plain,
        vec![
            b"old-doc".to_vec(),
            b"old-int".to_vec(),
            b"new-doc".to_vec()
        ]
    );
    let (_, plain) = w.query("junior", "clinic", &["k"]).unwrap();
    assert_eq!(plain, vec![b"old-int".to_vec()]);
    let (_, plain) = w.query("boss", "clinic", &["k"]).unwrap();
    assert_eq!(plain.len(), 3);
}

#[test]
fn unrelated_ciphertexts_survive_reencryption_byte_identical() {
    let mut w = World::<E>::two_orgs(11);
    let nurse = w.store(
        b"n",
        &["k"],
        &World::<E>::policy(&[r("clinic", "nurse")], "clinic"),
    );
    let lab = w.store(
        b"l",
        &["k"],
        &World::<E>::policy(&[r("lab", "assistant")], "lab"),
    );
    let before: Vec<_> = [nurse, lab]
        .iter()
        .map(|id| w.cloud.store.get(*id).unwrap().clone())
        .collect();
    let clinic = OrgId::new("clinic");
    let h = w.hierarchies[&clinic].clone();
    let mut shadow = rbks_core::authority::ProxyKeySet::new();
    let token = revoke_role(
        &h,
        w.secrets.get_mut(&clinic).unwrap(),
        &mut shadow,
        &r("clinic", "doctor"),
        &mut w.rng,
    )
    .unwrap();
    assert!(w.cloud.apply_revocation(&token, &h).unwrap().is_empty());
    for (id, ct) in [nurse, lab].iter().zip(&before) {
        assert_eq!(
            rbks_core::wire::encode_ciphertext(w.cloud.store.get(*id).unwrap()),
            rbks_core::wire::encode_ciphertext(ct)
        );
    }
}

/// Recomputes every intermediate value from the parties' secrets and checks
/// the cloud's values against it.
#[test]
fn oracle_values() {
    let mut w = World::<E>::two_orgs(12);
    let roles = [
        r("clinic", "doctor"),
        r("lab", "researcher"),
        r("lab", "assistant"),
    ];
    w.enroll("alice", &[r("clinic", "head"), r("lab", "researcher")]);
    let policy = World::<E>::policy(&roles, "clinic");
    let rand = EncryptionRandomness::sample(&policy, &mut w.rng);
    let key = GtElement::random(&mut w.rng);
    let ct = encrypt_with_randomness(
        &w.pp,
        w.board.cloud_pubs(),
        b"m",
        &["kw"],
        &policy,
        w.board.role_pks(),
        &key,
        &rand,
        &mut w.rng,
    )
    .unwrap();

    let v = Scalar::from_u64(0x5eed_1234);
    let clinic = OrgId::new("clinic");
    let user = &w.users["alice"];
    let (trap, session) = trap_gen_with_v(
        &w.ctx,
        &user.keys[&clinic],
        &user.ring,
        None,
        &["kw"],
        NOW,
        v,
    )
    .unwrap();
    let priv_u = user.keys[&clinic].priv_global;

    let mut cache = ReplayCache::default();
    let user_pub = w.board.user_pub(&clinic, "alice").copied();
    let auth = authenticate(
        &w.cloud.cloud_privs,
        &ct,
        &trap,
        user_pub.as_ref(),
        NOW,
        &mut cache,
    )
    .unwrap();

    let mu_dp: Scalar<E> = policy
        .orgs()
        .iter()
        .map(|o| w.masters[o].mu * rand.dp_k(o))
        .sum();
    assert_eq!(auth.v31, w.ctx.egg().pow(&(v * mu_dp)));

    let v6 = key_search(&ct, &trap, &auth, &w.cloud.proxy, &w.cloud.cloud_privs).unwrap();
    assert_eq!(v6, w.pp.y_gt.pow(&(priv_u * rand.d_j() * v)));

    let pc = partial_dec(&ct, &trap, &w.cloud.proxy, &w.cloud.cloud_privs, &v6).unwrap();
    assert_eq!(pc.v10, w.pp.y_gt.pow(&(priv_u * v * rand.d())));
    assert_eq!(recover_key(&pc, &priv_u, &session).unwrap(), key);
    assert_eq!(full_dec(&pc, &priv_u, session).unwrap(), b"m");
}

#[test]
fn corrupted_partial_ciphertext_fails() {
    let mut w = World::<E>::two_orgs(13);
    w.enroll("alice", &[r("clinic", "doctor")]);
    let p = World::<E>::policy(&[r("clinic", "doctor")], "clinic");
    w.store(b"x", &["k"], &p);
    let (trap, session) = w.trapdoor("alice", "clinic", &["k"], None, NOW);
    let outcome = w.cloud.search(&trap, &w.board, NOW).unwrap();
    let pc = PartialCiphertext {
        v10: GtElement::identity(),
        ..outcome.matches[0].1.clone()
    };
    let priv_u = w.users["alice"].keys[&OrgId::new("clinic")].priv_global;
    assert!(matches!(
        full_dec(&pc, &priv_u, session),
        Err(Error::AuthenticationFailure)
    ));

    // a session from another query carries the wrong v
    let (_, other) = w.trapdoor("alice", "clinic", &["k"], None, NOW + 1);
    assert!(matches!(
        full_dec(&outcome.matches[0].1, &priv_u, other),
        Err(Error::AuthenticationFailure)
    ));
}

#[test]
fn case_one_and_case_two_agree_with_formula_self_key() {
    let mut w = World::<E>::two_orgs(14);
    let doctor = r("clinic", "doctor");
    w.enroll("alice", std::slice::from_ref(&doctor));
    let p = World::<E>::policy(std::slice::from_ref(&doctor), "clinic");
    let id = w.store(b"x", &["k"], &p);
    let (trap, _) = w.trapdoor("alice", "clinic", &["k"], None, NOW);
    let ct = w.cloud.store.get(id).unwrap();
    let clinic = OrgId::new("clinic");
    let rec = w.secrets[&clinic].record(&doctor).unwrap();
    // PKey^{r}_{r} = RS_r / t_r, the product over R_r \ {r}
    let self_key = rec.rs * rec.t.invert().unwrap();
    let case1 = Coverage::<E> {
        held: doctor.clone(),
        proxy_key: None,
    };
    let case2 = Coverage {
        held: doctor.clone(),
        proxy_key: Some(self_key),
    };
    let c = &ct.crp[&doctor];
    assert_eq!(
        role_factor(&trap, &case1, c).unwrap(),
        role_factor(&trap, &case2, c).unwrap()
    );
    // the literal degenerate key 1 does not agree: RS_r != t_r below the root
    let literal = Coverage {
        held: doctor.clone(),
        proxy_key: Some(Scalar::one()),
    };
    assert_ne!(
        role_factor(&trap, &case1, c).unwrap(),
        role_factor(&trap, &literal, c).unwrap()
    );
}

#[test]
fn unqualified_selection_runs_no_group_operations() {
    let mut w = World::<E>::two_orgs(15);
    w.enroll("ivy", &[r("clinic", "nurse")]);
    let p = World::<E>::policy(&[r("clinic", "doctor")], "clinic");
    let id = w.store(b"x", &["k"], &p);
    let (trap, _) = w.trapdoor("ivy", "clinic", &["k"], None, NOW);
    let ((), counts) = telemetry::measure(|| {
        let outcome = w.cloud.search(&trap, &w.board, NOW).unwrap();
        assert_eq!(outcome.skipped[&id], Rejection::UnqualifiedRoles);
    });
    assert_eq!(counts.pairings, 0);
    assert_eq!(counts.g1_exp, 0);
    let ct = w.cloud.store.get(id).unwrap();
    assert_eq!(
        select_roles(&ct.policy, trap.presented(), &w.cloud.proxy),
        Err(Rejection::UnqualifiedRoles)
    );
}

#[test]
fn subset_presentation() {
    let mut w = World::<E>::two_orgs(16);
    let (doctor, nurse) = (r("clinic", "doctor"), r("clinic", "nurse"));
    w.enroll("alice", &[doctor.clone(), nurse.clone()]);
    let p = World::<E>::policy(std::slice::from_ref(&doctor), "clinic");
    let id = w.store(b"x", &["k"], &p);
    let only_nurse = BTreeSet::from([nurse]);
    let (trap, _) = w.trapdoor("alice", "clinic", &["k"], Some(&only_nurse), NOW);
    assert_eq!(trap.roles.len(), 1);
    let outcome = w.cloud.search(&trap, &w.board, NOW).unwrap();
    assert_eq!(outcome.skipped[&id], Rejection::UnqualifiedRoles);
}

#[test]
fn type_a_engine_runs_the_pipeline() {
    let mut w = World::<TypeA>::new(17, &[("k", "rr", &[("rr", "a"), ("a", "b")])]);
    w.enroll("u", &[World::<TypeA>::role("k", "a")]);
    let p = World::<TypeA>::policy(&[World::<TypeA>::role("k", "b")], "k");
    w.store(b"legacy", &["w1", "w2"], &p);
    let (_, plain) = w.query("u", "k", &["w2", "w1"]).unwrap();
    assert_eq!(plain, vec![b"legacy".to_vec()]);
}
