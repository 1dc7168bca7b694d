//! Scenario files: a deployment, its documents and a sequence of steps with
//! symbolic expected outcomes.
//!
//! ```toml
//! version = 1
//! seed = 7
//! engine = "bls12-381"
//!
//! [[org]]
//! id = "clinic"
//! root = "board"
//! edges = [["board", "doctor"]]
//!
//! [[user]]
//! id = "alice"
//! roles = ["clinic/doctor"]
//!
//! [[document]]
//! id = "chart"
//! payload = "..."
//! keywords = ["flu"]
//! roles = ["clinic/doctor"]
//!
//! [[step]]
//! action = "query"
//! user = "alice"
//! keywords = ["flu"]
//! expect = "match"
//! documents = ["chart"]
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rbks_core::cloud::Rejection;
use rbks_core::hierarchy::{OrgId, RoleHierarchy, RoleId};
use rbks_core::owner::AccessPolicy;
use rbks_core::pairing::{Engine, SecurityLevel};
use rbks_core::with_engine;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{HarnessError, Result};
use crate::sim::{Deployment, QueryReport};

pub const SCHEMA_VERSION: u32 = 1;

fn default_engine() -> String {
    "bls12-381".into()
}

fn default_window() -> u64 {
    rbks_core::cloud::DEFAULT_REPLAY_WINDOW
}

fn default_start() -> u64 {
    1_700_000_000
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub version: u32,
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_engine")]
    pub engine: String,
    #[serde(default = "default_window")]
    pub window: u64,
    #[serde(default = "default_start")]
    pub start_time: u64,
    #[serde(default, rename = "org")]
    pub orgs: Vec<OrgSpec>,
    #[serde(default, rename = "user")]
    pub users: Vec<UserSpec>,
    #[serde(default, rename = "document")]
    pub documents: Vec<DocumentSpec>,
    #[serde(default, rename = "step")]
    pub steps: Vec<Step>,
}

/// Either `root` + `edges` (+ edgeless `roles`) or a `hierarchy` text block.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrgSpec {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub root: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub edges: Vec<(String, String)>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub roles: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hierarchy: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UserSpec {
    pub id: String,
    #[serde(default)]
    pub roles: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DocumentSpec {
    pub id: String,
    pub payload: String,
    pub keywords: Vec<String>,
    pub roles: Vec<String>,
    /// Defaults to the organization of the first listed role.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub owner: Option<String>,
    /// Stored by a later `store` step instead of up front.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub deferred: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Expect {
    /// Exactly `documents` match and decrypt to their payloads.
    Match,
    /// The request is served and nothing matches.
    NoMatch,
    /// Nothing matches and `documents` (default: all of the org's) were
    /// passed over for insufficient roles.
    Unqualified,
    /// The whole request is refused with `reason`.
    Rejected,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueryStep {
    pub user: String,
    /// Organization whose ciphertexts are searched; optional with one org.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub org: Option<String>,
    pub keywords: Vec<String>,
    /// Roles to present; all held roles when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub roles: Option<Vec<String>>,
    pub expect: Expect,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub documents: Vec<String>,
    /// Hex SHA-256 of the single expected plaintext.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sha256: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<Rejection>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReplayStep {
    pub expect: Expect,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<Rejection>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "kebab-case")]
pub enum Step {
    Query(QueryStep),
    /// Resubmits the previous trapdoor.
    Replay(ReplayStep),
    Advance {
        seconds: u64,
    },
    RevokeRole {
        role: String,
        #[serde(default)]
        users: Vec<String>,
    },
    RevokeUser {
        user: String,
        org: String,
    },
    AssignRole {
        user: String,
        role: String,
    },
    Store {
        document: String,
    },
}

impl Step {
    pub fn action(&self) -> &'static str {
        match self {
            Step::Query(_) => "query",
            Step::Replay(_) => "replay",
            Step::Advance { .. } => "advance",
            Step::RevokeRole { .. } => "revoke-role",
            Step::RevokeUser { .. } => "revoke-user",
            Step::AssignRole { .. } => "assign-role",
            Step::Store { .. } => "store",
        }
    }
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum StepOutcome {
    Query {
        matched: Vec<String>,
        /// Hex SHA-256 of each recovered plaintext.
        plaintext_sha256: BTreeMap<String, String>,
        #[serde(skip_serializing_if = "Vec::is_empty")]
        undecryptable: Vec<String>,
        skipped: BTreeMap<String, Rejection>,
        #[serde(skip_serializing_if = "Option::is_none")]
        rejected: Option<Rejection>,
        pairings: u64,
    },
    Revoked {
        reencrypted: Vec<String>,
    },
    Done,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct StepReport {
    pub step: usize,
    pub action: &'static str,
    pub outcome: StepOutcome,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ScenarioReport {
    pub name: String,
    pub engine: String,
    pub documents: usize,
    pub queries: usize,
    pub steps: Vec<StepReport>,
}

impl ScenarioReport {
    /// One human-readable line per step.
    pub fn summary(&self) -> String {
        let mut out = format!(
            "scenario {:?} on {}: {} documents, {} queries\n",
            self.name, self.engine, self.documents, self.queries
        );
        for s in &self.steps {
            let detail = match &s.outcome {
                StepOutcome::Query {
                    matched,
                    rejected: Some(r),
                    ..
                } if matched.is_empty() => format!("rejected ({r})"),
                StepOutcome::Query {
                    matched, skipped, ..
                } => {
                    let unq = skipped
                        .values()
                        .filter(|r| **r == Rejection::UnqualifiedRoles)
                        .count();
                    format!(
                        "matched {matched:?}, {unq} unqualified, {} skipped",
                        skipped.len()
                    )
                }
                StepOutcome::Revoked { reencrypted } => format!("re-encrypted {reencrypted:?}"),
                StepOutcome::Done => "ok".into(),
            };
            out += &format!("  step {:>2} {:<11} {detail}\n", s.step, s.action);
        }
        out
    }
}

/// Everything resolved from the scenario before any cryptography runs.
struct Plan {
    level: SecurityLevel,
    hierarchies: Vec<RoleHierarchy>,
    users: Vec<(String, Vec<RoleId>)>,
    policies: BTreeMap<String, AccessPolicy>,
}

fn invalid(msg: impl Into<String>) -> HarnessError {
    HarnessError::ScenarioInvalid(msg.into())
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn build_org(spec: &OrgSpec) -> Result<RoleHierarchy> {
    let org = OrgId::new(&spec.id);
    let h = match (&spec.hierarchy, &spec.root) {
        (Some(text), None) if spec.edges.is_empty() && spec.roles.is_empty() => {
            RoleHierarchy::parse(text, Some(&org))
        }
        (None, Some(root)) => {
            let declared: Vec<&str> = spec.roles.iter().map(String::as_str).collect();
            let edges: Vec<(&str, &str)> = spec
                .edges
                .iter()
                .map(|(p, c)| (p.as_str(), c.as_str()))
                .collect();
            RoleHierarchy::build(&org, root, &declared, &edges)
        }
        _ => {
            return Err(invalid(format!(
                "org {}: give either `root`/`edges` or `hierarchy`",
                spec.id
            )))
        }
    }
    .map_err(|e| invalid(format!("org {}: {e}", spec.id)))?;
    if h.org() != &org {
        return Err(invalid(format!(
            "org {}: hierarchy text names org {}",
            spec.id,
            h.org()
        )));
    }
    Ok(h)
}

fn resolve_role(hs: &BTreeMap<OrgId, RoleHierarchy>, s: &str) -> Result<RoleId> {
    let role: RoleId = s
        .parse()
        .map_err(|_| invalid(format!("role {s:?} is not `org/name`")))?;
    match hs.get(&role.org) {
        Some(h) if h.contains(&role) => Ok(role),
        Some(_) => Err(invalid(format!("role {s} does not exist"))),
        None => Err(invalid(format!("role {s}: unknown org"))),
    }
}

/// A role a user can hold: anything but the authority-managed root.
fn resolve_held_role(hs: &BTreeMap<OrgId, RoleHierarchy>, s: &str) -> Result<RoleId> {
    let role = resolve_role(hs, s)?;
    if hs[&role.org].root() == &role {
        return Err(invalid(format!(
            "{s} is the root role; it is not issued to users"
        )));
    }
    Ok(role)
}

fn resolve_org(hs: &BTreeMap<OrgId, RoleHierarchy>, org: Option<&String>) -> Result<OrgId> {
    match org {
        Some(o) if hs.contains_key(&OrgId::new(o)) => Ok(OrgId::new(o)),
        Some(o) => Err(invalid(format!("unknown org {o}"))),
        None if hs.len() == 1 => Ok(hs.keys().next().expect("one org").clone()),
        None => Err(invalid(
            "query needs `org` when there are several organizations",
        )),
    }
}

fn validate(s: &Scenario) -> Result<Plan> {
    if s.version != SCHEMA_VERSION {
        return Err(invalid(format!("unsupported schema version {}", s.version)));
    }
    let level: SecurityLevel = s
        .engine
        .parse()
        .map_err(|_| invalid(format!("unknown engine {:?}", s.engine)))?;
    if s.orgs.is_empty() {
        return Err(invalid("no organizations"));
    }
    if s.start_time == 0 {
        return Err(invalid("start_time must be positive"));
    }

    let mut hs = BTreeMap::new();
    for spec in &s.orgs {
        let h = build_org(spec)?;
        if hs.insert(h.org().clone(), h).is_some() {
            return Err(invalid(format!("duplicate org {}", spec.id)));
        }
    }

    let mut users = Vec::new();
    let mut user_names = BTreeSet::new();
    for u in &s.users {
        if !user_names.insert(u.id.as_str()) {
            return Err(invalid(format!("duplicate user {}", u.id)));
        }
        let roles = u
            .roles
            .iter()
            .map(|r| resolve_held_role(&hs, r))
            .collect::<Result<Vec<_>>>()?;
        users.push((u.id.clone(), roles));
    }

    let mut policies = BTreeMap::new();
    for doc in &s.documents {
        if doc.keywords.is_empty() {
            return Err(invalid(format!("document {} has no keywords", doc.id)));
        }
        let roles = doc
            .roles
            .iter()
            .map(|r| resolve_role(&hs, r))
            .collect::<Result<Vec<_>>>()?;
        let owner = match (&doc.owner, roles.first()) {
            (Some(o), _) => resolve_org(&hs, Some(o))?,
            (None, Some(first)) => first.org.clone(),
            (None, None) => return Err(invalid(format!("document {} has no roles", doc.id))),
        };
        let policy = AccessPolicy::new(roles, owner)
            .map_err(|e| invalid(format!("document {}: {e}", doc.id)))?;
        if policies.insert(doc.id.clone(), policy).is_some() {
            return Err(invalid(format!("duplicate document {}", doc.id)));
        }
    }

    let mut stored: BTreeSet<&str> = s
        .documents
        .iter()
        .filter(|d| !d.deferred)
        .map(|d| d.id.as_str())
        .collect();
    let user_known = |u: &str| {
        if user_names.contains(u) {
            Ok(())
        } else {
            Err(invalid(format!("unknown user {u}")))
        }
    };
    let mut queried = false;
    for (i, step) in s.steps.iter().enumerate() {
        let at = |e: HarnessError| match e {
            HarnessError::ScenarioInvalid(m) => invalid(format!("step {}: {m}", i + 1)),
            other => other,
        };
        match step {
            Step::Query(q) => {
                user_known(&q.user).map_err(at)?;
                resolve_org(&hs, q.org.as_ref()).map_err(at)?;
                if q.keywords.is_empty() {
                    return Err(at(invalid("query has no keywords")));
                }
                for r in q.roles.iter().flatten() {
                    resolve_role(&hs, r).map_err(at)?;
                }
                for d in &q.documents {
                    if !policies.contains_key(d) {
                        return Err(at(invalid(format!("unknown document {d}"))));
                    }
                }
                check_expectation_fields(q.expect, q.reason, q.sha256.is_some()).map_err(at)?;
                queried = true;
            }
            Step::Replay(r) => {
                if !queried {
                    return Err(at(invalid("replay before any query")));
                }
                check_expectation_fields(r.expect, r.reason, false).map_err(at)?;
            }
            Step::Advance { .. } => {}
            Step::RevokeRole { role, users } => {
                let role = resolve_role(&hs, role).map_err(at)?;
                if hs[&role.org].root() == &role {
                    return Err(at(invalid("the root role cannot be revoked")));
                }
                for u in users {
                    user_known(u).map_err(at)?;
                }
            }
            Step::RevokeUser { user, org } => {
                user_known(user).map_err(at)?;
                resolve_org(&hs, Some(org)).map_err(at)?;
            }
            Step::AssignRole { user, role } => {
                user_known(user).map_err(at)?;
                resolve_held_role(&hs, role).map_err(at)?;
            }
            Step::Store { document } => {
                if !policies.contains_key(document) {
                    return Err(at(invalid(format!("unknown document {document}"))));
                }
                if !stored.insert(document) {
                    return Err(at(invalid(format!(
                        "document {document} is already stored"
                    ))));
                }
            }
        }
    }

    Ok(Plan {
        level,
        hierarchies: hs.into_values().collect(),
        users,
        policies,
    })
}

fn check_expectation_fields(expect: Expect, reason: Option<Rejection>, digest: bool) -> Result<()> {
    match (expect, reason) {
        (Expect::Rejected, None) => Err(invalid("`expect = \"rejected\"` needs a `reason`")),
        (Expect::Rejected, Some(_)) => Ok(()),
        (_, Some(_)) => Err(invalid("`reason` only goes with `expect = \"rejected\"`")),
        (Expect::Match, None) => Ok(()),
        (_, None) if digest => Err(invalid("`sha256` only goes with `expect = \"match\"`")),
        _ => Ok(()),
    }
}

/// Runs every step in order and compares each query with its expectation.
pub fn run_scenario(s: &Scenario) -> Result<ScenarioReport> {
    let plan = validate(s)?;
    with_engine!(plan.level, E => run_typed::<E>(s, plan))
}

struct Runner<'a, E: Engine> {
    s: &'a Scenario,
    d: Deployment<E>,
    policies: BTreeMap<String, AccessPolicy>,
    names: BTreeMap<u64, String>,
    last_org: Option<OrgId>,
}

fn run_typed<E: Engine>(s: &Scenario, plan: Plan) -> Result<ScenarioReport> {
    let d = Deployment::<E>::new(s.seed, plan.hierarchies, s.window, s.start_time)?;
    let mut r = Runner {
        s,
        d,
        policies: plan.policies,
        names: BTreeMap::new(),
        last_org: None,
    };
    for (user, roles) in &plan.users {
        r.d.enroll(user, roles)?;
    }
    for doc in s.documents.iter().filter(|d| !d.deferred) {
        r.store(&doc.id)?;
    }

    let mut report = ScenarioReport {
        name: s.name.clone(),
        engine: E::LEVEL.name().into(),
        documents: 0,
        queries: 0,
        steps: Vec::new(),
    };
    for (i, step) in s.steps.iter().enumerate() {
        let index = i + 1;
        let fail = |detail: String| HarnessError::ExpectationFailed {
            step: index,
            action: step.action().into(),
            detail,
        };
        let outcome = match step {
            Step::Query(q) => {
                report.queries += 1;
                let org = resolve_org(&r.d.hierarchies, q.org.as_ref())?;
                let presented = q
                    .roles
                    .as_ref()
                    .map(|rs| {
                        rs.iter()
                            .map(|x| resolve_role(&r.d.hierarchies, x))
                            .collect::<Result<BTreeSet<_>>>()
                    })
                    .transpose()?;
                let qr = r.d.query(&q.user, &org, &q.keywords, presented.as_ref())?;
                r.last_org = Some(org.clone());
                let outcome = r.outcome(&qr);
                r.check(
                    &org,
                    q.expect,
                    &q.documents,
                    q.sha256.as_deref(),
                    q.reason,
                    &outcome,
                )
                .map_err(fail)?;
                outcome
            }
            Step::Replay(rp) => {
                report.queries += 1;
                let qr = r.d.replay()?;
                let outcome = r.outcome(&qr);
                let org = r.last_org.clone().expect("validated: a query came first");
                r.check(&org, rp.expect, &[], None, rp.reason, &outcome)
                    .map_err(fail)?;
                outcome
            }
            Step::Advance { seconds } => {
                r.d.advance(*seconds);
                StepOutcome::Done
            }
            Step::RevokeRole { role, users } => {
                let role = resolve_role(&r.d.hierarchies, role)?;
                let (_, ids) = r.d.revoke_role(&role, users)?;
                let reencrypted = ids.iter().map(|id| r.names[id].clone()).collect();
                StepOutcome::Revoked { reencrypted }
            }
            Step::RevokeUser { user, org } => {
                r.d.revoke_user(user, &OrgId::new(org))?;
                StepOutcome::Done
            }
            Step::AssignRole { user, role } => {
                let role = resolve_role(&r.d.hierarchies, role)?;
                r.d.assign_role(user, &role)?;
                StepOutcome::Done
            }
            Step::Store { document } => {
                r.store(document)?;
                StepOutcome::Done
            }
        };
        report.steps.push(StepReport {
            step: index,
            action: step.action(),
            outcome,
        });
    }
    report.documents = r.names.len();
    Ok(report)
}

impl<E: Engine> Runner<'_, E> {
    fn store(&mut self, name: &str) -> Result<()> {
        let doc = self
            .s
            .documents
            .iter()
            .find(|d| d.id == name)
            .expect("validated document");
        let id = self
            .d
            .encrypt(doc.payload.as_bytes(), &doc.keywords, &self.policies[name])?;
        self.names.insert(id, name.to_owned());
        Ok(())
    }

    fn outcome(&self, qr: &QueryReport) -> StepOutcome {
        let name = |id: &u64| self.names[id].clone();
        StepOutcome::Query {
            matched: qr.matches.keys().map(name).collect(),
            plaintext_sha256: qr
                .matches
                .iter()
                .map(|(id, m)| (name(id), sha256_hex(m)))
                .collect(),
            undecryptable: qr.undecryptable.iter().map(name).collect(),
            skipped: qr.skipped.iter().map(|(id, r)| (name(id), *r)).collect(),
            rejected: qr.rejected,
            pairings: qr.cloud_ops.pairings,
        }
    }

    fn check(
        &self,
        org: &OrgId,
        expect: Expect,
        documents: &[String],
        sha256: Option<&str>,
        reason: Option<Rejection>,
        outcome: &StepOutcome,
    ) -> std::result::Result<(), String> {
        let StepOutcome::Query {
            matched,
            plaintext_sha256,
            undecryptable,
            skipped,
            rejected,
            ..
        } = outcome
        else {
            unreachable!("queries produce query outcomes")
        };
        if expect != Expect::Rejected {
            if let Some(r) = rejected {
                return Err(format!("request rejected: {r}"));
            }
            if !undecryptable.is_empty() {
                return Err(format!("matched but did not decrypt: {undecryptable:?}"));
            }
        }
        match expect {
            Expect::Match => {
                if matched.is_empty() {
                    return Err(format!("expected a match, got none (skipped: {skipped:?})"));
                }
                if !documents.is_empty() {
                    let want: BTreeSet<&String> = documents.iter().collect();
                    let got: BTreeSet<&String> = matched.iter().collect();
                    if want != got {
                        return Err(format!("expected {want:?}, matched {got:?}"));
                    }
                }
                for name in matched {
                    let doc = self
                        .s
                        .documents
                        .iter()
                        .find(|d| &d.id == name)
                        .expect("known document");
                    if plaintext_sha256[name] != sha256_hex(doc.payload.as_bytes()) {
                        return Err(format!("{name} decrypted to the wrong plaintext"));
                    }
                }
                if let Some(want) = sha256 {
                    match plaintext_sha256.values().collect::<Vec<_>>().as_slice() {
                        [one] if one.eq_ignore_ascii_case(want) => {}
                        [one] => return Err(format!("plaintext digest {one}, expected {want}")),
                        many => {
                            return Err(format!("digest check needs one match, got {}", many.len()))
                        }
                    }
                }
            }
            Expect::NoMatch => {
                if !matched.is_empty() {
                    return Err(format!("expected no match, matched {matched:?}"));
                }
            }
            Expect::Unqualified => {
                if !matched.is_empty() {
                    return Err(format!("expected no match, matched {matched:?}"));
                }
                let targets: Vec<String> = if documents.is_empty() {
                    self.names
                        .iter()
                        .filter(|(id, _)| {
                            self.d
                                .cloud
                                .store
                                .get(**id)
                                .map(|ct| ct.policy.owner_org() == org)
                                .unwrap_or(false)
                        })
                        .map(|(_, n)| n.clone())
                        .collect()
                } else {
                    documents.to_vec()
                };
                for t in &targets {
                    if skipped.get(t) != Some(&Rejection::UnqualifiedRoles) {
                        return Err(format!(
                            "{t}: expected unqualified_roles, got {:?}",
                            skipped.get(t)
                        ));
                    }
                }
            }
            Expect::Rejected => {
                if *rejected != reason {
                    return Err(format!(
                        "expected rejection {reason:?}, got {rejected:?} (matched {matched:?})"
                    ));
                }
            }
        }
        Ok(())
    }
}
