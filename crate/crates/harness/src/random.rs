//! Randomized scenarios with expectations computed from the generated edge
//! lists, independently of the core hierarchy code.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::scenario::{
    DocumentSpec, Expect, OrgSpec, QueryStep, Scenario, Step, UserSpec, SCHEMA_VERSION,
};

#[derive(Clone, Debug)]
pub struct Limits {
    pub max_orgs: usize,
    /// Including the root.
    pub max_roles_per_org: usize,
    /// Longest root-to-role path, in edges.
    pub max_depth: usize,
    pub max_users: usize,
    pub max_documents: usize,
    pub max_keywords: usize,
    pub max_policy_roles: usize,
    /// Queries guaranteed to come from a qualified user with matching keywords.
    pub qualified_queries: usize,
    /// Further queries with a random user and random keywords.
    pub probe_queries: usize,
    pub vocabulary: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Self {
            max_orgs: 3,
            max_roles_per_org: 20,
            max_depth: 5,
            max_users: 10,
            max_documents: 20,
            max_keywords: 4,
            max_policy_roles: 3,
            qualified_queries: 3,
            probe_queries: 1,
            vocabulary: 8,
        }
    }
}

/// A generated org: edges by name, plus each role's parents.
struct GenOrg {
    id: String,
    roles: Vec<String>,
    parents: BTreeMap<String, Vec<String>>,
}

impl GenOrg {
    fn role(&self, name: &str) -> String {
        format!("{}/{}", self.id, name)
    }

    /// Every role from which `target` is reachable downward, `target` included.
    fn ancestors(&self, target: &str) -> BTreeSet<String> {
        let mut seen = BTreeSet::new();
        let mut stack = vec![target.to_owned()];
        while let Some(r) = stack.pop() {
            if seen.insert(r.clone()) {
                stack.extend(self.parents.get(&r).into_iter().flatten().cloned());
            }
        }
        seen
    }
}

fn gen_org<R: Rng>(rng: &mut R, id: String, limits: &Limits) -> GenOrg {
    let n = rng.gen_range(2..=limits.max_roles_per_org.max(2));
    let mut by_level: Vec<Vec<String>> = vec![vec!["root".into()]];
    let mut parents = BTreeMap::new();
    let mut roles = Vec::new();
    for i in 1..n {
        let deepest = by_level.len() - 1;
        let level = rng.gen_range(1..=(deepest + 1).min(limits.max_depth));
        let above = &by_level[level - 1];
        let count = rng.gen_range(1..=2.min(above.len()));
        let ps: Vec<String> = above.choose_multiple(rng, count).cloned().collect();
        let name = format!("r{i}");
        if by_level.len() == level {
            by_level.push(Vec::new());
        }
        by_level[level].push(name.clone());
        parents.insert(name.clone(), ps);
        roles.push(name);
    }
    GenOrg { id, roles, parents }
}

/// Generates one scenario. Every qualified query expects exactly the set of
/// documents the edge-list oracle says it should reach.
pub fn random_scenario(seed: u64, engine: &str, limits: &Limits) -> Scenario {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let orgs: Vec<GenOrg> = (0..rng.gen_range(1..=limits.max_orgs))
        .map(|k| gen_org(&mut rng, format!("org{k}"), limits))
        .collect();
    let all_roles: Vec<(usize, String)> = orgs
        .iter()
        .enumerate()
        .flat_map(|(k, o)| o.roles.iter().map(move |r| (k, r.clone())))
        .collect();
    let vocab: Vec<String> = (0..limits.vocabulary).map(|i| format!("kw{i}")).collect();

    let mut documents = Vec::new();
    for i in 0..rng.gen_range(1..=limits.max_documents) {
        let owner = rng.gen_range(0..orgs.len());
        let own = &orgs[owner];
        let mut roles: BTreeSet<(usize, String)> = BTreeSet::new();
        roles.insert((
            owner,
            own.roles.choose(&mut rng).expect("non-root role").clone(),
        ));
        for _ in 1..rng.gen_range(1..=limits.max_policy_roles) {
            roles.insert(all_roles.choose(&mut rng).expect("roles exist").clone());
        }
        let n_kw = rng.gen_range(1..=limits.max_keywords);
        let keywords: Vec<String> = vocab.choose_multiple(&mut rng, n_kw).cloned().collect();
        documents.push(GenDoc {
            id: format!("doc{i}"),
            owner,
            payload: format!("document {i} / {:016x}", rng.gen::<u64>()),
            keywords,
            roles: roles.into_iter().collect(),
        });
    }

    let mut users: Vec<BTreeSet<(usize, String)>> = (0..rng.gen_range(1..=limits.max_users))
        .map(|_| {
            (0..rng.gen_range(1..=3))
                .map(|_| all_roles.choose(&mut rng).expect("roles exist").clone())
                .collect()
        })
        .collect();

    // Qualified queries: give the chosen user a covering role for every
    // role of the chosen document.
    let mut planned = Vec::new();
    for _ in 0..limits.qualified_queries {
        let d = rng.gen_range(0..documents.len());
        let u = rng.gen_range(0..users.len());
        for (k, r) in &documents[d].roles {
            if !qualified(&orgs, &users[u], *k, r) {
                let covering: Vec<String> = orgs[*k]
                    .ancestors(r)
                    .into_iter()
                    .filter(|a| a != "root")
                    .collect();
                users[u].insert((*k, covering.choose(&mut rng).expect("role itself").clone()));
            }
        }
        let mut keywords = documents[d].keywords.clone();
        keywords.shuffle(&mut rng);
        planned.push((u, documents[d].owner, keywords));
    }
    for _ in 0..limits.probe_queries {
        let u = rng.gen_range(0..users.len());
        let org = rng.gen_range(0..orgs.len());
        let n_kw = rng.gen_range(1..=limits.max_keywords);
        let keywords: Vec<String> = vocab.choose_multiple(&mut rng, n_kw).cloned().collect();
        planned.push((u, org, keywords));
    }

    let steps = planned
        .into_iter()
        .map(|(u, org, keywords)| {
            let want: BTreeSet<&str> = keywords.iter().map(String::as_str).collect();
            let expected: Vec<String> = documents
                .iter()
                .filter(|d| d.owner == org)
                .filter(|d| {
                    d.keywords
                        .iter()
                        .map(String::as_str)
                        .collect::<BTreeSet<_>>()
                        == want
                })
                .filter(|d| {
                    d.roles
                        .iter()
                        .all(|(k, r)| qualified(&orgs, &users[u], *k, r))
                })
                .map(|d| d.id.clone())
                .collect();
            Step::Query(QueryStep {
                user: format!("user{u}"),
                org: Some(orgs[org].id.clone()),
                keywords,
                roles: None,
                expect: if expected.is_empty() {
                    Expect::NoMatch
                } else {
                    Expect::Match
                },
                documents: expected,
                sha256: None,
                reason: None,
            })
        })
        .collect();

    Scenario {
        version: SCHEMA_VERSION,
        name: format!("random-{seed}"),
        seed,
        engine: engine.to_owned(),
        window: rbks_core::cloud::DEFAULT_REPLAY_WINDOW,
        start_time: 1_700_000_000,
        orgs: orgs
            .iter()
            .map(|o| OrgSpec {
                id: o.id.clone(),
                root: Some("root".into()),
                edges: o
                    .parents
                    .iter()
                    .flat_map(|(c, ps)| ps.iter().map(move |p| (p.clone(), c.clone())))
                    .collect(),
                roles: Vec::new(),
                hierarchy: None,
            })
            .collect(),
        users: users
            .iter()
            .enumerate()
            .map(|(i, rs)| UserSpec {
                id: format!("user{i}"),
                roles: rs.iter().map(|(k, r)| orgs[*k].role(r)).collect(),
            })
            .collect(),
        documents: documents
            .into_iter()
            .map(|d| DocumentSpec {
                id: d.id,
                payload: d.payload,
                keywords: d.keywords,
                roles: d.roles.iter().map(|(k, r)| orgs[*k].role(r)).collect(),
                owner: Some(orgs[d.owner].id.clone()),
                deferred: false,
            })
            .collect(),
        steps,
    }
}

struct GenDoc {
    id: String,
    owner: usize,
    payload: String,
    keywords: Vec<String>,
    roles: Vec<(usize, String)>,
}

fn qualified(orgs: &[GenOrg], held: &BTreeSet<(usize, String)>, org: usize, target: &str) -> bool {
    let anc = orgs[org].ancestors(target);
    held.iter().any(|(k, r)| *k == org && anc.contains(r))
}
