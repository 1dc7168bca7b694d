//! Per-phase timing and exact operation counts.
//!
//! Layout for `|Γ|` policy roles over `|Γ_Φ|` orgs: org `bK` has
//! `root -> hub -> leaf_i`, and policy role `i` is `b{i mod Φ}/leaf_{i div Φ}`.
//! The benchmark user holds those leaves (exact matches) or, with
//! `via_ancestors`, every org's `hub` (proxy path), plus `pad_j` roles in
//! `b0` to reach `|S|`.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rbks_core::client::{full_dec, trap_gen, PartialCiphertext, SearchSession, Trapdoor};
use rbks_core::cloud::{authenticate, key_search, partial_dec, AuthResult, ReplayCache};
use rbks_core::hierarchy::{OrgId, RoleHierarchy, RoleId};
use rbks_core::owner::{encrypt, AccessPolicy, Ciphertext};
use rbks_core::pairing::{Engine, GtElement, SecurityLevel};
use rbks_core::telemetry::{self, OpCounts};
use rbks_core::with_engine;
use serde::Serialize;

use crate::error::{HarnessError, Result};
use crate::sim::Deployment;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    Enc,
    TrapGen,
    Authentication,
    KeySearch,
    PartialDec,
    Decryption,
}

impl Phase {
    pub const ALL: [Phase; 6] = [
        Phase::Enc,
        Phase::TrapGen,
        Phase::Authentication,
        Phase::KeySearch,
        Phase::PartialDec,
        Phase::Decryption,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Phase::Enc => "enc",
            Phase::TrapGen => "trapgen",
            Phase::Authentication => "authentication",
            Phase::KeySearch => "keysearch",
            Phase::PartialDec => "partialdec",
            Phase::Decryption => "decryption",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Phase {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        let norm: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_lowercase();
        Phase::ALL
            .into_iter()
            .find(|p| p.name() == norm || (norm == "auth" && *p == Phase::Authentication))
            .ok_or_else(|| HarnessError::Usage(format!("unknown phase {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BenchParams {
    /// `|Γ|`.
    pub gamma: usize,
    /// `|Γ_Φ|`.
    pub orgs: usize,
    /// `|S|`, the roles presented in the trapdoor.
    pub roles: usize,
    pub via_ancestors: bool,
    pub trials: usize,
    pub seed: u64,
}

impl BenchParams {
    /// `|Γ| = |Γ_Φ| = |S| = n`.
    pub fn square(n: usize, trials: usize) -> Self {
        Self {
            gamma: n,
            orgs: n,
            roles: n,
            via_ancestors: false,
            trials,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchReport {
    pub phase: Phase,
    pub engine: &'static str,
    pub gamma: usize,
    pub orgs: usize,
    pub roles: usize,
    pub trials: usize,
    /// Counts of one trial; every trial is checked to perform the same.
    pub counts: OpCounts,
    pub mean_ms: f64,
    pub min_ms: f64,
}

pub const CSV_HEADER: &str = "phase,|Γ|,|Γ_Φ|,|S|,g1_exp,gt_exp,pairings,hashes,mean_ms";

impl BenchReport {
    pub fn csv_row(&self) -> String {
        let c = &self.counts;
        format!(
            "{},{},{},{},{},{},{},{},{:.4}",
            self.phase,
            self.gamma,
            self.orgs,
            self.roles,
            c.g1_exp,
            c.gt_exp,
            c.pairings,
            c.hashes,
            self.mean_ms
        )
    }
}

pub fn to_csv(reports: &[BenchReport]) -> String {
    let mut out = format!("{CSV_HEADER}\n");
    for r in reports {
        out += &r.csv_row();
        out.push('\n');
    }
    out
}

const USER: &str = "bench-user";
const KEYWORDS: [&str; 1] = ["benchmark"];
const NOW: u64 = 1_700_000_000;

struct Fixture<E: Engine> {
    d: Deployment<E>,
    policy: AccessPolicy,
    owner: OrgId,
}

fn org_name(k: usize) -> String {
    format!("b{k}")
}

fn fixture<E: Engine>(p: &BenchParams) -> Result<Fixture<E>> {
    if p.gamma == 0 || p.orgs == 0 || p.orgs > p.gamma {
        return Err(HarnessError::Usage("need 1 <= |Γ_Φ| <= |Γ|".into()));
    }
    let base = if p.via_ancestors { p.orgs } else { p.gamma };
    if p.roles < base {
        return Err(HarnessError::Usage(format!(
            "|S| must be at least {base} for this layout"
        )));
    }
    let pads = p.roles - base;

    let policy_roles: Vec<RoleId> = (0..p.gamma)
        .map(|i| RoleId::new(org_name(i % p.orgs), format!("leaf_{}", i / p.orgs)))
        .collect();
    let mut hierarchies = Vec::new();
    for k in 0..p.orgs {
        let org = OrgId::new(org_name(k));
        let mut edges = vec![("root".to_owned(), "hub".to_owned())];
        edges.extend(
            policy_roles
                .iter()
                .filter(|r| r.org == org)
                .map(|r| ("hub".to_owned(), r.name.clone())),
        );
        if k == 0 {
            edges.extend((0..pads).map(|j| ("hub".to_owned(), format!("pad_{j}"))));
        }
        let edges: Vec<(&str, &str)> = edges
            .iter()
            .map(|(a, b)| (a.as_str(), b.as_str()))
            .collect();
        hierarchies.push(RoleHierarchy::build(&org, "root", &[], &edges)?);
    }

    let mut d = Deployment::<E>::new(
        p.seed,
        hierarchies,
        rbks_core::cloud::DEFAULT_REPLAY_WINDOW,
        NOW,
    )?;
    let mut held: Vec<RoleId> = if p.via_ancestors {
        (0..p.orgs)
            .map(|k| RoleId::new(org_name(k), "hub"))
            .collect()
    } else {
        policy_roles.clone()
    };
    held.extend((0..pads).map(|j| RoleId::new(org_name(0), format!("pad_{j}"))));
    d.enroll(USER, &held)?;
    let owner = OrgId::new(org_name(0));
    let policy = AccessPolicy::new(policy_roles, owner.clone())?;
    Ok(Fixture { d, policy, owner })
}

/// Timings of one phase at one size.
struct Sample {
    counts: Option<OpCounts>,
    total: f64,
    min: f64,
    n: usize,
}

impl Sample {
    fn new() -> Self {
        Self {
            counts: None,
            total: 0.0,
            min: f64::INFINITY,
            n: 0,
        }
    }

    /// Every call of a phase must perform the same operations.
    fn check(&mut self, c: OpCounts) {
        match self.counts {
            None => self.counts = Some(c),
            Some(prev) => assert_eq!(prev, c, "operation counts differ between trials"),
        }
    }

    fn add(&mut self, c: OpCounts, ms: f64) {
        self.check(c);
        self.total += ms;
        self.min = self.min.min(ms);
        self.n += 1;
    }
}

const PAYLOAD: [u8; 64] = [0x42; 64];

/// A fixture plus the inputs the later phases consume.
struct Prepared<E: Engine> {
    params: BenchParams,
    f: Fixture<E>,
    ct: Ciphertext<E>,
    trapdoor: Trapdoor<E>,
    auth: AuthResult<E>,
    v6: GtElement<E>,
    pc: PartialCiphertext<E>,
    session_bytes: Vec<u8>,
    rng: ChaCha20Rng,
}

fn time<R>(f: impl FnOnce() -> R) -> (OpCounts, f64) {
    let start = Instant::now();
    let (out, c) = telemetry::measure(f);
    let ms = start.elapsed().as_secs_f64() * 1e3;
    drop(out);
    (c, ms)
}

impl<E: Engine> Prepared<E> {
    fn new(p: &BenchParams) -> Result<Self> {
        if p.trials == 0 {
            return Err(HarnessError::Usage("trials must be at least 1".into()));
        }
        let f = fixture::<E>(p)?;
        let mut rng = ChaCha20Rng::seed_from_u64(p.seed ^ 0x5eed);
        let d = &f.d;
        let ct = encrypt(
            &d.pp,
            d.board.cloud_pubs(),
            &PAYLOAD,
            &KEYWORDS,
            &f.policy,
            d.board.role_pks(),
            &mut rng,
        )?;
        let agent = &d.users[USER];
        let keys = &agent.keys[&f.owner];
        let (privs, proxy) = (&d.cloud.cloud_privs, &d.cloud.proxy);
        let (trapdoor, session) =
            trap_gen(&d.ctx, keys, &agent.ring, None, &KEYWORDS, NOW, &mut rng)?;
        let user_pub = d.board.user_pub(&f.owner, USER);
        let auth = authenticate(
            privs,
            &ct,
            &trapdoor,
            user_pub,
            NOW,
            &mut ReplayCache::default(),
        )?;
        let v6 = key_search(&ct, &trapdoor, &auth, proxy, privs)?;
        let pc = partial_dec(&ct, &trapdoor, proxy, privs, &v6)?;
        Ok(Self {
            params: p.clone(),
            session_bytes: session.to_local_bytes(),
            f,
            ct,
            trapdoor,
            auth,
            v6,
            pc,
            rng,
        })
    }

    /// One call of `phase`. Fresh inputs (a trapdoor for authentication, a
    /// session for decryption) are made outside the timed region.
    fn once(&mut self, phase: Phase) -> (OpCounts, f64) {
        let Prepared {
            f,
            ct,
            trapdoor,
            auth,
            v6,
            pc,
            session_bytes,
            rng,
            ..
        } = self;
        let d = &f.d;
        let agent = &d.users[USER];
        let keys = &agent.keys[&f.owner];
        let (privs, proxy) = (&d.cloud.cloud_privs, &d.cloud.proxy);
        let trap = |rng: &mut ChaCha20Rng| {
            trap_gen(&d.ctx, keys, &agent.ring, None, &KEYWORDS, NOW, rng)
                .expect("benchmark trapdoor")
        };
        match phase {
            Phase::Enc => time(|| {
                encrypt(
                    &d.pp,
                    d.board.cloud_pubs(),
                    &PAYLOAD,
                    &KEYWORDS,
                    &f.policy,
                    d.board.role_pks(),
                    rng,
                )
                .expect("benchmark encryption")
            }),
            Phase::TrapGen => time(|| trap(rng)),
            Phase::Authentication => {
                let t = trap(rng).0;
                let user_pub = d.board.user_pub(&f.owner, USER);
                let mut cache = ReplayCache::default();
                time(|| {
                    authenticate(privs, ct, &t, user_pub, NOW, &mut cache)
                        .expect("benchmark authentication")
                })
            }
            Phase::KeySearch => {
                time(|| key_search(ct, trapdoor, auth, proxy, privs).expect("benchmark key search"))
            }
            Phase::PartialDec => time(|| {
                partial_dec(ct, trapdoor, proxy, privs, v6).expect("benchmark partial decryption")
            }),
            Phase::Decryption => {
                let s = SearchSession::<E>::from_local_bytes(session_bytes).expect("session bytes");
                time(|| {
                    let m = full_dec(pc, &keys.priv_global, s).expect("benchmark decryption");
                    assert_eq!(m, PAYLOAD);
                })
            }
        }
    }

    fn report(&self, phase: Phase, s: &Sample) -> BenchReport {
        let p = &self.params;
        BenchReport {
            phase,
            engine: E::LEVEL.name(),
            gamma: p.gamma,
            orgs: p.orgs,
            roles: p.roles,
            trials: s.n,
            counts: s.counts.expect("at least one call"),
            mean_ms: s.total / s.n as f64,
            min_ms: s.min,
        }
    }
}

/// Times every phase of every prepared size. Trials are interleaved across
/// sizes and phases, so a slow stretch of the host does not land on a
/// single size. One untimed warm-up call per phase and size.
fn run_interleaved<E: Engine>(
    preps: &mut [Prepared<E>],
    phases: &[Phase],
    trials: usize,
) -> Vec<BenchReport> {
    let mut samples: Vec<Vec<Sample>> = preps
        .iter()
        .map(|_| phases.iter().map(|_| Sample::new()).collect())
        .collect();
    for (prep, row) in preps.iter_mut().zip(&mut samples) {
        for (&phase, s) in phases.iter().zip(row.iter_mut()) {
            s.check(prep.once(phase).0);
        }
    }
    for _ in 0..trials {
        for (prep, row) in preps.iter_mut().zip(&mut samples) {
            for (&phase, s) in phases.iter().zip(row.iter_mut()) {
                let (c, ms) = prep.once(phase);
                s.add(c, ms);
            }
        }
    }
    let mut out = Vec::new();
    for (j, &phase) in phases.iter().enumerate() {
        for (prep, row) in preps.iter().zip(&samples) {
            out.push(prep.report(phase, &row[j]));
        }
    }
    out
}

pub fn bench<E: Engine>(phase: Phase, p: &BenchParams) -> Result<BenchReport> {
    Ok(bench_phases::<E>(&[phase], p)?.remove(0))
}

/// Several phases over one fixture, which is the expensive part to build.
pub fn bench_phases<E: Engine>(phases: &[Phase], p: &BenchParams) -> Result<Vec<BenchReport>> {
    let mut preps = [Prepared::<E>::new(p)?];
    Ok(run_interleaved(&mut preps, phases, p.trials))
}

pub fn bench_phases_at(
    level: SecurityLevel,
    phases: &[Phase],
    p: &BenchParams,
) -> Result<Vec<BenchReport>> {
    with_engine!(level, E => bench_phases::<E>(phases, p))
}

/// `|Γ| = |Γ_Φ| = |S| = n` for each `n` in `sizes`, grouped by phase.
pub fn sweep(
    level: SecurityLevel,
    phases: &[Phase],
    sizes: impl IntoIterator<Item = usize>,
    trials: usize,
) -> Result<Vec<BenchReport>> {
    let sizes: Vec<usize> = sizes.into_iter().collect();
    with_engine!(level, E => sweep_typed::<E>(phases, &sizes, trials))
}

fn sweep_typed<E: Engine>(
    phases: &[Phase],
    sizes: &[usize],
    trials: usize,
) -> Result<Vec<BenchReport>> {
    let mut preps = sizes
        .iter()
        .map(|&n| Prepared::<E>::new(&BenchParams::square(n, trials)))
        .collect::<Result<Vec<_>>>()?;
    Ok(run_interleaved(&mut preps, phases, trials))
}
