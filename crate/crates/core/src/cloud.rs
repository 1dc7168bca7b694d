//! The honest-but-curious cloud: storage, authentication with replay
//! protection, keyword search, partial decryption and re-encryption.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::{self, File, OpenOptions};
use std::io::{Read, Write};
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::authority::{BulletinBoard, CloudKeys, ProxyKeySet, RevocationToken};
use crate::client::{PartialCiphertext, Trapdoor};
use crate::error::{Error, Result};
use crate::hierarchy::{OrgId, RoleHierarchy, RoleId};
use crate::owner::{AccessPolicy, Ciphertext};
use crate::pairing::{pair, Engine, G1Element, GtElement, Scalar};
use crate::telemetry::{self, OpCounts};

/// Default freshness window, in seconds.
pub const DEFAULT_REPLAY_WINDOW: u64 = 300;

/// Why the cloud refused a query.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Error, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rejection {
    #[error("timestamp outside the freshness window")]
    Stale,
    #[error("trapdoor already seen")]
    Replayed,
    #[error("no published public key for this user")]
    UnknownIdentity,
    #[error("user authentication failed")]
    AuthenticationFailed,
    #[error("held roles do not satisfy the access policy")]
    UnqualifiedRoles,
    #[error("no keyword match")]
    KeywordMismatch,
    #[error("trapdoor organization differs from the ciphertext's")]
    OrgMismatch,
}

/// Digests of recently accepted trapdoors. An entry can be evicted once its
/// `ts` leaves the window, since the freshness rule rejects it anyway.
#[derive(Clone, Debug)]
pub struct ReplayCache {
    window: u64,
    seen: HashMap<[u8; 32], u64>,
}

impl Default for ReplayCache {
    fn default() -> Self {
        Self::new(DEFAULT_REPLAY_WINDOW)
    }
}

impl ReplayCache {
    pub fn new(window: u64) -> Self {
        Self {
            window,
            seen: HashMap::new(),
        }
    }

    pub fn window(&self) -> u64 {
        self.window
    }

    pub fn check(&self, digest: &[u8; 32], ts: u64, now: u64) -> Result<(), Rejection> {
        if now.abs_diff(ts) > self.window {
            return Err(Rejection::Stale);
        }
        if self.seen.contains_key(digest) {
            return Err(Rejection::Replayed);
        }
        Ok(())
    }

    pub fn record(&mut self, digest: [u8; 32], ts: u64) {
        self.seen.insert(digest, ts);
    }

    pub fn evict(&mut self, now: u64) {
        let window = self.window;
        self.seen.retain(|_, ts| now.saturating_sub(*ts) <= window);
    }

    pub fn len(&self) -> usize {
        self.seen.len()
    }

    /// `(hex digest, ts)` pairs, for persisting the cache between runs.
    pub fn export(&self) -> BTreeMap<String, u64> {
        self.seen
            .iter()
            .map(|(d, ts)| (hex::encode(d), *ts))
            .collect()
    }

    pub fn import(&mut self, entries: &BTreeMap<String, u64>) -> Result<()> {
        for (d, ts) in entries {
            let digest = hex::decode(d)
                .ok()
                .and_then(|b| <[u8; 32]>::try_from(b).ok())
                .ok_or(Error::InvalidEncoding("replay digest"))?;
            self.seen.insert(digest, *ts);
        }
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.seen.is_empty()
    }
}

/// Output of a successful authentication: `V^3_1` for one ciphertext.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AuthResult<E: Engine> {
    pub v31: GtElement<E>,
    pub user_id: String,
    pub trapdoor_digest: [u8; 32],
}

fn cloud_priv_inv<E: Engine>(
    cloud_privs: &BTreeMap<OrgId, Scalar<E>>,
    org: &OrgId,
) -> Result<Scalar<E>> {
    cloud_privs
        .get(org)
        .and_then(Scalar::invert)
        .ok_or_else(|| Error::MissingCloudKey(org.to_string()))
}

/// `Π_k comp_k^{1/Priv^k_c}`.
fn unblind<E: Engine>(
    comps: &BTreeMap<OrgId, G1Element<E>>,
    cloud_privs: &BTreeMap<OrgId, Scalar<E>>,
) -> Result<G1Element<E>> {
    comps
        .iter()
        .map(|(org, c)| Ok(c.pow(&cloud_priv_inv(cloud_privs, org)?)))
        .product()
}

fn check_org<E: Engine>(ct: &Ciphertext<E>, trap: &Trapdoor<E>) -> Result<()> {
    if trap.org != *ct.policy.owner_org() {
        return Err(Rejection::OrgMismatch.into());
    }
    Ok(())
}

/// Checks freshness, replay, identity and `V^1_1 == V^2_1 · V^3_1`; on
/// success records the trapdoor digest.
pub fn authenticate<E: Engine>(
    cloud_privs: &BTreeMap<OrgId, Scalar<E>>,
    ct: &Ciphertext<E>,
    trap: &Trapdoor<E>,
    user_pub: Option<&G1Element<E>>,
    now: u64,
    cache: &mut ReplayCache,
) -> Result<AuthResult<E>> {
    let digest = trap.digest();
    cache.check(&digest, trap.ts, now)?;
    let user_pub = user_pub.ok_or(Rejection::UnknownIdentity)?;
    check_org(ct, trap)?;

    let u_prime = unblind(&ct.c4p, cloud_privs)?;
    let v11 = pair(&user_pub.pow(&trap.tr1), &u_prime);
    let v21 = pair(&trap.tr3.pow(&Scalar::from_u64(trap.ts)), &u_prime);
    let v31 = pair(&trap.tr4, &u_prime);
    if v11 != v21 * v31 {
        return Err(Rejection::AuthenticationFailed.into());
    }
    cache.record(digest, trap.ts);
    Ok(AuthResult {
        v31,
        user_id: trap.user_id.clone(),
        trapdoor_digest: digest,
    })
}

/// `V^3_1` for a further ciphertext of an already authenticated request.
pub fn reauthenticate<E: Engine>(
    cloud_privs: &BTreeMap<OrgId, Scalar<E>>,
    ct: &Ciphertext<E>,
    trap: &Trapdoor<E>,
    prior: &AuthResult<E>,
) -> Result<AuthResult<E>> {
    check_org(ct, trap)?;
    let u_prime = unblind(&ct.c4p, cloud_privs)?;
    Ok(AuthResult {
        v31: pair(&trap.tr4, &u_prime),
        ..prior.clone()
    })
}

/// How a presented role covers one policy role.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Coverage<E: Engine> {
    pub held: RoleId,
    /// `None` for an exact match (Case 1); otherwise `PKey^{held}_{target}`.
    pub proxy_key: Option<Scalar<E>>,
}

/// Picks a presented role for every policy role: the role itself when
/// presented, else the first presented ancestor. Runs no group operations.
pub fn select_roles<'a, E: Engine>(
    policy: &AccessPolicy,
    presented: impl Iterator<Item = &'a RoleId> + Clone,
    proxy: &ProxyKeySet<E>,
) -> Result<BTreeMap<RoleId, Coverage<E>>, Rejection> {
    policy
        .roles()
        .iter()
        .map(|target| {
            let mut held = presented.clone();
            if held.clone().any(|h| h == target) {
                return Ok((
                    target.clone(),
                    Coverage {
                        held: target.clone(),
                        proxy_key: None,
                    },
                ));
            }
            held.find_map(|h| {
                proxy.get(h, target).map(|k| Coverage {
                    held: h.clone(),
                    proxy_key: Some(*k),
                })
            })
            .map(|c| (target.clone(), c))
            .ok_or(Rejection::UnqualifiedRoles)
        })
        .collect()
}

/// `V^1_{r_x}` (or `V^7_{r_x}`) for one policy role against `component`.
///
/// Case 1 pairs `tr^1` directly. Case 2 first lifts `tr^2` by
/// `t_{r_x}/RS_{r_i}`, the inverse of the proxy key.
pub fn role_factor<E: Engine>(
    trap: &Trapdoor<E>,
    coverage: &Coverage<E>,
    component: &G1Element<E>,
) -> Result<GtElement<E>> {
    let comp = trap
        .roles
        .get(&coverage.held)
        .ok_or_else(|| Error::RoleNotHeld(coverage.held.to_string()))?;
    Ok(match &coverage.proxy_key {
        None => pair(&comp.tr1, component),
        Some(k) => {
            let lift = k.invert().ok_or(Error::InvalidEncoding("zero proxy key"))?;
            pair(&comp.tr2.pow(&lift), component)
        }
    })
}

fn role_product<E: Engine>(
    trap: &Trapdoor<E>,
    selection: &BTreeMap<RoleId, Coverage<E>>,
    components: &BTreeMap<RoleId, G1Element<E>>,
) -> Result<GtElement<E>> {
    selection
        .iter()
        .map(|(target, cov)| {
            let c = components
                .get(target)
                .ok_or_else(|| Error::UnknownRole(target.to_string()))?;
            role_factor(trap, cov, c)
        })
        .product()
}

/// Returns `V_6` when the trapdoor's keywords match the ciphertext's.
pub fn key_search<E: Engine>(
    ct: &Ciphertext<E>,
    trap: &Trapdoor<E>,
    auth: &AuthResult<E>,
    proxy: &ProxyKeySet<E>,
    cloud_privs: &BTreeMap<OrgId, Scalar<E>>,
) -> Result<GtElement<E>> {
    check_org(ct, trap)?;
    let selection = select_roles(&ct.policy, trap.presented(), proxy)?;
    let owner_inv = cloud_priv_inv(cloud_privs, ct.policy.owner_org())?;

    let v2 = role_product(trap, &selection, &ct.crp)?;
    let v3 = v2 / auth.v31;
    let v4 = pair(&trap.tr2, &ct.c2);
    let v5 = pair(&trap.tr4.pow(&owner_inv), &ct.c3);
    let v6 = v4 / v5;
    if v3 != v6 {
        return Err(Rejection::KeywordMismatch.into());
    }
    Ok(v6)
}

/// `V_10 = V_6 · V_7 / V_8`, leaving one exponentiation for the user.
pub fn partial_dec<E: Engine>(
    ct: &Ciphertext<E>,
    trap: &Trapdoor<E>,
    proxy: &ProxyKeySet<E>,
    cloud_privs: &BTreeMap<OrgId, Scalar<E>>,
    v6: &GtElement<E>,
) -> Result<PartialCiphertext<E>> {
    let selection = select_roles(&ct.policy, trap.presented(), proxy)?;
    let v7 = role_product(trap, &selection, &ct.cr)?;
    let u = unblind(&ct.c4, cloud_privs)?;
    let v8 = pair(&trap.tr4, &u);
    let v9 = v7 / v8;
    Ok(PartialCiphertext {
        payload: ct.payload.clone(),
        c1: ct.c1,
        v10: *v6 * v9,
    })
}

/// Raises `C_r`, `C'_r` by `t'/t` for every policy role at or below the
/// revoked role. Returns whether anything changed.
pub fn reencrypt_ciphertext<E: Engine>(
    ct: &mut Ciphertext<E>,
    token: &RevocationToken<E>,
    affected: &BTreeSet<RoleId>,
) -> bool {
    let mut changed = false;
    for role in ct.policy.roles().intersection(affected) {
        if let (Some(c), Some(cp)) = (ct.cr.get_mut(role), ct.crp.get_mut(role)) {
            *c = c.pow(&token.ratio_forward);
            *cp = cp.pow(&token.ratio_forward);
            changed = true;
        }
    }
    changed
}

/// Re-encrypts the whole store; returns the ids that changed.
pub fn reencrypt_role<E: Engine>(
    store: &mut CiphertextStore<E>,
    token: &RevocationToken<E>,
    h: &RoleHierarchy,
) -> Result<Vec<u64>> {
    let affected = h.descendants_inclusive(&token.role)?;
    Ok(store
        .items
        .iter_mut()
        .filter_map(|(id, ct)| reencrypt_ciphertext(ct, token, &affected).then_some(*id))
        .collect())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct IndexEntry {
    id: u64,
    offset: u64,
    len: u64,
    roles: BTreeSet<RoleId>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
struct IndexFile {
    next_id: u64,
    entries: Vec<IndexEntry>,
}

const LOG_FILE: &str = "store.log";
const INDEX_FILE: &str = "store.idx.json";

/// Ciphertexts by id, indexed by role set.
#[derive(Clone, Debug)]
pub struct CiphertextStore<E: Engine> {
    next_id: u64,
    items: BTreeMap<u64, Ciphertext<E>>,
    by_roles: BTreeMap<BTreeSet<RoleId>, BTreeSet<u64>>,
}

impl<E: Engine> Default for CiphertextStore<E> {
    fn default() -> Self {
        Self {
            next_id: 0,
            items: BTreeMap::new(),
            by_roles: BTreeMap::new(),
        }
    }
}

impl<E: Engine> CiphertextStore<E> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, ct: Ciphertext<E>) -> u64 {
        let id = self.next_id;
        self.next_id += 1;
        self.by_roles
            .entry(ct.policy.roles().clone())
            .or_default()
            .insert(id);
        self.items.insert(id, ct);
        id
    }

    pub fn get(&self, id: u64) -> Result<&Ciphertext<E>> {
        self.items.get(&id).ok_or(Error::UnknownCiphertext(id))
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, &Ciphertext<E>)> {
        self.items.iter().map(|(id, ct)| (*id, ct))
    }

    pub fn ids_for_roles(&self, roles: &BTreeSet<RoleId>) -> impl Iterator<Item = u64> + '_ {
        self.by_roles.get(roles).into_iter().flatten().copied()
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Writes the whole store as a fresh log plus index.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let tmp = dir.join(format!("{LOG_FILE}.tmp"));
        let mut log = File::create(&tmp)?;
        let mut index = IndexFile {
            next_id: self.next_id,
            entries: Vec::new(),
        };
        let mut offset = 0u64;
        for (id, ct) in &self.items {
            let entry = write_record(&mut log, *id, ct, offset)?;
            offset += entry.len + RECORD_HEADER;
            index.entries.push(entry);
        }
        log.sync_all()?;
        fs::rename(tmp, dir.join(LOG_FILE))?;
        fs::write(dir.join(INDEX_FILE), serde_json::to_vec_pretty(&index)?)?;
        Ok(())
    }

    /// Inserts `ct` and appends it to the on-disk log.
    pub fn insert_persisted(&mut self, dir: &Path, ct: Ciphertext<E>) -> Result<u64> {
        fs::create_dir_all(dir)?;
        let mut index = read_index(dir)?;
        if index.next_id != self.next_id {
            return Err(Error::MalformedArchive(
                "store out of sync with its index".into(),
            ));
        }
        let mut log = OpenOptions::new()
            .create(true)
            .append(true)
            .open(dir.join(LOG_FILE))?;
        let offset = log.metadata()?.len();
        let id = self.next_id;
        let entry = write_record(&mut log, id, &ct, offset)?;
        index.entries.push(entry);
        index.next_id = id + 1;
        fs::write(dir.join(INDEX_FILE), serde_json::to_vec_pretty(&index)?)?;
        Ok(self.insert(ct))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let index = read_index(dir)?;
        let mut log = Vec::new();
        if let Ok(mut f) = File::open(dir.join(LOG_FILE)) {
            f.read_to_end(&mut log)?;
        }
        let mut store = Self::new();
        for entry in &index.entries {
            let start = entry.offset as usize;
            let end = start + RECORD_HEADER as usize + entry.len as usize;
            let record = log
                .get(start..end)
                .ok_or_else(|| Error::MalformedArchive(format!("record {} truncated", entry.id)))?;
            let id = u64::from_be_bytes(record[..8].try_into().expect("8 bytes"));
            if id != entry.id {
                return Err(Error::MalformedArchive(format!(
                    "record id {id} != index id {}",
                    entry.id
                )));
            }
            let ct = crate::wire::decode_ciphertext::<E>(&record[RECORD_HEADER as usize..])?;
            if *ct.policy.roles() != entry.roles {
                return Err(Error::MalformedArchive(format!(
                    "index roles differ for {id}"
                )));
            }
            store
                .by_roles
                .entry(entry.roles.clone())
                .or_default()
                .insert(id);
            store.items.insert(id, ct);
        }
        store.next_id = index.next_id;
        Ok(store)
    }
}

const RECORD_HEADER: u64 = 16;

fn write_record<E: Engine>(
    log: &mut File,
    id: u64,
    ct: &Ciphertext<E>,
    offset: u64,
) -> Result<IndexEntry> {
    let blob = crate::wire::encode_ciphertext(ct);
    log.write_all(&id.to_be_bytes())?;
    log.write_all(&(blob.len() as u64).to_be_bytes())?;
    log.write_all(&blob)?;
    Ok(IndexEntry {
        id,
        offset,
        len: blob.len() as u64,
        roles: ct.policy.roles().clone(),
    })
}

fn read_index(dir: &Path) -> Result<IndexFile> {
    match fs::read(dir.join(INDEX_FILE)) {
        Ok(bytes) => Ok(serde_json::from_slice(&bytes)?),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(IndexFile::default()),
        Err(e) => Err(e.into()),
    }
}

/// One telemetry row: an operation, its counted primitives and wall time.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TelemetryRow {
    pub operation: String,
    pub counts: OpCounts,
    pub wall_us: u128,
}

#[derive(Clone, Debug, Default)]
pub struct TelemetryLog {
    rows: Vec<TelemetryRow>,
}

impl TelemetryLog {
    pub fn measure<R>(&mut self, operation: &str, f: impl FnOnce() -> R) -> R {
        let start = Instant::now();
        let (out, counts) = telemetry::measure(f);
        self.rows.push(TelemetryRow {
            operation: operation.to_owned(),
            counts,
            wall_us: start.elapsed().as_micros(),
        });
        out
    }

    pub fn rows(&self) -> &[TelemetryRow] {
        &self.rows
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("operation,g1_exp,gt_exp,pairings,hashes,wall_us\n");
        for r in &self.rows {
            let c = &r.counts;
            out += &format!(
                "{},{},{},{},{},{}\n",
                r.operation, c.g1_exp, c.gt_exp, c.pairings, c.hashes, r.wall_us
            );
        }
        out
    }
}

/// Result of one search request over the whole store.
#[derive(Clone, Debug, Default)]
pub struct SearchOutcome<E: Engine> {
    pub matches: Vec<(u64, PartialCiphertext<E>)>,
    /// Ciphertexts considered and passed over, with the reason.
    pub skipped: BTreeMap<u64, Rejection>,
}

/// A cloud holding keys from every authority it serves.
#[derive(Clone, Debug)]
pub struct CloudServer<E: Engine> {
    pub cloud_privs: BTreeMap<OrgId, Scalar<E>>,
    pub proxy: ProxyKeySet<E>,
    pub store: CiphertextStore<E>,
    pub cache: ReplayCache,
    pub telemetry: TelemetryLog,
}

impl<E: Engine> CloudServer<E> {
    pub fn new(window: u64) -> Self {
        Self {
            cloud_privs: BTreeMap::new(),
            proxy: ProxyKeySet::new(),
            store: CiphertextStore::new(),
            cache: ReplayCache::new(window),
            telemetry: TelemetryLog::default(),
        }
    }

    pub fn add_cloud_keys(&mut self, keys: &CloudKeys<E>) {
        self.cloud_privs.insert(keys.org.clone(), keys.private);
    }

    /// Runs a trapdoor against every stored ciphertext.
    ///
    /// Ciphertexts of another organization or whose policy the presented
    /// roles cannot cover are skipped before any pairing. The request is
    /// authenticated once, against the first remaining ciphertext; `V^3_1`
    /// is recomputed for each further one.
    pub fn search(
        &mut self,
        trap: &Trapdoor<E>,
        board: &BulletinBoard<E>,
        now: u64,
    ) -> Result<SearchOutcome<E>> {
        self.cache.evict(now);
        let digest = trap.digest();
        self.cache.check(&digest, trap.ts, now)?;

        let mut outcome = SearchOutcome {
            matches: Vec::new(),
            skipped: BTreeMap::new(),
        };
        let mut candidates = Vec::new();
        for (id, ct) in self.store.iter() {
            if trap.org != *ct.policy.owner_org() {
                outcome.skipped.insert(id, Rejection::OrgMismatch);
            } else if select_roles(&ct.policy, trap.presented(), &self.proxy).is_err() {
                outcome.skipped.insert(id, Rejection::UnqualifiedRoles);
            } else {
                candidates.push(id);
            }
        }

        let user_pub = board.user_pub(&trap.org, &trap.user_id);
        let mut auth: Option<AuthResult<E>> = None;
        for id in candidates {
            let ct = self.store.get(id)?;
            let (privs, proxy) = (&self.cloud_privs, &self.proxy);
            let this_auth = match &auth {
                None => self.telemetry.measure("authenticate", || {
                    authenticate(privs, ct, trap, user_pub, now, &mut self.cache)
                })?,
                Some(prior) => self
                    .telemetry
                    .measure("reauthenticate", || reauthenticate(privs, ct, trap, prior))?,
            };
            let found = self.telemetry.measure("key_search", || {
                key_search(ct, trap, &this_auth, proxy, privs)
            });
            match found {
                Ok(v6) => {
                    let pc = self
                        .telemetry
                        .measure("partial_dec", || partial_dec(ct, trap, proxy, privs, &v6))?;
                    outcome.matches.push((id, pc));
                }
                Err(Error::Rejected(r)) => {
                    outcome.skipped.insert(id, r);
                }
                Err(e) => return Err(e),
            }
            auth = Some(this_auth);
        }
        Ok(outcome)
    }

    /// Role-level revocation on the cloud side: proxy keys and ciphertexts.
    pub fn apply_revocation(
        &mut self,
        token: &RevocationToken<E>,
        h: &RoleHierarchy,
    ) -> Result<Vec<u64>> {
        self.proxy.apply_revocation(token, h)?;
        let store = &mut self.store;
        self.telemetry
            .measure("reencrypt_role", || reencrypt_role(store, token, h))
    }
}
