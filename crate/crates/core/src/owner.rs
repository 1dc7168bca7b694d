//! Data owners: hybrid encryption with keyword and policy embedding.

use std::collections::{BTreeMap, BTreeSet};

use aes_gcm::aead::{Aead, KeyInit};
use aes_gcm::{Aes256Gcm, Nonce};
use hkdf::Hkdf;
use rand::{CryptoRng, RngCore};
use serde::{Deserialize, Serialize};
use sha2::Sha256;

use crate::authority::{CloudPublicKeys, PublicParams};
use crate::error::{Error, Result};
use crate::hierarchy::{OrgId, RoleId};
use crate::pairing::{BilinearContext, Engine, G1Element, GtElement, Scalar};

const PAYLOAD_INFO: &[u8] = b"rbks/payload-key/v1";
const NONCE_LEN: usize = 12;
const TAG_LEN: usize = 16;

/// The role set `Γ` a ciphertext is bound to. A user must hold, for every
/// role in `Γ`, that role or one of its ancestors.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawPolicy", into = "RawPolicy")]
pub struct AccessPolicy {
    roles: BTreeSet<RoleId>,
    orgs: BTreeSet<OrgId>,
    owner_org: OrgId,
}

#[derive(Serialize, Deserialize)]
struct RawPolicy {
    roles: BTreeSet<RoleId>,
    owner_org: OrgId,
}

impl TryFrom<RawPolicy> for AccessPolicy {
    type Error = Error;
    fn try_from(raw: RawPolicy) -> Result<Self> {
        AccessPolicy::new(raw.roles, raw.owner_org)
    }
}

impl From<AccessPolicy> for RawPolicy {
    fn from(p: AccessPolicy) -> Self {
        RawPolicy {
            roles: p.roles,
            owner_org: p.owner_org,
        }
    }
}

impl AccessPolicy {
    /// `owner_org` anchors `C2`/`C3`; trapdoors must target it.
    pub fn new(roles: impl IntoIterator<Item = RoleId>, owner_org: OrgId) -> Result<Self> {
        let roles: BTreeSet<RoleId> = roles.into_iter().collect();
        if roles.is_empty() {
            return Err(Error::EmptyPolicy);
        }
        let orgs: BTreeSet<OrgId> = roles.iter().map(|r| r.org.clone()).collect();
        if !orgs.contains(&owner_org) {
            return Err(Error::OwnerOrgNotInPolicy(owner_org.to_string()));
        }
        Ok(Self {
            roles,
            orgs,
            owner_org,
        })
    }

    /// Policy owned by the organization of its first role.
    pub fn owned_by_first(roles: impl IntoIterator<Item = RoleId>) -> Result<Self> {
        let roles: BTreeSet<RoleId> = roles.into_iter().collect();
        let owner = roles.first().ok_or(Error::EmptyPolicy)?.org.clone();
        Self::new(roles, owner)
    }

    /// `Γ`.
    pub fn roles(&self) -> &BTreeSet<RoleId> {
        &self.roles
    }

    /// `Γ_Φ`.
    pub fn orgs(&self) -> &BTreeSet<OrgId> {
        &self.orgs
    }

    pub fn owner_org(&self) -> &OrgId {
        &self.owner_org
    }
}

/// `CT = ⟨Enc_K(M), C1, C2, C3, {C4k, C'4k}, {C_r, C'_r}⟩`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Ciphertext<E: Engine> {
    #[serde(with = "hex::serde")]
    pub payload: Vec<u8>,
    pub c1: GtElement<E>,
    pub c2: G1Element<E>,
    pub c3: G1Element<E>,
    pub c4: BTreeMap<OrgId, G1Element<E>>,
    pub c4p: BTreeMap<OrgId, G1Element<E>>,
    pub cr: BTreeMap<RoleId, G1Element<E>>,
    pub crp: BTreeMap<RoleId, G1Element<E>>,
    pub policy: AccessPolicy,
    pub keyword_count: usize,
}

impl<E: Engine> Ciphertext<E> {
    /// Component key sets match `Γ` and `Γ_Φ` exactly.
    pub fn is_well_formed(&self) -> bool {
        let orgs = self.policy.orgs();
        let roles = self.policy.roles();
        self.c4.keys().eq(orgs.iter())
            && self.c4p.keys().eq(orgs.iter())
            && self.cr.keys().eq(roles.iter())
            && self.crp.keys().eq(roles.iter())
    }
}

/// The per-role exponents `d_{r_i}`, `d'_{r_i}`. Everything else (`d_i`,
/// `d_j`, `d_k`, `d'_k`) is a sum over these.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EncryptionRandomness<E: Engine> {
    pub d_role: BTreeMap<RoleId, Scalar<E>>,
    pub dp_role: BTreeMap<RoleId, Scalar<E>>,
}

impl<E: Engine> EncryptionRandomness<E> {
    pub fn sample<R: RngCore + CryptoRng>(policy: &AccessPolicy, rng: &mut R) -> Self {
        let mut draw = || -> BTreeMap<RoleId, Scalar<E>> {
            policy
                .roles()
                .iter()
                .map(|r| (r.clone(), Scalar::random_nonzero(rng)))
                .collect()
        };
        let d_role = draw();
        let dp_role = draw();
        Self { d_role, dp_role }
    }

    /// `d_i = Σ d_{r_i}`.
    pub fn d_i(&self) -> Scalar<E> {
        self.d_role.values().copied().sum()
    }

    /// `d_j = Σ d'_{r_i}`.
    pub fn d_j(&self) -> Scalar<E> {
        self.dp_role.values().copied().sum()
    }

    /// `d = d_i + d_j`.
    pub fn d(&self) -> Scalar<E> {
        self.d_i() + self.d_j()
    }

    /// `d_k`: sum of `d_{r_i}` over the policy roles of `org`.
    pub fn d_k(&self, org: &OrgId) -> Scalar<E> {
        self.d_role
            .iter()
            .filter(|(r, _)| r.org == *org)
            .map(|(_, d)| *d)
            .sum()
    }

    /// `d'_k`.
    pub fn dp_k(&self, org: &OrgId) -> Scalar<E> {
        self.dp_role
            .iter()
            .filter(|(r, _)| r.org == *org)
            .map(|(_, d)| *d)
            .sum()
    }
}

/// `W = Π H1(w_i)`; order-independent.
pub fn keyword_product<E: Engine, S: AsRef<str>>(
    ctx: &BilinearContext<E>,
    keywords: &[S],
) -> Result<Scalar<E>> {
    if keywords.is_empty() {
        return Err(Error::EmptyKeywords);
    }
    Ok(keywords
        .iter()
        .map(|w| ctx.hash_h1(w.as_ref().as_bytes()))
        .product())
}

/// Encrypts `m` for `policy` and embeds the keyword set.
#[allow(clippy::too_many_arguments)]
pub fn encrypt<E: Engine, S: AsRef<str>, R: RngCore + CryptoRng>(
    pp: &PublicParams<E>,
    cloud_pubs: &BTreeMap<OrgId, CloudPublicKeys<E>>,
    m: &[u8],
    keywords: &[S],
    policy: &AccessPolicy,
    role_pks: &BTreeMap<RoleId, G1Element<E>>,
    rng: &mut R,
) -> Result<Ciphertext<E>> {
    let key = GtElement::random(rng);
    let rand = EncryptionRandomness::sample(policy, rng);
    encrypt_with_randomness(
        pp, cloud_pubs, m, keywords, policy, role_pks, &key, &rand, rng,
    )
}

/// [`encrypt`] with caller-supplied `K` and exponents; `rng` only feeds the
/// payload nonce.
#[allow(clippy::too_many_arguments)]
pub fn encrypt_with_randomness<E: Engine, S: AsRef<str>, R: RngCore + CryptoRng>(
    pp: &PublicParams<E>,
    cloud_pubs: &BTreeMap<OrgId, CloudPublicKeys<E>>,
    m: &[u8],
    keywords: &[S],
    policy: &AccessPolicy,
    role_pks: &BTreeMap<RoleId, G1Element<E>>,
    key: &GtElement<E>,
    rand: &EncryptionRandomness<E>,
    rng: &mut R,
) -> Result<Ciphertext<E>> {
    if keywords.is_empty() {
        return Err(Error::EmptyKeywords);
    }
    for role in policy.roles() {
        if !role_pks.contains_key(role) {
            return Err(Error::MissingRolePk(role.to_string()));
        }
        if !rand.d_role.contains_key(role) || !rand.dp_role.contains_key(role) {
            return Err(Error::UnknownRole(role.to_string()));
        }
    }
    for org in policy.orgs() {
        if !cloud_pubs.contains_key(org) {
            return Err(Error::MissingCloudKey(org.to_string()));
        }
    }
    let owner = policy.owner_org();
    let h1_owner = pp.h1_of(owner)?;
    let w = keyword_product(&pp.ctx, keywords)?;

    let d_j = rand.d_j();
    let c1 = *key * pp.y_gt.pow(&rand.d());
    let c2 = h1_owner.pow(&d_j);
    let c3 = cloud_pubs[owner].pub2.pow(&d_j);

    let mut c4 = BTreeMap::new();
    let mut c4p = BTreeMap::new();
    for org in policy.orgs() {
        let pub1 = cloud_pubs[org].pub1;
        c4.insert(org.clone(), pub1.pow(&rand.d_k(org)));
        c4p.insert(org.clone(), pub1.pow(&rand.dp_k(org)));
    }

    let mut cr = BTreeMap::new();
    let mut crp = BTreeMap::new();
    for role in policy.roles() {
        let pk = role_pks[role];
        cr.insert(role.clone(), pk.pow(&(rand.d_role[role] * w)));
        crp.insert(role.clone(), pk.pow(&(rand.dp_role[role] * w)));
    }

    Ok(Ciphertext {
        payload: wrap_payload(key, m, rng),
        c1,
        c2,
        c3,
        c4,
        c4p,
        cr,
        crp,
        policy: policy.clone(),
        keyword_count: keywords.len(),
    })
}

fn payload_cipher<E: Engine>(key: &GtElement<E>) -> Aes256Gcm {
    let hk = Hkdf::<Sha256>::new(None, &key.to_bytes());
    let mut okm = [0u8; 32];
    hk.expand(PAYLOAD_INFO, &mut okm)
        .expect("32 bytes is a valid HKDF length");
    Aes256Gcm::new(&okm.into())
}

/// AES-256-GCM under `HKDF-SHA256(encode(K))`; the nonce is prepended.
pub fn wrap_payload<E: Engine, R: RngCore + CryptoRng>(
    key: &GtElement<E>,
    m: &[u8],
    rng: &mut R,
) -> Vec<u8> {
    let mut nonce = [0u8; NONCE_LEN];
    rng.fill_bytes(&mut nonce);
    let sealed = payload_cipher(key)
        .encrypt(Nonce::from_slice(&nonce), m)
        .expect("AES-GCM accepts payloads of this size");
    let mut out = Vec::with_capacity(NONCE_LEN + sealed.len());
    out.extend_from_slice(&nonce);
    out.extend_from_slice(&sealed);
    out
}

pub fn unwrap_payload<E: Engine>(key: &GtElement<E>, blob: &[u8]) -> Result<Vec<u8>> {
    if blob.len() < NONCE_LEN + TAG_LEN {
        return Err(Error::AuthenticationFailure);
    }
    let (nonce, sealed) = blob.split_at(NONCE_LEN);
    payload_cipher(key)
        .decrypt(Nonce::from_slice(nonce), sealed)
        .map_err(|_| Error::AuthenticationFailure)
}
