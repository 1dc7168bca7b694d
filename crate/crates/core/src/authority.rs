//! System authorities: global setup, role parameters, cloud and user key
//! issuance, and revocation.

use std::collections::{BTreeMap, BTreeSet};

use rand::{CryptoRng, RngCore};
use serde::{Deserialize, Serialize};

use crate::agreement::{run_agreement, SharedGroupSecret};
use crate::error::{Error, Result};
use crate::hierarchy::{OrgId, RoleHierarchy, RoleId};
use crate::pairing::{
    pair, setup_context, BilinearContext, Engine, G1Element, GtElement, Scalar, SecurityLevel,
};

/// `PP = ⟨g, ê, H1, H2, Y, {h1_k}⟩`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawParams<E>", into = "RawParams<E>", bound = "")]
pub struct PublicParams<E: Engine> {
    pub ctx: BilinearContext<E>,
    /// `Y = ê(g, g)^y`.
    pub y_gt: GtElement<E>,
    /// `h1_k = g^{η_k}` per authority.
    pub h1: BTreeMap<OrgId, G1Element<E>>,
}

#[derive(Serialize, Deserialize)]
#[serde(bound = "")]
struct RawParams<E: Engine> {
    level: SecurityLevel,
    y_gt: GtElement<E>,
    h1: BTreeMap<OrgId, G1Element<E>>,
}

impl<E: Engine> TryFrom<RawParams<E>> for PublicParams<E> {
    type Error = Error;
    fn try_from(raw: RawParams<E>) -> Result<Self> {
        Ok(PublicParams {
            ctx: setup_context(raw.level)?,
            y_gt: raw.y_gt,
            h1: raw.h1,
        })
    }
}

impl<E: Engine> From<PublicParams<E>> for RawParams<E> {
    fn from(pp: PublicParams<E>) -> Self {
        RawParams {
            level: pp.ctx.level(),
            y_gt: pp.y_gt,
            h1: pp.h1,
        }
    }
}

impl<E: Engine> PublicParams<E> {
    /// `ê(g^y, g) == Y`, the check any authority holding `g^y` can run.
    pub fn check_y(&self, g_y: &G1Element<E>) -> bool {
        pair(g_y, &self.ctx.g()) == self.y_gt
    }

    pub fn h1_of(&self, org: &OrgId) -> Result<&G1Element<E>> {
        self.h1
            .get(org)
            .ok_or_else(|| Error::UnknownOrg(org.to_string()))
    }
}

/// `MS_k = ⟨g^y, η_k, μ_k, x_k⟩`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct MasterSecret<E: Engine> {
    pub org: OrgId,
    pub g_y: G1Element<E>,
    pub eta: Scalar<E>,
    pub mu: Scalar<E>,
    pub x: Scalar<E>,
}

/// Public parameters plus each authority's master secret.
pub type Setup<E> = (PublicParams<E>, BTreeMap<OrgId, MasterSecret<E>>);

/// Runs the group key agreement across `orgs` (or samples `y` directly for a
/// single authority) and derives every authority's master secret.
pub fn system_setup<E: Engine, R: RngCore + CryptoRng>(
    ctx: &BilinearContext<E>,
    orgs: &[OrgId],
    rng: &mut R,
) -> Result<Setup<E>> {
    let secrets: Vec<Scalar<E>> = orgs.iter().map(|_| Scalar::random_nonzero(rng)).collect();
    system_setup_with_secrets(ctx, orgs, &secrets, rng)
}

/// [`system_setup`] with caller-chosen agreement secrets `a_k`; `y` is then
/// `Σ a_k a_{k+1}` (or `a_1` for a single authority).
pub fn system_setup_with_secrets<E: Engine, R: RngCore + CryptoRng>(
    ctx: &BilinearContext<E>,
    orgs: &[OrgId],
    agreement_secrets: &[Scalar<E>],
    rng: &mut R,
) -> Result<Setup<E>> {
    if orgs.is_empty() {
        return Err(Error::NotEnoughParticipants(1));
    }
    let unique: BTreeSet<&OrgId> = orgs.iter().collect();
    if unique.len() != orgs.len() || agreement_secrets.len() != orgs.len() {
        return Err(Error::MismatchedRoundData(
            "one distinct authority per agreement secret required".into(),
        ));
    }

    let shared = if orgs.len() == 1 {
        SharedGroupSecret(ctx.g().pow(&agreement_secrets[0]))
    } else {
        run_agreement(agreement_secrets)?
    };
    let g_y = shared.value();

    let mut masters = BTreeMap::new();
    let mut h1 = BTreeMap::new();
    for org in orgs {
        let ms = MasterSecret {
            org: org.clone(),
            g_y,
            eta: Scalar::random_nonzero(rng),
            mu: Scalar::random_nonzero(rng),
            x: Scalar::random_nonzero(rng),
        };
        h1.insert(org.clone(), ctx.g().pow(&ms.eta));
        masters.insert(org.clone(), ms);
    }
    let pp = PublicParams {
        ctx: *ctx,
        y_gt: pair(&g_y, &ctx.g()),
        h1,
    };
    Ok((pp, masters))
}

/// Per-role secrets for a non-root role.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct RoleSecretRecord<E: Engine> {
    pub role: RoleId,
    /// `t_r`.
    pub t: Scalar<E>,
    /// `RS_r = Π_{r_j ∈ R_r} t_{r_j}`.
    pub rs: Scalar<E>,
    /// `PK_r = g^{RS_r}`.
    pub pk: G1Element<E>,
}

/// Everything an authority keeps about one hierarchy's roles.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct RoleSecrets<E: Engine> {
    /// `t` for every role, the root included.
    pub params: BTreeMap<RoleId, Scalar<E>>,
    /// Records for every non-root role.
    pub records: BTreeMap<RoleId, RoleSecretRecord<E>>,
}

impl<E: Engine> RoleSecrets<E> {
    pub fn record(&self, role: &RoleId) -> Result<&RoleSecretRecord<E>> {
        self.records
            .get(role)
            .ok_or_else(|| Error::UnknownRole(role.to_string()))
    }

    /// Role public keys, for the bulletin board.
    pub fn public_keys(&self) -> BTreeMap<RoleId, G1Element<E>> {
        self.records
            .iter()
            .map(|(r, rec)| (r.clone(), rec.pk))
            .collect()
    }
}

/// Cloud-held proxy re-encryption keys
/// `PKey^{held}_{target} = Π_{r_j ∈ R_target \ {held}} t_{r_j}`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(
    bound = "",
    from = "Vec<ProxyKeyEntry<E>>",
    into = "Vec<ProxyKeyEntry<E>>"
)]
pub struct ProxyKeySet<E: Engine> {
    keys: BTreeMap<(RoleId, RoleId), Scalar<E>>,
}

#[derive(Serialize, Deserialize)]
#[serde(bound = "")]
struct ProxyKeyEntry<E: Engine> {
    held: RoleId,
    target: RoleId,
    key: Scalar<E>,
}

impl<E: Engine> From<Vec<ProxyKeyEntry<E>>> for ProxyKeySet<E> {
    fn from(entries: Vec<ProxyKeyEntry<E>>) -> Self {
        let keys = entries
            .into_iter()
            .map(|e| ((e.target, e.held), e.key))
            .collect();
        Self { keys }
    }
}

impl<E: Engine> From<ProxyKeySet<E>> for Vec<ProxyKeyEntry<E>> {
    fn from(set: ProxyKeySet<E>) -> Self {
        set.keys
            .into_iter()
            .map(|((target, held), key)| ProxyKeyEntry { held, target, key })
            .collect()
    }
}

impl<E: Engine> ProxyKeySet<E> {
    pub fn new() -> Self {
        Self {
            keys: BTreeMap::new(),
        }
    }

    pub fn get(&self, held: &RoleId, target: &RoleId) -> Option<&Scalar<E>> {
        self.keys.get(&(target.clone(), held.clone()))
    }

    pub fn insert(&mut self, held: RoleId, target: RoleId, key: Scalar<E>) {
        self.keys.insert((target, held), key);
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    /// `(held, target, key)` triples.
    pub fn iter(&self) -> impl Iterator<Item = (&RoleId, &RoleId, &Scalar<E>)> {
        self.keys
            .iter()
            .map(|((target, held), k)| (held, target, k))
    }

    /// Absorbs another authority's keys.
    pub fn merge(&mut self, other: ProxyKeySet<E>) {
        self.keys.extend(other.keys);
    }

    /// Multiplies by `t'/t` every key whose product contains the revoked
    /// role's `t`: the target descends from the revoked role and the held
    /// role is not the revoked role itself.
    pub fn apply_revocation(
        &mut self,
        token: &RevocationToken<E>,
        h: &RoleHierarchy,
    ) -> Result<()> {
        let affected = h.descendants_inclusive(&token.role)?;
        for ((target, held), key) in self.keys.iter_mut() {
            if affected.contains(target) && *held != token.role {
                *key = *key * token.ratio_forward;
            }
        }
        Ok(())
    }
}

/// Samples `t` for every role and derives records and proxy keys. The root
/// gets a `t` but no record or proxy keys.
pub fn manage_role<E: Engine, R: RngCore + CryptoRng>(
    ctx: &BilinearContext<E>,
    h: &RoleHierarchy,
    rng: &mut R,
) -> (RoleSecrets<E>, ProxyKeySet<E>) {
    let params = h
        .roles()
        .map(|r| (r.clone(), Scalar::random_nonzero(rng)))
        .collect();
    manage_role_with(ctx, h, params).expect("every role has a parameter")
}

/// [`manage_role`] with caller-chosen `t` values.
pub fn manage_role_with<E: Engine>(
    ctx: &BilinearContext<E>,
    h: &RoleHierarchy,
    params: BTreeMap<RoleId, Scalar<E>>,
) -> Result<(RoleSecrets<E>, ProxyKeySet<E>)> {
    let t_of = |r: &RoleId| {
        params
            .get(r)
            .copied()
            .ok_or_else(|| Error::UnknownRole(r.to_string()))
    };

    let mut records = BTreeMap::new();
    let mut proxy = ProxyKeySet::new();
    for role in h.roles().filter(|r| *r != h.root()) {
        let ancestors = h.ancestors_of(role)?;
        let rs = ancestors.iter().map(t_of).product::<Result<Scalar<E>>>()?;
        records.insert(
            role.clone(),
            RoleSecretRecord {
                role: role.clone(),
                t: t_of(role)?,
                rs,
                pk: ctx.g().pow(&rs),
            },
        );
        for held in ancestors.iter().filter(|a| *a != role) {
            let key = ancestors
                .iter()
                .filter(|a| *a != held)
                .map(t_of)
                .product::<Result<Scalar<E>>>()?;
            proxy.insert(held.clone(), role.clone(), key);
        }
    }
    Ok((RoleSecrets { params, records }, proxy))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct CloudPublicKeys<E: Engine> {
    /// `g^{μ_k · Priv_c}`.
    pub pub1: G1Element<E>,
    /// `g^{x_k · Priv_c}`.
    pub pub2: G1Element<E>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct CloudKeys<E: Engine> {
    pub org: OrgId,
    pub cloud_id: String,
    /// `Priv^k_c = H2(g^{y·H1(ID_c)/x_k})`.
    pub private: Scalar<E>,
    pub public: CloudPublicKeys<E>,
}

pub fn pub_cloud_key_gen<E: Engine>(
    ctx: &BilinearContext<E>,
    ms: &MasterSecret<E>,
    cloud_id: &str,
) -> CloudKeys<E> {
    let x_inv = ms.x.invert().expect("x_k is nonzero");
    let private = ctx.hash_h2(&ms.g_y.pow(&(ctx.hash_h1(cloud_id.as_bytes()) * x_inv)));
    CloudKeys {
        org: ms.org.clone(),
        cloud_id: cloud_id.to_owned(),
        private,
        public: CloudPublicKeys {
            pub1: ctx.g().pow(&(ms.mu * private)),
            pub2: ctx.g().pow(&(ms.x * private)),
        },
    }
}

/// Key material from one authority's enrolment of a user.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct UserKeys<E: Engine> {
    pub org: OrgId,
    pub user_id: String,
    /// `Priv_u = H2(g^{y·H1(ID_u)})`, identical across authorities.
    pub priv_global: Scalar<E>,
    /// `Priv^k_u = g^{(y·Priv_u + x_k)/η_k}`.
    pub priv_org: G1Element<E>,
    /// `Pub^k_u = g^{H2(Priv^k_u)/Priv_u}`, published on the bulletin board.
    pub pub_org: G1Element<E>,
    /// `US_u = g^{y·Priv_u + μ_k}`, shared with the role-managers only.
    pub user_secret: G1Element<E>,
}

pub fn user_priv_key_gen<E: Engine>(
    ctx: &BilinearContext<E>,
    ms: &MasterSecret<E>,
    user_id: &str,
) -> UserKeys<E> {
    let g = ctx.g();
    let priv_global = ctx.hash_h2(&ms.g_y.pow(&ctx.hash_h1(user_id.as_bytes())));
    let eta_inv = ms.eta.invert().expect("eta_k is nonzero");
    let priv_inv = priv_global.invert().expect("H2 output is nonzero");
    let priv_org = ms.g_y.pow(&(priv_global * eta_inv)) * g.pow(&(ms.x * eta_inv));
    let pub_org = g.pow(&(ctx.hash_h2(&priv_org) * priv_inv));
    let user_secret = ms.g_y.pow(&priv_global) * g.pow(&ms.mu);
    UserKeys {
        org: ms.org.clone(),
        user_id: user_id.to_owned(),
        priv_global,
        priv_org,
        pub_org,
        user_secret,
    }
}

/// Public bulletin board: user public keys, role public keys and cloud
/// public keys, per authority.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct BulletinBoard<E: Engine> {
    user_pubs: BTreeMap<OrgId, BTreeMap<String, G1Element<E>>>,
    role_pks: BTreeMap<RoleId, G1Element<E>>,
    cloud_pubs: BTreeMap<OrgId, CloudPublicKeys<E>>,
}

impl<E: Engine> Default for BulletinBoard<E> {
    fn default() -> Self {
        Self {
            user_pubs: BTreeMap::new(),
            role_pks: BTreeMap::new(),
            cloud_pubs: BTreeMap::new(),
        }
    }
}

impl<E: Engine> BulletinBoard<E> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn publish_user(&mut self, keys: &UserKeys<E>) {
        self.user_pubs
            .entry(keys.org.clone())
            .or_default()
            .insert(keys.user_id.clone(), keys.pub_org);
    }

    pub fn user_pub(&self, org: &OrgId, user_id: &str) -> Option<&G1Element<E>> {
        self.user_pubs.get(org)?.get(user_id)
    }

    pub fn publish_role_pks(&mut self, pks: BTreeMap<RoleId, G1Element<E>>) {
        self.role_pks.extend(pks);
    }

    pub fn role_pks(&self) -> &BTreeMap<RoleId, G1Element<E>> {
        &self.role_pks
    }

    pub fn publish_cloud(&mut self, org: OrgId, keys: CloudPublicKeys<E>) {
        self.cloud_pubs.insert(org, keys);
    }

    pub fn cloud_pubs(&self) -> &BTreeMap<OrgId, CloudPublicKeys<E>> {
        &self.cloud_pubs
    }

    /// Complete revocation: drops `Pub^k_u` so the cloud can no longer
    /// authenticate the user for organization `org`.
    pub fn revoke_user_complete(&mut self, org: &OrgId, user_id: &str) -> Result<()> {
        self.user_pubs
            .get_mut(org)
            .and_then(|users| users.remove(user_id))
            .map(|_| ())
            .ok_or_else(|| Error::UnknownUser(format!("{org}/{user_id}")))
    }
}

/// Broadcast after a role-level revocation. The cloud and role-managers
/// need only the ratios; `new_t` is for the revoked role's own manager.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct RevocationToken<E: Engine> {
    pub role: RoleId,
    /// `t'/t`.
    pub ratio_forward: Scalar<E>,
    /// `t/t'`.
    pub ratio_backward: Scalar<E>,
    pub new_t: Scalar<E>,
}

/// Role-level revocation: replaces `t_role` by a fresh `t'` and rescales
/// every affected record and proxy key.
pub fn revoke_role<E: Engine, R: RngCore + CryptoRng>(
    h: &RoleHierarchy,
    secrets: &mut RoleSecrets<E>,
    proxy: &mut ProxyKeySet<E>,
    role: &RoleId,
    rng: &mut R,
) -> Result<RevocationToken<E>> {
    revoke_role_with(h, secrets, proxy, role, Scalar::random_nonzero(rng))
}

pub fn revoke_role_with<E: Engine>(
    h: &RoleHierarchy,
    secrets: &mut RoleSecrets<E>,
    proxy: &mut ProxyKeySet<E>,
    role: &RoleId,
    new_t: Scalar<E>,
) -> Result<RevocationToken<E>> {
    if !h.contains(role) {
        return Err(Error::UnknownRole(role.to_string()));
    }
    if role == h.root() {
        return Err(Error::RootRoleNotRevocable);
    }
    let old_t = *secrets
        .params
        .get(role)
        .ok_or_else(|| Error::UnknownRole(role.to_string()))?;
    let ratio_forward = new_t * old_t.invert().expect("t is nonzero");
    let ratio_backward = ratio_forward
        .invert()
        .ok_or(Error::InvalidEncoding("t' = 0"))?;
    let token = RevocationToken {
        role: role.clone(),
        ratio_forward,
        ratio_backward,
        new_t,
    };

    secrets.params.insert(role.clone(), new_t);
    for affected in h.descendants_inclusive(role)? {
        let rec = secrets
            .records
            .get_mut(&affected)
            .ok_or_else(|| Error::UnknownRole(affected.to_string()))?;
        rec.rs = rec.rs * ratio_forward;
        rec.pk = rec.pk.pow(&ratio_forward);
        if affected == *role {
            rec.t = new_t;
        }
    }
    proxy.apply_revocation(&token, h)?;
    Ok(token)
}
