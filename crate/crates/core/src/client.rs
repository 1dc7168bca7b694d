//! User side: trapdoor generation and final decryption.

use std::collections::{BTreeMap, BTreeSet};

use rand::{CryptoRng, RngCore};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::authority::UserKeys;
use crate::error::{Error, Result};
use crate::hierarchy::{OrgId, RoleId};
use crate::owner::{keyword_product, unwrap_payload};
use crate::pairing::{BilinearContext, Engine, G1Element, GtElement, Scalar};
use crate::role_manager::RoleKeyRing;

/// `⟨tr^1_{r_x}, tr^2_{r_x}⟩` for one presented role.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct TrapdoorRoleComponent<E: Engine> {
    pub tr1: G1Element<E>,
    pub tr2: G1Element<E>,
}

/// The search token handed to the cloud. Carries `ts` and the requesting
/// identity in clear; `v` never leaves the client.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Trapdoor<E: Engine> {
    pub user_id: String,
    /// Organization whose `Priv^k` produced `tr1`/`tr2`.
    pub org: OrgId,
    pub ts: u64,
    pub tr1: Scalar<E>,
    pub tr2: G1Element<E>,
    pub tr3: G1Element<E>,
    pub tr4: G1Element<E>,
    /// Keyed by the presented role set `S`.
    pub roles: BTreeMap<RoleId, TrapdoorRoleComponent<E>>,
}

impl<E: Engine> Trapdoor<E> {
    pub fn presented(
        &self,
    ) -> std::collections::btree_map::Keys<'_, RoleId, TrapdoorRoleComponent<E>> {
        self.roles.keys()
    }

    /// SHA-256 of the wire encoding; the replay-cache key.
    pub fn digest(&self) -> [u8; 32] {
        Sha256::digest(crate::wire::encode_trapdoor(self)).into()
    }
}

/// Client-held state for one query. Deliberately neither `Clone` nor
/// serializable.
pub struct SearchSession<E: Engine> {
    v: Scalar<E>,
    trapdoor_digest: [u8; 32],
}

impl<E: Engine> SearchSession<E> {
    pub fn trapdoor_digest(&self) -> &[u8; 32] {
        &self.trapdoor_digest
    }

    /// Client-local persistence for a query that is finished in a later
    /// process. The bytes hold `v` in clear and must stay with the user.
    pub fn to_local_bytes(&self) -> Vec<u8> {
        let mut out = self.trapdoor_digest.to_vec();
        out.extend_from_slice(&self.v.to_bytes());
        out
    }

    pub fn from_local_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 32 {
            return Err(Error::InvalidEncoding("search session"));
        }
        let (digest, v) = bytes.split_at(32);
        Ok(Self {
            v: Scalar::from_bytes(v)?,
            trapdoor_digest: digest.try_into().expect("32 bytes"),
        })
    }
}

impl<E: Engine> std::fmt::Debug for SearchSession<E> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SearchSession")
            .field("trapdoor", &hex::encode(&self.trapdoor_digest[..8]))
            .finish_non_exhaustive()
    }
}

/// `CT' = ⟨Enc_K(M), C1, V10⟩`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct PartialCiphertext<E: Engine> {
    #[serde(with = "hex::serde")]
    pub payload: Vec<u8>,
    pub c1: GtElement<E>,
    pub v10: GtElement<E>,
}

/// Builds a trapdoor for `keywords`, presenting `presented` (all held roles
/// when `None`). `keys` must come from the organization owning the target
/// ciphertexts.
#[allow(clippy::too_many_arguments)]
pub fn trap_gen<E: Engine, S: AsRef<str>, R: RngCore + CryptoRng>(
    ctx: &BilinearContext<E>,
    keys: &UserKeys<E>,
    ring: &RoleKeyRing<E>,
    presented: Option<&BTreeSet<RoleId>>,
    keywords: &[S],
    now: u64,
    rng: &mut R,
) -> Result<(Trapdoor<E>, SearchSession<E>)> {
    trap_gen_with_v(
        ctx,
        keys,
        ring,
        presented,
        keywords,
        now,
        Scalar::random_nonzero(rng),
    )
}

/// [`trap_gen`] with a caller-chosen blinding exponent `v`.
pub fn trap_gen_with_v<E: Engine, S: AsRef<str>>(
    ctx: &BilinearContext<E>,
    keys: &UserKeys<E>,
    ring: &RoleKeyRing<E>,
    presented: Option<&BTreeSet<RoleId>>,
    keywords: &[S],
    now: u64,
    v: Scalar<E>,
) -> Result<(Trapdoor<E>, SearchSession<E>)> {
    if now == 0 {
        return Err(Error::InvalidTimestamp);
    }
    let roles: BTreeSet<RoleId> = match presented {
        Some(s) => s.clone(),
        None => ring.roles().cloned().collect(),
    };
    if roles.is_empty() {
        return Err(Error::EmptyRoleSet);
    }
    if let Some(missing) = roles.iter().find(|r| ring.get(r).is_none()) {
        return Err(Error::RoleNotHeld(missing.to_string()));
    }
    let w = keyword_product(ctx, keywords)?;
    let (priv_inv, w_inv) = match (keys.priv_global.invert(), w.invert(), v.is_zero()) {
        (Some(p), Some(w), false) => (p, w),
        _ => return Err(Error::InvalidEncoding("zero trapdoor exponent")),
    };

    let ts = Scalar::from_u64(now);
    let h2 = ctx.hash_h2(&keys.priv_org);
    let tr1 = (keys.priv_global + ts) * v * h2.invert().expect("H2 output is nonzero");
    let g = ctx.g();
    let role_exp = v * w_inv;
    let components = roles
        .iter()
        .map(|r| {
            let pair = ring.get(r).expect("checked above");
            let comp = TrapdoorRoleComponent {
                tr1: pair.rk1.pow(&role_exp),
                tr2: pair.rk2.pow(&role_exp),
            };
            (r.clone(), comp)
        })
        .collect();

    let trap = Trapdoor {
        user_id: keys.user_id.clone(),
        org: keys.org.clone(),
        ts: now,
        tr1,
        tr2: keys.priv_org.pow(&v),
        tr3: g.pow(&(v * priv_inv)),
        tr4: g.pow(&v),
        roles: components,
    };
    let session = SearchSession {
        v,
        trapdoor_digest: trap.digest(),
    };
    Ok((trap, session))
}

/// `K = C1 / V10^{1/(Priv·v)}`.
pub fn recover_key<E: Engine>(
    pc: &PartialCiphertext<E>,
    priv_global: &Scalar<E>,
    session: &SearchSession<E>,
) -> Result<GtElement<E>> {
    let inv = (*priv_global * session.v)
        .invert()
        .ok_or(Error::InvalidEncoding("zero decryption exponent"))?;
    Ok(pc.c1 / pc.v10.pow(&inv))
}

/// Final decryption; consumes the session.
pub fn full_dec<E: Engine>(
    pc: &PartialCiphertext<E>,
    priv_global: &Scalar<E>,
    session: SearchSession<E>,
) -> Result<Vec<u8>> {
    let key = recover_key(pc, priv_global, &session)?;
    unwrap_payload(&key, &pc.payload)
}

/// Decrypts every result of one query, then drops the session.
pub fn full_dec_batch<E: Engine>(
    pcs: &[PartialCiphertext<E>],
    priv_global: &Scalar<E>,
    session: SearchSession<E>,
) -> Vec<Result<Vec<u8>>> {
    pcs.iter()
        .map(|pc| {
            recover_key(pc, priv_global, &session).and_then(|k| unwrap_payload(&k, &pc.payload))
        })
        .collect()
}
