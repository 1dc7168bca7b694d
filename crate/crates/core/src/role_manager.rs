//! Role-managers: per-user role keys and their post-revocation updates.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::authority::{RevocationToken, RoleSecrets};
use crate::error::{Error, Result};
use crate::hierarchy::{RoleHierarchy, RoleId};
use crate::pairing::{Engine, G1Element, Scalar};

/// `RK_{r_x} = ⟨US^{1/RS}, US^{1/t}⟩`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct RoleKeyPair<E: Engine> {
    pub role: RoleId,
    pub rk1: G1Element<E>,
    pub rk2: G1Element<E>,
}

pub fn user_role_key_gen<E: Engine>(
    role: RoleId,
    us: &G1Element<E>,
    rs: &Scalar<E>,
    t: &Scalar<E>,
) -> Result<RoleKeyPair<E>> {
    let zero = || Error::InvalidEncoding("zero role secret");
    Ok(RoleKeyPair {
        role,
        rk1: us.pow(&rs.invert().ok_or_else(zero)?),
        rk2: us.pow(&t.invert().ok_or_else(zero)?),
    })
}

/// Issues the key pair for `role` from the manager's stored secrets.
pub fn issue_role_key<E: Engine>(
    secrets: &RoleSecrets<E>,
    role: &RoleId,
    us: &G1Element<E>,
) -> Result<RoleKeyPair<E>> {
    let rec = secrets.record(role)?;
    user_role_key_gen(role.clone(), us, &rec.rs, &rec.t)
}

/// The role keys one user holds, across organizations.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct RoleKeyRing<E: Engine> {
    keys: BTreeMap<RoleId, RoleKeyPair<E>>,
}

impl<E: Engine> Default for RoleKeyRing<E> {
    fn default() -> Self {
        Self {
            keys: BTreeMap::new(),
        }
    }
}

impl<E: Engine> RoleKeyRing<E> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, pair: RoleKeyPair<E>) {
        self.keys.insert(pair.role.clone(), pair);
    }

    pub fn remove(&mut self, role: &RoleId) -> Option<RoleKeyPair<E>> {
        self.keys.remove(role)
    }

    pub fn get(&self, role: &RoleId) -> Option<&RoleKeyPair<E>> {
        self.keys.get(role)
    }

    pub fn roles(&self) -> impl Iterator<Item = &RoleId> {
        self.keys.keys()
    }

    pub fn iter(&self) -> impl Iterator<Item = &RoleKeyPair<E>> {
        self.keys.values()
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }
}

impl<E: Engine> FromIterator<RoleKeyPair<E>> for RoleKeyRing<E> {
    fn from_iter<I: IntoIterator<Item = RoleKeyPair<E>>>(iter: I) -> Self {
        let mut ring = Self::new();
        for pair in iter {
            ring.insert(pair);
        }
        ring
    }
}

/// Applies a role-level revocation to a non-revoked holder's keys.
///
/// `rk1` of every held role whose ancestor set contains the revoked role is
/// raised to `t/t'` (its `RS` changed); `rk2` changes only for the revoked
/// role itself (only its own `t` changed). Returns how many pairs changed.
pub fn update_role_keys<E: Engine>(
    ring: &mut RoleKeyRing<E>,
    token: &RevocationToken<E>,
    h: &RoleHierarchy,
) -> Result<usize> {
    if token.role.org != *h.org() {
        return Ok(0);
    }
    let affected = h.descendants_inclusive(&token.role)?;
    let mut changed = 0;
    for pair in ring
        .keys
        .values_mut()
        .filter(|p| affected.contains(&p.role))
    {
        pair.rk1 = pair.rk1.pow(&token.ratio_backward);
        if pair.role == token.role {
            pair.rk2 = pair.rk2.pow(&token.ratio_backward);
        }
        changed += 1;
    }
    Ok(changed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::authority::{manage_role, revoke_role};
    use crate::hierarchy::{build_hierarchy, OrgId};
    use crate::pairing::{BilinearContext, Bls12Paired as E};
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn equal_secrets_give_equal_halves() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let us = G1Element::<E>::generator().pow(&Scalar::random_nonzero(&mut rng));
        let s = Scalar::random_nonzero(&mut rng);
        let pair = user_role_key_gen(RoleId::new("k", "r"), &us, &s, &s).unwrap();
        assert_eq!(pair.rk1, pair.rk2);
    }

    #[test]
    fn issuance_is_checkable() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let g = G1Element::<E>::generator();
        for _ in 0..100 {
            let us = g.pow(&Scalar::random_nonzero(&mut rng));
            let (rs, t) = (
                Scalar::random_nonzero(&mut rng),
                Scalar::random_nonzero(&mut rng),
            );
            let pair = user_role_key_gen(RoleId::new("k", "r"), &us, &rs, &t).unwrap();
            assert_eq!(pair.rk1.pow(&rs), us);
            assert_eq!(pair.rk2.pow(&t), us);
        }
    }

    #[test]
    fn zero_secret_is_rejected() {
        let us = G1Element::<E>::generator();
        assert!(
            user_role_key_gen(RoleId::new("k", "r"), &us, &Scalar::zero(), &Scalar::one()).is_err()
        );
    }

    #[test]
    fn updates_restore_checkability() {
        let ctx = BilinearContext::<E>::new();
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let h = build_hierarchy(
            &OrgId::new("k"),
            "rr",
            &[("rr", "a"), ("a", "b"), ("b", "c"), ("rr", "d")],
        )
        .unwrap();
        let (mut secrets, mut proxy) = manage_role(&ctx, &h, &mut rng);
        let us = ctx.g().pow(&Scalar::random_nonzero(&mut rng));
        let mut ring: RoleKeyRing<E> = ["a", "b", "c", "d"]
            .iter()
            .map(|r| issue_role_key(&secrets, &h.role(r).unwrap(), &us).unwrap())
            .collect();
        let before = ring.clone();

        let b = h.role("b").unwrap();
        let token = revoke_role(&h, &mut secrets, &mut proxy, &b, &mut rng).unwrap();
        assert_eq!(update_role_keys(&mut ring, &token, &h).unwrap(), 2);

        for pair in ring.iter() {
            let rec = secrets.record(&pair.role).unwrap();
            assert_eq!(pair.rk1.pow(&rec.rs), us);
            assert_eq!(pair.rk2.pow(&rec.t), us);
        }
        let (a, c, d) = (
            h.role("a").unwrap(),
            h.role("c").unwrap(),
            h.role("d").unwrap(),
        );
        assert_eq!(ring.get(&a), before.get(&a));
        assert_eq!(ring.get(&d), before.get(&d));
        assert_ne!(ring.get(&c).unwrap().rk1, before.get(&c).unwrap().rk1);
        assert_eq!(ring.get(&c).unwrap().rk2, before.get(&c).unwrap().rk2);
        assert_ne!(ring.get(&b).unwrap().rk2, before.get(&b).unwrap().rk2);
    }
}
