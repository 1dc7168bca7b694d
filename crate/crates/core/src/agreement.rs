//! Two-round Burmester–Desmedt group key agreement.
//!
//! `m` authorities on a cycle each pick `a_i`, broadcast `x_i = g^{a_i}`, then
//! broadcast `X_i = (x_{i+1} / x_{i-1})^{a_i}`. Every participant reconstructs
//!
//! ```text
//! K = x_{i-1}^{m·a_i} · X_i^{m-1} · X_{i+1}^{m-2} ··· X_{i+m-2}
//!   = g^{a_1 a_2 + a_2 a_3 + ··· + a_m a_1}
//! ```
//!
//! Messages travel over an in-process [`MessageBoard`]; round 2 opens only
//! once every round-1 post has arrived.

use rand::{CryptoRng, RngCore};

use crate::error::{Error, Result};
use crate::pairing::{Engine, G1Element, Scalar};

/// The common key `g^y`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SharedGroupSecret<E: Engine>(pub G1Element<E>);

impl<E: Engine> SharedGroupSecret<E> {
    pub fn value(&self) -> G1Element<E> {
        self.0
    }
}

#[derive(Clone, Debug)]
pub struct BdParticipant<E: Engine> {
    index: usize,
    size: usize,
    secret: Scalar<E>,
}

impl<E: Engine> BdParticipant<E> {
    pub fn new(index: usize, size: usize, secret: Scalar<E>) -> Result<Self> {
        if size < 2 {
            return Err(Error::NotEnoughParticipants(2));
        }
        if index >= size {
            return Err(Error::MismatchedRoundData(format!(
                "index {index} outside a cycle of {size}"
            )));
        }
        Ok(Self {
            index,
            size,
            secret,
        })
    }

    pub fn random<R: RngCore + CryptoRng>(index: usize, size: usize, rng: &mut R) -> Result<Self> {
        Self::new(index, size, Scalar::random_nonzero(rng))
    }

    pub fn index(&self) -> usize {
        self.index
    }

    fn prev(&self) -> usize {
        (self.index + self.size - 1) % self.size
    }

    fn next(&self) -> usize {
        (self.index + 1) % self.size
    }
}

/// `x_i = g^{a_i}`.
pub fn bd_round1<E: Engine>(p: &BdParticipant<E>) -> G1Element<E> {
    G1Element::generator().pow(&p.secret)
}

/// `X_i = (x_next / x_prev)^{a_i}`.
pub fn bd_round2<E: Engine>(
    p: &BdParticipant<E>,
    x_prev: &G1Element<E>,
    x_next: &G1Element<E>,
) -> G1Element<E> {
    (*x_next / *x_prev).pow(&p.secret)
}

/// Reconstructs `g^y` from both rounds' broadcasts.
///
/// Fails when the round data has the wrong shape, disagrees with the
/// participant's own `x_i`, or `Π X_j ≠ 1` (which every honest run
/// satisfies, so a tampered `X_j` is caught locally).
pub fn bd_derive<E: Engine>(
    p: &BdParticipant<E>,
    all_round1: &[G1Element<E>],
    all_round2: &[G1Element<E>],
) -> Result<SharedGroupSecret<E>> {
    let m = p.size;
    if all_round1.len() != m || all_round2.len() != m {
        return Err(Error::MismatchedRoundData(format!(
            "expected {m} posts per round, got {} and {}",
            all_round1.len(),
            all_round2.len()
        )));
    }
    if all_round1[p.index] != bd_round1(p) {
        return Err(Error::MismatchedRoundData(format!(
            "round-1 post of participant {} was altered",
            p.index
        )));
    }
    if !all_round2
        .iter()
        .copied()
        .product::<G1Element<E>>()
        .is_identity()
    {
        return Err(Error::MismatchedRoundData(
            "round-2 broadcasts do not multiply to the identity".into(),
        ));
    }

    let lead = Scalar::from_u64(m as u64) * p.secret;
    let mut key = all_round1[p.prev()].pow(&lead);
    for step in 0..m - 1 {
        let j = (p.index + step) % m;
        let weight = Scalar::from_u64((m - 1 - step) as u64);
        key = key * all_round2[j].pow(&weight);
    }
    Ok(SharedGroupSecret(key))
}

/// Broadcast channel shared by all participants.
#[derive(Clone, Debug)]
pub struct MessageBoard<E: Engine> {
    round1: Vec<Option<G1Element<E>>>,
    round2: Vec<Option<G1Element<E>>>,
}

impl<E: Engine> MessageBoard<E> {
    pub fn new(size: usize) -> Self {
        Self {
            round1: vec![None; size],
            round2: vec![None; size],
        }
    }

    pub fn post_round1(&mut self, index: usize, x: G1Element<E>) -> Result<()> {
        post(&mut self.round1, index, x, 1)
    }

    pub fn post_round2(&mut self, index: usize, x: G1Element<E>) -> Result<()> {
        if self.round1.iter().any(Option::is_none) {
            return Err(Error::MismatchedRoundData(
                "round 2 opened before every round-1 post arrived".into(),
            ));
        }
        post(&mut self.round2, index, x, 2)
    }

    pub fn round1(&self) -> Option<Vec<G1Element<E>>> {
        self.round1.iter().copied().collect()
    }

    pub fn round2(&self) -> Option<Vec<G1Element<E>>> {
        self.round2.iter().copied().collect()
    }

    /// Overwrites a round-2 post; fault injection for tests and the harness.
    pub fn replace_round2(&mut self, index: usize, x: G1Element<E>) {
        self.round2[index] = Some(x);
    }
}

fn post<E: Engine>(
    slots: &mut [Option<G1Element<E>>],
    index: usize,
    x: G1Element<E>,
    round: u8,
) -> Result<()> {
    match slots.get_mut(index) {
        Some(slot @ None) => {
            *slot = Some(x);
            Ok(())
        }
        Some(Some(_)) => Err(Error::MismatchedRoundData(format!(
            "participant {index} posted twice in round {round}"
        ))),
        None => Err(Error::MismatchedRoundData(format!(
            "no slot {index} in round {round}"
        ))),
    }
}

/// Runs both rounds for the given secrets and returns the agreed key.
///
/// `tamper` sees the board after round 2 and before reconstruction.
pub fn run_agreement_with<E: Engine>(
    secrets: &[Scalar<E>],
    tamper: impl FnOnce(&mut MessageBoard<E>),
) -> Result<SharedGroupSecret<E>> {
    let m = secrets.len();
    let parts = secrets
        .iter()
        .enumerate()
        .map(|(i, a)| BdParticipant::new(i, m, *a))
        .collect::<Result<Vec<_>>>()?;

    let mut board = MessageBoard::new(m);
    for p in &parts {
        board.post_round1(p.index, bd_round1(p))?;
    }
    let xs = board.round1().expect("round 1 complete");
    for p in &parts {
        board.post_round2(p.index, bd_round2(p, &xs[p.prev()], &xs[p.next()]))?;
    }
    tamper(&mut board);
    let big_xs = board.round2().expect("round 2 complete");

    let derived = parts
        .iter()
        .map(|p| bd_derive(p, &xs, &big_xs))
        .collect::<Result<Vec<_>>>()?;
    if derived.windows(2).any(|w| w[0] != w[1]) {
        return Err(Error::MismatchedRoundData(
            "participants derived different keys".into(),
        ));
    }
    Ok(derived[0])
}

pub fn run_agreement<E: Engine>(secrets: &[Scalar<E>]) -> Result<SharedGroupSecret<E>> {
    run_agreement_with(secrets, |_| {})
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pairing::Bls12Paired as E;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn s(v: u64) -> Scalar<E> {
        Scalar::from_u64(v)
    }

    fn g() -> G1Element<E> {
        G1Element::generator()
    }

    #[test]
    fn round1_is_direct_exponent() {
        let p = BdParticipant::<E>::new(0, 3, s(1)).unwrap();
        assert_eq!(bd_round1(&p), g());
        let p = BdParticipant::<E>::new(0, 3, s(7)).unwrap();
        assert_eq!(bd_round1(&p), g().pow(&s(7)));
    }

    #[test]
    fn round2_edge_cases() {
        let p = BdParticipant::<E>::new(0, 3, s(5)).unwrap();
        let x = g().pow(&s(9));
        assert!(bd_round2(&p, &x, &x).is_identity());

        // two-party cycle: both neighbours are the same party
        let secrets = [s(3), s(4)];
        let parts: Vec<_> = (0..2)
            .map(|i| BdParticipant::<E>::new(i, 2, secrets[i]).unwrap())
            .collect();
        let xs: Vec<_> = parts.iter().map(bd_round1).collect();
        assert!(bd_round2(&parts[0], &xs[1], &xs[1]).is_identity());

        // m = 3, secrets (1, 2, 3): X_1 = (x_2 / x_3)^1 = g^2 / g^3
        let secrets = [s(1), s(2), s(3)];
        let parts: Vec<_> = (0..3)
            .map(|i| BdParticipant::<E>::new(i, 3, secrets[i]).unwrap())
            .collect();
        let xs: Vec<_> = parts.iter().map(bd_round1).collect();
        assert_eq!(bd_round2(&parts[0], &xs[2], &xs[1]), g().inverse());
        assert_eq!(bd_round2(&parts[0], &xs[1], &xs[2]), g());
    }

    #[test]
    fn symmetric_secrets() {
        let key = run_agreement::<E>(&[s(1), s(1), s(1)]).unwrap();
        assert_eq!(key.value(), g().pow(&s(3)));
    }

    #[test]
    fn matches_exponent_sum_oracle() {
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let secrets: Vec<Scalar<E>> = (0..4).map(|_| Scalar::random_nonzero(&mut rng)).collect();
        let y: Scalar<E> = (0..4).map(|i| secrets[i] * secrets[(i + 1) % 4]).sum();
        assert_eq!(run_agreement(&secrets).unwrap().value(), g().pow(&y));
    }

    #[test]
    fn round1_posts_are_distinct() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let xs: Vec<_> = (0..8)
            .map(|i| bd_round1(&BdParticipant::<E>::random(i, 8, &mut rng).unwrap()))
            .collect();
        for i in 0..xs.len() {
            for j in i + 1..xs.len() {
                assert_ne!(xs[i], xs[j]);
            }
        }
    }

    #[test]
    fn tampered_round2_is_flagged() {
        let mut rng = ChaCha20Rng::seed_from_u64(6);
        let secrets: Vec<Scalar<E>> = (0..4).map(|_| Scalar::random_nonzero(&mut rng)).collect();
        let res = run_agreement_with(&secrets, |board| {
            let x = board.round2().unwrap()[2];
            board.replace_round2(2, x * g());
        });
        assert!(matches!(res, Err(Error::MismatchedRoundData(_))));
    }

    #[test]
    fn board_enforces_round_order() {
        let mut board = MessageBoard::<E>::new(2);
        board.post_round1(0, g()).unwrap();
        assert!(board.post_round2(0, g()).is_err());
        assert!(board.post_round1(0, g()).is_err());
        board.post_round1(1, g()).unwrap();
        board.post_round2(0, g()).unwrap();
        assert!(board.round2().is_none());
    }

    #[test]
    fn rejects_degenerate_cycles() {
        assert!(matches!(
            BdParticipant::<E>::new(0, 1, s(2)),
            Err(Error::NotEnoughParticipants(2))
        ));
        let p = BdParticipant::<E>::new(0, 3, s(2)).unwrap();
        assert!(matches!(
            bd_derive(&p, &[g()], &[g()]),
            Err(Error::MismatchedRoundData(_))
        ));
    }
}
