use std::sync::OnceLock;

use ark_bls12_381::{Bls12_381, Fr, G1Affine, G1Projective, G2Affine, G2Projective};
use ark_ec::pairing::{Pairing, PairingOutput};
use ark_ec::{AffineRepr, CurveGroup, Group};
use ark_ff::{BigInteger, Field, PrimeField, Zero};
use ark_serialize::{CanonicalDeserialize, CanonicalSerialize};

use super::{Engine, SecurityLevel};

type Gt = PairingOutput<Bls12_381>;

/// BLS12-381 emulating a symmetric pairing.
///
/// A `G1` element is the pair `(g1^a, g2^a)` built from one exponent;
/// `ê(A, B) = e(A.left, B.right)`. For well-formed pairs this is symmetric and
/// bilinear, and decoding rejects pairs whose halves disagree.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Bls12Paired;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PairedPoint {
    left: G1Projective,
    right: G2Projective,
}

const LEFT_BYTES: usize = 48;
const RIGHT_BYTES: usize = 96;

impl Engine for Bls12Paired {
    type Fr = Fr;
    type G1 = PairedPoint;
    type Gt = Gt;

    const NAME: &'static str = "bls12-381";
    const ID: u8 = 0x2;
    const LEVEL: SecurityLevel = SecurityLevel::Standard128;
    const FR_BYTES: usize = 32;
    const G1_BYTES: usize = LEFT_BYTES + RIGHT_BYTES;
    const GT_BYTES: usize = 576;

    fn order_bits() -> usize {
        Fr::MODULUS_BIT_SIZE as usize
    }

    fn fr_from_u64(v: u64) -> Fr {
        Fr::from(v)
    }

    fn fr_from_wide(bytes: &[u8; 64]) -> Fr {
        Fr::from_le_bytes_mod_order(bytes)
    }

    fn fr_add(a: &Fr, b: &Fr) -> Fr {
        *a + b
    }

    fn fr_sub(a: &Fr, b: &Fr) -> Fr {
        *a - b
    }

    fn fr_mul(a: &Fr, b: &Fr) -> Fr {
        *a * b
    }

    fn fr_neg(a: &Fr) -> Fr {
        -*a
    }

    fn fr_invert(a: &Fr) -> Option<Fr> {
        a.inverse()
    }

    fn fr_to_bytes(a: &Fr) -> Vec<u8> {
        a.into_bigint().to_bytes_be()
    }

    fn fr_from_bytes(bytes: &[u8]) -> Option<Fr> {
        let mut le = bytes.to_vec();
        le.reverse();
        Fr::deserialize_compressed(&le[..]).ok()
    }

    fn g1_generator() -> PairedPoint {
        PairedPoint {
            left: G1Projective::generator(),
            right: G2Projective::generator(),
        }
    }

    fn g1_identity() -> PairedPoint {
        PairedPoint {
            left: G1Projective::zero(),
            right: G2Projective::zero(),
        }
    }

    fn g1_op(a: &PairedPoint, b: &PairedPoint) -> PairedPoint {
        PairedPoint {
            left: a.left + b.left,
            right: a.right + b.right,
        }
    }

    fn g1_inverse(a: &PairedPoint) -> PairedPoint {
        PairedPoint {
            left: -a.left,
            right: -a.right,
        }
    }

    fn g1_pow(a: &PairedPoint, s: &Fr) -> PairedPoint {
        PairedPoint {
            left: a.left * s,
            right: a.right * s,
        }
    }

    fn g1_to_bytes(a: &PairedPoint) -> Vec<u8> {
        let mut out = Vec::with_capacity(Self::G1_BYTES);
        a.left
            .into_affine()
            .serialize_compressed(&mut out)
            .expect("vec write");
        a.right
            .into_affine()
            .serialize_compressed(&mut out)
            .expect("vec write");
        out
    }

    fn g1_from_bytes(bytes: &[u8]) -> Option<PairedPoint> {
        if bytes.len() != Self::G1_BYTES {
            return None;
        }
        let left = G1Affine::deserialize_compressed(&bytes[..LEFT_BYTES]).ok()?;
        let right = G2Affine::deserialize_compressed(&bytes[LEFT_BYTES..]).ok()?;
        // both halves must carry the same exponent
        let check = Bls12_381::multi_pairing(
            [left, -G1Affine::generator()],
            [G2Affine::generator(), right],
        );
        check.is_zero().then(|| PairedPoint {
            left: left.into(),
            right: right.into(),
        })
    }

    fn gt_generator() -> Gt {
        static EGG: OnceLock<Gt> = OnceLock::new();
        *EGG.get_or_init(|| {
            Bls12_381::pairing(G1Projective::generator(), G2Projective::generator())
        })
    }

    fn gt_identity() -> Gt {
        Gt::zero()
    }

    fn gt_op(a: &Gt, b: &Gt) -> Gt {
        *a + b
    }

    fn gt_inverse(a: &Gt) -> Gt {
        -*a
    }

    fn gt_pow(a: &Gt, s: &Fr) -> Gt {
        *a * s
    }

    fn gt_to_bytes(a: &Gt) -> Vec<u8> {
        let mut out = Vec::with_capacity(Self::GT_BYTES);
        a.serialize_compressed(&mut out).expect("vec write");
        out
    }

    fn gt_from_bytes(bytes: &[u8]) -> Option<Gt> {
        let v = Gt::deserialize_compressed(bytes).ok()?;
        // reject elements outside the order-q subgroup
        let order = Fr::MODULUS;
        (v.0.pow(order) == <Bls12_381 as Pairing>::TargetField::ONE).then_some(v)
    }

    fn pairing(a: &PairedPoint, b: &PairedPoint) -> Gt {
        Bls12_381::pairing(a.left, b.right)
    }
}
