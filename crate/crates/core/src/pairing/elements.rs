use std::fmt;
use std::marker::PhantomData;
use std::ops::{Add, Div, Mul, Neg, Sub};

use rand::{CryptoRng, RngCore};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::Engine;
use crate::error::Error;
use crate::telemetry;

/// Version written after the type tag of every element encoding.
pub const ENCODING_VERSION: u16 = 1;

const KIND_SCALAR: u8 = 0x1;
const KIND_G1: u8 = 0x2;
const KIND_GT: u8 = 0x3;
const HEADER_LEN: usize = 3;

fn header<E: Engine>(kind: u8) -> [u8; HEADER_LEN] {
    let v = ENCODING_VERSION.to_be_bytes();
    [(E::ID << 4) | kind, v[0], v[1]]
}

fn strip_header<'a, E: Engine>(
    bytes: &'a [u8],
    kind: u8,
    body_len: usize,
    what: &'static str,
) -> Result<&'a [u8], Error> {
    if bytes.len() != HEADER_LEN + body_len {
        return Err(Error::InvalidEncoding(what));
    }
    if bytes[..HEADER_LEN] != header::<E>(kind) {
        return Err(Error::InvalidEncoding(what));
    }
    Ok(&bytes[HEADER_LEN..])
}

/// Element of `Z_q`.
#[derive(Clone, Copy, PartialEq, Eq)]
pub struct Scalar<E: Engine>(E::Fr, PhantomData<E>);

/// Element of the prime-order source group `G1`.
#[derive(Clone, Copy, PartialEq, Eq)]
pub struct G1Element<E: Engine>(E::G1, PhantomData<E>);

/// Element of the target group `GT`.
#[derive(Clone, Copy, PartialEq, Eq)]
pub struct GtElement<E: Engine>(E::Gt, PhantomData<E>);

/// The symmetric pairing `ê(a, b)`.
pub fn pair<E: Engine>(a: &G1Element<E>, b: &G1Element<E>) -> GtElement<E> {
    telemetry::record_pairing();
    GtElement(E::pairing(&a.0, &b.0), PhantomData)
}

impl<E: Engine> Scalar<E> {
    pub(crate) fn from_raw(v: E::Fr) -> Self {
        Self(v, PhantomData)
    }

    pub fn zero() -> Self {
        Self::from_u64(0)
    }

    pub fn one() -> Self {
        Self::from_u64(1)
    }

    pub fn from_u64(v: u64) -> Self {
        Self::from_raw(E::fr_from_u64(v))
    }

    /// Uniform element of `Z_q` (may be zero).
    pub fn random<R: RngCore + CryptoRng>(rng: &mut R) -> Self {
        let mut wide = [0u8; 64];
        rng.fill_bytes(&mut wide);
        Self::from_raw(E::fr_from_wide(&wide))
    }

    /// Uniform element of `Z_q^*`.
    pub fn random_nonzero<R: RngCore + CryptoRng>(rng: &mut R) -> Self {
        loop {
            let s = Self::random(rng);
            if !s.is_zero() {
                return s;
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.0 == E::fr_from_u64(0)
    }

    /// Multiplicative inverse modulo `q`; `None` for zero.
    pub fn invert(&self) -> Option<Self> {
        E::fr_invert(&self.0).map(Self::from_raw)
    }

    /// Canonical big-endian value without the encoding header.
    pub fn to_be_bytes(&self) -> Vec<u8> {
        E::fr_to_bytes(&self.0)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = header::<E>(KIND_SCALAR).to_vec();
        out.extend(E::fr_to_bytes(&self.0));
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, Error> {
        let body = strip_header::<E>(bytes, KIND_SCALAR, E::FR_BYTES, "scalar")?;
        E::fr_from_bytes(body)
            .map(Self::from_raw)
            .ok_or(Error::InvalidEncoding("scalar"))
    }

    pub const fn encoded_len() -> usize {
        HEADER_LEN + E::FR_BYTES
    }
}

impl<E: Engine> Add for Scalar<E> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self::from_raw(E::fr_add(&self.0, &rhs.0))
    }
}

impl<E: Engine> Sub for Scalar<E> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self::from_raw(E::fr_sub(&self.0, &rhs.0))
    }
}

impl<E: Engine> Mul for Scalar<E> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        Self::from_raw(E::fr_mul(&self.0, &rhs.0))
    }
}

impl<E: Engine> Neg for Scalar<E> {
    type Output = Self;
    fn neg(self) -> Self {
        Self::from_raw(E::fr_neg(&self.0))
    }
}

impl<E: Engine> std::iter::Sum for Scalar<E> {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::zero(), |acc, x| acc + x)
    }
}

impl<E: Engine> std::iter::Product for Scalar<E> {
    fn product<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::one(), |acc, x| acc * x)
    }
}

impl<E: Engine> G1Element<E> {
    pub(crate) fn from_raw(v: E::G1) -> Self {
        Self(v, PhantomData)
    }

    pub fn generator() -> Self {
        Self::from_raw(E::g1_generator())
    }

    pub fn identity() -> Self {
        Self::from_raw(E::g1_identity())
    }

    pub fn is_identity(&self) -> bool {
        self.0 == E::g1_identity()
    }

    /// Exponentiation `self^s`. Counted as one `G1` exponentiation.
    pub fn pow(&self, s: &Scalar<E>) -> Self {
        telemetry::record_g1_exp();
        Self::from_raw(E::g1_pow(&self.0, &s.0))
    }

    pub fn inverse(&self) -> Self {
        Self::from_raw(E::g1_inverse(&self.0))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = header::<E>(KIND_G1).to_vec();
        out.extend(E::g1_to_bytes(&self.0));
        out
    }

    /// Decodes and validates subgroup membership.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, Error> {
        let body = strip_header::<E>(bytes, KIND_G1, E::G1_BYTES, "G1 element")?;
        E::g1_from_bytes(body)
            .map(Self::from_raw)
            .ok_or(Error::InvalidEncoding("G1 element"))
    }

    pub const fn encoded_len() -> usize {
        HEADER_LEN + E::G1_BYTES
    }
}

impl<E: Engine> Mul for G1Element<E> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        Self::from_raw(E::g1_op(&self.0, &rhs.0))
    }
}

impl<E: Engine> Div for G1Element<E> {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        Self::from_raw(E::g1_op(&self.0, &E::g1_inverse(&rhs.0)))
    }
}

impl<E: Engine> std::iter::Product for G1Element<E> {
    fn product<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::identity(), |acc, x| acc * x)
    }
}

impl<E: Engine> GtElement<E> {
    pub(crate) fn from_raw(v: E::Gt) -> Self {
        Self(v, PhantomData)
    }

    pub fn identity() -> Self {
        Self::from_raw(E::gt_identity())
    }

    pub fn is_identity(&self) -> bool {
        self.0 == E::gt_identity()
    }

    /// Uniform element of `GT`. Sampling is not counted as an exponentiation.
    pub fn random<R: RngCore + CryptoRng>(rng: &mut R) -> Self {
        let s = Scalar::<E>::random_nonzero(rng);
        Self::from_raw(E::gt_pow(&E::gt_generator(), &s.0))
    }

    /// Exponentiation `self^s`. Counted as one `GT` exponentiation.
    pub fn pow(&self, s: &Scalar<E>) -> Self {
        telemetry::record_gt_exp();
        Self::from_raw(E::gt_pow(&self.0, &s.0))
    }

    pub fn inverse(&self) -> Self {
        Self::from_raw(E::gt_inverse(&self.0))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = header::<E>(KIND_GT).to_vec();
        out.extend(E::gt_to_bytes(&self.0));
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, Error> {
        let body = strip_header::<E>(bytes, KIND_GT, E::GT_BYTES, "GT element")?;
        E::gt_from_bytes(body)
            .map(Self::from_raw)
            .ok_or(Error::InvalidEncoding("GT element"))
    }

    pub const fn encoded_len() -> usize {
        HEADER_LEN + E::GT_BYTES
    }
}

impl<E: Engine> Mul for GtElement<E> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        Self::from_raw(E::gt_op(&self.0, &rhs.0))
    }
}

impl<E: Engine> Div for GtElement<E> {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        Self::from_raw(E::gt_op(&self.0, &E::gt_inverse(&rhs.0)))
    }
}

impl<E: Engine> std::iter::Product for GtElement<E> {
    fn product<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::identity(), |acc, x| acc * x)
    }
}

macro_rules! hex_serde_and_debug {
    ($ty:ident, $label:literal) => {
        impl<E: Engine> fmt::Debug for $ty<E> {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                let bytes = self.to_bytes();
                let shown = &bytes[bytes.len().saturating_sub(8)..];
                write!(f, "{}(..{})", $label, hex::encode(shown))
            }
        }

        impl<E: Engine> Serialize for $ty<E> {
            fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
                serializer.serialize_str(&hex::encode(self.to_bytes()))
            }
        }

        impl<'de, E: Engine> Deserialize<'de> for $ty<E> {
            fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
                let s = String::deserialize(deserializer)?;
                let bytes = hex::decode(s).map_err(D::Error::custom)?;
                Self::from_bytes(&bytes).map_err(D::Error::custom)
            }
        }
    };
}

hex_serde_and_debug!(Scalar, "Scalar");
hex_serde_and_debug!(G1Element, "G1");
hex_serde_and_debug!(GtElement, "GT");
