//! Symmetric bilinear group abstraction.
//!
//! Every protocol module works over an [`Engine`]: a prime-order group `G1`
//! with generator `g`, a target group `GT` and a symmetric pairing
//! `ê: G1 × G1 → GT`. Two engines are provided:
//!
//! * [`Bls12Paired`]: BLS12-381 with each `G1` element carried as a pair
//!   `(g1^a, g2^a)` so the asymmetric Ate pairing behaves symmetrically.
//!   ~128-bit security, the default.
//! * [`TypeA`]: the supersingular curve `y² = x³ + x` over a 512-bit prime
//!   field with a 160-bit group order and a distortion-map Tate pairing.
//!   ~80-bit security, matching the classic PBC "Type A" parameters.
//!
//! Group law is written multiplicatively throughout (`a * b`, `a.pow(&s)`),
//! following the usual notation for pairing-based schemes.

mod bls;
mod elements;
mod type_a;

use std::fmt::{self, Debug};
use std::str::FromStr;

use sha2::{Digest, Sha512};

pub use bls::Bls12Paired;
pub use elements::{pair, G1Element, GtElement, Scalar, ENCODING_VERSION};
pub use type_a::TypeA;

use crate::error::Error;
use crate::telemetry;

/// Security levels the crate knows how to instantiate.
#[derive(
    Clone, Copy, Debug, Default, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize,
)]
#[serde(rename_all = "kebab-case")]
pub enum SecurityLevel {
    /// 160-bit group order, 512-bit base field (Type A, ~80-bit security).
    Legacy80,
    /// BLS12-381, 255-bit group order (~128-bit security).
    #[default]
    Standard128,
}

impl SecurityLevel {
    /// Maps a requested bit strength onto a supported level.
    ///
    /// `80` and `128` are security strengths; `160` and `255` are accepted as
    /// the group-order sizes of the respective curves.
    pub fn from_bits(bits: u32) -> Result<Self, Error> {
        match bits {
            80 | 160 => Ok(Self::Legacy80),
            128 | 255 => Ok(Self::Standard128),
            other => Err(Error::UnsupportedSecurityLevel(other)),
        }
    }

    pub fn group_order_bits(self) -> usize {
        match self {
            Self::Legacy80 => 160,
            Self::Standard128 => 255,
        }
    }

    /// Inverse of `Engine::ID`, for dispatching on stored encodings.
    pub fn from_engine_id(id: u8) -> Option<Self> {
        match id {
            TypeA::ID => Some(Self::Legacy80),
            Bls12Paired::ID => Some(Self::Standard128),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Legacy80 => TypeA::NAME,
            Self::Standard128 => Bls12Paired::NAME,
        }
    }
}

impl fmt::Display for SecurityLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SecurityLevel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "type-a" | "legacy80" => Ok(Self::Legacy80),
            "bls12-381" | "standard128" => Ok(Self::Standard128),
            other => other
                .parse::<u32>()
                .map_err(|_| Error::UnsupportedSecurityLevel(0))
                .and_then(Self::from_bits),
        }
    }
}

/// Raw arithmetic backend. Protocol code never calls this directly; it uses
/// the counted wrappers [`Scalar`], [`G1Element`] and [`GtElement`].
pub trait Engine: Copy + Clone + Debug + Default + PartialEq + Eq + Send + Sync + 'static {
    type Fr: Copy + PartialEq + Eq + Debug + Send + Sync + 'static;
    type G1: Copy + PartialEq + Eq + Debug + Send + Sync + 'static;
    type Gt: Copy + PartialEq + Eq + Debug + Send + Sync + 'static;

    const NAME: &'static str;
    /// Backend identifier, stored in the high nibble of encoding tags.
    const ID: u8;
    const LEVEL: SecurityLevel;
    const FR_BYTES: usize;
    const G1_BYTES: usize;
    const GT_BYTES: usize;

    fn order_bits() -> usize;

    fn fr_from_u64(v: u64) -> Self::Fr;
    /// Reduces 64 uniformly random bytes modulo the group order.
    fn fr_from_wide(bytes: &[u8; 64]) -> Self::Fr;
    fn fr_add(a: &Self::Fr, b: &Self::Fr) -> Self::Fr;
    fn fr_sub(a: &Self::Fr, b: &Self::Fr) -> Self::Fr;
    fn fr_mul(a: &Self::Fr, b: &Self::Fr) -> Self::Fr;
    fn fr_neg(a: &Self::Fr) -> Self::Fr;
    fn fr_invert(a: &Self::Fr) -> Option<Self::Fr>;
    fn fr_to_bytes(a: &Self::Fr) -> Vec<u8>;
    fn fr_from_bytes(bytes: &[u8]) -> Option<Self::Fr>;

    fn g1_generator() -> Self::G1;
    fn g1_identity() -> Self::G1;
    fn g1_op(a: &Self::G1, b: &Self::G1) -> Self::G1;
    fn g1_inverse(a: &Self::G1) -> Self::G1;
    fn g1_pow(a: &Self::G1, s: &Self::Fr) -> Self::G1;
    fn g1_to_bytes(a: &Self::G1) -> Vec<u8>;
    fn g1_from_bytes(bytes: &[u8]) -> Option<Self::G1>;

    /// `ê(g, g)`.
    fn gt_generator() -> Self::Gt;
    fn gt_identity() -> Self::Gt;
    fn gt_op(a: &Self::Gt, b: &Self::Gt) -> Self::Gt;
    fn gt_inverse(a: &Self::Gt) -> Self::Gt;
    fn gt_pow(a: &Self::Gt, s: &Self::Fr) -> Self::Gt;
    fn gt_to_bytes(a: &Self::Gt) -> Vec<u8>;
    fn gt_from_bytes(bytes: &[u8]) -> Option<Self::Gt>;

    fn pairing(a: &Self::G1, b: &Self::G1) -> Self::Gt;
}

const H1_DST: &[u8] = b"rbks/H1/bytes-to-scalar/v1";
const H2_DST: &[u8] = b"rbks/H2/g1-to-scalar/v1";

/// The shared group stage: generator, `ê(g, g)` and the two hash functions.
#[derive(Clone, Copy, PartialEq, Eq)]
pub struct BilinearContext<E: Engine> {
    level: SecurityLevel,
    g: G1Element<E>,
    egg: GtElement<E>,
}

impl<E: Engine> Debug for BilinearContext<E> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BilinearContext")
            .field("engine", &E::NAME)
            .field("order_bits", &E::order_bits())
            .finish()
    }
}

/// Builds the context for `level`; fails if `E` does not serve that level.
pub fn setup_context<E: Engine>(level: SecurityLevel) -> Result<BilinearContext<E>, Error> {
    if level != E::LEVEL {
        return Err(Error::UnsupportedSecurityLevel(
            level.group_order_bits() as u32
        ));
    }
    Ok(BilinearContext {
        level,
        g: G1Element::generator(),
        egg: GtElement::from_raw(E::gt_generator()),
    })
}

impl<E: Engine> BilinearContext<E> {
    pub fn new() -> Self {
        setup_context(E::LEVEL).expect("engine serves its own level")
    }

    pub fn level(&self) -> SecurityLevel {
        self.level
    }

    pub fn order_bits(&self) -> usize {
        E::order_bits()
    }

    pub fn g(&self) -> G1Element<E> {
        self.g
    }

    /// `ê(g, g)`, cached.
    pub fn egg(&self) -> GtElement<E> {
        self.egg
    }

    /// `H1: {0,1}* → Z_q^*`.
    pub fn hash_h1(&self, input: &[u8]) -> Scalar<E> {
        hash_to_nonzero_scalar(H1_DST, input)
    }

    /// `H2: G1 → Z_q^*`, over the canonical encoding of the element.
    pub fn hash_h2(&self, element: &G1Element<E>) -> Scalar<E> {
        hash_to_nonzero_scalar(H2_DST, &element.to_bytes())
    }
}

impl<E: Engine> Default for BilinearContext<E> {
    fn default() -> Self {
        Self::new()
    }
}

/// Domain-separated SHA-512 with a counter; a zero output is rejected and
/// the counter bumped, so the result is always in `Z_q^*`.
fn hash_to_nonzero_scalar<E: Engine>(dst: &[u8], input: &[u8]) -> Scalar<E> {
    telemetry::record_hash();
    for counter in 0u32.. {
        let mut hasher = Sha512::new();
        hasher.update((dst.len() as u32).to_be_bytes());
        hasher.update(dst);
        hasher.update(counter.to_be_bytes());
        hasher.update(input);
        let wide: [u8; 64] = hasher.finalize().into();
        let s = Scalar::from_raw(E::fr_from_wide(&wide));
        if !s.is_zero() {
            return s;
        }
    }
    unreachable!("counter space exhausted")
}

/// Runs `$body` with `$E` bound to the engine serving `$level`.
#[macro_export]
macro_rules! with_engine {
    ($level:expr, $E:ident => $body:expr) => {
        match $level {
            $crate::pairing::SecurityLevel::Legacy80 => {
                type $E = $crate::pairing::TypeA;
                $body
            }
            $crate::pairing::SecurityLevel::Standard128 => {
                type $E = $crate::pairing::Bls12Paired;
                $body
            }
        }
    };
}
