//! Supersingular curve `E: y² = x³ + x` over `F_p`, `p ≡ 3 (mod 4)`.
//!
//! `#E(F_p) = p + 1 = h·q` with a 160-bit prime `q` and 512-bit `p`. The
//! pairing is the reduced Tate pairing composed with the distortion map
//! `φ(x, y) = (-x, i·y)`, `i² = -1`, giving a symmetric map into the order-`q`
//! subgroup of `F_{p²}^*` (embedding degree 2).

use std::sync::OnceLock;

use crypto_bigint::modular::constant_mod::{Residue, ResidueParams};
use crypto_bigint::{impl_modulus, Encoding, NonZero, U192, U512};

use super::{Engine, SecurityLevel};

impl_modulus!(
    BaseModulus,
    U512,
    "dadf8add64dd2b4e1e4f620df456da0cc30ea9c8f8521ff152b992a62a4ecfaa1e9aeb513562b954b72e1bc52f14aac27adf72bc4a68b20fd1143163ab7bfa53"
);
impl_modulus!(
    OrderModulus,
    U192,
    "00000000ecabc255fd83f05ba006dedbc542b2b801c2b7bf"
);

/// `(p + 1) / q`.
const COFACTOR: U512 = U512::from_be_hex(
    "0000000000000000000000000000000000000000ecbfac9838bac2430b4a8c13131f4fd482cc0a3224539b6bb32fb0c5a5d0ea2e1f4c294b4f89f28738c8faac",
);
const GEN_X: U512 = U512::from_be_hex(
    "da0e28ca0322b82f3415017415f971fd4e912bdcd90107d0e7a87bc265de28ceed616cd566d5ea2f7944b40ee7e193df9e1b2ad985d91e927ee9f46b26f9ba3a",
);
const GEN_Y: U512 = U512::from_be_hex(
    "1c304e2acc154c517abe0ab06f95422af5e3b9e08145b62c2731f03ea457518df51a9e05f87c7b9f9aa2fce06733d2d296afc22b1615334406cabcda5b58c0cf",
);

type Fp = Residue<BaseModulus, { U512::LIMBS }>;
type Fq = Residue<OrderModulus, { U192::LIMBS }>;

const FP_BYTES: usize = 64;
const ORDER_BYTES: usize = 20;

fn order() -> U192 {
    <OrderModulus as ResidueParams<{ U192::LIMBS }>>::MODULUS
}

fn base_modulus() -> U512 {
    <BaseModulus as ResidueParams<{ U512::LIMBS }>>::MODULUS
}

fn fp_is_zero(a: &Fp) -> bool {
    *a == Fp::ZERO
}

fn fp_double(a: &Fp) -> Fp {
    *a + *a
}

fn fp_from_be(bytes: &[u8]) -> Option<Fp> {
    let v = U512::from_be_slice(bytes);
    (v < base_modulus()).then(|| Fp::new(&v))
}

fn fp_sqrt(a: &Fp) -> Option<Fp> {
    // p ≡ 3 (mod 4): a^((p+1)/4)
    let exp = base_modulus().wrapping_add(&U512::ONE).shr_vartime(2);
    let r = a.pow(&exp);
    (r.square() == *a).then_some(r)
}

/// `F_p[i] / (i² + 1)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Fp2 {
    c0: Fp,
    c1: Fp,
}

impl Fp2 {
    const ONE: Fp2 = Fp2 {
        c0: Fp::ONE,
        c1: Fp::ZERO,
    };

    fn mul(&self, o: &Fp2) -> Fp2 {
        let aa = self.c0 * o.c0;
        let bb = self.c1 * o.c1;
        let cross = (self.c0 + self.c1) * (o.c0 + o.c1);
        Fp2 {
            c0: aa - bb,
            c1: cross - aa - bb,
        }
    }

    fn square(&self) -> Fp2 {
        let ab = self.c0 * self.c1;
        Fp2 {
            c0: (self.c0 + self.c1) * (self.c0 - self.c1),
            c1: ab + ab,
        }
    }

    fn conjugate(&self) -> Fp2 {
        Fp2 {
            c0: self.c0,
            c1: -self.c1,
        }
    }

    fn norm(&self) -> Fp {
        self.c0.square() + self.c1.square()
    }

    fn invert(&self) -> Option<Fp2> {
        let (inv, ok) = self.norm().invert();
        bool::from(ok).then(|| Fp2 {
            c0: self.c0 * inv,
            c1: -(self.c1 * inv),
        })
    }

    fn pow_bits(&self, bits: impl DoubleEndedIterator<Item = bool>) -> Fp2 {
        let mut acc = Fp2::ONE;
        for bit in bits {
            acc = acc.square();
            if bit {
                acc = acc.mul(self);
            }
        }
        acc
    }
}

fn bits_msb_first<const L: usize>(
    v: &crypto_bigint::Uint<L>,
) -> impl DoubleEndedIterator<Item = bool> + '_ {
    (0..v.bits_vartime()).rev().map(move |i| v.bit_vartime(i))
}

/// Jacobian point `(X : Y : Z)` representing `(X/Z², Y/Z³)`; `Z = 0` is the identity.
#[derive(Clone, Copy, Debug)]
pub struct Point {
    x: Fp,
    y: Fp,
    z: Fp,
}

impl PartialEq for Point {
    fn eq(&self, o: &Point) -> bool {
        match (self.is_identity(), o.is_identity()) {
            (true, true) => true,
            (false, false) => {
                let z1z1 = self.z.square();
                let z2z2 = o.z.square();
                self.x * z2z2 == o.x * z1z1 && self.y * z2z2 * o.z == o.y * z1z1 * self.z
            }
            _ => false,
        }
    }
}

impl Eq for Point {}

impl Point {
    const IDENTITY: Point = Point {
        x: Fp::ONE,
        y: Fp::ONE,
        z: Fp::ZERO,
    };

    fn from_affine(x: Fp, y: Fp) -> Point {
        Point { x, y, z: Fp::ONE }
    }

    fn is_identity(&self) -> bool {
        fp_is_zero(&self.z)
    }

    fn to_affine(self) -> Option<(Fp, Fp)> {
        if self.is_identity() {
            return None;
        }
        let (zinv, _) = self.z.invert();
        let zinv2 = zinv.square();
        Some((self.x * zinv2, self.y * zinv2 * zinv))
    }

    fn is_on_curve(x: &Fp, y: &Fp) -> bool {
        y.square() == x.square() * x + x
    }

    fn neg(&self) -> Point {
        Point {
            x: self.x,
            y: -self.y,
            z: self.z,
        }
    }

    fn double(&self) -> Point {
        if self.is_identity() || fp_is_zero(&self.y) {
            return Point::IDENTITY;
        }
        let xx = self.x.square();
        let yy = self.y.square();
        let zz = self.z.square();
        let s = fp_double(&fp_double(&(self.x * yy)));
        let m = xx + fp_double(&xx) + zz.square();
        let x3 = m.square() - fp_double(&s);
        let yyyy8 = fp_double(&fp_double(&fp_double(&yy.square())));
        let y3 = m * (s - x3) - yyyy8;
        let z3 = fp_double(&(self.y * self.z));
        Point {
            x: x3,
            y: y3,
            z: z3,
        }
    }

    fn add(&self, o: &Point) -> Point {
        if self.is_identity() {
            return *o;
        }
        if o.is_identity() {
            return *self;
        }
        let z1z1 = self.z.square();
        let z2z2 = o.z.square();
        let u1 = self.x * z2z2;
        let u2 = o.x * z1z1;
        let s1 = self.y * o.z * z2z2;
        let s2 = o.y * self.z * z1z1;
        let h = u2 - u1;
        let r = s2 - s1;
        if fp_is_zero(&h) {
            return if fp_is_zero(&r) {
                self.double()
            } else {
                Point::IDENTITY
            };
        }
        let hh = h.square();
        let hhh = h * hh;
        let v = u1 * hh;
        let x3 = r.square() - hhh - fp_double(&v);
        let y3 = r * (v - x3) - s1 * hhh;
        let z3 = self.z * o.z * h;
        Point {
            x: x3,
            y: y3,
            z: z3,
        }
    }

    fn mul_bits(&self, bits: impl Iterator<Item = bool>) -> Point {
        let mut acc = Point::IDENTITY;
        for bit in bits {
            acc = acc.double();
            if bit {
                acc = acc.add(self);
            }
        }
        acc
    }

    fn mul_scalar(&self, s: &Fq) -> Point {
        let k = s.retrieve();
        self.mul_bits(bits_msb_first(&k))
    }
}

fn generator() -> Point {
    Point::from_affine(Fp::new(&GEN_X), Fp::new(&GEN_Y))
}

/// Miller loop `f_{q,P}(φ(Q))` followed by the final exponentiation
/// `(p² - 1)/q = (p - 1)·h`.
///
/// Line values are scaled by `F_p` factors and vertical lines are dropped;
/// both vanish under the `(p - 1)` power.
fn tate(p: &Point, q: &Point) -> Fp2 {
    let (Some((xp, yp)), Some((xq, yq))) = (p.to_affine(), q.to_affine()) else {
        return Fp2::ONE;
    };
    let order = order();
    let mut t = Point::from_affine(xp, yp);
    let mut f = Fp2::ONE;
    for i in (0..order.bits_vartime() - 1).rev() {
        // tangent at T: real = M(X + Z²xQ) - 2Y², imag = 2YZ³·yQ
        let zz = t.z.square();
        let xx = t.x.square();
        let m = xx + fp_double(&xx) + zz.square();
        let line = Fp2 {
            c0: m * (t.x + zz * xq) - fp_double(&t.y.square()),
            c1: fp_double(&(t.y * t.z * zz)) * yq,
        };
        f = f.square().mul(&line);
        t = t.double();

        if order.bit_vartime(i) {
            // chord through T and P: real = R(xQ + xP) - D·yP, imag = D·yQ
            let zz = t.z.square();
            let h = xp * zz - t.x;
            let r = yp * t.z * zz - t.y;
            if fp_is_zero(&h) {
                // vertical line at the final step, T + P = O
                t = Point::IDENTITY;
                continue;
            }
            let d = t.z * h;
            let line = Fp2 {
                c0: r * (xq + xp) - d * yp,
                c1: d * yq,
            };
            f = f.mul(&line);
            t = t.add(&Point::from_affine(xp, yp));
        }
    }
    final_exponentiation(&f)
}

fn final_exponentiation(f: &Fp2) -> Fp2 {
    // f^(p-1) = conj(f) / f, since f^p = conj(f)
    let Some(inv) = f.invert() else {
        return Fp2::ONE;
    };
    let unitary = f.conjugate().mul(&inv);
    unitary.pow_bits(bits_msb_first(&COFACTOR))
}

/// Supersingular Type A curve with a 160-bit group order.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct TypeA;

impl Engine for TypeA {
    type Fr = Fq;
    type G1 = Point;
    type Gt = Fp2;

    const NAME: &'static str = "type-a";
    const ID: u8 = 0x1;
    const LEVEL: SecurityLevel = SecurityLevel::Legacy80;
    const FR_BYTES: usize = ORDER_BYTES;
    const G1_BYTES: usize = 1 + FP_BYTES;
    const GT_BYTES: usize = 2 * FP_BYTES;

    fn order_bits() -> usize {
        order().bits_vartime()
    }

    fn fr_from_u64(v: u64) -> Fq {
        Fq::new(&U192::from_u64(v))
    }

    fn fr_from_wide(bytes: &[u8; 64]) -> Fq {
        let wide = U512::from_be_slice(bytes);
        let modulus = NonZero::new(order().resize::<{ U512::LIMBS }>()).unwrap();
        let reduced = wide.rem(&modulus);
        Fq::new(&reduced.resize())
    }

    fn fr_add(a: &Fq, b: &Fq) -> Fq {
        *a + *b
    }

    fn fr_sub(a: &Fq, b: &Fq) -> Fq {
        *a - *b
    }

    fn fr_mul(a: &Fq, b: &Fq) -> Fq {
        *a * *b
    }

    fn fr_neg(a: &Fq) -> Fq {
        -*a
    }

    fn fr_invert(a: &Fq) -> Option<Fq> {
        let (inv, ok) = a.invert();
        bool::from(ok).then_some(inv)
    }

    fn fr_to_bytes(a: &Fq) -> Vec<u8> {
        let full = a.retrieve().to_be_bytes();
        full[full.len() - ORDER_BYTES..].to_vec()
    }

    fn fr_from_bytes(bytes: &[u8]) -> Option<Fq> {
        if bytes.len() != ORDER_BYTES {
            return None;
        }
        let v = U192::from_be_slice(&[&[0u8; 24 - ORDER_BYTES][..], bytes].concat());
        (v < order()).then(|| Fq::new(&v))
    }

    fn g1_generator() -> Point {
        generator()
    }

    fn g1_identity() -> Point {
        Point::IDENTITY
    }

    fn g1_op(a: &Point, b: &Point) -> Point {
        a.add(b)
    }

    fn g1_inverse(a: &Point) -> Point {
        a.neg()
    }

    fn g1_pow(a: &Point, s: &Fq) -> Point {
        a.mul_scalar(s)
    }

    /// Flag byte (0 = identity, 2/3 = parity of `y`) followed by `x`.
    fn g1_to_bytes(a: &Point) -> Vec<u8> {
        let mut out = vec![0u8; Self::G1_BYTES];
        if let Some((x, y)) = a.to_affine() {
            let y_odd = y.retrieve().bit_vartime(0);
            out[0] = if y_odd { 3 } else { 2 };
            out[1..].copy_from_slice(&x.retrieve().to_be_bytes());
        }
        out
    }

    fn g1_from_bytes(bytes: &[u8]) -> Option<Point> {
        if bytes.len() != Self::G1_BYTES {
            return None;
        }
        match bytes[0] {
            0 => bytes[1..]
                .iter()
                .all(|b| *b == 0)
                .then_some(Point::IDENTITY),
            flag @ (2 | 3) => {
                let x = fp_from_be(&bytes[1..])?;
                let mut y = fp_sqrt(&(x.square() * x + x))?;
                if y.retrieve().bit_vartime(0) != (flag == 3) {
                    y = -y;
                }
                let p = Point::from_affine(x, y);
                debug_assert!(Point::is_on_curve(&x, &y));
                // subgroup check: q·P = O
                p.mul_bits(bits_msb_first(&order()))
                    .is_identity()
                    .then_some(p)
            }
            _ => None,
        }
    }

    fn gt_generator() -> Fp2 {
        static EGG: OnceLock<Fp2> = OnceLock::new();
        *EGG.get_or_init(|| tate(&generator(), &generator()))
    }

    fn gt_identity() -> Fp2 {
        Fp2::ONE
    }

    fn gt_op(a: &Fp2, b: &Fp2) -> Fp2 {
        a.mul(b)
    }

    fn gt_inverse(a: &Fp2) -> Fp2 {
        // elements of the order-q subgroup are unitary
        a.conjugate()
    }

    fn gt_pow(a: &Fp2, s: &Fq) -> Fp2 {
        let k = s.retrieve();
        a.pow_bits(bits_msb_first(&k))
    }

    fn gt_to_bytes(a: &Fp2) -> Vec<u8> {
        let mut out = a.c0.retrieve().to_be_bytes().to_vec();
        out.extend_from_slice(&a.c1.retrieve().to_be_bytes());
        out
    }

    fn gt_from_bytes(bytes: &[u8]) -> Option<Fp2> {
        if bytes.len() != Self::GT_BYTES {
            return None;
        }
        let v = Fp2 {
            c0: fp_from_be(&bytes[..FP_BYTES])?,
            c1: fp_from_be(&bytes[FP_BYTES..])?,
        };
        let in_subgroup = v.norm() == Fp::ONE && v.pow_bits(bits_msb_first(&order())) == Fp2::ONE;
        in_subgroup.then_some(v)
    }

    fn pairing(a: &Point, b: &Point) -> Fp2 {
        tate(a, b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parameters_are_consistent() {
        let p = base_modulus();
        // p ≡ 3 mod 4
        assert!(p.bit_vartime(0) && p.bit_vartime(1));
        assert_eq!(p.bits_vartime(), 512);
        // h·q = p + 1
        let q = order().resize::<{ U512::LIMBS }>();
        assert_eq!(COFACTOR.wrapping_mul(&q), p.wrapping_add(&U512::ONE));
    }

    #[test]
    fn generator_is_on_curve_with_order_q() {
        let g = generator();
        let (x, y) = g.to_affine().unwrap();
        assert!(Point::is_on_curve(&x, &y));
        assert!(g.mul_bits(bits_msb_first(&order())).is_identity());
    }

    #[test]
    fn jacobian_addition_matches_doubling() {
        let g = generator();
        let two = g.add(&g);
        assert_eq!(two, g.double());
        let three = two.add(&g);
        assert_eq!(three, g.double().add(&g));
        assert_eq!(three.add(&three.neg()), Point::IDENTITY);
        let s = Fq::new(&U192::from_u64(6));
        assert_eq!(g.mul_scalar(&s), three.double());
    }

    #[test]
    fn pairing_lands_in_order_q_subgroup() {
        let e = TypeA::gt_generator();
        assert_ne!(e, Fp2::ONE);
        assert_eq!(e.norm(), Fp::ONE);
        assert_eq!(e.pow_bits(bits_msb_first(&order())), Fp2::ONE);
    }

    #[test]
    fn compressed_point_round_trip() {
        let g = generator();
        for k in [1u64, 2, 7, 1 << 40] {
            let p = g.mul_scalar(&Fq::new(&U192::from_u64(k)));
            let bytes = TypeA::g1_to_bytes(&p);
            assert_eq!(TypeA::g1_from_bytes(&bytes), Some(p));
        }
        let id = TypeA::g1_to_bytes(&Point::IDENTITY);
        assert_eq!(TypeA::g1_from_bytes(&id), Some(Point::IDENTITY));
    }

    #[test]
    fn rejects_points_outside_subgroup() {
        // the first small x on the curve; the cofactor is ~2^350, so the
        // point is outside the order-q subgroup
        let (x, y) = (2u64..)
            .map(|v| Fp::new(&U512::from_u64(v)))
            .find_map(|x| fp_sqrt(&(x.square() * x + x)).map(|y| (x, y)))
            .unwrap();
        assert!(!Point::from_affine(x, y)
            .mul_bits(bits_msb_first(&order()))
            .is_identity());
        let mut bytes = vec![2u8];
        bytes.extend_from_slice(&x.retrieve().to_be_bytes());
        if y.retrieve().bit_vartime(0) {
            bytes[0] = 3;
        }
        assert_eq!(TypeA::g1_from_bytes(&bytes), None);
    }
}
