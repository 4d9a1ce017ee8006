use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use rand::Rng;

/// `2⁶¹ − 1`, a Mersenne prime.
pub const MERSENNE_61: u64 = (1 << 61) - 1;

/// Element of `Z_P`. `P` must be prime for [`Fp::inverse`] to be meaningful.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct Fp<const P: u64>(u64);

pub type F61 = Fp<MERSENNE_61>;

/// Real values enter the field scaled by `2^FIXED_BITS`.
pub const FIXED_BITS: u32 = 20;

impl<const P: u64> Fp<P> {
    pub const MODULUS: u64 = P;
    pub const ZERO: Self = Fp(0);
    pub const ONE: Self = Fp(1 % P);

    pub fn new(v: u64) -> Self {
        Fp(v % P)
    }

    pub fn from_i64(v: i64) -> Self {
        let r = (v as i128).rem_euclid(P as i128);
        Fp(r as u64)
    }

    pub fn value(self) -> u64 {
        self.0
    }

    /// Representative in `(−P/2, P/2]`.
    pub fn centered(self) -> i64 {
        if self.0 > P / 2 {
            -((P - self.0) as i64)
        } else {
            self.0 as i64
        }
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Fp(rng.random_range(0..P))
    }

    pub fn pow(self, mut e: u64) -> Self {
        let mut base = self;
        let mut acc = Self::ONE;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc * base;
            }
            base = base * base;
            e >>= 1;
        }
        acc
    }

    pub fn inverse(self) -> Option<Self> {
        (self.0 != 0).then(|| self.pow(P - 2))
    }

    pub fn encode_fixed(x: f64) -> Self {
        Self::from_i64((x * (1u64 << FIXED_BITS) as f64).round() as i64)
    }

    pub fn decode_fixed(self) -> f64 {
        self.centered() as f64 / (1u64 << FIXED_BITS) as f64
    }

    pub fn to_le_bytes(self) -> [u8; 8] {
        self.0.to_le_bytes()
    }

    /// `None` unless the bytes hold a canonical representative.
    pub fn from_le_bytes(bytes: &[u8]) -> Option<Self> {
        let v = u64::from_le_bytes(bytes.try_into().ok()?);
        (v < P).then_some(Fp(v))
    }
}

impl<const P: u64> fmt::Debug for Fp<P> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl<const P: u64> fmt::Display for Fp<P> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl<const P: u64> Add for Fp<P> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Fp(((self.0 as u128 + o.0 as u128) % P as u128) as u64)
    }
}

impl<const P: u64> Sub for Fp<P> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Fp(((self.0 as u128 + P as u128 - o.0 as u128) % P as u128) as u64)
    }
}

impl<const P: u64> Mul for Fp<P> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        Fp(((self.0 as u128 * o.0 as u128) % P as u128) as u64)
    }
}

impl<const P: u64> Neg for Fp<P> {
    type Output = Self;
    fn neg(self) -> Self {
        Self::ZERO - self
    }
}

impl<const P: u64> AddAssign for Fp<P> {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl<const P: u64> SubAssign for Fp<P> {
    fn sub_assign(&mut self, o: Self) {
        *self = *self - o;
    }
}

impl<const P: u64> Sum for Fp<P> {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::ZERO, Add::add)
    }
}

impl<'a, const P: u64> Sum<&'a Fp<P>> for Fp<P> {
    fn sum<I: Iterator<Item = &'a Self>>(iter: I) -> Self {
        iter.copied().sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arithmetic_wraps() {
        let a = F61::new(MERSENNE_61 - 1);
        assert_eq!(a + F61::ONE, F61::ZERO);
        assert_eq!(F61::ZERO - F61::ONE, a);
        assert_eq!(a * a, F61::ONE);
        assert_eq!(-F61::new(5) + F61::new(5), F61::ZERO);
        assert_eq!(F61::from_i64(-3).centered(), -3);
    }

    #[test]
    fn inverse_and_small_field() {
        type F7 = Fp<7>;
        for v in 1..7 {
            let x = F7::new(v);
            assert_eq!(x * x.inverse().unwrap(), F7::ONE);
        }
        assert!(F7::ZERO.inverse().is_none());
        let x = F61::new(123_456_789);
        assert_eq!(x * x.inverse().unwrap(), F61::ONE);
    }

    #[test]
    fn fixed_point_round_trip() {
        for v in [0.0, 1.5, -2.25, 1234.5678] {
            let back = F61::encode_fixed(v).decode_fixed();
            assert!((back - v).abs() <= 0.5 / (1u64 << FIXED_BITS) as f64);
        }
        let e = F61::new(42);
        assert_eq!(F61::from_le_bytes(&e.to_le_bytes()), Some(e));
        assert_eq!(F61::from_le_bytes(&u64::MAX.to_le_bytes()), None);
    }

    proptest::proptest! {
        #[test]
        fn field_laws(a in 0..MERSENNE_61, b in 0..MERSENNE_61, c in 0..MERSENNE_61) {
            let (a, b, c) = (F61::new(a), F61::new(b), F61::new(c));
            proptest::prop_assert_eq!(a * (b + c), a * b + a * c);
            proptest::prop_assert_eq!(a - b + b, a);
            if a != F61::ZERO {
                proptest::prop_assert_eq!(a * a.inverse().unwrap(), F61::ONE);
            }
        }

        #[test]
        fn fixed_point_within_half_ulp(x in -1.0e9f64..1.0e9) {
            let back = F61::encode_fixed(x).decode_fixed();
            proptest::prop_assert!((back - x).abs() <= 0.5 / (1u64 << FIXED_BITS) as f64 + 1e-9 * x.abs());
        }
    }
}
