//! Coefficient rings: exact arithmetic over Q, Z, F_p and the p-local integers Z_(p).
//!
//! Every scalar is stored as a reduced `BigRational`; the ring decides which
//! rationals are members, which are units, and how divisibility works. The
//! p-local integers are reduced fractions with denominator coprime to p, so
//! all computations stay exact without completing at p.

use num::bigint::BigInt;
use num::rational::BigRational;
use num::traits::{One, Signed, Zero};
use std::fmt;

use crate::error::EngineError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RingKind {
    Rationals,
    Integers,
    PrimeField(u64),
    PLocalIntegers(u64),
}

/// A coefficient ring handle. All scalar operations go through this so that
/// prime-field values stay canonically reduced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Ring {
    kind: RingKind,
}

/// A ring element. Internally a reduced rational; `Ring::is_member` tells
/// whether it belongs to the ambient ring.
pub type Scalar = BigRational;

fn is_prime(p: u64) -> bool {
    if p < 2 {
        return false;
    }
    let mut d = 2u64;
    while d * d <= p {
        if p % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

impl Ring {
    pub fn rationals() -> Self {
        Ring {
            kind: RingKind::Rationals,
        }
    }

    pub fn integers() -> Self {
        Ring {
            kind: RingKind::Integers,
        }
    }

    /// The paper works in characteristic different from 2 throughout, so p = 2
    /// is rejected here once and for all.
    pub fn prime_field(p: u64) -> Result<Self, EngineError> {
        Self::check_prime(p)?;
        Ok(Ring {
            kind: RingKind::PrimeField(p),
        })
    }

    pub fn p_local(p: u64) -> Result<Self, EngineError> {
        Self::check_prime(p)?;
        Ok(Ring {
            kind: RingKind::PLocalIntegers(p),
        })
    }

    fn check_prime(p: u64) -> Result<(), EngineError> {
        if !is_prime(p) {
            return Err(EngineError::BadRing(format!("{p} is not prime")));
        }
        if p == 2 {
            return Err(EngineError::BadRing(
                "p = 2 is excluded (modules must have no 2-torsion)".into(),
            ));
        }
        Ok(())
    }

    pub fn kind(&self) -> RingKind {
        self.kind
    }

    pub fn is_field(&self) -> bool {
        matches!(self.kind, RingKind::Rationals | RingKind::PrimeField(_))
    }

    pub fn prime(&self) -> Option<u64> {
        match self.kind {
            RingKind::PrimeField(p) | RingKind::PLocalIntegers(p) => Some(p),
            _ => None,
        }
    }

    pub fn zero(&self) -> Scalar {
        BigRational::zero()
    }

    pub fn one(&self) -> Scalar {
        BigRational::one()
    }

    pub fn from_i64(&self, n: i64) -> Scalar {
        self.normalize(BigRational::from_integer(BigInt::from(n)))
    }

    /// Canonical form of a raw rational in this ring. For F_p the value is
    /// reduced to an integer residue in [0, p).
    pub fn normalize(&self, x: Scalar) -> Scalar {
        match self.kind {
            RingKind::PrimeField(p) => {
                let p = BigInt::from(p);
                let num = x.numer();
                let den = x.denom();
                let d = den.modpow(&(&p - BigInt::from(2)), &p);
                let mut r = (num * d) % &p;
                if r.is_negative() {
                    r += &p;
                }
                BigRational::from_integer(r)
            }
            _ => x,
        }
    }

    pub fn is_member(&self, x: &Scalar) -> bool {
        match self.kind {
            RingKind::Rationals => true,
            RingKind::Integers => x.denom().is_one(),
            RingKind::PrimeField(_) => true,
            RingKind::PLocalIntegers(p) => {
                let p = BigInt::from(p);
                !(x.denom() % &p).is_zero()
            }
        }
    }

    pub fn add(&self, a: &Scalar, b: &Scalar) -> Scalar {
        self.normalize(a + b)
    }

    pub fn sub(&self, a: &Scalar, b: &Scalar) -> Scalar {
        self.normalize(a - b)
    }

    pub fn mul(&self, a: &Scalar, b: &Scalar) -> Scalar {
        self.normalize(a * b)
    }

    pub fn neg(&self, a: &Scalar) -> Scalar {
        self.normalize(-a)
    }

    /// p-adic valuation of a nonzero scalar over Z_(p) (may not be called on 0).
    pub fn p_valuation(&self, x: &Scalar) -> i64 {
        let p = BigInt::from(self.prime().expect("p_valuation needs a prime"));
        assert!(!x.is_zero());
        let mut v = 0i64;
        let mut n = x.numer().clone();
        while (&n % &p).is_zero() {
            n /= &p;
            v += 1;
        }
        let mut d = x.denom().clone();
        while (&d % &p).is_zero() {
            d /= &p;
            v -= 1;
        }
        v
    }

    pub fn is_unit(&self, x: &Scalar) -> bool {
        if x.is_zero() {
            return false;
        }
        match self.kind {
            RingKind::Rationals | RingKind::PrimeField(_) => true,
            RingKind::Integers => x.numer().abs().is_one() && x.denom().is_one(),
            RingKind::PLocalIntegers(_) => self.p_valuation(x) == 0,
        }
    }

    pub fn inv(&self, x: &Scalar) -> Option<Scalar> {
        if !self.is_unit(x) {
            return None;
        }
        Some(self.normalize(BigRational::new(x.denom().clone(), x.numer().clone())))
    }

    /// Does a divide b in this ring? (a nonzero)
    pub fn divides(&self, a: &Scalar, b: &Scalar) -> bool {
        assert!(!a.is_zero());
        if b.is_zero() {
            return true;
        }
        match self.kind {
            RingKind::Rationals | RingKind::PrimeField(_) => true,
            RingKind::Integers => (b / a).is_integer(),
            RingKind::PLocalIntegers(_) => self.p_valuation(a) <= self.p_valuation(b),
        }
    }

    /// Exact quotient b / a; caller must ensure divisibility.
    pub fn div_exact(&self, b: &Scalar, a: &Scalar) -> Scalar {
        debug_assert!(self.divides(a, b));
        self.normalize(b / a)
    }

    /// Euclidean division b = q*a + r. Over Z this is rounded division with
    /// |r| <= |a|/2; over the other rings the remainder is always zero when
    /// a has minimal valuation (which SNF pivoting guarantees).
    pub fn div_rem(&self, b: &Scalar, a: &Scalar) -> (Scalar, Scalar) {
        match self.kind {
            RingKind::Integers => {
                // round-to-nearest quotient keeps SNF entries small
                let half = BigRational::new(BigInt::one(), BigInt::from(2));
                let q = (b / a + half).floor();
                let r = b - &q * a;
                (q, r)
            }
            _ => {
                if self.divides(a, b) {
                    (self.div_exact(b, a), self.zero())
                } else {
                    // Z_(p): valuation of b below valuation of a; no progress by division
                    (self.zero(), b.clone())
                }
            }
        }
    }

    /// Pivot-ordering key: Z uses |a|, Z_(p) uses the p-adic valuation and
    /// fields treat every nonzero entry alike. Smaller keys are better pivots.
    pub fn pivot_key(&self, x: &Scalar) -> BigInt {
        assert!(!x.is_zero());
        match self.kind {
            RingKind::Rationals | RingKind::PrimeField(_) => BigInt::one(),
            RingKind::Integers => x.numer().abs(),
            RingKind::PLocalIntegers(_) => BigInt::from(self.p_valuation(x)),
        }
    }

    /// Canonical associate: positive for Z, p^v for Z_(p), 1 for fields.
    /// Returns (canonical, unit) with canonical = unit * x.
    pub fn canonical_associate(&self, x: &Scalar) -> (Scalar, Scalar) {
        if x.is_zero() {
            return (self.zero(), self.one());
        }
        match self.kind {
            RingKind::Rationals | RingKind::PrimeField(_) => {
                (self.one(), self.inv(x).unwrap())
            }
            RingKind::Integers => {
                if x.is_negative() {
                    (self.neg(x), self.from_i64(-1))
                } else {
                    (x.clone(), self.one())
                }
            }
            RingKind::PLocalIntegers(p) => {
                let v = self.p_valuation(x);
                let canon = BigRational::from_integer(BigInt::from(p).pow(v as u32));
                let unit = self.normalize(&canon / x);
                (canon, unit)
            }
        }
    }

    pub fn describe(&self) -> String {
        match self.kind {
            RingKind::Rationals => "Q".into(),
            RingKind::Integers => "Z".into(),
            RingKind::PrimeField(p) => format!("F{p}"),
            RingKind::PLocalIntegers(p) => format!("Z({p})"),
        }
    }
}

impl fmt::Display for Ring {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.describe())
    }
}

pub fn scalar_to_string(x: &Scalar) -> String {
    if x.denom().is_one() {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

pub fn scalar_from_str(s: &str) -> Result<Scalar, EngineError> {
    let parse_int = |t: &str| -> Result<BigInt, EngineError> {
        t.trim()
            .parse::<BigInt>()
            .map_err(|_| EngineError::Parse(format!("bad integer `{t}`"), 0, 0))
    };
    if let Some((n, d)) = s.split_once('/') {
        let num = parse_int(n)?;
        let den = parse_int(d)?;
        if den.is_zero() {
            return Err(EngineError::Parse("zero denominator".into(), 0, 0));
        }
        Ok(BigRational::new(num, den))
    } else {
        Ok(BigRational::from_integer(parse_int(s)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_two_and_composites() {
        assert!(Ring::prime_field(2).is_err());
        assert!(Ring::p_local(2).is_err());
        assert!(Ring::prime_field(9).is_err());
        assert!(Ring::prime_field(5).is_ok());
    }

    #[test]
    fn p_local_membership_and_units() {
        let r = Ring::p_local(5).unwrap();
        let half = BigRational::new(BigInt::from(1), BigInt::from(2));
        let fifth = BigRational::new(BigInt::from(1), BigInt::from(5));
        assert!(r.is_member(&half));
        assert!(!r.is_member(&fifth));
        assert!(r.is_unit(&half));
        assert!(!r.is_unit(&r.from_i64(5)));
        assert_eq!(r.p_valuation(&r.from_i64(75)), 2);
        assert!(r.divides(&r.from_i64(5), &r.from_i64(75)));
        assert!(!r.divides(&r.from_i64(25), &half));
    }

    #[test]
    fn prime_field_canonicalizes() {
        let r = Ring::prime_field(5).unwrap();
        let x = r.normalize(BigRational::new(BigInt::from(1), BigInt::from(2)));
        // 1/2 = 3 mod 5
        assert_eq!(x, r.from_i64(3));
        assert_eq!(r.add(&r.from_i64(4), &r.from_i64(3)), r.from_i64(2));
    }

    #[test]
    fn integer_div_rem_rounds() {
        let r = Ring::integers();
        let (q, rem) = r.div_rem(&r.from_i64(7), &r.from_i64(3));
        assert_eq!(&q * &r.from_i64(3) + &rem, r.from_i64(7));
        assert!(rem.numer().abs() <= BigInt::from(1));
    }
}
