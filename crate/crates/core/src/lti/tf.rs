use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;

use super::poly::Polynomial;
use super::roots;
use crate::error::{Error, Result};

/// Rational transfer function `num(s) / den(s)` with a monic denominator.
///
/// Arithmetic never cancels common factors; use [`RationalTF::minreal`].
#[derive(Clone, PartialEq)]
pub struct RationalTF {
    num: Polynomial,
    den: Polynomial,
}

impl RationalTF {
    pub fn new(num: Polynomial, den: Polynomial) -> Result<Self> {
        if den.is_zero() {
            return Err(Error::ZeroPolynomial);
        }
        let lead = den.leading();
        Ok(Self {
            num: num.scale(1.0 / lead),
            den: den.scale(1.0 / lead),
        })
    }

    /// Builds from ascending coefficient slices.
    pub fn from_coeffs(num: &[f64], den: &[f64]) -> Result<Self> {
        Self::new(Polynomial::new(num.to_vec()), Polynomial::new(den.to_vec()))
    }

    pub fn constant(c: f64) -> Self {
        Self {
            num: Polynomial::constant(c),
            den: Polynomial::one(),
        }
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    pub fn one() -> Self {
        Self::constant(1.0)
    }

    /// The differentiator `s`.
    pub fn s() -> Self {
        Self {
            num: Polynomial::s(),
            den: Polynomial::one(),
        }
    }

    pub fn num(&self) -> &Polynomial {
        &self.num
    }

    pub fn den(&self) -> &Polynomial {
        &self.den
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn is_proper(&self) -> bool {
        self.num.is_zero() || self.num.degree() <= self.den.degree()
    }

    pub fn is_strictly_proper(&self) -> bool {
        self.num.is_zero() || self.num.degree() < self.den.degree()
    }

    /// `deg den - deg num`.
    pub fn relative_degree(&self) -> i64 {
        if self.num.is_zero() {
            return 0;
        }
        self.den.degree() as i64 - self.num.degree() as i64
    }

    pub fn eval_s(&self, s: Complex64) -> Complex64 {
        self.num.eval_complex(s) / self.den.eval_complex(s)
    }

    /// Frequency response at `omega` rad/s. A pole exactly on the queried
    /// point yields a non-finite value.
    pub fn eval(&self, omega: f64) -> Complex64 {
        self.eval_s(Complex64::new(0.0, omega))
    }

    /// Value at `s = 0` (infinite for poles at the origin).
    pub fn dc_gain(&self) -> f64 {
        self.num.coeff(0) / self.den.coeff(0)
    }

    pub fn poles(&self) -> Vec<Complex64> {
        self.den.roots()
    }

    pub fn zeros(&self) -> Vec<Complex64> {
        if self.num.is_zero() {
            return Vec::new();
        }
        self.num.roots()
    }

    /// True when every pole lies strictly in the left half plane.
    pub fn is_stable(&self) -> bool {
        is_hurwitz_routh(&self.den)
    }

    pub fn scale(&self, k: f64) -> Self {
        Self {
            num: self.num.scale(k),
            den: self.den.clone(),
        }
    }

    pub fn inv(&self) -> Result<Self> {
        Self::new(self.den.clone(), self.num.clone())
    }

    pub fn checked_add(&self, other: &Self) -> Self {
        let num = &(&self.num * &other.den) + &(&other.num * &self.den);
        let den = &self.den * &other.den;
        Self::new(num, den).expect("product of monic polynomials is nonzero")
    }

    pub fn checked_mul(&self, other: &Self) -> Self {
        let num = &self.num * &other.num;
        let den = &self.den * &other.den;
        Self::new(num, den).expect("product of monic polynomials is nonzero")
    }

    /// Negative feedback `g / (1 + g h)`.
    pub fn feedback(g: &Self, h: &Self) -> Result<Self> {
        let num = &g.num * &h.den;
        let den = &(&g.den * &h.den) + &(&g.num * &h.num);
        if den.is_zero() {
            return Err(Error::SingularLoop);
        }
        Self::new(num, den)
    }

    /// Cancels pole/zero pairs closer than `tol` (relative to their modulus;
    /// exact zeros at the origin cancel only against each other).
    pub fn minreal(&self, tol: f64) -> Self {
        if self.num.is_zero() {
            return Self::new(Polynomial::zero(), Polynomial::one()).unwrap();
        }
        let mut zeros = self.zeros();
        let mut poles = self.poles();
        let mut keep_zero = vec![true; zeros.len()];
        let mut keep_pole = vec![true; poles.len()];
        for (i, z) in zeros.iter().enumerate() {
            let mut best: Option<(usize, f64)> = None;
            for (j, p) in poles.iter().enumerate() {
                if !keep_pole[j] {
                    continue;
                }
                let d = (z - p).norm();
                let scale = z.norm().max(p.norm());
                let ok = if scale == 0.0 { true } else { d <= tol * scale };
                if ok && best.map_or(true, |(_, bd)| d < bd) {
                    best = Some((j, d));
                }
            }
            if let Some((j, _)) = best {
                keep_zero[i] = false;
                keep_pole[j] = false;
            }
        }
        if keep_zero.iter().all(|&k| k) {
            return self.clone();
        }
        let mut idx = 0;
        zeros.retain(|_| {
            idx += 1;
            keep_zero[idx - 1]
        });
        let mut idx = 0;
        poles.retain(|_| {
            idx += 1;
            keep_pole[idx - 1]
        });
        let num = Polynomial::from_roots(self.num.leading(), &zeros);
        let den = Polynomial::from_roots(1.0, &poles);
        Self::new(num, den).unwrap()
    }

    /// Frequency-response comparison on `omegas`, relative to the larger
    /// magnitude at each point.
    pub fn response_close(&self, other: &Self, omegas: &[f64], rel_tol: f64) -> bool {
        omegas.iter().all(|&w| {
            let (a, b) = (self.eval(w), other.eval(w));
            (a - b).norm() <= rel_tol * a.norm().max(b.norm()).max(f64::MIN_POSITIVE)
        })
    }

    /// Coefficient-wise comparison of the canonical forms.
    pub fn approx_eq(&self, other: &Self, rel_tol: f64) -> bool {
        self.num.approx_eq(&other.num, rel_tol) && self.den.approx_eq(&other.den, rel_tol)
    }
}

impl fmt::Debug for RationalTF {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "RationalTF {{ num: {:?}, den: {:?} }}", self.num, self.den)
    }
}

impl fmt::Display for RationalTF {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}) / ({})", self.num, self.den)
    }
}

impl Add for &RationalTF {
    type Output = RationalTF;
    fn add(self, rhs: &RationalTF) -> RationalTF {
        self.checked_add(rhs)
    }
}

impl Sub for &RationalTF {
    type Output = RationalTF;
    fn sub(self, rhs: &RationalTF) -> RationalTF {
        self.checked_add(&-rhs)
    }
}

impl Mul for &RationalTF {
    type Output = RationalTF;
    fn mul(self, rhs: &RationalTF) -> RationalTF {
        self.checked_mul(rhs)
    }
}

impl Neg for &RationalTF {
    type Output = RationalTF;
    fn neg(self) -> RationalTF {
        self.scale(-1.0)
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl $tr for RationalTF {
            type Output = RationalTF;
            fn $m(self, rhs: RationalTF) -> RationalTF {
                (&self).$m(&rhs)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

pub fn is_hurwitz_routh(p: &Polynomial) -> bool {
    roots::routh_hurwitz(p.coeffs())
}

pub fn is_hurwitz_roots(p: &Polynomial) -> bool {
    p.roots().iter().all(|r| r.re < 0.0)
}

/// Strict Hurwitz test (all roots in the open left half plane).
pub fn is_hurwitz(p: &Polynomial) -> Result<bool> {
    if p.is_zero() {
        return Err(Error::ZeroPolynomial);
    }
    Ok(is_hurwitz_routh(p))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tf(n: &[f64], d: &[f64]) -> RationalTF {
        RationalTF::from_coeffs(n, d).unwrap()
    }

    #[test]
    fn add_integrators() {
        let i = tf(&[1.0], &[0.0, 1.0]);
        let sum = (&i + &i).minreal(1e-8);
        assert!(sum.approx_eq(&tf(&[2.0], &[0.0, 1.0]), 1e-12));
    }

    #[test]
    fn unit_feedback() {
        let g = RationalTF::constant(1.0);
        let h = RationalTF::one();
        let cl = RationalTF::feedback(&g, &h).unwrap();
        assert_eq!(cl.dc_gain(), 0.5);
    }

    #[test]
    fn canonical_monic() {
        let a = tf(&[2.0, 4.0], &[6.0, 2.0]);
        assert_eq!(a.den().leading(), 1.0);
        assert_eq!(a.num().coeffs(), &[1.0, 2.0]);
    }

    #[test]
    fn first_order_corner() {
        let v = tf(&[1.0], &[1.0, 1.0]).eval(1.0);
        assert!((v - Complex64::new(0.5, -0.5)).norm() < 1e-15);
    }

    #[test]
    fn pole_on_axis_is_non_finite() {
        let v = tf(&[1.0], &[1.0, 0.0, 1.0]).eval(1.0);
        assert!(!v.is_finite());
    }

    #[test]
    fn zero_denominator_rejected() {
        assert_eq!(
            RationalTF::from_coeffs(&[1.0], &[0.0]).unwrap_err(),
            Error::ZeroPolynomial
        );
    }

    #[test]
    fn minreal_cancels_and_preserves_response() {
        // (s+2)(s+3) / ((s+2)(s+5)(s+1))
        let n = Polynomial::new(vec![6.0, 5.0, 1.0]);
        let d = &Polynomial::new(vec![2.0, 1.0]) * &Polynomial::new(vec![5.0, 6.0, 1.0]);
        let g = RationalTF::new(n, d).unwrap();
        let m = g.minreal(1e-8);
        assert_eq!(m.den().degree(), 2);
        assert!(m.approx_eq(&tf(&[3.0, 1.0], &[5.0, 6.0, 1.0]), 1e-12));
    }

    #[test]
    fn minreal_keeps_distinct_roots() {
        let g = tf(&[1.0, 1.0], &[1.0 + 1e-6, 1.0]);
        assert_eq!(g.minreal(1e-8).den().degree(), 1);
    }

    #[test]
    fn hurwitz() {
        assert!(is_hurwitz(&Polynomial::new(vec![1.0, 1.0])).unwrap());
        assert!(!is_hurwitz(&Polynomial::new(vec![-1.0, 0.0, 1.0])).unwrap());
        assert!(is_hurwitz(&Polynomial::zero()).is_err());
    }
}
