//! Dense real polynomials in ascending powers of `s`.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;

use super::roots;

/// Real polynomial `c[0] + c[1] s + ... + c[n] s^n`.
///
/// Trailing (highest-power) exact zeros are trimmed on construction, so the
/// last stored coefficient is nonzero unless the polynomial is identically
/// zero, in which case it is stored as `[0.0]`.
#[derive(Clone, PartialEq)]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

impl Polynomial {
    pub fn new(coeffs: impl Into<Vec<f64>>) -> Self {
        let mut coeffs = coeffs.into();
        while coeffs.len() > 1 && coeffs[coeffs.len() - 1] == 0.0 {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(0.0);
        }
        Self { coeffs }
    }

    pub fn zero() -> Self {
        Self { coeffs: vec![0.0] }
    }

    pub fn one() -> Self {
        Self::constant(1.0)
    }

    pub fn constant(c: f64) -> Self {
        Self::new(vec![c])
    }

    /// The monomial `s`.
    pub fn s() -> Self {
        Self::new(vec![0.0, 1.0])
    }

    /// `c * s^n`
    pub fn monomial(c: f64, n: usize) -> Self {
        let mut coeffs = vec![0.0; n + 1];
        coeffs[n] = c;
        Self::new(coeffs)
    }

    /// Rebuilds a real polynomial `lead * prod (s - r)` from roots that come
    /// in conjugate pairs. Imaginary residue of the product is discarded.
    pub fn from_roots(lead: f64, roots: &[Complex64]) -> Self {
        let mut acc = vec![Complex64::new(lead, 0.0)];
        for &r in roots {
            let mut next = vec![Complex64::new(0.0, 0.0); acc.len() + 1];
            for (i, &a) in acc.iter().enumerate() {
                next[i + 1] += a;
                next[i] -= a * r;
            }
            acc = next;
        }
        Self::new(acc.into_iter().map(|c| c.re).collect::<Vec<_>>())
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Coefficient of `s^i` (zero past the degree).
    pub fn coeff(&self, i: usize) -> f64 {
        self.coeffs.get(i).copied().unwrap_or(0.0)
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.len() == 1 && self.coeffs[0] == 0.0
    }

    pub fn leading(&self) -> f64 {
        self.coeffs[self.coeffs.len() - 1]
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    pub fn scale(&self, k: f64) -> Self {
        Self::new(self.coeffs.iter().map(|c| c * k).collect::<Vec<_>>())
    }

    /// Scaled so the leading coefficient is one.
    pub fn monic(&self) -> Self {
        if self.is_zero() {
            return self.clone();
        }
        self.scale(1.0 / self.leading())
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    pub fn eval_complex(&self, z: Complex64) -> Complex64 {
        self.coeffs
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
    }

    pub fn derivative(&self) -> Self {
        if self.coeffs.len() == 1 {
            return Self::zero();
        }
        Self::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, &c)| c * i as f64)
                .collect::<Vec<_>>(),
        )
    }

    pub fn pow(&self, n: u32) -> Self {
        (0..n).fold(Self::one(), |acc, _| &acc * self)
    }

    /// Substitutes `s -> c s`.
    pub fn scale_argument(&self, c: f64) -> Self {
        let mut f = 1.0;
        Self::new(
            self.coeffs
                .iter()
                .map(|&a| {
                    let v = a * f;
                    f *= c;
                    v
                })
                .collect::<Vec<_>>(),
        )
    }

    /// Splits `p(j w)` into `A(w^2) + j w B(w^2)`, returning `(A, B)` as
    /// polynomials in `x = w^2`.
    pub fn jw_parts(&self) -> (Self, Self) {
        let mut even = Vec::new();
        let mut odd = Vec::new();
        for (i, &c) in self.coeffs.iter().enumerate() {
            // (j w)^i = j^i w^i ; j^(2m) = (-1)^m
            let m = i / 2;
            let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
            if i % 2 == 0 {
                even.push(sign * c);
            } else {
                odd.push(sign * c);
            }
        }
        (Self::new(even), Self::new(odd))
    }

    /// All complex roots (with multiplicity).
    pub fn roots(&self) -> Vec<Complex64> {
        roots::roots(self.coeffs())
    }

    /// Number of exact zero roots (leading exact-zero coefficients).
    pub fn zero_root_multiplicity(&self) -> usize {
        if self.is_zero() {
            return 0;
        }
        self.coeffs.iter().take_while(|&&c| c == 0.0).count()
    }

    /// Coefficient-wise comparison with relative tolerance. Coefficients that
    /// are small relative to the polynomial's largest coefficient are compared
    /// against that scale instead.
    pub fn approx_eq(&self, other: &Self, rel_tol: f64) -> bool {
        let n = self.coeffs.len().max(other.coeffs.len());
        let scale = self.max_abs_coeff().max(other.max_abs_coeff());
        (0..n).all(|i| {
            let (a, b) = (self.coeff(i), other.coeff(i));
            let mag = a.abs().max(b.abs()).max(scale * rel_tol);
            (a - b).abs() <= rel_tol * mag
        })
    }
}

impl fmt::Debug for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Polynomial{:?}", self.coeffs)
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (i, &c) in self.coeffs.iter().enumerate().rev() {
            if c == 0.0 && !(i == 0 && first) {
                continue;
            }
            if !first {
                write!(f, " {} ", if c < 0.0 { '-' } else { '+' })?;
            } else if c < 0.0 {
                write!(f, "-")?;
            }
            let a = c.abs();
            match i {
                0 => write!(f, "{a}")?,
                1 => write!(f, "{a} s")?,
                _ => write!(f, "{a} s^{i}")?,
            }
            first = false;
        }
        Ok(())
    }
}

impl Add for &Polynomial {
    type Output = Polynomial;
    fn add(self, rhs: &Polynomial) -> Polynomial {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        Polynomial::new((0..n).map(|i| self.coeff(i) + rhs.coeff(i)).collect::<Vec<_>>())
    }
}

impl Sub for &Polynomial {
    type Output = Polynomial;
    fn sub(self, rhs: &Polynomial) -> Polynomial {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        Polynomial::new((0..n).map(|i| self.coeff(i) - rhs.coeff(i)).collect::<Vec<_>>())
    }
}

impl Mul for &Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: &Polynomial) -> Polynomial {
        if self.is_zero() || rhs.is_zero() {
            return Polynomial::zero();
        }
        let mut out = vec![0.0; self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            for (j, &b) in rhs.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Polynomial::new(out)
    }
}

impl Neg for &Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        self.scale(-1.0)
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl $tr for Polynomial {
            type Output = Polynomial;
            fn $m(self, rhs: Polynomial) -> Polynomial {
                (&self).$m(&rhs)
            }
        }
        impl $tr<&Polynomial> for Polynomial {
            type Output = Polynomial;
            fn $m(self, rhs: &Polynomial) -> Polynomial {
                (&self).$m(rhs)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trims_trailing_zeros() {
        let p = Polynomial::new(vec![1.0, 2.0, 0.0, 0.0]);
        assert_eq!(p.degree(), 1);
        assert!(Polynomial::new(vec![0.0, 0.0]).is_zero());
        assert!(Polynomial::new(Vec::<f64>::new()).is_zero());
    }

    #[test]
    fn arithmetic() {
        let a = Polynomial::new(vec![1.0, 1.0]); // s + 1
        let b = Polynomial::new(vec![-1.0, 1.0]); // s - 1
        assert_eq!((&a * &b).coeffs(), &[-1.0, 0.0, 1.0]);
        assert_eq!((&a + &b).coeffs(), &[0.0, 2.0]);
        assert!((&a - &a).is_zero());
        assert_eq!(a.pow(2).coeffs(), &[1.0, 2.0, 1.0]);
        assert_eq!(a.derivative().coeffs(), &[1.0]);
    }

    #[test]
    fn jw_split_matches_direct_evaluation() {
        let p = Polynomial::new(vec![3.0, -2.0, 0.5, 1.5, -0.25]);
        let (a, b) = p.jw_parts();
        for w in [0.0, 0.3, 1.0, 7.0] {
            let direct = p.eval_complex(Complex64::new(0.0, w));
            let split = Complex64::new(a.eval(w * w), w * b.eval(w * w));
            assert!((direct - split).norm() < 1e-12 * (1.0 + direct.norm()));
        }
    }

    #[test]
    fn from_roots_roundtrip() {
        let r = [
            Complex64::new(-1.0, 2.0),
            Complex64::new(-1.0, -2.0),
            Complex64::new(-3.0, 0.0),
        ];
        let p = Polynomial::from_roots(2.0, &r);
        assert_eq!(p.coeffs(), &[30.0, 22.0, 10.0, 2.0]);
    }
}
