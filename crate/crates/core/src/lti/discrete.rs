//! Tustin discretization into cascaded second-order sections.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::tf::RationalTF;
use crate::error::{invalid, Error, Result};

/// `(b0 + b1 z^-1 + b2 z^-2) / (1 + a1 z^-1 + a2 z^-2)`
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub a1: f64,
    pub a2: f64,
}

impl Biquad {
    pub const IDENTITY: Biquad = Biquad {
        b0: 1.0,
        b1: 0.0,
        b2: 0.0,
        a1: 0.0,
        a2: 0.0,
    };

    pub fn response(&self, z: Complex64) -> Complex64 {
        let zi = z.inv();
        let zi2 = zi * zi;
        (self.b0 + self.b1 * zi + self.b2 * zi2) / (1.0 + self.a1 * zi + self.a2 * zi2)
    }

    /// Roots of `z^2 + a1 z + a2` (a first-order section reports one root).
    pub fn poles(&self) -> Vec<Complex64> {
        if self.a2 == 0.0 {
            if self.a1 == 0.0 {
                return Vec::new();
            }
            return vec![Complex64::new(-self.a1, 0.0)];
        }
        let disc = Complex64::new(self.a1 * self.a1 - 4.0 * self.a2, 0.0).sqrt();
        vec![(-self.a1 + disc) / 2.0, (-self.a1 - disc) / 2.0]
    }
}

/// Cascade of biquads at a fixed sample period.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteBiquadChain {
    pub sections: Vec<Biquad>,
    pub sample_period: f64,
}

impl DiscreteBiquadChain {
    pub fn response_z(&self, z: Complex64) -> Complex64 {
        self.sections
            .iter()
            .fold(Complex64::new(1.0, 0.0), |acc, s| acc * s.response(z))
    }

    /// Response at `omega` rad/s, i.e. at `z = exp(j omega T)`.
    pub fn response(&self, omega: f64) -> Complex64 {
        self.response_z(Complex64::from_polar(1.0, omega * self.sample_period))
    }

    pub fn poles(&self) -> Vec<Complex64> {
        self.sections.iter().flat_map(|s| s.poles()).collect()
    }

    pub fn is_stable(&self) -> bool {
        self.poles().iter().all(|p| p.norm() < 1.0)
    }

    pub fn filter(&self) -> ChainFilter {
        ChainFilter::new(self.clone())
    }
}

/// Running state of a [`DiscreteBiquadChain`] (transposed direct form II).
#[derive(Debug, Clone)]
pub struct ChainFilter {
    chain: DiscreteBiquadChain,
    state: Vec<[f64; 2]>,
}

impl ChainFilter {
    pub fn new(chain: DiscreteBiquadChain) -> Self {
        let n = chain.sections.len();
        Self {
            chain,
            state: vec![[0.0; 2]; n],
        }
    }

    pub fn chain(&self) -> &DiscreteBiquadChain {
        &self.chain
    }

    pub fn reset(&mut self) {
        self.state.iter_mut().for_each(|s| *s = [0.0; 2]);
    }

    pub fn step(&mut self, x: f64) -> f64 {
        let mut v = x;
        for (s, st) in self.chain.sections.iter().zip(self.state.iter_mut()) {
            let y = s.b0 * v + st[0];
            st[0] = s.b1 * v - s.a1 * y + st[1];
            st[1] = s.b2 * v - s.a2 * y;
            v = y;
        }
        v
    }
}

/// Tustin map `s <- c (z-1)/(z+1)` with `c = 2 fs`, or
/// `c = w_p / tan(w_p T / 2)` when prewarped at `w_p` rad/s.
pub fn discretize_bilinear(
    tf: &RationalTF,
    fs: f64,
    prewarp: Option<f64>,
) -> Result<DiscreteBiquadChain> {
    if !(fs > 0.0) {
        return Err(invalid("fs", "sample rate must be positive"));
    }
    if !tf.is_proper() {
        return Err(Error::Improper {
            num: tf.num().degree(),
            den: tf.den().degree(),
        });
    }
    let t = 1.0 / fs;
    let c = match prewarp {
        None => 2.0 * fs,
        Some(wp) => {
            if !(wp > 0.0 && wp * t < PI) {
                return Err(invalid("prewarp", "must lie in (0, pi fs) rad/s"));
            }
            wp / (wp * t / 2.0).tan()
        }
    };
    if tf.is_zero() {
        return Ok(DiscreteBiquadChain {
            sections: vec![Biquad {
                b0: 0.0,
                ..Biquad::IDENTITY
            }],
            sample_period: t,
        });
    }

    let zeros = tf.zeros();
    let poles = tf.poles();
    let mut gain = tf.num().leading();
    let cz = Complex64::new(c, 0.0);
    let mut g = Complex64::new(gain, 0.0);
    for z in &zeros {
        g *= cz - z;
    }
    for p in &poles {
        g /= cz - p;
    }
    gain = g.re;

    let map = |r: &Complex64| (cz + r) / (cz - r);
    let mut dz: Vec<Complex64> = zeros.iter().map(map).collect();
    dz.extend(std::iter::repeat(Complex64::new(-1.0, 0.0)).take(poles.len() - zeros.len()));
    let dp: Vec<Complex64> = poles.iter().map(map).collect();

    let zq = pair_up(dz);
    let pq = pair_up(dp);
    let n = zq.len().max(pq.len()).max(1);
    let mut sections = Vec::with_capacity(n);
    for i in 0..n {
        let (b1, b2) = zq.get(i).copied().unwrap_or((0.0, 0.0));
        let (a1, a2) = pq.get(i).copied().unwrap_or((0.0, 0.0));
        sections.push(Biquad {
            b0: 1.0,
            b1,
            b2,
            a1,
            a2,
        });
    }
    let s0 = &mut sections[0];
    s0.b0 *= gain;
    s0.b1 *= gain;
    s0.b2 *= gain;
    Ok(DiscreteBiquadChain {
        sections,
        sample_period: t,
    })
}

/// Groups roots into quadratic factors `1 + q1 z^-1 + q2 z^-2`, conjugate
/// pairs first, then real roots two at a time.
fn pair_up(mut roots: Vec<Complex64>) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    let mut reals = Vec::new();
    roots.sort_by(|a, b| (a.re, a.im).partial_cmp(&(b.re, b.im)).unwrap());
    for r in &roots {
        if r.im > 0.0 {
            out.push((-2.0 * r.re, r.norm_sqr()));
        } else if r.im == 0.0 {
            reals.push(r.re);
        }
    }
    for ch in reals.chunks(2) {
        match *ch {
            [a, b] => out.push((-(a + b), a * b)),
            [a] => out.push((-a, 0.0)),
            _ => unreachable!(),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn butter(fc: f64) -> RationalTF {
        let w = 2.0 * PI * fc;
        RationalTF::from_coeffs(&[w * w], &[w * w, 2f64.sqrt() * w, 1.0]).unwrap()
    }

    #[test]
    fn unity_is_pass_through() {
        let chain = discretize_bilinear(&RationalTF::one(), 1000.0, None).unwrap();
        assert_eq!(chain.sections, vec![Biquad::IDENTITY]);
    }

    #[test]
    fn prewarped_butterworth_corner() {
        let wc = 2.0 * PI * 160.0;
        let chain = discretize_bilinear(&butter(160.0), 1000.0, Some(wc)).unwrap();
        let mag_db = 20.0 * chain.response(wc).norm().log10();
        assert!((mag_db + 3.0103).abs() < 0.1, "{mag_db}");
        assert!(chain.is_stable());
    }

    #[test]
    fn integrator_is_trapezoid() {
        let i = RationalTF::from_coeffs(&[1.0], &[0.0, 1.0]).unwrap();
        let mut f = discretize_bilinear(&i, 1000.0, None).unwrap().filter();
        let mut y = 0.0;
        for _ in 0..50 {
            y = f.step(1.0);
        }
        assert!((y - 49.5 / 1000.0).abs() < 1e-12);
    }

    #[test]
    fn response_matches_difference_equation() {
        let g = RationalTF::from_coeffs(&[3.0, 1.0, 0.5], &[1000.0, 300.0, 30.0, 1.0]).unwrap();
        let chain = discretize_bilinear(&g, 200.0, None).unwrap();
        let mut f = chain.filter();
        let w = 2.0 * PI * 5.0;
        let t = chain.sample_period;
        let n = 4000;
        let mut acc = Complex64::new(0.0, 0.0);
        for k in 0..n {
            let y = f.step((w * k as f64 * t).sin());
            if k >= n / 2 {
                acc += y * Complex64::from_polar(1.0, -w * k as f64 * t);
            }
        }
        let est = acc * 2.0 / (n / 2) as f64 * Complex64::new(0.0, 1.0);
        let want = chain.response(w);
        assert!((est - want).norm() < 1e-3 * want.norm(), "{est} vs {want}");
    }

    #[test]
    fn improper_rejected() {
        assert!(discretize_bilinear(&RationalTF::s(), 1000.0, None).is_err());
    }
}
