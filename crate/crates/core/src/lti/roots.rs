//! Polynomial root finding (Aberth–Ehrlich with Newton polishing) and the
//! Routh–Hurwitz table.

use std::f64::consts::PI;

use num_complex::Complex64;

const MAX_ITER: usize = 500;

/// Roots of `sum c[i] s^i`. Exact zero roots are split off first so that
/// integrator poles come back as exact zeros.
pub(crate) fn roots(coeffs: &[f64]) -> Vec<Complex64> {
    let mut c: Vec<f64> = coeffs.to_vec();
    while c.len() > 1 && c[c.len() - 1] == 0.0 {
        c.pop();
    }
    let zeros = c.iter().take_while(|&&x| x == 0.0).count();
    if zeros == c.len() {
        return Vec::new();
    }
    let c = &c[zeros..];
    let mut out = vec![Complex64::new(0.0, 0.0); zeros];
    let n = c.len() - 1;
    match n {
        0 => {}
        1 => out.push(Complex64::new(-c[0] / c[1], 0.0)),
        _ => out.extend(aberth(c)),
    }
    out
}

fn horner(c: &[Complex64], z: Complex64) -> (Complex64, Complex64) {
    let mut p = Complex64::new(0.0, 0.0);
    let mut dp = Complex64::new(0.0, 0.0);
    for &a in c.iter().rev() {
        dp = dp * z + p;
        p = p * z + a;
    }
    (p, dp)
}

fn aberth(coeffs: &[f64]) -> Vec<Complex64> {
    let n = coeffs.len() - 1;
    let lead = coeffs[n];
    let c: Vec<Complex64> = coeffs.iter().map(|&a| Complex64::new(a / lead, 0.0)).collect();

    // Initial guesses on a circle whose radius is the geometric mean of the
    // root moduli, rotated off the real axis.
    let radius = (c[0].norm()).powf(1.0 / n as f64).max(1e-12);
    let upper = 1.0 + c.iter().take(n).fold(0.0_f64, |m, a| m.max(a.norm()));
    let radius = radius.min(upper);
    let mut z: Vec<Complex64> = (0..n)
        .map(|k| {
            let th = 2.0 * PI * k as f64 / n as f64 + 0.4;
            Complex64::from_polar(radius, th)
        })
        .collect();

    for _ in 0..MAX_ITER {
        let mut max_step: f64 = 0.0;
        for i in 0..n {
            let (p, dp) = horner(&c, z[i]);
            if p.norm() == 0.0 {
                continue;
            }
            let ratio = p / dp;
            let sum: Complex64 = (0..n)
                .filter(|&j| j != i)
                .map(|j| {
                    let d = z[i] - z[j];
                    if d.norm() == 0.0 {
                        Complex64::new(0.0, 0.0)
                    } else {
                        d.inv()
                    }
                })
                .sum();
            let denom = Complex64::new(1.0, 0.0) - ratio * sum;
            let step = if denom.norm() == 0.0 { ratio } else { ratio / denom };
            if step.is_finite() {
                z[i] -= step;
                max_step = max_step.max(step.norm() / z[i].norm().max(1e-300));
            }
        }
        if max_step < 1e-15 {
            break;
        }
    }

    // Newton polish against the original polynomial.
    for zi in z.iter_mut() {
        for _ in 0..3 {
            let (p, dp) = horner(&c, *zi);
            if dp.norm() == 0.0 {
                break;
            }
            let step = p / dp;
            if !step.is_finite() || step.norm() > 1e-6 * zi.norm().max(1e-12) {
                break;
            }
            *zi -= step;
        }
    }

    let mut z = cluster_multiple(z);
    symmetrize(&mut z);
    z
}

/// Multiple roots come back from the iteration as a small cloud of radius
/// ~ eps^(1/m); the mean of the cloud is accurate to ~ eps.
fn cluster_multiple(z: Vec<Complex64>) -> Vec<Complex64> {
    let n = z.len();
    let mut used = vec![false; n];
    let mut out = z.clone();
    for i in 0..n {
        if used[i] {
            continue;
        }
        let scale = z[i].norm().max(1e-9);
        let members: Vec<usize> = (i..n)
            .filter(|&j| !used[j] && (z[j] - z[i]).norm() <= 1e-6 * scale)
            .collect();
        if members.len() > 1 {
            let mean: Complex64 =
                members.iter().map(|&j| z[j]).sum::<Complex64>() / members.len() as f64;
            for &j in &members {
                out[j] = mean;
                used[j] = true;
            }
        }
    }
    out
}

/// Forces exact conjugate symmetry so rebuilt polynomials are real.
fn symmetrize(z: &mut [Complex64]) {
    let n = z.len();
    let mut done = vec![false; n];
    for i in 0..n {
        if done[i] {
            continue;
        }
        let scale = z[i].norm().max(1e-300);
        if z[i].im.abs() <= 1e-12 * scale {
            z[i].im = 0.0;
            done[i] = true;
            continue;
        }
        let target = z[i].conj();
        let partner = (0..n)
            .filter(|&j| j != i && !done[j])
            .min_by(|&a, &b| {
                (z[a] - target)
                    .norm()
                    .partial_cmp(&(z[b] - target).norm())
                    .unwrap()
            });
        if let Some(j) = partner {
            if (z[j] - target).norm() <= 1e-6 * scale {
                let re = 0.5 * (z[i].re + z[j].re);
                let im = 0.5 * (z[i].im.abs() + z[j].im.abs());
                let sign = if z[i].im >= 0.0 { 1.0 } else { -1.0 };
                z[i] = Complex64::new(re, sign * im);
                z[j] = Complex64::new(re, -sign * im);
                done[j] = true;
            }
        }
        done[i] = true;
    }
}

/// Routh–Hurwitz test for strict stability (all roots in the open left half
/// plane). A zero in the first column means roots on or right of the axis.
pub(crate) fn routh_hurwitz(coeffs: &[f64]) -> bool {
    let mut c: Vec<f64> = coeffs.to_vec();
    while c.len() > 1 && c[c.len() - 1] == 0.0 {
        c.pop();
    }
    let n = c.len() - 1;
    if n == 0 {
        return c[0] != 0.0;
    }
    // Descending order, leading coefficient positive.
    let sign = c[n].signum();
    let desc: Vec<f64> = c.iter().rev().map(|&a| a * sign).collect();
    if desc.iter().any(|&a| a <= 0.0) {
        return false;
    }
    let width = n / 2 + 1;
    let mut prev: Vec<f64> = (0..width).map(|i| desc.get(2 * i).copied().unwrap_or(0.0)).collect();
    let mut cur: Vec<f64> = (0..width)
        .map(|i| desc.get(2 * i + 1).copied().unwrap_or(0.0))
        .collect();
    for _ in 0..n - 1 {
        if cur[0] <= 0.0 {
            return false;
        }
        let next: Vec<f64> = (0..width)
            .map(|i| {
                let a = prev.get(i + 1).copied().unwrap_or(0.0);
                let b = cur.get(i + 1).copied().unwrap_or(0.0);
                (cur[0] * a - prev[0] * b) / cur[0]
            })
            .collect();
        prev = cur;
        cur = next;
    }
    cur[0] > 0.0
}
