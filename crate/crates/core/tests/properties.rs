use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;

use sea_core::analysis::{find_bandwidth, noise_asd, FrequencyGrid, NoiseModel};
use sea_core::controllers::{
    assemble_closed_loop, synth_fsfm, synth_fsft, synthesize, CascadedPidGains, Family,
    MracState, Realization, TuningTarget,
};
use sea_core::lti::{discretize_bilinear, is_hurwitz_roots, is_hurwitz_routh, Polynomial, RationalTF};
use sea_core::passivity::{is_positive_real, is_positive_real_grid, DEFAULT_TOL};
use sea_core::plant::{plant_tfs, SeaParams};
use sea_core::shaping::{wrap_dob, DobConfig};

fn rel_close(a: Complex64, b: Complex64, tol: f64) -> bool {
    (a - b).norm() <= tol * a.norm().max(b.norm()).max(1e-300)
}

fn coeffs(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0..10.0f64, 1..=n)
}

/// Roots with real parts in `re` (negative for stable), conjugate pairs
/// for complex roots.
fn roots(max_deg: usize, re: std::ops::Range<f64>) -> impl Strategy<Value = Vec<Complex64>> {
    prop::collection::vec((re, 0.0..50.0f64, any::<bool>()), 1..=max_deg).prop_map(|v| {
        let mut out = Vec::new();
        for (r, i, complex) in v {
            if complex {
                out.push(Complex64::new(r, i));
                out.push(Complex64::new(r, -i));
            } else {
                out.push(Complex64::new(r, 0.0));
            }
        }
        out
    })
}

fn stable_tf() -> impl Strategy<Value = RationalTF> {
    (roots(3, -200.0..-0.1), roots(2, -100.0..100.0), 0.1..10.0f64).prop_filter_map(
        "proper",
        |(p, z, k)| {
            if z.len() > p.len() {
                return None;
            }
            RationalTF::new(Polynomial::from_roots(k, &z), Polynomial::from_roots(1.0, &p)).ok()
        },
    )
}

fn params() -> impl Strategy<Value = SeaParams> {
    (0.05..5.0f64, 0.05..10.0f64, 100.0..10_000.0f64)
        .prop_map(|(j, b, k)| SeaParams::new(j, b, k).unwrap())
}

fn target() -> impl Strategy<Value = TuningTarget> {
    (5.0..60.0f64, 0.5..1.0f64).prop_map(|(f, z)| TuningTarget::from_hz(f, z).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn eval_is_invariant_to_common_scaling(
        num in coeffs(5), den in coeffs(6), c in prop_oneof![0.001..1000.0f64, -1000.0..-0.001f64],
        w in 0.01..1000.0f64,
    ) {
        prop_assume!(den.iter().any(|&v| v != 0.0));
        let a = RationalTF::from_coeffs(&num, &den).unwrap();
        let sn: Vec<f64> = num.iter().map(|v| v * c).collect();
        let sd: Vec<f64> = den.iter().map(|v| v * c).collect();
        let b = RationalTF::from_coeffs(&sn, &sd).unwrap();
        let (va, vb) = (a.eval(w), b.eval(w));
        prop_assume!(va.is_finite());
        prop_assert!(rel_close(va, vb, 1e-12), "{va} vs {vb}");
    }

    #[test]
    fn feedback_matches_pointwise_formula(g in stable_tf(), h in stable_tf(), w in 0.01..1000.0f64) {
        let cl = RationalTF::feedback(&g, &h).unwrap();
        let (gv, hv) = (g.eval(w), h.eval(w));
        let want = gv / (1.0 + gv * hv);
        prop_assume!((1.0 + gv * hv).norm() > 1e-6);
        prop_assert!(rel_close(cl.eval(w), want, 1e-10), "{} vs {want}", cl.eval(w));
    }

    #[test]
    fn bilinear_keeps_stable_poles_inside_unit_circle(g in stable_tf(), fs in 100.0..10_000.0f64) {
        let chain = discretize_bilinear(&g, fs, None).unwrap();
        prop_assert!(chain.is_stable(), "{:?}", chain.poles());
    }

    #[test]
    fn plant_impedance_is_positive_real(p in params()) {
        let z = plant_tfs(&p).z;
        let r = is_positive_real(&z, DEFAULT_TOL).unwrap();
        prop_assert!(r.is_passive && r.is_stable);
    }

    #[test]
    fn torque_and_motor_state_feedback_coincide(p in params(), t in target()) {
        let r = Realization::ideal();
        let ft = assemble_closed_loop(&p, &synth_fsft(&p, &t, &r).unwrap()).unwrap();
        let fm = assemble_closed_loop(&p, &synth_fsfm(&p, &t, &r).unwrap()).unwrap();
        prop_assert!(ft.h_c.approx_eq(&fm.h_c, 1e-9));
    }

    #[test]
    fn closed_loop_transfers_share_denominator(p in params(), t in target(), fam in 0usize..5) {
        let family = Family::ALL[fam];
        let s = synthesize(
            family, &p, &t, &CascadedPidGains::nominal(), &MracState::converged(),
            &Realization::filtered(),
        ).unwrap();
        let cl = assemble_closed_loop(&p, &s).unwrap();
        for tf in [&cl.z_c, &cl.t_tau, &cl.t_qdot, &cl.t_acc] {
            prop_assert!(tf.den().approx_eq(cl.h_c.den(), 1e-12));
        }
        prop_assert!(cl.h_c.den().approx_eq(&s.char_poly(&p).monic(), 1e-12));
    }

    #[test]
    fn bandwidth_scales_with_time_scaling(zeta in 0.3..2.0f64, wn in 1.0..1000.0f64, c in 0.1..10.0f64) {
        let h = RationalTF::from_coeffs(&[wn * wn], &[wn * wn, 2.0 * zeta * wn, 1.0]).unwrap();
        // H(s / c) stretches the frequency axis by c
        let hc = RationalTF::new(
            h.num().scale_argument(1.0 / c),
            h.den().scale_argument(1.0 / c),
        ).unwrap();
        let (a, b) = (find_bandwidth(&h).unwrap(), find_bandwidth(&hc).unwrap());
        prop_assert!((b - c * a).abs() <= 1e-6 * c * a, "{b} vs {}", c * a);
    }

    #[test]
    fn noise_density_is_linear_in_sigma(p in params(), t in target(), c in 0.0..100.0f64) {
        let s = synth_fsft(&p, &t, &Realization::filtered()).unwrap();
        let cl = assemble_closed_loop(&p, &s).unwrap();
        let grid = FrequencyGrid::log_hz(0.1, 100.0, 10).unwrap();
        let nm = NoiseModel::nominal();
        let scaled = NoiseModel {
            sigma_tau: c * nm.sigma_tau,
            sigma_qdot: c * nm.sigma_qdot,
            sigma_acc: c * nm.sigma_acc,
        };
        let (a, b) = (noise_asd(&cl, &nm, &grid), noise_asd(&cl, &scaled, &grid));
        for (x, y) in a.total.iter().zip(&b.total).chain(a.tau.iter().zip(&b.tau)) {
            prop_assert!((c * x - y).abs() <= 1e-12 * (c * x).abs().max(1e-300));
        }
    }

    #[test]
    fn dob_passivity_verdicts_agree(t in target(), alpha in 0.0..1.0f64) {
        let p = SeaParams::nominal();
        let s = synth_fsft(&p, &t, &Realization::ideal()).unwrap();
        let cl = assemble_closed_loop(&p, &s).unwrap();
        let z = wrap_dob(&cl, &DobConfig { omega_q: 2.0 * PI * 10.0, alpha }).unwrap().z_c;
        let a = is_positive_real(&z, DEFAULT_TOL).unwrap();
        let b = is_positive_real_grid(&z, DEFAULT_TOL).unwrap();
        let scale = (0..400)
            .map(|i| z.eval(10f64.powf(-2.0 + i as f64 / 80.0)).norm())
            .fold(0.0, f64::max);
        prop_assume!(a.min_real_part.abs() > 1e-3 * scale);
        prop_assert_eq!(a.is_passive, b.is_passive);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn routh_agrees_with_roots(
        rs in prop::collection::vec((0.01..5.0f64, any::<bool>(), 0.0..5.0f64, any::<bool>()), 1..=3),
        lead in prop_oneof![0.1..10.0f64, -10.0..-0.1f64],
    ) {
        let mut roots = Vec::new();
        for (mag, unstable, im, pair) in rs {
            let re = if unstable { mag } else { -mag };
            if pair {
                roots.push(Complex64::new(re, im));
                roots.push(Complex64::new(re, -im));
            } else {
                roots.push(Complex64::new(re, 0.0));
            }
        }
        let truth = roots.iter().all(|r| r.re < 0.0);
        let p = Polynomial::from_roots(lead, &roots);
        prop_assert_eq!(is_hurwitz_routh(&p), truth);
        prop_assert_eq!(is_hurwitz_roots(&p), truth);
    }

    #[test]
    fn routh_agrees_with_roots_on_random_coefficients(c in prop::collection::vec(-10.0..10.0f64, 2..=7)) {
        let p = Polynomial::new(c);
        prop_assume!(p.degree() >= 1);
        let margin = p.roots().iter().map(|r| r.re.abs()).fold(f64::INFINITY, f64::min);
        prop_assume!(margin > 1e-6);
        prop_assert_eq!(is_hurwitz_routh(&p), is_hurwitz_roots(&p));
    }
}
