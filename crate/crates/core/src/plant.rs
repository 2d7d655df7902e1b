//! Two-mass series elastic actuator model.
//!
//! ```text
//! j_m q'' = tau_m - b_m q' - k (q - theta),   tau_k = k (q - theta)
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::lti::{Polynomial, RationalTF};

/// Reflected motor inertia, reflected motor damping and spring stiffness.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeaParams {
    pub j_m: f64,
    pub b_m: f64,
    pub k: f64,
}

impl SeaParams {
    pub fn new(j_m: f64, b_m: f64, k: f64) -> Result<Self> {
        let p = Self { j_m, b_m, k };
        p.validate()?;
        Ok(p)
    }

    /// The identified actuator used throughout the analysis.
    pub fn nominal() -> Self {
        Self {
            j_m: 0.9581,
            b_m: 1.9162,
            k: 1535.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("j_m", self.j_m), ("b_m", self.b_m), ("k", self.k)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(name, format!("must be finite and positive, got {v}")));
            }
        }
        Ok(())
    }

    pub fn omega_n(&self) -> f64 {
        (self.k / self.j_m).sqrt()
    }

    pub fn zeta_n(&self) -> f64 {
        self.b_m / (2.0 * self.j_m * self.omega_n())
    }

    /// `j_m s^2 + b_m s + k`
    pub fn char_poly(&self) -> Polynomial {
        Polynomial::new(vec![self.k, self.b_m, self.j_m])
    }

    /// `j_m s + b_m`
    pub fn motor_admittance_den(&self) -> Polynomial {
        Polynomial::new(vec![self.b_m, self.j_m])
    }
}

/// Open-loop transfers: `tau_k = H tau_m - Z theta'`, `q' = R tau_m + Y theta'`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantTFs {
    pub h: RationalTF,
    pub z: RationalTF,
    pub r: RationalTF,
    pub y: RationalTF,
}

pub fn plant_tfs(p: &SeaParams) -> PlantTFs {
    let d = p.char_poly();
    let h = RationalTF::new(Polynomial::constant(p.k), d.clone()).unwrap();
    let z = RationalTF::new(p.motor_admittance_den().scale(p.k), d.clone()).unwrap();
    let r = RationalTF::new(Polynomial::s(), d).unwrap();
    PlantTFs {
        y: h.clone(),
        h,
        z,
        r,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nominal_natural_frequency_and_damping() {
        let p = SeaParams::nominal();
        let wn = (1535.0f64 / 0.9581).sqrt();
        assert!((p.omega_n() - wn).abs() < 1e-12);
        assert!((p.omega_n() - 40.03).abs() < 0.005);
        let zn = 1.9162 / (2.0 * 0.9581 * wn);
        assert!((p.zeta_n() - zn).abs() < 1e-15);
        assert!((p.zeta_n() - 0.0250).abs() < 5e-5);
    }

    #[test]
    fn dc_values() {
        let t = plant_tfs(&SeaParams::nominal());
        assert_eq!(t.h.dc_gain(), 1.0);
        assert!((t.z.dc_gain() - 1.9162).abs() < 1e-12);
    }

    #[test]
    fn r_is_s_over_k_times_h() {
        let p = SeaParams::nominal();
        let t = plant_tfs(&p);
        let sk = RationalTF::s().scale(1.0 / p.k);
        assert!((&sk * &t.h).approx_eq(&t.r, 1e-14));
        assert_eq!(t.y, t.h);
    }

    #[test]
    fn resonance_magnitude() {
        let p = SeaParams::nominal();
        let m = plant_tfs(&p).h.eval(p.omega_n()).norm();
        assert!((m - 1.0 / (2.0 * p.zeta_n())).abs() < 1e-9);
    }

    #[test]
    fn rejects_nonpositive() {
        assert!(SeaParams::new(0.0, 1.0, 1.0).is_err());
        assert!(SeaParams::new(1.0, -1.0, 1.0).is_err());
        assert!(SeaParams::new(1.0, 1.0, f64::NAN).is_err());
    }
}
