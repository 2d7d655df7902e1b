//! Synthesis, frequency-domain analysis and simulation of torque controllers
//! for series elastic actuators.
//!
//! The crate is organised bottom-up:
//!
//! - [`lti`]: polynomials, rational transfer functions, stability tests and
//!   bilinear discretization.
//! - [`plant`]: the two-mass SEA model and its open-loop transfers.
//! - [`controllers`]: gain synthesis for the five controller families and
//!   closed-loop assembly.
//! - [`shaping`]: disturbance observer and acceleration feedback wraps, with
//!   passivity-preserving gain bounds.
//! - [`passivity`]: positive-real tests.
//! - [`analysis`]: Bode data, bandwidth, resonance and noise spectra.
//! - [`sim`]: discrete-time test bench and identification protocols.

pub mod analysis;
pub mod controllers;
pub mod error;
pub mod lti;
pub mod passivity;
pub mod plant;
pub mod shaping;
pub mod sim;

pub use error::{Error, Result};
