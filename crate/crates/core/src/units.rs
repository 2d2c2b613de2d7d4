//! Physical constants (CODATA 2018, exact where defined) and unit helpers.

use std::f64::consts::PI;

pub const HBAR: f64 = 1.054_571_817e-34;
pub const K_B: f64 = 1.380_649e-23;
pub const TWO_PI: f64 = 2.0 * PI;

/// Angular frequency in rad/s from a frequency in kHz.
pub fn khz(f_khz: f64) -> f64 {
    TWO_PI * f_khz * 1e3
}

/// Mean thermal occupancy of a mode at angular frequency `omega` and temperature `t`.
pub fn bose_occupancy(omega: f64, t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    1.0 / ((HBAR * omega / (K_B * t)).exp_m1())
}
