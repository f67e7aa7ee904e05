//! Unit conventions.
//!
//! Internally all frequencies are angular, in rad/us; lengths are in um and
//! times in us. Conversions happen once, at the configuration boundary.

use std::f64::consts::PI;

pub const TWO_PI: f64 = 2.0 * PI;

/// Tabulated dispersion coefficients (C3 in GHz um^3, C6 in GHz um^6) times
/// this factor give the coefficient in rad/us um^n.
pub const TABULATED_GHZ_TO_RAD_PER_US: f64 = 1.0e3;

/// `value` given as 2pi x MHz, returned in rad/us.
pub fn from_2pi_mhz(value: f64) -> f64 {
    TWO_PI * value
}

/// `value` given as 2pi x kHz, returned in rad/us.
pub fn from_2pi_khz(value: f64) -> f64 {
    TWO_PI * value * 1.0e-3
}

/// rad/us back to 2pi x MHz.
pub fn to_2pi_mhz(omega: f64) -> f64 {
    omega / TWO_PI
}

/// rad/us back to 2pi x kHz.
pub fn to_2pi_khz(omega: f64) -> f64 {
    omega / TWO_PI * 1.0e3
}

/// Tabulated C3/C6 coefficient to rad/us um^n.
pub fn tabulated_coefficient(c_ghz: f64) -> f64 {
    c_ghz * TABULATED_GHZ_TO_RAD_PER_US
}

/// Rate per us to Hz.
pub fn per_us_to_hz(rate: f64) -> f64 {
    rate * 1.0e6
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips() {
        assert!((to_2pi_mhz(from_2pi_mhz(3.88)) - 3.88).abs() < 1e-14);
        assert!((to_2pi_khz(from_2pi_khz(10.0)) - 10.0).abs() < 1e-12);
        assert!((from_2pi_khz(1000.0) - from_2pi_mhz(1.0)).abs() < 1e-12);
    }
}
