//! Unit conversions used at the I/O boundary.

use std::f64::consts::TAU;

/// Ordinary frequency [Hz] to angular frequency [rad/s].
#[inline]
pub fn hz_to_angular(f: f64) -> f64 {
    TAU * f
}

/// Angular frequency [rad/s] to ordinary frequency [Hz].
#[inline]
pub fn angular_to_hz(omega: f64) -> f64 {
    omega / TAU
}

/// Power in dBm to watts. `-inf` maps to exactly zero.
#[inline]
pub fn dbm_to_watts(p_dbm: f64) -> f64 {
    1e-3 * 10f64.powf(p_dbm / 10.0)
}

/// Power in watts to dBm. Zero maps to `-inf`.
#[inline]
pub fn watts_to_dbm(p_w: f64) -> f64 {
    10.0 * (p_w / 1e-3).log10()
}

/// Linear power ratio of a level given in dB.
#[inline]
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

#[inline]
pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_power() {
        assert_eq!(dbm_to_watts(f64::NEG_INFINITY), 0.0);
        assert_eq!(dbm_to_watts(0.0), 1e-3);
        assert_eq!(dbm_to_watts(30.0), 1.0);
    }

    proptest! {
        #[test]
        fn dbm_round_trip(p in -200.0f64..60.0) {
            let back = watts_to_dbm(dbm_to_watts(p));
            prop_assert!((back - p).abs() <= 1e-12 * p.abs().max(1.0));
        }

        #[test]
        fn hz_round_trip(f in 1.0f64..1e11) {
            let back = angular_to_hz(hz_to_angular(f));
            prop_assert!((back - f).abs() <= 1e-14 * f);
        }
    }
}
