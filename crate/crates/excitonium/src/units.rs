//! Unit conventions.
//!
//! Internally all energies are wavenumbers (cm⁻¹), all times are
//! femtoseconds, and ħ = 1. An energy E in cm⁻¹ corresponds to the angular
//! frequency ω = 2πc·E with c in cm/fs, so every propagator converts
//! wavenumbers to rad/fs before time integration. Temperatures are kelvin
//! and enter only through k_B·T expressed in cm⁻¹.

use crate::error::{Error, Result};

/// Speed of light in cm/fs.
pub const SPEED_OF_LIGHT_CM_PER_FS: f64 = 2.997_924_58e-5;

/// Conversion from cm⁻¹ to rad/fs: 2πc ≈ 1.88365×10⁻⁴.
pub const WAVENUMBER_TO_RAD_PER_FS: f64 =
    2.0 * std::f64::consts::PI * SPEED_OF_LIGHT_CM_PER_FS;

/// Boltzmann constant in cm⁻¹ per kelvin.
pub const BOLTZMANN_CM1_PER_K: f64 = 0.695_035;

/// Bundle of the fixed unit-conversion constants, mostly useful for
/// embedding the conventions into provenance output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitContext {
    /// rad/fs per cm⁻¹.
    pub wavenumber_to_rad_per_fs: f64,
    /// cm⁻¹ per kelvin.
    pub boltzmann_cm1_per_k: f64,
}

impl Default for UnitContext {
    fn default() -> Self {
        Self {
            wavenumber_to_rad_per_fs: WAVENUMBER_TO_RAD_PER_FS,
            boltzmann_cm1_per_k: BOLTZMANN_CM1_PER_K,
        }
    }
}

/// Convert an energy in cm⁻¹ to an angular frequency in rad/fs.
pub fn wavenumber_to_angular(energy_cm1: f64) -> f64 {
    energy_cm1 * WAVENUMBER_TO_RAD_PER_FS
}

/// Inverse of [`wavenumber_to_angular`].
pub fn angular_to_wavenumber(omega_rad_per_fs: f64) -> f64 {
    omega_rad_per_fs / WAVENUMBER_TO_RAD_PER_FS
}

/// Thermal energy k_B·T in cm⁻¹. Errors on nonpositive temperature.
pub fn thermal_energy(temperature_k: f64) -> Result<f64> {
    if !(temperature_k > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "temperature must be positive, got {temperature_k} K"
        )));
    }
    Ok(BOLTZMANN_CM1_PER_K * temperature_k)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wavenumber_conversion_reference_values() {
        assert_eq!(wavenumber_to_angular(0.0), 0.0);
        // 1 cm⁻¹ → 1.88365×10⁻⁴ rad/fs
        assert!((wavenumber_to_angular(1.0) - 1.88365e-4).abs() < 1e-9);
        // 5308.84 cm⁻¹ ≈ 1 rad/fs
        assert!((wavenumber_to_angular(5308.84) - 1.0).abs() < 1e-5);
    }

    #[test]
    fn wavenumber_round_trip() {
        for e in [1e-6, 0.1, 35.0, 420.0, 12210.0] {
            let back = angular_to_wavenumber(wavenumber_to_angular(e));
            assert!((back - e).abs() <= 1e-12 * e);
        }
    }

    #[test]
    fn thermal_energy_reference_values() {
        assert!((thermal_energy(300.0).unwrap() - 208.51).abs() < 0.01);
        assert!((thermal_energy(77.0).unwrap() - 53.52).abs() < 0.01);
    }

    #[test]
    fn thermal_energy_rejects_nonpositive() {
        assert!(thermal_energy(0.0).is_err());
        assert!(thermal_energy(-5.0).is_err());
        assert!(thermal_energy(f64::NAN).is_err());
    }
}
