//! Physical constants (CODATA 2018) and unit helpers.

use std::f64::consts::PI;

pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
pub const PLANCK: f64 = 6.626_070_15e-34;
pub const HBAR: f64 = PLANCK / (2.0 * PI);
pub const BOHR_MAGNETON: f64 = 9.274_010_078_3e-24;
pub const ATOMIC_MASS_UNIT: f64 = 1.660_539_066_60e-27;
pub const VACUUM_PERMITTIVITY: f64 = 8.854_187_812_8e-12;
pub const BOLTZMANN: f64 = 1.380_649e-23;
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Converts a cyclic frequency in Hz to an angular frequency in rad/s.
#[inline]
pub fn angular(hz: f64) -> f64 {
    2.0 * PI * hz
}

/// Converts an angular frequency in rad/s to Hz.
#[inline]
pub fn cyclic(rad_per_s: f64) -> f64 {
    rad_per_s / (2.0 * PI)
}

/// Photon energy in eV for a vacuum wavelength in nm.
pub fn photon_energy_ev(wavelength_nm: f64) -> f64 {
    PLANCK * SPEED_OF_LIGHT / (wavelength_nm * 1e-9) / ELEMENTARY_CHARGE
}
