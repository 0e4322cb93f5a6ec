//! Paul-trap motion and linear ion crystals.
//!
//! Mathieu parameters follow the convention `ü + [a + 2q cos(Ω t)](Ω/2)² u = 0`
//! per axis, so the lowest-order secular frequency is `(Ω/2)√(a + q²/2)`.

use ndarray::{Array1, Array2};
use serde::Serialize;

use crate::config::{Bound, ConfigErrors, KvFile, KvReader};
use crate::error::{invalid, Error, Result};
use crate::linalg;
use crate::units::{angular, ATOMIC_MASS_UNIT, ELEMENTARY_CHARGE, VACUUM_PERMITTIVITY};

/// Largest q for which the pseudopotential formula is trusted.
pub const PSEUDOPOTENTIAL_Q_LIMIT: f64 = 0.3;
/// Edge of the first stability region along a = 0.
pub const STABILITY_Q_LIMIT: f64 = 0.908;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Topology {
    /// Four RF rods with two DC endcaps.
    Linear,
    /// Ring electrode with two endcaps (hyperbolic Paul trap).
    Ring,
}

/// Electrode geometry and drive. Frequencies in Hz, lengths in metres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrapConfig {
    pub topology: Topology,
    pub rf_frequency_hz: f64,
    /// RF amplitude V (volts).
    pub rf_amplitude_v: f64,
    /// Static endcap voltage U (volts).
    pub dc_voltage_v: f64,
    /// Linear: rod-to-axis distance. Ring: ring radius.
    pub r0_m: f64,
    /// Linear: half the endcap spacing. Ring: endcap half-distance.
    pub z0_m: f64,
    pub kappa_r: f64,
    pub kappa_z: f64,
    pub mass_amu: f64,
}

impl TrapConfig {
    /// Linear trap at 21.6 MHz, 400 V, 1 V on the endcaps. κ_z = 0.35 puts
    /// the axial frequency near 2π·50 kHz.
    pub fn linear() -> Self {
        TrapConfig {
            topology: Topology::Linear,
            rf_frequency_hz: 21.6e6,
            rf_amplitude_v: 400.0,
            dc_voltage_v: 1.0,
            r0_m: 0.75e-3,
            z0_m: 2e-3,
            kappa_r: 1.0,
            kappa_z: 0.35,
            mass_amu: 172.0,
        }
    }

    /// Ring trap of 2 mm diameter, endcaps √2 mm apart, 9.5 MHz at 700 V.
    pub fn ring() -> Self {
        TrapConfig {
            topology: Topology::Ring,
            rf_frequency_hz: 9.5e6,
            rf_amplitude_v: 700.0,
            dc_voltage_v: 0.0,
            r0_m: 1e-3,
            z0_m: std::f64::consts::SQRT_2 / 2.0 * 1e-3,
            kappa_r: 1.0,
            kappa_z: 1.0,
            mass_amu: 172.0,
        }
    }

    pub fn defaults(topology: Topology) -> Self {
        match topology {
            Topology::Linear => Self::linear(),
            Topology::Ring => Self::ring(),
        }
    }

    /// Linear trap whose RF amplitude and endcap voltage are chosen to give
    /// the requested radial and axial frequencies (Hz) at `rf_frequency_hz`.
    pub fn tuned_linear(rf_frequency_hz: f64, radial_hz: f64, axial_hz: f64) -> Result<Self> {
        if !(radial_hz > 0.0 && axial_hz > 0.0 && rf_frequency_hz > 0.0) {
            return Err(invalid("frequency", "target and drive frequencies must be > 0"));
        }
        let mut cfg = Self::linear();
        cfg.rf_frequency_hz = rf_frequency_hz;
        let half = rf_frequency_hz / 2.0;
        let a_z = (axial_hz / half).powi(2);
        // radial: (ω_r / (Ω/2))² = a_r + q²/2 with a_r = −a_z/2
        let q = (2.0 * ((radial_hz / half).powi(2) + a_z / 2.0)).sqrt();
        let (unit_a, unit_q) = cfg.per_volt();
        cfg.dc_voltage_v = a_z / unit_a;
        cfg.rf_amplitude_v = q / unit_q;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("rf_frequency_hz", self.rf_frequency_hz),
            ("r0_m", self.r0_m),
            ("z0_m", self.z0_m),
            ("mass_amu", self.mass_amu),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(invalid(name, format!("must be > 0, got {v}")));
            }
        }
        for (name, v) in [("rf_amplitude_v", self.rf_amplitude_v), ("dc_voltage_v", self.dc_voltage_v)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(invalid(name, format!("must be >= 0, got {v}")));
            }
        }
        for (name, v) in [("kappa_r", self.kappa_r), ("kappa_z", self.kappa_z)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(invalid(name, format!("must lie in (0, 1], got {v}")));
            }
        }
        Ok(())
    }

    /// Reads `rf_frequency_hz`, `rf_amplitude_v`, `dc_voltage_v`, `r0_m`,
    /// `z0_m`, `kappa_r`, `kappa_z` and `mass_amu` over the topology's defaults.
    pub fn read(topology: Topology, reader: &mut KvReader<'_>) -> Self {
        let d = Self::defaults(topology);
        TrapConfig {
            topology,
            rf_frequency_hz: reader.number("rf_frequency_hz", d.rf_frequency_hz, Bound::Positive),
            rf_amplitude_v: reader.number("rf_amplitude_v", d.rf_amplitude_v, Bound::NonNegative),
            dc_voltage_v: reader.number("dc_voltage_v", d.dc_voltage_v, Bound::NonNegative),
            r0_m: reader.number("r0_m", d.r0_m, Bound::Positive),
            z0_m: reader.number("z0_m", d.z0_m, Bound::Positive),
            kappa_r: reader.number("kappa_r", d.kappa_r, Bound::AboveUpTo(0.0, 1.0)),
            kappa_z: reader.number("kappa_z", d.kappa_z, Bound::AboveUpTo(0.0, 1.0)),
            mass_amu: reader.number("mass_amu", d.mass_amu, Bound::Positive),
        }
    }

    pub fn from_kv(topology: Topology, file: &KvFile) -> std::result::Result<Self, ConfigErrors> {
        let mut reader = KvReader::new(file);
        let cfg = Self::read(topology, &mut reader);
        reader.finish(true)?;
        Ok(cfg)
    }

    pub fn mass_kg(&self) -> f64 {
        self.mass_amu * ATOMIC_MASS_UNIT
    }

    pub fn rf_angular(&self) -> f64 {
        angular(self.rf_frequency_hz)
    }

    /// (a_z per volt of U, q_r per volt of V). For the ring trap these are
    /// |a_z| and q_z.
    fn per_volt(&self) -> (f64, f64) {
        let m = self.mass_kg();
        let w2 = self.rf_angular().powi(2);
        let e = ELEMENTARY_CHARGE;
        match self.topology {
            Topology::Linear => (
                8.0 * e * self.kappa_z / (m * self.z0_m.powi(2) * w2),
                2.0 * e * self.kappa_r / (m * self.r0_m.powi(2) * w2),
            ),
            Topology::Ring => {
                let d2 = self.r0_m.powi(2) + 2.0 * self.z0_m.powi(2);
                (16.0 * e / (m * d2 * w2), 8.0 * e / (m * d2 * w2))
            }
        }
    }
}

/// Mathieu parameters and secular frequencies along x, y, z.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SecularResult {
    pub a: [f64; 3],
    pub q: [f64; 3],
    /// Secular angular frequencies; NaN along an unstable axis.
    pub omega: [f64; 3],
    pub stable: bool,
    /// Some |q| lies between the pseudopotential limit and the stability edge.
    pub accuracy_warning: bool,
}

impl SecularResult {
    /// Secular frequencies in Hz.
    pub fn frequencies_hz(&self) -> [f64; 3] {
        self.omega.map(|w| w / std::f64::consts::TAU)
    }
}

/// Dimensionless `a`, `q` per axis; frequencies left unset (NaN).
pub fn mathieu_parameters(cfg: &TrapConfig) -> Result<SecularResult> {
    cfg.validate()?;
    let (unit_a, unit_q) = cfg.per_volt();
    let (a, q) = match cfg.topology {
        Topology::Linear => {
            let a_z = unit_a * cfg.dc_voltage_v;
            let q_r = unit_q * cfg.rf_amplitude_v;
            ([-a_z / 2.0, -a_z / 2.0, a_z], [q_r, -q_r, 0.0])
        }
        Topology::Ring => {
            let a_z = -unit_a * cfg.dc_voltage_v;
            let q_z = unit_q * cfg.rf_amplitude_v;
            ([-a_z / 2.0, -a_z / 2.0, a_z], [-q_z / 2.0, -q_z / 2.0, q_z])
        }
    };
    Ok(SecularResult {
        a,
        q,
        omega: [f64::NAN; 3],
        stable: true,
        accuracy_warning: false,
    })
}

/// Fills in `(Ω/2)√(a + q²/2)` per axis with stability and accuracy flags.
pub fn secular_frequencies(res: &SecularResult, rf_angular: f64) -> SecularResult {
    let mut out = *res;
    out.stable = true;
    out.accuracy_warning = false;
    for i in 0..3 {
        let q = res.q[i].abs();
        let radicand = res.a[i] + res.q[i] * res.q[i] / 2.0;
        if radicand <= 0.0 || q > STABILITY_Q_LIMIT {
            out.stable = false;
            out.omega[i] = f64::NAN;
            continue;
        }
        if q > PSEUDOPOTENTIAL_Q_LIMIT {
            out.accuracy_warning = true;
        }
        out.omega[i] = 0.5 * rf_angular * radicand.sqrt();
    }
    out
}

/// Mathieu parameters and secular frequencies in one call.
pub fn analyze_trap(cfg: &TrapConfig) -> Result<SecularResult> {
    Ok(secular_frequencies(&mathieu_parameters(cfg)?, cfg.rf_angular()))
}

const FLOQUET_STEPS: usize = 4000;

/// Secular angular frequency from direct integration of the Mathieu
/// equation over one drive period.
///
/// In `τ = Ω t / 2` the equation reads `u'' + (a + 2q cos 2τ) u = 0` with
/// period π. Its monodromy matrix `M` (two independent solutions integrated
/// across one period) has `tr M = 2 cos(πβ)` and the slow motion oscillates
/// at `β Ω / 2`. Stable motion requires `|tr M| < 2`.
pub fn floquet_frequency(a: f64, q: f64, rf_angular: f64) -> Result<f64> {
    if !(rf_angular > 0.0) {
        return Err(invalid("rf_angular", "drive frequency must be > 0"));
    }
    let period = std::f64::consts::PI;
    let h = period / FLOQUET_STEPS as f64;
    let rhs = |tau: f64, y: [f64; 2]| [y[1], -(a + 2.0 * q * (2.0 * tau).cos()) * y[0]];
    let mut trace = 0.0;
    for (k, start) in [[1.0, 0.0], [0.0, 1.0]].into_iter().enumerate() {
        let mut y = start;
        for n in 0..FLOQUET_STEPS {
            let t = n as f64 * h;
            let k1 = rhs(t, y);
            let k2 = rhs(t + h / 2.0, [y[0] + h / 2.0 * k1[0], y[1] + h / 2.0 * k1[1]]);
            let k3 = rhs(t + h / 2.0, [y[0] + h / 2.0 * k2[0], y[1] + h / 2.0 * k2[1]]);
            let k4 = rhs(t + h, [y[0] + h * k3[0], y[1] + h * k3[1]]);
            for i in 0..2 {
                y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
        trace += y[k];
    }
    let half = trace / 2.0;
    if !(half.abs() < 1.0) {
        return Err(Error::Unstable { a, q });
    }
    let beta = half.acos() / period;
    Ok(beta * rf_angular / 2.0)
}

/// Equilibrium of a linear chain in units of the length scale ℓ.
#[derive(Debug, Clone, Serialize)]
pub struct IonCrystal {
    pub n: usize,
    /// Dimensionless positions, increasing.
    pub u: Vec<f64>,
    /// ℓ = (e²/(4πε₀ m ω_z²))^(1/3) in metres.
    pub length_scale: f64,
    /// ℓ·u in metres.
    pub positions: Vec<f64>,
    /// Smallest neighbour distance in metres (∞ for a single ion).
    pub min_spacing: f64,
}

/// Gradient of `Σ u²/2 + Σ_{i<j} 1/|uᵢ − uⱼ|`.
pub fn chain_gradient(u: &[f64]) -> Vec<f64> {
    (0..u.len())
        .map(|m| {
            let coulomb: f64 = (0..u.len())
                .filter(|&n| n != m)
                .map(|n| {
                    let d = u[m] - u[n];
                    -d.signum() / (d * d)
                })
                .sum();
            u[m] + coulomb
        })
        .collect()
}

fn chain_hessian(u: &[f64]) -> Array2<f64> {
    let n = u.len();
    let mut h = Array2::<f64>::eye(n);
    for m in 0..n {
        for k in 0..n {
            if k != m {
                let c = 2.0 / (u[m] - u[k]).abs().powi(3);
                h[[m, m]] += c;
                h[[m, k]] -= c;
            }
        }
    }
    h
}

/// Residual tolerance (max component of the force) for chain equilibria.
pub const CRYSTAL_TOLERANCE: f64 = 1e-10;
const NEWTON_ITERATIONS: usize = 200;

/// Dimensionless equilibrium positions of N ions in a harmonic well,
/// by Newton's method with step halving from an evenly spaced seed.
pub fn equilibrium_positions(n: usize) -> Result<Vec<f64>> {
    if !(1..=50).contains(&n) {
        return Err(invalid("n", format!("ion number must lie in 1..=50, got {n}")));
    }
    let spacing = 2.0 * (n as f64).powf(-0.56);
    let mut u: Vec<f64> = (0..n).map(|i| (i as f64 - (n - 1) as f64 / 2.0) * spacing).collect();
    let max_abs = |g: &[f64]| g.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let mut residual = max_abs(&chain_gradient(&u));
    for _ in 0..NEWTON_ITERATIONS {
        if residual < CRYSTAL_TOLERANCE {
            break;
        }
        let g = Array1::from(chain_gradient(&u));
        let step = linalg::solve(&chain_hessian(&u), &g);
        let mut lambda = 1.0;
        loop {
            let trial: Vec<f64> = u.iter().zip(&step).map(|(x, s)| x - lambda * s).collect();
            let ordered = trial.windows(2).all(|w| w[1] > w[0]);
            if ordered {
                let r = max_abs(&chain_gradient(&trial));
                if r < residual || lambda < 1e-6 {
                    u = trial;
                    residual = r;
                    break;
                }
            }
            lambda *= 0.5;
            if lambda < 1e-12 {
                return Err(Error::NoConvergence { n, residual });
            }
        }
    }
    if residual >= CRYSTAL_TOLERANCE {
        return Err(Error::NoConvergence { n, residual });
    }
    // remove the round-off drift of the centre of mass
    let mean = u.iter().sum::<f64>() / n as f64;
    u.iter_mut().for_each(|x| *x -= mean);
    Ok(u)
}

/// Length scale ℓ for an ion of `mass_amu` in an axial well `omega_z` (rad/s).
pub fn length_scale(omega_z: f64, mass_amu: f64) -> f64 {
    let e = ELEMENTARY_CHARGE;
    let m = mass_amu * ATOMIC_MASS_UNIT;
    (e * e / (4.0 * std::f64::consts::PI * VACUUM_PERMITTIVITY * m * omega_z * omega_z)).cbrt()
}

/// Physical geometry of an N-ion chain.
pub fn crystal_geometry(n: usize, omega_z: f64, mass_amu: f64) -> Result<IonCrystal> {
    if !(omega_z > 0.0) || !omega_z.is_finite() {
        return Err(invalid("omega_z", "axial frequency must be > 0"));
    }
    if !(mass_amu > 0.0) {
        return Err(invalid("mass_amu", "mass must be > 0"));
    }
    let u = equilibrium_positions(n)?;
    let ell = length_scale(omega_z, mass_amu);
    let positions: Vec<f64> = u.iter().map(|x| x * ell).collect();
    let min_spacing = positions
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min);
    Ok(IonCrystal {
        n,
        u,
        length_scale: ell,
        positions,
        min_spacing,
    })
}
