//! Isotope-selective photoionization of neutral Yb and stochastic loading.
//!
//! The first ionization step is the 399 nm ¹S₀ ↔ ¹P₁ resonance, whose
//! isotope-resolved fluorescence spectrum is modelled as a sum of Voigt
//! lines. The second step (369 nm or a second 399 nm photon) only enters as
//! a rate calibrated to observed loading rates.

use std::collections::BTreeMap;

use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::Serialize;

use crate::config::{Bound, ConfigErrors, KvFile, KvReader};
use crate::error::{invalid, Error, Result};
use crate::units::{ATOMIC_MASS_UNIT, BOLTZMANN, ELEMENTARY_CHARGE, VACUUM_PERMITTIVITY};

/// Mass numbers accepted in isotope tables.
pub const MASS_NUMBERS: [u32; 7] = [168, 170, 171, 172, 173, 174, 176];

/// First ionization potential of neutral Yb (eV), a literature value.
pub const YB_IONIZATION_POTENTIAL_EV: f64 = 6.254;

const BUNDLED_TABLE: &str = include_str!("../../../data/yb_isotopes.conf");

/// Steady-state excited fraction of a driven two-level transition,
/// `(s/2)/(1 + s + (2δ/Γ)²)`.
pub fn excited_fraction(saturation: f64, detuning: f64, linewidth: f64) -> f64 {
    let x = 2.0 * detuning / linewidth;
    0.5 * saturation / (1.0 + saturation + x * x)
}

/// One resolved line: a position relative to the reference isotope (Hz)
/// and its share of the isotope's strength.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LineComponent {
    pub shift_hz: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Isotope {
    pub mass_number: u32,
    pub abundance: f64,
    pub components: Vec<LineComponent>,
}

/// Line data for the isotope-resolved spectrum.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IsotopeTable {
    pub isotopes: Vec<Isotope>,
    /// Natural (Lorentzian) FWHM of the ¹P₁ line, Hz.
    pub linewidth_hz: f64,
    /// Gaussian FWHM from residual Doppler broadening, Hz (0 = none).
    pub doppler_fwhm_hz: f64,
    /// Typical 399 nm beam intensity (W/cm²). Informational only.
    pub intensity_w_per_cm2: Option<f64>,
}

/// Gaussian FWHM (Hz) of the transverse Doppler profile for a beam of
/// `mass_amu` atoms from an oven at `temperature_k`, collimated to a half
/// angle `divergence_rad` and crossing the laser at 90°.
pub fn transverse_doppler_fwhm(temperature_k: f64, mass_amu: f64, divergence_rad: f64, wavelength_nm: f64) -> f64 {
    let v_mp = (2.0 * BOLTZMANN * temperature_k / (mass_amu * ATOMIC_MASS_UNIT)).sqrt();
    2.0 * v_mp * divergence_rad.sin() / (wavelength_nm * 1e-9)
}

impl IsotopeTable {
    pub fn validate(&self) -> Result<()> {
        if !(self.linewidth_hz > 0.0) {
            return Err(invalid("linewidth_hz", "must be > 0"));
        }
        if !(self.doppler_fwhm_hz >= 0.0) {
            return Err(invalid("doppler_fwhm_hz", "must be >= 0"));
        }
        if self.isotopes.iter().any(|i| !(i.abundance >= 0.0)) {
            return Err(invalid("abundance", "abundances must be >= 0"));
        }
        if self.isotopes.iter().map(|i| i.abundance).sum::<f64>() > 1.0 + 1e-9 {
            return Err(invalid("abundance", "abundances sum to more than 1"));
        }
        Ok(())
    }

    /// Table shipped in `data/yb_isotopes.conf`.
    pub fn bundled() -> Self {
        Self::from_kv(&Self::bundled_kv()).expect("bundled isotope table is valid")
    }

    /// Raw key-value contents of the bundled table.
    pub fn bundled_kv() -> KvFile {
        KvFile::parse(BUNDLED_TABLE).expect("bundled isotope table parses")
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> std::result::Result<Self, ConfigErrors> {
        Self::from_kv(&KvFile::load(path)?)
    }

    /// Parses `abundance_A`, `shift_hz_A`, hyperfine components
    /// `hf_shift_hz_A_k` / `hf_weight_A_k`, `linewidth_hz`, and either
    /// `doppler_fwhm_hz` or (`oven_temperature_k`, `divergence_rad`,
    /// `wavelength_nm`).
    pub fn from_kv(file: &KvFile) -> std::result::Result<Self, ConfigErrors> {
        let mut r = KvReader::new(file);
        let table = Self::read(&mut r);
        r.finish(true)?;
        Ok(table)
    }

    pub fn read(r: &mut KvReader<'_>) -> Self {
        let linewidth_hz = r.number("linewidth_hz", 29.1e6, Bound::Positive);
        let wavelength_nm = r.number("wavelength_nm", 398.911, Bound::Positive);
        let temperature = r.number("oven_temperature_k", 700.0, Bound::Positive);
        let divergence = r.number("divergence_rad", 0.01, Bound::Within(0.0, 1.5));
        let explicit_doppler = r.optional("doppler_fwhm_hz", Bound::NonNegative);
        let intensity_w_per_cm2 = r.optional("intensity_w_per_cm2", Bound::Positive);

        let mut isotopes = Vec::new();
        let mut hf: BTreeMap<(u32, usize), (Option<f64>, Option<f64>)> = BTreeMap::new();
        let keys: Vec<String> = r_keys(r);
        for key in &keys {
            if let Some(rest) = key.strip_prefix("hf_shift_hz_") {
                match parse_component(rest) {
                    Some(id) => hf.entry(id).or_default().0 = r.optional(key, Bound::Any),
                    None => r.error(key.clone(), "expected hf_shift_hz_<mass>_<index>"),
                }
            } else if let Some(rest) = key.strip_prefix("hf_weight_") {
                match parse_component(rest) {
                    Some(id) => hf.entry(id).or_default().1 = r.optional(key, Bound::NonNegative),
                    None => r.error(key.clone(), "expected hf_weight_<mass>_<index>"),
                }
            } else if let Some(rest) = key.strip_prefix("abundance_").or_else(|| key.strip_prefix("shift_hz_")) {
                if parse_mass(rest).is_none() {
                    r.error(key.clone(), format!("unknown mass number; expected one of {MASS_NUMBERS:?}"));
                }
            }
        }
        for a in MASS_NUMBERS {
            let Some(abundance) = r.optional(&format!("abundance_{a}"), Bound::Within(0.0, 1.0)) else {
                continue;
            };
            let comps: Vec<LineComponent> = hf
                .iter()
                .filter(|((m, _), _)| *m == a)
                .filter_map(|((_, k), (s, w))| match (s, w) {
                    (Some(s), Some(w)) => Some(LineComponent { shift_hz: *s, weight: *w }),
                    _ => {
                        r.error(format!("hf_shift_hz_{a}_{k}"), "component needs both shift and weight");
                        None
                    }
                })
                .collect();
            let shift = r.optional(&format!("shift_hz_{a}"), Bound::Any);
            let components = if !comps.is_empty() {
                comps
            } else if let Some(s) = shift {
                vec![LineComponent { shift_hz: s, weight: 1.0 }]
            } else {
                r.error(format!("shift_hz_{a}"), "missing line position for isotope with an abundance");
                continue;
            };
            isotopes.push(Isotope {
                mass_number: a,
                abundance,
                components,
            });
        }
        if isotopes.iter().map(|i| i.abundance).sum::<f64>() > 1.0 + 1e-9 {
            r.error("abundance", "abundances sum to more than 1");
        }
        let doppler_fwhm_hz =
            explicit_doppler.unwrap_or_else(|| transverse_doppler_fwhm(temperature, 174.0, divergence, wavelength_nm));
        IsotopeTable {
            isotopes,
            linewidth_hz,
            doppler_fwhm_hz,
            intensity_w_per_cm2,
        }
    }

    /// Relative fluorescence at each detuning (Hz from the reference line):
    /// Σ abundance × weight × Voigt(ν − shift), in units of 1/Hz.
    pub fn spectrum(&self, detunings_hz: &[f64]) -> Vec<f64> {
        let gamma_hwhm = self.linewidth_hz / 2.0;
        let sigma = self.doppler_fwhm_hz / (2.0 * (2.0 * std::f64::consts::LN_2).sqrt());
        detunings_hz
            .iter()
            .map(|&nu| {
                self.isotopes
                    .iter()
                    .flat_map(|iso| iso.components.iter().map(move |c| (iso.abundance * c.weight, c.shift_hz)))
                    .map(|(w, shift)| w * voigt(nu - shift, sigma, gamma_hwhm))
                    .sum()
            })
            .collect()
    }
}

fn r_keys(r: &KvReader<'_>) -> Vec<String> {
    r.file_keys()
}

fn parse_mass(s: &str) -> Option<u32> {
    s.parse().ok().filter(|m| MASS_NUMBERS.contains(m))
}

fn parse_component(s: &str) -> Option<(u32, usize)> {
    let (m, k) = s.split_once('_')?;
    Some((parse_mass(m)?, k.parse().ok()?))
}

/// Voigt profile: Gaussian of standard deviation `sigma` convolved with a
/// Lorentzian of half width `gamma`, normalized to unit area.
pub fn voigt(x: f64, sigma: f64, gamma: f64) -> f64 {
    if sigma == 0.0 {
        return gamma / (std::f64::consts::PI * (x * x + gamma * gamma));
    }
    let z = C64::new(x, gamma) / (sigma * std::f64::consts::SQRT_2);
    faddeeva(z).re / (sigma * (2.0 * std::f64::consts::PI).sqrt())
}

const WEIDEMAN_N: usize = 32;

fn weideman_coefficients() -> &'static [f64; WEIDEMAN_N] {
    static COEFFS: std::sync::OnceLock<[f64; WEIDEMAN_N]> = std::sync::OnceLock::new();
    COEFFS.get_or_init(|| {
        let n = WEIDEMAN_N;
        let m = 2 * n;
        let m2 = 2 * m;
        let l = (n as f64 / std::f64::consts::SQRT_2).sqrt();
        // samples f(t_k), k = -M+1..M-1, padded with a leading zero
        let mut f = vec![0.0; m2];
        for (idx, k) in (-(m as i64) + 1..m as i64).enumerate() {
            let theta = k as f64 * std::f64::consts::PI / m as f64;
            let t = l * (theta / 2.0).tan();
            f[idx + 1] = (-t * t).exp() * (l * l + t * t);
        }
        // a = Re(DFT(fftshift(f))) / 2M
        let shifted: Vec<f64> = (0..m2).map(|i| f[(i + m) % m2]).collect();
        let mut a = [0.0; WEIDEMAN_N];
        for (j, slot) in a.iter_mut().enumerate() {
            let freq = n - j; // reversed order of a[1..=N]
            let re: f64 = shifted
                .iter()
                .enumerate()
                .map(|(i, v)| v * (2.0 * std::f64::consts::PI * (freq * i) as f64 / m2 as f64).cos())
                .sum();
            *slot = re / m2 as f64;
        }
        a
    })
}

/// Faddeeva function `w(z) = e^{−z²} erfc(−iz)` for Im z ≥ 0 by Weideman's
/// rational expansion with 32 terms.
pub fn faddeeva(z: C64) -> C64 {
    let l = (WEIDEMAN_N as f64 / std::f64::consts::SQRT_2).sqrt();
    let iz = C64::new(-z.im, z.re);
    let big_z = (l + iz) / (l - iz);
    let p = weideman_coefficients()
        .iter()
        .fold(C64::new(0.0, 0.0), |acc, &c| acc * big_z + c);
    2.0 * p / ((l - iz) * (l - iz)) + 1.0 / (std::f64::consts::PI.sqrt() * (l - iz))
}

/// Stochastic loading with a shutter that closes once `target` ions are in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LoadingModel {
    /// Ion arrival rate λ (s⁻¹) while the ionization laser is unblocked.
    pub rate: f64,
    pub target: u32,
    /// Delay between the target-reaching arrival and the beam being blocked (s).
    pub latency: f64,
    pub seed: u64,
}

impl Default for LoadingModel {
    fn default() -> Self {
        LoadingModel {
            rate: 10.0,
            target: 5,
            latency: 0.02,
            seed: 0,
        }
    }
}

impl LoadingModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.rate > 0.0) || !self.rate.is_finite() {
            return Err(invalid("rate", "arrival rate must be > 0"));
        }
        if self.target < 1 {
            return Err(invalid("target", "target ion number must be >= 1"));
        }
        if !(self.latency >= 0.0) || !self.latency.is_finite() {
            return Err(invalid("latency", "latency must be >= 0"));
        }
        Ok(())
    }
}

/// Outcome of one loading run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LoadingTimeline {
    /// Arrival times (s), increasing.
    pub events: Vec<f64>,
    /// Time the target count was reached.
    pub target_time: f64,
    /// Time the beam is actually blocked.
    pub shutter_time: f64,
    pub final_count: u32,
    /// Ions beyond the target that arrived during the latency window.
    pub overshoot: u32,
}

impl LoadingTimeline {
    /// Ions trapped at time `t`.
    pub fn count_at(&self, t: f64) -> u32 {
        self.events.partition_point(|&e| e <= t) as u32
    }
}

/// Poisson arrivals at rate λ until the target is reached, plus whatever
/// lands before the shutter closes `latency` later.
pub fn loading_timeline(model: &LoadingModel) -> Result<LoadingTimeline> {
    model.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(model.seed);
    let gap = Exp::new(model.rate).map_err(|e| invalid("rate", e.to_string()))?;
    let mut events = Vec::with_capacity(model.target as usize + 4);
    let mut t = 0.0;
    while events.len() < model.target as usize {
        t += gap.sample(&mut rng);
        events.push(t);
    }
    let target_time = t;
    let shutter_time = target_time + model.latency;
    loop {
        t += gap.sample(&mut rng);
        if t > shutter_time {
            break;
        }
        events.push(t);
    }
    let final_count = events.len() as u32;
    Ok(LoadingTimeline {
        events,
        target_time,
        shutter_time,
        final_count,
        overshoot: final_count - model.target,
    })
}

/// Loading rates per unit neutral flux for each ionization method.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateSettings {
    /// Relative neutral atom flux.
    pub neutral_flux: f64,
    /// Electron-impact ionization rate per unit flux (ions/s).
    pub electron_impact: f64,
    /// 399 nm + 369 nm photoionization rate per unit flux.
    pub two_color: f64,
    /// 399 nm + 399 nm photoionization rate per unit flux.
    pub one_color: f64,
}

/// Electron impact loading rate quoted for the trap (about one ion per 150 s).
pub const REFERENCE_ELECTRON_IMPACT_RATE: f64 = 1.0 / 150.0;
/// Photoionization loading rate quoted for the trap.
pub const REFERENCE_PHOTOIONIZATION_RATE: f64 = 10.0;

impl Default for RateSettings {
    fn default() -> Self {
        RateSettings {
            neutral_flux: 1.0,
            electron_impact: 0.0067,
            two_color: REFERENCE_PHOTOIONIZATION_RATE,
            one_color: 1.0,
        }
    }
}

/// One method's rate and its enhancement over electron impact.
#[derive(Debug, Clone, Serialize)]
pub struct RateRow {
    pub method: &'static str,
    pub rate: f64,
    pub ratio_to_electron_impact: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RateComparison {
    pub rows: Vec<RateRow>,
    pub reference_electron_impact: f64,
    pub reference_photoionization: f64,
}

/// Absolute rates at the configured flux and their ratios to electron
/// impact. Fails unless 2-color / e-impact lies in [10², 10⁴] and 1-color /
/// e-impact in [10¹, 10³].
pub fn rate_comparison(settings: &RateSettings) -> Result<RateComparison> {
    for (name, v) in [
        ("neutral_flux", settings.neutral_flux),
        ("electron_impact", settings.electron_impact),
        ("two_color", settings.two_color),
        ("one_color", settings.one_color),
    ] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(invalid(name, format!("must be > 0, got {v}")));
        }
    }
    let flux = settings.neutral_flux;
    let e = settings.electron_impact * flux;
    let rows: Vec<RateRow> = [
        ("electron_impact", settings.electron_impact),
        ("two_color", settings.two_color),
        ("one_color", settings.one_color),
    ]
    .into_iter()
    .map(|(method, per_flux)| RateRow {
        method,
        rate: per_flux * flux,
        ratio_to_electron_impact: per_flux * flux / e,
    })
    .collect();
    let checks = [("two_color", 1e2, 1e4), ("one_color", 1e1, 1e3)];
    for (method, lo, hi) in checks {
        let row = rows.iter().find(|r| r.method == method).expect("row present");
        if !(lo..=hi).contains(&row.ratio_to_electron_impact) {
            return Err(Error::RatioOutOfRange(format!(
                "{method} / electron_impact = {:.4e}, expected within [{lo:e}, {hi:e}]",
                row.ratio_to_electron_impact
            )));
        }
    }
    Ok(RateComparison {
        rows,
        reference_electron_impact: REFERENCE_ELECTRON_IMPACT_RATE,
        reference_photoionization: REFERENCE_PHOTOIONIZATION_RATE,
    })
}

/// Whether two photons of `photon_ev` can ionize an atom with ionization
/// potential `ip_ev` in a static field `field_v_per_m`, given the saddle-point
/// lowering `ΔE = √(e³E/(πε₀))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FieldThreshold {
    pub allowed: bool,
    /// Threshold lowering at the given field (eV).
    pub lowering_ev: f64,
    /// Smallest field (V/m) at which the two photons suffice; 0 if they
    /// already exceed the ionization potential.
    pub required_field: f64,
}

pub fn field_threshold_1color(ip_ev: f64, photon_ev: f64, field_v_per_m: f64) -> Result<FieldThreshold> {
    if !(ip_ev > 0.0) || !(photon_ev > 0.0) || !(field_v_per_m >= 0.0) {
        return Err(invalid("energies", "ionization potential and photon energy must be > 0, field >= 0"));
    }
    // in eV: ΔE = √(e E / (π ε₀))
    let lowering_ev = (ELEMENTARY_CHARGE * field_v_per_m / (std::f64::consts::PI * VACUUM_PERMITTIVITY)).sqrt();
    let deficit = ip_ev - 2.0 * photon_ev;
    let required_field = if deficit <= 0.0 {
        0.0
    } else {
        std::f64::consts::PI * VACUUM_PERMITTIVITY * deficit * deficit / ELEMENTARY_CHARGE
    };
    Ok(FieldThreshold {
        allowed: 2.0 * photon_ev >= ip_ev - lowering_ev,
        lowering_ev,
        required_field,
    })
}
