//! State preparation by optical pumping, fluorescence transients, and
//! photon-counting state detection.
//!
//! The qubit is |0⟩ = S₁/₂ F=0 and |1⟩ = S₁/₂ F=1 mF=0. A single 369 nm light
//! field is used for everything: tuned to S F=1 ↔ P F=0 it makes |1⟩ bright
//! and slowly pumps it dark through off-resonant P F=1 excitation; tuned to
//! S F=1 ↔ P F=1 it pumps into |0⟩ within a few scattering events.

use ndarray::Array2;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::Serialize;

use crate::atomic::{build_scheme, HyperfineConfig, LevelScheme, Manifold, Sublevel};
use crate::error::{invalid, Result};
use crate::master::{
    hamiltonian, liouvillian, scattering_rate, steady_state, DensityMatrix, DriveField, Liouvillian,
    OpticalReference, SteadyState,
};
use crate::units::angular;

/// Outcome of a preparation simulation.
#[derive(Debug, Clone, Serialize)]
pub struct PrepResult {
    /// Stationary population of S₁/₂ F=0.
    pub efficiency: f64,
    /// Population of S₁/₂ F=0 in the initial state.
    pub initial_efficiency: f64,
    /// Time (s) for the F=0 population to cover 99 % of the way from its
    /// initial to its stationary value; infinite when nothing is pumped.
    pub time_to_asymptote: f64,
    /// The generator's null space was degenerate (some sublevel decoupled).
    pub degenerate: bool,
}

/// Which light field is used for pumping.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PrepScheme {
    /// Light on S F=1 ↔ P F=0; pumping via the detuned P F=1 level.
    OffResonant,
    /// Light on S F=1 ↔ P F=1.
    Resonant,
}

impl PrepScheme {
    pub fn reference(self) -> OpticalReference {
        match self {
            PrepScheme::OffResonant => OpticalReference::F1ToF0,
            PrepScheme::Resonant => OpticalReference::F1ToF1,
        }
    }
}

/// Pumping with light referenced to S F=1 ↔ P F=0. `rabi` and `detuning` in
/// rad/s, `alpha` in radians. Starts from an equal F=1 mixture.
pub fn prep_offresonant(rabi: f64, detuning: f64, alpha: f64, cfg: &HyperfineConfig) -> Result<PrepResult> {
    let drive = DriveField::optical(rabi, detuning, alpha, OpticalReference::F1ToF0);
    prepare(&DensityMatrix::ground_f1_mixture(), drive, cfg)
}

/// Pumping with light resonant on S F=1 ↔ P F=1.
pub fn prep_resonant(rabi: f64, alpha: f64, cfg: &HyperfineConfig) -> Result<PrepResult> {
    let drive = DriveField::optical(rabi, 0.0, alpha, OpticalReference::F1ToF1);
    prepare(&DensityMatrix::ground_f1_mixture(), drive, cfg)
}

/// Generic preparation run from `initial` under one optical `drive`.
pub fn prepare(initial: &DensityMatrix, drive: DriveField, cfg: &HyperfineConfig) -> Result<PrepResult> {
    let scheme = build_scheme(cfg)?;
    let l = liouvillian(&hamiltonian(&scheme, &[drive])?, &scheme);
    let ss = steady_state(&l, Some(initial))?;
    let p0 = initial.population(Sublevel::S0);
    let p_inf = ss.rho.population(Sublevel::S0);
    let time_to_asymptote = time_to_fraction(&l, initial, p0, p_inf, 0.99)?;
    Ok(PrepResult {
        efficiency: p_inf.clamp(0.0, 1.0),
        initial_efficiency: p0,
        time_to_asymptote,
        degenerate: ss.degenerate,
    })
}

/// Stationary F=0 population only (no transient analysis).
pub fn prep_efficiency(scheme: PrepScheme, rabi: f64, detuning: f64, alpha: f64, cfg: &HyperfineConfig) -> Result<f64> {
    let scheme_ = build_scheme(cfg)?;
    let drive = DriveField::optical(rabi, detuning, alpha, scheme.reference());
    let l = liouvillian(&hamiltonian(&scheme_, &[drive])?, &scheme_);
    let ss = steady_state(&l, Some(&DensityMatrix::ground_f1_mixture()))?;
    Ok(ss.rho.population(Sublevel::S0).clamp(0.0, 1.0))
}

fn time_to_fraction(l: &Liouvillian, initial: &DensityMatrix, p0: f64, p_inf: f64, fraction: f64) -> Result<f64> {
    let span = p_inf - p0;
    if span.abs() < 1e-12 {
        return Ok(f64::INFINITY);
    }
    let reached = |t: f64| -> Result<bool> {
        let rho = l.evolve_at(initial, &[t], None)?;
        Ok((rho.states[0].population(Sublevel::S0) - p0) / span >= fraction)
    };
    let unit = 1.0 / l.rate_unit();
    let mut lo = 0.0;
    let mut hi = unit;
    while !reached(hi)? {
        lo = hi;
        hi *= 2.0;
        if hi > 1e14 * unit {
            return Ok(f64::INFINITY);
        }
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if reached(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo < 1e-6 * hi {
            break;
        }
    }
    Ok(hi)
}

/// One point of a preparation-efficiency sweep.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SweepRow {
    pub alpha_deg: f64,
    pub omega_over_gamma: f64,
    pub efficiency: f64,
}

/// Stationary efficiency over a grid of polarization angles and Rabi
/// frequencies (in units of Γ), evaluated in parallel.
pub fn efficiency_sweep(
    scheme: PrepScheme,
    alphas_deg: &[f64],
    omegas_over_gamma: &[f64],
    detuning_over_gamma: f64,
    cfg: &HyperfineConfig,
) -> Result<Vec<SweepRow>> {
    let gamma = cfg.gamma();
    let grid: Vec<(f64, f64)> = omegas_over_gamma
        .iter()
        .flat_map(|&w| alphas_deg.iter().map(move |&a| (w, a)))
        .collect();
    grid.par_iter()
        .map(|&(w, a)| {
            let eff = prep_efficiency(scheme, w * gamma, detuning_over_gamma * gamma, a.to_radians(), cfg)?;
            Ok(SweepRow {
                alpha_deg: a,
                omega_over_gamma: w,
                efficiency: eff,
            })
        })
        .collect()
}

/// Default light field for cooling and detection: Ω = Γ, on resonance with
/// S F=1 ↔ P F=0, polarized at 45° to B.
pub fn default_detection_drive(cfg: &HyperfineConfig) -> DriveField {
    DriveField::optical(cfg.gamma(), 0.0, 45f64.to_radians(), OpticalReference::F1ToF0)
}

/// Default microwave that keeps the ion out of F=0 while cooling:
/// Ω = 2π·50 kHz, resonant.
pub fn default_microwave() -> DriveField {
    DriveField::microwave(angular(50e3), 0.0)
}

/// Stationary state with light and microwave on, i.e. the state the ion is
/// in at the moment the microwave is switched off.
pub fn cooling_state(optical: DriveField, microwave: DriveField, cfg: &HyperfineConfig) -> Result<DensityMatrix> {
    let scheme = build_scheme(cfg)?;
    let l = liouvillian(&hamiltonian(&scheme, &[optical, microwave])?, &scheme);
    Ok(steady_state(&l, Some(&DensityMatrix::ground_f1_mixture()))?.rho)
}

/// Fluorescence time series.
#[derive(Debug, Clone, Serialize)]
pub struct Transient {
    /// Seconds.
    pub times: Vec<f64>,
    /// Scattering rate (photons/s) at each time.
    pub rates: Vec<f64>,
    /// Γ × stationary P population of the same drive.
    pub asymptote: f64,
}

impl Transient {
    /// Exponential decay rate (s⁻¹) of the excess over the asymptote, from a
    /// log-linear fit over samples where the excess lies between 50 % and
    /// 1 % of its value at the fit start (the peak).
    pub fn decay_rate(&self) -> Option<f64> {
        let excess: Vec<f64> = self.rates.iter().map(|r| r - self.asymptote).collect();
        let (peak_idx, peak) = excess
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, v)| (i, *v))?;
        if peak <= 0.0 {
            return None;
        }
        let pts: Vec<(f64, f64)> = (peak_idx..excess.len())
            .filter(|&i| excess[i] > 0.01 * peak && excess[i] < 0.5 * peak)
            .map(|i| (self.times[i], excess[i].ln()))
            .collect();
        if pts.len() < 3 {
            return None;
        }
        let n = pts.len() as f64;
        let (sx, sy) = pts.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
        let (mx, my) = (sx / n, sy / n);
        let (sxy, sxx) = pts
            .iter()
            .fold((0.0, 0.0), |a, p| (a.0 + (p.0 - mx) * (p.1 - my), a.1 + (p.0 - mx).powi(2)));
        Some(-sxy / sxx)
    }
}

/// Scattering rate sampled at `samples + 1` equally spaced times over
/// `duration` seconds, starting from `rho0` under `drives`.
pub fn pump_transient(
    rho0: &DensityMatrix,
    drives: &[DriveField],
    duration: f64,
    samples: usize,
    cfg: &HyperfineConfig,
) -> Result<Transient> {
    let scheme = build_scheme(cfg)?;
    let l = liouvillian(&hamiltonian(&scheme, drives)?, &scheme);
    let traj = crate::master::evolve(rho0, &l, duration, samples)?;
    let ss = steady_state(&l, Some(rho0))?;
    Ok(Transient {
        rates: traj.states.iter().map(|r| scattering_rate(r, &scheme)).collect(),
        times: traj.times,
        asymptote: scattering_rate(&ss.rho, &scheme),
    })
}

/// Qubit basis state the ion starts in before detection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum QubitState {
    /// S₁/₂ F=0, dark.
    Zero,
    /// S₁/₂ F=1 mF=0, bright.
    One,
}

impl QubitState {
    pub fn density_matrix(self) -> DensityMatrix {
        match self {
            QubitState::Zero => DensityMatrix::pure(Sublevel::S0),
            QubitState::One => DensityMatrix::pure(Sublevel::s1(0)),
        }
    }
}

/// Photon detection parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DetectionModel {
    /// Fraction of scattered photons that are counted, in (0, 1].
    pub collection_efficiency: f64,
    /// Background counts per second.
    pub dark_rate: f64,
    /// Counting window (s).
    pub duration: f64,
    /// Decide "bright" when counts exceed this.
    pub threshold: u32,
    /// Include counts from off-resonant depumping of |0⟩.
    pub leakage: bool,
    /// Prior probability of |1⟩ when scoring errors.
    pub prior_one: f64,
}

impl Default for DetectionModel {
    fn default() -> Self {
        DetectionModel {
            collection_efficiency: 2e-3,
            dark_rate: 200.0,
            duration: 1e-3,
            threshold: 1,
            leakage: true,
            prior_one: 0.5,
        }
    }
}

impl DetectionModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.collection_efficiency >= 0.0 && self.collection_efficiency <= 1.0) {
            return Err(invalid("collection_efficiency", "must lie in [0, 1]"));
        }
        if !(self.dark_rate >= 0.0) || !self.dark_rate.is_finite() {
            return Err(invalid("dark_rate", "must be >= 0"));
        }
        if !(self.duration >= 0.0) || !self.duration.is_finite() {
            return Err(invalid("duration", "must be >= 0"));
        }
        if !(0.0..=1.0).contains(&self.prior_one) {
            return Err(invalid("prior_one", "must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// Photon-emission parameters of the ion under the detection light,
/// extracted once from the master equation.
///
/// The bright ion counts at `bright_rate` until it is pumped dark at a random
/// exponential time with rate `pump_out_rate`; a dark ion contributes
/// leakage counts from off-resonant depumping.
#[derive(Debug)]
pub struct EmissionModel {
    /// Detected counts/s of the bright ion above the stationary level.
    pub bright_rate: f64,
    /// Rate (s⁻¹) at which the bright ion is pumped into F=0.
    pub pump_out_rate: f64,
    /// Detected counts/s in the stationary state.
    pub stationary_rate: f64,
    /// Detected counts expected in the bright transient, `η∫(R₁ − R∞)dt`.
    pub bright_excess_counts: f64,
    collection_efficiency: f64,
    scheme: LevelScheme,
    l: Liouvillian,
    stationary: SteadyState,
    dark_deviation: Array2<C64>,
    bright_deviation: Array2<C64>,
}

impl EmissionModel {
    pub fn new(drive: DriveField, collection_efficiency: f64, cfg: &HyperfineConfig) -> Result<Self> {
        let scheme = build_scheme(cfg)?;
        let l = liouvillian(&hamiltonian(&scheme, &[drive])?, &scheme);
        let stationary = steady_state(&l, Some(&QubitState::One.density_matrix()))?;
        let eta = collection_efficiency;
        let r_inf = scattering_rate(&stationary.rho, &scheme);

        let bright = QubitState::One.density_matrix();
        let gamma = scheme.gamma();
        // quasi-steady bright level: peak of the bright transient
        let times: Vec<f64> = (0..=400).map(|k| 10f64.powf(-1.0 + 9.0 * k as f64 / 400.0) / gamma).collect();
        let traj = l.evolve_at(&bright, &times, None)?;
        let r_peak = traj
            .states
            .iter()
            .map(|r| scattering_rate(r, &scheme))
            .fold(0.0, f64::max);

        let bright_deviation = l.integrated_deviation(&bright, &stationary.rho)?;
        let dark_deviation = l.integrated_deviation(&QubitState::Zero.density_matrix(), &stationary.rho)?;
        let excess_photons = gamma * p_population(&bright_deviation);

        let bright_rate = eta * (r_peak - r_inf).max(0.0);
        let pump_out_rate = if excess_photons > 0.0 {
            (r_peak - r_inf) / excess_photons
        } else {
            0.0
        };
        Ok(EmissionModel {
            bright_rate,
            pump_out_rate,
            stationary_rate: eta * r_inf,
            bright_excess_counts: eta * excess_photons,
            collection_efficiency: eta,
            scheme,
            l,
            stationary,
            dark_deviation,
            bright_deviation,
        })
    }

    fn integrated_counts(&self, deviation: &Array2<C64>, t: f64) -> f64 {
        // ∫₀ᵀ ρ dt = ρ∞ T + X − e^{LT} X
        let tail = self.l.propagate_operator(deviation, t);
        let integral = self.scheme.gamma()
            * (self.stationary.rho.manifold_population(Manifold::P, None) * t + p_population(deviation)
                - p_population(&tail));
        self.collection_efficiency * integral
    }

    /// Expected detected counts `η∫₀ᵀ R(t) dt` for an ion starting in `state`.
    pub fn expected_counts(&self, state: QubitState, t: f64) -> f64 {
        match state {
            QubitState::Zero => self.integrated_counts(&self.dark_deviation, t),
            QubitState::One => self.integrated_counts(&self.bright_deviation, t),
        }
    }
}

fn p_population(x: &Array2<C64>) -> f64 {
    (4..8).map(|i| x[[i, i]].re).sum()
}

/// Probability mass over photon counts `0..=n_max`.
#[derive(Debug, Clone, Serialize)]
pub struct CountHistogram {
    pub state: QubitState,
    pub masses: Vec<f64>,
}

impl CountHistogram {
    pub fn total(&self) -> f64 {
        self.masses.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.masses.iter().enumerate().map(|(n, p)| n as f64 * p).sum()
    }

    /// P(counts ≤ k).
    pub fn cdf(&self, k: usize) -> f64 {
        self.masses.iter().take(k + 1).sum::<f64>().min(1.0)
    }

    pub fn max_count(&self) -> usize {
        self.masses.len() - 1
    }
}

/// Mean counts of the Poisson components that make up a histogram.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CountParameters {
    /// Mean background + leakage counts over the window.
    pub background_mean: f64,
    /// Bright count rate above background (counts/s), zero for |0⟩.
    pub bright_rate: f64,
    /// Pump-out rate ending bright emission (s⁻¹).
    pub pump_out_rate: f64,
    pub duration: f64,
}

impl CountParameters {
    pub fn new(state: QubitState, model: &DetectionModel, emission: &EmissionModel) -> Self {
        let t = model.duration;
        let leak = if model.leakage {
            emission.expected_counts(QubitState::Zero, t)
        } else {
            0.0
        };
        let background_mean = model.dark_rate * t + leak;
        match state {
            QubitState::Zero => CountParameters {
                background_mean,
                bright_rate: 0.0,
                pump_out_rate: 0.0,
                duration: t,
            },
            QubitState::One => CountParameters {
                background_mean,
                bright_rate: emission.bright_rate,
                pump_out_rate: emission.pump_out_rate,
                duration: t,
            },
        }
    }

    /// Analytic mean `μ_b + A(1 − e^{−γT})/γ`.
    pub fn mean(&self) -> f64 {
        let exposure = if self.pump_out_rate > 0.0 {
            -(-self.pump_out_rate * self.duration).exp_m1() / self.pump_out_rate
        } else {
            self.duration
        };
        self.background_mean + self.bright_rate * exposure
    }
}

// 8-point Gauss–Legendre nodes and weights on [-1, 1]
const GL_NODES: [f64; 8] = [
    -0.960_289_856_497_536_2,
    -0.796_666_477_413_626_7,
    -0.525_532_409_916_329_0,
    -0.183_434_642_495_649_8,
    0.183_434_642_495_649_8,
    0.525_532_409_916_329_0,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_2,
];
const GL_WEIGHTS: [f64; 8] = [
    0.101_228_536_290_376_3,
    0.222_381_034_453_374_5,
    0.313_706_645_877_887_3,
    0.362_683_783_378_362_0,
    0.362_683_783_378_362_0,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];

/// Adds `weight × Poisson(mean)` to `out`, walking outwards from the mode so
/// that large means neither underflow nor waste work on negligible tails.
fn poisson_into(mean: f64, weight: f64, ln_fact: &[f64], out: &mut [f64]) {
    if mean <= 0.0 {
        out[0] += weight;
        return;
    }
    let top = out.len() - 1;
    let mode = (mean.floor() as usize).min(top);
    let lm = mean.ln();
    let peak = (mode as f64 * lm - mean - ln_fact[mode]).exp();
    out[mode] += weight * peak;
    let mut p = peak;
    for n in mode + 1..=top {
        p *= mean / n as f64;
        out[n] += weight * p;
        if p < 1e-18 * peak {
            break;
        }
    }
    p = peak;
    for n in (0..mode).rev() {
        p *= (n + 1) as f64 / mean;
        out[n] += weight * p;
        if p < 1e-18 * peak {
            break;
        }
    }
}

/// Count distribution as a mixed Poisson law.
///
/// `n | τ ~ Poisson(μ_b + A·min(τ, T))` with the pump-out time
/// `τ ~ Exp(γ)`. The mixture over `τ < T` is integrated with composite
/// 8-point Gauss–Legendre quadrature on panels short enough that the mean
/// moves by at most one count and the weight by at most `e^{-1/2}` across
/// each; `τ ≥ T` contributes a single Poisson term.
pub fn count_distribution(state: QubitState, params: &CountParameters) -> CountHistogram {
    let (mu, a, g, t) = (
        params.background_mean,
        params.bright_rate,
        params.pump_out_rate,
        params.duration,
    );
    let top_mean = mu + a * t;
    let n_max = (top_mean + 12.0 * top_mean.sqrt() + 30.0).ceil() as usize;
    let ln_fact: Vec<f64> = std::iter::once(0.0)
        .chain((1..=n_max).scan(0.0, |acc, k| {
            *acc += (k as f64).ln();
            Some(*acc)
        }))
        .collect();
    let mut masses = vec![0.0; n_max + 1];
    if a == 0.0 || g == 0.0 || t == 0.0 {
        poisson_into(top_mean, 1.0, &ln_fact, &mut masses);
        return CountHistogram { state, masses };
    }
    // beyond 45/γ the pump-out density is below 1e-19 of its start
    let span = t.min(45.0 / g);
    poisson_into(top_mean, (-g * t).exp(), &ln_fact, &mut masses);
    let panels = (a * span).max(2.0 * g * span).ceil().clamp(1.0, 1e6) as usize;
    let width = span / panels as f64;
    for p in 0..panels {
        let centre = (p as f64 + 0.5) * width;
        for (x, w) in GL_NODES.iter().zip(GL_WEIGHTS) {
            let tau = centre + 0.5 * width * x;
            let density = g * (-g * tau).exp();
            poisson_into(mu + a * tau, 0.5 * width * w * density, &ln_fact, &mut masses);
        }
    }
    CountHistogram { state, masses }
}

/// Count histogram for an ion starting in `state`, measured with `model`
/// under the optical `drive`.
pub fn detect_histogram(
    state: QubitState,
    model: &DetectionModel,
    drive: DriveField,
    cfg: &HyperfineConfig,
) -> Result<CountHistogram> {
    model.validate()?;
    let emission = EmissionModel::new(drive, model.collection_efficiency, cfg)?;
    Ok(count_distribution(state, &CountParameters::new(state, model, &emission)))
}

/// Error of a threshold decision.
pub fn discrimination_error(dark: &CountHistogram, bright: &CountHistogram, threshold: usize, prior_one: f64) -> f64 {
    let false_bright = 1.0 - dark.cdf(threshold);
    let false_dark = bright.cdf(threshold);
    ((1.0 - prior_one) * false_bright + prior_one * false_dark).clamp(0.0, 1.0)
}

/// Best threshold and error at one counting window.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct WindowScore {
    pub duration: f64,
    pub threshold: u32,
    pub error: f64,
}

/// Result of [`optimize_detection`].
#[derive(Debug, Clone, Serialize)]
pub struct DetectionOptimum {
    pub duration: f64,
    pub threshold: u32,
    pub error: f64,
    /// Best error for each window on the grid.
    pub curve: Vec<WindowScore>,
}

/// Minimizes `(1−p)·P(n > k | 0) + p·P(n ≤ k | 1)` over the grid of counting
/// windows `durations` and thresholds `0..=max_threshold`.
pub fn optimize_detection(
    durations: &[f64],
    max_threshold: u32,
    model: &DetectionModel,
    drive: DriveField,
    cfg: &HyperfineConfig,
) -> Result<DetectionOptimum> {
    model.validate()?;
    if durations.is_empty() {
        return Err(invalid("durations", "grid must not be empty"));
    }
    let emission = EmissionModel::new(drive, model.collection_efficiency, cfg)?;
    let curve: Vec<WindowScore> = durations
        .par_iter()
        .map(|&t| {
            let m = DetectionModel { duration: t, ..*model };
            let dark = count_distribution(QubitState::Zero, &CountParameters::new(QubitState::Zero, &m, &emission));
            let bright = count_distribution(QubitState::One, &CountParameters::new(QubitState::One, &m, &emission));
            let (threshold, error) = (0..=max_threshold)
                .map(|k| (k, discrimination_error(&dark, &bright, k as usize, m.prior_one)))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .expect("threshold range is non-empty");
            WindowScore {
                duration: t,
                threshold,
                error,
            }
        })
        .collect();
    let best = *curve
        .iter()
        .min_by(|a, b| a.error.total_cmp(&b.error))
        .expect("non-empty grid");
    Ok(DetectionOptimum {
        duration: best.duration,
        threshold: best.threshold,
        error: best.error,
        curve,
    })
}
