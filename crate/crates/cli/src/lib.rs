//! `ybsim`: command-line front end for the `yb-ion` library.
//!
//! Each subcommand reads flat `key = value` config files, applies numeric
//! flag overrides, runs one calculation and writes a CSV or JSON dataset
//! whose header records the fully resolved configuration and seed.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use yb_ion::atomic::HyperfineConfig;
use yb_ion::config::{Bound, ConfigErrors, KvFile, KvReader};
use yb_ion::loading::{self, IsotopeTable, LoadingModel, RateSettings};
use yb_ion::master::{DriveField, OpticalReference};
use yb_ion::prep::{self, DetectionModel, PrepScheme, QubitState};
use yb_ion::trap::{self, Topology, TrapConfig};

#[derive(Parser, Debug)]
#[command(name = "ybsim", version, about = "Trapped Yb+ ion simulations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Config file(s); later files override earlier ones.
    #[arg(long, global = true)]
    pub config: Vec<PathBuf>,
    /// Output file; stdout when omitted.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Override any config key, e.g. `--set b_field_tesla=2e-4`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Resolve and print the configuration without running.
    #[arg(long, global = true)]
    pub dry_run: bool,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemeArg {
    Offresonant,
    Resonant,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum TopologyArg {
    Linear,
    Ring,
}

#[derive(Subcommand, Debug, Clone)]
pub enum Command {
    /// Stationary S F=0 population over polarization angle and Rabi frequency.
    PrepSweep {
        #[arg(long, value_enum, default_value = "offresonant")]
        scheme: SchemeArg,
        /// Comma-separated Ω/Γ values.
        #[arg(long, value_delimiter = ',')]
        omegas: Option<Vec<f64>>,
        #[arg(long)]
        b_field_tesla: Option<f64>,
    },
    /// Fluorescence after the repumping microwave is switched off.
    PrepTransient {
        #[arg(long)]
        duration_s: Option<f64>,
        #[arg(long)]
        omega_over_gamma: Option<f64>,
    },
    /// Optimal counting window and threshold for state detection.
    DetectOpt {
        #[arg(long)]
        dark_rate: Option<f64>,
        #[arg(long)]
        collection_efficiency: Option<f64>,
    },
    /// Mathieu parameters and secular frequencies.
    Trap {
        #[arg(long, value_enum, default_value = "linear")]
        topology: TopologyArg,
        #[arg(long)]
        rf_amplitude_v: Option<f64>,
        #[arg(long)]
        dc_voltage_v: Option<f64>,
    },
    /// Equilibrium positions of a linear ion chain.
    Crystal {
        #[arg(long)]
        n: Option<u32>,
        #[arg(long)]
        omega_z_khz: Option<f64>,
        #[arg(long)]
        mass_amu: Option<f64>,
    },
    /// Isotope-resolved 399 nm fluorescence spectrum.
    Spectrum {
        /// Isotope table replacing the bundled one.
        #[arg(long)]
        table: Option<PathBuf>,
    },
    /// Stochastic loading timeline and loading-rate comparison.
    Load {
        #[arg(long)]
        rate: Option<f64>,
        #[arg(long)]
        target: Option<u32>,
        #[arg(long)]
        latency_s: Option<f64>,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::PrepSweep { .. } => "prep-sweep",
            Command::PrepTransient { .. } => "prep-transient",
            Command::DetectOpt { .. } => "detect-opt",
            Command::Trap { .. } => "trap",
            Command::Crystal { .. } => "crystal",
            Command::Spectrum { .. } => "spectrum",
            Command::Load { .. } => "load",
        }
    }

    fn default_format(&self) -> Format {
        match self {
            Command::PrepSweep { .. } | Command::PrepTransient { .. } | Command::Spectrum { .. } => Format::Csv,
            _ => Format::Json,
        }
    }

    /// Named numeric flags as config keys.
    fn overrides(&self) -> Vec<(&'static str, f64)> {
        let pairs: Vec<(&'static str, Option<f64>)> = match self {
            Command::PrepSweep { b_field_tesla, .. } => vec![("b_field_tesla", *b_field_tesla)],
            Command::PrepTransient {
                duration_s,
                omega_over_gamma,
            } => vec![("duration_s", *duration_s), ("omega_over_gamma", *omega_over_gamma)],
            Command::DetectOpt {
                dark_rate,
                collection_efficiency,
            } => vec![("dark_rate", *dark_rate), ("collection_efficiency", *collection_efficiency)],
            Command::Trap {
                rf_amplitude_v,
                dc_voltage_v,
                ..
            } => vec![("rf_amplitude_v", *rf_amplitude_v), ("dc_voltage_v", *dc_voltage_v)],
            Command::Crystal { n, omega_z_khz, mass_amu } => vec![
                ("n", n.map(f64::from)),
                ("omega_z_khz", *omega_z_khz),
                ("mass_amu", *mass_amu),
            ],
            Command::Spectrum { .. } => vec![],
            Command::Load { rate, target, latency_s } => vec![
                ("rate", *rate),
                ("target", target.map(f64::from)),
                ("latency_s", *latency_s),
            ],
        };
        pairs.into_iter().filter_map(|(k, v)| v.map(|v| (k, v))).collect()
    }
}

/// Failure of a run, mapped to an exit code by [`run`].
#[derive(Debug)]
pub enum RunError {
    Config(ConfigErrors),
    Compute(anyhow::Error),
}

impl From<ConfigErrors> for RunError {
    fn from(e: ConfigErrors) -> Self {
        RunError::Config(e)
    }
}

impl From<yb_ion::Error> for RunError {
    fn from(e: yb_ion::Error) -> Self {
        match e {
            yb_ion::Error::Config(c) => RunError::Config(c),
            other => RunError::Compute(other.into()),
        }
    }
}

impl From<anyhow::Error> for RunError {
    fn from(e: anyhow::Error) -> Self {
        RunError::Compute(e)
    }
}

/// Resolved settings of one invocation; echoed into every output header.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: String,
    pub config_paths: Vec<PathBuf>,
    pub out: Option<PathBuf>,
    pub format: Format,
    pub seed: u64,
    /// Non-numeric settings (scheme, topology, table path).
    pub labels: BTreeMap<String, String>,
    /// Every numeric key with its effective value, defaults included.
    pub values: BTreeMap<String, f64>,
}

/// Dataset produced by a subcommand.
struct Dataset {
    columns: Vec<&'static str>,
    rows: Vec<Vec<String>>,
    json: Value,
}

/// Parses `argv`, runs the subcommand and returns the process exit code:
/// 0 on success, 2 on usage or configuration errors, 1 on computation errors.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(RunError::Config(errors)) => {
            eprintln!("configuration error{}:", if errors.len() > 1 { "s" } else { "" });
            for issue in &errors.0 {
                eprintln!("  `{}`: {}", issue.key, issue.message);
            }
            2
        }
        Err(RunError::Compute(e)) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

fn merged_config(cli: &Cli) -> Result<KvFile, ConfigErrors> {
    let mut errors = ConfigErrors::default();
    let mut merged = match &cli.command {
        Command::Spectrum { table: Some(path) } => KvFile::load(path).unwrap_or_else(|e| {
            errors.extend(e);
            KvFile::default()
        }),
        Command::Spectrum { table: None } => IsotopeTable::bundled_kv(),
        _ => KvFile::default(),
    };
    for path in &cli.common.config {
        match KvFile::load(path) {
            Ok(kv) => merged.overlay(&kv),
            Err(e) => errors.extend(e),
        }
    }
    if let Command::PrepSweep { omegas: Some(list), .. } = &cli.command {
        let mut kept = KvFile::default();
        for (k, v) in merged.iter().filter(|(k, _)| !k.starts_with("omega_over_gamma_")) {
            kept.insert(k, v);
        }
        for (i, w) in list.iter().enumerate() {
            kept.insert(format!("omega_over_gamma_{i}"), *w);
        }
        merged = kept;
    }
    for (k, v) in cli.command.overrides() {
        merged.insert(k, v);
    }
    for item in &cli.common.set {
        match item.split_once('=').map(|(k, v)| (k.trim(), v.trim().parse::<f64>())) {
            Some((k, Ok(v))) if !k.is_empty() => merged.insert(k, v),
            _ => errors.push(item.clone(), "expected --set KEY=NUMBER"),
        }
    }
    errors.into_result()?;
    Ok(merged)
}

/// Loads and validates the config files for `command` as [`run`] would,
/// reporting every problem at once.
pub fn validate_config(command: &str, paths: &[PathBuf]) -> Result<RunConfig, ConfigErrors> {
    let mut argv = vec!["ybsim".to_string(), command.to_string()];
    for p in paths {
        argv.push("--config".into());
        argv.push(p.display().to_string());
    }
    let cli = Cli::try_parse_from(&argv).map_err(|e| {
        let mut errors = ConfigErrors::default();
        errors.push("<command>", e.to_string());
        errors
    })?;
    let kv = merged_config(&cli)?;
    let mut reader = KvReader::new(&kv);
    let labels = read_inputs(&cli.command, &mut reader).labels;
    let values = reader.finish(true)?;
    Ok(run_config(&cli, labels, values))
}

fn run_config(cli: &Cli, labels: BTreeMap<String, String>, values: BTreeMap<String, f64>) -> RunConfig {
    RunConfig {
        command: cli.command.name().to_string(),
        config_paths: cli.common.config.clone(),
        out: cli.common.out.clone(),
        format: cli.common.format.unwrap_or(cli.command.default_format()),
        seed: cli.common.seed,
        labels,
        values,
    }
}

/// Everything a subcommand needs, read from the merged config.
struct Inputs {
    labels: BTreeMap<String, String>,
    job: Job,
}

enum Job {
    PrepSweep {
        scheme: PrepScheme,
        alphas: Vec<f64>,
        omegas: Vec<f64>,
        detuning: f64,
        cfg: HyperfineConfig,
    },
    PrepTransient {
        optical: DriveField,
        microwave: DriveField,
        duration: f64,
        samples: usize,
        cfg: HyperfineConfig,
    },
    DetectOpt {
        model: DetectionModel,
        drive: DriveField,
        durations: Vec<f64>,
        max_threshold: u32,
        cfg: HyperfineConfig,
    },
    Trap(TrapConfig),
    Crystal {
        n: usize,
        omega_z: f64,
        mass_amu: f64,
    },
    Spectrum {
        table: IsotopeTable,
        grid: Vec<f64>,
    },
    Load {
        model: LoadingModel,
        rates: RateSettings,
        ionization_potential_ev: f64,
        wavelength_nm: f64,
        field: f64,
    },
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

fn optical_drive(r: &mut KvReader<'_>, cfg: &HyperfineConfig) -> DriveField {
    let w = r.number("omega_over_gamma", 1.0, Bound::NonNegative);
    let d = r.number("detuning_over_gamma", 0.0, Bound::Any);
    let alpha = r.number("alpha_deg", 45.0, Bound::Within(0.0, 180.0));
    DriveField::optical(w * cfg.gamma(), d * cfg.gamma(), alpha.to_radians(), OpticalReference::F1ToF0)
}

fn read_inputs(command: &Command, r: &mut KvReader<'_>) -> Inputs {
    let mut labels = BTreeMap::new();
    let job = match command {
        Command::PrepSweep { scheme, .. } => {
            let cfg = HyperfineConfig::read(r);
            // resonant: pure π light (α = 0) leaves mF = 0 dark, and above Ω ≈ Γ
            // the leak out of F=0 grows faster than the pumping rate
            let (scheme, name, lo, hi, default_omegas) = match scheme {
                SchemeArg::Offresonant => (PrepScheme::OffResonant, "offresonant", 0.0, 90.0, &[0.3, 1.0, 3.0][..]),
                SchemeArg::Resonant => (PrepScheme::Resonant, "resonant", 5.0, 85.0, &[0.3, 1.0][..]),
            };
            labels.insert("scheme".into(), name.into());
            let lo = r.number("alpha_min_deg", lo, Bound::Within(0.0, 180.0));
            let hi = r.number("alpha_max_deg", hi, Bound::Within(0.0, 180.0));
            let step = r.number("alpha_step_deg", 2.0, Bound::Positive);
            if hi < lo {
                r.error("alpha_max_deg", "must be >= alpha_min_deg");
            }
            let count = ((hi - lo).max(0.0) / step + 1e-9).floor() as usize + 1;
            let alphas = (0..count).map(|i| lo + step * i as f64).collect();
            let mut indexed: Vec<(usize, String)> = Vec::new();
            for key in r.file_keys() {
                if let Some(idx) = key.strip_prefix("omega_over_gamma_") {
                    match idx.parse::<usize>() {
                        Ok(i) => indexed.push((i, key.clone())),
                        Err(_) => r.error(key.clone(), "expected omega_over_gamma_<index>"),
                    }
                }
            }
            indexed.sort();
            let omegas = if indexed.is_empty() {
                for (i, w) in default_omegas.iter().enumerate() {
                    r.number(&format!("omega_over_gamma_{i}"), *w, Bound::Positive);
                }
                default_omegas.to_vec()
            } else {
                indexed
                    .iter()
                    .filter_map(|(_, k)| r.optional(k, Bound::Positive))
                    .collect()
            };
            let detuning = r.number("detuning_over_gamma", 0.0, Bound::Any);
            Job::PrepSweep {
                scheme,
                alphas,
                omegas,
                detuning,
                cfg,
            }
        }
        Command::PrepTransient { .. } => {
            let cfg = HyperfineConfig::read(r);
            let optical = optical_drive(r, &cfg);
            let mw = r.number("microwave_rabi_hz", 50e3, Bound::Positive);
            let duration = r.number("duration_s", 0.05, Bound::Positive);
            let samples = r.integer("samples", 500, 1, 100_000) as usize;
            Job::PrepTransient {
                optical,
                microwave: DriveField::microwave(yb_ion::units::angular(mw), 0.0),
                duration,
                samples,
                cfg,
            }
        }
        Command::DetectOpt { .. } => {
            let cfg = HyperfineConfig::read(r);
            let drive = optical_drive(r, &cfg);
            let d = DetectionModel::default();
            let model = DetectionModel {
                collection_efficiency: r.number("collection_efficiency", d.collection_efficiency, Bound::Within(0.0, 1.0)),
                dark_rate: r.number("dark_rate", d.dark_rate, Bound::NonNegative),
                prior_one: r.number("prior_one", d.prior_one, Bound::Within(0.0, 1.0)),
                leakage: r.integer("leakage", 1, 0, 1) == 1,
                ..d
            };
            let t_min = r.number("duration_min_s", 1e-5, Bound::Positive);
            let t_max = r.number("duration_max_s", 2e-2, Bound::Positive);
            let points = r.integer("duration_points", 50, 1, 10_000) as usize;
            if t_max < t_min {
                r.error("duration_max_s", "must be >= duration_min_s");
            }
            let durations = linspace(t_min.ln(), t_max.ln(), points).into_iter().map(f64::exp).collect();
            let max_threshold = r.integer("max_threshold", 20, 0, 10_000) as u32;
            Job::DetectOpt {
                model,
                drive,
                durations,
                max_threshold,
                cfg,
            }
        }
        Command::Trap { topology, .. } => {
            let topology = match topology {
                TopologyArg::Linear => Topology::Linear,
                TopologyArg::Ring => Topology::Ring,
            };
            labels.insert(
                "topology".into(),
                if topology == Topology::Linear { "linear" } else { "ring" }.into(),
            );
            Job::Trap(TrapConfig::read(topology, r))
        }
        Command::Crystal { .. } => Job::Crystal {
            n: r.integer("n", 2, 1, 50) as usize,
            omega_z: yb_ion::units::angular(r.number("omega_z_khz", 52.0, Bound::Positive) * 1e3),
            mass_amu: r.number("mass_amu", 172.0, Bound::Positive),
        },
        Command::Spectrum { table } => {
            labels.insert(
                "table".into(),
                table.as_ref().map_or("bundled".into(), |p| p.display().to_string()),
            );
            let lo = r.number("detuning_min_hz", -1.5e9, Bound::Any);
            let hi = r.number("detuning_max_hz", 2.0e9, Bound::Any);
            let points = r.integer("points", 3501, 2, 10_000_000) as usize;
            if hi <= lo {
                r.error("detuning_max_hz", "must be > detuning_min_hz");
            }
            Job::Spectrum {
                table: IsotopeTable::read(r),
                grid: linspace(lo, hi, points),
            }
        }
        Command::Load { .. } => {
            let d = LoadingModel::default();
            let s = RateSettings::default();
            Job::Load {
                model: LoadingModel {
                    rate: r.number("rate", d.rate, Bound::Positive),
                    target: r.integer("target", d.target as u64, 1, 1_000_000) as u32,
                    latency: r.number("latency_s", d.latency, Bound::NonNegative),
                    seed: 0,
                },
                rates: RateSettings {
                    neutral_flux: r.number("neutral_flux", s.neutral_flux, Bound::Positive),
                    electron_impact: r.number("electron_impact_rate", s.electron_impact, Bound::Positive),
                    two_color: r.number("two_color_rate", s.two_color, Bound::Positive),
                    one_color: r.number("one_color_rate", s.one_color, Bound::Positive),
                },
                ionization_potential_ev: r.number(
                    "ionization_potential_ev",
                    loading::YB_IONIZATION_POTENTIAL_EV,
                    Bound::Positive,
                ),
                wavelength_nm: r.number("wavelength_nm", 398.911, Bound::Positive),
                field: r.number("static_field_v_per_m", 0.0, Bound::NonNegative),
            }
        }
    };
    Inputs { labels, job }
}

fn num(x: f64) -> String {
    // adding 0.0 turns -0 into 0
    format!("{}", x + 0.0)
}

fn compute(job: Job, seed: u64) -> Result<Dataset, RunError> {
    Ok(match job {
        Job::PrepSweep {
            scheme,
            alphas,
            omegas,
            detuning,
            cfg,
        } => {
            let rows = prep::efficiency_sweep(scheme, &alphas, &omegas, detuning, &cfg)?;
            Dataset {
                columns: vec!["alpha_deg", "omega_over_gamma", "efficiency"],
                rows: rows
                    .iter()
                    .map(|r| vec![num(r.alpha_deg), num(r.omega_over_gamma), num(r.efficiency)])
                    .collect(),
                json: json!({ "rows": rows }),
            }
        }
        Job::PrepTransient {
            optical,
            microwave,
            duration,
            samples,
            cfg,
        } => {
            let rho0 = prep::cooling_state(optical, microwave, &cfg)?;
            let tr = prep::pump_transient(&rho0, &[optical], duration, samples, &cfg)?;
            let gamma = cfg.gamma();
            Dataset {
                columns: vec!["time_s", "scattering_rate_per_s", "scattering_rate_over_gamma"],
                rows: tr
                    .times
                    .iter()
                    .zip(&tr.rates)
                    .map(|(t, r)| vec![num(*t), num(*r), num(r / gamma)])
                    .collect(),
                json: json!({
                    "times_s": tr.times,
                    "scattering_rate_per_s": tr.rates,
                    "asymptote_per_s": tr.asymptote,
                    "decay_rate_per_s": tr.decay_rate(),
                }),
            }
        }
        Job::DetectOpt {
            model,
            drive,
            durations,
            max_threshold,
            cfg,
        } => {
            let best = prep::optimize_detection(&durations, max_threshold, &model, drive, &cfg)?;
            let at_best = DetectionModel {
                duration: best.duration,
                threshold: best.threshold,
                ..model
            };
            let dark = prep::detect_histogram(QubitState::Zero, &at_best, drive, &cfg)?;
            let bright = prep::detect_histogram(QubitState::One, &at_best, drive, &cfg)?;
            Dataset {
                columns: vec!["duration_s", "threshold", "error"],
                rows: best
                    .curve
                    .iter()
                    .map(|w| vec![num(w.duration), w.threshold.to_string(), num(w.error)])
                    .collect(),
                json: json!({
                    "optimum": { "duration_s": best.duration, "threshold": best.threshold, "error": best.error },
                    "curve": best.curve,
                    "histogram_dark": dark.masses,
                    "histogram_bright": bright.masses,
                    "mean_dark": dark.mean(),
                    "mean_bright": bright.mean(),
                }),
            }
        }
        Job::Trap(cfg) => {
            let res = trap::analyze_trap(&cfg)?;
            let hz = res.frequencies_hz();
            Dataset {
                columns: vec!["axis", "a", "q", "omega_hz"],
                rows: ["x", "y", "z"]
                    .iter()
                    .enumerate()
                    .map(|(i, axis)| vec![axis.to_string(), num(res.a[i]), num(res.q[i]), num(hz[i])])
                    .collect(),
                json: json!({
                    "a": res.a,
                    "q": res.q,
                    "omega_hz": hz,
                    "stable": res.stable,
                    "accuracy_warning": res.accuracy_warning,
                }),
            }
        }
        Job::Crystal { n, omega_z, mass_amu } => {
            let c = trap::crystal_geometry(n, omega_z, mass_amu)?;
            let um: Vec<f64> = c.positions.iter().map(|p| p * 1e6).collect();
            Dataset {
                columns: vec!["index", "u", "position_um"],
                rows: c
                    .u
                    .iter()
                    .zip(&um)
                    .enumerate()
                    .map(|(i, (u, p))| vec![i.to_string(), num(*u), num(*p)])
                    .collect(),
                json: json!({
                    "n": n,
                    "omega_z_rad_per_s": omega_z,
                    "length_scale_um": c.length_scale * 1e6,
                    "u": c.u,
                    "positions_um": um,
                    "min_spacing_um": if c.min_spacing.is_finite() { Some(c.min_spacing * 1e6) } else { None },
                }),
            }
        }
        Job::Spectrum { table, grid } => {
            table.validate()?;
            let y = table.spectrum(&grid);
            Dataset {
                columns: vec!["detuning_hz", "fluorescence_per_hz"],
                rows: grid.iter().zip(&y).map(|(x, v)| vec![num(*x), num(*v)]).collect(),
                json: json!({ "detuning_hz": grid, "fluorescence_per_hz": y, "table": table }),
            }
        }
        Job::Load {
            model,
            rates,
            ionization_potential_ev,
            wavelength_nm,
            field,
        } => {
            let timeline = loading::loading_timeline(&LoadingModel { seed, ..model })?;
            let comparison = loading::rate_comparison(&rates)?;
            let photon = yb_ion::units::photon_energy_ev(wavelength_nm);
            let threshold = loading::field_threshold_1color(ionization_potential_ev, photon, field)?;
            Dataset {
                columns: vec!["ion", "arrival_s"],
                rows: timeline
                    .events
                    .iter()
                    .enumerate()
                    .map(|(i, t)| vec![(i + 1).to_string(), num(*t)])
                    .collect(),
                json: json!({
                    "timeline": timeline,
                    "rates": comparison,
                    "one_color_threshold": threshold,
                }),
            }
        }
    })
}

fn header_lines(rc: &RunConfig) -> Vec<String> {
    let mut lines = vec![format!("ybsim {}", rc.command), format!("seed = {}", rc.seed)];
    for p in &rc.config_paths {
        lines.push(format!("config_file = {}", p.display()));
    }
    for (k, v) in &rc.labels {
        lines.push(format!("{k} = {v}"));
    }
    for (k, v) in &rc.values {
        lines.push(format!("{k} = {v}"));
    }
    lines
}

fn header_json(rc: &RunConfig) -> Value {
    json!({
        "command": rc.command,
        "seed": rc.seed,
        "config_files": rc.config_paths.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
        "labels": rc.labels,
        "config": rc.values,
    })
}

fn render(rc: &RunConfig, data: &Dataset) -> anyhow::Result<Vec<u8>> {
    let mut buf = Vec::new();
    match rc.format {
        Format::Csv => {
            for line in header_lines(rc) {
                writeln!(buf, "# {line}")?;
            }
            let mut w = csv::Writer::from_writer(&mut buf);
            w.write_record(&data.columns)?;
            for row in &data.rows {
                w.write_record(row)?;
            }
            w.flush()?;
        }
        Format::Json => {
            let doc = json!({ "header": header_json(rc), "result": data.json });
            serde_json::to_writer_pretty(&mut buf, &doc)?;
            buf.push(b'\n');
        }
    }
    Ok(buf)
}

/// Writes via a temporary file in the target directory and renames it, so a
/// failed run never leaves a partial file behind.
fn write_atomic(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

fn execute(cli: &Cli) -> Result<(), RunError> {
    let kv = merged_config(cli)?;
    let mut reader = KvReader::new(&kv);
    let inputs = read_inputs(&cli.command, &mut reader);
    let values = reader.finish(true)?;
    let rc = run_config(cli, inputs.labels, values);
    if cli.common.dry_run {
        for line in header_lines(&rc) {
            println!("{line}");
        }
        return Ok(());
    }
    let data = compute(inputs.job, rc.seed)?;
    let bytes = render(&rc, &data)?;
    match &rc.out {
        Some(path) => write_atomic(path, &bytes)?,
        None => std::io::stdout().write_all(&bytes).map_err(anyhow::Error::from)?,
    }
    Ok(())
}
