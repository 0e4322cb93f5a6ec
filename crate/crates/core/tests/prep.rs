mod oracles;
use oracles::*;

use proptest::prelude::*;

use yb_ion::atomic::{build_scheme, HyperfineConfig, Sublevel};
use yb_ion::master::{hamiltonian, liouvillian, steady_state, DensityMatrix, DriveField, OpticalReference};
use yb_ion::prep::*;

fn cfg() -> HyperfineConfig {
    HyperfineConfig::default()
}

#[test]
fn offresonant_maximum_near_ninety_six_percent() {
    let c = cfg();
    let alphas: Vec<f64> = (0..=18).map(|k| 5.0 * k as f64).collect();
    let rows = efficiency_sweep(PrepScheme::OffResonant, &alphas, &[0.3, 1.0, 3.0], 0.0, &c).unwrap();
    let best = rows.iter().map(|r| r.efficiency).fold(0.0, f64::max);
    assert!((0.955..=0.975).contains(&best), "{best}");
    assert!(rows.iter().all(|r| (0.0..=1.0).contains(&r.efficiency)));
}

#[test]
fn sweep_maximum_is_reflection_invariant() {
    let c = cfg();
    let alphas: Vec<f64> = (0..=9).map(|k| 10.0 * k as f64).collect();
    let mirrored: Vec<f64> = alphas.iter().map(|a| 180.0 - a).collect();
    let max = |rows: Vec<SweepRow>| rows.iter().map(|r| r.efficiency).fold(0.0, f64::max);
    let a = max(efficiency_sweep(PrepScheme::OffResonant, &alphas, &[1.0], 0.0, &c).unwrap());
    let b = max(efficiency_sweep(PrepScheme::OffResonant, &mirrored, &[1.0], 0.0, &c).unwrap());
    assert!((a - b).abs() < 1e-9);
}

#[test]
fn no_light_means_no_pumping() {
    let r = prep_offresonant(0.0, 0.0, 0.7, &cfg()).unwrap();
    assert!(r.degenerate);
    assert!((r.efficiency - r.initial_efficiency).abs() < 1e-12);
    assert!(r.time_to_asymptote.is_infinite());
    let r = prep_resonant(0.0, 0.7, &cfg()).unwrap();
    assert!((r.efficiency - r.initial_efficiency).abs() < 1e-12);
}

#[test]
fn resonant_pumping_is_nearly_complete_and_polarization_blind() {
    let c = cfg();
    let effs: Vec<f64> = (1..=17)
        .map(|k| prep_resonant(c.gamma(), (5.0 * k as f64).to_radians(), &c).unwrap().efficiency)
        .collect();
    let lo = effs.iter().cloned().fold(1.0, f64::min);
    let hi = effs.iter().cloned().fold(0.0, f64::max);
    assert!(lo >= 0.995, "{lo}");
    assert!(hi - lo < 0.01);
}

#[test]
fn resonant_beats_offresonant() {
    let c = cfg();
    for (w, a) in [(0.3, 20.0f64), (1.0, 45.0), (3.0, 70.0)] {
        let off = prep_offresonant(w * c.gamma(), 0.0, a.to_radians(), &c).unwrap();
        let on = prep_resonant(w * c.gamma(), a.to_radians(), &c).unwrap();
        assert!(on.efficiency >= off.efficiency);
        assert!(on.time_to_asymptote * 10.0 <= off.time_to_asymptote);
    }
}

#[test]
fn transient_from_stationary_state_is_flat() {
    let c = cfg();
    let drive = default_detection_drive(&c);
    let s = build_scheme(&c).unwrap();
    let l = liouvillian(&hamiltonian(&s, &[drive]).unwrap(), &s);
    let rho = steady_state(&l, None).unwrap().rho;
    let tr = pump_transient(&rho, &[drive], 1e-3, 50, &c).unwrap();
    for r in &tr.rates {
        assert!((r - tr.asymptote).abs() < 1e-9 * c.gamma());
    }
}

#[test]
fn microwave_switch_off_transient_decays_to_near_zero() {
    let c = cfg();
    let drive = default_detection_drive(&c);
    let start = cooling_state(drive, default_microwave(), &c).unwrap();
    let tr = pump_transient(&start, &[drive], 50e-3, 1000, &c).unwrap();
    assert!(tr.rates[0] > 0.01 * c.gamma());
    assert!(tr.asymptote < 0.1 * tr.rates[0]);
    for w in tr.rates.windows(2) {
        assert!(w[1] <= w[0] * (1.0 + 1e-9));
    }
    assert!((tr.rates.last().unwrap() - tr.asymptote).abs() < 0.01 * tr.rates[0]);
}

#[test]
fn weak_drive_pumping_rate_scales_with_power() {
    let c = cfg();
    let rate = |w: f64| {
        let drive = DriveField::optical(w * c.gamma(), 0.0, 45f64.to_radians(), OpticalReference::F1ToF0);
        let duration = 8.0 / (w * w * 1343.0);
        pump_transient(&DensityMatrix::ground_f1_mixture(), &[drive], duration, 800, &c)
            .unwrap()
            .decay_rate()
            .unwrap()
    };
    let ratio = rate(0.1) / rate(0.05);
    assert!((ratio - 4.0).abs() < 0.4, "{ratio}");
}

#[test]
fn emission_integrals_match_direct_quadrature() {
    let c = cfg();
    let drive = default_detection_drive(&c);
    let em = EmissionModel::new(drive, 1.0, &c).unwrap();
    // trapezoid on a fine log grid as the independent check
    let s = build_scheme(&c).unwrap();
    let l = liouvillian(&hamiltonian(&s, &[drive]).unwrap(), &s);
    for state in [QubitState::One, QubitState::Zero] {
        let t_end = 2e-3;
        let mut times = vec![0.0];
        times.extend((0..4000).map(|k| t_end * 10f64.powf(-7.0 * (1.0 - k as f64 / 3999.0))));
        let traj = l.evolve_at(&state.density_matrix(), &times, None).unwrap();
        let rates: Vec<f64> = traj.states.iter().map(|r| yb_ion::master::scattering_rate(r, &s)).collect();
        let integral: f64 = times
            .windows(2)
            .zip(rates.windows(2))
            .map(|(t, r)| 0.5 * (t[1] - t[0]) * (r[0] + r[1]))
            .sum();
        let got = em.expected_counts(state, t_end);
        assert!((got - integral).abs() < 1e-4 * integral.max(1e-3), "{state:?}: {got} vs {integral}");
    }
}

#[test]
fn dark_histogram_without_leakage_is_pure_background() {
    let c = cfg();
    let model = DetectionModel {
        leakage: false,
        dark_rate: 1500.0,
        duration: 2e-3,
        ..Default::default()
    };
    let h = detect_histogram(QubitState::Zero, &model, default_detection_drive(&c), &c).unwrap();
    assert!((h.total() - 1.0).abs() < 1e-9);
    assert!((h.mean() - 3.0).abs() < 1e-9);
}

#[test]
fn nothing_detected_without_light_collection_or_background() {
    let c = cfg();
    let model = DetectionModel {
        collection_efficiency: 0.0,
        dark_rate: 0.0,
        ..Default::default()
    };
    for s in [QubitState::Zero, QubitState::One] {
        let h = detect_histogram(s, &model, default_detection_drive(&c), &c).unwrap();
        assert!((h.masses[0] - 1.0).abs() < 1e-12);
    }
}

#[test]
fn bright_histogram_matches_event_sampling() {
    let c = cfg();
    let model = DetectionModel {
        duration: 0.5e-3,
        ..Default::default()
    };
    let em = EmissionModel::new(default_detection_drive(&c), model.collection_efficiency, &c).unwrap();
    let params = CountParameters::new(QubitState::One, &model, &em);
    let h = count_distribution(QubitState::One, &params);
    assert!((h.total() - 1.0).abs() < 1e-9);
    assert!((h.mean() - params.mean()).abs() < 1e-8 * params.mean());

    let runs = 100_000;
    let samples = sample_counts(&params, runs, 42);
    let mean = samples.iter().map(|&n| n as f64).sum::<f64>() / runs as f64;
    let var = samples.iter().map(|&n| (n as f64 - mean).powi(2)).sum::<f64>() / (runs - 1) as f64;
    let sigma = (var / runs as f64).sqrt();
    assert!((mean - h.mean()).abs() < 3.0 * sigma, "{mean} vs {} (σ {sigma})", h.mean());
    for k in [0usize, 2, 5, 10] {
        let frac = samples.iter().filter(|&&n| n as usize <= k).count() as f64 / runs as f64;
        let p = h.cdf(k);
        let sd = (p * (1.0 - p) / runs as f64).sqrt().max(1e-6);
        assert!((frac - p).abs() < 4.0 * sd, "k={k}: {frac} vs {p}");
    }
}

#[test]
fn noiseless_detection_error_follows_closed_form() {
    let c = cfg();
    let drive = default_detection_drive(&c);
    let model = DetectionModel {
        dark_rate: 0.0,
        leakage: false,
        ..Default::default()
    };
    let em = EmissionModel::new(drive, model.collection_efficiency, &c).unwrap();
    let (a, g) = (em.bright_rate, em.pump_out_rate);
    let grid: Vec<f64> = (0..50).map(|k| 10f64.powf(-5.5 + 3.0 * k as f64 / 49.0)).collect();
    let opt = optimize_detection(&grid, 20, &model, drive, &c).unwrap();
    assert_eq!(opt.threshold, 0);
    for w in opt.curve.windows(2) {
        assert!(w[1].error <= w[0].error + 1e-12);
    }
    for p in &opt.curve {
        let x = (g + a) * p.duration;
        let want = 0.5 * ((-x).exp() + g / (g + a) * (-(-x).exp_m1()));
        assert!((p.error - want).abs() < 1e-9, "{} vs {want}", p.error);
    }
}

#[test]
fn default_detection_error_has_interior_minimum() {
    let c = cfg();
    let grid: Vec<f64> = (0..50).map(|k| 10f64.powf(-5.0 + 3.3 * k as f64 / 49.0)).collect();
    let opt = optimize_detection(&grid, 60, &DetectionModel::default(), default_detection_drive(&c), &c).unwrap();
    let idx = opt.curve.iter().position(|p| p.duration == opt.duration).unwrap();
    assert!(idx > 0 && idx < grid.len() - 1, "argmin at grid edge {idx}");
    assert!(opt.error < 0.5);
}

#[test]
fn more_background_never_helps() {
    let c = cfg();
    let drive = default_detection_drive(&c);
    let grid: Vec<f64> = (0..12).map(|k| 10f64.powf(-5.0 + 3.0 * k as f64 / 11.0)).collect();
    let mut last: Option<DetectionOptimum> = None;
    for dark in [10.0, 20.0, 40.0, 80.0, 160.0, 320.0] {
        let model = DetectionModel {
            dark_rate: dark,
            ..Default::default()
        };
        let opt = optimize_detection(&grid, 60, &model, drive, &c).unwrap();
        if let Some(prev) = &last {
            assert!(opt.error >= prev.error - 1e-12);
            for (a, b) in prev.curve.iter().zip(&opt.curve) {
                assert!(b.error >= a.error - 1e-12);
            }
        }
        last = Some(opt);
    }
}

#[test]
fn single_window_grid_is_returned_as_is() {
    let c = cfg();
    let opt = optimize_detection(&[3e-4], 30, &DetectionModel::default(), default_detection_drive(&c), &c).unwrap();
    assert_eq!(opt.duration, 3e-4);
    assert_eq!(opt.curve.len(), 1);
    assert!(optimize_detection(&[], 30, &DetectionModel::default(), default_detection_drive(&c), &c).is_err());
}

#[test]
fn invalid_detection_models_are_rejected() {
    let c = cfg();
    let bad = DetectionModel {
        collection_efficiency: 1.5,
        ..Default::default()
    };
    assert!(detect_histogram(QubitState::One, &bad, default_detection_drive(&c), &c).is_err());
    let bad = DetectionModel {
        dark_rate: -1.0,
        ..Default::default()
    };
    assert!(detect_histogram(QubitState::One, &bad, default_detection_drive(&c), &c).is_err());
}

#[test]
fn bright_state_is_the_clock_state() {
    assert!((QubitState::One.density_matrix().population(Sublevel::s1(0)) - 1.0).abs() < 1e-15);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn histograms_are_normalized(mu in 0.0f64..40.0, a in 0.0f64..1e5, g in 1.0f64..1e4, t in 1e-6f64..1e-2) {
        let p = CountParameters { background_mean: mu, bright_rate: a, pump_out_rate: g, duration: t };
        let h = count_distribution(QubitState::One, &p);
        prop_assert!((h.total() - 1.0).abs() < 1e-9);
        prop_assert!((h.mean() - p.mean()).abs() < 1e-7 * p.mean().max(1.0));
        let d = count_distribution(QubitState::Zero, &CountParameters { bright_rate: 0.0, ..p });
        for k in 0..5 {
            let e = discrimination_error(&d, &h, k, 0.5);
            prop_assert!((0.0..=1.0).contains(&e));
        }
    }
}
