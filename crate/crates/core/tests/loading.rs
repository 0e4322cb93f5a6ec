use proptest::prelude::*;
use yb_ion::loading::*;
use yb_ion::Error;

fn synthetic(lines: &[(u32, f64, f64)], linewidth: f64, doppler: f64) -> IsotopeTable {
    IsotopeTable {
        isotopes: lines
            .iter()
            .map(|&(a, abundance, shift)| Isotope {
                mass_number: a,
                abundance,
                components: vec![LineComponent { shift_hz: shift, weight: 1.0 }],
            })
            .collect(),
        linewidth_hz: linewidth,
        doppler_fwhm_hz: doppler,
        intensity_w_per_cm2: None,
    }
}

fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2).zip(y.windows(2)).map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1])).sum()
}

#[test]
fn excited_fraction_cases() {
    assert!((excited_fraction(1e12, 0.0, 1.0) - 0.5).abs() < 1e-9);
    assert_eq!(excited_fraction(0.0, 0.3, 1.0), 0.0);
    assert!((excited_fraction(1.0, 0.5, 1.0) - 1.0 / 6.0).abs() < 1e-15);
}

#[test]
fn zero_doppler_gives_lorentzian_fwhm() {
    let gamma = 29e6;
    let t = synthetic(&[(174, 1.0, 0.0)], gamma, 0.0);
    let x = grid(-100e6, 100e6, 200_001);
    let y = t.spectrum(&x);
    let peak = y.iter().cloned().fold(0.0, f64::max);
    let above: Vec<f64> = x.iter().zip(&y).filter(|(_, v)| **v >= peak / 2.0).map(|(x, _)| *x).collect();
    let fwhm = above.last().unwrap() - above.first().unwrap();
    assert!((fwhm / gamma - 1.0).abs() < 0.01, "fwhm {fwhm}");
}

#[test]
fn voigt_matches_numeric_convolution() {
    let (sigma, gamma) = (1.3, 0.7);
    let tau = grid(-40.0, 40.0, 160_001);
    for x in [0.0, 0.5, 2.0, 5.0, -3.3] {
        let integrand: Vec<f64> = tau
            .iter()
            .map(|t| {
                let g = (-(t * t) / (2.0 * sigma * sigma)).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt());
                let l = gamma / (std::f64::consts::PI * ((x - t) * (x - t) + gamma * gamma));
                g * l
            })
            .collect();
        let oracle = trapezoid(&tau, &integrand);
        let v = voigt(x, sigma, gamma);
        assert!((v - oracle).abs() < 1e-6 * oracle.max(1e-3), "x={x}: {v} vs {oracle}");
    }
}

#[test]
fn spectrum_integrates_to_total_abundance() {
    let t = synthetic(&[(172, 0.2, -300e6), (174, 0.3, 0.0), (176, 0.1, 400e6)], 29e6, 20e6);
    let x = grid(-20e9, 20e9, 400_001);
    let area = trapezoid(&x, &t.spectrum(&x));
    // Lorentzian tails beyond ±20 GHz carry ~Γ/(π·20 GHz) of the weight
    assert!((area - 0.6).abs() < 2e-3, "area {area}");
}

#[test]
fn peaks_ordered_by_abundance_and_centered() {
    let lines = [(170, 0.05, -900e6), (172, 0.2, -300e6), (174, 0.3, 200e6), (176, 0.12, 800e6)];
    let t = synthetic(&lines, 29e6, 10e6);
    let x = grid(-1.2e9, 1.2e9, 24_001);
    let step = x[1] - x[0];
    let y = t.spectrum(&x);
    let mut heights = Vec::new();
    for &(_, abundance, shift) in &lines {
        let window: Vec<usize> = (0..x.len()).filter(|&i| (x[i] - shift).abs() < 150e6).collect();
        let imax = *window.iter().max_by(|&&a, &&b| y[a].total_cmp(&y[b])).unwrap();
        assert!((x[imax] - shift).abs() <= step, "center {} vs {shift}", x[imax]);
        heights.push((abundance, y[imax]));
    }
    heights.sort_by(|a, b| a.0.total_cmp(&b.0));
    assert!(heights.windows(2).all(|w| w[0].1 < w[1].1));
}

#[test]
fn hyperfine_components_split_the_weight() {
    let mut t = synthetic(&[(171, 0.3, 0.0)], 29e6, 0.0);
    t.isotopes[0].components = vec![
        LineComponent { shift_hz: -1e9, weight: 1.0 / 3.0 },
        LineComponent { shift_hz: 1e9, weight: 2.0 / 3.0 },
    ];
    let y = t.spectrum(&[-1e9, 1e9]);
    assert!((y[1] / y[0] - 2.0).abs() < 1e-3);
}

#[test]
fn bundled_table_parses_with_literature_layout() {
    let t = IsotopeTable::bundled();
    let masses: Vec<u32> = t.isotopes.iter().map(|i| i.mass_number).collect();
    assert_eq!(masses, vec![170, 171, 172, 173, 174, 176]);
    assert_eq!(t.isotopes[1].components.len(), 2);
    assert_eq!(t.isotopes[3].components.len(), 3);
    assert_eq!(t.intensity_w_per_cm2, Some(3.0));
    let s = t.spectrum(&grid(-1e9, 2e9, 301));
    assert!(s.iter().all(|v| *v >= 0.0));
}

#[test]
fn table_rejects_bad_keys() {
    let kv = yb_ion::config::KvFile::parse("abundance_174 = 0.5\nshift_hz_174 = 0\nabundance_999 = 0.1\n").unwrap();
    let err = IsotopeTable::from_kv(&kv).unwrap_err().to_string();
    assert!(err.contains("abundance_999"), "{err}");
    let kv = yb_ion::config::KvFile::parse("abundance_174 = 0.7\nshift_hz_174 = 0\nabundance_172 = 0.7\nshift_hz_172 = 1\n").unwrap();
    assert!(IsotopeTable::from_kv(&kv).is_err());
    let kv = yb_ion::config::KvFile::parse("abundance_174 = 0.5\nlinewidth_hz = -1\nshift_hz_174 = 0\n").unwrap();
    assert!(IsotopeTable::from_kv(&kv).unwrap_err().to_string().contains("linewidth_hz"));
}

#[test]
fn doppler_width_from_geometry() {
    // 700 K, 174 u: v_mp ≈ 259 m/s; 10 mrad half angle at 399 nm ≈ 13 MHz
    let w = transverse_doppler_fwhm(700.0, 174.0, 0.01, 398.911);
    assert!((w / 13.0e6 - 1.0).abs() < 0.02, "{w}");
    assert_eq!(transverse_doppler_fwhm(700.0, 174.0, 0.0, 398.911), 0.0);
}

fn model(rate: f64, target: u32, latency: f64, seed: u64) -> LoadingModel {
    LoadingModel { rate, target, latency, seed }
}

#[test]
fn zero_latency_is_exact() {
    for seed in 0..10_000 {
        let t = loading_timeline(&model(10.0, 5, 0.0, seed)).unwrap();
        assert_eq!(t.final_count, 5);
        assert_eq!(t.overshoot, 0);
    }
}

#[test]
fn mean_count_matches_poisson() {
    let (rate, t_obs, runs) = (10.0, 1.0, 10_000);
    let counts: Vec<f64> = (0..runs)
        .map(|s| loading_timeline(&model(rate, 1000, 0.0, s)).unwrap().count_at(t_obs) as f64)
        .collect();
    let mean = counts.iter().sum::<f64>() / runs as f64;
    let sigma = (rate * t_obs / runs as f64).sqrt();
    assert!((mean - rate * t_obs).abs() < 3.0 * sigma, "mean {mean}");
}

#[test]
fn overshoot_probability_matches_exponential_tail() {
    let (rate, latency, runs) = (10.0, 0.05, 10_000u64);
    let hits = (0..runs)
        .filter(|&s| loading_timeline(&model(rate, 3, latency, s)).unwrap().overshoot >= 1)
        .count() as f64;
    let p = 1.0 - (-rate * latency).exp();
    let sigma = (p * (1.0 - p) / runs as f64).sqrt();
    assert!((hits / runs as f64 - p).abs() < 3.0 * sigma);
}

#[test]
fn timelines_are_reproducible_and_monotone() {
    let a = loading_timeline(&model(7.0, 10, 0.3, 99)).unwrap();
    let b = loading_timeline(&model(7.0, 10, 0.3, 99)).unwrap();
    assert_eq!(a, b);
    assert!(a.events.windows(2).all(|w| w[0] < w[1]));
    assert!(a.events.iter().all(|&e| e <= a.shutter_time));
    assert_eq!(a.events[9], a.target_time);
    assert!(loading_timeline(&model(0.0, 1, 0.0, 0)).is_err());
    assert!(loading_timeline(&model(1.0, 0, 0.0, 0)).is_err());
    assert!(loading_timeline(&model(1.0, 1, -1.0, 0)).is_err());
}

#[test]
fn default_rates_and_ratios() {
    let c = rate_comparison(&RateSettings::default()).unwrap();
    let two = c.rows.iter().find(|r| r.method == "two_color").unwrap();
    assert_eq!(two.rate, 10.0);
    assert!((two.ratio_to_electron_impact - 1.49e3).abs() < 10.0);
    assert!((c.reference_electron_impact - 0.0067).abs() < 1e-4);
}

#[test]
fn equal_rates_fail_the_guard() {
    let s = RateSettings {
        electron_impact: 1.0,
        two_color: 1.0,
        one_color: 1.0,
        ..RateSettings::default()
    };
    assert!(matches!(rate_comparison(&s), Err(Error::RatioOutOfRange(_))));
}

#[test]
fn flux_scales_rates_not_ratios() {
    let full = rate_comparison(&RateSettings::default()).unwrap();
    let half = rate_comparison(&RateSettings { neutral_flux: 0.5, ..RateSettings::default() }).unwrap();
    for (f, h) in full.rows.iter().zip(&half.rows) {
        assert!((h.rate - 0.5 * f.rate).abs() < 1e-15);
        assert!((h.ratio_to_electron_impact - f.ratio_to_electron_impact).abs() < 1e-9);
    }
}

#[test]
fn one_color_field_threshold() {
    let photon = yb_ion::units::photon_energy_ev(398.911);
    assert!((photon - 3.108).abs() < 1e-3);
    let zero = field_threshold_1color(YB_IONIZATION_POTENTIAL_EV, photon, 0.0).unwrap();
    assert!(!zero.allowed);
    assert!(zero.required_field > 2.0e5 && zero.required_field < 3.0e5, "{}", zero.required_field);
    let at = field_threshold_1color(YB_IONIZATION_POTENTIAL_EV, photon, zero.required_field * 1.0001).unwrap();
    assert!(at.allowed);
    // ΔE = 0.038 eV needs ≈ 2.5e5 V/m
    let r = field_threshold_1color(6.254, 3.108, 0.0).unwrap().required_field;
    assert!((r / 2.5e5 - 1.0).abs() < 0.03, "{r}");
    let r2 = field_threshold_1color(6.254 + 0.038, 3.108, 0.0).unwrap().required_field;
    assert!((r2 / r - 4.0).abs() < 1e-9);
    assert_eq!(field_threshold_1color(5.0, 3.0, 0.0).unwrap().required_field, 0.0);
}

proptest! {
    #[test]
    fn excited_fraction_bounded(s in 0.0f64..1e6, d in -1e3f64..1e3) {
        let f = excited_fraction(s, d, 1.0);
        prop_assert!((0.0..=0.5).contains(&f));
    }

    #[test]
    fn spectrum_linear_in_abundance(a in 0.0f64..0.5, b in 0.0f64..0.5, x in -1e9f64..1e9) {
        let t1 = synthetic(&[(172, a, -2e8), (174, b, 1e8)], 29e6, 15e6);
        let ta = synthetic(&[(172, a, -2e8), (174, 0.0, 1e8)], 29e6, 15e6);
        let tb = synthetic(&[(172, 0.0, -2e8), (174, b, 1e8)], 29e6, 15e6);
        let (y, ya, yb) = (t1.spectrum(&[x])[0], ta.spectrum(&[x])[0], tb.spectrum(&[x])[0]);
        prop_assert!(y >= 0.0);
        prop_assert!((y - ya - yb).abs() <= 1e-12 * y.max(1e-20));
    }
}
