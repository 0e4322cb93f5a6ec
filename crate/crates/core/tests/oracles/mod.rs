//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use ndarray::Array2;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Poisson};

use yb_ion::atomic::Sublevel;
use yb_ion::master::{DensityMatrix, DriveField, Liouvillian, OpticalReference};
use yb_ion::prep::CountParameters;

pub fn random_state(rng: &mut ChaCha8Rng) -> DensityMatrix {
    let a = Array2::from_shape_fn((8, 8), |_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    let m = a.dot(&a.t().mapv(|z| z.conj()));
    let tr = m.diag().sum();
    DensityMatrix::from_matrix(m.mapv(|z| z / tr)).unwrap()
}

pub fn random_drive(rng: &mut ChaCha8Rng, gamma: f64) -> Vec<DriveField> {
    let reference = match rng.random_range(0..3) {
        0 => OpticalReference::F1ToF0,
        1 => OpticalReference::F1ToF1,
        _ => OpticalReference::F0ToF1,
    };
    let mut drives = vec![DriveField::optical(
        rng.random_range(0.05..4.0) * gamma,
        rng.random_range(-2.0..2.0) * gamma,
        rng.random_range(0.0..std::f64::consts::PI),
        reference,
    )];
    if reference != OpticalReference::F0ToF1 && rng.random_bool(0.3) {
        drives.push(DriveField::microwave(rng.random_range(1e4..1e6), rng.random_range(-1e5..1e5)));
    }
    drives
}

/// Excited population of a driven two-level atom in steady state, from the
/// closed-form Bloch vector solution.
pub fn two_level_excited(rabi: f64, detuning: f64, gamma: f64) -> f64 {
    let s = rabi * rabi / 4.0;
    s / (detuning * detuning + rabi * rabi / 2.0 + gamma * gamma / 4.0)
}

pub fn two_level_generator(rabi: f64, detuning: f64, gamma: f64) -> Liouvillian {
    let g = Sublevel::s1(0).index();
    let e = Sublevel::P0.index();
    let mut h = Array2::<C64>::zeros((8, 8));
    h[[e, e]] = C64::from(-detuning);
    h[[e, g]] = C64::from(rabi / 2.0);
    h[[g, e]] = C64::from(rabi / 2.0);
    let mut c = Array2::<C64>::zeros((8, 8));
    c[[g, e]] = C64::from(1.0);
    Liouvillian::lindblad(&h, &[c], gamma)
}

/// Independent minimizer: fixed-step steepest descent on the total
/// potential, written without reference to the library's force code.
pub fn brute_force_chain(n: usize) -> Vec<f64> {
    let grad = |v: &[f64]| {
        let mut g: Vec<f64> = v.to_vec();
        for i in 0..v.len() {
            for j in 0..v.len() {
                if i != j {
                    let d = v[i] - v[j];
                    g[i] -= d / d.abs().powi(3);
                }
            }
        }
        g
    };
    let mut u: Vec<f64> = (0..n).map(|i| i as f64 - (n as f64 - 1.0) / 2.0).collect();
    for _ in 0..1_000_000 {
        let g = grad(&u);
        if g.iter().all(|x| x.abs() < 1e-13) {
            break;
        }
        u.iter_mut().zip(&g).for_each(|(x, d)| *x -= 0.005 * d);
    }
    u
}

/// Event-level simulation: photon arrivals generated one by one from
/// exponential gaps, the bright emission stopping at a random pump-out time.
pub fn sample_counts(p: &CountParameters, runs: usize, seed: u64) -> Vec<u32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let background = Poisson::new(p.background_mean.max(1e-300)).unwrap();
    let pump = Exp::new(p.pump_out_rate).unwrap();
    (0..runs)
        .map(|_| {
            let stop = pump.sample(&mut rng).min(p.duration);
            let mut n = if p.background_mean > 0.0 { background.sample(&mut rng) as u32 } else { 0 };
            let mut t = 0.0;
            loop {
                t += -(1.0 - rng.random::<f64>()).ln() / p.bright_rate;
                if t > stop {
                    break;
                }
                n += 1;
            }
            n
        })
        .collect()
}
