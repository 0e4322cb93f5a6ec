//! The ¹⁷¹Yb⁺ S₁/₂ – P₁/₂ hyperfine and Zeeman level scheme.
//!
//! With electron angular momentum J = 1/2 and nuclear spin I = 1/2 both the
//! ground and excited fine-structure levels split into F = 0 and F = 1,
//! giving eight sublevels. The basis order used throughout the crate is
//!
//! | index | level          |
//! |-------|----------------|
//! | 0     | S₁/₂ F=0 mF=0  |
//! | 1–3   | S₁/₂ F=1 mF=−1,0,+1 |
//! | 4     | P₁/₂ F=0 mF=0  |
//! | 5–7   | P₁/₂ F=1 mF=−1,0,+1 |
//!
//! Dipole amplitudes follow the standard spherical-tensor phase convention
//! (Wigner–Eckart theorem with the Condon–Shortley phase) and are scaled so
//! that every excited sublevel decays with total rate Γ.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::angular::{wigner_3j, wigner_6j};
use crate::config::{Bound, ConfigErrors, KvFile, KvReader};
use crate::error::{invalid, Result};
use crate::units::{angular, BOHR_MAGNETON, PLANCK};

/// Number of internal states in the model.
pub const N_LEVELS: usize = 8;

/// Fine-structure manifold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Manifold {
    /// 6s ²S₁/₂ ground state.
    S,
    /// 6p ²P₁/₂ excited state.
    P,
}

/// A hyperfine/Zeeman sublevel `|manifold, F, mF⟩`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Sublevel {
    pub manifold: Manifold,
    pub f: u8,
    pub mf: i8,
}

impl Sublevel {
    pub const S0: Sublevel = Sublevel::new(Manifold::S, 0, 0);
    pub const P0: Sublevel = Sublevel::new(Manifold::P, 0, 0);

    /// All eight sublevels in basis order.
    pub const ALL: [Sublevel; N_LEVELS] = [
        Sublevel::new(Manifold::S, 0, 0),
        Sublevel::new(Manifold::S, 1, -1),
        Sublevel::new(Manifold::S, 1, 0),
        Sublevel::new(Manifold::S, 1, 1),
        Sublevel::new(Manifold::P, 0, 0),
        Sublevel::new(Manifold::P, 1, -1),
        Sublevel::new(Manifold::P, 1, 0),
        Sublevel::new(Manifold::P, 1, 1),
    ];

    pub const fn new(manifold: Manifold, f: u8, mf: i8) -> Self {
        Sublevel { manifold, f, mf }
    }

    pub const fn s1(mf: i8) -> Self {
        Sublevel::new(Manifold::S, 1, mf)
    }

    pub const fn p1(mf: i8) -> Self {
        Sublevel::new(Manifold::P, 1, mf)
    }

    /// Validating constructor.
    pub fn try_new(manifold: Manifold, f: u8, mf: i8) -> Result<Self> {
        if f > 1 {
            return Err(invalid("F", format!("F must be 0 or 1, got {f}")));
        }
        if mf.unsigned_abs() > f {
            return Err(invalid("mF", format!("|mF| must not exceed F = {f}, got {mf}")));
        }
        Ok(Sublevel { manifold, f, mf })
    }

    /// Position in the 8-state basis.
    pub fn index(self) -> usize {
        let base = match self.manifold {
            Manifold::S => 0,
            Manifold::P => 4,
        };
        if self.f == 0 {
            base
        } else {
            (base as i64 + 2 + self.mf as i64) as usize
        }
    }

    pub fn from_index(i: usize) -> Sublevel {
        Sublevel::ALL[i]
    }

    pub fn is_excited(self) -> bool {
        self.manifold == Manifold::P
    }
}

impl fmt::Display for Sublevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let man = match self.manifold {
            Manifold::S => "S1/2",
            Manifold::P => "P1/2",
        };
        write!(f, "{man} F={} mF={:+}", self.f, self.mf)
    }
}

/// Parameters of the hyperfine and Zeeman structure. Frequencies are cyclic (Hz).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperfineConfig {
    /// S₁/₂ F=0 ↔ F=1 splitting.
    pub hfs_ground_hz: f64,
    /// P₁/₂ F=0 ↔ F=1 splitting (F=1 above F=0).
    pub hfs_excited_hz: f64,
    /// Natural linewidth Γ/2π of the P₁/₂ level.
    pub gamma_hz: f64,
    /// Magnetic field magnitude.
    pub b_field_tesla: f64,
    /// Landé factor of S₁/₂ F=1.
    pub g_ground_f1: f64,
    /// Landé factor of P₁/₂ F=1.
    pub g_excited_f1: f64,
}

impl Default for HyperfineConfig {
    fn default() -> Self {
        HyperfineConfig {
            hfs_ground_hz: 12.64e9,
            // calibration value; the P1/2 splitting enters only through the
            // ~15 GHz offset of the depumping transition
            hfs_excited_hz: 2.1e9,
            gamma_hz: 19.6e6,
            b_field_tesla: 1e-4,
            g_ground_f1: 1.0,
            g_excited_f1: 1.0 / 3.0,
        }
    }
}

impl HyperfineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma_hz > 0.0) || !self.gamma_hz.is_finite() {
            return Err(invalid("gamma_hz", format!("linewidth must be > 0, got {}", self.gamma_hz)));
        }
        if !(self.hfs_ground_hz > 0.0) {
            return Err(invalid("hfs_ground_hz", "splitting must be > 0"));
        }
        if !(self.hfs_excited_hz > 0.0) {
            return Err(invalid("hfs_excited_hz", "splitting must be > 0"));
        }
        if !(self.b_field_tesla >= 0.0) || !self.b_field_tesla.is_finite() {
            return Err(invalid(
                "b_field_tesla",
                format!("field must be >= 0, got {}", self.b_field_tesla),
            ));
        }
        Ok(())
    }

    /// Total spontaneous decay rate Γ in s⁻¹.
    pub fn gamma(&self) -> f64 {
        angular(self.gamma_hz)
    }

    /// Landé g_F for a (manifold, F) pair. F = 0 levels are unshifted.
    pub fn g_factor(&self, manifold: Manifold, f: u8) -> f64 {
        match (manifold, f) {
            (_, 0) => 0.0,
            (Manifold::S, _) => self.g_ground_f1,
            (Manifold::P, _) => self.g_excited_f1,
        }
    }

    /// Reads the config keys `gamma_hz`, `hfs_ground_hz`, `hfs_excited_hz`,
    /// `b_field_tesla`, `g_ground_f1` and `g_excited_f1`.
    pub fn read(reader: &mut KvReader<'_>) -> Self {
        let d = HyperfineConfig::default();
        HyperfineConfig {
            gamma_hz: reader.number("gamma_hz", d.gamma_hz, Bound::Positive),
            hfs_ground_hz: reader.number("hfs_ground_hz", d.hfs_ground_hz, Bound::Positive),
            hfs_excited_hz: reader.number("hfs_excited_hz", d.hfs_excited_hz, Bound::Positive),
            b_field_tesla: reader.number("b_field_tesla", d.b_field_tesla, Bound::NonNegative),
            g_ground_f1: reader.number("g_ground_f1", d.g_ground_f1, Bound::Any),
            g_excited_f1: reader.number("g_excited_f1", d.g_excited_f1, Bound::Any),
        }
    }

    /// Builds a config from a key-value file, rejecting unknown keys.
    pub fn from_kv(file: &KvFile) -> std::result::Result<Self, ConfigErrors> {
        let mut reader = KvReader::new(file);
        let cfg = Self::read(&mut reader);
        reader.finish(true)?;
        Ok(cfg)
    }
}

/// Linear Zeeman shift g_F·mF·μ_B·B/h of a sublevel, in Hz.
pub fn zeeman_shift(sub: Sublevel, cfg: &HyperfineConfig) -> f64 {
    cfg.g_factor(sub.manifold, sub.f) * sub.mf as f64 * BOHR_MAGNETON * cfg.b_field_tesla / PLANCK
}

/// Spherical components `(c₋₁, c₀, c₊₁)` of light linearly polarized at angle
/// `alpha` (radians) to the magnetic field.
///
/// `c_q` multiplies the dipole component that raises mF by `q` on absorption.
/// The polarization vector is taken in the plane spanned by B and x̂.
pub fn polarization_components(alpha: f64) -> [f64; 3] {
    let (s, c) = alpha.sin_cos();
    let t = s / std::f64::consts::SQRT_2;
    [t, c, -t]
}

/// One spontaneous decay path `excited → ground` emitting polarization `q`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayChannel {
    pub excited: Sublevel,
    pub ground: Sublevel,
    /// mF(excited) − mF(ground).
    pub q: i8,
    /// Partial rate in s⁻¹.
    pub rate: f64,
}

/// The complete eight-level scheme.
#[derive(Debug, Clone)]
pub struct LevelScheme {
    config: HyperfineConfig,
    /// Angular energy of each sublevel relative to the F=0 level of its
    /// manifold, Zeeman shift included.
    energies: [f64; N_LEVELS],
    /// `dipole[e][g][q + 1]`, dimensionless; Σ_{g,q} |d|² = 1 for every excited e.
    dipole: [[[f64; 3]; 4]; 4],
    channels: Vec<DecayChannel>,
}

/// Unnormalized ⟨J'=1/2 I F' m'| d_q |J=1/2 I F m⟩ / ⟨J'‖d‖J⟩.
fn coupling(excited: Sublevel, ground: Sublevel, q: i8) -> f64 {
    let (tfp, tmp) = (2 * excited.f as i32, 2 * excited.mf as i32);
    let (tf, tm) = (2 * ground.f as i32, 2 * ground.mf as i32);
    if excited.mf - ground.mf != q {
        return 0.0;
    }
    // J = J' = I = 1/2 (doubled: 1)
    let reduced = {
        let phase = if ((1 + 1 + tf + 2) / 2) % 2 == 0 { 1.0 } else { -1.0 };
        phase * (((tf + 1) * (tfp + 1)) as f64).sqrt() * wigner_6j(1, tfp, 1, tf, 1, 2)
    };
    let phase = if ((tfp - tmp) / 2).rem_euclid(2) == 0 { 1.0 } else { -1.0 };
    phase * wigner_3j(tfp, 2, tf, -tmp, 2 * q as i32, tm) * reduced
}

impl LevelScheme {
    /// Assembles energies, dipole amplitudes and decay channels.
    pub fn build(cfg: &HyperfineConfig) -> Result<Self> {
        cfg.validate()?;
        let mut energies = [0.0; N_LEVELS];
        for sub in Sublevel::ALL {
            let hfs = match (sub.manifold, sub.f) {
                (_, 0) => 0.0,
                (Manifold::S, _) => cfg.hfs_ground_hz,
                (Manifold::P, _) => cfg.hfs_excited_hz,
            };
            energies[sub.index()] = angular(hfs + zeeman_shift(sub, cfg));
        }

        let mut dipole = [[[0.0; 3]; 4]; 4];
        for (ei, e) in Sublevel::ALL[4..].iter().enumerate() {
            for (gi, g) in Sublevel::ALL[..4].iter().enumerate() {
                for (qi, q) in [-1i8, 0, 1].into_iter().enumerate() {
                    dipole[ei][gi][qi] = coupling(*e, *g, q);
                }
            }
        }
        // Scale so each excited sublevel has unit total strength; the
        // raw sums are identical (1/(2J'+1)) for every excited sublevel.
        for row in dipole.iter_mut() {
            let total: f64 = row.iter().flatten().map(|d| d * d).sum();
            let scale = total.sqrt().recip();
            row.iter_mut().flatten().for_each(|d| *d *= scale);
        }

        let gamma = cfg.gamma();
        let mut channels = Vec::new();
        for (ei, e) in Sublevel::ALL[4..].iter().enumerate() {
            for (gi, g) in Sublevel::ALL[..4].iter().enumerate() {
                for (qi, q) in [-1i8, 0, 1].into_iter().enumerate() {
                    let d = dipole[ei][gi][qi];
                    if d != 0.0 {
                        channels.push(DecayChannel {
                            excited: *e,
                            ground: *g,
                            q,
                            rate: gamma * d * d,
                        });
                    }
                }
            }
        }

        Ok(LevelScheme {
            config: *cfg,
            energies,
            dipole,
            channels,
        })
    }

    pub fn config(&self) -> &HyperfineConfig {
        &self.config
    }

    /// Total decay rate Γ (s⁻¹).
    pub fn gamma(&self) -> f64 {
        self.config.gamma()
    }

    /// Angular energy of `sub` relative to the F=0 level of its manifold.
    pub fn energy(&self, sub: Sublevel) -> f64 {
        self.energies[sub.index()]
    }

    /// Dimensionless dipole amplitude for absorption `ground → excited` with
    /// polarization component `q`.
    pub fn dipole(&self, excited: Sublevel, ground: Sublevel, q: i8) -> f64 {
        assert!(excited.is_excited() && !ground.is_excited(), "dipole(excited, ground, q)");
        assert!((-1..=1).contains(&q));
        self.dipole[excited.index() - 4][ground.index()][(q + 1) as usize]
    }

    pub fn decay_channels(&self) -> &[DecayChannel] {
        &self.channels
    }

    /// Channels leaving one excited sublevel.
    pub fn channels_from(&self, excited: Sublevel) -> impl Iterator<Item = &DecayChannel> {
        self.channels.iter().filter(move |c| c.excited == excited)
    }

    /// Summed decay rate from `excited` into all sublevels of ground
    /// hyperfine level `f`.
    pub fn branching_rate(&self, excited: Sublevel, f: u8) -> f64 {
        self.channels_from(excited)
            .filter(|c| c.ground.f == f)
            .map(|c| c.rate)
            .sum()
    }
}

/// Shorthand for [`LevelScheme::build`].
pub fn build_scheme(cfg: &HyperfineConfig) -> Result<LevelScheme> {
    LevelScheme::build(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scheme() -> LevelScheme {
        build_scheme(&HyperfineConfig::default()).unwrap()
    }

    #[test]
    fn indices_round_trip() {
        for (i, s) in Sublevel::ALL.iter().enumerate() {
            assert_eq!(s.index(), i);
            assert_eq!(Sublevel::from_index(i), *s);
        }
    }

    #[test]
    fn rejects_invalid_sublevels() {
        assert!(Sublevel::try_new(Manifold::S, 0, 1).is_err());
        assert!(Sublevel::try_new(Manifold::P, 2, 0).is_err());
        assert!(Sublevel::try_new(Manifold::P, 1, -1).is_ok());
    }

    #[test]
    fn f0_to_f0_forbidden() {
        let s = scheme();
        for q in -1..=1 {
            assert_eq!(s.dipole(Sublevel::P0, Sublevel::S0, q), 0.0);
        }
    }

    #[test]
    fn clock_to_clock_forbidden_for_pi() {
        let s = scheme();
        assert_eq!(s.dipole(Sublevel::p1(0), Sublevel::s1(0), 0), 0.0);
    }

    #[test]
    fn selection_rule_zeros_are_exact() {
        let s = scheme();
        for e in &Sublevel::ALL[4..] {
            for g in &Sublevel::ALL[..4] {
                for q in -1i8..=1 {
                    if e.mf - g.mf != q {
                        assert_eq!(s.dipole(*e, *g, q), 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn each_excited_sublevel_decays_at_gamma() {
        let s = scheme();
        for e in &Sublevel::ALL[4..] {
            let total: f64 = s.channels_from(*e).map(|c| c.rate).sum();
            assert!((total / s.gamma() - 1.0).abs() < 1e-12, "{e}: {total}");
        }
    }

    #[test]
    fn p_f1_branches_two_to_one() {
        let s = scheme();
        for mf in -1..=1 {
            let e = Sublevel::p1(mf);
            let ratio = s.branching_rate(e, 1) / s.branching_rate(e, 0);
            assert!((ratio - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn p_f0_decays_only_to_s_f1_in_thirds() {
        let s = scheme();
        let chans: Vec<_> = s.channels_from(Sublevel::P0).collect();
        assert_eq!(chans.len(), 3);
        for c in chans {
            assert_eq!(c.ground.f, 1);
            assert!((c.rate / s.gamma() - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zeeman_shifts() {
        let mut cfg = HyperfineConfig::default();
        cfg.b_field_tesla = 0.0;
        for sub in Sublevel::ALL {
            assert_eq!(zeeman_shift(sub, &cfg), 0.0);
        }
        cfg.b_field_tesla = 1e-4;
        assert_eq!(zeeman_shift(Sublevel::s1(0), &cfg), 0.0);
        let shift = zeeman_shift(Sublevel::s1(1), &cfg);
        // mu_B / h = 13.996 GHz/T
        assert!((shift - 1.3996e6).abs() < 1e2, "{shift}");
    }

    #[test]
    fn polarization_limits() {
        let pi = polarization_components(0.0);
        assert_eq!(pi, [0.0, 1.0, 0.0]);
        let sigma = polarization_components(std::f64::consts::FRAC_PI_2);
        assert!((sigma[0] - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert!(sigma[1].abs() < 1e-15);
        assert!((sigma[2] + std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn config_validation() {
        let bad = HyperfineConfig {
            gamma_hz: 0.0,
            ..Default::default()
        };
        assert!(build_scheme(&bad).is_err());
        let bad = HyperfineConfig {
            b_field_tesla: -1e-4,
            ..Default::default()
        };
        assert!(build_scheme(&bad).is_err());
    }

    #[test]
    fn config_from_kv_names_bad_key() {
        let kv = KvFile::parse("b_field_tesla = -1\ngamma_hz = 20e6").unwrap();
        let err = HyperfineConfig::from_kv(&kv).unwrap_err();
        assert_eq!(err.0.len(), 1);
        assert_eq!(err.0[0].key, "b_field_tesla");
        assert!(err.0[0].message.contains(">= 0"));
    }
}
