//! Optical Bloch equations for the eight-level ion.
//!
//! The Hamiltonian is written in a frame rotating with the drives, the
//! generator `L` acts on column-stacked density matrices (`vec(ρ)[i + 8j] =
//! ρᵢⱼ`) and is stored in units of the natural linewidth Γ, so one unit of
//! generator time is 1/Γ.
//!
//! Time evolution diagonalises the generator once, in a real basis of
//! Hermitian matrices (identity first). In that basis trace and hermiticity
//! are preserved by construction and the spectral propagator
//! `V·exp(Λt)·V⁻¹` can be evaluated at any time for the cost of a
//! matrix–vector product.

use std::f64::consts::FRAC_1_SQRT_2;
use std::sync::OnceLock;

use ndarray::{s, Array1, Array2, Axis};
use num_complex::Complex64 as C64;

use crate::atomic::{polarization_components, LevelScheme, Manifold, Sublevel, N_LEVELS};
use crate::error::{invalid, Error, Result};
use crate::linalg;

const DIM: usize = N_LEVELS * N_LEVELS;

/// Singular values / eigenvalues of the generator (units of Γ) below this are
/// treated as exact zeros. Pumping rates slower than 1e-10·Γ are therefore
/// indistinguishable from stationarity.
pub const NULL_TOLERANCE: f64 = 1e-10;

/// Eigenvector matrices with a larger condition number are treated as
/// defective and evolution switches to exponential step doubling.
pub const MAX_EIGENVECTOR_CONDITION: f64 = 1e8;

/// Relative tolerance of the step-doubling fallback.
pub const STEP_DOUBLING_TOLERANCE: f64 = 1e-9;

/// Which optical transition defines zero detuning.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum OpticalReference {
    /// S₁/₂ F=1 ↔ P₁/₂ F=0, the cooling/detection transition.
    F1ToF0,
    /// S₁/₂ F=1 ↔ P₁/₂ F=1, resonant optical pumping into F=0.
    F1ToF1,
    /// S₁/₂ F=0 ↔ P₁/₂ F=1.
    F0ToF1,
}

impl OpticalReference {
    fn levels(self) -> (Sublevel, Sublevel) {
        match self {
            OpticalReference::F1ToF0 => (Sublevel::s1(0), Sublevel::P0),
            OpticalReference::F1ToF1 => (Sublevel::s1(0), Sublevel::p1(0)),
            OpticalReference::F0ToF1 => (Sublevel::S0, Sublevel::p1(0)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum DriveKind {
    /// 369 nm light, linearly polarized at `alpha` radians to B.
    Optical {
        alpha: f64,
        reference: OpticalReference,
    },
    /// 12.64 GHz radiation on the S₁/₂ F=0 mF=0 ↔ F=1 mF=0 clock transition.
    Microwave,
}

/// A single coherent drive. Rabi frequency and detuning are angular (rad/s);
/// the detuning is drive frequency minus reference transition frequency.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DriveField {
    pub kind: DriveKind,
    pub rabi: f64,
    pub detuning: f64,
}

impl DriveField {
    pub fn optical(rabi: f64, detuning: f64, alpha: f64, reference: OpticalReference) -> Self {
        DriveField {
            kind: DriveKind::Optical { alpha, reference },
            rabi,
            detuning,
        }
    }

    pub fn microwave(rabi: f64, detuning: f64) -> Self {
        DriveField {
            kind: DriveKind::Microwave,
            rabi,
            detuning,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.rabi >= 0.0) || !self.rabi.is_finite() {
            return Err(invalid("rabi", format!("Rabi frequency must be >= 0, got {}", self.rabi)));
        }
        if !self.detuning.is_finite() {
            return Err(invalid("detuning", "must be finite"));
        }
        if let DriveKind::Optical { alpha, .. } = self.kind {
            if !alpha.is_finite() {
                return Err(invalid("alpha", "must be finite"));
            }
        }
        Ok(())
    }
}

/// Rotating-frame Hamiltonian (rad/s) for at most one optical and one
/// microwave drive.
///
/// Ground sublevels sit at their energy relative to the S₁/₂ F=1 centroid;
/// excited sublevels are shifted so the optical reference transition appears
/// at detuning −δ. The other hyperfine transitions therefore show up as large
/// static offsets, e.g. S F=0 ↔ P F=1 at ω_hfs(S) + ω_hfs(P) when the light is
/// tuned to S F=1 ↔ P F=0.
///
/// With a microwave present, S₁/₂ F=0 rotates with the microwave instead and
/// its optical coupling (whose phase would then rotate at the microwave
/// frequency) is dropped; the optical reference must not start from F=0.
pub fn hamiltonian(scheme: &LevelScheme, drives: &[DriveField]) -> Result<Array2<C64>> {
    let mut optical = None;
    let mut microwave = None;
    for d in drives {
        d.validate()?;
        match d.kind {
            DriveKind::Optical { .. } => {
                if optical.replace(*d).is_some() {
                    return Err(Error::Drive(
                        "two optical drives on the S1/2-P1/2 manifold pair".into(),
                    ));
                }
            }
            DriveKind::Microwave => {
                if microwave.replace(*d).is_some() {
                    return Err(Error::Drive("two microwave drives on the S1/2 clock transition".into()));
                }
            }
        }
    }

    let ground_centre = scheme.energy(Sublevel::s1(0));
    let mut h = Array2::<C64>::zeros((N_LEVELS, N_LEVELS));
    for sub in Sublevel::ALL.iter().take(4) {
        h[[sub.index(), sub.index()]] = C64::from(scheme.energy(*sub) - ground_centre);
    }
    if let Some(mw) = microwave {
        h[[0, 0]] = C64::from(mw.detuning);
        let clock = Sublevel::s1(0).index();
        h[[clock, 0]] = C64::from(mw.rabi / 2.0);
        h[[0, clock]] = C64::from(mw.rabi / 2.0);
    }

    if let Some(opt) = optical {
        let DriveKind::Optical { alpha, reference } = opt.kind else {
            unreachable!()
        };
        let (g_ref, e_ref) = reference.levels();
        if microwave.is_some() && g_ref.f == 0 {
            return Err(Error::Drive(
                "optical reference from S F=0 cannot be combined with a microwave drive".into(),
            ));
        }
        // frame offset applied to every excited sublevel
        let offset = scheme.energy(e_ref) - (scheme.energy(g_ref) - ground_centre) + opt.detuning;
        for sub in Sublevel::ALL.iter().skip(4) {
            h[[sub.index(), sub.index()]] = C64::from(scheme.energy(*sub) - offset);
        }
        let c = polarization_components(alpha);
        for e in Sublevel::ALL.iter().skip(4) {
            for g in Sublevel::ALL.iter().take(4) {
                if microwave.is_some() && g.f == 0 {
                    continue;
                }
                let amp: f64 = (-1i8..=1)
                    .map(|q| c[(q + 1) as usize] * scheme.dipole(*e, *g, q))
                    .sum();
                if amp != 0.0 {
                    let v = C64::from(opt.rabi / 2.0 * amp);
                    h[[e.index(), g.index()]] += v;
                    h[[g.index(), e.index()]] += v.conj();
                }
            }
        }
    } else {
        // no light: excited levels carry their bare hyperfine/Zeeman offsets
        for sub in Sublevel::ALL.iter().skip(4) {
            h[[sub.index(), sub.index()]] = C64::from(scheme.energy(*sub));
        }
    }
    Ok(h)
}

/// Frame offset (rad/s) of the S F=0 ↔ P F=1 mF=0 coupling in `h`.
pub fn depumping_offset(h: &Array2<C64>) -> f64 {
    (h[[Sublevel::p1(0).index(), Sublevel::p1(0).index()]] - h[[0, 0]]).re
}

/// 8×8 density matrix in the [`Sublevel`] basis.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(Array2<C64>);

/// Tolerances of the density-matrix invariants.
pub const HERMITICITY_TOLERANCE: f64 = 1e-12;
pub const TRACE_TOLERANCE: f64 = 1e-12;
pub const POSITIVITY_TOLERANCE: f64 = 1e-10;

impl DensityMatrix {
    pub fn pure(sub: Sublevel) -> Self {
        let mut m = Array2::zeros((N_LEVELS, N_LEVELS));
        m[[sub.index(), sub.index()]] = C64::from(1.0);
        DensityMatrix(m)
    }

    /// Incoherent mixture; weights are normalized.
    pub fn mixture(parts: &[(Sublevel, f64)]) -> Result<Self> {
        let total: f64 = parts.iter().map(|p| p.1).sum();
        if parts.iter().any(|p| p.1 < 0.0) || !(total > 0.0) {
            return Err(invalid("weights", "mixture weights must be >= 0 with a positive sum"));
        }
        let mut m = Array2::zeros((N_LEVELS, N_LEVELS));
        for (sub, w) in parts {
            m[[sub.index(), sub.index()]] += C64::from(w / total);
        }
        Ok(DensityMatrix(m))
    }

    /// Equal mixture of the three S₁/₂ F=1 sublevels.
    pub fn ground_f1_mixture() -> Self {
        Self::mixture(&[(Sublevel::s1(-1), 1.0), (Sublevel::s1(0), 1.0), (Sublevel::s1(1), 1.0)])
            .unwrap()
    }

    pub fn maximally_mixed() -> Self {
        DensityMatrix(Array2::eye(N_LEVELS).mapv(|x: f64| C64::from(x / N_LEVELS as f64)))
    }

    /// Wraps a matrix after checking every invariant.
    pub fn from_matrix(m: Array2<C64>) -> Result<Self> {
        if m.dim() != (N_LEVELS, N_LEVELS) {
            return Err(invalid("rho", format!("expected 8x8, got {:?}", m.dim())));
        }
        let rho = DensityMatrix(m);
        rho.check()?;
        Ok(rho)
    }

    /// Wraps a matrix without validation.
    pub fn from_matrix_unchecked(m: Array2<C64>) -> Self {
        DensityMatrix(m)
    }

    pub fn matrix(&self) -> &Array2<C64> {
        &self.0
    }

    pub fn trace(&self) -> C64 {
        self.0.diag().sum()
    }

    /// Largest |ρᵢⱼ − ρⱼᵢ*|.
    pub fn hermiticity_error(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..N_LEVELS {
            for j in 0..N_LEVELS {
                worst = worst.max((self.0[[i, j]] - self.0[[j, i]].conj()).norm());
            }
        }
        worst
    }

    /// Smallest eigenvalue of the Hermitian part.
    pub fn min_eigenvalue(&self) -> f64 {
        let herm = (&self.0 + &self.0.t().mapv(|z| z.conj())).mapv(|z| z * 0.5);
        linalg::eigvalsh(&herm)
            .map(|w| w[0])
            .unwrap_or(f64::NAN)
    }

    /// Verifies trace, hermiticity and positivity at the crate tolerances.
    pub fn check(&self) -> Result<()> {
        let tr = self.trace();
        let dev = (tr - C64::from(1.0)).norm();
        if !(dev <= TRACE_TOLERANCE) {
            return Err(Error::InvalidState {
                property: "unit trace",
                deviation: dev,
            });
        }
        let herm = self.hermiticity_error();
        if !(herm <= HERMITICITY_TOLERANCE) {
            return Err(Error::InvalidState {
                property: "hermiticity",
                deviation: herm,
            });
        }
        let min = self.min_eigenvalue();
        if !(min >= -POSITIVITY_TOLERANCE) {
            return Err(Error::InvalidState {
                property: "positivity",
                deviation: -min,
            });
        }
        Ok(())
    }

    pub fn population(&self, sub: Sublevel) -> f64 {
        self.0[[sub.index(), sub.index()]].re
    }

    pub fn populations(&self) -> [f64; N_LEVELS] {
        std::array::from_fn(|i| self.0[[i, i]].re)
    }

    /// Summed population of a manifold, optionally restricted to one F.
    pub fn manifold_population(&self, manifold: Manifold, f: Option<u8>) -> f64 {
        Sublevel::ALL
            .iter()
            .filter(|s| s.manifold == manifold && f.is_none_or(|f| s.f == f))
            .map(|s| self.population(*s))
            .sum()
    }

    /// ½‖ρ − σ‖₁.
    pub fn trace_distance(&self, other: &DensityMatrix) -> f64 {
        let diff = &self.0 - &other.0;
        let herm = (&diff + &diff.t().mapv(|z| z.conj())).mapv(|z| z * 0.5);
        linalg::eigvalsh(&herm)
            .map(|w| 0.5 * w.iter().map(|x| x.abs()).sum::<f64>())
            .unwrap_or(f64::NAN)
    }

    pub fn vectorize(&self) -> Array1<C64> {
        vec_of(&self.0)
    }
}

fn vec_of(m: &Array2<C64>) -> Array1<C64> {
    // column stacking
    Array1::from_iter(m.t().iter().copied())
}

fn unvec(v: &Array1<C64>) -> Array2<C64> {
    Array2::from_shape_fn((N_LEVELS, N_LEVELS), |(i, j)| v[i + N_LEVELS * j])
}

/// Orthonormal Hermitian basis (identity/√8 first, then the generalized
/// Gell-Mann matrices), as columns of vectorized matrices.
fn hermitian_basis() -> Array2<C64> {
    let n = N_LEVELS;
    let mut mats: Vec<Array2<C64>> = Vec::with_capacity(DIM);
    mats.push(Array2::eye(n).mapv(|x: f64| C64::from(x / (n as f64).sqrt())));
    for d in 1..n {
        let norm = ((d * (d + 1)) as f64).sqrt();
        let mut m = Array2::zeros((n, n));
        for k in 0..d {
            m[[k, k]] = C64::from(1.0 / norm);
        }
        m[[d, d]] = C64::from(-(d as f64) / norm);
        mats.push(m);
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let mut sym = Array2::zeros((n, n));
            sym[[i, j]] = C64::from(FRAC_1_SQRT_2);
            sym[[j, i]] = C64::from(FRAC_1_SQRT_2);
            mats.push(sym);
            let mut anti = Array2::zeros((n, n));
            anti[[i, j]] = C64::new(0.0, -FRAC_1_SQRT_2);
            anti[[j, i]] = C64::new(0.0, FRAC_1_SQRT_2);
            mats.push(anti);
        }
    }
    let mut basis = Array2::zeros((DIM, DIM));
    for (k, m) in mats.iter().enumerate() {
        basis.column_mut(k).assign(&vec_of(m));
    }
    basis
}

fn basis() -> &'static Array2<C64> {
    static BASIS: OnceLock<Array2<C64>> = OnceLock::new();
    BASIS.get_or_init(hermitian_basis)
}

/// How a trajectory was computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum EvolutionMethod {
    /// Cached eigendecomposition of the generator.
    Spectral,
    /// Adaptive step doubling with matrix-exponential steps.
    StepDoubling,
}

/// Eigendecomposition of the generator in the Hermitian basis.
#[derive(Debug)]
struct Spectral {
    values: Array1<C64>,
    vectors: Array2<C64>,
    inverse: Array2<C64>,
}

/// Lindblad generator for the eight-level system.
#[derive(Debug)]
pub struct Liouvillian {
    /// 64×64 generator on column-stacked ρ, in units of Γ.
    matrix: Array2<C64>,
    /// Same generator as a real matrix on Hermitian-basis coordinates.
    real: Array2<f64>,
    gamma: f64,
    spectral: OnceLock<Option<Spectral>>,
}

/// Builds `L = −i[H,·] + Σ_q D[C_q]` with one jump operator per emitted
/// polarization `q`, `C_q = √Γ Σ d[e][g][q] |g⟩⟨e|`.
pub fn liouvillian(h: &Array2<C64>, scheme: &LevelScheme) -> Liouvillian {
    let jumps: Vec<Array2<C64>> = (-1i8..=1)
        .map(|q| {
            let mut c = Array2::<C64>::zeros((N_LEVELS, N_LEVELS));
            for e in Sublevel::ALL.iter().skip(4) {
                for g in Sublevel::ALL.iter().take(4) {
                    c[[g.index(), e.index()]] = C64::from(scheme.dipole(*e, *g, q));
                }
            }
            c
        })
        .collect();
    Liouvillian::lindblad(h, &jumps, scheme.gamma())
}

fn kron(a: &Array2<C64>, b: &Array2<C64>) -> Array2<C64> {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    let mut out = Array2::zeros((ar * br, ac * bc));
    for i in 0..ar {
        for j in 0..ac {
            let aij = a[[i, j]];
            if aij == C64::from(0.0) {
                continue;
            }
            out.slice_mut(s![i * br..(i + 1) * br, j * bc..(j + 1) * bc])
                .assign(&b.mapv(|z| z * aij));
        }
    }
    out
}

impl Liouvillian {
    /// Generic Lindblad generator on the eight-state space. `h` is in rad/s;
    /// jump operators are dimensionless and multiplied by `√gamma`.
    pub fn lindblad(h: &Array2<C64>, jumps: &[Array2<C64>], gamma: f64) -> Liouvillian {
        let n = N_LEVELS;
        let hs = h.mapv(|z| z / gamma);
        let eye = Array2::<C64>::eye(n);
        let mut l = (kron(&eye, &hs) - kron(&hs.t().to_owned(), &eye)).mapv(|z| z * C64::new(0.0, -1.0));
        for c in jumps {
            let cdc = c.t().mapv(|z| z.conj()).dot(c);
            l = l + kron(&c.mapv(|z| z.conj()), c)
                - kron(&eye, &cdc).mapv(|z| z * 0.5)
                - kron(&cdc.t().to_owned(), &eye).mapv(|z| z * 0.5);
        }
        Liouvillian::from_matrix(l, gamma)
    }

    /// Wraps a generator given in units of `gamma`.
    pub fn from_matrix(matrix: Array2<C64>, gamma: f64) -> Self {
        let b = basis();
        let bh = b.t().mapv(|z| z.conj());
        let mut real = bh.dot(&matrix).dot(b).mapv(|z| z.re);
        // the identity coordinate is conserved
        real.row_mut(0).fill(0.0);
        Liouvillian {
            matrix,
            real,
            gamma,
            spectral: OnceLock::new(),
        }
    }

    /// Generator in units of Γ.
    pub fn matrix(&self) -> &Array2<C64> {
        &self.matrix
    }

    /// Γ in s⁻¹; multiply generator eigenvalues by this for physical rates.
    pub fn rate_unit(&self) -> f64 {
        self.gamma
    }

    /// `L ρ` in units of Γ.
    pub fn apply(&self, rho: &Array2<C64>) -> Array2<C64> {
        unvec(&self.matrix.dot(&vec_of(rho)))
    }

    /// Largest |tr(L X)| over the basis matrices X = |i⟩⟨j|.
    pub fn trace_residual(&self) -> f64 {
        let mut worst = 0.0f64;
        for col in 0..DIM {
            let mut t = C64::from(0.0);
            for i in 0..N_LEVELS {
                t += self.matrix[[i + N_LEVELS * i, col]];
            }
            worst = worst.max(t.norm());
        }
        worst
    }

    fn spectral(&self) -> Option<&Spectral> {
        self.spectral
            .get_or_init(|| {
                let (mut values, mut vectors) = linalg::eig(&self.real).ok()?;
                // The zero mode sits within a tiny gap of the slow pumping
                // modes, which leaks it into their eigenvectors. When it is
                // unique, swap in the direct null-space solution and strip
                // the leaked part: decaying modes are traceless, so their
                // identity coordinate measures the contamination.
                let zeros: Vec<usize> = (0..values.len()).filter(|&k| values[k].norm() < NULL_TOLERANCE).collect();
                if let [k] = zeros[..] {
                    let z = Self::coords(&unique_stationary(&self.matrix));
                    vectors.column_mut(k).assign(&z.mapv(C64::from));
                    values[k] = C64::from(0.0);
                    for j in (0..values.len()).filter(|&j| j != k) {
                        let leak = vectors[[0, j]] / z[0];
                        let fixed = &vectors.column(j) - &z.mapv(|x| leak * x);
                        vectors.column_mut(j).assign(&fixed);
                    }
                }
                let inverse = linalg::inv(&vectors);
                let cond = linalg::norm_l1(&vectors) * linalg::norm_l1(&inverse);
                if !cond.is_finite() || cond > MAX_EIGENVECTOR_CONDITION {
                    return None;
                }
                for v in values.iter_mut() {
                    // exact physics: Re(λ) <= 0; round-off near zero removed
                    if v.re > 0.0 || v.re.abs() < 1e-12 {
                        v.re = 0.0;
                    }
                }
                Some(Spectral {
                    values,
                    vectors,
                    inverse,
                })
            })
            .as_ref()
    }

    /// Method [`evolve`] will use for this generator.
    pub fn evolution_method(&self) -> EvolutionMethod {
        if self.spectral().is_some() {
            EvolutionMethod::Spectral
        } else {
            EvolutionMethod::StepDoubling
        }
    }

    fn coords(rho: &DensityMatrix) -> Array1<f64> {
        basis()
            .t()
            .mapv(|z| z.conj())
            .dot(&rho.vectorize())
            .mapv(|z| z.re)
    }

    fn from_coords(z: &Array1<f64>) -> DensityMatrix {
        let mut z = z.clone();
        z[0] = 1.0 / (N_LEVELS as f64).sqrt();
        let v = basis().dot(&z.mapv(C64::from));
        DensityMatrix(unvec(&v))
    }

    /// States at the requested times (seconds) starting from `rho0` at t = 0.
    pub fn evolve_at(
        &self,
        rho0: &DensityMatrix,
        times: &[f64],
        method: Option<EvolutionMethod>,
    ) -> Result<Trajectory> {
        if times.iter().any(|t| !(*t >= 0.0)) {
            return Err(invalid("t", "evolution times must be >= 0"));
        }
        let method = method.unwrap_or_else(|| self.evolution_method());
        let z0 = Self::coords(rho0);
        let states = match method {
            EvolutionMethod::Spectral => {
                let sp = self
                    .spectral()
                    .ok_or_else(|| Error::Linalg("generator has no usable eigendecomposition".into()))?;
                let c = sp.inverse.dot(&z0.mapv(C64::from));
                times
                    .iter()
                    .map(|&t| {
                        let tau = t * self.gamma;
                        let w = Array1::from_shape_fn(c.len(), |k| c[k] * (sp.values[k] * tau).exp());
                        Self::from_coords(&sp.vectors.dot(&w).mapv(|z| z.re))
                    })
                    .collect()
            }
            EvolutionMethod::StepDoubling => {
                let mut order: Vec<usize> = (0..times.len()).collect();
                order.sort_by(|a, b| times[*a].total_cmp(&times[*b]));
                let mut out = vec![DensityMatrix::maximally_mixed(); times.len()];
                let mut z = z0;
                let mut now = 0.0;
                let mut step = 1.0;
                for idx in order {
                    let target = times[idx] * self.gamma;
                    z = self.step_doubling(z, target - now, &mut step);
                    now = target;
                    out[idx] = Self::from_coords(&z);
                }
                out
            }
        };
        Ok(Trajectory {
            times: times.to_vec(),
            states,
            method,
        })
    }

    /// Advances coordinates by `span` (units of 1/Γ) with step-doubling error
    /// control on exponential steps.
    fn step_doubling(&self, mut z: Array1<f64>, span: f64, step: &mut f64) -> Array1<f64> {
        let mut left = span;
        while left > 0.0 {
            let h = step.min(left);
            let full = expm(&self.real.mapv(|x| x * h));
            let half = expm(&self.real.mapv(|x| x * h / 2.0));
            let one = full.dot(&z);
            let two = half.dot(&half.dot(&z));
            let err = (&one - &two).iter().map(|x| x.abs()).fold(0.0, f64::max);
            let scale = two.iter().map(|x| x.abs()).fold(0.0, f64::max).max(1e-300);
            if err <= STEP_DOUBLING_TOLERANCE * scale {
                z = two;
                left -= h;
                if err < 0.1 * STEP_DOUBLING_TOLERANCE * scale {
                    *step = h * 2.0;
                }
            } else {
                *step = h / 2.0;
            }
        }
        z
    }

    /// Propagates an arbitrary Hermitian operator (not necessarily of unit
    /// trace) by `t` seconds.
    pub fn propagate_operator(&self, x: &Array2<C64>, t: f64) -> Array2<C64> {
        let z0 = basis().t().mapv(|z| z.conj()).dot(&vec_of(x)).mapv(|z| z.re);
        let tau = t * self.gamma;
        let z = match self.spectral() {
            Some(sp) => {
                let c = sp.inverse.dot(&z0.mapv(C64::from));
                let w = Array1::from_shape_fn(c.len(), |k| c[k] * (sp.values[k] * tau).exp());
                sp.vectors.dot(&w).mapv(|z| z.re)
            }
            None => {
                let mut step = 1.0;
                self.step_doubling(z0, tau, &mut step)
            }
        };
        unvec(&basis().dot(&z.mapv(C64::from)))
    }

    /// `∫₀^∞ (ρ(t) − ρ∞) dt` in seconds, for a unique stationary state
    /// `rho_inf`. Solved as `L X = −(ρ₀ − ρ∞)` with `tr X = 0`.
    pub fn integrated_deviation(&self, rho0: &DensityMatrix, rho_inf: &DensityMatrix) -> Result<Array2<C64>> {
        let mut a = Array2::<C64>::zeros((DIM + 1, DIM));
        a.slice_mut(s![..DIM, ..]).assign(&self.matrix);
        for i in 0..N_LEVELS {
            a[[DIM, i + N_LEVELS * i]] = C64::from(1.0);
        }
        let mut b = Array1::<C64>::zeros(DIM + 1);
        let dev = rho_inf.vectorize() - rho0.vectorize();
        b.slice_mut(s![..DIM]).assign(&dev);
        let x = linalg::lstsq(&a, &b);
        Ok(unvec(&x).mapv(|z| z / self.gamma))
    }

    /// Long-time limit from `rho0`: the component of the initial state along
    /// the generator's zero modes. Undamped oscillating coherences average
    /// out and are dropped.
    ///
    /// Zero is a semisimple eigenvalue of any Lindblad generator, so the
    /// limit is the oblique projection `N (MᵀN)⁻¹ Mᵀ` built from the right
    /// (`N`) and left (`M`) null vectors.
    pub fn asymptotic_state(&self, rho0: &DensityMatrix) -> Result<DensityMatrix> {
        let z0 = Self::coords(rho0);
        let (u, sv, vt) = linalg::svd(&self.real)?;
        let null: Vec<usize> = (0..sv.len()).filter(|&k| sv[k] < NULL_TOLERANCE).collect();
        if null.is_empty() {
            return Err(Error::Linalg("generator has no stationary state".into()));
        }
        let right = Array2::from_shape_fn((DIM, null.len()), |(i, k)| vt[[null[k], i]]);
        let left = Array2::from_shape_fn((DIM, null.len()), |(i, k)| u[[i, null[k]]]);
        let overlap = linalg::inv(&left.t().dot(&right).mapv(C64::from)).mapv(|z| z.re);
        let z = right.dot(&overlap.dot(&left.t().dot(&z0)));
        Ok(Self::from_coords(&z))
    }
}

/// exp(A) by scaling and squaring with a Taylor core.
fn expm(a: &Array2<f64>) -> Array2<f64> {
    let n = a.nrows();
    let norm = a.map_axis(Axis(0), |c| c.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0f64, |m, x| m.max(*x));
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as i32 } else { 0 };
    let scaled = a.mapv(|x| x / 2f64.powi(squarings));
    let mut result = Array2::<f64>::eye(n);
    let mut term = Array2::<f64>::eye(n);
    for k in 1..=20 {
        term = term.dot(&scaled).mapv(|x| x / k as f64);
        result = result + &term;
    }
    for _ in 0..squarings {
        result = result.dot(&result);
    }
    result
}

/// Sampled time evolution.
#[derive(Debug, Clone)]
pub struct Trajectory {
    /// Sample times in seconds.
    pub times: Vec<f64>,
    pub states: Vec<DensityMatrix>,
    pub method: EvolutionMethod,
}

impl Trajectory {
    pub fn last(&self) -> &DensityMatrix {
        self.states.last().expect("trajectory has at least one sample")
    }
}

/// Evolves `rho0` for `t` seconds, sampling `samples + 1` equally spaced
/// states including both ends.
pub fn evolve(rho0: &DensityMatrix, l: &Liouvillian, t: f64, samples: usize) -> Result<Trajectory> {
    rho0.check()?;
    if !(t >= 0.0) {
        return Err(invalid("t", "duration must be >= 0"));
    }
    let n = samples.max(1);
    let times: Vec<f64> = (0..=n).map(|k| t * k as f64 / n as f64).collect();
    l.evolve_at(rho0, &times, None)
}

/// Result of a stationary-state solve.
#[derive(Debug, Clone)]
pub struct SteadyState {
    pub rho: DensityMatrix,
    /// Dimension of the generator's numerical null space.
    pub null_dimension: usize,
    /// True when the null space is degenerate and `rho` is the long-time
    /// limit reached from the supplied initial state.
    pub degenerate: bool,
    /// ‖L ρ‖₂ in units of Γ.
    pub residual: f64,
}

/// Stationary state of `l`.
///
/// The null vector is found by least squares on `L` with the trace condition
/// appended as an extra row. If the null space has more than one dimension
/// the answer depends on where the system starts: with `initial` given the
/// reachable stationary state is returned and flagged, otherwise
/// [`Error::DegenerateNullSpace`] is returned.
pub fn steady_state(l: &Liouvillian, initial: Option<&DensityMatrix>) -> Result<SteadyState> {
    let sv = linalg::singular_values(&l.matrix)?;
    let null_dimension = sv.iter().filter(|s| **s < NULL_TOLERANCE).count().max(1);

    let rho = if null_dimension > 1 {
        let Some(init) = initial else {
            return Err(Error::DegenerateNullSpace {
                dimension: null_dimension,
            });
        };
        l.asymptotic_state(init)?
    } else {
        unique_stationary(&l.matrix)
    };
    let residual = linalg::norm_l2(&l.matrix.dot(&rho.vectorize()));
    Ok(SteadyState {
        rho,
        null_dimension,
        degenerate: null_dimension > 1,
        residual,
    })
}

/// Solves `L ρ = 0, tr ρ = 1` by least squares; assumes a one-dimensional
/// null space.
fn unique_stationary(matrix: &Array2<C64>) -> DensityMatrix {
    let mut a = Array2::<C64>::zeros((DIM + 1, DIM));
    a.slice_mut(s![..DIM, ..]).assign(matrix);
    for i in 0..N_LEVELS {
        a[[DIM, i + N_LEVELS * i]] = C64::from(1.0);
    }
    let mut b = Array1::<C64>::zeros(DIM + 1);
    b[DIM] = C64::from(1.0);
    let m = unvec(&linalg::lstsq(&a, &b));
    let herm = (&m + &m.t().mapv(|z| z.conj())).mapv(|z| z * 0.5);
    DensityMatrix(herm)
}

/// Photon scattering rate Γ·Σ P-populations, in s⁻¹.
pub fn scattering_rate(rho: &DensityMatrix, scheme: &LevelScheme) -> f64 {
    scheme.gamma() * rho.manifold_population(Manifold::P, None)
}
