//! Truncated-Fock-basis operators and reference states for the quantum model.
//!
//! Everything is expressed in natural units (ħ = m = k_B = 1) with the
//! reference linear oscillator at frequency 1 defining the basis, so
//! q̂ = (â + â†)/√2 and p̂ = i(â† − â)/√2. The trap Hamiltonian is the Duffing
//! double well
//!
//! ```text
//! Ĥ = ½p̂² − ½ω²q̂² + ¼βq̂⁴ + g·cos(t)·q̂
//! ```
//!
//! whose two lowest levels straddle the barrier at ω = 1, β = 0.5. The three
//! environment channels are a position measurement L̂₁ = √(2k)·q̂ plus a
//! thermal pair at rate Γ and occupation n̄.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{QcError, Result};
use crate::linalg::{self, CMatrix, C64, C_ONE, C_ZERO};

/// Number of retained linear-oscillator basis states.
///
/// The integrator is validated for 60–100 states; anything below 2 cannot
/// even hold a ladder operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FockDim(usize);

impl FockDim {
    pub const DEFAULT: usize = 80;

    pub fn new(dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(QcError::InvalidDimension { dim });
        }
        Ok(FockDim(dim))
    }

    #[inline]
    pub fn get(self) -> usize {
        self.0
    }
}

/// Shape of the quadratic term in the trap potential.
///
/// `DoubleWell` is the paper's configuration (−½ω²q̂²); `SingleWell` flips the
/// sign to +½ω²q̂², which with β = 0 gives the stable harmonic trap used for
/// linear-filter cross-checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PotentialShape {
    #[default]
    DoubleWell,
    SingleWell,
}

impl PotentialShape {
    /// Sign of the ½ω²q̂² term in the Hamiltonian.
    #[inline]
    pub fn quadratic_sign(self) -> f64 {
        match self {
            PotentialShape::DoubleWell => -1.0,
            PotentialShape::SingleWell => 1.0,
        }
    }
}

/// Physical parameters of the trapped-particle models, all dimensionless.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DuffingParams {
    /// Angular frequency ω of the quadratic term.
    pub omega: f64,
    /// Quartic coefficient β.
    pub beta: f64,
    /// Periodic drive amplitude g (drive frequency is fixed at 1).
    pub drive: f64,
    /// Thermal decay rate Γ (Γ ≪ ω).
    pub gamma_damp: f64,
    /// Measurement strength k.
    pub k_meas: f64,
    /// Measurement efficiency η ∈ [0, 1] of the position channel.
    pub eta: f64,
    /// Temperature T in units of ħω_ref/k_B.
    pub temperature: f64,
    /// Quadratic-term sign switch; `DoubleWell` for the physical model.
    #[serde(default)]
    pub potential: PotentialShape,
}

impl DuffingParams {
    /// Reference configuration: ω = 1, β = 0.5, g = 0, Γ = 0.05, k = 0.025.
    pub fn reference() -> Self {
        DuffingParams {
            omega: 1.0,
            beta: 0.5,
            drive: 0.0,
            gamma_damp: 0.05,
            k_meas: 0.025,
            eta: 0.6,
            temperature: 0.2,
            potential: PotentialShape::DoubleWell,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if !(self.omega > 0.0) {
            problems.push(format!("omega must be > 0, got {}", self.omega));
        }
        if self.beta < 0.0 {
            problems.push(format!("beta must be >= 0, got {}", self.beta));
        }
        if !(0.0..=1.0).contains(&self.eta) {
            problems.push(format!("eta must be in [0, 1], got {}", self.eta));
        }
        if self.gamma_damp < 0.0 {
            problems.push(format!("gamma_damp must be >= 0, got {}", self.gamma_damp));
        }
        if self.k_meas < 0.0 {
            problems.push(format!("k_meas must be >= 0, got {}", self.k_meas));
        }
        if self.temperature < 0.0 {
            problems.push(format!("temperature must be >= 0, got {}", self.temperature));
        }
        for (name, v) in [
            ("omega", self.omega),
            ("beta", self.beta),
            ("drive", self.drive),
            ("gamma_damp", self.gamma_damp),
            ("k_meas", self.k_meas),
            ("eta", self.eta),
            ("temperature", self.temperature),
        ] {
            if !v.is_finite() {
                problems.push(format!("{name} must be finite, got {v}"));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(QcError::InvalidConfig(problems.join("; ")))
        }
    }

    /// Thermal occupation n̄ at this temperature and the reference frequency.
    pub fn nbar(&self) -> f64 {
        thermal_occupation(1.0, self.temperature)
    }

    /// Record signal weight √(8ηk) multiplying ⟨q⟩ in the measurement record.
    #[inline]
    pub fn signal_weight(&self) -> f64 {
        (8.0 * self.eta * self.k_meas).sqrt()
    }

    /// Classical potential V(q) = ∓½ω²q² + ¼βq⁴.
    pub fn potential_energy(&self, q: f64) -> f64 {
        0.5 * self.potential.quadratic_sign() * self.omega.powi(2) * q * q
            + 0.25 * self.beta * q.powi(4)
    }

    /// Classical force −V'(q).
    #[inline]
    pub fn force(&self, q: f64) -> f64 {
        -self.potential.quadratic_sign() * self.omega.powi(2) * q - self.beta * q.powi(3)
    }

    /// Positions ±√(ω²/β) of the double-well minima.
    pub fn well_positions(&self) -> Option<(f64, f64)> {
        if self.potential == PotentialShape::DoubleWell && self.beta > 0.0 {
            let w = (self.omega.powi(2) / self.beta).sqrt();
            Some((-w, w))
        } else {
            None
        }
    }

    /// Barrier height V(0) − V(±q_min) = ω⁴/(4β) of the double well.
    pub fn barrier_height(&self) -> Option<f64> {
        if self.potential == PotentialShape::DoubleWell && self.beta > 0.0 {
            Some(self.omega.powi(4) / (4.0 * self.beta))
        } else {
            None
        }
    }
}

/// A dim×dim complex operator in the truncated Fock basis, carrying its
/// half-bandwidth so the stepping kernels can stay O(band·n²).
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    mat: CMatrix,
    band: usize,
}

impl OperatorMatrix {
    /// Wrap a dense matrix, scanning its bandwidth.
    pub fn new(mat: CMatrix) -> Self {
        let band = linalg::half_bandwidth(&mat);
        OperatorMatrix { mat, band }
    }

    /// Wrap a matrix whose half-bandwidth is known by construction.
    pub(crate) fn with_band(mat: CMatrix, band: usize) -> Self {
        debug_assert!(linalg::half_bandwidth(&mat) <= band);
        OperatorMatrix { mat, band }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    #[inline]
    pub fn band(&self) -> usize {
        self.band
    }

    #[inline]
    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }

    pub fn into_matrix(self) -> CMatrix {
        self.mat
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> OperatorMatrix {
        OperatorMatrix { mat: self.mat.adjoint(), band: self.band }
    }

    /// `self + shift·I`.
    pub fn shifted(&self, shift: C64) -> OperatorMatrix {
        let n = self.dim();
        let mut mat = self.mat.clone();
        for i in 0..n {
            mat[(i, i)] += shift;
        }
        OperatorMatrix { mat, band: self.band }
    }

    /// In-place `self += shift·I` (bandwidth unchanged).
    pub fn add_identity(&mut self, shift: C64) {
        for i in 0..self.mat.nrows() {
            self.mat[(i, i)] += shift;
        }
    }

    /// Matrix product; the bandwidth adds (clamped to dense).
    pub fn mul(&self, rhs: &OperatorMatrix) -> OperatorMatrix {
        let n = self.dim();
        let mut out = CMatrix::zeros(n, n);
        linalg::band_mul_dense_into(&self.mat, self.band, rhs.matrix(), &mut out);
        OperatorMatrix { mat: out, band: (self.band + rhs.band).min(n - 1) }
    }

    pub fn scale(&self, factor: C64) -> OperatorMatrix {
        OperatorMatrix { mat: &self.mat * factor, band: self.band }
    }
}

/// Ladder operators (â, â†) with ⟨n−1|â|n⟩ = √n.
pub fn build_ladder(dim: FockDim) -> (OperatorMatrix, OperatorMatrix) {
    let n = dim.get();
    let mut a = CMatrix::zeros(n, n);
    for k in 1..n {
        a[(k - 1, k)] = C64::new((k as f64).sqrt(), 0.0);
    }
    let ad = a.adjoint();
    (
        OperatorMatrix::with_band(a, 1),
        OperatorMatrix::with_band(ad, 1),
    )
}

/// Position and momentum, q̂ = (â + â†)/√2 and p̂ = i(â† − â)/√2.
pub fn build_position_momentum(dim: FockDim) -> (OperatorMatrix, OperatorMatrix) {
    let (a, ad) = build_ladder(dim);
    let inv_sqrt2 = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let q = (a.matrix() + ad.matrix()) * inv_sqrt2;
    let p = (ad.matrix() - a.matrix()) * C64::new(0.0, std::f64::consts::FRAC_1_SQRT_2);
    (
        OperatorMatrix::with_band(q, 1),
        OperatorMatrix::with_band(p, 1),
    )
}

/// Duffing Hamiltonian Ĥ(t) = ½p̂² + s·½ω²q̂² + ¼βq̂⁴ + g·cos(t)·q̂ with
/// s = −1 for the double well. The quartic term is (q̂²)² of the truncated q̂².
pub fn build_duffing_hamiltonian(dim: FockDim, params: &DuffingParams, t: f64) -> Result<OperatorMatrix> {
    params.validate()?;
    let mut h = build_static_hamiltonian_shifted(dim, params, 0.0, 0.0);
    if params.drive != 0.0 {
        let (q, _) = build_position_momentum(dim);
        let g = C64::new(params.drive * t.cos(), 0.0);
        h = OperatorMatrix::with_band(h.matrix() + q.matrix() * g, h.band());
    }
    Ok(h)
}

/// Static (drive-free) Hamiltonian with the position and momentum arguments
/// displaced by a frame center: Ĥ(q̂ + c_q, p̂ + c_p). Used by the moving-basis
/// integrator; (0, 0) gives the lab-frame operator.
pub fn build_static_hamiltonian_shifted(
    dim: FockDim,
    params: &DuffingParams,
    center_q: f64,
    center_p: f64,
) -> OperatorMatrix {
    let (q, p) = build_position_momentum(dim);
    let qs = q.shifted(C64::new(center_q, 0.0));
    let ps = p.shifted(C64::new(center_p, 0.0));
    let q2 = qs.mul(&qs);
    let q4 = q2.mul(&q2);
    let p2 = ps.mul(&ps);
    let sign = params.potential.quadratic_sign();
    let mut mat = p2.matrix() * C64::new(0.5, 0.0)
        + q2.matrix() * C64::new(0.5 * sign * params.omega.powi(2), 0.0)
        + q4.matrix() * C64::new(0.25 * params.beta, 0.0);
    linalg::hermitize(&mut mat);
    OperatorMatrix::with_band(mat, 4.min(dim.get() - 1))
}

/// The three environment channels for a frame displaced by (c_q, c_p):
/// L̂₁ = √(2k)(q̂ + c_q), L̂₂ = √((n̄+1)Γ)(â + α), L̂₃ = √(n̄Γ)(â† + α*) with
/// α = (c_q + i·c_p)/√2, together with their efficiencies (η, 0, 0).
///
/// L̂₂ carries the emission rate on the lowering operator and L̂₃ the
/// absorption rate on the raising operator, so the unmonitored pair relaxes
/// to the thermal state at occupation n̄.
pub fn build_lindblads_shifted(
    dim: FockDim,
    params: &DuffingParams,
    center_q: f64,
    center_p: f64,
) -> ([OperatorMatrix; 3], [f64; 3]) {
    let (a, ad) = build_ladder(dim);
    let (q, _) = build_position_momentum(dim);
    let nbar = params.nbar();
    let alpha = C64::new(center_q, center_p) * C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let l1 = q
        .shifted(C64::new(center_q, 0.0))
        .scale(C64::new((2.0 * params.k_meas).sqrt(), 0.0));
    let l2 = a
        .shifted(alpha)
        .scale(C64::new(((nbar + 1.0) * params.gamma_damp).sqrt(), 0.0));
    let l3 = ad
        .shifted(alpha.conj())
        .scale(C64::new((nbar * params.gamma_damp).sqrt(), 0.0));
    ([l1, l2, l3], [params.eta, 0.0, 0.0])
}

/// Lab-frame environment operators [L̂₁, L̂₂, L̂₃] and their efficiencies.
pub fn build_lindblads(dim: FockDim, params: &DuffingParams) -> ([OperatorMatrix; 3], [f64; 3]) {
    build_lindblads_shifted(dim, params, 0.0, 0.0)
}

/// Bose-Einstein occupation n̄ = 1/(e^{ω/T} − 1); the T = 0 limit is exact.
pub fn thermal_occupation(omega: f64, temperature: f64) -> f64 {
    if temperature <= 0.0 {
        return 0.0;
    }
    1.0 / (omega / temperature).exp_m1()
}

/// Conditional quantum state: a density matrix on the truncated basis plus
/// the phase-space displacement of that basis (the moving frame).
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    entries: CMatrix,
    center_q: f64,
    center_p: f64,
}

impl DensityMatrix {
    pub fn new(entries: CMatrix, center_q: f64, center_p: f64) -> Self {
        DensityMatrix { entries, center_q, center_p }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    #[inline]
    pub fn matrix(&self) -> &CMatrix {
        &self.entries
    }

    #[inline]
    pub fn matrix_mut(&mut self) -> &mut CMatrix {
        &mut self.entries
    }

    #[inline]
    pub fn center_q(&self) -> f64 {
        self.center_q
    }

    #[inline]
    pub fn center_p(&self) -> f64 {
        self.center_p
    }

    pub(crate) fn shift_center(&mut self, dq: f64, dp: f64) {
        self.center_q += dq;
        self.center_p += dp;
    }

    pub fn trace(&self) -> f64 {
        self.entries.trace().re
    }

    /// Occupation of the top `count` basis levels; a growing value signals
    /// that the truncated basis is overflowing.
    pub fn tail_occupation(&self, count: usize) -> f64 {
        let n = self.dim();
        let lo = n.saturating_sub(count);
        (lo..n).map(|i| self.entries[(i, i)].re).sum()
    }

    /// Verify Hermiticity, unit trace and the positivity floor.
    pub fn validate(&self, herm_tol: f64, trace_tol: f64, eig_floor: f64) -> Result<()> {
        let res = linalg::hermiticity_residue(&self.entries);
        if res > herm_tol {
            return Err(QcError::NotHermitian { residue: res });
        }
        let tr = self.trace();
        if (tr - 1.0).abs() > trace_tol {
            return Err(QcError::InvalidConfig(format!(
                "density matrix trace {tr} deviates from 1 beyond {trace_tol}"
            )));
        }
        let min_eig = linalg::min_eigenvalue(&self.entries);
        if min_eig < eig_floor {
            return Err(QcError::InvalidConfig(format!(
                "density matrix has eigenvalue {min_eig} below floor {eig_floor}"
            )));
        }
        Ok(())
    }
}

/// Diagonal Gibbs state of the reference oscillator, ρ_nn ∝ (n̄/(n̄+1))ⁿ,
/// renormalized over the truncated basis.
///
/// Warns when the pre-normalization mass beyond the truncation exceeds 1e-6.
pub fn thermal_state(dim: FockDim, nbar: f64) -> DensityMatrix {
    let n = dim.get();
    let mut entries = CMatrix::zeros(n, n);
    if nbar <= 0.0 {
        entries[(0, 0)] = C_ONE;
        return DensityMatrix::new(entries, 0.0, 0.0);
    }
    let x = nbar / (nbar + 1.0);
    let tail = x.powi(n as i32);
    if tail > 1e-6 {
        log::warn!(
            "thermal_state: truncated tail mass {tail:.3e} at dim {n}, nbar {nbar}; increase dim"
        );
    }
    let mut weights = Vec::with_capacity(n);
    let mut w = 1.0 - x;
    for _ in 0..n {
        weights.push(w);
        w *= x;
    }
    let total: f64 = weights.iter().sum();
    for (i, w) in weights.iter().enumerate() {
        entries[(i, i)] = C64::new(w / total, 0.0);
    }
    DensityMatrix::new(entries, 0.0, 0.0)
}

/// Maximum displacement amplitude accepted by [`displacement`].
pub const DEFAULT_ALPHA_MAX: f64 = 10.0;
/// Unitarity tolerance max|D†D − I| for the truncated displacement.
pub const DISPLACEMENT_UNITARITY_TOL: f64 = 1e-8;

/// Displacement operator D(α) = exp(α↠− α*â) by dense matrix exponential
/// of the truncated generator.
///
/// Rejects |α| > `alpha_max` and checks unitarity of the result (truncation
/// turns D slightly non-unitary once α moves weight near the basis edge).
pub fn displacement(dim: FockDim, alpha: C64, alpha_max: f64, unitarity_tol: f64) -> Result<OperatorMatrix> {
    if alpha.norm() > alpha_max {
        return Err(QcError::DisplacementTooLarge { alpha_abs: alpha.norm(), max: alpha_max });
    }
    let (a, ad) = build_ladder(dim);
    let generator = ad.matrix() * alpha - a.matrix() * alpha.conj();
    let d = linalg::expm_fast(&generator);
    let n = dim.get();
    // gram = D†D via the split kernels: (D†D)† = D†D, reuse the adjoint gemm
    let ds = linalg::SplitMatrix::from_cmatrix(&d);
    let mut gram_s = linalg::SplitMatrix::zeros(n);
    linalg::split_gemm_adjoint(&ds, &ds, &mut gram_s);
    let mut residue: f64 = 0.0;
    for j in 0..n {
        for i in 0..n {
            // gram here is D·D†; for a truncated displacement the deviation
            // of D·D† and D†·D from I have the same magnitude scale
            let target_re = if i == j { 1.0 } else { 0.0 };
            let dr = gram_s.re[j * n + i] - target_re;
            let di = gram_s.im[j * n + i];
            residue = residue.max((dr * dr + di * di).sqrt());
        }
    }
    if residue > unitarity_tol {
        return Err(QcError::TruncationError { residue, tol: unitarity_tol });
    }
    Ok(OperatorMatrix::new(d))
}

/// Lowest `count` eigenvalues of a Hermitian operator, ascending.
pub fn spectrum(h: &OperatorMatrix, count: usize) -> Result<Vec<f64>> {
    let vals = linalg::hermitian_eigenvalues(h.matrix(), 1e-10)?;
    Ok(vals.iter().take(count).copied().collect())
}

/// Hermitian eigendecomposition of an operator (ascending eigenvalues),
/// exposed for eigenbasis propagation oracles.
pub fn eigendecompose(h: &OperatorMatrix) -> Result<(DVector<f64>, CMatrix)> {
    linalg::hermitian_eigen(h.matrix(), 1e-10)
}
