//! Sequential Monte Carlo approximation of the classical conditional density.
//!
//! N weighted (q, p) samples are propagated through the Duffing SDE with
//! independent noise draws and reweighted against each record increment by
//!
//! ```text
//! w̃ᵢ = wᵢ · exp(−(Δy − √(8ηk)·qᵢ·Δt)²/(2Δt)) / √(2πΔt)
//! ```
//!
//! the per-step classical likelihood being Σw̃ᵢ over the previously
//! normalized weights. Weights live in log domain; systematic resampling
//! fires when the effective sample size drops below a configured fraction
//! of N. All draws come from the filter's own stream in a fixed order, so a
//! run is deterministic per seed.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::classical::{euler_maruyama_step, ClassicalState};
use crate::error::{QcError, Result};
use crate::operators::DuffingParams;

/// Default particle count.
pub const DEFAULT_N_PARTICLES: usize = 500;
/// Default resample trigger as a fraction of N.
pub const DEFAULT_ESS_FRACTION: f64 = 0.5;

/// Weighted particle approximation of the conditional phase-space density.
#[derive(Debug, Clone)]
pub struct ParticleEnsemble {
    positions: Vec<f64>,
    momenta: Vec<f64>,
    /// Normalized log-weights: logsumexp(log_weights) == 0.
    log_weights: Vec<f64>,
    /// Accumulated log of the predictive density of the record.
    pub loglik: f64,
    /// Resample when ESS < ess_threshold · N.
    pub ess_threshold: f64,
    n_resamples: usize,
}

impl ParticleEnsemble {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn momenta(&self) -> &[f64] {
        &self.momenta
    }

    pub fn n_resamples(&self) -> usize {
        self.n_resamples
    }

    /// Normalized linear weights.
    pub fn weights(&self) -> Vec<f64> {
        self.log_weights.iter().map(|lw| lw.exp()).collect()
    }

    /// Weighted means (q̄, p̄).
    pub fn mean(&self) -> (f64, f64) {
        let mut q = 0.0;
        let mut p = 0.0;
        for i in 0..self.len() {
            let w = self.log_weights[i].exp();
            q += w * self.positions[i];
            p += w * self.momenta[i];
        }
        (q, p)
    }

    /// Weighted variance of position around the weighted mean.
    pub fn position_variance(&self) -> f64 {
        let (qbar, _) = self.mean();
        let mut acc = 0.0;
        for i in 0..self.len() {
            let d = self.positions[i] - qbar;
            acc += self.log_weights[i].exp() * d * d;
        }
        acc
    }
}

/// N particles sampled from the quantum-matched thermal Gaussian
/// q, p ~ Normal(0, n̄ + ½), uniform weights.
pub fn init_ensemble(
    n: usize,
    nbar: f64,
    ess_threshold: f64,
    rng: &mut ChaCha8Rng,
) -> Result<ParticleEnsemble> {
    if n < 2 {
        return Err(QcError::InvalidConfig(format!("need at least 2 particles, got {n}")));
    }
    let sd = (nbar + 0.5).sqrt();
    let mut positions = Vec::with_capacity(n);
    let mut momenta = Vec::with_capacity(n);
    for _ in 0..n {
        positions.push(rng.sample::<f64, _>(StandardNormal) * sd);
        momenta.push(rng.sample::<f64, _>(StandardNormal) * sd);
    }
    Ok(ParticleEnsemble {
        positions,
        momenta,
        log_weights: vec![-(n as f64).ln(); n],
        loglik: 0.0,
        ess_threshold,
        n_resamples: 0,
    })
}

/// Effective sample size 1/Σwᵢ² of normalized weights.
pub fn effective_sample_size(weights: &[f64]) -> f64 {
    let sum_sq: f64 = weights.iter().map(|w| w * w).sum();
    if sum_sq <= 0.0 {
        return 0.0;
    }
    1.0 / sum_sq
}

/// Systematic resampling: N offspring from one uniform offset over the
/// cumulative weights; offspring counts differ from N·wᵢ by less than 1.
pub fn systematic_resample(ens: &mut ParticleEnsemble, rng: &mut ChaCha8Rng) {
    let n = ens.len();
    let weights = ens.weights();
    let u0: f64 = rng.random::<f64>() / n as f64;
    let mut new_q = Vec::with_capacity(n);
    let mut new_p = Vec::with_capacity(n);
    let mut cum = weights[0];
    let mut i = 0usize;
    for j in 0..n {
        let u = u0 + j as f64 / n as f64;
        while u > cum && i < n - 1 {
            i += 1;
            cum += weights[i];
        }
        new_q.push(ens.positions[i]);
        new_p.push(ens.momenta[i]);
    }
    ens.positions = new_q;
    ens.momenta = new_p;
    ens.log_weights.fill(-(n as f64).ln());
    ens.n_resamples += 1;
}

/// Propagate every particle one SDE step with independent noise draws, in
/// index order.
pub fn propagate(
    ens: &mut ParticleEnsemble,
    dt: f64,
    t: f64,
    params: &DuffingParams,
    rng: &mut ChaCha8Rng,
) {
    let sqrt_dt = dt.sqrt();
    for i in 0..ens.len() {
        let dw_y = rng.sample::<f64, _>(StandardNormal) * sqrt_dt;
        let dw_u = rng.sample::<f64, _>(StandardNormal) * sqrt_dt;
        let state = ClassicalState { q: ens.positions[i], p: ens.momenta[i] };
        let next = euler_maruyama_step(state, params, t, dw_y, dw_u, dt);
        ens.positions[i] = next.q;
        ens.momenta[i] = next.p;
    }
}

/// Reweight against one record increment and return the predictive
/// log-density log(Σw̃) of this step (weights were normalized beforehand,
/// so no denominator is needed). Weights are left normalized.
pub fn reweight(
    ens: &mut ParticleEnsemble,
    dy: f64,
    dt: f64,
    params: &DuffingParams,
    step_index: usize,
) -> Result<f64> {
    let signal = params.signal_weight();
    let log_norm = -0.5 * (2.0 * std::f64::consts::PI * dt).ln();
    for i in 0..ens.len() {
        let innovation = dy - signal * ens.positions[i] * dt;
        ens.log_weights[i] += -innovation * innovation / (2.0 * dt) + log_norm;
    }
    let max_lw = ens.log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max_lw.is_finite() {
        return Err(QcError::DegenerateEnsemble { step: step_index });
    }
    let sum: f64 = ens.log_weights.iter().map(|lw| (lw - max_lw).exp()).sum();
    let increment = max_lw + sum.ln();
    if !increment.is_finite() {
        return Err(QcError::DegenerateEnsemble { step: step_index });
    }
    ens.loglik += increment;
    for lw in &mut ens.log_weights {
        *lw -= increment;
    }
    Ok(increment)
}

/// One filter step: propagate, reweight against the record increment,
/// resample if the effective sample size dropped below the trigger.
///
/// Draw order per step: (dYᵢ, dUᵢ) for each particle in index order, then at
/// most one uniform for resampling; everything comes from `rng`, so the whole
/// run replays bit-exactly from a seed.
pub fn pf_step(
    ens: &mut ParticleEnsemble,
    dy: f64,
    dt: f64,
    t: f64,
    params: &DuffingParams,
    rng: &mut ChaCha8Rng,
    step_index: usize,
) -> Result<f64> {
    propagate(ens, dt, t, params, rng);
    let increment = reweight(ens, dy, dt, params, step_index)?;
    let ess = effective_sample_size(&ens.weights());
    if ess < ens.ess_threshold * ens.len() as f64 {
        systematic_resample(ens, rng);
    }
    Ok(increment)
}
