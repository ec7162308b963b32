//! Model-probability bookkeeping and decision rules.
//!
//! Each candidate model contributes one Gaussian innovation log-likelihood
//! per record increment; posteriors are multiplicative updates of equal
//! priors, kept in log domain (a 10⁵-step product underflows any float), and
//! the Neyman-Pearson rule selects a model only when its posterior beats
//! every rival by the ratio threshold μ — otherwise the outcome is
//! inconclusive. μ = 1 reduces to the Bayes argmax with strict ties rejected.

use serde::{Deserialize, Serialize};

use rand_chacha::ChaCha8Rng;

use crate::error::{QcError, Result};
use crate::operators::{DuffingParams, FockDim};
use crate::particle::{init_ensemble, pf_step, ParticleEnsemble};
use crate::quantum::{QuantumFilter, QuantumFilterOptions};
use crate::seeds::{stream_rng, StreamRole};
use crate::trace::TimeTrace;

/// Innovation log-density: log N(ΔW; 0, Δt) = −ΔW²/(2Δt) − ½log(2πΔt).
///
/// The normalizer is kept (it cancels between models) so absolute
/// log-evidence values are meaningful too.
#[inline]
pub fn gaussian_loglik(dw: f64, dt: f64) -> f64 {
    -dw * dw / (2.0 * dt) - 0.5 * (2.0 * std::f64::consts::PI * dt).ln()
}

/// Accumulated per-model log-likelihoods with their priors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorState {
    model_ids: Vec<String>,
    logliks: Vec<f64>,
    log_prior: Vec<f64>,
}

impl PosteriorState {
    /// Equal priors 1/M.
    pub fn uniform(model_ids: Vec<String>) -> Self {
        let m = model_ids.len();
        let lp = -(m as f64).ln();
        PosteriorState { logliks: vec![0.0; m], log_prior: vec![lp; m], model_ids }
    }

    pub fn model_ids(&self) -> &[String] {
        &self.model_ids
    }

    pub fn n_models(&self) -> usize {
        self.model_ids.len()
    }

    pub fn logliks(&self) -> &[f64] {
        &self.logliks
    }

    /// Unnormalized log-posterior per model.
    pub fn log_scores(&self) -> Vec<f64> {
        self.log_prior
            .iter()
            .zip(&self.logliks)
            .map(|(p, l)| p + l)
            .collect()
    }

    /// Normalized posterior probabilities (log-sum-exp).
    pub fn probabilities(&self) -> Vec<f64> {
        let scores = self.log_scores();
        let m = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let weights: Vec<f64> = scores.iter().map(|s| (s - m).exp()).collect();
        let total: f64 = weights.iter().sum();
        weights.into_iter().map(|w| w / total).collect()
    }

    /// Add one log-likelihood increment per model.
    pub fn update(&mut self, increments: &[f64]) -> Result<()> {
        if increments.len() != self.logliks.len() {
            return Err(QcError::ModelCountMismatch {
                expected: self.logliks.len(),
                got: increments.len(),
            });
        }
        for (acc, inc) in self.logliks.iter_mut().zip(increments) {
            *acc += inc;
        }
        Ok(())
    }
}

/// Add per-model increments and return the updated state.
pub fn update_posteriors(mut ps: PosteriorState, increments: &[f64]) -> Result<PosteriorState> {
    ps.update(increments)?;
    Ok(ps)
}

/// Outcome of a Neyman-Pearson selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "model", rename_all = "snake_case")]
pub enum Outcome {
    Selected(String),
    Inconclusive,
}

/// Selection result with the threshold and posterior snapshot it used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub outcome: Outcome,
    pub mu: f64,
    pub posterior: Vec<f64>,
}

impl Decision {
    pub fn selected(&self) -> Option<&str> {
        match &self.outcome {
            Outcome::Selected(id) => Some(id),
            Outcome::Inconclusive => None,
        }
    }
}

/// Select model j iff p(m_j|I)/p(m_k|I) > μ for every k ≠ j; the comparison
/// runs in log domain so extreme log-likelihood gaps cannot overflow.
pub fn np_select(ps: &PosteriorState, mu: f64) -> Decision {
    assert!(mu >= 1.0, "Neyman-Pearson threshold must be >= 1, got {mu}");
    let scores = ps.log_scores();
    let log_mu = mu.ln();
    let mut best = 0usize;
    for (i, s) in scores.iter().enumerate() {
        if *s > scores[best] {
            best = i;
        }
    }
    let dominates = scores
        .iter()
        .enumerate()
        .all(|(k, s)| k == best || scores[best] - s > log_mu);
    let posterior = ps.probabilities();
    let outcome = if dominates {
        Outcome::Selected(ps.model_ids()[best].clone())
    } else {
        Outcome::Inconclusive
    };
    Decision { outcome, mu, posterior }
}

/// Which dynamical law a candidate filter assumes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Quantum,
    Classical,
}

/// One competing model: a label, a dynamical law, and its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateModel {
    pub id: String,
    pub kind: ModelKind,
    pub params: DuffingParams,
}

impl CandidateModel {
    pub fn quantum(params: DuffingParams) -> Self {
        CandidateModel { id: "Q".into(), kind: ModelKind::Quantum, params }
    }

    pub fn classical(params: DuffingParams) -> Self {
        CandidateModel { id: "C".into(), kind: ModelKind::Classical, params }
    }

    /// Stream key derived from the model content (not the id or position):
    /// identical models draw identical noise and tie exactly.
    pub fn stream_key(&self) -> u64 {
        let text = format!(
            "{:?} {:x} {:x} {:x} {:x} {:x} {:x} {:x} {:?}",
            self.kind,
            self.params.omega.to_bits(),
            self.params.beta.to_bits(),
            self.params.drive.to_bits(),
            self.params.gamma_damp.to_bits(),
            self.params.k_meas.to_bits(),
            self.params.eta.to_bits(),
            self.params.temperature.to_bits(),
            self.params.potential,
        );
        crate::seeds::fnv1a64(text.as_bytes())
    }
}

/// Numerical configuration shared by all candidate filters in a selection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectionNumerics {
    pub dim: FockDim,
    pub n_particles: usize,
    pub ess_threshold: f64,
    pub quantum: QuantumFilterOptions,
}

impl Default for SelectionNumerics {
    fn default() -> Self {
        SelectionNumerics {
            dim: FockDim::new(FockDim::DEFAULT).expect("default dim"),
            n_particles: crate::particle::DEFAULT_N_PARTICLES,
            ess_threshold: crate::particle::DEFAULT_ESS_FRACTION,
            quantum: QuantumFilterOptions::default(),
        }
    }
}

/// A conditional filter consuming record increments and yielding per-step
/// log-likelihood increments.
pub trait StepFilter {
    fn step(&mut self, dy: f64, t: f64, step_index: usize) -> Result<f64>;
}

struct QuantumRunner {
    filter: QuantumFilter,
}

impl StepFilter for QuantumRunner {
    fn step(&mut self, dy: f64, _t: f64, _step_index: usize) -> Result<f64> {
        self.filter.condition_step(dy)
    }
}

struct ParticleRunner {
    ens: ParticleEnsemble,
    params: DuffingParams,
    dt: f64,
    rng: ChaCha8Rng,
}

impl StepFilter for ParticleRunner {
    fn step(&mut self, dy: f64, t: f64, step_index: usize) -> Result<f64> {
        pf_step(&mut self.ens, dy, self.dt, t, &self.params, &mut self.rng, step_index)
    }
}

/// Replays a precomputed increment sequence (used when the truth simulator
/// already produced its own conditioning increments).
pub struct ReplayFilter {
    increments: Vec<f64>,
    cursor: usize,
}

impl ReplayFilter {
    pub fn new(increments: Vec<f64>) -> Self {
        ReplayFilter { increments, cursor: 0 }
    }
}

impl StepFilter for ReplayFilter {
    fn step(&mut self, _dy: f64, _t: f64, step_index: usize) -> Result<f64> {
        let inc = self.increments.get(self.cursor).copied().ok_or_else(|| {
            QcError::StepFailure {
                step: step_index,
                reason: "replayed increment sequence exhausted".into(),
            }
        })?;
        self.cursor += 1;
        Ok(inc)
    }
}

/// Build the conditional filter for one candidate. Each distinct candidate
/// model gets its own content-keyed RNG stream of the trial seed, so
/// classical process noise is independent across distinct candidates,
/// reproducible, and shared between identical ones.
pub fn build_filter(
    candidate: &CandidateModel,
    numerics: &SelectionNumerics,
    dt: f64,
    trial_seed: u64,
) -> Result<Box<dyn StepFilter>> {
    match candidate.kind {
        ModelKind::Quantum => {
            let filter =
                QuantumFilter::new(&candidate.params, numerics.dim, dt, numerics.quantum)?;
            Ok(Box::new(QuantumRunner { filter }))
        }
        ModelKind::Classical => {
            let mut rng = stream_rng(trial_seed, StreamRole::Candidate(candidate.stream_key()));
            let ens = init_ensemble(
                numerics.n_particles,
                candidate.params.nbar(),
                numerics.ess_threshold,
                &mut rng,
            )?;
            Ok(Box::new(ParticleRunner { ens, params: candidate.params, dt, rng }))
        }
    }
}

/// Posterior trajectory and final state of one selection run.
#[derive(Debug, Clone)]
pub struct SelectionOutput {
    pub posterior: PosteriorState,
    /// Normalized posterior per model at every step.
    pub series: Vec<Vec<f64>>,
}

/// Drive every candidate filter through the trace, one increment at a time,
/// multiplying posteriors as they go. A filter failure aborts the run with a
/// tagged error (the caller records the trial as failed).
pub fn run_selection(
    trace: &TimeTrace,
    candidates: &[CandidateModel],
    numerics: &SelectionNumerics,
    trial_seed: u64,
    record_series: bool,
) -> Result<SelectionOutput> {
    let mut runners = Vec::with_capacity(candidates.len());
    for candidate in candidates {
        runners.push(build_filter(candidate, numerics, trace.dt, trial_seed)?);
    }
    let ids = candidates.iter().map(|c| c.id.clone()).collect();
    run_selection_with_filters(trace, ids, runners, record_series)
}

/// Variant taking pre-built filters; used by the trial runner to substitute
/// a [`ReplayFilter`] for the truth model's own conditioning pass.
pub fn run_selection_with_filters(
    trace: &TimeTrace,
    model_ids: Vec<String>,
    mut filters: Vec<Box<dyn StepFilter>>,
    record_series: bool,
) -> Result<SelectionOutput> {
    assert_eq!(model_ids.len(), filters.len());
    let mut posterior = PosteriorState::uniform(model_ids);
    let mut series = Vec::new();
    let mut increments = vec![0.0; filters.len()];
    for (step, &dy) in trace.increments.iter().enumerate() {
        let t = step as f64 * trace.dt;
        for (filter, slot) in filters.iter_mut().zip(&mut increments) {
            *slot = filter.step(dy, t, step)?;
        }
        posterior.update(&increments)?;
        if record_series {
            series.push(posterior.probabilities());
        }
    }
    Ok(SelectionOutput { posterior, series })
}
