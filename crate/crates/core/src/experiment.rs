//! Monte Carlo decision-quality estimation: repeated simulated trials,
//! confusion matrices, ROC curves, and (T, η) parameter sweeps.
//!
//! Every trial derives all of its randomness from one seed mixed out of
//! (base_seed, grid point, truth model, trial index), and workers write into
//! order-preserving slots, so a sweep is bit-reproducible for any worker
//! count. Failed trials (filter blow-ups) are tabulated separately and never
//! fold into the probability estimates.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classical::simulate_classical_trace;
use crate::error::{QcError, Result};
use crate::operators::DuffingParams;
use crate::quantum::simulate_quantum_trace_with_loglik;
use crate::selector::{
    build_filter, np_select, run_selection_with_filters, CandidateModel, Decision, ModelKind,
    Outcome, PosteriorState, ReplayFilter, SelectionNumerics, StepFilter,
};
use crate::seeds::{fnv1a64, trial_seed};

/// Everything that defines how one trial is run, besides the physics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunProtocol {
    pub dt: f64,
    pub n_steps: usize,
    pub numerics: SelectionNumerics,
    pub mu: f64,
}

/// Outcome of a single simulated trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    /// Id of the candidate whose simulator generated the trace.
    pub truth_id: String,
    pub truth_kind: ModelKind,
    pub seed: u64,
    /// Candidate ids in posterior order.
    pub model_ids: Vec<String>,
    /// Final accumulated log-likelihood per candidate.
    pub logliks: Vec<f64>,
    /// Normalized posterior at the end of the record.
    pub final_posterior: Vec<f64>,
    /// Selection at the protocol's μ; absent when the trial failed.
    pub decision: Option<Decision>,
    pub failure: Option<String>,
    pub wall_time_ms: f64,
    pub n_steps: usize,
}

impl TrialResult {
    pub fn failed(&self) -> bool {
        self.failure.is_some()
    }

    /// Re-apply the Neyman-Pearson rule at a different threshold using the
    /// stored log-likelihoods; no filters are re-run.
    pub fn decide_at(&self, mu: f64) -> Option<Decision> {
        if self.failed() {
            return None;
        }
        let mut ps = PosteriorState::uniform(self.model_ids.clone());
        ps.update(&self.logliks).ok()?;
        Some(np_select(&ps, mu))
    }
}

/// Run one trial: simulate the truth model's trace with the trial seed,
/// condition every candidate on it, select at the protocol's μ.
///
/// When a candidate is exactly the truth model and the truth is quantum, its
/// conditioning increments are taken from the truth simulation itself; a
/// separate pass would replay the identical state trajectory (this identity
/// is covered by tests), so the duplicate integration is skipped.
pub fn run_trial(
    truth: &CandidateModel,
    candidates: &[CandidateModel],
    protocol: &RunProtocol,
    seed: u64,
) -> TrialResult {
    let started = Instant::now();
    let model_ids: Vec<String> = candidates.iter().map(|c| c.id.clone()).collect();
    let fail = |reason: String, started: Instant| TrialResult {
        truth_id: truth.id.clone(),
        truth_kind: truth.kind,
        seed,
        model_ids: model_ids.clone(),
        logliks: Vec::new(),
        final_posterior: Vec::new(),
        decision: None,
        failure: Some(reason),
        wall_time_ms: started.elapsed().as_secs_f64() * 1e3,
        n_steps: protocol.n_steps,
    };

    let params_hash = params_digest(&truth.params, protocol);
    let (trace, self_increments) = match truth.kind {
        ModelKind::Quantum => {
            match simulate_quantum_trace_with_loglik(
                &truth.params,
                protocol.numerics.dim,
                protocol.n_steps,
                protocol.dt,
                seed,
                params_hash,
                protocol.numerics.quantum,
            ) {
                Ok((trace, incs)) => (trace, Some(incs)),
                Err(e) => return fail(format!("truth simulation: {e}"), started),
            }
        }
        ModelKind::Classical => {
            match simulate_classical_trace(
                &truth.params,
                protocol.n_steps,
                protocol.dt,
                seed,
                params_hash,
            ) {
                Ok(trace) => (trace, None),
                Err(e) => return fail(format!("truth simulation: {e}"), started),
            }
        }
    };

    let mut filters: Vec<Box<dyn StepFilter>> = Vec::with_capacity(candidates.len());
    let mut replay_used = false;
    for candidate in candidates.iter() {
        let is_self = !replay_used
            && candidate.kind == truth.kind
            && candidate.params == truth.params
            && matches!(truth.kind, ModelKind::Quantum);
        if is_self {
            filters.push(Box::new(ReplayFilter::new(
                self_increments.clone().expect("quantum truth increments"),
            )));
            replay_used = true;
            continue;
        }
        match build_filter(candidate, &protocol.numerics, protocol.dt, seed) {
            Ok(f) => filters.push(f),
            Err(e) => return fail(format!("candidate {}: {e}", candidate.id), started),
        }
    }

    match run_selection_with_filters(&trace, model_ids.clone(), filters, false) {
        Ok(output) => {
            let decision = np_select(&output.posterior, protocol.mu);
            TrialResult {
                truth_id: truth.id.clone(),
                truth_kind: truth.kind,
                seed,
                model_ids,
                logliks: output.posterior.logliks().to_vec(),
                final_posterior: output.posterior.probabilities(),
                decision: Some(decision),
                failure: None,
                wall_time_ms: started.elapsed().as_secs_f64() * 1e3,
                n_steps: protocol.n_steps,
            }
        }
        Err(e) => fail(format!("selection: {e}"), started),
    }
}

/// Stable digest of the physics + discretization, stored in trace headers.
pub fn params_digest(params: &DuffingParams, protocol: &RunProtocol) -> u64 {
    let text = format!(
        "omega={:x} beta={:x} drive={:x} gamma={:x} k={:x} eta={:x} T={:x} pot={:?} dt={:x} n={} dim={}",
        params.omega.to_bits(),
        params.beta.to_bits(),
        params.drive.to_bits(),
        params.gamma_damp.to_bits(),
        params.k_meas.to_bits(),
        params.eta.to_bits(),
        params.temperature.to_bits(),
        params.potential,
        protocol.dt.to_bits(),
        protocol.n_steps,
        protocol.numerics.dim.get(),
    );
    fnv1a64(text.as_bytes())
}

/// Empirical decision probabilities for one (truth row, decision column)
/// table, with inconclusive and failed trials tracked per row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    /// Row labels: each candidate played the truth role.
    pub truth_ids: Vec<String>,
    /// Column labels: candidate selected by the rule.
    pub model_ids: Vec<String>,
    /// counts[row][col]: times candidate `col` was selected under truth `row`.
    pub counts: Vec<Vec<usize>>,
    pub inconclusive: Vec<usize>,
    pub failed: Vec<usize>,
    /// Trials attempted per truth row.
    pub n_trials: usize,
    pub mu: f64,
}

impl ConfusionMatrix {
    pub fn from_trials(
        truth_ids: &[String],
        model_ids: &[String],
        trials: &[TrialResult],
        mu: f64,
        n_trials: usize,
    ) -> Self {
        let mut counts = vec![vec![0usize; model_ids.len()]; truth_ids.len()];
        let mut inconclusive = vec![0usize; truth_ids.len()];
        let mut failed = vec![0usize; truth_ids.len()];
        for trial in trials {
            let row = truth_ids.iter().position(|id| *id == trial.truth_id).expect("truth row");
            match trial.decide_at(mu) {
                None => failed[row] += 1,
                Some(decision) => match decision.outcome {
                    Outcome::Inconclusive => inconclusive[row] += 1,
                    Outcome::Selected(id) => {
                        let col = model_ids.iter().position(|m| *m == id).expect("model column");
                        counts[row][col] += 1;
                    }
                },
            }
        }
        ConfusionMatrix {
            truth_ids: truth_ids.to_vec(),
            model_ids: model_ids.to_vec(),
            counts,
            inconclusive,
            failed,
            n_trials,
            mu,
        }
    }

    fn decided_and_inconclusive(&self, row: usize) -> usize {
        self.n_trials - self.failed[row]
    }

    /// P(select column | truth row) over non-failed trials.
    pub fn probability(&self, truth_id: &str, model_id: &str) -> f64 {
        let row = self.truth_ids.iter().position(|id| id == truth_id).expect("truth row");
        let col = self.model_ids.iter().position(|id| id == model_id).expect("model column");
        let denom = self.decided_and_inconclusive(row);
        if denom == 0 {
            return f64::NAN;
        }
        self.counts[row][col] as f64 / denom as f64
    }

    pub fn inconclusive_rate(&self, truth_id: &str) -> f64 {
        let row = self.truth_ids.iter().position(|id| id == truth_id).expect("truth row");
        let denom = self.decided_and_inconclusive(row);
        if denom == 0 {
            return f64::NAN;
        }
        self.inconclusive[row] as f64 / denom as f64
    }

    /// Binomial standard error √(p(1−p)/N) for one cell.
    pub fn standard_error(&self, truth_id: &str, model_id: &str) -> f64 {
        let row = self.truth_ids.iter().position(|id| id == truth_id).expect("truth row");
        let n = self.decided_and_inconclusive(row);
        if n == 0 {
            return f64::NAN;
        }
        let p = self.probability(truth_id, model_id);
        (p * (1.0 - p) / n as f64).sqrt()
    }

    /// Rows sum to 1 over {decisions, inconclusive} for non-failed trials.
    pub fn validate(&self) -> Result<()> {
        for (row, truth) in self.truth_ids.iter().enumerate() {
            let total: usize =
                self.counts[row].iter().sum::<usize>() + self.inconclusive[row] + self.failed[row];
            if total != self.n_trials {
                return Err(QcError::InvalidConfig(format!(
                    "confusion row {truth}: {total} != n_trials {}",
                    self.n_trials
                )));
            }
            let denom = self.decided_and_inconclusive(row);
            if denom > 0 {
                let p_sum: f64 = self
                    .model_ids
                    .iter()
                    .map(|m| self.probability(truth, m))
                    .sum::<f64>()
                    + self.inconclusive_rate(truth);
                if (p_sum - 1.0).abs() > 1e-12 {
                    return Err(QcError::InvalidConfig(format!(
                        "confusion row {truth} probabilities sum to {p_sum}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// One operating point of the decision rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub mu: f64,
    /// P(select row-candidate | truth row-candidate), per truth row.
    pub correct_rates: Vec<f64>,
    pub inconclusive_rates: Vec<f64>,
    /// P(select Q | truth C) and P(select C | truth Q) layout for two models:
    /// rate[row][col] of selecting column under truth row.
    pub selection_rates: Vec<Vec<f64>>,
}

/// Selection rates as a function of the threshold μ, re-thresholding stored
/// posteriors without re-running any filter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub truth_ids: Vec<String>,
    pub model_ids: Vec<String>,
    pub points: Vec<RocPoint>,
}

pub fn roc_curve(
    truth_ids: &[String],
    model_ids: &[String],
    trials: &[TrialResult],
    mu_grid: &[f64],
    n_trials: usize,
) -> Result<RocCurve> {
    for id in truth_ids {
        if !trials.iter().any(|t| t.truth_id == *id) {
            return Err(QcError::InvalidConfig(format!("no trials for truth {id}")));
        }
    }
    let mut points = Vec::with_capacity(mu_grid.len());
    for &mu in mu_grid {
        let cm = ConfusionMatrix::from_trials(truth_ids, model_ids, trials, mu, n_trials);
        let correct_rates = truth_ids.iter().map(|id| cm.probability(id, id)).collect();
        let inconclusive_rates = truth_ids.iter().map(|id| cm.inconclusive_rate(id)).collect();
        let selection_rates = truth_ids
            .iter()
            .map(|t| model_ids.iter().map(|m| cm.probability(t, m)).collect())
            .collect();
        points.push(RocPoint { mu, correct_rates, inconclusive_rates, selection_rates });
    }
    Ok(RocCurve {
        truth_ids: truth_ids.to_vec(),
        model_ids: model_ids.to_vec(),
        points,
    })
}

/// Run `n_trials` per truth row (each candidate takes the truth role) and
/// tabulate the confusion matrix at the protocol's μ. Trials run in
/// parallel; seeds are derived per (grid_index, truth id, trial index).
pub fn estimate_confusion(
    candidates: &[CandidateModel],
    protocol: &RunProtocol,
    n_trials: usize,
    base_seed: u64,
    grid_index: usize,
) -> Result<(ConfusionMatrix, Vec<TrialResult>)> {
    if n_trials == 0 {
        return Err(QcError::InvalidConfig("n_trials must be >= 1".into()));
    }
    let jobs = trial_jobs(candidates, n_trials, base_seed, grid_index)?;
    let trials: Vec<TrialResult> = jobs
        .par_iter()
        .map(|job| run_trial(&candidates[job.truth_index], candidates, protocol, job.seed))
        .collect();
    let truth_ids: Vec<String> = candidates.iter().map(|c| c.id.clone()).collect();
    let model_ids = truth_ids.clone();
    let cm = ConfusionMatrix::from_trials(&truth_ids, &model_ids, &trials, protocol.mu, n_trials);
    cm.validate()?;
    Ok((cm, trials))
}

#[derive(Debug, Clone, Copy)]
struct TrialJob {
    truth_index: usize,
    seed: u64,
}

fn trial_jobs(
    candidates: &[CandidateModel],
    n_trials: usize,
    base_seed: u64,
    grid_index: usize,
) -> Result<Vec<TrialJob>> {
    let mut jobs = Vec::with_capacity(candidates.len() * n_trials);
    let mut seen = std::collections::HashSet::new();
    for (truth_index, truth) in candidates.iter().enumerate() {
        for trial in 0..n_trials {
            let seed = trial_seed(base_seed, grid_index, &truth.id, trial);
            if !seen.insert(seed) {
                return Err(QcError::SeedCollision { seed });
            }
            jobs.push(TrialJob { truth_index, seed });
        }
    }
    Ok(jobs)
}

/// One (T, η) grid point with its tabulated decisions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub temperature: f64,
    pub eta: f64,
    pub grid_index: usize,
    pub confusion: ConfusionMatrix,
    pub trials: Vec<TrialResult>,
}

/// Full temperature × efficiency campaign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub cells: Vec<SweepCell>,
    pub base_seed: u64,
    pub n_trials: usize,
}

impl SweepResult {
    pub fn cell(&self, temperature: f64, eta: f64) -> Option<&SweepCell> {
        self.cells
            .iter()
            .find(|c| c.temperature == temperature && c.eta == eta)
    }

    /// Stable digest over the deterministic content (seeds, log-likelihood
    /// bits, decisions, counts); wall times and other telemetry excluded.
    pub fn determinism_digest(&self) -> u64 {
        let mut text = String::new();
        for cell in &self.cells {
            text.push_str(&format!(
                "cell {} T={:x} eta={:x}\n",
                cell.grid_index,
                cell.temperature.to_bits(),
                cell.eta.to_bits()
            ));
            for row in &cell.confusion.counts {
                text.push_str(&format!("{row:?}\n"));
            }
            text.push_str(&format!(
                "inc {:?} fail {:?}\n",
                cell.confusion.inconclusive, cell.confusion.failed
            ));
            for t in &cell.trials {
                text.push_str(&format!("{} {} ", t.truth_id, t.seed));
                for l in &t.logliks {
                    text.push_str(&format!("{:x} ", l.to_bits()));
                }
                match &t.decision {
                    Some(d) => text.push_str(&format!("{:?}\n", d.outcome)),
                    None => text.push_str("failed\n"),
                }
            }
        }
        fnv1a64(text.as_bytes())
    }
}

/// Run one confusion estimate per (T, η) grid point. Grid points get
/// disjoint seed blocks through their grid index; all trials across the
/// whole grid go through one parallel pool.
pub fn sweep(
    t_grid: &[f64],
    eta_grid: &[f64],
    base_params: &DuffingParams,
    protocol: &RunProtocol,
    n_trials: usize,
    base_seed: u64,
) -> Result<SweepResult> {
    if t_grid.is_empty() || eta_grid.is_empty() {
        return Err(QcError::InvalidConfig("sweep grids must be non-empty".into()));
    }
    if n_trials == 0 {
        return Err(QcError::InvalidConfig("n_trials must be >= 1".into()));
    }
    // build per-cell candidate sets and one flat job list
    struct CellSpec {
        temperature: f64,
        eta: f64,
        grid_index: usize,
        candidates: Vec<CandidateModel>,
    }
    let mut cells = Vec::new();
    let mut grid_index = 0usize;
    for &t in t_grid {
        for &eta in eta_grid {
            let mut params = *base_params;
            params.temperature = t;
            params.eta = eta;
            params.validate()?;
            cells.push(CellSpec {
                temperature: t,
                eta,
                grid_index,
                candidates: vec![
                    CandidateModel::quantum(params),
                    CandidateModel::classical(params),
                ],
            });
            grid_index += 1;
        }
    }
    let mut flat: Vec<(usize, usize, u64)> = Vec::new(); // (cell, truth_index, seed)
    let mut seen = std::collections::HashSet::new();
    for (cell_idx, cell) in cells.iter().enumerate() {
        for (truth_index, truth) in cell.candidates.iter().enumerate() {
            for trial in 0..n_trials {
                let seed = trial_seed(base_seed, cell.grid_index, &truth.id, trial);
                if !seen.insert(seed) {
                    return Err(QcError::SeedCollision { seed });
                }
                flat.push((cell_idx, truth_index, seed));
            }
        }
    }
    let results: Vec<TrialResult> = flat
        .par_iter()
        .map(|&(cell_idx, truth_index, seed)| {
            let cell = &cells[cell_idx];
            run_trial(&cell.candidates[truth_index], &cell.candidates, protocol, seed)
        })
        .collect();

    let mut out_cells = Vec::with_capacity(cells.len());
    for (cell_idx, cell) in cells.iter().enumerate() {
        let trials: Vec<TrialResult> = flat
            .iter()
            .zip(&results)
            .filter(|((ci, _, _), _)| *ci == cell_idx)
            .map(|(_, r)| r.clone())
            .collect();
        let truth_ids: Vec<String> = cell.candidates.iter().map(|c| c.id.clone()).collect();
        let cm = ConfusionMatrix::from_trials(
            &truth_ids,
            &truth_ids,
            &trials,
            protocol.mu,
            n_trials,
        );
        cm.validate()?;
        out_cells.push(SweepCell {
            temperature: cell.temperature,
            eta: cell.eta,
            grid_index: cell.grid_index,
            confusion: cm,
            trials,
        });
    }
    Ok(SweepResult { cells: out_cells, base_seed, n_trials })
}
