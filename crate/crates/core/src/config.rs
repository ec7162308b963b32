//! Run configuration: physics, numerics, selection, and campaign settings.
//!
//! The defaults reproduce the reference double-well setup (ω = 1, β = 0.5,
//! g = 0, Γ = 0.05, k = 0.025, N = 500) at desk scale: 50 cycles of the
//! linear oscillator at 1000 steps per cycle, 60 basis states, 20 trials per
//! truth model at (T, η) = (0.2, 0.6). Every field can be overridden from a
//! JSON file; validation happens before any compute starts.

use serde::{Deserialize, Serialize};

use crate::error::{QcError, Result};
use crate::experiment::RunProtocol;
use crate::operators::{DuffingParams, FockDim, PotentialShape};
use crate::quantum::QuantumFilterOptions;
use crate::selector::SelectionNumerics;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PhysicsConfig {
    pub omega: f64,
    pub beta: f64,
    pub drive: f64,
    pub gamma_damp: f64,
    pub k_meas: f64,
    pub eta: f64,
    pub temperature: f64,
    pub potential: PotentialShape,
}

impl Default for PhysicsConfig {
    fn default() -> Self {
        let p = DuffingParams::reference();
        PhysicsConfig {
            omega: p.omega,
            beta: p.beta,
            drive: p.drive,
            gamma_damp: p.gamma_damp,
            k_meas: p.k_meas,
            eta: p.eta,
            temperature: p.temperature,
            potential: p.potential,
        }
    }
}

impl PhysicsConfig {
    pub fn params(&self) -> DuffingParams {
        DuffingParams {
            omega: self.omega,
            beta: self.beta,
            drive: self.drive,
            gamma_damp: self.gamma_damp,
            k_meas: self.k_meas,
            eta: self.eta,
            temperature: self.temperature,
            potential: self.potential,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NumericsConfig {
    /// Retained Fock levels (validated range 60–100 for production work).
    pub dim: usize,
    /// Time steps per linear-oscillator cycle 2π/ω.
    pub steps_per_cycle: usize,
    /// Record length in cycles.
    pub n_cycles: usize,
    /// Particle count of the classical conditional filter.
    pub n_particles: usize,
    /// Resample when ESS < ess_threshold · N.
    pub ess_threshold: f64,
    /// Moving-basis recenter trigger.
    pub delta_shift: f64,
}

impl Default for NumericsConfig {
    fn default() -> Self {
        NumericsConfig {
            dim: 60,
            steps_per_cycle: 1000,
            n_cycles: 50,
            n_particles: crate::particle::DEFAULT_N_PARTICLES,
            ess_threshold: crate::particle::DEFAULT_ESS_FRACTION,
            delta_shift: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SelectionConfig {
    /// Neyman-Pearson acceptance threshold (μ = 1 is the Bayes rule).
    pub mu: f64,
    /// Threshold grid for ROC curves.
    pub mu_grid: Vec<f64>,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig { mu: 1.0, mu_grid: vec![1.0, 1.5, 2.0, 5.0, 10.0] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CampaignConfig {
    pub t_grid: Vec<f64>,
    pub eta_grid: Vec<f64>,
    /// Trials per truth model per grid point.
    pub n_trials: usize,
    pub base_seed: u64,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        CampaignConfig {
            t_grid: vec![0.2],
            eta_grid: vec![0.6],
            n_trials: 20,
            base_seed: 20250809,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OutputConfig {
    pub directory: String,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { directory: "qcselect-out".into() }
    }
}

/// Complete resolved configuration of a run.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub physics: PhysicsConfig,
    pub numerics: NumericsConfig,
    pub selection: SelectionConfig,
    pub campaign: CampaignConfig,
    pub output: OutputConfig,
}

impl RunConfig {
    /// Parse a JSON config; missing fields take their defaults.
    pub fn from_json(text: &str) -> Result<Self> {
        let config: RunConfig = serde_json::from_str(text)
            .map_err(|e| QcError::InvalidConfig(format!("config parse error: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn params(&self) -> DuffingParams {
        self.physics.params()
    }

    pub fn dim(&self) -> Result<FockDim> {
        FockDim::new(self.numerics.dim)
    }

    /// Step size 2π/(ω·steps_per_cycle).
    pub fn dt(&self) -> f64 {
        2.0 * std::f64::consts::PI / (self.physics.omega * self.numerics.steps_per_cycle as f64)
    }

    pub fn n_steps(&self) -> usize {
        self.numerics.n_cycles * self.numerics.steps_per_cycle
    }

    pub fn selection_numerics(&self) -> Result<SelectionNumerics> {
        Ok(SelectionNumerics {
            dim: self.dim()?,
            n_particles: self.numerics.n_particles,
            ess_threshold: self.numerics.ess_threshold,
            quantum: QuantumFilterOptions {
                delta_shift: self.numerics.delta_shift,
                ..QuantumFilterOptions::default()
            },
        })
    }

    pub fn protocol(&self) -> Result<RunProtocol> {
        Ok(RunProtocol {
            dt: self.dt(),
            n_steps: self.n_steps(),
            numerics: self.selection_numerics()?,
            mu: self.selection.mu,
        })
    }

    /// Check every module precondition up front.
    pub fn validate(&self) -> Result<()> {
        self.params().validate()?;
        let mut problems = Vec::new();
        if self.numerics.dim < 2 {
            problems.push(format!("numerics.dim must be >= 2, got {}", self.numerics.dim));
        }
        if self.numerics.steps_per_cycle == 0 {
            problems.push("numerics.steps_per_cycle must be >= 1".into());
        }
        if self.numerics.n_cycles == 0 {
            problems.push("numerics.n_cycles must be >= 1".into());
        }
        if self.numerics.n_particles < 2 {
            problems.push(format!(
                "numerics.n_particles must be >= 2, got {}",
                self.numerics.n_particles
            ));
        }
        if !(0.0..=1.0).contains(&self.numerics.ess_threshold) {
            problems.push(format!(
                "numerics.ess_threshold must be in [0, 1], got {}",
                self.numerics.ess_threshold
            ));
        }
        if !(self.numerics.delta_shift > 0.0) {
            problems.push(format!(
                "numerics.delta_shift must be > 0, got {}",
                self.numerics.delta_shift
            ));
        }
        if !(self.selection.mu >= 1.0) {
            problems.push(format!("selection.mu must be >= 1, got {}", self.selection.mu));
        }
        if self.selection.mu_grid.iter().any(|m| !(*m >= 1.0)) {
            problems.push("selection.mu_grid entries must all be >= 1".into());
        }
        if self.campaign.t_grid.is_empty() || self.campaign.eta_grid.is_empty() {
            problems.push("campaign grids must be non-empty".into());
        }
        if self.campaign.t_grid.iter().any(|t| *t < 0.0 || !t.is_finite()) {
            problems.push("campaign.t_grid entries must be finite and >= 0".into());
        }
        if self
            .campaign
            .eta_grid
            .iter()
            .any(|e| !(0.0..=1.0).contains(e))
        {
            problems.push("campaign.eta_grid entries must be in [0, 1]".into());
        }
        if self.campaign.n_trials == 0 {
            problems.push("campaign.n_trials must be >= 1".into());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(QcError::InvalidConfig(problems.join("; ")))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid_and_reference_scale() {
        let config = RunConfig::default();
        config.validate().unwrap();
        assert_eq!(config.numerics.dim, 60);
        assert_eq!(config.n_steps(), 50_000);
        assert!((config.dt() - 2.0 * std::f64::consts::PI / 1000.0).abs() < 1e-15);
        let p = config.params();
        assert_eq!(p.gamma_damp, 0.05);
        assert_eq!(p.k_meas, 0.025);
    }

    #[test]
    fn partial_json_overrides_merge_with_defaults() {
        let config = RunConfig::from_json(
            r#"{"numerics": {"dim": 80}, "campaign": {"n_trials": 3}}"#,
        )
        .unwrap();
        assert_eq!(config.numerics.dim, 80);
        assert_eq!(config.campaign.n_trials, 3);
        assert_eq!(config.numerics.steps_per_cycle, 1000);
        assert_eq!(config.physics.eta, 0.6);
    }

    #[test]
    fn config_round_trips_through_json() {
        let config = RunConfig::default();
        let text = config.to_json_pretty();
        let back = RunConfig::from_json(&text).unwrap();
        assert_eq!(config, back);
    }

    #[test]
    fn invalid_configs_rejected_before_work() {
        assert!(RunConfig::from_json(r#"{"physics": {"eta": 1.5}}"#).is_err());
        assert!(RunConfig::from_json(r#"{"numerics": {"dim": 1}}"#).is_err());
        assert!(RunConfig::from_json(r#"{"selection": {"mu": 0.5}}"#).is_err());
        assert!(RunConfig::from_json(r#"{"campaign": {"eta_grid": [2.0]}}"#).is_err());
        assert!(RunConfig::from_json(r#"{"campaign": {"n_trials": 0}}"#).is_err());
        assert!(RunConfig::from_json("not json").is_err());
    }
}
