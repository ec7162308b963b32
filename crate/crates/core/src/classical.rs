//! Classical truth model: the Duffing SDE driven by measurement and thermal
//! noise,
//!
//! ```text
//! dq = p dt
//! dp = (ω²q − βq³ − Γp + g·cos t) dt + √(2k) dY + √(2Γk_BT) dU
//! ```
//!
//! with the detected record dy = √(8ηk)·q·dt + dW, all three Wiener processes
//! independent. The momentum update is applied before the position update
//! (symplectic ordering), which keeps the noise-free energy drift bounded at
//! the spec'd step sizes; a fully simultaneous update grows energy secularly.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{QcError, Result};
use crate::operators::DuffingParams;
use crate::seeds::{stream_rng, StreamRole};
use crate::trace::{TimeTrace, TruthTag};

/// Default |q| beyond which integration is declared blown up.
pub const DEFAULT_ESCAPE_BOUND: f64 = 50.0;

/// Phase-space point of the classical particle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassicalState {
    pub q: f64,
    pub p: f64,
}

impl ClassicalState {
    /// Total energy ½p² + V(q).
    pub fn energy(&self, params: &DuffingParams) -> f64 {
        0.5 * self.p * self.p + params.potential_energy(self.q)
    }
}

/// One Euler–Maruyama update with caller-supplied noise increments
/// dY, dU ~ Normal(0, dt).
pub fn euler_maruyama_step(
    state: ClassicalState,
    params: &DuffingParams,
    t: f64,
    dw_y: f64,
    dw_u: f64,
    dt: f64,
) -> ClassicalState {
    let force = params.force(state.q);
    let drive = params.drive * t.cos();
    let thermal = (2.0 * params.gamma_damp * params.temperature).sqrt();
    let p = state.p
        + (force - params.gamma_damp * state.p + drive) * dt
        + (2.0 * params.k_meas).sqrt() * dw_y
        + thermal * dw_u;
    let q = state.q + p * dt;
    ClassicalState { q, p }
}

/// Check the escape bound, mapping violations to a blow-up error.
pub fn check_escape(state: &ClassicalState, step: usize, bound: f64) -> Result<()> {
    if !state.q.is_finite() || state.q.abs() > bound {
        return Err(QcError::Blowup { step, q_abs: state.q.abs(), bound });
    }
    Ok(())
}

/// Sample the quantum-matched thermal initial condition
/// q, p ~ Normal(0, n̄ + ½).
pub fn sample_thermal_initial<R: Rng + ?Sized>(params: &DuffingParams, rng: &mut R) -> ClassicalState {
    let sd = (params.nbar() + 0.5).sqrt();
    let q: f64 = rng.sample::<f64, _>(StandardNormal) * sd;
    let p: f64 = rng.sample::<f64, _>(StandardNormal) * sd;
    ClassicalState { q, p }
}

/// Generate a truth trace by integrating the SDE from a thermal sample.
///
/// Per step the record increment Δy = √(8ηk)·q·dt + ΔW uses the pre-step
/// position and the noise draw order is fixed (ΔW, ΔY, ΔU), so a given seed
/// reproduces the trace bit-exactly.
pub fn simulate_classical_trace(
    params: &DuffingParams,
    n_steps: usize,
    dt: f64,
    seed: u64,
    params_hash: u64,
) -> Result<TimeTrace> {
    params.validate()?;
    let mut rng = stream_rng(seed, StreamRole::TruthSim);
    let mut state = sample_thermal_initial(params, &mut rng);
    let sqrt_dt = dt.sqrt();
    let signal = params.signal_weight();
    let mut increments = Vec::with_capacity(n_steps);
    for step in 0..n_steps {
        let dw: f64 = rng.sample::<f64, _>(StandardNormal);
        let dy = signal * state.q * dt + dw * sqrt_dt;
        increments.push(dy);
        let dw_y = rng.sample::<f64, _>(StandardNormal) * sqrt_dt;
        let dw_u = rng.sample::<f64, _>(StandardNormal) * sqrt_dt;
        state = euler_maruyama_step(state, params, step as f64 * dt, dw_y, dw_u, dt);
        check_escape(&state, step, DEFAULT_ESCAPE_BOUND)?;
    }
    TimeTrace::new(dt, increments, Some(seed), TruthTag::Classical, params_hash)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::PotentialShape;
    use approx::assert_abs_diff_eq;

    fn no_noise_params() -> DuffingParams {
        let mut p = DuffingParams::reference();
        p.gamma_damp = 0.0;
        p.k_meas = 0.0;
        p.temperature = 0.0;
        p.eta = 0.0;
        p
    }

    #[test]
    fn force_vanishes_at_well_minimum() {
        let params = no_noise_params();
        let state = ClassicalState { q: 2.0_f64.sqrt(), p: 0.0 };
        let next = euler_maruyama_step(state, &params, 0.0, 0.0, 0.0, 0.001);
        assert_abs_diff_eq!(next.p, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(next.q, 2.0_f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn drift_at_origin() {
        let params = no_noise_params();
        let state = ClassicalState { q: 0.0, p: 1.0 };
        let next = euler_maruyama_step(state, &params, 0.0, 0.0, 0.0, 0.001);
        assert_abs_diff_eq!(next.q, 0.001, epsilon = 1e-15);
        assert_abs_diff_eq!(next.p, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn damping_single_step_arithmetic() {
        let mut params = no_noise_params();
        params.gamma_damp = 0.05;
        let state = ClassicalState { q: 0.0, p: 1.0 };
        let next = euler_maruyama_step(state, &params, 0.0, 0.0, 0.0, 0.001);
        assert_abs_diff_eq!(next.p, 0.99995, epsilon = 1e-12);
    }

    #[test]
    fn noise_free_energy_drift_bounded() {
        // double well, oscillation inside one well
        let params = no_noise_params();
        let dt = 1e-3;
        let mut state = ClassicalState { q: 2.0_f64.sqrt() + 0.3, p: 0.0 };
        let e0 = state.energy(&params);
        let mut worst: f64 = 0.0;
        for step in 0..10_000 {
            state = euler_maruyama_step(state, &params, step as f64 * dt, 0.0, 0.0, dt);
            let rel = ((state.energy(&params) - e0) / e0).abs();
            worst = worst.max(rel);
        }
        assert!(worst < 1e-3, "relative energy drift {worst}");
    }

    #[test]
    fn fixed_seed_reproduces_trace() {
        let params = DuffingParams::reference();
        let a = simulate_classical_trace(&params, 500, 0.006, 99, 1).unwrap();
        let b = simulate_classical_trace(&params, 500, 0.006, 99, 1).unwrap();
        assert_eq!(a, b);
        let c = simulate_classical_trace(&params, 500, 0.006, 100, 1).unwrap();
        assert_ne!(a.increments, c.increments);
    }

    #[test]
    fn zero_signal_increments_are_pure_noise() {
        let mut params = DuffingParams::reference();
        params.eta = 0.0;
        params.k_meas = 0.0;
        params.temperature = 0.0;
        let dt = 0.01;
        let n = 10_000;
        let trace = simulate_classical_trace(&params, n, dt, 7, 0).unwrap();
        let mean: f64 = trace.increments.iter().sum::<f64>() / n as f64;
        let var: f64 =
            trace.increments.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        // sample variance of N(0, dt): sd of estimate ~ dt * sqrt(2/n)
        assert_abs_diff_eq!(var, dt, epsilon = 3.0 * dt * (2.0 / n as f64).sqrt());
    }

    #[test]
    fn equipartition_long_run() {
        let mut params = DuffingParams::reference();
        params.potential = PotentialShape::SingleWell;
        params.beta = 0.0;
        params.k_meas = 0.0;
        params.eta = 0.0;
        params.temperature = 0.5;
        let dt: f64 = 0.005;
        let mut rng = stream_rng(3, StreamRole::TruthSim);
        let mut state = sample_thermal_initial(&params, &mut rng);
        let sqrt_dt = dt.sqrt();
        let mut sum_p2 = 0.0;
        let n: usize = 1_200_000;
        let burn = 200_000;
        for step in 0..n {
            let dw_y = rng.sample::<f64, _>(StandardNormal) * sqrt_dt;
            let dw_u = rng.sample::<f64, _>(StandardNormal) * sqrt_dt;
            state = euler_maruyama_step(state, &params, step as f64 * dt, dw_y, dw_u, dt);
            if step >= burn {
                sum_p2 += state.p * state.p;
            }
        }
        let var_p = sum_p2 / (n - burn) as f64;
        assert!(
            (var_p - params.temperature).abs() / params.temperature < 0.10,
            "Var(p) = {var_p}, expected ~{}",
            params.temperature
        );
    }

    /// Gibbs-law probability of |q| > 1 by Simpson quadrature. The SDE's
    /// stationary measure is e^{−E/T_eff} with T_eff = T + k/Γ: the
    /// measurement kicks √(2k)dY diffuse momentum without a matching drag
    /// term, so they raise the effective temperature above the bath's.
    fn gibbs_outside_fraction(params: &DuffingParams, t_eff: f64, edge: f64) -> f64 {
        let integrate = |lo: f64, hi: f64| -> f64 {
            let n = 4000;
            let h = (hi - lo) / n as f64;
            let f = |q: f64| (-params.potential_energy(q) / t_eff).exp();
            let mut acc = f(lo) + f(hi);
            for i in 1..n {
                let w = if i % 2 == 1 { 4.0 } else { 2.0 };
                acc += w * f(lo + i as f64 * h);
            }
            acc * h / 3.0
        };
        let z = integrate(-12.0, 12.0);
        2.0 * integrate(edge, 12.0) / z
    }

    #[test]
    fn double_well_residence_matches_gibbs_law() {
        let params = DuffingParams::reference();
        let t_eff = params.temperature + params.k_meas / params.gamma_damp;
        let expected = gibbs_outside_fraction(&params, t_eff, 1.0);
        assert_abs_diff_eq!(expected, 0.617, epsilon = 0.01);

        let dt = 2.0 * std::f64::consts::PI / 1000.0;
        let n = 300_000; // 300 cycles; hops are rare, so long runs are needed
        let mut rng = stream_rng(11, StreamRole::TruthSim);
        let mut state = sample_thermal_initial(&params, &mut rng);
        let sqrt_dt = dt.sqrt();
        let mut outside = 0usize;
        for step in 0..n {
            let dw_y = rng.sample::<f64, _>(StandardNormal) * sqrt_dt;
            let dw_u = rng.sample::<f64, _>(StandardNormal) * sqrt_dt;
            state = euler_maruyama_step(state, &params, step as f64 * dt, dw_y, dw_u, dt);
            if state.q.abs() > 1.0 {
                outside += 1;
            }
        }
        let frac = outside as f64 / n as f64;
        assert!(
            (frac - expected).abs() < 0.08,
            "well residence fraction {frac} vs Gibbs {expected}"
        );
    }

    #[test]
    fn escape_bound_detected() {
        let state = ClassicalState { q: 51.0, p: 0.0 };
        assert!(matches!(
            check_escape(&state, 3, DEFAULT_ESCAPE_BOUND),
            Err(QcError::Blowup { step: 3, .. })
        ));
    }

    #[test]
    fn wiener_streams_pairwise_independent() {
        // empirical cross-correlation of the three per-step draws
        let mut rng = stream_rng(5, StreamRole::TruthSim);
        let n = 100_000;
        let (mut sww, mut swy, mut swu, mut syu) = (0.0, 0.0, 0.0, 0.0);
        let mut draws = Vec::with_capacity(n);
        for _ in 0..n {
            let w: f64 = rng.sample(StandardNormal);
            let y: f64 = rng.sample(StandardNormal);
            let u: f64 = rng.sample(StandardNormal);
            draws.push((w, y, u));
            sww += w * w;
            swy += w * y;
            swu += w * u;
            syu += y * u;
        }
        let norm = sww / n as f64;
        let bound = 3.0 / (n as f64).sqrt();
        assert!((swy / n as f64 / norm).abs() < bound);
        assert!((swu / n as f64 / norm).abs() < bound);
        assert!((syu / n as f64 / norm).abs() < bound);
    }
}
