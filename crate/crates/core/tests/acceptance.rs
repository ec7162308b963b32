//! Acceptance suite: one test per release criterion, each printing a
//! PASS/FAIL line (visible with `--nocapture`). The statistical criteria
//! share one desk-scale Monte Carlo campaign computed once.
//!
//! Expected wall time on two cores is on the order of ten minutes; the
//! campaign (criteria 7, 8, 10) dominates.

use std::sync::OnceLock;

use qcselect_core::classical::simulate_classical_trace;
use qcselect_core::experiment::{roc_curve, sweep, RunProtocol, SweepResult};
use qcselect_core::linalg;
use qcselect_core::operators::{
    build_duffing_hamiltonian, build_lindblads_shifted, build_position_momentum,
    build_static_hamiltonian_shifted, displacement, eigendecompose, spectrum, thermal_state,
    DuffingParams, FockDim, PotentialShape,
};
use qcselect_core::particle::{init_ensemble, pf_step};
use qcselect_core::quantum::{
    simulate_quantum_trace, QuantumFilter, QuantumFilterOptions, RouchonPropagator,
};
use qcselect_core::seeds::{stream_rng, trial_seed, StreamRole};
use qcselect_core::selector::{
    np_select, run_selection, CandidateModel, ModelKind, Outcome, SelectionNumerics,
};
use qcselect_core::linalg::{CMatrix, C64};

const CYCLE: f64 = 2.0 * std::f64::consts::PI;

fn fock(n: usize) -> FockDim {
    FockDim::new(n).unwrap()
}

fn report(criterion: &str, pass: bool, detail: &str) {
    println!(
        "acceptance {criterion}: {} — {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "{criterion} failed: {detail}");
}

/// Criterion 1: lowest Duffing gaps at dim 80 match (0.396, 0.941, 1.061)
/// within ±0.01, in under a second.
#[test]
fn criterion_1_spectrum_reproduction() {
    let started = std::time::Instant::now();
    let params = DuffingParams::reference();
    let h = build_duffing_hamiltonian(fock(80), &params, 0.0).unwrap();
    let levels = spectrum(&h, 4).unwrap();
    let gaps = [
        levels[1] - levels[0],
        levels[2] - levels[1],
        levels[3] - levels[2],
    ];
    let expected = [0.396, 0.941, 1.061];
    let ok = gaps
        .iter()
        .zip(&expected)
        .all(|(g, e)| (g - e).abs() <= 0.01);
    let elapsed = started.elapsed().as_secs_f64();
    report(
        "criterion 1 (spectrum)",
        ok && elapsed < 1.0,
        &format!("gaps ({:.4}, {:.4}, {:.4}) vs (0.396, 0.941, 1.061), {elapsed:.2}s", gaps[0], gaps[1], gaps[2]),
    );
}

/// Criterion 2: analytic barrier height 1/(4β) = 0.5 and level placement
/// (ground below the barrier top, first excited above).
#[test]
fn criterion_2_barrier_and_wells() {
    let params = DuffingParams::reference();
    let barrier = params.barrier_height().unwrap();
    let h = build_duffing_hamiltonian(fock(80), &params, 0.0).unwrap();
    let levels = spectrum(&h, 2).unwrap();
    // the barrier top sits at V(0) = 0; the well bottoms at −0.5
    let ok = (barrier - 0.5).abs() < 1e-15 && levels[0] < 0.0 && levels[1] > 0.0;
    report(
        "criterion 2 (barrier geometry)",
        ok,
        &format!("barrier {barrier}, E0 {:.4}, E1 {:.4}", levels[0], levels[1]),
    );
}

/// Criterion 3: SME integrity over 10⁴ steps at the reference parameters,
/// dim 80: trace and Hermiticity at every step, positivity every 100th.
#[test]
fn criterion_3_sme_integrity() {
    let started = std::time::Instant::now();
    let params = DuffingParams::reference();
    let dim = fock(80);
    let dt = CYCLE / 1000.0;
    let opts = QuantumFilterOptions::default();
    let mut filter = QuantumFilter::new(&params, dim, dt, opts).unwrap();
    let mut rng = stream_rng(31415, StreamRole::TruthSim);
    let sqrt_dt = dt.sqrt();
    let mut worst_trace: f64 = 0.0;
    let mut worst_herm: f64 = 0.0;
    let mut worst_eig: f64 = f64::INFINITY;
    use rand::Rng as _;
    for step in 0..10_000usize {
        let dw: f64 = rng.sample::<f64, _>(rand_distr::StandardNormal);
        filter.simulate_step(dw * sqrt_dt).unwrap();
        let rho = &filter.state().rho;
        worst_trace = worst_trace.max((rho.trace() - 1.0).abs());
        worst_herm = worst_herm.max(linalg::hermiticity_residue(rho.matrix()));
        if (step + 1) % 100 == 0 {
            worst_eig = worst_eig.min(linalg::min_eigenvalue(rho.matrix()));
        }
    }
    let elapsed = started.elapsed().as_secs_f64();
    let ok = worst_trace < 1e-12 && worst_herm < 1e-10 && worst_eig > -1e-8 && elapsed < 120.0;
    report(
        "criterion 3 (SME integrity)",
        ok,
        &format!(
            "|tr−1| ≤ {worst_trace:.2e}, herm ≤ {worst_herm:.2e}, min eig ≥ {worst_eig:.2e}, {elapsed:.1}s"
        ),
    );
}

/// Criterion 4: unitary limit (k = Γ = 0) against eigendecomposition
/// propagation, dim 40, 10 cycles at 1000 steps per cycle, ⟨q̂⟩ error < 1e-3.
#[test]
fn criterion_4_unitary_oracle() {
    let mut params = DuffingParams::reference();
    params.gamma_damp = 0.0;
    params.k_meas = 0.0;
    params.eta = 0.0;
    params.temperature = 0.0;
    let dim = fock(40);
    let n = 40;
    let dt = CYCLE / 1000.0;

    // displaced vacuum α = 0.5 evolving in the double well
    let d = displacement(dim, C64::new(0.5, 0.0), 10.0, 1e-8).unwrap();
    let mut vac = CMatrix::zeros(n, n);
    vac[(0, 0)] = C64::new(1.0, 0.0);
    let rho0 = &(d.matrix() * vac) * d.matrix().adjoint();

    let h = build_static_hamiltonian_shifted(dim, &params, 0.0, 0.0);
    let (ls, etas) = build_lindblads_shifted(dim, &params, 0.0, 0.0);
    let mut prop = RouchonPropagator::new(&h, ls, etas, dt).unwrap();
    let (evals, evecs) = eigendecompose(&h).unwrap();
    let (q_op, _) = build_position_momentum(dim);

    let mut rho = rho0.clone();
    let mut worst: f64 = 0.0;
    for step in 1..=10_000usize {
        prop.apply(&mut rho, 0.0, step, None).unwrap();
        if step % 250 == 0 {
            let t = step as f64 * dt;
            let phases = CMatrix::from_fn(n, n, |i, j| {
                if i == j {
                    C64::new(0.0, -evals[i] * t).exp()
                } else {
                    C64::new(0.0, 0.0)
                }
            });
            let u = &evecs * phases * evecs.adjoint();
            let exact = &u * rho0.clone() * u.adjoint();
            let got = linalg::trace_product_banded(q_op.matrix(), 1, &rho).re;
            let want = linalg::trace_product(q_op.matrix(), &exact).re;
            worst = worst.max((got - want).abs());
        }
    }
    report(
        "criterion 4 (unitary oracle)",
        worst < 1e-3,
        &format!("max |<q>| deviation {worst:.2e} over 10 cycles"),
    );
}

/// Discrete Kalman filter matched to the symplectic Euler–Maruyama model:
/// momentum first with noise, position from the updated momentum, record on
/// the post-update position. Test-only oracle, independent of the particle
/// filter implementation.
struct KalmanOracle {
    x: [f64; 2], // (q, p)
    p: [[f64; 2]; 2],
    f: [[f64; 2]; 2],
    q_noise: [[f64; 2]; 2],
    h: [f64; 2],
    r: f64,
}

impl KalmanOracle {
    fn new(params: &DuffingParams, dt: f64) -> Self {
        assert_eq!(params.potential, PotentialShape::SingleWell);
        assert_eq!(params.beta, 0.0);
        let w2 = params.omega * params.omega;
        let g = params.gamma_damp;
        // p' = p − w2·q·dt − g·p·dt + w;  q' = q + p'·dt
        let f = [
            [1.0 - w2 * dt * dt, dt * (1.0 - g * dt)],
            [-w2 * dt, 1.0 - g * dt],
        ];
        let sigma2 = (2.0 * params.k_meas + 2.0 * params.gamma_damp * params.temperature) * dt;
        let q_noise = [
            [sigma2 * dt * dt, sigma2 * dt],
            [sigma2 * dt, sigma2],
        ];
        let var0 = params.nbar() + 0.5;
        KalmanOracle {
            x: [0.0, 0.0],
            p: [[var0, 0.0], [0.0, var0]],
            f,
            q_noise,
            h: [params.signal_weight() * dt, 0.0],
            r: dt,
        }
    }

    fn step(&mut self, dy: f64) {
        // predict
        let f = &self.f;
        let x = [
            f[0][0] * self.x[0] + f[0][1] * self.x[1],
            f[1][0] * self.x[0] + f[1][1] * self.x[1],
        ];
        let mut fp = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                fp[i][j] = f[i][0] * self.p[0][j] + f[i][1] * self.p[1][j];
            }
        }
        let mut p = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                p[i][j] = fp[i][0] * f[j][0] + fp[i][1] * f[j][1] + self.q_noise[i][j];
            }
        }
        // update with dy = h·x + v
        let h = &self.h;
        let innovation = dy - (h[0] * x[0] + h[1] * x[1]);
        let ph = [
            p[0][0] * h[0] + p[0][1] * h[1],
            p[1][0] * h[0] + p[1][1] * h[1],
        ];
        let s = h[0] * ph[0] + h[1] * ph[1] + self.r;
        let k = [ph[0] / s, ph[1] / s];
        self.x = [x[0] + k[0] * innovation, x[1] + k[1] * innovation];
        let mut next = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                next[i][j] = p[i][j] - k[i] * (h[0] * p[0][j] + h[1] * p[1][j]);
            }
        }
        self.p = next;
    }
}

/// Criterion 5: the particle filter (N = 2000) tracks the closed-form
/// Kalman posterior mean within 3 posterior standard deviations at ≥ 99% of
/// 10⁴ steps, on 5 seeds, in a stable linear configuration.
#[test]
fn criterion_5_kalman_oracle() {
    let mut params = DuffingParams::reference();
    params.potential = PotentialShape::SingleWell;
    params.beta = 0.0;
    params.temperature = 0.3;
    let dt = CYCLE / 1000.0;
    let n_steps = 10_000;
    let mut worst_fraction: f64 = 1.0;
    for seed in 1..=5u64 {
        let trace = simulate_classical_trace(&params, n_steps, dt, seed, 0).unwrap();
        let mut pf_rng = stream_rng(seed, StreamRole::Candidate(1));
        let mut ens = init_ensemble(2000, params.nbar(), 0.5, &mut pf_rng).unwrap();
        let mut kf = KalmanOracle::new(&params, dt);
        let mut within = 0usize;
        for (step, &dy) in trace.increments.iter().enumerate() {
            pf_step(&mut ens, dy, dt, step as f64 * dt, &params, &mut pf_rng, step).unwrap();
            kf.step(dy);
            let (q_pf, _) = ens.mean();
            let sd = kf.p[0][0].sqrt();
            if (q_pf - kf.x[0]).abs() <= 3.0 * sd {
                within += 1;
            }
        }
        let fraction = within as f64 / n_steps as f64;
        worst_fraction = worst_fraction.min(fraction);
    }
    report(
        "criterion 5 (Kalman oracle)",
        worst_fraction >= 0.99,
        &format!("worst within-3σ fraction {worst_fraction:.4} over 5 seeds"),
    );
}

/// Criterion 6: two identical candidate models stay at (½, ½) within 1e-9
/// for the whole run and the μ = 1 selection is inconclusive.
#[test]
fn criterion_6_identical_models() {
    let params = DuffingParams::reference();
    let numerics = SelectionNumerics {
        dim: fock(40),
        n_particles: 200,
        ..SelectionNumerics::default()
    };
    let dt = CYCLE / 1000.0;
    let trace = simulate_classical_trace(&params, 3000, dt, 77, 0).unwrap();
    let candidates = vec![
        CandidateModel { id: "C1".into(), kind: ModelKind::Classical, params },
        CandidateModel { id: "C2".into(), kind: ModelKind::Classical, params },
    ];
    let out = run_selection(&trace, &candidates, &numerics, 77, true).unwrap();
    let worst = out
        .series
        .iter()
        .map(|p| (p[0] - 0.5).abs())
        .fold(0.0, f64::max);
    let decision = np_select(&out.posterior, 1.0);
    let ok = worst < 1e-9 && decision.outcome == Outcome::Inconclusive;
    report(
        "criterion 6 (identical models)",
        ok,
        &format!("max |p − ½| = {worst:.2e}, outcome {:?}", decision.outcome),
    );
}

/// Shared desk-scale campaign for criteria 7, 8 and 10: the reference
/// configuration at η = 0.6 and T ∈ {0.2, 1.5}, dim 60, 50 cycles at 1000
/// steps per cycle, 20 trials per truth model per cell.
fn campaign() -> &'static SweepResult {
    static CAMPAIGN: OnceLock<SweepResult> = OnceLock::new();
    CAMPAIGN.get_or_init(|| {
        let params = DuffingParams::reference();
        let protocol = RunProtocol {
            dt: CYCLE / 1000.0,
            n_steps: 50_000,
            numerics: SelectionNumerics {
                dim: fock(60),
                n_particles: 500,
                ..SelectionNumerics::default()
            },
            mu: 1.0,
        };
        sweep(&[0.2, 1.5], &[0.6], &params, &protocol, 20, 20250809).unwrap()
    })
}

/// Criterion 7: desk-scale reproduction of the low-temperature operating
/// point: p(Q|Q) ≥ 0.8 and p(C|C) ≥ 0.8 at (T, η) = (0.2, 0.6), μ = 1.
#[test]
fn criterion_7_desk_scale_distinguishability() {
    let result = campaign();
    let cell = result.cell(0.2, 0.6).expect("low-T cell");
    let cm = &cell.confusion;
    let p_qq = cm.probability("Q", "Q");
    let p_cc = cm.probability("C", "C");
    let band = |p: f64, id: &str| 1.96 * cm.standard_error(id, id).max(0.0);
    let failures: usize = cm.failed.iter().sum();
    let ok = p_qq >= 0.8 && p_cc >= 0.8;
    report(
        "criterion 7 (desk-scale distinguishability)",
        ok,
        &format!(
            "p(Q|Q) = {p_qq:.3} ± {:.3}, p(C|C) = {p_cc:.3} ± {:.3} (95% bands), {failures} failed trials",
            band(p_qq, "Q"),
            band(p_cc, "C"),
        ),
    );
}

/// Criterion 8: correct-identification quality degrades with temperature:
/// mean{p(Q|Q), p(C|C)} at T = 0.2 exceeds the value at T = 1.5 (fixed
/// seeds, point estimates).
#[test]
fn criterion_8_temperature_trend() {
    let result = campaign();
    let mean_correct = |t: f64| {
        let cm = &result.cell(t, 0.6).expect("cell").confusion;
        0.5 * (cm.probability("Q", "Q") + cm.probability("C", "C"))
    };
    let low = mean_correct(0.2);
    let high = mean_correct(1.5);
    report(
        "criterion 8 (temperature trend)",
        low > high,
        &format!("mean correct {low:.3} at T=0.2 vs {high:.3} at T=1.5"),
    );
}

/// Criterion 9: a sweep rerun with the same base seed is bit-identical for
/// any worker count (compared through the deterministic digest over seeds,
/// log-likelihood bits, decisions and counts).
#[test]
fn criterion_9_determinism_across_workers() {
    let params = DuffingParams::reference();
    let protocol = RunProtocol {
        dt: CYCLE / 500.0,
        n_steps: 1000,
        numerics: SelectionNumerics {
            dim: fock(24),
            n_particles: 60,
            ..SelectionNumerics::default()
        },
        mu: 1.0,
    };
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        pool.install(|| sweep(&[0.2, 1.5], &[0.3, 0.6], &params, &protocol, 2, 4242).unwrap())
    };
    let digests: Vec<u64> = [1usize, 2, 4]
        .iter()
        .map(|&t| run(t).determinism_digest())
        .collect();
    let ok = digests.windows(2).all(|w| w[0] == w[1]);
    report(
        "criterion 9 (determinism)",
        ok,
        &format!("digests {:016x}, {:016x}, {:016x} for 1/2/4 workers", digests[0], digests[1], digests[2]),
    );
}

/// Criterion 10: selection rates are non-increasing in μ over
/// {1, 1.5, 2, 5, 10}, re-thresholded on the stored posteriors of the
/// criterion-7 trials.
#[test]
fn criterion_10_roc_monotonicity() {
    let result = campaign();
    let cell = result.cell(0.2, 0.6).expect("low-T cell");
    let ids: Vec<String> = vec!["Q".into(), "C".into()];
    let mu_grid = [1.0, 1.5, 2.0, 5.0, 10.0];
    let roc = roc_curve(&ids, &ids, &cell.trials, &mu_grid, result.n_trials).unwrap();
    let mut ok = true;
    for row in 0..2 {
        for col in 0..2 {
            for w in roc.points.windows(2) {
                if w[1].selection_rates[row][col] > w[0].selection_rates[row][col] + 1e-15 {
                    ok = false;
                }
            }
        }
    }
    let rates: Vec<f64> = roc.points.iter().map(|p| p.correct_rates[0]).collect();
    report(
        "criterion 10 (ROC monotonicity)",
        ok,
        &format!("p(Q|Q) along mu grid: {rates:?}"),
    );
}

/// The quantum truth simulator also participates in criterion 3/7 style
/// runs through the trace replay identity; spot-check the full round trip
/// (simulate → serialize → read → condition) at small scale here so the
/// acceptance target exercises the wire format too.
#[test]
fn trace_round_trip_through_filter() {
    let params = DuffingParams::reference();
    let dim = fock(30);
    let dt = CYCLE / 500.0;
    let opts = QuantumFilterOptions::default();
    let trace = simulate_quantum_trace(&params, dim, 500, dt, 404, 7, opts).unwrap();
    let dir = std::env::temp_dir().join(format!("qcselect-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("trace.csv");
    trace.write_csv(&path).unwrap();
    let back = qcselect_core::trace::TimeTrace::read_csv(&path).unwrap();
    assert_eq!(trace, back);
    let mut f1 = QuantumFilter::new(&params, dim, dt, opts).unwrap();
    let mut f2 = QuantumFilter::new(&params, dim, dt, opts).unwrap();
    for (&a, &b) in trace.increments.iter().zip(&back.increments) {
        let i1 = f1.condition_step(a).unwrap();
        let i2 = f2.condition_step(b).unwrap();
        assert_eq!(i1.to_bits(), i2.to_bits());
    }
    let _ = std::fs::remove_dir_all(&dir);
    // thermal_state is exercised implicitly; pin one invariant here
    let rho = thermal_state(dim, params.nbar());
    assert!((rho.trace() - 1.0).abs() < 1e-14);
}
