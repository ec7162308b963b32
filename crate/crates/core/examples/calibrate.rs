//! Scratch calibration: desk-scale trial statistics and step timing.
use qcselect_core::experiment::{run_trial, RunProtocol};
use qcselect_core::operators::{DuffingParams, FockDim};
use qcselect_core::selector::{CandidateModel, SelectionNumerics};
use std::time::Instant;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let n_trials: usize = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(4);
    let cycles: usize = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(50);
    let temperature: f64 = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(0.2);
    let dim: usize = args.get(4).map(|s| s.parse().unwrap()).unwrap_or(60);

    let mut params = DuffingParams::reference();
    params.temperature = temperature;
    params.eta = 0.6;
    let protocol = RunProtocol {
        dt: 2.0 * std::f64::consts::PI / 1000.0,
        n_steps: cycles * 1000,
        numerics: SelectionNumerics {
            dim: FockDim::new(dim).unwrap(),
            ..SelectionNumerics::default()
        },
        mu: 1.0,
    };
    let candidates = vec![CandidateModel::quantum(params), CandidateModel::classical(params)];
    println!("T={temperature} eta=0.6 dim={dim} cycles={cycles} n_steps={}", protocol.n_steps);

    for truth_idx in [0usize, 1] {
        let mut correct = 0;
        let mut failed = 0;
        for trial in 0..n_trials {
            let t0 = Instant::now();
            let seed = qcselect_core::seeds::trial_seed(4242, 0, &candidates[truth_idx].id, trial);
            let r = run_trial(&candidates[truth_idx], &candidates, &protocol, seed);
            let dll = if r.logliks.len() == 2 { r.logliks[0] - r.logliks[1] } else { f64::NAN };
            let sel = r.decision.as_ref().and_then(|d| d.selected().map(|s| s.to_string()));
            if r.failed() { failed += 1; }
            if sel.as_deref() == Some(candidates[truth_idx].id.as_str()) { correct += 1; }
            println!(
                "truth={} trial={trial}: dll(Q-C)={dll:+9.2} sel={:?} fail={:?} ({:.1}s)",
                candidates[truth_idx].id, sel, r.failure, t0.elapsed().as_secs_f64()
            );
        }
        println!("truth={}: correct {correct}/{n_trials}, failed {failed}", candidates[truth_idx].id);
    }
}
