//! Scratch: desk-scale confusion-matrix calibration through the production path.
use qcselect_core::experiment::{estimate_confusion, RunProtocol};
use qcselect_core::operators::{DuffingParams, FockDim};
use qcselect_core::selector::{CandidateModel, SelectionNumerics};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let n_trials: usize = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(10);
    let cycles: usize = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(50);
    let temperature: f64 = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(0.2);
    let dim: usize = args.get(4).map(|s| s.parse().unwrap()).unwrap_or(60);
    let base_seed: u64 = args.get(5).map(|s| s.parse().unwrap()).unwrap_or(20250809);

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
    eprintln!("T={temperature} eta=0.6 dim={dim} cycles={cycles} trials={n_trials} seed={base_seed}");
    let t0 = std::time::Instant::now();
    let (cm, trials) = estimate_confusion(&candidates, &protocol, n_trials, base_seed, 0).unwrap();
    for t in &trials {
        let dll = if t.logliks.len() == 2 { t.logliks[0] - t.logliks[1] } else { f64::NAN };
        println!(
            "truth={} seed={} dll={dll:+10.2} decision={:?} fail={:?} wall={:.0}s",
            t.truth_id,
            t.seed,
            t.decision.as_ref().map(|d| format!("{:?}", d.outcome)),
            t.failure,
            t.wall_time_ms / 1e3
        );
    }
    println!(
        "p(Q|Q)={:.2} p(C|C)={:.2} incQ={:.2} incC={:.2} failQ={} failC={} ({:.0}s total)",
        cm.probability("Q", "Q"),
        cm.probability("C", "C"),
        cm.inconclusive_rate("Q"),
        cm.inconclusive_rate("C"),
        cm.failed[0],
        cm.failed[1],
        t0.elapsed().as_secs_f64()
    );
}
