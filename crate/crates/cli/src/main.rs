//! `qcselect` — batch interface to the quantum/classical model-selection
//! engine: spectrum checks, trace generation, single-trace selection, and
//! Monte Carlo (T, η) sweeps.
//!
//! Exit codes: 0 success, 1 failed `--check`, 2 configuration or usage
//! error, 3 numerical failure. `QCSELECT_THREADS` caps the worker pool.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use qcselect_core::config::RunConfig;
use qcselect_core::error::QcError;
use qcselect_core::experiment::{params_digest, sweep, SweepResult};
use qcselect_core::operators::{build_duffing_hamiltonian, spectrum, FockDim};
use qcselect_core::selector::{np_select, run_selection, CandidateModel};
use qcselect_core::trace::TimeTrace;

mod output;

#[derive(Parser)]
#[command(
    name = "qcselect",
    version,
    about = "Quantum vs classical dynamical model selection for a monitored double-well nanoparticle"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// JSON configuration file; omitted fields take reference defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides the config's).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Base seed (overrides the config's).
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Print the lowest trap energy levels and gaps.
    Spectrum {
        #[command(flatten)]
        common: CommonArgs,
        /// Number of levels to report.
        #[arg(long, default_value_t = 4)]
        count: usize,
        /// Basis size override.
        #[arg(long)]
        dim: Option<usize>,
        /// Verify the reference double-well gaps (0.396, 0.941, 1.061 ± 0.01).
        #[arg(long)]
        check: bool,
    },
    /// Generate a truth measurement record and write it as a trace file.
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
        /// Which dynamical model produces the trace.
        #[arg(long, value_enum)]
        model: TruthModel,
    },
    /// Run model selection on a recorded trace file.
    Select {
        #[command(flatten)]
        common: CommonArgs,
        /// Trace CSV produced by `simulate` (or external data in the same format).
        trace: PathBuf,
    },
    /// Monte Carlo confusion-matrix sweep over the (T, η) grid.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
    },
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum TruthModel {
    Quantum,
    Classical,
}

enum CliError {
    Check(String),
    Usage(String),
    Numerical(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Check(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Check(m) | CliError::Usage(m) | CliError::Numerical(m) => m,
        }
    }
}

impl From<QcError> for CliError {
    fn from(e: QcError) -> Self {
        match e {
            QcError::StepFailure { .. }
            | QcError::Blowup { .. }
            | QcError::DegenerateEnsemble { .. }
            | QcError::TruncationError { .. }
            | QcError::DisplacementTooLarge { .. }
            | QcError::NotHermitian { .. } => CliError::Numerical(e.to_string()),
            other => CliError::Usage(other.to_string()),
        }
    }
}

fn main() -> ExitCode {
    env_logger::init();
    if let Ok(threads) = std::env::var("QCSELECT_THREADS") {
        match threads.parse::<usize>() {
            Ok(n) if n > 0 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => {
                eprintln!("error: QCSELECT_THREADS must be a positive integer, got '{threads}'");
                return ExitCode::from(2);
            }
        }
    }
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Spectrum { common, count, dim, check } => cmd_spectrum(common, count, dim, check),
        Command::Simulate { common, model } => cmd_simulate(common, model),
        Command::Select { common, trace } => cmd_select(common, trace),
        Command::Sweep { common } => cmd_sweep(common),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

fn load_config(common: &CommonArgs) -> Result<RunConfig, CliError> {
    let mut config = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        config.campaign.base_seed = seed;
    }
    if let Some(out) = &common.out {
        config.output.directory = out.display().to_string();
    }
    config.validate()?;
    Ok(config)
}

fn out_dir(config: &RunConfig) -> Result<PathBuf, CliError> {
    let dir = PathBuf::from(&config.output.directory);
    std::fs::create_dir_all(&dir)
        .map_err(|e| CliError::Usage(format!("cannot create output directory: {e}")))?;
    Ok(dir)
}

const REFERENCE_GAPS: [f64; 3] = [0.396, 0.941, 1.061];
const GAP_TOLERANCE: f64 = 0.01;

fn cmd_spectrum(
    common: CommonArgs,
    count: usize,
    dim_override: Option<usize>,
    check: bool,
) -> Result<(), CliError> {
    let write_csv = common.out.is_some();
    let config = load_config(&common)?;
    if count == 0 {
        return Err(CliError::Usage("--count must be >= 1".into()));
    }
    let dim = FockDim::new(dim_override.unwrap_or(config.numerics.dim))?;
    let h = build_duffing_hamiltonian(dim, &config.params(), 0.0)?;
    let levels = spectrum(&h, count)?;
    println!(
        "# dim = {}, omega = {}, beta = {}",
        dim.get(),
        config.physics.omega,
        config.physics.beta
    );
    for (i, e) in levels.iter().enumerate() {
        if i == 0 {
            println!("E{i} = {e:+.6}");
        } else {
            println!("E{i} = {e:+.6}   gap E{i}-E{} = {:.6}", i - 1, e - levels[i - 1]);
        }
    }
    if write_csv {
        let dir = out_dir(&config)?;
        output::write_spectrum_csv(&dir.join("spectrum.csv"), &levels)?;
    }
    if check {
        let need = REFERENCE_GAPS.len() + 1;
        let levels = if levels.len() >= need { levels } else { spectrum(&h, need)? };
        for (i, expect) in REFERENCE_GAPS.iter().enumerate() {
            let gap = levels[i + 1] - levels[i];
            if (gap - expect).abs() > GAP_TOLERANCE {
                return Err(CliError::Check(format!(
                    "gap E{}-E{} = {:.4} deviates from reference {:.3} by more than {:.3} (dim {} too small?)",
                    i + 1,
                    i,
                    gap,
                    expect,
                    GAP_TOLERANCE,
                    dim.get()
                )));
            }
        }
        println!(
            "check passed: lowest gaps within ±{GAP_TOLERANCE} of ({}, {}, {})",
            REFERENCE_GAPS[0], REFERENCE_GAPS[1], REFERENCE_GAPS[2]
        );
    }
    Ok(())
}

fn cmd_simulate(common: CommonArgs, model: TruthModel) -> Result<(), CliError> {
    let config = load_config(&common)?;
    let dir = out_dir(&config)?;
    let protocol = config.protocol()?;
    let params = config.params();
    let seed = config.campaign.base_seed;
    let hash = params_digest(&params, &protocol);
    let (trace, name) = match model {
        TruthModel::Quantum => (
            qcselect_core::quantum::simulate_quantum_trace(
                &params,
                protocol.numerics.dim,
                protocol.n_steps,
                protocol.dt,
                seed,
                hash,
                protocol.numerics.quantum,
            )?,
            format!("trace_quantum_seed{seed}.csv"),
        ),
        TruthModel::Classical => (
            qcselect_core::classical::simulate_classical_trace(
                &params,
                protocol.n_steps,
                protocol.dt,
                seed,
                hash,
            )?,
            format!("trace_classical_seed{seed}.csv"),
        ),
    };
    let path = dir.join(name);
    trace.write_csv(&path)?;
    println!("wrote {} increments to {}", trace.n_steps(), path.display());
    Ok(())
}

fn cmd_select(common: CommonArgs, trace_path: PathBuf) -> Result<(), CliError> {
    let config = load_config(&common)?;
    let dir = out_dir(&config)?;
    let trace = TimeTrace::read_csv(&trace_path)?;
    let dt = config.dt();
    if (trace.dt - dt).abs() > 1e-12 * dt.max(trace.dt) {
        return Err(QcError::DtMismatch { trace_dt: trace.dt, config_dt: dt }.into());
    }
    let params = config.params();
    let candidates = vec![CandidateModel::quantum(params), CandidateModel::classical(params)];
    let numerics = config.selection_numerics()?;
    let seed = config.campaign.base_seed;
    let output = run_selection(&trace, &candidates, &numerics, seed, true)?;
    let decision = np_select(&output.posterior, config.selection.mu);

    let posterior_path = dir.join("posteriors.csv");
    output::write_posterior_series_csv(&posterior_path, &output, trace.dt)?;
    let decision_path = dir.join("decision.json");
    output::write_decision_json(&decision_path, &config, &trace_path, &output, &decision)?;

    match decision.selected() {
        Some(id) => println!(
            "selected model {id} at mu = {} (posterior {:?})",
            decision.mu, decision.posterior
        ),
        None => {
            println!("inconclusive at mu = {} (posterior {:?})", decision.mu, decision.posterior)
        }
    }
    println!("wrote {} and {}", posterior_path.display(), decision_path.display());
    Ok(())
}

fn cmd_sweep(common: CommonArgs) -> Result<(), CliError> {
    let config = load_config(&common)?;
    let dir = out_dir(&config)?;
    let protocol = config.protocol()?;
    let result: SweepResult = sweep(
        &config.campaign.t_grid,
        &config.campaign.eta_grid,
        &config.params(),
        &protocol,
        config.campaign.n_trials,
        config.campaign.base_seed,
    )?;

    output::write_sweep_outputs(&dir, &config, &result)?;

    println!("T      eta    p(Q|Q)  p(C|C)  inconcl(Q/C)  failed(Q/C)");
    let mut any_empty = false;
    for cell in &result.cells {
        let cm = &cell.confusion;
        let p_qq = cm.probability("Q", "Q");
        let p_cc = cm.probability("C", "C");
        if p_qq.is_nan() || p_cc.is_nan() {
            any_empty = true;
        }
        println!(
            "{:<6} {:<6} {:<7.3} {:<7.3} {:.2}/{:.2}     {}/{}",
            cell.temperature,
            cell.eta,
            p_qq,
            p_cc,
            cm.inconclusive_rate("Q"),
            cm.inconclusive_rate("C"),
            cm.failed[0],
            cm.failed[1],
        );
    }
    let failed_total: usize = result
        .cells
        .iter()
        .map(|c| c.confusion.failed.iter().sum::<usize>())
        .sum();
    if failed_total > 0 {
        eprintln!("note: {failed_total} trial(s) failed; see results.json");
    }
    println!("results written to {}", dir.display());
    if any_empty {
        return Err(CliError::Numerical(
            "at least one grid point produced no usable estimate (all trials failed)".into(),
        ));
    }
    Ok(())
}
