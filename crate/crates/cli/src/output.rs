//! Result-file writers: JSON with full provenance, flat CSV tables, and
//! plot-ready per-temperature curves.
//!
//! CSV outputs contain only deterministic fields, so a rerun with the same
//! base seed reproduces them byte-for-byte; timestamps and per-trial wall
//! times live in `results.json` alongside the resolved configuration.

use std::fmt::Write as _;
use std::path::Path;

use qcselect_core::config::RunConfig;
use qcselect_core::error::QcError;
use qcselect_core::experiment::SweepResult;
use qcselect_core::selector::{Decision, SelectionOutput};

pub fn write_spectrum_csv(path: &Path, levels: &[f64]) -> Result<(), QcError> {
    let mut text = String::from("level,energy,gap_to_previous\n");
    for (i, e) in levels.iter().enumerate() {
        if i == 0 {
            let _ = writeln!(text, "{i},{e},");
        } else {
            let _ = writeln!(text, "{i},{e},{}", e - levels[i - 1]);
        }
    }
    std::fs::write(path, text)?;
    Ok(())
}

pub fn write_posterior_series_csv(
    path: &Path,
    output: &SelectionOutput,
    dt: f64,
) -> Result<(), QcError> {
    let ids = output.posterior.model_ids();
    let mut text = String::from("step,t");
    for id in ids {
        let _ = write!(text, ",p_{id}");
    }
    text.push('\n');
    for (step, probs) in output.series.iter().enumerate() {
        let _ = write!(text, "{step},{}", (step + 1) as f64 * dt);
        for p in probs {
            let _ = write!(text, ",{p}");
        }
        text.push('\n');
    }
    std::fs::write(path, text)?;
    Ok(())
}

pub fn write_decision_json(
    path: &Path,
    config: &RunConfig,
    trace_path: &Path,
    output: &SelectionOutput,
    decision: &Decision,
) -> Result<(), QcError> {
    let body = serde_json::json!({
        "trace": trace_path.display().to_string(),
        "decision": decision,
        "model_ids": output.posterior.model_ids(),
        "logliks": output.posterior.logliks(),
        "config": config,
    });
    std::fs::write(path, serde_json::to_string_pretty(&body).expect("json"))?;
    Ok(())
}

pub fn write_sweep_outputs(
    dir: &Path,
    config: &RunConfig,
    result: &SweepResult,
) -> Result<(), QcError> {
    // full provenance
    let timestamp = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let body = serde_json::json!({
        "generated_at_unix": timestamp,
        "version": env!("CARGO_PKG_VERSION"),
        "config": config,
        "determinism_digest": format!("{:016x}", result.determinism_digest()),
        "sweep": result,
    });
    std::fs::write(dir.join("results.json"), serde_json::to_string_pretty(&body).expect("json"))?;

    // one row per grid cell
    let mut cells = String::from(
        "T,eta,p_qq,p_cc,se_qq,se_cc,inconclusive_q,inconclusive_c,failed_q,failed_c,n_trials,mu\n",
    );
    for cell in &result.cells {
        let cm = &cell.confusion;
        let _ = writeln!(
            cells,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            cell.temperature,
            cell.eta,
            cm.probability("Q", "Q"),
            cm.probability("C", "C"),
            cm.standard_error("Q", "Q"),
            cm.standard_error("C", "C"),
            cm.inconclusive_rate("Q"),
            cm.inconclusive_rate("C"),
            cm.failed[0],
            cm.failed[1],
            cm.n_trials,
            cm.mu,
        );
    }
    std::fs::write(dir.join("cells.csv"), cells)?;

    // one row per trial (deterministic fields only)
    let mut trials =
        String::from("grid_index,T,eta,truth,seed,loglik_q,loglik_c,posterior_q,posterior_c,decision\n");
    for cell in &result.cells {
        for t in &cell.trials {
            let decision = match &t.decision {
                None => "failed".to_string(),
                Some(d) => match d.selected() {
                    Some(id) => id.to_string(),
                    None => "inconclusive".to_string(),
                },
            };
            let get = |v: &Vec<f64>, i: usize| v.get(i).copied().unwrap_or(f64::NAN);
            let _ = writeln!(
                trials,
                "{},{},{},{},{},{},{},{},{},{}",
                cell.grid_index,
                cell.temperature,
                cell.eta,
                t.truth_id,
                t.seed,
                get(&t.logliks, 0),
                get(&t.logliks, 1),
                get(&t.final_posterior, 0),
                get(&t.final_posterior, 1),
                decision,
            );
        }
    }
    std::fs::write(dir.join("trials.csv"), trials)?;

    // plot data mirroring the temperature-resolved probability-vs-eta curves
    for &t in &config.campaign.t_grid {
        let mut curve = String::from("eta,p_qq,se_qq,p_cc,se_cc,inconclusive_q,inconclusive_c\n");
        for cell in result.cells.iter().filter(|c| c.temperature == t) {
            let cm = &cell.confusion;
            let _ = writeln!(
                curve,
                "{},{},{},{},{},{},{}",
                cell.eta,
                cm.probability("Q", "Q"),
                cm.standard_error("Q", "Q"),
                cm.probability("C", "C"),
                cm.standard_error("C", "C"),
                cm.inconclusive_rate("Q"),
                cm.inconclusive_rate("C"),
            );
        }
        std::fs::write(dir.join(format!("curve_T{t}.csv")), curve)?;
    }

    // ROC re-thresholding per grid cell over the configured mu grid
    let mut roc = String::from("T,eta,mu,p_qq,p_cc,p_qc,p_cq,inconclusive_q,inconclusive_c\n");
    for cell in &result.cells {
        let ids: Vec<String> = cell.confusion.truth_ids.clone();
        if let Ok(curve) = qcselect_core::experiment::roc_curve(
            &ids,
            &ids,
            &cell.trials,
            &config.selection.mu_grid,
            result.n_trials,
        ) {
            for point in &curve.points {
                let _ = writeln!(
                    roc,
                    "{},{},{},{},{},{},{},{},{}",
                    cell.temperature,
                    cell.eta,
                    point.mu,
                    point.selection_rates[0][0],
                    point.selection_rates[1][1],
                    point.selection_rates[1][0],
                    point.selection_rates[0][1],
                    point.inconclusive_rates[0],
                    point.inconclusive_rates[1],
                );
            }
        }
    }
    std::fs::write(dir.join("roc.csv"), roc)?;
    Ok(())
}
