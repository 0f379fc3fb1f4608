use std::fmt::Write as _;

use tgbs::resources::{
    fit_runtime, memory_at_step, node_count, peak_memory_worst_case, titan_observations, ResourceModel,
    TITAN_RUNS,
};

use crate::config::{EstimateArgs, Format, RunConfig};
use crate::output::{emit, header, write_csv, Failure};

struct Row {
    step: usize,
    clicks: usize,
    remaining: usize,
    branches: u128,
    memory_gb: f64,
    min_nodes: u64,
    pow2_nodes: u64,
}

/// Worst-case trajectory: every click lands on the first measured modes.
fn rows(model: &ResourceModel, modes: usize, clicks: usize) -> Result<Vec<Row>, Failure> {
    (0..=modes)
        .map(|step| {
            let c = step.min(clicks);
            let memory_gb = memory_at_step(model, modes, c, step)?;
            let nodes = node_count(model, memory_gb)?;
            Ok(Row {
                step,
                clicks: c,
                remaining: modes - step,
                branches: 1u128 << c,
                memory_gb,
                min_nodes: nodes.min_nodes,
                pow2_nodes: nodes.pow2_nodes,
            })
        })
        .collect()
}

pub fn run(config: &RunConfig, a: &EstimateArgs) -> Result<(), Failure> {
    let model = ResourceModel {
        eta: a.eta,
        bytes_per_scalar: a.bytes_per_scalar,
        node_memory_gb: a.node_gb,
        node_cores: a.node_cores,
    };
    model.validate()?;
    if a.clicks > 100 {
        return Err(Failure::Validation(format!("--clicks {} is beyond any machine", a.clicks)));
    }
    let rows = rows(&model, a.modes, a.clicks)?;
    match a.format {
        Format::Csv => write_csv(a.out.as_deref(), config, |buf| {
            let mut w = csv::Writer::from_writer(buf);
            w.write_record(["step", "clicks", "remaining_modes", "branches", "memory_gb", "min_nodes", "pow2_nodes"])?;
            for r in &rows {
                w.write_record([
                    r.step.to_string(),
                    r.clicks.to_string(),
                    r.remaining.to_string(),
                    r.branches.to_string(),
                    format!("{:.6e}", r.memory_gb),
                    r.min_nodes.to_string(),
                    r.pow2_nodes.to_string(),
                ])?;
            }
            w.flush()?;
            Ok(())
        }),
        Format::Text => emit(a.out.as_deref(), (header(config) + &text(&model, a, &rows)?).as_bytes()),
    }
}

fn text(model: &ResourceModel, a: &EstimateArgs, rows: &[Row]) -> Result<String, Failure> {
    let peak = peak_memory_worst_case(model, a.modes, a.clicks)?;
    let nodes = node_count(model, peak)?;
    let mut s = String::new();
    let _ = writeln!(s, "modes {}, clicks {} (worst case: clicks on the first measured modes)", a.modes, a.clicks);
    let _ = writeln!(
        s,
        "eta {}, {} bytes per scalar, {} GiB and {} cores per node",
        model.eta, model.bytes_per_scalar, model.node_memory_gb, model.node_cores
    );
    let peak_text = if peak >= 1e-3 { format!("{peak:.3}") } else { format!("{peak:.3e}") };
    let _ = writeln!(s, "peak memory         {peak_text} GB at step {}", a.clicks);
    let _ = writeln!(s, "minimum nodes       {}", nodes.min_nodes);
    let _ = writeln!(s, "power-of-two nodes  {}", nodes.pow2_nodes);
    if let Some(run) = TITAN_RUNS.iter().find(|r| r.0 == a.modes && r.1 == a.clicks) {
        let _ = writeln!(s, "Titan allocation    {} nodes, {} CPU hours (reference)", run.2, run.3);
    }
    let fit = fit_runtime(&titan_observations())?;
    let cpu_hours = fit.extrapolate(a.clicks as f64);
    let _ = writeln!(
        s,
        "fitted CPU time     {cpu_hours:.3e} CPU hours (log-linear fit to the Titan runs, x{:.3} per click)",
        2f64.powf(fit.slope)
    );
    let _ = writeln!(
        s,
        "fitted walltime     {:.3e} hours on {} nodes",
        cpu_hours / (nodes.min_nodes as f64 * model.node_cores as f64),
        nodes.min_nodes
    );
    let _ = writeln!(s);
    let _ = writeln!(
        s,
        "{:>6} {:>6} {:>9} {:>12} {:>14} {:>10} {:>10}",
        "step", "clicks", "remaining", "branches", "memory_gb", "min_nodes", "pow2_nodes"
    );
    for r in rows {
        let _ = writeln!(
            s,
            "{:>6} {:>6} {:>9} {:>12} {:>14.6e} {:>10} {:>10}",
            r.step, r.clicks, r.remaining, r.branches, r.memory_gb, r.min_nodes, r.pow2_nodes
        );
    }
    Ok(s)
}
