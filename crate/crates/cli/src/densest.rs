use tgbs::encoding::EncodingParams;
use tgbs::graph::{parse_dimacs, planted_graph, Graph};
use tgbs::rng::child_seed;
use tgbs::search::{
    average_traces, gbs_subgraph_source, random_search, uniform_subgraph_source, write_average_csv,
    write_trace_csv, SearchTrace,
};
use tgbs::{Parallelism, StepConfig};

use crate::config::{DensestArgs, RunConfig, Strategy};
use crate::output::{write_csv, Failure};
use crate::sample::note;

fn load_graph(spec: &str) -> Result<Graph, Failure> {
    if let Some(seed) = spec.strip_prefix("planted:") {
        let seed: u64 = seed
            .parse()
            .map_err(|_| Failure::Validation(format!("planted seed '{seed}' is not an integer")))?;
        let p = planted_graph(seed);
        eprintln!(
            "planted graph {seed}: {} vertices, {} edges, planted block {:?} with {} edges",
            p.graph.n(),
            p.graph.edge_count(),
            p.planted,
            p.planted_edges()
        );
        return Ok(p.graph);
    }
    let text = std::fs::read_to_string(spec).map_err(|e| Failure::Io(format!("{spec}: {e}")))?;
    let mut parsed = parse_dimacs(&text)?;
    for w in &parsed.warnings {
        eprintln!("{spec}: {w}");
    }
    if parsed.graph.name().is_empty() {
        parsed.graph.set_name(spec);
    }
    Ok(parsed.graph)
}

struct RunResult {
    trace: SearchTrace,
    draws: Option<(u64, f64)>,
}

fn one_run(graph: &Graph, a: &DensestArgs, seed: u64, step: StepConfig) -> Result<RunResult, Failure> {
    match a.strategy {
        Strategy::Uniform => {
            let src = uniform_subgraph_source(graph.n(), a.k, seed)?;
            let trace = random_search(src, graph, a.k, a.budget, None, a.strategy.name(), seed)?;
            Ok(RunResult { trace, draws: None })
        }
        Strategy::Gbs => {
            let photons = a.mean_photons.unwrap_or(a.k as f64);
            let mut src = gbs_subgraph_source(
                graph,
                EncodingParams::MeanPhotons(photons),
                a.loss_db,
                a.k,
                seed,
                a.max_draws,
                step,
            )?;
            let trace = random_search(&mut src, graph, a.k, a.budget, None, a.strategy.name(), seed)?;
            Ok(RunResult {
                trace,
                draws: Some((src.draws_attempted(), src.acceptance_fraction())),
            })
        }
    }
}

pub fn run(config: &RunConfig, a: &DensestArgs) -> Result<(), Failure> {
    let graph = load_graph(&a.graph)?;
    if a.k > graph.n() {
        return Err(Failure::Validation(format!("--k {} exceeds {} vertices", a.k, graph.n())));
    }
    let step = config.step_config();
    let results: Vec<RunResult> = if a.runs == 1 {
        vec![one_run(&graph, a, child_seed(a.seed, "densest", 0), step)?]
    } else {
        // runs in parallel, each run's draws sequential
        let inner = StepConfig {
            parallelism: Parallelism {
                workers: 1,
                ..step.parallelism
            },
            ..step
        };
        step.parallelism
            .map_indexed(a.runs, |r| one_run(&graph, a, child_seed(a.seed, "densest", r as u64), inner))
            .into_iter()
            .collect::<Result<_, _>>()?
    };

    let traces: Vec<SearchTrace> = results.iter().map(|r| r.trace.clone()).collect();
    let short: Vec<usize> = traces.iter().filter(|t| t.best.len() < a.budget).map(|t| t.best.len()).collect();
    if !short.is_empty() {
        eprintln!(
            "{} run(s) stopped before the budget (max draws reached), lengths {short:?}",
            short.len()
        );
    }
    write_csv(a.trace_out.as_deref(), config, |buf| {
        if a.runs == 1 {
            write_trace_csv(buf, &traces)?;
        } else {
            write_average_csv(buf, a.strategy.name(), a.runs, &average_traces(&traces, a.budget))?;
        }
        Ok(())
    })?;

    let finals: Vec<usize> = traces.iter().filter_map(SearchTrace::final_best).collect();
    let mean = finals.iter().sum::<usize>() as f64 / finals.len().max(1) as f64;
    let mut line = format!(
        "{} on {} (k = {}): mean best {mean:.2} edges over {} run(s), best {}",
        a.strategy.name(),
        graph.name(),
        a.k,
        a.runs,
        finals.iter().max().copied().unwrap_or(0)
    );
    let draws: Vec<(u64, f64)> = results.iter().filter_map(|r| r.draws).collect();
    if !draws.is_empty() {
        let attempted: u64 = draws.iter().map(|d| d.0).sum();
        let accept = draws.iter().map(|d| d.1).sum::<f64>() / draws.len() as f64;
        line.push_str(&format!(", {attempted} raw draws, acceptance {:.2}%", accept * 100.0));
    }
    note(a.trace_out.as_deref(), &line);
    Ok(())
}
