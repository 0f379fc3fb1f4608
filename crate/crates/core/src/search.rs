//! Random search for dense `k`-subgraphs: draw vertex sets from a source
//! and keep the densest seen so far.

use rand::seq::index::sample as sample_indices;
use serde::{Deserialize, Serialize};

use crate::encoding::{encode_graph, EncodingParams};
use crate::error::{invalid, Result};
use crate::gaussian::{apply_uniform_loss, transmission_from_db};
use crate::graph::Graph;
use crate::mixture::StepConfig;
use crate::rng::{self, StreamRng};
use crate::sampler::{PostselectedStream, Sampler};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchTrace {
    pub strategy: String,
    pub seed: u64,
    /// `best[i]` is the best edge count after `i + 1` samples.
    pub best: Vec<usize>,
}

impl SearchTrace {
    pub fn final_best(&self) -> Option<usize> {
        self.best.last().copied()
    }

    /// Samples consumed before first reaching `edges`, if ever.
    pub fn samples_to_reach(&self, edges: usize) -> Option<usize> {
        self.best.iter().position(|&b| b >= edges).map(|i| i + 1)
    }
}

/// Consumes up to `budget` vertex sets; optionally stops once `stop_at`
/// edges are found.
pub fn random_search<I>(
    source: I,
    graph: &Graph,
    k: usize,
    budget: usize,
    stop_at: Option<usize>,
    strategy: &str,
    seed: u64,
) -> Result<SearchTrace>
where
    I: IntoIterator<Item = Result<Vec<usize>>>,
{
    let mut best = Vec::with_capacity(budget);
    let mut current = 0;
    for set in source.into_iter().take(budget) {
        let set = set?;
        if set.len() != k {
            return Err(invalid(format!("source produced {} vertices, expected {k}", set.len())));
        }
        current = current.max(graph.subgraph_edges(&set)?);
        best.push(current);
        if stop_at.is_some_and(|t| current >= t) {
            break;
        }
    }
    Ok(SearchTrace {
        strategy: strategy.to_string(),
        seed,
        best,
    })
}

/// Mean best-edge count at each sample index over several traces. Traces
/// that ended early (by early stop) carry their last value forward.
pub fn average_traces(traces: &[SearchTrace], length: usize) -> Vec<f64> {
    (0..length)
        .map(|i| {
            let sum: usize = traces
                .iter()
                .map(|t| t.best.get(i).or(t.best.last()).copied().unwrap_or(0))
                .sum();
            sum as f64 / traces.len().max(1) as f64
        })
        .collect()
}

/// Writes `samples,best_edges,strategy,seed` rows.
pub fn write_trace_csv<W: std::io::Write>(out: W, traces: &[SearchTrace]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["samples", "best_edges", "strategy", "seed"])?;
    for t in traces {
        for (i, b) in t.best.iter().enumerate() {
            w.write_record([(i + 1).to_string(), b.to_string(), t.strategy.clone(), t.seed.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes `samples,mean_best_edges,strategy,runs` rows for averaged traces.
pub fn write_average_csv<W: std::io::Write>(out: W, strategy: &str, runs: usize, mean: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["samples", "mean_best_edges", "strategy", "runs"])?;
    for (i, m) in mean.iter().enumerate() {
        w.write_record([(i + 1).to_string(), format!("{m:.4}"), strategy.to_string(), runs.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// I.i.d. uniform `k`-subsets of `0..n`, sorted.
pub struct UniformSubgraphs {
    n: usize,
    k: usize,
    rng: StreamRng,
}

pub fn uniform_subgraph_source(n: usize, k: usize, seed: u64) -> Result<UniformSubgraphs> {
    if k > n {
        return Err(invalid(format!("subgraph size {k} exceeds {n} vertices")));
    }
    Ok(UniformSubgraphs {
        n,
        k,
        rng: rng::stream(seed, "uniform-subgraphs", 0),
    })
}

impl Iterator for UniformSubgraphs {
    type Item = Result<Vec<usize>>;

    fn next(&mut self) -> Option<Self::Item> {
        let mut v = sample_indices(&mut self.rng, self.n, self.k).into_vec();
        v.sort_unstable();
        Some(Ok(v))
    }
}

/// Click sets of threshold-GBS samples postselected on `k` clicks.
pub struct GbsSubgraphs {
    stream: PostselectedStream<Sampler>,
}

impl GbsSubgraphs {
    pub fn acceptance_fraction(&self) -> f64 {
        self.stream.acceptance_fraction()
    }

    pub fn draws_attempted(&self) -> u64 {
        self.stream.draws_attempted()
    }
}

impl Iterator for GbsSubgraphs {
    type Item = Result<Vec<usize>>;

    fn next(&mut self) -> Option<Self::Item> {
        self.stream.next().map(|d| d.map(|d| d.pattern.click_modes()))
    }
}

/// Encodes `graph`, applies uniform loss of `loss_db`, and postselects
/// threshold samples on `k` clicks. At most `max_draws` raw draws are made.
pub fn gbs_subgraph_source(
    graph: &Graph,
    params: EncodingParams,
    loss_db: f64,
    k: usize,
    seed: u64,
    max_draws: u64,
    config: StepConfig,
) -> Result<GbsSubgraphs> {
    if loss_db.is_nan() || loss_db < 0.0 {
        return Err(invalid("loss must be non-negative dB"));
    }
    let encoded = encode_graph(graph, params)?;
    let state = apply_uniform_loss(&encoded.state, transmission_from_db(loss_db))?;
    let sampler = Sampler::new(state, None, seed, config)?;
    Ok(GbsSubgraphs {
        stream: sampler.into_postselect(k, max_draws)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::planted_graph;

    #[test]
    fn planted_source_finds_block_immediately() {
        let p = planted_graph(0);
        let block = p.planted.clone();
        let src = std::iter::repeat_with(|| Ok(block.clone()));
        let t = random_search(src, &p.graph, 10, 5, None, "oracle", 0).unwrap();
        assert_eq!(t.best, vec![p.planted_edges(); 5]);
    }

    #[test]
    fn uniform_on_complete_graph() {
        let g = Graph::complete(5);
        let src = uniform_subgraph_source(5, 3, 1).unwrap();
        let t = random_search(src, &g, 3, 10, None, "uniform", 1).unwrap();
        assert_eq!(t.best[0], 3);
        let src = uniform_subgraph_source(5, 3, 1).unwrap();
        let t = random_search(src, &g, 3, 10, Some(3), "uniform", 1).unwrap();
        assert_eq!(t.best.len(), 1);
    }

    #[test]
    fn uniform_full_set() {
        let mut src = uniform_subgraph_source(6, 6, 3).unwrap();
        assert_eq!(src.next().unwrap().unwrap(), (0..6).collect::<Vec<_>>());
        assert!(uniform_subgraph_source(3, 4, 0).is_err());
    }

    #[test]
    fn uniform_pairs_are_uniform() {
        let draws = 100_000;
        let mut counts = [[0usize; 5]; 5];
        for s in uniform_subgraph_source(5, 2, 9).unwrap().take(draws) {
            let s = s.unwrap();
            counts[s[0]][s[1]] += 1;
        }
        let p = 0.1;
        let sigma = (draws as f64 * p * (1.0 - p)).sqrt();
        for (i, row) in counts.iter().enumerate() {
            for (j, &c) in row.iter().enumerate().skip(i + 1) {
                let dev = (c as f64 - draws as f64 * p).abs();
                assert!(dev < 3.5 * sigma, "pair ({i},{j}): {c}");
            }
        }
    }

    #[test]
    fn uniform_stream_is_reproducible() {
        let a: Vec<_> = uniform_subgraph_source(30, 10, 4).unwrap().take(20).map(|s| s.unwrap()).collect();
        let b: Vec<_> = uniform_subgraph_source(30, 10, 4).unwrap().take(20).map(|s| s.unwrap()).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn trace_is_monotone() {
        let p = planted_graph(6);
        let src = uniform_subgraph_source(30, 10, 2).unwrap();
        let t = random_search(src, &p.graph, 10, 300, None, "uniform", 2).unwrap();
        assert!(t.best.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn empty_graph_never_accepts() {
        let g = Graph::empty(4, "empty");
        let mut src = gbs_subgraph_source(&g, EncodingParams::MeanPhotons(2.0), 0.0, 2, 0, 200, StepConfig::sequential()).unwrap();
        assert!(src.next().is_none());
        assert_eq!(src.draws_attempted(), 200);
        assert_eq!(src.acceptance_fraction(), 0.0);
    }

    #[test]
    fn gbs_sets_have_k_vertices() {
        let p = planted_graph(1);
        let src = gbs_subgraph_source(&p.graph, EncodingParams::MeanPhotons(4.0), 3.0, 4, 5, 10_000, StepConfig::sequential()).unwrap();
        for s in src.take(5) {
            assert_eq!(s.unwrap().len(), 4);
        }
    }

    #[test]
    fn averaging_carries_last_value() {
        let a = SearchTrace { strategy: "x".into(), seed: 0, best: vec![1, 2] };
        let b = SearchTrace { strategy: "x".into(), seed: 1, best: vec![3, 3, 4] };
        assert_eq!(average_traces(&[a, b], 3), vec![2.0, 2.5, 3.0]);
    }
}
