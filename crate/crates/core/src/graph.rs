//! Simple undirected graphs, DIMACS clique-format I/O and the planted
//! dense-subgraph generator.

use nalgebra::DMatrix;
use rand::seq::index::sample as sample_indices;
use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    adj: Vec<bool>,
    name: String,
}

impl Graph {
    pub fn empty(n: usize, name: impl Into<String>) -> Self {
        Self {
            n,
            adj: vec![false; n * n],
            name: name.into(),
        }
    }

    pub fn complete(n: usize) -> Self {
        let mut g = Self::empty(n, format!("K{n}"));
        for i in 0..n {
            for j in i + 1..n {
                g.add_edge(i, j);
            }
        }
        g
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn set_name(&mut self, name: impl Into<String>) {
        self.name = name.into();
    }

    /// Adds `{i, j}`; self-loops are ignored. Returns whether the edge is new.
    pub fn add_edge(&mut self, i: usize, j: usize) -> bool {
        assert!(i < self.n && j < self.n, "vertex out of range");
        if i == j || self.adj[i * self.n + j] {
            return false;
        }
        self.adj[i * self.n + j] = true;
        self.adj[j * self.n + i] = true;
        true
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adj[i * self.n + j]
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().filter(|&&e| e).count() / 2
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj[v * self.n..(v + 1) * self.n].iter().filter(|&&e| e).count()
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n).flat_map(move |i| (i + 1..self.n).filter(move |&j| self.has_edge(i, j)).map(move |j| (i, j)))
    }

    pub fn adjacency_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| f64::from(u8::from(self.has_edge(i, j))))
    }

    /// Edges with both endpoints in `vertices`.
    pub fn subgraph_edges(&self, vertices: &[usize]) -> Result<usize> {
        let mut seen = vec![false; self.n];
        for &v in vertices {
            if v >= self.n {
                return Err(invalid(format!("vertex {v} out of range for {} vertices", self.n)));
            }
            if std::mem::replace(&mut seen[v], true) {
                return Err(invalid(format!("vertex {v} repeated")));
            }
        }
        let mut count = 0;
        for (a, &i) in vertices.iter().enumerate() {
            for &j in &vertices[a + 1..] {
                count += usize::from(self.has_edge(i, j));
            }
        }
        Ok(count)
    }

    pub fn density(&self, vertices: &[usize]) -> Result<f64> {
        let k = vertices.len();
        if k < 2 {
            return Ok(0.0);
        }
        Ok(self.subgraph_edges(vertices)? as f64 / (k * (k - 1) / 2) as f64)
    }
}

/// Result of reading a DIMACS file: the graph plus non-fatal warnings.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedGraph {
    pub graph: Graph,
    pub warnings: Vec<String>,
}

fn parse_index(tok: Option<&str>, line: usize, what: &str) -> Result<usize> {
    let tok = tok.ok_or_else(|| Error::Parse {
        line,
        msg: format!("missing {what}"),
    })?;
    tok.parse::<usize>().map_err(|_| Error::Parse {
        line,
        msg: format!("{what} '{tok}' is not a non-negative integer"),
    })
}

/// Reads the ASCII DIMACS clique format (`c`, `p edge n m`, `e i j`,
/// 1-based vertices). Duplicate edges are collapsed; a declared edge count
/// that disagrees with the file is a warning.
pub fn parse_dimacs(text: &str) -> Result<ParsedGraph> {
    let mut graph: Option<Graph> = None;
    let mut declared_edges = 0;
    let mut warnings = Vec::new();
    let mut duplicates = 0usize;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.trim_end_matches('\r').trim();
        if !content.is_ascii() {
            return Err(Error::Parse {
                line,
                msg: "non-ASCII content (binary DIMACS is not supported)".into(),
            });
        }
        let mut toks = content.split_whitespace();
        let Some(tag) = toks.next() else { continue };
        match tag {
            "c" => {}
            "p" => {
                if graph.is_some() {
                    return Err(Error::Parse {
                        line,
                        msg: "second problem line".into(),
                    });
                }
                match toks.next() {
                    Some("edge") | Some("col") => {}
                    other => {
                        return Err(Error::Parse {
                            line,
                            msg: format!("unsupported problem format {other:?} (expected 'edge')"),
                        })
                    }
                }
                let n = parse_index(toks.next(), line, "vertex count")?;
                declared_edges = parse_index(toks.next(), line, "edge count")?;
                graph = Some(Graph::empty(n, ""));
            }
            "e" => {
                let g = graph.as_mut().ok_or_else(|| Error::Parse {
                    line,
                    msg: "edge before problem line".into(),
                })?;
                let i = parse_index(toks.next(), line, "edge endpoint")?;
                let j = parse_index(toks.next(), line, "edge endpoint")?;
                if toks.next().is_some() {
                    return Err(Error::Parse {
                        line,
                        msg: "weighted edges are not supported".into(),
                    });
                }
                for v in [i, j] {
                    if v == 0 || v > g.n() {
                        return Err(Error::Parse {
                            line,
                            msg: format!("vertex {v} out of range 1..={}", g.n()),
                        });
                    }
                }
                if i == j {
                    warnings.push(format!("line {line}: self-loop on vertex {i} ignored"));
                } else if !g.add_edge(i - 1, j - 1) {
                    duplicates += 1;
                }
            }
            "n" => {
                return Err(Error::Parse {
                    line,
                    msg: "vertex weights are not supported".into(),
                })
            }
            other => {
                return Err(Error::Parse {
                    line,
                    msg: format!("unknown line type '{other}'"),
                })
            }
        }
    }
    let graph = graph.ok_or(Error::Parse {
        line: text.lines().count().max(1),
        msg: "missing problem line".into(),
    })?;
    if duplicates > 0 {
        warnings.push(format!("{duplicates} duplicate edge lines collapsed"));
    }
    if graph.edge_count() != declared_edges {
        warnings.push(format!(
            "problem line declares {declared_edges} edges, file has {}",
            graph.edge_count()
        ));
    }
    Ok(ParsedGraph { graph, warnings })
}

/// Canonical DIMACS text: optional name comment, problem line, edges with
/// `i < j` in lexicographic order.
pub fn emit_dimacs(graph: &Graph) -> String {
    let mut out = String::new();
    if !graph.name().is_empty() {
        out.push_str(&format!("c {}\n", graph.name()));
    }
    out.push_str(&format!("p edge {} {}\n", graph.n(), graph.edge_count()));
    for (i, j) in graph.edges() {
        out.push_str(&format!("e {} {}\n", i + 1, j + 1));
    }
    out
}

/// A planted instance and the vertices of its dense block.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantedGraph {
    pub graph: Graph,
    pub planted: Vec<usize>,
}

impl PlantedGraph {
    pub fn planted_edges(&self) -> usize {
        self.graph.subgraph_edges(&self.planted).expect("planted block is valid")
    }
}

pub const PLANTED_BACKGROUND: usize = 20;
pub const PLANTED_BLOCK: usize = 10;
pub const PLANTED_BACKGROUND_P: f64 = 0.5;
pub const PLANTED_BLOCK_P: f64 = 0.875;
pub const PLANTED_CROSS_EDGES: usize = 8;

/// 30-vertex planted instance: a G(20, 0.5) background on vertices 0..20,
/// a G(10, 0.875) block on 20..30, and 8 cross edges pairing 8 random
/// background vertices with 8 random block vertices.
pub fn planted_graph(seed: u64) -> PlantedGraph {
    let mut rng = rng::stream(seed, "planted-graph", 0);
    let n = PLANTED_BACKGROUND + PLANTED_BLOCK;
    let mut g = Graph::empty(n, format!("planted:{seed}"));
    for i in 0..PLANTED_BACKGROUND {
        for j in i + 1..PLANTED_BACKGROUND {
            if rng.random_bool(PLANTED_BACKGROUND_P) {
                g.add_edge(i, j);
            }
        }
    }
    for i in PLANTED_BACKGROUND..n {
        for j in i + 1..n {
            if rng.random_bool(PLANTED_BLOCK_P) {
                g.add_edge(i, j);
            }
        }
    }
    let left = sample_indices(&mut rng, PLANTED_BACKGROUND, PLANTED_CROSS_EDGES);
    let right = sample_indices(&mut rng, PLANTED_BLOCK, PLANTED_CROSS_EDGES);
    for (a, b) in left.iter().zip(right.iter()) {
        g.add_edge(a, PLANTED_BACKGROUND + b);
    }
    PlantedGraph {
        graph: g,
        planted: (PLANTED_BACKGROUND..n).collect(),
    }
}
