//! Graph → GBS state.
//!
//! The adjacency matrix is decomposed as `A = O diag(λ) O^T`. Each mode is
//! squeezed by `r_i = artanh(c |λ_i|)` and the modes are interfered by
//! `U = O diag(φ)`, with `φ_i = i` for negative `λ_i` so that
//! `U diag(c|λ|) U^T = c A`. The resulting pure state has photon statistics
//! governed by hafnians of `c A`, which favours dense subgraphs.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::gaussian::{apply_interferometer, squeezed_vacuum, vacuum_state, GaussianState, C64};
use crate::graph::Graph;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EncodingParams {
    /// Explicit rescaling `c`, requires `c λ_max < 1`.
    Scale(f64),
    /// Mean photon number `Σ sinh^2 r_i`; `c` is found by bisection.
    MeanPhotons(f64),
}

#[derive(Debug, Clone)]
pub struct EncodedGraph {
    pub state: GaussianState,
    pub scale: f64,
    pub eigenvalues: Vec<f64>,
    pub squeezing: Vec<f64>,
    pub unitary: DMatrix<C64>,
}

impl EncodedGraph {
    pub fn mean_photons(&self) -> f64 {
        self.squeezing.iter().map(|r| r.sinh().powi(2)).sum()
    }
}

/// `Σ x^2 / (1 - x^2)` with `x = c |λ|`, i.e. `Σ sinh^2(artanh x)`.
fn photons_at(scale: f64, eigenvalues: &[f64]) -> f64 {
    eigenvalues
        .iter()
        .map(|l| {
            let x2 = (scale * l).powi(2);
            x2 / (1.0 - x2)
        })
        .sum()
}

/// Scale `c ∈ (0, 1/λ_max)` giving `target` mean photons.
pub fn scale_for_mean_photons(eigenvalues: &[f64], target: f64) -> Result<f64> {
    if !(target > 0.0 && target.is_finite()) {
        return Err(invalid("mean photon target must be positive"));
    }
    let lmax = eigenvalues.iter().fold(0.0f64, |a, l| a.max(l.abs()));
    if lmax == 0.0 {
        return Err(invalid("graph has no edges; no scale reaches a positive photon number"));
    }
    let (mut lo, mut hi) = (0.0, 1.0 / lmax);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if photons_at(mid, eigenvalues) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

pub fn encode_graph(graph: &Graph, params: EncodingParams) -> Result<EncodedGraph> {
    let n = graph.n();
    if n == 0 {
        return Err(invalid("graph has no vertices"));
    }
    if graph.edge_count() == 0 {
        return Ok(EncodedGraph {
            state: vacuum_state(n)?,
            scale: 0.0,
            eigenvalues: vec![0.0; n],
            squeezing: vec![0.0; n],
            unitary: DMatrix::identity(n, n),
        });
    }
    let a = graph.adjacency_matrix();
    let eig = a.symmetric_eigen();
    let eigenvalues: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    let scale = match params {
        EncodingParams::Scale(c) => c,
        EncodingParams::MeanPhotons(t) => scale_for_mean_photons(&eigenvalues, t)?,
    };
    let lmax = eigenvalues.iter().fold(0.0f64, |m, l| m.max(l.abs()));
    if !(scale >= 0.0 && scale * lmax < 1.0) {
        return Err(invalid(format!(
            "scale {scale} outside [0, 1/λ_max = {})",
            1.0 / lmax
        )));
    }
    let squeezing: Vec<f64> = eigenvalues.iter().map(|l| (scale * l.abs()).atanh()).collect();
    let unitary = DMatrix::from_fn(n, n, |i, j| {
        let o = eig.eigenvectors[(i, j)];
        if eigenvalues[j] < 0.0 {
            C64::new(0.0, o)
        } else {
            C64::new(o, 0.0)
        }
    });
    let state = apply_interferometer(&squeezed_vacuum(&squeezing)?, &unitary)?;
    Ok(EncodedGraph {
        state,
        scale,
        eigenvalues,
        squeezing,
        unitary,
    })
}

/// `⟨a_i a_j⟩` of a zero-mean state, from its covariance.
pub fn pairing_moments(state: &GaussianState) -> DMatrix<C64> {
    let n = state.n_modes();
    let v = state.cov();
    DMatrix::from_fn(n, n, |i, j| {
        let (xi, pi, xj, pj) = (2 * i, 2 * i + 1, 2 * j, 2 * j + 1);
        C64::new(v[(xi, xj)] - v[(pi, pj)], v[(xi, pj)] + v[(pi, xj)]) * 0.25
    })
}
