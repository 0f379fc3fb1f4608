//! Brute-force checks for small instances.
//!
//! Two independent routes to the same pattern probabilities: the forced
//! sequential chain over the branch mixture, and inclusion–exclusion over
//! multimode vacuum projections, which never conditions on anything.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::exec::Parallelism;
use crate::gaussian::GaussianState;
use crate::mixture::StepConfig;
use crate::sampler::{pattern_probability, ClickPattern};
use crate::summation::NeumaierSum;

pub const DEFAULT_ENUMERATION_LIMIT: usize = 10;
pub const INCLUSION_EXCLUSION_LIMIT: usize = 16;
pub const REL_TOL: f64 = 1e-9;
pub const ABS_TOL: f64 = 1e-12;

/// `|a - b| <= max(REL_TOL * max(|a|, |b|), ABS_TOL)`.
pub fn probabilities_agree(a: f64, b: f64) -> bool {
    (a - b).abs() <= (REL_TOL * a.abs().max(b.abs())).max(ABS_TOL)
}

/// Every pattern's probability, indexed by [`ClickPattern::index`].
#[derive(Debug, Clone, PartialEq)]
pub struct DistributionTable {
    n_modes: usize,
    probs: Vec<f64>,
}

impl DistributionTable {
    pub fn from_probs(n_modes: usize, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != 1 << n_modes {
            return Err(Error::DimensionMismatch {
                expected: 1 << n_modes,
                got: probs.len(),
            });
        }
        Ok(Self { n_modes, probs })
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn get(&self, pattern: &ClickPattern) -> f64 {
        self.probs[pattern.index()]
    }

    pub fn total(&self) -> f64 {
        crate::summation::compensated_sum(&self.probs)
    }

    pub fn expected_clicks(&self) -> f64 {
        let mut s = NeumaierSum::new();
        for (i, &p) in self.probs.iter().enumerate() {
            s.add(p * i.count_ones() as f64);
        }
        s.value()
    }

    /// Sums out `mode`, giving the table of the remaining modes in order.
    pub fn marginalize(&self, mode: usize) -> Result<Self> {
        if mode >= self.n_modes || self.n_modes < 2 {
            return Err(crate::error::invalid("cannot marginalize this mode"));
        }
        let n = self.n_modes - 1;
        let bit = self.n_modes - 1 - mode;
        let mut probs = vec![0.0; 1 << n];
        for (i, &p) in self.probs.iter().enumerate() {
            let high = (i >> (bit + 1)) << bit;
            let low = i & ((1 << bit) - 1);
            probs[high | low] += p;
        }
        Ok(Self { n_modes: n, probs })
    }

    /// Postselected distribution over patterns with exactly `clicks` clicks,
    /// renormalized; `None` if that set has zero mass.
    pub fn postselected(&self, clicks: usize) -> Option<Vec<(ClickPattern, f64)>> {
        let sel: Vec<(usize, f64)> = self
            .probs
            .iter()
            .enumerate()
            .filter(|(i, _)| i.count_ones() as usize == clicks)
            .map(|(i, &p)| (i, p))
            .collect();
        let mass: f64 = sel.iter().map(|(_, p)| p).sum();
        (mass > 0.0).then(|| {
            sel.into_iter()
                .map(|(i, p)| (ClickPattern::from_index(i, self.n_modes), p / mass))
                .collect()
        })
    }

    /// Total-variation distance to empirical counts over the same patterns.
    pub fn total_variation(&self, counts: &[u64]) -> f64 {
        let n: u64 = counts.iter().sum();
        if n == 0 {
            return 1.0;
        }
        0.5 * self
            .probs
            .iter()
            .zip(counts)
            .map(|(&p, &c)| (p - c as f64 / n as f64).abs())
            .sum::<f64>()
    }
}

/// Full distribution from the forced sequential chain.
pub fn enumerate_distribution(
    state: &GaussianState,
    limit: usize,
    config: &StepConfig,
) -> Result<DistributionTable> {
    let n = state.n_modes();
    if n > limit {
        return Err(Error::LimitExceeded {
            what: "modes",
            value: n,
            limit,
        });
    }
    let inner = StepConfig {
        parallelism: Parallelism {
            workers: 1,
            ..config.parallelism
        },
        ..*config
    };
    let probs = config.parallelism.map_indexed(1 << n, |i| {
        pattern_probability(state, &ClickPattern::from_index(i, n), None, &inner).map(|p| p.value)
    });
    let probs = probs.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(DistributionTable { n_modes: n, probs })
}

/// Probability that every mode in `modes` registers no click:
/// `2^|B| exp(-½ r_B^T (V_B + I)^{-1} r_B) / sqrt(det(V_B + I))`.
/// The empty set has probability 1.
pub fn multimode_vacuum_prob(state: &GaussianState, modes: &[usize]) -> Result<f64> {
    if modes.is_empty() {
        return Ok(1.0);
    }
    let red = state.reduced(modes)?;
    let d = red.cov().nrows();
    let shifted = red.cov() + DMatrix::<f64>::identity(d, d);
    let chol = shifted
        .cholesky()
        .ok_or_else(|| Error::NumericalDomain("V_B + I is not positive definite".into()))?;
    let log_det: f64 = 2.0 * chol.l().diagonal().iter().map(|x| x.ln()).sum::<f64>();
    let solved = chol.solve(red.mean());
    let quad = red.mean().dot(&solved);
    let log_p = modes.len() as f64 * std::f64::consts::LN_2 - 0.5 * quad - 0.5 * log_det;
    Ok(log_p.exp())
}

/// `P(S clicks, rest dark) = Σ_{Z ⊆ S} (-1)^{|Z|} P_vac(Z ∪ S̄)`.
pub fn inclusion_exclusion_prob(state: &GaussianState, pattern: &ClickPattern) -> Result<f64> {
    let n = state.n_modes();
    if pattern.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: pattern.len(),
        });
    }
    let clicked = pattern.click_modes();
    if clicked.len() > INCLUSION_EXCLUSION_LIMIT {
        return Err(Error::LimitExceeded {
            what: "clicked modes",
            value: clicked.len(),
            limit: INCLUSION_EXCLUSION_LIMIT,
        });
    }
    let dark: Vec<usize> = (0..n).filter(|&m| !pattern.get(m)).collect();
    let mut sum = NeumaierSum::new();
    for mask in 0u32..(1 << clicked.len()) {
        let mut modes = dark.clone();
        modes.extend(
            clicked
                .iter()
                .enumerate()
                .filter(|(j, _)| mask >> j & 1 == 1)
                .map(|(_, &m)| m),
        );
        let term = multimode_vacuum_prob(state, &modes)?;
        if mask.count_ones() % 2 == 0 {
            sum.add(term);
        } else {
            sum.add(-term);
        }
    }
    Ok(sum.value())
}

/// One row of an oracle comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleRow {
    pub pattern: ClickPattern,
    pub chain_prob: f64,
    pub ie_prob: f64,
    pub rel_err: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub rows: Vec<OracleRow>,
    pub total: f64,
}

impl OracleReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.pass) && (self.total - 1.0).abs() <= REL_TOL
    }

    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| !r.pass).count()
    }
}

/// Compares the chain and inclusion–exclusion for every pattern.
pub fn compare_routes(state: &GaussianState, limit: usize, config: &StepConfig) -> Result<OracleReport> {
    let table = enumerate_distribution(state, limit, config)?;
    let n = state.n_modes();
    let rows = config.parallelism.map_indexed(1 << n, |i| {
        let pattern = ClickPattern::from_index(i, n);
        let chain = table.probs[i];
        inclusion_exclusion_prob(state, &pattern).map(|ie| {
            let scale = chain.abs().max(ie.abs());
            let rel_err = if scale > 0.0 { (chain - ie).abs() / scale } else { 0.0 };
            OracleRow {
                pattern,
                chain_prob: chain,
                ie_prob: ie,
                rel_err,
                pass: probabilities_agree(chain, ie),
            }
        })
    });
    Ok(OracleReport {
        rows: rows.into_iter().collect::<Result<Vec<_>>>()?,
        total: table.total(),
    })
}
