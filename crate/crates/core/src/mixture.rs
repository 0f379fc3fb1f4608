//! The conditional state as a signed mixture of Gaussian branches.
//!
//! A threshold click is `I - |0><0|`, so conditioning a Gaussian on a click
//! gives the difference of two Gaussians: the reduced state minus `q` times
//! the vacuum-conditioned state. Every click therefore doubles the branch
//! count and every no-click keeps it.
//!
//! Branches live in one contiguous pool of uniform records
//! `[cov (d*d, row-major) | mean (d)]` with `d = 2 * remaining_modes`. Each
//! measurement writes a fresh pool for `d - 2`; nothing is updated in place.

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Error, Result};
use crate::exec::Parallelism;
use crate::gaussian::{overlap_from_inverse, shifted_inverse_2x2, GaussianState};
use crate::summation::{PartialSum, PrecisionMode};
use crate::tolerance::{CANCELLATION_SLACK, TAU_PROB};

/// Numerical settings for one sampler run.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepConfig {
    pub precision: PrecisionMode,
    pub parallelism: Parallelism,
}

impl StepConfig {
    pub fn sequential() -> Self {
        Self {
            precision: PrecisionMode::Compensated,
            parallelism: Parallelism::sequential(),
        }
    }
}

/// One term `a_k ρ(V_k, r_k)` of the mixture.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedBranch {
    pub coeff: f64,
    pub state: GaussianState,
}

/// `records` may be longer than `len() * stride`; the tail is a reused
/// buffer with stale contents.
#[derive(Debug, Clone)]
struct BranchPool {
    dim: usize,
    coeffs: Vec<f64>,
    records: Vec<f64>,
}

impl PartialEq for BranchPool {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.coeffs == other.coeffs && self.records() == other.records()
    }
}

impl BranchPool {
    fn stride(dim: usize) -> usize {
        dim * dim + dim
    }

    fn len(&self) -> usize {
        self.coeffs.len()
    }

    fn records(&self) -> &[f64] {
        &self.records[..self.len() * Self::stride(self.dim)]
    }

    fn record(&self, k: usize) -> &[f64] {
        let s = Self::stride(self.dim);
        &self.records[k * s..(k + 1) * s]
    }
}

/// Outcome of probing a mode: per-branch vacuum overlaps and their
/// coefficient-weighted sum, the no-click probability `p = Σ a_k q_k`.
#[derive(Debug, Clone)]
pub struct ModeProbe {
    position: usize,
    overlaps: Vec<f64>,
    no_click: f64,
    magnitude: f64,
}

impl ModeProbe {
    pub fn no_click_probability(&self) -> f64 {
        self.no_click
    }

    pub fn overlaps(&self) -> &[f64] {
        &self.overlaps
    }

    /// `Σ |a_k q_k|`; the ratio to `p` measures cancellation in the sum.
    pub fn magnitude(&self) -> f64 {
        self.magnitude
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateMixture {
    total_modes: usize,
    /// Original label of each remaining mode, in pool order.
    labels: Vec<usize>,
    pool: BranchPool,
    clicks: usize,
    history: Vec<(usize, bool)>,
}

/// Result of measuring one mode.
#[derive(Debug, Clone)]
pub struct Measurement {
    pub click: bool,
    pub prob: f64,
    pub mixture: StateMixture,
}

impl StateMixture {
    /// A single branch with coefficient 1.
    pub fn new(state: &GaussianState) -> Self {
        let l = state.n_modes();
        let d = 2 * l;
        let mut records = Vec::with_capacity(BranchPool::stride(d));
        let cov = state.cov();
        for a in 0..d {
            for b in 0..d {
                records.push(cov[(a, b)]);
            }
        }
        records.extend(state.mean().iter());
        Self {
            total_modes: l,
            labels: (0..l).collect(),
            pool: BranchPool {
                dim: d,
                coeffs: vec![1.0],
                records,
            },
            clicks: 0,
            history: Vec::new(),
        }
    }

    pub fn total_modes(&self) -> usize {
        self.total_modes
    }

    pub fn remaining_modes(&self) -> usize {
        self.labels.len()
    }

    /// Original labels of the unmeasured modes.
    pub fn remaining(&self) -> &[usize] {
        &self.labels
    }

    pub fn branch_count(&self) -> usize {
        self.pool.len()
    }

    pub fn clicks(&self) -> usize {
        self.clicks
    }

    pub fn history(&self) -> &[(usize, bool)] {
        &self.history
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.pool.coeffs
    }

    /// Compensated `Σ a_k`.
    pub fn coefficient_sum(&self) -> f64 {
        crate::summation::compensated_sum(&self.pool.coeffs)
    }

    /// Scalars held by the pool (coefficients, covariances, means).
    pub fn stored_scalars(&self) -> usize {
        self.pool.coeffs.len() + self.pool.records().len()
    }

    /// Copies branch `k` out of the pool.
    pub fn branch(&self, k: usize) -> Option<WeightedBranch> {
        if k >= self.pool.len() || self.pool.dim == 0 {
            return None;
        }
        let d = self.pool.dim;
        let rec = self.pool.record(k);
        let cov = DMatrix::from_row_slice(d, d, &rec[..d * d]);
        let mean = DVector::from_column_slice(&rec[d * d..]);
        Some(WeightedBranch {
            coeff: self.pool.coeffs[k],
            state: GaussianState::from_parts_unchecked(cov, mean),
        })
    }

    pub fn branches(&self) -> impl Iterator<Item = WeightedBranch> + '_ {
        (0..self.pool.len()).filter_map(|k| self.branch(k))
    }

    fn position_of(&self, mode: usize) -> Result<usize> {
        self.labels.iter().position(|&m| m == mode).ok_or_else(|| {
            invalid(format!("mode {mode} is not among the remaining modes"))
        })
    }

    /// Vacuum overlaps of every branch at `mode` and the compensated
    /// no-click probability. Chunk partial sums are merged in chunk order,
    /// so the result depends on the chunk size but not on the worker count.
    pub fn probe(&self, mode: usize, config: &StepConfig) -> Result<ModeProbe> {
        let position = self.position_of(mode)?;
        let d = self.pool.dim;
        let stride = BranchPool::stride(d);
        let b0 = 2 * position;
        let b1 = b0 + 1;
        let records = &self.pool.records;
        let chunk_size = config.parallelism.chunk_size.max(1);
        let parts = config.parallelism.map_chunks(&self.pool.coeffs, |ci, coeffs| {
            let mut sum = PartialSum::new(config.precision);
            let mut qs = Vec::with_capacity(coeffs.len());
            let mut magnitude = 0.0;
            for (i, &a) in coeffs.iter().enumerate() {
                let k = ci * chunk_size + i;
                let rec = &records[k * stride..(k + 1) * stride];
                let v = |x: usize, y: usize| rec[x * d + y];
                let Some((w, det)) = shifted_inverse_2x2(v(b0, b0), v(b0, b1), v(b1, b0), v(b1, b1))
                else {
                    return Err(Error::NumericalDomain(format!(
                        "branch {k}: V_B + I not positive definite at mode {mode}"
                    )));
                };
                let q = overlap_from_inverse(&w, det, rec[d * d + b0], rec[d * d + b1]);
                sum.add_product(a, q);
                magnitude += (a * q).abs();
                qs.push(q);
            }
            Ok((qs, sum, magnitude))
        });
        let mut overlaps = Vec::with_capacity(self.pool.len());
        let mut total = PartialSum::new(config.precision);
        let mut magnitude = 0.0;
        for part in parts {
            let (qs, sum, mag) = part?;
            overlaps.extend(qs);
            total.merge(&sum);
            magnitude += mag;
        }
        let raw = total.value();
        let slack = TAU_PROB.max(CANCELLATION_SLACK * magnitude);
        if !raw.is_finite() || raw < -slack || raw > 1.0 + slack {
            return Err(Error::Precision { mode, value: raw });
        }
        Ok(ModeProbe {
            position,
            overlaps,
            no_click: raw.clamp(0.0, 1.0),
            magnitude,
        })
    }

    pub fn no_click_probability(&self, mode: usize, config: &StepConfig) -> Result<f64> {
        Ok(self.probe(mode, config)?.no_click)
    }

    /// Applies the update for `click` at the probed mode.
    ///
    /// No-click: coefficients `a_k q_k / p`, states vacuum-conditioned.
    /// Click: each branch splits into `(a_k / (1-p), reduced)` and
    /// `(-a_k q_k / (1-p), vacuum-conditioned)`.
    pub fn commit(&self, probe: &ModeProbe, click: bool, config: &StepConfig) -> Result<Measurement> {
        self.commit_into(probe, click, config, Vec::new())
    }

    /// As [`StateMixture::commit`], writing the new pool into `buffer`
    /// (typically one returned by [`StateMixture::into_buffer`]) so that a
    /// trajectory does not reallocate and zero its pool at every step.
    pub fn commit_into(
        &self,
        probe: &ModeProbe,
        click: bool,
        config: &StepConfig,
        buffer: Vec<f64>,
    ) -> Result<Measurement> {
        let p = probe.no_click;
        let prob = if click { 1.0 - p } else { p };
        let mode = self.labels[probe.position];
        if prob < TAU_PROB {
            return Err(Error::ImpossibleOutcome { mode, prob });
        }
        let d = self.pool.dim;
        let dn = d - 2;
        let in_stride = BranchPool::stride(d);
        let out_stride = BranchPool::stride(dn);
        let fan = if click { 2 } else { 1 };
        let m = self.pool.len();

        let mut coeffs = Vec::with_capacity(fan * m);
        for (&a, &q) in self.pool.coeffs.iter().zip(&probe.overlaps) {
            if click {
                coeffs.push(a / prob);
                coeffs.push(-a * q / prob);
            } else {
                coeffs.push(a * q / prob);
            }
        }

        let mut records = buffer;
        let used = fan * m * out_stride;
        if records.len() < used {
            records.resize(used, 0.0);
        }
        if dn > 0 {
            let b0 = 2 * probe.position;
            config.parallelism.zip_chunks_mut(
                self.pool.records(),
                in_stride,
                &mut records[..used],
                fan * out_stride,
                |_, src, dst| {
                    let mut scratch = vec![0.0; 2 * dn];
                    for (rec, out) in src.chunks(in_stride).zip(dst.chunks_mut(fan * out_stride)) {
                        if click {
                            let (reduced, conditioned) = out.split_at_mut(out_stride);
                            reduce_record(rec, d, b0, reduced);
                            condition_record(rec, d, b0, conditioned, &mut scratch);
                        } else {
                            condition_record(rec, d, b0, out, &mut scratch);
                        }
                    }
                },
            );
        }

        let mut labels = self.labels.clone();
        labels.remove(probe.position);
        let mut history = self.history.clone();
        history.push((mode, click));
        Ok(Measurement {
            click,
            prob,
            mixture: StateMixture {
                total_modes: self.total_modes,
                labels,
                pool: BranchPool {
                    dim: dn,
                    coeffs,
                    records,
                },
                clicks: self.clicks + usize::from(click),
                history,
            },
        })
    }

    /// Releases the pool storage for reuse by [`StateMixture::commit_into`].
    pub fn into_buffer(self) -> Vec<f64> {
        self.pool.records
    }

    /// Measures `mode`. `forced` fixes the outcome; otherwise `uniform`
    /// (a draw from `[0, 1)`) decides it, no-click iff `uniform < p`.
    /// Near-deterministic steps (`p` within `TAU_PROB` of 0 or 1) take the
    /// only possible outcome.
    pub fn measure_mode(
        &self,
        mode: usize,
        forced: Option<bool>,
        uniform: f64,
        config: &StepConfig,
    ) -> Result<Measurement> {
        let probe = self.probe(mode, config)?;
        let click = decide_outcome(probe.no_click, forced, uniform);
        self.commit(&probe, click, config)
    }
}

pub(crate) fn decide_outcome(p: f64, forced: Option<bool>, uniform: f64) -> bool {
    match forced {
        Some(c) => c,
        None if p >= 1.0 - TAU_PROB => false,
        None if p <= TAU_PROB => true,
        None => uniform >= p,
    }
}

/// Copies the record without the measured mode's rows, columns and mean.
fn reduce_record(rec: &[f64], d: usize, b0: usize, out: &mut [f64]) {
    let dn = d - 2;
    let tail = d - b0 - 2;
    for (i, row_out) in out[..dn * dn].chunks_exact_mut(dn).enumerate() {
        let row = &rec[keep(i, b0) * d..][..d];
        row_out[..b0].copy_from_slice(&row[..b0]);
        row_out[b0..].copy_from_slice(&row[b0 + 2..][..tail]);
    }
    let mean = &rec[d * d..];
    out[dn * dn..][..b0].copy_from_slice(&mean[..b0]);
    out[dn * dn + b0..].copy_from_slice(&mean[b0 + 2..]);
}

#[inline]
fn keep(a: usize, b0: usize) -> usize {
    if a < b0 {
        a
    } else {
        a + 2
    }
}

/// Vacuum-conditioned record:
/// `V' = V_A - G W G^T`, `r' = r_A - G W r_B`, with `G = V_AB`, `W = (V_B+I)^{-1}`.
///
/// With `W = L L^T` and `u_j = L^T g_j`, entry `(i, j)` is
/// `V_ij - (u_i0 u_j0 + u_i1 u_j1)`, which rounds identically at `(j, i)`, so
/// `V'` stays exactly symmetric while rows are computed contiguously.
fn condition_record(rec: &[f64], d: usize, b0: usize, out: &mut [f64], scratch: &mut [f64]) {
    let dn = d - 2;
    let b1 = b0 + 1;
    let tail = d - b0 - 2;
    let v = |x: usize, y: usize| rec[x * d + y];
    // probe() has already rejected non-positive-definite blocks
    let (w, _) = shifted_inverse_2x2(v(b0, b0), v(b0, b1), v(b1, b0), v(b1, b1))
        .expect("positive-definite block");
    let l00 = w[0].sqrt();
    let l10 = w[2] / l00;
    let l11 = (w[3] - l10 * l10).max(0.0).sqrt();
    let (u0, u1) = scratch[..2 * dn].split_at_mut(dn);
    for j in 0..dn {
        let (g0, g1) = (v(keep(j, b0), b0), v(keep(j, b0), b1));
        u0[j] = l00 * g0 + l10 * g1;
        u1[j] = l11 * g1;
    }
    let (u0, u1) = (&*u0, &*u1);
    let row_update = |dst: &mut [f64], src: &[f64], ua: &[f64], ub: &[f64], x0: f64, x1: f64| {
        for (((o, &s), &a), &b) in dst.iter_mut().zip(src).zip(ua).zip(ub) {
            *o = s - (x0 * a + x1 * b);
        }
    };
    for (i, row_out) in out[..dn * dn].chunks_exact_mut(dn).enumerate() {
        let row = &rec[keep(i, b0) * d..][..d];
        let (x0, x1) = (u0[i], u1[i]);
        let (lo, hi) = row_out.split_at_mut(b0);
        row_update(lo, &row[..b0], &u0[..b0], &u1[..b0], x0, x1);
        row_update(hi, &row[b0 + 2..][..tail], &u0[b0..], &u1[b0..], x0, x1);
    }
    let mean = &rec[d * d..];
    let (r0, r1) = (mean[b0], mean[b1]);
    let y0 = l00 * r0 + l10 * r1;
    let y1 = l11 * r1;
    for (i, o) in out[dn * dn..].iter_mut().enumerate() {
        *o = mean[keep(i, b0)] - (u0[i] * y0 + u1[i] * y1);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::{
        apply_interferometer, conditional_no_click_update, haar_unitary, partition_mode,
        squeezed_vacuum, vacuum_state,
    };
    use crate::rng::stream;
    use approx::assert_abs_diff_eq;

    fn cfg() -> StepConfig {
        StepConfig::sequential()
    }

    fn gbs_state(l: usize, seed: u64) -> GaussianState {
        let mut rng = stream(seed, "mixture-test", 0);
        let u = haar_unitary(l, &mut rng).unwrap();
        apply_interferometer(&squeezed_vacuum(&vec![0.7; l]).unwrap(), &u).unwrap()
    }

    #[test]
    fn init_has_single_unit_branch() {
        let m = StateMixture::new(&vacuum_state(3).unwrap());
        assert_eq!(m.branch_count(), 1);
        assert_eq!(m.coefficients(), &[1.0]);
        assert_eq!(m.clicks(), 0);
        assert_eq!(m.coefficient_sum(), 1.0);
        assert_eq!(m.branch(0).unwrap().state, vacuum_state(3).unwrap());
    }

    #[test]
    fn vacuum_never_clicks() {
        let m = StateMixture::new(&vacuum_state(3).unwrap());
        assert_eq!(m.no_click_probability(1, &cfg()).unwrap(), 1.0);
        let out = m.measure_mode(2, None, 0.999_999, &cfg()).unwrap();
        assert!(!out.click);
        assert_eq!(out.prob, 1.0);
        assert_eq!(out.mixture.branch_count(), 1);
        assert_eq!(out.mixture.branch(0).unwrap().state, vacuum_state(2).unwrap());
        assert!(matches!(
            m.measure_mode(0, Some(true), 0.0, &cfg()),
            Err(Error::ImpossibleOutcome { .. })
        ));
    }

    #[test]
    fn squeezed_mode_click_probability() {
        let r = crate::gaussian::squeezing_from_db(8.0);
        let m = StateMixture::new(&squeezed_vacuum(&[r]).unwrap());
        let p = m.no_click_probability(0, &cfg()).unwrap();
        assert_abs_diff_eq!(p, 1.0 / r.cosh(), epsilon = 1e-14);
        let out = m.measure_mode(0, Some(true), 0.0, &cfg()).unwrap();
        assert_abs_diff_eq!(out.prob, 0.31271, epsilon = 1e-5);
        assert_eq!(out.mixture.remaining_modes(), 0);
    }

    #[test]
    fn linearity_of_no_click_probability() {
        // thermal n=1 (q=0.5) and a state with q = 0.3 on one mode
        let th = GaussianState::new(DMatrix::identity(2, 2) * 3.0, DVector::zeros(2)).unwrap();
        // q = 2/sqrt((v+1)^2) = 2/(v+1) = 0.3 -> v = 17/3
        let v = 2.0 / 0.3 - 1.0;
        let other = GaussianState::new(DMatrix::identity(2, 2) * v, DVector::zeros(2)).unwrap();
        let mut m = StateMixture::new(&th);
        let extra = StateMixture::new(&other);
        m.pool.coeffs = vec![2.0, -1.0];
        m.pool.records.extend_from_slice(&extra.pool.records);
        let p = m.no_click_probability(0, &cfg()).unwrap();
        assert_abs_diff_eq!(p, 0.7, epsilon = 1e-15);
    }

    #[test]
    fn forced_click_doubles_branches() {
        let s = gbs_state(2, 1);
        let m = StateMixture::new(&s);
        let probe = m.probe(1, &cfg()).unwrap();
        let p = probe.no_click_probability();
        let q = probe.overlaps()[0];
        let out = m.commit(&probe, true, &cfg()).unwrap();
        assert_eq!(out.mixture.branch_count(), 2);
        let c = out.mixture.coefficients();
        assert_abs_diff_eq!(c[0], 1.0 / (1.0 - p), epsilon = 1e-15);
        assert_abs_diff_eq!(c[1], -q / (1.0 - p), epsilon = 1e-15);
        assert_abs_diff_eq!(out.mixture.coefficient_sum(), 1.0, epsilon = 1e-12);
        assert_eq!(out.mixture.history(), &[(1, true)]);
        assert_eq!(out.mixture.remaining(), &[0]);
    }

    #[test]
    fn pool_kernels_match_block_formulas() {
        let s = gbs_state(4, 7);
        let m = StateMixture::new(&s);
        for mode in 0..4 {
            let blocks = partition_mode(&s, mode).unwrap();
            let (va, ra) = conditional_no_click_update(&blocks).unwrap();
            let out = m.measure_mode(mode, Some(true), 0.0, &cfg()).unwrap();
            let reduced = out.mixture.branch(0).unwrap().state;
            let conditioned = out.mixture.branch(1).unwrap().state;
            assert_eq!(reduced.cov(), &blocks.v_a);
            assert_eq!(reduced.mean(), &blocks.r_a);
            assert!((conditioned.cov() - &va).amax() < 1e-13);
            assert!((conditioned.mean() - &ra).amax() < 1e-13);
            let cv = conditioned.cov();
            assert_eq!(cv, &cv.transpose());
        }
    }

    #[test]
    fn trace_stays_unit_through_a_trajectory() {
        let s = gbs_state(6, 3);
        let mut m = StateMixture::new(&s);
        let forced = [true, false, true, true, false, true];
        for (mode, &click) in (0..6).rev().zip(&forced) {
            let out = m.measure_mode(mode, Some(click), 0.0, &cfg()).unwrap();
            m = out.mixture;
            assert_eq!(m.branch_count(), 1 << m.clicks());
            assert!((m.coefficient_sum() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let s = gbs_state(8, 5);
        let run = |workers: usize| {
            let config = StepConfig {
                precision: PrecisionMode::Compensated,
                parallelism: Parallelism {
                    workers,
                    chunk_size: 2,
                },
            };
            config.parallelism.install(|| {
                let mut m = StateMixture::new(&s);
                let mut probs = Vec::new();
                for mode in (0..8).rev() {
                    let out = m.measure_mode(mode, Some(mode % 2 == 0), 0.0, &config).unwrap();
                    probs.push(out.prob.to_bits());
                    m = out.mixture;
                }
                probs
            })
        };
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn unknown_mode_is_rejected() {
        let m = StateMixture::new(&vacuum_state(2).unwrap());
        assert!(m.probe(2, &cfg()).is_err());
        let out = m.measure_mode(1, None, 0.5, &cfg()).unwrap();
        assert!(out.mixture.probe(1, &cfg()).is_err());
    }

    #[test]
    fn reused_buffer_matches_fresh_pool() {
        let s = gbs_state(5, 8);
        let m = StateMixture::new(&s).measure_mode(4, Some(true), 0.0, &cfg()).unwrap().mixture;
        let probe = m.probe(3, &cfg()).unwrap();
        let fresh = m.commit(&probe, true, &cfg()).unwrap();
        let dirty = vec![f64::NAN; 1000];
        let reused = m.commit_into(&probe, true, &cfg(), dirty).unwrap();
        assert_eq!(fresh.prob, reused.prob);
        assert_eq!(fresh.mixture, reused.mixture);
        assert_eq!(reused.mixture.stored_scalars(), fresh.mixture.stored_scalars());
        let again = reused.mixture.measure_mode(2, Some(false), 0.0, &cfg()).unwrap();
        let expect = fresh.mixture.measure_mode(2, Some(false), 0.0, &cfg()).unwrap();
        assert_eq!(again.mixture, expect.mixture);
    }
}
