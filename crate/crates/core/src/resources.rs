//! Memory, node-count and runtime model for the branch-mixture sampler.
//!
//! After `k` measurements with `m` clicks the pool holds `2^m` covariance
//! matrices of size `2(l-k)`, i.e. `4(l-k)^2 2^m` scalars. With an overhead
//! factor η for temporaries and `b` bytes per scalar the footprint is
//! `η 4 (l-k)^2 2^m b / 2^30` GiB; for 16-byte scalars this is
//! `η 2^{m-24} (l-k)^2`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::sampler::{StepObserver, StepRecord};

/// Published Titan runs: `(modes, clicks, nodes, cpu_hours, walltime_hours)`.
pub const TITAN_RUNS: [(usize, usize, usize, f64, f64); 6] = [
    (200, 10, 1, 1.81, 0.11),
    (288, 12, 4, 21.86, 0.68),
    (392, 14, 32, 250.17, 0.97),
    (512, 16, 128, 2028.91, 1.98),
    (624, 18, 1024, 15612.79, 1.90),
    (800, 20, 8192, 239773.95, 1.83),
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResourceModel {
    /// Overhead factor for temporaries.
    pub eta: f64,
    pub bytes_per_scalar: u32,
    /// Memory per compute node, GiB.
    pub node_memory_gb: f64,
    pub node_cores: u32,
}

impl Default for ResourceModel {
    fn default() -> Self {
        Self {
            eta: 2.0,
            bytes_per_scalar: 16,
            node_memory_gb: 32.0,
            node_cores: 16,
        }
    }
}

impl ResourceModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.node_memory_gb > 0.0 && self.bytes_per_scalar > 0 && self.node_cores > 0) {
            return Err(invalid("resource model parameters must be positive"));
        }
        Ok(())
    }

    /// GiB held by `branches` covariance matrices of `remaining` modes.
    pub fn pool_gb(&self, branches: usize, remaining: usize) -> f64 {
        let scalars = 4.0 * (remaining * remaining) as f64 * branches as f64;
        self.eta * scalars * self.bytes_per_scalar as f64 / (1u64 << 30) as f64
    }
}

/// Memory after `step` measurements of an `modes`-mode device with
/// `clicks` clicks recorded so far.
pub fn memory_at_step(model: &ResourceModel, modes: usize, clicks: usize, step: usize) -> Result<f64> {
    if step > modes {
        return Err(invalid(format!("step {step} exceeds {modes} modes")));
    }
    if clicks > step {
        return Err(invalid(format!("{clicks} clicks cannot occur in {step} steps")));
    }
    let remaining = (modes - step) as f64;
    Ok(model.eta * 4.0 * remaining * remaining * 2f64.powi(clicks as i32) * model.bytes_per_scalar as f64
        / (1u64 << 30) as f64)
}

/// Peak memory when all `clicks` land in the first steps, i.e.
/// [`memory_at_step`] at step = clicks.
pub fn peak_memory_worst_case(model: &ResourceModel, modes: usize, clicks: usize) -> Result<f64> {
    if clicks > modes {
        return Err(invalid(format!("{clicks} clicks exceed {modes} modes")));
    }
    memory_at_step(model, modes, clicks, clicks)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeEstimate {
    /// `ceil(memory / μ)`, at least one.
    pub min_nodes: u64,
    /// Smallest power of two covering `min_nodes`.
    pub pow2_nodes: u64,
}

pub fn node_count(model: &ResourceModel, memory_gb: f64) -> Result<NodeEstimate> {
    if !memory_gb.is_finite() || memory_gb < 0.0 {
        return Err(invalid("memory must be a non-negative number"));
    }
    let nodes = (memory_gb / model.node_memory_gb).ceil();
    if nodes >= 2f64.powi(63) {
        return Err(invalid(format!("{memory_gb:e} GB needs more nodes than can be counted")));
    }
    let min_nodes = (nodes as u64).max(1);
    Ok(NodeEstimate {
        min_nodes,
        pow2_nodes: min_nodes.next_power_of_two(),
    })
}

/// Least-squares line through `(clicks, log2 cpu_hours)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuntimeFit {
    pub slope: f64,
    pub intercept: f64,
    pub residuals: Vec<f64>,
}

impl RuntimeFit {
    /// Predicted CPU hours at `clicks`.
    pub fn extrapolate(&self, clicks: f64) -> f64 {
        2f64.powf(self.slope * clicks + self.intercept)
    }

    /// Clicks at which the fit reaches `cpu_hours`.
    pub fn clicks_for(&self, cpu_hours: f64) -> f64 {
        (cpu_hours.log2() - self.intercept) / self.slope
    }
}

pub fn fit_runtime(observations: &[(f64, f64)]) -> Result<RuntimeFit> {
    if let Some(&(_, h)) = observations.iter().find(|(_, h)| h.is_nan() || *h <= 0.0) {
        return Err(invalid(format!("cpu hours must be positive, got {h}")));
    }
    let mut distinct: Vec<f64> = observations.iter().map(|(m, _)| *m).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(invalid("runtime fit needs at least three distinct click counts"));
    }
    let n = observations.len() as f64;
    let xs: Vec<f64> = observations.iter().map(|(m, _)| *m).collect();
    let ys: Vec<f64> = observations.iter().map(|(_, h)| h.log2()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residuals = xs.iter().zip(&ys).map(|(x, y)| y - (slope * x + intercept)).collect();
    Ok(RuntimeFit {
        slope,
        intercept,
        residuals,
    })
}

/// The Titan `(clicks, cpu_hours)` pairs.
pub fn titan_observations() -> Vec<(f64, f64)> {
    TITAN_RUNS.iter().map(|&(_, m, _, h, _)| (m as f64, h)).collect()
}

/// One row of a live memory trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepMemory {
    pub step: usize,
    pub mode: usize,
    pub click: bool,
    pub clicks: usize,
    pub branch_count: usize,
    /// Model footprint of the pool actually held after this step.
    pub modeled_gb: f64,
}

/// Observer recording the modeled footprint of every step of a run.
#[derive(Debug, Clone)]
pub struct MemoryTrace {
    model: ResourceModel,
    modes: usize,
    steps: Vec<StepMemory>,
}

impl MemoryTrace {
    pub fn new(model: ResourceModel, modes: usize) -> Self {
        Self {
            model,
            modes,
            steps: Vec::with_capacity(modes),
        }
    }

    pub fn steps(&self) -> &[StepMemory] {
        &self.steps
    }

    pub fn peak_branch_count(&self) -> usize {
        self.steps.iter().map(|s| s.branch_count).max().unwrap_or(1)
    }

    /// Largest modeled footprint, including the initial single state.
    pub fn peak_gb(&self) -> f64 {
        let initial = self.model.pool_gb(1, self.modes);
        self.steps.iter().map(|s| s.modeled_gb).fold(initial, f64::max)
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["step", "mode", "click", "clicks", "branch_count", "modeled_gb"])?;
        for s in &self.steps {
            w.write_record([
                s.step.to_string(),
                s.mode.to_string(),
                u8::from(s.click).to_string(),
                s.clicks.to_string(),
                s.branch_count.to_string(),
                format!("{:e}", s.modeled_gb),
            ])?;
        }
        w.flush().map_err(Error::from)
    }
}

impl StepObserver for MemoryTrace {
    fn on_step(&mut self, r: &StepRecord) {
        self.steps.push(StepMemory {
            step: r.step,
            mode: r.mode,
            click: r.click,
            clicks: r.clicks,
            branch_count: r.branch_count,
            modeled_gb: self.model.pool_gb(r.branch_count, r.remaining_modes),
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn table_one_rows() {
        let m = ResourceModel::default();
        assert_abs_diff_eq!(memory_at_step(&m, 200, 10, 10).unwrap(), 4.407, epsilon = 5e-4);
        assert_abs_diff_eq!(memory_at_step(&m, 50, 5, 5).unwrap(), 0.0077, epsilon = 5e-5);
        assert_abs_diff_eq!(peak_memory_worst_case(&m, 450, 15).unwrap(), 739.16, epsilon = 5e-3);
        assert_abs_diff_eq!(peak_memory_worst_case(&m, 800, 20).unwrap(), 76050.0, epsilon = 0.5);
    }

    #[test]
    fn single_branch_and_doubling() {
        let m = ResourceModel::default();
        let single = memory_at_step(&m, 30, 0, 4).unwrap();
        assert_eq!(single, 2.0 * 26.0 * 26.0 * 4.0 * 16.0 / (1u64 << 30) as f64);
        assert_eq!(
            peak_memory_worst_case(&m, 30, 0).unwrap(),
            2.0 * 4.0 * 900.0 * 16.0 / (1u64 << 30) as f64
        );
        for clicks in 0..6 {
            let a = memory_at_step(&m, 40, clicks, 8).unwrap();
            let b = memory_at_step(&m, 40, clicks + 1, 8).unwrap();
            assert_eq!(b, 2.0 * a);
        }
    }

    #[test]
    fn range_checks() {
        let m = ResourceModel::default();
        assert!(memory_at_step(&m, 10, 0, 11).is_err());
        assert!(memory_at_step(&m, 10, 4, 3).is_err());
        assert!(peak_memory_worst_case(&m, 10, 11).is_err());
    }

    #[test]
    fn node_counts() {
        let m = ResourceModel::default();
        let big = node_count(&m, 76050.0).unwrap();
        assert_eq!(big.min_nodes, 2377);
        assert_eq!(big.pow2_nodes, 4096);
        assert_eq!(node_count(&m, 0.008).unwrap().min_nodes, 1);
        assert_eq!(node_count(&m, 0.0).unwrap().min_nodes, 1);
        assert_eq!(node_count(&m, 739.16).unwrap().min_nodes, 24);
        assert!(node_count(&m, -1.0).is_err());
    }

    #[test]
    fn fit_exact_doubling() {
        let obs: Vec<(f64, f64)> = (1..8).map(|m| (m as f64, 2f64.powi(m))).collect();
        let fit = fit_runtime(&obs).unwrap();
        assert_abs_diff_eq!(fit.slope, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.intercept, 0.0, epsilon = 1e-12);
        assert!(fit.residuals.iter().all(|r| r.abs() < 1e-12));
    }

    #[test]
    fn fit_ignores_duplication() {
        let obs = titan_observations();
        let doubled: Vec<(f64, f64)> = obs.iter().chain(obs.iter()).copied().collect();
        let a = fit_runtime(&obs).unwrap();
        let b = fit_runtime(&doubled).unwrap();
        assert_abs_diff_eq!(a.slope, b.slope, epsilon = 1e-12);
        assert_abs_diff_eq!(a.intercept, b.intercept, epsilon = 1e-12);
    }

    #[test]
    fn fit_rejects_bad_input() {
        assert!(fit_runtime(&[(1.0, 1.0), (2.0, 2.0)]).is_err());
        assert!(fit_runtime(&[(1.0, 1.0), (1.0, 2.0), (1.0, 3.0)]).is_err());
        assert!(fit_runtime(&[(1.0, 1.0), (2.0, 0.0), (3.0, 3.0)]).is_err());
    }

    #[test]
    fn worst_case_dominates_every_trajectory() {
        // exhaustive over click placements; holds once l - m >= 3
        let model = ResourceModel::default();
        for modes in 4..=12usize {
            for max_clicks in 0..=modes - 3 {
                let peak = peak_memory_worst_case(&model, modes, max_clicks).unwrap();
                for mask in 0u32..(1 << modes) {
                    if mask.count_ones() as usize > max_clicks {
                        continue;
                    }
                    let mut clicks = 0;
                    for step in 1..=modes {
                        clicks += (mask >> (step - 1) & 1) as usize;
                        let mem = memory_at_step(&model, modes, clicks, step).unwrap();
                        assert!(mem <= peak, "l={modes} m={max_clicks} mask={mask:b}");
                    }
                }
            }
        }
    }

    #[test]
    fn worst_case_fails_when_clicks_fill_the_device() {
        // with every mode clicking the k = m point holds no matrices at all
        let model = ResourceModel::default();
        let peak = peak_memory_worst_case(&model, 6, 6).unwrap();
        assert_eq!(peak, 0.0);
        assert!(memory_at_step(&model, 6, 5, 5).unwrap() > peak);
    }
}
