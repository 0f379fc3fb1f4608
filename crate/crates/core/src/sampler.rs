//! Sequential threshold-detector sampling over a [`StateMixture`].

use std::borrow::Borrow;
use std::fmt;
use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::gaussian::GaussianState;
use crate::mixture::{decide_outcome, StateMixture, StepConfig};
use crate::rng;
use crate::tolerance::TAU_DRIFT;

/// Detector outcomes indexed by original mode label (`true` = click).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ClickPattern {
    bits: Vec<bool>,
}

impl ClickPattern {
    pub fn new(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            bits: vec![false; n],
        }
    }

    /// Pattern number `index` of `n` modes; mode 0 is the most significant
    /// bit, so indices sort like bitstrings.
    pub fn from_index(index: usize, n: usize) -> Self {
        Self {
            bits: (0..n).map(|i| (index >> (n - 1 - i)) & 1 == 1).collect(),
        }
    }

    pub fn index(&self) -> usize {
        self.bits.iter().fold(0, |acc, &b| (acc << 1) | usize::from(b))
    }

    pub fn parse(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(invalid(format!("invalid pattern character '{other}'"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(Self::new)
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, mode: usize) -> bool {
        self.bits[mode]
    }

    pub fn clicks(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Modes that clicked, ascending.
    pub fn click_modes(&self) -> Vec<usize> {
        self.bits
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| b.then_some(i))
            .collect()
    }
}

impl fmt::Display for ClickPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.bits {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// Default order: last mode first.
pub fn descending_order(n: usize) -> Vec<usize> {
    (0..n).rev().collect()
}

fn check_order(order: &[usize], n: usize) -> Result<()> {
    if order.len() != n {
        return Err(invalid(format!(
            "measurement order has {} entries for {n} modes",
            order.len()
        )));
    }
    let mut seen = vec![false; n];
    for &m in order {
        if m >= n || std::mem::replace(&mut seen[m], true) {
            return Err(invalid("measurement order is not a permutation"));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MeasurementPlan {
    /// `None` means [`descending_order`].
    pub order: Option<Vec<usize>>,
    /// Fixes every outcome in advance (benchmark mode).
    pub forced: Option<ClickPattern>,
    pub seed: u64,
}

impl MeasurementPlan {
    pub fn seeded(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }
}

/// Per-step record handed to a [`StepObserver`].
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    /// Number of modes measured so far (1-based step index).
    pub step: usize,
    pub mode: usize,
    pub click: bool,
    pub prob: f64,
    pub clicks: usize,
    pub branch_count: usize,
    pub remaining_modes: usize,
    pub coeff_sum: f64,
}

/// Instrumentation callback, invoked on the coordinating thread after
/// every measurement step.
pub trait StepObserver {
    fn on_step(&mut self, record: &StepRecord);
}

impl StepObserver for () {
    fn on_step(&mut self, _: &StepRecord) {}
}

impl<F: FnMut(&StepRecord)> StepObserver for F {
    fn on_step(&mut self, record: &StepRecord) {
        self(record)
    }
}

/// A finished draw.
#[derive(Debug, Clone, PartialEq)]
pub struct Draw {
    pub index: u64,
    pub pattern: ClickPattern,
    pub joint_prob: f64,
    pub wall_ms: f64,
    pub peak_branch_count: usize,
    /// Largest `|Σ a_k - 1|` seen along the trajectory; a direct measure of
    /// the rounding error carried by the step probabilities.
    pub max_drift: f64,
}

/// A draw either completes or is abandoned once it cannot satisfy a
/// click-count postselection.
#[derive(Debug, Clone, PartialEq)]
pub enum DrawOutcome {
    Complete(Draw),
    Aborted { index: u64, clicks: usize, steps: usize },
}

/// Click-count window a draw must stay inside; checked after every step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClickWindow {
    pub min: usize,
    pub max: usize,
}

impl ClickWindow {
    pub fn exactly(m: usize) -> Self {
        Self { min: m, max: m }
    }

    pub fn at_most(m: usize) -> Self {
        Self { min: 0, max: m }
    }

    fn feasible(&self, clicks: usize, remaining: usize) -> bool {
        clicks <= self.max && clicks + remaining >= self.min
    }
}

/// Draws threshold-detector samples from one Gaussian state.
#[derive(Debug, Clone)]
pub struct Sampler {
    state: GaussianState,
    order: Vec<usize>,
    seed: u64,
    config: StepConfig,
}

impl Sampler {
    pub fn new(state: GaussianState, order: Option<Vec<usize>>, seed: u64, config: StepConfig) -> Result<Self> {
        let n = state.n_modes();
        let order = order.unwrap_or_else(|| descending_order(n));
        check_order(&order, n)?;
        Ok(Self {
            state,
            order,
            seed,
            config,
        })
    }

    pub fn state(&self) -> &GaussianState {
        &self.state
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn config(&self) -> &StepConfig {
        &self.config
    }

    /// Draw number `index`, using its own random stream.
    pub fn draw(&self, index: u64) -> Result<Draw> {
        match self.run(index, None, None, &mut ())? {
            DrawOutcome::Complete(d) => Ok(d),
            DrawOutcome::Aborted { .. } => unreachable!("no window given"),
        }
    }

    /// Draw `index`, abandoned as soon as it leaves `window`.
    pub fn draw_within(&self, index: u64, window: ClickWindow) -> Result<DrawOutcome> {
        self.run(index, None, Some(window), &mut ())
    }

    /// General driver: optional forced outcomes, optional click window,
    /// observer called after each step.
    pub fn run(
        &self,
        index: u64,
        forced: Option<&ClickPattern>,
        window: Option<ClickWindow>,
        observer: &mut dyn StepObserver,
    ) -> Result<DrawOutcome> {
        let n = self.state.n_modes();
        if let Some(f) = forced {
            if f.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: f.len(),
                });
            }
        }
        let start = Instant::now();
        let mut rng = rng::stream(self.seed, "draws", index);
        let mut mixture = StateMixture::new(&self.state);
        let mut bits = vec![false; n];
        let mut joint = 1.0;
        let mut peak = 1;
        let mut max_drift = 0.0f64;
        let mut spare = Vec::new();
        for (step, &mode) in self.order.iter().enumerate() {
            let uniform: f64 = rng.random();
            let probe = mixture.probe(mode, &self.config)?;
            let click = decide_outcome(
                probe.no_click_probability(),
                forced.map(|f| f.get(mode)),
                uniform,
            );
            let remaining = n - step - 1;
            let clicks = mixture.clicks() + usize::from(click);
            if let Some(w) = window {
                if !w.feasible(clicks, remaining) {
                    return Ok(DrawOutcome::Aborted {
                        index,
                        clicks,
                        steps: step + 1,
                    });
                }
            }
            let out = mixture.commit_into(&probe, click, &self.config, std::mem::take(&mut spare))?;
            spare = std::mem::replace(&mut mixture, out.mixture).into_buffer();
            bits[mode] = click;
            joint *= out.prob;
            peak = peak.max(mixture.branch_count());
            let coeff_sum = mixture.coefficient_sum();
            max_drift = max_drift.max((coeff_sum - 1.0).abs());
            // forced chains may pass through near-impossible outcomes, whose
            // drift is harmless because their joint probability is tiny
            if forced.is_none() {
                check_drift(coeff_sum, mode)?;
            }
            observer.on_step(&StepRecord {
                step: step + 1,
                mode,
                click,
                prob: out.prob,
                clicks: mixture.clicks(),
                branch_count: mixture.branch_count(),
                remaining_modes: mixture.remaining_modes(),
                coeff_sum,
            });
        }
        Ok(DrawOutcome::Complete(Draw {
            index,
            pattern: ClickPattern::new(bits),
            joint_prob: joint,
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
            peak_branch_count: peak,
            max_drift,
        }))
    }

    /// Draws `start..start + count` concurrently (when the parallel feature
    /// is on); results are in index order.
    pub fn draw_batch(&self, start: u64, count: usize, window: Option<ClickWindow>) -> Vec<Result<DrawOutcome>> {
        // each draw runs its steps sequentially; parallelism is across draws
        let inner = Self {
            config: StepConfig {
                parallelism: crate::exec::Parallelism {
                    workers: 1,
                    ..self.config.parallelism
                },
                ..self.config
            },
            ..self.clone()
        };
        self.config
            .parallelism
            .map_indexed(count, |i| inner.run(start + i as u64, None, window, &mut ()))
    }

    /// Iterator over draws postselected on exactly `target_clicks` clicks.
    pub fn postselect(&self, target_clicks: usize, max_draws: u64) -> Result<PostselectedStream<&Sampler>> {
        PostselectedStream::new(self, target_clicks, max_draws)
    }

    /// Owning variant of [`Sampler::postselect`].
    pub fn into_postselect(self, target_clicks: usize, max_draws: u64) -> Result<PostselectedStream<Sampler>> {
        PostselectedStream::new(self, target_clicks, max_draws)
    }
}

fn check_drift(coeff_sum: f64, mode: usize) -> Result<()> {
    let drift = coeff_sum - 1.0;
    if drift.abs() <= TAU_DRIFT {
        Ok(())
    } else {
        Err(Error::NormalizationDrift { mode, drift })
    }
}

/// One exact sample under `plan`.
pub fn sample(state: &GaussianState, plan: &MeasurementPlan, config: &StepConfig) -> Result<Draw> {
    let sampler = Sampler::new(state.clone(), plan.order.clone(), plan.seed, *config)?;
    match sampler.run(0, plan.forced.as_ref(), None, &mut ())? {
        DrawOutcome::Complete(d) => Ok(d),
        DrawOutcome::Aborted { .. } => unreachable!("no window given"),
    }
}

/// Exact probability of a click pattern from the forced chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainProbability {
    pub value: f64,
    /// Set when some forced step had probability below `TAU_PROB`; `value`
    /// is then 0.
    pub impossible: bool,
}

/// Product of the conditional outcome probabilities along `order`.
pub fn pattern_probability(
    state: &GaussianState,
    pattern: &ClickPattern,
    order: Option<&[usize]>,
    config: &StepConfig,
) -> Result<ChainProbability> {
    let n = state.n_modes();
    if pattern.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: pattern.len(),
        });
    }
    let default_order;
    let order = match order {
        Some(o) => o,
        None => {
            default_order = descending_order(n);
            &default_order
        }
    };
    check_order(order, n)?;
    let mut mixture = StateMixture::new(state);
    let mut prob = 1.0;
    for &mode in order {
        match mixture.measure_mode(mode, Some(pattern.get(mode)), 0.0, config) {
            Ok(out) => {
                prob *= out.prob;
                mixture = out.mixture;
            }
            Err(Error::ImpossibleOutcome { .. }) => {
                return Ok(ChainProbability {
                    value: 0.0,
                    impossible: true,
                })
            }
            Err(e) => return Err(e),
        }
    }
    Ok(ChainProbability {
        value: prob,
        impossible: false,
    })
}

/// Accepted draws in draw-index order, with acceptance bookkeeping.
pub struct PostselectedStream<S: Borrow<Sampler>> {
    sampler: S,
    window: ClickWindow,
    next_index: u64,
    max_draws: u64,
    accepted: u64,
    buffer: std::collections::VecDeque<Result<Draw>>,
}

impl<S: Borrow<Sampler>> PostselectedStream<S> {
    fn new(sampler: S, target_clicks: usize, max_draws: u64) -> Result<Self> {
        let n = sampler.borrow().state.n_modes();
        if target_clicks > n {
            return Err(invalid(format!("target of {target_clicks} clicks exceeds {n} modes")));
        }
        Ok(PostselectedStream {
            sampler,
            window: ClickWindow::exactly(target_clicks),
            next_index: 0,
            max_draws,
            accepted: 0,
            buffer: std::collections::VecDeque::new(),
        })
    }

    pub fn draws_attempted(&self) -> u64 {
        self.next_index
    }

    pub fn accepted(&self) -> u64 {
        self.accepted
    }

    pub fn acceptance_fraction(&self) -> f64 {
        if self.next_index == 0 {
            0.0
        } else {
            self.accepted as f64 / self.next_index as f64
        }
    }

    pub fn exhausted(&self) -> bool {
        self.next_index >= self.max_draws && self.buffer.is_empty()
    }

    fn refill(&mut self) {
        let sampler = self.sampler.borrow();
        let batch = (sampler.config.parallelism.workers.max(1) * 8) as u64;
        while self.buffer.is_empty() && self.next_index < self.max_draws {
            let count = batch.min(self.max_draws - self.next_index) as usize;
            let results = sampler.draw_batch(self.next_index, count, Some(self.window));
            for r in results {
                match r {
                    Ok(DrawOutcome::Complete(d)) => {
                        self.accepted += 1;
                        self.buffer.push_back(Ok(d));
                    }
                    Ok(DrawOutcome::Aborted { .. }) => {}
                    Err(e) => self.buffer.push_back(Err(e)),
                }
            }
            self.next_index += count as u64;
        }
    }
}

impl<S: Borrow<Sampler>> Iterator for PostselectedStream<S> {
    type Item = Result<Draw>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.buffer.is_empty() {
            self.refill();
        }
        self.buffer.pop_front()
    }
}

/// Writes draws as CSV:
/// `draw_index,pattern,n_clicks,joint_prob,wall_ms,peak_branch_count`.
pub fn write_draws_csv<W: std::io::Write>(out: W, draws: &[Draw], with_timing: bool) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "draw_index",
        "pattern",
        "n_clicks",
        "joint_prob",
        "wall_ms",
        "peak_branch_count",
    ])?;
    for d in draws {
        let wall = if with_timing { d.wall_ms } else { 0.0 };
        w.write_record([
            d.index.to_string(),
            d.pattern.to_string(),
            d.pattern.clicks().to_string(),
            format!("{:e}", d.joint_prob),
            format!("{wall:.3}"),
            d.peak_branch_count.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
