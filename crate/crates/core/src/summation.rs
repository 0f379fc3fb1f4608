//! Compensated accumulators for probability sums.
//!
//! The mixture probability `Σ a_k q_k` alternates in sign once clicks have
//! been recorded, so naive summation loses digits quickly. Two accumulators
//! are provided: Neumaier compensation (a running error term in one extra
//! `f64`) and a double-double accumulator built from error-free
//! transformations, which carries roughly 106 bits of significand.

use serde::{Deserialize, Serialize};

/// Which accumulator the sampler uses for probability sums.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PrecisionMode {
    #[default]
    Compensated,
    DoubleDouble,
}

impl std::str::FromStr for PrecisionMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "compensated" => Ok(Self::Compensated),
            "double-double" | "dd" => Ok(Self::DoubleDouble),
            other => Err(format!(
                "unknown precision mode '{other}' (expected compensated or double-double)"
            )),
        }
    }
}

/// Error-free sum: `a + b = s + e` exactly.
#[inline]
pub fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let e = (a - (s - bb)) + (b - bb);
    (s, e)
}

/// Error-free product: `a * b = p + e` exactly (via FMA).
#[inline]
pub fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    let e = a.mul_add(b, -p);
    (p, e)
}

/// Neumaier compensated sum.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct NeumaierSum {
    sum: f64,
    comp: f64,
}

impl NeumaierSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn merge(&mut self, other: &Self) {
        self.add(other.sum);
        self.add(other.comp);
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Unevaluated sum `hi + lo` with `|lo| <= ulp(hi)/2`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DoubleDouble {
    hi: f64,
    lo: f64,
}

impl DoubleDouble {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, v: f64) {
        let (s, e) = two_sum(self.hi, v);
        let lo = e + self.lo;
        let (hi, lo) = quick_two_sum(s, lo);
        self.hi = hi;
        self.lo = lo;
    }

    /// Adds the exact product `a * b`.
    #[inline]
    pub fn add_product(&mut self, a: f64, b: f64) {
        let (p, pe) = two_prod(a, b);
        let (s, e) = two_sum(self.hi, p);
        let lo = e + pe + self.lo;
        let (hi, lo) = quick_two_sum(s, lo);
        self.hi = hi;
        self.lo = lo;
    }

    pub fn merge(&mut self, other: &Self) {
        let (s, e) = two_sum(self.hi, other.hi);
        let lo = e + self.lo + other.lo;
        let (hi, lo) = quick_two_sum(s, lo);
        self.hi = hi;
        self.lo = lo;
    }

    pub fn value(&self) -> f64 {
        self.hi + self.lo
    }
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

/// A partial sum under either precision mode; chunks of the branch pool
/// each produce one, and they are merged in chunk order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PartialSum {
    Compensated(NeumaierSum),
    DoubleDouble(DoubleDouble),
}

impl PartialSum {
    pub fn new(mode: PrecisionMode) -> Self {
        match mode {
            PrecisionMode::Compensated => Self::Compensated(NeumaierSum::new()),
            PrecisionMode::DoubleDouble => Self::DoubleDouble(DoubleDouble::new()),
        }
    }

    /// Accumulates `a * b`.
    #[inline]
    pub fn add_product(&mut self, a: f64, b: f64) {
        match self {
            Self::Compensated(s) => s.add(a * b),
            Self::DoubleDouble(s) => s.add_product(a, b),
        }
    }

    #[inline]
    pub fn add(&mut self, v: f64) {
        match self {
            Self::Compensated(s) => s.add(v),
            Self::DoubleDouble(s) => s.add(v),
        }
    }

    pub fn merge(&mut self, other: &Self) {
        match (self, other) {
            (Self::Compensated(a), Self::Compensated(b)) => a.merge(b),
            (Self::DoubleDouble(a), Self::DoubleDouble(b)) => a.merge(b),
            (Self::Compensated(a), Self::DoubleDouble(b)) => {
                a.add(b.hi);
                a.add(b.lo);
            }
            (Self::DoubleDouble(a), Self::Compensated(b)) => {
                a.add(b.sum);
                a.add(b.comp);
            }
        }
    }

    pub fn value(&self) -> f64 {
        match self {
            Self::Compensated(s) => s.value(),
            Self::DoubleDouble(s) => s.value(),
        }
    }
}

/// Compensated sum of a slice.
pub fn compensated_sum(values: &[f64]) -> f64 {
    let mut s = NeumaierSum::new();
    values.iter().for_each(|&v| s.add(v));
    s.value()
}
