//! Numerical tolerances shared across the crate.

/// Covariance symmetry; matrices are re-symmetrized after every update.
pub const TAU_SYM: f64 = 1e-10;
/// `max |U†U - I|` accepted for an interferometer.
pub const TAU_UNITARY: f64 = 1e-10;
/// Slack on the smallest symplectic eigenvalue (`>= 1 - TAU_PHYS`).
pub const TAU_PHYS: f64 = 1e-8;
/// Probabilities within this distance of `[0, 1]` are clamped; outcomes
/// rarer than this are treated as impossible.
pub const TAU_PROB: f64 = 1e-12;
/// Per-unit rounding allowance for a signed mixture sum `Σ a_k q_k`: the
/// no-click probability may leave `[0, 1]` by at most
/// `max(TAU_PROB, CANCELLATION_SLACK * Σ |a_k q_k|)` before it is reported
/// as a precision failure. Each `q_k` carries a few ulps of error from the
/// Schur updates, and the coefficients grow by `1/(1-p)` per click.
pub const CANCELLATION_SLACK: f64 = 64.0 * f64::EPSILON;
/// Unit-trace check on mixture coefficients.
pub const TAU_NORM: f64 = 1e-9;
/// Coefficient-sum drift at which a trajectory is abandoned as a precision
/// failure. Drift grows like `ε Σ|a_k|`, and `Σ|a_k|` grows by a factor of
/// a few per click, so with double-precision branches it reaches `1e-6` to
/// `1e-4` on some 10-click trajectories at 30 modes. Step probabilities are
/// off by about the same amount, which is still far below sampling noise;
/// beyond this bound they are not.
pub const TAU_DRIFT: f64 = 1e-3;
