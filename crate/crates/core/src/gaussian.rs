//! Gaussian states in the interleaved `(x1, p1, ..., xl, pl)` quadrature
//! ordering with hbar = 2, so the vacuum covariance is the identity.
//!
//! Mode indices are zero-based throughout the library.

use nalgebra::{Complex, DMatrix, DVector, Matrix2, Vector2};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Error, Result};
use crate::tolerance::{TAU_PROB, TAU_SYM, TAU_UNITARY};

pub type C64 = Complex<f64>;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianState {
    cov: DMatrix<f64>,
    mean: DVector<f64>,
}

/// A state's covariance and mean split around one measured mode `B`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeBlocks {
    pub v_a: DMatrix<f64>,
    pub v_ab: DMatrix<f64>,
    pub v_b: Matrix2<f64>,
    pub r_a: DVector<f64>,
    pub r_b: Vector2<f64>,
}

impl GaussianState {
    /// Wraps a covariance/mean pair after checking shapes and symmetry.
    pub fn new(cov: DMatrix<f64>, mean: DVector<f64>) -> Result<Self> {
        let d = cov.nrows();
        if d == 0 || !d.is_multiple_of(2) || cov.ncols() != d {
            return Err(invalid(format!(
                "covariance must be a non-empty 2l x 2l matrix, got {}x{}",
                cov.nrows(),
                cov.ncols()
            )));
        }
        if mean.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: mean.len(),
            });
        }
        if cov.iter().chain(mean.iter()).any(|x| !x.is_finite()) {
            return Err(invalid("non-finite entry in covariance or mean"));
        }
        let asym = (&cov - cov.transpose()).amax();
        if asym > TAU_SYM * cov.amax().max(1.0) {
            return Err(invalid(format!("covariance not symmetric (deviation {asym:e})")));
        }
        Ok(Self {
            cov: symmetrized(cov),
            mean,
        })
    }

    pub(crate) fn from_parts_unchecked(cov: DMatrix<f64>, mean: DVector<f64>) -> Self {
        Self { cov, mean }
    }

    pub fn n_modes(&self) -> usize {
        self.cov.nrows() / 2
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn into_parts(self) -> (DMatrix<f64>, DVector<f64>) {
        (self.cov, self.mean)
    }

    /// `tr(V - I)/4 + |r|^2/4`.
    pub fn mean_photon_number(&self) -> f64 {
        let d = self.cov.nrows();
        (self.cov.trace() - d as f64) / 4.0 + self.mean.norm_squared() / 4.0
    }

    /// Smallest symplectic eigenvalue; a state is physical iff this is >= 1.
    ///
    /// Computed from the spectrum of `V^{1/2} Ω^T V Ω V^{1/2}`, which holds
    /// each squared symplectic eigenvalue twice. Returns 0 if `V` is not
    /// positive definite.
    pub fn min_symplectic_eigenvalue(&self) -> f64 {
        let eig = self.cov.clone().symmetric_eigen();
        if eig.eigenvalues.min() <= 0.0 {
            return 0.0;
        }
        let sqrt_diag = DMatrix::from_diagonal(&eig.eigenvalues.map(f64::sqrt));
        let root = &eig.eigenvectors * sqrt_diag * eig.eigenvectors.transpose();
        let omega = symplectic_form(self.n_modes());
        let inner = &root * omega.transpose() * &self.cov * &omega * &root;
        let nu2 = symmetrized(inner).symmetric_eigen().eigenvalues;
        nu2.min().max(0.0).sqrt()
    }

    /// Keeps only the listed modes, in the given order (a partial trace).
    pub fn reduced(&self, modes: &[usize]) -> Result<Self> {
        let l = self.n_modes();
        if modes.is_empty() {
            return Err(invalid("reduced state needs at least one mode"));
        }
        if let Some(&bad) = modes.iter().find(|&&m| m >= l) {
            return Err(invalid(format!("mode {bad} out of range for {l} modes")));
        }
        let idx = quadrature_indices(modes);
        Ok(Self {
            cov: self.cov.select_rows(&idx).select_columns(&idx),
            mean: self.mean.select_rows(&idx),
        })
    }
}

fn quadrature_indices(modes: &[usize]) -> Vec<usize> {
    modes.iter().flat_map(|&m| [2 * m, 2 * m + 1]).collect()
}

pub(crate) fn symmetrized(m: DMatrix<f64>) -> DMatrix<f64> {
    let t = m.transpose();
    (m + t) * 0.5
}

/// Symplectic form Ω in the interleaved ordering.
pub fn symplectic_form(n_modes: usize) -> DMatrix<f64> {
    let mut om = DMatrix::zeros(2 * n_modes, 2 * n_modes);
    for i in 0..n_modes {
        om[(2 * i, 2 * i + 1)] = 1.0;
        om[(2 * i + 1, 2 * i)] = -1.0;
    }
    om
}

pub fn vacuum_state(n_modes: usize) -> Result<GaussianState> {
    if n_modes == 0 {
        return Err(invalid("vacuum state needs at least one mode"));
    }
    Ok(GaussianState {
        cov: DMatrix::identity(2 * n_modes, 2 * n_modes),
        mean: DVector::zeros(2 * n_modes),
    })
}

/// Coherent state with amplitudes `alpha`; mean `(2 Re α, 2 Im α)` per mode.
pub fn coherent_state(alpha: &[C64]) -> Result<GaussianState> {
    let mut s = vacuum_state(alpha.len())?;
    for (i, a) in alpha.iter().enumerate() {
        s.mean[2 * i] = 2.0 * a.re;
        s.mean[2 * i + 1] = 2.0 * a.im;
    }
    Ok(s)
}

/// Product of single-mode squeezed vacua, squeezed in x:
/// `V = ⊕ diag(e^{-2r}, e^{2r})`.
pub fn squeezed_vacuum(squeezing: &[f64]) -> Result<GaussianState> {
    if squeezing.iter().any(|r| !r.is_finite()) {
        return Err(invalid("non-finite squeezing parameter"));
    }
    let mut s = vacuum_state(squeezing.len())?;
    for (i, &r) in squeezing.iter().enumerate() {
        s.cov[(2 * i, 2 * i)] = (-2.0 * r).exp();
        s.cov[(2 * i + 1, 2 * i + 1)] = (2.0 * r).exp();
    }
    Ok(s)
}

/// Squeezing parameter for a quadrature-variance reduction of `db` decibels,
/// `dB = -10 log10(e^{-2r})`; 8 dB gives r ≈ 0.9210.
pub fn squeezing_from_db(db: f64) -> f64 {
    db * std::f64::consts::LN_10 / 20.0
}

pub fn db_from_squeezing(r: f64) -> f64 {
    r * 20.0 / std::f64::consts::LN_10
}

/// Power transmission for a loss of `db` decibels, `T = 10^{-dB/10}`.
pub fn transmission_from_db(db: f64) -> f64 {
    10f64.powf(-db / 10.0)
}

/// Haar-random `n x n` unitary: QR of a complex Ginibre matrix with the
/// phases of `diag(R)` moved into `Q`.
pub fn haar_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<DMatrix<C64>> {
    if n == 0 {
        return Err(invalid("unitary dimension must be positive"));
    }
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let z = DMatrix::from_fn(n, n, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(re * scale, im * scale)
    });
    let qr = z.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        let d = r[(j, j)];
        let norm = d.norm();
        let phase = if norm > 0.0 { d / norm } else { C64::new(1.0, 0.0) };
        for i in 0..n {
            q[(i, j)] *= phase;
        }
    }
    Ok(q)
}

/// `max |U†U - I|`.
pub fn unitarity_defect(u: &DMatrix<C64>) -> f64 {
    let n = u.nrows();
    let prod = u.adjoint() * u;
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((prod[(i, j)] - C64::new(target, 0.0)).norm());
        }
    }
    worst
}

/// Real symplectic-orthogonal matrix of the passive transform `a -> U a`
/// in the interleaved ordering.
pub fn passive_symplectic(u: &DMatrix<C64>) -> DMatrix<f64> {
    let n = u.nrows();
    let mut s = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let z = u[(i, j)];
            s[(2 * i, 2 * j)] = z.re;
            s[(2 * i, 2 * j + 1)] = -z.im;
            s[(2 * i + 1, 2 * j)] = z.im;
            s[(2 * i + 1, 2 * j + 1)] = z.re;
        }
    }
    s
}

pub fn apply_interferometer(state: &GaussianState, u: &DMatrix<C64>) -> Result<GaussianState> {
    let l = state.n_modes();
    if u.nrows() != l || u.ncols() != l {
        return Err(Error::DimensionMismatch {
            expected: l,
            got: u.nrows(),
        });
    }
    let deviation = unitarity_defect(u);
    if deviation > TAU_UNITARY {
        return Err(Error::NotUnitary { deviation });
    }
    let s = passive_symplectic(u);
    let cov = symmetrized(&s * &state.cov * s.transpose());
    let mean = &s * &state.mean;
    Ok(GaussianState { cov, mean })
}

/// Pure-loss channel on every mode with power transmissions `t`.
pub fn apply_loss(state: &GaussianState, t: &[f64]) -> Result<GaussianState> {
    let l = state.n_modes();
    if t.len() != l {
        return Err(Error::DimensionMismatch {
            expected: l,
            got: t.len(),
        });
    }
    if let Some(bad) = t.iter().find(|x| !(0.0..=1.0).contains(*x)) {
        return Err(invalid(format!("transmission {bad} outside [0, 1]")));
    }
    let amp: Vec<f64> = t.iter().map(|x| x.sqrt()).collect();
    let d = 2 * l;
    let mut cov = state.cov.clone();
    for a in 0..d {
        for b in 0..d {
            cov[(a, b)] *= amp[a / 2] * amp[b / 2];
        }
    }
    for i in 0..l {
        cov[(2 * i, 2 * i)] += 1.0 - t[i];
        cov[(2 * i + 1, 2 * i + 1)] += 1.0 - t[i];
    }
    let mean = DVector::from_fn(d, |a, _| state.mean[a] * amp[a / 2]);
    Ok(GaussianState {
        cov: symmetrized(cov),
        mean,
    })
}

pub fn apply_uniform_loss(state: &GaussianState, transmission: f64) -> Result<GaussianState> {
    apply_loss(state, &vec![transmission; state.n_modes()])
}

/// Moves `mode` to the B position and slices the blocks. The remaining
/// modes keep their relative order in A.
pub fn partition_mode(state: &GaussianState, mode: usize) -> Result<ModeBlocks> {
    let l = state.n_modes();
    if mode >= l {
        return Err(invalid(format!("mode {mode} out of range for {l} modes")));
    }
    let rest: Vec<usize> = (0..l).filter(|&m| m != mode).collect();
    let ia = quadrature_indices(&rest);
    let ib = [2 * mode, 2 * mode + 1];
    let v_a = state.cov.select_rows(&ia).select_columns(&ia);
    let v_ab = state.cov.select_rows(&ia).select_columns(&ib);
    let v_b = Matrix2::new(
        state.cov[(ib[0], ib[0])],
        state.cov[(ib[0], ib[1])],
        state.cov[(ib[1], ib[0])],
        state.cov[(ib[1], ib[1])],
    );
    Ok(ModeBlocks {
        v_a,
        v_ab,
        v_b,
        r_a: state.mean.select_rows(&ia),
        r_b: Vector2::new(state.mean[ib[0]], state.mean[ib[1]]),
    })
}

/// Inverse of [`partition_mode`].
pub fn reassemble(blocks: &ModeBlocks, mode: usize) -> Result<GaussianState> {
    let da = blocks.v_a.nrows();
    if blocks.v_a.ncols() != da || blocks.v_ab.nrows() != da || blocks.v_ab.ncols() != 2 {
        return Err(invalid("inconsistent block shapes"));
    }
    let l = da / 2 + 1;
    if mode >= l {
        return Err(invalid(format!("mode {mode} out of range for {l} modes")));
    }
    let pos = |a: usize| if a < 2 * mode { a } else { a + 2 };
    let d = 2 * l;
    let mut cov = DMatrix::zeros(d, d);
    let mut mean = DVector::zeros(d);
    for a in 0..da {
        for b in 0..da {
            cov[(pos(a), pos(b))] = blocks.v_a[(a, b)];
        }
        for c in 0..2 {
            cov[(pos(a), 2 * mode + c)] = blocks.v_ab[(a, c)];
            cov[(2 * mode + c, pos(a))] = blocks.v_ab[(a, c)];
        }
        mean[pos(a)] = blocks.r_a[a];
    }
    for c in 0..2 {
        for e in 0..2 {
            cov[(2 * mode + c, 2 * mode + e)] = blocks.v_b[(c, e)];
        }
        mean[2 * mode + c] = blocks.r_b[c];
    }
    Ok(GaussianState { cov, mean })
}

/// `(V_B + I)^{-1}` by the adjugate, plus `det(V_B + I)`.
///
/// Fails when `V_B + I` is not positive definite.
#[inline]
pub(crate) fn shifted_inverse_2x2(v00: f64, v01: f64, v10: f64, v11: f64) -> Option<([f64; 4], f64)> {
    let m00 = v00 + 1.0;
    let m11 = v11 + 1.0;
    let m01 = 0.5 * (v01 + v10);
    let det = m00 * m11 - m01 * m01;
    if !(m00 > 0.0 && det > 0.0 && det.is_finite()) {
        return None;
    }
    let inv = 1.0 / det;
    Some(([m11 * inv, -m01 * inv, -m01 * inv, m00 * inv], det))
}

/// Vacuum overlap `q = 2 exp(-½ r^T W r) / sqrt(det(V_B + I))` with
/// `W = (V_B + I)^{-1}`, clamped to `[0, 1]` within `TAU_PROB`.
#[inline]
pub(crate) fn overlap_from_inverse(w: &[f64; 4], det: f64, r0: f64, r1: f64) -> f64 {
    let quad = r0 * (w[0] * r0 + w[1] * r1) + r1 * (w[2] * r0 + w[3] * r1);
    2.0 * (-0.5 * quad).exp() / det.sqrt()
}

pub fn vacuum_overlap_prob(v_b: &Matrix2<f64>, r_b: &Vector2<f64>) -> Result<f64> {
    let (w, det) = shifted_inverse_2x2(v_b[(0, 0)], v_b[(0, 1)], v_b[(1, 0)], v_b[(1, 1)])
        .ok_or_else(|| Error::NumericalDomain("V_B + I is not positive definite".into()))?;
    clamp_probability(overlap_from_inverse(&w, det, r_b[0], r_b[1]))
        .ok_or_else(|| Error::NumericalDomain("vacuum overlap outside [0, 1]".into()))
}

/// Clamps `p` into `[0, 1]` if it lies within `TAU_PROB` of the interval.
pub(crate) fn clamp_probability(p: f64) -> Option<f64> {
    if !p.is_finite() || !(-TAU_PROB..=1.0 + TAU_PROB).contains(&p) {
        None
    } else {
        Some(p.clamp(0.0, 1.0))
    }
}

/// State of the A modes after projecting B onto vacuum (unnormalized):
/// `V_A' = V_A - V_AB (V_B+I)^{-1} V_AB^T`, `r_A' = r_A - V_AB (V_B+I)^{-1} r_B`.
pub fn conditional_no_click_update(blocks: &ModeBlocks) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let v = &blocks.v_b;
    let (w, _) = shifted_inverse_2x2(v[(0, 0)], v[(0, 1)], v[(1, 0)], v[(1, 1)])
        .ok_or_else(|| Error::NumericalDomain("V_B + I is not positive definite".into()))?;
    let w = Matrix2::new(w[0], w[1], w[2], w[3]);
    let gain = &blocks.v_ab * w;
    let v_a = symmetrized(&blocks.v_a - &gain * blocks.v_ab.transpose());
    let r_a = &blocks.r_a - &gain * blocks.r_b;
    Ok((v_a, r_a))
}
