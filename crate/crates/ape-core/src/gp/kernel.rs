//! Separable Matérn 5/2 correlation.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

/// Largest nugget tried during jitter escalation before giving up.
pub const MAX_JITTER: f64 = 1e-4;

/// Per-dimension length-scales θ for the separable correlation.
///
/// Invariant: every entry is finite and strictly positive.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationParams {
    theta: Vec<f64>,
}

impl CorrelationParams {
    pub fn new(theta: Vec<f64>) -> Result<Self> {
        if theta.is_empty() {
            return Err(Error::invalid("length-scale vector must be non-empty"));
        }
        if let Some(bad) = theta.iter().find(|t| !t.is_finite() || **t <= 0.0) {
            return Err(Error::invalid(format!(
                "length-scales must be finite and positive, got {bad}"
            )));
        }
        Ok(CorrelationParams { theta })
    }

    /// Equal length-scale `theta` in every one of `d` dimensions.
    pub fn isotropic(d: usize, theta: f64) -> Result<Self> {
        Self::new(vec![theta; d])
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn dim(&self) -> usize {
        self.theta.len()
    }
}

/// One-dimensional Matérn 5/2 correlation at distance `h ≥ 0` with
/// length-scale `theta > 0`:
///
/// ρ(h) = (1 + √5 u + 5u²/3) · exp(−√5 u),  u = h/θ.
pub fn matern52(h: f64, theta: f64) -> f64 {
    debug_assert!(h >= 0.0 && theta > 0.0);
    let u = h / theta;
    let s = 5.0_f64.sqrt() * u;
    (1.0 + s + 5.0 * u * u / 3.0) * (-s).exp()
}

/// Product correlation between two points: ∏_j ρ(|x_j − y_j|; θ_j).
pub fn correlation(x: &[f64], y: &[f64], params: &CorrelationParams) -> Result<f64> {
    if x.len() != y.len() || x.len() != params.dim() {
        return Err(Error::invalid(format!(
            "dimension mismatch: points have {} and {} coordinates, params have {}",
            x.len(),
            y.len(),
            params.dim()
        )));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::invalid("correlation inputs must be finite"));
    }
    Ok(x.iter()
        .zip(y)
        .zip(params.theta())
        .map(|((a, b), t)| matern52((a - b).abs(), *t))
        .product())
}

/// Cholesky factor of a (jittered) correlation matrix, together with the
/// nugget that made the factorization succeed.
#[derive(Debug, Clone)]
pub struct CorrFactor {
    chol: Cholesky<f64, Dyn>,
    jitter: f64,
    n: usize,
}

impl CorrFactor {
    /// Nugget actually added to the diagonal.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// log det(R + jitter·I), from the factor diagonal.
    pub fn log_det(&self) -> f64 {
        let l = self.chol.l_dirty();
        2.0 * (0..self.n).map(|i| l[(i, i)].ln()).sum::<f64>()
    }

    pub fn solve_vec(&self, b: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(b)
    }

    pub fn solve_mat(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        self.chol.solve(b)
    }

    /// Dense inverse of the jittered correlation matrix.
    pub fn inverse(&self) -> DMatrix<f64> {
        self.chol.inverse()
    }
}

/// Correlation matrix of a design (rows are points), returned factorized.
///
/// The nugget starts at `jitter`; on factorization failure it is escalated
/// tenfold at a time up to [`MAX_JITTER`]. A zero starting nugget is never
/// escalated (ten times zero goes nowhere), so degenerate designs fail fast
/// with [`Error::IllConditioned`].
pub fn corr_matrix(
    design: &DMatrix<f64>,
    params: &CorrelationParams,
    jitter: f64,
) -> Result<CorrFactor> {
    let n = design.nrows();
    if n == 0 {
        return Err(Error::invalid("design must contain at least one point"));
    }
    if design.ncols() != params.dim() {
        return Err(Error::invalid(format!(
            "design has {} columns but params have {} length-scales",
            design.ncols(),
            params.dim()
        )));
    }
    if !jitter.is_finite() || jitter < 0.0 {
        return Err(Error::invalid(format!("jitter must be ≥ 0, got {jitter}")));
    }
    if design.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("design contains non-finite coordinates"));
    }

    let mut r = DMatrix::identity(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let rho = x_row_corr(design, i, j, params);
            r[(i, j)] = rho;
            r[(j, i)] = rho;
        }
    }

    let mut nugget = jitter;
    loop {
        let mut attempt = r.clone();
        for i in 0..n {
            attempt[(i, i)] += nugget;
        }
        if let Some(chol) = Cholesky::new(attempt) {
            return Ok(CorrFactor {
                chol,
                jitter: nugget,
                n,
            });
        }
        let next = nugget * 10.0;
        if nugget == 0.0 || next > MAX_JITTER {
            return Err(Error::IllConditioned { jitter: nugget });
        }
        nugget = next;
    }
}

fn x_row_corr(design: &DMatrix<f64>, i: usize, j: usize, params: &CorrelationParams) -> f64 {
    params
        .theta()
        .iter()
        .enumerate()
        .map(|(k, t)| matern52((design[(i, k)] - design[(j, k)]).abs(), *t))
        .product()
}

/// Correlation vector r(x0) between a query point and every design row.
pub fn corr_vector(
    design: &DMatrix<f64>,
    x0: &[f64],
    params: &CorrelationParams,
) -> Result<DVector<f64>> {
    if x0.len() != design.ncols() || x0.len() != params.dim() {
        return Err(Error::invalid(format!(
            "query point has {} coordinates, design has {} columns",
            x0.len(),
            design.ncols()
        )));
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("query point contains non-finite coordinates"));
    }
    Ok(DVector::from_fn(design.nrows(), |i, _| {
        x0.iter()
            .zip(params.theta())
            .enumerate()
            .map(|(k, (x, t))| matern52((design[(i, k)] - x).abs(), *t))
            .product()
    }))
}
