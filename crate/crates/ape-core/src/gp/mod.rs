//! Stationary Gaussian-process regression on the unit hypercube.
//!
//! A fitted model combines a low-order polynomial trend with a zero-mean
//! GP whose covariance is σ²·∏_j ρ(|x_j − x'_j|; θ_j) (Matérn 5/2 in each
//! dimension). Length-scales are chosen by maximizing the concentrated
//! log-likelihood with a multistart bounded Nelder–Mead in log-θ space;
//! trend coefficients and variance then come out in closed form.

pub mod kernel;
pub mod likelihood;
pub mod optim;

pub use kernel::{corr_matrix, corr_vector, correlation, matern52, CorrFactor, CorrelationParams};
pub use likelihood::{concentrated_loglik, profile_estimates, ProfileEstimates, TrendBasis};

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use likelihood::{check_shapes, loglik_from_parts, profile_with_factor};
use optim::{first_primes, nelder_mead, radical_inverse, NmOptions};

/// Slack allowed when checking that coordinates lie in [0, 1]; queries this
/// close to the boundary are clamped rather than rejected, so rescaled
/// region-local coordinates survive round-off.
const DOMAIN_EPS: f64 = 1e-9;

/// Hyperparameter-search settings.
#[derive(Debug, Clone)]
pub struct FitConfig {
    /// Nugget added to the correlation diagonal (escalated tenfold on
    /// factorization failure, capped at [`kernel::MAX_JITTER`]).
    pub jitter: f64,
    /// Search box `[lo, hi]` applied to every length-scale.
    pub theta_bounds: (f64, f64),
    /// Number of Nelder–Mead starts; the first sits at the center of the
    /// log-θ box, the rest follow a Halton sequence across it.
    pub multistarts: usize,
    /// Objective evaluation budget per start.
    pub max_evals: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            jitter: 1e-8,
            theta_bounds: (1e-2, 1e2),
            multistarts: 5,
            max_evals: 500,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.theta_bounds;
        if !(lo.is_finite() && hi.is_finite()) || lo <= 0.0 || lo >= hi {
            return Err(Error::invalid(format!(
                "theta bounds must satisfy 0 < lo < hi, got [{lo}, {hi}]"
            )));
        }
        if !self.jitter.is_finite() || self.jitter < 0.0 {
            return Err(Error::invalid("jitter must be a finite value ≥ 0"));
        }
        if self.multistarts == 0 {
            return Err(Error::invalid("multistarts must be ≥ 1"));
        }
        if self.max_evals == 0 {
            return Err(Error::invalid("max_evals must be ≥ 1"));
        }
        Ok(())
    }
}

/// Posterior mean and standard error at a query point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub mean: f64,
    pub se: f64,
    /// The query lay outside the unit cube the model was fitted on.
    /// Extrapolation is permitted — the formulas are global — but flagged.
    pub extrapolation: bool,
}

/// A fitted GP: data, hyperparameters, and the factorizations needed to
/// predict in O(n) per query.
#[derive(Debug, Clone)]
pub struct TrainedGP {
    design: DMatrix<f64>,
    responses: DVector<f64>,
    basis: TrendBasis,
    params: CorrelationParams,
    beta: DVector<f64>,
    sigma2: f64,
    loglik: f64,
    factor: CorrFactor,
    weights: DVector<f64>,
    trend_chol: Cholesky<f64, Dyn>,
}

/// Maximum-likelihood fit: multistart Nelder–Mead over log length-scales,
/// then closed-form trend/variance at the winner.
///
/// Deterministic — the start points are a fixed low-discrepancy set, so
/// refitting the same data with the same config reproduces θ̂ bit for bit.
pub fn fit(
    design: DMatrix<f64>,
    y: DVector<f64>,
    basis: TrendBasis,
    config: &FitConfig,
) -> Result<TrainedGP> {
    config.validate()?;
    check_shapes(&design, &y, basis)?;
    check_unit_cube(&design)?;
    if let Some(bad) = y.iter().find(|v| !v.is_finite()) {
        return Err(Error::invalid(format!("response contains non-finite value {bad}")));
    }

    let d = design.ncols();
    let (lo, hi) = config.theta_bounds;
    let (log_lo, log_hi) = (lo.ln(), hi.ln());
    let lo_vec = vec![log_lo; d];
    let hi_vec = vec![log_hi; d];
    let f_mat = basis.design_matrix(&design);

    // Negative concentrated log-likelihood over z = ln θ. Length-scales
    // that break the factorization are fenced off with +∞ instead of
    // aborting the search.
    let objective = |z: &[f64]| -> f64 {
        let theta: Vec<f64> = z.iter().map(|v| v.exp()).collect();
        let params = match CorrelationParams::new(theta) {
            Ok(p) => p,
            Err(_) => return f64::INFINITY,
        };
        let factor = match corr_matrix(&design, &params, config.jitter) {
            Ok(f) => f,
            Err(_) => return f64::INFINITY,
        };
        match profile_with_factor(&factor, &f_mat, &y) {
            Ok(parts) => -loglik_from_parts(y.len(), parts.sigma2, factor.log_det()),
            Err(_) => f64::INFINITY,
        }
    };

    let primes = first_primes(d);
    let nm_opts = NmOptions {
        max_evals: config.max_evals,
        ..Default::default()
    };
    let mut best: Option<(Vec<f64>, f64)> = None;
    for start in 0..config.multistarts {
        let z0: Vec<f64> = if start == 0 {
            vec![0.5 * (log_lo + log_hi); d]
        } else {
            (0..d)
                .map(|j| {
                    log_lo + radical_inverse(start as u64, primes[j]) * (log_hi - log_lo)
                })
                .collect()
        };
        let r = nelder_mead(&objective, &z0, &lo_vec, &hi_vec, &nm_opts);
        // Strict improvement keeps the earliest start on ties, so the
        // winner is stable.
        if best.as_ref().is_none_or(|(_, f)| r.fval < *f) {
            best = Some((r.x, r.fval));
        }
    }
    let (z_best, f_best) = best.expect("multistarts ≥ 1");
    if f_best == f64::INFINITY {
        // Every candidate θ failed. Re-run the center start outside the
        // penalty wrapper so the caller sees the underlying error
        // (typically an ill-conditioned correlation matrix).
        let center = (0.5 * (log_lo + log_hi)).exp();
        let params = CorrelationParams::isotropic(d, center)?;
        return fit_with_params(design, y, basis, params, config.jitter);
    }

    let theta: Vec<f64> = z_best.iter().map(|v| v.exp()).collect();
    let params = CorrelationParams::new(theta)?;
    fit_with_params(design, y, basis, params, config.jitter)
}

/// Fit holding the length-scales fixed: closed-form trend and variance only.
pub fn fit_with_params(
    design: DMatrix<f64>,
    y: DVector<f64>,
    basis: TrendBasis,
    params: CorrelationParams,
    jitter: f64,
) -> Result<TrainedGP> {
    check_shapes(&design, &y, basis)?;
    if params.dim() != design.ncols() {
        return Err(Error::invalid(format!(
            "params have {} length-scales, design has {} columns",
            params.dim(),
            design.ncols()
        )));
    }
    let factor = corr_matrix(&design, &params, jitter)?;
    let f_mat = basis.design_matrix(&design);
    let parts = profile_with_factor(&factor, &f_mat, &y)?;
    let loglik = loglik_from_parts(y.len(), parts.sigma2, factor.log_det());
    Ok(TrainedGP {
        design,
        responses: y,
        basis,
        params,
        beta: parts.beta,
        sigma2: parts.sigma2,
        loglik,
        factor,
        weights: parts.weights,
        trend_chol: parts.trend_chol,
    })
}

impl TrainedGP {
    /// BLUP mean and universal-kriging standard error at `x0 ∈ [0,1]^d`:
    ///
    /// m(x0) = f(x0)ᵀβ̂ + r(x0)ᵀ R⁻¹ (y − Fβ̂)
    /// s²(x0) = σ̂² [1 − rᵀR⁻¹r + uᵀ(FᵀR⁻¹F)⁻¹u],  u = f(x0) − FᵀR⁻¹r.
    pub fn predict(&self, x0: &[f64]) -> Result<Prediction> {
        if x0.len() != self.dim() {
            return Err(Error::invalid(format!(
                "query has {} coordinates, model expects {}",
                x0.len(),
                self.dim()
            )));
        }
        let r0 = corr_vector(&self.design, x0, &self.params)?;
        let rinv_r = self.factor.solve_vec(&r0);
        let f0 = DVector::from_vec(self.basis.eval(x0));
        let mean = f0.dot(&self.beta) + r0.dot(&self.weights);

        let u = &f0 - self.f_matrix().transpose() * &rinv_r;
        let trend_term = u.dot(&self.trend_chol.solve(&u));
        let var = self.sigma2 * (1.0 - r0.dot(&rinv_r) + trend_term);
        let extrapolation = x0
            .iter()
            .any(|v| *v < -DOMAIN_EPS || *v > 1.0 + DOMAIN_EPS);
        Ok(Prediction {
            mean,
            se: var.max(0.0).sqrt(),
            extrapolation,
        })
    }

    fn f_matrix(&self) -> DMatrix<f64> {
        self.basis.design_matrix(&self.design)
    }

    pub fn theta(&self) -> &CorrelationParams {
        &self.params
    }

    pub fn beta(&self) -> &DVector<f64> {
        &self.beta
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    /// Concentrated log-likelihood at the fitted hyperparameters
    /// (+∞ when the profiled variance is zero).
    pub fn loglik(&self) -> f64 {
        self.loglik
    }

    /// Nugget the factorization actually used (≥ the configured jitter if
    /// escalation was needed).
    pub fn jitter(&self) -> f64 {
        self.factor.jitter()
    }

    pub fn basis(&self) -> TrendBasis {
        self.basis
    }

    pub fn design(&self) -> &DMatrix<f64> {
        &self.design
    }

    pub fn responses(&self) -> &DVector<f64> {
        &self.responses
    }

    pub fn len(&self) -> usize {
        self.design.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.design.ncols()
    }

    pub(crate) fn weights(&self) -> &DVector<f64> {
        &self.weights
    }

    pub(crate) fn factor(&self) -> &CorrFactor {
        &self.factor
    }
}

fn check_unit_cube(design: &DMatrix<f64>) -> Result<()> {
    for v in design.iter() {
        if !v.is_finite() || *v < -DOMAIN_EPS || *v > 1.0 + DOMAIN_EPS {
            return Err(Error::invalid(format!(
                "design coordinate {v} lies outside the unit hypercube"
            )));
        }
    }
    Ok(())
}
