//! Covariance-intersection (CI) fusion of `(mean, covariance)` estimates.
//!
//! CI combines two estimates with unknown cross-correlation through a convex
//! combination of their information matrices:
//!
//! ```text
//! P_CC = (w * P_AA^-1 + (1 - w) * P_BB^-1)^-1
//! C    = P_CC * (w * P_AA^-1 * A + (1 - w) * P_BB^-1 * B)
//! ```
//!
//! The weight `w` is chosen to minimize a scalar size measure of the fused
//! covariance, by default its trace. In the scalar case the objective is
//! monotone in `w`, so the optimum is always an endpoint: the fused estimate
//! is simply the input with the smaller variance.

use nalgebra::{Cholesky, DMatrix, DVector};
use thiserror::Error;

/// Per-entry absolute tolerance for covariance symmetry.
pub const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EstimateError {
    #[error("mean has dimension {mean_dim} but covariance is {rows}x{cols}")]
    DimensionMismatch {
        mean_dim: usize,
        rows: usize,
        cols: usize,
    },
    #[error("estimates have dimensions {0} and {1}")]
    IncompatibleDimensions(usize, usize),
    #[error("covariance entries ({row},{col}) and ({col},{row}) differ by {delta:e}")]
    NotSymmetric { row: usize, col: usize, delta: f64 },
    #[error("covariance is not positive definite")]
    NotPositiveDefinite,
    #[error("estimate dimension must be at least 1")]
    Empty,
    #[error("covariance is not invertible")]
    NotInvertible,
    #[error("estimate contains a non-finite entry")]
    NotFinite,
    #[error("omega {0} is outside [0, 1]")]
    OmegaOutOfRange(f64),
}

/// A `(mean, covariance)` estimate of a `d`-dimensional quantity.
///
/// The covariance is validated on construction: symmetric to [`SYMMETRY_TOL`]
/// per entry and positive definite.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
}

impl Estimate {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self, EstimateError> {
        if mean.is_empty() {
            return Err(EstimateError::Empty);
        }
        if cov.nrows() != mean.len() || cov.ncols() != mean.len() {
            return Err(EstimateError::DimensionMismatch {
                mean_dim: mean.len(),
                rows: cov.nrows(),
                cols: cov.ncols(),
            });
        }
        if mean.iter().any(|v| !v.is_finite()) || cov.iter().any(|v| !v.is_finite()) {
            return Err(EstimateError::NotFinite);
        }
        for i in 0..cov.nrows() {
            for j in (i + 1)..cov.ncols() {
                let delta = (cov[(i, j)] - cov[(j, i)]).abs();
                if delta > SYMMETRY_TOL {
                    return Err(EstimateError::NotSymmetric { row: i, col: j, delta });
                }
            }
        }
        if Cholesky::new(cov.clone()).is_none() {
            return Err(EstimateError::NotPositiveDefinite);
        }
        Ok(Self { mean, cov })
    }

    /// One-dimensional estimate from a mean and a variance.
    pub fn scalar(mean: f64, variance: f64) -> Result<Self, EstimateError> {
        Self::new(DVector::from_element(1, mean), DMatrix::from_element(1, 1, variance))
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    /// Mean of a one-dimensional estimate.
    ///
    /// Panics if `dim() != 1`.
    pub fn scalar_mean(&self) -> f64 {
        assert_eq!(self.dim(), 1, "scalar_mean on a {}-dimensional estimate", self.dim());
        self.mean[0]
    }

    /// Variance of a one-dimensional estimate.
    ///
    /// Panics if `dim() != 1`.
    pub fn scalar_variance(&self) -> f64 {
        assert_eq!(self.dim(), 1, "scalar_variance on a {}-dimensional estimate", self.dim());
        self.cov[(0, 0)]
    }
}

/// CI convex-combination weight, constrained to `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Omega(f64);

impl Omega {
    pub const ZERO: Omega = Omega(0.0);
    pub const ONE: Omega = Omega(1.0);

    pub fn new(value: f64) -> Result<Self, EstimateError> {
        if !(0.0..=1.0).contains(&value) {
            return Err(EstimateError::OmegaOutOfRange(value));
        }
        Ok(Omega(value))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Scalar size measure of the fused covariance minimized when picking omega.
///
/// Both reduce to the variance for one-dimensional estimates. A single run
/// should use one objective throughout; mixing them makes fused estimates
/// incomparable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CiObjective {
    #[default]
    Trace,
    Determinant,
}

/// Fuses two estimates with a fixed weight per the CI equations.
///
/// At the endpoints the inverse formula degenerates, so `w = 0` returns `b`
/// and `w = 1` returns `a` directly.
pub fn ci_fuse(a: &Estimate, b: &Estimate, w: Omega) -> Result<Estimate, EstimateError> {
    if a.dim() != b.dim() {
        return Err(EstimateError::IncompatibleDimensions(a.dim(), b.dim()));
    }
    let w = w.value();
    if w == 0.0 {
        return Ok(b.clone());
    }
    if w == 1.0 {
        return Ok(a.clone());
    }

    let info_a = a.cov.clone().try_inverse().ok_or(EstimateError::NotInvertible)?;
    let info_b = b.cov.clone().try_inverse().ok_or(EstimateError::NotInvertible)?;
    let info = &info_a * w + &info_b * (1.0 - w);
    let p_cc = info.try_inverse().ok_or(EstimateError::NotInvertible)?;
    // Inverting twice leaves float asymmetry; restore it exactly.
    let p_cc = (&p_cc + p_cc.transpose()) * 0.5;
    let c = &p_cc * (info_a * &a.mean * w + info_b * &b.mean * (1.0 - w));
    Estimate::new(c, p_cc)
}

/// Weight minimizing `trace(P_CC(w))` over `[0, 1]`.
///
/// For one-dimensional estimates the objective is monotone in `w`, so the
/// result is exactly `0` or `1`: the input with the smaller variance wins,
/// and an exact variance tie goes to the larger mean (consistent with max
/// aggregation, which the objective cannot discriminate).
pub fn ci_optimal_omega(a: &Estimate, b: &Estimate) -> Result<Omega, EstimateError> {
    ci_optimal_omega_with(a, b, CiObjective::Trace)
}

/// [`ci_optimal_omega`] with an explicit objective.
pub fn ci_optimal_omega_with(
    a: &Estimate,
    b: &Estimate,
    objective: CiObjective,
) -> Result<Omega, EstimateError> {
    if a.dim() != b.dim() {
        return Err(EstimateError::IncompatibleDimensions(a.dim(), b.dim()));
    }
    if a.dim() == 1 {
        let (pa, pb) = (a.scalar_variance(), b.scalar_variance());
        return Ok(if pa < pb {
            Omega::ONE
        } else if pb < pa {
            Omega::ZERO
        } else if a.scalar_mean() > b.scalar_mean() {
            Omega::ONE
        } else {
            Omega::ZERO
        });
    }

    let info_a = a.cov.clone().try_inverse().ok_or(EstimateError::NotInvertible)?;
    let info_b = b.cov.clone().try_inverse().ok_or(EstimateError::NotInvertible)?;
    let objective_at = |w: f64| -> Result<f64, EstimateError> {
        let info = &info_a * w + &info_b * (1.0 - w);
        let p_cc = info.try_inverse().ok_or(EstimateError::NotInvertible)?;
        Ok(match objective {
            CiObjective::Trace => p_cc.trace(),
            CiObjective::Determinant => p_cc.determinant(),
        })
    };

    // Seed from a uniform grid, then refine with golden-section search. The
    // objective is convex in w, so a local bracket around the grid minimum
    // contains the optimum.
    const GRID_POINTS: usize = 101;
    let mut best_w = 0.0;
    let mut best_obj = f64::INFINITY;
    for i in 0..GRID_POINTS {
        let w = i as f64 / (GRID_POINTS - 1) as f64;
        let obj = objective_at(w)?;
        if obj < best_obj {
            best_obj = obj;
            best_w = w;
        }
    }

    let step = 1.0 / (GRID_POINTS - 1) as f64;
    let mut lo = (best_w - step).max(0.0);
    let mut hi = (best_w + step).min(1.0);
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = objective_at(x1)?;
    let mut f2 = objective_at(x2)?;
    while hi - lo > 1e-12 {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = objective_at(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = objective_at(x2)?;
        }
    }
    let refined = 0.5 * (lo + hi);
    let refined_obj = objective_at(refined)?;
    Ok(if refined_obj < best_obj {
        Omega::new(refined)?
    } else {
        Omega::new(best_w)?
    })
}

/// Fuses with the optimal weight: `ci_fuse(a, b, ci_optimal_omega(a, b))`.
pub fn ci_fuse_optimal(a: &Estimate, b: &Estimate) -> Result<Estimate, EstimateError> {
    ci_fuse(a, b, ci_optimal_omega(a, b)?)
}
