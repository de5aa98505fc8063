use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One measured value at size `n`; `stderr = 0` marks exact data.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitPoint {
    #[serde(rename = "N")]
    pub n: f64,
    pub value: f64,
    pub stderr: f64,
}

impl From<(f64, f64, f64)> for FitPoint {
    fn from((n, value, stderr): (f64, f64, f64)) -> Self {
        FitPoint { n, value, stderr }
    }
}

/// Weighted least-squares fit of `Σ_k a_k N^{-2k}`.
#[derive(Clone, Debug, Serialize)]
pub struct ExpansionFit {
    pub coeffs: Vec<f64>,
    /// Standard errors from the weighted normal equations (zero for exact data).
    pub coeff_stderr: Vec<f64>,
    /// `value − fit` at each input point, in input order.
    pub residuals: Vec<f64>,
    pub chi2: f64,
    /// Residual ratio test at the two largest `N`; see [`fit_expansion`].
    pub residuals_consistent: bool,
}

impl ExpansionFit {
    pub fn a0(&self) -> f64 {
        self.coeffs[0]
    }

    pub fn a1(&self) -> f64 {
        self.coeffs.get(1).copied().unwrap_or(0.0)
    }
}

/// `value ≈ a0 + a1/N²`.
pub fn fit_inverse_square(points: &[FitPoint]) -> Result<ExpansionFit> {
    fit_expansion(points, 1)
}

/// Fits `value ≈ Σ_{k≤order} a_k N^{-2k}` with weights `1/stderr²`.
///
/// Needs `order + 2` distinct sizes. Exact inputs (any zero stderr) are fitted unweighted.
/// The residual flag compares the two largest sizes `N_a < N_b`. Residuals are consistent
/// with a remainder of order `N^{-2(order+1)}` when both lie within two standard errors
/// (plus rounding) of zero, or when `|r_b/r_a|` is at most 1.1 times the same ratio for
/// the residuals a pure `N^{-2(order+1)}` term would leave after the fit.
pub fn fit_expansion(points: &[FitPoint], order: usize) -> Result<ExpansionFit> {
    let mut sizes: Vec<f64> = points.iter().map(|p| p.n).collect();
    sizes.sort_by(f64::total_cmp);
    sizes.dedup();
    if sizes.len() < order + 2 {
        return Err(Error::InvalidParameter(format!(
            "need at least {} distinct N, got {}",
            order + 2,
            sizes.len()
        )));
    }
    if points
        .iter()
        .any(|p| !(p.n > 0.0) || !p.value.is_finite() || !(p.stderr >= 0.0))
    {
        return Err(Error::InvalidParameter(
            "fit points need N > 0, finite values and stderr >= 0".into(),
        ));
    }
    let exact = points.iter().any(|p| p.stderr == 0.0);
    let weight = |p: &FitPoint| if exact { 1.0 } else { p.stderr.powi(-2) };
    let cols = order + 1;
    let a = DMatrix::from_fn(points.len(), cols, |i, k| {
        weight(&points[i]).sqrt() * points[i].n.powi(-2 * k as i32)
    });
    let b = DVector::from_iterator(
        points.len(),
        points.iter().map(|p| weight(p).sqrt() * p.value),
    );
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > 1e-12 * smax) {
        return Err(Error::Singular(format!(
            "condition number {:.3e} for order {order}",
            smax / smin
        )));
    }
    let x = svd
        .solve(&b, 0.0)
        .map_err(|e| Error::Singular(e.to_string()))?;
    let coeffs: Vec<f64> = x.iter().copied().collect();
    let cov = (a.transpose() * &a)
        .try_inverse()
        .ok_or_else(|| Error::Singular("normal matrix not invertible".into()))?;
    let coeff_stderr = (0..cols)
        .map(|k| if exact { 0.0 } else { cov[(k, k)].max(0.0).sqrt() })
        .collect();
    let model = |n: f64| -> f64 {
        coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| c * n.powi(-2 * k as i32))
            .sum()
    };
    let residuals: Vec<f64> = points.iter().map(|p| p.value - model(p.n)).collect();
    let chi2 = points
        .iter()
        .zip(&residuals)
        .map(|(p, r)| r * r * weight(p))
        .sum();

    // residual pattern a pure next-order remainder leaves behind under the same fit
    let next = DVector::from_iterator(
        points.len(),
        points
            .iter()
            .map(|p| weight(p).sqrt() * p.n.powi(-2 * cols as i32)),
    );
    let proj = svd
        .solve(&next, 0.0)
        .map_err(|e| Error::Singular(e.to_string()))?;
    let pattern: Vec<f64> = (&next - &a * proj)
        .iter()
        .zip(points)
        .map(|(x, p)| x / weight(p).sqrt())
        .collect();

    let scale = points.iter().map(|p| p.value.abs()).fold(1.0, f64::max);
    let tol = 1e-9 * scale;
    let (na, nb) = (sizes[sizes.len() - 2], sizes[sizes.len() - 1]);
    // largest residual, its pattern value, and the smallest stderr at size n
    let at = |n: f64| -> (f64, f64, f64) {
        points
            .iter()
            .zip(residuals.iter().zip(&pattern))
            .filter(|(p, _)| p.n == n)
            .fold((0.0f64, 0.0f64, f64::INFINITY), |(r, q, s), (p, (res, pat))| {
                (r.max(res.abs()), q.max(pat.abs()), s.min(p.stderr))
            })
    };
    let (ra, qa, sa) = at(na);
    let (rb, qb, sb) = at(nb);
    let negligible = ra <= 2.0 * sa + tol && rb <= 2.0 * sb + tol;
    let residuals_consistent = negligible || (ra > 0.0 && qa > 0.0 && rb / ra <= 1.1 * qb / qa);
    Ok(ExpansionFit {
        coeffs,
        coeff_stderr,
        residuals,
        chi2,
        residuals_consistent,
    })
}
