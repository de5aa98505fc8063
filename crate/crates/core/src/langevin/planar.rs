use std::f64::consts::PI;

use crate::algebra::TracePoly;
use crate::error::{Error, Result};

/// Equilibrium measure supported on `[c − r, c + r]`.
#[derive(Clone, Debug, PartialEq)]
pub struct OneCut {
    pub center: f64,
    pub radius: f64,
    /// Coefficients of `M(x)` with density `(1/2π) sqrt((b−x)(x−a)) M(x)`.
    pub m_coeffs: Vec<f64>,
}

impl OneCut {
    pub fn edges(&self) -> (f64, f64) {
        (self.center - self.radius, self.center + self.radius)
    }

    pub fn density(&self, x: f64) -> f64 {
        let (a, b) = self.edges();
        if x <= a || x >= b {
            return 0.0;
        }
        ((b - x) * (x - a)).sqrt() * horner(&self.m_coeffs, x) / (2.0 * PI)
    }
}

/// Real coefficients `a_k` of `V(x) = Σ a_k x^k` for a one-variable potential without traces.
pub fn potential_coefficients(v: &TracePoly) -> Result<Vec<f64>> {
    if v.nvars() != 1 {
        return Err(Error::InvalidParameter("planar moments need a single variable".into()));
    }
    let mut a = vec![0.0; v.degree() + 1];
    for (m, c) in v.iter() {
        if !m.traces.is_empty() || c.im.abs() > 1e-14 {
            return Err(Error::InvalidParameter(
                "planar moments need real coefficients and no trace factors".into(),
            ));
        }
        a[m.outer.len()] += c.re;
    }
    Ok(a)
}

fn horner(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &a| acc * x + a)
}

fn derivative(c: &[f64]) -> Vec<f64> {
    c.iter().enumerate().skip(1).map(|(k, &a)| k as f64 * a).collect()
}

/// `(1/π)∫₀^π g(cos θ) dθ` by Gauss–Chebyshev, exact for polynomials of degree < 2q.
fn arcsine_mean<F: Fn(f64) -> f64>(q: usize, g: F) -> f64 {
    (1..=q)
        .map(|k| g(((2 * k - 1) as f64 * PI / (2 * q) as f64).cos()))
        .sum::<f64>()
        / q as f64
}

/// Limiting moments `m_0..m_K` of the one-variable model `e^{-N Tr V}`.
///
/// The support `[c − r, c + r]` solves the one-cut endpoint conditions by damped Newton from the
/// semicircle; moments use Gauss–Chebyshev quadrature of the second kind; the planar
/// Schwinger–Dyson relations are verified to 1e-12 before returning.
pub fn planar_moments(v_coeffs: &[f64], depth: usize) -> Result<Vec<f64>> {
    Ok(solve(v_coeffs, depth)?.1)
}

pub(crate) fn solve(v_coeffs: &[f64], depth: usize) -> Result<(OneCut, Vec<f64>)> {
    let mut v = v_coeffs.to_vec();
    while v.len() > 1 && *v.last().unwrap() == 0.0 {
        v.pop();
    }
    let deg = v.len() - 1;
    if deg < 2 || deg % 2 == 1 || v[deg] <= 0.0 {
        return Err(Error::InvalidParameter(
            "potential must have even degree >= 2 and positive leading coefficient".into(),
        ));
    }
    let dv = derivative(&v);
    let d2v = derivative(&dv);
    let q = deg + 4;

    let residual = |c: f64, r: f64| -> [f64; 2] {
        [
            arcsine_mean(q, |t| horner(&dv, c + r * t)) / 2.0,
            arcsine_mean(q, |t| (c + r * t) * horner(&dv, c + r * t)) / 2.0 - 1.0,
        ]
    };
    let jacobian = |c: f64, r: f64| -> [[f64; 2]; 2] {
        let f = |x: f64| horner(&dv, x) + x * horner(&d2v, x);
        [
            [
                arcsine_mean(q, |t| horner(&d2v, c + r * t)) / 2.0,
                arcsine_mean(q, |t| horner(&d2v, c + r * t) * t) / 2.0,
            ],
            [
                arcsine_mean(q, |t| f(c + r * t)) / 2.0,
                arcsine_mean(q, |t| f(c + r * t) * t) / 2.0,
            ],
        ]
    };
    let norm = |f: [f64; 2]| f[0].hypot(f[1]);

    let (mut c, mut r) = (0.0, 2.0);
    let mut f = residual(c, r);
    let mut converged = false;
    for _ in 0..200 {
        if norm(f) < 1e-15 {
            converged = true;
            break;
        }
        let j = jacobian(c, r);
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if det.abs() < 1e-300 {
            return Err(Error::NoConvergence("singular Jacobian in the one-cut solve".into()));
        }
        let dc = (j[1][1] * f[0] - j[0][1] * f[1]) / det;
        let dr = (-j[1][0] * f[0] + j[0][0] * f[1]) / det;
        let mut step = 1.0;
        loop {
            let (c2, r2) = (c - step * dc, r - step * dr);
            if r2 > 0.0 {
                let f2 = residual(c2, r2);
                if norm(f2) < norm(f) || step < 1e-12 {
                    c = c2;
                    r = r2;
                    f = f2;
                    break;
                }
            }
            step *= 0.5;
            if step < 1e-12 {
                return Err(Error::NoConvergence("line search failed in the one-cut solve".into()));
            }
        }
        if (dc.abs() + dr.abs()) * step < 1e-16 {
            converged = norm(f) < 1e-12;
            break;
        }
    }
    if !converged && norm(f) >= 1e-12 {
        return Err(Error::NoConvergence(format!(
            "one-cut endpoint residual {:.3e}",
            norm(f)
        )));
    }

    // M(x) = Σ_k b_k Σ_{j<k} x^j μ_{k-1-j} with μ_i the arcsine moments of the support
    let mu: Vec<f64> = (0..dv.len())
        .map(|i| arcsine_mean(q, |t| (c + r * t).powi(i as i32)))
        .collect();
    let mut m_coeffs = vec![0.0; dv.len().saturating_sub(1).max(1)];
    for (k, &b) in dv.iter().enumerate() {
        for j in 0..k {
            m_coeffs[j] += b * mu[k - 1 - j];
        }
    }
    for s in 0..=64 {
        let x = c + r * (PI * s as f64 / 64.0).cos();
        if horner(&m_coeffs, x) < -1e-12 {
            return Err(Error::InvalidParameter(
                "equilibrium density is negative: potential is not one-cut".into(),
            ));
        }
    }
    let cut = OneCut {
        center: c,
        radius: r,
        m_coeffs,
    };

    // moments up to depth + deg V' for the residual check
    let top = depth + dv.len();
    let qm = (top + cut.m_coeffs.len()) / 2 + 4;
    let nodes: Vec<(f64, f64)> = (1..=qm)
        .map(|k| {
            let th = k as f64 * PI / (qm + 1) as f64;
            (th.cos(), PI / (qm + 1) as f64 * th.sin().powi(2))
        })
        .collect();
    let moments: Vec<f64> = (0..=top)
        .map(|n| {
            nodes
                .iter()
                .map(|&(t, w)| {
                    let x = c + r * t;
                    w * x.powi(n as i32) * horner(&cut.m_coeffs, x)
                })
                .sum::<f64>()
                * r
                * r
                / (2.0 * PI)
        })
        .collect();

    for n in 0..=depth {
        let lhs: f64 = dv.iter().enumerate().map(|(j, &b)| b * moments[n + j]).sum();
        let rhs: f64 = (0..n).map(|i| moments[i] * moments[n - 1 - i]).sum();
        let scale = 1.0f64.max(rhs.abs()).max(lhs.abs());
        if (lhs - rhs).abs() > 1e-12 * scale {
            return Err(Error::NoConvergence(format!(
                "planar Schwinger–Dyson residual {:.3e} at order {n}",
                lhs - rhs
            )));
        }
    }
    let mut out = moments;
    out.truncate(depth + 1);
    Ok((cut, out))
}
