use rayon::prelude::*;
use serde::Serialize;

use super::TransportSpec;
use crate::algebra::{bold_grad_all, DerivativePlan, EvalCache, Evaluator, TracePoly};
use crate::error::{Error, Result};
use crate::langevin::Drift;
use crate::matrix::{gue_tuple, CMat, HermTuple};
use crate::rng::stream_rng;

/// `Ψ_s(H)` with its error contributions reported separately.
#[derive(Clone, Debug)]
pub struct PsiReport {
    pub psi: HermTuple,
    /// Standard error of the Monte Carlo mean in the normalized Hilbert–Schmidt norm.
    pub mc_stderr: f64,
    /// Bound on the part of the time integral beyond `t_max`.
    pub tail_bound: f64,
    pub decay_rate: f64,
    pub dt: f64,
    pub t_max: f64,
    pub trajectories: usize,
    /// `‖Ψ(2·dt) − Ψ(dt)‖` on shared noise, when requested.
    pub discretization_estimate: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct PsiSummary {
    pub mc_stderr: f64,
    pub tail_bound: f64,
    pub decay_rate: f64,
    pub discretization_estimate: Option<f64>,
}

impl PsiReport {
    pub fn summary(&self) -> PsiSummary {
        PsiSummary {
            mc_stderr: self.mc_stderr,
            tail_bound: self.tail_bound,
            decay_rate: self.decay_rate,
            discretization_estimate: self.discretization_estimate,
        }
    }
}

/// Symbolic data for one value of `s`.
pub(crate) struct PsiContext {
    drift: Drift,
    hess: Vec<DerivativePlan>,
    g_dot: Vec<TracePoly>,
    pub(crate) v_dot_zero: bool,
}

impl PsiContext {
    pub(crate) fn new(spec: &TransportSpec, s: f64) -> Self {
        let v_s = spec.v_s(s);
        let drift = Drift::new(&v_s);
        let hess = drift.grads().iter().map(DerivativePlan::new).collect();
        let v_dot = spec.v_dot();
        PsiContext {
            drift,
            hess,
            g_dot: bold_grad_all(&v_dot),
            v_dot_zero: v_dot.is_zero(),
        }
    }

    /// Hessian of `Tr V_s` at the evaluator's point applied to `k`.
    fn hess_apply(&self, ev: &mut Evaluator<'_>, k: &HermTuple) -> HermTuple {
        HermTuple::from_raw(self.hess.iter().map(|p| p.apply_hermitian(ev, k)).collect())
    }

    fn g_dot_at(&self, ev: &mut Evaluator<'_>) -> HermTuple {
        HermTuple::from_raw(self.g_dot.iter().map(|g| ev.eval(g)).collect())
    }
}

/// Stored Euler–Maruyama path `X_0 = H, …, X_K` with step `h`.
pub struct SensitivityPath<'a> {
    ctx: &'a PsiContext,
    h: f64,
    states: Vec<HermTuple>,
    /// Drift products at `states[k]` for `k < K`, consumed by the backward pass.
    caches: Vec<EvalCache>,
}

impl<'a> SensitivityPath<'a> {
    pub(crate) fn run(
        ctx: &'a PsiContext,
        h: f64,
        x0: &HermTuple,
        noise: &[HermTuple],
        sign: f64,
    ) -> Result<Self> {
        let mut states = Vec::with_capacity(noise.len() + 1);
        let mut caches = Vec::with_capacity(noise.len());
        let mut x = x0.clone();
        states.push(x.clone());
        for (k, z) in noise.iter().enumerate() {
            let cache = if sign < 0.0 {
                crate::langevin::sde_step_cached(&ctx.drift, &mut x, h, Some(&z.scaled(-1.0)))
            } else {
                crate::langevin::sde_step_cached(&ctx.drift, &mut x, h, Some(z))
            };
            caches.push(cache);
            crate::langevin::sde_guard(&x, (k + 1) as f64 * h)?;
            states.push(x.clone());
        }
        Ok(SensitivityPath {
            ctx,
            h,
            states,
            caches,
        })
    }

    pub fn steps(&self) -> usize {
        self.states.len() - 1
    }

    pub fn state(&self, k: usize) -> &HermTuple {
        &self.states[k]
    }

    fn step_jacobian(&self, ev: &mut Evaluator<'_>, v: &HermTuple) -> HermTuple {
        let mut out = v.clone();
        out.axpy(-0.5 * self.h, &self.ctx.hess_apply(ev, v));
        out
    }

    /// Forward tangent `J_n[v]` where `J_n = ∂X_n/∂X_0`.
    pub fn tangent(&self, n: usize, v: &HermTuple) -> HermTuple {
        let mut out = v.clone();
        for k in 0..n {
            let mut ev = Evaluator::new(&self.states[k]);
            out = self.step_jacobian(&mut ev, &out);
        }
        out
    }

    /// Adjoint `J_n^*[g]` for the real inner product `Σ Re Tr(AB)`.
    pub fn adjoint(&self, n: usize, g: &HermTuple) -> HermTuple {
        let mut out = g.clone();
        for k in (0..n).rev() {
            let mut ev = Evaluator::new(&self.states[k]);
            out = self.step_jacobian(&mut ev, &out);
        }
        out
    }

    /// `Σ_k w_k J_k^*[𝔻V̇(X_k)]` with trapezoid weights, and `max_k ‖𝔻V̇(X_k)‖`.
    fn integrated_sensitivity(&mut self) -> (HermTuple, f64) {
        let kmax = self.steps();
        let x0 = &self.states[0];
        let mut lam = HermTuple::zeros(x0.n(), x0.d());
        let mut gmax = 0.0f64;
        for k in (0..=kmax).rev() {
            let cache = self.caches.get_mut(k).map(std::mem::take).unwrap_or_default();
            let mut ev = Evaluator::with_cache(&self.states[k], cache);
            if k < kmax {
                lam = self.step_jacobian(&mut ev, &lam);
            }
            let g = self.ctx.g_dot_at(&mut ev);
            gmax = gmax.max(g.norm_normalized());
            let w = if k == 0 || k == kmax {
                0.5 * self.h
            } else {
                self.h
            };
            lam.axpy(w, &g);
        }
        (lam, gmax)
    }
}

const TAG_PSI: u64 = 0x5053_49;

fn conjugate_all(noise: Vec<HermTuple>, u: Option<&CMat>) -> Vec<HermTuple> {
    match u {
        None => noise,
        Some(u) => noise.into_iter().map(|z| z.conjugate(u)).collect(),
    }
}

/// Coarsens normalized increments by pairing: `(G_{2k} + G_{2k+1})/√2`.
fn coarsen(noise: &[HermTuple]) -> Vec<HermTuple> {
    noise
        .chunks(2)
        .filter(|c| c.len() == 2)
        .map(|c| c[0].add(&c[1]).scaled(std::f64::consts::FRAC_1_SQRT_2))
        .collect()
}

/// Monte Carlo estimate of `Ψ_s(H) = −½ ∫₀^∞ E[𝔻(V̇∘X_t^s)(H)] dt`.
pub fn psi_estimate(spec: &TransportSpec, s: f64, h: &HermTuple, seed: u64) -> Result<PsiReport> {
    psi_estimate_with_unitary(spec, s, h, seed, None)
}

/// As [`psi_estimate`], with every noise increment conjugated by `u` (replay checks).
pub fn psi_estimate_with_unitary(
    spec: &TransportSpec,
    s: f64,
    h: &HermTuple,
    seed: u64,
    u: Option<&CMat>,
) -> Result<PsiReport> {
    spec.validate()?;
    let ctx = PsiContext::new(spec, s);
    psi_with_context(spec, &ctx, h, seed, u)
}

pub(crate) fn psi_with_context(
    spec: &TransportSpec,
    ctx: &PsiContext,
    x0: &HermTuple,
    seed: u64,
    u: Option<&CMat>,
) -> Result<PsiReport> {
    if x0.d() != spec.d() {
        return Err(Error::ShapeMismatch(
            "H does not match the potential".into(),
        ));
    }
    let steps = (spec.t_max / spec.dt).round().max(1.0) as usize;
    let (n, d) = (x0.n(), x0.d());
    let groups = if spec.antithetic {
        spec.m_psi.div_ceil(2)
    } else {
        spec.m_psi
    };
    let per_group = if spec.antithetic { 2 } else { 1 };
    let trajectories = groups * per_group;
    if ctx.v_dot_zero {
        return Ok(PsiReport {
            psi: HermTuple::zeros(n, d),
            mc_stderr: 0.0,
            tail_bound: 0.0,
            // the integrand vanishes identically
            decay_rate: f64::INFINITY,
            dt: spec.dt,
            t_max: spec.t_max,
            trajectories,
            discretization_estimate: spec.discretization_check.then_some(0.0),
        });
    }
    let rate = spec.decay_rate()?;
    let signs: &[f64] = if spec.antithetic {
        &[1.0, -1.0]
    } else {
        &[1.0]
    };
    // per group: (mean Λ at dt, mean Λ at 2dt, mean gmax)
    let results: Vec<(HermTuple, Option<HermTuple>, f64)> = (0..groups as u64)
        .into_par_iter()
        .map(|j| {
            let mut rng = stream_rng(seed, &[TAG_PSI, j]);
            let noise: Vec<HermTuple> =
                (0..steps).map(|_| gue_tuple(&mut rng, n, d, 1.0)).collect();
            let noise = conjugate_all(noise, u);
            let coarse = spec.discretization_check.then(|| coarsen(&noise));
            let mut lam = HermTuple::zeros(n, d);
            let mut lam2 = coarse.as_ref().map(|_| HermTuple::zeros(n, d));
            let mut gbar = 0.0;
            for &sg in signs {
                let mut path = SensitivityPath::run(ctx, spec.dt, x0, &noise, sg)?;
                let (l, g) = path.integrated_sensitivity();
                lam.axpy(1.0 / signs.len() as f64, &l);
                gbar += g / signs.len() as f64;
                if let (Some(c), Some(l2)) = (&coarse, lam2.as_mut()) {
                    let mut p2 = SensitivityPath::run(ctx, 2.0 * spec.dt, x0, c, sg)?;
                    l2.axpy(1.0 / signs.len() as f64, &p2.integrated_sensitivity().0);
                }
            }
            Ok((lam, lam2, gbar))
        })
        .collect::<Result<_>>()?;

    let m = results.len() as f64;
    let mut mean = HermTuple::zeros(n, d);
    for (l, _, _) in &results {
        mean.axpy(1.0 / m, l);
    }
    let mc_stderr = if results.len() > 1 {
        let ss: f64 = results
            .iter()
            .map(|(l, _, _)| l.sub(&mean).norm_normalized().powi(2))
            .sum();
        0.5 * (ss / (m * (m - 1.0))).sqrt()
    } else {
        f64::NAN
    };
    let gbar = results.iter().map(|r| r.2).sum::<f64>() / m;
    let discretization_estimate = spec.discretization_check.then(|| {
        let mut mean2 = HermTuple::zeros(n, d);
        for (_, l2, _) in &results {
            mean2.axpy(1.0 / m, l2.as_ref().unwrap());
        }
        0.5 * mean2.sub(&mean).norm_normalized()
    });
    Ok(PsiReport {
        psi: mean.scaled(-0.5),
        mc_stderr,
        tail_bound: 0.5 * gbar * (-rate * spec.t_max).exp() / rate,
        decay_rate: rate,
        dt: spec.dt,
        t_max: spec.t_max,
        trajectories,
        discretization_estimate,
    })
}

/// Runs one stored path of `steps` Euler steps from `x0` and hands it to `f`.
pub fn with_sensitivity_path(
    spec: &TransportSpec,
    s: f64,
    x0: &HermTuple,
    steps: usize,
    seed: u64,
    f: impl FnOnce(&SensitivityPath<'_>),
) -> Result<()> {
    let ctx = PsiContext::new(spec, s);
    let mut rng = stream_rng(seed, &[TAG_PSI]);
    let noise: Vec<HermTuple> = (0..steps)
        .map(|_| gue_tuple(&mut rng, x0.n(), x0.d(), 1.0))
        .collect();
    let path = SensitivityPath::run(&ctx, spec.dt, x0, &noise, 1.0)?;
    f(&path);
    Ok(())
}
