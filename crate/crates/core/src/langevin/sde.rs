use ndarray::Zip;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebra::{
    bold_grad_all, convexity_certificate, quadratic, regularity_check, EvalCache, Evaluator,
    RegularityReport, TracePoly,
};
use crate::error::{Error, Result};
use crate::matrix::{gue_tuple, tr_n, HermTuple};
use crate::rng::{stream_rng, Rng};
use crate::stats::{mean_stderr, Estimate};

/// Almost-sure bound used for the GUE operator norm, with margin for small `N`.
pub const GUE_NORM_CONSTANT: f64 = 3.0;
/// Trajectories whose normalized Hilbert–Schmidt norm exceeds this abort.
pub const DIVERGENCE_THRESHOLD: f64 = 10.0 * (GUE_NORM_CONSTANT + 1.0);

const TAG_LANGEVIN: u64 = 0x4c41_4e47;
const TAG_GUE: u64 = 0x4755_45;

/// Multimatrix model `e^{-N Tr V}` with `V = ½ΣX² + W`.
#[derive(Clone, Debug)]
pub struct ModelSpec {
    pub n: usize,
    pub potential: TracePoly,
    pub w: TracePoly,
    pub regularity: RegularityReport,
    pub convex: bool,
    pub override_check: bool,
}

impl ModelSpec {
    pub const DEFAULT_RADIUS: f64 = 4.0;

    pub fn new(n: usize, potential: TracePoly) -> Result<Self> {
        Self::with_radius(n, potential, Self::DEFAULT_RADIUS, 0)
    }

    pub fn with_radius(n: usize, potential: TracePoly, radius: f64, k: u32) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("N must be positive".into()));
        }
        if !potential.is_self_adjoint(1e-12) {
            return Err(Error::NotSelfAdjoint(potential.to_string()));
        }
        let w = &potential - &quadratic(potential.nvars());
        let regularity = regularity_check(&w, radius, k)?;
        let convex = convexity_certificate(&w);
        Ok(ModelSpec {
            n,
            potential,
            w,
            regularity,
            convex,
            override_check: false,
        })
    }

    pub fn d(&self) -> usize {
        self.potential.nvars()
    }

    pub fn with_override(mut self, on: bool) -> Self {
        self.override_check = on;
        self
    }

    /// Regularity passed, convexity certified, or explicitly overridden.
    pub fn admissible(&self) -> bool {
        self.regularity.passes || self.convex || self.override_check
    }

    fn require_admissible(&self) -> Result<()> {
        if self.admissible() {
            Ok(())
        } else {
            Err(Error::NoDecay(format!(
                "W = {} has kappa_R = {} at R = {} and no convexity certificate",
                self.w, self.regularity.kappa_r, self.regularity.radius
            )))
        }
    }

    pub fn is_gaussian(&self) -> bool {
        self.w.is_zero()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SdeParams {
    pub h: f64,
    pub t_burn: f64,
    pub thin: f64,
    pub trajectories: usize,
    #[serde(default = "one")]
    pub samples_per_trajectory: usize,
    pub seed: u64,
}

fn one() -> usize {
    1
}

impl Default for SdeParams {
    fn default() -> Self {
        SdeParams {
            h: 0.01,
            t_burn: 20.0,
            thin: 2.0,
            trajectories: 100,
            samples_per_trajectory: 1,
            seed: 0,
        }
    }
}

impl SdeParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.h > 0.0) || !(self.t_burn >= 0.0) || !(self.thin > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "need h > 0, T_burn >= 0, thin > 0 (got {}, {}, {})",
                self.h, self.t_burn, self.thin
            )));
        }
        if self.trajectories == 0 || self.samples_per_trajectory == 0 {
            return Err(Error::InvalidParameter("M and samples per trajectory must be >= 1".into()));
        }
        Ok(())
    }

    pub fn burn_steps(&self) -> usize {
        (self.t_burn / self.h).round() as usize
    }

    pub fn thin_steps(&self) -> usize {
        ((self.thin / self.h).round() as usize).max(1)
    }
}

/// Precomputed `𝔻_p V` for every component.
#[derive(Clone, Debug)]
pub struct Drift {
    grads: Vec<TracePoly>,
}

impl Drift {
    pub fn new(v: &TracePoly) -> Self {
        Drift {
            grads: bold_grad_all(v),
        }
    }

    pub fn grads(&self) -> &[TracePoly] {
        &self.grads
    }

    /// `𝔻V(y)` (without the factor `−½`).
    pub fn gradient(&self, y: &HermTuple) -> HermTuple {
        self.gradient_with(&mut Evaluator::new(y))
    }

    /// `𝔻V` at the evaluator's point, leaving its products cached.
    pub fn gradient_with(&self, ev: &mut Evaluator<'_>) -> HermTuple {
        HermTuple::from_raw(self.grads.iter().map(|g| ev.eval(g)).collect())
    }

    /// `−½ 𝔻V(y)`, re-symmetrized.
    pub fn eval(&self, y: &HermTuple) -> HermTuple {
        self.gradient(y).scaled(-0.5)
    }
}

/// `−½ 𝔻V(Y)`.
pub fn drift(v: &TracePoly, y: &HermTuple) -> Result<HermTuple> {
    if v.nvars() != y.d() {
        return Err(Error::ShapeMismatch(format!(
            "potential in {} variables, state with {} matrices",
            v.nvars(),
            y.d()
        )));
    }
    Ok(Drift::new(v).eval(y))
}

/// Source of GUE-normalized increments (before the `√h` factor).
pub trait NoiseSource {
    fn next(&mut self, n: usize, d: usize) -> Option<HermTuple>;
}

pub struct GaussianNoise(pub Rng);

impl NoiseSource for GaussianNoise {
    fn next(&mut self, n: usize, d: usize) -> Option<HermTuple> {
        Some(gue_tuple(&mut self.0, n, d, 1.0))
    }
}

/// No noise: the deterministic gradient flow.
pub struct ZeroNoise;

impl NoiseSource for ZeroNoise {
    fn next(&mut self, _n: usize, _d: usize) -> Option<HermTuple> {
        None
    }
}

/// One Euler–Maruyama step `Y ← Y − (h/2)𝔻V(Y) + √h G`.
pub(crate) fn em_step(drift: &Drift, y: &mut HermTuple, h: f64, noise: Option<&HermTuple>) {
    let g = drift.gradient(y);
    apply_step(y, &g, h, noise);
}

/// As [`em_step`], returning the evaluator cache built at the pre-step state.
pub(crate) fn em_step_cached(
    drift: &Drift,
    y: &mut HermTuple,
    h: f64,
    noise: Option<&HermTuple>,
) -> EvalCache {
    let mut ev = Evaluator::new(y);
    let g = drift.gradient_with(&mut ev);
    let cache = ev.into_cache();
    apply_step(y, &g, h, noise);
    cache
}

fn apply_step(y: &mut HermTuple, g: &HermTuple, h: f64, noise: Option<&HermTuple>) {
    let sq = h.sqrt();
    let mats = y.mats_mut();
    for (p, m) in mats.iter_mut().enumerate() {
        let gp = g.get(p);
        match (m.as_slice_mut(), gp.as_slice(), noise.map(|z| z.get(p).as_slice())) {
            (Some(a), Some(b), Some(Some(c))) => {
                for ((a, &b), &c) in a.iter_mut().zip(b).zip(c) {
                    *a += b * (-0.5 * h) + c * sq;
                }
            }
            (Some(a), Some(b), None) => {
                for (a, &b) in a.iter_mut().zip(b) {
                    *a += b * (-0.5 * h);
                }
            }
            _ => match noise {
                Some(z) => Zip::from(&mut *m).and(gp).and(z.get(p)).for_each(|a, &b, &c| {
                    *a += b * (-0.5 * h) + c * sq;
                }),
                None => Zip::from(&mut *m).and(gp).for_each(|a, &b| {
                    *a += b * (-0.5 * h);
                }),
            },
        }
    }
    y.symmetrize();
}

pub(crate) fn guard(y: &HermTuple, t: f64) -> Result<()> {
    let nrm = y.norm_normalized();
    if !nrm.is_finite() || nrm > DIVERGENCE_THRESHOLD {
        return Err(Error::Divergence(format!(
            "normalized norm {nrm:.3e} at t = {t:.3} exceeds {DIVERGENCE_THRESHOLD}"
        )));
    }
    Ok(())
}

/// Integrates from `y0` with the given increments and records the state at the requested times.
pub fn integrate_with_noise<S: NoiseSource>(
    spec: &ModelSpec,
    y0: &HermTuple,
    h: f64,
    record: &[f64],
    noise: &mut S,
) -> Result<Vec<HermTuple>> {
    spec.require_admissible()?;
    if y0.n() != spec.n || y0.d() != spec.d() {
        return Err(Error::ShapeMismatch("initial state does not match the model".into()));
    }
    if !(h > 0.0) {
        return Err(Error::InvalidParameter("h must be positive".into()));
    }
    let drift = Drift::new(&spec.potential);
    let mut steps: Vec<usize> = record.iter().map(|t| (t / h).round() as usize).collect();
    steps.sort_unstable();
    let mut out = Vec::with_capacity(steps.len());
    let mut y = y0.clone();
    let mut k = 0usize;
    for &target in &steps {
        while k < target {
            let z = noise.next(spec.n, spec.d());
            em_step(&drift, &mut y, h, z.as_ref());
            k += 1;
            guard(&y, k as f64 * h)?;
        }
        out.push(y.clone());
    }
    Ok(out)
}

/// Euler–Maruyama trajectory with GUE increments drawn from `params.seed`.
pub fn integrate(
    spec: &ModelSpec,
    y0: &HermTuple,
    params: &SdeParams,
    record: &[f64],
) -> Result<Vec<HermTuple>> {
    params.validate()?;
    let mut noise = GaussianNoise(stream_rng(params.seed, &[TAG_LANGEVIN]));
    integrate_with_noise(spec, y0, params.h, record, &mut noise)
}

/// Runs one trajectory from zero and calls `visit` on every retained sample.
fn run_trajectory<F: FnMut(&HermTuple)>(
    spec: &ModelSpec,
    drift: &Drift,
    params: &SdeParams,
    index: u64,
    mut visit: F,
) -> Result<()> {
    let mut rng = stream_rng(params.seed, &[TAG_LANGEVIN, spec.n as u64, index]);
    let mut y = HermTuple::zeros(spec.n, spec.d());
    let h = params.h;
    let mut k = 0usize;
    let mut advance = |y: &mut HermTuple, steps: usize, k: &mut usize| -> Result<()> {
        for _ in 0..steps {
            let z = gue_tuple(&mut rng, spec.n, spec.d(), 1.0);
            em_step(drift, y, h, Some(&z));
            *k += 1;
            guard(y, *k as f64 * h)?;
        }
        Ok(())
    };
    advance(&mut y, params.burn_steps(), &mut k)?;
    for s in 0..params.samples_per_trajectory {
        if s > 0 {
            advance(&mut y, params.thin_steps(), &mut k)?;
        }
        visit(&y);
    }
    Ok(())
}

/// Stationary samples: `trajectories × samples_per_trajectory` states after burn-in and thinning.
pub fn sample_model(spec: &ModelSpec, params: &SdeParams) -> Result<Vec<Vec<HermTuple>>> {
    params.validate()?;
    spec.require_admissible()?;
    let drift = Drift::new(&spec.potential);
    (0..params.trajectories as u64)
        .into_par_iter()
        .map(|m| {
            let mut v = Vec::with_capacity(params.samples_per_trajectory);
            run_trajectory(spec, &drift, params, m, |y| v.push(y.clone()))?;
            Ok(v)
        })
        .collect()
}

fn observable_values(obs: &[TracePoly], y: &HermTuple) -> Vec<f64> {
    let mut ev = Evaluator::new(y);
    obs.iter().map(|f| tr_n(&ev.eval(f)).re).collect()
}

fn reduce(names: &[String], n: usize, per_traj: Vec<Vec<f64>>) -> Vec<Estimate> {
    (0..names.len())
        .map(|j| {
            let vals: Vec<f64> = per_traj.iter().map(|v| v[j]).collect();
            let (mean, stderr) = mean_stderr(&vals);
            Estimate {
                observable: names[j].clone(),
                n,
                mean,
                stderr,
                m: vals.len(),
            }
        })
        .collect()
}

/// Estimates `E[tr_N f(Y)]` under the model; errors are computed across trajectories.
pub fn estimate_observables(
    spec: &ModelSpec,
    params: &SdeParams,
    observables: &[TracePoly],
) -> Result<Vec<Estimate>> {
    params.validate()?;
    spec.require_admissible()?;
    check_observables(spec.d(), observables)?;
    let drift = Drift::new(&spec.potential);
    let per_traj: Vec<Vec<f64>> = (0..params.trajectories as u64)
        .into_par_iter()
        .map(|m| {
            let mut acc = vec![0.0; observables.len()];
            run_trajectory(spec, &drift, params, m, |y| {
                for (a, v) in acc.iter_mut().zip(observable_values(observables, y)) {
                    *a += v;
                }
            })?;
            let s = params.samples_per_trajectory as f64;
            Ok(acc.into_iter().map(|a| a / s).collect())
        })
        .collect::<Result<_>>()?;
    let names: Vec<String> = observables.iter().map(|f| f.to_string()).collect();
    Ok(reduce(&names, spec.n, per_traj))
}

/// Direct GUE sampling: `samples` independent draws at dimension `n`.
pub fn estimate_gue(
    n: usize,
    d: usize,
    samples: usize,
    seed: u64,
    observables: &[TracePoly],
) -> Result<Vec<Estimate>> {
    if samples == 0 || n == 0 {
        return Err(Error::InvalidParameter("need N >= 1 and at least one sample".into()));
    }
    check_observables(d, observables)?;
    let per: Vec<Vec<f64>> = (0..samples as u64)
        .into_par_iter()
        .map(|m| {
            let mut rng = stream_rng(seed, &[TAG_GUE, n as u64, m]);
            observable_values(observables, &gue_tuple(&mut rng, n, d, 1.0))
        })
        .collect();
    let names: Vec<String> = observables.iter().map(|f| f.to_string()).collect();
    Ok(reduce(&names, n, per))
}

fn check_observables(d: usize, obs: &[TracePoly]) -> Result<()> {
    if let Some(f) = obs.iter().find(|f| f.nvars() != d) {
        return Err(Error::AlphabetMismatch(d, f.nvars()));
    }
    Ok(())
}

/// Estimates at step sizes `h, h/2, …, h/2^(levels-1)` driven by one Brownian path per trajectory.
#[derive(Clone, Debug, Serialize)]
pub struct StepStudy {
    pub steps: Vec<f64>,
    /// `estimates[l][j]` for level `l` and observable `j`.
    pub estimates: Vec<Vec<Estimate>>,
    /// `differences[l][j]`: mean and standard error of `est(h_l) − est(h_{l+1})`.
    pub differences: Vec<Vec<(f64, f64)>>,
    /// `2·est(h_last) − est(h_{last−1})`, first-order Richardson extrapolation.
    pub extrapolated: Vec<(f64, f64)>,
}

impl StepStudy {
    /// Ratio of successive differences; near 2 for a first-order bias.
    pub fn difference_ratio(&self, j: usize) -> Option<f64> {
        (self.differences.len() >= 2).then(|| self.differences[0][j].0 / self.differences[1][j].0)
    }
}

pub fn coupled_step_study(
    spec: &ModelSpec,
    params: &SdeParams,
    levels: usize,
    observables: &[TracePoly],
) -> Result<StepStudy> {
    params.validate()?;
    spec.require_admissible()?;
    check_observables(spec.d(), observables)?;
    if levels < 2 {
        return Err(Error::InvalidParameter("a step study needs at least two levels".into()));
    }
    let drift = Drift::new(&spec.potential);
    let fine = 1usize << (levels - 1);
    let h_fine = params.h / fine as f64;
    let (n, d) = (spec.n, spec.d());
    let nobs = observables.len();
    // per trajectory: values[level][obs]
    let per_traj: Vec<Vec<Vec<f64>>> = (0..params.trajectories as u64)
        .into_par_iter()
        .map(|m| {
            let mut rng = stream_rng(params.seed, &[TAG_LANGEVIN, 0x5354_4550, n as u64, m]);
            let mut ys: Vec<HermTuple> = (0..levels).map(|_| HermTuple::zeros(n, d)).collect();
            let mut acc: Vec<HermTuple> = (0..levels).map(|_| HermTuple::zeros(n, d)).collect();
            let mut vals = vec![vec![0.0; nobs]; levels];
            let mut coarse_steps = 0usize;
            let advance = |ys: &mut Vec<HermTuple>,
                               acc: &mut Vec<HermTuple>,
                               rng: &mut Rng,
                               coarse: usize,
                               done: &mut usize|
             -> Result<()> {
                for _ in 0..coarse {
                    for j in 0..fine {
                        let z = gue_tuple(rng, n, d, 1.0);
                        for l in 0..levels {
                            acc[l].axpy(h_fine.sqrt(), &z);
                            let block = fine >> l;
                            if (j + 1) % block == 0 {
                                let hl = params.h / (1usize << l) as f64;
                                let g = acc[l].scaled(1.0 / hl.sqrt());
                                em_step(&drift, &mut ys[l], hl, Some(&g));
                                acc[l] = HermTuple::zeros(n, d);
                            }
                        }
                    }
                    *done += 1;
                    for y in ys.iter() {
                        guard(y, *done as f64 * params.h)?;
                    }
                }
                Ok(())
            };
            advance(&mut ys, &mut acc, &mut rng, params.burn_steps(), &mut coarse_steps)?;
            for s in 0..params.samples_per_trajectory {
                if s > 0 {
                    advance(&mut ys, &mut acc, &mut rng, params.thin_steps(), &mut coarse_steps)?;
                }
                for l in 0..levels {
                    for (a, v) in vals[l].iter_mut().zip(observable_values(observables, &ys[l])) {
                        *a += v / params.samples_per_trajectory as f64;
                    }
                }
            }
            Ok(vals)
        })
        .collect::<Result<_>>()?;
    let names: Vec<String> = observables.iter().map(|f| f.to_string()).collect();
    let estimates: Vec<Vec<Estimate>> = (0..levels)
        .map(|l| reduce(&names, n, per_traj.iter().map(|v| v[l].clone()).collect()))
        .collect();
    let differences = (0..levels - 1)
        .map(|l| {
            (0..nobs)
                .map(|j| {
                    let d: Vec<f64> = per_traj.iter().map(|v| v[l][j] - v[l + 1][j]).collect();
                    mean_stderr(&d)
                })
                .collect()
        })
        .collect();
    let extrapolated = (0..nobs)
        .map(|j| {
            let e: Vec<f64> = per_traj
                .iter()
                .map(|v| 2.0 * v[levels - 1][j] - v[levels - 2][j])
                .collect();
            mean_stderr(&e)
        })
        .collect();
    Ok(StepStudy {
        steps: (0..levels).map(|l| params.h / (1usize << l) as f64).collect(),
        estimates,
        differences,
        extrapolated,
    })
}
