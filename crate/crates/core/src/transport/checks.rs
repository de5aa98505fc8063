use rayon::prelude::*;
use serde::Serialize;

use super::flow::flow_transport_report;
use super::TransportSpec;
use crate::algebra::{eval, Evaluator, TracePoly};
use crate::error::{Error, Result};
use crate::langevin::{estimate_observables, sample_model, ModelSpec, SdeParams};
use crate::matrix::{gue_tuple, spectral_norm, tr_n, HermTuple};
use crate::rng::{stream_rng, stream_seed};
use crate::stats::{mean_stderr, median, z_score, Estimate};

const TAG_PUSH: u64 = 0x5055_5348;
const TAG_DIRECT: u64 = 0x4449_52;
const TAG_STRONG: u64 = 0x5354_524f;

#[derive(Clone, Debug, Serialize)]
pub struct ObservableComparison {
    pub observable: String,
    pub pushforward: Estimate,
    pub direct: Estimate,
    pub z: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct PushforwardReport {
    #[serde(rename = "N")]
    pub n: usize,
    pub comparisons: Vec<ObservableComparison>,
    /// Largest Monte Carlo noise accumulated in a single transported sample.
    pub max_flow_stderr: f64,
    /// Largest accumulated truncation bound over the transported samples.
    pub max_flow_tail: f64,
}

impl PushforwardReport {
    pub fn max_abs_z(&self) -> f64 {
        self.comparisons
            .iter()
            .map(|c| c.z.abs())
            .fold(0.0, f64::max)
    }
}

/// Compares `tr_N f` under the transported GUE against direct Langevin sampling of `V₁`.
pub fn pushforward_check(
    spec: &TransportSpec,
    n: usize,
    observables: &[TracePoly],
    m_push: usize,
    direct: &SdeParams,
    seed: u64,
) -> Result<PushforwardReport> {
    spec.validate()?;
    if m_push < 2 {
        return Err(Error::InvalidParameter(
            "need at least two transported samples".into(),
        ));
    }
    let d = spec.d();
    if let Some(f) = observables.iter().find(|f| f.nvars() != d) {
        return Err(Error::AlphabetMismatch(d, f.nvars()));
    }
    let pushed: Vec<(Vec<f64>, f64, f64)> = (0..m_push as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, &[TAG_PUSH, n as u64, i]);
            let h = gue_tuple(&mut rng, n, d, 1.0);
            let rep = flow_transport_report(spec, &h, stream_seed(seed, &[TAG_PUSH, 1, i]))?;
            let mut ev = Evaluator::new(&rep.map);
            let vals = observables.iter().map(|f| tr_n(&ev.eval(f)).re).collect();
            Ok((vals, rep.accumulated_stderr, rep.accumulated_tail))
        })
        .collect::<Result<_>>()?;
    let model = ModelSpec::new(n, spec.v1.clone())?.with_override(spec.rate_override.is_some());
    let mut params = direct.clone();
    params.seed = stream_seed(seed, &[TAG_DIRECT, direct.seed]);
    let direct_est = estimate_observables(&model, &params, observables)?;
    let comparisons = observables
        .iter()
        .enumerate()
        .map(|(j, f)| {
            let vals: Vec<f64> = pushed.iter().map(|p| p.0[j]).collect();
            let (mean, stderr) = mean_stderr(&vals);
            let push = Estimate {
                observable: f.to_string(),
                n,
                mean,
                stderr,
                m: m_push,
            };
            let dir = direct_est[j].clone();
            ObservableComparison {
                observable: f.to_string(),
                z: z_score(push.mean, push.stderr, dir.mean, dir.stderr),
                pushforward: push,
                direct: dir,
            }
        })
        .collect();
    Ok(PushforwardReport {
        n,
        comparisons,
        max_flow_stderr: pushed.iter().map(|p| p.1).fold(0.0, f64::max),
        max_flow_tail: pushed.iter().map(|p| p.2).fold(0.0, f64::max),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct StrongConvRow {
    #[serde(rename = "N")]
    pub n: usize,
    pub samples: usize,
    pub mean: f64,
    pub median: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct StrongConvReport {
    pub rows: Vec<StrongConvRow>,
    /// Successive differences of the medians.
    pub differences: Vec<f64>,
    pub monotone: bool,
    pub differences_decreasing: bool,
}

/// Operator norms `‖P(Y^N)‖` over samples of the model for each `N` in the grid.
///
/// Gaussian models are sampled directly; others by Langevin with `params`
/// (`trajectories × samples_per_trajectory` samples per `N`).
pub fn strong_conv_scan(
    p: &TracePoly,
    potential: &TracePoly,
    n_grid: &[usize],
    params: &SdeParams,
    seed: u64,
) -> Result<StrongConvReport> {
    if !p.is_self_adjoint(1e-12) {
        return Err(Error::NotSelfAdjoint(p.to_string()));
    }
    if p.nvars() != potential.nvars() {
        return Err(Error::AlphabetMismatch(potential.nvars(), p.nvars()));
    }
    let d = p.nvars();
    let mut rows = Vec::new();
    for &n in n_grid {
        let model = ModelSpec::new(n, potential.clone())?;
        let total = params.trajectories * params.samples_per_trajectory;
        let norms: Vec<f64> = if model.is_gaussian() {
            (0..total as u64)
                .into_par_iter()
                .map(|i| {
                    let mut rng = stream_rng(seed, &[TAG_STRONG, n as u64, i]);
                    let y = gue_tuple(&mut rng, n, d, 1.0);
                    spectral_norm(&eval(p, &y).expect("shape checked"))
                })
                .collect()
        } else {
            let mut prm = params.clone();
            prm.seed = stream_seed(seed, &[TAG_STRONG, params.seed]);
            let samples: Vec<HermTuple> =
                sample_model(&model, &prm)?.into_iter().flatten().collect();
            samples
                .par_iter()
                .map(|y| spectral_norm(&eval(p, y).expect("shape checked")))
                .collect()
        };
        let (mean, _) = mean_stderr(&norms);
        rows.push(StrongConvRow {
            n,
            samples: norms.len(),
            mean,
            median: median(&norms),
            min: norms.iter().copied().fold(f64::INFINITY, f64::min),
            max: norms.iter().copied().fold(0.0, f64::max),
        });
    }
    let differences: Vec<f64> = rows.windows(2).map(|w| w[1].median - w[0].median).collect();
    let monotone = differences.iter().all(|&x| x >= 0.0) || differences.iter().all(|&x| x <= 0.0);
    let differences_decreasing = differences.windows(2).all(|w| w[1].abs() < w[0].abs());
    Ok(StrongConvReport {
        rows,
        differences,
        monotone,
        differences_decreasing,
    })
}
