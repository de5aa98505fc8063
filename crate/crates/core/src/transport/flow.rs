use serde::Serialize;

use super::psi::{psi_with_context, PsiContext, PsiSummary};
use super::{FlowMethod, TransportSpec};
use crate::error::{Error, Result};
use crate::matrix::{CMat, HermTuple};
use crate::rng::stream_seed;

const TAG_FLOW: u64 = 0x464c_4f57;

#[derive(Clone, Debug)]
pub struct FlowReport {
    pub map: HermTuple,
    /// One entry per `Ψ` evaluation, in order.
    pub stages: Vec<PsiSummary>,
    /// `sqrt(Σ (Δs·stderr)²)`: Monte Carlo noise accumulated in the map.
    pub accumulated_stderr: f64,
    /// `Σ Δs·tail_bound` over the flow.
    pub accumulated_tail: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct FlowSummary {
    pub accumulated_stderr: f64,
    pub accumulated_tail: f64,
    pub stages: usize,
}

impl FlowReport {
    pub fn summary(&self) -> FlowSummary {
        FlowSummary {
            accumulated_stderr: self.accumulated_stderr,
            accumulated_tail: self.accumulated_tail,
            stages: self.stages.len(),
        }
    }
}

/// `T¹(H)` for the flow `Ṫ_s = Ψ_s(T_s)`, `T_0 = id`.
pub fn flow_transport(spec: &TransportSpec, h: &HermTuple, seed: u64) -> Result<HermTuple> {
    Ok(flow_transport_report(spec, h, seed)?.map)
}

pub fn flow_transport_report(spec: &TransportSpec, h: &HermTuple, seed: u64) -> Result<FlowReport> {
    flow_inner(spec, h, seed, None)
}

/// Flow with every noise increment conjugated by `u`, for equivariance replay.
pub fn flow_transport_with_unitary(
    spec: &TransportSpec,
    h: &HermTuple,
    seed: u64,
    u: &CMat,
) -> Result<FlowReport> {
    flow_inner(spec, h, seed, Some(u))
}

fn flow_inner(
    spec: &TransportSpec,
    h: &HermTuple,
    seed: u64,
    u: Option<&CMat>,
) -> Result<FlowReport> {
    spec.validate()?;
    if h.d() != spec.d() {
        return Err(Error::ShapeMismatch(
            "H does not match the potential".into(),
        ));
    }
    let mut t = h.clone();
    let mut stages = Vec::new();
    let mut var = 0.0;
    let mut tail = 0.0;
    if spec.v_dot().is_zero() {
        return Ok(FlowReport {
            map: t,
            stages,
            accumulated_stderr: 0.0,
            accumulated_tail: 0.0,
        });
    }
    for (k, w) in spec.s_grid.windows(2).enumerate() {
        let (s0, s1) = (w[0], w[1]);
        let ds = s1 - s0;
        // both stages of one step share the noise seed
        let step_seed = stream_seed(seed, &[TAG_FLOW, k as u64]);
        let ctx0 = PsiContext::new(spec, s0);
        let p0 = psi_with_context(spec, &ctx0, &t, step_seed, u)?;
        match spec.method {
            FlowMethod::Euler => {
                t.axpy(ds, &p0.psi);
                var += (ds * p0.mc_stderr).powi(2);
                tail += ds * p0.tail_bound;
                stages.push(p0.summary());
            }
            FlowMethod::Heun => {
                let mut pred = t.clone();
                pred.axpy(ds, &p0.psi);
                let ctx1 = PsiContext::new(spec, s1);
                let p1 = psi_with_context(spec, &ctx1, &pred, step_seed, u)?;
                t.axpy(0.5 * ds, &p0.psi);
                t.axpy(0.5 * ds, &p1.psi);
                var += (0.5 * ds * (p0.mc_stderr + p1.mc_stderr)).powi(2);
                tail += 0.5 * ds * (p0.tail_bound + p1.tail_bound);
                stages.push(p0.summary());
                stages.push(p1.summary());
            }
        }
        t.symmetrize();
    }
    Ok(FlowReport {
        map: t,
        stages,
        accumulated_stderr: var.sqrt(),
        accumulated_tail: tail,
    })
}
