//! Transport maps from the GUE to a multimatrix model by integrating `Ṫ = Ψ_s(T)`.

mod checks;
mod flow;
mod psi;

pub use checks::{
    pushforward_check, strong_conv_scan, ObservableComparison, PushforwardReport, StrongConvReport,
    StrongConvRow,
};
pub use flow::{
    flow_transport, flow_transport_report, flow_transport_with_unitary, FlowReport, FlowSummary,
};
pub use psi::{
    psi_estimate, psi_estimate_with_unitary, with_sensitivity_path, PsiReport, PsiSummary,
    SensitivityPath,
};

use serde::{Deserialize, Serialize};

use crate::algebra::{convexity_certificate, kappa, quadratic, TracePoly};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum FlowMethod {
    Euler,
    #[default]
    Heun,
}

/// Interpolation `V_s = (1−s)V₀ + sV₁` and the numerical parameters for `Ψ_s` and the flow.
#[derive(Clone, Debug)]
pub struct TransportSpec {
    pub v0: TracePoly,
    pub v1: TracePoly,
    pub s_grid: Vec<f64>,
    pub m_psi: usize,
    pub t_max: f64,
    pub dt: f64,
    pub method: FlowMethod,
    pub antithetic: bool,
    pub radius: f64,
    /// Decay rate used when neither the regularity bound nor convexity gives one.
    pub rate_override: Option<f64>,
    /// Also run each trajectory at `2·dt` on the same noise to estimate the step bias.
    pub discretization_check: bool,
}

/// Truncation level for the default time horizon.
pub const DEFAULT_EPS: f64 = 1e-6;

impl TransportSpec {
    /// `V₀ = ½ΣX²` and a uniform grid of `s_steps` steps.
    pub fn from_gaussian(v1: TracePoly, s_steps: usize) -> Result<Self> {
        let v0 = quadratic(v1.nvars());
        Self::new(v0, v1, s_steps)
    }

    pub fn new(v0: TracePoly, v1: TracePoly, s_steps: usize) -> Result<Self> {
        if s_steps == 0 {
            return Err(Error::InvalidParameter("s_steps must be >= 1".into()));
        }
        let grid = (0..=s_steps).map(|k| k as f64 / s_steps as f64).collect();
        let mut spec = TransportSpec {
            v0,
            v1,
            s_grid: grid,
            m_psi: 64,
            t_max: 0.0,
            dt: 0.05,
            method: FlowMethod::Heun,
            antithetic: true,
            radius: 4.0,
            rate_override: None,
            discretization_check: false,
        };
        spec.validate_potentials()?;
        spec.t_max = spec.default_t_max();
        Ok(spec)
    }

    fn validate_potentials(&self) -> Result<()> {
        if self.v0.nvars() != self.v1.nvars() {
            return Err(Error::AlphabetMismatch(self.v0.nvars(), self.v1.nvars()));
        }
        for v in [&self.v0, &self.v1] {
            if !v.is_self_adjoint(1e-12) {
                return Err(Error::NotSelfAdjoint(v.to_string()));
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_potentials()?;
        let g = &self.s_grid;
        if g.len() < 2
            || g[0] != 0.0
            || *g.last().unwrap() != 1.0
            || g.windows(2).any(|w| w[1] <= w[0])
        {
            return Err(Error::InvalidParameter(
                "s-grid must increase strictly from 0 to 1".into(),
            ));
        }
        if self.m_psi == 0 || !(self.dt > 0.0) || !(self.t_max > 0.0) || !(self.radius > 0.0) {
            return Err(Error::InvalidParameter(
                "need M_psi >= 1, dt > 0, T_max > 0, R > 0".into(),
            ));
        }
        Ok(())
    }

    pub fn d(&self) -> usize {
        self.v0.nvars()
    }

    pub fn v_s(&self, s: f64) -> TracePoly {
        &self.v0.scale_re(1.0 - s) + &self.v1.scale_re(s)
    }

    pub fn v_dot(&self) -> TracePoly {
        &self.v1 - &self.v0
    }

    fn w(&self, v: &TracePoly) -> TracePoly {
        v - &quadratic(self.d())
    }

    /// Ball-restricted `κ_R` bound valid for every `W_s`.
    pub fn kappa_r(&self) -> Result<f64> {
        Ok(kappa(&self.w(&self.v0), self.radius)?.max(kappa(&self.w(&self.v1), self.radius)?))
    }

    pub fn certified_convex(&self) -> bool {
        convexity_certificate(&self.w(&self.v0)) && convexity_certificate(&self.w(&self.v1))
    }

    /// Exponential decay rate of the pathwise derivative.
    pub fn decay_rate(&self) -> Result<f64> {
        if self.certified_convex() {
            return Ok(0.5);
        }
        let k = self.kappa_r()?;
        if k < 1.0 {
            return Ok((1.0 - k) / 2.0);
        }
        match self.rate_override {
            Some(r) if r > 0.0 => Ok(r),
            _ => Err(Error::NoDecay(format!(
                "kappa_R = {k} >= 1 at R = {} and no convexity certificate",
                self.radius
            ))),
        }
    }

    /// `max(10, 4/(1−κ) · ln(1/ε))` with `κ = 1 − 2·rate`.
    pub fn default_t_max(&self) -> f64 {
        match self.decay_rate() {
            Ok(r) => 10f64.max(4.0 / (2.0 * r) * (1.0 / DEFAULT_EPS).ln()),
            Err(_) => 10.0,
        }
    }
}
