use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::algebra::{parse, TracePoly};
use crate::error::{Error, Result};
use crate::langevin::{ModelSpec, SdeParams};
use crate::transport::{FlowMethod, TransportSpec};

/// How stationary samples are drawn.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sampler {
    /// Direct GUE draws when `W = 0`, Langevin otherwise.
    #[default]
    Auto,
    Langevin,
    Gue,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransportBlock {
    #[serde(default = "default_s_steps")]
    pub s_steps: usize,
    #[serde(rename = "M_psi", default = "default_m_psi")]
    pub m_psi: usize,
    /// Defaults to the decay-based horizon when absent.
    #[serde(rename = "T_max", default, skip_serializing_if = "Option::is_none")]
    pub t_max: Option<f64>,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "yes")]
    pub antithetic: bool,
    #[serde(default)]
    pub method: FlowMethod,
    /// Initial potential; `½ΣX²` when absent.
    #[serde(rename = "V0", default, skip_serializing_if = "Option::is_none")]
    pub v0: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate_override: Option<f64>,
}

fn default_s_steps() -> usize {
    4
}
fn default_m_psi() -> usize {
    64
}
fn default_dt() -> f64 {
    0.05
}
fn yes() -> bool {
    true
}
fn one() -> usize {
    1
}
fn default_radius() -> f64 {
    ModelSpec::DEFAULT_RADIUS
}

impl Default for TransportBlock {
    fn default() -> Self {
        TransportBlock {
            s_steps: default_s_steps(),
            m_psi: default_m_psi(),
            t_max: None,
            dt: default_dt(),
            antithetic: true,
            method: FlowMethod::Heun,
            v0: None,
            rate_override: None,
        }
    }
}

/// A run description, read from TOML or JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub d: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub potential: String,
    pub h: f64,
    #[serde(rename = "T_burn")]
    pub t_burn: f64,
    pub thin: f64,
    #[serde(rename = "M")]
    pub m: usize,
    pub seed: u64,
    pub observables: Vec<String>,
    #[serde(default = "one")]
    pub samples_per_trajectory: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_grid: Option<Vec<usize>>,
    #[serde(default)]
    pub sampler: Sampler,
    #[serde(rename = "override", default)]
    pub override_check: bool,
    #[serde(default = "default_radius")]
    pub radius: f64,
    #[serde(default)]
    pub k: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transport: Option<TransportBlock>,
}

fn config_err(e: impl std::fmt::Display) -> Error {
    Error::Config(e.to_string())
}

impl RunConfig {
    pub fn from_toml(s: &str) -> Result<Self> {
        let c: RunConfig = toml::from_str(s).map_err(config_err)?;
        c.validate()?;
        Ok(c)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let c: RunConfig = serde_json::from_str(s).map_err(config_err)?;
        c.validate()?;
        Ok(c)
    }

    /// Reads `.json` as JSON and anything else as TOML.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => Self::from_json(&text),
            _ => Self::from_toml(&text),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::EmptyAlphabet);
        }
        if self.n == 0 || self.n_grid.as_ref().is_some_and(|g| g.is_empty() || g.contains(&0)) {
            return Err(Error::Config("N and every grid entry must be positive".into()));
        }
        if self.observables.is_empty() {
            return Err(Error::Config("at least one observable is required".into()));
        }
        if !(self.radius > 0.0) {
            return Err(Error::Config("radius must be positive".into()));
        }
        self.potential()?;
        self.observable_polys()?;
        self.sde_params().validate()?;
        if let Some(t) = &self.transport {
            if t.s_steps == 0 || t.m_psi == 0 || !(t.dt > 0.0) || t.t_max.is_some_and(|x| !(x > 0.0)) {
                return Err(Error::Config("transport needs s_steps, M_psi, dt, T_max > 0".into()));
            }
            if let Some(v0) = &t.v0 {
                parse(v0, self.d)?;
            }
        }
        Ok(())
    }

    pub fn potential(&self) -> Result<TracePoly> {
        let v = parse(&self.potential, self.d)?;
        if !v.is_self_adjoint(1e-12) {
            return Err(Error::NotSelfAdjoint(self.potential.clone()));
        }
        Ok(v)
    }

    pub fn observable_polys(&self) -> Result<Vec<TracePoly>> {
        self.observables.iter().map(|s| parse(s, self.d)).collect()
    }

    pub fn sde_params(&self) -> SdeParams {
        SdeParams {
            h: self.h,
            t_burn: self.t_burn,
            thin: self.thin,
            trajectories: self.m,
            samples_per_trajectory: self.samples_per_trajectory,
            seed: self.seed,
        }
    }

    pub fn model(&self, n: usize) -> Result<ModelSpec> {
        Ok(ModelSpec::with_radius(n, self.potential()?, self.radius, self.k)?
            .with_override(self.override_check))
    }

    /// `[N]` or the configured grid.
    pub fn sizes(&self) -> Vec<usize> {
        self.n_grid.clone().unwrap_or_else(|| vec![self.n])
    }

    pub fn transport_spec(&self) -> Result<TransportSpec> {
        let block = self.transport.clone().unwrap_or_default();
        let v1 = self.potential()?;
        let mut spec = match &block.v0 {
            Some(v0) => TransportSpec::new(parse(v0, self.d)?, v1, block.s_steps)?,
            None => TransportSpec::from_gaussian(v1, block.s_steps)?,
        };
        spec.m_psi = block.m_psi;
        spec.dt = block.dt;
        spec.antithetic = block.antithetic;
        spec.method = block.method;
        spec.radius = self.radius;
        spec.rate_override = block.rate_override;
        spec.t_max = block.t_max.unwrap_or_else(|| spec.default_t_max());
        Ok(spec)
    }

    /// Copy with polynomial strings in printed normal form.
    pub fn canonical(&self) -> Result<Self> {
        let mut c = self.clone();
        c.potential = self.potential()?.to_string();
        c.observables = self.observable_polys()?.iter().map(|p| p.to_string()).collect();
        if let Some(t) = c.transport.as_mut() {
            if let Some(v0) = t.v0.as_mut() {
                *v0 = parse(v0, self.d)?.to_string();
            }
        }
        Ok(c)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(config_err)
    }

    pub fn to_canonical_toml(&self) -> Result<String> {
        self.canonical()?.to_toml()
    }

    /// SHA-256 of the canonical JSON form, hex encoded.
    pub fn content_hash(&self) -> Result<String> {
        let json = serde_json::to_string(&self.canonical()?)?;
        let digest = Sha256::digest(json.as_bytes());
        Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
    }
}
