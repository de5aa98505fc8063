//! GUE sampling and Euler–Maruyama integration of the matrix Langevin equation.

mod planar;
mod sde;

pub(crate) use sde::{em_step_cached as sde_step_cached, guard as sde_guard};

pub use planar::{planar_moments, potential_coefficients, OneCut};
pub use sde::{
    coupled_step_study, drift, estimate_gue, estimate_observables, integrate, integrate_with_noise, sample_model,
    Drift, GaussianNoise, ModelSpec, NoiseSource, SdeParams, StepStudy, DIVERGENCE_THRESHOLD,
    GUE_NORM_CONSTANT, ZeroNoise,
};
