//! Run configuration, result persistence, and fits of `1/N²` expansions.

mod config;
mod fit;
mod output;

pub use config::{RunConfig, Sampler, TransportBlock};
pub use fit::{fit_expansion, fit_inverse_square, ExpansionFit, FitPoint};
pub use output::{read_csv, write_csv, write_json, RunResult};
