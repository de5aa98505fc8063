//! Sample means with standard errors.

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub observable: String,
    #[serde(rename = "N")]
    pub n: usize,
    pub mean: f64,
    pub stderr: f64,
    #[serde(rename = "M")]
    pub m: usize,
}

/// Mean and standard error of independent values, summed in the given order.
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let m = values.len();
    if m == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / m as f64;
    if m == 1 {
        return (mean, f64::NAN);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (m - 1) as f64;
    (mean, (var / m as f64).sqrt())
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// `(a - b) / sqrt(sa² + sb²)`.
pub fn z_score(a: f64, sa: f64, b: f64, sb: f64) -> f64 {
    (a - b) / (sa * sa + sb * sb).sqrt()
}
