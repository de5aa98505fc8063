use num_complex::Complex64;

use super::poly::{Monomial, TracePoly};
use super::tensor::{substitute_word, TensorPoly};
use super::word::{TraceFactor, Word};
use crate::error::{Error, Result};

fn check_index(p_nvars: usize, i: usize) -> Result<()> {
    if i >= p_nvars {
        return Err(Error::VariableOutOfRange {
            index: i + 1,
            nvars: p_nvars,
        });
    }
    Ok(())
}

/// Free difference quotient `∂_i p`; trace factors are carried unchanged.
pub fn diff_free(p: &TracePoly, i: usize) -> Result<TensorPoly> {
    check_index(p.nvars(), i)?;
    Ok(TensorPoly::from(p).diff_free(i))
}

/// `∂̃_i p`: each trace factor `tr(R)` is replaced by `𝒟_i R` in a leading slot.
pub fn tilde_diff(p: &TracePoly, i: usize) -> Result<TensorPoly> {
    check_index(p.nvars(), i)?;
    Ok(TensorPoly::from(p).tilde_diff(i))
}

/// Cyclic derivative `𝒟_i = m ∘ ∂_i` with `m(A⊗B) = BA`.
pub fn cyclic_grad(p: &TracePoly, i: usize) -> Result<TracePoly> {
    diff_free(p, i)?.multiply_flip()
}

/// `𝔻_i p = 𝒟_i p + (id⊗tr)(∂̃_i p)`, the matrix gradient of `H ↦ Tr p(H)`.
pub fn bold_grad(p: &TracePoly, i: usize) -> Result<TracePoly> {
    let a = cyclic_grad(p, i)?;
    let b = tilde_diff(p, i)?.id_tr()?;
    a.try_add(&b)
}

/// All components `(𝔻_1 p, …, 𝔻_d p)`.
pub fn bold_grad_all(p: &TracePoly) -> Vec<TracePoly> {
    (0..p.nvars())
        .map(|i| bold_grad(p, i).expect("index in range"))
        .collect()
}

/// Substitution `J ∘ f`; trace factors of `J` become traces of the substituted words.
pub fn compose(j: &TracePoly, f: &[TracePoly]) -> Result<TracePoly> {
    if f.len() != j.nvars() {
        return Err(Error::ArityMismatch {
            expected: j.nvars(),
            got: f.len(),
        });
    }
    let d = f[0].nvars();
    if let Some(bad) = f.iter().find(|g| g.nvars() != d) {
        return Err(Error::AlphabetMismatch(d, bad.nvars()));
    }
    let uses_traces = j.iter().any(|(m, _)| !m.traces.is_empty());
    if uses_traces {
        if let Some(k) = f.iter().position(|g| !g.is_self_adjoint(1e-12)) {
            return Err(Error::NotSelfAdjoint(format!(
                "substitution {} is not self-adjoint",
                k + 1
            )));
        }
    }
    let mut out = TracePoly::zero(d);
    for (m, c) in j.iter() {
        let mut term = TracePoly::constant(d, *c);
        for tf in &m.traces {
            term = &term * &substitute_word(tf.word(), f, d).trace();
        }
        term = &term * &substitute_word(&m.outer, f, d);
        out = &out + &term;
    }
    Ok(out)
}

/// `Σ |c| R^{deg}` over terms; an upper bound for the ball-restricted seminorm.
pub fn seminorm_bound_poly(p: &TracePoly, r: f64) -> Result<f64> {
    check_radius(r)?;
    Ok(p.iter()
        .map(|(m, c)| c.norm() * r.powi(m.degree() as i32))
        .sum())
}

pub fn seminorm_bound_tensor(t: &TensorPoly, r: f64) -> Result<f64> {
    check_radius(r)?;
    Ok(t.iter()
        .map(|(k, c)| c.norm() * r.powi(k.degree() as i32))
        .sum())
}

fn check_radius(r: f64) -> Result<()> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::InvalidParameter(format!("radius must be positive, got {r}")));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct RegularityReport {
    pub kappa_r: f64,
    pub radius: f64,
    pub k: u32,
    pub threshold: f64,
    pub passes: bool,
    /// The bound is taken over the operator-norm ball of this radius, not globally.
    pub ball_restricted: bool,
}

/// Ball-restricted second-derivative constant of `W` and the `κ < 1/(4k+5)` test.
pub fn regularity_check(w: &TracePoly, r: f64, k: u32) -> Result<RegularityReport> {
    check_radius(r)?;
    if !w.is_self_adjoint(1e-12) {
        return Err(Error::NotSelfAdjoint(w.to_string()));
    }
    let kappa_r = kappa(w, r)?;
    let threshold = 1.0 / (4.0 * k as f64 + 5.0);
    Ok(RegularityReport {
        kappa_r,
        radius: r,
        k,
        threshold,
        passes: kappa_r < threshold,
        ball_restricted: true,
    })
}

/// `max_p Σ_i [bound(∂_i 𝔻_p W) + bound(∂̃_i 𝔻_p W)]`.
pub fn kappa(w: &TracePoly, r: f64) -> Result<f64> {
    let d = w.nvars();
    let mut best = 0.0f64;
    for p in 0..d {
        let g = bold_grad(w, p)?;
        let mut s = 0.0;
        for i in 0..d {
            s += seminorm_bound_tensor(&diff_free(&g, i)?, r)?;
            s += seminorm_bound_tensor(&tilde_diff(&g, i)?, r)?;
        }
        best = best.max(s);
    }
    Ok(best)
}

/// Certifies that `H ↦ Tr W(H)` is convex on all of `M_N(C)_sa^d`.
///
/// Accepted terms: constants, real multiples of a single letter, and `c X_i^{2m}` with `c ≥ 0`.
pub fn convexity_certificate(w: &TracePoly) -> bool {
    w.iter().all(|(m, c)| {
        if c.im.abs() > 1e-14 || !m.traces.is_empty() {
            return false;
        }
        let l = m.outer.letters();
        match l.len() {
            0 | 1 => true,
            n => n % 2 == 0 && l.iter().all(|&x| x == l[0]) && c.re >= 0.0,
        }
    })
}

/// `½ Σ X_i²` over `d` variables.
pub fn quadratic(d: usize) -> TracePoly {
    TracePoly::from_terms(
        d,
        (0..d).map(|i| {
            (
                Monomial::new(Word::from_letters([i, i]), vec![]),
                Complex64::new(0.5, 0.0),
            )
        }),
    )
}

/// `tr(w)` helper for callers building trace polynomials by hand.
pub fn tr(d: usize, w: &Word) -> TracePoly {
    TracePoly::from_monomial(
        d,
        Monomial::new(Word::unit(), TraceFactor::new(w).into_iter().collect()),
        Complex64::new(1.0, 0.0),
    )
}
