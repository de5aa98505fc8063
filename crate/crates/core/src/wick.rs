//! Exact finite-N GUE expectations by genus-weighted Wick pairings.

use num_bigint::BigInt;
use num_complex::{Complex, Complex64};
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use rayon::prelude::*;

use crate::algebra::{Monomial, TracePoly, Word};
use crate::error::{Error, Result};
use crate::semicircle::{exact_coeff, tau_word_exact, SemicircleFamily};

/// Default cap on the total number of letters enumerated.
pub const DEFAULT_MAX_LETTERS: usize = 14;

/// `Σ_i coeffs[i] N^{-2i}` with exact integer coefficients.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GenusSeries {
    pub coeffs: Vec<BigInt>,
}

impl GenusSeries {
    pub fn zero() -> Self {
        GenusSeries { coeffs: vec![] }
    }

    fn add_power(&mut self, i: usize) {
        if self.coeffs.len() <= i {
            self.coeffs.resize(i + 1, BigInt::zero());
        }
        self.coeffs[i] += 1;
    }

    fn add(mut self, other: GenusSeries) -> GenusSeries {
        if self.coeffs.len() < other.coeffs.len() {
            self.coeffs.resize(other.coeffs.len(), BigInt::zero());
        }
        for (a, b) in self.coeffs.iter_mut().zip(other.coeffs) {
            *a += b;
        }
        self
    }

    /// The leading (planar) coefficient.
    pub fn constant(&self) -> BigInt {
        self.coeffs.first().cloned().unwrap_or_default()
    }

    pub fn eval(&self, n: usize) -> f64 {
        let x = 1.0 / (n as f64 * n as f64);
        self.coeffs
            .iter()
            .rev()
            .fold(0.0, |acc, c| acc * x + c.to_f64().unwrap())
    }

    pub fn eval_exact(&self, n: usize) -> BigRational {
        let n2 = BigInt::from(n) * BigInt::from(n);
        let mut den = BigInt::from(1);
        let mut s = BigRational::zero();
        for c in &self.coeffs {
            s += BigRational::new(c.clone(), den.clone());
            den *= &n2;
        }
        s
    }

    pub fn coeffs_i64(&self) -> Vec<i64> {
        self.coeffs.iter().map(|c| c.to_i64().unwrap()).collect()
    }

    /// `{"coeffs":[c0,c1,...]}` with exact integers.
    pub fn to_json(&self) -> String {
        let c: Vec<String> = self.coeffs.iter().map(|c| c.to_string()).collect();
        format!("{{\"coeffs\":[{}]}}", c.join(","))
    }

    /// Drops trailing zeros.
    fn normalize(mut self) -> Self {
        while self.coeffs.last().is_some_and(|c| c.is_zero()) {
            self.coeffs.pop();
        }
        self
    }
}

/// Positions of all letters with the cycle structure `γ` (one cycle per nonempty word).
struct Layout {
    labels: Vec<u8>,
    gamma: Vec<usize>,
    gamma_cycles: usize,
}

impl Layout {
    fn new(words: &[&Word]) -> Self {
        let mut labels = Vec::new();
        let mut gamma = Vec::new();
        let mut cycles = 0;
        for w in words.iter().filter(|w| !w.is_empty()) {
            let start = labels.len();
            let len = w.len();
            for k in 0..len {
                labels.push(w.letters()[k]);
                gamma.push(start + (k + 1) % len);
            }
            cycles += 1;
        }
        Layout {
            labels,
            gamma,
            gamma_cycles: cycles,
        }
    }

    fn cycles_of_gamma_pi(&self, pi: &[usize]) -> usize {
        let n = pi.len();
        let mut seen = vec![false; n];
        let mut c = 0;
        for s in 0..n {
            if seen[s] {
                continue;
            }
            c += 1;
            let mut a = s;
            while !seen[a] {
                seen[a] = true;
                a = self.gamma[pi[a]];
            }
        }
        c
    }

    /// Genus index `-(#cyc(γπ) − k − #cyc(γ))/2` of a pairing.
    fn genus(&self, pi: &[usize]) -> usize {
        let k = pi.len() / 2;
        let e = self.cycles_of_gamma_pi(pi) as i64 - k as i64 - self.gamma_cycles as i64;
        debug_assert!(e <= 0 && e % 2 == 0, "exponent {e}");
        (-e / 2) as usize
    }

    fn enumerate(&self, pi: &mut Vec<usize>, out: &mut GenusSeries) {
        let Some(a) = pi.iter().position(|&p| p == usize::MAX) else {
            out.add_power(self.genus(pi));
            return;
        };
        for b in (a + 1)..pi.len() {
            if pi[b] == usize::MAX && self.labels[b] == self.labels[a] {
                pi[a] = b;
                pi[b] = a;
                self.enumerate(pi, out);
                pi[a] = usize::MAX;
                pi[b] = usize::MAX;
            }
        }
    }

    fn series(&self) -> GenusSeries {
        let n = self.labels.len();
        if n == 0 {
            return GenusSeries {
                coeffs: vec![BigInt::from(1)],
            };
        }
        let mut counts = std::collections::HashMap::<u8, usize>::new();
        for &l in &self.labels {
            *counts.entry(l).or_default() += 1;
        }
        if counts.values().any(|c| c % 2 == 1) {
            return GenusSeries::zero();
        }
        // branch on the partner of position 0
        let partners: Vec<usize> = (1..n).filter(|&b| self.labels[b] == self.labels[0]).collect();
        partners
            .into_par_iter()
            .map(|b| {
                let mut pi = vec![usize::MAX; n];
                pi[0] = b;
                pi[b] = 0;
                let mut s = GenusSeries::zero();
                self.enumerate(&mut pi, &mut s);
                s
            })
            .reduce(GenusSeries::zero, GenusSeries::add)
            .normalize()
    }
}

fn check_cap(len: usize, cap: usize) -> Result<()> {
    if len > cap {
        return Err(Error::LengthCap { len, cap });
    }
    Ok(())
}

/// `E[tr_N w(X)]` for independent GUE matrices as a series in `N^{-2}`.
pub fn gue_expect_word(w: &Word) -> Result<GenusSeries> {
    gue_expect_word_capped(w, DEFAULT_MAX_LETTERS)
}

pub fn gue_expect_word_capped(w: &Word, cap: usize) -> Result<GenusSeries> {
    check_cap(w.len(), cap)?;
    Ok(Layout::new(&[w]).series())
}

/// `E[tr_N(outer) Π tr_N(w_c)]` for one monomial.
pub fn gue_series_monomial(m: &Monomial, cap: usize) -> Result<GenusSeries> {
    check_cap(m.degree(), cap)?;
    let mut words: Vec<&Word> = m.traces.iter().map(|t| t.word()).collect();
    words.push(&m.outer);
    Ok(Layout::new(&words).series())
}

/// Complex series coefficients of `E[tr_N p(X)]`.
pub fn gue_series(p: &TracePoly, cap: usize) -> Result<Vec<Complex64>> {
    let mut out: Vec<Complex64> = Vec::new();
    for (m, c) in p.iter() {
        let s = gue_series_monomial(m, cap)?;
        if out.len() < s.coeffs.len() {
            out.resize(s.coeffs.len(), Complex64::default());
        }
        for (o, k) in out.iter_mut().zip(&s.coeffs) {
            *o += c * k.to_f64().unwrap();
        }
    }
    Ok(out)
}

/// `E[tr_N p(X)]` at dimension `n` in floating point.
pub fn gue_expect_trace_poly(p: &TracePoly, n: usize) -> Result<Complex64> {
    let mut s = Complex64::default();
    for (m, c) in p.iter() {
        s += c * gue_series_monomial(m, DEFAULT_MAX_LETTERS)?.eval(n);
    }
    Ok(s)
}

/// Exact `E[tr_N p(X)]` for Gaussian-integer coefficients.
pub fn gue_expect_exact(p: &TracePoly, n: usize) -> Result<Complex<BigRational>> {
    let mut re = BigRational::zero();
    let mut im = BigRational::zero();
    for (m, c) in p.iter() {
        let c = exact_coeff(*c)?;
        let v = gue_series_monomial(m, DEFAULT_MAX_LETTERS)?.eval_exact(n);
        re += &v * BigRational::from_integer(c.re);
        im += v * BigRational::from_integer(c.im);
    }
    Ok(Complex::new(re, im))
}

/// Whether the planar term of every monomial equals the product of free moments exactly.
pub fn limit_agrees_with_free(p: &TracePoly) -> Result<bool> {
    let fam = SemicircleFamily::standard(p.nvars());
    for (m, _) in p.iter() {
        let planar = gue_series_monomial(m, DEFAULT_MAX_LETTERS)?.constant();
        let mut free = tau_word_exact(&m.outer, &fam)?;
        for t in &m.traces {
            free *= tau_word_exact(t.word(), &fam)?;
        }
        if planar != free {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::parse;

    fn series(s: &str) -> Vec<i64> {
        let p = parse(s, 2).unwrap();
        let m = p.iter().next().unwrap().0;
        gue_series_monomial(m, 14).unwrap().coeffs_i64()
    }

    #[test]
    fn word_examples() {
        assert_eq!(series("X1^2"), vec![1]);
        assert_eq!(series("X1^4"), vec![2, 1]);
        assert_eq!(series("X1*X2*X1*X2"), vec![0, 1]);
        assert_eq!(series("X1^3"), Vec::<i64>::new());
        assert_eq!(series("X1^6"), vec![5, 10]);
    }

    #[test]
    fn multi_trace() {
        assert_eq!(series("tr(X1)*tr(X1)"), vec![0, 1]);
        assert_eq!(series("tr(X1^2)*tr(X1^2)"), vec![1, 2]);
        assert_eq!(series("1"), vec![1]);
    }

    #[test]
    fn quartic_pairing_genera() {
        let w = Word::letter(0).power(4);
        let layout = Layout::new(&[&w]);
        let pairings = [[1, 0, 3, 2], [3, 2, 1, 0], [2, 3, 0, 1]];
        let g: Vec<usize> = pairings.iter().map(|p| layout.genus(p)).collect();
        assert_eq!(g, vec![0, 0, 1]);
    }

    #[test]
    fn cap_enforced() {
        let w = Word::letter(0).power(16);
        assert!(matches!(gue_expect_word(&w), Err(Error::LengthCap { .. })));
        assert!(gue_expect_word_capped(&w, 16).is_ok());
    }
}
