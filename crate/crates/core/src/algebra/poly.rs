use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;

use super::word::{TraceFactor, Word};
use crate::error::{Error, Result};

/// Coefficients at or below this magnitude are dropped after every arithmetic pass.
pub const PRUNE_TOL: f64 = 1e-14;

/// Outer word times a sorted multiset of trace factors.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct Monomial {
    pub outer: Word,
    pub traces: Vec<TraceFactor>,
}

impl Monomial {
    pub fn new(outer: Word, mut traces: Vec<TraceFactor>) -> Self {
        traces.sort();
        Monomial { outer, traces }
    }

    pub fn unit() -> Self {
        Monomial {
            outer: Word::unit(),
            traces: Vec::new(),
        }
    }

    pub fn degree(&self) -> usize {
        self.outer.len() + self.traces.iter().map(|t| t.degree()).sum::<usize>()
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        let mut traces = self.traces.clone();
        traces.extend(other.traces.iter().cloned());
        Monomial::new(self.outer.concat(&other.outer), traces)
    }

    pub fn adjoint(&self) -> Monomial {
        Monomial::new(
            self.outer.reversed(),
            self.traces.iter().map(|t| t.adjoint()).collect(),
        )
    }

    pub fn max_letter(&self) -> Option<usize> {
        self.traces
            .iter()
            .filter_map(|t| t.word().max_letter())
            .chain(self.outer.max_letter())
            .max()
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts: Vec<String> = self.traces.iter().map(|t| t.to_string()).collect();
        if !self.outer.is_empty() || parts.is_empty() {
            parts.push(self.outer.to_string());
        }
        write!(f, "{}", parts.join("*"))
    }
}

/// A trace polynomial in `nvars` self-adjoint variables.
#[derive(Clone, PartialEq, Debug)]
pub struct TracePoly {
    nvars: usize,
    terms: BTreeMap<Monomial, Complex64>,
}

impl TracePoly {
    pub fn zero(nvars: usize) -> Self {
        assert!(nvars > 0, "alphabet size must be positive");
        TracePoly {
            nvars,
            terms: BTreeMap::new(),
        }
    }

    pub fn try_zero(nvars: usize) -> Result<Self> {
        if nvars == 0 {
            return Err(Error::EmptyAlphabet);
        }
        Ok(Self::zero(nvars))
    }

    pub fn constant(nvars: usize, c: Complex64) -> Self {
        Self::from_monomial(nvars, Monomial::unit(), c)
    }

    pub fn one(nvars: usize) -> Self {
        Self::constant(nvars, Complex64::new(1.0, 0.0))
    }

    /// The variable `X_{i+1}` (0-based index `i`).
    pub fn var(nvars: usize, i: usize) -> Self {
        assert!(i < nvars, "variable index out of range");
        Self::from_monomial(
            nvars,
            Monomial::new(Word::letter(i), vec![]),
            Complex64::new(1.0, 0.0),
        )
    }

    pub fn word(nvars: usize, w: Word) -> Self {
        Self::from_monomial(nvars, Monomial::new(w, vec![]), Complex64::new(1.0, 0.0))
    }

    /// `tr(w)` as a scalar trace polynomial.
    pub fn trace_of_word(nvars: usize, w: &Word) -> Self {
        let traces = TraceFactor::new(w).into_iter().collect();
        Self::from_monomial(
            nvars,
            Monomial::new(Word::unit(), traces),
            Complex64::new(1.0, 0.0),
        )
    }

    pub fn from_monomial(nvars: usize, m: Monomial, c: Complex64) -> Self {
        let mut p = Self::zero(nvars);
        p.add_term(m, c);
        p.prune();
        p
    }

    pub fn from_terms<I: IntoIterator<Item = (Monomial, Complex64)>>(nvars: usize, it: I) -> Self {
        let mut p = Self::zero(nvars);
        for (m, c) in it {
            p.add_term(m, c);
        }
        p.prune();
        p
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn terms(&self) -> &BTreeMap<Monomial, Complex64> {
        &self.terms
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Monomial, &Complex64)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coeff(&self, m: &Monomial) -> Complex64 {
        self.terms.get(m).copied().unwrap_or_default()
    }

    pub fn degree(&self) -> usize {
        self.terms.keys().map(|m| m.degree()).max().unwrap_or(0)
    }

    /// Accumulates without pruning; call [`TracePoly::prune`] afterwards.
    pub(crate) fn add_term(&mut self, m: Monomial, c: Complex64) {
        *self.terms.entry(m).or_default() += c;
    }

    pub(crate) fn prune(&mut self) {
        self.terms.retain(|_, c| c.norm() > PRUNE_TOL);
    }

    pub fn with_nvars(mut self, nvars: usize) -> Result<Self> {
        if nvars == 0 {
            return Err(Error::EmptyAlphabet);
        }
        if let Some(l) = self.terms.keys().filter_map(|m| m.max_letter()).max() {
            if l >= nvars {
                return Err(Error::VariableOutOfRange { index: l + 1, nvars });
            }
        }
        self.nvars = nvars;
        Ok(self)
    }

    fn check_same(&self, other: &TracePoly) -> Result<()> {
        if self.nvars != other.nvars {
            return Err(Error::AlphabetMismatch(self.nvars, other.nvars));
        }
        Ok(())
    }

    pub fn try_add(&self, other: &TracePoly) -> Result<TracePoly> {
        self.check_same(other)?;
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), *c);
        }
        out.prune();
        Ok(out)
    }

    pub fn try_mul(&self, other: &TracePoly) -> Result<TracePoly> {
        self.check_same(other)?;
        let mut out = TracePoly::zero(self.nvars);
        for (m1, c1) in &self.terms {
            for (m2, c2) in &other.terms {
                out.add_term(m1.mul(m2), c1 * c2);
            }
        }
        out.prune();
        Ok(out)
    }

    pub fn scale(&self, c: Complex64) -> TracePoly {
        let mut out = TracePoly::zero(self.nvars);
        for (m, a) in &self.terms {
            out.add_term(m.clone(), a * c);
        }
        out.prune();
        out
    }

    pub fn scale_re(&self, c: f64) -> TracePoly {
        self.scale(Complex64::new(c, 0.0))
    }

    pub fn pow(&self, n: u32) -> TracePoly {
        let mut out = TracePoly::one(self.nvars);
        for _ in 0..n {
            out = &out * self;
        }
        out
    }

    pub fn adjoint(&self) -> TracePoly {
        TracePoly::from_terms(
            self.nvars,
            self.terms.iter().map(|(m, c)| (m.adjoint(), c.conj())),
        )
    }

    /// Largest coefficient of `p - p*`.
    pub fn adjoint_defect(&self) -> f64 {
        let diff = self - &self.adjoint();
        diff.terms.values().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn is_self_adjoint(&self, tol: f64) -> bool {
        self.adjoint_defect() <= tol
    }

    /// `tr(p)`: every outer word moves into the trace-factor multiset.
    pub fn trace(&self) -> TracePoly {
        TracePoly::from_terms(
            self.nvars,
            self.terms.iter().map(|(m, c)| {
                let mut traces = m.traces.clone();
                traces.extend(TraceFactor::new(&m.outer));
                (Monomial::new(Word::unit(), traces), *c)
            }),
        )
    }

    /// True when every coefficient is real.
    pub fn is_real(&self, tol: f64) -> bool {
        self.terms.values().all(|c| c.im.abs() <= tol)
    }
}

impl fmt::Display for TracePoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (k, (m, c)) in self.terms.iter().enumerate() {
            let unit = m.outer.is_empty() && m.traces.is_empty();
            let (neg, body) = format_coeff(*c);
            if k == 0 {
                if neg {
                    write!(f, "-")?;
                }
            } else if neg {
                write!(f, " - ")?;
            } else {
                write!(f, " + ")?;
            }
            match (body, unit) {
                (None, true) => write!(f, "1")?,
                (None, false) => write!(f, "{m}")?,
                (Some(b), true) => write!(f, "{b}")?,
                (Some(b), false) => write!(f, "{b}*{m}")?,
            }
        }
        Ok(())
    }
}

/// Splits a coefficient into a sign and a printed magnitude; `None` means unit magnitude.
fn format_coeff(c: Complex64) -> (bool, Option<String>) {
    if c.im == 0.0 {
        let neg = c.re < 0.0;
        let a = c.re.abs();
        return (neg, if a == 1.0 { None } else { Some(format!("{a}")) });
    }
    if c.re == 0.0 {
        let neg = c.im < 0.0;
        let a = c.im.abs();
        return (neg, Some(format!("{a}i")));
    }
    let sign = if c.im < 0.0 { '-' } else { '+' };
    (false, Some(format!("({}{}{}i)", c.re, sign, c.im.abs())))
}

impl Add for &TracePoly {
    type Output = TracePoly;
    fn add(self, rhs: &TracePoly) -> TracePoly {
        self.try_add(rhs).expect("alphabet mismatch")
    }
}

impl Sub for &TracePoly {
    type Output = TracePoly;
    fn sub(self, rhs: &TracePoly) -> TracePoly {
        self.try_add(&-rhs).expect("alphabet mismatch")
    }
}

impl Neg for &TracePoly {
    type Output = TracePoly;
    fn neg(self) -> TracePoly {
        self.scale_re(-1.0)
    }
}

impl Mul for &TracePoly {
    type Output = TracePoly;
    fn mul(self, rhs: &TracePoly) -> TracePoly {
        self.try_mul(rhs).expect("alphabet mismatch")
    }
}

macro_rules! forward_owned {
    ($tr:ident, $f:ident) => {
        impl $tr for TracePoly {
            type Output = TracePoly;
            fn $f(self, rhs: TracePoly) -> TracePoly {
                (&self).$f(&rhs)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn ring_identities() {
        let x1 = TracePoly::var(2, 0);
        let x2 = TracePoly::var(2, 1);
        let one = TracePoly::one(2);
        assert_eq!(
            &x1 * &x2,
            TracePoly::word(2, Word::from_letters([0, 1]))
        );
        let lhs = &(&x1 + &one) * &(&x1 - &one);
        let rhs = &(&x1 * &x1) - &one;
        assert_eq!(lhs, rhs);
        let t = x1.trace();
        let prod = &t * &x2;
        let m = prod.iter().next().unwrap().0;
        assert_eq!(m.outer, Word::letter(1));
        assert_eq!(m.traces.len(), 1);
    }

    #[test]
    fn mismatch_errors() {
        let a = TracePoly::var(1, 0);
        let b = TracePoly::var(2, 0);
        assert!(matches!(a.try_mul(&b), Err(Error::AlphabetMismatch(1, 2))));
        assert!(TracePoly::try_zero(0).is_err());
    }

    #[test]
    fn adjoint_examples() {
        let p = TracePoly::word(2, Word::from_letters([0, 1])).scale(c(0.0, 1.0));
        let q = TracePoly::word(2, Word::from_letters([1, 0])).scale(c(0.0, -1.0));
        assert_eq!(p.adjoint(), q);
        let x = TracePoly::var(3, 0);
        let y = TracePoly::var(3, 1);
        let z = TracePoly::var(3, 2);
        let t = &(&x * &y).trace() * &z;
        assert_eq!(t.adjoint(), t);
    }

    #[test]
    fn display_forms() {
        let x = TracePoly::var(2, 0);
        let p = &(&x * &x).scale(c(2.0, 0.0)) - &TracePoly::one(2);
        assert_eq!(p.to_string(), "-1 + 2*X1^2");
        let q = x.scale(c(0.5, -1.5));
        assert_eq!(q.to_string(), "(0.5-1.5i)*X1");
        assert_eq!(x.scale(c(0.0, -2.0)).to_string(), "-2i*X1");
    }
}
