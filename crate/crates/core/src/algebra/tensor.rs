use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64;

use super::poly::{Monomial, TracePoly, PRUNE_TOL};
use super::word::{TraceFactor, Word};
use crate::error::{Error, Result};

/// One term of a degree-`j` tensor: `j` derivative indices, `j + 1` word slots, trace factors.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct TensorTerm {
    pub indices: Vec<u8>,
    pub words: Vec<Word>,
    pub traces: Vec<TraceFactor>,
}

impl TensorTerm {
    pub fn new(indices: Vec<u8>, words: Vec<Word>, mut traces: Vec<TraceFactor>) -> Self {
        traces.sort();
        TensorTerm {
            indices,
            words,
            traces,
        }
    }

    pub fn degree(&self) -> usize {
        self.words.iter().map(|w| w.len()).sum::<usize>()
            + self.traces.iter().map(|t| t.degree()).sum::<usize>()
    }
}

/// Derivative output living in `C^{d⊗j} ⊗ A^{⊗(j+1)} ⊗ Tr`.
#[derive(Clone, PartialEq, Debug)]
pub struct TensorPoly {
    nvars: usize,
    degree: usize,
    terms: BTreeMap<TensorTerm, Complex64>,
}

impl TensorPoly {
    pub fn zero(nvars: usize, degree: usize) -> Self {
        TensorPoly {
            nvars,
            degree,
            terms: BTreeMap::new(),
        }
    }

    pub fn from_terms<I: IntoIterator<Item = (TensorTerm, Complex64)>>(
        nvars: usize,
        degree: usize,
        it: I,
    ) -> Self {
        let mut t = Self::zero(nvars, degree);
        for (term, c) in it {
            debug_assert_eq!(term.words.len(), degree + 1);
            debug_assert_eq!(term.indices.len(), degree);
            *t.terms.entry(term).or_default() += c;
        }
        t.prune();
        t
    }

    fn prune(&mut self) {
        self.terms.retain(|_, c| c.norm() > PRUNE_TOL);
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn terms(&self) -> &BTreeMap<TensorTerm, Complex64> {
        &self.terms
    }

    pub fn iter(&self) -> impl Iterator<Item = (&TensorTerm, &Complex64)> {
        self.terms.iter()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn try_add(&self, other: &TensorPoly) -> Result<TensorPoly> {
        if self.nvars != other.nvars {
            return Err(Error::AlphabetMismatch(self.nvars, other.nvars));
        }
        if self.degree != other.degree {
            return Err(Error::ShapeMismatch(format!(
                "tensor degrees {} and {}",
                self.degree, other.degree
            )));
        }
        Ok(TensorPoly::from_terms(
            self.nvars,
            self.degree,
            self.terms
                .iter()
                .chain(other.terms.iter())
                .map(|(t, c)| (t.clone(), *c)),
        ))
    }

    pub fn scale(&self, c: Complex64) -> TensorPoly {
        TensorPoly::from_terms(
            self.nvars,
            self.degree,
            self.terms.iter().map(|(t, a)| (t.clone(), a * c)),
        )
    }

    /// Free difference quotient acting on the first word slot; the new index is appended.
    pub fn diff_free(&self, i: usize) -> TensorPoly {
        let mut out = Vec::new();
        for (t, c) in &self.terms {
            for (a, b) in t.words[0].splits(i) {
                let mut words = Vec::with_capacity(t.words.len() + 1);
                words.push(a);
                words.push(b);
                words.extend(t.words[1..].iter().cloned());
                let mut indices = t.indices.clone();
                indices.push(i as u8);
                out.push((TensorTerm::new(indices, words, t.traces.clone()), *c));
            }
        }
        TensorPoly::from_terms(self.nvars, self.degree + 1, out)
    }

    /// Trace-factor derivative: each `tr(R)` is removed and `𝒟_i R` is placed in a new leading slot.
    pub fn tilde_diff(&self, i: usize) -> TensorPoly {
        let mut out = Vec::new();
        for (t, c) in &self.terms {
            for (k, tf) in t.traces.iter().enumerate() {
                let mut rest = t.traces.clone();
                rest.remove(k);
                for g in tf.word().cyclic_grad(i) {
                    let mut words = Vec::with_capacity(t.words.len() + 1);
                    words.push(g);
                    words.extend(t.words.iter().cloned());
                    let mut indices = t.indices.clone();
                    indices.push(i as u8);
                    out.push((TensorTerm::new(indices, words, rest.clone()), *c));
                }
            }
        }
        TensorPoly::from_terms(self.nvars, self.degree + 1, out)
    }

    /// `(p⊗1⋯)·t`: multiplies the first word slot on the left.
    pub fn mul_left(&self, p: &TracePoly) -> TensorPoly {
        let mut out = Vec::new();
        for (t, c) in &self.terms {
            for (m, a) in p.iter() {
                let mut words = t.words.clone();
                words[0] = m.outer.concat(&words[0]);
                let mut traces = t.traces.clone();
                traces.extend(m.traces.iter().cloned());
                out.push((TensorTerm::new(t.indices.clone(), words, traces), c * a));
            }
        }
        TensorPoly::from_terms(self.nvars, self.degree, out)
    }

    /// `t·(⋯1⊗q)`: multiplies the last word slot on the right.
    pub fn mul_right(&self, q: &TracePoly) -> TensorPoly {
        let mut out = Vec::new();
        for (t, c) in &self.terms {
            for (m, a) in q.iter() {
                let mut words = t.words.clone();
                let last = words.len() - 1;
                words[last] = words[last].concat(&m.outer);
                let mut traces = t.traces.clone();
                traces.extend(m.traces.iter().cloned());
                out.push((TensorTerm::new(t.indices.clone(), words, traces), c * a));
            }
        }
        TensorPoly::from_terms(self.nvars, self.degree, out)
    }

    /// `m(A⊗B) = BA` on a degree-1 tensor.
    pub fn multiply_flip(&self) -> Result<TracePoly> {
        self.require_degree(1)?;
        Ok(TracePoly::from_terms(
            self.nvars,
            self.terms.iter().map(|(t, c)| {
                (
                    Monomial::new(t.words[1].concat(&t.words[0]), t.traces.clone()),
                    *c,
                )
            }),
        ))
    }

    /// `(id⊗tr)` on a degree-1 tensor: the second slot becomes a trace factor.
    pub fn id_tr(&self) -> Result<TracePoly> {
        self.require_degree(1)?;
        Ok(TracePoly::from_terms(
            self.nvars,
            self.terms.iter().map(|(t, c)| {
                let mut traces = t.traces.clone();
                traces.extend(TraceFactor::new(&t.words[1]));
                (Monomial::new(t.words[0].clone(), traces), *c)
            }),
        ))
    }

    /// Restriction to terms whose last index equals `i`.
    pub fn with_last_index(&self, i: usize) -> TensorPoly {
        TensorPoly::from_terms(
            self.nvars,
            self.degree,
            self.terms
                .iter()
                .filter(|(t, _)| t.indices.last().map(|&l| l as usize) == Some(i))
                .map(|(t, c)| (t.clone(), *c)),
        )
    }

    fn require_degree(&self, j: usize) -> Result<()> {
        if self.degree != j {
            return Err(Error::ShapeMismatch(format!(
                "expected tensor degree {j}, got {}",
                self.degree
            )));
        }
        Ok(())
    }

    /// Substitutes `f` into every word slot and trace factor; traces produced by `f` join the trace multiset.
    pub fn compose(&self, f: &[TracePoly]) -> Result<TensorPoly> {
        if f.len() != self.nvars {
            return Err(Error::ArityMismatch {
                expected: self.nvars,
                got: f.len(),
            });
        }
        let d = f[0].nvars();
        let mut out: Vec<(TensorTerm, Complex64)> = Vec::new();
        for (t, c) in &self.terms {
            let mut scalar = TracePoly::constant(d, *c);
            for tf in &t.traces {
                scalar = &scalar * &substitute_word(tf.word(), f, d).trace();
            }
            let slots: Vec<TracePoly> = t
                .words
                .iter()
                .map(|w| substitute_word(w, f, d))
                .collect();
            // expand the product of slots as a sum of word tuples
            let mut partial: Vec<(Vec<Word>, Vec<TraceFactor>, Complex64)> = scalar
                .iter()
                .map(|(m, c)| (vec![], m.traces.clone(), *c))
                .collect();
            for slot in &slots {
                let mut next = Vec::new();
                for (words, traces, c0) in &partial {
                    for (m, c1) in slot.iter() {
                        let mut w2 = words.clone();
                        w2.push(m.outer.clone());
                        let mut t2 = traces.clone();
                        t2.extend(m.traces.iter().cloned());
                        next.push((w2, t2, c0 * c1));
                    }
                }
                partial = next;
            }
            for (words, traces, c0) in partial {
                out.push((TensorTerm::new(t.indices.clone(), words, traces), c0));
            }
        }
        Ok(TensorPoly::from_terms(d, self.degree, out))
    }

    /// Largest letter index that appears anywhere, for alphabet checks.
    pub fn max_letter(&self) -> Option<usize> {
        self.terms
            .keys()
            .flat_map(|t| {
                t.words
                    .iter()
                    .chain(t.traces.iter().map(|tf| tf.word()))
                    .filter_map(|w| w.max_letter())
            })
            .max()
    }
}

impl From<&TracePoly> for TensorPoly {
    fn from(p: &TracePoly) -> TensorPoly {
        TensorPoly::from_terms(
            p.nvars(),
            0,
            p.iter().map(|(m, c)| {
                (
                    TensorTerm::new(vec![], vec![m.outer.clone()], m.traces.clone()),
                    *c,
                )
            }),
        )
    }
}

impl TryFrom<&TensorPoly> for TracePoly {
    type Error = Error;
    fn try_from(t: &TensorPoly) -> Result<TracePoly> {
        t.require_degree(0)?;
        Ok(TracePoly::from_terms(
            t.nvars,
            t.terms
                .iter()
                .map(|(k, c)| (Monomial::new(k.words[0].clone(), k.traces.clone()), *c)),
        ))
    }
}

impl fmt::Display for TensorPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (k, (t, c)) in self.terms.iter().enumerate() {
            if k > 0 {
                write!(f, " + ")?;
            }
            let idx: Vec<String> = t.indices.iter().map(|i| (i + 1).to_string()).collect();
            let words: Vec<String> = t.words.iter().map(|w| w.to_string()).collect();
            write!(f, "({c})[{}]", idx.join(","))?;
            for tf in &t.traces {
                write!(f, "{tf}*")?;
            }
            write!(f, "{}", words.join("⊗"))?;
        }
        Ok(())
    }
}

/// Product `f[w_1] f[w_2] ⋯` over the letters of `w`.
pub(crate) fn substitute_word(w: &Word, f: &[TracePoly], d: usize) -> TracePoly {
    let mut out = TracePoly::one(d);
    for &l in w.letters() {
        out = &out * &f[l as usize];
    }
    out
}
