use std::collections::HashMap;

use ndarray::Array2;
use num_complex::Complex64;

use super::calculus::{diff_free, tilde_diff};
use super::poly::TracePoly;
use super::tensor::{TensorPoly, TensorTerm};
use super::word::{TraceFactor, Word};
use crate::error::{Error, Result};
use crate::matrix::{axpy, symmetrize, trace_product, CMat, HermTuple};

const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Numeric evaluator at a fixed point `x`, caching word products and traces.
pub struct Evaluator<'a> {
    x: &'a HermTuple,
    products: HashMap<Word, CMat>,
    traces: HashMap<TraceFactor, Complex64>,
}

/// Products and traces left by an [`Evaluator`], for reuse at the same point.
#[derive(Clone, Debug, Default)]
pub struct EvalCache {
    products: HashMap<Word, CMat>,
    traces: HashMap<TraceFactor, Complex64>,
}

impl<'a> Evaluator<'a> {
    pub fn new(x: &'a HermTuple) -> Self {
        Self::with_cache(x, EvalCache::default())
    }

    /// Resumes from a cache that must have been built at `x`.
    pub fn with_cache(x: &'a HermTuple, cache: EvalCache) -> Self {
        Evaluator {
            x,
            products: cache.products,
            traces: cache.traces,
        }
    }

    pub fn into_cache(self) -> EvalCache {
        EvalCache {
            products: self.products,
            traces: self.traces,
        }
    }

    pub fn point(&self) -> &HermTuple {
        self.x
    }

    fn ensure(&mut self, w: &Word) {
        if w.is_empty() || self.products.contains_key(w) {
            return;
        }
        let l = w.letters();
        let mut k = l.len() - 1;
        while k > 1 && !self.products.contains_key(&w.slice(0, k)) {
            k -= 1;
        }
        let mut cur = if k <= 1 {
            k = 1;
            self.x.get(l[0] as usize).clone()
        } else {
            self.products[&w.slice(0, k)].clone()
        };
        while k < l.len() {
            cur = cur.dot(self.x.get(l[k] as usize));
            k += 1;
            if k < l.len() {
                self.products.insert(w.slice(0, k), cur.clone());
            }
        }
        self.products.insert(w.clone(), cur);
    }

    /// Matrix of a nonempty word; letters are returned from `x` directly.
    pub fn product(&mut self, w: &Word) -> &CMat {
        assert!(!w.is_empty(), "unit word has no stored product");
        if w.len() == 1 {
            return self.x.get(w.letters()[0] as usize);
        }
        self.ensure(w);
        &self.products[w]
    }

    /// Normalized trace `tr_N` of a trace factor.
    pub fn trace(&mut self, tf: &TraceFactor) -> Complex64 {
        if let Some(&t) = self.traces.get(tf) {
            return t;
        }
        let w = tf.word();
        let n = self.x.n() as f64;
        let t = if w.len() == 1 {
            self.x.get(w.letters()[0] as usize).diag().sum() / n
        } else {
            let last = *w.letters().last().unwrap() as usize;
            let head = w.slice(0, w.len() - 1);
            let xl = self.x.get(last);
            let h = if head.len() == 1 {
                self.x.get(head.letters()[0] as usize)
            } else {
                self.ensure(&head);
                &self.products[&head]
            };
            trace_product(h, xl) / n
        };
        self.traces.insert(tf.clone(), t);
        t
    }

    pub fn scalar(&mut self, traces: &[TraceFactor]) -> Complex64 {
        traces
            .iter()
            .fold(Complex64::new(1.0, 0.0), |acc, t| acc * self.trace(t))
    }

    /// `acc += c * w(x)`.
    fn add_word(&mut self, acc: &mut CMat, c: Complex64, w: &Word) {
        if w.is_empty() {
            for i in 0..acc.nrows() {
                acc[[i, i]] += c;
            }
        } else {
            let m = self.product(w);
            axpy(acc, c, m);
        }
    }

    pub fn eval(&mut self, p: &TracePoly) -> CMat {
        let n = self.x.n();
        let mut acc = CMat::zeros((n, n));
        for (m, c) in p.iter() {
            let s = *c * self.scalar(&m.traces);
            self.add_word(&mut acc, s, &m.outer);
        }
        acc
    }

    /// `Σ c·A(x) y_i B(x)·Πtr` for a degree-1 tensor.
    pub fn contract_free(&mut self, t: &TensorPoly, y: &HermTuple) -> CMat {
        let n = self.x.n();
        let mut acc = CMat::zeros((n, n));
        for (k, c) in t.iter() {
            let s = *c * self.scalar(&k.traces);
            let yi = y.get(k.indices[0] as usize);
            let (a, b) = (&k.words[0], &k.words[1]);
            let left = if a.is_empty() {
                yi.clone()
            } else {
                self.product(a).dot(yi)
            };
            if b.is_empty() {
                axpy(&mut acc, s, &left);
            } else {
                let r = left.dot(self.product(b));
                axpy(&mut acc, s, &r);
            }
        }
        acc
    }

    /// `Σ c·tr_N(D(x) y_i)·P(x)·Πtr` for a degree-1 tensor produced by `∂̃`.
    pub fn contract_tilde(&mut self, t: &TensorPoly, y: &HermTuple) -> CMat {
        let n = self.x.n();
        let mut acc = CMat::zeros((n, n));
        for (k, c) in t.iter() {
            let yi = y.get(k.indices[0] as usize);
            let d = &k.words[0];
            let tau = if d.is_empty() {
                yi.diag().sum() / n as f64
            } else {
                trace_product(self.product(d), yi) / n as f64
            };
            let s = *c * self.scalar(&k.traces) * tau;
            self.add_word(&mut acc, s, &k.words[1]);
        }
        acc
    }
}

fn check_shape(p_nvars: usize, x: &HermTuple) -> Result<()> {
    if p_nvars != x.d() {
        return Err(Error::ShapeMismatch(format!(
            "polynomial in {p_nvars} variables evaluated on a {}-tuple",
            x.d()
        )));
    }
    Ok(())
}

/// `p(x)` with trace factors evaluated by `tr_N`.
pub fn eval(p: &TracePoly, x: &HermTuple) -> Result<CMat> {
    check_shape(p.nvars(), x)?;
    Ok(Evaluator::new(x).eval(p))
}

/// `∂p(x) # y` for a degree-1 tensor of free-difference type.
pub fn eval_tensor_sharp(t: &TensorPoly, x: &HermTuple, y: &HermTuple) -> Result<CMat> {
    check_shape(t.nvars(), x)?;
    x.same_shape(y)?;
    if t.degree() != 1 {
        return Err(Error::ShapeMismatch("expected a degree-1 tensor".into()));
    }
    Ok(Evaluator::new(x).contract_free(t, y))
}

/// Precomputed `∂_i p` and `∂̃_i p` for repeated directional derivatives.
#[derive(Clone, Debug)]
pub struct DerivativePlan {
    nvars: usize,
    free: Vec<TensorPoly>,
    tilde: Vec<TensorPoly>,
    /// One term from each adjoint pair, weighted so that the Hermitian part gives `Dp`.
    paired: Option<(Vec<TensorPoly>, Vec<TensorPoly>)>,
}

/// `A ⊗ B ↦ B* ⊗ A*` with adjoint trace factors.
fn adjoint_term(t: &TensorTerm) -> TensorTerm {
    let words = t.words.iter().rev().map(|w| w.reversed()).collect();
    TensorTerm::new(
        t.indices.clone(),
        words,
        t.traces.iter().map(|f| f.adjoint()).collect(),
    )
}

/// Same as [`adjoint_term`] but keeps the slot order (`∂̃` pairs `tr(D·)P` with `tr(D*·)P*`).
fn adjoint_term_tilde(t: &TensorTerm) -> TensorTerm {
    TensorTerm::new(
        t.indices.clone(),
        t.words.iter().map(|w| w.reversed()).collect(),
        t.traces.iter().map(|f| f.adjoint()).collect(),
    )
}

/// Keeps the smaller term of each adjoint pair with weight 2 and self-adjoint terms with weight 1.
fn pair_terms(t: &TensorPoly, partner: fn(&TensorTerm) -> TensorTerm) -> Option<TensorPoly> {
    let terms = t.terms();
    let mut kept = Vec::new();
    for (k, c) in terms {
        let q = partner(k);
        let cq = terms.get(&q)?;
        if (cq - c.conj()).norm() > 1e-12 * (1.0 + c.norm()) {
            return None;
        }
        match q.cmp(k) {
            std::cmp::Ordering::Equal => kept.push((k.clone(), *c)),
            std::cmp::Ordering::Greater => kept.push((k.clone(), *c * 2.0)),
            std::cmp::Ordering::Less => {}
        }
    }
    Some(TensorPoly::from_terms(t.nvars(), t.degree(), kept))
}

impl DerivativePlan {
    pub fn new(p: &TracePoly) -> Self {
        let d = p.nvars();
        let free: Vec<TensorPoly> = (0..d).map(|i| diff_free(p, i).unwrap()).collect();
        let tilde: Vec<TensorPoly> = (0..d).map(|i| tilde_diff(p, i).unwrap()).collect();
        let paired = if p.is_self_adjoint(1e-12) {
            let f: Option<Vec<_>> = free.iter().map(|t| pair_terms(t, adjoint_term)).collect();
            let g: Option<Vec<_>> = tilde.iter().map(|t| pair_terms(t, adjoint_term_tilde)).collect();
            f.zip(g)
        } else {
            None
        };
        DerivativePlan {
            nvars: d,
            free,
            tilde,
            paired,
        }
    }

    /// Whether [`apply_hermitian`](Self::apply_hermitian) evaluates only half the terms.
    pub fn is_paired(&self) -> bool {
        self.paired.is_some()
    }

    /// [`apply`](Self::apply) for self-adjoint `p` at Hermitian `x` and `y`, where the result is
    /// Hermitian; evaluates one term of each adjoint pair.
    pub fn apply_hermitian(&self, ev: &mut Evaluator<'_>, y: &HermTuple) -> CMat {
        let Some((free, tilde)) = &self.paired else {
            return self.apply(ev, y);
        };
        let n = ev.point().n();
        let mut acc = CMat::zeros((n, n));
        for i in 0..self.nvars {
            if !free[i].is_zero() {
                axpy(&mut acc, ONE, &ev.contract_free(&free[i], y));
            }
            if !tilde[i].is_zero() {
                axpy(&mut acc, ONE, &ev.contract_tilde(&tilde[i], y));
            }
        }
        symmetrize(&mut acc);
        acc
    }

    pub fn is_zero(&self) -> bool {
        self.free.iter().chain(&self.tilde).all(|t| t.is_zero())
    }

    /// `Dp(x)[y] = Σ_i ∂_i p(x)#y_i + (τ⊗id)(∂̃_i p(x)#(y_i⊗1))`.
    pub fn apply(&self, ev: &mut Evaluator<'_>, y: &HermTuple) -> CMat {
        let n = ev.point().n();
        let mut acc = CMat::zeros((n, n));
        for i in 0..self.nvars {
            if !self.free[i].is_zero() {
                axpy(&mut acc, ONE, &ev.contract_free(&self.free[i], y));
            }
            if !self.tilde[i].is_zero() {
                axpy(&mut acc, ONE, &ev.contract_tilde(&self.tilde[i], y));
            }
        }
        acc
    }
}

/// Directional (Fréchet) derivative `d/dt p(x + t y)` at `t = 0`.
pub fn frechet_dir(p: &TracePoly, x: &HermTuple, y: &HermTuple) -> Result<Array2<Complex64>> {
    check_shape(p.nvars(), x)?;
    x.same_shape(y)?;
    let plan = DerivativePlan::new(p);
    Ok(plan.apply(&mut Evaluator::new(x), y))
}
