#![allow(dead_code)]

use multimatrix::algebra::{Monomial, TraceFactor, TracePoly, Word};
use multimatrix::matrix::{gue_tuple, CMat, HermTuple};
use multimatrix::rng::{stream_rng, Rng};
use num_complex::Complex64;
use rand::Rng as _;

pub fn rng(seed: u64) -> Rng {
    stream_rng(seed, &[0xdead])
}

pub fn rand_word(rng: &mut Rng, d: usize, len: usize) -> Word {
    Word::from_letters((0..len).map(|_| rng.random_range(0..d)))
}

/// Random trace polynomial of total degree at most `max_deg` with at least one nonconstant term.
pub fn rand_poly(rng: &mut Rng, d: usize, max_deg: usize, max_terms: usize, integer: bool) -> TracePoly {
    loop {
        let nterms = rng.random_range(1..=max_terms);
        let mut terms = Vec::new();
        for _ in 0..nterms {
            let deg = rng.random_range(0..=max_deg);
            let ntr = if deg >= 2 { rng.random_range(0..=2usize) } else { 0 };
            let mut left = deg;
            let mut traces = Vec::new();
            for _ in 0..ntr {
                if left < 2 {
                    break;
                }
                let l = rng.random_range(1..=left.min(3));
                traces.extend(TraceFactor::new(&rand_word(rng, d, l)));
                left -= l;
            }
            let outer = rand_word(rng, d, left);
            let c = if integer {
                Complex64::new(
                    rng.random_range(-3..=3) as f64,
                    rng.random_range(-1..=1) as f64,
                )
            } else {
                Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
            };
            terms.push((Monomial::new(outer, traces), c));
        }
        let p = TracePoly::from_terms(d, terms);
        if p.degree() >= 1 {
            return p;
        }
    }
}

pub fn rand_herm(rng: &mut Rng, n: usize, d: usize) -> HermTuple {
    gue_tuple(rng, n, d, 1.0)
}

fn naive_mul(a: &CMat, b: &CMat) -> CMat {
    let n = a.nrows();
    let mut c = CMat::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            let mut s = Complex64::default();
            for k in 0..n {
                s += a[[i, k]] * b[[k, j]];
            }
            c[[i, j]] = s;
        }
    }
    c
}

pub fn naive_word(w: &Word, x: &HermTuple) -> CMat {
    let n = x.n();
    let mut m = CMat::eye(n);
    for &l in w.letters() {
        m = naive_mul(&m, x.get(l as usize));
    }
    m
}

pub fn naive_tr(m: &CMat) -> Complex64 {
    let n = m.nrows();
    (0..n).map(|i| m[[i, i]]).sum::<Complex64>() / n as f64
}

/// Term-by-term re-expansion with plain loops.
pub fn naive_eval(p: &TracePoly, x: &HermTuple) -> CMat {
    let n = x.n();
    let mut acc = CMat::zeros((n, n));
    for (m, c) in p.iter() {
        let mut s = *c;
        for t in &m.traces {
            s *= naive_tr(&naive_word(t.word(), x));
        }
        acc = acc + naive_word(&m.outer, x) * s;
    }
    acc
}

pub fn fro(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn rel_err(a: &CMat, b: &CMat) -> f64 {
    fro(&(a - b)) / fro(b).max(1e-300)
}

pub fn self_adjoint_part(p: &TracePoly) -> TracePoly {
    (p + &p.adjoint()).scale_re(0.5)
}
