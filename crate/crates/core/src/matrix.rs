//! Hermitian matrix tuples, GUE sampling and spectral norms.

use nalgebra::DMatrix;
use ndarray::{Array2, Zip};
use num_complex::Complex64;
use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rng::{stream_rng, Rng};

pub type CMat = Array2<Complex64>;

/// Hermiticity tolerance for construction.
pub const HERM_TOL: f64 = 1e-12;

/// A `d`-tuple of `N×N` Hermitian matrices.
#[derive(Clone, Debug, PartialEq)]
pub struct HermTuple {
    n: usize,
    mats: Vec<CMat>,
}

impl HermTuple {
    pub fn new(mats: Vec<CMat>) -> Result<Self> {
        if mats.is_empty() {
            return Err(Error::EmptyAlphabet);
        }
        let n = mats[0].nrows();
        for (k, m) in mats.iter().enumerate() {
            if m.nrows() != n || m.ncols() != n {
                return Err(Error::ShapeMismatch(format!(
                    "matrix {} has shape {:?}, expected {n}x{n}",
                    k + 1,
                    m.dim()
                )));
            }
            let asym = asymmetry(m);
            if asym > HERM_TOL * (1.0 + max_abs(m)) {
                return Err(Error::NotSelfAdjoint(format!(
                    "matrix {} has asymmetry {asym:e}",
                    k + 1
                )));
            }
        }
        let mut t = HermTuple { n, mats };
        t.symmetrize();
        Ok(t)
    }

    /// Builds without checks and symmetrizes; for internal updates.
    pub(crate) fn from_raw(mats: Vec<CMat>) -> Self {
        let n = mats[0].nrows();
        let mut t = HermTuple { n, mats };
        t.symmetrize();
        t
    }

    pub fn zeros(n: usize, d: usize) -> Self {
        HermTuple {
            n,
            mats: vec![CMat::zeros((n, n)); d],
        }
    }

    /// Real diagonal matrices.
    pub fn diagonal(diags: &[Vec<f64>]) -> Result<Self> {
        let mats = diags
            .iter()
            .map(|d| CMat::from_diag(&ndarray::Array1::from_iter(d.iter().map(|&x| x.into()))))
            .collect();
        Self::new(mats)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.mats.len()
    }

    pub fn mats(&self) -> &[CMat] {
        &self.mats
    }

    pub fn get(&self, p: usize) -> &CMat {
        &self.mats[p]
    }

    pub fn into_mats(self) -> Vec<CMat> {
        self.mats
    }

    pub(crate) fn mats_mut(&mut self) -> &mut [CMat] {
        &mut self.mats
    }

    pub fn same_shape(&self, other: &HermTuple) -> Result<()> {
        if self.n != other.n || self.d() != other.d() {
            return Err(Error::ShapeMismatch(format!(
                "({}, {}) vs ({}, {})",
                self.d(),
                self.n,
                other.d(),
                other.n
            )));
        }
        Ok(())
    }

    /// Replaces every matrix by `(A + A*)/2`.
    pub fn symmetrize(&mut self) {
        for m in &mut self.mats {
            symmetrize(m);
        }
    }

    pub fn max_asymmetry(&self) -> f64 {
        self.mats.iter().map(asymmetry).fold(0.0, f64::max)
    }

    /// `self += a * other`.
    pub fn axpy(&mut self, a: f64, other: &HermTuple) {
        for (m, o) in self.mats.iter_mut().zip(&other.mats) {
            axpy(m, Complex64::new(a, 0.0), o);
        }
    }

    pub fn scaled(&self, a: f64) -> HermTuple {
        HermTuple {
            n: self.n,
            mats: self.mats.iter().map(|m| m * Complex64::new(a, 0.0)).collect(),
        }
    }

    pub fn add(&self, other: &HermTuple) -> HermTuple {
        let mut out = self.clone();
        out.axpy(1.0, other);
        out
    }

    pub fn sub(&self, other: &HermTuple) -> HermTuple {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    /// `Σ_p Re Tr(A_p B_p)`, the real inner product on Hermitian tuples.
    pub fn inner(&self, other: &HermTuple) -> f64 {
        self.mats
            .iter()
            .zip(&other.mats)
            .map(|(a, b)| trace_product(a, b).re)
            .sum()
    }

    /// `sqrt(Σ_p tr_N(A_p A_p*))`.
    pub fn norm_normalized(&self) -> f64 {
        (self.mats.iter().map(frobenius_sq).sum::<f64>() / self.n as f64).sqrt()
    }

    /// Largest operator norm over the tuple.
    pub fn max_spectral_norm(&self) -> f64 {
        self.mats.iter().map(spectral_norm).fold(0.0, f64::max)
    }

    /// `u A u*` for each matrix.
    pub fn conjugate(&self, u: &CMat) -> HermTuple {
        let ustar = adjoint(u);
        HermTuple::from_raw(self.mats.iter().map(|m| u.dot(m).dot(&ustar)).collect())
    }

    pub fn is_finite(&self) -> bool {
        self.mats
            .iter()
            .all(|m| m.iter().all(|z| z.re.is_finite() && z.im.is_finite()))
    }
}

pub fn adjoint(m: &CMat) -> CMat {
    m.t().mapv(|z| z.conj())
}

pub fn symmetrize(m: &mut CMat) {
    let n = m.nrows();
    if let Some(s) = m.as_slice_mut() {
        for i in 0..n {
            s[i * n + i].im = 0.0;
            for j in (i + 1)..n {
                let a = (s[i * n + j] + s[j * n + i].conj()) * 0.5;
                s[i * n + j] = a;
                s[j * n + i] = a.conj();
            }
        }
        return;
    }
    for i in 0..n {
        m[[i, i]].im = 0.0;
        for j in (i + 1)..n {
            let a = (m[[i, j]] + m[[j, i]].conj()) * 0.5;
            m[[i, j]] = a;
            m[[j, i]] = a.conj();
        }
    }
}

fn asymmetry(m: &CMat) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[[i, j]] - m[[j, i]].conj()).norm());
        }
    }
    worst
}

fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// `Tr(AB)` without forming the product.
pub fn trace_product(a: &CMat, b: &CMat) -> Complex64 {
    let (r, c) = a.dim();
    if let (Some(x), Some(y)) = (a.as_slice(), b.as_slice()) {
        let mut s = Complex64::new(0.0, 0.0);
        for i in 0..r {
            let row = &x[i * c..(i + 1) * c];
            for (j, &aij) in row.iter().enumerate() {
                s += aij * y[j * r + i];
            }
        }
        return s;
    }
    let mut s = Complex64::new(0.0, 0.0);
    Zip::from(a).and(&b.t()).for_each(|x, y| s += x * y);
    s
}

/// `acc += c * m`.
pub fn axpy(acc: &mut CMat, c: Complex64, m: &CMat) {
    if let (Some(a), Some(b)) = (acc.as_slice_mut(), m.as_slice()) {
        if c.im == 0.0 {
            for (a, &b) in a.iter_mut().zip(b) {
                *a += b * c.re;
            }
        } else {
            for (a, &b) in a.iter_mut().zip(b) {
                *a += b * c;
            }
        }
    } else {
        acc.scaled_add(c, m);
    }
}

/// `Σ |a_ij|²`.
pub fn frobenius_sq(a: &CMat) -> f64 {
    match a.as_slice_memory_order() {
        Some(x) => x.iter().map(|z| z.norm_sqr()).sum(),
        None => a.iter().map(|z| z.norm_sqr()).sum(),
    }
}

/// Normalized trace `tr_N`.
pub fn tr_n(a: &CMat) -> Complex64 {
    a.diag().sum() / a.nrows() as f64
}

/// Fills an `N×N` GUE matrix with entry variances `scale²/N` (diagonal) and `scale²/(2N)` per real part.
pub fn gue_matrix(rng: &mut Rng, n: usize, scale: f64) -> CMat {
    let mut m = vec![Complex64::new(0.0, 0.0); n * n];
    let sd = scale / (n as f64).sqrt();
    let so = scale / (2.0 * n as f64).sqrt();
    for i in 0..n {
        let g: f64 = rng.sample(StandardNormal);
        m[i * n + i] = Complex64::new(sd * g, 0.0);
        for j in (i + 1)..n {
            let a: f64 = rng.sample(StandardNormal);
            let b: f64 = rng.sample(StandardNormal);
            let z = Complex64::new(so * a, so * b);
            m[i * n + j] = z;
            m[j * n + i] = z.conj();
        }
    }
    CMat::from_shape_vec((n, n), m).expect("n*n entries")
}

pub fn gue_tuple(rng: &mut Rng, n: usize, d: usize, scale: f64) -> HermTuple {
    HermTuple {
        n,
        mats: (0..d).map(|_| gue_matrix(rng, n, scale)).collect(),
    }
}

/// Independent GUE matrices, deterministic per seed.
pub fn sample_gue(n: usize, d: usize, seed: u64) -> Result<HermTuple> {
    if n == 0 || d == 0 {
        return Err(Error::InvalidParameter("N and d must be positive".into()));
    }
    let mut rng = stream_rng(seed, &[]);
    Ok(gue_tuple(&mut rng, n, d, 1.0))
}

fn to_nalgebra(m: &CMat) -> DMatrix<Complex64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[[i, j]])
}

/// Largest singular value; eigenvalues are used when the matrix is Hermitian.
pub fn spectral_norm(m: &CMat) -> f64 {
    let a = to_nalgebra(m);
    if m.nrows() == m.ncols() && asymmetry(m) <= 1e-10 * (1.0 + max_abs(m)) {
        a.symmetric_eigenvalues()
            .iter()
            .map(|x| x.abs())
            .fold(0.0, f64::max)
    } else {
        a.singular_values().iter().copied().fold(0.0, f64::max)
    }
}

/// Eigenvalues of a Hermitian matrix in ascending order.
pub fn hermitian_eigenvalues(m: &CMat) -> Vec<f64> {
    let mut v: Vec<f64> = to_nalgebra(m).symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

/// A Haar-distributed unitary from the QR factorization of a complex Ginibre matrix.
pub fn random_unitary(rng: &mut Rng, n: usize) -> CMat {
    let g = DMatrix::from_fn(n, n, |_, _| {
        let a: f64 = rng.sample(StandardNormal);
        let b: f64 = rng.sample(StandardNormal);
        Complex64::new(a, b)
    });
    let qr = g.qr();
    let q = qr.q();
    let r = qr.r();
    let mut out = CMat::zeros((n, n));
    for j in 0..n {
        let d = r[(j, j)];
        let ph = if d.norm() > 0.0 { d / d.norm() } else { 1.0.into() };
        for i in 0..n {
            out[[i, j]] = q[(i, j)] * ph;
        }
    }
    out
}
