//! Free semicircular families: moments, Schwinger–Dyson residuals and conditional expectations.

use std::collections::HashMap;

use num_bigint::BigInt;
use num_complex::{Complex, Complex64};
use num_traits::{One, ToPrimitive, Zero};

use crate::algebra::{diff_free, TracePoly, Word};
use crate::error::{Error, Result};

/// Semicircular family with covariance `c[i][j] = τ(x_i x_j)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SemicircleFamily {
    cov: Vec<Vec<f64>>,
}

impl SemicircleFamily {
    pub fn standard(d: usize) -> Self {
        let cov = (0..d)
            .map(|i| (0..d).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        SemicircleFamily { cov }
    }

    /// Checks symmetry and positive semidefiniteness.
    pub fn with_covariance(cov: Vec<Vec<f64>>) -> Result<Self> {
        let d = cov.len();
        if d == 0 {
            return Err(Error::EmptyAlphabet);
        }
        for row in &cov {
            if row.len() != d {
                return Err(Error::ShapeMismatch("covariance must be square".into()));
            }
        }
        for i in 0..d {
            for j in 0..d {
                if (cov[i][j] - cov[j][i]).abs() > 1e-12 {
                    return Err(Error::InvalidParameter("covariance not symmetric".into()));
                }
            }
        }
        let m = nalgebra::DMatrix::from_fn(d, d, |i, j| cov[i][j]);
        let min = m.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min);
        if min < -1e-12 {
            return Err(Error::InvalidParameter(format!(
                "covariance not positive semidefinite (eigenvalue {min:e})"
            )));
        }
        Ok(SemicircleFamily { cov })
    }

    pub fn d(&self) -> usize {
        self.cov.len()
    }

    pub fn cov(&self, i: usize, j: usize) -> f64 {
        self.cov[i][j]
    }

    pub fn is_standard(&self) -> bool {
        *self == Self::standard(self.d())
    }

    fn integer_cov(&self) -> Option<Vec<Vec<BigInt>>> {
        self.cov
            .iter()
            .map(|row| {
                row.iter()
                    .map(|&c| (c.fract() == 0.0 && c.abs() < 9e15).then(|| BigInt::from(c as i64)))
                    .collect()
            })
            .collect()
    }

    fn check_word(&self, w: &Word) -> Result<()> {
        match w.max_letter() {
            Some(l) if l >= self.d() => Err(Error::VariableOutOfRange {
                index: l + 1,
                nvars: self.d(),
            }),
            _ => Ok(()),
        }
    }
}

/// Interval recursion over non-crossing pairings: the first position pairs with an odd offset.
fn nc_moment<T, F>(w: &[u8], weight: F) -> T
where
    T: Clone + Zero + One + std::ops::Mul<Output = T>,
    F: Fn(u8, u8) -> T,
{
    let n = w.len();
    if n % 2 == 1 {
        return T::zero();
    }
    // memo[a][len] for even lengths
    let mut memo: Vec<Vec<T>> = vec![vec![T::zero(); n + 1]; n + 1];
    for a in 0..=n {
        memo[a][0] = T::one();
    }
    for len in (2..=n).step_by(2) {
        for a in 0..=(n - len) {
            let mut s = T::zero();
            let mut j = a + 1;
            while j < a + len {
                let inner = memo[a + 1][j - a - 1].clone();
                let outer = memo[j + 1][a + len - j - 1].clone();
                s = s + weight(w[a], w[j]) * inner * outer;
                j += 2;
            }
            memo[a][len] = s;
        }
    }
    memo[0][n].clone()
}

/// `τ(w)` for the family, summing over non-crossing pair partitions.
pub fn tau_word(w: &Word, fam: &SemicircleFamily) -> Result<f64> {
    fam.check_word(w)?;
    Ok(nc_moment(w.letters(), |a, b| fam.cov[a as usize][b as usize]))
}

/// Exact `τ(w)` when every covariance entry is an integer.
pub fn tau_word_exact(w: &Word, fam: &SemicircleFamily) -> Result<BigInt> {
    fam.check_word(w)?;
    let cov = fam.integer_cov().ok_or(Error::NotExact)?;
    Ok(nc_moment(w.letters(), |a, b| cov[a as usize][b as usize].clone()))
}

/// `τ(p)`: outer word and each trace factor evaluated by [`tau_word`] and multiplied.
pub fn tau_trace_poly(p: &TracePoly, fam: &SemicircleFamily) -> Result<Complex64> {
    let mut cache: HashMap<Word, f64> = HashMap::new();
    let mut tau = |w: &Word| -> Result<f64> {
        if let Some(&v) = cache.get(w) {
            return Ok(v);
        }
        let v = tau_word(w, fam)?;
        cache.insert(w.clone(), v);
        Ok(v)
    };
    let mut s = Complex64::new(0.0, 0.0);
    for (m, c) in p.iter() {
        let mut v = tau(&m.outer)?;
        for t in &m.traces {
            v *= tau(t.word())?;
        }
        s += c * v;
    }
    Ok(s)
}

pub type GaussianInt = Complex<BigInt>;

pub(crate) fn exact_coeff(c: Complex64) -> Result<GaussianInt> {
    let conv = |x: f64| {
        (x.fract() == 0.0 && x.abs() < 9e15)
            .then(|| BigInt::from(x as i64))
            .ok_or(Error::NotExact)
    };
    Ok(Complex::new(conv(c.re)?, conv(c.im)?))
}

/// Exact `τ(p)` for Gaussian-integer coefficients and integer covariances.
pub fn tau_trace_poly_exact(p: &TracePoly, fam: &SemicircleFamily) -> Result<GaussianInt> {
    let mut s = GaussianInt::zero();
    for (m, c) in p.iter() {
        let mut v = tau_word_exact(&m.outer, fam)?;
        for t in &m.traces {
            v *= tau_word_exact(t.word(), fam)?;
        }
        let c = exact_coeff(*c)?;
        s = s + Complex::new(c.re * &v, c.im * &v);
    }
    Ok(s)
}

fn check_standard(f: &TracePoly, e: usize, fam: &SemicircleFamily) -> Result<()> {
    if !fam.is_standard() {
        return Err(Error::InvalidParameter(
            "Schwinger–Dyson residual needs a standard family".into(),
        ));
    }
    if f.nvars() > fam.d() || e >= f.nvars() {
        return Err(Error::VariableOutOfRange {
            index: e + 1,
            nvars: f.nvars().min(fam.d()),
        });
    }
    Ok(())
}

/// `τ(x_e f) − τ⊗τ(∂_e f)`.
pub fn sd_residual(f: &TracePoly, e: usize, fam: &SemicircleFamily) -> Result<Complex64> {
    check_standard(f, e, fam)?;
    let lhs = tau_trace_poly(&(&TracePoly::var(f.nvars(), e) * f), fam)?;
    let mut rhs = Complex64::new(0.0, 0.0);
    for (t, c) in diff_free(f, e)?.iter() {
        let mut v = tau_word(&t.words[0], fam)? * tau_word(&t.words[1], fam)?;
        for tf in &t.traces {
            v *= tau_word(tf.word(), fam)?;
        }
        rhs += c * v;
    }
    Ok(lhs - rhs)
}

/// Exact residual for Gaussian-integer coefficients.
pub fn sd_residual_exact(f: &TracePoly, e: usize, fam: &SemicircleFamily) -> Result<GaussianInt> {
    check_standard(f, e, fam)?;
    let lhs = tau_trace_poly_exact(&(&TracePoly::var(f.nvars(), e) * f), fam)?;
    let mut rhs = GaussianInt::zero();
    for (t, c) in diff_free(f, e)?.iter() {
        let mut v = tau_word_exact(&t.words[0], fam)? * tau_word_exact(&t.words[1], fam)?;
        for tf in &t.traces {
            v *= tau_word_exact(tf.word(), fam)?;
        }
        let c = exact_coeff(*c)?;
        rhs = rhs + Complex::new(c.re * &v, c.im * &v);
    }
    Ok(lhs - rhs)
}

/// Conditional expectation onto the variables not listed in `y_labels`.
///
/// `y_labels` are 0-based variable indices; `y_fam` gives their covariance in the listed order.
/// The result keeps the original alphabet but contains no `y` letters.
pub fn cond_exp(p: &TracePoly, y_labels: &[usize], y_fam: &SemicircleFamily) -> Result<TracePoly> {
    if y_labels.len() != y_fam.d() {
        return Err(Error::ShapeMismatch(format!(
            "{} y-labels but a family of size {}",
            y_labels.len(),
            y_fam.d()
        )));
    }
    let d = p.nvars();
    let mut slot = vec![None; d];
    for (k, &l) in y_labels.iter().enumerate() {
        if l >= d {
            return Err(Error::VariableOutOfRange { index: l + 1, nvars: d });
        }
        if slot[l].replace(k).is_some() {
            return Err(Error::InvalidParameter(format!("duplicate y-label {}", l + 1)));
        }
    }
    let mut ce = CondExp {
        d,
        slot,
        fam: y_fam,
        memo: HashMap::new(),
    };
    let mut out = TracePoly::zero(d);
    for (m, c) in p.iter() {
        let mut term = ce.word(&m.outer).scale(*c);
        for t in &m.traces {
            term = &term * &ce.word(t.word()).trace();
        }
        out = &out + &term;
    }
    Ok(out)
}

struct CondExp<'a> {
    d: usize,
    slot: Vec<Option<usize>>,
    fam: &'a SemicircleFamily,
    memo: HashMap<Word, TracePoly>,
}

impl CondExp<'_> {
    fn word(&mut self, w: &Word) -> TracePoly {
        if let Some(p) = self.memo.get(w) {
            return p.clone();
        }
        let l = w.letters();
        let result = match l.iter().rposition(|&x| self.slot[x as usize].is_some()) {
            None => TracePoly::word(self.d, w.clone()),
            Some(k) => {
                let tail = TracePoly::word(self.d, w.slice(k + 1, w.len()));
                let g = self.slot[l[k] as usize].unwrap();
                let mut acc = TracePoly::zero(self.d);
                for h in 0..k {
                    if let Some(hs) = self.slot[l[h] as usize] {
                        let c = self.fam.cov(hs, g);
                        if c == 0.0 {
                            continue;
                        }
                        let a = self.word(&w.slice(0, h));
                        let b = self.word(&w.slice(h + 1, k)).trace();
                        acc = &acc + &(&a * &b).scale_re(c);
                    }
                }
                &acc * &tail
            }
        };
        self.memo.insert(w.clone(), result.clone());
        result
    }
}

/// Catalan number `C_n` as an exact integer.
pub fn catalan(n: u32) -> BigInt {
    let mut c = BigInt::one();
    for k in 0..n {
        c = c * BigInt::from(2 * (2 * k + 1)) / BigInt::from(k + 2);
    }
    c
}

/// Converts an exact Gaussian integer to floating point.
pub fn gaussian_to_f64(z: &GaussianInt) -> Complex64 {
    Complex64::new(z.re.to_f64().unwrap_or(f64::NAN), z.im.to_f64().unwrap_or(f64::NAN))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::parse;

    #[test]
    fn catalan_moments() {
        let fam = SemicircleFamily::standard(1);
        for n in 0..=8u32 {
            let w = Word::letter(0).power(2 * n);
            assert_eq!(tau_word_exact(&w, &fam).unwrap(), catalan(n));
        }
        assert_eq!(tau_word(&Word::letter(0), &fam).unwrap(), 0.0);
        assert_eq!(catalan(3), BigInt::from(5));
    }

    #[test]
    fn crossing_word_vanishes() {
        let fam = SemicircleFamily::standard(2);
        let w = Word::from_letters([0, 1, 0, 1]);
        assert_eq!(tau_word(&w, &fam).unwrap(), 0.0);
    }

    #[test]
    fn trace_poly_values() {
        let fam = SemicircleFamily::standard(1);
        let p = parse("tr(X1^2)*X1^2", 1).unwrap();
        assert_eq!(tau_trace_poly(&p, &fam).unwrap(), Complex64::new(1.0, 0.0));
        assert_eq!(
            tau_trace_poly(&TracePoly::one(1), &fam).unwrap(),
            Complex64::new(1.0, 0.0)
        );
    }

    #[test]
    fn sd_examples() {
        let fam = SemicircleFamily::standard(2);
        let f = parse("X1^3", 2).unwrap();
        assert!(sd_residual_exact(&f, 0, &fam).unwrap().is_zero());
        let g = parse("X2", 2).unwrap();
        assert!(sd_residual(&g, 0, &fam).unwrap().norm() == 0.0);
    }

    #[test]
    fn cond_exp_examples() {
        // X1 is x, X2 is y
        let fam = SemicircleFamily::standard(1);
        let p = parse("X2*X1*X2", 2).unwrap();
        assert_eq!(cond_exp(&p, &[1], &fam).unwrap(), parse("tr(X1)", 2).unwrap());
        let q = parse("X2^2", 2).unwrap();
        assert_eq!(cond_exp(&q, &[1], &fam).unwrap(), TracePoly::one(2));
        // X1, X2 are x; X3 is y
        let r = parse("X1*X3*X2*X3", 3).unwrap();
        assert_eq!(
            cond_exp(&r, &[2], &fam).unwrap(),
            parse("tr(X2)*X1", 3).unwrap()
        );
    }
}
