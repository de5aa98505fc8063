use std::cmp::Ordering;
use std::fmt;

/// A noncommutative monomial: a sequence of 0-based variable indices.
#[derive(Clone, Default, PartialEq, Eq, Hash)]
pub struct Word(Vec<u8>);

impl Word {
    pub fn unit() -> Self {
        Word(Vec::new())
    }

    pub fn letter(i: usize) -> Self {
        Word(vec![i as u8])
    }

    pub fn from_letters<I: IntoIterator<Item = usize>>(it: I) -> Self {
        Word(it.into_iter().map(|i| i as u8).collect())
    }

    pub fn letters(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn max_letter(&self) -> Option<usize> {
        self.0.iter().max().map(|&l| l as usize)
    }

    pub fn concat(&self, other: &Word) -> Word {
        let mut v = Vec::with_capacity(self.len() + other.len());
        v.extend_from_slice(&self.0);
        v.extend_from_slice(&other.0);
        Word(v)
    }

    pub fn slice(&self, start: usize, end: usize) -> Word {
        Word(self.0[start..end].to_vec())
    }

    pub fn reversed(&self) -> Word {
        Word(self.0.iter().rev().copied().collect())
    }

    /// `w[k+1..] ++ w[..k]`: the word left after cutting out position `k` and rotating.
    pub fn rotate_out(&self, k: usize) -> Word {
        let mut v = Vec::with_capacity(self.len() - 1);
        v.extend_from_slice(&self.0[k + 1..]);
        v.extend_from_slice(&self.0[..k]);
        Word(v)
    }

    /// Splits `w = A X_i B` at every occurrence of letter `i`.
    pub fn splits(&self, i: usize) -> impl Iterator<Item = (Word, Word)> + '_ {
        self.0
            .iter()
            .enumerate()
            .filter(move |(_, &l)| l as usize == i)
            .map(move |(k, _)| (self.slice(0, k), self.slice(k + 1, self.len())))
    }

    /// Cyclic derivative of a single word: sum over occurrences of `i`.
    pub fn cyclic_grad(&self, i: usize) -> Vec<Word> {
        (0..self.len())
            .filter(|&k| self.0[k] as usize == i)
            .map(|k| self.rotate_out(k))
            .collect()
    }

    pub fn power(&self, n: u32) -> Word {
        Word(self.0.repeat(n as usize))
    }
}

impl Ord for Word {
    fn cmp(&self, other: &Self) -> Ordering {
        self.len()
            .cmp(&other.len())
            .then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for Word {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "1");
        }
        let mut k = 0;
        let mut first = true;
        while k < self.0.len() {
            let l = self.0[k];
            let mut run = 1;
            while k + run < self.0.len() && self.0[k + run] == l {
                run += 1;
            }
            if !first {
                write!(f, "*")?;
            }
            first = false;
            write!(f, "X{}", l as usize + 1)?;
            if run > 1 {
                write!(f, "^{run}")?;
            }
            k += run;
        }
        Ok(())
    }
}

impl fmt::Debug for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

/// A trace class `tr(w)` stored as the lexicographically minimal rotation of a nonempty word.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TraceFactor(Word);

impl TraceFactor {
    /// Returns `None` for the unit word, whose trace is the scalar 1.
    pub fn new(w: &Word) -> Option<TraceFactor> {
        if w.is_empty() {
            None
        } else {
            Some(TraceFactor(min_rotation(w)))
        }
    }

    pub fn word(&self) -> &Word {
        &self.0
    }

    pub fn degree(&self) -> usize {
        self.0.len()
    }

    /// `tr(w)* = tr(w reversed)` for self-adjoint letters.
    pub fn adjoint(&self) -> TraceFactor {
        TraceFactor(min_rotation(&self.0.reversed()))
    }
}

impl fmt::Display for TraceFactor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "tr({})", self.0)
    }
}

impl fmt::Debug for TraceFactor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

fn min_rotation(w: &Word) -> Word {
    let l = w.letters();
    let n = l.len();
    let mut best = 0;
    for r in 1..n {
        for k in 0..n {
            let a = l[(r + k) % n];
            let b = l[(best + k) % n];
            if a != b {
                if a < b {
                    best = r;
                }
                break;
            }
        }
    }
    Word((0..n).map(|k| l[(best + k) % n]).collect())
}

/// Canonical trace class of a word; `None` stands for the scalar `tr(1) = 1`.
pub fn cyclic_normalize(w: &Word) -> Option<TraceFactor> {
    TraceFactor::new(w)
}
