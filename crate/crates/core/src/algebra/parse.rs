//! Text grammar for trace polynomials.
//!
//! ```text
//! poly    := ['+'|'-'] term (('+'|'-') term)*
//! term    := factor ('*' factor)*
//! factor  := number ['i'] | '(' number [('+'|'-') number 'i'] ')' | 'X'k ['^' n]
//!          | 'tr' '(' word ')' ['^' n] | '1'
//! word    := ('X'k ['^' n] | '1') ('*' ...)*
//! ```

use num_complex::Complex64;

use super::poly::{Monomial, TracePoly};
use super::word::{TraceFactor, Word};
use crate::error::{Error, Result};

/// Parses with an explicit alphabet size.
pub fn parse(s: &str, nvars: usize) -> Result<TracePoly> {
    if nvars == 0 {
        return Err(Error::EmptyAlphabet);
    }
    let terms = Parser::new(s).poly()?;
    let max = terms
        .iter()
        .filter_map(|(m, _)| m.max_letter())
        .max();
    if let Some(l) = max {
        if l >= nvars {
            return Err(Error::VariableOutOfRange { index: l + 1, nvars });
        }
    }
    Ok(TracePoly::from_terms(nvars, terms))
}

/// Parses and takes the alphabet size from the largest variable index (at least 1).
pub fn parse_infer(s: &str) -> Result<TracePoly> {
    let terms = Parser::new(s).poly()?;
    let nvars = terms
        .iter()
        .filter_map(|(m, _)| m.max_letter())
        .max()
        .map_or(1, |l| l + 1);
    Ok(TracePoly::from_terms(nvars, terms))
}

/// Parses a bare word such as `X1*X2^3`.
pub fn parse_word(s: &str) -> Result<Word> {
    let mut p = Parser::new(s);
    let w = p.word()?;
    p.skip_ws();
    if p.pos < p.src.len() {
        return Err(p.err("trailing input"));
    }
    Ok(w)
}

impl std::str::FromStr for TracePoly {
    type Err = Error;
    fn from_str(s: &str) -> Result<TracePoly> {
        parse_infer(s)
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn new(s: &'a str) -> Self {
        Parser {
            src: s.as_bytes(),
            pos: 0,
        }
    }

    fn err(&self, msg: &str) -> Error {
        Error::Parse {
            pos: self.pos,
            msg: msg.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: u8) -> Result<()> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.err(&format!("expected '{}'", c as char)))
        }
    }

    fn poly(&mut self) -> Result<Vec<(Monomial, Complex64)>> {
        let mut out = Vec::new();
        let mut sign = 1.0;
        if self.eat(b'-') {
            sign = -1.0;
        } else {
            self.eat(b'+');
        }
        loop {
            let (m, c) = self.term()?;
            out.push((m, c * sign));
            if self.eat(b'+') {
                sign = 1.0;
            } else if self.eat(b'-') {
                sign = -1.0;
            } else {
                break;
            }
        }
        if self.peek().is_some() {
            return Err(self.err("unexpected character"));
        }
        Ok(out)
    }

    fn term(&mut self) -> Result<(Monomial, Complex64)> {
        let mut coef = Complex64::new(1.0, 0.0);
        let mut outer = Word::unit();
        let mut traces: Vec<TraceFactor> = Vec::new();
        loop {
            match self.peek() {
                Some(b'X') => {
                    let w = self.var_power()?;
                    outer = outer.concat(&w);
                }
                Some(b't') => {
                    self.keyword("tr")?;
                    self.expect(b'(')?;
                    let w = self.word()?;
                    self.expect(b')')?;
                    let n = self.exponent()?;
                    if let Some(tf) = TraceFactor::new(&w) {
                        traces.extend(std::iter::repeat_n(tf, n as usize));
                    }
                }
                Some(b'(') => {
                    self.pos += 1;
                    coef *= self.paren_complex()?;
                }
                Some(c) if c.is_ascii_digit() || c == b'.' => {
                    let v = self.number()?;
                    if self.src.get(self.pos) == Some(&b'i') {
                        self.pos += 1;
                        coef *= Complex64::new(0.0, v);
                    } else {
                        coef *= v;
                    }
                }
                Some(b'i') => {
                    self.pos += 1;
                    coef *= Complex64::new(0.0, 1.0);
                }
                _ => return Err(self.err("expected a factor")),
            }
            if !self.eat(b'*') {
                break;
            }
        }
        Ok((Monomial::new(outer, traces), coef))
    }

    fn keyword(&mut self, kw: &str) -> Result<()> {
        self.skip_ws();
        if self.src[self.pos..].starts_with(kw.as_bytes()) {
            self.pos += kw.len();
            Ok(())
        } else {
            Err(self.err(&format!("expected '{kw}'")))
        }
    }

    fn word(&mut self) -> Result<Word> {
        let mut w = Word::unit();
        loop {
            match self.peek() {
                Some(b'X') => w = w.concat(&self.var_power()?),
                Some(b'1') => {
                    self.pos += 1;
                }
                _ => return Err(self.err("expected a variable")),
            }
            if !self.eat(b'*') {
                break;
            }
        }
        Ok(w)
    }

    fn var_power(&mut self) -> Result<Word> {
        self.expect(b'X')?;
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        let idx: usize = std::str::from_utf8(&self.src[start..self.pos])
            .unwrap()
            .parse()
            .map_err(|_| self.err("expected a variable index"))?;
        if idx == 0 || idx > 255 {
            return Err(self.err("variable index must be in 1..=255"));
        }
        let n = self.exponent()?;
        Ok(Word::letter(idx - 1).power(n))
    }

    fn exponent(&mut self) -> Result<u32> {
        if !self.eat(b'^') {
            return Ok(1);
        }
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        std::str::from_utf8(&self.src[start..self.pos])
            .unwrap()
            .parse()
            .map_err(|_| self.err("expected an integer exponent"))
    }

    fn number(&mut self) -> Result<f64> {
        self.skip_ws();
        let start = self.pos;
        let s = self.src;
        let digits = |p: &mut usize| {
            while *p < s.len() && s[*p].is_ascii_digit() {
                *p += 1;
            }
        };
        digits(&mut self.pos);
        if self.pos < s.len() && s[self.pos] == b'.' {
            self.pos += 1;
            digits(&mut self.pos);
        }
        if self.pos < s.len() && (s[self.pos] == b'e' || s[self.pos] == b'E') {
            let save = self.pos;
            self.pos += 1;
            if self.pos < s.len() && (s[self.pos] == b'+' || s[self.pos] == b'-') {
                self.pos += 1;
            }
            let before = self.pos;
            digits(&mut self.pos);
            if self.pos == before {
                self.pos = save;
            }
        }
        std::str::from_utf8(&s[start..self.pos])
            .unwrap()
            .parse()
            .map_err(|_| Error::Parse {
                pos: start,
                msg: "malformed number".into(),
            })
    }

    /// After '(' : `a`, `bi`, `a+bi`, `a-bi`, each part optionally signed.
    fn paren_complex(&mut self) -> Result<Complex64> {
        let mut z = Complex64::new(0.0, 0.0);
        let mut sign = if self.eat(b'-') {
            -1.0
        } else {
            self.eat(b'+');
            1.0
        };
        loop {
            let v = if self.peek() == Some(b'i') {
                1.0
            } else {
                self.number()?
            };
            if self.src.get(self.pos) == Some(&b'i') {
                self.pos += 1;
                z.im += sign * v;
            } else {
                z.re += sign * v;
            }
            if self.eat(b'+') {
                sign = 1.0;
            } else if self.eat(b'-') {
                sign = -1.0;
            } else {
                break;
            }
        }
        self.expect(b')')?;
        Ok(z)
    }
}
