use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

use super::OrbitError;

/// Sparse integer polynomial in `nvars` variables `x0, x1, ...`.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Polynomial {
    nvars: usize,
    /// exponent vector -> coefficient, zero coefficients removed
    terms: BTreeMap<Vec<u32>, BigInt>,
}

impl Polynomial {
    pub fn from_terms(nvars: usize, terms: impl IntoIterator<Item = (BigInt, Vec<u32>)>) -> Result<Self, OrbitError> {
        let mut map: BTreeMap<Vec<u32>, BigInt> = BTreeMap::new();
        for (c, e) in terms {
            if e.len() != nvars {
                return Err(OrbitError::Dimension(format!(
                    "monomial with {} exponents in a {nvars}-variable polynomial",
                    e.len()
                )));
            }
            *map.entry(e).or_default() += c;
        }
        map.retain(|_, c| !c.is_zero());
        Ok(Self { nvars, terms: map })
    }

    pub fn constant(nvars: usize, c: i64) -> Self {
        Self::from_terms(nvars, [(BigInt::from(c), vec![0; nvars])]).expect("well formed")
    }

    pub fn coordinate(nvars: usize, i: usize) -> Self {
        let mut e = vec![0; nvars];
        e[i] = 1;
        Self::from_terms(nvars, [(BigInt::one(), e)]).expect("well formed")
    }

    /// `x0 * x1 * ... * x_{n-1}`.
    pub fn product_of_coordinates(nvars: usize) -> Self {
        Self::from_terms(nvars, [(BigInt::one(), vec![1; nvars])]).expect("well formed")
    }

    /// Univariate polynomial from coefficients in increasing degree.
    pub fn univariate(coeffs: &[i64]) -> Self {
        Self::from_terms(1, coeffs.iter().enumerate().map(|(d, &c)| (BigInt::from(c), vec![d as u32])))
            .expect("well formed")
    }

    /// Parses expressions such as `x0*x1`, `x0^2 + 1`, `3*x0 - 2*x1^3 + 7`.
    pub fn parse(text: &str, nvars: usize) -> Result<Self, OrbitError> {
        Parser { chars: text.chars().filter(|c| !c.is_whitespace()).collect(), pos: 0, nvars }.polynomial()
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<u32>, &BigInt)> {
        self.terms.iter()
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|e| e.iter().sum()).max().unwrap_or(0)
    }

    pub fn eval(&self, x: &[BigInt]) -> Result<BigInt, OrbitError> {
        if x.len() != self.nvars {
            return Err(OrbitError::Dimension(format!(
                "{}-variable polynomial evaluated at a point of length {}",
                self.nvars,
                x.len()
            )));
        }
        Ok(self
            .terms
            .iter()
            .map(|(e, c)| {
                e.iter().zip(x).fold(c.clone(), |acc, (&k, xi)| acc * num_traits::pow(xi.clone(), k as usize))
            })
            .sum())
    }

    /// Value modulo `m` at a point with entries already reduced mod `m`.
    pub fn eval_mod(&self, x: &[u64], m: u64) -> u64 {
        debug_assert_eq!(x.len(), self.nvars);
        let mb = BigInt::from(m);
        let mut acc: u128 = 0;
        for (e, c) in &self.terms {
            let c = c.mod_floor(&mb).to_u64().expect("residue fits");
            let mut t = c as u128;
            for (&k, &xi) in e.iter().zip(x) {
                for _ in 0..k {
                    t = t * xi as u128 % m as u128;
                }
            }
            acc = (acc + t) % m as u128;
        }
        acc as u64
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (n, (e, c)) in self.terms.iter().rev().enumerate() {
            let neg = c.is_negative();
            if n == 0 {
                if neg {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {} ", if neg { '-' } else { '+' })?;
            }
            let a = c.abs();
            let vars: Vec<String> = e
                .iter()
                .enumerate()
                .filter(|(_, &k)| k > 0)
                .map(|(i, &k)| if k == 1 { format!("x{i}") } else { format!("x{i}^{k}") })
                .collect();
            if vars.is_empty() {
                write!(f, "{a}")?;
            } else if a.is_one() {
                write!(f, "{}", vars.join("*"))?;
            } else {
                write!(f, "{a}*{}", vars.join("*"))?;
            }
        }
        Ok(())
    }
}

struct Parser {
    chars: Vec<char>,
    pos: usize,
    nvars: usize,
}

impl Parser {
    fn err(&self, msg: &str) -> OrbitError {
        OrbitError::Parse(format!("{msg} at offset {} in {:?}", self.pos, self.chars.iter().collect::<String>()))
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn polynomial(mut self) -> Result<Polynomial, OrbitError> {
        let mut terms = Vec::new();
        let mut sign = BigInt::one();
        if self.peek() == Some('-') {
            sign = -sign;
            self.pos += 1;
        } else if self.peek() == Some('+') {
            self.pos += 1;
        }
        loop {
            let (c, e) = self.term()?;
            terms.push((c * &sign, e));
            match self.peek() {
                None => break,
                Some('+') => sign = BigInt::one(),
                Some('-') => sign = -BigInt::one(),
                Some(_) => return Err(self.err("expected '+' or '-'")),
            }
            self.pos += 1;
        }
        Polynomial::from_terms(self.nvars, terms)
    }

    fn term(&mut self) -> Result<(BigInt, Vec<u32>), OrbitError> {
        let mut coeff = BigInt::one();
        let mut exps = vec![0u32; self.nvars];
        loop {
            match self.peek() {
                Some(c) if c.is_ascii_digit() => coeff *= self.number()?,
                Some('x') => {
                    self.pos += 1;
                    let i = self.index()?;
                    if i >= self.nvars {
                        return Err(self.err(&format!("variable x{i} out of range")));
                    }
                    let k = if self.peek() == Some('^') {
                        self.pos += 1;
                        self.index()? as u32
                    } else {
                        1
                    };
                    exps[i] += k;
                }
                _ => return Err(self.err("expected a number or a variable")),
            }
            if self.peek() == Some('*') {
                self.pos += 1;
            } else {
                return Ok((coeff, exps));
            }
        }
    }

    fn digits(&mut self) -> Result<String, OrbitError> {
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.err("expected digits"));
        }
        Ok(self.chars[start..self.pos].iter().collect())
    }

    fn number(&mut self) -> Result<BigInt, OrbitError> {
        let s = self.digits()?;
        s.parse().map_err(|_| self.err("bad integer"))
    }

    fn index(&mut self) -> Result<usize, OrbitError> {
        let s = self.digits()?;
        s.parse().map_err(|_| self.err("bad index"))
    }
}
