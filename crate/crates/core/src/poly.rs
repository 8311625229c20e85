//! Sparse multivariate polynomials with real coefficients.
//!
//! Used to hold the vector-field coefficient tables of a group and the exact
//! derivatives of polynomial test functions. Exponent vectors are dense (one
//! entry per coordinate); the dimension never exceeds [`crate::group::MAX_DIM`].

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

/// Coefficients whose magnitude falls below this are dropped after arithmetic.
const PRUNE: f64 = 1e-15;

#[derive(Clone, PartialEq)]
pub struct Poly {
    nvars: usize,
    terms: BTreeMap<Vec<u8>, f64>,
}

impl Poly {
    pub fn zero(nvars: usize) -> Self {
        Poly {
            nvars,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(nvars: usize, c: f64) -> Self {
        let mut p = Poly::zero(nvars);
        if c != 0.0 {
            p.terms.insert(vec![0; nvars], c);
        }
        p
    }

    /// The coordinate function `x_i` (0-based).
    pub fn var(nvars: usize, i: usize) -> Self {
        assert!(i < nvars, "variable index out of range");
        let mut e = vec![0; nvars];
        e[i] = 1;
        let mut p = Poly::zero(nvars);
        p.terms.insert(e, 1.0);
        p
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn degree(&self) -> usize {
        self.terms
            .keys()
            .map(|e| e.iter().map(|&d| d as usize).sum())
            .max()
            .unwrap_or(0)
    }

    /// Largest degree under the weighting `deg(x_i) = weights[i]`.
    pub fn weighted_degree(&self, weights: &[u8]) -> usize {
        self.terms
            .keys()
            .map(|e| {
                e.iter()
                    .zip(weights)
                    .map(|(&d, &w)| d as usize * w as usize)
                    .sum()
            })
            .max()
            .unwrap_or(0)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&[u8], f64)> {
        self.terms.iter().map(|(e, &c)| (e.as_slice(), c))
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = Poly::zero(self.nvars);
        for (e, &c) in &self.terms {
            out.push(e.clone(), c * s);
        }
        out
    }

    pub fn derivative(&self, i: usize) -> Self {
        let mut out = Poly::zero(self.nvars);
        for (e, &c) in &self.terms {
            if e[i] > 0 {
                let mut f = e.clone();
                f[i] -= 1;
                out.push(f, c * e[i] as f64);
            }
        }
        out
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        debug_assert!(x.len() >= self.nvars);
        self.terms
            .iter()
            .map(|(e, &c)| {
                e.iter()
                    .enumerate()
                    .fold(c, |acc, (i, &d)| acc * x[i].powi(d as i32))
            })
            .sum()
    }

    /// Max absolute coefficient difference; `0.0` means identical term sets.
    pub fn distance(&self, other: &Poly) -> f64 {
        (self - other)
            .terms
            .values()
            .fold(0.0_f64, |m, c| m.max(c.abs()))
    }

    fn push(&mut self, e: Vec<u8>, c: f64) {
        let v = self.terms.get(&e).copied().unwrap_or(0.0) + c;
        if v.abs() < PRUNE {
            self.terms.remove(&e);
        } else {
            self.terms.insert(e, v);
        }
    }

    pub(crate) fn compile(&self) -> CompiledPoly {
        let mut terms = Vec::with_capacity(self.terms.len());
        for (e, &c) in &self.terms {
            let mut vars = [0u8; MAX_TERM_DEGREE];
            let mut deg = 0usize;
            for (i, &d) in e.iter().enumerate() {
                for _ in 0..d {
                    assert!(deg < MAX_TERM_DEGREE, "term degree too high to compile");
                    vars[deg] = i as u8;
                    deg += 1;
                }
            }
            terms.push(Term {
                coef: c,
                vars,
                deg: deg as u8,
            });
        }
        CompiledPoly { terms }
    }
}

impl fmt::Debug for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (e, c) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "{c}")?;
            for (i, &d) in e.iter().enumerate() {
                match d {
                    0 => {}
                    1 => write!(f, "*x{}", i + 1)?,
                    _ => write!(f, "*x{}^{}", i + 1, d)?,
                }
            }
        }
        Ok(())
    }
}

impl Add for &Poly {
    type Output = Poly;
    fn add(self, rhs: &Poly) -> Poly {
        assert_eq!(self.nvars, rhs.nvars);
        let mut out = self.clone();
        for (e, &c) in &rhs.terms {
            out.push(e.clone(), c);
        }
        out
    }
}

impl Sub for &Poly {
    type Output = Poly;
    fn sub(self, rhs: &Poly) -> Poly {
        assert_eq!(self.nvars, rhs.nvars);
        let mut out = self.clone();
        for (e, &c) in &rhs.terms {
            out.push(e.clone(), -c);
        }
        out
    }
}

impl Mul for &Poly {
    type Output = Poly;
    fn mul(self, rhs: &Poly) -> Poly {
        assert_eq!(self.nvars, rhs.nvars);
        let mut out = Poly::zero(self.nvars);
        for (e1, &c1) in &self.terms {
            for (e2, &c2) in &rhs.terms {
                let e: Vec<u8> = e1.iter().zip(e2).map(|(a, b)| a + b).collect();
                out.push(e, c1 * c2);
            }
        }
        out
    }
}

impl Neg for &Poly {
    type Output = Poly;
    fn neg(self) -> Poly {
        self.scale(-1.0)
    }
}

const MAX_TERM_DEGREE: usize = 6;

#[derive(Clone, Copy, Debug)]
struct Term {
    coef: f64,
    vars: [u8; MAX_TERM_DEGREE],
    deg: u8,
}

/// Flat evaluation form of a [`Poly`], used in per-node loops.
#[derive(Clone, Debug, Default)]
pub(crate) struct CompiledPoly {
    terms: Vec<Term>,
}

impl CompiledPoly {
    #[inline]
    pub(crate) fn eval(&self, x: &[f64]) -> f64 {
        let mut s = 0.0;
        for t in &self.terms {
            let mut v = t.coef;
            for &i in &t.vars[..t.deg as usize] {
                v *= x[i as usize];
            }
            s += v;
        }
        s
    }
}

/// A dense table of polynomials (indexed by slot) compiled for evaluation.
/// Only the nonzero slots are visited.
#[derive(Clone, Debug, Default)]
pub(crate) struct PolyTable {
    len: usize,
    entries: Vec<(usize, CompiledPoly)>,
}

impl PolyTable {
    pub(crate) fn new(polys: &[Poly]) -> Self {
        let entries = polys
            .iter()
            .enumerate()
            .filter(|(_, p)| !p.is_zero())
            .map(|(i, p)| (i, p.compile()))
            .collect();
        PolyTable {
            len: polys.len(),
            entries,
        }
    }

    pub(crate) fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Writes every slot of the table into `out` (zeros for empty slots).
    #[inline]
    pub(crate) fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        out[..self.len].iter_mut().for_each(|v| *v = 0.0);
        for (slot, p) in &self.entries {
            out[*slot] = p.eval(x);
        }
    }
}
