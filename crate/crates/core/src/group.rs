//! Carnot groups of step at most three in exponential coordinates.
//!
//! The group law is the Baker–Campbell–Hausdorff product, which terminates
//! after the cubic brackets for step ≤ 3:
//!
//! ```text
//! x·y = x + y + ½[x,y] + (1/12)([x,[x,y]] + [y,[y,x]])
//! ```
//!
//! Left and right invariant frames are obtained by differentiating that
//! product, so their coefficients are polynomials built once per group.
//! Coordinate and generator indices are 0-based throughout the API.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::poly::{Poly, PolyTable};

/// Largest supported topological dimension `n`.
pub const MAX_DIM: usize = 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GroupError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("dilation factor must be positive, got {0}")]
    NonPositiveDilation(f64),
    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },
    #[error("invalid group: {0}")]
    Invalid(String),
    #[error("unknown preset `{0}` (expected euclidean:<m>, heisenberg:<nu> or engel)")]
    UnknownPreset(String),
}

/// A point in exponential coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct Point(pub Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Self {
        Point(coords)
    }

    pub fn zeros(n: usize) -> Self {
        Point(vec![0.0; n])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    /// First-layer coordinates `x_H`.
    pub fn horizontal(&self, m: usize) -> &[f64] {
        &self.0[..m]
    }

    /// Higher-layer coordinates `x_V`.
    pub fn vertical(&self, m: usize) -> &[f64] {
        &self.0[m..]
    }
}

impl From<Vec<f64>> for Point {
    fn from(v: Vec<f64>) -> Self {
        Point(v)
    }
}

/// Named groups accepted in scenario configs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    Euclidean(usize),
    Heisenberg(usize),
    Engel,
}

impl Preset {
    pub fn spec(self) -> GroupSpec {
        match self {
            Preset::Euclidean(m) => GroupSpec::with_brackets(&self.to_string(), vec![m], &[])
                .expect("euclidean preset"),
            Preset::Heisenberg(nu) => {
                let brackets: Vec<_> = (0..nu).map(|i| (i, nu + i, 2 * nu, 1.0)).collect();
                GroupSpec::with_brackets(&self.to_string(), vec![2 * nu, 1], &brackets)
                    .expect("heisenberg preset")
            }
            Preset::Engel => GroupSpec::with_brackets(
                "engel",
                vec![2, 1, 1],
                &[(0, 1, 2, 1.0), (0, 2, 3, 1.0)],
            )
            .expect("engel preset"),
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Preset::Euclidean(m) => write!(f, "euclidean:{m}"),
            Preset::Heisenberg(nu) => write!(f, "heisenberg:{nu}"),
            Preset::Engel => write!(f, "engel"),
        }
    }
}

impl FromStr for Preset {
    type Err = GroupError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s == "engel" {
            return Ok(Preset::Engel);
        }
        let bad = || GroupError::UnknownPreset(s.to_string());
        let (name, arg) = s.split_once(':').ok_or_else(bad)?;
        let k: usize = arg.trim().parse().map_err(|_| bad())?;
        let preset = match name.trim() {
            "euclidean" if k >= 1 && k <= MAX_DIM => Preset::Euclidean(k),
            "heisenberg" if k >= 1 && 2 * k < MAX_DIM => Preset::Heisenberg(k),
            _ => return Err(bad()),
        };
        Ok(preset)
    }
}

/// A stratified nilpotent Lie algebra given by layer dimensions and
/// structure constants `c_{ij}^k` (so `[X_i, X_j] = Σ_k c_{ij}^k X_k`).
#[derive(Clone, Debug, PartialEq)]
pub struct GroupSpec {
    name: String,
    layer_dims: Vec<usize>,
    weights: Vec<u8>,
    constants: Vec<f64>,
}

impl GroupSpec {
    /// Builds a group from raw structure constants `(i, j, k, c_{ij}^k)`.
    ///
    /// The table is taken as given; anti-symmetry, grading and the Jacobi
    /// identity are checked by [`verify_structure`], not here.
    pub fn new(
        name: &str,
        layer_dims: Vec<usize>,
        constants: &[(usize, usize, usize, f64)],
    ) -> Result<Self, GroupError> {
        if layer_dims.is_empty() || layer_dims.len() > 3 {
            return Err(GroupError::Invalid(format!(
                "step must be 1, 2 or 3, got {}",
                layer_dims.len()
            )));
        }
        if layer_dims.iter().any(|&d| d == 0) {
            return Err(GroupError::Invalid("empty layer".into()));
        }
        let n: usize = layer_dims.iter().sum();
        if n > MAX_DIM {
            return Err(GroupError::Invalid(format!(
                "dimension {n} exceeds the supported maximum {MAX_DIM}"
            )));
        }
        let weights = layer_dims
            .iter()
            .enumerate()
            .flat_map(|(k, &d)| std::iter::repeat((k + 1) as u8).take(d))
            .collect();
        let mut table = vec![0.0; n * n * n];
        for &(i, j, k, c) in constants {
            for idx in [i, j, k] {
                if idx >= n {
                    return Err(GroupError::IndexOutOfRange { index: idx, dim: n });
                }
            }
            table[(i * n + j) * n + k] = c;
        }
        Ok(GroupSpec {
            name: name.to_string(),
            layer_dims,
            weights,
            constants: table,
        })
    }

    /// Builds a group from brackets `[X_i, X_j] = c X_k` for `i < j`, filling
    /// in the anti-symmetric partner.
    pub fn with_brackets(
        name: &str,
        layer_dims: Vec<usize>,
        brackets: &[(usize, usize, usize, f64)],
    ) -> Result<Self, GroupError> {
        let mut all = Vec::with_capacity(2 * brackets.len());
        for &(i, j, k, c) in brackets {
            all.push((i, j, k, c));
            all.push((j, i, k, -c));
        }
        GroupSpec::new(name, layer_dims, &all)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    /// Dimension `m` of the first layer.
    pub fn horizontal_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn step(&self) -> usize {
        self.layer_dims.len()
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.layer_dims
    }

    /// Dilation weights `d(i)`.
    pub fn weights(&self) -> &[u8] {
        &self.weights
    }

    pub fn weight(&self, i: usize) -> u8 {
        self.weights[i]
    }

    pub fn constant(&self, i: usize, j: usize, k: usize) -> f64 {
        let n = self.dim();
        self.constants[(i * n + j) * n + k]
    }

    /// Exponent `2·r!` of the gauge norm.
    pub fn gauge_exponent(&self) -> u32 {
        match self.step() {
            1 => 2,
            2 => 4,
            _ => 12,
        }
    }

    fn check_dim(&self, x: &[f64]) -> Result<(), GroupError> {
        if x.len() != self.dim() {
            return Err(GroupError::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    pub(crate) fn bracket_into(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        let n = self.dim();
        out[..n].iter_mut().for_each(|v| *v = 0.0);
        for i in 0..n {
            if x[i] == 0.0 {
                continue;
            }
            for j in 0..n {
                let xy = x[i] * y[j];
                if xy == 0.0 {
                    continue;
                }
                let base = (i * n + j) * n;
                for k in 0..n {
                    let c = self.constants[base + k];
                    if c != 0.0 {
                        out[k] += c * xy;
                    }
                }
            }
        }
    }

    /// Lie bracket of two algebra elements in the generator basis.
    pub fn bracket(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.bracket_into(x, y, &mut out);
        out
    }

    pub(crate) fn mul_into(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        let n = self.dim();
        let mut xy = [0.0; MAX_DIM];
        let mut t1 = [0.0; MAX_DIM];
        let mut t2 = [0.0; MAX_DIM];
        let mut yx = [0.0; MAX_DIM];
        self.bracket_into(x, y, &mut xy);
        for k in 0..n {
            yx[k] = -xy[k];
        }
        self.bracket_into(x, &xy[..n], &mut t1);
        self.bracket_into(y, &yx[..n], &mut t2);
        for k in 0..n {
            out[k] = x[k] + y[k] + 0.5 * xy[k] + (t1[k] + t2[k]) / 12.0;
        }
    }

    /// Group product in exponential coordinates (exact for step ≤ 3).
    pub fn multiply(&self, x: &Point, y: &Point) -> Result<Point, GroupError> {
        self.check_dim(&x.0)?;
        self.check_dim(&y.0)?;
        let mut out = vec![0.0; self.dim()];
        self.mul_into(&x.0, &y.0, &mut out);
        Ok(Point(out))
    }

    /// In exponential coordinates the inverse is the negation.
    pub fn inverse(&self, x: &Point) -> Point {
        Point(x.0.iter().map(|v| -v).collect())
    }

    /// Non-isotropic dilation `δ_s(x) = (s^{d(i)} x_i)`.
    pub fn dilate(&self, s: f64, x: &Point) -> Result<Point, GroupError> {
        if !(s > 0.0) {
            return Err(GroupError::NonPositiveDilation(s));
        }
        self.check_dim(&x.0)?;
        Ok(Point(
            x.0.iter()
                .zip(&self.weights)
                .map(|(v, &w)| v * s.powi(w as i32))
                .collect(),
        ))
    }

    pub(crate) fn gauge_norm_slice(&self, x: &[f64]) -> f64 {
        // |x|^{2r!} = Σ |x_i|^{2r!/d(i)}; evaluated on coordinates rescaled
        // by the homogeneous size s so that no power can overflow.
        let e = self.gauge_exponent() as i32;
        let s = x
            .iter()
            .zip(&self.weights)
            .map(|(v, &w)| v.abs().powf(1.0 / w as f64))
            .fold(0.0_f64, f64::max);
        if s == 0.0 {
            return 0.0;
        }
        let sum: f64 = x
            .iter()
            .zip(&self.weights)
            .map(|(v, &w)| (v.abs() / s.powi(w as i32)).powi(e / w as i32))
            .sum();
        s * sum.powf(1.0 / e as f64)
    }

    /// Homogeneous gauge norm, of degree one under [`GroupSpec::dilate`].
    pub fn gauge_norm(&self, x: &Point) -> f64 {
        self.gauge_norm_slice(&x.0)
    }

    /// Left-invariant gauge quasi-distance `|y^{-1} x|`.
    pub fn left_distance(&self, x: &Point, y: &Point) -> Result<f64, GroupError> {
        let w = self.multiply(&self.inverse(y), x)?;
        Ok(self.gauge_norm(&w))
    }

    /// Right-invariant gauge quasi-distance `|x y^{-1}|`.
    pub fn right_distance(&self, x: &Point, y: &Point) -> Result<f64, GroupError> {
        let w = self.multiply(x, &self.inverse(y))?;
        Ok(self.gauge_norm(&w))
    }

    /// [`GroupSpec::right_distance`] on raw coordinate slices.
    pub fn right_distance_slice(&self, x: &[f64], y: &[f64]) -> f64 {
        let n = self.dim();
        let mut yi = [0.0; MAX_DIM];
        let mut w = [0.0; MAX_DIM];
        for k in 0..n {
            yi[k] = -y[k];
        }
        self.mul_into(x, &yi[..n], &mut w);
        self.gauge_norm_slice(&w[..n])
    }

    /// Coefficients of the left-invariant field `X_i` at `x`: `X_i = Σ_k a_{ik}(x) ∂_k`.
    pub fn left_vf_coeffs(&self, i: usize, x: &Point) -> Result<Vec<f64>, GroupError> {
        self.vf_coeffs(FrameKind::Left, i, x)
    }

    /// Coefficients of the right-invariant field `X̃_i` at `x`.
    pub fn right_vf_coeffs(&self, i: usize, x: &Point) -> Result<Vec<f64>, GroupError> {
        self.vf_coeffs(FrameKind::Right, i, x)
    }

    fn vf_coeffs(&self, kind: FrameKind, i: usize, x: &Point) -> Result<Vec<f64>, GroupError> {
        let n = self.dim();
        if i >= n {
            return Err(GroupError::IndexOutOfRange { index: i, dim: n });
        }
        self.check_dim(&x.0)?;
        let polys = frame_polys(self, kind);
        Ok((0..n).map(|k| polys[i * n + k].eval(&x.0)).collect())
    }

    /// `ad_x(v)` where `x` is the coordinate vector and `v` has polynomial entries.
    fn ad_coords(&self, v: &[Poly]) -> Vec<Poly> {
        let n = self.dim();
        let mut out = vec![Poly::zero(n); n];
        for j in 0..n {
            let xj = Poly::var(n, j);
            for (l, vl) in v.iter().enumerate() {
                if vl.is_zero() {
                    continue;
                }
                let prod = &xj * vl;
                for (k, o) in out.iter_mut().enumerate() {
                    let c = self.constant(j, l, k);
                    if c != 0.0 {
                        *o = &*o + &prod.scale(c);
                    }
                }
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FrameKind {
    Left,
    Right,
}

impl fmt::Display for FrameKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FrameKind::Left => "left",
            FrameKind::Right => "right",
        })
    }
}

/// Coefficient polynomials `a_{ik}` laid out as `a[i*n + k]`.
///
/// Left:  `a_i = e_i + ½ ad_x e_i + (1/12) ad_x² e_i`
/// Right: `ã_i = e_i − ½ ad_x e_i + (1/12) ad_x² e_i`
fn frame_polys(g: &GroupSpec, kind: FrameKind) -> Vec<Poly> {
    let n = g.dim();
    let sign = match kind {
        FrameKind::Left => 0.5,
        FrameKind::Right => -0.5,
    };
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        let e: Vec<Poly> = (0..n)
            .map(|k| Poly::constant(n, if k == i { 1.0 } else { 0.0 }))
            .collect();
        let ad1 = g.ad_coords(&e);
        let ad2 = g.ad_coords(&ad1);
        for k in 0..n {
            out.push(&(&e[k] + &ad1[k].scale(sign)) + &ad2[k].scale(1.0 / 12.0));
        }
    }
    out
}

/// Bracket of two polynomial vector fields given by coefficient rows.
fn field_bracket(v: &[Poly], w: &[Poly]) -> Vec<Poly> {
    let n = v.len();
    (0..n)
        .map(|l| {
            let mut acc = Poly::zero(n);
            for k in 0..n {
                if !v[k].is_zero() {
                    acc = &acc + &(&v[k] * &w[l].derivative(k));
                }
                if !w[k].is_zero() {
                    acc = &acc - &(&w[k] * &v[l].derivative(k));
                }
            }
            acc
        })
        .collect()
}

/// A left or right invariant frame with its coefficient tables.
///
/// Besides `a_{ik}` the frame keeps the first-order parts of the second
/// derivatives, `X_i(a_{jl}) = Σ_k a_{ik} ∂_k a_{jl}`, so that
/// `X_i X_j u = Σ_{kl} a_{ik} a_{jl} ∂_k∂_l u + Σ_l X_i(a_{jl}) ∂_l u` can be
/// evaluated with exact coefficients. The symmetrized part of the first-order
/// term vanishes identically for step ≤ 2.
#[derive(Clone, Debug)]
pub struct Frame {
    kind: FrameKind,
    n: usize,
    m: usize,
    coeffs: Vec<Poly>,
    table: PolyTable,
    ordered_drift: Vec<Poly>,
    ordered_table: PolyTable,
    sym_table: PolyTable,
}

impl Frame {
    pub fn new(g: &GroupSpec, kind: FrameKind) -> Self {
        let n = g.dim();
        let coeffs = frame_polys(g, kind);
        let mut ordered_drift = Vec::with_capacity(n * n * n);
        for i in 0..n {
            for j in 0..n {
                for l in 0..n {
                    let mut acc = Poly::zero(n);
                    for k in 0..n {
                        let aik = &coeffs[i * n + k];
                        if !aik.is_zero() {
                            acc = &acc + &(aik * &coeffs[j * n + l].derivative(k));
                        }
                    }
                    ordered_drift.push(acc);
                }
            }
        }
        let mut sym = Vec::with_capacity(n * n * n);
        for i in 0..n {
            for j in 0..n {
                for l in 0..n {
                    let s = &ordered_drift[(i * n + j) * n + l] + &ordered_drift[(j * n + i) * n + l];
                    sym.push(s.scale(0.5));
                }
            }
        }
        Frame {
            kind,
            n,
            m: g.horizontal_dim(),
            table: PolyTable::new(&coeffs),
            ordered_table: PolyTable::new(&ordered_drift),
            sym_table: PolyTable::new(&sym),
            coeffs,
            ordered_drift,
        }
    }

    pub fn left(g: &GroupSpec) -> Self {
        Frame::new(g, FrameKind::Left)
    }

    pub fn right(g: &GroupSpec) -> Self {
        Frame::new(g, FrameKind::Right)
    }

    pub fn kind(&self) -> FrameKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn horizontal_dim(&self) -> usize {
        self.m
    }

    /// Coefficient polynomial `a_{ik}`.
    pub fn coeff(&self, i: usize, k: usize) -> &Poly {
        &self.coeffs[i * self.n + k]
    }

    /// Row `i` of the coefficient table as polynomials.
    pub fn row(&self, i: usize) -> &[Poly] {
        &self.coeffs[i * self.n..(i + 1) * self.n]
    }

    /// `X_i(a_{jl})` as a polynomial.
    pub fn ordered_drift(&self, i: usize, j: usize, l: usize) -> &Poly {
        &self.ordered_drift[(i * self.n + j) * self.n + l]
    }

    /// True when the symmetrized second derivative carries a first-order term.
    pub fn has_symmetric_drift(&self) -> bool {
        !self.sym_table.is_empty()
    }

    /// Fills `out[i*n + k] = a_{ik}(x)`.
    #[inline]
    pub(crate) fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        self.table.eval_into(x, out);
    }

    /// Fills `out[(i*n + j)*n + l] = ½(X_i a_{jl} + X_j a_{il})(x)`.
    #[inline]
    pub(crate) fn sym_drift_into(&self, x: &[f64], out: &mut [f64]) {
        self.sym_table.eval_into(x, out);
    }

    /// Fills `out[(i*n + j)*n + l] = X_i(a_{jl})(x)`.
    #[inline]
    pub(crate) fn ordered_drift_into(&self, x: &[f64], out: &mut [f64]) {
        self.ordered_table.eval_into(x, out);
    }

    /// Applies `X_i` to a polynomial exactly.
    pub fn apply_poly(&self, i: usize, p: &Poly) -> Poly {
        let mut acc = Poly::zero(self.n);
        for k in 0..self.n {
            let a = self.coeff(i, k);
            if !a.is_zero() {
                acc = &acc + &(a * &p.derivative(k));
            }
        }
        acc
    }

    /// Symmetrized `(X_i X_j p)*` of a polynomial, exactly.
    pub fn sym_second_poly(&self, i: usize, j: usize, p: &Poly) -> Poly {
        let a = self.apply_poly(i, &self.apply_poly(j, p));
        let b = self.apply_poly(j, &self.apply_poly(i, p));
        (&a + &b).scale(0.5)
    }
}

/// Outcome of [`verify_structure`].
#[derive(Clone, Debug, PartialEq)]
pub struct StructureReport {
    pub group: String,
    /// Rank of the span of iterated horizontal brackets.
    pub span_rank: usize,
    /// Bracket depth at which the span first reaches full rank.
    pub span_depth: Option<usize>,
    /// Every violated identity, in the order checked.
    pub violations: Vec<String>,
}

impl StructureReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn first_violation(&self) -> Option<&str> {
        self.violations.first().map(|s| s.as_str())
    }
}

impl fmt::Display for StructureReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "group: {}", self.group)?;
        writeln!(f, "span rank: {}", self.span_rank)?;
        match self.span_depth {
            Some(d) => writeln!(f, "span depth: {d}")?,
            None => writeln!(f, "span depth: not reached")?,
        }
        if self.passed() {
            write!(f, "result: pass")
        } else {
            writeln!(f, "result: fail")?;
            for v in &self.violations {
                writeln!(f, "  {v}")?;
            }
            Ok(())
        }
    }
}

fn rank(vectors: &[Vec<f64>], n: usize) -> usize {
    let mut rows: Vec<Vec<f64>> = vectors.to_vec();
    let mut r = 0;
    for col in 0..n {
        let pivot = (r..rows.len())
            .max_by(|&a, &b| rows[a][col].abs().total_cmp(&rows[b][col].abs()));
        let Some(p) = pivot else { break };
        if rows[p][col].abs() < 1e-12 {
            continue;
        }
        rows.swap(r, p);
        for i in 0..rows.len() {
            if i != r {
                let f = rows[i][col] / rows[r][col];
                for c in 0..n {
                    rows[i][c] -= f * rows[r][c];
                }
            }
        }
        r += 1;
    }
    r
}

/// Checks the algebraic identities of the structure constants, the bracket
/// generating condition, and that the computed frames reproduce the bracket
/// table (`[X_i, X_j] = Σ c_{ij}^k X_k`, `[X̃_i, X̃_j] = −Σ c_{ij}^k X̃_k`,
/// `[X_i, X̃_j] = 0`).
pub fn verify_structure(g: &GroupSpec) -> StructureReport {
    const TOL: f64 = 1e-12;
    let n = g.dim();
    let m = g.horizontal_dim();
    let mut violations = Vec::new();

    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let c = g.constant(i, j, k);
                if (c + g.constant(j, i, k)).abs() > TOL {
                    violations.push(format!(
                        "anti-symmetry: c_{{{}{}}}^{} = {} but c_{{{}{}}}^{} = {}",
                        i + 1,
                        j + 1,
                        k + 1,
                        c,
                        j + 1,
                        i + 1,
                        k + 1,
                        g.constant(j, i, k)
                    ));
                }
                if c.abs() > TOL && g.weight(k) != g.weight(i) + g.weight(j) {
                    violations.push(format!(
                        "grading: c_{{{}{}}}^{} ≠ 0 but d({}) ≠ d({}) + d({})",
                        i + 1,
                        j + 1,
                        k + 1,
                        k + 1,
                        i + 1,
                        j + 1
                    ));
                }
            }
        }
    }

    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for p in 0..n {
                    let mut s = 0.0;
                    for l in 0..n {
                        s += g.constant(i, j, l) * g.constant(l, k, p)
                            + g.constant(j, k, l) * g.constant(l, i, p)
                            + g.constant(k, i, l) * g.constant(l, j, p);
                    }
                    if s.abs() > TOL {
                        violations.push(format!(
                            "jacobi: triple ({}, {}, {}) component {} = {}",
                            i + 1,
                            j + 1,
                            k + 1,
                            p + 1,
                            s
                        ));
                    }
                }
            }
        }
    }

    // iterated brackets of the horizontal generators
    let unit = |i: usize| -> Vec<f64> { (0..n).map(|k| if k == i { 1.0 } else { 0.0 }).collect() };
    let mut span: Vec<Vec<f64>> = (0..m).map(unit).collect();
    let mut level = span.clone();
    let mut span_rank = rank(&span, n);
    let mut span_depth = (span_rank == n).then_some(1);
    for depth in 2..=g.step().max(1) + 1 {
        if span_depth.is_some() {
            break;
        }
        let mut next = Vec::new();
        for i in 0..m {
            for v in &level {
                let b = g.bracket(&unit(i), v);
                if b.iter().any(|c| c.abs() > TOL) {
                    next.push(b);
                }
            }
        }
        span.extend(next.iter().cloned());
        level = next;
        span_rank = rank(&span, n);
        if span_rank == n {
            span_depth = Some(depth);
        }
    }
    if span_rank < n {
        violations.push(format!(
            "bracket generation: horizontal brackets span rank {span_rank} < {n}"
        ));
    }

    let left = Frame::left(g);
    let right = Frame::right(g);
    let combo = |frame: &Frame, i: usize, j: usize, sign: f64| -> Vec<Poly> {
        (0..n)
            .map(|l| {
                let mut acc = Poly::zero(n);
                for k in 0..n {
                    let c = g.constant(i, j, k);
                    if c != 0.0 {
                        acc = &acc + &frame.coeff(k, l).scale(sign * c);
                    }
                }
                acc
            })
            .collect()
    };
    let mut field_check = |name: &str, got: Vec<Poly>, want: Vec<Poly>, i: usize, j: usize| {
        let err = got
            .iter()
            .zip(&want)
            .map(|(a, b)| a.distance(b))
            .fold(0.0, f64::max);
        if err > 1e-10 {
            violations.push(format!(
                "{name}: bracket of fields {} and {} off by {err:e}",
                i + 1,
                j + 1
            ));
        }
    };
    for i in 0..n {
        for j in 0..n {
            field_check(
                "left frame",
                field_bracket(left.row(i), left.row(j)),
                combo(&left, i, j, 1.0),
                i,
                j,
            );
            field_check(
                "right frame",
                field_bracket(right.row(i), right.row(j)),
                combo(&right, i, j, -1.0),
                i,
                j,
            );
            field_check(
                "left/right commutation",
                field_bracket(left.row(i), right.row(j)),
                vec![Poly::zero(n); n],
                i,
                j,
            );
        }
    }

    StructureReport {
        group: g.name().to_string(),
        span_rank,
        span_depth,
        violations,
    }
}
