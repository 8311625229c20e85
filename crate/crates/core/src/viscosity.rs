//! Sup/inf convolutions with the gauge kernel, semiconvexity diagnostics and
//! a discrete check of the viscosity sub/supersolution inequalities against
//! a finite family of quadratic test functions.

use std::fmt;

use nalgebra::{DMatrix, SymmetricEigen};
use thiserror::Error;

use crate::grid::{GridError, ScalarField, Stencil};
use crate::group::{Frame, GroupSpec, MAX_DIM};
use crate::par;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ViscosityError {
    #[error("mu must be positive, got {0}")]
    BadMu(f64),
    #[error("matrix is not symmetric (entry ({i},{j}) differs by {diff:e})")]
    Asymmetric { i: usize, j: usize, diff: f64 },
    #[error("matrix of size {got} is not square of side {side}")]
    Shape { side: usize, got: usize },
    #[error("empty test family")]
    EmptyFamily,
    #[error("need at least three snapshots with increasing times")]
    ShortTrajectory,
    #[error("field dimension {field} differs from group dimension {group}")]
    Dimension { field: usize, group: usize },
    #[error("mu sequence must be strictly decreasing")]
    MuOrder,
    #[error(transparent)]
    Grid(#[from] GridError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Sup,
    Inf,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvolvedField {
    pub field: ScalarField,
    pub mu: f64,
    pub direction: Direction,
}

/// `|[a, b]|` bound: `Σ |c_ij^k| a_i b_j` for non-negative vectors.
fn abs_bracket(g: &GroupSpec, a: &[f64], b: &[f64], out: &mut [f64]) {
    let n = g.dim();
    for (k, o) in out.iter_mut().enumerate().take(n) {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                let c = g.constant(i, j, k);
                if c != 0.0 {
                    s += c.abs() * a[i] * b[j];
                }
            }
        }
        *o = s;
    }
}

/// Per-axis bound on `|y_k − x_k|` over all `y = x·w⁻¹` with `|w_i| ≤ W_i`.
fn window_extent(g: &GroupSpec, x: &[f64], w: &[f64]) -> [f64; MAX_DIM] {
    let n = g.dim();
    let mut ax = [0.0; MAX_DIM];
    for k in 0..n {
        ax[k] = x[k].abs();
    }
    let (mut b1, mut b2, mut b3, mut t) = ([0.0; MAX_DIM], [0.0; MAX_DIM], [0.0; MAX_DIM], [0.0; MAX_DIM]);
    abs_bracket(g, &ax[..n], w, &mut b1);
    abs_bracket(g, &ax[..n], &b1[..n], &mut b2);
    abs_bracket(g, w, &ax[..n], &mut t);
    abs_bracket(g, w, &t[..n], &mut b3);
    let mut ext = [0.0; MAX_DIM];
    for k in 0..n {
        // a little headroom against rounding in the gauge comparison
        ext[k] = (w[k] + 0.5 * b1[k] + (b2[k] + b3[k]) / 12.0) * (1.0 + 1e-12) + 1e-300;
    }
    ext
}

fn convolve(
    u: &ScalarField,
    g: &GroupSpec,
    mu: f64,
    direction: Direction,
    window_scale: f64,
) -> Result<ConvolvedField, ViscosityError> {
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(ViscosityError::BadMu(mu));
    }
    let n = g.dim();
    if u.grid.dim() != n {
        return Err(ViscosityError::Dimension {
            field: u.grid.dim(),
            group: n,
        });
    }
    let osc = u.max() - u.min();
    if osc == 0.0 {
        return Ok(ConvolvedField {
            field: u.clone(),
            mu,
            direction,
        });
    }
    let e = g.gauge_exponent() as i32;
    let radius = (2.0 * mu * osc).powf(1.0 / e as f64) * window_scale;
    let w: Vec<f64> = g.weights().iter().map(|&d| radius.powi(d as i32)).collect();
    let sign = match direction {
        Direction::Sup => 1.0,
        Direction::Inf => -1.0,
    };
    let grid = &u.grid;
    let mut out = vec![0.0; u.len()];
    par::fill(&mut out, |p| {
        let mut x = [0.0; MAX_DIM];
        grid.node_coords(p, &mut x);
        let ext = window_extent(g, &x[..n], &w);
        let idx = grid.multi_index(p);
        let mut lo = [0usize; MAX_DIM];
        let mut hi = [0usize; MAX_DIM];
        for k in 0..n {
            let r = (ext[k] / grid.spacing()[k]).floor() as usize;
            lo[k] = idx[k].saturating_sub(r);
            hi[k] = (idx[k] + r).min(grid.dims()[k] - 1);
        }
        let mut best = sign * u.values[p];
        let mut cur = lo;
        let mut y = [0.0; MAX_DIM];
        let mut yi = [0.0; MAX_DIM];
        let mut prod = [0.0; MAX_DIM];
        loop {
            let q = grid.flat_index(&cur[..n]);
            let v = sign * u.values[q];
            if v > best {
                for k in 0..n {
                    y[k] = grid.coord(k, cur[k]);
                    yi[k] = -y[k];
                }
                g.mul_into(&yi[..n], &x[..n], &mut prod);
                let pen = g.gauge_norm_slice(&prod[..n]).powi(e) / (2.0 * mu);
                if v - pen > best {
                    best = v - pen;
                }
            }
            // odometer over the window box
            let mut k = n;
            loop {
                if k == 0 {
                    return sign * best;
                }
                k -= 1;
                if cur[k] < hi[k] {
                    cur[k] += 1;
                    break;
                }
                cur[k] = lo[k];
            }
        }
    });
    Ok(ConvolvedField {
        field: u.like(out, u.far_field),
        mu,
        direction,
    })
}

/// `u^μ(x) = max_y (u(y) − |y⁻¹x|^{2r!}/(2μ))` over grid nodes.
///
/// Only nodes whose kernel value can stay below the oscillation of `u` are
/// visited; the window is a coordinate box containing every such node.
pub fn sup_convolution(u: &ScalarField, g: &GroupSpec, mu: f64) -> Result<ConvolvedField, ViscosityError> {
    convolve(u, g, mu, Direction::Sup, 1.0)
}

/// `u_μ(x) = min_y (u(y) + |y⁻¹x|^{2r!}/(2μ))` over grid nodes.
pub fn inf_convolution(u: &ScalarField, g: &GroupSpec, mu: f64) -> Result<ConvolvedField, ViscosityError> {
    convolve(u, g, mu, Direction::Inf, 1.0)
}

/// Same as the convolutions above with the search window radius multiplied
/// by `scale` (≥ 1); used to confirm the window is large enough.
pub fn convolution_with_window(
    u: &ScalarField,
    g: &GroupSpec,
    mu: f64,
    direction: Direction,
    scale: f64,
) -> Result<ConvolvedField, ViscosityError> {
    convolve(u, g, mu, direction, scale.max(1.0))
}

/// Most negative eigenvalue of the centred Euclidean difference Hessian over
/// nodes away from the box faces.
pub fn semiconvexity_modulus(u: &ScalarField) -> f64 {
    let n = u.grid.dim();
    par::min(u.len(), |p| {
        if u.grid.shell_depth(p) < 1 {
            return f64::INFINITY;
        }
        let mut s = Stencil::new(n);
        s.gather(u, p);
        let mut h = DMatrix::zeros(n, n);
        for k in 0..n {
            h[(k, k)] = s.d2(k);
            for l in k + 1..n {
                let c = s.cross(k, l);
                h[(k, l)] = c;
                h[(l, k)] = c;
            }
        }
        SymmetricEigen::new(h).eigenvalues.min()
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Sub,
    Super,
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Sub => "sub",
            Side::Super => "super",
        })
    }
}

fn check_symmetric(r: &[f64], m: usize) -> Result<(), ViscosityError> {
    if r.len() != m * m {
        return Err(ViscosityError::Shape { side: m, got: r.len() });
    }
    for i in 0..m {
        for j in i + 1..m {
            let diff = (r[i * m + j] - r[j * m + i]).abs();
            if diff > 1e-12 * (1.0 + r[i * m + j].abs()) {
                return Err(ViscosityError::Asymmetric { i, j, diff });
            }
        }
    }
    Ok(())
}

/// Extreme value of `tr R − pᵀ R p` over `|p| ≤ 1`: the maximum for the
/// sub side, the minimum for the super side.
pub fn degenerate_branch_bound(r: &[f64], m: usize, side: Side) -> Result<f64, ViscosityError> {
    check_symmetric(r, m)?;
    let mat = DMatrix::from_row_slice(m, m, r);
    let tr = mat.trace();
    let ev = SymmetricEigen::new(mat).eigenvalues;
    Ok(match side {
        Side::Sub => tr - ev.min().min(0.0),
        Side::Super => tr - ev.max().max(0.0),
    })
}

/// First- and second-order data of a test function at a space-time point.
#[derive(Clone, Debug, PartialEq)]
pub struct JetSample {
    pub node: usize,
    pub time_index: usize,
    /// `(X_1 φ, …, X_n φ)`; only the first two layers are used.
    pub p: Vec<f64>,
    pub q: f64,
    /// Symmetrized horizontal Hessian `(X_i X_j φ)*`, `m × m` row-major.
    pub r: Vec<f64>,
}

/// `φ(x,t) = ½ Σ α_k (x_k − c_k)² + q (t − t_c) + ½ κ (t − t_c)²`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticTest {
    pub center: Vec<f64>,
    pub alpha: Vec<f64>,
    pub t_center: f64,
    pub q: f64,
    pub kappa: f64,
}

impl QuadraticTest {
    pub fn value(&self, x: &[f64], t: f64) -> f64 {
        let s: f64 = x
            .iter()
            .zip(&self.center)
            .zip(&self.alpha)
            .map(|((x, c), a)| a * (x - c) * (x - c))
            .sum();
        let dt = t - self.t_center;
        0.5 * s + self.q * dt + 0.5 * self.kappa * dt * dt
    }

    pub fn time_derivative(&self, t: f64) -> f64 {
        self.q + self.kappa * (t - self.t_center)
    }

    /// Exact jet at `(x, t)`: `X_i φ = Σ_k a_ik α_k (x_k − c_k)` and
    /// `(X_i X_j φ)* = Σ_k a_ik a_jk α_k + Σ_l ½(X_i a_jl + X_j a_il) α_l (x_l − c_l)`.
    pub fn jet(&self, frame: &Frame, x: &[f64], t: f64) -> (Vec<f64>, f64, Vec<f64>) {
        let n = frame.dim();
        let m = frame.horizontal_dim();
        let mut a = [0.0; MAX_DIM * MAX_DIM];
        frame.eval_into(x, &mut a);
        let mut grad = [0.0; MAX_DIM];
        for k in 0..n {
            grad[k] = self.alpha[k] * (x[k] - self.center[k]);
        }
        let p = (0..n)
            .map(|i| (0..n).map(|k| a[i * n + k] * grad[k]).sum())
            .collect();
        let mut drift = vec![0.0; n * n * n];
        if frame.has_symmetric_drift() {
            frame.sym_drift_into(x, &mut drift);
        }
        let mut r = vec![0.0; m * m];
        for i in 0..m {
            for j in i..m {
                let mut v = 0.0;
                for k in 0..n {
                    v += a[i * n + k] * a[j * n + k] * self.alpha[k];
                }
                for l in 0..n {
                    v += drift[(i * n + j) * n + l] * grad[l];
                }
                r[i * m + j] = v;
                r[j * m + i] = v;
            }
        }
        (p, self.time_derivative(t), r)
    }
}

/// Coordinate quadratics centred at `centers` for every scale `s`:
/// horizontal curvature `±s`, higher layers `±β`, time curvature `±κ`
/// (`+` for the sub side, `−` for the super side).
pub fn coordinate_quadratics(
    g: &GroupSpec,
    centers: &[Vec<f64>],
    scales: &[f64],
    beta: f64,
    kappa: f64,
    q: f64,
    t_center: f64,
    side: Side,
) -> Vec<QuadraticTest> {
    let m = g.horizontal_dim();
    let sign = match side {
        Side::Sub => 1.0,
        Side::Super => -1.0,
    };
    let mut out = Vec::new();
    for c in centers {
        for &s in scales {
            let alpha = (0..g.dim())
                .map(|k| sign * if k < m { s } else { beta })
                .collect();
            out.push(QuadraticTest {
                center: c.clone(),
                alpha,
                t_center,
                q,
                kappa: sign * kappa.abs(),
            });
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Branch {
    Regular,
    Degenerate,
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Branch::Regular => "regular",
            Branch::Degenerate => "degenerate",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TouchingRecord {
    pub test: usize,
    pub jet: JetSample,
    pub location: Vec<f64>,
    pub t: f64,
    /// Positive when the inequality fails.
    pub violation: f64,
    pub branch: Branch,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ViscosityReport {
    pub side: Side,
    pub tolerance: f64,
    pub records: Vec<TouchingRecord>,
    pub tests_without_touching: usize,
    pub plateaus_skipped: usize,
}

impl ViscosityReport {
    pub fn worst(&self) -> Option<&TouchingRecord> {
        self.records
            .iter()
            .max_by(|a, b| a.violation.total_cmp(&b.violation))
    }

    pub fn worst_violation(&self) -> f64 {
        self.worst().map_or(f64::NEG_INFINITY, |r| r.violation)
    }

    pub fn passed(&self) -> bool {
        self.worst_violation() <= self.tolerance
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("kind,location,t,violation,branch\n");
        for r in &self.records {
            let loc: Vec<String> = r.location.iter().map(|v| format!("{v:?}")).collect();
            s.push_str(&format!(
                "{},{},{:?},{:?},{}\n",
                self.side,
                loc.join(" "),
                r.t,
                r.violation,
                r.branch
            ));
        }
        s
    }
}

/// Right-hand side of the inequality at a jet, plus the branch used.
pub fn jet_rhs(p: &[f64], r: &[f64], m: usize, tau: f64, side: Side) -> Result<(f64, Branch), ViscosityError> {
    let norm2: f64 = p[..m].iter().map(|v| v * v).sum();
    if norm2.sqrt() >= tau {
        let mut s = 0.0;
        for i in 0..m {
            for j in 0..m {
                let a = if i == j { 1.0 } else { 0.0 } - p[i] * p[j] / norm2;
                s += a * r[i * m + j];
            }
        }
        Ok((s, Branch::Regular))
    } else {
        Ok((degenerate_branch_bound(r, m, side)?, Branch::Degenerate))
    }
}

/// Space-time offsets of the full 1-ring, axis neighbours first.
fn ring_offsets(n: usize) -> Vec<[i8; MAX_DIM + 1]> {
    let total = 3usize.pow(n as u32 + 1);
    let mut axis = Vec::new();
    let mut rest = Vec::new();
    for code in 0..total {
        let mut off = [0i8; MAX_DIM + 1];
        let mut c = code;
        let mut nonzero = 0;
        for o in off.iter_mut().take(n + 1) {
            *o = (c % 3) as i8 - 1;
            c /= 3;
            if *o != 0 {
                nonzero += 1;
            }
        }
        match nonzero {
            0 => {}
            1 => axis.push(off),
            _ => rest.push(off),
        }
    }
    axis.extend(rest);
    axis
}

/// For each test function, finds the discrete strict local maxima (sub side)
/// or minima (super side) of `u − φ` over interior space-time nodes and
/// evaluates the viscosity inequality there with the exact jet of `φ`.
///
/// A touching point must dominate its full space-time 1-ring. Among equal
/// values the lexicographically lowest `(time index, node)` wins; a node
/// with two or more equal neighbours sits on a plateau and is skipped.
pub fn viscosity_residual_check(
    snapshots: &[ScalarField],
    g: &GroupSpec,
    tests: &[QuadraticTest],
    tau: f64,
    side: Side,
    tolerance: f64,
) -> Result<ViscosityReport, ViscosityError> {
    if tests.is_empty() {
        return Err(ViscosityError::EmptyFamily);
    }
    if snapshots.len() < 3 || snapshots.windows(2).any(|w| !(w[1].time > w[0].time)) {
        return Err(ViscosityError::ShortTrajectory);
    }
    let grid = &snapshots[0].grid;
    let n = g.dim();
    if grid.dim() != n {
        return Err(ViscosityError::Dimension {
            field: grid.dim(),
            group: n,
        });
    }
    let m = g.horizontal_dim();
    let frame = Frame::left(g);
    let ring = ring_offsets(n);
    let nt = snapshots.len();
    let sign = match side {
        Side::Sub => 1.0,
        Side::Super => -1.0,
    };
    let coords: Vec<Vec<f64>> = (0..grid.len()).map(|p| grid.point(p)).collect();
    let mut report = ViscosityReport {
        side,
        tolerance,
        records: Vec::new(),
        tests_without_touching: 0,
        plateaus_skipped: 0,
    };
    for (ti, test) in tests.iter().enumerate() {
        // d = ±(u − φ) on the whole space-time grid
        let d: Vec<Vec<f64>> = snapshots
            .iter()
            .map(|s| {
                par::map(grid.len(), |p| sign * (s.values[p] - test.value(&coords[p], s.time)))
            })
            .collect();
        let found: Vec<Vec<(usize, usize, bool)>> = (1..nt - 1)
            .map(|k| {
                par::map(grid.len(), |p| {
                    if grid.shell_depth(p) < 1 {
                        return None;
                    }
                    let v = d[k][p];
                    let mut ties = 0;
                    for off in &ring {
                        let mut q = p as isize;
                        for a in 0..n {
                            q += off[a] as isize * grid.strides()[a] as isize;
                        }
                        let kk = (k as isize + off[n] as isize) as usize;
                        let w = d[kk][q as usize];
                        if w > v {
                            return None;
                        }
                        if w == v {
                            let lower = (kk, q as usize) < (k, p);
                            if lower {
                                return None;
                            }
                            ties += 1;
                        }
                    }
                    Some((k, p, ties >= 2))
                })
                .into_iter()
                .flatten()
                .collect()
            })
            .collect();
        let mut any = false;
        for (k, p, plateau) in found.into_iter().flatten() {
            if plateau {
                report.plateaus_skipped += 1;
                continue;
            }
            any = true;
            let t = snapshots[k].time;
            let (pv, q, r) = test.jet(&frame, &coords[p], t);
            let (rhs, branch) = jet_rhs(&pv, &r, m, tau, side)?;
            let violation = match side {
                Side::Sub => q - rhs,
                Side::Super => rhs - q,
            };
            report.records.push(TouchingRecord {
                test: ti,
                jet: JetSample {
                    node: p,
                    time_index: k,
                    p: pv,
                    q,
                    r,
                },
                location: coords[p].clone(),
                t,
                violation,
                branch,
            });
        }
        if !any {
            report.tests_without_touching += 1;
        }
    }
    Ok(report)
}

/// `sup |u^μ − u|` over nodes at least two shells inside the box, per `μ`.
pub fn convergence_to_base(u: &ScalarField, g: &GroupSpec, mus: &[f64]) -> Result<Vec<f64>, ViscosityError> {
    if mus.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(ViscosityError::MuOrder);
    }
    mus.iter()
        .map(|&mu| {
            let c = sup_convolution(u, g, mu)?;
            Ok((0..u.len())
                .filter(|&p| u.grid.shell_depth(p) >= 2)
                .map(|p| (c.field.values[p] - u.values[p]).abs())
                .fold(0.0, f64::max))
        })
        .collect()
}
