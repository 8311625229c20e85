//! Finite-difference realizations of the invariant frames on grid fields.
//!
//! Every derivative freezes the polynomial coefficients `a_{ik}` at the node
//! and differentiates in coordinates: `X_i u ≈ Σ_k a_{ik}(x) D_k u` with
//! central differences `D_k`. Second derivatives add the exact first-order
//! part `Σ_l X_i(a_{jl}) D_l u`, which is zero after symmetrization on step
//! two groups but not on step three (e.g. `X_1² x_4 = x_2/6` on Engel).

use thiserror::Error;

use crate::grid::{ScalarField, Stencil};
use crate::group::{Frame, MAX_DIM};
use crate::par;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CalculusError {
    #[error("frame index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },
    #[error("frame has dimension {frame}, grid has dimension {grid}")]
    DimensionMismatch { frame: usize, grid: usize },
    #[error("epsilon must be finite and non-negative, got {0}")]
    BadEpsilon(f64),
}

/// Per-node vectors stored node-major: entry `c` of node `p` is `values[p*width + c]`.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    pub width: usize,
    pub values: Vec<f64>,
}

impl VectorField {
    pub fn at(&self, node: usize) -> &[f64] {
        &self.values[node * self.width..(node + 1) * self.width]
    }

    /// Euclidean length of the vector at each node.
    pub fn norms(&self) -> Vec<f64> {
        self.values
            .chunks(self.width)
            .map(|v| v.iter().map(|c| c * c).sum::<f64>().sqrt())
            .collect()
    }
}

/// Scratch reused across the nodes of one chunk.
pub(crate) struct NodeScratch {
    pub x: [f64; MAX_DIM],
    pub a: [f64; MAX_DIM * MAX_DIM],
    pub drift: Vec<f64>,
    pub st: Stencil,
}

impl NodeScratch {
    pub fn new(n: usize) -> Self {
        NodeScratch {
            x: [0.0; MAX_DIM],
            a: [0.0; MAX_DIM * MAX_DIM],
            drift: vec![0.0; n * n * n],
            st: Stencil::new(n),
        }
    }

    /// Loads coordinates and coefficients of `node`; `drift` only if requested.
    #[inline]
    pub fn load(&mut self, u: &ScalarField, frame: &Frame, node: usize, second: bool) {
        let n = frame.dim();
        u.grid.node_coords(node, &mut self.x);
        frame.eval_into(&self.x[..n], &mut self.a);
        if second {
            self.st.gather(u, node);
            if frame.has_symmetric_drift() {
                frame.sym_drift_into(&self.x[..n], &mut self.drift);
            }
        } else {
            self.st.gather_first(u, node);
        }
    }

    /// `Σ_k a_{ik} D_k u`.
    #[inline]
    pub fn vf(&self, n: usize, i: usize) -> f64 {
        let mut s = 0.0;
        for k in 0..n {
            let a = self.a[i * n + k];
            if a != 0.0 {
                s += a * self.st.d1(k);
            }
        }
        s
    }

    /// Symmetrized `(X_i X_j u)*`, bit-for-bit symmetric in `(i, j)`.
    #[inline]
    pub fn sym_second(&self, n: usize, i: usize, j: usize, has_drift: bool) -> f64 {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        let ai = &self.a[i * n..i * n + n];
        let aj = &self.a[j * n..j * n + n];
        let mut s = 0.0;
        for k in 0..n {
            let w = ai[k] * aj[k];
            if w != 0.0 {
                s += w * self.st.d2(k);
            }
            for l in k + 1..n {
                let w = ai[k] * aj[l] + ai[l] * aj[k];
                if w != 0.0 {
                    s += w * self.st.cross(k, l);
                }
            }
        }
        if has_drift {
            let base = (i * n + j) * n;
            for l in 0..n {
                let d = self.drift[base + l];
                if d != 0.0 {
                    s += d * self.st.d1(l);
                }
            }
        }
        s
    }
}

pub(crate) fn check(u: &ScalarField, frame: &Frame, idx: &[usize]) -> Result<(), CalculusError> {
    let n = frame.dim();
    if u.grid.dim() != n {
        return Err(CalculusError::DimensionMismatch {
            frame: n,
            grid: u.grid.dim(),
        });
    }
    for &i in idx {
        if i >= n {
            return Err(CalculusError::IndexOutOfRange { index: i, dim: n });
        }
    }
    Ok(())
}

fn check_eps(eps: f64) -> Result<(), CalculusError> {
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(CalculusError::BadEpsilon(eps));
    }
    Ok(())
}

/// Weight `1` for horizontal generators, `ε` above the first layer.
#[inline]
pub(crate) fn eps_scale(i: usize, m: usize, eps: f64) -> f64 {
    if i < m {
        1.0
    } else {
        eps
    }
}

/// `X_i u` (or `X̃_i u` for a right frame).
pub fn apply_vf(u: &ScalarField, frame: &Frame, i: usize) -> Result<ScalarField, CalculusError> {
    check(u, frame, &[i])?;
    let n = frame.dim();
    let mut out = vec![0.0; u.len()];
    par::fill_with(&mut out, || NodeScratch::new(n), |s, node| {
        s.load(u, frame, node, false);
        s.vf(n, i)
    });
    Ok(u.like(out, 0.0))
}

/// Symmetrized `(X_i^ε X_j^ε u)*` with `X_i^ε = X_i` on the first layer and
/// `ε X_i` above it.
pub fn second_derivative(
    u: &ScalarField,
    frame: &Frame,
    i: usize,
    j: usize,
    eps: f64,
) -> Result<ScalarField, CalculusError> {
    check(u, frame, &[i, j])?;
    check_eps(eps)?;
    let n = frame.dim();
    let m = frame.horizontal_dim();
    let scale = eps_scale(i, m, eps) * eps_scale(j, m, eps);
    let drift = frame.has_symmetric_drift();
    let mut out = vec![0.0; u.len()];
    par::fill_with(&mut out, || NodeScratch::new(n), |s, node| {
        if scale == 0.0 {
            return 0.0;
        }
        s.load(u, frame, node, true);
        scale * s.sym_second(n, i, j, drift)
    });
    Ok(u.like(out, 0.0))
}

/// Unsymmetrized `X_i X_j u = Σ_{kl} a_{ik} a_{jl} D_{kl} u + Σ_l X_i(a_{jl}) D_l u`.
pub fn ordered_second_derivative(
    u: &ScalarField,
    frame: &Frame,
    i: usize,
    j: usize,
) -> Result<ScalarField, CalculusError> {
    check(u, frame, &[i, j])?;
    let n = frame.dim();
    let mut out = vec![0.0; u.len()];
    par::fill_with(
        &mut out,
        || (NodeScratch::new(n), vec![0.0; n * n * n]),
        |(s, od), node| {
            s.load(u, frame, node, true);
            frame.ordered_drift_into(&s.x[..n], od);
            let mut v = 0.0;
            for k in 0..n {
                for l in 0..n {
                    let w = s.a[i * n + k] * s.a[j * n + l];
                    if w != 0.0 {
                        let d = if k == l { s.st.d2(k) } else { s.st.cross(k, l) };
                        v += w * d;
                    }
                }
            }
            for l in 0..n {
                let d = od[(i * n + j) * n + l];
                if d != 0.0 {
                    v += d * s.st.d1(l);
                }
            }
            v
        },
    );
    Ok(u.like(out, 0.0))
}

/// `∇_0 u = (X_1 u, …, X_m u)` at every node.
pub fn horizontal_gradient(u: &ScalarField, frame: &Frame) -> Result<VectorField, CalculusError> {
    let m = frame.horizontal_dim();
    gradient(u, frame, m, 0.0)
}

/// `∇_ε u = (X_1 u, …, X_m u, ε X_{m+1} u, …, ε X_n u)` at every node.
pub fn eps_gradient(u: &ScalarField, frame: &Frame, eps: f64) -> Result<VectorField, CalculusError> {
    check_eps(eps)?;
    gradient(u, frame, frame.dim(), eps)
}

fn gradient(u: &ScalarField, frame: &Frame, width: usize, eps: f64) -> Result<VectorField, CalculusError> {
    check(u, frame, &[])?;
    let n = frame.dim();
    let m = frame.horizontal_dim();
    let rows: Vec<[f64; MAX_DIM]> = par::map(u.len(), |node| {
        let mut s = NodeScratch::new(n);
        s.load(u, frame, node, false);
        let mut g = [0.0; MAX_DIM];
        for (i, gi) in g.iter_mut().enumerate().take(width) {
            let e = eps_scale(i, m, eps);
            if e != 0.0 {
                *gi = e * s.vf(n, i);
            }
        }
        g
    });
    let mut values = Vec::with_capacity(u.len() * width);
    for r in &rows {
        values.extend_from_slice(&r[..width]);
    }
    Ok(VectorField { width, values })
}
