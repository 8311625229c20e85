//! Mean curvature of level sets, the regularized coefficient matrix of the
//! approximating equations, and characteristic-set masks.

use thiserror::Error;

use crate::calculus::{eps_scale, CalculusError, NodeScratch};
use crate::grid::ScalarField;
use crate::group::{Frame, MAX_DIM};
use crate::par;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CurvatureError {
    #[error("coefficient matrix undefined for zero gradient without regularization")]
    Degenerate,
    #[error("regularization parameters must be finite and non-negative (rho={rho}, sigma={sigma})")]
    BadParameters { rho: f64, sigma: f64 },
    #[error("threshold must be positive, got {0}")]
    BadThreshold(f64),
    #[error("epsilon must be positive, got {0}")]
    BadEpsilon(f64),
    #[error(transparent)]
    Calculus(#[from] CalculusError),
}

/// `A_ij(ξ) = δ_ij − ξ_i ξ_j / (|ξ|² + ρ) + σ δ_ij`.
#[derive(Clone, Debug, PartialEq)]
pub struct CoeffMatrix {
    pub size: usize,
    pub entries: Vec<f64>,
    pub rho: f64,
    pub sigma: f64,
}

impl CoeffMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.size + j]
    }

    /// `ηᵀ A η`.
    pub fn quadratic_form(&self, eta: &[f64]) -> f64 {
        let n = self.size;
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                s += eta[i] * self.entries[i * n + j] * eta[j];
            }
        }
        s
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let m = nalgebra::DMatrix::from_row_slice(self.size, self.size, &self.entries);
        let mut ev: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }
}

pub fn coeff_matrix(xi: &[f64], rho: f64, sigma: f64) -> Result<CoeffMatrix, CurvatureError> {
    if !(rho >= 0.0 && sigma >= 0.0 && rho.is_finite() && sigma.is_finite()) {
        return Err(CurvatureError::BadParameters { rho, sigma });
    }
    let n = xi.len();
    let denom = xi.iter().map(|v| v * v).sum::<f64>() + rho;
    if denom == 0.0 {
        return Err(CurvatureError::Degenerate);
    }
    let mut entries = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let d = if i == j { 1.0 + sigma } else { 0.0 };
            entries[i * n + j] = d - xi[i] * xi[j] / denom;
        }
    }
    Ok(CoeffMatrix {
        size: n,
        entries,
        rho,
        sigma,
    })
}

/// Nodes where the gradient magnitude falls below `threshold`.
#[derive(Clone, Debug, PartialEq)]
pub struct CharMask {
    pub threshold: f64,
    pub flags: Vec<bool>,
}

impl CharMask {
    pub fn is_masked(&self, node: usize) -> bool {
        self.flags[node]
    }

    pub fn fraction(&self) -> f64 {
        if self.flags.is_empty() {
            return 0.0;
        }
        self.flags.iter().filter(|&&f| f).count() as f64 / self.flags.len() as f64
    }

    /// Mask as a 0/1 field for export.
    pub fn to_field(&self, like: &ScalarField) -> ScalarField {
        like.like(
            self.flags.iter().map(|&f| if f { 1.0 } else { 0.0 }).collect(),
            0.0,
        )
    }
}

/// Curvature `[Σ (δ_ij − ξ_iξ_j/|ξ|²)(X_i X_j u)*] / |ξ|` over indices
/// `0..width` with weights `eps_scale`, and the gradient magnitude `|ξ|`.
pub(crate) fn node_curvature(
    s: &NodeScratch,
    n: usize,
    m: usize,
    width: usize,
    eps: f64,
    drift: bool,
) -> (f64, f64) {
    let mut xi = [0.0; MAX_DIM];
    let mut scale = [0.0; MAX_DIM];
    for i in 0..width {
        scale[i] = eps_scale(i, m, eps);
        xi[i] = scale[i] * s.vf(n, i);
    }
    let norm2: f64 = xi[..width].iter().map(|v| v * v).sum();
    let norm = norm2.sqrt();
    if norm2 == 0.0 {
        return (0.0, 0.0);
    }
    let mut k = 0.0;
    for i in 0..width {
        if scale[i] == 0.0 {
            continue;
        }
        for j in 0..width {
            if scale[j] == 0.0 {
                continue;
            }
            let a = if i == j { 1.0 } else { 0.0 } - xi[i] * xi[j] / norm2;
            if a != 0.0 {
                k += a * scale[i] * scale[j] * s.sym_second(n, i, j, drift);
            }
        }
    }
    (k / norm, norm)
}

fn curvature(
    u: &ScalarField,
    frame: &Frame,
    width: usize,
    eps: f64,
    tau: f64,
) -> Result<(ScalarField, CharMask), CurvatureError> {
    if !(tau > 0.0) {
        return Err(CurvatureError::BadThreshold(tau));
    }
    crate::calculus::check(u, frame, &[])?;
    let n = frame.dim();
    let m = frame.horizontal_dim();
    let drift = frame.has_symmetric_drift();
    let pairs: Vec<(f64, bool)> = par::map(u.len(), |node| {
        let mut s = NodeScratch::new(n);
        s.load(u, frame, node, true);
        let (k, norm) = node_curvature(&s, n, m, width, eps, drift);
        if norm < tau {
            (0.0, true)
        } else {
            (k, false)
        }
    });
    let values = pairs.iter().map(|p| p.0).collect();
    let flags = pairs.iter().map(|p| p.1).collect();
    Ok((
        u.like(values, 0.0),
        CharMask {
            threshold: tau,
            flags,
        },
    ))
}

/// Horizontal mean curvature `K_0` of the level sets of `u`.
///
/// Nodes with `|∇_0 u| < τ` are flagged in the mask and carry the value 0.
pub fn horizontal_mean_curvature(
    u: &ScalarField,
    frame: &Frame,
    tau: f64,
) -> Result<(ScalarField, CharMask), CurvatureError> {
    curvature(u, frame, frame.horizontal_dim(), 0.0, tau)
}

/// Riemannian mean curvature `K_ε` for the metric making `{X_i, ε X_j}` orthonormal.
///
/// The mask flags `|∇_ε u| < τ`.
pub fn riemannian_mean_curvature(
    u: &ScalarField,
    frame: &Frame,
    eps: f64,
    tau: f64,
) -> Result<(ScalarField, CharMask), CurvatureError> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(CurvatureError::BadEpsilon(eps));
    }
    curvature(u, frame, frame.dim(), eps, tau)
}

/// Default mask threshold: the largest grid spacing.
pub fn default_threshold(u: &ScalarField) -> f64 {
    u.grid.max_spacing()
}
