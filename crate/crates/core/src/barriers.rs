//! Closed-form solutions and barriers: the self-shrinking cylinder
//! `u_0 = |x_H|²/2 + (m−1)t`, minimal coordinate planes `x_k` and their
//! squares, the cut-off `ψ`, and the modified barriers `w = ψ(u) − C_0 √δ t`.

use thiserror::Error;

use crate::flow::{FlowError, FlowOperator};
use crate::grid::{AxisBoundary, Grid, ScalarField};
use crate::group::GroupSpec;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BarrierError {
    #[error("the cylinder needs at least two horizontal directions, group has m = {0}")]
    CylinderNeedsTwo(usize),
    #[error(
        "coordinate {k} has degree {degree}; only degree 1 or 2 coordinate planes are minimal \
         (x_4 on the Engel group is a counterexample)",
        k = .k + 1
    )]
    PlaneDegree { k: usize, degree: u8 },
    #[error("coordinate index {k} out of range for dimension {n}")]
    PlaneIndex { k: usize, n: usize },
    #[error("radius must be positive, got {0}")]
    BadRadius(f64),
    #[error("cut-off is defined for s >= 0, got {0}")]
    NegativeArgument(f64),
    #[error("a modified barrier needs a non-negative base (cylinder or squared plane)")]
    InvalidKind,
    #[error("parameters need delta > 0 and C_0 >= 0 (delta={delta}, c0={c0})")]
    BadParameters { delta: f64, c0: f64 },
    #[error("eps^2 = {eps2:e} exceeds delta^(9/2) = {bound:e}")]
    EpsTooLarge { eps2: f64, bound: f64 },
    #[error("no sample times given")]
    NoTimes,
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Grid(#[from] crate::grid::GridError),
}

/// Cylinder value `u_0(x,t) = |x_H|²/2 + (m−1)t`.
pub fn cylinder_value(g: &GroupSpec, x: &[f64], t: f64) -> Result<f64, BarrierError> {
    let m = g.horizontal_dim();
    if m < 2 {
        return Err(BarrierError::CylinderNeedsTwo(m));
    }
    let r2: f64 = x[..m].iter().map(|v| v * v).sum();
    Ok(0.5 * r2 + (m as f64 - 1.0) * t)
}

/// `t* = R_0² / (2(m−1))`.
pub fn extinction_time(r0: f64, m: usize) -> Result<f64, BarrierError> {
    if m < 2 {
        return Err(BarrierError::CylinderNeedsTwo(m));
    }
    if !(r0 > 0.0) {
        return Err(BarrierError::BadRadius(r0));
    }
    Ok(r0 * r0 / (2.0 * (m as f64 - 1.0)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BarrierKind {
    Cylinder,
    /// `u = x_k` (0-based `k`).
    Plane(usize),
    /// `u = x_k²` (0-based `k`).
    PlaneSquared(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Barrier {
    pub kind: BarrierKind,
    group: GroupSpec,
}

impl Barrier {
    pub fn new(g: &GroupSpec, kind: BarrierKind) -> Result<Self, BarrierError> {
        match kind {
            BarrierKind::Cylinder => {
                if g.horizontal_dim() < 2 {
                    return Err(BarrierError::CylinderNeedsTwo(g.horizontal_dim()));
                }
            }
            BarrierKind::Plane(k) | BarrierKind::PlaneSquared(k) => {
                if k >= g.dim() {
                    return Err(BarrierError::PlaneIndex { k, n: g.dim() });
                }
                if g.weight(k) > 2 {
                    return Err(BarrierError::PlaneDegree {
                        k,
                        degree: g.weight(k),
                    });
                }
            }
        }
        Ok(Barrier {
            kind,
            group: g.clone(),
        })
    }

    pub fn group(&self) -> &GroupSpec {
        &self.group
    }

    /// `u(x, t)` of the underlying solution.
    pub fn value(&self, x: &[f64], t: f64) -> f64 {
        match self.kind {
            BarrierKind::Cylinder => cylinder_value(&self.group, x, t).expect("checked in new"),
            BarrierKind::Plane(k) => x[k],
            BarrierKind::PlaneSquared(k) => x[k] * x[k],
        }
    }

    /// `∂_t u`.
    pub fn time_derivative(&self) -> f64 {
        match self.kind {
            BarrierKind::Cylinder => self.group.horizontal_dim() as f64 - 1.0,
            _ => 0.0,
        }
    }

    /// Horizontal gradient `(X_1 u, …, X_m u)` from the structure constants:
    /// `X_i x_k = ½ Σ_{d(j)=1} c_{ji}^k x_j` when `d(k) = 2`.
    pub fn horizontal_gradient(&self, x: &[f64]) -> Vec<f64> {
        let g = &self.group;
        let m = g.horizontal_dim();
        let plane = |k: usize| -> Vec<f64> {
            (0..m)
                .map(|i| {
                    if g.weight(k) == 1 {
                        if i == k {
                            1.0
                        } else {
                            0.0
                        }
                    } else {
                        0.5 * (0..m).map(|j| g.constant(j, i, k) * x[j]).sum::<f64>()
                    }
                })
                .collect()
        };
        match self.kind {
            BarrierKind::Cylinder => x[..m].to_vec(),
            BarrierKind::Plane(k) => plane(k),
            BarrierKind::PlaneSquared(k) => plane(k).into_iter().map(|v| 2.0 * x[k] * v).collect(),
        }
    }
}

/// Minimal coordinate plane `x_k` (0-based), rejected when `d(k) = 3`.
pub fn plane_values(g: &GroupSpec, k: usize) -> Result<Barrier, BarrierError> {
    Barrier::new(g, BarrierKind::Plane(k))
}

fn check_s(s: f64) -> Result<(), BarrierError> {
    if s < 0.0 || s.is_nan() {
        return Err(BarrierError::NegativeArgument(s));
    }
    Ok(())
}

/// `ψ(s) = (s−2)³` on `[0, 2]`, zero beyond.
pub fn psi(s: f64) -> Result<f64, BarrierError> {
    check_s(s)?;
    Ok(if s < 2.0 { (s - 2.0).powi(3) } else { 0.0 })
}

pub fn psi_prime(s: f64) -> Result<f64, BarrierError> {
    check_s(s)?;
    Ok(if s < 2.0 { 3.0 * (s - 2.0).powi(2) } else { 0.0 })
}

pub fn psi_second(s: f64) -> Result<f64, BarrierError> {
    check_s(s)?;
    Ok(if s < 2.0 { 6.0 * (s - 2.0) } else { 0.0 })
}

fn check_w(b: &Barrier, delta: f64, c0: f64) -> Result<(), BarrierError> {
    if matches!(b.kind, BarrierKind::Plane(_)) {
        return Err(BarrierError::InvalidKind);
    }
    if !(delta > 0.0 && c0 >= 0.0) {
        return Err(BarrierError::BadParameters { delta, c0 });
    }
    Ok(())
}

/// `w(x,t) = ψ(u(x,t)) − C_0 √δ t`.
pub fn barrier_w(b: &Barrier, delta: f64, c0: f64, x: &[f64], t: f64) -> Result<f64, BarrierError> {
    check_w(b, delta, c0)?;
    Ok(psi(b.value(x, t))? - c0 * delta.sqrt() * t)
}

#[derive(Clone, Debug, PartialEq)]
pub struct BarrierReport {
    pub kind: BarrierKind,
    pub delta: f64,
    pub eps: f64,
    pub c0: f64,
    /// `max (∂_t w − RHS)` over interior nodes and sample times.
    pub max_residual: f64,
    pub slack: f64,
    pub worst_point: Vec<f64>,
    pub worst_time: f64,
}

impl BarrierReport {
    pub fn passed(&self) -> bool {
        self.max_residual <= self.slack
    }
}

/// Residual `∂_t w − Σ A_ij(∇_ε w) (X_i^ε X_j^ε w)*` with the regularizer
/// `|∇_ε w|² + δ²`, evaluated on interior nodes at each of `times`.
/// The time derivative is exact; the right-hand side uses the flow stencil.
///
/// Returns, per time, the residual field with `C_0 = 0` (the residual is
/// affine in `C_0` with slope `−√δ`).
fn base_residuals(
    b: &Barrier,
    delta: f64,
    eps: f64,
    grid: &Grid,
    times: &[f64],
) -> Result<Vec<(f64, ScalarField)>, BarrierError> {
    let bound = delta.powf(4.5);
    if eps * eps > bound {
        return Err(BarrierError::EpsTooLarge {
            eps2: eps * eps,
            bound,
        });
    }
    let op = FlowOperator::new(b.group(), eps, delta * delta, 0.0);
    let ut = b.time_derivative();
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        let w = ScalarField::from_fn(grid.clone(), 0.0, |x| {
            psi(b.value(x, t)).expect("non-negative base")
        })?
        .with_boundary(vec![AxisBoundary::Linear; grid.dim()]);
        let rhs = op.rate(&w)?;
        let res: Vec<f64> = (0..grid.len())
            .map(|p| {
                let x = grid.point(p);
                let lhs = psi_prime(b.value(&x, t)).expect("non-negative base") * ut;
                lhs - rhs.values[p]
            })
            .collect();
        out.push((t, w.like(res, 0.0)));
    }
    Ok(out)
}

fn summarize(
    b: &Barrier,
    base: &[(f64, ScalarField)],
    delta: f64,
    eps: f64,
    c0: f64,
    slack_coeff: f64,
) -> BarrierReport {
    let shift = c0 * delta.sqrt();
    let h = base[0].1.grid.max_spacing();
    let mut report = BarrierReport {
        kind: b.kind,
        delta,
        eps,
        c0,
        max_residual: f64::NEG_INFINITY,
        slack: slack_coeff * h * h,
        worst_point: Vec::new(),
        worst_time: 0.0,
    };
    for (t, r) in base {
        let grid = &r.grid;
        for p in 0..grid.len() {
            if grid.shell_depth(p) < 1 {
                continue;
            }
            let v = r.values[p] - shift;
            if v > report.max_residual {
                report.max_residual = v;
                report.worst_point = grid.point(p);
                report.worst_time = *t;
            }
        }
    }
    report
}

/// Evaluates the barrier inequality for a given `C_0`; passes when the
/// largest residual over interior nodes is at most `slack_coeff · h²`.
pub fn barrier_subsolution_residual(
    b: &Barrier,
    delta: f64,
    eps: f64,
    c0: f64,
    grid: &Grid,
    times: &[f64],
    slack_coeff: f64,
) -> Result<BarrierReport, BarrierError> {
    check_w(b, delta, c0)?;
    if times.is_empty() {
        return Err(BarrierError::NoTimes);
    }
    let base = base_residuals(b, delta, eps, grid, times)?;
    Ok(summarize(b, &base, delta, eps, c0, slack_coeff))
}

/// Smallest `C_0` for which the residual report passes, found by bisection
/// to relative precision `1e-10`.
pub fn calibrate_c0(
    b: &Barrier,
    delta: f64,
    eps: f64,
    grid: &Grid,
    times: &[f64],
    slack_coeff: f64,
) -> Result<BarrierReport, BarrierError> {
    check_w(b, delta, 0.0)?;
    if times.is_empty() {
        return Err(BarrierError::NoTimes);
    }
    let base = base_residuals(b, delta, eps, grid, times)?;
    let eval = |c0: f64| summarize(b, &base, delta, eps, c0, slack_coeff);
    if eval(0.0).passed() {
        return Ok(eval(0.0));
    }
    let mut hi = 1.0;
    while !eval(hi).passed() {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    while hi - lo > 1e-10 * hi {
        let mid = 0.5 * (lo + hi);
        if eval(mid).passed() {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(eval(hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::Preset;

    #[test]
    fn cylinder_and_extinction() {
        let g = Preset::Heisenberg(1).spec();
        assert_eq!(cylinder_value(&g, &[1.0, 0.0, 5.0], 0.0).unwrap(), 0.5);
        assert_eq!(cylinder_value(&g, &[1.0, 0.0, 5.0], 0.25).unwrap(), 0.75);
        assert_eq!(extinction_time(1.0, 2).unwrap(), 0.5);
        assert_eq!(extinction_time(2.0, 2).unwrap(), 2.0);
        assert!((extinction_time(1.0, 4).unwrap() - 1.0 / 6.0).abs() < 1e-16);
        assert!(extinction_time(1.0, 1).is_err());
        assert!(cylinder_value(&Preset::Euclidean(1).spec(), &[1.0], 0.0).is_err());
    }

    #[test]
    fn plane_gradients() {
        let g = Preset::Heisenberg(1).spec();
        let b = plane_values(&g, 2).unwrap();
        assert_eq!(b.horizontal_gradient(&[0.4, 0.6, 1.0]), vec![-0.3, 0.2]);
        let e = Preset::Euclidean(3).spec();
        assert_eq!(plane_values(&e, 1).unwrap().horizontal_gradient(&[1.0, 2.0, 3.0]), vec![0.0, 1.0, 0.0]);
        let engel = Preset::Engel.spec();
        assert!(matches!(
            plane_values(&engel, 3),
            Err(BarrierError::PlaneDegree { k: 3, degree: 3 })
        ));
        assert!(plane_values(&engel, 2).is_ok());
    }

    #[test]
    fn cutoff_values() {
        assert_eq!(psi(0.0).unwrap(), -8.0);
        assert_eq!(psi_prime(0.0).unwrap(), 12.0);
        assert_eq!(psi_second(0.0).unwrap(), -12.0);
        for s in [2.0, 3.5] {
            assert_eq!(psi(s).unwrap(), 0.0);
            assert_eq!(psi_prime(s).unwrap(), 0.0);
            assert_eq!(psi_second(s).unwrap(), 0.0);
        }
        assert!(psi(-0.1).is_err());
    }

    #[test]
    fn modified_barrier() {
        let g = Preset::Heisenberg(1).spec();
        let b = Barrier::new(&g, BarrierKind::Cylinder).unwrap();
        assert_eq!(barrier_w(&b, 0.1, 10.0, &[2.0, 0.0, 0.0], 0.0).unwrap(), 0.0);
        assert!(barrier_w(&b, 0.1, 10.0, &[0.6, 0.6, 0.0], 0.0).unwrap() <= -1.0);
        let w0 = barrier_w(&b, 0.1, 10.0, &[5.0, 0.0, 0.0], 0.0).unwrap();
        let w1 = barrier_w(&b, 0.1, 10.0, &[5.0, 0.0, 0.0], 1.0).unwrap();
        assert!((w0 - w1 - 10.0 * 0.1f64.sqrt()).abs() < 1e-14);
        let p = plane_values(&g, 2).unwrap();
        assert_eq!(barrier_w(&p, 0.1, 1.0, &[0.0; 3], 0.0), Err(BarrierError::InvalidKind));
    }

    #[test]
    fn eps_constraint_enforced() {
        let g = Preset::Heisenberg(1).spec();
        let b = Barrier::new(&g, BarrierKind::Cylinder).unwrap();
        let grid = Grid::cube(3, 1.0, 0.25).unwrap();
        let r = barrier_subsolution_residual(&b, 0.1, 0.1, 1.0, &grid, &[0.0], 1.0);
        assert!(matches!(r, Err(BarrierError::EpsTooLarge { .. })));
    }
}
