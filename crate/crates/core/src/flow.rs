//! Explicit time stepping of the regularized level-set equation
//!
//! ```text
//! ∂_t u = Σ_{i,j} A_ij(∇_ε u) (X_i^ε X_j^ε u)*,   A = (1+σ) I − ξ ξᵀ / (|ξ|² + ρ)
//! ```
//!
//! with `ρ = δ`, and of the graph flow (`ε = 0`, `ρ = 1`). The operator is
//! rewritten in coordinates as `Σ_{kl} B_kl ∂_kl u + first-order terms`, with
//! `B = (s a)ᵀ A (s a)`. Where `B` is diagonally dominant, mixed differences
//! use the diagonal pair matching the sign of `B_kl`, which keeps every
//! off-centre weight non-negative; elsewhere they use the central four-point
//! difference.

use std::sync::{Arc, Mutex};

use thiserror::Error;

use crate::calculus::{eps_scale, CalculusError, NodeScratch};
use crate::grid::{Grid, GridError, Padded, ScalarField};
use crate::group::{Frame, GroupSpec, MAX_DIM};
use crate::par;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlowError {
    #[error("invalid flow parameters: {0}")]
    Params(String),
    #[error("non-finite value produced at step {step} (node {node})")]
    NonFinite { step: usize, node: usize },
    #[error("invalid schedule: {0}")]
    Schedule(String),
    #[error("fields live on different grids")]
    GridMismatch,
    #[error(transparent)]
    Calculus(#[from] CalculusError),
    #[error(transparent)]
    Grid(#[from] GridError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct FlowParams {
    /// Weight of the higher-layer generators.
    pub eps: f64,
    /// Gradient regularization; enters the coefficients as `ρ = δ`.
    pub delta: f64,
    pub sigma: f64,
    pub cfl: f64,
    pub t_end: f64,
    /// Snapshot cadence in steps (the first and last step are always kept).
    pub snapshot_every: usize,
    /// Extra snapshot times; each is taken at the nearest step.
    pub snapshot_times: Vec<f64>,
    /// Record the right-Lipschitz seminorm and mask fraction every step.
    pub full_metrics: bool,
    /// Mask threshold for the metrics; defaults to the largest spacing.
    pub mask_threshold: Option<f64>,
}

impl FlowParams {
    pub fn new(eps: f64, delta: f64, t_end: f64) -> Self {
        FlowParams {
            eps,
            delta,
            sigma: 0.0,
            cfl: 0.25,
            t_end,
            snapshot_every: usize::MAX,
            snapshot_times: Vec::new(),
            full_metrics: true,
            mask_threshold: None,
        }
    }

    pub fn validate(&self) -> Result<(), FlowError> {
        let bad = |m: String| Err(FlowError::Params(m));
        if !(self.eps >= 0.0 && self.eps.is_finite()) {
            return bad(format!("eps must be >= 0, got {}", self.eps));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return bad(format!("delta must be > 0, got {}", self.delta));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return bad(format!("sigma must be >= 0, got {}", self.sigma));
        }
        if !(self.cfl > 0.0 && self.cfl <= 0.5) {
            return bad(format!("cfl must lie in (0, 0.5], got {}", self.cfl));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return bad(format!("t_end must be > 0, got {}", self.t_end));
        }
        if self.snapshot_every == 0 {
            return bad("snapshot_every must be positive".into());
        }
        Ok(())
    }
}

/// Per-chunk buffers for the node loop, reused across nodes.
struct FlowScratch {
    node: NodeScratch,
    b: [f64; MAX_DIM * MAX_DIM],
    bm: [f64; MAX_DIM * MAX_DIM],
}

impl FlowScratch {
    fn new(n: usize) -> Self {
        FlowScratch {
            node: NodeScratch::new(n),
            b: [0.0; MAX_DIM * MAX_DIM],
            bm: [0.0; MAX_DIM * MAX_DIM],
        }
    }
}

/// The discrete operator `u ↦ Σ A_ij (X_i^ε X_j^ε u)*` for fixed `(ε, ρ, σ)`.
#[derive(Clone, Debug)]
pub struct FlowOperator {
    left: Frame,
    right: Frame,
    eps: f64,
    rho: f64,
    sigma: f64,
    cache: Arc<Mutex<Option<Arc<CoeffCache>>>>,
}

/// Frame coefficients at every node of one grid.
#[derive(Debug)]
struct CoeffCache {
    grid: Grid,
    a: Vec<f64>,
    /// Index of every node in the ghost-padded layout.
    padded: Vec<usize>,
}

impl FlowOperator {
    pub fn new(g: &GroupSpec, eps: f64, rho: f64, sigma: f64) -> Self {
        FlowOperator {
            left: Frame::left(g),
            right: Frame::right(g),
            eps,
            rho,
            sigma,
            cache: Arc::default(),
        }
    }

    /// Operator of the level-set equation with `ρ = δ`.
    pub fn level_set(g: &GroupSpec, p: &FlowParams) -> Self {
        FlowOperator::new(g, p.eps, p.delta, p.sigma)
    }

    /// Operator of the graph flow: horizontal only with `ρ = 1`.
    pub fn graph(g: &GroupSpec) -> Self {
        FlowOperator::new(g, 0.0, 1.0, 0.0)
    }

    pub fn frame(&self) -> &Frame {
        &self.left
    }

    pub fn right_frame(&self) -> &Frame {
        &self.right
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    fn width(&self) -> usize {
        if self.eps > 0.0 {
            self.left.dim()
        } else {
            self.left.horizontal_dim()
        }
    }

    /// Operator value at a loaded node.
    ///
    /// With `b = s a` and `v = bᵀξ`, `B = (1+σ) bᵀb − v vᵀ / (|ξ|² + ρ)`.
    #[inline(always)]
    fn node_rate<const N: usize>(&self, fs: &mut FlowScratch) -> f64 {
        let FlowScratch { node: s, b, bm } = fs;
        let n = if N == 0 { self.left.dim() } else { N };
        let m = self.left.horizontal_dim();
        let w = self.width();
        let mut d1 = [0.0; MAX_DIM];
        for k in 0..n {
            d1[k] = s.st.d1(k);
        }
        let mut xi = [0.0; MAX_DIM];
        let mut sc = [0.0; MAX_DIM];
        let mut norm2 = 0.0;
        for i in 0..w {
            sc[i] = eps_scale(i, m, self.eps);
            let mut g = 0.0;
            for k in 0..n {
                let v = sc[i] * s.a[i * n + k];
                b[i * n + k] = v;
                g += v * d1[k];
            }
            xi[i] = g;
            norm2 += g * g;
        }
        let inv = 1.0 / (norm2 + self.rho);
        let diag = 1.0 + self.sigma;
        let mut v = [0.0; MAX_DIM];
        for k in 0..n {
            let mut t = 0.0;
            for i in 0..w {
                t += b[i * n + k] * xi[i];
            }
            v[k] = t;
        }
        for k in 0..n {
            for l in k..n {
                let mut g = 0.0;
                for i in 0..w {
                    g += b[i * n + k] * b[i * n + l];
                }
                let e = diag * g - v[k] * v[l] * inv;
                bm[k * n + l] = e;
                bm[l * n + k] = e;
            }
        }
        // Sign-adapted mixed differences give non-negative weights only when B
        // is diagonally dominant (scaled by the spacings). Without dominance
        // they amplify the checkerboard mode, so those nodes use the central
        // four-point difference, whose symbol is non-positive for any PSD B.
        let inv_h = &s.st.inv_h;
        let dominant = (0..n).all(|k| {
            let off: f64 = (0..n).filter(|&l| l != k).map(|l| bm[k * n + l].abs() * inv_h[l]).sum();
            bm[k * n + k] * inv_h[k] >= off
        });
        let mut rate = 0.0;
        for k in 0..n {
            let bkk = bm[k * n + k];
            if bkk != 0.0 {
                rate += bkk * s.st.d2(k);
            }
            for l in k + 1..n {
                let bkl = bm[k * n + l];
                if bkl == 0.0 {
                    continue;
                }
                let d = if !dominant {
                    s.st.cross(k, l)
                } else if bkl > 0.0 {
                    s.st.cross_plus(k, l)
                } else {
                    s.st.cross_minus(k, l)
                };
                rate += 2.0 * bkl * d;
            }
        }
        if self.left.has_symmetric_drift() {
            for i in 0..w {
                for j in 0..w {
                    let d = if i == j { diag } else { 0.0 };
                    let wij = (d - xi[i] * xi[j] * inv) * sc[i] * sc[j];
                    if wij == 0.0 {
                        continue;
                    }
                    let base = (i * n + j) * n;
                    for l in 0..n {
                        let d = s.drift[base + l];
                        if d != 0.0 {
                            rate += wij * d * d1[l];
                        }
                    }
                }
            }
        }
        rate
    }

    fn coefficients(&self, grid: &Grid) -> Arc<CoeffCache> {
        let mut slot = self.cache.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(c) = slot.as_ref() {
            if &c.grid == grid {
                return c.clone();
            }
        }
        let n = self.left.dim();
        let nn = n * n;
        let mut a = vec![0.0; grid.len() * nn];
        let left = &self.left;
        par::fill_chunks(&mut a, nn, |node, out| {
            let mut x = [0.0; MAX_DIM];
            let mut buf = [0.0; MAX_DIM * MAX_DIM];
            grid.node_coords(node, &mut x);
            left.eval_into(&x[..n], &mut buf);
            out.copy_from_slice(&buf[..nn]);
        });
        let c = Arc::new(CoeffCache {
            grid: grid.clone(),
            a,
            padded: par::map(grid.len(), |node| Padded::index(grid, node)),
        });
        *slot = Some(c.clone());
        c
    }

    fn fill_rates(&self, u: &ScalarField, out: &mut [f64], dt: Option<f64>) {
        match self.left.dim() {
            2 => self.fill_rates_n::<2>(u, out, dt),
            3 => self.fill_rates_n::<3>(u, out, dt),
            4 => self.fill_rates_n::<4>(u, out, dt),
            5 => self.fill_rates_n::<5>(u, out, dt),
            _ => self.fill_rates_n::<0>(u, out, dt),
        }
    }

    /// `N` is the dimension when non-zero, so the small loops unroll;
    /// `N = 0` reads it at run time.
    fn fill_rates_n<const N: usize>(&self, u: &ScalarField, out: &mut [f64], dt: Option<f64>) {
        let n = if N == 0 { self.left.dim() } else { N };
        let nn = n * n;
        let cache = self.coefficients(&u.grid);
        let drift = self.left.has_symmetric_drift();
        let pad = u.padded();
        par::fill_with(out, || FlowScratch::new(n), |fs, node| {
            let s = &mut fs.node;
            s.a[..nn].copy_from_slice(&cache.a[node * nn..(node + 1) * nn]);
            s.st.gather_padded_n::<N>(&u.grid, &pad, cache.padded[node]);
            if drift {
                u.grid.node_coords(node, &mut s.x);
                self.left.sym_drift_into(&s.x[..n], &mut s.drift);
            }
            let r = self.node_rate::<N>(fs);
            match dt {
                Some(dt) => u.values[node] + dt * r,
                None => r,
            }
        });
    }

    /// Operator applied at every node.
    pub fn rate(&self, u: &ScalarField) -> Result<ScalarField, FlowError> {
        crate::calculus::check(u, &self.left, &[])?;
        let mut out = vec![0.0; u.len()];
        self.fill_rates(u, &mut out, None);
        Ok(u.like(out, 0.0))
    }

    /// One explicit Euler step of size `dt`.
    pub fn step(&self, u: &ScalarField, dt: f64) -> Result<ScalarField, FlowError> {
        crate::calculus::check(u, &self.left, &[])?;
        let mut out = vec![0.0; u.len()];
        self.fill_rates(u, &mut out, Some(dt));
        if let Some(node) = out.iter().position(|v| !v.is_finite()) {
            return Err(FlowError::NonFinite { step: 0, node });
        }
        let mut next = u.like(out, u.far_field);
        next.time = u.time + dt;
        Ok(next)
    }

    /// Largest `|s_i a_ik|` over the grid nodes (at least 1).
    pub fn coefficient_bound(&self, grid: &Grid) -> f64 {
        let n = self.left.dim();
        let m = self.left.horizontal_dim();
        let w = self.width();
        let eps = self.eps;
        let left = &self.left;
        par::max(grid.len(), |node| {
            let mut x = [0.0; MAX_DIM];
            let mut a = [0.0; MAX_DIM * MAX_DIM];
            grid.node_coords(node, &mut x);
            left.eval_into(&x[..n], &mut a);
            let mut l = 1.0_f64;
            for i in 0..w {
                let e = eps_scale(i, m, eps);
                for k in 0..n {
                    l = l.max((e * a[i * n + k]).abs());
                }
            }
            l
        })
    }

    /// `dt = cfl · min h² / (n L² (1 + σ))`.
    pub fn cfl_dt(&self, grid: &Grid, cfl: f64) -> f64 {
        let l = self.coefficient_bound(grid);
        let h = grid.min_spacing();
        cfl * h * h / (self.left.dim() as f64 * l * l * (1.0 + self.sigma))
    }

    /// `max |∇̃_0 u|` and the fraction of nodes with `|∇_0 u| < τ`.
    pub fn gradient_metrics(&self, u: &ScalarField, tau: f64) -> (f64, f64) {
        let n = self.left.dim();
        let m = self.left.horizontal_dim();
        let pairs: Vec<(f64, bool)> = par::map(u.len(), |node| {
            let mut s = NodeScratch::new(n);
            s.load(u, &self.right, node, false);
            let mut r2 = 0.0;
            for i in 0..m {
                let v = s.vf(n, i);
                r2 += v * v;
            }
            self.left.eval_into(&s.x[..n], &mut s.a);
            let mut l2 = 0.0;
            for i in 0..m {
                let v = s.vf(n, i);
                l2 += v * v;
            }
            (r2.sqrt(), l2.sqrt() < tau)
        });
        let lip = pairs.iter().fold(0.0_f64, |a, p| a.max(p.0));
        let masked = pairs.iter().filter(|p| p.1).count();
        (lip, masked as f64 / u.len().max(1) as f64)
    }
}

/// Stable explicit step for the level-set equation.
pub fn cfl_dt(grid: &Grid, g: &GroupSpec, params: &FlowParams) -> Result<f64, FlowError> {
    params.validate()?;
    if grid.is_empty() {
        return Err(FlowError::Params("empty grid".into()));
    }
    Ok(FlowOperator::level_set(g, params).cfl_dt(grid, params.cfl))
}

/// One step of the level-set equation with the CFL step size.
pub fn step_level_set(
    u: &ScalarField,
    g: &GroupSpec,
    params: &FlowParams,
) -> Result<ScalarField, FlowError> {
    let dt = cfl_dt(&u.grid, g, params)?;
    FlowOperator::level_set(g, params).step(u, dt)
}

/// One step of the graph flow `∂_t U = Σ (δ_ij − X_iU X_jU/(1+|∇_0U|²)) (X_iX_jU)*`.
pub fn step_graph_flow(u: &ScalarField, g: &GroupSpec, cfl: f64) -> Result<ScalarField, FlowError> {
    let op = FlowOperator::graph(g);
    let dt = op.cfl_dt(&u.grid, cfl);
    op.step(u, dt)
}

/// Right-invariant Lipschitz seminorm `max |∇̃_0 u|` over the grid.
pub fn lipschitz_seminorm(u: &ScalarField, g: &GroupSpec) -> Result<f64, FlowError> {
    let right = Frame::right(g);
    crate::calculus::check(u, &right, &[])?;
    let n = right.dim();
    let m = right.horizontal_dim();
    Ok(par::max(u.len(), |node| {
        let mut s = NodeScratch::new(n);
        s.load(u, &right, node, false);
        (0..m).map(|i| s.vf(n, i).powi(2)).sum::<f64>().sqrt()
    })
    .max(0.0))
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepMetrics {
    pub step: usize,
    pub t: f64,
    pub dt: f64,
    pub sup: f64,
    pub inf: f64,
    pub lip_right: f64,
    pub mask_fraction: f64,
}

impl StepMetrics {
    pub const CSV_HEADER: &'static str = "step,t,dt,sup,inf,lip_right,mask_fraction";

    pub fn csv_line(&self) -> String {
        format!(
            "{},{:?},{:?},{:?},{:?},{:?},{:?}",
            self.step, self.t, self.dt, self.sup, self.inf, self.lip_right, self.mask_fraction
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub snapshots: Vec<ScalarField>,
    pub metrics: Vec<StepMetrics>,
    pub dt: f64,
    pub steps: usize,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.time).collect()
    }

    /// Snapshot whose time is closest to `t`.
    pub fn nearest(&self, t: f64) -> &ScalarField {
        self.snapshots
            .iter()
            .min_by(|a, b| (a.time - t).abs().total_cmp(&(b.time - t).abs()))
            .expect("trajectory has at least one snapshot")
    }

    pub fn last(&self) -> &ScalarField {
        self.snapshots.last().expect("trajectory has at least one snapshot")
    }

    pub fn metrics_csv(&self) -> String {
        let mut s = String::from(StepMetrics::CSV_HEADER);
        s.push('\n');
        for m in &self.metrics {
            s.push_str(&m.csv_line());
            s.push('\n');
        }
        s
    }
}

/// Step count and uniform step size covering `[0, t_end]`.
pub fn step_plan(t_end: f64, dt_max: f64) -> (usize, f64) {
    let steps = ((t_end / dt_max) - 1e-9).ceil().max(1.0) as usize;
    (steps, t_end / steps as f64)
}

/// Drives an operator from `initial` to `params.t_end`.
pub fn run_with(
    op: &FlowOperator,
    initial: &ScalarField,
    params: &FlowParams,
) -> Result<Trajectory, FlowError> {
    params.validate()?;
    crate::calculus::check(initial, op.frame(), &[])?;
    let (steps, dt) = step_plan(params.t_end, op.cfl_dt(&initial.grid, params.cfl));
    let tau = params
        .mask_threshold
        .unwrap_or_else(|| initial.grid.max_spacing());
    let wanted: Vec<usize> = params
        .snapshot_times
        .iter()
        .map(|&t| ((t / dt).round().max(0.0) as usize).min(steps))
        .collect();
    let record = |u: &ScalarField, step: usize| -> StepMetrics {
        let (lip_right, mask_fraction) = if params.full_metrics {
            op.gradient_metrics(u, tau)
        } else {
            (f64::NAN, f64::NAN)
        };
        StepMetrics {
            step,
            t: u.time,
            dt: if step == 0 { 0.0 } else { dt },
            sup: u.max(),
            inf: u.min(),
            lip_right,
            mask_fraction,
        }
    };
    let mut u = initial.clone();
    let mut snapshots = vec![u.clone()];
    let mut metrics = vec![record(&u, 0)];
    for k in 1..=steps {
        let mut next = op.step(&u, dt).map_err(|e| match e {
            FlowError::NonFinite { node, .. } => FlowError::NonFinite { step: k, node },
            e => e,
        })?;
        next.time = if k == steps {
            initial.time + params.t_end
        } else {
            initial.time + k as f64 * dt
        };
        u = next;
        metrics.push(record(&u, k));
        if k % params.snapshot_every == 0 || k == steps || wanted.contains(&k) {
            snapshots.push(u.clone());
        }
    }
    Ok(Trajectory {
        snapshots,
        metrics,
        dt,
        steps,
    })
}

/// Level-set flow of `initial` with the regularized coefficients.
pub fn run_flow(
    initial: &ScalarField,
    g: &GroupSpec,
    params: &FlowParams,
) -> Result<Trajectory, FlowError> {
    run_with(&FlowOperator::level_set(g, params), initial, params)
}

/// Checks that `ε_k/δ_k` strictly decreases along the schedule. A schedule
/// with every `ε_k = 0` is accepted (the ratio is identically zero).
pub fn validate_schedule(schedule: &[(f64, f64)]) -> Result<(), FlowError> {
    if schedule.is_empty() {
        return Err(FlowError::Schedule("empty schedule".into()));
    }
    for &(eps, delta) in schedule {
        if !(delta > 0.0) || !(eps >= 0.0) {
            return Err(FlowError::Schedule(format!(
                "entry (eps={eps}, delta={delta}) needs eps >= 0, delta > 0"
            )));
        }
    }
    if schedule.iter().all(|&(e, _)| e == 0.0) {
        return Ok(());
    }
    for (k, w) in schedule.windows(2).enumerate() {
        let r0 = w[0].0 / w[0].1;
        let r1 = w[1].0 / w[1].1;
        if !(r1 < r0) {
            return Err(FlowError::Schedule(format!(
                "eps/delta must strictly decrease: entry {} has {r0}, entry {} has {r1}",
                k + 1,
                k + 2
            )));
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct CauchyEntry {
    /// 0-based index of the coarser member of the pair `(k, k+1)`.
    pub k: usize,
    pub eps: f64,
    pub delta: f64,
    /// `max_t sup_interior |u_k − u_{k+1}|`.
    pub distance: f64,
    pub worst_time: f64,
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct CauchyReport {
    pub entries: Vec<CauchyEntry>,
}

impl CauchyReport {
    pub fn distances(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.distance).collect()
    }

    pub fn strictly_decreasing(&self) -> bool {
        self.entries.windows(2).all(|w| w[1].distance < w[0].distance)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("k,eps,delta,d,t\n");
        for e in &self.entries {
            s.push_str(&format!(
                "{},{:?},{:?},{:?},{:?}\n",
                e.k + 1,
                e.eps,
                e.delta,
                e.distance,
                e.worst_time
            ));
        }
        s
    }
}

/// Sup-distance between two fields over nodes at least `shells` away from the box faces.
pub fn interior_distance(a: &ScalarField, b: &ScalarField, shells: usize) -> Result<f64, FlowError> {
    if a.grid != b.grid {
        return Err(FlowError::GridMismatch);
    }
    Ok(par::max(a.len(), |p| {
        if a.grid.shell_depth(p) >= shells {
            (a.values[p] - b.values[p]).abs()
        } else {
            0.0
        }
    })
    .max(0.0))
}

/// Runs the flow for each `(ε_k, δ_k)` and reports consecutive distances.
pub fn vanishing_viscosity_run(
    initial: &ScalarField,
    g: &GroupSpec,
    schedule: &[(f64, f64)],
    base: &FlowParams,
) -> Result<(Vec<Trajectory>, CauchyReport), FlowError> {
    validate_schedule(schedule)?;
    let mut runs = Vec::with_capacity(schedule.len());
    for &(eps, delta) in schedule {
        let p = FlowParams {
            eps,
            delta,
            ..base.clone()
        };
        runs.push(run_flow(initial, g, &p)?);
    }
    let mut report = CauchyReport::default();
    for k in 0..runs.len().saturating_sub(1) {
        let (mut worst, mut at) = (0.0_f64, 0.0);
        for snap in &runs[k].snapshots {
            let other = runs[k + 1].nearest(snap.time);
            let d = interior_distance(snap, other, 2)?;
            if d > worst {
                worst = d;
                at = snap.time;
            }
        }
        report.entries.push(CauchyEntry {
            k,
            eps: schedule[k].0,
            delta: schedule[k].1,
            distance: worst,
            worst_time: at,
        });
    }
    Ok((runs, report))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonReport {
    /// `max (u_f − u_g)⁺` over all steps and nodes.
    pub max_violation: f64,
    pub worst_step: usize,
    pub worst_node: usize,
    /// `max_t ‖u_f(·,t)‖_∞ − ‖f‖_∞` (positive means the bound failed).
    pub sup_growth: f64,
    pub steps: usize,
    /// Whether `f ≤ g` held at the start.
    pub ordered_initially: bool,
}

/// Evolves `f` and `g` side by side and records the worst ordering violation
/// at every step, together with the growth of `‖u_f‖_∞`.
pub fn comparison_check(
    f: &ScalarField,
    g_data: &ScalarField,
    group: &GroupSpec,
    params: &FlowParams,
) -> Result<ComparisonReport, FlowError> {
    params.validate()?;
    if f.grid != g_data.grid {
        return Err(FlowError::GridMismatch);
    }
    let op = FlowOperator::level_set(group, params);
    let (steps, dt) = step_plan(params.t_end, op.cfl_dt(&f.grid, params.cfl));
    let f_norm = f.sup_norm();
    let violation = |a: &ScalarField, b: &ScalarField| -> (f64, usize) {
        let mut worst = (0.0, 0);
        for (p, (x, y)) in a.values.iter().zip(&b.values).enumerate() {
            if x - y > worst.0 {
                worst = (x - y, p);
            }
        }
        worst
    };
    let (v0, _) = violation(f, g_data);
    let mut report = ComparisonReport {
        max_violation: 0.0,
        worst_step: 0,
        worst_node: 0,
        sup_growth: f64::NEG_INFINITY,
        steps,
        ordered_initially: v0 == 0.0,
    };
    let (mut u, mut w) = (f.clone(), g_data.clone());
    for k in 1..=steps {
        u = op.step(&u, dt)?;
        w = op.step(&w, dt)?;
        let (v, p) = violation(&u, &w);
        if v > report.max_violation {
            report.max_violation = v;
            report.worst_step = k;
            report.worst_node = p;
        }
        report.sup_growth = report.sup_growth.max(u.sup_norm() - f_norm);
    }
    Ok(report)
}
