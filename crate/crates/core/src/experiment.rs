//! Scenario runs: initial data, trajectories, reports and the artifact manifest.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::barriers::{barrier_subsolution_residual, calibrate_c0, Barrier, BarrierError, BarrierReport};
use crate::config::{InitialSpec, ScenarioConfig};
use crate::flow::{comparison_check, run_with, vanishing_viscosity_run, FlowError, FlowOperator, Trajectory};
use crate::grid::{AxisBoundary, GridError, ScalarField};
use crate::group::GroupSpec;
use crate::levelset::{extract_zero_level, measure_radius, LevelSetExtract, Radius};
use crate::snapshot::{self, SnapshotError};
use crate::viscosity::{coordinate_quadratics, viscosity_residual_check, Side, ViscosityError};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("{path}: {msg}")]
    Io { path: PathBuf, msg: String },
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Snapshot(#[from] SnapshotError),
    #[error(transparent)]
    Barrier(#[from] BarrierError),
    #[error(transparent)]
    Viscosity(#[from] ViscosityError),
    #[error("scenarios differ: {0}")]
    Mismatch(String),
    #[error("initial data: {0}")]
    Initial(String),
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> ExperimentError {
    ExperimentError::Io {
        path: path.to_path_buf(),
        msg: e.to_string(),
    }
}

/// `s` below `a`, constant above `b`, joined by a C³ transition.
pub fn cap(s: f64, a: f64, b: f64) -> f64 {
    if s <= a {
        return s;
    }
    let w = b - a;
    let y = ((s - a) / w).min(1.0);
    let y4 = y * y * y * y;
    // ∫ (35y⁴ − 84y⁵ + 70y⁶ − 20y⁷)
    let integral = y4 * y * (7.0 - 14.0 * y + 10.0 * y * y - 2.5 * y * y * y);
    a + w * (y - integral)
}

/// Value of [`cap`] past the transition.
pub fn cap_level(a: f64, b: f64) -> f64 {
    a + 0.5 * (b - a)
}

/// Builds `u(·, 0)` and its boundary handling.
pub fn initial_field(cfg: &ScenarioConfig) -> Result<ScalarField, ExperimentError> {
    let g = cfg.group();
    let grid = cfg.grid.build()?;
    let n = g.dim();
    let m = g.horizontal_dim();
    let field = match &cfg.initial {
        InitialSpec::Cylinder { radius, capped } => {
            let (a, b) = (0.25 * radius * radius, 0.25 * radius * radius + 1.0);
            let r2 = radius * radius;
            let half_r2 = |x: &[f64]| 0.5 * (x[..m].iter().map(|v| v * v).sum::<f64>() - r2);
            if *capped {
                let mut bc = vec![AxisBoundary::FarField; m];
                bc.resize(n, AxisBoundary::Linear);
                ScalarField::from_fn(grid, cap_level(a, b), |x| cap(half_r2(x), a, b))?.with_boundary(bc)
            } else {
                ScalarField::from_fn(grid, 0.0, half_r2)?.with_boundary(vec![AxisBoundary::Linear; n])
            }
        }
        InitialSpec::Plane { index } => {
            let k = *index;
            ScalarField::from_fn(grid, 0.0, |x| x[k])?.with_boundary(vec![AxisBoundary::Linear; n])
        }
        InitialSpec::Blob { center, radius } => {
            let (a, b) = (0.25 * radius * radius, 0.25 * radius * radius + 1.0);
            let r2 = radius * radius;
            ScalarField::from_fn(grid, cap_level(a, b), |x| {
                let s: f64 = x.iter().zip(center).map(|(v, c)| (v - c) * (v - c)).sum();
                cap(0.5 * (s - r2), a, b)
            })?
        }
        InitialSpec::Graph { expr } => {
            let e = *expr;
            let gg = g.clone();
            ScalarField::from_fn(grid, 0.0, move |x| e.eval(&gg, x))?
                .with_boundary(vec![AxisBoundary::Linear; n])
        }
        InitialSpec::Snapshot { path } => {
            let f = snapshot::read(path)?;
            if f.grid != grid {
                return Err(ExperimentError::Initial(format!(
                    "{} does not match the configured grid",
                    path.display()
                )));
            }
            f
        }
    };
    Ok(match &cfg.grid.boundary {
        Some(bc) => field.with_boundary(bc.clone()),
        None => field,
    })
}

fn operator(cfg: &ScenarioConfig, g: &GroupSpec) -> FlowOperator {
    match cfg.initial {
        InitialSpec::Graph { .. } => FlowOperator::graph(g),
        _ => FlowOperator::level_set(g, &cfg.flow),
    }
}

/// Trajectory of the configured scenario (the last schedule entry when a
/// vanishing-viscosity schedule is given) and the Cauchy report if any.
pub fn trajectory(cfg: &ScenarioConfig) -> Result<(Trajectory, Option<crate::flow::CauchyReport>), ExperimentError> {
    let g = cfg.group();
    let u0 = initial_field(cfg)?;
    match &cfg.schedule {
        Some(s) => {
            let (mut runs, report) = vanishing_viscosity_run(&u0, &g, s, &cfg.flow)?;
            Ok((runs.pop().expect("non-empty schedule"), Some(report)))
        }
        None => Ok((run_with(&operator(cfg, &g), &u0, &cfg.flow)?, None)),
    }
}

fn radius_csv(extracts: &[LevelSetExtract], g: &GroupSpec) -> String {
    let mut s = String::from("t,status,median,mean,count\n");
    for e in extracts {
        match measure_radius(e, g) {
            Radius::Measured { median, mean, count } => {
                let _ = writeln!(s, "{:?},measured,{median:?},{mean:?},{count}", e.time);
            }
            Radius::Extinct => {
                let _ = writeln!(s, "{:?},extinct,,,0", e.time);
            }
        }
    }
    s
}

fn barrier_report(cfg: &ScenarioConfig) -> Result<Option<BarrierReport>, ExperimentError> {
    let Some(spec) = &cfg.barrier else {
        return Ok(None);
    };
    let g = cfg.group();
    let b = Barrier::new(&g, spec.kind)?;
    let grid = cfg.grid.build()?;
    let r = match spec.c0 {
        Some(c0) => barrier_subsolution_residual(&b, spec.delta, spec.eps, c0, &grid, &spec.times, spec.slack)?,
        None => calibrate_c0(&b, spec.delta, spec.eps, &grid, &spec.times, spec.slack)?,
    };
    Ok(Some(r))
}

/// Barrier check of the `[barrier]` section.
pub fn verify_barriers(cfg: &ScenarioConfig) -> Result<BarrierReport, ExperimentError> {
    barrier_report(cfg)?.ok_or_else(|| ExperimentError::Initial("no [barrier] section".into()))
}

pub fn barrier_csv(r: &BarrierReport) -> String {
    let pt: Vec<String> = r.worst_point.iter().map(|v| format!("{v:?}")).collect();
    format!(
        "kind,delta,eps,c0,max_residual,slack,worst_point,worst_time,passed\n{:?},{:?},{:?},{:?},{:?},{:?},{},{:?},{}\n",
        r.kind,
        r.delta,
        r.eps,
        r.c0,
        r.max_residual,
        r.slack,
        pt.join(" "),
        r.worst_time,
        r.passed()
    )
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentOutcome {
    pub dir: PathBuf,
    /// `(relative path, sha256)` in write order.
    pub files: Vec<(String, String)>,
    /// Failed invariants, empty when all asserted checks passed.
    pub violations: Vec<String>,
    pub summary: Vec<String>,
}

impl ExperimentOutcome {
    pub fn manifest(&self) -> String {
        let mut files = self.files.clone();
        files.sort();
        files.iter().fold(String::new(), |mut s, (p, h)| {
            let _ = writeln!(s, "{h}  {p}");
            s
        })
    }
}

struct Writer {
    dir: PathBuf,
    files: Vec<(String, String)>,
}

impl Writer {
    fn put(&mut self, rel: &str, bytes: &[u8]) -> Result<(), ExperimentError> {
        let path = self.dir.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
        }
        fs::write(&path, bytes).map_err(|e| io_err(&path, e))?;
        self.files.push((rel.to_string(), sha256_hex(bytes)));
        Ok(())
    }
}

/// Tolerance for the discrete maximum principle and the ordering check.
pub const ORDER_TOL: f64 = 1e-10;

/// Runs a scenario and writes every artifact into `cfg.output_dir`.
pub fn run_experiment(cfg: &ScenarioConfig) -> Result<ExperimentOutcome, ExperimentError> {
    let g = cfg.group();
    let dir = cfg.output_dir.clone();
    fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
    let mut w = Writer {
        dir: dir.clone(),
        files: Vec::new(),
    };
    let mut violations = Vec::new();
    let mut summary = Vec::new();

    let (traj, cauchy) = trajectory(cfg)?;
    summary.push(format!("steps {} dt {:?}", traj.steps, traj.dt));
    w.put("metrics.csv", traj.metrics_csv().as_bytes())?;

    // Linear ghosts let the box extremum move with the data, so the bound is
    // only asserted when every axis is closed by the far-field constant.
    let closed = traj.snapshots[0].boundary.iter().all(|b| *b == AxisBoundary::FarField);
    let (sup0, inf0) = (traj.metrics[0].sup, traj.metrics[0].inf);
    if let Some(bad) = traj
        .metrics
        .iter()
        .find(|s| closed && (s.sup > sup0 + ORDER_TOL || s.inf < inf0 - ORDER_TOL))
    {
        violations.push(format!(
            "maximum principle: range [{:?}, {:?}] at t={:?} exceeds initial [{inf0:?}, {sup0:?}]",
            bad.inf, bad.sup, bad.t
        ));
    }

    if cfg.write_snapshots {
        for (i, s) in traj.snapshots.iter().enumerate() {
            w.put(&format!("snapshots/snap_{i:04}.cmcf"), &snapshot::to_bytes(s))?;
        }
    }
    if cfg.metrics.levelset || cfg.metrics.radius {
        let extracts: Vec<LevelSetExtract> = traj.snapshots.iter().map(extract_zero_level).collect();
        if cfg.metrics.levelset {
            for (i, e) in extracts.iter().enumerate() {
                w.put(&format!("levelset/extract_{i:04}.csv"), e.to_csv().as_bytes())?;
            }
        }
        if cfg.metrics.radius {
            w.put("radius.csv", radius_csv(&extracts, &g).as_bytes())?;
        }
    }

    if let Some(report) = cauchy {
        w.put("cauchy_report.csv", report.to_csv().as_bytes())?;
        if !report.strictly_decreasing() {
            violations.push(format!("cauchy distances not decreasing: {:?}", report.distances()));
        }
    }

    if let Some(c) = &cfg.comparison {
        let f = initial_field(cfg)?;
        let upper: Vec<f64> = (0..f.len())
            .map(|p| {
                let x = f.grid.point(p);
                let bump = x[0].sin() * x.get(1).copied().unwrap_or(0.0).cos();
                f.values[p] + c.offset * (1.0 + c.wave * bump)
            })
            .collect();
        let far = f.far_field + c.offset;
        let gdata = f.like(upper, far);
        let r = comparison_check(&f, &gdata, &g, &cfg.flow)?;
        w.put(
            "comparison.csv",
            format!(
                "max_violation,worst_step,worst_node,sup_growth,steps,ordered_initially\n{:?},{},{},{:?},{},{}\n",
                r.max_violation, r.worst_step, r.worst_node, r.sup_growth, r.steps, r.ordered_initially
            )
            .as_bytes(),
        )?;
        if r.max_violation > ORDER_TOL {
            violations.push(format!("comparison: ordering violated by {:?}", r.max_violation));
        }
    }

    if let Some(v) = &cfg.viscosity {
        let snaps = &traj.snapshots;
        let t_center = v
            .t_center
            .unwrap_or_else(|| 0.5 * (snaps[0].time + snaps[snaps.len() - 1].time));
        let tau = v.tau.unwrap_or_else(|| snaps[0].grid.max_spacing());
        for side in [Side::Sub, Side::Super] {
            let tests = coordinate_quadratics(&g, &v.centers, &v.scales, v.beta, v.kappa, v.q, t_center, side);
            let r = viscosity_residual_check(snaps, &g, &tests, tau, side, v.tolerance)?;
            w.put(&format!("viscosity_{side}.csv"), r.to_csv().as_bytes())?;
            summary.push(format!(
                "viscosity {side}: {} touchings, worst {:?}",
                r.records.len(),
                r.worst_violation()
            ));
            if !r.passed() {
                let at = r.worst().map(|t| (t.location.clone(), t.t));
                violations.push(format!("viscosity {side}: violation {:?} at {at:?}", r.worst_violation()));
            }
        }
    }

    if let Some(r) = barrier_report(cfg)? {
        w.put("barrier.csv", barrier_csv(&r).as_bytes())?;
        summary.push(format!("barrier c0 {:?} residual {:?}", r.c0, r.max_residual));
        if !r.passed() {
            violations.push(format!("barrier residual {:?} above slack {:?}", r.max_residual, r.slack));
        }
    }

    let mut outcome = ExperimentOutcome {
        dir,
        files: w.files,
        violations,
        summary,
    };
    let manifest = outcome.manifest();
    let path = outcome.dir.join("manifest.txt");
    fs::write(&path, manifest).map_err(|e| io_err(&path, e))?;
    outcome.summary.push(format!("{} files", outcome.files.len()));
    Ok(outcome)
}

/// Files whose content no longer matches `manifest.txt` (missing files included).
pub fn verify_manifest(dir: &Path) -> Result<Vec<String>, ExperimentError> {
    let path = dir.join("manifest.txt");
    let text = fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
    let mut bad = Vec::new();
    for line in text.lines() {
        let Some((hash, rel)) = line.split_once("  ") else {
            bad.push(format!("malformed line `{line}`"));
            continue;
        };
        match fs::read(dir.join(rel)) {
            Ok(bytes) if sha256_hex(&bytes) == hash => {}
            Ok(_) => bad.push(format!("{rel}: hash mismatch")),
            Err(_) => bad.push(format!("{rel}: missing")),
        }
    }
    Ok(bad)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SeparationRow {
    pub t: f64,
    pub a_in_b: bool,
    pub b_in_a: bool,
    /// Right-gauge distance between the zero sets (NaN once either is empty).
    pub separation: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SeparationReport {
    pub rows: Vec<SeparationRow>,
}

impl SeparationReport {
    /// Containment `{u_a ≤ 0} ⊂ {u_b ≤ 0}` holding initially but lost later.
    pub fn containment_lost(&self) -> Option<f64> {
        let first = self.rows.first()?;
        if !first.a_in_b {
            return None;
        }
        self.rows.iter().find(|r| !r.a_in_b).map(|r| r.t)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,a_in_b,b_in_a,separation_approx\n");
        for r in &self.rows {
            let _ = writeln!(s, "{:?},{},{},{:?}", r.t, r.a_in_b, r.b_in_a, r.separation);
        }
        s
    }
}

const SEPARATION_SAMPLES: usize = 1500;

fn subsample(e: &LevelSetExtract) -> Vec<&[f64]> {
    let stride = e.len().div_ceil(SEPARATION_SAMPLES).max(1);
    e.crossings.iter().step_by(stride).map(|c| c.point.as_slice()).collect()
}

fn separation(g: &GroupSpec, a: &LevelSetExtract, b: &LevelSetExtract) -> f64 {
    let (pa, pb) = (subsample(a), subsample(b));
    if pa.is_empty() || pb.is_empty() {
        return f64::NAN;
    }
    let mut best = f64::INFINITY;
    for x in &pa {
        for y in &pb {
            best = best.min(g.right_distance_slice(x, y));
        }
    }
    best
}

/// Runs two scenarios on the same group, grid and flow and compares their
/// sublevel sets `{u ≤ 0}` at every stored time.
pub fn separation_report(a: &ScenarioConfig, b: &ScenarioConfig) -> Result<SeparationReport, ExperimentError> {
    if a.preset != b.preset {
        return Err(ExperimentError::Mismatch("group".into()));
    }
    if a.grid != b.grid {
        return Err(ExperimentError::Mismatch("grid".into()));
    }
    if a.flow != b.flow || a.schedule != b.schedule {
        return Err(ExperimentError::Mismatch("flow".into()));
    }
    let g = a.group();
    let (ta, _) = trajectory(a)?;
    let (tb, _) = trajectory(b)?;
    let mut rows = Vec::new();
    for (sa, sb) in ta.snapshots.iter().zip(&tb.snapshots) {
        let (mut a_in_b, mut b_in_a) = (true, true);
        for (x, y) in sa.values.iter().zip(&sb.values) {
            a_in_b &= !(*x <= 0.0) || *y <= 0.0;
            b_in_a &= !(*y <= 0.0) || *x <= 0.0;
        }
        rows.push(SeparationRow {
            t: sa.time,
            a_in_b,
            b_in_a,
            separation: separation(&g, &extract_zero_level(sa), &extract_zero_level(sb)),
        });
    }
    Ok(SeparationReport { rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cap_is_smooth_and_saturates() {
        let (a, b) = (0.25, 1.25);
        assert_eq!(cap(-0.3, a, b), -0.3);
        assert_eq!(cap(a, a, b), a);
        assert!((cap(b, a, b) - cap_level(a, b)).abs() < 1e-15);
        assert_eq!(cap(10.0, a, b), cap_level(a, b));
        let h = 1e-4;
        for &s in &[a, b] {
            let d = |x: f64| (cap(x + h, a, b) - cap(x - h, a, b)) / (2.0 * h);
            let left = d(s - 10.0 * h);
            let right = d(s + 10.0 * h);
            assert!((left - right).abs() < 1e-3);
        }
        let mut prev = f64::NEG_INFINITY;
        for k in 0..200 {
            let v = cap(-0.5 + k as f64 * 0.01, a, b);
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn sha_hex_known_value() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
