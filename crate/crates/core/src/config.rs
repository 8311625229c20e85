//! Scenario files: plain sectioned `key = value` text.
//!
//! ```text
//! file    = *( line LF )
//! line    = blank / comment / section / pair
//! comment = *WSP "#" *CHAR
//! section = "[" name "]"
//! pair    = key *WSP "=" *WSP value
//! list    = value *( "," value )
//! ```
//!
//! Required sections are `[group] [grid] [initial] [flow] [output]`;
//! `[metrics] [viscosity] [comparison] [barrier]` are optional. Coordinate
//! and plane indices are 1-based.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::str::FromStr;

use thiserror::Error;

use crate::barriers::{plane_values, Barrier, BarrierKind};
use crate::flow::{validate_schedule, FlowParams};
use crate::grid::{AxisBoundary, Grid};
use crate::group::{GroupSpec, Preset};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("line {line}: unknown section [{name}]")]
    UnknownSection { line: usize, name: String },
    #[error("line {line}: unknown key `{key}` in [{section}]")]
    UnknownKey { line: usize, section: String, key: String },
    #[error("line {line}: duplicate {what}")]
    Duplicate { line: usize, what: String },
    #[error("line {line}: `{key}` expects {expected}, got `{value}`")]
    Type {
        line: usize,
        key: String,
        expected: &'static str,
        value: String,
    },
    #[error("missing section [{0}]")]
    MissingSection(String),
    #[error("missing key `{key}` in [{section}]")]
    MissingKey { section: String, key: String },
    #[error("line {line}: {msg}")]
    Invalid { line: usize, msg: String },
}

const SECTIONS: &[(&str, &[&str])] = &[
    ("group", &["preset"]),
    ("grid", &["lo", "hi", "h", "boundary"]),
    ("initial", &["kind", "radius", "profile", "index", "center", "path", "expr"]),
    (
        "flow",
        &[
            "eps",
            "delta",
            "sigma",
            "cfl",
            "t_end",
            "snapshot_every",
            "snapshot_times",
            "schedule",
        ],
    ),
    ("output", &["dir", "snapshots"]),
    ("metrics", &["full", "radius", "levelset", "mask_threshold"]),
    (
        "viscosity",
        &["scales", "beta", "kappa", "q", "t_center", "tau", "tolerance", "centers"],
    ),
    ("comparison", &["offset", "wave"]),
    ("barrier", &["kind", "index", "delta", "eps", "c0", "times", "slack"]),
];

const REQUIRED: &[&str] = &["group", "grid", "initial", "flow", "output"];

/// Named graph profiles `U_0` for the graph flow.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GraphExpr {
    /// `|x_H|²/2`
    Bowl,
    /// `x_1 x_2`
    Saddle,
    /// `sin x_1 cos x_2`
    Wave,
    /// `x_n`
    Vertical,
}

impl GraphExpr {
    pub fn eval(self, g: &GroupSpec, x: &[f64]) -> f64 {
        match self {
            GraphExpr::Bowl => 0.5 * x[..g.horizontal_dim()].iter().map(|v| v * v).sum::<f64>(),
            GraphExpr::Saddle => x[0] * x.get(1).copied().unwrap_or(0.0),
            GraphExpr::Wave => x[0].sin() * x.get(1).copied().unwrap_or(0.0).cos(),
            GraphExpr::Vertical => x[x.len() - 1],
        }
    }
}

impl FromStr for GraphExpr {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "bowl" => Ok(GraphExpr::Bowl),
            "saddle" => Ok(GraphExpr::Saddle),
            "wave" => Ok(GraphExpr::Wave),
            "vertical" => Ok(GraphExpr::Vertical),
            _ => Err(()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum InitialSpec {
    /// `|x_H|²/2 − R²/2`, optionally capped to a constant far field.
    Cylinder { radius: f64, capped: bool },
    /// 0-based index.
    Plane { index: usize },
    Blob { center: Vec<f64>, radius: f64 },
    Graph { expr: GraphExpr },
    Snapshot { path: PathBuf },
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridSpec {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub h: Vec<f64>,
    pub boundary: Option<Vec<AxisBoundary>>,
}

impl GridSpec {
    pub fn build(&self) -> Result<Grid, crate::grid::GridError> {
        Grid::from_box(&self.lo, &self.hi, &self.h)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsSpec {
    pub full: bool,
    pub radius: bool,
    pub levelset: bool,
    pub mask_threshold: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ViscositySpec {
    pub scales: Vec<f64>,
    pub beta: f64,
    pub kappa: f64,
    pub q: f64,
    pub t_center: Option<f64>,
    pub tau: Option<f64>,
    pub tolerance: f64,
    pub centers: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonSpec {
    pub offset: f64,
    pub wave: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BarrierSpec {
    pub kind: BarrierKind,
    pub delta: f64,
    pub eps: f64,
    pub c0: Option<f64>,
    pub times: Vec<f64>,
    pub slack: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioConfig {
    pub preset: Preset,
    pub grid: GridSpec,
    pub initial: InitialSpec,
    pub flow: FlowParams,
    /// `(ε_k, δ_k)`; when present the flow parameters' `ε, δ` are ignored.
    pub schedule: Option<Vec<(f64, f64)>>,
    pub output_dir: PathBuf,
    pub write_snapshots: bool,
    pub metrics: MetricsSpec,
    pub viscosity: Option<ViscositySpec>,
    pub comparison: Option<ComparisonSpec>,
    pub barrier: Option<BarrierSpec>,
}

impl ScenarioConfig {
    pub fn group(&self) -> GroupSpec {
        self.preset.spec()
    }
}

struct Entry {
    value: String,
    line: usize,
}

struct Section {
    line: usize,
    keys: BTreeMap<String, Entry>,
}

impl Section {
    fn raw(&self, key: &str) -> Option<&Entry> {
        self.keys.get(key)
    }

    fn get<T: FromStr>(&self, key: &str, expected: &'static str) -> Result<Option<T>, ConfigError> {
        match self.keys.get(key) {
            None => Ok(None),
            Some(e) => e.value.parse().map(Some).map_err(|_| ConfigError::Type {
                line: e.line,
                key: key.into(),
                expected,
                value: e.value.clone(),
            }),
        }
    }

    fn real(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        let v: Option<f64> = self.get(key, "a number")?;
        if let Some(x) = v {
            if !x.is_finite() {
                return Err(self.type_err(key, "a finite number"));
            }
        }
        Ok(v)
    }

    fn list(&self, key: &str) -> Result<Option<Vec<f64>>, ConfigError> {
        let Some(e) = self.keys.get(key) else {
            return Ok(None);
        };
        e.value
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| self.type_err(key, "a comma-separated list of numbers"))
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Some)
    }

    fn boolean(&self, key: &str) -> Result<Option<bool>, ConfigError> {
        self.get(key, "true or false")
    }

    fn type_err(&self, key: &str, expected: &'static str) -> ConfigError {
        let e = &self.keys[key];
        ConfigError::Type {
            line: e.line,
            key: key.into(),
            expected,
            value: e.value.clone(),
        }
    }

    fn line_of(&self, key: &str) -> usize {
        self.keys.get(key).map_or(self.line, |e| e.line)
    }
}

fn split_sections(text: &str) -> Result<BTreeMap<String, Section>, ConfigError> {
    let mut sections: BTreeMap<String, Section> = BTreeMap::new();
    let mut current: Option<String> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let s = raw.split('#').next().unwrap_or("").trim();
        if s.is_empty() {
            continue;
        }
        if let Some(rest) = s.strip_prefix('[') {
            let name = rest.strip_suffix(']').ok_or_else(|| ConfigError::Syntax {
                line,
                msg: format!("malformed section header `{s}`"),
            })?;
            let name = name.trim().to_string();
            if !SECTIONS.iter().any(|(n, _)| *n == name) {
                return Err(ConfigError::UnknownSection { line, name });
            }
            if sections.contains_key(&name) {
                return Err(ConfigError::Duplicate {
                    line,
                    what: format!("section [{name}]"),
                });
            }
            sections.insert(
                name.clone(),
                Section {
                    line,
                    keys: BTreeMap::new(),
                },
            );
            current = Some(name);
            continue;
        }
        let (k, v) = s.split_once('=').ok_or_else(|| ConfigError::Syntax {
            line,
            msg: format!("expected `key = value`, got `{s}`"),
        })?;
        let (k, v) = (k.trim().to_string(), v.trim().to_string());
        let sec = current.as_ref().ok_or_else(|| ConfigError::Syntax {
            line,
            msg: "key outside of any section".into(),
        })?;
        let allowed = SECTIONS.iter().find(|(n, _)| n == sec).map(|p| p.1).unwrap_or(&[]);
        if !allowed.contains(&k.as_str()) {
            return Err(ConfigError::UnknownKey {
                line,
                section: sec.clone(),
                key: k,
            });
        }
        let target = sections.get_mut(sec).expect("section inserted above");
        if target.keys.contains_key(&k) {
            return Err(ConfigError::Duplicate {
                line,
                what: format!("key `{k}`"),
            });
        }
        target.keys.insert(k, Entry { value: v, line });
    }
    for name in REQUIRED {
        if !sections.contains_key(*name) {
            return Err(ConfigError::MissingSection((*name).into()));
        }
    }
    Ok(sections)
}

fn require<T>(v: Option<T>, section: &str, key: &str) -> Result<T, ConfigError> {
    v.ok_or_else(|| ConfigError::MissingKey {
        section: section.into(),
        key: key.into(),
    })
}

/// Expands a single value to `n` copies; otherwise the length must be `n`.
fn per_axis(sec: &Section, key: &str, v: Vec<f64>, n: usize) -> Result<Vec<f64>, ConfigError> {
    match v.len() {
        1 => Ok(vec![v[0]; n]),
        k if k == n => Ok(v),
        k => Err(ConfigError::Invalid {
            line: sec.line_of(key),
            msg: format!("`{key}` has {k} entries, the group has dimension {n}"),
        }),
    }
}

fn one_based(sec: &Section, key: &str, n: usize) -> Result<usize, ConfigError> {
    let k: usize = require(sec.get(key, "a positive integer")?, "index", key)?;
    if k == 0 || k > n {
        return Err(ConfigError::Invalid {
            line: sec.line_of(key),
            msg: format!("`{key}` must lie in 1..={n}, got {k}"),
        });
    }
    Ok(k - 1)
}

/// Parses and validates a scenario file.
pub fn parse_config(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let secs = split_sections(text)?;

    let gs = &secs["group"];
    let preset_raw = require(gs.raw("preset"), "group", "preset")?;
    let preset: Preset = preset_raw.value.parse().map_err(|_| ConfigError::Type {
        line: preset_raw.line,
        key: "preset".into(),
        expected: "euclidean:<m>, heisenberg:<ν> or engel",
        value: preset_raw.value.clone(),
    })?;
    let g = preset.spec();
    let n = g.dim();

    let grs = &secs["grid"];
    let lo = per_axis(grs, "lo", require(grs.list("lo")?, "grid", "lo")?, n)?;
    let hi = per_axis(grs, "hi", require(grs.list("hi")?, "grid", "hi")?, n)?;
    let h = per_axis(grs, "h", require(grs.list("h")?, "grid", "h")?, n)?;
    let boundary = match grs.raw("boundary") {
        None => None,
        Some(e) => {
            let codes: Option<Vec<AxisBoundary>> = e
                .value
                .split(',')
                .map(|c| {
                    let c = c.trim();
                    let mut it = c.chars();
                    match (it.next(), it.next()) {
                        (Some(ch), None) => AxisBoundary::from_code(ch),
                        _ => None,
                    }
                })
                .collect();
            let codes = codes.ok_or_else(|| grs.type_err("boundary", "a list of F/L codes"))?;
            Some(per_boundary(grs, codes, n)?)
        }
    };
    let grid = GridSpec { lo, hi, h, boundary };
    grid.build().map_err(|e| ConfigError::Invalid {
        line: grs.line,
        msg: e.to_string(),
    })?;

    let is = &secs["initial"];
    let kind: String = require(is.get("kind", "a generator name")?, "initial", "kind")?;
    let initial = match kind.as_str() {
        "cylinder" => {
            let radius = require(is.real("radius")?, "initial", "radius")?;
            if !(radius > 0.0) {
                return Err(invalid(is, "radius", "radius must be positive"));
            }
            if g.horizontal_dim() < 2 {
                return Err(invalid(is, "kind", "cylinder data needs at least two horizontal directions"));
            }
            let capped = match is.get::<String>("profile", "quadratic or capped")?.as_deref() {
                None | Some("quadratic") => false,
                Some("capped") => true,
                Some(_) => return Err(is.type_err("profile", "quadratic or capped")),
            };
            InitialSpec::Cylinder { radius, capped }
        }
        "plane" => {
            let index = one_based(is, "index", n)?;
            plane_values(&g, index).map_err(|e| invalid(is, "index", &e.to_string()))?;
            InitialSpec::Plane { index }
        }
        "blob" => {
            let radius = require(is.real("radius")?, "initial", "radius")?;
            if !(radius > 0.0) {
                return Err(invalid(is, "radius", "radius must be positive"));
            }
            let center = match is.list("center")? {
                Some(c) => per_axis(is, "center", c, n)?,
                None => vec![0.0; n],
            };
            InitialSpec::Blob { center, radius }
        }
        "graph" => {
            let e: String = require(is.get("expr", "a profile name")?, "initial", "expr")?;
            let expr = e
                .parse()
                .map_err(|_| is.type_err("expr", "bowl, saddle, wave or vertical"))?;
            InitialSpec::Graph { expr }
        }
        "snapshot" => {
            let path: String = require(is.get("path", "a path")?, "initial", "path")?;
            InitialSpec::Snapshot { path: path.into() }
        }
        _ => return Err(is.type_err("kind", "cylinder, plane, blob, graph or snapshot")),
    };

    let fs = &secs["flow"];
    let schedule = match fs.raw("schedule") {
        None => None,
        Some(e) => {
            let pairs: Option<Vec<(f64, f64)>> = e
                .value
                .split(',')
                .map(|p| {
                    let (a, b) = p.split_once(':')?;
                    Some((a.trim().parse().ok()?, b.trim().parse().ok()?))
                })
                .collect();
            let pairs = pairs.ok_or_else(|| fs.type_err("schedule", "a list of eps:delta pairs"))?;
            validate_schedule(&pairs).map_err(|e| invalid(fs, "schedule", &e.to_string()))?;
            Some(pairs)
        }
    };
    let t_end = require(fs.real("t_end")?, "flow", "t_end")?;
    let (eps, delta) = match &schedule {
        Some(s) => *s.last().expect("validated non-empty"),
        None => (
            fs.real("eps")?.unwrap_or(0.0),
            require(fs.real("delta")?, "flow", "delta")?,
        ),
    };
    let mut flow = FlowParams::new(eps, delta, t_end);
    if let Some(s) = fs.real("sigma")? {
        flow.sigma = s;
    }
    if let Some(c) = fs.real("cfl")? {
        flow.cfl = c;
    }
    if let Some(k) = fs.get("snapshot_every", "a positive integer")? {
        flow.snapshot_every = k;
    }
    if let Some(t) = fs.list("snapshot_times")? {
        flow.snapshot_times = t;
    }

    let os = &secs["output"];
    let dir: String = require(os.get("dir", "a path")?, "output", "dir")?;
    let write_snapshots = os.boolean("snapshots")?.unwrap_or(true);

    let mut metrics = MetricsSpec {
        full: true,
        radius: matches!(initial, InitialSpec::Cylinder { .. }),
        levelset: true,
        mask_threshold: None,
    };
    if let Some(ms) = secs.get("metrics") {
        metrics.full = ms.boolean("full")?.unwrap_or(metrics.full);
        metrics.radius = ms.boolean("radius")?.unwrap_or(metrics.radius);
        metrics.levelset = ms.boolean("levelset")?.unwrap_or(metrics.levelset);
        metrics.mask_threshold = ms.real("mask_threshold")?;
        if metrics.mask_threshold.is_some_and(|t| !(t > 0.0)) {
            return Err(invalid(ms, "mask_threshold", "threshold must be positive"));
        }
    }
    flow.full_metrics = metrics.full;
    flow.mask_threshold = metrics.mask_threshold;
    flow.validate().map_err(|e| invalid(fs, "t_end", &e.to_string()))?;

    let viscosity = match secs.get("viscosity") {
        None => None,
        Some(vs) => {
            let scales = vs.list("scales")?.unwrap_or_else(|| vec![1.5, 2.0, 3.0, 4.0]);
            if scales.iter().any(|s| !(*s > 0.0)) {
                return Err(invalid(vs, "scales", "scales must be positive"));
            }
            let centers = match vs.raw("centers") {
                None => vec![(0..n).map(|k| 0.5 * (grid.lo[k] + grid.hi[k])).collect()],
                Some(e) => {
                    let mut out = Vec::new();
                    for part in e.value.split(';') {
                        let pt: Option<Vec<f64>> =
                            part.split(',').map(|t| t.trim().parse().ok()).collect();
                        match pt {
                            Some(p) if p.len() == n => out.push(p),
                            _ => return Err(vs.type_err("centers", "points separated by `;`")),
                        }
                    }
                    out
                }
            };
            Some(ViscositySpec {
                scales,
                beta: vs.real("beta")?.unwrap_or(1.0),
                kappa: vs.real("kappa")?.unwrap_or(20.0),
                q: vs.real("q")?.unwrap_or(0.0),
                t_center: vs.real("t_center")?,
                tau: vs.real("tau")?,
                tolerance: require(vs.real("tolerance")?, "viscosity", "tolerance")?,
                centers,
            })
        }
    };

    let comparison = match secs.get("comparison") {
        None => None,
        Some(cs) => {
            let offset = cs.real("offset")?.unwrap_or(0.1);
            let wave = cs.real("wave")?.unwrap_or(0.5);
            if !(offset >= 0.0) || !(0.0..=1.0).contains(&wave) {
                return Err(invalid(cs, "wave", "need offset ≥ 0 and 0 ≤ wave ≤ 1"));
            }
            Some(ComparisonSpec { offset, wave })
        }
    };

    let barrier = match secs.get("barrier") {
        None => None,
        Some(bs) => {
            let k: String = require(bs.get("kind", "a barrier name")?, "barrier", "kind")?;
            let kind = match k.as_str() {
                "cylinder" => BarrierKind::Cylinder,
                "plane" => BarrierKind::Plane(one_based(bs, "index", n)?),
                "plane_squared" => BarrierKind::PlaneSquared(one_based(bs, "index", n)?),
                _ => return Err(bs.type_err("kind", "cylinder, plane or plane_squared")),
            };
            Barrier::new(&g, kind).map_err(|e| invalid(bs, "kind", &e.to_string()))?;
            let times = bs.list("times")?.unwrap_or_else(|| vec![0.0, 0.05, 0.1]);
            Some(BarrierSpec {
                kind,
                delta: require(bs.real("delta")?, "barrier", "delta")?,
                eps: bs.real("eps")?.unwrap_or(0.0),
                c0: bs.real("c0")?,
                times,
                slack: bs.real("slack")?.unwrap_or(1.0),
            })
        }
    };

    Ok(ScenarioConfig {
        preset,
        grid,
        initial,
        flow,
        schedule,
        output_dir: dir.into(),
        write_snapshots,
        metrics,
        viscosity,
        comparison,
        barrier,
    })
}

fn per_boundary(sec: &Section, v: Vec<AxisBoundary>, n: usize) -> Result<Vec<AxisBoundary>, ConfigError> {
    match v.len() {
        1 => Ok(vec![v[0]; n]),
        k if k == n => Ok(v),
        k => Err(ConfigError::Invalid {
            line: sec.line_of("boundary"),
            msg: format!("`boundary` has {k} entries, the group has dimension {n}"),
        }),
    }
}

fn invalid(sec: &Section, key: &str, msg: &str) -> ConfigError {
    ConfigError::Invalid {
        line: sec.line_of(key),
        msg: msg.to_string(),
    }
}
