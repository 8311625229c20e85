//! Zero level sets of grid fields by linear interpolation along grid edges.

use crate::grid::ScalarField;
use crate::group::{GroupSpec, MAX_DIM};

#[derive(Clone, Debug, PartialEq)]
pub struct Crossing {
    /// Lower endpoint of the edge.
    pub node: usize,
    pub axis: usize,
    /// Fraction of the edge at which the interpolant vanishes.
    pub theta: f64,
    pub point: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LevelSetExtract {
    pub time: f64,
    pub crossings: Vec<Crossing>,
}

impl LevelSetExtract {
    pub fn is_empty(&self) -> bool {
        self.crossings.is_empty()
    }

    pub fn len(&self) -> usize {
        self.crossings.len()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("node,axis,theta,point\n");
        for c in &self.crossings {
            let p: Vec<String> = c.point.iter().map(|v| format!("{v:?}")).collect();
            s.push_str(&format!("{},{},{:?},{}\n", c.node, c.axis + 1, c.theta, p.join(" ")));
        }
        s
    }
}

/// Sign changes of `u` (negative vs. non-negative) along every grid edge.
pub fn extract_zero_level(u: &ScalarField) -> LevelSetExtract {
    let g = &u.grid;
    let n = g.dim();
    let mut crossings = Vec::new();
    let mut x = [0.0; MAX_DIM];
    for a in 0..g.len() {
        let idx = g.multi_index(a);
        let ua = u.values[a];
        for axis in 0..n {
            if idx[axis] + 1 >= g.dims()[axis] {
                continue;
            }
            let b = a + g.strides()[axis];
            let ub = u.values[b];
            if (ua < 0.0) != (ub < 0.0) {
                let theta = ua / (ua - ub);
                g.node_coords(a, &mut x);
                let mut point = x[..n].to_vec();
                point[axis] += theta * g.spacing()[axis];
                crossings.push(Crossing {
                    node: a,
                    axis,
                    theta,
                    point,
                });
            }
        }
    }
    LevelSetExtract {
        time: u.time,
        crossings,
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Radius {
    Measured { median: f64, mean: f64, count: usize },
    /// No crossings left on the box.
    Extinct,
}

impl Radius {
    pub fn median(&self) -> Option<f64> {
        match self {
            Radius::Measured { median, .. } => Some(*median),
            Radius::Extinct => None,
        }
    }
}

/// Median (and mean) of `|x_H|` over the crossing points.
pub fn measure_radius(extract: &LevelSetExtract, g: &GroupSpec) -> Radius {
    if extract.is_empty() {
        return Radius::Extinct;
    }
    let m = g.horizontal_dim();
    let mut r: Vec<f64> = extract
        .crossings
        .iter()
        .map(|c| c.point[..m].iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    r.sort_by(f64::total_cmp);
    let k = r.len();
    let median = if k % 2 == 1 {
        r[k / 2]
    } else {
        0.5 * (r[k / 2 - 1] + r[k / 2])
    };
    Radius::Measured {
        median,
        mean: r.iter().sum::<f64>() / k as f64,
        count: k,
    }
}
