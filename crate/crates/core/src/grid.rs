//! Uniform tensor grids in exponential coordinates and fields sampled on them.
//!
//! Node values are stored row-major with the last axis fastest. Outside the
//! box each axis is padded either with the field's far-field constant or by
//! linear extrapolation (for data such as `x_3` that has no constant value
//! at infinity along that axis).

use thiserror::Error;

use crate::group::MAX_DIM;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("grid needs at least 5 nodes per axis, axis {axis} has {count}")]
    TooSmall { axis: usize, count: usize },
    #[error("spacing on axis {axis} must be positive and finite, got {h}")]
    BadSpacing { axis: usize, h: f64 },
    #[error("grid dimension {0} outside 1..={MAX_DIM}")]
    BadDimension(usize),
    #[error("inconsistent axis lists: {0}")]
    Shape(String),
    #[error("field has {got} values, grid has {expected} nodes")]
    ValueCount { expected: usize, got: usize },
    #[error("non-finite value at node {0}")]
    NonFinite(usize),
    #[error("grids differ")]
    Mismatch,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    dims: Vec<usize>,
    h: Vec<f64>,
    origin: Vec<f64>,
    strides: Vec<usize>,
    len: usize,
}

impl Grid {
    pub fn new(dims: Vec<usize>, h: Vec<f64>, origin: Vec<f64>) -> Result<Self, GridError> {
        let n = dims.len();
        if n == 0 || n > MAX_DIM {
            return Err(GridError::BadDimension(n));
        }
        if h.len() != n || origin.len() != n {
            return Err(GridError::Shape(format!(
                "{} counts, {} spacings, {} origins",
                n,
                h.len(),
                origin.len()
            )));
        }
        for (axis, (&count, &hk)) in dims.iter().zip(&h).enumerate() {
            if count < 5 {
                return Err(GridError::TooSmall { axis, count });
            }
            if !(hk > 0.0 && hk.is_finite()) {
                return Err(GridError::BadSpacing { axis, h: hk });
            }
        }
        let mut strides = vec![1; n];
        for k in (0..n - 1).rev() {
            strides[k] = strides[k + 1] * dims[k + 1];
        }
        let len = dims.iter().product();
        Ok(Grid {
            dims,
            h,
            origin,
            strides,
            len,
        })
    }

    /// Grid covering `[lo_k, hi_k]` on every axis with spacing `h_k`; the
    /// node count is rounded to the nearest integer number of cells.
    pub fn from_box(lo: &[f64], hi: &[f64], h: &[f64]) -> Result<Self, GridError> {
        if lo.len() != hi.len() || lo.len() != h.len() {
            return Err(GridError::Shape("box bounds and spacings differ in length".into()));
        }
        let mut dims = Vec::with_capacity(lo.len());
        for (k, ((&a, &b), &hk)) in lo.iter().zip(hi).zip(h).enumerate() {
            if !(hk > 0.0 && hk.is_finite()) {
                return Err(GridError::BadSpacing { axis: k, h: hk });
            }
            let cells = ((b - a) / hk).round();
            dims.push(if cells >= 0.0 { cells as usize + 1 } else { 0 });
        }
        Grid::new(dims, h.to_vec(), lo.to_vec())
    }

    /// Cube `[-half, half]^n` with uniform spacing.
    pub fn cube(n: usize, half: f64, h: f64) -> Result<Self, GridError> {
        Grid::from_box(&vec![-half; n], &vec![half; n], &vec![h; n])
    }

    pub fn dim(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn spacing(&self) -> &[f64] {
        &self.h
    }

    pub fn origin(&self) -> &[f64] {
        &self.origin
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn max_spacing(&self) -> f64 {
        self.h.iter().copied().fold(0.0, f64::max)
    }

    pub fn min_spacing(&self) -> f64 {
        self.h.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Coordinate of index `i` along `axis`.
    #[inline]
    pub fn coord(&self, axis: usize, i: usize) -> f64 {
        self.origin[axis] + i as f64 * self.h[axis]
    }

    /// Upper end of the box along `axis`.
    pub fn upper(&self, axis: usize) -> f64 {
        self.coord(axis, self.dims[axis] - 1)
    }

    #[inline]
    pub fn multi_index(&self, mut flat: usize) -> [usize; MAX_DIM] {
        let mut idx = [0; MAX_DIM];
        for k in (0..self.dim()).rev() {
            idx[k] = flat % self.dims[k];
            flat /= self.dims[k];
        }
        idx
    }

    #[inline]
    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    /// Writes the coordinates of node `flat` into `out[..n]`.
    #[inline]
    pub fn node_coords(&self, flat: usize, out: &mut [f64]) {
        let idx = self.multi_index(flat);
        for k in 0..self.dim() {
            out[k] = self.coord(k, idx[k]);
        }
    }

    pub fn point(&self, flat: usize) -> Vec<f64> {
        let mut x = vec![0.0; self.dim()];
        self.node_coords(flat, &mut x);
        x
    }

    /// Distance in nodes from `flat` to the nearest face of the box.
    #[inline]
    pub fn shell_depth(&self, flat: usize) -> usize {
        let idx = self.multi_index(flat);
        (0..self.dim())
            .map(|k| idx[k].min(self.dims[k] - 1 - idx[k]))
            .min()
            .unwrap_or(0)
    }

    /// Nearest node to `x` (clamped to the box).
    pub fn nearest_node(&self, x: &[f64]) -> usize {
        let mut idx = [0; MAX_DIM];
        for k in 0..self.dim() {
            let f = ((x[k] - self.origin[k]) / self.h[k]).round();
            idx[k] = f.clamp(0.0, (self.dims[k] - 1) as f64) as usize;
        }
        self.flat_index(&idx[..self.dim()])
    }
}

/// How values are continued past the box along one axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AxisBoundary {
    /// Ghost nodes carry the far-field constant.
    FarField,
    /// Ghost nodes are linear extrapolations `2u_b - u_{b∓1}`.
    Linear,
}

impl AxisBoundary {
    pub fn code(self) -> char {
        match self {
            AxisBoundary::FarField => 'F',
            AxisBoundary::Linear => 'L',
        }
    }

    pub fn from_code(c: char) -> Option<Self> {
        match c {
            'F' => Some(AxisBoundary::FarField),
            'L' => Some(AxisBoundary::Linear),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    pub grid: Grid,
    pub values: Vec<f64>,
    pub far_field: f64,
    pub time: f64,
    pub boundary: Vec<AxisBoundary>,
}

impl ScalarField {
    pub fn new(grid: Grid, values: Vec<f64>, far_field: f64) -> Result<Self, GridError> {
        if values.len() != grid.len() {
            return Err(GridError::ValueCount {
                expected: grid.len(),
                got: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(GridError::NonFinite(i));
        }
        let n = grid.dim();
        Ok(ScalarField {
            grid,
            values,
            far_field,
            time: 0.0,
            boundary: vec![AxisBoundary::FarField; n],
        })
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        let len = grid.len();
        ScalarField::new(grid, vec![c; len], c).expect("constant field")
    }

    /// Samples `f` at every node.
    pub fn from_fn<F>(grid: Grid, far_field: f64, f: F) -> Result<Self, GridError>
    where
        F: Fn(&[f64]) -> f64 + Sync + Send,
    {
        let mut values = vec![0.0; grid.len()];
        let n = grid.dim();
        crate::par::fill_with(&mut values, || [0.0; MAX_DIM], |x, i| {
            grid.node_coords(i, x);
            f(&x[..n])
        });
        ScalarField::new(grid, values, far_field)
    }

    pub fn with_boundary(mut self, boundary: Vec<AxisBoundary>) -> Self {
        assert_eq!(boundary.len(), self.grid.dim());
        self.boundary = boundary;
        self
    }

    pub fn with_time(mut self, t: f64) -> Self {
        self.time = t;
        self
    }

    /// Same grid, boundary and time, new values.
    pub fn like(&self, values: Vec<f64>, far_field: f64) -> Self {
        ScalarField {
            grid: self.grid.clone(),
            values,
            far_field,
            time: self.time,
            boundary: self.boundary.clone(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `max |u|` over the nodes.
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Value at signed multi-index `idx` (entries may be `-1` or `N_k`).
    pub fn value_at(&self, idx: &[isize]) -> f64 {
        let n = self.grid.dim();
        let dims = self.grid.dims();
        for k in 0..n {
            let i = idx[k];
            if (i < 0 || i >= dims[k] as isize) && self.boundary[k] == AxisBoundary::FarField {
                return self.far_field;
            }
        }
        // Linear ghosts: tensor product of the 1D rule `u_b + s (u_b − u_inner)`.
        let strides = self.grid.strides();
        let mut flat = 0usize;
        // (signed offset to the inner neighbour, ghost distance) per outside axis
        let mut outside = [(0isize, 0.0f64); MAX_DIM];
        let mut q = 0;
        for k in 0..n {
            let i = idx[k];
            let last = dims[k] as isize - 1;
            if i < 0 {
                outside[q] = (strides[k] as isize, -i as f64);
                q += 1;
            } else if i > last {
                flat += last as usize * strides[k];
                outside[q] = (-(strides[k] as isize), (i - last) as f64);
                q += 1;
            } else {
                flat += i as usize * strides[k];
            }
        }
        if q == 0 {
            return self.values[flat];
        }
        let mut acc = 0.0;
        for mask in 0..(1usize << q) {
            let mut w = 1.0;
            let mut p = flat as isize;
            for (bit, &(off, steps)) in outside[..q].iter().enumerate() {
                if mask >> bit & 1 == 1 {
                    p += off;
                    w *= -steps;
                } else {
                    w *= 1.0 + steps;
                }
            }
            acc += w * self.values[p as usize];
        }
        acc
    }

    /// Copy of the values with one ghost layer on every side.
    pub fn padded(&self) -> Padded {
        let n = self.grid.dim();
        let mut dims = [1usize; MAX_DIM];
        let mut strides = [0usize; MAX_DIM];
        let mut len = 1;
        for k in (0..n).rev() {
            dims[k] = self.grid.dims()[k] + 2;
            strides[k] = len;
            len *= dims[k];
        }
        let inner = self.grid.dims();
        let inner_strides = self.grid.strides();
        let last = n - 1;
        let w = dims[last];
        let mut values = vec![0.0; len];
        // one row along the fastest axis at a time; interior rows are copied
        crate::par::fill_chunks(&mut values, w, |mut row, out| {
            let mut j = [0isize; MAX_DIM];
            let mut base = 0;
            let mut ghost_row = false;
            for k in (0..last).rev() {
                j[k] = (row % dims[k]) as isize - 1;
                row /= dims[k];
                ghost_row |= j[k] < 0 || j[k] >= inner[k] as isize;
                base += j[k].max(0) as usize * inner_strides[k];
            }
            if ghost_row {
                for (c, v) in out.iter_mut().enumerate() {
                    j[last] = c as isize - 1;
                    *v = self.value_at(&j[..n]);
                }
            } else {
                out[1..w - 1].copy_from_slice(&self.values[base..base + inner[last]]);
                j[last] = -1;
                out[0] = self.value_at(&j[..n]);
                j[last] = inner[last] as isize;
                out[w - 1] = self.value_at(&j[..n]);
            }
        });
        Padded { values, strides }
    }
}

/// Field values with a ghost layer, so every node of the field is interior.
#[derive(Clone, Debug)]
pub struct Padded {
    pub values: Vec<f64>,
    strides: [usize; MAX_DIM],
}

impl Padded {
    /// Position of grid node `flat` in the padded array of any field on `grid`.
    pub fn index(grid: &Grid, flat: usize) -> usize {
        let idx = grid.multi_index(flat);
        let (mut p, mut stride) = (0, 1);
        for k in (0..grid.dim()).rev() {
            p += (idx[k] + 1) * stride;
            stride *= grid.dims()[k] + 2;
        }
        p
    }
}

/// Values of a field on the 1-ring and diagonal neighbours of one node.
///
/// `plus[k]`/`minus[k]` are `u(x ± h_k e_k)`; for `k < l` the diagonal
/// entries are `pp = u(+e_k+e_l)`, `pm = u(+e_k-e_l)`, `mp = u(-e_k+e_l)`,
/// `mm = u(-e_k-e_l)` stored at `k*MAX_DIM + l`.
#[derive(Clone, Debug)]
pub struct Stencil {
    pub n: usize,
    pub c: f64,
    pub plus: [f64; MAX_DIM],
    pub minus: [f64; MAX_DIM],
    pub pp: [f64; MAX_DIM * MAX_DIM],
    pub pm: [f64; MAX_DIM * MAX_DIM],
    pub mp: [f64; MAX_DIM * MAX_DIM],
    pub mm: [f64; MAX_DIM * MAX_DIM],
    pub inv_h: [f64; MAX_DIM],
    h: [f64; MAX_DIM],
}

impl Stencil {
    pub fn new(n: usize) -> Self {
        Stencil {
            n,
            c: 0.0,
            plus: [0.0; MAX_DIM],
            minus: [0.0; MAX_DIM],
            pp: [0.0; MAX_DIM * MAX_DIM],
            pm: [0.0; MAX_DIM * MAX_DIM],
            mp: [0.0; MAX_DIM * MAX_DIM],
            mm: [0.0; MAX_DIM * MAX_DIM],
            inv_h: [0.0; MAX_DIM],
            h: [0.0; MAX_DIM],
        }
    }

    /// Gathers the first-order neighbours only (`c`, `plus`, `minus`).
    #[inline]
    pub fn gather_first(&mut self, u: &ScalarField, flat: usize) {
        let idx = u.grid.multi_index(flat);
        self.first_at(u, flat, &idx);
    }

    /// Gathers first-order and diagonal neighbours.
    #[inline]
    pub fn gather(&mut self, u: &ScalarField, flat: usize) {
        let idx = u.grid.multi_index(flat);
        let interior = self.first_at(u, flat, &idx);
        let g = &u.grid;
        let n = g.dim();
        if interior {
            let v = &u.values;
            for k in 0..n {
                let sk = g.strides()[k];
                for l in k + 1..n {
                    let sl = g.strides()[l];
                    let s = k * MAX_DIM + l;
                    self.pp[s] = v[flat + sk + sl];
                    self.pm[s] = v[flat + sk - sl];
                    self.mp[s] = v[flat - sk + sl];
                    self.mm[s] = v[flat - sk - sl];
                }
            }
        } else {
            let mut j = [0isize; MAX_DIM];
            for k in 0..n {
                j[k] = idx[k] as isize;
            }
            for k in 0..n {
                for l in k + 1..n {
                    let s = k * MAX_DIM + l;
                    let (ik, il) = (j[k], j[l]);
                    j[k] = ik + 1;
                    j[l] = il + 1;
                    self.pp[s] = u.value_at(&j[..n]);
                    j[l] = il - 1;
                    self.pm[s] = u.value_at(&j[..n]);
                    j[k] = ik - 1;
                    self.mm[s] = u.value_at(&j[..n]);
                    j[l] = il + 1;
                    self.mp[s] = u.value_at(&j[..n]);
                    j[k] = ik;
                    j[l] = il;
                }
            }
        }
    }

    /// Same values as [`Stencil::gather`], read from a padded copy of `u`.
    #[inline]
    ///
    /// `p` is the node's position in the padded array, see [`Padded::index`].
    pub fn gather_padded(&mut self, g: &Grid, pad: &Padded, p: usize) {
        self.gather_padded_n::<0>(g, pad, p);
    }

    /// [`Stencil::gather_padded`] with the dimension fixed to `N` (`0`: read from `g`).
    #[inline(always)]
    pub(crate) fn gather_padded_n<const N: usize>(&mut self, g: &Grid, pad: &Padded, p: usize) {
        let n = if N == 0 { g.dim() } else { N };
        self.set_spacing(g);
        let st = &pad.strides;
        let v = &pad.values;
        self.c = v[p];
        for k in 0..n {
            self.plus[k] = v[p + st[k]];
            self.minus[k] = v[p - st[k]];
            for l in k + 1..n {
                let s = k * MAX_DIM + l;
                self.pp[s] = v[p + st[k] + st[l]];
                self.pm[s] = v[p + st[k] - st[l]];
                self.mp[s] = v[p - st[k] + st[l]];
                self.mm[s] = v[p - st[k] - st[l]];
            }
        }
    }

    #[inline]
    fn set_spacing(&mut self, g: &Grid) {
        let n = g.dim();
        if self.h[..n] != *g.spacing() {
            for k in 0..n {
                self.h[k] = g.spacing()[k];
                self.inv_h[k] = 1.0 / g.spacing()[k];
            }
        }
    }

    /// Fills `c`, `plus`, `minus`; returns whether the node is interior.
    #[inline]
    fn first_at(&mut self, u: &ScalarField, flat: usize, idx: &[usize; MAX_DIM]) -> bool {
        let g = &u.grid;
        let n = g.dim();
        self.set_spacing(g);
        self.c = u.values[flat];
        let interior = (0..n).all(|k| idx[k] >= 1 && idx[k] + 1 < g.dims()[k]);
        if interior {
            let v = &u.values;
            for k in 0..n {
                let s = g.strides()[k];
                self.plus[k] = v[flat + s];
                self.minus[k] = v[flat - s];
            }
        } else {
            let mut j = [0isize; MAX_DIM];
            for k in 0..n {
                j[k] = idx[k] as isize;
            }
            for k in 0..n {
                j[k] += 1;
                self.plus[k] = u.value_at(&j[..n]);
                j[k] -= 2;
                self.minus[k] = u.value_at(&j[..n]);
                j[k] += 1;
            }
        }
        interior
    }

    /// Central first difference along `k`.
    #[inline]
    pub fn d1(&self, k: usize) -> f64 {
        (self.plus[k] - self.minus[k]) * 0.5 * self.inv_h[k]
    }

    /// Central second difference along `k`.
    #[inline]
    pub fn d2(&self, k: usize) -> f64 {
        (self.plus[k] - 2.0 * self.c + self.minus[k]) * self.inv_h[k] * self.inv_h[k]
    }

    /// Four-point central mixed difference, `k != l`.
    #[inline]
    pub fn cross(&self, k: usize, l: usize) -> f64 {
        let (a, b) = if k < l { (k, l) } else { (l, k) };
        let s = a * MAX_DIM + b;
        (self.pp[s] - self.pm[s] - self.mp[s] + self.mm[s]) * 0.25 * self.inv_h[a] * self.inv_h[b]
    }

    /// Mixed difference with non-negative off-centre weights on the
    /// `(+,+)`/`(-,-)` diagonal; used where the mixed coefficient is positive.
    #[inline]
    pub fn cross_plus(&self, k: usize, l: usize) -> f64 {
        let s = k * MAX_DIM + l;
        (self.pp[s] + self.mm[s] - self.plus[k] - self.minus[k] - self.plus[l] - self.minus[l]
            + 2.0 * self.c)
            * 0.5
            * self.inv_h[k]
            * self.inv_h[l]
    }

    /// Mirror of [`Stencil::cross_plus`] on the `(+,-)`/`(-,+)` diagonal;
    /// used where the mixed coefficient is negative.
    #[inline]
    pub fn cross_minus(&self, k: usize, l: usize) -> f64 {
        let s = k * MAX_DIM + l;
        -(self.pm[s] + self.mp[s] - self.plus[k] - self.minus[k] - self.plus[l] - self.minus[l]
            + 2.0 * self.c)
            * 0.5
            * self.inv_h[k]
            * self.inv_h[l]
    }
}
