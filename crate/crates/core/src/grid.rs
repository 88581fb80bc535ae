//! Uniform MAC grid geometry, location-tagged grid functions and the
//! staggered difference / interpolation operators.
//!
//! Index conventions (storage index `(a, b)`, `a` along x, `b` along y):
//!
//! | location | shape            | point                          |
//! |----------|------------------|--------------------------------|
//! | `XFace`  | (nx+1) x (ny+2)  | (x_a, y_{b-1/2})               |
//! | `YFace`  | (nx+2) x (ny+1)  | (x_{a-1/2}, y_b)               |
//! | `Center` | nx x ny          | (x_{a+1/2}, y_{b+1/2})         |
//! | `NodeTx` | (nx+1) x (ny-1)  | (x_a, y_{b+1})                 |
//! | `NodeTy` | (nx-1) x (ny+1)  | (x_{a+1}, y_b)                 |
//!
//! with the boundary convention x_{-1/2} = x_0, x_{nx+1/2} = x_nx (and the
//! same in y), so face arrays carry their Dirichlet trace rows/columns.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StaggeredGrid {
    x_lo: f64,
    x_hi: f64,
    y_lo: f64,
    y_hi: f64,
    nx: usize,
    ny: usize,
    h: f64,
    k: f64,
}

impl StaggeredGrid {
    pub fn new(x_lo: f64, x_hi: f64, y_lo: f64, y_hi: f64, nx: usize, ny: usize) -> Result<Self> {
        if !(x_lo.is_finite() && x_hi.is_finite() && y_lo.is_finite() && y_hi.is_finite()) {
            return Err(Error::Config("domain bounds must be finite".into()));
        }
        if x_hi <= x_lo || y_hi <= y_lo {
            return Err(Error::Config(format!(
                "degenerate domain ({x_lo}, {x_hi}) x ({y_lo}, {y_hi})"
            )));
        }
        if nx < 2 || ny < 2 {
            return Err(Error::Config(format!(
                "need at least 2 cells per axis, got {nx} x {ny}"
            )));
        }
        Ok(Self {
            x_lo,
            x_hi,
            y_lo,
            y_hi,
            nx,
            ny,
            h: (x_hi - x_lo) / nx as f64,
            k: (y_hi - y_lo) / ny as f64,
        })
    }

    /// `(0,1) x (0,1)` with `n x n` cells.
    pub fn unit_square(n: usize) -> Result<Self> {
        Self::new(0.0, 1.0, 0.0, 1.0, n, n)
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn bounds(&self) -> [f64; 4] {
        [self.x_lo, self.x_hi, self.y_lo, self.y_hi]
    }

    /// x_i
    pub fn x_node(&self, i: usize) -> f64 {
        if i == self.nx {
            self.x_hi
        } else {
            self.x_lo + i as f64 * self.h
        }
    }

    /// x_{i+1/2}
    pub fn x_mid(&self, i: usize) -> f64 {
        self.x_lo + (i as f64 + 0.5) * self.h
    }

    pub fn y_node(&self, j: usize) -> f64 {
        if j == self.ny {
            self.y_hi
        } else {
            self.y_lo + j as f64 * self.k
        }
    }

    pub fn y_mid(&self, j: usize) -> f64 {
        self.y_lo + (j as f64 + 0.5) * self.k
    }

    /// h_i = x_{i+1/2} - x_{i-1/2}; half width on the two boundary nodes.
    pub fn x_weight(&self, i: usize) -> f64 {
        if i == 0 || i == self.nx {
            0.5 * self.h
        } else {
            self.h
        }
    }

    pub fn y_weight(&self, j: usize) -> f64 {
        if j == 0 || j == self.ny {
            0.5 * self.k
        } else {
            self.k
        }
    }
}

/// Where the values of a discrete array live on the staggered mesh.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GridLocation {
    /// (x_i, y_{j+1/2}) plus the trace rows at y_0 and y_ny.
    XFace,
    /// (x_{i+1/2}, y_j) plus the trace columns at x_0 and x_nx.
    YFace,
    /// (x_{i+1/2}, y_{j+1/2}).
    Center,
    /// (x_i, y_j) for i = 0..=nx, j = 1..ny-1.
    NodeTx,
    /// (x_i, y_j) for i = 1..nx-1, j = 0..=ny.
    NodeTy,
}

impl GridLocation {
    pub const ALL: [GridLocation; 5] = [
        GridLocation::XFace,
        GridLocation::YFace,
        GridLocation::Center,
        GridLocation::NodeTx,
        GridLocation::NodeTy,
    ];

    fn axes(self) -> (Axis, Axis) {
        match self {
            GridLocation::XFace => (Axis::Full, Axis::HalfBounded),
            GridLocation::YFace => (Axis::HalfBounded, Axis::Full),
            GridLocation::Center => (Axis::Half, Axis::Half),
            GridLocation::NodeTx => (Axis::Full, Axis::Interior),
            GridLocation::NodeTy => (Axis::Interior, Axis::Full),
        }
    }

    /// Storage shape `(points along x, points along y)`.
    pub fn shape(self, grid: &StaggeredGrid) -> (usize, usize) {
        let (ax, ay) = self.axes();
        (ax.len(grid.nx), ay.len(grid.ny))
    }

    pub fn name(self) -> &'static str {
        match self {
            GridLocation::XFace => "XFace",
            GridLocation::YFace => "YFace",
            GridLocation::Center => "Center",
            GridLocation::NodeTx => "NodeTx",
            GridLocation::NodeTy => "NodeTy",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|l| l.name() == s)
    }
}

impl fmt::Display for GridLocation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One-dimensional point family along an axis with `n` cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Axis {
    /// integer points 0..=n
    Full,
    /// integer points 1..n-1
    Interior,
    /// half points 1/2..n-1/2
    Half,
    /// 0, half points, n
    HalfBounded,
}

impl Axis {
    fn len(self, n: usize) -> usize {
        match self {
            Axis::Full => n + 1,
            Axis::Interior => n - 1,
            Axis::Half => n,
            Axis::HalfBounded => n + 2,
        }
    }

    /// Position of storage index `s` in units of half a cell.
    fn half_units(self, s: usize, n: usize) -> usize {
        match self {
            Axis::Full => 2 * s,
            Axis::Interior => 2 * (s + 1),
            Axis::Half => 2 * s + 1,
            Axis::HalfBounded => {
                if s == 0 {
                    0
                } else if s == n + 1 {
                    2 * n
                } else {
                    2 * s - 1
                }
            }
        }
    }
}

fn coordinate(lo: f64, hi: f64, step: f64, n: usize, half_units: usize) -> f64 {
    if half_units == 2 * n {
        hi
    } else {
        lo + 0.5 * step * half_units as f64
    }
}

/// A real array tagged with its grid and location.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: StaggeredGrid,
    loc: GridLocation,
    nxp: usize,
    nyp: usize,
    data: Vec<f64>,
}

impl GridFunction {
    pub fn zeros(grid: &StaggeredGrid, loc: GridLocation) -> Self {
        let (nxp, nyp) = loc.shape(grid);
        Self {
            grid: *grid,
            loc,
            nxp,
            nyp,
            data: vec![0.0; nxp * nyp],
        }
    }

    pub fn constant(grid: &StaggeredGrid, loc: GridLocation, c: f64) -> Self {
        let mut f = Self::zeros(grid, loc);
        f.data.fill(c);
        f
    }

    /// Samples `f(x, y)` at every stored point, boundary slots included.
    pub fn from_fn(grid: &StaggeredGrid, loc: GridLocation, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut out = Self::zeros(grid, loc);
        for b in 0..out.nyp {
            for a in 0..out.nxp {
                let (x, y) = out.point(a, b);
                out.data[b * out.nxp + a] = f(x, y);
            }
        }
        out
    }

    pub fn from_vec(grid: &StaggeredGrid, loc: GridLocation, data: Vec<f64>) -> Result<Self> {
        let (nxp, nyp) = loc.shape(grid);
        if data.len() != nxp * nyp {
            return Err(Error::Mismatch {
                op: "from_vec",
                detail: format!("{loc} needs {} values, got {}", nxp * nyp, data.len()),
            });
        }
        Ok(Self {
            grid: *grid,
            loc,
            nxp,
            nyp,
            data,
        })
    }

    pub fn grid(&self) -> &StaggeredGrid {
        &self.grid
    }

    pub fn location(&self) -> GridLocation {
        self.loc
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.nxp, self.nyp)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize) -> f64 {
        debug_assert!(a < self.nxp && b < self.nyp);
        self.data[b * self.nxp + a]
    }

    #[inline]
    pub fn set(&mut self, a: usize, b: usize, v: f64) {
        debug_assert!(a < self.nxp && b < self.nyp);
        self.data[b * self.nxp + a] = v;
    }

    /// Physical coordinates of storage index `(a, b)`.
    pub fn point(&self, a: usize, b: usize) -> (f64, f64) {
        let g = &self.grid;
        let (ax, ay) = self.loc.axes();
        let x = coordinate(g.x_lo, g.x_hi, g.h, g.nx, ax.half_units(a, g.nx));
        let y = coordinate(g.y_lo, g.y_hi, g.k, g.ny, ay.half_units(b, g.ny));
        (x, y)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|v| *v *= s);
        out
    }

    /// `alpha * self + beta * other`
    pub fn lin_comb(&self, alpha: f64, other: &Self, beta: f64) -> Result<Self> {
        self.check_same("lin_comb", other)?;
        let mut out = self.clone();
        for (o, v) in out.data.iter_mut().zip(&other.data) {
            *o = alpha * *o + beta * v;
        }
        Ok(out)
    }

    /// Pointwise product.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_same("mul", other)?;
        let mut out = self.clone();
        for (o, v) in out.data.iter_mut().zip(&other.data) {
            *o *= v;
        }
        Ok(out)
    }

    pub(crate) fn check_same(&self, op: &'static str, other: &Self) -> Result<()> {
        if self.loc != other.loc {
            return Err(Error::Mismatch {
                op,
                detail: format!("locations {} and {}", self.loc, other.loc),
            });
        }
        if self.grid != other.grid {
            return Err(Error::Mismatch {
                op,
                detail: "operands live on different grids".into(),
            });
        }
        Ok(())
    }

    /// True when every stored Dirichlet trace value is exactly zero.
    pub fn has_zero_trace(&self) -> bool {
        let (nxp, nyp) = (self.nxp, self.nyp);
        match self.loc {
            GridLocation::XFace | GridLocation::YFace => (0..nyp)
                .flat_map(|b| (0..nxp).map(move |a| (a, b)))
                .filter(|&(a, b)| a == 0 || b == 0 || a + 1 == nxp || b + 1 == nyp)
                .all(|(a, b)| self.get(a, b) == 0.0),
            _ => true,
        }
    }

    /// Sets all trace slots (outer ring of a face array) to zero.
    pub fn zero_trace(&mut self) {
        if !matches!(self.loc, GridLocation::XFace | GridLocation::YFace) {
            return;
        }
        let (nxp, nyp) = (self.nxp, self.nyp);
        for b in 0..nyp {
            for a in 0..nxp {
                if a == 0 || b == 0 || a + 1 == nxp || b + 1 == nyp {
                    self.data[b * nxp + a] = 0.0;
                }
            }
        }
    }
}

fn domain_err(op: &'static str, f: &GridFunction) -> Error {
    Error::OperatorDomain { op, loc: f.loc }
}

/// `[d_x f]_{i+1/2, m} = (f_{i+1, m} - f_{i, m}) / h`.
///
/// XFace -> Center, NodeTx -> YFace (interior points; trace slots left zero).
pub fn d_x(f: &GridFunction) -> Result<GridFunction> {
    let g = f.grid;
    let h = g.h;
    match f.loc {
        GridLocation::XFace => {
            let mut out = GridFunction::zeros(&g, GridLocation::Center);
            for b in 0..g.ny {
                for a in 0..g.nx {
                    out.set(a, b, (f.get(a + 1, b + 1) - f.get(a, b + 1)) / h);
                }
            }
            Ok(out)
        }
        GridLocation::NodeTx => {
            let mut out = GridFunction::zeros(&g, GridLocation::YFace);
            for j in 1..g.ny {
                for a in 1..=g.nx {
                    out.set(a, j, (f.get(a, j - 1) - f.get(a - 1, j - 1)) / h);
                }
            }
            Ok(out)
        }
        _ => Err(domain_err("d_x", f)),
    }
}

/// `[d_y f]_{l, j+1/2} = (f_{l, j+1} - f_{l, j}) / k`.
///
/// YFace -> Center, NodeTy -> XFace (interior points; trace slots left zero).
pub fn d_y(f: &GridFunction) -> Result<GridFunction> {
    let g = f.grid;
    let k = g.k;
    match f.loc {
        GridLocation::YFace => {
            let mut out = GridFunction::zeros(&g, GridLocation::Center);
            for b in 0..g.ny {
                for a in 0..g.nx {
                    out.set(a, b, (f.get(a + 1, b + 1) - f.get(a + 1, b)) / k);
                }
            }
            Ok(out)
        }
        GridLocation::NodeTy => {
            let mut out = GridFunction::zeros(&g, GridLocation::XFace);
            for b in 1..=g.ny {
                for i in 1..g.nx {
                    out.set(i, b, (f.get(i - 1, b) - f.get(i - 1, b - 1)) / k);
                }
            }
            Ok(out)
        }
        _ => Err(domain_err("d_y", f)),
    }
}

/// `[D_x f]_{i, m} = (f_{i+1/2, m} - f_{i-1/2, m}) / h_i`.
///
/// Center -> XFace (interior x only), YFace -> NodeTx (all i, with the
/// half spacing h/2 next to the x-boundaries).
#[allow(non_snake_case)]
pub fn D_x(f: &GridFunction) -> Result<GridFunction> {
    let g = f.grid;
    match f.loc {
        GridLocation::Center => {
            let mut out = GridFunction::zeros(&g, GridLocation::XFace);
            for b in 1..=g.ny {
                for i in 1..g.nx {
                    out.set(i, b, (f.get(i, b - 1) - f.get(i - 1, b - 1)) / g.h);
                }
            }
            Ok(out)
        }
        GridLocation::YFace => {
            let mut out = GridFunction::zeros(&g, GridLocation::NodeTx);
            for s in 0..g.ny - 1 {
                for i in 0..=g.nx {
                    let v = (f.get(i + 1, s + 1) - f.get(i, s + 1)) / g.x_weight(i);
                    out.set(i, s, v);
                }
            }
            Ok(out)
        }
        _ => Err(domain_err("D_x", f)),
    }
}

/// `[D_y f]_{l, j} = (f_{l, j+1/2} - f_{l, j-1/2}) / k_j`.
///
/// Center -> YFace (interior y only), XFace -> NodeTy (all j, with the
/// half spacing k/2 next to the y-boundaries).
#[allow(non_snake_case)]
pub fn D_y(f: &GridFunction) -> Result<GridFunction> {
    let g = f.grid;
    match f.loc {
        GridLocation::Center => {
            let mut out = GridFunction::zeros(&g, GridLocation::YFace);
            for j in 1..g.ny {
                for a in 1..=g.nx {
                    out.set(a, j, (f.get(a - 1, j) - f.get(a - 1, j - 1)) / g.k);
                }
            }
            Ok(out)
        }
        GridLocation::XFace => {
            let mut out = GridFunction::zeros(&g, GridLocation::NodeTy);
            for j in 0..=g.ny {
                for s in 0..g.nx - 1 {
                    let v = (f.get(s + 1, j + 1) - f.get(s + 1, j)) / g.y_weight(j);
                    out.set(s, j, v);
                }
            }
            Ok(out)
        }
        _ => Err(domain_err("D_y", f)),
    }
}

/// Linear weights along one axis: target index -> (lo, hi, weight on hi).
fn axis_brackets(src: Axis, dst: Axis, n: usize) -> Option<Vec<(usize, usize, f64)>> {
    let src_len = src.len(n);
    let src_pos: Vec<usize> = (0..src_len).map(|s| src.half_units(s, n)).collect();
    (0..dst.len(n))
        .map(|t| {
            let p = dst.half_units(t, n);
            // last source point at or before p
            let lo = src_pos.iter().rposition(|&q| q <= p)?;
            if src_pos[lo] == p {
                return Some((lo, lo, 0.0));
            }
            let hi = lo + 1;
            if hi >= src_len {
                return None;
            }
            let w = (p - src_pos[lo]) as f64 / (src_pos[hi] - src_pos[lo]) as f64;
            Some((lo, hi, w))
        })
        .collect()
}

/// Bilinear interpolation `P_h` of `f` onto the points of `target`.
///
/// Face data carry their trace rows, so boundary targets pick up the
/// Dirichlet values. Fails when a target point lies outside the hull of the
/// source points.
pub fn interpolate(f: &GridFunction, target: GridLocation) -> Result<GridFunction> {
    let g = f.grid;
    let (sx, sy) = f.loc.axes();
    let (tx, ty) = target.axes();
    let unreachable = || Error::OperatorDomain {
        op: "interpolate",
        loc: f.loc,
    };
    let bx = axis_brackets(sx, tx, g.nx).ok_or_else(unreachable)?;
    let by = axis_brackets(sy, ty, g.ny).ok_or_else(unreachable)?;
    let mut out = GridFunction::zeros(&g, target);
    for (b, &(y0, y1, wy)) in by.iter().enumerate() {
        for (a, &(x0, x1, wx)) in bx.iter().enumerate() {
            let lower = (1.0 - wx) * f.get(x0, y0) + wx * f.get(x1, y0);
            let upper = (1.0 - wx) * f.get(x0, y1) + wx * f.get(x1, y1);
            out.set(a, b, (1.0 - wy) * lower + wy * upper);
        }
    }
    Ok(out)
}
