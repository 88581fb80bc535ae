//! Staggered velocity/pressure containers, the discrete l2 inner products,
//! and the divergence, viscous and convective stencils.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::grid::{d_x, d_y, interpolate, D_x, D_y, GridFunction, GridLocation, StaggeredGrid};

/// Cell-centred scalar (pressure, divergence).
pub type CenterField = GridFunction;

/// Velocity with `u1` on x-faces and `u2` on y-faces, trace slots included.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityField {
    pub u1: GridFunction,
    pub u2: GridFunction,
}

impl VelocityField {
    pub fn zeros(grid: &StaggeredGrid) -> Self {
        Self {
            u1: GridFunction::zeros(grid, GridLocation::XFace),
            u2: GridFunction::zeros(grid, GridLocation::YFace),
        }
    }

    pub fn new(u1: GridFunction, u2: GridFunction) -> Result<Self> {
        if u1.location() != GridLocation::XFace || u2.location() != GridLocation::YFace {
            return Err(Error::Mismatch {
                op: "VelocityField::new",
                detail: format!("expected (XFace, YFace), got ({}, {})", u1.location(), u2.location()),
            });
        }
        if u1.grid() != u2.grid() {
            return Err(Error::Mismatch {
                op: "VelocityField::new",
                detail: "components live on different grids".into(),
            });
        }
        Ok(Self { u1, u2 })
    }

    /// Samples both components at their staggered points (traces included).
    pub fn from_fns(
        grid: &StaggeredGrid,
        f1: impl Fn(f64, f64) -> f64,
        f2: impl Fn(f64, f64) -> f64,
    ) -> Self {
        Self {
            u1: GridFunction::from_fn(grid, GridLocation::XFace, f1),
            u2: GridFunction::from_fn(grid, GridLocation::YFace, f2),
        }
    }

    pub fn grid(&self) -> &StaggeredGrid {
        self.u1.grid()
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            u1: self.u1.scaled(s),
            u2: self.u2.scaled(s),
        }
    }

    /// `alpha * self + beta * other`
    pub fn lin_comb(&self, alpha: f64, other: &Self, beta: f64) -> Result<Self> {
        Ok(Self {
            u1: self.u1.lin_comb(alpha, &other.u1, beta)?,
            u2: self.u2.lin_comb(alpha, &other.u2, beta)?,
        })
    }

    pub fn max_abs(&self) -> f64 {
        self.u1.max_abs().max(self.u2.max_abs())
    }

    pub fn has_zero_trace(&self) -> bool {
        self.u1.has_zero_trace() && self.u2.has_zero_trace()
    }

    pub fn zero_trace(&mut self) {
        self.u1.zero_trace();
        self.u2.zero_trace();
    }
}

/// Errors of one run against an exact solution.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ErrorNorms {
    pub e_u_inf2: f64,
    pub e_dxu1_inf2: f64,
    pub e_dyu1_inf2: f64,
    pub e_dxu2_inf2: f64,
    pub e_dyu2_inf2: f64,
    pub e_p_22: f64,
    pub e_q_inf: f64,
}

impl ErrorNorms {
    pub const NAMES: [&'static str; 7] = [
        "e_u_inf2",
        "e_dxu1_inf2",
        "e_Dyu1_inf2",
        "e_Dxu2_inf2",
        "e_dyu2_inf2",
        "e_p_22",
        "e_q_inf",
    ];

    pub fn values(&self) -> [f64; 7] {
        [
            self.e_u_inf2,
            self.e_dxu1_inf2,
            self.e_dyu1_inf2,
            self.e_dxu2_inf2,
            self.e_dyu2_inf2,
            self.e_p_22,
            self.e_q_inf,
        ]
    }

    pub fn named(&self) -> impl Iterator<Item = (&'static str, f64)> {
        Self::NAMES.into_iter().zip(self.values())
    }
}

fn expect_loc(op: &'static str, f: &GridFunction, loc: GridLocation) -> Result<()> {
    if f.location() == loc {
        Ok(())
    } else {
        Err(Error::OperatorDomain { op, loc: f.location() })
    }
}

/// `(f, g)_{l2,M}`: cell centres, weight h k.
pub fn ip_l2_m(f: &GridFunction, g: &GridFunction) -> Result<f64> {
    expect_loc("ip_l2_m", f, GridLocation::Center)?;
    f.check_same("ip_l2_m", g)?;
    let grid = f.grid();
    let s: f64 = f.data().iter().zip(g.data()).map(|(a, b)| a * b).sum();
    Ok(grid.h() * grid.k() * s)
}

/// `(f, g)_{l2,T,M}`: x-face points with 1 <= i <= nx-1, weight h_i k.
pub fn ip_l2_tm(f: &GridFunction, g: &GridFunction) -> Result<f64> {
    expect_loc("ip_l2_tm", f, GridLocation::XFace)?;
    f.check_same("ip_l2_tm", g)?;
    let grid = f.grid();
    let mut s = 0.0;
    for b in 1..=grid.ny() {
        for i in 1..grid.nx() {
            s += f.get(i, b) * g.get(i, b);
        }
    }
    Ok(grid.h() * grid.k() * s)
}

/// `(f, g)_{l2,M,T}`: y-face points with 1 <= j <= ny-1, weight h k_j.
pub fn ip_l2_mt(f: &GridFunction, g: &GridFunction) -> Result<f64> {
    expect_loc("ip_l2_mt", f, GridLocation::YFace)?;
    f.check_same("ip_l2_mt", g)?;
    let grid = f.grid();
    let mut s = 0.0;
    for j in 1..grid.ny() {
        for a in 1..=grid.nx() {
            s += f.get(a, j) * g.get(a, j);
        }
    }
    Ok(grid.h() * grid.k() * s)
}

/// `(f, g)_{l2,Tx}`: nodes i = 0..=nx, j = 1..ny-1, weight h_i k_j.
pub fn ip_l2_tx(f: &GridFunction, g: &GridFunction) -> Result<f64> {
    expect_loc("ip_l2_tx", f, GridLocation::NodeTx)?;
    f.check_same("ip_l2_tx", g)?;
    let grid = f.grid();
    let mut s = 0.0;
    for b in 0..grid.ny() - 1 {
        for i in 0..=grid.nx() {
            s += grid.x_weight(i) * f.get(i, b) * g.get(i, b);
        }
    }
    Ok(grid.k() * s)
}

/// `(f, g)_{l2,Ty}`: nodes i = 1..nx-1, j = 0..=ny, weight h_i k_j.
pub fn ip_l2_ty(f: &GridFunction, g: &GridFunction) -> Result<f64> {
    expect_loc("ip_l2_ty", f, GridLocation::NodeTy)?;
    f.check_same("ip_l2_ty", g)?;
    let grid = f.grid();
    let mut s = 0.0;
    for j in 0..=grid.ny() {
        for a in 0..grid.nx() - 1 {
            s += grid.y_weight(j) * f.get(a, j) * g.get(a, j);
        }
    }
    Ok(grid.h() * s)
}

/// The discrete inner product matching the location of `f`.
pub fn inner(f: &GridFunction, g: &GridFunction) -> Result<f64> {
    match f.location() {
        GridLocation::Center => ip_l2_m(f, g),
        GridLocation::XFace => ip_l2_tm(f, g),
        GridLocation::YFace => ip_l2_mt(f, g),
        GridLocation::NodeTx => ip_l2_tx(f, g),
        GridLocation::NodeTy => ip_l2_ty(f, g),
    }
}

pub fn norm_sq(f: &GridFunction) -> Result<f64> {
    inner(f, f)
}

/// `(U, V)_{l2} = (U1, V1)_{l2,T,M} + (U2, V2)_{l2,M,T}`.
pub fn ip_l2_vec(u: &VelocityField, v: &VelocityField) -> Result<f64> {
    Ok(ip_l2_tm(&u.u1, &v.u1)? + ip_l2_mt(&u.u2, &v.u2)?)
}

/// `||U||^2_{l2}`.
pub fn norm_l2_sq(u: &VelocityField) -> Result<f64> {
    ip_l2_vec(u, u)
}

/// The four first differences entering the discrete H1 seminorm:
/// `d_x U1` (M), `D_y U1` (Ty), `D_x U2` (Tx), `d_y U2` (M).
pub fn gradients(u: &VelocityField) -> Result<[GridFunction; 4]> {
    Ok([d_x(&u.u1)?, D_y(&u.u1)?, D_x(&u.u2)?, d_y(&u.u2)?])
}

/// `(D U, D V)`, the bilinear form behind `||D U||^2`.
pub fn ip_d(u: &VelocityField, v: &VelocityField) -> Result<f64> {
    let gu = gradients(u)?;
    let gv = gradients(v)?;
    gu.iter().zip(&gv).map(|(a, b)| inner(a, b)).sum()
}

/// `||D U||^2 = ||d_x U1||^2_M + ||D_y U1||^2_Ty + ||D_x U2||^2_Tx + ||d_y U2||^2_M`.
pub fn norm_d_sq(u: &VelocityField) -> Result<f64> {
    ip_d(u, u)
}

/// `d_x U1 + d_y U2` at cell centres.
pub fn divergence(u: &VelocityField) -> Result<CenterField> {
    d_x(&u.u1)?.lin_comb(1.0, &d_y(&u.u2)?, 1.0)
}

/// Discrete Laplacian `(D_x d_x U1 + d_y D_y U1, D_y d_y U2 + d_x D_x U2)` at
/// the interior momentum points; trace slots of the result are zero.
pub fn laplacian(u: &VelocityField) -> Result<VelocityField> {
    let l1 = D_x(&d_x(&u.u1)?)?.lin_comb(1.0, &d_y(&D_y(&u.u1)?)?, 1.0)?;
    let l2 = D_y(&d_y(&u.u2)?)?.lin_comb(1.0, &d_x(&D_x(&u.u2)?)?, 1.0)?;
    VelocityField::new(l1, l2)
}

/// Pressure gradient `(D_x P, D_y P)` at the interior momentum points.
pub fn pressure_gradient(p: &CenterField) -> Result<VelocityField> {
    VelocityField::new(D_x(p)?, D_y(p)?)
}

/// Explicit convective term
///
/// ```text
/// c1 = U1 D_x(P_h U1) + (P_h U2) d_y(P_h U1)
/// c2 = (P_h U1) d_x(P_h U2) + U2 D_y(P_h U2)
/// ```
///
/// where each `P_h` lands on the points the following difference needs
/// (centres for D_x / D_y, wall-inclusive nodes for d_y / d_x, the other
/// face family for the advecting velocity).
pub fn convective(u: &VelocityField) -> Result<VelocityField> {
    let u1c = interpolate(&u.u1, GridLocation::Center)?;
    let u1n = interpolate(&u.u1, GridLocation::NodeTy)?;
    let u2_on_x = interpolate(&u.u2, GridLocation::XFace)?;
    let c1 = u.u1.mul(&D_x(&u1c)?)?.lin_comb(1.0, &u2_on_x.mul(&d_y(&u1n)?)?, 1.0)?;

    let u2c = interpolate(&u.u2, GridLocation::Center)?;
    let u2n = interpolate(&u.u2, GridLocation::NodeTx)?;
    let u1_on_y = interpolate(&u.u1, GridLocation::YFace)?;
    let c2 = u1_on_y.mul(&d_x(&u2n)?)?.lin_comb(1.0, &u.u2.mul(&D_y(&u2c)?)?, 1.0)?;
    VelocityField::new(c1, c2)
}

/// Writes the plain-text dump: a header
/// `<location> <nx> <ny> <x_lo> <x_hi> <y_lo> <y_hi>` followed by one line per
/// storage row (fixed y), values separated by spaces.
pub fn write_dump(f: &GridFunction, out: &mut impl Write) -> std::io::Result<()> {
    let g = f.grid();
    let [x_lo, x_hi, y_lo, y_hi] = g.bounds();
    writeln!(out, "{} {} {} {x_lo:e} {x_hi:e} {y_lo:e} {y_hi:e}", f.location(), g.nx(), g.ny())?;
    let (nxp, nyp) = f.shape();
    let mut line = String::new();
    for b in 0..nyp {
        line.clear();
        for a in 0..nxp {
            if a > 0 {
                line.push(' ');
            }
            write!(line, "{:e}", f.get(a, b)).expect("writing to a String");
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}

/// Parses a dump produced by [`write_dump`].
pub fn read_dump(input: &mut impl BufRead) -> Result<GridFunction> {
    let bad = |msg: &str| Error::Report(format!("malformed grid dump: {msg}"));
    let mut header = String::new();
    input.read_line(&mut header).map_err(|e| bad(&e.to_string()))?;
    let mut it = header.split_whitespace();
    let loc = it
        .next()
        .and_then(GridLocation::from_name)
        .ok_or_else(|| bad("unknown location tag"))?;
    let mut next_usize = || -> Result<usize> {
        it.next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad("bad cell count"))
    };
    let nx = next_usize()?;
    let ny = next_usize()?;
    let bounds: Vec<f64> = header
        .split_whitespace()
        .skip(3)
        .map(|s| s.parse::<f64>().map_err(|_| bad("bad bound")))
        .collect::<Result<_>>()?;
    if bounds.len() != 4 {
        return Err(bad("expected four bounds"));
    }
    let grid = StaggeredGrid::new(bounds[0], bounds[1], bounds[2], bounds[3], nx, ny)?;
    let mut values = Vec::new();
    for line in input.lines() {
        let line = line.map_err(|e| bad(&e.to_string()))?;
        for tok in line.split_whitespace() {
            values.push(tok.parse::<f64>().map_err(|_| bad("bad value"))?);
        }
    }
    GridFunction::from_vec(&grid, loc, values)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(n: usize) -> StaggeredGrid {
        StaggeredGrid::unit_square(n).unwrap()
    }

    #[test]
    fn weights_of_the_inner_products() {
        let g = unit(8);
        let one = |loc| GridFunction::constant(&g, loc, 1.0);
        let c = one(GridLocation::Center);
        assert!((ip_l2_m(&c, &c).unwrap() - 1.0).abs() < 1e-14);
        // h/2 end weights in x, interior rows only in y
        let tx = one(GridLocation::NodeTx);
        assert!((norm_sq(&tx).unwrap() - (1.0 - g.k())).abs() < 1e-14);
        let ty = one(GridLocation::NodeTy);
        assert!((norm_sq(&ty).unwrap() - (1.0 - g.h())).abs() < 1e-14);
    }

    #[test]
    fn center_inner_product_by_hand() {
        let g = unit(2);
        let f = GridFunction::from_fn(&g, GridLocation::Center, |x, _| x);
        let one = GridFunction::constant(&g, GridLocation::Center, 1.0);
        assert!((ip_l2_m(&f, &one).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn l2_norm_of_interior_constant() {
        let g = unit(8);
        let mut u = VelocityField::zeros(&g);
        u.u1 = GridFunction::constant(&g, GridLocation::XFace, 1.0);
        u.zero_trace();
        let expected = (1.0 - g.h()) * 1.0;
        assert!((norm_l2_sq(&u).unwrap() - expected).abs() < 1e-14);
        assert_eq!(norm_l2_sq(&VelocityField::zeros(&g)).unwrap(), 0.0);
    }

    #[test]
    fn norm_d_is_quadratic() {
        let g = unit(6);
        let mut u = VelocityField::from_fns(&g, |x, y| x.sin() * y, |x, y| x * y * y);
        u.zero_trace();
        let n1 = norm_d_sq(&u).unwrap();
        let n2 = norm_d_sq(&u.scaled(2.0)).unwrap();
        assert!((n2 - 4.0 * n1).abs() <= 1e-14 * n2);
        assert_eq!(norm_d_sq(&VelocityField::zeros(&g)).unwrap(), 0.0);
    }

    #[test]
    fn divergence_exact_on_linear_velocity() {
        let g = unit(5);
        let u = VelocityField::from_fns(&g, |x, _| x, |_, y| -y);
        assert!(divergence(&u).unwrap().max_abs() < 1e-13);
        let u = VelocityField::from_fns(&g, |x, _| x, |_, _| 0.0);
        let d = divergence(&u).unwrap();
        assert!(d.data().iter().all(|v| (v - 1.0).abs() < 1e-13));
        assert_eq!(divergence(&VelocityField::zeros(&g)).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn laplacian_exact_on_quadratics_in_the_interior() {
        let g = unit(8);
        let u = VelocityField::from_fns(&g, |x, _| 3.0 * x * x - x, |_, y| -y * y);
        let l = laplacian(&u).unwrap();
        for b in 1..=8 {
            for i in 1..8 {
                assert!((l.u1.get(i, b) - 6.0).abs() < 1e-10);
            }
        }
        // y-direction second difference on u2 only at interior j, away from
        // the half-spacing rows
        for j in 2..7 {
            for a in 1..=8 {
                assert!((l.u2.get(a, j) + 2.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn laplacian_wall_row_with_half_spacing() {
        // u1 = y(1-y): the first interior row sees the wall trace at k/2
        let g = unit(4);
        let u = VelocityField::from_fns(&g, |_, y| y * (1.0 - y), |_, _| 0.0);
        let l = laplacian(&u).unwrap();
        let k = g.k();
        let f = |y: f64| y * (1.0 - y);
        let (y0, y1, y2) = (0.0, 0.5 * k, 1.5 * k);
        let expected = ((f(y2) - f(y1)) / k - (f(y1) - f(y0)) / (0.5 * k)) / k;
        for i in 1..4 {
            assert!((l.u1.get(i, 1) - expected).abs() < 1e-12);
        }
        assert!(l.u1.has_zero_trace());
    }

    #[test]
    fn convective_vanishes_on_constants_and_is_quadratic() {
        let g = unit(6);
        let c = VelocityField::from_fns(&g, |_, _| 2.0, |_, _| -1.0);
        let nc = convective(&c).unwrap();
        assert!(nc.max_abs() < 1e-13);

        let mut u = VelocityField::from_fns(&g, |x, y| (3.0 * x).sin() * y, |x, y| x * (2.0 * y).cos());
        u.zero_trace();
        let a = convective(&u).unwrap();
        let b = convective(&u.scaled(2.0)).unwrap();
        let diff = b.lin_comb(1.0, &a, -4.0).unwrap();
        assert!(diff.max_abs() <= 1e-14 * b.max_abs());
    }

    #[test]
    fn dump_round_trip() {
        let g = StaggeredGrid::new(-1.0, 2.0, 0.0, 0.5, 3, 2).unwrap();
        let f = GridFunction::from_fn(&g, GridLocation::YFace, |x, y| x * 1e-3 + y.exp());
        let mut buf = Vec::new();
        write_dump(&f, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("YFace 3 2 "));
        assert_eq!(text.lines().count(), 1 + 3);
        let back = read_dump(&mut buf.as_slice()).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn dump_rejects_garbage() {
        let mut input = "Blob 2 2 0 1 0 1\n1 2\n".as_bytes();
        assert!(read_dump(&mut input).is_err());
        let mut short = "Center 2 2 0 1 0 1\n1 2 3\n".as_bytes();
        assert!(read_dump(&mut short).is_err());
    }
}
