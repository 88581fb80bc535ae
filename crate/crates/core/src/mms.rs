//! Manufactured solutions on the unit square, the forcing they induce, and
//! the error norms / convergence rates used to validate the scheme.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::fields::{ip_l2_m, norm_l2_sq, norm_sq, CenterField, ErrorNorms, VelocityField};
use crate::grid::{d_x, d_y, D_x, D_y, GridFunction, GridLocation, StaggeredGrid};

/// A closed-form velocity/pressure pair with all derivatives needed to build
/// its forcing.
pub trait ManufacturedSolution: Send + Sync {
    fn label(&self) -> &str;

    /// `(u1, u2)`
    fn velocity(&self, x: f64, y: f64, t: f64) -> [f64; 2];

    /// `(du1/dt, du2/dt)`
    fn velocity_dt(&self, x: f64, y: f64, t: f64) -> [f64; 2];

    /// `[[du1/dx, du1/dy], [du2/dx, du2/dy]]`
    fn velocity_grad(&self, x: f64, y: f64, t: f64) -> [[f64; 2]; 2];

    /// `(Lap u1, Lap u2)`
    fn velocity_laplacian(&self, x: f64, y: f64, t: f64) -> [f64; 2];

    fn pressure(&self, x: f64, y: f64, t: f64) -> f64;

    fn pressure_grad(&self, x: f64, y: f64, t: f64) -> [f64; 2];

    /// `E(t) = 1/2 int |u|^2`
    fn energy(&self, t: f64) -> f64;
}

/// `f = u_t + (u . grad) u - nu Lap u + grad p`, optionally without the
/// convective part (Stokes consistency runs).
pub fn forcing(ms: &dyn ManufacturedSolution, nu: f64, convection: bool, x: f64, y: f64, t: f64) -> [f64; 2] {
    let u = ms.velocity(x, y, t);
    let ut = ms.velocity_dt(x, y, t);
    let g = ms.velocity_grad(x, y, t);
    let lap = ms.velocity_laplacian(x, y, t);
    let gp = ms.pressure_grad(x, y, t);
    let adv = if convection {
        [u[0] * g[0][0] + u[1] * g[0][1], u[0] * g[1][0] + u[1] * g[1][1]]
    } else {
        [0.0, 0.0]
    };
    [
        ut[0] + adv[0] - nu * lap[0] + gp[0],
        ut[1] + adv[1] - nu * lap[1] + gp[1],
    ]
}

/// How a quantity at the half level `n + 1/2` is taken from a closed form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HalfLevel {
    /// `(g(t^n) + g(t^{n+1})) / 2`
    #[default]
    Average,
    /// `g(t^n + dt/2)`
    Midpoint,
}

impl HalfLevel {
    /// Combines samples of `g` for the interval `[t_n, t_n + dt]`.
    pub fn combine<T>(self, t_n: f64, dt: f64, g: impl Fn(f64) -> T, add: impl Fn(T, T) -> T) -> T {
        match self {
            Self::Average => add(g(t_n), g(t_n + dt)),
            Self::Midpoint => g(t_n + 0.5 * dt),
        }
    }
}

/// Forcing sampled at the staggered momentum points (trace slots zero).
pub fn forcing_field(
    ms: &dyn ManufacturedSolution,
    grid: &StaggeredGrid,
    nu: f64,
    convection: bool,
    t: f64,
) -> VelocityField {
    let mut f = VelocityField::from_fns(
        grid,
        |x, y| forcing(ms, nu, convection, x, y, t)[0],
        |x, y| forcing(ms, nu, convection, x, y, t)[1],
    );
    f.zero_trace();
    f
}

/// Forcing for the step `t_n -> t_n + dt`.
pub fn forcing_half(
    ms: &dyn ManufacturedSolution,
    grid: &StaggeredGrid,
    nu: f64,
    convection: bool,
    t_n: f64,
    dt: f64,
    half: HalfLevel,
) -> VelocityField {
    half.combine(
        t_n,
        dt,
        |t| forcing_field(ms, grid, nu, convection, t),
        |a, b| a.lin_comb(0.5, &b, 0.5).expect("same grid"),
    )
}

/// Exact velocity sampled at the staggered points; the trace is set to the
/// exact wall value zero.
pub fn sample_velocity(ms: &dyn ManufacturedSolution, grid: &StaggeredGrid, t: f64) -> VelocityField {
    let mut u = VelocityField::from_fns(grid, |x, y| ms.velocity(x, y, t)[0], |x, y| ms.velocity(x, y, t)[1]);
    u.zero_trace();
    u
}

/// Exact pressure at cell centres.
pub fn sample_pressure(ms: &dyn ManufacturedSolution, grid: &StaggeredGrid, t: f64) -> CenterField {
    GridFunction::from_fn(grid, GridLocation::Center, |x, y| ms.pressure(x, y, t))
}

/// `p - mean(p)` over the cell centres.
pub fn remove_mean(p: &CenterField) -> CenterField {
    let mean = p.data().iter().sum::<f64>() / p.data().len() as f64;
    let mut out = p.clone();
    out.data_mut().iter_mut().for_each(|v| *v -= mean);
    out
}

/// `q(t) = sqrt(E(t) + delta)`.
pub fn exact_q(ms: &dyn ManufacturedSolution, t: f64, delta: f64) -> f64 {
    (ms.energy(t) + delta).sqrt()
}

/// Polynomial test case scaled by 1/256, pressure `e^t (x^3 - 1/4)`.
#[derive(Debug, Clone)]
pub struct Example1 {
    energy0: f64,
}

impl Example1 {
    pub fn new() -> Self {
        let mut ex = Self { energy0: 0.0 };
        ex.energy0 = energy_by_quadrature(&ex, 0.0, 4, 8);
        ex
    }

    // x^2 (x-1)^2 and its derivatives
    fn p2(x: f64) -> [f64; 3] {
        let x3 = Self::p3(x);
        [x * x * (x - 1.0) * (x - 1.0), 2.0 * x3[0], 2.0 * x3[1]]
    }

    // x (x-1) (2x-1) and its derivatives
    fn p3(x: f64) -> [f64; 3] {
        [
            x * (x - 1.0) * (2.0 * x - 1.0),
            6.0 * x * x - 6.0 * x + 1.0,
            12.0 * x - 6.0,
        ]
    }
}

impl Default for Example1 {
    fn default() -> Self {
        Self::new()
    }
}

impl ManufacturedSolution for Example1 {
    fn label(&self) -> &str {
        "example1"
    }

    fn velocity(&self, x: f64, y: f64, t: f64) -> [f64; 2] {
        let s = t.exp() / 256.0;
        [
            -s * Self::p2(x)[0] * Self::p3(y)[0],
            s * Self::p3(x)[0] * Self::p2(y)[0],
        ]
    }

    fn velocity_dt(&self, x: f64, y: f64, t: f64) -> [f64; 2] {
        self.velocity(x, y, t)
    }

    fn velocity_grad(&self, x: f64, y: f64, t: f64) -> [[f64; 2]; 2] {
        let s = t.exp() / 256.0;
        let (ax, bx) = (Self::p2(x), Self::p3(x));
        let (ay, by) = (Self::p2(y), Self::p3(y));
        [
            [-s * ax[1] * by[0], -s * ax[0] * by[1]],
            [s * bx[1] * ay[0], s * bx[0] * ay[1]],
        ]
    }

    fn velocity_laplacian(&self, x: f64, y: f64, t: f64) -> [f64; 2] {
        let s = t.exp() / 256.0;
        let (ax, bx) = (Self::p2(x), Self::p3(x));
        let (ay, by) = (Self::p2(y), Self::p3(y));
        [
            -s * (ax[2] * by[0] + ax[0] * by[2]),
            s * (bx[2] * ay[0] + bx[0] * ay[2]),
        ]
    }

    fn pressure(&self, x: f64, _y: f64, t: f64) -> f64 {
        t.exp() * (x * x * x - 0.25)
    }

    fn pressure_grad(&self, x: f64, _y: f64, t: f64) -> [f64; 2] {
        [3.0 * t.exp() * x * x, 0.0]
    }

    fn energy(&self, t: f64) -> f64 {
        self.energy0 * (2.0 * t).exp()
    }
}

/// Trigonometric vortex, pressure `e^t (sin(pi y) - 2/pi)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Example2;

impl ManufacturedSolution for Example2 {
    fn label(&self) -> &str {
        "example2"
    }

    fn velocity(&self, x: f64, y: f64, t: f64) -> [f64; 2] {
        let e = t.exp();
        let (sx, sy) = ((PI * x).sin(), (PI * y).sin());
        [
            e * sx * sx * (2.0 * PI * y).sin(),
            -e * (2.0 * PI * x).sin() * sy * sy,
        ]
    }

    fn velocity_dt(&self, x: f64, y: f64, t: f64) -> [f64; 2] {
        self.velocity(x, y, t)
    }

    fn velocity_grad(&self, x: f64, y: f64, t: f64) -> [[f64; 2]; 2] {
        let e = t.exp();
        let (sx, sy) = ((PI * x).sin(), (PI * y).sin());
        let (s2x, s2y) = ((2.0 * PI * x).sin(), (2.0 * PI * y).sin());
        let (c2x, c2y) = ((2.0 * PI * x).cos(), (2.0 * PI * y).cos());
        [
            [e * PI * s2x * s2y, e * sx * sx * 2.0 * PI * c2y],
            [-e * 2.0 * PI * c2x * sy * sy, -e * s2x * PI * s2y],
        ]
    }

    fn velocity_laplacian(&self, x: f64, y: f64, t: f64) -> [f64; 2] {
        let e = t.exp();
        let (sx, sy) = ((PI * x).sin(), (PI * y).sin());
        let (s2x, s2y) = ((2.0 * PI * x).sin(), (2.0 * PI * y).sin());
        let (c2x, c2y) = ((2.0 * PI * x).cos(), (2.0 * PI * y).cos());
        let pi2 = PI * PI;
        [
            e * (2.0 * pi2 * c2x * s2y - 4.0 * pi2 * sx * sx * s2y),
            -e * (-4.0 * pi2 * s2x * sy * sy + 2.0 * pi2 * s2x * c2y),
        ]
    }

    fn pressure(&self, _x: f64, y: f64, t: f64) -> f64 {
        t.exp() * ((PI * y).sin() - 2.0 / PI)
    }

    fn pressure_grad(&self, _x: f64, y: f64, t: f64) -> [f64; 2] {
        [0.0, t.exp() * PI * (PI * y).cos()]
    }

    fn energy(&self, t: f64) -> f64 {
        3.0 / 16.0 * (2.0 * t).exp()
    }
}

/// Initial velocity of the unforced decay run: the t = 0 vortex of
/// [`Example2`], `u2 = -sin(2 pi x) sin^2(pi y)` so that it is divergence free.
pub fn example3_initial(grid: &StaggeredGrid) -> VelocityField {
    sample_velocity(&Example2, grid, 0.0)
}

/// Gauss-Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        // Chebyshev guess, then Newton on P_n
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for m in 2..=n {
                let p2 = ((2 * m - 1) as f64 * x * p1 - (m - 1) as f64 * p0) / m as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else { p1 };
            let pnm1 = if n <= 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pnm1) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

/// `1/2 int_{(0,1)^2} |u(., t)|^2` by tensor Gauss-Legendre on
/// `panels x panels` sub-squares.
pub fn energy_by_quadrature(ms: &dyn ManufacturedSolution, t: f64, panels: usize, order: usize) -> f64 {
    let (xg, wg) = gauss_legendre(order);
    let hp = 1.0 / panels as f64;
    let mut sum = 0.0;
    for py in 0..panels {
        for px in 0..panels {
            for (yi, wy) in xg.iter().zip(&wg) {
                let y = (py as f64 + 0.5 * (yi + 1.0)) * hp;
                for (xi, wx) in xg.iter().zip(&wg) {
                    let x = (px as f64 + 0.5 * (xi + 1.0)) * hp;
                    let u = ms.velocity(x, y, t);
                    sum += wx * wy * (u[0] * u[0] + u[1] * u[1]);
                }
            }
        }
    }
    0.5 * sum * 0.25 * hp * hp
}

/// Running maxima/sums for the error norms of one simulation.
///
/// Velocity states are fed as `U^n` (n = 0..=m), pressures as `P^{n+1/2}`
/// (n = 0..m). The pressure reference is the exact pressure at the half
/// level (endpoint average by default), optionally shifted to discrete mean
/// zero.
pub struct ErrorAccumulator<'a> {
    ms: &'a dyn ManufacturedSolution,
    grid: StaggeredGrid,
    dt: f64,
    delta: f64,
    half: HalfLevel,
    shift_mean: bool,
    norms: ErrorNorms,
    p_sum: f64,
}

impl<'a> ErrorAccumulator<'a> {
    pub fn new(ms: &'a dyn ManufacturedSolution, grid: &StaggeredGrid, dt: f64, delta: f64) -> Self {
        Self {
            ms,
            grid: *grid,
            dt,
            delta,
            half: HalfLevel::Average,
            shift_mean: false,
            norms: ErrorNorms::default(),
            p_sum: 0.0,
        }
    }

    pub fn with_half_level(mut self, half: HalfLevel) -> Self {
        self.half = half;
        self
    }

    /// Compare against the exact pressure minus its discrete mean.
    pub fn with_discrete_mean_shift(mut self, shift: bool) -> Self {
        self.shift_mean = shift;
        self
    }

    pub fn observe_state(&mut self, n: usize, u: &VelocityField, q: f64) -> Result<()> {
        let t = n as f64 * self.dt;
        let exact = sample_velocity(self.ms, &self.grid, t);
        let e = u.lin_comb(1.0, &exact, -1.0)?;
        let nm = &mut self.norms;
        nm.e_u_inf2 = nm.e_u_inf2.max(norm_l2_sq(&e)?.sqrt());
        nm.e_dxu1_inf2 = nm.e_dxu1_inf2.max(norm_sq(&d_x(&e.u1)?)?.sqrt());
        nm.e_dyu1_inf2 = nm.e_dyu1_inf2.max(norm_sq(&D_y(&e.u1)?)?.sqrt());
        nm.e_dxu2_inf2 = nm.e_dxu2_inf2.max(norm_sq(&D_x(&e.u2)?)?.sqrt());
        nm.e_dyu2_inf2 = nm.e_dyu2_inf2.max(norm_sq(&d_y(&e.u2)?)?.sqrt());
        nm.e_q_inf = nm.e_q_inf.max((q - exact_q(self.ms, t, self.delta)).abs());
        Ok(())
    }

    /// Reference pressure for `P^{n+1/2}`.
    pub fn pressure_reference(&self, n: usize) -> CenterField {
        let p = self.half.combine(
            n as f64 * self.dt,
            self.dt,
            |t| sample_pressure(self.ms, &self.grid, t),
            |a, b| a.lin_comb(0.5, &b, 0.5).expect("same grid"),
        );
        if self.shift_mean {
            remove_mean(&p)
        } else {
            p
        }
    }

    pub fn observe_pressure(&mut self, n: usize, p_half: &CenterField) -> Result<()> {
        let e = p_half.lin_comb(1.0, &self.pressure_reference(n), -1.0)?;
        self.p_sum += self.dt * ip_l2_m(&e, &e)?;
        Ok(())
    }

    pub fn finish(mut self) -> ErrorNorms {
        self.norms.e_p_22 = self.p_sum.sqrt();
        self.norms
    }
}

/// Stored history of a run: `U^n`, `Q^n` for n = 0..=m and `P^{n+1/2}` for
/// n = 0..m.
#[derive(Debug, Clone, Default)]
pub struct SolutionTrace {
    pub velocities: Vec<VelocityField>,
    pub q: Vec<f64>,
    pub pressures: Vec<CenterField>,
}

/// Error norms of a stored run against `ms`.
pub fn error_norms(
    trace: &SolutionTrace,
    ms: &dyn ManufacturedSolution,
    grid: &StaggeredGrid,
    dt: f64,
    delta: f64,
    half: HalfLevel,
) -> Result<ErrorNorms> {
    let m1 = trace.velocities.len();
    if m1 == 0 {
        return Err(Error::Report("trace holds no velocity states".into()));
    }
    if trace.q.len() != m1 {
        return Err(Error::Report(format!("{} velocity states but {} Q values", m1, trace.q.len())));
    }
    if trace.pressures.len() + 1 != m1 {
        return Err(Error::Report(format!(
            "{} velocity states need {} half-step pressures, got {}",
            m1,
            m1 - 1,
            trace.pressures.len()
        )));
    }
    let mut acc = ErrorAccumulator::new(ms, grid, dt, delta).with_half_level(half);
    for (n, (u, q)) in trace.velocities.iter().zip(&trace.q).enumerate() {
        acc.observe_state(n, u, *q)?;
    }
    for (n, p) in trace.pressures.iter().enumerate() {
        acc.observe_pressure(n, p)?;
    }
    Ok(acc.finish())
}

/// Observed order between two refinement levels.
pub fn rate(err_coarse: f64, err_fine: f64, refinement: f64) -> f64 {
    (err_coarse / err_fine).ln() / refinement.ln()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub level: u32,
    pub nx: usize,
    pub errors: ErrorNorms,
    /// `None` on the coarsest row
    pub rates: Option<[f64; 7]>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceTable {
    /// Rates between consecutive levels, ordered coarse to fine.
    pub fn from_levels(levels: &[(u32, usize, ErrorNorms)]) -> Self {
        let mut rows = Vec::with_capacity(levels.len());
        for (idx, &(level, nx, errors)) in levels.iter().enumerate() {
            let rates = (idx > 0).then(|| {
                let (_, nx_prev, prev) = levels[idx - 1];
                let refine = nx as f64 / nx_prev as f64;
                let (a, b) = (prev.values(), errors.values());
                std::array::from_fn(|c| rate(a[c], b[c], refine))
            });
            rows.push(ConvergenceRow { level, nx, errors, rates });
        }
        Self { rows }
    }

    /// Column `c` (index into [`ErrorNorms::NAMES`]) of errors.
    pub fn errors(&self, c: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r.errors.values()[c]).collect()
    }

    pub fn rates(&self, c: usize) -> Vec<f64> {
        self.rows.iter().filter_map(|r| r.rates.map(|v| v[c])).collect()
    }
}
