//! Crank-Nicolson SAV time stepping on the MAC grid.
//!
//! Each step solves two generalized Stokes problems with the same matrix
//! (`alpha = 1/dt`, `mu = nu/2`), combines them as `U = U_hat + S U_check`
//! and picks `S` from a scalar quadratic that enforces the discrete energy
//! identity
//!
//! ```text
//! (Q^{n+1})^2 - (Q^n)^2 + nu dt ||D U^{n+1/2}||^2 - dt (f, U^{n+1/2}) = 0.
//! ```

// negated comparisons are deliberate: NaN has to fail every check
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use crate::error::{Error, Result};
use crate::fields::{convective, divergence, ip_d, ip_l2_vec, laplacian, norm_d_sq, norm_l2_sq, CenterField, VelocityField};
use crate::grid::StaggeredGrid;
use crate::stokes::{StokesOperator, StokesSolution};

/// Relative tolerance of the per-step energy identity.
pub const ENERGY_TOLERANCE: f64 = 1e-8;

/// Divergence accepted on a stepped velocity, relative to its max norm.
pub const DIVERGENCE_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SavParams {
    pub dt: f64,
    pub t_final: f64,
    pub nu: f64,
    pub delta: f64,
    pub kappa: f64,
}

impl SavParams {
    pub fn new(dt: f64, t_final: f64, nu: f64, delta: f64, kappa: f64) -> Result<Self> {
        let p = Self { dt, t_final, nu, delta, kappa };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("dt", self.dt), ("t_final", self.t_final), ("nu", self.nu), ("delta", self.delta)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if !(self.kappa > 0.0 && self.kappa < 1.0) {
            return Err(Error::Config(format!("kappa must lie in (0, 1), got {}", self.kappa)));
        }
        Ok(())
    }

    /// Number of steps `m = round(T / dt)`, at least one.
    pub fn steps(&self) -> usize {
        ((self.t_final / self.dt).round() as usize).max(1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SavState {
    pub n: usize,
    pub u: VelocityField,
    pub u_prev: Option<VelocityField>,
    pub q: f64,
    /// pressure of the last completed step, `P^{n-1/2}`
    pub p_half: Option<CenterField>,
}

/// Per-step record of the scalar part of the scheme.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepDiagnostics {
    /// index of the produced state, `n + 1`
    pub step: usize,
    pub t: f64,
    /// `Q^{n+1}`
    pub q: f64,
    /// both raw roots, ascending
    pub roots: [f64; 2],
    pub chosen: f64,
    pub b_half: f64,
    pub coeffs: [f64; 3],
    /// `nu dt ||D U^{n+1/2}||^2`
    pub dissipation: f64,
    /// `dt (f, U^{n+1/2})`
    pub work: f64,
    pub energy_residual: f64,
    pub div_max: f64,
}

impl StepDiagnostics {
    /// The root that was not chosen.
    pub fn rejected(&self) -> f64 {
        if self.chosen == self.roots[0] {
            self.roots[1]
        } else {
            self.roots[0]
        }
    }
}

/// `Q^0 = sqrt(E_h(U^0) + delta)`; `u0` must vanish on the walls.
pub fn init_state(u0: &VelocityField, params: &SavParams) -> Result<SavState> {
    params.validate()?;
    if !u0.has_zero_trace() {
        return Err(Error::State("initial velocity has a nonzero boundary trace".into()));
    }
    let q = (0.5 * norm_l2_sq(u0)? + params.delta).sqrt();
    Ok(SavState {
        n: 0,
        u: u0.clone(),
        u_prev: None,
        q,
        p_half: None,
    })
}

/// `sqrt(E_h(U) + delta)`
pub fn discrete_q(u: &VelocityField, delta: f64) -> Result<f64> {
    Ok((0.5 * norm_l2_sq(u)? + delta).sqrt())
}

/// `1.5 U^n - 0.5 U^{n-1}`. At `n = 0` the caller must provide the startup
/// field instead.
pub fn extrapolate(state: &SavState) -> Result<VelocityField> {
    match &state.u_prev {
        Some(prev) if state.n >= 1 => state.u.lin_comb(1.5, prev, -0.5),
        _ => Err(Error::State(format!(
            "extrapolation at step {} needs the previous velocity",
            state.n
        ))),
    }
}

/// `(X1, X2, X3)` of `X1 S^2 + X2 S + X3 = 0`.
pub fn quadratic_coeffs(
    u_n: &VelocityField,
    q_n: f64,
    hat: &VelocityField,
    check: &VelocityField,
    b: f64,
    f_half: &VelocityField,
    params: &SavParams,
) -> Result<[f64; 3]> {
    let (nu, dt) = (params.nu, params.dt);
    let w = hat.lin_comb(1.0, u_n, 1.0)?;
    let x1 = 4.0 * b * b / dt + 0.25 * nu * norm_d_sq(check)?;
    let x2 = 0.5 * nu * ip_d(&w, check)? - 4.0 * q_n * b / dt - 0.5 * ip_l2_vec(f_half, check)?;
    let x3 = 0.25 * nu * norm_d_sq(&w)? - 0.5 * ip_l2_vec(f_half, &w)?;
    Ok([x1, x2, x3])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootSelection {
    /// ascending
    pub roots: [f64; 2],
    pub chosen: f64,
}

/// Solves the quadratic with the cancellation-free formula, drops roots with
/// `|S B| <= kappa` and returns the survivor closest to one (larger root on
/// an exact tie).
pub fn select_root(x1: f64, x2: f64, x3: f64, b: f64, kappa: f64) -> Result<RootSelection> {
    if !(x1 > 0.0) {
        return Err(Error::State(format!("leading coefficient must be positive, got {x1}")));
    }
    let disc = x2 * x2 - 4.0 * x1 * x3;
    if !(disc >= 0.0) {
        return Err(Error::NoRealRoot { discriminant: disc });
    }
    let sign = if x2 >= 0.0 { 1.0 } else { -1.0 };
    let q = -0.5 * (x2 + sign * disc.sqrt());
    let (r1, r2) = if q == 0.0 { (0.0, 0.0) } else { (q / x1, x3 / q) };
    let roots = if r1 <= r2 { [r1, r2] } else { [r2, r1] };

    let mut chosen: Option<f64> = None;
    for &r in &roots {
        if (r * b).abs() <= kappa {
            continue;
        }
        chosen = match chosen {
            None => Some(r),
            Some(c) => {
                let (dc, dr) = ((c - 1.0).abs(), (r - 1.0).abs());
                if dr < dc || (dr == dc && r > c) {
                    Some(r)
                } else {
                    Some(c)
                }
            }
        };
    }
    match chosen {
        Some(chosen) => Ok(RootSelection { roots, chosen }),
        None => Err(Error::KappaViolation { roots, kappa }),
    }
}

/// Max energy-identity residual of a run and whether `Q^2` never grew.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyAudit {
    pub max_residual: f64,
    pub q_sq_non_increasing: bool,
}

/// Recomputes the energy identity from the `Q` chain of a run.
///
/// With `require_decay` the run must also have non-increasing `Q^2`
/// (unforced runs).
pub fn energy_audit(q0: f64, trace: &[StepDiagnostics], require_decay: bool) -> Result<EnergyAudit> {
    let mut q_prev = q0;
    let mut max_residual: f64 = 0.0;
    let mut non_increasing = true;
    for d in trace {
        let (a, b) = (q_prev * q_prev, d.q * d.q);
        let res = (b - a + d.dissipation - d.work).abs();
        if !(res <= ENERGY_TOLERANCE * a.max(1.0)) {
            return Err(Error::Audit {
                step: d.step,
                reason: format!("energy residual {res:.3e} (Q {q_prev} -> {})", d.q),
            });
        }
        max_residual = max_residual.max(res);
        if b > a * (1.0 + 4.0 * f64::EPSILON) {
            non_increasing = false;
            if require_decay {
                return Err(Error::Audit {
                    step: d.step,
                    reason: format!("Q^2 increased from {a} to {b}"),
                });
            }
        }
        q_prev = d.q;
    }
    Ok(EnergyAudit {
        max_residual,
        q_sq_non_increasing: non_increasing,
    })
}

/// Fixed-grid stepper holding the factorized Stokes operators.
#[derive(Debug)]
pub struct SavStepper {
    grid: StaggeredGrid,
    params: SavParams,
    convection: bool,
    step_op: StokesOperator,
    startup_op: StokesOperator,
}

impl SavStepper {
    pub fn new(grid: &StaggeredGrid, params: SavParams) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            grid: *grid,
            params,
            convection: true,
            step_op: StokesOperator::assemble(grid, 1.0 / params.dt, 0.5 * params.nu)?,
            startup_op: StokesOperator::assemble(grid, 2.0 / params.dt, params.nu)?,
        })
    }

    /// Drops the convective term (Stokes consistency runs).
    pub fn without_convection(mut self) -> Self {
        self.convection = false;
        self
    }

    pub fn grid(&self) -> &StaggeredGrid {
        &self.grid
    }

    pub fn params(&self) -> &SavParams {
        &self.params
    }

    fn convect(&self, u: &VelocityField) -> Result<VelocityField> {
        if self.convection {
            convective(u)
        } else {
            Ok(VelocityField::zeros(&self.grid))
        }
    }

    /// First-order half step giving the extrapolant for `n = 0`:
    /// `(U - U^0)/(dt/2) + conv(U^0) - nu Lap U + grad P = f^{1/2}`,
    /// `div U = 0`.
    pub fn startup_half(&self, u0: &VelocityField, f_half: &VelocityField) -> Result<StokesSolution> {
        let c = self.convect(u0)?;
        let rhs = f_half
            .lin_comb(1.0, u0, 2.0 / self.params.dt)?
            .lin_comb(1.0, &c, -1.0)?;
        self.startup_op.solve(&rhs.u1, &rhs.u2, 1.0)
    }

    /// Hat problem (`+grad`, rhs `f + U^n/dt + nu/2 Lap U^n`) and check
    /// problem (`-grad`, rhs `-conv(U_tilde)`).
    pub fn hat_check_solve(
        &self,
        u_n: &VelocityField,
        u_tilde: &VelocityField,
        f_half: &VelocityField,
    ) -> Result<(StokesSolution, StokesSolution)> {
        let rhs_hat = f_half
            .lin_comb(1.0, u_n, 1.0 / self.params.dt)?
            .lin_comb(1.0, &laplacian(u_n)?, 0.5 * self.params.nu)?;
        let hat = self.step_op.solve(&rhs_hat.u1, &rhs_hat.u2, 1.0)?;
        let rhs_check = self.convect(u_tilde)?.scaled(-1.0);
        let check = self.step_op.solve(&rhs_check.u1, &rhs_check.u2, -1.0)?;
        Ok((hat, check))
    }

    /// Advances `state` by one step with forcing sampled at `t^{n+1/2}`.
    pub fn step(&self, state: &SavState, f_half: &VelocityField) -> Result<(SavState, StepDiagnostics)> {
        let prm = &self.params;
        let u_tilde = if state.n == 0 {
            self.startup_half(&state.u, f_half)?.u
        } else {
            extrapolate(state)?
        };
        let b = discrete_q(&u_tilde, prm.delta)?;
        let (hat, check) = self.hat_check_solve(&state.u, &u_tilde, f_half)?;
        let [x1, x2, x3] = quadratic_coeffs(&state.u, state.q, &hat.u, &check.u, b, f_half, prm)?;
        let sel = select_root(x1, x2, x3, b, prm.kappa)?;
        let s = sel.chosen;

        let u_next = hat.u.lin_comb(1.0, &check.u, s)?;
        let p_half = hat.p.lin_comb(1.0, &check.p, -s)?;
        let q_next = 2.0 * s * b - state.q;

        let div_max = divergence(&u_next)?.max_abs();
        if div_max > DIVERGENCE_TOLERANCE * u_next.max_abs() {
            return Err(Error::SolverConvergence {
                what: "stepped divergence",
                residual: div_max,
                tolerance: DIVERGENCE_TOLERANCE * u_next.max_abs(),
            });
        }
        let u_mid = u_next.lin_comb(0.5, &state.u, 0.5)?;
        let dissipation = prm.nu * prm.dt * norm_d_sq(&u_mid)?;
        let work = prm.dt * ip_l2_vec(f_half, &u_mid)?;
        let energy_residual = q_next * q_next - state.q * state.q + dissipation - work;

        let diag = StepDiagnostics {
            step: state.n + 1,
            t: (state.n + 1) as f64 * prm.dt,
            q: q_next,
            roots: sel.roots,
            chosen: s,
            b_half: b,
            coeffs: [x1, x2, x3],
            dissipation,
            work,
            energy_residual,
            div_max,
        };
        let tol = ENERGY_TOLERANCE * (state.q * state.q).max(1.0);
        if !(energy_residual.abs() <= tol) {
            return Err(Error::Audit {
                step: diag.step,
                reason: format!("energy residual {energy_residual:.3e} above {tol:.1e}"),
            });
        }
        let next = SavState {
            n: state.n + 1,
            u: u_next,
            u_prev: Some(state.u.clone()),
            q: q_next,
            p_half: Some(p_half),
        };
        Ok((next, diag))
    }

    /// Runs `params.steps()` steps from `u0`. `forcing(t)` supplies the
    /// sampled forcing; `observe` sees the initial state and every new state.
    pub fn run(
        &self,
        u0: &VelocityField,
        forcing: impl Fn(f64) -> VelocityField,
        mut observe: impl FnMut(&SavState, Option<&StepDiagnostics>) -> Result<()>,
    ) -> Result<SavState> {
        let mut state = init_state(u0, &self.params)?;
        observe(&state, None)?;
        for n in 0..self.params.steps() {
            let f = forcing((n as f64 + 0.5) * self.params.dt);
            let (next, diag) = self.step(&state, &f)?;
            observe(&next, Some(&diag))?;
            state = next;
        }
        Ok(state)
    }
}
