//! Generalized Stokes saddle-point systems
//!
//! ```text
//! alpha U - mu Lap_h U + sign * grad_h P = g,   div_h U = 0,   sum P = 0
//! ```
//!
//! on the MAC grid with homogeneous Dirichlet velocity. The matrix is
//! assembled once per `(alpha, mu)` and factorized with a sparse LU; every
//! time step only back-substitutes.
//!
//! Rows are scaled by the cell weight `h k` and the continuity rows are
//! negated, so the assembled matrix is symmetric: the gradient block is the
//! transpose of the (negated, weighted) divergence block, which is the
//! summation-by-parts identity at matrix level. Pressure unknowns and
//! continuity rows are further scaled by `1/sqrt(h k)` to keep both blocks
//! of unit size.

use std::io::Write;

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::sparse::linalg::lu::{factorize_symbolic_lu, LuRef, NumericLu, SymbolicLu};
use faer::sparse::{SparseColMat, Triplet};
use faer::{Conj, Mat, Par};

use crate::error::{Error, Result};
use crate::fields::{divergence, laplacian, pressure_gradient, CenterField, VelocityField};
use crate::grid::{GridFunction, GridLocation, StaggeredGrid};

/// Relative residual accepted from a solve.
pub const SOLVE_TOLERANCE: f64 = 1e-10;

const MAX_REFINEMENT_STEPS: usize = 3;

/// Refinement keeps going while the residuals sit above this fraction of
/// the tolerance.
const REFINEMENT_GOAL: f64 = 1e-2;

/// Unknown numbering: interior U1, interior U2, P, pressure-pin multiplier.
#[derive(Debug, Clone, Copy)]
struct Layout {
    nx: usize,
    ny: usize,
    /// stored pressure unknown is `P / p_scale`; `p_scale = 1/sqrt(h k)`
    /// brings the gradient and divergence blocks to unit size
    p_scale: f64,
}

impl Layout {
    fn n_u1(&self) -> usize {
        (self.nx - 1) * self.ny
    }
    fn n_u2(&self) -> usize {
        self.nx * (self.ny - 1)
    }
    fn n_p(&self) -> usize {
        self.nx * self.ny
    }
    fn len(&self) -> usize {
        self.n_u1() + self.n_u2() + self.n_p() + 1
    }
    /// U1 at storage (i, b), 1 <= i <= nx-1, 1 <= b <= ny.
    fn u1(&self, i: usize, b: usize) -> Option<usize> {
        (i >= 1 && i < self.nx && b >= 1 && b <= self.ny).then(|| (b - 1) * (self.nx - 1) + (i - 1))
    }
    /// U2 at storage (a, j), 1 <= a <= nx, 1 <= j <= ny-1.
    fn u2(&self, a: usize, j: usize) -> Option<usize> {
        (a >= 1 && a <= self.nx && j >= 1 && j < self.ny)
            .then(|| self.n_u1() + (j - 1) * self.nx + (a - 1))
    }
    fn p(&self, a: usize, b: usize) -> usize {
        self.n_u1() + self.n_u2() + b * self.nx + a
    }
    fn multiplier(&self) -> usize {
        self.len() - 1
    }
}

/// Index ranges of the blocks of the assembled system.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockRanges {
    pub u1: std::ops::Range<usize>,
    pub u2: std::ops::Range<usize>,
    pub p: std::ops::Range<usize>,
    pub multiplier: usize,
}

/// Output of one saddle-point solve.
#[derive(Debug, Clone, PartialEq)]
pub struct StokesSolution {
    pub u: VelocityField,
    pub p: CenterField,
    /// max-norm momentum residual relative to the size of the equation terms
    pub momentum_residual: f64,
    /// max-norm of `div_h U`
    pub div_max: f64,
}

/// Assembled and factorized generalized Stokes operator.
#[derive(Debug)]
pub struct StokesOperator {
    grid: StaggeredGrid,
    alpha: f64,
    mu: f64,
    layout: Layout,
    /// row-sorted, duplicate-free (row, col, value)
    entries: Vec<(usize, usize, f64)>,
    row_ptr: Vec<usize>,
    symbolic: SymbolicLu<usize>,
    numeric: NumericLu<usize, f64>,
}

impl StokesOperator {
    /// Assembles `alpha I - mu Lap_h` with the MAC gradient/divergence and the
    /// single-cell pressure pin, then factorizes it.
    pub fn assemble(grid: &StaggeredGrid, alpha: f64, mu: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::Config(format!("mass coefficient must be positive, got {alpha}")));
        }
        if !(mu >= 0.0 && mu.is_finite()) {
            return Err(Error::Config(format!("viscous coefficient must be non-negative, got {mu}")));
        }
        let (nx, ny) = (grid.nx(), grid.ny());
        if nx < 2 || ny < 2 {
            return Err(Error::Config("saddle-point system needs nx, ny >= 2".into()));
        }
        let layout = Layout {
            nx,
            ny,
            p_scale: 1.0 / (grid.h() * grid.k()).sqrt(),
        };
        let entries = assemble_entries(grid, layout, alpha, mu);
        let n = layout.len();

        let mut row_ptr = vec![0usize; n + 1];
        for &(r, _, _) in &entries {
            row_ptr[r + 1] += 1;
        }
        for r in 0..n {
            row_ptr[r + 1] += row_ptr[r];
        }

        let triplets: Vec<Triplet<usize, usize, f64>> =
            entries.iter().map(|&(r, c, v)| Triplet::new(r, c, v)).collect();
        let mat = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &triplets)
            .map_err(|e| Error::LinearAlgebra(format!("{e:?}")))?;
        let symbolic = factorize_symbolic_lu(mat.symbolic(), Default::default())
            .map_err(|e| Error::LinearAlgebra(format!("{e:?}")))?;
        let mut numeric = NumericLu::<usize, f64>::new();
        let par = Par::Seq;
        let mut mem = MemBuffer::new(symbolic.factorize_numeric_lu_scratch::<f64>(par, Default::default()));
        symbolic
            .factorize_numeric_lu(&mut numeric, mat.as_ref(), par, MemStack::new(&mut mem), Default::default())
            .map_err(|e| Error::LinearAlgebra(format!("{e:?}")))?;

        Ok(Self {
            grid: *grid,
            alpha,
            mu,
            layout,
            entries,
            row_ptr,
            symbolic,
            numeric,
        })
    }

    pub fn grid(&self) -> &StaggeredGrid {
        &self.grid
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn dim(&self) -> usize {
        self.layout.len()
    }

    pub fn blocks(&self) -> BlockRanges {
        let l = self.layout;
        let a = l.n_u1();
        let b = a + l.n_u2();
        let c = b + l.n_p();
        BlockRanges {
            u1: 0..a,
            u2: a..b,
            p: b..c,
            multiplier: c,
        }
    }

    /// Non-zeros of the assembled (weighted, symmetric) matrix.
    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    /// Coordinate-format dump, one `row col value` triple per line.
    pub fn write_matrix(&self, out: &mut impl Write) -> std::io::Result<()> {
        writeln!(out, "% {} {} {}", self.dim(), self.dim(), self.entries.len())?;
        for &(r, c, v) in &self.entries {
            writeln!(out, "{r} {c} {v:e}")?;
        }
        Ok(())
    }

    fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.dim())
            .map(|r| {
                self.entries[self.row_ptr[r]..self.row_ptr[r + 1]]
                    .iter()
                    .map(|&(_, c, v)| v * x[c])
                    .sum()
            })
            .collect()
    }

    fn pack(&self, u: &VelocityField, p: &CenterField, multiplier: f64) -> Vec<f64> {
        let l = self.layout;
        let mut x = vec![0.0; l.len()];
        for b in 1..=l.ny {
            for i in 1..l.nx {
                x[l.u1(i, b).unwrap()] = u.u1.get(i, b);
            }
        }
        for j in 1..l.ny {
            for a in 1..=l.nx {
                x[l.u2(a, j).unwrap()] = u.u2.get(a, j);
            }
        }
        for b in 0..l.ny {
            for a in 0..l.nx {
                x[l.p(a, b)] = p.get(a, b) / l.p_scale;
            }
        }
        x[l.multiplier()] = multiplier;
        x
    }

    fn unpack(&self, x: &[f64]) -> (VelocityField, CenterField, f64) {
        let l = self.layout;
        let mut u = VelocityField::zeros(&self.grid);
        let mut p = GridFunction::zeros(&self.grid, GridLocation::Center);
        for b in 1..=l.ny {
            for i in 1..l.nx {
                u.u1.set(i, b, x[l.u1(i, b).unwrap()]);
            }
        }
        for j in 1..l.ny {
            for a in 1..=l.nx {
                u.u2.set(a, j, x[l.u2(a, j).unwrap()]);
            }
        }
        for b in 0..l.ny {
            for a in 0..l.nx {
                p.set(a, b, l.p_scale * x[l.p(a, b)]);
            }
        }
        (u, p, x[l.multiplier()])
    }

    /// Applies the assembled matrix and undoes the row scaling.
    ///
    /// Returns `(alpha U - mu Lap_h U + grad_h P, div_h U)`; trace values of
    /// `u` are ignored (treated as zero).
    pub fn apply(&self, u: &VelocityField, p: &CenterField) -> Result<(VelocityField, CenterField)> {
        if u.grid() != &self.grid || p.grid() != &self.grid || p.location() != GridLocation::Center {
            return Err(Error::Mismatch {
                op: "StokesOperator::apply",
                detail: "operands do not match the operator grid/locations".into(),
            });
        }
        let y = self.matvec(&self.pack(u, p, 0.0));
        let w = self.grid.h() * self.grid.k();
        // continuity rows carry -p_scale w div U, which unpack turns into -div U
        let (m, d, _) = self.unpack(&y);
        Ok((m.scaled(1.0 / w), d.scaled(-1.0)))
    }

    fn lu(&self) -> LuRef<'_, usize, f64> {
        LuRef::new_unchecked(&self.symbolic, &self.numeric)
    }

    fn back_substitute(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let par = Par::Seq;
        let mut col = Mat::<f64>::from_fn(n, 1, |i, _| rhs[i]);
        let mut mem = MemBuffer::new(self.symbolic.solve_in_place_scratch::<f64>(1, par));
        self.lu()
            .solve_in_place_with_conj(Conj::No, col.as_mut(), par, MemStack::new(&mut mem));
        (0..n).map(|i| col[(i, 0)]).collect()
    }

    /// Solves `alpha U - mu Lap_h U + sign * grad_h P = g`, `div_h U = 0`,
    /// with `sum h k P = 0`. `g` is read at the interior momentum points.
    pub fn solve(&self, g1: &GridFunction, g2: &GridFunction, gradient_sign: f64) -> Result<StokesSolution> {
        if g1.location() != GridLocation::XFace || g2.location() != GridLocation::YFace {
            return Err(Error::Mismatch {
                op: "StokesOperator::solve",
                detail: format!("rhs must be (XFace, YFace), got ({}, {})", g1.location(), g2.location()),
            });
        }
        if g1.grid() != &self.grid || g2.grid() != &self.grid {
            return Err(Error::Mismatch {
                op: "StokesOperator::solve",
                detail: "rhs grid differs from operator grid".into(),
            });
        }
        if gradient_sign != 1.0 && gradient_sign != -1.0 {
            return Err(Error::Config(format!("gradient sign must be +1 or -1, got {gradient_sign}")));
        }
        let rhs_field = VelocityField::new(g1.clone(), g2.clone())?;
        let w = self.grid.h() * self.grid.k();
        let zero_p = GridFunction::zeros(&self.grid, GridLocation::Center);
        let b: Vec<f64> = self.pack(&rhs_field, &zero_p, 0.0).iter().map(|v| v * w).collect();

        let mut x = self.back_substitute(&b);
        let mut attempt = 0;
        loop {
            let (u, p_raw, _) = self.unpack(&x);
            // the factorization pins one cell; shift to zero mean
            let mean = p_raw.data().iter().sum::<f64>() / p_raw.data().len() as f64;
            let p_plus = GridFunction::from_vec(
                &self.grid,
                GridLocation::Center,
                p_raw.data().iter().map(|v| v - mean).collect(),
            )?;
            let (momentum_residual, div_max) = self.check(&rhs_field, &u, &p_plus)?;
            let div_tol = SOLVE_TOLERANCE * u.max_abs();
            let done = momentum_residual <= REFINEMENT_GOAL * SOLVE_TOLERANCE
                && div_max <= REFINEMENT_GOAL * div_tol;
            if done || attempt == MAX_REFINEMENT_STEPS {
                if momentum_residual > SOLVE_TOLERANCE {
                    return Err(Error::SolverConvergence {
                        what: "momentum",
                        residual: momentum_residual,
                        tolerance: SOLVE_TOLERANCE,
                    });
                }
                if div_max > div_tol {
                    return Err(Error::SolverConvergence {
                        what: "divergence",
                        residual: div_max,
                        tolerance: div_tol,
                    });
                }
                let p = if gradient_sign < 0.0 { p_plus.scaled(-1.0) } else { p_plus };
                return Ok(StokesSolution {
                    u,
                    p,
                    momentum_residual,
                    div_max,
                });
            }
            // iterative refinement against the assembled matrix
            let ax = self.matvec(&x);
            let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
            let dx = self.back_substitute(&r);
            x.iter_mut().zip(&dx).for_each(|(xi, di)| *xi += di);
            attempt += 1;
        }
    }

    /// Residuals measured with the stencils of the `fields` module, which
    /// are independent of the assembled matrix.
    fn check(&self, g: &VelocityField, u: &VelocityField, p: &CenterField) -> Result<(f64, f64)> {
        let lap = laplacian(u)?;
        let grad = pressure_gradient(p)?;
        let mut worst: f64 = 0.0;
        let mut scale: f64 = 0.0;
        let mut visit = |gf: &GridFunction, uf: &GridFunction, lf: &GridFunction, pf: &GridFunction, a: usize, b: usize| {
            let terms = [self.alpha * uf.get(a, b), self.mu * lf.get(a, b), pf.get(a, b), gf.get(a, b)];
            let r = terms[0] - terms[1] + terms[2] - terms[3];
            worst = worst.max(r.abs());
            scale = terms.iter().fold(scale, |s, t| s.max(t.abs()));
        };
        let l = self.layout;
        for b in 1..=l.ny {
            for i in 1..l.nx {
                visit(&g.u1, &u.u1, &lap.u1, &grad.u1, i, b);
            }
        }
        for j in 1..l.ny {
            for a in 1..=l.nx {
                visit(&g.u2, &u.u2, &lap.u2, &grad.u2, a, j);
            }
        }
        let rel = if scale > 0.0 { worst / scale } else { 0.0 };
        Ok((rel, divergence(u)?.max_abs()))
    }
}

fn assemble_entries(grid: &StaggeredGrid, l: Layout, alpha: f64, mu: f64) -> Vec<(usize, usize, f64)> {
    let (h, k) = (grid.h(), grid.k());
    let w = h * k;
    let s = l.p_scale;
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); l.len()];

    // x-momentum at (x_i, y_{b-1/2})
    for b in 1..=l.ny {
        for i in 1..l.nx {
            let r = l.u1(i, b).unwrap();
            let row = &mut rows[r];
            let ky_up = grid.y_weight(b);
            let ky_dn = grid.y_weight(b - 1);
            let diag = alpha + mu * (2.0 / (h * h) + (1.0 / ky_up + 1.0 / ky_dn) / k);
            row.push((r, w * diag));
            for (nb, c) in [
                (l.u1(i - 1, b), -mu / (h * h)),
                (l.u1(i + 1, b), -mu / (h * h)),
                (l.u1(i, b - 1), -mu / (k * ky_dn)),
                (l.u1(i, b + 1), -mu / (k * ky_up)),
            ] {
                if let Some(cidx) = nb {
                    row.push((cidx, w * c));
                }
            }
            row.push((l.p(i, b - 1), s * w / h));
            row.push((l.p(i - 1, b - 1), -s * w / h));
        }
    }

    // y-momentum at (x_{a-1/2}, y_j)
    for j in 1..l.ny {
        for a in 1..=l.nx {
            let r = l.u2(a, j).unwrap();
            let row = &mut rows[r];
            let hx_rt = grid.x_weight(a);
            let hx_lt = grid.x_weight(a - 1);
            let diag = alpha + mu * (2.0 / (k * k) + (1.0 / hx_rt + 1.0 / hx_lt) / h);
            row.push((r, w * diag));
            for (nb, c) in [
                (l.u2(a, j - 1), -mu / (k * k)),
                (l.u2(a, j + 1), -mu / (k * k)),
                (l.u2(a - 1, j), -mu / (h * hx_lt)),
                (l.u2(a + 1, j), -mu / (h * hx_rt)),
            ] {
                if let Some(cidx) = nb {
                    row.push((cidx, w * c));
                }
            }
            row.push((l.p(a - 1, j), s * w / k));
            row.push((l.p(a - 1, j - 1), -s * w / k));
        }
    }

    // continuity at (x_{a+1/2}, y_{b+1/2}), negated and weighted
    for b in 0..l.ny {
        for a in 0..l.nx {
            let r = l.p(a, b);
            let row = &mut rows[r];
            for (nb, c) in [
                (l.u1(a + 1, b + 1), -w / h),
                (l.u1(a, b + 1), w / h),
                (l.u2(a + 1, b + 1), -w / k),
                (l.u2(a + 1, b), w / k),
            ] {
                if let Some(cidx) = nb {
                    row.push((cidx, s * c));
                }
            }
            if a == 0 && b == 0 {
                row.push((l.multiplier(), s * w));
            }
        }
    }

    // P pinned in the first cell; a dense mean row would wreck the sparsity
    // of the factors
    rows[l.multiplier()].push((l.p(0, 0), s * w));

    let mut entries = Vec::new();
    for (r, mut row) in rows.into_iter().enumerate() {
        row.sort_by_key(|&(c, _)| c);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(row.len());
        for (c, v) in row {
            match merged.last_mut() {
                Some(last) if last.0 == c => last.1 += v,
                _ => merged.push((c, v)),
            }
        }
        entries.extend(merged.into_iter().map(|(c, v)| (r, c, v)));
    }
    entries
}
