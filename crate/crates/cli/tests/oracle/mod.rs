// Straight-line reference for a few steps of the fully discrete scheme.
//
// Written from the defining equations only: its own index maps, stencils,
// hyper-dual forcing and a dense LU on the bordered saddle-point matrix.
// The scalar equation is the literal Q update, evaluated as a function of
// s = Q^{n+1/2}/B and interpolated as a quadratic.

use std::f64::consts::PI;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector};

#[derive(Clone, Copy, Debug)]
struct Hd {
    re: f64,
    e1: f64,
    e2: f64,
    e12: f64,
}

impl Hd {
    fn c(v: f64) -> Hd {
        Hd { re: v, e1: 0.0, e2: 0.0, e12: 0.0 }
    }
    fn var(v: f64, s1: f64, s2: f64) -> Hd {
        Hd { re: v, e1: s1, e2: s2, e12: 0.0 }
    }
    fn chain(self, f: f64, df: f64, ddf: f64) -> Hd {
        Hd {
            re: f,
            e1: df * self.e1,
            e2: df * self.e2,
            e12: df * self.e12 + ddf * self.e1 * self.e2,
        }
    }
    fn sin(self) -> Hd {
        self.chain(self.re.sin(), self.re.cos(), -self.re.sin())
    }
    fn exp(self) -> Hd {
        let e = self.re.exp();
        self.chain(e, e, e)
    }
}

impl Add for Hd {
    type Output = Hd;
    fn add(self, o: Hd) -> Hd {
        Hd { re: self.re + o.re, e1: self.e1 + o.e1, e2: self.e2 + o.e2, e12: self.e12 + o.e12 }
    }
}

impl Sub for Hd {
    type Output = Hd;
    fn sub(self, o: Hd) -> Hd {
        self + (-o)
    }
}

impl Neg for Hd {
    type Output = Hd;
    fn neg(self) -> Hd {
        Hd { re: -self.re, e1: -self.e1, e2: -self.e2, e12: -self.e12 }
    }
}

impl Mul for Hd {
    type Output = Hd;
    fn mul(self, o: Hd) -> Hd {
        Hd {
            re: self.re * o.re,
            e1: self.re * o.e1 + self.e1 * o.re,
            e2: self.re * o.e2 + self.e2 * o.re,
            e12: self.re * o.e12 + self.e1 * o.e2 + self.e2 * o.e1 + self.e12 * o.re,
        }
    }
}

impl Mul<Hd> for f64 {
    type Output = Hd;
    fn mul(self, o: Hd) -> Hd {
        Hd::c(self) * o
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Case {
    Polynomial,
    Vortex,
}

fn velocity(case: Case, x: Hd, y: Hd, t: Hd) -> [Hd; 2] {
    match case {
        Case::Polynomial => {
            let s = (1.0 / 256.0) * t.exp();
            let one = Hd::c(1.0);
            let a = |z: Hd| z * z * (z - one) * (z - one);
            let b = |z: Hd| z * (z - one) * (2.0 * z - one);
            [-(s * a(x) * b(y)), s * b(x) * a(y)]
        }
        Case::Vortex => {
            let e = t.exp();
            let sx = (PI * x).sin();
            let sy = (PI * y).sin();
            [e * sx * sx * (2.0 * PI * y).sin(), -(e * (2.0 * PI * x).sin() * sy * sy)]
        }
    }
}

fn pressure(case: Case, x: Hd, y: Hd, t: Hd) -> Hd {
    match case {
        Case::Polynomial => t.exp() * (x * x * x - Hd::c(0.25)),
        Case::Vortex => t.exp() * ((PI * y).sin() - Hd::c(2.0 / PI)),
    }
}

/// Stream function at t = 0 whose discrete curl is the initial velocity.
pub fn stream(case: Case, x: f64, y: f64) -> f64 {
    match case {
        Case::Polynomial => -(x * x * (x - 1.0) * (x - 1.0)) * (y * y * (y - 1.0) * (y - 1.0)) / 512.0,
        Case::Vortex => (PI * x).sin().powi(2) * (PI * y).sin().powi(2) / PI,
    }
}

/// u_t + (u . grad) u - nu Lap u + grad p
pub fn forcing(case: Case, nu: f64, x: f64, y: f64, t: f64) -> [f64; 2] {
    let (cx, cy, ct) = (Hd::c(x), Hd::c(y), Hd::c(t));
    let u = velocity(case, cx, cy, ct);
    let ux = velocity(case, Hd::var(x, 1.0, 1.0), cy, ct);
    let uy = velocity(case, cx, Hd::var(y, 1.0, 1.0), ct);
    let ut = velocity(case, cx, cy, Hd::var(t, 1.0, 0.0));
    let px = pressure(case, Hd::var(x, 1.0, 0.0), cy, ct).e1;
    let py = pressure(case, cx, Hd::var(y, 1.0, 0.0), ct).e1;
    let gp = [px, py];
    let mut f = [0.0; 2];
    for c in 0..2 {
        f[c] = ut[c].e1 + u[0].re * ux[c].e1 + u[1].re * uy[c].e1 - nu * (ux[c].e12 + uy[c].e12) + gp[c];
    }
    f
}

/// Velocity on the faces of an n x n unit-square mesh, boundary slots
/// included: u1[(n+1)*b + i] at (x_i, y_{b-1/2}), u2[(n+2)*j + a] at
/// (x_{a-1/2}, y_j).
#[derive(Clone, Debug)]
pub struct Vel {
    pub u1: Vec<f64>,
    pub u2: Vec<f64>,
}

pub struct Mesh {
    pub n: usize,
    h: f64,
}

impl Mesh {
    pub fn new(n: usize) -> Mesh {
        Mesh { n, h: 1.0 / n as f64 }
    }

    pub fn i1(&self, i: usize, b: usize) -> usize {
        (self.n + 1) * b + i
    }

    pub fn i2(&self, a: usize, j: usize) -> usize {
        (self.n + 2) * j + a
    }

    fn ip(&self, a: usize, b: usize) -> usize {
        self.n * b + a
    }

    fn zero(&self) -> Vel {
        let n = self.n;
        Vel { u1: vec![0.0; (n + 1) * (n + 2)], u2: vec![0.0; (n + 2) * (n + 1)] }
    }

    // cell-centre coordinate of half index a (a = 0 and a = n + 1 are the walls)
    fn half(&self, a: usize) -> f64 {
        if a == 0 {
            0.0
        } else if a == self.n + 1 {
            1.0
        } else {
            (a as f64 - 0.5) * self.h
        }
    }

    // spacing between consecutive half-index rows a and a + 1
    fn gap(&self, a: usize) -> f64 {
        if a == 0 || a == self.n {
            0.5 * self.h
        } else {
            self.h
        }
    }

    /// Discrete curl of a node stream function; divergence free by
    /// construction.
    pub fn curl(&self, psi: impl Fn(f64, f64) -> f64) -> Vel {
        let (n, h) = (self.n, self.h);
        let node = |i: usize, j: usize| psi(i as f64 * h, j as f64 * h);
        let mut v = self.zero();
        for b in 1..=n {
            for i in 1..n {
                v.u1[self.i1(i, b)] = (node(i, b) - node(i, b - 1)) / h;
            }
        }
        for j in 1..n {
            for a in 1..=n {
                v.u2[self.i2(a, j)] = -(node(a, j) - node(a - 1, j)) / h;
            }
        }
        v
    }

    pub fn forcing_avg(&self, case: Case, nu: f64, t0: f64, t1: f64) -> Vel {
        let (n, h) = (self.n, self.h);
        let mut v = self.zero();
        for b in 1..=n {
            for i in 1..n {
                let (x, y) = (i as f64 * h, self.half(b));
                v.u1[self.i1(i, b)] = 0.5 * (forcing(case, nu, x, y, t0)[0] + forcing(case, nu, x, y, t1)[0]);
            }
        }
        for j in 1..n {
            for a in 1..=n {
                let (x, y) = (self.half(a), j as f64 * h);
                v.u2[self.i2(a, j)] = 0.5 * (forcing(case, nu, x, y, t0)[1] + forcing(case, nu, x, y, t1)[1]);
            }
        }
        v
    }

    fn lap(&self, v: &Vel) -> Vel {
        let (n, h) = (self.n, self.h);
        let mut out = self.zero();
        for b in 1..=n {
            for i in 1..n {
                let c = v.u1[self.i1(i, b)];
                let xx = (v.u1[self.i1(i + 1, b)] - 2.0 * c + v.u1[self.i1(i - 1, b)]) / (h * h);
                let up = (v.u1[self.i1(i, b + 1)] - c) / self.gap(b);
                let dn = (c - v.u1[self.i1(i, b - 1)]) / self.gap(b - 1);
                out.u1[self.i1(i, b)] = xx + (up - dn) / h;
            }
        }
        for j in 1..n {
            for a in 1..=n {
                let c = v.u2[self.i2(a, j)];
                let yy = (v.u2[self.i2(a, j + 1)] - 2.0 * c + v.u2[self.i2(a, j - 1)]) / (h * h);
                let rt = (v.u2[self.i2(a + 1, j)] - c) / self.gap(a);
                let lt = (c - v.u2[self.i2(a - 1, j)]) / self.gap(a - 1);
                out.u2[self.i2(a, j)] = yy + (rt - lt) / h;
            }
        }
        out
    }

    fn conv(&self, v: &Vel) -> Vel {
        let (n, h) = (self.n, self.h);
        let u1 = |i: usize, b: usize| v.u1[self.i1(i, b)];
        let u2 = |a: usize, j: usize| v.u2[self.i2(a, j)];
        // U1 averaged to the centre (a, b) (0-based cells) and to the node (i, j)
        let u1c = |a: usize, b: usize| 0.5 * (u1(a, b + 1) + u1(a + 1, b + 1));
        let u1n = |i: usize, j: usize| {
            if j == 0 || j == n {
                u1(i, if j == 0 { 0 } else { n + 1 })
            } else {
                0.5 * (u1(i, j) + u1(i, j + 1))
            }
        };
        let u2c = |a: usize, b: usize| 0.5 * (u2(a + 1, b) + u2(a + 1, b + 1));
        let u2n = |i: usize, j: usize| {
            if i == 0 || i == n {
                u2(if i == 0 { 0 } else { n + 1 }, j)
            } else {
                0.5 * (u2(i, j) + u2(i + 1, j))
            }
        };
        let mut out = self.zero();
        for b in 1..=n {
            for i in 1..n {
                let dx = (u1c(i, b - 1) - u1c(i - 1, b - 1)) / h;
                let adv = 0.25 * (u2(i, b - 1) + u2(i + 1, b - 1) + u2(i, b) + u2(i + 1, b));
                let dy = (u1n(i, b) - u1n(i, b - 1)) / h;
                out.u1[self.i1(i, b)] = u1(i, b) * dx + adv * dy;
            }
        }
        for j in 1..n {
            for a in 1..=n {
                let adv = 0.25 * (u1(a - 1, j) + u1(a, j) + u1(a - 1, j + 1) + u1(a, j + 1));
                let dx = (u2n(a, j) - u2n(a - 1, j)) / h;
                let dy = (u2c(a - 1, j) - u2c(a - 1, j - 1)) / h;
                out.u2[self.i2(a, j)] = adv * dx + u2(a, j) * dy;
            }
        }
        out
    }

    /// l2 inner product over the interior momentum points.
    pub fn dot(&self, v: &Vel, w: &Vel) -> f64 {
        let n = self.n;
        let mut s = 0.0;
        for b in 1..=n {
            for i in 1..n {
                s += v.u1[self.i1(i, b)] * w.u1[self.i1(i, b)];
            }
        }
        for j in 1..n {
            for a in 1..=n {
                s += v.u2[self.i2(a, j)] * w.u2[self.i2(a, j)];
            }
        }
        s * self.h * self.h
    }

    fn comb(&self, a: f64, v: &Vel, b: f64, w: &Vel) -> Vel {
        Vel {
            u1: v.u1.iter().zip(&w.u1).map(|(p, q)| a * p + b * q).collect(),
            u2: v.u2.iter().zip(&w.u2).map(|(p, q)| a * p + b * q).collect(),
        }
    }

    fn unknowns(&self) -> usize {
        let n = self.n;
        2 * n * (n - 1) + n * n + 1
    }

    /// alpha U - mu Lap U + sign grad P, div U + lambda, sum P
    fn apply(&self, x: &DVector<f64>, alpha: f64, mu: f64, sign: f64) -> DVector<f64> {
        let (n, h) = (self.n, self.h);
        let (v, p, lam) = self.unpack(x);
        let l = self.lap(&v);
        let mut out = DVector::zeros(self.unknowns());
        let mut r = 0;
        for b in 1..=n {
            for i in 1..n {
                let g = (p[self.ip(i, b - 1)] - p[self.ip(i - 1, b - 1)]) / h;
                out[r] = alpha * v.u1[self.i1(i, b)] - mu * l.u1[self.i1(i, b)] + sign * g;
                r += 1;
            }
        }
        for j in 1..n {
            for a in 1..=n {
                let g = (p[self.ip(a - 1, j)] - p[self.ip(a - 1, j - 1)]) / h;
                out[r] = alpha * v.u2[self.i2(a, j)] - mu * l.u2[self.i2(a, j)] + sign * g;
                r += 1;
            }
        }
        for b in 0..n {
            for a in 0..n {
                let dx = (v.u1[self.i1(a + 1, b + 1)] - v.u1[self.i1(a, b + 1)]) / h;
                let dy = (v.u2[self.i2(a + 1, b + 1)] - v.u2[self.i2(a + 1, b)]) / h;
                out[r] = dx + dy + lam;
                r += 1;
            }
        }
        out[r] = p.iter().sum();
        out
    }

    fn unpack(&self, x: &DVector<f64>) -> (Vel, Vec<f64>, f64) {
        let n = self.n;
        let mut v = self.zero();
        let mut r = 0;
        for b in 1..=n {
            for i in 1..n {
                v.u1[self.i1(i, b)] = x[r];
                r += 1;
            }
        }
        for j in 1..n {
            for a in 1..=n {
                v.u2[self.i2(a, j)] = x[r];
                r += 1;
            }
        }
        let p: Vec<f64> = (0..n * n).map(|c| x[r + c]).collect();
        (v, p, x[r + n * n])
    }

    fn pack_rhs(&self, g: &Vel) -> DVector<f64> {
        let n = self.n;
        let mut out = DVector::zeros(self.unknowns());
        let mut r = 0;
        for b in 1..=n {
            for i in 1..n {
                out[r] = g.u1[self.i1(i, b)];
                r += 1;
            }
        }
        for j in 1..n {
            for a in 1..=n {
                out[r] = g.u2[self.i2(a, j)];
                r += 1;
            }
        }
        out
    }

    fn matrix(&self, alpha: f64, mu: f64, sign: f64) -> DMatrix<f64> {
        let m = self.unknowns();
        let mut a = DMatrix::zeros(m, m);
        for c in 0..m {
            let mut e = DVector::zeros(m);
            e[c] = 1.0;
            a.set_column(c, &self.apply(&e, alpha, mu, sign));
        }
        a
    }
}

/// Solve with one step of iterative refinement against the dense matrix.
fn solve(a: &DMatrix<f64>, rhs: &DVector<f64>) -> DVector<f64> {
    let lu = a.clone().lu();
    let mut x = lu.solve(rhs).expect("nonsingular saddle-point matrix");
    let r = rhs - a * &x;
    x += lu.solve(&r).expect("nonsingular saddle-point matrix");
    x
}

#[derive(Clone, Debug)]
pub struct OracleStep {
    pub u: Vel,
    /// cell-centre pressure, index n*b + a
    pub p: Vec<f64>,
    pub q: f64,
    pub s: f64,
}

pub struct Setup {
    pub case: Case,
    pub n: usize,
    pub dt: f64,
    pub nu: f64,
    pub delta: f64,
    pub kappa: f64,
}

/// Runs `steps` steps from the discrete curl of the t = 0 stream function.
pub fn run(cfg: &Setup, steps: usize) -> (Vel, f64, Vec<OracleStep>) {
    let m = Mesh::new(cfg.n);
    let (dt, nu) = (cfg.dt, cfg.nu);
    let u0 = m.curl(|x, y| stream(cfg.case, x, y));
    let q0 = (0.5 * m.dot(&u0, &u0) + cfg.delta).sqrt();

    let start = m.matrix(2.0 / dt, nu, 1.0);
    let main = m.matrix(1.0 / dt, 0.5 * nu, 1.0);

    let mut out = Vec::new();
    let (mut u_prev, mut u, mut q) = (None::<Vel>, u0.clone(), q0);
    for n in 0..steps {
        let t0 = n as f64 * dt;
        let f = m.forcing_avg(cfg.case, nu, t0, t0 + dt);

        let u_ext = match &u_prev {
            None => {
                let c = m.conv(&u);
                let g = m.comb(1.0, &m.comb(1.0, &f, 2.0 / dt, &u), -1.0, &c);
                m.unpack(&solve(&start, &m.pack_rhs(&g))).0
            }
            Some(prev) => m.comb(1.5, &u, -0.5, prev),
        };
        let b = (0.5 * m.dot(&u_ext, &u_ext) + cfg.delta).sqrt();
        let c = m.conv(&u_ext);
        let base = m.comb(1.0, &m.comb(1.0, &f, 1.0 / dt, &u), 0.5 * nu, &m.lap(&u));

        // momentum with the convective weight s; U(s) is affine in s
        let step_at = |s: f64| -> (Vel, Vec<f64>) {
            let g = m.comb(1.0, &base, -s, &c);
            let (v, p, _) = m.unpack(&solve(&main, &m.pack_rhs(&g)));
            (v, p)
        };
        // 2 s B (Q^{n+1} - Q^n) / dt scaled form of the Q equation, with
        // Q^{n+1/2} = s B and Q^{n+1} = 2 s B - Q^n
        let residual = |s: f64| -> f64 {
            let (v, _) = step_at(s);
            let mid = m.comb(0.5, &v, 0.5, &u);
            let dtu = m.comb(1.0 / dt, &v, -1.0 / dt, &u);
            4.0 * s * b * (s * b - q) / dt - s * m.dot(&c, &mid) - m.dot(&dtu, &mid)
        };
        let (g0, gp, gm) = (residual(0.0), residual(1.0), residual(-1.0));
        let qa = 0.5 * (gp + gm) - g0;
        let qb = 0.5 * (gp - gm);
        let disc = qb * qb - 4.0 * qa * g0;
        assert!(disc >= 0.0, "oracle: no real root");
        let roots = [(-qb - disc.sqrt()) / (2.0 * qa), (-qb + disc.sqrt()) / (2.0 * qa)];
        let s = roots
            .iter()
            .copied()
            .filter(|r| (r * b).abs() > cfg.kappa)
            .min_by(|x, y| (x - 1.0).abs().total_cmp(&(y - 1.0).abs()))
            .expect("oracle: both roots rejected");
        // polish the root on the exact residual
        let s = {
            let d = 2.0 * qa * s + qb;
            s - residual(s) / d
        };

        let (u_next, p) = step_at(s);
        let q_next = 2.0 * s * b - q;
        out.push(OracleStep { u: u_next.clone(), p, q: q_next, s });
        u_prev = Some(std::mem::replace(&mut u, u_next));
        q = q_next;
    }
    (u0, q0, out)
}
