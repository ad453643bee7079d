//! Homogeneous self-dual interior-point method for real symmetric SDPs.
//!
//! The embedded problem is put in standard form `min <c,x>` s.t. `A x = b`,
//! `x` in a product of PSD blocks and a nonnegative orthant holding one slack
//! per inequality row (`<=` rows are negated into `>=` rows). The algorithm
//! iterates on the homogeneous model
//!
//! ```text
//! A x - b t = 0,   A'y + z - c t = 0,   b'y - c'x - k = 0,   x, z in K,  t, k >= 0
//! ```
//!
//! with Nesterov-Todd scaling and a Mehrotra predictor-corrector step. A
//! solution with `t > 0` yields primal/dual optima; `t -> 0` with `b'y > 0`
//! certifies primal infeasibility. Once the iterate is close to optimal the
//! last few steps keep `t` fixed.

use nalgebra::{DMatrix, DVector};

use super::embed::RealSdp;
use super::{SdpStatus, Sense};

#[derive(Debug, Clone)]
pub struct SolverSettings {
    pub max_iter: usize,
    /// Absolute primal / dual residual tolerance.
    pub feas_tol: f64,
    /// Relative duality-gap tolerance.
    pub gap_tol: f64,
    /// Tolerance on the normalized Farkas residual.
    pub infeas_tol: f64,
    /// Fraction-to-boundary factor.
    pub step_fraction: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            max_iter: 200,
            feas_tol: 1e-8,
            gap_tol: 1e-7,
            infeas_tol: 1e-8,
            step_fraction: 0.99,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RawSolution {
    pub status: SdpStatus,
    pub blocks: Vec<DMatrix<f64>>,
    /// Multipliers in the caller's sense convention (nonnegative for inequalities).
    pub duals: Vec<f64>,
    pub iterations: usize,
}

/// Element of the cone product: PSD blocks plus orthant coordinates.
#[derive(Debug, Clone)]
struct Point {
    s: Vec<DMatrix<f64>>,
    l: DVector<f64>,
}

impl Point {
    fn zeros_like(dims: &[usize], n_lp: usize) -> Self {
        Self {
            s: dims.iter().map(|&n| DMatrix::zeros(n, n)).collect(),
            l: DVector::zeros(n_lp),
        }
    }

    fn identity(dims: &[usize], n_lp: usize, scale: f64) -> Self {
        Self {
            s: dims.iter().map(|&n| DMatrix::identity(n, n) * scale).collect(),
            l: DVector::from_element(n_lp, scale),
        }
    }

    fn dot(&self, other: &Point) -> f64 {
        let blocks: f64 = self.s.iter().zip(&other.s).map(|(a, b)| a.dot(b)).sum();
        blocks + self.l.dot(&other.l)
    }

    fn axpy(&mut self, alpha: f64, other: &Point) {
        for (a, b) in self.s.iter_mut().zip(&other.s) {
            mat_axpy(a, alpha, b);
        }
        self.l.axpy(alpha, &other.l, 1.0);
    }

    fn scaled(&self, alpha: f64) -> Point {
        Point {
            s: self.s.iter().map(|a| a * alpha).collect(),
            l: &self.l * alpha,
        }
    }

    fn max_abs(&self) -> f64 {
        let b = self.s.iter().flat_map(|a| a.iter()).fold(0.0_f64, |m, v| m.max(v.abs()));
        self.l.iter().fold(b, |m, v| m.max(v.abs()))
    }

    fn symmetrize(&mut self) {
        for a in &mut self.s {
            let t = a.transpose();
            *a += t;
            *a *= 0.5;
        }
    }
}

fn mat_axpy(a: &mut DMatrix<f64>, alpha: f64, b: &DMatrix<f64>) {
    a.iter_mut().zip(b.iter()).for_each(|(x, y)| *x += alpha * y);
}

struct Row {
    terms: Vec<(usize, DMatrix<f64>)>,
    slack: Option<usize>,
}

/// Standard-form data.
struct Standard {
    dims: Vec<usize>,
    n_lp: usize,
    rows: Vec<Row>,
    b: DVector<f64>,
    c: Point,
}

impl Standard {
    fn from_real(p: &RealSdp) -> Self {
        let mut rows = Vec::with_capacity(p.constraints.len());
        let mut b = DVector::zeros(p.constraints.len());
        let mut n_lp = 0;
        for (m, con) in p.constraints.iter().enumerate() {
            let sign = if con.sense == Sense::Le { -1.0 } else { 1.0 };
            let slack = if con.sense == Sense::Eq {
                None
            } else {
                n_lp += 1;
                Some(n_lp - 1)
            };
            rows.push(Row {
                terms: con.terms.iter().map(|(blk, a)| (*blk, a * sign)).collect(),
                slack,
            });
            b[m] = sign * con.rhs;
        }
        let c = Point {
            s: p.objective.clone(),
            l: DVector::zeros(n_lp),
        };
        Self {
            dims: p.block_dims.clone(),
            n_lp,
            rows,
            b,
            c,
        }
    }

    fn degree(&self) -> f64 {
        (self.dims.iter().sum::<usize>() + self.n_lp) as f64
    }

    /// `A x`; slack coefficient is -1.
    fn apply(&self, x: &Point) -> DVector<f64> {
        DVector::from_iterator(
            self.rows.len(),
            self.rows.iter().map(|row| {
                let mut v: f64 = row.terms.iter().map(|(blk, a)| a.dot(&x.s[*blk])).sum();
                if let Some(l) = row.slack {
                    v -= x.l[l];
                }
                v
            }),
        )
    }

    fn apply_adjoint(&self, y: &DVector<f64>) -> Point {
        let mut out = Point::zeros_like(&self.dims, self.n_lp);
        for (row, &ym) in self.rows.iter().zip(y.iter()) {
            for (blk, a) in &row.terms {
                mat_axpy(&mut out.s[*blk], ym, a);
            }
            if let Some(l) = row.slack {
                out.l[l] -= ym;
            }
        }
        out
    }
}

struct BlockScaling {
    r: DMatrix<f64>,
    rinv: DMatrix<f64>,
    lambda: DVector<f64>,
}

struct Scaling {
    blocks: Vec<BlockScaling>,
    /// `w = sqrt(x/z)` per orthant coordinate.
    lw: DVector<f64>,
    llambda: DVector<f64>,
}

impl Scaling {
    fn compute(x: &Point, z: &Point) -> Option<Self> {
        let mut blocks = Vec::with_capacity(x.s.len());
        for (xb, zb) in x.s.iter().zip(&z.s) {
            let lx = xb.clone().cholesky()?.l();
            let lz = zb.clone().cholesky()?.l();
            let svd = (lz.transpose() * &lx).svd(true, true);
            let u = svd.u?;
            let v = svd.v_t?.transpose();
            let lambda = svd.singular_values;
            if lambda.iter().any(|&s| s <= 0.0 || !s.is_finite()) {
                return None;
            }
            let inv_sqrt = lambda.map(|s| 1.0 / s.sqrt());
            let mut r = &lx * v;
            for (c, &f) in inv_sqrt.iter().enumerate() {
                r.column_mut(c).scale_mut(f);
            }
            let mut rinv = u.transpose() * lz.transpose();
            for (row, &f) in inv_sqrt.iter().enumerate() {
                rinv.row_mut(row).scale_mut(f);
            }
            blocks.push(BlockScaling { r, rinv, lambda });
        }
        let lw = x.l.zip_map(&z.l, |a, b| (a / b).sqrt());
        let llambda = x.l.zip_map(&z.l, |a, b| (a * b).sqrt());
        Some(Self { blocks, lw, llambda })
    }

    /// `R q R'`.
    fn unscale(&self, q: &Point) -> Point {
        Point {
            s: self.blocks.iter().zip(&q.s).map(|(sc, a)| &sc.r * a * sc.r.transpose()).collect(),
            l: q.l.zip_map(&self.lw, |v, w| v * w),
        }
    }

    /// `R^{-T} q R^{-1}`.
    fn unscale_dual(&self, q: &Point) -> Point {
        Point {
            s: self.blocks.iter().zip(&q.s).map(|(sc, a)| sc.rinv.transpose() * a * &sc.rinv).collect(),
            l: q.l.zip_map(&self.lw, |v, w| v / w),
        }
    }

    fn scale_dual(&self, dz: &Point) -> Point {
        Point {
            s: self.blocks.iter().zip(&dz.s).map(|(sc, a)| sc.r.transpose() * a * &sc.r).collect(),
            l: dz.l.zip_map(&self.lw, |v, w| v * w),
        }
    }

    /// `lambda o lambda`.
    fn lambda_sq(&self) -> Point {
        Point {
            s: self
                .blocks
                .iter()
                .map(|sc| DMatrix::from_diagonal(&sc.lambda.map(|v| v * v)))
                .collect(),
            l: self.llambda.map(|v| v * v),
        }
    }

    /// `lambda o u`.
    fn lambda_product(&self, u: &Point) -> Point {
        Point {
            s: self
                .blocks
                .iter()
                .zip(&u.s)
                .map(|(sc, ub)| {
                    DMatrix::from_fn(ub.nrows(), ub.ncols(), |i, j| {
                        0.5 * (sc.lambda[i] + sc.lambda[j]) * ub[(i, j)]
                    })
                })
                .collect(),
            l: u.l.component_mul(&self.llambda),
        }
    }

    /// Solves `lambda o u = t` for `u`.
    fn lambda_solve(&self, t: &Point) -> Point {
        Point {
            s: self
                .blocks
                .iter()
                .zip(&t.s)
                .map(|(sc, tb)| {
                    DMatrix::from_fn(tb.nrows(), tb.ncols(), |i, j| {
                        2.0 * tb[(i, j)] / (sc.lambda[i] + sc.lambda[j])
                    })
                })
                .collect(),
            l: t.l.zip_map(&self.llambda, |v, lam| v / lam),
        }
    }

    /// Largest `alpha` with `lambda + alpha d` in the cone (may be infinite).
    fn max_step(&self, d: &Point) -> f64 {
        let mut alpha = f64::INFINITY;
        for (sc, db) in self.blocks.iter().zip(&d.s) {
            let f = sc.lambda.map(|v| 1.0 / v.sqrt());
            let mut m = DMatrix::from_fn(db.nrows(), db.ncols(), |i, j| f[i] * db[(i, j)] * f[j]);
            let t = m.transpose();
            m += t;
            m *= 0.5;
            let min = m.symmetric_eigenvalues().iter().fold(f64::INFINITY, |a, &b| a.min(b));
            if min < 0.0 {
                alpha = alpha.min(-1.0 / min);
            }
        }
        for (lam, dv) in self.llambda.iter().zip(d.l.iter()) {
            if *dv < 0.0 {
                alpha = alpha.min(-lam / dv);
            }
        }
        alpha
    }
}

fn jordan(a: &Point, b: &Point) -> Point {
    Point {
        s: a
            .s
            .iter()
            .zip(&b.s)
            .map(|(x, y)| {
                let p = x * y;
                (&p + p.transpose()) * 0.5
            })
            .collect(),
        l: a.l.component_mul(&b.l),
    }
}

struct Direction {
    dx: Point,
    dz: Point,
    dy: DVector<f64>,
    dtau: f64,
    dkappa: f64,
    dx_scaled: Point,
    dz_scaled: Point,
}

impl Direction {
    fn add(&self, o: &Direction) -> Direction {
        let sum = |a: &Point, b: &Point| {
            let mut r = a.clone();
            r.axpy(1.0, b);
            r
        };
        Direction {
            dx: sum(&self.dx, &o.dx),
            dz: sum(&self.dz, &o.dz),
            dy: &self.dy + &o.dy,
            dtau: self.dtau + o.dtau,
            dkappa: self.dkappa + o.dkappa,
            dx_scaled: sum(&self.dx_scaled, &o.dx_scaled),
            dz_scaled: sum(&self.dz_scaled, &o.dz_scaled),
        }
    }
}

/// Right-hand side of the Newton system
/// `A dx - b dtau = p`, `A'dy + dz - c dtau = d`, `b'dy - c'dx - dkappa = g`,
/// `lambda o (dx~ + dz~) = c`, `kappa dtau + tau dkappa = tk`.
struct Rhs {
    p: DVector<f64>,
    d: Point,
    g: f64,
    c: Point,
    tk: f64,
}

impl Rhs {
    fn size(&self) -> f64 {
        self.p
            .amax()
            .max(self.d.max_abs())
            .max(self.g.abs())
            .max(self.c.max_abs())
            .max(self.tk.abs())
    }
}

fn flatten(p: &Point) -> DVector<f64> {
    let len = p.s.iter().map(|b| b.len()).sum::<usize>() + p.l.len();
    DVector::from_iterator(len, p.s.iter().flat_map(|b| b.iter().copied()).chain(p.l.iter().copied()))
}

fn unflatten(v: &DVector<f64>, dims: &[usize], n_lp: usize) -> Point {
    let mut at = 0;
    let s = dims
        .iter()
        .map(|&n| {
            let m = DMatrix::from_column_slice(n, n, &v.as_slice()[at..at + n * n]);
            at += n * n;
            m
        })
        .collect();
    Point {
        s,
        l: DVector::from_column_slice(&v.as_slice()[at..at + n_lp]),
    }
}

/// Newton system in NT-scaled coordinates. The scaled constraint matrix
/// `G = [vec(R'A_i R)]` is factored by QR, so the normal matrix `G'G` is never
/// formed.
struct Newton<'a> {
    sf: &'a Standard,
    sc: &'a Scaling,
    g: DMatrix<f64>,
    r: DMatrix<f64>,
    /// scaled objective `R'cR`
    c: DVector<f64>,
    /// `(G'G)^{-1} b`
    u: DVector<f64>,
    /// `(G'G)^{-1} G'c`
    v: DVector<f64>,
    /// component of the scaled objective orthogonal to the range of `G`
    proj: DVector<f64>,
    b_minus_a: DVector<f64>,
    den: f64,
    tau: f64,
    kappa: f64,
    fp: &'a DVector<f64>,
    fd: &'a Point,
    fg: f64,
    /// Hold `tau` and `kappa` fixed (plain primal-dual step).
    fixed: bool,
}

impl<'a> Newton<'a> {
    #[allow(clippy::too_many_arguments)]
    fn new(
        sf: &'a Standard,
        sc: &'a Scaling,
        tau: f64,
        kappa: f64,
        fp: &'a DVector<f64>,
        fd: &'a Point,
        fg: f64,
        fixed: bool,
    ) -> Option<Self> {
        let m = sf.rows.len();
        let mut cols = Vec::with_capacity(m);
        for row in &sf.rows {
            let mut a = Point::zeros_like(&sf.dims, sf.n_lp);
            for (blk, coeff) in &row.terms {
                a.s[*blk] += coeff;
            }
            if let Some(l) = row.slack {
                a.l[l] = -1.0;
            }
            cols.push(flatten(&sc.scale_dual(&a)));
        }
        let dim = cols.first().map_or(0, |c| c.len());
        if dim < m {
            return None;
        }
        let g = DMatrix::from_columns(&cols);
        let qr = g.clone().qr();
        let q = qr.q();
        let r = qr.r();
        let rmax = r.diagonal().amax();
        if m > 0 && r.diagonal().iter().any(|d| d.abs() <= 1e-14 * rmax || !d.is_finite()) {
            return None;
        }
        let c = flatten(&sc.scale_dual(&sf.c));
        let qtc = q.transpose() * &c;
        let proj = &c - &q * &qtc;
        let v = r.solve_upper_triangular(&qtc)?;
        let rtb = r.tr_solve_upper_triangular(&sf.b)?;
        let u = r.solve_upper_triangular(&rtb)?;
        let a = g.transpose() * &c;
        let den = rtb.norm_squared() + proj.norm_squared() + kappa / tau;
        Some(Self {
            sf,
            sc,
            b_minus_a: &sf.b - a,
            g,
            r,
            c,
            u,
            v,
            proj,
            den,
            tau,
            kappa,
            fp,
            fd,
            fg,
            fixed,
        })
    }

    /// `(G'G)^{-1} t`.
    fn normal_solve(&self, t: &DVector<f64>) -> DVector<f64> {
        let w = self.r.tr_solve_upper_triangular(t).expect("nonsingular triangle");
        self.r.solve_upper_triangular(&w).expect("nonsingular triangle")
    }

    fn solve(&self, eta: f64, rhs_c: &Point, r_tk: f64) -> Direction {
        let rhs = Rhs {
            p: -(self.fp * eta),
            d: self.fd.scaled(-eta),
            g: -eta * self.fg,
            c: rhs_c.clone(),
            tk: r_tk,
        };
        let mut dir = self.solve_rhs(&rhs);
        let mut res = self.residual(&rhs, &dir);
        let mut size = res.size();
        for _ in 0..REFINE_STEPS {
            let corr = self.solve_rhs(&res);
            let candidate = dir.add(&corr);
            let next = self.residual(&rhs, &candidate);
            let next_size = next.size();
            if next_size >= 0.5 * size {
                break;
            }
            dir = candidate;
            res = next;
            size = next_size;
        }
        dir
    }

    fn solve_rhs(&self, rhs: &Rhs) -> Direction {
        let (sf, sc) = (self.sf, self.sc);
        let qs = flatten(&sc.lambda_solve(&rhs.c));
        let g0 = &qs - flatten(&sc.scale_dual(&rhs.d));
        let q = self.normal_solve(&(&rhs.p - self.g.transpose() * &g0));
        let dtau = if self.fixed {
            0.0
        } else {
            (rhs.g + rhs.tk / self.tau + self.c.dot(&g0) - self.b_minus_a.dot(&q)) / self.den
        };
        let dy = &q + (&self.u + &self.v) * dtau;
        let dx_flat = &g0 + &self.g * (&q + &self.u * dtau) - &self.proj * dtau;
        let dz_flat = &qs - &dx_flat;
        let mut dx_scaled = unflatten(&dx_flat, &sf.dims, sf.n_lp);
        let mut dz_scaled = unflatten(&dz_flat, &sf.dims, sf.n_lp);
        dx_scaled.symmetrize();
        dz_scaled.symmetrize();
        let dkappa = if self.fixed { 0.0 } else { (rhs.tk - self.kappa * dtau) / self.tau };
        Direction {
            dx: sc.unscale(&dx_scaled),
            dz: sc.unscale_dual(&dz_scaled),
            dy,
            dtau,
            dkappa,
            dx_scaled,
            dz_scaled,
        }
    }

    fn residual(&self, rhs: &Rhs, d: &Direction) -> Rhs {
        let sf = self.sf;
        let p = &rhs.p - (sf.apply(&d.dx) - &sf.b * d.dtau);
        let mut lhs_d = sf.apply_adjoint(&d.dy);
        lhs_d.axpy(1.0, &d.dz);
        lhs_d.axpy(-d.dtau, &sf.c);
        let mut dres = rhs.d.clone();
        dres.axpy(-1.0, &lhs_d);
        let (g, tk) = if self.fixed {
            (0.0, 0.0)
        } else {
            (
                rhs.g - (sf.b.dot(&d.dy) - sf.c.dot(&d.dx) - d.dkappa),
                rhs.tk - (self.kappa * d.dtau + self.tau * d.dkappa),
            )
        };
        let mut sum = d.dx_scaled.clone();
        sum.axpy(1.0, &d.dz_scaled);
        let mut c = rhs.c.clone();
        c.axpy(-1.0, &self.sc.lambda_product(&sum));
        Rhs { p, d: dres, g, c, tk }
    }

    fn max_step(&self, d: &Direction) -> f64 {
        let mut alpha = self.sc.max_step(&d.dx_scaled).min(self.sc.max_step(&d.dz_scaled));
        if d.dtau < 0.0 {
            alpha = alpha.min(-self.tau / d.dtau);
        }
        if d.dkappa < 0.0 {
            alpha = alpha.min(-self.kappa / d.dkappa);
        }
        alpha
    }
}

const REFINE_STEPS: usize = 2;

pub fn solve(problem: &RealSdp, settings: &SolverSettings) -> RawSolution {
    let sf = Standard::from_real(problem);
    let m = sf.rows.len();
    let nu = sf.degree();
    let bmax = sf.b.iter().fold(0.0_f64, |a, &v| a.max(v.abs()));
    let cmax = sf.c.max_abs();
    let x_scale = 1.0 + bmax;
    let z_scale = 1.0 + cmax;
    let mut x = Point::identity(&sf.dims, sf.n_lp, x_scale);
    let mut z = Point::identity(&sf.dims, sf.n_lp, z_scale);
    let mut y = DVector::zeros(m);
    let mut tau = 1.0;
    let mut kappa = x_scale * z_scale;

    let finish = |status: SdpStatus, x: &Point, y: &DVector<f64>, tau: f64, iterations: usize| {
        let inv = if status == SdpStatus::Optimal { 1.0 / tau } else { 0.0 };
        RawSolution {
            status,
            blocks: x.s.iter().map(|b| b * inv).collect(),
            duals: y.iter().map(|v| v * inv).collect(),
            iterations,
        }
    };

    // Once the tolerances are met, keep iterating toward `REFINE` times them
    // while progress continues and return the best accepted iterate.
    let mut best: Option<Best> = None;
    let mut stalled = 0;
    let mut fixed = false;
    for iter in 0..settings.max_iter {
        let fp = sf.apply(&x) - &sf.b * tau;
        let mut fd = sf.apply_adjoint(&y);
        fd.axpy(1.0, &z);
        fd.axpy(-tau, &sf.c);
        let cx = sf.c.dot(&x);
        let by = sf.b.dot(&y);
        let fg = by - cx - kappa;
        let mu = (x.dot(&z) + tau * kappa) / (nu + 1.0);

        let pres = fp.amax() / tau / x_scale;
        let dres = fd.max_abs() / tau / z_scale;
        let pobj = cx / tau;
        let dobj = by / tau;
        let gap = (pobj - dobj).abs() / (1.0 + pobj.abs());
        let compl = x
            .l
            .iter()
            .zip(z.l.iter())
            .fold(0.0_f64, |a, (xv, zv)| a.max(xv * zv))
            / (tau * tau);
        let merit = (pres / settings.feas_tol)
            .max(dres / settings.feas_tol)
            .max(gap / settings.gap_tol)
            .max(compl / settings.gap_tol);
        if merit <= REFINE {
            return finish(SdpStatus::Optimal, &x, &y, tau, iter);
        }
        if merit <= 1.0 && best.as_ref().is_none_or(|b| merit < b.merit) {
            best = Some(Best {
                merit,
                x: x.clone(),
                y: y.clone(),
                tau,
                iter,
            });
            stalled = 0;
        } else if best.is_some() {
            stalled += 1;
            if stalled >= STALL_LIMIT {
                break;
            }
        }
        if by > 0.0 {
            let mut farkas = sf.apply_adjoint(&y);
            farkas.axpy(1.0, &z);
            if farkas.max_abs() <= settings.infeas_tol * by {
                return finish(SdpStatus::PrimalInfeasible, &x, &y, tau, iter);
            }
        }
        if cx < 0.0 && sf.apply(&x).amax() <= settings.infeas_tol * -cx {
            return finish(SdpStatus::NumericalFailure, &x, &y, tau, iter);
        }

        let Some(sc) = Scaling::compute(&x, &z) else {
            break;
        };
        // Near a solution the homogeneous step's tau component is dominated by
        // rounding; finish with plain primal-dual steps at fixed tau.
        fixed = fixed || (merit <= FIX_TAU_MERIT && kappa <= FIX_TAU_KAPPA * tau);
        let Some(newton) = Newton::new(&sf, &sc, tau, kappa, &fp, &fd, fg, fixed) else {
            break;
        };
        let mu = if fixed { x.dot(&z) / nu } else { mu };

        // predictor
        let lam_sq = sc.lambda_sq();
        let aff = newton.solve(1.0, &lam_sq.scaled(-1.0), -tau * kappa);
        let alpha_aff = newton.max_step(&aff).min(1.0);
        let mut xs = Point::zeros_like(&sf.dims, sf.n_lp);
        for (blk, s) in sc.blocks.iter().zip(xs.s.iter_mut()) {
            *s = DMatrix::from_diagonal(&blk.lambda);
        }
        xs.l = sc.llambda.clone();
        let mut xa = xs.clone();
        xa.axpy(alpha_aff, &aff.dx_scaled);
        let mut za = xs;
        za.axpy(alpha_aff, &aff.dz_scaled);
        let mu_aff = if fixed {
            xa.dot(&za) / nu
        } else {
            (xa.dot(&za) + (tau + alpha_aff * aff.dtau) * (kappa + alpha_aff * aff.dkappa)) / (nu + 1.0)
        };
        let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);

        // corrector
        let mut rhs = Point::identity(&sf.dims, sf.n_lp, sigma * mu);
        rhs.axpy(-1.0, &lam_sq);
        rhs.axpy(-1.0, &jordan(&aff.dx_scaled, &aff.dz_scaled));
        let r_tk = sigma * mu - tau * kappa - aff.dtau * aff.dkappa;
        let dir = newton.solve(1.0 - sigma, &rhs, r_tk);
        let alpha = (settings.step_fraction * newton.max_step(&dir)).min(1.0);

        x.axpy(alpha, &dir.dx);
        z.axpy(alpha, &dir.dz);
        y.axpy(alpha, &dir.dy, 1.0);
        tau += alpha * dir.dtau;
        kappa += alpha * dir.dkappa;
        x.symmetrize();
        z.symmetrize();
        if !(tau > 0.0 && kappa > 0.0 && tau.is_finite() && x.max_abs().is_finite()) {
            break;
        }
    }
    match best {
        Some(b) => finish(SdpStatus::Optimal, &b.x, &b.y, b.tau, b.iter),
        None => finish(SdpStatus::NumericalFailure, &x, &y, 1.0, settings.max_iter),
    }
}

const REFINE: f64 = 1e-2;
const FIX_TAU_MERIT: f64 = 1e3;
const FIX_TAU_KAPPA: f64 = 1e-6;
const STALL_LIMIT: usize = 3;

struct Best {
    merit: f64,
    x: Point,
    y: DVector<f64>,
    tau: f64,
    iter: usize,
}
