//! Inhomogeneous Dirichlet heat problem on a pulled-back strip, solved as
//! `u = u~ + E` with `E` a slicewise extension of the boundary data and `u~` the solution
//! of the homogeneous problem with forcing `f - (d_t - Delta) E`.
//!
//! Space is the straightened strip `0 <= y_1 <= Y`, `y_2` periodic; the Laplacian of the
//! graph domain is carried over by the chain rule. Time stepping is implicit Euler.

use std::sync::Arc;

use ndarray::{s, Array2, Array3};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{MrError, Result};
use crate::families::member_rng;
use crate::geometry::PullbackMap;
use crate::grid::{axis_coords, GridField, C64};
use crate::lp::{make_generator, AnisotropyDescriptor};
use crate::params::{compatibility_mode, trace_space_orders, validate_heat_theorem, CompatibilityMode, ParamSet};
use crate::quadrature::{mixed_norm_raw, nonuniform_measures};
use crate::spaces::Bracket;
use crate::traceext::{ext_profile, make_rho, tangential_blocks, trace_space_norm, Collar};

const SOLVER_TOL: f64 = 1e-12;
const SOLVER_MAX_ITERS: usize = 5000;
const JACOBIAN_STEP: f64 = 1e-5;

/// Space-time strip grid. `n1` cells in `y_1` (stretched by `grading`), `n2` periodic
/// nodes in `y_2` (`n2 = 1` gives a one-dimensional problem), `nt` implicit Euler steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StripGrid {
    pub n1: usize,
    pub depth: f64,
    pub n2: usize,
    pub l2: f64,
    pub nt: usize,
    pub horizon: f64,
    /// Stretch strength `beta` of `y = Y (e^{beta xi} - 1)/(e^beta - 1)`; zero is uniform.
    pub grading: f64,
}

impl StripGrid {
    pub fn validate(&self) -> Result<()> {
        if self.n1 < 4 || self.nt < 1 || self.n2 == 0 {
            return Err(MrError::InvalidParameter(format!("strip grid too small: {self:?}")));
        }
        if !(self.depth > 0.0 && self.horizon > 0.0 && self.l2 > 0.0 && self.grading >= 0.0) {
            return Err(MrError::InvalidParameter(format!("strip geometry: {self:?}")));
        }
        Ok(())
    }

    pub fn nodes1(&self) -> Vec<f64> {
        let b = self.grading;
        (0..=self.n1)
            .map(|i| {
                let xi = i as f64 / self.n1 as f64;
                if b == 0.0 {
                    self.depth * xi
                } else {
                    self.depth * (b * xi).exp_m1() / b.exp_m1()
                }
            })
            .collect()
    }

    pub fn nodes2(&self) -> Vec<f64> {
        if self.n2 == 1 {
            vec![0.0]
        } else {
            axis_coords(self.n2, self.l2)
        }
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.nt as f64
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.nt).map(|n| n as f64 * self.dt()).collect()
    }

    fn h2(&self) -> f64 {
        if self.n2 == 1 {
            1.0
        } else {
            2.0 * self.l2 / self.n2 as f64
        }
    }

    /// Doubles every resolution.
    pub fn refined(&self) -> StripGrid {
        StripGrid { n1: 2 * self.n1, n2: if self.n2 == 1 { 1 } else { 2 * self.n2 }, nt: 2 * self.nt, ..*self }
    }

    fn shape(&self) -> [usize; 3] {
        [self.nt + 1, self.n1 + 1, self.n2]
    }
}

/// Default stretch: graded towards `y_1 = 0` when `gamma >= p - 1`.
pub fn default_grading(ps: &ParamSet) -> f64 {
    if ps.gamma >= ps.p - 1.0 {
        2.0
    } else {
        0.0
    }
}

/// Compressed sparse rows.
#[derive(Debug, Clone, PartialEq)]
struct Csr {
    indptr: Vec<usize>,
    indices: Vec<usize>,
    data: Vec<f64>,
}

impl Csr {
    fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Csr {
        let mut indptr = vec![0];
        let (mut indices, mut data) = (Vec::new(), Vec::new());
        for mut r in rows {
            r.sort_by_key(|e| e.0);
            let mut last: Option<usize> = None;
            for (c, v) in r {
                if last == Some(c) {
                    *data.last_mut().expect("entry") += v;
                } else {
                    indices.push(c);
                    data.push(v);
                    last = Some(c);
                }
            }
            indptr.push(indices.len());
        }
        Csr { indptr, indices, data }
    }

    fn rows(&self) -> usize {
        self.indptr.len() - 1
    }

    fn matvec(&self, x: &[f64], y: &mut [f64]) {
        y.par_iter_mut().enumerate().for_each(|(i, yi)| {
            let mut acc = 0.0;
            for k in self.indptr[i]..self.indptr[i + 1] {
                acc += self.data[k] * x[self.indices[k]];
            }
            *yi = acc;
        });
    }

    fn diagonal(&self) -> Vec<f64> {
        (0..self.rows())
            .map(|i| (self.indptr[i]..self.indptr[i + 1]).find(|&k| self.indices[k] == i).map(|k| self.data[k]).unwrap_or(0.0))
            .collect()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Jacobi-preconditioned BiCGSTAB; returns iterations used.
fn bicgstab(a: &Csr, dinv: &[f64], b: &[f64], x: &mut [f64]) -> Result<usize> {
    let n = b.len();
    let bnorm = dot(b, b).sqrt();
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(0);
    }
    let mut r = vec![0.0; n];
    a.matvec(x, &mut r);
    r.iter_mut().zip(b).for_each(|(ri, bi)| *ri = bi - *ri);
    if dot(&r, &r).sqrt() <= SOLVER_TOL * bnorm {
        return Ok(0);
    }
    let rhat = r.clone();
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let (mut v, mut p) = (vec![0.0; n], vec![0.0; n]);
    let (mut y, mut z, mut s, mut t) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    for it in 1..=SOLVER_MAX_ITERS {
        let rho_new = dot(&rhat, &r);
        if rho_new == 0.0 || omega == 0.0 {
            break;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
            y[i] = dinv[i] * p[i];
        }
        a.matvec(&y, &mut v);
        alpha = rho / dot(&rhat, &v);
        for i in 0..n {
            s[i] = r[i] - alpha * v[i];
        }
        if dot(&s, &s).sqrt() <= SOLVER_TOL * bnorm {
            for i in 0..n {
                x[i] += alpha * y[i];
            }
            return Ok(it);
        }
        for i in 0..n {
            z[i] = dinv[i] * s[i];
        }
        a.matvec(&z, &mut t);
        omega = dot(&t, &s) / dot(&t, &t);
        for i in 0..n {
            x[i] += alpha * y[i] + omega * z[i];
            r[i] = s[i] - omega * t[i];
        }
        if dot(&r, &r).sqrt() <= SOLVER_TOL * bnorm {
            return Ok(it);
        }
    }
    let mut res = vec![0.0; n];
    a.matvec(x, &mut res);
    let rel = res.iter().zip(b).map(|(u, w)| (u - w).powi(2)).sum::<f64>().sqrt() / bnorm;
    Err(MrError::SolverDiverged { iters: SOLVER_MAX_ITERS, residual: rel })
}

/// Three-point weights `(w_-, w_0, w_+)` for the first and second derivative at an interior node.
fn stencil(hm: f64, hp: f64) -> ([f64; 3], [f64; 3]) {
    let s = hm + hp;
    ([-hp / (hm * s), (hp - hm) / (hm * hp), hm / (hp * s)], [2.0 / (hm * s), -2.0 / (hm * hp), 2.0 / (hp * s)])
}

/// Discrete pulled-back Laplacian
/// `A11 d11 + 2 A12 d12 + A22 d22 + c1 d1` with `A = D Phi D Phi^T`, `c1 = Delta_x Phi_1`.
#[derive(Debug, Clone)]
pub struct StripOperator {
    grid: StripGrid,
    /// Rows for interior `y_1` nodes, columns over all nodes `i * n2 + k`.
    lap: Csr,
    /// `I - dt L` on interior unknowns.
    system: Csr,
    dinv: Vec<f64>,
}

impl StripOperator {
    pub fn new(map: &PullbackMap, grid: &StripGrid) -> Result<StripOperator> {
        grid.validate()?;
        let y1 = grid.nodes1();
        let y2 = grid.nodes2();
        let (n1, n2) = (grid.n1, grid.n2);
        let h2 = grid.h2();
        let with_y2 = n2 >= 3;
        let pq = |y: [f64; 2]| {
            let (a, b) = map.jacobian_inverse(&y);
            (1.0 / a, -b / a)
        };
        let rows: Vec<Vec<(usize, f64)>> = (1..n1)
            .into_par_iter()
            .flat_map_iter(|i| {
                let (d1, d11) = stencil(y1[i] - y1[i - 1], y1[i + 1] - y1[i]);
                let (y1, y2, pq) = (&y1, &y2, &pq);
                (0..n2).map(move |k| {
                    let y = [y1[i], y2[k]];
                    let (p, q) = pq(y);
                    let e = JACOBIAN_STEP;
                    let (pp, qp) = pq([y[0] + e, y[1]]);
                    let (pm, qm) = pq([y[0] - e, y[1]]);
                    let (_, q2p) = pq([y[0], y[1] + e]);
                    let (_, q2m) = pq([y[0], y[1] - e]);
                    let c1 = p * (pp - pm) / (2.0 * e) + q * (qp - qm) / (2.0 * e) + (q2p - q2m) / (2.0 * e);
                    let (a11, a12) = (p * p + q * q, q);
                    let idx = |ii: usize, kk: isize| ii * n2 + kk.rem_euclid(n2 as isize) as usize;
                    let mut row = Vec::with_capacity(15);
                    for (o, (w1, w11)) in [-1isize, 0, 1].iter().zip(d1.iter().zip(d11.iter())) {
                        let ii = (i as isize + o) as usize;
                        row.push((idx(ii, k as isize), a11 * w11 + c1 * w1));
                        if with_y2 {
                            // mixed term 2 A12 d1 d2
                            let c = 2.0 * a12 * w1 / (2.0 * h2);
                            row.push((idx(ii, k as isize + 1), c));
                            row.push((idx(ii, k as isize - 1), -c));
                        }
                    }
                    if with_y2 {
                        row.push((idx(i, k as isize + 1), 1.0 / (h2 * h2)));
                        row.push((idx(i, k as isize), -2.0 / (h2 * h2)));
                        row.push((idx(i, k as isize - 1), 1.0 / (h2 * h2)));
                    }
                    row
                })
            })
            .collect();
        let dt = grid.dt();
        let interior = |col: usize| {
            let i = col / n2;
            if i >= 1 && i < n1 {
                Some((i - 1) * n2 + col % n2)
            } else {
                None
            }
        };
        let sys_rows: Vec<Vec<(usize, f64)>> = rows
            .iter()
            .enumerate()
            .map(|(r, row)| {
                let mut out: Vec<(usize, f64)> = row.iter().filter_map(|&(c, v)| interior(c).map(|ci| (ci, -dt * v))).collect();
                out.push((r, 1.0));
                out
            })
            .collect();
        let system = Csr::from_rows(sys_rows);
        let dinv = system.diagonal().iter().map(|d| if *d != 0.0 { 1.0 / d } else { 1.0 }).collect();
        Ok(StripOperator { grid: *grid, lap: Csr::from_rows(rows), system, dinv })
    }

    pub fn grid(&self) -> &StripGrid {
        &self.grid
    }

    /// `L_h u` on interior nodes; boundary rows are zero.
    pub fn apply(&self, u: &Array2<f64>) -> Array2<f64> {
        let (n1, n2) = (self.grid.n1, self.grid.n2);
        let x: Vec<f64> = u.iter().copied().collect();
        let mut y = vec![0.0; self.lap.rows()];
        self.lap.matvec(&x, &mut y);
        let mut out = Array2::zeros((n1 + 1, n2));
        for (r, v) in y.into_iter().enumerate() {
            out[[1 + r / n2, r % n2]] = v;
        }
        out
    }

    /// `max |diag| / min |diag|` of `I - dt L`.
    pub fn diagonal_spread(&self) -> f64 {
        let d = self.system.diagonal();
        let mx = d.iter().map(|v| v.abs()).fold(0.0, f64::max);
        let mn = d.iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min);
        mx / mn
    }
}

/// Starting iterate of each linear solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum InitialGuess {
    Previous,
    Zero,
    Random(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    pub max_iterations: usize,
    /// `max_n ||(u^n - u^{n-1})/dt - L u^n - f^n||_inf / max(1, ||f||_inf)`.
    pub residual: f64,
    pub diagonal_spread: f64,
}

/// Implicit Euler with zero Dirichlet data on both strip ends and zero initial value.
pub fn solve_homogeneous(f: &Array3<f64>, op: &StripOperator, guess: InitialGuess) -> Result<(Array3<f64>, SolveStats)> {
    let g = op.grid;
    if f.shape() != g.shape() {
        return Err(MrError::DimensionMismatch { expected: g.shape().iter().product(), got: f.len() });
    }
    let (n1, n2, dt) = (g.n1, g.n2, g.dt());
    let ni = (n1 - 1) * n2;
    let mut u = Array3::<f64>::zeros(g.shape());
    let mut x = vec![0.0; ni];
    let mut max_it = 0;
    for n in 1..=g.nt {
        let prev = u.slice(s![n - 1, 1..n1, ..]);
        let rhs: Vec<f64> = prev.iter().zip(f.slice(s![n, 1..n1, ..]).iter()).map(|(a, b)| a + dt * b).collect();
        match guess {
            InitialGuess::Previous => {}
            InitialGuess::Zero => x.iter_mut().for_each(|v| *v = 0.0),
            InitialGuess::Random(seed) => {
                let mut rng = member_rng(seed, n);
                x.iter_mut().for_each(|v| *v = rng.gen_range(-1.0..1.0));
            }
        }
        max_it = max_it.max(bicgstab(&op.system, &op.dinv, &rhs, &mut x)?);
        for (dst, v) in u.slice_mut(s![n, 1..n1, ..]).iter_mut().zip(&x) {
            *dst = *v;
        }
    }
    let residual = discrete_residual(&u, f, op);
    let scale = f.iter().map(|v| v.abs()).fold(1.0, f64::max);
    Ok((u, SolveStats { max_iterations: max_it, residual: residual / scale, diagonal_spread: op.diagonal_spread() }))
}

/// `r^n = (u^n - u^{n-1})/dt - L u^n - f^n` on interior nodes, `r^0 = 0`.
fn residual_field(u: &Array3<f64>, f: &Array3<f64>, op: &StripOperator) -> Array3<f64> {
    let g = op.grid;
    let mut r = Array3::<f64>::zeros(g.shape());
    for n in 1..=g.nt {
        let lu = op.apply(&u.slice(s![n, .., ..]).to_owned());
        for i in 1..g.n1 {
            for k in 0..g.n2 {
                r[[n, i, k]] = (u[[n, i, k]] - u[[n - 1, i, k]]) / g.dt() - lu[[i, k]] - f[[n, i, k]];
            }
        }
    }
    r
}

fn discrete_residual(u: &Array3<f64>, f: &Array3<f64>, op: &StripOperator) -> f64 {
    residual_field(u, f, op).iter().map(|v| v.abs()).fold(0.0, f64::max)
}

/// Space-time function `(t, y1, y2) -> value`.
pub type Forcing = Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;
type Boundary = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Heat data in straightened coordinates: `forcing(t, y1, y2)` and `boundary(t, y2)`.
#[derive(Clone)]
pub struct HeatData {
    pub forcing: Forcing,
    pub boundary: Boundary,
}

impl std::fmt::Debug for HeatData {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "HeatData")
    }
}

impl HeatData {
    pub fn new<F, G>(forcing: F, boundary: G) -> HeatData
    where
        F: Fn(f64, f64, f64) -> f64 + Send + Sync + 'static,
        G: Fn(f64, f64) -> f64 + Send + Sync + 'static,
    {
        HeatData { forcing: Arc::new(forcing), boundary: Arc::new(boundary) }
    }

    pub fn zero() -> HeatData {
        HeatData::new(|_, _, _| 0.0, |_, _| 0.0)
    }

    pub fn scaled(&self, c: f64) -> HeatData {
        let (f, g) = (self.forcing.clone(), self.boundary.clone());
        HeatData::new(move |t, a, b| c * f(t, a, b), move |t, b| c * g(t, b))
    }

    pub fn plus(&self, other: &HeatData) -> HeatData {
        let (f1, g1, f2, g2) = (self.forcing.clone(), self.boundary.clone(), other.forcing.clone(), other.boundary.clone());
        HeatData::new(move |t, a, b| f1(t, a, b) + f2(t, a, b), move |t, b| g1(t, b) + g2(t, b))
    }

    /// Random admissible data: forcing packets inside the strip and boundary data
    /// `(t/T) sum_{|k| <= 1} c_k e^{i k pi y2 / L}` (real part), vanishing at `t = 0`.
    pub fn random(seed: u64, index: usize, depth: f64, l2: f64, horizon: f64) -> HeatData {
        let mut rng = member_rng(seed, index);
        let packets: Vec<[f64; 6]> = (0..2)
            .map(|_| {
                [
                    0.5 + rng.gen::<f64>(),
                    depth * (0.15 + 0.25 * rng.gen::<f64>()),
                    l2 * (rng.gen::<f64>() - 0.5),
                    0.5 + 0.3 * rng.gen::<f64>(),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(0.5..2.0),
                ]
            })
            .collect();
        let coeffs: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let w = std::f64::consts::PI / l2;
        HeatData::new(
            move |t, y1, y2| {
                packets
                    .iter()
                    .map(|p| {
                        let r2 = ((y1 - p[1]) / p[3]).powi(2) + ((y2 - p[2]) / p[3]).powi(2);
                        p[0] * (-r2).exp() * (p[4] * t / horizon + (p[5] * t).sin())
                    })
                    .sum()
            },
            move |t, y2| t / horizon * (coeffs[0] + coeffs[1] * (w * y2).cos() + coeffs[2] * (w * y2).sin()),
        )
    }
}

/// Manufactured flat-strip solution `u*(t, y) = t S(y)` with
/// `S = cos(pi y1 / (2Y)) (1 + cos(pi y2 / L) / 2)`; implicit Euler is exact in time for it.
pub fn manufactured_strip(depth: f64, l2: f64) -> (HeatData, Forcing) {
    let (a, b) = (std::f64::consts::PI / (2.0 * depth), std::f64::consts::PI / l2);
    let s = move |y1: f64, y2: f64| (a * y1).cos() * (1.0 + 0.5 * (b * y2).cos());
    let lap = move |y1: f64, y2: f64| -a * a * s(y1, y2) - b * b * 0.5 * (a * y1).cos() * (b * y2).cos();
    let exact = Arc::new(move |t: f64, y1: f64, y2: f64| t * s(y1, y2));
    let data = HeatData::new(move |t, y1, y2| s(y1, y2) - t * lap(y1, y2), move |t, y2| t * s(0.0, y2));
    (data, exact)
}

/// Inhomogeneous problem with admissibility checks.
#[derive(Debug, Clone)]
pub struct HeatProblem {
    pub map: PullbackMap,
    pub grid: StripGrid,
    pub params: ParamSet,
    pub data: HeatData,
    /// Tangential LP depth used by the boundary extension.
    pub ext_levels: usize,
}

impl HeatProblem {
    pub fn new(map: PullbackMap, grid: StripGrid, params: ParamSet, data: HeatData, ext_levels: usize) -> Result<HeatProblem> {
        grid.validate()?;
        params.check_invariants()?;
        let params = params.heat_normalised();
        if grid.n2 < 4 || !grid.n2.is_power_of_two() {
            return Err(MrError::InvalidParameter(format!("n2 = {} must be a power of two >= 4", grid.n2)));
        }
        if compatibility_mode(&params) == CompatibilityMode::Critical {
            return Err(MrError::CriticalCompatibility);
        }
        validate_heat_theorem(&params).into_result()?;
        let p = HeatProblem { map, grid, params, data, ext_levels };
        if compatibility_mode(&params) == CompatibilityMode::RequireGZeroAtZero {
            let g0 = p.grid.nodes2().iter().map(|&y| (p.data.boundary)(0.0, y).abs()).fold(0.0, f64::max);
            if g0 >= 1e-10 {
                return Err(MrError::SideCondition(format!("g(0) must vanish, sup |g(0)| = {g0:.3e}")));
            }
        }
        Ok(p)
    }

    pub fn with_grid(&self, grid: StripGrid) -> Result<HeatProblem> {
        HeatProblem::new(self.map.clone(), grid, self.params, self.data.clone(), self.ext_levels)
    }

    fn sample_forcing(&self) -> Array3<f64> {
        let (t, y1, y2) = (self.grid.times(), self.grid.nodes1(), self.grid.nodes2());
        Array3::from_shape_fn(self.grid.shape(), |(n, i, k)| (self.data.forcing)(t[n], y1[i], y2[k]))
    }

    fn sample_boundary(&self) -> Array2<f64> {
        let (t, y2) = (self.grid.times(), self.grid.nodes2());
        Array2::from_shape_fn((self.grid.nt + 1, self.grid.n2), |(n, k)| (self.data.boundary)(t[n], y2[k]))
    }
}

/// Slicewise `E^n = Re ext_0 g(t_n)` on the strip nodes, with `E^0 = 0`.
pub fn boundary_extension(problem: &HeatProblem, g: &Array2<f64>) -> Result<Array3<f64>> {
    let grid = &problem.grid;
    let rho = make_rho(0)?;
    let collar = Collar::for_half_width(grid.depth);
    let y1 = grid.nodes1();
    let lps_t = make_generator(1.0, 2.0, AnisotropyDescriptor::isotropic(1))?.with_n_max(problem.ext_levels);
    let slices: Vec<Array2<f64>> = (1..=grid.nt)
        .into_par_iter()
        .map(|n| {
            let b = GridField::from_data(
                &[grid.l2],
                AnisotropyDescriptor::isotropic(1),
                g.row(n).mapv(|v| C64::new(v, 0.0)).into_dyn(),
            )?;
            lps_t.check_resolution(&b)?;
            let blocks = tangential_blocks(&b, &lps_t)?;
            let e = ext_profile(&blocks, 0, 1.0, &rho, Some(collar), &y1)?;
            Ok(e.mapv(|v| v.re).into_dimensionality::<ndarray::Ix2>().expect("two-dimensional profile"))
        })
        .collect::<Result<_>>()?;
    let mut out = Array3::zeros(grid.shape());
    for (n, sl) in slices.into_iter().enumerate() {
        out.slice_mut(s![n + 1, .., ..]).assign(&sl);
    }
    Ok(out)
}

/// Norms and residuals of one solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MRReport {
    pub f_norm: f64,
    pub g_norm: f64,
    pub u_norm: f64,
    pub trace_residual: f64,
    pub initial_residual: f64,
    pub pde_residual: f64,
    /// `||u||_U / (||f||_F + ||g||_G)`; `None` when both data norms vanish.
    pub ratio: Option<f64>,
    pub solver: SolveStats,
    pub grid: StripGrid,
}

/// Strip derivative `d_1^a d_2^b` of one time slice; second-order differences, one-sided at the ends.
fn strip_derivative(u: &Array2<f64>, grid: &StripGrid, a: usize, b: usize) -> Array2<f64> {
    let y1 = grid.nodes1();
    let n1 = grid.n1;
    let mut v = u.clone();
    for _ in 0..b {
        if grid.n2 < 3 {
            v.fill(0.0);
            continue;
        }
        let h = grid.h2();
        let n2 = grid.n2;
        v = Array2::from_shape_fn(v.raw_dim(), |(i, k)| (v[[i, (k + 1) % n2]] - v[[i, (k + n2 - 1) % n2]]) / (2.0 * h));
    }
    for _ in 0..a {
        let w = v.clone();
        for k in 0..grid.n2 {
            for i in 0..=n1 {
                let (i0, i1, i2) = if i == 0 { (0, 1, 2) } else if i == n1 { (n1 - 2, n1 - 1, n1) } else { (i - 1, i, i + 1) };
                let (x0, x1, x2) = (y1[i0], y1[i1], y1[i2]);
                let x = y1[i];
                // derivative of the quadratic interpolant through three nodes
                let l0 = (2.0 * x - x1 - x2) / ((x0 - x1) * (x0 - x2));
                let l1 = (2.0 * x - x0 - x2) / ((x1 - x0) * (x1 - x2));
                let l2 = (2.0 * x - x0 - x1) / ((x2 - x0) * (x2 - x1));
                v[[i, k]] = l0 * w[[i0, k]] + l1 * w[[i1, k]] + l2 * w[[i2, k]];
            }
        }
    }
    v
}

/// `||u||_{L^q(t^mu; W^{k,p}(y_1^w))}` on the strip.
fn strip_norm(u: &Array3<f64>, grid: &StripGrid, k: usize, p: f64, q: f64, w: f64, mu: f64) -> Result<f64> {
    let m1 = nonuniform_measures(&grid.nodes1(), 0.0, grid.depth, Some(w))?;
    let m2 = vec![grid.h2(); grid.n2];
    let mt = nonuniform_measures(&grid.times(), 0.0, grid.horizon, Some(mu))?;
    let shape = [grid.n1 + 1, grid.n2, grid.nt + 1];
    let mut total = 0.0;
    for a in 0..=k {
        for b in 0..=k - a {
            let mut vals = vec![0.0; shape.iter().product()];
            for n in 0..=grid.nt {
                let d = strip_derivative(&u.slice(s![n, .., ..]).to_owned(), grid, a, b);
                for ((i, kk), v) in d.indexed_iter() {
                    vals[(i * grid.n2 + kk) * (grid.nt + 1) + n] = v.abs();
                }
            }
            total += mixed_norm_raw(&vals, &shape, &[m1.clone(), m2.clone(), mt.clone()], &[2, 1], &[p, q]);
        }
    }
    Ok(total)
}

/// Boundary data on the periodic box `[y2] x [-2^j T, 2^j T)`: zero for `t < 0`, reflected at `T`.
fn extended_boundary(g: &Array2<f64>, grid: &StripGrid) -> Result<GridField> {
    let nt = grid.nt;
    let ntb = (4 * nt).next_power_of_two();
    let dt = grid.dt();
    let half = 0.5 * ntb as f64 * dt;
    let desc = AnisotropyDescriptor::new(vec![(1, 1.0), (1, 1.0)])?;
    let data = ndarray::Array2::from_shape_fn((grid.n2, ntb), |(k, j)| {
        let m = j as i64 - (ntb / 2) as i64;
        let idx = if m < 0 {
            None
        } else if m as usize <= nt {
            Some(m as usize)
        } else if (m as usize) <= 2 * nt {
            Some(2 * nt - m as usize)
        } else {
            None
        };
        C64::new(idx.map(|n| g[[n, k]]).unwrap_or(0.0), 0.0)
    });
    GridField::from_data(&[grid.l2, half], desc, data.into_dyn())
}

/// `u = u~ + E` and the maximal-regularity report.
pub fn solve_inhomogeneous(problem: &HeatProblem) -> Result<(Array3<f64>, MRReport)> {
    solve_inhomogeneous_with(problem, InitialGuess::Previous)
}

pub fn solve_inhomogeneous_with(problem: &HeatProblem, guess: InitialGuess) -> Result<(Array3<f64>, MRReport)> {
    let grid = problem.grid;
    let op = StripOperator::new(&problem.map, &grid)?;
    let f = problem.sample_forcing();
    let g = problem.sample_boundary();
    let e = boundary_extension(problem, &g)?;
    let dt = grid.dt();
    let mut ft = f.clone();
    for n in 1..=grid.nt {
        let le = op.apply(&e.slice(s![n, .., ..]).to_owned());
        for i in 1..grid.n1 {
            for k in 0..grid.n2 {
                ft[[n, i, k]] -= (e[[n, i, k]] - e[[n - 1, i, k]]) / dt - le[[i, k]];
            }
        }
    }
    let (ut, stats) = solve_homogeneous(&ft, &op, guess)?;
    let u = ut + &e;

    let ps = problem.params;
    let w = ps.gamma + ps.k as f64 * ps.p;
    let k = ps.k as usize;
    let f_norm = strip_norm(&f, &grid, k, ps.p, ps.q, w, ps.mu)?;
    let mut du = Array3::<f64>::zeros(u.raw_dim());
    for n in 0..=grid.nt {
        let (a, b) = if n == 0 { (1, 0) } else { (n, n - 1) };
        let d = (&u.slice(s![a, .., ..]) - &u.slice(s![b, .., ..])) / dt;
        du.slice_mut(s![n, .., ..]).assign(&d);
    }
    let u_norm = strip_norm(&u, &grid, k, ps.p, ps.q, w, ps.mu)?
        + strip_norm(&du, &grid, k, ps.p, ps.q, w, ps.mu)?
        + strip_norm(&u, &grid, k + 2, ps.p, ps.q, w, ps.mu)?;
    let orders = ParamSet { ell: 1, k1: 2, m: 0, ..ps };
    let (st, sx) = trace_space_orders(&orders, 0)?;
    let g_norm = trace_space_norm(&extended_boundary(&g, &grid)?, st, sx, ps.p, ps.q, ps.mu)?;

    let trace = u.slice(s![.., 0, ..]);
    let row_norm = |a: ndarray::ArrayView1<f64>| a.iter().map(|v| v * v).sum::<f64>().sqrt();
    let gmax = g.rows().into_iter().map(row_norm).fold(0.0, f64::max);
    let tmax = (0..=grid.nt).map(|n| row_norm((&trace.row(n) - &g.row(n)).view())).fold(0.0, f64::max);
    let trace_residual = if gmax > 0.0 { tmax / gmax } else { tmax };
    let initial_residual = u.slice(s![0, .., ..]).iter().map(|v| v.abs()).fold(0.0, f64::max);
    let pde_residual = strip_norm(&residual_field(&u, &f, &op), &grid, k, ps.p, ps.q, w, ps.mu)?;
    let denom = f_norm + g_norm;
    let ratio = if denom > 0.0 { Some(u_norm / denom) } else { None };
    Ok((u, MRReport { f_norm, g_norm, u_norm, trace_residual, initial_residual, pde_residual, ratio, solver: stats, grid }))
}

/// Ratios `C[level][member]` with per-level brackets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyTable {
    pub ratios: Vec<Vec<Option<f64>>>,
    pub brackets: Vec<Bracket>,
    /// Largest `max/min` over levels.
    pub spread: f64,
    /// Largest level-to-level bracket drift.
    pub drift: f64,
}

pub fn mr_stability_study(base: &HeatProblem, family: &[HeatData], levels: usize) -> Result<StudyTable> {
    if family.is_empty() || levels == 0 {
        return Err(MrError::DegenerateFamily("empty study".into()));
    }
    let mut grid = base.grid;
    let mut ratios = Vec::with_capacity(levels);
    let mut brackets: Vec<Bracket> = Vec::with_capacity(levels);
    for _ in 0..levels {
        let row: Vec<Option<f64>> = family
            .par_iter()
            .map(|d| {
                let p = HeatProblem::new(base.map.clone(), grid, base.params, d.clone(), base.ext_levels)?;
                Ok(solve_inhomogeneous(&p)?.1.ratio)
            })
            .collect::<Result<_>>()?;
        let vals: Vec<f64> = row.iter().flatten().copied().collect();
        brackets.push(Bracket::from_ratios(&vals)?);
        ratios.push(row);
        grid = grid.refined();
    }
    let spread = brackets.iter().map(|b| b.spread()).fold(1.0, f64::max);
    let drift = brackets.windows(2).map(|w| w[1].drift_from(&w[0])).fold(1.0, f64::max);
    Ok(StudyTable { ratios, brackets, spread, drift })
}
