//! Planar graph domains `x_1 > h(x_2)`, the mollified-graph pullback onto the half-plane,
//! chart atlases over a periodic tangential box, directional traces along the pulled-back
//! normal field, and the domain trace / extension pair.
//!
//! All charts of a graph domain share one global pullback, so chart transitions are the
//! identity in the straightened coordinates and every chart lives on the same grid.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{MrError, Result};
use crate::families::member_rng;
use crate::grid::{BoundaryField, GridField, TraceVector, C64};
use crate::lp::{psi, psi_derivative, AnisotropyDescriptor, LpSequence};
use crate::quadrature::{AxisWeight, WeightSpec};
use crate::spaces::{besov_tl_norm, multi_indices, Bracket, LpKind};
use crate::traceext::{ext_vector, make_rho, Collar, NormalAxis};

const DENSE_SAMPLES: usize = 2048;
const KERNEL_PANELS: usize = 8;

/// Analytic boundary profiles; all are compactly supported in `[-radius, radius]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BoundaryPreset {
    Flat,
    GaussianBump { amplitude: f64, sigma: f64, radius: f64 },
    ConeSmoothed { amplitude: f64, radius: f64, tip: f64 },
    /// Sum over `levels` dyadic scales of signed bumps with amplitude `2^{-l(1+kappa)}`.
    RoughC1Kappa { amplitude: f64, kappa: f64, levels: u32, radius: f64 },
    /// `slope * x` on `|x| <= 0.6 radius`, cut off smoothly.
    Linear { slope: f64, radius: f64 },
}

/// Smooth cutoff equal to one on `|x| <= 0.6 r` and zero for `|x| >= r`.
fn cut(x: f64, r: f64) -> (f64, f64) {
    let t = (x.abs() / r - 0.6) / 0.4;
    (psi(t), psi_derivative(t) * x.signum() / (0.4 * r))
}

/// `B(z) = exp(1 - 1/(1 - z^2))` and its derivative.
fn unit_bump(z: f64) -> (f64, f64) {
    if z.abs() >= 1.0 {
        return (0.0, 0.0);
    }
    let s = 1.0 - z * z;
    let b = (1.0 - 1.0 / s).exp();
    (b, -2.0 * z / (s * s) * b)
}

impl BoundaryPreset {
    pub fn radius(&self) -> f64 {
        match *self {
            BoundaryPreset::Flat => 0.0,
            BoundaryPreset::GaussianBump { radius, .. }
            | BoundaryPreset::ConeSmoothed { radius, .. }
            | BoundaryPreset::RoughC1Kappa { radius, .. }
            | BoundaryPreset::Linear { radius, .. } => radius,
        }
    }

    /// Declared Hölder exponent of `h'`.
    pub fn kappa(&self) -> f64 {
        match *self {
            BoundaryPreset::RoughC1Kappa { kappa, .. } => kappa,
            _ => 1.0,
        }
    }

    /// `(h(x), h'(x))`.
    pub fn eval(&self, x: f64) -> (f64, f64) {
        match *self {
            BoundaryPreset::Flat => (0.0, 0.0),
            BoundaryPreset::GaussianBump { amplitude, sigma, radius } => {
                let (c, dc) = cut(x, radius);
                let g = amplitude * (-0.5 * x * x / (sigma * sigma)).exp();
                (g * c, -x / (sigma * sigma) * g * c + g * dc)
            }
            BoundaryPreset::ConeSmoothed { amplitude, radius, tip } => {
                let (c, dc) = cut(x, radius);
                let s = (x * x + tip * tip).sqrt();
                let k = amplitude * (1.0 - s / radius);
                (k * c, -amplitude * x / (radius * s) * c + k * dc)
            }
            BoundaryPreset::RoughC1Kappa { amplitude, kappa, levels, radius } => {
                let (c, dc) = cut(x, radius);
                let w = 0.5 * radius;
                let (mut v, mut dv) = (0.0, 0.0);
                for l in 0..levels {
                    let scale = 2f64.powi(l as i32);
                    let amp = amplitude * scale.powf(-(1.0 + kappa));
                    let u = scale * x / w;
                    for i in (u.floor() as i64 - 1)..=(u.ceil() as i64 + 1) {
                        let sign = if (l as i64 * 7 + i * 3).rem_euclid(2) == 0 { 1.0 } else { -1.0 };
                        let (b, db) = unit_bump(u - i as f64);
                        v += sign * amp * b;
                        dv += sign * amp * db * scale / w;
                    }
                }
                (v * c, dv * c + v * dc)
            }
            BoundaryPreset::Linear { slope, radius } => {
                let (c, dc) = cut(x, radius);
                (slope * x * c, slope * c + slope * x * dc)
            }
        }
    }
}

/// Region `{x_1 > h(x_2)}` with sampled seminorms of the boundary function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecialDomain {
    pub preset: BoundaryPreset,
    pub r: u32,
    pub kappa: f64,
    /// `[h]_1 = sup |h'|`.
    pub lipschitz: f64,
    /// Declared `kappa`-Hölder seminorm of `h'`.
    pub holder: f64,
}

fn holder_estimate(preset: &BoundaryPreset, kappa: f64, samples: usize) -> f64 {
    let r = preset.radius();
    if r == 0.0 {
        return 0.0;
    }
    let xs: Vec<f64> = (0..samples).map(|i| -r + 2.0 * r * i as f64 / (samples - 1) as f64).collect();
    let d: Vec<f64> = xs.iter().map(|&x| preset.eval(x).1).collect();
    (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut best = 0.0f64;
            for j in i + 1..samples {
                best = best.max((d[i] - d[j]).abs() / (xs[j] - xs[i]).powf(kappa));
            }
            best
        })
        .reduce(|| 0.0, f64::max)
}

impl SpecialDomain {
    pub fn new(preset: BoundaryPreset) -> Result<SpecialDomain> {
        let r = preset.radius();
        if r < 0.0 || !r.is_finite() {
            return Err(MrError::InvalidParameter(format!("support radius {r}")));
        }
        let kappa = preset.kappa();
        if !(kappa > 0.0 && kappa <= 1.0) {
            return Err(MrError::InvalidParameter(format!("kappa = {kappa} outside (0, 1]")));
        }
        let lipschitz = if r == 0.0 {
            0.0
        } else {
            (0..=4 * DENSE_SAMPLES)
                .map(|i| preset.eval(-r + 2.0 * r * i as f64 / (4 * DENSE_SAMPLES) as f64).1.abs())
                .fold(0.0, f64::max)
        };
        let holder = holder_estimate(&preset, kappa, DENSE_SAMPLES);
        Ok(SpecialDomain { preset, r: 1, kappa, lipschitz, holder })
    }

    pub fn flat() -> SpecialDomain {
        SpecialDomain::new(BoundaryPreset::Flat).expect("flat preset")
    }

    pub fn h(&self, s: f64) -> f64 {
        self.preset.eval(s).0
    }

    pub fn dh(&self, s: f64) -> f64 {
        self.preset.eval(s).1
    }

    pub fn support_radius(&self) -> f64 {
        self.preset.radius()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x[0] > self.h(x[1])
    }

    /// Unit inner normal at the boundary point `(h(s), s)`.
    pub fn inner_normal(&self, s: f64) -> [f64; 2] {
        let d = self.dh(s);
        let n = (1.0 + d * d).sqrt();
        [1.0 / n, -d / n]
    }

    /// Hölder seminorm of `h'` on `samples` points; should not exceed `1.1 * holder`.
    pub fn sampled_holder(&self, samples: usize) -> f64 {
        holder_estimate(&self.preset, self.kappa, samples.max(2))
    }
}

/// Distance from `x` in the closed domain to the boundary graph.
pub fn distance_to_boundary(x: &[f64], dom: &SpecialDomain) -> Result<f64> {
    let gap = x[0] - dom.h(x[1]);
    if gap < -1e-12 {
        return Err(MrError::OutsideDomain(x[0], x[1]));
    }
    if gap <= 0.0 {
        return Ok(0.0);
    }
    let d2 = |s: f64| (x[0] - dom.h(s)).powi(2) + (x[1] - s).powi(2);
    let k = 512;
    let step = gap / k as f64;
    let mut best = (x[1], d2(x[1]));
    for i in 1..=k {
        for s in [x[1] - i as f64 * step, x[1] + i as f64 * step] {
            let v = d2(s);
            if v < best.1 {
                best = (s, v);
            }
        }
    }
    // golden-section polish around the best sample
    let (mut a, mut b) = (best.0 - step, best.0 + step);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut c, mut d) = (b - g * (b - a), a + g * (b - a));
    let (mut fc, mut fd) = (d2(c), d2(d));
    for _ in 0..80 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = d2(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = d2(d);
        }
    }
    Ok(best.1.min(fc).min(fd).sqrt())
}

/// `Phi^{-1}(y) = (y_1 + (K_{eps y_1} * h)(y_2), y_2)` and its inverse.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PullbackMap {
    pub domain: SpecialDomain,
    pub eps: f64,
    #[serde(skip)]
    kernel: Vec<(f64, f64)>,
}

/// Even probability kernel `K` on `[-1, 1]` as quadrature pairs `(z, w K(z))`.
fn kernel_nodes() -> Vec<(f64, f64)> {
    let (x, w) = gl10();
    let h = 2.0 / KERNEL_PANELS as f64;
    let mut out = Vec::with_capacity(10 * KERNEL_PANELS);
    for p in 0..KERNEL_PANELS {
        let c = -1.0 + (p as f64 + 0.5) * h;
        for i in 0..10 {
            let z = c + 0.5 * h * x[i];
            out.push((z, 0.5 * h * w[i] * unit_bump(z).0));
        }
    }
    let total: f64 = out.iter().map(|p| p.1).sum();
    out.iter_mut().for_each(|p| p.1 /= total);
    out
}

fn gl10() -> ([f64; 10], [f64; 10]) {
    let x = [0.148_874_338_981_631_2, 0.433_395_394_129_247_2, 0.679_409_568_299_024_4, 0.865_063_366_688_984_5, 0.973_906_528_517_171_7];
    let w = [0.295_524_224_714_752_9, 0.269_266_719_309_996_4, 0.219_086_362_515_982, 0.149_451_349_150_580_6, 0.066_671_344_308_688_1];
    let mut n = [0.0; 10];
    let mut ww = [0.0; 10];
    for i in 0..5 {
        n[4 - i] = -x[i];
        ww[4 - i] = w[i];
        n[5 + i] = x[i];
        ww[5 + i] = w[i];
    }
    (n, ww)
}

/// Contract measurements of a pullback on a sample cloud.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PullbackReport {
    pub round_trip: f64,
    pub boundary: f64,
    pub min_dy1: f64,
}

impl PullbackMap {
    /// `(K_t * h)(s)`, `d/dt` and `d/ds` of it.
    fn mollified(&self, t: f64, s: f64) -> (f64, f64, f64) {
        if self.domain.support_radius() == 0.0 {
            return (0.0, 0.0, 0.0);
        }
        if t == 0.0 {
            let (h, dh) = self.domain.preset.eval(s);
            return (h, 0.0, dh);
        }
        let (mut v, mut vt, mut vs) = (0.0, 0.0, 0.0);
        for &(z, w) in &self.kernel {
            let (h, dh) = self.domain.preset.eval(s - t * z);
            v += w * h;
            vt -= w * z * dh;
            vs += w * dh;
        }
        (v, vt, vs)
    }

    pub fn inverse(&self, y: &[f64]) -> [f64; 2] {
        [y[0] + self.mollified(self.eps * y[0], y[1]).0, y[1]]
    }

    /// `D Phi^{-1}(y)` as `[[a, b], [0, 1]]`, returned as `(a, b)`.
    pub fn jacobian_inverse(&self, y: &[f64]) -> (f64, f64) {
        let (_, vt, vs) = self.mollified(self.eps * y[0], y[1]);
        (1.0 + self.eps * vt, vs)
    }

    /// `Phi(x)` by Newton iteration on the first component.
    pub fn forward(&self, x: &[f64]) -> Result<[f64; 2]> {
        let mut y1 = x[0] - self.domain.h(x[1]);
        for _ in 0..60 {
            let (v, vt, _) = self.mollified(self.eps * y1, x[1]);
            let f = y1 + v - x[0];
            let df = 1.0 + self.eps * vt;
            if df <= 0.0 {
                return Err(MrError::Bijectivity(format!("d/dy1 = {df} at x = ({}, {})", x[0], x[1])));
            }
            let step = f / df;
            y1 -= step;
            if step.abs() <= 1e-15 * (1.0 + y1.abs()) {
                break;
            }
        }
        Ok([y1, x[1]])
    }

    /// `D Phi(x)` as `[[1/a, -b/a], [0, 1]]`, returned as `(1/a, -b/a)`.
    pub fn jacobian(&self, x: &[f64]) -> Result<(f64, f64)> {
        let y = self.forward(x)?;
        let (a, b) = self.jacobian_inverse(&y);
        Ok((1.0 / a, -b / a))
    }

    /// Round-trip, boundary-to-boundary and monotonicity measurements on `points`.
    pub fn check_contract(&self, points: &[[f64; 2]]) -> Result<PullbackReport> {
        let r: Vec<(f64, f64, f64)> = points
            .par_iter()
            .map(|y| {
                let x = self.inverse(y);
                let back = self.forward(&x)?;
                let rt = ((back[0] - y[0]).powi(2) + (back[1] - y[1]).powi(2)).sqrt();
                let bd = self.forward(&[self.domain.h(y[1]), y[1]])?[0].abs();
                Ok((rt, bd, self.jacobian_inverse(y).0))
            })
            .collect::<Result<_>>()?;
        Ok(PullbackReport {
            round_trip: r.iter().map(|v| v.0).fold(0.0, f64::max),
            boundary: r.iter().map(|v| v.1).fold(0.0, f64::max),
            min_dy1: r.iter().map(|v| v.2).fold(f64::INFINITY, f64::min),
        })
    }
}

/// Seeded points with `y_1 in (0, y1_max]` (log-uniform) and `y_2` across the support.
pub fn sample_cloud(dom: &SpecialDomain, count: usize, y1_max: f64, seed: u64) -> Vec<[f64; 2]> {
    let mut rng = member_rng(seed, 0);
    let span = dom.support_radius() + 2.0;
    (0..count)
        .map(|_| {
            let y1 = y1_max * 2f64.powf(-12.0 * rng.gen::<f64>());
            [y1, span * (2.0 * rng.gen::<f64>() - 1.0)]
        })
        .collect()
}

/// Default scale `0.25 / (1 + [h]_1)`.
pub fn default_eps(dom: &SpecialDomain) -> f64 {
    0.25 / (1.0 + dom.lipschitz)
}

pub fn make_dks_pullback(dom: &SpecialDomain, eps: Option<f64>) -> Result<PullbackMap> {
    let eps = eps.unwrap_or_else(|| default_eps(dom));
    if !(eps > 0.0) {
        return Err(MrError::InvalidParameter(format!("eps = {eps}")));
    }
    let map = PullbackMap { domain: dom.clone(), eps, kernel: kernel_nodes() };
    let span = dom.support_radius() + 1.0;
    let mut worst = f64::INFINITY;
    for i in 0..=24 {
        let y1 = if i == 0 { 0.0 } else { 2f64.powf(i as f64 * 0.5 - 8.0) };
        for k in 0..=200 {
            let y2 = -span + 2.0 * span * k as f64 / 200.0;
            worst = worst.min(map.jacobian_inverse(&[y1, y2]).0);
        }
    }
    if worst < 0.5 {
        return Err(MrError::Bijectivity(format!("d/dy1 of Phi^-1 drops to {worst:.3} < 1/2; reduce eps")));
    }
    Ok(map)
}

/// `dist(Phi^{-1}(y), boundary) / y_1` over `y_2` samples at each height `2^{-level}`.
pub fn distance_brackets(map: &PullbackMap, levels: std::ops::RangeInclusive<i32>, samples: usize) -> Result<Vec<Bracket>> {
    let span = map.domain.support_radius() + 1.0;
    levels
        .map(|i| {
            let y1 = 2f64.powi(-i);
            let ratios: Vec<f64> = (0..samples)
                .into_par_iter()
                .map(|k| {
                    let y2 = -span + 2.0 * span * k as f64 / (samples - 1).max(1) as f64;
                    Ok(distance_to_boundary(&map.inverse(&[y1, y2]), &map.domain)? / y1)
                })
                .collect::<Result<_>>()?;
            Bracket::from_ratios(&ratios)
        })
        .collect()
}

/// Largest factor between consecutive brackets (both ends).
pub fn level_drift(brackets: &[Bracket]) -> f64 {
    brackets
        .windows(2)
        .map(|w| {
            let r = |a: f64, b: f64| (a / b).max(b / a);
            r(w[0].min, w[1].min).max(r(w[0].max, w[1].max))
        })
        .fold(1.0, f64::max)
}

/// Chart grid: normal axis `y_1` and periodic tangential axis `y_2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometryGrid {
    pub n1: usize,
    pub l1: f64,
    pub n2: usize,
    pub l2: f64,
}

impl Default for GeometryGrid {
    fn default() -> Self {
        GeometryGrid { n1: 512, l1: 10.0, n2: 256, l2: 8.0 }
    }
}

impl GeometryGrid {
    pub fn desc(&self) -> AnisotropyDescriptor {
        AnisotropyDescriptor::isotropic(1).prepend(1, 1.0)
    }

    pub fn normal_axis(&self) -> NormalAxis {
        NormalAxis::new(self.n1, self.l1)
    }

    pub fn collar(&self) -> Collar {
        Collar::for_half_width(self.l1)
    }

    pub fn field<F: Fn(&[f64]) -> C64>(&self, f: F) -> Result<GridField> {
        GridField::from_fn(&[self.n1, self.n2], &[self.l1, self.l2], self.desc(), f)
    }

    pub fn boundary<F: Fn(&[f64]) -> C64>(&self, f: F) -> Result<BoundaryField> {
        GridField::from_fn(&[self.n2], &[self.l2], AnisotropyDescriptor::isotropic(1), f)
    }

    pub fn tangential_coords(&self) -> Vec<f64> {
        crate::grid::axis_coords(self.n2, self.l2)
    }
}

pub type PointFn = Arc<dyn Fn(&[f64]) -> C64 + Send + Sync>;

/// A function on the domain: either a closure defined near the closure of the domain, or
/// its pullback `u o Phi^{-1}` already sampled on a chart grid.
#[derive(Clone)]
pub enum DomainField {
    Analytic(PointFn),
    Pulled { eps: f64, field: GridField },
}

impl fmt::Debug for DomainField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DomainField::Analytic(_) => write!(f, "DomainField::Analytic"),
            DomainField::Pulled { eps, field } => write!(f, "DomainField::Pulled {{ eps: {eps}, n: {:?} }}", field.n),
        }
    }
}

impl DomainField {
    pub fn analytic<F: Fn(&[f64]) -> C64 + Send + Sync + 'static>(f: F) -> DomainField {
        DomainField::Analytic(Arc::new(f))
    }
}

/// `Phi_* f = f o Phi^{-1}` on the chart grid.
pub fn pushforward(f: &DomainField, map: &PullbackMap, grid: &GeometryGrid) -> Result<GridField> {
    match f {
        DomainField::Analytic(u) => {
            let y1 = crate::grid::axis_coords(grid.n1, grid.l1);
            let y2 = grid.tangential_coords();
            let rows: Vec<Vec<C64>> = y1
                .par_iter()
                .map(|&a| y2.iter().map(|&b| u(&map.inverse(&[a, b]))).collect())
                .collect();
            let mut g = grid.field(|_| C64::new(0.0, 0.0))?;
            for (i, row) in rows.into_iter().enumerate() {
                for (k, v) in row.into_iter().enumerate() {
                    g.data[[i, k]] = v;
                }
            }
            Ok(g)
        }
        DomainField::Pulled { eps, field } => {
            let expect = grid.field(|_| C64::new(0.0, 0.0))?;
            if (eps - map.eps).abs() > 1e-15 || !expect.same_grid(field) {
                return Err(MrError::DescriptorMismatch("pulled field belongs to another chart grid".into()));
            }
            Ok(field.clone())
        }
    }
}

/// Two components of a vector field on a chart grid.
pub type VectorField = [GridField; 2];

/// `N(y)` at one point, without the collar.
pub fn pulled_normal_at(map: &PullbackMap, y: &[f64]) -> [f64; 2] {
    let (a, b) = map.jacobian_inverse(y);
    let nt = map.domain.inner_normal(y[1]);
    [(nt[0] - b * nt[1]) / a, nt[1]]
}

/// `N(y) = D Phi(Phi^{-1} y) n~(Phi^{-1} y)` with `n~(x) = n(h(x_2), x_2)`, collar-cut in `y_1`
/// to `e_1 + chi(y_1)(N - e_1)` so it is smooth on the periodic grid.
pub fn pulled_vector_field(map: &PullbackMap, grid: &GeometryGrid) -> Result<VectorField> {
    let chi = grid.collar();
    let n1 = grid.field(|y| C64::new(1.0 + chi.value(y[0]) * (pulled_normal_at(map, y)[0] - 1.0), 0.0))?;
    let n2 = grid.field(|y| C64::new(chi.value(y[0]) * pulled_normal_at(map, y)[1], 0.0))?;
    let c = non_tangentiality(&[n1.clone(), n2.clone()])?;
    if !(c > 0.0) {
        return Err(MrError::Tangential(c));
    }
    Ok([n1, n2])
}

/// `min N_1` on the boundary row `y_1 = 0`.
pub fn non_tangentiality(n: &VectorField) -> Result<f64> {
    let row = n[0].restrict(0, n[0].origin_index(0))?;
    Ok(row.data.iter().map(|v| v.re).fold(f64::INFINITY, f64::min))
}

fn n_dot_grad(v: &GridField, n: &VectorField) -> Result<GridField> {
    n[0].mul(&v.derivative(0, 1))?.add(&n[1].mul(&v.derivative(1, 1))?)
}

/// `((N . grad)^j v)|_{y_1 = 0}` for `j = 0..=m`, derivatives spectral and products pointwise.
pub fn directional_trace_n(v: &GridField, n: &VectorField, m: usize) -> Result<TraceVector> {
    v.require_same(&n[0])?;
    let mut w = v.clone();
    let mut entries = Vec::with_capacity(m + 1);
    for j in 0..=m {
        if j > 0 {
            w = n_dot_grad(&w, n)?;
        }
        entries.push(w.restrict(0, w.origin_index(0))?);
    }
    TraceVector::new(entries)
}

/// Lower-triangular matrix of tangential operators with `g = I h`, where `h_a` are the
/// `d_1`-traces and `g_j` the `d_N`-traces: `I_{j,a} = sum_b C^{(j)}_{a,b}(0, .) d_2^b`.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangularChange {
    pub m: usize,
    /// `coeffs[j][a][b]` for `a <= j`, `b <= j - a`.
    coeffs: Vec<Vec<Vec<BoundaryField>>>,
}

pub fn triangular_change_matrix(n: &VectorField, m: usize) -> Result<TriangularChange> {
    let one = n[0].with_data(n[0].data.mapv(|_| C64::new(1.0, 0.0)));
    let zero = one.scale(C64::new(0.0, 0.0));
    // level[a][b] = C^{(j)}_{a,b} on the full grid
    let mut level: Vec<Vec<GridField>> = vec![vec![one]];
    let mut coeffs = Vec::with_capacity(m + 1);
    for j in 0..=m {
        if j > 0 {
            let mut next = Vec::with_capacity(j + 1);
            for a in 0..=j {
                let mut row = Vec::with_capacity(j + 1 - a);
                for b in 0..=j - a {
                    let mut acc = zero.clone();
                    if a + b < j {
                        acc = n_dot_grad(&level[a][b], n)?;
                    }
                    if a >= 1 && b < level[a - 1].len() {
                        acc = acc.add(&n[0].mul(&level[a - 1][b])?)?;
                    }
                    if b >= 1 && a < level.len() && b - 1 < level[a].len() {
                        acc = acc.add(&n[1].mul(&level[a][b - 1])?)?;
                    }
                    row.push(acc);
                }
                next.push(row);
            }
            level = next;
        }
        let restricted: Vec<Vec<BoundaryField>> = level
            .iter()
            .map(|row| row.iter().map(|c| c.restrict(0, c.origin_index(0))).collect::<Result<_>>())
            .collect::<Result<_>>()?;
        coeffs.push(restricted);
    }
    let diag_min = coeffs[m][m][0].data.iter().map(|v| v.norm()).fold(f64::INFINITY, f64::min);
    if m > 0 && !(diag_min > 1e-12) {
        return Err(MrError::Tangential(diag_min));
    }
    Ok(TriangularChange { m, coeffs })
}

impl TriangularChange {
    /// Coefficients of `I_{j,a}` by tangential derivative order; `None` above the diagonal.
    pub fn entry(&self, j: usize, a: usize) -> Option<&[BoundaryField]> {
        if a > j || j > self.m {
            None
        } else {
            Some(&self.coeffs[j][a])
        }
    }

    fn apply_entry(&self, j: usize, a: usize, h: &BoundaryField) -> Result<BoundaryField> {
        let mut acc = h.scale(C64::new(0.0, 0.0));
        for (b, c) in self.coeffs[j][a].iter().enumerate() {
            acc = acc.add(&c.mul(&h.derivative(0, b))?)?;
        }
        Ok(acc)
    }

    pub fn apply(&self, h: &TraceVector) -> Result<TraceVector> {
        if h.order() != self.m {
            return Err(MrError::DimensionMismatch { expected: self.m + 1, got: h.order() + 1 });
        }
        let entries = (0..=self.m)
            .map(|j| {
                let mut acc = self.apply_entry(j, 0, &h.entries[0])?;
                for a in 1..=j {
                    acc = acc.add(&self.apply_entry(j, a, &h.entries[a])?)?;
                }
                Ok(acc)
            })
            .collect::<Result<Vec<_>>>()?;
        TraceVector::new(entries)
    }

    /// Forward substitution for `I h = g`.
    pub fn solve(&self, g: &TraceVector) -> Result<TraceVector> {
        if g.order() != self.m {
            return Err(MrError::DimensionMismatch { expected: self.m + 1, got: g.order() + 1 });
        }
        let mut h: Vec<BoundaryField> = Vec::with_capacity(self.m + 1);
        for j in 0..=self.m {
            let mut r = g.entries[j].clone();
            for (a, ha) in h.iter().enumerate() {
                r = r.sub(&self.apply_entry(j, a, ha)?)?;
            }
            let d = &self.coeffs[j][j][0];
            let data = ndarray::Zip::from(&r.data).and(&d.data).map_collect(|x, y| x / y);
            h.push(r.with_data(data));
        }
        TraceVector::new(h)
    }
}

/// One chart: `eta` lives on the periodic ball `|x_2 - center| < eta_radius` and `zeta`
/// equals one there, vanishing from `zeta_radius` on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Chart {
    pub center: f64,
    pub eta_radius: f64,
    pub zeta_radius: f64,
}

/// Charts over the periodic tangential box, all sharing the domain's pullback.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atlas {
    pub map: PullbackMap,
    pub grid: GeometryGrid,
    pub charts: Vec<Chart>,
}

impl Atlas {
    /// `count` equally spaced charts; `overlap` widens each ball beyond half the spacing.
    pub fn new(map: PullbackMap, grid: GeometryGrid, count: usize, overlap: f64) -> Result<Atlas> {
        if count == 0 {
            return Err(MrError::InvalidParameter("atlas needs at least one chart".into()));
        }
        if count == 1 {
            let c = Chart { center: 0.0, eta_radius: f64::INFINITY, zeta_radius: f64::INFINITY };
            return Ok(Atlas { map, grid, charts: vec![c] });
        }
        let s = 2.0 * grid.l2 / count as f64;
        let eta_radius = (s * (0.5 + overlap)).min(grid.l2);
        let zeta_radius = (eta_radius * 1.25).min(grid.l2);
        let charts = (0..count)
            .map(|n| Chart { center: -grid.l2 + (n as f64 + 0.5) * s, eta_radius, zeta_radius })
            .collect();
        Ok(Atlas { map, grid, charts })
    }

    fn periodic_distance(&self, a: f64, b: f64) -> f64 {
        let p = 2.0 * self.grid.l2;
        let d = (a - b).rem_euclid(p);
        d.min(p - d)
    }

    fn bump(&self, n: usize, s: f64) -> f64 {
        let c = &self.charts[n];
        if c.eta_radius.is_infinite() {
            1.0
        } else {
            psi(self.periodic_distance(s, c.center) / c.eta_radius)
        }
    }

    /// `eta_n(x)^2`; depends on `x_2` only.
    pub fn eta_sq(&self, n: usize, s: f64) -> Result<f64> {
        let total: f64 = (0..self.charts.len()).map(|k| self.bump(k, s).powi(2)).sum();
        if !(total > 1e-300) {
            return Err(MrError::CoverageGap(s));
        }
        Ok(self.bump(n, s).powi(2) / total)
    }

    pub fn zeta(&self, n: usize, s: f64) -> f64 {
        let c = &self.charts[n];
        if c.eta_radius.is_infinite() {
            return 1.0;
        }
        let d = self.periodic_distance(s, c.center);
        if c.zeta_radius <= c.eta_radius {
            if d <= c.eta_radius {
                1.0
            } else {
                0.0
            }
        } else {
            psi((d - c.eta_radius) / (c.zeta_radius - c.eta_radius))
        }
    }

    /// `eta_n^2` sampled on the tangential grid.
    fn eta_sq_row(&self, n: usize) -> Result<Vec<f64>> {
        self.grid.tangential_coords().iter().map(|&s| self.eta_sq(n, s)).collect()
    }

    /// `max |sum_n eta_n^2 - 1|` over the tangential grid.
    pub fn partition_defect(&self) -> Result<f64> {
        let rows: Vec<Vec<f64>> = (0..self.charts.len()).map(|n| self.eta_sq_row(n)).collect::<Result<_>>()?;
        Ok((0..self.grid.n2).map(|k| (rows.iter().map(|r| r[k]).sum::<f64>() - 1.0).abs()).fold(0.0, f64::max))
    }
}

fn scale_rows(f: &GridField, row: &[f64]) -> GridField {
    let mut out = f.clone();
    for mut lane in out.data.lanes_mut(ndarray::Axis(1)) {
        for (v, &w) in lane.iter_mut().zip(row) {
            *v *= w;
        }
    }
    out
}

fn scale_boundary(g: &BoundaryField, row: &[f64]) -> BoundaryField {
    let data = ndarray::Zip::from(&g.data).and(&ndarray::ArrayView1::from(row).into_dyn()).map_collect(|v, &w| v * w);
    g.with_data(data)
}

/// Per-chart and assembled traces of a domain field.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainTrace {
    pub charts: Vec<TraceVector>,
    pub assembled: TraceVector,
}

/// `(d_N^j (Phi_* eta_n^2 u))(0, .)` per chart, and their sum.
pub fn domain_trace(u: &DomainField, atlas: &Atlas, m: usize) -> Result<DomainTrace> {
    let dom = &atlas.map.domain;
    if m as f64 >= dom.r as f64 + dom.kappa {
        return Err(MrError::OrderTooLarge { j: m, m: (dom.r as f64 + dom.kappa).ceil() as usize - 1 });
    }
    let chi = atlas.grid.collar();
    let w = pushforward(u, &atlas.map, &atlas.grid)?;
    let x1 = w.coords(0);
    let mut w = w;
    for (i, mut row) in w.data.outer_iter_mut().enumerate() {
        let c = chi.value(x1[i]);
        row.mapv_inplace(|v| v * c);
    }
    let n = pulled_vector_field(&atlas.map, &atlas.grid)?;
    let charts: Vec<TraceVector> = (0..atlas.charts.len())
        .into_par_iter()
        .map(|k| directional_trace_n(&scale_rows(&w, &atlas.eta_sq_row(k)?), &n, m))
        .collect::<Result<_>>()?;
    let mut acc = charts[0].entries.clone();
    for t in &charts[1..] {
        for (a, e) in acc.iter_mut().zip(&t.entries) {
            *a = a.add(e)?;
        }
    }
    Ok(DomainTrace { charts, assembled: TraceVector::new(acc)? })
}

/// `sum_n ||eta_n^2 g||_{B^s_{p,q}}` with `g` parametrised by `x_2` on the tangential grid.
pub fn boundary_besov_norm(g: &BoundaryField, s: f64, p: f64, q: f64, atlas: &Atlas) -> Result<f64> {
    let lps = LpSequence::default_for(g)?;
    let w = WeightSpec::unweighted(1);
    let mut acc = 0.0;
    for n in 0..atlas.charts.len() {
        let gn = scale_boundary(g, &atlas.eta_sq_row(n)?);
        acc += besov_tl_norm(&gn, s, p, q, &w, &lps, LpKind::Besov)?;
    }
    Ok(acc)
}

/// `u = sum_n zeta_n v_n o Phi` with `v_n = ext(I^{-1}(eta_n^2 g))`; returned in pulled form.
pub fn domain_extension(g: &TraceVector, atlas: &Atlas) -> Result<DomainField> {
    let m = g.order();
    let grid = &atlas.grid;
    let n = pulled_vector_field(&atlas.map, grid)?;
    let tri = triangular_change_matrix(&n, m)?;
    let rho = make_rho(m)?;
    let lps_t = LpSequence::default_for(&g.entries[0])?;
    let normal = grid.normal_axis();
    let parts: Vec<GridField> = (0..atlas.charts.len())
        .into_par_iter()
        .map(|k| {
            let eta = atlas.eta_sq_row(k)?;
            let hk = TraceVector::new(g.entries.iter().map(|e| scale_boundary(e, &eta)).collect())?;
            let v = ext_vector(&tri.solve(&hk)?, 1.0, &lps_t, &rho, &normal)?;
            let zeta: Vec<f64> = grid.tangential_coords().iter().map(|&s| atlas.zeta(k, s)).collect();
            Ok(scale_rows(&v, &zeta))
        })
        .collect::<Result<_>>()?;
    let mut acc = parts[0].clone();
    for p in &parts[1..] {
        acc = acc.add(p)?;
    }
    acc.decaying = false;
    Ok(DomainField::Pulled { eps: atlas.map.eps, field: acc })
}

/// `||u||_{W^{k,p}(O, dist^gamma)}` by masked midpoint quadrature on the Cartesian `x` grid.
pub fn domain_sobolev_norm(u: &DomainField, dom: &SpecialDomain, k: usize, p: f64, gamma: f64, grid: &GeometryGrid) -> Result<f64> {
    let f = match u {
        DomainField::Analytic(f) => grid.field(|x| f(x))?,
        DomainField::Pulled { .. } => {
            return Err(MrError::InvalidParameter("Cartesian norm needs an analytic domain field".into()))
        }
    };
    let x1 = f.coords(0);
    let x2 = f.coords(1);
    let cell = f.cell_volume();
    let weight: Vec<Vec<f64>> = x1
        .par_iter()
        .map(|&a| {
            x2.iter()
                .map(|&b| {
                    let x = [a, b];
                    if dom.contains(&x) {
                        distance_to_boundary(&x, dom).map(|d| d.powf(gamma) * cell)
                    } else {
                        Ok(0.0)
                    }
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let mut total = 0.0;
    for alpha in multi_indices(2, k) {
        let d = f.derivative_multi(&alpha);
        let mut acc = 0.0;
        for ((i, j), v) in d.data.indexed_iter().map(|(ix, v)| ((ix[0], ix[1]), v)) {
            acc += weight[i][j] * v.norm().powf(p);
        }
        total += acc.powf(1.0 / p);
    }
    Ok(total)
}

/// `||Phi_* u||_{W^{k,p}(R^2_+, y_1^gamma)}` on the chart grid.
pub fn halfspace_sobolev_norm(u: &DomainField, map: &PullbackMap, k: usize, p: f64, gamma: f64, grid: &GeometryGrid) -> Result<f64> {
    let v = pushforward(u, map, grid)?;
    crate::spaces::sobolev_norm(&v, k, p, &WeightSpec::halfspace(2, gamma).with_axis(1, AxisWeight::Plain))
}
