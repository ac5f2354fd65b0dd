//! Working trace, higher-order traces and the explicit extension operators `ext_j`.
//!
//! The extension kernel `rho` has `rho_hat` supported in `[1, 2]`, so it decays only
//! like a Gevrey-class function in `x_1`. On a periodic box the output of `ext_j` is
//! multiplied by a collar `chi(x_1) = erfc((|x_1| - c)/w)/2` which equals one at
//! `x_1 = 0` to all orders up to `O(exp(-(c/w)^2))`.

use ndarray::{ArrayD, Axis, IxDyn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{MrError, Result};
use crate::grid::{BoundaryField, GridField, TraceVector, C64};
use crate::lp::{lp_blocks, lp_blocks_partial, make_generator, partial_n_max, AnisotropyDescriptor, LpSequence};
use crate::params::{trace_space_orders, validate_halfspace_trace, ParamSet};
use crate::quadrature::{AxisWeight, WeightSpec};
use crate::spaces::{sequence_norm, Bracket, LpKind};

const BUMP_WIDTH: f64 = 0.15;
const CENTER_LO: f64 = 1.2;
const CENTER_HI: f64 = 1.8;
const PANELS: usize = 64;
const MAX_CONDITION: f64 = 1e12;

/// `b(s) = exp(-1/(1-s^2))` on `(-1, 1)`.
fn bump(s: f64) -> f64 {
    if s.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - s * s)).exp()
    }
}

/// Composite Gauss–Legendre nodes on `[lo, hi]`.
fn composite_gl(lo: f64, hi: f64, panels: usize) -> Vec<(f64, f64)> {
    let (nodes, weights) = gl10();
    let h = (hi - lo) / panels as f64;
    let mut out = Vec::with_capacity(panels * 10);
    for p in 0..panels {
        let c = lo + (p as f64 + 0.5) * h;
        for (x, w) in nodes.iter().zip(weights.iter()) {
            out.push((c + 0.5 * h * x, 0.5 * h * w));
        }
    }
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

/// Kernel family `rho_j(x) = x^j rho(x) / j!` with `rho(0) = 1`, `rho^{(i)}(0) = 0` for `1 <= i <= m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RhoFamily {
    pub m: usize,
    pub centers: Vec<f64>,
    pub coeffs: Vec<f64>,
    pub width: f64,
    pub condition: f64,
    #[serde(skip)]
    half_nodes: Vec<(f64, f64)>,
}

pub fn make_rho(m: usize) -> Result<RhoFamily> {
    let centers: Vec<f64> = if m == 0 {
        vec![0.5 * (CENTER_LO + CENTER_HI)]
    } else {
        (0..=m).map(|k| CENTER_LO + (CENTER_HI - CENTER_LO) * k as f64 / m as f64).collect()
    };
    let h = BUMP_WIDTH;
    let nodes = composite_gl(-1.0, 1.0, PANELS);
    let mat = nalgebra::DMatrix::from_fn(m + 1, m + 1, |i, k| {
        nodes.iter().map(|&(s, w)| w * bump(s) * (centers[k] + h * s).powi(i as i32)).sum::<f64>() * h
    });
    let sv = mat.clone().svd(false, false).singular_values;
    let smin = sv.iter().copied().fold(f64::INFINITY, f64::min);
    let smax = sv.iter().copied().fold(0.0, f64::max);
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !(condition < MAX_CONDITION) {
        return Err(MrError::SingularMoments { cond: condition });
    }
    let mut rhs = nalgebra::DVector::zeros(m + 1);
    rhs[0] = 2.0 * std::f64::consts::PI;
    let c = mat.lu().solve(&rhs).ok_or(MrError::SingularMoments { cond: condition })?;
    let half_nodes = composite_gl(0.0, 1.0, PANELS).into_iter().map(|(s, w)| (s, w * bump(s))).collect();
    Ok(RhoFamily { m, centers, coeffs: c.iter().copied().collect(), width: h, condition, half_nodes })
}

impl RhoFamily {
    pub fn rho_hat(&self, xi: f64) -> f64 {
        self.centers.iter().zip(&self.coeffs).map(|(&t, &c)| c * bump((xi - t) / self.width)).sum()
    }

    /// `(2 pi)^{-1} int xi^i rho_hat(xi) d xi`, which equals `(-i)^i rho^{(i)}(0)`.
    pub fn moment(&self, i: usize) -> f64 {
        let h = self.width;
        let nodes = composite_gl(-1.0, 1.0, PANELS);
        let mut acc = 0.0;
        for (&t, &c) in self.centers.iter().zip(&self.coeffs) {
            acc += c * h * nodes.iter().map(|&(s, w)| w * bump(s) * (t + h * s).powi(i as i32)).sum::<f64>();
        }
        acc / (2.0 * std::f64::consts::PI)
    }

    /// `int_{-1}^{1} b(s) e^{i s omega} ds`.
    fn bump_transform(&self, omega: f64) -> f64 {
        2.0 * self.half_nodes.iter().map(|&(s, wb)| wb * (s * omega).cos()).sum::<f64>()
    }

    /// `rho(x) = (2 pi)^{-1} int rho_hat(xi) e^{i x xi} d xi` in closed form.
    pub fn rho(&self, x: f64) -> C64 {
        let h = self.width;
        let env = h / (2.0 * std::f64::consts::PI) * self.bump_transform(h * x);
        let osc: C64 = self.centers.iter().zip(&self.coeffs).map(|(&t, &c)| C64::from_polar(c, t * x)).sum();
        osc * env
    }

    pub fn rho_j(&self, j: usize, x: f64) -> C64 {
        let fact: f64 = (1..=j).map(|i| i as f64).product();
        self.rho(x) * (x.powi(j as i32) / fact)
    }
}

/// Smooth cutoff in the normal variable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Collar {
    pub center: f64,
    pub width: f64,
}

impl Collar {
    /// Plateau to `L/2`, transition width `L/12`: one at the origin to `erfc(6)/2 ~ 1e-17`.
    pub fn for_half_width(half_width: f64) -> Collar {
        Collar { center: 0.5 * half_width, width: half_width / 12.0 }
    }

    pub fn value(&self, x: f64) -> f64 {
        0.5 * erfc((x.abs() - self.center) / self.width)
    }
}

/// Normal axis of an extension grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalAxis {
    pub n: usize,
    pub half_width: f64,
    pub collar: Collar,
}

impl NormalAxis {
    pub fn new(n: usize, half_width: f64) -> NormalAxis {
        NormalAxis { n, half_width, collar: Collar::for_half_width(half_width) }
    }

    pub fn coords(&self) -> Vec<f64> {
        let h = 2.0 * self.half_width / self.n as f64;
        (0..self.n).map(|k| -self.half_width + k as f64 * h).collect()
    }
}

fn restrict_normal(f: &GridField) -> Result<BoundaryField> {
    f.restrict(0, f.origin_index(0))
}

/// `sum_{n <= N} (S_n f)|_{x_1 = 0}` and the relative size of the last retained term.
pub fn trace_working_with_tail(f: &GridField, lps: &LpSequence) -> Result<(BoundaryField, f64)> {
    let blocks = lp_blocks(f, lps)?;
    let restricted: Vec<BoundaryField> = blocks.iter().map(restrict_normal).collect::<Result<_>>()?;
    let mut acc = restricted[0].clone();
    for r in &restricted[1..] {
        acc = acc.add(r)?;
    }
    let total = acc.l2();
    let tail = if total > 0.0 { restricted.last().map(|r| r.l2()).unwrap_or(0.0) / total } else { 0.0 };
    Ok((acc, tail))
}

pub fn trace_working(f: &GridField, lps: &LpSequence) -> Result<BoundaryField> {
    Ok(trace_working_with_tail(f, lps)?.0)
}

/// `(Tr d_1^j f)_{j=0}^m`.
pub fn trace_m(f: &GridField, m: usize, lps: &LpSequence) -> Result<TraceVector> {
    let entries = (0..=m).map(|j| trace_working(&f.derivative(0, j), lps)).collect::<Result<Vec<_>>>()?;
    TraceVector::new(entries)
}

/// Tangential blocks `phi_n * g`, shared by every `ext_j`.
pub fn tangential_blocks(g: &BoundaryField, lps_t: &LpSequence) -> Result<Vec<BoundaryField>> {
    lp_blocks(g, lps_t)
}

/// `chi(x_1) sum_n 2^{-j n a1} rho_j(2^{n a1} x_1) blocks[n]` at the given normal coordinates.
///
/// The result has shape `[x1.len(), tangential shape...]`.
pub fn ext_profile(
    blocks: &[BoundaryField],
    j: usize,
    a1: f64,
    rho: &RhoFamily,
    collar: Option<Collar>,
    x1: &[f64],
) -> Result<ArrayD<C64>> {
    if j > rho.m {
        return Err(MrError::OrderTooLarge { j, m: rho.m });
    }
    let first = blocks.first().ok_or_else(|| MrError::InvalidParameter("no tangential blocks".into()))?;
    let mut shape = vec![x1.len()];
    shape.extend_from_slice(first.data.shape());
    let rows: Vec<ArrayD<C64>> = x1
        .par_iter()
        .map(|&x| {
            let chi = collar.map(|c| c.value(x)).unwrap_or(1.0);
            let mut row = ArrayD::<C64>::zeros(first.data.raw_dim());
            if chi < 1e-300 {
                return row;
            }
            for (n, b) in blocks.iter().enumerate() {
                let lam = 2f64.powf(n as f64 * a1);
                let coef = rho.rho_j(j, lam * x) * (chi / lam.powi(j as i32));
                row.scaled_add(coef, &b.data);
            }
            row
        })
        .collect();
    let mut out = ArrayD::<C64>::zeros(IxDyn(&shape));
    for (i, r) in rows.into_iter().enumerate() {
        out.index_axis_mut(Axis(0), i).assign(&r);
    }
    Ok(out)
}

fn ext_output(g: &BoundaryField, a1: f64, normal: &NormalAxis, data: ArrayD<C64>) -> Result<GridField> {
    let mut hw = vec![normal.half_width];
    hw.extend_from_slice(&g.half_width);
    let desc = g.desc.prepend(1, a1);
    let mut out = GridField::from_data(&hw, desc, data)?;
    if !out.decays_along(&[0]) {
        return Err(MrError::NotDecaying { shell: out.boundary_shell_max(), max: out.max_abs() });
    }
    out.decaying = g.decaying;
    Ok(out)
}

/// `ext_j g` on the grid `normal x (g's grid)`.
pub fn ext_j(
    g: &BoundaryField,
    j: usize,
    a1: f64,
    lps_t: &LpSequence,
    rho: &RhoFamily,
    normal: &NormalAxis,
) -> Result<GridField> {
    if j > rho.m {
        return Err(MrError::OrderTooLarge { j, m: rho.m });
    }
    let blocks = tangential_blocks(g, lps_t)?;
    let data = ext_profile(&blocks, j, a1, rho, Some(normal.collar), &normal.coords())?;
    ext_output(g, a1, normal, data)
}

/// `sum_j ext_j g_j`.
pub fn ext_vector(
    gv: &TraceVector,
    a1: f64,
    lps_t: &LpSequence,
    rho: &RhoFamily,
    normal: &NormalAxis,
) -> Result<GridField> {
    if gv.order() > rho.m {
        return Err(MrError::OrderTooLarge { j: gv.order(), m: rho.m });
    }
    let x1 = normal.coords();
    let mut acc: Option<ArrayD<C64>> = None;
    for (j, g) in gv.entries.iter().enumerate() {
        let blocks = tangential_blocks(g, lps_t)?;
        let p = ext_profile(&blocks, j, a1, rho, Some(normal.collar), &x1)?;
        acc = Some(match acc {
            None => p,
            Some(a) => a + p,
        });
    }
    ext_output(&gv.entries[0], a1, normal, acc.expect("nonempty trace vector"))
}

/// Entry `(j1, j)` is the largest `||Tr_{j1} ext_j g - delta_{j1 j} g||_2 / ||g||_2` over the family.
pub fn check_biorthogonality(
    m: usize,
    family: &[BoundaryField],
    a1: f64,
    lps_t: &LpSequence,
    normal: &NormalAxis,
) -> Result<Vec<Vec<f64>>> {
    let rho = make_rho(m)?;
    #[allow(clippy::needless_range_loop)]
    let per_member: Vec<Vec<Vec<f64>>> = family
        .iter()
        .map(|g| {
            let gnorm = g.l2();
            let mut mat = vec![vec![0.0; m + 1]; m + 1];
            if gnorm == 0.0 {
                return Ok(mat);
            }
            for j in 0..=m {
                let u = ext_j(g, j, a1, lps_t, &rho, normal)?;
                let lps = LpSequence::default_for(&u)?;
                let tr = trace_m(&u, m, &lps)?;
                for (j1, t) in tr.entries.iter().enumerate() {
                    let err = if j1 == j { t.sub(g)?.l2() } else { t.l2() };
                    mat[j1][j] = err / gnorm;
                }
            }
            Ok(mat)
        })
        .collect::<Result<_>>()?;
    let mut out = vec![vec![0.0f64; m + 1]; m + 1];
    for mat in per_member {
        for (o, r) in out.iter_mut().zip(mat) {
            for (a, b) in o.iter_mut().zip(r) {
                *a = a.max(b);
            }
        }
    }
    Ok(out)
}

/// Both sides of the trace estimate for one space-time field on axes `[x_1, x~..., t]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEstimate {
    pub trace_norm: f64,
    pub source_norm: f64,
}

impl TraceEstimate {
    pub fn ratio(&self) -> Option<f64> {
        if self.trace_norm > 0.0 && self.source_norm > 0.0 {
            Some(self.trace_norm / self.source_norm)
        } else {
            None
        }
    }
}

/// Source norm `||f||_{W^{ell,q}(v_mu; W^{k,p}(w)) cap L^q(v_mu; W^{k+k1,p}(w))}` with
/// `w = x_1^{gamma + k p}`; the field's last axis is time.
pub fn source_norm(f: &GridField, ps: &ParamSet) -> Result<f64> {
    let d = f.dim() - 1;
    let w = spacetime_weights(f.dim(), ps.gamma + ps.k as f64 * ps.p, ps.mu);
    let sob = |g: &GridField, k: usize| -> Result<f64> {
        crate::spaces::multi_indices(d, k)
            .iter()
            .map(|alpha| {
                let mut a = alpha.clone();
                a.push(0);
                crate::spaces::weighted_mixed_norm(&g.derivative_multi(&a), &[ps.p, ps.q], &w)
            })
            .sum()
    };
    let mut acc = 0.0;
    for i in 0..=ps.ell as usize {
        acc += sob(&f.derivative(d, i), ps.k as usize)?;
    }
    acc += sob(f, (ps.k + ps.k1) as usize)?;
    Ok(acc)
}

fn spacetime_weights(dim: usize, gamma: f64, mu: f64) -> WeightSpec {
    let mut w = WeightSpec::halfspace(dim, gamma);
    w.axes[dim - 1] = AxisWeight::Power(mu);
    w
}

/// `F^{st}_{q,p}(v_mu; L^p) + L^q(v_mu; B^{sx}_{p,p})` of boundary data on axes `[x~..., t]`.
pub fn trace_space_norm(g: &BoundaryField, st: f64, sx: f64, p: f64, q: f64, mu: f64) -> Result<f64> {
    let dt = g.dim() - 1;
    let mut w = WeightSpec::unweighted(g.dim());
    w.axes[dt] = AxisWeight::Power(mu);
    let pq = [p, q];
    let tdesc = AnisotropyDescriptor::isotropic(1);
    let tl = make_generator(1.0, 2.0, tdesc.clone())?.with_n_max(partial_n_max(g, 2.0, &tdesc, dt)?);
    let time_part = sequence_norm(&lp_blocks_partial(g, &tl, dt)?, st, &pq, p, &w, LpKind::TriebelLizorkin)?;
    let xdesc = AnisotropyDescriptor::isotropic(dt);
    let xl = make_generator(1.0, 2.0, xdesc.clone())?.with_n_max(partial_n_max(g, 2.0, &xdesc, 0)?);
    let space_part = sequence_norm(&lp_blocks_partial(g, &xl, 0)?, sx, &pq, p, &w, LpKind::TriebelLizorkin)?;
    Ok(time_part + space_part)
}

pub fn trace_estimate(f: &GridField, ps: &ParamSet) -> Result<TraceEstimate> {
    if f.desc.blocks.len() != 2 || f.desc.blocks[1].0 != 1 {
        return Err(MrError::DescriptorMismatch("expected [(space, 1), (1, 1)] space-time blocks".into()));
    }
    let lps = LpSequence::default_for(f)?;
    let traces = trace_m(f, ps.m as usize, &lps)?;
    let mut trace_norm = 0.0;
    for (j, g) in traces.entries.iter().enumerate() {
        let (st, sx) = trace_space_orders(ps, j as u32)?;
        trace_norm += trace_space_norm(g, st, sx, ps.p, ps.q, ps.mu)?;
    }
    Ok(TraceEstimate { trace_norm, source_norm: source_norm(f, ps)? })
}

/// Bracket of trace-space / source-space norm ratios over a family of space-time fields.
pub fn trace_continuity_ratio(family: &[GridField], ps: &ParamSet) -> Result<Bracket> {
    validate_halfspace_trace(ps).into_result()?;
    let ratios: Vec<Option<f64>> =
        family.par_iter().map(|f| trace_estimate(f, ps).map(|e| e.ratio())).collect::<Result<_>>()?;
    let r: Vec<f64> = ratios.into_iter().flatten().collect();
    Bracket::from_ratios(&r)
}
