//! Weighted Lebesgue, Sobolev, Bessel, Besov and Triebel–Lizorkin norms on grid fields,
//! plus the norm-equivalence experiments built on them.

use serde::{Deserialize, Serialize};

use crate::error::{MrError, Result};
use crate::grid::GridField;
use crate::lp::{lp_blocks, lp_blocks_partial, make_generator, partial_bessel_apply, partial_n_max, AnisotropyDescriptor, LpSequence};
use crate::quadrature::{axis_measures, mixed_norm_raw, AxisWeight, WeightSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpKind {
    /// `l^q(L^p)`
    Besov,
    /// `L^p(l^q)`
    TriebelLizorkin,
}

/// Space families handled by [`space_norm`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SpaceSpec {
    LebesgueMixed { pvec: Vec<f64> },
    Sobolev { k: usize, p: f64 },
    Bessel { s: f64, p: f64 },
    Besov { s: f64, p: f64, q: f64 },
    TriebelLizorkin { s: f64, p: f64, q: f64 },
    AnisoSobolev { nvec: Vec<usize>, pvec: Vec<f64> },
    AnisoBessel { svec: Vec<f64>, pvec: Vec<f64> },
    AnisoTL { s: f64, pvec: Vec<f64>, q: f64 },
    Intersection(Box<SpaceSpec>, Box<SpaceSpec>),
}

fn expand_p(pvec: &[f64], nblocks: usize) -> Result<Vec<f64>> {
    match pvec.len() {
        1 => Ok(vec![pvec[0]; nblocks]),
        l if l == nblocks => Ok(pvec.to_vec()),
        l => Err(MrError::DimensionMismatch { expected: nblocks, got: l }),
    }
}

fn measures(f: &GridField, weights: &WeightSpec) -> Result<Vec<Vec<f64>>> {
    if weights.axes.len() != f.dim() {
        return Err(MrError::DimensionMismatch { expected: f.dim(), got: weights.axes.len() });
    }
    (0..f.dim()).map(|i| axis_measures(f.n[i], f.half_width[i], weights.axes[i])).collect()
}

/// Mixed norm of nonnegative samples laid out on `f`'s grid.
fn mixed_of_values(f: &GridField, vals: &[f64], pvec: &[f64], weights: &WeightSpec) -> Result<f64> {
    let groups: Vec<usize> = f.desc.blocks.iter().map(|b| b.0).collect();
    let pv = expand_p(pvec, groups.len())?;
    let m = measures(f, weights)?;
    Ok(mixed_norm_raw(vals, f.data.shape(), &m, &groups, &pv))
}

/// Iterated weighted `L^{p_j}` quadratures over the descriptor blocks, first block innermost.
pub fn weighted_mixed_norm(f: &GridField, pvec: &[f64], weights: &WeightSpec) -> Result<f64> {
    let vals: Vec<f64> = f.data.iter().map(|v| v.norm()).collect();
    mixed_of_values(f, &vals, pvec, weights)
}

/// All multi-indices on `d` axes with `|alpha| <= k`.
pub fn multi_indices(d: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![0; d]];
    for total in 1..=k {
        let mut cur = vec![0usize; d];
        fn rec(i: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            if i + 1 == cur.len() {
                cur[i] = left;
                out.push(cur.clone());
                return;
            }
            for a in (0..=left).rev() {
                cur[i] = a;
                rec(i + 1, left - a, cur, out);
            }
        }
        rec(0, total, &mut cur, &mut out);
    }
    out
}

/// `sum_{|alpha| <= k} ||d^alpha f||_{L^p(w)}` with spectral derivatives.
pub fn sobolev_norm(f: &GridField, k: usize, p: f64, weights: &WeightSpec) -> Result<f64> {
    multi_indices(f.dim(), k)
        .iter()
        .map(|alpha| weighted_mixed_norm(&f.derivative_multi(alpha), &[p], weights))
        .sum()
}

/// Norm of the sequence `(2^{ns} blocks[n])_n`, either `l^q(L^pvec)` or `L^pvec(l^q)`.
pub fn sequence_norm(
    blocks: &[GridField],
    s: f64,
    pvec: &[f64],
    q: f64,
    weights: &WeightSpec,
    kind: LpKind,
) -> Result<f64> {
    let first = blocks.first().ok_or_else(|| MrError::InvalidParameter("no blocks".into()))?;
    match kind {
        LpKind::Besov => {
            let mut acc = 0.0;
            for (n, b) in blocks.iter().enumerate() {
                let v = 2f64.powf(n as f64 * s) * weighted_mixed_norm(b, pvec, weights)?;
                acc += v.powf(q);
            }
            Ok(acc.powf(1.0 / q))
        }
        LpKind::TriebelLizorkin => {
            let mut acc = vec![0.0; first.len()];
            for (n, b) in blocks.iter().enumerate() {
                let c = 2f64.powf(n as f64 * s);
                for (a, v) in acc.iter_mut().zip(b.data.iter()) {
                    *a += (c * v.norm()).powf(q);
                }
            }
            let vals: Vec<f64> = acc.iter().map(|a| a.powf(1.0 / q)).collect();
            mixed_of_values(first, &vals, pvec, weights)
        }
    }
}

/// Isotropic `B^s_{p,q}` or `F^s_{p,q}` norm.
pub fn besov_tl_norm(
    f: &GridField,
    s: f64,
    p: f64,
    q: f64,
    weights: &WeightSpec,
    lps: &LpSequence,
    kind: LpKind,
) -> Result<f64> {
    let blocks = lp_blocks(f, lps)?;
    sequence_norm(&blocks, s, &[p], q, weights, kind)
}

/// Anisotropic Triebel–Lizorkin norm with mixed outer integrability.
pub fn aniso_tl_norm(
    f: &GridField,
    s: f64,
    pvec: &[f64],
    q: f64,
    weights: &WeightSpec,
    lps: &LpSequence,
) -> Result<f64> {
    let blocks = lp_blocks(f, lps)?;
    sequence_norm(&blocks, s, pvec, q, weights, LpKind::TriebelLizorkin)
}

/// The index set: zero plus every multi-index living in a single block `j` with `|alpha_j| <= n_j`.
pub fn aniso_sobolev_index_set(desc: &AnisotropyDescriptor, nvec: &[usize]) -> Result<Vec<Vec<usize>>> {
    if nvec.len() != desc.blocks.len() {
        return Err(MrError::DimensionMismatch { expected: desc.blocks.len(), got: nvec.len() });
    }
    let d = desc.dim();
    let mut out = vec![vec![0; d]];
    for (j, &nj) in nvec.iter().enumerate() {
        let axes = desc.axes_of_block(j);
        for local in multi_indices(axes.len(), nj).into_iter().skip(1) {
            let mut alpha = vec![0; d];
            for (i, a) in axes.clone().zip(local) {
                alpha[i] = a;
            }
            out.push(alpha);
        }
    }
    Ok(out)
}

pub fn aniso_sobolev_norm(f: &GridField, nvec: &[usize], pvec: &[f64], weights: &WeightSpec) -> Result<f64> {
    aniso_sobolev_index_set(&f.desc, nvec)?
        .iter()
        .map(|alpha| weighted_mixed_norm(&f.derivative_multi(alpha), pvec, weights))
        .sum()
}

/// `sum_j ||J^{[j]}_{s_j} f||` with partial Bessel potentials.
pub fn aniso_bessel_norm(f: &GridField, svec: &[f64], pvec: &[f64], weights: &WeightSpec) -> Result<f64> {
    if svec.len() != f.desc.blocks.len() {
        return Err(MrError::DimensionMismatch { expected: f.desc.blocks.len(), got: svec.len() });
    }
    let mut acc = 0.0;
    for (j, &s) in svec.iter().enumerate() {
        acc += weighted_mixed_norm(&partial_bessel_apply(f, s, j)?, pvec, weights)?;
    }
    Ok(acc)
}

/// Dispatches on a [`SpaceSpec`]; LP-based families use the default resolved sequence.
pub fn space_norm(f: &GridField, spec: &SpaceSpec, weights: &WeightSpec) -> Result<f64> {
    match spec {
        SpaceSpec::LebesgueMixed { pvec } => weighted_mixed_norm(f, pvec, weights),
        SpaceSpec::Sobolev { k, p } => sobolev_norm(f, *k, *p, weights),
        SpaceSpec::Bessel { s, p } => weighted_mixed_norm(&crate::lp::bessel_apply(f, *s), &[*p], weights),
        SpaceSpec::Besov { s, p, q } => {
            besov_tl_norm(f, *s, *p, *q, weights, &LpSequence::default_for(f)?, LpKind::Besov)
        }
        SpaceSpec::TriebelLizorkin { s, p, q } => {
            besov_tl_norm(f, *s, *p, *q, weights, &LpSequence::default_for(f)?, LpKind::TriebelLizorkin)
        }
        SpaceSpec::AnisoSobolev { nvec, pvec } => aniso_sobolev_norm(f, nvec, pvec, weights),
        SpaceSpec::AnisoBessel { svec, pvec } => aniso_bessel_norm(f, svec, pvec, weights),
        SpaceSpec::AnisoTL { s, pvec, q } => aniso_tl_norm(f, *s, pvec, *q, weights, &LpSequence::default_for(f)?),
        SpaceSpec::Intersection(a, b) => Ok(space_norm(f, a, weights)? + space_norm(f, b, weights)?),
    }
}

/// Spread of a set of positive ratios.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bracket {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl Bracket {
    pub fn from_ratios(ratios: &[f64]) -> Result<Bracket> {
        let good: Vec<f64> = ratios.iter().copied().filter(|r| r.is_finite() && *r > 0.0).collect();
        if good.is_empty() {
            return Err(MrError::DegenerateFamily("no nonzero members".into()));
        }
        Ok(Bracket {
            min: good.iter().copied().fold(f64::INFINITY, f64::min),
            max: good.iter().copied().fold(0.0, f64::max),
            count: good.len(),
        })
    }

    pub fn spread(&self) -> f64 {
        self.max / self.min
    }

    /// Largest factor by which either end moved relative to `base`.
    pub fn drift_from(&self, base: &Bracket) -> f64 {
        let a = (self.max / base.max).max(base.max / self.max);
        let b = (self.min / base.min).max(base.min / self.min);
        a.max(b)
    }
}

/// Two sides of the intersection representation for a space-time field whose descriptor is
/// `[(d_x, a1), (1, a2)]` (space block first, innermost).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntersectionSides {
    pub lhs: f64,
    pub rhs_time: f64,
    pub rhs_space: f64,
}

impl IntersectionSides {
    pub fn ratio(&self) -> Option<f64> {
        let rhs = self.rhs_time + self.rhs_space;
        if rhs > 0.0 && self.lhs > 0.0 {
            Some(self.lhs / rhs)
        } else {
            None
        }
    }
}

pub fn intersection_sides(f: &GridField, s: f64, p: f64, q: f64, weights: &WeightSpec) -> Result<IntersectionSides> {
    if f.desc.blocks.len() != 2 || f.desc.blocks[1].0 != 1 {
        return Err(MrError::DescriptorMismatch("expected [(space, a1), (1, a2)] blocks".into()));
    }
    if !(s > 0.0) {
        return Err(MrError::InvalidParameter(format!("smoothness {s} must be positive")));
    }
    let (dx, a1) = f.desc.blocks[0];
    let a2 = f.desc.blocks[1].1;
    let pq = [p, q];

    let full = LpSequence::default_for(f)?;
    let lhs = sequence_norm(&lp_blocks(f, &full)?, s, &pq, p, weights, LpKind::TriebelLizorkin)?;

    let tdesc = AnisotropyDescriptor::isotropic(1);
    let tl = make_generator(1.0, 2.0, tdesc.clone())?.with_n_max(partial_n_max(f, 2.0, &tdesc, dx)?);
    let rhs_time = sequence_norm(&lp_blocks_partial(f, &tl, dx)?, s / a2, &pq, p, weights, LpKind::TriebelLizorkin)?;

    let xdesc = AnisotropyDescriptor::isotropic(dx);
    let xl = make_generator(1.0, 2.0, xdesc.clone())?.with_n_max(partial_n_max(f, 2.0, &xdesc, 0)?);
    let rhs_space = sequence_norm(&lp_blocks_partial(f, &xl, 0)?, s / a1, &pq, p, weights, LpKind::TriebelLizorkin)?;
    Ok(IntersectionSides { lhs, rhs_time, rhs_space })
}

/// LHS/RHS bracket over a family; zero fields are skipped.
pub fn check_intersection_representation(
    family: &[GridField],
    s: f64,
    p: f64,
    q: f64,
    weights: &WeightSpec,
) -> Result<Bracket> {
    use rayon::prelude::*;
    let ratios: Vec<Option<f64>> = family
        .par_iter()
        .map(|f| intersection_sides(f, s, p, q, weights).map(|x| x.ratio()))
        .collect::<Result<_>>()?;
    let r: Vec<f64> = ratios.into_iter().flatten().collect();
    Bracket::from_ratios(&r)
}

/// `||u / x_1||_{L^p(w_gamma)} / ||u||_{W^{1,p}(w_gamma)}` on the half-space `x_1 > 0`.
///
/// When `gamma - p > -1` the quotient term is integrated directly with the weight
/// `x_1^{gamma - p}`. Otherwise `u` must vanish on `x_1 = 0` and the origin cell uses the
/// limit `u / x_1 -> d_1 u`. Returns `None` for the zero field.
pub fn hardy_check(u: &GridField, gamma: f64, p: f64) -> Result<Option<f64>> {
    let d = u.dim();
    let w = WeightSpec::halfspace(d, gamma);
    let origin = u.origin_index(0);
    let x1 = u.coords(0);
    let scale = u.max_abs();
    if scale == 0.0 {
        return Ok(None);
    }
    let plain = WeightSpec::unweighted(d);
    let quotient = if gamma - p > -1.0 {
        let wq = plain.clone().with_axis(0, AxisWeight::HalfLine(Some(gamma - p)));
        weighted_mixed_norm(u, &[p], &wq)?
    } else {
        let boundary_max = u.data.index_axis(ndarray::Axis(0), origin).iter().fold(0.0f64, |m, v| m.max(v.norm()));
        if boundary_max > 1e-10 * scale {
            return Err(MrError::SideCondition(format!(
                "u must vanish on x1 = 0 when gamma - p <= -1 (|u| = {boundary_max:.3e} there)"
            )));
        }
        let du = u.derivative(0, 1);
        let mut qf = u.clone();
        for (idx, v) in qf.data.indexed_iter_mut() {
            let k = idx[0];
            if k == origin {
                *v = du.data[&idx];
            } else if k > origin {
                *v /= x1[k];
            }
        }
        weighted_mixed_norm(&qf, &[p], &w)?
    };
    let denom = sobolev_norm_half(u, p, &w)?;
    if denom == 0.0 {
        return Ok(None);
    }
    Ok(Some(quotient / denom))
}

/// `||u|| + ||d_1 u||` only along the normal direction.
fn sobolev_norm_half(u: &GridField, p: f64, w: &WeightSpec) -> Result<f64> {
    Ok(weighted_mixed_norm(u, &[p], w)? + weighted_mixed_norm(&u.derivative(0, 1), &[p], w)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::C64;

    #[test]
    fn multi_index_counts() {
        assert_eq!(multi_indices(2, 0).len(), 1);
        assert_eq!(multi_indices(2, 1).len(), 3);
        assert_eq!(multi_indices(2, 2).len(), 6);
        assert_eq!(multi_indices(3, 2).len(), 10);
    }

    #[test]
    fn aniso_index_set_excludes_mixed() {
        let desc = AnisotropyDescriptor::split(2);
        let set = aniso_sobolev_index_set(&desc, &[2, 1]).unwrap();
        // 0, d1, d1^2, d2
        assert_eq!(set.len(), 4);
        assert!(set.iter().all(|a| a[0] == 0 || a[1] == 0));
    }

    #[test]
    fn constant_lebesgue() {
        let f = GridField::from_fn(&[16, 8], &[2.0, 1.0], AnisotropyDescriptor::isotropic(2), |_| C64::new(3.0, 0.0))
            .unwrap();
        let v = weighted_mixed_norm(&f, &[3.0], &WeightSpec::unweighted(2)).unwrap();
        assert!((v - 3.0 * 8f64.powf(1.0 / 3.0)).abs() < 1e-12);
    }

    #[test]
    fn bracket_drift() {
        let a = Bracket { min: 1.0, max: 2.0, count: 3 };
        let b = Bracket { min: 0.5, max: 2.5, count: 3 };
        assert_eq!(b.drift_from(&a), 2.0);
        assert!(Bracket::from_ratios(&[]).is_err());
    }
}
