//! Anisotropic Littlewood–Paley sequences, block operators and Bessel multipliers.

use std::sync::OnceLock;

use ndarray::ArrayD;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{MrError, Result};
use crate::grid::{fft_nd, wavenumbers, GridField, C64};

/// Fraction of the Nyquist frequency the outermost shell may reach.
pub const NYQUIST_FRACTION: f64 = 0.9;

/// Coordinate blocks `(dim_j, a_j)`, in axis order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnisotropyDescriptor {
    pub blocks: Vec<(usize, f64)>,
}

impl AnisotropyDescriptor {
    pub fn new(blocks: Vec<(usize, f64)>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(MrError::InvalidParameter("descriptor needs at least one block".into()));
        }
        for &(dim, a) in &blocks {
            if dim == 0 || !(a > 0.0 && a.is_finite()) {
                return Err(MrError::InvalidParameter(format!("bad block (dim {dim}, a {a})")));
            }
        }
        Ok(Self { blocks })
    }

    pub fn isotropic(d: usize) -> Self {
        Self { blocks: vec![(d, 1.0)] }
    }

    /// One block per axis, all with `a = 1`.
    pub fn split(d: usize) -> Self {
        Self { blocks: vec![(1, 1.0); d] }
    }

    pub fn dim(&self) -> usize {
        self.blocks.iter().map(|b| b.0).sum()
    }

    pub fn block_of_axis(&self, axis: usize) -> usize {
        let mut acc = 0;
        for (j, &(dim, _)) in self.blocks.iter().enumerate() {
            acc += dim;
            if axis < acc {
                return j;
            }
        }
        panic!("axis {axis} out of range for descriptor of dimension {}", self.dim());
    }

    pub fn axes_of_block(&self, j: usize) -> std::ops::Range<usize> {
        let start: usize = self.blocks[..j].iter().map(|b| b.0).sum();
        start..start + self.blocks[j].0
    }

    pub fn exponent_of_axis(&self, axis: usize) -> f64 {
        self.blocks[self.block_of_axis(axis)].1
    }

    pub fn remove_axis(&self, axis: usize) -> Self {
        let j = self.block_of_axis(axis);
        let mut blocks = self.blocks.clone();
        blocks[j].0 -= 1;
        if blocks[j].0 == 0 {
            blocks.remove(j);
        }
        Self { blocks }
    }

    /// Prepends a block (used to attach a normal axis to tangential data).
    pub fn prepend(&self, dim: usize, a: f64) -> Self {
        let mut blocks = vec![(dim, a)];
        blocks.extend_from_slice(&self.blocks);
        Self { blocks }
    }

    /// `(sum_j |x_j|^{2/a_j})^{1/2}` with `|x_j|` the Euclidean norm of block j.
    pub fn distance(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(MrError::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        Ok(self.distance_unchecked(x))
    }

    pub(crate) fn distance_unchecked(&self, x: &[f64]) -> f64 {
        let mut acc = 0.0;
        let mut off = 0;
        for &(dim, a) in &self.blocks {
            let e2: f64 = x[off..off + dim].iter().map(|v| v * v).sum();
            off += dim;
            if e2 > 0.0 {
                acc += if a == 1.0 { e2 } else { e2.powf(1.0 / a) };
            }
        }
        acc.sqrt()
    }

    /// `delta_lambda x`: block j scaled by `lambda^{a_j}`.
    pub fn dilate(&self, lambda: f64, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(MrError::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        if !(lambda > 0.0) {
            return Err(MrError::InvalidParameter(format!("dilation factor {lambda} must be positive")));
        }
        let mut out = x.to_vec();
        let mut off = 0;
        for &(dim, a) in &self.blocks {
            let s = lambda.powf(a);
            for v in &mut out[off..off + dim] {
                *v *= s;
            }
            off += dim;
        }
        Ok(out)
    }
}

pub fn aniso_distance(x: &[f64], desc: &AnisotropyDescriptor) -> Result<f64> {
    desc.distance(x)
}

pub fn aniso_dilate(lambda: f64, x: &[f64], desc: &AnisotropyDescriptor) -> Result<Vec<f64>> {
    desc.dilate(lambda, x)
}

const PSI_TABLE: usize = 2048;
const GL_NODES: [f64; 10] = [
    -0.973_906_528_517_171_7,
    -0.865_063_366_688_984_5,
    -0.679_409_568_299_024_4,
    -0.433_395_394_129_247_2,
    -0.148_874_338_981_631_2,
    0.148_874_338_981_631_2,
    0.433_395_394_129_247_2,
    0.679_409_568_299_024_4,
    0.865_063_366_688_984_5,
    0.973_906_528_517_171_7,
];
const GL_WEIGHTS: [f64; 10] = [
    0.066_671_344_308_688_1,
    0.149_451_349_150_580_6,
    0.219_086_362_515_982,
    0.269_266_719_309_996_4,
    0.295_524_224_714_752_9,
    0.295_524_224_714_752_9,
    0.269_266_719_309_996_4,
    0.219_086_362_515_982,
    0.149_451_349_150_580_6,
    0.066_671_344_308_688_1,
];

fn bump_integrand(t: f64) -> f64 {
    if t <= 0.0 || t >= 1.0 {
        0.0
    } else {
        (-1.0 / (t * (1.0 - t))).exp()
    }
}

fn gl_integral(a: f64, b: f64) -> f64 {
    let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
    GL_NODES.iter().zip(GL_WEIGHTS.iter()).map(|(x, w)| w * bump_integrand(c + h * x)).sum::<f64>() * h
}

fn psi_table() -> &'static Vec<f64> {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut cum = vec![0.0; PSI_TABLE + 1];
        for i in 0..PSI_TABLE {
            let (a, b) = (i as f64 / PSI_TABLE as f64, (i + 1) as f64 / PSI_TABLE as f64);
            cum[i + 1] = cum[i] + gl_integral(a, b);
        }
        cum
    })
}

/// Smooth monotone cutoff: 1 on `(-inf, 0]`, 0 on `[1, inf)`.
pub fn psi(t: f64) -> f64 {
    if t <= 0.0 {
        return 1.0;
    }
    if t >= 1.0 {
        return 0.0;
    }
    let table = psi_table();
    let total = table[PSI_TABLE];
    // Integrate from whichever end is closer, so both tails keep full relative accuracy.
    if t <= 0.5 {
        let i = (t * PSI_TABLE as f64).floor() as usize;
        let a = i as f64 / PSI_TABLE as f64;
        1.0 - (table[i] + gl_integral(a, t)) / total
    } else {
        let s = 1.0 - t;
        let i = (s * PSI_TABLE as f64).floor() as usize;
        let a = i as f64 / PSI_TABLE as f64;
        (table[i] + gl_integral(a, s)) / total
    }
}

/// `psi'(t)`, supported in `[0, 1]`.
pub fn psi_derivative(t: f64) -> f64 {
    -bump_integrand(t) / psi_table()[PSI_TABLE]
}

/// Littlewood–Paley family generated by `phi_hat(xi) = psi((|xi| - A)/(B - A))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpSequence {
    pub a_inner: f64,
    pub b_outer: f64,
    pub n_max: usize,
    pub desc: AnisotropyDescriptor,
}

pub fn make_generator(a_inner: f64, b_outer: f64, desc: AnisotropyDescriptor) -> Result<LpSequence> {
    if !(a_inner > 0.0 && a_inner < b_outer && b_outer.is_finite()) {
        return Err(MrError::InvalidParameter(format!("need 0 < A < B, got A = {a_inner}, B = {b_outer}")));
    }
    Ok(LpSequence { a_inner, b_outer, n_max: 0, desc })
}

impl LpSequence {
    /// Default `A = 1`, `B = 2` with the largest level resolved by `f`'s grid.
    pub fn default_for(f: &GridField) -> Result<Self> {
        make_generator(1.0, 2.0, f.desc.clone())?.resolved_for(f)
    }

    pub fn with_n_max(mut self, n_max: usize) -> Self {
        self.n_max = n_max;
        self
    }

    /// Sets `n_max` to the largest level whose outer shell fits under the Nyquist bound.
    pub fn resolved_for(self, f: &GridField) -> Result<Self> {
        let bound = self.nyquist_bound(f);
        if self.b_outer > bound {
            let axes = self.offending_axes(f, 0);
            return Err(MrError::UnresolvedBand { outer: self.b_outer, limit: bound, axes });
        }
        let n = ((bound / self.b_outer).log2() + 1e-12).floor().max(0.0) as usize;
        Ok(self.with_n_max(n))
    }

    /// `min_i (0.9 Nyq_i)^{1/a_i}`: the largest anisotropic radius contained in the resolved box.
    pub fn nyquist_bound(&self, f: &GridField) -> f64 {
        (0..f.dim())
            .map(|i| (NYQUIST_FRACTION * f.nyquist(i)).powf(1.0 / self.desc.exponent_of_axis(i)))
            .fold(f64::INFINITY, f64::min)
    }

    fn offending_axes(&self, f: &GridField, n: usize) -> Vec<usize> {
        let outer = self.b_outer * 2f64.powi(n as i32);
        (0..f.dim())
            .filter(|&i| outer.powf(self.desc.exponent_of_axis(i)) > NYQUIST_FRACTION * f.nyquist(i) * (1.0 + 1e-12))
            .collect()
    }

    pub fn check_resolution(&self, f: &GridField) -> Result<()> {
        if f.desc != self.desc {
            return Err(MrError::DescriptorMismatch(format!(
                "field descriptor {:?} vs sequence descriptor {:?}",
                f.desc.blocks, self.desc.blocks
            )));
        }
        let axes = self.offending_axes(f, self.n_max);
        if axes.is_empty() {
            Ok(())
        } else {
            Err(MrError::UnresolvedBand {
                outer: self.b_outer * 2f64.powi(self.n_max as i32),
                limit: self.nyquist_bound(f),
                axes,
            })
        }
    }

    /// `phi_hat` as a function of the anisotropic radius `r = |xi|`.
    pub fn phi_hat_radial(&self, r: f64) -> f64 {
        psi((r - self.a_inner) / (self.b_outer - self.a_inner))
    }

    pub fn phi_hat(&self, xi: &[f64]) -> Result<f64> {
        Ok(self.phi_hat_radial(self.desc.distance(xi)?))
    }

    /// `phi_hat_n` at radius `r`; for `n >= 1` the telescoping difference.
    pub fn phi_hat_n_radial(&self, n: usize, r: f64) -> f64 {
        if n == 0 {
            self.phi_hat_radial(r)
        } else {
            let s = 2f64.powi(-(n as i32));
            self.phi_hat_radial(s * r) - self.phi_hat_radial(2.0 * s * r)
        }
    }

    pub fn phi_hat_n(&self, n: usize, xi: &[f64]) -> Result<f64> {
        Ok(self.phi_hat_n_radial(n, self.desc.distance(xi)?))
    }

    /// `sum_{n <= big_n} phi_hat_n`, equal to `phi_hat(delta_{2^{-N}} xi)` by telescoping.
    pub fn partial_sum_radial(&self, big_n: usize, r: f64) -> f64 {
        (0..=big_n).map(|n| self.phi_hat_n_radial(n, r)).sum()
    }

    /// Anisotropic radius of every FFT-ordered frequency of `f`'s grid.
    pub fn radii_on_grid(&self, f: &GridField) -> ArrayD<f64> {
        let kk: Vec<Vec<f64>> = (0..f.dim()).map(|i| f.wavenumbers(i)).collect();
        let mut xi = vec![0.0; f.dim()];
        let mut out = ArrayD::zeros(f.data.raw_dim());
        for (idx, v) in out.indexed_iter_mut() {
            for (i, x) in xi.iter_mut().enumerate() {
                *x = kk[i][idx[i]];
            }
            *v = self.desc.distance_unchecked(&xi);
        }
        out
    }
}

/// `(S_n f)_{n=0}^{N_max}` by FFT, symbol multiplication and inverse FFT.
pub fn lp_blocks(f: &GridField, lps: &LpSequence) -> Result<Vec<GridField>> {
    lps.check_resolution(f)?;
    let spec = f.spectrum();
    let radii = lps.radii_on_grid(f);
    let blocks = (0..=lps.n_max)
        .into_par_iter()
        .map(|n| {
            let mut s = spec.clone();
            ndarray::Zip::from(&mut s).and(&radii).for_each(|v, &r| *v *= lps.phi_hat_n_radial(n, r));
            fft_nd(&mut s, true);
            let mut g = f.with_data(s);
            g.decaying = f.decaying;
            g
        })
        .collect();
    Ok(blocks)
}

/// Blocks of a sequence acting only on the axes `first_axis..first_axis + lps.desc.dim()`.
pub fn lp_blocks_partial(f: &GridField, lps: &LpSequence, first_axis: usize) -> Result<Vec<GridField>> {
    let k = lps.desc.dim();
    if first_axis + k > f.dim() {
        return Err(MrError::DimensionMismatch { expected: f.dim(), got: first_axis + k });
    }
    let outer = lps.b_outer * 2f64.powi(lps.n_max as i32);
    let bad: Vec<usize> = (0..k)
        .filter(|&i| {
            outer.powf(lps.desc.exponent_of_axis(i)) > NYQUIST_FRACTION * f.nyquist(first_axis + i) * (1.0 + 1e-12)
        })
        .map(|i| first_axis + i)
        .collect();
    if !bad.is_empty() {
        let bound = (0..k)
            .map(|i| (NYQUIST_FRACTION * f.nyquist(first_axis + i)).powf(1.0 / lps.desc.exponent_of_axis(i)))
            .fold(f64::INFINITY, f64::min);
        return Err(MrError::UnresolvedBand { outer, limit: bound, axes: bad });
    }
    let kk: Vec<Vec<f64>> = (first_axis..first_axis + k).map(|i| f.wavenumbers(i)).collect();
    let mut radii = ArrayD::<f64>::zeros(f.data.raw_dim());
    let mut xi = vec![0.0; k];
    for (idx, v) in radii.indexed_iter_mut() {
        for (i, x) in xi.iter_mut().enumerate() {
            *x = kk[i][idx[first_axis + i]];
        }
        *v = lps.desc.distance_unchecked(&xi);
    }
    let spec = f.spectrum();
    Ok((0..=lps.n_max)
        .into_par_iter()
        .map(|n| {
            let mut s = spec.clone();
            ndarray::Zip::from(&mut s).and(&radii).for_each(|v, &r| *v *= lps.phi_hat_n_radial(n, r));
            fft_nd(&mut s, true);
            f.with_data(s)
        })
        .collect())
}

/// Largest level resolved on the axes `first_axis..` of `f` for a sequence with descriptor `desc`.
pub fn partial_n_max(f: &GridField, b_outer: f64, desc: &AnisotropyDescriptor, first_axis: usize) -> Result<usize> {
    let bound = (0..desc.dim())
        .map(|i| (NYQUIST_FRACTION * f.nyquist(first_axis + i)).powf(1.0 / desc.exponent_of_axis(i)))
        .fold(f64::INFINITY, f64::min);
    if b_outer > bound {
        return Err(MrError::UnresolvedBand {
            outer: b_outer,
            limit: bound,
            axes: (first_axis..first_axis + desc.dim()).collect(),
        });
    }
    Ok(((bound / b_outer).log2() + 1e-12).floor().max(0.0) as usize)
}

/// `sum_n S_n f`, i.e. `f` filtered by `phi_hat(delta_{2^{-N}} .)`.
pub fn lp_reconstruct(f: &GridField, lps: &LpSequence) -> Result<GridField> {
    lps.check_resolution(f)?;
    let radii = lps.radii_on_grid(f);
    let mut s = f.spectrum();
    ndarray::Zip::from(&mut s).and(&radii).for_each(|v, &r| *v *= lps.partial_sum_radial(lps.n_max, r));
    Ok(f.from_spectrum(s))
}

/// `(1 - Delta)^{s/2} f`.
pub fn bessel_apply(f: &GridField, s: f64) -> GridField {
    if s == 0.0 {
        return f.clone();
    }
    f.apply_multiplier(|xi| {
        let e2: f64 = xi.iter().map(|v| v * v).sum();
        C64::new((1.0 + e2).powf(0.5 * s), 0.0)
    })
}

/// Bessel potential acting on the block-j frequencies only.
pub fn partial_bessel_apply(f: &GridField, sigma: f64, block: usize) -> Result<GridField> {
    if block >= f.desc.blocks.len() {
        return Err(MrError::InvalidParameter(format!("block {block} out of range")));
    }
    if sigma == 0.0 {
        return Ok(f.clone());
    }
    let axes = f.desc.axes_of_block(block);
    Ok(f.apply_multiplier(|xi| {
        let e2: f64 = xi[axes.clone()].iter().map(|v| v * v).sum();
        C64::new((1.0 + e2).powf(0.5 * sigma), 0.0)
    }))
}

/// Wavenumbers of an axis, re-exported for callers building symbols by hand.
pub fn axis_wavenumbers(n: usize, half_width: f64) -> Vec<f64> {
    wavenumbers(n, half_width)
}
