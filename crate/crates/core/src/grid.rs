//! Sampled complex fields on truncated periodic boxes.
//!
//! Axis `i` carries `n[i]` nodes `x_k = -L_i + k h_i`, `h_i = 2 L_i / n[i]`, so the
//! origin sits at index `n[i]/2`. Samples are stored row-major (last axis fastest).

use std::io::{Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use ndarray::{ArrayD, Axis, IxDyn};
use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{MrError, Result};
use crate::lp::AnisotropyDescriptor;

pub type C64 = Complex64;

/// Relative size of the outermost shell admitted for fields tagged as decaying.
pub const DECAY_TOL: f64 = 1e-8;

const MAGIC: &[u8; 4] = b"MRGF";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    pub n: Vec<usize>,
    pub half_width: Vec<f64>,
    pub data: ArrayD<C64>,
    pub desc: AnisotropyDescriptor,
    pub decaying: bool,
}

/// Data on a boundary hyperplane; same carrier, one dimension fewer.
pub type BoundaryField = GridField;

fn check_axes(n: &[usize], half_width: &[f64], desc: &AnisotropyDescriptor) -> Result<()> {
    if n.len() != half_width.len() || n.is_empty() {
        return Err(MrError::DimensionMismatch { expected: n.len(), got: half_width.len() });
    }
    if desc.dim() != n.len() {
        return Err(MrError::DimensionMismatch { expected: n.len(), got: desc.dim() });
    }
    for (&ni, &li) in n.iter().zip(half_width) {
        if ni < 4 || !ni.is_power_of_two() {
            return Err(MrError::InvalidParameter(format!("points per axis {ni} must be a power of two >= 4")));
        }
        if !(li > 0.0 && li.is_finite()) {
            return Err(MrError::InvalidParameter(format!("box half-width {li} must be positive")));
        }
    }
    Ok(())
}

impl GridField {
    pub fn zeros(n: &[usize], half_width: &[f64], desc: AnisotropyDescriptor) -> Result<Self> {
        check_axes(n, half_width, &desc)?;
        Ok(Self {
            n: n.to_vec(),
            half_width: half_width.to_vec(),
            data: ArrayD::zeros(IxDyn(n)),
            desc,
            decaying: false,
        })
    }

    pub fn from_data(half_width: &[f64], desc: AnisotropyDescriptor, data: ArrayD<C64>) -> Result<Self> {
        let n = data.shape().to_vec();
        check_axes(&n, half_width, &desc)?;
        Ok(Self { n, half_width: half_width.to_vec(), data, desc, decaying: false })
    }

    /// Samples `f` at every node.
    pub fn from_fn<F>(n: &[usize], half_width: &[f64], desc: AnisotropyDescriptor, f: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> C64,
    {
        let mut g = Self::zeros(n, half_width, desc)?;
        let coords: Vec<Vec<f64>> = (0..n.len()).map(|i| g.coords(i)).collect();
        let mut x = vec![0.0; n.len()];
        for (idx, v) in g.data.indexed_iter_mut() {
            for (i, xi) in x.iter_mut().enumerate() {
                *xi = coords[i][idx[i]];
            }
            *v = f(&x);
        }
        Ok(g)
    }

    pub fn dim(&self) -> usize {
        self.n.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        2.0 * self.half_width[axis] / self.n[axis] as f64
    }

    pub fn coords(&self, axis: usize) -> Vec<f64> {
        axis_coords(self.n[axis], self.half_width[axis])
    }

    /// Index of the node at the origin along `axis`.
    pub fn origin_index(&self, axis: usize) -> usize {
        self.n[axis] / 2
    }

    /// Angular wavenumbers in FFT order.
    pub fn wavenumbers(&self, axis: usize) -> Vec<f64> {
        wavenumbers(self.n[axis], self.half_width[axis])
    }

    pub fn nyquist(&self, axis: usize) -> f64 {
        std::f64::consts::PI / self.spacing(axis)
    }

    pub fn cell_volume(&self) -> f64 {
        (0..self.dim()).map(|i| self.spacing(i)).product()
    }

    pub fn same_grid(&self, other: &GridField) -> bool {
        self.n == other.n && self.half_width == other.half_width && self.desc == other.desc
    }

    pub fn with_data(&self, data: ArrayD<C64>) -> GridField {
        debug_assert_eq!(data.shape(), self.data.shape());
        GridField { n: self.n.clone(), half_width: self.half_width.clone(), data, desc: self.desc.clone(), decaying: false }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.norm()))
    }

    /// Discrete L2 norm `(sum |f|^2 h^d)^{1/2}`.
    pub fn l2(&self) -> f64 {
        (self.data.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.cell_volume()).sqrt()
    }

    /// Largest magnitude on the outermost layer of nodes (any axis at index 0 or n-1).
    pub fn boundary_shell_max(&self) -> f64 {
        let mut m = 0.0f64;
        for (idx, v) in self.data.indexed_iter() {
            if (0..self.dim()).any(|i| idx[i] == 0 || idx[i] + 1 == self.n[i]) {
                m = m.max(v.norm());
            }
        }
        m
    }

    /// Verifies the truncation criterion and sets the decaying tag.
    pub fn tag_decaying(mut self) -> Result<Self> {
        let (shell, max) = (self.boundary_shell_max(), self.max_abs());
        if shell > DECAY_TOL * max {
            return Err(MrError::NotDecaying { shell, max });
        }
        self.decaying = true;
        Ok(self)
    }

    /// Decay check along a subset of axes only.
    pub fn decays_along(&self, axes: &[usize]) -> bool {
        let max = self.max_abs();
        let mut shell = 0.0f64;
        for (idx, v) in self.data.indexed_iter() {
            if axes.iter().any(|&i| idx[i] == 0 || idx[i] + 1 == self.n[i]) {
                shell = shell.max(v.norm());
            }
        }
        shell <= DECAY_TOL * max
    }

    pub fn spectrum(&self) -> ArrayD<C64> {
        let mut s = self.data.clone();
        fft_nd(&mut s, false);
        s
    }

    pub fn from_spectrum(&self, mut spec: ArrayD<C64>) -> GridField {
        fft_nd(&mut spec, true);
        self.with_data(spec)
    }

    /// Applies a Fourier multiplier given as a function of the wavenumber vector.
    pub fn apply_multiplier<F>(&self, symbol: F) -> GridField
    where
        F: Fn(&[f64]) -> C64,
    {
        let mut s = self.spectrum();
        multiply_spectrum(&mut s, &self.n, &self.half_width, symbol);
        let mut out = self.from_spectrum(s);
        out.decaying = self.decaying;
        out
    }

    /// Spectral partial derivative of the given order; the Nyquist mode is dropped for odd orders.
    pub fn derivative(&self, axis: usize, order: usize) -> GridField {
        if order == 0 {
            return self.clone();
        }
        let ks = self.wavenumbers(axis);
        let nyq = self.n[axis] / 2;
        let mut s = self.spectrum();
        for (idx, v) in s.indexed_iter_mut() {
            let j = idx[axis];
            if order % 2 == 1 && j == nyq {
                *v = C64::new(0.0, 0.0);
            } else {
                *v *= C64::new(0.0, ks[j]).powu(order as u32);
            }
        }
        let mut out = self.from_spectrum(s);
        out.decaying = self.decaying;
        out
    }

    /// Mixed derivative `d^alpha` with one order per axis.
    pub fn derivative_multi(&self, alpha: &[usize]) -> GridField {
        if alpha.iter().all(|&a| a == 0) {
            return self.clone();
        }
        let kk: Vec<Vec<f64>> = (0..self.dim()).map(|i| self.wavenumbers(i)).collect();
        let n = self.n.clone();
        let mut s = self.spectrum();
        for (idx, v) in s.indexed_iter_mut() {
            let mut factor = C64::new(1.0, 0.0);
            for (i, &a) in alpha.iter().enumerate() {
                if a == 0 {
                    continue;
                }
                if a % 2 == 1 && idx[i] == n[i] / 2 {
                    factor = C64::new(0.0, 0.0);
                    break;
                }
                factor *= C64::new(0.0, kk[i][idx[i]]).powu(a as u32);
            }
            *v *= factor;
        }
        let mut out = self.from_spectrum(s);
        out.decaying = self.decaying;
        out
    }

    /// Restriction to the hyperplane `x_axis = coords[index]`.
    pub fn restrict(&self, axis: usize, index: usize) -> Result<BoundaryField> {
        if self.dim() < 2 {
            return Err(MrError::DimensionMismatch { expected: 2, got: self.dim() });
        }
        let data = self.data.index_axis(Axis(axis), index).to_owned();
        let mut n = self.n.clone();
        n.remove(axis);
        let mut hw = self.half_width.clone();
        hw.remove(axis);
        let desc = self.desc.remove_axis(axis);
        Ok(GridField { n, half_width: hw, data, desc, decaying: false })
    }

    pub fn scale(&self, c: C64) -> GridField {
        let mut out = self.with_data(self.data.mapv(|v| v * c));
        out.decaying = self.decaying;
        out
    }

    pub fn add(&self, other: &GridField) -> Result<GridField> {
        self.require_same(other)?;
        let mut out = self.with_data(&self.data + &other.data);
        out.decaying = self.decaying && other.decaying;
        Ok(out)
    }

    pub fn sub(&self, other: &GridField) -> Result<GridField> {
        self.require_same(other)?;
        let mut out = self.with_data(&self.data - &other.data);
        out.decaying = self.decaying && other.decaying;
        Ok(out)
    }

    pub fn mul(&self, other: &GridField) -> Result<GridField> {
        self.require_same(other)?;
        let mut out = self.with_data(&self.data * &other.data);
        out.decaying = self.decaying || other.decaying;
        Ok(out)
    }

    pub fn require_same(&self, other: &GridField) -> Result<()> {
        if self.same_grid(other) {
            Ok(())
        } else {
            Err(MrError::DescriptorMismatch(format!(
                "grids differ: n {:?} vs {:?}, L {:?} vs {:?}",
                self.n, other.n, self.half_width, other.half_width
            )))
        }
    }

    /// Binary layout: magic, version, d, n[d], L[d], block count, (dim, a) per block,
    /// decaying flag, then little-endian complex64 samples (two f32 each).
    pub fn write_binary<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_u32::<LittleEndian>(FORMAT_VERSION)?;
        w.write_u32::<LittleEndian>(self.dim() as u32)?;
        for &ni in &self.n {
            w.write_u32::<LittleEndian>(ni as u32)?;
        }
        for &li in &self.half_width {
            w.write_f64::<LittleEndian>(li)?;
        }
        w.write_u32::<LittleEndian>(self.desc.blocks.len() as u32)?;
        for &(dim, a) in &self.desc.blocks {
            w.write_u32::<LittleEndian>(dim as u32)?;
            w.write_f64::<LittleEndian>(a)?;
        }
        w.write_u8(self.decaying as u8)?;
        for v in self.data.iter() {
            w.write_f32::<LittleEndian>(v.re as f32)?;
            w.write_f32::<LittleEndian>(v.im as f32)?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(r: &mut R) -> Result<GridField> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(MrError::Format("bad magic".into()));
        }
        let version = r.read_u32::<LittleEndian>()?;
        if version != FORMAT_VERSION {
            return Err(MrError::Format(format!("unsupported version {version}")));
        }
        let d = r.read_u32::<LittleEndian>()? as usize;
        if d == 0 || d > 8 {
            return Err(MrError::Format(format!("implausible dimension {d}")));
        }
        let n: Vec<usize> = (0..d).map(|_| r.read_u32::<LittleEndian>().map(|v| v as usize)).collect::<std::io::Result<_>>()?;
        let hw: Vec<f64> = (0..d).map(|_| r.read_f64::<LittleEndian>()).collect::<std::io::Result<_>>()?;
        let nb = r.read_u32::<LittleEndian>()? as usize;
        let mut blocks = Vec::with_capacity(nb);
        for _ in 0..nb {
            let dim = r.read_u32::<LittleEndian>()? as usize;
            let a = r.read_f64::<LittleEndian>()?;
            blocks.push((dim, a));
        }
        let desc = AnisotropyDescriptor::new(blocks)?;
        let decaying = r.read_u8()? != 0;
        let mut g = GridField::zeros(&n, &hw, desc)?;
        for v in g.data.iter_mut() {
            let re = r.read_f32::<LittleEndian>()? as f64;
            let im = r.read_f32::<LittleEndian>()? as f64;
            *v = C64::new(re, im);
        }
        g.decaying = decaying;
        Ok(g)
    }
}

/// Nodes `-L + k h`, `h = 2L/n`.
pub fn axis_coords(n: usize, half_width: f64) -> Vec<f64> {
    let h = 2.0 * half_width / n as f64;
    (0..n).map(|k| -half_width + k as f64 * h).collect()
}

pub fn wavenumbers(n: usize, half_width: f64) -> Vec<f64> {
    let dk = std::f64::consts::PI / half_width;
    (0..n)
        .map(|k| {
            let kk = if k <= n / 2 { k as f64 } else { k as f64 - n as f64 };
            kk * dk
        })
        .collect()
}

/// Multiplies an FFT-ordered spectrum by `symbol(xi)`.
pub fn multiply_spectrum<F>(s: &mut ArrayD<C64>, n: &[usize], half_width: &[f64], symbol: F)
where
    F: Fn(&[f64]) -> C64,
{
    let kk: Vec<Vec<f64>> = n.iter().zip(half_width).map(|(&ni, &li)| wavenumbers(ni, li)).collect();
    let mut xi = vec![0.0; n.len()];
    for (idx, v) in s.indexed_iter_mut() {
        for (i, x) in xi.iter_mut().enumerate() {
            *x = kk[i][idx[i]];
        }
        *v *= symbol(&xi);
    }
}

/// In-place n-dimensional FFT; the inverse is normalised by `1/N`.
pub fn fft_nd(data: &mut ArrayD<C64>, inverse: bool) {
    let mut planner = FftPlanner::<f64>::new();
    let shape = data.shape().to_vec();
    for (ax, &len) in shape.iter().enumerate() {
        let plan = if inverse { planner.plan_fft_inverse(len) } else { planner.plan_fft_forward(len) };
        let mut buf = vec![C64::new(0.0, 0.0); len];
        let mut scratch = vec![C64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
        for mut lane in data.lanes_mut(Axis(ax)) {
            for (b, v) in buf.iter_mut().zip(lane.iter()) {
                *b = *v;
            }
            plan.process_with_scratch(&mut buf, &mut scratch);
            for (v, b) in lane.iter_mut().zip(buf.iter()) {
                *v = *b;
            }
        }
    }
    if inverse {
        let scale = 1.0 / data.len() as f64;
        data.mapv_inplace(|v| v * scale);
    }
}

/// Entries of a boundary trace tuple `(g_0, ..., g_m)` on a common grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceVector {
    pub entries: Vec<BoundaryField>,
}

impl TraceVector {
    pub fn new(entries: Vec<BoundaryField>) -> Result<Self> {
        if entries.is_empty() {
            return Err(MrError::InvalidParameter("empty trace vector".into()));
        }
        for e in &entries[1..] {
            entries[0].require_same(e)?;
        }
        Ok(Self { entries })
    }

    pub fn order(&self) -> usize {
        self.entries.len() - 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn desc2() -> AnisotropyDescriptor {
        AnisotropyDescriptor::isotropic(2)
    }

    #[test]
    fn fft_round_trip() {
        let f = GridField::from_fn(&[16, 8], &[3.0, 2.0], desc2(), |x| C64::new((x[0] * x[1]).sin(), x[0])).unwrap();
        let back = f.from_spectrum(f.spectrum());
        for (a, b) in f.data.iter().zip(back.data.iter()) {
            assert!((a - b).norm() < 1e-13);
        }
    }

    #[test]
    fn derivative_of_mode() {
        let l = std::f64::consts::PI;
        let f = GridField::from_fn(&[32, 16], &[l, l], desc2(), |x| C64::new((3.0 * x[0]).sin() * x[1].cos(), 0.0))
            .unwrap();
        let d = f.derivative(0, 1);
        let oracle =
            GridField::from_fn(&[32, 16], &[l, l], desc2(), |x| C64::new(3.0 * (3.0 * x[0]).cos() * x[1].cos(), 0.0))
                .unwrap();
        assert!(d.sub(&oracle).unwrap().max_abs() < 1e-12);
        let d2 = f.derivative_multi(&[1, 1]);
        let o2 = GridField::from_fn(&[32, 16], &[l, l], desc2(), |x| {
            C64::new(-3.0 * (3.0 * x[0]).cos() * x[1].sin(), 0.0)
        })
        .unwrap();
        assert!(d2.sub(&o2).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn origin_node() {
        let f = GridField::zeros(&[8, 4], &[1.0, 2.0], desc2()).unwrap();
        assert_eq!(f.coords(0)[f.origin_index(0)], 0.0);
        assert_eq!(f.coords(1)[f.origin_index(1)], 0.0);
    }

    #[test]
    fn binary_round_trip() {
        let f = GridField::from_fn(&[8, 4], &[1.0, 2.0], desc2(), |x| C64::new(x[0], -x[1])).unwrap();
        let mut buf = Vec::new();
        f.write_binary(&mut buf).unwrap();
        let g = GridField::read_binary(&mut buf.as_slice()).unwrap();
        assert_eq!(g.n, f.n);
        assert_eq!(g.desc, f.desc);
        assert!(g.sub(&f).unwrap().max_abs() < 1e-6);
        assert!(GridField::read_binary(&mut &b"XXXX"[..]).is_err());
    }

    #[test]
    fn rejects_bad_axes() {
        assert!(GridField::zeros(&[6], &[1.0], AnisotropyDescriptor::isotropic(1)).is_err());
        assert!(GridField::zeros(&[2], &[1.0], AnisotropyDescriptor::isotropic(1)).is_err());
        assert!(GridField::zeros(&[8], &[0.0], AnisotropyDescriptor::isotropic(1)).is_err());
    }

    #[test]
    fn decay_tag() {
        let g = GridField::from_fn(&[64], &[10.0], AnisotropyDescriptor::isotropic(1), |x| {
            C64::new((-x[0] * x[0]).exp(), 0.0)
        })
        .unwrap();
        assert!(g.clone().tag_decaying().is_ok());
        let c = GridField::from_fn(&[64], &[10.0], AnisotropyDescriptor::isotropic(1), |_| C64::new(1.0, 0.0)).unwrap();
        assert!(c.tag_decaying().is_err());
    }
}
