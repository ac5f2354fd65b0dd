//! Cell quadrature with exact integration of power weights.
//!
//! Each node owns the cell between the midpoints to its neighbours. The field is
//! treated as constant on the cell while `|x|^gamma` is integrated exactly, so no
//! sample is ever multiplied by the (possibly infinite) weight value at the origin.

use serde::{Deserialize, Serialize};

use crate::error::{MrError, Result};

/// Measure attached to one grid axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum AxisWeight {
    /// Lebesgue measure on the whole periodic axis.
    Plain,
    /// `|x|^gamma dx` on the whole axis.
    Power(f64),
    /// `x^gamma dx` restricted to `x >= 0`; `None` means `gamma = 0`.
    HalfLine(Option<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightSpec {
    pub axes: Vec<AxisWeight>,
}

impl WeightSpec {
    pub fn unweighted(d: usize) -> Self {
        Self { axes: vec![AxisWeight::Plain; d] }
    }

    /// Half-space `x_1 > 0` with `w_gamma = x_1^gamma`.
    pub fn halfspace(d: usize, gamma: f64) -> Self {
        let mut axes = vec![AxisWeight::Plain; d];
        axes[0] = AxisWeight::HalfLine(Some(gamma));
        Self { axes }
    }

    pub fn with_axis(mut self, axis: usize, w: AxisWeight) -> Self {
        self.axes[axis] = w;
        self
    }

    pub fn remove_axis(&self, axis: usize) -> Self {
        let mut axes = self.axes.clone();
        axes.remove(axis);
        Self { axes }
    }
}

/// `int_a^b |x|^gamma dx` for any `a <= b`, `gamma > -1`.
pub fn power_integral(a: f64, b: f64, gamma: f64) -> f64 {
    let g1 = gamma + 1.0;
    let prim = |x: f64| x.signum() * x.abs().powf(g1) / g1;
    if gamma == 0.0 {
        b - a
    } else {
        prim(b) - prim(a)
    }
}

/// Cell measures for a uniform periodic axis with nodes `-L + k h`.
pub fn axis_measures(n: usize, half_width: f64, w: AxisWeight) -> Result<Vec<f64>> {
    let h = 2.0 * half_width / n as f64;
    let origin = n / 2;
    let x = |k: usize| -half_width + k as f64 * h;
    match w {
        AxisWeight::Plain => Ok(vec![h; n]),
        AxisWeight::Power(g) => {
            if g <= -1.0 {
                return Err(MrError::NonIntegrableWeight(g));
            }
            Ok((0..n).map(|k| power_integral(x(k) - 0.5 * h, x(k) + 0.5 * h, g)).collect())
        }
        AxisWeight::HalfLine(g) => {
            let g = g.unwrap_or(0.0);
            if g <= -1.0 {
                return Err(MrError::NonIntegrableWeight(g));
            }
            Ok((0..n)
                .map(|k| match k.cmp(&origin) {
                    std::cmp::Ordering::Less => 0.0,
                    std::cmp::Ordering::Equal => power_integral(0.0, 0.5 * h, g),
                    std::cmp::Ordering::Greater => power_integral(x(k) - 0.5 * h, x(k) + 0.5 * h, g),
                })
                .collect())
        }
    }
}

/// Cell measures for arbitrary increasing nodes on `[lo, hi]` with weight `(x - lo)^gamma`.
pub fn nonuniform_measures(nodes: &[f64], lo: f64, hi: f64, gamma: Option<f64>) -> Result<Vec<f64>> {
    let g = gamma.unwrap_or(0.0);
    if g <= -1.0 {
        return Err(MrError::NonIntegrableWeight(g));
    }
    let n = nodes.len();
    Ok((0..n)
        .map(|k| {
            let a = if k == 0 { lo } else { 0.5 * (nodes[k - 1] + nodes[k]) };
            let b = if k + 1 == n { hi } else { 0.5 * (nodes[k] + nodes[k + 1]) };
            let (a, b) = (a.max(lo) - lo, b.min(hi) - lo);
            if b <= a {
                0.0
            } else {
                power_integral(a, b, g)
            }
        })
        .collect())
}

/// Iterated mixed norm of nonnegative samples `v` (row-major with `shape`).
///
/// `groups[j]` is the number of leading axes reduced with exponent `pvec[j]`; the first
/// group is innermost. `measures[i]` are the cell measures of axis `i`.
pub fn mixed_norm_raw(v: &[f64], shape: &[usize], measures: &[Vec<f64>], groups: &[usize], pvec: &[f64]) -> f64 {
    debug_assert_eq!(groups.iter().sum::<usize>(), shape.len());
    let mut cur = v.to_vec();
    let mut axis = 0usize;
    for (&g, &p) in groups.iter().zip(pvec) {
        let lead: usize = shape[axis..axis + g].iter().product();
        let rest: usize = shape[axis + g..].iter().product();
        // measure of each leading multi-index
        let mut mu = vec![1.0; lead];
        let mut stride = lead;
        for ax in axis..axis + g {
            stride /= shape[ax];
            for (i, m) in mu.iter_mut().enumerate() {
                *m *= measures[ax][(i / stride) % shape[ax]];
            }
        }
        let mut out = vec![0.0; rest];
        for (i, &m) in mu.iter().enumerate() {
            if m == 0.0 {
                continue;
            }
            let row = &cur[i * rest..(i + 1) * rest];
            if p == 2.0 {
                for (o, &x) in out.iter_mut().zip(row) {
                    *o += m * x * x;
                }
            } else if p == 1.0 {
                for (o, &x) in out.iter_mut().zip(row) {
                    *o += m * x;
                }
            } else {
                for (o, &x) in out.iter_mut().zip(row) {
                    if x > 0.0 {
                        *o += m * x.powf(p);
                    }
                }
            }
        }
        let inv = 1.0 / p;
        for o in out.iter_mut() {
            *o = if p == 2.0 { o.sqrt() } else { o.powf(inv) };
        }
        cur = out;
        axis += g;
    }
    cur[0]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_integral_signs() {
        assert!((power_integral(0.0, 2.0, 1.0) - 2.0).abs() < 1e-15);
        assert!((power_integral(-2.0, 0.0, 1.0) - 2.0).abs() < 1e-15);
        assert!((power_integral(-1.0, 1.0, 0.5) - 2.0 / 1.5).abs() < 1e-15);
    }

    #[test]
    fn half_line_measures_sum() {
        let m = axis_measures(64, 4.0, AxisWeight::HalfLine(Some(0.5))).unwrap();
        let total: f64 = m.iter().sum();
        // cells cover [0, L - h/2]
        let h = 8.0 / 64.0;
        assert!((total - power_integral(0.0, 4.0 - 0.5 * h, 0.5)).abs() < 1e-13);
        assert!(axis_measures(8, 1.0, AxisWeight::HalfLine(Some(-1.0))).is_err());
    }

    #[test]
    fn nonuniform_cover() {
        let nodes = [0.0, 0.1, 0.3, 0.7, 1.0];
        let m = nonuniform_measures(&nodes, 0.0, 1.0, Some(2.0)).unwrap();
        assert!((m.iter().sum::<f64>() - 1.0 / 3.0).abs() < 1e-15);
    }
}
