#![allow(dead_code)]

use mrlab_core::families::{band_limited_family, packet_family, PacketRanges};
use mrlab_core::lp::{make_generator, AnisotropyDescriptor, LpSequence};
use mrlab_core::traceext::NormalAxis;
use mrlab_core::{GridField, C64};

pub mod validator_table;

pub const PI: f64 = std::f64::consts::PI;

/// Tangential LP depth used for extension experiments; the band is `A 2^N_T`.
pub const N_T: usize = 3;

pub fn normal_axis() -> NormalAxis {
    NormalAxis::new(512, 10.0)
}

pub fn tangential_lps() -> LpSequence {
    make_generator(1.0, 2.0, AnisotropyDescriptor::isotropic(1)).unwrap().with_n_max(N_T)
}

/// Random boundary data on a 256-point periodic box of half-width pi, band-limited to `2^N_T`.
pub fn boundary_family(count: usize, seed: u64) -> Vec<GridField> {
    band_limited_family(&[256], &[PI], &AnisotropyDescriptor::isotropic(1), 2f64.powi(N_T as i32), count, seed).unwrap()
}

/// Smooth decaying 2-d fields: sums of Gaussian packets.
pub fn smooth_family_2d(count: usize, seed: u64) -> Vec<GridField> {
    let r = PacketRanges {
        center: vec![(-1.0, 1.0), (-1.5, 1.5)],
        width: vec![(0.5, 1.0); 2],
        freq: vec![(-2.0, 2.0); 2],
    };
    packet_family(&[256, 256], &[8.0, 8.0], &AnisotropyDescriptor::isotropic(2), &r, 2, count, seed).unwrap()
}

/// Space-time fields on axes `[x1, x2, t]`; `scale` multiplies every grid size.
pub fn spacetime_family(scale: usize, count: usize, seed: u64) -> Vec<GridField> {
    let r = PacketRanges {
        center: vec![(-1.0, 1.0), (-1.5, 1.5), (-1.5, 1.5)],
        width: vec![(0.8, 1.4); 3],
        freq: vec![(-1.5, 1.5); 3],
    };
    let desc = AnisotropyDescriptor::new(vec![(2, 1.0), (1, 1.0)]).unwrap();
    packet_family(&[64 * scale, 32 * scale, 32 * scale], &[6.0; 3], &desc, &r, 2, count, seed).unwrap()
}

pub fn sup_diff(a: &GridField, b: &GridField) -> f64 {
    a.data.iter().zip(b.data.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

pub fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}
