//! Fixtures shared by the criterion benches.

use std::f64::consts::PI;

use mrlab_core::families::{band_limited_family, packet_family, PacketRanges};
use mrlab_core::geometry::{make_dks_pullback, SpecialDomain};
use mrlab_core::heat::{manufactured_strip, HeatProblem, StripGrid};
use mrlab_core::lp::AnisotropyDescriptor;
use mrlab_core::{GridField, ParamSet};

/// A sum of two Gaussian packets on an `n x n` grid of half-width 8.
pub fn packet_2d(n: usize) -> GridField {
    let r = PacketRanges { center: vec![(-1.0, 1.0); 2], width: vec![(0.5, 1.0); 2], freq: vec![(-2.0, 2.0); 2] };
    packet_family(&[n, n], &[8.0, 8.0], &AnisotropyDescriptor::isotropic(2), &r, 2, 1, 0).unwrap().remove(0)
}

/// Band-limited boundary datum on 256 points of half-width pi.
pub fn boundary_datum() -> GridField {
    band_limited_family(&[256], &[PI], &AnisotropyDescriptor::isotropic(1), 8.0, 1, 0).unwrap().remove(0)
}

/// Manufactured heat problem on an `n x n` strip with `nt` steps.
pub fn heat_problem(n: usize, nt: usize) -> HeatProblem {
    let ps = ParamSet { gamma: 2.0, kappa: 0.5, ..Default::default() };
    let grid = StripGrid { n1: n, depth: 4.0, n2: n, l2: 4.0, nt, horizon: 1.0, grading: 2.0 };
    let (data, _) = manufactured_strip(grid.depth, grid.l2);
    HeatProblem::new(make_dks_pullback(&SpecialDomain::flat(), None).unwrap(), grid, ps, data, 0).unwrap()
}
