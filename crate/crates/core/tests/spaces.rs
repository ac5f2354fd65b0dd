mod common;

use mrlab_core::families::{band_limited, member_rng};
use mrlab_core::lp::{AnisotropyDescriptor, LpSequence};
use mrlab_core::spaces::{besov_tl_norm, check_intersection_representation, space_norm, LpKind, SpaceSpec};
use mrlab_core::{GridField, WeightSpec, C64};
use proptest::prelude::*;

fn specs() -> Vec<SpaceSpec> {
    vec![
        SpaceSpec::LebesgueMixed { pvec: vec![2.0] },
        SpaceSpec::Sobolev { k: 2, p: 3.0 },
        SpaceSpec::Bessel { s: 1.5, p: 2.0 },
        SpaceSpec::Besov { s: 0.5, p: 2.0, q: 3.0 },
        SpaceSpec::TriebelLizorkin { s: 1.0, p: 3.0, q: 2.0 },
        SpaceSpec::Intersection(
            Box::new(SpaceSpec::Sobolev { k: 1, p: 2.0 }),
            Box::new(SpaceSpec::Besov { s: 0.5, p: 2.0, q: 2.0 }),
        ),
    ]
}

fn field(seed: u64, i: usize) -> GridField {
    band_limited(&[32, 32], &[4.0, 4.0], AnisotropyDescriptor::isotropic(2), 5.0, &mut member_rng(seed, i)).unwrap()
}

/// Only frequencies with `|xi| > B`, so the zeroth block vanishes.
fn shell_field(seed: u64) -> GridField {
    let f = band_limited(&[64], &[6.0], AnisotropyDescriptor::isotropic(1), 12.0, &mut member_rng(seed, 0)).unwrap();
    f.apply_multiplier(|xi| if xi[0].abs() > 2.0 { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]
    #[test]
    fn norm_axioms(seed in 0u64..10_000, c in -5.0f64..5.0) {
        let (f, g) = (field(seed, 0), field(seed, 1));
        let w = WeightSpec::halfspace(2, 0.5);
        for spec in specs() {
            let nf = space_norm(&f, &spec, &w).unwrap();
            let ncf = space_norm(&f.scale(C64::new(c, 0.0)), &spec, &w).unwrap();
            prop_assert!((ncf - c.abs() * nf).abs() <= 1e-10 * nf.max(1.0), "{spec:?}");
            let ns = space_norm(&f.add(&g).unwrap(), &spec, &w).unwrap();
            let ng = space_norm(&g, &spec, &w).unwrap();
            prop_assert!(ns <= (nf + ng) * (1.0 + 1e-12), "{spec:?}");
        }
    }

    #[test]
    fn besov_grows_with_smoothness(seed in 0u64..10_000, s in 0.0f64..2.0, ds in 0.01f64..1.0) {
        let f = shell_field(seed);
        let lps = LpSequence::default_for(&f).unwrap();
        let w = WeightSpec::unweighted(1);
        for kind in [LpKind::Besov, LpKind::TriebelLizorkin] {
            let lo = besov_tl_norm(&f, s, 2.0, 2.0, &w, &lps, kind).unwrap();
            let hi = besov_tl_norm(&f, s + ds, 2.0, 2.0, &w, &lps, kind).unwrap();
            prop_assert!(lo <= hi * (1.0 + 1e-12));
        }
    }

    #[test]
    fn besov_equals_tl_on_the_diagonal(seed in 0u64..10_000, s in -1.0f64..2.0, p in 1.2f64..4.0) {
        let f = field(seed, 0);
        let lps = LpSequence::default_for(&f).unwrap();
        let w = WeightSpec::halfspace(2, 0.5);
        let b = besov_tl_norm(&f, s, p, p, &w, &lps, LpKind::Besov).unwrap();
        let t = besov_tl_norm(&f, s, p, p, &w, &lps, LpKind::TriebelLizorkin).unwrap();
        prop_assert!((b - t).abs() <= 1e-10 * b);
    }
}

#[test]
fn intersection_bracket_ignores_scaling() {
    let fam = common::spacetime_family(1, 6, 17);
    let w = WeightSpec::unweighted(3);
    let b = check_intersection_representation(&fam, 1.0, 2.0, 2.0, &w).unwrap();
    let scaled: Vec<GridField> = fam.iter().map(|f| f.scale(C64::new(-7.5, 0.0))).collect();
    let c = check_intersection_representation(&scaled, 1.0, 2.0, 2.0, &w).unwrap();
    assert!((b.min - c.min).abs() <= 1e-12 * b.min && (b.max - c.max).abs() <= 1e-12 * b.max);
}
