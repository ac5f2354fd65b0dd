mod common;

use common::*;
use mrlab_core::lp::{make_generator, AnisotropyDescriptor, LpSequence};
use mrlab_core::traceext::*;
use mrlab_core::{GridField, MrError, ParamSet, TraceVector, C64};

/// `(2 pi)^{-1} int_1^2 rho_hat(xi) e^{i x xi} d xi` by the trapezoid rule.
fn rho_oracle(r: &RhoFamily, x: f64) -> C64 {
    let n = 4000;
    let h = 1.0 / n as f64;
    let s: C64 = (0..=n)
        .map(|i| {
            let xi = 1.0 + i as f64 * h;
            let w = if i == 0 || i == n { 0.5 } else { 1.0 };
            C64::from_polar(w * r.rho_hat(xi), x * xi)
        })
        .sum();
    s * (h / (2.0 * PI))
}

#[test]
fn rho_hat_vanishes_outside_unit_band() {
    for m in 0..=3 {
        let r = make_rho(m).unwrap();
        for i in 0..=2000 {
            let xi = -3.0 + 7.0 * i as f64 / 2000.0;
            if !(0.99..=2.01).contains(&xi) {
                assert!(r.rho_hat(xi).abs() < 1e-14, "m={m} xi={xi}");
            }
        }
        assert!(r.condition.is_finite() && r.condition < 1e12);
    }
}

#[test]
fn rho_matches_direct_quadrature() {
    for m in 0..=3 {
        let r = make_rho(m).unwrap();
        for i in 0..=80 {
            let x = -20.0 + 0.5 * i as f64;
            let (a, b) = (r.rho(x), rho_oracle(&r, x));
            assert!((a - b).norm() < 1e-10 * (1.0 + b.norm()), "m={m} x={x}: {a} vs {b}");
        }
    }
}

#[test]
fn rho_derivatives_vanish_at_origin() {
    // finite differences of the quadrature oracle
    let r = make_rho(2).unwrap();
    let h = 1e-3;
    let f = |x: f64| rho_oracle(&r, x);
    let d1 = (f(h) - f(-h)) / (2.0 * h);
    let d2 = (f(h) - f(0.0) * 2.0 + f(-h)) / (h * h);
    assert!((f(0.0) - 1.0).norm() < 1e-10);
    assert!(d1.norm() < 1e-4 && d2.norm() < 1e-3, "{d1} {d2}");
}

fn shell_zero_boundary() -> GridField {
    // lattice modes |k| <= 1 sit where phi_hat_0 = 1
    GridField::from_fn(&[64], &[PI], AnisotropyDescriptor::isotropic(1), |x| {
        C64::new(0.7 + x[0].cos(), 0.4 * x[0].sin())
    })
    .unwrap()
}

#[test]
fn ext_on_shell_zero_is_a_product() {
    let g = shell_zero_boundary();
    let normal = NormalAxis::new(256, 10.0);
    let lps_t = make_generator(1.0, 2.0, AnisotropyDescriptor::isotropic(1)).unwrap().with_n_max(2);
    let r = make_rho(1).unwrap();
    let x1 = normal.coords();
    for j in 0..=1 {
        let u = ext_j(&g, j, 1.0, &lps_t, &r, &normal).unwrap();
        assert_eq!(u.n, vec![256, 64]);
        let mut err = 0.0f64;
        for (i, &x) in x1.iter().enumerate() {
            let prof = rho_oracle(&r, x) * x.powi(j as i32) * normal.collar.value(x);
            for k in 0..64 {
                err = err.max((u.data[[i, k]] - prof * g.data[[k]]).norm());
            }
        }
        assert!(err < 1e-9, "j={j} err={err}");
    }
}

#[test]
fn ext_of_zero_is_zero() {
    let g = shell_zero_boundary().scale(c(0.0));
    let u = ext_j(&g, 0, 1.0, &tangential_lps(), &make_rho(0).unwrap(), &NormalAxis::new(128, 10.0)).unwrap();
    assert_eq!(u.max_abs(), 0.0);
}

#[test]
fn ext_order_above_family_is_rejected() {
    let g = shell_zero_boundary();
    let e = ext_j(&g, 2, 1.0, &tangential_lps(), &make_rho(1).unwrap(), &NormalAxis::new(128, 10.0));
    assert!(matches!(e, Err(MrError::OrderTooLarge { j: 2, m: 1 })));
}

fn gauss2(x: &[f64]) -> f64 {
    (-(x[0] * x[0] + x[1] * x[1])).exp()
}

#[test]
fn trace_of_gaussian_is_restriction() {
    let d = AnisotropyDescriptor::isotropic(2);
    let f = GridField::from_fn(&[256, 256], &[6.0, 6.0], d, |x| c(gauss2(x))).unwrap();
    let lps = LpSequence::default_for(&f).unwrap();
    let (tr, tail) = trace_working_with_tail(&f, &lps).unwrap();
    let xs = tr.coords(0);
    let err = xs.iter().enumerate().map(|(i, &x)| (tr.data[[i]] - c((-x * x).exp())).norm()).fold(0.0, f64::max);
    assert!(err < 1e-6, "{err}");
    assert!(tail < 1e-6, "{tail}");
}

#[test]
fn trace_m_of_x1_gaussian() {
    let d = AnisotropyDescriptor::isotropic(2);
    let f = GridField::from_fn(&[256, 256], &[6.0, 6.0], d, |x| c(x[0] * gauss2(x))).unwrap();
    let lps = LpSequence::default_for(&f).unwrap();
    let tv = trace_m(&f, 1, &lps).unwrap();
    let xs = tv.entries[0].coords(0);
    assert!(tv.entries[0].max_abs() < 1e-8);
    let err = xs.iter().enumerate().map(|(i, &x)| (tv.entries[1].data[[i]] - c((-x * x).exp())).norm()).fold(0.0, f64::max);
    assert!(err < 1e-6, "{err}");
}

#[test]
fn trace_of_odd_field_vanishes() {
    let d = AnisotropyDescriptor::isotropic(2);
    let f = GridField::from_fn(&[128, 128], &[6.0, 6.0], d, |x| c(x[0].sin() * x[1].cos() * gauss2(x))).unwrap();
    let tr = trace_working(&f, &LpSequence::default_for(&f).unwrap()).unwrap();
    assert!(tr.max_abs() < 1e-8);
}

#[test]
fn trace_of_shell_zero_field_is_exact() {
    let d = AnisotropyDescriptor::isotropic(2);
    let f = GridField::from_fn(&[32, 32], &[PI, PI], d, |x| C64::new(1.0 + 0.5 * x[0].cos(), x[1].sin())).unwrap();
    let tr = trace_working(&f, &LpSequence::default_for(&f).unwrap()).unwrap();
    let exact = f.restrict(0, f.origin_index(0)).unwrap();
    assert!(sup_diff(&tr, &exact) < 1e-12);
}

#[test]
fn trace_agrees_with_restriction_on_random_packets() {
    for f in smooth_family_2d(4, 11) {
        let tr = trace_working(&f, &LpSequence::default_for(&f).unwrap()).unwrap();
        let exact = f.restrict(0, f.origin_index(0)).unwrap();
        let e = sup_diff(&tr, &exact);
        assert!(e < 1e-6, "{e} {}", f.max_abs());
    }
}

#[test]
fn trace_and_extension_are_linear() {
    let fam = smooth_family_2d(2, 5);
    let (f, g) = (&fam[0], &fam[1]);
    let a = C64::new(0.3, -1.2);
    let lps = LpSequence::default_for(f).unwrap();
    let lhs = trace_m(&f.scale(a).add(g).unwrap(), 2, &lps).unwrap();
    let (tf, tg) = (trace_m(f, 2, &lps).unwrap(), trace_m(g, 2, &lps).unwrap());
    for j in 0..=2 {
        let rhs = tf.entries[j].scale(a).add(&tg.entries[j]).unwrap();
        assert!(sup_diff(&lhs.entries[j], &rhs) < 1e-12 * (1.0 + rhs.max_abs()));
    }

    let b = boundary_family(4, 3);
    let (lps_t, rho, normal) = (tangential_lps(), make_rho(1).unwrap(), NormalAxis::new(256, 10.0));
    let v1 = TraceVector::new(vec![b[0].clone(), b[1].clone()]).unwrap();
    let v2 = TraceVector::new(vec![b[2].clone(), b[3].clone()]).unwrap();
    let vs = TraceVector::new(vec![b[0].scale(a).add(&b[2]).unwrap(), b[1].scale(a).add(&b[3]).unwrap()]).unwrap();
    let e1 = ext_vector(&v1, 1.0, &lps_t, &rho, &normal).unwrap();
    let e2 = ext_vector(&v2, 1.0, &lps_t, &rho, &normal).unwrap();
    let es = ext_vector(&vs, 1.0, &lps_t, &rho, &normal).unwrap();
    let rhs = e1.scale(a).add(&e2).unwrap();
    assert!(sup_diff(&es, &rhs) < 1e-12 * rhs.max_abs());

    // a single nonzero entry reduces to ext_j
    let zero = b[0].scale(c(0.0));
    let single = TraceVector::new(vec![zero, b[1].clone()]).unwrap();
    let ev = ext_vector(&single, 1.0, &lps_t, &rho, &normal).unwrap();
    let ej = ext_j(&b[1], 1, 1.0, &lps_t, &rho, &normal).unwrap();
    assert!(sup_diff(&ev, &ej) < 1e-14 * ej.max_abs());
}

#[test]
fn doubling_a1_reindexes_shells() {
    // one nonzero block at shell n with exponent 2 a1 equals the block at shell 2n with a1
    let g = shell_zero_boundary();
    let zero = g.scale(c(0.0));
    let rho = make_rho(2).unwrap();
    let x1: Vec<f64> = (0..200).map(|i| -3.0 + 0.03 * i as f64).collect();
    for j in 0..=2 {
        for n in 1..=2 {
            let mut at_n = vec![zero.clone(); 2 * n + 1];
            at_n[n] = g.clone();
            let mut at_2n = vec![zero.clone(); 2 * n + 1];
            at_2n[2 * n] = g.clone();
            let a = ext_profile(&at_n, j, 2.0, &rho, None, &x1).unwrap();
            let b = ext_profile(&at_2n, j, 1.0, &rho, None, &x1).unwrap();
            let err = a.iter().zip(b.iter()).map(|(u, v)| (u - v).norm()).fold(0.0, f64::max);
            assert!(err < 1e-13, "j={j} n={n} err={err}");
        }
    }
}

#[test]
fn biorthogonality_small_family() {
    let fam = boundary_family(3, 21);
    for m in 0..=3 {
        let mat = check_biorthogonality(m, &fam, 1.0, &tangential_lps(), &normal_axis()).unwrap();
        assert_eq!(mat.len(), m + 1);
        for row in &mat {
            for &v in row {
                assert!(v < 1e-5, "m={m}: {mat:?}");
            }
        }
    }
    // invariant under g -> c g
    let scaled: Vec<GridField> = fam.iter().map(|g| g.scale(C64::new(-3.5, 2.0))).collect();
    let a = check_biorthogonality(1, &fam, 1.0, &tangential_lps(), &normal_axis()).unwrap();
    let b = check_biorthogonality(1, &scaled, 1.0, &tangential_lps(), &normal_axis()).unwrap();
    for (ra, rb) in a.iter().zip(&b) {
        for (x, y) in ra.iter().zip(rb) {
            assert!((x - y).abs() < 1e-9);
        }
    }
}

#[test]
fn continuity_bracket_is_finite() {
    let fam = spacetime_family(1, 6, 7);
    let ps = ParamSet { gamma: 2.0, k: 1, k1: 2, ell: 1, m: 0, ..Default::default() };
    let b = trace_continuity_ratio(&fam, &ps).unwrap();
    assert_eq!(b.count, 6);
    assert!(b.min > 0.0 && b.spread() <= 100.0, "{b:?}");

    let est = trace_estimate(&fam[0].scale(c(3.0)), &ps).unwrap();
    let base = trace_estimate(&fam[0], &ps).unwrap();
    assert!((est.ratio().unwrap() - base.ratio().unwrap()).abs() < 1e-10 * base.ratio().unwrap());

    let bad = ParamSet { gamma: 3.5, ..ps };
    assert!(matches!(trace_continuity_ratio(&fam, &bad), Err(MrError::Inadmissible { .. })));
}
