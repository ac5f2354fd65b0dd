use mrlab_core::geometry::{make_dks_pullback, BoundaryPreset, PullbackMap, SpecialDomain};
use mrlab_core::heat::{
    default_grading, manufactured_strip, mr_stability_study, solve_homogeneous, solve_inhomogeneous,
    solve_inhomogeneous_with, HeatData, HeatProblem, InitialGuess, StripGrid, StripOperator,
};
use mrlab_core::{MrError, ParamSet};
use ndarray::{Array2, Array3};
use std::f64::consts::PI;

fn params(gamma: f64, k: u32) -> ParamSet {
    ParamSet { p: 2.0, q: 2.0, gamma, mu: 0.0, kappa: 0.5, k, k1: 2, ell: 1, m: 0, r: 1, d: 2 }
}

fn flat() -> PullbackMap {
    make_dks_pullback(&SpecialDomain::flat(), None).unwrap()
}

fn strip(n: usize, nt: usize, grading: f64) -> StripGrid {
    StripGrid { n1: n, depth: 4.0, n2: n, l2: 4.0, nt, horizon: 1.0, grading }
}

fn line(n: usize, nt: usize, horizon: f64) -> StripGrid {
    StripGrid { n1: n, depth: 1.0, n2: 1, l2: 1.0, nt, horizon, grading: 0.0 }
}

fn sample(grid: &StripGrid, f: impl Fn(f64, f64, f64) -> f64) -> Array3<f64> {
    let (t, y1, y2) = (grid.times(), grid.nodes1(), grid.nodes2());
    Array3::from_shape_fn((grid.nt + 1, grid.n1 + 1, grid.n2), |(n, i, k)| f(t[n], y1[i], y2[k]))
}

fn max_err(u: &Array3<f64>, grid: &StripGrid, exact: impl Fn(f64, f64, f64) -> f64) -> f64 {
    let e = sample(grid, exact);
    (u - &e).iter().map(|v| v.abs()).fold(0.0, f64::max)
}

fn orders(errs: &[f64]) -> Vec<f64> {
    errs.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

#[test]
fn zero_forcing_gives_zero() {
    let g = line(16, 8, 1.0);
    let op = StripOperator::new(&flat(), &g).unwrap();
    let (u, st) = solve_homogeneous(&Array3::zeros((9, 17, 1)), &op, InitialGuess::Previous).unwrap();
    assert!(u.iter().all(|v| *v == 0.0));
    assert_eq!(st.residual, 0.0);

    let p = HeatProblem::new(flat(), strip(16, 4, 0.0), params(0.5, 0), HeatData::zero(), 1).unwrap();
    let (u, rep) = solve_inhomogeneous(&p).unwrap();
    assert!(u.iter().all(|v| *v == 0.0));
    assert_eq!(rep.ratio, None);
}

#[test]
fn one_dimensional_manufactured_second_order() {
    // u* = sin(pi x)(1 - e^{-t}), f = (d_t - d_xx) u*
    let exact = |t: f64, x: f64, _: f64| (PI * x).sin() * (1.0 - (-t).exp());
    let force = |t: f64, x: f64, _: f64| (PI * x).sin() * ((-t).exp() + PI * PI * (1.0 - (-t).exp()));
    let errs: Vec<f64> = [8usize, 16, 32]
        .iter()
        .map(|&n| {
            let g = line(n, n * n, 1.0);
            let op = StripOperator::new(&flat(), &g).unwrap();
            let (u, st) = solve_homogeneous(&sample(&g, force), &op, InitialGuess::Previous).unwrap();
            assert!(st.residual < 1e-10, "{st:?}");
            max_err(&u, &g, exact)
        })
        .collect();
    for o in orders(&errs) {
        assert!(o >= 1.8, "orders {:?} errors {errs:?}", orders(&errs));
    }
}

#[test]
fn steady_state_limit() {
    let g = line(64, 100, 5.0);
    let op = StripOperator::new(&flat(), &g).unwrap();
    let (u, _) = solve_homogeneous(&sample(&g, |_, x, _| (PI * x).sin()), &op, InitialGuess::Previous).unwrap();
    let x = g.nodes1();
    let err = (0..=64).map(|i| (u[[100, i, 0]] - (PI * x[i]).sin() / (PI * PI)).abs()).fold(0.0, f64::max);
    assert!(err < 1e-3, "{err}");
}

#[test]
fn strip_manufactured_second_order_with_boundary_data() {
    for grading in [0.0, 2.0] {
        let mut errs = Vec::new();
        for n in [16usize, 32, 64] {
            let (data, exact) = manufactured_strip(4.0, 4.0);
            let grid = strip(n, 4, grading);
            let p = HeatProblem::new(flat(), grid, params(2.0, 0), data, 0).unwrap();
            let (u, rep) = solve_inhomogeneous(&p).unwrap();
            assert!(rep.trace_residual < 1e-3, "{rep:?}");
            assert!(rep.initial_residual < 1e-10);
            assert!(rep.pde_residual < 1e-8 * rep.f_norm, "{rep:?}");
            errs.push(max_err(&u, &grid, |t, a, b| exact(t, a, b)));
        }
        for o in orders(&errs) {
            assert!(o >= 1.8, "grading {grading}: errors {errs:?}");
        }
    }
}

#[test]
fn pulled_back_laplacian_on_bump_domain() {
    let dom = SpecialDomain::new(BoundaryPreset::GaussianBump { amplitude: 0.3, sigma: 0.8, radius: 3.0 }).unwrap();
    let map = make_dks_pullback(&dom, None).unwrap();
    let grid = StripGrid { n1: 128, depth: 4.0, n2: 128, l2: 4.0, nt: 1, horizon: 1.0, grading: 0.0 };
    let op = StripOperator::new(&map, &grid).unwrap();
    let (y1, y2) = (grid.nodes1(), grid.nodes2());
    // x_1 is harmonic and |x|^2 has Laplacian 4
    let x1 = Array2::from_shape_fn((129, 128), |(i, k)| map.inverse(&[y1[i], y2[k]])[0]);
    let r2 = Array2::from_shape_fn((129, 128), |(i, k)| {
        let x = map.inverse(&[y1[i], y2[k]]);
        x[0] * x[0] + x[1] * x[1]
    });
    let (l1, l2) = (op.apply(&x1), op.apply(&r2));
    let (mut e1, mut e2) = (0.0f64, 0.0f64);
    for i in 1..128 {
        // stay away from the periodic seam where |x|^2 is not periodic
        for k in 16..112 {
            e1 = e1.max(l1[[i, k]].abs());
            e2 = e2.max((l2[[i, k]] - 4.0).abs());
        }
    }
    assert!(e1 < 2e-2 && e2 < 2e-2, "{e1} {e2}");
}

#[test]
fn ratio_is_scale_invariant_and_solution_linear() {
    let grid = strip(16, 8, 0.0);
    let a = HeatData::random(5, 0, 4.0, 4.0, 1.0);
    let b = HeatData::random(5, 1, 4.0, 4.0, 1.0);
    let solve = |d: &HeatData| solve_inhomogeneous(&HeatProblem::new(flat(), grid, params(0.5, 1), d.clone(), 1).unwrap()).unwrap();
    let (ua, ra) = solve(&a);
    let (_, rs) = solve(&a.scaled(1e3));
    let (ca, cs) = (ra.ratio.unwrap(), rs.ratio.unwrap());
    assert!((ca - cs).abs() <= 1e-9 * ca, "{ca} {cs}");

    let (ub, _) = solve(&b);
    let (uc, _) = solve(&a.scaled(2.0).plus(&b.scaled(-3.0)));
    let lin = &ua * 2.0 - &ub * 3.0;
    let scale = lin.iter().map(|v| v.abs()).fold(0.0, f64::max);
    assert!((&uc - &lin).iter().map(|v| v.abs()).fold(0.0, f64::max) < 1e-9 * scale);
}

#[test]
fn different_initial_iterates_agree() {
    let p = HeatProblem::new(flat(), strip(16, 8, 0.0), params(2.0, 0), HeatData::random(2, 0, 4.0, 4.0, 1.0), 1).unwrap();
    let (u0, _) = solve_inhomogeneous_with(&p, InitialGuess::Zero).unwrap();
    let (u1, _) = solve_inhomogeneous_with(&p, InitialGuess::Random(11)).unwrap();
    let d = (&u0 - &u1).iter().map(|v| v.abs()).fold(0.0, f64::max);
    assert!(d < 1e-8, "{d}");
}

#[test]
fn refuses_critical_and_incompatible_data() {
    let grid = strip(16, 4, 0.0);
    let e = HeatProblem::new(flat(), grid, params(1.0, 0), HeatData::zero(), 1).unwrap_err();
    assert!(matches!(e, MrError::CriticalCompatibility), "{e:?}");
    let bad = HeatData::new(|_, _, _| 0.0, |_, _| 1.0);
    // gamma = 0.5 requires g(0) = 0, gamma = 2 does not
    assert!(matches!(HeatProblem::new(flat(), grid, params(0.5, 0), bad.clone(), 1), Err(MrError::SideCondition(_))));
    assert!(HeatProblem::new(flat(), grid, params(2.0, 0), bad, 1).is_ok());
    assert!(HeatProblem::new(flat(), grid, params(3.5, 0), HeatData::zero(), 1).is_err());
}

#[test]
fn stability_study_small_family() {
    let family: Vec<HeatData> = (0..4).map(|i| HeatData::random(3, i, 4.0, 4.0, 1.0)).collect();
    for (gamma, k) in [(0.5, 0), (2.0, 1)] {
        let ps = params(gamma, k);
        let grid = StripGrid { grading: default_grading(&ps), ..strip(16, 8, 0.0) };
        let base = HeatProblem::new(flat(), grid, ps, HeatData::zero(), 1).unwrap();
        let t = mr_stability_study(&base, &family, 2).unwrap();
        assert!(t.spread.is_finite() && t.drift <= 2.0, "{gamma} {k}: {t:?}");
    }
}
