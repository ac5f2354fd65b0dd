//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#[path = "../../core/tests/common/validator_table.rs"]
mod validator_table;

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::{Command, ExitCode};
use std::time::Instant;

use mrlab_core::families::{band_limited_family, packet_family, PacketRanges};
use mrlab_core::geometry::{
    distance_brackets, domain_extension, domain_trace, level_drift, make_dks_pullback, non_tangentiality,
    pulled_vector_field, sample_cloud, Atlas, BoundaryPreset, GeometryGrid, SpecialDomain,
};
use mrlab_core::heat::{
    default_grading, manufactured_strip, mr_stability_study, solve_inhomogeneous, HeatData, HeatProblem, StripGrid,
};
use mrlab_core::lp::{lp_reconstruct, make_generator, AnisotropyDescriptor, LpSequence};
use mrlab_core::params::{validate_domain_trace, validate_halfspace_trace, validate_heat_theorem, validate_intro_trace};
use mrlab_core::spaces::{check_intersection_representation, Bracket};
use mrlab_core::traceext::{check_biorthogonality, trace_continuity_ratio, trace_working, NormalAxis};
use mrlab_core::{AxisWeight, GridField, ParamSet, TraceVector, WeightSpec};
use ndarray::Array3;

type Verdict = (bool, String);
type Criterion = (&'static str, fn() -> Verdict);

fn sup_diff(a: &GridField, b: &GridField) -> f64 {
    a.data.iter().zip(b.data.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn drift(b: &[Bracket]) -> f64 {
    b.windows(2).map(|w| w[1].drift_from(&w[0])).fold(1.0, f64::max)
}

fn smooth_2d(count: usize, seed: u64) -> Vec<GridField> {
    let r = PacketRanges { center: vec![(-1.0, 1.0), (-1.5, 1.5)], width: vec![(0.5, 1.0); 2], freq: vec![(-2.0, 2.0); 2] };
    packet_family(&[256, 256], &[8.0, 8.0], &AnisotropyDescriptor::isotropic(2), &r, 2, count, seed).unwrap()
}

fn lp_partition() -> Verdict {
    let fam = smooth_2d(10, 1);
    let lps = LpSequence::default_for(&fam[0]).unwrap();
    let scale = 2f64.powi(-(lps.n_max as i32));
    let tele = lps
        .radii_on_grid(&fam[0])
        .iter()
        .map(|&r| {
            let direct: f64 = (0..=lps.n_max).map(|n| lps.phi_hat_n_radial(n, r)).sum();
            (direct - lps.phi_hat_radial(scale * r)).abs()
        })
        .fold(0.0, f64::max);
    let recon = fam
        .iter()
        .map(|f| sup_diff(&lp_reconstruct(f, &lps).unwrap(), f) / f.max_abs())
        .fold(0.0, f64::max);
    (tele <= 1e-12 && recon < 1e-8, format!("telescoping {tele:.2e} (<= 1e-12), reconstruction {recon:.2e} (< 1e-8)"))
}

fn biorthogonality() -> Verdict {
    let fam = band_limited_family(&[256], &[PI], &AnisotropyDescriptor::isotropic(1), 8.0, 20, 2).unwrap();
    let lps_t = make_generator(1.0, 2.0, AnisotropyDescriptor::isotropic(1)).unwrap().with_n_max(3);
    let worst = (0..=3)
        .map(|m| {
            let mat = check_biorthogonality(m, &fam, 1.0, &lps_t, &NormalAxis::new(512, 10.0)).unwrap();
            mat.iter().flatten().copied().fold(0.0, f64::max)
        })
        .fold(0.0, f64::max);
    (worst < 1e-5, format!("max entry over m = 0..3: {worst:.2e} (< 1e-5)"))
}

fn restriction() -> Verdict {
    let worst = smooth_2d(10, 3)
        .iter()
        .map(|f| {
            let tr = trace_working(f, &LpSequence::default_for(f).unwrap()).unwrap();
            sup_diff(&tr, &f.restrict(0, f.origin_index(0)).unwrap())
        })
        .fold(0.0, f64::max);
    (worst < 1e-6, format!("sup error {worst:.2e} (< 1e-6)"))
}

fn spacetime(scale: usize, a2: f64, count: usize, seed: u64) -> Vec<GridField> {
    let r = PacketRanges { center: vec![(-1.0, 1.0), (-1.5, 1.5), (-1.5, 1.5)], width: vec![(0.8, 1.4); 3], freq: vec![(-1.5, 1.5); 3] };
    let desc = AnisotropyDescriptor::new(vec![(2, 1.0), (1, a2)]).unwrap();
    let n = if a2 == 1.0 { [64 * scale, 32 * scale, 32 * scale] } else { [32 * scale; 3] };
    packet_family(&n, &[6.0; 3], &desc, &r, 2, count, seed).unwrap()
}

fn intersection() -> Verdict {
    let w = WeightSpec::unweighted(3).with_axis(0, AxisWeight::Power(0.5)).with_axis(2, AxisWeight::Power(0.25));
    let b: Vec<Bracket> = [1, 2]
        .iter()
        .map(|&s| check_intersection_representation(&spacetime(s, 2.0, 50, 4), 1.0, 2.0, 3.0, &w).unwrap())
        .collect();
    let (sp, dr) = (b[0].spread(), drift(&b));
    (sp <= 10.0 && dr <= 2.0, format!("base spread {sp:.3} (<= 10), drift {dr:.3} (<= 2)"))
}

fn continuity() -> Verdict {
    let sets = [(2.0, 0), (2.0, 1), (0.5, 0), (0.5, 1)];
    let fams = [spacetime(1, 1.0, 6, 5), spacetime(2, 1.0, 6, 5)];
    let mut ok = true;
    let mut parts = Vec::new();
    let mut per_set = Vec::new();
    for (gamma, k) in sets {
        let ps = ParamSet { gamma, k, k1: 2, ell: 1, m: 0, ..Default::default() };
        let b: Vec<Bracket> = fams.iter().map(|f| trace_continuity_ratio(f, &ps).unwrap()).collect();
        let (sp, dr) = (b.iter().map(|x| x.spread()).fold(1.0, f64::max), drift(&b));
        ok &= sp <= 100.0 && dr <= 2.0;
        parts.push(format!("(g={gamma},k={k}) spread {sp:.2} drift {dr:.2}"));
        per_set.push(b[0]);
    }
    let mut kdev = 1.0f64;
    for i in [0, 2] {
        let (a, b) = (per_set[i], per_set[i + 1]);
        kdev = kdev.max((a.max / b.max).max(b.max / a.max)).max((a.min / b.min).max(b.min / a.min));
    }
    ok &= kdev <= 10.0;
    (ok, format!("{}; k=0 vs k=1 factor {kdev:.2} (<= 10)", parts.join(", ")))
}

fn pullback() -> Verdict {
    let presets = [
        BoundaryPreset::GaussianBump { amplitude: 0.6, sigma: 1.0, radius: 4.0 },
        BoundaryPreset::ConeSmoothed { amplitude: 0.8, radius: 3.0, tip: 0.3 },
        BoundaryPreset::RoughC1Kappa { amplitude: 0.5, kappa: 0.5, levels: 5, radius: 3.0 },
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for p in presets {
        let dom = SpecialDomain::new(p).unwrap();
        let map = make_dks_pullback(&dom, None).unwrap();
        let rep = map.check_contract(&sample_cloud(&dom, 10_000, 4.0, 6)).unwrap();
        let dr = level_drift(&distance_brackets(&map, 1..=6, 101).unwrap());
        let nmin = non_tangentiality(&pulled_vector_field(&map, &GeometryGrid { n1: 128, l1: 8.0, n2: 128, l2: 8.0 }).unwrap()).unwrap();
        let margin = nmin - 1.0 / (1.0 + dom.lipschitz.powi(2)).sqrt();
        ok &= rep.round_trip < 1e-8 && rep.boundary < 1e-8 && dr <= 1.5 && margin >= -1e-3;
        parts.push(format!("rt {:.1e} bd {:.1e} drift {dr:.3} margin {margin:.3}", rep.round_trip, rep.boundary));
    }
    (ok, parts.join("; "))
}

fn domain_round_trip() -> Verdict {
    let grid = GeometryGrid::default();
    let dom = SpecialDomain::new(BoundaryPreset::GaussianBump { amplitude: 0.6, sigma: 1.0, radius: 4.0 }).unwrap();
    let atlas = Atlas::new(make_dks_pullback(&dom, None).unwrap(), grid, 2, 0.5).unwrap();
    let r = PacketRanges { center: vec![(-3.0, 3.0)], width: vec![(0.8, 1.5)], freq: vec![(-2.0, 2.0)] };
    let mut worst = 0.0f64;
    for m in 0..=1usize {
        for member in 0..3u64 {
            let g = packet_family(&[grid.n2], &[grid.l2], &AnisotropyDescriptor::isotropic(1), &r, 2, m + 1, 70 + 10 * m as u64 + member).unwrap();
            let g = TraceVector::new(g).unwrap();
            let t = domain_trace(&domain_extension(&g, &atlas).unwrap(), &atlas, m).unwrap();
            for j in 0..=m {
                worst = worst.max(t.assembled.entries[j].sub(&g.entries[j]).unwrap().l2() / g.entries[j].l2());
            }
        }
    }
    (worst < 1e-4, format!("max relative error over m = 0, 1: {worst:.2e} (< 1e-4)"))
}

fn heat() -> Verdict {
    let flat = || make_dks_pullback(&SpecialDomain::flat(), None).unwrap();
    let params = |gamma: f64, k: u32| ParamSet { p: 2.0, q: 2.0, gamma, mu: 0.0, kappa: 0.5, k, k1: 2, ell: 1, m: 0, r: 1, d: 2 };
    let mut ok = true;
    let mut parts = Vec::new();

    let ps = params(2.0, 0);
    let mut errs = Vec::new();
    let (mut tr, mut init) = (0.0f64, 0.0f64);
    for n in [16usize, 32, 64] {
        let grid = StripGrid { n1: n, depth: 4.0, n2: n, l2: 4.0, nt: 4, horizon: 1.0, grading: default_grading(&ps) };
        let (data, exact) = manufactured_strip(4.0, 4.0);
        let (u, rep) = solve_inhomogeneous(&HeatProblem::new(flat(), grid, ps, data, 0).unwrap()).unwrap();
        let (t, y1, y2) = (grid.times(), grid.nodes1(), grid.nodes2());
        let e = Array3::from_shape_fn(u.dim(), |(a, i, k)| exact(t[a], y1[i], y2[k]));
        errs.push((&u - &e).iter().map(|v| v.abs()).fold(0.0, f64::max));
        tr = tr.max(rep.trace_residual);
        init = init.max(u.slice(ndarray::s![0, .., ..]).iter().map(|v| v.abs()).fold(0.0, f64::max));
    }
    let order = errs.windows(2).map(|w| (w[0] / w[1]).log2()).fold(f64::INFINITY, f64::min);
    ok &= order >= 1.8 && tr < 1e-3 && init < 1e-10;
    parts.push(format!("order {order:.3} (>= 1.8), trace {tr:.1e}, u(0) {init:.1e}"));

    let family: Vec<HeatData> = (0..10).map(|i| HeatData::random(11, i, 4.0, 4.0, 1.0)).collect();
    for (gamma, k) in [(0.5, 0), (0.5, 1), (2.0, 0), (2.0, 1)] {
        let ps = params(gamma, k);
        let grid = StripGrid { n1: 16, depth: 4.0, n2: 16, l2: 4.0, nt: 8, horizon: 1.0, grading: default_grading(&ps) };
        let base = HeatProblem::new(flat(), grid, ps, HeatData::zero(), 1).unwrap();
        let t = mr_stability_study(&base, &family, 3).unwrap();
        let (_, r1) = solve_inhomogeneous(&HeatProblem { data: family[0].clone(), ..base.clone() }).unwrap();
        let (_, rs) = solve_inhomogeneous(&HeatProblem { data: family[0].scaled(1e3), ..base }).unwrap();
        let (c1, cs) = (r1.ratio.unwrap(), rs.ratio.unwrap());
        let scal = (c1 - cs).abs() / c1;
        ok &= t.spread.is_finite() && t.drift <= 2.0 && scal < 1e-9;
        parts.push(format!("(g={gamma},k={k}) spread {:.2} drift {:.3} scaling {scal:.1e}", t.spread, t.drift));
    }
    (ok, parts.join("; "))
}

fn validator() -> Verdict {
    let rows = validator_table::table();
    let mut bad = Vec::new();
    for (i, r) in rows.iter().enumerate() {
        let got = [
            validate_intro_trace(&r.ps).verdict,
            validate_halfspace_trace(&r.ps).verdict,
            validate_domain_trace(&r.ps).verdict,
            validate_heat_theorem(&r.ps).verdict,
        ];
        if got != r.expect {
            bad.push(i);
        }
    }
    (rows.len() == 30 && bad.is_empty(), format!("{} tuples, mismatches {bad:?}", rows.len()))
}

fn determinism() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let runs = [["validate"].as_slice(), &["ext-check", "--m", "2", "--seed", "7"], &["lp-check", "--seed", "3"], &["heat-solve", "--case", "random", "--levels", "2"]];
    let mut same = Vec::new();
    for (i, args) in runs.iter().enumerate() {
        let reports: Vec<Vec<u8>> = (0..2)
            .map(|r| {
                let out = dir.path().join(format!("{i}_{r}"));
                let st = Command::new(env!("CARGO_BIN_EXE_mrlab")).args(*args).arg("--out").arg(&out).output().unwrap();
                assert!(st.status.code() == Some(0), "{args:?}: {}", String::from_utf8_lossy(&st.stderr));
                std::fs::read(out.join("report.json")).unwrap()
            })
            .collect();
        same.push(reports[0] == reports[1]);
    }
    (same.iter().all(|s| *s), format!("byte-identical report.json for validate, ext-check, lp-check, heat-solve: {same:?}"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("LP partition of unity", lp_partition),
        ("extension biorthogonality", biorthogonality),
        ("trace extends restriction", restriction),
        ("intersection representation", intersection),
        ("trace continuity", continuity),
        ("pullback contract", pullback),
        ("domain trace/extension round trip", domain_round_trip),
        ("heat solver and MR ratio", heat),
        ("parameter validator", validator),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (ok, detail) = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            (false, format!("panicked: {}", msg.unwrap_or_default()))
        });
        failed += usize::from(!ok);
        println!("{} {:>2} {name}: {detail} [{:.1}s]", if ok { "PASS" } else { "FAIL" }, i + 1, start.elapsed().as_secs_f64());
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
