//! Subcommand bodies. Each returns an [`Outcome`] of thresholded checks, data, tables and plots.

use std::collections::BTreeMap;

use mrlab_core::families::{band_limited_family, packet_family, PacketRanges};
use mrlab_core::geometry::{
    boundary_besov_norm, distance_brackets, domain_extension, domain_trace, level_drift, make_dks_pullback,
    non_tangentiality, pulled_vector_field, sample_cloud, Atlas, BoundaryPreset, GeometryGrid, SpecialDomain,
};
use mrlab_core::heat::{
    default_grading, manufactured_strip, mr_stability_study, solve_homogeneous, solve_inhomogeneous, HeatData,
    HeatProblem, InitialGuess, StripGrid, StripOperator,
};
use mrlab_core::lp::{lp_blocks, lp_reconstruct, make_generator, AnisotropyDescriptor, LpSequence};
use mrlab_core::params::{
    compatibility_mode, excluded_label, power_weight_in_ap, trace_space_orders, validate_domain_trace, validate_halfspace_trace,
    validate_heat_theorem, validate_intro_trace, AdmissibilityReport,
};
use mrlab_core::quadrature::AxisWeight;
use mrlab_core::spaces::{besov_tl_norm, check_intersection_representation, space_norm, Bracket, LpKind, SpaceSpec};
use mrlab_core::traceext::{check_biorthogonality, trace_continuity_ratio, trace_working_with_tail, NormalAxis};
use mrlab_core::{MrError, TraceVector, WeightSpec, C64};
use ndarray::Array3;

use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::plot::{loglog_slope, Plot, Series};
use crate::report::{num, Check, Outcome, Table};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Command {
    Validate,
    LpCheck,
    NormCheck,
    IntersectionCheck,
    TraceCheck,
    ExtCheck,
    PullbackCheck,
    BoundaryNormCheck,
    HeatSolve,
    MrStudy,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Validate => "validate",
            Command::LpCheck => "lp-check",
            Command::NormCheck => "norm-check",
            Command::IntersectionCheck => "intersection-check",
            Command::TraceCheck => "trace-check",
            Command::ExtCheck => "ext-check",
            Command::PullbackCheck => "pullback-check",
            Command::BoundaryNormCheck => "boundary-norm-check",
            Command::HeatSolve => "heat-solve",
            Command::MrStudy => "mr-study",
        }
    }

    /// Default thresholds; every name here can be overridden.
    pub fn default_tolerances(self) -> BTreeMap<String, f64> {
        let t: &[(&str, f64)] = match self {
            Command::Validate => &[],
            Command::LpCheck => &[("telescoping", 1e-12), ("reconstruction", 1e-8)],
            Command::NormCheck => &[("homogeneity", 1e-10), ("triangle", 1e-12), ("besov_tl_diagonal", 1e-10)],
            Command::IntersectionCheck => &[("spread", 10.0), ("drift", 2.0)],
            Command::TraceCheck => &[("restriction", 1e-6), ("continuity_spread", 100.0), ("continuity_drift", 2.0)],
            Command::ExtCheck => &[("biorthogonality", 1e-5)],
            Command::PullbackCheck => &[("round_trip", 1e-8), ("boundary", 1e-8), ("level_drift", 1.5), ("normal_margin", -1e-3)],
            Command::BoundaryNormCheck => &[("round_trip", 1e-4), ("chart_spread", 10.0)],
            Command::HeatSolve => &[("order", 1.8), ("trace_residual", 1e-3), ("initial", 1e-10), ("drift", 2.0)],
            Command::MrStudy => &[("spread", 100.0), ("drift", 2.0), ("scaling", 1e-9), ("trace_residual", 1e-3)],
        };
        t.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }
}

pub struct Ctx<'a> {
    pub cfg: &'a ExperimentConfig,
    pub seed: u64,
    pub levels: Option<usize>,
    pub m: Option<usize>,
    pub case: Option<String>,
    pub tol: BTreeMap<String, f64>,
}

impl Ctx<'_> {
    fn tol(&self, name: &str) -> f64 {
        self.tol[name]
    }

    fn count(&self, default: usize) -> usize {
        self.cfg.family.count.unwrap_or(default)
    }

    fn grid(&self, n: &[usize], hw: &[f64]) -> (Vec<usize>, Vec<f64>) {
        (self.cfg.grid.n.clone().unwrap_or_else(|| n.to_vec()), self.cfg.grid.half_width.clone().unwrap_or_else(|| hw.to_vec()))
    }

    fn order(&self) -> usize {
        self.m.or(self.cfg.m).unwrap_or(self.cfg.params.m as usize)
    }

    fn preset(&self) -> BoundaryPreset {
        self.cfg.domain.preset.clone().unwrap_or(BoundaryPreset::GaussianBump { amplitude: 0.6, sigma: 1.0, radius: 4.0 })
    }
}

pub fn run(cmd: Command, ctx: &Ctx) -> Result<Outcome, CliError> {
    ctx.cfg.params.check_invariants()?;
    match cmd {
        Command::Validate => validate(ctx),
        Command::LpCheck => lp_check(ctx),
        Command::NormCheck => norm_check(ctx),
        Command::IntersectionCheck => intersection_check(ctx),
        Command::TraceCheck => trace_check(ctx),
        Command::ExtCheck => ext_check(ctx),
        Command::PullbackCheck => pullback_check(ctx),
        Command::BoundaryNormCheck => boundary_norm_check(ctx),
        Command::HeatSolve => heat_solve(ctx),
        Command::MrStudy => mr_study(ctx),
    }
}

fn validate(ctx: &Ctx) -> Result<Outcome, CliError> {
    let ps = ctx.cfg.params;
    let names = ctx.cfg.theorems.clone().unwrap_or_else(|| vec!["intro".into(), "halfspace".into(), "domain".into(), "heat".into()]);
    let mut out = Outcome::default();
    let mut table = Table::new("verdicts", &["theorem", "verdict", "violations"]);
    let mut reports = BTreeMap::new();
    for name in &names {
        let rep: AdmissibilityReport = match name.as_str() {
            "intro" => validate_intro_trace(&ps),
            "halfspace" => validate_halfspace_trace(&ps),
            "domain" => validate_domain_trace(&ps),
            "heat" => validate_heat_theorem(&ps),
            other => return Err(CliError::Config(format!("unknown theorem '{other}' (intro, halfspace, domain, heat)"))),
        };
        let mut v: Vec<String> = rep.violations.iter().map(|v| format!("{}: {}", v.condition, v.detail)).collect();
        v.extend(rep.excluded_hits.iter().map(|&j| excluded_label(j)));
        out.notes.extend(v.iter().map(|x| format!("{name}: {x}")));
        table.push([name.clone(), rep.verdict.to_string(), v.join("; ")]);
        out.checks.push(Check::flag(&format!("{name}_admissible"), rep.verdict));
        reports.insert(name.clone(), rep);
    }
    out.datum("reports", &reports)?;
    out.datum("compatibility_mode", compatibility_mode(&ps))?;
    out.datum("weight_in_ap", power_weight_in_ap(ps.gamma, ps.p))?;
    let orders: Vec<(f64, f64)> = (0..=ps.m).filter_map(|j| trace_space_orders(&ps, j).ok()).collect();
    out.datum("trace_space_orders", orders)?;
    out.tables.push(table);
    Ok(out)
}

fn packet_ranges(d: usize, width: (f64, f64), freq: f64) -> PacketRanges {
    PacketRanges { center: vec![(-1.0, 1.0); d], width: vec![width; d], freq: vec![(-freq, freq); d] }
}

fn lp_check(ctx: &Ctx) -> Result<Outcome, CliError> {
    let (n, hw) = ctx.grid(&[256, 256], &[8.0, 8.0]);
    let desc = AnisotropyDescriptor::isotropic(n.len());
    let fam = packet_family(&n, &hw, &desc, &packet_ranges(n.len(), (0.5, 1.0), 2.0), 2, ctx.count(5), ctx.seed)?;
    let lps = LpSequence::default_for(&fam[0])?;
    let scale = 2f64.powi(-(lps.n_max as i32));
    let tele = lps
        .radii_on_grid(&fam[0])
        .iter()
        .map(|&r| (lps.partial_sum_radial(lps.n_max, r) - lps.phi_hat_radial(scale * r)).abs())
        .fold(0.0, f64::max);
    let mut out = Outcome::default();
    let mut table = Table::new("reconstruction", &["member", "n_max", "relative_error"]);
    let mut worst = 0.0f64;
    let mut energy = Vec::new();
    for (i, f) in fam.iter().enumerate() {
        let e = lp_reconstruct(f, &lps)?.sub(f)?.max_abs() / f.max_abs();
        worst = worst.max(e);
        table.push([i.to_string(), lps.n_max.to_string(), num(e)]);
        if i == 0 {
            energy = lp_blocks(f, &lps)?.iter().enumerate().map(|(n, b)| (n as f64, b.l2())).collect();
        }
    }
    out.checks.push(Check::at_most("telescoping_error", tele, "telescoping", ctx.tol("telescoping")));
    out.checks.push(Check::at_most("reconstruction_error", worst, "reconstruction", ctx.tol("reconstruction")));
    out.datum("n_max", lps.n_max)?;
    out.datum("block_l2", &energy)?;
    out.tables.push(table);
    out.plots.push(Plot {
        name: "block_energy".into(),
        title: "LP block norms of member 0".into(),
        x_label: "n".into(),
        y_label: "l2 norm".into(),
        loglog: false,
        series: vec![Series { label: "||S_n f||".into(), points: energy }],
    });
    Ok(out)
}

fn norm_check(ctx: &Ctx) -> Result<Outcome, CliError> {
    let (n, hw) = ctx.grid(&[32, 32], &[4.0, 4.0]);
    let d = n.len();
    let fam = band_limited_family(&n, &hw, &AnisotropyDescriptor::isotropic(d), ctx.cfg.family.kmax.unwrap_or(5.0), ctx.count(8), ctx.seed)?;
    if fam.len() < 2 {
        return Err(CliError::Config("norm-check needs a family of at least two members".into()));
    }
    let w = WeightSpec::halfspace(d, ctx.cfg.params.gamma);
    let (p, q) = (ctx.cfg.params.p, ctx.cfg.params.q);
    let specs = [
        ("lebesgue", SpaceSpec::LebesgueMixed { pvec: vec![p] }),
        ("sobolev", SpaceSpec::Sobolev { k: 2, p }),
        ("bessel", SpaceSpec::Bessel { s: 1.5, p }),
        ("besov", SpaceSpec::Besov { s: 0.5, p, q }),
        ("triebel_lizorkin", SpaceSpec::TriebelLizorkin { s: 1.0, p, q }),
    ];
    let mut out = Outcome::default();
    let mut table = Table::new("norm_axioms", &["space", "homogeneity_error", "triangle_excess"]);
    let (mut hom, mut tri) = (0.0f64, f64::NEG_INFINITY);
    for (name, spec) in &specs {
        let (mut h, mut t) = (0.0f64, f64::NEG_INFINITY);
        for (i, f) in fam.iter().enumerate() {
            let g = &fam[(i + 1) % fam.len()];
            let c = -2.5 + i as f64;
            let nf = space_norm(f, spec, &w)?;
            let ncf = space_norm(&f.scale(C64::new(c, 0.0)), spec, &w)?;
            h = h.max((ncf - c.abs() * nf).abs() / nf);
            let ns = space_norm(&f.add(g)?, spec, &w)?;
            t = t.max(ns / (nf + space_norm(g, spec, &w)?) - 1.0);
        }
        table.push([name.to_string(), num(h), num(t)]);
        hom = hom.max(h);
        tri = tri.max(t);
    }
    let mut diag = 0.0f64;
    for f in &fam {
        let lps = LpSequence::default_for(f)?;
        let b = besov_tl_norm(f, 0.7, p, p, &w, &lps, LpKind::Besov)?;
        let t = besov_tl_norm(f, 0.7, p, p, &w, &lps, LpKind::TriebelLizorkin)?;
        diag = diag.max((b - t).abs() / b);
    }
    out.checks.push(Check::at_most("homogeneity_error", hom, "homogeneity", ctx.tol("homogeneity")));
    out.checks.push(Check::at_most("triangle_excess", tri, "triangle", ctx.tol("triangle")));
    out.checks.push(Check::at_most("besov_tl_diagonal_error", diag, "besov_tl_diagonal", ctx.tol("besov_tl_diagonal")));
    out.tables.push(table);
    Ok(out)
}

fn bracket_table(name: &str, brackets: &[Bracket]) -> Table {
    let mut t = Table::new(name, &["level", "min", "max", "spread", "count"]);
    for (l, b) in brackets.iter().enumerate() {
        t.push([l.to_string(), num(b.min), num(b.max), num(b.spread()), b.count.to_string()]);
    }
    t
}

fn bracket_plot(name: &str, title: &str, x_label: &str, brackets: &[Bracket], x0: f64) -> Plot {
    let pts = |f: &dyn Fn(&Bracket) -> f64| brackets.iter().enumerate().map(|(l, b)| (x0 + l as f64, f(b))).collect();
    Plot {
        name: name.into(),
        title: title.into(),
        x_label: x_label.into(),
        y_label: "ratio".into(),
        loglog: false,
        series: vec![Series { label: "min".into(), points: pts(&|b| b.min) }, Series { label: "max".into(), points: pts(&|b| b.max) }],
    }
}

fn max_drift(brackets: &[Bracket]) -> f64 {
    brackets.windows(2).map(|w| w[1].drift_from(&w[0])).fold(1.0, f64::max)
}

fn intersection_check(ctx: &Ctx) -> Result<Outcome, CliError> {
    let (n, hw) = ctx.grid(&[32, 32, 32], &[6.0, 6.0, 6.0]);
    if n.len() != 3 {
        return Err(CliError::Config("intersection-check expects a grid [x1, x2, t]".into()));
    }
    let ps = ctx.cfg.params;
    let desc = AnisotropyDescriptor::new(vec![(2, 1.0), (1, 2.0)])?;
    let w = WeightSpec::unweighted(3).with_axis(0, AxisWeight::Power(ps.gamma)).with_axis(2, AxisWeight::Power(ps.mu));
    let r = PacketRanges { center: vec![(-1.0, 1.0), (-1.5, 1.5), (-1.5, 1.5)], width: vec![(0.8, 1.4); 3], freq: vec![(-1.5, 1.5); 3] };
    let mut brackets = Vec::new();
    for l in 0..ctx.levels.unwrap_or(2) {
        let s = 1usize << l;
        let nn: Vec<usize> = n.iter().map(|v| v * s).collect();
        let fam = packet_family(&nn, &hw, &desc, &r, 2, ctx.count(50), ctx.seed)?;
        brackets.push(check_intersection_representation(&fam, 1.0, ps.p, ps.q, &w)?);
    }
    let mut out = Outcome::default();
    out.checks.push(Check::at_most("base_spread", brackets[0].spread(), "spread", ctx.tol("spread")));
    out.checks.push(Check::at_most("refinement_drift", max_drift(&brackets), "drift", ctx.tol("drift")));
    out.datum("brackets", &brackets)?;
    out.tables.push(bracket_table("brackets", &brackets));
    out.plots.push(bracket_plot("brackets", "intersection LHS/RHS bracket", "refinement level", &brackets, 0.0));
    Ok(out)
}

fn trace_check(ctx: &Ctx) -> Result<Outcome, CliError> {
    let (n, hw) = ctx.grid(&[256, 256], &[8.0, 8.0]);
    let fam = packet_family(&n, &hw, &AnisotropyDescriptor::isotropic(n.len()), &packet_ranges(n.len(), (0.5, 1.0), 2.0), 2, ctx.count(10), ctx.seed)?;
    let mut out = Outcome::default();
    let mut table = Table::new("restriction", &["member", "sup_error", "series_tail"]);
    let mut worst = 0.0f64;
    for (i, f) in fam.iter().enumerate() {
        let (tr, tail) = trace_working_with_tail(f, &LpSequence::default_for(f)?)?;
        let e = tr.sub(&f.restrict(0, f.origin_index(0))?)?.max_abs();
        worst = worst.max(e);
        table.push([i.to_string(), num(e), num(tail)]);
    }
    out.checks.push(Check::at_most("restriction_error", worst, "restriction", ctx.tol("restriction")));
    out.tables.push(table);

    let ps = ctx.cfg.params;
    validate_halfspace_trace(&ps).into_result()?;
    let r = PacketRanges { center: vec![(-1.0, 1.0), (-1.5, 1.5), (-1.5, 1.5)], width: vec![(0.8, 1.4); 3], freq: vec![(-1.5, 1.5); 3] };
    let desc = AnisotropyDescriptor::new(vec![(2, 1.0), (1, 1.0)])?;
    let mut brackets = Vec::new();
    for l in 0..ctx.levels.unwrap_or(2) {
        let s = 1usize << l;
        let st = packet_family(&[64 * s, 32 * s, 32 * s], &[6.0; 3], &desc, &r, 2, 6, ctx.seed)?;
        brackets.push(trace_continuity_ratio(&st, &ps)?);
    }
    let spread = brackets.iter().map(|b| b.spread()).fold(1.0, f64::max);
    out.checks.push(Check::at_most("continuity_spread", spread, "continuity_spread", ctx.tol("continuity_spread")));
    out.checks.push(Check::at_most("continuity_drift", max_drift(&brackets), "continuity_drift", ctx.tol("continuity_drift")));
    out.datum("continuity_brackets", &brackets)?;
    out.tables.push(bracket_table("continuity", &brackets));
    Ok(out)
}

fn ext_check(ctx: &Ctx) -> Result<Outcome, CliError> {
    let m = ctx.order();
    let pi = std::f64::consts::PI;
    let fam = band_limited_family(&[256], &[pi], &AnisotropyDescriptor::isotropic(1), 8.0, ctx.count(20), ctx.seed)?;
    let lps_t = make_generator(1.0, 2.0, AnisotropyDescriptor::isotropic(1))?.with_n_max(3);
    let mat = check_biorthogonality(m, &fam, 1.0, &lps_t, &NormalAxis::new(512, 10.0))?;
    let worst = mat.iter().flatten().copied().fold(0.0, f64::max);
    let mut out = Outcome::default();
    let mut table = Table::new("biorthogonality", &["j1", "j", "max_relative_error"]);
    for (a, row) in mat.iter().enumerate() {
        for (b, v) in row.iter().enumerate() {
            table.push([a.to_string(), b.to_string(), num(*v)]);
        }
    }
    out.checks.push(Check::at_most("biorthogonality_error", worst, "biorthogonality", ctx.tol("biorthogonality")));
    out.datum("m", m)?;
    out.datum("matrix", &mat)?;
    out.tables.push(table);
    Ok(out)
}

fn pullback_check(ctx: &Ctx) -> Result<Outcome, CliError> {
    let dom = SpecialDomain::new(ctx.preset())?;
    let map = make_dks_pullback(&dom, ctx.cfg.domain.eps)?;
    let rep = map.check_contract(&sample_cloud(&dom, 10_000, 4.0, ctx.seed))?;
    let brackets = distance_brackets(&map, 1..=6, 101)?;
    let nmin = non_tangentiality(&pulled_vector_field(&map, &GeometryGrid { n1: 128, l1: 8.0, n2: 128, l2: 8.0 })?)?;
    let lower = 1.0 / (1.0 + dom.lipschitz.powi(2)).sqrt();
    let mut out = Outcome::default();
    out.checks.push(Check::at_most("round_trip", rep.round_trip, "round_trip", ctx.tol("round_trip")));
    out.checks.push(Check::at_most("boundary", rep.boundary, "boundary", ctx.tol("boundary")));
    out.checks.push(Check::at_most("level_drift", level_drift(&brackets), "level_drift", ctx.tol("level_drift")));
    out.checks.push(Check::at_least("normal_margin", nmin - lower, "normal_margin", ctx.tol("normal_margin")));
    out.datum("domain", &dom)?;
    out.datum("eps", map.eps)?;
    out.datum("contract", rep)?;
    out.datum("min_normal_component", nmin)?;
    out.datum("distance_brackets", &brackets)?;
    out.tables.push(bracket_table("distance_brackets", &brackets));
    out.plots.push(bracket_plot("distance_brackets", "distance comparability per dyadic height", "level (height 2^-level)", &brackets, 1.0));
    Ok(out)
}

fn boundary_norm_check(ctx: &Ctx) -> Result<Outcome, CliError> {
    let m = ctx.order();
    let grid = GeometryGrid::default();
    let dom = SpecialDomain::new(ctx.preset())?;
    let map = make_dks_pullback(&dom, ctx.cfg.domain.eps)?;
    let atlas = Atlas::new(map.clone(), grid, ctx.cfg.domain.charts.unwrap_or(2), ctx.cfg.domain.overlap.unwrap_or(0.5))?;
    let single = Atlas::new(map, grid, 1, 0.5)?;
    let r = PacketRanges { center: vec![(-3.0, 3.0)], width: vec![(0.8, 1.5)], freq: vec![(-2.0, 2.0)] };
    let count = ctx.count(4);
    let mut out = Outcome::default();
    let mut table = Table::new("round_trip", &["member", "j", "relative_error"]);
    let mut worst = 0.0f64;
    for i in 0..count {
        let fam = packet_family(&[grid.n2], &[grid.l2], &AnisotropyDescriptor::isotropic(1), &r, 2, m + 1, ctx.seed.wrapping_add(i as u64))?;
        let g = TraceVector::new(fam)?;
        let t = domain_trace(&domain_extension(&g, &atlas)?, &atlas, m)?;
        for j in 0..=m {
            let e = t.assembled.entries[j].sub(&g.entries[j])?.l2() / g.entries[j].l2();
            worst = worst.max(e);
            table.push([i.to_string(), j.to_string(), num(e)]);
        }
    }
    let fam = packet_family(&[grid.n2], &[grid.l2], &AnisotropyDescriptor::isotropic(1), &r, 2, 3 * count, ctx.seed)?;
    let ratios: Vec<f64> = fam
        .iter()
        .map(|g| Ok(boundary_besov_norm(g, 0.5, 2.0, 2.0, &atlas)? / boundary_besov_norm(g, 0.5, 2.0, 2.0, &single)?))
        .collect::<Result<_, MrError>>()?;
    let b = Bracket::from_ratios(&ratios)?;
    out.checks.push(Check::at_most("round_trip_error", worst, "round_trip", ctx.tol("round_trip")));
    out.checks.push(Check::at_most("chart_spread", b.max.max(1.0 / b.min), "chart_spread", ctx.tol("chart_spread")));
    out.datum("m", m)?;
    out.datum("chart_bracket", b)?;
    out.tables.push(table);
    Ok(out)
}

fn strip_from(ctx: &Ctx, n: usize, nt: usize) -> StripGrid {
    let h = &ctx.cfg.heat;
    StripGrid {
        n1: h.n1.unwrap_or(n),
        depth: h.depth.unwrap_or(4.0),
        n2: h.n2.unwrap_or(n),
        l2: h.l2.unwrap_or(4.0),
        nt: h.nt.unwrap_or(nt),
        horizon: h.horizon.unwrap_or(1.0),
        grading: h.grading.unwrap_or_else(|| default_grading(&ctx.cfg.params)),
    }
}

fn flat_map() -> Result<mrlab_core::geometry::PullbackMap, MrError> {
    make_dks_pullback(&SpecialDomain::flat(), None)
}

fn sample3(grid: &StripGrid, f: impl Fn(f64, f64, f64) -> f64) -> Array3<f64> {
    let (t, y1, y2) = (grid.times(), grid.nodes1(), grid.nodes2());
    Array3::from_shape_fn((grid.nt + 1, grid.n1 + 1, grid.n2), |(n, i, k)| f(t[n], y1[i], y2[k]))
}

fn max_diff(u: &Array3<f64>, v: &Array3<f64>) -> f64 {
    (u - v).iter().map(|x| x.abs()).fold(0.0, f64::max)
}

fn heat_solve(ctx: &Ctx) -> Result<Outcome, CliError> {
    let case = ctx.case.clone().or_else(|| ctx.cfg.heat.case.clone()).unwrap_or_else(|| "manufactured-1".into());
    let levels = ctx.levels.unwrap_or(3);
    let mut out = Outcome::default();
    let mut table = Table::new("convergence", &["h", "error", "C"]);
    let mut pts = Vec::new();
    let (mut trace_res, mut init_res) = (0.0f64, 0.0f64);
    let mut ratios = Vec::new();
    match case.as_str() {
        "manufactured-1" | "random" => {
            let base = strip_from(ctx, 16, if case == "random" { 8 } else { 4 });
            let mut grid = base;
            for _ in 0..levels {
                let (data, exact) = if case == "random" {
                    (HeatData::random(ctx.seed, 0, grid.depth, grid.l2, grid.horizon), None)
                } else {
                    let (d, e) = manufactured_strip(grid.depth, grid.l2);
                    (d, Some(e))
                };
                let ext = ctx.cfg.heat.ext_levels.unwrap_or(if exact.is_some() { 0 } else { 1 });
                let p = HeatProblem::new(flat_map()?, grid, ctx.cfg.params, data, ext)?;
                let (u, rep) = solve_inhomogeneous(&p)?;
                let h = grid.depth / grid.n1 as f64;
                let err = exact.as_ref().map(|e| max_diff(&u, &sample3(&grid, |t, a, b| e(t, a, b)))).unwrap_or(f64::NAN);
                table.push([num(h), num(err), rep.ratio.map(num).unwrap_or_default()]);
                pts.push((h, err));
                trace_res = trace_res.max(rep.trace_residual);
                init_res = init_res.max(rep.initial_residual);
                ratios.extend(rep.ratio);
                grid = StripGrid { nt: if exact.is_some() { grid.nt } else { 2 * grid.nt }, ..grid.refined() };
            }
            out.checks.push(Check::at_most("trace_residual", trace_res, "trace_residual", ctx.tol("trace_residual")));
            out.checks.push(Check::at_most("initial_residual", init_res, "initial", ctx.tol("initial")));
            if case == "random" {
                let b = Bracket::from_ratios(&ratios)?;
                out.checks.push(Check::at_most("ratio_drift", b.spread(), "drift", ctx.tol("drift")));
            }
        }
        "manufactured-line" => {
            use std::f64::consts::PI;
            let exact = |t: f64, x: f64, _: f64| (PI * x).sin() * (1.0 - (-t).exp());
            let force = |t: f64, x: f64, _: f64| (PI * x).sin() * ((-t).exp() + PI * PI * (1.0 - (-t).exp()));
            for l in 0..levels {
                let n = 8usize << l;
                let grid = StripGrid { n1: n, depth: 1.0, n2: 1, l2: 1.0, nt: n * n, horizon: 1.0, grading: 0.0 };
                let op = StripOperator::new(&flat_map()?, &grid)?;
                let (u, _) = solve_homogeneous(&sample3(&grid, force), &op, InitialGuess::Previous)?;
                let h = 1.0 / n as f64;
                let err = max_diff(&u, &sample3(&grid, exact));
                table.push([num(h), num(err), String::new()]);
                pts.push((h, err));
                init_res = init_res.max(u.slice(ndarray::s![0, .., ..]).iter().map(|v| v.abs()).fold(0.0, f64::max));
            }
            out.checks.push(Check::at_most("initial_residual", init_res, "initial", ctx.tol("initial")));
        }
        other => return Err(CliError::Config(format!("unknown heat case '{other}' (manufactured-1, manufactured-line, random)"))),
    }
    if case != "random" {
        let orders: Vec<f64> = pts.windows(2).map(|w| (w[0].1 / w[1].1).log2()).collect();
        let min_order = orders.iter().copied().fold(f64::INFINITY, f64::min);
        out.checks.push(Check::at_least("min_order", min_order, "order", ctx.tol("order")));
        out.datum("orders", &orders)?;
        out.datum("fitted_slope", loglog_slope(&pts))?;
        out.plots.push(Plot {
            name: "convergence".into(),
            title: format!("heat {case}: max error"),
            x_label: "h".into(),
            y_label: "max error".into(),
            loglog: true,
            series: vec![Series { label: "error".into(), points: pts }],
        });
    }
    out.datum("case", &case)?;
    out.tables.push(table);
    Ok(out)
}

fn mr_study(ctx: &Ctx) -> Result<Outcome, CliError> {
    let grid = strip_from(ctx, 16, 8);
    let family: Vec<HeatData> = (0..ctx.count(10)).map(|i| HeatData::random(ctx.seed, i, grid.depth, grid.l2, grid.horizon)).collect();
    let ext = ctx.cfg.heat.ext_levels.unwrap_or(1);
    let base = HeatProblem::new(flat_map()?, grid, ctx.cfg.params, HeatData::zero(), ext)?;
    let t = mr_stability_study(&base, &family, ctx.levels.unwrap_or(2))?;
    let one = HeatProblem { data: family[0].clone(), ..base.clone() };
    let (_, r1) = solve_inhomogeneous(&one)?;
    let (_, rs) = solve_inhomogeneous(&HeatProblem { data: family[0].scaled(1e3), ..base })?;
    let (c1, cs) = (r1.ratio.unwrap_or(f64::NAN), rs.ratio.unwrap_or(f64::NAN));
    let mut out = Outcome::default();
    out.checks.push(Check::at_most("spread", t.spread, "spread", ctx.tol("spread")));
    out.checks.push(Check::at_most("refinement_drift", t.drift, "drift", ctx.tol("drift")));
    out.checks.push(Check::at_most("scaling_error", (c1 - cs).abs() / c1, "scaling", ctx.tol("scaling")));
    out.checks.push(Check::at_most("trace_residual", r1.trace_residual, "trace_residual", ctx.tol("trace_residual")));
    let mut table = Table::new("ratios", &["level", "member", "C"]);
    for (l, row) in t.ratios.iter().enumerate() {
        for (i, c) in row.iter().enumerate() {
            table.push([l.to_string(), i.to_string(), c.map(num).unwrap_or_default()]);
        }
    }
    out.datum("study", &t)?;
    out.datum("report_member0", &r1)?;
    out.tables.push(table);
    out.tables.push(bracket_table("brackets", &t.brackets));
    out.plots.push(bracket_plot("brackets", "MR ratio bracket", "refinement level", &t.brackets, 0.0));
    Ok(out)
}
