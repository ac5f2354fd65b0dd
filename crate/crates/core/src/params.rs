//! Hypothesis checks for the trace, extension and heat theorems.
//!
//! Every inequality is evaluated on exact rationals when all inputs are
//! (small-denominator) rationals, and with an absolute/relative tolerance of
//! `1e-12` otherwise. Excluded points such as `gamma = j p - 1` are measure
//! zero, so plain float comparison would let them slip through.

use std::cmp::Ordering;
use std::ops::{Add, Mul, Sub};

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{MrError, Result};

pub const IRRATIONAL_TOL: f64 = 1e-12;

/// Scalar hypothesis parameters shared by all theorems.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParamSet {
    pub p: f64,
    pub q: f64,
    pub gamma: f64,
    pub mu: f64,
    pub kappa: f64,
    pub k: u32,
    pub k1: u32,
    pub ell: u32,
    pub m: u32,
    pub r: u32,
    pub d: u32,
}

impl Default for ParamSet {
    fn default() -> Self {
        Self { p: 2.0, q: 2.0, gamma: 2.0, mu: 0.0, kappa: 0.0, k: 0, k1: 2, ell: 1, m: 0, r: 1, d: 2 }
    }
}

impl ParamSet {
    pub fn check_invariants(&self) -> Result<()> {
        let mut bad = Vec::new();
        if !(self.p > 1.0 && self.p.is_finite()) {
            bad.push(format!("p = {} not in (1, inf)", self.p));
        }
        if !(self.q > 1.0 && self.q.is_finite()) {
            bad.push(format!("q = {} not in (1, inf)", self.q));
        }
        if !(0.0..1.0).contains(&self.kappa) {
            bad.push(format!("kappa = {} not in [0, 1)", self.kappa));
        }
        if !self.gamma.is_finite() || !self.mu.is_finite() {
            bad.push("gamma and mu must be finite".into());
        }
        for (name, v) in [("k1", self.k1), ("ell", self.ell), ("r", self.r), ("d", self.d)] {
            if v < 1 {
                bad.push(format!("{name} = {v} must be >= 1"));
            }
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(MrError::InvalidParameter(bad.join("; ")))
        }
    }

    /// The parameter set with the heat-theorem values `k1=2, ell=1, m=0, r=1` imposed.
    pub fn heat_normalised(&self) -> Self {
        Self { k1: 2, ell: 1, m: 0, r: 1, ..*self }
    }
}

/// Exact-if-possible scalar used for all interval tests.
#[derive(Debug, Clone, Copy)]
pub enum Q {
    Exact(Ratio<i128>),
    Approx(f64),
}

const MAX_DEN: i128 = 1_000_000;

impl Q {
    /// Continued-fraction recovery of a small-denominator rational; falls back to `Approx`.
    pub fn from_f64(x: f64) -> Q {
        if !x.is_finite() {
            return Q::Approx(x);
        }
        let (mut h0, mut h1) = (0i128, 1i128);
        let (mut k0, mut k1) = (1i128, 0i128);
        let mut r = x;
        for _ in 0..40 {
            let a = r.floor();
            if a.abs() > 1e15 {
                break;
            }
            let ai = a as i128;
            let h2 = ai * h1 + h0;
            let k2 = ai * k1 + k0;
            if k2.abs() > MAX_DEN {
                break;
            }
            h0 = h1;
            h1 = h2;
            k0 = k1;
            k1 = k2;
            let approx = h1 as f64 / k1 as f64;
            if (approx - x).abs() <= 1e-15 * x.abs().max(1.0) {
                return Q::Exact(Ratio::new(h1, k1));
            }
            let frac = r - a;
            if frac.abs() < 1e-300 {
                break;
            }
            r = 1.0 / frac;
        }
        Q::Approx(x)
    }

    pub fn int(v: i64) -> Q {
        Q::Exact(Ratio::from_integer(v as i128))
    }

    pub fn to_f64(self) -> f64 {
        match self {
            Q::Exact(r) => *r.numer() as f64 / *r.denom() as f64,
            Q::Approx(x) => x,
        }
    }

    pub fn is_exact(self) -> bool {
        matches!(self, Q::Exact(_))
    }

    /// Exact ordering for rationals, tolerance-based otherwise.
    pub fn cmp_q(self, other: Q) -> Ordering {
        match (self, other) {
            (Q::Exact(a), Q::Exact(b)) => a.cmp(&b),
            _ => {
                let (a, b) = (self.to_f64(), other.to_f64());
                let scale = a.abs().max(b.abs()).max(1.0);
                if (a - b).abs() <= IRRATIONAL_TOL * scale {
                    Ordering::Equal
                } else if a < b {
                    Ordering::Less
                } else {
                    Ordering::Greater
                }
            }
        }
    }

    pub fn lt(self, o: Q) -> bool {
        self.cmp_q(o) == Ordering::Less
    }
    pub fn gt(self, o: Q) -> bool {
        self.cmp_q(o) == Ordering::Greater
    }
    pub fn eq_q(self, o: Q) -> bool {
        self.cmp_q(o) == Ordering::Equal
    }
    pub fn ge(self, o: Q) -> bool {
        !self.lt(o)
    }

    pub fn over(self, o: Q) -> Q {
        match (self, o) {
            (Q::Exact(a), Q::Exact(b)) if *b.numer() != 0 => Q::Exact(a / b),
            _ => Q::Approx(self.to_f64() / o.to_f64()),
        }
    }
}

impl From<f64> for Q {
    fn from(x: f64) -> Q {
        Q::from_f64(x)
    }
}

macro_rules! q_binop {
    ($tr:ident, $f:ident, $op:tt) => {
        impl $tr for Q {
            type Output = Q;
            fn $f(self, o: Q) -> Q {
                match (self, o) {
                    (Q::Exact(a), Q::Exact(b)) => Q::Exact(a $op b),
                    _ => Q::Approx(self.to_f64() $op o.to_f64()),
                }
            }
        }
    };
}
q_binop!(Add, add, +);
q_binop!(Sub, sub, -);
q_binop!(Mul, mul, *);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Theorem {
    /// Weighted trace theorem on a C^{1,kappa} domain with k1=2, ell=1, m=0.
    IntroTrace,
    HalfspaceTrace,
    DomainTrace,
    Heat,
}

impl Theorem {
    pub fn name(self) -> &'static str {
        match self {
            Theorem::IntroTrace => "intro_trace",
            Theorem::HalfspaceTrace => "halfspace_trace",
            Theorem::DomainTrace => "domain_trace",
            Theorem::Heat => "heat",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub condition: String,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityReport {
    pub theorem: Theorem,
    pub verdict: bool,
    pub violations: Vec<Violation>,
    pub excluded_hits: Vec<u32>,
}

impl AdmissibilityReport {
    fn new(theorem: Theorem) -> Self {
        Self { theorem, verdict: true, violations: Vec::new(), excluded_hits: Vec::new() }
    }

    fn violate(&mut self, condition: &str, detail: String) {
        self.violations.push(Violation { condition: condition.to_string(), detail });
    }

    fn finish(mut self) -> Self {
        self.verdict = self.violations.is_empty() && self.excluded_hits.is_empty();
        self
    }

    pub fn into_result(self) -> Result<Self> {
        if self.verdict {
            Ok(self)
        } else {
            let mut parts: Vec<String> =
                self.violations.iter().map(|v| format!("{}: {}", v.condition, v.detail)).collect();
            parts.extend(self.excluded_hits.iter().map(|&j| format!("{} is excluded", excluded_label(j))));
            Err(MrError::Inadmissible { theorem: self.theorem.name().into(), violations: parts.join("; ") })
        }
    }
}

/// `gamma = p-1` for `j = 1`, `gamma = jp-1` otherwise.
pub fn excluded_label(j: u32) -> String {
    if j == 1 {
        "gamma = p-1".into()
    } else {
        format!("gamma = {j}p-1")
    }
}

fn q(x: f64) -> Q {
    Q::from_f64(x)
}

/// Open interval test `lo < x < hi`, recording one violation per failed side.
fn open_interval(rep: &mut AdmissibilityReport, name: &str, x: Q, lo: Q, hi: Q) {
    if !x.gt(lo) {
        rep.violate(&format!("{name}_lower"), format!("{name} = {} must exceed {}", x.to_f64(), lo.to_f64()));
    }
    if !x.lt(hi) {
        rep.violate(&format!("{name}_upper"), format!("{name} = {} must be below {}", x.to_f64(), hi.to_f64()));
    }
}

/// All `j >= 1` with `gamma = j p - 1`; only `j <= ceil((gamma+1)/p)+1` can match.
pub fn excluded_hits(gamma: f64, p: f64) -> Vec<u32> {
    let top = ((gamma + 1.0) / p).ceil() + 1.0;
    if top < 1.0 {
        return Vec::new();
    }
    let (g, pq) = (q(gamma), q(p));
    (1..=top as u32).filter(|&j| g.eq_q(Q::int(j as i64) * pq - Q::int(1))).collect()
}

fn mu_condition(rep: &mut AdmissibilityReport, ps: &ParamSet) {
    open_interval(rep, "mu", q(ps.mu), Q::int(-1), q(ps.q) - Q::int(1));
}

pub fn validate_halfspace_trace(ps: &ParamSet) -> AdmissibilityReport {
    let mut rep = AdmissibilityReport::new(Theorem::HalfspaceTrace);
    let p = q(ps.p);
    let hi = Q::int(ps.k1 as i64 - ps.m as i64) * p - Q::int(1);
    open_interval(&mut rep, "gamma", q(ps.gamma), Q::int(-1), hi);
    rep.excluded_hits = excluded_hits(ps.gamma, ps.p);
    mu_condition(&mut rep, ps);
    rep.finish()
}

pub fn validate_domain_trace(ps: &ParamSet) -> AdmissibilityReport {
    let mut rep = AdmissibilityReport::new(Theorem::DomainTrace);
    let p = q(ps.p);
    let rk = Q::int(ps.r as i64) + q(ps.kappa);
    let k1 = Q::int(ps.k1 as i64);
    let m = Q::int(ps.m as i64);
    if !k1.ge(rk) {
        rep.violate("k1_ge_r_plus_kappa", format!("k1 = {} < r + kappa = {}", ps.k1, rk.to_f64()));
    }
    if !rk.gt(m) {
        rep.violate("r_plus_kappa_gt_m", format!("r + kappa = {} <= m = {}", rk.to_f64(), ps.m));
    }
    let lo = (k1 - rk) * p - Q::int(1);
    let hi = (k1 - m) * p - Q::int(1);
    open_interval(&mut rep, "gamma", q(ps.gamma), lo, hi);
    rep.excluded_hits = excluded_hits(ps.gamma, ps.p);
    mu_condition(&mut rep, ps);
    rep.finish()
}

/// Weighted trace theorem for the second-order case on a `C^{1,kappa}` domain.
pub fn validate_intro_trace(ps: &ParamSet) -> AdmissibilityReport {
    let mut rep = AdmissibilityReport::new(Theorem::IntroTrace);
    let p = q(ps.p);
    let lo = (Q::int(1) - q(ps.kappa)) * p - Q::int(1);
    let hi = Q::int(2) * p - Q::int(1);
    open_interval(&mut rep, "gamma", q(ps.gamma), lo, hi);
    if q(ps.gamma).eq_q(p - Q::int(1)) {
        rep.excluded_hits.push(1);
    }
    rep.finish()
}

pub fn validate_heat_theorem(ps: &ParamSet) -> AdmissibilityReport {
    let mut rep = AdmissibilityReport::new(Theorem::Heat);
    let p = q(ps.p);
    let lo = (Q::int(1) - q(ps.kappa)) * p - Q::int(1);
    let hi = Q::int(2) * p - Q::int(1);
    open_interval(&mut rep, "gamma", q(ps.gamma), lo, hi);
    if q(ps.gamma).eq_q(p - Q::int(1)) {
        rep.violate("gamma_ne_p_minus_1", format!("gamma = p-1 = {}", ps.p - 1.0));
        rep.excluded_hits.push(1);
    }
    mu_condition(&mut rep, ps);
    if compatibility_mode(ps) == CompatibilityMode::Critical {
        rep.violate(
            "compatibility_not_critical",
            format!("1-(mu+1)/q = (gamma+1)/(2p) = {}", (ps.gamma + 1.0) / (2.0 * ps.p)),
        );
    }
    rep.finish()
}

/// `(temporal, spatial)` smoothness of the j-th trace space.
pub fn trace_space_orders(ps: &ParamSet, j: u32) -> Result<(f64, f64)> {
    if j > ps.m {
        return Err(MrError::OrderTooLarge { j: j as usize, m: ps.m as usize });
    }
    let (ell, k1) = (ps.ell as f64, ps.k1 as f64);
    let g = j as f64 + (ps.gamma + 1.0) / ps.p;
    Ok((ell - ell / k1 * g, k1 - g))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CompatibilityMode {
    NoConditionAtZero,
    RequireGZeroAtZero,
    Critical,
}

pub fn compatibility_mode(ps: &ParamSet) -> CompatibilityMode {
    let lhs = Q::int(1) - (q(ps.mu) + Q::int(1)).over(q(ps.q));
    let rhs = (q(ps.gamma) + Q::int(1)).over(Q::int(2) * q(ps.p));
    match lhs.cmp_q(rhs) {
        Ordering::Less => CompatibilityMode::NoConditionAtZero,
        Ordering::Greater => CompatibilityMode::RequireGZeroAtZero,
        Ordering::Equal => CompatibilityMode::Critical,
    }
}

pub fn power_weight_in_ap(gamma: f64, p: f64) -> bool {
    q(gamma).gt(Q::int(-1)) && q(gamma).lt(q(p) - Q::int(1))
}
