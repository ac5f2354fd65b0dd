use mrlab_core::ParamSet;

/// One hand-evaluated tuple: parameters and expected verdicts
/// `[intro, halfspace, domain, heat]`.
pub struct Row {
    pub ps: ParamSet,
    pub expect: [bool; 4],
}

#[allow(clippy::too_many_arguments)]
fn row(p: f64, q: f64, gamma: f64, mu: f64, kappa: f64, k1: u32, m: u32, r: u32, expect: [bool; 4]) -> Row {
    Row { ps: ParamSet { p, q, gamma, mu, kappa, k: 0, k1, ell: 1, m, r, d: 2 }, expect }
}

/// Verdicts worked out by hand from the stated inequalities:
/// intro: `(1-kappa)p-1 < gamma < 2p-1`, `gamma != p-1`;
/// half-space: `-1 < gamma < (k1-m)p-1`, `gamma != jp-1`, `-1 < mu < q-1`;
/// domain: `k1 >= r+kappa > m`, `(k1-r-kappa)p-1 < gamma < (k1-m)p-1`, `gamma != jp-1`, mu as above;
/// heat: intro window, mu as above, `1-(mu+1)/q != (gamma+1)/(2p)`.
pub fn table() -> Vec<Row> {
    let (t, f) = (true, false);
    vec![
        row(2.0, 2.0, 2.0, 0.0, 0.0, 2, 0, 1, [t, t, t, t]),
        row(2.0, 2.0, 1.0, 0.0, 0.0, 2, 0, 1, [f, f, f, f]),
        row(2.0, 2.0, 0.5, 0.0, 0.0, 2, 2, 1, [f, f, f, f]),
        row(2.0, 2.0, 0.5, 0.0, 0.5, 2, 0, 1, [t, t, t, t]),
        row(2.0, 2.0, 0.5, 0.0, 0.0, 2, 0, 1, [f, t, f, f]),
        row(2.0, 4.0, 2.0, 0.0, 0.0, 2, 0, 1, [t, t, t, f]),
        row(2.0, 2.0, 2.0, 1.0, 0.0, 2, 0, 1, [t, f, f, f]),
        row(2.0, 2.0, 2.0, -1.0, 0.0, 2, 0, 1, [t, f, f, f]),
        row(2.0, 2.0, 3.0, 0.0, 0.0, 2, 0, 1, [f, f, f, f]),
        row(3.0, 2.0, 2.0, 0.0, 0.0, 2, 0, 1, [f, f, f, f]),
        row(3.0, 2.0, 3.0, 0.0, 0.0, 2, 0, 1, [t, t, t, t]),
        row(3.0, 2.0, 1.0, 0.0, 0.5, 2, 0, 1, [t, t, t, t]),
        row(2.0, 2.0, -0.5, 0.0, 0.9, 2, 0, 1, [t, t, t, t]),
        row(2.0, 2.0, -1.0, 0.0, 0.9, 2, 0, 1, [f, f, f, f]),
        row(2.0, 2.0, 2.0, 0.0, 0.0, 3, 1, 1, [t, t, f, t]),
        row(2.0, 2.0, 2.0, 0.0, 0.5, 3, 1, 1, [t, t, f, t]),
        row(2.0, 2.0, 2.5, 0.0, 0.5, 3, 1, 1, [t, t, t, t]),
        row(2.0, 2.0, 1.0, 0.0, 0.0, 1, 0, 1, [f, f, f, f]),
        row(2.0, 2.0, 0.0, 0.0, 0.0, 1, 0, 1, [f, t, t, f]),
        row(2.0, 2.0, 0.0, 0.0, 0.5, 1, 0, 1, [f, t, f, f]),
        row(2.0, 2.0, 4.0, 0.0, 0.0, 3, 0, 2, [f, t, t, f]),
        row(2.0, 2.0, 3.0, 0.0, 0.0, 3, 0, 2, [f, f, f, f]),
        row(2.0, 3.0, 2.0, 0.5, 0.0, 2, 0, 1, [t, t, t, t]),
        row(2.0, 3.0, 2.0, -0.25, 0.0, 2, 0, 1, [t, t, t, f]),
        row(1.5, 2.0, 1.0, 0.0, 0.0, 2, 0, 1, [t, t, t, t]),
        row(1.5, 2.0, 0.5, 0.0, 0.0, 2, 0, 1, [f, f, f, f]),
        row(4.0, 2.0, 6.0, 0.0, 0.0, 2, 0, 1, [t, t, t, t]),
        row(4.0, 2.0, 6.0, 0.0, 0.0, 2, 1, 1, [t, f, f, t]),
        row(2.0, 2.0, 2.0, 0.0, 0.5, 2, 1, 1, [t, f, f, t]),
        row(2.0, 2.0, std::f64::consts::SQRT_2, 0.0, 0.0, 2, 0, 1, [t, t, t, t]),
    ]
}
