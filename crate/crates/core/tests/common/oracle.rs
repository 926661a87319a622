//! Closed-form bound constants written out directly from raw parameters,
//! without going through the library's intermediate helpers.

use sobolev_erm::theory_bounds::ProblemParams;

pub fn parameter_grid() -> Vec<ProblemParams> {
    let base = ProblemParams::default();
    vec![
        base.clone(),
        ProblemParams {
            s: 3,
            dx: 1,
            dy: 2,
            sigma_w: 0.3,
            theta: 12.0,
            delta: 0.01,
            rho_tilde: 2.0,
            c_c: 0.5,
            c_c_prime: 2.0,
            rho_f: 1.5,
            c_h_factor: 0.7,
            half_width: 2.0,
            ..base.clone()
        },
        ProblemParams {
            s: 4,
            dx: 2,
            dy: 3,
            sigma_w: 0.01,
            theta: 9.5,
            delta: 0.2,
            rho_tilde: 0.5,
            c_c: 3.0,
            c_c_prime: 0.25,
            rho_f: 0.8,
            persistence: 2.0,
            half_width: 0.5,
            ..base.clone()
        },
        ProblemParams {
            s: 5,
            dx: 2,
            dy: 1,
            sigma_w: 3.0,
            theta: 20.0,
            delta: 0.5,
            c_h_factor: 2.5,
            ..base
        },
    ]
}

struct Raw {
    s: f64,
    dx: f64,
    dy: f64,
    d: f64,
    dp: f64,
    sigma: f64,
    theta: f64,
    log_inv_delta: f64,
}

fn raw(p: &ProblemParams) -> Raw {
    let (s, dx) = (p.s as f64, p.dx as f64);
    Raw {
        s,
        dx,
        dy: p.dy as f64,
        d: 2.0 * s / (2.0 * s + dx),
        dp: 2.0 * dx / (2.0 * s + dx),
        sigma: p.sigma_w,
        theta: p.theta,
        log_inv_delta: (1.0 / p.delta).ln(),
    }
}

fn covering(p: &ProblemParams) -> Vec<(&'static str, f64)> {
    let r = raw(p);
    let c_m = (16.0 * p.rho_tilde * p.rho_tilde * r.dx * r.theta / (2.0 * r.s - r.dx)).powf(r.dx / (2.0 * r.s - r.dx));
    let lambda = (2.0 * p.half_width).powf(r.dx);
    vec![
        ("C_m", c_m),
        ("C_M", c_m * r.dy),
        ("C_L", 8.0 * p.rho_tilde * r.dy * r.theta.sqrt() * c_m.powf(r.s / r.dx)),
        (
            "C_h",
            p.c_h_factor * (lambda / 32.0 + 8.0 * lambda * (lambda / 8.0 + 2.0).powi(2) * c_m * c_m),
        ),
    ]
}

pub fn rate_prob_constants(p: &ProblemParams, r_fstar: f64) -> Vec<(&'static str, f64)> {
    let r = raw(p);
    let k = p.c_c * r.dy.powf((2.0 * r.s + r.dx) / (2.0 * r.s));
    let c_i = 8.0 * (1.0 + (2.0 * r.log_inv_delta).sqrt()) * (8.0 * k).powf(r.d / 2.0);
    let c_ii = 2.0 * r.s / (2.0 * r.s - r.dx) * 8.0 * k.sqrt() * (8.0 * k).powf((2.0 * r.s - r.dx) / (2.0 * (2.0 * r.s + r.dx)));
    let c_iv = 8.0 * (8.0 * k).powf(r.d);
    let c_slow = (r.theta + 4.0)
        * (c_i * 10f64.powf(r.dp / 4.0) * r.sigma.powf(1.0 + r.d)
            + c_ii * 10f64.powf(r.dp / 2.0) * r.sigma.powf(2.0 * r.d)
            + c_iv * r.sigma.powf(2.0 * r.d) * 10f64.powf(r.dp / 2.0));
    let mut out = vec![
        ("C_I", c_i),
        ("C_II", c_ii),
        ("C_III", 64.0),
        ("C_IV", c_iv),
        ("C_slow", c_slow),
        ("C_fast", (r.theta + 4.0) * 64.0 + 1.0),
        ("rho", 10.0 * r_fstar),
    ];
    out.extend(covering(p));
    out
}

pub fn rate_exp_constants(p: &ProblemParams, r_fstar: f64) -> Vec<(&'static str, f64)> {
    let r = raw(p);
    let k = p.c_c * r.dy.powf((2.0 * r.s + r.dx) / (2.0 * r.s));
    let c_i = 8.0 * (p.c_c * r.dy.powf(r.d)).sqrt() / (1.0 - r.dx / (2.0 * r.s))
        * (8.0 * k).powf((2.0 * r.s - r.dx) / (2.0 * (2.0 * r.s + r.dx)));
    let c_ii = 8.0 * (8.0 * k).powf(r.d);
    let mut out = vec![
        ("C_I", c_i),
        ("C_II", c_ii),
        ("C_slow", (r.theta + 4.0) * 10f64.powf(r.dp / 2.0) * (c_i + c_ii) * r.sigma.powf(r.d)),
        ("C_fast", 2.0),
        ("rho", 10.0 * r_fstar),
    ];
    out.extend(covering(p));
    out
}

pub fn noreg_prob_constants(p: &ProblemParams) -> Vec<(&'static str, f64)> {
    let r = raw(p);
    let k = p.c_c_prime * r.dy.powf((2.0 * r.s + r.dx) / (2.0 * r.s));
    let sum = 2.0 * r.s + r.dx;
    let c_i = 8.0 * (8.0 * k).powf(r.s / sum) * (1.0 + (2.0 * r.log_inv_delta).sqrt()) * p.rho_f.powf(r.dx / sum);
    let c_ii = 8.0 * k.sqrt() / (1.0 - r.dx / (2.0 * r.s))
        * (8.0 * k).powf((2.0 * r.s - r.dx) / (2.0 * sum))
        * p.rho_f.powf(2.0 * r.dx / sum);
    let c_iv = 8.0 * (8.0 * k).powf(2.0 * r.s / sum) * p.rho_f.powf(2.0 * r.dx / sum);
    let mut out = vec![
        ("C'_I", c_i),
        ("C'_II", c_ii),
        ("C'_III", 64.0),
        ("C'_IV", c_iv),
        (
            "C'_slow",
            r.theta * (c_i + c_ii + c_iv) * r.sigma.powf(1.0 + r.d).max(r.sigma.powf(2.0 * r.d)),
        ),
        ("C'_fast", 1.0 + 64.0 * r.theta),
    ];
    out.extend(covering(p));
    out
}

pub fn noreg_exp_constants(p: &ProblemParams) -> Vec<(&'static str, f64)> {
    let r = raw(p);
    let k = p.c_c_prime * r.dy.powf((2.0 * r.s + r.dx) / (2.0 * r.s));
    let sum = 2.0 * r.s + r.dx;
    let inner = 8.0 * k * p.rho_f.powf(r.dx / r.s);
    let c_i = 8.0 * k.sqrt() / (1.0 - r.dx / (2.0 * r.s)) * inner.powf(r.s / sum) * p.rho_f.powf(r.dx / r.s + r.dx / sum);
    let c_ii = 8.0 * inner.powf(2.0 * r.s / sum);
    let mut out = vec![
        ("C'_I", c_i),
        ("C'_II", c_ii),
        ("C'_slow", r.theta * (c_i + c_ii) * r.sigma.powf(r.d)),
        ("C'_fast", 2.0),
    ];
    out.extend(covering(p));
    out
}

fn lookup(table: &[(&str, f64)], name: &str) -> f64 {
    table.iter().find(|(n, _)| *n == name).map(|(_, v)| *v).expect("oracle constant")
}

pub fn rate_prob_bound(p: &ProblemParams, t: f64, r_fstar: f64) -> f64 {
    let r = raw(p);
    let c = rate_prob_constants(p, r_fstar);
    lookup(&c, "C_slow") * r_fstar.powf(r.dp / 4.0).max(r_fstar.powf(r.dp / 2.0)) / t.powf(r.d)
        + lookup(&c, "C_fast") * r.sigma * r.log_inv_delta / t
}

pub fn rate_exp_bound(p: &ProblemParams, t: f64, r_fstar: f64) -> f64 {
    let r = raw(p);
    let c = rate_exp_constants(p, r_fstar);
    lookup(&c, "C_slow") * r_fstar.powf(r.dp / 2.0) / t.powf(r.d) + 2.0 * r.sigma / t
}

pub fn noreg_prob_bound(p: &ProblemParams, t: f64) -> f64 {
    let r = raw(p);
    let c = noreg_prob_constants(p);
    lookup(&c, "C'_slow") / t.powf(r.d) + lookup(&c, "C'_fast") * r.sigma * r.log_inv_delta / t
}

pub fn noreg_exp_bound(p: &ProblemParams, t: f64) -> f64 {
    let r = raw(p);
    let c = noreg_exp_constants(p);
    lookup(&c, "C'_slow") / t.powf(r.d) + 2.0 * r.sigma / t
}
