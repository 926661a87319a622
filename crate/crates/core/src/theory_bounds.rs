//! Closed-form theoretical quantities: Sobolev rates, covering numbers,
//! hypercontractivity constants, martingale offset complexity (MOC) bounds,
//! lower-isometry probabilities, admissible regularization weights and
//! burn-in thresholds.
//!
//! Everything here is a pure function of [`ProblemParams`]. Reports carry
//! every constant they use together with a formula string so that the
//! `bounds` subcommand can emit an audit trail.
//!
//! Unquantified constants (the covering constants `C_c` and `C'_c`, the
//! factor absorbed into `C_h`, and the proportionality constant between
//! `rho_tilde^2` and `rho_f^2 / kappa_u`) are explicit parameters with
//! default 1.

use crate::error::{Error, Result};

/// Problem-level parameters shared by every bound.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemParams {
    /// Sobolev order `s`.
    pub s: u32,
    /// Input dimension.
    pub dx: u32,
    /// Output dimension.
    pub dy: u32,
    /// Noise scale `sigma_W` (variance proxy of the sub-Gaussian noise).
    pub sigma_w: f64,
    /// Lower-isometry parameter, must exceed 8.
    pub theta: f64,
    /// Persistence constant `S >= 1`.
    pub persistence: f64,
    /// Scaled Sobolev radius entering the covering of the L2 sphere.
    pub rho_tilde: f64,
    /// Covering constant of the effective hypothesis class.
    pub c_c: f64,
    /// Covering constant of the full Sobolev ball (unregularized case).
    pub c_c_prime: f64,
    /// Sobolev radius of the hypothesis class.
    pub rho_f: f64,
    /// Multiplier applied to the hypercontractivity constant.
    pub c_h_factor: f64,
    /// Sup-norm bound `B` of the hypothesis class.
    pub sup_bound: f64,
    /// Failure probability.
    pub delta: f64,
    /// Half-width `L` of the input cube.
    pub half_width: f64,
}

impl Default for ProblemParams {
    fn default() -> Self {
        Self {
            s: 2,
            dx: 1,
            dy: 1,
            sigma_w: 1.0,
            theta: 9.0,
            persistence: 1.0,
            rho_tilde: 1.0,
            c_c: 1.0,
            c_c_prime: 1.0,
            rho_f: 1.0,
            c_h_factor: 1.0,
            sup_bound: 1.0,
            delta: 0.05,
            half_width: 1.0,
        }
    }
}

impl ProblemParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Domain(msg));
        if self.dx == 0 || self.dy == 0 || self.s == 0 {
            return bad("s, dx and dy must be at least 1".into());
        }
        if self.s < 2 * self.dx {
            return bad(format!(
                "Sobolev order s = {} must satisfy s >= 2 dx = {}",
                self.s,
                2 * self.dx
            ));
        }
        if !(self.theta > 8.0) {
            return bad(format!("theta = {} must exceed 8", self.theta));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad(format!("delta = {} must lie in (0, 1)", self.delta));
        }
        if !(self.persistence >= 1.0) {
            return bad(format!("S = {} must be at least 1", self.persistence));
        }
        for (name, v) in [
            ("sigma_w", self.sigma_w),
            ("rho_tilde", self.rho_tilde),
            ("c_c", self.c_c),
            ("c_c_prime", self.c_c_prime),
            ("rho_f", self.rho_f),
            ("c_h_factor", self.c_h_factor),
            ("sup_bound", self.sup_bound),
            ("half_width", self.half_width),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} = {v} must be positive and finite"));
            }
        }
        Ok(())
    }

    fn sf(&self) -> f64 {
        f64::from(self.s)
    }
    fn dxf(&self) -> f64 {
        f64::from(self.dx)
    }
    fn dyf(&self) -> f64 {
        f64::from(self.dy)
    }
    fn rates(&self) -> SobolevRates {
        sobolev_rates(self.s, self.dx)
    }
    fn log_inv_delta(&self) -> f64 {
        (1.0 / self.delta).ln()
    }
    /// Lebesgue measure of the input cube `[-L, L]^dx`.
    pub fn domain_volume(&self) -> f64 {
        (2.0 * self.half_width).powi(self.dx as i32)
    }
    /// `2 s - dx`, positive under validation.
    fn gap(&self) -> f64 {
        2.0 * self.sf() - self.dxf()
    }
}

/// A constant together with its defining formula, for audit output.
#[derive(Debug, Clone, PartialEq)]
pub struct NamedConstant {
    pub name: &'static str,
    pub value: f64,
    pub formula: &'static str,
}

fn named(name: &'static str, value: f64, formula: &'static str) -> NamedConstant {
    NamedConstant {
        name,
        value,
        formula,
    }
}

/// Replaces non-finite values by `+inf` and records that it happened.
fn cap(value: f64, overflow: &mut bool) -> f64 {
    if value.is_finite() {
        value
    } else {
        *overflow = true;
        f64::INFINITY
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SobolevRates {
    /// Minimax exponent `2s / (2s + dx)`.
    pub d: f64,
    /// Companion exponent `2dx / (2s + dx)`, equal to `2 (1 - d)`.
    pub d_prime: f64,
}

pub fn sobolev_rates(s: u32, dx: u32) -> SobolevRates {
    let (s, dx) = (f64::from(s), f64::from(dx));
    SobolevRates {
        d: 2.0 * s / (2.0 * s + dx),
        d_prime: 2.0 * dx / (2.0 * s + dx),
    }
}

/// Real-valued right-hand side of the truncation-level inequality
/// `m >= (16 rho^2 dx / ((2s - dx) eps^2))^(dx / (2s - dx))`.
pub fn m_eps_real(rho_tilde: f64, s: u32, dx: u32, eps: f64) -> f64 {
    let (sf, dxf) = (f64::from(s), f64::from(dx));
    let gap = 2.0 * sf - dxf;
    (16.0 * rho_tilde * rho_tilde * dxf / (gap * eps * eps)).powf(dxf / gap)
}

/// Smallest positive integer satisfying the truncation-level inequality.
pub fn m_eps(rho_tilde: f64, s: u32, dx: u32, eps: f64) -> Result<u64> {
    if !(eps > 0.0) {
        return Err(Error::Domain(format!("eps = {eps} must be positive")));
    }
    if 2 * s <= dx {
        return Err(Error::Domain("m_eps requires 2s > dx".into()));
    }
    let raw = m_eps_real(rho_tilde, s, dx, eps);
    if !raw.is_finite() || raw > 9.0e15 {
        return Err(Error::Infeasible(format!("truncation level {raw:e} is not representable")));
    }
    Ok((raw.ceil() as u64).max(1))
}

/// Log of the covering bound of the L2 sphere at resolution `eps` with `m`
/// retained shells: `m dy log(8 rho m^(s/dx) dy / eps + 1)`.
pub fn covering_claim_log(eps: f64, m: f64, params: &ProblemParams) -> f64 {
    let dy = params.dyf();
    let ratio = 8.0 * params.rho_tilde * m.powf(params.sf() / params.dxf()) * dy / eps;
    m * dy * ratio.ln_1p()
}

/// Constants of the covering and hypercontractivity corollary.
#[derive(Debug, Clone, PartialEq)]
pub struct CoveringConstants {
    /// `C_m = (16 rho^2 dx theta / (2s - dx))^(dx / (2s - dx))`.
    pub c_m: f64,
    /// `C_M = C_m dy`.
    pub c_big_m: f64,
    /// `C_L = 8 rho dy sqrt(theta) C_m^(s / dx)`.
    pub c_l: f64,
    /// `C_h = c_h_factor (Lambda / 32 + 8 Lambda (Lambda / 8 + 2)^2 C_m^2)`.
    pub c_h: f64,
    /// Lebesgue measure of the input cube.
    pub volume: f64,
}

pub fn covering_constants(theta: f64, params: &ProblemParams) -> CoveringConstants {
    let (sf, dxf) = (params.sf(), params.dxf());
    let gap = params.gap();
    let c_m = (16.0 * params.rho_tilde.powi(2) * dxf * theta / gap).powf(dxf / gap);
    let c_l = 8.0 * params.rho_tilde * params.dyf() * theta.sqrt() * c_m.powf(sf / dxf);
    let volume = params.domain_volume();
    CoveringConstants {
        c_m,
        c_big_m: c_m * params.dyf(),
        c_l,
        c_h: params.c_h_factor * ceps(volume, c_m),
        volume,
    }
}

/// Hypercontractivity expression `Lambda / 32 + 8 Lambda m^2 (Lambda / 8 + 2)^2`.
pub fn ceps(volume: f64, m: f64) -> f64 {
    volume / 32.0 + 8.0 * volume * m * m * (volume / 8.0 + 2.0).powi(2)
}

/// Exponents of `1/r` that recur in the corollary.
struct RadiusExponents {
    /// `2 dx / (2s - dx)`, for the shell count.
    shells: f64,
    /// `(4s - dx) / (2s - dx)`, inside the covering logarithm.
    inner: f64,
    /// `4 dx / (2s - dx)`, for the hypercontractivity constant.
    hyper: f64,
}

fn radius_exponents(params: &ProblemParams) -> RadiusExponents {
    let (sf, dxf, gap) = (params.sf(), params.dxf(), params.gap());
    RadiusExponents {
        shells: 2.0 * dxf / gap,
        inner: (4.0 * sf - dxf) / gap,
        hyper: 4.0 * dxf / gap,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoveringBoundary {
    /// Log of the covering number of the sphere of radius `r`.
    pub log_covering: f64,
    /// Real-valued shell count `C_m r^(-2dx / (2s - dx))`.
    pub m_real: f64,
    /// Integer shell count (ceiling of `m_real`, at least 1).
    pub m_r: u64,
    pub constants: CoveringConstants,
}

/// Covering of the L2 sphere of radius `r` at resolution `r / sqrt(theta)`.
pub fn covering_boundary(r: f64, theta: f64, params: &ProblemParams) -> Result<CoveringBoundary> {
    params.validate()?;
    if !(r > 0.0) {
        return Err(Error::Domain(format!("radius r = {r} must be positive")));
    }
    let k = covering_constants(theta, params);
    let e = radius_exponents(params);
    let inv = 1.0 / r;
    let m_real = k.c_m * inv.powf(e.shells);
    let log_covering = params.dyf() * m_real * (k.c_l * inv.powf(e.inner)).ln_1p();
    Ok(CoveringBoundary {
        log_covering,
        m_real,
        m_r: if m_real.is_finite() && m_real < 9.0e15 {
            (m_real.ceil() as u64).max(1)
        } else {
            u64::MAX
        },
        constants: k,
    })
}

/// Metric entropy bound of the effective class:
/// `C_c dy^((2s + dx) / (2s)) (sqrt(rho) / eps)^(dx / s)`.
pub fn covering_effective_class(rho: f64, eps: f64, params: &ProblemParams) -> Result<f64> {
    if !(rho > 0.0 && eps > 0.0) {
        return Err(Error::Domain(format!("rho = {rho} and eps = {eps} must be positive")));
    }
    let (sf, dxf) = (params.sf(), params.dxf());
    Ok(params.c_c * params.dyf().powf((2.0 * sf + dxf) / (2.0 * sf)) * (rho.sqrt() / eps).powf(dxf / sf))
}

/// Hypercontractivity parameter on the sphere of radius `r`:
/// `C_h r^(-4dx / (2s - dx))`.
pub fn hyper_constant(r: f64, theta: f64, params: &ProblemParams) -> Result<f64> {
    params.validate()?;
    if !(r > 0.0) {
        return Err(Error::Domain(format!("radius r = {r} must be positive")));
    }
    let k = covering_constants(theta, params);
    Ok(k.c_h * r.powf(-radius_exponents(params).hyper))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LowerIsometry {
    /// Probability bound clamped to `[0, 1]`.
    pub probability: f64,
    /// Natural log of the unclamped bound.
    pub log_raw: f64,
}

/// Bound on the probability of the lower-isometry failure event.
pub fn lower_isometry_prob(r: f64, t: f64, params: &ProblemParams) -> Result<LowerIsometry> {
    params.validate()?;
    if !(r > 0.0) || t < 0.0 {
        return Err(Error::Domain(format!("need r > 0 and T >= 0, got r = {r}, T = {t}")));
    }
    let cov = covering_boundary(r, params.theta, params)?;
    let e = radius_exponents(params);
    let decay = 8.0 * t * r.powf(e.hyper) / (params.theta.powi(2) * cov.constants.c_h * params.persistence);
    let log_raw = cov.log_covering - decay;
    let probability = if log_raw.is_nan() { 1.0 } else { log_raw.exp().min(1.0) };
    Ok(LowerIsometry {
        probability,
        log_raw,
    })
}

/// Constants of the in-probability MOC bound.
#[derive(Debug, Clone, PartialEq)]
pub struct MocConstantsProb {
    pub c_i: f64,
    pub c_ii: f64,
    pub c_iii: f64,
    pub c_iv: f64,
}

pub const C_III: f64 = 64.0;

pub fn moc_constants_prob(params: &ProblemParams) -> MocConstantsProb {
    let SobolevRates { d, .. } = params.rates();
    let (sf, dxf) = (params.sf(), params.dxf());
    let base = 8.0 * params.c_c * params.dyf().powf(1.0 / d);
    MocConstantsProb {
        c_i: 8.0 * (1.0 + (2.0 * params.log_inv_delta()).sqrt()) * base.powf(d / 2.0),
        c_ii: 2.0 * sf / (2.0 * sf - dxf)
            * 8.0
            * (params.c_c * params.dyf().powf(1.0 / d)).sqrt()
            * base.powf((2.0 * sf - dxf) / (2.0 * (2.0 * sf + dxf))),
        c_iii: C_III,
        c_iv: 8.0 * base.powf(d),
    }
}

/// Constants of the in-expectation MOC bound.
#[derive(Debug, Clone, PartialEq)]
pub struct MocConstantsExp {
    pub c_i: f64,
    pub c_ii: f64,
}

pub fn moc_constants_exp(params: &ProblemParams) -> MocConstantsExp {
    let SobolevRates { d, .. } = params.rates();
    let (sf, dxf) = (params.sf(), params.dxf());
    let base = 8.0 * params.c_c * params.dyf().powf(1.0 / d);
    MocConstantsExp {
        c_i: 8.0 * (params.c_c * params.dyf().powf(d)).sqrt() / (1.0 - dxf / (2.0 * sf))
            * base.powf((2.0 * sf - dxf) / (2.0 * (2.0 * sf + dxf))),
        c_ii: 8.0 * base.powf(d),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MocBoundProb {
    pub bound: f64,
    /// Chaining scale balancing the last two terms.
    pub gamma: f64,
    /// The three additive terms: `C_I` part, `(C_II + C_IV)` part, `C_III` part.
    pub terms: [f64; 3],
    pub constants: MocConstantsProb,
    pub overflow: bool,
}

fn check_t_rho(t: f64, rho: f64) -> Result<()> {
    if !(t >= 1.0) || !(rho > 0.0) {
        return Err(Error::Domain(format!("need T >= 1 and rho > 0, got T = {t}, rho = {rho}")));
    }
    Ok(())
}

/// High-probability bound on the MOC of the effective class of radius `rho`.
pub fn moc_bound_prob(t: f64, rho: f64, params: &ProblemParams) -> Result<MocBoundProb> {
    params.validate()?;
    check_t_rho(t, rho)?;
    let SobolevRates { d, d_prime } = params.rates();
    let k = moc_constants_prob(params);
    let sigma = params.sigma_w;
    let root = rho.sqrt();
    let terms = [
        k.c_i * sigma.powf(1.0 + d) * t.powf(-(1.0 + d) / 2.0) * root.powf(d_prime / 2.0),
        (k.c_ii + k.c_iv) * sigma.powf(d) * t.powf(-d) * root.powf(d_prime),
        k.c_iii * sigma * params.log_inv_delta() / t,
    ];
    let gamma = (8.0 * params.c_c * params.dyf().powf(1.0 / d)).powf(d / 2.0)
        * (sigma / t).powf(d / 2.0)
        * root.powf(d_prime / 2.0);
    let mut overflow = false;
    let bound = cap(terms.iter().sum(), &mut overflow);
    Ok(MocBoundProb {
        bound,
        gamma,
        terms,
        constants: k,
        overflow,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MocBoundExp {
    pub bound: f64,
    pub gamma: f64,
    pub constants: MocConstantsExp,
    pub overflow: bool,
}

/// Bound on the expected MOC: `(C_I + C_II) (sigma / T)^d sqrt(rho)^d'`.
pub fn moc_bound_exp(t: f64, rho: f64, params: &ProblemParams) -> Result<MocBoundExp> {
    params.validate()?;
    check_t_rho(t, rho)?;
    let SobolevRates { d, d_prime } = params.rates();
    let k = moc_constants_exp(params);
    let sigma = params.sigma_w;
    let gamma = (8.0 * params.c_c * params.dyf().powf(1.0 / d)).powf(d / 2.0)
        * (sigma / t).powf(d / 2.0)
        * rho.sqrt().powf(d_prime / 2.0);
    let mut overflow = false;
    let bound = cap((k.c_i + k.c_ii) * (sigma / t).powf(d) * rho.sqrt().powf(d_prime), &mut overflow);
    Ok(MocBoundExp {
        bound,
        gamma,
        constants: k,
        overflow,
    })
}

/// Whether a rate bound holds with high probability or in expectation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundKind {
    Probability,
    Expectation,
}

impl BoundKind {
    pub fn as_str(self) -> &'static str {
        match self {
            BoundKind::Probability => "prob",
            BoundKind::Expectation => "exp",
        }
    }
}

/// Largest horizon tried before declaring the burn-in unreachable.
const BURN_IN_CAP: f64 = 1.0e300;

/// Smallest `T >= 1` satisfying `T >= rhs(T)`, assuming the predicate is
/// monotone. Exponential search followed by bisection.
fn solve_burn_in(rhs: impl Fn(f64) -> f64) -> f64 {
    let ok = |t: f64| {
        let v = rhs(t);
        !v.is_nan() && t >= v
    };
    if ok(1.0) {
        return 1.0;
    }
    let mut lo = 1.0;
    let mut hi = 2.0;
    while !ok(hi) {
        lo = hi;
        hi *= 2.0;
        if hi > BURN_IN_CAP {
            return f64::INFINITY;
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if ok(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-9 * hi {
            break;
        }
    }
    hi
}

/// Right-hand side of the in-probability burn-in inequality at radius `r`.
fn burn_in_rhs_prob(r: f64, k: &CoveringConstants, params: &ProblemParams) -> f64 {
    let e = radius_exponents(params);
    let inv = 1.0 / r;
    params.theta.powi(2) * k.c_h * params.persistence / 8.0
        * (k.c_big_m * inv.powf(3.0 * e.shells) * (k.c_l * inv.powf(e.inner)).ln_1p()
            + inv.powf(e.hyper) * params.log_inv_delta())
}

/// Right-hand side of the in-expectation burn-in inequality at radius `r`.
///
/// The trailing logarithm is `log(T / sigma)`, which is what requiring the
/// failure term to stay below `sigma / T` produces.
fn burn_in_rhs_exp(r: f64, t: f64, k: &CoveringConstants, params: &ProblemParams) -> f64 {
    let e = radius_exponents(params);
    let inv = 1.0 / r;
    let log_cover = (4.0 * params.sup_bound.powi(2) * (1.0 + k.c_l * inv.powf(e.inner))).ln();
    params.theta.powi(2) * k.c_h * params.persistence / 8.0
        * inv.powf(e.hyper)
        * (k.c_big_m * inv.powf(e.shells) * log_cover + (t / params.sigma_w).ln())
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateBound {
    pub kind: BoundKind,
    pub t: f64,
    pub r_fstar: f64,
    pub bound: f64,
    pub slow_term: f64,
    pub fast_term: f64,
    pub c_slow: f64,
    pub c_fast: f64,
    /// Minimal admissible physics weight at this `T`.
    pub lambda_min: f64,
    /// Radius of the effective class, `10 R(f*)`.
    pub rho: f64,
    /// Critical radius squared used in the burn-in inequality.
    pub r_sq: f64,
    /// Burn-in threshold in `T` (`+inf` when unreachable).
    pub burn_in: f64,
    pub burn_in_ok: bool,
    pub moc: MocConstantsSet,
    pub covering: CoveringConstants,
    pub overflow: bool,
}

/// Either MOC constant family, depending on the bound kind.
#[derive(Debug, Clone, PartialEq)]
pub enum MocConstantsSet {
    Prob(MocConstantsProb),
    Exp(MocConstantsExp),
}

fn check_rate_inputs(t: f64, r_fstar: f64) -> Result<()> {
    if !(t >= 1.0) {
        return Err(Error::Domain(format!("T = {t} must be at least 1")));
    }
    if r_fstar == 0.0 {
        return Err(Error::Domain(
            "R(f*) = 0: the admissible physics weight divides by powers of R(f*) and is undefined".into(),
        ));
    }
    if !(r_fstar > 0.0 && r_fstar.is_finite()) {
        return Err(Error::Domain(format!("R(f*) = {r_fstar} must be positive and finite")));
    }
    Ok(())
}

fn lambda_min_prob(t: f64, r: f64, k: &MocConstantsProb, params: &ProblemParams) -> f64 {
    let SobolevRates { d, d_prime } = params.rates();
    let sigma = params.sigma_w;
    4.0 / (3.0 * t.powf(d))
        * (k.c_i * sigma.powf(1.0 + d) / r.powf(1.0 - d_prime / 4.0)
            + (k.c_ii + k.c_iv) * sigma.powf(2.0 * d) / r.powf(1.0 - d_prime / 2.0)
            + k.c_iii * sigma * params.log_inv_delta() / r)
}

fn lambda_min_exp(t: f64, r: f64, k: &MocConstantsExp, params: &ProblemParams) -> f64 {
    let SobolevRates { d, d_prime } = params.rates();
    4.0 * (k.c_i + k.c_ii) * params.sigma_w.powf(d) / (3.0 * t * r.powf(1.0 - d_prime / 2.0))
}

/// High-probability excess-risk rate with physics regularization, using the
/// minimal admissible weight at each horizon.
pub fn rate_bound_prob(t: f64, r_fstar: f64, params: &ProblemParams) -> Result<RateBound> {
    params.validate()?;
    check_rate_inputs(t, r_fstar)?;
    let SobolevRates { d, d_prime } = params.rates();
    let k = moc_constants_prob(params);
    let sigma = params.sigma_w;
    let (p4, p2) = (10f64.powf(d_prime / 4.0), 10f64.powf(d_prime / 2.0));
    let c_slow = (params.theta + 4.0)
        * (k.c_i * p4 * sigma.powf(1.0 + d) + k.c_ii * p2 * sigma.powf(2.0 * d) + k.c_iv * sigma.powf(2.0 * d) * p2);
    let c_fast = (params.theta + 4.0) * k.c_iii + 1.0;
    let slow_term = c_slow * r_fstar.powf(d_prime / 4.0).max(r_fstar.powf(d_prime / 2.0)) / t.powf(d);
    let fast_term = c_fast * sigma * params.log_inv_delta() / t;
    let cov = covering_constants(params.theta, params);
    let radius_sq = |tt: f64| lambda_min_prob(tt, r_fstar, &k, params) * r_fstar + sigma / tt;
    let burn_in = solve_burn_in(|tt| burn_in_rhs_prob(radius_sq(tt).sqrt(), &cov, params));
    let r_sq = radius_sq(t);
    let mut overflow = false;
    Ok(RateBound {
        kind: BoundKind::Probability,
        t,
        r_fstar,
        bound: cap(slow_term + fast_term, &mut overflow),
        slow_term,
        fast_term,
        c_slow: cap(c_slow, &mut overflow),
        c_fast,
        lambda_min: cap(lambda_min_prob(t, r_fstar, &k, params), &mut overflow),
        rho: 10.0 * r_fstar,
        r_sq,
        burn_in_ok: t >= burn_in_rhs_prob(r_sq.sqrt(), &cov, params),
        burn_in,
        moc: MocConstantsSet::Prob(k),
        covering: cov,
        overflow,
    })
}

/// Excess-risk rate in expectation with physics regularization.
pub fn rate_bound_exp(t: f64, r_fstar: f64, params: &ProblemParams) -> Result<RateBound> {
    params.validate()?;
    check_rate_inputs(t, r_fstar)?;
    let SobolevRates { d, d_prime } = params.rates();
    let k = moc_constants_exp(params);
    let sigma = params.sigma_w;
    let c_slow = (params.theta + 4.0) * 10f64.powf(d_prime / 2.0) * (k.c_i + k.c_ii) * sigma.powf(d);
    let c_fast = 2.0;
    let slow_term = c_slow * r_fstar.powf(d_prime / 2.0) / t.powf(d);
    let fast_term = c_fast * sigma / t;
    let cov = covering_constants(params.theta, params);
    let radius_sq = |tt: f64| 2.0 * lambda_min_exp(tt, r_fstar, &k, params) * r_fstar + sigma / tt;
    let burn_in = solve_burn_in(|tt| burn_in_rhs_exp(radius_sq(tt).sqrt(), tt, &cov, params));
    let r_sq = radius_sq(t);
    let mut overflow = false;
    Ok(RateBound {
        kind: BoundKind::Expectation,
        t,
        r_fstar,
        bound: cap(slow_term + fast_term, &mut overflow),
        slow_term,
        fast_term,
        c_slow: cap(c_slow, &mut overflow),
        c_fast,
        lambda_min: cap(lambda_min_exp(t, r_fstar, &k, params), &mut overflow),
        rho: 10.0 * r_fstar,
        r_sq,
        burn_in_ok: t >= burn_in_rhs_exp(r_sq.sqrt(), t, &cov, params),
        burn_in,
        moc: MocConstantsSet::Exp(k),
        covering: cov,
        overflow,
    })
}

/// Constants of the unregularized rates.
#[derive(Debug, Clone, PartialEq)]
pub enum NoRegConstants {
    Prob {
        c_i: f64,
        c_ii: f64,
        c_iii: f64,
        c_iv: f64,
    },
    Exp {
        c_i: f64,
        c_ii: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoRegRate {
    pub kind: BoundKind,
    pub t: f64,
    pub bound: f64,
    pub slow_term: f64,
    pub fast_term: f64,
    pub c_slow_prime: f64,
    pub c_fast_prime: f64,
    pub burn_in: f64,
    pub burn_in_ok: bool,
    pub constants: NoRegConstants,
    pub covering: CoveringConstants,
    pub overflow: bool,
}

pub fn noreg_constants(kind: BoundKind, params: &ProblemParams) -> NoRegConstants {
    let (sf, dxf, dy) = (params.sf(), params.dxf(), params.dyf());
    let q = (2.0 * sf + dxf) / (2.0 * sf);
    let cc = params.c_c_prime * dy.powf(q);
    let rho = params.rho_f;
    match kind {
        BoundKind::Probability => NoRegConstants::Prob {
            c_i: 8.0
                * (8.0 * cc).powf(sf / (2.0 * sf + dxf))
                * (1.0 + (2.0 * params.log_inv_delta()).sqrt())
                * rho.powf(dxf / (2.0 * sf + dxf)),
            c_ii: 8.0 * cc.sqrt() / (1.0 - dxf / (2.0 * sf))
                * (8.0 * cc).powf((2.0 * sf - dxf) / (2.0 * (2.0 * sf + dxf)))
                * rho.powf(2.0 * dxf / (2.0 * sf + dxf)),
            c_iii: C_III,
            c_iv: 8.0 * (8.0 * cc).powf(2.0 * sf / (2.0 * sf + dxf)) * rho.powf(2.0 * dxf / (2.0 * sf + dxf)),
        },
        BoundKind::Expectation => {
            let inner = 8.0 * cc * rho.powf(dxf / sf);
            NoRegConstants::Exp {
                c_i: 8.0 * cc.sqrt() / (1.0 - dxf / (2.0 * sf))
                    * inner.powf(sf / (2.0 * sf + dxf))
                    * rho.powf(dxf / sf + dxf / (2.0 * sf + dxf)),
                c_ii: 8.0 * inner.powf(2.0 * sf / (2.0 * sf + dxf)),
            }
        }
    }
}

/// Excess-risk rate without physics regularization.
pub fn noreg_rate(t: f64, kind: BoundKind, params: &ProblemParams) -> Result<NoRegRate> {
    params.validate()?;
    if !(t >= 1.0) {
        return Err(Error::Domain(format!("T = {t} must be at least 1")));
    }
    let SobolevRates { d, .. } = params.rates();
    let sigma = params.sigma_w;
    let constants = noreg_constants(kind, params);
    let cov = covering_constants(params.theta, params);
    let (c_slow_prime, c_fast_prime, fast_term, burn_in, burn_in_ok) = match &constants {
        NoRegConstants::Prob { c_i, c_ii, c_iii, c_iv } => {
            let c_slow = params.theta * (c_i + c_ii + c_iv) * sigma.powf(1.0 + d).max(sigma.powf(2.0 * d));
            let c_fast = 1.0 + params.theta * c_iii;
            let rhs = |tt: f64| burn_in_rhs_prob((sigma / tt).sqrt(), &cov, params);
            let threshold = solve_burn_in(rhs);
            (c_slow, c_fast, c_fast * sigma * params.log_inv_delta() / t, threshold, t >= rhs(t))
        }
        NoRegConstants::Exp { c_i, c_ii } => {
            let c_slow = params.theta * (c_i + c_ii) * sigma.powf(d);
            let c_fast = 2.0;
            let rhs = |tt: f64| burn_in_rhs_exp((sigma / tt).sqrt(), tt, &cov, params);
            let threshold = solve_burn_in(rhs);
            (c_slow, c_fast, c_fast * sigma / t, threshold, t >= rhs(t))
        }
    };
    let slow_term = c_slow_prime / t.powf(d);
    let mut overflow = false;
    Ok(NoRegRate {
        kind,
        t,
        bound: cap(slow_term + fast_term, &mut overflow),
        slow_term,
        fast_term,
        c_slow_prime: cap(c_slow_prime, &mut overflow),
        c_fast_prime,
        burn_in,
        burn_in_ok,
        constants,
        covering: cov,
        overflow,
    })
}

impl CoveringConstants {
    pub fn audit(&self) -> Vec<NamedConstant> {
        vec![
            named("C_m", self.c_m, "(16 rho_tilde^2 dx theta / (2s - dx))^(dx / (2s - dx))"),
            named("C_M", self.c_big_m, "C_m dy"),
            named("C_L", self.c_l, "8 rho_tilde dy sqrt(theta) C_m^(s / dx)"),
            named("C_h", self.c_h, "c_h_factor (Lambda / 32 + 8 Lambda (Lambda / 8 + 2)^2 C_m^2), Lambda = (2L)^dx"),
        ]
    }
}

impl MocConstantsProb {
    pub fn audit(&self) -> Vec<NamedConstant> {
        vec![
            named("C_I", self.c_i, "8 (1 + sqrt(2 log(1/delta))) (8 C_c dy^(1/d))^(d/2)"),
            named(
                "C_II",
                self.c_ii,
                "2s / (2s - dx) * 8 sqrt(C_c dy^(1/d)) (8 C_c dy^(1/d))^((2s - dx) / (2 (2s + dx)))",
            ),
            named("C_III", self.c_iii, "64"),
            named("C_IV", self.c_iv, "8 (8 C_c dy^(1/d))^d"),
        ]
    }
}

impl MocConstantsExp {
    pub fn audit(&self) -> Vec<NamedConstant> {
        vec![
            named(
                "C_I",
                self.c_i,
                "8 sqrt(C_c dy^d) / (1 - dx / (2s)) (8 C_c dy^(1/d))^((2s - dx) / (2 (2s + dx)))",
            ),
            named("C_II", self.c_ii, "8 (8 C_c dy^(1/d))^d"),
        ]
    }
}

impl RateBound {
    pub fn audit(&self) -> Vec<NamedConstant> {
        let mut out = match &self.moc {
            MocConstantsSet::Prob(k) => k.audit(),
            MocConstantsSet::Exp(k) => k.audit(),
        };
        match self.kind {
            BoundKind::Probability => {
                out.push(named(
                    "C_slow",
                    self.c_slow,
                    "(theta + 4) (C_I 10^(d'/4) sigma^(1+d) + C_II 10^(d'/2) sigma^(2d) + C_IV sigma^(2d) 10^(d'/2))",
                ));
                out.push(named("C_fast", self.c_fast, "(theta + 4) C_III + 1"));
            }
            BoundKind::Expectation => {
                out.push(named("C_slow", self.c_slow, "(theta + 4) 10^(d'/2) (C_I + C_II) sigma^d"));
                out.push(named("C_fast", self.c_fast, "2"));
            }
        }
        out.push(named("rho", self.rho, "10 R(f*)"));
        out.extend(self.covering.audit());
        out
    }
}

impl NoRegRate {
    pub fn audit(&self) -> Vec<NamedConstant> {
        let mut out = match &self.constants {
            NoRegConstants::Prob { c_i, c_ii, c_iii, c_iv } => vec![
                named(
                    "C'_I",
                    *c_i,
                    "8 (8 C'_c dy^((2s+dx)/(2s)))^(s/(2s+dx)) (1 + sqrt(2 log(1/delta))) rho_f^(dx/(2s+dx))",
                ),
                named(
                    "C'_II",
                    *c_ii,
                    "8 sqrt(C'_c dy^((2s+dx)/(2s))) / (1 - dx/(2s)) (8 C'_c dy^((2s+dx)/(2s)))^((2s-dx)/(2(2s+dx))) rho_f^(2dx/(2s+dx))",
                ),
                named("C'_III", *c_iii, "64"),
                named(
                    "C'_IV",
                    *c_iv,
                    "8 (8 C'_c dy^((2s+dx)/(2s)))^(2s/(2s+dx)) rho_f^(2dx/(2s+dx))",
                ),
                named("C'_slow", self.c_slow_prime, "theta (C'_I + C'_II + C'_IV) max(sigma^(1+d), sigma^(2d))"),
                named("C'_fast", self.c_fast_prime, "1 + theta C'_III"),
            ],
            NoRegConstants::Exp { c_i, c_ii } => vec![
                named(
                    "C'_I",
                    *c_i,
                    "8 sqrt(C'_c dy^((2s+dx)/(2s))) / (1 - dx/(2s)) (8 C'_c dy^((2s+dx)/(2s)) rho_f^(dx/s))^(s/(2s+dx)) rho_f^(dx/s + dx/(2s+dx))",
                ),
                named("C'_II", *c_ii, "8 (8 C'_c dy^((2s+dx)/(2s)) rho_f^(dx/s))^(2s/(2s+dx))"),
                named("C'_slow", self.c_slow_prime, "theta (C'_I + C'_II) sigma^d"),
                named("C'_fast", self.c_fast_prime, "2"),
            ],
        };
        out.extend(self.covering.audit());
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn base() -> ProblemParams {
        ProblemParams::default()
    }

    #[test]
    fn rates_match_examples() {
        let r = sobolev_rates(2, 1);
        assert_relative_eq!(r.d, 0.8, max_relative = 1e-15);
        assert_relative_eq!(r.d_prime, 0.4, max_relative = 1e-15);
        assert_relative_eq!(r.d, 1.0 - r.d_prime / 2.0, max_relative = 1e-15);
        assert_relative_eq!(sobolev_rates(100, 1).d, 200.0 / 201.0, max_relative = 1e-15);
    }

    #[test]
    fn m_eps_examples() {
        assert_eq!(m_eps(1.0, 2, 1, 1e6).unwrap(), 1);
        assert_eq!(m_eps(1.0, 2, 1, 1.0).unwrap(), 2);
        // Substitution: 2 satisfies the inequality, 1 does not.
        let rhs = (16.0f64 / 3.0).powf(1.0 / 3.0);
        assert!(2.0 >= rhs && 1.0 < rhs);
        let ratio = m_eps_real(1.0, 2, 1, 0.5) / m_eps_real(1.0, 2, 1, 1.0);
        assert_relative_eq!(ratio, 2f64.powf(2.0 / 3.0), max_relative = 1e-14);
        assert!(m_eps(1.0, 2, 1, 0.0).is_err());
    }

    #[test]
    fn covering_boundary_agrees_with_claim() {
        let p = ProblemParams {
            theta: 9.0,
            ..base()
        };
        let r = 0.5;
        let cb = covering_boundary(r, 9.0, &p).unwrap();
        let claim = covering_claim_log(r / 3.0, cb.m_real, &p);
        assert_relative_eq!(cb.log_covering, claim, max_relative = 1e-12);
        // Direct substitution: C_m = (16 * 9 / 3)^(1/3) = 48^(1/3).
        let c_m = 48f64.powf(1.0 / 3.0);
        let c_l = 8.0 * 3.0 * c_m.powi(2);
        let want = c_m * 2f64.powf(2.0 / 3.0) * (c_l * 2f64.powf(7.0 / 3.0)).ln_1p();
        assert_relative_eq!(cb.log_covering, want, max_relative = 1e-12);
        assert!(covering_boundary(r / 2.0, 9.0, &p).unwrap().log_covering >= cb.log_covering);
    }

    #[test]
    fn effective_class_examples() {
        let p = base();
        assert_relative_eq!(covering_effective_class(4.0, 1.0, &p).unwrap(), 2f64.sqrt(), max_relative = 1e-14);
        assert_relative_eq!(covering_effective_class(9.0, 3.0, &p).unwrap(), 1.0, max_relative = 1e-14);
        let ratio = covering_effective_class(8.0, 1.0, &p).unwrap() / covering_effective_class(4.0, 1.0, &p).unwrap();
        assert_relative_eq!(ratio, 2f64.powf(0.25), max_relative = 1e-14);
    }

    #[test]
    fn hyper_constant_examples() {
        assert_eq!(ceps(2.0, 2.0), 324.0625);
        let p = base();
        let c1 = hyper_constant(1.0, 9.0, &p).unwrap();
        assert_relative_eq!(c1, covering_constants(9.0, &p).c_h, max_relative = 1e-15);
        let ratio = hyper_constant(0.25, 9.0, &p).unwrap() / hyper_constant(0.5, 9.0, &p).unwrap();
        assert_relative_eq!(ratio, 2f64.powf(4.0 / 3.0), max_relative = 1e-13);
    }

    #[test]
    fn lower_isometry_limits() {
        let p = base();
        assert_eq!(lower_isometry_prob(0.5, 0.0, &p).unwrap().probability, 1.0);
        assert_eq!(lower_isometry_prob(0.5, 1e30, &p).unwrap().probability, 0.0);
        let mut last = f64::INFINITY;
        for k in 0..40 {
            let li = lower_isometry_prob(0.5, 10f64.powf(k as f64 * 0.25), &p).unwrap();
            assert!((0.0..=1.0).contains(&li.probability));
            assert!(li.log_raw <= last);
            last = li.log_raw;
        }
    }

    #[test]
    fn moc_bounds_structure() {
        let p = ProblemParams {
            delta: (-1.0f64).exp(),
            sigma_w: 0.3,
            ..base()
        };
        let b = moc_bound_prob(100.0, 2.0, &p).unwrap();
        assert_eq!(b.constants.c_iii, 64.0);
        assert_relative_eq!(b.terms[2], 64.0 * 0.3 / 100.0, max_relative = 1e-14);
        let e1 = moc_bound_exp(100.0, 2.0, &p).unwrap().bound;
        let e2 = moc_bound_exp(200.0, 2.0, &p).unwrap().bound;
        assert_relative_eq!(e2 / e1, 2f64.powf(-0.8), max_relative = 1e-13);
        let e4 = moc_bound_exp(100.0, 8.0, &p).unwrap().bound;
        assert_relative_eq!(e4 / e1, 2f64.powf(0.4), max_relative = 1e-13);
        // s=2, dx=1, dy=1, C_c=1: C_II = 8 * 8^0.8, C_I = 8 / 0.75 * 8^(3/10).
        let k = moc_constants_exp(&p);
        assert_relative_eq!(k.c_ii, 8.0 * 8f64.powf(0.8), max_relative = 1e-14);
        assert_relative_eq!(k.c_i, 8.0 / 0.75 * 8f64.powf(0.3), max_relative = 1e-14);
    }

    #[test]
    fn rate_bound_rejects_exact_alignment_and_echoes_rho() {
        let p = base();
        assert!(rate_bound_prob(100.0, 0.0, &p).is_err());
        let b = rate_bound_prob(100.0, 0.3, &p).unwrap();
        assert_relative_eq!(b.rho, 3.0, max_relative = 1e-15);
        assert_eq!(rate_bound_exp(100.0, 0.3, &p).unwrap().c_fast, 2.0);
        assert!(b.burn_in.is_finite() && b.burn_in > 1.0);
        assert_eq!(b.burn_in_ok, 100.0 >= b.burn_in);
    }

    #[test]
    fn slow_term_vanishes_under_alignment() {
        let p = base();
        let mut last = f64::INFINITY;
        let fast = rate_bound_prob(1e4, 0.1, &p).unwrap().fast_term;
        for k in 1..=8 {
            let b = rate_bound_prob(1e4, 10f64.powi(-k), &p).unwrap();
            assert!(b.slow_term < last);
            assert_eq!(b.fast_term, fast);
            last = b.slow_term;
        }
        // Below R = 1 the slow term scales as R^{d'/4}.
        let d_prime = sobolev_rates(p.s, p.dx).d_prime;
        let first = rate_bound_prob(1e4, 0.1, &p).unwrap().slow_term;
        assert_relative_eq!(last / first, 1e-7f64.powf(d_prime / 4.0), max_relative = 1e-9);
    }

    #[test]
    fn noreg_constants_by_substitution() {
        let p = base();
        let r = noreg_rate(1000.0, BoundKind::Expectation, &p).unwrap();
        match r.constants {
            NoRegConstants::Exp { c_i, c_ii } => {
                assert_relative_eq!(c_i, 8.0 / 0.75 * 8f64.powf(0.4), max_relative = 1e-14);
                assert_relative_eq!(c_ii, 8.0 * 8f64.powf(0.8), max_relative = 1e-14);
            }
            _ => unreachable!(),
        }
        let t2 = noreg_rate(2000.0, BoundKind::Expectation, &p).unwrap();
        assert_relative_eq!(t2.slow_term / r.slow_term, 2f64.powf(-0.8), max_relative = 1e-13);
    }

    #[test]
    fn validation() {
        assert!(ProblemParams { s: 1, ..base() }.validate().is_err());
        assert!(ProblemParams { theta: 8.0, ..base() }.validate().is_err());
        assert!(ProblemParams { persistence: 0.5, ..base() }.validate().is_err());
        assert!(ProblemParams { delta: 1.0, ..base() }.validate().is_err());
    }
}
