//! The truncated Poisson-type sum `Σ_{k≤v} (λ^k/k!)(v−k+1)/v`, its exact
//! rearrangement, the five-regime classification around `λ = v`, and the
//! predictors `G(δ)`, `E(y; δ)` for `H_Q(x, y, 2y)`.
//!
//! Two backends: exact rationals for identity checks, log-domain doubles for
//! sweeps. The floating path switches to logs once `λ > 700` or `v > 170`.

use std::f64::consts::{LN_2, PI};

use num::{BigInt, BigRational, One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::numeric::{ln_add_exp, ln_factorial, CompensatedSum};

const LINEAR_LAMBDA_MAX: f64 = 700.0;
const LINEAR_V_MAX: u64 = 170;

/// `1/log 4`, where the phase transition sits.
pub const DELTA_CRITICAL: f64 = 1.0 / (2.0 * LN_2);

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoissonParams {
    pub lambda: f64,
    pub v: u64,
    pub theta: f64,
}

impl PoissonParams {
    pub fn new(lambda: f64, v: u64) -> Result<Self> {
        if v == 0 || !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(LabError::Domain(format!("need v ≥ 1 and λ ≥ 0, got λ = {lambda}, v = {v}")));
        }
        Ok(PoissonParams { lambda, v, theta: lambda - v as f64 })
    }

    /// `λ = 2δ·loglog y`, `v = ⌊loglog y / log 2⌋`.
    pub fn from_loglog(loglog_y: f64, delta: f64) -> Result<Self> {
        check_delta(delta)?;
        let v = (loglog_y / LN_2).floor();
        if !(v >= 1.0) {
            return Err(LabError::Domain(format!(
                "loglog y = {loglog_y} gives v = {v}; need loglog y ≥ log 2"
            )));
        }
        Self::new(2.0 * delta * loglog_y, v as u64)
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta <= 1.0 {
        Ok(())
    } else {
        Err(LabError::Domain(format!("δ = {delta} outside (0, 1]")))
    }
}

/// `ln a_k = k ln λ − ln k! + ln(v − k + 1) − ln v`.
fn ln_term(lambda: f64, v: u64, k: u64) -> f64 {
    k as f64 * lambda.ln() - ln_factorial(k) + ((v - k + 1) as f64).ln() - (v as f64).ln()
}

/// Natural log of the Poisson-type sum (`−∞` when `λ = 0`).
pub fn poisson_sum_ln(lambda: f64, v: u64) -> f64 {
    if lambda == 0.0 {
        return f64::NEG_INFINITY;
    }
    if lambda <= LINEAR_LAMBDA_MAX && v <= LINEAR_V_MAX {
        return poisson_sum(lambda, v).ln();
    }
    let peak = (1..=v).map(|k| ln_term(lambda, v, k)).fold(f64::NEG_INFINITY, f64::max);
    let acc: CompensatedSum = (1..=v).map(|k| (ln_term(lambda, v, k) - peak).exp()).collect();
    peak + acc.value().ln()
}

/// The Poisson-type sum in double precision; may be `+∞` past the
/// overflow threshold, where [`poisson_sum_ln`] should be used.
pub fn poisson_sum(lambda: f64, v: u64) -> f64 {
    if lambda <= LINEAR_LAMBDA_MAX && v <= LINEAR_V_MAX {
        let mut term = 1.0;
        let mut acc = CompensatedSum::new();
        for k in 1..=v {
            term *= lambda / k as f64;
            acc.add(term * (v - k + 1) as f64);
        }
        acc.value() / v as f64
    } else {
        poisson_sum_ln(lambda, v).exp()
    }
}

/// `Σ_{k=1}^v λ^k/k!` exactly.
fn exp_partial_exact(lambda: &BigRational, v: u64) -> (BigRational, BigRational) {
    let mut term = BigRational::one();
    let mut acc = BigRational::zero();
    for k in 1..=v {
        term = term * lambda / BigRational::from_integer(BigInt::from(k));
        acc += &term;
    }
    (acc, term)
}

pub fn poisson_sum_exact(lambda: &BigRational, v: u64) -> BigRational {
    let mut term = BigRational::one();
    let mut acc = BigRational::zero();
    for k in 1..=v {
        term = term * lambda / BigRational::from_integer(BigInt::from(k));
        acc += &term * BigRational::from_integer(BigInt::from(v - k + 1));
    }
    acc / BigRational::from_integer(BigInt::from(v))
}

/// `((v−λ+1)/v)·Σ_{k≤v} λ^k/k! + (λ/v)(λ^v/v! − 1)`.
pub fn key_identity_rhs_exact(lambda: &BigRational, v: u64) -> BigRational {
    let vv = BigRational::from_integer(BigInt::from(v));
    let (partial, last) = exp_partial_exact(lambda, v);
    (&vv - lambda + BigRational::one()) / &vv * partial + lambda / &vv * (last - BigRational::one())
}

pub fn key_identity_rhs(lambda: f64, v: u64) -> f64 {
    let vf = v as f64;
    let mut term = 1.0;
    let mut partial = CompensatedSum::new();
    for k in 1..=v {
        term *= lambda / k as f64;
        partial.add(term);
    }
    (vf - lambda + 1.0) / vf * partial.value() + lambda / vf * (term - 1.0)
}

/// `ln(λ^k e^{−λ}/k!)` through Loader's deviance form, which keeps the
/// relative error near machine precision for `k, λ` up to `10^6` and beyond.
pub fn ln_poisson_pmf(k: u64, lambda: f64) -> f64 {
    if k == 0 {
        return -lambda;
    }
    let x = k as f64;
    -stirling_error(k) - deviance(x, lambda) - 0.5 * (2.0 * PI * x).ln()
}

/// `ln k! − [(k + ½) ln k − k + ½ ln 2π]`.
fn stirling_error(k: u64) -> f64 {
    let n = k as f64;
    if k <= 15 {
        return ln_factorial(k) - (n + 0.5) * n.ln() + n - 0.5 * (2.0 * PI).ln();
    }
    const S0: f64 = 1.0 / 12.0;
    const S1: f64 = 1.0 / 360.0;
    const S2: f64 = 1.0 / 1260.0;
    const S3: f64 = 1.0 / 1680.0;
    const S4: f64 = 1.0 / 1188.0;
    let nn = n * n;
    if k > 500 {
        (S0 - S1 / nn) / n
    } else if k > 80 {
        (S0 - (S1 - S2 / nn) / nn) / n
    } else if k > 35 {
        (S0 - (S1 - (S2 - S3 / nn) / nn) / nn) / n
    } else {
        (S0 - (S1 - (S2 - (S3 - S4 / nn) / nn) / nn) / nn) / n
    }
}

/// `x ln(x/μ) + μ − x`, cancellation-free near `x = μ`.
fn deviance(x: f64, mu: f64) -> f64 {
    if (x - mu).abs() < 0.1 * (x + mu) {
        let v = (x - mu) / (x + mu);
        let mut s = (x - mu) * v;
        let mut ej = 2.0 * x * v;
        let v2 = v * v;
        for j in 1..1000 {
            ej *= v2;
            let next = s + ej / (2 * j + 1) as f64;
            if next == s {
                return s;
            }
            s = next;
        }
        s
    } else {
        x * (x / mu).ln() + mu - x
    }
}

const WINDOW_SIGMAS: f64 = 40.0;

/// `e^{−λ} Σ_{0≤k≤λ+z} λ^k/k!`.
///
/// Terms are summed outward from the largest one in range using exact
/// ratios; terms more than 40 standard deviations below the mode are below
/// `e^{−800}` relative and are skipped.
pub fn partial_poisson(lambda: f64, z: f64) -> Result<f64> {
    if !(lambda > 0.0) || lambda > 1e6 {
        return Err(LabError::Domain(format!("λ = {lambda} outside (0, 10^6]")));
    }
    let top = lambda + z;
    if top < 0.0 {
        return Ok(0.0);
    }
    let top = top.floor() as u64;
    let anchor = top.min(lambda.floor() as u64);
    let floor = (lambda - WINDOW_SIGMAS * lambda.sqrt() - 50.0).max(0.0) as u64;
    let mut acc = CompensatedSum::new();
    acc.add(1.0);
    let mut rel = 1.0;
    let mut k = anchor;
    while k > floor {
        rel *= k as f64 / lambda;
        acc.add(rel);
        k -= 1;
        if rel < 1e-300 {
            break;
        }
    }
    rel = 1.0;
    for k in anchor + 1..=top {
        rel *= lambda / k as f64;
        acc.add(rel);
        if rel < 1e-20 * acc.value() {
            break;
        }
    }
    Ok((ln_poisson_pmf(anchor, lambda) + acc.value().ln()).exp())
}

/// `G(δ)`: `1 − δ` up to `1/log 4`, then `δ − (1 + log(δ log 2))/log 2`.
pub fn g_exponent(delta: f64) -> Result<f64> {
    check_delta(delta)?;
    Ok(if delta <= DELTA_CRITICAL {
        1.0 - delta
    } else {
        g_upper_branch(delta)
    })
}

pub(crate) fn g_upper_branch(delta: f64) -> f64 {
    delta - (1.0 + (delta * LN_2).ln()) / LN_2
}

/// `E(y; δ)` as a function of `loglog y`.
pub fn e_factor(loglog_y: f64, delta: f64) -> Result<f64> {
    check_delta(delta)?;
    if !(loglog_y > 0.0) {
        return Err(LabError::Domain(format!("loglog y = {loglog_y} must be positive")));
    }
    Ok(if delta <= DELTA_CRITICAL {
        (DELTA_CRITICAL - delta).max(1.0 / loglog_y.sqrt())
    } else {
        let gap = delta - DELTA_CRITICAL;
        1.0 / (loglog_y.powf(1.5) * (gap * gap).max(1.0 / loglog_y))
    })
}

/// `x ≥ y > e`, so that `loglog y > 0`.
fn check_xy(x: f64, y: f64) -> Result<()> {
    if y > std::f64::consts::E && x >= y {
        Ok(())
    } else {
        Err(LabError::Domain(format!("need x ≥ y > e, got x = {x}, y = {y}")))
    }
}

/// `ln` of `x (log x)^{δ−1} (log y)^{−G(δ)} E(y; δ)`.
pub fn main_term_ln(ln_x: f64, ln_y: f64, delta: f64) -> Result<f64> {
    let loglog_y = ln_y.ln();
    Ok(ln_x + (delta - 1.0) * ln_x.ln() - g_exponent(delta)? * loglog_y + e_factor(loglog_y, delta)?.ln())
}

pub fn main_term(x: f64, y: f64, delta: f64) -> Result<f64> {
    check_xy(x, y)?;
    Ok(main_term_ln(x.ln(), y.ln(), delta)?.exp())
}

/// `ln` of `x (log x)^{δ−1} (log y)^{−1−δ} Σ_{k≤v} (λ^k/k!)(v−k+1)/v`.
pub fn prop14_rhs_ln(ln_x: f64, ln_y: f64, delta: f64) -> Result<f64> {
    let loglog_y = ln_y.ln();
    let p = PoissonParams::from_loglog(loglog_y, delta)?;
    Ok(ln_x + (delta - 1.0) * ln_x.ln() - (1.0 + delta) * loglog_y + poisson_sum_ln(p.lambda, p.v))
}

pub fn prop14_rhs(x: f64, y: f64, delta: f64) -> Result<f64> {
    check_xy(x, y)?;
    Ok(prop14_rhs_ln(x.ln(), y.ln(), delta)?.exp())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    I,
    Ii,
    Iii,
    Iv,
    V,
}

impl Regime {
    pub const ALL: [Regime; 5] = [Regime::I, Regime::Ii, Regime::Iii, Regime::Iv, Regime::V];

    pub fn label(self) -> &'static str {
        match self {
            Regime::I => "i",
            Regime::Ii => "ii",
            Regime::Iii => "iii",
            Regime::Iv => "iv",
            Regime::V => "v",
        }
    }
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RegimeReport {
    pub regime: Regime,
    pub lambda: f64,
    pub v: u64,
    pub theta: f64,
    pub envelope_ln: f64,
    pub exact_sum_ln: f64,
    /// `ln(λ^v/v!)`, the alternative normalization.
    pub a_v_ln: f64,
    pub predicted_envelope: f64,
    pub exact_sum: f64,
    pub ratio: f64,
}

/// Regime by `θ = λ − v`, checking (iii), then (iv)/(v), then (i)/(ii).
///
/// (i) and (ii) are read as the `|θ| ≥ ελ` cases on either side, which is
/// one interpretation of "`δ` bounded away from `1/log 4`".
pub fn regime_of(lambda: f64, v: u64, epsilon: f64) -> Regime {
    let theta = lambda - v as f64;
    let root = lambda.sqrt();
    if theta.abs() <= root {
        Regime::Iii
    } else if theta <= -root && theta.abs() < epsilon * lambda {
        Regime::Iv
    } else if theta >= root && theta < epsilon * lambda {
        Regime::V
    } else if theta < 0.0 {
        Regime::I
    } else {
        Regime::Ii
    }
}

pub fn regime_envelope_ln(regime: Regime, lambda: f64, v: u64) -> f64 {
    let theta = lambda - v as f64;
    let a_v = v as f64 * lambda.ln() - ln_factorial(v);
    match regime {
        Regime::I => lambda,
        Regime::Ii => a_v - ((v + 1) as f64).ln(),
        Regime::Iii => a_v,
        Regime::Iv => theta.abs().ln() + lambda - lambda.ln(),
        Regime::V => a_v + (v as f64).ln() - 2.0 * theta.abs().ln(),
    }
}

pub fn classify_regime(lambda: f64, v: u64, epsilon: f64) -> Result<RegimeReport> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(LabError::Domain(format!("ε = {epsilon} outside (0, 1)")));
    }
    let p = PoissonParams::new(lambda, v)?;
    if lambda == 0.0 {
        return Err(LabError::Domain("λ must be positive to classify".into()));
    }
    let regime = regime_of(lambda, v, epsilon);
    let envelope_ln = regime_envelope_ln(regime, lambda, v);
    let exact_sum_ln = poisson_sum_ln(lambda, v);
    Ok(RegimeReport {
        regime,
        lambda,
        v,
        theta: p.theta,
        envelope_ln,
        exact_sum_ln,
        a_v_ln: v as f64 * lambda.ln() - ln_factorial(v),
        predicted_envelope: envelope_ln.exp(),
        exact_sum: exact_sum_ln.exp(),
        ratio: (exact_sum_ln - envelope_ln).exp(),
    })
}

/// Least `n ≥ 0` with `λ^{k−n}/(k−n)! ≤ ½ λ^k/k!`, capped at `k`.
pub fn h_k(lambda: f64, k: u64) -> u64 {
    let mut ratio = 1.0;
    for n in 1..=k {
        ratio *= (k - n + 1) as f64 / lambda;
        if ratio <= 0.5 {
            return n;
        }
    }
    k
}

/// `v_0 = v`, `v_{j+1} = v_j − h_{v_j}`, through the first term `≤ v/100`.
pub fn v_sequence(lambda: f64, v: u64) -> Vec<u64> {
    let stop = v as f64 / 100.0;
    let mut seq = vec![v];
    let mut cur = v;
    while cur as f64 > stop {
        let h = h_k(lambda, cur);
        assert!(h >= 1, "h_k vanished at k = {cur}");
        cur -= h;
        seq.push(cur);
    }
    seq
}

/// `ln` of the sum `Σ_{k≤v} λ^k/k!` (the untruncated-weight companion).
pub fn exp_partial_ln(lambda: f64, v: u64) -> f64 {
    (1..=v).fold(f64::NEG_INFINITY, |acc, k| {
        ln_add_exp(acc, k as f64 * lambda.ln() - ln_factorial(k))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use num::FromPrimitive;
    use statrs::distribution::{DiscreteCDF, Poisson};

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn poisson_sum_examples() {
        assert_eq!(poisson_sum(1.0, 1), 1.0);
        assert_eq!(poisson_sum(2.0, 2), 3.0);
        assert_eq!(poisson_sum(0.0, 5), 0.0);
        assert_eq!(poisson_sum_exact(&q(2, 1), 2), q(3, 1));
        assert_eq!(poisson_sum_ln(0.0, 5), f64::NEG_INFINITY);
    }

    #[test]
    fn key_identity_examples() {
        assert_eq!(key_identity_rhs(1.0, 1), 1.0);
        assert_eq!(key_identity_rhs(2.0, 2), 3.0);
        assert_eq!(key_identity_rhs(3.0, 2), 5.25);
        assert_eq!(poisson_sum(3.0, 2), 5.25);
        assert_eq!(key_identity_rhs_exact(&q(3, 1), 2), q(21, 4));
    }

    #[test]
    fn key_identity_exact_small_grid() {
        for v in 1..=12u64 {
            for lam in [q(1, 2), q(1, 1), q(7, 3), BigRational::from_u64(v + 3).unwrap()] {
                assert_eq!(poisson_sum_exact(&lam, v), key_identity_rhs_exact(&lam, v));
            }
        }
    }

    #[test]
    fn log_domain_matches_linear() {
        for (lam, v) in [(3.5, 10u64), (150.0, 160), (600.0, 170), (20.0, 5)] {
            let direct = poisson_sum(lam, v).ln();
            let peak = (1..=v).map(|k| ln_term(lam, v, k)).fold(f64::NEG_INFINITY, f64::max);
            let acc: f64 = (1..=v).map(|k| (ln_term(lam, v, k) - peak).exp()).sum();
            assert!((direct - (peak + acc.ln())).abs() < 1e-12 * direct.abs().max(1.0));
        }
        assert!(poisson_sum_ln(1e4, 10_000).is_finite());
    }

    #[test]
    fn terms_nonnegative() {
        for v in 1..50u64 {
            for k in 1..=v {
                assert!(ln_term(13.0, v, k).is_finite());
            }
        }
    }

    #[test]
    fn pmf_against_statrs() {
        for (k, lam) in [(0u64, 3.0), (5, 3.0), (100, 100.0), (130, 100.0), (10_000, 9_900.0)] {
            let ours = ln_poisson_pmf(k, lam);
            let naive = k as f64 * f64::ln(lam) - lam - ln_factorial(k);
            assert!((ours - naive).abs() < 1e-9, "k={k}: {ours} vs {naive}");
        }
    }

    #[test]
    fn partial_poisson_examples() {
        let at100 = partial_poisson(100.0, 0.0).unwrap();
        assert!((0.50..=0.53).contains(&at100));
        let cdf = Poisson::new(100.0).unwrap().cdf(100);
        assert!((at100 - cdf).abs() < 1e-9 * cdf, "{at100} vs {cdf}");
        assert!((partial_poisson(4.0, -4.0).unwrap() - (-4.0f64).exp()).abs() < 1e-15);
        assert_eq!(partial_poisson(4.0, -5.0).unwrap(), 0.0);
        let at1e4 = partial_poisson(1e4, 0.0).unwrap();
        assert!((at1e4 - 0.5).abs() < 0.005);
        assert!(partial_poisson(2e6, 0.0).is_err());
    }

    #[test]
    fn partial_poisson_against_statrs_cdf() {
        for lam in [0.5, 7.0, 55.5, 1000.0] {
            let dist = Poisson::new(lam).unwrap();
            for z in [-2.0 * f64::sqrt(lam), 0.0, 3.0 * f64::sqrt(lam)] {
                let ours = partial_poisson(lam, z).unwrap();
                if lam + z < 0.0 {
                    continue;
                }
                let theirs = dist.cdf((lam + z).floor() as u64);
                assert!((ours - theirs).abs() <= 1e-9 * theirs, "λ={lam} z={z}: {ours} vs {theirs}");
            }
        }
    }

    #[test]
    fn gaussian_limit_relative_error_shrinks() {
        // Φ(−1), Φ(0), Φ(1)
        let phi = [0.158_655_253_931_457_05, 0.5, 0.841_344_746_068_542_9];
        for (t, target) in [-1.0, 0.0, 1.0].into_iter().zip(phi) {
            let errs: Vec<f64> = [1e2, 1e3, 1e4]
                .into_iter()
                .map(|lam: f64| (partial_poisson(lam, t * lam.sqrt()).unwrap() - target).abs() / target)
                .collect();
            assert!(errs[2] < errs[0], "t={t}: {errs:?}");
            if t == 0.0 {
                assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
            }
        }
        // at λ = 10^3 the cut λ − √λ floors to 968, closer to the continuity
        // corrected point than at λ = 10^4 where √λ is an integer
        let at_1e3 = partial_poisson(1e3, -(1e3f64).sqrt()).unwrap();
        let at_1e4 = partial_poisson(1e4, -100.0).unwrap();
        assert!((at_1e3 - 0.159_596_464_161_483_7).abs() < 1e-9);
        assert!((at_1e4 - 0.159_871_182_245_283).abs() < 1e-9);
    }

    #[test]
    fn g_exponent_examples() {
        let mtc = 1.0 - (1.0 + LN_2.ln()) / LN_2;
        assert!((g_exponent(1.0).unwrap() - mtc).abs() < 1e-15);
        assert!((g_exponent(1.0).unwrap() - 0.086_071).abs() < 1e-6);
        assert_eq!(g_exponent(0.5).unwrap(), 0.5);
        let c = DELTA_CRITICAL;
        assert!((g_upper_branch(c) - (1.0 - c)).abs() < 1e-12);
        assert!((g_exponent(c).unwrap() - 0.278_652).abs() < 1e-6);
        assert!(g_exponent(0.0).is_err());
        assert!(g_exponent(1.5).is_err());
    }

    #[test]
    fn e_factor_examples() {
        assert!((e_factor(100.0, 0.5).unwrap() - 0.221_35).abs() < 1e-5);
        assert!((e_factor(100.0, DELTA_CRITICAL).unwrap() - 0.1).abs() < 1e-15);
        let gap: f64 = 1.0 - 1.0 / 4f64.ln();
        assert!((e_factor(100.0, 1.0).unwrap() - 1.0 / (1000.0 * gap * gap)).abs() < 1e-15);
        assert!((e_factor(100.0, 1.0).unwrap() - 0.012_879).abs() < 1e-6);
        assert!(e_factor(0.0, 0.5).is_err());
    }

    #[test]
    fn e_factor_continuous_at_junction() {
        for ll in [1.0, 10.0, 100.0] {
            let below = e_factor(ll, DELTA_CRITICAL).unwrap();
            let above = e_factor(ll, DELTA_CRITICAL + 1e-12).unwrap();
            assert!((below - above).abs() < 1e-9 * below.max(1.0), "{ll}: {below} vs {above}");
        }
    }

    #[test]
    fn main_term_examples() {
        let m = main_term(1e8, 1e4, 1.0).unwrap();
        assert!((m / 5.54e7 - 1.0).abs() < 2e-3, "{m}");
        let ee = std::f64::consts::E.exp();
        let m = main_term(ee, ee, 0.5).unwrap();
        assert!((m - (std::f64::consts::E - 1.0).exp()).abs() < 1e-12);
        assert!(main_term(100.0, 2.5, 0.5).is_err());
        assert!(main_term(10.0, 100.0, 0.5).is_err());
        let below = main_term(1e12, 1e6, DELTA_CRITICAL).unwrap();
        let above = main_term(1e12, 1e6, DELTA_CRITICAL + 1e-13).unwrap();
        assert!((below / above - 1.0).abs() < 1e-9);
    }

    #[test]
    fn prop14_examples() {
        // loglog y = log 2 exactly: v = 1, sum = λ = 2δ log 2
        let y = 2f64.exp();
        let x: f64 = 1e6;
        let delta = 0.6;
        let lhs = prop14_rhs_ln(x.ln(), y.ln(), delta).unwrap();
        let lam = 2.0 * delta * LN_2;
        let closed = x.ln() + (delta - 1.0) * x.ln().ln() - (1.0 + delta) * LN_2 + lam.ln();
        assert!((lhs - closed).abs() < 1e-12);
        let direct = prop14_rhs(1e8, 1e4, 1.0).unwrap();
        let ll = 1e4f64.ln().ln();
        let v = (ll / LN_2).floor() as u64;
        let mut oracle = 0.0;
        let mut fact = 1.0;
        for k in 1..=v {
            fact *= k as f64;
            oracle += (2.0 * ll).powi(k as i32) / fact * (v - k + 1) as f64 / v as f64;
        }
        oracle *= 1e8 / 1e4f64.ln().powi(2);
        assert!((direct / oracle - 1.0).abs() < 1e-12);
    }

    #[test]
    fn prop14_against_main_term_grid() {
        for delta in [0.3, 0.72, 1.0] {
            for ll in [3.0, 5.0, 10.0, 20.0, 50.0] {
                let ln_y = f64::exp(ll);
                let ln_x = 2.0 * ln_y;
                let r = (prop14_rhs_ln(ln_x, ln_y, delta).unwrap() - main_term_ln(ln_x, ln_y, delta).unwrap()).exp();
                assert!((1e-2..=1e2).contains(&r), "δ={delta} ll={ll}: {r}");
            }
        }
    }

    #[test]
    fn regime_examples() {
        let r = classify_regime(100.0, 100, 0.1).unwrap();
        assert_eq!(r.regime, Regime::Iii);
        assert!((r.envelope_ln - (100.0 * 100f64.ln() - ln_factorial(100))).abs() < 1e-9);
        let r = classify_regime(50.0, 100, 0.1).unwrap();
        assert_eq!(r.regime, Regime::I);
        assert_eq!(r.envelope_ln, 50.0);
        let r = classify_regime(121.0, 100, 0.3).unwrap();
        assert_eq!(r.regime, Regime::V);
        let expected = 100.0 * 121f64.ln() - ln_factorial(100) + (100.0f64 / 441.0).ln();
        assert!((r.envelope_ln - expected).abs() < 1e-9);
        assert!(classify_regime(10.0, 10, 1.5).is_err());
    }

    #[test]
    fn regime_boundaries_follow_priority() {
        // θ = √λ exactly: (iii) before (v)
        assert_eq!(regime_of(100.0, 90, 0.15), Regime::Iii);
        assert_eq!(regime_of(100.0, 110, 0.15), Regime::Iii);
        assert_eq!(regime_of(100.0, 70, 0.15), Regime::Ii);
        assert_eq!(regime_of(100.0, 130, 0.15), Regime::I);
        assert_eq!(regime_of(100.0, 112, 0.15), Regime::Iv);
    }

    #[test]
    fn h_k_examples() {
        assert_eq!(h_k(100.0, 50), 1);
        assert_eq!(h_k(4.0, 2), 1);
        assert_eq!(h_k(2.0, 2), 2);
        for k in 1..40u64 {
            assert!(h_k(50.0, k) >= 1 && h_k(50.0, k) <= k);
            assert!(h_k(0.3, k) <= k);
        }
    }

    #[test]
    fn v_sequence_examples() {
        assert_eq!(v_sequence(4.0, 2), vec![2, 1, 0]);
        let s = v_sequence(200.0, 100);
        assert!(s.windows(2).all(|w| w[0] > w[1]));
        assert!(*s.last().unwrap() as f64 <= 1.0);
        let s = v_sequence(101.0, 100);
        // just above λ ≈ v the ratios k/λ sink below 1 quickly, so the first
        // step is ≈ √(2λ log 2) rather than 1/log(λ/v)
        let ln_a = |k: u64| k as f64 * 101f64.ln() - ln_factorial(k);
        let oracle = (1..=100u64).find(|&n| ln_a(100 - n) <= ln_a(100) - LN_2).unwrap();
        assert_eq!(s[0] - s[1], oracle);
        assert_eq!(oracle, 12);
        assert!(s.windows(2).all(|w| w[0] > w[1]));
        // deep in the range the step does follow 1/log(λ/k)
        let k = 20u64;
        let step = h_k(101.0, k) as f64;
        let scale = 1.0 / (101.0 / k as f64).ln();
        assert!(step <= 2.0 * scale && step >= 0.25 * scale, "{step} vs {scale}");
    }

    proptest::proptest! {
        #[test]
        fn every_point_gets_one_regime(lam in 4.0f64..5000.0, v in 4u64..5000, eps in 0.001f64..0.199) {
            let r = regime_of(lam, v, eps);
            let theta = lam - v as f64;
            let root = lam.sqrt();
            let matches = [
                theta < 0.0 && theta.abs() >= eps * lam,
                theta > 0.0 && theta >= eps * lam,
                theta.abs() <= root,
                theta <= -root && theta.abs() < eps * lam,
                theta >= root && theta < eps * lam,
            ];
            let idx = Regime::ALL.iter().position(|&x| x == r).unwrap();
            proptest::prop_assert!(matches[idx]);
            proptest::prop_assert!(matches.iter().any(|&m| m));
        }

        #[test]
        fn identity_holds_in_floats(lam in 0.0f64..30.0, v in 1u64..60) {
            let a = poisson_sum(lam, v);
            let b = key_identity_rhs(lam, v);
            proptest::prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
        }
    }
}
