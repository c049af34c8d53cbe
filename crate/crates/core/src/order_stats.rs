//! Uniform order statistics under lower barriers: closed forms, an exact
//! rational recursion, and Monte Carlo estimates for the barrier events,
//! the strong-barrier region `𝒴_k`, the integral `U_k(v)` and the region
//! `𝒯(k, v, γ)`.

use num::{BigInt, BigRational, One, Signed, ToPrimitive, Zero};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::numeric::log2_add_exp2;
use crate::rng::{run_chunked, McEstimate, MeanAcc};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplingMethod {
    /// Draw `k` uniforms and sort them.
    #[default]
    Sort,
    /// Normalized partial sums of `k + 1` exponential spacings.
    Spacings,
}

/// Fills `out` with `out.len()` ordered uniforms on `[0, 1]`.
pub fn fill_ordered_uniforms(out: &mut [f64], rng: &mut ChaCha8Rng, method: SamplingMethod) {
    match method {
        SamplingMethod::Sort => {
            for x in out.iter_mut() {
                *x = rng.random::<f64>();
            }
            out.sort_unstable_by(f64::total_cmp);
        }
        SamplingMethod::Spacings => {
            let mut total = 0.0;
            for x in out.iter_mut() {
                total += -(1.0 - rng.random::<f64>()).ln();
                *x = total;
            }
            total += -(1.0 - rng.random::<f64>()).ln();
            for x in out.iter_mut() {
                *x /= total;
            }
        }
    }
}

pub fn sample_ordered_uniforms(k: usize, rng: &mut ChaCha8Rng, method: SamplingMethod) -> Vec<f64> {
    let mut out = vec![0.0; k];
    fill_ordered_uniforms(&mut out, rng, method);
    out
}

/// Estimates `P(ξ ∈ region)` for `k` ordered uniforms.
pub fn event_probability_mc(
    k: usize,
    n_samples: u64,
    seed: u64,
    member: impl Fn(&[f64]) -> bool + Sync,
) -> McEstimate {
    let hits = run_chunked(
        n_samples,
        seed,
        || (0u64, vec![0.0; k]),
        |rng, (hits, buf)| {
            fill_ordered_uniforms(buf, rng, SamplingMethod::Sort);
            if member(buf) {
                *hits += 1;
            }
        },
        |a, b| a.0 += b.0,
    )
    .0;
    McEstimate::from_hits(hits, n_samples, seed)
}

fn check_daniels_range(u: f64, v: f64, k: usize) -> Result<()> {
    if !(v > 0.0) {
        return Err(LabError::Domain(format!("v = {v} must be positive")));
    }
    if !(u > k as f64 - v && u <= 1.0) {
        return Err(LabError::ValidityRange(format!(
            "need k − v < u ≤ 1, got k = {k}, v = {v}, u = {u}"
        )));
    }
    Ok(())
}

/// Daniels' closed form `Q_k(u,v) = (w/v)(1 + u/v)^{k−1}`, `w = u + v − k`,
/// valid for `k − v < u ≤ 1`. At `u = 1` this is `(w/v)(1 + 1/v)^{k−1}`.
pub fn qk_exact(u: f64, v: f64, k: usize) -> Result<f64> {
    check_daniels_range(u, v, k)?;
    let w = u + v - k as f64;
    Ok(w / v * (1.0 + u / v).powi(k as i32 - 1))
}

pub fn qk_exact_rational(u: &BigRational, v: &BigRational, k: usize) -> Result<BigRational> {
    let kk = BigRational::from_integer(BigInt::from(k));
    if !v.is_positive() {
        return Err(LabError::Domain("v must be positive".into()));
    }
    if !(*u > &kk - v && *u <= BigRational::one()) {
        return Err(LabError::ValidityRange(format!("need k − v < u ≤ 1 (k = {k}, v = {v}, u = {u})")));
    }
    let w = u + v - &kk;
    let base = BigRational::one() + u / v;
    Ok(w / v * num::pow(base, k - 1))
}

/// `(u + 1)(w + 1)/k`, the upper envelope without its implied constant.
pub fn qk_upper(u: f64, w: f64, k: usize) -> f64 {
    (u + 1.0) * (w + 1.0) / k as f64
}

/// Monte Carlo estimate of `P(ξ_i ≥ (i − u)/v for all i)`.
pub fn qk_mc(u: f64, v: f64, k: usize, n_samples: u64, seed: u64) -> McEstimate {
    let bounds: Vec<f64> = (1..=k).map(|i| (i as f64 - u) / v).collect();
    event_probability_mc(k, n_samples, seed, |xi| {
        xi.iter().zip(&bounds).all(|(x, b)| x >= b)
    })
}

fn factorial_f64(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

fn factorial(k: usize) -> BigInt {
    (1..=k).fold(BigInt::one(), |acc, i| acc * BigInt::from(i))
}

/// `Vol(S_k(u,v)) = Q_k(u,v)/k!`.
pub fn vol_sk_exact(u: f64, v: f64, k: usize) -> Result<f64> {
    Ok(qk_exact(u, v, k)? / factorial_f64(k))
}

pub fn vol_sk_exact_rational(u: &BigRational, v: &BigRational, k: usize) -> Result<BigRational> {
    Ok(qk_exact_rational(u, v, k)? / BigRational::from_integer(factorial(k)))
}

/// Dense polynomial with rational coefficients, lowest degree first.
#[derive(Clone, Debug, PartialEq)]
pub struct RationalPoly(pub Vec<BigRational>);

impl RationalPoly {
    pub fn one() -> Self {
        RationalPoly(vec![BigRational::one()])
    }

    pub fn eval(&self, t: &BigRational) -> BigRational {
        self.0
            .iter()
            .rev()
            .fold(BigRational::zero(), |acc, c| acc * t + c)
    }

    /// `t ↦ ∫_a^t self(s) ds`.
    pub fn integral_from(&self, a: &BigRational) -> Self {
        let mut coeffs = Vec::with_capacity(self.0.len() + 1);
        coeffs.push(BigRational::zero());
        for (i, c) in self.0.iter().enumerate() {
            coeffs.push(c / BigRational::from_integer(BigInt::from(i + 1)));
        }
        let mut p = RationalPoly(coeffs);
        let at_a = p.eval(a);
        p.0[0] -= at_a;
        p
    }
}

/// Exact `Vol{0 ≤ ξ_1 ≤ ⋯ ≤ ξ_k ≤ 1 : ξ_i ≥ a_i}` for nondecreasing bounds
/// in `[0, 1]`.
///
/// With `F_0 ≡ 1` and `F_i(t) = ∫_{a_i}^t F_{i−1}(s) ds`, the volume is
/// `F_k(1)`. Because the bounds are sorted, each `F_i` is a single polynomial
/// on `[a_i, 1]`.
pub fn vol_lower_barrier_exact(bounds: &[BigRational]) -> Result<BigRational> {
    let zero = BigRational::zero();
    let one = BigRational::one();
    for w in bounds.windows(2) {
        if w[0] > w[1] {
            return Err(LabError::Domain("barrier bounds must be nondecreasing".into()));
        }
    }
    if bounds.iter().any(|a| *a < zero || *a > one) {
        return Err(LabError::Domain("barrier bounds must lie in [0, 1]".into()));
    }
    let mut f = RationalPoly::one();
    for a in bounds {
        f = f.integral_from(a);
    }
    Ok(f.eval(&one))
}

/// Float bounds to rationals, replacing each by the running maximum so the
/// sequence is nondecreasing (the region is unchanged because `ξ` is sorted).
pub fn monotone_rational_bounds(bounds: &[f64]) -> Vec<BigRational> {
    let mut running = 0.0f64;
    bounds
        .iter()
        .map(|&b| {
            running = running.max(b.clamp(0.0, 1.0));
            BigRational::from_float(running).expect("finite bound")
        })
        .collect()
}

/// Parameters of the barrier events and of `𝒴_k(ṽ, C)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BarrierSpec {
    pub k: usize,
    pub v: f64,
    pub c: f64,
    pub m: usize,
    pub mu: f64,
}

/// `min(i, k − i)^μ`, with `0^μ = 0`.
pub fn repulsion(i: usize, k: usize, mu: f64) -> f64 {
    let m = i.min(k - i);
    if m == 0 {
        0.0
    } else {
        (m as f64).powf(mu)
    }
}

impl BarrierSpec {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || !(self.v > 0.0) {
            return Err(LabError::Domain("need k ≥ 1 and v > 0".into()));
        }
        if self.k as f64 > self.v.ceil() {
            return Err(LabError::Domain(format!("need k ≤ ⌈v⌉, got k = {}, v = {}", self.k, self.v)));
        }
        if !(self.mu > 0.0 && self.mu < 0.5) {
            return Err(LabError::Domain(format!("barrier exponent {} outside (0, 1/2)", self.mu)));
        }
        Ok(())
    }

    /// Weak barrier `(i − 1)/v`, `i = 1..k`.
    pub fn weak_bounds(&self) -> Vec<f64> {
        (1..=self.k).map(|i| (i as f64 - 1.0) / self.v).collect()
    }

    /// Strong barrier `max{(i − 1)/v, (i + min(i,k−i)^μ − C)/v}`.
    pub fn strong_bounds(&self) -> Vec<f64> {
        (1..=self.k)
            .map(|i| {
                let weak = (i as f64 - 1.0) / self.v;
                let strong = (i as f64 + repulsion(i, self.k, self.mu) - self.c) / self.v;
                weak.max(strong)
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BarrierEstimates {
    pub p_b: McEstimate,
    pub p_scr_b: McEstimate,
    /// `None` when no sample satisfied the weak barrier.
    pub p_scr_b_given_b: Option<McEstimate>,
    /// Samples inside the strong event but outside the weak one.
    pub containment_violations: u64,
}

/// Estimates `P[B]`, `P[𝓑]` and `P[𝓑 | B]` on a common sample.
pub fn barrier_events_mc(spec: &BarrierSpec, n_samples: u64, seed: u64) -> Result<BarrierEstimates> {
    spec.validate()?;
    let weak = spec.weak_bounds();
    let strong = spec.strong_bounds();
    let k = spec.k;
    let (b_hits, sb_hits, violations, _) = run_chunked(
        n_samples,
        seed,
        || (0u64, 0u64, 0u64, vec![0.0; k]),
        |rng, acc| {
            fill_ordered_uniforms(&mut acc.3, rng, SamplingMethod::Sort);
            let xi = &acc.3;
            let in_b = xi.iter().zip(&weak).all(|(x, b)| x >= b);
            let in_sb = xi.iter().zip(&strong).all(|(x, b)| x >= b);
            acc.0 += in_b as u64;
            acc.1 += in_sb as u64;
            acc.2 += (in_sb && !in_b) as u64;
        },
        |a, b| {
            a.0 += b.0;
            a.1 += b.1;
            a.2 += b.2;
        },
    );
    Ok(BarrierEstimates {
        p_b: McEstimate::from_hits(b_hits, n_samples, seed),
        p_scr_b: McEstimate::from_hits(sb_hits, n_samples, seed),
        p_scr_b_given_b: (b_hits > 0).then(|| McEstimate::from_hits(sb_hits, b_hits, seed)),
        containment_violations: violations,
    })
}

pub const YK_EXPONENT: f64 = 1.0 / 7.0;

/// Membership in `𝒴_k(ṽ, C)` with offset `M`.
///
/// Condition (ii) runs over `1 ≤ i ≤ ⌊√(k − M)⌋` and is empty when `k ≤ M`.
pub fn yk_membership(xi: &[f64], v_tilde: f64, c: f64, m: usize) -> Result<bool> {
    let k = xi.len();
    if xi.windows(2).any(|w| w[0] > w[1]) {
        return Err(LabError::Domain("ξ must be sorted ascending".into()));
    }
    if xi.iter().any(|&x| !(0.0..=1.0).contains(&x)) {
        return Ok(false);
    }
    if k > m {
        let top = ((k - m) as f64).sqrt().floor() as usize;
        for i in 1..=top {
            let idx = m + i * i;
            let fi = i as f64;
            if !(xi[idx - 1] > fi / v_tilde && xi[k - idx] < 1.0 - fi / v_tilde) {
                return Ok(false);
            }
        }
    }
    Ok(xi.iter().enumerate().all(|(j, &x)| {
        let i = j + 1;
        let bound = (i as f64 - 1.0).max(i as f64 + repulsion(i, k, YK_EXPONENT) - c);
        v_tilde * x >= bound
    }))
}

/// Monte Carlo volume of `𝒴_k(ṽ, C)` inside the ordered simplex.
pub fn vol_yk_mc(k: usize, v_tilde: f64, c: f64, m: usize, n_samples: u64, seed: u64) -> McEstimate {
    event_probability_mc(k, n_samples, seed, |xi| {
        yk_membership(xi, v_tilde, c, m).expect("sorted sample")
    })
    .scaled(1.0 / factorial_f64(k))
}

/// `Σ_{i=1}^k 2^{i − ṽξ_i}` and the bound `2^C Σ_{i=1}^k 2^{−min(i,k−i)^{1/7}}`
/// it obeys on `𝒴_k(ṽ, C)`.
pub fn yk_geometric_sum(xi: &[f64], v_tilde: f64, c: f64) -> (f64, f64) {
    let k = xi.len();
    let lhs = xi
        .iter()
        .enumerate()
        .map(|(j, &x)| (j as f64 + 1.0 - v_tilde * x).exp2())
        .sum();
    let rhs = c.exp2()
        * (1..=k)
            .map(|i| (-repulsion(i, k, YK_EXPONENT)).exp2())
            .sum::<f64>();
    (lhs, rhs)
}

const LINEAR_EXP2_LIMIT: f64 = 900.0;

/// `min_{0≤j≤k} 2^{−j}(2^{vξ_1} + ⋯ + 2^{vξ_j} + 1)` for sorted `ξ`.
pub fn uk_integrand(xi: &[f64], v: f64) -> f64 {
    let top = xi.last().map_or(0.0, |&x| v * x);
    if top <= LINEAR_EXP2_LIMIT {
        let mut sum = 1.0;
        let mut best = 1.0f64;
        let mut scale = 1.0;
        for &x in xi {
            sum += (v * x).exp2();
            scale *= 0.5;
            best = best.min(sum * scale);
        }
        best
    } else {
        let mut log_sum = 0.0;
        let mut best = 0.0f64;
        for (j, &x) in xi.iter().enumerate() {
            log_sum = log2_add_exp2(log_sum, v * x);
            best = best.min(log_sum - (j + 1) as f64);
        }
        best.exp2()
    }
}

/// Monte Carlo estimate of `U_k(v)`: the simplex integral of
/// [`uk_integrand`], i.e. its mean over ordered samples divided by `k!`.
pub fn uk_mc(k: usize, v: f64, n_samples: u64, seed: u64) -> McEstimate {
    let acc = run_chunked(
        n_samples,
        seed,
        || (MeanAcc::default(), vec![0.0; k]),
        |rng, (acc, buf)| {
            fill_ordered_uniforms(buf, rng, SamplingMethod::Sort);
            acc.push(uk_integrand(buf, v));
        },
        |a, b| a.0.merge(b.0),
    )
    .0;
    McEstimate::from_mean(&acc, seed).scaled(1.0 / factorial_f64(k))
}

/// Membership in `𝒯(k, v, γ)`: `2^{vξ_1} + ⋯ + 2^{vξ_j} ≥ 2^{j−γ}` for all `j`.
pub fn t_region_membership(xi: &[f64], v: f64, gamma: f64) -> bool {
    let mut log_sum = f64::NEG_INFINITY;
    xi.iter().enumerate().all(|(j, &x)| {
        log_sum = if log_sum == f64::NEG_INFINITY {
            v * x
        } else {
            log2_add_exp2(log_sum, v * x)
        };
        log_sum >= (j + 1) as f64 - gamma
    })
}

pub fn t_region_mc(k: usize, v: f64, gamma: f64, n_samples: u64, seed: u64) -> McEstimate {
    event_probability_mc(k, n_samples, seed, |xi| t_region_membership(xi, v, gamma))
        .scaled(1.0 / factorial_f64(k))
}

/// `(γ + 2)(v − k + γ + 1)/(k + 1)!`, the envelope for `Vol 𝒯(k, v, γ)`
/// when `k ≤ v`.
pub fn t_region_envelope(k: usize, v: f64, gamma: f64) -> f64 {
    (gamma + 2.0) * (v - k as f64 + gamma + 1.0) / factorial_f64(k + 1)
}

/// `(1 + |v − k|)/((k + 1)!(2^{(k−v)/2} + 1))`, the envelope for `U_k(v)`.
pub fn uk_envelope(k: usize, v: f64) -> f64 {
    (1.0 + (v - k as f64).abs()) / (factorial_f64(k + 1) * ((k as f64 - v) / 2.0).exp2() + factorial_f64(k + 1))
}

/// Rational to `f64`, for reporting.
pub fn ratio_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}
