//! Factorization, divisor enumeration, `S_Q` membership and enumeration, and
//! the divisor-spacing functionals `𝓛(a)`, `L(a)` and `W(a)`.

use std::io::Write;

use serde::Serialize;

use crate::error::{LabError, Result};
use crate::prime_sets::PrimeSet;

/// Prime-power decomposition of `n ≥ 1`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Factorization {
    pub n: u64,
    pub factors: Vec<(u64, u32)>,
}

impl Factorization {
    pub fn omega(&self) -> usize {
        self.factors.len()
    }

    pub fn is_squarefree(&self) -> bool {
        self.factors.iter().all(|&(_, e)| e == 1)
    }

    pub fn mu_squared(&self) -> u8 {
        self.is_squarefree() as u8
    }

    /// Largest prime factor; `P⁺(1) = 1`.
    pub fn p_plus(&self) -> u64 {
        self.factors.last().map_or(1, |&(p, _)| p)
    }

    /// Smallest prime factor; `P⁻(1) = +∞`, represented as `None`.
    pub fn p_minus(&self) -> Option<u64> {
        self.factors.first().map(|&(p, _)| p)
    }

    /// `τ(n) = Π (e_i + 1)`, saturating.
    pub fn tau(&self) -> u64 {
        self.factors
            .iter()
            .fold(1u64, |acc, &(_, e)| acc.saturating_mul(e as u64 + 1))
    }

    pub fn primes(&self) -> impl Iterator<Item = u64> + '_ {
        self.factors.iter().map(|&(p, _)| p)
    }

    /// All divisors, ascending.
    pub fn divisors(&self) -> Vec<u64> {
        let mut divs = vec![1u64];
        for &(p, e) in &self.factors {
            let len = divs.len();
            let mut pk = 1u64;
            for _ in 0..e {
                pk *= p;
                for i in 0..len {
                    divs.push(divs[i] * pk);
                }
            }
        }
        divs.sort_unstable();
        divs
    }
}

/// Trial division over 2, 3 and the residues `6k ± 1`.
pub fn factorize(n: u64) -> Result<Factorization> {
    if n == 0 {
        return Err(LabError::Domain("cannot factorize 0".into()));
    }
    let mut factors = Vec::new();
    let mut m = n;
    for p in [2u64, 3] {
        let mut e = 0;
        while m % p == 0 {
            m /= p;
            e += 1;
        }
        if e > 0 {
            factors.push((p, e));
        }
    }
    let mut d = 5u64;
    while d.saturating_mul(d) <= m {
        for p in [d, d + 2] {
            let mut e = 0;
            while m % p == 0 {
                m /= p;
                e += 1;
            }
            if e > 0 {
                factors.push((p, e));
            }
        }
        d += 6;
    }
    if m > 1 {
        factors.push((m, 1));
    }
    Ok(Factorization { n, factors })
}

/// Smallest-prime-factor table for fast bulk factorization of `n ≤ limit`.
pub struct SpfTable {
    spf: Vec<u32>,
}

impl SpfTable {
    pub fn new(limit: u64) -> Self {
        let n = limit as usize;
        let mut spf = vec![0u32; n + 1];
        for i in 2..=n {
            if spf[i] == 0 {
                let mut j = i;
                while j <= n {
                    if spf[j] == 0 {
                        spf[j] = i as u32;
                    }
                    j += i;
                }
            }
        }
        SpfTable { spf }
    }

    pub fn limit(&self) -> u64 {
        self.spf.len() as u64 - 1
    }

    pub fn factorize(&self, n: u64) -> Factorization {
        assert!(n >= 1 && n <= self.limit(), "{n} outside table");
        let mut factors: Vec<(u64, u32)> = Vec::new();
        let mut m = n as usize;
        while m > 1 {
            let p = self.spf[m] as usize;
            let mut e = 0;
            while m % p == 0 {
                m /= p;
                e += 1;
            }
            factors.push((p as u64, e));
        }
        Factorization { n, factors }
    }
}

pub fn divisors(n: u64) -> Result<Vec<u64>> {
    Ok(factorize(n)?.divisors())
}

pub fn euler_phi(n: u64) -> u64 {
    let f = factorize(n).expect("phi of a positive integer");
    f.primes().fold(n, |acc, p| acc / p * (p - 1))
}

/// Whether every prime factor of `n` belongs to `Q`.
pub fn in_sq(ps: &PrimeSet, n: u64) -> Result<bool> {
    let f = factorize(n)?;
    for p in f.primes() {
        if !ps.contains(p)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// `S_Q ∩ [1, x]`, ascending, built as products of members of `Q`.
pub fn enumerate_sq(ps: &PrimeSet, x: u64) -> Result<Vec<u64>> {
    check_limit(ps, x)?;
    let mut out = Vec::new();
    products(ps.members(), x, 1, 0, false, &mut out);
    out.sort_unstable();
    Ok(out)
}

/// Squarefree members of `S_Q` with `P⁺ ≤ z`, up to `cap`, ascending.
pub fn enumerate_p_smooth_sq(ps: &PrimeSet, z: f64, cap: u64) -> Vec<u64> {
    let end = ps.members().partition_point(|&p| (p as f64) <= z);
    let mut out = Vec::new();
    products(&ps.members()[..end], cap, 1, 0, true, &mut out);
    out.sort_unstable();
    out
}

fn check_limit(ps: &PrimeSet, x: u64) -> Result<()> {
    if x > ps.limit() {
        Err(LabError::OutOfRange {
            value: x,
            limit: ps.limit(),
        })
    } else {
        Ok(())
    }
}

fn products(primes: &[u64], x: u64, cur: u64, start: usize, squarefree: bool, out: &mut Vec<u64>) {
    out.push(cur);
    for (i, &p) in primes.iter().enumerate().skip(start) {
        let Some(mut m) = cur.checked_mul(p).filter(|&m| m <= x) else {
            break;
        };
        loop {
            products(primes, x, m, i + 1, squarefree, out);
            if squarefree {
                break;
            }
            match m.checked_mul(p) {
                Some(next) if next <= x => m = next,
                _ => break,
            }
        }
    }
}

/// Writes one integer per line.
pub fn write_integers<W: Write>(mut w: W, values: &[u64]) -> Result<()> {
    for v in values {
        writeln!(w, "{v}")?;
    }
    Ok(())
}

/// Absolute slack used to glue abutting intervals in log space.
pub const MERGE_SLACK: f64 = 1e-12;

/// Finite disjoint union of half-open intervals `(lo, hi]`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IntervalUnion {
    pub intervals: Vec<(f64, f64)>,
    pub measure: f64,
}

impl IntervalUnion {
    /// Merges arbitrary (possibly overlapping, unsorted) intervals.
    pub fn from_intervals(mut raw: Vec<(f64, f64)>) -> Self {
        raw.retain(|&(lo, hi)| hi > lo);
        raw.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut intervals: Vec<(f64, f64)> = Vec::with_capacity(raw.len());
        for (lo, hi) in raw {
            match intervals.last_mut() {
                Some(last) if lo <= last.1 + MERGE_SLACK => last.1 = last.1.max(hi),
                _ => intervals.push((lo, hi)),
            }
        }
        let measure = intervals.iter().map(|(lo, hi)| hi - lo).sum();
        IntervalUnion { intervals, measure }
    }

    pub fn contains(&self, t: f64) -> bool {
        self.intervals.iter().any(|&(lo, hi)| lo < t && t <= hi)
    }
}

pub const MAX_L_DIVISORS: u64 = 1 << 20;
pub const MAX_W_DIVISORS: u64 = 1 << 16;

/// `𝓛(a) = ⋃_{d|a} (log d − log 2, log d]`; its measure is `L(a)`.
pub fn l_interval_union(a: u64) -> Result<IntervalUnion> {
    let f = factorize(a)?;
    check_tau(&f, MAX_L_DIVISORS)?;
    Ok(l_union_from_divisors(&f.divisors()))
}

pub fn l_union_from_divisors(divs: &[u64]) -> IntervalUnion {
    let ln2 = std::f64::consts::LN_2;
    IntervalUnion::from_intervals(
        divs.iter()
            .map(|&d| {
                let ld = (d as f64).ln();
                (ld - ln2, ld)
            })
            .collect(),
    )
}

/// `L(a)` for sorted divisors, without materializing the union.
pub fn l_measure_sorted(divs: &[u64]) -> f64 {
    let ln2 = std::f64::consts::LN_2;
    let mut total = 0.0;
    let mut cur: Option<(f64, f64)> = None;
    for &d in divs {
        let hi = (d as f64).ln();
        let lo = hi - ln2;
        cur = match cur {
            Some((clo, chi)) if lo <= chi + MERGE_SLACK => Some((clo, chi.max(hi))),
            Some((clo, chi)) => {
                total += chi - clo;
                Some((lo, hi))
            }
            None => Some((lo, hi)),
        };
    }
    if let Some((lo, hi)) = cur {
        total += hi - lo;
    }
    total
}

/// `W(a) = #{(d, d') : d|a, d'|a, |log(d/d')| ≤ log 2}`.
pub fn w_count(a: u64) -> Result<u64> {
    let f = factorize(a)?;
    check_tau(&f, MAX_W_DIVISORS)?;
    Ok(w_count_sorted(&f.divisors()))
}

/// Two-pointer count of ordered pairs with `d' ≤ 2d` and `d ≤ 2d'`, in
/// integer arithmetic so the boundary ratio 2 is counted exactly.
pub fn w_count_sorted(divs: &[u64]) -> u64 {
    let (mut lo, mut hi) = (0usize, 0usize);
    let mut count = 0u64;
    for &d in divs {
        while 2 * divs[lo] < d {
            lo += 1;
        }
        while hi < divs.len() && divs[hi] <= 2 * d {
            hi += 1;
        }
        count += (hi - lo) as u64;
    }
    count
}

fn check_tau(f: &Factorization, max: u64) -> Result<()> {
    let tau = f.tau();
    if tau > max {
        Err(LabError::TooManyDivisors {
            n: f.n,
            count: tau,
            max,
        })
    } else {
        Ok(())
    }
}
