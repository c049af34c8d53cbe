//! Exact counts: `H_Q(x,y,z)`, its squarefree variant, the restricted
//! multiplication table `A_Q(N)`, rough numbers in `S_Q`, and the
//! `L(a)/a`-weighted sums.

use std::time::Instant;

use bitvec::prelude::*;
use rayon::prelude::*;
use serde::Serialize;

use crate::divisors::{enumerate_sq, l_measure_sorted, SpfTable};
use crate::error::{LabError, Result};
use crate::numeric::CompensatedSum;
use crate::prime_sets::{sieve_primes, IntervalDecomposition, PrimeSet, PrimeSetDescriptor};

const BLOCK: u64 = 1 << 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum HqMethod {
    /// Scan `S_Q ∩ [1, x]` and test each member's divisors.
    Exhaustive,
    /// Mark multiples `m·d ≤ x` of every `d ∈ (y, z] ∩ S_Q`.
    DivisorMultiples,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CountResult {
    pub value: u64,
    pub x: u64,
    pub y: u64,
    pub z: u64,
    pub q: PrimeSetDescriptor,
    pub method: HqMethod,
    pub squarefree_only: bool,
    pub elapsed_secs: f64,
    /// Set when the parameters describe an empty divisor window.
    pub warning: Option<String>,
}

/// Indicator of `S_Q ∩ [0, x]` (optionally intersected with the squarefree
/// integers). Index 0 is never set.
pub fn sq_indicator(ps: &PrimeSet, x: u64, squarefree_only: bool) -> Result<BitVec> {
    if x > ps.limit() {
        return Err(LabError::OutOfRange {
            value: x,
            limit: ps.limit(),
        });
    }
    let mut bits = bitvec![1; x as usize + 1];
    bits.set(0, false);
    if x < 2 {
        return Ok(bits);
    }
    let primes = sieve_primes(x)?;
    if !ps.is_all() {
        let members = ps.members();
        for &p in primes.iter().filter(|p| members.binary_search(p).is_err()) {
            let mut m = p;
            while m <= x {
                bits.set(m as usize, false);
                m += p;
            }
        }
    }
    if squarefree_only {
        for &p in primes.iter().take_while(|&&p| p * p <= x) {
            let sq = p * p;
            let mut m = sq;
            while m <= x {
                bits.set(m as usize, false);
                m += sq;
            }
        }
    }
    Ok(bits)
}

/// `H_Q(x,y,z) = #{n ∈ S_Q ∩ [1,x] : ∃ d | n, y < d ≤ z}`.
pub fn count_hq(ps: &PrimeSet, x: u64, y: u64, z: u64, method: HqMethod) -> Result<CountResult> {
    count_divisor_window(ps, x, y, z, method, false)
}

/// As [`count_hq`], restricted to squarefree `n`.
pub fn count_hq_star(ps: &PrimeSet, x: u64, y: u64, z: u64, method: HqMethod) -> Result<CountResult> {
    count_divisor_window(ps, x, y, z, method, true)
}

fn count_divisor_window(
    ps: &PrimeSet,
    x: u64,
    y: u64,
    z: u64,
    method: HqMethod,
    squarefree_only: bool,
) -> Result<CountResult> {
    let start = Instant::now();
    let mut result = CountResult {
        value: 0,
        x,
        y,
        z,
        q: ps.descriptor(),
        method,
        squarefree_only,
        elapsed_secs: 0.0,
        warning: None,
    };
    if y >= z {
        result.warning = Some(format!("empty divisor window ({y}, {z}]"));
        return Ok(result);
    }
    if x == 0 || y >= x {
        result.elapsed_secs = start.elapsed().as_secs_f64();
        return Ok(result);
    }
    let indicator = sq_indicator(ps, x, squarefree_only)?;
    result.value = match method {
        HqMethod::Exhaustive => exhaustive_count(&indicator, x, y, z),
        HqMethod::DivisorMultiples => multiples_count(&indicator, x, y, z),
    };
    result.elapsed_secs = start.elapsed().as_secs_f64();
    Ok(result)
}

fn exhaustive_count(indicator: &BitSlice, x: u64, y: u64, z: u64) -> u64 {
    let table = SpfTable::new(x);
    let members: Vec<u64> = indicator.iter_ones().map(|n| n as u64).collect();
    members
        .par_chunks(1 << 14)
        .map(|chunk| {
            chunk
                .iter()
                .filter(|&&n| {
                    n > y
                        && table
                            .factorize(n)
                            .divisors()
                            .iter()
                            .any(|&d| d > y && d <= z)
                })
                .count() as u64
        })
        .sum()
}

fn multiples_count(indicator: &BitSlice, x: u64, y: u64, z: u64) -> u64 {
    let d_hi = z.min(x);
    let windows: Vec<u64> = (y + 1..=d_hi)
        .filter(|&d| indicator[d as usize])
        .collect();
    let blocks: Vec<u64> = (0..=x / BLOCK).map(|b| b * BLOCK).collect();
    blocks
        .par_iter()
        .map(|&start| {
            let hi = (start + BLOCK - 1).min(x);
            let lo = start.max(1);
            if lo > hi {
                return 0;
            }
            let mut marked = bitvec![0; (hi - lo + 1) as usize];
            for &d in &windows {
                let mut n = lo.div_ceil(d) * d;
                while n <= hi {
                    if indicator[n as usize] {
                        marked.set((n - lo) as usize, true);
                    }
                    n += d;
                }
            }
            marked.count_ones() as u64
        })
        .sum()
}

/// `|S_Q ∩ [1, x]|`.
pub fn count_sq(ps: &PrimeSet, x: u64) -> Result<u64> {
    count_rough(ps, x, 1.0)
}

/// `#{n ≤ x : n ∈ S_Q, P⁻(n) > z}`, counting `n = 1`.
pub fn count_rough(ps: &PrimeSet, x: u64, z: f64) -> Result<u64> {
    if x == 0 {
        return Ok(0);
    }
    if x > ps.limit() {
        return Err(LabError::OutOfRange {
            value: x,
            limit: ps.limit(),
        });
    }
    let members = ps.members();
    let start = members.partition_point(|&p| (p as f64) <= z);
    let primes = &members[start..];
    Ok(rough_products(primes, x, 1, 0))
}

fn rough_products(primes: &[u64], x: u64, cur: u64, start: usize) -> u64 {
    let mut total = 1;
    for j in start..primes.len() {
        let p = primes[j];
        let Some(m) = cur.checked_mul(p).filter(|&m| m <= x) else {
            break;
        };
        if m.checked_mul(p).is_none_or(|m2| m2 > x) {
            // every remaining prime q ≥ p can only appear alone: cur·q
            let end = primes.partition_point(|&q| q <= x / cur);
            total += (end - j) as u64;
            break;
        }
        let mut pk = m;
        loop {
            total += rough_products(primes, x, pk, j + 1);
            match pk.checked_mul(p) {
                Some(next) if next <= x => pk = next,
                _ => break,
            }
        }
    }
    total
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum AqMethod {
    /// Value-range blocks marked in a bitmap.
    Bitmap,
    /// Value-range blocks collected, sorted and deduplicated.
    SortedMerge,
}

/// `A_Q(N) = #{ab : a, b ∈ S_Q ∩ [1, N]}`.
pub fn count_aq(ps: &PrimeSet, n: u64, method: AqMethod) -> Result<u64> {
    if n == 0 {
        return Ok(0);
    }
    let set = enumerate_sq(ps, n)?;
    let top = n
        .checked_mul(n)
        .ok_or_else(|| LabError::Domain(format!("N² overflows for N = {n}")))?;
    const AQ_BLOCK: u64 = 1 << 23;
    let blocks: Vec<u64> = (0..=top / AQ_BLOCK).map(|b| b * AQ_BLOCK).collect();
    let count = blocks
        .par_iter()
        .map(|&lo| {
            let hi = (lo + AQ_BLOCK - 1).min(top);
            let lo = lo.max(1);
            match method {
                AqMethod::Bitmap => {
                    let mut marked = bitvec![0; (hi - lo + 1) as usize];
                    for_products_in(&set, lo, hi, |v| marked.set((v - lo) as usize, true));
                    marked.count_ones() as u64
                }
                AqMethod::SortedMerge => {
                    let mut values = Vec::new();
                    for_products_in(&set, lo, hi, |v| values.push(v));
                    values.sort_unstable();
                    values.dedup();
                    values.len() as u64
                }
            }
        })
        .sum();
    Ok(count)
}

/// Calls `f(a·b)` for `a ≤ b` in `set` with `lo ≤ a·b ≤ hi`.
fn for_products_in(set: &[u64], lo: u64, hi: u64, mut f: impl FnMut(u64)) {
    for (i, &a) in set.iter().enumerate() {
        if a * a > hi {
            break;
        }
        let b_min = lo.div_ceil(a).max(a);
        let from = i + set[i..].partition_point(|&b| b < b_min);
        for &b in &set[from..] {
            let v = a * b;
            if v > hi {
                break;
            }
            f(v);
        }
    }
}

/// Visits squarefree products of `primes` (ascending) not exceeding `cap`,
/// with at most `max_omega` factors, passing the prime factors along.
pub(crate) fn visit_squarefree(
    primes: &[u64],
    cap: u64,
    max_omega: usize,
    f: &mut impl FnMut(u64, &[u64]),
) {
    fn rec(
        primes: &[u64],
        cap: u64,
        max_omega: usize,
        cur: u64,
        start: usize,
        stack: &mut Vec<u64>,
        f: &mut impl FnMut(u64, &[u64]),
    ) {
        f(cur, stack);
        if stack.len() == max_omega {
            return;
        }
        for i in start..primes.len() {
            let Some(m) = cur.checked_mul(primes[i]).filter(|&m| m <= cap) else {
                break;
            };
            stack.push(primes[i]);
            rec(primes, cap, max_omega, m, i + 1, stack, f);
            stack.pop();
        }
    }
    let mut stack = Vec::new();
    rec(primes, cap, max_omega, 1, 0, &mut stack, f);
}

/// Ascending divisors of the squarefree number with the given primes.
pub(crate) fn squarefree_divisors(primes: &[u64]) -> Vec<u64> {
    let mut divs = vec![1u64];
    for &p in primes {
        let len = divs.len();
        for i in 0..len {
            divs.push(divs[i] * p);
        }
    }
    divs.sort_unstable();
    divs
}

/// `Σ L(a)/a` over squarefree `a ∈ S_Q ∩ [1, limit]`.
pub fn sum_l_over_a(ps: &PrimeSet, limit: u64) -> Result<f64> {
    if limit > ps.limit() {
        return Err(LabError::OutOfRange {
            value: limit,
            limit: ps.limit(),
        });
    }
    let end = ps.members().partition_point(|&p| p <= limit);
    let mut acc = CompensatedSum::new();
    visit_squarefree(&ps.members()[..end], limit, usize::MAX, &mut |a, primes| {
        acc.add(l_measure_sorted(&squarefree_divisors(primes)) / a as f64);
    });
    Ok(acc.value())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TqResult {
    pub k: usize,
    pub y: f64,
    pub cap: u64,
    /// `Σ L(a)/a` over the enumerated `a ≤ cap`.
    pub value: f64,
    /// Some `a` with `ω(a) = k` exceeded `cap`.
    pub truncated: bool,
    /// Upper bound on the omitted part: `2^k log 2 · Σ_{a > cap} 1/a`.
    pub tail_bound: f64,
    pub terms: usize,
}

pub const DEFAULT_TQ_CAP: u64 = 10_000_000;

/// `T_Q(k, 2y) = Σ L(a)/a` over squarefree `a ∈ S_Q` with `P⁺(a) ≤ 2y`,
/// `ω(a) = k`, truncated at `a ≤ cap`.
pub fn t_q(ps: &PrimeSet, k: usize, y: f64, cap: u64) -> Result<TqResult> {
    let z = 2.0 * y;
    if z.floor() as u64 > ps.limit() {
        return Err(LabError::OutOfRange {
            value: z.floor() as u64,
            limit: ps.limit(),
        });
    }
    let primes = ps.members_in(0.0, z);
    let mut value = CompensatedSum::new();
    let mut head_recip = CompensatedSum::new();
    let mut terms = 0usize;
    visit_squarefree(primes, cap, k, &mut |a, ps_of_a| {
        if ps_of_a.len() == k {
            value.add(l_measure_sorted(&squarefree_divisors(ps_of_a)) / a as f64);
            head_recip.add(1.0 / a as f64);
            terms += 1;
        }
    });
    let truncated = primes.len() >= k
        && primes[primes.len() - k..]
            .iter()
            .try_fold(1u64, |acc, &p| acc.checked_mul(p))
            .is_none_or(|max| max > cap);
    let tail_bound = if truncated {
        let total = elementary_symmetric_recip(primes, k);
        let missing = (total - head_recip.value()).max(0.0);
        std::f64::consts::LN_2 * 2f64.powi(k as i32) * missing
    } else {
        0.0
    };
    Ok(TqResult {
        k,
        y,
        cap,
        value: value.value(),
        truncated,
        tail_bound,
        terms,
    })
}

/// `e_k(1/p_1, 1/p_2, …)`: the sum of `1/a` over all squarefree products of
/// exactly `k` of the given primes.
pub fn elementary_symmetric_recip(primes: &[u64], k: usize) -> f64 {
    let mut e = vec![0.0f64; k + 1];
    e[0] = 1.0;
    for &p in primes {
        let r = 1.0 / p as f64;
        for j in (1..=k).rev() {
            e[j] += e[j - 1] * r;
        }
    }
    e[k]
}

pub const MAX_RECIP_AB_OMEGA: u64 = 12;

/// `Σ 1/a` over `a ∈ 𝒜(b)`, `a ≤ cap`: squarefree products with exactly
/// `b_j` distinct prime factors of `Q` in each block `D_j`.
pub fn sum_recip_ab(ps: &PrimeSet, dec: &IntervalDecomposition, b: &[usize], cap: u64) -> Result<f64> {
    if b.len() > dec.len() {
        return Err(LabError::Dimension {
            requested: b.len(),
            available: dec.len(),
        });
    }
    let total: u64 = b.iter().map(|&x| x as u64).sum();
    if total > MAX_RECIP_AB_OMEGA {
        return Err(LabError::Domain(format!(
            "Σ b_j = {total} exceeds {MAX_RECIP_AB_OMEGA}"
        )));
    }
    let blocks: Vec<(&[u64], usize)> = b
        .iter()
        .enumerate()
        .filter(|(_, &bj)| bj > 0)
        .map(|(i, &bj)| {
            let (lo, hi) = dec.bounds(i + 1);
            (ps.members_in(lo, hi), bj)
        })
        .collect();
    let mut acc = CompensatedSum::new();
    choose_across(&blocks, 0, 1, cap, &mut acc);
    Ok(acc.value())
}

fn choose_across(blocks: &[(&[u64], usize)], idx: usize, cur: u64, cap: u64, acc: &mut CompensatedSum) {
    let Some(&(primes, need)) = blocks.get(idx) else {
        acc.add(1.0 / cur as f64);
        return;
    };
    choose_within(primes, need, 0, cur, cap, &mut |v| choose_across(blocks, idx + 1, v, cap, acc));
}

fn choose_within(primes: &[u64], need: usize, start: usize, cur: u64, cap: u64, f: &mut impl FnMut(u64)) {
    if need == 0 {
        f(cur);
        return;
    }
    for i in start..primes.len() {
        if primes.len() - i < need {
            break;
        }
        let Some(m) = cur.checked_mul(primes[i]).filter(|&m| m <= cap) else {
            break;
        };
        choose_within(primes, need - 1, i + 1, m, cap, f);
    }
}
