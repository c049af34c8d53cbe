//! Sets of primes with a prescribed relative density, their audit, and the
//! greedy reciprocal-mass interval decomposition `Λ_1 < Λ_2 < ⋯`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::divisors::euler_phi;
use crate::error::{LabError, Result};
use crate::numeric::CompensatedSum;

const SEGMENT_LEN: u64 = 1 << 18;

/// All primes `≤ limit`, ascending.
///
/// Segmented sieve of Eratosthenes: base primes up to `√limit` are sieved
/// once, then fixed-size segments are processed independently.
pub fn sieve_primes(limit: u64) -> Result<Vec<u64>> {
    if limit < 2 {
        return Err(LabError::EmptyDomain(format!(
            "no primes below limit {limit}"
        )));
    }
    let root = limit.isqrt();
    let base = simple_sieve(root.max(2));
    let segments: Vec<u64> = (0..=limit / SEGMENT_LEN).map(|s| s * SEGMENT_LEN).collect();
    let chunks: Vec<Vec<u64>> = segments
        .par_iter()
        .map(|&lo| sieve_segment(lo, (lo + SEGMENT_LEN).min(limit + 1), &base))
        .collect();
    Ok(chunks.concat())
}

fn simple_sieve(limit: u64) -> Vec<u64> {
    let n = limit as usize;
    let mut composite = vec![false; n + 1];
    let mut out = Vec::new();
    for i in 2..=n {
        if !composite[i] {
            out.push(i as u64);
            let mut j = i * i;
            while j <= n {
                composite[j] = true;
                j += i;
            }
        }
    }
    out
}

fn sieve_segment(lo: u64, hi: u64, base: &[u64]) -> Vec<u64> {
    if hi <= lo {
        return Vec::new();
    }
    let len = (hi - lo) as usize;
    let mut composite = vec![false; len];
    for &p in base {
        if p * p >= hi {
            break;
        }
        let start = (p * p).max(lo.div_ceil(p) * p);
        let mut m = start;
        while m < hi {
            composite[(m - lo) as usize] = true;
            m += p;
        }
    }
    composite
        .iter()
        .enumerate()
        .filter_map(|(i, &c)| {
            let n = lo + i as u64;
            (!c && n >= 2).then_some(n)
        })
        .collect()
}

/// How the members of a [`PrimeSet`] are selected.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PrimeKind {
    All,
    /// Primes `p ≡ a (mod modulus)` for `a` in `residues`.
    Congruence { modulus: u64, residues: Vec<u64> },
    /// Each prime kept independently when a keyed hash of `(seed, p)` lands
    /// in `[0, density)`.
    Thinned { density: f64, seed: u64 },
}

impl PrimeKind {
    pub fn label(&self) -> String {
        match self {
            PrimeKind::All => "all".to_string(),
            PrimeKind::Congruence { modulus, residues } => {
                let r: Vec<String> = residues.iter().map(|a| a.to_string()).collect();
                format!("congruence(mod {modulus}; {})", r.join(","))
            }
            PrimeKind::Thinned { density, seed } => format!("thinned({density}; seed {seed})"),
        }
    }
}

/// A materialized set of primes `Q ∩ [1, limit]` with nominal density `delta`.
#[derive(Clone, Debug, PartialEq)]
pub struct PrimeSet {
    kind: PrimeKind,
    limit: u64,
    delta: f64,
    members: Vec<u64>,
}

/// JSON-facing summary of a prime set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrimeSetDescriptor {
    #[serde(flatten)]
    pub kind: PrimeKind,
    pub limit: u64,
    pub delta: f64,
    pub count: usize,
    pub largest: Option<u64>,
}

impl PrimeSet {
    pub fn new(kind: PrimeKind, limit: u64) -> Result<Self> {
        let (kind, delta) = validate_kind(kind)?;
        let primes = sieve_primes(limit)?;
        let members = select_members(&kind, primes);
        Ok(PrimeSet {
            kind,
            limit,
            delta,
            members,
        })
    }

    pub fn all(limit: u64) -> Result<Self> {
        Self::new(PrimeKind::All, limit)
    }

    pub fn congruence(modulus: u64, residues: &[u64], limit: u64) -> Result<Self> {
        Self::new(
            PrimeKind::Congruence {
                modulus,
                residues: residues.to_vec(),
            },
            limit,
        )
    }

    pub fn thinned(density: f64, seed: u64, limit: u64) -> Result<Self> {
        Self::new(PrimeKind::Thinned { density, seed }, limit)
    }

    pub fn kind(&self) -> &PrimeKind {
        &self.kind
    }

    pub fn limit(&self) -> u64 {
        self.limit
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn members(&self) -> &[u64] {
        &self.members
    }

    pub fn is_all(&self) -> bool {
        matches!(self.kind, PrimeKind::All)
    }

    /// Membership of a prime `p ≤ limit`. Non-primes are never members.
    pub fn contains(&self, p: u64) -> Result<bool> {
        if p > self.limit {
            return Err(LabError::OutOfRange {
                value: p,
                limit: self.limit,
            });
        }
        Ok(self.members.binary_search(&p).is_ok())
    }

    /// Members in `(lo, hi]`.
    pub fn members_in(&self, lo: f64, hi: f64) -> &[u64] {
        let start = self.members.partition_point(|&p| (p as f64) <= lo);
        let end = self.members.partition_point(|&p| (p as f64) <= hi);
        &self.members[start..end.max(start)]
    }

    pub fn descriptor(&self) -> PrimeSetDescriptor {
        PrimeSetDescriptor {
            kind: self.kind.clone(),
            limit: self.limit,
            delta: self.delta,
            count: self.members.len(),
            largest: self.members.last().copied(),
        }
    }

    /// `π_Q(x) = #(Q ∩ [1, x])`.
    pub fn pi_q(&self, x: u64) -> Result<u64> {
        self.check_range(x)?;
        Ok(self.members.partition_point(|&p| p <= x) as u64)
    }

    /// `Σ_{p ∈ Q, p ≤ x} 1/p`, compensated.
    pub fn mertens_sum(&self, x: u64) -> Result<f64> {
        self.check_range(x)?;
        let end = self.members.partition_point(|&p| p <= x);
        let acc: CompensatedSum = self.members[..end].iter().map(|&p| 1.0 / p as f64).collect();
        Ok(acc.value())
    }

    fn check_range(&self, x: u64) -> Result<()> {
        if x > self.limit {
            Err(LabError::OutOfRange {
                value: x,
                limit: self.limit,
            })
        } else {
            Ok(())
        }
    }

    /// Writes the compact bitmap format: a fixed header followed by one bit
    /// per integer in `[0, limit]`, LSB-first, set for members.
    pub fn write_bitmap<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(BITMAP_MAGIC)?;
        w.write_all(&BITMAP_VERSION.to_le_bytes())?;
        match &self.kind {
            PrimeKind::All => w.write_all(&[0u8])?,
            PrimeKind::Congruence { modulus, residues } => {
                w.write_all(&[1u8])?;
                w.write_all(&modulus.to_le_bytes())?;
                w.write_all(&(residues.len() as u32).to_le_bytes())?;
                for a in residues {
                    w.write_all(&a.to_le_bytes())?;
                }
            }
            PrimeKind::Thinned { density, seed } => {
                w.write_all(&[2u8])?;
                w.write_all(&density.to_bits().to_le_bytes())?;
                w.write_all(&seed.to_le_bytes())?;
            }
        }
        w.write_all(&self.limit.to_le_bytes())?;
        w.write_all(&(self.members.len() as u64).to_le_bytes())?;
        let mut bytes = vec![0u8; (self.limit / 8 + 1) as usize];
        for &p in &self.members {
            bytes[(p / 8) as usize] |= 1 << (p % 8);
        }
        w.write_all(&bytes)?;
        Ok(())
    }

    pub fn read_bitmap<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != BITMAP_MAGIC {
            return Err(LabError::Format("bad magic in prime-set bitmap".into()));
        }
        let version = read_u16(&mut r)?;
        if version != BITMAP_VERSION {
            return Err(LabError::Format(format!(
                "unsupported prime-set bitmap version {version}"
            )));
        }
        let mut tag = [0u8; 1];
        r.read_exact(&mut tag)?;
        let kind = match tag[0] {
            0 => PrimeKind::All,
            1 => {
                let modulus = read_u64(&mut r)?;
                let n = read_u32(&mut r)? as usize;
                let residues = (0..n).map(|_| read_u64(&mut r)).collect::<Result<_>>()?;
                PrimeKind::Congruence { modulus, residues }
            }
            2 => {
                let density = f64::from_bits(read_u64(&mut r)?);
                let seed = read_u64(&mut r)?;
                PrimeKind::Thinned { density, seed }
            }
            t => return Err(LabError::Format(format!("unknown prime-set kind tag {t}"))),
        };
        let (kind, delta) = validate_kind(kind)?;
        let limit = read_u64(&mut r)?;
        let count = read_u64(&mut r)?;
        let mut bytes = vec![0u8; (limit / 8 + 1) as usize];
        r.read_exact(&mut bytes)?;
        let members: Vec<u64> = bytes
            .iter()
            .enumerate()
            .flat_map(|(i, &b)| {
                (0..8u64).filter_map(move |bit| ((b >> bit) & 1 == 1).then_some(i as u64 * 8 + bit))
            })
            .filter(|&n| n <= limit)
            .collect();
        if members.len() as u64 != count {
            return Err(LabError::Format(format!(
                "header announces {count} members, bitmap holds {}",
                members.len()
            )));
        }
        Ok(PrimeSet {
            kind,
            limit,
            delta,
            members,
        })
    }

    pub fn save_bitmap(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_bitmap(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load_bitmap(path: &Path) -> Result<Self> {
        Self::read_bitmap(BufReader::new(File::open(path)?))
    }
}

const BITMAP_MAGIC: &[u8; 4] = b"DVPS";
const BITMAP_VERSION: u16 = 1;

fn read_u16<R: Read>(r: &mut R) -> Result<u16> {
    let mut b = [0u8; 2];
    r.read_exact(&mut b)?;
    Ok(u16::from_le_bytes(b))
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn validate_kind(kind: PrimeKind) -> Result<(PrimeKind, f64)> {
    match kind {
        PrimeKind::All => Ok((PrimeKind::All, 1.0)),
        PrimeKind::Congruence { modulus, residues } => {
            if modulus == 0 {
                return Err(LabError::Domain("modulus must be positive".into()));
            }
            let mut reduced: Vec<u64> = Vec::with_capacity(residues.len());
            for a in residues {
                if num::integer::gcd(a, modulus) != 1 {
                    return Err(LabError::InvalidResidue {
                        residue: a,
                        modulus,
                    });
                }
                reduced.push(a % modulus);
            }
            reduced.sort_unstable();
            reduced.dedup();
            if reduced.is_empty() {
                return Err(LabError::EmptyDomain("empty residue set".into()));
            }
            let delta = reduced.len() as f64 / euler_phi(modulus) as f64;
            Ok((
                PrimeKind::Congruence {
                    modulus,
                    residues: reduced,
                },
                delta,
            ))
        }
        PrimeKind::Thinned { density, seed } => {
            if !(density > 0.0 && density <= 1.0) {
                return Err(LabError::Domain(format!(
                    "thinning density {density} outside (0, 1]"
                )));
            }
            Ok((PrimeKind::Thinned { density, seed }, density))
        }
    }
}

fn select_members(kind: &PrimeKind, primes: Vec<u64>) -> Vec<u64> {
    match kind {
        PrimeKind::All => primes,
        PrimeKind::Congruence { modulus, residues } => primes
            .into_iter()
            .filter(|p| residues.binary_search(&(p % modulus)).is_ok())
            .collect(),
        PrimeKind::Thinned { density, seed } => {
            let (density, seed) = (*density, *seed);
            primes
                .par_chunks(1 << 16)
                .flat_map_iter(|chunk| {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    chunk
                        .iter()
                        .copied()
                        .filter(|&p| keyed_unit(&mut rng, p) < density)
                        .collect::<Vec<_>>()
                })
                .collect()
        }
    }
}

/// Uniform value in `[0, 1)` determined by `(seed, p)` alone: the ChaCha
/// stream is selected by `p`, so the draw does not depend on which other
/// primes were examined before.
fn keyed_unit(rng: &mut ChaCha8Rng, p: u64) -> f64 {
    rng.set_stream(p);
    rng.set_word_pos(0);
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Empirical check of the density hypothesis on a grid of `x` values.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DensityAudit {
    pub kappa_hat: f64,
    pub worst_x: u64,
    pub mertens_constant_hat: f64,
    pub rows: Vec<AuditRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AuditRow {
    pub x: u64,
    pub pi_q: u64,
    pub delta_x_over_logx: f64,
    /// `|π_Q(x) − δx/log x| · (log x)² / x`
    pub scaled_residual: f64,
    /// `|Σ_{p≤x} 1/p − δ log log x − Ĉ(Q)| · log x`
    pub mertens_residual: f64,
}

impl DensityAudit {
    pub fn grid(&self) -> Vec<u64> {
        self.rows.iter().map(|r| r.x).collect()
    }

    /// CSV with columns `x, pi_q, delta_x_over_logx, scaled_residual`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
        out.write_record(["x", "pi_q", "delta_x_over_logx", "scaled_residual"])?;
        for r in &self.rows {
            out.write_record([
                r.x.to_string(),
                r.pi_q.to_string(),
                format!("{:.12e}", r.delta_x_over_logx),
                format!("{:.12e}", r.scaled_residual),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

pub fn density_audit(ps: &PrimeSet, grid: &[u64]) -> Result<DensityAudit> {
    if grid.is_empty() {
        return Err(LabError::EmptyDomain("density audit grid is empty".into()));
    }
    let mut xs = grid.to_vec();
    xs.sort_unstable();
    xs.dedup();
    for &x in &xs {
        if x < 16 {
            return Err(LabError::Domain(format!("audit grid point {x} below 16")));
        }
        ps.check_range(x)?;
    }
    let delta = ps.delta();
    let mut partial = Vec::with_capacity(xs.len());
    for &x in &xs {
        let lx = (x as f64).ln();
        let pi = ps.pi_q(x)?;
        let main = delta * x as f64 / lx;
        let scaled = (pi as f64 - main).abs() * lx * lx / x as f64;
        let mertens_gap = ps.mertens_sum(x)? - delta * lx.ln();
        partial.push((x, pi, main, scaled, mertens_gap));
    }
    let constant = partial.last().map(|r| r.4).unwrap_or(0.0);
    let (mut kappa, mut worst) = (0.0, xs[0]);
    let rows = partial
        .into_iter()
        .map(|(x, pi_q, main, scaled, gap)| {
            if scaled > kappa {
                kappa = scaled;
                worst = x;
            }
            AuditRow {
                x,
                pi_q,
                delta_x_over_logx: main,
                scaled_residual: scaled,
                mertens_residual: (gap - constant).abs() * (x as f64).ln(),
            }
        })
        .collect();
    Ok(DensityAudit {
        kappa_hat: kappa,
        worst_x: worst,
        mertens_constant_hat: constant,
        rows,
    })
}

/// The real number that precedes `Λ_1`.
pub const LAMBDA_ZERO: f64 = 1.9;

/// Greedy partition of `Q` into consecutive blocks `D_j = (Λ_{j−1}, Λ_j]`,
/// each carrying reciprocal mass at most `δ log 2`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IntervalDecomposition {
    pub lambda_seq: Vec<u64>,
    pub lambda0: f64,
    pub budget: f64,
    /// Fewer intervals than requested fit below the prime-set limit.
    pub truncated: bool,
}

impl IntervalDecomposition {
    pub fn len(&self) -> usize {
        self.lambda_seq.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambda_seq.is_empty()
    }

    /// Endpoints `(Λ_{j−1}, Λ_j]` of `D_j`, 1-based.
    pub fn bounds(&self, j: usize) -> (f64, f64) {
        let lo = if j == 1 {
            self.lambda0
        } else {
            self.lambda_seq[j - 2] as f64
        };
        (lo, self.lambda_seq[j - 1] as f64)
    }
}

pub fn build_lambda_intervals(ps: &PrimeSet, count: usize) -> Result<IntervalDecomposition> {
    let budget = ps.delta() * std::f64::consts::LN_2;
    let members = ps.members();
    let mut lambda_seq = Vec::with_capacity(count);
    let mut idx = 0usize;
    let mut truncated = false;
    while lambda_seq.len() < count {
        let j = lambda_seq.len() + 1;
        let Some(&first) = members.get(idx) else {
            truncated = true;
            break;
        };
        if 1.0 / first as f64 > budget {
            return Err(LabError::DegenerateInterval {
                j,
                prime: first,
                budget,
            });
        }
        let mut acc = CompensatedSum::new();
        let mut closed = false;
        while let Some(&p) = members.get(idx) {
            let mut next = acc;
            next.add(1.0 / p as f64);
            if next.value() > budget {
                closed = true;
                break;
            }
            acc = next;
            idx += 1;
        }
        if !closed {
            // ran past the materialized limit before the block could be certified
            truncated = true;
            break;
        }
        lambda_seq.push(members[idx - 1]);
    }
    Ok(IntervalDecomposition {
        lambda_seq,
        lambda0: LAMBDA_ZERO,
        budget,
        truncated,
    })
}

/// `max_j |log₂ log Λ_j − j|`, the smallest `R` with `2^{j−R} ≤ log Λ_j ≤ 2^{j+R}`.
pub fn lambda_growth_check(dec: &IntervalDecomposition) -> f64 {
    let lambdas: Vec<f64> = dec.lambda_seq.iter().map(|&p| p as f64).collect();
    growth_statistic(&lambdas)
}

pub fn growth_statistic(lambdas: &[f64]) -> f64 {
    lambdas
        .iter()
        .enumerate()
        .map(|(i, &l)| (l.ln().log2() - (i + 1) as f64).abs())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trial_division_primes(limit: u64) -> Vec<u64> {
        (2..=limit)
            .filter(|&n| (2..n).take_while(|d| d * d <= n).all(|d| n % d != 0))
            .collect()
    }

    #[test]
    fn sieve_small_cases() {
        assert_eq!(sieve_primes(10).unwrap(), vec![2, 3, 5, 7]);
        assert_eq!(sieve_primes(2).unwrap(), vec![2]);
        assert_eq!(sieve_primes(100).unwrap().len(), 25);
        assert!(matches!(sieve_primes(1), Err(LabError::EmptyDomain(_))));
    }

    #[test]
    fn sieve_matches_trial_division_across_segments() {
        let limit = 3 * SEGMENT_LEN + 17;
        let got = sieve_primes(limit).unwrap();
        let tail: Vec<u64> = got.iter().copied().filter(|&p| p > limit - 5000).collect();
        let oracle: Vec<u64> = (limit - 4999..=limit)
            .filter(|&n| (2..).take_while(|d| d * d <= n).all(|d| n % d != 0))
            .collect();
        assert_eq!(tail, oracle);
        assert_eq!(&got[..1229], trial_division_primes(10_000).as_slice());
    }

    #[test]
    fn congruence_set() {
        let ps = PrimeSet::congruence(4, &[1], 30).unwrap();
        assert_eq!(ps.members(), &[5, 13, 17, 29]);
        assert_eq!(ps.delta(), 0.5);
        assert_eq!(ps.pi_q(30).unwrap(), 4);
        let err = PrimeSet::congruence(4, &[2], 30).unwrap_err();
        assert!(matches!(err, LabError::InvalidResidue { residue: 2, modulus: 4 }));
    }

    #[test]
    fn all_and_trivially_thinned() {
        let all = PrimeSet::all(10).unwrap();
        assert_eq!(all.members(), &[2, 3, 5, 7]);
        assert_eq!(all.delta(), 1.0);
        let thin = PrimeSet::thinned(1.0, 99, 10).unwrap();
        assert_eq!(thin.members(), &[2, 3, 5, 7]);
        assert!(PrimeSet::thinned(0.0, 1, 10).is_err());
    }

    #[test]
    fn thinning_is_deterministic_and_near_target() {
        let a = PrimeSet::thinned(0.4, 7, 200_000).unwrap();
        let b = PrimeSet::thinned(0.4, 7, 200_000).unwrap();
        assert_eq!(a, b);
        let total = sieve_primes(200_000).unwrap().len() as f64;
        let frac = a.members().len() as f64 / total;
        assert!((frac - 0.4).abs() < 0.02, "{frac}");
        // membership of p does not depend on the limit it was materialized to
        let small = PrimeSet::thinned(0.4, 7, 50_000).unwrap();
        let prefix: Vec<u64> = a.members().iter().copied().filter(|&p| p <= 50_000).collect();
        assert_eq!(small.members(), prefix.as_slice());
    }

    #[test]
    fn pi_q_and_range_errors() {
        let all = PrimeSet::all(10).unwrap();
        assert_eq!(all.pi_q(10).unwrap(), 4);
        assert_eq!(all.pi_q(2).unwrap(), 1);
        assert!(matches!(all.pi_q(11), Err(LabError::OutOfRange { value: 11, limit: 10 })));
        assert!(all.mertens_sum(11).is_err());
    }

    #[test]
    fn mertens_sums_against_rational_oracle() {
        use num::rational::Ratio;
        let exact = |ps: &[u64]| -> f64 {
            let s = ps.iter().fold(Ratio::new(0i64, 1), |acc, &p| acc + Ratio::new(1, p as i64));
            *s.numer() as f64 / *s.denom() as f64
        };
        let all = PrimeSet::all(100).unwrap();
        assert_eq!(all.mertens_sum(2).unwrap(), 0.5);
        let got = all.mertens_sum(10).unwrap();
        assert!((got - exact(&[2, 3, 5, 7])).abs() <= 1e-12 * got);
        assert!((got - 1.176_190_476_190_476).abs() < 1e-12);
        let q = PrimeSet::congruence(4, &[1], 100).unwrap();
        let got = q.mertens_sum(13).unwrap();
        assert!((got - exact(&[5, 13])).abs() <= 1e-12 * got);
    }

    #[test]
    fn audit_single_point() {
        let all = PrimeSet::all(100).unwrap();
        let audit = density_audit(&all, &[16]).unwrap();
        let l = 16f64.ln();
        let expected = (6.0 - 16.0 / l).abs() * l * l / 16.0;
        assert!((audit.kappa_hat - expected).abs() < 1e-12);
        assert!((audit.kappa_hat - 0.110).abs() < 1e-3);
        assert!(density_audit(&all, &[]).is_err());
        assert!(density_audit(&all, &[1000]).is_err());
    }

    #[test]
    fn audit_csv_header() {
        let all = PrimeSet::all(1000).unwrap();
        let audit = density_audit(&all, &[100, 1000]).unwrap();
        let mut buf = Vec::new();
        audit.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("x,pi_q,delta_x_over_logx,scaled_residual\n100,25,"));
        assert_eq!(text.lines().count(), 3);
    }

    #[test]
    fn lambda_intervals_small() {
        let all = PrimeSet::all(1000).unwrap();
        let dec = build_lambda_intervals(&all, 2).unwrap();
        assert_eq!(dec.lambda_seq, vec![2, 7]);
        assert!(!dec.truncated);
        assert_eq!(build_lambda_intervals(&all, 1).unwrap().lambda_seq, vec![2]);
        let q = PrimeSet::congruence(4, &[1], 1000).unwrap();
        assert_eq!(build_lambda_intervals(&q, 1).unwrap().lambda_seq, vec![17]);
    }

    #[test]
    fn lambda_intervals_truncate_at_limit() {
        let all = PrimeSet::all(100).unwrap();
        let dec = build_lambda_intervals(&all, 5).unwrap();
        assert_eq!(dec.lambda_seq, vec![2, 7]);
        assert!(dec.truncated);
    }

    #[test]
    fn degenerate_interval_reported() {
        // δ* = 0.2 gives budget ≈ 0.139; any small prime kept first overshoots it
        let thin = PrimeSet::thinned(0.2, 3, 1000).unwrap();
        let first = thin.members()[0];
        if 1.0 / first as f64 > 0.2 * std::f64::consts::LN_2 {
            let err = build_lambda_intervals(&thin, 1).unwrap_err();
            assert!(matches!(err, LabError::DegenerateInterval { j: 1, .. }));
        }
    }

    #[test]
    fn growth_statistic_examples() {
        let all = PrimeSet::all(1000).unwrap();
        let dec = build_lambda_intervals(&all, 2).unwrap();
        let expected = (2f64.ln().log2() - 1.0).abs().max((7f64.ln().log2() - 2.0).abs());
        assert!((lambda_growth_check(&dec) - expected).abs() < 1e-12);
        assert!((lambda_growth_check(&dec) - 1.529).abs() < 1e-3);
        assert_eq!(growth_statistic(&[2f64.exp()]), 0.0);
    }

    #[test]
    fn bitmap_round_trip() {
        let q = PrimeSet::congruence(12, &[1, 5, 7, 11], 5000).unwrap();
        let mut buf = Vec::new();
        q.write_bitmap(&mut buf).unwrap();
        assert_eq!(PrimeSet::read_bitmap(buf.as_slice()).unwrap(), q);
        let t = PrimeSet::thinned(0.5, 11, 3000).unwrap();
        let mut buf = Vec::new();
        t.write_bitmap(&mut buf).unwrap();
        assert_eq!(PrimeSet::read_bitmap(buf.as_slice()).unwrap(), t);
        buf[0] = b'X';
        assert!(matches!(PrimeSet::read_bitmap(buf.as_slice()), Err(LabError::Format(_))));
    }

    #[test]
    fn descriptor_json() {
        let q = PrimeSet::congruence(4, &[1], 30).unwrap();
        let json = serde_json::to_string(&q.descriptor()).unwrap();
        assert_eq!(
            json,
            r#"{"kind":"congruence","modulus":4,"residues":[1],"limit":30,"delta":0.5,"count":4,"largest":29}"#
        );
    }
}
