//! The named experiments behind the command line tool. Each returns a
//! [`Report`]; writing it out is the caller's job.

use std::path::Path;
use std::time::Instant;

use serde_json::json;

use crate::acceptance::{self, Fixtures};
use crate::config::{Experiment, ExperimentConfig};
use crate::counting::{count_aq, count_hq, count_sq, AqMethod, HqMethod};
use crate::error::{LabError, Result};
use crate::order_stats::{barrier_events_mc, qk_exact, qk_mc, vol_yk_mc, BarrierSpec};
use crate::poisson::{
    classify_regime, e_factor, g_exponent, main_term, poisson_sum_ln, PoissonParams, DELTA_CRITICAL,
};
use crate::prime_sets::PrimeSet;
use crate::report::{audit_summary, Cell, Report, Table};

pub fn run(cfg: &ExperimentConfig) -> Result<Report> {
    cfg.validate()?;
    match cfg.experiment {
        Experiment::HqScan => cmd_hq_scan(cfg),
        Experiment::AqDichotomy => cmd_aq_dichotomy(cfg),
        Experiment::PoissonPhase => cmd_poisson_phase(cfg),
        Experiment::Smirnov => cmd_smirnov(cfg),
        Experiment::Verify => cmd_verify(cfg),
    }
}

fn prime_sets(cfg: &ExperimentConfig, needed: u64) -> Result<Vec<(String, PrimeSet)>> {
    let limit = cfg.prime_limit.unwrap_or(needed).max(needed).max(16);
    cfg.prime_sets
        .iter()
        .zip(cfg.prime_kinds()?)
        .map(|(name, kind)| Ok((name.clone(), PrimeSet::new(kind, limit)?)))
        .collect()
}

fn band(values: &[f64]) -> f64 {
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    hi / lo
}

/// `H_Q(x, y, 2y)` against the predictor `x (log x)^{δ−1} (log y)^{−G(δ)} E(y; δ)`.
pub fn cmd_hq_scan(cfg: &ExperimentConfig) -> Result<Report> {
    let start = Instant::now();
    let max_x = cfg.x.iter().cloned().fold(0.0, f64::max) as u64;
    let sets = prime_sets(cfg, max_x)?;
    let mut table = Table::new("hq_scan", &["q", "delta", "x", "y", "z", "count", "predictor", "ratio"]);
    let mut bands = serde_json::Map::new();
    let mut report = Report::new("hq-scan");
    for (name, ps) in &sets {
        report.audits.push(audit_summary(ps)?);
        let mut ratios = Vec::new();
        for &x in &cfg.x {
            let xi = x.floor() as u64;
            for &y in &cfg.y {
                if y > x {
                    return Err(LabError::Config(format!("field `y`: y = {y} exceeds x = {x}")));
                }
                let (lo, hi) = (y.floor() as u64, (2.0 * y).floor() as u64);
                let count = count_hq(ps, xi, lo, hi, HqMethod::DivisorMultiples)?.value;
                let predictor = main_term(x, y, ps.delta())?;
                let ratio = count as f64 / predictor;
                ratios.push(ratio);
                table.push(vec![
                    name.as_str().into(),
                    ps.delta().into(),
                    xi.into(),
                    y.into(),
                    hi.into(),
                    count.into(),
                    predictor.into(),
                    ratio.into(),
                ]);
            }
        }
        bands.insert(name.clone(), json!({ "delta": ps.delta(), "ratio_band": band(&ratios) }));
    }
    report.tables.push(table);
    report.summary = json!({ "bands": bands });
    report.timings = json!({ "total_secs": start.elapsed().as_secs_f64() });
    Ok(report)
}

/// Least-squares slope of `ln ratio` against `ln N`.
pub fn log_log_slope(points: &[(f64, f64)]) -> f64 {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(n, r)| *n > 0.0 && *r > 0.0)
        .map(|&(n, r)| (n.ln(), r.ln()))
        .collect();
    let m = pts.len() as f64;
    if pts.len() < 2 {
        return 0.0;
    }
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let (mx, my) = (sx / m, sy / m);
    let cov: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let var: f64 = pts.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    cov / var
}

/// Slopes below this count as decaying.
pub const DECAY_SLOPE: f64 = -0.05;

/// `A_Q(N)/|S_Q(N)|²` on an `N` grid, with a log-log slope per prime set.
pub fn cmd_aq_dichotomy(cfg: &ExperimentConfig) -> Result<Report> {
    let start = Instant::now();
    let max_n = cfg.n.iter().copied().max().unwrap_or(1);
    let sets = prime_sets(cfg, max_n)?;
    let mut table = Table::new("aq_dichotomy", &["q", "delta", "n", "s_q", "a_q", "ratio"]);
    let mut slopes = serde_json::Map::new();
    let mut report = Report::new("aq-dichotomy");
    for (name, ps) in &sets {
        report.audits.push(audit_summary(ps)?);
        let mut points = Vec::new();
        for &n in &cfg.n {
            let s = count_sq(ps, n)?;
            let a = count_aq(ps, n, AqMethod::Bitmap)?;
            let ratio = a as f64 / (s as f64 * s as f64);
            points.push((n as f64, ratio));
            table.push(vec![name.as_str().into(), ps.delta().into(), n.into(), s.into(), a.into(), ratio.into()]);
        }
        let slope = log_log_slope(&points);
        slopes.insert(
            name.clone(),
            json!({
                "delta": ps.delta(),
                "slope": slope,
                "observed": if slope < DECAY_SLOPE { "decaying" } else { "flat" },
                "expected": if ps.delta() < DELTA_CRITICAL { "flat" } else { "decaying" },
            }),
        );
    }
    report.tables.push(table);
    report.summary = json!({ "slopes": slopes, "decay_slope_threshold": DECAY_SLOPE });
    report.timings = json!({ "total_secs": start.elapsed().as_secs_f64() });
    Ok(report)
}

/// Regime sweep over `(λ, v)` and the `δ`-vs-exponent phase data.
pub fn cmd_poisson_phase(cfg: &ExperimentConfig) -> Result<Report> {
    let mut report = Report::new("poisson-phase");
    let eps = cfg.epsilon();
    if !cfg.lambda.is_empty() {
        let mut table = Table::new(
            "poisson_regimes",
            &["lambda", "v", "theta", "regime", "exact_sum_log", "envelope_log", "ratio"],
        );
        for &lambda in &cfg.lambda {
            for &v in &cfg.v {
                let r = classify_regime(lambda, v as u64, eps)?;
                table.push(vec![
                    lambda.into(),
                    (v as u64).into(),
                    r.theta.into(),
                    r.regime.label().into(),
                    r.exact_sum_ln.into(),
                    r.envelope_ln.into(),
                    r.ratio.into(),
                ]);
            }
        }
        report.tables.push(table);
    }
    if !cfg.delta.is_empty() {
        let mut table = Table::new(
            "poisson_phase",
            &["delta", "loglog_y", "lambda", "v", "g_exponent", "e_factor", "sum_log", "effective_exponent"],
        );
        for &ll in &cfg.loglog_y {
            for &delta in &cfg.delta {
                let p = PoissonParams::from_loglog(ll, delta)?;
                let sum_ln = poisson_sum_ln(p.lambda, p.v);
                // (log y)^{−1−δ}·sum = (log y)^{−exponent}
                let effective = ((1.0 + delta) * ll - sum_ln) / ll;
                table.push(vec![
                    delta.into(),
                    ll.into(),
                    p.lambda.into(),
                    p.v.into(),
                    g_exponent(delta)?.into(),
                    e_factor(ll, delta)?.into(),
                    sum_ln.into(),
                    effective.into(),
                ]);
            }
        }
        report.tables.push(table);
    }
    report.summary = json!({ "epsilon": eps, "delta_critical": DELTA_CRITICAL });
    Ok(report)
}

fn factorial(k: u64) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

/// Daniels-vs-MC, barrier conditioning, and `𝒴_k` volumes.
pub fn cmd_smirnov(cfg: &ExperimentConfig) -> Result<Report> {
    let start = Instant::now();
    let n = cfg.samples();
    let mu = cfg.mu();
    let m = cfg.m.unwrap_or(1);
    let us = if cfg.u.is_empty() { vec![1.0] } else { cfg.u.clone() };
    let mut table = Table::new(
        "smirnov",
        &["op", "k", "v", "u", "C", "M", "mu", "n", "estimate", "std_error", "seed", "reference"],
    );
    let mut stream = 0u64;
    let mut next_seed = || {
        stream += 1;
        cfg.seed.wrapping_add(stream)
    };
    for &k in &cfg.k {
        for &v in &cfg.v {
            for &u in &us {
                let Ok(exact) = qk_exact(u, v, k as usize) else { continue };
                let seed = next_seed();
                let est = qk_mc(u, v, k as usize, n, seed);
                table.push(vec![
                    "qk".into(),
                    k.into(),
                    v.into(),
                    u.into(),
                    Cell::Empty,
                    Cell::Empty,
                    Cell::Empty,
                    n.into(),
                    est.estimate.into(),
                    est.std_error.into(),
                    seed.into(),
                    exact.into(),
                ]);
            }
        }
    }
    for &k in &cfg.k {
        for &v in &cfg.v {
            if k as f64 > v.ceil() {
                continue;
            }
            for &c in &cfg.c {
                let spec = BarrierSpec { k: k as usize, v, c, m, mu };
                let seed = next_seed();
                let est = barrier_events_mc(&spec, n, seed)?;
                let cond = est.p_scr_b_given_b;
                table.push(vec![
                    "barrier".into(),
                    k.into(),
                    v.into(),
                    Cell::Empty,
                    c.into(),
                    Cell::Empty,
                    mu.into(),
                    n.into(),
                    cond.map(|e| e.estimate).into(),
                    cond.map(|e| e.std_error).into(),
                    seed.into(),
                    Cell::Empty,
                ]);
                let seed = next_seed();
                let vol = vol_yk_mc(k as usize, v, c, m, n, seed);
                let bound = 0.5 * (v - k as f64 + 1.0) / (v * factorial(k));
                table.push(vec![
                    "yk".into(),
                    k.into(),
                    v.into(),
                    Cell::Empty,
                    c.into(),
                    m.into(),
                    Cell::Empty,
                    n.into(),
                    vol.estimate.into(),
                    vol.std_error.into(),
                    seed.into(),
                    bound.into(),
                ]);
            }
        }
    }
    let mut report = Report::new("smirnov");
    report.tables.push(table);
    report.summary = json!({ "samples": n, "mu": mu, "M": m });
    report.timings = json!({ "total_secs": start.elapsed().as_secs_f64() });
    Ok(report)
}

/// Runs the acceptance suite (optionally filtered).
pub fn cmd_verify(cfg: &ExperimentConfig) -> Result<Report> {
    let fixtures = match &cfg.fixtures {
        Some(path) => Fixtures::load(path)?,
        None => Fixtures::builtin(),
    };
    verify_with(cfg, &fixtures)
}

pub fn verify_with(cfg: &ExperimentConfig, fixtures: &Fixtures) -> Result<Report> {
    let start = Instant::now();
    let outcomes = acceptance::run_selected(cfg.filter.as_deref(), fixtures)?;
    let mut report = Report::new("verify");
    report.tables.push(acceptance::outcome_table(&outcomes));
    let failed: Vec<String> = outcomes.iter().filter(|o| !o.passed).map(|o| o.label()).collect();
    report.passed = Some(failed.is_empty());
    report.summary = json!({
        "criteria": outcomes.len(),
        "lines": outcomes.iter().map(|o| o.line()).collect::<Vec<_>>(),
        "failed": failed,
        "fixture_provenance": fixtures.provenance,
    });
    report.timings = json!({
        "total_secs": start.elapsed().as_secs_f64(),
        "per_criterion": outcomes.iter().map(|o| json!({ "id": o.id, "secs": o.elapsed_secs })).collect::<Vec<_>>(),
    });
    report.audits = acceptance::reference_audits(cfg.filter.as_deref())?;
    Ok(report)
}

/// Writes `report` under `out_dir` and returns the written paths.
pub fn write(report: &Report, cfg: &ExperimentConfig, out_dir: &Path) -> Result<Vec<std::path::PathBuf>> {
    crate::report::write_report(report, cfg, out_dir)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_power_law() {
        let pts: Vec<(f64, f64)> = [10.0, 100.0, 1000.0].iter().map(|&n: &f64| (n, 3.0 * n.powf(-0.3))).collect();
        assert!((log_log_slope(&pts) + 0.3).abs() < 1e-12);
        assert_eq!(log_log_slope(&[(1.0, 1.0)]), 0.0);
    }

    #[test]
    fn hq_scan_small() {
        let mut cfg = ExperimentConfig::new(Experiment::HqScan);
        cfg.prime_sets = vec!["all".into(), "congruence:4:1".into()];
        cfg.x = vec![20.0, 1e4];
        cfg.y = vec![3.0];
        let r = run(&cfg).unwrap();
        let t = r.table("hq_scan").unwrap();
        assert_eq!(t.rows.len(), 4);
        // x = 20, y = 3, z = 6: ten integers with a divisor in (3, 6]
        assert_eq!(t.rows[0][5], Cell::Int(10));
        assert_eq!(r.audits.len(), 2);
    }

    #[test]
    fn hq_scan_rejects_empty_grid() {
        let mut cfg = ExperimentConfig::new(Experiment::HqScan);
        cfg.prime_sets = vec!["all".into()];
        cfg.x = vec![1e4];
        assert!(matches!(run(&cfg), Err(LabError::Config(_))));
    }

    #[test]
    fn aq_dichotomy_trend() {
        let mut cfg = ExperimentConfig::new(Experiment::AqDichotomy);
        cfg.prime_sets = vec!["all".into(), "thinned:0.4:3".into()];
        cfg.n = vec![1, 100, 1000, 10_000];
        let r = run(&cfg).unwrap();
        let t = r.table("aq_dichotomy").unwrap();
        assert_eq!(t.rows[0][5], Cell::Float(1.0));
        let ratios: Vec<f64> = t.rows[1..4]
            .iter()
            .map(|row| match row[5] {
                Cell::Float(f) => f,
                _ => unreachable!(),
            })
            .collect();
        assert!(ratios.windows(2).all(|w| w[1] < w[0]), "{ratios:?}");
        let all = r.summary["slopes"]["all"]["slope"].as_f64().unwrap();
        let thin = r.summary["slopes"]["thinned:0.4:3"]["slope"].as_f64().unwrap();
        assert!(all < 0.0 && thin.abs() < all.abs(), "{all} vs {thin}");
    }

    #[test]
    fn poisson_phase_tables() {
        let mut cfg = ExperimentConfig::new(Experiment::PoissonPhase);
        cfg.lambda = vec![100.0, 400.0];
        cfg.v = vec![100.0, 400.0];
        let r = run(&cfg).unwrap();
        let t = r.table("poisson_regimes").unwrap();
        assert_eq!(t.rows.len(), 4);
        assert_eq!(t.rows[0][3], Cell::Text("iii".into()));
        assert_eq!(t.rows[3][3], Cell::Text("iii".into()));

        let mut single = ExperimentConfig::new(Experiment::PoissonPhase);
        single.lambda = vec![50.0];
        single.v = vec![100.0];
        let csv = run(&single).unwrap().tables[0].to_csv_string().unwrap();
        assert_eq!(csv.lines().count(), 2);
    }

    #[test]
    fn phase_curve_is_kink_free() {
        let mut cfg = ExperimentConfig::new(Experiment::PoissonPhase);
        cfg.delta = (30..=100).map(|i| i as f64 / 100.0).collect();
        cfg.loglog_y = vec![30.0];
        let r = run(&cfg).unwrap();
        let t = r.table("poisson_phase").unwrap();
        let g: Vec<f64> = t
            .rows
            .iter()
            .map(|row| match row[4] {
                Cell::Float(f) => f,
                _ => unreachable!(),
            })
            .collect();
        // G is C¹: second differences stay small everywhere, including the junction
        let second: Vec<f64> = g.windows(3).map(|w| (w[2] - 2.0 * w[1] + w[0]).abs()).collect();
        assert!(second.iter().all(|&d| d < 1e-3), "{:?}", second.iter().cloned().fold(0.0, f64::max));
    }

    #[test]
    fn smirnov_rows() {
        let mut cfg = ExperimentConfig::new(Experiment::Smirnov);
        cfg.k = vec![1, 2];
        cfg.v = vec![2.0];
        cfg.c = vec![5.0];
        cfg.samples = Some(20_000);
        let r = run(&cfg).unwrap();
        let t = r.table("smirnov").unwrap();
        assert_eq!(t.rows.len(), 2 + 2 * 2);
        // k = 1 barrier conditioning is identically one
        let barrier_k1 = t.rows.iter().find(|row| row[0] == Cell::Text("barrier".into()) && row[1] == Cell::Int(1)).unwrap();
        assert_eq!(barrier_k1[8], Cell::Float(1.0));
    }
}
