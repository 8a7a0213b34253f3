//! Summaries and paired comparisons of `summary.csv` files.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;

use crate::report::{read_csv, write_csv, SummaryRow, SUMMARY_SCHEMA};
use crate::stats::{ecdf, mean, median, quantile, stddev};
use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct AgeStats {
    pub n: usize,
    pub median: f64,
    pub mean: f64,
    pub stddev: Option<f64>,
    pub p10: f64,
    pub p90: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Paired {
    pub n: usize,
    /// Median of `second - first` over common seeds, seconds.
    pub median_delta: f64,
    /// Median over seeds of the relative reduction `(first - second) / first`, percent.
    pub median_improvement_pct: f64,
    /// Seeds where the second run had lower age.
    pub wins: usize,
}

#[derive(Debug, Serialize)]
struct CdfRow {
    schema: &'static str,
    input: String,
    age_s: f64,
    fraction: f64,
}

/// Seed to age over the successful per-seed rows.
pub fn ages_by_seed(rows: &[SummaryRow]) -> BTreeMap<u64, f64> {
    rows.iter()
        .filter(|r| r.kind == "run" && r.status == "ok")
        .filter_map(|r| Some((r.seed?, r.age_s.or(r.source_age_s)?)))
        .collect()
}

pub fn age_stats(ages: &[f64]) -> Option<AgeStats> {
    Some(AgeStats {
        n: ages.len(),
        median: median(ages)?,
        mean: mean(ages)?,
        stddev: stddev(ages),
        p10: quantile(ages, 0.1)?,
        p90: quantile(ages, 0.9)?,
    })
}

pub fn paired(first: &BTreeMap<u64, f64>, second: &BTreeMap<u64, f64>) -> Option<Paired> {
    let pairs: Vec<(f64, f64)> = first
        .iter()
        .filter_map(|(s, a)| second.get(s).map(|b| (*a, *b)))
        .collect();
    let deltas: Vec<f64> = pairs.iter().map(|(a, b)| b - a).collect();
    let rel: Vec<f64> = pairs.iter().map(|(a, b)| (a - b) / a * 100.0).collect();
    Some(Paired {
        n: pairs.len(),
        median_delta: median(&deltas)?,
        median_improvement_pct: median(&rel)?,
        wins: pairs.iter().filter(|(a, b)| b < a).count(),
    })
}

pub fn run(inputs: &[std::path::PathBuf], cdf: Option<&Path>) -> Result<(), CliError> {
    let mut maps = Vec::new();
    let mut cdf_rows = Vec::new();
    for p in inputs {
        let rows: Vec<SummaryRow> = read_csv(p, SUMMARY_SCHEMA)?;
        let ages = ages_by_seed(&rows);
        let values: Vec<f64> = ages.values().copied().collect();
        let label = rows
            .first()
            .map(|r| format!("{} on {}", r.controller, r.topology))
            .unwrap_or_default();
        match age_stats(&values) {
            Some(s) => println!(
                "{}: {label}, n={} median {:.6} s mean {:.6} s stddev {} p10 {:.6} p90 {:.6}",
                p.display(),
                s.n,
                s.median,
                s.mean,
                s.stddev.map_or("-".into(), |d| format!("{d:.6}")),
                s.p10,
                s.p90
            ),
            None => println!("{}: {label}, no successful runs", p.display()),
        }
        cdf_rows.extend(ecdf(&values).into_iter().map(|(age_s, fraction)| CdfRow {
            schema: "cdf.v1",
            input: p.display().to_string(),
            age_s,
            fraction,
        }));
        maps.push(ages);
    }
    if let [a, b] = maps.as_slice() {
        match paired(a, b) {
            Some(d) => println!(
                "paired over {} seeds: median delta {:+.6} s, median improvement {:.2}%, second lower on {}/{}",
                d.n, d.median_delta, d.median_improvement_pct, d.wins, d.n
            ),
            None => println!("no seeds in common"),
        }
    }
    if let Some(path) = cdf {
        write_csv(path, &cdf_rows)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paired_deltas() {
        let a: BTreeMap<u64, f64> = [(1, 2.0), (2, 4.0), (3, 1.0)].into();
        let b: BTreeMap<u64, f64> = [(1, 1.0), (2, 3.0), (4, 9.0)].into();
        let d = paired(&a, &b).unwrap();
        assert_eq!(d.n, 2);
        assert_eq!(d.median_delta, -1.0);
        assert_eq!(d.median_improvement_pct, 37.5);
        assert_eq!(d.wins, 2);
        assert!(paired(&a, &BTreeMap::new()).is_none());
    }
}
