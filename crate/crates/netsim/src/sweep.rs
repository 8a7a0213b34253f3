//! Rate sweeps and the backlog profile at the empirically age-optimal rate.

use rayon::prelude::*;

use crate::sim::{run, Arrivals, SimConfig, SimReport, Workload};
use crate::topology::Topology;
use crate::SimError;

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub lambda: f64,
    pub report: SimReport,
}

impl SweepPoint {
    pub fn age(&self) -> f64 {
        self.report.time_avg_age
    }
}

/// One open-loop run per rate, all on the same seed so the points share
/// random numbers. Runs execute in parallel.
pub fn age_vs_lambda_sweep(
    topo: &Topology,
    lambdas: &[f64],
    arrivals: Arrivals,
    cfg: &SimConfig,
) -> Result<Vec<SweepPoint>, SimError> {
    if lambdas.is_empty() {
        return Err(SimError::InvalidConfig("empty rate list".into()));
    }
    if lambdas.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(SimError::InvalidConfig(
            "rates must be strictly increasing".into(),
        ));
    }
    lambdas
        .par_iter()
        .map(|&lambda| {
            run(topo, &Workload::OpenLoop { lambda, arrivals }, cfg)
                .map(|report| SweepPoint { lambda, report })
        })
        .collect()
}

/// Runs the same workload under each seed, in parallel.
pub fn run_seeds(
    topo: &Topology,
    workload: &Workload,
    cfg: &SimConfig,
    seeds: &[u64],
) -> Result<Vec<SimReport>, SimError> {
    seeds
        .par_iter()
        .map(|&seed| run(topo, workload, &SimConfig { seed, ..*cfg }))
        .collect()
}

pub fn argmin(points: &[SweepPoint]) -> Option<usize> {
    points
        .iter()
        .enumerate()
        .filter(|(_, p)| p.age().is_finite())
        .min_by(|a, b| a.1.age().total_cmp(&b.1.age()))
        .map(|(i, _)| i)
}

/// `n` evenly spaced values from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// Vertex of the least-squares parabola through the points, if it opens
/// upward and lies within their rate range.
pub fn parabola_vertex(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 3 {
        return None;
    }
    // centre and scale for conditioning
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let sx = points.iter().map(|p| (p.0 - mx).abs()).fold(0.0, f64::max);
    if sx == 0.0 {
        return None;
    }
    let mut m = [[0.0f64; 4]; 3];
    for &(x, y) in points {
        let u = (x - mx) / sx;
        let row = [1.0, u, u * u];
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] += row[i] * row[j];
            }
            m[i][3] += row[i] * y;
        }
    }
    for col in 0..3 {
        let pivot = (col..3).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))?;
        m.swap(col, pivot);
        if m[col][col].abs() < 1e-300 {
            return None;
        }
        for r in 0..3 {
            if r != col {
                let f = m[r][col] / m[col][col];
                for c in col..4 {
                    m[r][c] -= f * m[col][c];
                }
            }
        }
    }
    let b = m[1][3] / m[1][1];
    let a = m[2][3] / m[2][2];
    if !(a > 0.0) {
        return None;
    }
    let x = mx - b / (2.0 * a) * sx;
    let (lo, hi) = points
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), p| {
            (l.min(p.0), h.max(p.0))
        });
    (lo..=hi).contains(&x).then_some(x)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileOptions {
    /// Coarse sweep range as fractions of the update capacity.
    pub lo_fraction: f64,
    pub hi_fraction: f64,
    pub coarse_points: usize,
    pub fine_points: usize,
    /// Duration multiplier for the final run at the chosen rate.
    pub final_factor: i64,
    pub arrivals: Arrivals,
}

impl Default for ProfileOptions {
    fn default() -> Self {
        ProfileOptions {
            lo_fraction: 0.1,
            hi_fraction: 0.95,
            coarse_points: 18,
            fine_points: 11,
            final_factor: 3,
            arrivals: Arrivals::Poisson,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BacklogProfile {
    pub lambda: f64,
    pub coarse: Vec<SweepPoint>,
    pub fine: Vec<SweepPoint>,
    /// Longer run at `lambda`.
    pub report: SimReport,
}

/// Sweeps the update rate, picks the age-minimizing rate and reruns there
/// for longer, reporting per-node backlog.
pub fn optimal_backlog_profile(
    topo: &Topology,
    cfg: &SimConfig,
    opts: &ProfileOptions,
) -> Result<BacklogProfile, SimError> {
    let capacity = topo.update_capacity();
    if !(capacity.is_finite() && capacity > 0.0) {
        return Err(SimError::InvalidConfig(
            "topology has no spare update capacity".into(),
        ));
    }
    let coarse_rates = linspace(
        opts.lo_fraction * capacity,
        opts.hi_fraction * capacity,
        opts.coarse_points,
    );
    let coarse = age_vs_lambda_sweep(topo, &coarse_rates, opts.arrivals, cfg)?;
    let best = argmin(&coarse).ok_or(SimError::InvalidConfig("no finite age in sweep".into()))?;
    let lo = coarse[best.saturating_sub(1)].lambda;
    let hi = coarse[(best + 1).min(coarse.len() - 1)].lambda;
    let fine_rates = linspace(lo, hi, opts.fine_points);
    let fine = age_vs_lambda_sweep(topo, &fine_rates, opts.arrivals, cfg)?;
    let samples: Vec<(f64, f64)> = fine.iter().map(|p| (p.lambda, p.age())).collect();
    let lambda = parabola_vertex(&samples)
        .or_else(|| argmin(&fine).map(|i| fine[i].lambda))
        .unwrap_or(coarse[best].lambda);
    let long = SimConfig {
        duration: acp_core::Micros(cfg.duration.0.saturating_mul(opts.final_factor.max(1))),
        ..*cfg
    };
    let report = run(
        topo,
        &Workload::OpenLoop {
            lambda,
            arrivals: opts.arrivals,
        },
        &long,
    )?;
    Ok(BacklogProfile {
        lambda,
        coarse,
        fine,
        report,
    })
}
