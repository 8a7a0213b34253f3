//! Reference results for a single M/M/1 FCFS queue fed by Poisson updates.
//!
//! Average age of the freshest delivered update:
//! `Δ̄ = (1/μ)·(1 + 1/ρ + ρ²/(1 - ρ))`.

use thiserror::Error;

/// Bracket kept away from both ends of the stable region when minimizing.
pub const RHO_EPSILON: f64 = 1e-3;
const GOLDEN_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error, Clone, Copy, PartialEq)]
pub enum AnalyticsError {
    #[error("utilization {rho} is outside (0, 1)")]
    Domain { rho: f64 },
    #[error("service rate {0} is not positive")]
    ServiceRate(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mm1Spec {
    pub lambda: f64,
    pub mu: f64,
}

impl Mm1Spec {
    pub fn new(lambda: f64, mu: f64) -> Result<Self, AnalyticsError> {
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(AnalyticsError::ServiceRate(mu));
        }
        let rho = lambda / mu;
        if !(rho > 0.0 && rho < 1.0) {
            return Err(AnalyticsError::Domain { rho });
        }
        Ok(Mm1Spec { lambda, mu })
    }

    pub fn from_utilization(rho: f64, mu: f64) -> Result<Self, AnalyticsError> {
        Mm1Spec::new(rho * mu, mu)
    }

    pub fn rho(&self) -> f64 {
        self.lambda / self.mu
    }
}

pub fn mm1_average_age(spec: &Mm1Spec) -> f64 {
    let rho = spec.rho();
    (1.0 + 1.0 / rho + rho * rho / (1.0 - rho)) / spec.mu
}

pub fn mm1_mean_system_time(spec: &Mm1Spec) -> f64 {
    1.0 / (spec.mu - spec.lambda)
}

/// Time-average number of updates in the system, `ρ/(1 - ρ)`.
pub fn mm1_mean_backlog(spec: &Mm1Spec) -> f64 {
    spec.lambda * mm1_mean_system_time(spec)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimalRate {
    pub lambda: f64,
    pub rho: f64,
    pub age: f64,
}

/// Age-minimizing Poisson rate for service rate `mu`, by golden-section
/// search over the utilization.
pub fn mm1_optimal_rate(mu: f64) -> Result<OptimalRate, AnalyticsError> {
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(AnalyticsError::ServiceRate(mu));
    }
    let age = |rho: f64| (1.0 + 1.0 / rho + rho * rho / (1.0 - rho)) / mu;
    let rho = golden_section_min(age, RHO_EPSILON, 1.0 - RHO_EPSILON, GOLDEN_TOLERANCE);
    Ok(OptimalRate {
        lambda: rho * mu,
        rho,
        age: age(rho),
    })
}

/// Minimizes a unimodal `f` on `[lo, hi]` to within `tol`.
pub fn golden_section_min(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - inv_phi * (hi - lo);
    let mut d = lo + inv_phi * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    while hi - lo > tol {
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - inv_phi * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + inv_phi * (hi - lo);
            fd = f(d);
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(lambda: f64, mu: f64) -> Mm1Spec {
        Mm1Spec::new(lambda, mu).unwrap()
    }

    #[test]
    fn age_at_half_load() {
        assert!((mm1_average_age(&spec(0.5, 1.0)) - 3.5).abs() < 1e-12);
        assert!((mm1_average_age(&spec(1.0, 2.0)) - 1.75).abs() < 1e-12);
    }

    #[test]
    fn age_blows_up_at_the_edges() {
        assert!(mm1_average_age(&spec(0.005, 1.0)) > 100.0);
        assert!(mm1_average_age(&spec(0.995, 1.0)) > 100.0);
    }

    #[test]
    fn domain_errors() {
        assert_eq!(
            Mm1Spec::new(1.0, 1.0),
            Err(AnalyticsError::Domain { rho: 1.0 })
        );
        assert!(Mm1Spec::new(0.0, 1.0).is_err());
        assert!(Mm1Spec::new(0.5, 0.0).is_err());
        assert!(mm1_optimal_rate(-1.0).is_err());
    }

    #[test]
    fn system_time() {
        assert!((mm1_mean_system_time(&spec(0.5, 1.0)) - 2.0).abs() < 1e-12);
        assert!((mm1_mean_system_time(&spec(1e-9, 1.0)) - 1.0).abs() < 1e-8);
        assert!((mm1_mean_backlog(&spec(0.5, 1.0)) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn optimum_matches_dense_grid() {
        let opt = mm1_optimal_rate(1.0).unwrap();
        // independent check: brute-force grid at 1e-5 spacing
        let (mut best_rho, mut best_age) = (0.0, f64::INFINITY);
        let mut rho = RHO_EPSILON;
        while rho < 1.0 - RHO_EPSILON {
            let a = mm1_average_age(&Mm1Spec::from_utilization(rho, 1.0).unwrap());
            if a < best_age {
                best_age = a;
                best_rho = rho;
            }
            rho += 1e-5;
        }
        assert!(
            (opt.rho - best_rho).abs() < 2e-5,
            "{} vs {}",
            opt.rho,
            best_rho
        );
        assert!((opt.age - best_age).abs() < 1e-8);
        assert!((opt.rho - 0.53).abs() < 0.005);
        assert!((opt.age - 3.48).abs() < 0.005);
        assert!(opt.rho > RHO_EPSILON && opt.rho < 1.0 - RHO_EPSILON);
    }

    #[test]
    fn optimum_scales_with_mu() {
        let one = mm1_optimal_rate(1.0).unwrap();
        let two = mm1_optimal_rate(2.0).unwrap();
        assert!((one.rho - two.rho).abs() < 1e-6);
        assert!((two.age - one.age / 2.0).abs() < 1e-6);
        assert!((two.lambda - 2.0 * one.lambda).abs() < 1e-5);
    }

    #[test]
    fn packets_per_system_time_at_optimum() {
        let opt = mm1_optimal_rate(1.0).unwrap();
        let n = mm1_mean_backlog(&Mm1Spec::new(opt.lambda, 1.0).unwrap());
        assert!((n - 1.2).abs() < 0.1, "{n}");
    }

    #[test]
    fn bowl_shape_by_finite_differences() {
        let opt = mm1_optimal_rate(1.0).unwrap();
        let age = |rho: f64| mm1_average_age(&Mm1Spec::from_utilization(rho, 1.0).unwrap());
        let h = 1e-4;
        for i in 1..99 {
            let rho = i as f64 / 100.0;
            let slope = (age(rho + h) - age(rho - h)) / (2.0 * h);
            if rho < opt.rho - 1e-3 {
                assert!(slope < 0.0, "rho {rho}");
            } else if rho > opt.rho + 1e-3 {
                assert!(slope > 0.0, "rho {rho}");
            }
            let curvature = (age(rho + h) - 2.0 * age(rho) + age(rho - h)) / (h * h);
            assert!(curvature > 0.0);
        }
    }

    #[test]
    fn scale_law() {
        for &(l, m) in &[(0.3, 1.0), (2.0, 5.0), (0.01, 0.05), (700.0, 1000.0)] {
            for &c in &[0.1, 3.0, 1000.0] {
                let a = mm1_average_age(&spec(l, m));
                let b = mm1_average_age(&spec(l / c, m / c)) / c;
                assert!(((a - b) / a).abs() < 1e-9);
            }
        }
    }
}
