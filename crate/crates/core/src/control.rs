//! Epoch rate controller.
//!
//! At the end of every control epoch the source compares the epoch's average
//! backlog and age with those of the previous epoch. The signs of the two
//! differences pick an action on the *target backlog change* for the next
//! epoch:
//!
//! | action   | target `b*`                 |
//! |----------|-----------------------------|
//! | INC      | `+κ`                        |
//! | DEC      | `-κ`                        |
//! | MDEC(γ)  | `-(1 - 2^-γ) · B̄`          |
//!
//! The target is then turned into a rate with `λ = 1/Z̄ + b*/𝒯`, where `Z̄`
//! is the smoothed inter-ACK time and `𝒯 = min(RTT̄, Z̄)`.

use std::fmt;

use thiserror::Error;

use crate::age::EpochStats;

pub const DEFAULT_KAPPA_SIMULATED: f64 = 0.25;
pub const DEFAULT_KAPPA_REAL: f64 = 1.0;
pub const DEFAULT_EPOCH_MULTIPLIER: u32 = 10;
pub const DEFAULT_GAMMA_CAP: u32 = 30;

#[derive(Debug, Error, Clone, Copy, PartialEq)]
pub enum ControlError {
    #[error("estimator {name} is not ready (value {value})")]
    EstimatorNotReady { name: &'static str, value: f64 },
    #[error("epoch multiplier must be at least 1")]
    InvalidMultiplier,
    #[error("invalid rate bounds [{min}, {max}]")]
    InvalidBounds { min: f64, max: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Action {
    Inc,
    Dec,
    Mdec(u32),
}

impl Action {
    pub fn name(&self) -> &'static str {
        match self {
            Action::Inc => "INC",
            Action::Dec => "DEC",
            Action::Mdec(_) => "MDEC",
        }
    }

    pub fn gamma(&self) -> Option<u32> {
        match self {
            Action::Mdec(g) => Some(*g),
            _ => None,
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Mdec(g) => write!(f, "MDEC({g})"),
            other => f.write_str(other.name()),
        }
    }
}

/// Which arm of the decision chain fired.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    /// backlog and age both rose
    BothRose = 1,
    /// backlog rose, age fell
    BacklogRoseAgeFell = 2,
    /// backlog fell, age rose
    BacklogFellAgeRose = 3,
    /// everything else, including zero differences
    Otherwise = 4,
}

impl Branch {
    pub fn number(self) -> u8 {
        self as u8
    }
}

/// What `|b_k| < 0.5·|b*_k|` compares against in the second branch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GuardReference {
    /// The target commanded at the previous epoch.
    #[default]
    PreviousTarget,
    /// The backlog change measured at the previous epoch.
    PreviousChange,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateBounds {
    pub min: f64,
    pub max: f64,
}

impl RateBounds {
    pub fn new(min: f64, max: f64) -> Result<Self, ControlError> {
        if !(min > 0.0 && max >= min && max.is_finite()) {
            return Err(ControlError::InvalidBounds { min, max });
        }
        Ok(RateBounds { min, max })
    }

    pub fn clamp(&self, lambda: f64) -> f64 {
        if lambda.is_nan() {
            return self.min;
        }
        lambda.clamp(self.min, self.max)
    }
}

impl Default for RateBounds {
    fn default() -> Self {
        RateBounds { min: 0.1, max: 1e4 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlConfig {
    /// Additive step on the backlog target, packets.
    pub kappa: f64,
    pub bounds: RateBounds,
    /// Epoch length as a multiple of `𝒯`.
    pub epoch_multiplier: u32,
    /// MDEC(γ) saturates here.
    pub gamma_cap: u32,
    pub guard: GuardReference,
}

impl Default for ControlConfig {
    fn default() -> Self {
        ControlConfig {
            kappa: DEFAULT_KAPPA_SIMULATED,
            bounds: RateBounds::default(),
            epoch_multiplier: DEFAULT_EPOCH_MULTIPLIER,
            gamma_cap: DEFAULT_GAMMA_CAP,
            guard: GuardReference::PreviousTarget,
        }
    }
}

/// Action and backlog target chosen for the next epoch, before the rate
/// mapping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Verdict {
    pub action: Action,
    pub branch: Branch,
    /// Target change in average backlog, packets.
    pub target: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlDecision {
    pub verdict: Verdict,
    /// `B̄_k - B̄_{k-1}`
    pub backlog_change: f64,
    /// `Δ̄_k - Δ̄_{k-1}`, seconds
    pub age_change: f64,
    pub new_lambda: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlState {
    pub flag: bool,
    pub gamma: u32,
    /// Current update rate, updates per second.
    pub lambda: f64,
    pub prev_avg_age: Option<f64>,
    pub prev_avg_backlog: Option<f64>,
    pub prev_target: f64,
    pub prev_backlog_change: f64,
    pub epoch_index: u64,
}

impl ControlState {
    pub fn new(initial_lambda: f64) -> Self {
        ControlState {
            flag: false,
            gamma: 0,
            lambda: initial_lambda,
            prev_avg_age: None,
            prev_avg_backlog: None,
            prev_target: 0.0,
            prev_backlog_change: 0.0,
            epoch_index: 0,
        }
    }

    fn reset_escalation(&mut self) {
        self.flag = false;
        self.gamma = 0;
    }

    fn escalate(&mut self, cap: u32) -> Action {
        self.gamma = (self.gamma + 1).min(cap);
        Action::Mdec(self.gamma)
    }

    /// Picks the action for the next epoch from the backlog change `b_k`, the
    /// age change `delta_k` and the epoch's average backlog.
    ///
    /// Strict inequalities throughout: a zero difference never matches the
    /// first three arms and lands in the last one.
    pub fn decide(
        &mut self,
        cfg: &ControlConfig,
        b_k: f64,
        delta_k: f64,
        avg_backlog_k: f64,
    ) -> Verdict {
        let cap = cfg.gamma_cap.max(1);
        let (action, branch) = if b_k > 0.0 && delta_k > 0.0 {
            let action = if self.flag {
                self.escalate(cap)
            } else {
                Action::Dec
            };
            self.flag = true;
            (action, Branch::BothRose)
        } else if b_k > 0.0 && delta_k < 0.0 {
            let reference = match cfg.guard {
                GuardReference::PreviousTarget => self.prev_target,
                GuardReference::PreviousChange => self.prev_backlog_change,
            };
            let action = if self.flag && b_k.abs() < 0.5 * reference.abs() {
                self.escalate(cap)
            } else {
                self.reset_escalation();
                Action::Inc
            };
            (action, Branch::BacklogRoseAgeFell)
        } else if b_k < 0.0 && delta_k > 0.0 {
            self.reset_escalation();
            (Action::Inc, Branch::BacklogFellAgeRose)
        } else {
            let action = if self.flag && self.gamma > 0 {
                Action::Mdec(self.gamma)
            } else {
                self.reset_escalation();
                Action::Dec
            };
            (action, Branch::Otherwise)
        };

        let target = match action {
            Action::Inc => cfg.kappa,
            Action::Dec => -cfg.kappa,
            Action::Mdec(g) => -(1.0 - 0.5f64.powi(g as i32)) * avg_backlog_k,
        };
        self.prev_target = target;
        self.prev_backlog_change = b_k;
        Verdict {
            action,
            branch,
            target,
        }
    }

    /// Records epoch averages without deciding; used for the interval before
    /// the first decision.
    pub fn observe_baseline(&mut self, stats: &EpochStats) {
        self.prev_avg_age = Some(stats.avg_age);
        self.prev_avg_backlog = Some(stats.avg_backlog);
    }

    /// Folds in a closed epoch. Returns `None` if there is no previous epoch
    /// to compare against.
    pub fn on_epoch(
        &mut self,
        cfg: &ControlConfig,
        stats: &EpochStats,
        rtt_bar: f64,
        z_bar: f64,
    ) -> Result<Option<ControlDecision>, ControlError> {
        self.epoch_index += 1;
        let (Some(prev_age), Some(prev_backlog)) = (self.prev_avg_age, self.prev_avg_backlog)
        else {
            self.observe_baseline(stats);
            return Ok(None);
        };
        let tau = time_scale(rtt_bar, z_bar)?;
        let b_k = stats.avg_backlog - prev_backlog;
        let delta_k = stats.avg_age - prev_age;
        let verdict = self.decide(cfg, b_k, delta_k, stats.avg_backlog);
        let new_lambda = target_to_rate(z_bar, tau, verdict.target, &cfg.bounds)?;
        self.lambda = new_lambda;
        self.observe_baseline(stats);
        Ok(Some(ControlDecision {
            verdict,
            backlog_change: b_k,
            age_change: delta_k,
            new_lambda,
        }))
    }
}

fn ready(name: &'static str, value: f64) -> Result<f64, ControlError> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(ControlError::EstimatorNotReady { name, value })
    }
}

/// `𝒯 = min(RTT̄, Z̄)`
pub fn time_scale(rtt_bar: f64, z_bar: f64) -> Result<f64, ControlError> {
    Ok(ready("rtt", rtt_bar)?.min(ready("z", z_bar)?))
}

/// Rate that moves the average backlog by `target` packets over `tau`.
pub fn target_to_rate(
    z_bar: f64,
    tau: f64,
    target: f64,
    bounds: &RateBounds,
) -> Result<f64, ControlError> {
    let z_bar = ready("z", z_bar)?;
    let tau = ready("tau", tau)?;
    Ok(bounds.clamp(1.0 / z_bar + target / tau))
}

/// Control epoch length `multiplier · min(RTT̄, Z̄)`, seconds.
pub fn epoch_period(rtt_bar: f64, z_bar: f64, multiplier: u32) -> Result<f64, ControlError> {
    if multiplier == 0 {
        return Err(ControlError::InvalidMultiplier);
    }
    Ok(multiplier as f64 * time_scale(rtt_bar, z_bar)?)
}

/// The Lazy baseline: one update per smoothed RTT.
pub fn lazy_rate(rtt_bar: f64, bounds: &RateBounds) -> Result<f64, ControlError> {
    Ok(bounds.clamp(1.0 / ready("rtt", rtt_bar)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::time::Micros;

    fn cfg() -> ControlConfig {
        ControlConfig::default()
    }

    #[test]
    fn first_rise_is_additive() {
        let mut st = ControlState::new(1.0);
        let v = st.decide(&cfg(), 2.0, 0.05, 3.0);
        assert_eq!(v.action, Action::Dec);
        assert_eq!(v.target, -0.25);
        assert!(st.flag);
        assert_eq!(st.gamma, 0);
    }

    #[test]
    fn repeated_rise_escalates() {
        let mut st = ControlState::new(1.0);
        st.flag = true;
        let v = st.decide(&cfg(), 2.0, 0.05, 8.0);
        assert_eq!(v.action, Action::Mdec(1));
        assert_eq!(v.target, -4.0);
        assert_eq!(st.gamma, 1);
    }

    #[test]
    fn falling_backlog_rising_age_increases() {
        let mut st = ControlState::new(1.0);
        st.flag = true;
        st.gamma = 3;
        let v = st.decide(&cfg(), -1.0, 0.05, 2.0);
        assert_eq!(v.action, Action::Inc);
        assert_eq!(v.branch, Branch::BacklogFellAgeRose);
        assert_eq!(v.target, 0.25);
        assert!(!st.flag);
        assert_eq!(st.gamma, 0);
    }

    #[test]
    fn both_falling_keeps_multiplicative_decrease() {
        let mut st = ControlState::new(1.0);
        st.flag = true;
        st.gamma = 1;
        st.prev_target = -4.0;
        let v = st.decide(&cfg(), -1.0, -0.02, 6.0);
        assert_eq!(v.branch, Branch::Otherwise);
        assert_eq!(v.action, Action::Mdec(1));
        assert_eq!(v.target, -3.0);
        assert_eq!((st.flag, st.gamma), (true, 1));
    }

    #[test]
    fn guard_escalates_on_small_realized_change() {
        let mut st = ControlState::new(1.0);
        st.flag = true;
        st.gamma = 2;
        st.prev_target = -6.0;
        let v = st.decide(&cfg(), 1.0, -0.01, 16.0);
        assert_eq!(v.action, Action::Mdec(3));
        assert_eq!(v.target, -(7.0 / 8.0) * 16.0);
    }

    #[test]
    fn guard_can_reference_previous_change() {
        let c = ControlConfig {
            guard: GuardReference::PreviousChange,
            ..cfg()
        };
        let mut st = ControlState::new(1.0);
        st.flag = true;
        st.prev_target = -100.0;
        st.prev_backlog_change = 1.0;
        // |1.0| < 0.5·|1.0| fails, so INC
        assert_eq!(st.decide(&c, 1.0, -0.01, 4.0).action, Action::Inc);
    }

    #[test]
    fn zeros_fall_through() {
        for (b, d) in [(0.0, 0.0), (0.0, 1.0), (1.0, 0.0), (-1.0, 0.0), (0.0, -1.0)] {
            let mut st = ControlState::new(1.0);
            let v = st.decide(&cfg(), b, d, 1.0);
            assert_eq!(v.branch, Branch::Otherwise, "b={b} d={d}");
            assert_eq!(v.action, Action::Dec);
        }
    }

    #[test]
    fn gamma_saturates_at_cap() {
        let c = ControlConfig {
            gamma_cap: 3,
            ..cfg()
        };
        let mut st = ControlState::new(1.0);
        st.flag = true;
        for _ in 0..10 {
            st.decide(&c, 1.0, 1.0, 1.0);
        }
        assert_eq!(st.gamma, 3);
        let v = st.decide(&c, 1.0, 1.0, 8.0);
        assert_eq!(v.target, -7.0);
    }

    #[test]
    fn rate_mapping() {
        let b = RateBounds::default();
        assert!((target_to_rate(0.1, 0.1, 1.0, &b).unwrap() - 20.0).abs() < 1e-12);
        assert_eq!(target_to_rate(0.1, 0.1, -4.0, &b).unwrap(), 0.1);
        assert_eq!(target_to_rate(0.1, 0.1, 0.0, &b).unwrap(), 1.0 / 0.1);
        assert_eq!(target_to_rate(1e-9, 1.0, 0.0, &b).unwrap(), 1e4);
        assert!(matches!(
            target_to_rate(0.0, 0.1, 0.0, &b),
            Err(ControlError::EstimatorNotReady { name: "z", .. })
        ));
        assert!(target_to_rate(0.1, -1.0, 0.0, &b).is_err());
    }

    #[test]
    fn epoch_length() {
        assert!((epoch_period(0.2, 0.05, 10).unwrap() - 0.5).abs() < 1e-12);
        assert!((epoch_period(0.1, 0.1, 10).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(epoch_period(0.3, 0.4, 1).unwrap(), 0.3);
        assert_eq!(
            epoch_period(0.3, 0.4, 0),
            Err(ControlError::InvalidMultiplier)
        );
        assert!(epoch_period(0.0, 0.4, 10).is_err());
    }

    #[test]
    fn lazy() {
        let b = RateBounds::default();
        assert!((lazy_rate(0.185, &b).unwrap() - 5.405405405).abs() < 1e-6);
        assert_eq!(lazy_rate(1.0, &b).unwrap(), 1.0);
        assert!((lazy_rate(0.005, &b).unwrap() - 200.0).abs() < 1e-9);
        assert!(lazy_rate(0.0, &b).is_err());
        assert!(lazy_rate(-0.1, &b).is_err());
    }

    #[test]
    fn bounds_validation() {
        assert!(RateBounds::new(0.0, 1.0).is_err());
        assert!(RateBounds::new(2.0, 1.0).is_err());
        assert_eq!(RateBounds::new(1.0, 2.0).unwrap().clamp(f64::NAN), 1.0);
    }

    #[test]
    fn on_epoch_needs_a_baseline() {
        let c = cfg();
        let mut st = ControlState::new(5.0);
        let e = |age: f64, backlog: f64, k: i64| EpochStats {
            avg_age: age,
            avg_backlog: backlog,
            epoch_start: Micros::from_secs(k),
            epoch_end: Micros::from_secs(k + 1),
        };
        assert_eq!(st.on_epoch(&c, &e(1.0, 1.0, 0), 0.2, 0.2).unwrap(), None);
        let d = st.on_epoch(&c, &e(1.5, 2.0, 1), 0.2, 0.2).unwrap().unwrap();
        assert_eq!(d.verdict.action, Action::Dec);
        assert_eq!(d.backlog_change, 1.0);
        assert_eq!(d.age_change, 0.5);
        // 1/0.2 - 0.25/0.2
        assert!((d.new_lambda - 3.75).abs() < 1e-12);
        assert_eq!(st.lambda, d.new_lambda);
        assert_eq!(st.epoch_index, 2);
    }
}
