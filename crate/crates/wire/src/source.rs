//! Source endpoint state machine.
//!
//! The endpoint is clock- and transport-agnostic: the owner calls
//! [`SourceEndpoint::poll`] at (or after) [`SourceEndpoint::next_wakeup`] and
//! whenever an ACK was handed to [`SourceEndpoint::on_ack`], and carries out
//! the returned [`SourceEffect`]s.
//!
//! A connection starts with an initialization phase: probes are sent one at a
//! time, each waiting for its ACK or a timeout. The mean probe RTT gives the
//! first rate. After that the source sends at a fixed period `1/λ` within each
//! control epoch and re-decides `λ` when the epoch ends.

use acp_core::control::{self, epoch_period, lazy_rate, RateBounds, DEFAULT_EPOCH_MULTIPLIER};
use acp_core::{
    AckDisposition, AckEvent, AgeError, ControlConfig, ControlDecision, ControlError, ControlState,
    EpochStats, Ewma, EwmaError, Micros, SamplePath,
};
use thiserror::Error;

use crate::codec::AckHeader;

pub const DEFAULT_PROBES: u32 = 10;
pub const DEFAULT_PROBE_TIMEOUT: Micros = Micros::from_secs(1);
pub const DEFAULT_STALL_EPOCHS: u32 = 10;
/// Keeps sub-millisecond loopback epochs from reporting stalls on scheduler
/// hiccups.
pub const DEFAULT_STALL_FLOOR: Micros = Micros::from_millis(50);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SourceError {
    #[error(transparent)]
    Age(#[from] AgeError),
    #[error(transparent)]
    Control(#[from] ControlError),
    #[error(transparent)]
    Estimator(#[from] EwmaError),
    #[error("invalid source configuration: {0}")]
    Config(String),
    #[error("sequence space exhausted")]
    SequenceExhausted,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RateController {
    Acp(ControlConfig),
    /// One update per smoothed RTT.
    Lazy(RateBounds),
    /// Constant rate after initialization, updates per second.
    Fixed(f64),
}

impl RateController {
    pub fn name(&self) -> &'static str {
        match self {
            RateController::Acp(_) => "acp",
            RateController::Lazy(_) => "lazy",
            RateController::Fixed(_) => "fixed",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceConfig {
    pub controller: RateController,
    /// Smoothing weight of the RTT and inter-ACK estimators.
    pub alpha: f64,
    pub probes: u32,
    pub probe_timeout: Micros,
    /// Stall is reported after this many epoch lengths without an accepted ACK.
    pub stall_epochs: u32,
    /// Lower bound on the stall window.
    pub stall_floor: Micros,
}

impl SourceConfig {
    pub fn new(controller: RateController) -> Self {
        SourceConfig {
            controller,
            alpha: acp_core::DEFAULT_ALPHA,
            probes: DEFAULT_PROBES,
            probe_timeout: DEFAULT_PROBE_TIMEOUT,
            stall_epochs: DEFAULT_STALL_EPOCHS,
            stall_floor: DEFAULT_STALL_FLOOR,
        }
    }

    fn validate(&self) -> Result<(), SourceError> {
        if self.probes == 0 {
            return Err(SourceError::Config("at least one probe is required".into()));
        }
        if self.probe_timeout <= Micros::ZERO {
            return Err(SourceError::Config("probe timeout must be positive".into()));
        }
        match self.controller {
            RateController::Fixed(l) if !(l > 0.0 && l.is_finite()) => Err(SourceError::Config(
                format!("fixed rate {l} is not positive"),
            )),
            RateController::Acp(c) if !(c.kappa > 0.0) => Err(SourceError::Config(format!(
                "step size {} is not positive",
                c.kappa
            ))),
            RateController::Acp(c) => {
                RateBounds::new(c.bounds.min, c.bounds.max)?;
                Ok(())
            }
            RateController::Lazy(b) => {
                RateBounds::new(b.min, b.max)?;
                Ok(())
            }
            _ => Ok(()),
        }
    }

    fn epoch_multiplier(&self) -> u32 {
        match self.controller {
            RateController::Acp(c) => c.epoch_multiplier,
            _ => DEFAULT_EPOCH_MULTIPLIER,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Init,
    Running,
    Failed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SentUpdate {
    pub seq: u32,
    /// Generation timestamp carried in the header.
    pub timestamp: Micros,
    /// Slot on the fixed-period schedule this send belongs to.
    pub scheduled: Micros,
    pub probe: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    /// 0 is the initialization interval.
    pub index: u64,
    pub stats: EpochStats,
    pub decision: Option<ControlDecision>,
    /// Rate in force for the epoch that starts now.
    pub lambda: f64,
    pub rtt_bar: f64,
    pub z_bar: Option<f64>,
    pub stalled: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SourceEffect {
    Send(SentUpdate),
    EpochClosed(EpochRecord),
    InitComplete { lambda: f64, successes: usize },
    InitFailed,
    Stalled { since: Micros },
}

#[derive(Debug, Clone, Default)]
struct Probing {
    sent: u32,
    outstanding: Option<(u32, Micros)>,
    rtts: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SourceEndpoint {
    cfg: SourceConfig,
    path: SamplePath,
    control: Option<ControlState>,
    rtt: Ewma,
    z: Ewma,
    phase: Phase,
    probing: Probing,
    lambda: f64,
    period: Micros,
    next_seq: u32,
    next_send: Micros,
    last_send: Option<Micros>,
    epoch_start: Micros,
    epoch_deadline: Micros,
    epoch_index: u64,
    last_accept: Option<Micros>,
    stalled: bool,
}

fn period_of(lambda: f64) -> Micros {
    Micros::from_secs_f64(1.0 / lambda).max(Micros(1))
}

impl SourceEndpoint {
    pub fn new(cfg: SourceConfig, start: Micros) -> Result<Self, SourceError> {
        cfg.validate()?;
        Ok(SourceEndpoint {
            path: SamplePath::new(start),
            control: None,
            rtt: Ewma::new(cfg.alpha)?,
            z: Ewma::new(cfg.alpha)?,
            phase: Phase::Init,
            probing: Probing::default(),
            lambda: 0.0,
            period: Micros::MAX,
            next_seq: 1,
            next_send: Micros::MAX,
            last_send: None,
            epoch_start: start,
            epoch_deadline: Micros::MAX,
            epoch_index: 0,
            last_accept: None,
            stalled: false,
            cfg,
        })
    }

    pub fn config(&self) -> &SourceConfig {
        &self.cfg
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    /// Current update rate; zero until initialization completes.
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn period(&self) -> Micros {
        self.period
    }

    pub fn rtt_bar(&self) -> Option<f64> {
        self.rtt.value()
    }

    pub fn z_bar(&self) -> Option<f64> {
        self.z.value()
    }

    pub fn sample_path(&self) -> &SamplePath {
        &self.path
    }

    pub fn control(&self) -> Option<&ControlState> {
        self.control.as_ref()
    }

    pub fn is_stalled(&self) -> bool {
        self.stalled
    }

    pub fn epoch_start(&self) -> Micros {
        self.epoch_start
    }

    /// Current control epoch length, `multiplier · min(RTT̄, Z̄)`.
    pub fn epoch_length(&self) -> Option<Micros> {
        let rtt = self.rtt.value()?;
        let z = self.z.value().unwrap_or(rtt);
        let secs = epoch_period(rtt, z, self.cfg.epoch_multiplier()).ok()?;
        Some(Micros::from_secs_f64(secs).max(Micros(1)))
    }

    /// End of the current control epoch, fixed when the epoch opens.
    pub fn epoch_deadline(&self) -> Option<Micros> {
        (self.phase == Phase::Running).then_some(self.epoch_deadline)
    }

    fn open_epoch(&mut self, now: Micros) {
        self.epoch_start = now;
        self.epoch_deadline = self.epoch_length().map_or(Micros::MAX, |len| now + len);
    }

    fn stall_check_at(&self) -> Option<Micros> {
        if self.stalled {
            return None;
        }
        let oldest = self.path.oldest_pending()?.send_time;
        let since = self.last_accept.map_or(oldest, |a| a.max(oldest));
        let window = Micros(
            self.epoch_length()?
                .0
                .saturating_mul(self.cfg.stall_epochs as i64),
        )
        .max(self.cfg.stall_floor);
        Some(since + window)
    }

    /// Earliest time at which `poll` has something to do.
    pub fn next_wakeup(&self) -> Option<Micros> {
        match self.phase {
            Phase::Init => Some(match self.probing.outstanding {
                Some((_, deadline)) => deadline,
                None => self.path.last_event_time(),
            }),
            Phase::Running => [
                Some(self.next_send),
                self.epoch_deadline(),
                self.stall_check_at(),
            ]
            .into_iter()
            .flatten()
            .min(),
            Phase::Failed => None,
        }
    }

    /// Advances timers to `now`. Epoch processing runs before sends, so the
    /// first update of an epoch already uses the new rate.
    pub fn poll(&mut self, now: Micros) -> Result<Vec<SourceEffect>, SourceError> {
        let mut effects = Vec::new();
        match self.phase {
            Phase::Init => self.poll_init(now, &mut effects)?,
            Phase::Running => self.poll_running(now, &mut effects)?,
            Phase::Failed => {}
        }
        Ok(effects)
    }

    fn take_seq(&mut self) -> Result<u32, SourceError> {
        let seq = self.next_seq;
        self.next_seq = seq.checked_add(1).ok_or(SourceError::SequenceExhausted)?;
        Ok(seq)
    }

    fn poll_init(&mut self, now: Micros, fx: &mut Vec<SourceEffect>) -> Result<(), SourceError> {
        if let Some((_, deadline)) = self.probing.outstanding {
            if now < deadline {
                return Ok(());
            }
            self.probing.outstanding = None;
        }
        if self.probing.sent < self.cfg.probes {
            let seq = self.take_seq()?;
            self.path.record_send(now, seq as u64)?;
            self.probing.sent += 1;
            self.probing.outstanding = Some((seq, now + self.cfg.probe_timeout));
            fx.push(SourceEffect::Send(SentUpdate {
                seq,
                timestamp: now,
                scheduled: now,
                probe: true,
            }));
            return Ok(());
        }
        self.finish_init(now, fx)
    }

    fn finish_init(&mut self, now: Micros, fx: &mut Vec<SourceEffect>) -> Result<(), SourceError> {
        let rtts = &self.probing.rtts;
        if rtts.is_empty() {
            self.phase = Phase::Failed;
            fx.push(SourceEffect::InitFailed);
            return Ok(());
        }
        let mean = rtts.iter().sum::<f64>() / rtts.len() as f64;
        let lambda = match self.cfg.controller {
            RateController::Acp(c) => {
                let l = c.bounds.clamp(1.0 / mean);
                self.control = Some(ControlState::new(l));
                l
            }
            RateController::Lazy(b) => b.clamp(1.0 / mean),
            RateController::Fixed(l) => l,
        };
        let successes = rtts.len();
        self.phase = Phase::Running;
        self.lambda = lambda;
        self.period = period_of(lambda);
        self.next_send = now;

        if now > self.path.epoch_start() {
            let stats = self.path.close_epoch(now)?;
            if let Some(state) = self.control.as_mut() {
                state.observe_baseline(&stats);
            }
            fx.push(SourceEffect::EpochClosed(EpochRecord {
                index: 0,
                stats,
                decision: None,
                lambda,
                rtt_bar: self.rtt.value().unwrap_or(mean),
                z_bar: self.z.value(),
                stalled: false,
            }));
        }
        self.open_epoch(now);
        self.epoch_index = 1;
        fx.push(SourceEffect::InitComplete { lambda, successes });
        self.poll_running(now, fx)
    }

    fn set_rate(&mut self, lambda: f64, now: Micros) {
        self.lambda = lambda;
        self.period = period_of(lambda);
        self.next_send = match self.last_send {
            Some(last) => (last + self.period).max(now),
            None => now,
        };
    }

    fn poll_running(&mut self, now: Micros, fx: &mut Vec<SourceEffect>) -> Result<(), SourceError> {
        if self.epoch_deadline().is_some_and(|d| now >= d) {
            self.close_epoch(now, fx)?;
        }
        if self.stall_check_at().is_some_and(|t| now >= t) {
            self.stalled = true;
            let oldest = self.path.oldest_pending().map(|r| r.send_time);
            let since = match (self.last_accept, oldest) {
                (Some(a), Some(o)) => a.max(o),
                (a, o) => a.or(o).unwrap_or(now),
            };
            fx.push(SourceEffect::Stalled { since });
        }
        while now >= self.next_send {
            let seq = self.take_seq()?;
            self.path.record_send(now, seq as u64)?;
            fx.push(SourceEffect::Send(SentUpdate {
                seq,
                timestamp: now,
                scheduled: self.next_send,
                probe: false,
            }));
            self.last_send = Some(now);
            self.next_send += self.period;
        }
        Ok(())
    }

    fn close_epoch(&mut self, now: Micros, fx: &mut Vec<SourceEffect>) -> Result<(), SourceError> {
        let stats = self.path.close_epoch(now)?;
        let rtt_bar = self.rtt.value().ok_or(ControlError::EstimatorNotReady {
            name: "rtt",
            value: 0.0,
        })?;
        let z_bar = self.z.value();
        let mut decision = None;
        if let (RateController::Acp(cfg), Some(state)) =
            (self.cfg.controller, self.control.as_mut())
        {
            if self.stalled {
                // rate stays frozen while no ACKs arrive
                state.epoch_index += 1;
                state.observe_baseline(&stats);
            } else {
                decision = state.on_epoch(&cfg, &stats, rtt_bar, z_bar.unwrap_or(rtt_bar))?;
            }
        }
        if let Some(d) = decision {
            self.set_rate(d.new_lambda, now);
        }
        fx.push(SourceEffect::EpochClosed(EpochRecord {
            index: self.epoch_index,
            stats,
            decision,
            lambda: self.lambda,
            rtt_bar,
            z_bar,
            stalled: self.stalled,
        }));
        self.epoch_index += 1;
        self.open_epoch(now);
        Ok(())
    }

    /// Feeds an ACK received at `now`.
    pub fn on_ack(&mut self, ack: &AckHeader, now: Micros) -> Result<AckDisposition, SourceError> {
        if self.phase == Phase::Failed {
            return Ok(AckDisposition::Discarded);
        }
        let echo = i64::try_from(ack.echo_timestamp_us).unwrap_or(i64::MAX);
        let disposition = self.path.record_ack(AckEvent {
            seq: ack.seq as u64,
            echo_timestamp: Micros(echo),
            recv_time: now,
        })?;
        let AckDisposition::Accepted { rtt, .. } = disposition else {
            return Ok(disposition);
        };

        if rtt > Micros::ZERO {
            self.rtt.update(rtt.as_secs_f64())?;
        }
        if let Some(prev) = self.last_accept {
            let gap = now - prev;
            if gap > Micros::ZERO {
                self.z.update(gap.as_secs_f64())?;
            }
        }
        self.last_accept = Some(now);
        self.stalled = false;

        match self.phase {
            Phase::Init => {
                self.probing.rtts.push(rtt.as_secs_f64());
                if self
                    .probing
                    .outstanding
                    .is_some_and(|(seq, _)| ack.seq >= seq)
                {
                    self.probing.outstanding = None;
                }
            }
            Phase::Running => {
                if let (RateController::Lazy(bounds), Some(rtt_bar)) =
                    (self.cfg.controller, self.rtt.value())
                {
                    self.set_rate(lazy_rate(rtt_bar, &bounds)?, now);
                }
            }
            Phase::Failed => {}
        }
        Ok(disposition)
    }
}

/// `𝒯 = min(RTT̄, Z̄)` for an endpoint, when its estimators are ready.
pub fn time_scale(ep: &SourceEndpoint) -> Option<f64> {
    let rtt = ep.rtt_bar()?;
    control::time_scale(rtt, ep.z_bar().unwrap_or(rtt)).ok()
}
