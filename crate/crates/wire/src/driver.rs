//! Event loops tying endpoints to a clock and a transport.

use std::io;
use std::sync::atomic::{AtomicBool, Ordering};

use acp_core::{AckDisposition, Micros};
use thiserror::Error;

use crate::clock::Clock;
use crate::codec::{
    decode_packet, encode_ack, encode_update, AckHeader, CodecError, Packet, UpdateHeader,
};
use crate::monitor::{MonitorEndpoint, MonitorVerdict};
use crate::source::{EpochRecord, Phase, SentUpdate, SourceEffect, SourceEndpoint, SourceError};
use crate::transport::Transport;

/// Upper bound on a single blocking wait, so stop flags are noticed.
const MAX_WAIT: Micros = Micros::from_millis(100);

#[derive(Debug, Error)]
pub enum DriverError {
    #[error("no probe was acknowledged; connection failed")]
    ConnectionFailed,
    #[error(transparent)]
    Source(#[from] SourceError),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error("network error: {0}")]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AckRecord {
    pub header: AckHeader,
    pub at: Micros,
    pub disposition: AckDisposition,
}

#[derive(Debug, Clone, Default)]
pub struct SourceLog {
    pub sends: Vec<SentUpdate>,
    pub acks: Vec<AckRecord>,
    pub epochs: Vec<EpochRecord>,
    pub stalls: Vec<Micros>,
    pub init_lambda: Option<f64>,
    pub malformed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceSummary {
    /// Time-average age over the closed control epochs, seconds.
    pub avg_age: f64,
    pub avg_backlog: f64,
    pub mean_rtt: f64,
    pub updates_sent: u64,
    pub acks_accepted: u64,
    /// Update rate over the span of non-probe sends.
    pub achieved_lambda: f64,
    pub duration: f64,
}

impl SourceLog {
    fn apply(&mut self, fx: &SourceEffect) {
        match fx {
            SourceEffect::Send(s) => self.sends.push(*s),
            SourceEffect::EpochClosed(r) => self.epochs.push(r.clone()),
            SourceEffect::InitComplete { lambda, .. } => self.init_lambda = Some(*lambda),
            SourceEffect::Stalled { since } => self.stalls.push(*since),
            SourceEffect::InitFailed => {}
        }
    }

    pub fn updates_sent(&self) -> u64 {
        self.sends.iter().filter(|s| !s.probe).count() as u64
    }

    pub fn summary(&self) -> SourceSummary {
        let running = self.epochs.iter().filter(|e| e.index > 0);
        let (mut t, mut age, mut backlog) = (0.0, 0.0, 0.0);
        for e in running {
            let len = e.stats.length().as_secs_f64();
            t += len;
            age += e.stats.avg_age * len;
            backlog += e.stats.avg_backlog * len;
        }
        let rtts: Vec<f64> = self
            .acks
            .iter()
            .filter_map(|a| match a.disposition {
                AckDisposition::Accepted { rtt, .. } => Some(rtt.as_secs_f64()),
                AckDisposition::Discarded => None,
            })
            .collect();
        let updates: Vec<&SentUpdate> = self.sends.iter().filter(|s| !s.probe).collect();
        let achieved = match (updates.first(), updates.last()) {
            (Some(a), Some(b)) if b.timestamp > a.timestamp => {
                (updates.len() - 1) as f64 / (b.timestamp - a.timestamp).as_secs_f64()
            }
            _ => 0.0,
        };
        let ratio = |x: f64| if t > 0.0 { x / t } else { f64::NAN };
        SourceSummary {
            avg_age: ratio(age),
            avg_backlog: ratio(backlog),
            mean_rtt: if rtts.is_empty() {
                f64::NAN
            } else {
                rtts.iter().sum::<f64>() / rtts.len() as f64
            },
            updates_sent: updates.len() as u64,
            acks_accepted: rtts.len() as u64,
            achieved_lambda: achieved,
            duration: t,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceRunOptions {
    /// Stop after this many updates (probes excluded).
    pub max_updates: Option<u64>,
    pub max_duration: Option<Micros>,
    pub payload_len: u16,
    /// Time to keep collecting ACKs after the last send.
    pub linger: Micros,
}

impl Default for SourceRunOptions {
    fn default() -> Self {
        SourceRunOptions {
            max_updates: None,
            max_duration: None,
            payload_len: 0,
            linger: Micros::ZERO,
        }
    }
}

struct SourceDriver<'a, T: Transport, C: Clock> {
    ep: &'a mut SourceEndpoint,
    transport: &'a mut T,
    clock: &'a C,
    dest: &'a T::Addr,
    payload: Vec<u8>,
    log: SourceLog,
}

impl<T: Transport, C: Clock> SourceDriver<'_, T, C> {
    fn poll(&mut self) -> Result<(), DriverError> {
        for fx in self.ep.poll(self.clock.now())? {
            if let SourceEffect::Send(s) = &fx {
                let header = UpdateHeader {
                    seq: s.seq,
                    gen_timestamp_us: s.timestamp.0 as u64,
                    payload_len: self.payload.len() as u16,
                };
                let bytes = encode_update(&header, &self.payload)?;
                self.transport.send_to(&bytes, self.dest)?;
            }
            if fx == SourceEffect::InitFailed {
                self.log.apply(&fx);
                return Err(DriverError::ConnectionFailed);
            }
            self.log.apply(&fx);
        }
        Ok(())
    }

    fn receive(&mut self, until: Micros) -> Result<(), DriverError> {
        let timeout = (until - self.clock.now()).min(MAX_WAIT);
        let Some((bytes, from)) = self.transport.recv_timeout(timeout)? else {
            return Ok(());
        };
        if &from != self.dest {
            return Ok(());
        }
        match decode_packet(&bytes) {
            Ok(Packet::Ack(header)) => {
                let at = self.clock.now();
                let disposition = self.ep.on_ack(&header, at)?;
                self.log.acks.push(AckRecord {
                    header,
                    at,
                    disposition,
                });
            }
            Ok(Packet::Update { .. }) => {}
            Err(_) => self.log.malformed += 1,
        }
        Ok(())
    }

    fn run_until(&mut self, mut done: impl FnMut(&Self) -> bool) -> Result<(), DriverError> {
        loop {
            self.poll()?;
            if done(self) {
                return Ok(());
            }
            let now = self.clock.now();
            let wake = self.ep.next_wakeup().unwrap_or(now + MAX_WAIT);
            self.receive(wake)?;
        }
    }
}

/// Runs the probe phase and returns the initial rate.
pub fn source_init_phase<T: Transport, C: Clock>(
    ep: &mut SourceEndpoint,
    transport: &mut T,
    clock: &C,
    dest: &T::Addr,
) -> Result<f64, DriverError> {
    let mut d = SourceDriver {
        ep,
        transport,
        clock,
        dest,
        payload: Vec::new(),
        log: SourceLog::default(),
    };
    d.run_until(|d| d.ep.phase() != Phase::Init)?;
    Ok(d.ep.lambda())
}

/// Runs a source connection (including the probe phase if it has not
/// happened yet) until one of the stop conditions in `opts` is met.
pub fn run_source<T: Transport, C: Clock>(
    ep: &mut SourceEndpoint,
    transport: &mut T,
    clock: &C,
    dest: &T::Addr,
    opts: &SourceRunOptions,
) -> Result<SourceLog, DriverError> {
    let start = clock.now();
    let mut d = SourceDriver {
        ep,
        transport,
        clock,
        dest,
        payload: vec![0; opts.payload_len as usize],
        log: SourceLog::default(),
    };
    d.run_until(|d| {
        let sent = d.log.updates_sent();
        opts.max_updates.is_some_and(|m| sent >= m)
            || opts
                .max_duration
                .is_some_and(|m| d.clock.now() - start >= m)
    })?;
    let stop = clock.now() + opts.linger;
    while clock.now() < stop {
        d.receive(stop)?;
    }
    Ok(d.log)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SentAck<A> {
    pub to: A,
    pub header: AckHeader,
    pub at: Micros,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MonitorLog<A> {
    pub acks: Vec<SentAck<A>>,
    pub malformed: u64,
}

impl<A> Default for MonitorLog<A> {
    fn default() -> Self {
        MonitorLog {
            acks: Vec::new(),
            malformed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct MonitorRunOptions<'a> {
    /// Stop after this long without any datagram, once one has arrived.
    pub idle_timeout: Option<Micros>,
    pub max_duration: Option<Micros>,
    pub stop: Option<&'a AtomicBool>,
}

/// Serves updates until a stop condition in `opts` is met.
pub fn run_monitor<T: Transport, C: Clock>(
    monitor: &mut MonitorEndpoint<T::Addr>,
    transport: &mut T,
    clock: &C,
    opts: &MonitorRunOptions<'_>,
) -> Result<MonitorLog<T::Addr>, DriverError> {
    let start = clock.now();
    let mut last_rx: Option<Micros> = None;
    let mut log = MonitorLog::default();
    loop {
        let now = clock.now();
        if opts.stop.is_some_and(|s| s.load(Ordering::Relaxed))
            || opts.max_duration.is_some_and(|m| now - start >= m)
            || matches!((opts.idle_timeout, last_rx), (Some(idle), Some(t)) if now - t >= idle)
        {
            return Ok(log);
        }
        let Some((bytes, from)) = transport.recv_timeout(MAX_WAIT)? else {
            continue;
        };
        let at = clock.now();
        last_rx = Some(at);
        match decode_packet(&bytes) {
            Ok(Packet::Update { header, .. }) => {
                if let MonitorVerdict::Ack(ack) = monitor.on_update(&from, &header) {
                    transport.send_to(&encode_ack(&ack), &from)?;
                    log.acks.push(SentAck {
                        to: from,
                        header: ack,
                        at,
                    });
                }
            }
            Ok(Packet::Ack(_)) => {}
            Err(_) => log.malformed += 1,
        }
    }
}
