//! Age and backlog sample paths as seen from the source.
//!
//! The source cannot observe the monitor directly. It approximates the
//! delivery instant of update `i` by the arrival of the ACK for `i`, and at
//! that instant resets its age estimate to the round-trip time of `i`
//! (ACK arrival minus the echoed generation timestamp). Between resets the
//! age grows with slope one. The backlog is the number of updates sent but
//! not yet cumulatively acknowledged.
//!
//! Areas are accumulated exactly in integer microseconds. The age area is
//! kept doubled so the triangular part of every ramp stays integral.

use std::collections::VecDeque;

use thiserror::Error;

use crate::time::Micros;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AgeError {
    #[error("sequence {seq} is not newer than {newest}")]
    Sequencing { seq: u64, newest: u64 },
    #[error("event at {t} precedes the last processed event at {last}")]
    TimeOrder { t: Micros, last: Micros },
    #[error("ACK received at {recv} echoes a later timestamp {echo}")]
    ClockAnomaly { recv: Micros, echo: Micros },
    #[error("epoch ({start}, {end}) has no length")]
    DegenerateInterval { start: Micros, end: Micros },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SendRecord {
    pub seq: u64,
    pub send_time: Micros,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AckEvent {
    pub seq: u64,
    /// Generation timestamp copied from the acknowledged update.
    pub echo_timestamp: Micros,
    /// Arrival of the ACK on the source clock.
    pub recv_time: Micros,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AckDisposition {
    /// The ACK was the freshest so far. `cleared` counts the pending updates
    /// it acknowledged, including older ones that will never be ACKed.
    Accepted { rtt: Micros, cleared: usize },
    /// Out-of-sequence ACK; age and backlog are untouched.
    Discarded,
}

/// Time averages over one control epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    /// Time-average age in seconds.
    pub avg_age: f64,
    /// Time-average backlog in packets.
    pub avg_backlog: f64,
    pub epoch_start: Micros,
    pub epoch_end: Micros,
}

impl EpochStats {
    pub fn length(&self) -> Micros {
        self.epoch_end - self.epoch_start
    }
}

/// A slope-one age process with resets, integrated exactly.
///
/// Also used on its own by the simulator to track the true age at a monitor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgeCurve {
    reset_time: Micros,
    reset_age: Micros,
    last_time: Micros,
    twice_area: i128,
}

impl AgeCurve {
    /// An age process that is `initial_age` at `start`.
    pub fn new(start: Micros, initial_age: Micros) -> Self {
        AgeCurve {
            reset_time: start,
            reset_age: initial_age,
            last_time: start,
            twice_area: 0,
        }
    }

    pub fn value_at(&self, t: Micros) -> Result<Micros, AgeError> {
        if t < self.reset_time {
            return Err(AgeError::TimeOrder {
                t,
                last: self.reset_time,
            });
        }
        Ok(self.reset_age + (t - self.reset_time))
    }

    pub fn last_reset(&self) -> (Micros, Micros) {
        (self.reset_time, self.reset_age)
    }

    pub fn last_time(&self) -> Micros {
        self.last_time
    }

    /// Integrates the ramp up to `t`.
    pub fn advance(&mut self, t: Micros) -> Result<(), AgeError> {
        if t < self.last_time {
            return Err(AgeError::TimeOrder {
                t,
                last: self.last_time,
            });
        }
        let start_age = (self.reset_age + (self.last_time - self.reset_time)).0 as i128;
        let len = (t - self.last_time).0 as i128;
        self.twice_area += 2 * start_age * len + len * len;
        self.last_time = t;
        Ok(())
    }

    /// Advances to `t` and resets the age to `age` there.
    pub fn reset(&mut self, t: Micros, age: Micros) -> Result<(), AgeError> {
        self.advance(t)?;
        self.reset_time = t;
        self.reset_age = age;
        Ok(())
    }

    /// Twice the accumulated area in µs², then zeroes the accumulator.
    pub fn take_twice_area(&mut self) -> i128 {
        std::mem::take(&mut self.twice_area)
    }

    pub fn twice_area(&self) -> i128 {
        self.twice_area
    }
}

/// Source-side reconstruction of the age and backlog processes.
///
/// Callers must serialize access; events are expected in time order.
#[derive(Debug, Clone)]
pub struct SamplePath {
    age: AgeCurve,
    last_acked_seq: Option<u64>,
    newest_sent_seq: Option<u64>,
    pending: VecDeque<SendRecord>,
    backlog_area: i128,
    last_event_time: Micros,
    epoch_start: Micros,
}

impl SamplePath {
    /// A connection opened at `start`, with the age estimate starting at zero.
    pub fn new(start: Micros) -> Self {
        SamplePath {
            age: AgeCurve::new(start, Micros::ZERO),
            last_acked_seq: None,
            newest_sent_seq: None,
            pending: VecDeque::new(),
            backlog_area: 0,
            last_event_time: start,
            epoch_start: start,
        }
    }

    pub fn backlog(&self) -> usize {
        self.pending.len()
    }

    pub fn pending(&self) -> impl Iterator<Item = &SendRecord> {
        self.pending.iter()
    }

    pub fn oldest_pending(&self) -> Option<&SendRecord> {
        self.pending.front()
    }

    pub fn last_acked_seq(&self) -> Option<u64> {
        self.last_acked_seq
    }

    pub fn last_event_time(&self) -> Micros {
        self.last_event_time
    }

    pub fn epoch_start(&self) -> Micros {
        self.epoch_start
    }

    /// `(time, age)` of the most recent reset.
    pub fn last_reset(&self) -> (Micros, Micros) {
        self.age.last_reset()
    }

    fn check_time(&self, t: Micros) -> Result<(), AgeError> {
        if t < self.last_event_time {
            return Err(AgeError::TimeOrder {
                t,
                last: self.last_event_time,
            });
        }
        Ok(())
    }

    fn advance(&mut self, t: Micros) -> Result<(), AgeError> {
        self.check_time(t)?;
        self.age.advance(t)?;
        self.backlog_area += self.pending.len() as i128 * (t - self.last_event_time).0 as i128;
        self.last_event_time = t;
        Ok(())
    }

    pub fn record_send(&mut self, t: Micros, seq: u64) -> Result<(), AgeError> {
        let newest = self.newest_sent_seq.max(self.last_acked_seq);
        if let Some(newest) = newest {
            if seq <= newest {
                return Err(AgeError::Sequencing { seq, newest });
            }
        }
        self.advance(t)?;
        self.pending.push_back(SendRecord { seq, send_time: t });
        self.newest_sent_seq = Some(seq);
        Ok(())
    }

    pub fn record_ack(&mut self, ack: AckEvent) -> Result<AckDisposition, AgeError> {
        self.check_time(ack.recv_time)?;
        if ack.recv_time < ack.echo_timestamp {
            return Err(AgeError::ClockAnomaly {
                recv: ack.recv_time,
                echo: ack.echo_timestamp,
            });
        }
        self.advance(ack.recv_time)?;
        if self.last_acked_seq.is_some_and(|last| ack.seq <= last) {
            return Ok(AckDisposition::Discarded);
        }

        let rtt = ack.recv_time - ack.echo_timestamp;
        self.age.reset(ack.recv_time, rtt)?;
        let before = self.pending.len();
        while self.pending.front().is_some_and(|r| r.seq <= ack.seq) {
            self.pending.pop_front();
        }
        self.last_acked_seq = Some(ack.seq);
        Ok(AckDisposition::Accepted {
            rtt,
            cleared: before - self.pending.len(),
        })
    }

    pub fn instantaneous_age(&self, t: Micros) -> Result<Micros, AgeError> {
        self.age.value_at(t)
    }

    /// Closes the epoch that started at the previous close (or at connection
    /// start) and returns its time averages. Pending updates and the last age
    /// reset carry over into the next epoch.
    ///
    /// Events stamped exactly `t_end` that were recorded before this call
    /// belong to the closing epoch.
    pub fn close_epoch(&mut self, t_end: Micros) -> Result<EpochStats, AgeError> {
        if t_end <= self.epoch_start {
            return Err(AgeError::DegenerateInterval {
                start: self.epoch_start,
                end: t_end,
            });
        }
        self.advance(t_end)?;
        let len = (t_end - self.epoch_start).0 as f64;
        let twice_area = self.age.take_twice_area();
        let backlog_area = std::mem::take(&mut self.backlog_area);
        let stats = EpochStats {
            avg_age: twice_area as f64 / (2.0 * len) * 1e-6,
            avg_backlog: backlog_area as f64 / len,
            epoch_start: self.epoch_start,
            epoch_end: t_end,
        };
        self.epoch_start = t_end;
        Ok(stats)
    }
}
