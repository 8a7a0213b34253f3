//! Monitor side: keep the freshest update per source, ACK only fresh ones.

use std::collections::HashMap;
use std::hash::Hash;

use crate::codec::{AckHeader, UpdateHeader};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MonitorVerdict {
    Ack(AckHeader),
    /// Older than what the monitor already holds. No ACK is sent.
    Discard,
}

/// Freshness state for a single source.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FreshnessFilter {
    freshest_seq: Option<u32>,
    freshest_timestamp_us: u64,
    received: u64,
    discarded: u64,
}

impl FreshnessFilter {
    pub fn on_update(&mut self, header: &UpdateHeader) -> MonitorVerdict {
        self.received += 1;
        if self.freshest_seq.is_some_and(|s| header.seq <= s) {
            self.discarded += 1;
            return MonitorVerdict::Discard;
        }
        self.freshest_seq = Some(header.seq);
        self.freshest_timestamp_us = self.freshest_timestamp_us.max(header.gen_timestamp_us);
        MonitorVerdict::Ack(AckHeader::for_update(header))
    }

    pub fn freshest_seq(&self) -> Option<u32> {
        self.freshest_seq
    }

    pub fn freshest_timestamp_us(&self) -> u64 {
        self.freshest_timestamp_us
    }

    pub fn received(&self) -> u64 {
        self.received
    }

    pub fn discarded(&self) -> u64 {
        self.discarded
    }
}

/// A monitor serving any number of sources, keyed by remote address.
#[derive(Debug, Clone)]
pub struct MonitorEndpoint<A> {
    sources: HashMap<A, FreshnessFilter>,
}

impl<A: Hash + Eq + Clone> MonitorEndpoint<A> {
    pub fn new() -> Self {
        MonitorEndpoint {
            sources: HashMap::new(),
        }
    }

    pub fn on_update(&mut self, from: &A, header: &UpdateHeader) -> MonitorVerdict {
        self.sources
            .entry(from.clone())
            .or_default()
            .on_update(header)
    }

    pub fn source(&self, from: &A) -> Option<&FreshnessFilter> {
        self.sources.get(from)
    }

    pub fn sources(&self) -> impl Iterator<Item = (&A, &FreshnessFilter)> {
        self.sources.iter()
    }
}

impl<A: Hash + Eq + Clone> Default for MonitorEndpoint<A> {
    fn default() -> Self {
        Self::new()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn update(seq: u32) -> UpdateHeader {
        UpdateHeader {
            seq,
            gen_timestamp_us: seq as u64 * 1000,
            payload_len: 0,
        }
    }

    #[test]
    fn acks_fresh_update() {
        let mut f = FreshnessFilter::default();
        f.on_update(&update(3));
        assert_eq!(
            f.on_update(&update(5)),
            MonitorVerdict::Ack(AckHeader {
                seq: 5,
                echo_timestamp_us: 5000
            })
        );
        assert_eq!(f.freshest_seq(), Some(5));
    }

    #[test]
    fn discards_stale_update() {
        let mut f = FreshnessFilter::default();
        f.on_update(&update(5));
        assert_eq!(f.on_update(&update(4)), MonitorVerdict::Discard);
        assert_eq!(f.on_update(&update(5)), MonitorVerdict::Discard);
        assert_eq!(f.freshest_seq(), Some(5));
        assert_eq!((f.received(), f.discarded()), (3, 2));
    }

    #[test]
    fn first_update_is_acked() {
        let mut m = MonitorEndpoint::<u8>::new();
        assert!(matches!(
            m.on_update(&0, &update(1)),
            MonitorVerdict::Ack(_)
        ));
        // sources are independent
        assert!(matches!(
            m.on_update(&1, &update(1)),
            MonitorVerdict::Ack(_)
        ));
        assert_eq!(m.on_update(&0, &update(1)), MonitorVerdict::Discard);
    }

    proptest! {
        #[test]
        fn acked_sequence_strictly_increases(trace in Just((1u32..200).collect::<Vec<_>>()).prop_shuffle()) {
            let mut f = FreshnessFilter::default();
            let mut last_ack: Option<u32> = None;
            let mut last_ts = 0;
            for seq in trace {
                if let MonitorVerdict::Ack(a) = f.on_update(&update(seq)) {
                    prop_assert!(last_ack.map_or(true, |l| a.seq > l));
                    last_ack = Some(a.seq);
                }
                prop_assert!(f.freshest_timestamp_us() >= last_ts);
                last_ts = f.freshest_timestamp_us();
            }
        }
    }
}
