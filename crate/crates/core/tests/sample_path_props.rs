//! Randomized event traces against the source-side sample path.

use acp_core::{AckDisposition, AckEvent, Micros, SamplePath};
use proptest::prelude::*;

#[derive(Debug, Clone)]
enum Step {
    Send { gap: i64 },
    Ack { gap: i64, pick: usize },
}

fn step() -> impl Strategy<Value = Step> {
    prop_oneof![
        (0i64..2_000_000).prop_map(|gap| Step::Send { gap }),
        (0i64..2_000_000, any::<usize>()).prop_map(|(gap, pick)| Step::Ack { gap, pick }),
    ]
}

/// Reference integral of the age curve from an explicit list of resets,
/// evaluated segment by segment in floating point.
fn reference_age_integral(resets: &[(i64, i64)], start: i64, end: i64) -> f64 {
    // resets: (time, age) sorted by time, with the connection start first
    let mut total = 0.0;
    for (i, &(t0, a0)) in resets.iter().enumerate() {
        let t1 = resets.get(i + 1).map_or(end, |r| r.0);
        let lo = t0.max(start);
        let hi = t1.min(end);
        if hi <= lo {
            continue;
        }
        let age_lo = (a0 + (lo - t0)) as f64;
        let age_hi = (a0 + (hi - t0)) as f64;
        total += 0.5 * (age_lo + age_hi) * (hi - lo) as f64;
    }
    total
}

struct Replay {
    path: SamplePath,
    now: i64,
    sent: Vec<(u64, i64)>,
    resets: Vec<(i64, i64)>,
    backlog_changes: Vec<(i64, usize)>,
}

fn replay(steps: &[Step]) -> Replay {
    let mut r = Replay {
        path: SamplePath::new(Micros::ZERO),
        now: 0,
        sent: Vec::new(),
        resets: vec![(0, 0)],
        backlog_changes: vec![(0, 0)],
    };
    let mut next_seq = 1u64;
    for s in steps {
        match *s {
            Step::Send { gap } => {
                r.now += gap;
                r.path.record_send(Micros(r.now), next_seq).unwrap();
                r.sent.push((next_seq, r.now));
                next_seq += 1;
            }
            Step::Ack { gap, pick } => {
                if r.sent.is_empty() {
                    continue;
                }
                r.now += gap;
                let (seq, sent_at) = r.sent[pick % r.sent.len()];
                let age_before = r.path.instantaneous_age(Micros(r.now)).unwrap();
                let backlog_before = r.path.backlog();
                let last_acked = r.path.last_acked_seq();
                let d = r
                    .path
                    .record_ack(AckEvent {
                        seq,
                        echo_timestamp: Micros(sent_at),
                        recv_time: Micros(r.now),
                    })
                    .unwrap();
                match d {
                    AckDisposition::Accepted { rtt, cleared } => {
                        assert!(last_acked.map_or(true, |l| seq > l));
                        assert_eq!(rtt, Micros(r.now - sent_at));
                        assert_eq!(r.path.instantaneous_age(Micros(r.now)).unwrap(), rtt);
                        assert!(r.path.pending().all(|p| p.seq > seq));
                        assert_eq!(backlog_before - cleared, r.path.backlog());
                        r.resets.push((r.now, rtt.0));
                    }
                    AckDisposition::Discarded => {
                        assert!(last_acked.is_some_and(|l| seq <= l));
                        assert_eq!(r.path.instantaneous_age(Micros(r.now)).unwrap(), age_before);
                        assert_eq!(r.path.backlog(), backlog_before);
                    }
                }
            }
        }
        r.backlog_changes.push((r.now, r.path.backlog()));
    }
    r
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn age_is_slope_one_between_resets(steps in prop::collection::vec(step(), 1..80), probe in 0i64..5_000_000) {
        let r = replay(&steps);
        let &(t_reset, a_reset) = r.resets.last().unwrap();
        let t = r.now + probe;
        prop_assert_eq!(r.path.instantaneous_age(Micros(t)).unwrap(), Micros(a_reset + (t - t_reset)));
    }

    #[test]
    fn backlog_counts_unacknowledged_updates(steps in prop::collection::vec(step(), 1..80)) {
        let r = replay(&steps);
        let acked = r.path.last_acked_seq().unwrap_or(0);
        let expected = r.sent.iter().filter(|(seq, _)| *seq > acked).count();
        prop_assert_eq!(r.path.backlog(), expected);
    }

    #[test]
    fn epoch_averages_match_reference_integral(steps in prop::collection::vec(step(), 1..80), tail in 1i64..3_000_000) {
        let mut r = replay(&steps);
        let end = r.now + tail;
        let stats = r.path.close_epoch(Micros(end)).unwrap();
        let area = reference_age_integral(&r.resets, 0, end);
        let expected_age = area / end as f64 * 1e-6;
        prop_assert!(((stats.avg_age - expected_age) / expected_age).abs() < 1e-9);

        let mut backlog_area = 0.0;
        for w in r.backlog_changes.windows(2) {
            backlog_area += w[0].1 as f64 * (w[1].0 - w[0].0) as f64;
        }
        backlog_area += r.backlog_changes.last().unwrap().1 as f64 * tail as f64;
        let expected_backlog = backlog_area / end as f64;
        prop_assert!((stats.avg_backlog - expected_backlog).abs() <= 1e-9 * expected_backlog.max(1.0));
        prop_assert!(stats.avg_age > 0.0);
    }

    #[test]
    fn epoch_areas_are_additive(
        steps in prop::collection::vec(step(), 1..80),
        split_at in 0usize..80,
        tail in 1i64..3_000_000,
    ) {
        let whole = replay(&steps);
        let end = whole.now + tail;
        let mut single = whole.path.clone();
        let joined = single.close_epoch(Micros(end)).unwrap();

        let split_at = split_at.min(steps.len());
        let (mut split, cut) = replay_with_cut(&steps, split_at);
        let last = split.close_epoch(Micros(end)).unwrap();
        let parts: Vec<_> = cut.into_iter().chain(std::iter::once(last)).collect();
        let split_area: f64 = parts.iter().map(|e| e.avg_age * e.length().0 as f64).sum();
        let joined_area = joined.avg_age * end as f64;
        prop_assert!(((split_area - joined_area) / joined_area).abs() < 1e-9);
        let split_b: f64 = parts.iter().map(|e| e.avg_backlog * e.length().0 as f64).sum();
        let joined_b = joined.avg_backlog * end as f64;
        prop_assert!((split_b - joined_b).abs() <= 1e-9 * joined_b.max(1.0));
    }
}

/// Replays `steps`, closing an epoch at the time of step `split_at` when that
/// instant lies after the connection start.
fn replay_with_cut(steps: &[Step], split_at: usize) -> (SamplePath, Option<acp_core::EpochStats>) {
    let head = replay(&steps[..split_at]);
    let mut path = head.path;
    let cut = if head.now > 0 {
        Some(path.close_epoch(Micros(head.now)).unwrap())
    } else {
        None
    };
    let mut now = head.now;
    let mut sent = head.sent;
    let mut next_seq = sent.last().map_or(1, |s| s.0 + 1);
    for s in &steps[split_at..] {
        match *s {
            Step::Send { gap } => {
                now += gap;
                path.record_send(Micros(now), next_seq).unwrap();
                sent.push((next_seq, now));
                next_seq += 1;
            }
            Step::Ack { gap, pick } => {
                if sent.is_empty() {
                    continue;
                }
                now += gap;
                let (seq, at) = sent[pick % sent.len()];
                path.record_ack(AckEvent {
                    seq,
                    echo_timestamp: Micros(at),
                    recv_time: Micros(now),
                })
                .unwrap();
            }
        }
    }
    (path, cut)
}
