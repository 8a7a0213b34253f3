//! CSV output. Every row carries a `schema` column naming its layout and
//! version; nothing wall-clock dependent is written for simulated runs, so
//! the same config and seeds give byte-identical files.

use std::fs::File;
use std::path::Path;

use acp_netsim::{NodeReport, SimReport, TraceRecord};
use acp_wire::{EpochRecord, SentUpdate};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const SWEEP_SCHEMA: &str = "sweep.v1";
pub const NODES_SCHEMA: &str = "nodes.v1";
pub const EPOCHS_SCHEMA: &str = "epochs.v1";
pub const SUMMARY_SCHEMA: &str = "summary.v1";
pub const TRACE_SCHEMA: &str = "trace.v1";
pub const SENDS_SCHEMA: &str = "sends.v1";
pub const MONITOR_SCHEMA: &str = "monitor.v1";

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SweepRow {
    pub schema: String,
    /// point or argmin
    pub kind: String,
    pub seed: u64,
    pub lambda: f64,
    /// Highest offered load over the nodes.
    pub load: f64,
    pub age_s: Option<f64>,
    pub total_backlog: Option<f64>,
    pub mean_system_time_s: Option<f64>,
    pub updates_delivered: Option<u64>,
    pub status: String,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct NodeRow {
    pub schema: String,
    pub seed: u64,
    /// Sweep rate, empty for controlled runs.
    pub lambda: Option<f64>,
    pub controller: String,
    pub node: String,
    /// forward or reverse
    pub direction: String,
    pub avg_update_backlog: f64,
    pub avg_packet_backlog: f64,
    pub utilization: f64,
    pub mean_update_sojourn_s: f64,
    pub update_departures: u64,
}

impl NodeRow {
    pub fn new(seed: u64, lambda: Option<f64>, controller: &str, n: &NodeReport) -> Self {
        NodeRow {
            schema: NODES_SCHEMA.into(),
            seed,
            lambda,
            controller: controller.into(),
            node: n.name.clone(),
            direction: if n.reverse { "reverse" } else { "forward" }.into(),
            avg_update_backlog: n.avg_update_backlog,
            avg_packet_backlog: n.avg_packet_backlog,
            utilization: n.utilization,
            mean_update_sojourn_s: n.mean_update_sojourn,
            update_departures: n.update_departures,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EpochRow {
    pub schema: String,
    pub seed: u64,
    pub controller: String,
    pub epoch: u64,
    pub t_start_s: f64,
    pub t_end_s: f64,
    pub avg_age_s: f64,
    pub avg_backlog: f64,
    pub backlog_change: Option<f64>,
    pub age_change_s: Option<f64>,
    pub action: Option<String>,
    pub gamma: Option<u32>,
    pub branch: Option<u8>,
    pub target: Option<f64>,
    pub lambda: f64,
    pub rtt_bar_s: f64,
    pub z_bar_s: Option<f64>,
    pub stalled: bool,
}

impl EpochRow {
    pub fn new(seed: u64, controller: &str, e: &EpochRecord) -> Self {
        let d = e.decision.as_ref();
        EpochRow {
            schema: EPOCHS_SCHEMA.into(),
            seed,
            controller: controller.into(),
            epoch: e.index,
            t_start_s: e.stats.epoch_start.as_secs_f64(),
            t_end_s: e.stats.epoch_end.as_secs_f64(),
            avg_age_s: e.stats.avg_age,
            avg_backlog: e.stats.avg_backlog,
            backlog_change: d.map(|d| d.backlog_change),
            age_change_s: d.map(|d| d.age_change),
            action: d.map(|d| d.verdict.action.name().to_string()),
            gamma: d.and_then(|d| d.verdict.action.gamma()),
            branch: d.map(|d| d.verdict.branch.number()),
            target: d.map(|d| d.verdict.target),
            lambda: e.lambda,
            rtt_bar_s: e.rtt_bar,
            z_bar_s: e.z_bar,
            stalled: e.stalled,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SummaryRow {
    pub schema: String,
    /// run, median, mean or stddev
    pub kind: String,
    pub seed: Option<u64>,
    pub controller: String,
    pub topology: String,
    pub age_s: Option<f64>,
    pub source_age_s: Option<f64>,
    pub rtt_s: Option<f64>,
    pub source_backlog: Option<f64>,
    pub node_backlog: Option<f64>,
    pub achieved_lambda: Option<f64>,
    pub updates_generated: Option<u64>,
    pub updates_delivered: Option<u64>,
    pub epochs: Option<u64>,
    pub stalls: Option<u64>,
    pub status: String,
}

impl SummaryRow {
    pub fn run(seed: u64, controller: &str, topology: &str, r: &SimReport) -> Self {
        SummaryRow {
            schema: SUMMARY_SCHEMA.into(),
            kind: "run".into(),
            seed: Some(seed),
            controller: controller.into(),
            topology: topology.into(),
            age_s: Some(r.time_avg_age),
            source_age_s: Some(r.source_est_age),
            rtt_s: Some(r.mean_rtt),
            source_backlog: Some(r.source_backlog),
            node_backlog: Some(r.total_update_backlog),
            achieved_lambda: Some(r.achieved_lambda),
            updates_generated: Some(r.updates_generated),
            updates_delivered: Some(r.updates_delivered),
            epochs: Some(r.epochs.len() as u64),
            stalls: Some(r.stalls),
            status: "ok".into(),
        }
    }

    pub fn blank(seed: u64, controller: &str, topology: &str, status: &str) -> Self {
        SummaryRow {
            schema: SUMMARY_SCHEMA.into(),
            kind: "run".into(),
            seed: Some(seed),
            controller: controller.into(),
            topology: topology.into(),
            age_s: None,
            source_age_s: None,
            rtt_s: None,
            source_backlog: None,
            node_backlog: None,
            achieved_lambda: None,
            updates_generated: None,
            updates_delivered: None,
            epochs: None,
            stalls: None,
            status: status.into(),
        }
    }

    /// Median, mean and sample standard deviation over the successful runs.
    pub fn aggregates(runs: &[SummaryRow]) -> Vec<SummaryRow> {
        let ok: Vec<&SummaryRow> = runs.iter().filter(|r| r.status == "ok").collect();
        let Some(first) = ok.first() else {
            return Vec::new();
        };
        let col = |f: fn(&SummaryRow) -> Option<f64>| -> Vec<f64> {
            ok.iter().filter_map(|r| f(r)).collect()
        };
        let cols: [Vec<f64>; 6] = [
            col(|r| r.age_s),
            col(|r| r.source_age_s),
            col(|r| r.rtt_s),
            col(|r| r.source_backlog),
            col(|r| r.node_backlog),
            col(|r| r.achieved_lambda),
        ];
        let stats: [(&str, fn(&[f64]) -> Option<f64>); 3] = [
            ("median", crate::stats::median),
            ("mean", crate::stats::mean),
            ("stddev", crate::stats::stddev),
        ];
        stats
            .iter()
            .map(|(kind, f)| SummaryRow {
                schema: SUMMARY_SCHEMA.into(),
                kind: (*kind).into(),
                seed: None,
                controller: first.controller.clone(),
                topology: first.topology.clone(),
                age_s: f(&cols[0]),
                source_age_s: f(&cols[1]),
                rtt_s: f(&cols[2]),
                source_backlog: f(&cols[3]),
                node_backlog: f(&cols[4]),
                achieved_lambda: f(&cols[5]),
                updates_generated: None,
                updates_delivered: None,
                epochs: None,
                stalls: None,
                status: format!("n={}", ok.len()),
            })
            .collect()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TraceRow {
    pub schema: String,
    pub seed: u64,
    pub time_s: f64,
    pub node: Option<usize>,
    pub event: String,
    pub packet: String,
    pub seq: u32,
}

impl TraceRow {
    pub fn new(seed: u64, t: &TraceRecord) -> Self {
        TraceRow {
            schema: TRACE_SCHEMA.into(),
            seed,
            time_s: t.time.as_secs_f64(),
            node: t.node,
            event: t.kind.name().into(),
            packet: format!("{:?}", t.packet).to_ascii_lowercase(),
            seq: t.seq,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SendRow {
    pub schema: String,
    pub seq: u32,
    pub timestamp_s: f64,
    pub scheduled_s: f64,
    pub probe: bool,
}

impl SendRow {
    pub fn new(s: &SentUpdate) -> Self {
        SendRow {
            schema: SENDS_SCHEMA.into(),
            seq: s.seq,
            timestamp_s: s.timestamp.as_secs_f64(),
            scheduled_s: s.scheduled.as_secs_f64(),
            probe: s.probe,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MonitorRow {
    pub schema: String,
    pub source: String,
    pub received: u64,
    pub discarded: u64,
    pub acks_sent: u64,
    pub freshest_seq: Option<u32>,
}

pub fn write_csv<R: Serialize>(path: &Path, rows: &[R]) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Output(format!("{}: {e}", path.display()));
    let file = File::create(path).map_err(io)?;
    let mut w = csv::Writer::from_writer(file);
    for r in rows {
        w.serialize(r)
            .map_err(|e| CliError::Output(format!("{}: {e}", path.display())))?;
    }
    w.flush().map_err(io)
}

/// Reads rows of one schema, rejecting files written with another.
pub fn read_csv<R: for<'de> Deserialize<'de>>(
    path: &Path,
    schema: &str,
) -> Result<Vec<R>, CliError> {
    let bad = |m: String| CliError::Schema(format!("{}: {m}", path.display()));
    let mut r = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
    let headers = r.headers().map_err(|e| bad(e.to_string()))?.clone();
    if headers.get(0) != Some("schema") {
        return Err(bad("first column is not `schema`".into()));
    }
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        if rec.get(0) != Some(schema) {
            return Err(bad(format!(
                "row {}: schema `{}`, expected `{schema}`",
                i + 2,
                rec.get(0).unwrap_or("")
            )));
        }
        out.push(
            rec.deserialize(Some(&headers))
                .map_err(|e| bad(e.to_string()))?,
        );
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(seed: u64, age: f64) -> SummaryRow {
        let mut r = SummaryRow::blank(seed, "acp", "mm1", "ok");
        r.age_s = Some(age);
        r
    }

    #[test]
    fn summary_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        let rows = vec![row(1, 2.0), SummaryRow::blank(2, "acp", "mm1", "unstable")];
        write_csv(&p, &rows).unwrap();
        let back: Vec<SummaryRow> = read_csv(&p, SUMMARY_SCHEMA).unwrap();
        assert_eq!(back, rows);
        assert!(read_csv::<SummaryRow>(&p, SWEEP_SCHEMA).is_err());
    }

    #[test]
    fn aggregates_skip_failures() {
        let rows = vec![
            row(1, 1.0),
            row(2, 3.0),
            row(3, 2.0),
            SummaryRow::blank(4, "acp", "mm1", "unstable"),
        ];
        let agg = SummaryRow::aggregates(&rows);
        assert_eq!(agg[0].kind, "median");
        assert_eq!(agg[0].age_s, Some(2.0));
        assert_eq!(agg[1].age_s, Some(2.0));
        assert_eq!(agg[2].age_s, Some(1.0));
        assert_eq!(agg[0].status, "n=3");
        assert_eq!(agg[0].rtt_s, None);
    }
}
