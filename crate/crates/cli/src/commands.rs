//! Subcommand implementations.

use std::collections::HashMap;
use std::net::{SocketAddr, ToSocketAddrs};
use std::path::Path;

use acp_core::Micros;
use acp_netsim::{run, SimConfig, SimError, SimReport, Topology, Workload};
use acp_wire::{
    run_monitor, run_source, Clock, DriverError, MonitorEndpoint, MonitorRunOptions,
    SourceEndpoint, SourceRunOptions, SystemClock, UdpTransport,
};
use rayon::prelude::*;

use crate::config::ExperimentConfig;
use crate::report::{
    write_csv, EpochRow, MonitorRow, NodeRow, SendRow, SummaryRow, SweepRow, TraceRow,
    MONITOR_SCHEMA, SWEEP_SCHEMA,
};
use crate::{analyze, CliError, Command, Common, SimOverrides};

pub fn execute(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::SimSweep { common, sim } => {
            let cfg = load(&common, &sim)?;
            sim_sweep(&cfg, &prepare_output(&common.output)?)
        }
        Command::SimRun { common, sim, trace } => {
            let cfg = load(&common, &sim)?;
            sim_run(&cfg, trace, &prepare_output(&common.output)?)
        }
        Command::Source {
            common,
            monitor,
            bind,
            updates,
        } => {
            let mut cfg = load(
                &common,
                &SimOverrides {
                    seeds: None,
                    duration_s: None,
                },
            )?;
            if let Some(m) = monitor {
                cfg.network.monitor = m;
            }
            if let Some(b) = bind {
                cfg.network.bind = b;
            }
            if let Some(u) = updates {
                cfg.network.updates = u;
            }
            source(&cfg, &prepare_output(&common.output)?)
        }
        Command::Monitor {
            common,
            bind,
            max_duration_s,
        } => {
            let mut cfg = load(
                &common,
                &SimOverrides {
                    seeds: None,
                    duration_s: None,
                },
            )?;
            if let Some(b) = bind {
                cfg.network.listen = b;
            }
            monitor(&cfg, max_duration_s, &prepare_output(&common.output)?)
        }
        Command::Analyze { inputs, cdf } => analyze::run(&inputs, cdf.as_deref()),
    }
}

fn load(common: &Common, sim: &SimOverrides) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &common.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = &sim.seeds {
        cfg.sim.seeds = s.clone();
    }
    if let Some(d) = sim.duration_s {
        cfg.sim.duration_s = d;
    }
    Ok(cfg)
}

fn prepare_output(dir: &Path) -> Result<std::path::PathBuf, CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Output(format!("{}: {e}", dir.display())))?;
    Ok(dir.to_path_buf())
}

fn seeds(cfg: &ExperimentConfig) -> Result<Vec<u64>, CliError> {
    if cfg.sim.seeds.is_empty() {
        return Err(CliError::Config("sim.seeds is empty".into()));
    }
    Ok(cfg.sim.seeds.clone())
}

fn status_of(e: &SimError) -> Result<&'static str, CliError> {
    match e {
        SimError::InvalidConfig(m) => Err(CliError::Config(m.clone())),
        SimError::Unstable(_) => Ok("unstable"),
        SimError::ConnectionFailed => Ok("connection-failed"),
        SimError::Source(_) | SimError::Age(_) => Err(CliError::Runtime(e.to_string())),
    }
}

fn max_load(topo: &Topology, lambda: f64) -> f64 {
    topo.offered_load(lambda)
        .into_iter()
        .map(|(_, l)| l)
        .fold(0.0, f64::max)
}

pub fn sim_sweep(cfg: &ExperimentConfig, out: &Path) -> Result<(), CliError> {
    let topo = cfg.topology()?;
    let arrivals = cfg.arrivals()?;
    let lambdas = cfg.sweep_lambdas(&topo)?;
    let seeds = seeds(cfg)?;
    let mut sims = Vec::new();
    for &seed in &seeds {
        sims.push(cfg.sim_config(seed)?);
    }
    let jobs: Vec<(SimConfig, f64)> = sims
        .iter()
        .flat_map(|s| lambdas.iter().map(move |&l| (*s, l)))
        .collect();
    let results: Vec<Result<SimReport, SimError>> = jobs
        .par_iter()
        .map(|(s, lambda)| {
            run(
                &topo,
                &Workload::OpenLoop {
                    lambda: *lambda,
                    arrivals,
                },
                s,
            )
        })
        .collect();

    let mut rows = Vec::new();
    let mut nodes = Vec::new();
    for (chunk, sim) in results.chunks(lambdas.len()).zip(&sims) {
        let mut best: Option<SweepRow> = None;
        for (res, &lambda) in chunk.iter().zip(&lambdas) {
            let row = match res {
                Ok(r) => {
                    nodes.extend(
                        r.nodes
                            .iter()
                            .map(|n| NodeRow::new(sim.seed, Some(lambda), "open-loop", n)),
                    );
                    SweepRow {
                        schema: SWEEP_SCHEMA.into(),
                        kind: "point".into(),
                        seed: sim.seed,
                        lambda,
                        load: max_load(&topo, lambda),
                        age_s: Some(r.time_avg_age),
                        total_backlog: Some(r.total_update_backlog),
                        mean_system_time_s: Some(r.mean_system_time),
                        updates_delivered: Some(r.updates_delivered),
                        status: "ok".into(),
                    }
                }
                Err(e) => SweepRow {
                    schema: SWEEP_SCHEMA.into(),
                    kind: "point".into(),
                    seed: sim.seed,
                    lambda,
                    load: max_load(&topo, lambda),
                    age_s: None,
                    total_backlog: None,
                    mean_system_time_s: None,
                    updates_delivered: None,
                    status: status_of(e)?.into(),
                },
            };
            if let Some(a) = row.age_s.filter(|a| a.is_finite()) {
                if best.as_ref().and_then(|b| b.age_s).is_none_or(|b| a < b) {
                    best = Some(row.clone());
                }
            }
            rows.push(row);
        }
        if let Some(mut b) = best {
            b.kind = "argmin".into();
            eprintln!(
                "seed {}: minimum age {:.6} s at lambda {:.6}/s (load {:.3})",
                b.seed,
                b.age_s.unwrap_or(f64::NAN),
                b.lambda,
                b.load
            );
            rows.push(b);
        }
    }
    write_csv(&out.join("sweep.csv"), &rows)?;
    write_csv(&out.join("nodes.csv"), &nodes)
}

pub fn sim_run(cfg: &ExperimentConfig, trace: bool, out: &Path) -> Result<(), CliError> {
    let topo = cfg.topology()?;
    let source = cfg.source_config(false)?;
    let controller = source.controller.name();
    let workload = Workload::Controlled(source);
    let seeds = seeds(cfg)?;
    let mut sims = Vec::new();
    for &seed in &seeds {
        sims.push(SimConfig {
            trace,
            ..cfg.sim_config(seed)?
        });
    }
    let results: Vec<Result<SimReport, SimError>> =
        sims.par_iter().map(|s| run(&topo, &workload, s)).collect();

    let (mut runs, mut epochs, mut nodes, mut traces) =
        (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (res, sim) in results.iter().zip(&sims) {
        match res {
            Ok(r) => {
                runs.push(SummaryRow::run(sim.seed, controller, &topo.name, r));
                epochs.extend(
                    r.epochs
                        .iter()
                        .map(|e| EpochRow::new(sim.seed, controller, e)),
                );
                nodes.extend(
                    r.nodes
                        .iter()
                        .map(|n| NodeRow::new(sim.seed, None, controller, n)),
                );
                traces.extend(r.trace.iter().map(|t| TraceRow::new(sim.seed, t)));
            }
            Err(e) => {
                let status = status_of(e)?;
                eprintln!("seed {}: {e}", sim.seed);
                runs.push(SummaryRow::blank(sim.seed, controller, &topo.name, status));
            }
        }
    }
    let ok = runs.iter().filter(|r| r.status == "ok").count();
    let mut summary = runs.clone();
    summary.extend(SummaryRow::aggregates(&runs));
    write_csv(&out.join("summary.csv"), &summary)?;
    write_csv(&out.join("epochs.csv"), &epochs)?;
    write_csv(&out.join("nodes.csv"), &nodes)?;
    if trace {
        write_csv(&out.join("trace.csv"), &traces)?;
    }
    if ok == 0 {
        return Err(CliError::Runtime("every seed failed".into()));
    }
    Ok(())
}

fn resolve(addr: &str) -> Result<SocketAddr, CliError> {
    addr.to_socket_addrs()
        .map_err(|e| CliError::Network(format!("{addr}: {e}")))?
        .next()
        .ok_or_else(|| CliError::Network(format!("{addr}: no address")))
}

fn driver_err(e: DriverError) -> CliError {
    match e {
        DriverError::ConnectionFailed => CliError::ConnectionFailed,
        DriverError::Io(e) => CliError::Network(e.to_string()),
        other => CliError::Runtime(other.to_string()),
    }
}

pub fn source(cfg: &ExperimentConfig, out: &Path) -> Result<(), CliError> {
    let sc = cfg.source_config(true)?;
    let controller = sc.controller.name();
    let dest = resolve(&cfg.network.monitor)?;
    let mut transport = UdpTransport::bind(&cfg.network.bind)
        .map_err(|e| CliError::Network(format!("{}: {e}", cfg.network.bind)))?;
    let clock = SystemClock::new();
    let mut ep =
        SourceEndpoint::new(sc, clock.now()).map_err(|e| CliError::Config(e.to_string()))?;
    let opts = SourceRunOptions {
        max_updates: Some(cfg.network.updates),
        max_duration: None,
        payload_len: cfg.network.payload_bytes,
        linger: Micros::from_secs_f64(cfg.network.linger_ms.max(0.0) * 1e-3),
    };
    let log = run_source(&mut ep, &mut transport, &clock, &dest, &opts).map_err(driver_err)?;
    let s = log.summary();
    eprintln!(
        "{} updates, {} ACKs accepted, age {:.6} s, backlog {:.3}, RTT {:.6} s, {} stalls",
        s.updates_sent,
        s.acks_accepted,
        s.avg_age,
        s.avg_backlog,
        s.mean_rtt,
        log.stalls.len()
    );
    let sends: Vec<SendRow> = log.sends.iter().map(SendRow::new).collect();
    let epochs: Vec<EpochRow> = log
        .epochs
        .iter()
        .map(|e| EpochRow::new(0, controller, e))
        .collect();
    let mut row = SummaryRow::blank(0, controller, &dest.to_string(), "ok");
    row.source_age_s = Some(s.avg_age);
    row.source_backlog = Some(s.avg_backlog);
    row.rtt_s = Some(s.mean_rtt);
    row.achieved_lambda = Some(s.achieved_lambda);
    row.updates_generated = Some(s.updates_sent);
    row.updates_delivered = Some(s.acks_accepted);
    row.epochs = Some(log.epochs.len() as u64);
    row.stalls = Some(log.stalls.len() as u64);
    write_csv(&out.join("sends.csv"), &sends)?;
    write_csv(&out.join("epochs.csv"), &epochs)?;
    write_csv(&out.join("summary.csv"), &[row])
}

pub fn monitor(
    cfg: &ExperimentConfig,
    max_duration_s: Option<f64>,
    out: &Path,
) -> Result<(), CliError> {
    let mut transport = UdpTransport::bind(&cfg.network.listen)
        .map_err(|e| CliError::Network(format!("{}: {e}", cfg.network.listen)))?;
    if let Ok(a) = transport.local_addr() {
        eprintln!("monitor listening on {a}");
    }
    let clock = SystemClock::new();
    let mut mon = MonitorEndpoint::<SocketAddr>::new();
    let opts = MonitorRunOptions {
        idle_timeout: Some(Micros::from_secs_f64(cfg.network.idle_timeout_s)),
        max_duration: max_duration_s.map(Micros::from_secs_f64),
        stop: None,
    };
    let log = run_monitor(&mut mon, &mut transport, &clock, &opts).map_err(driver_err)?;
    let mut acks: HashMap<SocketAddr, u64> = HashMap::new();
    for a in &log.acks {
        *acks.entry(a.to).or_default() += 1;
    }
    let mut rows: Vec<MonitorRow> = mon
        .sources()
        .map(|(addr, f)| MonitorRow {
            schema: MONITOR_SCHEMA.into(),
            source: addr.to_string(),
            received: f.received(),
            discarded: f.discarded(),
            acks_sent: acks.get(addr).copied().unwrap_or(0),
            freshest_seq: f.freshest_seq(),
        })
        .collect();
    rows.sort_by(|a, b| a.source.cmp(&b.source));
    eprintln!(
        "{} sources, {} ACKs, {} malformed datagrams",
        rows.len(),
        log.acks.len(),
        log.malformed
    );
    write_csv(&out.join("monitor.csv"), &rows)
}
