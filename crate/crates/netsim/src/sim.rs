//! Simulation run: FCFS nodes, update generation, monitor and ACK return.

use std::collections::VecDeque;

use acp_core::{AckDisposition, AgeCurve, Micros, SamplePath};
use acp_wire::codec::{AckHeader, UpdateHeader};
use acp_wire::monitor::{FreshnessFilter, MonitorVerdict};
use acp_wire::source::{EpochRecord, SourceConfig, SourceEffect, SourceEndpoint};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;

use crate::engine::Scheduler;
use crate::topology::{NodeSpec, Service, Topology};
use crate::SimError;

pub const DEFAULT_WARMUP_FRACTION: f64 = 0.1;
pub const DEFAULT_BACKLOG_BOUND: usize = 100_000;

const STREAM_ARRIVALS: u64 = 1;
const STREAM_SERVICE: u64 = 1_000;
const STREAM_LOSS: u64 = 2_000;
const STREAM_CROSS: u64 = 3_000;

/// Independent random stream for one stochastic element of a run.
pub fn element_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arrivals {
    Poisson,
    /// Fixed period starting at time zero.
    Periodic,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Workload {
    OpenLoop { lambda: f64, arrivals: Arrivals },
    Controlled(SourceConfig),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub duration: Micros,
    /// Fraction of the run excluded from statistics.
    pub warmup_fraction: f64,
    pub seed: u64,
    /// A node holding more packets than this aborts the run.
    pub backlog_bound: usize,
    pub trace: bool,
    /// Keep the endpoint input sequence for replay.
    pub record_inputs: bool,
}

impl SimConfig {
    pub fn new(duration: Micros, seed: u64) -> Self {
        SimConfig {
            duration,
            warmup_fraction: DEFAULT_WARMUP_FRACTION,
            seed,
            backlog_bound: DEFAULT_BACKLOG_BOUND,
            trace: false,
            record_inputs: false,
        }
    }

    pub fn warmup(&self) -> Micros {
        Micros((self.duration.0 as f64 * self.warmup_fraction).round() as i64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PacketKind {
    Update,
    Ack,
    Cross,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceKind {
    Generate,
    Arrive,
    Depart,
    Drop,
    Deliver,
    AckReceived,
}

impl TraceKind {
    pub fn name(&self) -> &'static str {
        match self {
            TraceKind::Generate => "generate",
            TraceKind::Arrive => "arrive",
            TraceKind::Depart => "depart",
            TraceKind::Drop => "drop",
            TraceKind::Deliver => "deliver",
            TraceKind::AckReceived => "ack",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceRecord {
    pub time: Micros,
    pub node: Option<usize>,
    pub kind: TraceKind,
    pub packet: PacketKind,
    pub seq: u32,
}

/// Input delivered to the source endpoint, in order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EndpointInput {
    Poll(Micros),
    Ack(AckHeader, Micros),
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeReport {
    pub name: String,
    pub reverse: bool,
    /// Time-average number of update packets at the node, in service included.
    pub avg_update_backlog: f64,
    pub avg_packet_backlog: f64,
    pub utilization: f64,
    pub update_departures: u64,
    /// Mean time an update spends at the node, seconds.
    pub mean_update_sojourn: f64,
    /// Update departures per second.
    pub update_throughput: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimReport {
    /// True age at the monitor, seconds.
    pub time_avg_age: f64,
    /// Age as estimated at the source from ACKs, seconds.
    pub source_est_age: f64,
    pub nodes: Vec<NodeReport>,
    /// Sum of update backlogs over the forward nodes.
    pub total_update_backlog: f64,
    /// Time-average number of unacknowledged updates at the source.
    pub source_backlog: f64,
    pub mean_rtt: f64,
    /// Generation to delivery, over all delivered updates.
    pub mean_system_time: f64,
    pub updates_generated: u64,
    pub updates_delivered: u64,
    pub updates_dropped: u64,
    pub updates_in_flight: u64,
    pub acks_dropped: u64,
    /// Updates generated per second after warmup.
    pub achieved_lambda: f64,
    /// Length of the measured window, seconds.
    pub measured: f64,
    pub init_lambda: Option<f64>,
    pub epochs: Vec<EpochRecord>,
    pub stalls: u64,
    pub trace: Vec<TraceRecord>,
    pub inputs: Vec<EndpointInput>,
}

#[derive(Debug, Clone, Copy)]
enum Body {
    Update { seq: u32, gen: Micros },
    Ack(AckHeader),
    Cross { flow: usize, id: u32 },
}

#[derive(Debug, Clone, Copy)]
struct Packet {
    body: Body,
    hop: usize,
    entered: Micros,
}

impl Packet {
    fn kind(&self) -> PacketKind {
        match self.body {
            Body::Update { .. } => PacketKind::Update,
            Body::Ack(_) => PacketKind::Ack,
            Body::Cross { .. } => PacketKind::Cross,
        }
    }

    fn seq(&self) -> u32 {
        match self.body {
            Body::Update { seq, .. } => seq,
            Body::Ack(a) => a.seq,
            Body::Cross { id, .. } => id,
        }
    }
}

#[derive(Debug)]
enum Event {
    Generate,
    Wake(u64),
    Arrive { node: usize, pkt: Packet },
    Depart { node: usize },
    AtMonitor(Packet),
    AtSource(AckHeader),
    CrossGenerate(usize),
    Warmup,
}

#[derive(Debug, Default, Clone)]
struct NodeStats {
    last_change: Micros,
    updates_now: u64,
    update_area: i128,
    packet_area: i128,
    busy: i128,
    update_departures: u64,
    update_sojourn: i128,
}

struct Node {
    spec: NodeSpec,
    reverse: bool,
    queue: VecDeque<Packet>,
    service_rng: ChaCha8Rng,
    loss_rng: ChaCha8Rng,
    stats: NodeStats,
}

impl Node {
    fn advance(&mut self, t: Micros) {
        let dt = (t - self.stats.last_change).0 as i128;
        self.stats.update_area += self.stats.updates_now as i128 * dt;
        self.stats.packet_area += self.queue.len() as i128 * dt;
        if !self.queue.is_empty() {
            self.stats.busy += dt;
        }
        self.stats.last_change = t;
    }

    fn service_time(&mut self, bits: u32) -> Micros {
        let secs = match self.spec.service {
            Service::Exponential { rate } => self.service_rng.sample::<f64, _>(Exp1) / rate,
            s => s.mean_time(bits),
        };
        Micros::from_secs_f64(secs).max(Micros(1))
    }

    fn lost(&mut self) -> bool {
        self.spec.loss > 0.0 && self.loss_rng.random::<f64>() < self.spec.loss
    }
}

enum Source {
    Open {
        lambda: f64,
        arrivals: Arrivals,
        rng: ChaCha8Rng,
    },
    Controlled {
        ep: Box<SourceEndpoint>,
        wake_token: u64,
        wake_at: Option<Micros>,
    },
}

struct Sim<'a> {
    topo: &'a Topology,
    cfg: SimConfig,
    sched: Scheduler<Event>,
    nodes: Vec<Node>,
    n_forward: usize,
    source: Source,
    next_seq: u32,
    shadow: SamplePath,
    monitor: FreshnessFilter,
    true_age: AgeCurve,
    cross_rngs: Vec<ChaCha8Rng>,
    cross_ids: Vec<u32>,
    measuring: bool,
    generated: u64,
    delivered: u64,
    dropped: u64,
    in_flight: u64,
    acks_dropped: u64,
    generated_post: u64,
    delivered_post: u64,
    system_time_post: i128,
    rtt_post: (i128, u64),
    init_lambda: Option<f64>,
    epochs: Vec<EpochRecord>,
    stalls: u64,
    trace: Vec<TraceRecord>,
    inputs: Vec<EndpointInput>,
}

/// Runs one simulation.
pub fn run(topo: &Topology, workload: &Workload, cfg: &SimConfig) -> Result<SimReport, SimError> {
    topo.validate()?;
    if cfg.duration <= Micros::ZERO || !(0.0..1.0).contains(&cfg.warmup_fraction) {
        return Err(SimError::InvalidConfig(
            "duration must be positive and warmup fraction in [0, 1)".into(),
        ));
    }
    if let Workload::OpenLoop { lambda, arrivals } = workload {
        if !(*lambda > 0.0 && lambda.is_finite()) {
            return Err(SimError::InvalidConfig(format!(
                "update rate {lambda} is not positive"
            )));
        }
        // a fully deterministic network can run exactly at capacity
        let deterministic = *arrivals == Arrivals::Periodic
            && topo.cross.is_empty()
            && topo
                .forward
                .iter()
                .chain(topo.reverse_nodes().iter())
                .all(|n| !matches!(n.service, Service::Exponential { .. }));
        let limit = if deterministic { 1.0 + 1e-9 } else { 1.0 };
        if let Some((name, load)) = topo
            .offered_load(*lambda)
            .into_iter()
            .find(|(_, load)| *load >= limit)
        {
            return Err(SimError::Unstable(format!(
                "offered load {load:.3} at node {name} is at or above capacity"
            )));
        }
    }
    let mut sim = Sim::new(topo, workload, cfg)?;
    sim.start()?;
    let end = cfg.duration;
    while sim.sched.peek_time().is_some_and(|t| t <= end) {
        let (t, ev) = sim.sched.pop().expect("peeked");
        sim.handle(t, ev)?;
    }
    sim.finish(end)
}

impl<'a> Sim<'a> {
    fn new(topo: &'a Topology, workload: &Workload, cfg: &SimConfig) -> Result<Self, SimError> {
        let seed = cfg.seed;
        let mut nodes = Vec::new();
        let specs = topo
            .forward
            .iter()
            .cloned()
            .map(|s| (s, false))
            .chain(topo.reverse_nodes().into_iter().map(|s| (s, true)));
        for (i, (spec, reverse)) in specs.enumerate() {
            nodes.push(Node {
                spec,
                reverse,
                queue: VecDeque::new(),
                service_rng: element_rng(seed, STREAM_SERVICE + i as u64),
                loss_rng: element_rng(seed, STREAM_LOSS + i as u64),
                stats: NodeStats::default(),
            });
        }
        let source = match workload {
            Workload::OpenLoop { lambda, arrivals } => Source::Open {
                lambda: *lambda,
                arrivals: *arrivals,
                rng: element_rng(seed, STREAM_ARRIVALS),
            },
            Workload::Controlled(sc) => Source::Controlled {
                ep: Box::new(SourceEndpoint::new(*sc, Micros::ZERO)?),
                wake_token: 0,
                wake_at: None,
            },
        };
        Ok(Sim {
            topo,
            cfg: *cfg,
            sched: Scheduler::new(),
            n_forward: topo.forward.len(),
            nodes,
            source,
            next_seq: 1,
            shadow: SamplePath::new(Micros::ZERO),
            monitor: FreshnessFilter::default(),
            true_age: AgeCurve::new(Micros::ZERO, Micros::ZERO),
            cross_rngs: (0..topo.cross.len())
                .map(|f| element_rng(seed, STREAM_CROSS + f as u64))
                .collect(),
            cross_ids: vec![0; topo.cross.len()],
            measuring: cfg.warmup_fraction == 0.0,
            generated: 0,
            delivered: 0,
            dropped: 0,
            in_flight: 0,
            acks_dropped: 0,
            generated_post: 0,
            delivered_post: 0,
            system_time_post: 0,
            rtt_post: (0, 0),
            init_lambda: None,
            epochs: Vec::new(),
            stalls: 0,
            trace: Vec::new(),
            inputs: Vec::new(),
        })
    }

    fn trace(
        &mut self,
        time: Micros,
        node: Option<usize>,
        kind: TraceKind,
        pkt: PacketKind,
        seq: u32,
    ) {
        if self.cfg.trace {
            self.trace.push(TraceRecord {
                time,
                node,
                kind,
                packet: pkt,
                seq,
            });
        }
    }

    fn start(&mut self) -> Result<(), SimError> {
        if self.cfg.warmup_fraction > 0.0 {
            self.sched.schedule(self.cfg.warmup(), Event::Warmup);
        }
        for f in 0..self.topo.cross.len() {
            let gap = self.cross_gap(f);
            self.sched.schedule(gap, Event::CrossGenerate(f));
        }
        match self.source {
            Source::Open { .. } => self.sched.schedule(Micros::ZERO, Event::Generate),
            Source::Controlled { .. } => self.poll_source(Micros::ZERO)?,
        }
        Ok(())
    }

    fn cross_gap(&mut self, f: usize) -> Micros {
        let rate = self.topo.cross[f].packet_rate();
        let x: f64 = self.cross_rngs[f].sample(Exp1);
        Micros::from_secs_f64(x / rate).max(Micros(1))
    }

    fn route_len(&self, pkt: &Packet) -> usize {
        match pkt.body {
            Body::Update { .. } => self.n_forward,
            Body::Ack(_) => self.nodes.len() - self.n_forward,
            Body::Cross { flow, .. } => {
                let f = &self.topo.cross[flow];
                f.exit - f.entry + 1
            }
        }
    }

    fn node_index(&self, pkt: &Packet) -> usize {
        match pkt.body {
            Body::Update { .. } => pkt.hop,
            Body::Ack(_) => self.n_forward + pkt.hop,
            Body::Cross { flow, .. } => self.topo.cross[flow].entry + pkt.hop,
        }
    }

    fn bits(&self, pkt: &Packet) -> u32 {
        match pkt.body {
            Body::Update { .. } => self.topo.update_bits,
            Body::Ack(_) => self.topo.ack_bits,
            Body::Cross { flow, .. } => self.topo.cross[flow].packet_bits,
        }
    }

    fn handle(&mut self, t: Micros, ev: Event) -> Result<(), SimError> {
        match ev {
            Event::Generate => self.on_generate(t)?,
            Event::Wake(token) => {
                if let Source::Controlled { wake_token, .. } = &self.source {
                    if *wake_token == token {
                        self.poll_source(t)?;
                    }
                }
            }
            Event::Arrive { node, pkt } => self.on_arrive(t, node, pkt)?,
            Event::Depart { node } => self.on_depart(t, node),
            Event::AtMonitor(pkt) => self.on_monitor(t, pkt),
            Event::AtSource(ack) => self.on_ack(t, ack)?,
            Event::CrossGenerate(f) => {
                let id = self.cross_ids[f];
                self.cross_ids[f] += 1;
                let pkt = Packet {
                    body: Body::Cross { flow: f, id },
                    hop: 0,
                    entered: t,
                };
                let node = self.node_index(&pkt);
                self.on_arrive(t, node, pkt)?;
                let gap = self.cross_gap(f);
                self.sched.schedule(t + gap, Event::CrossGenerate(f));
            }
            Event::Warmup => self.on_warmup(t)?,
        }
        Ok(())
    }

    fn send_update(&mut self, t: Micros, gen: Micros) -> Result<(), SimError> {
        let seq = self.next_seq;
        self.next_seq += 1;
        self.shadow.record_send(t, seq as u64)?;
        self.generated += 1;
        self.in_flight += 1;
        if self.measuring {
            self.generated_post += 1;
        }
        self.trace(t, None, TraceKind::Generate, PacketKind::Update, seq);
        let pkt = Packet {
            body: Body::Update { seq, gen },
            hop: 0,
            entered: t,
        };
        self.on_arrive(t, 0, pkt)
    }

    fn on_generate(&mut self, t: Micros) -> Result<(), SimError> {
        self.send_update(t, t)?;
        let Source::Open {
            lambda,
            arrivals,
            rng,
        } = &mut self.source
        else {
            unreachable!("generate events only exist for open-loop sources");
        };
        let gap = match arrivals {
            Arrivals::Poisson => rng.sample::<f64, _>(Exp1) / *lambda,
            Arrivals::Periodic => 1.0 / *lambda,
        };
        let gap = Micros::from_secs_f64(gap).max(Micros(1));
        self.sched.schedule(t + gap, Event::Generate);
        Ok(())
    }

    fn poll_source(&mut self, t: Micros) -> Result<(), SimError> {
        let Source::Controlled { ep, .. } = &mut self.source else {
            return Ok(());
        };
        if self.cfg.record_inputs {
            self.inputs.push(EndpointInput::Poll(t));
        }
        let effects = ep.poll(t)?;
        let wake = ep.next_wakeup();
        for fx in effects {
            match fx {
                SourceEffect::Send(s) => self.send_update(t, s.timestamp)?,
                SourceEffect::EpochClosed(r) => self.epochs.push(r),
                SourceEffect::InitComplete { lambda, .. } => self.init_lambda = Some(lambda),
                SourceEffect::InitFailed => return Err(SimError::ConnectionFailed),
                SourceEffect::Stalled { .. } => self.stalls += 1,
            }
        }
        let Source::Controlled {
            wake_token,
            wake_at,
            ..
        } = &mut self.source
        else {
            unreachable!();
        };
        match wake {
            Some(w) if *wake_at != Some(w) => {
                let at = if w <= t { t + Micros(1) } else { w };
                *wake_token += 1;
                *wake_at = Some(w);
                self.sched.schedule(at, Event::Wake(*wake_token));
            }
            Some(_) => {}
            None => {
                *wake_token += 1;
                *wake_at = None;
            }
        }
        Ok(())
    }

    fn on_arrive(&mut self, t: Micros, node: usize, pkt: Packet) -> Result<(), SimError> {
        let mut pkt = pkt;
        pkt.entered = t;
        let kind = pkt.kind();
        let seq = pkt.seq();
        self.trace(t, Some(node), TraceKind::Arrive, kind, seq);
        let bits = self.bits(&pkt);
        let n = &mut self.nodes[node];
        n.advance(t);
        n.queue.push_back(pkt);
        if kind == PacketKind::Update {
            n.stats.updates_now += 1;
        }
        if n.queue.len() == 1 {
            let s = n.service_time(bits);
            self.sched.schedule(t + s, Event::Depart { node });
        }
        if n.queue.len() > self.cfg.backlog_bound {
            return Err(SimError::Unstable(format!(
                "node {} holds {} packets at t = {:.3} s",
                n.spec.name,
                n.queue.len(),
                t.as_secs_f64()
            )));
        }
        Ok(())
    }

    fn on_depart(&mut self, t: Micros, node: usize) {
        let n = &mut self.nodes[node];
        n.advance(t);
        let mut pkt = n.queue.pop_front().expect("departure from an empty node");
        let kind = pkt.kind();
        if kind == PacketKind::Update {
            n.stats.updates_now -= 1;
            n.stats.update_departures += 1;
            n.stats.update_sojourn += (t - pkt.entered).0 as i128;
        }
        let lost = n.lost();
        let prop = n.spec.propagation;
        let next_bits = n.queue.front().map(|p| p.body);
        if let Some(body) = next_bits {
            let bits = self.bits(&Packet {
                body,
                hop: 0,
                entered: t,
            });
            let s = self.nodes[node].service_time(bits);
            self.sched.schedule(t + s, Event::Depart { node });
        }
        let seq = pkt.seq();
        self.trace(t, Some(node), TraceKind::Depart, kind, seq);
        if lost {
            self.trace(t, Some(node), TraceKind::Drop, kind, seq);
            match kind {
                PacketKind::Update => {
                    self.dropped += 1;
                    self.in_flight -= 1;
                }
                PacketKind::Ack => self.acks_dropped += 1,
                PacketKind::Cross => {}
            }
            return;
        }
        pkt.hop += 1;
        let at = t + prop;
        if pkt.hop < self.route_len(&pkt) {
            let node = self.node_index(&pkt);
            self.sched.schedule(at, Event::Arrive { node, pkt });
        } else {
            match pkt.body {
                Body::Update { .. } => self.sched.schedule(at, Event::AtMonitor(pkt)),
                Body::Ack(a) => self.sched.schedule(at, Event::AtSource(a)),
                Body::Cross { .. } => {}
            }
        }
    }

    fn on_monitor(&mut self, t: Micros, pkt: Packet) {
        let Body::Update { seq, gen } = pkt.body else {
            return;
        };
        self.delivered += 1;
        self.in_flight -= 1;
        if self.measuring {
            self.delivered_post += 1;
            self.system_time_post += (t - gen).0 as i128;
        }
        self.trace(t, None, TraceKind::Deliver, PacketKind::Update, seq);
        let header = UpdateHeader {
            seq,
            gen_timestamp_us: gen.0 as u64,
            payload_len: 0,
        };
        if let MonitorVerdict::Ack(ack) = self.monitor.on_update(&header) {
            self.true_age
                .reset(t, t - gen)
                .expect("monitor events arrive in time order");
            if self.n_forward < self.nodes.len() {
                let pkt = Packet {
                    body: Body::Ack(ack),
                    hop: 0,
                    entered: t,
                };
                let node = self.n_forward;
                self.sched.schedule(t, Event::Arrive { node, pkt });
            } else {
                self.sched.schedule(t, Event::AtSource(ack));
            }
        }
    }

    fn on_ack(&mut self, t: Micros, ack: AckHeader) -> Result<(), SimError> {
        self.trace(t, None, TraceKind::AckReceived, PacketKind::Ack, ack.seq);
        let disposition = self.shadow.record_ack(acp_core::AckEvent {
            seq: ack.seq as u64,
            echo_timestamp: Micros(ack.echo_timestamp_us as i64),
            recv_time: t,
        })?;
        if let (true, AckDisposition::Accepted { rtt, .. }) = (self.measuring, disposition) {
            self.rtt_post.0 += rtt.0 as i128;
            self.rtt_post.1 += 1;
        }
        if let Source::Controlled { ep, .. } = &mut self.source {
            if self.cfg.record_inputs {
                self.inputs.push(EndpointInput::Ack(ack, t));
            }
            ep.on_ack(&ack, t)?;
            self.poll_source(t)?;
        }
        Ok(())
    }

    fn on_warmup(&mut self, t: Micros) -> Result<(), SimError> {
        for n in &mut self.nodes {
            n.advance(t);
            n.stats = NodeStats {
                last_change: t,
                updates_now: n.stats.updates_now,
                ..NodeStats::default()
            };
        }
        self.true_age.advance(t)?;
        self.true_age.take_twice_area();
        if t > self.shadow.epoch_start() {
            self.shadow.close_epoch(t)?;
        }
        self.measuring = true;
        Ok(())
    }

    fn finish(mut self, end: Micros) -> Result<SimReport, SimError> {
        let start = if self.cfg.warmup_fraction > 0.0 {
            self.cfg.warmup()
        } else {
            Micros::ZERO
        };
        let span = (end - start).0 as f64;
        let secs = span * 1e-6;
        for n in &mut self.nodes {
            n.advance(end);
        }
        self.true_age.advance(end)?;
        let age = self.true_age.take_twice_area() as f64 / (2.0 * span) * 1e-6;
        let shadow = self.shadow.close_epoch(end)?;
        let nodes: Vec<NodeReport> = self
            .nodes
            .iter()
            .map(|n| {
                let s = &n.stats;
                NodeReport {
                    name: n.spec.name.clone(),
                    reverse: n.reverse,
                    avg_update_backlog: s.update_area as f64 / span,
                    avg_packet_backlog: s.packet_area as f64 / span,
                    utilization: s.busy as f64 / span,
                    update_departures: s.update_departures,
                    mean_update_sojourn: if s.update_departures > 0 {
                        s.update_sojourn as f64 / s.update_departures as f64 * 1e-6
                    } else {
                        f64::NAN
                    },
                    update_throughput: s.update_departures as f64 / secs,
                }
            })
            .collect();
        let total = nodes
            .iter()
            .filter(|n| !n.reverse)
            .map(|n| n.avg_update_backlog)
            .sum();
        let mean = |sum: i128, n: u64| {
            if n > 0 {
                sum as f64 / n as f64 * 1e-6
            } else {
                f64::NAN
            }
        };
        Ok(SimReport {
            time_avg_age: age,
            source_est_age: shadow.avg_age,
            nodes,
            total_update_backlog: total,
            source_backlog: shadow.avg_backlog,
            mean_rtt: mean(self.rtt_post.0, self.rtt_post.1),
            mean_system_time: mean(self.system_time_post, self.delivered_post),
            updates_generated: self.generated,
            updates_delivered: self.delivered,
            updates_dropped: self.dropped,
            updates_in_flight: self.in_flight,
            acks_dropped: self.acks_dropped,
            achieved_lambda: self.generated_post as f64 / secs,
            measured: secs,
            init_lambda: self.init_lambda,
            epochs: self.epochs,
            stalls: self.stalls,
            trace: self.trace,
            inputs: self.inputs,
        })
    }
}
