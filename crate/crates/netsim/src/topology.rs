//! Network descriptions: FCFS nodes, forward and reverse paths, cross traffic.

use acp_core::Micros;

use crate::SimError;

pub const DEFAULT_UPDATE_BITS: u32 = 1000;
pub const DEFAULT_ACK_BITS: u32 = 352;
pub const DEFAULT_CROSS_BPS: f64 = 0.2e6;
/// Cross traffic is carried in packets an eighth the size of an update, so
/// it interleaves finely with the update stream.
pub const DEFAULT_CROSS_PACKET_BITS: u32 = DEFAULT_UPDATE_BITS / 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Service {
    /// Exponential service at `rate` packets per second, independent of size.
    Exponential { rate: f64 },
    /// Constant service time in seconds, independent of size.
    Deterministic { time: f64 },
    /// Transmission at `bps`; service time is packet bits over rate.
    LinkRate { bps: f64 },
}

impl Service {
    pub fn mean_time(&self, bits: u32) -> f64 {
        match *self {
            Service::Exponential { rate } => 1.0 / rate,
            Service::Deterministic { time } => time,
            Service::LinkRate { bps } => bits as f64 / bps,
        }
    }

    fn is_valid(&self) -> bool {
        let v = match *self {
            Service::Exponential { rate } => rate,
            Service::Deterministic { time } => time,
            Service::LinkRate { bps } => bps,
        };
        v > 0.0 && v.is_finite()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeSpec {
    pub name: String,
    pub service: Service,
    /// Drop probability on the node's outgoing link.
    pub loss: f64,
    /// Propagation delay of the outgoing link.
    pub propagation: Micros,
}

impl NodeSpec {
    pub fn new(name: impl Into<String>, service: Service) -> Self {
        NodeSpec {
            name: name.into(),
            service,
            loss: 0.0,
            propagation: Micros::ZERO,
        }
    }

    pub fn with_loss(mut self, loss: f64) -> Self {
        self.loss = loss;
        self
    }

    pub fn with_propagation(mut self, propagation: Micros) -> Self {
        self.propagation = propagation;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ReversePath {
    /// Mirror of the forward chain, traversed in the opposite order.
    Symmetric,
    /// ACKs reach the source the instant the monitor emits them.
    InstantReturn,
    Nodes(Vec<NodeSpec>),
}

/// Poisson cross traffic entering at forward node `entry` and leaving after
/// forward node `exit`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossFlow {
    pub entry: usize,
    pub exit: usize,
    pub rate_bps: f64,
    pub packet_bits: u32,
}

impl CrossFlow {
    pub fn packet_rate(&self) -> f64 {
        self.rate_bps / self.packet_bits as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    pub name: String,
    pub forward: Vec<NodeSpec>,
    pub reverse: ReversePath,
    pub cross: Vec<CrossFlow>,
    pub update_bits: u32,
    pub ack_bits: u32,
}

/// Link rates in Mbps of the six-hop reference chains, source side first.
pub const NET_RATES: [(&str, [f64; 6]); 5] = [
    ("net-a", [1.0, 1.0, 1.0, 1.0, 1.0, 1.0]),
    ("net-b", [1.0, 1.0, 5.0, 5.0, 1.0, 1.0]),
    ("net-c", [1.0, 5.0, 5.0, 5.0, 5.0, 1.0]),
    ("net-d", [5.0, 5.0, 5.0, 5.0, 5.0, 1.0]),
    ("net-e", [5.0, 5.0, 5.0, 5.0, 5.0, 5.0]),
];

impl Topology {
    pub fn new(name: impl Into<String>, forward: Vec<NodeSpec>, reverse: ReversePath) -> Self {
        Topology {
            name: name.into(),
            forward,
            reverse,
            cross: Vec::new(),
            update_bits: DEFAULT_UPDATE_BITS,
            ack_bits: DEFAULT_ACK_BITS,
        }
    }

    pub fn mm1(mu: f64) -> Self {
        Topology::new(
            "mm1",
            vec![NodeSpec::new("q1", Service::Exponential { rate: mu })],
            ReversePath::InstantReturn,
        )
    }

    pub fn tandem(mu1: f64, mu2: f64) -> Self {
        Topology::new(
            "tandem",
            vec![
                NodeSpec::new("q1", Service::Exponential { rate: mu1 }),
                NodeSpec::new("q2", Service::Exponential { rate: mu2 }),
            ],
            ReversePath::InstantReturn,
        )
    }

    /// A chain of `hops` identical nodes.
    pub fn chain(
        name: impl Into<String>,
        hops: usize,
        service: Service,
        reverse: ReversePath,
    ) -> Self {
        let forward = (1..=hops)
            .map(|i| NodeSpec::new(format!("hop-{i}"), service))
            .collect();
        Topology::new(name, forward, reverse)
    }

    /// Six-hop chain of links at `rates_mbps` with a symmetric ACK path and a
    /// cross flow of `cross_bps` from the source across every forward link.
    pub fn six_hop(name: impl Into<String>, rates_mbps: [f64; 6], cross_bps: f64) -> Self {
        let forward: Vec<NodeSpec> = rates_mbps
            .iter()
            .enumerate()
            .map(|(i, r)| {
                NodeSpec::new(format!("hop-{}", i + 1), Service::LinkRate { bps: r * 1e6 })
            })
            .collect();
        let mut t = Topology::new(name, forward, ReversePath::Symmetric);
        if cross_bps > 0.0 {
            t.cross.push(CrossFlow {
                entry: 0,
                exit: 5,
                rate_bps: cross_bps,
                packet_bits: DEFAULT_CROSS_PACKET_BITS,
            });
        }
        t
    }

    /// One of `net-a` … `net-e`.
    pub fn net(name: &str) -> Option<Self> {
        let key = name.to_ascii_lowercase();
        NET_RATES
            .iter()
            .find(|(n, _)| *n == key)
            .map(|(n, rates)| Topology::six_hop(*n, *rates, DEFAULT_CROSS_BPS))
    }

    pub fn reverse_nodes(&self) -> Vec<NodeSpec> {
        match &self.reverse {
            ReversePath::Symmetric => self
                .forward
                .iter()
                .rev()
                .map(|n| NodeSpec {
                    name: format!("{}-rev", n.name),
                    ..n.clone()
                })
                .collect(),
            ReversePath::InstantReturn => Vec::new(),
            ReversePath::Nodes(nodes) => nodes.clone(),
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::InvalidConfig(m));
        if self.forward.is_empty() {
            return bad("forward path has no nodes".into());
        }
        if self.update_bits == 0 || self.ack_bits == 0 {
            return bad("packet sizes must be positive".into());
        }
        for n in self.forward.iter().chain(self.reverse_nodes().iter()) {
            if !n.service.is_valid() {
                return bad(format!(
                    "node {}: service parameter must be positive",
                    n.name
                ));
            }
            if !(0.0..1.0).contains(&n.loss) {
                return bad(format!("node {}: loss {} outside [0, 1)", n.name, n.loss));
            }
            if n.propagation < Micros::ZERO {
                return bad(format!("node {}: negative propagation delay", n.name));
            }
        }
        for (i, f) in self.cross.iter().enumerate() {
            if f.entry > f.exit || f.exit >= self.forward.len() {
                return bad(format!(
                    "cross flow {i}: bad node range {}..={}",
                    f.entry, f.exit
                ));
            }
            if !(f.rate_bps > 0.0) || f.packet_bits == 0 {
                return bad(format!("cross flow {i}: rate and size must be positive"));
            }
        }
        Ok(())
    }

    /// Offered utilization of each node (forward then reverse) when updates
    /// are generated at `lambda`, assuming every update is acknowledged.
    pub fn offered_load(&self, lambda: f64) -> Vec<(String, f64)> {
        let mut load: Vec<(String, f64)> = self
            .forward
            .iter()
            .map(|n| {
                (
                    n.name.clone(),
                    lambda * n.service.mean_time(self.update_bits),
                )
            })
            .collect();
        for f in &self.cross {
            for i in f.entry..=f.exit {
                load[i].1 += f.packet_rate() * self.forward[i].service.mean_time(f.packet_bits);
            }
        }
        for n in self.reverse_nodes() {
            let rho = lambda * n.service.mean_time(self.ack_bits);
            load.push((n.name, rho));
        }
        load
    }

    /// Mean update service time of the slowest forward node, seconds.
    pub fn bottleneck_service_time(&self) -> f64 {
        self.forward
            .iter()
            .map(|n| n.service.mean_time(self.update_bits))
            .fold(0.0, f64::max)
    }

    /// Update rate that saturates the bottleneck forward node after cross traffic.
    pub fn update_capacity(&self) -> f64 {
        self.offered_load(0.0)
            .iter()
            .zip(&self.forward)
            .map(|((_, cross), n)| (1.0 - cross) / n.service.mean_time(self.update_bits))
            .fold(f64::INFINITY, f64::min)
    }
}
