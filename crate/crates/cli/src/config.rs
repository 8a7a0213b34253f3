//! Experiment configuration file.
//!
//! TOML, one table per concern. Every key is optional and unknown keys are
//! rejected. See `configs/` for annotated examples.

use std::path::Path;

use acp_core::control::{
    DEFAULT_EPOCH_MULTIPLIER, DEFAULT_GAMMA_CAP, DEFAULT_KAPPA_REAL, DEFAULT_KAPPA_SIMULATED,
};
use acp_core::{ControlConfig, GuardReference, Micros, RateBounds};
use acp_netsim::topology::{
    DEFAULT_ACK_BITS, DEFAULT_CROSS_BPS, DEFAULT_CROSS_PACKET_BITS, DEFAULT_UPDATE_BITS,
};
use acp_netsim::{Arrivals, CrossFlow, NodeSpec, ReversePath, Service, SimConfig, Topology};
use acp_wire::source::{DEFAULT_PROBES, DEFAULT_STALL_EPOCHS, DEFAULT_STALL_FLOOR};
use acp_wire::{RateController, SourceConfig};
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub sim: SimSection,
    pub topology: TopologySection,
    pub controller: ControllerSection,
    pub sweep: SweepSection,
    pub network: NetworkSection,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct SimSection {
    /// Simulated seconds per run.
    pub duration_s: f64,
    pub warmup_fraction: f64,
    pub seeds: Vec<u64>,
    pub backlog_bound: usize,
}

impl Default for SimSection {
    fn default() -> Self {
        SimSection {
            duration_s: 100_000.0,
            warmup_fraction: acp_netsim::sim::DEFAULT_WARMUP_FRACTION,
            seeds: vec![1],
            backlog_bound: acp_netsim::sim::DEFAULT_BACKLOG_BOUND,
        }
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct TopologySection {
    /// mm1, tandem, chain, net-a … net-e, or custom.
    pub preset: String,
    pub mu: f64,
    pub mu2: f64,
    /// Hop count for `chain`.
    pub hops: usize,
    /// instant or symmetric; presets pick their own when absent.
    pub reverse: Option<String>,
    pub update_bits: u32,
    pub ack_bits: u32,
    /// Cross traffic of the six-hop presets.
    pub cross_bps: f64,
    pub cross_packet_bits: u32,
    #[serde(rename = "node")]
    pub nodes: Vec<NodeEntry>,
    #[serde(rename = "reverse_node")]
    pub reverse_nodes: Vec<NodeEntry>,
    pub cross: Vec<CrossEntry>,
}

impl Default for TopologySection {
    fn default() -> Self {
        TopologySection {
            preset: "mm1".into(),
            mu: 1.0,
            mu2: 1.0,
            hops: 6,
            reverse: None,
            update_bits: DEFAULT_UPDATE_BITS,
            ack_bits: DEFAULT_ACK_BITS,
            cross_bps: DEFAULT_CROSS_BPS,
            cross_packet_bits: DEFAULT_CROSS_PACKET_BITS,
            nodes: Vec::new(),
            reverse_nodes: Vec::new(),
            cross: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct NodeEntry {
    pub name: Option<String>,
    /// exponential, deterministic or link
    pub service: String,
    /// Packets per second (exponential).
    pub rate: Option<f64>,
    /// Seconds (deterministic).
    pub time_s: Option<f64>,
    /// Bits per second (link).
    pub bps: Option<f64>,
    #[serde(default)]
    pub loss: f64,
    #[serde(default)]
    pub propagation_ms: f64,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct CrossEntry {
    pub entry: usize,
    pub exit: usize,
    pub rate_bps: f64,
    pub packet_bits: u32,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ControllerSection {
    /// acp, lazy or fixed
    pub kind: String,
    /// Step size; defaults to 0.25 in simulation and 1 on live runs.
    pub kappa: Option<f64>,
    pub alpha: f64,
    pub epoch_multiplier: u32,
    pub gamma_cap: u32,
    pub lambda_min: f64,
    pub lambda_max: f64,
    /// previous-target or previous-change
    pub guard: String,
    /// Updates per second for `fixed`.
    pub rate: Option<f64>,
    pub probes: u32,
    pub probe_timeout_ms: f64,
    pub stall_epochs: u32,
    pub stall_floor_ms: f64,
}

impl Default for ControllerSection {
    fn default() -> Self {
        let b = RateBounds::default();
        ControllerSection {
            kind: "acp".into(),
            kappa: None,
            alpha: acp_core::DEFAULT_ALPHA,
            epoch_multiplier: DEFAULT_EPOCH_MULTIPLIER,
            gamma_cap: DEFAULT_GAMMA_CAP,
            lambda_min: b.min,
            lambda_max: b.max,
            guard: "previous-target".into(),
            rate: None,
            probes: DEFAULT_PROBES,
            probe_timeout_ms: 1000.0,
            stall_epochs: DEFAULT_STALL_EPOCHS,
            stall_floor_ms: DEFAULT_STALL_FLOOR.as_secs_f64() * 1e3,
        }
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    /// Explicit rates; overrides the fractional grid.
    pub lambdas: Vec<f64>,
    /// Grid as fractions of the topology's update capacity.
    pub from_fraction: f64,
    pub to_fraction: f64,
    pub points: usize,
    /// poisson or periodic
    pub arrivals: String,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            lambdas: Vec::new(),
            from_fraction: 0.1,
            to_fraction: 0.9,
            points: 17,
            arrivals: "poisson".into(),
        }
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct NetworkSection {
    /// Monitor address the source sends to.
    pub monitor: String,
    /// Local address of the source.
    pub bind: String,
    /// Address the monitor listens on.
    pub listen: String,
    pub updates: u64,
    pub payload_bytes: u16,
    /// Monitor exits after this long without traffic.
    pub idle_timeout_s: f64,
    /// Source keeps collecting ACKs this long after its last update.
    pub linger_ms: f64,
}

impl Default for NetworkSection {
    fn default() -> Self {
        NetworkSection {
            monitor: "127.0.0.1:5683".into(),
            bind: "0.0.0.0:0".into(),
            listen: "0.0.0.0:5683".into(),
            updates: 1000,
            payload_bytes: 0,
            idle_timeout_s: 10.0,
            linger_ms: 200.0,
        }
    }
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn positive(name: &str, v: f64) -> Result<f64, CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(config_err(format!("{name} must be positive, got {v}")))
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| config_err(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(m) => config_err(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn sim_config(&self, seed: u64) -> Result<SimConfig, CliError> {
        let s = &self.sim;
        if !(s.duration_s > 0.0 && s.duration_s.is_finite()) {
            return Err(config_err(format!(
                "sim.duration_s = {}: degenerate interval, the run must have positive length",
                s.duration_s
            )));
        }
        if !(0.0..1.0).contains(&s.warmup_fraction) {
            return Err(config_err("sim.warmup_fraction must lie in [0, 1)"));
        }
        Ok(SimConfig {
            duration: Micros::from_secs_f64(s.duration_s),
            warmup_fraction: s.warmup_fraction,
            seed,
            backlog_bound: s.backlog_bound,
            trace: false,
            record_inputs: false,
        })
    }

    pub fn topology(&self) -> Result<Topology, CliError> {
        let t = &self.topology;
        let mut topo = match t.preset.as_str() {
            "mm1" => Topology::mm1(t.mu),
            "tandem" => Topology::tandem(t.mu, t.mu2),
            "chain" => Topology::chain(
                "chain",
                t.hops,
                Service::Exponential { rate: t.mu },
                ReversePath::Symmetric,
            ),
            "custom" => {
                if t.nodes.is_empty() {
                    return Err(config_err("custom topology needs at least one [[topology.node]]"));
                }
                let forward = node_specs(&t.nodes, "node")?;
                let reverse = if t.reverse_nodes.is_empty() {
                    ReversePath::InstantReturn
                } else {
                    ReversePath::Nodes(node_specs(&t.reverse_nodes, "reverse_node")?)
                };
                Topology::new("custom", forward, reverse)
            }
            name => match acp_netsim::topology::NET_RATES.iter().find(|(n, _)| *n == name) {
                Some((n, rates)) => {
                    let mut topo = Topology::six_hop(*n, *rates, t.cross_bps);
                    for f in &mut topo.cross {
                        f.packet_bits = t.cross_packet_bits;
                    }
                    topo
                }
                None => {
                    return Err(config_err(format!(
                        "topology.preset: unknown preset `{name}` (expected mm1, tandem, chain, net-a … net-e or custom)"
                    )))
                }
            },
        };
        if t.preset != "custom" && !(t.nodes.is_empty() && t.reverse_nodes.is_empty()) {
            return Err(config_err(
                "topology.node entries are only allowed with preset = \"custom\"",
            ));
        }
        match t.reverse.as_deref() {
            None => {}
            Some("instant") => topo.reverse = ReversePath::InstantReturn,
            Some("symmetric") => topo.reverse = ReversePath::Symmetric,
            Some(other) => {
                return Err(config_err(format!(
                    "topology.reverse: expected instant or symmetric, got `{other}`"
                )))
            }
        }
        topo.update_bits = t.update_bits;
        topo.ack_bits = t.ack_bits;
        topo.cross.extend(t.cross.iter().map(|c| CrossFlow {
            entry: c.entry,
            exit: c.exit,
            rate_bps: c.rate_bps,
            packet_bits: c.packet_bits,
        }));
        topo.validate().map_err(|e| config_err(e.to_string()))?;
        Ok(topo)
    }

    /// Source configuration; `live` selects the defaults for real networks.
    pub fn source_config(&self, live: bool) -> Result<SourceConfig, CliError> {
        let c = &self.controller;
        let bounds = RateBounds::new(c.lambda_min, c.lambda_max)
            .map_err(|e| config_err(format!("controller.lambda_min/lambda_max: {e}")))?;
        let controller = match c.kind.as_str() {
            "acp" => {
                let kappa = c.kappa.unwrap_or(if live {
                    DEFAULT_KAPPA_REAL
                } else {
                    DEFAULT_KAPPA_SIMULATED
                });
                let guard = match c.guard.as_str() {
                    "previous-target" => GuardReference::PreviousTarget,
                    "previous-change" => GuardReference::PreviousChange,
                    g => return Err(config_err(format!(
                        "controller.guard: expected previous-target or previous-change, got `{g}`"
                    ))),
                };
                if c.epoch_multiplier == 0 {
                    return Err(config_err("controller.epoch_multiplier must be at least 1"));
                }
                RateController::Acp(ControlConfig {
                    kappa: positive("controller.kappa", kappa)?,
                    bounds,
                    epoch_multiplier: c.epoch_multiplier,
                    gamma_cap: c.gamma_cap,
                    guard,
                })
            }
            "lazy" => RateController::Lazy(bounds),
            "fixed" => {
                let rate = c.rate.ok_or_else(|| {
                    config_err("controller.rate is required for kind = \"fixed\"")
                })?;
                RateController::Fixed(positive("controller.rate", rate)?)
            }
            k => {
                return Err(config_err(format!(
                    "controller.kind: expected acp, lazy or fixed, got `{k}`"
                )))
            }
        };
        if !(c.alpha > 0.0 && c.alpha <= 1.0) {
            return Err(config_err(format!(
                "controller.alpha = {} is outside (0, 1]",
                c.alpha
            )));
        }
        if c.probes == 0 {
            return Err(config_err("controller.probes must be at least 1"));
        }
        Ok(SourceConfig {
            controller,
            alpha: c.alpha,
            probes: c.probes,
            probe_timeout: Micros::from_secs_f64(
                positive("controller.probe_timeout_ms", c.probe_timeout_ms)? * 1e-3,
            ),
            stall_epochs: c.stall_epochs,
            stall_floor: Micros::from_secs_f64(c.stall_floor_ms.max(0.0) * 1e-3),
        })
    }

    pub fn arrivals(&self) -> Result<Arrivals, CliError> {
        match self.sweep.arrivals.as_str() {
            "poisson" => Ok(Arrivals::Poisson),
            "periodic" => Ok(Arrivals::Periodic),
            a => Err(config_err(format!(
                "sweep.arrivals: expected poisson or periodic, got `{a}`"
            ))),
        }
    }

    /// Sweep rates, explicit or as a grid over the update capacity.
    pub fn sweep_lambdas(&self, topo: &Topology) -> Result<Vec<f64>, CliError> {
        let s = &self.sweep;
        let lambdas = if s.lambdas.is_empty() {
            if s.points == 0 || !(0.0 < s.from_fraction && s.from_fraction <= s.to_fraction) {
                return Err(config_err(
                    "sweep: need points > 0 and 0 < from_fraction <= to_fraction",
                ));
            }
            let cap = topo.update_capacity();
            acp_netsim::sweep::linspace(s.from_fraction * cap, s.to_fraction * cap, s.points)
        } else {
            s.lambdas.clone()
        };
        if lambdas.iter().any(|l| !(*l > 0.0 && l.is_finite()))
            || lambdas.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(config_err(
                "sweep.lambdas must be positive and strictly increasing",
            ));
        }
        Ok(lambdas)
    }
}

fn node_specs(entries: &[NodeEntry], table: &str) -> Result<Vec<NodeSpec>, CliError> {
    entries
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let field = |name: &str, v: Option<f64>| {
                v.ok_or_else(|| {
                    config_err(format!(
                        "topology.{table}[{i}]: service `{}` requires `{name}`",
                        e.service
                    ))
                })
            };
            let service = match e.service.as_str() {
                "exponential" => Service::Exponential {
                    rate: field("rate", e.rate)?,
                },
                "deterministic" => Service::Deterministic {
                    time: field("time_s", e.time_s)?,
                },
                "link" => Service::LinkRate {
                    bps: field("bps", e.bps)?,
                },
                s => {
                    return Err(config_err(format!(
                        "topology.{table}[{i}].service: expected exponential, deterministic or link, got `{s}`"
                    )))
                }
            };
            Ok(NodeSpec {
                name: e.name.clone().unwrap_or_else(|| format!("{table}-{}", i + 1)),
                service,
                loss: e.loss,
                propagation: Micros::from_secs_f64(e.propagation_ms * 1e-3),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let c = ExperimentConfig::parse("").unwrap();
        assert_eq!(c, ExperimentConfig::default());
        assert_eq!(c.topology().unwrap(), Topology::mm1(1.0));
        let sc = c.source_config(false).unwrap();
        assert!(matches!(sc.controller, RateController::Acp(cc) if cc.kappa == 0.25));
        let sc = c.source_config(true).unwrap();
        assert!(matches!(sc.controller, RateController::Acp(cc) if cc.kappa == 1.0));
    }

    #[test]
    fn unknown_key_is_named() {
        let err = ExperimentConfig::parse("[sim]\nduration_s = 5\nseedz = [1]\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("seedz"), "{msg}");
        assert!(msg.contains("line 3"), "{msg}");
    }

    #[test]
    fn custom_topology() {
        let c = ExperimentConfig::parse(
            r#"
            [topology]
            preset = "custom"
            [[topology.node]]
            name = "edge"
            service = "link"
            bps = 1e6
            loss = 0.01
            propagation_ms = 5
            [[topology.node]]
            service = "exponential"
            rate = 3
            [[topology.reverse_node]]
            service = "deterministic"
            time_s = 0.002
            [[topology.cross]]
            entry = 0
            exit = 1
            rate_bps = 1000
            packet_bits = 100
            "#,
        )
        .unwrap();
        let t = c.topology().unwrap();
        assert_eq!(t.forward.len(), 2);
        assert_eq!(t.forward[0].propagation, Micros::from_millis(5));
        assert_eq!(t.forward[1].name, "node-2");
        assert_eq!(t.reverse_nodes().len(), 1);
        assert_eq!(t.cross.len(), 1);
    }

    #[test]
    fn missing_service_parameter() {
        let c = ExperimentConfig::parse(
            "[topology]\npreset = \"custom\"\n[[topology.node]]\nservice = \"link\"\n",
        )
        .unwrap();
        assert!(c.topology().unwrap_err().to_string().contains("bps"));
    }

    #[test]
    fn zero_duration_is_degenerate() {
        let c = ExperimentConfig::parse("[sim]\nduration_s = 0\n").unwrap();
        assert!(c
            .sim_config(1)
            .unwrap_err()
            .to_string()
            .contains("degenerate"));
    }

    #[test]
    fn net_preset_and_overrides() {
        let c = ExperimentConfig::parse(
            "[topology]\npreset = \"net-b\"\nreverse = \"instant\"\ncross_packet_bits = 1000\n",
        )
        .unwrap();
        let t = c.topology().unwrap();
        assert_eq!(t.reverse, ReversePath::InstantReturn);
        assert_eq!(t.cross[0].packet_bits, 1000);
        let bad = ExperimentConfig::parse("[topology]\npreset = \"net-q\"\n").unwrap();
        assert!(bad.topology().is_err());
    }

    #[test]
    fn controller_variants() {
        let c = ExperimentConfig::parse("[controller]\nkind = \"fixed\"\n").unwrap();
        assert!(c.source_config(false).is_err());
        let c = ExperimentConfig::parse("[controller]\nkind = \"fixed\"\nrate = 2.5\n").unwrap();
        assert_eq!(
            c.source_config(false).unwrap().controller,
            RateController::Fixed(2.5)
        );
        let c = ExperimentConfig::parse("[controller]\nkind = \"lazy\"\nprobe_timeout_ms = 5000\n")
            .unwrap();
        let sc = c.source_config(false).unwrap();
        assert_eq!(sc.probe_timeout, Micros::from_secs(5));
        let c = ExperimentConfig::parse("[controller]\nguard = \"sideways\"\n").unwrap();
        assert!(c.source_config(false).is_err());
    }

    #[test]
    fn sweep_grid_over_capacity() {
        let c = ExperimentConfig::parse(
            "[sweep]\nfrom_fraction = 0.2\nto_fraction = 0.6\npoints = 3\n",
        )
        .unwrap();
        let l = c.sweep_lambdas(&Topology::mm1(2.0)).unwrap();
        assert_eq!(l, vec![0.4, 0.8, 1.2]);
        let c = ExperimentConfig::parse("[sweep]\nlambdas = [0.5, 0.2]\n").unwrap();
        assert!(c.sweep_lambdas(&Topology::mm1(1.0)).is_err());
    }
}
