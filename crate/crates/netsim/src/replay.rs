//! Replays a recorded endpoint input sequence outside the simulator.

use acp_core::Micros;
use acp_wire::source::{
    EpochRecord, SentUpdate, SourceConfig, SourceEffect, SourceEndpoint, SourceError,
};

use crate::sim::EndpointInput;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReplayOutcome {
    pub sends: Vec<SentUpdate>,
    pub epochs: Vec<EpochRecord>,
}

/// Feeds `inputs` to a fresh endpoint started at time zero.
pub fn replay_endpoint(
    cfg: SourceConfig,
    inputs: &[EndpointInput],
) -> Result<ReplayOutcome, SourceError> {
    let mut ep = SourceEndpoint::new(cfg, Micros::ZERO)?;
    let mut out = ReplayOutcome::default();
    for input in inputs {
        match *input {
            EndpointInput::Poll(t) => {
                for fx in ep.poll(t)? {
                    match fx {
                        SourceEffect::Send(s) => out.sends.push(s),
                        SourceEffect::EpochClosed(r) => out.epochs.push(r),
                        _ => {}
                    }
                }
            }
            EndpointInput::Ack(ack, t) => {
                ep.on_ack(&ack, t)?;
            }
        }
    }
    Ok(out)
}
