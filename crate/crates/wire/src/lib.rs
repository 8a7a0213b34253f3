//! Wire format, endpoints and drivers for running the age control protocol
//! over datagrams.
//!
//! The source sends timestamped, sequenced updates; the monitor answers each
//! update fresher than anything it has seen with an ACK echoing the update's
//! sequence number and timestamp.

pub mod clock;
pub mod codec;
pub mod driver;
pub mod monitor;
pub mod source;
pub mod transport;

pub use clock::{Clock, SystemClock, VirtualClock};
pub use codec::{
    decode_packet, encode_ack, encode_update, AckHeader, CodecError, Malformed, Packet,
    UpdateHeader,
};
pub use driver::{
    run_monitor, run_source, source_init_phase, DriverError, MonitorLog, MonitorRunOptions,
    SourceLog, SourceRunOptions, SourceSummary,
};
pub use monitor::{FreshnessFilter, MonitorEndpoint, MonitorVerdict};
pub use source::{
    EpochRecord, Phase, RateController, SentUpdate, SourceConfig, SourceEffect, SourceEndpoint,
    SourceError,
};
pub use transport::{EchoTransport, Transport, UdpTransport};
