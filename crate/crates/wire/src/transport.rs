//! Datagram transports: UDP sockets and an in-memory echo channel.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashSet};
use std::fmt::Debug;
use std::hash::Hash;
use std::io;
use std::net::{SocketAddr, ToSocketAddrs, UdpSocket};
use std::time::Duration;

use acp_core::Micros;

use crate::clock::{Clock, VirtualClock};
use crate::codec::{decode_packet, encode_ack, Packet, HEADER_LEN};
use crate::monitor::{MonitorEndpoint, MonitorVerdict};

pub const MAX_DATAGRAM: usize = HEADER_LEN + u16::MAX as usize;

pub trait Transport {
    type Addr: Clone + Eq + Hash + Debug;

    fn send_to(&mut self, bytes: &[u8], dest: &Self::Addr) -> io::Result<()>;

    /// Waits at most `timeout` for one datagram. A non-positive timeout polls
    /// without blocking.
    fn recv_timeout(&mut self, timeout: Micros) -> io::Result<Option<(Vec<u8>, Self::Addr)>>;
}

#[derive(Debug)]
pub struct UdpTransport {
    socket: UdpSocket,
    buf: Vec<u8>,
}

impl UdpTransport {
    pub fn bind(addr: impl ToSocketAddrs) -> io::Result<Self> {
        Ok(UdpTransport {
            socket: UdpSocket::bind(addr)?,
            buf: vec![0; MAX_DATAGRAM],
        })
    }

    pub fn local_addr(&self) -> io::Result<SocketAddr> {
        self.socket.local_addr()
    }
}

impl Transport for UdpTransport {
    type Addr = SocketAddr;

    fn send_to(&mut self, bytes: &[u8], dest: &SocketAddr) -> io::Result<()> {
        self.socket.send_to(bytes, dest).map(|_| ())
    }

    fn recv_timeout(&mut self, timeout: Micros) -> io::Result<Option<(Vec<u8>, SocketAddr)>> {
        if timeout <= Micros::ZERO {
            self.socket.set_nonblocking(true)?;
        } else {
            self.socket.set_nonblocking(false)?;
            self.socket
                .set_read_timeout(Some(Duration::from_micros(timeout.0 as u64)))?;
        }
        match self.socket.recv_from(&mut self.buf) {
            Ok((n, from)) => Ok(Some((self.buf[..n].to_vec(), from))),
            Err(e)
                if matches!(
                    e.kind(),
                    io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut
                ) =>
            {
                Ok(None)
            }
            Err(e) => Err(e),
        }
    }
}

type DropRule = Box<dyn FnMut(u32) -> bool>;

/// Source-side transport wired to an in-process monitor over a path with a
/// constant one-way delay, driven by a [`VirtualClock`].
///
/// Because the delay is constant, updates reach the monitor in send order, so
/// the monitor decision is made at send time and only the ACK delivery is
/// deferred by the round trip.
pub struct EchoTransport {
    clock: VirtualClock,
    one_way: Micros,
    monitor: MonitorEndpoint<()>,
    in_flight: BinaryHeap<Reverse<(Micros, u64, Vec<u8>)>>,
    counter: u64,
    drop_update: Option<DropRule>,
    dropped: HashSet<u32>,
}

impl EchoTransport {
    pub fn new(clock: VirtualClock, one_way: Micros) -> Self {
        EchoTransport {
            clock,
            one_way,
            monitor: MonitorEndpoint::new(),
            in_flight: BinaryHeap::new(),
            counter: 0,
            drop_update: None,
            dropped: HashSet::new(),
        }
    }

    /// Updates for which `rule(seq)` is true are lost before reaching the
    /// monitor.
    pub fn with_update_loss(mut self, rule: impl FnMut(u32) -> bool + 'static) -> Self {
        self.drop_update = Some(Box::new(rule));
        self
    }

    pub fn monitor(&self) -> &MonitorEndpoint<()> {
        &self.monitor
    }

    pub fn dropped(&self) -> &HashSet<u32> {
        &self.dropped
    }
}

impl Transport for EchoTransport {
    type Addr = ();

    fn send_to(&mut self, bytes: &[u8], _dest: &()) -> io::Result<()> {
        let packet =
            decode_packet(bytes).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?;
        let Packet::Update { header, .. } = packet else {
            return Ok(());
        };
        if let Some(rule) = self.drop_update.as_mut() {
            if rule(header.seq) {
                self.dropped.insert(header.seq);
                return Ok(());
            }
        }
        if let MonitorVerdict::Ack(ack) = self.monitor.on_update(&(), &header) {
            let arrival = self.clock.now() + self.one_way + self.one_way;
            self.counter += 1;
            self.in_flight
                .push(Reverse((arrival, self.counter, encode_ack(&ack).to_vec())));
        }
        Ok(())
    }

    fn recv_timeout(&mut self, timeout: Micros) -> io::Result<Option<(Vec<u8>, ())>> {
        let deadline = self.clock.now() + timeout.max(Micros::ZERO);
        match self.in_flight.peek() {
            Some(Reverse((t, _, _))) if *t <= deadline => {
                let Reverse((t, _, bytes)) = self.in_flight.pop().expect("peeked");
                self.clock.advance_to(t);
                Ok(Some((bytes, ())))
            }
            _ => {
                self.clock.advance_to(deadline);
                Ok(None)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::{encode_update, UpdateHeader};

    fn update(seq: u32, ts: u64) -> Vec<u8> {
        encode_update(
            &UpdateHeader {
                seq,
                gen_timestamp_us: ts,
                payload_len: 0,
            },
            &[],
        )
        .unwrap()
    }

    #[test]
    fn echo_returns_ack_after_round_trip() {
        let clock = VirtualClock::new(Micros::ZERO);
        let mut t = EchoTransport::new(clock.clone(), Micros(700));
        t.send_to(&update(1, 0), &()).unwrap();
        assert_eq!(t.recv_timeout(Micros(1399)).unwrap(), None);
        assert_eq!(clock.now(), Micros(1399));
        let (bytes, ()) = t.recv_timeout(Micros(10)).unwrap().unwrap();
        assert_eq!(clock.now(), Micros(1400));
        assert!(matches!(decode_packet(&bytes).unwrap(), Packet::Ack(a) if a.seq == 1));
    }

    #[test]
    fn echo_loss_rule() {
        let clock = VirtualClock::new(Micros::ZERO);
        let mut t = EchoTransport::new(clock, Micros(1)).with_update_loss(|s| s == 2);
        t.send_to(&update(1, 0), &()).unwrap();
        t.send_to(&update(2, 0), &()).unwrap();
        assert!(t.recv_timeout(Micros(5)).unwrap().is_some());
        assert!(t.recv_timeout(Micros(5)).unwrap().is_none());
        assert!(t.dropped().contains(&2));
    }

    #[test]
    fn udp_round_trip() {
        let mut a = UdpTransport::bind("127.0.0.1:0").unwrap();
        let mut b = UdpTransport::bind("127.0.0.1:0").unwrap();
        let dest = b.local_addr().unwrap();
        a.send_to(b"hello", &dest).unwrap();
        let (bytes, from) = b.recv_timeout(Micros::from_secs(2)).unwrap().unwrap();
        assert_eq!(bytes, b"hello");
        assert_eq!(from, a.local_addr().unwrap());
        assert!(b.recv_timeout(Micros::ZERO).unwrap().is_none());
        assert!(b.recv_timeout(Micros::from_millis(5)).unwrap().is_none());
    }
}
