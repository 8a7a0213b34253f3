//! Time sources for the endpoint drivers.

use std::cell::Cell;
use std::rc::Rc;
use std::time::{Duration, Instant};

use acp_core::Micros;

pub trait Clock {
    fn now(&self) -> Micros;
    fn sleep_until(&self, t: Micros);
}

/// Monotonic wall clock; time zero is the moment of construction.
#[derive(Debug, Clone, Copy)]
pub struct SystemClock {
    origin: Instant,
}

impl SystemClock {
    pub fn new() -> Self {
        SystemClock {
            origin: Instant::now(),
        }
    }
}

impl Default for SystemClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for SystemClock {
    fn now(&self) -> Micros {
        Micros(self.origin.elapsed().as_micros() as i64)
    }

    fn sleep_until(&self, t: Micros) {
        let now = self.now();
        if t > now {
            std::thread::sleep(Duration::from_micros((t - now).0 as u64));
        }
    }
}

/// Manually driven clock shared between a driver and an in-memory transport.
#[derive(Debug, Clone, Default)]
pub struct VirtualClock(Rc<Cell<i64>>);

impl VirtualClock {
    pub fn new(start: Micros) -> Self {
        VirtualClock(Rc::new(Cell::new(start.0)))
    }

    /// Moves time forward to `t`; never moves it back.
    pub fn advance_to(&self, t: Micros) {
        if t.0 > self.0.get() {
            self.0.set(t.0);
        }
    }
}

impl Clock for VirtualClock {
    fn now(&self) -> Micros {
        Micros(self.0.get())
    }

    fn sleep_until(&self, t: Micros) {
        self.advance_to(t);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn virtual_clock_is_shared_and_monotone() {
        let a = VirtualClock::new(Micros(5));
        let b = a.clone();
        a.sleep_until(Micros(10));
        assert_eq!(b.now(), Micros(10));
        b.advance_to(Micros(3));
        assert_eq!(a.now(), Micros(10));
    }

    #[test]
    fn system_clock_advances() {
        let c = SystemClock::new();
        let t0 = c.now();
        c.sleep_until(t0 + Micros::from_millis(2));
        assert!(c.now() >= t0 + Micros::from_millis(2));
    }
}
