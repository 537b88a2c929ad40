//! Virtual time. Simulation time is a count of virtual seconds decoupled from
//! wall-clock time, so multi-hour timeout experiments run in milliseconds.

use alloc::sync::Arc;
use core::sync::atomic::{AtomicU64, Ordering};

/// Virtual seconds since simulation start.
pub type VirtualTime = u64;

/// A shared, monotonically non-decreasing virtual clock. Handles are cheap to
/// clone; every component of a simulation reads the same instant.
#[derive(Debug, Clone)]
pub struct VirtualClock {
    now: Arc<AtomicU64>,
}

impl VirtualClock {
    pub fn new(start: VirtualTime) -> Self {
        Self { now: Arc::new(AtomicU64::new(start)) }
    }

    pub fn now(&self) -> VirtualTime {
        self.now.load(Ordering::Acquire)
    }

    pub fn advance(&self, dt: VirtualTime) -> VirtualTime {
        self.now.fetch_add(dt, Ordering::AcqRel) + dt
    }

    /// Moves the clock forward to `t`; never backwards.
    pub fn advance_to(&self, t: VirtualTime) {
        self.now.fetch_max(t, Ordering::AcqRel);
    }
}

impl Default for VirtualClock {
    fn default() -> Self {
        Self::new(0)
    }
}
