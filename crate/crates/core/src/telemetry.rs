//! Per-thread operation counters.
//!
//! Every [`G1Element::pow`](crate::pairing::G1Element::pow),
//! [`GtElement::pow`](crate::pairing::GtElement::pow), [`pair`](crate::pairing::pair)
//! and `H1`/`H2` evaluation bumps a thread-local counter. With the
//! `telemetry` feature disabled the hooks compile to nothing and
//! [`snapshot`] always reads zero.

use std::ops::Sub;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpCounts {
    pub g1_exp: u64,
    pub gt_exp: u64,
    pub pairings: u64,
    pub hashes: u64,
}

impl Sub for OpCounts {
    type Output = OpCounts;

    fn sub(self, rhs: Self) -> Self {
        OpCounts {
            g1_exp: self.g1_exp - rhs.g1_exp,
            gt_exp: self.gt_exp - rhs.gt_exp,
            pairings: self.pairings - rhs.pairings,
            hashes: self.hashes - rhs.hashes,
        }
    }
}

#[cfg(feature = "telemetry")]
mod imp {
    use super::OpCounts;
    use std::cell::Cell;

    thread_local! {
        static COUNTS: Cell<OpCounts> = const { Cell::new(OpCounts { g1_exp: 0, gt_exp: 0, pairings: 0, hashes: 0 }) };
    }

    #[inline]
    pub(crate) fn bump(f: impl FnOnce(&mut OpCounts)) {
        COUNTS.with(|c| {
            let mut v = c.get();
            f(&mut v);
            c.set(v);
        });
    }

    pub fn snapshot() -> OpCounts {
        COUNTS.with(|c| c.get())
    }

    pub fn reset() {
        COUNTS.with(|c| c.set(OpCounts::default()));
    }
}

#[cfg(not(feature = "telemetry"))]
mod imp {
    use super::OpCounts;

    #[inline]
    pub(crate) fn bump(_f: impl FnOnce(&mut OpCounts)) {}

    pub fn snapshot() -> OpCounts {
        OpCounts::default()
    }

    pub fn reset() {}
}

pub use imp::{reset, snapshot};

/// Whether the counters are compiled in.
pub const fn enabled() -> bool {
    cfg!(feature = "telemetry")
}

/// Runs `f` and returns its result with the operations it performed on this thread.
pub fn measure<R>(f: impl FnOnce() -> R) -> (R, OpCounts) {
    let before = snapshot();
    let out = f();
    (out, snapshot() - before)
}

#[inline]
pub(crate) fn record_g1_exp() {
    imp::bump(|c| c.g1_exp += 1);
}

#[inline]
pub(crate) fn record_gt_exp() {
    imp::bump(|c| c.gt_exp += 1);
}

#[inline]
pub(crate) fn record_pairing() {
    imp::bump(|c| c.pairings += 1);
}

#[inline]
pub(crate) fn record_hash() {
    imp::bump(|c| c.hashes += 1);
}
