//! Process-wide resource cap.
//!
//! Every enumeration that can blow up (free balls, window sets, rule tables,
//! subset constructions) checks its size against one shared cap before
//! allocating.

use std::sync::atomic::{AtomicUsize, Ordering};

use crate::error::{Error, Result};

pub const DEFAULT_CAP: usize = 1_000_000;

/// Environment variable read by [`cap_from_env`].
pub const CAP_ENV: &str = "SURJUNCT_CAP";

static CAP: AtomicUsize = AtomicUsize::new(DEFAULT_CAP);

pub fn cap() -> usize {
    CAP.load(Ordering::Relaxed)
}

pub fn set_cap(cap: usize) {
    CAP.store(cap.max(1), Ordering::Relaxed);
}

/// Reads [`CAP_ENV`]; returns `None` when unset or unparsable.
pub fn cap_from_env() -> Option<usize> {
    std::env::var(CAP_ENV).ok()?.trim().parse().ok()
}

pub(crate) fn check(what: &'static str, needed: u128) -> Result<()> {
    let cap = cap();
    if needed > cap as u128 {
        Err(Error::ResourceCap { what, needed, cap })
    } else {
        Ok(())
    }
}

/// `base^exp` saturating at `u128::MAX`.
pub(crate) fn pow_sat(base: u128, exp: usize) -> u128 {
    let mut acc: u128 = 1;
    for _ in 0..exp {
        acc = acc.saturating_mul(base);
    }
    acc
}
