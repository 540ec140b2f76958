//! State-update rules for Werner-state links: memory decoherence, entanglement
//! swapping, recurrence distillation, and the per-attempt combination
//! functions used by both engines.
//!
//! Times are integers in units of the single-segment signalling time. A
//! coherence time of `f64::INFINITY` means memories never decohere.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Excursions outside `[0, 1]` smaller than this are treated as round-off.
const RANGE_SLACK: f64 = 1e-12;

/// Werner parameter `w` of the state `w |Φ+><Φ+| + (1 - w) 1/4`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct WernerParam(f64);

impl WernerParam {
    pub const PERFECT: WernerParam = WernerParam(1.0);
    pub const MIXED: WernerParam = WernerParam(0.0);

    pub fn new(w: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&w) {
            return Err(Error::invalid("werner parameter", w, "must lie in [0, 1]"));
        }
        Ok(Self(w))
    }

    /// Wraps the output of a range-preserving formula, absorbing round-off.
    ///
    /// Panics if `w` leaves `[0, 1]` by more than round-off.
    pub(crate) fn clamped(w: f64) -> Self {
        assert!(
            (-RANGE_SLACK..=1.0 + RANGE_SLACK).contains(&w),
            "werner parameter {w} outside [0, 1]"
        );
        Self(w.clamp(0.0, 1.0))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// Bell-state fidelity `(1 + 3w) / 4`.
    pub fn fidelity(self) -> f64 {
        (1.0 + 3.0 * self.0) / 4.0
    }
}

impl TryFrom<f64> for WernerParam {
    type Error = Error;

    fn try_from(w: f64) -> Result<Self> {
        WernerParam::new(w)
    }
}

impl From<WernerParam> for f64 {
    fn from(w: WernerParam) -> f64 {
        w.0
    }
}

/// One delivered link: its delivery time and Werner parameter at delivery.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkSample {
    pub t: u64,
    pub w: WernerParam,
}

impl LinkSample {
    pub fn new(t: u64, w: WernerParam) -> Self {
        Self { t, w }
    }
}

pub fn fidelity_from_werner(w: f64) -> Result<f64> {
    Ok(WernerParam::new(w)?.fidelity())
}

pub fn werner_from_fidelity(fidelity: f64) -> Result<WernerParam> {
    if !(0.25..=1.0).contains(&fidelity) {
        return Err(Error::invalid("fidelity", fidelity, "must lie in [1/4, 1]"));
    }
    Ok(WernerParam::clamped((4.0 * fidelity - 1.0) / 3.0))
}

pub(crate) fn check_coherence_time(t_coh: f64) -> Result<()> {
    if !(t_coh > 0.0) {
        return Err(Error::invalid("t_coh", t_coh, "must be positive or infinite"));
    }
    Ok(())
}

/// `exp(-dt / t_coh)`, exactly one for an infinite coherence time.
pub(crate) fn decay_factor(dt: f64, t_coh: f64) -> f64 {
    if t_coh.is_infinite() {
        1.0
    } else {
        (-dt / t_coh).exp()
    }
}

/// Werner parameter after `dt` time steps in memory.
pub fn decay(w: WernerParam, dt: f64, t_coh: f64) -> Result<WernerParam> {
    if !(dt >= 0.0) {
        return Err(Error::invalid("dt", dt, "must be nonnegative"));
    }
    check_coherence_time(t_coh)?;
    Ok(WernerParam::clamped(w.0 * decay_factor(dt, t_coh)))
}

/// Output of a successful swap on two Werner states.
pub fn swap_werner(a: WernerParam, b: WernerParam) -> WernerParam {
    WernerParam::clamped(a.0 * b.0)
}

/// Time at which both input links are present.
pub fn delivery_time(ta: u64, tb: u64) -> u64 {
    ta.max(tb)
}

/// Werner parameters of the two links at the moment the later one arrives:
/// the earlier link has decohered for `|ta - tb|` steps.
pub(crate) fn aligned_werners(a: LinkSample, b: LinkSample, t_coh: f64) -> (f64, f64) {
    let factor = decay_factor(a.t.abs_diff(b.t) as f64, t_coh);
    if a.t <= b.t {
        (a.w.0 * factor, b.w.0)
    } else {
        (a.w.0, b.w.0 * factor)
    }
}

/// Werner parameter produced by swapping `a` and `b` once both are present.
pub fn swapped_werner(a: LinkSample, b: LinkSample, t_coh: f64) -> WernerParam {
    let factor = decay_factor(a.t.abs_diff(b.t) as f64, t_coh);
    WernerParam::clamped(a.w.0 * b.w.0 * factor)
}

/// Link produced by a successful swap with instantaneous heralding.
pub fn swap_links(a: LinkSample, b: LinkSample, t_coh: f64) -> LinkSample {
    LinkSample {
        t: delivery_time(a.t, b.t),
        w: swapped_werner(a, b, t_coh),
    }
}

/// Link produced by a successful swap of two `2^level`-hop links when the
/// heralding signal takes `2^level` steps, during which the output decoheres.
pub fn swap_links_with_comm_time(a: LinkSample, b: LinkSample, t_coh: f64, level: u32) -> LinkSample {
    let comm = 1u64 << level;
    let w = swapped_werner(a, b, t_coh).0 * decay_factor(comm as f64, t_coh);
    LinkSample {
        t: delivery_time(a.t, b.t) + comm,
        w: WernerParam::clamped(w),
    }
}

/// Success probability of recurrence distillation, `(1 + wa wb) / 2`.
pub fn distill_success_probability(a: WernerParam, b: WernerParam) -> f64 {
    (1.0 + a.0 * b.0) / 2.0
}

/// Werner parameter after successful distillation, twirled back to Werner form.
pub fn distilled_werner(a: WernerParam, b: WernerParam) -> WernerParam {
    let (wa, wb) = (a.0, b.0);
    let p = distill_success_probability(a, b);
    WernerParam::clamped((1.0 + wa + wb + 5.0 * wa * wb) / (6.0 * p) - 1.0 / 3.0)
}

/// Link produced by a successful distillation attempt; the earlier-delivered
/// input decoheres until the later one arrives.
pub fn distill_links(a: LinkSample, b: LinkSample, t_coh: f64) -> LinkSample {
    let (wa, wb) = aligned_werners(a, b, t_coh);
    LinkSample {
        t: delivery_time(a.t, b.t),
        w: distilled_werner(WernerParam::clamped(wa), WernerParam::clamped(wb)),
    }
}
