use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::werner::{check_coherence_time, WernerParam};

/// Largest supported nesting level; `2^32` segments is far beyond anything
/// either engine can evaluate.
pub const MAX_NESTING_LEVEL: u32 = 32;

/// Parameters of a `2^n`-segment repeater chain running SWAP-ONLY (`d = 0`)
/// or d-DIST-SWAP.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolParams {
    pub p_gen: f64,
    pub p_swap: f64,
    /// Werner parameter of freshly generated single-hop links.
    pub w0: f64,
    /// Memory coherence time in time steps; infinite for perfect memories.
    #[serde(with = "coherence_time")]
    pub t_coh: f64,
    /// Nesting level; the chain has `2^n` segments.
    pub n: u32,
    /// Distillation rounds before every swap.
    pub d: u32,
    pub include_comm_time: bool,
    pub t_trunc: usize,
}

impl ProtocolParams {
    /// SWAP-ONLY chain with perfect links and memories; adjust with the `with_*` methods.
    pub fn new(p_gen: f64, p_swap: f64, n: u32) -> Self {
        Self {
            p_gen,
            p_swap,
            w0: 1.0,
            t_coh: f64::INFINITY,
            n,
            d: 0,
            include_comm_time: false,
            t_trunc: 1,
        }
    }

    pub fn with_w0(mut self, w0: f64) -> Self {
        self.w0 = w0;
        self
    }

    pub fn with_t_coh(mut self, t_coh: f64) -> Self {
        self.t_coh = t_coh;
        self
    }

    pub fn with_distillation(mut self, d: u32) -> Self {
        self.d = d;
        self
    }

    pub fn with_comm_time(mut self, include: bool) -> Self {
        self.include_comm_time = include;
        self
    }

    pub fn with_t_trunc(mut self, t_trunc: usize) -> Self {
        self.t_trunc = t_trunc;
        self
    }

    pub fn segments(&self) -> u64 {
        1u64 << self.n
    }

    pub fn werner0(&self) -> WernerParam {
        WernerParam::clamped(self.w0)
    }

    /// Checks every field except `t_trunc`.
    pub fn validate_physics(&self) -> Result<()> {
        if !(self.p_gen > 0.0 && self.p_gen <= 1.0) {
            return Err(Error::invalid("p_gen", self.p_gen, "must lie in (0, 1]"));
        }
        if !(self.p_swap > 0.0 && self.p_swap <= 1.0) {
            return Err(Error::invalid("p_swap", self.p_swap, "must lie in (0, 1]"));
        }
        WernerParam::new(self.w0)?;
        check_coherence_time(self.t_coh)?;
        if self.n > MAX_NESTING_LEVEL {
            return Err(Error::invalid("n", self.n as f64, "nesting level too large"));
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_physics()?;
        if self.t_trunc < 1 {
            return Err(Error::invalid("t_trunc", self.t_trunc as f64, "must be at least 1"));
        }
        Ok(())
    }
}

/// Nesting level of a chain with `segments` segments, which must be a power of two.
pub fn nesting_level(segments: u64) -> Result<u32> {
    if segments == 0 || !segments.is_power_of_two() {
        return Err(Error::invalid(
            "segments",
            segments as f64,
            "the nested protocol is defined for N = 2^n segments only",
        ));
    }
    Ok(segments.trailing_zeros())
}

/// Serializes an infinite coherence time as the string `"inf"`, since JSON has
/// no infinity literal.
pub(crate) mod coherence_time {
    use serde::de::{self, Deserializer, Visitor};
    use serde::Serializer;
    use std::fmt;

    pub fn serialize<S: Serializer>(t: &f64, s: S) -> Result<S::Ok, S::Error> {
        if t.is_infinite() && *t > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*t)
        }
    }

    struct CoherenceVisitor;

    impl<'de> Visitor<'de> for CoherenceVisitor {
        type Value = f64;

        fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
            f.write_str("a positive number or \"inf\"")
        }

        fn visit_f64<E: de::Error>(self, v: f64) -> Result<f64, E> {
            Ok(v)
        }

        fn visit_i64<E: de::Error>(self, v: i64) -> Result<f64, E> {
            Ok(v as f64)
        }

        fn visit_u64<E: de::Error>(self, v: u64) -> Result<f64, E> {
            Ok(v as f64)
        }

        fn visit_str<E: de::Error>(self, v: &str) -> Result<f64, E> {
            super::parse_coherence_time(v).map_err(E::custom)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        d.deserialize_any(CoherenceVisitor)
    }
}

/// Parses a coherence time, accepting `inf`/`infinity` for perfect memories.
pub fn parse_coherence_time(s: &str) -> std::result::Result<f64, String> {
    match s.trim().to_ascii_lowercase().as_str() {
        "inf" | "infinity" | "+inf" => Ok(f64::INFINITY),
        other => other
            .parse::<f64>()
            .map_err(|e| format!("invalid coherence time {s:?}: {e}")),
    }
}
