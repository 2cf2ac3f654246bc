//! Low-precision number formats.
//!
//! Everything here is bit-accurate emulation on top of `f64`: every value a
//! supported format can hold is exactly representable in binary64, so the
//! emulation never double-rounds.

mod fp22;
mod logfmt;
mod minifloat;
mod stats;
mod tile;

pub use fp22::{
    accumulate_group, simulated_gemm, Fp22State, GemmReport, FP22_MANTISSA_BITS, GROUP_SIZE,
    PROMOTION_INTERVAL,
};
pub use logfmt::{LogFmtBlock, LogRounding, LOGFMT_TILE, MAX_RANGE_LOG2};
pub use minifloat::{FloatFormat, SpecialEncoding};
pub use stats::{format_error_stats, seeded_gemm, Codec, Distribution, ErrorStats, STATS_BLOCK};
pub use tile::{QuantizedMatrix, QuantizedTile, TileShape, TILE_EDGE};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LowPrecError {
    #[error("invalid float format: {0}")]
    InvalidFormat(String),
    #[error("length mismatch: expected {expected} values, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("dimension {name} = {value} is not a multiple of 128")]
    DimNotMultipleOf128 { name: &'static str, value: usize },
    #[error("inner dimensions differ: {left} vs {right}")]
    InnerDimMismatch { left: usize, right: usize },
    #[error("empty block")]
    EmptyBlock,
    #[error("LogFMT width must be in 2..=16 bits, got {0}")]
    InvalidBitWidth(u32),
    #[error("non-finite input value {0}")]
    NonFiniteInput(f64),
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
}

/// `floor(log2(|x|))` for finite non-zero `x`, computed from the bit pattern.
pub(crate) fn exponent_of(x: f64) -> i32 {
    debug_assert!(x != 0.0 && x.is_finite());
    let bits = x.abs().to_bits();
    let biased = (bits >> 52) as i32;
    if biased == 0 {
        // binary64 subnormal: value = frac * 2^-1074
        let frac = bits & ((1u64 << 52) - 1);
        (63 - frac.leading_zeros() as i32) - 1074
    } else {
        biased - 1023
    }
}

/// Exact `2^k` for `k` in the binary64 normal or subnormal range.
pub(crate) fn pow2(k: i32) -> f64 {
    if k >= -1022 {
        f64::from_bits(((k + 1023) as u64) << 52)
    } else {
        f64::from_bits(1u64 << (k + 1074))
    }
}
