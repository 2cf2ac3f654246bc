//! Analytical toolkit for MoE hardware/model co-design.
//!
//! * [`lowprec`]: FP8 minifloat emulation, fine-grained scaled quantization,
//!   truncated FP22 tensor-core accumulation and the logarithmic block codec.
//! * [`memcalc`]: KV-cache bytes per token and training FLOPs per token.
//! * [`epmodel`]: expert-parallel all-to-all timing, TPOT bounds,
//!   node-limited routing and the multi-token-prediction speedup model.
//! * [`topology`]: fat-tree family construction, counting, linear cost model
//!   and hop-latency estimation.

pub mod epmodel;
pub mod lowprec;
pub mod memcalc;
pub mod topology;

/// One gigabyte as used by every bandwidth figure in this crate (10^9 bytes).
pub const GB: f64 = 1e9;
