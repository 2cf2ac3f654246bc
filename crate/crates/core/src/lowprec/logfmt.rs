//! Logarithmic block format (LogFMT-nBit).
//!
//! A block of values shares two parameters: the natural log of its smallest
//! non-zero magnitude and a step. Each element becomes a sign bit plus an
//! `n-1` bit magnitude code `K`:
//!
//! - `K = 0` is exact zero,
//! - `K in 1..=2^(n-1)-1` decodes to `exp(min_log + step * (K - 1))`,
//!
//! so the block minimum encodes as `S.00..01` and the block maximum as
//! `S.11..11`, with `step = (max_log - min_log) / (2^(n-1) - 2)`.
//!
//! Rounding happens in linear space: the decision threshold between two
//! neighbouring codes is the arithmetic mean of their decoded values, not
//! the geometric one. The dynamic range of a block is capped at 2^32;
//! anything smaller than `max / 2^32` lands on the first grid point.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::LowPrecError;

/// Activation tile length used by the communication path.
pub const LOGFMT_TILE: usize = 128;
/// Cap on `log2(max / min)` inside one block.
pub const MAX_RANGE_LOG2: f64 = 32.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum LogRounding {
    /// Deterministic round-to-nearest at linear-space midpoints.
    Nearest,
    /// Round up with probability proportional to the linear distance from
    /// the lower grid point, which makes the expected decoded value equal
    /// to the input inside the grid range.
    Stochastic { seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogFmtBlock {
    pub n_bits: u32,
    pub min_log: f64,
    pub step: f64,
    pub codes: Vec<u32>,
}

impl LogFmtBlock {
    pub fn encode(values: &[f64], n_bits: u32) -> Result<Self, LowPrecError> {
        Self::encode_with(values, n_bits, LogRounding::Nearest)
    }

    pub fn encode_with(values: &[f64], n_bits: u32, rounding: LogRounding) -> Result<Self, LowPrecError> {
        if !(2..=16).contains(&n_bits) {
            return Err(LowPrecError::InvalidBitWidth(n_bits));
        }
        if values.is_empty() {
            return Err(LowPrecError::EmptyBlock);
        }
        if let Some(&bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(LowPrecError::NonFiniteInput(bad));
        }

        let mut logs = values.iter().filter(|v| **v != 0.0).map(|v| v.abs().ln());
        let Some(first) = logs.next() else {
            let codes = values.iter().map(|v| sign_bit(n_bits, *v)).collect();
            return Ok(LogFmtBlock { n_bits, min_log: 0.0, step: 0.0, codes });
        };
        let (lo, max_log) = logs.fold((first, first), |(lo, hi), l| (lo.min(l), hi.max(l)));
        let levels = max_code(n_bits);
        let (min_log, step) = if levels == 1 {
            // a single magnitude level sits at the block maximum
            (max_log, 0.0)
        } else {
            let min_log = lo.max(max_log - MAX_RANGE_LOG2 * std::f64::consts::LN_2);
            (min_log, (max_log - min_log) / (levels - 1) as f64)
        };

        let mut block = LogFmtBlock {
            n_bits,
            min_log,
            step,
            codes: Vec::new(),
        };
        block.codes = block.quantize(values, rounding);
        Ok(block)
    }

    /// Largest magnitude code, `2^(n-1) - 1`.
    pub fn max_code(&self) -> u32 {
        max_code(self.n_bits)
    }

    /// Log of the largest representable magnitude.
    pub fn max_log(&self) -> f64 {
        self.min_log + self.step * (self.max_code() - 1) as f64
    }

    /// Magnitude represented by code `k >= 1`.
    pub fn grid_value(&self, k: u32) -> f64 {
        debug_assert!(k >= 1 && k <= self.max_code());
        (self.min_log + self.step * (k - 1) as f64).exp()
    }

    /// Encode `values` on this block's existing grid.
    ///
    /// Every value returned by [`LogFmtBlock::grid_value`] maps back to its
    /// own code under [`LogRounding::Nearest`].
    pub fn quantize(&self, values: &[f64], rounding: LogRounding) -> Vec<u32> {
        let mut rng = match rounding {
            LogRounding::Stochastic { seed } => Some(ChaCha8Rng::seed_from_u64(seed)),
            LogRounding::Nearest => None,
        };
        values
            .iter()
            .map(|&v| {
                let magnitude = if v == 0.0 { 0 } else { self.magnitude_code(v.abs(), rng.as_mut()) };
                sign_bit(self.n_bits, v) | magnitude
            })
            .collect()
    }

    fn magnitude_code(&self, a: f64, rng: Option<&mut ChaCha8Rng>) -> u32 {
        let top = self.max_code();
        if self.step == 0.0 || top == 1 {
            return 1;
        }
        let t = (a.ln() - self.min_log) / self.step;
        if t <= 0.0 {
            return 1;
        }
        if t >= (top - 1) as f64 {
            return top;
        }
        // bracket [lower, lower + 1]; the log-domain estimate can be off by
        // one near a grid point, so check the bracket in linear space
        let mut lower = t.floor() as u32 + 1;
        if a < self.grid_value(lower) && lower > 1 {
            lower -= 1;
        } else if lower < top && a >= self.grid_value(lower + 1) {
            lower += 1;
        }
        if lower >= top {
            return top;
        }
        let lo = self.grid_value(lower);
        let hi = self.grid_value(lower + 1);
        if a <= lo {
            return lower;
        }
        match rng {
            None => {
                if a < 0.5 * (lo + hi) {
                    lower
                } else {
                    lower + 1
                }
            }
            Some(rng) => {
                let p_up = (a - lo) / (hi - lo);
                if rng.random::<f64>() < p_up {
                    lower + 1
                } else {
                    lower
                }
            }
        }
    }

    pub fn decode(&self) -> Vec<f64> {
        let sign = 1u32 << (self.n_bits - 1);
        self.codes
            .iter()
            .map(|&c| {
                let k = c & (sign - 1);
                let magnitude = if k == 0 { 0.0 } else { self.grid_value(k) };
                if c & sign != 0 {
                    -magnitude
                } else {
                    magnitude
                }
            })
            .collect()
    }
}

fn max_code(n_bits: u32) -> u32 {
    (1u32 << (n_bits - 1)) - 1
}

fn sign_bit(n_bits: u32, v: f64) -> u32 {
    if v.is_sign_negative() {
        1 << (n_bits - 1)
    } else {
        0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, LogNormal};
    use std::f64::consts::E;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn all_zero_block() {
        let b = LogFmtBlock::encode(&[0.0; 128], 8).unwrap();
        assert_eq!(b.step, 0.0);
        assert_eq!(b.min_log, 0.0);
        assert!(b.codes.iter().all(|&c| c & 0x7f == 0));
        assert!(b.decode().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn errors() {
        assert_eq!(LogFmtBlock::encode(&[], 8).unwrap_err(), LowPrecError::EmptyBlock);
        assert_eq!(LogFmtBlock::encode(&[1.0], 1).unwrap_err(), LowPrecError::InvalidBitWidth(1));
        assert_eq!(LogFmtBlock::encode(&[1.0], 17).unwrap_err(), LowPrecError::InvalidBitWidth(17));
        assert!(matches!(
            LogFmtBlock::encode(&[1.0, f64::INFINITY], 8),
            Err(LowPrecError::NonFiniteInput(_))
        ));
    }

    #[test]
    fn endpoints_take_extreme_codes() {
        let mut v = vec![0.3; 128];
        v[5] = -0.01;
        v[90] = 7.5;
        v[91] = 0.0;
        for n in 3..=16 {
            let b = LogFmtBlock::encode(&v, n).unwrap();
            let sign = 1 << (n - 1);
            assert_eq!(b.codes[5], sign | 1, "min -> S.00..01");
            assert_eq!(b.codes[90], b.max_code(), "max -> S.11..11");
            assert_eq!(b.codes[91], 0);
            let d = b.decode();
            assert!(rel(d[5], -0.01) < 1e-14);
            assert!(rel(d[90], 7.5) < 1e-14);
            assert_eq!(d[91], 0.0);
        }
    }

    #[test]
    fn one_and_e() {
        for n in 3..=12 {
            let b = LogFmtBlock::encode(&[1.0, E], n).unwrap();
            assert_eq!(b.min_log, 0.0);
            assert!((b.step - 1.0 / ((1u32 << (n - 1)) - 2) as f64).abs() < 1e-15);
            let d = b.decode();
            assert_eq!(d[0], 1.0);
            assert!(rel(d[1], E) < 1e-15);
        }
    }

    #[test]
    fn equal_magnitudes_have_zero_step() {
        let b = LogFmtBlock::encode(&[2.0, -2.0, 0.0, 2.0], 8).unwrap();
        assert_eq!(b.step, 0.0);
        let d = b.decode();
        assert!(rel(d[0], 2.0) < 1e-15 && rel(d[1], -2.0) < 1e-15 && d[2] == 0.0);
    }

    #[test]
    fn two_bit_width_keeps_one_level() {
        let b = LogFmtBlock::encode(&[0.5, -4.0, 0.0], 2).unwrap();
        assert_eq!(b.codes, vec![0b01, 0b11, 0b00]);
        assert!(rel(b.decode()[0], 4.0) < 1e-15);
    }

    #[test]
    fn linear_space_midpoint_threshold() {
        let b = LogFmtBlock::encode(&[1.0, E], 3).unwrap();
        // grid: 1, e^0.5, e
        let (g1, g2) = (b.grid_value(1), b.grid_value(2));
        let mid = 0.5 * (g1 + g2);
        let geo = (g1 * g2).sqrt();
        assert!(geo < mid);
        // between geometric and arithmetic midpoint: linear rounding goes down
        let x = 0.5 * (geo + mid);
        assert_eq!(b.quantize(&[x], LogRounding::Nearest), vec![1]);
        assert_eq!(b.quantize(&[mid * (1.0 + 1e-12)], LogRounding::Nearest), vec![2]);
    }

    #[test]
    fn dynamic_range_is_clamped() {
        let mut v = vec![1.0; 128];
        v[0] = 2f64.powi(-40);
        v[1] = 2f64.powi(-33);
        v[2] = 2f64.powi(-31);
        let b = LogFmtBlock::encode(&v, 8).unwrap();
        let floor = 2f64.powi(-32);
        assert!(rel(b.min_log.exp(), floor) < 1e-12);
        assert_eq!(b.codes[0], 1);
        assert_eq!(b.codes[1], 1);
        assert!(b.codes[2] > 1);
        let d = b.decode();
        assert!(rel(d[0], floor) < 1e-12);
        let range = d.iter().cloned().fold(0.0, f64::max) / d.iter().cloned().fold(f64::MAX, f64::min);
        assert!(range <= 2f64.powi(32) * (1.0 + 1e-12));
    }

    #[test]
    fn deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let dist = LogNormal::new(0.0, 1.5).unwrap();
        let v: Vec<f64> = (0..128).map(|_| dist.sample(&mut rng)).collect();
        assert_eq!(LogFmtBlock::encode(&v, 8).unwrap(), LogFmtBlock::encode(&v, 8).unwrap());
        let s = LogRounding::Stochastic { seed: 4 };
        assert_eq!(
            LogFmtBlock::encode_with(&v, 8, s).unwrap(),
            LogFmtBlock::encode_with(&v, 8, s).unwrap()
        );
    }

    #[test]
    fn stochastic_stays_in_bracket() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let dist = LogNormal::new(0.0, 1.0).unwrap();
        let v: Vec<f64> = (0..128).map(|_| dist.sample(&mut rng)).collect();
        let near = LogFmtBlock::encode(&v, 6).unwrap();
        let sto = LogFmtBlock::encode_with(&v, 6, LogRounding::Stochastic { seed: 1 }).unwrap();
        for (a, b) in near.codes.iter().zip(&sto.codes) {
            assert!(a.abs_diff(*b) <= 1);
        }
    }

    #[test]
    fn nearest_matches_brute_force_grid_search() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let dist = LogNormal::new(0.0, 2.0).unwrap();
        for n in [4, 6, 8] {
            for _ in 0..20 {
                let v: Vec<f64> = (0..128).map(|_| dist.sample(&mut rng)).collect();
                let b = LogFmtBlock::encode(&v, n).unwrap();
                let grid: Vec<f64> = (1..=b.max_code()).map(|k| b.grid_value(k)).collect();
                for (x, &c) in v.iter().zip(&b.codes) {
                    let best = grid.iter().map(|g| (g - x).abs()).fold(f64::INFINITY, f64::min);
                    assert_eq!((b.grid_value(c) - x).abs(), best);
                }
            }
        }
    }
}
