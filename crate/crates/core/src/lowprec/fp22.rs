//! Truncated FP8 tensor-core accumulation.
//!
//! Hopper FP8 MMA aligns each group of 32 products to the largest product
//! exponent, keeps the top 13 fraction bits of every aligned significand
//! (bits below are dropped, not rounded), sums, and stores the result in a
//! 22-bit register: 1 sign, 8 exponent, 13 mantissa bits. Every 128
//! elements along k the partial sum is promoted to full precision, scaled by
//! the activation-tile and weight-block scales, and added to an `f64`
//! accumulator.

use super::tile::{check_multiple, TILE_EDGE};
use super::{exponent_of, pow2, LowPrecError, QuantizedMatrix, TileShape};

/// Products aligned together per tensor-core step.
pub const GROUP_SIZE: usize = 32;
/// Fraction bits kept after alignment, and the FP22 mantissa width.
pub const FP22_MANTISSA_BITS: u32 = 13;
/// Elements along k between promotions to full precision.
pub const PROMOTION_INTERVAL: usize = TILE_EDGE;

const EXP_BITS: u32 = 8;
const BIAS: i32 = 127;
const EXP_ALL_ONES: u32 = (1 << EXP_BITS) - 1;
const MANT_MASK: u32 = (1 << FP22_MANTISSA_BITS) - 1;

/// A 22-bit accumulator register value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Fp22State {
    bits: u32,
}

impl Fp22State {
    pub const ZERO: Fp22State = Fp22State { bits: 0 };

    pub fn from_bits(bits: u32) -> Self {
        Fp22State { bits: bits & 0x3f_ffff }
    }

    pub fn to_bits(self) -> u32 {
        self.bits
    }

    pub fn sign(self) -> bool {
        self.bits >> 21 != 0
    }

    /// Biased 8-bit exponent field.
    pub fn exponent(self) -> u32 {
        (self.bits >> FP22_MANTISSA_BITS) & EXP_ALL_ONES
    }

    pub fn mantissa(self) -> u32 {
        self.bits & MANT_MASK
    }

    fn assemble(sign: bool, exponent: u32, mantissa: u32) -> Self {
        Fp22State {
            bits: (sign as u32) << 21 | exponent << FP22_MANTISSA_BITS | mantissa,
        }
    }

    /// Store `x`, truncating toward zero into the 13-bit mantissa.
    pub fn truncate_from(x: f64) -> Self {
        let sign = x.is_sign_negative();
        if x.is_nan() {
            return Self::assemble(false, EXP_ALL_ONES, 1 << (FP22_MANTISSA_BITS - 1));
        }
        let a = x.abs();
        if a == 0.0 {
            return Self::assemble(sign, 0, 0);
        }
        if a.is_infinite() {
            return Self::assemble(sign, EXP_ALL_ONES, 0);
        }
        let m = FP22_MANTISSA_BITS as i32;
        let e = exponent_of(a);
        if e > BIAS {
            return Self::assemble(sign, EXP_ALL_ONES, 0);
        }
        if e < 1 - BIAS {
            let n = (a / pow2(1 - BIAS - m)).trunc() as u32;
            return Self::assemble(sign, 0, n);
        }
        let n = (a / pow2(e - m)).trunc() as u32;
        Self::assemble(sign, (e + BIAS) as u32, n - (1 << m))
    }

    pub fn to_f64(self) -> f64 {
        let m = FP22_MANTISSA_BITS as i32;
        let exp = self.exponent();
        let mant = self.mantissa();
        let magnitude = if exp == EXP_ALL_ONES {
            if mant == 0 {
                f64::INFINITY
            } else {
                return f64::NAN;
            }
        } else if exp == 0 {
            mant as f64 * pow2(1 - BIAS - m)
        } else {
            ((1u32 << m) + mant) as f64 * pow2(exp as i32 - BIAS - m)
        };
        if self.sign() {
            -magnitude
        } else {
            magnitude
        }
    }
}

/// Largest `floor(log2|p|)` over the non-zero products.
pub(crate) fn max_exponent(products: &[f64]) -> Option<i32> {
    products.iter().filter(|p| **p != 0.0).map(|&p| exponent_of(p)).max()
}

/// Sum one group of 32 exact products the way the tensor core does.
///
/// Each product is right-shifted to the group's maximum exponent and cut to
/// 13 fraction bits, the aligned values are summed exactly, and the sum is
/// truncated into FP22.
pub fn accumulate_group(products: &[f64; GROUP_SIZE]) -> Fp22State {
    let Some(e_max) = max_exponent(products) else {
        return Fp22State::ZERO;
    };
    let quantum = pow2(e_max - FP22_MANTISSA_BITS as i32);
    // every aligned term is an integer below 2^14 in units of `quantum`
    let units: i64 = products.iter().map(|&p| (p / quantum).trunc() as i64).sum();
    Fp22State::truncate_from(units as f64 * quantum)
}

/// Output of [`simulated_gemm`].
#[derive(Debug, Clone, PartialEq)]
pub struct GemmReport {
    pub m: usize,
    pub n: usize,
    pub k: usize,
    /// Row-major `m x n` result of the emulated tensor-core path.
    pub result: Vec<f64>,
    /// Row-major `m x n` product of the same quantized inputs in wide precision.
    pub reference: Vec<f64>,
    pub max_abs_error: f64,
    pub mean_abs_error: f64,
    /// Largest `|result - reference| / bound` over all elements, where the
    /// bound composes the per-group truncation, FP22 store and chunk
    /// accumulation errors. Anything above 1 is a model violation.
    pub max_bound_ratio: f64,
}

/// `C = A * B` with 1x128-tile activations `A` (`m x k`) and 128x128-block
/// weights `B` (`k x n`).
///
/// Within every 128-long k chunk the four 32-product groups are combined in
/// an FP22 register (each add truncates). The chunk result is then promoted
/// and multiplied by the A-tile scale and the B-block scale, in that order.
pub fn simulated_gemm(a: &QuantizedMatrix, b: &QuantizedMatrix) -> Result<GemmReport, LowPrecError> {
    if a.cols != b.rows {
        return Err(LowPrecError::InnerDimMismatch { left: a.cols, right: b.rows });
    }
    check_multiple("m", a.rows)?;
    check_multiple("k", a.cols)?;
    check_multiple("n", b.cols)?;
    if a.shape != TileShape::Tile1x128 || b.shape != TileShape::Block128x128 {
        return Err(LowPrecError::InvalidFormat(
            "expected 1x128 activation tiles and 128x128 weight blocks".into(),
        ));
    }
    let (m, k, n) = (a.rows, a.cols, b.cols);

    let a_raw: Vec<f64> = a.codes.iter().map(|&c| a.format.decode(c)).collect();
    // column-major copy of B so each output walks contiguous memory
    let mut b_raw_t = vec![0.0; k * n];
    for r in 0..k {
        for c in 0..n {
            b_raw_t[c * k + r] = b.format.decode(b.codes[r * n + c]);
        }
    }

    let mut result = vec![0.0; m * n];
    let mut reference = vec![0.0; m * n];
    let mut ratio = 0.0f64;
    let mut products = [0.0f64; GROUP_SIZE];
    for i in 0..m {
        let row = &a_raw[i * k..(i + 1) * k];
        for j in 0..n {
            let col = &b_raw_t[j * k..(j + 1) * k];
            let mut acc = 0.0f64;
            let mut exact = 0.0f64;
            let mut bound = 0.0f64;
            for chunk in 0..k / PROMOTION_INTERVAL {
                let base = chunk * PROMOTION_INTERVAL;
                let mut partial = Fp22State::ZERO;
                let mut chunk_exact = 0.0f64;
                let mut chunk_abs = 0.0f64;
                let mut chunk_bound = 0.0f64;
                for g in 0..PROMOTION_INTERVAL / GROUP_SIZE {
                    let off = base + g * GROUP_SIZE;
                    for t in 0..GROUP_SIZE {
                        products[t] = row[off + t] * col[off + t];
                    }
                    let delta = accumulate_group(&products);
                    partial = Fp22State::truncate_from(partial.to_f64() + delta.to_f64());

                    let group_abs: f64 = products.iter().map(|p| p.abs()).sum();
                    chunk_exact += products.iter().sum::<f64>();
                    chunk_abs += group_abs;
                    if let Some(e) = max_exponent(&products) {
                        chunk_bound += GROUP_SIZE as f64 * pow2(e - FP22_MANTISSA_BITS as i32)
                            + ulp22_bound(group_abs)
                            + ulp22_bound(chunk_abs);
                    }
                }
                let (sa, sb) = (a.scale_at(i, base), b.scale_at(base, j));
                acc += partial.to_f64() * sa * sb;
                exact += chunk_exact * sa * sb;
                bound += chunk_bound * sa * sb;
            }
            result[i * n + j] = acc;
            reference[i * n + j] = exact;
            // slack for the f64 reference sum and the scale multiplications
            let bound = bound + 8.0 * f64::EPSILON * exact.abs().max(acc.abs());
            let err = (acc - exact).abs();
            if err > 0.0 {
                ratio = ratio.max(err / bound);
            }
        }
    }

    let errors = result.iter().zip(&reference).map(|(r, e)| (r - e).abs());
    let (max_abs_error, sum) = errors.fold((0.0f64, 0.0f64), |(mx, s), e| (mx.max(e), s + e));
    Ok(GemmReport {
        m,
        n,
        k,
        mean_abs_error: sum / (m * n) as f64,
        max_abs_error,
        result,
        reference,
        max_bound_ratio: ratio,
    })
}

/// Upper bound on the FP22 truncation error of any value with magnitude at
/// most `magnitude`.
fn ulp22_bound(magnitude: f64) -> f64 {
    if magnitude == 0.0 {
        0.0
    } else {
        pow2(exponent_of(magnitude) - FP22_MANTISSA_BITS as i32)
    }
}
