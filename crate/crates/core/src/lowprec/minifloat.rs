//! Parametric sign/exponent/mantissa minifloats.
//!
//! Two special-value conventions are supported:
//!
//! - [`SpecialEncoding::IeeeLike`]: the all-ones exponent field is reserved
//!   for infinities (zero mantissa) and NaNs. E5M2 uses this.
//! - [`SpecialEncoding::FiniteOnly`]: no infinities; only the all-ones
//!   exponent with all-ones mantissa is NaN. Overflow saturates. E4M3 uses
//!   this, which is what gives it a max of 448 instead of 240.

use serde::{Deserialize, Serialize};

use super::{exponent_of, pow2, LowPrecError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpecialEncoding {
    IeeeLike,
    FiniteOnly,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FloatFormat {
    exponent_bits: u32,
    mantissa_bits: u32,
    bias: i32,
    special: SpecialEncoding,
    max_finite: f64,
}

impl FloatFormat {
    /// Exponent widths above this would not fit binary64 emulation.
    pub const MAX_EXPONENT_BITS: u32 = 10;

    pub fn new(
        exponent_bits: u32,
        mantissa_bits: u32,
        bias: i32,
        special: SpecialEncoding,
    ) -> Result<Self, LowPrecError> {
        if exponent_bits < 2 {
            return Err(LowPrecError::InvalidFormat(format!(
                "exponent_bits must be >= 2, got {exponent_bits}"
            )));
        }
        if exponent_bits > Self::MAX_EXPONENT_BITS {
            return Err(LowPrecError::InvalidFormat(format!(
                "exponent_bits must be <= {}, got {exponent_bits}",
                Self::MAX_EXPONENT_BITS
            )));
        }
        if exponent_bits + mantissa_bits + 1 > 32 {
            return Err(LowPrecError::InvalidFormat(format!(
                "total width {} exceeds 32 bits",
                exponent_bits + mantissa_bits + 1
            )));
        }
        let field_max = (1i32 << exponent_bits) - 1;
        if bias < 1 || bias >= field_max {
            return Err(LowPrecError::InvalidFormat(format!(
                "bias {bias} outside 1..{field_max}"
            )));
        }
        let mut fmt = FloatFormat {
            exponent_bits,
            mantissa_bits,
            bias,
            special,
            max_finite: 0.0,
        };
        fmt.max_finite = fmt.decode(fmt.max_finite_code());
        Ok(fmt)
    }

    /// Format with the conventional bias `2^(e-1) - 1`.
    pub fn with_default_bias(
        exponent_bits: u32,
        mantissa_bits: u32,
        special: SpecialEncoding,
    ) -> Result<Self, LowPrecError> {
        // out-of-range widths are rejected by `new`; keep the shift in range
        let shift = exponent_bits.clamp(2, Self::MAX_EXPONENT_BITS) - 1;
        Self::new(exponent_bits, mantissa_bits, (1i32 << shift) - 1, special)
    }

    /// OCP FP8 E4M3 (finite-only, max 448).
    pub fn e4m3() -> Self {
        Self::new(4, 3, 7, SpecialEncoding::FiniteOnly).expect("E4M3 is valid")
    }

    /// OCP FP8 E5M2 (IEEE-like, max 57344).
    pub fn e5m2() -> Self {
        Self::new(5, 2, 15, SpecialEncoding::IeeeLike).expect("E5M2 is valid")
    }

    pub fn exponent_bits(&self) -> u32 {
        self.exponent_bits
    }

    pub fn mantissa_bits(&self) -> u32 {
        self.mantissa_bits
    }

    pub fn bias(&self) -> i32 {
        self.bias
    }

    pub fn special(&self) -> SpecialEncoding {
        self.special
    }

    /// Total codeword width in bits, sign included.
    pub fn width(&self) -> u32 {
        1 + self.exponent_bits + self.mantissa_bits
    }

    /// Number of distinct codewords.
    pub fn code_count(&self) -> u64 {
        1u64 << self.width()
    }

    pub fn max_finite(&self) -> f64 {
        self.max_finite
    }

    pub fn min_normal(&self) -> f64 {
        pow2(self.min_exponent())
    }

    pub fn min_subnormal(&self) -> f64 {
        pow2(self.min_exponent() - self.mantissa_bits as i32)
    }

    fn min_exponent(&self) -> i32 {
        1 - self.bias
    }

    fn field_all_ones(&self) -> u32 {
        (1u32 << self.exponent_bits) - 1
    }

    fn mantissa_mask(&self) -> u32 {
        (1u32 << self.mantissa_bits) - 1
    }

    fn sign_bit(&self) -> u32 {
        1u32 << (self.exponent_bits + self.mantissa_bits)
    }

    fn assemble(&self, sign: bool, field: u32, mantissa: u32) -> u32 {
        (if sign { self.sign_bit() } else { 0 }) | (field << self.mantissa_bits) | mantissa
    }

    fn max_finite_code(&self) -> u32 {
        match self.special {
            SpecialEncoding::IeeeLike => {
                self.assemble(false, self.field_all_ones() - 1, self.mantissa_mask())
            }
            SpecialEncoding::FiniteOnly if self.mantissa_bits > 0 => {
                self.assemble(false, self.field_all_ones(), self.mantissa_mask() - 1)
            }
            SpecialEncoding::FiniteOnly => self.assemble(false, self.field_all_ones() - 1, 0),
        }
    }

    /// The NaN every NaN input encodes to: positive sign, all-ones exponent,
    /// all-ones mantissa for finite-only formats and quiet-bit-only for
    /// IEEE-like ones.
    pub fn canonical_nan(&self) -> u32 {
        match self.special {
            SpecialEncoding::FiniteOnly => self.assemble(false, self.field_all_ones(), self.mantissa_mask()),
            SpecialEncoding::IeeeLike => {
                let quiet = if self.mantissa_bits > 0 { 1 << (self.mantissa_bits - 1) } else { 0 };
                self.assemble(false, self.field_all_ones(), quiet.max(1))
            }
        }
    }

    pub fn is_nan_code(&self, code: u32) -> bool {
        let field = (code >> self.mantissa_bits) & self.field_all_ones();
        let mantissa = code & self.mantissa_mask();
        field == self.field_all_ones()
            && match self.special {
                SpecialEncoding::IeeeLike => mantissa != 0,
                SpecialEncoding::FiniteOnly => mantissa == self.mantissa_mask(),
            }
    }

    /// Round-to-nearest-even encoding.
    ///
    /// Overflow saturates to the largest finite value for finite-only formats
    /// and becomes infinity for IEEE-like ones. Signed zero is preserved.
    pub fn encode(&self, x: f64) -> u32 {
        if x.is_nan() {
            return self.canonical_nan();
        }
        let negative = x.is_sign_negative();
        let overflow = || match self.special {
            SpecialEncoding::IeeeLike => self.assemble(negative, self.field_all_ones(), 0),
            SpecialEncoding::FiniteOnly => self.max_finite_code() | if negative { self.sign_bit() } else { 0 },
        };
        let a = x.abs();
        if a.is_infinite() {
            return overflow();
        }
        if a == 0.0 {
            return self.assemble(negative, 0, 0);
        }

        let m = self.mantissa_bits as i32;
        let mut e = exponent_of(a).max(self.min_exponent());
        // a / quantum < 2^(m+1); the division is by a power of two and exact.
        let mut n = (a / pow2(e - m)).round_ties_even() as u64;
        if n == 1u64 << (m + 1) {
            n >>= 1;
            e += 1;
        }
        if n == 0 {
            return self.assemble(negative, 0, 0);
        }
        let magnitude = n as f64 * pow2(e - m);
        if magnitude > self.max_finite {
            return overflow();
        }
        let (field, mantissa) = if n < 1u64 << m {
            (0, n as u32)
        } else {
            ((e + self.bias) as u32, (n - (1u64 << m)) as u32)
        };
        self.assemble(negative, field, mantissa)
    }

    /// Exact value of a codeword. Bits above the format width are ignored.
    pub fn decode(&self, code: u32) -> f64 {
        let code = code & (self.sign_bit() | (self.sign_bit() - 1));
        let negative = code & self.sign_bit() != 0;
        let field = (code >> self.mantissa_bits) & self.field_all_ones();
        let mantissa = code & self.mantissa_mask();
        let m = self.mantissa_bits as i32;

        let magnitude = if field == self.field_all_ones() && self.special == SpecialEncoding::IeeeLike {
            if mantissa == 0 {
                f64::INFINITY
            } else {
                return f64::NAN;
            }
        } else if field == self.field_all_ones() && mantissa == self.mantissa_mask() {
            // finite-only NaN
            return f64::NAN;
        } else if field == 0 {
            mantissa as f64 * pow2(self.min_exponent() - m)
        } else {
            ((1u64 << m) + mantissa as u64) as f64 * pow2(field as i32 - self.bias - m)
        };
        if negative {
            -magnitude
        } else {
            magnitude
        }
    }

    /// `decode(encode(x))`.
    pub fn round(&self, x: f64) -> f64 {
        self.decode(self.encode(x))
    }
}
