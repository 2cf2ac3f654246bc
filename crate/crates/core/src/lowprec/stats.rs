//! Monte-Carlo quantization error statistics for FP8 tile quantization and
//! LogFMT, on seeded synthetic activation blocks.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, LogNormal, Normal, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{simulated_gemm, FloatFormat, GemmReport, LogFmtBlock, LogRounding, LowPrecError, QuantizedMatrix, QuantizedTile, TileShape};

/// Values per Monte-Carlo block.
pub const STATS_BLOCK: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Distribution {
    Uniform { low: f64, high: f64 },
    Normal { mean: f64, std_dev: f64 },
    /// `exp(N(mu, sigma))` magnitudes, with a fair random sign unless
    /// `positive` is set.
    LogNormal {
        mu: f64,
        sigma: f64,
        #[serde(default)]
        positive: bool,
    },
}

impl Distribution {
    fn validate(&self) -> Result<(), LowPrecError> {
        let ok = match *self {
            Distribution::Uniform { low, high } => low.is_finite() && high.is_finite() && low < high,
            Distribution::Normal { mean, std_dev } => mean.is_finite() && std_dev.is_finite() && std_dev > 0.0,
            Distribution::LogNormal { mu, sigma, .. } => mu.is_finite() && sigma.is_finite() && sigma > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(LowPrecError::InvalidDistribution(format!("{self:?}")))
        }
    }

    fn fill(&self, rng: &mut ChaCha8Rng, out: &mut [f64]) {
        match *self {
            Distribution::Uniform { low, high } => {
                let d = Uniform::new(low, high).expect("validated");
                out.iter_mut().for_each(|v| *v = d.sample(rng));
            }
            Distribution::Normal { mean, std_dev } => {
                let d = Normal::new(mean, std_dev).expect("validated");
                out.iter_mut().for_each(|v| *v = d.sample(rng));
            }
            Distribution::LogNormal { mu, sigma, positive } => {
                let d = LogNormal::new(mu, sigma).expect("validated");
                for v in out.iter_mut() {
                    let m = d.sample(rng);
                    *v = if positive || rng.random::<bool>() { m } else { -m };
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "codec")]
pub enum Codec {
    /// 1x128 tile-scaled E4M3.
    E4m3,
    /// 1x128 tile-scaled E5M2.
    E5m2,
    LogFmt {
        n_bits: u32,
        #[serde(default)]
        stochastic: bool,
    },
}

impl Codec {
    pub fn label(&self) -> String {
        match *self {
            Codec::E4m3 => "E4M3".to_string(),
            Codec::E5m2 => "E5M2".to_string(),
            Codec::LogFmt { n_bits, stochastic: false } => format!("LogFMT-{n_bits}"),
            Codec::LogFmt { n_bits, stochastic: true } => format!("LogFMT-{n_bits}-SR"),
        }
    }

    /// Quantize and dequantize one block.
    fn round_trip(&self, values: &[f64], rounding_seed: u64) -> Result<Vec<f64>, LowPrecError> {
        match *self {
            Codec::E4m3 => Ok(QuantizedTile::quantize(values, TileShape::Tile1x128, &FloatFormat::e4m3())?.dequantize()),
            Codec::E5m2 => Ok(QuantizedTile::quantize(values, TileShape::Tile1x128, &FloatFormat::e5m2())?.dequantize()),
            Codec::LogFmt { n_bits, stochastic } => {
                let rounding = if stochastic {
                    LogRounding::Stochastic { seed: rounding_seed }
                } else {
                    LogRounding::Nearest
                };
                Ok(LogFmtBlock::encode_with(values, n_bits, rounding)?.decode())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorStats {
    pub codec: String,
    pub seed: u64,
    pub blocks: usize,
    pub samples: usize,
    pub mean_abs_error: f64,
    /// Mean of `|decoded - x| / |x|` over non-zero `x`.
    pub mean_rel_error: f64,
    pub max_rel_error: f64,
    /// Mean of `decoded - x`.
    pub bias: f64,
    /// Standard error of `bias`.
    pub bias_std_error: f64,
}

#[derive(Default, Clone, Copy)]
struct Partial {
    n: usize,
    nonzero: usize,
    abs: f64,
    rel: f64,
    max_rel: f64,
    sum: f64,
    sum_sq: f64,
}

impl Partial {
    fn merge(self, o: Partial) -> Partial {
        Partial {
            n: self.n + o.n,
            nonzero: self.nonzero + o.nonzero,
            abs: self.abs + o.abs,
            rel: self.rel + o.rel,
            max_rel: self.max_rel.max(o.max_rel),
            sum: self.sum + o.sum,
            sum_sq: self.sum_sq + o.sum_sq,
        }
    }
}

/// Quantize `blocks` independent blocks of [`STATS_BLOCK`] samples.
///
/// Block `b` draws from its own ChaCha stream (`seed`, stream `b`), so the
/// result does not depend on how blocks are spread over threads.
pub fn format_error_stats(
    distribution: &Distribution,
    codec: &Codec,
    blocks: usize,
    seed: u64,
) -> Result<ErrorStats, LowPrecError> {
    distribution.validate()?;
    if blocks == 0 {
        return Err(LowPrecError::EmptyBlock);
    }
    let partials = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b as u64);
            let mut values = [0.0f64; STATS_BLOCK];
            distribution.fill(&mut rng, &mut values);
            let decoded = codec.round_trip(&values, rng.next_u64())?;
            let mut p = Partial::default();
            for (&x, &y) in values.iter().zip(&decoded) {
                let err = y - x;
                p.n += 1;
                p.abs += err.abs();
                p.sum += err;
                p.sum_sq += err * err;
                if x != 0.0 {
                    let r = err.abs() / x.abs();
                    p.nonzero += 1;
                    p.rel += r;
                    p.max_rel = p.max_rel.max(r);
                }
            }
            Ok(p)
        })
        .collect::<Result<Vec<_>, LowPrecError>>()?;
    // sequential fold keeps the floating-point sums order-independent of threads
    let t = partials.into_iter().fold(Partial::default(), Partial::merge);

    let n = t.n as f64;
    let bias = t.sum / n;
    let variance = if t.n > 1 { (t.sum_sq - n * bias * bias).max(0.0) / (n - 1.0) } else { 0.0 };
    Ok(ErrorStats {
        codec: codec.label(),
        seed,
        blocks,
        samples: t.n,
        mean_abs_error: t.abs / n,
        mean_rel_error: if t.nonzero > 0 { t.rel / t.nonzero as f64 } else { 0.0 },
        max_rel_error: t.max_rel,
        bias,
        bias_std_error: (variance / n).sqrt(),
    })
}

/// Emulated E4M3 GEMM on seeded random inputs: `A` (`m x k`) drawn from
/// ChaCha stream 0 and `B` (`k x n`) from stream 1 of `seed`.
pub fn seeded_gemm(
    m: usize,
    n: usize,
    k: usize,
    distribution: &Distribution,
    seed: u64,
) -> Result<GemmReport, LowPrecError> {
    distribution.validate()?;
    let draw = |len: usize, stream: u64| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let mut v = vec![0.0; len];
        distribution.fill(&mut rng, &mut v);
        v
    };
    let fmt = FloatFormat::e4m3();
    let a = QuantizedMatrix::quantize(&draw(m * k, 0), m, k, TileShape::Tile1x128, &fmt)?;
    let b = QuantizedMatrix::quantize(&draw(k * n, 1), k, n, TileShape::Block128x128, &fmt)?;
    simulated_gemm(&a, &b)
}
