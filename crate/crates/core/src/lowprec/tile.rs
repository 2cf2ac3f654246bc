//! Fine-grained scaled quantization: one scale per 1x128 activation tile or
//! per 128x128 weight block.

use serde::{Deserialize, Serialize};

use super::{FloatFormat, LowPrecError};

/// Edge length of a quantization tile.
pub const TILE_EDGE: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TileShape {
    /// One row of 128 activations.
    Tile1x128,
    /// A 128x128 weight block, row-major.
    Block128x128,
}

impl TileShape {
    /// Elements per tile.
    pub fn elements(self) -> usize {
        match self {
            TileShape::Tile1x128 => TILE_EDGE,
            TileShape::Block128x128 => TILE_EDGE * TILE_EDGE,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedTile {
    /// Dequantization multiplier.
    pub scale: f64,
    pub codes: Vec<u32>,
    pub shape: TileShape,
    pub format: FloatFormat,
}

impl QuantizedTile {
    /// Scale by `max|v| / max_finite` and encode every element.
    ///
    /// An all-zero tile gets scale 1 and all-zero codes.
    pub fn quantize(values: &[f64], shape: TileShape, format: &FloatFormat) -> Result<Self, LowPrecError> {
        if values.len() != shape.elements() {
            return Err(LowPrecError::LengthMismatch {
                expected: shape.elements(),
                actual: values.len(),
            });
        }
        let scale = tile_scale(values, format)?;
        let codes = values.iter().map(|&v| format.encode(v / scale)).collect();
        Ok(QuantizedTile {
            scale,
            codes,
            shape,
            format: *format,
        })
    }

    /// Unscaled decoded value of element `i`.
    pub fn raw(&self, i: usize) -> f64 {
        self.format.decode(self.codes[i])
    }

    pub fn dequantize(&self) -> Vec<f64> {
        self.codes.iter().map(|&c| self.scale * self.format.decode(c)).collect()
    }
}

fn tile_scale<'a>(values: impl IntoIterator<Item = &'a f64>, format: &FloatFormat) -> Result<f64, LowPrecError> {
    let mut max_abs = 0.0f64;
    for &v in values {
        if !v.is_finite() {
            return Err(LowPrecError::NonFiniteInput(v));
        }
        max_abs = max_abs.max(v.abs());
    }
    Ok(if max_abs == 0.0 { 1.0 } else { max_abs / format.max_finite() })
}

/// A row-major matrix quantized tile by tile.
///
/// With [`TileShape::Tile1x128`] every row is split into 128-wide tiles
/// along the columns (activation layout, `rows x k`). With
/// [`TileShape::Block128x128`] the matrix is cut into 128x128 blocks
/// (weight layout, `k x cols`).
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedMatrix {
    pub rows: usize,
    pub cols: usize,
    pub shape: TileShape,
    pub format: FloatFormat,
    /// Row-major over the tile grid.
    pub scales: Vec<f64>,
    /// Row-major over elements.
    pub codes: Vec<u32>,
}

impl QuantizedMatrix {
    pub fn quantize(
        values: &[f64],
        rows: usize,
        cols: usize,
        shape: TileShape,
        format: &FloatFormat,
    ) -> Result<Self, LowPrecError> {
        if values.len() != rows * cols {
            return Err(LowPrecError::LengthMismatch {
                expected: rows * cols,
                actual: values.len(),
            });
        }
        check_multiple("cols", cols)?;
        let tile_rows = match shape {
            TileShape::Tile1x128 => 1,
            TileShape::Block128x128 => {
                check_multiple("rows", rows)?;
                TILE_EDGE
            }
        };
        let grid_cols = cols / TILE_EDGE;
        let grid_rows = rows / tile_rows;
        let mut scales = Vec::with_capacity(grid_rows * grid_cols);
        let mut codes = vec![0u32; rows * cols];
        for gr in 0..grid_rows {
            for gc in 0..grid_cols {
                let cells = || {
                    (gr * tile_rows..(gr + 1) * tile_rows)
                        .flat_map(move |r| (gc * TILE_EDGE..(gc + 1) * TILE_EDGE).map(move |c| r * cols + c))
                };
                let scale = tile_scale(cells().map(|i| &values[i]), format)?;
                for i in cells() {
                    codes[i] = format.encode(values[i] / scale);
                }
                scales.push(scale);
            }
        }
        Ok(QuantizedMatrix {
            rows,
            cols,
            shape,
            format: *format,
            scales,
            codes,
        })
    }

    pub fn scale_at(&self, row: usize, col: usize) -> f64 {
        let grid_cols = self.cols / TILE_EDGE;
        let gr = match self.shape {
            TileShape::Tile1x128 => row,
            TileShape::Block128x128 => row / TILE_EDGE,
        };
        self.scales[gr * grid_cols + col / TILE_EDGE]
    }

    /// Unscaled decoded element.
    pub fn raw(&self, row: usize, col: usize) -> f64 {
        self.format.decode(self.codes[row * self.cols + col])
    }

    pub fn dequantize(&self) -> Vec<f64> {
        (0..self.rows)
            .flat_map(|r| (0..self.cols).map(move |c| (r, c)))
            .map(|(r, c)| self.scale_at(r, c) * self.raw(r, c))
            .collect()
    }
}

pub(crate) fn check_multiple(name: &'static str, value: usize) -> Result<(), LowPrecError> {
    if value == 0 || !value.is_multiple_of(TILE_EDGE) {
        Err(LowPrecError::DimNotMultipleOf128 { name, value })
    } else {
        Ok(())
    }
}
