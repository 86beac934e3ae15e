use crate::error::{Error, Result};

/// Largest tolerated deviation of a pixel's probability sum from 1.
///
/// Pixels inside the tolerance are renormalized when they are read for
/// accumulation or prediction; anything further off is rejected.
pub const SUM_TOLERANCE: f64 = 1e-4;

/// Per-image class probabilities, one distribution per pixel.
///
/// Values are stored pixel-major (row by row, each pixel's `C` probabilities
/// contiguous) exactly as given; the on-disk format is class-major and is
/// transposed by the readers and writers.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbMap {
    width: usize,
    height: usize,
    num_classes: usize,
    data: Vec<f64>,
}

impl ProbMap {
    /// Builds a map from pixel-major data, validating every pixel.
    pub fn new(width: usize, height: usize, num_classes: usize, data: Vec<f64>) -> Result<Self> {
        if num_classes == 0 {
            return Err(Error::invalid("probability map needs at least one class"));
        }
        let expected = width
            .checked_mul(height)
            .and_then(|n| n.checked_mul(num_classes))
            .ok_or_else(|| Error::dim("map dimensions overflow"))?;
        if data.len() != expected {
            return Err(Error::dim(format!(
                "{width}x{height}x{num_classes} map needs {expected} values, got {}",
                data.len()
            )));
        }
        for (i, p) in data.chunks_exact(num_classes).enumerate() {
            validate_distribution(p).map_err(|e| match e {
                Error::InvalidInput(msg) => {
                    Error::invalid(format!("pixel ({}, {}): {msg}", i % width, i / width))
                }
                other => other,
            })?;
        }
        Ok(ProbMap {
            width,
            height,
            num_classes,
            data,
        })
    }

    /// Builds a map from class-major (`C`, then `H`, then `W`) data.
    pub fn from_class_major(
        width: usize,
        height: usize,
        num_classes: usize,
        planes: &[f64],
    ) -> Result<Self> {
        let n = width * height;
        if planes.len() != n * num_classes {
            return Err(Error::dim(format!(
                "class-major buffer has {} values, expected {}",
                planes.len(),
                n * num_classes
            )));
        }
        let mut data = vec![0.0; planes.len()];
        for (c, plane) in planes.chunks_exact(n.max(1)).enumerate().take(num_classes) {
            for (i, &v) in plane.iter().enumerate() {
                data[i * num_classes + c] = v;
            }
        }
        Self::new(width, height, num_classes, data)
    }

    /// An empty (0x0) map with the given class count.
    pub fn empty(num_classes: usize) -> Result<Self> {
        Self::new(0, 0, num_classes, Vec::new())
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn num_pixels(&self) -> usize {
        self.width * self.height
    }

    /// Raw probability vector of pixel `index` (row-major pixel order).
    pub fn pixel(&self, index: usize) -> &[f64] {
        let c = self.num_classes;
        &self.data[index * c..(index + 1) * c]
    }

    /// Raw probability vectors in row-major pixel order.
    pub fn pixels(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.num_classes)
    }

    pub fn as_pixel_major(&self) -> &[f64] {
        &self.data
    }

    /// Copies the data out in class-major order.
    pub fn to_class_major(&self) -> Vec<f64> {
        let n = self.num_pixels();
        let mut planes = vec![0.0; self.data.len()];
        for (i, p) in self.pixels().enumerate() {
            for (c, &v) in p.iter().enumerate() {
                planes[c * n + i] = v;
            }
        }
        planes
    }

    /// Rows `start..end` as a new map.
    pub fn crop_rows(&self, start: usize, end: usize) -> Result<ProbMap> {
        if start > end || end > self.height {
            return Err(Error::dim(format!(
                "row range {start}..{end} outside map of height {}",
                self.height
            )));
        }
        let stride = self.width * self.num_classes;
        Ok(ProbMap {
            width: self.width,
            height: end - start,
            num_classes: self.num_classes,
            data: self.data[start * stride..end * stride].to_vec(),
        })
    }
}

/// Checks one pixel vector against the probability-map invariants.
pub fn validate_distribution(p: &[f64]) -> Result<()> {
    let mut sum = 0.0;
    for &v in p {
        if !v.is_finite() {
            return Err(Error::invalid(format!("non-finite probability {v}")));
        }
        if v < 0.0 {
            return Err(Error::invalid(format!("negative probability {v}")));
        }
        sum += v;
    }
    if (sum - 1.0).abs() > SUM_TOLERANCE {
        return Err(Error::invalid(format!(
            "probabilities sum to {sum}, outside 1 +/- {SUM_TOLERANCE}"
        )));
    }
    Ok(())
}

/// Writes `p / sum(p)` into `out`.
#[inline]
pub(crate) fn normalize_into(p: &[f64], out: &mut [f64]) {
    let sum: f64 = p.iter().sum();
    for (o, &v) in out.iter_mut().zip(p) {
        *o = v / sum;
    }
}
