use crate::error::{Error, Result};
use crate::label_space::LabelSpace;

/// A `W x H` grid of 8-bit labels in row-major order.
///
/// Used for ground truth (where the ignore index may appear) and as the
/// storage of [`PredictionMap`](crate::PredictionMap).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelGrid {
    width: usize,
    height: usize,
    labels: Vec<u8>,
}

impl LabelGrid {
    pub fn new(width: usize, height: usize, labels: Vec<u8>) -> Result<Self> {
        let expected = width
            .checked_mul(height)
            .ok_or_else(|| Error::dim("label grid dimensions overflow"))?;
        if labels.len() != expected {
            return Err(Error::dim(format!(
                "{width}x{height} grid needs {expected} labels, got {}",
                labels.len()
            )));
        }
        Ok(LabelGrid {
            width,
            height,
            labels,
        })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        LabelGrid {
            width,
            height,
            labels: vec![value; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn into_labels(self) -> Vec<u8> {
        self.labels
    }

    /// Checks every value is a class of `space` or its ignore index.
    pub fn validate(&self, space: &LabelSpace) -> Result<()> {
        match self.labels.iter().position(|&v| !space.is_valid_label(v)) {
            None => Ok(()),
            Some(i) => Err(Error::validation(format!(
                "label {} at pixel ({}, {}) is neither a class (C = {}) nor the ignore index {}",
                self.labels[i],
                i % self.width.max(1),
                i / self.width.max(1),
                space.num_classes(),
                space.ignore_index()
            ))),
        }
    }

    /// Rows `start..end` as a new grid.
    pub fn crop_rows(&self, start: usize, end: usize) -> Result<LabelGrid> {
        if start > end || end > self.height {
            return Err(Error::dim(format!(
                "row range {start}..{end} outside grid of height {}",
                self.height
            )));
        }
        Ok(LabelGrid {
            width: self.width,
            height: end - start,
            labels: self.labels[start * self.width..end * self.width].to_vec(),
        })
    }
}
