use crate::calibration::argmax_unchecked;
use crate::calibration::prob_map::{normalize_into, ProbMap};
use crate::error::{Error, Result};

/// Running sums for confidence-weighted soft-label prototypes.
///
/// For every pixel whose most probable class is `c`, with confidence
/// `m = p[c]`, row `c` of `weighted_sum` receives `m * p` and
/// `weight_total[c]` receives `m`. The prototype of `c` is the ratio of the two,
/// so the accumulator is all the state a single pass over the data needs.
/// Accumulators over disjoint shards combine with [`merge`](Self::merge).
#[derive(Debug, Clone, PartialEq)]
pub struct PrototypeAccumulator {
    num_classes: usize,
    weighted_sum: Vec<f64>,
    weight_total: Vec<f64>,
    pixel_count: Vec<u64>,
}

impl PrototypeAccumulator {
    pub fn new(num_classes: usize) -> Self {
        PrototypeAccumulator {
            num_classes,
            weighted_sum: vec![0.0; num_classes * num_classes],
            weight_total: vec![0.0; num_classes],
            pixel_count: vec![0; num_classes],
        }
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    /// Row `c` of the weighted-sum matrix.
    pub fn weighted_sum_row(&self, c: usize) -> &[f64] {
        let n = self.num_classes;
        &self.weighted_sum[c * n..(c + 1) * n]
    }

    pub fn weighted_sum(&self) -> &[f64] {
        &self.weighted_sum
    }

    pub fn weight_total(&self) -> &[f64] {
        &self.weight_total
    }

    pub fn pixel_count(&self) -> &[u64] {
        &self.pixel_count
    }

    /// Total number of pixels seen.
    pub fn pixels_seen(&self) -> u64 {
        self.pixel_count.iter().sum()
    }

    /// Folds every pixel of `map` into the sums, reading each pixel once.
    pub fn accumulate(&mut self, map: &ProbMap) -> Result<()> {
        if map.num_classes() != self.num_classes {
            return Err(Error::dim(format!(
                "accumulator has {} classes, map has {}",
                self.num_classes,
                map.num_classes()
            )));
        }
        let mut p = vec![0.0; self.num_classes];
        for raw in map.pixels() {
            normalize_into(raw, &mut p);
            self.add_normalized(&p);
        }
        Ok(())
    }

    /// Folds a single probability vector into the sums.
    ///
    /// The vector is validated and renormalized like a map pixel.
    pub fn accumulate_pixel(&mut self, p: &[f64]) -> Result<()> {
        if p.len() != self.num_classes {
            return Err(Error::dim(format!(
                "pixel has {} classes, accumulator has {}",
                p.len(),
                self.num_classes
            )));
        }
        crate::calibration::prob_map::validate_distribution(p)?;
        let mut q = vec![0.0; p.len()];
        normalize_into(p, &mut q);
        self.add_normalized(&q);
        Ok(())
    }

    #[inline]
    fn add_normalized(&mut self, p: &[f64]) {
        let c = argmax_unchecked(p);
        let m = p[c];
        let n = self.num_classes;
        for (s, &v) in self.weighted_sum[c * n..(c + 1) * n].iter_mut().zip(p) {
            *s += m * v;
        }
        self.weight_total[c] += m;
        self.pixel_count[c] += 1;
    }

    /// Adds `other`'s sums into `self`.
    pub fn merge(&mut self, other: &PrototypeAccumulator) -> Result<()> {
        if other.num_classes != self.num_classes {
            return Err(Error::dim(format!(
                "cannot merge accumulators with {} and {} classes",
                self.num_classes, other.num_classes
            )));
        }
        for (a, b) in self.weighted_sum.iter_mut().zip(&other.weighted_sum) {
            *a += b;
        }
        for (a, b) in self.weight_total.iter_mut().zip(&other.weight_total) {
            *a += b;
        }
        for (a, b) in self.pixel_count.iter_mut().zip(&other.pixel_count) {
            *a += b;
        }
        Ok(())
    }

    pub fn merged(mut self, other: &PrototypeAccumulator) -> Result<Self> {
        self.merge(other)?;
        Ok(self)
    }
}
