//! Confidence-weighted soft-label prototypes and nearest-prototype prediction.
//!
//! A pre-trained segmentation model's per-pixel class probabilities are
//! distorted under domain shift. Averaging the soft labels of all pixels that
//! the model assigns to class `c`, weighted by the model's confidence, gives a
//! prototype of what class `c` "looks like" on the target domain. Predicting
//! the class of the nearest prototype instead of the argmax re-calibrates the
//! labels without touching the model.
//!
//! Fitting is a single streaming pass: [`PrototypeAccumulator::accumulate`]
//! each map, optionally [`merge`](PrototypeAccumulator::merge) shards, then
//! [`PrototypeSet::finalize`].

mod accumulator;
mod prob_map;
mod prototypes;

pub use accumulator::PrototypeAccumulator;
pub use prob_map::{validate_distribution, ProbMap, SUM_TOLERANCE};
pub use prototypes::{PrototypeSet, ROW_SUM_TOLERANCE};

use crate::error::{Error, Result};
use crate::labels::LabelGrid;
use prob_map::normalize_into;

/// Per-pixel predicted classes, every entry in `[0, C)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredictionMap {
    num_classes: usize,
    grid: LabelGrid,
}

impl PredictionMap {
    pub fn new(num_classes: usize, grid: LabelGrid) -> Result<Self> {
        if let Some(&bad) = grid.labels().iter().find(|&&v| v as usize >= num_classes) {
            return Err(Error::validation(format!(
                "predicted class {bad} out of range for C = {num_classes}"
            )));
        }
        Ok(PredictionMap { num_classes, grid })
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn width(&self) -> usize {
        self.grid.width()
    }

    pub fn height(&self) -> usize {
        self.grid.height()
    }

    pub fn labels(&self) -> &[u8] {
        self.grid.labels()
    }

    pub fn grid(&self) -> &LabelGrid {
        &self.grid
    }

    pub fn into_grid(self) -> LabelGrid {
        self.grid
    }
}

fn check_finite(p: &[f64]) -> Result<()> {
    if p.is_empty() {
        return Err(Error::invalid("empty probability vector"));
    }
    match p.iter().find(|v| !v.is_finite()) {
        Some(v) => Err(Error::invalid(format!("non-finite component {v}"))),
        None => Ok(()),
    }
}

/// Smallest index attaining the maximum of `p`.
pub fn argmax_class(p: &[f64]) -> Result<usize> {
    check_finite(p)?;
    Ok(argmax_unchecked(p))
}

#[inline]
pub(crate) fn argmax_unchecked(p: &[f64]) -> usize {
    let mut best = 0;
    for (c, &v) in p.iter().enumerate().skip(1) {
        if v > p[best] {
            best = c;
        }
    }
    best
}

/// The most probable class of `p` and its probability, which is the weight
/// the pixel contributes to that class's prototype.
pub fn confidence_weight(p: &[f64]) -> Result<(usize, f64)> {
    let c = argmax_class(p)?;
    Ok((c, p[c]))
}

/// Class of the prototype nearest to `p` (squared Euclidean distance, lowest
/// index on ties).
pub fn calibrated_class(p: &[f64], protos: &PrototypeSet) -> Result<usize> {
    if p.len() != protos.num_classes() {
        return Err(Error::dim(format!(
            "vector has {} classes, prototypes have {}",
            p.len(),
            protos.num_classes()
        )));
    }
    check_finite(p)?;
    Ok(protos.nearest_unchecked(p))
}

/// Labels every pixel of `map`: nearest prototype when `protos` is given,
/// plain argmax otherwise.
pub fn predict_map(map: &ProbMap, protos: Option<&PrototypeSet>) -> Result<PredictionMap> {
    let n = map.num_classes();
    if let Some(set) = protos {
        if set.num_classes() != n {
            return Err(Error::dim(format!(
                "map has {n} classes, prototypes have {}",
                set.num_classes()
            )));
        }
    }
    if n > 256 {
        return Err(Error::dim(format!("{n} classes do not fit 8-bit labels")));
    }
    let mut p = vec![0.0; n];
    let labels = map
        .pixels()
        .map(|raw| {
            normalize_into(raw, &mut p);
            let c = match protos {
                Some(set) => set.nearest_unchecked(&p),
                None => argmax_unchecked(&p),
            };
            c as u8
        })
        .collect();
    let grid = LabelGrid::new(map.width(), map.height(), labels)?;
    Ok(PredictionMap {
        num_classes: n,
        grid,
    })
}

/// Argmax and calibrated predictions from one pass over `map`, plus the number
/// of pixels where they disagree.
pub fn predict_both(
    map: &ProbMap,
    protos: &PrototypeSet,
) -> Result<(PredictionMap, PredictionMap, u64)> {
    let n = map.num_classes();
    if protos.num_classes() != n {
        return Err(Error::dim(format!(
            "map has {n} classes, prototypes have {}",
            protos.num_classes()
        )));
    }
    let mut p = vec![0.0; n];
    let mut argmax = Vec::with_capacity(map.num_pixels());
    let mut calibrated = Vec::with_capacity(map.num_pixels());
    let mut flips = 0;
    for raw in map.pixels() {
        normalize_into(raw, &mut p);
        let a = argmax_unchecked(&p);
        let c = protos.nearest_unchecked(&p);
        flips += (a != c) as u64;
        argmax.push(a as u8);
        calibrated.push(c as u8);
    }
    let (w, h) = (map.width(), map.height());
    Ok((
        PredictionMap::new(n, LabelGrid::new(w, h, argmax)?)?,
        PredictionMap::new(n, LabelGrid::new(w, h, calibrated)?)?,
        flips,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::label_space::LabelSpace;

    fn example_protos() -> PrototypeSet {
        let mut acc = PrototypeAccumulator::new(3);
        for p in [
            [0.7, 0.2, 0.1],
            [0.6, 0.3, 0.1],
            [0.2, 0.5, 0.3],
            [0.1, 0.2, 0.7],
        ] {
            acc.accumulate_pixel(&p).unwrap();
        }
        PrototypeSet::finalize(&acc, &LabelSpace::numbered(3).unwrap()).unwrap()
    }

    #[test]
    fn argmax_examples() {
        assert_eq!(argmax_class(&[0.7, 0.2, 0.1]).unwrap(), 0);
        assert_eq!(argmax_class(&[0.4, 0.4, 0.2]).unwrap(), 0);
        assert_eq!(argmax_class(&[0.1, 0.2, 0.7]).unwrap(), 2);
        assert!(matches!(
            argmax_class(&[0.1, f64::NAN]),
            Err(Error::InvalidInput(_))
        ));
        assert!(argmax_class(&[]).is_err());
    }

    #[test]
    fn confidence_weight_examples() {
        assert_eq!(confidence_weight(&[0.7, 0.2, 0.1]).unwrap(), (0, 0.7));
        assert_eq!(confidence_weight(&[1.0, 0.0, 0.0]).unwrap(), (0, 1.0));
        assert_eq!(confidence_weight(&[0.2, 0.5, 0.3]).unwrap(), (1, 0.5));
    }

    #[test]
    fn calibrated_class_examples() {
        let protos = example_protos();
        assert_eq!(calibrated_class(&[0.5, 0.3, 0.2], &protos).unwrap(), 0);
        let q = [0.36, 0.34, 0.30];
        assert_eq!(argmax_class(&q).unwrap(), 0);
        assert_eq!(calibrated_class(&q, &protos).unwrap(), 1);
        assert!(calibrated_class(&[0.5, 0.5], &protos).is_err());
        assert!(calibrated_class(&[0.5, f64::INFINITY, 0.0], &protos).is_err());
    }

    #[test]
    fn identity_prototypes_reproduce_argmax() {
        let id = PrototypeSet::identity(LabelSpace::numbered(3).unwrap().class_names().to_vec());
        for p in [
            [0.4, 0.4, 0.2],
            [0.1, 0.45, 0.45],
            [0.3, 0.3, 0.4],
            [1.0, 0.0, 0.0],
        ] {
            assert_eq!(
                calibrated_class(&p, &id).unwrap(),
                argmax_class(&p).unwrap()
            );
        }
    }

    #[test]
    fn predict_map_examples() {
        let map = ProbMap::new(2, 1, 3, vec![0.7, 0.2, 0.1, 0.2, 0.5, 0.3]).unwrap();
        assert_eq!(predict_map(&map, None).unwrap().labels(), &[0, 1]);
        let id = PrototypeSet::identity(LabelSpace::numbered(3).unwrap().class_names().to_vec());
        assert_eq!(predict_map(&map, Some(&id)).unwrap().labels(), &[0, 1]);

        let flip = ProbMap::new(2, 1, 3, vec![0.36, 0.34, 0.30, 0.5, 0.3, 0.2]).unwrap();
        let protos = example_protos();
        assert_eq!(predict_map(&flip, Some(&protos)).unwrap().labels(), &[1, 0]);
        let (a, c, flips) = predict_both(&flip, &protos).unwrap();
        assert_eq!(a.labels(), &[0, 0]);
        assert_eq!(c.labels(), &[1, 0]);
        assert_eq!(flips, 1);

        let four = ProbMap::empty(4).unwrap();
        assert!(predict_map(&four, Some(&protos)).is_err());
    }
}
