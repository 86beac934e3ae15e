use crate::calibration::accumulator::PrototypeAccumulator;
use crate::error::{Error, Result};
use crate::label_space::LabelSpace;

/// Row sums of an imported prototype matrix must be within this of 1.
pub const ROW_SUM_TOLERANCE: f64 = 1e-6;

/// A finalized `C x C` soft-label prototype matrix.
///
/// Row `c` is the confidence-weighted mean soft label of the pixels whose
/// argmax was `c`, or the one-hot vector `e_c` when no pixel ever predicted
/// `c` (`observed[c] == false`). Immutable once built, so it can be shared
/// across prediction threads.
#[derive(Debug, Clone, PartialEq)]
pub struct PrototypeSet {
    class_names: Vec<String>,
    prototypes: Vec<f64>,
    observed: Vec<bool>,
    source_weight: Vec<f64>,
    // 0.5 * |mu_c|^2, used by the nearest-prototype search
    half_sq_norm: Vec<f64>,
}

impl PrototypeSet {
    /// Turns accumulated sums into prototypes, falling back to one-hot rows for
    /// classes with zero accumulated weight.
    pub fn finalize(acc: &PrototypeAccumulator, space: &LabelSpace) -> Result<Self> {
        let n = space.num_classes();
        if acc.num_classes() != n {
            return Err(Error::dim(format!(
                "accumulator has {} classes, label space has {n}",
                acc.num_classes()
            )));
        }
        let mut prototypes = vec![0.0; n * n];
        let mut observed = vec![false; n];
        for c in 0..n {
            let total = acc.weight_total()[c];
            let row = &mut prototypes[c * n..(c + 1) * n];
            if total > 0.0 {
                for (dst, &s) in row.iter_mut().zip(acc.weighted_sum_row(c)) {
                    *dst = s / total;
                }
                observed[c] = true;
            } else {
                row[c] = 1.0;
            }
        }
        Ok(Self::build(
            space.class_names().to_vec(),
            prototypes,
            observed,
            acc.weight_total().to_vec(),
        ))
    }

    /// The identity matrix: every class unobserved, every row one-hot.
    pub fn identity(class_names: Vec<String>) -> Self {
        let n = class_names.len();
        let mut prototypes = vec![0.0; n * n];
        for c in 0..n {
            prototypes[c * n + c] = 1.0;
        }
        Self::build(class_names, prototypes, vec![false; n], vec![0.0; n])
    }

    /// Builds a set from raw parts, checking every prototype invariant.
    ///
    /// `prototypes` is row-major `C x C`.
    pub fn from_parts(
        class_names: Vec<String>,
        prototypes: Vec<f64>,
        observed: Vec<bool>,
        source_weight: Vec<f64>,
    ) -> Result<Self> {
        let n = class_names.len();
        if n == 0 {
            return Err(Error::validation("prototype set needs at least one class"));
        }
        if prototypes.len() != n * n || observed.len() != n || source_weight.len() != n {
            return Err(Error::dim(format!(
                "prototype parts do not describe a {n}x{n} matrix"
            )));
        }
        for c in 0..n {
            let row = &prototypes[c * n..(c + 1) * n];
            let name = &class_names[c];
            if row.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::validation(format!(
                    "prototype {name:?} has a negative or non-finite entry"
                )));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                return Err(Error::validation(format!(
                    "prototype {name:?} sums to {sum}, not 1 within {ROW_SUM_TOLERANCE}"
                )));
            }
            if row.iter().any(|&v| v > row[c]) {
                return Err(Error::validation(format!(
                    "prototype {name:?} does not peak at its own class"
                )));
            }
            if !observed[c]
                && row
                    .iter()
                    .enumerate()
                    .any(|(j, &v)| v != (j == c) as u8 as f64)
            {
                return Err(Error::validation(format!(
                    "unobserved prototype {name:?} is not the one-hot vector"
                )));
            }
            if !source_weight[c].is_finite() || source_weight[c] < 0.0 {
                return Err(Error::validation(format!(
                    "prototype {name:?} has invalid source weight {}",
                    source_weight[c]
                )));
            }
        }
        Ok(Self::build(
            class_names,
            prototypes,
            observed,
            source_weight,
        ))
    }

    fn build(
        class_names: Vec<String>,
        prototypes: Vec<f64>,
        observed: Vec<bool>,
        source_weight: Vec<f64>,
    ) -> Self {
        let n = class_names.len();
        let half_sq_norm = (0..n)
            .map(|c| {
                0.5 * prototypes[c * n..(c + 1) * n]
                    .iter()
                    .map(|v| v * v)
                    .sum::<f64>()
            })
            .collect();
        PrototypeSet {
            class_names,
            prototypes,
            observed,
            source_weight,
            half_sq_norm,
        }
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    /// Prototype of class `c`.
    pub fn row(&self, c: usize) -> &[f64] {
        let n = self.num_classes();
        &self.prototypes[c * n..(c + 1) * n]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.prototypes.chunks_exact(self.num_classes())
    }

    /// Row-major matrix.
    pub fn matrix(&self) -> &[f64] {
        &self.prototypes
    }

    pub fn observed(&self) -> &[bool] {
        &self.observed
    }

    pub fn source_weight(&self) -> &[f64] {
        &self.source_weight
    }

    /// Classes that fell back to one-hot prototypes.
    pub fn unobserved_classes(&self) -> Vec<usize> {
        (0..self.num_classes())
            .filter(|&c| !self.observed[c])
            .collect()
    }

    /// Index of the prototype nearest to `p` in Euclidean distance; ties go to
    /// the lowest index. `p` must have `C` finite entries.
    ///
    /// `|p - mu_c|^2 = |p|^2 - 2 p.mu_c + |mu_c|^2`, so candidate `c` beats the
    /// current best `b` exactly when `p.mu_c - p.mu_b > h_c - h_b` with
    /// `h = |mu|^2 / 2`. Comparing the differences directly keeps exact ties
    /// exact; with identity prototypes it reduces to comparing `p_c` with `p_b`.
    #[inline]
    pub(crate) fn nearest_unchecked(&self, p: &[f64]) -> usize {
        let mut best = 0;
        let mut best_dot = dot(p, self.row(0));
        for c in 1..self.num_classes() {
            let d = dot(p, self.row(c));
            if d - best_dot > self.half_sq_norm[c] - self.half_sq_norm[best] {
                best = c;
                best_dot = d;
            }
        }
        best
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("c{i}")).collect()
    }

    fn four_pixel_acc() -> PrototypeAccumulator {
        let mut acc = PrototypeAccumulator::new(3);
        for p in [
            [0.7, 0.2, 0.1],
            [0.6, 0.3, 0.1],
            [0.2, 0.5, 0.3],
            [0.1, 0.2, 0.7],
        ] {
            acc.accumulate_pixel(&p).unwrap();
        }
        acc
    }

    #[test]
    fn four_pixel_prototypes() {
        let space = LabelSpace::numbered(3).unwrap();
        let set = PrototypeSet::finalize(&four_pixel_acc(), &space).unwrap();
        let want0 = [0.85 / 1.3, 0.32 / 1.3, 0.13 / 1.3];
        for (got, want) in set.row(0).iter().zip(want0) {
            assert!((got - want).abs() < 1e-12);
        }
        assert!((set.row(0)[0] - 0.65385).abs() < 1e-5);
        assert!((set.row(0)[1] - 0.24615).abs() < 1e-5);
        assert!((set.row(0)[2] - 0.10000).abs() < 1e-5);
        for (got, want) in set.row(1).iter().zip([0.2, 0.5, 0.3]) {
            assert!((got - want).abs() < 1e-12);
        }
        for (got, want) in set.row(2).iter().zip([0.1, 0.2, 0.7]) {
            assert!((got - want).abs() < 1e-12);
        }
        assert_eq!(set.observed(), &[true, true, true]);
    }

    #[test]
    fn unpredicted_class_falls_back_to_one_hot() {
        let mut acc = PrototypeAccumulator::new(3);
        acc.accumulate_pixel(&[0.7, 0.2, 0.1]).unwrap();
        acc.accumulate_pixel(&[0.2, 0.5, 0.3]).unwrap();
        let set = PrototypeSet::finalize(&acc, &LabelSpace::numbered(3).unwrap()).unwrap();
        assert_eq!(set.row(2), &[0.0, 0.0, 1.0]);
        assert_eq!(set.observed(), &[true, true, false]);
        assert_eq!(set.unobserved_classes(), vec![2]);
    }

    #[test]
    fn one_hot_inputs_give_identity() {
        let mut acc = PrototypeAccumulator::new(3);
        for c in 0..3 {
            let mut p = [0.0; 3];
            p[c] = 1.0;
            acc.accumulate_pixel(&p).unwrap();
            acc.accumulate_pixel(&p).unwrap();
        }
        let set = PrototypeSet::finalize(&acc, &LabelSpace::numbered(3).unwrap()).unwrap();
        assert_eq!(set.matrix(), PrototypeSet::identity(names(3)).matrix());
    }

    #[test]
    fn finalize_checks_dimensions() {
        let acc = PrototypeAccumulator::new(2);
        assert!(PrototypeSet::finalize(&acc, &LabelSpace::numbered(3).unwrap()).is_err());
    }

    #[test]
    fn from_parts_enforces_invariants() {
        let ok = vec![0.6, 0.4, 0.0, 1.0];
        assert!(
            PrototypeSet::from_parts(names(2), ok.clone(), vec![true, false], vec![1.0, 0.0])
                .is_ok()
        );
        // row 0 does not sum to 1
        let bad_sum = vec![0.6, 0.3, 0.0, 1.0];
        assert!(
            PrototypeSet::from_parts(names(2), bad_sum, vec![true, false], vec![1.0, 0.0]).is_err()
        );
        // row 0 peaks at the wrong class
        let bad_peak = vec![0.4, 0.6, 0.0, 1.0];
        assert!(
            PrototypeSet::from_parts(names(2), bad_peak, vec![true, true], vec![1.0, 1.0]).is_err()
        );
        // unobserved row that is not one-hot
        assert!(
            PrototypeSet::from_parts(names(2), ok, vec![false, false], vec![1.0, 0.0]).is_err()
        );
    }

    #[test]
    fn nearest_matches_worked_distances() {
        let set =
            PrototypeSet::finalize(&four_pixel_acc(), &LabelSpace::numbered(3).unwrap()).unwrap();
        assert_eq!(set.nearest_unchecked(&[0.5, 0.3, 0.2]), 0);
        assert_eq!(set.nearest_unchecked(&[0.36, 0.34, 0.30]), 1);
    }

    #[test]
    fn duplicate_rows_resolve_to_lowest_index() {
        let rows = vec![0.5, 0.5, 0.5, 0.5];
        let set =
            PrototypeSet::from_parts(names(2), rows, vec![true, true], vec![1.0, 1.0]).unwrap();
        assert_eq!(set.nearest_unchecked(&[0.1, 0.9]), 0);
    }
}
