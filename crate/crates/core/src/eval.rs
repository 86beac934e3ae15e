//! Confusion matrices, per-class IoU and subset mIoU.
//!
//! Rows are ground truth, columns are predictions. Classes that appear in
//! neither ground truth nor predictions have an undefined IoU and are left out
//! of subset means.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::calibration::PredictionMap;
use crate::error::{Error, Result};
use crate::label_space::LabelSpace;
use crate::labels::LabelGrid;

pub const REPORT_SCHEMA_VERSION: u32 = 1;
pub const UNDEFINED_IOU_POLICY: &str = "excluded_from_mean";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    num_classes: usize,
    ignore_index: u8,
    counts: Vec<u64>,
    ignored: u64,
}

impl ConfusionMatrix {
    pub fn new(space: &LabelSpace) -> Self {
        Self::with_classes(space.num_classes(), space.ignore_index())
    }

    pub fn with_classes(num_classes: usize, ignore_index: u8) -> Self {
        ConfusionMatrix {
            num_classes,
            ignore_index,
            counts: vec![0; num_classes * num_classes],
            ignored: 0,
        }
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    /// Pixels with ground truth `gt` predicted as `pred`.
    pub fn count(&self, gt: usize, pred: usize) -> u64 {
        self.counts[gt * self.num_classes + pred]
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn ignored(&self) -> u64 {
        self.ignored
    }

    /// Pixels tallied into `counts`.
    pub fn counted(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Every pixel consumed, counted or ignored.
    pub fn pixels_consumed(&self) -> u64 {
        self.counted() + self.ignored
    }

    /// Tallies one image. Nothing is recorded if any input is invalid.
    pub fn update(&mut self, pred: &PredictionMap, gt: &LabelGrid) -> Result<()> {
        if (pred.width(), pred.height()) != (gt.width(), gt.height()) {
            return Err(Error::dim(format!(
                "prediction is {}x{}, ground truth {}x{}",
                pred.width(),
                pred.height(),
                gt.width(),
                gt.height()
            )));
        }
        if pred.num_classes() != self.num_classes {
            return Err(Error::dim(format!(
                "prediction has {} classes, matrix has {}",
                pred.num_classes(),
                self.num_classes
            )));
        }
        let n = self.num_classes;
        if let Some(&bad) = gt
            .labels()
            .iter()
            .find(|&&g| g != self.ignore_index && g as usize >= n)
        {
            return Err(Error::validation(format!(
                "ground-truth label {bad} is neither a class nor the ignore index"
            )));
        }
        for (&g, &p) in gt.labels().iter().zip(pred.labels()) {
            if g == self.ignore_index {
                self.ignored += 1;
            } else {
                self.counts[g as usize * n + p as usize] += 1;
            }
        }
        Ok(())
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) -> Result<()> {
        if other.num_classes != self.num_classes || other.ignore_index != self.ignore_index {
            return Err(Error::dim(
                "confusion matrices describe different label spaces",
            ));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.ignored += other.ignored;
        Ok(())
    }

    /// `TP / (TP + FP + FN)` for class `c`, `None` when the class never occurs.
    pub fn iou(&self, c: usize) -> Result<Option<f64>> {
        let n = self.num_classes;
        if c >= n {
            return Err(Error::invalid(format!(
                "class {c} out of range for C = {n}"
            )));
        }
        let tp = self.count(c, c);
        let fp: u64 = (0..n).filter(|&g| g != c).map(|g| self.count(g, c)).sum();
        let fn_: u64 = (0..n).filter(|&p| p != c).map(|p| self.count(c, p)).sum();
        let denom = tp + fp + fn_;
        Ok((denom > 0).then(|| tp as f64 / denom as f64))
    }

    /// Mean IoU over `classes`, skipping undefined ones.
    pub fn miou_over(&self, classes: &[usize]) -> Result<Option<f64>> {
        let mut sum = 0.0;
        let mut defined = 0usize;
        for &c in classes {
            if let Some(v) = self.iou(c)? {
                sum += v;
                defined += 1;
            }
        }
        Ok((defined > 0).then(|| sum / defined as f64))
    }

    /// Mean IoU over the named subset of `space`.
    pub fn miou(&self, space: &LabelSpace, subset: &str) -> Result<f64> {
        let classes = space.subset(subset)?;
        self.miou_over(classes)?
            .ok_or_else(|| Error::EmptySubset(subset.to_owned()))
    }

    /// Fraction of counted pixels on the diagonal.
    pub fn pixel_accuracy(&self) -> Option<f64> {
        let total = self.counted();
        let diag: u64 = (0..self.num_classes).map(|c| self.count(c, c)).sum();
        (total > 0).then(|| diag as f64 / total as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema_version: u32,
    pub class_names: Vec<String>,
    /// `None` marks an undefined IoU.
    pub per_class_iou: Vec<Option<f64>>,
    pub miou_by_subset: BTreeMap<String, f64>,
    pub subset_sizes: BTreeMap<String, usize>,
    pub pixel_accuracy: Option<f64>,
    pub counted_pixels: u64,
    pub ignored_pixels: u64,
    pub undefined_iou_policy: String,
    #[serde(default)]
    pub skipped_entries: Vec<String>,
}

impl EvalReport {
    /// Builds a report for `subsets` (all subsets of `space` when empty).
    pub fn from_confusion(
        cm: &ConfusionMatrix,
        space: &LabelSpace,
        subsets: &[String],
    ) -> Result<Self> {
        if cm.num_classes() != space.num_classes() {
            return Err(Error::dim(
                "confusion matrix and label space differ in size",
            ));
        }
        let names: Vec<String> = if subsets.is_empty() {
            space.eval_subsets().keys().cloned().collect()
        } else {
            subsets.to_vec()
        };
        let mut miou_by_subset = BTreeMap::new();
        let mut subset_sizes = BTreeMap::new();
        for name in names {
            miou_by_subset.insert(name.clone(), cm.miou(space, &name)?);
            subset_sizes.insert(name.clone(), space.subset(&name)?.len());
        }
        let per_class_iou = (0..cm.num_classes())
            .map(|c| cm.iou(c))
            .collect::<Result<_>>()?;
        Ok(EvalReport {
            schema_version: REPORT_SCHEMA_VERSION,
            class_names: space.class_names().to_vec(),
            per_class_iou,
            miou_by_subset,
            subset_sizes,
            pixel_accuracy: cm.pixel_accuracy(),
            counted_pixels: cm.counted(),
            ignored_pixels: cm.ignored(),
            undefined_iou_policy: UNDEFINED_IOU_POLICY.to_owned(),
            skipped_entries: Vec::new(),
        })
    }

    /// Aligned-column table with values in percent.
    pub fn to_text_table(&self) -> String {
        let width = self
            .class_names
            .iter()
            .map(String::len)
            .chain(self.miou_by_subset.keys().map(String::len))
            .chain(["pixel accuracy".len()])
            .max()
            .unwrap_or(0);
        let pct = |v: Option<f64>| v.map_or("n/a".to_owned(), |v| format!("{:.2}", 100.0 * v));
        let mut out = String::new();
        let _ = writeln!(out, "{:<width$}  {:>7}", "class", "IoU");
        for (name, iou) in self.class_names.iter().zip(&self.per_class_iou) {
            let _ = writeln!(out, "{:<width$}  {:>7}", name, pct(*iou));
        }
        let _ = writeln!(out);
        let _ = writeln!(out, "{:<width$}  {:>7}  {:>7}", "subset", "mIoU", "classes");
        for (name, v) in &self.miou_by_subset {
            let size = self.subset_sizes.get(name).copied().unwrap_or(0);
            let _ = writeln!(out, "{:<width$}  {:>7}  {:>7}", name, pct(Some(*v)), size);
        }
        let _ = writeln!(out);
        let _ = writeln!(
            out,
            "{:<width$}  {:>7}",
            "pixel accuracy",
            pct(self.pixel_accuracy)
        );
        let _ = writeln!(
            out,
            "counted {} / ignored {} pixels; undefined IoU {}",
            self.counted_pixels, self.ignored_pixels, self.undefined_iou_policy
        );
        if !self.skipped_entries.is_empty() {
            let _ = writeln!(out, "skipped entries: {}", self.skipped_entries.join(", "));
        }
        out
    }
}

/// Differences `b - a` between two reports over the same label space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDelta {
    pub class_names: Vec<String>,
    /// `None` when either side is undefined.
    pub per_class: Vec<Option<f64>>,
    pub per_subset: BTreeMap<String, f64>,
    pub pixel_accuracy: Option<f64>,
}

pub fn compare_reports(a: &EvalReport, b: &EvalReport) -> Result<ReportDelta> {
    if a.class_names != b.class_names {
        return Err(Error::validation("reports use different label spaces"));
    }
    if a.miou_by_subset.len() != b.miou_by_subset.len() {
        return Err(Error::validation("reports cover different subsets"));
    }
    let mut per_subset = BTreeMap::new();
    for (name, va) in &a.miou_by_subset {
        let vb = b
            .miou_by_subset
            .get(name)
            .ok_or_else(|| Error::UnknownSubset(name.clone()))?;
        per_subset.insert(name.clone(), vb - va);
    }
    let per_class = a
        .per_class_iou
        .iter()
        .zip(&b.per_class_iou)
        .map(|(x, y)| Some(y.as_ref()? - x.as_ref()?))
        .collect();
    Ok(ReportDelta {
        class_names: a.class_names.clone(),
        per_class,
        per_subset,
        pixel_accuracy: match (a.pixel_accuracy, b.pixel_accuracy) {
            (Some(x), Some(y)) => Some(y - x),
            _ => None,
        },
    })
}

impl ReportDelta {
    /// `kind,name,delta` rows for classes, subsets and pixel accuracy.
    pub fn to_csv(&self) -> String {
        let fmt = |v: Option<f64>| v.map_or(String::new(), |v| format!("{v:.6}"));
        let mut out = String::from("kind,name,delta\n");
        for (name, d) in self.class_names.iter().zip(&self.per_class) {
            let _ = writeln!(out, "class,{},{}", csv_field(name), fmt(*d));
        }
        for (name, d) in &self.per_subset {
            let _ = writeln!(out, "subset,{},{}", csv_field(name), fmt(Some(*d)));
        }
        let _ = writeln!(out, "pixel_accuracy,all,{}", fmt(self.pixel_accuracy));
        out
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}
