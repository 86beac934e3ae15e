//! Class vocabulary, ignore index and named evaluation subsets.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ground-truth value conventionally used for "no label" in segmentation datasets.
pub const DEFAULT_IGNORE_INDEX: u8 = 255;

/// Label files store one byte per pixel, so the class count is capped here.
pub const MAX_CLASSES: usize = 255;

const CITYSCAPES_CLASSES: [&str; 19] = [
    "road",
    "sidewalk",
    "building",
    "wall",
    "fence",
    "pole",
    "traffic light",
    "traffic sign",
    "vegetation",
    "terrain",
    "sky",
    "person",
    "rider",
    "car",
    "truck",
    "bus",
    "train",
    "motorcycle",
    "bicycle",
];

/// The set of classes a model predicts, plus evaluation conventions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawLabelSpace", into = "RawLabelSpace")]
pub struct LabelSpace {
    class_names: Vec<String>,
    ignore_index: u8,
    eval_subsets: BTreeMap<String, Vec<usize>>,
}

#[derive(Serialize, Deserialize)]
struct RawLabelSpace {
    num_classes: usize,
    class_names: Vec<String>,
    #[serde(default = "default_ignore")]
    ignore_index: u8,
    #[serde(default)]
    eval_subsets: BTreeMap<String, Vec<usize>>,
}

fn default_ignore() -> u8 {
    DEFAULT_IGNORE_INDEX
}

impl TryFrom<RawLabelSpace> for LabelSpace {
    type Error = Error;

    fn try_from(raw: RawLabelSpace) -> Result<Self> {
        if raw.num_classes != raw.class_names.len() {
            return Err(Error::validation(format!(
                "num_classes is {} but {} class names were given",
                raw.num_classes,
                raw.class_names.len()
            )));
        }
        LabelSpace::new(raw.class_names, raw.ignore_index, raw.eval_subsets)
    }
}

impl From<LabelSpace> for RawLabelSpace {
    fn from(space: LabelSpace) -> Self {
        RawLabelSpace {
            num_classes: space.class_names.len(),
            class_names: space.class_names,
            ignore_index: space.ignore_index,
            eval_subsets: space.eval_subsets,
        }
    }
}

impl LabelSpace {
    /// Builds a validated label space.
    ///
    /// When `eval_subsets` is empty an `"all"` subset covering every class is added.
    pub fn new(
        class_names: Vec<String>,
        ignore_index: u8,
        mut eval_subsets: BTreeMap<String, Vec<usize>>,
    ) -> Result<Self> {
        let c = class_names.len();
        if c == 0 {
            return Err(Error::validation("label space needs at least one class"));
        }
        if c > MAX_CLASSES {
            return Err(Error::validation(format!(
                "{c} classes exceed the 8-bit label limit of {MAX_CLASSES}"
            )));
        }
        if (ignore_index as usize) < c {
            return Err(Error::validation(format!(
                "ignore index {ignore_index} collides with a class index (C = {c})"
            )));
        }
        let mut seen = BTreeSet::new();
        for name in &class_names {
            if !seen.insert(name.as_str()) {
                return Err(Error::validation(format!("duplicate class name {name:?}")));
            }
        }
        for (name, members) in &eval_subsets {
            let mut seen = BTreeSet::new();
            for &idx in members {
                if idx >= c {
                    return Err(Error::validation(format!(
                        "subset {name:?} references class {idx}, but C = {c}"
                    )));
                }
                if !seen.insert(idx) {
                    return Err(Error::validation(format!(
                        "subset {name:?} lists class {idx} twice"
                    )));
                }
            }
        }
        if eval_subsets.is_empty() {
            eval_subsets.insert("all".to_owned(), (0..c).collect());
        }
        Ok(LabelSpace {
            class_names,
            ignore_index,
            eval_subsets,
        })
    }

    /// `num_classes` classes named `class_0`, `class_1`, ... with a single `"all"` subset.
    pub fn numbered(num_classes: usize) -> Result<Self> {
        let names = (0..num_classes).map(|i| format!("class_{i}")).collect();
        Self::new(names, DEFAULT_IGNORE_INDEX, BTreeMap::new())
    }

    /// The 19-class Cityscapes evaluation vocabulary with the `all19`,
    /// `synthia16` and `synthia13` subsets.
    pub fn cityscapes() -> Self {
        let names: Vec<String> = CITYSCAPES_CLASSES.iter().map(|s| s.to_string()).collect();
        // Synthia has no terrain, truck or train; the 13-class variant also drops wall, fence, pole.
        let synthia16: Vec<usize> = (0..19).filter(|i| ![9, 14, 16].contains(i)).collect();
        let synthia13: Vec<usize> = synthia16
            .iter()
            .copied()
            .filter(|i| ![3, 4, 5].contains(i))
            .collect();
        let subsets = BTreeMap::from([
            ("all19".to_owned(), (0..19).collect()),
            ("synthia16".to_owned(), synthia16),
            ("synthia13".to_owned(), synthia13),
        ]);
        Self::new(names, DEFAULT_IGNORE_INDEX, subsets).expect("preset is valid")
    }

    /// Resolves a named preset (`"cityscapes"`).
    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "cityscapes" => Ok(Self::cityscapes()),
            other => Err(Error::validation(format!(
                "unknown label-space preset {other:?}"
            ))),
        }
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn ignore_index(&self) -> u8 {
        self.ignore_index
    }

    pub fn eval_subsets(&self) -> &BTreeMap<String, Vec<usize>> {
        &self.eval_subsets
    }

    pub fn subset(&self, name: &str) -> Result<&[usize]> {
        self.eval_subsets
            .get(name)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::UnknownSubset(name.to_owned()))
    }

    /// True for a ground-truth value that is either a class or the ignore index.
    pub fn is_valid_label(&self, value: u8) -> bool {
        (value as usize) < self.num_classes() || value == self.ignore_index
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("c{i}")).collect()
    }

    #[test]
    fn cityscapes_subsets_have_conventional_sizes() {
        let space = LabelSpace::cityscapes();
        assert_eq!(space.num_classes(), 19);
        assert_eq!(space.subset("all19").unwrap().len(), 19);
        assert_eq!(space.subset("synthia16").unwrap().len(), 16);
        assert_eq!(space.subset("synthia13").unwrap().len(), 13);
        assert_eq!(space.ignore_index(), 255);
    }

    #[test]
    fn rejects_ignore_index_inside_class_range() {
        assert!(LabelSpace::new(names(3), 2, BTreeMap::new()).is_err());
        assert!(LabelSpace::new(names(3), 3, BTreeMap::new()).is_ok());
    }

    #[test]
    fn rejects_bad_subsets() {
        let out_of_range = BTreeMap::from([("s".to_owned(), vec![0, 3])]);
        assert!(LabelSpace::new(names(3), 255, out_of_range).is_err());
        let dup = BTreeMap::from([("s".to_owned(), vec![1, 1])]);
        assert!(LabelSpace::new(names(3), 255, dup).is_err());
    }

    #[test]
    fn rejects_empty_and_duplicate_names() {
        assert!(LabelSpace::new(vec![], 255, BTreeMap::new()).is_err());
        let dup = vec!["a".to_owned(), "a".to_owned()];
        assert!(LabelSpace::new(dup, 255, BTreeMap::new()).is_err());
    }

    #[test]
    fn json_round_trip_checks_num_classes() {
        let space = LabelSpace::numbered(3).unwrap();
        let json = serde_json::to_string(&space).unwrap();
        assert_eq!(serde_json::from_str::<LabelSpace>(&json).unwrap(), space);

        let bad = r#"{"num_classes": 2, "class_names": ["a", "b", "c"]}"#;
        assert!(serde_json::from_str::<LabelSpace>(bad).is_err());
    }
}
