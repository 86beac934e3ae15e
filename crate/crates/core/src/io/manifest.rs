//! Dataset manifests and one-pass streaming over their files.
//!
//! A manifest is UTF-8 JSON:
//!
//! ```json
//! {
//!   "label_space": "cityscapes",
//!   "entries": [
//!     {"id": "frankfurt_000000", "prob": "probs/frankfurt_000000.pcpm", "label": "gt/frankfurt_000000.pclm"}
//!   ]
//! }
//! ```
//!
//! `label_space` is either a preset name or an inline label-space object.
//! Relative paths resolve against the directory holding the manifest.

use std::collections::HashSet;
use std::fs::File;
use std::io::BufReader;
use std::ops::Range;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::calibration::ProbMap;
use crate::error::{Error, Result};
use crate::io::binary::{read_label_map, read_prob_map};
use crate::label_space::LabelSpace;
use crate::labels::LabelGrid;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    #[serde(rename = "prob")]
    pub prob_path: PathBuf,
    #[serde(rename = "label", default, skip_serializing_if = "Option::is_none")]
    pub label_path: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum LabelSpaceSpec {
    Preset(String),
    Inline(LabelSpace),
}

#[derive(Serialize, Deserialize)]
struct RawManifest {
    label_space: LabelSpaceSpec,
    #[serde(default)]
    entries: Vec<ManifestEntry>,
}

/// An ordered list of probability maps (and optional ground truth) over one
/// label space.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    label_space: LabelSpace,
    entries: Vec<ManifestEntry>,
    base_dir: PathBuf,
}

impl DatasetManifest {
    /// Validates ids (unique, usable as file stems) and paths (non-empty).
    pub fn new(
        label_space: LabelSpace,
        entries: Vec<ManifestEntry>,
        base_dir: impl Into<PathBuf>,
    ) -> Result<Self> {
        let mut seen = HashSet::new();
        for entry in &entries {
            validate_id(&entry.id)?;
            if !seen.insert(entry.id.as_str()) {
                return Err(Error::validation(format!(
                    "duplicate entry id {:?}",
                    entry.id
                )));
            }
            if entry.prob_path.as_os_str().is_empty()
                || entry
                    .label_path
                    .as_ref()
                    .is_some_and(|p| p.as_os_str().is_empty())
            {
                return Err(Error::validation(format!(
                    "entry {:?} has an empty path",
                    entry.id
                )));
            }
        }
        Ok(DatasetManifest {
            label_space,
            entries,
            base_dir: base_dir.into(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let base = path.parent().unwrap_or_else(|| Path::new(""));
        Self::from_json(&text, base)
    }

    pub fn from_json(text: &str, base_dir: &Path) -> Result<Self> {
        let raw: RawManifest = serde_json::from_str(text)?;
        let space = match raw.label_space {
            LabelSpaceSpec::Preset(name) => LabelSpace::preset(&name)?,
            LabelSpaceSpec::Inline(space) => space,
        };
        Self::new(space, raw.entries, base_dir)
    }

    /// Serializes with the label space inlined and paths as stored.
    pub fn to_json(&self) -> Result<String> {
        let raw = RawManifest {
            label_space: LabelSpaceSpec::Inline(self.label_space.clone()),
            entries: self.entries.clone(),
        };
        let mut s = serde_json::to_string_pretty(&raw)?;
        s.push('\n');
        Ok(s)
    }

    pub fn label_space(&self) -> &LabelSpace {
        &self.label_space
    }

    pub fn entries(&self) -> &[ManifestEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn base_dir(&self) -> &Path {
        &self.base_dir
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    /// Errors naming the first entry without a ground-truth path.
    pub fn require_labels(&self) -> Result<()> {
        match self.entries.iter().find(|e| e.label_path.is_none()) {
            Some(e) => Err(Error::validation("no ground-truth label path").for_entry(&e.id)),
            None => Ok(()),
        }
    }

    /// Streams every entry in order; see [`stream_dataset`].
    pub fn stream(&self) -> DatasetStream<'_> {
        stream_dataset(self)
    }
}

fn validate_id(id: &str) -> Result<()> {
    let bad = id.is_empty()
        || id == "."
        || id == ".."
        || id.chars().any(|c| matches!(c, '/' | '\\' | '\0'));
    if bad {
        return Err(Error::validation(format!(
            "entry id {id:?} is not usable as a file name"
        )));
    }
    Ok(())
}

/// One dataset entry, loaded.
#[derive(Debug, Clone)]
pub struct DatasetItem {
    pub id: String,
    pub map: ProbMap,
    pub labels: Option<LabelGrid>,
}

/// Iterator over manifest entries that holds at most one entry in memory.
///
/// Every error is wrapped in [`Error::Entry`] naming the entry id; iteration
/// continues past errors, so callers pick fail-fast or skip-and-count.
pub struct DatasetStream<'a> {
    manifest: &'a DatasetManifest,
    range: Range<usize>,
    load_labels: bool,
}

/// Streams entries in manifest order, opening each file once.
pub fn stream_dataset(manifest: &DatasetManifest) -> DatasetStream<'_> {
    DatasetStream {
        manifest,
        range: 0..manifest.entries.len(),
        load_labels: true,
    }
}

impl<'a> DatasetStream<'a> {
    /// Skips ground-truth files.
    pub fn without_labels(mut self) -> Self {
        self.load_labels = false;
        self
    }

    /// Restricts the stream to entries `range` (for sharded passes).
    pub fn restrict(mut self, range: Range<usize>) -> Self {
        let end = range.end.min(self.manifest.entries.len());
        self.range = range.start.min(end)..end;
        self
    }

    fn load(&self, entry: &ManifestEntry) -> Result<DatasetItem> {
        let space = &self.manifest.label_space;
        let file = File::open(self.manifest.resolve(&entry.prob_path))?;
        let map = read_prob_map(BufReader::new(file))?;
        if map.num_classes() != space.num_classes() {
            return Err(Error::dim(format!(
                "map has {} classes, label space has {}",
                map.num_classes(),
                space.num_classes()
            )));
        }
        let labels = match (&entry.label_path, self.load_labels) {
            (Some(path), true) => {
                let file = File::open(self.manifest.resolve(path))?;
                let grid = read_label_map(BufReader::new(file), space)?;
                if (grid.width(), grid.height()) != (map.width(), map.height()) {
                    return Err(Error::dim(format!(
                        "labels are {}x{}, probabilities {}x{}",
                        grid.width(),
                        grid.height(),
                        map.width(),
                        map.height()
                    )));
                }
                Some(grid)
            }
            _ => None,
        };
        Ok(DatasetItem {
            id: entry.id.clone(),
            map,
            labels,
        })
    }
}

impl Iterator for DatasetStream<'_> {
    type Item = Result<DatasetItem>;

    fn next(&mut self) -> Option<Self::Item> {
        let idx = self.range.next()?;
        let entry = &self.manifest.entries[idx];
        Some(self.load(entry).map_err(|e| e.for_entry(&entry.id)))
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        self.range.size_hint()
    }
}

impl ExactSizeIterator for DatasetStream<'_> {}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::binary::{write_label_map, write_prob_map};

    fn entry(id: &str) -> ManifestEntry {
        ManifestEntry {
            id: id.to_owned(),
            prob_path: format!("{id}.pcpm").into(),
            label_path: None,
        }
    }

    fn write_fixture(dir: &Path, id: &str, first: f64) {
        let map = ProbMap::new(1, 1, 2, vec![first, 1.0 - first]).unwrap();
        write_prob_map(&map, File::create(dir.join(format!("{id}.pcpm"))).unwrap()).unwrap();
        let grid = LabelGrid::new(1, 1, vec![0]).unwrap();
        write_label_map(&grid, File::create(dir.join(format!("{id}.pclm"))).unwrap()).unwrap();
    }

    #[test]
    fn parses_preset_and_inline_label_spaces() {
        let preset = r#"{"label_space": "cityscapes", "entries": []}"#;
        let m = DatasetManifest::from_json(preset, Path::new("/data")).unwrap();
        assert_eq!(m.label_space().num_classes(), 19);
        assert!(m.is_empty());

        let inline = r#"{
            "label_space": {"num_classes": 2, "class_names": ["a", "b"]},
            "entries": [{"id": "x", "prob": "x.pcpm", "label": "x.pclm"}]
        }"#;
        let m = DatasetManifest::from_json(inline, Path::new("/data")).unwrap();
        assert_eq!(
            m.resolve(&m.entries()[0].prob_path),
            Path::new("/data/x.pcpm")
        );
        let again = DatasetManifest::from_json(&m.to_json().unwrap(), Path::new("/data")).unwrap();
        assert_eq!(again, m);
    }

    #[test]
    fn rejects_bad_entries() {
        let space = LabelSpace::numbered(2).unwrap();
        assert!(DatasetManifest::new(space.clone(), vec![entry("a"), entry("a")], "").is_err());
        assert!(DatasetManifest::new(space.clone(), vec![entry("../x")], "").is_err());
        let mut empty = entry("a");
        empty.prob_path = PathBuf::new();
        assert!(DatasetManifest::new(space, vec![empty], "").is_err());
    }

    #[test]
    fn streams_in_order_and_reports_ids() {
        let dir = tempfile::tempdir().unwrap();
        write_fixture(dir.path(), "a", 0.75);
        write_fixture(dir.path(), "b", 0.25);
        let mut b = entry("b");
        b.label_path = Some("b.pclm".into());
        let space = LabelSpace::numbered(2).unwrap();
        let manifest =
            DatasetManifest::new(space.clone(), vec![entry("a"), b.clone()], dir.path()).unwrap();

        let items: Vec<_> = manifest.stream().collect::<Result<_>>().unwrap();
        assert_eq!(items.len(), 2);
        assert_eq!(items[0].id, "a");
        assert_eq!(items[0].map.pixel(0), &[0.75, 0.25]);
        assert!(items[0].labels.is_none());
        assert!(items[1].labels.is_some());
        assert!(manifest
            .stream()
            .without_labels()
            .all(|r| r.unwrap().labels.is_none()));
        assert_eq!(manifest.stream().restrict(1..5).count(), 1);
        assert!(manifest.require_labels().is_err());

        let missing =
            DatasetManifest::new(space, vec![entry("a"), entry("gone")], dir.path()).unwrap();
        let results: Vec<_> = missing.stream().collect();
        assert!(results[0].is_ok());
        let err = results[1].as_ref().unwrap_err();
        assert_eq!(err.entry_id(), Some("gone"));
    }

    #[test]
    fn empty_manifest_streams_nothing() {
        let m = DatasetManifest::new(LabelSpace::numbered(2).unwrap(), vec![], "").unwrap();
        assert_eq!(m.stream().count(), 0);
    }
}
