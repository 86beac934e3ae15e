//! File formats: probability maps, label maps, prototype matrices and dataset manifests.

mod binary;
mod manifest;
mod prototype_file;

pub use binary::{
    read_label_grid, read_label_map, read_prob_map, write_label_map, write_prob_map,
    FORMAT_VERSION, LABEL_HEADER_LEN, LABEL_MAGIC, PROB_HEADER_LEN, PROB_MAGIC,
};
pub use manifest::{stream_dataset, DatasetItem, DatasetManifest, DatasetStream, ManifestEntry};
pub use prototype_file::{
    export_prototypes, format_sig17, import_prototypes, load_prototypes, save_prototypes,
    PrototypeFormat, PROTOTYPE_SCHEMA_VERSION,
};

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use crate::calibration::ProbMap;
use crate::error::Result;
use crate::labels::LabelGrid;

pub fn load_prob_map(path: &Path) -> Result<ProbMap> {
    read_prob_map(BufReader::new(File::open(path)?))
}

pub fn save_prob_map(map: &ProbMap, path: &Path) -> Result<u64> {
    let mut out = BufWriter::new(File::create(path)?);
    let n = write_prob_map(map, &mut out)?;
    out.flush()?;
    Ok(n)
}

pub fn load_label_grid(path: &Path) -> Result<LabelGrid> {
    read_label_grid(BufReader::new(File::open(path)?))
}

pub fn save_label_grid(grid: &LabelGrid, path: &Path) -> Result<u64> {
    let mut out = BufWriter::new(File::create(path)?);
    let n = write_label_map(grid, &mut out)?;
    out.flush()?;
    Ok(n)
}
