//! `labelcal predict`: one label map per entry plus a flip count.

use std::path::Path;
use std::time::Instant;

use labelcal_core::io::{load_prototypes, save_label_grid};
use labelcal_core::{predict_both, predict_map, Error, LabelSpace, PrototypeSet};
use serde::Serialize;

use crate::args::{Mode, PredictArgs};
use crate::{
    create_out_dir, for_entry, load_manifest, write_json, CliError, CliResult,
    SUMMARY_SCHEMA_VERSION,
};

pub const PREDICT_SUMMARY: &str = "predict_summary.json";
pub const PREDICTION_EXT: &str = "pclm";

#[derive(Debug, Clone, Serialize)]
pub struct EntrySummary {
    pub id: String,
    pub pixels: u64,
    /// Pixels where the calibrated label differs from argmax; absent in argmax mode.
    pub flips: Option<u64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PredictSummary {
    pub schema_version: u32,
    pub mode: &'static str,
    pub entries: Vec<EntrySummary>,
    pub total_pixels: u64,
    pub total_flips: Option<u64>,
    pub wall_time_seconds: f64,
}

pub fn prediction_path(dir: &Path, id: &str) -> std::path::PathBuf {
    dir.join(format!("{id}.{PREDICTION_EXT}"))
}

pub fn run(args: &PredictArgs) -> CliResult<PredictSummary> {
    let manifest = load_manifest(&args.manifest)?;
    // argmax mode never opens the prototype file
    let protos = match (args.mode, &args.protos) {
        (Mode::Argmax, _) => None,
        (Mode::Calibrated, None) => {
            return Err(CliError::usage("calibrated mode needs --protos"));
        }
        (Mode::Calibrated, Some(path)) => {
            if !path.is_file() {
                return Err(CliError::usage(format!(
                    "prototype file {} not found",
                    path.display()
                )));
            }
            let protos = load_prototypes(path)?;
            check_prototypes(&protos, manifest.label_space())?;
            Some(protos)
        }
    };

    create_out_dir(&args.out)?;
    let start = Instant::now();
    let mut entries = Vec::with_capacity(manifest.len());
    for item in manifest.stream().without_labels() {
        let item = item?;
        let pixels = item.map.num_pixels() as u64;
        let (labels, flips) = match &protos {
            Some(p) => {
                let (_, calibrated, flips) =
                    predict_both(&item.map, p).map_err(|e| for_entry(&item.id, e))?;
                (calibrated, Some(flips))
            }
            None => (
                predict_map(&item.map, None).map_err(|e| for_entry(&item.id, e))?,
                None,
            ),
        };
        save_label_grid(labels.grid(), &prediction_path(&args.out, &item.id))
            .map_err(|e| for_entry(&item.id, e))?;
        entries.push(EntrySummary {
            id: item.id,
            pixels,
            flips,
        });
    }
    let summary = PredictSummary {
        schema_version: SUMMARY_SCHEMA_VERSION,
        mode: args.mode.as_str(),
        total_pixels: entries.iter().map(|e| e.pixels).sum(),
        total_flips: protos
            .as_ref()
            .map(|_| entries.iter().filter_map(|e| e.flips).sum()),
        entries,
        wall_time_seconds: start.elapsed().as_secs_f64(),
    };
    write_json(args.out.join(PREDICT_SUMMARY), &summary)?;
    Ok(summary)
}

fn check_prototypes(protos: &PrototypeSet, space: &LabelSpace) -> labelcal_core::Result<()> {
    if protos.num_classes() != space.num_classes() {
        return Err(Error::Dimension(format!(
            "prototypes have {} classes, manifest label space {}",
            protos.num_classes(),
            space.num_classes()
        )));
    }
    if protos.class_names() != space.class_names() {
        return Err(Error::Validation(
            "prototype class names differ from the manifest label space".into(),
        ));
    }
    Ok(())
}
