//! `labelcal eval`: confusion matrices over the manifest's ground truth.
//!
//! Entries whose files are missing or malformed are skipped with a warning
//! and listed in the report. With `--compare`, an entry is kept only if both
//! prediction directories have a usable map for it.

use std::path::Path;

use labelcal_core::io::load_label_grid;
use labelcal_core::{
    compare_reports, ConfusionMatrix, Error, EvalReport, LabelGrid, LabelSpace, PredictionMap,
    ReportDelta,
};
use log::warn;

use crate::args::EvalArgs;
use crate::predict::prediction_path;
use crate::{create_out_dir, load_manifest, write_json, write_text, CliError, CliResult};

pub const REPORT_JSON: &str = "eval_report.json";
pub const REPORT_TEXT: &str = "eval_report.txt";
pub const COMPARE_JSON: &str = "eval_report_compare.json";
pub const COMPARE_TEXT: &str = "eval_report_compare.txt";
pub const DELTA_CSV: &str = "eval_delta.csv";

#[derive(Debug, Clone)]
pub struct EvalOutput {
    pub report: EvalReport,
    pub compare: Option<EvalReport>,
    pub delta: Option<ReportDelta>,
}

pub fn run(args: &EvalArgs) -> CliResult<EvalOutput> {
    let manifest = load_manifest(&args.manifest)?;
    let space = manifest.label_space();
    for name in &args.subsets {
        if space.subset(name).is_err() {
            return Err(CliError::usage(format!(
                "unknown subset {name:?}; the label space defines {}",
                space
                    .eval_subsets()
                    .keys()
                    .cloned()
                    .collect::<Vec<_>>()
                    .join(", ")
            )));
        }
    }
    manifest.require_labels()?;
    for dir in std::iter::once(&args.predictions).chain(&args.compare) {
        if !dir.is_dir() {
            return Err(CliError::usage(format!(
                "{} is not a directory",
                dir.display()
            )));
        }
    }

    let mut cm = ConfusionMatrix::new(space);
    let mut cm_compare = ConfusionMatrix::new(space);
    let mut skipped = Vec::new();
    for entry in manifest.entries() {
        let label_path = manifest.resolve(entry.label_path.as_ref().expect("checked above"));
        let outcome = (|| -> labelcal_core::Result<()> {
            let gt = load_label_grid(&label_path)?;
            gt.validate(space)?;
            let mut a = ConfusionMatrix::new(space);
            a.update(
                &load_prediction(&args.predictions, &entry.id, space, &gt)?,
                &gt,
            )?;
            let mut b = ConfusionMatrix::new(space);
            if let Some(dir) = &args.compare {
                b.update(&load_prediction(dir, &entry.id, space, &gt)?, &gt)?;
            }
            cm.merge(&a)?;
            cm_compare.merge(&b)?;
            Ok(())
        })();
        if let Err(e) = outcome {
            warn!("skipping entry {:?}: {e}", entry.id);
            skipped.push(entry.id.clone());
        }
    }

    let build = |cm: &ConfusionMatrix| -> CliResult<EvalReport> {
        let mut report = EvalReport::from_confusion(cm, space, &args.subsets)?;
        report.skipped_entries = skipped.clone();
        Ok(report)
    };
    let report = build(&cm)?;
    let compare = match &args.compare {
        Some(_) => Some(build(&cm_compare)?),
        None => None,
    };
    let delta = match &compare {
        Some(b) => Some(compare_reports(&report, b)?),
        None => None,
    };

    create_out_dir(&args.out)?;
    write_json(args.out.join(REPORT_JSON), &report)?;
    write_text(args.out.join(REPORT_TEXT), &report.to_text_table())?;
    if let (Some(b), Some(d)) = (&compare, &delta) {
        write_json(args.out.join(COMPARE_JSON), b)?;
        write_text(args.out.join(COMPARE_TEXT), &b.to_text_table())?;
        write_text(args.out.join(DELTA_CSV), &d.to_csv())?;
    }
    Ok(EvalOutput {
        report,
        compare,
        delta,
    })
}

fn load_prediction(
    dir: &Path,
    id: &str,
    space: &LabelSpace,
    gt: &LabelGrid,
) -> labelcal_core::Result<PredictionMap> {
    let grid = load_label_grid(&prediction_path(dir, id))?;
    if (grid.width(), grid.height()) != (gt.width(), gt.height()) {
        return Err(Error::Dimension(format!(
            "prediction is {}x{}, ground truth {}x{}",
            grid.width(),
            grid.height(),
            gt.width(),
            gt.height()
        )));
    }
    PredictionMap::new(space.num_classes(), grid)
}
