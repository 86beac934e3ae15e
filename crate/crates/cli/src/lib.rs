//! The `labelcal` command line: fit, predict, eval, simulate and bench over
//! dataset manifests.
//!
//! Every command writes only under its `--out` directory. Exit status is 0 on
//! success, [`EXIT_USAGE`] for bad flags or unreadable/unwritable paths and
//! [`EXIT_DATA`] for inputs whose contents are invalid.

pub mod args;
pub mod bench;
pub mod error;
pub mod eval;
pub mod fit;
pub mod predict;
pub mod simulate;

use std::fs;
use std::path::{Path, PathBuf};

use labelcal_core::io::DatasetManifest;
use serde::Serialize;

pub use args::{Cli, Command, Mode};
pub use error::{CliError, CliResult, EXIT_DATA, EXIT_OK, EXIT_USAGE};

/// Version of every JSON summary the commands write.
pub const SUMMARY_SCHEMA_VERSION: u32 = 1;

/// Runs one parsed command line, printing a short summary to stdout.
pub fn run(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Fit(a) => {
            let s = fit::run(a)?;
            println!(
                "fit {} entries, {} pixels in {:.3}s; unobserved classes: {}",
                s.num_entries,
                s.num_pixels,
                s.wall_time_seconds,
                list_or_none(&s.unobserved_classes)
            );
        }
        Command::Predict(a) => {
            let s = predict::run(a)?;
            match s.total_flips {
                Some(f) => println!(
                    "predicted {} entries ({} mode), {} of {} pixels flipped",
                    s.entries.len(),
                    s.mode,
                    f,
                    s.total_pixels
                ),
                None => println!("predicted {} entries ({} mode)", s.entries.len(), s.mode),
            }
        }
        Command::Eval(a) => {
            let out = eval::run(a)?;
            print!("{}", out.report.to_text_table());
            if let Some(delta) = &out.delta {
                print!("\n{}", delta.to_csv());
            }
        }
        Command::Simulate(a) => {
            let out = simulate::run(a)?;
            for s in &out.summaries {
                println!(
                    "sigma {}: argmax accuracy {:.4}, calibrated {:.4}, gain {:+.6} over {} seed(s)",
                    s.noise_scale,
                    s.argmax_accuracy.mean,
                    s.calibrated_accuracy.mean,
                    s.accuracy_gain,
                    s.seeds.len()
                );
            }
        }
        Command::Bench(a) => {
            let s = bench::run(a)?;
            for p in &s.phases {
                println!(
                    "{:<10} x{:<3} median {:.4}s  {:.3e} px/s",
                    p.phase, p.scale, p.median_seconds, p.pixels_per_second
                );
            }
            println!(
                "calibrated / argmax throughput: {:.3}",
                s.calibrated_to_argmax_throughput_ratio
            );
        }
    }
    Ok(())
}

fn list_or_none(items: &[String]) -> String {
    if items.is_empty() {
        "none".to_owned()
    } else {
        items.join(", ")
    }
}

pub(crate) fn load_manifest(path: &Path) -> CliResult<DatasetManifest> {
    let text = fs::read_to_string(path).map_err(CliError::io(path))?;
    let base = path.parent().unwrap_or(Path::new(""));
    Ok(DatasetManifest::from_json(&text, base)?)
}

pub(crate) fn create_out_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(CliError::io(dir))
}

pub(crate) fn write_text(path: PathBuf, contents: &str) -> CliResult<()> {
    fs::write(&path, contents).map_err(CliError::io(path))
}

pub(crate) fn write_json<T: Serialize>(path: PathBuf, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(labelcal_core::Error::from)?;
    text.push('\n');
    write_text(path, &text)
}

/// Attaches an entry id to a core error, as the dataset stream does.
pub(crate) fn for_entry(id: &str, e: labelcal_core::Error) -> labelcal_core::Error {
    labelcal_core::Error::Entry {
        id: id.to_owned(),
        source: Box::new(e),
    }
}
