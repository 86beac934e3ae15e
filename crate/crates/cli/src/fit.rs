//! `labelcal fit`: one streaming pass, fail-fast.

use std::path::Path;
use std::sync::atomic::{AtomicBool, Ordering};
use std::thread;
use std::time::Instant;

use labelcal_core::io::{save_prototypes, DatasetManifest};
use labelcal_core::{PrototypeAccumulator, PrototypeSet, Result};
use serde::Serialize;

use crate::args::FitArgs;
use crate::{
    create_out_dir, for_entry, load_manifest, write_json, CliResult, SUMMARY_SCHEMA_VERSION,
};

pub const PROTOTYPES_CSV: &str = "prototypes.csv";
pub const PROTOTYPES_JSON: &str = "prototypes.json";
pub const FIT_SUMMARY: &str = "fit_summary.json";

#[derive(Debug, Clone, Serialize)]
pub struct ClassSummary {
    pub index: usize,
    pub name: String,
    pub observed: bool,
    pub pixel_count: u64,
    pub source_weight: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FitSummary {
    pub schema_version: u32,
    pub num_entries: usize,
    pub num_pixels: u64,
    pub num_classes: usize,
    pub threads: usize,
    pub classes: Vec<ClassSummary>,
    /// Names of classes that fell back to one-hot prototypes.
    pub unobserved_classes: Vec<String>,
    pub wall_time_seconds: f64,
}

pub fn run(args: &FitArgs) -> CliResult<FitSummary> {
    let manifest = load_manifest(&args.manifest)?;
    let start = Instant::now();
    let acc = accumulate_manifest(&manifest, args.threads as usize)?;
    let protos = PrototypeSet::finalize(&acc, manifest.label_space())?;
    let wall_time_seconds = start.elapsed().as_secs_f64();

    let summary = summarize(
        &manifest,
        &acc,
        &protos,
        args.threads as usize,
        wall_time_seconds,
    );
    // nothing is written unless the whole pass succeeded
    write_outputs(&args.out, &protos, &summary)?;
    Ok(summary)
}

/// Accumulates every entry, sharding contiguous entry ranges over up to
/// `threads` threads and merging the shards in order. Stops at the first error.
pub fn accumulate_manifest(
    manifest: &DatasetManifest,
    threads: usize,
) -> Result<PrototypeAccumulator> {
    let c = manifest.label_space().num_classes();
    let n = manifest.len();
    let shards = threads.clamp(1, n.max(1));
    if shards == 1 {
        return accumulate_range(manifest, 0..n, &AtomicBool::new(false));
    }
    let stop = AtomicBool::new(false);
    let per = n.div_ceil(shards);
    let results: Vec<Result<PrototypeAccumulator>> = thread::scope(|s| {
        let handles: Vec<_> = (0..shards)
            .map(|k| {
                let range = (k * per).min(n)..((k + 1) * per).min(n);
                let stop = &stop;
                s.spawn(move || accumulate_range(manifest, range, stop))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("fit worker panicked"))
            .collect()
    });
    let mut total = PrototypeAccumulator::new(c);
    for r in results {
        total.merge(&r?)?;
    }
    Ok(total)
}

fn accumulate_range(
    manifest: &DatasetManifest,
    range: std::ops::Range<usize>,
    stop: &AtomicBool,
) -> Result<PrototypeAccumulator> {
    let mut acc = PrototypeAccumulator::new(manifest.label_space().num_classes());
    for item in manifest.stream().without_labels().restrict(range) {
        if stop.load(Ordering::Relaxed) {
            break;
        }
        let outcome = item.and_then(|item| {
            acc.accumulate(&item.map)
                .map_err(|e| for_entry(&item.id, e))
        });
        if let Err(e) = outcome {
            stop.store(true, Ordering::Relaxed);
            return Err(e);
        }
    }
    Ok(acc)
}

fn summarize(
    manifest: &DatasetManifest,
    acc: &PrototypeAccumulator,
    protos: &PrototypeSet,
    threads: usize,
    wall_time_seconds: f64,
) -> FitSummary {
    let names = protos.class_names();
    let classes = (0..protos.num_classes())
        .map(|c| ClassSummary {
            index: c,
            name: names[c].clone(),
            observed: protos.observed()[c],
            pixel_count: acc.pixel_count()[c],
            source_weight: protos.source_weight()[c],
        })
        .collect();
    FitSummary {
        schema_version: SUMMARY_SCHEMA_VERSION,
        num_entries: manifest.len(),
        num_pixels: acc.pixels_seen(),
        num_classes: protos.num_classes(),
        threads,
        classes,
        unobserved_classes: protos
            .unobserved_classes()
            .into_iter()
            .map(|c| names[c].clone())
            .collect(),
        wall_time_seconds,
    }
}

fn write_outputs(out: &Path, protos: &PrototypeSet, summary: &FitSummary) -> CliResult<()> {
    create_out_dir(out)?;
    save_prototypes(protos, &out.join(PROTOTYPES_CSV))?;
    save_prototypes(protos, &out.join(PROTOTYPES_JSON))?;
    write_json(out.join(FIT_SUMMARY), summary)
}
