//! `labelcal bench`: wall time of fit and both prediction modes.
//!
//! Maps are loaded once up front so file IO is not timed. Fit is timed at
//! each requested dataset multiple by cycling over the loaded entries, with
//! the multiples interleaved per repetition. Each phase gets one untimed
//! warm-up run.

use std::fmt::Write as _;
use std::hint::black_box;
use std::time::Instant;

use labelcal_core::{predict_map, ProbMap, PrototypeAccumulator, PrototypeSet};
use serde::Serialize;

use crate::args::BenchArgs;
use crate::{
    create_out_dir, load_manifest, write_json, write_text, CliError, CliResult,
    SUMMARY_SCHEMA_VERSION,
};

pub const SAMPLES_CSV: &str = "bench_samples.csv";
pub const SUMMARY_CSV: &str = "bench_summary.csv";
pub const SUMMARY_JSON: &str = "bench_summary.json";

#[derive(Debug, Clone, Serialize)]
pub struct Sample {
    pub phase: &'static str,
    pub scale: u32,
    pub rep: u32,
    pub seconds: f64,
    /// Pixels the phase read (fit) or labelled (predict).
    pub pixels_visited: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PhaseSummary {
    pub phase: &'static str,
    pub scale: u32,
    pub reps: u32,
    /// Input pixels at this scale.
    pub pixels: u64,
    pub pixels_visited: u64,
    pub median_seconds: f64,
    pub min_seconds: f64,
    /// Input pixels over the median time.
    pub pixels_per_second: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FitScaling {
    pub scale: u32,
    pub median_seconds: f64,
    /// Median time relative to the smallest scale.
    pub time_ratio: f64,
    /// `time_ratio` divided by the size ratio; 1 is perfectly linear.
    pub normalized_ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchSummary {
    pub schema_version: u32,
    pub num_entries: usize,
    pub num_classes: usize,
    pub pixels: u64,
    pub reps: u32,
    pub phases: Vec<PhaseSummary>,
    pub calibrated_to_argmax_throughput_ratio: f64,
    pub fit_scaling: Vec<FitScaling>,
    #[serde(skip)]
    pub samples: Vec<Sample>,
}

pub fn run(args: &BenchArgs) -> CliResult<BenchSummary> {
    let mut scales = args.scales.clone();
    if scales.is_empty() || scales.contains(&0) {
        return Err(CliError::usage("--scales must list positive integers"));
    }
    scales.sort_unstable();
    scales.dedup();

    let manifest = load_manifest(&args.manifest)?;
    let maps: Vec<ProbMap> = manifest
        .stream()
        .without_labels()
        .map(|item| item.map(|i| i.map))
        .collect::<labelcal_core::Result<_>>()?;
    let space = manifest.label_space();
    let pixels: u64 = maps.iter().map(|m| m.num_pixels() as u64).sum();

    let fit = |scale: u32| -> labelcal_core::Result<(PrototypeSet, u64)> {
        let mut acc = PrototypeAccumulator::new(space.num_classes());
        for _ in 0..scale {
            for m in &maps {
                acc.accumulate(m)?;
            }
        }
        Ok((PrototypeSet::finalize(&acc, space)?, acc.pixels_seen()))
    };
    let predict = |protos: Option<&PrototypeSet>| -> labelcal_core::Result<u64> {
        let mut labelled = 0u64;
        for m in &maps {
            labelled += black_box(predict_map(m, protos)?).labels().len() as u64;
        }
        Ok(labelled)
    };

    let mut samples = Vec::new();
    for &scale in &scales {
        fit(scale)?;
    }
    // scales alternate within each repetition so drift hits all of them alike
    for rep in 0..args.reps {
        for &scale in &scales {
            let start = Instant::now();
            let (protos, visited) = fit(scale)?;
            let seconds = start.elapsed().as_secs_f64();
            black_box(protos);
            samples.push(Sample {
                phase: "fit",
                scale,
                rep,
                seconds,
                pixels_visited: visited,
            });
        }
    }
    let (protos, _) = fit(1)?;
    for (phase, p) in [("argmax", None), ("calibrated", Some(&protos))] {
        predict(p)?;
        for rep in 0..args.reps {
            let start = Instant::now();
            let visited = predict(p)?;
            let seconds = start.elapsed().as_secs_f64();
            samples.push(Sample {
                phase,
                scale: 1,
                rep,
                seconds,
                pixels_visited: visited,
            });
        }
    }

    let mut phases = Vec::new();
    for &scale in &scales {
        phases.push(summarize(&samples, "fit", scale, pixels * scale as u64));
    }
    phases.push(summarize(&samples, "argmax", 1, pixels));
    phases.push(summarize(&samples, "calibrated", 1, pixels));

    let throughput = |name: &str| {
        phases
            .iter()
            .find(|p| p.phase == name)
            .map_or(f64::NAN, |p| p.pixels_per_second)
    };
    let base = &phases[0];
    let fit_scaling = phases
        .iter()
        .filter(|p| p.phase == "fit")
        .map(|p| {
            let time_ratio = p.median_seconds / base.median_seconds;
            FitScaling {
                scale: p.scale,
                median_seconds: p.median_seconds,
                time_ratio,
                normalized_ratio: time_ratio / (p.scale as f64 / base.scale as f64),
            }
        })
        .collect();
    let summary = BenchSummary {
        schema_version: SUMMARY_SCHEMA_VERSION,
        num_entries: maps.len(),
        num_classes: space.num_classes(),
        pixels,
        reps: args.reps,
        calibrated_to_argmax_throughput_ratio: throughput("calibrated") / throughput("argmax"),
        phases,
        fit_scaling,
        samples,
    };

    create_out_dir(&args.out)?;
    write_text(args.out.join(SAMPLES_CSV), &samples_csv(&summary.samples))?;
    write_text(args.out.join(SUMMARY_CSV), &summary_csv(&summary.phases))?;
    write_json(args.out.join(SUMMARY_JSON), &summary)?;
    Ok(summary)
}

fn summarize(samples: &[Sample], phase: &'static str, scale: u32, pixels: u64) -> PhaseSummary {
    let mine: Vec<&Sample> = samples
        .iter()
        .filter(|s| s.phase == phase && s.scale == scale)
        .collect();
    let mut times: Vec<f64> = mine.iter().map(|s| s.seconds).collect();
    times.sort_by(f64::total_cmp);
    let n = times.len();
    let median = if n % 2 == 1 {
        times[n / 2]
    } else {
        0.5 * (times[n / 2 - 1] + times[n / 2])
    };
    PhaseSummary {
        phase,
        scale,
        reps: n as u32,
        pixels,
        pixels_visited: mine.first().map_or(0, |s| s.pixels_visited),
        median_seconds: median,
        min_seconds: times[0],
        pixels_per_second: pixels as f64 / median,
    }
}

pub fn samples_csv(samples: &[Sample]) -> String {
    let mut out = String::from("phase,scale,rep,seconds,pixels_visited\n");
    for s in samples {
        let _ = writeln!(
            out,
            "{},{},{},{:.9},{}",
            s.phase, s.scale, s.rep, s.seconds, s.pixels_visited
        );
    }
    out
}

pub fn summary_csv(phases: &[PhaseSummary]) -> String {
    let mut out = String::from(
        "phase,scale,reps,pixels,pixels_visited,median_seconds,min_seconds,pixels_per_second\n",
    );
    for p in phases {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{:.9},{:.9},{:.1}",
            p.phase,
            p.scale,
            p.reps,
            p.pixels,
            p.pixels_visited,
            p.median_seconds,
            p.min_seconds,
            p.pixels_per_second
        );
    }
    out
}
