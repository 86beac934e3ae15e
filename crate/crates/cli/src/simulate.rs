//! `labelcal simulate`: the synthetic shift experiment, optionally exported
//! as a dataset the other commands can consume.

use std::fs;
use std::path::{Path, PathBuf};

use labelcal_core::io::{save_label_grid, save_prob_map, DatasetManifest, ManifestEntry};
use labelcal_core::sim::{
    generate_experiment_data, run_experiment, run_sweep, sweep_csv, ExperimentReport, SeedSummary,
    SimulationConfig, EXPERIMENT_SCHEMA_VERSION,
};
use labelcal_core::LabelSpace;
use serde::Serialize;

use crate::args::SimulateArgs;
use crate::{create_out_dir, write_json, write_text, CliError, CliResult};

pub const EXPERIMENT_JSON: &str = "experiment.json";
pub const SWEEP_CSV: &str = "sweep.csv";
pub const DATASET_DIR: &str = "dataset";
pub const FIT_MANIFEST: &str = "fit_manifest.json";
pub const HOLDOUT_MANIFEST: &str = "holdout_manifest.json";

#[derive(Debug, Clone, Serialize)]
pub struct SimulationOutput {
    pub schema_version: u32,
    pub config: SimulationConfig,
    /// One summary per noise scale.
    pub summaries: Vec<SeedSummary>,
    pub runs: Vec<ExperimentReport>,
}

pub fn load_config(path: Option<&Path>) -> CliResult<SimulationConfig> {
    match path {
        None => Ok(SimulationConfig::boundary_confusion()),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(CliError::io(p))?;
            Ok(serde_json::from_str(&text).map_err(labelcal_core::Error::from)?)
        }
    }
}

pub fn run(args: &SimulateArgs) -> CliResult<SimulationOutput> {
    let mut config = load_config(args.config.as_deref())?;
    if let Some(seed) = args.seed {
        config = config.with_seed(seed);
    }
    let model = config.shift_model()?;
    let noise_scales = config
        .noise_scales
        .clone()
        .unwrap_or_else(|| vec![model.noise_scale()]);
    if args.export && noise_scales.len() != 1 {
        return Err(CliError::usage(
            "--export needs a config with a single noise scale",
        ));
    }

    let sweep = match &config.seeds {
        Some(seeds) => run_sweep(
            &config.scene,
            &model,
            config.holdout_fraction,
            &noise_scales,
            seeds,
        )?,
        None => noise_scales
            .iter()
            .map(|&sigma| {
                let m = model.clone().with_noise_scale(sigma)?;
                let run = run_experiment(&config.scene, &m, config.holdout_fraction)?;
                let summary = SeedSummary::from_runs(
                    sigma,
                    &[config.scene.seed()],
                    std::slice::from_ref(&run),
                );
                Ok((vec![run], summary))
            })
            .collect::<labelcal_core::Result<Vec<_>>>()?,
    };

    create_out_dir(&args.out)?;
    write_text(args.out.join(SWEEP_CSV), &sweep_csv(&sweep))?;
    let output = SimulationOutput {
        schema_version: EXPERIMENT_SCHEMA_VERSION,
        summaries: sweep.iter().map(|(_, s)| s.clone()).collect(),
        runs: sweep.into_iter().flat_map(|(runs, _)| runs).collect(),
        config,
    };
    write_json(args.out.join(EXPERIMENT_JSON), &output)?;
    if args.export {
        export_dataset(&output.config, &args.out.join(DATASET_DIR))?;
    }
    Ok(output)
}

/// Writes each seed's fit and holdout splits under `dir/seed_<s>/` with a
/// manifest per split.
pub fn export_dataset(config: &SimulationConfig, dir: &Path) -> CliResult<Vec<PathBuf>> {
    let model = config.shift_model()?;
    let seeds: Vec<(u64, u64)> = match &config.seeds {
        Some(seeds) => seeds.iter().map(|&s| (s, s)).collect(),
        None => vec![(config.scene.seed(), model.seed())],
    };
    let space = LabelSpace::numbered(config.scene.num_classes())?;
    let mut dirs = Vec::new();
    for (scene_seed, shift_seed) in seeds {
        let data = generate_experiment_data(
            &config.scene.clone().with_seed(scene_seed),
            &model.clone().with_seed(shift_seed),
            config.holdout_fraction,
        )?;
        let seed_dir = dir.join(format!("seed_{scene_seed}"));
        create_out_dir(&seed_dir)?;
        let splits = [
            ("fit", FIT_MANIFEST, &data.fit_map, &data.fit_labels),
            (
                "holdout",
                HOLDOUT_MANIFEST,
                &data.holdout_map,
                &data.holdout_labels,
            ),
        ];
        for (id, manifest_name, map, labels) in splits {
            let prob = PathBuf::from(format!("{id}.pcpm"));
            let label = PathBuf::from(format!("{id}_gt.pclm"));
            save_prob_map(map, &seed_dir.join(&prob))?;
            save_label_grid(labels, &seed_dir.join(&label))?;
            let manifest = DatasetManifest::new(
                space.clone(),
                vec![ManifestEntry {
                    id: id.to_owned(),
                    prob_path: prob,
                    label_path: Some(label),
                }],
                &seed_dir,
            )?;
            write_text(seed_dir.join(manifest_name), &manifest.to_json()?)?;
        }
        dirs.push(seed_dir);
    }
    Ok(dirs)
}
