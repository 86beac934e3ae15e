#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use labelcal_core::io::{save_label_grid, save_prob_map, DatasetManifest, ManifestEntry};
use labelcal_core::{LabelGrid, LabelSpace, ProbMap};

pub fn labelcal(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_labelcal"))
        .args(args)
        .output()
        .expect("run labelcal")
}

/// Runs and asserts success, returning stdout.
pub fn labelcal_ok(args: &[&str]) -> String {
    let out = labelcal(args);
    assert!(
        out.status.success(),
        "labelcal {args:?} failed ({:?}): {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

pub fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

pub fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn blessing() -> bool {
    std::env::var_os("LABELCAL_BLESS").is_some()
}

/// Pixel-major rows into a `width x 1` map.
pub fn row_map(pixels: &[&[f64]]) -> ProbMap {
    let c = pixels[0].len();
    ProbMap::new(pixels.len(), 1, c, pixels.concat()).unwrap()
}

/// Writes `<id>.pcpm` (and `<id>_gt.pclm` when labels are given) for every
/// entry plus `manifest.json`, all in `dir`.
pub fn write_dataset(
    dir: &Path,
    space: &LabelSpace,
    entries: &[(&str, &ProbMap, Option<&LabelGrid>)],
) -> PathBuf {
    std::fs::create_dir_all(dir).unwrap();
    let mut listed = Vec::new();
    for (id, map, labels) in entries {
        let prob = PathBuf::from(format!("{id}.pcpm"));
        save_prob_map(map, &dir.join(&prob)).unwrap();
        let label = labels.map(|g| {
            let p = PathBuf::from(format!("{id}_gt.pclm"));
            save_label_grid(g, &dir.join(&p)).unwrap();
            p
        });
        listed.push(ManifestEntry {
            id: id.to_string(),
            prob_path: prob,
            label_path: label,
        });
    }
    let manifest = DatasetManifest::new(space.clone(), listed, dir).unwrap();
    let path = dir.join("manifest.json");
    std::fs::write(&path, manifest.to_json().unwrap()).unwrap();
    path
}

/// Random valid maps from a seeded generator: `count` maps of `w x h` over `c` classes.
pub fn random_maps(seed: u64, count: usize, w: usize, h: usize, c: usize) -> Vec<ProbMap> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let data: Vec<f64> = (0..w * h)
                .flat_map(|_| {
                    let p: Vec<f64> = (0..c).map(|_| rng.random::<f64>() + 1e-3).collect();
                    let sum: f64 = p.iter().sum();
                    p.into_iter().map(move |v| v / sum)
                })
                .collect();
            ProbMap::new(w, h, c, data).unwrap()
        })
        .collect()
}
