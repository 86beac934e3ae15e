//! Seeded synthetic domain shift.
//!
//! A scene is a grid of true classes drawn i.i.d. from class frequencies. A
//! [`ShiftModel`] turns each true class `y` into a distorted probability vector
//! `normalize(T[y] * g)`, where `T` is a row-stochastic mixing matrix and `g`
//! is log-normal jitter `exp(sigma * z)`. Calibration is then fitted on one
//! part of the scene's probability maps (labels unused) and scored on the rest.
//!
//! # Random streams
//!
//! Every pixel owns an independent ChaCha8 stream so generation is pure in
//! `(seed, pixel index)` and parallelizes by pixel range:
//!
//! * key: bytes `0..8` = seed (little-endian u64), bytes `8..16` = domain tag
//!   ([`SCENE_DOMAIN`] or [`SHIFT_DOMAIN`], little-endian u64), rest zero;
//! * stream id: row-major pixel index; word position 0.
//! * uniforms: `u = ((x >> 11) + 1) * 2^-53` from successive `u64` outputs `x`,
//!   so `u` lies in `(0, 1]`.
//! * scene class: smallest `c` with `u_0 <= cumsum(freq)[c]` (zero-frequency
//!   classes are never picked).
//! * jitter normals: Box-Muller on `(u_1, u_2)`, `(u_3, u_4)`, ... giving
//!   `sqrt(-2 ln u_a) cos(2 pi u_b)` then `... sin(...)` for classes `0, 1, ...`.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::calibration::{predict_both, ProbMap, PrototypeAccumulator, PrototypeSet};
use crate::error::{Error, Result};
use crate::eval::ConfusionMatrix;
use crate::label_space::{LabelSpace, MAX_CLASSES};
use crate::labels::LabelGrid;

pub const SCENE_DOMAIN: u64 = 1;
pub const SHIFT_DOMAIN: u64 = 2;
pub const EXPERIMENT_SCHEMA_VERSION: u32 = 1;

const ROW_TOLERANCE: f64 = 1e-9;

/// The per-pixel random stream described in the module docs.
pub struct PixelStream(ChaCha8Rng);

impl PixelStream {
    pub fn new(seed: u64, domain: u64, pixel: u64) -> Self {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&seed.to_le_bytes());
        key[8..16].copy_from_slice(&domain.to_le_bytes());
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(pixel);
        PixelStream(rng)
    }

    /// Uniform in `(0, 1]`.
    pub fn uniform(&mut self) -> f64 {
        ((self.0.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Fills `out` with standard normals.
    pub fn normals(&mut self, out: &mut [f64]) {
        for pair in out.chunks_mut(2) {
            let r = (-2.0 * self.uniform().ln()).sqrt();
            let theta = 2.0 * PI * self.uniform();
            pair[0] = r * theta.cos();
            if let Some(second) = pair.get_mut(1) {
                *second = r * theta.sin();
            }
        }
    }
}

/// How a true class is distorted into a probability vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawShiftModel", into = "RawShiftModel")]
pub struct ShiftModel {
    num_classes: usize,
    mixing: Vec<f64>,
    noise_scale: f64,
    seed: u64,
}

#[derive(Serialize, Deserialize)]
struct RawShiftModel {
    mixing: Vec<Vec<f64>>,
    noise_scale: f64,
    seed: u64,
}

impl TryFrom<RawShiftModel> for ShiftModel {
    type Error = Error;

    fn try_from(raw: RawShiftModel) -> Result<Self> {
        ShiftModel::new(raw.mixing, raw.noise_scale, raw.seed)
    }
}

impl From<ShiftModel> for RawShiftModel {
    fn from(m: ShiftModel) -> Self {
        RawShiftModel {
            mixing: m
                .mixing
                .chunks(m.num_classes)
                .map(<[f64]>::to_vec)
                .collect(),
            noise_scale: m.noise_scale,
            seed: m.seed,
        }
    }
}

impl ShiftModel {
    pub fn new(mixing: Vec<Vec<f64>>, noise_scale: f64, seed: u64) -> Result<Self> {
        let n = mixing.len();
        if n == 0 || n > MAX_CLASSES {
            return Err(Error::validation(format!("mixing matrix has {n} rows")));
        }
        for (y, row) in mixing.iter().enumerate() {
            if row.len() != n {
                return Err(Error::dim(format!(
                    "mixing row {y} has {} entries, expected {n}",
                    row.len()
                )));
            }
            if row.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::validation(format!(
                    "mixing row {y} has a negative or non-finite entry"
                )));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_TOLERANCE {
                return Err(Error::validation(format!("mixing row {y} sums to {sum}")));
            }
        }
        if !noise_scale.is_finite() || noise_scale < 0.0 {
            return Err(Error::validation(format!(
                "noise scale {noise_scale} must be >= 0"
            )));
        }
        Ok(ShiftModel {
            num_classes: n,
            mixing: mixing.concat(),
            noise_scale,
            seed,
        })
    }

    /// Each class keeps `diagonal` of its mass, leaks `confuser` to the next
    /// class (cyclically) and spreads the rest evenly over the others.
    pub fn boundary_confusion(
        num_classes: usize,
        diagonal: f64,
        confuser: f64,
        noise_scale: f64,
        seed: u64,
    ) -> Result<Self> {
        Self::new(
            boundary_confusion_matrix(num_classes, diagonal, confuser)?,
            noise_scale,
            seed,
        )
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    /// Row `y` of the mixing matrix.
    pub fn mixing_row(&self, y: usize) -> &[f64] {
        &self.mixing[y * self.num_classes..(y + 1) * self.num_classes]
    }

    pub fn noise_scale(&self) -> f64 {
        self.noise_scale
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_noise_scale(mut self, noise_scale: f64) -> Result<Self> {
        if !noise_scale.is_finite() || noise_scale < 0.0 {
            return Err(Error::validation(format!(
                "noise scale {noise_scale} must be >= 0"
            )));
        }
        self.noise_scale = noise_scale;
        Ok(self)
    }
}

pub fn boundary_confusion_matrix(
    num_classes: usize,
    diagonal: f64,
    confuser: f64,
) -> Result<Vec<Vec<f64>>> {
    let n = num_classes;
    if n < 2 {
        return Err(Error::validation(
            "boundary confusion needs at least 2 classes",
        ));
    }
    let rest = 1.0 - diagonal - confuser;
    if diagonal < 0.0
        || confuser < 0.0
        || rest < -ROW_TOLERANCE
        || (n == 2 && rest.abs() > ROW_TOLERANCE)
    {
        return Err(Error::validation(format!(
            "diagonal {diagonal} and confuser {confuser} do not leave a valid remainder"
        )));
    }
    let other = if n > 2 {
        rest.max(0.0) / (n - 2) as f64
    } else {
        0.0
    };
    Ok((0..n)
        .map(|y| {
            (0..n)
                .map(|j| {
                    if j == y {
                        diagonal
                    } else if j == (y + 1) % n {
                        confuser
                    } else {
                        other
                    }
                })
                .collect()
        })
        .collect())
}

/// Scene size, class frequencies and seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSceneSpec", into = "RawSceneSpec")]
pub struct SceneSpec {
    width: usize,
    height: usize,
    class_frequencies: Vec<f64>,
    seed: u64,
}

#[derive(Serialize, Deserialize)]
struct RawSceneSpec {
    width: usize,
    height: usize,
    class_frequencies: Vec<f64>,
    seed: u64,
}

impl TryFrom<RawSceneSpec> for SceneSpec {
    type Error = Error;

    fn try_from(raw: RawSceneSpec) -> Result<Self> {
        SceneSpec::new(raw.width, raw.height, raw.class_frequencies, raw.seed)
    }
}

impl From<SceneSpec> for RawSceneSpec {
    fn from(s: SceneSpec) -> Self {
        RawSceneSpec {
            width: s.width,
            height: s.height,
            class_frequencies: s.class_frequencies,
            seed: s.seed,
        }
    }
}

impl SceneSpec {
    pub fn new(
        width: usize,
        height: usize,
        class_frequencies: Vec<f64>,
        seed: u64,
    ) -> Result<Self> {
        let n = class_frequencies.len();
        if n == 0 || n > MAX_CLASSES {
            return Err(Error::validation(format!("{n} class frequencies")));
        }
        if class_frequencies.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::validation(
                "class frequencies must be finite and >= 0",
            ));
        }
        let sum: f64 = class_frequencies.iter().sum();
        if (sum - 1.0).abs() > ROW_TOLERANCE {
            return Err(Error::validation(format!("class frequencies sum to {sum}")));
        }
        width
            .checked_mul(height)
            .ok_or_else(|| Error::dim("scene size overflows"))?;
        Ok(SceneSpec {
            width,
            height,
            class_frequencies,
            seed,
        })
    }

    pub fn uniform(width: usize, height: usize, num_classes: usize, seed: u64) -> Result<Self> {
        Self::new(
            width,
            height,
            vec![1.0 / num_classes as f64; num_classes],
            seed,
        )
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn num_classes(&self) -> usize {
        self.class_frequencies.len()
    }

    pub fn class_frequencies(&self) -> &[f64] {
        &self.class_frequencies
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// Draws every pixel's class independently from the scene's frequencies.
pub fn gen_scene(spec: &SceneSpec) -> LabelGrid {
    let mut cumulative = Vec::with_capacity(spec.num_classes());
    let mut acc = 0.0;
    for &f in &spec.class_frequencies {
        acc += f;
        cumulative.push(acc);
    }
    let last_positive = spec
        .class_frequencies
        .iter()
        .rposition(|&f| f > 0.0)
        .expect("frequencies sum to 1");
    let n = spec.width * spec.height;
    let labels = (0..n)
        .map(|i| {
            let u = PixelStream::new(spec.seed, SCENE_DOMAIN, i as u64).uniform();
            // u > 0, so a zero-frequency class never holds the first cumsum >= u
            cumulative
                .iter()
                .position(|&cum| u <= cum)
                .unwrap_or(last_positive) as u8
        })
        .collect();
    LabelGrid::new(spec.width, spec.height, labels).expect("sized from spec")
}

/// Emits the distorted probability vector for every pixel of `gt`.
pub fn apply_shift(gt: &LabelGrid, model: &ShiftModel) -> Result<ProbMap> {
    let n = model.num_classes;
    if let Some(&bad) = gt.labels().iter().find(|&&y| y as usize >= n) {
        return Err(Error::validation(format!(
            "scene label {bad} out of range for a {n}-class shift model"
        )));
    }
    let mut data = Vec::with_capacity(gt.labels().len() * n);
    let mut z = vec![0.0; n];
    let mut p = vec![0.0; n];
    for (i, &y) in gt.labels().iter().enumerate() {
        let row = model.mixing_row(y as usize);
        if model.noise_scale == 0.0 {
            data.extend_from_slice(row);
            continue;
        }
        PixelStream::new(model.seed, SHIFT_DOMAIN, i as u64).normals(&mut z);
        let mut sum = 0.0;
        for ((pj, &t), &zj) in p.iter_mut().zip(row).zip(&z) {
            *pj = t * (model.noise_scale * zj).exp();
            sum += *pj;
        }
        data.extend(p.iter().map(|v| v / sum));
    }
    ProbMap::new(gt.width(), gt.height(), n, data)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub correct: u64,
    pub accuracy: f64,
    pub miou: f64,
}

impl Scores {
    fn from_confusion(cm: &ConfusionMatrix) -> Result<Self> {
        let classes: Vec<usize> = (0..cm.num_classes()).collect();
        let miou = cm
            .miou_over(&classes)?
            .ok_or_else(|| Error::EmptySubset("all".into()))?;
        let correct = (0..cm.num_classes()).map(|c| cm.count(c, c)).sum();
        Ok(Scores {
            correct,
            accuracy: cm.pixel_accuracy().unwrap_or(0.0),
            miou,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema_version: u32,
    pub scene: SceneSpec,
    pub shift: ShiftModel,
    pub holdout_fraction: f64,
    pub fit_pixels: u64,
    pub holdout_pixels: u64,
    pub argmax: Scores,
    pub calibrated: Scores,
    /// Holdout pixels where calibrated and argmax predictions differ.
    pub flips: u64,
    pub prototypes: Vec<Vec<f64>>,
    pub observed: Vec<bool>,
}

impl ExperimentReport {
    pub fn accuracy_gain(&self) -> f64 {
        self.calibrated.accuracy - self.argmax.accuracy
    }
}

/// The generated data of one experiment, split into fit and holdout parts.
#[derive(Debug, Clone)]
pub struct ExperimentData {
    pub fit_map: ProbMap,
    pub fit_labels: LabelGrid,
    pub holdout_map: ProbMap,
    pub holdout_labels: LabelGrid,
}

/// Generates the scene and its shifted probabilities, split by rows: the top
/// `height - round(height * holdout_fraction)` rows for fitting, the rest held out.
pub fn generate_experiment_data(
    spec: &SceneSpec,
    model: &ShiftModel,
    holdout_fraction: f64,
) -> Result<ExperimentData> {
    if spec.num_classes() != model.num_classes() {
        return Err(Error::dim(format!(
            "scene has {} classes, shift model {}",
            spec.num_classes(),
            model.num_classes()
        )));
    }
    if !(holdout_fraction > 0.0 && holdout_fraction < 1.0) {
        return Err(Error::validation(format!(
            "holdout fraction {holdout_fraction} must lie in (0, 1)"
        )));
    }
    let holdout_rows = (spec.height as f64 * holdout_fraction).round() as usize;
    let fit_rows = spec.height.saturating_sub(holdout_rows);
    if holdout_rows == 0 || fit_rows == 0 || spec.width == 0 {
        return Err(Error::validation(format!(
            "a {}x{} scene with holdout fraction {holdout_fraction} leaves an empty split",
            spec.width, spec.height
        )));
    }
    let gt = gen_scene(spec);
    let probs = apply_shift(&gt, model)?;
    Ok(ExperimentData {
        fit_map: probs.crop_rows(0, fit_rows)?,
        fit_labels: gt.crop_rows(0, fit_rows)?,
        holdout_map: probs.crop_rows(fit_rows, spec.height)?,
        holdout_labels: gt.crop_rows(fit_rows, spec.height)?,
    })
}

/// Fits prototypes on the fit split (labels unused) and scores argmax and
/// calibrated prediction on the holdout split.
pub fn run_experiment(
    spec: &SceneSpec,
    model: &ShiftModel,
    holdout_fraction: f64,
) -> Result<ExperimentReport> {
    let data = generate_experiment_data(spec, model, holdout_fraction)?;
    let space = LabelSpace::numbered(spec.num_classes())?;

    let mut acc = PrototypeAccumulator::new(space.num_classes());
    acc.accumulate(&data.fit_map)?;
    let protos = PrototypeSet::finalize(&acc, &space)?;

    let (argmax, calibrated, flips) = predict_both(&data.holdout_map, &protos)?;
    let mut cm_argmax = ConfusionMatrix::new(&space);
    cm_argmax.update(&argmax, &data.holdout_labels)?;
    let mut cm_calibrated = ConfusionMatrix::new(&space);
    cm_calibrated.update(&calibrated, &data.holdout_labels)?;

    Ok(ExperimentReport {
        schema_version: EXPERIMENT_SCHEMA_VERSION,
        scene: spec.clone(),
        shift: model.clone(),
        holdout_fraction,
        fit_pixels: data.fit_map.num_pixels() as u64,
        holdout_pixels: data.holdout_map.num_pixels() as u64,
        argmax: Scores::from_confusion(&cm_argmax)?,
        calibrated: Scores::from_confusion(&cm_calibrated)?,
        flips,
        prototypes: protos.rows().map(<[f64]>::to_vec).collect(),
        observed: protos.observed().to_vec(),
    })
}

/// Mean and sample standard deviation of a metric over seeds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        MeanStd { mean, std }
    }
}

/// Aggregate of one configuration run over several seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedSummary {
    pub noise_scale: f64,
    pub seeds: Vec<u64>,
    pub argmax_accuracy: MeanStd,
    pub calibrated_accuracy: MeanStd,
    pub argmax_miou: MeanStd,
    pub calibrated_miou: MeanStd,
    /// Mean calibrated minus mean argmax accuracy.
    pub accuracy_gain: f64,
}

impl SeedSummary {
    /// Aggregates runs that share a configuration but differ in seed.
    pub fn from_runs(noise_scale: f64, seeds: &[u64], runs: &[ExperimentReport]) -> Self {
        let collect =
            |f: &dyn Fn(&ExperimentReport) -> f64| -> Vec<f64> { runs.iter().map(f).collect() };
        let argmax_accuracy = MeanStd::of(&collect(&|r| r.argmax.accuracy));
        let calibrated_accuracy = MeanStd::of(&collect(&|r| r.calibrated.accuracy));
        SeedSummary {
            noise_scale,
            seeds: seeds.to_vec(),
            argmax_accuracy,
            calibrated_accuracy,
            argmax_miou: MeanStd::of(&collect(&|r| r.argmax.miou)),
            calibrated_miou: MeanStd::of(&collect(&|r| r.calibrated.miou)),
            accuracy_gain: calibrated_accuracy.mean - argmax_accuracy.mean,
        }
    }
}

/// Runs the experiment once per seed; each seed drives both scene and shift.
pub fn run_seeds(
    spec: &SceneSpec,
    model: &ShiftModel,
    holdout_fraction: f64,
    seeds: &[u64],
) -> Result<(Vec<ExperimentReport>, SeedSummary)> {
    if seeds.is_empty() {
        return Err(Error::validation("no seeds given"));
    }
    let runs = seeds
        .iter()
        .map(|&s| {
            run_experiment(
                &spec.clone().with_seed(s),
                &model.clone().with_seed(s),
                holdout_fraction,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let summary = SeedSummary::from_runs(model.noise_scale(), seeds, &runs);
    Ok((runs, summary))
}

/// Runs [`run_seeds`] for each noise scale.
pub fn run_sweep(
    spec: &SceneSpec,
    model: &ShiftModel,
    holdout_fraction: f64,
    noise_scales: &[f64],
    seeds: &[u64],
) -> Result<Vec<(Vec<ExperimentReport>, SeedSummary)>> {
    noise_scales
        .iter()
        .map(|&sigma| {
            let m = model.clone().with_noise_scale(sigma)?;
            run_seeds(spec, &m, holdout_fraction, seeds)
        })
        .collect()
}

/// Accuracy-vs-noise CSV: one row per (noise scale, seed).
pub fn sweep_csv(sweep: &[(Vec<ExperimentReport>, SeedSummary)]) -> String {
    let mut out = String::from(
        "noise_scale,seed,argmax_accuracy,calibrated_accuracy,argmax_miou,calibrated_miou,flips\n",
    );
    for (runs, _) in sweep {
        for r in runs {
            out.push_str(&format!(
                "{},{},{:.6},{:.6},{:.6},{:.6},{}\n",
                r.shift.noise_scale(),
                r.scene.seed(),
                r.argmax.accuracy,
                r.calibrated.accuracy,
                r.argmax.miou,
                r.calibrated.miou,
                r.flips
            ));
        }
    }
    out
}

/// Mixing matrix given either explicitly or as a boundary-confusion preset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MixingSpec {
    Matrix(Vec<Vec<f64>>),
    BoundaryConfusion {
        boundary_confusion: BoundaryConfusion,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryConfusion {
    pub diagonal: f64,
    pub confuser: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftConfig {
    pub mixing: MixingSpec,
    pub noise_scale: f64,
    #[serde(default)]
    pub seed: u64,
}

/// A simulation config file: one scene and shift, optionally repeated over
/// seeds and swept over noise scales.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub scene: SceneSpec,
    pub shift: ShiftConfig,
    pub holdout_fraction: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seeds: Option<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_scales: Option<Vec<f64>>,
}

impl SimulationConfig {
    /// The fixed boundary-confusion setup: 5 uniform classes, diagonal 0.45,
    /// confuser 0.35, noise 0.5, 128x128 scenes, half held out, seeds 0-9.
    pub fn boundary_confusion() -> Self {
        SimulationConfig {
            scene: SceneSpec::uniform(128, 128, 5, 0).expect("valid preset"),
            shift: ShiftConfig {
                mixing: MixingSpec::BoundaryConfusion {
                    boundary_confusion: BoundaryConfusion {
                        diagonal: 0.45,
                        confuser: 0.35,
                    },
                },
                noise_scale: 0.5,
                seed: 0,
            },
            holdout_fraction: 0.5,
            seeds: Some((0..10).collect()),
            noise_scales: None,
        }
    }

    pub fn shift_model(&self) -> Result<ShiftModel> {
        let matrix = match &self.shift.mixing {
            MixingSpec::Matrix(m) => m.clone(),
            MixingSpec::BoundaryConfusion {
                boundary_confusion: b,
            } => boundary_confusion_matrix(self.scene.num_classes(), b.diagonal, b.confuser)?,
        };
        let model = ShiftModel::new(matrix, self.shift.noise_scale, self.shift.seed)?;
        if model.num_classes() != self.scene.num_classes() {
            return Err(Error::dim(format!(
                "scene has {} classes, mixing matrix {}",
                self.scene.num_classes(),
                model.num_classes()
            )));
        }
        Ok(model)
    }

    /// Overrides every seed (scene, shift and the seed list) with `seed`.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.scene = self.scene.with_seed(seed);
        self.shift.seed = seed;
        self.seeds = self.seeds.map(|_| vec![seed]);
        self
    }
}

/// Per-noise-scale summaries keyed by the noise scale's display form.
pub fn summaries_by_noise(
    sweep: &[(Vec<ExperimentReport>, SeedSummary)],
) -> BTreeMap<String, SeedSummary> {
    sweep
        .iter()
        .map(|(_, s)| (s.noise_scale.to_string(), s.clone()))
        .collect()
}
