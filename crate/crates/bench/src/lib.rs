//! Inputs for the criterion benches: shifted maps from the simulator.

use labelcal_core::sim::{apply_shift, gen_scene, SceneSpec, ShiftModel};
use labelcal_core::{LabelSpace, ProbMap, PrototypeAccumulator, PrototypeSet};

/// A `width x height` map over `classes` classes (at least 2) with
/// boundary-confusion shift and log-normal noise.
pub fn synthetic_map(width: usize, height: usize, classes: usize, seed: u64) -> ProbMap {
    let spec = SceneSpec::uniform(width, height, classes, seed).expect("valid scene");
    // with two classes the diagonal and confuser must cover the whole row
    let (diagonal, confuser) = if classes == 2 {
        (0.6, 0.4)
    } else {
        (0.45, 0.35)
    };
    let model = ShiftModel::boundary_confusion(classes, diagonal, confuser, 0.5, seed)
        .expect("valid shift");
    apply_shift(&gen_scene(&spec), &model).expect("labels in range")
}

/// Prototypes fitted on `map` alone.
pub fn fitted_prototypes(map: &ProbMap) -> PrototypeSet {
    let mut acc = PrototypeAccumulator::new(map.num_classes());
    acc.accumulate(map).expect("valid map");
    let space = LabelSpace::numbered(map.num_classes()).expect("class count in range");
    PrototypeSet::finalize(&acc, &space).expect("sizes match")
}
