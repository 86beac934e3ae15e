//! Black-box label calibration for semantic-segmentation probability maps.
//!
//! Fit confidence-weighted soft-label prototypes on unlabeled target-domain
//! model outputs in one streaming pass, then re-predict each pixel as the class
//! of its nearest prototype. Around that core sit the binary map formats and
//! manifests ([`io`]), confusion-matrix evaluation ([`eval`]) and a seeded
//! domain-shift simulator ([`sim`]).

pub mod calibration;
pub mod error;
pub mod eval;
pub mod io;
pub mod label_space;
pub mod labels;
pub mod sim;

pub use calibration::{
    argmax_class, calibrated_class, confidence_weight, predict_both, predict_map, PredictionMap,
    ProbMap, PrototypeAccumulator, PrototypeSet,
};
pub use error::{Error, Result};
pub use eval::{compare_reports, ConfusionMatrix, EvalReport, ReportDelta};
pub use label_space::LabelSpace;
pub use labels::LabelGrid;
