//! Rescaling, blowup sequences, and bubble-tree diagnostics on synthetic families.

pub mod area;
pub mod blowup;
pub mod checks;
pub mod family;
pub mod fixture;

pub use blowup::{classify_pair, rescale, BlowupSeq, PairClass, TrendTolerances};
pub use checks::{
    area_identity_check, extrapolate_tail, neck_area_profile, neck_curvature_limit,
    three_circle_check, validate_hypotheses, AreaIdentityReport, HypothesisReport,
    HypothesisThresholds, NeckCurvature, NeckProfile, ThreeCircleReport,
};
pub use family::{Generator, SignClass, SyntheticFamily};
pub use fixture::{evaluate_corpus, load_corpus, Fixture, FixtureRow};
