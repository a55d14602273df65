//! Pulse morphology: second-derivative fiducial points, the 15-feature
//! vector and an L2-regularised logistic-regression baseline on top of it.

mod baseline;
mod derivative;
mod extract;
mod fiducials;

pub use baseline::{baseline_predict, baseline_train, BaselineConfig, LogisticModel};
pub use derivative::second_derivative;
pub use extract::{
    extract_features, record_features, recording_feature_vector, FeatureVector, FEATURE_NAMES,
    N_FEATURES,
};
pub use fiducials::{locate_fiducials, FiducialSet};
