//! Mask-quality network, farthest-point frame selection and the baseline
//! frame selectors.

mod dataset;
mod features;
mod qnet;
mod select;

pub use dataset::{simulate_quality_dataset, QualityDataset, QualityRecord, SelectionMode, SimulationSetup};
pub use features::{extract_all_features, extract_features, FeatureVector, FEATURE_DIM, FEATURE_SCHEMA};
pub use qnet::{qnet_embed, train_qnet, QNet, QNetHyper, QNetReport, EMBEDDING_DIM};
pub use select::{
    farthest_point_scores, select_farthest, select_l2_raw, select_random, select_upper_bound, select_worst_oracle,
    FrameSelector,
};
pub(crate) use qnet::argmax as argmax_index;
