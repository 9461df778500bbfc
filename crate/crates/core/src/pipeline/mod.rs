//! Dataset ingestion, batch augmentation, manifests and previews.

pub mod config;
pub mod dataset;
pub mod preview;
pub mod run;

pub use config::{Mode, ParamSnapshot, RunConfig, WarpRoute};
pub use dataset::{load_dataset, Dataset, FileError};
pub use preview::{preview_render, render_preview, PreviewLayout};
pub use run::{
    record_source, replay_variant, run_augmentation, variant_field, Manifest, Replayed, SamplePlan,
    Scheme, VariantRecord, MANIFEST_NAME,
};
