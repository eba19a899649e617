//! Run orchestration: configuration, file formats, the worker pool with its
//! isolated scratch space, and the end-to-end pipeline.

pub mod config;
pub mod formats;
pub mod pipeline;
pub mod pool;
pub mod scratch;

pub use config::RunConfig;
pub use formats::{
    read_correction_file, read_footprint_file, read_manifest, write_correction_file,
    write_footprint_file, write_manifest, FileOutcome, RunManifest,
};
pub use pipeline::{run_pipeline, OriginRow, PipelineOutcome, SimPointRow, MANIFEST_FILE_NAME};
pub use pool::worker_pool_map;
pub use scratch::{ScratchRoot, WorkerScratch};
