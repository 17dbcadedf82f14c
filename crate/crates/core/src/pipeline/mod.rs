//! Streaming loop, datasets and file formats.

pub mod config;
pub mod dataset;
pub mod eval;
pub mod recording;
pub mod stream;

pub use config::PipelineConfig;
pub use dataset::{
    cube_ending_at, fit_normalization, load_processed, offline_accuracy, offline_loss, process_frames,
    process_recording, spec_for, split, synth_processed, train_classifier, write_dataset, DatasetSpec,
    ProcessedRecording, TrainSummary,
};
pub use eval::{calibrate, evaluate, noise_frames, noise_rwm, score_recording, EvalReport};
pub use recording::{
    labels_path, labels_to_text, parse_labels, parse_manifest, read_labels, read_manifest, LabelSegment,
    ManifestEntry, RecordingFile, MANIFEST_NAME,
};
pub use stream::{run_stream, CycleProcessor, CycleStep, FeatureExtractor, StreamEvent, StreamReport, Timings};
