//! Streaming FMCW radar gesture recognition.
//!
//! The processing chain for one measurement cycle is
//!
//! ```text
//! BeatFrame ─ rd_processing ─ top-K points ─ aoa ─ feature_encoder ─┐
//!                                   │                               │
//!                                   └──────── had (RWM → EMA → STA/LTA)
//!                                                                   │
//!                                        tail detected → FeatureCube → classifier
//! ```
//!
//! [`radar_model`] and [`gesture_sim`] stand in for hardware: they synthesize
//! beat signals from point-scatterer hand models. [`pipeline`] owns the file
//! formats, configuration and the two-context streaming loop.

pub mod aoa;
pub mod classifier;
pub mod error;
pub mod eval_metrics;
pub mod feature_encoder;
pub mod gesture_sim;
pub mod had;
pub mod pipeline;
pub mod radar_model;
pub mod rd_processing;
pub mod seed;

pub use error::{Error, Result};
pub use radar_model::{BeatFrame, RadarParams, Scatterer};
