//! Region proposal from saliency heatmaps.
//!
//! This crate turns a colour-coded saliency heatmap (red/green encode
//! evidence strength) into a ranked list of candidate bounding boxes, and
//! scores those candidates against ground-truth boxes. The pipeline:
//!
//! 1. threshold the raw heatmap into an active mask ([`activation`]),
//! 2. count connected components to choose a cluster budget,
//! 3. smooth the heatmap and lift every pixel into a positional/colour
//!    feature vector ([`clustering`]),
//! 4. k-means the feature grid, discard background, split disconnected
//!    clusters, and drop fragments below the area floor,
//! 5. rank surviving clusters by mean weighted activation and emit tight
//!    bounding boxes ([`ranking`]),
//! 6. optionally score candidates against annotated targets with a
//!    distance-penalised IoU ([`evaluation`]).
//!
//! [`synth`] generates parametric blob scenes with known ground truth so
//! the whole chain can be exercised without real data.

pub mod activation;
pub mod clustering;
pub mod error;
pub mod evaluation;
pub mod geometry;
pub mod heatmap;
pub mod manifest;
pub mod ranking;
pub mod synth;

pub use error::{Error, Result};
pub use geometry::{BoundingBox, PixelCoord};
pub use heatmap::Heatmap;
pub use manifest::{Difficulty, ManifestEntry};
pub use ranking::{propose_regions, RankedCandidates, RankingConfig};
