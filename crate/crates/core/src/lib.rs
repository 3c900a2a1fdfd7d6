//! Topology-aware tooling for tubular (vessel-like) segmentation.
//!
//! - [`mask`]: grayscale images, binary masks, PGM I/O.
//! - [`topology`]: component labeling, Betti numbers, beta0 errors, thinning.
//! - [`metrics`]: Dice, clDice and aggregated reports.
//! - [`synth`]: synthetic vessel trees and verified topological perturbations.
//! - [`taskgen`]: topology-centric question/answer records with rule-derived answers.
//! - [`flowgen`]: a small conditional rectified-flow refiner with error-adaptive loss weights.

pub mod error;
pub mod flowgen;
pub mod mask;
pub mod metrics;
pub mod rng;
pub mod synth;
pub mod taskgen;
pub mod topology;

pub use error::{Error, Result};
pub use mask::{load_image, load_mask, save_image, save_mask, threshold, BinaryMask, GrayImage};
pub use metrics::{aggregate_reports, cl_dice, dice, metric_report, MetricReport};
pub use topology::{
    beta0_matching_error, beta0_number_error, betti_numbers, count_loops, label_components, skeletonize,
    ComponentLabeling, Connectivity, TopologySummary,
};
