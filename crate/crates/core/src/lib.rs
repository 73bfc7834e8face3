//! Shape categorization of single-view (2.5D) point clouds.
//!
//! Objects are over-segmented and refined into an instance graph, segments are
//! described with FPFH histograms and quantized by a coarse-to-fine visual-word
//! dictionary, and one word-motif hierarchy per dictionary level votes on the
//! shape category.

pub mod cli;
pub mod descriptor;
pub mod dictionary;
pub mod ensemble;
pub mod evaluation;
pub mod geometry;
pub mod motif;
pub mod pipeline;
pub mod segmentation;
