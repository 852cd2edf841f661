//! Post-processing and evaluation toolkit for building-footprint and roof
//! material segmentation from aerial rasters.
//!
//! - [`labels`]: training targets from instance rasters (gap enforcement,
//!   boundary weight maps, ordinal level masks).
//! - [`instances`]: watershed separation of predicted level masks, class
//!   assignment, polygonization.
//! - [`metrics`]: IoU family and average precision.
//! - [`splitter`]: grid-based stratified train/val/test splitting.
//! - [`probe`]: masked feature pooling and linear / kNN classifiers.
//! - [`npy`], [`geojson`], [`report`]: file formats.

pub mod edt;
pub mod error;
pub mod geojson;
pub mod geometry;
pub mod instances;
pub mod labels;
pub mod metrics;
pub mod npy;
pub mod probe;
pub mod raster;
pub mod report;
pub mod splitter;

pub use error::{Error, Result};
pub use raster::{Connectivity, Mask, NdArray, Raster};
