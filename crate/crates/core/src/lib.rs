//! Deterministic data augmentation by rigid moving-least-squares deformation.
//!
//! Handles are placed automatically, either on a proportional 3×3 grid
//! ([`handles`]) or where rays from an object's barycenter meet its contour
//! ([`mask`]). Each variant displaces a subset of handles; the image is
//! resampled through a hole-free backward field ([`warp`]) derived from the
//! rigid MLS transform ([`mls`]), and masks and boxes follow the same field
//! ([`labels`]). [`pipeline`] drives whole datasets and writes a manifest that
//! reproduces every variant.

pub mod error;
pub mod geometry;
pub mod handles;
pub mod labels;
pub mod mask;
pub mod mls;
pub mod pipeline;
pub mod raster;
pub mod sample;
pub mod warp;

pub use error::{Error, Result};
pub use geometry::{Mat2, Point2};
pub use handles::{ImageDims, MovePattern, NineDotConfig};
pub use labels::{Annotation, BBox};
pub use mask::{ContourHandleConfig, RegionModel};
pub use mls::{HandleSet, PrecomputedBasis};
pub use raster::Raster;
pub use sample::LabeledSample;
pub use warp::{Fill, Sampling, WarpField};
