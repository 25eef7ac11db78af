//! Geometry core of a text-kernel page spotter.
//!
//! Segmented kernel regions go in; ordered center-lines, rectified text
//! strips, shrunken kernel labels and page-level scores come out. The crate
//! consumes masks, boxes, transcripts and probability matrices from any
//! upstream model and performs no neural inference itself.

pub mod centerline;
pub mod error;
pub mod evaluation;
pub mod metrics;
pub mod overlay;
pub mod pipeline;
pub mod point;
pub mod polygon;
pub mod raster;
pub mod synthetic;
pub mod tps;

pub use error::{Error, Result};
pub use point::Point;
