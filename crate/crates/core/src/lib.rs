//! Face morphing attack toolkit.
//!
//! The crate covers four stages of a morphing-attack study:
//!
//! * [`dataset`]: manifest ingestion, seeded train/dev/test splits and
//!   same-gender pair selection.
//! * [`morph`]: Delaunay triangulation, piecewise-affine warping and
//!   weighted blending of two landmark-annotated faces.
//! * [`vuln`]: threshold calibration and the FMMPMR / MMPMR vulnerability
//!   rates of a face comparator against morphs.
//! * [`mad`] and [`iso`]: texture-descriptor morph detectors (LBP, BSIF,
//!   HOG with a linear SVM) evaluated with APCER, BPCER and D-EER.
//!
//! [`pipeline`] wires the stages together and backs the `morphage` binary.

pub mod comparator;
pub mod dataset;
pub mod error;
pub mod fileio;
pub mod image;
pub mod iso;
pub mod mad;
pub mod morph;
pub mod pipeline;
pub mod svg;
pub mod synth;
pub mod vuln;

pub use error::{Error, Result};
pub use image::RasterImage;
