//! Face comparators used for pair selection and vulnerability scoring.
//!
//! The built-in [`HogComparator`] is a toy stand-in for a commercial face
//! recognition system. It is not a face recognizer and its scores are not
//! comparable to those of any COTS product.

use std::path::Path;

use crate::error::Result;
use crate::image::RasterImage;
use crate::mad::{extract_hog, HogConfig};

/// Similarity-score comparator: enrol images into templates, then compare
/// templates. Higher scores mean more similar.
pub trait FaceComparator: Sync {
    type Template: Send + Sync;

    fn name(&self) -> &str;

    fn enrol(&self, image: &RasterImage) -> Result<Self::Template>;

    fn compare(&self, a: &Self::Template, b: &Self::Template) -> f64;

    fn enrol_path(&self, path: &Path) -> Result<Self::Template> {
        self.enrol(&RasterImage::load(path)?)
    }

    fn compare_images(&self, a: &RasterImage, b: &RasterImage) -> Result<f64> {
        Ok(self.compare(&self.enrol(a)?, &self.enrol(b)?))
    }
}

/// `0.5 * (1 + cos)` between HOG descriptors of the gray, 128x128 resized
/// images. Scores lie in [0, 1].
#[derive(Debug, Clone)]
pub struct HogComparator {
    pub size: usize,
    pub hog: HogConfig,
}

impl Default for HogComparator {
    fn default() -> Self {
        Self {
            size: 128,
            hog: HogConfig::default(),
        }
    }
}

impl FaceComparator for HogComparator {
    type Template = Vec<f64>;

    fn name(&self) -> &str {
        "toy-hog-cosine (not a COTS FRS)"
    }

    fn enrol(&self, image: &RasterImage) -> Result<Vec<f64>> {
        let gray = image.to_gray().resize_bilinear(self.size, self.size)?;
        let mut v = extract_hog(&gray, &self.hog)?;
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            v.iter_mut().for_each(|x| *x /= norm);
        }
        Ok(v)
    }

    fn compare(&self, a: &Vec<f64>, b: &Vec<f64>) -> f64 {
        let cos: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        (0.5 * (1.0 + cos)).clamp(0.0, 1.0)
    }
}
