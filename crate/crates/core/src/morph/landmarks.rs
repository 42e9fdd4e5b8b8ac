use std::path::Path;

use crate::error::{Error, Result};
use crate::fileio;

/// A 2-D point in pixel coordinates; integer values are pixel centres.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
}

/// Ordered facial landmarks of one image.
#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkSet {
    points: Vec<Point>,
}

impl LandmarkSet {
    pub fn new(points: Vec<Point>) -> Self {
        Self { points }
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Checks that every point lies in `[0, width) x [0, height)`.
    pub fn check_within(&self, width: usize, height: usize) -> Result<()> {
        for (i, p) in self.points.iter().enumerate() {
            if !(p.x >= 0.0 && p.x < width as f64 && p.y >= 0.0 && p.y < height as f64) {
                return Err(Error::Contract(format!(
                    "landmark {i} at ({}, {}) outside {width}x{height} frame",
                    p.x, p.y
                )));
            }
        }
        Ok(())
    }

    /// `(1 - alpha) * self + alpha * other`, point by point.
    pub fn interpolate(&self, other: &LandmarkSet, alpha: f64) -> Result<LandmarkSet> {
        if self.len() != other.len() {
            return Err(Error::Contract(format!(
                "landmark count mismatch: {} vs {}",
                self.len(),
                other.len()
            )));
        }
        let w = 1.0 - alpha;
        Ok(LandmarkSet::new(
            self.points
                .iter()
                .zip(&other.points)
                .map(|(a, b)| Point::new(w * a.x + alpha * b.x, w * a.y + alpha * b.y))
                .collect(),
        ))
    }

    /// Reads a landmark file: one `x y` pair per line.
    pub fn load(path: &Path) -> Result<LandmarkSet> {
        let text = fileio::read_to_string(path)?;
        let mut points = Vec::new();
        for (line, l) in fileio::content_lines(&text) {
            let mut it = l.split_whitespace();
            let (Some(x), Some(y), None) = (it.next(), it.next(), it.next()) else {
                return Err(Error::parse(path, line, "expected `x y`"));
            };
            let x = fileio::parse_f64(path, line, x, "x coordinate")?;
            let y = fileio::parse_f64(path, line, y, "y coordinate")?;
            points.push(Point::new(x, y));
        }
        Ok(LandmarkSet::new(points))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        for p in &self.points {
            out.push_str(&format!("{} {}\n", p.x, p.y));
        }
        fileio::write_atomic(path, out.as_bytes())
    }
}
