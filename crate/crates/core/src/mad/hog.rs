//! Histogram of oriented gradients.

use crate::error::{Error, Result};
use crate::image::RasterImage;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HogConfig {
    /// Cell side in pixels.
    pub cell: usize,
    /// Block side in cells.
    pub block: usize,
    /// Block stride in cells.
    pub stride: usize,
    /// Unsigned orientation bins over [0, 180) degrees.
    pub bins: usize,
}

impl Default for HogConfig {
    fn default() -> Self {
        Self {
            cell: 8,
            block: 2,
            stride: 1,
            bins: 9,
        }
    }
}

const EPS: f64 = 1e-6;
const CLIP: f64 = 0.2;

impl HogConfig {
    fn validate(&self) -> Result<()> {
        if self.cell == 0 || self.block == 0 || self.stride == 0 || self.bins == 0 {
            return Err(Error::Config(format!("invalid HOG configuration {self:?}")));
        }
        Ok(())
    }

    /// Number of blocks along an axis of `len` pixels.
    fn blocks_along(&self, len: usize) -> Result<usize> {
        let cells = len / self.cell;
        if cells < self.block {
            return Err(Error::Config(format!(
                "{len} pixels hold {cells} cells of {} px, fewer than one {}-cell block",
                self.cell, self.block
            )));
        }
        Ok((cells - self.block) / self.stride + 1)
    }

    /// Descriptor length for a `width x height` image.
    pub fn dimension(&self, width: usize, height: usize) -> Result<usize> {
        self.validate()?;
        Ok(self.blocks_along(width)? * self.blocks_along(height)? * self.block * self.block * self.bins)
    }
}

/// Per-cell orientation histograms, row-major cells, `bins` values each.
/// Gradients are central differences with replicated borders; each pixel
/// votes its magnitude, split linearly between the two bins whose centres
/// (multiples of 180/bins degrees) surround its orientation.
pub fn cell_histograms(img: &RasterImage, cfg: &HogConfig) -> Result<(usize, usize, Vec<f64>)> {
    cfg.validate()?;
    if img.channels() != 1 {
        return Err(Error::Contract("HOG expects a gray image".into()));
    }
    let (w, h) = (img.width(), img.height());
    let (ncx, ncy) = (w / cfg.cell, h / cfg.cell);
    let bin_width = 180.0 / cfg.bins as f64;
    let mut hist = vec![0.0; ncx * ncy * cfg.bins];
    let px = |x: isize, y: isize| img.get(x.clamp(0, w as isize - 1) as usize, y.clamp(0, h as isize - 1) as usize, 0) as f64;
    for y in 0..ncy * cfg.cell {
        for x in 0..ncx * cfg.cell {
            let (xi, yi) = (x as isize, y as isize);
            let gx = px(xi + 1, yi) - px(xi - 1, yi);
            let gy = px(xi, yi + 1) - px(xi, yi - 1);
            let mag = (gx * gx + gy * gy).sqrt();
            if mag == 0.0 {
                continue;
            }
            let mut angle = gy.atan2(gx).to_degrees();
            if angle < 0.0 {
                angle += 180.0;
            }
            if angle >= 180.0 {
                angle -= 180.0;
            }
            let pos = angle / bin_width;
            let lower = pos.floor();
            let frac = pos - lower;
            let lower = (lower as usize) % cfg.bins;
            let upper = (lower + 1) % cfg.bins;
            let base = ((y / cfg.cell) * ncx + x / cfg.cell) * cfg.bins;
            hist[base + lower] += (1.0 - frac) * mag;
            hist[base + upper] += frac * mag;
        }
    }
    Ok((ncx, ncy, hist))
}

fn normalize(v: &mut [f64]) {
    let norm = (v.iter().map(|x| x * x).sum::<f64>() + EPS * EPS).sqrt();
    v.iter_mut().for_each(|x| *x /= norm);
}

/// Block-normalized HOG descriptor (L2, clip at 0.2, L2 again).
pub fn extract_hog(img: &RasterImage, cfg: &HogConfig) -> Result<Vec<f64>> {
    let dim = cfg.dimension(img.width(), img.height())?;
    let (ncx, _, hist) = cell_histograms(img, cfg)?;
    let nbx = cfg.blocks_along(img.width())?;
    let nby = cfg.blocks_along(img.height())?;
    let mut out = Vec::with_capacity(dim);
    let mut block = Vec::with_capacity(cfg.block * cfg.block * cfg.bins);
    for by in 0..nby {
        for bx in 0..nbx {
            block.clear();
            for cy in by * cfg.stride..by * cfg.stride + cfg.block {
                for cx in bx * cfg.stride..bx * cfg.stride + cfg.block {
                    let base = (cy * ncx + cx) * cfg.bins;
                    block.extend_from_slice(&hist[base..base + cfg.bins]);
                }
            }
            normalize(&mut block);
            block.iter_mut().for_each(|x| *x = x.min(CLIP));
            normalize(&mut block);
            out.extend_from_slice(&block);
        }
    }
    debug_assert_eq!(out.len(), dim);
    Ok(out)
}
