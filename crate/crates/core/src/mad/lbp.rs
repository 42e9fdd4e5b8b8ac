//! LBP(8,1) histograms over a regular grid of cells.

use std::str::FromStr;

use crate::error::{Error, Result};
use crate::image::RasterImage;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LbpMode {
    /// One bin per code.
    Full256,
    /// 58 uniform codes plus one bin shared by all non-uniform codes.
    Uniform59,
}

impl LbpMode {
    pub fn bins(self) -> usize {
        match self {
            LbpMode::Full256 => 256,
            LbpMode::Uniform59 => 59,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            LbpMode::Full256 => "full256",
            LbpMode::Uniform59 => "uniform59",
        }
    }
}

impl FromStr for LbpMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "full256" => Ok(LbpMode::Full256),
            "uniform59" => Ok(LbpMode::Uniform59),
            other => Err(format!("unknown LBP mode `{other}`")),
        }
    }
}

// Neighbour offsets, clockwise from the top-left corner. The first
// neighbour carries the most significant bit.
const NEIGHBOURS: [(isize, isize); 8] = [(-1, -1), (0, -1), (1, -1), (1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0)];

/// LBP code of an interior pixel: a bit is set when the neighbour is
/// greater than or equal to the centre.
pub fn lbp_code(img: &RasterImage, x: usize, y: usize) -> u8 {
    let center = img.get(x, y, 0);
    let mut code = 0u8;
    for (i, (dx, dy)) in NEIGHBOURS.iter().enumerate() {
        let n = img.get((x as isize + dx) as usize, (y as isize + dy) as usize, 0);
        if n >= center {
            code |= 0x80 >> i;
        }
    }
    code
}

fn transitions(code: u8) -> u32 {
    (code ^ code.rotate_left(1)).count_ones()
}

/// Maps each code to its uniform59 bin: uniform codes in ascending order
/// take bins 0..58, everything else bin 58.
pub fn uniform_table() -> [u8; 256] {
    let mut table = [58u8; 256];
    let mut next = 0u8;
    for code in 0..=255u8 {
        if transitions(code) <= 2 {
            table[code as usize] = next;
            next += 1;
        }
    }
    debug_assert_eq!(next, 58);
    table
}

/// Cell boundaries `[k * len / grid]` for `k = 0..=grid`.
pub(crate) fn cell_edges(len: usize, grid: usize) -> Vec<usize> {
    (0..=grid).map(|k| k * len / grid).collect()
}

/// Concatenated per-cell LBP histograms (row-major cells, unit sum each).
/// Only pixels with a full 3x3 neighbourhood are coded.
pub fn extract_lbp(img: &RasterImage, grid: usize, mode: LbpMode) -> Result<Vec<f64>> {
    if img.channels() != 1 {
        return Err(Error::Contract("LBP expects a gray image".into()));
    }
    if grid == 0 || img.width() / grid < 3 || img.height() / grid < 3 {
        return Err(Error::Config(format!(
            "{grid}x{grid} grid on {}x{} image gives cells smaller than 3x3",
            img.width(),
            img.height()
        )));
    }
    let bins = mode.bins();
    let table = uniform_table();
    let xs = cell_edges(img.width(), grid);
    let ys = cell_edges(img.height(), grid);
    let mut out = Vec::with_capacity(grid * grid * bins);
    for cy in 0..grid {
        for cx in 0..grid {
            let mut hist = vec![0.0; bins];
            let mut count = 0usize;
            for y in ys[cy].max(1)..ys[cy + 1].min(img.height() - 1) {
                for x in xs[cx].max(1)..xs[cx + 1].min(img.width() - 1) {
                    let code = lbp_code(img, x, y);
                    let bin = match mode {
                        LbpMode::Full256 => code as usize,
                        LbpMode::Uniform59 => table[code as usize] as usize,
                    };
                    hist[bin] += 1.0;
                    count += 1;
                }
            }
            let n = count as f64;
            out.extend(hist.into_iter().map(|h| h / n));
        }
    }
    Ok(out)
}
