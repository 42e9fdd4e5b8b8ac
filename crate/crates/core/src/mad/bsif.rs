//! Binarized statistical image features with a pluggable filter bank.
//!
//! The ICA-learned natural-image filters usually shipped with BSIF are not
//! redistributed here. [`generate_default_filterbank`] builds a seeded,
//! orthonormal, zero-mean substitute; external banks load from text files.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::lbp::cell_edges;
use crate::error::{Error, Result};
use crate::fileio;
use crate::image::RasterImage;

/// `n_filters` square filters of odd side `size`, each stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterBank {
    n_filters: usize,
    size: usize,
    coefficients: Vec<f64>,
}

impl FilterBank {
    pub fn new(n_filters: usize, size: usize, coefficients: Vec<f64>) -> Result<Self> {
        if size.is_multiple_of(2) {
            return Err(Error::Config(format!("filter size {size} must be odd")));
        }
        if n_filters == 0 || n_filters > 16 {
            return Err(Error::Config(format!("filter count {n_filters} not in 1..=16")));
        }
        if coefficients.len() != n_filters * size * size {
            return Err(Error::Config(format!(
                "expected {} coefficients, found {}",
                n_filters * size * size,
                coefficients.len()
            )));
        }
        let bank = Self {
            n_filters,
            size,
            coefficients,
        };
        for i in 0..n_filters {
            let mean = bank.filter(i).iter().sum::<f64>() / (size * size) as f64;
            if mean.abs() > 1e-9 {
                return Err(Error::Config(format!("filter {i} is not zero-mean (mean {mean:e})")));
            }
        }
        Ok(bank)
    }

    pub fn n_filters(&self) -> usize {
        self.n_filters
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn filter(&self, i: usize) -> &[f64] {
        let len = self.size * self.size;
        &self.coefficients[i * len..(i + 1) * len]
    }

    /// FNV-1a over the coefficient bit patterns, used in config digests.
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for v in std::iter::once(self.n_filters as u64)
            .chain(std::iter::once(self.size as u64))
            .chain(self.coefficients.iter().map(|c| c.to_bits()))
        {
            for b in v.to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        }
        h
    }

    /// Text format: `n size` on the first line, then `n` blocks of `size`
    /// rows with `size` values each.
    pub fn load(path: &Path) -> Result<FilterBank> {
        let text = fileio::read_to_string(path)?;
        let mut lines = fileio::content_lines(&text);
        let (line, header) = lines.next().ok_or_else(|| Error::parse(path, 1, "empty filter bank file"))?;
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| Error::parse(path, line, "header must be `n size`")))
            .collect::<Result<_>>()?;
        let [n, size] = dims[..] else {
            return Err(Error::parse(path, line, "header must be `n size`"));
        };
        let mut coefficients = Vec::with_capacity(n * size * size);
        for (line, l) in lines {
            let row: Vec<f64> = l
                .split_whitespace()
                .map(|t| fileio::parse_f64(path, line, t, "coefficient"))
                .collect::<Result<_>>()?;
            if row.len() != size {
                return Err(Error::parse(path, line, format!("expected {size} values per row")));
            }
            coefficients.extend(row);
        }
        FilterBank::new(n, size, coefficients)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = format!("{} {}\n", self.n_filters, self.size);
        for row in self.coefficients.chunks(self.size) {
            let r: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            out.push_str(&r.join(" "));
            out.push('\n');
        }
        fileio::write_atomic(path, out.as_bytes())
    }
}

/// Seeded Gaussian filters, mean-subtracted and then orthonormalized by
/// modified Gram-Schmidt.
pub fn generate_default_filterbank(n: usize, size: usize, seed: u64) -> Result<FilterBank> {
    if size.is_multiple_of(2) || size == 0 {
        return Err(Error::Config(format!("filter size {size} must be odd")));
    }
    let len = size * size;
    if n == 0 || n > len - 1 {
        return Err(Error::Rank(format!(
            "{n} zero-mean filters cannot be independent in a {}-dimensional space",
            len - 1
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(n);
    while basis.len() < n {
        let mut v: Vec<f64> = (0..len).map(|_| StandardNormal.sample(&mut rng)).collect();
        let mean = v.iter().sum::<f64>() / len as f64;
        v.iter_mut().for_each(|x| *x -= mean);
        // two passes keep orthogonality at round-off level
        for _ in 0..2 {
            for b in &basis {
                let d: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
                v.iter_mut().zip(b).for_each(|(x, y)| *x -= d * y);
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-6 {
            continue;
        }
        v.iter_mut().for_each(|x| *x /= norm);
        basis.push(v);
    }
    FilterBank::new(n, size, basis.concat())
}

// Mirror index without repeating the edge sample (…, 2, 1, 0, 1, 2, …).
fn reflect(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let mut i = i.rem_euclid(period);
    if i >= n as isize {
        i = period - i;
    }
    i as usize
}

/// Per-pixel BSIF codes: bit `i` is set when the response of filter `i` is
/// positive. Responses are convolutions with mirrored borders, evaluated
/// on differences to the centre pixel; for zero-mean filters this equals
/// the plain convolution and makes the code exactly invariant to constant
/// intensity offsets.
pub fn bsif_codes(img: &RasterImage, bank: &FilterBank) -> Result<Vec<u16>> {
    if img.channels() != 1 {
        return Err(Error::Contract("BSIF expects a gray image".into()));
    }
    let (w, h) = (img.width(), img.height());
    let l = bank.size();
    let r = (l / 2) as isize;
    let rows: Vec<Vec<u16>> = (0..h)
        .into_par_iter()
        .map(|y| {
            let mut row = vec![0u16; w];
            let mut window = vec![0.0f64; l * l];
            for (x, code) in row.iter_mut().enumerate() {
                let center = img.get(x, y, 0) as f64;
                // window[u * l + v] holds I(y - (u - r), x - (v - r)) - centre,
                // i.e. the flipped neighbourhood that convolution pairs
                // with coefficient (u, v).
                for u in 0..l {
                    let sy = reflect(y as isize - (u as isize - r), h);
                    for v in 0..l {
                        let sx = reflect(x as isize - (v as isize - r), w);
                        window[u * l + v] = img.get(sx, sy, 0) as f64 - center;
                    }
                }
                for i in 0..bank.n_filters() {
                    let resp: f64 = bank.filter(i).iter().zip(&window).map(|(f, p)| f * p).sum();
                    if resp > 0.0 {
                        *code |= 1 << i;
                    }
                }
            }
            row
        })
        .collect();
    Ok(rows.concat())
}

/// Concatenated per-cell histograms of BSIF codes, `2^n` bins per cell.
pub fn extract_bsif(img: &RasterImage, bank: &FilterBank, grid: usize) -> Result<Vec<f64>> {
    if grid == 0 || img.width() < grid || img.height() < grid {
        return Err(Error::Config(format!(
            "{grid}x{grid} grid does not fit a {}x{} image",
            img.width(),
            img.height()
        )));
    }
    let codes = bsif_codes(img, bank)?;
    let bins = 1usize << bank.n_filters();
    let xs = cell_edges(img.width(), grid);
    let ys = cell_edges(img.height(), grid);
    let mut out = Vec::with_capacity(grid * grid * bins);
    for cy in 0..grid {
        for cx in 0..grid {
            let mut hist = vec![0.0; bins];
            for y in ys[cy]..ys[cy + 1] {
                for x in xs[cx]..xs[cx + 1] {
                    hist[codes[y * img.width() + x] as usize] += 1.0;
                }
            }
            let n = ((ys[cy + 1] - ys[cy]) * (xs[cx + 1] - xs[cx])) as f64;
            out.extend(hist.into_iter().map(|v| v / n));
        }
    }
    Ok(out)
}
