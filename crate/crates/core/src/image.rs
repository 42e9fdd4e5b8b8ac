//! 8-bit raster images and the pixel operations shared by the morphing and
//! feature-extraction stages.

use std::path::Path;

use crate::error::{Error, Result};

/// Row-major 8-bit image with one (gray) or three (RGB) interleaved channels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RasterImage {
    width: usize,
    height: usize,
    channels: usize,
    samples: Vec<u8>,
}

impl RasterImage {
    pub fn new(width: usize, height: usize, channels: usize, samples: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Contract(format!("zero-sized image {width}x{height}")));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::Contract(format!("unsupported channel count {channels}")));
        }
        if samples.len() != width * height * channels {
            return Err(Error::Contract(format!(
                "sample buffer has {} values, expected {}",
                samples.len(),
                width * height * channels
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            samples,
        })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: u8) -> Result<Self> {
        Self::new(width, height, channels, vec![value; width * height * channels])
    }

    /// Builds a single-channel image from a per-pixel function.
    pub fn from_fn_gray(width: usize, height: usize, f: impl Fn(usize, usize) -> u8) -> Result<Self> {
        let mut samples = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                samples.push(f(x, y));
            }
        }
        Self::new(width, height, 1, samples)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn samples(&self) -> &[u8] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<u8> {
        self.samples
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> u8 {
        self.samples[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: usize, v: u8) {
        self.samples[(y * self.width + x) * self.channels + c] = v;
    }

    pub fn same_shape(&self, other: &RasterImage) -> bool {
        self.width == other.width && self.height == other.height && self.channels == other.channels
    }

    /// Bilinear sample of channel `c` at sub-pixel position `(x, y)`, where
    /// integer coordinates are pixel centres. Coordinates outside the frame
    /// are clamped to the border.
    pub fn sample_bilinear(&self, x: f64, y: f64, c: usize) -> f64 {
        let max_x = (self.width - 1) as f64;
        let max_y = (self.height - 1) as f64;
        let x = x.clamp(0.0, max_x);
        let y = y.clamp(0.0, max_y);
        let x0 = x.floor();
        let y0 = y.floor();
        let fx = x - x0;
        let fy = y - y0;
        let x0 = x0 as usize;
        let y0 = y0 as usize;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let p00 = self.get(x0, y0, c) as f64;
        let p10 = self.get(x1, y0, c) as f64;
        let p01 = self.get(x0, y1, c) as f64;
        let p11 = self.get(x1, y1, c) as f64;
        let top = (1.0 - fx) * p00 + fx * p10;
        let bottom = (1.0 - fx) * p01 + fx * p11;
        (1.0 - fy) * top + fy * bottom
    }

    /// Luma conversion with the BT.601 weights; gray images are returned as is.
    pub fn to_gray(&self) -> RasterImage {
        if self.channels == 1 {
            return self.clone();
        }
        let samples = self
            .samples
            .chunks_exact(3)
            .map(|px| {
                round_to_u8(0.299 * px[0] as f64 + 0.587 * px[1] as f64 + 0.114 * px[2] as f64)
            })
            .collect();
        RasterImage {
            width: self.width,
            height: self.height,
            channels: 1,
            samples,
        }
    }

    /// Bilinear resize using pixel-centre alignment.
    pub fn resize_bilinear(&self, width: usize, height: usize) -> Result<RasterImage> {
        if width == 0 || height == 0 {
            return Err(Error::Contract(format!("zero-sized resize target {width}x{height}")));
        }
        if width == self.width && height == self.height {
            return Ok(self.clone());
        }
        let sx = self.width as f64 / width as f64;
        let sy = self.height as f64 / height as f64;
        let mut out = RasterImage::filled(width, height, self.channels, 0)?;
        for y in 0..height {
            let src_y = (y as f64 + 0.5) * sy - 0.5;
            for x in 0..width {
                let src_x = (x as f64 + 0.5) * sx - 0.5;
                for c in 0..self.channels {
                    out.set(x, y, c, round_to_u8(self.sample_bilinear(src_x, src_y, c)));
                }
            }
        }
        Ok(out)
    }

    /// Reads PNG or binary PNM (PGM/PPM). Gray+alpha and RGBA inputs lose
    /// their alpha channel.
    pub fn load(path: &Path) -> Result<RasterImage> {
        let img = ::image::open(path).map_err(|e| Error::Image {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let (w, h) = (img.width() as usize, img.height() as usize);
        let gray = matches!(
            img.color(),
            ::image::ColorType::L8 | ::image::ColorType::L16 | ::image::ColorType::La8 | ::image::ColorType::La16
        );
        if gray {
            RasterImage::new(w, h, 1, img.into_luma8().into_raw())
        } else {
            RasterImage::new(w, h, 3, img.into_rgb8().into_raw())
        }
    }

    /// Writes the image; the format follows the extension (`png`, `pgm`, `ppm`).
    pub fn save(&self, path: &Path) -> Result<()> {
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase)
            .unwrap_or_default();
        let format = match ext.as_str() {
            "png" => ::image::ImageFormat::Png,
            "pgm" | "ppm" | "pnm" => ::image::ImageFormat::Pnm,
            other => {
                return Err(Error::Contract(format!(
                    "unsupported image extension `{other}` for {}",
                    path.display()
                )))
            }
        };
        if ext == "pgm" && self.channels != 1 {
            return Err(Error::Contract("PGM output requires a gray image".into()));
        }
        let color = if self.channels == 1 {
            ::image::ExtendedColorType::L8
        } else {
            ::image::ExtendedColorType::Rgb8
        };
        let mut buf = std::io::Cursor::new(Vec::new());
        ::image::write_buffer_with_format(
            &mut buf,
            &self.samples,
            self.width as u32,
            self.height as u32,
            color,
            format,
        )
        .map_err(|e| Error::Image {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        crate::fileio::write_atomic(path, &buf.into_inner())
    }
}

/// Round half up, then clamp into the 8-bit range.
#[inline]
pub fn round_to_u8(v: f64) -> u8 {
    (v + 0.5).floor().clamp(0.0, 255.0) as u8
}
