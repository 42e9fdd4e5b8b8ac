//! Procedural face-like images with 68 landmarks, for exercising the
//! pipeline without licensed data. The images are cartoons: an elliptic
//! face with eyes, brows, nose and mouth whose geometry and colours vary per
//! subject, plus per-session pose jitter, lighting and sensor noise.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::dataset::Gender;
use crate::error::{Error, Result};
use crate::fileio;
use crate::image::{round_to_u8, RasterImage};
use crate::morph::{LandmarkSet, Point};

/// Geometry and colours of one synthetic identity, in a canonical
/// `size x size` frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceParams {
    pub center: (f64, f64),
    pub radii: (f64, f64),
    pub skin: [f64; 3],
    pub hair: [f64; 3],
    pub iris: [f64; 3],
    pub lips: [f64; 3],
    pub eye_dx: f64,
    pub eye_dy: f64,
    pub eye_radii: (f64, f64),
    pub brow_lift: f64,
    pub nose_len: f64,
    pub nose_width: f64,
    pub mouth_dy: f64,
    pub mouth_radii: (f64, f64),
    /// Spatial frequency and phase of a faint skin texture.
    pub texture: (f64, f64, f64),
}

/// Per-capture variation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Capture {
    pub shift: (f64, f64),
    pub scale: f64,
    pub gain: f64,
    pub noise_sigma: f64,
    pub noise_seed: u64,
}

impl FaceParams {
    pub fn random(rng: &mut impl Rng, gender: Gender, size: usize) -> Self {
        let s = size as f64 / 256.0;
        let mut u = |lo: f64, hi: f64| rng.random_range(lo..hi);
        let tone = u(0.55, 1.0);
        let skin = [235.0 * tone, 190.0 * tone, 160.0 * tone];
        let hair_level = u(20.0, 140.0);
        let hair = [hair_level * u(0.9, 1.3), hair_level, hair_level * u(0.6, 1.0)];
        let (rx, ry) = match gender {
            Gender::F => (u(66.0, 76.0), u(88.0, 98.0)),
            Gender::M => (u(74.0, 84.0), u(94.0, 104.0)),
        };
        Self {
            center: (128.0 * s + u(-4.0, 4.0) * s, 130.0 * s + u(-4.0, 4.0) * s),
            radii: (rx * s, ry * s),
            skin,
            hair,
            iris: [u(30.0, 120.0), u(30.0, 110.0), u(20.0, 90.0)],
            lips: [u(150.0, 200.0), u(60.0, 110.0), u(60.0, 110.0)],
            eye_dx: u(26.0, 36.0) * s,
            eye_dy: u(-28.0, -16.0) * s,
            eye_radii: (u(9.0, 13.0) * s, u(4.0, 6.5) * s),
            brow_lift: u(10.0, 16.0) * s,
            nose_len: u(22.0, 32.0) * s,
            nose_width: u(10.0, 16.0) * s,
            mouth_dy: u(36.0, 48.0) * s,
            mouth_radii: (u(18.0, 28.0) * s, u(5.0, 9.0) * s),
            texture: (u(0.05, 0.25) / s, u(0.05, 0.25) / s, u(0.0, 2.0 * PI)),
        }
    }

    /// The 68 landmarks in the canonical frame, in the usual order: jaw
    /// (17), brows (5 + 5), nose bridge (4), nostrils (5), eyes (6 + 6),
    /// outer lips (12), inner lips (8).
    pub fn canonical_landmarks(&self) -> Vec<Point> {
        let (cx, cy) = self.center;
        let (rx, ry) = self.radii;
        let mut p = Vec::with_capacity(68);
        for i in 0..17 {
            let t = PI - i as f64 * PI / 16.0;
            p.push(Point::new(cx + rx * 0.97 * t.cos(), cy + ry * 0.97 * t.sin()));
        }
        let (erx, ery) = self.eye_radii;
        for side in [-1.0, 1.0] {
            let ex = cx + side * self.eye_dx;
            let by = cy + self.eye_dy - self.brow_lift;
            for i in 0..5 {
                let f = i as f64 / 4.0 - 0.5;
                p.push(Point::new(ex + f * 2.6 * erx, by - 4.0 * (1.0 - 4.0 * f * f)));
            }
        }
        let ey = cy + self.eye_dy;
        for i in 0..4 {
            p.push(Point::new(cx, ey + self.nose_len * (i as f64 + 1.0) / 4.0));
        }
        let ny = ey + self.nose_len + 4.0;
        for i in 0..5 {
            let f = i as f64 / 4.0 - 0.5;
            p.push(Point::new(cx + f * 2.0 * self.nose_width, ny - 3.0 * (1.0 - 4.0 * f * f)));
        }
        for side in [-1.0, 1.0] {
            let ex = cx + side * self.eye_dx;
            for t in [PI, 4.0 * PI / 3.0, 5.0 * PI / 3.0, 0.0, PI / 3.0, 2.0 * PI / 3.0] {
                // image y grows downwards: angles in (PI, 2PI) are the upper lid
                p.push(Point::new(ex + erx * t.cos(), ey + ery * t.sin()));
            }
        }
        let (mx, my) = (cx, cy + self.mouth_dy);
        let (mrx, mry) = self.mouth_radii;
        for i in 0..12 {
            let t = PI + i as f64 * PI / 6.0;
            p.push(Point::new(mx + mrx * t.cos(), my + mry * t.sin()));
        }
        for i in 0..8 {
            let t = PI + i as f64 * PI / 4.0;
            p.push(Point::new(mx + 0.7 * mrx * t.cos(), my + 0.35 * mry * t.sin()));
        }
        p
    }

    fn shade(&self, x: f64, y: f64) -> [f64; 3] {
        let (cx, cy) = self.center;
        let (rx, ry) = self.radii;
        let mut c = [110.0 - 0.1 * y, 120.0 - 0.1 * y, 140.0 - 0.05 * y];
        let face_r = ((x - cx) / rx).powi(2) + ((y - cy) / ry).powi(2);
        let hair_r = ((x - cx) / (rx + 8.0)).powi(2) + ((y - cy + 10.0) / (ry + 14.0)).powi(2);
        let blend = |c: &mut [f64; 3], col: [f64; 3], w: f64| {
            let w = w.clamp(0.0, 1.0);
            for k in 0..3 {
                c[k] = (1.0 - w) * c[k] + w * col[k];
            }
        };
        blend(&mut c, self.hair, (1.0 - hair_r) * 20.0 * f64::from(y < cy - 0.4 * ry));
        if face_r < 1.2 {
            let (fx, fy, ph) = self.texture;
            let light = 1.0 - 0.22 * face_r + 0.03 * (fx * x + ph).sin() * (fy * y).cos();
            let skin = self.skin.map(|v| v * light);
            let w = if y < cy - 0.4 * ry { (1.0 - face_r) * 20.0 * f64::from(y > cy - 0.75 * ry) } else { (1.0 - face_r) * 20.0 };
            blend(&mut c, skin, w);
        }
        let ey = cy + self.eye_dy;
        let (erx, ery) = self.eye_radii;
        for side in [-1.0, 1.0] {
            let ex = cx + side * self.eye_dx;
            let r = ((x - ex) / erx).powi(2) + ((y - ey) / ery).powi(2);
            blend(&mut c, [235.0, 232.0, 228.0], (1.0 - r) * 8.0);
            let ir = ((x - ex).powi(2) + (y - ey).powi(2)).sqrt() / ery;
            blend(&mut c, self.iris, (1.0 - ir) * 6.0);
            blend(&mut c, [15.0, 15.0, 15.0], (0.45 - ir) * 10.0);
            let by = ey - self.brow_lift;
            let f = (x - ex) / (2.6 * erx);
            if f.abs() < 0.5 {
                let d = (y - (by - 4.0 * (1.0 - 4.0 * f * f))).abs();
                blend(&mut c, self.hair.map(|v| v * 0.8), (2.5 - d) * 0.8);
            }
        }
        let nose_top = ey + 0.25 * self.nose_len;
        let ny = ey + self.nose_len + 4.0;
        if y > nose_top && y < ny {
            let d = (x - cx - 0.15 * self.nose_width).abs();
            blend(&mut c, self.skin.map(|v| v * 0.75), (2.0 - d) * 0.4);
        }
        for side in [-1.0, 1.0] {
            let nx = cx + side * 0.3 * self.nose_width;
            let r = ((x - nx) / 3.5).powi(2) + ((y - ny) / 2.2).powi(2);
            blend(&mut c, [60.0, 40.0, 35.0], (1.0 - r) * 3.0);
        }
        let my = cy + self.mouth_dy;
        let (mrx, mry) = self.mouth_radii;
        let r = ((x - cx) / mrx).powi(2) + ((y - my) / mry).powi(2);
        blend(&mut c, self.lips, (1.0 - r) * 6.0);
        let line = (y - my).abs() + 3.0 * f64::from(((x - cx) / (0.7 * mrx)).abs() > 1.0) * 10.0;
        blend(&mut c, [70.0, 25.0, 30.0], (1.2 - line) * 0.8);
        c
    }

    /// Renders one capture and its landmarks. The capture transform maps
    /// canonical point `q` to `center + scale * (q - center) + shift`.
    pub fn render(&self, size: usize, capture: &Capture) -> Result<(RasterImage, LandmarkSet)> {
        let (cx, cy) = self.center;
        let (sx, sy) = capture.shift;
        let s = capture.scale;
        let mut rng = ChaCha8Rng::seed_from_u64(capture.noise_seed);
        let noise = Normal::new(0.0, capture.noise_sigma.max(0.0))
            .map_err(|e| Error::Config(format!("noise sigma: {e}")))?;
        let mut samples = Vec::with_capacity(size * size * 3);
        for py in 0..size {
            for px in 0..size {
                let qx = (px as f64 - cx - sx) / s + cx;
                let qy = (py as f64 - cy - sy) / s + cy;
                let c = self.shade(qx, qy);
                for v in c {
                    samples.push(round_to_u8(v * capture.gain + noise.sample(&mut rng)));
                }
            }
        }
        let image = RasterImage::new(size, size, 3, samples)?;
        let landmarks = LandmarkSet::new(
            self.canonical_landmarks()
                .into_iter()
                .map(|q| Point::new(cx + s * (q.x - cx) + sx, cy + s * (q.y - cy) + sy))
                .collect(),
        );
        landmarks.check_within(size, size)?;
        Ok((image, landmarks))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthConfig {
    /// Subjects; the first half female, the rest male.
    pub subjects: usize,
    pub size: usize,
    pub seed: u64,
    pub noise_sigma: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            subjects: 12,
            size: 256,
            seed: 7,
            noise_sigma: 4.0,
        }
    }
}

/// `(subject_id, gender, identity)` for every synthetic subject.
pub fn synthetic_subjects(cfg: &SynthConfig) -> Vec<(String, Gender, FaceParams)> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    (0..cfg.subjects)
        .map(|i| {
            let gender = if i < cfg.subjects / 2 { Gender::F } else { Gender::M };
            (format!("S{:02}", i + 1), gender, FaceParams::random(&mut rng, gender, cfg.size))
        })
        .collect()
}

/// Capture variation of `session` (1-based) of subject number `subject`.
pub fn session_capture(cfg: &SynthConfig, subject: usize, session: u32) -> Capture {
    let seed = cfg.seed ^ ((subject as u64 + 1) << 32) ^ (session as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = cfg.size as f64 / 256.0;
    Capture {
        shift: (rng.random_range(-3.0..3.0) * k, rng.random_range(-3.0..3.0) * k),
        scale: rng.random_range(0.97..1.03),
        gain: rng.random_range(0.92..1.08),
        noise_sigma: cfg.noise_sigma,
        noise_seed: rng.random(),
    }
}

/// Writes `images/<id>_<session>.png`, `landmarks/<id>_<session>.txt` and
/// `manifest.txt` (three sessions per subject) under `dir`. Returns the
/// manifest path.
pub fn write_synthetic_set(dir: &Path, cfg: &SynthConfig) -> Result<PathBuf> {
    if cfg.subjects < 2 || cfg.size < 64 {
        return Err(Error::Config("synthetic set needs at least 2 subjects of at least 64 px".into()));
    }
    let subjects = synthetic_subjects(cfg);
    let mut manifest = String::from(
        "# bin=synthetic\n# landmark_count=68\n# subject_id;gender;session_index;capture_age;image_path;landmark_path\n",
    );
    let mut age_rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
    let jobs: Vec<(usize, u32)> = (0..subjects.len()).flat_map(|i| (1..=3).map(move |s| (i, s))).collect();
    use rayon::prelude::*;
    jobs.par_iter()
        .map(|&(i, session)| {
            let (id, _, params) = &subjects[i];
            let (img, lm) = params.render(cfg.size, &session_capture(cfg, i, session))?;
            img.save(&dir.join(format!("images/{id}_{session}.png")))?;
            lm.save(&dir.join(format!("landmarks/{id}_{session}.txt")))
        })
        .collect::<Result<Vec<()>>>()?;
    for (id, gender, _) in &subjects {
        let base: u32 = age_rng.random_range(18..60);
        for (session, age) in [(1, base), (2, base + 1), (3, base + 3)] {
            manifest.push_str(&format!(
                "{id};{gender};{session};{age};images/{id}_{session}.png;landmarks/{id}_{session}.txt\n"
            ));
        }
    }
    let path = dir.join("manifest.txt");
    fileio::write_atomic(&path, manifest.as_bytes())?;
    Ok(path)
}
