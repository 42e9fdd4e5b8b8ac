//! Affine maps between triangles and piecewise-affine image warping.

use super::delaunay::{delaunay, orient, TriangleMesh};
use super::landmarks::{LandmarkSet, Point};
use crate::error::{Error, Result};
use crate::image::{round_to_u8, RasterImage};

/// `x' = a*x + b*y + c`, `y' = d*x + e*y + f`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Affine {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub e: f64,
    pub f: f64,
}

impl Affine {
    pub const IDENTITY: Affine = Affine {
        a: 1.0,
        b: 0.0,
        c: 0.0,
        d: 0.0,
        e: 1.0,
        f: 0.0,
    };

    #[inline]
    pub fn apply(&self, p: Point) -> Point {
        Point::new(self.a * p.x + self.b * p.y + self.c, self.d * p.x + self.e * p.y + self.f)
    }
}

/// The affine map sending each `src[i]` to `dst[i]`.
pub fn triangle_affine(src: [Point; 3], dst: [Point; 3]) -> Result<Affine> {
    if orient(src[0], src[1], src[2]) == 0.0 {
        return Err(Error::Geometry("degenerate source triangle".into()));
    }
    if src == dst {
        return Ok(Affine::IDENTITY);
    }
    let [p0, p1, p2] = src;
    // Inverse of [[x0 y0 1] [x1 y1 1] [x2 y2 1]] via cofactors.
    let det = p0.x * (p1.y - p2.y) - p0.y * (p1.x - p2.x) + (p1.x * p2.y - p2.x * p1.y);
    let inv = [
        [(p1.y - p2.y) / det, (p2.y - p0.y) / det, (p0.y - p1.y) / det],
        [(p2.x - p1.x) / det, (p0.x - p2.x) / det, (p1.x - p0.x) / det],
        [
            (p1.x * p2.y - p2.x * p1.y) / det,
            (p2.x * p0.y - p0.x * p2.y) / det,
            (p0.x * p1.y - p1.x * p0.y) / det,
        ],
    ];
    let solve = |r: [f64; 3]| {
        [
            inv[0][0] * r[0] + inv[0][1] * r[1] + inv[0][2] * r[2],
            inv[1][0] * r[0] + inv[1][1] * r[1] + inv[1][2] * r[2],
            inv[2][0] * r[0] + inv[2][1] * r[1] + inv[2][2] * r[2],
        ]
    };
    let [a, b, c] = solve([dst[0].x, dst[1].x, dst[2].x]);
    let [d, e, f] = solve([dst[0].y, dst[1].y, dst[2].y]);
    Ok(Affine { a, b, c, d, e, f })
}

/// Four corners and four edge midpoints of a `width x height` frame.
pub fn boundary_anchors(width: usize, height: usize) -> Vec<Point> {
    let (w, h) = ((width - 1) as f64, (height - 1) as f64);
    vec![
        Point::new(0.0, 0.0),
        Point::new(w / 2.0, 0.0),
        Point::new(w, 0.0),
        Point::new(w, h / 2.0),
        Point::new(w, h),
        Point::new(w / 2.0, h),
        Point::new(0.0, h),
        Point::new(0.0, h / 2.0),
    ]
}

fn with_anchors(set: &LandmarkSet, width: usize, height: usize) -> Vec<Point> {
    let mut v = set.points().to_vec();
    v.extend(boundary_anchors(width, height));
    v
}

/// Target-side mesh of a warp with, for every pixel, the triangle that owns
/// it. Pixels on shared edges belong to the lowest-numbered triangle.
#[derive(Debug, Clone)]
pub struct WarpMesh {
    pub mesh: TriangleMesh,
    width: usize,
    height: usize,
    owner: Vec<u32>,
}

const UNOWNED: u32 = u32::MAX;

impl WarpMesh {
    /// Triangulates `target` plus the frame anchors.
    pub fn new(target: &LandmarkSet, width: usize, height: usize) -> Result<WarpMesh> {
        if width < 2 || height < 2 {
            return Err(Error::Contract(format!("image {width}x{height} too small to warp")));
        }
        let mesh = delaunay(&with_anchors(target, width, height))?;
        let mut owner = vec![UNOWNED; width * height];
        for (ti, t) in mesh.triangles.iter().enumerate() {
            let [a, b, c] = t.map(|i| mesh.vertices[i]);
            let area = (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
            let x0 = a.x.min(b.x).min(c.x).ceil().max(0.0) as usize;
            let x1 = (a.x.max(b.x).max(c.x).floor() as usize).min(width - 1);
            let y0 = a.y.min(b.y).min(c.y).ceil().max(0.0) as usize;
            let y1 = (a.y.max(b.y).max(c.y).floor() as usize).min(height - 1);
            for y in y0..=y1 {
                for x in x0..=x1 {
                    let idx = y * width + x;
                    if owner[idx] != UNOWNED {
                        continue;
                    }
                    let p = Point::new(x as f64, y as f64);
                    let l0 = ((c.x - b.x) * (p.y - b.y) - (c.y - b.y) * (p.x - b.x)) / area;
                    let l1 = ((a.x - c.x) * (p.y - c.y) - (a.y - c.y) * (p.x - c.x)) / area;
                    let l2 = 1.0 - l0 - l1;
                    if l0 >= -1e-9 && l1 >= -1e-9 && l2 >= -1e-9 {
                        owner[idx] = ti as u32;
                    }
                }
            }
        }
        Ok(WarpMesh {
            mesh,
            width,
            height,
            owner,
        })
    }

    /// Warps `image`, annotated with `source` landmarks, onto the target
    /// geometry: each output pixel is mapped back through its triangle's
    /// affine map and sampled bilinearly.
    pub fn warp(&self, image: &RasterImage, source: &LandmarkSet) -> Result<RasterImage> {
        if image.width() != self.width || image.height() != self.height {
            return Err(Error::Contract(format!(
                "image is {}x{}, warp mesh was built for {}x{}",
                image.width(),
                image.height(),
                self.width,
                self.height
            )));
        }
        let src_pts = with_anchors(source, self.width, self.height);
        if src_pts.len() != self.mesh.vertices.len() {
            return Err(Error::Contract(format!(
                "landmark count mismatch: {} source vs {} target",
                source.len(),
                self.mesh.vertices.len() - 8
            )));
        }
        let maps: Vec<Affine> = self
            .mesh
            .triangles
            .iter()
            .map(|t| {
                let dst = t.map(|i| self.mesh.vertices[i]);
                let src = t.map(|i| src_pts[i]);
                triangle_affine(dst, src)
            })
            .collect::<Result<_>>()?;
        let mut out = RasterImage::filled(self.width, self.height, image.channels(), 0)?;
        for y in 0..self.height {
            for x in 0..self.width {
                let p = Point::new(x as f64, y as f64);
                let q = match self.owner[y * self.width + x] {
                    UNOWNED => p,
                    t => maps[t as usize].apply(p),
                };
                for c in 0..image.channels() {
                    out.set(x, y, c, round_to_u8(image.sample_bilinear(q.x, q.y, c)));
                }
            }
        }
        Ok(out)
    }
}

/// Warps `image` from landmarks `src` to landmarks `dst`.
pub fn piecewise_warp(image: &RasterImage, src: &LandmarkSet, dst: &LandmarkSet) -> Result<RasterImage> {
    if src.len() != dst.len() {
        return Err(Error::Contract(format!(
            "landmark count mismatch: {} vs {}",
            src.len(),
            dst.len()
        )));
    }
    WarpMesh::new(dst, image.width(), image.height())?.warp(image, src)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tri(v: [(f64, f64); 3]) -> [Point; 3] {
        v.map(|(x, y)| Point::new(x, y))
    }

    #[test]
    fn identity_affine() {
        let t = tri([(1.5, 2.0), (7.25, 3.0), (4.0, 9.5)]);
        assert_eq!(triangle_affine(t, t).unwrap(), Affine::IDENTITY);
    }

    #[test]
    fn uniform_scale() {
        // a*0+b*0+c = 0, a*1+c = 2, b*1+c = 0  ->  a = 2, b = 0, c = 0
        // d*0+e*0+f = 0, d+f = 0,   e+f = 2    ->  d = 0, e = 2, f = 0
        let m = triangle_affine(tri([(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)]), tri([(0.0, 0.0), (2.0, 0.0), (0.0, 2.0)])).unwrap();
        assert_eq!(m, Affine { a: 2.0, b: 0.0, c: 0.0, d: 0.0, e: 2.0, f: 0.0 });
    }

    #[test]
    fn translation() {
        let s = tri([(1.0, 1.0), (5.0, 2.0), (2.0, 6.0)]);
        let d = s.map(|p| Point::new(p.x + 3.0, p.y + 4.0));
        let m = triangle_affine(s, d).unwrap();
        for (v, want) in [(m.a, 1.0), (m.b, 0.0), (m.c, 3.0), (m.d, 0.0), (m.e, 1.0), (m.f, 4.0)] {
            assert!((v - want).abs() < 1e-12, "{m:?}");
        }
    }

    #[test]
    fn degenerate_source() {
        let s = tri([(0.0, 0.0), (1.0, 1.0), (2.0, 2.0)]);
        assert!(matches!(triangle_affine(s, s), Err(Error::Geometry(_))));
    }

    fn grid_landmarks(offset_x: f64) -> LandmarkSet {
        let mut v = Vec::new();
        for i in 0..4 {
            for j in 0..4 {
                v.push(Point::new(20.0 + 8.0 * i as f64 + offset_x, 20.0 + 8.0 * j as f64));
            }
        }
        LandmarkSet::new(v)
    }

    #[test]
    fn identity_warp_is_bit_exact() {
        let img = RasterImage::from_fn_gray(64, 64, |x, y| ((x * 37 + y * 11) % 256) as u8).unwrap();
        let lm = grid_landmarks(0.3);
        assert_eq!(piecewise_warp(&img, &lm, &lm).unwrap(), img);
    }

    #[test]
    fn shifted_landmarks_shift_interior_content() {
        let img = RasterImage::from_fn_gray(64, 64, |x, y| (2 * x + y) as u8).unwrap();
        let src = grid_landmarks(0.0);
        let dst = grid_landmarks(2.0);
        let out = piecewise_warp(&img, &src, &dst).unwrap();
        // The 4x4 landmark grid spans x in [22, 46], y in [20, 44] on the
        // target side; inside it every triangle is a pure translation by
        // (+2, 0), so output(x, y) = input(x - 2, y) = 2(x - 2) + y.
        for y in 20..=44 {
            for x in 22..=46 {
                assert_eq!(out.get(x, y, 0) as usize, 2 * (x - 2) + y, "({x},{y})");
            }
        }
    }

    #[test]
    fn count_mismatch() {
        let img = RasterImage::filled(32, 32, 1, 0).unwrap();
        let a = grid_landmarks(0.0);
        let b = LandmarkSet::new(a.points()[..5].to_vec());
        assert!(matches!(piecewise_warp(&img, &a, &b), Err(Error::Contract(_))));
    }

    #[test]
    fn every_pixel_is_owned() {
        let wm = WarpMesh::new(&grid_landmarks(0.5), 50, 61).unwrap();
        assert!(wm.owner.iter().all(|&o| o != UNOWNED));
    }
}
