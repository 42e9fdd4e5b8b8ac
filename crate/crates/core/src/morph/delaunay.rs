//! Incremental Delaunay triangulation.
//!
//! Points are inserted in lexicographic `(x, y)` order, so every new point
//! lies outside the current convex hull and is connected to the hull edges
//! it sees. Illegal edges are then flipped (Lawson) using exact orientation
//! and in-circle predicates. A flip happens only when the opposite vertex is
//! strictly inside the circumcircle, so co-circular configurations keep the
//! diagonal produced by insertion order.

use std::collections::HashMap;

use robust::Coord;

use super::landmarks::Point;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    pub vertices: Vec<Point>,
    /// Counter-clockwise vertex index triples, each starting at its smallest
    /// index, sorted.
    pub triangles: Vec<[usize; 3]>,
}

fn coord(p: Point) -> Coord<f64> {
    Coord { x: p.x, y: p.y }
}

/// Positive when `a, b, c` turn counter-clockwise.
pub fn orient(a: Point, b: Point, c: Point) -> f64 {
    robust::orient2d(coord(a), coord(b), coord(c))
}

/// Positive when `d` lies strictly inside the circumcircle of the
/// counter-clockwise triangle `a, b, c`.
pub fn in_circle(a: Point, b: Point, c: Point, d: Point) -> f64 {
    robust::incircle(coord(a), coord(b), coord(c), coord(d))
}

struct Builder<'a> {
    pts: &'a [Point],
    triangles: Vec<[usize; 3]>,
    // directed edge -> triangle holding it
    edges: HashMap<(usize, usize), usize>,
}

impl Builder<'_> {
    fn add(&mut self, t: [usize; 3]) -> usize {
        let id = self.triangles.len();
        self.triangles.push(t);
        self.link(id);
        id
    }

    fn link(&mut self, id: usize) {
        let t = self.triangles[id];
        for k in 0..3 {
            self.edges.insert((t[k], t[(k + 1) % 3]), id);
        }
    }

    fn unlink(&mut self, id: usize) {
        let t = self.triangles[id];
        for k in 0..3 {
            self.edges.remove(&(t[k], t[(k + 1) % 3]));
        }
    }

    fn third(&self, id: usize, a: usize, b: usize) -> usize {
        *self.triangles[id].iter().find(|&&v| v != a && v != b).expect("triangle has three vertices")
    }

    fn legalize(&mut self, mut stack: Vec<(usize, usize)>) {
        while let Some((a, b)) = stack.pop() {
            let (Some(&t1), Some(&t2)) = (self.edges.get(&(a, b)), self.edges.get(&(b, a))) else {
                continue;
            };
            let c = self.third(t1, a, b);
            let d = self.third(t2, b, a);
            if in_circle(self.pts[a], self.pts[b], self.pts[c], self.pts[d]) > 0.0 {
                self.unlink(t1);
                self.unlink(t2);
                self.triangles[t1] = [a, d, c];
                self.triangles[t2] = [d, b, c];
                self.link(t1);
                self.link(t2);
                stack.extend([(a, d), (d, b), (b, c), (c, a)]);
            }
        }
    }
}

pub fn delaunay(points: &[Point]) -> Result<TriangleMesh> {
    if points.len() < 3 {
        return Err(Error::Geometry(format!("need at least 3 points, got {}", points.len())));
    }
    if let Some(p) = points.iter().find(|p| !p.x.is_finite() || !p.y.is_finite()) {
        return Err(Error::Geometry(format!("non-finite point ({}, {})", p.x, p.y)));
    }
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&i, &j| {
        points[i]
            .x
            .total_cmp(&points[j].x)
            .then(points[i].y.total_cmp(&points[j].y))
    });
    for w in order.windows(2) {
        if points[w[0]] == points[w[1]] {
            return Err(Error::Geometry(format!(
                "duplicate point ({}, {})",
                points[w[0]].x, points[w[0]].y
            )));
        }
    }

    let p = |i: usize| points[i];
    let (first, second) = (order[0], order[1]);
    let k = (2..order.len())
        .find(|&k| orient(p(first), p(second), p(order[k])) != 0.0)
        .ok_or_else(|| Error::Geometry("all points are collinear".into()))?;

    let mut b = Builder {
        pts: points,
        triangles: Vec::new(),
        edges: HashMap::new(),
    };
    // Seed: the collinear prefix fanned to the first off-line point. Sorted
    // collinear points are ordered along their line.
    let apex = order[k];
    let chain: Vec<usize> = order[..k].to_vec();
    let left = orient(p(chain[0]), p(chain[k - 1]), p(apex)) > 0.0;
    let mut hull: Vec<usize> = if left {
        chain.clone()
    } else {
        chain.iter().rev().copied().collect()
    };
    let mut stack = Vec::new();
    for w in hull.windows(2) {
        b.add([w[0], w[1], apex]);
        stack.extend([(w[0], w[1]), (w[1], apex), (apex, w[0])]);
    }
    hull.push(apex);
    b.legalize(stack);

    for &i in &order[k + 1..] {
        let n = hull.len();
        let visible = |e: usize, hull: &[usize]| orient(p(hull[e]), p(hull[(e + 1) % hull.len()]), p(i)) < 0.0;
        // Rotate so the visible chain does not wrap around the end.
        let start = (0..n)
            .find(|&e| !visible(e, &hull) && visible((e + 1) % n, &hull))
            .ok_or_else(|| Error::Geometry("point not outside hull during insertion".into()))?;
        hull.rotate_left((start + 1) % n);
        let mut stack = Vec::new();
        let mut last = 0;
        for e in 0..n {
            if !visible(e, &hull) {
                break;
            }
            let (u, v) = (hull[e], hull[(e + 1) % n]);
            b.add([v, u, i]);
            stack.extend([(v, u), (u, i), (i, v)]);
            last = e + 1;
        }
        // hull[0..=last] was the visible chain; its interior vertices leave
        // the hull and the new point takes their place.
        hull.splice(1..last, [i]);
        b.legalize(stack);
    }

    let mut triangles: Vec<[usize; 3]> = b
        .triangles
        .into_iter()
        .map(|t| {
            let m = (0..3).min_by_key(|&j| t[j]).expect("three vertices");
            [t[m], t[(m + 1) % 3], t[(m + 2) % 3]]
        })
        .collect();
    triangles.sort_unstable();
    Ok(TriangleMesh {
        vertices: points.to_vec(),
        triangles,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(v: &[(f64, f64)]) -> Vec<Point> {
        v.iter().map(|&(x, y)| Point::new(x, y)).collect()
    }

    #[test]
    fn three_points_one_triangle() {
        let m = delaunay(&pts(&[(0.0, 0.0), (4.0, 0.0), (1.0, 3.0)])).unwrap();
        assert_eq!(m.triangles, vec![[0, 1, 2]]);
    }

    #[test]
    fn unit_square_diagonal_is_fixed() {
        // sorted order (0,0) (0,1) (1,0) (1,1); the seed triangle uses the
        // (0,1)-(1,0) diagonal and the co-circular fourth point does not flip it
        let m = delaunay(&pts(&[(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)])).unwrap();
        assert_eq!(m.triangles.len(), 2);
        for t in &m.triangles {
            assert!(t.contains(&1) && t.contains(&3), "{t:?}");
            assert!(orient(m.vertices[t[0]], m.vertices[t[1]], m.vertices[t[2]]) > 0.0);
        }
    }

    #[test]
    fn collinear_prefix_is_fanned() {
        let m = delaunay(&pts(&[(0.0, 0.0), (0.0, 1.0), (0.0, 2.0), (0.0, 3.0), (2.0, 1.5)])).unwrap();
        assert_eq!(m.triangles.len(), 3);
        let m = delaunay(&pts(&[(0.0, 0.0), (1.0, 0.0), (2.0, 0.0), (1.0, -1.0), (1.0, 1.0)])).unwrap();
        assert_eq!(m.triangles.len(), 4);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(matches!(delaunay(&pts(&[(0.0, 0.0), (1.0, 1.0)])), Err(Error::Geometry(_))));
        assert!(matches!(
            delaunay(&pts(&[(0.0, 0.0), (1.0, 1.0), (2.0, 2.0), (3.0, 3.0)])),
            Err(Error::Geometry(_))
        ));
        assert!(matches!(
            delaunay(&pts(&[(0.0, 0.0), (1.0, 0.0), (1.0, 0.0), (0.0, 1.0)])),
            Err(Error::Geometry(_))
        ));
    }

    #[test]
    fn grid_points_triangulate() {
        let mut v = Vec::new();
        for i in 0..5 {
            for j in 0..4 {
                v.push((i as f64, j as f64));
            }
        }
        let m = delaunay(&pts(&v)).unwrap();
        // 20 points, all 14 on the hull: 2n - h - 2 triangles
        assert_eq!(m.triangles.len(), 2 * 20 - 14 - 2);
    }
}
