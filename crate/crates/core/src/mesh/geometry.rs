//! Planar geometry helpers: exact orientation tests, hulls, polygons and
//! convex clipping.

use crate::error::{Error, Result};
use robust::Coord;

pub type Point = [f64; 2];

fn c(p: Point) -> Coord<f64> {
    Coord { x: p[0], y: p[1] }
}

/// Twice the signed area of `(a, b, p)`; positive when counter-clockwise. Exact sign.
pub fn orient(a: Point, b: Point, p: Point) -> f64 {
    robust::orient2d(c(a), c(b), c(p))
}

/// Positive when `d` lies strictly inside the circumcircle of the
/// counter-clockwise triangle `(a, b, c)`. Exact sign.
pub fn in_circle(a: Point, b: Point, cc: Point, d: Point) -> f64 {
    robust::incircle(c(a), c(b), c(cc), c(d))
}

pub fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

pub fn tri_area(a: Point, b: Point, p: Point) -> f64 {
    0.5 * ((b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]))
}

pub fn circumcenter(a: Point, b: Point, p: Point) -> Point {
    let (bx, by) = (b[0] - a[0], b[1] - a[1]);
    let (cx, cy) = (p[0] - a[0], p[1] - a[1]);
    let d = 2.0 * (bx * cy - by * cx);
    let b2 = bx * bx + by * by;
    let c2 = cx * cx + cy * cy;
    [a[0] + (cy * b2 - by * c2) / d, a[1] + (bx * c2 - cx * b2) / d]
}

/// Interior angles (degrees) of a triangle.
pub fn angles_deg(a: Point, b: Point, p: Point) -> [f64; 3] {
    let la = dist(b, p);
    let lb = dist(a, p);
    let lc = dist(a, b);
    let ang = |opp: f64, s1: f64, s2: f64| ((s1 * s1 + s2 * s2 - opp * opp) / (2.0 * s1 * s2)).clamp(-1.0, 1.0).acos().to_degrees();
    [ang(la, lb, lc), ang(lb, la, lc), ang(lc, la, lb)]
}

pub fn min_angle_deg(a: Point, b: Point, p: Point) -> f64 {
    let [x, y, z] = angles_deg(a, b, p);
    x.min(y).min(z)
}

/// Convex hull, counter-clockwise, no collinear vertices.
pub fn convex_hull(points: &[Point]) -> Result<Vec<Point>> {
    let mut pts: Vec<Point> = points.to_vec();
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    pts.dedup();
    if pts.len() < 3 {
        return Err(Error::CollinearInput);
    }
    let mut lower: Vec<Point> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && orient(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<Point> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && orient(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    if lower.len() < 3 {
        return Err(Error::CollinearInput);
    }
    Ok(lower)
}

pub fn polygon_area(poly: &[Point]) -> f64 {
    let n = poly.len();
    0.5 * (0..n)
        .map(|i| {
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            a[0] * b[1] - b[0] * a[1]
        })
        .sum::<f64>()
}

/// Area and centroid of a (possibly non-simple, signed) polygon.
pub fn polygon_moments(poly: &[Point]) -> (f64, Point) {
    let n = poly.len();
    if n < 3 {
        return (0.0, [0.0, 0.0]);
    }
    let o = poly[0];
    let (mut a2, mut cx, mut cy) = (0.0, 0.0, 0.0);
    for i in 1..n - 1 {
        let (p, q) = (poly[i], poly[i + 1]);
        let w = (p[0] - o[0]) * (q[1] - o[1]) - (q[0] - o[0]) * (p[1] - o[1]);
        a2 += w;
        cx += w * (o[0] + p[0] + q[0]);
        cy += w * (o[1] + p[1] + q[1]);
    }
    if a2 == 0.0 {
        return (0.0, o);
    }
    (0.5 * a2, [cx / (3.0 * a2), cy / (3.0 * a2)])
}

/// Even-odd point-in-polygon test. Points on the boundary may go either way.
pub fn point_in_polygon(p: Point, poly: &[Point]) -> bool {
    let n = poly.len();
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (poly[i], poly[j]);
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x = a[0] + (p[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
            if p[0] < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

/// Distance from `p` to the segment `ab`.
pub fn point_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let l2 = dx * dx + dy * dy;
    let t = if l2 == 0.0 { 0.0 } else { (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / l2).clamp(0.0, 1.0) };
    dist(p, [a[0] + t * dx, a[1] + t * dy])
}

pub fn point_on_segment(p: Point, a: Point, b: Point) -> bool {
    orient(a, b, p) == 0.0 && p[0] >= a[0].min(b[0]) && p[0] <= a[0].max(b[0]) && p[1] >= a[1].min(b[1]) && p[1] <= a[1].max(b[1])
}

fn segments_intersect(a: Point, b: Point, p: Point, q: Point) -> bool {
    let d1 = orient(a, b, p);
    let d2 = orient(a, b, q);
    let d3 = orient(p, q, a);
    let d4 = orient(p, q, b);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    (d1 == 0.0 && point_on_segment(p, a, b))
        || (d2 == 0.0 && point_on_segment(q, a, b))
        || (d3 == 0.0 && point_on_segment(a, p, q))
        || (d4 == 0.0 && point_on_segment(b, p, q))
}

/// Validate a simple polygon and return it counter-clockwise.
pub fn normalize_polygon(poly: &[Point]) -> Result<Vec<Point>> {
    let mut p: Vec<Point> = poly.to_vec();
    if p.len() > 1 && p.first() == p.last() {
        p.pop();
    }
    if p.len() < 3 {
        return Err(Error::DegeneratePolygon("fewer than 3 vertices".into()));
    }
    if p.iter().any(|v| !v[0].is_finite() || !v[1].is_finite()) {
        return Err(Error::DegeneratePolygon("non-finite coordinate".into()));
    }
    let n = p.len();
    for i in 0..n {
        if p[i] == p[(i + 1) % n] {
            return Err(Error::DegeneratePolygon(format!("repeated vertex {i}")));
        }
    }
    for i in 0..n {
        for j in i + 1..n {
            // Adjacent edges share a vertex; only test non-adjacent pairs.
            if j == i + 1 || (i == 0 && j == n - 1) {
                continue;
            }
            if segments_intersect(p[i], p[(i + 1) % n], p[j], p[(j + 1) % n]) {
                return Err(Error::DegeneratePolygon(format!("edges {i} and {j} intersect")));
            }
        }
    }
    let area = polygon_area(&p);
    if area == 0.0 {
        return Err(Error::DegeneratePolygon("zero area".into()));
    }
    if area < 0.0 {
        p.reverse();
    }
    Ok(p)
}

/// Clip a polygon against a convex counter-clockwise polygon
/// (Sutherland–Hodgman). The subject may be non-convex; the output then may
/// contain zero-width bridges, which do not affect area integrals.
pub fn clip_convex(subject: &[Point], clip: &[Point]) -> Vec<Point> {
    let mut out: Vec<Point> = subject.to_vec();
    let m = clip.len();
    for k in 0..m {
        if out.is_empty() {
            break;
        }
        let (a, b) = (clip[k], clip[(k + 1) % m]);
        let input = std::mem::take(&mut out);
        let side = |p: Point| (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]);
        let n = input.len();
        for i in 0..n {
            let cur = input[i];
            let prev = input[(i + n - 1) % n];
            let (sc, sp) = (side(cur), side(prev));
            if sc >= 0.0 {
                if sp < 0.0 {
                    out.push(lerp(prev, cur, sp / (sp - sc)));
                }
                out.push(cur);
            } else if sp >= 0.0 {
                out.push(lerp(prev, cur, sp / (sp - sc)));
            }
        }
    }
    out
}

fn lerp(a: Point, b: Point, t: f64) -> Point {
    [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]
}

/// Regular polygon of `k` sides whose edges are tangent to a circle of
/// radius `r` around the origin.
pub fn circumscribed_polygon(r: f64, k: usize) -> Vec<Point> {
    let half = std::f64::consts::PI / k as f64;
    let rr = r / half.cos();
    (0..k)
        .map(|i| {
            let t = (2 * i + 1) as f64 * half;
            [rr * t.cos(), rr * t.sin()]
        })
        .collect()
}
