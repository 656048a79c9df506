//! Planar triangular meshes.
//!
//! [`build_mesh`] produces a two-zone mesh: an inner region (the convex hull
//! of the data, or a user polygon) refined to `max_edge_inner`, surrounded by
//! an extension ring refined to `max_edge_outer` that pushes the artificial
//! boundary away from the data. [`projection_matrix`] and
//! [`areal_integration_row`] map mesh coefficients to point and area
//! observations.

pub mod geometry;
mod projection;
mod refine;

pub use geometry::Point;
pub use projection::{areal_integration_row, projection_matrix, PointLocator, ProjectionMatrix};

use crate::error::{Error, Result};
use geometry::{angles_deg, circumscribed_polygon, convex_hull, dist, normalize_polygon, orient, tri_area};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

/// Triangulation with counter-clockwise triangles and 0-based indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mesh {
    pub vertices: Vec<Point>,
    pub triangles: Vec<[usize; 3]>,
    #[serde(default)]
    pub boundary_loops: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeshConfig {
    pub max_edge_inner: f64,
    pub max_edge_outer: f64,
    pub extension_distance: f64,
    /// Minimum interior angle, degrees.
    pub min_angle: f64,
}

impl Default for MeshConfig {
    fn default() -> Self {
        MeshConfig { max_edge_inner: 1.0, max_edge_outer: 2.0, extension_distance: 0.0, min_angle: 21.0 }
    }
}

impl MeshConfig {
    /// Inner and outer edge limits set from one value (outer = 2 × inner).
    pub fn with_max_edge(max_edge: f64, extension_distance: f64) -> Self {
        MeshConfig { max_edge_inner: max_edge, max_edge_outer: 2.0 * max_edge, extension_distance, min_angle: 21.0 }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        if !(self.max_edge_inner > 0.0) || !self.max_edge_inner.is_finite() {
            return bad("max_edge_inner must be positive");
        }
        if !(self.max_edge_inner <= self.max_edge_outer) || !self.max_edge_outer.is_finite() {
            return bad("max_edge_inner must not exceed max_edge_outer");
        }
        if !(self.extension_distance >= 0.0) || !self.extension_distance.is_finite() {
            return bad("extension_distance must be non-negative");
        }
        if !(self.min_angle > 0.0 && self.min_angle < 35.0) {
            return bad("min_angle must lie in (0, 35) degrees");
        }
        Ok(())
    }
}

/// A built mesh together with its zone layout.
#[derive(Debug, Clone)]
pub struct BuiltMesh {
    pub mesh: Mesh,
    /// Whether each triangle lies in the inner zone.
    pub inner_triangle: Vec<bool>,
    pub inner_polygon: Vec<Point>,
    pub outer_polygon: Vec<Point>,
}

/// Upper bound on the number of vertices produced by refinement.
pub const MAX_MESH_VERTICES: usize = 400_000;

/// Build a Delaunay-refined mesh; see [`build_mesh_zoned`].
pub fn build_mesh(locations: &[Point], boundary: Option<&[Point]>, config: &MeshConfig) -> Result<Mesh> {
    Ok(build_mesh_zoned(locations, boundary, config)?.mesh)
}

pub fn build_mesh_zoned(locations: &[Point], boundary: Option<&[Point]>, config: &MeshConfig) -> Result<BuiltMesh> {
    config.validate()?;
    let inner = match boundary {
        Some(poly) => {
            let poly = normalize_polygon(poly)?;
            for &p in locations {
                if !geometry::point_in_polygon(p, &poly) && !(0..poly.len()).any(|i| geometry::point_on_segment(p, poly[i], poly[(i + 1) % poly.len()])) {
                    return Err(Error::DegeneratePolygon(format!("location ({}, {}) lies outside the boundary", p[0], p[1])));
                }
            }
            poly
        }
        None => {
            if locations.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
                return Err(Error::InvalidParameter("non-finite location".into()));
            }
            convex_hull(locations)?
        }
    };
    let outer =
        if config.extension_distance > 0.0 { extension_polygon(&inner, config.extension_distance, 0.1 * config.max_edge_inner)? } else { inner.clone() };
    let params = refine::RefineParams {
        outer: &outer,
        inner: if config.extension_distance > 0.0 { &inner } else { &outer },
        max_edge_inner: config.max_edge_inner,
        max_edge_outer: config.max_edge_outer,
        min_angle: config.min_angle,
        max_vertices: MAX_MESH_VERTICES,
    };
    let r = refine::refine(&params)?;
    let mut mesh = Mesh { vertices: r.vertices, triangles: r.triangles, boundary_loops: Vec::new() };
    mesh.boundary_loops = mesh.compute_boundary_loops();
    Ok(BuiltMesh { mesh, inner_triangle: r.inner, inner_polygon: inner, outer_polygon: outer })
}

/// Convex hull of `poly` offset by `distance`, with arcs replaced by pieces
/// of a circumscribed 16-gon. Edges shorter than `min_edge` are removed; the
/// offset is enlarged by `min_edge` so the result still clears `distance`.
fn extension_polygon(poly: &[Point], distance: f64, min_edge: f64) -> Result<Vec<Point>> {
    let ring = circumscribed_polygon(distance + min_edge, 16);
    let pts: Vec<Point> = poly.iter().flat_map(|p| ring.iter().map(move |r| [p[0] + r[0], p[1] + r[1]])).collect();
    let mut hull = convex_hull(&pts)?;
    loop {
        let n = hull.len();
        if n <= 8 {
            break;
        }
        let Some(i) = (0..n).find(|&i| dist(hull[i], hull[(i + 1) % n]) < min_edge) else { break };
        // Drop the endpoint with the flatter turn.
        let turn = |k: usize| {
            let (a, b, c) = (hull[(k + n - 1) % n], hull[k], hull[(k + 1) % n]);
            orient(a, b, c).abs() / (dist(a, b) * dist(b, c)).max(f64::MIN_POSITIVE)
        };
        let j = (i + 1) % n;
        hull.remove(if turn(i) <= turn(j) { i } else { j });
    }
    Ok(hull)
}

/// Summary statistics of mesh quality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshQuality {
    pub n_vertices: usize,
    pub n_triangles: usize,
    pub min_angle_deg: f64,
    pub min_edge: f64,
    pub max_edge: f64,
    pub max_edge_inner: Option<f64>,
    pub total_area: f64,
    /// Edge-length histogram: `bin_edges` has one more entry than `counts`.
    pub edge_histogram: Histogram,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bin_edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Mesh {
    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn triangle_points(&self, t: usize) -> [Point; 3] {
        self.triangles[t].map(|v| self.vertices[v])
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle_points(t);
        tri_area(a, b, c)
    }

    pub fn total_area(&self) -> f64 {
        (0..self.n_triangles()).map(|t| self.triangle_area(t)).sum()
    }

    pub fn centroid(&self, t: usize) -> Point {
        let [a, b, c] = self.triangle_points(t);
        [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
    }

    /// Unique undirected edges.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut e: Vec<(usize, usize)> =
            self.triangles.iter().flat_map(|t| (0..3).map(move |k| (t[k].min(t[(k + 1) % 3]), t[k].max(t[(k + 1) % 3])))).collect();
        e.sort_unstable();
        e.dedup();
        e
    }

    fn compute_boundary_loops(&self) -> Vec<Vec<usize>> {
        let mut count: HashMap<(usize, usize), usize> = HashMap::new();
        for t in &self.triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                *count.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        // Directed boundary edges keep triangle orientation (outer loop CCW).
        let mut next: HashMap<usize, usize> = HashMap::new();
        for t in &self.triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                if count[&(a.min(b), a.max(b))] == 1 {
                    next.insert(a, b);
                }
            }
        }
        let mut starts: Vec<usize> = next.keys().copied().collect();
        starts.sort_unstable();
        let mut seen = std::collections::HashSet::new();
        let mut loops = Vec::new();
        for s in starts {
            if seen.contains(&s) {
                continue;
            }
            let mut lp = vec![s];
            seen.insert(s);
            let mut v = next[&s];
            while v != s && !seen.contains(&v) {
                lp.push(v);
                seen.insert(v);
                v = match next.get(&v) {
                    Some(&w) => w,
                    None => break,
                };
            }
            loops.push(lp);
        }
        loops
    }

    /// Check the structural invariants: positive areas, every vertex used,
    /// edges shared by at most two oppositely oriented triangles, and no
    /// vertex lying inside or on the edge interior of a foreign triangle.
    pub fn validate(&self) -> Result<()> {
        let n = self.vertices.len();
        let mut used = vec![false; n];
        for (i, t) in self.triangles.iter().enumerate() {
            if t.iter().any(|&v| v >= n) {
                return Err(Error::InvalidParameter(format!("triangle {i} references a missing vertex")));
            }
            if t[0] == t[1] || t[1] == t[2] || t[0] == t[2] {
                return Err(Error::InvalidParameter(format!("triangle {i} repeats a vertex")));
            }
            let [a, b, c] = self.triangle_points(i);
            if !(orient(a, b, c) > 0.0) {
                return Err(Error::InvalidParameter(format!("triangle {i} has non-positive area")));
            }
            t.iter().for_each(|&v| used[v] = true);
        }
        if let Some(v) = used.iter().position(|u| !u) {
            return Err(Error::InvalidParameter(format!("vertex {v} belongs to no triangle")));
        }
        let mut directed: HashMap<(usize, usize), usize> = HashMap::new();
        for t in &self.triangles {
            for k in 0..3 {
                *directed.entry((t[k], t[(k + 1) % 3])).or_default() += 1;
            }
        }
        if let Some(((a, b), _)) = directed.iter().find(|(_, &c)| c > 1) {
            return Err(Error::InvalidParameter(format!("edge ({a}, {b}) is used twice with the same orientation")));
        }
        let locator = PointLocator::new(self);
        for (v, &p) in self.vertices.iter().enumerate() {
            for t in locator.candidates(p) {
                let tri = self.triangles[t];
                if tri.contains(&v) {
                    continue;
                }
                let [a, b, c] = self.triangle_points(t);
                let (o1, o2, o3) = (orient(a, b, p), orient(b, c, p), orient(c, a, p));
                if o1 >= 0.0 && o2 >= 0.0 && o3 >= 0.0 {
                    return Err(Error::InvalidParameter(format!("vertex {v} lies on or inside triangle {t}")));
                }
            }
        }
        Ok(())
    }

    pub fn quality(&self, inner: Option<&[bool]>) -> MeshQuality {
        let mut min_angle = f64::INFINITY;
        for t in 0..self.n_triangles() {
            let [a, b, c] = self.triangle_points(t);
            min_angle = angles_deg(a, b, c).iter().fold(min_angle, |m, &x| m.min(x));
        }
        let lengths: Vec<f64> = self.edges().iter().map(|&(a, b)| dist(self.vertices[a], self.vertices[b])).collect();
        let min_edge = lengths.iter().copied().fold(f64::INFINITY, f64::min);
        let max_edge = lengths.iter().copied().fold(0.0, f64::max);
        let max_edge_inner = inner.map(|flags| {
            self.triangles
                .iter()
                .zip(flags)
                .filter(|(_, &f)| f)
                .flat_map(|(t, _)| (0..3).map(move |k| (t[k], t[(k + 1) % 3])))
                .map(|(a, b)| dist(self.vertices[a], self.vertices[b]))
                .fold(0.0, f64::max)
        });
        let n_bins = 20;
        let lo = if min_edge.is_finite() { min_edge } else { 0.0 };
        let width = ((max_edge - lo) / n_bins as f64).max(f64::MIN_POSITIVE);
        let bin_edges: Vec<f64> = (0..=n_bins).map(|i| lo + i as f64 * width).collect();
        let mut counts = vec![0; n_bins];
        for &l in &lengths {
            let b = (((l - lo) / width) as usize).min(n_bins - 1);
            counts[b] += 1;
        }
        MeshQuality {
            n_vertices: self.n_vertices(),
            n_triangles: self.n_triangles(),
            min_angle_deg: min_angle,
            min_edge,
            max_edge,
            max_edge_inner,
            total_area: self.total_area(),
            edge_histogram: Histogram { bin_edges, counts },
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    /// Parse and validate the JSON mesh format.
    pub fn from_json(s: &str) -> Result<Self> {
        let mut m: Mesh = serde_json::from_str(s)?;
        m.validate()?;
        if m.boundary_loops.is_empty() {
            m.boundary_loops = m.compute_boundary_loops();
        }
        Ok(m)
    }

    /// Vertices not on any boundary loop.
    pub fn interior_vertices(&self) -> Vec<bool> {
        let mut interior = vec![true; self.n_vertices()];
        for lp in &self.boundary_loops {
            for &v in lp {
                interior[v] = false;
            }
        }
        interior
    }

    /// Distance from each vertex to the mesh boundary.
    pub fn boundary_distance(&self) -> Vec<f64> {
        let segs: Vec<(Point, Point)> = self
            .boundary_loops
            .iter()
            .flat_map(|lp| (0..lp.len()).map(move |i| (lp[i], lp[(i + 1) % lp.len()])))
            .map(|(a, b)| (self.vertices[a], self.vertices[b]))
            .collect();
        self.vertices.iter().map(|&p| segs.iter().map(|&(a, b)| geometry::point_segment_distance(p, a, b)).fold(f64::INFINITY, f64::min)).collect()
    }
}
