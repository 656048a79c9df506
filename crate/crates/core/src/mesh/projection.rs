use super::geometry::{clip_convex, normalize_polygon, polygon_area, polygon_moments, Point};
use super::Mesh;
use crate::error::{Error, Result};
use crate::sparse::{SparseMatrix, SparseVector};
use serde::Serialize;

/// Barycentric coordinates below this count as zero when testing containment.
pub const INSIDE_TOLERANCE: f64 = 1e-10;

/// Bucket grid over triangle bounding boxes.
#[derive(Debug, Clone)]
pub struct PointLocator {
    lo: Point,
    cell: f64,
    nx: usize,
    ny: usize,
    buckets: Vec<Vec<usize>>,
}

impl PointLocator {
    pub fn new(mesh: &Mesh) -> Self {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for p in &mesh.vertices {
            for d in 0..2 {
                lo[d] = lo[d].min(p[d]);
                hi[d] = hi[d].max(p[d]);
            }
        }
        if mesh.vertices.is_empty() {
            lo = [0.0; 2];
            hi = [1.0; 2];
        }
        let span = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(f64::MIN_POSITIVE);
        let k = ((mesh.n_triangles() as f64).sqrt().ceil() as usize).clamp(1, 1024);
        let cell = span / k as f64 * (1.0 + 1e-9);
        let nx = (((hi[0] - lo[0]) / cell) as usize + 1).min(k + 1);
        let ny = (((hi[1] - lo[1]) / cell) as usize + 1).min(k + 1);
        let mut loc = PointLocator { lo, cell, nx, ny, buckets: vec![Vec::new(); nx * ny] };
        for t in 0..mesh.n_triangles() {
            let pts = mesh.triangle_points(t);
            let (x0, y0) = loc.cell_of(pts.iter().fold([f64::INFINITY; 2], |m, p| [m[0].min(p[0]), m[1].min(p[1])]));
            let (x1, y1) = loc.cell_of(pts.iter().fold([f64::NEG_INFINITY; 2], |m, p| [m[0].max(p[0]), m[1].max(p[1])]));
            for y in y0..=y1 {
                for x in x0..=x1 {
                    loc.buckets[y * nx + x].push(t);
                }
            }
        }
        loc
    }

    fn cell_of(&self, p: Point) -> (usize, usize) {
        let f = |v: f64, lo: f64, n: usize| (((v - lo) / self.cell).floor().max(0.0) as usize).min(n - 1);
        (f(p[0], self.lo[0], self.nx), f(p[1], self.lo[1], self.ny))
    }

    /// Triangles whose bounding-box cells cover `p` (with a one-cell halo).
    pub fn candidates(&self, p: Point) -> Vec<usize> {
        if !p[0].is_finite() || !p[1].is_finite() {
            return Vec::new();
        }
        let (cx, cy) = self.cell_of(p);
        let mut out = Vec::new();
        for y in cy.saturating_sub(1)..=(cy + 1).min(self.ny - 1) {
            for x in cx.saturating_sub(1)..=(cx + 1).min(self.nx - 1) {
                out.extend_from_slice(&self.buckets[y * self.nx + x]);
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Triangles whose cells intersect the box `[lo, hi]`.
    pub fn candidates_in_box(&self, lo: Point, hi: Point) -> Vec<usize> {
        let (x0, y0) = self.cell_of(lo);
        let (x1, y1) = self.cell_of(hi);
        let mut out = Vec::new();
        for y in y0..=y1 {
            for x in x0..=x1 {
                out.extend_from_slice(&self.buckets[y * self.nx + x]);
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Containing triangle and barycentric weights, ties broken by the
    /// smallest sorted vertex triple.
    pub fn locate(&self, mesh: &Mesh, p: Point) -> Option<(usize, [f64; 3])> {
        let mut best: Option<([usize; 3], usize, [f64; 3])> = None;
        for t in self.candidates(p) {
            let Some(w) = barycentric(mesh.triangle_points(t), p) else { continue };
            if w.iter().all(|&x| x >= -INSIDE_TOLERANCE) {
                let mut key = mesh.triangles[t];
                key.sort_unstable();
                if best.as_ref().is_none_or(|b| key < b.0) {
                    best = Some((key, t, w));
                }
            }
        }
        best.map(|(_, t, w)| (t, w))
    }
}

fn barycentric([a, b, c]: [Point; 3], p: Point) -> Option<[f64; 3]> {
    let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
    if det == 0.0 {
        return None;
    }
    let wb = ((p[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (p[1] - a[1])) / det;
    let wc = ((b[0] - a[0]) * (p[1] - a[1]) - (p[0] - a[0]) * (b[1] - a[1])) / det;
    Some([1.0 - wb - wc, wb, wc])
}

/// Observation matrix mapping mesh coefficients to point values.
#[derive(Debug, Clone, Serialize)]
pub struct ProjectionMatrix {
    pub matrix: SparseMatrix,
    /// Locations that fell outside the mesh (their rows are zero).
    pub outside: Vec<bool>,
}

impl ProjectionMatrix {
    pub fn n_outside(&self) -> usize {
        self.outside.iter().filter(|&&o| o).count()
    }
}

pub fn projection_matrix(mesh: &Mesh, locations: &[Point]) -> ProjectionMatrix {
    let locator = PointLocator::new(mesh);
    let mut trip = Vec::with_capacity(3 * locations.len());
    let mut outside = vec![false; locations.len()];
    for (k, &p) in locations.iter().enumerate() {
        let Some((t, w)) = locator.locate(mesh, p) else {
            outside[k] = true;
            continue;
        };
        let tri = mesh.triangles[t];
        if let Some(j) = tri.iter().position(|&v| mesh.vertices[v] == p) {
            trip.push((k, tri[j], 1.0));
            continue;
        }
        let mut w = w.map(|x| if x < 1e-14 { 0.0 } else { x });
        let s: f64 = w.iter().sum();
        w.iter_mut().for_each(|x| *x /= s);
        for i in 0..3 {
            if w[i] > 0.0 {
                trip.push((k, tri[i], w[i]));
            }
        }
    }
    ProjectionMatrix { matrix: SparseMatrix::from_triplets(locations.len(), mesh.n_vertices(), &trip), outside }
}

/// Row `r` with `r_j = ∫_region φ_j / area(region)`, exact for piecewise
/// linear basis functions.
pub fn areal_integration_row(mesh: &Mesh, region: &[Point]) -> Result<SparseVector> {
    let region = normalize_polygon(region)?;
    let area = polygon_area(&region);
    let lo = region.iter().fold([f64::INFINITY; 2], |m, p| [m[0].min(p[0]), m[1].min(p[1])]);
    let hi = region.iter().fold([f64::NEG_INFINITY; 2], |m, p| [m[0].max(p[0]), m[1].max(p[1])]);
    let locator = PointLocator::new(mesh);
    let mut entries = Vec::new();
    let mut covered = 0.0;
    for t in locator.candidates_in_box(lo, hi) {
        let pts = mesh.triangle_points(t);
        let tlo = pts.iter().fold([f64::INFINITY; 2], |m, p| [m[0].min(p[0]), m[1].min(p[1])]);
        let thi = pts.iter().fold([f64::NEG_INFINITY; 2], |m, p| [m[0].max(p[0]), m[1].max(p[1])]);
        if thi[0] < lo[0] || tlo[0] > hi[0] || thi[1] < lo[1] || tlo[1] > hi[1] {
            continue;
        }
        let piece = clip_convex(&region, &pts);
        let (a, centroid) = polygon_moments(&piece);
        if a <= 0.0 {
            continue;
        }
        covered += a;
        let Some(w) = barycentric(pts, centroid) else { continue };
        for (i, wi) in w.iter().enumerate() {
            entries.push((mesh.triangles[t][i], a * wi / area));
        }
    }
    if covered <= area * 1e-14 {
        return Err(Error::EmptyIntersection);
    }
    Ok(SparseVector::new(mesh.n_vertices(), entries))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_triangles() -> Mesh {
        Mesh { vertices: vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]], triangles: vec![[0, 1, 2], [0, 2, 3]], boundary_loops: vec![vec![0, 1, 2, 3]] }
    }

    #[test]
    fn vertex_location_gives_unit_entry() {
        let m = two_triangles();
        let a = projection_matrix(&m, &[[1.0, 1.0]]);
        assert_eq!(a.matrix.row(0), (&[2usize][..], &[1.0][..]));
    }

    #[test]
    fn centroid_and_midpoint() {
        let m = two_triangles();
        let a = projection_matrix(&m, &[[2.0 / 3.0, 1.0 / 3.0], [0.5, 0.0], [0.5, 0.5]]);
        let (c, v) = a.matrix.row(0);
        assert_eq!(c, &[0, 1, 2]);
        assert!(v.iter().all(|x| (x - 1.0 / 3.0).abs() < 1e-15));
        assert_eq!(a.matrix.row(1), (&[0usize, 1][..], &[0.5, 0.5][..]));
        // Diagonal point: both triangles contain it; the smaller triple wins.
        assert_eq!(a.matrix.row(2).0, &[0, 2]);
    }

    #[test]
    fn outside_is_flagged() {
        let m = two_triangles();
        let a = projection_matrix(&m, &[[2.0, 2.0], [0.2, 0.1]]);
        assert_eq!(a.outside, vec![true, false]);
        assert_eq!(a.matrix.row(0).0.len(), 0);
    }

    #[test]
    fn whole_triangle_region() {
        let m = two_triangles();
        let r = areal_integration_row(&m, &[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0]]).unwrap();
        assert_eq!(r.indices, vec![0, 1, 2]);
        assert!(r.values.iter().all(|x| (x - 1.0 / 3.0).abs() < 1e-14));
    }

    #[test]
    fn disjoint_region_is_empty() {
        let m = two_triangles();
        let r = areal_integration_row(&m, &[[3.0, 3.0], [4.0, 3.0], [4.0, 4.0]]);
        assert!(matches!(r, Err(Error::EmptyIntersection)));
    }
}
