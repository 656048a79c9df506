//! Incremental Delaunay triangulation (Bowyer–Watson) with Ruppert-style
//! refinement.
//!
//! Boundary segments are kept as Delaunay edges by splitting any segment
//! whose diametral circle contains a vertex (conforming Delaunay). Poor
//! triangles inside the domain, either too large for their zone or with an
//! angle below the threshold, are removed by inserting their circumcenter;
//! if that circumcenter encroaches a segment, the segment is split instead.

use super::geometry::{self, circumcenter, dist, in_circle, min_angle_deg, orient, point_in_polygon, Point};
use crate::error::{Error, Result};
use std::collections::{HashSet, VecDeque};

const NONE: usize = usize::MAX;

#[derive(Debug, Clone, Copy)]
struct Tri {
    v: [usize; 3],
    /// `n[i]` is the neighbour across the edge opposite `v[i]`.
    n: [usize; 3],
    alive: bool,
}

pub(crate) struct RefineParams<'a> {
    pub outer: &'a [Point],
    pub inner: &'a [Point],
    pub max_edge_inner: f64,
    pub max_edge_outer: f64,
    pub min_angle: f64,
    pub max_vertices: usize,
}

pub(crate) struct Triangulation {
    pts: Vec<Point>,
    tris: Vec<Tri>,
    free: Vec<usize>,
    vert_tri: Vec<usize>,
    last: usize,
    segments: HashSet<(usize, usize)>,
}

fn key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

enum Located {
    Inside(usize),
    Vertex(usize),
}

impl Triangulation {
    /// Start with a large triangle enclosing `bbox` (min, max).
    fn new(lo: Point, hi: Point) -> Self {
        let cx = 0.5 * (lo[0] + hi[0]);
        let cy = 0.5 * (lo[1] + hi[1]);
        let span = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1e-300);
        let r = 1e3 * span;
        let pts = vec![[cx - 2.0 * r, cy - r], [cx + 2.0 * r, cy - r], [cx, cy + 2.0 * r]];
        let tris = vec![Tri { v: [0, 1, 2], n: [NONE; 3], alive: true }];
        Triangulation { pts, tris, free: Vec::new(), vert_tri: vec![0, 0, 0], last: 0, segments: HashSet::new() }
    }

    fn is_super(&self, v: usize) -> bool {
        v < 3
    }

    fn locate(&mut self, p: Point) -> Located {
        let mut t = if self.tris[self.last].alive { self.last } else { self.tris.iter().position(|t| t.alive).expect("triangulation is never empty") };
        let mut start = 0usize;
        let mut steps = 0usize;
        'walk: loop {
            steps += 1;
            if steps > 4 * self.tris.len() + 16 {
                // Fall back to a linear scan (cannot happen with exact predicates,
                // kept to bound the loop).
                for (i, tri) in self.tris.iter().enumerate() {
                    if tri.alive && (0..3).all(|k| orient(self.pts[tri.v[(k + 1) % 3]], self.pts[tri.v[(k + 2) % 3]], p) >= 0.0) {
                        t = i;
                        break;
                    }
                }
                break;
            }
            let tri = self.tris[t];
            for e in 0..3 {
                let k = (start + e) % 3;
                let a = self.pts[tri.v[(k + 1) % 3]];
                let b = self.pts[tri.v[(k + 2) % 3]];
                if orient(a, b, p) < 0.0 && tri.n[k] != NONE {
                    t = tri.n[k];
                    start = (start + 1) % 3;
                    continue 'walk;
                }
            }
            break;
        }
        self.last = t;
        for &v in &self.tris[t].v {
            if self.pts[v] == p {
                return Located::Vertex(v);
            }
        }
        Located::Inside(t)
    }

    fn alloc(&mut self, tri: Tri) -> usize {
        if let Some(i) = self.free.pop() {
            self.tris[i] = tri;
            i
        } else {
            self.tris.push(tri);
            self.tris.len() - 1
        }
    }

    /// Insert a point. Returns the vertex index, the new triangles and the
    /// segments that disappeared from the triangulation.
    fn insert(&mut self, p: Point) -> (usize, Vec<usize>, Vec<(usize, usize)>) {
        let t0 = match self.locate(p) {
            Located::Vertex(v) => return (v, Vec::new(), Vec::new()),
            Located::Inside(t) => t,
        };
        let vid = self.pts.len();
        self.pts.push(p);
        self.vert_tri.push(NONE);

        let mut cavity = vec![t0];
        let mut in_cavity: HashSet<usize> = HashSet::from([t0]);
        let mut i = 0;
        while i < cavity.len() {
            let tri = self.tris[cavity[i]];
            for &nb in &tri.n {
                if nb != NONE && !in_cavity.contains(&nb) {
                    let nt = self.tris[nb];
                    if in_circle(self.pts[nt.v[0]], self.pts[nt.v[1]], self.pts[nt.v[2]], p) > 0.0 {
                        in_cavity.insert(nb);
                        cavity.push(nb);
                    }
                }
            }
            i += 1;
        }

        // Boundary edges (a, b, outside neighbour) in the cavity's CCW order.
        let mut boundary = Vec::new();
        let mut lost = Vec::new();
        for &t in &cavity {
            let tri = self.tris[t];
            for k in 0..3 {
                let (a, b) = (tri.v[(k + 1) % 3], tri.v[(k + 2) % 3]);
                let nb = tri.n[k];
                if nb == NONE || !in_cavity.contains(&nb) {
                    boundary.push((a, b, nb, t));
                } else if a < b && self.segments.contains(&(a, b)) {
                    lost.push((a, b));
                }
            }
        }
        for &t in &cavity {
            self.tris[t].alive = false;
        }
        let mut new_tris = Vec::with_capacity(boundary.len());
        let mut by_start = std::collections::HashMap::with_capacity(boundary.len());
        for &(a, b, nb, old) in &boundary {
            let id = self.alloc(Tri { v: [a, b, vid], n: [NONE, NONE, nb], alive: true });
            if nb != NONE {
                let slot = self.tris[nb].n.iter().position(|&x| x == old).expect("neighbour link");
                self.tris[nb].n[slot] = id;
            }
            by_start.insert(a, id);
            new_tris.push(id);
        }
        for &id in &new_tris {
            let [a, b, _] = self.tris[id].v;
            // Edge (b, p) is opposite a: shared with the triangle starting at b.
            let next = by_start[&b];
            self.tris[id].n[0] = next;
            self.tris[next].n[1] = id;
            self.vert_tri[a] = id;
            self.vert_tri[b] = id;
        }
        // Released only now so neighbour fix-ups above never see a reused slot.
        self.free.extend_from_slice(&cavity);
        self.vert_tri[vid] = new_tris[0];
        self.last = new_tris[0];
        (vid, new_tris, lost)
    }

    fn edge_exists(&self, a: usize, b: usize) -> Option<(usize, usize)> {
        // Rotate around `a` in both directions.
        let start = self.vert_tri[a];
        if start == NONE || !self.tris[start].alive {
            return self.tris.iter().enumerate().find_map(|(i, t)| if t.alive && t.v.contains(&a) && t.v.contains(&b) { Some((i, NONE)) } else { None });
        }
        for dir in [1usize, 2] {
            let mut t = start;
            loop {
                let tri = &self.tris[t];
                if tri.v.contains(&b) {
                    return Some((t, NONE));
                }
                let k = tri.v.iter().position(|&v| v == a).expect("vertex in its star");
                let nb = tri.n[(k + dir) % 3];
                if nb == NONE || nb == start {
                    break;
                }
                t = nb;
            }
        }
        None
    }

    /// Apex vertices of the triangles adjacent to edge (a, b).
    fn apexes(&self, a: usize, b: usize) -> Vec<usize> {
        let mut out = Vec::new();
        if let Some((t, _)) = self.edge_exists(a, b) {
            let tri = self.tris[t];
            let k = (0..3).find(|&k| tri.v[k] != a && tri.v[k] != b).unwrap();
            out.push(tri.v[k]);
            let nb = tri.n[k];
            if nb != NONE {
                let nt = self.tris[nb];
                out.extend(nt.v.iter().copied().filter(|&v| v != a && v != b));
            }
        }
        out
    }

    fn encroached(&self, a: usize, b: usize) -> bool {
        if self.edge_exists(a, b).is_none() {
            return true;
        }
        let (pa, pb) = (self.pts[a], self.pts[b]);
        self.apexes(a, b).into_iter().any(|v| !self.is_super(v) && diametral_contains(pa, pb, self.pts[v]))
    }
}

fn diametral_contains(a: Point, b: Point, p: Point) -> bool {
    (p[0] - a[0]) * (p[0] - b[0]) + (p[1] - a[1]) * (p[1] - b[1]) < 0.0
}

pub(crate) struct RefinedMesh {
    pub vertices: Vec<Point>,
    pub triangles: Vec<[usize; 3]>,
    pub inner: Vec<bool>,
}

/// Bookkeeping that ties split vertices back to the input polygon edges.
struct InputGraph {
    /// Input edges as vertex pairs.
    edges: Vec<(usize, usize)>,
    /// For each vertex: the input edges it lies on.
    on: Vec<Vec<usize>>,
    /// Parent input edge of each subsegment.
    parent: std::collections::HashMap<(usize, usize), usize>,
}

impl InputGraph {
    fn is_input_vertex(&self, v: usize) -> bool {
        self.on.get(v).is_some_and(|s| s.len() > 1 || s.first().is_some_and(|&e| self.edges[e].0 == v || self.edges[e].1 == v))
    }

    fn touch(&mut self, v: usize, e: usize) {
        if self.on.len() <= v {
            self.on.resize(v + 1, Vec::new());
        }
        if !self.on[v].contains(&e) {
            self.on[v].push(e);
        }
    }

    /// Input vertex shared by two distinct input edges through `p` and `q`.
    fn common_corner(&self, p: usize, q: usize) -> Option<usize> {
        let (sp, sq) = (self.on.get(p)?, self.on.get(q)?);
        for &a in sp {
            for &b in sq {
                if a == b {
                    continue;
                }
                let (ea, eb) = (self.edges[a], self.edges[b]);
                for c in [ea.0, ea.1] {
                    if c == eb.0 || c == eb.1 {
                        return Some(c);
                    }
                }
            }
        }
        None
    }
}

/// Split position for subsegment (a, b): midpoint, or on a power-of-two
/// shell around an input endpoint so that splits near a sharp corner line up.
fn split_point(dt: &Triangulation, g: &InputGraph, a: usize, b: usize) -> Point {
    let (pa, pb) = (dt.pts[a], dt.pts[b]);
    let len = dist(pa, pb);
    let (ia, ib) = (g.is_input_vertex(a), g.is_input_vertex(b));
    let (from, to) = match (ia, ib) {
        (true, false) => (pa, pb),
        (false, true) => (pb, pa),
        _ => return [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])],
    };
    let d = 2f64.powf((2.0 * len / 3.0).log2().floor());
    let t = d / len;
    [from[0] + t * (to[0] - from[0]), from[1] + t * (to[1] - from[1])]
}

pub(crate) fn refine(params: &RefineParams) -> Result<RefinedMesh> {
    let all: Vec<Point> = params.outer.iter().chain(params.inner).copied().collect();
    let lo = all.iter().fold([f64::INFINITY; 2], |m, p| [m[0].min(p[0]), m[1].min(p[1])]);
    let hi = all.iter().fold([f64::NEG_INFINITY; 2], |m, p| [m[0].max(p[0]), m[1].max(p[1])]);
    let mut dt = Triangulation::new(lo, hi);
    let mut graph = InputGraph { edges: Vec::new(), on: Vec::new(), parent: Default::default() };

    let mut seg_queue: VecDeque<(usize, usize)> = VecDeque::new();
    let mut add_loop = |dt: &mut Triangulation, graph: &mut InputGraph, poly: &[Point]| {
        let ids: Vec<usize> = poly.iter().map(|&p| dt.insert(p).0).collect();
        for i in 0..ids.len() {
            let (a, b) = (ids[i], ids[(i + 1) % ids.len()]);
            if a != b && dt.segments.insert(key(a, b)) {
                let e = graph.edges.len();
                graph.edges.push((a, b));
                graph.parent.insert(key(a, b), e);
                graph.touch(a, e);
                graph.touch(b, e);
                seg_queue.push_back(key(a, b));
            }
        }
    };
    add_loop(&mut dt, &mut graph, params.outer);
    if params.inner.as_ptr() != params.outer.as_ptr() {
        add_loop(&mut dt, &mut graph, params.inner);
    }

    // Generous cap scaled to the expected size, so pathological inputs stop early.
    let domain_area = geometry::polygon_area(params.outer).abs();
    let expected = 4.0 * domain_area / (params.max_edge_inner * params.max_edge_inner) + 64.0 * dt.pts.len() as f64;
    let vertex_cap = params.max_vertices.min((50.0 * expected).min(usize::MAX as f64 / 2.0) as usize + 1000);

    let in_domain = |dt: &Triangulation, t: &Tri| {
        if t.v.iter().any(|&v| dt.is_super(v)) {
            return false;
        }
        let [a, b, c] = t.v.map(|v| dt.pts[v]);
        let cen = [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0];
        point_in_polygon(cen, params.outer)
    };
    let zone_limit = |dt: &Triangulation, t: &Tri| {
        let [a, b, c] = t.v.map(|v| dt.pts[v]);
        let cen = [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0];
        if point_in_polygon(cen, params.inner) {
            params.max_edge_inner
        } else {
            params.max_edge_outer
        }
    };
    let is_bad = |dt: &Triangulation, g: &InputGraph, t: &Tri| -> bool {
        let [a, b, c] = t.v.map(|v| dt.pts[v]);
        let longest = dist(a, b).max(dist(b, c)).max(dist(c, a));
        if longest > zone_limit(dt, t) {
            return true;
        }
        if min_angle_deg(a, b, c) >= params.min_angle {
            return false;
        }
        // A skinny triangle whose shortest edge joins equal shells of a sharp
        // input corner cannot be improved; leave it.
        let lens = [dist(b, c), dist(c, a), dist(a, b)];
        let k = (0..3).min_by(|&i, &j| lens[i].total_cmp(&lens[j])).unwrap();
        let (p, q) = (t.v[(k + 1) % 3], t.v[(k + 2) % 3]);
        match g.common_corner(p, q) {
            Some(corner) => {
                let (dp, dq) = (dist(dt.pts[corner], dt.pts[p]), dist(dt.pts[corner], dt.pts[q]));
                (dp - dq).abs() > 1e-9 * dp.max(dq)
            }
            None => true,
        }
    };

    let mut tri_queue: VecDeque<usize> = (0..dt.tris.len()).collect();
    let mut unrefinable: HashSet<[usize; 3]> = HashSet::new();

    let split =
        |dt: &mut Triangulation, graph: &mut InputGraph, s: (usize, usize), seg_queue: &mut VecDeque<(usize, usize)>, tri_queue: &mut VecDeque<usize>| {
            let mid = split_point(dt, graph, s.0, s.1);
            dt.segments.remove(&s);
            let parent = graph.parent.remove(&s).expect("subsegment has a parent");
            let (m, new_tris, lost) = dt.insert(mid);
            graph.touch(m, parent);
            for s2 in [key(s.0, m), key(m, s.1)] {
                dt.segments.insert(s2);
                graph.parent.insert(s2, parent);
                seg_queue.push_back(s2);
            }
            enqueue_after_insert(dt, &new_tris, &lost, seg_queue, tri_queue);
        };

    loop {
        if dt.pts.len() > vertex_cap {
            return Err(Error::RefinementLimit(vertex_cap));
        }
        if let Some((a, b)) = seg_queue.pop_front() {
            if !dt.segments.contains(&(a, b)) || !dt.encroached(a, b) {
                continue;
            }
            split(&mut dt, &mut graph, (a, b), &mut seg_queue, &mut tri_queue);
            continue;
        }
        let Some(t) = tri_queue.pop_front() else { break };
        let tri = dt.tris[t];
        if !tri.alive || !in_domain(&dt, &tri) || !is_bad(&dt, &graph, &tri) {
            continue;
        }
        let mut sorted = tri.v;
        sorted.sort_unstable();
        if unrefinable.contains(&sorted) {
            continue;
        }
        let [a, b, c] = tri.v.map(|v| dt.pts[v]);
        let cc = circumcenter(a, b, c);
        if !cc[0].is_finite() || !cc[1].is_finite() {
            unrefinable.insert(sorted);
            continue;
        }
        let mut hits: Vec<(usize, usize)> = dt.segments.iter().copied().filter(|&(s0, s1)| diametral_contains(dt.pts[s0], dt.pts[s1], cc)).collect();
        if !hits.is_empty() {
            hits.sort_unstable();
            for s in hits {
                if dt.segments.contains(&s) {
                    split(&mut dt, &mut graph, s, &mut seg_queue, &mut tri_queue);
                }
            }
            tri_queue.push_back(t);
            continue;
        }
        if !point_in_polygon(cc, params.outer) {
            unrefinable.insert(sorted);
            continue;
        }
        let (_, new_tris, lost) = dt.insert(cc);
        enqueue_after_insert(&dt, &new_tris, &lost, &mut seg_queue, &mut tri_queue);
    }

    // Collect domain triangles and reindex vertices.
    let mut remap = vec![NONE; dt.pts.len()];
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    let mut inner = Vec::new();
    let mut live: Vec<&Tri> = dt.tris.iter().filter(|t| t.alive && in_domain(&dt, t)).collect();
    live.sort_by_key(|t| {
        let mut s = t.v;
        s.sort_unstable();
        s
    });
    for t in live {
        let ids = t.v.map(|v| {
            if remap[v] == NONE {
                remap[v] = vertices.len();
                vertices.push(dt.pts[v]);
            }
            remap[v]
        });
        let [a, b, c] = t.v.map(|v| dt.pts[v]);
        let cen = [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0];
        inner.push(point_in_polygon(cen, params.inner));
        triangles.push(ids);
    }
    Ok(RefinedMesh { vertices, triangles, inner })
}

fn enqueue_after_insert(
    dt: &Triangulation,
    new_tris: &[usize],
    lost: &[(usize, usize)],
    seg_queue: &mut VecDeque<(usize, usize)>,
    tri_queue: &mut VecDeque<usize>,
) {
    for &(a, b) in lost {
        if dt.segments.contains(&(a, b)) {
            seg_queue.push_back((a, b));
        }
    }
    for &t in new_tris {
        tri_queue.push_back(t);
        let tri = dt.tris[t];
        for k in 0..3 {
            let s = key(tri.v[(k + 1) % 3], tri.v[(k + 2) % 3]);
            if dt.segments.contains(&s) {
                seg_queue.push_back(s);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::geometry::tri_area;

    #[test]
    fn delaunay_of_square_has_two_triangles() {
        let sq = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        let r = refine(&RefineParams { outer: &sq, inner: &sq, max_edge_inner: 2.0, max_edge_outer: 2.0, min_angle: 21.0, max_vertices: 1000 }).unwrap();
        assert_eq!(r.triangles.len(), 2);
        assert_eq!(r.vertices.len(), 4);
        for t in &r.triangles {
            assert!(tri_area(r.vertices[t[0]], r.vertices[t[1]], r.vertices[t[2]]) > 0.0);
        }
    }

    #[test]
    fn refined_square_respects_limits() {
        let sq = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        let r = refine(&RefineParams { outer: &sq, inner: &sq, max_edge_inner: 0.2, max_edge_outer: 0.2, min_angle: 25.0, max_vertices: 100_000 }).unwrap();
        let total: f64 = r.triangles.iter().map(|t| tri_area(r.vertices[t[0]], r.vertices[t[1]], r.vertices[t[2]])).sum();
        assert!((total - 1.0).abs() < 1e-12);
        for t in &r.triangles {
            let [a, b, c] = t.map(|v| r.vertices[v]);
            assert!(dist(a, b).max(dist(b, c)).max(dist(a, c)) <= 0.2);
            assert!(min_angle_deg(a, b, c) >= 25.0);
        }
    }
}
