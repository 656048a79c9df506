use gfield::fem::{
    assemble_mass, assemble_precision, assemble_stiffness, assess_correlation, barrier_precision_matrix, simulate_nig_draws, AssessOptions, BarrierSpec,
    FemMatrices, MaternParams, SpdeParams,
};
use gfield::gmrf::{factorize, PrecisionModel};
use gfield::mesh::{build_mesh, build_mesh_zoned, Mesh, MeshConfig};
use gfield::sparse::{read_matrix_market, write_matrix_market, SparseMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn square_mesh(side: f64, h: f64, ext: f64) -> Mesh {
    let sq = [[0.0, 0.0], [side, 0.0], [side, side], [0.0, side]];
    let cfg = MeshConfig { max_edge_inner: h, max_edge_outer: 1.0, extension_distance: ext, min_angle: 21.0 };
    build_mesh_zoned(&sq, None, &cfg).unwrap().mesh
}

/// Regular equilateral triangulation of roughly `[x0, x0 + len]²`.
fn equilateral_mesh(x0: f64, len: f64, h: f64) -> Mesh {
    let dy = h * 3f64.sqrt() / 2.0;
    let (nx, ny) = ((len / h) as usize + 1, (len / dy) as usize + 1);
    let mut vertices = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            let off = if j % 2 == 1 { h / 2.0 } else { 0.0 };
            vertices.push([x0 + i as f64 * h + off, x0 + j as f64 * dy]);
        }
    }
    let id = |i: usize, j: usize| j * nx + i;
    let mut triangles = Vec::new();
    for j in 0..ny - 1 {
        for i in 0..nx - 1 {
            if j % 2 == 0 {
                triangles.push([id(i, j), id(i + 1, j), id(i, j + 1)]);
                triangles.push([id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)]);
            } else {
                triangles.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
                triangles.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
            }
        }
    }
    Mesh { vertices, triangles, boundary_loops: vec![] }
}

fn nearest(m: &Mesh, p: [f64; 2]) -> usize {
    let d = |v: usize| (m.vertices[v][0] - p[0]).hypot(m.vertices[v][1] - p[1]);
    (0..m.n_vertices()).min_by(|&a, &b| d(a).total_cmp(&d(b))).unwrap()
}

fn correlation(q: SparseMatrix, i: usize, j: usize) -> f64 {
    let g = factorize(&PrecisionModel::new(q, "test").unwrap()).unwrap();
    let ci = g.covariance_column(i);
    let cj = g.covariance_column(j);
    ci[j] / (ci[i] * cj[j]).sqrt()
}

#[test]
fn correlation_error_shrinks_with_mesh_size() {
    let p = MaternParams::new(2.0, 1.0, 1.0).unwrap();
    let opts = AssessOptions { d_min: 0.4, d_max: 4.0, n_bins: 12, max_refs: 40, region: Some([0.0, 0.0, 10.0, 10.0]) };
    let coarse = assess_correlation(&square_mesh(10.0, 0.4, 4.0), &p, &opts).unwrap();
    let fine = assess_correlation(&square_mesh(10.0, 0.2, 4.0), &p, &opts).unwrap();
    assert!(fine.max_abs_error <= 0.05, "{}", fine.max_abs_error);
    assert!(fine.max_abs_error < 0.6 * coarse.max_abs_error);
    // Beyond the first few edge lengths the coarse mesh is already accurate.
    for b in coarse.bins.iter().filter(|b| b.d_lo >= 1.0) {
        assert!(b.max_abs_error <= 0.05, "{b:?}");
    }
}

#[test]
fn equilateral_nearest_neighbour_correlation() {
    // Lumped-mass P1 discretisation computed independently with scipy on the
    // same triangulation: correlation error at the nearest neighbour.
    let m = equilateral_mesh(-4.0, 18.0, 0.4);
    let p = MaternParams::new(2.0, 1.0, 1.0).unwrap().to_spde().unwrap();
    let q = assemble_precision(&m, &p, None, None).unwrap().q;
    let c = nearest(&m, [5.0, 5.0]);
    let j = nearest(&m, [m.vertices[c][0] + 0.4, m.vertices[c][1]]);
    let exact = gfield::fem::matern_correlation(0.4, 2.0, 1.0);
    assert!((correlation(q, c, j) - exact - (-0.06558367640)).abs() < 1e-8);
}

#[test]
fn alpha_two_identity_on_random_meshes() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..3 {
        let pts: Vec<[f64; 2]> = (0..30).map(|_| [rng.random_range(0.0..5.0), rng.random_range(0.0..3.0)]).collect();
        let m = build_mesh(&pts, None, &MeshConfig::with_max_edge(0.6, 1.0)).unwrap();
        let (kappa, tau) = (rng.random_range(0.5..3.0), rng.random_range(0.2..2.0));
        let fem = FemMatrices::new(&m, None).unwrap();
        let q = fem.stationary(&SpdeParams::new(kappa, tau, 2).unwrap()).unwrap();
        let cinv: Vec<f64> = fem.c.iter().map(|c| 1.0 / c).collect();
        let g2 = fem.g.mul_diag(Some(&cinv), &fem.g).unwrap();
        let k4 = kappa.powi(4);
        let closed = SparseMatrix::diagonal(&fem.c).add_scaled(k4, &fem.g, 2.0 * kappa * kappa).unwrap().add_scaled(1.0, &g2, 1.0).unwrap().scale(tau * tau);
        assert!(q.max_abs_diff(&closed) <= 1e-10 * closed.max_abs());
    }
}

#[test]
fn mass_and_stiffness_invariants() {
    let m = square_mesh(3.0, 0.5, 1.0);
    let c = assemble_mass(&m);
    assert!((c.values().iter().sum::<f64>() - m.total_area()).abs() < 1e-10);
    let g = assemble_stiffness(&m, None).unwrap();
    for r in g.matvec(&vec![1.0; m.n_vertices()]) {
        assert!(r.abs() < 1e-12);
    }
    assert!(g.is_symmetric());
}

#[test]
fn tau_scales_and_kappa_keeps_pattern() {
    let m = square_mesh(3.0, 0.5, 1.0);
    let fem = FemMatrices::new(&m, None).unwrap();
    for alpha in 1..=4 {
        let a = fem.stationary(&SpdeParams::new(1.2, 0.7, alpha).unwrap()).unwrap();
        let b = fem.stationary(&SpdeParams::new(1.2, 1.4, alpha).unwrap()).unwrap();
        assert!(b.max_abs_diff(&a.scale(4.0)) <= 1e-12 * b.max_abs());
        let c = fem.stationary(&SpdeParams::new(4.5, 0.7, alpha).unwrap()).unwrap();
        assert!(a.same_pattern(&c));
    }
}

#[test]
fn marginal_sd_follows_sigma() {
    let m = square_mesh(10.0, 0.4, 4.0);
    for sigma in [1.0, 2.5] {
        let p = MaternParams::new(2.0, sigma, 1.0).unwrap().to_spde().unwrap();
        let g = factorize(&assemble_precision(&m, &p, None, None).unwrap()).unwrap();
        let c = nearest(&m, [5.0, 5.0]);
        let sd = g.covariance_column(c)[c].sqrt();
        assert!((sd / sigma - 1.0).abs() < 0.06, "{sd}");
    }
}

fn strip_setup() -> (Mesh, Vec<usize>, usize, usize) {
    let rect = [[0.0, 0.0], [12.0, 0.0], [12.0, 8.0], [0.0, 8.0]];
    let cfg = MeshConfig { max_edge_inner: 0.25, max_edge_outer: 0.25, extension_distance: 0.0, min_angle: 21.0 };
    let m = build_mesh(&rect, None, &cfg).unwrap();
    // Vertical strip of width 1 (range / 2) around x = 6.
    let barrier: Vec<usize> = (0..m.n_triangles()).filter(|&t| (m.centroid(t)[0] - 6.0).abs() < 0.5).collect();
    let a = nearest(&m, [5.0, 4.0]);
    let b = nearest(&m, [7.0, 4.0]);
    (m, barrier, a, b)
}

#[test]
fn barrier_strip_blocks_correlation() {
    let (m, barrier, a, b) = strip_setup();
    let stat = correlation(barrier_precision_matrix(&m, &BarrierSpec::new(vec![], 2.0), 1.0).unwrap(), a, b);
    let bar = correlation(barrier_precision_matrix(&m, &BarrierSpec::new(barrier, 2.0), 1.0).unwrap(), a, b);
    assert!(bar < 0.8 * stat, "barrier {bar} stationary {stat}");
}

#[test]
fn empty_barrier_matches_stationary_correlation() {
    let (m, _, a, b) = strip_setup();
    let p = MaternParams::new(2.0, 1.0, 1.0).unwrap().to_spde().unwrap();
    let stat = correlation(FemMatrices::new(&m, None).unwrap().stationary(&p).unwrap(), a, b);
    let bar = correlation(barrier_precision_matrix(&m, &BarrierSpec::new(vec![], 2.0), 1.0).unwrap(), a, b);
    assert!((bar - stat).abs() < 1e-6);
}

fn small_mesh() -> Mesh {
    Mesh {
        vertices: vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0], [0.5, 0.5]],
        triangles: vec![[0, 1, 4], [1, 2, 4], [2, 3, 4], [3, 0, 4]],
        boundary_loops: vec![],
    }
}

#[test]
fn nig_mixing_moments_and_skewness() {
    let m = small_mesh();
    let h = FemMatrices::new(&m, None).unwrap().c;
    let p = SpdeParams::new(1.0, 1.0, 2).unwrap();
    let gamma = 0.5;
    let n = 100_000;
    let draws = simulate_nig_draws(&m, &p, 2.0, gamma, n, 17).unwrap();
    for (i, &hi) in h.iter().enumerate() {
        let v: Vec<f64> = draws.iter().map(|d| d.v[i]).collect();
        let mean = v.iter().sum::<f64>() / n as f64;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let se = (hi / (gamma * gamma) / n as f64).sqrt();
        assert!((mean - hi).abs() < 3.0 * se, "node {i}: {mean} vs {hi}");
        assert!((var / (hi / (gamma * gamma)) - 1.0).abs() < 0.1, "node {i}: var {var}");
    }
    let u: Vec<f64> = draws.iter().map(|d| d.u[4]).collect();
    let mean = u.iter().sum::<f64>() / n as f64;
    let m2 = u.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
    let m3 = u.iter().map(|x| (x - mean).powi(3)).sum::<f64>() / n as f64;
    assert!(m3 / m2.powf(1.5) > 0.1);
}

#[test]
fn matrix_market_round_trip() {
    let m = square_mesh(2.0, 0.5, 0.5);
    let q = assemble_precision(&m, &SpdeParams::new(1.3, 0.9, 2).unwrap(), None, None).unwrap().q;
    let mut buf = Vec::new();
    write_matrix_market(&q, &mut buf).unwrap();
    let back = read_matrix_market(&buf[..]).unwrap();
    assert_eq!(back, q);
}
