use gfield::areal::{
    besag_precision, besag_structure, kronecker_precision, parse_graph, scale_besag, temporal_precision, AdjacencyGraph, Bym2, TemporalKind, TemporalModel,
};
use gfield::gmrf::{constrained_marginal_variances, factorize, projected_marginal_variances};
use gfield::{PrecisionModel, SparseMatrix};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn fixture(name: &str) -> String {
    std::fs::read_to_string(format!("{}/tests/fixtures/{name}", env!("CARGO_MANIFEST_DIR"))).unwrap()
}

fn oracle(graph: &str, key: &str) -> f64 {
    let v: serde_json::Value = serde_json::from_str(&fixture("graph_oracles.json")).unwrap();
    v[graph][key].as_f64().unwrap()
}

fn geo_mean(v: &[f64]) -> f64 {
    (v.iter().map(|x| x.ln()).sum::<f64>() / v.len() as f64).exp()
}

fn ones(n: usize) -> Vec<f64> {
    vec![1.0; n]
}

#[test]
fn fixtures_parse_and_are_connected_planar_graphs() {
    let g = parse_graph(&fixture("planar544.graph")).unwrap();
    assert_eq!(g.n(), 544);
    assert!((0..g.n()).all(|i| g.degree(i) >= 1));
    assert_eq!(g.n_edges() as f64, oracle("planar544", "edges"));
    assert_eq!(g.components().len(), 1);
    let nc = parse_graph(&fixture("nc_sids.graph")).unwrap();
    assert_eq!(nc.n(), 100);
}

#[test]
fn besag_structure_is_exact_integer_laplacian() {
    for name in ["planar544.graph", "nc_sids.graph"] {
        let g = parse_graph(&fixture(name)).unwrap();
        let q = besag_structure(&g, None).unwrap();
        for (i, j, v) in q.triplets() {
            let want = if i == j { g.degree(i) as f64 } else { -1.0 };
            assert_eq!(v, want);
            assert_eq!(v.fract(), 0.0);
        }
        assert_eq!(q.nnz(), g.n() + 2 * g.n_edges());
        assert!(q.matvec(&ones(g.n())).iter().all(|&r| r == 0.0));
        assert!(q.is_symmetric());
    }
}

#[test]
fn scaling_matches_dense_oracle() {
    for (file, key) in [("planar544.graph", "planar544"), ("nc_sids.graph", "nc_sids")] {
        let g = parse_graph(&fixture(file)).unwrap();
        let (scaled, report) = scale_besag(&besag_precision(&g, None).unwrap()).unwrap();
        assert!((report.factors[0] / oracle(key, "scale") - 1.0).abs() < 1e-10, "{key}");
        let v = projected_marginal_variances(&scaled.q, &[ones(g.n())]).unwrap();
        assert!((geo_mean(&v) - 1.0).abs() < 1e-8);
        let (again, rep2) = scale_besag(&scaled).unwrap();
        assert!((rep2.factors[0] - 1.0).abs() < 1e-10);
        assert!(again.q.max_abs_diff(&scaled.q) <= 1e-10 * scaled.q.max_abs());
    }
}

#[test]
fn components_are_scaled_independently() {
    // Two paths (3 and 5 nodes) and an isolated region.
    let g = AdjacencyGraph::from_edges(9, &[(0, 1), (1, 2), (3, 4), (4, 5), (5, 6), (6, 7)]).unwrap();
    let model = besag_precision(&g, None).unwrap();
    assert_eq!(model.constraints.as_ref().unwrap().len(), 2);
    assert_eq!(model.rank_deficiency, 2);
    let (scaled, report) = scale_besag(&model).unwrap();
    assert_eq!(report.singletons, vec![8]);
    let basis: Vec<Vec<f64>> =
        report.components.iter().filter(|c| c.len() > 1).map(|c| (0..9).map(|i| if c.contains(&i) { 1.0 } else { 0.0 }).collect()).collect();
    let v = projected_marginal_variances(&scaled.q, &basis).unwrap();
    for c in report.components.iter().filter(|c| c.len() > 1) {
        let vc: Vec<f64> = c.iter().map(|&i| v[i]).collect();
        assert!((geo_mean(&vc) - 1.0).abs() < 1e-12);
    }
    assert_eq!(v[8], 1.0);
    // The jittered factorization agrees with the exact variances.
    let vj = factorize(&scaled).unwrap().marginal_variances();
    assert!(v.iter().zip(&vj).all(|(a, b)| (a - b).abs() < 1e-6));
}

#[test]
fn scaling_keeps_correlations() {
    let g = parse_graph(&fixture("nc_sids.graph")).unwrap();
    let model = besag_precision(&g, None).unwrap();
    let (scaled, _) = scale_besag(&model).unwrap();
    let corr = |q: &SparseMatrix| {
        let s = q.to_dense().pseudo_inverse(1e-10).unwrap();
        DMatrix::from_fn(g.n(), g.n(), |i, j| s[(i, j)] / (s[(i, i)] * s[(j, j)]).sqrt())
    };
    assert!((corr(&model.q) - corr(&scaled.q)).abs().max() < 1e-10);
}

fn sample_variances(model: &PrecisionModel, n_draws: usize, seed: u64) -> Vec<f64> {
    let draws = factorize(model).unwrap().sample(n_draws, seed);
    let d = model.dim();
    (0..d)
        .map(|i| {
            let m = draws.iter().map(|x| x[i]).sum::<f64>() / n_draws as f64;
            draws.iter().map(|x| (x[i] - m).powi(2)).sum::<f64>() / (n_draws - 1) as f64
        })
        .collect()
}

#[test]
fn bym2_degenerate_weights() {
    let g = AdjacencyGraph::from_edges(6, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (0, 2), (3, 5)]).unwrap();
    let bym = Bym2::new(&g, None).unwrap();
    let ustar = projected_marginal_variances(&bym.scaled_besag().q, &[ones(6)]).unwrap();
    let tau = 2.5;
    let n = 100_000;
    for (w, want) in [(0.0, vec![1.0 / tau; 6]), (1.0, ustar.iter().map(|v| v / tau).collect::<Vec<_>>())] {
        let v = sample_variances(&bym.precision(tau, w).unwrap(), n, 31);
        for i in 0..6 {
            let se = want[i] * (2.0 / n as f64).sqrt();
            assert!((v[i] - want[i]).abs() < 3.0 * se, "w={w} node {i}: {} vs {}", v[i], want[i]);
        }
    }
}

#[test]
fn bym2_variance_matches_dense_construction() {
    let g = AdjacencyGraph::path(3);
    let bym = Bym2::new(&g, None).unwrap();
    let (tau, w) = (2.0, 0.5);
    let m = bym.precision(tau, w).unwrap();
    let null = vec![vec![(w / tau).sqrt(); 3].into_iter().chain(ones(3)).collect::<Vec<f64>>()];
    let cons = vec![vec![0.0; 3].into_iter().chain(ones(3)).collect::<Vec<f64>>()];
    let v = constrained_marginal_variances(&m.q, &null, &cons).unwrap();
    // Dense: Var(b) = ((1 − w) I + w Σ*) / τ with Σ* the scaled generalized inverse.
    let sigma = bym.scaled_besag().q.to_dense().pseudo_inverse(1e-12).unwrap();
    for i in 0..3 {
        let want = ((1.0 - w) + w * sigma[(i, i)]) / tau;
        assert!((v[i] - want).abs() < 1e-8, "{i}: {} vs {want}", v[i]);
        assert!((v[3 + i] - sigma[(i, i)]).abs() < 1e-8);
    }
}

#[test]
fn ar1_draws_have_target_autocorrelation() {
    let m = temporal_precision(&TemporalModel::new(TemporalKind::Ar1 { rho: 0.9 }, 50).unwrap()).unwrap();
    let v = factorize(&m).unwrap().marginal_variances();
    assert!(v.iter().all(|x| (x - 1.0).abs() < 1e-12));
    let draws = factorize(&m).unwrap().sample(4000, 3);
    let (mut num, mut den) = (0.0, 0.0);
    for x in &draws {
        for t in 1..50 {
            num += x[t] * x[t - 1];
            den += 0.5 * (x[t] * x[t] + x[t - 1] * x[t - 1]);
        }
    }
    assert!((num / den - 0.9).abs() < 0.02, "{}", num / den);
}

fn random_dense(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| if rng.random_bool(0.6) { rng.random_range(-3i32..=3) as f64 } else { 0.0 })
}

#[test]
fn kronecker_matches_dense() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let a = SparseMatrix::from_dense(&random_dense(&mut rng, 2, 2));
    let b = SparseMatrix::from_dense(&random_dense(&mut rng, 3, 3));
    let k = kronecker_precision(&PrecisionModel::new(a.clone(), "a").unwrap(), &PrecisionModel::new(b.clone(), "b").unwrap()).unwrap();
    assert_eq!(k.q.to_dense(), a.to_dense().kronecker(&b.to_dense()));
    assert_eq!(k.q.nnz(), a.nnz() * b.nnz());
    let qs = besag_precision(&AdjacencyGraph::path(4), None).unwrap();
    let it = temporal_precision(&TemporalModel::new(TemporalKind::Iid, 3).unwrap()).unwrap();
    let bd = kronecker_precision(&it, &qs).unwrap();
    assert_eq!(bd.q, SparseMatrix::block_diag(&[&qs.q, &qs.q, &qs.q]));
    assert_eq!(bd.constraints.as_ref().unwrap().len(), 3);
}

#[test]
fn type_four_rank_deficiency() {
    let (t, n) = (3, 3);
    let time = temporal_precision(&TemporalModel::new(TemporalKind::Rw1, t).unwrap()).unwrap();
    let space = besag_precision(&AdjacencyGraph::path(n), None).unwrap();
    let st = kronecker_precision(&time, &space).unwrap();
    let eig = st.q.to_dense().symmetric_eigenvalues();
    let zeros = eig.iter().filter(|e| e.abs() < 1e-9).count();
    assert_eq!(zeros, t + n - 1);
    assert_eq!(st.rank_deficiency, t + n - 1);
    let c = st.constraints.as_ref().unwrap();
    assert_eq!(c.len(), t + n - 1);
    let cd = c.matrix().to_dense();
    assert_eq!(cd.rank(1e-10), t + n - 1);
    // Constraints pin down the null space: C N is invertible.
    let null: DMatrix<f64> = {
        let e = st.q.to_dense().symmetric_eigen();
        let cols: Vec<_> = (0..t * n).filter(|&i| e.eigenvalues[i].abs() < 1e-9).map(|i| e.eigenvectors.column(i).into_owned()).collect();
        DMatrix::from_columns(&cols)
    };
    assert_eq!((cd * null).rank(1e-10), t + n - 1);
    let draws = factorize(&st).unwrap().sample(3, 1);
    for x in draws {
        assert!(c.matrix().matvec(&x).iter().all(|r| r.abs() < 1e-8));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn kron_vec_identity(seed in 0u64..1000, p in 1usize..4, q in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_dense(&mut rng, p, p);
        let b = random_dense(&mut rng, q, q);
        let x = DMatrix::from_fn(q, p, |_, _| rng.random_range(-1.0..1.0));
        let k = SparseMatrix::from_dense(&a).kron(&SparseMatrix::from_dense(&b));
        let lhs = k.matvec(x.as_slice());
        let rhs = &b * &x * a.transpose();
        for (l, r) in lhs.iter().zip(rhs.as_slice()) {
            prop_assert!((l - r).abs() < 1e-12);
        }
    }

    #[test]
    fn besag_rows_sum_to_zero(seed in 0u64..1000, n in 2usize..30) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let edges: Vec<(usize, usize)> = (0..2 * n)
            .map(|_| (rng.random_range(0..n), rng.random_range(0..n)))
            .filter(|(i, j)| i != j)
            .collect();
        let g = AdjacencyGraph::from_edges(n, &edges).unwrap();
        let q = besag_structure(&g, None).unwrap();
        prop_assert!(q.matvec(&ones(n)).iter().all(|&r| r == 0.0));
        prop_assert!(q.is_symmetric());
        let text = g.to_text(gfield::areal::IndexBase::One);
        prop_assert_eq!(parse_graph(&text).unwrap(), g);
    }
}
