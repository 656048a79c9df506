use gfield::gmrf::{condition_gaussian, factorize, Constraints, PrecisionModel};
use gfield::sparse::{SparseMatrix, SparseVector};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Sparse SPD matrix: ring plus random long-range edges, diagonally dominant.
fn random_spd(n: usize, seed: u64) -> SparseMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = Vec::new();
    let mut diag = vec![0.0; n];
    let mut edge = |i: usize, j: usize, rng: &mut ChaCha8Rng, t: &mut Vec<(usize, usize, f64)>| {
        if i != j {
            let v = -rng.random_range(0.1..1.0);
            t.push((i, j, v));
            t.push((j, i, v));
            diag[i] += v.abs();
            diag[j] += v.abs();
        }
    };
    for i in 0..n {
        edge(i, (i + 1) % n, &mut rng, &mut t);
    }
    for _ in 0..n / 2 {
        let (i, j) = (rng.random_range(0..n), rng.random_range(0..n));
        edge(i.min(j), i.max(j), &mut rng, &mut t);
    }
    for (i, d) in diag.iter().enumerate() {
        t.push((i, i, d + rng.random_range(0.1..1.0)));
    }
    SparseMatrix::from_triplets(n, n, &t)
}

fn random_vec(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random_range(-2.0..2.0)).collect()
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())) / scale
}

fn dense_log_density(q: &DMatrix<f64>, mean: &[f64], x: &[f64]) -> f64 {
    let n = q.nrows();
    let ch = q.clone().cholesky().unwrap();
    let logdet: f64 = 2.0 * ch.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    let r = DVector::from_iterator(n, x.iter().zip(mean).map(|(a, b)| a - b));
    -0.5 * n as f64 * LN_2PI + 0.5 * logdet - 0.5 * (r.transpose() * q * &r)[(0, 0)]
}

const SIZES: [usize; 4] = [3, 20, 90, 200];

#[test]
fn solve_and_log_det_match_dense() {
    for (k, &n) in SIZES.iter().enumerate() {
        let q = random_spd(n, k as u64);
        let g = factorize(&PrecisionModel::new(q.clone(), "t").unwrap()).unwrap();
        let dq = q.to_dense();
        let ch = dq.clone().cholesky().unwrap();
        let b = random_vec(n, 100 + k as u64);
        let x = g.solve(&b).unwrap();
        let xd = ch.solve(&DVector::from_vec(b));
        assert!(rel_err(&x, xd.as_slice()) < 1e-8, "n = {n}");
        let logdet: f64 = 2.0 * ch.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        assert!((g.log_det() - logdet).abs() < 1e-8 * logdet.abs().max(1.0));
    }
}

#[test]
fn log_density_matches_dense() {
    for (k, &n) in SIZES.iter().enumerate() {
        let q = random_spd(n, 10 + k as u64);
        let mean = random_vec(n, 20 + k as u64);
        let x = random_vec(n, 30 + k as u64);
        let m = PrecisionModel::new(q.clone(), "t").unwrap().with_mean(mean.clone()).unwrap();
        let got = factorize(&m).unwrap().log_density(&x).unwrap();
        let want = dense_log_density(&q.to_dense(), &mean, &x);
        assert!((got - want).abs() < 1e-8 * want.abs().max(1.0), "n = {n}: {got} vs {want}");
    }
}

#[test]
fn marginal_variances_match_dense_inverse() {
    for (k, &n) in SIZES.iter().enumerate() {
        let q = random_spd(n, 40 + k as u64);
        let g = factorize(&PrecisionModel::new(q.clone(), "t").unwrap()).unwrap();
        let inv = q.to_dense().try_inverse().unwrap();
        let want: Vec<f64> = inv.diagonal().iter().copied().collect();
        assert!(rel_err(&g.marginal_variances(), &want) < 1e-8, "n = {n}");
    }
}

#[test]
fn constrained_variances_match_dense_formula() {
    for (k, &n) in SIZES.iter().enumerate().skip(1) {
        let q = random_spd(n, 50 + k as u64);
        let w = random_vec(n, 60 + k as u64);
        let rows = vec![SparseVector::new(n, (0..n).map(|i| (i, 1.0)).collect()), SparseVector::new(n, w.iter().copied().enumerate().collect())];
        let c = Constraints::new(rows, vec![0.0, 1.0]).unwrap();
        let m = PrecisionModel::new(q.clone(), "t").unwrap().with_constraints(c.clone()).unwrap();
        let g = factorize(&m).unwrap();
        let s = q.to_dense().try_inverse().unwrap();
        let cd = c.matrix().to_dense();
        let csc = &cd * &s * cd.transpose();
        let sc = &s * cd.transpose();
        let cov = &s - &sc * csc.clone().try_inverse().unwrap() * sc.transpose();
        let want: Vec<f64> = cov.diagonal().iter().copied().collect();
        assert!(rel_err(&g.marginal_variances(), &want) < 1e-8, "n = {n}");
        let mean = g.constrained_mean();
        let cm = c.matrix().matvec(&mean);
        assert!(cm[0].abs() < 1e-9 && (cm[1] - 1.0).abs() < 1e-9);
    }
}

#[test]
fn conditioning_matches_dense_posterior() {
    for (k, &n) in SIZES.iter().enumerate() {
        let q = random_spd(n, 70 + k as u64);
        let mean = random_vec(n, 80 + k as u64);
        let m_obs = n.div_ceil(2);
        let mut rng = ChaCha8Rng::seed_from_u64(90 + k as u64);
        let a_t: Vec<(usize, usize, f64)> = (0..m_obs).flat_map(|r| [(r, rng.random_range(0..n), 1.0), (r, rng.random_range(0..n), 0.5)]).collect();
        let a = SparseMatrix::from_triplets(m_obs, n, &a_t);
        let y = random_vec(m_obs, 95 + k as u64);
        let tau = 3.0;
        let prior = PrecisionModel::new(q.clone(), "t").unwrap().with_mean(mean.clone()).unwrap();
        let post = condition_gaussian(&prior, &a, &y, tau).unwrap();

        let (dq, da) = (q.to_dense(), a.to_dense());
        let qp = &dq + tau * da.transpose() * &da;
        let rhs = &dq * DVector::from_vec(mean) + tau * da.transpose() * DVector::from_vec(y);
        let mu = qp.clone().cholesky().unwrap().solve(&rhs);
        assert!(rel_err(&post.mean, mu.as_slice()) < 1e-8, "n = {n}");
        assert!((post.q.to_dense() - qp).abs().max() < 1e-12);
    }
}

#[test]
fn sample_covariance_approaches_inverse() {
    let q = random_spd(6, 3);
    let g = factorize(&PrecisionModel::new(q.clone(), "t").unwrap()).unwrap();
    let draws = g.sample(40_000, 9);
    let inv = q.to_dense().try_inverse().unwrap();
    for i in 0..6 {
        let v = draws.iter().map(|d| d[i] * d[i]).sum::<f64>() / draws.len() as f64;
        let se = inv[(i, i)] * (2.0 / draws.len() as f64).sqrt();
        assert!((v - inv[(i, i)]).abs() < 4.0 * se, "node {i}: {v} vs {}", inv[(i, i)]);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn solve_inverts_q(seed in 0u64..10_000, n in 2usize..40) {
        let q = random_spd(n, seed);
        let g = factorize(&PrecisionModel::new(q.clone(), "t").unwrap()).unwrap();
        let b = random_vec(n, seed + 1);
        let x = g.solve(&b).unwrap();
        prop_assert!(rel_err(&q.matvec(&x), &b) < 1e-10);
    }

    #[test]
    fn draws_satisfy_constraints(seed in 0u64..10_000, n in 2usize..30) {
        let q = random_spd(n, seed);
        let m = PrecisionModel::new(q, "t").unwrap().with_constraints(Constraints::sum_to_zero(n)).unwrap();
        let g = factorize(&m).unwrap();
        for d in g.sample(3, seed) {
            prop_assert!(d.iter().sum::<f64>().abs() < 1e-9);
        }
    }

    #[test]
    fn sampling_is_seed_deterministic(seed in 0u64..10_000) {
        let g = factorize(&PrecisionModel::new(random_spd(15, seed), "t").unwrap()).unwrap();
        prop_assert_eq!(g.sample(4, seed), g.sample(4, seed));
    }

    #[test]
    fn marginal_variances_are_positive(seed in 0u64..10_000, n in 1usize..40) {
        let g = factorize(&PrecisionModel::new(random_spd(n.max(2), seed), "t").unwrap()).unwrap();
        prop_assert!(g.marginal_variances().iter().all(|&v| v > 0.0));
    }
}
