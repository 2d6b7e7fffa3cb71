//! Cross-module invariants checked against the independent oracles:
//! whitening preserves TV, closed-form bounds sandwich the true distance,
//! affine bijections leave TV unchanged, and the references agree with
//! each other.

use gausstv::gaussian::{
    affine_transform, resolve_rank_case, tv_lower_bound_general, tv_upper_bound_pinsker,
    GaussianParams, RankCase,
};
use gausstv::oracle::{grid_tv_nd, mc_tv_baseline, quadrature_tv_1d_pair};
use gausstv::whiten::whiten_pair;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn spd(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let m = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0f64));
    let s = &m * m.transpose() + DMatrix::identity(n, n) * 0.25;
    (&s + s.transpose()) * 0.5
}

fn random_pair(rng: &mut ChaCha8Rng, n: usize) -> (GaussianParams, GaussianParams) {
    let mk = |rng: &mut ChaCha8Rng| {
        GaussianParams::new(
            DVector::from_fn(n, |_, _| rng.random_range(-1.5..1.5)),
            spd(rng, n),
        )
    };
    (mk(rng), mk(rng))
}

fn oracle_tv_1d(p1: &GaussianParams, p2: &GaussianParams, tol: f64) -> f64 {
    quadrature_tv_1d_pair(
        p1.mean[0],
        p1.covariance[(0, 0)],
        p2.mean[0],
        p2.covariance[(0, 0)],
        tol,
    )
    .unwrap()
}

#[test]
fn whitening_preserves_tv_one_dim() {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for _ in 0..50 {
        let (p1, p2) = random_pair(&mut rng, 1);
        let direct = oracle_tv_1d(&p1, &p2, 1e-9);
        let (w, _) = whiten_pair(&p1, &p2).unwrap();
        let whitened = quadrature_tv_1d_pair(w.mu[0], w.sigma2[0], 0.0, 1.0, 1e-9).unwrap();
        assert!(
            (direct - whitened).abs() <= 1e-6,
            "direct {direct} vs whitened {whitened}"
        );
    }
}

#[test]
fn whitening_preserves_tv_two_dim() {
    // compared at the grid oracle's achievable accuracy
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    for _ in 0..6 {
        let (p1, p2) = random_pair(&mut rng, 2);
        let direct = grid_tv_nd(&p1, &p2, 512, 9.0).unwrap();
        let (w, _) = whiten_pair(&p1, &p2).unwrap();
        let wp1 = GaussianParams::from_raw(
            w.mu.clone(),
            vec![vec![w.sigma2[0], 0.0], vec![0.0, w.sigma2[1]]],
        )
        .unwrap();
        let wp2 = GaussianParams::from_raw(
            vec![0.0, 0.0],
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        )
        .unwrap();
        let white = grid_tv_nd(&wp1, &wp2, 512, 9.0).unwrap();
        let slack = direct.error_estimate + white.error_estimate + 1e-6;
        assert!(
            (direct.estimate - white.estimate).abs() <= slack,
            "direct {} vs whitened {} (slack {slack})",
            direct.estimate,
            white.estimate
        );
    }
}

#[test]
fn whitening_swap_symmetric() {
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    for _ in 0..30 {
        let (p1, p2) = random_pair(&mut rng, 1);
        let (w12, _) = whiten_pair(&p1, &p2).unwrap();
        let (w21, _) = whiten_pair(&p2, &p1).unwrap();
        let tv12 = quadrature_tv_1d_pair(w12.mu[0], w12.sigma2[0], 0.0, 1.0, 1e-9).unwrap();
        let tv21 = quadrature_tv_1d_pair(w21.mu[0], w21.sigma2[0], 0.0, 1.0, 1e-9).unwrap();
        assert!((tv12 - tv21).abs() <= 1e-6);
    }
}

#[test]
fn bounds_sandwich_oracle_one_dim() {
    let mut rng = ChaCha8Rng::seed_from_u64(104);
    for trial in 0..1000 {
        let (p1, p2) = random_pair(&mut rng, 1);
        let tv = oracle_tv_1d(&p1, &p2, 1e-8);
        let lower = tv_lower_bound_general(&p1, &p2).unwrap();
        let upper = tv_upper_bound_pinsker(&p1, &p2).unwrap();
        assert!(lower <= tv + 1e-7, "trial {trial}: lower {lower} tv {tv}");
        assert!(tv <= upper + 1e-7, "trial {trial}: tv {tv} upper {upper}");
    }
}

#[test]
fn bounds_sandwich_oracle_two_dim() {
    let mut rng = ChaCha8Rng::seed_from_u64(105);
    for trial in 0..1000 {
        let (p1, p2) = random_pair(&mut rng, 2);
        let lower = tv_lower_bound_general(&p1, &p2).unwrap();
        let upper = tv_upper_bound_pinsker(&p1, &p2).unwrap();
        // coarse grid is enough: the bounds are far from tight
        let g = grid_tv_nd(&p1, &p2, 96, 8.0).unwrap();
        assert!(
            lower <= g.estimate + g.error_estimate + 1e-6,
            "trial {trial}: lower {lower} tv {}",
            g.estimate
        );
        assert!(
            g.estimate - g.error_estimate - 1e-6 <= upper,
            "trial {trial}: tv {} upper {upper}",
            g.estimate
        );
    }
}

#[test]
fn affine_bijection_preserves_tv() {
    let mut rng = ChaCha8Rng::seed_from_u64(106);
    for _ in 0..30 {
        let (p1, p2) = random_pair(&mut rng, 1);
        let scale = rng.random_range(0.3..2.5f64) * if rng.random_bool(0.5) { -1.0 } else { 1.0 };
        let a = DMatrix::from_row_slice(1, 1, &[scale]);
        let b = DVector::from_vec(vec![rng.random_range(-2.0..2.0)]);
        let q1 = affine_transform(&p1, &a, &b).unwrap();
        let q2 = affine_transform(&p2, &a, &b).unwrap();
        let before = oracle_tv_1d(&p1, &p2, 1e-9);
        let after = oracle_tv_1d(&q1, &q2, 1e-9);
        assert!((before - after).abs() <= 1e-6);
    }
}

#[test]
fn full_rank_reduction_is_a_translation() {
    // for nondegenerate pairs the rank case only recenters both means,
    // which cannot change the distance
    let mut rng = ChaCha8Rng::seed_from_u64(107);
    for _ in 0..10 {
        let (p1, p2) = random_pair(&mut rng, 2);
        let direct = grid_tv_nd(&p1, &p2, 256, 9.0).unwrap();
        match resolve_rank_case(&p1, &p2).unwrap() {
            RankCase::FullRank {
                first,
                second,
                rank,
            } => {
                assert_eq!(rank, 2);
                let reduced = grid_tv_nd(&first, &second, 256, 9.0).unwrap();
                let slack = direct.error_estimate + reduced.error_estimate + 1e-9;
                assert!((direct.estimate - reduced.estimate).abs() <= slack);
            }
            other => panic!("expected full rank, got {other:?}"),
        }
    }
}

#[test]
fn grid_agrees_with_quadrature_on_embedded_pairs() {
    // a 1-D pair with an independent standard coordinate appended has the
    // same TV distance as the original
    let mut rng = ChaCha8Rng::seed_from_u64(108);
    for _ in 0..10 {
        let (p1, p2) = random_pair(&mut rng, 1);
        let tv1 = oracle_tv_1d(&p1, &p2, 1e-9);
        let embed = |p: &GaussianParams| {
            GaussianParams::from_raw(
                vec![p.mean[0], 0.0],
                vec![vec![p.covariance[(0, 0)], 0.0], vec![0.0, 1.0]],
            )
            .unwrap()
        };
        let g = grid_tv_nd(&embed(&p1), &embed(&p2), 384, 9.0).unwrap();
        assert!(
            (g.estimate - tv1).abs() <= g.error_estimate + 1e-4,
            "grid {} quad {tv1} err {}",
            g.estimate,
            g.error_estimate
        );
    }
}

#[test]
fn mc_baseline_consistent_with_quadrature() {
    let mut rng = ChaCha8Rng::seed_from_u64(109);
    for seed in 0..50u64 {
        let (p1, p2) = random_pair(&mut rng, 1);
        let tv = oracle_tv_1d(&p1, &p2, 1e-8);
        let mc = mc_tv_baseline(&p1, &p2, 20_000, seed).unwrap();
        assert!(
            (mc.estimate - tv).abs() <= 4.0 * mc.stderr + 1e-3,
            "seed {seed}: mc {} +- {} vs {tv}",
            mc.estimate,
            mc.stderr
        );
    }
}
