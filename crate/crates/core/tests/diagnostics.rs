use ndarray::Array2;
use proptest::prelude::*;
use rand_distr::{Distribution, StandardNormal};

use stable_depths::diagnostics::{
    consistency_check, cramer_wold_check, ks_two_sample, moment_estimate, rate_experiment, standard_t_grid, tail_check,
    tail_radius, CramerWoldSpec, RateRegime, RateSpec,
};
use stable_depths::stable::sample_std_stable;
use stable_depths::{
    ActivationSpec, Error, InputMatrix, NetworkConfig, ParticleLimit, PropagateOptions, Seed, SpectralMeasure,
    SphereGrid, StableIndex,
};

fn normals(n: usize, scale: f64, seed: Seed) -> Vec<f64> {
    let mut rng = seed.rng();
    (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            scale * z
        })
        .collect()
}

fn config(alpha: f64, width: usize, depth: usize) -> NetworkConfig {
    NetworkConfig {
        alpha: StableIndex::new(alpha).unwrap(),
        sigma_w: 1.0,
        sigma_b: 1.0,
        depth,
        width,
        activation: ActivationSpec::tanh(),
        input: InputMatrix::from_rows(&[vec![1.0, 0.3], vec![-0.5, 0.8]]).unwrap(),
    }
}

#[test]
fn ks_separates_different_scales() {
    let r = ks_two_sample(&normals(5000, 1.0, Seed::new(1)), &normals(5000, 1.3, Seed::new(2))).unwrap();
    assert!(r.p_value < 1e-6, "{r:?}");
}

#[test]
fn ks_is_calibrated_under_the_null() {
    let rejections = (0..100u64)
        .filter(|&r| {
            let a = normals(2000, 1.0, Seed::new(3).child(2 * r));
            let b = normals(2000, 1.0, Seed::new(3).child(2 * r + 1));
            ks_two_sample(&a, &b).unwrap().p_value < 0.01
        })
        .count();
    // Binomial(100, 0.01) exceeds 5 with probability below 1e-3.
    assert!(rejections <= 5, "{rejections} rejections");
}

#[test]
fn ks_refuses_small_batches() {
    let a = vec![0.0; 999];
    assert!(matches!(ks_two_sample(&a, &a), Err(Error::Precondition(_))));
}

#[test]
fn tail_bound_holds_for_three_atom_measure() {
    let alpha = StableIndex::new(1.5).unwrap();
    let s = 0.5f64.sqrt();
    let mut g = SpectralMeasure::new(2);
    g.push_pair(&[1.0, 0.0], 1.0).unwrap();
    g.push_pair(&[0.6, 0.8], 0.5).unwrap();
    g.push_pair(&[-s, s], 0.8).unwrap();
    let draws = g.sample(alpha, 100_000, &mut Seed::new(4).rng());
    for eps in [0.05, 0.1] {
        let r = tail_check(draws.view(), alpha, g.total_mass(), eps).unwrap();
        assert!(r.holds, "{r:?}");
    }
}

#[test]
fn tail_radius_rejects_gaussian_and_bad_eps() {
    let m = 1.0;
    assert!(tail_radius(StableIndex::new(2.0).unwrap(), 1, m, 0.1).is_err());
    assert!(tail_radius(StableIndex::new(1.0).unwrap(), 1, m, 0.0).is_err());
    assert!(tail_radius(StableIndex::new(1.0).unwrap(), 1, m, 1.5).is_err());
}

proptest! {
    #[test]
    fn tail_radius_is_monotone(alpha in 0.2f64..1.95, mass in 0.1f64..10.0, eps in 0.01f64..0.9, k in 1usize..6) {
        let a = StableIndex::new(alpha).unwrap();
        let r = tail_radius(a, k, mass, eps).unwrap();
        prop_assert!(tail_radius(a, k, mass, eps * 1.1).unwrap() < r);
        prop_assert!(tail_radius(a, k, mass * 1.1, eps).unwrap() > r);
        prop_assert!(tail_radius(a, k + 1, mass, eps).unwrap() > r);
    }
}

#[test]
fn cramer_wold_exponent_is_weight_free_at_alpha_one() {
    // Σ p_i^α = 1 when α = 1, so the limit CF of T equals that of one unit.
    let c = config(1.0, 16, 2);
    let chain = ParticleLimit::chain(&c, 2, 5000, Seed::new(5), &PropagateOptions::default()).unwrap();
    let t = standard_t_grid(2);
    let run = |weights: Vec<(usize, f64)>| {
        let spec = CramerWoldSpec { layer: 2, weights, realizations: 10, copies_per_realization: 1 };
        cramer_wold_check(&c, &spec, &chain[1], &t, Seed::new(6)).unwrap().analytic
    };
    let one = run(vec![(0, 1.0)]);
    let split = run(vec![(0, 0.25), (1, 0.25), (2, 0.5)]);
    for (a, b) in one.iter().zip(&split) {
        assert!((a - b).abs() <= 1e-14 * a.max(1e-300), "{a} vs {b}");
    }
}

#[test]
fn cramer_wold_sum_matches_limit() {
    let c = config(1.5, 256, 2);
    let chain = ParticleLimit::chain(&c, 2, 100_000, Seed::new(7), &PropagateOptions::default()).unwrap();
    let spec = CramerWoldSpec { layer: 2, weights: vec![(0, 0.5), (1, 0.5)], realizations: 2000, copies_per_realization: 1 };
    let r = cramer_wold_check(&c, &spec, &chain[1], &standard_t_grid(2), Seed::new(8)).unwrap();
    assert!(r.passes(), "max gap {} tolerance {}", r.max_abs_gap, r.tolerance);
    assert!(r.imaginary_parts_small());
}

#[test]
fn cramer_wold_rejects_bad_weights() {
    let c = config(1.5, 8, 2);
    let chain = ParticleLimit::chain(&c, 2, 100, Seed::new(9), &PropagateOptions::default()).unwrap();
    let bad = CramerWoldSpec { layer: 2, weights: vec![(0, 0.5), (0, 0.5)], realizations: 4, copies_per_realization: 1 };
    assert!(cramer_wold_check(&c, &bad, &chain[1], &standard_t_grid(2), Seed::new(10)).is_err());
    let wide = CramerWoldSpec { layer: 2, weights: vec![(0, 0.5), (7, 0.5)], realizations: 4, copies_per_realization: 2 };
    assert!(cramer_wold_check(&c, &wide, &chain[1], &standard_t_grid(2), Seed::new(10)).is_err());
}

#[test]
fn moment_estimates_agree_across_batches() {
    let alpha = StableIndex::new(1.2).unwrap();
    let tanh = ActivationSpec::tanh();
    let batch = |s: u64| Array2::from_shape_vec((50_000, 1), sample_std_stable(alpha, 50_000, &mut Seed::new(s).rng())).unwrap();
    let (m1, se1) = moment_estimate(batch(11).view(), &tanh, 1.2).unwrap();
    let (m2, se2) = moment_estimate(batch(12).view(), &tanh, 1.2).unwrap();
    assert!((m1 - m2).abs() <= 3.0 * se1.hypot(se2), "{m1} ± {se1} vs {m2} ± {se2}");
    assert!(moment_estimate(batch(11).view(), &tanh, 0.0).is_err());
}

fn small_rate_spec(regime: RateRegime) -> RateSpec {
    RateSpec {
        regime,
        layer: 2,
        n_grid: vec![16, 32, 64, 128],
        repeats: 8,
        grid: SphereGrid::new(2, 64),
        options: PropagateOptions::default(),
    }
}

#[test]
fn rate_experiments_are_reproducible() {
    let c = config(1.5, 128, 2);
    let chain = ParticleLimit::chain(&c, 2, 5000, Seed::new(13), &PropagateOptions::default()).unwrap();
    for regime in [RateRegime::Sequential, RateRegime::Joint] {
        let spec = small_rate_spec(regime);
        let a = rate_experiment(&c, &spec, &chain, Seed::new(14)).unwrap();
        let b = rate_experiment(&c, &spec, &chain, Seed::new(14)).unwrap();
        assert_eq!(a, b);
        assert!(!a.degenerate);
        assert!(a.slope.is_some());
    }
}

#[test]
fn zero_weight_scale_gives_degenerate_rates() {
    let c = NetworkConfig { sigma_w: 0.0, ..config(1.5, 128, 2) };
    let chain = ParticleLimit::chain(&c, 2, 100, Seed::new(15), &PropagateOptions::default()).unwrap();
    let r = rate_experiment(&c, &small_rate_spec(RateRegime::Sequential), &chain, Seed::new(16)).unwrap();
    assert!(r.degenerate);
    assert!(r.median_gaps.iter().all(|&g| g < 1e-12));
    assert!(r.slope.is_none());
}

#[test]
fn rates_refuse_non_spanning_inputs() {
    let c = NetworkConfig {
        input: InputMatrix::from_rows(&[vec![1.0, 1.0, 0.0], vec![2.0, 2.0, 0.0]]).unwrap(),
        ..config(1.5, 128, 2)
    };
    let chain = ParticleLimit::chain(&c, 2, 100, Seed::new(17), &PropagateOptions::default()).unwrap();
    let spec = RateSpec { grid: SphereGrid::new(3, 8), ..small_rate_spec(RateRegime::Joint) };
    let err = rate_experiment(&c, &spec, &chain, Seed::new(18)).unwrap_err();
    assert!(matches!(&err, Error::Precondition(m) if m.contains("span")), "{err}");
}

#[test]
fn dropping_a_coordinate_of_a_deep_limit_is_exact() {
    let c = NetworkConfig {
        input: InputMatrix::from_rows(&[vec![1.0, -0.4, 0.2], vec![0.3, 0.9, -0.7]]).unwrap(),
        ..config(1.3, 1, 3)
    };
    let chain = ParticleLimit::chain(&c, 3, 2000, Seed::new(19), &PropagateOptions::default()).unwrap();
    let mut rng = Seed::new(20).rng();
    let t: Vec<Vec<f64>> = (0..50)
        .map(|_| {
            (0..3)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    z
                })
                .collect()
        })
        .collect();
    for coord in 0..3 {
        assert!(consistency_check(&chain[2], coord, &t).unwrap() <= 1e-12);
    }
}
