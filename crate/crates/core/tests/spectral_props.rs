use proptest::prelude::*;

use stable_depths::diagnostics::{empirical_cf, ks_two_sample, standard_t_grid};
use stable_depths::stable::sample_std_stable;
use stable_depths::{Seed, SpectralMeasure, StableIndex};

fn idx(a: f64) -> StableIndex {
    StableIndex::new(a).unwrap()
}

fn measure_strategy() -> impl Strategy<Value = SpectralMeasure> {
    (2usize..=4).prop_flat_map(|k| {
        prop::collection::vec((prop::collection::vec(-1.0f64..1.0, k), 0.01f64..3.0), 1..7).prop_map(move |atoms| {
            let mut g = SpectralMeasure::new(k);
            for (h, m) in atoms {
                g.push_zeta(&h, m).unwrap();
            }
            g
        })
    })
}

fn three_pair_measure() -> SpectralMeasure {
    let r = 0.5f64.sqrt();
    let mut g = SpectralMeasure::new(2);
    g.push_pair(&[1.0, 0.0], 1.0).unwrap();
    g.push_pair(&[0.6, 0.8], 0.5).unwrap();
    g.push_pair(&[-r, r], 0.8).unwrap();
    g
}

proptest! {
    #[test]
    fn projection_scale_is_even_and_alpha_homogeneous(
        g in measure_strategy(), alpha in 0.1f64..=2.0, c in -4.0f64..4.0, seed in any::<u64>()
    ) {
        let a = idx(alpha);
        let mut rng = Seed::new(seed).rng();
        let u: Vec<f64> = sample_std_stable(idx(2.0), g.dim(), &mut rng);
        let base = g.projection_scale(&u, a);
        let cu: Vec<f64> = u.iter().map(|x| c * x).collect();
        let neg: Vec<f64> = u.iter().map(|x| -x).collect();
        prop_assert!((g.projection_scale(&cu, a) - c.abs().powf(alpha) * base).abs() <= 1e-10 * (1.0 + base * c.abs().powf(alpha)));
        prop_assert_eq!(g.projection_scale(&neg, a), base);
        prop_assert!(base >= 0.0);
    }

    #[test]
    fn dropping_a_coordinate_is_exact(g in measure_strategy(), alpha in 0.1f64..=2.0, seed in any::<u64>()) {
        let a = idx(alpha);
        let mut rng = Seed::new(seed).rng();
        for coord in 0..g.dim() {
            let reduced = g.drop_coordinate(a, coord).unwrap();
            prop_assert_eq!(reduced.dim(), g.dim() - 1);
            let t: Vec<f64> = sample_std_stable(idx(2.0), g.dim(), &mut rng);
            let mut full = t.clone();
            full[coord] = 0.0;
            let short: Vec<f64> = t.iter().enumerate().filter(|&(i, _)| i != coord).map(|(_, &x)| x).collect();
            let lhs = g.cf(a, &full);
            let rhs = reduced.cf(a, &short);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.max(1e-300) || (lhs - rhs).abs() < 1e-300);
            prop_assert!(reduced.total_mass() <= g.total_mass() * (1.0 + 1e-12));
        }
    }

    #[test]
    fn marginal_scale_is_projection_on_axis(g in measure_strategy(), alpha in 0.1f64..=2.0) {
        let a = idx(alpha);
        for j in 0..g.dim() {
            let mut e = vec![0.0; g.dim()];
            e[j] = 1.0;
            let want = g.projection_scale(&e, a).powf(1.0 / alpha);
            let got = g.marginal_scale(a, j).unwrap();
            prop_assert!((got - want).abs() <= 1e-12 * want.max(1.0));
        }
    }

    #[test]
    fn text_format_round_trips(g in measure_strategy(), alpha in 0.1f64..=2.0) {
        let mut buf = Vec::new();
        g.write_text(idx(alpha), &["note".to_string()], &mut buf).unwrap();
        let (back, a, comments) = SpectralMeasure::read_text(&buf[..]).unwrap();
        prop_assert_eq!(back, g);
        prop_assert_eq!(a.get(), alpha);
        prop_assert_eq!(comments, vec!["note".to_string()]);
    }

    #[test]
    fn coalescing_preserves_mass_and_respects_bound(
        atoms in prop::collection::vec((0.0f64..std::f64::consts::TAU, 0.01f64..2.0), 1..200),
        alpha in 0.2f64..1.99,
        bins in 4usize..128,
    ) {
        let a = idx(alpha);
        let mut g = SpectralMeasure::new(2);
        for (th, m) in atoms {
            g.push_zeta(&[th.cos(), th.sin()], m).unwrap();
        }
        let (c, report) = g.coalesce(a, bins).unwrap();
        prop_assert!((c.total_mass() - g.total_mass()).abs() <= 1e-12 * g.total_mass());
        prop_assert!(c.pair_count() <= bins);
        prop_assert!(report.observed <= report.bound * (1.0 + 1e-9) + 1e-12);
    }
}

#[test]
fn marginals_of_draws_are_univariate_stable() {
    let g = three_pair_measure();
    for (i, alpha) in [0.8, 1.3, 1.7].into_iter().enumerate() {
        let a = idx(alpha);
        let mut rng = Seed::new(10 + i as u64).rng();
        let draws = g.sample(a, 50_000, &mut rng);
        for j in 0..2 {
            let sigma = g.marginal_scale(a, j).unwrap();
            let col: Vec<f64> = draws.column(j).to_vec();
            let oracle: Vec<f64> = sample_std_stable(a, 50_000, &mut rng).into_iter().map(|z| sigma * z).collect();
            let r = ks_two_sample(&col, &oracle).unwrap();
            assert!(r.p_value > 0.01, "alpha {alpha} coord {j}: {r:?}");
        }
        // A generic projection has scale γ(u)^{1/α}.
        let u = [0.28, -0.96];
        let sigma = g.projection_scale(&u, a).powf(1.0 / alpha);
        let proj: Vec<f64> = draws.outer_iter().map(|r| r[0] * u[0] + r[1] * u[1]).collect();
        let oracle: Vec<f64> = sample_std_stable(a, 50_000, &mut rng).into_iter().map(|z| sigma * z).collect();
        assert!(ks_two_sample(&proj, &oracle).unwrap().p_value > 0.01);
    }
}

#[test]
fn empirical_cf_of_sampler_matches_measure() {
    let g = three_pair_measure();
    let a = idx(1.1);
    let draws = g.sample(a, 100_000, &mut Seed::new(20).rng());
    let r = empirical_cf(draws.view(), &standard_t_grid(2)).unwrap().against(|t| g.cf(a, t));
    assert!(r.passes(), "gap {} tol {}", r.max_abs_gap, r.tolerance);
    assert!(r.imaginary_parts_small());
}

#[test]
fn coalesced_sampler_is_close_in_cf() {
    let a = idx(1.5);
    let mut g = SpectralMeasure::new(2);
    let mut rng = Seed::new(30).rng();
    let angles = sample_std_stable(idx(2.0), 5000, &mut rng);
    for th in angles {
        g.push_zeta(&[th.cos(), th.sin()], 1.0 / 5000.0).unwrap();
    }
    let (c, report) = g.coalesce(a, 256).unwrap();
    for t in standard_t_grid(2) {
        let r = t.iter().map(|x| x * x).sum::<f64>().sqrt();
        // The exponent gap scales like |t|^α.
        let gap = (g.projection_scale(&t, a) - c.projection_scale(&t, a)).abs();
        assert!(gap <= report.observed * r.powf(1.5) * (1.0 + 1e-9) + 1e-15);
    }
}
