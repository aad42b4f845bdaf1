use ndarray::Array2;
use rand::Rng;

use stable_depths::diagnostics::ks_two_sample;
use stable_depths::limit::{empirical_scale_u, empirical_scales, LayerSampler};
use stable_depths::network::{conditional_measure, simulate_joint, simulate_sequential};
use stable_depths::numeric::mean_and_se;
use stable_depths::{
    ActivationSpec, InputMatrix, MeasureSampler, NetworkConfig, ParticleLimit, PropagateOptions, Seed, SphereGrid,
    StableIndex,
};

const LEVEL: f64 = 0.01;

fn config(alpha: f64, width: usize, depth: usize) -> NetworkConfig {
    NetworkConfig {
        alpha: StableIndex::new(alpha).unwrap(),
        sigma_w: 1.0,
        sigma_b: 1.0,
        depth,
        width,
        activation: ActivationSpec::tanh(),
        input: InputMatrix::from_rows(&[vec![1.0, -0.5], vec![0.3, 0.8]]).unwrap(),
    }
}

fn project(draws: &Array2<f64>, u: &[f64]) -> Vec<f64> {
    draws.outer_iter().map(|r| r.iter().zip(u).map(|(a, b)| a * b).sum()).collect()
}

const DIRECTIONS: [[f64; 2]; 3] = [[1.0, 0.0], [0.6, 0.8], [-0.8, 0.6]];

#[test]
fn layer_one_units_follow_the_exact_limit() {
    let c = config(1.3, 50_000, 1);
    let units = simulate_joint(&c, 50_000, Seed::new(1)).unwrap().layers.remove(0).draws;
    let g = c.first_layer_measure().unwrap();
    let oracle = g.sample(c.alpha, 50_000, &mut Seed::new(2).rng());
    for u in DIRECTIONS {
        let r = ks_two_sample(&project(&units, &u), &project(&oracle, &u)).unwrap();
        assert!(r.p_value > LEVEL, "u {u:?}: {r:?}");
    }
}

#[test]
fn units_are_exchangeable() {
    // Unit 0 and unit 1 of layer 2 over independent realizations.
    let c = config(1.5, 8, 2);
    let reps = 20_000;
    let mut a = Vec::with_capacity(reps);
    let mut b = Vec::with_capacity(reps);
    for r in 0..reps {
        let real = simulate_joint(&c, 2, Seed::new(10).child(r as u64)).unwrap();
        let top = &real.layers[1].draws;
        a.push(0.6 * top[[0, 0]] + 0.8 * top[[0, 1]]);
        b.push(0.6 * top[[1, 0]] + 0.8 * top[[1, 1]]);
    }
    let r = ks_two_sample(&a, &b).unwrap();
    assert!(r.p_value > LEVEL, "{r:?}");
}

#[test]
fn retained_units_do_not_depend_on_how_many_are_kept() {
    let c = config(1.5, 32, 3);
    let few = simulate_joint(&c, 4, Seed::new(3)).unwrap();
    let all = simulate_joint(&c, 32, Seed::new(3)).unwrap();
    for l in 0..3 {
        let head = all.layers[l].draws.slice(ndarray::s![..4, ..]).to_owned();
        assert_eq!(few.layers[l].draws, head);
    }
}

#[test]
fn sequential_layer_is_conditionally_stable() {
    // Given its inputs, every unit of a width-n layer has the conditional
    // spectral measure built from those inputs.
    let c = config(1.5, 4096, 2);
    let limits = ParticleLimit::chain(&c, 1, 1, Seed::new(4), &PropagateOptions::default()).unwrap();
    let sampler = MeasureSampler::exact(&limits[0]);
    let real = simulate_sequential(&c, 2, &sampler, 4096, Seed::new(5)).unwrap();
    let g = conditional_measure(real.inputs.view(), c.sigma_w, c.sigma_b, c.alpha, &c.activation).unwrap();
    assert!((g.total_mass() - real.conditional_mass).abs() < 1e-12 * g.total_mass());
    let oracle = g.sample(c.alpha, 20_000, &mut Seed::new(6).rng());
    for u in DIRECTIONS {
        let r = ks_two_sample(&project(&real.output.draws, &u), &project(&oracle, &u)).unwrap();
        assert!(r.p_value > LEVEL, "u {u:?}: {r:?}");
    }
}

#[test]
fn particle_limit_is_a_width_m_network_in_distribution() {
    // One draw from St(Γ̃^(2)) per particle set versus unit 0 of a width-M
    // layer on fresh limit draws; the two have the same law for every M.
    let c = config(1.2, 64, 2);
    let first = ParticleLimit::first_layer(&c).unwrap();
    let sampler = MeasureSampler::exact(&first);
    let reps = 4000;
    let u = [0.6, 0.8];
    let mut particle = Vec::with_capacity(reps);
    let mut network = Vec::with_capacity(reps);
    for r in 0..reps {
        let s = Seed::new(7).child(r as u64);
        let lim = first
            .propagate(&c.activation, c.sigma_w, c.sigma_b, 64, s.child(0), &PropagateOptions::default())
            .unwrap();
        let x = lim.measure.sample(c.alpha, 1, &mut s.child(1).rng());
        particle.push(x[[0, 0]] * u[0] + x[[0, 1]] * u[1]);
        let y = simulate_sequential(&c, 2, &sampler, 1, s.child(2)).unwrap().output.draws;
        network.push(y[[0, 0]] * u[0] + y[[0, 1]] * u[1]);
    }
    let r = ks_two_sample(&particle, &network).unwrap();
    assert!(r.p_value > LEVEL, "{r:?}");
}

#[test]
fn conditional_masses_respect_the_cap() {
    for (i, alpha) in [0.6, 1.0, 1.5, 1.9].into_iter().enumerate() {
        let mut c = config(alpha, 256, 4);
        c.sigma_w = 0.5 + i as f64;
        let cap = c.gamma_bar().unwrap();
        let real = simulate_joint(&c, 1, Seed::new(8 + i as u64)).unwrap();
        assert!(real.conditional_masses.iter().all(|&m| m <= cap));
        let chain = ParticleLimit::chain(&c, 3, 2000, Seed::new(9), &PropagateOptions::default()).unwrap();
        assert!(chain[1..].iter().all(|l| l.measure.total_mass() <= cap));
    }
}

#[test]
fn unit_index_cauchy_particle_mass_matches_direct_monte_carlo() {
    // k = 1, x = 1, tanh, α = 1: f ~ Cauchy(scale 2), Γ̃^(2) mass = 1 + mean|tanh f|.
    let c = NetworkConfig {
        alpha: StableIndex::new(1.0).unwrap(),
        input: InputMatrix::from_rows(&[vec![1.0]]).unwrap(),
        ..config(1.0, 1, 2)
    };
    let m = 100_000;
    let run = |s: u64| {
        ParticleLimit::chain(&c, 2, m, Seed::new(s), &PropagateOptions::default()).unwrap()[1].measure.total_mass()
    };
    let (a, b) = (run(11), run(12));
    let mut rng = Seed::new(13).rng();
    let direct: Vec<f64> = (0..m)
        .map(|_| (2.0 * (std::f64::consts::PI * (rng.random::<f64>() - 0.5)).tan()).tanh().abs())
        .collect();
    let (mean, se) = mean_and_se(&direct);
    assert!((a - b).abs() <= 3.0 * 2f64.sqrt() * se, "{a} vs {b}");
    assert!((a - 1.0 - mean).abs() <= 3.0 * 2f64.sqrt() * se, "{a} vs 1 + {mean}");
}

#[test]
fn limit_scale_agrees_with_fresh_draw_estimate() {
    let c = config(1.5, 1, 2);
    let m = 50_000;
    let chain = ParticleLimit::chain(&c, 2, m, Seed::new(14), &PropagateOptions::default()).unwrap();
    let fresh = chain[0].measure.sample(c.alpha, m, &mut Seed::new(15).rng());
    let a = c.alpha.get();
    for u in DIRECTIONS {
        let terms: Vec<f64> = fresh
            .outer_iter()
            .map(|r| (c.activation.eval(r[0]) * u[0] + c.activation.eval(r[1]) * u[1]).abs().powf(a))
            .collect();
        let (mean, se) = mean_and_se(&terms);
        let bias = (u[0] + u[1]).abs().powf(a);
        let estimate = bias + mean;
        // Both sides carry Monte Carlo error of the same size.
        let got = chain[1].limit_scale_u(&u);
        assert!((got - estimate).abs() <= 3.0 * 2f64.sqrt() * se, "u {u:?}: {got} vs {estimate}");
    }
}

#[test]
fn empirical_scale_converges_at_clt_width() {
    let c = config(1.5, 1, 2);
    let chain = ParticleLimit::chain(&c, 2, 1 << 20, Seed::new(16), &PropagateOptions::default()).unwrap();
    let n = 1 << 14;
    let prev = chain[0].measure.sample(c.alpha, n, &mut Seed::new(17).rng());
    let a = c.alpha.get();
    for u in DIRECTIONS {
        let got = empirical_scale_u(prev.view(), &u, c.sigma_w, c.sigma_b, c.alpha, &c.activation);
        let terms: Vec<f64> = prev
            .outer_iter()
            .map(|r| (c.activation.eval(r[0]) * u[0] + c.activation.eval(r[1]) * u[1]).abs().powf(a))
            .collect();
        let (_, se) = mean_and_se(&terms);
        assert!((got - chain[1].limit_scale_u(&u)).abs() < 5.0 * se, "u {u:?}");
    }
}

#[test]
fn limiting_scales_are_bounded_away_from_zero() {
    let grid = SphereGrid::new(2, 720);
    for alpha in [0.5, 1.0, 1.5] {
        let c = config(alpha, 1, 3);
        let chain = ParticleLimit::chain(&c, 3, 4000, Seed::new(18), &PropagateOptions { coalesce_bins: Some(512) }).unwrap();
        for l in &chain {
            let min = l.scales_on(&grid).into_iter().fold(f64::INFINITY, f64::min);
            assert!(min > 1e-3, "alpha {alpha} layer {}: min {min}", l.layer);
        }
    }
    // Without the span condition (and without bias) some direction has scale 0.
    let c = NetworkConfig {
        sigma_b: 0.0,
        input: InputMatrix::from_rows(&[vec![1.0, -1.0]]).unwrap(),
        ..config(1.5, 1, 1)
    };
    let l = ParticleLimit::first_layer(&c).unwrap();
    assert!(l.limit_scale_u(&[0.5f64.sqrt(), 0.5f64.sqrt()]) < 1e-15);
}

#[test]
fn empirical_scales_stay_above_a_quarter_of_the_limit() {
    let c = config(1.5, 1024, 2);
    let grid = SphereGrid::default_for(2);
    let chain = ParticleLimit::chain(&c, 2, 100_000, Seed::new(19), &PropagateOptions::default()).unwrap();
    let floor = chain[1].scales_on(&grid).into_iter().fold(f64::INFINITY, f64::min) / 4.0;
    for r in 0..8 {
        let real = simulate_joint(&c, 1024, Seed::new(20).child(r)).unwrap();
        let emp = empirical_scales(real.layers[0].draws.view(), &grid, 1.0, 1.0, c.alpha, &c.activation);
        assert!(emp.into_iter().fold(f64::INFINITY, f64::min) > floor);
    }
}

#[test]
fn particle_measures_agree_across_particle_counts() {
    // CF at M and 4M within three combined standard errors.
    let c = config(1.5, 1, 2);
    let m = 20_000;
    let small = ParticleLimit::chain(&c, 2, m, Seed::new(21), &PropagateOptions::default()).unwrap().remove(1);
    let large = ParticleLimit::chain(&c, 2, 4 * m, Seed::new(22), &PropagateOptions::default()).unwrap().remove(1);
    let a = c.alpha.get();
    for t in stable_depths::diagnostics::standard_t_grid(2) {
        // Per-particle summands M·m_j|s_j·t|^α, with dropped zero particles as zeros.
        let mut terms: Vec<f64> = small
            .measure
            .pairs()
            .skip(small.bias_pairs)
            .map(|(s, w)| m as f64 * w * (s[0] * t[0] + s[1] * t[1]).abs().powf(a))
            .collect();
        terms.resize(m, 0.0);
        let (_, se) = mean_and_se(&terms);
        let cf = small.cf(&t);
        // The 4M estimate carries a quarter of the variance.
        let cf_se = cf * se * 1.25f64.sqrt();
        assert!((cf - large.cf(&t)).abs() <= 3.0 * cf_se.max(1e-12), "t {t:?}");
    }
    let sampler = MeasureSampler::exact(&small);
    assert_eq!(sampler.layer(), 2);
}
