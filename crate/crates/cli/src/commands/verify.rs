//! `verify`: finite networks against their limits.
//!
//! Rows of `verify.csv` (`check,layer,n,statistic,threshold,pass`):
//!
//! * `cf_gap`: median over pools of the max CF gap, against `4/√N` per pool;
//! * `cf_trend`: largest ratio of consecutive `cf_gap` medians, must be `< 1`;
//! * `tail`: exceedance fraction of `|S| > R`, against `ε + 3√(ε/N)`;
//! * `consistency`: coordinate-dropping CF identity, against `1e-12`;
//! * `mass`: total limiting mass, against `γ̄`;
//! * `cramer_wold`: max CF gap of the weighted unit sum, against `4/√N`.

use anyhow::{ensure, Result};
use rand_distr::{Distribution, StandardNormal};
use stable_depths::diagnostics::{
    cf_gap_experiment, consistency_check, cramer_wold_check, standard_t_grid, tail_check, CfGapSpec, CramerWoldSpec,
};
use stable_depths::limit::LayerSampler;
use stable_depths::{MeasureSampler, NetworkConfig, ParticleLimit};

use super::{num, network, out_dir, propagate_options, seed, Output, Passed};
use crate::config::Settings;

/// Direction-mesh size used to sample propagated measures for the tail
/// check when no coalescing is configured.
const TAIL_BINS: usize = 4096;

struct Row {
    check: &'static str,
    layer: usize,
    n: Option<usize>,
    statistic: f64,
    threshold: f64,
    pass: bool,
}

pub fn run(mut s: Settings) -> Result<Passed> {
    let config = network(&mut s)?;
    let seed = seed(&mut s)?;
    let out = out_dir(&mut s);
    let particles = s.get("particles", 100_000usize)?;
    let options = propagate_options(&mut s)?;
    let n_grid = s.list("n_grid", &[64usize, 256, 1024])?;
    let default_layers: Vec<usize> = if config.depth >= 2 { (2..=config.depth).collect() } else { vec![1] };
    let cf_layers = s.list("cf_layers", &default_layers)?;
    let pools = s.get("pools", 16usize)?;
    let per_pool = s.get("per_pool", 16usize)?;
    let tail_eps = s.get("tail_eps", 0.1)?;
    let tail_samples = s.get("tail_samples", 100_000usize)?;
    let consistency_points = s.get("consistency_points", 50usize)?;
    let cw_layer = s.get("cw_layer", config.depth.min(2))?;
    let cw_width = s.get("cw_width", 256usize)?;
    let cw_weights = s.list("cw_weights", &[0.5, 0.5])?;
    let cw_realizations = s.get("cw_realizations", 2000usize)?;
    let cw_copies = s.get("cw_copies", 1usize)?;
    s.finish("verify")?;

    config.validate_for_limits()?;
    ensure!(particles > 0, "particles must be at least 1");
    ensure!(n_grid.windows(2).all(|w| w[0] < w[1]), "n_grid must be strictly increasing");
    ensure!(cf_layers.iter().all(|&l| l >= 1 && l <= config.depth), "cf_layers must lie in 1..=depth");
    ensure!((1..=config.depth).contains(&cw_layer), "cw_layer must lie in 1..=depth");
    ensure!(tail_samples > 0 && tail_eps > 0.0 && tail_eps <= 1.0, "need tail_samples ≥ 1 and tail_eps in (0, 1]");

    let limits = ParticleLimit::chain(&config, config.depth, particles, seed.named("limit"), &options)?;
    let output = Output::create(&out)?;
    let chains: Vec<(String, Vec<u64>)> =
        limits.iter().map(|l| (format!("limit_l{}", l.layer), l.seed_chain.clone())).collect();
    output.write_resolved("verify", &s, seed, &chains)?;

    let k = config.dim();
    let mut rows = Vec::new();

    let spec = CfGapSpec { layers: cf_layers.clone(), n_grid: n_grid.clone(), pools, per_pool, t_grid: standard_t_grid(k) };
    let gaps = cf_gap_experiment(&config, &spec, &limits, seed.named("cf-gap"))?;
    for &l in &cf_layers {
        let series: Vec<_> = gaps.iter().filter(|g| g.layer == l).collect();
        for g in &series {
            rows.push(Row {
                check: "cf_gap",
                layer: l,
                n: Some(g.n),
                statistic: g.median_gap,
                threshold: g.tolerance,
                pass: g.median_gap <= g.tolerance,
            });
        }
        if series.len() >= 2 {
            let worst = series.windows(2).map(|w| w[1].median_gap / w[0].median_gap).fold(f64::NEG_INFINITY, f64::max);
            rows.push(Row { check: "cf_trend", layer: l, n: None, statistic: worst, threshold: 1.0, pass: worst < 1.0 });
        }
    }

    if !config.alpha.is_gaussian() {
        for lim in &limits {
            let sampler = if lim.layer == 1 {
                MeasureSampler::exact(lim)
            } else {
                MeasureSampler::coalesced(lim, options.coalesce_bins.unwrap_or(TAIL_BINS))?
            };
            let draws = sampler.sample(tail_samples, &mut seed.named("tail").child(lim.layer as u64).rng());
            let mass = sampler.measure().total_mass();
            let r = tail_check(draws.view(), config.alpha, mass, tail_eps)?;
            rows.push(Row {
                check: "tail",
                layer: lim.layer,
                n: Some(tail_samples),
                statistic: r.exceed_frac,
                threshold: r.eps + r.slack,
                pass: r.holds,
            });
        }
    }

    if k >= 2 {
        let mut rng = seed.named("consistency").rng();
        let t_grid: Vec<Vec<f64>> =
            (0..consistency_points).map(|_| (0..k).map(|_| StandardNormal.sample(&mut rng)).collect()).collect();
        for lim in &limits {
            let mut worst: f64 = 0.0;
            for r in 0..k {
                worst = worst.max(consistency_check(lim, r, &t_grid)?);
            }
            rows.push(Row { check: "consistency", layer: lim.layer, n: None, statistic: worst, threshold: 1e-12, pass: worst < 1e-12 });
        }
    }

    if let Some(bound) = config.gamma_bar() {
        for lim in limits.iter().skip(1) {
            let mass = lim.measure.total_mass();
            rows.push(Row { check: "mass", layer: lim.layer, n: None, statistic: mass, threshold: bound, pass: mass <= bound * (1.0 + 1e-12) });
        }
    }

    let weights: Vec<(usize, f64)> = cw_weights.iter().copied().enumerate().collect();
    let cw_spec = CramerWoldSpec { layer: cw_layer, weights, realizations: cw_realizations, copies_per_realization: cw_copies };
    let cw_config = NetworkConfig { width: cw_width, ..config.clone() };
    let cw = cramer_wold_check(&cw_config, &cw_spec, &limits[cw_layer - 1], &standard_t_grid(k), seed.named("cramer-wold"))?;
    rows.push(Row {
        check: "cramer_wold",
        layer: cw_layer,
        n: Some(cw_width),
        statistic: cw.max_abs_gap,
        threshold: cw.tolerance,
        pass: cw.passes(),
    });

    let mut w = output.csv("verify.csv")?;
    w.write_record(["check", "layer", "n", "statistic", "threshold", "pass"])?;
    for r in &rows {
        w.write_record([
            r.check.to_string(),
            r.layer.to_string(),
            r.n.map_or(String::new(), |n| n.to_string()),
            num(r.statistic),
            num(r.threshold),
            r.pass.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(rows.iter().all(|r| r.pass))
}
