use ndarray::{concatenate, Array2, Axis};
use rayon::prelude::*;

use super::cf::empirical_cf;
use crate::error::{Error, Result};
use crate::limit::ParticleLimit;
use crate::network::{simulate_joint, NetworkConfig};
use crate::numeric::median;
use crate::seed::Seed;

/// Finite-width CF gap experiment: for each width `n`, `pools` independent
/// pools of `per_pool` network realizations, all `n` units of each pooled.
#[derive(Clone, Debug, PartialEq)]
pub struct CfGapSpec {
    pub layers: Vec<usize>,
    pub n_grid: Vec<usize>,
    pub pools: usize,
    pub per_pool: usize,
    pub t_grid: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CfGapRow {
    pub layer: usize,
    pub n: usize,
    /// Median over pools of the max CF gap on the `t` grid.
    pub median_gap: f64,
    pub pool_gaps: Vec<f64>,
    pub samples_per_pool: usize,
    /// `4/√N` for one pool.
    pub tolerance: f64,
}

/// Pool `p` at width index `i` uses realizations seeded
/// `seed.child(i).child(p).child(r)`. `limits[l-1]` is the limiting layer `l`.
pub fn cf_gap_experiment(
    config: &NetworkConfig,
    spec: &CfGapSpec,
    limits: &[ParticleLimit],
    seed: Seed,
) -> Result<Vec<CfGapRow>> {
    config.validate()?;
    let depth = spec.layers.iter().copied().max().ok_or_else(|| Error::domain("no layers requested"))?;
    if spec.layers.contains(&0) || limits.len() < depth {
        return Err(Error::domain(format!("limits for layers 1..={depth} are required")));
    }
    if spec.pools == 0 || spec.per_pool == 0 || spec.n_grid.is_empty() || spec.n_grid.contains(&0) {
        return Err(Error::domain("pools, realizations per pool and widths must be positive"));
    }
    let mut rows = Vec::new();
    for (i, &n) in spec.n_grid.iter().enumerate() {
        let cfg = NetworkConfig { width: n, depth, ..config.clone() };
        // gaps[p][j] is the gap of pool p at layer spec.layers[j].
        let gaps: Vec<(Vec<f64>, Vec<usize>)> = (0..spec.pools)
            .into_par_iter()
            .map(|p| {
                let pool_seed = seed.child(i as u64).child(p as u64);
                let mut pooled: Vec<Vec<Array2<f64>>> = vec![Vec::with_capacity(spec.per_pool); spec.layers.len()];
                for r in 0..spec.per_pool {
                    let real = simulate_joint(&cfg, n, pool_seed.child(r as u64))?;
                    for (j, &l) in spec.layers.iter().enumerate() {
                        pooled[j].push(real.layers[l - 1].draws.clone());
                    }
                }
                let mut out = Vec::with_capacity(spec.layers.len());
                let mut sizes = Vec::with_capacity(spec.layers.len());
                for (j, &l) in spec.layers.iter().enumerate() {
                    let views: Vec<_> = pooled[j].iter().map(|a| a.view()).collect();
                    let all = concatenate(Axis(0), &views).map_err(|e| Error::shape(e.to_string()))?;
                    let lim = &limits[l - 1];
                    let report = empirical_cf(all.view(), &spec.t_grid)?.against(|t| lim.cf(t));
                    out.push(report.max_abs_gap);
                    sizes.push(report.samples);
                }
                Ok((out, sizes))
            })
            .collect::<Result<_>>()?;
        for (j, &l) in spec.layers.iter().enumerate() {
            let pool_gaps: Vec<f64> = gaps.iter().map(|g| g.0[j]).collect();
            let samples = gaps[0].1[j];
            rows.push(CfGapRow {
                layer: l,
                n,
                median_gap: median(&pool_gaps),
                pool_gaps,
                samples_per_pool: samples,
                tolerance: 4.0 / (samples as f64).sqrt(),
            });
        }
    }
    Ok(rows)
}
