use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;

use super::cf::{empirical_cf, CfReport};
use crate::error::{Error, Result};
use crate::limit::ParticleLimit;
use crate::network::{simulate_joint, ActivationSpec, NetworkConfig};
use crate::numeric::{mean_and_se, norm};
use crate::seed::Seed;

/// Largest `|CF_Γ(t with t_r = 0) - CF_{Γ∖r}(t_{-r})|` over `t_grid`, where
/// `Γ∖r` is the measure with coordinate `r` (0-based) dropped. The identity
/// is exact, so the result should be at rounding level.
pub fn consistency_check(limit: &ParticleLimit, coord: usize, t_grid: &[Vec<f64>]) -> Result<f64> {
    let k = limit.dim();
    if k < 2 {
        return Err(Error::domain("dropping a coordinate needs k ≥ 2"));
    }
    let reduced = limit.measure.drop_coordinate(limit.alpha, coord)?;
    let mut worst: f64 = 0.0;
    for t in t_grid {
        if t.len() != k {
            return Err(Error::shape(format!("t of length {} for dimension {k}", t.len())));
        }
        let mut full = t.clone();
        full[coord] = 0.0;
        let short: Vec<f64> = t.iter().enumerate().filter(|&(i, _)| i != coord).map(|(_, &x)| x).collect();
        let lhs = limit.measure.cf(limit.alpha, &full);
        let rhs = reduced.cf(limit.alpha, &short);
        worst = worst.max((lhs - rhs).abs());
    }
    Ok(worst)
}

/// Weighted sum `T = Σ_{i∈L} p_i (f_i^(l) - b_i 1)` of the bias-free units
/// of one layer.
#[derive(Clone, Debug, PartialEq)]
pub struct CramerWoldSpec {
    pub layer: usize,
    /// Pairs `(i, p_i)` of 0-based unit indices and weights in `(0, 1)`
    /// summing to one.
    pub weights: Vec<(usize, f64)>,
    pub realizations: usize,
    /// Disjoint shifted copies of the index set used per realization.
    pub copies_per_realization: usize,
}

impl CramerWoldSpec {
    fn validate(&self, width: usize) -> Result<()> {
        let sum: f64 = self.weights.iter().map(|w| w.1).sum();
        if self.weights.is_empty()
            || self.weights.iter().any(|&(_, p)| !(p > 0.0 && p <= 1.0))
            || (sum - 1.0).abs() > 1e-12
        {
            return Err(Error::domain("weights must lie in (0, 1] and sum to 1"));
        }
        let mut idx: Vec<usize> = self.weights.iter().map(|w| w.0).collect();
        idx.sort_unstable();
        if idx.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::domain("unit indices must be distinct"));
        }
        if self.realizations == 0 || self.copies_per_realization == 0 {
            return Err(Error::domain("need at least one realization and one copy"));
        }
        let span = idx[idx.len() - 1] + 1;
        if span * self.copies_per_realization > width {
            return Err(Error::domain(format!(
                "{} copies of an index set spanning {span} units exceed width {width}",
                self.copies_per_realization
            )));
        }
        Ok(())
    }
}

/// Empirical CF of `T` over network realizations against the limiting CF
/// `exp(-Σ_i p_i^α ∫|s·t|^α Γ_w(ds))`, where `Γ_w` is the weight part (bias
/// pair removed) of the limiting layer measure `limit`.
pub fn cramer_wold_check(
    config: &NetworkConfig,
    spec: &CramerWoldSpec,
    limit: &ParticleLimit,
    t_grid: &[Vec<f64>],
    seed: Seed,
) -> Result<CfReport> {
    config.validate()?;
    spec.validate(config.width)?;
    if limit.layer != spec.layer || spec.layer == 0 || spec.layer > config.depth {
        return Err(Error::domain("limit layer and requested layer differ"));
    }
    let span = spec.weights.iter().map(|w| w.0).max().unwrap_or(0) + 1;
    let units = span * spec.copies_per_realization;
    let cfg = NetworkConfig { depth: spec.layer, ..config.clone() };
    let k = config.dim();
    let rows: Vec<Vec<f64>> = (0..spec.realizations)
        .into_par_iter()
        .map(|r| {
            let real = simulate_joint(&cfg, units, seed.child(r as u64))?;
            let top = &real.layers[spec.layer - 1].draws;
            let mut out = Vec::with_capacity(spec.copies_per_realization * k);
            for c in 0..spec.copies_per_realization {
                let mut t = vec![0.0; k];
                for &(i, p) in &spec.weights {
                    let unit = c * span + i;
                    let b = real.top_bias[unit];
                    for (tj, &f) in t.iter_mut().zip(top.row(unit).iter()) {
                        *tj += p * (f - b);
                    }
                }
                out.extend(t);
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    let n = flat.len() / k;
    let draws = Array2::from_shape_vec((n, k), flat).map_err(|e| Error::shape(e.to_string()))?;
    let a = config.alpha.get();
    let multiplier: f64 = spec.weights.iter().map(|w| w.1.powf(a)).sum();
    Ok(empirical_cf(draws.view(), t_grid)?.against(|t| (-multiplier * limit.weight_scale_u(t)).exp()))
}

/// Mean and standard error of `|φ(f)|^p` over the rows `f` of `draws`.
pub fn moment_estimate(draws: ArrayView2<f64>, activation: &ActivationSpec, p: f64) -> Result<(f64, f64)> {
    if !(p > 0.0 && p.is_finite()) {
        return Err(Error::domain(format!("moment exponent must be positive, got {p}")));
    }
    if draws.nrows() == 0 {
        return Err(Error::domain("empty batch"));
    }
    let values: Vec<f64> = draws
        .outer_iter()
        .map(|row| {
            let phi: Vec<f64> = row.iter().map(|&s| activation.eval(s)).collect();
            norm(&phi).powf(p)
        })
        .collect();
    Ok(mean_and_se(&values))
}
