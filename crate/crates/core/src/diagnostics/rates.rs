use ndarray::Array2;
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::limit::{empirical_scales, sup_gap, LayerSampler, MeasureSampler, ParticleLimit, PropagateOptions};
use crate::network::{simulate_joint, NetworkConfig};
use crate::numeric::median;
use crate::seed::Seed;
use crate::sphere::SphereGrid;

/// What the reported gaps measure. The sup-norm distance between densities
/// has no computable form, so the gap of the projection-scale functional
/// `γ(u) = ∫|s·u|^α Γ(ds)`, which bounds it, is used instead.
pub const GAP_FUNCTIONAL: &str = "max over sphere grid of |gamma_n(u) - gamma(u)| (projection-scale proxy for the density sup-norm)";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RateRegime {
    /// Every layer of a width-`n` network.
    Joint,
    /// Width-`n` layer built on exact draws of the limiting previous layer.
    Sequential,
}

impl RateRegime {
    pub fn tag(self) -> &'static str {
        match self {
            RateRegime::Joint => "joint",
            RateRegime::Sequential => "sequential",
        }
    }
}

/// Admissible joint-growth rate thresholds `δ̄_l` for `l = 2..=depth`:
/// `δ̄_2 = 1/2`, `δ̄_l = δ̄_{l-1} / (1 + 2k/α)`.
pub fn joint_thresholds(depth: usize, k: usize, alpha: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut d = 0.5;
    for l in 2..=depth {
        if l > 2 {
            d /= 1.0 + 2.0 * k as f64 / alpha;
        }
        out.push(d);
    }
    out
}

#[derive(Clone, Debug)]
pub struct RateSpec {
    pub regime: RateRegime,
    pub layer: usize,
    pub n_grid: Vec<usize>,
    pub repeats: usize,
    pub grid: SphereGrid,
    /// Sampling of limiting layers for the sequential regime.
    pub options: PropagateOptions,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RateReport {
    pub regime: RateRegime,
    pub layer: usize,
    pub n_grid: Vec<usize>,
    pub repeats: usize,
    /// Median over repeats of the grid-maximum gap, per `n`.
    pub median_gaps: Vec<f64>,
    pub slope: Option<f64>,
    /// Half-width of the 95% confidence interval of the slope.
    pub slope_halfwidth: Option<f64>,
    /// `1/2` for the sequential regime, `δ̄_l` for the joint regime.
    pub theory_delta: f64,
    pub degenerate: bool,
    pub grid: String,
    /// Median gap at the largest `n` on the refined grid minus that on the
    /// working grid.
    pub grid_refinement_delta: f64,
    pub functional: &'static str,
}

/// Gap between the empirical and limiting projection scales of layer `l`
/// across a grid of widths. `limits` must hold the limiting layers
/// `1..=l` (index `l-1` is layer `l`). Repeat `r` at grid index `i` uses
/// seed `seed.child(i).child(r)`, so reports are reproducible bit for bit.
pub fn rate_experiment(config: &NetworkConfig, spec: &RateSpec, limits: &[ParticleLimit], seed: Seed) -> Result<RateReport> {
    config.validate_for_rates()?;
    let l = spec.layer;
    if l < 2 {
        return Err(Error::domain("rates are defined for layers l ≥ 2"));
    }
    if limits.len() < l || limits[l - 1].layer != l {
        return Err(Error::domain(format!("limits for layers 1..={l} are required")));
    }
    if spec.n_grid.len() < 4 || spec.n_grid.windows(2).any(|w| w[0] >= w[1]) || spec.n_grid[0] == 0 {
        return Err(Error::domain("n grid must be strictly increasing with at least 4 positive points"));
    }
    if spec.repeats < 8 {
        return Err(Error::domain("at least 8 repeats are required"));
    }
    if spec.grid.dim() != config.dim() {
        return Err(Error::shape("sphere grid dimension differs from k"));
    }
    let refined = spec.grid.refined();
    let last = spec.n_grid.len() - 1;
    let mut median_gaps = Vec::with_capacity(spec.n_grid.len());
    let mut refinement = 0.0;
    for (i, &n) in spec.n_grid.iter().enumerate() {
        let gaps = gap_samples(config, spec, limits, n, &spec.grid, seed.child(i as u64))?;
        median_gaps.push(median(&gaps));
        if i == last {
            let fine = gap_samples(config, spec, limits, n, &refined, seed.child(i as u64))?;
            refinement = median(&fine) - median(&gaps);
        }
    }

    // Gaps at rounding level relative to the layer mass carry no rate.
    let floor = 1e-12 * limits[l - 1].measure.total_mass().max(f64::MIN_POSITIVE);
    let degenerate = median_gaps.iter().any(|&g| !(g > floor));
    let (slope, slope_halfwidth) = if degenerate {
        (None, None)
    } else {
        let x: Vec<f64> = spec.n_grid.iter().map(|&n| (n as f64).ln()).collect();
        let y: Vec<f64> = median_gaps.iter().map(|g| g.ln()).collect();
        let (b, hw) = ols_slope(&x, &y);
        (Some(b), Some(hw))
    };
    let theory_delta = match spec.regime {
        RateRegime::Sequential => 0.5,
        RateRegime::Joint => joint_thresholds(l, config.dim(), config.alpha.get())[l - 2],
    };
    Ok(RateReport {
        regime: spec.regime,
        layer: l,
        n_grid: spec.n_grid.clone(),
        repeats: spec.repeats,
        median_gaps,
        slope,
        slope_halfwidth,
        theory_delta,
        degenerate,
        grid: spec.grid.describe(),
        grid_refinement_delta: refinement,
        functional: GAP_FUNCTIONAL,
    })
}

/// Grid-maximum gaps of layer `spec.layer` at width `n`, one per repeat;
/// repeat `r` uses seed `seed.child(r)`. Only the regime, layer, repeats and
/// options of `spec` are used.
pub fn gap_samples(
    config: &NetworkConfig,
    spec: &RateSpec,
    limits: &[ParticleLimit],
    n: usize,
    grid: &SphereGrid,
    seed: Seed,
) -> Result<Vec<f64>> {
    let l = spec.layer;
    if l < 2 || limits.len() < l || limits[l - 1].layer != l {
        return Err(Error::domain(format!("limits for layers 1..={l} are required")));
    }
    if grid.dim() != config.dim() || n == 0 {
        return Err(Error::shape("sphere grid dimension differs from k, or n = 0"));
    }
    let sampler = match spec.regime {
        RateRegime::Sequential => Some(MeasureSampler::from_options(&limits[l - 2], &spec.options)?),
        RateRegime::Joint => None,
    };
    let limit_scales = limits[l - 1].scales_on(grid);
    (0..spec.repeats)
        .into_par_iter()
        .map(|r| {
            let s = seed.child(r as u64);
            let prev: Array2<f64> = match &sampler {
                Some(sm) => sm.sample(n, &mut s.rng()),
                None => {
                    let cfg = NetworkConfig { width: n, depth: l - 1, ..config.clone() };
                    let real = simulate_joint(&cfg, n, s)?;
                    real.layers.into_iter().last().expect("depth ≥ 1").draws
                }
            };
            let emp = empirical_scales(prev.view(), grid, config.sigma_w, config.sigma_b, config.alpha, &config.activation);
            Ok(sup_gap(&emp, &limit_scales))
        })
        .collect()
}

/// Least-squares slope and the half-width of its 95% Student-t interval.
fn ols_slope(x: &[f64], y: &[f64]) -> (f64, f64) {
    let m = x.len() as f64;
    let mx = x.iter().sum::<f64>() / m;
    let my = y.iter().sum::<f64>() / m;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let dof = m - 2.0;
    let se = (rss / dof / sxx).sqrt();
    let t = StudentsT::new(0.0, 1.0, dof).map(|d| d.inverse_cdf(0.975)).unwrap_or(f64::INFINITY);
    (slope, t * se)
}
