//! Limiting spectral measures of the infinite-width network.
//!
//! Layer one is exact: `Γ^(1)` is a finite sum of ζ terms. For `l ≥ 2` the
//! limit `Γ^(l) = |σ_b 1|^α ζ_{1/|1|} + ∫ |σ_w φ(f)|^α ζ_{φ(f)/|φ(f)|} q^(l-1)(df)`
//! integrates over the law of the previous layer, so it is replaced by the
//! particle measure
//!
//! ```text
//! Γ̃^(l) = |σ_b 1|^α ζ_{1/|1|} + (σ_w^α / M) Σ_{j=1}^M |φ(f̃_j)|^α ζ_{φ(f̃_j)/|φ(f̃_j)|}
//! ```
//!
//! built from `M` exact draws `f̃_j ~ St_k(α, Γ̃^(l-1))`. In distribution this
//! is the same as sampling layer `l` of a width-`M` network built on
//! limiting inputs; keeping the measure makes limit CFs, projection scales
//! and marginals cheap to evaluate afterwards.
//!
//! Exact sampling from `Γ̃^(l)` costs `O(M)` per draw, so propagating a
//! further layer costs `O(M²)`. [`PropagateOptions::coalesce_bins`] samples
//! instead from a mass-preserving projection of `Γ̃^(l)` onto a direction
//! mesh (`k ≤ 2`), which costs `O(bins)` per draw; the exponent error this
//! introduces is recorded in [`ParticleLimit::sampling_error`].

use std::io::{BufRead, Write};

use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::network::{ActivationSpec, NetworkConfig};
use crate::numeric::{dot, norm};
use crate::seed::{Seed, StreamRng};
use crate::spectral::{CoalesceReport, SpectralMeasure};
use crate::sphere::SphereGrid;
use crate::stable::StableIndex;

/// Particles are drawn in fixed chunks, one child seed per chunk, so results
/// do not depend on the number of worker threads.
pub const PARTICLE_CHUNK: usize = 4096;

/// A source of i.i.d. draws of a limiting layer.
pub trait LayerSampler: Sync {
    fn layer(&self) -> usize;
    fn dim(&self) -> usize;
    fn sample(&self, count: usize, rng: &mut StreamRng) -> Array2<f64>;
}

/// Exact sampler of `St_k(α, Γ)` for a stored (possibly coalesced) measure.
#[derive(Clone, Debug)]
pub struct MeasureSampler {
    layer: usize,
    alpha: StableIndex,
    measure: SpectralMeasure,
    coalesce: Option<CoalesceReport>,
}

impl MeasureSampler {
    pub fn exact(limit: &ParticleLimit) -> Self {
        MeasureSampler { layer: limit.layer, alpha: limit.alpha, measure: limit.measure.clone(), coalesce: None }
    }

    /// Samples from the measure projected onto `bins` mesh directions;
    /// measures with at most `bins` pairs are used as they are.
    pub fn coalesced(limit: &ParticleLimit, bins: usize) -> Result<Self> {
        if limit.measure.pair_count() <= bins {
            return Ok(Self::exact(limit));
        }
        let (measure, report) = limit.measure.coalesce(limit.alpha, bins)?;
        Ok(MeasureSampler { layer: limit.layer, alpha: limit.alpha, measure, coalesce: Some(report) })
    }

    pub fn from_options(limit: &ParticleLimit, options: &PropagateOptions) -> Result<Self> {
        match options.coalesce_bins {
            Some(bins) => Self::coalesced(limit, bins),
            None => Ok(Self::exact(limit)),
        }
    }

    pub fn measure(&self) -> &SpectralMeasure {
        &self.measure
    }

    pub fn coalesce_report(&self) -> Option<CoalesceReport> {
        self.coalesce
    }
}

impl LayerSampler for MeasureSampler {
    fn layer(&self) -> usize {
        self.layer
    }

    fn dim(&self) -> usize {
        self.measure.dim()
    }

    fn sample(&self, count: usize, rng: &mut StreamRng) -> Array2<f64> {
        self.measure.sample(self.alpha, count, rng)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PropagateOptions {
    /// Sample the previous layer from a direction-mesh projection with this
    /// many bins. Off by default.
    pub coalesce_bins: Option<usize>,
}

/// The (particle approximation of the) limiting spectral measure of one layer.
#[derive(Clone, Debug, PartialEq)]
pub struct ParticleLimit {
    pub layer: usize,
    pub alpha: StableIndex,
    pub measure: SpectralMeasure,
    /// `None` for the exact layer-one measure.
    pub particles: Option<usize>,
    /// Seeds used for each propagation step, oldest first.
    pub seed_chain: Vec<u64>,
    /// Number of leading pairs that form the bias term (0 or 1).
    pub bias_pairs: usize,
    /// Accumulated bound on the CF-exponent error (at `|t| = 1`) introduced by
    /// sampling from coalesced measures; zero when no coalescing was used.
    pub sampling_error: f64,
}

impl ParticleLimit {
    /// The exact `Γ^(1)`.
    pub fn first_layer(config: &NetworkConfig) -> Result<Self> {
        let measure = config.first_layer_measure()?;
        Ok(ParticleLimit {
            layer: 1,
            alpha: config.alpha,
            measure,
            particles: None,
            seed_chain: Vec::new(),
            bias_pairs: usize::from(config.sigma_b > 0.0),
            sampling_error: 0.0,
        })
    }

    /// `Γ̃^(l+1)` from `M` draws of `St_k(α, Γ̃^(l))`.
    pub fn propagate(
        &self,
        activation: &ActivationSpec,
        sigma_w: f64,
        sigma_b: f64,
        particles: usize,
        seed: Seed,
        options: &PropagateOptions,
    ) -> Result<Self> {
        let alpha = self.alpha.heavy_tailed()?;
        if particles == 0 {
            return Err(Error::domain("particle count must be at least 1"));
        }
        let sampler = MeasureSampler::from_options(self, options)?;
        let k = self.measure.dim();
        let a = alpha.get();

        let chunks = particles.div_ceil(PARTICLE_CHUNK);
        let draws: Vec<Array2<f64>> = (0..chunks)
            .into_par_iter()
            .map(|c| {
                let len = PARTICLE_CHUNK.min(particles - c * PARTICLE_CHUNK);
                sampler.sample(len, &mut seed.child(c as u64).rng())
            })
            .collect();

        let mut measure = SpectralMeasure::with_capacity(k, particles + 1);
        measure.push_zeta(&vec![1.0; k], sigma_b.powf(a) * (k as f64).powf(a / 2.0))?;
        let weight = sigma_w.powf(a) / particles as f64;
        let mut phi = vec![0.0; k];
        for block in &draws {
            for row in block.outer_iter() {
                for (p, &s) in phi.iter_mut().zip(row.iter()) {
                    *p = activation.eval(s);
                }
                measure.push_zeta(&phi, weight * norm(&phi).powf(a))?;
            }
        }

        if let Some(sup) = activation.sup_bound() {
            let kk = (k as f64).powf(a / 2.0);
            let bound = sigma_b.powf(a) * kk + sigma_w.powf(a) * sup.powf(a) * kk;
            let mass = measure.total_mass();
            if mass > bound * (1.0 + 1e-12) {
                return Err(Error::MassBound { mass, bound });
            }
        }

        let mut seed_chain = self.seed_chain.clone();
        seed_chain.push(seed.value());
        let added = sampler.coalesce_report().map_or(0.0, |r| r.bound);
        Ok(ParticleLimit {
            layer: self.layer + 1,
            alpha,
            measure,
            particles: Some(particles),
            seed_chain,
            bias_pairs: usize::from(sigma_b > 0.0),
            sampling_error: self.sampling_error + added,
        })
    }

    /// Limits for layers `1..=depth`, layer `l ≥ 2` propagated with seed
    /// `seed.child(l)`.
    pub fn chain(
        config: &NetworkConfig,
        depth: usize,
        particles: usize,
        seed: Seed,
        options: &PropagateOptions,
    ) -> Result<Vec<Self>> {
        let mut out = vec![Self::first_layer(config)?];
        for l in 2..=depth {
            let next = out[l - 2].propagate(
                &config.activation,
                config.sigma_w,
                config.sigma_b,
                particles,
                seed.child(l as u64),
                options,
            )?;
            out.push(next);
        }
        Ok(out)
    }

    pub fn dim(&self) -> usize {
        self.measure.dim()
    }

    /// `γ^(l)(u) = ∫ |s·u|^α Γ̃^(l)(ds)`.
    pub fn limit_scale_u(&self, u: &[f64]) -> f64 {
        self.measure.projection_scale(u, self.alpha)
    }

    /// `limit_scale_u` without the bias term.
    pub fn weight_scale_u(&self, u: &[f64]) -> f64 {
        let a = self.alpha.get();
        self.measure.pairs().skip(self.bias_pairs).map(|(s, m)| m * dot(s, u).abs().powf(a)).sum()
    }

    pub fn scales_on(&self, grid: &SphereGrid) -> Vec<f64> {
        grid.points().iter().map(|u| self.limit_scale_u(u)).collect()
    }

    pub fn cf(&self, t: &[f64]) -> f64 {
        self.measure.cf(self.alpha, t)
    }

    pub fn write_text<W: Write>(&self, w: W) -> Result<()> {
        let chain: Vec<String> = self.seed_chain.iter().map(u64::to_string).collect();
        let comments = vec![
            format!("layer {}", self.layer),
            format!("particles {}", self.particles.map_or("exact".to_string(), |m| m.to_string())),
            format!("seed_chain {}", if chain.is_empty() { "-".to_string() } else { chain.join(",") }),
            format!("bias_pairs {}", self.bias_pairs),
            format!("sampling_error {}", self.sampling_error),
        ];
        self.measure.write_text(self.alpha, &comments, w)
    }

    pub fn read_text<R: BufRead>(r: R) -> Result<Self> {
        let (measure, alpha, comments) = SpectralMeasure::read_text(r)?;
        let bad = |m: &str| Error::Parse { line: 0, message: m.to_string() };
        let field = |key: &str| -> Result<String> {
            comments
                .iter()
                .find_map(|c| c.strip_prefix(key).map(|v| v.trim().to_string()))
                .ok_or_else(|| bad(&format!("missing `{key}` comment")))
        };
        let layer = field("layer")?.parse().map_err(|_| bad("bad layer"))?;
        let particles = match field("particles")?.as_str() {
            "exact" => None,
            m => Some(m.parse().map_err(|_| bad("bad particle count"))?),
        };
        let seed_chain = match field("seed_chain")?.as_str() {
            "-" => Vec::new(),
            s => s.split(',').map(|x| x.parse().map_err(|_| bad("bad seed"))).collect::<Result<_>>()?,
        };
        let bias_pairs = field("bias_pairs")?.parse().map_err(|_| bad("bad bias_pairs"))?;
        let sampling_error = field("sampling_error")?.parse().map_err(|_| bad("bad sampling_error"))?;
        Ok(ParticleLimit { layer, alpha, measure, particles, seed_chain, bias_pairs, sampling_error })
    }
}

/// `σ_b^α |1·u|^α + (σ_w^α / n) Σ_j |φ(f_j)·u|^α` for each `u` of `grid`,
/// where the rows of `prev` are the `n` previous-layer units of one network.
pub fn empirical_scales(
    prev: ArrayView2<f64>,
    grid: &SphereGrid,
    sigma_w: f64,
    sigma_b: f64,
    alpha: StableIndex,
    activation: &ActivationSpec,
) -> Vec<f64> {
    let activated = prev.mapv(|s| activation.eval(s));
    let k = prev.ncols();
    let n = prev.nrows() as f64;
    let a = alpha.get();
    let activated = activated.as_standard_layout();
    let rows = activated.as_slice().expect("standard layout");
    grid.points()
        .iter()
        .map(|u| {
            let bias = sigma_b.powf(a) * u.iter().sum::<f64>().abs().powf(a);
            let sum: f64 = rows.chunks_exact(k).map(|r| dot(r, u).abs().powf(a)).sum();
            bias + sigma_w.powf(a) * sum / n
        })
        .collect()
}

/// [`empirical_scales`] at a single direction.
pub fn empirical_scale_u(
    prev: ArrayView2<f64>,
    u: &[f64],
    sigma_w: f64,
    sigma_b: f64,
    alpha: StableIndex,
    activation: &ActivationSpec,
) -> f64 {
    let a = alpha.get();
    let n = prev.nrows() as f64;
    let bias = sigma_b.powf(a) * u.iter().sum::<f64>().abs().powf(a);
    let sum: f64 = prev
        .outer_iter()
        .map(|r| r.iter().zip(u).map(|(&s, ui)| activation.eval(s) * ui).sum::<f64>().abs().powf(a))
        .sum();
    bias + sigma_w.powf(a) * sum / n
}

/// `max_u |γ_n(u) - γ(u)|` over the grid, from precomputed scale vectors.
pub fn sup_gap(empirical: &[f64], limit: &[f64]) -> f64 {
    empirical.iter().zip(limit).map(|(e, l)| (e - l).abs()).fold(0.0, f64::max)
}

/// Grid maximum of `|γ_n^(l)(u) - γ^(l)(u)|` for one set of previous-layer units.
pub fn scale_supremum_gap(
    limit: &ParticleLimit,
    prev: ArrayView2<f64>,
    grid: &SphereGrid,
    sigma_w: f64,
    sigma_b: f64,
    activation: &ActivationSpec,
) -> f64 {
    let emp = empirical_scales(prev, grid, sigma_w, sigma_b, limit.alpha, activation);
    sup_gap(&emp, &limit.scales_on(grid))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::InputMatrix;

    fn config(sigma_w: f64) -> NetworkConfig {
        NetworkConfig {
            alpha: StableIndex::new(1.5).unwrap(),
            sigma_w,
            sigma_b: 1.0,
            depth: 3,
            width: 32,
            activation: ActivationSpec::tanh(),
            input: InputMatrix::from_rows(&[vec![1.0, -0.5], vec![0.3, 0.8]]).unwrap(),
        }
    }

    #[test]
    fn zero_weight_scale_leaves_bias_pair() {
        let c = config(0.0);
        let chain = ParticleLimit::chain(&c, 3, 500, Seed::new(1), &PropagateOptions::default()).unwrap();
        let expected = 2f64.powf(0.75);
        for l in &chain {
            assert_eq!(l.measure.pair_count(), 1);
            assert!((l.measure.total_mass() - expected).abs() < 1e-12);
        }
        let u = [0.6, 0.8];
        let exact = 1.4f64.powf(1.5);
        assert!((chain[2].limit_scale_u(&u) - exact).abs() < 1e-12);
        assert_eq!(chain[2].limit_scale_u(&[0.0, 0.0]), 0.0);
    }

    #[test]
    fn mass_between_bias_and_cap() {
        let c = config(1.0);
        let chain = ParticleLimit::chain(&c, 3, 2000, Seed::new(2), &PropagateOptions::default()).unwrap();
        let cap = c.gamma_bar().unwrap();
        for l in &chain[1..] {
            let m = l.measure.total_mass();
            assert!(m >= 2f64.powf(0.75) && m <= cap);
            assert!(l.measure.pair_count() <= 2001);
        }
    }

    #[test]
    fn empirical_scale_special_cases() {
        let c = config(1.0);
        let zeros = Array2::<f64>::zeros((10, 2));
        let u = [0.6, -0.8];
        let v = empirical_scale_u(zeros.view(), &u, 1.0, 2.0, c.alpha, &c.activation);
        assert!((v - 2f64.powf(1.5) * 0.2f64.powf(1.5)).abs() < 1e-14);
        let one = ndarray::array![[0.4, -1.0]];
        let v = empirical_scale_u(one.view(), &u, 1.0, 0.0, c.alpha, &c.activation);
        let expect = (0.6 * 0.4f64.tanh() - 0.8 * (-1.0f64).tanh()).abs().powf(1.5);
        assert!((v - expect).abs() < 1e-14);
        let grid = SphereGrid::new(2, 8);
        let all = empirical_scales(one.view(), &grid, 1.0, 0.0, c.alpha, &c.activation);
        for (p, s) in grid.points().iter().zip(&all) {
            let single = empirical_scale_u(one.view(), p, 1.0, 0.0, c.alpha, &c.activation);
            assert!((single - s).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_weight_gap_vanishes() {
        let c = config(0.0);
        let chain = ParticleLimit::chain(&c, 2, 100, Seed::new(3), &PropagateOptions::default()).unwrap();
        let mut rng = Seed::new(4).rng();
        let prev = chain[0].measure.sample(c.alpha, 64, &mut rng);
        let gap = scale_supremum_gap(&chain[1], prev.view(), &SphereGrid::new(2, 64), 0.0, 1.0, &c.activation);
        assert!(gap < 1e-12);
    }

    #[test]
    fn text_round_trip() {
        let c = config(1.0);
        let chain = ParticleLimit::chain(&c, 2, 50, Seed::new(5), &PropagateOptions::default()).unwrap();
        for l in &chain {
            let mut buf = Vec::new();
            l.write_text(&mut buf).unwrap();
            assert_eq!(&ParticleLimit::read_text(&buf[..]).unwrap(), l);
        }
    }

    #[test]
    fn propagation_is_deterministic() {
        let c = config(1.0);
        let opts = PropagateOptions { coalesce_bins: Some(64) };
        let a = ParticleLimit::chain(&c, 3, 5000, Seed::new(6), &opts).unwrap();
        let b = ParticleLimit::chain(&c, 3, 5000, Seed::new(6), &opts).unwrap();
        assert_eq!(a, b);
        assert!(a[2].sampling_error > 0.0);
        assert_eq!(a[1].sampling_error, 0.0);
    }
}
