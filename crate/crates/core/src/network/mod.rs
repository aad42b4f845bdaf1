//! Finite-width deep stable networks.
//!
//! Layer one is `f_i^(1) = Σ_j w_ij x_j + b_i 1` and layer `l ≥ 2` is
//! `f_i^(l) = n^{-1/α} Σ_j w_ij φ(f_j^(l-1)) + b_i 1`, with all weights
//! i.i.d. St(α, σ_w) and biases i.i.d. St(α, σ_b). Rows of the matrices
//! below are units; columns are the `k` input signals.

mod activation;

pub use activation::{
    check_activation_envelope, envelope_grid, Activation, ActivationSpec, Envelope, EnvelopeReport, PiecewiseLinear,
};

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use rand_distr::Distribution;

use crate::error::{Error, Result};
use crate::limit::LayerSampler;
use crate::seed::Seed;
use crate::spectral::{gamma_first_layer, BatchMeta, InputMatrix, Regime, SampleBatch, SpectralMeasure};
use crate::stable::{StableIndex, StdStable};

#[derive(Clone, Debug, PartialEq)]
pub struct NetworkConfig {
    pub alpha: StableIndex,
    pub sigma_w: f64,
    pub sigma_b: f64,
    pub depth: usize,
    pub width: usize,
    pub activation: ActivationSpec,
    pub input: InputMatrix,
}

impl NetworkConfig {
    /// Number of evaluation points `k`.
    pub fn dim(&self) -> usize {
        self.input.dim()
    }

    pub fn validate(&self) -> Result<()> {
        for (name, s) in [("sigma_w", self.sigma_w), ("sigma_b", self.sigma_b)] {
            if !(s.is_finite() && s >= 0.0) {
                return Err(Error::domain(format!("{name} must be finite and non-negative, got {s}")));
            }
        }
        if self.depth == 0 || self.width == 0 {
            return Err(Error::domain("depth and width must be at least 1"));
        }
        Ok(())
    }

    /// Requirements for comparing against the stable limit: α < 2 and the
    /// growth envelope.
    pub fn validate_for_limits(&self) -> Result<()> {
        self.validate()?;
        self.alpha.heavy_tailed()?;
        self.activation.check_for_limits()
    }

    /// Requirements for the rate experiments: additionally φ bounded and
    /// strictly monotone and `{1, x_1, …, x_I}` spanning `R^k`.
    pub fn validate_for_rates(&self) -> Result<()> {
        self.validate_for_limits()?;
        self.activation.check_for_rates()?;
        if !self.input.spans() {
            return Err(Error::Precondition("span condition fails: {1, x_1, …, x_I} does not span R^k".into()));
        }
        Ok(())
    }

    /// `σ_b^α k^{α/2} + σ_w^α φ̄^α k^{α/2}`, the cap on every layer-≥2 spectral
    /// mass; `None` for unbounded activations.
    pub fn gamma_bar(&self) -> Option<f64> {
        let a = self.alpha.get();
        let sup = self.activation.sup_bound()?;
        let kk = (self.dim() as f64).powf(a / 2.0);
        Some(self.sigma_b.powf(a) * kk + self.sigma_w.powf(a) * sup.powf(a) * kk)
    }

    pub fn first_layer_measure(&self) -> Result<SpectralMeasure> {
        gamma_first_layer(&self.input, self.sigma_w, self.sigma_b, self.alpha)
    }
}

/// Layer one: row `i` is `Σ_j w_ij x_j + b_i 1`.
pub fn forward_first(input: &InputMatrix, weights: ArrayView2<f64>, bias: ArrayView1<f64>) -> Result<Array2<f64>> {
    if weights.ncols() != input.inputs() || weights.nrows() != bias.len() {
        return Err(Error::shape(format!(
            "weights {:?} and bias {} do not fit {} inputs",
            weights.dim(),
            bias.len(),
            input.inputs()
        )));
    }
    let mut out = weights.dot(&input.rows());
    out += &bias.insert_axis(Axis(1));
    Ok(out)
}

/// Layer `l ≥ 2`: `n^{-1/α} W φ(prev) + b 1ᵀ`, where `n = prev.nrows()`.
/// `weights` may have fewer rows than `n` to compute only leading units.
pub fn forward_layer(
    prev: ArrayView2<f64>,
    weights: ArrayView2<f64>,
    bias: ArrayView1<f64>,
    alpha: StableIndex,
    activation: &ActivationSpec,
) -> Result<Array2<f64>> {
    let n = prev.nrows();
    if n == 0 || weights.ncols() != n || weights.nrows() != bias.len() {
        return Err(Error::shape(format!(
            "weights {:?}, bias {} and previous layer {:?} are inconsistent",
            weights.dim(),
            bias.len(),
            prev.dim()
        )));
    }
    let activated = prev.mapv(|s| activation.eval(s));
    let mut out = weights.dot(&activated);
    out *= (n as f64).powf(-1.0 / alpha.get());
    out += &bias.insert_axis(Axis(1));
    Ok(out)
}

/// Total mass of the conditional spectral measure of the next layer,
/// `σ_b^α k^{α/2} + (σ_w^α / n) Σ_j |φ(f_j)|^α`.
pub fn conditional_mass(
    prev: ArrayView2<f64>,
    sigma_w: f64,
    sigma_b: f64,
    alpha: StableIndex,
    activation: &ActivationSpec,
) -> f64 {
    let a = alpha.get();
    let k = prev.ncols() as f64;
    let n = prev.nrows() as f64;
    let sum: f64 = prev
        .outer_iter()
        .map(|row| row.iter().map(|&s| activation.eval(s).powi(2)).sum::<f64>().sqrt().powf(a))
        .sum();
    sigma_b.powf(a) * k.powf(a / 2.0) + sigma_w.powf(a) * sum / n
}

/// Conditional spectral measure of layer `l` given the previous layer's units.
pub fn conditional_measure(
    prev: ArrayView2<f64>,
    sigma_w: f64,
    sigma_b: f64,
    alpha: StableIndex,
    activation: &ActivationSpec,
) -> Result<SpectralMeasure> {
    let a = alpha.get();
    let k = prev.ncols();
    let n = prev.nrows() as f64;
    let mut g = SpectralMeasure::with_capacity(k, prev.nrows() + 1);
    g.push_zeta(&vec![1.0; k], sigma_b.powf(a) * (k as f64).powf(a / 2.0))?;
    let scale = sigma_w.powf(a) / n;
    let mut phi = vec![0.0; k];
    for row in prev.outer_iter() {
        for (p, &s) in phi.iter_mut().zip(row.iter()) {
            *p = activation.eval(s);
        }
        let r = crate::numeric::norm(&phi);
        g.push_zeta(&phi, scale * r.powf(a))?;
    }
    Ok(g)
}

pub(crate) fn stable_matrix<R: Rng + ?Sized>(
    rows: usize,
    cols: usize,
    scale: f64,
    alpha: StableIndex,
    rng: &mut R,
) -> Array2<f64> {
    let dist = StdStable::new(alpha);
    Array2::from_shape_simple_fn((rows, cols), || scale * dist.sample(rng))
}

pub(crate) fn stable_vector<R: Rng + ?Sized>(len: usize, scale: f64, alpha: StableIndex, rng: &mut R) -> Array1<f64> {
    let dist = StdStable::new(alpha);
    Array1::from_shape_simple_fn(len, || scale * dist.sample(rng))
}

/// Weight and bias streams of one layer. Rows of `W` are drawn in order, so
/// the leading units of a layer do not depend on how many units are kept.
fn layer_params(
    config: &NetworkConfig,
    seed: Seed,
    layer: usize,
    rows: usize,
    cols: usize,
) -> (Array2<f64>, Array1<f64>) {
    let mut wr = seed.child(2 * layer as u64).rng();
    let mut br = seed.child(2 * layer as u64 + 1).rng();
    let w = stable_matrix(rows, cols, config.sigma_w, config.alpha, &mut wr);
    let b = stable_vector(rows, config.sigma_b, config.alpha, &mut br);
    (w, b)
}

/// One realization of the joint-growth network.
#[derive(Clone, Debug)]
pub struct JointRealization {
    /// Layer `l` (index `l-1`): the first `units` units.
    pub layers: Vec<SampleBatch>,
    /// Conditional spectral mass of each layer `l ≥ 2` given layer `l-1`.
    pub conditional_masses: Vec<f64>,
    /// Biases of the retained units of the top layer.
    pub top_bias: Array1<f64>,
}

/// Samples one network of width `config.width` and returns the first
/// `units` units of every layer. Weight matrices are drawn per layer and
/// dropped after use. For bounded activations every conditional mass is
/// checked against [`NetworkConfig::gamma_bar`].
pub fn simulate_joint(config: &NetworkConfig, units: usize, seed: Seed) -> Result<JointRealization> {
    config.validate()?;
    let n = config.width;
    if units == 0 || units > n {
        return Err(Error::domain(format!("cannot retain {units} units of a width-{n} network")));
    }
    let meta = |layer| BatchMeta { layer, width: Some(n), seed: seed.value(), regime: Regime::FiniteJoint };
    let bound = config.gamma_bar();
    let mut layers = Vec::with_capacity(config.depth);
    let mut masses = Vec::new();

    let rows = if config.depth == 1 { units } else { n };
    let (w, b) = layer_params(config, seed, 1, rows, config.input.inputs());
    let mut current = forward_first(&config.input, w.view(), b.view())?;
    let mut top_bias = b.slice(ndarray::s![..units]).to_owned();
    layers.push(SampleBatch::new(current.slice(ndarray::s![..units, ..]).to_owned(), meta(1))?);

    for l in 2..=config.depth {
        let mass = conditional_mass(current.view(), config.sigma_w, config.sigma_b, config.alpha, &config.activation);
        if let Some(bound) = bound {
            if mass > bound * (1.0 + 1e-12) {
                return Err(Error::MassBound { mass, bound });
            }
        }
        masses.push(mass);
        let rows = if l == config.depth { units } else { n };
        let (w, b) = layer_params(config, seed, l, rows, n);
        current = forward_layer(current.view(), w.view(), b.view(), config.alpha, &config.activation)?;
        top_bias = b;
        layers.push(SampleBatch::new(current.slice(ndarray::s![..units, ..]).to_owned(), meta(l))?);
    }
    Ok(JointRealization { layers, conditional_masses: masses, top_bias })
}

/// One realization of the sequential-growth layer `l`.
#[derive(Clone, Debug)]
pub struct SequentialRealization {
    /// The `n` i.i.d. draws of the limiting layer `l-1` the layer was built on.
    pub inputs: Array2<f64>,
    pub output: SampleBatch,
    pub conditional_mass: f64,
}

/// Width-`config.width` layer `layer ≥ 2` built on i.i.d. draws of the
/// limiting layer `layer - 1` supplied by `sampler`.
pub fn simulate_sequential<S: LayerSampler + ?Sized>(
    config: &NetworkConfig,
    layer: usize,
    sampler: &S,
    units: usize,
    seed: Seed,
) -> Result<SequentialRealization> {
    config.validate()?;
    let n = config.width;
    if layer < 2 {
        return Err(Error::domain("the sequential construction starts at layer 2"));
    }
    if sampler.layer() + 1 != layer || sampler.dim() != config.dim() {
        return Err(Error::domain(format!(
            "sampler provides layer {} in dimension {}, need layer {} in dimension {}",
            sampler.layer(),
            sampler.dim(),
            layer - 1,
            config.dim()
        )));
    }
    if units == 0 || units > n {
        return Err(Error::domain(format!("cannot retain {units} units of a width-{n} layer")));
    }
    let mut rng = seed.child(0).rng();
    let inputs = sampler.sample(n, &mut rng);
    let mass = conditional_mass(inputs.view(), config.sigma_w, config.sigma_b, config.alpha, &config.activation);
    if let Some(bound) = config.gamma_bar() {
        if mass > bound * (1.0 + 1e-12) {
            return Err(Error::MassBound { mass, bound });
        }
    }
    let (w, b) = layer_params(config, seed, layer, units, n);
    let out = forward_layer(inputs.view(), w.view(), b.view(), config.alpha, &config.activation)?;
    let meta = BatchMeta { layer, width: Some(n), seed: seed.value(), regime: Regime::FiniteSequential };
    Ok(SequentialRealization { inputs, output: SampleBatch::new(out, meta)?, conditional_mass: mass })
}
