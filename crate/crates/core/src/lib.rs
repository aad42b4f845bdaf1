//! Deep neural networks with symmetric α-stable weights.
//!
//! The crate simulates finite-width fully connected networks whose weights
//! and biases are i.i.d. symmetric α-stable, builds the discrete spectral
//! measures that describe their infinite-width limits, and provides the
//! Monte Carlo machinery used to check convergence empirically:
//! characteristic-function gaps, projection-scale gaps and their log-log
//! rates, tail bounds and exact marginalization identities.
//!
//! Module map:
//!
//! * [`stable`] univariate laws: exact sampling, CF, tail constant.
//! * [`spectral`] discrete spectral measures on the sphere and the
//!   multivariate laws they induce.
//! * [`network`] finite-width forward simulation (joint and sequential growth).
//! * [`limit`] the layer-by-layer particle recursion for the limit measures.
//! * [`diagnostics`] empirical CFs, KS tests, tail checks, rate fits.

pub mod diagnostics;
pub mod error;
pub mod limit;
pub mod network;
pub mod numeric;
pub mod quadrature;
pub mod seed;
pub mod spectral;
pub mod sphere;
pub mod stable;

pub use error::{Error, Result};
pub use limit::{LayerSampler, MeasureSampler, ParticleLimit, PropagateOptions};
pub use network::{Activation, ActivationSpec, Envelope, NetworkConfig};
pub use seed::Seed;
pub use spectral::{BatchMeta, InputMatrix, Regime, SampleBatch, SpectralMeasure};
pub use sphere::SphereGrid;
pub use stable::{Scale, StableIndex, StdStable};
