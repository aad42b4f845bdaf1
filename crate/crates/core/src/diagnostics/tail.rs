use ndarray::ArrayView2;

use crate::error::{Error, Result};
use crate::stable::{tail_constant, StableIndex};

/// Outcome of comparing the tail bound `P(|S| > R) ≤ ε` with a batch.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TailReport {
    pub radius: f64,
    pub eps: f64,
    pub exceed_frac: f64,
    /// Binomial slack `3√(ε/N)` added to `ε`.
    pub slack: f64,
    pub holds: bool,
}

/// Smallest `R` with `R^{α/2} ≥ c(α) k Γ(S^{k-1})^{1/α} / ε`.
pub fn tail_radius(alpha: StableIndex, k: usize, total_mass: f64, eps: f64) -> Result<f64> {
    let alpha = alpha.heavy_tailed()?;
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::domain(format!("eps must lie in (0, 1], got {eps}")));
    }
    if k == 0 || !(total_mass.is_finite() && total_mass >= 0.0) {
        return Err(Error::domain("need k ≥ 1 and a finite non-negative mass"));
    }
    let a = alpha.get();
    let c = tail_constant(alpha)?;
    Ok((c * k as f64 * total_mass.powf(1.0 / a) / eps).powf(2.0 / a))
}

/// Empirical `P(|S| > R)` over the rows of `draws` against `ε + 3√(ε/N)`.
pub fn tail_check(draws: ArrayView2<f64>, alpha: StableIndex, total_mass: f64, eps: f64) -> Result<TailReport> {
    let n = draws.nrows();
    if n == 0 {
        return Err(Error::domain("empty batch"));
    }
    let radius = tail_radius(alpha, draws.ncols(), total_mass, eps)?;
    let exceed = draws.outer_iter().filter(|r| r.iter().map(|x| x * x).sum::<f64>().sqrt() > radius).count();
    let exceed_frac = exceed as f64 / n as f64;
    let slack = 3.0 * (eps / n as f64).sqrt();
    Ok(TailReport { radius, eps, exceed_frac, slack, holds: exceed_frac <= eps + slack })
}
