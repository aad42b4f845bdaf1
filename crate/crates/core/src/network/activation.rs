//! Activation functions and the sub-linear growth envelope
//! `|φ(s)| ≤ a + b|s|^β` (β < 1) that the stable limit needs.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Linear interpolation between knots, clamped outside the table.
#[derive(Clone, Debug, PartialEq)]
pub struct PiecewiseLinear {
    knots: Vec<f64>,
    values: Vec<f64>,
}

impl PiecewiseLinear {
    pub fn new(knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if knots.len() < 2 || knots.len() != values.len() {
            return Err(Error::domain("a table activation needs at least two (knot, value) pairs"));
        }
        if knots.windows(2).any(|w| w[1] <= w[0]) || knots.iter().chain(&values).any(|x| !x.is_finite()) {
            return Err(Error::domain("table knots must be finite and strictly increasing"));
        }
        Ok(PiecewiseLinear { knots, values })
    }

    pub fn eval(&self, s: f64) -> f64 {
        let n = self.knots.len();
        if s <= self.knots[0] {
            return self.values[0];
        }
        if s >= self.knots[n - 1] {
            return self.values[n - 1];
        }
        let i = self.knots.partition_point(|&k| k <= s) - 1;
        let (x0, x1) = (self.knots[i], self.knots[i + 1]);
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        y0 + (y1 - y0) * (s - x0) / (x1 - x0)
    }

    fn sup(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Activation {
    Tanh,
    /// `1 / (1 + e^{-s})`
    Logistic,
    /// `exp(-s²/2)`
    GaussianBump,
    Table(PiecewiseLinear),
    /// `sign(s)|s|^p`, unbounded but sub-linear for `p < 1`.
    SignedPower(f64),
    Identity,
}

impl Activation {
    #[inline]
    pub fn eval(&self, s: f64) -> f64 {
        match self {
            Activation::Tanh => s.tanh(),
            Activation::Logistic => 1.0 / (1.0 + (-s).exp()),
            Activation::GaussianBump => (-0.5 * s * s).exp(),
            Activation::Table(t) => t.eval(s),
            Activation::SignedPower(p) => s.signum() * s.abs().powf(*p),
            Activation::Identity => s,
        }
    }

    /// `sup_s |φ(s)|` when finite.
    pub fn sup_bound(&self) -> Option<f64> {
        match self {
            Activation::Tanh | Activation::Logistic | Activation::GaussianBump => Some(1.0),
            Activation::Table(t) => Some(t.sup()),
            Activation::SignedPower(_) | Activation::Identity => None,
        }
    }

    pub fn is_bounded(&self) -> bool {
        self.sup_bound().is_some()
    }

    /// Strict monotonicity on all of R (a clamped table is flat in its tails).
    pub fn is_strictly_monotone(&self) -> bool {
        match self {
            Activation::Tanh | Activation::Logistic | Activation::Identity => true,
            Activation::SignedPower(p) => *p > 0.0,
            Activation::GaussianBump | Activation::Table(_) => false,
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Activation::Tanh => write!(f, "tanh"),
            Activation::Logistic => write!(f, "logistic"),
            Activation::GaussianBump => write!(f, "gaussian"),
            Activation::SignedPower(p) => write!(f, "power:{p}"),
            Activation::Identity => write!(f, "identity"),
            Activation::Table(t) => {
                write!(f, "table:")?;
                for (i, (k, v)) in t.knots.iter().zip(&t.values).enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{k}:{v}")?;
                }
                Ok(())
            }
        }
    }
}

impl FromStr for Activation {
    type Err = Error;

    /// `tanh`, `logistic`, `gaussian`, `identity`, `power:<p>` or
    /// `table:<s>:<φ(s)>,<s>:<φ(s)>,…`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = |m: &str| Error::domain(format!("unrecognized activation `{s}`: {m}"));
        match s {
            "tanh" => return Ok(Activation::Tanh),
            "logistic" | "sigmoid" => return Ok(Activation::Logistic),
            "gaussian" | "gaussian-bump" => return Ok(Activation::GaussianBump),
            "identity" => return Ok(Activation::Identity),
            _ => {}
        }
        if let Some(p) = s.strip_prefix("power:") {
            let p: f64 = p.parse().map_err(|_| bad("bad exponent"))?;
            if !(p > 0.0 && p.is_finite()) {
                return Err(bad("exponent must be positive"));
            }
            return Ok(Activation::SignedPower(p));
        }
        if let Some(body) = s.strip_prefix("table:") {
            let mut knots = Vec::new();
            let mut values = Vec::new();
            for pair in body.split(',') {
                let (k, v) = pair.split_once(':').ok_or_else(|| bad("expected knot:value"))?;
                knots.push(k.trim().parse().map_err(|_| bad("bad knot"))?);
                values.push(v.trim().parse().map_err(|_| bad("bad value"))?);
            }
            return Ok(Activation::Table(PiecewiseLinear::new(knots, values)?));
        }
        Err(bad("unknown kind"))
    }
}

/// Constants of `|φ(s)| ≤ a + b|s|^β`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Envelope {
    pub a: f64,
    pub b: f64,
    pub beta: f64,
}

impl Envelope {
    pub fn new(a: f64, b: f64, beta: f64) -> Result<Self> {
        if !(a >= 0.0 && b >= 0.0 && a.is_finite() && b.is_finite()) {
            return Err(Error::domain("envelope constants a, b must be finite and non-negative"));
        }
        if !(beta > 0.0 && beta < 1.0) {
            return Err(Error::domain(format!("envelope exponent must lie in (0, 1), got {beta}")));
        }
        Ok(Envelope { a, b, beta })
    }

    pub fn bound(&self, s: f64) -> f64 {
        self.a + self.b * s.abs().powf(self.beta)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ActivationSpec {
    pub activation: Activation,
    pub envelope: Envelope,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnvelopeReport {
    pub holds: bool,
    /// `max |φ(s)| / (a + b|s|^β)` over the grid.
    pub worst_ratio: f64,
}

impl ActivationSpec {
    /// Activation with a nominal envelope: `(φ̄, 0, ½)` for bounded activations,
    /// `(0, 1, p)` for `power:p` with `p < 1`, `(1, 1, ½)` otherwise.
    pub fn new(activation: Activation) -> Self {
        let envelope = match (&activation, activation.sup_bound()) {
            (_, Some(sup)) => Envelope { a: sup, b: 0.0, beta: 0.5 },
            (Activation::SignedPower(p), None) if *p < 1.0 => Envelope { a: 0.0, b: 1.0, beta: *p },
            _ => Envelope { a: 1.0, b: 1.0, beta: 0.5 },
        };
        ActivationSpec { activation, envelope }
    }

    pub fn tanh() -> Self {
        Self::new(Activation::Tanh)
    }

    pub fn with_envelope(mut self, envelope: Envelope) -> Self {
        self.envelope = envelope;
        self
    }

    #[inline]
    pub fn eval(&self, s: f64) -> f64 {
        self.activation.eval(s)
    }

    pub fn sup_bound(&self) -> Option<f64> {
        self.activation.sup_bound()
    }

    /// Envelope requirement for the infinite-width limit. Built-in bounded
    /// activations satisfy it by construction; anything else is checked on
    /// [`envelope_grid`].
    pub fn check_for_limits(&self) -> Result<()> {
        if matches!(self.activation, Activation::Tanh | Activation::Logistic | Activation::GaussianBump) {
            return Ok(());
        }
        let report = check_activation_envelope(self, &envelope_grid());
        if report.holds {
            Ok(())
        } else {
            Err(Error::Precondition(format!(
                "activation {} violates |φ(s)| ≤ {} + {}|s|^{} (worst ratio {})",
                self.activation, self.envelope.a, self.envelope.b, self.envelope.beta, report.worst_ratio
            )))
        }
    }

    /// Rate results need φ continuous, strictly monotone and bounded.
    pub fn check_for_rates(&self) -> Result<()> {
        self.check_for_limits()?;
        if !self.activation.is_bounded() {
            return Err(Error::Precondition(format!("activation {} is not bounded", self.activation)));
        }
        if !self.activation.is_strictly_monotone() {
            return Err(Error::Precondition(format!("activation {} is not strictly monotone", self.activation)));
        }
        Ok(())
    }
}

/// A dense core on `[-10, 10]` plus a logarithmic sweep out to `|s| = 10⁶`.
pub fn envelope_grid() -> Vec<f64> {
    let mut grid: Vec<f64> = (-2000..=2000).map(|i| i as f64 * 0.005).collect();
    for i in 0..=250 {
        let s = 10f64.powf(1.0 + 5.0 * i as f64 / 250.0);
        grid.push(s);
        grid.push(-s);
    }
    grid
}

/// Checks `|φ(s)| ≤ a + b|s|^β` on `grid`.
pub fn check_activation_envelope(spec: &ActivationSpec, grid: &[f64]) -> EnvelopeReport {
    let mut worst = 0.0f64;
    for &s in grid {
        let phi = spec.eval(s).abs();
        let bound = spec.envelope.bound(s);
        let ratio = if bound > 0.0 {
            phi / bound
        } else if phi == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        worst = worst.max(ratio);
    }
    EnvelopeReport { holds: worst <= 1.0 + 1e-12, worst_ratio: worst }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn envelope_examples() {
        let grid = envelope_grid();
        let tanh = ActivationSpec::tanh().with_envelope(Envelope::new(1.0, 0.0, 0.5).unwrap());
        assert!(check_activation_envelope(&tanh, &grid).holds);

        let id = ActivationSpec::new(Activation::Identity).with_envelope(Envelope::new(3.0, 2.0, 0.9).unwrap());
        let r = check_activation_envelope(&id, &grid);
        assert!(!r.holds && r.worst_ratio > 1.0);
        assert!(id.check_for_limits().is_err());

        let pow = ActivationSpec::new(Activation::SignedPower(0.4)).with_envelope(Envelope::new(0.0, 1.0, 0.4).unwrap());
        let r = check_activation_envelope(&pow, &grid);
        assert!(r.holds);
        assert_eq!(r.worst_ratio, 1.0);
    }

    #[test]
    fn envelope_validation() {
        assert!(Envelope::new(1.0, 0.0, 1.0).is_err());
        assert!(Envelope::new(-1.0, 0.0, 0.5).is_err());
    }

    #[test]
    fn rate_admissibility() {
        assert!(ActivationSpec::tanh().check_for_rates().is_ok());
        assert!(ActivationSpec::new(Activation::Logistic).check_for_rates().is_ok());
        assert!(ActivationSpec::new(Activation::GaussianBump).check_for_rates().is_err());
        let pow = ActivationSpec::new(Activation::SignedPower(0.5));
        assert!(pow.check_for_limits().is_ok());
        assert!(pow.check_for_rates().is_err());
    }

    #[test]
    fn table_interpolates_and_clamps() {
        let t: Activation = "table:-1:-2,0:0,2:1".parse().unwrap();
        assert_eq!(t.eval(-5.0), -2.0);
        assert_eq!(t.eval(-0.5), -1.0);
        assert_eq!(t.eval(1.0), 0.5);
        assert_eq!(t.eval(9.0), 1.0);
        assert_eq!(t.sup_bound(), Some(2.0));
        assert!(!t.is_strictly_monotone());
        assert!(ActivationSpec::new(t).check_for_limits().is_ok());
    }

    #[test]
    fn parse_round_trip() {
        for s in ["tanh", "logistic", "gaussian", "identity", "power:0.5", "table:-1:-1,1:1"] {
            let a: Activation = s.parse().unwrap();
            assert_eq!(a.to_string(), s);
        }
        assert!("relu".parse::<Activation>().is_err());
    }
}
