use crate::error::{Error, Result};

/// Smallest sample size for which the asymptotic p-value is reported.
pub const KS_MIN_SAMPLES: usize = 1000;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// Two-sample Kolmogorov–Smirnov test with the asymptotic Kolmogorov
/// p-value. Both samples need at least [`KS_MIN_SAMPLES`] finite values.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult> {
    if a.len() < KS_MIN_SAMPLES || b.len() < KS_MIN_SAMPLES {
        return Err(Error::Precondition(format!(
            "two-sample KS needs at least {KS_MIN_SAMPLES} values per sample, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    if a.iter().chain(b).any(|x| !x.is_finite()) {
        return Err(Error::domain("KS samples must be finite"));
    }
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (n, m) = (x.len(), y.len());
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < n && j < m {
        let v = x[i].min(y[j]);
        while i < n && x[i] <= v {
            i += 1;
        }
        while j < m && y[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let en = ((n * m) as f64 / (n + m) as f64).sqrt();
    Ok(KsResult { statistic: d, p_value: kolmogorov_survival(en * d) })
}

/// `P(K > λ)` for the Kolmogorov distribution.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.18 {
        // Jacobi-transformed series for the CDF converges fast for small λ.
        let pi2 = std::f64::consts::PI.powi(2);
        let mut cdf = 0.0;
        for j in 1..=20 {
            let odd = (2 * j - 1) as f64;
            cdf += (-odd * odd * pi2 / (8.0 * lambda * lambda)).exp();
        }
        cdf *= (2.0 * std::f64::consts::PI).sqrt() / lambda;
        (1.0 - cdf).clamp(0.0, 1.0)
    } else {
        let mut p = 0.0;
        for j in 1..=100 {
            let jf = j as f64;
            let term = (-2.0 * jf * jf * lambda * lambda).exp();
            p += if j % 2 == 1 { 2.0 * term } else { -2.0 * term };
            if term < 1e-17 {
                break;
            }
        }
        p.clamp(0.0, 1.0)
    }
}
