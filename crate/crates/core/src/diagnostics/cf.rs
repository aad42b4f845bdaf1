use ndarray::ArrayView2;

use crate::error::{Error, Result};
use crate::numeric::{dot, exact_sum};
use crate::sphere::SphereGrid;

/// Empirical characteristic function of a batch on a grid of `t` vectors,
/// optionally compared against an analytic (real) CF.
#[derive(Clone, Debug, PartialEq)]
pub struct CfReport {
    pub t_grid: Vec<Vec<f64>>,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
    pub se_re: Vec<f64>,
    pub se_im: Vec<f64>,
    pub samples: usize,
    pub analytic: Vec<f64>,
    /// `max_t |ĉ(t) - c(t)|` (complex modulus); NaN before [`CfReport::against`].
    pub max_abs_gap: f64,
    /// Per-point tolerance `4/√N`.
    pub tolerance: f64,
    /// Grid points whose gap exceeds the tolerance.
    pub violations: usize,
}

impl CfReport {
    /// Fills in the analytic CF and the gap statistics.
    pub fn against<F: Fn(&[f64]) -> f64>(mut self, cf: F) -> Self {
        self.analytic = self.t_grid.iter().map(|t| cf(t)).collect();
        let gaps: Vec<f64> = self.gaps();
        self.max_abs_gap = gaps.iter().copied().fold(0.0, f64::max);
        self.violations = gaps.iter().filter(|&&g| g > self.tolerance).count();
        self
    }

    pub fn gaps(&self) -> Vec<f64> {
        self.re.iter().zip(&self.im).zip(&self.analytic).map(|((r, i), a)| (r - a).hypot(*i)).collect()
    }

    /// Sanity flag for symmetric laws: every imaginary part within three
    /// standard errors of zero.
    pub fn imaginary_parts_small(&self) -> bool {
        self.im.iter().zip(&self.se_im).all(|(i, se)| i.abs() <= 3.0 * se + 1e-12)
    }

    pub fn passes(&self) -> bool {
        !self.analytic.is_empty() && self.violations == 0
    }
}

/// `N^{-1} Σ_j exp(i f_j·t)` with standard errors, for rows `f_j` of `draws`.
/// Sums are exact, so a batch closed under negation has imaginary part 0.
pub fn empirical_cf(draws: ArrayView2<f64>, t_grid: &[Vec<f64>]) -> Result<CfReport> {
    let n = draws.nrows();
    if n == 0 {
        return Err(Error::domain("empty batch"));
    }
    let k = draws.ncols();
    if let Some(t) = t_grid.iter().find(|t| t.len() != k) {
        return Err(Error::shape(format!("t of length {} for dimension {k}", t.len())));
    }
    let rows = draws.as_standard_layout();
    let flat = rows.as_slice().expect("standard layout");
    let nf = n as f64;
    let mut out = CfReport {
        t_grid: t_grid.to_vec(),
        re: Vec::with_capacity(t_grid.len()),
        im: Vec::with_capacity(t_grid.len()),
        se_re: Vec::with_capacity(t_grid.len()),
        se_im: Vec::with_capacity(t_grid.len()),
        samples: n,
        analytic: Vec::new(),
        max_abs_gap: f64::NAN,
        tolerance: 4.0 / nf.sqrt(),
        violations: 0,
    };
    let mut cos = vec![0.0; n];
    let mut sin = vec![0.0; n];
    for t in t_grid {
        for (j, row) in flat.chunks_exact(k).enumerate() {
            let (s, c) = dot(row, t).sin_cos();
            cos[j] = c;
            sin[j] = s;
        }
        let re = exact_sum(cos.iter().copied()) / nf;
        let im = exact_sum(sin.iter().copied()) / nf;
        let var = |v: &[f64], m: f64| {
            if n < 2 {
                0.0
            } else {
                v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (nf - 1.0)
            }
        };
        out.se_re.push((var(&cos, re) / nf).sqrt());
        out.se_im.push((var(&sin, im) / nf).sqrt());
        out.re.push(re);
        out.im.push(im);
    }
    Ok(out)
}

/// Twenty `t` vectors: radii `{0.25, 0.5, 0.75, 1, 1.5}` along four
/// directions (the axes and diagonals for `k = 2`).
pub fn standard_t_grid(k: usize) -> Vec<Vec<f64>> {
    let radii = [0.25, 0.5, 0.75, 1.0, 1.5];
    let directions: Vec<Vec<f64>> = match k {
        1 => vec![vec![1.0], vec![2.0], vec![2.5], vec![3.0]],
        2 => SphereGrid::new(2, 4).points().to_vec(),
        _ => SphereGrid::new(k, 4).points().to_vec(),
    };
    directions
        .iter()
        .flat_map(|d| radii.iter().map(move |r| d.iter().map(|x| x * r).collect()))
        .collect()
}
