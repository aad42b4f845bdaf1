//! `figure`: one network realization evaluated on a `G × G` grid over
//! `[0,1]²` for each α. The `G²` grid points are the `k` inputs of a single
//! network; the two input rows are the x and y coordinates. Every α reuses
//! the same seed, so the surfaces differ only through α.
//!
//! Writes `figure_alpha_{α}.csv` (G rows of G values; row = y index) and
//! `figure_summary.csv`.

use std::io::Write;

use anyhow::{ensure, Result};
use stable_depths::network::simulate_joint;
use stable_depths::{InputMatrix, NetworkConfig, StableIndex};

use super::{num, activation, out_dir, seed, Output, Passed};
use crate::config::Settings;

#[derive(Clone, Debug, PartialEq)]
pub struct SurfaceStats {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub std: f64,
    pub excess_kurtosis: f64,
    pub max_adjacent_delta: f64,
    pub finite: bool,
}

pub fn surface_stats(values: &[f64], g: usize) -> SurfaceStats {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let m2 = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let m4 = values.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / n;
    let mut adjacent: f64 = 0.0;
    for y in 0..g {
        for x in 0..g {
            let v = values[y * g + x];
            if x + 1 < g {
                adjacent = adjacent.max((values[y * g + x + 1] - v).abs());
            }
            if y + 1 < g {
                adjacent = adjacent.max((values[(y + 1) * g + x] - v).abs());
            }
        }
    }
    SurfaceStats {
        min: values.iter().copied().fold(f64::INFINITY, f64::min),
        max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        mean,
        std: m2.sqrt(),
        excess_kurtosis: if m2 > 0.0 { m4 / (m2 * m2) - 3.0 } else { f64::NAN },
        max_adjacent_delta: adjacent,
        finite: values.iter().all(|v| v.is_finite()),
    }
}

/// The α = 0.5 surface must be leptokurtic and its excess kurtosis at least
/// `factor` times the magnitude of the Gaussian surface's.
pub fn kurtosis_contrast(heavy: f64, gaussian: f64, factor: f64) -> bool {
    heavy > 0.0 && heavy >= factor * gaussian.abs()
}

fn grid_inputs(g: usize) -> Result<InputMatrix> {
    let coord = |i: usize| if g == 1 { 0.0 } else { i as f64 / (g - 1) as f64 };
    let xs: Vec<f64> = (0..g * g).map(|i| coord(i % g)).collect();
    let ys: Vec<f64> = (0..g * g).map(|i| coord(i / g)).collect();
    Ok(InputMatrix::from_rows(&[xs, ys])?)
}

pub fn run(mut s: Settings) -> Result<Passed> {
    let seed = seed(&mut s)?;
    let out = out_dir(&mut s);
    let alphas = s.list("alphas", &[2.0, 1.5, 1.0, 0.5])?;
    let g = s.get("grid", 64usize)?;
    let width = s.get("n", 1024usize)?;
    let hidden = s.get("hidden", 2usize)?;
    let sigma_w = s.get("sigma_w", 1.0)?;
    let sigma_b = s.get("sigma_b", 1.0)?;
    let act = activation(&mut s)?;
    let factor = s.get("kurtosis_factor", 10.0)?;
    let assert_kurtosis = s.get("assert_kurtosis", true)?;
    s.finish("figure")?;
    ensure!(g >= 2 && hidden >= 1 && width >= 1, "need grid ≥ 2, hidden ≥ 1 and n ≥ 1");
    let indices: Vec<StableIndex> = alphas.iter().map(|&a| StableIndex::new(a)).collect::<Result<_, _>>()?;

    let input = grid_inputs(g)?;
    let output = Output::create(&out)?;
    output.write_resolved("figure", &s, seed, &[("figure".to_string(), vec![seed.value()])])?;

    let mut stats = Vec::new();
    for (alpha, a) in indices.iter().zip(&alphas) {
        let config = NetworkConfig {
            alpha: *alpha,
            sigma_w,
            sigma_b,
            depth: hidden + 1,
            width,
            activation: act.clone(),
            input: input.clone(),
        };
        let real = simulate_joint(&config, 1, seed)?;
        let values = real.layers[hidden].draws.row(0).to_vec();
        let mut w = output.file(&format!("figure_alpha_{a}.csv"))?;
        for row in values.chunks(g) {
            let line: Vec<String> = row.iter().map(|&v| num(v)).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        w.flush()?;
        stats.push((*a, surface_stats(&values, g)));
    }

    let mut w = output.csv("figure_summary.csv")?;
    w.write_record(["alpha", "min", "max", "mean", "std", "excess_kurtosis", "max_adjacent_delta", "finite"])?;
    for (a, st) in &stats {
        w.write_record([
            a.to_string(),
            num(st.min),
            num(st.max),
            num(st.mean),
            num(st.std),
            num(st.excess_kurtosis),
            num(st.max_adjacent_delta),
            st.finite.to_string(),
        ])?;
    }
    w.flush()?;

    let mut passed = stats.iter().all(|(_, st)| st.finite);
    let find = |x: f64| stats.iter().find(|(a, _)| *a == x).map(|(_, st)| st.excess_kurtosis);
    if let (true, Some(heavy), Some(gauss)) = (assert_kurtosis, find(0.5), find(2.0)) {
        passed &= kurtosis_contrast(heavy, gauss, factor);
    }
    Ok(passed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stats_of_known_values() {
        let v = [1.0, -1.0, 1.0, -1.0];
        let st = surface_stats(&v, 2);
        assert_eq!(st.mean, 0.0);
        assert_eq!(st.excess_kurtosis, -2.0);
        assert_eq!(st.max_adjacent_delta, 2.0);
        assert!(st.finite);
    }

    #[test]
    fn contrast_rule() {
        assert!(kurtosis_contrast(8.0, -0.5, 10.0));
        assert!(!kurtosis_contrast(4.0, -0.5, 10.0));
        assert!(!kurtosis_contrast(-1.0, -2.0, 10.0));
        assert!(kurtosis_contrast(30.0, 2.0, 10.0));
    }

    #[test]
    fn grid_rows_are_coordinates() {
        let x = grid_inputs(3).unwrap();
        assert_eq!(x.dim(), 9);
        assert_eq!(x.rows().row(0).to_vec(), vec![0.0, 0.5, 1.0, 0.0, 0.5, 1.0, 0.0, 0.5, 1.0]);
        assert_eq!(x.rows()[[1, 4]], 0.5);
    }
}
