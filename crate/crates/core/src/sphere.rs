//! Finite point sets standing in for the unit sphere `S^{k-1}`.
//!
//! Projection scales are even in `u`, so only one hemisphere is needed. For
//! `k = 2` the grid is `resolution` equally spaced angles on `[0, π)`; for
//! `k ≥ 3` it is a fixed-seed set of normalized Gaussian vectors.

use rand_distr::{Distribution, StandardNormal};

use crate::numeric::norm;
use crate::seed::Seed;

const GRID_SEED: u64 = 0x5eed_5feb;

#[derive(Clone, Debug, PartialEq)]
pub struct SphereGrid {
    dim: usize,
    resolution: usize,
    points: Vec<Vec<f64>>,
}

impl SphereGrid {
    pub fn new(dim: usize, resolution: usize) -> Self {
        assert!(dim >= 1 && resolution >= 1);
        let points = match dim {
            1 => vec![vec![1.0]],
            2 => (0..resolution)
                .map(|j| {
                    let t = std::f64::consts::PI * j as f64 / resolution as f64;
                    vec![t.cos(), t.sin()]
                })
                .collect(),
            k => {
                let mut rng = Seed::new(GRID_SEED).child(k as u64).rng();
                let mut pts = Vec::with_capacity(resolution);
                while pts.len() < resolution {
                    let v: Vec<f64> = (0..k).map(|_| StandardNormal.sample(&mut rng)).collect();
                    let r = norm(&v);
                    if r > 1e-12 {
                        pts.push(v.into_iter().map(|x| x / r).collect());
                    }
                }
                pts
            }
        };
        SphereGrid { dim, resolution, points }
    }

    /// 64 half-circle angles for `k = 2`, 256 points for `k ≥ 3`.
    pub fn default_for(dim: usize) -> Self {
        Self::new(dim, if dim <= 2 { 64 } else { 256 })
    }

    /// The same construction at twice the resolution.
    pub fn refined(&self) -> Self {
        Self::new(self.dim, self.resolution * 2)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn describe(&self) -> String {
        match self.dim {
            1 => "k=1 point {1}".to_string(),
            2 => format!("k=2 uniform half-circle, {} angles", self.resolution),
            k => format!("k={k} normalized gaussian, {} points, seed {GRID_SEED:#x}", self.resolution),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_points() {
        for k in 1..5 {
            let g = SphereGrid::default_for(k);
            for p in g.points() {
                assert!((norm(p) - 1.0).abs() < 1e-12);
            }
        }
        assert_eq!(SphereGrid::new(2, 64).points().len(), 64);
        assert_eq!(SphereGrid::new(3, 10).refined().points().len(), 20);
        assert_eq!(SphereGrid::new(3, 10), SphereGrid::new(3, 10));
    }
}
