//! Discrete symmetric spectral measures on the unit sphere `S^{k-1}` and
//! the multivariate symmetric α-stable laws `St_k(α, Γ)` they induce.
//!
//! A law `St_k(α, Γ)` has CF `exp(-∫ |s·t|^α Γ(ds))`. Every measure here is
//! built from symmetrized two-atom terms `ζ_h = (δ_{h/|h|} + δ_{-h/|h|})/2`,
//! so it is stored as a list of antipodal pairs: one representative
//! direction and the total mass of the pair. [`SpectralMeasure::atoms`]
//! expands the pairs back into individual atoms.

use std::io::{BufRead, Write};

use ndarray::{Array2, ArrayView2};
use rand::Rng;
use rand_distr::Distribution;

use crate::error::{Error, Result};
use crate::numeric::{dot, norm};
use crate::stable::{StableIndex, StdStable};

/// Directions must be unit length to this tolerance once stored.
pub const UNIT_TOL: f64 = 1e-12;
/// Constructors renormalize directions whose norm is within this of 1.
pub const RENORMALIZE_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct SpectralMeasure {
    dim: usize,
    // row-major, one representative direction per antipodal pair
    directions: Vec<f64>,
    pair_masses: Vec<f64>,
}

impl SpectralMeasure {
    /// The zero measure on `S^{dim-1}`.
    pub fn new(dim: usize) -> Self {
        assert!(dim >= 1, "spectral measure needs dimension ≥ 1");
        SpectralMeasure { dim, directions: Vec::new(), pair_masses: Vec::new() }
    }

    pub fn with_capacity(dim: usize, pairs: usize) -> Self {
        let mut m = Self::new(dim);
        m.directions.reserve(pairs * dim);
        m.pair_masses.reserve(pairs);
        m
    }

    /// Adds `total_mass · ζ_{h/|h|}`. Zero vectors and zero masses add nothing.
    pub fn push_zeta(&mut self, h: &[f64], total_mass: f64) -> Result<()> {
        if h.len() != self.dim {
            return Err(Error::shape(format!("vector of length {} for dimension {}", h.len(), self.dim)));
        }
        if !(total_mass.is_finite() && total_mass >= 0.0) {
            return Err(Error::domain(format!("mass must be finite and non-negative, got {total_mass}")));
        }
        let r = norm(h);
        if !r.is_finite() {
            return Err(Error::domain("direction must be finite"));
        }
        if r == 0.0 || total_mass == 0.0 {
            return Ok(());
        }
        self.directions.extend(h.iter().map(|x| x / r));
        self.pair_masses.push(total_mass);
        Ok(())
    }

    /// Adds an antipodal pair along an (almost) unit direction.
    pub fn push_pair(&mut self, direction: &[f64], total_mass: f64) -> Result<()> {
        let r = norm(direction);
        if (r - 1.0).abs() > RENORMALIZE_TOL {
            return Err(Error::domain(format!("direction norm {r} is not 1")));
        }
        if (r - 1.0).abs() > UNIT_TOL || direction.len() != self.dim || total_mass == 0.0 {
            return self.push_zeta(direction, total_mass);
        }
        if !(total_mass.is_finite() && total_mass > 0.0) {
            return Err(Error::domain(format!("mass must be finite and non-negative, got {total_mass}")));
        }
        self.directions.extend_from_slice(direction);
        self.pair_masses.push(total_mass);
        Ok(())
    }

    /// Builds a measure from individual atoms, which must come in
    /// consecutive antipodal pairs of equal mass.
    pub fn from_atoms(dim: usize, atoms: &[(Vec<f64>, f64)]) -> Result<Self> {
        if !atoms.len().is_multiple_of(2) {
            return Err(Error::domain("atoms must come in antipodal pairs"));
        }
        let mut m = Self::with_capacity(dim, atoms.len() / 2);
        for pair in atoms.chunks(2) {
            let (s, ms) = (&pair[0].0, pair[0].1);
            let (t, mt) = (&pair[1].0, pair[1].1);
            if s.len() != dim || t.len() != dim {
                return Err(Error::shape("atom direction has the wrong dimension"));
            }
            let antipodal = s.iter().zip(t).all(|(a, b)| (a + b).abs() <= UNIT_TOL);
            if !antipodal || (ms - mt).abs() > UNIT_TOL * ms.abs().max(1.0) || ms <= 0.0 {
                return Err(Error::domain("atoms are not symmetric antipodal pairs with equal positive masses"));
            }
            m.push_pair(s, ms + mt)?;
        }
        Ok(m)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn pair_count(&self) -> usize {
        self.pair_masses.len()
    }

    pub fn atom_count(&self) -> usize {
        2 * self.pair_masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pair_masses.is_empty()
    }

    /// Iterates over `(direction, total pair mass)`.
    pub fn pairs(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        self.directions.chunks_exact(self.dim).zip(self.pair_masses.iter().copied())
    }

    /// Iterates over individual atoms `(direction, mass)`, `+s` then `-s`.
    pub fn atoms(&self) -> impl Iterator<Item = (Vec<f64>, f64)> + '_ {
        self.pairs().flat_map(|(s, m)| {
            let neg: Vec<f64> = s.iter().map(|x| -x).collect();
            [(s.to_vec(), 0.5 * m), (neg, 0.5 * m)]
        })
    }

    pub fn total_mass(&self) -> f64 {
        self.pair_masses.iter().sum()
    }

    /// `∫ |s·u|^α Γ(ds)`, the α-th power of the scale of the projection on `u`.
    pub fn projection_scale(&self, u: &[f64], alpha: StableIndex) -> f64 {
        debug_assert_eq!(u.len(), self.dim);
        let a = alpha.get();
        self.pairs().map(|(s, m)| m * dot(s, u).abs().powf(a)).sum()
    }

    /// CF of `St_k(α, Γ)` at `t`.
    pub fn cf(&self, alpha: StableIndex, t: &[f64]) -> f64 {
        (-self.projection_scale(t, alpha)).exp()
    }

    /// Scale of the marginal on coordinate `coord` (0-based).
    pub fn marginal_scale(&self, alpha: StableIndex, coord: usize) -> Result<f64> {
        if coord >= self.dim {
            return Err(Error::Index { index: coord, dim: self.dim });
        }
        let a = alpha.get();
        let s: f64 = self.pairs().map(|(s, m)| m * s[coord].abs().powf(a)).sum();
        Ok(s.powf(1.0 / a))
    }

    /// Spectral measure of the law with coordinate `coord` removed.
    ///
    /// Each atom `(s, m)` maps to `(s₋ / |s₋|, m·|s₋|^α)`; atoms with
    /// `s₋ = 0` vanish. The CF of the result at `t'` equals the CF of `self`
    /// at `t'` with a zero inserted at `coord`.
    pub fn drop_coordinate(&self, alpha: StableIndex, coord: usize) -> Result<Self> {
        if self.dim < 2 {
            return Err(Error::domain("cannot marginalize a one-dimensional measure"));
        }
        if coord >= self.dim {
            return Err(Error::Index { index: coord, dim: self.dim });
        }
        let a = alpha.get();
        let mut out = Self::with_capacity(self.dim - 1, self.pair_count());
        let mut reduced = Vec::with_capacity(self.dim - 1);
        for (s, m) in self.pairs() {
            reduced.clear();
            reduced.extend(s.iter().enumerate().filter(|&(i, _)| i != coord).map(|(_, &x)| x));
            let r = norm(&reduced);
            if r > 0.0 {
                out.push_zeta(&reduced, m * r.powf(a))?;
            }
        }
        Ok(out)
    }

    /// Exact draws from `St_k(α, Γ)` as rows of a `count × k` matrix.
    ///
    /// Uses `X = Σ_pairs m^{1/α} Z s` with i.i.d. standard `Z`; one variate
    /// per antipodal pair suffices because `Z` is symmetric.
    pub fn sample<R: Rng + ?Sized>(&self, alpha: StableIndex, count: usize, rng: &mut R) -> Array2<f64> {
        let k = self.dim;
        let dist = StdStable::new(alpha);
        let inv = 1.0 / alpha.get();
        let coefs: Vec<f64> = self.pair_masses.iter().map(|m| m.powf(inv)).collect();
        let mut out = Array2::<f64>::zeros((count, k));
        for mut row in out.rows_mut() {
            let row = row.as_slice_mut().expect("standard layout");
            for (s, c) in self.directions.chunks_exact(k).zip(&coefs) {
                let z = c * dist.sample(rng);
                for (x, si) in row.iter_mut().zip(s) {
                    *x += z * si;
                }
            }
        }
        out
    }

    /// Mass-preserving projection of a `k = 2` measure onto `bins` equally
    /// spaced directions of the half circle (linear splitting between the
    /// two neighbouring mesh directions). `k = 1` merges all pairs exactly.
    pub fn coalesce(&self, alpha: StableIndex, bins: usize) -> Result<(Self, CoalesceReport)> {
        match self.dim {
            1 => {
                let mut out = Self::new(1);
                out.push_zeta(&[1.0], self.total_mass())?;
                Ok((out, CoalesceReport { bins: 1, bound: 0.0, observed: 0.0 }))
            }
            2 => self.coalesce_circle(alpha, bins),
            k => Err(Error::domain(format!("direction-mesh coalescing is implemented for k ≤ 2, got k = {k}"))),
        }
    }

    fn coalesce_circle(&self, alpha: StableIndex, bins: usize) -> Result<(Self, CoalesceReport)> {
        use std::f64::consts::PI;
        if bins < 2 {
            return Err(Error::domain("coalescing needs at least two bins"));
        }
        let h = PI / bins as f64;
        let mut mesh = vec![0.0; bins];
        for (s, m) in self.pairs() {
            let mut theta = s[1].atan2(s[0]);
            if theta < 0.0 {
                theta += PI;
            }
            let pos = (theta / h).min(bins as f64);
            let j = (pos.floor() as usize).min(bins - 1);
            let frac = pos - j as f64;
            mesh[j] += m * (1.0 - frac);
            mesh[(j + 1) % bins] += m * frac;
        }
        let mut out = Self::with_capacity(2, bins);
        for (j, &m) in mesh.iter().enumerate() {
            if m > 0.0 {
                let t = j as f64 * h;
                out.push_zeta(&[t.cos(), t.sin()], m)?;
            }
        }
        let a = alpha.get();
        let per_unit = if a >= 1.0 { a * h / 2.0 } else { (h / 2.0).powf(a) };
        let bound = self.total_mass() * per_unit;
        let observed = (0..4 * 64)
            .map(|i| {
                let t = PI * i as f64 / 256.0;
                let u = [t.cos(), t.sin()];
                (self.projection_scale(&u, alpha) - out.projection_scale(&u, alpha)).abs()
            })
            .fold(0.0, f64::max);
        Ok((out, CoalesceReport { bins, bound, observed }))
    }

    /// Writes the plain-text form: optional `#` comment lines, a header
    /// `k alpha`, then one `s_1 … s_k mass` line per atom.
    pub fn write_text<W: Write>(&self, alpha: StableIndex, comments: &[String], mut w: W) -> Result<()> {
        for c in comments {
            writeln!(w, "# {c}")?;
        }
        writeln!(w, "{} {}", self.dim, alpha.get())?;
        for (s, m) in self.atoms() {
            for x in &s {
                write!(w, "{x} ")?;
            }
            writeln!(w, "{m}")?;
        }
        Ok(())
    }

    /// Parses [`write_text`](Self::write_text) output, returning the measure,
    /// α, and the comment lines (without the `#`).
    pub fn read_text<R: BufRead>(r: R) -> Result<(Self, StableIndex, Vec<String>)> {
        let mut comments = Vec::new();
        let mut header: Option<(usize, StableIndex)> = None;
        let mut atoms = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            let line_no = i + 1;
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            if let Some(c) = trimmed.strip_prefix('#') {
                comments.push(c.trim().to_string());
                continue;
            }
            let fields: Vec<f64> = trimmed
                .split_whitespace()
                .map(|f| f.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Parse { line: line_no, message: e.to_string() })?;
            match header {
                None => {
                    if fields.len() != 2 || fields[0] < 1.0 || fields[0].fract() != 0.0 {
                        return Err(Error::Parse { line: line_no, message: "expected header `k alpha`".into() });
                    }
                    header = Some((fields[0] as usize, StableIndex::new(fields[1])?));
                }
                Some((k, _)) => {
                    if fields.len() != k + 1 {
                        return Err(Error::Parse {
                            line: line_no,
                            message: format!("expected {} fields, found {}", k + 1, fields.len()),
                        });
                    }
                    atoms.push((fields[..k].to_vec(), fields[k]));
                }
            }
        }
        let (k, alpha) = header.ok_or(Error::Parse { line: 0, message: "missing header".into() })?;
        Ok((Self::from_atoms(k, &atoms)?, alpha, comments))
    }
}

/// Accuracy of a coalesced measure, in units of the CF exponent at `|t| = 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoalesceReport {
    pub bins: usize,
    /// Worst-case bound from the modulus of continuity of `θ ↦ |cos θ|^α`.
    pub bound: f64,
    /// Largest observed exponent gap on a 256-point half-circle grid.
    pub observed: f64,
}

/// `total_mass · ζ_{h/|h|}` on its own.
pub fn zeta_measure(h: &[f64], total_mass: f64) -> Result<SpectralMeasure> {
    let mut m = SpectralMeasure::new(h.len().max(1));
    if h.is_empty() {
        return Err(Error::shape("empty vector"));
    }
    m.push_zeta(h, total_mass)?;
    Ok(m)
}

/// The `I × k` matrix of input signals, one row `x_j ∈ R^k` per input.
#[derive(Clone, Debug, PartialEq)]
pub struct InputMatrix {
    rows: Array2<f64>,
    spans: bool,
}

impl InputMatrix {
    pub fn new(rows: Array2<f64>) -> Result<Self> {
        if rows.nrows() == 0 || rows.ncols() == 0 {
            return Err(Error::shape("input matrix needs I ≥ 1 rows and k ≥ 1 columns"));
        }
        if rows.iter().any(|x| !x.is_finite()) {
            return Err(Error::domain("input matrix has non-finite entries"));
        }
        let spans = spans_with_ones(rows.view());
        Ok(InputMatrix { rows, spans })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let k = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != k) {
            return Err(Error::shape("ragged input rows"));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        let arr = Array2::from_shape_vec((rows.len(), k), flat).map_err(|e| Error::shape(e.to_string()))?;
        Self::new(arr)
    }

    /// Number of input signals `I`.
    pub fn inputs(&self) -> usize {
        self.rows.nrows()
    }

    /// Number of evaluation points `k`.
    pub fn dim(&self) -> usize {
        self.rows.ncols()
    }

    pub fn rows(&self) -> ArrayView2<'_, f64> {
        self.rows.view()
    }

    /// Whether `{1, x_1, …, x_I}` spans `R^k`.
    pub fn spans(&self) -> bool {
        self.spans
    }
}

fn spans_with_ones(rows: ArrayView2<f64>) -> bool {
    let k = rows.ncols();
    let mut m: Vec<Vec<f64>> = std::iter::once(vec![1.0; k]).chain(rows.outer_iter().map(|r| r.to_vec())).collect();
    let scale = m.iter().flatten().fold(0.0f64, |a, x| a.max(x.abs()));
    let tol = 1e-10 * scale.max(1.0);
    let mut rank = 0;
    for col in 0..k {
        let pivot = (rank..m.len()).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()));
        let Some(p) = pivot else { break };
        if m[p][col].abs() <= tol {
            continue;
        }
        m.swap(rank, p);
        for r in 0..m.len() {
            if r != rank {
                let f = m[r][col] / m[rank][col];
                if f != 0.0 {
                    for c in col..k {
                        m[r][c] -= f * m[rank][c];
                    }
                }
            }
        }
        rank += 1;
    }
    rank == k
}

/// The layer-one spectral measure
/// `Γ^(1) = |σ_b 1|^α ζ_{1/|1|} + σ_w^α Σ_j |x_j|^α ζ_{x_j/|x_j|}`.
pub fn gamma_first_layer(input: &InputMatrix, sigma_w: f64, sigma_b: f64, alpha: StableIndex) -> Result<SpectralMeasure> {
    let a = alpha.get();
    let k = input.dim();
    let mut g = SpectralMeasure::with_capacity(k, input.inputs() + 1);
    g.push_zeta(&vec![1.0; k], sigma_b.powf(a) * (k as f64).powf(a / 2.0))?;
    for x in input.rows().outer_iter() {
        let x = x.to_vec();
        g.push_zeta(&x, sigma_w.powf(a) * norm(&x).powf(a))?;
    }
    Ok(g)
}

/// Which construction produced a [`SampleBatch`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Regime {
    FiniteJoint,
    FiniteSequential,
    LimitParticle,
}

impl Regime {
    pub fn tag(self) -> &'static str {
        match self {
            Regime::FiniteJoint => "finite-joint",
            Regime::FiniteSequential => "finite-sequential",
            Regime::LimitParticle => "limit-particle",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BatchMeta {
    pub layer: usize,
    /// Network width, or particle count for limit draws; `None` for exact draws.
    pub width: Option<usize>,
    pub seed: u64,
    pub regime: Regime,
}

/// `N × k` draws with provenance.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleBatch {
    pub draws: Array2<f64>,
    pub meta: BatchMeta,
}

impl SampleBatch {
    pub fn new(draws: Array2<f64>, meta: BatchMeta) -> Result<Self> {
        if draws.nrows() == 0 {
            return Err(Error::shape("sample batch needs at least one draw"));
        }
        if draws.iter().any(|x| !x.is_finite()) {
            return Err(Error::domain("sample batch contains non-finite values"));
        }
        Ok(SampleBatch { draws, meta })
    }

    pub fn len(&self) -> usize {
        self.draws.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.draws.ncols()
    }
}

/// Exact draws of `St_k(α, Γ)` packaged as a batch.
pub fn sample_stable_vector<R: Rng + ?Sized>(
    g: &SpectralMeasure,
    alpha: StableIndex,
    count: usize,
    rng: &mut R,
    meta: BatchMeta,
) -> Result<SampleBatch> {
    SampleBatch::new(g.sample(alpha, count, rng), meta)
}
