pub mod figure;
pub mod limit;
pub mod rates;
pub mod sample;
pub mod verify;

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use ndarray::Array2;
use stable_depths::network::{ActivationSpec, Envelope, NetworkConfig};
use stable_depths::{InputMatrix, PropagateOptions, Seed, StableIndex};

use crate::config::Settings;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Outcome of a command: `false` when an enabled assertion failed.
pub type Passed = bool;

pub fn seed(s: &mut Settings) -> Result<Seed> {
    Ok(Seed::new(s.get("seed", 42u64)?))
}

pub fn out_dir(s: &mut Settings) -> PathBuf {
    PathBuf::from(s.string("out", "out"))
}

pub fn activation(s: &mut Settings) -> Result<ActivationSpec> {
    let activation = s.string("activation", "tanh").parse()?;
    let mut spec = ActivationSpec::new(activation);
    let envelope = s.string("envelope", "");
    if !envelope.is_empty() {
        let v: Vec<f64> = envelope
            .split(',')
            .map(|x| x.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .context("envelope must be `a,b,beta`")?;
        anyhow::ensure!(v.len() == 3, "envelope must be `a,b,beta`");
        spec = spec.with_envelope(Envelope::new(v[0], v[1], v[2])?);
    }
    Ok(spec)
}

/// Input rows from `inputs` (`;`-separated rows of comma-separated values)
/// or from the CSV file named by `input_file`.
pub fn input_matrix(s: &mut Settings) -> Result<InputMatrix> {
    let file = s.string("input_file", "");
    let text = if file.is_empty() {
        s.string("inputs", "1.0,-0.5;0.3,0.8").replace(';', "\n")
    } else {
        s.note("inputs", "<from input_file>");
        fs::read_to_string(&file).with_context(|| format!("reading input file {file}"))?
    };
    let rows: Vec<Vec<f64>> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| l.split(',').map(|x| x.trim().parse::<f64>()).collect::<std::result::Result<Vec<_>, _>>())
        .collect::<std::result::Result<_, _>>()
        .context("input rows must be comma-separated numbers")?;
    Ok(InputMatrix::from_rows(&rows)?)
}

pub fn network(s: &mut Settings) -> Result<NetworkConfig> {
    let config = NetworkConfig {
        alpha: StableIndex::new(s.get("alpha", 1.5)?)?,
        sigma_w: s.get("sigma_w", 1.0)?,
        sigma_b: s.get("sigma_b", 1.0)?,
        depth: s.get("depth", 2usize)?,
        width: s.get("n", 64usize)?,
        activation: activation(s)?,
        input: input_matrix(s)?,
    };
    s.note("k", config.dim());
    config.validate()?;
    Ok(config)
}

pub fn propagate_options(s: &mut Settings) -> Result<PropagateOptions> {
    let bins = s.get("coalesce_bins", 0usize)?;
    Ok(PropagateOptions { coalesce_bins: (bins > 0).then_some(bins) })
}

pub struct Output {
    dir: PathBuf,
}

impl Output {
    pub fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))?;
        Ok(Output { dir: dir.to_path_buf() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn file(&self, name: &str) -> Result<BufWriter<File>> {
        let p = self.path(name);
        Ok(BufWriter::new(File::create(&p).with_context(|| format!("creating {}", p.display()))?))
    }

    pub fn csv(&self, name: &str) -> Result<csv::Writer<File>> {
        let p = self.path(name);
        csv::Writer::from_path(&p).with_context(|| format!("creating {}", p.display()))
    }

    /// `config.resolved`: every setting as used, the tool version, the
    /// command, the root seed and any derived seed chains. The output
    /// directory itself is left out so that reruns elsewhere compare equal.
    pub fn write_resolved(
        &self,
        command: &str,
        settings: &Settings,
        root: Seed,
        seed_chains: &[(String, Vec<u64>)],
    ) -> Result<()> {
        let mut w = self.file("config.resolved")?;
        writeln!(w, "# stable-depths {VERSION}")?;
        writeln!(w, "command = {command}")?;
        writeln!(w, "tool_version = {VERSION}")?;
        for (k, v) in settings.resolved().iter().filter(|(k, _)| k.as_str() != "out") {
            writeln!(w, "{k} = {v}")?;
        }
        writeln!(w, "seed_chain.root = {}", root.value())?;
        for (name, chain) in seed_chains {
            let chain: Vec<String> = chain.iter().map(u64::to_string).collect();
            writeln!(w, "seed_chain.{name} = {}", chain.join(","))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Rows of `draws` as CSV records prefixed by `prefix`.
pub fn write_rows<W: Write>(w: &mut csv::Writer<W>, prefix: &[String], draws: &Array2<f64>, first_unit: usize) -> Result<()> {
    for (i, row) in draws.outer_iter().enumerate() {
        let mut rec = prefix.to_vec();
        rec.push((first_unit + i).to_string());
        rec.extend(row.iter().map(|&x| num(x)));
        w.write_record(&rec)?;
    }
    Ok(())
}

pub fn fmt_opt(x: Option<f64>) -> String {
    x.map_or(String::new(), num)
}

/// Shortest round-trip form, switching to exponent notation for very small
/// or very large magnitudes.
pub fn num(x: f64) -> String {
    let a = x.abs();
    if a != 0.0 && a.is_finite() && !(1e-4..1e15).contains(&a) {
        format!("{x:e}")
    } else {
        x.to_string()
    }
}
