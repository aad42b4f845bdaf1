//! `sample`: draws of network units under one of three regimes.
//!
//! * `joint`: every layer of a width-`n` network;
//! * `sequential`: layer `l ≥ 2` of width `n` built on i.i.d. draws of the
//!   limiting layer `l-1`;
//! * `limit`: direct draws from the (particle) limiting layer.

use anyhow::{bail, Result};
use stable_depths::limit::LayerSampler;
use stable_depths::network::{simulate_joint, simulate_sequential};
use stable_depths::{MeasureSampler, NetworkConfig, ParticleLimit};

use super::{network, out_dir, propagate_options, seed, write_rows, Output, Passed, VERSION};
use crate::config::{join, Settings};

pub fn run(mut s: Settings) -> Result<Passed> {
    let config = network(&mut s)?;
    let seed = seed(&mut s)?;
    let out = out_dir(&mut s);
    let regime = s.string("regime", "joint");
    let realizations = s.get("realizations", 1usize)?;
    let units = s.get("units", config.width)?;
    let all: Vec<usize> = (1..=config.depth).collect();
    let layers = s.list("layers", &all)?;
    let needs_limit = regime != "joint";
    let particles = if needs_limit { s.get("particles", 100_000usize)? } else { 0 };
    let options = if needs_limit { propagate_options(&mut s)? } else { Default::default() };
    s.finish("sample")?;

    if !matches!(regime.as_str(), "joint" | "sequential" | "limit") {
        bail!("regime must be joint, sequential or limit, got `{regime}`");
    }
    if layers.iter().any(|&l| l == 0 || l > config.depth) {
        bail!("layers must lie in 1..={}", config.depth);
    }
    if units == 0 || (regime != "limit" && units > config.width) {
        bail!("units must lie in 1..={}", config.width);
    }
    if realizations == 0 {
        bail!("realizations must be at least 1");
    }

    let limit_seed = seed.named("limit");
    let limits = if needs_limit {
        let top = if regime == "limit" { config.depth } else { config.depth.saturating_sub(1).max(1) };
        ParticleLimit::chain(&config, top, particles, limit_seed, &options)?
    } else {
        Vec::new()
    };

    let output = Output::create(&out)?;
    let mut chains: Vec<(String, Vec<u64>)> =
        limits.iter().map(|l| (format!("limit_l{}", l.layer), l.seed_chain.clone())).collect();
    chains.push(("sample".into(), vec![seed.value(), seed.named("sample").value()]));
    output.write_resolved("sample", &s, seed, &chains)?;

    let mut file = output.file("samples.csv")?;
    {
        use std::io::Write;
        let meta = [
            ("tool", format!("stable-depths {VERSION}")),
            ("regime", regime.clone()),
            ("alpha", config.alpha.get().to_string()),
            ("sigma_w", config.sigma_w.to_string()),
            ("sigma_b", config.sigma_b.to_string()),
            ("depth", config.depth.to_string()),
            ("width", config.width.to_string()),
            ("k", config.dim().to_string()),
            ("activation", config.activation.activation.to_string()),
            ("seed", seed.value().to_string()),
            ("units", units.to_string()),
            ("realizations", realizations.to_string()),
            ("layers", join(&layers)),
        ];
        for (k, v) in meta {
            writeln!(file, "#{k}={v}")?;
        }
    }
    let mut w = csv::Writer::from_writer(file);
    let mut header = vec!["layer".to_string(), "realization".to_string(), "unit".to_string()];
    header.extend((1..=config.dim()).map(|j| format!("x{j}")));
    w.write_record(&header)?;

    let sample_seed = seed.named("sample");
    match regime.as_str() {
        "joint" => {
            let top = *layers.iter().max().expect("non-empty");
            let cfg = NetworkConfig { depth: top, ..config.clone() };
            for r in 0..realizations {
                let real = simulate_joint(&cfg, units, sample_seed.child(r as u64))?;
                for &l in &layers {
                    write_rows(&mut w, &[l.to_string(), r.to_string()], &real.layers[l - 1].draws, 0)?;
                }
            }
        }
        "sequential" => {
            for r in 0..realizations {
                let rs = sample_seed.child(r as u64);
                for &l in &layers {
                    let draws = if l == 1 {
                        let cfg = NetworkConfig { depth: 1, ..config.clone() };
                        simulate_joint(&cfg, units, rs.child(1))?.layers.remove(0).draws
                    } else {
                        let sampler = MeasureSampler::from_options(&limits[l - 2], &options)?;
                        simulate_sequential(&config, l, &sampler, units, rs.child(l as u64))?.output.draws
                    };
                    write_rows(&mut w, &[l.to_string(), r.to_string()], &draws, 0)?;
                }
            }
        }
        _ => {
            for &l in &layers {
                let sampler = MeasureSampler::from_options(&limits[l - 1], &options)?;
                for r in 0..realizations {
                    let draws = sampler.sample(units, &mut sample_seed.child(l as u64).child(r as u64).rng());
                    write_rows(&mut w, &[l.to_string(), r.to_string()], &draws, 0)?;
                }
            }
        }
    }
    w.flush()?;
    Ok(true)
}
