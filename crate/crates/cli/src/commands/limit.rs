//! `limit`: propagate `Γ̃^(1) … Γ̃^(D)` and persist each measure.

use anyhow::Result;
use stable_depths::ParticleLimit;

use super::{num, network, out_dir, propagate_options, seed, Output, Passed};
use crate::config::Settings;

pub fn run(mut s: Settings) -> Result<Passed> {
    let config = network(&mut s)?;
    let seed = seed(&mut s)?;
    let out = out_dir(&mut s);
    let particles = s.get("particles", 100_000usize)?;
    let options = propagate_options(&mut s)?;
    s.finish("limit")?;
    config.validate_for_limits()?;
    anyhow::ensure!(particles > 0, "particles must be at least 1");

    let limits = ParticleLimit::chain(&config, config.depth, particles, seed.named("limit"), &options)?;
    let output = Output::create(&out)?;
    let chains: Vec<(String, Vec<u64>)> =
        limits.iter().map(|l| (format!("limit_l{}", l.layer), l.seed_chain.clone())).collect();
    output.write_resolved("limit", &s, seed, &chains)?;

    let bound = config.gamma_bar();
    let k = config.dim();
    let mut w = output.csv("limit_summary.csv")?;
    let mut header: Vec<String> =
        ["layer", "particles", "pairs", "atoms", "total_mass", "gamma_bar", "mass_ok", "sampling_error"]
            .iter()
            .map(|h| h.to_string())
            .collect();
    header.extend((1..=k).map(|j| format!("marginal_scale_{j}")));
    w.write_record(&header)?;

    let mut passed = true;
    for l in &limits {
        l.write_text(output.file(&format!("measure_l{}.txt", l.layer))?)?;
        let mass = l.measure.total_mass();
        // The cap applies from layer 2 on.
        let ok = l.layer == 1 || bound.is_none_or(|b| mass <= b * (1.0 + 1e-12));
        passed &= ok;
        let mut rec = vec![
            l.layer.to_string(),
            l.particles.map_or("exact".to_string(), |m| m.to_string()),
            l.measure.pair_count().to_string(),
            l.measure.atom_count().to_string(),
            num(mass),
            bound.map_or(String::new(), num),
            ok.to_string(),
            num(l.sampling_error),
        ];
        for j in 0..k {
            rec.push(num(l.measure.marginal_scale(l.alpha, j)?));
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(passed)
}
