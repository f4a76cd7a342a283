use std::path::PathBuf;

use anyhow::Context;
use clap::Args;

use super::load_scenario;

#[derive(Args)]
pub struct GenerateDataArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    /// Add N(0, sigma_eta^2) noise (default: noiseless data).
    #[arg(long)]
    pub add_noise: bool,
    /// Noise seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(a: GenerateDataArgs) -> anyhow::Result<()> {
    let s = load_scenario(&a.scenario)?;
    let data = s.generate_data(a.add_noise, a.seed)?;
    data.write_csv(&a.out).with_context(|| format!("writing {}", a.out.display()))?;
    let max = data.y.iter().fold(0.0f64, |m, y| m.max(y.abs()));
    println!("{} observations (max |Y| = {max:.6}) -> {}", data.y.len(), a.out.display());
    Ok(())
}
