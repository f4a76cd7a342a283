use std::path::PathBuf;

use anyhow::Context;
use clap::Args;
use flowinfer::io::write_atomic;
use flowinfer::scenarios::scenario;

use crate::LevelArg;

#[derive(Args)]
pub struct ScenarioArgs {
    /// `example1` or `example2`.
    pub name: String,
    #[arg(long, value_enum, default_value = "small")]
    pub level: LevelArg,
    /// Seed for the true-flow draw and observation locations.
    #[arg(long, default_value_t = 2024)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(a: ScenarioArgs) -> anyhow::Result<()> {
    let s = scenario(&a.name, a.level.into(), a.seed)?;
    let mut text = s.to_json()?;
    text.push('\n');
    write_atomic(&a.out, text.as_bytes()).with_context(|| format!("writing {}", a.out.display()))?;
    println!(
        "{} ({}): {} observations, {} components -> {}",
        s.name,
        s.level,
        s.observations.len(),
        s.index_set()?.component_count(),
        a.out.display()
    );
    Ok(())
}
