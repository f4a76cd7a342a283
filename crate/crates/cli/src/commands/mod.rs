pub mod data;
pub mod diagnose;
pub mod gradient;
pub mod reference;
pub mod sample;
pub mod scenario;

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use flowinfer::inference::ObservationSet;
use flowinfer::io::read_json;
use flowinfer::scenarios::{ReferencePosterior, Scenario};

pub fn load_scenario(path: &Path) -> anyhow::Result<Scenario> {
    let text = fs::read_to_string(path)
        .map_err(flowinfer::Error::Io)
        .with_context(|| format!("reading {}", path.display()))?;
    Scenario::from_json(&text).with_context(|| format!("parsing scenario {}", path.display()))
}

/// `--data` if given, else `data.csv` next to the scenario file.
pub fn data_path(scenario: &Path, data: Option<&PathBuf>) -> PathBuf {
    match data {
        Some(p) => p.clone(),
        None => scenario.parent().unwrap_or(Path::new(".")).join("data.csv"),
    }
}

pub fn load_data(path: &Path) -> anyhow::Result<ObservationSet> {
    ObservationSet::read_csv(path).with_context(|| format!("reading data {}", path.display()))
}

pub fn create_dir(path: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(path).map_err(flowinfer::Error::Io).with_context(|| format!("creating {}", path.display()))
}

pub fn chain_dir(out: &Path, chain: usize) -> PathBuf {
    out.join(format!("chain_{chain:03}"))
}

/// Chain directories under `dir`, sorted by index.
pub fn list_chains(dir: &Path) -> anyhow::Result<Vec<PathBuf>> {
    let mut dirs: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(flowinfer::Error::Io)
        .with_context(|| format!("listing {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir() && p.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.starts_with("chain_")))
        .collect();
    dirs.sort();
    if dirs.is_empty() {
        anyhow::bail!(crate::exit::Failure::usage(format!("no chain_* directories in {}", dir.display())));
    }
    Ok(dirs)
}

/// `reference.json`, or the file of that name inside a directory.
pub fn load_reference(path: &Path) -> anyhow::Result<ReferencePosterior> {
    let file = if path.is_dir() { path.join("reference.json") } else { path.to_path_buf() };
    read_json(&file).with_context(|| format!("reading reference {}", file.display()))
}
