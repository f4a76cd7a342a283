use std::fs::{self, File, OpenOptions};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use anyhow::Context;
use clap::Args;
use flowinfer::inference::{KraichnanPrior, NoiseModel, PdeTarget};
use flowinfer::io::{read_json, sample_row, samples_header, trace_row, write_json, ChainManifest, TRACE_HEADER};
use flowinfer::model::ForwardProblem;
use flowinfer::samplers::{Chain, Checkpoint, KernelParams};
use flowinfer::scenarios::chain_seed;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{chain_dir, create_dir, data_path, load_data, load_scenario};
use crate::exit::Failure;
use crate::KernelArgs;

#[derive(Args)]
pub struct SampleArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    /// Data CSV (default: data.csv next to the scenario).
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[command(flatten)]
    pub kernel: KernelArgs,
    #[arg(long)]
    pub steps: u64,
    #[arg(long, default_value_t = 1)]
    pub chains: usize,
    /// Base seed; chain `i` uses `seed XOR i`.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Continue an interrupted run from its checkpoints.
    #[arg(long)]
    pub resume: bool,
    /// Keep every `thin`-th sample.
    #[arg(long, default_value_t = 1)]
    pub thin: u64,
    #[arg(long, default_value_t = 1000)]
    pub checkpoint_every: u64,
    /// Worker threads (default: available cores, at most one per chain).
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Stop every chain with an error after this many steps (simulates a crash).
    #[arg(long, hide = true)]
    pub halt_after: Option<u64>,
}

/// Run configuration, stored as `run.json` in the output directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub scenario: PathBuf,
    pub data: PathBuf,
    pub kernel: KernelParams,
    pub steps: u64,
    pub chains: usize,
    pub seed: u64,
    pub thin: u64,
    pub checkpoint_every: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CheckpointFile {
    checkpoint: Checkpoint,
    wall_time_secs: f64,
}

struct Shared {
    config: RunConfig,
    scenario_name: String,
    problem: Arc<ForwardProblem>,
    prior: Arc<KraichnanPrior>,
    y: Arc<Vec<f64>>,
    noise: NoiseModel,
    resume: bool,
    halt_after: Option<u64>,
}

pub fn run(a: SampleArgs) -> anyhow::Result<()> {
    if a.steps == 0 || a.chains == 0 || a.thin == 0 || a.checkpoint_every == 0 {
        anyhow::bail!(Failure::usage("--steps, --chains, --thin and --checkpoint-every must be positive"));
    }
    let scenario = load_scenario(&a.scenario)?;
    let data_file = data_path(&a.scenario, a.data.as_ref());
    let data = load_data(&data_file)?;
    let kernel = a.kernel.params(None)?;
    let config = RunConfig {
        scenario: a.scenario.clone(),
        data: data_file,
        kernel,
        steps: a.steps,
        chains: a.chains,
        seed: a.seed,
        thin: a.thin,
        checkpoint_every: a.checkpoint_every,
    };
    create_dir(&a.out)?;
    let run_file = a.out.join("run.json");
    if a.resume && run_file.exists() {
        let previous: RunConfig = read_json(&run_file)?;
        if previous != config {
            anyhow::bail!(Failure::usage(format!(
                "--resume with a configuration that differs from {}",
                run_file.display()
            )));
        }
    } else {
        write_json(&run_file, &config)?;
    }

    let problem = Arc::new(scenario.problem()?);
    scenario.target(problem.clone(), &data)?;
    let shared = Shared {
        config,
        scenario_name: scenario.name.clone(),
        problem,
        prior: Arc::new(scenario.prior()?),
        y: Arc::new(data.y),
        noise: scenario.noise()?,
        resume: a.resume,
        halt_after: a.halt_after,
    };
    let jobs = a.jobs.unwrap_or_else(rayon::current_num_threads).clamp(1, a.chains);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build().context("starting worker pool")?;
    let manifests: Vec<ChainManifest> = pool.install(|| {
        (0..a.chains).into_par_iter().map(|c| run_chain(&shared, &a.out, c)).collect::<anyhow::Result<_>>()
    })?;
    for m in &manifests {
        println!(
            "chain {:3}: seed {} acceptance {:.4} forward {} adjoint {} failures {} ({:.1} s)",
            m.chain, m.seed, m.acceptance_rate, m.counters.forward, m.counters.adjoint, m.failures, m.wall_time_secs
        );
    }
    Ok(())
}

fn append(path: &Path) -> anyhow::Result<csv::Writer<BufWriter<File>>> {
    let f = OpenOptions::new().append(true).open(path).map_err(flowinfer::Error::Io)?;
    Ok(csv::WriterBuilder::new().has_headers(false).from_writer(BufWriter::new(f)))
}

fn create(path: &Path, header: &[String]) -> anyhow::Result<csv::Writer<BufWriter<File>>> {
    let f = File::create(path).map_err(flowinfer::Error::Io)?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(BufWriter::new(f));
    w.write_record(header)?;
    Ok(w)
}

/// Drop rows written after the checkpoint (step in the first column).
fn truncate_rows(path: &Path, last_step: u64) -> anyhow::Result<()> {
    let text = fs::read_to_string(path).map_err(flowinfer::Error::Io)?;
    let mut kept = String::with_capacity(text.len());
    for (i, line) in text.lines().enumerate() {
        let keep = i == 0 || line.split(',').next().and_then(|s| s.parse::<u64>().ok()).is_some_and(|s| s <= last_step);
        if keep {
            kept.push_str(line);
            kept.push('\n');
        }
    }
    fs::write(path, kept).map_err(flowinfer::Error::Io)?;
    Ok(())
}

fn run_chain(sh: &Shared, out: &Path, c: usize) -> anyhow::Result<ChainManifest> {
    let cfg = &sh.config;
    let dir = chain_dir(out, c);
    create_dir(&dir)?;
    let (samples_path, trace_path) = (dir.join("samples.csv"), dir.join("trace.csv"));
    let cp_path = dir.join("checkpoint.json");
    let manifest_path = dir.join("manifest.json");
    let target = PdeTarget::new(sh.problem.clone(), sh.y.clone(), sh.noise)?;
    let seed = chain_seed(cfg.seed, c);

    if sh.resume && manifest_path.exists() {
        let m: ChainManifest = read_json(&manifest_path)?;
        if m.steps == cfg.steps {
            return Ok(m);
        }
    }
    let (mut chain, mut samples, mut trace, wall0) = if sh.resume && cp_path.exists() {
        let cp: CheckpointFile = read_json(&cp_path)?;
        truncate_rows(&samples_path, cp.checkpoint.step)?;
        truncate_rows(&trace_path, cp.checkpoint.step)?;
        let chain = Chain::resume(cfg.kernel, sh.prior.clone(), target, &cp.checkpoint)?;
        (chain, append(&samples_path)?, append(&trace_path)?, cp.wall_time_secs)
    } else {
        let chain = Chain::new(cfg.kernel, sh.prior.clone(), target, seed, None)?;
        let trace_header: Vec<String> = TRACE_HEADER.iter().map(|s| s.to_string()).collect();
        let samples = create(&samples_path, &samples_header(sh.prior.dim()))?;
        let trace = create(&trace_path, &trace_header)?;
        (chain, samples, trace, 0.0)
    };

    let start = Instant::now();
    let mut accepted = 0u64;
    let write_checkpoint = |chain: &Chain<PdeTarget>, elapsed: f64| -> anyhow::Result<()> {
        write_json(&cp_path, &CheckpointFile { checkpoint: chain.checkpoint(), wall_time_secs: wall0 + elapsed })?;
        Ok(())
    };
    while chain.steps_taken() < cfg.steps {
        let info = chain.advance()?;
        let step = chain.steps_taken();
        if let Some(reason) = &info.failure {
            eprintln!("chain {c} step {step}: proposal rejected after failure: {reason}");
        }
        accepted += u64::from(info.accepted);
        trace.write_record(trace_row(step, chain.state().phi, info.accepted))?;
        if step % cfg.thin == 0 {
            samples.write_record(sample_row(step, chain.state().components.as_slice()))?;
        }
        if step % cfg.checkpoint_every == 0 || step == cfg.steps {
            samples.flush().map_err(flowinfer::Error::Io)?;
            trace.flush().map_err(flowinfer::Error::Io)?;
            write_checkpoint(&chain, start.elapsed().as_secs_f64())?;
        }
        if sh.halt_after == Some(step) {
            samples.flush().map_err(flowinfer::Error::Io)?;
            trace.flush().map_err(flowinfer::Error::Io)?;
            anyhow::bail!(Failure::numerical(format!("chain {c} halted after {step} steps on request")));
        }
    }
    drop((samples, trace));

    // acceptance over the whole run, including steps before a resume
    let all = flowinfer::io::read_trace_csv(&trace_path)?;
    let total_accepted = all.accepts.iter().filter(|a| **a).count() as f64;
    let _ = accepted;
    let manifest = ChainManifest {
        chain: c,
        seed,
        kernel: cfg.kernel,
        scenario: sh.scenario_name.clone(),
        steps: cfg.steps,
        thin: cfg.thin as usize,
        checkpoint_every: cfg.checkpoint_every,
        acceptance_rate: total_accepted / all.accepts.len().max(1) as f64,
        counters: chain.step_counters(),
        init_counters: chain.init_counters(),
        failures: chain.failures(),
        wall_time_secs: wall0 + start.elapsed().as_secs_f64(),
    };
    write_json(&manifest_path, &manifest)?;
    Ok(manifest)
}
