use std::path::PathBuf;
use std::time::Instant;

use clap::Args;
use flowinfer::diagnostics::Observable;
use flowinfer::field::RealComponentVector;
use flowinfer::io::{read_json, read_samples_csv, read_trace_csv, write_hist1d_csv, write_json, write_moments_csv};
use flowinfer::scenarios::{
    build_reference, evaluate_observables, ObservableMean, ReferenceBudget, ReferencePosterior, Scenario, DEFAULT_BINS,
};

use super::sample::RunConfig;
use super::{create_dir, data_path, list_chains, load_data, load_scenario};
use crate::exit::Failure;
use crate::{ComponentList, KernelArgs};

#[derive(Args)]
pub struct ReferenceArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    /// Data CSV (default: data.csv next to the scenario).
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Kernel (default: the scenario's reference kernel).
    #[command(flatten)]
    pub kernel: KernelArgs,
    #[arg(long)]
    pub chains: Option<usize>,
    #[arg(long)]
    pub steps: Option<usize>,
    /// Samples dropped from the start of each chain.
    #[arg(long)]
    pub burn_in: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = DEFAULT_BINS)]
    pub bins: usize,
    /// Components whose histograms are exported as CSV.
    #[arg(long, default_value = "2..9")]
    pub components: ComponentList,
    /// Pool an existing `sample` run instead of running new chains.
    #[arg(long)]
    pub from_chains: Option<PathBuf>,
    /// Comma-separated observables whose posterior means are stored.
    #[arg(long, value_delimiter = ',')]
    pub observables: Vec<String>,
    /// Evaluate observables on every n-th pooled sample.
    #[arg(long, default_value_t = 10)]
    pub observable_every: usize,
}

fn budget(a: &ReferenceArgs, s: &Scenario) -> anyhow::Result<ReferenceBudget> {
    let base = s.reference;
    Ok(ReferenceBudget {
        kernel: a.kernel.params(Some(base.kernel))?,
        chains: a.chains.unwrap_or(base.chains),
        steps: a.steps.unwrap_or(base.steps),
        burn_in: a.burn_in.unwrap_or(base.burn_in),
        seed: a.seed.unwrap_or(base.seed),
    })
}

/// Pool the chains of an existing `sample` run.
fn from_chains(a: &ReferenceArgs, s: &Scenario, dir: &PathBuf) -> anyhow::Result<ReferencePosterior> {
    let run: RunConfig = read_json(&dir.join("run.json"))?;
    let burn_in = a.burn_in.unwrap_or(s.reference.burn_in);
    let mut samples: Vec<RealComponentVector> = Vec::new();
    let (mut accepted, mut total) = (0usize, 0usize);
    for chain in list_chains(dir)? {
        let (_, chain_samples) = read_samples_csv(&chain.join("samples.csv"))?;
        if burn_in >= chain_samples.len() {
            anyhow::bail!(Failure::usage(format!("burn-in {burn_in} leaves no samples in {}", chain.display())));
        }
        samples.extend(chain_samples.into_iter().skip(burn_in));
        let trace = read_trace_csv(&chain.join("trace.csv"))?;
        accepted += trace.accepts.iter().filter(|x| **x).count();
        total += trace.accepts.len();
    }
    let budget =
        ReferenceBudget { kernel: run.kernel, chains: run.chains, steps: run.steps as usize, burn_in, seed: run.seed };
    Ok(ReferencePosterior::from_samples(s, budget, &samples, accepted as f64 / total.max(1) as f64, a.bins)?)
}

pub fn run(a: ReferenceArgs) -> anyhow::Result<()> {
    if a.observable_every == 0 {
        anyhow::bail!(Failure::usage("--observable-every must be positive"));
    }
    let observables = a
        .observables
        .iter()
        .map(|s| s.parse::<Observable>().map_err(|e| Failure::usage(e.to_string())))
        .collect::<Result<Vec<_>, _>>()?;
    let s = load_scenario(&a.scenario)?;
    let start = Instant::now();
    let (mut reference, pooled) = match &a.from_chains {
        Some(dir) => {
            let r = from_chains(&a, &s, dir)?;
            let mut pooled = Vec::new();
            if !observables.is_empty() {
                for chain in list_chains(dir)? {
                    let (_, xs) = read_samples_csv(&chain.join("samples.csv"))?;
                    pooled.extend(xs.into_iter().skip(r.budget.burn_in));
                }
            }
            (r, pooled)
        }
        None => {
            let data = load_data(&data_path(&a.scenario, a.data.as_ref()))?;
            let (r, records) = build_reference(&s, &data, budget(&a, &s)?, a.bins)?;
            let pooled = if observables.is_empty() {
                Vec::new()
            } else {
                flowinfer::scenarios::pool(&records, r.budget.burn_in)
            };
            (r, pooled)
        }
    };
    if !observables.is_empty() {
        let idx = s.index_set()?;
        let problem = if observables.iter().any(Observable::needs_trajectory) { Some(s.problem()?) } else { None };
        let mut sums = vec![0.0; observables.len()];
        let mut n = 0usize;
        for v in pooled.iter().step_by(a.observable_every) {
            for (sum, x) in sums.iter_mut().zip(evaluate_observables(&observables, v, &idx, problem.as_ref(), s.kappa)?)
            {
                *sum += x;
            }
            n += 1;
        }
        reference.observables = observables
            .iter()
            .zip(sums)
            .map(|(o, sum)| ObservableMean { observable: *o, mean: sum / n as f64, samples: n })
            .collect();
    }

    create_dir(&a.out)?;
    write_json(&a.out.join("reference.json"), &reference)?;
    write_moments_csv(&a.out.join("moments.csv"), &reference.moments)?;
    for &c in a.components.iter() {
        write_hist1d_csv(&a.out.join(format!("hist1d_{c}.csv")), &reference.component(c)?.histogram)?;
    }
    println!(
        "reference: {} pooled samples, acceptance {:.4}, {:.1} s -> {}",
        reference.samples,
        reference.acceptance_rate,
        start.elapsed().as_secs_f64(),
        a.out.display()
    );
    Ok(())
}
