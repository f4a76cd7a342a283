use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::Args;
use flowinfer::diagnostics::{autocorrelation, moments, tv_distance, BinEdges, Histogram1D, Histogram2D, Observable};
use flowinfer::field::{FlowIndexSet, RealComponentVector};
use flowinfer::io::{
    read_samples_csv, read_trace_csv, write_acf_csv, write_hist1d_csv, write_hist2d_csv, write_moments_csv,
    write_observables_csv, write_tv_csv, ObservableRow,
};
use flowinfer::model::ForwardProblem;
use flowinfer::scenarios::{evaluate_observables, ReferencePosterior, DEFAULT_BINS};
use rayon::prelude::*;

use super::{create_dir, list_chains, load_reference, load_scenario};
use crate::exit::Failure;
use crate::ComponentList;

#[derive(Args)]
pub struct DiagnoseArgs {
    /// Output directory of a `sample` run.
    #[arg(long)]
    pub chains: PathBuf,
    /// Reference posterior (reference.json or the directory holding it).
    #[arg(long)]
    pub reference: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Components for histograms and TV, `a..b` or a list.
    #[arg(long, default_value = "2..9")]
    pub components: ComponentList,
    #[arg(long, default_value_t = 200)]
    pub max_lag: usize,
    /// Number of prefix lengths (log-spaced) in `tv_evolution.csv`.
    #[arg(long, default_value_t = 20)]
    pub tv_points: usize,
    /// Bins per axis when no reference fixes the edges.
    #[arg(long)]
    pub bins: Option<usize>,
    /// Samples dropped from the start of each chain.
    #[arg(long, default_value_t = 0)]
    pub burn_in: usize,
    /// Comma-separated observable names.
    #[arg(long, value_delimiter = ',')]
    pub observables: Vec<String>,
    /// Scenario, required for scalar observables.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    /// Evaluate observables on every n-th sample.
    #[arg(long, default_value_t = 1)]
    pub observable_every: usize,
}

struct ChainData {
    dir: PathBuf,
    steps: Vec<u64>,
    samples: Vec<RealComponentVector>,
}

struct ObservableContext {
    observables: Vec<Observable>,
    idx: FlowIndexSet,
    problem: Option<ForwardProblem>,
    kappa: f64,
}

/// Log-spaced prefix lengths ending at `n`.
pub fn prefix_grid(n: usize, points: usize) -> Vec<usize> {
    if n == 0 || points == 0 {
        return Vec::new();
    }
    let start = n.min(10) as f64;
    let mut grid: Vec<usize> = (0..points)
        .map(|i| {
            let f = if points == 1 { 1.0 } else { i as f64 / (points - 1) as f64 };
            (start * (n as f64 / start).powf(f)).round() as usize
        })
        .collect();
    grid.push(n);
    grid.sort_unstable();
    grid.dedup();
    grid
}

fn column(samples: &[RealComponentVector], c: usize) -> Vec<f64> {
    samples.iter().map(|s| s.0[c]).collect()
}

pub fn run(a: DiagnoseArgs) -> anyhow::Result<()> {
    if a.observable_every == 0 {
        anyhow::bail!(Failure::usage("--observable-every must be positive"));
    }
    let reference = a.reference.as_deref().map(load_reference).transpose()?;
    let chains: Vec<ChainData> = list_chains(&a.chains)?
        .into_iter()
        .map(|dir| {
            let path = dir.join("samples.csv");
            let (steps, samples) = read_samples_csv(&path).with_context(|| format!("reading {}", path.display()))?;
            let keep = a.burn_in.min(samples.len());
            Ok(ChainData { dir, steps: steps[keep..].to_vec(), samples: samples[keep..].to_vec() })
        })
        .collect::<anyhow::Result<_>>()?;
    let dim = chains[0].samples.first().map(|s| s.len()).unwrap_or(0);
    if chains.iter().any(|c| c.samples.iter().any(|s| s.len() != dim)) {
        anyhow::bail!(Failure::usage("chains have different dimensions"));
    }
    if let Some(&c) = a.components.iter().find(|&&c| c >= dim) {
        anyhow::bail!(Failure::usage(format!("component {c} out of range (dimension {dim})")));
    }
    let edges = component_edges(&a, reference.as_ref(), &chains, dim)?;
    let obs_ctx = observable_context(&a)?;
    create_dir(&a.out)?;

    let per_chain: Vec<(Vec<Histogram1D>, Vec<Histogram2D>)> = chains
        .par_iter()
        .map(|ch| chain_outputs(&a, ch, &edges, reference.as_ref(), obs_ctx.as_ref()))
        .collect::<anyhow::Result<_>>()?;

    // pooled histograms merged from the per-chain accumulators
    let mut iter = per_chain.into_iter();
    let (mut h1, mut h2) = iter.next().expect("at least one chain");
    for (a1, a2) in iter {
        for (h, o) in h1.iter_mut().zip(&a1) {
            h.merge(o)?;
        }
        for (h, o) in h2.iter_mut().zip(&a2) {
            h.merge(o)?;
        }
    }
    let pooled: Vec<&RealComponentVector> = chains.iter().flat_map(|c| c.samples.iter()).collect();
    let pooled: Vec<&[f64]> = pooled.iter().map(|s| s.as_slice()).collect();
    write_moments_csv(&a.out.join("moments.csv"), &moments(&pooled)?)?;
    for (c, h) in a.components.iter().zip(&h1) {
        write_hist1d_csv(&a.out.join(format!("hist1d_{c}.csv")), h)?;
    }
    for ((ci, cj), h) in pairs(&a.components).into_iter().zip(&h2) {
        write_hist2d_csv(&a.out.join(format!("hist2d_{ci}_{cj}.csv")), h)?;
    }
    if let Some(r) = &reference {
        let tv: Vec<f64> = a
            .components
            .iter()
            .zip(&h1)
            .map(|(&c, h)| tv_distance(h, &r.component(c)?.histogram))
            .collect::<flowinfer::Result<_>>()?;
        write_tv_csv(&a.out.join("tv_pooled.csv"), &a.components, &[pooled.len()], &[tv])?;
    }
    println!("{} chains, {} pooled samples -> {}", chains.len(), pooled.len(), a.out.display());
    Ok(())
}

fn pairs(components: &[usize]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for (i, &ci) in components.iter().enumerate() {
        for &cj in &components[i + 1..] {
            out.push((ci, cj));
        }
    }
    out
}

/// Edges per selected component: frozen in the reference if given, else
/// `mean ± 4 sd` of the pooled chains.
fn component_edges(
    a: &DiagnoseArgs,
    reference: Option<&ReferencePosterior>,
    chains: &[ChainData],
    dim: usize,
) -> anyhow::Result<Vec<BinEdges>> {
    if let Some(r) = reference {
        if r.components.len() != dim {
            anyhow::bail!(Failure::usage(format!(
                "edge mismatch: reference has {} components, chains have {dim}",
                r.components.len()
            )));
        }
        if let Some(b) = a.bins.filter(|&b| b != r.bins) {
            anyhow::bail!(Failure::usage(format!("edge mismatch: --bins {b} but the reference uses {}", r.bins)));
        }
        return a.components.iter().map(|&c| Ok(r.component(c)?.histogram.edges)).collect();
    }
    let bins = a.bins.unwrap_or(DEFAULT_BINS);
    let all: Vec<&[f64]> = chains.iter().flat_map(|c| c.samples.iter().map(|s| s.as_slice())).collect();
    let mom = moments(&all)?;
    Ok(a.components
        .iter()
        .map(|&c| BinEdges::around(mom[c].mean, mom[c].variance.sqrt(), 4.0, bins))
        .collect::<flowinfer::Result<_>>()?)
}

fn observable_context(a: &DiagnoseArgs) -> anyhow::Result<Option<ObservableContext>> {
    if a.observables.is_empty() {
        return Ok(None);
    }
    let observables = a
        .observables
        .iter()
        .map(|s| s.parse::<Observable>().map_err(|e| Failure::usage(e.to_string())))
        .collect::<Result<Vec<_>, _>>()?;
    let path = a.scenario.as_ref().ok_or_else(|| Failure::usage("--observables needs --scenario"))?;
    let s = load_scenario(path)?;
    let problem = if observables.iter().any(Observable::needs_trajectory) { Some(s.problem()?) } else { None };
    Ok(Some(ObservableContext { observables, idx: s.index_set()?, problem, kappa: s.kappa }))
}

fn chain_outputs(
    a: &DiagnoseArgs,
    ch: &ChainData,
    edges: &[BinEdges],
    reference: Option<&ReferencePosterior>,
    obs: Option<&ObservableContext>,
) -> anyhow::Result<(Vec<Histogram1D>, Vec<Histogram2D>)> {
    let name = ch.dir.file_name().expect("chain directory name");
    let out = a.out.join(name);
    create_dir(&out)?;

    let trace_path = ch.dir.join("trace.csv");
    if trace_path.exists() {
        fs::copy(&trace_path, out.join("trace.csv")).map_err(flowinfer::Error::Io)?;
        let trace = read_trace_csv(&trace_path)?;
        let phis = &trace.phis[a.burn_in.min(trace.phis.len())..];
        if phis.len() > 1 {
            match autocorrelation(phis, a.max_lag.min(phis.len() - 1)) {
                Ok(acf) => write_acf_csv(&out.join("acf.csv"), &acf)?,
                Err(e) => eprintln!("{}: no autocorrelation: {e}", ch.dir.display()),
            }
        }
    }

    let cols: Vec<Vec<f64>> = a.components.iter().map(|&c| column(&ch.samples, c)).collect();
    if let Some(r) = reference {
        let grid = prefix_grid(ch.samples.len(), a.tv_points);
        let steps: Vec<usize> = grid.iter().map(|&n| ch.steps[n - 1] as usize).collect();
        let tv: Vec<Vec<f64>> = grid
            .iter()
            .map(|&n| {
                a.components
                    .iter()
                    .zip(&cols)
                    .zip(edges)
                    .map(|((&c, col), e)| {
                        tv_distance(&Histogram1D::from_samples(*e, &col[..n]), &r.component(c)?.histogram)
                    })
                    .collect::<flowinfer::Result<Vec<f64>>>()
            })
            .collect::<flowinfer::Result<_>>()?;
        write_tv_csv(&out.join("tv_evolution.csv"), &a.components, &steps, &tv)?;
    }

    if let Some(ctx) = obs {
        write_observables(a, ch, ctx, reference, &out)?;
    }

    let h1 = cols.iter().zip(edges).map(|(col, e)| Histogram1D::from_samples(*e, col)).collect();
    let mut h2 = Vec::new();
    for (i, j) in pairs(&(0..a.components.len()).collect::<Vec<_>>()) {
        let mut h = Histogram2D::new(edges[i], edges[j]);
        h.extend(&cols[i], &cols[j]);
        h2.push(h);
    }
    Ok((h1, h2))
}

fn write_observables(
    a: &DiagnoseArgs,
    ch: &ChainData,
    ctx: &ObservableContext,
    reference: Option<&ReferencePosterior>,
    out: &Path,
) -> anyhow::Result<()> {
    let mut sums = vec![0.0; ctx.observables.len()];
    let mut count = 0usize;
    let mut rows = Vec::new();
    for (step, v) in ch.steps.iter().zip(&ch.samples).step_by(a.observable_every) {
        let values = evaluate_observables(&ctx.observables, v, &ctx.idx, ctx.problem.as_ref(), ctx.kappa)?;
        count += 1;
        for ((o, value), sum) in ctx.observables.iter().zip(values).zip(sums.iter_mut()) {
            *sum += value;
            let cma = *sum / count as f64;
            let rel_err = reference.and_then(|r| r.observable_mean(o)).map(|t| {
                if t == 0.0 {
                    (cma - t).abs()
                } else {
                    (cma - t).abs() / t.abs()
                }
            });
            rows.push(ObservableRow { step: *step, name: o.name().to_string(), value, cma, rel_err });
        }
    }
    write_observables_csv(&out.join("observables.csv"), &rows)?;
    Ok(())
}
