use std::path::PathBuf;

use clap::Args;
use flowinfer::adjoint::misfit;
use flowinfer::model::ForwardProblem;
use flowinfer::scenarios::{scenario, Level, Scenario};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use super::load_scenario;
use crate::exit::Failure;

/// Largest accepted relative error between adjoint and finite-difference gradients.
pub const TOLERANCE: f64 = 1e-4;
/// Differences below this are treated as agreement.
pub const ABSOLUTE_FLOOR: f64 = 1e-8;

#[derive(Args)]
pub struct GradientCheckArgs {
    /// Scenario JSON (default: example1 at small level).
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    #[arg(long, default_value_t = 20)]
    pub trials: usize,
    /// Finite-difference step.
    #[arg(long, default_value_t = 1e-5)]
    pub h: f64,
    /// Sampling cutoff used for the check.
    #[arg(long, default_value_t = 2.0)]
    pub cutoff: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub dt: f64,
    /// Use only the first n observation points.
    #[arg(long, default_value_t = 16)]
    pub observations: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "gradient_check.csv")]
    pub out: PathBuf,
    /// Check at the data-generating flow, where the gradient vanishes.
    #[arg(long)]
    pub zero_residual: bool,
    /// Flip the sign of one adjoint component (negative control).
    #[arg(long, hide = true)]
    pub corrupt_component: Option<usize>,
}

pub fn relative_error(adjoint: f64, fd: f64) -> f64 {
    let diff = (adjoint - fd).abs();
    if diff <= ABSOLUTE_FLOOR {
        0.0
    } else {
        diff / adjoint.abs().max(fd.abs())
    }
}

/// `Φ'` along component `l` by the 5-point central stencil.
fn fd_component(p: &ForwardProblem, v: &[f64], l: usize, h: f64, y: &[f64], sigma: f64) -> anyhow::Result<f64> {
    let mut w = v.to_vec();
    let mut phi_at = |s: f64| -> anyhow::Result<f64> {
        w[l] = v[l] + s * h;
        Ok(misfit(y, &p.predict(&w)?, sigma))
    };
    let (m2, m1, p1, p2) = (phi_at(-2.0)?, phi_at(-1.0)?, phi_at(1.0)?, phi_at(2.0)?);
    Ok((m2 - 8.0 * m1 + 8.0 * p1 - p2) / (12.0 * h))
}

fn check_scenario(a: &GradientCheckArgs) -> anyhow::Result<Scenario> {
    let mut s = match &a.scenario {
        Some(p) => load_scenario(p)?,
        None => scenario("example1", Level::Small, 2024)?,
    };
    s.sampling_cutoff = a.cutoff;
    s.solver.dt = a.dt;
    s.observations.truncate(a.observations);
    s.validate()?;
    Ok(s)
}

pub fn run(a: GradientCheckArgs) -> anyhow::Result<()> {
    if !(a.h > 0.0) || a.trials == 0 {
        anyhow::bail!(Failure::usage("--h must be positive and --trials at least 1"));
    }
    let s = check_scenario(&a)?;
    let problem = s.problem()?;
    let prior = s.prior()?;
    let sigma = s.sigma_eta;
    let mut rng = ChaCha20Rng::seed_from_u64(a.seed);

    let mut w = csv::Writer::from_path(&a.out)
        .map_err(|e| anyhow::Error::new(e).context(format!("writing {}", a.out.display())))?;
    w.write_record(["trial", "component", "adjoint", "fd", "rel_err"])?;
    let mut worst = 0.0f64;
    for trial in 0..a.trials {
        let v = prior.sample(&mut rng);
        let y = if a.zero_residual {
            problem.predict(v.as_slice())?
        } else {
            problem.predict(prior.sample(&mut rng).as_slice())?
        };
        let mut grad = problem.gradient(v.as_slice(), &y, sigma)?.gradient;
        if let Some(c) = a.corrupt_component {
            let g = grad.0.get_mut(c).ok_or_else(|| Failure::usage(format!("no component {c}")))?;
            *g = -*g + if *g == 0.0 { 1.0 } else { 0.0 };
        }
        for l in 0..problem.dim() {
            let fd = fd_component(&problem, v.as_slice(), l, a.h, &y, sigma)?;
            let err = relative_error(grad.0[l], fd);
            worst = worst.max(err);
            w.write_record([trial.to_string(), l.to_string(), grad.0[l].to_string(), fd.to_string(), err.to_string()])?;
        }
    }
    w.flush()?;
    println!(
        "{} trials x {} components: max relative error {worst:.3e} (tolerance {TOLERANCE:e}) -> {}",
        a.trials,
        problem.dim(),
        a.out.display()
    );
    if worst > TOLERANCE {
        anyhow::bail!(Failure::numerical(format!("gradient check failed: max relative error {worst:.3e}")));
    }
    Ok(())
}
