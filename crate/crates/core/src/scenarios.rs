//! Canned problem setups, their desk-scale reductions and pooled reference runs.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{compute_observable, moments, BinEdges, ComponentMoments, Histogram1D, Observable};
use crate::error::{check_len, invalid, Result};
use crate::field::{DivFreeVelocityField, FlowIndexSet, RealComponentVector, ScalarSpectralField, WaveVector};
use crate::inference::{generate_data_with, KraichnanPrior, NoiseModel, ObservationSet, PdeTarget, PriorParams};
use crate::model::ForwardProblem;
use crate::samplers::{run_chain, Chain, ChainRecord, KernelParams};
use crate::solver::{LinearSolverKind, ObservationPoint, ObservationSpec, SolverConfig};

/// Cutoff of the index set the first example's true flow is drawn on.
pub const EXAMPLE1_TRUTH_CUTOFF: f64 = 32.0;

/// RNG streams derived from the scenario seed.
const TRUTH_STREAM: u64 = 1;
const OBSERVATION_STREAM: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Small,
    Medium,
    Paper,
}

impl FromStr for Level {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "small" => Ok(Level::Small),
            "medium" => Ok(Level::Medium),
            "paper" => Ok(Level::Paper),
            _ => Err(invalid(format!("unknown level {s:?} (expected small, medium or paper)"))),
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Level::Small => "small",
            Level::Medium => "medium",
            Level::Paper => "paper",
        })
    }
}

/// One Fourier coefficient of the initial scalar; conjugates are implied.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalarMode {
    pub k: [i32; 2],
    pub re: f64,
    pub im: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Theta0Spec {
    pub modes: Vec<ScalarMode>,
}

impl Theta0Spec {
    /// `½ − ¼cos 2πx − ¼cos 2πy`.
    pub fn standard() -> Self {
        let m = |kx, ky, re| ScalarMode { k: [kx, ky], re, im: 0.0 };
        Self { modes: vec![m(0, 0, 0.5), m(1, 0, -0.125), m(0, 1, -0.125)] }
    }

    pub fn max_frequency(&self) -> usize {
        self.modes.iter().map(|m| WaveVector::new(m.k[0], m.k[1]).max_norm() as usize).max().unwrap_or(0)
    }

    pub fn field(&self) -> Result<ScalarSpectralField> {
        let modes: Vec<_> =
            self.modes.iter().map(|m| (WaveVector::new(m.k[0], m.k[1]), Complex64::new(m.re, m.im))).collect();
        ScalarSpectralField::from_modes(self.max_frequency(), &modes)
    }
}

/// The true flow: explicit components on a disc, or a closed form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TrueFieldSpec {
    Components {
        cutoff: f64,
        values: RealComponentVector,
    },
    /// `"cellular"`: `v = [8cos 2πy, 8cos 2πx]`.
    Formula {
        id: String,
    },
}

impl TrueFieldSpec {
    pub fn field(&self) -> Result<DivFreeVelocityField> {
        match self {
            TrueFieldSpec::Components { cutoff, values } => {
                DivFreeVelocityField::from_components(values, &FlowIndexSet::new(*cutoff)?)
            }
            TrueFieldSpec::Formula { id } if id == "cellular" => cellular_flow(8.0),
            TrueFieldSpec::Formula { id } => Err(invalid(format!("unknown true-field formula {id:?}"))),
        }
    }
}

/// `[A cos 2πy, A cos 2πx]`: the `(0,1)` mode carries the x-velocity and the
/// `(1,0)` mode the y-velocity.
pub fn cellular_flow(amplitude: f64) -> Result<DivFreeVelocityField> {
    let mut v = DivFreeVelocityField::zero();
    // flow direction of (0,1) is (−1,0), of (1,0) is (0,1)
    v.set_real_mode(WaveVector::new(0, 1), -amplitude, 0.0)?;
    v.set_real_mode(WaveVector::new(1, 0), amplitude, 0.0)?;
    Ok(v)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    pub cutoff: usize,
    pub dt: f64,
    pub t_final: f64,
    #[serde(default)]
    pub linear_solver: LinearSolverKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceBudget {
    pub kernel: KernelParams,
    pub chains: usize,
    pub steps: usize,
    /// Leading steps of each chain left out of the pooled sample.
    pub burn_in: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSeeds {
    /// Drives the true-field draw and observation locations.
    pub scenario: u64,
}

/// Full-scale values a reduced scenario was derived from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reductions {
    pub sampling_cutoff: f64,
    pub observations: usize,
    pub solver: SolverSettings,
    pub reference: ReferenceBudget,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub level: Level,
    pub kappa: f64,
    pub sigma_eta: f64,
    pub theta0: Theta0Spec,
    pub prior: PriorParams,
    pub true_field: TrueFieldSpec,
    pub observations: Vec<ObservationPoint>,
    pub sampling_cutoff: f64,
    pub solver: SolverSettings,
    pub seeds: ScenarioSeeds,
    pub reference: ReferenceBudget,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reductions: Option<Reductions>,
}

/// `n` points uniform in `(0, T] × [0,1)²`.
fn random_observations(seed: u64, n: usize, t_final: f64) -> Vec<ObservationPoint> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(OBSERVATION_STREAM);
    (0..n)
        .map(|_| {
            let u: f64 = rng.random();
            let x: f64 = rng.random();
            let y: f64 = rng.random();
            ObservationPoint { t: t_final * (1.0 - u), x, y }
        })
        .collect()
}

/// Full-scale first example: random prior truth, 1024 random observations.
pub fn example1(seed: u64) -> Result<Scenario> {
    let prior = PriorParams::standard();
    let truth_idx = FlowIndexSet::new(EXAMPLE1_TRUTH_CUTOFF)?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(TRUTH_STREAM);
    let values = KraichnanPrior::new(prior, &truth_idx)?.sample(&mut rng);
    let t_final = 1.0;
    Ok(Scenario {
        name: "example1".into(),
        level: Level::Paper,
        kappa: 0.282,
        sigma_eta: 2f64.powi(-6),
        theta0: Theta0Spec::standard(),
        prior,
        true_field: TrueFieldSpec::Components { cutoff: EXAMPLE1_TRUTH_CUTOFF, values },
        observations: random_observations(seed, 1024, t_final),
        sampling_cutoff: 8.0,
        solver: SolverSettings { cutoff: 32, dt: 1e-3, t_final, linear_solver: LinearSolverKind::Auto },
        seeds: ScenarioSeeds { scenario: seed },
        reference: ReferenceBudget {
            kernel: KernelParams::Pcn { beta: 0.15 },
            chains: 40,
            steps: 250_000,
            burn_in: 25_000,
            seed: seed.wrapping_add(1),
        },
        reductions: None,
    })
}

/// Cellular flow observed at two points every millisecond up to `t = 0.05`.
pub fn example2() -> Result<Scenario> {
    let mut observations = Vec::with_capacity(100);
    for i in 1..=50 {
        let t = i as f64 * 1e-3;
        observations.push(ObservationPoint { t, x: 0.0, y: 0.0 });
        observations.push(ObservationPoint { t, x: 0.5, y: 0.5 });
    }
    Ok(Scenario {
        name: "example2".into(),
        level: Level::Paper,
        kappa: 3e-5,
        sigma_eta: 2f64.powi(-3),
        theta0: Theta0Spec::standard(),
        prior: PriorParams::standard(),
        true_field: TrueFieldSpec::Formula { id: "cellular".into() },
        observations,
        sampling_cutoff: 8.0,
        solver: SolverSettings { cutoff: 48, dt: 2.5e-4, t_final: 0.05, linear_solver: LinearSolverKind::Auto },
        seeds: ScenarioSeeds { scenario: 0 },
        reference: ReferenceBudget {
            kernel: KernelParams::Hmc { epsilon: 0.125, tau: 4.0 },
            chains: 100,
            steps: 5_000,
            burn_in: 500,
            seed: 1,
        },
        reductions: None,
    })
}

/// Build a named scenario at a level.
pub fn scenario(name: &str, level: Level, seed: u64) -> Result<Scenario> {
    let base = match name {
        "example1" => example1(seed)?,
        "example2" => example2()?,
        _ => return Err(invalid(format!("unknown scenario {name:?} (expected example1 or example2)"))),
    };
    desk_scale(&base, level)
}

/// Reduce a scenario to a cheaper level. Reductions always start from the
/// full-scale values, so reducing twice to the same level changes nothing.
pub fn desk_scale(s: &Scenario, level: Level) -> Result<Scenario> {
    let base = match &s.reductions {
        None => s.clone(),
        Some(r) => {
            let mut b = s.clone();
            b.sampling_cutoff = r.sampling_cutoff;
            b.solver = r.solver;
            b.reference = r.reference;
            if b.name == "example1" {
                b.observations = random_observations(s.seeds.scenario, r.observations, r.solver.t_final);
            }
            b.level = Level::Paper;
            b.reductions = None;
            b
        }
    };
    if level == Level::Paper {
        return Ok(base);
    }
    let mut out = base.clone();
    out.level = level;
    out.reductions = Some(Reductions {
        sampling_cutoff: base.sampling_cutoff,
        observations: base.observations.len(),
        solver: base.solver,
        reference: base.reference,
    });
    let t_final = base.solver.t_final;
    let auto = LinearSolverKind::Auto;
    match (base.name.as_str(), level) {
        ("example1", Level::Small) => {
            out.sampling_cutoff = 4.0;
            out.observations.truncate(256);
            out.solver = SolverSettings { cutoff: 5, dt: 5e-3, t_final, linear_solver: auto };
            out.reference = ReferenceBudget { chains: 40, steps: 5_000, burn_in: 500, ..base.reference };
        }
        ("example1", Level::Medium) => {
            out.sampling_cutoff = 6.0;
            out.observations.truncate(512);
            out.solver = SolverSettings { cutoff: 8, dt: 2e-3, t_final, linear_solver: auto };
            out.reference = ReferenceBudget { chains: 40, steps: 20_000, burn_in: 2_000, ..base.reference };
        }
        ("example2", Level::Small) => {
            out.sampling_cutoff = 4.0;
            out.solver = SolverSettings { cutoff: 5, dt: 1e-3, t_final, linear_solver: auto };
            out.reference = ReferenceBudget { chains: 20, steps: 20_000, burn_in: 1_000, ..base.reference };
        }
        ("example2", Level::Medium) => {
            out.sampling_cutoff = 6.0;
            out.solver = SolverSettings { cutoff: 8, dt: 5e-4, t_final, linear_solver: auto };
            out.reference = ReferenceBudget { chains: 20, steps: 20_000, burn_in: 1_000, ..base.reference };
        }
        (name, _) => return Err(invalid(format!("no desk-scale reduction for scenario {name:?}"))),
    }
    out.validate()?;
    Ok(out)
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        NoiseModel::new(self.sigma_eta)?;
        self.solver_config()?;
        self.spec().validate(self.solver.t_final)?;
        FlowIndexSet::new(self.sampling_cutoff)?;
        self.theta0.field()?;
        self.true_field.field()?;
        self.reference.kernel.validate()?;
        if self.solver.cutoff < self.sampling_cutoff.floor() as usize + self.theta0.max_frequency() {
            return Err(invalid(format!(
                "solver cutoff {} does not resolve the first advection step (sampling cutoff {} + scalar frequency {})",
                self.solver.cutoff,
                self.sampling_cutoff,
                self.theta0.max_frequency()
            )));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let s: Scenario = serde_json::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn solver_config(&self) -> Result<SolverConfig> {
        Ok(SolverConfig::new(self.solver.cutoff, self.solver.dt, self.kappa, self.solver.t_final)?
            .with_solver(self.solver.linear_solver))
    }

    pub fn spec(&self) -> ObservationSpec {
        ObservationSpec::new(self.observations.clone())
    }

    pub fn noise(&self) -> Result<NoiseModel> {
        NoiseModel::new(self.sigma_eta)
    }

    pub fn theta0_field(&self) -> Result<ScalarSpectralField> {
        self.theta0.field()
    }

    pub fn true_velocity(&self) -> Result<DivFreeVelocityField> {
        self.true_field.field()
    }

    pub fn index_set(&self) -> Result<FlowIndexSet> {
        FlowIndexSet::new(self.sampling_cutoff)
    }

    pub fn prior(&self) -> Result<KraichnanPrior> {
        KraichnanPrior::new(self.prior, &self.index_set()?)
    }

    /// The true flow projected onto the sampling index set.
    pub fn true_components(&self) -> Result<RealComponentVector> {
        let idx = self.index_set()?;
        self.true_velocity()?.truncate(&idx).to_components(&idx)
    }

    /// Forward map on the sampling index set.
    pub fn problem(&self) -> Result<ForwardProblem> {
        ForwardProblem::new(&self.index_set()?, &self.theta0_field()?, self.spec(), self.solver_config()?)
    }

    /// `Y = G(v*)` with the full true flow, plus noise drawn from `seed` if requested.
    pub fn generate_data(&self, add_noise: bool, seed: u64) -> Result<ObservationSet> {
        let truth = self.true_velocity()?;
        let idx = match &self.true_field {
            TrueFieldSpec::Components { cutoff, .. } => FlowIndexSet::new(*cutoff)?,
            TrueFieldSpec::Formula { .. } => FlowIndexSet::new(truth.max_wavenumber().max(1) as f64)?,
        };
        let problem = ForwardProblem::new(&idx, &self.theta0_field()?, self.spec(), self.solver_config()?)?;
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        generate_data_with(&problem, &truth.to_components(&idx)?, &self.noise()?, add_noise, &mut rng)
    }

    /// Sampling target for a data set measured at this scenario's points.
    pub fn target(&self, problem: Arc<ForwardProblem>, data: &ObservationSet) -> Result<PdeTarget> {
        check_len(self.observations.len(), data.y.len())?;
        if data.spec != self.spec() {
            return Err(invalid("data locations do not match the scenario's observation points"));
        }
        PdeTarget::new(problem, Arc::new(data.y.clone()), self.noise()?)
    }
}

/// Seed of chain `index` in a run with base seed `base`.
pub fn chain_seed(base: u64, index: usize) -> u64 {
    base ^ index as u64
}

/// Run `chains` independent chains (prior-drawn starts) in parallel.
pub fn run_chains(
    problem: &Arc<ForwardProblem>,
    prior: &Arc<KraichnanPrior>,
    y: &Arc<Vec<f64>>,
    noise: NoiseModel,
    kernel: KernelParams,
    chains: usize,
    steps: usize,
    base_seed: u64,
) -> Result<Vec<ChainRecord>> {
    (0..chains)
        .into_par_iter()
        .map(|c| {
            let target = PdeTarget::new(problem.clone(), y.clone(), noise)?;
            let mut chain = Chain::new(kernel, prior.clone(), target, chain_seed(base_seed, c), None)?;
            run_chain(&mut chain, steps, 1, |_, _| Ok(()))
        })
        .collect()
}

/// Pooled samples of several chains, in chain order, after dropping `burn_in`
/// samples from each.
pub fn pool(records: &[ChainRecord], burn_in: usize) -> Vec<RealComponentVector> {
    records.iter().flat_map(|r| r.samples.iter().skip(burn_in).cloned()).collect()
}

/// Frozen histogram baseline for one component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentReference {
    pub component: usize,
    pub histogram: Histogram1D,
    pub density: Vec<f64>,
}

/// Reference posterior artefact: per-component histograms on frozen edges and moments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferencePosterior {
    pub scenario: String,
    pub level: Level,
    pub budget: ReferenceBudget,
    pub samples: usize,
    pub acceptance_rate: f64,
    pub bins: usize,
    pub components: Vec<ComponentReference>,
    pub moments: Vec<ComponentMoments>,
    /// Posterior means of observables, the baseline for their relative errors.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub observables: Vec<ObservableMean>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservableMean {
    pub observable: Observable,
    pub mean: f64,
    /// Number of pooled samples the mean was taken over.
    pub samples: usize,
}

impl ReferencePosterior {
    /// Histograms over `mean ± 4 sd` with `bins` bins per component.
    pub fn from_samples(
        scenario: &Scenario,
        budget: ReferenceBudget,
        samples: &[RealComponentVector],
        acceptance_rate: f64,
        bins: usize,
    ) -> Result<Self> {
        let mom = moments(samples)?;
        let components = mom
            .iter()
            .enumerate()
            .map(|(l, m)| {
                let edges = BinEdges::around(m.mean, m.variance.sqrt(), 4.0, bins)?;
                let col: Vec<f64> = samples.iter().map(|s| s.0[l]).collect();
                let histogram = Histogram1D::from_samples(edges, &col);
                let density = histogram.normalized()?;
                Ok(ComponentReference { component: l, histogram, density })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            scenario: scenario.name.clone(),
            level: scenario.level,
            budget,
            samples: samples.len(),
            acceptance_rate,
            bins,
            components,
            moments: mom,
            observables: Vec::new(),
        })
    }

    pub fn component(&self, l: usize) -> Result<&ComponentReference> {
        self.components.get(l).ok_or_else(|| invalid(format!("reference has no component {l}")))
    }

    pub fn observable_mean(&self, obs: &Observable) -> Option<f64> {
        self.observables.iter().find(|m| m.observable == *obs).map(|m| m.mean)
    }
}

/// Default number of histogram bins per axis.
pub const DEFAULT_BINS: usize = 64;

/// Pooled multi-chain reference run for `scenario` against data `data`.
pub fn build_reference(
    scenario: &Scenario,
    data: &ObservationSet,
    budget: ReferenceBudget,
    bins: usize,
) -> Result<(ReferencePosterior, Vec<ChainRecord>)> {
    if budget.chains == 0 || budget.steps == 0 || budget.burn_in >= budget.steps {
        return Err(invalid("reference budget needs chains ≥ 1 and steps > burn-in"));
    }
    let problem = Arc::new(scenario.problem()?);
    let prior = Arc::new(scenario.prior()?);
    scenario.target(problem.clone(), data)?;
    let y = Arc::new(data.y.clone());
    let records =
        run_chains(&problem, &prior, &y, scenario.noise()?, budget.kernel, budget.chains, budget.steps, budget.seed)?;
    let samples = pool(&records, budget.burn_in);
    let accepted: usize = records.iter().map(|r| r.accepts.iter().filter(|a| **a).count()).sum();
    let total: usize = records.iter().map(|r| r.accepts.len()).sum();
    let reference = ReferencePosterior::from_samples(scenario, budget, &samples, accepted as f64 / total as f64, bins)?;
    Ok((reference, records))
}

/// Observables of the flow with components `v`. Scalar observables solve the
/// forward problem once and need `problem`.
pub fn evaluate_observables(
    observables: &[Observable],
    v: &RealComponentVector,
    idx: &FlowIndexSet,
    problem: Option<&ForwardProblem>,
    kappa: f64,
) -> Result<Vec<f64>> {
    let field = DivFreeVelocityField::from_components(v, idx)?;
    let traj = if observables.iter().any(Observable::needs_trajectory) {
        let p = problem.ok_or_else(|| invalid("scalar observables need the scenario's forward problem"))?;
        Some(p.trajectory(v.as_slice())?)
    } else {
        None
    };
    observables.iter().map(|o| compute_observable(o, &field, traj.as_ref(), kappa)).collect()
}

/// `⟨v, d⟩ / ⟨d, d⟩`.
pub fn projection(v: &[f64], direction: &[f64]) -> f64 {
    let num: f64 = v.iter().zip(direction).map(|(a, b)| a * b).sum();
    let den: f64 = direction.iter().map(|b| b * b).sum();
    num / den
}

/// Number of sign switches of `series` with hysteresis: a switch is counted
/// when the value crosses from above `+level` to below `−level` or back.
pub fn count_switches(series: &[f64], level: f64) -> usize {
    let mut side = 0i8;
    let mut n = 0;
    for &x in series {
        let s = if x > level {
            1
        } else if x < -level {
            -1
        } else {
            continue;
        };
        if side != 0 && s != side {
            n += 1;
        }
        side = s;
    }
    n
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;

    #[test]
    fn cellular_flow_matches_closed_form() {
        let v = cellular_flow(8.0).unwrap();
        for &(x, y) in &[(0.1, 0.2), (0.7, 0.35), (0.0, 0.5)] {
            let u = v.evaluate([x, y]);
            assert!((u[0] - 8.0 * (2.0 * PI * y).cos()).abs() < 1e-12);
            assert!((u[1] - 8.0 * (2.0 * PI * x).cos()).abs() < 1e-12);
        }
    }

    #[test]
    fn switches_need_both_thresholds() {
        assert_eq!(count_switches(&[1.0, 0.2, -0.2, 1.0, -1.0, 0.0, -1.0, 1.0], 0.5), 2);
        assert_eq!(count_switches(&[0.1, -0.1, 0.2], 0.5), 0);
    }
}
