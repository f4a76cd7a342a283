//! Metropolis–Hastings kernels on the flow-component space and the chain driver.

mod hmc;
mod mala;
mod pcn;

use std::sync::Arc;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

pub use hmc::{hamiltonian, hmc_step, integrate as leapfrog, leapfrog_steps};
pub use mala::{mala_drift, mala_rho, mala_step};
pub use pcn::{is_step, pcn_step};

use crate::error::{check_len, invalid, Error, Result};
use crate::field::RealComponentVector;
use crate::inference::{KraichnanPrior, SolveCounters, Target};

/// Kernel choice and its tuning parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "lowercase")]
pub enum KernelParams {
    Pcn { beta: f64 },
    Is,
    Mala { h: f64 },
    Hmc { epsilon: f64, tau: f64 },
}

impl KernelParams {
    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelParams::Pcn { beta } if !(beta > 0.0 && beta <= 1.0) => {
                Err(invalid(format!("pCN beta must lie in (0, 1] (got {beta})")))
            }
            KernelParams::Mala { h } if !(h > 0.0) => Err(invalid(format!("MALA h must be positive (got {h})"))),
            KernelParams::Hmc { epsilon, tau } => leapfrog_steps(epsilon, tau).map(|_| ()),
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            KernelParams::Pcn { .. } => "pcn",
            KernelParams::Is => "is",
            KernelParams::Mala { .. } => "mala",
            KernelParams::Hmc { .. } => "hmc",
        }
    }

    pub fn uses_gradient(&self) -> bool {
        matches!(self, KernelParams::Mala { .. } | KernelParams::Hmc { .. })
    }

    /// Solves per transition: `(forward, adjoint)`.
    pub fn solves_per_step(&self) -> SolveCounters {
        match *self {
            KernelParams::Pcn { .. } | KernelParams::Is => SolveCounters { forward: 1, adjoint: 0 },
            KernelParams::Mala { .. } => SolveCounters { forward: 1, adjoint: 1 },
            KernelParams::Hmc { epsilon, tau } => {
                let l = leapfrog_steps(epsilon, tau).unwrap_or(1) as u64;
                SolveCounters { forward: l + 1, adjoint: l }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainState {
    pub components: RealComponentVector,
    pub phi: f64,
    pub grad: Option<RealComponentVector>,
}

/// Outcome of one transition.
#[derive(Debug, Clone, PartialEq)]
pub struct StepInfo {
    pub accepted: bool,
    /// Set when the proposal was rejected because its evaluation failed.
    pub failure: Option<String>,
}

impl StepInfo {
    pub(crate) fn accepted() -> Self {
        Self { accepted: true, failure: None }
    }

    pub(crate) fn rejected() -> Self {
        Self { accepted: false, failure: None }
    }

    pub(crate) fn failed(reason: String) -> Self {
        Self { accepted: false, failure: Some(reason) }
    }
}

/// Separate recoverable numerical failures (the proposal is rejected) from
/// genuine errors.
pub(crate) fn try_eval<T>(r: Result<T>) -> Result<std::result::Result<T, String>> {
    match r {
        Ok(v) => Ok(Ok(v)),
        Err(e @ (Error::SolverFailure { .. } | Error::Numerical(_))) => Ok(Err(e.to_string())),
        Err(e) => Err(e),
    }
}

/// Evaluate `Φ` (and `DΦ` when the kernel needs it) at `v`.
pub fn initial_state<T: Target + ?Sized>(
    params: &KernelParams,
    v: RealComponentVector,
    target: &mut T,
) -> Result<ChainState> {
    check_len(target.dim(), v.len())?;
    if params.uses_gradient() {
        let (phi, g) = target.potential_and_gradient(v.as_slice())?;
        Ok(ChainState { components: v, phi, grad: Some(g.into()) })
    } else {
        let phi = target.potential(v.as_slice())?;
        Ok(ChainState { components: v, phi, grad: None })
    }
}

/// One transition of the selected kernel.
pub fn kernel_step<T: Target + ?Sized>(
    params: &KernelParams,
    state: &mut ChainState,
    prior: &KraichnanPrior,
    rng: &mut ChaCha20Rng,
    target: &mut T,
) -> Result<StepInfo> {
    match *params {
        KernelParams::Pcn { beta } => pcn_step(state, beta, prior, rng, target),
        KernelParams::Is => is_step(state, prior, rng, target),
        KernelParams::Mala { h } => mala_step(state, h, prior, rng, target),
        KernelParams::Hmc { epsilon, tau } => hmc_step(state, epsilon, tau, prior, rng, target),
    }
}

/// Everything needed to continue a chain bit-for-bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub step: u64,
    pub seed: u64,
    /// ChaCha20 word position, as a decimal string (it is a 68-bit number).
    pub word_pos: String,
    pub state: ChainState,
    pub counters: SolveCounters,
    pub init_counters: SolveCounters,
    pub failures: u64,
}

/// A single Markov chain: kernel, prior, target, RNG stream and current state.
pub struct Chain<T: Target> {
    params: KernelParams,
    prior: Arc<KraichnanPrior>,
    target: T,
    state: ChainState,
    rng: ChaCha20Rng,
    seed: u64,
    step: u64,
    init_counters: SolveCounters,
    /// Target counters when this chain object started stepping.
    base_counters: SolveCounters,
    /// Step solves carried over from a checkpoint.
    carried: SolveCounters,
    failures: u64,
}

impl<T: Target> Chain<T> {
    /// Start a chain; without an explicit initial state the first draw of the
    /// chain's RNG stream is a prior sample.
    pub fn new(
        params: KernelParams,
        prior: Arc<KraichnanPrior>,
        mut target: T,
        seed: u64,
        initial: Option<RealComponentVector>,
    ) -> Result<Self> {
        params.validate()?;
        check_len(target.dim(), prior.dim())?;
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let v0 = match initial {
            Some(v) => v,
            None => prior.sample(&mut rng),
        };
        let before = target.counters();
        let state = initial_state(&params, v0, &mut target)?;
        let init_counters = target.counters() - before;
        let base_counters = target.counters();
        Ok(Self {
            params,
            prior,
            target,
            state,
            rng,
            seed,
            step: 0,
            init_counters,
            base_counters,
            carried: SolveCounters::default(),
            failures: 0,
        })
    }

    /// Continue from a checkpoint written by [`Chain::checkpoint`].
    pub fn resume(params: KernelParams, prior: Arc<KraichnanPrior>, target: T, cp: &Checkpoint) -> Result<Self> {
        params.validate()?;
        check_len(target.dim(), cp.state.components.len())?;
        let mut rng = ChaCha20Rng::seed_from_u64(cp.seed);
        let pos: u128 = cp.word_pos.parse().map_err(|_| invalid(format!("bad RNG position {:?}", cp.word_pos)))?;
        rng.set_word_pos(pos);
        let base_counters = target.counters();
        Ok(Self {
            params,
            prior,
            target,
            state: cp.state.clone(),
            rng,
            seed: cp.seed,
            step: cp.step,
            init_counters: cp.init_counters,
            base_counters,
            carried: cp.counters,
            failures: cp.failures,
        })
    }

    pub fn advance(&mut self) -> Result<StepInfo> {
        let info = kernel_step(&self.params, &mut self.state, &self.prior, &mut self.rng, &mut self.target)?;
        if info.failure.is_some() {
            self.failures += 1;
        }
        self.step += 1;
        Ok(info)
    }

    pub fn state(&self) -> &ChainState {
        &self.state
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    pub fn params(&self) -> &KernelParams {
        &self.params
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn failures(&self) -> u64 {
        self.failures
    }

    /// Solves spent by transitions (excludes evaluating the initial state).
    pub fn step_counters(&self) -> SolveCounters {
        self.target.counters() - self.base_counters + self.carried
    }

    pub fn init_counters(&self) -> SolveCounters {
        self.init_counters
    }

    pub fn target(&self) -> &T {
        &self.target
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            step: self.step,
            seed: self.seed,
            word_pos: self.rng.get_word_pos().to_string(),
            state: self.state.clone(),
            counters: self.step_counters(),
            init_counters: self.init_counters,
            failures: self.failures,
        }
    }
}

/// In-memory record of a chain run.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainRecord {
    pub samples: Vec<RealComponentVector>,
    pub phis: Vec<f64>,
    pub accepts: Vec<bool>,
    pub seed: u64,
    pub params: KernelParams,
    pub thin: usize,
    pub counters: SolveCounters,
    pub init_counters: SolveCounters,
    pub failures: u64,
    pub wall_time_secs: f64,
}

impl ChainRecord {
    pub fn acceptance_rate(&self) -> f64 {
        if self.accepts.is_empty() {
            return 0.0;
        }
        self.accepts.iter().filter(|a| **a).count() as f64 / self.accepts.len() as f64
    }

    /// Samples of component `l`.
    pub fn component(&self, l: usize) -> Vec<f64> {
        self.samples.iter().map(|s| s.0[l]).collect()
    }
}

/// Run `n_steps` transitions, recording the state after each (every `thin`-th
/// sample kept). `callback` sees the chain after every transition.
pub fn run_chain<T: Target>(
    chain: &mut Chain<T>,
    n_steps: usize,
    thin: usize,
    mut callback: impl FnMut(&Chain<T>, &StepInfo) -> Result<()>,
) -> Result<ChainRecord> {
    if n_steps == 0 {
        return Err(invalid("a chain needs at least one step"));
    }
    let thin = thin.max(1);
    let start = Instant::now();
    let counters0 = chain.step_counters();
    let failures0 = chain.failures();
    let mut rec = ChainRecord {
        samples: Vec::with_capacity(n_steps / thin),
        phis: Vec::with_capacity(n_steps),
        accepts: Vec::with_capacity(n_steps),
        seed: chain.seed(),
        params: *chain.params(),
        thin,
        counters: SolveCounters::default(),
        init_counters: chain.init_counters(),
        failures: 0,
        wall_time_secs: 0.0,
    };
    for i in 0..n_steps {
        let info = chain.advance()?;
        rec.phis.push(chain.state().phi);
        rec.accepts.push(info.accepted);
        if (i + 1) % thin == 0 {
            rec.samples.push(chain.state().components.clone());
        }
        callback(chain, &info)?;
    }
    rec.counters = chain.step_counters() - counters0;
    rec.failures = chain.failures() - failures0;
    rec.wall_time_secs = start.elapsed().as_secs_f64();
    Ok(rec)
}
