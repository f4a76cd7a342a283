use rand::Rng;

use super::{try_eval, ChainState, StepInfo};
use crate::error::{invalid, Result};
use crate::inference::{KraichnanPrior, Target};

/// `−0.0 → +0.0`, so algebraically equal proposals are also bitwise equal.
#[inline]
fn canon(x: f64) -> f64 {
    x + 0.0
}

fn metropolis<T: Target + ?Sized>(
    state: &mut ChainState,
    proposal: Vec<f64>,
    u: f64,
    target: &mut T,
) -> Result<StepInfo> {
    let phi_new = match try_eval(target.potential(&proposal))? {
        Ok(p) if p.is_finite() => p,
        Ok(p) => return Ok(StepInfo::failed(format!("non-finite potential {p}"))),
        Err(reason) => return Ok(StepInfo::failed(reason)),
    };
    if u.ln() < state.phi - phi_new {
        state.components.0 = proposal;
        state.phi = phi_new;
        Ok(StepInfo::accepted())
    } else {
        Ok(StepInfo::rejected())
    }
}

/// `v' = √(1−β²) v + β ξ`, `ξ ~ N(0, C)`; accept with `min(1, exp(Φ(v) − Φ(v')))`.
pub fn pcn_step<T: Target + ?Sized, R: Rng + ?Sized>(
    state: &mut ChainState,
    beta: f64,
    prior: &KraichnanPrior,
    rng: &mut R,
    target: &mut T,
) -> Result<StepInfo> {
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(invalid(format!("pCN beta must lie in (0, 1] (got {beta})")));
    }
    let z = prior.standard_normals(rng);
    let u: f64 = rng.random();
    let c = (1.0 - beta * beta).sqrt();
    let proposal = state
        .components
        .0
        .iter()
        .zip(z.iter().zip(prior.std_devs()))
        .map(|(v, (z, s))| canon(c * v + beta * (s * z)))
        .collect();
    metropolis(state, proposal, u, target)
}

/// Fresh prior draw, same acceptance rule as pCN.
pub fn is_step<T: Target + ?Sized, R: Rng + ?Sized>(
    state: &mut ChainState,
    prior: &KraichnanPrior,
    rng: &mut R,
    target: &mut T,
) -> Result<StepInfo> {
    let z = prior.standard_normals(rng);
    let u: f64 = rng.random();
    let proposal = z.iter().zip(prior.std_devs()).map(|(z, s)| canon(s * z)).collect();
    metropolis(state, proposal, u, target)
}
