use rand::Rng;

use super::{try_eval, ChainState, StepInfo};
use crate::error::{invalid, Error, Result};
use crate::inference::{KraichnanPrior, Target};

/// `L = round(τ/ε)`.
pub fn leapfrog_steps(epsilon: f64, tau: f64) -> Result<usize> {
    if !(epsilon > 0.0) || !(tau >= epsilon) {
        return Err(invalid(format!("HMC needs tau ≥ epsilon > 0 (epsilon = {epsilon}, tau = {tau})")));
    }
    Ok(((tau / epsilon).round() as usize).max(1))
}

fn half_kick(w: &mut [f64], g: &[f64], epsilon: f64, prior: &KraichnanPrior) {
    for ((w, g), s) in w.iter_mut().zip(g).zip(prior.std_devs()) {
        *w -= 0.5 * epsilon * s * s * g;
    }
}

fn rotate(q: &mut [f64], w: &mut [f64], epsilon: f64) {
    let (sn, cs) = epsilon.sin_cos();
    for (q, w) in q.iter_mut().zip(w.iter_mut()) {
        let (q0, w0) = (*q, *w);
        *q = q0 * cs + w0 * sn;
        *w = -q0 * sn + w0 * cs;
    }
}

/// `H(q, w) = Φ(q) + ½⟨q, C⁻¹q⟩ + ½⟨w, C⁻¹w⟩`.
pub fn hamiltonian(phi: f64, q: &[f64], w: &[f64], prior: &KraichnanPrior) -> f64 {
    phi + prior.half_quadratic(q) + prior.half_quadratic(w)
}

/// Split-step leapfrog from `(q, w)` with gradient `g` at `q`: `L` times a
/// half kick, an exact rotation by `ε`, a gradient evaluation and a half kick.
/// Returns the final gradient and potential from the last evaluation.
pub fn integrate<T: Target + ?Sized>(
    q: &mut [f64],
    w: &mut [f64],
    mut g: Vec<f64>,
    epsilon: f64,
    steps: usize,
    prior: &KraichnanPrior,
    target: &mut T,
) -> Result<std::result::Result<(f64, Vec<f64>), String>> {
    let mut phi = f64::NAN;
    for _ in 0..steps {
        half_kick(w, &g, epsilon, prior);
        rotate(q, w, epsilon);
        match try_eval(target.potential_and_gradient(q))? {
            Ok((p, gn)) => {
                phi = p;
                g = gn;
            }
            Err(reason) => return Ok(Err(reason)),
        }
        half_kick(w, &g, epsilon, prior);
    }
    Ok(Ok((phi, g)))
}

/// One HMC transition with momentum `w ~ N(0, C)`; the final potential is
/// re-evaluated by a separate forward solve for the energy difference.
pub fn hmc_step<T: Target + ?Sized, R: Rng + ?Sized>(
    state: &mut ChainState,
    epsilon: f64,
    tau: f64,
    prior: &KraichnanPrior,
    rng: &mut R,
    target: &mut T,
) -> Result<StepInfo> {
    let steps = leapfrog_steps(epsilon, tau)?;
    let grad = state.grad.as_ref().ok_or_else(|| Error::Numerical("HMC state has no cached gradient".into()))?;
    let z = prior.standard_normals(rng);
    let u: f64 = rng.random();
    let mut w: Vec<f64> = z.iter().zip(prior.std_devs()).map(|(z, s)| s * z).collect();
    let mut q = state.components.0.clone();
    let h0 = hamiltonian(state.phi, &q, &w, prior);
    let (phi_dyn, g_new) = match integrate(&mut q, &mut w, grad.0.clone(), epsilon, steps, prior, target)? {
        Ok(r) => r,
        Err(reason) => return Ok(StepInfo::failed(reason)),
    };
    let phi_new = match try_eval(target.potential(&q))? {
        Ok(p) => p,
        Err(reason) => return Ok(StepInfo::failed(reason)),
    };
    if phi_new.to_bits() != phi_dyn.to_bits() {
        return Err(Error::Numerical(format!(
            "potential re-evaluation disagrees with the trajectory ({phi_new} vs {phi_dyn})"
        )));
    }
    let dh = hamiltonian(phi_new, &q, &w, prior) - h0;
    if !dh.is_finite() {
        return Ok(StepInfo::failed(format!("non-finite energy difference {dh}")));
    }
    if u.ln() < -dh {
        state.components.0 = q;
        state.phi = phi_new;
        state.grad = Some(g_new.into());
        Ok(StepInfo::accepted())
    } else {
        Ok(StepInfo::rejected())
    }
}
