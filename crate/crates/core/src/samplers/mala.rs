use rand::Rng;

use super::{try_eval, ChainState, StepInfo};
use crate::error::{invalid, Error, Result};
use crate::inference::{KraichnanPrior, Target};

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `ρ(v, w) = Φ(v) + ½⟨w − v, DΦ(v)⟩ + (h/4)⟨v + w, DΦ(v)⟩ + (h/4)‖C^{1/2} DΦ(v)‖²`.
pub fn mala_rho(phi_v: f64, v: &[f64], grad_v: &[f64], w: &[f64], h: f64, prior: &KraichnanPrior) -> f64 {
    let diff: Vec<f64> = w.iter().zip(v).map(|(w, v)| w - v).collect();
    let sum: Vec<f64> = w.iter().zip(v).map(|(w, v)| w + v).collect();
    let cg = prior.apply_covariance(grad_v);
    phi_v + 0.5 * dot(&diff, grad_v) + 0.25 * h * dot(&sum, grad_v) + 0.25 * h * dot(grad_v, &cg)
}

/// Mean of the MALA proposal from `v` with gradient `g`.
pub fn mala_drift(v: &[f64], g: &[f64], h: f64, prior: &KraichnanPrior) -> Vec<f64> {
    let a = (2.0 - h) / (2.0 + h);
    let b = 2.0 * h / (2.0 + h);
    let cg = prior.apply_covariance(g);
    v.iter().zip(&cg).map(|(v, cg)| a * v - b * cg).collect()
}

/// `v' = ((2−h)/(2+h)) v − (2h/(2+h)) C DΦ(v) + (√(8h)/(2+h)) ξ`, accepted with
/// `min(1, exp(ρ(v, v') − ρ(v', v)))`.
pub fn mala_step<T: Target + ?Sized, R: Rng + ?Sized>(
    state: &mut ChainState,
    h: f64,
    prior: &KraichnanPrior,
    rng: &mut R,
    target: &mut T,
) -> Result<StepInfo> {
    if !(h > 0.0) {
        return Err(invalid(format!("MALA step h must be positive (got {h})")));
    }
    let grad = state.grad.as_ref().ok_or_else(|| Error::Numerical("MALA state has no cached gradient".into()))?;
    let z = prior.standard_normals(rng);
    let u: f64 = rng.random();
    let c = (8.0 * h).sqrt() / (2.0 + h);
    let drift = mala_drift(&state.components.0, &grad.0, h, prior);
    let proposal: Vec<f64> =
        drift.iter().zip(z.iter().zip(prior.std_devs())).map(|(m, (z, s))| m + c * (s * z)).collect();
    let (phi_new, grad_new) = match try_eval(target.potential_and_gradient(&proposal))? {
        Ok(r) => r,
        Err(reason) => return Ok(StepInfo::failed(reason)),
    };
    let v = &state.components.0;
    let log_alpha =
        mala_rho(state.phi, v, &grad.0, &proposal, h, prior) - mala_rho(phi_new, &proposal, &grad_new, v, h, prior);
    if log_alpha.is_nan() || !phi_new.is_finite() {
        return Ok(StepInfo::failed(format!("non-finite MALA log acceptance {log_alpha}")));
    }
    if u.ln() < log_alpha {
        state.components.0 = proposal;
        state.phi = phi_new;
        state.grad = Some(grad_new.into());
        Ok(StepInfo::accepted())
    } else {
        Ok(StepInfo::rejected())
    }
}
