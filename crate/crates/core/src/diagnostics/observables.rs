use std::f64::consts::PI;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::field::{DivFreeVelocityField, ScalarSpectralField};
use crate::solver::ScalarTrajectory;

/// Scalar observables of the flow and of the advected scalar.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum Observable {
    ScalarVariance,
    ScalarDissipation,
    Enstrophy,
    EnstrophyDissipation,
    /// `θ(t, x + r) − θ(t, x)`.
    ScalarDifference {
        x: [f64; 2],
        r: [f64; 2],
        t: f64,
    },
}

impl Observable {
    pub fn name(&self) -> &'static str {
        match self {
            Observable::ScalarVariance => "scalar_variance",
            Observable::ScalarDissipation => "scalar_dissipation",
            Observable::Enstrophy => "enstrophy",
            Observable::EnstrophyDissipation => "enstrophy_dissipation",
            Observable::ScalarDifference { .. } => "scalar_difference",
        }
    }

    pub fn needs_trajectory(&self) -> bool {
        !matches!(self, Observable::Enstrophy | Observable::EnstrophyDissipation)
    }
}

impl FromStr for Observable {
    type Err = Error;

    /// Names without parameters; `scalar_difference` uses `x = (0,0)`, `r = (½,0)`, `t = 0`.
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "scalar_variance" => Observable::ScalarVariance,
            "scalar_dissipation" => Observable::ScalarDissipation,
            "enstrophy" => Observable::Enstrophy,
            "enstrophy_dissipation" => Observable::EnstrophyDissipation,
            "scalar_difference" => Observable::ScalarDifference { x: [0.0, 0.0], r: [0.5, 0.0], t: 0.0 },
            _ => return Err(invalid(format!("unknown observable {s:?}"))),
        })
    }
}

/// `∫ (θ − θ̄)² = Σ_{k≠0} |θ_k|²`.
pub fn scalar_variance(theta: &ScalarSpectralField) -> f64 {
    theta.variance()
}

/// `2κ ∫ |∇θ|² = 2κ Σ 4π²|k|² |θ_k|²`.
pub fn scalar_dissipation(theta: &ScalarSpectralField, kappa: f64) -> f64 {
    2.0 * kappa * theta.iter().map(|(k, c)| 4.0 * PI * PI * k.norm_sq() as f64 * c.norm_sqr()).sum::<f64>()
}

/// `½ ∫ ω² = ½ Σ |ω_k|²`.
pub fn enstrophy(v: &DivFreeVelocityField) -> f64 {
    0.5 * vorticity_sum(v, 0)
}

/// `∫ |∇ω|² = Σ 4π²|k|² |ω_k|²`.
pub fn enstrophy_dissipation(v: &DivFreeVelocityField) -> f64 {
    4.0 * PI * PI * vorticity_sum(v, 1)
}

/// `Σ_k |k|^{2p} |ω_k|²` over the full lattice (both members of each pair).
fn vorticity_sum(v: &DivFreeVelocityField, p: i32) -> f64 {
    v.modes()
        .map(|(k, c)| {
            let omega2 = 4.0 * PI * PI * k.norm_sq() as f64 * c.norm_sqr();
            2.0 * (k.norm_sq() as f64).powi(p) * omega2
        })
        .sum()
}

pub fn scalar_difference(traj: &ScalarTrajectory, x: [f64; 2], r: [f64; 2], t: f64) -> Result<f64> {
    Ok(traj.evaluate_point(t, [x[0] + r[0], x[1] + r[1]])? - traj.evaluate_point(t, x)?)
}

/// Evaluate an observable on a sample. Scalar variance and dissipation use
/// the final state of `traj`; flow observables ignore it.
pub fn compute_observable(
    obs: &Observable,
    v: &DivFreeVelocityField,
    traj: Option<&ScalarTrajectory>,
    kappa: f64,
) -> Result<f64> {
    let need = || traj.ok_or_else(|| invalid(format!("{} needs a scalar trajectory", obs.name())));
    let last = |t: &ScalarTrajectory| t.state(t.len() - 1);
    match *obs {
        Observable::Enstrophy => Ok(enstrophy(v)),
        Observable::EnstrophyDissipation => Ok(enstrophy_dissipation(v)),
        Observable::ScalarVariance => Ok(scalar_variance(&last(need()?))),
        Observable::ScalarDissipation => Ok(scalar_dissipation(&last(need()?), kappa)),
        Observable::ScalarDifference { x, r, t } => scalar_difference(need()?, x, r, t),
    }
}
