//! Adjoint gradient of the data misfit with respect to flow components.
//!
//! The adjoint is the exact transpose of the discrete forward scheme. In the
//! real basis the advection operator is skew in the `L²` pairing `W`, so
//! `Pᵀ = W P₋ᵥ W⁻¹` and the transposed recursion is the forward solver run with
//! the reversed flow `−v`, driven by Dirac impulses at the observation points:
//!
//! ```text
//! P₋ᵥ μⁿ = Q₋ᵥ μⁿ⁺¹ + Σ_j c_j w_jn δ_j,      c_j = (Y_j − G_j)/σ²
//! ∂Φ/∂v_l = −(dt/2) Σ_n ⟨μⁿ⁺¹, Â_l (θⁿ + θⁿ⁺¹)⟩_W
//! ```
//!
//! A time impulse between two grid nodes is split over both with the same
//! linear weights `w_jn` used to interpolate the forward observation.

use std::sync::Arc;

use crate::error::{check_len, invalid, Result};
use crate::field::{DivFreeVelocityField, FlowIndexSet, RealComponentVector, ScalarSpectralField};
use crate::model::{ForwardProblem, ForwardSolution};
use crate::solver::{bracket, field_propagator, ObservationSpec, ScalarBasis, ScalarTrajectory, SolverConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct Impulse {
    /// Reversed time `T − t_j`.
    pub time: f64,
    pub profile: ScalarSpectralField,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdjointForcing {
    pub t_final: f64,
    pub impulses: Vec<Impulse>,
}

/// Impulses `(Y_j − G_j)/σ² · δ(x − x_j)` at reversed times.
pub fn build_adjoint_forcing(
    residuals: &[f64],
    spec: &ObservationSpec,
    sigma: f64,
    t_final: f64,
    cutoff: usize,
) -> Result<AdjointForcing> {
    if !(sigma > 0.0) {
        return Err(invalid(format!("noise level must be positive (got {sigma})")));
    }
    check_len(spec.len(), residuals.len())?;
    let inv_var = 1.0 / (sigma * sigma);
    let impulses = spec
        .points
        .iter()
        .zip(residuals)
        .map(|(p, r)| {
            let mut profile = ScalarSpectralField::zeros(cutoff);
            for k in profile.wave_vectors().collect::<Vec<_>>() {
                profile.set(k, num_complex::Complex64::from_polar(1.0, -k.phase(p.position())));
            }
            Impulse { time: t_final - p.t, profile, weight: inv_var * r }
        })
        .collect();
    Ok(AdjointForcing { t_final, impulses })
}

/// Adjoint trajectory in reversed time: node `r` holds the adjoint state at
/// forward time `(N − r)·dt`, starting from zero before the first impulse.
pub fn solve_adjoint(
    field: &DivFreeVelocityField,
    forcing: &AdjointForcing,
    config: &SolverConfig,
) -> Result<ScalarTrajectory> {
    config.validate()?;
    let basis = Arc::new(ScalarBasis::new(config.scalar_cutoff)?);
    let prop = field_propagator(&field.scaled(-1.0), &basis, config)?;
    let n = config.n_steps();
    let d = basis.dim();
    let mut f = vec![0.0; d * (n + 1)];
    for imp in &forcing.impulses {
        let b = bracket(config.t_final - imp.time, config.dt, n, config.t_final)?;
        let prof = basis.encode(&imp.profile);
        for (node, w) in [(b.node, b.w0), (b.node + 1, b.w1)] {
            if w == 0.0 || imp.weight == 0.0 {
                continue;
            }
            let r = n - node;
            for (a, p) in f[r * d..(r + 1) * d].iter_mut().zip(&prof) {
                *a += imp.weight * w * p;
            }
        }
    }
    let mut data = vec![0.0; d * (n + 1)];
    let zero = vec![0.0; d];
    for r in 0..=n {
        let (head, tail) = data.split_at_mut(r * d);
        let prev = if r == 0 { &zero[..] } else { &head[(r - 1) * d..] };
        prop.step(prev, Some(&f[r * d..(r + 1) * d]), &mut tail[..d])?;
    }
    Ok(ScalarTrajectory::from_raw(basis, config.dt, config.t_final, n, data))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientResult {
    pub gradient: RealComponentVector,
    pub phi: f64,
}

/// `½ σ⁻² Σ (Y_j − G_j)²`.
pub fn misfit(y: &[f64], predictions: &[f64], sigma: f64) -> f64 {
    let inv = 1.0 / (sigma * sigma);
    0.5 * inv * y.iter().zip(predictions).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
}

impl ForwardProblem {
    /// Adjoint states `μⁿ` for forward nodes `0..=last+1` (flat, zero beyond the last observation).
    pub(crate) fn adjoint_states(&self, v: &[f64], weights: &[f64]) -> Result<Vec<f64>> {
        let d = self.basis().dim();
        let last = self.last_node();
        let mut forcing = vec![0.0; d * (last + 1)];
        for ((b, p), &c) in self.brackets().iter().zip(&self.spec().points).zip(weights) {
            if c == 0.0 {
                continue;
            }
            let prof = self.basis().dirac_profile(p.position());
            for (node, w) in [(b.node, b.w0), (b.node + 1, b.w1)] {
                if w == 0.0 || node == 0 {
                    continue;
                }
                for (a, e) in forcing[node * d..(node + 1) * d].iter_mut().zip(&prof) {
                    *a += c * w * e;
                }
            }
        }
        let mut mu = vec![0.0; d * (last + 2)];
        if last == 0 {
            return Ok(mu);
        }
        let prop = self.propagator(v, -1.0)?;
        for n in (1..=last).rev() {
            let (head, tail) = mu.split_at_mut((n + 1) * d);
            prop.step(&tail[..d], Some(&forcing[n * d..(n + 1) * d]), &mut head[n * d..])?;
        }
        Ok(mu)
    }

    /// Gradient from an existing forward solve: one adjoint solve plus assembly.
    pub fn gradient_from(&self, v: &[f64], fwd: &ForwardSolution, y: &[f64], sigma: f64) -> Result<Vec<f64>> {
        check_len(self.n_observations(), y.len())?;
        let inv = 1.0 / (sigma * sigma);
        let weights: Vec<f64> = y.iter().zip(&fwd.predictions).map(|(a, g)| inv * (a - g)).collect();
        let mu = self.adjoint_states(v, &weights)?;
        Ok(self.assemble_gradient(&fwd.states, &mu))
    }

    fn assemble_gradient(&self, states: &[f64], mu: &[f64]) -> Vec<f64> {
        let d = self.basis().dim();
        let w = self.basis().weights();
        let ops = self.operators();
        let ncomp = self.dim();
        let mut g = vec![0.0; ncomp];
        let mut s = vec![0.0; d];
        let mut wmu = vec![0.0; d];
        for n in 0..self.last_node() {
            for i in 0..d {
                s[i] = states[n * d + i] + states[(n + 1) * d + i];
                wmu[i] = w[i] * mu[(n + 1) * d + i];
            }
            for (l, gl) in g.iter_mut().enumerate() {
                let mut acc = 0.0;
                for t in ops.component(l) {
                    acc += t.val * wmu[t.row as usize] * s[t.col as usize];
                }
                *gl += acc;
            }
        }
        let scale = -0.5 * self.config().dt;
        g.iter_mut().for_each(|x| *x *= scale);
        g
    }

    /// One forward and one adjoint solve.
    pub fn gradient(&self, v: &[f64], y: &[f64], sigma: f64) -> Result<GradientResult> {
        let fwd = self.solve(v)?;
        let phi = misfit(y, &fwd.predictions, sigma);
        let gradient = self.gradient_from(v, &fwd, y, sigma)?;
        Ok(GradientResult { gradient: RealComponentVector(gradient), phi })
    }
}

/// `DΦ` at `field` for data `y`, components in the order of `idx`.
pub fn gradient_potential(
    field: &DivFreeVelocityField,
    y: &[f64],
    theta0: &ScalarSpectralField,
    spec: &ObservationSpec,
    config: &SolverConfig,
    idx: &FlowIndexSet,
    sigma: f64,
) -> Result<GradientResult> {
    if !(sigma > 0.0) {
        return Err(invalid(format!("noise level must be positive (got {sigma})")));
    }
    let problem = ForwardProblem::new(idx, theta0, spec.clone(), config.clone())?;
    let v = field.to_components(idx)?;
    problem.gradient(v.as_slice(), y, sigma)
}

/// `⟨DΦ(v), direction⟩`.
pub fn directional_derivative(gradient: &GradientResult, direction: &RealComponentVector) -> Result<f64> {
    check_len(gradient.gradient.len(), direction.len())?;
    Ok(gradient.gradient.dot(direction))
}
