//! Precomputed forward map `G = O ∘ S` for a fixed scenario.
//!
//! Everything that does not depend on the flow (scalar basis, per-component
//! advection operators, observation brackets and profiles) is built once and
//! shared read-only; each evaluation only assembles and factors the step
//! operator for the given flow components.

use std::sync::Arc;

use crate::error::{check_len, invalid, Result};
use crate::field::{DivFreeVelocityField, FlowIndexSet, RealComponentVector, ScalarSpectralField};
pub(crate) use crate::solver::Bracket;
use crate::solver::{
    bracket, integrate, FlowOperators, ObservationSpec, Propagator, ScalarBasis, ScalarTrajectory, SolverConfig,
};

#[derive(Debug, Clone)]
pub struct ForwardProblem {
    ops: FlowOperators,
    config: SolverConfig,
    theta0: Vec<f64>,
    spec: ObservationSpec,
    brackets: Vec<Bracket>,
    profiles: Vec<Vec<f64>>,
    last_node: usize,
}

/// States up to the last observation node plus the predicted observations.
#[derive(Debug, Clone)]
pub struct ForwardSolution {
    pub(crate) states: Vec<f64>,
    pub predictions: Vec<f64>,
}

impl ForwardProblem {
    pub fn new(
        idx: &FlowIndexSet,
        theta0: &ScalarSpectralField,
        spec: ObservationSpec,
        config: SolverConfig,
    ) -> Result<Self> {
        config.validate()?;
        spec.validate(config.t_final)?;
        if theta0.reality_defect() > 1e-12 {
            return Err(invalid("initial condition violates the reality condition"));
        }
        let basis = Arc::new(ScalarBasis::new(config.scalar_cutoff)?);
        let ops = FlowOperators::new(idx, basis.clone());
        let n_steps = config.n_steps();
        let brackets =
            spec.points.iter().map(|p| bracket(p.t, config.dt, n_steps, config.t_final)).collect::<Result<Vec<_>>>()?;
        let profiles = spec.points.iter().map(|p| basis.point_profile(p.position())).collect();
        let last_node = brackets.iter().map(|b| b.last_node()).max().unwrap_or(0);
        let theta0 = basis.encode(theta0);
        Ok(Self { ops, config, theta0, spec, brackets, profiles, last_node })
    }

    pub fn index_set(&self) -> &FlowIndexSet {
        self.ops.index_set()
    }

    pub fn basis(&self) -> &ScalarBasis {
        self.ops.basis()
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    pub fn spec(&self) -> &ObservationSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.ops.index_set().component_count()
    }

    pub fn n_observations(&self) -> usize {
        self.spec.len()
    }

    pub(crate) fn operators(&self) -> &FlowOperators {
        &self.ops
    }

    pub(crate) fn brackets(&self) -> &[Bracket] {
        &self.brackets
    }

    pub(crate) fn last_node(&self) -> usize {
        self.last_node
    }

    /// Step operator for the flow `sign · v`.
    pub(crate) fn propagator(&self, v: &[f64], sign: f64) -> Result<Propagator> {
        let lap = self.ops.laplacian();
        let kappa = self.config.kappa;
        Propagator::build(
            self.basis().dim(),
            |i| kappa * lap[i],
            self.config.dt,
            self.config.linear_solver,
            |sink| self.ops.for_each_entry(v, |r, c, x| sink(r, c, sign * x)),
        )
    }

    pub fn solve(&self, v: &[f64]) -> Result<ForwardSolution> {
        check_len(self.dim(), v.len())?;
        if self.last_node == 0 {
            return Ok(ForwardSolution { predictions: self.observe(&self.theta0), states: self.theta0.clone() });
        }
        let prop = self.propagator(v, 1.0)?;
        let states = integrate(&prop, &self.theta0, self.last_node, |_| None)?;
        let predictions = self.observe(&states);
        Ok(ForwardSolution { states, predictions })
    }

    /// `G(v)`.
    pub fn predict(&self, v: &[f64]) -> Result<Vec<f64>> {
        Ok(self.solve(v)?.predictions)
    }

    fn observe(&self, states: &[f64]) -> Vec<f64> {
        let d = self.basis().dim();
        let dot = |e: &[f64], n: usize| -> f64 { e.iter().zip(&states[n * d..(n + 1) * d]).map(|(a, b)| a * b).sum() };
        self.brackets
            .iter()
            .zip(&self.profiles)
            .map(|(b, e)| {
                let mut g = b.w0 * dot(e, b.node);
                if b.w1 != 0.0 {
                    g += b.w1 * dot(e, b.node + 1);
                }
                g
            })
            .collect()
    }

    /// Full trajectory to `t_final` for the flow with components `v`.
    pub fn trajectory(&self, v: &[f64]) -> Result<ScalarTrajectory> {
        check_len(self.dim(), v.len())?;
        let prop = self.propagator(v, 1.0)?;
        let n = self.config.n_steps();
        let data = integrate(&prop, &self.theta0, n, |_| None)?;
        Ok(ScalarTrajectory::from_raw(self.ops.basis().clone(), self.config.dt, self.config.t_final, n, data))
    }
}

/// Index set that holds every mode of `field`.
pub(crate) fn covering_index_set(field: &DivFreeVelocityField) -> Result<FlowIndexSet> {
    let r2 = field.modes().map(|(k, _)| k.norm_sq()).max().unwrap_or(1).max(1);
    FlowIndexSet::new((r2 as f64).sqrt())
}

/// `G(v)` for a single flow.
pub fn forward_map(
    field: &DivFreeVelocityField,
    theta0: &ScalarSpectralField,
    spec: &ObservationSpec,
    config: &SolverConfig,
) -> Result<Vec<f64>> {
    if spec.is_empty() {
        return Ok(Vec::new());
    }
    let idx = covering_index_set(field)?;
    let problem = ForwardProblem::new(&idx, theta0, spec.clone(), config.clone())?;
    let v: RealComponentVector = field.to_components(&idx)?;
    problem.predict(v.as_slice())
}
