//! Spectral Galerkin advection-diffusion solver with Crank–Nicolson stepping.

mod basis;
mod generator;
mod stepper;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use basis::ScalarBasis;
pub(crate) use generator::for_each_field_entry;
pub use generator::{assemble_generator, FlowOperators, Generator};
pub use stepper::{LinearSolverKind, Propagator, DIRECT_LIMIT};

use crate::error::{invalid, Error, Result};
use crate::field::{DivFreeVelocityField, ScalarSpectralField};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Max-norm bound on resolved scalar modes.
    #[serde(rename = "cutoff")]
    pub scalar_cutoff: usize,
    pub dt: f64,
    #[serde(default)]
    pub kappa: f64,
    pub t_final: f64,
    #[serde(default)]
    pub linear_solver: LinearSolverKind,
}

impl SolverConfig {
    pub fn new(scalar_cutoff: usize, dt: f64, kappa: f64, t_final: f64) -> Result<Self> {
        let c = Self { scalar_cutoff, dt, kappa, t_final, linear_solver: LinearSolverKind::Auto };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.scalar_cutoff == 0 {
            return Err(invalid("scalar cutoff must be positive"));
        }
        if !(self.dt > 0.0) || !(self.t_final > 0.0) || self.dt > self.t_final * (1.0 + 1e-12) {
            return Err(invalid(format!("need 0 < dt ≤ t_final (dt = {}, t_final = {})", self.dt, self.t_final)));
        }
        if !(self.kappa > 0.0) || !self.kappa.is_finite() {
            return Err(invalid(format!("kappa must be positive (got {})", self.kappa)));
        }
        Ok(())
    }

    /// Number of steps needed to reach `t_final`.
    pub fn n_steps(&self) -> usize {
        (self.t_final / self.dt - 1e-9).ceil().max(1.0) as usize
    }

    pub fn with_solver(mut self, kind: LinearSolverKind) -> Self {
        self.linear_solver = kind;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObservationPoint {
    pub t: f64,
    pub x: f64,
    pub y: f64,
}

impl ObservationPoint {
    pub fn new(t: f64, x: [f64; 2]) -> Self {
        Self { t, x: x[0], y: x[1] }
    }

    pub fn position(&self) -> [f64; 2] {
        [self.x, self.y]
    }
}

/// Ordered space-time measurement locations; the order fixes the index of `Y_j`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ObservationSpec {
    pub points: Vec<ObservationPoint>,
}

impl ObservationSpec {
    pub fn new(points: Vec<ObservationPoint>) -> Self {
        Self { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn validate(&self, t_final: f64) -> Result<()> {
        for p in &self.points {
            if !(p.t >= 0.0 && p.t <= t_final * (1.0 + 1e-12)) {
                return Err(Error::OutOfRange { t: p.t, t_final });
            }
        }
        Ok(())
    }
}

/// Grid nodes bracketing an observation time and their interpolation weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Bracket {
    pub node: usize,
    pub w0: f64,
    pub w1: f64,
}

impl Bracket {
    pub fn last_node(&self) -> usize {
        if self.w1 != 0.0 {
            self.node + 1
        } else {
            self.node
        }
    }
}

pub(crate) fn bracket(t: f64, dt: f64, n_steps: usize, t_final: f64) -> Result<Bracket> {
    if !(t >= 0.0 && t <= t_final * (1.0 + 1e-12)) {
        return Err(Error::OutOfRange { t, t_final });
    }
    let mut s = t / dt;
    let r = s.round();
    if (s - r).abs() <= 1e-9 * r.max(1.0) {
        s = r;
    }
    let mut node = s.floor() as usize;
    let mut alpha = s - node as f64;
    if node >= n_steps {
        node = n_steps - 1;
        alpha = 1.0;
    }
    Ok(Bracket { node, w0: 1.0 - alpha, w1: alpha })
}

/// Scalar coefficients on the uniform time grid `t_n = n·dt`.
#[derive(Debug, Clone)]
pub struct ScalarTrajectory {
    basis: Arc<ScalarBasis>,
    dt: f64,
    t_final: f64,
    n_steps: usize,
    data: Vec<f64>,
}

impl ScalarTrajectory {
    pub(crate) fn from_raw(basis: Arc<ScalarBasis>, dt: f64, t_final: f64, n_steps: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len() % basis.dim(), 0);
        Self { basis, dt, t_final, n_steps, data }
    }

    pub fn basis(&self) -> &ScalarBasis {
        &self.basis
    }

    /// Number of stored states (grid nodes).
    pub fn len(&self) -> usize {
        self.data.len() / self.basis.dim()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|n| n as f64 * self.dt).collect()
    }

    /// Real-basis coefficients at node `n`.
    pub fn coefficients(&self, n: usize) -> &[f64] {
        let d = self.basis.dim();
        &self.data[n * d..(n + 1) * d]
    }

    pub fn state(&self, n: usize) -> ScalarSpectralField {
        self.basis.decode(self.coefficients(n))
    }

    /// Linear interpolation in time, spectral summation in space.
    pub fn evaluate_point(&self, t: f64, x: [f64; 2]) -> Result<f64> {
        let b = bracket(t, self.dt, self.n_steps, self.t_final)?;
        if b.last_node() >= self.len() {
            return Err(Error::OutOfRange { t, t_final: (self.len() - 1) as f64 * self.dt });
        }
        let e = self.basis.point_profile(x);
        let at = |n: usize| -> f64 { e.iter().zip(self.coefficients(n)).map(|(a, c)| a * c).sum() };
        let mut v = b.w0 * at(b.node);
        if b.w1 != 0.0 {
            v += b.w1 * at(b.node + 1);
        }
        Ok(v)
    }
}

/// Run CN with forcing `forcing(n)` added on the step that produces node `n`,
/// stopping after `last` nodes. Returns the flat state array.
pub(crate) fn integrate(
    prop: &Propagator,
    initial: &[f64],
    last: usize,
    mut forcing: impl FnMut(usize) -> Option<Vec<f64>>,
) -> Result<Vec<f64>> {
    let d = initial.len();
    let mut data = vec![0.0; d * (last + 1)];
    data[..d].copy_from_slice(initial);
    for n in 1..=last {
        let (head, tail) = data.split_at_mut(n * d);
        let f = forcing(n);
        prop.step(&head[(n - 1) * d..], f.as_deref(), &mut tail[..d])?;
    }
    Ok(data)
}

/// Build the step operator for an arbitrary flow.
pub fn field_propagator(
    field: &DivFreeVelocityField,
    basis: &ScalarBasis,
    config: &SolverConfig,
) -> Result<Propagator> {
    let lap = generator::laplacian_diagonal(basis);
    let kappa = config.kappa;
    Propagator::build(
        basis.dim(),
        |i| kappa * lap[i],
        config.dt,
        config.linear_solver,
        |sink| {
            for_each_field_entry(field, basis, sink);
            Ok(())
        },
    )
}

/// Full trajectory on the grid `0, dt, …, n_steps·dt`.
pub fn solve_forward(
    field: &DivFreeVelocityField,
    theta0: &ScalarSpectralField,
    config: &SolverConfig,
) -> Result<ScalarTrajectory> {
    config.validate()?;
    if theta0.reality_defect() > 1e-12 {
        return Err(invalid("initial condition violates the reality condition"));
    }
    let basis = Arc::new(ScalarBasis::new(config.scalar_cutoff)?);
    let prop = field_propagator(field, &basis, config)?;
    let x0 = basis.encode(theta0);
    let n = config.n_steps();
    let data = integrate(&prop, &x0, n, |_| None)?;
    Ok(ScalarTrajectory::from_raw(basis, config.dt, config.t_final, n, data))
}

/// One CN step with an explicit generator (dense or sparse), for tests and tools.
pub fn step_crank_nicolson(state: &[f64], a: &Generator, dt: f64) -> Result<Vec<f64>> {
    let prop = Propagator::build(
        a.dim(),
        |i| a.entry(i, i),
        dt,
        LinearSolverKind::Auto,
        |sink| {
            for (i, j, v) in a.csr.triplet_iter() {
                if i != j {
                    sink(i, j, *v);
                }
            }
            Ok(())
        },
    )?;
    let mut out = vec![0.0; state.len()];
    prop.step(state, None, &mut out)?;
    Ok(out)
}
