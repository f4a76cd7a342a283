//! Kraichnan prior, Gaussian likelihood and synthetic data.

use std::f64::consts::PI;
use std::path::Path;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::adjoint::misfit;
use crate::error::{check_len, invalid, Error, Result};
use crate::field::{DivFreeVelocityField, FlowIndexSet, RealComponentVector, ScalarSpectralField};
use crate::io::num;
use crate::model::{covering_index_set, ForwardProblem};
use crate::solver::{ObservationPoint, ObservationSpec, SolverConfig};

/// Reference amplitude of the `|k| = 1` prior components used to fix `E₀`.
pub const UNIT_SHELL_STD: f64 = 2.5;

fn spectrum_sum(k: f64, n: u32, xi: f64) -> f64 {
    (0..=n)
        .map(|i| {
            let ki = 2f64.sqrt().powi(i as i32);
            let r = k / ki;
            r.powi(4) * (-1.5 * r * r).exp() * ki.powf(-xi)
        })
        .sum()
}

/// `E(k) = E₀ Σ_{i=0}^{N} (k/k_i)⁴ exp(−(3/2)(k/k_i)²) k_i^{−ξ}`, `k_i = √2^i`.
pub fn kraichnan_energy(k: f64, e0: f64, n: u32, xi: f64) -> Result<f64> {
    if !(k > 0.0) {
        return Err(invalid(format!("wavenumber must be positive (got {k})")));
    }
    Ok(e0 * spectrum_sum(k, n, xi))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorParams {
    pub e0: f64,
    pub n: u32,
    pub xi: f64,
    #[serde(default)]
    pub mean_flow_var: f64,
}

impl PriorParams {
    /// `N = 10`, `ξ = 3/2`, `E₀` chosen so the `|k| = 1` components have standard deviation 2.5.
    pub fn standard() -> Self {
        Self::with_unit_std(10, 1.5, UNIT_SHELL_STD)
    }

    pub fn with_unit_std(n: u32, xi: f64, std: f64) -> Self {
        let e0 = 2.0 * PI * std * std / spectrum_sum(1.0, n, xi);
        Self { e0, n, xi, mean_flow_var: 0.0 }
    }
}

/// Diagonal Gaussian `N(0, C)` on flow components, `C_ll = E(|k_l|)/(2π|k_l|)`.
#[derive(Debug, Clone)]
pub struct KraichnanPrior {
    params: PriorParams,
    idx: FlowIndexSet,
    std: Vec<f64>,
}

impl KraichnanPrior {
    pub fn new(params: PriorParams, idx: &FlowIndexSet) -> Result<Self> {
        if !(params.e0 >= 0.0) || !(params.mean_flow_var >= 0.0) {
            return Err(invalid("prior energy and mean-flow variance must be non-negative"));
        }
        let mut std = vec![params.mean_flow_var.sqrt(); 2];
        for &k in idx.representatives() {
            let kn = k.norm();
            let s = (kraichnan_energy(kn, params.e0, params.n, params.xi)? / (2.0 * PI * kn)).sqrt();
            std.push(s);
            std.push(s);
        }
        Ok(Self { params, idx: idx.clone(), std })
    }

    /// Prior with explicit per-component standard deviations (used by toy targets).
    pub fn from_std(std: Vec<f64>) -> Result<Self> {
        if std.iter().any(|s| !(*s >= 0.0)) {
            return Err(invalid("standard deviations must be non-negative"));
        }
        let params = PriorParams { e0: 0.0, n: 0, xi: 0.0, mean_flow_var: 0.0 };
        let idx = FlowIndexSet::new(1.0)?;
        Ok(Self { params, idx, std })
    }

    pub fn params(&self) -> &PriorParams {
        &self.params
    }

    pub fn index_set(&self) -> &FlowIndexSet {
        &self.idx
    }

    pub fn dim(&self) -> usize {
        self.std.len()
    }

    pub fn std_devs(&self) -> &[f64] {
        &self.std
    }

    pub fn variances(&self) -> Vec<f64> {
        self.std.iter().map(|s| s * s).collect()
    }

    /// Standard normals for every component (including zero-variance ones, so
    /// the stream layout does not depend on the prior).
    pub fn standard_normals<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        (0..self.dim()).map(|_| StandardNormal.sample(rng)).collect()
    }

    /// `ξ ~ N(0, C)`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> RealComponentVector {
        let z = self.standard_normals(rng);
        RealComponentVector(z.iter().zip(&self.std).map(|(z, s)| s * z).collect())
    }

    pub fn sample_field<R: Rng + ?Sized>(&self, rng: &mut R) -> DivFreeVelocityField {
        DivFreeVelocityField::from_components(&self.sample(rng), &self.idx)
            .expect("prior dimension matches its index set")
    }

    /// `C g`.
    pub fn apply_covariance(&self, g: &[f64]) -> Vec<f64> {
        g.iter().zip(&self.std).map(|(g, s)| s * s * g).collect()
    }

    /// `½⟨q, C⁻¹ q⟩` over components with positive variance.
    pub fn half_quadratic(&self, q: &[f64]) -> f64 {
        0.5 * q.iter().zip(&self.std).filter(|(_, s)| **s > 0.0).map(|(q, s)| (q / s) * (q / s)).sum::<f64>()
    }

    /// Expected shell energy `Σ_{reps on shell} (σ_a² + σ_b²)/4`.
    pub fn expected_shell_energy(&self, k: u32) -> f64 {
        let target = (k as i64) * (k as i64);
        self.idx
            .representatives()
            .iter()
            .enumerate()
            .filter(|(_, q)| q.norm_sq() == target)
            .map(|(j, _)| (self.std[2 + 2 * j].powi(2) + self.std[3 + 2 * j].powi(2)) / 4.0)
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub sigma: f64,
}

impl NoiseModel {
    pub fn new(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(invalid(format!("noise level must be positive (got {sigma})")));
        }
        Ok(Self { sigma })
    }
}

/// Data `Y` paired with the locations it was measured at.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSet {
    pub y: Vec<f64>,
    pub spec: ObservationSpec,
}

impl ObservationSet {
    pub fn new(y: Vec<f64>, spec: ObservationSpec) -> Result<Self> {
        check_len(spec.len(), y.len())?;
        Ok(Self { y, spec })
    }

    /// CSV with columns `t,x,y,value`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
        w.write_record(["t", "x", "y", "value"]).map_err(csv_err)?;
        for (p, v) in self.spec.points.iter().zip(&self.y) {
            w.write_record([num(p.t), num(p.x), num(p.y), num(*v)]).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
        let mut points = Vec::new();
        let mut y = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(csv_err)?;
            let f = |i: usize| -> Result<f64> {
                rec.get(i)
                    .ok_or_else(|| invalid(format!("data row has {} columns, expected 4", rec.len())))?
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| invalid(format!("bad number in data file: {e}")))
            };
            points.push(ObservationPoint { t: f(0)?, x: f(1)?, y: f(2)? });
            y.push(f(3)?);
        }
        Self::new(y, ObservationSpec::new(points))
    }
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::InvalidArgument(format!("csv: {other:?}")),
    }
}

/// `Y = G(v*)`, optionally plus `N(0, σ²)` noise.
pub fn generate_data<R: Rng + ?Sized>(
    true_field: &DivFreeVelocityField,
    theta0: &ScalarSpectralField,
    spec: &ObservationSpec,
    config: &SolverConfig,
    noise: &NoiseModel,
    add_noise: bool,
    rng: &mut R,
) -> Result<ObservationSet> {
    let idx = covering_index_set(true_field)?;
    let problem = ForwardProblem::new(&idx, theta0, spec.clone(), config.clone())?;
    generate_data_with(&problem, &true_field.to_components(&idx)?, noise, add_noise, rng)
}

/// As [`generate_data`] for a flow already expressed on the problem's index set.
pub fn generate_data_with<R: Rng + ?Sized>(
    problem: &ForwardProblem,
    truth: &RealComponentVector,
    noise: &NoiseModel,
    add_noise: bool,
    rng: &mut R,
) -> Result<ObservationSet> {
    let mut y = problem.predict(truth.as_slice())?;
    if add_noise {
        for v in &mut y {
            let z: f64 = StandardNormal.sample(rng);
            *v += noise.sigma * z;
        }
    }
    ObservationSet::new(y, problem.spec().clone())
}

/// `Φ(v; Y) = ½σ⁻²‖Y − G(v)‖²`.
pub fn potential(
    field: &DivFreeVelocityField,
    obs: &ObservationSet,
    noise: &NoiseModel,
    theta0: &ScalarSpectralField,
    config: &SolverConfig,
) -> Result<f64> {
    if obs.y.is_empty() {
        return Ok(0.0);
    }
    let idx = covering_index_set(field)?;
    let problem = ForwardProblem::new(&idx, theta0, obs.spec.clone(), config.clone())?;
    let g = problem.predict(field.to_components(&idx)?.as_slice())?;
    Ok(misfit(&obs.y, &g, noise.sigma))
}

/// PDE solve counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SolveCounters {
    pub forward: u64,
    pub adjoint: u64,
}

impl std::ops::Sub for SolveCounters {
    type Output = SolveCounters;
    fn sub(self, o: SolveCounters) -> SolveCounters {
        SolveCounters { forward: self.forward - o.forward, adjoint: self.adjoint - o.adjoint }
    }
}

impl std::ops::Add for SolveCounters {
    type Output = SolveCounters;
    fn add(self, o: SolveCounters) -> SolveCounters {
        SolveCounters { forward: self.forward + o.forward, adjoint: self.adjoint + o.adjoint }
    }
}

/// Potential `Φ` and its gradient on the component space, as seen by a sampler.
pub trait Target {
    fn dim(&self) -> usize;
    fn potential(&mut self, v: &[f64]) -> Result<f64>;
    fn potential_and_gradient(&mut self, v: &[f64]) -> Result<(f64, Vec<f64>)>;
    fn counters(&self) -> SolveCounters;
}

/// Posterior potential of the PDE model; one instance per chain.
#[derive(Debug, Clone)]
pub struct PdeTarget {
    problem: Arc<ForwardProblem>,
    y: Arc<Vec<f64>>,
    sigma: f64,
    counters: SolveCounters,
}

impl PdeTarget {
    pub fn new(problem: Arc<ForwardProblem>, y: Arc<Vec<f64>>, noise: NoiseModel) -> Result<Self> {
        check_len(problem.n_observations(), y.len())?;
        Ok(Self { problem, y, sigma: noise.sigma, counters: SolveCounters::default() })
    }

    pub fn problem(&self) -> &ForwardProblem {
        &self.problem
    }
}

impl Target for PdeTarget {
    fn dim(&self) -> usize {
        self.problem.dim()
    }

    fn potential(&mut self, v: &[f64]) -> Result<f64> {
        self.counters.forward += 1;
        let g = self.problem.predict(v)?;
        Ok(misfit(&self.y, &g, self.sigma))
    }

    fn potential_and_gradient(&mut self, v: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.counters.forward += 1;
        let fwd = self.problem.solve(v)?;
        let phi = misfit(&self.y, &fwd.predictions, self.sigma);
        self.counters.adjoint += 1;
        let g = self.problem.gradient_from(v, &fwd, &self.y, self.sigma)?;
        Ok((phi, g))
    }

    fn counters(&self) -> SolveCounters {
        self.counters
    }
}

/// `Φ(v) = ½σ⁻²‖Y − Hv‖²` for a dense matrix `H`; the conjugate-Gaussian test target.
#[derive(Debug, Clone)]
pub struct LinearGaussianTarget {
    h: nalgebra::DMatrix<f64>,
    y: nalgebra::DVector<f64>,
    sigma: f64,
    counters: SolveCounters,
}

impl LinearGaussianTarget {
    pub fn new(h: nalgebra::DMatrix<f64>, y: Vec<f64>, sigma: f64) -> Result<Self> {
        check_len(h.nrows(), y.len())?;
        NoiseModel::new(sigma)?;
        Ok(Self { h, y: nalgebra::DVector::from_vec(y), sigma, counters: SolveCounters::default() })
    }

    /// Posterior mean and covariance under the prior `N(0, diag(prior_var))`.
    pub fn posterior(&self, prior_var: &[f64]) -> (nalgebra::DVector<f64>, nalgebra::DMatrix<f64>) {
        let c0_inv = nalgebra::DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            prior_var.len(),
            prior_var.iter().map(|v| 1.0 / v),
        ));
        let prec = c0_inv + self.h.transpose() * &self.h / (self.sigma * self.sigma);
        let cov = prec.try_inverse().expect("posterior precision is positive definite");
        let mean = &cov * self.h.transpose() * &self.y / (self.sigma * self.sigma);
        (mean, cov)
    }

    fn residual(&self, v: &[f64]) -> nalgebra::DVector<f64> {
        &self.y - &self.h * nalgebra::DVector::from_column_slice(v)
    }
}

impl Target for LinearGaussianTarget {
    fn dim(&self) -> usize {
        self.h.ncols()
    }

    fn potential(&mut self, v: &[f64]) -> Result<f64> {
        self.counters.forward += 1;
        Ok(0.5 * self.residual(v).norm_squared() / (self.sigma * self.sigma))
    }

    fn potential_and_gradient(&mut self, v: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.counters.forward += 1;
        self.counters.adjoint += 1;
        let r = self.residual(v);
        let s2 = self.sigma * self.sigma;
        let g = -(self.h.transpose() * &r) / s2;
        Ok((0.5 * r.norm_squared() / s2, g.as_slice().to_vec()))
    }

    fn counters(&self) -> SolveCounters {
        self.counters
    }
}
