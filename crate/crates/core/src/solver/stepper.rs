//! Crank–Nicolson propagation `(I − dt/2 A) θ⁺ = (I + dt/2 A) θ + f`.
//!
//! With `P = I − (dt/2)A` the right-hand operator is `2I − P`, so a step is
//! `θ⁺ = P⁻¹(2θ + f) − θ` and only `P` is ever factored or applied.

use nalgebra::{DMatrix, DVectorViewMut, Dyn, LU};
use nalgebra_sparse::{CooMatrix, CsrMatrix};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest basis dimension for which `Auto` picks the dense factorisation.
pub const DIRECT_LIMIT: usize = 3000;

const ITERATIVE_TOLERANCE: f64 = 1e-10;
const ITERATIVE_MAX_ITERATIONS: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinearSolverKind {
    #[default]
    Auto,
    Direct,
    Iterative,
}

impl LinearSolverKind {
    fn use_direct(self, dim: usize) -> bool {
        match self {
            LinearSolverKind::Auto => dim <= DIRECT_LIMIT,
            LinearSolverKind::Direct => true,
            LinearSolverKind::Iterative => false,
        }
    }
}

enum Inner {
    Direct(LU<f64, Dyn, Dyn>),
    Iterative { p: CsrMatrix<f64>, inv_diag: Vec<f64> },
}

/// One-step propagator for a fixed generator, factored once.
pub struct Propagator {
    dim: usize,
    inner: Inner,
}

impl Propagator {
    /// Build from the diagonal of `A` and a stream of off-diagonal/advection entries.
    pub(crate) fn build(
        dim: usize,
        diagonal: impl Fn(usize) -> f64,
        dt: f64,
        kind: LinearSolverKind,
        entries: impl FnOnce(&mut dyn FnMut(usize, usize, f64)) -> Result<()>,
    ) -> Result<Self> {
        let h = 0.5 * dt;
        if kind.use_direct(dim) {
            let mut p = DMatrix::<f64>::identity(dim, dim);
            for i in 0..dim {
                p[(i, i)] -= h * diagonal(i);
            }
            entries(&mut |r, c, v| p[(r, c)] -= h * v)?;
            Ok(Self { dim, inner: Inner::Direct(p.lu()) })
        } else {
            let mut coo = CooMatrix::new(dim, dim);
            let mut diag = vec![1.0; dim];
            for (i, d) in diag.iter_mut().enumerate() {
                *d -= h * diagonal(i);
                coo.push(i, i, *d);
            }
            entries(&mut |r, c, v| {
                if r == c {
                    diag[r] -= h * v;
                }
                coo.push(r, c, -h * v)
            })?;
            let inv_diag = diag.iter().map(|d| 1.0 / d).collect();
            Ok(Self { dim, inner: Inner::Iterative { p: CsrMatrix::from(&coo), inv_diag } })
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_direct(&self) -> bool {
        matches!(self.inner, Inner::Direct(_))
    }

    /// Advance `x` by one step with optional additive forcing `f`, writing into `out`.
    pub fn step(&self, x: &[f64], forcing: Option<&[f64]>, out: &mut [f64]) -> Result<()> {
        for i in 0..self.dim {
            out[i] = 2.0 * x[i] + forcing.map_or(0.0, |f| f[i]);
        }
        match &self.inner {
            Inner::Direct(lu) => {
                let mut view = DVectorViewMut::from_slice(out, self.dim);
                if !lu.solve_mut(&mut view) {
                    return Err(Error::Numerical("singular Crank-Nicolson matrix".into()));
                }
            }
            Inner::Iterative { p, inv_diag } => {
                let b = out.to_vec();
                let guess: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
                let y = bicgstab(p, inv_diag, &b, guess)?;
                out.copy_from_slice(&y);
            }
        }
        for i in 0..self.dim {
            out[i] -= x[i];
        }
        Ok(())
    }
}

fn matvec(a: &CsrMatrix<f64>, x: &[f64], y: &mut [f64]) {
    for (i, row) in a.row_iter().enumerate() {
        y[i] = row.col_indices().iter().zip(row.values()).map(|(&j, v)| v * x[j]).sum();
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Jacobi-preconditioned BiCGSTAB.
fn bicgstab(a: &CsrMatrix<f64>, inv_diag: &[f64], b: &[f64], mut x: Vec<f64>) -> Result<Vec<f64>> {
    let n = b.len();
    let b_norm = dot(b, b).sqrt();
    if b_norm == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let mut r = vec![0.0; n];
    matvec(a, &x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    let r_hat = r.clone();
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut p_hat = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut s_hat = vec![0.0; n];
    let mut t = vec![0.0; n];
    let mut residual = dot(&r, &r).sqrt() / b_norm;
    if residual <= ITERATIVE_TOLERANCE {
        return Ok(x);
    }
    for iter in 0..ITERATIVE_MAX_ITERATIONS {
        let rho_new = dot(&r_hat, &r);
        if rho_new == 0.0 {
            return Err(Error::SolverFailure { residual, iterations: iter });
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
            p_hat[i] = inv_diag[i] * p[i];
        }
        matvec(a, &p_hat, &mut v);
        alpha = rho / dot(&r_hat, &v);
        for i in 0..n {
            s[i] = r[i] - alpha * v[i];
        }
        if dot(&s, &s).sqrt() / b_norm <= ITERATIVE_TOLERANCE {
            for i in 0..n {
                x[i] += alpha * p_hat[i];
            }
            return Ok(x);
        }
        for i in 0..n {
            s_hat[i] = inv_diag[i] * s[i];
        }
        matvec(a, &s_hat, &mut t);
        let tt = dot(&t, &t);
        omega = if tt > 0.0 { dot(&t, &s) / tt } else { 0.0 };
        for i in 0..n {
            x[i] += alpha * p_hat[i] + omega * s_hat[i];
            r[i] = s[i] - omega * t[i];
        }
        residual = dot(&r, &r).sqrt() / b_norm;
        if residual <= ITERATIVE_TOLERANCE {
            return Ok(x);
        }
        if omega == 0.0 || !residual.is_finite() {
            return Err(Error::SolverFailure { residual, iterations: iter + 1 });
        }
    }
    Err(Error::SolverFailure { residual, iterations: ITERATIVE_MAX_ITERATIONS })
}
