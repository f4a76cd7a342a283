//! Galerkin generator `A = κΔ − v·∇` in the real scalar basis.
//!
//! Each unit flow component acts on `cos φ_m`, `sin φ_m` (with `φ_q = 2πq·x`)
//! through product-to-sum identities; results landing outside the scalar box
//! are dropped. For `v = u cos φ_k`, `u = k⊥/|k|`:
//!
//! ```text
//! −v·∇ cos φ_m =  π(u·m) [sin φ_{m+k} + sin φ_{m−k}]
//! −v·∇ sin φ_m = −π(u·m) [cos φ_{m+k} + cos φ_{m−k}]
//! ```
//!
//! and for `v = u sin φ_k`:
//!
//! ```text
//! −v·∇ cos φ_m =  π(u·m) [cos φ_{m−k} − cos φ_{m+k}]
//! −v·∇ sin φ_m = −π(u·m) [sin φ_{m+k} − sin φ_{m−k}]
//! ```

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::{CooMatrix, CsrMatrix};

use super::basis::{ScalarBasis, Slot};
use crate::error::{check_len, Result};
use crate::field::{DivFreeVelocityField, FlowComponent, FlowIndexSet, WaveVector};

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Triplet {
    pub row: u32,
    pub col: u32,
    pub val: f64,
}

fn project_cos(basis: &ScalarBasis, q: WaveVector, coef: f64, col: usize, emit: &mut impl FnMut(usize, usize, f64)) {
    match basis.locate(q) {
        Slot::Constant => emit(0, col, coef),
        Slot::Rep(r) | Slot::Conj(r) => emit(ScalarBasis::cos_index(r), col, coef),
        Slot::Outside => {}
    }
}

fn project_sin(basis: &ScalarBasis, q: WaveVector, coef: f64, col: usize, emit: &mut impl FnMut(usize, usize, f64)) {
    match basis.locate(q) {
        Slot::Rep(r) => emit(ScalarBasis::sin_index(r), col, coef),
        Slot::Conj(r) => emit(ScalarBasis::sin_index(r), col, -coef),
        Slot::Constant | Slot::Outside => {}
    }
}

/// Entries `(row, col, value)` of the advection operator of one unit flow component.
pub(crate) fn advection_entries(basis: &ScalarBasis, comp: FlowComponent, mut emit: impl FnMut(usize, usize, f64)) {
    for (r, &m) in basis.representatives().iter().enumerate() {
        let (cc, cs) = (ScalarBasis::cos_index(r), ScalarBasis::sin_index(r));
        match comp {
            FlowComponent::MeanX | FlowComponent::MeanY => {
                let em = if comp == FlowComponent::MeanX { m.kx } else { m.ky };
                if em == 0 {
                    continue;
                }
                let c = 2.0 * PI * em as f64;
                emit(cs, cc, c);
                emit(cc, cs, -c);
            }
            FlowComponent::Cos(k) => {
                let p = k.perp_dot(m);
                if p == 0 {
                    continue;
                }
                let s = PI * p as f64 / k.norm();
                project_sin(basis, m + k, s, cc, &mut emit);
                project_sin(basis, m - k, s, cc, &mut emit);
                project_cos(basis, m + k, -s, cs, &mut emit);
                project_cos(basis, m - k, -s, cs, &mut emit);
            }
            FlowComponent::Sin(k) => {
                let p = k.perp_dot(m);
                if p == 0 {
                    continue;
                }
                let s = PI * p as f64 / k.norm();
                project_cos(basis, m - k, s, cc, &mut emit);
                project_cos(basis, m + k, -s, cc, &mut emit);
                project_sin(basis, m + k, -s, cs, &mut emit);
                project_sin(basis, m - k, s, cs, &mut emit);
            }
        }
    }
}

/// `−4π²|m|²` for every basis index.
pub(crate) fn laplacian_diagonal(basis: &ScalarBasis) -> Vec<f64> {
    (0..basis.dim()).map(|i| -4.0 * PI * PI * basis.wave_vector(i).norm_sq() as f64).collect()
}

/// Per-component advection operators for a fixed flow index set, built once
/// and reused for every flow evaluated on that index set.
#[derive(Debug, Clone)]
pub struct FlowOperators {
    basis: Arc<ScalarBasis>,
    idx: FlowIndexSet,
    laplacian: Vec<f64>,
    components: Vec<Vec<Triplet>>,
}

impl FlowOperators {
    pub fn new(idx: &FlowIndexSet, basis: Arc<ScalarBasis>) -> Self {
        let components = idx
            .components()
            .map(|comp| {
                let mut list = Vec::new();
                advection_entries(&basis, comp, |row, col, val| {
                    list.push(Triplet { row: row as u32, col: col as u32, val })
                });
                list
            })
            .collect();
        let laplacian = laplacian_diagonal(&basis);
        Self { basis, idx: idx.clone(), laplacian, components }
    }

    pub fn basis(&self) -> &Arc<ScalarBasis> {
        &self.basis
    }

    pub fn index_set(&self) -> &FlowIndexSet {
        &self.idx
    }

    pub(crate) fn laplacian(&self) -> &[f64] {
        &self.laplacian
    }

    pub(crate) fn component(&self, l: usize) -> &[Triplet] {
        &self.components[l]
    }

    /// Visit every advection entry of the flow with components `v`, scaled by amplitude.
    pub(crate) fn for_each_entry(&self, v: &[f64], mut sink: impl FnMut(usize, usize, f64)) -> Result<()> {
        check_len(self.idx.component_count(), v.len())?;
        for (l, &amp) in v.iter().enumerate() {
            if amp == 0.0 {
                continue;
            }
            for t in &self.components[l] {
                sink(t.row as usize, t.col as usize, amp * t.val);
            }
        }
        Ok(())
    }

    pub fn generator(&self, v: &[f64], kappa: f64) -> Result<Generator> {
        let mut coo = CooMatrix::new(self.basis.dim(), self.basis.dim());
        for (i, d) in self.laplacian.iter().enumerate() {
            if *d != 0.0 {
                coo.push(i, i, kappa * d);
            }
        }
        self.for_each_entry(v, |r, c, x| coo.push(r, c, x))?;
        Ok(Generator { csr: CsrMatrix::from(&coo) })
    }
}

/// Assembled generator `A` for one flow, in compressed sparse row form.
#[derive(Debug, Clone)]
pub struct Generator {
    pub(crate) csr: CsrMatrix<f64>,
}

impl Generator {
    pub fn dim(&self) -> usize {
        self.csr.nrows()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim()];
        for (i, row) in self.csr.row_iter().enumerate() {
            y[i] = row.col_indices().iter().zip(row.values()).map(|(&j, a)| a * x[j]).sum();
        }
        y
    }

    pub fn entry(&self, row: usize, col: usize) -> f64 {
        self.csr.get_entry(row, col).map(|e| e.into_value()).unwrap_or(0.0)
    }

    pub fn nnz(&self) -> usize {
        self.csr.nnz()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim(), self.dim());
        for (i, j, v) in self.csr.triplet_iter() {
            m[(i, j)] += *v;
        }
        m
    }

    pub fn apply_dense(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_vec(self.apply(x.as_slice()))
    }
}

/// Generator for an arbitrary flow, built directly from its modes.
pub fn assemble_generator(field: &DivFreeVelocityField, basis: &ScalarBasis, kappa: f64) -> Result<Generator> {
    let mut coo = CooMatrix::new(basis.dim(), basis.dim());
    for (i, d) in laplacian_diagonal(basis).into_iter().enumerate() {
        if d != 0.0 {
            coo.push(i, i, kappa * d);
        }
    }
    for_each_field_entry(field, basis, |r, c, x| coo.push(r, c, x));
    Ok(Generator { csr: CsrMatrix::from(&coo) })
}

/// Same entries as [`FlowOperators::for_each_entry`] without the precomputation,
/// for one-off flows at any cutoff.
pub(crate) fn for_each_field_entry(
    field: &DivFreeVelocityField,
    basis: &ScalarBasis,
    mut sink: impl FnMut(usize, usize, f64),
) {
    let reach = 2 * basis.cutoff() as i32;
    let mut terms: Vec<(FlowComponent, f64)> =
        vec![(FlowComponent::MeanX, field.mean_flow[0]), (FlowComponent::MeanY, field.mean_flow[1])];
    let mut modes: Vec<(WaveVector, num_complex::Complex64)> =
        field.modes().filter(|(k, _)| k.max_norm() <= reach).collect();
    modes.sort_by(|(a, _), (b, _)| a.norm_sq().cmp(&b.norm_sq()).then((a.kx, a.ky).cmp(&(b.kx, b.ky))));
    for (k, v) in modes {
        terms.push((FlowComponent::Cos(k), 2.0 * v.re));
        terms.push((FlowComponent::Sin(k), -2.0 * v.im));
    }
    for (comp, amp) in terms {
        if amp != 0.0 {
            advection_entries(basis, comp, |r, c, x| sink(r, c, amp * x));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::RealComponentVector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_field(idx: &FlowIndexSet, seed: u64) -> RealComponentVector {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        RealComponentVector((0..idx.component_count()).map(|_| rng.random_range(-1.0..1.0)).collect())
    }

    #[test]
    fn zero_flow_is_pure_diffusion() {
        let basis = Arc::new(ScalarBasis::new(3).unwrap());
        let idx = FlowIndexSet::new(2.0).unwrap();
        let ops = FlowOperators::new(&idx, basis.clone());
        let a = ops.generator(&vec![0.0; idx.component_count()], 0.5).unwrap().to_dense();
        for i in 0..basis.dim() {
            for j in 0..basis.dim() {
                let expect = if i == j { -4.0 * PI * PI * 0.5 * basis.wave_vector(i).norm_sq() as f64 } else { 0.0 };
                assert_eq!(a[(i, j)], expect);
            }
        }
    }

    #[test]
    fn constant_row_and_column_are_empty() {
        let basis = Arc::new(ScalarBasis::new(4).unwrap());
        let idx = FlowIndexSet::new(3.0).unwrap();
        let ops = FlowOperators::new(&idx, basis.clone());
        let mut v = random_field(&idx, 1).0;
        v[0] = 0.7;
        v[1] = -0.2;
        let a = ops.generator(&v, 0.1).unwrap().to_dense();
        for j in 0..basis.dim() {
            assert_eq!(a[(0, j)], 0.0);
            assert_eq!(a[(j, 0)], 0.0);
        }
    }

    #[test]
    fn advection_is_skew_in_the_l2_pairing() {
        let basis = Arc::new(ScalarBasis::new(4).unwrap());
        let idx = FlowIndexSet::new(3.0).unwrap();
        let ops = FlowOperators::new(&idx, basis.clone());
        let a = ops.generator(&random_field(&idx, 2).0, 0.0).unwrap().to_dense();
        let w = DMatrix::from_diagonal(&DVector::from_vec(basis.weights()));
        let wa = &w * &a;
        let s = &wa + wa.transpose();
        assert!(s.amax() < 1e-12 * wa.amax());
    }

    #[test]
    fn precomputed_and_direct_assembly_agree() {
        let basis = Arc::new(ScalarBasis::new(5).unwrap());
        let idx = FlowIndexSet::new(4.0).unwrap();
        let ops = FlowOperators::new(&idx, basis.clone());
        let c = random_field(&idx, 3);
        let f = DivFreeVelocityField::from_components(&c, &idx).unwrap();
        let a = ops.generator(&c.0, 0.3).unwrap().to_dense();
        let b = assemble_generator(&f, &basis, 0.3).unwrap().to_dense();
        assert_eq!(a, b);
    }

    #[test]
    fn laminar_flow_does_not_couple_y_independent_modes() {
        // v = [0, g(x)] built from k = (kx, 0) modes
        let basis = ScalarBasis::new(5).unwrap();
        let mut f = DivFreeVelocityField::zero();
        f.set_real_mode(WaveVector::new(1, 0), 1.3, -0.4).unwrap();
        f.set_real_mode(WaveVector::new(3, 0), 0.2, 0.9).unwrap();
        let a = assemble_generator(&f, &basis, 0.0).unwrap();
        for (j, &m) in basis.representatives().iter().enumerate() {
            if m.ky != 0 {
                continue;
            }
            for col in [ScalarBasis::cos_index(j), ScalarBasis::sin_index(j)] {
                for row in 0..basis.dim() {
                    assert_eq!(a.entry(row, col), 0.0);
                }
            }
        }
    }

    #[test]
    fn matches_real_space_derivative() {
        // −v·∇θ evaluated pointwise with central differences
        let basis = ScalarBasis::new(6).unwrap();
        let mut f = DivFreeVelocityField::with_mean([0.3, -0.5]);
        f.set_real_mode(WaveVector::new(1, 1), 0.8, -0.3).unwrap();
        f.set_real_mode(WaveVector::new(-2, 1), 0.1, 0.6).unwrap();
        let theta = ScalarSpectralFieldFixture::make();
        let coeffs = basis.encode(&theta);
        let a = assemble_generator(&f, &basis, 0.0).unwrap();
        let out = basis.decode(&a.apply(&coeffs));
        let h = 1e-5;
        for &x in &[[0.13, 0.42], [0.77, 0.05], [0.5, 0.91]] {
            let v = f.evaluate(x);
            let dx = (theta.evaluate([x[0] + h, x[1]]) - theta.evaluate([x[0] - h, x[1]])) / (2.0 * h);
            let dy = (theta.evaluate([x[0], x[1] + h]) - theta.evaluate([x[0], x[1] - h])) / (2.0 * h);
            let expect = -(v[0] * dx + v[1] * dy);
            assert!((out.evaluate(x) - expect).abs() < 1e-6, "{} vs {}", out.evaluate(x), expect);
        }
    }

    struct ScalarSpectralFieldFixture;
    impl ScalarSpectralFieldFixture {
        fn make() -> crate::field::ScalarSpectralField {
            use num_complex::Complex64;
            crate::field::ScalarSpectralField::from_modes(
                6,
                &[
                    (WaveVector::ZERO, 0.5.into()),
                    (WaveVector::new(1, 0), Complex64::new(-0.125, 0.0)),
                    (WaveVector::new(0, 1), Complex64::new(-0.125, 0.0)),
                    (WaveVector::new(2, -1), Complex64::new(0.05, 0.02)),
                ],
            )
            .unwrap()
        }
    }
}
