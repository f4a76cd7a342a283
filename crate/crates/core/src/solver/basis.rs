//! Real cosine/sine basis for scalar fields over the box `|k|_∞ ≤ M`.
//!
//! Index 0 is the constant mode. Representative `m` at slot `r` owns index
//! `1 + 2r` (amplitude of `cos 2πm·x`) and `2 + 2r` (amplitude of `sin 2πm·x`),
//! so `θ_m = (α − iβ)/2` and `θ_{−m} = conj(θ_m)`.

use num_complex::Complex64;

use crate::error::{invalid, Result};
use crate::field::{ScalarSpectralField, WaveVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Slot {
    Constant,
    Rep(usize),
    Conj(usize),
    Outside,
}

#[derive(Debug, Clone)]
pub struct ScalarBasis {
    cutoff: usize,
    reps: Vec<WaveVector>,
    // signed slot per box point: 0 constant, r+1 representative, −(r+1) partner
    table: Vec<i32>,
}

impl ScalarBasis {
    pub fn new(cutoff: usize) -> Result<Self> {
        if cutoff == 0 {
            return Err(invalid("scalar cutoff must be positive"));
        }
        let m = cutoff as i32;
        let mut reps: Vec<WaveVector> = (-m..=m)
            .flat_map(|kx| (0..=m).map(move |ky| WaveVector::new(kx, ky)))
            .filter(|k| k.is_representative())
            .collect();
        reps.sort_by(|a, b| a.norm_sq().cmp(&b.norm_sq()).then((a.kx, a.ky).cmp(&(b.kx, b.ky))));
        let w = (2 * m + 1) as usize;
        let mut table = vec![0i32; w * w];
        for (r, &k) in reps.iter().enumerate() {
            table[Self::box_index(m, k)] = r as i32 + 1;
            table[Self::box_index(m, -k)] = -(r as i32 + 1);
        }
        Ok(Self { cutoff, reps, table })
    }

    fn box_index(m: i32, k: WaveVector) -> usize {
        ((k.kx + m) * (2 * m + 1) + (k.ky + m)) as usize
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn dim(&self) -> usize {
        1 + 2 * self.reps.len()
    }

    pub fn representatives(&self) -> &[WaveVector] {
        &self.reps
    }

    pub(crate) fn locate(&self, k: WaveVector) -> Slot {
        let m = self.cutoff as i32;
        if k.kx.abs() > m || k.ky.abs() > m {
            return Slot::Outside;
        }
        match self.table[Self::box_index(m, k)] {
            0 => Slot::Constant,
            s if s > 0 => Slot::Rep(s as usize - 1),
            s => Slot::Conj((-s) as usize - 1),
        }
    }

    pub fn cos_index(r: usize) -> usize {
        1 + 2 * r
    }

    pub fn sin_index(r: usize) -> usize {
        2 + 2 * r
    }

    /// Wave vector carried by a basis index (zero for the constant).
    pub fn wave_vector(&self, i: usize) -> WaveVector {
        if i == 0 {
            WaveVector::ZERO
        } else {
            self.reps[(i - 1) / 2]
        }
    }

    /// `L²` Gram weights: 1 for the constant, ½ for every trigonometric mode.
    pub fn weights(&self) -> Vec<f64> {
        let mut w = vec![0.5; self.dim()];
        w[0] = 1.0;
        w
    }

    pub fn encode(&self, field: &ScalarSpectralField) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        out[0] = field.get(WaveVector::ZERO).re;
        for (r, &k) in self.reps.iter().enumerate() {
            let c = field.get(k);
            out[Self::cos_index(r)] = 2.0 * c.re;
            out[Self::sin_index(r)] = -2.0 * c.im;
        }
        out
    }

    pub fn decode(&self, coeffs: &[f64]) -> ScalarSpectralField {
        let mut f = ScalarSpectralField::zeros(self.cutoff);
        f.set(WaveVector::ZERO, coeffs[0].into());
        for (r, &k) in self.reps.iter().enumerate() {
            let c = Complex64::new(0.5 * coeffs[Self::cos_index(r)], -0.5 * coeffs[Self::sin_index(r)]);
            f.set(k, c);
            f.set(-k, c.conj());
        }
        f
    }

    /// Row vector `e` with `e · coeffs = θ(x)`.
    pub fn point_profile(&self, x: [f64; 2]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        out[0] = 1.0;
        for (r, &k) in self.reps.iter().enumerate() {
            let (s, c) = k.phase(x).sin_cos();
            out[Self::cos_index(r)] = c;
            out[Self::sin_index(r)] = s;
        }
        out
    }

    /// Coefficients of the truncated Dirac mass at `x` (complex coefficients `e^{−2πik·x}`).
    pub fn dirac_profile(&self, x: [f64; 2]) -> Vec<f64> {
        let mut out = self.point_profile(x);
        for v in &mut out[1..] {
            *v *= 2.0;
        }
        out
    }

    /// `L²` inner product of two coefficient vectors.
    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        a[0] * b[0] + 0.5 * a[1..].iter().zip(&b[1..]).map(|(x, y)| x * y).sum::<f64>()
    }
}
