//! Divergence-free velocity fields and spectral scalar fields on the unit torus.
//!
//! A flow is stored through its representative wave vectors only: for every
//! lattice point `k` in the half-lattice `{ky > 0} ∪ {ky = 0, kx > 0}` we keep
//! the complex amplitude `v_k`, and the partner coefficient is implied by
//! `conj(v_k) = -v_{-k}`. The physical Fourier coefficient of the velocity is
//! `c_k = v_k k⊥/|k|` with `k⊥ = [-ky, kx]`, so every representable field is
//! real and exactly divergence free.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Integer wave vector on the lattice `Z²`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct WaveVector {
    pub kx: i32,
    pub ky: i32,
}

impl WaveVector {
    pub const ZERO: WaveVector = WaveVector { kx: 0, ky: 0 };

    pub const fn new(kx: i32, ky: i32) -> Self {
        Self { kx, ky }
    }

    pub fn norm_sq(self) -> i64 {
        let (x, y) = (self.kx as i64, self.ky as i64);
        x * x + y * y
    }

    pub fn norm(self) -> f64 {
        (self.norm_sq() as f64).sqrt()
    }

    pub fn max_norm(self) -> i32 {
        self.kx.abs().max(self.ky.abs())
    }

    /// `k⊥ = [-ky, kx]`.
    pub fn perp(self) -> [i32; 2] {
        [-self.ky, self.kx]
    }

    /// Integer product `k⊥ · m`, exact.
    pub fn perp_dot(self, m: WaveVector) -> i64 {
        -(self.ky as i64) * (m.kx as i64) + (self.kx as i64) * (m.ky as i64)
    }

    pub fn dot(self, m: WaveVector) -> i64 {
        (self.kx as i64) * (m.kx as i64) + (self.ky as i64) * (m.ky as i64)
    }

    /// Unit direction `k⊥/|k|` of the flow mode at this wave vector.
    pub fn flow_direction(self) -> [f64; 2] {
        let n = self.norm();
        [-(self.ky as f64) / n, self.kx as f64 / n]
    }

    /// True for members of the half-lattice `{ky > 0} ∪ {ky = 0, kx > 0}`.
    pub fn is_representative(self) -> bool {
        self.ky > 0 || (self.ky == 0 && self.kx > 0)
    }

    /// Phase `2π k·x`.
    pub fn phase(self, x: [f64; 2]) -> f64 {
        2.0 * PI * (self.kx as f64 * x[0] + self.ky as f64 * x[1])
    }
}

impl std::ops::Neg for WaveVector {
    type Output = WaveVector;
    fn neg(self) -> WaveVector {
        WaveVector::new(-self.kx, -self.ky)
    }
}

impl std::ops::Add for WaveVector {
    type Output = WaveVector;
    fn add(self, o: WaveVector) -> WaveVector {
        WaveVector::new(self.kx + o.kx, self.ky + o.ky)
    }
}

impl std::ops::Sub for WaveVector {
    type Output = WaveVector;
    fn sub(self, o: WaveVector) -> WaveVector {
        WaveVector::new(self.kx - o.kx, self.ky - o.ky)
    }
}

impl fmt::Display for WaveVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.kx, self.ky)
    }
}

/// One real coordinate of the flow parameterisation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlowComponent {
    MeanX,
    MeanY,
    /// Amplitude of `(k⊥/|k|) cos(2πk·x)`.
    Cos(WaveVector),
    /// Amplitude of `(k⊥/|k|) sin(2πk·x)`.
    Sin(WaveVector),
}

/// Canonically ordered set of representative flow modes with `|k|₂ ≤ cutoff`.
///
/// Ordering: by `|k|₂` ascending, then `(kx, ky)` lexicographically.
#[derive(Debug, Clone)]
pub struct FlowIndexSet {
    cutoff: f64,
    representatives: Vec<WaveVector>,
    lookup: HashMap<WaveVector, usize>,
}

impl PartialEq for FlowIndexSet {
    fn eq(&self, other: &Self) -> bool {
        self.cutoff == other.cutoff && self.representatives == other.representatives
    }
}

impl FlowIndexSet {
    pub fn new(cutoff: f64) -> Result<Self> {
        if !(cutoff >= 1.0) || !cutoff.is_finite() {
            return Err(invalid(format!(
                "flow cutoff must be at least 1 (got {cutoff}); no flow modes exist below it"
            )));
        }
        let r = cutoff.floor() as i32;
        let bound = cutoff * cutoff * (1.0 + 1e-12);
        let mut reps: Vec<WaveVector> = Vec::new();
        for ky in 0..=r {
            for kx in -r..=r {
                let k = WaveVector::new(kx, ky);
                if k.is_representative() && (k.norm_sq() as f64) <= bound {
                    reps.push(k);
                }
            }
        }
        reps.sort_by(|a, b| a.norm_sq().cmp(&b.norm_sq()).then((a.kx, a.ky).cmp(&(b.kx, b.ky))));
        Ok(Self::from_ordered(cutoff, reps))
    }

    fn from_ordered(cutoff: f64, representatives: Vec<WaveVector>) -> Self {
        let lookup = representatives.iter().enumerate().map(|(i, &k)| (k, i)).collect();
        Self { cutoff, representatives, lookup }
    }

    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    pub fn representatives(&self) -> &[WaveVector] {
        &self.representatives
    }

    pub fn mode_count(&self) -> usize {
        self.representatives.len()
    }

    /// `2 + 2·|representatives|`.
    pub fn component_count(&self) -> usize {
        2 + 2 * self.representatives.len()
    }

    pub fn slot(&self, k: WaveVector) -> Option<usize> {
        self.lookup.get(&k).copied()
    }

    pub fn contains(&self, k: WaveVector) -> bool {
        self.lookup.contains_key(&k)
    }

    pub fn component(&self, index: usize) -> FlowComponent {
        match index {
            0 => FlowComponent::MeanX,
            1 => FlowComponent::MeanY,
            i => {
                let k = self.representatives[(i - 2) / 2];
                if i % 2 == 0 {
                    FlowComponent::Cos(k)
                } else {
                    FlowComponent::Sin(k)
                }
            }
        }
    }

    pub fn components(&self) -> impl Iterator<Item = FlowComponent> + '_ {
        (0..self.component_count()).map(move |i| self.component(i))
    }

    /// Largest `|k|_∞` among the representatives.
    pub fn max_wavenumber(&self) -> i32 {
        self.representatives.iter().map(|k| k.max_norm()).max().unwrap_or(0)
    }
}

#[derive(Serialize, Deserialize)]
struct FlowIndexSetRepr {
    cutoff: f64,
    modes: Vec<[i32; 2]>,
}

impl Serialize for FlowIndexSet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        FlowIndexSetRepr { cutoff: self.cutoff, modes: self.representatives.iter().map(|k| [k.kx, k.ky]).collect() }
            .serialize(s)
    }
}

impl<'de> Deserialize<'de> for FlowIndexSet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = FlowIndexSetRepr::deserialize(d)?;
        let rebuilt = FlowIndexSet::new(repr.cutoff).map_err(serde::de::Error::custom)?;
        let listed: Vec<WaveVector> = repr.modes.iter().map(|m| WaveVector::new(m[0], m[1])).collect();
        if listed != rebuilt.representatives {
            return Err(serde::de::Error::custom("mode list does not match the canonical ordering for this cutoff"));
        }
        Ok(rebuilt)
    }
}

/// Flat real coordinates of a flow: `[mean_x, mean_y, a_k1, b_k1, a_k2, b_k2, ...]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RealComponentVector(pub Vec<f64>);

impl RealComponentVector {
    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    /// Little-endian `f64` bytes in canonical order.
    pub fn to_le_bytes(&self) -> Vec<u8> {
        self.0.iter().flat_map(|v| v.to_le_bytes()).collect()
    }

    pub fn from_le_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() % 8 != 0 {
            return Err(invalid("byte length is not a multiple of 8"));
        }
        Ok(Self(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8"))).collect()))
    }
}

impl AsRef<[f64]> for RealComponentVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for RealComponentVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

/// Incompressible periodic flow `v(x) = mean + Σ_k v_k (k⊥/|k|) e^{2πik·x}`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DivFreeVelocityField {
    pub mean_flow: [f64; 2],
    modes: BTreeMap<WaveVector, Complex64>,
}

impl DivFreeVelocityField {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn with_mean(mean_flow: [f64; 2]) -> Self {
        Self { mean_flow, modes: BTreeMap::new() }
    }

    /// Set the amplitude `v_k`. Non-representative vectors are folded onto
    /// their representative through `v_{-k} = -conj(v_k)`.
    pub fn set_mode(&mut self, k: WaveVector, v: Complex64) -> Result<()> {
        if k == WaveVector::ZERO {
            return Err(invalid("k = 0 is the mean flow, not a mode"));
        }
        if k.is_representative() {
            self.modes.insert(k, v);
        } else {
            self.modes.insert(-k, -v.conj());
        }
        Ok(())
    }

    /// Set a mode from its real cosine/sine amplitudes.
    pub fn set_real_mode(&mut self, k: WaveVector, a: f64, b: f64) -> Result<()> {
        self.set_mode(k, Complex64::new(0.5 * a, -0.5 * b))
    }

    /// Amplitude `v_k` for any nonzero `k`.
    pub fn mode(&self, k: WaveVector) -> Complex64 {
        if k.is_representative() {
            self.modes.get(&k).copied().unwrap_or_default()
        } else {
            -self.modes.get(&-k).copied().unwrap_or_default().conj()
        }
    }

    pub fn modes(&self) -> impl Iterator<Item = (WaveVector, Complex64)> + '_ {
        self.modes.iter().map(|(k, v)| (*k, *v))
    }

    /// Physical Fourier coefficient `c_k` (a complex 2-vector). `k = 0` gives the mean.
    pub fn coefficient(&self, k: WaveVector) -> [Complex64; 2] {
        if k == WaveVector::ZERO {
            return [self.mean_flow[0].into(), self.mean_flow[1].into()];
        }
        let v = self.mode(k);
        let u = k.flow_direction();
        [v * u[0], v * u[1]]
    }

    /// All nonzero physical coefficients over the full lattice (both signs).
    pub fn full_coefficients(&self) -> Vec<(WaveVector, [Complex64; 2])> {
        let mut out = Vec::with_capacity(2 * self.modes.len());
        for (&k, _) in &self.modes {
            out.push((k, self.coefficient(k)));
            out.push((-k, self.coefficient(-k)));
        }
        out
    }

    pub fn from_components(values: &RealComponentVector, idx: &FlowIndexSet) -> Result<Self> {
        crate::error::check_len(idx.component_count(), values.len())?;
        let v = values.as_slice();
        let mut field = Self::with_mean([v[0], v[1]]);
        for (j, &k) in idx.representatives().iter().enumerate() {
            let (a, b) = (v[2 + 2 * j], v[3 + 2 * j]);
            if a != 0.0 || b != 0.0 {
                field.set_real_mode(k, a, b)?;
            }
        }
        Ok(field)
    }

    pub fn to_components(&self, idx: &FlowIndexSet) -> Result<RealComponentVector> {
        let mut out = vec![0.0; idx.component_count()];
        out[0] = self.mean_flow[0];
        out[1] = self.mean_flow[1];
        for (&k, &v) in &self.modes {
            let j = idx.slot(k).ok_or_else(|| {
                Error::IndexMismatch(format!("mode {k} is outside the index set (cutoff {})", idx.cutoff()))
            })?;
            out[2 + 2 * j] = 2.0 * v.re;
            out[3 + 2 * j] = -2.0 * v.im;
        }
        Ok(RealComponentVector(out))
    }

    /// Drop modes outside `idx`.
    pub fn truncate(&self, idx: &FlowIndexSet) -> Self {
        Self {
            mean_flow: self.mean_flow,
            modes: self.modes.iter().filter(|(k, _)| idx.contains(**k)).map(|(k, v)| (*k, *v)).collect(),
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            mean_flow: [c * self.mean_flow[0], c * self.mean_flow[1]],
            modes: self.modes.iter().map(|(k, v)| (*k, v * c)).collect(),
        }
    }

    /// Largest `|k|_∞` over stored modes (0 for a pure mean flow).
    pub fn max_wavenumber(&self) -> i32 {
        self.modes.keys().map(|k| k.max_norm()).max().unwrap_or(0)
    }

    /// Complex sum `Σ_k c_k e^{2πik·x}` over the full lattice; the imaginary
    /// parts vanish up to summation round-off.
    pub fn evaluate_complex(&self, x: [f64; 2]) -> [Complex64; 2] {
        let mut s = [Complex64::from(self.mean_flow[0]), Complex64::from(self.mean_flow[1])];
        for (k, c) in self.full_coefficients() {
            let e = Complex64::from_polar(1.0, k.phase(x));
            s[0] += c[0] * e;
            s[1] += c[1] * e;
        }
        s
    }

    pub fn evaluate(&self, x: [f64; 2]) -> [f64; 2] {
        let x = [x[0].rem_euclid(1.0), x[1].rem_euclid(1.0)];
        let s = self.evaluate_complex(x);
        [s[0].re, s[1].re]
    }

    /// Spectral curl `ω_k = 2πi (kx c_{k,y} − ky c_{k,x})`, which simplifies to `2πi|k| v_k`.
    pub fn vorticity(&self) -> ScalarSpectralField {
        let cutoff = self.max_wavenumber().max(1) as usize;
        let mut w = ScalarSpectralField::zeros(cutoff);
        for (k, c) in self.full_coefficients() {
            let curl = Complex64::new(0.0, 2.0 * PI) * (c[1] * k.kx as f64 - c[0] * k.ky as f64);
            w.set(k, curl);
        }
        w
    }

    /// `½ Σ_{|k'| = k} |c_{k'}|²` over the whole lattice shell (both signs).
    pub fn shell_energy(&self, k: u32) -> f64 {
        let target = (k as i64) * (k as i64);
        self.modes.iter().filter(|(q, _)| q.norm_sq() == target).map(|(_, v)| v.norm_sqr()).sum()
    }

    /// `(Σ_{k≠0} |k|^{2s} |c_k|²)^{1/2}` over both signs of every mode.
    pub fn sobolev_norm(&self, s: f64) -> f64 {
        sobolev_norm(self.modes.iter().flat_map(|(&k, v)| [(k, v.norm_sqr()), (-k, v.norm_sqr())]), s)
    }
}

/// `(Σ_{k≠0} |k|^{2s} |c_k|²)^{1/2}` for a list of `(k, |c_k|²)` pairs.
pub fn sobolev_norm<I: IntoIterator<Item = (WaveVector, f64)>>(terms: I, s: f64) -> f64 {
    terms
        .into_iter()
        .filter(|(k, _)| *k != WaveVector::ZERO)
        .map(|(k, c2)| (k.norm_sq() as f64).powf(s) * c2)
        .sum::<f64>()
        .sqrt()
}

/// Dense complex Fourier coefficients over the box `|k|_∞ ≤ cutoff`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarSpectralField {
    cutoff: usize,
    coeffs: Vec<Complex64>,
}

impl ScalarSpectralField {
    pub fn zeros(cutoff: usize) -> Self {
        let w = 2 * cutoff + 1;
        Self { cutoff, coeffs: vec![Complex64::default(); w * w] }
    }

    /// Field with the given coefficients; conjugate partners are filled in so
    /// the result is real.
    pub fn from_modes(cutoff: usize, modes: &[(WaveVector, Complex64)]) -> Result<Self> {
        let mut f = Self::zeros(cutoff);
        for &(k, c) in modes {
            if k.max_norm() as usize > cutoff {
                return Err(invalid(format!("mode {k} exceeds scalar cutoff {cutoff}")));
            }
            if k == WaveVector::ZERO {
                f.set(k, Complex64::from(c.re));
            } else {
                f.set(k, c);
                f.set(-k, c.conj());
            }
        }
        Ok(f)
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    fn index(&self, k: WaveVector) -> Option<usize> {
        let m = self.cutoff as i32;
        if k.kx.abs() > m || k.ky.abs() > m {
            return None;
        }
        let w = 2 * m + 1;
        Some(((k.kx + m) * w + (k.ky + m)) as usize)
    }

    pub fn get(&self, k: WaveVector) -> Complex64 {
        self.index(k).map(|i| self.coeffs[i]).unwrap_or_default()
    }

    /// Set one coefficient; silently ignored outside the box.
    pub fn set(&mut self, k: WaveVector, c: Complex64) {
        if let Some(i) = self.index(k) {
            self.coeffs[i] = c;
        }
    }

    pub fn wave_vectors(&self) -> impl Iterator<Item = WaveVector> {
        let m = self.cutoff as i32;
        (-m..=m).flat_map(move |kx| (-m..=m).map(move |ky| WaveVector::new(kx, ky)))
    }

    pub fn iter(&self) -> impl Iterator<Item = (WaveVector, Complex64)> + '_ {
        self.wave_vectors().zip(self.coeffs.iter().copied())
    }

    /// Re-embed into a box with a different cutoff (truncating or zero padding).
    pub fn with_cutoff(&self, cutoff: usize) -> Self {
        let mut out = Self::zeros(cutoff);
        for (k, c) in self.iter() {
            out.set(k, c);
        }
        out
    }

    /// `max_k |θ_k − conj(θ_{−k})|`.
    pub fn reality_defect(&self) -> f64 {
        self.iter().map(|(k, c)| (c - self.get(-k).conj()).norm()).fold(0.0, f64::max)
    }

    pub fn evaluate_complex(&self, x: [f64; 2]) -> Complex64 {
        self.iter()
            .filter(|(_, c)| *c != Complex64::default())
            .map(|(k, c)| c * Complex64::from_polar(1.0, k.phase(x)))
            .sum()
    }

    pub fn evaluate(&self, x: [f64; 2]) -> f64 {
        self.evaluate_complex(x).re
    }

    pub fn mean(&self) -> f64 {
        self.get(WaveVector::ZERO).re
    }

    /// `‖θ − θ̄‖²_{L²}` by Parseval.
    pub fn variance(&self) -> f64 {
        self.iter().filter(|(k, _)| *k != WaveVector::ZERO).map(|(_, c)| c.norm_sqr()).sum()
    }

    pub fn sobolev_norm(&self, s: f64) -> f64 {
        sobolev_norm(self.iter().map(|(k, c)| (k, c.norm_sqr())), s)
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self { cutoff: self.cutoff, coeffs: self.coeffs.iter().map(|c| c * a).collect() }
    }
}
