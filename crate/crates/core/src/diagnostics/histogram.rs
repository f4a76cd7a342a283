use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Uniform bin boundaries `lo + i (hi − lo)/bins`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinEdges {
    pub lo: f64,
    pub hi: f64,
    pub bins: usize,
}

impl BinEdges {
    pub fn new(lo: f64, hi: f64, bins: usize) -> Result<Self> {
        if !(hi > lo) || bins == 0 || !lo.is_finite() || !hi.is_finite() {
            return Err(invalid(format!("bad histogram range [{lo}, {hi}] with {bins} bins")));
        }
        Ok(Self { lo, hi, bins })
    }

    /// `bins` uniform bins over `mean ± width·sd` (a unit range if `sd` is zero).
    pub fn around(mean: f64, sd: f64, width: f64, bins: usize) -> Result<Self> {
        let half = if sd > 0.0 { width * sd } else { 0.5 };
        Self::new(mean - half, mean + half, bins)
    }

    pub fn width(&self) -> f64 {
        (self.hi - self.lo) / self.bins as f64
    }

    pub fn edges(&self) -> Vec<f64> {
        (0..=self.bins).map(|i| self.lo + i as f64 * self.width()).collect()
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.bins).map(|i| self.lo + (i as f64 + 0.5) * self.width()).collect()
    }

    /// Bin index; values outside the range go to the end bins.
    pub fn locate(&self, x: f64) -> usize {
        let i = ((x - self.lo) / self.width()).floor();
        if i.is_nan() || i < 0.0 {
            0
        } else {
            (i as usize).min(self.bins - 1)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram1D {
    pub edges: BinEdges,
    pub counts: Vec<u64>,
}

impl Histogram1D {
    pub fn new(edges: BinEdges) -> Self {
        Self { edges, counts: vec![0; edges.bins] }
    }

    pub fn from_samples(edges: BinEdges, xs: &[f64]) -> Self {
        let mut h = Self::new(edges);
        h.extend(xs);
        h
    }

    pub fn add(&mut self, x: f64) {
        self.counts[self.edges.locate(x)] += 1;
    }

    pub fn extend(&mut self, xs: &[f64]) {
        xs.iter().for_each(|&x| self.add(x));
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn merge(&mut self, other: &Histogram1D) -> Result<()> {
        if self.edges != other.edges {
            return Err(invalid("cannot merge histograms with different edges"));
        }
        self.counts.iter_mut().zip(&other.counts).for_each(|(a, b)| *a += b);
        Ok(())
    }

    /// Bin probabilities summing to one.
    pub fn normalized(&self) -> Result<Vec<f64>> {
        let n = self.total();
        if n == 0 {
            return Err(Error::Undefined("empty histogram".into()));
        }
        Ok(self.counts.iter().map(|&c| c as f64 / n as f64).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram2D {
    pub x_edges: BinEdges,
    pub y_edges: BinEdges,
    /// Row-major over `(x bin, y bin)`.
    pub counts: Vec<u64>,
}

impl Histogram2D {
    pub fn new(x_edges: BinEdges, y_edges: BinEdges) -> Self {
        Self { x_edges, y_edges, counts: vec![0; x_edges.bins * y_edges.bins] }
    }

    pub fn add(&mut self, x: f64, y: f64) {
        let i = self.x_edges.locate(x) * self.y_edges.bins + self.y_edges.locate(y);
        self.counts[i] += 1;
    }

    pub fn extend(&mut self, xs: &[f64], ys: &[f64]) {
        xs.iter().zip(ys).for_each(|(&x, &y)| self.add(x, y));
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn merge(&mut self, other: &Histogram2D) -> Result<()> {
        if self.x_edges != other.x_edges || self.y_edges != other.y_edges {
            return Err(invalid("cannot merge histograms with different edges"));
        }
        self.counts.iter_mut().zip(&other.counts).for_each(|(a, b)| *a += b);
        Ok(())
    }

    pub fn normalized(&self) -> Result<Vec<f64>> {
        let n = self.total();
        if n == 0 {
            return Err(Error::Undefined("empty histogram".into()));
        }
        Ok(self.counts.iter().map(|&c| c as f64 / n as f64).collect())
    }
}

/// `½ Σ |p_i − q_i|` for histograms on identical edges.
pub fn tv_distance(p: &Histogram1D, q: &Histogram1D) -> Result<f64> {
    if p.edges != q.edges {
        return Err(invalid("total variation needs identical bin edges"));
    }
    Ok(tv_probabilities(&p.normalized()?, &q.normalized()?))
}

pub fn tv_distance_2d(p: &Histogram2D, q: &Histogram2D) -> Result<f64> {
    if p.x_edges != q.x_edges || p.y_edges != q.y_edges {
        return Err(invalid("total variation needs identical bin edges"));
    }
    Ok(tv_probabilities(&p.normalized()?, &q.normalized()?))
}

pub fn tv_probabilities(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Modes of a 1D density: groups of bins above `high·peak` separated by at
/// least one bin below `low·peak`. Returns the bin index of each group's maximum.
pub fn find_modes(p: &[f64], high: f64, low: f64) -> Vec<usize> {
    let peak = p.iter().cloned().fold(0.0, f64::max);
    if peak <= 0.0 {
        return Vec::new();
    }
    let mut modes: Vec<usize> = Vec::new();
    let mut trough_since_last = true;
    for (i, &v) in p.iter().enumerate() {
        if v < low * peak {
            trough_since_last = true;
        }
        if v >= high * peak {
            if trough_since_last {
                modes.push(i);
                trough_since_last = false;
            } else if let Some(m) = modes.last_mut() {
                if v > p[*m] {
                    *m = i;
                }
            }
        }
    }
    modes
}
