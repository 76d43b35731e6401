//! Symmetric banded matrices and their Cholesky factors.

use crate::error::{Error, Result};

/// Symmetric matrix with half-bandwidth `bw`, lower band stored row by row:
/// entry (i, j), i − bw ≤ j ≤ i, lives at `i·(bw+1) + j + bw − i`.
#[derive(Debug, Clone, PartialEq)]
pub struct BandedSym {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl BandedSym {
    pub fn zeros(n: usize, bw: usize) -> Self {
        let bw = bw.min(n.saturating_sub(1));
        BandedSym {
            n,
            bw,
            data: vec![0.0; n * (bw + 1)],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> usize {
        i * (self.bw + 1) + j + self.bw - i
    }

    /// Entry (i, j) of the full symmetric matrix.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        if i - j > self.bw {
            0.0
        } else {
            self.data[self.slot(i, j)]
        }
    }

    /// Adds `v` to (i, j) and, implicitly, (j, i).
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        assert!(i - j <= self.bw, "entry outside the band");
        let s = self.slot(i, j);
        self.data[s] += v;
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for yi in y.iter_mut() {
            *yi = 0.0;
        }
        for i in 0..self.n {
            let j0 = i.saturating_sub(self.bw);
            let base = i * (self.bw + 1) + self.bw - i;
            let mut acc = self.data[base + i] * x[i];
            for j in j0..i {
                let a = self.data[base + j];
                acc += a * x[j];
                y[j] += a * x[i];
            }
            y[i] += acc;
        }
    }

    /// Upper-triangle entries (i ≤ j) that are nonzero, as (i, j, value).
    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for i in 0..self.n {
            for j in i.saturating_sub(self.bw)..=i {
                let v = self.data[self.slot(i, j)];
                if v != 0.0 {
                    out.push((j, i, v));
                }
            }
        }
        out.sort_by_key(|t| (t.0, t.1));
        out
    }

    pub fn cholesky(&self) -> Result<BandedCholesky> {
        let (n, bw) = (self.n, self.bw);
        let mut l = self.data.clone();
        let w = bw + 1;
        for i in 0..n {
            let j0 = i.saturating_sub(bw);
            for j in j0..=i {
                let k0 = j0.max(j.saturating_sub(bw));
                let mut s = l[i * w + j + bw - i];
                for k in k0..j {
                    s -= l[i * w + k + bw - i] * l[j * w + k + bw - j];
                }
                if i == j {
                    if !(s > 0.0) || !s.is_finite() {
                        return Err(Error::Assembly(format!(
                            "stiffness matrix is not positive definite (pivot {s:e} at row {i})"
                        )));
                    }
                    l[i * w + bw] = s.sqrt();
                } else {
                    l[i * w + j + bw - i] = s / l[j * w + bw];
                }
            }
        }
        Ok(BandedCholesky { n, bw, l })
    }
}

/// K = L·Lᵀ with L lower banded.
#[derive(Debug, Clone)]
pub struct BandedCholesky {
    n: usize,
    bw: usize,
    l: Vec<f64>,
}

impl BandedCholesky {
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.l[i * (self.bw + 1) + j + self.bw - i]
    }

    /// Solves L z = b in place; rows before `start` are assumed zero in b.
    pub fn forward(&self, b: &mut [f64], start: usize) {
        for i in start..self.n {
            let j0 = i.saturating_sub(self.bw).max(start);
            let mut s = b[i];
            for j in j0..i {
                s -= self.at(i, j) * b[j];
            }
            b[i] = s / self.at(i, i);
        }
    }

    /// Solves Lᵀ x = z in place.
    pub fn backward(&self, z: &mut [f64]) {
        for i in (0..self.n).rev() {
            let j1 = (i + self.bw).min(self.n - 1);
            let mut s = z[i];
            for j in i + 1..=j1 {
                s -= self.at(j, i) * z[j];
            }
            z[i] = s / self.at(i, i);
        }
    }

    /// Solves K x = b in place.
    pub fn solve(&self, b: &mut [f64]) {
        self.forward(b, 0);
        self.backward(b);
    }
}
