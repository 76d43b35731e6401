//! Independent eigenvalue oracle for measures on (0,1): the exact atomic string.

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::measure::MeasureApprox;

#[derive(Debug, Clone, Serialize)]
pub struct StringOracle {
    pub eigenvalues: Vec<f64>,
    /// Number of distinct interior atoms (the rank of the string's mass matrix).
    pub atoms: usize,
    pub dropped_boundary_atoms: usize,
}

/// Eigenvalues of the string with point masses at the atoms and fixed ends at 0 and 1:
/// stiffness from inverse gap lengths, diagonal mass. Computed by Sturm-sequence bisection
/// on the tridiagonal pencil K − λW, which resolves every eigenvalue to full relative precision.
pub fn discrete_string_oracle(mu: &MeasureApprox, k: usize) -> Result<StringOracle> {
    if mu.is_empty() {
        return Err(Error::EmptyMeasure);
    }
    if mu.positions().iter().any(|p| p[1] != 0.0 || p[2] != 0.0) {
        return Err(invalid("string oracle needs a measure on the line"));
    }
    let mut atoms: Vec<(f64, f64)> = Vec::with_capacity(mu.len());
    let mut dropped = 0;
    for (p, &w) in mu.positions().iter().zip(mu.weights()) {
        let x = p[0];
        if !(-1e-12..=1.0 + 1e-12).contains(&x) {
            return Err(Error::Domain(format!("atom at {x} outside [0,1]")));
        }
        if x <= 0.0 || x >= 1.0 || w == 0.0 {
            dropped += 1;
            continue;
        }
        atoms.push((x, w));
    }
    atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut merged: Vec<(f64, f64)> = Vec::with_capacity(atoms.len());
    for (x, w) in atoms {
        match merged.last_mut() {
            Some(last) if last.0 == x => last.1 += w,
            _ => merged.push((x, w)),
        }
    }
    let n = merged.len();
    if n == 0 {
        return Err(Error::EmptyMeasure);
    }
    let mut diag = vec![0.0; n];
    let mut off = vec![0.0; n.saturating_sub(1)];
    let mut prev = 0.0;
    for i in 0..n {
        let g = 1.0 / (merged[i].0 - prev);
        diag[i] += g;
        if i > 0 {
            diag[i - 1] += g;
            off[i - 1] = -g;
        }
        prev = merged[i].0;
    }
    diag[n - 1] += 1.0 / (1.0 - prev);
    let w: Vec<f64> = merged.iter().map(|a| a.1).collect();
    let off2: Vec<f64> = off.iter().map(|e| e * e).collect();

    // number of eigenvalues below λ = negative pivots of K − λW
    let count = |lam: f64| -> usize {
        let mut neg = 0;
        let mut q = 1.0;
        for i in 0..n {
            let mut d = diag[i] - lam * w[i];
            if i > 0 {
                d -= off2[i - 1] / q;
            }
            if d == 0.0 {
                d = -f64::MIN_POSITIVE;
            }
            if d < 0.0 {
                neg += 1;
            }
            q = d;
        }
        neg
    };
    let mut upper: f64 = 0.0;
    for i in 0..n {
        let mut r = diag[i].abs();
        if i > 0 {
            r += off[i - 1].abs();
        }
        if i + 1 < n {
            r += off[i].abs();
        }
        upper = upper.max(r / w[i]);
    }
    let take = k.min(n);
    let mut eigenvalues = Vec::with_capacity(take);
    for j in 1..=take {
        let (mut lo, mut hi) = (0.0, upper * (1.0 + 1e-12));
        for _ in 0..2000 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if count(mid) >= j {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        eigenvalues.push(0.5 * (lo + hi));
    }
    Ok(StringOracle {
        eigenvalues,
        atoms: n,
        dropped_boundary_atoms: dropped,
    })
}
