//! Eigenvalue counting function N(λ) and its log-log growth exponent.

use serde::Serialize;

use crate::dimension::linear_fit;

pub const WEYL_MIN_EIGENVALUES: usize = 20;

#[derive(Debug, Clone, Serialize)]
pub struct WeylFit {
    /// (λ, N(λ)) at each distinct eigenvalue.
    pub table: Vec<(f64, usize)>,
    pub exponent: Option<f64>,
    pub intercept: Option<f64>,
    pub residual: Option<f64>,
    /// Inclusive index range of sorted eigenvalues used in the fit.
    pub window: Option<(usize, usize)>,
    pub note: Option<String>,
}

/// N(λ) = #{n : λₙ ≤ λ} and the least-squares slope of ln N against ln λ over the
/// middle two quartiles of the eigenvalues.
pub fn weyl_counting(eigenvalues: &[f64]) -> WeylFit {
    let mut ev: Vec<f64> = eigenvalues.to_vec();
    ev.sort_by(f64::total_cmp);
    let mut table: Vec<(f64, usize)> = Vec::new();
    for (i, &l) in ev.iter().enumerate() {
        match table.last_mut() {
            Some(last) if last.0 == l => last.1 = i + 1,
            _ => table.push((l, i + 1)),
        }
    }
    let n = ev.len();
    if n < WEYL_MIN_EIGENVALUES {
        return WeylFit {
            table,
            exponent: None,
            intercept: None,
            residual: None,
            window: None,
            note: Some(format!(
                "exponent undefined: {n} eigenvalue(s), at least {WEYL_MIN_EIGENVALUES} needed"
            )),
        };
    }
    let (lo, hi) = (n / 4, (3 * n) / 4 - 1);
    let count_at = |l: f64| ev.partition_point(|x| *x <= l);
    let xs: Vec<f64> = ev[lo..=hi].iter().map(|l| l.ln()).collect();
    let ys: Vec<f64> = ev[lo..=hi].iter().map(|&l| (count_at(l) as f64).ln()).collect();
    let (a, b, res) = linear_fit(&xs, &ys);
    WeylFit {
        table,
        exponent: Some(b),
        intercept: Some(a),
        residual: Some(res),
        window: Some((lo, hi)),
        note: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn dirichlet_string_exponent_half() {
        let ev: Vec<f64> = (1..=200).map(|k| (k as f64 * PI).powi(2)).collect();
        let f = weyl_counting(&ev);
        assert!((f.exponent.unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(f.table.len(), 200);
    }

    #[test]
    fn single_eigenvalue_flagged() {
        let f = weyl_counting(&[4.0]);
        assert_eq!(f.table, vec![(4.0, 1)]);
        assert!(f.exponent.is_none() && f.note.is_some());
    }

    #[test]
    fn ties_counted() {
        let f = weyl_counting(&[1.0, 2.0, 2.0, 3.0]);
        assert_eq!(f.table, vec![(1.0, 1), (2.0, 3), (3.0, 4)]);
    }
}
