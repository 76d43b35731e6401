use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{BandedCholesky, GalerkinSystem, Mesh};
use crate::error::{invalid, Error, Result};

/// Largest dense eigenproblem, min(dofs, atoms).
pub const DENSE_MAX_DIM: usize = 4096;
/// Largest dof × atom product for which K⁻¹P is kept in memory (box meshes).
pub const DENSE_MAX_ENTRIES: usize = 40_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMethod {
    Auto,
    Dense,
    Subspace,
}

#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    pub method: SolveMethod,
    /// Convergence tolerance of the subspace iteration, relative to the largest Ritz value.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            method: SolveMethod::Auto,
            tol: 1e-13,
            max_iter: 5000,
        }
    }
}

/// Eigenpairs of K c = λ M c on the complement of the measure-null space.
#[derive(Debug, Clone, Serialize)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    /// Coefficients on the interior dofs, M-orthonormal.
    #[serde(skip)]
    pub vectors: Vec<Vec<f64>>,
    /// ‖K c − λ M c‖₂ per pair.
    pub residuals: Vec<f64>,
    /// max |cᵢᵀ M cⱼ − δᵢⱼ|.
    pub orthonormality_error: f64,
    pub rank: usize,
    pub requested: usize,
    pub rank_note: Option<String>,
    pub method: SolveMethod,
}

// √w·φ columns: P̃ = P W^{1/2}
fn scatter(sys: &GalerkinSystem, a: usize, y: f64, out: &mut [f64]) {
    let col = &sys.atoms()[a];
    let s = col.weight.sqrt() * y;
    for (d, v) in col.entries() {
        out[d] += s * v;
    }
}

fn gather(sys: &GalerkinSystem, x: &[f64], a: usize) -> f64 {
    let col = &sys.atoms()[a];
    col.weight.sqrt() * col.eval(x)
}

/// Solves the generalized eigenproblem through the compressed atom-side matrix
/// G = W^{1/2} Pᵀ K⁻¹ P W^{1/2}, whose nonzero eigenvalues are 1/λ.
pub fn solve_spectrum(sys: &GalerkinSystem, k: usize, opts: SolveOptions) -> Result<Spectrum> {
    if k == 0 {
        return Err(invalid("k must be at least 1"));
    }
    let chol = sys.stiffness().cholesky()?;
    let n = sys.dof_count();
    let na = sys.atoms().len();
    if na == 0 {
        return Ok(Spectrum {
            eigenvalues: Vec::new(),
            vectors: Vec::new(),
            residuals: Vec::new(),
            orthonormality_error: 0.0,
            rank: 0,
            requested: k,
            rank_note: Some("measure has no mass in the interior: rank(M) = 0".into()),
            method: SolveMethod::Dense,
        });
    }
    let method = match opts.method {
        SolveMethod::Auto => {
            let kernel = n < na || matches!(sys.mesh(), Mesh::Line { .. });
            if n.min(na) <= DENSE_MAX_DIM && (kernel || n.saturating_mul(na) <= DENSE_MAX_ENTRIES) {
                SolveMethod::Dense
            } else {
                SolveMethod::Subspace
            }
        }
        m => m,
    };
    let (sigmas, vectors, rank) = match method {
        SolveMethod::Dense => dense_pairs(sys, &chol, k)?,
        _ => subspace_pairs(sys, &chol, k, opts)?,
    };

    let mut eigenvalues = Vec::with_capacity(sigmas.len());
    let mut residuals = Vec::with_capacity(sigmas.len());
    let mut kc = vec![0.0; n];
    let mut mc = vec![0.0; n];
    for (s, c) in sigmas.iter().zip(&vectors) {
        let lam = 1.0 / s;
        sys.stiffness().matvec(c, &mut kc);
        sys.mass_apply(c, &mut mc);
        let r = kc
            .iter()
            .zip(&mc)
            .map(|(a, b)| (a - lam * b).powi(2))
            .sum::<f64>()
            .sqrt();
        eigenvalues.push(lam);
        residuals.push(r);
    }
    let mut ortho: f64 = 0.0;
    let evals: Vec<Vec<f64>> = vectors
        .iter()
        .map(|c| sys.atoms().iter().map(|a| a.weight.sqrt() * a.eval(c)).collect())
        .collect();
    for i in 0..evals.len() {
        for j in 0..=i {
            let d: f64 = evals[i].iter().zip(&evals[j]).map(|(a, b)| a * b).sum();
            let want = if i == j { 1.0 } else { 0.0 };
            ortho = ortho.max((d - want).abs());
        }
    }
    let rank_note = (k > rank).then(|| format!("requested {k} eigenpairs but rank(M) = {rank}; returning {rank}"));
    if eigenvalues.iter().any(|l| !(*l > 0.0) || !l.is_finite()) {
        return Err(Error::Numeric("non-positive or non-finite eigenvalue".into()));
    }
    Ok(Spectrum {
        eigenvalues,
        vectors,
        residuals,
        orthonormality_error: ortho,
        rank,
        requested: k,
        rank_note,
        method,
    })
}

fn rank_cutoff(sigma_max: f64, na: usize) -> f64 {
    sigma_max * 64.0 * f64::EPSILON * na as f64
}

type Pairs = (Vec<f64>, Vec<Vec<f64>>, usize);
/// (σ values, eigenvector matrix, kept column indices, rank).
type TopPairs = (Vec<f64>, DMatrix<f64>, Vec<usize>, usize);

/// Eigenpairs of a dense symmetric matrix, largest first, cut at the numerical rank.
fn top_pairs(h: DMatrix<f64>, k: usize) -> Result<TopPairs> {
    let dim = h.nrows();
    let h = (&h + h.transpose()) * 0.5;
    let eig = SymmetricEigen::new(h);
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let smax = eig.eigenvalues[order[0]];
    if !(smax > 0.0) {
        return Err(Error::Numeric("compressed operator has no positive eigenvalue".into()));
    }
    let cut = rank_cutoff(smax, dim);
    let rank = order.iter().filter(|&&i| eig.eigenvalues[i] > cut).count();
    order.truncate(k.min(rank));
    let sigmas = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    Ok((sigmas, eig.eigenvectors, order, rank))
}

fn dense_pairs(sys: &GalerkinSystem, chol: &BandedCholesky, k: usize) -> Result<Pairs> {
    let n = sys.dof_count();
    let na = sys.atoms().len();
    if n < na {
        return dof_side_pairs(sys, chol, k);
    }
    if let Mesh::Line { nodes } = sys.mesh() {
        return green_pairs(sys, nodes, k);
    }
    // X = K⁻¹ P̃, column-major
    let mut x = vec![0.0; n * na];
    let fill = |a: usize, col: &mut [f64]| {
        scatter(sys, a, 1.0, col);
        let start = sys.atoms()[a].entries().map(|(d, _)| d).min().unwrap_or(0);
        chol.forward(col, start);
        chol.backward(col);
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        x.par_chunks_mut(n).enumerate().for_each(|(a, col)| fill(a, col));
    }
    #[cfg(not(feature = "parallel"))]
    {
        for (a, col) in x.chunks_mut(n).enumerate() {
            fill(a, col);
        }
    }
    let mut g = DMatrix::<f64>::zeros(na, na);
    for b in 0..na {
        let col = &x[b * n..(b + 1) * n];
        for a in 0..na {
            g[(a, b)] = gather(sys, col, a);
        }
    }
    let (sigmas, vecs, order, rank) = top_pairs(g, k)?;
    let mut vectors = Vec::with_capacity(order.len());
    for (&i, s) in order.iter().zip(&sigmas) {
        let y = vecs.column(i);
        let mut c = vec![0.0; n];
        for a in 0..na {
            let ya = y[a] / s;
            if ya != 0.0 {
                let col = &x[a * n..(a + 1) * n];
                for (ci, xi) in c.iter_mut().zip(col) {
                    *ci += ya * xi;
                }
            }
        }
        vectors.push(c);
    }
    Ok((sigmas, vectors, rank))
}

/// On a line the P1 stiffness inverse is the Green kernel (x−a)(b−y)/(b−a) sampled at the
/// nodes, so G is assembled from sums of positive terms instead of triangular solves.
fn green_pairs(sys: &GalerkinSystem, nodes: &[f64], k: usize) -> Result<Pairs> {
    let n = sys.dof_count();
    let na = sys.atoms().len();
    let (lo, hi) = (nodes[0], nodes[nodes.len() - 1]);
    let len = hi - lo;
    let xs: Vec<f64> = sys.node_of_dof().iter().map(|&v| nodes[v]).collect();
    let green = |i: usize, j: usize| {
        let (p, q) = if xs[i] <= xs[j] { (xs[i], xs[j]) } else { (xs[j], xs[i]) };
        (p - lo) * (hi - q) / len
    };
    let atoms = sys.atoms();
    let row = |a: usize| -> Vec<f64> {
        let ca = &atoms[a];
        (0..na)
            .map(|b| {
                let cb = &atoms[b];
                let mut s = 0.0;
                for (i, u) in ca.entries() {
                    for (j, v) in cb.entries() {
                        s += u * v * green(i, j);
                    }
                }
                (ca.weight * cb.weight).sqrt() * s
            })
            .collect()
    };
    #[cfg(feature = "parallel")]
    let rows: Vec<Vec<f64>> = {
        use rayon::prelude::*;
        (0..na).into_par_iter().map(row).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let rows: Vec<Vec<f64>> = (0..na).map(row).collect();
    let g = DMatrix::<f64>::from_fn(na, na, |a, b| rows[a][b]);
    let (sigmas, vecs, order, rank) = top_pairs(g, k)?;
    let mut vectors = Vec::with_capacity(order.len());
    for (&i, s) in order.iter().zip(&sigmas) {
        let mut f = vec![0.0; n];
        for a in 0..na {
            scatter(sys, a, vecs[(a, i)] / s, &mut f);
        }
        vectors.push(green_solve(&xs, lo, hi, &f));
    }
    Ok((sigmas, vectors, rank))
}

/// u = K⁻¹ f on a line through the Green kernel, with two prefix sums.
fn green_solve(xs: &[f64], lo: f64, hi: f64, f: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let len = hi - lo;
    let mut left = vec![0.0; n];
    let mut acc = 0.0;
    for j in 0..n {
        acc += (xs[j] - lo) * f[j];
        left[j] = acc;
    }
    let mut u = vec![0.0; n];
    let mut right = 0.0;
    for i in (0..n).rev() {
        u[i] = ((hi - xs[i]) * left[i] + (xs[i] - lo) * right) / len;
        right += (hi - xs[i]) * f[i];
    }
    u
}

/// Dof-side standard form L⁻¹ M L⁻ᵀ with K = LLᵀ, used when atoms outnumber dofs.
fn dof_side_pairs(sys: &GalerkinSystem, chol: &BandedCholesky, k: usize) -> Result<Pairs> {
    let n = sys.dof_count();
    let column = |j: usize| -> Vec<f64> {
        let mut v = vec![0.0; n];
        v[j] = 1.0;
        chol.backward(&mut v);
        let mut w = vec![0.0; n];
        sys.mass_apply(&v, &mut w);
        chol.forward(&mut w, 0);
        w
    };
    #[cfg(feature = "parallel")]
    let cols: Vec<Vec<f64>> = {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(column).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let cols: Vec<Vec<f64>> = (0..n).map(column).collect();
    let h = DMatrix::<f64>::from_fn(n, n, |i, j| cols[j][i]);
    let (sigmas, vecs, order, rank) = top_pairs(h, k)?;
    let vectors = order
        .iter()
        .zip(&sigmas)
        .map(|(&i, s)| {
            let mut c: Vec<f64> = vecs.column(i).iter().map(|z| z / s.sqrt()).collect();
            chol.backward(&mut c);
            c
        })
        .collect();
    Ok((sigmas, vectors, rank))
}

fn apply_g(sys: &GalerkinSystem, chol: &BandedCholesky, y: &[f64], work: &mut [f64], out: &mut [f64]) {
    for w in work.iter_mut() {
        *w = 0.0;
    }
    for (a, &ya) in y.iter().enumerate() {
        scatter(sys, a, ya, work);
    }
    chol.solve(work);
    for (a, o) in out.iter_mut().enumerate() {
        *o = gather(sys, work, a);
    }
}

fn orthonormalize(q: &mut DMatrix<f64>) {
    let qr = q.clone().qr();
    *q = qr.q();
}

/// Block subspace iteration with Rayleigh-Ritz on G (inverse iteration on the pencil).
fn subspace_pairs(sys: &GalerkinSystem, chol: &BandedCholesky, k: usize, opts: SolveOptions) -> Result<Pairs> {
    let n = sys.dof_count();
    let na = sys.atoms().len();
    // rank(M) ≤ number of distinct atoms and ≤ touched dofs
    let rank_bound = na.min(n - sys.deflation().len());
    let want = k.min(rank_bound);
    let p = (2 * want).max(want + 8).min(na);
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut q = DMatrix::<f64>::from_fn(na, p, |_, _| rng.random::<f64>() - 0.5);
    orthonormalize(&mut q);

    let apply_block = |q: &DMatrix<f64>| -> DMatrix<f64> {
        let mut w = DMatrix::<f64>::zeros(na, q.ncols());
        let cols: Vec<Vec<f64>> = {
            let run = |j: usize| {
                let mut work = vec![0.0; n];
                let mut out = vec![0.0; na];
                let y: Vec<f64> = q.column(j).iter().copied().collect();
                apply_g(sys, chol, &y, &mut work, &mut out);
                out
            };
            #[cfg(feature = "parallel")]
            {
                use rayon::prelude::*;
                (0..q.ncols()).into_par_iter().map(run).collect()
            }
            #[cfg(not(feature = "parallel"))]
            {
                (0..q.ncols()).map(run).collect()
            }
        };
        for (j, c) in cols.iter().enumerate() {
            w.column_mut(j).copy_from_slice(c);
        }
        w
    };

    let mut theta = vec![0.0; p];
    let mut ritz = q.clone();
    let mut converged = false;
    for _ in 0..opts.max_iter {
        let w = apply_block(&q);
        let h = q.transpose() * &w;
        let h = (&h + h.transpose()) * 0.5;
        let eig = SymmetricEigen::new(h);
        let mut order: Vec<usize> = (0..p).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
        let s = DMatrix::<f64>::from_fn(p, p, |r, c| eig.eigenvectors[(r, order[c])]);
        theta = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        ritz = &q * &s;
        let gw = &w * &s;
        let smax = theta[0].max(f64::MIN_POSITIVE);
        let cut = rank_cutoff(smax, na);
        let mut done = true;
        for j in 0..want {
            if theta[j] <= cut {
                break;
            }
            let res = (gw.column(j) - ritz.column(j) * theta[j]).norm();
            if res > opts.tol * smax {
                done = false;
                break;
            }
        }
        if done {
            converged = true;
            break;
        }
        q = gw;
        orthonormalize(&mut q);
    }
    if !converged {
        return Err(Error::Numeric(format!(
            "subspace iteration did not converge in {} steps",
            opts.max_iter
        )));
    }
    let cut = rank_cutoff(theta[0], na);
    let rank = theta.iter().filter(|t| **t > cut).count().min(rank_bound);
    let take = want.min(rank);
    let mut sigmas = Vec::with_capacity(take);
    let mut vectors = Vec::with_capacity(take);
    for j in 0..take {
        let mut c = vec![0.0; n];
        for a in 0..na {
            scatter(sys, a, ritz[(a, j)] / theta[j], &mut c);
        }
        chol.solve(&mut c);
        sigmas.push(theta[j]);
        vectors.push(c);
    }
    Ok((sigmas, vectors, rank))
}

#[derive(Debug, Clone, Serialize)]
pub struct PoissonSolution {
    #[serde(skip)]
    pub coefficients: Vec<f64>,
    pub norm_u: f64,
    pub norm_f: f64,
    pub lambda1: f64,
    /// ‖u‖_{L²(μ)} ≤ ‖f‖_{L²(μ)}/λ₁ (with a relative rounding slack of 1e-10).
    pub bound_holds: bool,
}

/// Solves K u = M f, with f given at the atoms of the measure the system was assembled from.
pub fn solve_poisson(sys: &GalerkinSystem, f: &[f64]) -> Result<PoissonSolution> {
    if f.len() != sys.input_atom_count() {
        return Err(invalid(format!(
            "f needs one value per atom ({} given, {} atoms)",
            f.len(),
            sys.input_atom_count()
        )));
    }
    let chol = sys.stiffness().cholesky()?;
    let na = sys.atoms().len();
    // aggregated atoms carry the mass-weighted average of f
    let mut fa = vec![0.0; na];
    let mut wa = vec![0.0; na];
    let mut norm_f2 = 0.0;
    for (idx, &fv) in f.iter().enumerate() {
        if let Some(slot) = sys.atom_slot(idx) {
            let w = sys.input_weights[idx];
            fa[slot] += w * fv;
            wa[slot] += w;
            norm_f2 += w * fv * fv;
        }
    }
    let mut b = vec![0.0; sys.dof_count()];
    for (a, col) in sys.atoms().iter().enumerate() {
        if wa[a] > 0.0 {
            for (d, v) in col.entries() {
                b[d] += fa[a] * v;
            }
        }
    }
    chol.solve(&mut b);
    let u = b;
    let norm_u = sys.mass_inner(&u, &u).sqrt();
    let norm_f = norm_f2.sqrt();
    let lambda1 = if na == 0 {
        f64::INFINITY
    } else {
        solve_spectrum(sys, 1, SolveOptions::default())?
            .eigenvalues
            .first()
            .copied()
            .unwrap_or(f64::INFINITY)
    };
    let bound_holds = norm_u <= norm_f / lambda1 * (1.0 + 1e-10) + f64::MIN_POSITIVE;
    Ok(PoissonSolution {
        coefficients: u,
        norm_u,
        norm_f,
        lambda1,
        bound_holds,
    })
}
