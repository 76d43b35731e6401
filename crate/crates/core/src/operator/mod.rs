//! Galerkin realization of the Kreĭn-Feller operator: P1 / bilinear stiffness on a
//! mesh, the measure mass matrix Σ_atoms w·φᵢφⱼ, the Dirichlet spectrum on the
//! complement of the measure-null space, and the Poisson problem.

mod banded;
mod mesh;
mod oracle;
mod solve;
mod weyl;

pub use banded::{BandedCholesky, BandedSym};
pub use mesh::{Mesh, MeshSize, DEFAULT_MAX_ELEMENTS};
pub use oracle::{discrete_string_oracle, StringOracle};
pub use solve::{solve_poisson, solve_spectrum, PoissonSolution, SolveMethod, SolveOptions, Spectrum};
pub use weyl::{weyl_counting, WeylFit};

use std::collections::HashMap;

use crate::error::{invalid, Error, Result};
use crate::measure::MeasureApprox;

/// Tolerance (relative to the domain size) for atoms sitting on the boundary.
pub const BOUNDARY_TOL: f64 = 1e-12;

/// An atom as seen by the interior basis: up to four (dof, φ(atom)) pairs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AtomColumn {
    pub weight: f64,
    pub len: usize,
    pub dofs: [usize; 4],
    pub vals: [f64; 4],
}

impl AtomColumn {
    pub fn entries(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        (0..self.len).map(|k| (self.dofs[k], self.vals[k]))
    }

    /// Σᵢ cᵢ φᵢ(atom).
    pub fn eval(&self, c: &[f64]) -> f64 {
        self.entries().map(|(d, v)| v * c[d]).sum()
    }
}

/// Stiffness and measure mass on the interior nodes of a mesh.
#[derive(Debug, Clone)]
pub struct GalerkinSystem {
    mesh: Mesh,
    node_of_dof: Vec<usize>,
    dof_of_node: Vec<Option<usize>>,
    stiffness: BandedSym,
    atoms: Vec<AtomColumn>,
    /// For each atom of the input measure, its aggregated column (None when dropped).
    atom_slot: Vec<Option<usize>>,
    pub(crate) input_weights: Vec<f64>,
    deflated: Vec<usize>,
    dropped_atoms: usize,
    dropped_mass: f64,
    total_mass: f64,
    warnings: Vec<String>,
}

fn interval_stiffness(nodes: &[f64]) -> BandedSym {
    let n = nodes.len() - 2;
    let mut k = BandedSym::zeros(n, 1);
    for e in 0..nodes.len() - 1 {
        let inv = 1.0 / (nodes[e + 1] - nodes[e]);
        // element nodes e, e+1 are dofs e−1, e
        if e >= 1 {
            k.add(e - 1, e - 1, inv);
        }
        if e < n {
            k.add(e, e, inv);
        }
        if e >= 1 && e < n {
            k.add(e, e - 1, -inv);
        }
    }
    k
}

fn interval_lebesgue_mass(nodes: &[f64]) -> BandedSym {
    let n = nodes.len() - 2;
    let mut m = BandedSym::zeros(n, 1);
    for e in 0..nodes.len() - 1 {
        let h = nodes[e + 1] - nodes[e];
        if e >= 1 {
            m.add(e - 1, e - 1, h / 3.0);
        }
        if e < n {
            m.add(e, e, h / 3.0);
        }
        if e >= 1 && e < n {
            m.add(e, e - 1, h / 6.0);
        }
    }
    m
}

/// Stiffness ∫⟨∇φᵢ, ∇φⱼ⟩dx on interior nodes (Dirichlet rows and columns removed).
pub fn assemble_stiffness(mesh: &Mesh) -> Result<BandedSym> {
    mesh.validate()?;
    Ok(match mesh {
        Mesh::Line { nodes } => interval_stiffness(nodes),
        Mesh::Grid { xs, ys } => {
            // bilinear elements: K = Kx ⊗ My + Mx ⊗ Ky
            let (kx, mx) = (interval_stiffness(xs), interval_lebesgue_mass(xs));
            let (ky, my) = (interval_stiffness(ys), interval_lebesgue_mass(ys));
            let (nx, ny) = (xs.len() - 2, ys.len() - 2);
            let mut k = BandedSym::zeros(nx * ny, nx + 1);
            for j in 0..ny {
                for i in 0..nx {
                    let row = i + j * nx;
                    for dj in [-1i64, 0] {
                        let jj = j as i64 + dj;
                        if jj < 0 {
                            continue;
                        }
                        let jj = jj as usize;
                        for di in [-1i64, 0, 1] {
                            let ii = i as i64 + di;
                            if ii < 0 || ii >= nx as i64 {
                                continue;
                            }
                            let ii = ii as usize;
                            let col = ii + jj * nx;
                            if col > row {
                                continue;
                            }
                            let v = kx.get(i, ii) * my.get(j, jj) + mx.get(i, ii) * ky.get(j, jj);
                            if v != 0.0 {
                                k.add(row, col, v);
                            }
                        }
                    }
                }
            }
            k
        }
    })
}

impl GalerkinSystem {
    pub fn assemble(mesh: &Mesh, mu: &MeasureApprox) -> Result<Self> {
        mesh.validate()?;
        let stiffness = assemble_stiffness(mesh)?;
        let boundary = mesh.boundary_nodes();
        let mut dof_of_node = vec![None; mesh.node_count()];
        let mut node_of_dof = Vec::with_capacity(mesh.interior_count());
        let mut is_boundary = vec![false; mesh.node_count()];
        for b in boundary {
            is_boundary[b] = true;
        }
        for (k, slot) in dof_of_node.iter_mut().enumerate() {
            if !is_boundary[k] {
                *slot = Some(node_of_dof.len());
                node_of_dof.push(k);
            }
        }

        if mu.dim() != mesh.dim() {
            let extra_zero = mu.positions().iter().all(|p| p[mesh.dim()..].iter().all(|c| *c == 0.0));
            if !(mu.dim() > mesh.dim() && extra_zero) {
                return Err(invalid(format!(
                    "measure in ℝ^{} does not live on a {}-dimensional mesh",
                    mu.dim(),
                    mesh.dim()
                )));
            }
        }

        let mut atoms: Vec<AtomColumn> = Vec::new();
        let mut by_position: HashMap<[u64; 2], usize> = HashMap::new();
        let mut atom_slot = Vec::with_capacity(mu.len());
        let mut dropped_atoms = 0;
        let mut dropped_mass = 0.0;
        for (idx, (p, &w)) in mu.positions().iter().zip(mu.weights()).enumerate() {
            let key = [p[0].to_bits(), p[1].to_bits()];
            if let Some(&slot) = by_position.get(&key) {
                atoms[slot].weight += w;
                atom_slot.push(Some(slot));
                continue;
            }
            let col = locate(mesh, &dof_of_node, p, idx)?;
            match col {
                Some(mut c) if w > 0.0 => {
                    c.weight = w;
                    by_position.insert(key, atoms.len());
                    atom_slot.push(Some(atoms.len()));
                    atoms.push(c);
                }
                _ => {
                    dropped_atoms += 1;
                    dropped_mass += w;
                    atom_slot.push(None);
                }
            }
        }

        let mut touched = vec![false; node_of_dof.len()];
        for a in &atoms {
            for (d, _) in a.entries() {
                touched[d] = true;
            }
        }
        let deflated: Vec<usize> = (0..node_of_dof.len()).filter(|&d| !touched[d]).collect();
        let mut warnings = Vec::new();
        if dropped_atoms > 0 {
            warnings.push(format!(
                "{dropped_atoms} atom(s) of total mass {dropped_mass:.6e} on the Dirichlet boundary were dropped"
            ));
        }
        Ok(GalerkinSystem {
            mesh: mesh.clone(),
            node_of_dof,
            dof_of_node,
            stiffness,
            atoms,
            atom_slot,
            input_weights: mu.weights().to_vec(),
            deflated,
            dropped_atoms,
            dropped_mass,
            total_mass: mu.total_mass(),
            warnings,
        })
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn dof_count(&self) -> usize {
        self.node_of_dof.len()
    }

    pub fn node_of_dof(&self) -> &[usize] {
        &self.node_of_dof
    }

    pub fn stiffness(&self) -> &BandedSym {
        &self.stiffness
    }

    /// Aggregated atoms with nonzero interior trace.
    pub fn atoms(&self) -> &[AtomColumn] {
        &self.atoms
    }

    /// Interior dofs whose basis function vanishes μ-a.e. (zero M-row).
    pub fn deflation(&self) -> &[usize] {
        &self.deflated
    }

    pub fn dropped_atoms(&self) -> usize {
        self.dropped_atoms
    }

    pub fn dropped_mass(&self) -> f64 {
        self.dropped_mass
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Measure mass matrix as sorted upper-triangle triplets (i ≤ j).
    pub fn mass_triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut acc: HashMap<(usize, usize), f64> = HashMap::new();
        for a in &self.atoms {
            for (i, vi) in a.entries() {
                for (j, vj) in a.entries() {
                    if i <= j {
                        *acc.entry((i, j)).or_insert(0.0) += a.weight * vi * vj;
                    }
                }
            }
        }
        let mut out: Vec<(usize, usize, f64)> = acc.into_iter().map(|((i, j), v)| (i, j, v)).collect();
        out.sort_by_key(|t| (t.0, t.1));
        out
    }

    /// M·c.
    pub fn mass_apply(&self, c: &[f64], out: &mut [f64]) {
        for o in out.iter_mut() {
            *o = 0.0;
        }
        for a in &self.atoms {
            let u = a.weight * a.eval(c);
            for (d, v) in a.entries() {
                out[d] += u * v;
            }
        }
    }

    /// Σᵢⱼ Mᵢⱼ = Σ_atoms w·(Σᵢ φᵢ(atom))².
    pub fn mass_sum(&self) -> f64 {
        self.atoms
            .iter()
            .map(|a| {
                let s: f64 = a.entries().map(|(_, v)| v).sum();
                a.weight * s * s
            })
            .sum()
    }

    pub fn mass_trace(&self) -> f64 {
        self.atoms
            .iter()
            .map(|a| a.weight * a.entries().map(|(_, v)| v * v).sum::<f64>())
            .sum()
    }

    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    /// L²(μ) inner product ⟨c, d⟩ = cᵀ M d.
    pub fn mass_inner(&self, c: &[f64], d: &[f64]) -> f64 {
        self.atoms.iter().map(|a| a.weight * a.eval(c) * a.eval(d)).sum()
    }

    /// Values at every mesh node (zero on the Dirichlet boundary).
    pub fn node_values(&self, c: &[f64]) -> Vec<f64> {
        self.dof_of_node.iter().map(|d| d.map_or(0.0, |d| c[d])).collect()
    }

    /// Slot of input atom `idx` among the aggregated columns.
    pub fn atom_slot(&self, idx: usize) -> Option<usize> {
        self.atom_slot.get(idx).copied().flatten()
    }

    pub fn input_atom_count(&self) -> usize {
        self.atom_slot.len()
    }
}

fn locate(
    mesh: &Mesh,
    dof_of_node: &[Option<usize>],
    p: &crate::point::Point,
    idx: usize,
) -> Result<Option<AtomColumn>> {
    let mut col = AtomColumn {
        weight: 0.0,
        len: 0,
        dofs: [0; 4],
        vals: [0.0; 4],
    };
    let mut push = |node: usize, v: f64| {
        if v > 0.0 {
            if let Some(d) = dof_of_node[node] {
                col.dofs[col.len] = d;
                col.vals[col.len] = v;
                col.len += 1;
            }
        }
    };
    // element index and local coordinate along one axis
    fn axis(v: &[f64], x: f64, idx: usize) -> Result<(usize, f64)> {
        let (a, b) = (v[0], v[v.len() - 1]);
        let tol = BOUNDARY_TOL * (b - a);
        if x < a - tol || x > b + tol || !x.is_finite() {
            return Err(Error::Domain(format!(
                "atom {idx} at {x} lies outside the mesh domain [{a}, {b}]"
            )));
        }
        let x = x.clamp(a, b);
        let j = v.partition_point(|n| *n < x);
        if j < v.len() && v[j] == x {
            return Ok((j.min(v.len() - 2), if j == v.len() - 1 { 1.0 } else { 0.0 }));
        }
        let e = j - 1;
        Ok((e, (x - v[e]) / (v[e + 1] - v[e])))
    }
    match mesh {
        Mesh::Line { nodes } => {
            let (e, t) = axis(nodes, p[0], idx)?;
            push(e, 1.0 - t);
            push(e + 1, t);
        }
        Mesh::Grid { xs, ys } => {
            let (i, s) = axis(xs, p[0], idx)?;
            let (j, t) = axis(ys, p[1], idx)?;
            let nx = xs.len();
            push(i + j * nx, (1.0 - s) * (1.0 - t));
            push(i + 1 + j * nx, s * (1.0 - t));
            push(i + (j + 1) * nx, (1.0 - s) * t);
            push(i + 1 + (j + 1) * nx, s * t);
        }
    }
    Ok(if col.len == 0 { None } else { Some(col) })
}

/// Snapped atoms closer than this fraction of the base element size to a node (or to each
/// other) are merged with it, which keeps the stiffness entries bounded by ~1/(SNAP_GAP·h).
pub const SNAP_GAP: f64 = 1e-3;

/// The Kreĭn string problem on (0,1): a mesh of size `size`, optionally with the atoms
/// inserted as nodes so that the Galerkin system is the exact atomic string. Atoms within
/// [`SNAP_GAP`]·h of an already placed node stay between nodes.
pub fn string_system(mu: &MeasureApprox, size: MeshSize, snap_atoms: bool) -> Result<GalerkinSystem> {
    if mu.is_empty() {
        return Err(Error::EmptyMeasure);
    }
    let mut mesh = Mesh::interval(0.0, 1.0, size)?;
    if snap_atoms {
        let xs: Vec<f64> = mu.positions().iter().map(|p| p[0]).collect();
        let tol = SNAP_GAP * mesh.max_element_size();
        mesh = mesh.with_nodes(&xs, tol)?;
    }
    GalerkinSystem::assemble(&mesh, mu)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ifs::IFSystem;
    use crate::measure::{discretize, DiscretizeOptions, Representative};
    use nalgebra::DMatrix;

    fn line(h: f64) -> Mesh {
        Mesh::interval(0.0, 1.0, MeshSize::Length { h }).unwrap()
    }

    #[test]
    fn interval_stiffness_entries() {
        let k = assemble_stiffness(&line(1.0 / 3.0)).unwrap();
        assert_eq!(k.n(), 2);
        assert!((k.get(0, 0) - 6.0).abs() < 1e-12 && (k.get(1, 1) - 6.0).abs() < 1e-12);
        assert!((k.get(0, 1) + 3.0).abs() < 1e-12);
        let k = assemble_stiffness(&line(0.125)).unwrap();
        for i in 0..k.n() {
            assert!((k.get(i, i) - 16.0).abs() < 1e-12);
        }
    }

    #[test]
    fn bilinear_against_gauss_quadrature() {
        let mesh = Mesh::rectangle([0.0, 0.0], [4.0, 3.0], MeshSize::Length { h: 1.0 }).unwrap();
        let k = assemble_stiffness(&mesh).unwrap();
        assert!((k.get(0, 0) - 8.0 / 3.0).abs() < 1e-14);
        // element stiffness of the unit square by 2×2 Gauss quadrature
        let g = [0.5 - 0.5 / 3f64.sqrt(), 0.5 + 0.5 / 3f64.sqrt()];
        let grads = |x: f64, y: f64| [[-(1.0 - y), -(1.0 - x)], [1.0 - y, -x], [-y, 1.0 - x], [y, x]];
        let mut ke = [[0.0; 4]; 4];
        for &x in &g {
            for &y in &g {
                let gr = grads(x, y);
                for a in 0..4 {
                    for b in 0..4 {
                        ke[a][b] += 0.25 * (gr[a][0] * gr[b][0] + gr[a][1] * gr[b][1]);
                    }
                }
            }
        }
        // assemble the full matrix from element matrices and compare interior entries
        let (nxn, nyn) = (5usize, 4usize);
        let mut full = DMatrix::<f64>::zeros(nxn * nyn, nxn * nyn);
        for j in 0..nyn - 1 {
            for i in 0..nxn - 1 {
                let ids = [i + j * nxn, i + 1 + j * nxn, i + (j + 1) * nxn, i + 1 + (j + 1) * nxn];
                for a in 0..4 {
                    for b in 0..4 {
                        full[(ids[a], ids[b])] += ke[a][b];
                    }
                }
            }
        }
        let interior: Vec<usize> = (0..nxn * nyn)
            .filter(|k| {
                let (i, j) = (k % nxn, k / nxn);
                i > 0 && j > 0 && i < nxn - 1 && j < nyn - 1
            })
            .collect();
        for (a, &ia) in interior.iter().enumerate() {
            for (b, &ib) in interior.iter().enumerate() {
                assert!((k.get(a, b) - full[(ia, ib)]).abs() < 1e-13, "({a},{b})");
            }
        }
    }

    #[test]
    fn single_atom_masses() {
        let at_node = MeasureApprox::point_mass(1, [0.5, 0.0, 0.0]);
        let s = GalerkinSystem::assemble(&line(0.25), &at_node).unwrap();
        assert_eq!(s.mass_triplets(), vec![(1, 1, 1.0)]);
        assert_eq!(s.deflation(), &[0, 2]);
        let mid = MeasureApprox::point_mass(1, [0.375, 0.0, 0.0]);
        let s = GalerkinSystem::assemble(&line(0.25), &mid).unwrap();
        assert_eq!(s.mass_triplets(), vec![(0, 0, 0.25), (0, 1, 0.25), (1, 1, 0.25)]);
    }

    #[test]
    fn boundary_atoms_dropped_and_outside_rejected() {
        let mu = MeasureApprox::from_atoms(1, vec![[0.0, 0.0, 0.0], [0.5, 0.0, 0.0]], vec![0.5, 0.5], 0.0).unwrap();
        let s = GalerkinSystem::assemble(&line(0.25), &mu).unwrap();
        assert_eq!(s.dropped_atoms(), 1);
        assert_eq!(s.warnings().len(), 1);
        let out = MeasureApprox::point_mass(1, [1.5, 0.0, 0.0]);
        assert!(matches!(
            GalerkinSystem::assemble(&line(0.25), &out),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn partition_of_unity_on_triadic_mesh() {
        let ifs = IFSystem::cantor(0.5).unwrap();
        let mu = discretize(&ifs, 6, Representative::Centroid, DiscretizeOptions::default()).unwrap();
        let s = string_system(&mu, MeshSize::Triadic { level: 6 }, true).unwrap();
        assert_eq!(s.mass_sum(), 1.0);
        assert!(s.mass_trace() <= 1.0 + 1e-15);
        let unsnapped = string_system(&mu, MeshSize::Triadic { level: 6 }, false).unwrap();
        // end cylinders sit mid-element next to the fixed ends: each keeps (1/2)^2 of its 1/64
        assert!((unsnapped.mass_sum() - (1.0 - 1.5 / 64.0)).abs() < 1e-14);
    }

    #[test]
    fn duplicate_positions_aggregate() {
        let mu = MeasureApprox::from_atoms(1, vec![[0.3, 0.0, 0.0], [0.3, 0.0, 0.0]], vec![0.25, 0.75], 0.0).unwrap();
        let s = GalerkinSystem::assemble(&line(0.1), &mu).unwrap();
        assert_eq!(s.atoms().len(), 1);
        assert_eq!(s.atoms()[0].weight, 1.0);
        assert_eq!(s.atom_slot(1), Some(0));
    }

    #[test]
    fn grid_mass_bilinear_weights() {
        let mesh = Mesh::rectangle([0.0, 0.0], [1.0, 1.0], MeshSize::Length { h: 0.25 }).unwrap();
        let mu = MeasureApprox::point_mass(2, [0.375, 0.5, 0.0]);
        let s = GalerkinSystem::assemble(&mesh, &mu).unwrap();
        assert!((s.mass_sum() - 1.0).abs() < 1e-15);
        assert_eq!(s.atoms()[0].len, 2);
    }
}
