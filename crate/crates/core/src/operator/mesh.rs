//! Interval meshes and tensor-product box meshes.

use serde::Serialize;

use crate::error::{invalid, Error, Result};

pub const DEFAULT_MAX_ELEMENTS: usize = 20_000_000;

/// Target element size: a length, or `triadic:m` for 3^m uniform elements per unit length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MeshSize {
    Length { h: f64 },
    Triadic { level: u32 },
}

impl MeshSize {
    pub fn parse(spec: &str) -> Result<Self> {
        let s = spec.trim();
        if let Some(m) = s.strip_prefix("triadic:") {
            let level = m
                .trim()
                .parse::<u32>()
                .map_err(|_| invalid(format!("bad triadic level in `{s}`")))?;
            if level > 20 {
                return Err(invalid("triadic level above 20"));
            }
            return Ok(MeshSize::Triadic { level });
        }
        let h = crate::dimension::parse_number(s)?;
        if !(h > 0.0) {
            return Err(invalid("mesh size must be positive"));
        }
        Ok(MeshSize::Length { h })
    }

    /// Number of uniform elements on an interval of length `len`.
    fn elements(&self, len: f64) -> f64 {
        match *self {
            MeshSize::Length { h } => (len / h - 1e-9).ceil().max(1.0),
            MeshSize::Triadic { level } => (len * 3f64.powi(level as i32) - 1e-9).ceil().max(1.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Mesh {
    /// Strictly increasing nodes; the two end nodes carry the Dirichlet condition.
    Line { nodes: Vec<f64> },
    /// Tensor grid, node (i, j) has index i + j·xs.len(); all edge nodes are Dirichlet.
    Grid { xs: Vec<f64>, ys: Vec<f64> },
}

fn uniform(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..=n)
        .map(|i| if i == n { b } else { a + (b - a) * i as f64 / n as f64 })
        .collect()
}

impl Mesh {
    pub fn interval(a: f64, b: f64, size: MeshSize) -> Result<Self> {
        Mesh::interval_with_budget(a, b, size, DEFAULT_MAX_ELEMENTS)
    }

    pub fn interval_with_budget(a: f64, b: f64, size: MeshSize, max_elements: usize) -> Result<Self> {
        if !(a < b) || !a.is_finite() || !b.is_finite() {
            return Err(invalid("mesh interval must satisfy a < b"));
        }
        let n = size.elements(b - a);
        if n > max_elements as f64 {
            return Err(Error::BudgetExceeded {
                what: "mesh elements",
                needed: n,
                limit: max_elements as f64,
            });
        }
        Ok(Mesh::Line {
            nodes: uniform(a, b, n as usize),
        })
    }

    pub fn rectangle(lo: [f64; 2], hi: [f64; 2], size: MeshSize) -> Result<Self> {
        Mesh::rectangle_with_budget(lo, hi, size, DEFAULT_MAX_ELEMENTS)
    }

    pub fn rectangle_with_budget(lo: [f64; 2], hi: [f64; 2], size: MeshSize, max_elements: usize) -> Result<Self> {
        if !(lo[0] < hi[0] && lo[1] < hi[1]) {
            return Err(invalid("mesh box must satisfy lo < hi"));
        }
        let nx = size.elements(hi[0] - lo[0]);
        let ny = size.elements(hi[1] - lo[1]);
        if nx * ny > max_elements as f64 {
            return Err(Error::BudgetExceeded {
                what: "mesh elements",
                needed: nx * ny,
                limit: max_elements as f64,
            });
        }
        Ok(Mesh::Grid {
            xs: uniform(lo[0], hi[0], nx as usize),
            ys: uniform(lo[1], hi[1], ny as usize),
        })
    }

    /// Inserts extra nodes (1D only); nodes closer than `tol` to an inserted point are replaced by it.
    pub fn with_nodes(&self, extra: &[f64], tol: f64) -> Result<Self> {
        let Mesh::Line { nodes } = self else {
            return Err(Error::Unsupported("node insertion on box meshes".into()));
        };
        let (a, b) = (nodes[0], nodes[nodes.len() - 1]);
        let mut ins: Vec<f64> = extra.iter().copied().filter(|x| *x > a + tol && *x < b - tol).collect();
        ins.sort_by(f64::total_cmp);
        ins.dedup_by(|x, y| (*x - *y).abs() <= tol);
        let mut out = Vec::with_capacity(nodes.len() + ins.len());
        let mut k = 0;
        for &x in nodes {
            while k < ins.len() && ins[k] < x - tol {
                out.push(ins[k]);
                k += 1;
            }
            if k < ins.len() && (ins[k] - x).abs() <= tol && x != a && x != b {
                out.push(ins[k]);
                k += 1;
            } else {
                out.push(x);
            }
        }
        debug_assert!(out.windows(2).all(|w| w[0] < w[1]));
        Ok(Mesh::Line { nodes: out })
    }

    /// Each element split in two (per axis).
    pub fn refined(&self) -> Self {
        let split = |v: &[f64]| {
            let mut out = Vec::with_capacity(2 * v.len());
            for w in v.windows(2) {
                out.push(w[0]);
                out.push(0.5 * (w[0] + w[1]));
            }
            out.push(v[v.len() - 1]);
            out
        };
        match self {
            Mesh::Line { nodes } => Mesh::Line { nodes: split(nodes) },
            Mesh::Grid { xs, ys } => Mesh::Grid {
                xs: split(xs),
                ys: split(ys),
            },
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Mesh::Line { .. } => 1,
            Mesh::Grid { .. } => 2,
        }
    }

    pub fn node_count(&self) -> usize {
        match self {
            Mesh::Line { nodes } => nodes.len(),
            Mesh::Grid { xs, ys } => xs.len() * ys.len(),
        }
    }

    pub fn boundary_nodes(&self) -> Vec<usize> {
        match self {
            Mesh::Line { nodes } => vec![0, nodes.len() - 1],
            Mesh::Grid { xs, ys } => {
                let (nx, ny) = (xs.len(), ys.len());
                (0..nx * ny)
                    .filter(|k| {
                        let (i, j) = (k % nx, k / nx);
                        i == 0 || j == 0 || i == nx - 1 || j == ny - 1
                    })
                    .collect()
            }
        }
    }

    pub fn interior_count(&self) -> usize {
        match self {
            Mesh::Line { nodes } => nodes.len() - 2,
            Mesh::Grid { xs, ys } => (xs.len() - 2) * (ys.len() - 2),
        }
    }

    /// Coordinates of mesh node `k`.
    pub fn node(&self, k: usize) -> [f64; 2] {
        match self {
            Mesh::Line { nodes } => [nodes[k], 0.0],
            Mesh::Grid { xs, ys } => [xs[k % xs.len()], ys[k / xs.len()]],
        }
    }

    /// Largest element edge length.
    pub fn max_element_size(&self) -> f64 {
        let gap = |v: &[f64]| v.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
        match self {
            Mesh::Line { nodes } => gap(nodes),
            Mesh::Grid { xs, ys } => gap(xs).max(gap(ys)),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: &[f64]| v.len() >= 3 && v.windows(2).all(|w| w[0] < w[1]);
        let good = match self {
            Mesh::Line { nodes } => ok(nodes),
            Mesh::Grid { xs, ys } => ok(xs) && ok(ys),
        };
        if good {
            Ok(())
        } else {
            Err(invalid(
                "mesh needs strictly increasing nodes and at least one interior node per axis",
            ))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts() {
        let m = Mesh::interval(0.0, 1.0, MeshSize::Length { h: 0.25 }).unwrap();
        assert_eq!(m.node_count(), 5);
        assert_eq!(m.boundary_nodes(), vec![0, 4]);
        let t = Mesh::interval(0.0, 1.0, MeshSize::parse("triadic:5").unwrap()).unwrap();
        assert_eq!(t.node_count(), 244);
        let h = Mesh::interval(0.0, 1.0, MeshSize::parse("1/243").unwrap()).unwrap();
        assert_eq!(h.node_count(), 244);
        let g = Mesh::rectangle([0.0, 0.0], [1.0, 1.0], MeshSize::Length { h: 0.125 }).unwrap();
        assert_eq!(g.node_count(), 81);
        assert_eq!(g.boundary_nodes().len(), 32);
        assert_eq!(g.interior_count(), 49);
    }

    #[test]
    fn budget() {
        let e = Mesh::interval_with_budget(0.0, 1.0, MeshSize::Length { h: 1e-6 }, 1000);
        assert!(matches!(e, Err(Error::BudgetExceeded { .. })));
    }

    #[test]
    fn insertion_snaps() {
        let m = Mesh::interval(0.0, 1.0, MeshSize::Length { h: 0.25 }).unwrap();
        let s = m.with_nodes(&[0.5 + 1e-15, 0.1, 0.0, 0.3], 1e-12).unwrap();
        let Mesh::Line { nodes } = s else { unreachable!() };
        assert_eq!(nodes, vec![0.0, 0.1, 0.25, 0.3, 0.5 + 1e-15, 0.75, 1.0]);
    }

    #[test]
    fn refinement_nests() {
        let m = Mesh::interval(0.0, 1.0, MeshSize::Length { h: 0.5 }).unwrap().refined();
        assert_eq!(
            m,
            Mesh::Line {
                nodes: vec![0.0, 0.25, 0.5, 0.75, 1.0]
            }
        );
        assert!(MeshSize::parse("0").is_err());
        assert!(MeshSize::parse("triadic:x").is_err());
    }
}
