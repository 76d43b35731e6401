//! Atomic approximations of invariant measures and ball-mass queries.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::ifs::{word_count, CylinderCode, IFSystem};
use crate::point::{self, Point, ORIGIN};

pub const DEFAULT_MAX_ATOMS: usize = 10_000_000;
pub const MASS_TOL: f64 = 1e-12;
pub const DEFAULT_PRUNE_THRESHOLD: f64 = 1e-15;

/// Where the atom of a cylinder S_τ(U) is placed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Representative {
    /// S_τ applied to the lower corner of U.
    LeftEndpoint,
    /// The fixed point of S_τ; lies in the attractor.
    #[default]
    FixedPointOfWord,
    /// S_τ applied to the center of U.
    Centroid,
}

impl std::str::FromStr for Representative {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "left" | "left_endpoint" => Ok(Representative::LeftEndpoint),
            "fixed" | "fixed_point" | "fixed_point_of_word" => Ok(Representative::FixedPointOfWord),
            "centroid" | "center" => Ok(Representative::Centroid),
            other => Err(invalid(format!("unknown representative `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct DiscretizeOptions {
    pub max_atoms: usize,
    /// Drop atoms lighter than this; the dropped mass is recorded.
    pub prune_below: Option<f64>,
}

impl Default for DiscretizeOptions {
    fn default() -> Self {
        DiscretizeOptions {
            max_atoms: DEFAULT_MAX_ATOMS,
            prune_below: None,
        }
    }
}

/// A finite atomic measure on ℝⁿ, n ≤ 3.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureApprox {
    dim: usize,
    level: usize,
    positions: Vec<Point>,
    weights: Vec<f64>,
    /// Flat 0-based letters, `level` per atom.
    words: Option<Vec<u8>>,
    cylinder_diameter: f64,
    dropped_mass: f64,
}

impl MeasureApprox {
    /// A measure from explicit atoms. `resolution` is the diameter of the region
    /// each atom stands for (0 for genuinely atomic measures).
    pub fn from_atoms(dim: usize, positions: Vec<Point>, weights: Vec<f64>, resolution: f64) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(invalid("ambient dimension must be 1, 2 or 3"));
        }
        if positions.len() != weights.len() {
            return Err(invalid("one weight per atom is required"));
        }
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(invalid("atom weights must be nonnegative"));
        }
        if positions
            .iter()
            .any(|p| p[dim..].iter().any(|c| *c != 0.0) || p.iter().any(|c| !c.is_finite()))
        {
            return Err(invalid(
                "atom coordinates must be finite and live in the ambient dimension",
            ));
        }
        let total: f64 = weights.iter().sum();
        if !positions.is_empty() && (total - 1.0).abs() > MASS_TOL {
            return Err(invalid(format!("atom weights must sum to 1 (got {total})")));
        }
        Ok(MeasureApprox {
            dim,
            level: 0,
            positions,
            weights,
            words: None,
            cylinder_diameter: resolution,
            dropped_mass: 0.0,
        })
    }

    pub fn point_mass(dim: usize, at: Point) -> Self {
        MeasureApprox {
            dim,
            level: 0,
            positions: vec![at],
            weights: vec![1.0],
            words: None,
            cylinder_diameter: 0.0,
            dropped_mass: 0.0,
        }
    }

    /// Equal atoms at the centers of a uniform grid of [0,1]ⁿ with `cells` cells per side.
    pub fn lebesgue_grid(dim: usize, cells: usize) -> Result<Self> {
        if cells == 0 {
            return Err(invalid("grid needs at least one cell"));
        }
        let total = cells.pow(dim as u32);
        let w = 1.0 / total as f64;
        let h = 1.0 / cells as f64;
        let mut positions = Vec::with_capacity(total);
        for idx in 0..total {
            let mut p = ORIGIN;
            let mut rest = idx;
            for slot in p.iter_mut().take(dim) {
                *slot = ((rest % cells) as f64 + 0.5) * h;
                rest /= cells;
            }
            positions.push(p);
        }
        Ok(MeasureApprox {
            dim,
            level: 0,
            weights: vec![w; total],
            positions,
            words: None,
            cylinder_diameter: h * (dim as f64).sqrt(),
            dropped_mass: 0.0,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[Point] {
        &self.positions
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn dropped_mass(&self) -> f64 {
        self.dropped_mass
    }

    /// Upper bound on the diameter of the cylinder any atom represents.
    pub fn cylinder_diameter(&self) -> f64 {
        self.cylinder_diameter
    }

    /// Smallest radius at which ball masses of the approximation track the true measure.
    pub fn resolution_floor(&self) -> f64 {
        2.0 * self.cylinder_diameter
    }

    pub fn word(&self, atom: usize) -> Option<CylinderCode> {
        self.words.as_ref().map(|w| {
            CylinderCode(
                w[atom * self.level..(atom + 1) * self.level]
                    .iter()
                    .map(|&l| l as usize + 1)
                    .collect(),
            )
        })
    }

    /// The same atoms viewed in a higher-dimensional ambient space (zero padding).
    pub fn embed(&self, dim: usize) -> Result<Self> {
        if dim < self.dim || dim > 3 {
            return Err(invalid("can only embed into a dimension in dim..=3"));
        }
        let mut out = self.clone();
        out.dim = dim;
        Ok(out)
    }

    /// Restores a measure from serialized parts (CSV round trip).
    pub fn from_parts(
        dim: usize,
        level: usize,
        positions: Vec<Point>,
        weights: Vec<f64>,
        words: Option<Vec<CylinderCode>>,
        cylinder_diameter: f64,
    ) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if total > 1.0 + MASS_TOL || total <= 0.0 {
            return Err(invalid(format!("atom weights must sum to at most 1 (got {total})")));
        }
        // rescale a copy only to reuse the validation, keep the original weights
        let scaled: Vec<f64> = weights.iter().map(|w| w / total).collect();
        MeasureApprox::from_atoms(dim, positions.clone(), scaled, cylinder_diameter)?;
        let mut m = MeasureApprox {
            dim,
            level,
            positions,
            weights,
            words: None,
            cylinder_diameter,
            dropped_mass: (1.0 - total).max(0.0),
        };
        m.level = level;
        if let Some(ws) = words {
            if ws.len() != m.len() || ws.iter().any(|w| w.len() != level) {
                return Err(invalid("every atom needs a word of length `level`"));
            }
            let mut flat = Vec::with_capacity(level * ws.len());
            for w in ws {
                for l in w.0 {
                    if l == 0 || l > 255 {
                        return Err(invalid("word letters must lie in 1..=255"));
                    }
                    flat.push((l - 1) as u8);
                }
            }
            m.words = Some(flat);
        }
        Ok(m)
    }
}

/// Level-m atomic approximation of the invariant measure: one atom per length-m word,
/// weight p_τ, lexicographic in τ.
pub fn discretize(ifs: &IFSystem, level: usize, rep: Representative, opts: DiscretizeOptions) -> Result<MeasureApprox> {
    let m = ifs.map_count();
    let count = word_count(m, level, opts.max_atoms)?;
    let u = ifs.reference_box();
    let max_ratio = ifs.maps().iter().map(|s| s.ratio_upper()).fold(0.0, f64::max);

    let seed = match rep {
        Representative::LeftEndpoint => u.lo,
        Representative::Centroid | Representative::FixedPointOfWord => u.center(),
    };

    // weights and seed images, level by level: atom (i, τ') = S_i(atom τ')
    let mut positions = vec![seed];
    let mut weights = vec![1.0];
    let mut words: Vec<u8> = Vec::new();
    for depth in 1..=level {
        let prev = positions.len();
        let mut next_pos = Vec::with_capacity(prev * m);
        let mut next_w = Vec::with_capacity(prev * m);
        let mut next_words = Vec::with_capacity(prev * m * depth);
        for (i, map) in ifs.maps().iter().enumerate() {
            let p = ifs.weights()[i];
            for j in 0..prev {
                next_pos.push(map.apply(&positions[j]));
                next_w.push(p * weights[j]);
                next_words.push(i as u8);
                next_words.extend_from_slice(&words[j * (depth - 1)..(j + 1) * (depth - 1)]);
            }
        }
        positions = next_pos;
        weights = next_w;
        words = next_words;
    }
    debug_assert_eq!(positions.len(), count);

    if rep == Representative::FixedPointOfWord && level > 0 {
        let fix = |k: usize| {
            let letters: Vec<usize> = words[k * level..(k + 1) * level]
                .iter()
                .map(|&l| l as usize + 1)
                .collect();
            ifs.compose_word(&CylinderCode(letters))
                .map(|w| w.fixed_point())
                .expect("letters come from enumeration")
        };
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            positions = (0..count).into_par_iter().map(fix).collect();
        }
        #[cfg(not(feature = "parallel"))]
        {
            positions = (0..count).map(fix).collect();
        }
    }

    let mut dropped = 0.0;
    if let Some(t) = opts.prune_below {
        let keep: Vec<bool> = weights.iter().map(|w| *w >= t).collect();
        if keep.iter().any(|k| !k) {
            let mut pos2 = Vec::new();
            let mut w2 = Vec::new();
            let mut words2 = Vec::new();
            for k in 0..count {
                if keep[k] {
                    pos2.push(positions[k]);
                    w2.push(weights[k]);
                    words2.extend_from_slice(&words[k * level..(k + 1) * level]);
                } else {
                    dropped += weights[k];
                }
            }
            positions = pos2;
            weights = w2;
            words = words2;
        }
    }

    Ok(MeasureApprox {
        dim: ifs.dim(),
        level,
        positions,
        weights,
        words: Some(words),
        cylinder_diameter: u.diameter() * max_ratio.powi(level as i32),
        dropped_mass: dropped,
    })
}

/// Result of comparing level m against the pushforward Σ pᵢ·(level m−1)∘Sᵢ⁻¹.
#[derive(Debug, Clone, Serialize)]
pub struct InvarianceCheck {
    pub level: usize,
    pub weights_exact: bool,
    pub max_position_error: f64,
    pub total_mass: f64,
}

pub fn check_invariance(
    ifs: &IFSystem,
    level: usize,
    rep: Representative,
    opts: DiscretizeOptions,
) -> Result<InvarianceCheck> {
    if level == 0 {
        let mu = discretize(ifs, 0, rep, opts)?;
        return Ok(InvarianceCheck {
            level,
            weights_exact: true,
            max_position_error: 0.0,
            total_mass: mu.total_mass(),
        });
    }
    let no_prune = DiscretizeOptions {
        prune_below: None,
        ..opts
    };
    let cur = discretize(ifs, level, rep, no_prune)?;
    let prev = discretize(ifs, level - 1, rep, no_prune)?;
    let n = prev.len();
    let mut weights_exact = true;
    let mut err: f64 = 0.0;
    for (i, map) in ifs.maps().iter().enumerate() {
        for j in 0..n {
            let k = i * n + j;
            if ifs.weights()[i] * prev.weights[j] != cur.weights[k] {
                weights_exact = false;
            }
            err = err.max(point::dist(&map.apply(&prev.positions[j]), &cur.positions[k]));
        }
    }
    Ok(InvarianceCheck {
        level,
        weights_exact,
        max_position_error: err,
        total_mass: cur.total_mass(),
    })
}

/// μ(B̄(center, r)) by direct summation over atoms.
pub fn ball_mass(mu: &MeasureApprox, center: &Point, r: f64) -> f64 {
    let r2 = r * r;
    mu.positions
        .iter()
        .zip(&mu.weights)
        .filter(|(p, _)| point::dist2(p, center) <= r2)
        .map(|(_, w)| *w)
        .sum()
}

/// Spatial index for repeated closed-ball mass queries.
#[derive(Debug, Clone)]
pub struct BallIndex {
    inner: IndexKind,
}

#[derive(Debug, Clone)]
enum IndexKind {
    Line { xs: Vec<f64>, prefix: Vec<f64> },
    Grid(Grid),
}

#[derive(Debug, Clone)]
struct Grid {
    dim: usize,
    origin: Point,
    cell: f64,
    counts: [usize; 3],
    cell_start: Vec<usize>,
    cell_prefix: Vec<f64>,
    pts: Vec<Point>,
    wts: Vec<f64>,
}

impl BallIndex {
    pub fn new(mu: &MeasureApprox) -> Self {
        let collinear = mu.positions.iter().all(|p| p[1] == 0.0 && p[2] == 0.0);
        if mu.dim == 1 || collinear {
            let mut idx: Vec<usize> = (0..mu.len()).collect();
            idx.sort_by(|&a, &b| mu.positions[a][0].total_cmp(&mu.positions[b][0]));
            let xs: Vec<f64> = idx.iter().map(|&i| mu.positions[i][0]).collect();
            let mut prefix = Vec::with_capacity(xs.len() + 1);
            prefix.push(0.0);
            let mut acc = 0.0;
            for &i in &idx {
                acc += mu.weights[i];
                prefix.push(acc);
            }
            return BallIndex {
                inner: IndexKind::Line { xs, prefix },
            };
        }
        BallIndex {
            inner: IndexKind::Grid(Grid::build(mu)),
        }
    }

    pub fn mass(&self, center: &Point, r: f64) -> f64 {
        match &self.inner {
            IndexKind::Line { xs, prefix } => {
                let off = center[1] * center[1] + center[2] * center[2];
                let r2 = r * r - off;
                if r2 < 0.0 {
                    return 0.0;
                }
                let c = center[0];
                let inside = |x: f64| (x - c) * (x - c) <= r2;
                let half = r2.sqrt();
                let n = xs.len();
                let mut lo = xs.partition_point(|&x| x < c - half);
                while lo > 0 && inside(xs[lo - 1]) {
                    lo -= 1;
                }
                while lo < n && xs[lo] <= c && !inside(xs[lo]) {
                    lo += 1;
                }
                let mut hi = xs.partition_point(|&x| x <= c + half);
                while hi < n && inside(xs[hi]) {
                    hi += 1;
                }
                while hi > lo && xs[hi - 1] >= c && !inside(xs[hi - 1]) {
                    hi -= 1;
                }
                if hi <= lo {
                    0.0
                } else {
                    prefix[hi] - prefix[lo]
                }
            }
            IndexKind::Grid(g) => g.mass(center, r),
        }
    }
}

impl Grid {
    fn build(mu: &MeasureApprox) -> Grid {
        let dim = mu.dim;
        let n = mu.len().max(1);
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for p in &mu.positions {
            for k in 0..dim {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        let mut origin = ORIGIN;
        let mut extent: f64 = 0.0;
        for k in 0..dim {
            if !lo[k].is_finite() {
                lo[k] = 0.0;
                hi[k] = 0.0;
            }
            origin[k] = lo[k];
            extent = extent.max(hi[k] - lo[k]);
        }
        let per_axis = ((n as f64 / 4.0).powf(1.0 / dim as f64).ceil() as usize).clamp(1, 4096);
        let cell = if extent > 0.0 { extent / per_axis as f64 } else { 1.0 };
        let mut counts = [1usize; 3];
        for k in 0..dim {
            counts[k] = (((hi[k] - lo[k]) / cell).floor() as usize + 1).max(1);
        }
        let ncell = counts[0] * counts[1] * counts[2];
        let cell_of = |p: &Point| -> usize {
            let mut id = 0;
            let mut stride = 1;
            for k in 0..3 {
                let i = if k < dim {
                    (((p[k] - origin[k]) / cell).floor().max(0.0) as usize).min(counts[k] - 1)
                } else {
                    0
                };
                id += i * stride;
                stride *= counts[k];
            }
            id
        };
        let mut ids: Vec<(usize, usize)> = mu.positions.iter().enumerate().map(|(i, p)| (cell_of(p), i)).collect();
        ids.sort_unstable();
        let mut cell_start = vec![0usize; ncell + 1];
        for (c, _) in &ids {
            cell_start[c + 1] += 1;
        }
        for c in 0..ncell {
            cell_start[c + 1] += cell_start[c];
        }
        let pts: Vec<Point> = ids.iter().map(|&(_, i)| mu.positions[i]).collect();
        let wts: Vec<f64> = ids.iter().map(|&(_, i)| mu.weights[i]).collect();
        let mut cell_prefix = vec![0.0; ncell + 1];
        for c in 0..ncell {
            let s: f64 = wts[cell_start[c]..cell_start[c + 1]].iter().sum();
            cell_prefix[c + 1] = cell_prefix[c] + s;
        }
        Grid {
            dim,
            origin,
            cell,
            counts,
            cell_start,
            cell_prefix,
            pts,
            wts,
        }
    }

    fn axis_range(&self, k: usize, c: f64, half: f64) -> Option<(usize, usize)> {
        if k >= self.dim {
            return Some((0, 0));
        }
        let a = ((c - half - self.origin[k]) / self.cell).floor();
        let b = ((c + half - self.origin[k]) / self.cell).floor();
        let maxi = self.counts[k] as f64 - 1.0;
        if b < 0.0 || a > maxi {
            return None;
        }
        Some((a.max(0.0) as usize, b.min(maxi) as usize))
    }

    // squared min/max distance from c to the slab [o + i·s, o + (i+1)·s] along axis k
    fn slab_dist2(&self, k: usize, i: usize, c: f64) -> (f64, f64) {
        if k >= self.dim {
            return (c * c, c * c);
        }
        let eps = 1e-9 * self.cell;
        let a = self.origin[k] + i as f64 * self.cell - eps;
        let b = self.origin[k] + (i + 1) as f64 * self.cell + eps;
        let dmin = if c < a {
            a - c
        } else if c > b {
            c - b
        } else {
            0.0
        };
        let dmax = (c - a).abs().max((c - b).abs());
        (dmin * dmin, dmax * dmax)
    }

    fn mass(&self, center: &Point, r: f64) -> f64 {
        let r2 = r * r;
        let r2_in = r2 * (1.0 - 1e-12);
        let Some((y0, y1)) = self.axis_range(1, center[1], r) else {
            return 0.0;
        };
        let Some((z0, z1)) = self.axis_range(2, center[2], r) else {
            return 0.0;
        };
        let (nx, ny) = (self.counts[0], self.counts[1]);
        let mut total = 0.0;
        for iz in z0..=z1 {
            let (zmin, zmax) = self.slab_dist2(2, iz, center[2]);
            for iy in y0..=y1 {
                let (ymin, ymax) = self.slab_dist2(1, iy, center[1]);
                let dmin = ymin + zmin;
                if dmin > r2 {
                    continue;
                }
                let row = nx * (iy + ny * iz);
                let Some((xa, xb)) = self.axis_range(0, center[0], (r2 - dmin).sqrt()) else {
                    continue;
                };
                // cells fully inside the ball form a contiguous x-range
                let mut full = None;
                let dmax = ymax + zmax;
                if dmax < r2_in {
                    let w = (r2_in - dmax).sqrt();
                    let eps = 1e-9 * self.cell;
                    let fa = ((center[0] - w - self.origin[0] + eps) / self.cell)
                        .ceil()
                        .max(xa as f64);
                    let fb = ((center[0] + w - self.origin[0] - eps) / self.cell).floor() - 1.0;
                    let fb = fb.min(xb as f64);
                    if fb >= fa {
                        full = Some((fa as usize, fb as usize));
                    }
                }
                let scan = |ix: usize, total: &mut f64| {
                    let c = row + ix;
                    for k in self.cell_start[c]..self.cell_start[c + 1] {
                        if point::dist2(&self.pts[k], center) <= r2 {
                            *total += self.wts[k];
                        }
                    }
                };
                match full {
                    Some((fa, fb)) => {
                        for ix in xa..fa {
                            scan(ix, &mut total);
                        }
                        total += self.cell_prefix[row + fb + 1] - self.cell_prefix[row + fa];
                        for ix in fb + 1..=xb {
                            scan(ix, &mut total);
                        }
                    }
                    None => {
                        for ix in xa..=xb {
                            scan(ix, &mut total);
                        }
                    }
                }
            }
        }
        total
    }
}
