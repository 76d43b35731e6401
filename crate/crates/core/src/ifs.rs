//! Iterated function systems of contractions on ℝⁿ (n ≤ 3): similitudes in any
//! dimension and one-dimensional conformal maps with monotone derivative.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::point::{self, Point, ORIGIN};

/// Relative tolerance of the metric-similarity invariant.
pub const SIMILARITY_TOL: f64 = 1e-12;
/// Tolerance on Σ pᵢ = 1.
pub const WEIGHT_SUM_TOL: f64 = 1e-14;
/// Sample count of the derivative-bound grid for conformal maps.
pub const DERIVATIVE_GRID: usize = 1024;
pub const MAX_MAPS: usize = 255;

/// An axis-aligned box in ℝⁿ; the open set of the open set condition is its interior.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoxSet {
    pub dim: usize,
    pub lo: Point,
    pub hi: Point,
}

impl BoxSet {
    pub fn new(dim: usize, lo: &[f64], hi: &[f64]) -> Result<Self> {
        check_dim(dim)?;
        if lo.len() != dim || hi.len() != dim {
            return Err(invalid(format!("box needs {dim} intervals")));
        }
        if lo
            .iter()
            .zip(hi)
            .any(|(a, b)| !(a < b) || !a.is_finite() || !b.is_finite())
        {
            return Err(invalid("box intervals must satisfy lo < hi"));
        }
        Ok(BoxSet {
            dim,
            lo: point::from_slice(lo),
            hi: point::from_slice(hi),
        })
    }

    pub fn unit(dim: usize) -> Self {
        let mut hi = ORIGIN;
        hi[..dim].iter_mut().for_each(|h| *h = 1.0);
        BoxSet { dim, lo: ORIGIN, hi }
    }

    pub fn center(&self) -> Point {
        point::scale(&point::add(&self.lo, &self.hi), 0.5)
    }

    pub fn diameter(&self) -> f64 {
        point::dist(&self.lo, &self.hi)
    }

    pub fn contains_closed(&self, p: &Point, tol: f64) -> bool {
        (0..self.dim).all(|k| p[k] >= self.lo[k] - tol && p[k] <= self.hi[k] + tol)
    }

    pub fn contains_open(&self, p: &Point) -> bool {
        (0..self.dim).all(|k| p[k] > self.lo[k] && p[k] < self.hi[k])
    }

    pub fn interiors_overlap(&self, other: &BoxSet, tol: f64) -> bool {
        (0..self.dim).all(|k| self.lo[k] < other.hi[k] - tol && other.lo[k] < self.hi[k] - tol)
    }

    /// Corners of the box (2ⁿ points).
    pub fn corners(&self) -> Vec<Point> {
        (0..1usize << self.dim)
            .map(|mask| {
                let mut p = ORIGIN;
                for k in 0..self.dim {
                    p[k] = if mask >> k & 1 == 0 { self.lo[k] } else { self.hi[k] };
                }
                p
            })
            .collect()
    }

    pub fn bounding(dim: usize, pts: &[Point]) -> BoxSet {
        let mut lo = ORIGIN;
        let mut hi = ORIGIN;
        for k in 0..dim {
            lo[k] = pts.iter().map(|p| p[k]).fold(f64::INFINITY, f64::min);
            hi[k] = pts.iter().map(|p| p[k]).fold(f64::NEG_INFINITY, f64::max);
        }
        BoxSet { dim, lo, hi }
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if (1..=3).contains(&dim) {
        Ok(())
    } else {
        Err(invalid(format!("ambient dimension must be 1, 2 or 3 (got {dim})")))
    }
}

/// x ↦ r·Q·x + t with Q orthogonal.
#[derive(Debug, Clone, PartialEq)]
pub struct Similitude {
    dim: usize,
    ratio: f64,
    orth: [[f64; 3]; 3],
    translation: Point,
}

impl Similitude {
    pub fn new(dim: usize, ratio: f64, orth: Option<&[Vec<f64>]>, translation: &[f64]) -> Result<Self> {
        check_dim(dim)?;
        if !(ratio > 0.0 && ratio < 1.0) {
            return Err(invalid(format!("similitude ratio must lie in (0,1) (got {ratio})")));
        }
        if translation.len() != dim {
            return Err(invalid(format!("translation needs {dim} components")));
        }
        let mut q = [[0.0; 3]; 3];
        match orth {
            None => (0..dim).for_each(|i| q[i][i] = 1.0),
            Some(rows) => {
                if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
                    return Err(invalid(format!("rotation must be {dim}x{dim}")));
                }
                for i in 0..dim {
                    for j in 0..dim {
                        q[i][j] = rows[i][j];
                    }
                }
                for i in 0..dim {
                    for j in 0..dim {
                        let g: f64 = (0..dim).map(|k| q[k][i] * q[k][j]).sum();
                        let want = if i == j { 1.0 } else { 0.0 };
                        if (g - want).abs() > 1e-12 {
                            return Err(invalid("rotation matrix is not orthogonal"));
                        }
                    }
                }
            }
        }
        Ok(Similitude {
            dim,
            ratio,
            orth: q,
            translation: point::from_slice(translation),
        })
    }

    /// Shorthand for the one-dimensional map x ↦ r·x + t.
    pub fn line(ratio: f64, translation: f64) -> Result<Self> {
        Similitude::new(1, ratio, None, &[translation])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ratio(&self) -> f64 {
        self.ratio
    }

    pub fn translation(&self) -> &Point {
        &self.translation
    }

    pub fn orthogonal_part(&self) -> Vec<Vec<f64>> {
        (0..self.dim).map(|i| self.orth[i][..self.dim].to_vec()).collect()
    }

    #[inline]
    pub fn apply(&self, x: &Point) -> Point {
        let mut y = ORIGIN;
        for i in 0..self.dim {
            let mut acc = 0.0;
            for j in 0..self.dim {
                acc += self.orth[i][j] * x[j];
            }
            y[i] = self.ratio * acc + self.translation[i];
        }
        y
    }

    pub fn inverse_apply(&self, y: &Point) -> Point {
        let d = point::sub(y, &self.translation);
        let mut x = ORIGIN;
        for j in 0..self.dim {
            let mut acc = 0.0;
            for i in 0..self.dim {
                acc += self.orth[i][j] * d[i];
            }
            x[j] = acc / self.ratio;
        }
        x
    }

    /// `self ∘ inner`.
    pub fn compose(&self, inner: &Similitude) -> Similitude {
        let mut q = [[0.0; 3]; 3];
        for i in 0..self.dim {
            for j in 0..self.dim {
                q[i][j] = (0..self.dim).map(|k| self.orth[i][k] * inner.orth[k][j]).sum();
            }
        }
        let t = self.apply(&inner.translation);
        Similitude {
            dim: self.dim,
            ratio: self.ratio * inner.ratio,
            orth: q,
            translation: t,
        }
    }
}

/// Built-in one-dimensional conformal maps; each has a monotone derivative.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "expr", rename_all = "lowercase")]
pub enum ConformalKind {
    /// x ↦ (a·x + b)/(c·x + d)
    Mobius { a: f64, b: f64, c: f64, d: f64 },
    /// x ↦ c0 + c1·x + c2·x²
    Quadratic { c0: f64, c1: f64, c2: f64 },
}

impl ConformalKind {
    #[inline]
    fn eval(&self, x: f64) -> f64 {
        match *self {
            ConformalKind::Mobius { a, b, c, d } => (a * x + b) / (c * x + d),
            ConformalKind::Quadratic { c0, c1, c2 } => c0 + x * (c1 + c2 * x),
        }
    }

    #[inline]
    fn deriv(&self, x: f64) -> f64 {
        match *self {
            ConformalKind::Mobius { a, b, c, d } => {
                let den = c * x + d;
                (a * d - b * c) / (den * den)
            }
            ConformalKind::Quadratic { c1, c2, .. } => c1 + 2.0 * c2 * x,
        }
    }
}

/// A strictly monotone C¹ contraction of an interval with 0 < derivLo ≤ |S′| ≤ derivHi < 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Conformal1D {
    kind: ConformalKind,
    domain: (f64, f64),
    deriv_lo: f64,
    deriv_hi: f64,
    holder: f64,
}

impl Conformal1D {
    pub fn new(kind: ConformalKind, domain: (f64, f64), holder: f64) -> Result<Self> {
        let (lo, hi) = domain;
        if !(lo < hi) {
            return Err(invalid("conformal map domain must satisfy lo < hi"));
        }
        if !(holder > 0.0 && holder < 1.0) {
            return Err(invalid(format!("Hölder exponent must lie in (0,1) (got {holder})")));
        }
        if let ConformalKind::Mobius { c, d, .. } = kind {
            // pole must stay off the closed domain
            if (c * lo + d) * (c * hi + d) <= 0.0 {
                return Err(invalid("Möbius map has a pole on its domain"));
            }
        }
        let mut dlo = f64::INFINITY;
        let mut dhi: f64 = 0.0;
        let mut sign = 0.0;
        for k in 0..=DERIVATIVE_GRID {
            let x = lo + (hi - lo) * k as f64 / DERIVATIVE_GRID as f64;
            let dv = kind.deriv(x);
            if dv == 0.0 || !dv.is_finite() || (sign != 0.0 && dv.signum() != sign) {
                return Err(invalid("conformal map is not strictly monotone on its domain"));
            }
            sign = dv.signum();
            dlo = dlo.min(dv.abs());
            dhi = dhi.max(dv.abs());
        }
        if !(dlo > 0.0 && dhi < 1.0) {
            return Err(invalid(format!(
                "conformal map derivative bounds [{dlo}, {dhi}] must lie in (0,1)"
            )));
        }
        Ok(Conformal1D {
            kind,
            domain,
            deriv_lo: dlo,
            deriv_hi: dhi,
            holder,
        })
    }

    pub fn kind(&self) -> &ConformalKind {
        &self.kind
    }

    pub fn domain(&self) -> (f64, f64) {
        self.domain
    }

    pub fn deriv_lo(&self) -> f64 {
        self.deriv_lo
    }

    pub fn deriv_hi(&self) -> f64 {
        self.deriv_hi
    }

    pub fn holder(&self) -> f64 {
        self.holder
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.kind.eval(x)
    }

    pub fn deriv(&self, x: f64) -> f64 {
        self.kind.deriv(x)
    }

    pub fn increasing(&self) -> bool {
        self.kind.deriv(self.domain.0) > 0.0
    }

    /// Inverse on the image of the domain by bisection; `None` outside the image.
    pub fn inverse(&self, y: f64) -> Option<f64> {
        let (mut a, mut b) = self.domain;
        let (fa, fb) = (self.eval(a), self.eval(b));
        let (ylo, yhi) = if fa < fb { (fa, fb) } else { (fb, fa) };
        if y < ylo || y > yhi {
            return None;
        }
        let inc = fa < fb;
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            let below = self.eval(m) < y;
            if below == inc {
                a = m;
            } else {
                b = m;
            }
            if b - a <= f64::EPSILON * (a.abs() + b.abs()) {
                break;
            }
        }
        Some(0.5 * (a + b))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ContractionMap {
    Similitude(Similitude),
    Conformal1D(Conformal1D),
}

impl ContractionMap {
    pub fn dim(&self) -> usize {
        match self {
            ContractionMap::Similitude(s) => s.dim,
            ContractionMap::Conformal1D(_) => 1,
        }
    }

    #[inline]
    pub fn apply(&self, x: &Point) -> Point {
        match self {
            ContractionMap::Similitude(s) => s.apply(x),
            ContractionMap::Conformal1D(c) => [c.eval(x[0]), 0.0, 0.0],
        }
    }

    pub fn inverse_apply(&self, y: &Point) -> Option<Point> {
        match self {
            ContractionMap::Similitude(s) => Some(s.inverse_apply(y)),
            ContractionMap::Conformal1D(c) => c.inverse(y[0]).map(|x| [x, 0.0, 0.0]),
        }
    }

    /// r for a similitude, sup|S′| for a conformal map.
    pub fn ratio_upper(&self) -> f64 {
        match self {
            ContractionMap::Similitude(s) => s.ratio,
            ContractionMap::Conformal1D(c) => c.deriv_hi,
        }
    }

    pub fn ratio_lower(&self) -> f64 {
        match self {
            ContractionMap::Similitude(s) => s.ratio,
            ContractionMap::Conformal1D(c) => c.deriv_lo,
        }
    }

    pub fn is_similitude(&self) -> bool {
        matches!(self, ContractionMap::Similitude(_))
    }

    /// Image of a box: exact for similitudes (bounding box of the corner images)
    /// and for monotone 1D maps.
    pub fn image_box(&self, b: &BoxSet) -> BoxSet {
        let imgs: Vec<Point> = b.corners().iter().map(|c| self.apply(c)).collect();
        BoxSet::bounding(b.dim, &imgs)
    }
}

/// A finite word over {1..m}; the empty word stands for the whole attractor.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct CylinderCode(pub Vec<usize>);

impl CylinderCode {
    pub fn empty() -> Self {
        CylinderCode(Vec::new())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl std::fmt::Display for CylinderCode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|l| l.to_string()).collect();
        f.write_str(&parts.join("."))
    }
}

#[derive(Debug, Clone)]
pub struct IFSystem {
    dim: usize,
    maps: Vec<ContractionMap>,
    weights: Vec<f64>,
    osc_set: Option<BoxSet>,
}

impl IFSystem {
    pub fn new(dim: usize, maps: Vec<ContractionMap>, weights: Vec<f64>, osc_set: Option<BoxSet>) -> Result<Self> {
        check_dim(dim)?;
        if maps.len() < 2 || maps.len() > MAX_MAPS {
            return Err(invalid(format!(
                "an IFS needs 2..={MAX_MAPS} maps (got {})",
                maps.len()
            )));
        }
        if weights.len() != maps.len() {
            return Err(invalid("one weight per map is required"));
        }
        if weights.iter().any(|p| !(*p > 0.0) || !p.is_finite()) {
            return Err(invalid("weights must be positive"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(invalid(format!("weights must sum to 1 (got {total})")));
        }
        for m in &maps {
            if m.dim() != dim {
                return Err(invalid("map dimension differs from the ambient dimension"));
            }
        }
        if let Some(u) = &osc_set {
            if u.dim != dim {
                return Err(invalid("osc set dimension differs from the ambient dimension"));
            }
        }
        for m in &maps {
            if let ContractionMap::Conformal1D(c) = m {
                let (lo, hi) = c.domain();
                let (a, b) = (c.eval(lo), c.eval(hi));
                let (ilo, ihi) = if a < b { (a, b) } else { (b, a) };
                if ilo < lo - 1e-12 || ihi > hi + 1e-12 {
                    return Err(invalid("conformal map does not send its domain into itself"));
                }
            }
        }
        Ok(IFSystem {
            dim,
            maps,
            weights,
            osc_set,
        })
    }

    /// The classical middle-thirds Cantor system with the given weights.
    pub fn cantor(p1: f64) -> Result<Self> {
        IFSystem::new(
            1,
            vec![
                ContractionMap::Similitude(Similitude::line(1.0 / 3.0, 0.0)?),
                ContractionMap::Similitude(Similitude::line(1.0 / 3.0, 2.0 / 3.0)?),
            ],
            vec![p1, 1.0 - p1],
            Some(BoxSet::unit(1)),
        )
    }

    /// m equal pieces of [0,1] with equal weights; its invariant measure is Lebesgue measure.
    pub fn uniform_interval(pieces: usize) -> Result<Self> {
        let r = 1.0 / pieces as f64;
        let maps = (0..pieces)
            .map(|i| Similitude::line(r, i as f64 * r).map(ContractionMap::Similitude))
            .collect::<Result<Vec<_>>>()?;
        IFSystem::new(1, maps, vec![r; pieces], Some(BoxSet::unit(1)))
    }

    /// Four quarter squares of [0,1]²: Lebesgue measure on the unit square.
    pub fn uniform_square() -> Result<Self> {
        let mut maps = Vec::new();
        for (tx, ty) in [(0.0, 0.0), (0.5, 0.0), (0.0, 0.5), (0.5, 0.5)] {
            maps.push(ContractionMap::Similitude(Similitude::new(2, 0.5, None, &[tx, ty])?));
        }
        IFSystem::new(2, maps, vec![0.25; 4], Some(BoxSet::unit(2)))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn maps(&self) -> &[ContractionMap] {
        &self.maps
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn map_count(&self) -> usize {
        self.maps.len()
    }

    pub fn osc_set(&self) -> Option<&BoxSet> {
        self.osc_set.as_ref()
    }

    pub fn osc_declared(&self) -> bool {
        self.osc_set.is_some()
    }

    pub fn all_similitudes(&self) -> bool {
        self.maps.iter().all(ContractionMap::is_similitude)
    }

    /// Reference set used to seed representatives and bound cylinder diameters:
    /// the OSC box, else the common domain of conformal maps, else a box around
    /// an invariant ball.
    pub fn reference_box(&self) -> BoxSet {
        if let Some(u) = &self.osc_set {
            return u.clone();
        }
        if let Some(ContractionMap::Conformal1D(c)) = self.maps.first() {
            let (lo, hi) = c.domain();
            return BoxSet {
                dim: 1,
                lo: [lo, 0.0, 0.0],
                hi: [hi, 0.0, 0.0],
            };
        }
        let (c, r) = self.invariant_ball();
        let mut lo = c;
        let mut hi = c;
        for k in 0..self.dim {
            lo[k] -= r;
            hi[k] += r;
        }
        BoxSet { dim: self.dim, lo, hi }
    }

    /// A ball B(c, R) with Sᵢ(B) ⊆ B for every i; it contains the attractor.
    pub fn invariant_ball(&self) -> (Point, f64) {
        let c = fixed_point(|x| self.maps[0].apply(x), &ORIGIN);
        let r = self
            .maps
            .iter()
            .map(|m| point::dist(&m.apply(&c), &c) / (1.0 - m.ratio_upper()))
            .fold(0.0, f64::max);
        (c, r)
    }

    pub fn compose_word(&self, word: &CylinderCode) -> Result<WordMap<'_>> {
        let m = self.maps.len();
        let mut letters = Vec::with_capacity(word.len());
        let mut mass = 1.0;
        let mut ratio = 1.0;
        for &l in &word.0 {
            if l == 0 || l > m {
                return Err(Error::InvalidWord { letter: l, maps: m });
            }
            letters.push(l - 1);
            mass *= self.weights[l - 1];
            ratio *= self.maps[l - 1].ratio_upper();
        }
        Ok(WordMap {
            ifs: self,
            letters,
            mass,
            ratio_bound: ratio,
        })
    }

    /// Boxes covering the level-`level` cylinders, one per word in lexicographic order.
    pub fn attractor_cover(&self, level: usize, max_words: usize) -> Result<Vec<(CylinderCode, BoxSet)>> {
        let u = self.osc_set.as_ref().ok_or(Error::MissingOscSet)?;
        let count = word_count(self.maps.len(), level, max_words)?;
        let mut out = Vec::with_capacity(count);
        for idx in 0..count {
            let word = word_of_index(idx, self.maps.len(), level);
            let wm = self.compose_word(&word)?;
            out.push((word, wm.image_box(u)));
        }
        Ok(out)
    }

    /// Heuristic open-set-condition check on the declared box U: bounding boxes of
    /// Sᵢ(U) and `samples` random points of U pushed through every map.
    pub fn check_osc(&self, samples: usize, seed: u64) -> Result<OscReport> {
        let u = self.osc_set.as_ref().ok_or(Error::MissingOscSet)?;
        let boxes: Vec<BoxSet> = self.maps.iter().map(|m| m.image_box(u)).collect();
        let mut warnings = Vec::new();
        let images_contained = boxes
            .iter()
            .all(|b| u.contains_closed(&b.lo, 1e-12) && u.contains_closed(&b.hi, 1e-12));
        if !images_contained {
            warnings.push("some image S_i(U) leaves U".to_string());
        }
        let mut boxes_disjoint = true;
        for i in 0..boxes.len() {
            for j in i + 1..boxes.len() {
                if boxes[i].interiors_overlap(&boxes[j], 1e-12) {
                    boxes_disjoint = false;
                }
            }
        }
        if !boxes_disjoint {
            warnings.push("bounding boxes of the images overlap".to_string());
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut sampled_overlaps = 0;
        for _ in 0..samples {
            let mut x = ORIGIN;
            for k in 0..self.dim {
                x[k] = rng.random_range(u.lo[k]..u.hi[k]);
            }
            if !u.contains_open(&x) {
                continue;
            }
            for (i, mi) in self.maps.iter().enumerate() {
                let y = mi.apply(&x);
                for (j, mj) in self.maps.iter().enumerate() {
                    if i == j {
                        continue;
                    }
                    if let Some(pre) = mj.inverse_apply(&y) {
                        if u.contains_open(&pre) {
                            sampled_overlaps += 1;
                        }
                    }
                }
            }
        }
        if sampled_overlaps > 0 {
            warnings.push(format!("{sampled_overlaps} sampled points fall in two images"));
        }
        Ok(OscReport {
            holds: images_contained && sampled_overlaps == 0,
            images_contained,
            boxes_disjoint,
            sampled_overlaps,
            samples,
            warnings,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OscReport {
    pub holds: bool,
    pub images_contained: bool,
    pub boxes_disjoint: bool,
    pub sampled_overlaps: usize,
    pub samples: usize,
    pub warnings: Vec<String>,
}

/// S_τ = S_{i₁} ∘ ⋯ ∘ S_{iₙ} together with p_τ and an upper bound on its contraction ratio.
#[derive(Debug, Clone)]
pub struct WordMap<'a> {
    ifs: &'a IFSystem,
    letters: Vec<usize>,
    pub mass: f64,
    pub ratio_bound: f64,
}

impl WordMap<'_> {
    pub fn apply(&self, x: &Point) -> Point {
        self.letters
            .iter()
            .rev()
            .fold(*x, |acc, &l| self.ifs.maps[l].apply(&acc))
    }

    pub fn image_box(&self, b: &BoxSet) -> BoxSet {
        let imgs: Vec<Point> = b.corners().iter().map(|c| self.apply(c)).collect();
        BoxSet::bounding(b.dim, &imgs)
    }

    pub fn fixed_point(&self) -> Point {
        fixed_point(|x| self.apply(x), &self.ifs.reference_box().center())
    }

    /// The composed similitude when every letter is a similitude (`None` for the empty word).
    pub fn as_similitude(&self) -> Option<Similitude> {
        let mut acc: Option<Similitude> = None;
        for &l in &self.letters {
            let ContractionMap::Similitude(s) = &self.ifs.maps[l] else {
                return None;
            };
            acc = Some(match acc {
                None => s.clone(),
                Some(outer) => outer.compose(s),
            });
        }
        acc
    }

    /// sup |S′_τ| over the 1D reference interval, sampled on a 1024-point grid
    /// (chain rule through the word).
    pub fn sup_derivative_on_grid(&self) -> f64 {
        let u = self.ifs.reference_box();
        let (lo, hi) = (u.lo[0], u.hi[0]);
        let mut best: f64 = 0.0;
        for k in 0..DERIVATIVE_GRID {
            let mut x = lo + (hi - lo) * (k as f64 + 0.5) / DERIVATIVE_GRID as f64;
            let mut d = 1.0;
            for &l in self.letters.iter().rev() {
                let m = &self.ifs.maps[l];
                d *= match m {
                    ContractionMap::Similitude(s) => s.ratio,
                    ContractionMap::Conformal1D(c) => c.deriv(x).abs(),
                };
                x = m.apply(&[x, 0.0, 0.0])[0];
            }
            best = best.max(d);
        }
        best
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }
}

/// Iterates a contraction from `seed` until successive iterates move less than 1e-14.
pub fn fixed_point(f: impl Fn(&Point) -> Point, seed: &Point) -> Point {
    let mut x = *seed;
    for _ in 0..10_000 {
        let y = f(&x);
        let moved = point::dist(&x, &y);
        x = y;
        if moved < 1e-14 {
            break;
        }
    }
    x
}

/// m^level, checked against a budget.
pub fn word_count(maps: usize, level: usize, max_words: usize) -> Result<usize> {
    let need = (maps as f64).powi(level as i32);
    if need > max_words as f64 {
        return Err(Error::BudgetExceeded {
            what: "words",
            needed: need,
            limit: max_words as f64,
        });
    }
    Ok(maps.pow(level as u32))
}

/// The `idx`-th word of length `level` in lexicographic order (first letter most significant).
pub fn word_of_index(mut idx: usize, maps: usize, level: usize) -> CylinderCode {
    let mut letters = vec![0; level];
    for slot in letters.iter_mut().rev() {
        *slot = idx % maps + 1;
        idx /= maps;
    }
    CylinderCode(letters)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cantor() -> IFSystem {
        IFSystem::cantor(0.5).unwrap()
    }

    #[test]
    fn compose_cantor_words() {
        let ifs = cantor();
        let w = ifs.compose_word(&CylinderCode(vec![1, 2])).unwrap();
        assert!((w.mass - 0.25).abs() < 1e-15);
        assert!((w.ratio_bound - 1.0 / 9.0).abs() < 1e-15);

        let w = ifs.compose_word(&CylinderCode(vec![2, 2, 2])).unwrap();
        assert!((w.mass - 0.125).abs() < 1e-15);
        assert!((w.ratio_bound - 1.0 / 27.0).abs() < 1e-15);
        let b = w.image_box(&BoxSet::unit(1));
        assert!((b.lo[0] - 26.0 / 27.0).abs() < 1e-15);
        assert!((b.hi[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn empty_word_is_identity() {
        let ifs = cantor();
        let w = ifs.compose_word(&CylinderCode::empty()).unwrap();
        assert_eq!(w.mass, 1.0);
        assert_eq!(w.ratio_bound, 1.0);
        assert_eq!(w.apply(&[0.37, 0.0, 0.0]), [0.37, 0.0, 0.0]);
    }

    #[test]
    fn invalid_letters_rejected() {
        let ifs = cantor();
        assert_eq!(
            ifs.compose_word(&CylinderCode(vec![1, 3])).unwrap_err(),
            Error::InvalidWord { letter: 3, maps: 2 }
        );
        assert!(ifs.compose_word(&CylinderCode(vec![0])).is_err());
    }

    #[test]
    fn cover_levels() {
        let ifs = cantor();
        let l1 = ifs.attractor_cover(1, 1000).unwrap();
        assert_eq!(l1.len(), 2);
        assert_eq!((l1[0].1.lo[0], l1[0].1.hi[0]), (0.0, 1.0 / 3.0));
        assert!((l1[1].1.lo[0] - 2.0 / 3.0).abs() < 1e-15 && (l1[1].1.hi[0] - 1.0).abs() < 1e-15);

        let l2 = ifs.attractor_cover(2, 1000).unwrap();
        assert_eq!(l2.len(), 4);
        for (_, b) in &l2 {
            assert!((b.hi[0] - b.lo[0] - 1.0 / 9.0).abs() < 1e-15);
        }
        assert_eq!(l2[3].0, CylinderCode(vec![2, 2]));
    }

    #[test]
    fn cover_requires_osc_set() {
        let maps = vec![
            ContractionMap::Similitude(Similitude::line(0.5, 0.0).unwrap()),
            ContractionMap::Similitude(Similitude::line(0.5, 0.5).unwrap()),
        ];
        let ifs = IFSystem::new(1, maps, vec![0.5, 0.5], None).unwrap();
        assert_eq!(ifs.attractor_cover(1, 10).unwrap_err(), Error::MissingOscSet);
    }

    #[test]
    fn sierpinski_cover_is_three_half_squares() {
        let maps = [(0.0, 0.0), (0.5, 0.0), (0.25, 0.5)]
            .iter()
            .map(|&(x, y)| ContractionMap::Similitude(Similitude::new(2, 0.5, None, &[x, y]).unwrap()))
            .collect();
        let ifs = IFSystem::new(2, maps, vec![1.0 / 3.0; 3], Some(BoxSet::unit(2))).unwrap();
        let cover = ifs.attractor_cover(1, 10).unwrap();
        assert_eq!(cover.len(), 3);
        for (_, b) in &cover {
            assert!((b.hi[0] - b.lo[0] - 0.5).abs() < 1e-15);
            assert!((b.hi[1] - b.lo[1] - 0.5).abs() < 1e-15);
        }
        assert!(ifs.check_osc(2000, 1).unwrap().holds);
    }

    #[test]
    fn weights_validated() {
        let maps = vec![
            ContractionMap::Similitude(Similitude::line(0.5, 0.0).unwrap()),
            ContractionMap::Similitude(Similitude::line(0.5, 0.5).unwrap()),
        ];
        let err = IFSystem::new(1, maps.clone(), vec![0.5, 0.4], None).unwrap_err();
        assert!(err.to_string().contains("weights must sum to 1"));
        assert!(IFSystem::new(1, maps, vec![1.0, 0.0], None).is_err());
    }

    #[test]
    fn similitude_scales_distances() {
        let th: f64 = 0.7;
        let rot = vec![vec![th.cos(), -th.sin()], vec![th.sin(), th.cos()]];
        let s = Similitude::new(2, 0.4, Some(&rot), &[0.1, -0.3]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let x = [rng.random::<f64>(), rng.random::<f64>(), 0.0];
            let y = [rng.random::<f64>(), rng.random::<f64>(), 0.0];
            let d = point::dist(&x, &y);
            let e = point::dist(&s.apply(&x), &s.apply(&y));
            assert!((e - 0.4 * d).abs() <= SIMILARITY_TOL * d.max(1.0));
            let back = s.inverse_apply(&s.apply(&x));
            assert!(point::dist(&back, &x) < 1e-14);
        }
        let bad = vec![vec![1.0, 0.1], vec![0.0, 1.0]];
        assert!(Similitude::new(2, 0.4, Some(&bad), &[0.0, 0.0]).is_err());
    }

    #[test]
    fn conformal_bounds_by_grid() {
        // x ↦ x/(x+3) on [0,1]: derivative 3/(x+3)² in [3/16, 1/3]
        let c = Conformal1D::new(
            ConformalKind::Mobius {
                a: 1.0,
                b: 0.0,
                c: 1.0,
                d: 3.0,
            },
            (0.0, 1.0),
            0.5,
        )
        .unwrap();
        assert!((c.deriv_hi() - 1.0 / 3.0).abs() < 1e-15);
        assert!((c.deriv_lo() - 3.0 / 16.0).abs() < 1e-15);
        let y = c.eval(0.3);
        assert!((c.inverse(y).unwrap() - 0.3).abs() < 1e-13);
        // expanding somewhere: rejected
        assert!(Conformal1D::new(
            ConformalKind::Quadratic {
                c0: 0.0,
                c1: 0.2,
                c2: 0.5
            },
            (0.0, 1.0),
            0.5
        )
        .is_err());
        // non-monotone: rejected
        assert!(Conformal1D::new(
            ConformalKind::Quadratic {
                c0: 0.0,
                c1: -0.2,
                c2: 0.3
            },
            (0.0, 1.0),
            0.5
        )
        .is_err());
    }

    #[test]
    fn conformal_word_derivative() {
        let c1 = Conformal1D::new(
            ConformalKind::Mobius {
                a: 1.0,
                b: 0.0,
                c: 1.0,
                d: 3.0,
            },
            (0.0, 1.0),
            0.5,
        )
        .unwrap();
        let c2 = Conformal1D::new(
            ConformalKind::Quadratic {
                c0: 0.6,
                c1: 0.3,
                c2: 0.05,
            },
            (0.0, 1.0),
            0.5,
        )
        .unwrap();
        let ifs = IFSystem::new(
            1,
            vec![ContractionMap::Conformal1D(c1), ContractionMap::Conformal1D(c2)],
            vec![0.5, 0.5],
            Some(BoxSet::unit(1)),
        )
        .unwrap();
        let w = ifs.compose_word(&CylinderCode(vec![1, 2, 1])).unwrap();
        let sup = w.sup_derivative_on_grid();
        assert!(sup > 0.0 && sup <= w.ratio_bound * (1.0 + 1e-12));
        assert!(ifs.check_osc(1000, 7).unwrap().holds);
    }

    #[test]
    fn lexicographic_words() {
        assert_eq!(word_of_index(0, 3, 2), CylinderCode(vec![1, 1]));
        assert_eq!(word_of_index(5, 3, 2), CylinderCode(vec![2, 3]));
        assert!(word_count(2, 30, 1_000).is_err());
    }

    #[test]
    fn composed_similitude_matches_pointwise() {
        let ifs = cantor();
        let w = ifs.compose_word(&CylinderCode(vec![2, 1, 2])).unwrap();
        let s = w.as_similitude().unwrap();
        let x = [0.41, 0.0, 0.0];
        assert!((s.apply(&x)[0] - w.apply(&x)[0]).abs() < 1e-15);
        assert!((s.ratio() - 1.0 / 27.0).abs() < 1e-16);
    }
}
