//! Ball profiles, L∞-dimension estimates, closed-form dimension bounds and the
//! regularity conditions (C2)-(C4).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::ifs::IFSystem;
use crate::measure::{BallIndex, MeasureApprox};
use crate::point::{Point, ORIGIN};

pub const MAX_PROBE_CENTERS: usize = 100_000;
pub const SATURATION_TOL: f64 = 1e-12;
pub const FIT_RESIDUAL: f64 = 0.05;
pub const THRESHOLD_MARGIN: f64 = 0.02;
pub const REGULARITY_GRID: usize = 200;

/// Geometric radius ladder r_k = rMax·factor^k, k = 0..count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Ladder {
    pub r_max: f64,
    pub factor: f64,
    pub count: usize,
}

impl Ladder {
    pub fn new(r_max: f64, factor: f64, count: usize) -> Result<Self> {
        if !(r_max > 0.0) || !r_max.is_finite() {
            return Err(invalid("ladder rMax must be positive"));
        }
        if !(factor > 0.0 && factor < 1.0) {
            return Err(invalid("ladder factor must lie in (0,1)"));
        }
        if count == 0 {
            return Err(invalid("ladder needs at least one radius"));
        }
        Ok(Ladder { r_max, factor, count })
    }

    /// Parses `rMax:factor:count`; rMax and factor accept `a/b` fractions.
    pub fn parse(spec: &str) -> Result<Self> {
        let parts: Vec<&str> = spec.split(':').collect();
        if parts.len() != 3 {
            return Err(invalid(format!("ladder `{spec}` is not rMax:factor:count")));
        }
        let count = parts[2]
            .trim()
            .parse::<usize>()
            .map_err(|_| invalid(format!("bad ladder count `{}`", parts[2])))?;
        Ladder::new(parse_number(parts[0])?, parse_number(parts[1])?, count)
    }

    pub fn radii(&self) -> Vec<f64> {
        (0..self.count)
            .map(|k| self.r_max * self.factor.powi(k as i32))
            .collect()
    }
}

/// A float, or a fraction `a/b`.
pub fn parse_number(s: &str) -> Result<f64> {
    let s = s.trim();
    let bad = || invalid(format!("cannot parse number `{s}`"));
    let v = match s.split_once('/') {
        Some((a, b)) => {
            let a: f64 = a.trim().parse().map_err(|_| bad())?;
            let b: f64 = b.trim().parse().map_err(|_| bad())?;
            a / b
        }
        None => s.parse().map_err(|_| bad())?,
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(bad())
    }
}

/// How probe centers for the sup in sup_x μ(B(x,r)) are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CenterChoice {
    /// All atoms, or an evenly strided subset of [`MAX_PROBE_CENTERS`] atoms.
    Atoms,
    /// `count` atoms drawn from μ, each jittered uniformly by up to half a cylinder diameter per axis.
    MonteCarlo { count: usize, seed: u64 },
}

#[derive(Debug, Clone, Serialize)]
pub struct BallProfile {
    pub radii: Vec<f64>,
    pub sup_mass: Vec<f64>,
    pub centers: CenterChoice,
    pub center_count: usize,
    /// Radii below this are flagged unreliable.
    pub resolution_floor: f64,
    pub unreliable: Vec<bool>,
}

fn probe_centers(mu: &MeasureApprox, choice: CenterChoice) -> Vec<Point> {
    match choice {
        CenterChoice::Atoms => {
            let n = mu.len();
            if n <= MAX_PROBE_CENTERS {
                mu.positions().to_vec()
            } else {
                (0..MAX_PROBE_CENTERS)
                    .map(|k| mu.positions()[k * n / MAX_PROBE_CENTERS])
                    .collect()
            }
        }
        CenterChoice::MonteCarlo { count, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut cdf = Vec::with_capacity(mu.len());
            let mut acc = 0.0;
            for w in mu.weights() {
                acc += w;
                cdf.push(acc);
            }
            let half = 0.5 * mu.cylinder_diameter();
            (0..count)
                .map(|_| {
                    let u = rng.random::<f64>() * acc;
                    let k = cdf.partition_point(|c| *c < u).min(mu.len() - 1);
                    let mut p = mu.positions()[k];
                    for c in p.iter_mut().take(mu.dim()) {
                        *c += half * (2.0 * rng.random::<f64>() - 1.0);
                    }
                    p
                })
                .collect()
        }
    }
}

/// Maximum of `f` over `centers`; order of evaluation does not affect the result.
pub(crate) fn sup_over<F>(centers: &[Point], f: F) -> f64
where
    F: Fn(&Point) -> f64 + Sync,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        centers.par_iter().map(&f).reduce(|| 0.0, f64::max)
    }
    #[cfg(not(feature = "parallel"))]
    {
        centers.iter().map(f).fold(0.0, f64::max)
    }
}

pub fn ball_profile(mu: &MeasureApprox, ladder: &Ladder, centers: CenterChoice) -> Result<BallProfile> {
    if mu.is_empty() {
        return Err(Error::EmptyMeasure);
    }
    let index = BallIndex::new(mu);
    let pts = probe_centers(mu, centers);
    profile_with(&ladder.radii(), &pts, centers, mu.resolution_floor(), |c, r| {
        index.mass(c, r)
    })
}

/// A ball profile for an arbitrary ball-mass oracle (e.g. geodesic balls on a surface).
pub fn profile_with<F>(
    radii: &[f64],
    centers: &[Point],
    choice: CenterChoice,
    floor: f64,
    mass: F,
) -> Result<BallProfile>
where
    F: Fn(&Point, f64) -> f64 + Sync,
{
    if centers.is_empty() {
        return Err(Error::EmptyMeasure);
    }
    if radii.windows(2).any(|w| !(w[1] < w[0])) || radii.iter().any(|r| !(*r > 0.0)) {
        return Err(invalid("radii must be positive and strictly decreasing"));
    }
    let mut sup_mass: Vec<f64> = radii
        .iter()
        .map(|&r| sup_over(centers, |c| mass(c, r)).min(1.0))
        .collect();
    // enforce the monotone envelope against rounding in prefix differences
    for k in 1..sup_mass.len() {
        if sup_mass[k] > sup_mass[k - 1] {
            sup_mass[k] = sup_mass[k - 1];
        }
    }
    Ok(BallProfile {
        radii: radii.to_vec(),
        sup_mass,
        centers: choice,
        center_count: centers.len(),
        resolution_floor: floor,
        unreliable: radii.iter().map(|r| *r < floor).collect(),
    })
}

/// A profile sampled exactly from supMass = c·r^s (clipped to 1).
pub fn synthetic_profile(ladder: &Ladder, c: f64, s: f64) -> BallProfile {
    let radii = ladder.radii();
    let sup_mass: Vec<f64> = radii.iter().map(|r| (c * r.powf(s)).min(1.0)).collect();
    BallProfile {
        unreliable: vec![false; radii.len()],
        radii,
        sup_mass,
        centers: CenterChoice::Atoms,
        center_count: 0,
        resolution_floor: 0.0,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DimensionEstimate {
    pub lower: f64,
    pub upper: f64,
    /// Least-squares slope over the window.
    pub slope: f64,
    /// Inclusive index range into the profile.
    pub slope_window: (usize, usize),
    pub residual: f64,
    pub degenerate: bool,
}

impl DimensionEstimate {
    /// An estimate known in closed form (lower = upper = value).
    pub fn exact(value: f64) -> Self {
        DimensionEstimate {
            lower: value,
            upper: value,
            slope: value,
            slope_window: (0, 0),
            residual: 0.0,
            degenerate: false,
        }
    }
}

/// Least-squares fit y = a + b x; returns (a, b, max |residual|).
pub(crate) fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let b = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let a = my - b * mx;
    let res = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - a - b * x).abs())
        .fold(0.0, f64::max);
    (a, b, res)
}

pub fn estimate_linf_dim(profile: &BallProfile) -> Result<DimensionEstimate> {
    let k = profile.radii.len();
    if k < 4 {
        return Err(invalid(format!(
            "dimension estimate needs at least 4 ladder points (got {k})"
        )));
    }
    let usable: Vec<usize> = (0..k)
        .filter(|&i| profile.sup_mass[i] > 0.0 && profile.sup_mass[i] < 1.0 - SATURATION_TOL && !profile.unreliable[i])
        .collect();
    if usable.is_empty() {
        return Ok(DimensionEstimate {
            lower: 0.0,
            upper: 0.0,
            slope: 0.0,
            slope_window: (0, k - 1),
            residual: 0.0,
            degenerate: true,
        });
    }
    if usable.len() < 2 {
        return Err(Error::Numeric(
            "fewer than two unsaturated, reliable ladder points".into(),
        ));
    }
    let lx: Vec<f64> = usable.iter().map(|&i| profile.radii[i].ln()).collect();
    let ly: Vec<f64> = usable.iter().map(|&i| profile.sup_mass[i].ln()).collect();
    let n = usable.len();
    let min_len = n.min(3);

    // largest contiguous window with small residual; ties prefer small radii, then small residual
    let mut best: Option<(usize, usize, f64, f64)> = None;
    for len in (min_len..=n).rev() {
        for start in 0..=n - len {
            let (_, b, res) = linear_fit(&lx[start..start + len], &ly[start..start + len]);
            if res >= FIT_RESIDUAL {
                continue;
            }
            let better = match best {
                None => true,
                Some((bs, _, _, bres)) => start > bs || (start == bs && res < bres),
            };
            if better {
                best = Some((start, len, b, res));
            }
        }
        if best.is_some() {
            break;
        }
    }
    let (start, len, slope, residual) = match best {
        Some(b) => b,
        None => {
            // no window fits; report the full range with its residual
            let (_, b, res) = linear_fit(&lx, &ly);
            (0, n, b, res)
        }
    };
    let mut lower = f64::INFINITY;
    let mut upper = f64::NEG_INFINITY;
    for j in start..start + len - 1 {
        let s = (ly[j + 1] - ly[j]) / (lx[j + 1] - lx[j]);
        lower = lower.min(s);
        upper = upper.max(s);
    }
    Ok(DimensionEstimate {
        lower,
        upper,
        slope,
        slope_window: (usable[start], usable[start + len - 1]),
        residual,
        degenerate: false,
    })
}

/// (min_i ln pᵢ/ln rᵢ, max_i ln pᵢ/ln rᵢ) for similitudes. A conformal map contracts at a
/// rate between derivLo and derivHi, so its lower bound uses derivLo and its upper bound derivHi.
pub fn selfsimilar_dim_bounds(ifs: &IFSystem) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (map, p) in ifs.maps().iter().zip(ifs.weights()) {
        lo = lo.min(p.ln() / map.ratio_lower().ln());
        hi = hi.max(p.ln() / map.ratio_upper().ln());
    }
    (lo, hi)
}

#[derive(Debug, Clone, Serialize)]
pub struct C2Report {
    pub holds: bool,
    pub abar: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct C3Report {
    pub holds: bool,
    pub lower_bound: f64,
    pub upper_bound: f64,
    /// "bounds", "profile" or "inconclusive".
    pub decided_by: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct C4Report {
    pub holds: bool,
    pub s_exponent: f64,
    pub c_constant: f64,
    pub violations: usize,
    /// "fit" or "bounds".
    pub decided_by: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConditionReport {
    pub n: usize,
    pub c2: C2Report,
    pub c3: C3Report,
    pub c4: C4Report,
    pub estimate: Option<DimensionEstimate>,
    pub threshold: ThresholdReport,
    pub warnings: Vec<String>,
}

/// Ā = max_i pᵢ‖Sᵢ′‖^{−(n−2)}.
pub fn abar(ifs: &IFSystem, n: usize) -> f64 {
    let e = -(n as f64 - 2.0);
    ifs.maps()
        .iter()
        .zip(ifs.weights())
        .map(|(m, p)| p * m.ratio_upper().powf(e))
        .fold(0.0, f64::max)
}

/// Upper s-regularity fit: sweep s on a grid of (max(n−2,0), n], fit c by the log-log
/// intercept and count ladder points exceeding c·r^s by more than a slack.
pub fn regularity_fit(profile: &BallProfile, n: usize) -> Option<C4Report> {
    let pts: Vec<(f64, f64)> = (0..profile.radii.len())
        .filter(|&i| profile.sup_mass[i] > 0.0 && !profile.unreliable[i])
        .map(|i| (profile.radii[i].ln(), profile.sup_mass[i].ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let (xmin, xmax) = pts
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.0), b.max(p.0)));
    let slack = 0.04 * 0.5 * (xmax - xmin);
    let s_lo = (n as f64 - 2.0).max(0.0);
    let s_hi = n as f64;
    let mut best: Option<C4Report> = None;
    for k in 1..=REGULARITY_GRID {
        let s = s_lo + (s_hi - s_lo) * k as f64 / REGULARITY_GRID as f64;
        let ln_c = pts.iter().map(|(x, y)| y - s * x).sum::<f64>() / pts.len() as f64;
        let violations = pts.iter().filter(|(x, y)| y - (ln_c + s * x) > slack).count();
        let cand = C4Report {
            holds: violations == 0,
            s_exponent: s,
            c_constant: ln_c.exp(),
            violations,
            decided_by: "fit".into(),
        };
        let replace = match &best {
            None => true,
            Some(b) => {
                if b.violations == 0 {
                    false
                } else {
                    cand.violations < b.violations
                }
            }
        };
        if replace {
            best = Some(cand);
        }
    }
    best
}

pub fn check_conditions(ifs: &IFSystem, n: usize, profile: Option<&BallProfile>) -> Result<ConditionReport> {
    if !(1..=3).contains(&n) {
        return Err(invalid("n must be 1, 2 or 3"));
    }
    let nm2 = n as f64 - 2.0;
    let a = abar(ifs, n);
    let c2 = C2Report {
        holds: a < 1.0,
        abar: a,
    };
    let (lo, hi) = selfsimilar_dim_bounds(ifs);
    let estimate = match profile {
        Some(p) => Some(estimate_linf_dim(p)?),
        None => None,
    };
    let mut warnings = Vec::new();

    let c3 = if lo > nm2 {
        C3Report {
            holds: true,
            lower_bound: lo,
            upper_bound: hi,
            decided_by: "bounds".into(),
        }
    } else if hi <= nm2 {
        C3Report {
            holds: false,
            lower_bound: lo,
            upper_bound: hi,
            decided_by: "bounds".into(),
        }
    } else if let Some(e) = estimate.as_ref().filter(|e| !e.degenerate) {
        C3Report {
            holds: e.lower > nm2,
            lower_bound: lo,
            upper_bound: hi,
            decided_by: "profile".into(),
        }
    } else {
        warnings.push("C3 inconclusive: bounds straddle n-2 and no profile supplied".into());
        C3Report {
            holds: false,
            lower_bound: lo,
            upper_bound: hi,
            decided_by: "inconclusive".into(),
        }
    };

    let fit = profile.and_then(|p| regularity_fit(p, n));
    let c4 = match fit {
        Some(f) => f,
        None => {
            let s = lo;
            C4Report {
                holds: s > nm2,
                s_exponent: s,
                c_constant: 1.0,
                violations: 0,
                decided_by: "bounds".into(),
            }
        }
    };

    if let Some(e) = &estimate {
        if c2.holds && !e.degenerate && e.slope < nm2 - 0.1 {
            warnings.push(format!(
                "consistency: C2 holds but the dimension estimate {:.4} is below n-2 by more than 0.1",
                e.slope
            ));
        }
    }
    if c2.holds && !c3.holds {
        warnings.push("consistency: C2 holds but C3 does not".into());
    }
    if c3.holds != c4.holds {
        warnings.push(format!("consistency: C3 = {} but C4 = {}", c3.holds, c4.holds));
    }

    let dims = match &estimate {
        Some(e) if !e.degenerate => e.clone(),
        _ => DimensionEstimate {
            lower: lo,
            upper: hi,
            slope: lo,
            slope_window: (0, 0),
            residual: 0.0,
            degenerate: false,
        },
    };
    let threshold = compactness_threshold(&dims, n, 2.0)?;
    Ok(ConditionReport {
        n,
        c2,
        c3,
        c4,
        estimate,
        threshold,
        warnings,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    Compact,
    NotCompact,
    Inconclusive,
}

#[derive(Debug, Clone, Serialize)]
pub struct ThresholdReport {
    pub q: f64,
    pub threshold: f64,
    pub verdict: Verdict,
    pub anchor: &'static str,
}

/// Compares the dimension against q(n−2)/2; q = 2 selects the threshold n−2.
pub fn compactness_threshold(dims: &DimensionEstimate, n: usize, q: f64) -> Result<ThresholdReport> {
    if !(q >= 2.0) {
        return Err(invalid("q must be at least 2 (q = 2 selects the threshold n-2)"));
    }
    let threshold = if q == 2.0 {
        n as f64 - 2.0
    } else {
        q * (n as f64 - 2.0) / 2.0
    };
    let verdict = if dims.lower > threshold + THRESHOLD_MARGIN {
        Verdict::Compact
    } else if dims.upper < threshold - THRESHOLD_MARGIN {
        Verdict::NotCompact
    } else {
        Verdict::Inconclusive
    };
    Ok(ThresholdReport {
        q,
        threshold,
        verdict,
        anchor: if q == 2.0 { "thm:1.1" } else { "thm:3.12" },
    })
}

/// A point in the ambient space at the measure's mass-weighted mean; used by probes that
/// need a reference location.
pub fn barycenter(mu: &MeasureApprox) -> Point {
    let mut c = ORIGIN;
    for (p, w) in mu.positions().iter().zip(mu.weights()) {
        for k in 0..3 {
            c[k] += w * p[k];
        }
    }
    c
}

#[cfg(test)]
#[allow(clippy::excessive_precision)]
mod tests {
    use super::*;
    use crate::ifs::{ContractionMap, Similitude};
    use crate::measure::{discretize, DiscretizeOptions, Representative};

    fn cantor_mu(level: usize) -> MeasureApprox {
        discretize(
            &IFSystem::cantor(0.5).unwrap(),
            level,
            Representative::Centroid,
            DiscretizeOptions::default(),
        )
        .unwrap()
    }

    fn triadic() -> Ladder {
        Ladder::new(1.0 / 3.0, 1.0 / 3.0, 5).unwrap()
    }

    #[test]
    fn ladder_parsing() {
        let l = Ladder::parse("1/3:1/3:5").unwrap();
        assert_eq!(l.count, 5);
        assert!((l.radii()[4] - 3f64.powi(-5)).abs() < 1e-17);
        assert!(Ladder::parse("1:2:3").is_err());
        assert!(Ladder::parse("1:0.5").is_err());
    }

    #[test]
    fn cantor_profile_is_dyadic() {
        let p = ball_profile(&cantor_mu(8), &triadic(), CenterChoice::Atoms).unwrap();
        for (j, m) in p.sup_mass.iter().enumerate() {
            assert_eq!(*m, 0.5f64.powi(j as i32 + 1));
        }
    }

    #[test]
    fn cantor_dimension_exact() {
        let p = ball_profile(&cantor_mu(8), &triadic(), CenterChoice::Atoms).unwrap();
        let e = estimate_linf_dim(&p).unwrap();
        let d = 2f64.ln() / 3f64.ln();
        assert!((e.lower - d).abs() < 1e-10 && (e.upper - d).abs() < 1e-10);
        assert!(e.residual < 1e-10);
    }

    #[test]
    fn point_mass_is_degenerate() {
        let mu = MeasureApprox::point_mass(1, [0.5, 0.0, 0.0]);
        let p = ball_profile(&mu, &triadic(), CenterChoice::Atoms).unwrap();
        assert!(p.sup_mass.iter().all(|m| *m == 1.0));
        let e = estimate_linf_dim(&p).unwrap();
        assert!(e.degenerate);
        assert_eq!((e.lower, e.upper), (0.0, 0.0));
    }

    #[test]
    fn lebesgue_proxy_dimension_one() {
        let mu = MeasureApprox::lebesgue_grid(1, 4096).unwrap();
        let l = Ladder::new(0.25, 0.5, 6).unwrap();
        let p = ball_profile(&mu, &l, CenterChoice::Atoms).unwrap();
        for (r, m) in p.radii.iter().zip(&p.sup_mass) {
            assert!((m - 2.0 * r).abs() < 2.0 / 4096.0);
        }
        let e = estimate_linf_dim(&p).unwrap();
        assert!((e.slope - 1.0).abs() < 0.01);
    }

    #[test]
    fn too_short_ladder_rejected() {
        let p = synthetic_profile(&Ladder::new(0.5, 0.5, 3).unwrap(), 1.0, 1.0);
        assert!(estimate_linf_dim(&p).is_err());
    }

    #[test]
    fn bounds_examples() {
        let d = 2f64.ln() / 3f64.ln();
        let (lo, hi) = selfsimilar_dim_bounds(&IFSystem::cantor(0.5).unwrap());
        assert!((lo - d).abs() < 1e-15 && (hi - d).abs() < 1e-15);
        let (lo, hi) = selfsimilar_dim_bounds(&IFSystem::uniform_interval(5).unwrap());
        assert!((lo - 1.0).abs() < 1e-14 && (hi - 1.0).abs() < 1e-14);
        let (lo, hi) = selfsimilar_dim_bounds(&IFSystem::cantor(0.25).unwrap());
        assert!((lo - 0.26185950714291487420).abs() < 1e-14);
        assert!((hi - 1.26185950714291487420).abs() < 1e-14);
    }

    #[test]
    fn conditions_cantor() {
        let ifs = IFSystem::cantor(0.5).unwrap();
        let r1 = check_conditions(&ifs, 1, None).unwrap();
        assert!((r1.c2.abar - 1.0 / 6.0).abs() < 1e-15);
        assert!(r1.c2.holds && r1.c3.holds);
        let r3 = check_conditions(&ifs, 3, None).unwrap();
        assert!((r3.c2.abar - 1.5).abs() < 1e-14);
        assert!(!r3.c2.holds && !r3.c3.holds);
        let r2 = check_conditions(&ifs, 2, None).unwrap();
        assert!(r2.c3.holds);
        assert!(check_conditions(&ifs, 4, None).is_err());
    }

    #[test]
    fn conditions_with_profile_fit_regularity() {
        let ifs = IFSystem::cantor(0.5).unwrap();
        let p = ball_profile(&cantor_mu(8), &triadic(), CenterChoice::Atoms).unwrap();
        let r = check_conditions(&ifs, 2, Some(&p)).unwrap();
        assert!(r.c4.holds);
        assert!(r.c4.s_exponent <= r.estimate.as_ref().unwrap().lower + 0.05);
        assert!(r.warnings.is_empty(), "{:?}", r.warnings);
        let r3 = check_conditions(&ifs, 3, Some(&p)).unwrap();
        assert!(!r3.c4.holds);
    }

    #[test]
    fn threshold_examples() {
        let d = DimensionEstimate::exact(2f64.ln() / 3f64.ln());
        let t = compactness_threshold(&d, 3, 2.5).unwrap();
        assert!((t.threshold - 1.25).abs() < 1e-15);
        assert_eq!(t.verdict, Verdict::NotCompact);
        let t = compactness_threshold(&DimensionEstimate::exact(0.03), 2, 4.0).unwrap();
        assert_eq!(t.verdict, Verdict::Compact);
        assert_eq!(compactness_threshold(&d, 1, 3.0).unwrap().verdict, Verdict::Compact);
        assert_eq!(compactness_threshold(&d, 3, 2.0).unwrap().verdict, Verdict::NotCompact);
        assert_eq!(
            compactness_threshold(&DimensionEstimate::exact(1.0), 3, 2.0)
                .unwrap()
                .verdict,
            Verdict::Inconclusive
        );
        assert!(compactness_threshold(&d, 3, 1.5).is_err());
    }

    #[test]
    fn synthetic_regular_profile() {
        let p = synthetic_profile(&Ladder::new(0.1, 0.5, 10).unwrap(), 2.0, 1.3);
        let e = estimate_linf_dim(&p).unwrap();
        assert!((e.lower - 1.3).abs() < 1e-12 && (e.upper - 1.3).abs() < 1e-12);
        let f = regularity_fit(&p, 3).unwrap();
        assert!(f.holds);
        assert!(f.s_exponent <= 1.3 + 1e-9);
    }

    #[test]
    fn monte_carlo_centers_close() {
        let p = ball_profile(
            &cantor_mu(10),
            &triadic(),
            CenterChoice::MonteCarlo { count: 4000, seed: 7 },
        )
        .unwrap();
        let e = estimate_linf_dim(&p).unwrap();
        assert!((e.slope - 2f64.ln() / 3f64.ln()).abs() < 0.03);
    }

    #[test]
    fn conformal_bounds_use_both_derivative_bounds() {
        use crate::ifs::{Conformal1D, ConformalKind};
        // x/(x+3) on [0,1]: |S′| runs from 3/16 to 1/3
        let f = Conformal1D::new(
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
        let g = ContractionMap::Similitude(Similitude::line(0.25, 0.75).unwrap());
        let ifs = IFSystem::new(1, vec![ContractionMap::Conformal1D(f), g], vec![0.5, 0.5], None).unwrap();
        let (lo, hi) = selfsimilar_dim_bounds(&ifs);
        let fast = 0.5f64.ln() / (3.0f64 / 16.0).ln();
        let slow = 0.5f64.ln() / (1.0f64 / 3.0).ln();
        let g_rate = 0.5f64.ln() / 0.25f64.ln();
        assert!((lo - fast.min(g_rate)).abs() < 1e-6, "{lo}");
        assert!((hi - slow.max(g_rate)).abs() < 1e-6, "{hi}");
    }

    #[test]
    fn conformal_estimate_inside_bounds() {
        use crate::ifs::{Conformal1D, ConformalKind};
        let f = Conformal1D::new(
            ConformalKind::Mobius {
                a: 1.0,
                b: 0.0,
                c: 1.0,
                d: 2.0,
            },
            (0.0, 1.0),
            0.5,
        )
        .unwrap();
        let g = ContractionMap::Similitude(Similitude::line(0.4, 0.6).unwrap());
        let ifs = IFSystem::new(1, vec![ContractionMap::Conformal1D(f), g], vec![0.5, 0.5], None).unwrap();
        let (lo, hi) = selfsimilar_dim_bounds(&ifs);
        let mu = discretize(&ifs, 14, Representative::FixedPointOfWord, DiscretizeOptions::default()).unwrap();
        let p = ball_profile(&mu, &Ladder::new(0.25, 0.5, 10).unwrap(), CenterChoice::Atoms).unwrap();
        let e = estimate_linf_dim(&p).unwrap();
        assert!(
            e.slope >= lo - 0.05 && e.slope <= hi + 0.05,
            "{} not in [{lo}, {hi}]",
            e.slope
        );
    }
}
