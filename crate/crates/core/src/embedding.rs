//! Maz'ja-type compactness functionals, Poincaré probes and the combined embedding verdict.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::dimension::{
    compactness_threshold, linear_fit, sup_over, DimensionEstimate, Ladder, ThresholdReport, Verdict,
};
use crate::error::{invalid, Error, Result};
use crate::measure::{BallIndex, MeasureApprox};
use crate::operator::GalerkinSystem;
use crate::point::{self, Point};

/// Radii sampled inside each band of the δ ladder.
pub const SUB_LADDER: usize = 16;
/// Atom centers beyond this count are strided down to it.
pub const MAX_MAZJA_CENTERS: usize = 2048;
/// Cumulative change over the last three ladder values needed for a definite trend.
pub const TREND_FACTOR: f64 = 4.0;
/// Smallest tail radius used when the measure reports no resolution floor.
pub const TAIL_MIN_RADIUS: f64 = 1e-3;
pub const POINCARE_RESIDUAL: f64 = 0.1;

/// r^{1−n/2} m^{1/q} for n > 2, |ln r|^{1/2} m^{1/q} for n = 2.
pub fn mazja_functional(r: f64, mass: f64, n: usize, q: f64) -> f64 {
    if mass <= 0.0 {
        return 0.0;
    }
    let scale = if n == 2 {
        r.ln().abs().sqrt()
    } else {
        r.powf(1.0 - n as f64 / 2.0)
    };
    scale * mass.powf(1.0 / q)
}

fn check_nq(n: usize, q: f64) -> Result<()> {
    if n == 1 {
        return Err(Error::Unsupported(
            "Maz'ja functional for n = 1; the embedding holds by continuity".into(),
        ));
    }
    if n == 0 {
        return Err(invalid("n must be at least 1"));
    }
    if !(q > 2.0) || !q.is_finite() {
        return Err(invalid("q must be a finite number greater than 2"));
    }
    Ok(())
}

fn strided_centers(mu: &MeasureApprox, pred: impl Fn(&Point) -> bool) -> Vec<Point> {
    let all: Vec<Point> = mu.positions().iter().copied().filter(|p| pred(p)).collect();
    if all.len() <= MAX_MAZJA_CENTERS {
        return all;
    }
    (0..MAX_MAZJA_CENTERS)
        .map(|k| all[k * all.len() / MAX_MAZJA_CENTERS])
        .collect()
}

fn geometric(hi: f64, lo: f64, count: usize) -> Vec<f64> {
    if count == 1 || hi <= lo {
        return vec![hi];
    }
    let step = (lo / hi).ln() / (count - 1) as f64;
    (0..count).map(|j| hi * (step * j as f64).exp()).collect()
}

/// Definite trend of the last three ladder values: Compact when they fall by [`TREND_FACTOR`]
/// with a positive log-log slope, NotCompact when they grow by the same factor.
fn trend(deltas: &[f64], values: &[f64]) -> (Verdict, String) {
    let k = values.len();
    if k < 3 {
        return (
            Verdict::Inconclusive,
            format!("{k} ladder value(s); three needed for a trend"),
        );
    }
    let (v0, v2) = (values[k - 3], values[k - 1]);
    if v0 == 0.0 && v2 == 0.0 {
        return (Verdict::Compact, "functional vanishes on the last three scales".into());
    }
    let pos: Vec<usize> = (k - 3..k).filter(|&i| values[i] > 0.0).collect();
    let slope = if pos.len() >= 2 {
        let xs: Vec<f64> = pos.iter().map(|&i| deltas[i].ln()).collect();
        let ys: Vec<f64> = pos.iter().map(|&i| values[i].ln()).collect();
        linear_fit(&xs, &ys).1
    } else {
        f64::INFINITY
    };
    if v0 >= TREND_FACTOR * v2 && slope > 0.0 {
        (
            Verdict::Compact,
            format!("last three values fall by {:.3} (slope {slope:.4})", v0 / v2),
        )
    } else if v2 >= TREND_FACTOR * v0 {
        (Verdict::NotCompact, format!("last three values grow by {:.3}", v2 / v0))
    } else {
        (
            Verdict::Inconclusive,
            format!(
                "change {:.3} over the last three values is below {TREND_FACTOR}",
                v0.max(v2) / v0.min(v2)
            ),
        )
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MazjaReport {
    pub q: f64,
    pub n: usize,
    pub delta_ladder: Vec<f64>,
    /// sup over centers and r in the band below δ_k, down to the next ladder value.
    pub band_sup: Vec<f64>,
    /// sup over centers and all sampled r < δ_k (running sup of `band_sup`).
    pub small_scale_sup: Vec<f64>,
    pub resolution_floor: f64,
    pub center_count: usize,
    pub tail_ladder: Option<Vec<f64>>,
    pub tail_sup: Option<Vec<f64>>,
    pub verdict: Verdict,
    pub rationale: String,
}

/// Small-scale Maz'ja sups on a δ ladder. Radii below the measure's resolution floor are skipped.
pub fn mazja_small_scale(mu: &MeasureApprox, q: f64, n: usize, ladder: &Ladder) -> Result<MazjaReport> {
    check_nq(n, q)?;
    if mu.is_empty() {
        return Err(Error::EmptyMeasure);
    }
    let floor = mu.resolution_floor();
    let deltas = ladder.radii();
    if deltas[deltas.len() - 1] <= floor {
        return Err(invalid(format!(
            "smallest ladder radius must exceed the resolution floor {floor:e}"
        )));
    }
    let index = BallIndex::new(mu);
    let centers = strided_centers(mu, |_| true);
    let band_sup: Vec<f64> = deltas
        .iter()
        .enumerate()
        .map(|(k, &d)| {
            let next = deltas.get(k + 1).copied().unwrap_or(d * ladder.factor);
            let lo = next.max(floor);
            let mut rs = geometric(d, lo, SUB_LADDER);
            if lo == floor {
                rs.retain(|r| *r > floor);
            }
            rs.iter()
                .map(|&r| sup_over(&centers, |c| mazja_functional(r, index.mass(c, r), n, q)))
                .fold(0.0, f64::max)
        })
        .collect();
    let mut small_scale_sup = band_sup.clone();
    for k in (0..small_scale_sup.len().saturating_sub(1)).rev() {
        small_scale_sup[k] = small_scale_sup[k].max(small_scale_sup[k + 1]);
    }
    let (verdict, rationale) = trend(&deltas, &band_sup);
    Ok(MazjaReport {
        q,
        n,
        delta_ladder: deltas,
        band_sup,
        small_scale_sup,
        resolution_floor: floor,
        center_count: centers.len(),
        tail_ladder: None,
        tail_sup: None,
        verdict,
        rationale,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct TailReport {
    pub r_ladder: Vec<f64>,
    pub tail_sup: Vec<f64>,
    pub r_min: f64,
    /// The last value is zero or at most a quarter of the first.
    pub vanishes: bool,
}

/// sup over atoms with |x| > R and r ∈ (floor, 1) of the Maz'ja functional, for increasing R.
pub fn mazja_tail(mu: &MeasureApprox, q: f64, n: usize, r_ladder: &[f64]) -> Result<TailReport> {
    check_nq(n, q)?;
    if r_ladder.is_empty() || r_ladder.windows(2).any(|w| !(w[1] > w[0])) || r_ladder[0] < 0.0 {
        return Err(invalid("tail radii must be nonnegative and strictly increasing"));
    }
    let floor = mu.resolution_floor();
    let r_min = if floor > 0.0 { floor } else { TAIL_MIN_RADIUS };
    if r_min >= 1.0 {
        return Err(invalid("resolution floor must be below 1 for the tail functional"));
    }
    let index = BallIndex::new(mu);
    let mut rs = geometric(1.0, r_min, SUB_LADDER + 1);
    rs.retain(|r| *r < 1.0 && *r >= r_min);
    let tail_sup: Vec<f64> = r_ladder
        .iter()
        .map(|&big_r| {
            let centers = strided_centers(mu, |p| point::norm(p) > big_r);
            rs.iter()
                .map(|&r| sup_over(&centers, |c| mazja_functional(r, index.mass(c, r), n, q)))
                .fold(0.0, f64::max)
        })
        .collect();
    let (first, last) = (tail_sup[0], tail_sup[tail_sup.len() - 1]);
    Ok(TailReport {
        r_ladder: r_ladder.to_vec(),
        vanishes: last == 0.0 || last * TREND_FACTOR <= first,
        tail_sup,
        r_min,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TestFamily {
    TentOnGrowingSupport,
    PlateauWithRamps,
    UserMesh,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind")]
pub enum PoincareVerdict {
    BoundedConstant { c: f64 },
    Unbounded,
}

#[derive(Debug, Clone, Serialize)]
pub struct PoincareProbe {
    pub test_family: TestFamily,
    pub parameters: Vec<f64>,
    pub ratios: Vec<f64>,
    /// Closed-form lower bounds N·μ([−N,N])/2 (plateau family) or the upper bound 1/λ₁ (mesh).
    pub bounds: Vec<f64>,
    pub slope: Option<f64>,
    pub residual: Option<f64>,
    pub verdict: PoincareVerdict,
}

fn growth_verdict(params: &[f64], ratios: &[f64]) -> (Option<f64>, Option<f64>, PoincareVerdict) {
    let max = ratios.iter().copied().fold(0.0, f64::max);
    if params.len() < 2 || ratios.iter().any(|r| *r <= 0.0) {
        return (None, None, PoincareVerdict::BoundedConstant { c: max });
    }
    let xs: Vec<f64> = params.iter().map(|p| p.ln()).collect();
    let ys: Vec<f64> = ratios.iter().map(|r| r.ln()).collect();
    let (_, slope, res) = linear_fit(&xs, &ys);
    let verdict = if slope > 0.0 && res < POINCARE_RESIDUAL {
        PoincareVerdict::Unbounded
    } else {
        PoincareVerdict::BoundedConstant { c: max }
    };
    (Some(slope), Some(res), verdict)
}

/// Ratios ∫u²dμ / ∫|u′|²dx for a growing family on the whole line: tents max(0, 1−|x|/N)
/// or plateaus equal to 1 on [−N,N] with linear ramps of width N. Both have ∫|u′|² = 2/N.
pub fn poincare_probe_line(mu: &MeasureApprox, family: TestFamily, params: &[f64]) -> Result<PoincareProbe> {
    if mu.positions().iter().any(|p| p[1] != 0.0 || p[2] != 0.0) {
        return Err(invalid("Poincaré line probe needs a measure on the line"));
    }
    if params.is_empty() || params.iter().any(|p| !(*p > 0.0) || !p.is_finite()) {
        return Err(invalid("family parameters must be positive and finite"));
    }
    let mut ratios = Vec::with_capacity(params.len());
    let mut bounds = Vec::with_capacity(params.len());
    for &big_n in params {
        let (mut plateau, mut ramp) = (0.0, 0.0);
        for (p, &w) in mu.positions().iter().zip(mu.weights()) {
            let a = p[0].abs();
            match family {
                TestFamily::PlateauWithRamps => {
                    if a <= big_n {
                        plateau += w;
                    } else if a < 2.0 * big_n {
                        let u = 2.0 - a / big_n;
                        ramp += w * u * u;
                    }
                }
                TestFamily::TentOnGrowingSupport => {
                    if a < big_n {
                        let u = 1.0 - a / big_n;
                        ramp += w * u * u;
                    }
                }
                TestFamily::UserMesh => return Err(invalid("use poincare_probe_mesh for mesh families")),
            }
        }
        ratios.push((plateau + ramp) * big_n / 2.0);
        bounds.push(plateau * big_n / 2.0);
    }
    let (slope, residual, verdict) = growth_verdict(params, &ratios);
    Ok(PoincareProbe {
        test_family: family,
        parameters: params.to_vec(),
        ratios,
        bounds,
        slope,
        residual,
        verdict,
    })
}

/// Dirichlet Rayleigh quotients cᵀMc / cᵀKc on a Galerkin system: every hat carrying mass,
/// then `random` seeded random combinations. All are bounded by 1/λ₁.
pub fn poincare_probe_mesh(
    sys: &GalerkinSystem,
    lambda1: Option<f64>,
    random: usize,
    seed: u64,
) -> Result<PoincareProbe> {
    let n = sys.dof_count();
    if n == 0 {
        return Err(Error::EmptyMeasure);
    }
    let k = sys.stiffness();
    let mut diag_mass = vec![0.0; n];
    for col in sys.atoms() {
        for (i, v) in col.entries() {
            diag_mass[i] += col.weight * v * v;
        }
    }
    let mut params = Vec::new();
    let mut ratios = Vec::new();
    for i in 0..n {
        if diag_mass[i] > 0.0 {
            params.push(i as f64);
            ratios.push(diag_mass[i] / k.get(i, i));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut kc = vec![0.0; n];
    for j in 0..random {
        let c: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        k.matvec(&c, &mut kc);
        let energy: f64 = c.iter().zip(&kc).map(|(a, b)| a * b).sum();
        let mass = sys.mass_inner(&c, &c);
        if mass > 0.0 {
            params.push((n + j) as f64);
            ratios.push(mass / energy);
        }
    }
    let c = ratios.iter().copied().fold(0.0, f64::max);
    let bound = lambda1.map(|l| 1.0 / l);
    Ok(PoincareProbe {
        test_family: TestFamily::UserMesh,
        bounds: bound.map(|b| vec![b; ratios.len()]).unwrap_or_default(),
        parameters: params,
        ratios,
        slope: None,
        residual: None,
        verdict: PoincareVerdict::BoundedConstant { c },
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct EmbeddingVerdict {
    pub verdict: Verdict,
    pub rationale: Vec<String>,
    pub small_scale: Option<Verdict>,
    pub tail: Option<Verdict>,
    pub threshold: ThresholdReport,
    pub anchor: &'static str,
}

/// Combines the functional trends with the dimension threshold. Conflicting definite signals
/// give Inconclusive; a tail report only ever argues against compactness.
pub fn embedding_verdict(
    small_scale: Option<&MazjaReport>,
    tail: Option<&TailReport>,
    dims: &DimensionEstimate,
    n: usize,
    q: f64,
) -> Result<EmbeddingVerdict> {
    if let Some(m) = small_scale {
        if m.n != n || m.q != q {
            return Err(invalid("functional report was computed for a different (n, q)"));
        }
    }
    let threshold = compactness_threshold(dims, n, q)?;
    let mut rationale = vec![format!(
        "dimension [{:.4}, {:.4}] against threshold {:.4}: {:?}",
        dims.lower, dims.upper, threshold.threshold, threshold.verdict
    )];
    let maz = small_scale.map(|m| {
        rationale.push(format!("small-scale functional: {:?} ({})", m.verdict, m.rationale));
        m.verdict
    });
    let tail_signal = tail.map(|t| {
        // a vanishing tail is necessary for compactness, not sufficient
        let v = if t.vanishes {
            Verdict::Inconclusive
        } else {
            Verdict::NotCompact
        };
        rationale.push(format!("tail functional vanishes: {}", t.vanishes));
        v
    });
    let signals: Vec<Verdict> = [Some(threshold.verdict), maz, tail_signal]
        .into_iter()
        .flatten()
        .filter(|v| *v != Verdict::Inconclusive)
        .collect();
    let verdict = if signals.contains(&Verdict::NotCompact) && signals.contains(&Verdict::Compact) {
        rationale.push("signals conflict".into());
        Verdict::Inconclusive
    } else if signals.contains(&Verdict::NotCompact) {
        Verdict::NotCompact
    } else if signals.contains(&Verdict::Compact) {
        Verdict::Compact
    } else {
        Verdict::Inconclusive
    };
    Ok(EmbeddingVerdict {
        verdict,
        rationale,
        small_scale: maz,
        tail: tail_signal,
        anchor: threshold.anchor,
        threshold,
    })
}
