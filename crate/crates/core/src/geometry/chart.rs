use serde::Serialize;

use super::ModelSpace;
use crate::error::{invalid, Error, Result};
use crate::measure::MeasureApprox;
use crate::point::{self, Point};

// Model surfaces: the sphere S²_R ⊂ ℝ³, the hyperboloid sheet {⟨x,x⟩_L = −R², x₀ > 0}
// with ⟨x,y⟩_L = −x₀y₀ + x₁y₁ + x₂y₂, and flat ℝ² itself.

fn lorentz(a: &Point, b: &Point) -> f64 {
    -a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// The hyperboloid point above (x₁, x₂).
pub fn hyperboloid_point(r: f64, x1: f64, x2: f64) -> Point {
    [(r * r + x1 * x1 + x2 * x2).sqrt(), x1, x2]
}

fn on_surface(space: ModelSpace, p: &Point) -> bool {
    match space {
        ModelSpace::Flat => p[2] == 0.0,
        ModelSpace::Spherical { r } => (point::norm(p) - r).abs() <= 1e-10 * r,
        ModelSpace::Hyperbolic { r } => p[0] > 0.0 && (lorentz(p, p) + r * r).abs() <= 1e-10 * (r * r + p[0] * p[0]),
    }
}

/// Geodesic distance on the model surface.
pub fn geodesic_distance(space: ModelSpace, p: &Point, q: &Point) -> f64 {
    match space {
        ModelSpace::Flat => point::dist(p, q),
        ModelSpace::Spherical { r } => r * point::angle_between(p, q),
        ModelSpace::Hyperbolic { r } => {
            let d = point::sub(q, p);
            let l = lorentz(&d, &d).max(0.0).sqrt();
            2.0 * r * (l / (2.0 * r)).asinh()
        }
    }
}

/// Normal-coordinate chart φ = S ∘ E ∘ exp_p⁻¹ : B(p, ε) → B(z, ε) on a model surface.
#[derive(Debug, Clone, Serialize)]
pub struct ChartMap {
    pub model: ModelSpace,
    pub base: Point,
    /// Orthonormal tangent frame at the base point, in ambient coordinates.
    pub frame: [Point; 2],
    /// Center of the target disk in ℝ².
    pub target: [f64; 2],
    pub radius: f64,
}

impl ChartMap {
    /// Builds a chart with a frame obtained by projecting the ambient coordinate axes.
    pub fn new(model: ModelSpace, base: Point, radius: f64, target: [f64; 2]) -> Result<Self> {
        if !on_surface(model, &base) {
            return Err(Error::Domain("chart base point is not on the model surface".into()));
        }
        if !(radius > 0.0) || radius >= model.injectivity_radius() {
            return Err(Error::Domain(format!(
                "chart radius {radius} must lie in (0, {})",
                model.injectivity_radius()
            )));
        }
        let frame = match model {
            ModelSpace::Flat => [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
            ModelSpace::Spherical { r } => {
                let n = point::scale(&base, 1.0 / r);
                let mut out = Vec::new();
                for e in [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]] {
                    let mut v = point::sub(&e, &point::scale(&n, point::dot(&e, &n)));
                    for u in &out {
                        v = point::sub(&v, &point::scale(u, point::dot(&v, u)));
                    }
                    let l = point::norm(&v);
                    if l > 1e-6 && out.len() < 2 {
                        out.push(point::scale(&v, 1.0 / l));
                    }
                }
                [out[0], out[1]]
            }
            ModelSpace::Hyperbolic { r } => {
                let mut out: Vec<Point> = Vec::new();
                for e in [[0.0, 1.0, 0.0], [0.0, 0.0, 1.0]] {
                    // Lorentz projection onto the tangent plane, then Gram-Schmidt
                    let mut v = point::add(&e, &point::scale(&base, lorentz(&e, &base) / (r * r)));
                    for u in &out {
                        v = point::sub(&v, &point::scale(u, lorentz(&v, u)));
                    }
                    let l = lorentz(&v, &v).sqrt();
                    out.push(point::scale(&v, 1.0 / l));
                }
                [out[0], out[1]]
            }
        };
        Ok(ChartMap {
            model,
            base,
            frame,
            target,
            radius,
        })
    }

    /// φ(q) ∈ ℝ² (as a zero-padded point).
    pub fn apply(&self, q: &Point) -> Result<Point> {
        let v = model_log(self, q)?;
        Ok([self.target[0] + v[0], self.target[1] + v[1], 0.0])
    }

    pub fn covers(&self, q: &Point) -> bool {
        geodesic_distance(self.model, &self.base, q) < self.radius
    }
}

/// exp_p of a tangent vector given in frame coordinates.
pub fn model_exp(chart: &ChartMap, v: [f64; 2]) -> Result<Point> {
    let t = v[0].hypot(v[1]);
    if t >= chart.model.injectivity_radius() {
        return Err(Error::Domain(format!(
            "tangent vector of length {t} beyond the injectivity radius"
        )));
    }
    let p = chart.base;
    if t == 0.0 {
        return Ok(p);
    }
    let dir = point::add(
        &point::scale(&chart.frame[0], v[0] / t),
        &point::scale(&chart.frame[1], v[1] / t),
    );
    Ok(match chart.model {
        ModelSpace::Flat => point::add(&p, &point::scale(&dir, t)),
        ModelSpace::Spherical { r } => {
            point::add(&point::scale(&p, (t / r).cos()), &point::scale(&dir, r * (t / r).sin()))
        }
        ModelSpace::Hyperbolic { r } => point::add(
            &point::scale(&p, (t / r).cosh()),
            &point::scale(&dir, r * (t / r).sinh()),
        ),
    })
}

/// exp_p⁻¹(q) in frame coordinates.
pub fn model_log(chart: &ChartMap, q: &Point) -> Result<[f64; 2]> {
    if !on_surface(chart.model, q) {
        return Err(Error::Domain("point is not on the model surface".into()));
    }
    let p = chart.base;
    let d = geodesic_distance(chart.model, &p, q);
    if d >= chart.model.injectivity_radius() * (1.0 - 1e-12) {
        return Err(Error::Domain("point at the cut locus of the base point".into()));
    }
    if d == 0.0 {
        return Ok([0.0, 0.0]);
    }
    let (c0, c1) = match chart.model {
        ModelSpace::Flat => {
            let u = point::sub(q, &p);
            (point::dot(&u, &chart.frame[0]), point::dot(&u, &chart.frame[1]))
        }
        ModelSpace::Spherical { r } => {
            let u = point::sub(q, &point::scale(&p, point::dot(q, &p) / (r * r)));
            (point::dot(&u, &chart.frame[0]), point::dot(&u, &chart.frame[1]))
        }
        ModelSpace::Hyperbolic { r } => {
            let u = point::add(q, &point::scale(&p, lorentz(&p, q) / (r * r)));
            (lorentz(&u, &chart.frame[0]), lorentz(&u, &chart.frame[1]))
        }
    };
    let l = c0.hypot(c1);
    if l == 0.0 {
        return Ok([0.0, 0.0]);
    }
    Ok([d * c0 / l, d * c1 / l])
}

#[derive(Debug, Clone)]
pub struct Pushforward {
    pub measure: MeasureApprox,
    /// Index of the chart each atom was mapped through.
    pub assignment: Vec<usize>,
    pub chart_mass: Vec<f64>,
}

/// μ̃ = Σᵢ μ∘φᵢ⁻¹: every atom is mapped through the first chart (in order) whose
/// ball contains it.
pub fn chart_pushforward(
    positions: &[Point],
    weights: &[f64],
    charts: &[ChartMap],
    resolution: f64,
) -> Result<Pushforward> {
    if positions.len() != weights.len() {
        return Err(invalid("one weight per atom is required"));
    }
    if charts.is_empty() {
        return Err(invalid("at least one chart is required"));
    }
    for i in 0..charts.len() {
        for j in i + 1..charts.len() {
            let (a, b) = (&charts[i], &charts[j]);
            let gap = (a.target[0] - b.target[0]).hypot(a.target[1] - b.target[1]);
            if gap < a.radius + b.radius {
                return Err(invalid(format!("chart target disks {i} and {j} overlap")));
            }
        }
    }
    let mut out = Vec::with_capacity(positions.len());
    let mut assignment = Vec::with_capacity(positions.len());
    let mut chart_mass = vec![0.0; charts.len()];
    for (k, (q, w)) in positions.iter().zip(weights).enumerate() {
        let idx = charts
            .iter()
            .position(|c| c.covers(q))
            .ok_or(Error::Coverage { index: k })?;
        out.push(charts[idx].apply(q)?);
        assignment.push(idx);
        chart_mass[idx] += w;
    }
    let measure = MeasureApprox::from_atoms(2, out, weights.to_vec(), resolution)?;
    Ok(Pushforward {
        measure,
        assignment,
        chart_mass,
    })
}

/// Places a measure on [0,1] along the equator of S²_R, arc length `scale`·x, starting at (R,0,0).
pub fn arc_measure_on_great_circle(mu: &MeasureApprox, r: f64, scale: f64) -> Result<Vec<Point>> {
    if mu.dim() != 1 {
        return Err(invalid("great-circle placement needs a measure on the line"));
    }
    if !(scale > 0.0 && scale < std::f64::consts::PI * r) {
        return Err(Error::Domain("arc length must be below πR".into()));
    }
    Ok(mu
        .positions()
        .iter()
        .map(|p| {
            let a = scale * p[0] / r;
            [r * a.cos(), r * a.sin(), 0.0]
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    #[test]
    fn exp_of_zero_is_base() {
        let c = ChartMap::new(ModelSpace::Spherical { r: 2.0 }, [0.0, 0.0, 2.0], 1.0, [0.0, 0.0]).unwrap();
        assert_eq!(model_exp(&c, [0.0, 0.0]).unwrap(), c.base);
        assert_eq!(c.apply(&c.base).unwrap(), [0.0, 0.0, 0.0]);
    }

    #[test]
    fn sphere_quarter_turn() {
        let c = ChartMap::new(ModelSpace::Spherical { r: 1.0 }, [0.0, 0.0, 1.0], 3.0, [0.0, 0.0]).unwrap();
        let q = model_exp(&c, [PI / 2.0, 0.0]).unwrap();
        assert!(q[2].abs() < 1e-15);
        assert!((point::norm(&q) - 1.0).abs() < 1e-15);
        assert!((point::dot(&q, &c.frame[0]) - 1.0).abs() < 1e-15);
        let v = model_log(&c, &q).unwrap();
        assert!((v[0] - PI / 2.0).abs() < 1e-10 && v[1].abs() < 1e-10);
    }

    #[test]
    fn hyperbolic_round_trip() {
        let r = 1.0;
        let c = ChartMap::new(
            ModelSpace::Hyperbolic { r },
            hyperboloid_point(r, 0.3, -0.2),
            10.0,
            [0.0, 0.0],
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut worst: f64 = 0.0;
        for _ in 0..1000 {
            let t = 3.0 * rng.random::<f64>();
            let a = rng.random_range(0.0..2.0 * PI);
            let v = [t * a.cos(), t * a.sin()];
            let q = model_exp(&c, v).unwrap();
            assert!((lorentz(&q, &q) + r * r).abs() < 1e-9 * q[0] * q[0]);
            let w = model_log(&c, &q).unwrap();
            worst = worst.max((w[0] - v[0]).hypot(w[1] - v[1]));
            assert!((geodesic_distance(c.model, &c.base, &q) - t).abs() < 1e-9);
        }
        assert!(worst < 1e-9, "{worst}");
    }

    #[test]
    fn sphere_round_trip_random() {
        let c = ChartMap::new(ModelSpace::Spherical { r: 1.5 }, [1.5, 0.0, 0.0], 4.0, [0.0, 0.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..1000 {
            let t = 4.0 * rng.random::<f64>();
            let a = rng.random_range(0.0..2.0 * PI);
            let v = [t * a.cos(), t * a.sin()];
            let w = model_log(&c, &model_exp(&c, v).unwrap()).unwrap();
            assert!((w[0] - v[0]).hypot(w[1] - v[1]) < 1e-10);
        }
    }

    #[test]
    fn domain_errors() {
        let s = ModelSpace::Spherical { r: 1.0 };
        assert!(ChartMap::new(s, [0.0, 0.0, 1.0], PI, [0.0, 0.0]).is_err());
        assert!(ChartMap::new(s, [0.0, 0.0, 2.0], 1.0, [0.0, 0.0]).is_err());
        let c = ChartMap::new(s, [0.0, 0.0, 1.0], 1.0, [0.0, 0.0]).unwrap();
        assert!(model_exp(&c, [PI, 0.0]).is_err());
        assert!(model_log(&c, &[0.0, 0.0, -1.0]).is_err());
    }

    #[test]
    fn two_charts_split_mass() {
        let s = ModelSpace::Spherical { r: 1.0 };
        let north = [0.0, 0.0, 1.0];
        let south = [0.0, 0.0, -1.0];
        let tilt = |p: Point, dx: f64| {
            let q = [p[0] + dx, p[1], p[2]];
            point::scale(&q, 1.0 / point::norm(&q))
        };
        let atoms = vec![tilt(north, 0.1), tilt(north, -0.05), tilt(south, 0.02), north];
        let weights = vec![0.25, 0.25, 0.3, 0.2];
        let charts = vec![
            ChartMap::new(s, north, 0.5, [0.0, 0.0]).unwrap(),
            ChartMap::new(s, south, 0.5, [5.0, 0.0]).unwrap(),
        ];
        let pf = chart_pushforward(&atoms, &weights, &charts, 0.0).unwrap();
        assert_eq!(pf.assignment, vec![0, 0, 1, 0]);
        assert!((pf.chart_mass[0] - 0.7).abs() < 1e-15 && (pf.chart_mass[1] - 0.3).abs() < 1e-15);
        assert_eq!(pf.measure.total_mass(), weights.iter().sum::<f64>());
        assert_eq!(pf.measure.positions()[3], [0.0, 0.0, 0.0]);
        let far = vec![[1.0, 0.0, 0.0]];
        assert!(matches!(
            chart_pushforward(&far, &[1.0], &charts, 0.0),
            Err(Error::Coverage { index: 0 })
        ));
        let overlapping = vec![charts[0].clone(), ChartMap::new(s, south, 0.5, [0.5, 0.0]).unwrap()];
        assert!(chart_pushforward(&atoms, &weights, &overlapping, 0.0).is_err());
    }

    #[test]
    fn chart_is_isometric_along_radial_geodesics() {
        let c = ChartMap::new(
            ModelSpace::Hyperbolic { r: 2.0 },
            hyperboloid_point(2.0, 0.0, 0.0),
            5.0,
            [1.0, 1.0],
        )
        .unwrap();
        let q = model_exp(&c, [0.6, 0.8]).unwrap();
        let img = c.apply(&q).unwrap();
        assert!((point::dist(&img, &[1.0, 1.0, 0.0]) - 1.0).abs() < 1e-12);
    }
}
