use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;
use statrs::function::beta::beta_reg;
use statrs::function::gamma::gamma;

use crate::error::{invalid, Result};
use crate::point::{self, Point, ORIGIN};

/// Cone annulus Ṽ_δ: points p with ρ < |p − z| < ρ + 2δ whose angle with the axis is
/// below half the opening angle β = 4δ/ρ.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConeAnnulus {
    dim: usize,
    vertex: Point,
    axis: Point,
    rho: f64,
    delta: f64,
    beta: f64,
}

impl ConeAnnulus {
    pub fn new(dim: usize, vertex: Point, axis: Point, rho: f64, delta: f64) -> Result<Self> {
        if !(2..=3).contains(&dim) {
            return Err(invalid("cone annuli live in ℝ² or ℝ³"));
        }
        if !(rho > 0.0) || !(delta > 0.0 && delta < std::f64::consts::FRAC_PI_4 * rho) {
            return Err(invalid("cone annulus needs ρ > 0 and 0 < δ < πρ/4"));
        }
        let len = point::norm(&axis);
        if !(len > 0.0) || axis[dim..].iter().any(|c| *c != 0.0) {
            return Err(invalid("cone axis must be a nonzero vector of the ambient space"));
        }
        Ok(ConeAnnulus {
            dim,
            vertex,
            axis: point::scale(&axis, 1.0 / len),
            rho,
            delta,
            beta: 4.0 * delta / rho,
        })
    }

    /// Same shell with the opening angle multiplied by `factor` (capped below 2π).
    pub fn widened(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.beta = (self.beta * factor).min(2.0 * std::f64::consts::PI * (1.0 - 1e-12));
        out
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn polar_angle(&self) -> f64 {
        0.5 * self.beta
    }

    /// Point on the axis at distance ρ + δ from the vertex.
    pub fn center(&self) -> Point {
        point::add(&self.vertex, &point::scale(&self.axis, self.rho + self.delta))
    }

    /// Solid angle of the cone, read-only.
    pub fn solid_angle(&self) -> f64 {
        solid_angle(self.dim, self.polar_angle())
    }

    pub fn contains(&self, p: &Point) -> bool {
        let v = point::sub(p, &self.vertex);
        let d = point::norm(&v);
        d > self.rho && d < self.rho + 2.0 * self.delta && point::angle_between(&v, &self.axis) < self.polar_angle()
    }

    // orthonormal frame with the axis first
    fn frame(&self) -> [Point; 3] {
        let l = self.axis;
        let pick = if l[0].abs() < 0.9 {
            [1.0, 0.0, 0.0]
        } else {
            [0.0, 1.0, 0.0]
        };
        let mut e1 = point::sub(&pick, &point::scale(&l, point::dot(&pick, &l)));
        if self.dim == 2 {
            e1 = [-l[1], l[0], 0.0];
        }
        let e1 = point::scale(&e1, 1.0 / point::norm(&e1));
        let e2 = point::cross(&l, &e1);
        [l, e1, e2]
    }

    /// A point of the shell sector, distributed uniformly in volume (may land on the open boundary).
    fn sample<R: Rng>(&self, rng: &mut R, frame: &[Point; 3]) -> Point {
        let n = self.dim as f64;
        let (a, b) = (self.rho.powf(n), (self.rho + 2.0 * self.delta).powf(n));
        let d = (a + rng.random::<f64>() * (b - a)).powf(1.0 / n);
        let theta = self.polar_angle();
        let dir = if self.dim == 2 {
            let phi = rng.random_range(-theta..theta);
            point::add(&point::scale(&frame[0], phi.cos()), &point::scale(&frame[1], phi.sin()))
        } else {
            // cos φ uniform on [cos θ, 1] gives the uniform measure on the cap
            let c = 1.0 - rng.random::<f64>() * (1.0 - theta.cos());
            let s = (1.0 - c * c).max(0.0).sqrt();
            let az = rng.random_range(0.0..2.0 * std::f64::consts::PI);
            let side = point::add(&point::scale(&frame[1], az.cos()), &point::scale(&frame[2], az.sin()));
            point::add(&point::scale(&frame[0], c), &point::scale(&side, s))
        };
        point::add(&self.vertex, &point::scale(&dir, d))
    }
}

/// Solid angle of a circular cone with polar angle θ in ℝⁿ, from the regularized
/// incomplete beta function (θ ≤ π/2) and its reflection beyond.
pub fn solid_angle(n: usize, theta: f64) -> f64 {
    let nf = n as f64;
    let full = 2.0 * std::f64::consts::PI.powf(nf / 2.0) / gamma(nf / 2.0);
    let half = std::f64::consts::FRAC_PI_2;
    let cap = |t: f64| {
        std::f64::consts::PI.powf(nf / 2.0) * beta_reg((nf - 1.0) / 2.0, 0.5, t.sin().powi(2)) / gamma(nf / 2.0)
    };
    if theta <= half {
        cap(theta)
    } else if theta < std::f64::consts::PI {
        full - cap(std::f64::consts::PI - theta)
    } else {
        full
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct InclusionReport {
    pub samples: usize,
    /// Samples of the open ball B(x, δ) outside Ṽ_δ.
    pub inner_violations: usize,
    /// Samples of Ṽ_δ outside B(x, 10δ).
    pub outer_violations: usize,
    pub max_outer_distance: f64,
}

/// Monte-Carlo check of B(x,δ) ⊆ Ṽ_δ ⊆ B(x,10δ).
pub fn inclusion_probe(v: &ConeAnnulus, samples: usize, seed: u64) -> InclusionReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = v.center();
    let delta = v.delta();
    let mut inner = 0;
    for _ in 0..samples {
        let mut g = ORIGIN;
        let mut norm2 = 0.0;
        for c in g.iter_mut().take(v.dim) {
            *c = StandardNormal.sample(&mut rng);
            norm2 += *c * *c;
        }
        if norm2 == 0.0 {
            continue;
        }
        let rad = delta * rng.random::<f64>().powf(1.0 / v.dim as f64);
        let p = point::add(&x, &point::scale(&g, rad / norm2.sqrt()));
        if point::dist(&p, &x) < delta && !v.contains(&p) {
            inner += 1;
        }
    }
    let frame = v.frame();
    let mut outer = 0;
    let mut max_d: f64 = 0.0;
    let mut accepted = 0;
    while accepted < samples {
        let p = v.sample(&mut rng, &frame);
        if !v.contains(&p) {
            continue;
        }
        accepted += 1;
        let d = point::dist(&p, &x);
        max_d = max_d.max(d);
        if d >= 10.0 * delta {
            outer += 1;
        }
    }
    InclusionReport {
        samples,
        inner_violations: inner,
        outer_violations: outer,
        max_outer_distance: max_d,
    }
}
