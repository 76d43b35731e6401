//! Constant-curvature model spaces: law-of-cosines hinges, the scalar brackets used
//! for cone annuli, cone annuli themselves and normal-coordinate charts.

mod chart;
mod cone;

pub use chart::{
    arc_measure_on_great_circle, chart_pushforward, geodesic_distance, hyperboloid_point, model_exp, model_log,
    ChartMap, Pushforward,
};
pub use cone::{inclusion_probe, solid_angle, ConeAnnulus, InclusionReport};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpace {
    /// Curvature −1/R².
    Hyperbolic {
        r: f64,
    },
    Flat,
    /// Curvature +1/R².
    Spherical {
        r: f64,
    },
}

impl ModelSpace {
    pub fn hyperbolic(r: f64) -> Result<Self> {
        check_radius(r)?;
        Ok(ModelSpace::Hyperbolic { r })
    }

    pub fn spherical(r: f64) -> Result<Self> {
        check_radius(r)?;
        Ok(ModelSpace::Spherical { r })
    }

    pub fn curvature(&self) -> f64 {
        match *self {
            ModelSpace::Hyperbolic { r } => -1.0 / (r * r),
            ModelSpace::Flat => 0.0,
            ModelSpace::Spherical { r } => 1.0 / (r * r),
        }
    }

    /// Injectivity radius of the model surface.
    pub fn injectivity_radius(&self) -> f64 {
        match *self {
            ModelSpace::Spherical { r } => std::f64::consts::PI * r,
            _ => f64::INFINITY,
        }
    }
}

fn check_radius(r: f64) -> Result<()> {
    if r > 0.0 && r.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("model radius must be positive (got {r})")))
    }
}

/// Third side of the hinge (a, b, α) in the model space.
///
/// Uses the half-angle forms of the laws of cosines, e.g. in the hyperbolic case
/// sinh²(c/2R) = sinh²((a−b)/2R) + sinh(a/R)·sinh(b/R)·sin²(α/2), which stay accurate
/// for short sides and small angles.
pub fn hinge_third_side(space: ModelSpace, a: f64, b: f64, alpha: f64) -> Result<f64> {
    if !(a >= 0.0 && b >= 0.0) || !a.is_finite() || !b.is_finite() {
        return Err(invalid("hinge sides must be finite and nonnegative"));
    }
    if !(0.0..=std::f64::consts::PI).contains(&alpha) {
        return Err(invalid(format!("hinge angle {alpha} outside [0, π]")));
    }
    if let ModelSpace::Hyperbolic { r } | ModelSpace::Spherical { r } = space {
        check_radius(r)?;
    }
    if let ModelSpace::Spherical { r } = space {
        if a + b >= std::f64::consts::PI * r {
            return Err(Error::Domain(format!(
                "spherical hinge needs a + b < πR (a + b = {}, πR = {})",
                a + b,
                std::f64::consts::PI * r
            )));
        }
    }
    // collinear hinges have the same third side in every model space
    if alpha == 0.0 {
        return Ok((a - b).abs());
    }
    if alpha == std::f64::consts::PI {
        return Ok(a + b);
    }
    let s2 = (0.5 * alpha).sin().powi(2);
    Ok(match space {
        ModelSpace::Flat => ((a - b) * (a - b) + 4.0 * a * b * s2).sqrt(),
        ModelSpace::Hyperbolic { r } => {
            let d = ((a - b) / (2.0 * r)).sinh();
            let t = d * d + (a / r).sinh() * (b / r).sinh() * s2;
            2.0 * r * t.sqrt().asinh()
        }
        ModelSpace::Spherical { r } => {
            let d = ((a - b) / (2.0 * r)).sin();
            let t = d * d + (a / r).sin() * (b / r).sin() * s2;
            2.0 * r * t.sqrt().min(1.0).asin()
        }
    })
}

/// Which scalar bracket function: hyperbolic, spherical or flat.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    A,
    B,
    C,
}

impl std::str::FromStr for Branch {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "a" | "A" => Ok(Branch::A),
            "b" | "B" => Ok(Branch::B),
            "c" | "C" => Ok(Branch::C),
            _ => Err(invalid(format!("unknown branch `{s}` (expected a, b or c)"))),
        }
    }
}

/// Length of the chord between the two points at distance ρ+λ from the vertex on
/// rays 4δ/ρ apart, in the branch's model space; branches a and b carry the factor R.
pub fn lemma34_value(branch: Branch, rho: f64, r: f64, delta: f64, lambda: f64) -> Result<f64> {
    if !(rho > 0.0) {
        return Err(invalid("ρ must be positive"));
    }
    let dmax = rho * std::f64::consts::FRAC_PI_4;
    if !(delta >= 0.0 && delta <= dmax * (1.0 + 1e-12)) {
        return Err(Error::Domain(format!("δ = {delta} outside [0, ρπ/4]")));
    }
    if !(lambda >= 0.0 && lambda <= 2.0 * delta * (1.0 + 1e-12)) {
        return Err(Error::Domain(format!("λ = {lambda} outside [0, 2δ]")));
    }
    let half = (2.0 * delta / rho).min(std::f64::consts::FRAC_PI_2).sin();
    let side = rho + lambda;
    match branch {
        Branch::C => Ok(2.0 * side * half),
        Branch::A => {
            check_radius(r)?;
            Ok(2.0 * r * ((side / r).sinh() * half).asinh())
        }
        Branch::B => {
            check_radius(r)?;
            if side > std::f64::consts::PI * r * (1.0 + 1e-12) {
                return Err(Error::Domain(format!("λ = {lambda} exceeds πR − ρ")));
            }
            Ok(2.0 * r * ((side / r).sin().abs() * half).min(1.0).asin())
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BracketSweep {
    pub c_min: f64,
    pub c_max: f64,
    pub points: usize,
}

/// min and max of value/δ over δ ∈ (0, ρπ/4] × λ ∈ [0, 2δ] (λ also capped by πR − ρ for branch b).
pub fn lemma34_bracket_sweep(
    branch: Branch,
    rho: f64,
    r: f64,
    n_delta: usize,
    n_lambda: usize,
) -> Result<BracketSweep> {
    if n_delta == 0 || n_lambda < 2 {
        return Err(invalid("sweep grid needs at least 1 δ and 2 λ points"));
    }
    let dmax = rho * std::f64::consts::FRAC_PI_4;
    let mut c_min = f64::INFINITY;
    let mut c_max: f64 = 0.0;
    let mut points = 0;
    for i in 1..=n_delta {
        let delta = dmax * i as f64 / n_delta as f64;
        let mut lmax = 2.0 * delta;
        if branch == Branch::B {
            lmax = lmax.min(std::f64::consts::PI * r - rho);
            if lmax < 0.0 {
                return Err(Error::Domain("branch b needs ρ ≤ πR".into()));
            }
        }
        for j in 0..n_lambda {
            let lambda = lmax * j as f64 / (n_lambda - 1) as f64;
            let v = lemma34_value(branch, rho, r, delta, lambda)? / delta;
            c_min = c_min.min(v);
            c_max = c_max.max(v);
            points += 1;
        }
    }
    Ok(BracketSweep { c_min, c_max, points })
}

#[cfg(test)]
#[allow(clippy::excessive_precision)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn hinge_examples() {
        assert!((hinge_third_side(ModelSpace::Flat, 3.0, 4.0, PI / 2.0).unwrap() - 5.0).abs() < 1e-14);
        for s in [
            ModelSpace::Flat,
            ModelSpace::Hyperbolic { r: 2.0 },
            ModelSpace::Spherical { r: 2.0 },
        ] {
            assert_eq!(hinge_third_side(s, 1.3, 1.3, 0.0).unwrap(), 0.0);
        }
        let h = hinge_third_side(ModelSpace::Hyperbolic { r: 1.0 }, 1.0, 1.0, PI / 2.0).unwrap();
        assert!((h - 1.5133740065965039598).abs() < 1e-14);
        let s = hinge_third_side(ModelSpace::Spherical { r: 1.0 }, 1.0, 1.0, PI / 2.0).unwrap();
        assert!((s - 1.2745557823062943447).abs() < 1e-14);
    }

    #[test]
    fn hinge_matches_law_of_cosines_away_from_cancellation() {
        let (a, b, al): (f64, f64, f64) = (0.7, 1.9, 2.1);
        let h = (a.cosh() * b.cosh() - a.sinh() * b.sinh() * al.cos()).acosh();
        assert!((hinge_third_side(ModelSpace::Hyperbolic { r: 1.0 }, a, b, al).unwrap() - h).abs() < 1e-13);
        let s = (a.cos() * b.cos() + a.sin() * b.sin() * al.cos()).acos();
        assert!((hinge_third_side(ModelSpace::Spherical { r: 1.0 }, a, b, al).unwrap() - s).abs() < 1e-13);
    }

    #[test]
    fn spherical_domain_error() {
        let e = hinge_third_side(ModelSpace::Spherical { r: 1.0 }, 2.0, 1.5, 1.0);
        assert!(matches!(e, Err(Error::Domain(_))));
        assert!(hinge_third_side(ModelSpace::Flat, 1.0, 1.0, 4.0).is_err());
    }

    #[test]
    fn lemma_examples() {
        let c = lemma34_value(Branch::C, 1.0, 1.0, PI / 8.0, 0.0).unwrap();
        assert!((c - std::f64::consts::SQRT_2).abs() < 1e-15);
        assert!((2.0 * PI / 8.0..=8.0 * PI / 8.0).contains(&c));
        for b in [Branch::A, Branch::B, Branch::C] {
            assert_eq!(lemma34_value(b, 1.0, 1.0, 0.0, 0.0).unwrap(), 0.0);
        }
        let a = lemma34_value(Branch::A, 1.0, 1.0, 0.1, 0.05).unwrap();
        assert!((a - 0.49319204860225989795).abs() < 1e-14);
        assert!(lemma34_value(Branch::C, 1.0, 1.0, 1.0, 0.0).is_err());
        assert!(lemma34_value(Branch::C, 1.0, 1.0, 0.1, 0.3).is_err());
    }

    #[test]
    fn lemma_value_is_a_hinge() {
        let (rho, r, d, l) = (0.8, 1.7, 0.3, 0.4);
        let a = lemma34_value(Branch::A, rho, r, d, l).unwrap();
        let h = hinge_third_side(ModelSpace::Hyperbolic { r }, rho + l, rho + l, 4.0 * d / rho).unwrap();
        assert!((a - h).abs() < 1e-13);
        let b = lemma34_value(Branch::B, rho, r, d, l).unwrap();
        let s = hinge_third_side(ModelSpace::Spherical { r }, rho + l, rho + l, 4.0 * d / rho).unwrap();
        assert!((b - s).abs() < 1e-13);
    }

    #[test]
    fn sweeps() {
        let c = lemma34_bracket_sweep(Branch::C, 1.0, 1.0, 50, 50).unwrap();
        assert!(c.c_min >= 2.0 && c.c_max <= 8.0);
        let a = lemma34_bracket_sweep(Branch::A, 1.0, 10.0, 50, 50).unwrap();
        assert!((a.c_min / c.c_min - 1.0).abs() < 0.05 && (a.c_max / c.c_max - 1.0).abs() < 0.05);
        let b = lemma34_bracket_sweep(Branch::B, 0.5, 2.0, 50, 50).unwrap();
        assert!(b.c_min > 0.0 && b.c_min <= b.c_max && b.c_max.is_finite());
    }

    #[test]
    fn curvature_ordering_and_flat_limit() {
        let (a, b, al) = (0.4, 0.9, 1.2);
        let r = 3.0;
        let s = hinge_third_side(ModelSpace::Spherical { r }, a, b, al).unwrap();
        let f = hinge_third_side(ModelSpace::Flat, a, b, al).unwrap();
        let h = hinge_third_side(ModelSpace::Hyperbolic { r }, a, b, al).unwrap();
        assert!(s <= f && f <= h);
        let big = 1e4 * b;
        let hs = hinge_third_side(ModelSpace::Hyperbolic { r: big }, a, b, al).unwrap();
        let ss = hinge_third_side(ModelSpace::Spherical { r: big }, a, b, al).unwrap();
        assert!(((hs - f) / f).abs() < 1e-6 && ((ss - f) / f).abs() < 1e-6);
        assert!(ModelSpace::spherical(0.0).is_err());
        assert_eq!(ModelSpace::Spherical { r: 2.0 }.curvature(), 0.25);
    }
}
