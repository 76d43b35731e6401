//! Browser bindings: each export takes plain numbers and returns a JSON string.

use serde_json::json;
use wasm_bindgen::prelude::*;

use krein_feller::dimension::{ball_profile, estimate_linf_dim, CenterChoice, Ladder};
use krein_feller::geometry::{hinge_third_side, ModelSpace};
use krein_feller::operator::{solve_spectrum, string_system, weyl_counting, MeshSize, SolveOptions};
use krein_feller::{discretize, DiscretizeOptions, IFSystem, MeasureApprox, Representative};

/// Demo sizes stay small enough for an interactive page.
const MAX_LEVEL: usize = 10;
const MAX_K: usize = 200;
const TRACES: usize = 3;

fn cantor(p1: f64, level: usize) -> Result<MeasureApprox, String> {
    if level > MAX_LEVEL {
        return Err(format!("level is capped at {MAX_LEVEL} in the demo"));
    }
    let ifs = IFSystem::cantor(p1).map_err(|e| e.to_string())?;
    discretize(
        &ifs,
        level,
        Representative::FixedPointOfWord,
        DiscretizeOptions::default(),
    )
    .map_err(|e| e.to_string())
}

/// First `k` Dirichlet eigenvalues of the Cantor string with left weight `p1`, the counting
/// exponent and node traces of the first eigenfunctions.
pub fn cantor_spectrum_json(p1: f64, level: usize, k: usize) -> Result<String, String> {
    if k == 0 || k > MAX_K {
        return Err(format!("k must lie in 1..={MAX_K}"));
    }
    let mu = cantor(p1, level)?;
    let sys = string_system(&mu, MeshSize::Triadic { level: 2 }, true).map_err(|e| e.to_string())?;
    let spec = solve_spectrum(&sys, k, SolveOptions::default()).map_err(|e| e.to_string())?;
    let weyl = weyl_counting(&spec.eigenvalues);
    let mesh = sys.mesh();
    let xs: Vec<f64> = (0..mesh.node_count()).map(|i| mesh.node(i)[0]).collect();
    let traces: Vec<Vec<f64>> = spec.vectors.iter().take(TRACES).map(|c| sys.node_values(c)).collect();
    Ok(json!({
        "eigenvalues": spec.eigenvalues,
        "rank": spec.rank,
        "rank_note": spec.rank_note,
        "weyl_exponent": weyl.exponent,
        "weyl_note": weyl.note,
        "x": xs,
        "traces": traces,
    })
    .to_string())
}

/// sup ball masses of the Cantor measure on the ladder rMax·factor^k and the dimension estimate.
pub fn cantor_profile_json(p1: f64, level: usize, r_max: f64, factor: f64, count: usize) -> Result<String, String> {
    let mu = cantor(p1, level)?;
    let ladder = Ladder::new(r_max, factor, count).map_err(|e| e.to_string())?;
    let profile = ball_profile(&mu, &ladder, CenterChoice::Atoms).map_err(|e| e.to_string())?;
    let est = estimate_linf_dim(&profile).map_err(|e| e.to_string())?;
    // the heaviest cylinder decides: max pᵢ^m = (3^{-m})^d
    let exact = p1.max(1.0 - p1).ln() / (1.0f64 / 3.0).ln();
    Ok(json!({
        "radii": profile.radii,
        "sup_mass": profile.sup_mass,
        "unreliable": profile.unreliable,
        "lower": est.lower,
        "upper": est.upper,
        "slope": est.slope,
        "closed_form": exact,
    })
    .to_string())
}

/// Third side of the hinge (a, b, α) in the sphere and hyperbolic plane of radius R and in the plane.
pub fn hinge_json(a: f64, b: f64, alpha: f64, r: f64) -> Result<String, String> {
    let side = |space: Result<ModelSpace, _>| -> serde_json::Value {
        match space.and_then(|s| hinge_third_side(s, a, b, alpha)) {
            Ok(v) => json!(v),
            Err(e) => json!({ "error": e.to_string() }),
        }
    };
    Ok(json!({
        "spherical": side(ModelSpace::spherical(r)),
        "flat": side(Ok(ModelSpace::Flat)),
        "hyperbolic": side(ModelSpace::hyperbolic(r)),
    })
    .to_string())
}

#[wasm_bindgen]
pub fn cantor_spectrum(p1: f64, level: u32, k: u32) -> Result<String, JsValue> {
    cantor_spectrum_json(p1, level as usize, k as usize).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn cantor_profile(p1: f64, level: u32, r_max: f64, factor: f64, count: u32) -> Result<String, JsValue> {
    cantor_profile_json(p1, level as usize, r_max, factor, count as usize).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn hinge(a: f64, b: f64, alpha: f64, r: f64) -> Result<String, JsValue> {
    hinge_json(a, b, alpha, r).map_err(|e| JsValue::from_str(&e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::Value;

    #[test]
    fn spectrum_is_positive_and_sorted() {
        let v: Value = serde_json::from_str(&cantor_spectrum_json(0.5, 6, 12).unwrap()).unwrap();
        let ev: Vec<f64> = serde_json::from_value(v["eigenvalues"].clone()).unwrap();
        assert_eq!(ev.len(), 12);
        assert!(ev[0] > 0.0 && ev.windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(v["traces"].as_array().unwrap().len(), 3);
        assert!(cantor_spectrum_json(0.5, 11, 5).is_err());
        assert!(cantor_spectrum_json(0.5, 5, 0).is_err());
    }

    #[test]
    fn profile_brackets_cantor_dimension() {
        let v: Value = serde_json::from_str(&cantor_profile_json(0.5, 8, 1.0 / 3.0, 1.0 / 3.0, 6).unwrap()).unwrap();
        let d = v["closed_form"].as_f64().unwrap();
        assert!((d - 2f64.ln() / 3f64.ln()).abs() < 1e-15);
        assert!(v["lower"].as_f64().unwrap() <= d + 0.02 && v["upper"].as_f64().unwrap() >= d - 0.02);
    }

    #[test]
    fn hinge_reports_domain_errors_per_space() {
        let v: Value = serde_json::from_str(&hinge_json(1.0, 1.0, std::f64::consts::FRAC_PI_2, 1.0).unwrap()).unwrap();
        assert!((v["flat"].as_f64().unwrap() - 2f64.sqrt()).abs() < 1e-15);
        let v: Value = serde_json::from_str(&hinge_json(2.0, 2.0, 1.0, 1.0).unwrap()).unwrap();
        assert!(v["spherical"]["error"].is_string() && v["hyperbolic"].is_number());
    }
}
