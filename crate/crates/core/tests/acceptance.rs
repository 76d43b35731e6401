//! One line per acceptance criterion; exits nonzero when any criterion fails.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use krein_feller::dimension::{
    ball_profile, check_conditions, estimate_linf_dim, profile_with, CenterChoice, Ladder, Verdict,
};
use krein_feller::embedding::{mazja_small_scale, poincare_probe_line, PoincareVerdict, TestFamily};
use krein_feller::geometry::{
    arc_measure_on_great_circle, chart_pushforward, geodesic_distance, hinge_third_side, inclusion_probe,
    lemma34_bracket_sweep, Branch, ChartMap, ConeAnnulus, ModelSpace,
};
use krein_feller::operator::{
    discrete_string_oracle, solve_spectrum, string_system, weyl_counting, MeshSize, SolveOptions,
};
use krein_feller::{
    discretize, ContractionMap, DiscretizeOptions, IFSystem, MeasureApprox, Point, Representative, Similitude,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn cantor(level: usize, rep: Representative) -> MeasureApprox {
    discretize(
        &IFSystem::cantor(0.5).unwrap(),
        level,
        rep,
        DiscretizeOptions::default(),
    )
    .unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn lebesgue_anchor() -> Outcome {
    let t = Instant::now();
    let mu = MeasureApprox::lebesgue_grid(1, 512).map_err(|e| e.to_string())?;
    let sys = string_system(&mu, MeshSize::Length { h: 1.0 / 512.0 }, false).map_err(|e| e.to_string())?;
    let spec = solve_spectrum(&sys, 5, SolveOptions::default()).map_err(|e| e.to_string())?;
    let worst = (1..=5)
        .map(|k| rel(spec.eigenvalues[k - 1], (k as f64 * PI).powi(2)))
        .fold(0.0, f64::max);
    let secs = t.elapsed().as_secs_f64();
    check(
        spec.eigenvalues.len() == 5 && worst < 0.01 && secs < 5.0,
        format!("max rel err {worst:.2e} vs (kπ)², {secs:.2} s"),
    )
}

fn single_atom() -> Outcome {
    let mu = MeasureApprox::point_mass(1, [0.5, 0.0, 0.0]);
    let sys = string_system(&mu, MeshSize::Length { h: 1.0 / 64.0 }, false).map_err(|e| e.to_string())?;
    let spec = solve_spectrum(&sys, 5, SolveOptions::default()).map_err(|e| e.to_string())?;
    let orc = discrete_string_oracle(&mu, 5).map_err(|e| e.to_string())?;
    let (a, b) = (spec.eigenvalues[0], orc.eigenvalues[0]);
    check(
        spec.eigenvalues.len() == 1 && orc.eigenvalues.len() == 1 && (a - 4.0).abs() < 1e-10 && (b - 4.0).abs() < 1e-10,
        format!(
            "solver {a:.15} ({} pairs), oracle {b:.15} ({} pairs)",
            spec.eigenvalues.len(),
            orc.eigenvalues.len()
        ),
    )
}

fn two_path() -> Outcome {
    let t = Instant::now();
    let mu = cantor(8, Representative::Centroid);
    let sys = string_system(&mu, MeshSize::Triadic { level: 8 }, true).map_err(|e| e.to_string())?;
    let spec = solve_spectrum(&sys, 10, SolveOptions::default()).map_err(|e| e.to_string())?;
    let orc = discrete_string_oracle(&mu, 10).map_err(|e| e.to_string())?;
    let worst = spec
        .eigenvalues
        .iter()
        .zip(&orc.eigenvalues)
        .map(|(a, b)| rel(*a, *b))
        .fold(0.0, f64::max);
    let secs = t.elapsed().as_secs_f64();
    check(
        spec.eigenvalues.len() == 10 && worst < 1e-10 && secs < 30.0,
        format!(
            "max rel diff {worst:.2e} over 10 pairs, {} dofs, {secs:.2} s",
            sys.dof_count()
        ),
    )
}

/// Random similitude IFS on [0,1] with disjoint first-level intervals.
fn random_line_ifs(rng: &mut ChaCha8Rng) -> IFSystem {
    let m = rng.random_range(2..=4usize);
    let ratios: Vec<f64> = (0..m).map(|_| rng.random_range(0.05..0.9 / m as f64)).collect();
    let free = 1.0 - ratios.iter().sum::<f64>();
    let mut cuts: Vec<f64> = (0..m + 1).map(|_| rng.random::<f64>() + 0.05).collect();
    let total: f64 = cuts.iter().sum();
    cuts.iter_mut().for_each(|c| *c *= free / total);
    let mut x = 0.0;
    let mut maps = Vec::new();
    for i in 0..m {
        x += cuts[i];
        maps.push(ContractionMap::Similitude(Similitude::line(ratios[i], x).unwrap()));
        x += ratios[i];
    }
    let raw: Vec<f64> = (0..m).map(|_| rng.random_range(0.1..1.0)).collect();
    let s: f64 = raw.iter().sum();
    let mut weights: Vec<f64> = raw.iter().map(|w| w / s).collect();
    let rest: f64 = weights[..m - 1].iter().sum();
    weights[m - 1] = 1.0 - rest;
    IFSystem::new(1, maps, weights, None).unwrap()
}

fn hodge_suite() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut failures = Vec::new();
    let (mut worst_orth, mut worst_res): (f64, f64) = (0.0, 0.0);
    for case in 0..50 {
        let ifs = random_line_ifs(&mut rng);
        let m = ifs.map_count();
        let level = (1..).take_while(|l| m.pow(*l as u32) <= 1500).last().unwrap();
        let rep = [
            Representative::LeftEndpoint,
            Representative::FixedPointOfWord,
            Representative::Centroid,
        ][case % 3];
        let mu = discretize(&ifs, level, rep, DiscretizeOptions::default()).unwrap();
        let size = if case % 2 == 0 {
            MeshSize::Length { h: 1.0 / 300.0 }
        } else {
            MeshSize::Triadic { level: 6 }
        };
        let sys = match string_system(&mu, size, case % 4 < 2) {
            Ok(s) => s,
            Err(e) => {
                failures.push(format!("case {case}: {e}"));
                continue;
            }
        };
        let spec = match solve_spectrum(&sys, 40, SolveOptions::default()) {
            Ok(s) => s,
            Err(e) => {
                failures.push(format!("case {case}: {e}"));
                continue;
            }
        };
        let ev = &spec.eigenvalues;
        worst_orth = worst_orth.max(spec.orthonormality_error);
        let res_ratio = ev
            .iter()
            .zip(&spec.residuals)
            .map(|(l, r)| r / (1.0 + l))
            .fold(0.0, f64::max);
        worst_res = worst_res.max(res_ratio);
        if ev.is_empty()
            || !(ev[0] > 0.0)
            || ev.windows(2).any(|w| w[1] < w[0])
            || spec.orthonormality_error >= 1e-8
            || res_ratio >= 1e-8
        {
            failures.push(format!("case {case}"));
        }
    }
    check(
        failures.is_empty(),
        format!(
            "{} failures; worst orthonormality {worst_orth:.1e}, worst residual/(1+λ) {worst_res:.1e} {failures:?}",
            failures.len()
        ),
    )
}

fn dimension_recovery() -> Outcome {
    let d = 2f64.ln() / 3f64.ln();
    let mu = cantor(12, Representative::Centroid);
    let ladder = Ladder::new(1.0 / 3.0, 1.0 / 3.0, 10).unwrap();
    let exact = estimate_linf_dim(&ball_profile(&mu, &ladder, CenterChoice::Atoms).unwrap()).unwrap();
    let mc = estimate_linf_dim(&ball_profile(&mu, &ladder, CenterChoice::MonteCarlo { count: 4000, seed: 5 }).unwrap())
        .unwrap();
    let e1 = (exact.lower - d)
        .abs()
        .max((exact.upper - d).abs())
        .max((exact.slope - d).abs());
    let e2 = (mc.slope - d).abs();
    check(
        e1 < 1e-10 && e2 < 0.03,
        format!(
            "exact ladder error {e1:.1e}; Monte-Carlo slope {:.4} (error {e2:.4})",
            mc.slope
        ),
    )
}

fn random_similitude_ifs(rng: &mut ChaCha8Rng) -> IFSystem {
    let n = rng.random_range(1..=3usize);
    let m = rng.random_range(2..=5usize);
    let maps = (0..m)
        .map(|_| {
            let t: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..0.5)).collect();
            ContractionMap::Similitude(Similitude::new(n, rng.random_range(0.02..0.5), None, &t).unwrap())
        })
        .collect();
    let raw: Vec<f64> = (0..m).map(|_| rng.random_range(0.01..1.0)).collect();
    let s: f64 = raw.iter().sum();
    let mut weights: Vec<f64> = raw.iter().map(|w| w / s).collect();
    let rest: f64 = weights[..m - 1].iter().sum();
    weights[m - 1] = 1.0 - rest;
    IFSystem::new(n, maps, weights, None).unwrap()
}

fn condition_logic() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (mut c2_true, mut counter) = (0, 0);
    for _ in 0..1000 {
        let ifs = random_similitude_ifs(&mut rng);
        let n = rng.random_range(ifs.dim()..=3usize);
        let rep = check_conditions(&ifs, n, None).map_err(|e| e.to_string())?;
        if rep.c2.holds {
            c2_true += 1;
            if !rep.c3.holds {
                counter += 1;
            }
        }
    }
    check(
        counter == 0 && c2_true > 0,
        format!("{c2_true} instances with C2, {counter} counterexamples"),
    )
}

fn lemma_brackets() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut violations = 0;
    let mut errors = 0;
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for _ in 0..10 {
        let rho = rng.random_range(0.05..5.0);
        let c = lemma34_bracket_sweep(Branch::C, rho, 1.0, 200, 200).map_err(|e| e.to_string())?;
        lo = lo.min(c.c_min);
        hi = hi.max(c.c_max);
        if c.c_min < 2.0 || c.c_max > 8.0 {
            violations += 1;
        }
        let r = rng.random_range(0.5..5.0);
        for (branch, rho_b) in [(Branch::A, rho), (Branch::B, rho.min(0.9 * PI * r))] {
            match lemma34_bracket_sweep(branch, rho_b, r, 200, 200) {
                Ok(s) if s.c_min > 0.0 && s.c_min.is_finite() && s.c_max.is_finite() && s.c_min <= s.c_max => {}
                _ => errors += 1,
            }
        }
    }
    check(
        violations == 0 && errors == 0,
        format!("branch c range [{lo:.4}, {hi:.4}]δ, {violations} violations; branches a/b {errors} failures"),
    )
}

fn cone_inclusion() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut inner, mut outer) = (0, 0);
    let mut max_ratio: f64 = 0.0;
    for cfg in 0..20 {
        let n = 2 + cfg % 2;
        let rho = rng.random_range(0.2..4.0);
        let delta = rho * std::f64::consts::FRAC_PI_4 * rng.random_range(0.01..1.0);
        let axis: Point = [
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            if n == 3 { rng.random_range(-1.0..1.0) } else { 0.0 },
        ];
        let vertex: Point = [
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            if n == 3 { rng.random_range(-1.0..1.0) } else { 0.0 },
        ];
        let v = ConeAnnulus::new(n, vertex, axis, rho, delta).map_err(|e| e.to_string())?;
        let rep = inclusion_probe(&v, 100_000, cfg as u64);
        inner += rep.inner_violations;
        outer += rep.outer_violations;
        max_ratio = max_ratio.max(rep.max_outer_distance / delta);
    }
    let control = ConeAnnulus::new(2, [0.0; 3], [1.0, 0.0, 0.0], 1.0, 0.1)
        .unwrap()
        .widened(8.0);
    let neg = inclusion_probe(&control, 100_000, 99);
    check(
        inner == 0 && outer == 0 && neg.outer_violations > 0,
        format!(
            "inner {inner}, outer {outer} (max |y−x|/δ = {max_ratio:.3}); widened control {} outer",
            neg.outer_violations
        ),
    )
}

fn model_ordering() -> Outcome {
    let mut bad = 0;
    let mut points = 0;
    for i in 1..=10 {
        for j in 1..=10 {
            for k in 0..100 {
                let (a, b) = (0.14 * i as f64, 0.14 * j as f64);
                let alpha = (PI * k as f64 / 99.0).min(PI);
                let s = hinge_third_side(ModelSpace::Spherical { r: 1.0 }, a, b, alpha).map_err(|e| e.to_string())?;
                let f = hinge_third_side(ModelSpace::Flat, a, b, alpha).unwrap();
                let h = hinge_third_side(ModelSpace::Hyperbolic { r: 1.0 }, a, b, alpha).unwrap();
                points += 1;
                if !(s <= f && f <= h) {
                    bad += 1;
                }
            }
        }
    }
    let mut worst: f64 = 0.0;
    for (a, b, alpha) in [(1.0, 2.0, 0.7), (0.3, 0.3, 2.9), (5.0, 1.0, 1.5)] {
        let scale: f64 = f64::max(a, b);
        let r = 1e4 * scale;
        let f = hinge_third_side(ModelSpace::Flat, a, b, alpha).unwrap();
        for sp in [ModelSpace::Spherical { r }, ModelSpace::Hyperbolic { r }] {
            worst = worst.max(rel(hinge_third_side(sp, a, b, alpha).unwrap(), f));
        }
    }
    check(
        bad == 0 && worst < 1e-6,
        format!("{bad} ordering violations on {points} hinges; flat-limit rel diff {worst:.1e}"),
    )
}

fn mazja_signs() -> Outcome {
    let cantor3 = cantor(14, Representative::Centroid).embed(3).unwrap();
    let a = mazja_small_scale(&cantor3, 2.5, 3, &Ladder::new(1.0 / 3.0, 1.0 / 27.0, 4).unwrap())
        .map_err(|e| e.to_string())?;
    let leb = MeasureApprox::lebesgue_grid(2, 512).unwrap();
    let b = mazja_small_scale(&leb, 3.0, 2, &Ladder::new(0.25, 1.0 / 6.0, 3).unwrap()).map_err(|e| e.to_string())?;
    let pm = MeasureApprox::point_mass(3, [0.5, 0.5, 0.5]);
    let c = mazja_small_scale(&pm, 3.0, 3, &Ladder::new(0.1, 0.1, 4).unwrap()).map_err(|e| e.to_string())?;
    check(
        a.verdict == Verdict::NotCompact && b.verdict == Verdict::Compact && c.verdict == Verdict::NotCompact,
        format!(
            "Cantor ℝ³ {:?}, Lebesgue ℝ² {:?}, point mass {:?}",
            a.verdict, b.verdict, c.verdict
        ),
    )
}

fn poincare_failure() -> Outcome {
    let ns: Vec<f64> = (1..=6).map(|k| 10f64.powi(k)).collect();
    let spread = {
        let pos: Vec<Point> = (0..60)
            .map(|k| [if k % 2 == 0 { 1.0 } else { -1.0 } * 1.5f64.powi(k / 2), 0.0, 0.0])
            .collect();
        let mut w: Vec<f64> = (0..60).map(|k| 0.5f64.powi(k / 2 + 2)).collect();
        let s: f64 = w.iter().sum();
        w.iter_mut().for_each(|x| *x /= s);
        MeasureApprox::from_atoms(1, pos, w, 0.0).unwrap()
    };
    let measures = [
        MeasureApprox::point_mass(1, [0.0; 3]),
        cantor(8, Representative::FixedPointOfWord),
        spread,
    ];
    let mut bad = 0;
    for mu in &measures {
        let p = poincare_probe_line(mu, TestFamily::PlateauWithRamps, &ns).map_err(|e| e.to_string())?;
        if p.ratios.iter().zip(&p.bounds).any(|(r, b)| r < b) || p.verdict != PoincareVerdict::Unbounded {
            bad += 1;
        }
    }
    check(
        bad == 0,
        format!("{bad} of {} measures violate the bound or stay bounded", measures.len()),
    )
}

fn pushforward_dimension() -> Outcome {
    let r = 1.0;
    let mu = cantor(10, Representative::Centroid);
    let on_circle = arc_measure_on_great_circle(&mu, r, 1.0).map_err(|e| e.to_string())?;
    let ladder = Ladder::new(1.0 / 3.0, 1.0 / 3.0, 7).unwrap();
    let space = ModelSpace::Spherical { r };
    let intrinsic = profile_with(
        &ladder.radii(),
        &on_circle,
        CenterChoice::Atoms,
        mu.resolution_floor(),
        |c, rad| {
            on_circle
                .iter()
                .zip(mu.weights())
                .filter(|(q, _)| geodesic_distance(space, c, q) <= rad)
                .map(|(_, w)| w)
                .sum()
        },
    )
    .map_err(|e| e.to_string())?;
    let (lat, lon): (f64, f64) = (0.3, 0.5);
    let base = [r * lat.cos() * lon.cos(), r * lat.cos() * lon.sin(), r * lat.sin()];
    let chart = ChartMap::new(space, base, 1.2, [0.0, 0.0]).map_err(|e| e.to_string())?;
    let push = chart_pushforward(&on_circle, mu.weights(), &[chart], 2.0 * mu.cylinder_diameter())
        .map_err(|e| e.to_string())?;
    let image = ball_profile(&push.measure, &ladder, CenterChoice::Atoms).map_err(|e| e.to_string())?;
    let d1 = estimate_linf_dim(&intrinsic).map_err(|e| e.to_string())?.slope;
    let d2 = estimate_linf_dim(&image).map_err(|e| e.to_string())?.slope;
    check(
        (d1 - d2).abs() < 0.05,
        format!("intrinsic {d1:.4}, chart image {d2:.4}"),
    )
}

fn weyl_stability() -> Outcome {
    let t = Instant::now();
    let d = 2f64.ln() / 3f64.ln();
    let reference = d / (d + 1.0);
    let mut fits = Vec::new();
    for level in [8usize, 9] {
        let mu = cantor(level, Representative::Centroid);
        let k = 1 << (level - 2);
        let sys = string_system(&mu, MeshSize::Triadic { level: level as u32 }, true).map_err(|e| e.to_string())?;
        let spec = solve_spectrum(&sys, k, SolveOptions::default()).map_err(|e| e.to_string())?;
        let orc = discrete_string_oracle(&mu, k).map_err(|e| e.to_string())?;
        let a = weyl_counting(&spec.eigenvalues).exponent.ok_or("too few eigenvalues")?;
        let b = weyl_counting(&orc.eigenvalues).exponent.ok_or("too few eigenvalues")?;
        fits.push((a, b));
    }
    let secs = t.elapsed().as_secs_f64();
    let (e8, e9) = (fits[0].0, fits[1].0);
    check(
        (e8 - e9).abs() < 0.02 && (e8 - reference).abs() < 0.05 && (e9 - reference).abs() < 0.05 && secs < 120.0,
        format!(
            "exponents m=8 {e8:.4}, m=9 {e9:.4} (oracle {:.4}, {:.4}), reference {reference:.4}, {secs:.2} s",
            fits[0].1, fits[1].1
        ),
    )
}

fn main() -> ExitCode {
    type Criterion = (&'static str, fn() -> Outcome);
    let criteria: [Criterion; 13] = [
        ("Lebesgue anchor (kπ)²", lebesgue_anchor),
        ("single atom λ₁ = 4", single_atom),
        ("two-path equivalence, Cantor level 8", two_path),
        ("spectral property suite, 50 random IFS", hodge_suite),
        ("L∞-dimension recovery", dimension_recovery),
        ("C2 implies C3, 1000 random IFS", condition_logic),
        ("bracket functions", lemma_brackets),
        ("cone annulus inclusion", cone_inclusion),
        ("model-space hinge ordering", model_ordering),
        ("Maz'ja functional signs", mazja_signs),
        ("Poincaré failure on the line", poincare_failure),
        ("pushforward dimension preservation", pushforward_dimension),
        ("Weyl exponent stability", weyl_stability),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(d) => println!("PASS {:>2} {name}: {d}", i + 1),
            Err(d) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {d}", i + 1);
            }
        }
    }
    println!("{} of {} criteria pass", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
