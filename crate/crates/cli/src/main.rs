use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;
use serde_json::{json, Value};

use krein_feller::dimension::{
    ball_profile, check_conditions, estimate_linf_dim, selfsimilar_dim_bounds, BallProfile, CenterChoice, Ladder,
};
use krein_feller::embedding::{
    embedding_verdict, mazja_small_scale, mazja_tail, poincare_probe_line, poincare_probe_mesh, TestFamily,
};
use krein_feller::geometry::{
    hinge_third_side, inclusion_probe, lemma34_bracket_sweep, Branch, ConeAnnulus, ModelSpace,
};
use krein_feller::io::{self, IfsDocument};
use krein_feller::measure::check_invariance;
use krein_feller::operator::{
    discrete_string_oracle, solve_spectrum, string_system, weyl_counting, GalerkinSystem, Mesh, MeshSize, SolveOptions,
};
use krein_feller::{discretize, DiscretizeOptions, Error, ErrorClass, IFSystem, MeasureApprox, Representative};

mod plot;

use plot::{Plot, Series};

const DEFAULT_LEVEL: usize = 8;
const DEFAULT_MESH: &str = "1/64";
const DEFAULT_K: usize = 20;
const EIGENFUNCTION_FILES: usize = 4;
const POINCARE_SCALES: [f64; 6] = [1.0, 2.0, 4.0, 8.0, 16.0, 32.0];

/// Kreĭn-Feller spectra and embedding criteria for IFS measures
#[derive(Debug, Parser)]
#[command(name = "kreinfeller", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    opts: Opts,
}

#[derive(Debug, Args)]
struct Opts {
    /// IFS JSON document, or an atoms.csv written by `measure` (with its meta.json alongside)
    #[arg(long, global = true, value_name = "PATH")]
    ifs: Option<PathBuf>,
    /// Discretization level m
    #[arg(long, global = true)]
    level: Option<usize>,
    /// Mesh size: a length such as 1/64, or triadic:m
    #[arg(long, global = true, value_name = "SPEC")]
    h: Option<String>,
    /// Ambient dimension
    #[arg(long, global = true)]
    n: Option<usize>,
    /// Embedding exponent; 2 selects the n-2 threshold
    #[arg(long, global = true)]
    q: Option<f64>,
    /// Number of eigenvalues
    #[arg(long, global = true)]
    k: Option<usize>,
    /// Radius ladder rMax:factor:count
    #[arg(long, global = true, value_name = "SPEC")]
    ladder: Option<String>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output directory
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Also write SVG figures
    #[arg(long, global = true)]
    plot: bool,
    /// Worker threads (default: all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Leave the timestamp comment out of SVG files
    #[arg(long, global = true)]
    no_meta: bool,
    /// Atom placement: fixed_point, left or centroid
    #[arg(long, global = true, default_value = "fixed_point")]
    rep: String,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Discretize the IFS measure into atoms.csv and meta.json
    Measure,
    /// Ball-mass profile and L∞-dimension estimate
    Dim,
    /// Regularity conditions C2-C4 in ℝⁿ
    Conditions,
    /// Compact-embedding verdict: dimension threshold, Maz'ja functional, Poincaré probe
    Embed,
    /// Dirichlet spectrum of the Kreĭn-Feller operator
    Spectrum,
    /// Eigenvalues of the exact atomic string (line measures only)
    Oracle,
    /// Model-space hinges, chord brackets and a cone-inclusion sample
    GeometryProbe(GeometryArgs),
}

#[derive(Debug, Args)]
struct GeometryArgs {
    #[arg(long, default_value_t = 1.0)]
    a: f64,
    #[arg(long, default_value_t = 1.0)]
    b: f64,
    /// Hinge angle in radians
    #[arg(long, default_value_t = std::f64::consts::FRAC_PI_2)]
    alpha: f64,
    /// Curvature radius R of the hyperbolic and spherical models
    #[arg(long, default_value_t = 1.0)]
    radius: f64,
}

#[derive(Debug, Deserialize)]
struct AtomsMeta {
    cylinder_diameter: f64,
    ifs: Option<IfsDocument>,
}

struct Input {
    ifs: Option<IFSystem>,
    mu: MeasureApprox,
}

struct Run {
    opts: Opts,
    written: Vec<PathBuf>,
}

impl Run {
    fn write(&mut self, name: &str, text: &str) -> anyhow::Result<()> {
        let path = self.opts.out.join(name);
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        self.written.push(path);
        Ok(())
    }

    fn write_json(&mut self, name: &str, v: &Value) -> anyhow::Result<()> {
        let mut text = serde_json::to_string_pretty(v)?;
        text.push('\n');
        self.write(name, &text)
    }

    fn write_svg(&mut self, name: &str, p: &Plot) -> anyhow::Result<()> {
        let stamp = if self.opts.no_meta {
            None
        } else {
            let secs = std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0);
            Some(format!(
                "kreinfeller {} generated at unix time {secs}",
                env!("CARGO_PKG_VERSION")
            ))
        };
        self.write(name, &p.render(stamp.as_deref()))
    }

    fn rep(&self) -> anyhow::Result<Representative> {
        Ok(self.opts.rep.parse::<Representative>()?)
    }

    fn level(&self) -> usize {
        self.opts.level.unwrap_or(DEFAULT_LEVEL)
    }

    fn ifs_path(&self) -> anyhow::Result<&Path> {
        self.opts
            .ifs
            .as_deref()
            .ok_or_else(|| anyhow!(Error::Validation("--ifs PATH is required".into())))
    }

    fn read_ifs(&self) -> anyhow::Result<IFSystem> {
        let path = self.ifs_path()?;
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Ok(io::parse_ifs_json(&text)?)
    }

    fn input(&self) -> anyhow::Result<Input> {
        let path = self.ifs_path()?;
        if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
            let meta_path = path.with_file_name("meta.json");
            let meta: AtomsMeta = serde_json::from_str(
                &fs::read_to_string(&meta_path).with_context(|| format!("reading {}", meta_path.display()))?,
            )
            .map_err(|e| Error::Validation(format!("{}: {e}", meta_path.display())))?;
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let mu = io::parse_atoms_csv(&text, meta.cylinder_diameter)?;
            let ifs = meta.ifs.map(|d| d.to_ifs()).transpose()?;
            return Ok(Input { ifs, mu });
        }
        let ifs = self.read_ifs()?;
        let mu = discretize(&ifs, self.level(), self.rep()?, DiscretizeOptions::default())?;
        Ok(Input { ifs: Some(ifs), mu })
    }

    /// The --ladder spec, or rMax = 1/2 halving down to the resolution floor.
    fn ladder(&self, mu: &MeasureApprox) -> anyhow::Result<Ladder> {
        if let Some(spec) = &self.opts.ladder {
            return Ok(Ladder::parse(spec)?);
        }
        let floor = mu.resolution_floor();
        let count = if floor > 0.0 {
            (0.5 / floor).log2().floor().clamp(3.0, 40.0) as usize
        } else {
            8
        };
        Ok(Ladder::new(0.5, 0.5, count)?)
    }

    fn ambient(&self, mu: &MeasureApprox) -> anyhow::Result<usize> {
        let n = self.opts.n.unwrap_or(mu.dim());
        if !(1..=3).contains(&n) {
            return Err(Error::Validation("n must be 1, 2 or 3".into()).into());
        }
        if n < mu.dim() {
            return Err(Error::Validation(format!("n = {n} is below the measure dimension {}", mu.dim())).into());
        }
        Ok(n)
    }
}

fn parse_mesh(spec: &str) -> anyhow::Result<MeshSize> {
    Ok(MeshSize::parse(spec)?)
}

/// `fit` is (slope, ln r, ln mass) of a point the fitted line passes through.
fn profile_plot(p: &BallProfile, fit: Option<(f64, f64, f64)>) -> Plot {
    let pts: Vec<(f64, f64)> = p
        .radii
        .iter()
        .zip(&p.sup_mass)
        .filter(|(_, m)| **m > 0.0)
        .map(|(r, m)| (r.ln(), m.ln()))
        .collect();
    let mut series = vec![Series {
        label: "sup mass".into(),
        points: pts.clone(),
        markers: true,
    }];
    if let Some((slope, x0, y0)) = fit {
        let line = pts.iter().map(|(x, _)| (*x, y0 + slope * (x - x0))).collect();
        series.push(Series {
            label: format!("slope {slope:.4}"),
            points: line,
            markers: false,
        });
    }
    Plot {
        title: "ball-mass profile".into(),
        x_label: "ln r".into(),
        y_label: "ln sup μ(B(x,r))".into(),
        series,
    }
}

fn cmd_measure(run: &mut Run) -> anyhow::Result<()> {
    let ifs = run.read_ifs()?;
    let level = run.level();
    let rep = run.rep()?;
    let mu = discretize(&ifs, level, rep, DiscretizeOptions::default())?;
    let inv = check_invariance(&ifs, level, rep, DiscretizeOptions::default())?;
    run.write("atoms.csv", &io::atoms_csv(&mu))?;
    let meta = json!({
        "level": level,
        "atoms": mu.len(),
        "dim": mu.dim(),
        "representative": rep,
        "cylinder_diameter": mu.cylinder_diameter(),
        "resolution_floor": mu.resolution_floor(),
        "total_mass": mu.total_mass(),
        "dropped_mass": mu.dropped_mass(),
        "invariance": inv,
        "ifs": IfsDocument::from_ifs(&ifs),
    });
    run.write_json("meta.json", &meta)
}

fn cmd_dim(run: &mut Run) -> anyhow::Result<()> {
    let input = run.input()?;
    let ladder = run.ladder(&input.mu)?;
    let profile = ball_profile(&input.mu, &ladder, CenterChoice::Atoms)?;
    let est = estimate_linf_dim(&profile)?;
    let bounds = input.ifs.as_ref().map(selfsimilar_dim_bounds);
    run.write("profile.csv", &io::profile_csv(&profile))?;
    let report = json!({
        "level": input.mu.level(),
        "ladder": ladder,
        "profile": profile,
        "estimate": est,
        "selfsimilar_bounds": bounds,
    });
    run.write_json("dim.json", &report)?;
    if run.opts.plot {
        let a = est.slope_window.0;
        let fit = (profile.sup_mass[a] > 0.0).then(|| (est.slope, profile.radii[a].ln(), profile.sup_mass[a].ln()));
        run.write_svg("profile.svg", &profile_plot(&profile, fit))?;
    }
    Ok(())
}

fn cmd_conditions(run: &mut Run) -> anyhow::Result<()> {
    let input = run.input()?;
    let ifs = input
        .ifs
        .as_ref()
        .ok_or_else(|| Error::Validation("conditions need the IFS (meta.json has none)".into()))?;
    let n = run.opts.n.unwrap_or(ifs.dim());
    let ladder = run.ladder(&input.mu)?;
    let profile = ball_profile(&input.mu, &ladder, CenterChoice::Atoms)?;
    let report = check_conditions(ifs, n, Some(&profile))?;
    run.write_json("conditions.json", &json!(report))
}

fn cmd_embed(run: &mut Run) -> anyhow::Result<()> {
    let input = run.input()?;
    let n = run.ambient(&input.mu)?;
    let q = run.opts.q.unwrap_or(2.0);
    let mu = input.mu.embed(n)?;
    let ladder = run.ladder(&mu)?;
    let profile = ball_profile(&mu, &ladder, CenterChoice::Atoms)?;
    let dims = estimate_linf_dim(&profile)?;
    let mut notes = Vec::new();
    let (mazja, tail) = if n == 1 {
        notes.push("the Maz'ja functional is not used on the line".to_string());
        (None, None)
    } else if q == 2.0 {
        notes.push("q = 2 uses the dimension threshold only".to_string());
        (None, None)
    } else {
        let m = mazja_small_scale(&mu, q, n, &ladder)?;
        let reach = mu.positions().iter().map(krein_feller::point::norm).fold(0.0, f64::max);
        let radii: Vec<f64> = [0.0, 0.25, 0.5, 1.0, 2.0].iter().map(|f| f * reach).collect();
        let t = if reach > 0.0 {
            Some(mazja_tail(&mu, q, n, &radii)?)
        } else {
            None
        };
        (Some(m), t)
    };
    let verdict = embedding_verdict(mazja.as_ref(), tail.as_ref(), &dims, n, q)?;
    let poincare = if n == 1 {
        Some(poincare_probe_line(
            &mu,
            TestFamily::PlateauWithRamps,
            &POINCARE_SCALES,
        )?)
    } else {
        None
    };
    if let Some(m) = &mazja {
        run.write("mazja.csv", &io::mazja_csv(m))?;
    }
    let report = json!({
        "n": n,
        "q": q,
        "ladder": ladder,
        "estimate": dims,
        "mazja": mazja,
        "tail": tail,
        "poincare": poincare,
        "verdict": verdict,
        "notes": notes,
    });
    run.write_json("embed.json", &report)?;
    if run.opts.plot {
        run.write_svg("profile.svg", &profile_plot(&profile, None))?;
        if let Some(m) = &mazja {
            let pts = |v: &[f64]| -> Vec<(f64, f64)> {
                m.delta_ladder
                    .iter()
                    .zip(v)
                    .filter(|(_, s)| **s > 0.0)
                    .map(|(d, s)| (d.ln(), s.ln()))
                    .collect()
            };
            let p = Plot {
                title: format!("Maz'ja functional, n = {n}, q = {q}"),
                x_label: "ln δ".into(),
                y_label: "ln sup".into(),
                series: vec![
                    Series {
                        label: "band sup".into(),
                        points: pts(&m.band_sup),
                        markers: true,
                    },
                    Series {
                        label: "sup below δ".into(),
                        points: pts(&m.small_scale_sup),
                        markers: false,
                    },
                ],
            };
            run.write_svg("mazja.svg", &p)?;
        }
    }
    Ok(())
}

fn system(run: &Run, mu: &MeasureApprox) -> anyhow::Result<(GalerkinSystem, bool)> {
    let size = parse_mesh(run.opts.h.as_deref().unwrap_or(DEFAULT_MESH))?;
    match mu.dim() {
        1 => Ok((string_system(mu, size, true)?, true)),
        2 => {
            let mesh = Mesh::rectangle([0.0, 0.0], [1.0, 1.0], size)?;
            Ok((GalerkinSystem::assemble(&mesh, mu)?, false))
        }
        d => Err(Error::Unsupported(format!("spectra for measures in dimension {d}")).into()),
    }
}

fn cmd_spectrum(run: &mut Run) -> anyhow::Result<()> {
    let input = run.input()?;
    let k = run.opts.k.unwrap_or(DEFAULT_K);
    let (sys, snapped) = system(run, &input.mu)?;
    let spec = solve_spectrum(&sys, k, SolveOptions::default())?;
    let weyl = weyl_counting(&spec.eigenvalues);
    let lambda1 = spec.eigenvalues.first().copied();
    let poincare = poincare_probe_mesh(&sys, lambda1, 16, run.opts.seed)?;
    run.write("spectrum.csv", &io::spectrum_csv(&spec))?;
    run.write("weyl.csv", &io::weyl_csv(&weyl))?;
    let shown = spec.vectors.len().min(EIGENFUNCTION_FILES);
    for (j, c) in spec.vectors.iter().take(shown).enumerate() {
        run.write(&format!("eigenfunction_{}.csv", j + 1), &io::eigenfunction_csv(&sys, c))?;
    }
    let report = json!({
        "level": input.mu.level(),
        "mesh": {
            "spec": run.opts.h.as_deref().unwrap_or(DEFAULT_MESH),
            "nodes": sys.mesh().node_count(),
            "dofs": sys.dof_count(),
            "atoms_snapped": snapped,
        },
        "dropped_atoms": sys.dropped_atoms(),
        "dropped_mass": sys.dropped_mass(),
        "warnings": sys.warnings(),
        "spectrum": spec,
        "weyl": weyl,
        "poincare": poincare,
    });
    run.write_json("spectrum.json", &report)?;
    if run.opts.plot {
        if sys.mesh().dim() == 1 {
            let series = spec
                .vectors
                .iter()
                .take(shown)
                .enumerate()
                .map(|(j, c)| {
                    let mesh = sys.mesh();
                    let values = sys.node_values(c);
                    let points = (0..mesh.node_count()).map(|i| (mesh.node(i)[0], values[i])).collect();
                    Series {
                        label: format!("u{} (λ = {:.4})", j + 1, spec.eigenvalues[j]),
                        points,
                        markers: false,
                    }
                })
                .collect();
            let p = Plot {
                title: "eigenfunctions".into(),
                x_label: "x".into(),
                y_label: "u".into(),
                series,
            };
            run.write_svg("eigenfunctions.svg", &p)?;
        }
        let mut series = vec![Series {
            label: "N(λ)".into(),
            points: weyl.table.iter().map(|(l, c)| (l.ln(), (*c as f64).ln())).collect(),
            markers: true,
        }];
        if let (Some(e), Some(c)) = (weyl.exponent, weyl.intercept) {
            let line = weyl.table.iter().map(|(l, _)| (l.ln(), c + e * l.ln())).collect();
            series.push(Series {
                label: format!("exponent {e:.4}"),
                points: line,
                markers: false,
            });
        }
        let p = Plot {
            title: "eigenvalue counting function".into(),
            x_label: "ln λ".into(),
            y_label: "ln N(λ)".into(),
            series,
        };
        run.write_svg("weyl.svg", &p)?;
    }
    Ok(())
}

fn cmd_oracle(run: &mut Run) -> anyhow::Result<()> {
    let input = run.input()?;
    let k = run.opts.k.unwrap_or(DEFAULT_K);
    let oracle = discrete_string_oracle(&input.mu, k)?;
    run.write("oracle.csv", &io::eigenvalues_csv(&oracle.eigenvalues))?;
    run.write_json("oracle.json", &json!(oracle))
}

fn cmd_geometry(run: &mut Run, g: &GeometryArgs) -> anyhow::Result<()> {
    let spaces = [
        ("spherical", ModelSpace::spherical(g.radius)?),
        ("flat", ModelSpace::Flat),
        ("hyperbolic", ModelSpace::hyperbolic(g.radius)?),
    ];
    let mut hinge = serde_json::Map::new();
    for (name, space) in spaces {
        let v = match hinge_third_side(space, g.a, g.b, g.alpha) {
            Ok(c) => json!(c),
            Err(e @ Error::Domain(_)) => json!({ "error": e.to_string() }),
            Err(e) => return Err(e.into()),
        };
        hinge.insert(name.into(), v);
    }
    let rho = 1.0;
    let mut brackets = serde_json::Map::new();
    for (name, branch) in [("a", Branch::A), ("b", Branch::B), ("c", Branch::C)] {
        brackets.insert(
            name.into(),
            json!(lemma34_bracket_sweep(branch, rho, g.radius, 64, 33)?),
        );
    }
    let n = run.opts.n.unwrap_or(2);
    let delta = 0.1;
    let axis = [1.0, 0.0, 0.0];
    let cone = ConeAnnulus::new(n, [0.0; 3], axis, rho, delta)?;
    let inclusion = inclusion_probe(&cone, 20_000, run.opts.seed);
    let report = json!({
        "hinge": { "a": g.a, "b": g.b, "alpha": g.alpha, "radius": g.radius, "third_side": hinge },
        "brackets": { "rho": rho, "radius": g.radius, "sweeps": brackets },
        "cone": { "n": n, "rho": rho, "delta": delta, "seed": run.opts.seed, "inclusion": inclusion },
    });
    run.write_json("geometry.json", &report)
}

fn dispatch(command: &Command, run: &mut Run) -> anyhow::Result<()> {
    fs::create_dir_all(&run.opts.out).with_context(|| format!("creating {}", run.opts.out.display()))?;
    match command {
        Command::Measure => cmd_measure(run),
        Command::Dim => cmd_dim(run),
        Command::Conditions => cmd_conditions(run),
        Command::Embed => cmd_embed(run),
        Command::Spectrum => cmd_spectrum(run),
        Command::Oracle => cmd_oracle(run),
        Command::GeometryProbe(g) => cmd_geometry(run, g),
    }
}

fn subcommand_name(c: &Command) -> &'static str {
    match c {
        Command::Measure => "measure",
        Command::Dim => "dim",
        Command::Conditions => "conditions",
        Command::Embed => "embed",
        Command::Spectrum => "spectrum",
        Command::Oracle => "oracle",
        Command::GeometryProbe(_) => "geometry-probe",
    }
}

fn fail(code: &str, message: String, context: Value, exit: u8) -> ExitCode {
    let body = json!({ "code": code, "message": message, "context": context });
    eprintln!("{body}");
    ExitCode::from(exit)
}

fn report_error(err: &anyhow::Error, subcommand: &str) -> ExitCode {
    let chain: Vec<String> = err.chain().skip(1).map(|c| c.to_string()).collect();
    let mut context = json!({ "subcommand": subcommand });
    if let Some(core) = err.downcast_ref::<Error>() {
        let exit = match core.class() {
            ErrorClass::Validation => 2,
            ErrorClass::Budget => 3,
            ErrorClass::Numeric => 4,
        };
        let outer: Vec<String> = err
            .chain()
            .take_while(|c| c.downcast_ref::<Error>().is_none())
            .map(|c| c.to_string())
            .collect();
        if !outer.is_empty() {
            context["while"] = json!(outer);
        }
        return fail(core.code(), core.to_string(), context, exit);
    }
    if !chain.is_empty() {
        context["cause"] = json!(chain);
    }
    let code = if err.chain().any(|c| c.downcast_ref::<std::io::Error>().is_some()) {
        "io"
    } else {
        "validation"
    };
    fail(code, format!("{err:#}"), context, 2)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let msg = e.render().to_string();
            let first = msg
                .lines()
                .next()
                .unwrap_or("invalid arguments")
                .trim_start_matches("error: ")
                .to_string();
            return fail("usage", first, json!({ "usage": msg }), 2);
        }
    };
    let name = subcommand_name(&cli.command);
    if let Some(t) = cli.opts.threads {
        if t == 0 {
            return fail(
                "validation",
                "--threads must be at least 1".into(),
                json!({ "subcommand": name }),
                2,
            );
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            return fail("numeric", e.to_string(), json!({ "subcommand": name }), 4);
        }
    }
    let mut run = Run {
        opts: cli.opts,
        written: Vec::new(),
    };
    match dispatch(&cli.command, &mut run) {
        Ok(()) => {
            for p in &run.written {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => report_error(&e, name),
    }
}
