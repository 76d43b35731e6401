//! Text formats: IFS JSON documents, atom CSV, matrix triplets and result tables.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dimension::BallProfile;
use crate::embedding::MazjaReport;
use crate::error::{invalid, Error, Result};
use crate::ifs::{BoxSet, Conformal1D, ConformalKind, ContractionMap, CylinderCode, IFSystem, Similitude};
use crate::measure::MeasureApprox;
use crate::operator::{GalerkinSystem, Spectrum, WeylFit};
use crate::point::{Point, ORIGIN};

/// Hölder exponent assumed for built-in conformal maps when the document gives none.
pub const DEFAULT_HOLDER: f64 = 0.5;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IfsDocument {
    pub n: usize,
    pub maps: Vec<MapDocument>,
    pub weights: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub osc_set: Option<OscDocument>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OscDocument {
    #[serde(rename = "box")]
    pub bounds: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum MapDocument {
    Similitude {
        ratio: f64,
        translation: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        rotation: Option<Vec<Vec<f64>>>,
    },
    Conformal1d {
        expr: String,
        params: BTreeMap<String, f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        domain: Option<[f64; 2]>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        holder: Option<f64>,
    },
}

fn param(params: &BTreeMap<String, f64>, expr: &str, allowed: &[&str]) -> Result<Vec<f64>> {
    if let Some(k) = params.keys().find(|k| !allowed.contains(&k.as_str())) {
        return Err(invalid(format!("unknown parameter '{k}' for {expr}")));
    }
    allowed
        .iter()
        .map(|k| {
            params
                .get(*k)
                .copied()
                .ok_or_else(|| invalid(format!("{expr} needs parameter '{k}'")))
        })
        .collect()
}

impl IfsDocument {
    pub fn to_ifs(&self) -> Result<IFSystem> {
        let osc = match &self.osc_set {
            Some(o) => {
                let lo: Vec<f64> = o.bounds.iter().map(|b| b[0]).collect();
                let hi: Vec<f64> = o.bounds.iter().map(|b| b[1]).collect();
                Some(BoxSet::new(self.n, &lo, &hi)?)
            }
            None => None,
        };
        let mut maps = Vec::with_capacity(self.maps.len());
        for m in &self.maps {
            maps.push(match m {
                MapDocument::Similitude {
                    ratio,
                    translation,
                    rotation,
                } => ContractionMap::Similitude(Similitude::new(self.n, *ratio, rotation.as_deref(), translation)?),
                MapDocument::Conformal1d {
                    expr,
                    params,
                    domain,
                    holder,
                } => {
                    if self.n != 1 {
                        return Err(invalid("conformal maps are supported in dimension 1 only"));
                    }
                    let kind = match expr.as_str() {
                        "mobius" => {
                            let v = param(params, expr, &["a", "b", "c", "d"])?;
                            ConformalKind::Mobius {
                                a: v[0],
                                b: v[1],
                                c: v[2],
                                d: v[3],
                            }
                        }
                        "quadratic" => {
                            let v = param(params, expr, &["c0", "c1", "c2"])?;
                            ConformalKind::Quadratic {
                                c0: v[0],
                                c1: v[1],
                                c2: v[2],
                            }
                        }
                        other => {
                            return Err(invalid(format!(
                                "unknown conformal expression '{other}' (mobius, quadratic)"
                            )))
                        }
                    };
                    let dom = match (domain, &osc) {
                        (Some(d), _) => (d[0], d[1]),
                        (None, Some(u)) => (u.lo[0], u.hi[0]),
                        (None, None) => (0.0, 1.0),
                    };
                    ContractionMap::Conformal1D(Conformal1D::new(kind, dom, holder.unwrap_or(DEFAULT_HOLDER))?)
                }
            });
        }
        IFSystem::new(self.n, maps, self.weights.clone(), osc)
    }

    pub fn from_ifs(ifs: &IFSystem) -> Self {
        let n = ifs.dim();
        let maps = ifs
            .maps()
            .iter()
            .map(|m| match m {
                ContractionMap::Similitude(s) => {
                    let orth = s.orthogonal_part();
                    let identity = (0..n).all(|i| (0..n).all(|j| orth[i][j] == if i == j { 1.0 } else { 0.0 }));
                    MapDocument::Similitude {
                        ratio: s.ratio(),
                        translation: s.translation()[..n].to_vec(),
                        rotation: if identity { None } else { Some(orth) },
                    }
                }
                ContractionMap::Conformal1D(c) => {
                    let (expr, params): (&str, Vec<(&str, f64)>) = match *c.kind() {
                        ConformalKind::Mobius { a, b, c, d } => {
                            ("mobius", vec![("a", a), ("b", b), ("c", c), ("d", d)])
                        }
                        ConformalKind::Quadratic { c0, c1, c2 } => {
                            ("quadratic", vec![("c0", c0), ("c1", c1), ("c2", c2)])
                        }
                    };
                    let (lo, hi) = c.domain();
                    MapDocument::Conformal1d {
                        expr: expr.into(),
                        params: params.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
                        domain: Some([lo, hi]),
                        holder: Some(c.holder()),
                    }
                }
            })
            .collect();
        IfsDocument {
            n,
            maps,
            weights: ifs.weights().to_vec(),
            osc_set: ifs.osc_set().map(|b| OscDocument {
                bounds: (0..n).map(|k| [b.lo[k], b.hi[k]]).collect(),
            }),
        }
    }
}

pub fn parse_ifs_json(text: &str) -> Result<IFSystem> {
    let doc: IfsDocument = serde_json::from_str(text).map_err(|e| invalid(format!("IFS document: {e}")))?;
    doc.to_ifs()
}

pub fn ifs_to_json(ifs: &IFSystem) -> String {
    serde_json::to_string_pretty(&IfsDocument::from_ifs(ifs)).expect("IFS document serializes")
}

/// A float with 17 significant digits in the style of C's `%.17g`.
pub fn fmt_g17(x: f64) -> String {
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{x:.16e}");
    let (mant, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..17).contains(&exp) {
        let fixed = format!("{x:.*}", (16 - exp) as usize);
        trim_zeros(&fixed).to_string()
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_zeros(mant), exp.abs())
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn csv_error(e: csv::Error) -> Error {
    invalid(format!("CSV: {e}"))
}

fn finish(w: csv::Writer<Vec<u8>>) -> String {
    String::from_utf8(w.into_inner().expect("in-memory CSV")).expect("UTF-8 CSV")
}

/// Columns `level,word,x1..xn,weight`; words are dot-separated 1-based letters.
pub fn atoms_csv(mu: &MeasureApprox) -> String {
    let n = mu.dim();
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["level".to_string(), "word".to_string()];
    header.extend((1..=n).map(|k| format!("x{k}")));
    header.push("weight".into());
    w.write_record(&header).expect("in-memory CSV");
    for (i, (p, wt)) in mu.positions().iter().zip(mu.weights()).enumerate() {
        let mut row = vec![
            mu.level().to_string(),
            mu.word(i).map(|c| c.to_string()).unwrap_or_default(),
        ];
        row.extend(p[..n].iter().map(|x| fmt_g17(*x)));
        row.push(fmt_g17(*wt));
        w.write_record(&row).expect("in-memory CSV");
    }
    finish(w)
}

/// Reads an atom table written by [`atoms_csv`]; `cylinder_diameter` restores the resolution.
pub fn parse_atoms_csv(text: &str, cylinder_diameter: f64) -> Result<MeasureApprox> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r.headers().map_err(csv_error)?.clone();
    let cols: Vec<&str> = header.iter().collect();
    let n = cols
        .len()
        .checked_sub(3)
        .ok_or_else(|| invalid("atom CSV needs level,word,x1..xn,weight"))?;
    let expect: Vec<String> = ["level".to_string(), "word".to_string()]
        .into_iter()
        .chain((1..=n).map(|k| format!("x{k}")))
        .chain(["weight".to_string()])
        .collect();
    if n == 0 || n > 3 || cols != expect.iter().map(String::as_str).collect::<Vec<_>>() {
        return Err(invalid(format!("unexpected atom CSV header {cols:?}")));
    }
    let num = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|_| invalid(format!("not a number: '{s}'")))
    };
    let mut level = None;
    let (mut positions, mut weights, mut words) = (Vec::new(), Vec::new(), Vec::new());
    let mut all_words = true;
    for rec in r.records() {
        let rec = rec.map_err(csv_error)?;
        let l: usize = rec[0].trim().parse().map_err(|_| invalid("level must be an integer"))?;
        if *level.get_or_insert(l) != l {
            return Err(invalid("atom CSV mixes levels"));
        }
        let word = rec[1].trim();
        if word.is_empty() && l > 0 {
            all_words = false;
        }
        let letters: std::result::Result<Vec<usize>, _> = if word.is_empty() {
            Ok(Vec::new())
        } else {
            word.split('.').map(str::parse).collect()
        };
        words.push(CylinderCode(
            letters.map_err(|_| invalid(format!("bad word '{word}'")))?,
        ));
        let mut p: Point = ORIGIN;
        for k in 0..n {
            p[k] = num(&rec[2 + k])?;
        }
        positions.push(p);
        weights.push(num(&rec[2 + n])?);
    }
    if positions.is_empty() {
        return Err(Error::EmptyMeasure);
    }
    let words = if all_words && words.iter().all(|w| w.len() == level.unwrap_or(0)) {
        Some(words)
    } else {
        None
    };
    MeasureApprox::from_parts(n, level.unwrap_or(0), positions, weights, words, cylinder_diameter)
}

/// Matrix entries as "i j value" rows with 1-based indices.
pub fn triplets_text(entries: &[(usize, usize, f64)]) -> String {
    let mut s = String::new();
    for (i, j, v) in entries {
        s.push_str(&format!("{} {} {}\n", i + 1, j + 1, fmt_g17(*v)));
    }
    s
}

fn table(header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory CSV");
    for row in rows {
        w.write_record(&row).expect("in-memory CSV");
    }
    finish(w)
}

pub fn spectrum_csv(spec: &Spectrum) -> String {
    table(
        &["k", "lambda", "residual"],
        spec.eigenvalues
            .iter()
            .zip(&spec.residuals)
            .enumerate()
            .map(|(k, (l, r))| vec![(k + 1).to_string(), fmt_g17(*l), fmt_g17(*r)]),
    )
}

/// Eigenvalue list without residuals (oracle output).
pub fn eigenvalues_csv(ev: &[f64]) -> String {
    table(
        &["k", "lambda"],
        ev.iter()
            .enumerate()
            .map(|(k, l)| vec![(k + 1).to_string(), fmt_g17(*l)]),
    )
}

/// Nodal values of a coefficient vector: `x,u` on a line mesh, `x,y,u` on a grid.
pub fn eigenfunction_csv(sys: &GalerkinSystem, c: &[f64]) -> String {
    let vals = sys.node_values(c);
    let mesh = sys.mesh();
    if mesh.dim() == 1 {
        table(
            &["x", "u"],
            vals.iter()
                .enumerate()
                .map(|(k, u)| vec![fmt_g17(mesh.node(k)[0]), fmt_g17(*u)]),
        )
    } else {
        table(
            &["x", "y", "u"],
            vals.iter().enumerate().map(|(k, u)| {
                let p = mesh.node(k);
                vec![fmt_g17(p[0]), fmt_g17(p[1]), fmt_g17(*u)]
            }),
        )
    }
}

pub fn profile_csv(p: &BallProfile) -> String {
    table(
        &["r", "sup_mass", "unreliable"],
        p.radii
            .iter()
            .zip(&p.sup_mass)
            .zip(&p.unreliable)
            .map(|((r, m), u)| vec![fmt_g17(*r), fmt_g17(*m), u.to_string()]),
    )
}

pub fn mazja_csv(m: &MazjaReport) -> String {
    table(
        &["delta", "band_sup", "small_scale_sup"],
        m.delta_ladder
            .iter()
            .zip(&m.band_sup)
            .zip(&m.small_scale_sup)
            .map(|((d, b), s)| vec![fmt_g17(*d), fmt_g17(*b), fmt_g17(*s)]),
    )
}

pub fn weyl_csv(w: &WeylFit) -> String {
    table(
        &["lambda", "count"],
        w.table.iter().map(|(l, n)| vec![fmt_g17(*l), n.to_string()]),
    )
}
