//! Numerical toolkit for Kreĭn-Feller operators Δ_μ defined by fractal measures.
//!
//! Measures come from iterated function systems ([`ifs`], [`measure`]), their
//! L∞-dimensions and regularity conditions are estimated in [`dimension`],
//! compactness criteria live in [`embedding`], and the Dirichlet spectrum is
//! computed by [`operator`]. [`geometry`] holds the constant-curvature model
//! space formulas.

// `!(x > 0.0)` is used on purpose so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// indexed loops read closer to the matrix formulas
#![allow(clippy::needless_range_loop)]

pub mod dimension;
pub mod embedding;
pub mod error;
pub mod geometry;
pub mod ifs;
pub mod io;
pub mod measure;
pub mod operator;
pub mod point;

pub use error::{Error, ErrorClass, Result};
pub use ifs::{BoxSet, Conformal1D, ConformalKind, ContractionMap, CylinderCode, IFSystem, Similitude};
pub use measure::{ball_mass, discretize, BallIndex, DiscretizeOptions, MeasureApprox, Representative};
pub use point::Point;
