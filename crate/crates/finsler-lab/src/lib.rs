//! Numerical engine for Randers and Riemannian metrics: exact derivatives by
//! truncated Taylor jets, curvature and non-Riemannian quantities, a catalog
//! of projectively flat families with reference closed forms, geodesic
//! integration, and a residual-based identity verifier.
//!
//! The `examples/` directory is the front door: one runnable example per
//! capability. The `finsler-lab` binary exposes the same functionality as
//! `eval`, `verify`, `geodesic`, `scan` and `catalog` subcommands.

pub mod catalog;
pub mod error;
pub mod fd;
pub mod geometry;
pub mod jet;
pub mod linalg;
pub mod nonriemannian;
pub mod geodesic;
pub mod quad;
pub mod randers;
pub mod sample;
pub mod scalar;

pub use catalog::{Family, Metric, MetricSpec, Sign};
pub use error::{Error, Result};
pub use geometry::{
    curvature_report, flag_curvature, fundamental_tensor, riemann, scalar_curvature, spray,
    CurvatureReport, FlagCurvatureValue, PointState,
};
pub use jet::{seed, seed_vars, Jet};
pub use scalar::Scalar;
