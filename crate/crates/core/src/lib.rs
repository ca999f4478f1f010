//! Fisher-separability toolkit for high-dimensional point clouds.
//!
//! The crate measures how well individual points of a cloud can be cut off
//! from the rest by the one-shot linear rule `(x, y) <= alpha * (x, x)`
//! (evaluated in whitened coordinates), evaluates the analytic separability
//! formulas and separation-theorem bounds for standard distribution
//! families, checks those bounds by Monte Carlo, and builds one-shot
//! correctors that flag inputs resembling known error situations of a
//! legacy classifier.
//!
//! Module map:
//!
//! - [`dataset`]: CSV ingestion into immutable [`dataset::DataMatrix`] clouds.
//! - [`preprocess`]: centering, scaling, PCA with multicollinearity control,
//!   whitening and optional projection onto the unit sphere.
//! - [`separability`]: pairwise tests, excluded balls, empirical `p_y` and
//!   per-threshold reports.
//! - [`baselines`]: closed-form formulas and bound calculators.
//! - [`montecarlo`]: samplers and empirical verification of the bounds.
//! - [`corrector`]: Fisher-discriminant correctors and cascades.
//! - [`cli`]: the `sepkit` command-line front end.

pub mod baselines;
pub mod cli;
pub mod corrector;
pub mod dataset;
mod linalg;
pub mod montecarlo;
pub mod preprocess;
pub mod separability;

pub use corrector::{Cascade, Corrector, CorrectorEval};
pub use dataset::{DataMatrix, LabeledDataset};
pub use preprocess::{PreprocessConfig, PreprocessModel, SelectionRule};
pub use separability::{SeparabilityReport, Threshold};
