//! Centering, unit-variance scaling, PCA with multicollinearity control,
//! whitening and optional projection onto the unit sphere.
//!
//! The eigendecomposition is taken of the covariance of the standardized
//! data, i.e. the correlation matrix. Components are kept while
//! `lambda >= 0.1 * lambda_max` by default, which bounds the condition
//! number of the retained spectrum by 10.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{DataMatrix, DatasetError};
use crate::linalg::{dot, norm};

/// Eigenvalues below this fraction of the largest are treated as zero.
pub const EIGEN_ZERO_RATIO: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum PreprocessError {
    #[error("feature {index} has zero variance")]
    ZeroVarianceFeature { index: usize },
    #[error("covariance has no eigenvalue above the selection threshold")]
    DegenerateCovariance,
    #[error("need at least 2 points to fit, got {0}")]
    TooFewPoints(usize),
    #[error("input has dimension {found}, model expects {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("cannot project the zero vector onto the unit sphere")]
    ZeroVectorOnSphere,
    #[error("invalid selection rule: {0}")]
    InvalidRule(String),
    #[error("eigendecomposition did not converge")]
    EigenFailure,
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

/// Which principal components survive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum SelectionRule {
    /// Keep components with `lambda >= fraction * lambda_max`.
    RelativeEigenvalue { fraction: f64 },
    /// Keep the leading `count` components (capped by the nonzero spectrum).
    FixedCount { count: usize },
    /// Keep every component above the numerical zero threshold.
    AllNonzero,
}

impl Default for SelectionRule {
    fn default() -> Self {
        SelectionRule::RelativeEigenvalue { fraction: 0.1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PreprocessConfig {
    pub selection: SelectionRule,
    pub whiten: bool,
    pub sphere_project: bool,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            selection: SelectionRule::default(),
            whiten: true,
            sphere_project: false,
        }
    }
}

/// A fitted preprocessing pipeline.
///
/// `basis` is stored row-major as an `n x k` matrix whose columns are the
/// selected principal directions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessModel {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
    pub eigenvalues: Vec<f64>,
    pub basis: Vec<f64>,
    pub input_dim: usize,
    pub k_selected: usize,
    pub whiten: bool,
    pub sphere_project: bool,
    pub selection: SelectionRule,
    /// Full descending spectrum of the correlation matrix.
    pub spectrum: Vec<f64>,
}

/// Number of leading eigenvalues kept by `rule` out of a descending spectrum.
pub fn select_components(spectrum: &[f64], rule: SelectionRule) -> Result<usize, PreprocessError> {
    let lambda_max = spectrum.first().copied().unwrap_or(0.0);
    if lambda_max <= 0.0 {
        return Err(PreprocessError::DegenerateCovariance);
    }
    let nonzero = spectrum
        .iter()
        .take_while(|&&l| l > EIGEN_ZERO_RATIO * lambda_max)
        .count();
    let k = match rule {
        SelectionRule::RelativeEigenvalue { fraction } => {
            if !(fraction > 0.0 && fraction <= 1.0) {
                return Err(PreprocessError::InvalidRule(format!(
                    "fraction {fraction} outside (0, 1]"
                )));
            }
            spectrum[..nonzero]
                .iter()
                .take_while(|&&l| l >= fraction * lambda_max)
                .count()
        }
        SelectionRule::FixedCount { count } => {
            if count == 0 {
                return Err(PreprocessError::InvalidRule("count must be positive".into()));
            }
            count.min(nonzero)
        }
        SelectionRule::AllNonzero => nonzero,
    };
    if k == 0 {
        return Err(PreprocessError::DegenerateCovariance);
    }
    Ok(k)
}

impl PreprocessModel {
    pub fn fit(data: &DataMatrix, config: &PreprocessConfig) -> Result<Self, PreprocessError> {
        let m = data.n_points();
        let n = data.dim();
        if m < 2 {
            return Err(PreprocessError::TooFewPoints(m));
        }
        for j in 0..n {
            let first = data.row(0)[j];
            if data.rows().all(|r| r[j] == first) {
                return Err(PreprocessError::ZeroVarianceFeature { index: j });
            }
        }

        let mean = data.mean();
        let cov = data.covariance();
        let scale: Vec<f64> = (0..n).map(|j| cov[j * n + j].sqrt()).collect();
        if let Some(index) = scale.iter().position(|&s| !(s > 0.0)) {
            return Err(PreprocessError::ZeroVarianceFeature { index });
        }
        let corr = DMatrix::from_fn(n, n, |a, b| cov[a * n + b] / (scale[a] * scale[b]));

        let eig = SymmetricEigen::try_new(corr, f64::EPSILON, 0)
            .ok_or(PreprocessError::EigenFailure)?;
        let mut order: Vec<usize> = (0..n).collect();
        // stable: equal eigenvalues keep the solver's order
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let spectrum: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();

        let k = select_components(&spectrum, config.selection)?;
        log::info!(
            "component selection {:?}: kept {k} of {n} (lambda_max = {:.6e})",
            config.selection,
            spectrum[0]
        );

        let mut basis = vec![0.0; n * k];
        for (c, &src) in order.iter().take(k).enumerate() {
            let v = eig.eigenvectors.column(src);
            // sign convention: largest-magnitude entry positive
            let pivot = (0..n)
                .max_by(|&a, &b| v[a].abs().total_cmp(&v[b].abs()))
                .unwrap_or(0);
            let sign = if v[pivot] < 0.0 { -1.0 } else { 1.0 };
            for r in 0..n {
                basis[r * k + c] = sign * v[r];
            }
        }
        orthonormalize_columns(&mut basis, n, k);

        Ok(Self {
            mean,
            scale,
            eigenvalues: spectrum[..k].to_vec(),
            basis,
            input_dim: n,
            k_selected: k,
            whiten: config.whiten,
            sphere_project: config.sphere_project,
            selection: config.selection,
            spectrum,
        })
    }

    pub fn output_dim(&self) -> usize {
        self.k_selected
    }

    /// `lambda_max / lambda_min` over the retained components.
    pub fn condition_number(&self) -> f64 {
        self.eigenvalues[0] / self.eigenvalues[self.k_selected - 1]
    }

    pub fn transform_point(&self, x: &[f64]) -> Result<Vec<f64>, PreprocessError> {
        let mut out = vec![0.0; self.k_selected];
        self.transform_into(x, &mut out)?;
        Ok(out)
    }

    fn transform_into(&self, x: &[f64], out: &mut [f64]) -> Result<(), PreprocessError> {
        let n = self.input_dim;
        if x.len() != n {
            return Err(PreprocessError::DimensionMismatch {
                expected: n,
                found: x.len(),
            });
        }
        let k = self.k_selected;
        let z: Vec<f64> = x
            .iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((v, m), s)| (v - m) / s)
            .collect();
        for (c, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (r, zr) in z.iter().enumerate() {
                acc += zr * self.basis[r * k + c];
            }
            *o = if self.whiten {
                acc / self.eigenvalues[c].sqrt()
            } else {
                acc
            };
        }
        if self.sphere_project {
            let len = norm(out);
            if len == 0.0 {
                return Err(PreprocessError::ZeroVectorOnSphere);
            }
            out.iter_mut().for_each(|v| *v /= len);
        }
        Ok(())
    }

    /// Transforms every row; rows are processed in parallel.
    pub fn transform(&self, data: &DataMatrix) -> Result<DataMatrix, PreprocessError> {
        if data.dim() != self.input_dim {
            return Err(PreprocessError::DimensionMismatch {
                expected: self.input_dim,
                found: data.dim(),
            });
        }
        let k = self.k_selected;
        let mut values = vec![0.0; data.n_points() * k];
        values
            .par_chunks_mut(k)
            .zip(data.as_slice().par_chunks(self.input_dim))
            .try_for_each(|(out, x)| self.transform_into(x, out))?;
        Ok(DataMatrix::new(data.n_points(), k, values)?)
    }

    /// Cumulative explained-variance fraction over the retained components.
    pub fn explained_variance(&self) -> Vec<f64> {
        cumulative_fraction(&self.eigenvalues)
    }

    /// Cumulative explained-variance fraction over the full spectrum.
    pub fn spectrum_explained_variance(&self) -> Vec<f64> {
        let positive: Vec<f64> = self.spectrum.iter().map(|l| l.max(0.0)).collect();
        cumulative_fraction(&positive)
    }

    /// Column `c` of the basis.
    pub fn component(&self, c: usize) -> Vec<f64> {
        (0..self.input_dim)
            .map(|r| self.basis[r * self.k_selected + c])
            .collect()
    }
}

/// Running sums divided by the total; the last entry is exactly 1.
pub fn cumulative_fraction(values: &[f64]) -> Vec<f64> {
    let total: f64 = values.iter().sum();
    let mut acc = 0.0;
    let mut out: Vec<f64> = values
        .iter()
        .map(|v| {
            acc += v;
            (acc / total).min(1.0)
        })
        .collect();
    if let Some(last) = out.last_mut() {
        *last = 1.0;
    }
    out
}

/// One modified Gram-Schmidt sweep over the columns of a row-major `n x k` matrix.
fn orthonormalize_columns(basis: &mut [f64], n: usize, k: usize) {
    for c in 0..k {
        for p in 0..c {
            let proj: f64 = (0..n).map(|r| basis[r * k + c] * basis[r * k + p]).sum();
            for r in 0..n {
                basis[r * k + c] -= proj * basis[r * k + p];
            }
        }
        let len: f64 = (0..n).map(|r| basis[r * k + c].powi(2)).sum::<f64>().sqrt();
        for r in 0..n {
            basis[r * k + c] /= len;
        }
    }
}

/// Largest entrywise deviation of `basis^T basis` from the identity.
pub fn orthonormality_error(model: &PreprocessModel) -> f64 {
    let k = model.k_selected;
    let cols: Vec<Vec<f64>> = (0..k).map(|c| model.component(c)).collect();
    let mut worst: f64 = 0.0;
    for a in 0..k {
        for b in 0..k {
            let target = if a == b { 1.0 } else { 0.0 };
            worst = worst.max((dot(&cols[a], &cols[b]) - target).abs());
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn gaussian(m: usize, n: usize, seed: u64) -> DataMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values = (0..m * n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        DataMatrix::new(m, n, values).unwrap()
    }

    fn max_cov_error(data: &DataMatrix) -> f64 {
        let k = data.dim();
        let cov = data.covariance();
        let mut worst: f64 = 0.0;
        for a in 0..k {
            for b in 0..k {
                let target = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((cov[a * k + b] - target).abs());
            }
        }
        worst
    }

    #[test]
    fn threshold_rule_on_known_spectrum() {
        let rule = SelectionRule::default();
        assert_eq!(select_components(&[4.0, 1.0, 0.1], rule).unwrap(), 2);
        assert_eq!(select_components(&[4.0, 0.4, 0.39], rule).unwrap(), 2);
        assert_eq!(
            select_components(&[4.0, 1.0, 0.1], SelectionRule::FixedCount { count: 5 }).unwrap(),
            3
        );
        assert!(select_components(&[0.0, 0.0], rule).is_err());
    }

    #[test]
    fn two_points_center_exactly() {
        let data = DataMatrix::from_rows(&[[1.0], [3.0]]).unwrap();
        let model = PreprocessModel::fit(&data, &PreprocessConfig::default()).unwrap();
        let out = model.transform(&data).unwrap();
        assert_eq!(out.row(0)[0] + out.row(1)[0], 0.0);
        assert_eq!(model.transform_point(&[2.0]).unwrap(), vec![0.0]);
    }

    #[test]
    fn constant_column_rejected() {
        let data = DataMatrix::from_rows(&[[1.0, 0.1], [2.0, 0.1], [3.0, 0.1]]).unwrap();
        let err = PreprocessModel::fit(&data, &PreprocessConfig::default()).unwrap_err();
        assert!(matches!(err, PreprocessError::ZeroVarianceFeature { index: 1 }));
    }

    #[test]
    fn whitened_covariance_is_identity() {
        let data = gaussian(300, 8, 7);
        let model = PreprocessModel::fit(&data, &PreprocessConfig::default()).unwrap();
        assert!(orthonormality_error(&model) < 1e-10);
        let out = model.transform(&data).unwrap();
        assert!(max_cov_error(&out) < 1e-8, "{}", max_cov_error(&out));
        assert!(model.condition_number() <= 10.0);
        for m in out.mean() {
            assert!(m.abs() < 1e-12);
        }
    }

    #[test]
    fn mean_maps_to_zero() {
        let data = gaussian(50, 4, 3);
        let model = PreprocessModel::fit(&data, &PreprocessConfig::default()).unwrap();
        let t = model.transform_point(&model.mean.clone()).unwrap();
        assert!(t.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn sphere_projection_norms() {
        let data = gaussian(100, 5, 11);
        let config = PreprocessConfig {
            sphere_project: true,
            ..Default::default()
        };
        let model = PreprocessModel::fit(&data, &config).unwrap();
        let out = model.transform(&data).unwrap();
        for r in out.rows() {
            assert!((norm(r) - 1.0).abs() < 1e-12);
        }
        let mean = model.mean.clone();
        assert!(matches!(
            model.transform_point(&mean),
            Err(PreprocessError::ZeroVectorOnSphere)
        ));
    }

    #[test]
    fn dimension_mismatch() {
        let data = gaussian(20, 3, 1);
        let model = PreprocessModel::fit(&data, &PreprocessConfig::default()).unwrap();
        assert!(matches!(
            model.transform_point(&[1.0, 2.0]),
            Err(PreprocessError::DimensionMismatch { expected: 3, found: 2 })
        ));
    }

    #[test]
    fn explained_variance_examples() {
        assert_eq!(cumulative_fraction(&[3.0, 1.0]), vec![0.75, 1.0]);
        assert_eq!(cumulative_fraction(&[2.0]), vec![1.0]);
        assert_eq!(cumulative_fraction(&[1.0; 4]), vec![0.25, 0.5, 0.75, 1.0]);
    }

    #[test]
    fn scale_equivariance() {
        let data = gaussian(80, 6, 5);
        let scaled = DataMatrix::new(80, 6, data.as_slice().iter().map(|v| v * 37.5).collect()).unwrap();
        let config = PreprocessConfig::default();
        let a = PreprocessModel::fit(&data, &config).unwrap().transform(&data).unwrap();
        let b = PreprocessModel::fit(&scaled, &config).unwrap().transform(&scaled).unwrap();
        for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
            assert!((x - y).abs() < 1e-8);
        }
    }

    #[test]
    fn collinear_feature_is_dropped() {
        // third column is almost a copy of the first: one eigenvalue near 0
        let base = gaussian(200, 2, 9);
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let rows: Vec<Vec<f64>> = base
            .rows()
            .map(|r| vec![r[0], r[1], r[0] + 1e-3 * rng.random::<f64>()])
            .collect();
        let data = DataMatrix::from_rows(&rows).unwrap();
        let model = PreprocessModel::fit(&data, &PreprocessConfig::default()).unwrap();
        assert_eq!(model.k_selected, 2);
        assert!(model.condition_number() < 10.0);
    }

    #[test]
    fn model_json_round_trip() {
        let data = gaussian(30, 3, 2);
        let model = PreprocessModel::fit(&data, &PreprocessConfig::default()).unwrap();
        let json = serde_json::to_string(&model).unwrap();
        let back: PreprocessModel = serde_json::from_str(&json).unwrap();
        assert_eq!(model, back);
    }
}
