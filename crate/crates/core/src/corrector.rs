//! One-shot Fisher correctors that flag inputs resembling known errors of a
//! legacy classifier, and cascades of them.
//!
//! A corrector whitens inputs with a model fitted on the correct-behaviour
//! cloud and flags `x` when `(w, T(x)) > α (w, w)`, where `w` is the
//! whitened centroid of the error points. Training is a fixed number of
//! passes over the data.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::DataMatrix;
use crate::linalg::{dot, norm};
use crate::preprocess::{PreprocessConfig, PreprocessError, PreprocessModel};

/// Whitened error centroids shorter than this are rejected.
pub const MIN_DIRECTION_NORM: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum CorrectorError {
    #[error("whitened error centroid has norm {0:e}; no direction to separate along")]
    DegenerateErrorCentroid(f64),
    #[error("cloud has {points} points; at least {needed} needed")]
    InsufficientCloud { points: usize, needed: usize },
    #[error("no error points given")]
    NoErrorPoints,
    #[error("threshold {0} outside (0, 1]")]
    InvalidThreshold(f64),
    #[error("input has dimension {found}, expected {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("cascade has no correctors")]
    EmptyCascade,
    #[error("holdout set is empty")]
    EmptyHoldout,
    #[error("{0} error ids given for {1} error points")]
    ErrorIdCount(usize, usize),
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Corrector {
    pub model: PreprocessModel,
    pub direction: Vec<f64>,
    pub threshold: f64,
    pub error_ids: Vec<String>,
}

/// `(w, t) > α (w, w)`.
fn decide(direction: &[f64], tx: &[f64], alpha: f64) -> bool {
    dot(direction, tx) > alpha * dot(direction, direction)
}

/// Trains a corrector with the default preprocessing (PCA with the
/// relative-eigenvalue rule, whitening, no sphere projection).
pub fn train_corrector(
    correct_cloud: &DataMatrix,
    error_points: &DataMatrix,
    alpha: f64,
) -> Result<Corrector, CorrectorError> {
    train_corrector_with(correct_cloud, error_points, alpha, &PreprocessConfig::default(), None)
}

/// Trains a corrector. `error_ids` defaults to the row numbers of
/// `error_points`.
pub fn train_corrector_with(
    correct_cloud: &DataMatrix,
    error_points: &DataMatrix,
    alpha: f64,
    config: &PreprocessConfig,
    error_ids: Option<Vec<String>>,
) -> Result<Corrector, CorrectorError> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(CorrectorError::InvalidThreshold(alpha));
    }
    if error_points.n_points() == 0 {
        return Err(CorrectorError::NoErrorPoints);
    }
    let dim = correct_cloud.dim();
    if error_points.dim() != dim {
        return Err(CorrectorError::DimensionMismatch {
            expected: dim,
            found: error_points.dim(),
        });
    }
    if correct_cloud.n_points() < dim + 1 {
        return Err(CorrectorError::InsufficientCloud {
            points: correct_cloud.n_points(),
            needed: dim + 1,
        });
    }
    let error_ids = match error_ids {
        Some(ids) if ids.len() != error_points.n_points() => {
            return Err(CorrectorError::ErrorIdCount(ids.len(), error_points.n_points()))
        }
        Some(ids) => ids,
        None => (0..error_points.n_points()).map(|i| i.to_string()).collect(),
    };

    let model = PreprocessModel::fit(correct_cloud, config)?;
    let whitened = model.transform(error_points)?;
    let direction = whitened.mean();
    let len = norm(&direction);
    if !(len >= MIN_DIRECTION_NORM) {
        return Err(CorrectorError::DegenerateErrorCentroid(len));
    }
    Ok(Corrector {
        model,
        direction,
        threshold: alpha,
        error_ids,
    })
}

impl Corrector {
    pub fn input_dim(&self) -> usize {
        self.model.input_dim
    }

    pub fn flag(&self, x: &[f64]) -> Result<bool, CorrectorError> {
        if x.len() != self.input_dim() {
            return Err(CorrectorError::DimensionMismatch {
                expected: self.input_dim(),
                found: x.len(),
            });
        }
        let tx = self.model.transform_point(x)?;
        Ok(decide(&self.direction, &tx, self.threshold))
    }
}

/// Outcome of a cascade: the index of the first corrector that flagged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CascadeDecision {
    pub flagged: bool,
    pub stage: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Cascade {
    pub correctors: Vec<Corrector>,
}

impl Cascade {
    pub fn new(correctors: Vec<Corrector>) -> Self {
        Self { correctors }
    }

    /// Appends a stage; the extended cascade is the new legacy system.
    pub fn push(&mut self, c: Corrector) {
        self.correctors.push(c);
    }

    pub fn apply(&self, x: &[f64]) -> Result<CascadeDecision, CorrectorError> {
        if self.correctors.is_empty() {
            return Err(CorrectorError::EmptyCascade);
        }
        for (i, c) in self.correctors.iter().enumerate() {
            if c.flag(x)? {
                return Ok(CascadeDecision {
                    flagged: true,
                    stage: Some(i),
                });
            }
        }
        Ok(CascadeDecision {
            flagged: false,
            stage: None,
        })
    }
}

/// Anything that flags points: a single corrector or a cascade.
pub trait Flagger: Sync {
    fn is_flagged(&self, x: &[f64]) -> Result<bool, CorrectorError>;
}

impl Flagger for Corrector {
    fn is_flagged(&self, x: &[f64]) -> Result<bool, CorrectorError> {
        self.flag(x)
    }
}

impl Flagger for Cascade {
    fn is_flagged(&self, x: &[f64]) -> Result<bool, CorrectorError> {
        Ok(self.apply(x)?.flagged)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrectorEval {
    /// Fraction of held-out error points flagged.
    pub detection_rate: f64,
    /// Fraction of held-out correct points flagged.
    pub damage_rate: f64,
}

/// Fraction of rows of `data` that `f` flags.
pub fn flag_rate<F: Flagger + ?Sized>(f: &F, data: &DataMatrix) -> Result<f64, CorrectorError> {
    if data.n_points() == 0 {
        return Err(CorrectorError::EmptyHoldout);
    }
    let hits = (0..data.n_points())
        .into_par_iter()
        .map(|i| f.is_flagged(data.row(i)).map(usize::from))
        .try_reduce(|| 0, |a, b| Ok(a + b))?;
    Ok(hits as f64 / data.n_points() as f64)
}

pub fn evaluate<F: Flagger + ?Sized>(
    f: &F,
    correct_holdout: &DataMatrix,
    error_holdout: &DataMatrix,
) -> Result<CorrectorEval, CorrectorError> {
    if correct_holdout.n_points() == 0 || error_holdout.n_points() == 0 {
        return Err(CorrectorError::EmptyHoldout);
    }
    Ok(CorrectorEval {
        detection_rate: flag_rate(f, error_holdout)?,
        damage_rate: flag_rate(f, correct_holdout)?,
    })
}

/// A saved corrector file holds either a single corrector or a cascade.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SavedCorrector {
    Cascade(Cascade),
    Single(Corrector),
}

impl SavedCorrector {
    pub fn into_cascade(self) -> Cascade {
        match self {
            SavedCorrector::Cascade(c) => c,
            SavedCorrector::Single(c) => Cascade::new(vec![c]),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::montecarlo::{sample, sample_with_stream, Family, SamplerSpec};
    use proptest::prelude::*;

    fn cloud(n: usize, m: usize, seed: u64) -> DataMatrix {
        sample(&SamplerSpec::new(Family::UniformBall, n, seed), m).unwrap()
    }

    fn point_at(n: usize, axis: usize, value: f64) -> DataMatrix {
        let mut v = vec![0.0; n];
        v[axis] = value;
        DataMatrix::from_rows(&[v]).unwrap()
    }

    #[test]
    fn far_error_point_is_isolated() {
        let n = 40;
        let train = cloud(n, 10_000, 1);
        let err = point_at(n, 0, 5.0);
        let c = train_corrector(&train, &err, 0.8).unwrap();
        assert!(c.flag(err.row(0)).unwrap());
        let holdout = sample_with_stream(&SamplerSpec::new(Family::UniformBall, n, 1), 10_000, 1).unwrap();
        let e = evaluate(&c, &holdout, &err).unwrap();
        assert_eq!(e.detection_rate, 1.0);
        assert!(e.damage_rate <= 0.01);
        assert!(flag_rate(&c, &train).unwrap() <= 0.01);
    }

    #[test]
    fn cloud_mean_is_never_flagged() {
        let train = cloud(6, 500, 2);
        let c = train_corrector(&train, &point_at(6, 1, 2.0), 0.1).unwrap();
        assert!(!c.flag(&train.mean()).unwrap());
    }

    #[test]
    fn degenerate_centroids() {
        let train = cloud(5, 300, 3);
        let mean = DataMatrix::from_rows(&[train.mean()]).unwrap();
        assert!(matches!(
            train_corrector(&train, &mean, 0.8),
            Err(CorrectorError::DegenerateErrorCentroid(_))
        ));
        let mu = train.mean();
        let d = [0.5, -0.2, 0.1, 0.3, 0.0];
        let a: Vec<f64> = mu.iter().zip(&d).map(|(m, x)| m + x).collect();
        let b: Vec<f64> = mu.iter().zip(&d).map(|(m, x)| m - x).collect();
        let pair = DataMatrix::from_rows(&[a, b]).unwrap();
        assert!(matches!(
            train_corrector(&train, &pair, 0.8),
            Err(CorrectorError::DegenerateErrorCentroid(_))
        ));
    }

    #[test]
    fn input_validation() {
        let train = cloud(5, 5, 4);
        assert!(matches!(
            train_corrector(&train, &point_at(5, 0, 3.0), 0.8),
            Err(CorrectorError::InsufficientCloud { points: 5, needed: 6 })
        ));
        let train = cloud(5, 100, 4);
        let c = train_corrector(&train, &point_at(5, 0, 3.0), 0.8).unwrap();
        assert!(matches!(c.flag(&[0.0; 4]), Err(CorrectorError::DimensionMismatch { .. })));
        assert!(matches!(
            Cascade::default().apply(&[0.0; 5]),
            Err(CorrectorError::EmptyCascade)
        ));
    }

    #[test]
    fn cascade_order_contract() {
        let n = 10;
        let train = cloud(n, 2000, 5);
        let c0 = train_corrector(&train, &point_at(n, 0, 3.0), 0.8).unwrap();
        let c1 = train_corrector(&train, &point_at(n, 1, 3.0), 0.8).unwrap();
        let c2 = train_corrector(&train, &point_at(n, 1, 3.5), 0.8).unwrap();
        let single = Cascade::new(vec![c0.clone()]);
        let x = point_at(n, 0, 3.0);
        assert_eq!(single.apply(x.row(0)).unwrap().flagged, c0.flag(x.row(0)).unwrap());

        let cascade = Cascade::new(vec![c0, c1, c2]);
        let y = point_at(n, 1, 3.2);
        assert!(cascade.correctors[1].flag(y.row(0)).unwrap());
        assert!(cascade.correctors[2].flag(y.row(0)).unwrap());
        assert_eq!(
            cascade.apply(y.row(0)).unwrap(),
            CascadeDecision { flagged: true, stage: Some(1) }
        );
        assert_eq!(
            cascade.apply(&train.mean()).unwrap(),
            CascadeDecision { flagged: false, stage: None }
        );
    }

    #[test]
    fn two_cluster_cascade_respects_union_bound() {
        let n = 20;
        let train = cloud(n, 5000, 6);
        let holdout = cloud(n, 5000, 7);
        let a = point_at(n, 0, 4.0);
        let b = point_at(n, 1, -4.0);
        let ca = train_corrector(&train, &a, 0.8).unwrap();
        let cb = train_corrector(&train, &b, 0.8).unwrap();
        let da = evaluate(&ca, &holdout, &a).unwrap().damage_rate;
        let db = evaluate(&cb, &holdout, &b).unwrap().damage_rate;
        let cascade = Cascade::new(vec![ca, cb]);
        assert_eq!(evaluate(&cascade, &holdout, &a).unwrap().detection_rate, 1.0);
        let eb = evaluate(&cascade, &holdout, &b).unwrap();
        assert_eq!(eb.detection_rate, 1.0);
        assert!(eb.damage_rate <= da + db);
    }

    #[test]
    fn json_round_trip() {
        let train = cloud(4, 200, 8);
        let c = train_corrector(&train, &point_at(4, 2, 2.0), 0.9).unwrap();
        let cascade = Cascade::new(vec![c.clone()]);
        let s: SavedCorrector = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(s, SavedCorrector::Single(c));
        let s: SavedCorrector = serde_json::from_str(&serde_json::to_string(&cascade).unwrap()).unwrap();
        assert_eq!(s.into_cascade(), cascade);
    }

    #[test]
    fn damage_falls_with_dimension() {
        let mut damages = Vec::new();
        for n in [10, 20, 40] {
            let train = cloud(n, 4000, 9);
            let holdout = cloud(n, 4000, 10);
            let c = train_corrector(&train, &point_at(n, 0, 0.5), 0.8).unwrap();
            damages.push(flag_rate(&c, &holdout).unwrap());
        }
        assert!(damages[0] > damages[1] && damages[1] > damages[2], "{damages:?}");
    }

    proptest! {
        // Scaling w by c rescales (w, T(x)) by c and (w, w) by c^2, so the
        // decision is preserved once the threshold is divided by c.
        #[test]
        fn direction_scaling_with_matching_threshold(
            w in proptest::collection::vec(-3.0f64..3.0, 5),
            t in proptest::collection::vec(-3.0f64..3.0, 5),
            alpha in 0.05f64..1.0,
            c in 0.25f64..4.0,
        ) {
            prop_assume!(norm(&w) > 1e-3);
            let scaled: Vec<f64> = w.iter().map(|v| v * c).collect();
            let lhs = dot(&w, &t);
            let rhs = alpha * dot(&w, &w);
            // skip inputs within rounding of the boundary
            prop_assume!((lhs - rhs).abs() > 1e-9 * (1.0 + rhs.abs()));
            prop_assert_eq!(decide(&w, &t, alpha), decide(&scaled, &t, alpha / c));
        }

        #[test]
        fn appending_never_changes_earlier_flags(seed in 0u64..1000) {
            let n = 8;
            let train = cloud(n, 400, seed);
            let probe = cloud(n, 200, seed + 10_000);
            let first = train_corrector(&train, &point_at(n, 0, 0.6), 0.5).unwrap();
            let second = train_corrector(&train, &point_at(n, 1, 0.6), 0.5).unwrap();
            let one = Cascade::new(vec![first.clone()]);
            let two = Cascade::new(vec![first, second]);
            for x in probe.rows() {
                let before = one.apply(x).unwrap();
                if before.flagged {
                    prop_assert_eq!(two.apply(x).unwrap(), before);
                }
            }
        }
    }
}
