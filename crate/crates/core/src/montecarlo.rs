//! Samplers for the distribution families of the separation theorems and
//! Monte Carlo experiments checking the theorem bounds.
//!
//! Every draw comes from a ChaCha8 stream selected by `(seed, stream)`.
//! Trial `t` of an experiment always reads stream `t`, so results do not
//! depend on how trials are scheduled across threads.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baselines::{self, BallParams, BaselineError, CubeParams, NoisyParams};
use crate::dataset::DataMatrix;
use crate::linalg::{dot, norm};
use crate::separability::{is_fisher_separable_set, p_y_values, point_separable_from_rest};

/// Stream reserved for auxiliary draws such as random cluster centers.
pub const AUX_STREAM: u64 = u64::MAX;

#[derive(Debug, Error, PartialEq)]
pub enum MonteCarloError {
    #[error("invalid sampler spec: {0}")]
    InvalidSpec(String),
    #[error("bound {0} is vacuous; nothing to verify")]
    VacuousBound(f64),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
}

fn invalid(msg: impl Into<String>) -> MonteCarloError {
    MonteCarloError::InvalidSpec(msg.into())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    UniformBall,
    UniformSphere,
    /// i.i.d. coordinates uniform on a centred interval of width
    /// `1 / density_bound`. With `scaled`, the cube is shrunk to side
    /// `sqrt(4/n)`.
    CubeProduct {
        density_bound: f64,
        #[serde(default)]
        scaled: bool,
    },
    Gaussian,
    /// Point `i` is uniform in the ball of radius `epsilon` around
    /// `centers[i % centers.len()]`.
    PerturbedClusters { centers: Vec<Vec<f64>>, epsilon: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerSpec {
    #[serde(flatten)]
    pub family: Family,
    pub n: usize,
    pub seed: u64,
}

impl SamplerSpec {
    pub fn new(family: Family, n: usize, seed: u64) -> Self {
        Self { family, n, seed }
    }

    pub fn validate(&self) -> Result<(), MonteCarloError> {
        if self.n == 0 {
            return Err(invalid("dimension must be positive"));
        }
        match &self.family {
            Family::CubeProduct { density_bound, .. } => {
                if !(*density_bound >= 1.0 && density_bound.is_finite()) {
                    return Err(invalid(format!(
                        "cube density bound {density_bound} must be finite and >= 1"
                    )));
                }
            }
            Family::PerturbedClusters { centers, epsilon } => {
                if !(*epsilon >= 0.0 && *epsilon < 1.0) {
                    return Err(invalid(format!("epsilon = {epsilon} outside [0, 1)")));
                }
                if centers.is_empty() {
                    return Err(invalid("no cluster centers"));
                }
                for (i, c) in centers.iter().enumerate() {
                    if c.len() != self.n {
                        return Err(invalid(format!(
                            "center {i} has dimension {}, expected {}",
                            c.len(),
                            self.n
                        )));
                    }
                    if norm(c) > 1.0 - epsilon + 1e-12 {
                        return Err(invalid(format!(
                            "center {i} lies outside the ball of radius 1 - epsilon"
                        )));
                    }
                }
            }
            _ => {}
        }
        Ok(())
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }
}

fn gaussian_into(rng: &mut ChaCha8Rng, out: &mut [f64]) {
    for v in out.iter_mut() {
        *v = rng.sample(StandardNormal);
    }
}

/// Unit vector uniformly distributed on the sphere.
fn sphere_into(rng: &mut ChaCha8Rng, out: &mut [f64]) {
    loop {
        gaussian_into(rng, out);
        let r = norm(out);
        if r > 0.0 {
            out.iter_mut().for_each(|v| *v /= r);
            return;
        }
    }
}

fn ball_into(rng: &mut ChaCha8Rng, out: &mut [f64]) {
    sphere_into(rng, out);
    let u: f64 = rng.random();
    let radius = u.powf(1.0 / out.len() as f64);
    out.iter_mut().for_each(|v| *v *= radius);
}

/// `count` draws from the spec, stream 0.
pub fn sample(spec: &SamplerSpec, count: usize) -> Result<DataMatrix, MonteCarloError> {
    sample_with_stream(spec, count, 0)
}

/// `count` draws from the given stream of the spec's generator.
pub fn sample_with_stream(
    spec: &SamplerSpec,
    count: usize,
    stream: u64,
) -> Result<DataMatrix, MonteCarloError> {
    spec.validate()?;
    let n = spec.n;
    let mut rng = spec.rng(stream);
    let mut values = vec![0.0; count * n];
    for (i, row) in values.chunks_exact_mut(n.max(1)).enumerate().take(count) {
        match &spec.family {
            Family::UniformBall => ball_into(&mut rng, row),
            Family::UniformSphere => sphere_into(&mut rng, row),
            Family::Gaussian => gaussian_into(&mut rng, row),
            Family::CubeProduct { density_bound, scaled } => {
                let side = if *scaled { (4.0 / n as f64).sqrt() } else { 1.0 };
                let half = 0.5 * side / density_bound;
                for v in row.iter_mut() {
                    *v = rng.random_range(-half..half);
                }
            }
            Family::PerturbedClusters { centers, epsilon } => {
                ball_into(&mut rng, row);
                let c = &centers[i % centers.len()];
                for (v, ci) in row.iter_mut().zip(c) {
                    *v = ci + epsilon * *v;
                }
            }
        }
    }
    DataMatrix::new(count, n, values).map_err(|e| invalid(e.to_string()))
}

/// `count` centers in a random `subspace_dim`-dimensional subspace of
/// `R^n`, uniform in the ball of radius `radius` within that subspace.
pub fn subspace_centers(
    n: usize,
    subspace_dim: usize,
    count: usize,
    radius: f64,
    seed: u64,
) -> Result<Vec<Vec<f64>>, MonteCarloError> {
    if subspace_dim == 0 || subspace_dim > n {
        return Err(invalid(format!(
            "subspace dimension {subspace_dim} must lie in 1..={n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(AUX_STREAM);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(subspace_dim);
    while basis.len() < subspace_dim {
        let mut v = vec![0.0; n];
        gaussian_into(&mut rng, &mut v);
        for b in &basis {
            let p = dot(&v, b);
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= p * y);
        }
        let r = norm(&v);
        if r > 1e-8 {
            v.iter_mut().for_each(|x| *x /= r);
            basis.push(v);
        }
    }
    let mut coef = vec![0.0; subspace_dim];
    Ok((0..count)
        .map(|_| {
            ball_into(&mut rng, &mut coef);
            let mut c = vec![0.0; n];
            for (a, b) in coef.iter().zip(&basis) {
                c.iter_mut().zip(b).for_each(|(x, y)| *x += radius * a * y);
            }
            c
        })
        .collect())
}

/// What a trial checks on its sampled set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    /// Every point separable from every other.
    AllPairs { alpha: f64 },
    /// The last point separable from all the others.
    LastPoint { alpha: f64 },
    /// Every point separable from all others, with inner products taken
    /// relative to the point's own cluster center.
    ClusterCentered { alpha: f64 },
}

impl Event {
    fn alpha(self) -> f64 {
        match self {
            Event::AllPairs { alpha } | Event::LastPoint { alpha } | Event::ClusterCentered { alpha } => {
                alpha
            }
        }
    }

    fn holds(self, spec: &SamplerSpec, data: &DataMatrix) -> bool {
        let m = data.n_points();
        match self {
            Event::AllPairs { alpha } => is_fisher_separable_set(data, alpha),
            Event::LastPoint { alpha } => m == 0 || point_separable_from_rest(data, m - 1, alpha, None),
            Event::ClusterCentered { alpha } => {
                let Family::PerturbedClusters { centers, .. } = &spec.family else {
                    unreachable!("validated by the caller")
                };
                (0..m).all(|i| {
                    point_separable_from_rest(data, i, alpha, Some(&centers[i % centers.len()]))
                })
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub trials: u64,
    pub successes: u64,
    pub empirical_rate: f64,
    /// Clamped theorem bound, when the experiment has one.
    pub theoretical_bound: Option<f64>,
    pub seed: u64,
    /// Seconds; kept out of serialized output so reruns compare equal.
    #[serde(skip)]
    pub wall_time: f64,
}

/// Runs `trials` independent trials of `event` on sets of `m` points.
pub fn estimate_event(
    spec: &SamplerSpec,
    m: usize,
    event: Event,
    trials: u64,
) -> Result<ExperimentResult, MonteCarloError> {
    spec.validate()?;
    if trials == 0 {
        return Err(invalid("trials must be at least 1"));
    }
    let alpha = event.alpha();
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(invalid(format!("alpha = {alpha} outside (0, 1]")));
    }
    if matches!(event, Event::ClusterCentered { .. })
        && !matches!(spec.family, Family::PerturbedClusters { .. })
    {
        return Err(invalid("cluster-centered event needs the perturbed_clusters family"));
    }
    let start = Instant::now();
    let successes = (0..trials)
        .into_par_iter()
        .map(|t| {
            let data = sample_with_stream(spec, m, t).expect("spec validated");
            u64::from(event.holds(spec, &data))
        })
        .sum::<u64>();
    Ok(ExperimentResult {
        trials,
        successes,
        empirical_rate: successes as f64 / trials as f64,
        theoretical_bound: None,
        seed: spec.seed,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

/// Fraction of trials in which the sampled `m`-set is Fisher-separable.
pub fn estimate_set_separability(
    spec: &SamplerSpec,
    m: usize,
    alpha: f64,
    trials: u64,
) -> Result<ExperimentResult, MonteCarloError> {
    estimate_event(spec, m, Event::AllPairs { alpha }, trials)
}

/// How each `p_y` sample is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PyEstimator {
    /// Inseparable fraction among the other `M - 1` points of the trial.
    Empirical,
    /// `(|y|/2)^n`, exact for the uniform ball at alpha = 1.
    BallAlpha1,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<u64>,
}

impl Histogram {
    /// Equal-width bins on `[lo, hi]`; values outside are clamped into the
    /// end bins.
    pub fn build(values: &[f64], bins: usize, lo: f64, hi: f64) -> Self {
        let mut counts = vec![0u64; bins.max(1)];
        let width = (hi - lo) / counts.len() as f64;
        for &v in values {
            let idx = if width > 0.0 { ((v - lo) / width).floor() } else { 0.0 };
            let idx = (idx.max(0.0) as usize).min(counts.len() - 1);
            counts[idx] += 1;
        }
        Self { lo, hi, counts }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PyDistribution {
    pub samples: Vec<f64>,
    pub mean: f64,
    pub variance: f64,
    pub histogram: Histogram,
}

/// Pools `p_y` samples over `trials` sets of `m` points.
///
/// The histogram spans `[0, range_hi]`, or `[0, max sample]` when no upper
/// edge is given.
pub fn estimate_p_y_distribution(
    spec: &SamplerSpec,
    m: usize,
    alpha: f64,
    trials: u64,
    estimator: PyEstimator,
    bins: usize,
    range_hi: Option<f64>,
) -> Result<PyDistribution, MonteCarloError> {
    spec.validate()?;
    if m < 2 && estimator == PyEstimator::Empirical {
        return Err(invalid("need at least 2 points per trial"));
    }
    let n = spec.n as f64;
    let per_trial: Vec<Vec<f64>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let data = sample_with_stream(spec, m, t).expect("spec validated");
            match estimator {
                PyEstimator::Empirical => p_y_values(&data, alpha).expect("m >= 2"),
                PyEstimator::BallAlpha1 => data.rows().map(|y| (0.5 * norm(y)).powf(n)).collect(),
            }
        })
        .collect();
    let samples: Vec<f64> = per_trial.into_iter().flatten().collect();
    let count = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / count;
    let variance = if samples.len() > 1 {
        samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (count - 1.0)
    } else {
        0.0
    };
    let hi = range_hi.unwrap_or_else(|| samples.iter().cloned().fold(0.0, f64::max));
    let histogram = Histogram::build(&samples, bins, 0.0, hi);
    Ok(PyDistribution {
        samples,
        mean,
        variance,
        histogram,
    })
}

/// Kolmogorov-Smirnov distance between the empirical law of `samples` and
/// a continuous CDF.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let m = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / m).abs().max(((i + 1) as f64 / m - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Theorems with a Monte Carlo check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "theorem", rename_all = "snake_case")]
pub enum TheoremCase {
    /// One point separated from the rest, uniform ball.
    BallSingle { n: u32, m: u64, r: f64 },
    /// Whole set separable, uniform ball.
    BallPairs { n: u32, m: u64, r: f64 },
    /// Whole set separable, centred uniform product in the cube.
    CubePairs { n: u32, m: u64, delta: f64, density_bound: f64 },
    /// Perturbed clusters with centers in a random low-dimensional
    /// subspace, separability relative to each cluster center.
    Noisy {
        n: u32,
        m: u64,
        epsilon: f64,
        delta: f64,
        subspace_dim: usize,
    },
}

impl TheoremCase {
    /// Raw and clamped bound for the case.
    pub fn bound(&self) -> Result<baselines::BoundValue, MonteCarloError> {
        Ok(match *self {
            TheoremCase::BallSingle { n, m, r } => {
                baselines::ball_theorem_bounds(&BallParams { n, m, r })?.single
            }
            TheoremCase::BallPairs { n, m, r } => {
                baselines::ball_theorem_bounds(&BallParams { n, m, r })?.all_pairs
            }
            TheoremCase::CubePairs { n, m, delta, density_bound } => {
                baselines::cube_theorem_bounds(&cube_params(n, m, delta, density_bound))?.all_pairs
            }
            TheoremCase::Noisy { n, m, epsilon, delta, .. } => {
                baselines::noisy_bound(&NoisyParams { n, m, epsilon, delta })?
            }
        })
    }

    /// Sampler and event realising the theorem's setting.
    pub fn experiment(&self, seed: u64) -> Result<(SamplerSpec, usize, Event), MonteCarloError> {
        Ok(match *self {
            TheoremCase::BallSingle { n, m, .. } => (
                SamplerSpec::new(Family::UniformBall, n as usize, seed),
                m as usize,
                Event::LastPoint { alpha: 1.0 },
            ),
            TheoremCase::BallPairs { n, m, .. } => (
                SamplerSpec::new(Family::UniformBall, n as usize, seed),
                m as usize,
                Event::AllPairs { alpha: 1.0 },
            ),
            TheoremCase::CubePairs { n, m, density_bound, .. } => (
                SamplerSpec::new(
                    Family::CubeProduct { density_bound, scaled: false },
                    n as usize,
                    seed,
                ),
                m as usize,
                Event::AllPairs { alpha: 1.0 },
            ),
            TheoremCase::Noisy { n, m, epsilon, subspace_dim, .. } => {
                let centers =
                    subspace_centers(n as usize, subspace_dim, m as usize, 1.0 - epsilon, seed)?;
                (
                    SamplerSpec::new(Family::PerturbedClusters { centers, epsilon }, n as usize, seed),
                    m as usize,
                    Event::ClusterCentered { alpha: 1.0 },
                )
            }
        })
    }
}

/// Cube parameters for coordinates uniform on a centred interval of width
/// `1/density_bound`: `σ0² = w²/12` and `R0² = n σ0²`.
pub fn cube_params(n: u32, m: u64, delta: f64, density_bound: f64) -> CubeParams {
    let w = 1.0 / density_bound;
    let sigma0 = w / 12f64.sqrt();
    CubeParams {
        n,
        m,
        delta,
        sigma0,
        r0_sq: n as f64 * sigma0 * sigma0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verification {
    pub pass: bool,
    /// Raw bound before clamping.
    pub raw_bound: f64,
    /// `bound - 3 sqrt(bound (1 - bound) / trials)`.
    pub threshold: f64,
    pub result: ExperimentResult,
}

/// One-sided check `rate >= bound - 3 binomial standard deviations`.
pub fn binomial_floor(bound: f64, trials: u64) -> f64 {
    bound - 3.0 * (bound * (1.0 - bound) / trials as f64).sqrt()
}

/// Checks a theorem bound against its Monte Carlo rate.
pub fn verify_bound(case: &TheoremCase, trials: u64, seed: u64) -> Result<Verification, MonteCarloError> {
    let bound = case.bound()?;
    if bound.vacuous {
        return Err(MonteCarloError::VacuousBound(bound.raw));
    }
    let (spec, m, event) = case.experiment(seed)?;
    let mut result = estimate_event(&spec, m, event, trials)?;
    result.theoretical_bound = Some(bound.value);
    let threshold = binomial_floor(bound.value, trials);
    Ok(Verification {
        pass: result.empirical_rate >= threshold,
        raw_bound: bound.raw,
        threshold,
        result,
    })
}
