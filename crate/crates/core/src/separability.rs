//! Fisher-separability of points in (whitened) point clouds.
//!
//! Point `x` is *inseparable* from `y` at threshold `alpha` when
//! `(x, y) > alpha * (x, x)`; equality counts as separable. Equivalently,
//! `x` lies in the open excluded ball of `y`, centred at `y / (2 alpha)` with
//! radius `|y| / (2 alpha)`. The relation is not symmetric.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{class_indices, DataMatrix, LabeledDataset};
use crate::linalg::{dot, norm};

/// Threshold list used when none is given.
pub const DEFAULT_ALPHAS: [f64; 5] = [0.8, 0.9, 0.95, 0.98, 0.99];

/// Rows per parallel work unit in the pairwise kernel.
const ROW_BLOCK: usize = 64;
/// Columns per cache tile in the pairwise kernel.
const COL_TILE: usize = 512;

#[derive(Debug, Error, PartialEq)]
pub enum SeparabilityError {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("alpha must be positive")]
    ZeroAlpha,
    #[error("alpha {0} outside (0, 1]")]
    InvalidAlpha(f64),
    #[error("no thresholds given")]
    EmptyAlphas,
    #[error("no eligible points to compare against")]
    EmptyEligibleSet,
    #[error("need at least 2 points, got {0}")]
    TooFewPoints(usize),
    #[error("point index {0} out of range")]
    IndexOutOfRange(usize),
    #[error("{labels} labels for {points} points")]
    LabelCount { labels: usize, points: usize },
    #[error("point {0} has zero length and cannot be projected onto the sphere")]
    ZeroVectorOnSphere(usize),
}

/// Separation threshold in `(0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Threshold(f64);

impl Threshold {
    pub fn new(alpha: f64) -> Result<Self, SeparabilityError> {
        if alpha > 0.0 && alpha <= 1.0 {
            Ok(Self(alpha))
        } else {
            Err(SeparabilityError::InvalidAlpha(alpha))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for Threshold {
    type Error = SeparabilityError;
    fn try_from(v: f64) -> Result<Self, Self::Error> {
        Threshold::new(v)
    }
}

impl From<Threshold> for f64 {
    fn from(t: Threshold) -> f64 {
        t.0
    }
}

/// `true` iff `(x, y) > alpha * (x, x)`, i.e. `x` cannot be cut off from
/// `y` by the hyperplane `(x, z) = alpha * (x, x)`.
pub fn fisher_inseparable(x: &[f64], y: &[f64], alpha: f64) -> Result<bool, SeparabilityError> {
    if x.len() != y.len() {
        return Err(SeparabilityError::DimensionMismatch(x.len(), y.len()));
    }
    Ok(inseparable_unchecked(x, y, alpha))
}

#[inline]
fn inseparable_unchecked(x: &[f64], y: &[f64], alpha: f64) -> bool {
    dot(x, y) > alpha * dot(x, x)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcludedBall {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl ExcludedBall {
    /// Strict (open ball) membership.
    pub fn contains(&self, x: &[f64]) -> bool {
        let d2: f64 = x
            .iter()
            .zip(&self.center)
            .map(|(a, c)| (a - c) * (a - c))
            .sum();
        d2 < self.radius * self.radius
    }
}

/// The set of points that are inseparable from `y` at `alpha`.
pub fn excluded_ball(y: &[f64], alpha: f64) -> Result<ExcludedBall, SeparabilityError> {
    if !(alpha > 0.0) {
        return Err(SeparabilityError::ZeroAlpha);
    }
    let scale = 1.0 / (2.0 * alpha);
    Ok(ExcludedBall {
        center: y.iter().map(|v| v * scale).collect(),
        radius: norm(y) * scale,
    })
}

/// Fraction of the other points `x` that are inseparable from point
/// `y_index`.
///
/// With `class_labels` set, only points whose label differs from that of
/// `y` are eligible, and the denominator is the number of eligible points.
pub fn empirical_p_y(
    data: &DataMatrix,
    y_index: usize,
    alpha: f64,
    class_labels: Option<&[String]>,
) -> Result<f64, SeparabilityError> {
    let m = data.n_points();
    if m < 2 {
        return Err(SeparabilityError::TooFewPoints(m));
    }
    if y_index >= m {
        return Err(SeparabilityError::IndexOutOfRange(y_index));
    }
    if let Some(labels) = class_labels {
        if labels.len() != m {
            return Err(SeparabilityError::LabelCount {
                labels: labels.len(),
                points: m,
            });
        }
    }
    let y = data.row(y_index);
    let mut eligible = 0usize;
    let mut hits = 0usize;
    for i in 0..m {
        if i == y_index {
            continue;
        }
        if let Some(labels) = class_labels {
            if labels[i] == labels[y_index] {
                continue;
            }
        }
        eligible += 1;
        if inseparable_unchecked(data.row(i), y, alpha) {
            hits += 1;
        }
    }
    if eligible == 0 {
        return Err(SeparabilityError::EmptyEligibleSet);
    }
    Ok(hits as f64 / eligible as f64)
}

/// `p_y` for every point `y`: the fraction of the other `M - 1` points
/// inseparable from it. Parallel over `y`.
pub fn p_y_values(data: &DataMatrix, alpha: f64) -> Result<Vec<f64>, SeparabilityError> {
    let m = data.n_points();
    if m < 2 {
        return Err(SeparabilityError::TooFewPoints(m));
    }
    let sq: Vec<f64> = data.rows().map(|r| dot(r, r)).collect();
    let denom = (m - 1) as f64;
    Ok((0..m)
        .into_par_iter()
        .map(|j| {
            let y = data.row(j);
            let hits = (0..m)
                .filter(|&i| i != j && dot(data.row(i), y) > alpha * sq[i])
                .count();
            hits as f64 / denom
        })
        .collect())
}

/// `true` iff every point is separable from every other point.
pub fn is_fisher_separable_set(data: &DataMatrix, alpha: f64) -> bool {
    let m = data.n_points();
    (0..m).all(|i| point_separable_from_rest(data, i, alpha, None))
}

/// `true` iff point `i` is separable from all other points. With `origin`
/// set, inner products are taken after shifting every point by `-origin`.
pub fn point_separable_from_rest(
    data: &DataMatrix,
    i: usize,
    alpha: f64,
    origin: Option<&[f64]>,
) -> bool {
    let m = data.n_points();
    match origin {
        None => {
            let x = data.row(i);
            let xx = dot(x, x);
            (0..m).all(|j| j == i || dot(x, data.row(j)) <= alpha * xx)
        }
        Some(o) => {
            let x: Vec<f64> = data.row(i).iter().zip(o).map(|(a, b)| a - b).collect();
            let xx = dot(&x, &x);
            let mut shifted = vec![0.0; x.len()];
            (0..m).all(|j| {
                if j == i {
                    return true;
                }
                for ((s, a), b) in shifted.iter_mut().zip(data.row(j)).zip(o) {
                    *s = a - b;
                }
                dot(&x, &shifted) <= alpha * xx
            })
        }
    }
}

/// One column of the separability table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub alpha: f64,
    #[serde(rename = "N_alpha")]
    pub n_alpha: usize,
    pub nu_alpha: f64,
    pub mean_p_y: f64,
    #[serde(rename = "N_alpha_star", skip_serializing_if = "Option::is_none", default)]
    pub n_alpha_star: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub nu_alpha_star: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub mean_p_y_star: Option<f64>,
    /// `(N_alpha - N_alpha_star) / N_alpha_star`, when `N_alpha_star > 0`.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub generalization_ratio: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub effective_dimension: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub effective_dimension_star: Option<f64>,
}

/// Per-threshold separability statistics of one dataset.
///
/// `mean_p_y` is the arithmetic mean of `p_y` over all points. Both the
/// plain and the cross-class (`_star`) means use the `M - 1` other points
/// as denominator, so the starred mean counts inseparable points of other
/// classes among all other points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparabilityReport {
    pub n_points: usize,
    pub dim: usize,
    pub sphere: bool,
    /// Points of zero length; they are inseparable from any `y` with
    /// `(x, y) > 0`.
    pub zero_norm_points: usize,
    pub rows: Vec<ReportRow>,
}

impl SeparabilityReport {
    /// CSV with Table-1 layout: one line per statistic, one column per alpha.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let fmt_row = |name: &str, vals: Vec<String>| format!("{name},{}\n", vals.join(","));
        out += &fmt_row("alpha", self.rows.iter().map(|r| format!("{}", r.alpha)).collect());
        out += &fmt_row("N_alpha", self.rows.iter().map(|r| r.n_alpha.to_string()).collect());
        out += &fmt_row("nu_alpha", self.rows.iter().map(|r| format!("{:.4}", r.nu_alpha)).collect());
        out += &fmt_row("mean_p_y", self.rows.iter().map(|r| format!("{:.2E}", r.mean_p_y)).collect());
        if self.rows.iter().any(|r| r.n_alpha_star.is_some()) {
            let opt = |v: Option<String>| v.unwrap_or_default();
            out += &fmt_row(
                "N_alpha_star",
                self.rows.iter().map(|r| opt(r.n_alpha_star.map(|v| v.to_string()))).collect(),
            );
            out += &fmt_row(
                "nu_alpha_star",
                self.rows.iter().map(|r| opt(r.nu_alpha_star.map(|v| format!("{v:.4}")))).collect(),
            );
            out += &fmt_row(
                "mean_p_y_star",
                self.rows.iter().map(|r| opt(r.mean_p_y_star.map(|v| format!("{v:.2E}")))).collect(),
            );
            out += &fmt_row(
                "generalization_ratio",
                self.rows
                    .iter()
                    .map(|r| opt(r.generalization_ratio.map(|v| format!("{v:.1}"))))
                    .collect(),
            );
        }
        if self.rows.iter().any(|r| r.effective_dimension.is_some()) {
            out += &fmt_row(
                "effective_dimension",
                self.rows
                    .iter()
                    .map(|r| r.effective_dimension.map(|v| format!("{v:.3}")).unwrap_or_default())
                    .collect(),
            );
        }
        if self.rows.iter().any(|r| r.effective_dimension_star.is_some()) {
            out += &fmt_row(
                "effective_dimension_star",
                self.rows
                    .iter()
                    .map(|r| r.effective_dimension_star.map(|v| format!("{v:.3}")).unwrap_or_default())
                    .collect(),
            );
        }
        out
    }
}

/// Per-point counts produced by the pairwise kernel, one slot per alpha.
struct RowCounts {
    inseparable: Vec<u64>,
    inseparable_cross: Vec<u64>,
}

/// Builds the separability table for every requested threshold.
///
/// With `sphere` set, each point is first scaled to unit length. Starred
/// columns are filled in only when the dataset carries labels.
pub fn separability_report(
    ds: &LabeledDataset,
    alphas: &[f64],
    sphere: bool,
) -> Result<SeparabilityReport, SeparabilityError> {
    if alphas.is_empty() {
        return Err(SeparabilityError::EmptyAlphas);
    }
    for &a in alphas {
        Threshold::new(a)?;
    }
    let m = ds.data.n_points();
    if m < 2 {
        return Err(SeparabilityError::TooFewPoints(m));
    }

    let projected;
    let data = if sphere {
        projected = project_to_sphere(&ds.data)?;
        &projected
    } else {
        &ds.data
    };
    let classes = ds.labels().map(class_indices);
    let sq: Vec<f64> = data.rows().map(|r| dot(r, r)).collect();
    let zero_norm_points = sq.iter().filter(|&&s| s == 0.0).count();
    if zero_norm_points > 0 {
        log::warn!("{zero_norm_points} points have zero length; they are inseparable from every y with (x, y) > 0");
    }

    let counts = pair_counts(data, &sq, alphas, classes.as_deref());

    let denom_pairs = (m as f64) * ((m - 1) as f64);
    let rows = alphas
        .iter()
        .enumerate()
        .map(|(a, &alpha)| {
            let n_alpha = counts.iter().filter(|c| c.inseparable[a] > 0).count();
            let pairs: u64 = counts.iter().map(|c| c.inseparable[a]).sum();
            let mut row = ReportRow {
                alpha,
                n_alpha,
                nu_alpha: n_alpha as f64 / m as f64,
                mean_p_y: pairs as f64 / denom_pairs,
                n_alpha_star: None,
                nu_alpha_star: None,
                mean_p_y_star: None,
                generalization_ratio: None,
                effective_dimension: None,
                effective_dimension_star: None,
            };
            if classes.is_some() {
                let n_star = counts.iter().filter(|c| c.inseparable_cross[a] > 0).count();
                let pairs_star: u64 = counts.iter().map(|c| c.inseparable_cross[a]).sum();
                row.n_alpha_star = Some(n_star);
                row.nu_alpha_star = Some(n_star as f64 / m as f64);
                row.mean_p_y_star = Some(pairs_star as f64 / denom_pairs);
                if n_star > 0 {
                    row.generalization_ratio = Some((n_alpha - n_star) as f64 / n_star as f64);
                }
            }
            row
        })
        .collect();

    Ok(SeparabilityReport {
        n_points: m,
        dim: data.dim(),
        sphere,
        zero_norm_points,
        rows,
    })
}

/// For every point `x_i` and alpha, counts the `j != i` with
/// `(x_i, x_j) > alpha * (x_i, x_i)`, overall and among other classes.
///
/// Summing row counts over `i` equals summing `p_y` numerators over `y`,
/// which is how the report gets `mean_p_y` without a second pass.
fn pair_counts(
    data: &DataMatrix,
    sq: &[f64],
    alphas: &[f64],
    classes: Option<&[u32]>,
) -> Vec<RowCounts> {
    let m = data.n_points();
    let n_alpha = alphas.len();
    let blocks: Vec<Vec<RowCounts>> = (0..m.div_ceil(ROW_BLOCK))
        .into_par_iter()
        .map(|b| {
            let lo = b * ROW_BLOCK;
            let hi = (lo + ROW_BLOCK).min(m);
            let mut out: Vec<RowCounts> = (lo..hi)
                .map(|_| RowCounts {
                    inseparable: vec![0; n_alpha],
                    inseparable_cross: vec![0; n_alpha],
                })
                .collect();
            let limits: Vec<Vec<f64>> = (lo..hi)
                .map(|i| alphas.iter().map(|a| a * sq[i]).collect())
                .collect();
            for tile in (0..m).step_by(COL_TILE) {
                let tile_end = (tile + COL_TILE).min(m);
                for i in lo..hi {
                    let x = data.row(i);
                    let slot = &mut out[i - lo];
                    let lim = &limits[i - lo];
                    for j in tile..tile_end {
                        if j == i {
                            continue;
                        }
                        let g = dot(x, data.row(j));
                        let cross = classes.is_some_and(|c| c[i] != c[j]);
                        for a in 0..n_alpha {
                            if g > lim[a] {
                                slot.inseparable[a] += 1;
                                if cross {
                                    slot.inseparable_cross[a] += 1;
                                }
                            }
                        }
                    }
                }
            }
            out
        })
        .collect();
    blocks.into_iter().flatten().collect()
}

fn project_to_sphere(data: &DataMatrix) -> Result<DataMatrix, SeparabilityError> {
    let mut values = Vec::with_capacity(data.as_slice().len());
    for (i, r) in data.rows().enumerate() {
        let len = norm(r);
        if len == 0.0 {
            return Err(SeparabilityError::ZeroVectorOnSphere(i));
        }
        values.extend(r.iter().map(|v| v / len));
    }
    Ok(DataMatrix::new(data.n_points(), data.dim(), values).expect("finite by construction"))
}
