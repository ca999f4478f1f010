//! Closed-form separability formulas and separation-theorem bounds.
//!
//! Every bound calculator returns the raw formula value together with the
//! value clamped to `[0, 1]` and a flag telling whether the clamp made the
//! bound vacuous. Powers such as `r^n` are evaluated in log space so that
//! large dimensions do not underflow.
//!
//! The constants of the log-concave and SmAC results are not known in
//! closed form; the corresponding calculators take them as inputs.

pub mod quadrature;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;
use thiserror::Error;

use quadrature::{adaptive_simpson, QuadratureError, DEFAULT_MAX_EVALS};

/// Absolute tolerance of the sphere quadrature (on the rescaled integrand).
pub const SPHERE_QUAD_TOL: f64 = 1e-14;

#[derive(Debug, Error, PartialEq)]
pub enum BaselineError {
    #[error("dimension {0} not supported (need n >= 3)")]
    UnsupportedDimension(f64),
    #[error("parameter out of range: {0}")]
    ParamOutOfRange(String),
    #[error("delta = {delta} violates 1/sqrt(n) < delta < 1 (1/sqrt(n) = {lower})")]
    DeltaOutOfRange { delta: f64, lower: f64 },
    #[error("value out of range: {0}")]
    OutOfRange(String),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
}

fn out_of_range(msg: impl Into<String>) -> BaselineError {
    BaselineError::ParamOutOfRange(msg.into())
}

/// A probability lower bound before and after clamping.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundValue {
    pub raw: f64,
    pub value: f64,
    pub vacuous: bool,
}

impl BoundValue {
    pub fn from_raw(raw: f64) -> Self {
        Self {
            raw,
            value: raw.clamp(0.0, 1.0),
            vacuous: !(raw > 0.0),
        }
    }
}

/// A maximal set size guaranteed by a theorem; `ln_value` stays finite when
/// `value` overflows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaxSize {
    pub value: f64,
    pub ln_value: f64,
    /// `false` when the formula is nonpositive: no set size is guaranteed.
    pub guaranteed: bool,
}

impl MaxSize {
    fn from_value(value: f64) -> Self {
        Self {
            value,
            ln_value: if value > 0.0 { value.ln() } else { f64::NEG_INFINITY },
            guaranteed: value > 0.0,
        }
    }

    fn from_ln(ln_value: f64) -> Self {
        Self {
            value: ln_value.exp(),
            ln_value,
            guaranteed: ln_value > f64::NEG_INFINITY,
        }
    }
}

/// `exp(n ln base)`.
fn powr(base: f64, n: f64) -> f64 {
    (n * base.ln()).exp()
}

// ---------------------------------------------------------------------------
// p_y for the unit ball at alpha = 1 and for the unit sphere

/// CDF of `p_y = (|y|/2)^n` for `y` uniform in the unit ball (alpha = 1):
/// uniform on `[0, 2^-n]`.
pub fn p_y_ball_alpha1_cdf(n: u32, a: f64) -> f64 {
    if a <= 0.0 {
        return 0.0;
    }
    (powr(2.0, n as f64) * a).min(1.0)
}

/// `E(p_y) = 2^-(n+1)` for the unit ball at alpha = 1.
pub fn mean_p_y_ball_alpha1(n: u32) -> f64 {
    powr(0.5, n as f64 + 1.0)
}

/// `ln(A_{n-2} / A_{n-1}) = ln Γ(n/2) - ln Γ((n-1)/2) - ln(π)/2`, where
/// `A_{m-1} = 2 π^{m/2} / Γ(m/2)` is the area of the unit sphere in `R^m`.
pub fn ln_sphere_area_ratio(n: f64) -> f64 {
    ln_gamma(n / 2.0) - ln_gamma((n - 1.0) / 2.0) - 0.5 * std::f64::consts::PI.ln()
}

fn check_sphere_args(n: f64, alpha: f64) -> Result<(), BaselineError> {
    if !(n >= 3.0) {
        return Err(BaselineError::UnsupportedDimension(n));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(out_of_range(format!("alpha = {alpha} outside (0, 1]")));
    }
    Ok(())
}

/// `p_y` for the uniform distribution on the unit sphere `S^{n-1}`:
/// `(A_{n-2}/A_{n-1}) ∫_0^{arccos α} sin^{n-2} φ dφ`, by adaptive quadrature.
///
/// The integrand is divided by `sin^{n-2}(φ0)` so the quadrature sees an
/// O(1) function; the factor is restored in log space.
pub fn p_y_sphere_exact(n: u32, alpha: f64) -> Result<f64, BaselineError> {
    let nf = n as f64;
    check_sphere_args(nf, alpha)?;
    if alpha == 1.0 {
        return Ok(0.0);
    }
    let phi0 = alpha.acos();
    let s0 = phi0.sin();
    let power = nf - 2.0;
    let scaled = adaptive_simpson(
        |phi| (phi.sin() / s0).powf(power),
        0.0,
        phi0,
        SPHERE_QUAD_TOL,
        DEFAULT_MAX_EVALS,
    )?;
    Ok((ln_sphere_area_ratio(nf) + power * s0.ln() + scaled.ln()).exp())
}

/// Natural log of the large-`n` approximation
/// `(1 - α²)^{(n-1)/2} / (α sqrt(2π(n-2)))`, for real `n > 2`.
pub fn ln_p_y_sphere_asymptotic(n: f64, alpha: f64) -> f64 {
    0.5 * (n - 1.0) * (1.0 - alpha * alpha).ln()
        - alpha.ln()
        - 0.5 * (2.0 * std::f64::consts::PI * (n - 2.0)).ln()
}

/// Large-`n` approximation of [`p_y_sphere_exact`].
pub fn p_y_sphere_asymptotic(n: f64, alpha: f64) -> Result<f64, BaselineError> {
    check_sphere_args(n, alpha)?;
    Ok(ln_p_y_sphere_asymptotic(n, alpha).exp())
}

/// One row of a sphere-curve table: `log10 p_y` for each requested `n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveRow {
    pub alpha: f64,
    pub log10_p_y: Vec<f64>,
}

/// `log10 p_y` on the unit sphere over a grid of thresholds and dimensions.
pub fn sphere_curve(ns: &[u32], alphas: &[f64], exact: bool) -> Result<Vec<CurveRow>, BaselineError> {
    alphas
        .iter()
        .map(|&alpha| {
            let log10_p_y = ns
                .iter()
                .map(|&n| {
                    if exact {
                        p_y_sphere_exact(n, alpha).map(f64::log10)
                    } else {
                        check_sphere_args(n as f64, alpha)
                            .map(|_| ln_p_y_sphere_asymptotic(n as f64, alpha) / std::f64::consts::LN_10)
                    }
                })
                .collect::<Result<Vec<_>, _>>()?;
            Ok(CurveRow { alpha, log10_p_y })
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Equidistribution in the unit ball

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BallParams {
    pub n: u32,
    pub m: u64,
    pub r: f64,
}

impl BallParams {
    pub fn validate(&self) -> Result<(), BaselineError> {
        if self.n == 0 {
            return Err(out_of_range("n must be positive"));
        }
        if self.m == 0 {
            return Err(out_of_range("M must be positive"));
        }
        if !(self.r > 0.0 && self.r < 1.0) {
            return Err(out_of_range(format!("r = {} outside (0, 1)", self.r)));
        }
        Ok(())
    }

    /// `ρ = sqrt(1 - r²)`.
    pub fn rho(&self) -> f64 {
        (1.0 - self.r * self.r).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BallBounds {
    /// One designated point separated from the other `M - 1`.
    pub single: BoundValue,
    /// Every point separated from every other.
    pub all_pairs: BoundValue,
    /// Pairwise angle condition on normalized points.
    pub angle: BoundValue,
}

/// Lower bounds for i.i.d. points uniform in the unit ball:
/// `1 - r^n - 0.5(M-1)ρ^n`, `1 - M r^n - 0.5 M(M-1) ρ^n` and
/// `1 - M r^n - M(M-1) ρ^n`.
pub fn ball_theorem_bounds(p: &BallParams) -> Result<BallBounds, BaselineError> {
    p.validate()?;
    let n = p.n as f64;
    let m = p.m as f64;
    let rn = powr(p.r, n);
    let rhon = powr(p.rho(), n);
    Ok(BallBounds {
        single: BoundValue::from_raw(1.0 - rn - 0.5 * (m - 1.0) * rhon),
        all_pairs: BoundValue::from_raw(1.0 - m * rn - 0.5 * m * (m - 1.0) * rhon),
        angle: BoundValue::from_raw(1.0 - m * rn - m * (m - 1.0) * rhon),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorollaryBounds {
    /// `2(ϑ - r^n)/ρ^n`.
    pub single_bound: MaxSize,
    /// `(r/ρ)^n (-1 + sqrt(1 + 2ϑρ^n / r^{2n}))`.
    pub pairwise_bound: MaxSize,
}

/// Largest `M` for which the ball bounds guarantee separability with
/// probability above `1 - theta`.
pub fn corollary_max_m(n: u32, r: f64, theta: f64) -> Result<CorollaryBounds, BaselineError> {
    if !(r > 0.0 && r < 1.0) {
        return Err(out_of_range(format!("r = {r} outside (0, 1)")));
    }
    if !(theta > 0.0 && theta < 1.0) {
        return Err(out_of_range(format!("theta = {theta} outside (0, 1)")));
    }
    let nf = n as f64;
    let ln_r = r.ln();
    let ln_rho = (1.0 - r * r).sqrt().ln();
    let rn = (nf * ln_r).exp();

    let single = if theta > rn {
        MaxSize::from_ln(2f64.ln() + (theta - rn).ln() - nf * ln_rho)
    } else {
        MaxSize::from_value(2.0 * (theta - rn) / (nf * ln_rho).exp())
    };

    // -1 + sqrt(1 + u) = u / (1 + sqrt(1 + u)), with u = 2ϑρ^n / r^{2n}
    let ln_u = (2.0 * theta).ln() + nf * ln_rho - 2.0 * nf * ln_r;
    let ln_core = if ln_u > 600.0 {
        // sqrt(1 + u) - 1 = sqrt(u) (1 - u^{-1/2} + ...)
        0.5 * ln_u + (-(-0.5 * ln_u).exp()).ln_1p()
    } else {
        let u = ln_u.exp();
        ln_u - (1.0 + (1.0 + u).sqrt()).ln()
    };
    let pairwise = MaxSize::from_ln(nf * (ln_r - ln_rho) + ln_core);
    Ok(CorollaryBounds {
        single_bound: single,
        pairwise_bound: pairwise,
    })
}

// ---------------------------------------------------------------------------
// Product distribution in the unit cube

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CubeParams {
    pub n: u32,
    pub m: u64,
    pub delta: f64,
    pub sigma0: f64,
    /// `R0² = Σ σ_i²`.
    pub r0_sq: f64,
}

impl CubeParams {
    pub fn validate(&self) -> Result<(), BaselineError> {
        if self.n == 0 || self.m == 0 {
            return Err(out_of_range("n and M must be positive"));
        }
        if !(self.delta > 0.0 && self.delta < 2.0 / 3.0) {
            return Err(out_of_range(format!("delta = {} violates 0 < delta < 2/3", self.delta)));
        }
        if !(self.sigma0 > 0.0) {
            return Err(out_of_range("sigma0 must be positive"));
        }
        let floor = self.n as f64 * self.sigma0 * self.sigma0;
        if !(self.r0_sq >= floor * (1.0 - 1e-12)) {
            return Err(out_of_range(format!(
                "R0^2 = {} violates R0^2 >= n sigma0^2 = {floor}",
                self.r0_sq
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CubeBounds {
    pub single: BoundValue,
    pub all_pairs: BoundValue,
}

/// Lower bounds for centred i.i.d. product distributions in the unit cube:
/// `1 - 2M e^{-2δ²R0⁴/n} - (M-1) e^{-2R0⁴(2-3δ)²/n}` and the same with
/// `M(M-1)` in the last term.
pub fn cube_theorem_bounds(p: &CubeParams) -> Result<CubeBounds, BaselineError> {
    p.validate()?;
    let n = p.n as f64;
    let m = p.m as f64;
    let r0_4 = p.r0_sq * p.r0_sq;
    let shell = (-2.0 * p.delta * p.delta * r0_4 / n).exp();
    let angle = (-2.0 * r0_4 * (2.0 - 3.0 * p.delta).powi(2) / n).exp();
    Ok(CubeBounds {
        single: BoundValue::from_raw(1.0 - 2.0 * m * shell - (m - 1.0) * angle),
        all_pairs: BoundValue::from_raw(1.0 - 2.0 * m * shell - m * (m - 1.0) * angle),
    })
}

// ---------------------------------------------------------------------------
// SmAC distributions (general linear separability)

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmacParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub delta: f64,
    /// Dimension beyond which the convex-hull volume estimate holds;
    /// must be supplied by the caller.
    pub n_b: u32,
}

impl SmacParams {
    pub fn validate(&self) -> Result<(), BaselineError> {
        if !(self.a > 0.0) {
            return Err(out_of_range("A must be positive"));
        }
        if !(self.b > 0.0 && self.b < 1.0) {
            return Err(out_of_range(format!("B = {} outside (0, 1)", self.b)));
        }
        if !(self.c > 0.0) {
            return Err(out_of_range("C must be positive"));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(out_of_range(format!("delta = {} outside (0, 1)", self.delta)));
        }
        Ok(())
    }
}

/// `M <= a b^n` with `b = min{1.05, 1/B, exp((A/3)²)}` and
/// `a = min{1, δ/(2C), b^{-N_b}}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmacBound {
    pub a: f64,
    pub b: f64,
}

impl SmacBound {
    pub fn max_m(&self, n: u32) -> MaxSize {
        MaxSize::from_ln(self.a.ln() + n as f64 * self.b.ln())
    }
}

pub fn smac_max_m(p: &SmacParams) -> Result<SmacBound, BaselineError> {
    p.validate()?;
    let b = 1.05f64.min(1.0 / p.b).min(((p.a / 3.0).powi(2)).exp());
    let a = 1.0f64
        .min(p.delta / (2.0 * p.c))
        .min(powr(b, -(p.n_b as f64)));
    Ok(SmacBound { a, b })
}

// ---------------------------------------------------------------------------
// Randomly perturbed clusters

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoisyParams {
    pub n: u32,
    pub m: u64,
    pub epsilon: f64,
    pub delta: f64,
}

/// `1 - 2M²/(δ√n) (√(1-δ²))^{n+1} - M (2δ/ε)^n`.
pub fn noisy_bound(p: &NoisyParams) -> Result<BoundValue, BaselineError> {
    if p.n == 0 || p.m == 0 {
        return Err(out_of_range("n and M must be positive"));
    }
    if !(p.epsilon > 0.0 && p.epsilon < 1.0) {
        return Err(out_of_range(format!("epsilon = {} outside (0, 1)", p.epsilon)));
    }
    let n = p.n as f64;
    let lower = 1.0 / n.sqrt();
    if !(p.delta > lower && p.delta < 1.0) {
        return Err(BaselineError::DeltaOutOfRange {
            delta: p.delta,
            lower,
        });
    }
    let m = p.m as f64;
    let ln_t1 = (2.0 * m * m).ln() - (p.delta * n.sqrt()).ln()
        + 0.5 * (n + 1.0) * (1.0 - p.delta * p.delta).ln();
    let ln_t2 = m.ln() + n * (2.0 * p.delta / p.epsilon).ln();
    Ok(BoundValue::from_raw(1.0 - ln_t1.exp() - ln_t2.exp()))
}

// ---------------------------------------------------------------------------
// Log-concave families and bounded densities

/// `M <= sqrt(2δ/a) exp((b/2) n^{α/2})` for isotropic log-concave ψ_α
/// families; `a_const` and `b_const` are caller-supplied.
pub fn logconcave_max_m(
    n: u32,
    alpha_class: f64,
    a_const: f64,
    b_const: f64,
    delta: f64,
) -> Result<MaxSize, BaselineError> {
    if !(1.0..=2.0).contains(&alpha_class) {
        return Err(out_of_range(format!("alpha class {alpha_class} outside [1, 2]")));
    }
    if !(a_const > 0.0 && b_const > 0.0) {
        return Err(out_of_range("constants a and b must be positive"));
    }
    if !(delta > 0.0) {
        return Err(out_of_range("delta must be positive"));
    }
    let ln = 0.5 * (2.0 * delta / a_const).ln() + 0.5 * b_const * (n as f64).powf(alpha_class / 2.0);
    Ok(MaxSize::from_ln(ln))
}

/// `|Y| < θ (2rα)^n / C` for densities bounded by `C / (r^n V_n)`.
///
/// Accepts `r = 1`, which is the uniform-ball case (`C = 1`).
pub fn bounded_density_max_m(
    n: u32,
    alpha: f64,
    r: f64,
    c: f64,
    theta: f64,
) -> Result<MaxSize, BaselineError> {
    if !(alpha > 0.5 && alpha <= 1.0) {
        return Err(out_of_range(format!("alpha = {alpha} violates 1 >= alpha > 1/2")));
    }
    if !(r > 1.0 / (2.0 * alpha) && r <= 1.0) {
        return Err(out_of_range(format!("r = {r} violates 1 >= r > 1/(2 alpha)")));
    }
    if !(theta > 0.0 && theta < 1.0) {
        return Err(out_of_range(format!("theta = {theta} violates 0 < theta < 1")));
    }
    if !(c > 0.0) {
        return Err(out_of_range(format!("C = {c} violates C > 0")));
    }
    Ok(MaxSize::from_ln(theta.ln() + n as f64 * (2.0 * r * alpha).ln() - c.ln()))
}

// ---------------------------------------------------------------------------
// Effective dimension

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectiveDimension {
    pub n: f64,
    pub nearest: u64,
}

/// Real `n >= 3` at which the sphere approximation equals `mean_p_y`.
///
/// The approximation is strictly decreasing in `n`, so bisection on its
/// logarithm converges to the unique root.
pub fn effective_dimension(mean_p_y: f64, alpha: f64) -> Result<EffectiveDimension, BaselineError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(out_of_range(format!("alpha = {alpha} outside (0, 1)")));
    }
    if !(mean_p_y > 0.0 && mean_p_y < 1.0) {
        return Err(BaselineError::OutOfRange(format!(
            "mean p_y = {mean_p_y} outside (0, 1)"
        )));
    }
    let target = mean_p_y.ln();
    let g = |n: f64| ln_p_y_sphere_asymptotic(n, alpha) - target;
    let mut lo = 3.0;
    let g_lo = g(lo);
    // values within rounding of the n = 3 endpoint invert to 3
    let slack = 1e-12 * target.abs().max(1.0);
    if g_lo.abs() <= slack {
        return Ok(EffectiveDimension { n: 3.0, nearest: 3 });
    }
    if g_lo < 0.0 {
        return Err(BaselineError::OutOfRange(format!(
            "mean p_y = {mean_p_y} exceeds the n = 3 value {:.6e} at alpha = {alpha}",
            g_lo.exp() * mean_p_y
        )));
    }
    let mut hi = 6.0;
    while g(hi) > 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi > 1e15 {
            return Err(BaselineError::OutOfRange(format!(
                "mean p_y = {mean_p_y} too small to invert"
            )));
        }
    }
    while hi - lo > 1e-10 * hi.max(1.0) {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let n = 0.5 * (lo + hi);
    Ok(EffectiveDimension {
        n,
        nearest: n.round() as u64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn ball_alpha1_law() {
        assert_eq!(mean_p_y_ball_alpha1(1), 0.25);
        assert_eq!(p_y_ball_alpha1_cdf(10, 2f64.powi(-10)), 1.0);
        assert_eq!(p_y_ball_alpha1_cdf(10, 0.3), 1.0);
        assert!((p_y_ball_alpha1_cdf(10, 2f64.powi(-11)) - 0.5).abs() < 1e-15);
        assert_eq!(p_y_ball_alpha1_cdf(3, -1.0), 0.0);
    }

    #[test]
    fn sphere_exact_closed_form_in_3d() {
        // A_1/A_2 = 1/2 and ∫_0^φ0 sin = 1 - α
        assert!((p_y_sphere_exact(3, 0.5).unwrap() - 0.25).abs() < 1e-12);
        assert!((p_y_sphere_exact(3, 0.9).unwrap() - 0.05).abs() < 1e-12);
        assert_eq!(p_y_sphere_exact(10, 1.0).unwrap(), 0.0);
        assert_eq!(p_y_sphere_exact(2, 0.5), Err(BaselineError::UnsupportedDimension(2.0)));
    }

    #[test]
    fn sphere_exact_matches_high_precision_reference() {
        // reference values from 30-digit quadrature of the same integral
        let cases = [
            (50, 0.6, 1.632_340_976_469_073_3e-6),
            (50, 0.8, 9.445_998_097_426_56e-13),
            (50, 0.9, 1.339_186_637_034_881_4e-19),
            (100, 0.6, 1.668_833_229_289_405_8e-11),
            (100, 0.8, 5.413_684_256_042_557e-24),
            (100, 0.9, 8.811_575_177_690_965e-38),
            (20, 0.8, 6.708_163_478_711_032e-6),
        ];
        for (n, a, want) in cases {
            let got = p_y_sphere_exact(n, a).unwrap();
            assert!(rel(got, want) < 1e-9, "n={n} a={a}: {got} vs {want}");
        }
    }

    #[test]
    fn sphere_asymptotic_examples() {
        let exact50 = p_y_sphere_exact(50, 0.8).unwrap();
        let approx50 = p_y_sphere_asymptotic(50.0, 0.8).unwrap();
        assert!(rel(approx50, exact50) <= 0.05);

        let mut prev = f64::INFINITY;
        for i in 0..50 {
            let a = 0.5 + 0.01 * i as f64;
            let v = p_y_sphere_asymptotic(30.0, a).unwrap();
            assert!(v < prev);
            prev = v;
        }

        let v = p_y_sphere_asymptotic(100.0, 0.9).unwrap();
        let want = 49.5 * 0.19f64.log10() - (0.9 * (2.0 * std::f64::consts::PI * 98.0).sqrt()).log10();
        assert!((v.log10() - want).abs() < 1e-12);
    }

    #[test]
    fn ball_bounds_examples() {
        let one = ball_theorem_bounds(&BallParams { n: 20, m: 1, r: 0.8 }).unwrap();
        assert!((one.single.raw - (1.0 - 0.8f64.powi(20))).abs() < 1e-15);

        let b = ball_theorem_bounds(&BallParams { n: 50, m: 10, r: 0.9 }).unwrap();
        let want = 1.0 - 10.0 * 0.9f64.powi(50) - 45.0 * 0.19f64.powi(25);
        assert!((b.all_pairs.raw - want).abs() < 1e-12);
        assert!((b.all_pairs.value - 0.9485).abs() < 1e-4);
        assert!(!b.all_pairs.vacuous);

        let near1 = ball_theorem_bounds(&BallParams { n: 30, m: 1000, r: 0.999_999 }).unwrap();
        assert!((near1.single.raw - (1.0 - 0.999_999f64.powi(30))).abs() < 1e-6);

        let huge = ball_theorem_bounds(&BallParams { n: 5, m: 1_000_000, r: 0.5 }).unwrap();
        assert!(huge.all_pairs.vacuous);
        assert_eq!(huge.all_pairs.value, 0.0);
    }

    #[test]
    fn corollary_examples() {
        let c = corollary_max_m(10, 0.9, 0.2).unwrap();
        assert!(!c.single_bound.guaranteed); // 0.9^10 = 0.35 > 0.2

        let c = corollary_max_m(50, 0.9, 0.2).unwrap();
        let want = 2.0 * (0.2 - 0.9f64.powi(50)) / 0.19f64.powf(25.0);
        assert!(rel(c.single_bound.value, want) < 1e-12);
        // 30-digit reference; the naive formula cancels catastrophically here
        assert!(rel(c.pairwise_bound.value, 38.806_504_349_652_52) < 1e-9);
        assert!(rel(c.single_bound.value, 4.186_797_608_824_556_9e17) < 1e-9);
    }

    #[test]
    fn corollary_round_trip() {
        for &(n, r, theta) in &[(20u32, 0.8, 0.5), (40, 0.85, 0.3), (60, 0.9, 0.4)] {
            let c = corollary_max_m(n, r, theta).unwrap();
            let rho = (1.0 - r * r).sqrt();
            let rn = r.powi(n as i32);
            let rhon = rho.powi(n as i32);
            let ms = c.single_bound.value.floor();
            assert!(ms >= 1.0);
            assert!(0.5 * (ms - 1.0) * rhon <= (theta - rn) * (1.0 + 1e-12));
            let mp = c.pairwise_bound.value.floor();
            assert!(mp >= 1.0);
            assert!(mp * rn + 0.5 * mp * (mp - 1.0) * rhon <= theta * (1.0 + 1e-12));
            // one more point breaks the pairwise guarantee
            let next = mp + 1.0;
            assert!(next * rn + 0.5 * next * next * rhon > theta);
        }
    }

    #[test]
    fn cube_examples() {
        let bad = CubeParams { n: 10, m: 1, delta: 2.0 / 3.0, sigma0: 0.1, r0_sq: 1.0 };
        assert!(cube_theorem_bounds(&bad).is_err());

        let one = CubeParams { n: 100, m: 1, delta: 0.5, sigma0: 0.3, r0_sq: 9.0 };
        let b = cube_theorem_bounds(&one).unwrap();
        assert!((b.single.raw - (1.0 - 2.0 * (-2.0 * 0.25 * 81.0 / 100.0f64).exp())).abs() < 1e-15);

        let p = CubeParams { n: 100, m: 100, delta: 0.5, sigma0: 0.3, r0_sq: 9.0 };
        let b = cube_theorem_bounds(&p).unwrap();
        let e1 = (-2.0f64 * 0.25 * 81.0 / 100.0).exp();
        let e2 = (-2.0f64 * 81.0 * 0.25 / 100.0).exp();
        assert!((b.single.raw - (1.0 - 200.0 * e1 - 99.0 * e2)).abs() < 1e-12);
        assert!((b.all_pairs.raw - (1.0 - 200.0 * e1 - 9900.0 * e2)).abs() < 1e-9);
        assert!(b.all_pairs.vacuous);

        let low = CubeParams { n: 100, m: 1, delta: 0.5, sigma0: 0.3, r0_sq: 8.0 };
        assert!(cube_theorem_bounds(&low).is_err());
    }

    #[test]
    fn smac_examples() {
        let s = smac_max_m(&SmacParams { a: 3.0, b: 0.5, c: 1.0, delta: 0.1, n_b: 0 }).unwrap();
        assert_eq!(s.b, 1.05);
        assert_eq!(s.a, 0.05);
        assert!(rel(s.max_m(40).value, 0.05 * 1.05f64.powi(40)) < 1e-12);

        let slow = smac_max_m(&SmacParams { a: 3.0, b: 0.999, c: 1.0, delta: 0.1, n_b: 0 }).unwrap();
        assert!((slow.b - 1.0 / 0.999).abs() < 1e-15);
        assert!(slow.max_m(10).value < 0.05 * 1.02);

        let clamp = smac_max_m(&SmacParams { a: 3.0, b: 0.5, c: 0.01, delta: 0.5, n_b: 0 }).unwrap();
        assert_eq!(clamp.a, 1.0);

        let nb = smac_max_m(&SmacParams { a: 3.0, b: 0.5, c: 0.01, delta: 0.5, n_b: 10 }).unwrap();
        assert!(rel(nb.a, 1.05f64.powi(-10)) < 1e-12);
    }

    #[test]
    fn noisy_examples() {
        let p = NoisyParams { n: 100, m: 100, epsilon: 0.5, delta: 0.1 };
        assert!(matches!(noisy_bound(&p), Err(BaselineError::DeltaOutOfRange { .. })));

        let p = NoisyParams { n: 100, m: 10, epsilon: 0.5, delta: 0.3 };
        let b = noisy_bound(&p).unwrap();
        assert!(b.vacuous); // 2δ/ε > 1

        let p = NoisyParams { n: 100, m: 100, epsilon: 0.5, delta: 0.15 };
        let b = noisy_bound(&p).unwrap();
        let t1 = 2.0 * 100.0f64.powi(2) / (0.15 * 10.0) * (1.0 - 0.15f64 * 0.15).sqrt().powi(101);
        let t2 = 100.0 * 0.6f64.powi(100);
        assert!(rel(b.raw, 1.0 - t1 - t2) < 1e-12);
    }

    #[test]
    fn logconcave_examples() {
        let two = logconcave_max_m(16, 2.0, 1.0, 1.0, 0.1).unwrap();
        assert!(rel(two.ln_value, 0.5 * 0.2f64.ln() + 0.5 * 16.0) < 1e-12);
        let one = logconcave_max_m(16, 1.0, 1.0, 1.0, 0.1).unwrap();
        assert!(rel(one.ln_value, 0.5 * 0.2f64.ln() + 0.5 * 4.0) < 1e-12);
        let doubled = logconcave_max_m(16, 1.5, 2.0, 0.3, 0.2).unwrap();
        let base = logconcave_max_m(16, 1.5, 2.0, 0.3, 0.1).unwrap();
        assert!(rel(doubled.value / base.value, 2f64.sqrt()) < 1e-12);
        assert!(logconcave_max_m(16, 2.5, 1.0, 1.0, 0.1).is_err());
    }

    #[test]
    fn bounded_density_examples() {
        let v = bounded_density_max_m(20, 1.0, 1.0, 1.0, 0.3).unwrap();
        assert!(rel(v.value, 0.3 * 2f64.powi(20)) < 1e-12);
        assert!(bounded_density_max_m(20, 0.8, 1.0 / 1.6, 1.0, 0.3).is_err());
        let v = bounded_density_max_m(30, 0.9, 0.8, 2.0, 0.1).unwrap();
        assert!(rel(v.value, 0.1 * 1.44f64.powi(30) / 2.0) < 1e-12);
        let err = bounded_density_max_m(30, 0.4, 0.8, 2.0, 0.1).unwrap_err();
        assert!(err.to_string().contains("alpha"));
    }

    #[test]
    fn effective_dimension_round_trip() {
        let p = p_y_sphere_asymptotic(16.0, 0.8).unwrap();
        let d = effective_dimension(p, 0.8).unwrap();
        assert!((d.n - 16.0).abs() < 1e-6);
        assert_eq!(d.nearest, 16);

        let smaller = effective_dimension(p / 10.0, 0.8).unwrap();
        assert!(smaller.n > d.n);

        assert!(matches!(effective_dimension(1.0, 0.8), Err(BaselineError::OutOfRange(_))));
        assert!(matches!(effective_dimension(0.5, 0.8), Err(BaselineError::OutOfRange(_))));
    }

    #[test]
    fn sphere_curve_shape() {
        let ns: Vec<u32> = (8..=25).collect();
        let rows = sphere_curve(&ns, &[0.8, 0.9], false).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].log10_p_y.len(), 18);
        // larger n lies lower
        assert!(rows[0].log10_p_y.windows(2).all(|w| w[1] < w[0]));
    }
}
