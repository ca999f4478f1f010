//! Adaptive Simpson quadrature with an absolute tolerance and a hard cap on
//! integrand evaluations.

use thiserror::Error;

pub const DEFAULT_MAX_EVALS: usize = 1_000_000;

#[derive(Debug, Error, PartialEq)]
pub enum QuadratureError {
    #[error("evaluation budget of {0} exhausted before reaching tolerance")]
    BudgetExhausted(usize),
    #[error("integrand returned a non-finite value at {0}")]
    NonFinite(f64),
}

struct Integrator<F> {
    f: F,
    evals: usize,
    max_evals: usize,
}

impl<F: Fn(f64) -> f64> Integrator<F> {
    fn eval(&mut self, x: f64) -> Result<f64, QuadratureError> {
        self.evals += 1;
        if self.evals > self.max_evals {
            return Err(QuadratureError::BudgetExhausted(self.max_evals));
        }
        let v = (self.f)(x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(QuadratureError::NonFinite(x))
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn refine(
        &mut self,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> Result<f64, QuadratureError> {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = self.eval(lm)?;
        let frm = self.eval(rm)?;
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return Ok(left + right + delta / 15.0);
        }
        let l = self.refine(a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)?;
        let r = self.refine(m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)?;
        Ok(l + r)
    }
}

/// Integrates `f` over `[a, b]` to absolute tolerance `tol`.
///
/// The interval is pre-split into 8 panels so that narrow peaks are not
/// missed by the first coarse estimate.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    tol: f64,
    max_evals: usize,
) -> Result<f64, QuadratureError> {
    if a == b {
        return Ok(0.0);
    }
    const PANELS: usize = 8;
    let mut it = Integrator {
        f,
        evals: 0,
        max_evals,
    };
    let h = (b - a) / PANELS as f64;
    let mut total = 0.0;
    let mut fa = it.eval(a)?;
    for p in 0..PANELS {
        let lo = a + h * p as f64;
        let hi = if p + 1 == PANELS { b } else { a + h * (p + 1) as f64 };
        let fm = it.eval(0.5 * (lo + hi))?;
        let fb = it.eval(hi)?;
        let whole = (hi - lo) / 6.0 * (fa + 4.0 * fm + fb);
        total += it.refine(lo, hi, fa, fm, fb, whole, tol / PANELS as f64, 50)?;
        fa = fb;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let v = adaptive_simpson(|x| x * x * x - 2.0 * x, 0.0, 2.0, 1e-12, DEFAULT_MAX_EVALS).unwrap();
        assert!((v - 0.0).abs() < 1e-12);
    }

    #[test]
    fn sine_integral() {
        let v = adaptive_simpson(f64::sin, 0.0, std::f64::consts::PI, 1e-12, DEFAULT_MAX_EVALS).unwrap();
        assert!((v - 2.0).abs() < 1e-11);
    }

    #[test]
    fn budget_is_enforced() {
        let err = adaptive_simpson(|x| (50.0 * x).sin().abs(), 0.0, 10.0, 1e-15, 200).unwrap_err();
        assert_eq!(err, QuadratureError::BudgetExhausted(200));
    }
}
