//! Closed-form risk bounds for the Ivanov estimator and its clipped and
//! validated variants, plus the covering-number estimates behind them.
//!
//! Approximation errors (`I_2`, `I_inf`, baseline risks) are inputs, so each
//! evaluator is a literal transcription and can be fed either an exact oracle
//! value or an interpolation-space bound.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::approximation::{check_beta, interpolation_bound};
use crate::error::{argument, Result};

/// Constants appearing in the bounds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundParams {
    /// `|k|_inf`.
    pub k_inf: f64,
    /// Training noise scale.
    pub sigma: f64,
    /// Validation noise scale.
    pub sigma_tilde: f64,
    /// Clipping bound `C`.
    #[serde(rename = "C", alias = "c")]
    pub c: f64,
    /// Interpolation norm `B`.
    #[serde(rename = "B", alias = "b")]
    pub b: f64,
    pub beta: f64,
    pub n: usize,
    pub n_tilde: usize,
    /// Tail parameter of the high-probability bounds.
    pub t: f64,
    /// Largest radius in the validation grid.
    pub rho: f64,
}

impl Default for BoundParams {
    fn default() -> Self {
        Self { k_inf: 1.0, sigma: 1.0, sigma_tilde: 1.0, c: 1.0, b: 1.0, beta: 0.5, n: 100, n_tilde: 100, t: 1.0, rho: 1.0 }
    }
}

impl BoundParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("k_inf", self.k_inf),
            ("sigma", self.sigma),
            ("sigma_tilde", self.sigma_tilde),
            ("rho", self.rho),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(argument(format!("{name} must be finite and non-negative, got {v}")));
            }
        }
        for (name, v) in [("C", self.c), ("B", self.b)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(argument(format!("{name} must be positive, got {v}")));
            }
        }
        check_beta(self.beta)?;
        if self.n == 0 || self.n_tilde == 0 {
            return Err(argument("sample sizes must be positive"));
        }
        check_t(self.t)
    }

    fn root_n(&self) -> f64 {
        (self.n as f64).sqrt()
    }

    fn root_n_tilde(&self) -> f64 {
        (self.n_tilde as f64).sqrt()
    }

    /// `(2 log(2 + |k|^2 rho^2 / C^2))^{1/2} + pi^{1/2}`.
    fn chaining_factor(&self) -> f64 {
        let ratio = self.k_inf * self.rho / self.c;
        (2.0 * (2.0 + ratio * ratio).ln()).sqrt() + PI.sqrt()
    }
}

fn check_t(t: f64) -> Result<()> {
    if !(t.is_finite() && t >= 1.0) {
        return Err(argument(format!("tail parameter t must be at least 1, got {t}")));
    }
    Ok(())
}

/// Expected squared `L^2` error of the unclipped estimator at radius `r`.
pub fn bound_expectation_unclipped(p: &BoundParams, r: f64, i2: f64) -> f64 {
    let k = p.k_inf;
    8.0 * k * p.sigma * r / p.root_n() + 64.0 * k * k * r * r / p.root_n() + 10.0 * i2
}

/// Expected squared `L^2` error of the clipped estimator at radius `r`.
pub fn bound_expectation_clipped(p: &BoundParams, r: f64, i2: f64) -> f64 {
    8.0 * p.k_inf * (16.0 * p.c + p.sigma) * r / p.root_n() + 10.0 * i2
}

/// Error of the clipped estimator holding with probability at least
/// `1 - 3 e^{-t}`.
pub fn bound_highprob_clipped(p: &BoundParams, r: f64, iinf: f64) -> Result<f64> {
    check_t(p.t)?;
    let (c, k, n) = (p.c, p.k_inf, p.n as f64);
    let inner = 2.0 * c * c + 8.0 * k.sqrt() * c.powf(1.5) * r.sqrt() + k * (16.0 * c + 5.0 * p.sigma) * r;
    Ok(8.0 * inner * p.t.sqrt() / n.sqrt() + 16.0 * c * c * p.t / (3.0 * n) + 10.0 * iinf)
}

/// Expected error of the validated estimator, given the expected error of the
/// clipped estimator at some grid radius.
pub fn bound_validation_expectation(p: &BoundParams, baseline_risk: f64) -> f64 {
    32.0 * p.c * (4.0 * p.c + p.sigma_tilde) / p.root_n_tilde() * p.chaining_factor() + 10.0 * baseline_risk
}

/// Error of the validated estimator holding with probability at least
/// `1 - 3 e^{-t}`.
pub fn bound_validation_highprob(p: &BoundParams, baseline_risk: f64) -> Result<f64> {
    check_t(p.t)?;
    let (c, nt, st) = (p.c, p.n_tilde as f64, p.t.sqrt());
    Ok(4.0 * c * (5.0 * c + 24.0 * p.sigma_tilde) * st / nt.sqrt() * (1.0 + 32.0 * p.chaining_factor())
        + 48.0 * c * c * st / nt.sqrt()
        + 16.0 * c * c * p.t / (3.0 * nt)
        + 10.0 * baseline_risk)
}

/// `2 beta / (1 - beta)`, the exponent of `r` in the interpolation bound.
fn decay(beta: f64) -> f64 {
    2.0 * beta / (1.0 - beta)
}

/// Radius minimising [`bound_expectation_clipped`] with `I_2` replaced by
/// [`interpolation_bound`].
pub fn optimal_radius_clipped(p: &BoundParams) -> f64 {
    let beta = p.beta;
    let e = (1.0 - beta) / (1.0 + beta);
    bdd_inter_constants(beta, None).d1
        * p.k_inf.powf(-e)
        * p.b.powf(2.0 / (1.0 + beta))
        * (16.0 * p.c + p.sigma).powf(-e)
        * (p.n as f64).powf((1.0 - beta) / (2.0 * (1.0 + beta)))
}

/// Radius minimising the last two terms of [`bound_expectation_unclipped`]
/// with `I_2` replaced by [`interpolation_bound`]; the noise term is ignored.
pub fn optimal_radius_unclipped(p: &BoundParams) -> f64 {
    let beta = p.beta;
    inter_constants(beta, None).d1 * p.k_inf.powf(-(1.0 - beta)) * p.b * (p.n as f64).powf((1.0 - beta) / 4.0)
}

/// Radius minimising the asymptotically dominant terms of
/// [`bound_highprob_clipped`] with `I_inf` replaced by [`interpolation_bound`].
pub fn optimal_radius_highprob_clipped(p: &BoundParams) -> f64 {
    let beta = p.beta;
    let e = (1.0 - beta) / (1.0 + beta);
    prob_bdd_inter_constants(beta, None).d1
        * p.k_inf.powf(-e)
        * p.b.powf(2.0 / (1.0 + beta))
        * (16.0 * p.c + 5.0 * p.sigma).powf(-e)
        * p.t.powf(-e / 2.0)
        * (p.n as f64).powf(e / 2.0)
}

/// Numeric minimiser of all three terms of [`bound_expectation_unclipped`]
/// with `I_2` replaced by [`interpolation_bound`].
///
/// The objective is convex in `r`, so its derivative is bisected; the
/// minimiser never exceeds [`optimal_radius_unclipped`], where the derivative
/// equals the non-negative noise coefficient.
pub fn minimise_unclipped_bound(p: &BoundParams) -> Result<f64> {
    p.validate()?;
    let (k, rn, beta) = (p.k_inf, p.root_n(), p.beta);
    if k == 0.0 {
        return Err(argument("the unclipped bound has no finite minimiser when |k|_inf = 0"));
    }
    let scale = p.b.powf(2.0 / (1.0 - beta));
    let slope = |r: f64| {
        8.0 * k * p.sigma / rn + 128.0 * k * k * r / rn
            - 10.0 * decay(beta) * scale * r.powf(-decay(beta) - 1.0)
    };
    let mut hi = optimal_radius_unclipped(p);
    let mut lo = hi / 2.0;
    while slope(lo) > 0.0 {
        hi = lo;
        lo /= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if slope(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Constants of the rate forms obtained by substituting the interpolation
/// bound and a radius `d1 * (scaling in n)` into a base bound. Unused entries
/// are zero.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RateConstants {
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
    pub d4: f64,
    pub d5: f64,
}

/// Unclipped rate `D2 |k|^{2b} B^2 n^{-b/2} + D3 |k|^b B sigma n^{-(1+b)/4}`.
/// Without `d1`, uses the minimiser of the last two terms.
pub fn inter_constants(beta: f64, d1: Option<f64>) -> RateConstants {
    let d1 = d1.unwrap_or_else(|| (5.0 * beta / (32.0 * (1.0 - beta))).powf((1.0 - beta) / 2.0));
    RateConstants { d1, d2: 64.0 * d1 * d1 + 10.0 * d1.powf(-decay(beta)), d3: 8.0 * d1, d4: 0.0, d5: 0.0 }
}

/// Clipped rate `D2 |k|^{2b/(1+b)} B^{2/(1+b)} (16C + sigma)^{2b/(1+b)} n^{-b/(1+b)}`.
/// Without `d1`, uses the exact minimiser.
pub fn bdd_inter_constants(beta: f64, d1: Option<f64>) -> RateConstants {
    let d1 = d1.unwrap_or_else(|| (5.0 * beta / (2.0 * (1.0 - beta))).powf((1.0 - beta) / (1.0 + beta)));
    RateConstants { d1, d2: 8.0 * d1 + 10.0 * d1.powf(-decay(beta)), d3: 0.0, d4: 0.0, d5: 0.0 }
}

/// High-probability clipped rate with four terms. Without `d1`, uses the
/// minimiser of the dominant terms.
pub fn prob_bdd_inter_constants(beta: f64, d1: Option<f64>) -> RateConstants {
    let d1 = d1.unwrap_or_else(|| (5.0 * beta / (2.0 * (1.0 - beta))).powf((1.0 - beta) / (1.0 + beta)));
    RateConstants {
        d1,
        d2: 8.0 * d1 + 10.0 * d1.powf(-decay(beta)),
        d3: 64.0 * d1.sqrt(),
        d4: 16.0,
        d5: 16.0 / 3.0,
    }
}

/// Unclipped rate form evaluated at `p`.
pub fn inter_rate_bound(p: &BoundParams, k: &RateConstants) -> f64 {
    let (b, beta, n) = (p.b, p.beta, p.n as f64);
    k.d2 * p.k_inf.powf(2.0 * beta) * b * b * n.powf(-beta / 2.0)
        + k.d3 * p.k_inf.powf(beta) * b * p.sigma * n.powf(-(1.0 + beta) / 4.0)
}

/// Clipped rate form evaluated at `p`.
pub fn bdd_inter_rate_bound(p: &BoundParams, k: &RateConstants) -> f64 {
    let (beta, n) = (p.beta, p.n as f64);
    let e = 2.0 * beta / (1.0 + beta);
    k.d2 * p.k_inf.powf(e) * p.b.powf(2.0 / (1.0 + beta)) * (16.0 * p.c + p.sigma).powf(e) * n.powf(-beta / (1.0 + beta))
}

/// High-probability clipped rate form evaluated at `p`.
pub fn prob_bdd_inter_rate_bound(p: &BoundParams, k: &RateConstants) -> Result<f64> {
    check_t(p.t)?;
    let (beta, n, t, c) = (p.beta, p.n as f64, p.t, p.c);
    let s = 16.0 * c + 5.0 * p.sigma;
    let first = k.d2
        * p.k_inf.powf(2.0 * beta / (1.0 + beta))
        * p.b.powf(2.0 / (1.0 + beta))
        * s.powf(2.0 * beta / (1.0 + beta))
        * t.powf(beta / (1.0 + beta))
        * n.powf(-beta / (1.0 + beta));
    let mixed = (1.0 + 3.0 * beta) / (4.0 * (1.0 + beta));
    let second = k.d3
        * p.k_inf.powf(beta / (1.0 + beta))
        * p.b.powf(1.0 / (1.0 + beta))
        * c.powf(1.5)
        * s.powf(-(1.0 - beta) / (2.0 * (1.0 + beta)))
        * t.powf(mixed)
        * n.powf(-mixed);
    Ok(first + second + k.d4 * c * c * t.sqrt() / n.sqrt() + k.d5 * c * c * t / n)
}

/// [`bound_expectation_clipped`] at the optimal radius with `I_2` replaced by
/// [`interpolation_bound`]: the baseline fed to the validation bound.
pub fn clipped_interpolation_baseline(p: &BoundParams) -> Result<f64> {
    p.validate()?;
    let r = optimal_radius_clipped(p);
    Ok(bound_expectation_clipped(p, r, interpolation_bound(p.b, p.beta, r)?))
}

/// Sup-norm covering number bound for the clipped estimators over radii in
/// `[0, rho]`.
pub fn covering_bound(k_inf: f64, rho: f64, eps: f64) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(argument(format!("covering radius must be positive, got {eps}")));
    }
    Ok(1.0 + k_inf * k_inf * rho * rho / (2.0 * eps * eps))
}

/// Closed-form bound on `int_0^L (log(a N(eps)))^{1/2} d eps`.
///
/// For finite `L`, any `a >= 1`. For `L = inf` (only with `a = 1`), the
/// integrand vanishes beyond `2C` and the bound depends on `C` instead.
pub fn entropy_integral(k_inf: f64, rho: f64, c: f64, l: f64, a: f64) -> Result<f64> {
    check_entropy_args(c, l, a)?;
    let kr2 = k_inf * k_inf * rho * rho;
    if l.is_infinite() {
        return Ok(2.0 * (1.0 + kr2 / (8.0 * c * c)).ln().sqrt() * c + (2.0 * PI).sqrt() * c);
    }
    Ok(((1.0 + kr2 / (2.0 * l * l)) * a).ln().sqrt() * l + (PI / 2.0).sqrt() * l)
}

/// [`entropy_integral`]'s left-hand side, integrated numerically with
/// [`covering_bound`] as the covering number.
pub fn entropy_integral_numeric(k_inf: f64, rho: f64, c: f64, l: f64, a: f64) -> Result<f64> {
    check_entropy_args(c, l, a)?;
    let upper = if l.is_infinite() { 2.0 * c } else { l };
    let integrand = |eps: f64| -> f64 {
        let n = 1.0 + k_inf * k_inf * rho * rho / (2.0 * eps * eps);
        (a * n).ln().max(0.0).sqrt()
    };
    // eps = upper * e^{-v} maps the integrable log singularity at 0 to a
    // smooth, exponentially decaying tail
    let g = |v: f64| {
        let eps = upper * (-v).exp();
        if eps == 0.0 {
            0.0
        } else {
            eps * integrand(eps)
        }
    };
    Ok(adaptive_simpson(&g, 0.0, 60.0, 1e-12, 50))
}

fn check_entropy_args(c: f64, l: f64, a: f64) -> Result<()> {
    if !(l > 0.0) {
        return Err(argument(format!("integration limit must be positive, got {l}")));
    }
    if !(a >= 1.0 && a.is_finite()) {
        return Err(argument(format!("multiplier a must be at least 1, got {a}")));
    }
    if l.is_infinite() {
        if a != 1.0 {
            return Err(argument("an infinite integration limit needs a = 1"));
        }
        if !(c > 0.0 && c.is_finite()) {
            return Err(argument(format!("C must be positive, got {c}")));
        }
    }
    Ok(())
}

fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, depth)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}
