//! The norm-constrained least-squares estimator
//! `h_r = argmin_{|f|_H <= r} (1/n) sum (f(X_i) - Y_i)^2`.
//!
//! With `K = A D A^T` and `p = A^T Y`, the solution lies in the span of the
//! kernel sections at the design points with coefficients
//! `(A^T a)_i = p_i / (D_i + n mu)` for `i < m` and zero beyond the rank. The
//! multiplier `mu(r)` is zero when `r` reaches the threshold
//! `r* = (sum_{i<m} p_i^2 / D_i)^{1/2}`, and otherwise is the unique positive
//! root of
//!
//! ```text
//! phi(mu) = sum_{i<m} D_i p_i^2 / (D_i + n mu)^2 - r^2,
//! ```
//!
//! which is strictly decreasing, so bisection on
//! `[0, (sum D_i p_i^2)^{1/2} / (n r)]` finds it. A second route bisects the
//! same equation written as `Y^T (K + n mu I)^{-1} K (K + n mu I)^{-1} Y = r^2`
//! using Cholesky solves instead of the eigendecomposition.

use std::sync::Arc;

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::eigen::{eigh, GramDecomposition, DEFAULT_RANK_TOLERANCE};
use crate::error::{argument, Error, Result};
use crate::kernels::KernelSpec;

/// Relative accuracy on the realised radius that the diagonalised bisection
/// keeps refining towards after the `mu` tolerance is met.
const RADIUS_SLACK: f64 = 1e-10;

/// How the multiplier is computed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Bisection in the eigenbasis of `K`.
    #[default]
    Diagonalised,
    /// Bisection with a Cholesky solve of `K + n mu I` per step.
    MatrixSolve,
}

/// Stopping rules for the multiplier bisection.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BisectionOptions {
    /// Absolute tolerance on `mu`.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub strategy: Strategy,
    /// When set, the diagonalised bisection also stops as soon as the radius
    /// `s` realised by the current multiplier is within this distance of `r`.
    /// Ignored for `r` not larger than the tolerance itself, where only the
    /// `mu` tolerance applies.
    pub radius_tolerance: Option<f64>,
}

impl Default for BisectionOptions {
    fn default() -> Self {
        Self { tolerance: 1e-10, max_iterations: 200, strategy: Strategy::Diagonalised, radius_tolerance: None }
    }
}

impl BisectionOptions {
    pub fn matrix_solve() -> Self {
        Self { strategy: Strategy::MatrixSolve, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance.is_finite() && self.tolerance > 0.0) {
            return Err(argument(format!("bisection tolerance must be positive, got {}", self.tolerance)));
        }
        if self.max_iterations == 0 {
            return Err(argument("max_iterations must be positive"));
        }
        if let Some(c) = self.radius_tolerance {
            if !(c.is_finite() && c > 0.0) {
                return Err(argument(format!("radius tolerance must be positive, got {c}")));
            }
        }
        Ok(())
    }

    /// Iterations needed to shrink a bracket of the given width to the tolerance.
    pub fn iterations_needed(&self, width: f64) -> usize {
        if width <= self.tolerance {
            0
        } else {
            (width / self.tolerance).log2().ceil() as usize
        }
    }
}

/// Result of a bisection: the returned multiplier and the number of function
/// evaluations spent.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bisection {
    pub root: f64,
    pub iterations: usize,
}

/// Bisects a non-increasing `f` on `[lo, hi]` with `f(lo) >= 0 >= f(hi)`.
///
/// Always answers with the upper end of the bracket, where `f <= 0`. Once the
/// bracket is no wider than `tol` that end is within `tol` of the root; the
/// search still continues until `refined(hi)` holds or the bracket can no
/// longer be split in floating point. `early(hi)` ends the search at any point.
pub(crate) fn bisect_decreasing(
    mut f: impl FnMut(f64) -> f64,
    mut lo: f64,
    mut hi: f64,
    tol: f64,
    max_iterations: usize,
    mut refined: impl FnMut(f64) -> bool,
    mut early: impl FnMut(f64) -> bool,
) -> Result<Bisection> {
    let mut iterations = 0;
    loop {
        let within_tol = hi - lo <= tol;
        if within_tol && refined(hi) {
            return Ok(Bisection { root: hi, iterations });
        }
        let mid = lo + 0.5 * (hi - lo);
        if mid <= lo || mid >= hi {
            return Ok(Bisection { root: hi, iterations });
        }
        if iterations == max_iterations {
            if within_tol {
                return Ok(Bisection { root: hi, iterations });
            }
            return Err(Error::Convergence { iterations, tolerance: tol });
        }
        iterations += 1;
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
            if early(hi) {
                return Ok(Bisection { root: hi, iterations });
            }
        }
    }
}

/// `K = A D A^T` paired with `p = A^T Y`: everything needed to evaluate the
/// estimator at any radius.
#[derive(Clone, Debug)]
pub struct Spectrum<'a> {
    decomp: &'a GramDecomposition,
    projected: Vec<f64>,
}

impl<'a> Spectrum<'a> {
    pub fn new(decomp: &'a GramDecomposition, y: &[f64]) -> Result<Self> {
        if y.len() != decomp.dim() {
            return Err(argument(format!(
                "response length {} does not match Gram dimension {}",
                y.len(),
                decomp.dim()
            )));
        }
        Ok(Self { decomp, projected: decomp.project(y) })
    }

    pub fn n(&self) -> usize {
        self.decomp.dim()
    }

    pub fn decomposition(&self) -> &GramDecomposition {
        self.decomp
    }

    /// `p = A^T Y`.
    pub fn projected(&self) -> &[f64] {
        &self.projected
    }

    fn modes(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        let m = self.decomp.rank();
        self.decomp.eigenvalues()[..m].iter().copied().zip(self.projected[..m].iter().copied())
    }

    /// Smallest radius at which the norm constraint is inactive.
    pub fn threshold(&self) -> f64 {
        self.modes().map(|(d, p)| p * p / d).sum::<f64>().sqrt()
    }

    /// Squared RKHS norm of the estimator built with multiplier `mu`.
    pub fn norm_sq_at(&self, mu: f64) -> f64 {
        let shift = self.n() as f64 * mu;
        self.modes()
            .map(|(d, p)| {
                let q = d + shift;
                d * p * p / (q * q)
            })
            .sum()
    }

    /// Bisection for `mu(r)`; returns exactly zero when `r >= r*`.
    pub fn solve(&self, r: f64, opts: &BisectionOptions) -> Result<Bisection> {
        opts.validate()?;
        if !(r.is_finite() && r > 0.0) {
            return Err(argument(format!("radius must be positive, got {r}")));
        }
        if r >= self.threshold() {
            return Ok(Bisection { root: 0.0, iterations: 0 });
        }
        let n = self.n() as f64;
        let hi = self.modes().map(|(d, p)| d * p * p).sum::<f64>().sqrt() / (n * r);
        let r_sq = r * r;
        let radius_tol = opts.radius_tolerance.filter(|&c| r > c);
        bisect_decreasing(
            |mu| self.norm_sq_at(mu) - r_sq,
            0.0,
            hi,
            opts.tolerance,
            opts.max_iterations,
            |mu| {
                let gap = r - self.norm_sq_at(mu).sqrt();
                gap <= RADIUS_SLACK * (1.0 + r) && radius_tol.is_none_or(|c| gap <= c)
            },
            |mu| radius_tol.is_some_and(|c| r - self.norm_sq_at(mu).sqrt() <= c),
        )
    }

    /// Eigenbasis coefficients `w = A^T a` at multiplier `mu`.
    pub fn weights(&self, mu: f64) -> Result<Vec<f64>> {
        if !(mu >= 0.0) {
            return Err(argument(format!("multiplier must be non-negative, got {mu}")));
        }
        let shift = self.n() as f64 * mu;
        let m = self.decomp.rank();
        let mut w = vec![0.0; self.n()];
        for (i, (d, p)) in self.modes().enumerate() {
            w[i] = p / (d + shift);
        }
        debug_assert!(w[m..].iter().all(|&x| x == 0.0));
        Ok(w)
    }

    /// Kernel-section coefficients `a` at multiplier `mu`.
    pub fn coefficients(&self, mu: f64) -> Result<Vec<f64>> {
        Ok(self.decomp.unproject(&self.weights(mu)?))
    }

    /// Radius `s` with `mu(s) = nu`.
    pub fn effective_radius(&self, nu: f64) -> Result<f64> {
        if !(nu.is_finite() && nu > 0.0) {
            return Err(argument(format!("multiplier must be positive, got {nu}")));
        }
        Ok(self.norm_sq_at(nu).sqrt())
    }
}

/// Threshold radius `r*`; zero when `K = 0` or `Y = 0`.
pub fn mu_zero_threshold(decomp: &GramDecomposition, y: &[f64]) -> Result<f64> {
    Ok(Spectrum::new(decomp, y)?.threshold())
}

/// `mu(r)` to within `opts.tolerance`, by bisection in the eigenbasis.
pub fn solve_mu(decomp: &GramDecomposition, y: &[f64], r: f64, opts: &BisectionOptions) -> Result<f64> {
    Ok(Spectrum::new(decomp, y)?.solve(r, opts)?.root)
}

/// `mu(r)` without diagonalising `K`.
///
/// Returns `opts.tolerance` itself whenever `mu(r) <= tolerance`, so the result
/// is always positive and `K + n mu I` stays invertible.
pub fn solve_mu_matrix(k: &Mat<f64>, y: &[f64], r: f64, opts: &BisectionOptions) -> Result<f64> {
    Ok(solve_mu_matrix_with_stats(k, y, r, opts)?.root)
}

pub fn solve_mu_matrix_with_stats(k: &Mat<f64>, y: &[f64], r: f64, opts: &BisectionOptions) -> Result<Bisection> {
    opts.validate()?;
    let n = k.nrows();
    if n == 0 || k.ncols() != n || y.len() != n {
        return Err(argument("matrix and response dimensions do not match"));
    }
    if !(r.is_finite() && r > 0.0) {
        return Err(argument(format!("radius must be positive, got {r}")));
    }
    let eps = opts.tolerance;
    let r_sq = r * r;
    let psi = |mu: f64| -> Result<f64> {
        let v = shifted_solve(k, n as f64 * mu, y)?;
        Ok(quad_form(k, &v) - r_sq)
    };
    if psi(eps)? <= 0.0 {
        return Ok(Bisection { root: eps, iterations: 0 });
    }
    let hi = quad_form(k, y).max(0.0).sqrt() / (n as f64 * r);
    if hi <= eps {
        return Ok(Bisection { root: eps, iterations: 0 });
    }
    let mut failure = None;
    let out = bisect_decreasing(
        |mu| match psi(mu) {
            Ok(v) => v,
            Err(e) => {
                failure.get_or_insert(e);
                0.0
            }
        },
        eps,
        hi,
        eps,
        opts.max_iterations,
        |_| true,
        |_| false,
    )?;
    match failure {
        Some(e) => Err(e),
        None => Ok(out),
    }
}

/// Coefficients `a` with `(A^T a)_i = p_i / (D_i + n mu)` for `i < m`.
pub fn coefficients(decomp: &GramDecomposition, y: &[f64], mu: f64) -> Result<Vec<f64>> {
    Spectrum::new(decomp, y)?.coefficients(mu)
}

/// Radius `s` whose exact multiplier is `nu`.
pub fn effective_radius(decomp: &GramDecomposition, y: &[f64], nu: f64) -> Result<f64> {
    Spectrum::new(decomp, y)?.effective_radius(nu)
}

/// Projection of `t` onto `[-c, c]`.
pub fn clip(t: f64, c: f64) -> f64 {
    debug_assert!(c > 0.0);
    t.clamp(-c, c)
}

/// A fitted estimator `h_r = sum_i a_i k(X_i, .)`.
#[derive(Clone, Debug, Serialize)]
pub struct IvanovFit {
    pub spec: KernelSpec,
    pub design: Arc<[Vec<f64>]>,
    pub coefficients: Vec<f64>,
    pub radius: f64,
    /// Lagrange multiplier used; `+inf` for the zero estimator at `r = 0`.
    pub mu: f64,
    /// `(a^T K a)^{1/2}`.
    pub achieved_norm: f64,
    /// `sum_i (h_r(X_i) - Y_i)^2`.
    pub empirical_sse: f64,
}

impl IvanovFit {
    pub fn n(&self) -> usize {
        self.coefficients.len()
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        self.spec.check_point(x)?;
        Ok(self.predict_unchecked(x))
    }

    pub(crate) fn predict_unchecked(&self, x: &[f64]) -> f64 {
        self.design
            .iter()
            .zip(&self.coefficients)
            .filter(|(_, &a)| a != 0.0)
            .map(|(xi, a)| a * self.spec.eval_unchecked(xi, x))
            .sum()
    }

    /// Predictions clipped to `[-c, c]`.
    pub fn clipped(&self, c: f64) -> ClippedPredictor<'_> {
        ClippedPredictor { fit: self, bound: c }
    }

    /// `|h_r - other|_H^2` computed through the Gram matrix of the shared design.
    pub fn distance_sq(&self, other: &IvanovFit, gram: &Mat<f64>) -> f64 {
        let diff: Vec<f64> = self.coefficients.iter().zip(&other.coefficients).map(|(a, b)| a - b).collect();
        quad_form(gram, &diff)
    }
}

/// An estimator composed with the clipping projection.
#[derive(Clone, Copy, Debug)]
pub struct ClippedPredictor<'a> {
    pub fit: &'a IvanovFit,
    pub bound: f64,
}

impl ClippedPredictor<'_> {
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        Ok(clip(self.fit.predict(x)?, self.bound))
    }
}

pub fn predict(fit: &IvanovFit, x: &[f64]) -> Result<f64> {
    fit.predict(x)
}

/// Training data together with its Gram matrix and eigendecomposition, for
/// evaluating the estimator at many radii.
#[derive(Clone, Debug)]
pub struct IvanovPath {
    spec: KernelSpec,
    design: Arc<[Vec<f64>]>,
    responses: Vec<f64>,
    gram: Mat<f64>,
    decomp: GramDecomposition,
    projected: Vec<f64>,
}

impl IvanovPath {
    pub fn new(spec: &KernelSpec, xs: &[Vec<f64>], y: &[f64]) -> Result<Self> {
        check_training(xs, y)?;
        let gram = spec.gram_matrix(xs)?;
        let decomp = eigh(&gram, DEFAULT_RANK_TOLERANCE)?;
        let projected = decomp.project(y);
        Ok(Self {
            spec: spec.clone(),
            design: xs.to_vec().into(),
            responses: y.to_vec(),
            gram,
            decomp,
            projected,
        })
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn design(&self) -> &[Vec<f64>] {
        &self.design
    }

    pub fn responses(&self) -> &[f64] {
        &self.responses
    }

    pub fn gram(&self) -> &Mat<f64> {
        &self.gram
    }

    pub fn decomposition(&self) -> &GramDecomposition {
        &self.decomp
    }

    pub fn spectrum(&self) -> Spectrum<'_> {
        Spectrum { decomp: &self.decomp, projected: self.projected.clone() }
    }

    pub fn threshold(&self) -> f64 {
        self.spectrum().threshold()
    }

    /// Multiplier and eigenbasis coefficients at radius `r >= 0`.
    pub fn solve_weights(&self, r: f64, opts: &BisectionOptions) -> Result<(f64, Vec<f64>)> {
        if !(r >= 0.0 && r.is_finite()) {
            return Err(argument(format!("radius must be non-negative, got {r}")));
        }
        if r == 0.0 {
            return Ok((f64::INFINITY, vec![0.0; self.decomp.dim()]));
        }
        let spectrum = self.spectrum();
        let mu = spectrum.solve(r, opts)?.root;
        Ok((mu, spectrum.weights(mu)?))
    }

    /// The estimator at radius `r`, by the diagonalised route.
    pub fn fit(&self, r: f64, opts: &BisectionOptions) -> Result<IvanovFit> {
        let (mu, w) = self.solve_weights(r, opts)?;
        Ok(self.assemble(r, mu, self.decomp.unproject(&w)))
    }

    /// The estimator at radius `r`, by the Cholesky route.
    pub fn fit_matrix_solve(&self, r: f64, opts: &BisectionOptions) -> Result<IvanovFit> {
        if !(r >= 0.0 && r.is_finite()) {
            return Err(argument(format!("radius must be non-negative, got {r}")));
        }
        if r == 0.0 {
            return Ok(self.assemble(0.0, f64::INFINITY, vec![0.0; self.responses.len()]));
        }
        let nu = solve_mu_matrix(&self.gram, &self.responses, r, opts)?;
        let n = self.responses.len() as f64;
        let a = shifted_solve(&self.gram, n * nu, &self.responses)?;
        Ok(self.assemble(r, nu, a))
    }

    fn assemble(&self, r: f64, mu: f64, mut a: Vec<f64>) -> IvanovFit {
        let mut achieved_norm = accurate_quad_form(&self.gram, &a).max(0.0).sqrt();
        if achieved_norm > r && achieved_norm > 0.0 {
            let scale = r / achieved_norm;
            a.iter_mut().for_each(|v| *v *= scale);
            achieved_norm = accurate_quad_form(&self.gram, &a).max(0.0).sqrt();
        }
        let ka = mat_vec(&self.gram, &a);
        let empirical_sse = ka.iter().zip(&self.responses).map(|(f, y)| (f - y) * (f - y)).sum();
        IvanovFit {
            spec: self.spec.clone(),
            design: self.design.clone(),
            coefficients: a,
            radius: r,
            mu,
            achieved_norm,
            empirical_sse,
        }
    }
}

/// Fits `h_r` on `(xs, y)`; `r = 0` gives the zero function.
pub fn fit(spec: &KernelSpec, xs: &[Vec<f64>], y: &[f64], r: f64, opts: &BisectionOptions) -> Result<IvanovFit> {
    opts.validate()?;
    let path = IvanovPath::new(spec, xs, y)?;
    match opts.strategy {
        Strategy::Diagonalised => path.fit(r, opts),
        Strategy::MatrixSolve => path.fit_matrix_solve(r, opts),
    }
}

pub(crate) fn check_training(xs: &[Vec<f64>], y: &[f64]) -> Result<()> {
    if xs.is_empty() {
        return Err(argument("training set is empty"));
    }
    if xs.len() != y.len() {
        return Err(argument(format!("{} points but {} responses", xs.len(), y.len())));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(argument("responses must be finite"));
    }
    Ok(())
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn mat_vec(k: &Mat<f64>, v: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; k.nrows()];
    for (j, &vj) in v.iter().enumerate() {
        if vj == 0.0 {
            continue;
        }
        let col = k.col(j);
        for (i, o) in out.iter_mut().enumerate() {
            *o += col[i] * vj;
        }
    }
    out
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let z = s - a;
    (s, (a - (s - z)) + (b - z))
}

/// Compensated dot product, twice working precision.
fn dot2(a: &[f64], b: &[f64]) -> f64 {
    let (mut s, mut c) = (0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let p = x * y;
        let e = x.mul_add(*y, -p);
        let (t, q) = two_sum(s, p);
        s = t;
        c += q + e;
    }
    s + c
}

/// `v^T K v` with compensated summation.
pub(crate) fn accurate_quad_form(k: &Mat<f64>, v: &[f64]) -> f64 {
    let n = k.nrows();
    let mut row = vec![0.0; n];
    let kv: Vec<f64> = (0..n)
        .map(|i| {
            for (j, r) in row.iter_mut().enumerate() {
                *r = k[(i, j)];
            }
            dot2(&row, v)
        })
        .collect();
    dot2(v, &kv)
}

/// `v^T K v`.
pub(crate) fn quad_form(k: &Mat<f64>, v: &[f64]) -> f64 {
    dot(v, &mat_vec(k, v))
}

/// Solves `(K + shift I) v = y` by Cholesky factorisation.
pub(crate) fn shifted_solve(k: &Mat<f64>, shift: f64, y: &[f64]) -> Result<Vec<f64>> {
    let n = k.nrows();
    // lower triangle, row-major
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = k[(i, j)] + if i == j { shift } else { 0.0 };
            let (ri, rj) = (&l[i * n..i * n + j], &l[j * n..j * n + j]);
            s -= dot(ri, rj);
            if i == j {
                if !(s > 0.0) {
                    return Err(Error::Numerical(format!(
                        "K + {shift:e} I is not positive definite (pivot {s:e} at {i})"
                    )));
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    let mut z = y.to_vec();
    for i in 0..n {
        let s = z[i] - dot(&l[i * n..i * n + i], &z[..i]);
        z[i] = s / l[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = z[i];
        for j in (i + 1)..n {
            s -= l[j * n + i] * z[j];
        }
        z[i] = s / l[i * n + i];
    }
    Ok(z)
}
