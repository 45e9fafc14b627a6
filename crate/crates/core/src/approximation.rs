//! How well a target `g`, known through its values on a finite design, can be
//! approximated from the ball `r B_H`.
//!
//! On a design with weights `w`, any `h` can be replaced by its projection onto
//! `span{k(x_i, .)}` without changing its values on the design or increasing its
//! norm, so the infimum over the ball is a finite-dimensional problem. Writing
//! `h = sum_j b_j w_j^{1/2} k(x_j, .)` turns
//! `sum_i w_i (h(x_i) - g_i)^2` into `|M b - w^{1/2} g|^2` with
//! `M = W^{1/2} K W^{1/2}` and `|h|_H^2 = b^T M b`: an unweighted norm-constrained
//! least-squares problem, solved by the same spectral machinery as the estimator.

use faer::Mat;
use serde::Serialize;

use crate::eigen::{eigh, GramDecomposition, DEFAULT_RANK_TOLERANCE};
use crate::error::{argument, Error, Result};
use crate::ivanov::{mat_vec, BisectionOptions, Spectrum};
use crate::kernels::KernelSpec;

/// A probability measure supported on finitely many points.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DiscreteDesign {
    points: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

impl DiscreteDesign {
    pub fn new(points: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        if points.is_empty() || points.len() != weights.len() {
            return Err(argument("design needs one non-negative weight per point"));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(argument("design weights must be finite and non-negative"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(argument(format!("design weights sum to {total}, not 1")));
        }
        Ok(Self { points, weights })
    }

    pub fn uniform(points: Vec<Vec<f64>>) -> Result<Self> {
        let n = points.len();
        if n == 0 {
            return Err(argument("design needs at least one point"));
        }
        Self::new(points, vec![1.0 / n as f64; n])
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `|g|_{L^2(P)}^2`.
    pub fn l2_norm_sq(&self, g: &[f64]) -> f64 {
        self.weights.iter().zip(g).map(|(w, v)| w * v * v).sum()
    }
}

/// Options for solving the ball-constrained problems to full working precision.
fn exact_options() -> BisectionOptions {
    BisectionOptions { tolerance: f64::MIN_POSITIVE, max_iterations: 2200, ..Default::default() }
}

/// Best approximation of weighted values from the ball: the subproblem used by
/// both the `L^2` and sup-norm oracles.
struct WeightedProblem {
    decomp: GramDecomposition,
    sqrt_w: Vec<f64>,
    /// Indices into the full design.
    support: Vec<usize>,
}

impl WeightedProblem {
    fn new(gram: &Mat<f64>, weights: &[f64]) -> Result<Self> {
        let support: Vec<usize> = (0..weights.len()).filter(|&i| weights[i] > 0.0).collect();
        let sqrt_w: Vec<f64> = support.iter().map(|&i| weights[i].sqrt()).collect();
        let s = support.len();
        let m = Mat::from_fn(s, s, |i, j| sqrt_w[i] * gram[(support[i], support[j])] * sqrt_w[j]);
        let decomp = eigh(&m, DEFAULT_RANK_TOLERANCE)?;
        Ok(Self { decomp, sqrt_w, support })
    }

    fn spectrum(&self, g: &[f64]) -> Result<Spectrum<'_>> {
        let y: Vec<f64> = self.support.iter().zip(&self.sqrt_w).map(|(&i, sw)| sw * g[i]).collect();
        Spectrum::new(&self.decomp, &y)
    }

    /// Multiplier for radius `r` (`+inf` at `r = 0`).
    fn multiplier(spectrum: &Spectrum<'_>, r: f64) -> Result<f64> {
        if r == 0.0 {
            return Ok(f64::INFINITY);
        }
        Ok(spectrum.solve(r, &exact_options())?.root)
    }

    /// Weighted squared residual at the optimum, in closed form.
    fn objective(spectrum: &Spectrum<'_>, mu: f64) -> f64 {
        let n = spectrum.n() as f64;
        let m = spectrum.decomposition().rank();
        let ev = spectrum.decomposition().eigenvalues();
        let p = spectrum.projected();
        let mut total = 0.0;
        for i in 0..p.len() {
            let keep = if i < m && mu.is_finite() {
                let shift = n * mu;
                shift / (ev[i] + shift)
            } else {
                1.0
            };
            total += (keep * p[i]).powi(2);
        }
        total
    }

    /// Kernel-section coefficients over the full design at multiplier `mu`.
    fn coefficients(&self, spectrum: &Spectrum<'_>, mu: f64, len: usize) -> Result<Vec<f64>> {
        let mut a = vec![0.0; len];
        if mu.is_finite() {
            let b = spectrum.coefficients(mu)?;
            for ((&i, sw), bj) in self.support.iter().zip(&self.sqrt_w).zip(b) {
                a[i] = sw * bj;
            }
        }
        Ok(a)
    }
}

/// `I_2(g, r)` and friends for one target on one design, reusing a single
/// decomposition across radii.
pub struct ApproximationOracle {
    design: DiscreteDesign,
    gram: Mat<f64>,
    values: Vec<f64>,
    problem: WeightedProblem,
}

impl ApproximationOracle {
    pub fn new(spec: &KernelSpec, design: &DiscreteDesign, g_values: &[f64]) -> Result<Self> {
        if g_values.len() != design.len() {
            return Err(argument(format!(
                "{} target values for a design of {} points",
                g_values.len(),
                design.len()
            )));
        }
        if g_values.iter().any(|v| !v.is_finite()) {
            return Err(argument("target values must be finite"));
        }
        let gram = spec.gram_matrix(design.points())?;
        let problem = WeightedProblem::new(&gram, design.weights())?;
        Ok(Self { design: design.clone(), gram, values: g_values.to_vec(), problem })
    }

    /// `|g|_{L^2(P)}`.
    pub fn target_norm(&self) -> f64 {
        self.design.l2_norm_sq(&self.values).sqrt()
    }

    /// Radius beyond which `I_2` stops decreasing.
    pub fn threshold(&self) -> Result<f64> {
        Ok(self.problem.spectrum(&self.values)?.threshold())
    }

    /// `inf { |h - g|_{L^2(P)}^2 : |h|_H <= r }`.
    pub fn i2(&self, r: f64) -> Result<f64> {
        check_radius(r)?;
        if r == 0.0 {
            return Ok(self.design.l2_norm_sq(&self.values));
        }
        let spectrum = self.problem.spectrum(&self.values)?;
        let mu = WeightedProblem::multiplier(&spectrum, r)?;
        Ok(WeightedProblem::objective(&spectrum, mu))
    }

    /// Coefficients over the design of the best `L^2(P)` approximation in `r B_H`.
    pub fn best_approximation(&self, r: f64) -> Result<Vec<f64>> {
        check_radius(r)?;
        let spectrum = self.problem.spectrum(&self.values)?;
        let mu = WeightedProblem::multiplier(&spectrum, r)?;
        self.problem.coefficients(&spectrum, mu, self.design.len())
    }

    /// Design-restricted estimate of `inf { |h - g|_inf^2 : |h|_H <= r }`.
    ///
    /// Lawson iteration: each weight vector `omega` on the support gives a lower
    /// bound (the weighted `L^2` optimum) and a feasible `h` whose largest squared
    /// residual is an upper bound; weights are then moved towards the worst
    /// points, and each iterate's near-active set is polished into an exactly
    /// equalised candidate. Stops once the bounds are within
    /// `tolerance * max(1, upper)`.
    pub fn iinf(&self, r: f64, max_iterations: usize, tolerance: f64) -> Result<SupNormEstimate> {
        check_radius(r)?;
        let support: Vec<usize> = (0..self.design.len()).filter(|&i| self.design.weights()[i] > 0.0).collect();
        let sup_of = |a: &[f64]| -> f64 {
            let v = mat_vec(&self.gram, a);
            support.iter().map(|&i| (v[i] - self.values[i]).powi(2)).fold(0.0, f64::max)
        };
        if r == 0.0 {
            let upper = sup_of(&vec![0.0; self.design.len()]);
            return Ok(SupNormEstimate { upper, lower: upper, iterations: 0 });
        }

        let n = self.design.len();
        let mut omega = vec![0.0; n];
        for &i in &support {
            omega[i] = 1.0 / support.len() as f64;
        }
        let mut upper = f64::INFINITY;
        let mut lower = 0.0f64;
        let mut iterations = 0;
        while iterations < max_iterations.max(1) {
            iterations += 1;
            let problem = WeightedProblem::new(&self.gram, &omega)?;
            let spectrum = problem.spectrum(&self.values)?;
            let mu = WeightedProblem::multiplier(&spectrum, r)?;
            lower = lower.max(WeightedProblem::objective(&spectrum, mu));
            let a = problem.coefficients(&spectrum, mu, n)?;
            let v = mat_vec(&self.gram, &a);
            let resid: Vec<f64> = (0..n).map(|i| (v[i] - self.values[i]).abs()).collect();
            let worst = support.iter().map(|&i| resid[i] * resid[i]).fold(0.0, f64::max);
            upper = upper.min(worst);
            let top_w = support.iter().map(|&i| omega[i]).fold(0.0, f64::max);
            let top_e = worst.sqrt();
            for cut in [1e-2, 1e-4] {
                let by_weight: Vec<usize> = support.iter().copied().filter(|&i| omega[i] >= cut * top_w).collect();
                let by_residual: Vec<usize> =
                    support.iter().copied().filter(|&i| resid[i] >= (1.0 - cut) * top_e).collect();
                for active in [by_weight, by_residual] {
                    let signs: Vec<f64> = active.iter().map(|&i| (self.values[i] - v[i]).signum()).collect();
                    if let Some(candidate) = self.equalised(&active, &signs, r, &support)? {
                        upper = upper.min(candidate);
                    }
                }
            }
            if upper - lower <= tolerance * upper.max(1.0) {
                break;
            }
            let total: f64 = support.iter().map(|&i| omega[i] * resid[i]).sum();
            if !(total > 0.0) {
                break;
            }
            let top = support.iter().map(|&i| omega[i] * resid[i]).fold(0.0, f64::max);
            for &i in &support {
                let w = omega[i] * resid[i];
                // drop weights too small to influence the weighted problem
                omega[i] = if w > 1e-14 * top { w / total } else { 0.0 };
            }
            let kept: f64 = omega.iter().sum();
            omega.iter_mut().for_each(|w| *w /= kept);
        }
        Ok(SupNormEstimate { upper, lower: lower.min(upper), iterations })
    }

    /// Feasible candidate whose residuals on `active` all equal `signs * s`:
    /// the minimum-norm interpolant of `g - signs * s` has squared norm
    /// quadratic in `s`, so the smallest `s` reaching norm `r` is explicit.
    /// Returns its largest squared residual over `support`.
    fn equalised(&self, active: &[usize], signs: &[f64], r: f64, support: &[usize]) -> Result<Option<f64>> {
        if active.is_empty() {
            return Ok(None);
        }
        let k_a = Mat::from_fn(active.len(), active.len(), |i, j| self.gram[(active[i], active[j])]);
        let decomp = eigh(&k_a, DEFAULT_RANK_TOLERANCE)?;
        let g_a: Vec<f64> = active.iter().map(|&i| self.values[i]).collect();
        let alpha = decomp.project(&g_a);
        let beta = decomp.project(signs);
        let ev = decomp.eigenvalues();
        let m = decomp.rank();
        let (mut qa, mut qb, mut qc) = (0.0, 0.0, 0.0);
        for i in 0..m {
            qa += beta[i] * beta[i] / ev[i];
            qb += alpha[i] * beta[i] / ev[i];
            qc += alpha[i] * alpha[i] / ev[i];
        }
        let s = if qc <= r * r {
            0.0
        } else {
            let disc = qb * qb - qa * (qc - r * r);
            if !(qa > 0.0 && disc >= 0.0) {
                return Ok(None);
            }
            let root = disc.sqrt();
            let (s1, s2) = ((qb - root) / qa, (qb + root) / qa);
            if s1 >= 0.0 {
                s1
            } else if s2 >= 0.0 {
                s2
            } else {
                return Ok(None);
            }
        };
        let w: Vec<f64> = (0..active.len())
            .map(|i| if i < m { (alpha[i] - s * beta[i]) / ev[i] } else { 0.0 })
            .collect();
        let c_a = decomp.unproject(&w);
        let norm_sq = crate::ivanov::quad_form(&k_a, &c_a);
        let scale = if norm_sq > r * r { r / norm_sq.sqrt() } else { 1.0 };
        let mut worst = 0.0f64;
        for &i in support {
            let h: f64 = active.iter().zip(&c_a).map(|(&j, c)| self.gram[(i, j)] * c).sum::<f64>() * scale;
            worst = worst.max((h - self.values[i]).powi(2));
        }
        Ok(Some(worst))
    }

    /// `min_{r >= 0} I_2(g, r)^{1/2} + t r`, the K-functional of `(L^2(P), H)`
    /// restricted to the design.
    pub fn k_functional(&self, t: f64) -> Result<f64> {
        if !(t.is_finite() && t > 0.0) {
            return Err(argument(format!("K-functional parameter must be positive, got {t}")));
        }
        let r_max = self.target_norm() / t + self.threshold()?;
        let objective = |r: f64| -> Result<f64> { Ok(self.i2(r)?.max(0.0).sqrt() + t * r) };
        let at_zero = objective(0.0)?;
        if r_max == 0.0 {
            return Ok(at_zero);
        }
        let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
        let (mut lo, mut hi) = (0.0, r_max);
        let mut x1 = hi - inv_phi * (hi - lo);
        let mut x2 = lo + inv_phi * (hi - lo);
        let mut f1 = objective(x1)?;
        let mut f2 = objective(x2)?;
        while hi - lo > 1e-9 * (1.0 + r_max) {
            if f1 <= f2 {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - inv_phi * (hi - lo);
                f1 = objective(x1)?;
            } else {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + inv_phi * (hi - lo);
                f2 = objective(x2)?;
            }
        }
        Ok(f1.min(f2).min(at_zero).min(objective(r_max)?))
    }
}

/// Bounds bracketing the design-restricted sup-norm approximation error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SupNormEstimate {
    /// Achieved by a feasible function; this is the reported value.
    pub upper: f64,
    pub lower: f64,
    pub iterations: usize,
}

fn check_radius(r: f64) -> Result<()> {
    if !(r.is_finite() && r >= 0.0) {
        return Err(argument(format!("radius must be non-negative, got {r}")));
    }
    Ok(())
}

/// `I_2(g, r)` on a discrete design.
pub fn approx_i2(spec: &KernelSpec, design: &DiscreteDesign, g_values: &[f64], r: f64) -> Result<f64> {
    check_radius(r)?;
    ApproximationOracle::new(spec, design, g_values)?.i2(r)
}

/// Default iteration cap for [`approx_iinf`].
pub const IINF_MAX_ITERATIONS: usize = 500;
/// Default gap tolerance for [`approx_iinf`].
pub const IINF_TOLERANCE: f64 = 1e-6;

/// Upper estimate of `I_inf(g, r)` over the design points.
pub fn approx_iinf(
    spec: &KernelSpec,
    design: &DiscreteDesign,
    g_values: &[f64],
    r: f64,
    max_iterations: usize,
) -> Result<f64> {
    check_radius(r)?;
    if max_iterations == 0 {
        return Err(argument("solver needs at least one iteration"));
    }
    Ok(ApproximationOracle::new(spec, design, g_values)?.iinf(r, max_iterations, IINF_TOLERANCE)?.upper)
}

/// `B^{2/(1-beta)} / r^{2 beta/(1-beta)}`, the bound on `I_2` for targets in the
/// interpolation space of exponent `beta` with norm at most `B`.
pub fn interpolation_bound(b: f64, beta: f64, r: f64) -> Result<f64> {
    check_beta(beta)?;
    if !(b > 0.0 && r > 0.0) {
        return Err(argument("interpolation bound needs B > 0 and r > 0"));
    }
    Ok(b.powf(2.0 / (1.0 - beta)) * r.powf(-2.0 * beta / (1.0 - beta)))
}

/// For `g` in `H` itself: `|g|_{L^2}^{1-beta} |g|_H^beta` bounds
/// `sup_t t^{-beta} K(g, t)`, since `K(g, t) <= min(|g|_{L^2}, t |g|_H)`.
pub fn interpolation_norm_of_rkhs_element(l2_norm: f64, h_norm: f64, beta: f64) -> Result<f64> {
    check_beta(beta)?;
    Ok(l2_norm.powf(1.0 - beta) * h_norm.powf(beta))
}

pub(crate) fn check_beta(beta: f64) -> Result<()> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::Argument(format!("beta must lie in (0, 1), got {beta}")));
    }
    Ok(())
}

/// `K(g, t)` on a discrete design.
pub fn k_functional(design: &DiscreteDesign, spec: &KernelSpec, g_values: &[f64], t: f64) -> Result<f64> {
    if !(t.is_finite() && t > 0.0) {
        return Err(argument(format!("K-functional parameter must be positive, got {t}")));
    }
    ApproximationOracle::new(spec, design, g_values)?.k_functional(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::BoxDomain;
    use proptest::prelude::*;

    /// Laplacian kernel with a tiny lengthscale: numerically the identity on
    /// well separated points.
    fn identity_kernel() -> KernelSpec {
        KernelSpec::laplacian(1e-3, BoxDomain::new(vec![0.0], vec![1.0]).unwrap()).unwrap()
    }

    fn two_points() -> DiscreteDesign {
        DiscreteDesign::uniform(vec![vec![0.0], vec![1.0]]).unwrap()
    }

    #[test]
    fn ball_projection_example() {
        // minimise (1/2)|a - g|^2 over |a| <= 1 with g = (3, 4): a = g / 5
        let oracle_value = 0.5 * 25.0 * (1.0f64 - 1.0 / 5.0).powi(2);
        assert!((oracle_value - 8.0f64).abs() < 1e-12);
        let v = approx_i2(&identity_kernel(), &two_points(), &[3.0, 4.0], 1.0).unwrap();
        assert!((v - 8.0).abs() < 1e-9, "{v}");
    }

    #[test]
    fn zero_radius_is_squared_norm() {
        let d = DiscreteDesign::new(vec![vec![0.1], vec![0.4], vec![0.9]], vec![0.2, 0.3, 0.5]).unwrap();
        let g = [1.0, -2.0, 0.5];
        let v = approx_i2(&KernelSpec::brownian(), &d, &g, 0.0).unwrap();
        assert!((v - (0.2 + 0.3 * 4.0 + 0.5 * 0.25)).abs() < 1e-15);
    }

    #[test]
    fn members_of_the_ball_have_zero_error() {
        let spec = KernelSpec::brownian();
        let pts: Vec<Vec<f64>> = (1..=6).map(|i| vec![i as f64 / 7.0]).collect();
        let k = spec.gram_matrix(&pts).unwrap();
        let a = [0.3, -0.2, 0.1, 0.4, -0.1, 0.2];
        let g = mat_vec(&k, &a);
        let h_norm = crate::ivanov::dot(&a, &g).sqrt();
        let d = DiscreteDesign::uniform(pts).unwrap();
        let oracle = ApproximationOracle::new(&spec, &d, &g).unwrap();
        assert!(oracle.i2(h_norm / 0.5 * 0.5 * 1.0000001).unwrap() < 1e-14);
        assert!(oracle.i2(2.0 * h_norm).unwrap() < 1e-14);
        assert!(oracle.iinf(2.0 * h_norm, IINF_MAX_ITERATIONS, IINF_TOLERANCE).unwrap().upper < 1e-12);
        assert!(oracle.i2(0.5 * h_norm).unwrap() > 0.0);
    }

    #[test]
    fn single_point_sup_norm() {
        // brute force: minimise (a - 2)^2 over |a| <= 1
        let brute = (0..=2000).map(|i| -1.0 + i as f64 / 1000.0).map(|a| (a - 2.0f64).powi(2)).fold(f64::INFINITY, f64::min);
        let d = DiscreteDesign::uniform(vec![vec![0.0]]).unwrap();
        let spec = KernelSpec::gaussian(1.0, BoxDomain::unit_interval()).unwrap();
        let v = approx_iinf(&spec, &d, &[2.0], 1.0, IINF_MAX_ITERATIONS).unwrap();
        assert!((v - brute).abs() < 1e-9);
        assert!((v - 1.0).abs() < 1e-9);
    }

    #[test]
    fn two_point_sup_norm() {
        // brute force over the unit circle; the optimum is v = (0, 1) with error 3
        let brute = (0..=200_000)
            .map(|i| i as f64 / 200_000.0 * std::f64::consts::TAU)
            .map(|th| (3.0 - th.cos()).abs().max((4.0 - th.sin()).abs()).powi(2))
            .fold(f64::INFINITY, f64::min);
        let est = ApproximationOracle::new(&identity_kernel(), &two_points(), &[3.0, 4.0])
            .unwrap()
            .iinf(1.0, IINF_MAX_ITERATIONS, IINF_TOLERANCE)
            .unwrap();
        assert!((est.upper - brute).abs() < 1e-6, "{est:?} vs {brute}");
        assert!(est.lower <= est.upper);
        assert!((est.upper - 9.0).abs() < 1e-9);
    }

    #[test]
    fn k_functional_single_point() {
        // scan oracle over r in [0, 3]: |2 - min(r, 2)| + r
        let scan = (0..=30_000)
            .map(|i| i as f64 * 1e-4)
            .map(|r| (2.0 - r.min(2.0)).abs() + r)
            .fold(f64::INFINITY, f64::min);
        let d = DiscreteDesign::uniform(vec![vec![0.0]]).unwrap();
        let spec = KernelSpec::gaussian(1.0, BoxDomain::unit_interval()).unwrap();
        let v = k_functional(&d, &spec, &[2.0], 1.0).unwrap();
        assert!((v - scan).abs() < 1e-4);
        assert!((v - 2.0).abs() < 1e-4);
    }

    #[test]
    fn k_functional_limits() {
        let d = DiscreteDesign::uniform((0..5).map(|i| vec![0.1 + 0.2 * i as f64]).collect()).unwrap();
        let spec = KernelSpec::brownian();
        assert_eq!(k_functional(&d, &spec, &[0.0; 5], 0.7).unwrap(), 0.0);
        let g = [0.3, -0.8, 1.1, 0.2, -0.4];
        let norm = d.l2_norm_sq(&g).sqrt();
        assert!(k_functional(&d, &spec, &g, 1e6).unwrap() <= norm + 1e-3);
        assert!(matches!(k_functional(&d, &spec, &g, 0.0), Err(Error::Argument(_))));
    }

    #[test]
    fn interpolation_bound_examples() {
        assert_eq!(interpolation_bound(1.0, 0.5, 1.0).unwrap(), 1.0);
        assert!((interpolation_bound(1.0, 0.5, 2.0).unwrap() - 0.25).abs() < 1e-15);
        assert!((interpolation_bound(2.0, 0.5, 1.0).unwrap() - 16.0).abs() < 1e-12);
        assert!(interpolation_bound(1.0, 1.0, 1.0).is_err());
        assert!(interpolation_bound(1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn rejects_bad_designs() {
        assert!(DiscreteDesign::new(vec![vec![0.0]], vec![0.5]).is_err());
        assert!(DiscreteDesign::new(vec![vec![0.0], vec![1.0]], vec![1.5, -0.5]).is_err());
        assert!(DiscreteDesign::uniform(vec![]).is_err());
        assert!(approx_i2(&KernelSpec::brownian(), &two_points(), &[1.0], 1.0).is_err());
        assert!(approx_i2(&KernelSpec::brownian(), &two_points(), &[1.0, 1.0], -1.0).is_err());
    }

    fn instance(raw: &[f64], n: usize) -> (DiscreteDesign, Vec<f64>) {
        let pts = (0..n).map(|i| vec![(raw[i] + 1.0) / 2.0]).collect();
        let g = (0..n).map(|i| 2.0 * raw[20 + i]).collect();
        (DiscreteDesign::uniform(pts).unwrap(), g)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn oracle_properties(raw in prop::collection::vec(-1.0f64..1.0, 40), n in 1usize..10, r1 in 0.0f64..3.0, r2 in 0.0f64..3.0) {
            let (d, g) = instance(&raw, n);
            let spec = KernelSpec::gaussian(0.3, BoxDomain::unit_interval()).unwrap();
            let oracle = ApproximationOracle::new(&spec, &d, &g).unwrap();
            let (lo, hi) = (r1.min(r2), r1.max(r2));
            let (i_lo, i_hi) = (oracle.i2(lo).unwrap(), oracle.i2(hi).unwrap());
            prop_assert!(i_hi <= i_lo + 1e-12);
            let inf = oracle.iinf(hi, 200, IINF_TOLERANCE).unwrap();
            prop_assert!(inf.upper >= i_hi - 1e-9);
            prop_assert!(oracle.k_functional(0.5).unwrap() <= oracle.target_norm() + 1e-12);
        }

        #[test]
        fn feasible_part_bounds_error(raw in prop::collection::vec(-1.0f64..1.0, 40), n in 2usize..10) {
            // g = h + e with |h|_H = r0: I_2(g, r0) <= |e|^2
            let (d, e) = instance(&raw, n);
            let spec = KernelSpec::brownian();
            let k = spec.gram_matrix(d.points()).unwrap();
            let a: Vec<f64> = raw[..n].iter().map(|v| 0.5 * v).collect();
            let h = mat_vec(&k, &a);
            let r0 = crate::ivanov::dot(&a, &h).max(0.0).sqrt();
            prop_assume!(r0 > 1e-8);
            let g: Vec<f64> = h.iter().zip(&e).map(|(x, y)| x + 0.1 * y).collect();
            let err: Vec<f64> = e.iter().map(|y| 0.1 * y).collect();
            let v = approx_i2(&spec, &d, &g, r0).unwrap();
            prop_assert!(v <= d.l2_norm_sq(&err) + 1e-9);
        }
    }
}
