//! Bounded kernels on axis-aligned boxes, and the Gram matrices built from them.
//!
//! Every family here is bounded and continuous on its box, so the induced RKHS
//! is separable and `sup_x k(x, x)^{1/2}` has a closed form. Domains are checked
//! once per point; the inner evaluation loops run unchecked.

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{argument, Error, Result};

/// Kernel family and its parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelFamily {
    /// `exp(-|x - y|^2 / (2 l^2))`
    Gaussian { lengthscale: f64 },
    /// `exp(-|x - y| / l)`
    Laplacian { lengthscale: f64 },
    /// `min(x, y)` on a sub-interval of `[0, 1]`.
    BrownianMotion,
    /// `offset + <x, y>`, restricted to points with `|x| <= scale_bound`.
    Linear { offset: f64, scale_bound: f64 },
}

/// Axis-aligned box `[lower_1, upper_1] x ... x [lower_d, upper_d]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxDomain {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl BoxDomain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(argument("box bounds must be non-empty and of equal length"));
        }
        for (lo, hi) in lower.iter().zip(&upper) {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(argument(format!("invalid interval [{lo}, {hi}]")));
            }
        }
        Ok(Self { lower, upper })
    }

    /// The unit interval `[0, 1]`.
    pub fn unit_interval() -> Self {
        Self { lower: vec![0.0], upper: vec![1.0] }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter().zip(self.lower.iter().zip(&self.upper)).all(|(v, (lo, hi))| lo <= v && v <= hi)
    }

    /// Largest squared Euclidean norm of a point in the box.
    fn max_norm_sq(&self) -> f64 {
        self.lower.iter().zip(&self.upper).map(|(lo, hi)| (lo * lo).max(hi * hi)).sum()
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawKernelSpec {
    family: KernelFamily,
    domain: BoxDomain,
}

impl TryFrom<RawKernelSpec> for KernelSpec {
    type Error = Error;

    fn try_from(raw: RawKernelSpec) -> Result<Self> {
        KernelSpec::new(raw.family, raw.domain)
    }
}

/// A kernel family together with the covariate box it is defined on.
///
/// Immutable once built; all methods are pure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawKernelSpec")]
pub struct KernelSpec {
    family: KernelFamily,
    domain: BoxDomain,
}

impl KernelSpec {
    pub fn new(family: KernelFamily, domain: BoxDomain) -> Result<Self> {
        let domain = BoxDomain::new(domain.lower, domain.upper)?;
        match family {
            KernelFamily::Gaussian { lengthscale } | KernelFamily::Laplacian { lengthscale } => {
                if !(lengthscale.is_finite() && lengthscale > 0.0) {
                    return Err(argument(format!("lengthscale must be positive, got {lengthscale}")));
                }
            }
            KernelFamily::BrownianMotion => {
                if domain.dim() != 1 || domain.lower[0] < 0.0 || domain.upper[0] > 1.0 {
                    return Err(argument("Brownian motion kernel needs a sub-interval of [0, 1]"));
                }
            }
            KernelFamily::Linear { offset, scale_bound } => {
                if !(offset.is_finite() && offset >= 0.0) {
                    return Err(argument(format!("linear offset must be non-negative, got {offset}")));
                }
                if !(scale_bound.is_finite() && scale_bound > 0.0) {
                    return Err(argument(format!("linear scale bound must be positive, got {scale_bound}")));
                }
            }
        }
        Ok(Self { family, domain })
    }

    pub fn gaussian(lengthscale: f64, domain: BoxDomain) -> Result<Self> {
        Self::new(KernelFamily::Gaussian { lengthscale }, domain)
    }

    pub fn laplacian(lengthscale: f64, domain: BoxDomain) -> Result<Self> {
        Self::new(KernelFamily::Laplacian { lengthscale }, domain)
    }

    /// Brownian motion covariance on `[0, 1]`.
    pub fn brownian() -> Self {
        Self { family: KernelFamily::BrownianMotion, domain: BoxDomain::unit_interval() }
    }

    pub fn linear(offset: f64, scale_bound: f64, domain: BoxDomain) -> Result<Self> {
        Self::new(KernelFamily::Linear { offset, scale_bound }, domain)
    }

    pub fn family(&self) -> &KernelFamily {
        &self.family
    }

    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    /// Checks that `x` is an admissible covariate for this kernel.
    pub fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::Domain(format!(
                "point has dimension {}, kernel domain has dimension {}",
                x.len(),
                self.dim()
            )));
        }
        if !self.domain.contains(x) {
            return Err(Error::Domain(format!("point {x:?} lies outside the kernel domain")));
        }
        if let KernelFamily::Linear { scale_bound, .. } = self.family {
            let norm = dot(x, x).sqrt();
            if norm > scale_bound {
                return Err(Error::Domain(format!(
                    "point {x:?} has norm {norm} above the linear kernel bound {scale_bound}"
                )));
            }
        }
        Ok(())
    }

    pub fn check_points(&self, xs: &[Vec<f64>]) -> Result<()> {
        xs.iter().try_for_each(|x| self.check_point(x))
    }

    /// `k(x1, x2)`, with domain checks on both arguments.
    pub fn eval(&self, x1: &[f64], x2: &[f64]) -> Result<f64> {
        self.check_point(x1)?;
        self.check_point(x2)?;
        Ok(self.eval_unchecked(x1, x2))
    }

    /// `k(x1, x2)` for points already known to lie in the domain.
    pub(crate) fn eval_unchecked(&self, x1: &[f64], x2: &[f64]) -> f64 {
        match self.family {
            KernelFamily::Gaussian { lengthscale } => {
                (-sq_dist(x1, x2) / (2.0 * lengthscale * lengthscale)).exp()
            }
            KernelFamily::Laplacian { lengthscale } => (-sq_dist(x1, x2).sqrt() / lengthscale).exp(),
            KernelFamily::BrownianMotion => x1[0].min(x2[0]),
            KernelFamily::Linear { offset, .. } => offset + dot(x1, x2),
        }
    }

    /// `sup_x k(x, x)^{1/2}` over the domain, in closed form.
    pub fn sup_norm(&self) -> f64 {
        match self.family {
            KernelFamily::Gaussian { .. } | KernelFamily::Laplacian { .. } => 1.0,
            KernelFamily::BrownianMotion => self.domain.upper[0].sqrt(),
            KernelFamily::Linear { offset, scale_bound } => {
                (offset + self.domain.max_norm_sq().min(scale_bound * scale_bound)).sqrt()
            }
        }
    }

    /// The `n x n` Gram matrix `K_ij = k(x_i, x_j)`, exactly symmetric.
    pub fn gram_matrix(&self, xs: &[Vec<f64>]) -> Result<Mat<f64>> {
        if xs.is_empty() {
            return Err(argument("Gram matrix needs at least one point"));
        }
        self.check_points(xs)?;
        let n = xs.len();
        let mut k = Mat::<f64>::zeros(n, n);
        for j in 0..n {
            for i in j..n {
                let v = self.eval_unchecked(&xs[i], &xs[j]);
                k[(i, j)] = v;
                k[(j, i)] = v;
            }
        }
        Ok(k)
    }

    /// The `rows.len() x cols.len()` matrix `k(rows_i, cols_j)`.
    pub fn cross_matrix(&self, rows: &[Vec<f64>], cols: &[Vec<f64>]) -> Result<Mat<f64>> {
        self.check_points(rows)?;
        self.check_points(cols)?;
        Ok(Mat::from_fn(rows.len(), cols.len(), |i, j| self.eval_unchecked(&rows[i], &cols[j])))
    }
}

/// Free-function form of [`KernelSpec::eval`].
pub fn eval_kernel(spec: &KernelSpec, x1: &[f64], x2: &[f64]) -> Result<f64> {
    spec.eval(x1, x2)
}

pub fn sup_norm(spec: &KernelSpec) -> f64 {
    spec.sup_norm()
}

pub fn gram_matrix(spec: &KernelSpec, xs: &[Vec<f64>]) -> Result<Mat<f64>> {
    spec.gram_matrix(xs)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit() -> BoxDomain {
        BoxDomain::unit_interval()
    }

    #[test]
    fn gaussian_values() {
        let k = KernelSpec::gaussian(1.0, unit()).unwrap();
        assert_eq!(k.eval(&[0.3], &[0.3]).unwrap(), 1.0);
        assert!((k.eval(&[0.0], &[1.0]).unwrap() - (-0.5f64).exp()).abs() < 1e-15);
        assert!((k.eval(&[0.0], &[1.0]).unwrap() - 0.60653).abs() < 1e-5);
    }

    #[test]
    fn brownian_values() {
        let k = KernelSpec::brownian();
        assert_eq!(k.eval(&[0.3], &[0.7]).unwrap(), 0.3);
        assert_eq!(k.eval(&[0.7], &[0.3]).unwrap(), 0.3);
        let g = k.gram_matrix(&[vec![0.5], vec![1.0]]).unwrap();
        assert_eq!((g[(0, 0)], g[(0, 1)], g[(1, 0)], g[(1, 1)]), (0.5, 0.5, 0.5, 1.0));
    }

    #[test]
    fn sup_norms() {
        let dom = BoxDomain::new(vec![-3.0, 5.0], vec![1.0, 9.0]).unwrap();
        assert_eq!(KernelSpec::gaussian(0.2, dom.clone()).unwrap().sup_norm(), 1.0);
        assert_eq!(KernelSpec::laplacian(0.2, dom).unwrap().sup_norm(), 1.0);
        assert_eq!(KernelSpec::brownian().sup_norm(), 1.0);
        // max over [-2, 2] of (x * x)^{1/2} is 2
        let lin = KernelSpec::linear(0.0, 2.0, BoxDomain::new(vec![-2.0], vec![2.0]).unwrap()).unwrap();
        assert_eq!(lin.sup_norm(), 2.0);
        let lin = KernelSpec::linear(1.0, 1.5, BoxDomain::new(vec![-2.0], vec![2.0]).unwrap()).unwrap();
        assert!((lin.sup_norm() - (1.0f64 + 2.25).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn singleton_gram() {
        let k = KernelSpec::gaussian(1.0, unit()).unwrap();
        let g = k.gram_matrix(&[vec![0.0]]).unwrap();
        assert_eq!((g.nrows(), g.ncols(), g[(0, 0)]), (1, 1, 1.0));
    }

    #[test]
    fn domain_errors() {
        let k = KernelSpec::gaussian(1.0, unit()).unwrap();
        assert!(matches!(k.eval(&[1.5], &[0.0]), Err(Error::Domain(_))));
        assert!(matches!(k.eval(&[0.5, 0.5], &[0.0]), Err(Error::Domain(_))));
        let lin = KernelSpec::linear(0.0, 1.0, BoxDomain::new(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap()).unwrap();
        assert!(matches!(lin.eval(&[0.9, 0.9], &[0.0, 0.0]), Err(Error::Domain(_))));
        assert!(matches!(k.gram_matrix(&[]), Err(Error::Argument(_))));
    }

    #[test]
    fn invalid_specs() {
        assert!(KernelSpec::gaussian(0.0, unit()).is_err());
        assert!(KernelSpec::laplacian(-1.0, unit()).is_err());
        assert!(KernelSpec::new(KernelFamily::BrownianMotion, BoxDomain::new(vec![0.0], vec![2.0]).unwrap()).is_err());
        assert!(KernelSpec::linear(-0.1, 1.0, unit()).is_err());
        assert!(BoxDomain::new(vec![1.0], vec![0.0]).is_err());
    }

    #[test]
    fn serde_roundtrip_is_validated() {
        let spec: KernelSpec = serde_json::from_str(
            r#"{"family":{"type":"gaussian","lengthscale":0.5},"domain":{"lower":[0.0],"upper":[1.0]}}"#,
        )
        .unwrap();
        assert_eq!(spec, KernelSpec::gaussian(0.5, unit()).unwrap());
        let bad = serde_json::from_str::<KernelSpec>(
            r#"{"family":{"type":"gaussian","lengthscale":-1},"domain":{"lower":[0.0],"upper":[1.0]}}"#,
        );
        assert!(bad.is_err());
        let unknown = serde_json::from_str::<KernelSpec>(
            r#"{"family":{"type":"brownian_motion"},"domain":{"lower":[0.0],"upper":[1.0]},"extra":1}"#,
        );
        assert!(unknown.is_err());
    }

    fn any_spec() -> impl Strategy<Value = KernelSpec> {
        let dom = || BoxDomain::new(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap();
        prop_oneof![
            (0.05f64..3.0).prop_map(move |l| KernelSpec::gaussian(l, dom()).unwrap()),
            (0.05f64..3.0).prop_map(move |l| KernelSpec::laplacian(l, dom()).unwrap()),
            (0.0f64..2.0).prop_map(move |c| KernelSpec::linear(c, 1.5, dom()).unwrap()),
            Just(KernelSpec::brownian()),
        ]
    }

    fn points_for(spec: &KernelSpec, raw: &[(f64, f64)]) -> Vec<Vec<f64>> {
        raw.iter()
            .map(|&(u, v)| match spec.family() {
                KernelFamily::BrownianMotion => vec![(u + 1.0) / 2.0],
                KernelFamily::Linear { .. } => vec![u * 0.7, v * 0.7],
                _ => vec![u, v],
            })
            .collect()
    }

    proptest! {
        #[test]
        fn gram_is_symmetric_psd(spec in any_spec(), raw in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..32)) {
            let xs = points_for(&spec, &raw);
            let k = spec.gram_matrix(&xs).unwrap();
            for i in 0..xs.len() {
                for j in 0..xs.len() {
                    prop_assert_eq!(k[(i, j)], k[(j, i)]);
                }
            }
            let eig = k.self_adjoint_eigen(faer::Side::Lower).unwrap();
            let s = eig.S().column_vector();
            let (lo, hi) = (0..s.nrows()).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), i| (lo.min(s[i]), hi.max(s[i])));
            prop_assert!(lo >= -1e-9 * hi.max(1.0));
        }

        #[test]
        fn diagonal_bounded_by_sup_norm(spec in any_spec(), raw in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..16)) {
            for x in points_for(&spec, &raw) {
                prop_assert!(spec.eval(&x, &x).unwrap().sqrt() <= spec.sup_norm() + 1e-12);
            }
        }

        #[test]
        fn eval_is_symmetric(spec in any_spec(), raw in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 2..3)) {
            let xs = points_for(&spec, &raw);
            prop_assert_eq!(spec.eval(&xs[0], &xs[1]).unwrap(), spec.eval(&xs[1], &xs[0]).unwrap());
        }
    }
}
