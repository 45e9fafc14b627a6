//! Hold-out selection of the radius over a finite grid.
//!
//! The grid is `{b i : 0 <= i < I} ∪ {a n^{1/2}}` with `I = ceil(a n^{1/2} / b)`.
//! Every radius is fitted on the training set from one shared eigendecomposition,
//! the fits are clipped to `[-C, C]`, and the radius with the smallest validation
//! error wins, ties going to the smaller radius.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{argument, Result};
use crate::ivanov::{check_training, BisectionOptions, ClippedPredictor, IvanovFit, IvanovPath, Strategy};
use crate::kernels::KernelSpec;

/// Finite, strictly increasing set of candidate radii starting at zero.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValidationGrid {
    /// Spacing `b`, when built from the `(a, b, n)` recipe.
    pub spacing: Option<f64>,
    /// Endpoint coefficient `a`, when built from the recipe.
    pub endpoint_coefficient: Option<f64>,
    pub n: Option<usize>,
    pub radii: Vec<f64>,
    /// Largest radius.
    pub rho: f64,
}

impl ValidationGrid {
    /// `{b i : 0 <= i < I} ∪ {a n^{1/2}}`, `I = ceil(a n^{1/2} / b)`.
    pub fn build(a: f64, b: f64, n: usize) -> Result<Self> {
        if !(a.is_finite() && a > 0.0) {
            return Err(argument(format!("grid endpoint coefficient must be positive, got {a}")));
        }
        if !(b.is_finite() && b > 0.0) {
            return Err(argument(format!("grid spacing must be positive, got {b}")));
        }
        if n == 0 {
            return Err(argument("grid needs n >= 1"));
        }
        let rho = a * (n as f64).sqrt();
        let count = (rho / b).ceil() as usize;
        let mut radii: Vec<f64> = (0..count).map(|i| b * i as f64).collect();
        radii.push(rho);
        radii.sort_by(f64::total_cmp);
        radii.dedup();
        Ok(Self { spacing: Some(b), endpoint_coefficient: Some(a), n: Some(n), radii, rho })
    }

    /// A grid from explicit non-negative radii (sorted and deduplicated).
    pub fn from_radii(mut radii: Vec<f64>) -> Result<Self> {
        if radii.is_empty() {
            return Err(argument("grid must contain at least one radius"));
        }
        if radii.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
            return Err(argument("grid radii must be finite and non-negative"));
        }
        radii.sort_by(f64::total_cmp);
        radii.dedup();
        let rho = *radii.last().unwrap();
        Ok(Self { spacing: None, endpoint_coefficient: None, n: None, radii, rho })
    }

    pub fn len(&self) -> usize {
        self.radii.len()
    }

    pub fn is_empty(&self) -> bool {
        self.radii.is_empty()
    }
}

pub fn build_grid(a: f64, b: f64, n: usize) -> Result<ValidationGrid> {
    ValidationGrid::build(a, b, n)
}

/// The clipped estimator at the selected radius plus the full risk profile.
#[derive(Clone, Debug, Serialize)]
pub struct AdaptiveFit {
    pub selected_radius: f64,
    pub fit: IvanovFit,
    pub clip_bound: f64,
    /// `(radius, validation risk)` in grid order.
    pub validation_risks: Vec<(f64, f64)>,
}

impl AdaptiveFit {
    pub fn predictor(&self) -> ClippedPredictor<'_> {
        self.fit.clipped(self.clip_bound)
    }

    pub fn selected_risk(&self) -> f64 {
        self.validation_risks.iter().find(|(r, _)| *r == self.selected_radius).map(|p| p.1).unwrap_or(f64::NAN)
    }
}

/// `(1/ñ) sum (V h(X̃_i) - Ỹ_i)^2`.
pub fn validation_risk(predictor: &ClippedPredictor<'_>, xs: &[Vec<f64>], ys: &[f64]) -> Result<f64> {
    check_validation(xs, ys)?;
    let mut total = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        let e = predictor.predict(x)? - y;
        total += e * e;
    }
    Ok(total / xs.len() as f64)
}

fn check_validation(xs: &[Vec<f64>], ys: &[f64]) -> Result<()> {
    if xs.is_empty() {
        return Err(argument("validation set is empty"));
    }
    if xs.len() != ys.len() {
        return Err(argument(format!("{} validation points but {} responses", xs.len(), ys.len())));
    }
    Ok(())
}

fn check_clip(c: f64) -> Result<()> {
    if !(c.is_finite() && c > 0.0) {
        return Err(argument(format!("clip bound must be positive, got {c}")));
    }
    Ok(())
}

/// Index of the smallest risk, earliest index on ties.
fn argmin_first(risks: &[f64]) -> usize {
    let mut best = 0;
    for (i, &r) in risks.iter().enumerate().skip(1) {
        if r < risks[best] {
            best = i;
        }
    }
    best
}

/// Fits every grid radius on the training data and picks the one whose clipped
/// fit has the smallest validation error.
pub fn select_radius(
    spec: &KernelSpec,
    train: (&[Vec<f64>], &[f64]),
    val: (&[Vec<f64>], &[f64]),
    grid: &ValidationGrid,
    c: f64,
    opts: &BisectionOptions,
) -> Result<AdaptiveFit> {
    check_training(train.0, train.1)?;
    let path = IvanovPath::new(spec, train.0, train.1)?;
    select_radius_on_path(&path, val, grid, c, opts)
}

/// [`select_radius`] for an already decomposed training set.
pub fn select_radius_on_path(
    path: &IvanovPath,
    val: (&[Vec<f64>], &[f64]),
    grid: &ValidationGrid,
    c: f64,
    opts: &BisectionOptions,
) -> Result<AdaptiveFit> {
    let (vx, vy) = val;
    check_validation(vx, vy)?;
    check_clip(c)?;
    opts.validate()?;
    if grid.is_empty() {
        return Err(argument("grid is empty"));
    }
    let cross = path.spec().cross_matrix(vx, path.design())?;

    let risk_of = |a: &[f64]| -> f64 {
        let mut preds = vec![0.0; vx.len()];
        for (j, &aj) in a.iter().enumerate() {
            if aj == 0.0 {
                continue;
            }
            let col = cross.col(j);
            for (i, p) in preds.iter_mut().enumerate() {
                *p += col[i] * aj;
            }
        }
        preds.iter().zip(vy).map(|(p, y)| (p.clamp(-c, c) - y).powi(2)).sum::<f64>() / vx.len() as f64
    };

    let risks: Vec<f64> = match opts.strategy {
        Strategy::Diagonalised => grid
            .radii
            .par_iter()
            .map(|&r| {
                let (_, w) = path.solve_weights(r, opts)?;
                Ok(risk_of(&path.decomposition().unproject(&w)))
            })
            .collect::<Result<_>>()?,
        Strategy::MatrixSolve => grid
            .radii
            .par_iter()
            .map(|&r| Ok(risk_of(&path.fit_matrix_solve(r, opts)?.coefficients)))
            .collect::<Result<_>>()?,
    };

    let best = argmin_first(&risks);
    let selected_radius = grid.radii[best];
    let fit = match opts.strategy {
        Strategy::Diagonalised => path.fit(selected_radius, opts)?,
        Strategy::MatrixSolve => path.fit_matrix_solve(selected_radius, opts)?,
    };
    Ok(AdaptiveFit {
        selected_radius,
        fit,
        clip_bound: c,
        validation_risks: grid.radii.iter().copied().zip(risks).collect(),
    })
}
