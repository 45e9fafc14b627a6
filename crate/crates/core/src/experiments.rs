//! Synthetic scenarios, Monte-Carlo error estimates and log-log rate fits.
//!
//! Every random draw comes from a ChaCha8 generator keyed by the scenario
//! seed, with a separate stream per (sample size, replicate, purpose), so
//! results do not depend on thread count or evaluation order.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::approximation::{ApproximationOracle, DiscreteDesign};
use crate::bounds::{bound_expectation_clipped, bound_validation_expectation, clipped_interpolation_baseline, BoundParams};
use crate::error::{Error, Result};
use crate::ivanov::BisectionOptions;
use crate::kernels::{BoxDomain, KernelSpec};
use crate::validation::{select_radius, ValidationGrid};

/// Distribution of the covariates.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum CovariateLaw {
    /// Uniform on the kernel's domain.
    #[default]
    UniformBox,
    Discrete { points: Vec<Vec<f64>>, weights: Vec<f64> },
}

/// The regression function `g`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Truth {
    /// `g = sum_j c_j k(z_j, .)`.
    InSpan { anchors: Vec<Vec<f64>>, coefficients: Vec<f64> },
    /// One of [`TRUTH_NAMES`], applied to the first coordinate.
    Named { name: String },
}

/// Registry of named regression functions.
pub const TRUTH_NAMES: [&str; 5] = ["min_half", "step", "linear", "sin", "zero"];

fn named_truth(name: &str) -> Option<fn(f64) -> f64> {
    Some(match name {
        "min_half" => |x| x.min(0.5),
        "step" => |x| if x < 0.5 { -0.5 } else { 0.5 },
        "linear" => |x| x,
        "sin" => |x| (2.0 * std::f64::consts::PI * x).sin(),
        "zero" => |_| 0.0,
        _ => return None,
    })
}

/// Additive noise on the responses.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseModel {
    Gaussian { sigma: f64 },
    /// Uniform on `[-sigma 3^{1/2}, sigma 3^{1/2}]`, which has variance `sigma^2`.
    BoundedUniform { sigma: f64 },
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self::Gaussian { sigma: 0.1 }
    }
}

impl NoiseModel {
    pub fn sigma(&self) -> f64 {
        match *self {
            Self::Gaussian { sigma } | Self::BoundedUniform { sigma } => sigma,
        }
    }

    pub fn sample(&self, rng: &mut impl Rng) -> f64 {
        match *self {
            Self::Gaussian { sigma } => {
                let z: f64 = StandardNormal.sample(rng);
                sigma * z
            }
            Self::BoundedUniform { sigma } => {
                let w = sigma * 3f64.sqrt();
                w * (2.0 * rng.random::<f64>() - 1.0)
            }
        }
    }
}

/// Validation grid recipe `(a, b)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridParams {
    pub a: f64,
    pub b: f64,
}

impl Default for GridParams {
    fn default() -> Self {
        Self { a: 1.0, b: 0.25 }
    }
}

/// Interpolation-space parameters used for the comparison bound column and
/// the target exponent `-beta/(1+beta)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InterpolationParams {
    #[serde(rename = "B", alias = "b")]
    pub b: f64,
    pub beta: f64,
}

impl Default for InterpolationParams {
    fn default() -> Self {
        Self { b: 1.0, beta: 0.5 }
    }
}

/// Sample sizes for a rate experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatesParams {
    pub n_values: Vec<usize>,
    /// Replace simulation by the exact sequence `e(n) = n^{exponent}`.
    #[serde(default)]
    pub synthetic_exponent: Option<f64>,
}

fn default_clip() -> f64 {
    1.0
}
fn default_n() -> usize {
    128
}
fn default_replications() -> usize {
    1
}
fn default_mc_points() -> usize {
    20_000
}
fn default_oracle_points() -> usize {
    512
}

/// A complete synthetic regression scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub kernel: KernelSpec,
    #[serde(default)]
    pub covariates: CovariateLaw,
    pub truth: Truth,
    #[serde(default)]
    pub noise: NoiseModel,
    /// Clipping bound `C`.
    #[serde(default = "default_clip")]
    pub clip: f64,
    #[serde(default)]
    pub grid: GridParams,
    /// Training sample size.
    #[serde(default = "default_n")]
    pub n: usize,
    /// Validation sample size; defaults to `n`.
    #[serde(default)]
    pub n_tilde: Option<usize>,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default = "default_mc_points")]
    pub mc_points: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub bisection: BisectionOptions,
    #[serde(default)]
    pub interpolation: InterpolationParams,
    /// Size of the design used for the `I_2` oracle under a uniform law; zero
    /// disables the bound column. Discrete laws use their own support.
    #[serde(default = "default_oracle_points")]
    pub oracle_points: usize,
    #[serde(default)]
    pub rates: Option<RatesParams>,
}

impl ScenarioConfig {
    /// A scenario with defaults for everything but kernel and truth.
    pub fn new(kernel: KernelSpec, truth: Truth) -> Self {
        Self {
            kernel,
            covariates: CovariateLaw::default(),
            truth,
            noise: NoiseModel::default(),
            clip: default_clip(),
            grid: GridParams::default(),
            n: default_n(),
            n_tilde: None,
            replications: default_replications(),
            mc_points: default_mc_points(),
            seed: 0,
            bisection: BisectionOptions::default(),
            interpolation: InterpolationParams::default(),
            oracle_points: default_oracle_points(),
            rates: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        let sigma = self.noise.sigma();
        if !(sigma.is_finite() && sigma >= 0.0) {
            return bad(format!("noise sigma must be non-negative, got {sigma}"));
        }
        if !(self.clip.is_finite() && self.clip > 0.0) {
            return bad(format!("clip must be positive, got {}", self.clip));
        }
        if !(self.grid.a > 0.0 && self.grid.b > 0.0 && self.grid.a.is_finite() && self.grid.b.is_finite()) {
            return bad("grid a and b must be positive".into());
        }
        if self.n == 0 || self.n_tilde == Some(0) {
            return bad("sample sizes must be positive".into());
        }
        if self.replications == 0 {
            return bad("replications must be at least 1".into());
        }
        if self.mc_points < 2 {
            return bad("mc_points must be at least 2".into());
        }
        let ip = self.interpolation;
        if !(ip.b > 0.0 && ip.beta > 0.0 && ip.beta < 1.0) {
            return bad("interpolation needs B > 0 and beta in (0, 1)".into());
        }
        self.bisection.validate().map_err(|e| Error::Config(e.to_string()))?;
        self.truth_evaluator()?;
        CovariateSampler::new(&self.covariates, &self.kernel)?;
        if let Some(rates) = &self.rates {
            if rates.n_values.is_empty() || rates.n_values.contains(&0) {
                return bad("rates.n_values must be non-empty and positive".into());
            }
            if rates.n_values.windows(2).any(|w| w[0] >= w[1]) {
                return bad("rates.n_values must be strictly increasing".into());
            }
        }
        Ok(())
    }

    pub fn n_tilde(&self) -> usize {
        self.n_tilde.unwrap_or(self.n)
    }

    pub fn truth_evaluator(&self) -> Result<TruthEvaluator> {
        TruthEvaluator::new(&self.truth, &self.kernel)
    }

    /// Constants of the bounds for training size `n`.
    pub fn bound_params(&self, n: usize) -> BoundParams {
        let n_tilde = self.n_tilde.unwrap_or(n);
        BoundParams {
            k_inf: self.kernel.sup_norm(),
            sigma: self.noise.sigma(),
            sigma_tilde: self.noise.sigma(),
            c: self.clip,
            b: self.interpolation.b,
            beta: self.interpolation.beta,
            n,
            n_tilde,
            t: 1.0,
            rho: self.grid.a * (n as f64).sqrt(),
        }
    }
}

/// `g` resolved against the scenario kernel.
#[derive(Clone, Debug)]
pub struct TruthEvaluator {
    kind: TruthKind,
}

#[derive(Clone, Debug)]
enum TruthKind {
    Named(fn(f64) -> f64),
    InSpan { spec: KernelSpec, anchors: Vec<Vec<f64>>, coefficients: Vec<f64> },
}

impl TruthEvaluator {
    pub fn new(truth: &Truth, spec: &KernelSpec) -> Result<Self> {
        let kind = match truth {
            Truth::Named { name } => TruthKind::Named(named_truth(name).ok_or_else(|| {
                Error::Config(format!("unknown truth '{name}'; expected one of {}", TRUTH_NAMES.join(", ")))
            })?),
            Truth::InSpan { anchors, coefficients } => {
                if anchors.is_empty() || anchors.len() != coefficients.len() {
                    return Err(Error::Config("in_span truth needs one coefficient per anchor".into()));
                }
                spec.check_points(anchors).map_err(|e| Error::Config(format!("truth anchors: {e}")))?;
                TruthKind::InSpan { spec: spec.clone(), anchors: anchors.clone(), coefficients: coefficients.clone() }
            }
        };
        Ok(Self { kind })
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match &self.kind {
            TruthKind::Named(f) => f(x[0]),
            TruthKind::InSpan { spec, anchors, coefficients } => {
                anchors.iter().zip(coefficients).map(|(z, c)| c * spec.eval_unchecked(z, x)).sum()
            }
        }
    }
}

/// Draws covariates from a [`CovariateLaw`].
#[derive(Clone, Debug)]
pub enum CovariateSampler {
    Uniform(BoxDomain),
    Discrete { design: DiscreteDesign, index: WeightedIndex<f64> },
}

impl CovariateSampler {
    pub fn new(law: &CovariateLaw, spec: &KernelSpec) -> Result<Self> {
        match law {
            CovariateLaw::UniformBox => Ok(Self::Uniform(spec.domain().clone())),
            CovariateLaw::Discrete { points, weights } => {
                let design = DiscreteDesign::new(points.clone(), weights.clone())
                    .map_err(|e| Error::Config(format!("covariates: {e}")))?;
                spec.check_points(points).map_err(|e| Error::Config(format!("covariates: {e}")))?;
                let index = WeightedIndex::new(weights.iter().copied())
                    .map_err(|e| Error::Config(format!("covariate weights: {e}")))?;
                Ok(Self::Discrete { design, index })
            }
        }
    }

    pub fn sample(&self, rng: &mut impl Rng) -> Vec<f64> {
        match self {
            Self::Uniform(domain) => domain
                .lower
                .iter()
                .zip(&domain.upper)
                .map(|(lo, hi)| lo + (hi - lo) * rng.random::<f64>())
                .collect(),
            Self::Discrete { design, index } => design.points()[index.sample(rng)].clone(),
        }
    }

    /// Design on which `I_2` is evaluated: the support itself for discrete
    /// laws, otherwise a midpoint grid (one dimension) or a fixed uniform
    /// sample of `m` points.
    pub fn oracle_design(&self, m: usize, seed: u64) -> Result<DiscreteDesign> {
        match self {
            Self::Discrete { design, .. } => Ok(design.clone()),
            Self::Uniform(domain) if domain.dim() == 1 => {
                let (lo, hi) = (domain.lower[0], domain.upper[0]);
                DiscreteDesign::uniform((0..m).map(|i| vec![lo + (hi - lo) * (i as f64 + 0.5) / m as f64]).collect())
            }
            Self::Uniform(_) => {
                let mut rng = stream(seed, 0, 0, Purpose::OracleDesign);
                DiscreteDesign::uniform((0..m).map(|_| self.sample(&mut rng)).collect())
            }
        }
    }
}

#[derive(Clone, Copy)]
enum Purpose {
    TrainX = 0,
    TrainNoise = 1,
    ValidationX = 2,
    ValidationNoise = 3,
    MonteCarlo = 4,
    OracleDesign = 5,
}

fn stream(seed: u64, n: usize, replicate: usize, purpose: Purpose) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((n as u64) << 32) ^ ((replicate as u64) << 3) ^ purpose as u64);
    rng
}

/// Covariates and responses.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Dataset {
    pub xs: Vec<Vec<f64>>,
    pub ys: Vec<f64>,
}

/// One replicate of a scenario.
#[derive(Clone, Debug)]
pub struct Generated {
    pub train: Dataset,
    pub validation: Dataset,
    pub truth: TruthEvaluator,
}

fn draw(
    config: &ScenarioConfig,
    sampler: &CovariateSampler,
    truth: &TruthEvaluator,
    size: usize,
    key: (usize, usize),
    purposes: (Purpose, Purpose),
) -> Result<Dataset> {
    let mut xrng = stream(config.seed, key.0, key.1, purposes.0);
    let mut erng = stream(config.seed, key.0, key.1, purposes.1);
    let xs: Vec<Vec<f64>> = (0..size).map(|_| sampler.sample(&mut xrng)).collect();
    let mut ys = Vec::with_capacity(size);
    for x in &xs {
        let g = truth.eval(x);
        if g.abs() > config.clip * (1.0 + 1e-12) {
            return Err(Error::Config(format!("truth value {g} at {x:?} exceeds the clip bound {}", config.clip)));
        }
        ys.push(g + config.noise.sample(&mut erng));
    }
    Ok(Dataset { xs, ys })
}

/// Training and validation samples for replicate `replicate_index`, of sizes
/// `n` and `n_tilde` from the config.
pub fn generate(config: &ScenarioConfig, replicate_index: usize) -> Result<Generated> {
    config.validate()?;
    generate_sized(config, config.n, config.n_tilde(), replicate_index)
}

fn generate_sized(config: &ScenarioConfig, n: usize, n_tilde: usize, replicate: usize) -> Result<Generated> {
    let sampler = CovariateSampler::new(&config.covariates, &config.kernel)?;
    let truth = config.truth_evaluator()?;
    let train = draw(config, &sampler, &truth, n, (n, replicate), (Purpose::TrainX, Purpose::TrainNoise))?;
    let validation =
        draw(config, &sampler, &truth, n_tilde, (n, replicate), (Purpose::ValidationX, Purpose::ValidationNoise))?;
    Ok(Generated { train, validation, truth })
}

fn mc_with_rng(
    predictor: &dyn Fn(&[f64]) -> f64,
    truth: &dyn Fn(&[f64]) -> f64,
    sampler: &CovariateSampler,
    mc_points: usize,
    rng: &mut ChaCha8Rng,
) -> (f64, f64) {
    let m = mc_points.max(2);
    let sq: Vec<f64> = (0..m)
        .map(|_| {
            let x = sampler.sample(rng);
            (predictor(&x) - truth(&x)).powi(2)
        })
        .collect();
    let mean = sq.iter().sum::<f64>() / m as f64;
    let var = sq.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1) as f64;
    (mean, (var / m as f64).sqrt())
}

/// Mean and standard error of `(predictor(X) - g(X))^2` over `mc_points`
/// independent draws `X ~ P`.
pub fn mc_sq_error(
    predictor: &dyn Fn(&[f64]) -> f64,
    truth: &dyn Fn(&[f64]) -> f64,
    sampler: &CovariateSampler,
    mc_points: usize,
    seed: u64,
) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    mc_with_rng(predictor, truth, sampler, mc_points, &mut rng)
}

/// One (n, replicate) pipeline.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReplicateRecord {
    pub n: usize,
    pub replication: usize,
    pub r_hat: f64,
    pub mc_error: f64,
    pub mc_se: f64,
    /// Clipped expectation bound at `r_hat` with the oracle `I_2`.
    pub bound_value: Option<f64>,
    pub seed: u64,
}

/// Aggregate over replications at one sample size.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RateRow {
    pub n: usize,
    pub mean_sq_error: f64,
    pub std_error: f64,
    /// Validation bound built on the clipped bound at the optimal radius.
    pub mean_bound: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RateReport {
    pub rows: Vec<RateRow>,
    pub fitted_slope: f64,
    pub fitted_intercept: f64,
    pub target_exponent: f64,
    /// Whether the smallest `n` was left out of the fit.
    pub excluded_smallest: bool,
    pub replicates: Vec<ReplicateRecord>,
    pub note: String,
}

const REPORT_NOTE: &str = "Only the log-log slope is comparable with theory; the constants of the rate bounds are \
not specified numerically, so levels are not checked.";

impl RateReport {
    /// Per-replicate CSV with a header row and LF line endings.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        let csv_err = |e: csv::Error| Error::Numerical(format!("csv: {e}"));
        w.write_record(["n", "replication", "r_hat", "mc_error", "mc_se", "bound_value", "seed"]).map_err(csv_err)?;
        for r in &self.replicates {
            w.serialize((r.n, r.replication, r.r_hat, r.mc_error, r.mc_se, r.bound_value, r.seed)).map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Numerical(format!("csv: {e}")))?;
        String::from_utf8(bytes).map_err(|e| Error::Numerical(e.to_string()))
    }
}

/// Least-squares line through `(log n, log e)`, leaving out the smallest `n`
/// when its standard error exceeds a quarter of its mean and at least two
/// points remain. Returns `(slope, intercept, excluded)`.
pub fn fit_log_log_slope(ns: &[usize], means: &[f64], ses: &[f64]) -> Result<(f64, f64, bool)> {
    if ns.len() != means.len() || ns.len() != ses.len() {
        return Err(Error::Argument("slope fit needs equally long inputs".into()));
    }
    if means.iter().any(|m| !(*m > 0.0 && m.is_finite())) {
        return Err(Error::Numerical("log-log fit needs positive finite errors".into()));
    }
    let exclude = ns.len() > 2 && ses[0] > 0.25 * means[0];
    let start = usize::from(exclude);
    let xs: Vec<f64> = ns[start..].iter().map(|&n| (n as f64).ln()).collect();
    let ys: Vec<f64> = means[start..].iter().map(|m| m.ln()).collect();
    if xs.len() < 2 {
        return Err(Error::Argument("slope fit needs at least two sample sizes".into()));
    }
    let k = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / k, ys.iter().sum::<f64>() / k);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Argument("slope fit needs distinct sample sizes".into()));
    }
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx, exclude))
}

/// The fitter applied to the exact sequence `e(n) = n^{exponent}`.
pub fn synthetic_rate_report(n_values: &[usize], exponent: f64, target_exponent: f64) -> Result<RateReport> {
    let means: Vec<f64> = n_values.iter().map(|&n| (n as f64).powf(exponent)).collect();
    let ses = vec![0.0; n_values.len()];
    let (fitted_slope, fitted_intercept, excluded_smallest) = fit_log_log_slope(n_values, &means, &ses)?;
    let rows = n_values
        .iter()
        .zip(&means)
        .map(|(&n, &m)| RateRow { n, mean_sq_error: m, std_error: 0.0, mean_bound: f64::NAN })
        .collect();
    Ok(RateReport {
        rows,
        fitted_slope,
        fitted_intercept,
        target_exponent,
        excluded_smallest,
        replicates: Vec::new(),
        note: REPORT_NOTE.into(),
    })
}

/// Runs `replications` train/validate/select/evaluate pipelines for each `n`
/// (with `n_tilde = n` unless the config fixes it) and fits the log-log slope
/// of the mean error.
pub fn run_rate_experiment(template: &ScenarioConfig, n_values: &[usize]) -> Result<RateReport> {
    template.validate()?;
    if n_values.len() < 3 {
        return Err(Error::Config("a rate experiment needs at least three sample sizes".into()));
    }
    if n_values.windows(2).any(|w| w[0] >= w[1]) || n_values[0] == 0 {
        return Err(Error::Config("sample sizes must be positive and strictly increasing".into()));
    }
    let beta = template.interpolation.beta;
    let target_exponent = -beta / (1.0 + beta);
    if let Some(exponent) = template.rates.as_ref().and_then(|r| r.synthetic_exponent) {
        return synthetic_rate_report(n_values, exponent, target_exponent);
    }

    let sampler = CovariateSampler::new(&template.covariates, &template.kernel)?;
    let truth = template.truth_evaluator()?;
    let oracle = if template.oracle_points > 0 {
        let design = sampler.oracle_design(template.oracle_points, template.seed)?;
        let g: Vec<f64> = design.points().iter().map(|x| truth.eval(x)).collect();
        Some(ApproximationOracle::new(&template.kernel, &design, &g)?)
    } else {
        None
    };

    let mut rows = Vec::with_capacity(n_values.len());
    let mut replicates = Vec::new();
    for &n in n_values {
        let p = template.bound_params(n);
        let n_tilde = p.n_tilde;
        let grid = ValidationGrid::build(template.grid.a, template.grid.b, n)?;
        let records: Vec<ReplicateRecord> = (0..template.replications)
            .into_par_iter()
            .map(|rep| {
                let data = generate_sized(template, n, n_tilde, rep)?;
                let adaptive = select_radius(
                    &template.kernel,
                    (&data.train.xs, &data.train.ys),
                    (&data.validation.xs, &data.validation.ys),
                    &grid,
                    template.clip,
                    &template.bisection,
                )?;
                let fit = &adaptive.fit;
                let predictor = |x: &[f64]| fit.predict_unchecked(x).clamp(-template.clip, template.clip);
                let g = |x: &[f64]| truth.eval(x);
                let mut rng = stream(template.seed, n, rep, Purpose::MonteCarlo);
                let (mc_error, mc_se) = mc_with_rng(&predictor, &g, &sampler, template.mc_points, &mut rng);
                let r_hat = adaptive.selected_radius;
                let bound_value = match &oracle {
                    Some(o) => Some(bound_expectation_clipped(&p, r_hat, o.i2(r_hat)?)),
                    None => None,
                };
                log::debug!("n={n} rep={rep} r_hat={r_hat} mc_error={mc_error}");
                Ok(ReplicateRecord { n, replication: rep, r_hat, mc_error, mc_se, bound_value, seed: template.seed })
            })
            .collect::<Result<_>>()?;

        let errors: Vec<f64> = records.iter().map(|r| r.mc_error).collect();
        let k = errors.len() as f64;
        let mean = errors.iter().sum::<f64>() / k;
        let std_error = if errors.len() > 1 {
            (errors.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (k - 1.0) / k).sqrt()
        } else {
            records[0].mc_se
        };
        let mean_bound = bound_validation_expectation(&p, clipped_interpolation_baseline(&p)?);
        log::info!("n={n}: mean error {mean:.3e} (se {std_error:.1e})");
        rows.push(RateRow { n, mean_sq_error: mean, std_error, mean_bound });
        replicates.extend(records);
    }

    let ns: Vec<usize> = rows.iter().map(|r| r.n).collect();
    let means: Vec<f64> = rows.iter().map(|r| r.mean_sq_error).collect();
    let ses: Vec<f64> = rows.iter().map(|r| r.std_error).collect();
    let (fitted_slope, fitted_intercept, excluded_smallest) = fit_log_log_slope(&ns, &means, &ses)?;
    Ok(RateReport {
        rows,
        fitted_slope,
        fitted_intercept,
        target_exponent,
        excluded_smallest,
        replicates,
        note: REPORT_NOTE.into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brownian_scenario() -> ScenarioConfig {
        let mut c = ScenarioConfig::new(KernelSpec::brownian(), Truth::Named { name: "min_half".into() });
        c.n = 40;
        c.mc_points = 2000;
        c.seed = 7;
        c
    }

    #[test]
    fn noiseless_responses_equal_truth() {
        let mut c = brownian_scenario();
        c.noise = NoiseModel::Gaussian { sigma: 0.0 };
        let g = generate(&c, 0).unwrap();
        for (x, y) in g.train.xs.iter().zip(&g.train.ys) {
            assert_eq!(*y, x[0].min(0.5));
        }
        assert_eq!(g.validation.xs.len(), 40);
    }

    #[test]
    fn generation_is_deterministic_and_streams_differ() {
        let c = brownian_scenario();
        let (a, b) = (generate(&c, 3).unwrap(), generate(&c, 3).unwrap());
        assert_eq!(a.train, b.train);
        assert_eq!(a.validation, b.validation);
        assert_ne!(a.train.xs, a.validation.xs);
        assert_ne!(generate(&c, 4).unwrap().train, a.train);
    }

    #[test]
    fn bounded_uniform_variance() {
        let sigma = 0.7;
        let noise = NoiseModel::BoundedUniform { sigma };
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let draws: Vec<f64> = (0..100_000).map(|_| noise.sample(&mut rng)).collect();
        let w = sigma * 3f64.sqrt();
        assert!(draws.iter().all(|e| e.abs() <= w));
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        let var = draws.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (draws.len() - 1) as f64;
        // uniform on [-w, w] has variance w^2 / 3
        assert!((var - w * w / 3.0).abs() <= 0.03 * sigma * sigma);
    }

    #[test]
    fn unknown_truth_is_config_error() {
        let mut c = brownian_scenario();
        c.truth = Truth::Named { name: "mystery".into() };
        assert!(matches!(generate(&c, 0), Err(Error::Config(_))));
    }

    #[test]
    fn truth_above_clip_is_rejected() {
        let mut c = brownian_scenario();
        c.clip = 0.1;
        assert!(matches!(generate(&c, 0), Err(Error::Config(_))));
    }

    #[test]
    fn mc_error_examples() {
        let sampler = CovariateSampler::new(&CovariateLaw::UniformBox, &KernelSpec::brownian()).unwrap();
        let id = |x: &[f64]| x[0];
        assert_eq!(mc_sq_error(&id, &id, &sampler, 100, 1), (0.0, 0.0));
        let (m, se) = mc_sq_error(&|_| 0.0, &|_| 1.0, &sampler, 100, 1);
        assert_eq!((m, se), (1.0, 0.0));
        let (m, se) = mc_sq_error(&|_| 0.0, &id, &sampler, 100_000, 5);
        assert!((m - 1.0 / 3.0).abs() <= 3.0 * se, "{m} +- {se}");
    }

    #[test]
    fn slope_fitter_recovers_exact_power() {
        let r = synthetic_rate_report(&[32, 128, 512, 2048], -0.5, -1.0 / 3.0).unwrap();
        assert!((r.fitted_slope + 0.5).abs() < 1e-12);
        assert!(r.fitted_intercept.abs() < 1e-12);
        let (s, _, excluded) = fit_log_log_slope(&[10, 20, 40], &[1.0, 0.5, 0.25], &[0.5, 0.0, 0.0]).unwrap();
        assert!(excluded);
        assert!((s + 1.0).abs() < 1e-12);
        assert!(fit_log_log_slope(&[10, 20], &[1.0, 0.0], &[0.0, 0.0]).is_err());
    }

    #[test]
    fn interpolation_regime_is_exact() {
        let spec = KernelSpec::brownian();
        let mut c = ScenarioConfig::new(spec, Truth::InSpan { anchors: vec![vec![0.5]], coefficients: vec![1.0] });
        c.covariates = CovariateLaw::Discrete { points: vec![vec![0.25], vec![0.5], vec![0.75]], weights: vec![0.25, 0.5, 0.25] };
        c.noise = NoiseModel::Gaussian { sigma: 0.0 };
        c.replications = 2;
        c.mc_points = 500;
        c.seed = 3;
        let report = run_rate_experiment(&c, &[16, 32, 64]).unwrap();
        for row in &report.rows {
            assert!(row.mean_sq_error < 1e-6, "{row:?}");
        }
    }

    #[test]
    fn rate_report_is_deterministic() {
        let mut c = brownian_scenario();
        c.replications = 3;
        c.mc_points = 300;
        c.oracle_points = 64;
        let a = run_rate_experiment(&c, &[8, 16, 32]).unwrap();
        let b = run_rate_experiment(&c, &[8, 16, 32]).unwrap();
        assert_eq!(a, b);
        let csv = a.to_csv().unwrap();
        assert!(csv.starts_with("n,replication,r_hat,mc_error,mc_se,bound_value,seed\n"));
        assert_eq!(csv.lines().count(), 1 + 9);
        assert!(!csv.contains('\r'));
        assert!(a.replicates.iter().all(|r| r.bound_value.is_some()));
    }

    #[test]
    fn config_rejects_unknown_keys() {
        let json = r#"{"kernel": {"family": {"type": "brownian_motion"}, "domain": {"lower": [0.0], "upper": [1.0]}},
                       "truth": {"type": "named", "name": "sin"}, "bogus": 1}"#;
        assert!(serde_json::from_str::<ScenarioConfig>(json).is_err());
        let ok = json.replace(r#", "bogus": 1"#, "");
        let c: ScenarioConfig = serde_json::from_str(&ok).unwrap();
        assert_eq!(c.grid, GridParams { a: 1.0, b: 0.25 });
        c.validate().unwrap();
    }
}
