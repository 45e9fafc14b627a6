use std::fs;
use std::path::{Path, PathBuf};

use ivanov_core::{
    bdd_inter_constants, bdd_inter_rate_bound, bound_expectation_clipped, bound_expectation_unclipped,
    bound_highprob_clipped, bound_validation_expectation, bound_validation_highprob, clipped_interpolation_baseline,
    interpolation_bound, inter_constants, inter_rate_bound, minimise_unclipped_bound, optimal_radius_clipped,
    optimal_radius_highprob_clipped, optimal_radius_unclipped, prob_bdd_inter_constants, prob_bdd_inter_rate_bound,
    run_rate_experiment, select_radius, IvanovPath, ScenarioConfig, Strategy,
};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{load, BoundsConfig, FitConfig, ValidateConfig};
use crate::error::CliError;

/// Where results go: `<prefix>.json` (and `<prefix>.csv` for rates), or
/// standard output when no prefix was given.
pub struct Output {
    pub prefix: Option<PathBuf>,
}

impl Output {
    fn path(&self, ext: &str) -> Option<PathBuf> {
        self.prefix.as_ref().map(|p| {
            let mut s = p.as_os_str().to_owned();
            s.push(".");
            s.push(ext);
            PathBuf::from(s)
        })
    }

    fn write(&self, ext: &str, text: &str) -> Result<(), CliError> {
        match self.path(ext) {
            Some(path) => write_file(&path, text),
            None => {
                println!("{text}");
                Ok(())
            }
        }
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))
}

fn base(config: &Path) -> &Path {
    config.parent().unwrap_or(Path::new("."))
}

fn to_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    serde_json::to_string_pretty(value).map_err(|e| CliError::Numerical(format!("json: {e}")))
}

fn config_value<T: Serialize>(config: &T) -> Result<Value, CliError> {
    serde_json::to_value(config).map_err(|e| CliError::Config(format!("cannot echo configuration: {e}")))
}

pub fn fit(config: &Path, overrides: &[String], out: &Output) -> Result<(), CliError> {
    let cfg: FitConfig = load(config, overrides)?;
    cfg.bisection.validate()?;
    let (xs, y) = cfg.data.load("data", base(config))?;
    let path = IvanovPath::new(&cfg.kernel, &xs, &y)?;
    let fit = match cfg.bisection.strategy {
        Strategy::Diagonalised => path.fit(cfg.radius, &cfg.bisection)?,
        Strategy::MatrixSolve => path.fit_matrix_solve(cfg.radius, &cfg.bisection)?,
    };
    log::info!("r = {}: mu = {}, |h| = {}", fit.radius, fit.mu, fit.achieved_norm);
    let doc = json!({
        "config": config_value(&cfg)?,
        "radius": fit.radius,
        "mu": fit.mu,
        "threshold": path.threshold(),
        "achieved_norm": fit.achieved_norm,
        "empirical_sse": fit.empirical_sse,
        "coefficients": fit.coefficients,
    });
    out.write("json", &to_json(&doc)?)
}

pub fn validate(config: &Path, overrides: &[String], out: &Output) -> Result<(), CliError> {
    let cfg: ValidateConfig = load(config, overrides)?;
    let (tx, ty) = cfg.train.load("train", base(config))?;
    let (vx, vy) = cfg.validation.load("validation", base(config))?;
    let grid = cfg.grid.build(tx.len())?;
    let sel = select_radius(&cfg.kernel, (&tx, &ty), (&vx, &vy), &grid, cfg.clip, &cfg.bisection)?;
    log::info!("selected r = {} of {} radii", sel.selected_radius, grid.len());
    let risks: Vec<Value> = sel.validation_risks.iter().map(|(r, v)| json!({ "radius": r, "risk": v })).collect();
    let doc = json!({
        "config": config_value(&cfg)?,
        "r_hat": sel.selected_radius,
        "selected_risk": sel.selected_risk(),
        "risks": risks,
        "mu": sel.fit.mu,
        "achieved_norm": sel.fit.achieved_norm,
        "coefficients": sel.fit.coefficients,
    });
    out.write("json", &to_json(&doc)?)
}

pub fn bounds(config: &Path, overrides: &[String], out: &Output) -> Result<(), CliError> {
    let cfg: BoundsConfig = load(config, overrides)?;
    let p = cfg.params;
    p.validate()?;
    let r = cfg.radius.unwrap_or_else(|| optimal_radius_clipped(&p));
    if !(r.is_finite() && r > 0.0) {
        return Err(CliError::Config(format!("radius must be positive, got {r}")));
    }
    let i2 = match cfg.i2 {
        Some(v) => v,
        None => interpolation_bound(p.b, p.beta, r)?,
    };
    let baseline = clipped_interpolation_baseline(&p)?;
    let (k_inter, k_bdd, k_prob) =
        (inter_constants(p.beta, cfg.d1), bdd_inter_constants(p.beta, cfg.d1), prob_bdd_inter_constants(p.beta, cfg.d1));
    let highprob = match cfg.iinf {
        Some(iinf) => Some(bound_highprob_clipped(&p, r, iinf)?),
        None => None,
    };
    let doc = json!({
        "config": config_value(&cfg)?,
        "radius": r,
        "i2": i2,
        "optimal_radius": {
            "clipped": optimal_radius_clipped(&p),
            "unclipped": optimal_radius_unclipped(&p),
            "unclipped_exact": minimise_unclipped_bound(&p)?,
            "highprob_clipped": optimal_radius_highprob_clipped(&p),
        },
        "expectation_unclipped": bound_expectation_unclipped(&p, r, i2),
        "expectation_clipped": bound_expectation_clipped(&p, r, i2),
        "highprob_clipped": highprob,
        "rates": {
            "unclipped": { "constants": k_inter, "value": inter_rate_bound(&p, &k_inter) },
            "clipped": { "constants": k_bdd, "value": bdd_inter_rate_bound(&p, &k_bdd) },
            "highprob_clipped": { "constants": k_prob, "value": prob_bdd_inter_rate_bound(&p, &k_prob)? },
        },
        "validation": {
            "baseline": baseline,
            "expectation": bound_validation_expectation(&p, baseline),
            "highprob": bound_validation_highprob(&p, baseline)?,
        },
    });
    out.write("json", &to_json(&doc)?)
}

pub fn rates(config: &Path, overrides: &[String], seed: Option<u64>, out: &Output) -> Result<(), CliError> {
    let mut cfg: ScenarioConfig = load(config, overrides)?;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    let rates = cfg.rates.clone().ok_or_else(|| CliError::Config("missing [rates] section".into()))?;
    let report = run_rate_experiment(&cfg, &rates.n_values)?;
    let csv = report.to_csv()?;
    let doc = json!({
        "config": config_value(&cfg)?,
        "fitted_slope": report.fitted_slope,
        "fitted_intercept": report.fitted_intercept,
        "target_exponent": report.target_exponent,
        "excluded_smallest": report.excluded_smallest,
        "rows": report.rows,
        "note": report.note,
    });
    let json = to_json(&doc)?;
    if let Some(path) = out.path("csv") {
        write_file(&path, &csv)?;
        out.write("json", &json)?;
    } else {
        print!("{csv}");
    }
    println!("fitted slope: {}", report.fitted_slope);
    Ok(())
}
