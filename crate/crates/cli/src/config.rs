//! Scenario files: TOML documents with `key=value` overrides, parsed strictly.

use std::fs;
use std::path::{Path, PathBuf};

use ivanov_core::{BisectionOptions, BoundParams, KernelSpec, ValidationGrid};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::error::CliError;

/// Reads `path`, applies the overrides in order and deserialises the result.
pub fn load<T: DeserializeOwned>(path: &Path, overrides: &[String]) -> Result<T, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut table: Table =
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    for o in overrides {
        apply_override(&mut table, o)?;
    }
    Value::Table(table).try_into().map_err(|e: toml::de::Error| CliError::Config(e.to_string()))
}

/// Sets a dotted key, creating intermediate tables. The value is read as a
/// TOML literal when possible and as a bare string otherwise.
pub fn apply_override(table: &mut Table, assignment: &str) -> Result<(), CliError> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override `{assignment}` is not of the form key=value")))?;
    let key = key.trim();
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(CliError::Config(format!("bad override key `{key}`")));
    }
    let value = parse_value(raw.trim());
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().unwrap();
    let mut current = table;
    for part in parts {
        let entry = current.entry(part.to_string()).or_insert_with(|| Value::Table(Table::new()));
        current = match entry {
            Value::Table(t) => t,
            _ => return Err(CliError::Config(format!("override `{key}`: `{part}` is not a table"))),
        };
    }
    current.insert(last.to_string(), value);
    Ok(())
}

fn parse_value(raw: &str) -> Value {
    toml::from_str::<Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

/// Observations given inline or as a CSV file whose last column is the
/// response and whose other columns are the covariates.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSource {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
}

impl DataSource {
    /// Relative CSV paths are taken from `base`, the directory of the config file.
    pub fn load(&self, what: &str, base: &Path) -> Result<(Vec<Vec<f64>>, Vec<f64>), CliError> {
        match (&self.x, &self.y, &self.csv) {
            (Some(x), Some(y), None) => {
                if x.len() != y.len() {
                    return Err(CliError::Config(format!("{what}: {} points but {} responses", x.len(), y.len())));
                }
                Ok((x.clone(), y.clone()))
            }
            (None, None, Some(path)) => read_csv(&base.join(path)).map_err(|e| CliError::Config(format!("{what}: {e}"))),
            _ => Err(CliError::Config(format!("{what}: give either both `x` and `y` or a `csv` path"))),
        }
    }
}

fn read_csv(path: &Path) -> Result<(Vec<Vec<f64>>, Vec<f64>), String> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| e.to_string())?;
        let values = record
            .iter()
            .map(|f| f.trim().parse::<f64>())
            .collect::<Result<Vec<f64>, _>>()
            .map_err(|e| format!("{} row {}: {e}", path.display(), line + 1))?;
        let (y, x) = values.split_last().ok_or_else(|| format!("{} row {} is empty", path.display(), line + 1))?;
        if x.is_empty() {
            return Err(format!("{} needs at least one covariate column", path.display()));
        }
        xs.push(x.to_vec());
        ys.push(*y);
    }
    Ok((xs, ys))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    pub kernel: KernelSpec,
    pub data: DataSource,
    pub radius: f64,
    #[serde(default)]
    pub bisection: BisectionOptions,
}

/// Either explicit radii or spacing `b` up to `a n^{1/2}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radii: Option<Vec<f64>>,
}

impl GridConfig {
    pub fn build(&self, n: usize) -> Result<ValidationGrid, CliError> {
        match (self.a, self.b, &self.radii) {
            (Some(a), Some(b), None) => Ok(ivanov_core::build_grid(a, b, n)?),
            (None, None, Some(radii)) => Ok(ValidationGrid::from_radii(radii.clone())?),
            _ => Err(CliError::Config("grid: give either `a` and `b` or `radii`".into())),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidateConfig {
    pub kernel: KernelSpec,
    pub train: DataSource,
    pub validation: DataSource,
    pub grid: GridConfig,
    /// Clipping bound `C`.
    pub clip: f64,
    #[serde(default)]
    pub bisection: BisectionOptions,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsConfig {
    #[serde(default)]
    pub params: BoundParams,
    /// Radius for the fixed-radius bounds; the optimal clipped radius if absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    /// Approximation error `I_2` at that radius; the interpolation bound if absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub i2: Option<f64>,
    /// Sup-norm approximation error; the high-probability fixed-radius bound
    /// is only reported when given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iinf: Option<f64>,
    /// Radius scale for the rate forms; the minimisers if absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d1: Option<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides() {
        let mut t: Table = toml::from_str("radius = 1.0\n[data]\ny = [1.0]\n").unwrap();
        apply_override(&mut t, "radius=2.5").unwrap();
        apply_override(&mut t, "bisection.tolerance=1e-12").unwrap();
        apply_override(&mut t, "bisection.strategy=matrix_solve").unwrap();
        apply_override(&mut t, "data.y=[3.0, 4.0]").unwrap();
        assert_eq!(t["radius"].as_float(), Some(2.5));
        assert_eq!(t["bisection"]["tolerance"].as_float(), Some(1e-12));
        assert_eq!(t["bisection"]["strategy"].as_str(), Some("matrix_solve"));
        assert_eq!(t["data"]["y"].as_array().unwrap().len(), 2);
        assert!(apply_override(&mut t, "radius").is_err());
        assert!(apply_override(&mut t, "radius.x=1").is_err());
        assert!(apply_override(&mut t, "a..b=1").is_err());
    }

    #[test]
    fn data_sources() {
        let both = DataSource { x: Some(vec![vec![0.0]]), y: Some(vec![1.0]), csv: Some("f.csv".into()) };
        assert!(both.load("data", Path::new(".")).is_err());
        let short = DataSource { x: Some(vec![vec![0.0]]), y: Some(vec![]), csv: None };
        assert!(short.load("data", Path::new(".")).is_err());
    }
}
