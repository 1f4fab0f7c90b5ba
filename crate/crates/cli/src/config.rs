//! Run configuration: a JSON document with nested sections, optionally
//! patched from the environment.
//!
//! An environment variable `BARENBLATT__GRID__N_SPACE=400` sets
//! `grid.n_space`. Values are parsed as JSON when possible and taken as
//! strings otherwise.

use std::path::{Path, PathBuf};

use barenblatt_core::{
    build_grid, BoundarySpec, FarField, Grid, ModelParams, Payoff, PayoffKind, PolicySettings, Side, Spacing,
};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{CliError, CliResult};

pub const ENV_PREFIX: &str = "BARENBLATT__";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub payoff: PayoffConfig,
    #[serde(default)]
    pub boundary: BoundaryConfig,
    pub grid: GridConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

/// Either a band `sigma_lo < sigma_hi` or a single `sigma`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub rate: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_lo: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_hi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    pub maturity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PayoffConfig {
    VanillaCall { strike: f64 },
    VanillaPut { strike: f64 },
    DigitalCall { strike: f64 },
    Butterfly { k1: f64, k2: f64 },
    PiecewiseLinear { breakpoints: Vec<[f64; 2]> },
    Constant { value: f64 },
    Portfolio { legs: Vec<LegConfig> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LegConfig {
    pub weight: f64,
    pub payoff: PayoffConfig,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundaryConfig {
    /// Defaults to twice the largest strike.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_max: Option<f64>,
    /// Defaults to the payoff's asymptotic form.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub far_field: Option<FarFieldConfig>,
    /// Defaults to the largest far-field magnitude.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum FarFieldConfig {
    /// `slope·S + fixed + discounted·e^{−rτ}`
    Affine {
        #[serde(default)]
        slope: f64,
        #[serde(default)]
        fixed: f64,
        #[serde(default)]
        discounted: f64,
    },
    /// One `(slope, intercept)` pair per time level.
    Table { slope: Vec<f64>, intercept: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n_space: usize,
    pub n_time: usize,
    #[serde(default)]
    pub spacing: SpacingConfig,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum SpacingConfig {
    #[default]
    Uniform,
    Clustered { center: f64, ratio: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_scale")]
    pub scale: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
}

fn default_tolerance() -> f64 {
    PolicySettings::default().tolerance
}

fn default_scale() -> f64 {
    PolicySettings::default().scale
}

fn default_max_iter() -> usize {
    PolicySettings::default().max_iter
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { tolerance: default_tolerance(), scale: default_scale(), max_iter: default_max_iter() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SideSelection {
    Ask,
    Bid,
    #[default]
    Both,
}

impl SideSelection {
    pub fn sides(self) -> &'static [Side] {
        match self {
            SideSelection::Ask => &[Side::Ask],
            SideSelection::Bid => &[Side::Bid],
            SideSelection::Both => &[Side::Ask, Side::Bid],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    /// File name stem; defaults to the config file's stem.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stem: Option<String>,
    #[serde(default)]
    pub side: SideSelection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spot: Option<f64>,
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: default_dir(), stem: None, side: SideSelection::default(), spot: None }
    }
}

/// Everything a solve needs, validated.
#[derive(Debug, Clone)]
pub struct Problem {
    pub params: ModelParams,
    /// Ask-side claim; the bid is requested through [`Payoff::with_side`].
    pub payoff: Payoff,
    pub boundary: BoundarySpec,
    pub grid: Grid,
    pub settings: PolicySettings,
}

impl PayoffConfig {
    pub fn to_kind(&self) -> PayoffKind {
        match self {
            PayoffConfig::VanillaCall { strike } => PayoffKind::VanillaCall { strike: *strike },
            PayoffConfig::VanillaPut { strike } => PayoffKind::VanillaPut { strike: *strike },
            PayoffConfig::DigitalCall { strike } => PayoffKind::DigitalCall { strike: *strike },
            PayoffConfig::Butterfly { k1, k2 } => PayoffKind::Butterfly { k1: *k1, k2: *k2 },
            PayoffConfig::PiecewiseLinear { breakpoints } => PayoffKind::PiecewiseLinear {
                breakpoints: breakpoints.iter().map(|p| (p[0], p[1])).collect(),
            },
            PayoffConfig::Constant { value } => PayoffKind::Constant(*value),
            PayoffConfig::Portfolio { legs } => {
                PayoffKind::Portfolio(legs.iter().map(|l| (l.weight, l.payoff.to_kind())).collect())
            }
        }
    }
}

impl FarFieldConfig {
    pub fn to_far_field(&self) -> FarField {
        match self {
            FarFieldConfig::Affine { slope, fixed, discounted } => {
                FarField::Affine { slope: *slope, fixed: *fixed, discounted: *discounted }
            }
            FarFieldConfig::Table { slope, intercept } => {
                FarField::Table { slope: slope.clone(), intercept: intercept.clone() }
            }
        }
    }
}

impl ModelConfig {
    pub fn to_params(&self) -> CliResult<ModelParams> {
        let params = match (self.sigma, self.sigma_lo, self.sigma_hi) {
            (Some(s), None, None) => ModelParams::fixed_volatility(self.rate, s, self.maturity),
            (None, Some(lo), Some(hi)) => ModelParams::new(self.rate, lo, hi, self.maturity),
            _ => {
                return Err(CliError::Config(
                    "model needs either `sigma` or both `sigma_lo` and `sigma_hi`".into(),
                ))
            }
        };
        params.map_err(CliError::Problem)
    }
}

impl RunConfig {
    /// Reads `path` and applies overrides from `env`.
    pub fn load<I>(path: &Path, env: I) -> CliResult<Self>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut config = Self::parse_with_overrides(&text, env)?;
        if config.output.stem.is_none() {
            config.output.stem = path.file_stem().map(|s| s.to_string_lossy().into_owned());
        }
        Ok(config)
    }

    pub fn parse(text: &str) -> CliResult<Self> {
        Self::parse_with_overrides(text, std::iter::empty())
    }

    pub fn parse_with_overrides<I>(text: &str, env: I) -> CliResult<Self>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        let mut value: Value = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        apply_overrides(&mut value, env)?;
        serde_json::from_value(value).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn to_json(&self) -> Value {
        serde_json::to_value(self).expect("config serializes")
    }

    pub fn stem(&self) -> &str {
        self.output.stem.as_deref().unwrap_or("run")
    }

    pub fn spacing(&self) -> Spacing {
        match self.grid.spacing {
            SpacingConfig::Uniform => Spacing::Uniform,
            SpacingConfig::Clustered { center, ratio } => Spacing::Clustered { center, ratio },
        }
    }

    pub fn settings(&self) -> PolicySettings {
        PolicySettings {
            tolerance: self.solver.tolerance,
            scale: self.solver.scale,
            max_iter: self.solver.max_iter,
        }
    }

    /// Validates the run and builds the grid. Inadmissible steps are
    /// rejected here, before any solve.
    pub fn problem(&self) -> CliResult<Problem> {
        self.problem_refined(0)
    }

    /// As [`RunConfig::problem`] with both grid counts multiplied by `2^level`.
    pub fn problem_refined(&self, level: u32) -> CliResult<Problem> {
        let params = self.model.to_params()?;
        let payoff = Payoff::ask(self.payoff.to_kind())?;
        let b = &self.boundary;
        let boundary = match (&b.far_field, b.bound) {
            (None, None) => BoundarySpec::for_payoff(&payoff, b.s_max)?,
            (ff, bound) => {
                let s_max = b.s_max.or_else(|| payoff.default_s_max()).ok_or_else(|| {
                    CliError::Config("boundary.s_max is required for payoffs without a strike".into())
                })?;
                let ff = ff.as_ref().map(FarFieldConfig::to_far_field).unwrap_or_else(|| payoff.default_far_field());
                match bound {
                    Some(c) => BoundarySpec::new(s_max, ff, c)?,
                    None => BoundarySpec::tight(s_max, ff)?,
                }
            }
        };
        let settings = self.settings();
        settings.validate()?;
        let factor = 1usize << level;
        let grid = build_grid(
            &params,
            &boundary,
            self.grid.n_space * factor,
            self.grid.n_time * factor,
            self.spacing(),
        )?;
        Ok(Problem { params, payoff, boundary, grid, settings })
    }
}

/// Patches `value` from `BARENBLATT__A__B=v` pairs; other keys are ignored.
pub fn apply_overrides<I>(value: &mut Value, env: I) -> CliResult<()>
where
    I: IntoIterator<Item = (String, String)>,
{
    let mut pairs: Vec<(String, String)> = env.into_iter().filter(|(k, _)| k.starts_with(ENV_PREFIX)).collect();
    pairs.sort();
    for (key, raw) in pairs {
        let path: Vec<String> = key[ENV_PREFIX.len()..].split("__").map(str::to_ascii_lowercase).collect();
        if path.iter().any(String::is_empty) {
            return Err(CliError::Config(format!("malformed override `{key}`")));
        }
        let parsed = serde_json::from_str(&raw).unwrap_or(Value::String(raw));
        let mut node = &mut *value;
        for segment in &path[..path.len() - 1] {
            let map = node
                .as_object_mut()
                .ok_or_else(|| CliError::Config(format!("override `{key}` descends into a non-object")))?;
            node = map.entry(segment.clone()).or_insert_with(|| Value::Object(Default::default()));
        }
        let map = node
            .as_object_mut()
            .ok_or_else(|| CliError::Config(format!("override `{key}` descends into a non-object")))?;
        map.insert(path[path.len() - 1].clone(), parsed);
    }
    Ok(())
}
