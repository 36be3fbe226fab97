//! Run configuration: one JSON document, unknown keys rejected.
//! Command-line flags override file fields, which override the defaults.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use strongfrac::grid::GridSpec;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub grid: GridSpec,
    pub exponents: ExponentSpec,
    pub weights: WeightSpec,
    pub function: FunctionSpec,
    pub corpus: CorpusSpec,
    pub l_range: [i32; 2],
    pub seed: u64,
    /// `eval`: also run the direct oracle and record the discrepancy.
    pub oracle: bool,
    /// `characteristic`: rectangle family selection.
    pub filter: FilterSpec,
    /// `characteristic`: write the per-rectangle CSV table.
    pub table: bool,
    /// `cone-decay`: which profile to compute.
    pub profile: ProfileSpec,
    /// `cone-decay --profile synthetic`: injected decay slope.
    pub synthetic_slope: f64,
    /// `verify`: calibration constants; bundled ones when absent.
    pub calibration_path: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            grid: GridSpec {
                n: 1,
                m: 1,
                extent_x: 1.0,
                extent_y: 1.0,
                cells_x: 8,
                cells_y: 8,
            },
            exponents: ExponentSpec::default(),
            weights: WeightSpec::Unit,
            function: FunctionSpec::Random,
            corpus: CorpusSpec { kind: CorpusKindSpec::Random, count: 20 },
            l_range: [-3, 3],
            seed: 42,
            oracle: false,
            filter: FilterSpec::All,
            table: false,
            profile: ProfileSpec::Characteristic,
            synthetic_slope: 0.5,
            calibration_path: None,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExponentSpec {
    pub alpha: f64,
    pub beta: f64,
    pub p: f64,
    pub q: f64,
    pub theta: f64,
    pub t: f64,
}

impl Default for ExponentSpec {
    fn default() -> Self {
        Self { alpha: 0.5, beta: 0.5, p: 2.0, q: 2.0, theta: 3.0, t: 2.0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum WeightSpec {
    Unit,
    Power {
        a: f64,
        b: f64,
        c: f64,
        d: f64,
        /// Defaults to one first-factor cell step.
        delta: Option<f64>,
    },
    File {
        omega: PathBuf,
        sigma: PathBuf,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FunctionSpec {
    Zero,
    Constant { value: f64 },
    Random,
    SingleCell { ix: usize, iy: usize },
    File { path: PathBuf },
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusSpec {
    pub kind: CorpusKindSpec,
    pub count: usize,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CorpusKindSpec {
    DyadicIndicators,
    Random,
    SingleCells,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FilterSpec {
    All,
    Diagonal,
    Eccentricity { ell: i32 },
}

impl FilterSpec {
    /// Parse a `--filter` flag value: `all`, `diagonal`, or `ecc:<l>`.
    pub fn parse_flag(s: &str) -> Result<Self, String> {
        match s {
            "all" => Ok(Self::All),
            "diagonal" => Ok(Self::Diagonal),
            other => {
                if let Some(rest) = other.strip_prefix("ecc:") {
                    rest.parse::<i32>()
                        .map(|ell| Self::Eccentricity { ell })
                        .map_err(|e| format!("bad eccentricity in --filter: {e}"))
                } else {
                    Err(format!("unknown filter {other:?}; use all, diagonal, or ecc:<l>"))
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProfileSpec {
    Characteristic,
    Norm,
    Synthetic,
}

impl ProfileSpec {
    pub fn parse_flag(s: &str) -> Result<Self, String> {
        match s {
            "characteristic" => Ok(Self::Characteristic),
            "norm" => Ok(Self::Norm),
            "synthetic" => Ok(Self::Synthetic),
            other => Err(format!(
                "unknown profile {other:?}; use characteristic, norm, or synthetic"
            )),
        }
    }
}
