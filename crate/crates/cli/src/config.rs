//! Run configuration read from `--config`.

use std::path::Path;

use clap::ValueEnum;
use levy_liouville::functions::TestFunction;
use levy_liouville::liouville::ProbeSet;
use levy_liouville::symbols::{SubordinatorDocument, SymbolDocument};
use levy_liouville::{Envelope, Grid, SymbolSpec, Tolerances};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    SymbolEval,
    Moments,
    HwCheck,
    ZeroSet,
    GeneratorApply,
    DecayNorm,
    Density,
    SemigroupApply,
    DimensionWalk,
    WeakResidual,
    FixedPoint,
    Hoelder,
    Classify,
    Simulate,
    Dynkin,
}

impl Command {
    pub fn name(self) -> String {
        self.to_possible_value().expect("no skipped variants").get_name().to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub d: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub h: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    #[default]
    Spectral,
    Direct,
    Both,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    /// Skip the CSV plot data.
    pub no_csv: bool,
    /// Also dump raw binary data (grid values, density table or sample batch).
    pub binary: bool,
}

/// Every key is optional; each subcommand checks for the ones it needs.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub command: Option<Command>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub symbol: Option<SymbolDocument>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    /// `u` for the harmonic pipeline, `f` or `φ` elsewhere.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub function: Option<TestFunction>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub envelope: Option<Envelope>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub probes: Option<ProbeSet>,
    pub tolerances: Tolerances,
    pub seed: u64,
    pub outputs: OutputConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub frequencies: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radii: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub subordinator: Option<SubordinatorDocument>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub route: Option<Route>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub padding: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quad_points: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub step: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub order: Option<usize>,
}

fn missing(key: &str) -> CliError {
    CliError::Config(format!("missing required key `{key}`"))
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn spec(&self) -> Result<SymbolSpec, CliError> {
        Ok(self.symbol.as_ref().ok_or_else(|| missing("symbol"))?.to_spec()?)
    }

    pub fn grid(&self) -> Result<Grid, CliError> {
        let g = self.grid.ok_or_else(|| missing("grid"))?;
        Ok(Grid::new(g.d, g.n, g.h)?)
    }

    pub fn grid_opt(&self) -> Result<Option<Grid>, CliError> {
        self.grid.map(|_| self.grid()).transpose()
    }

    pub fn time(&self) -> Result<f64, CliError> {
        self.t.ok_or_else(|| missing("t"))
    }

    pub fn beta(&self) -> Result<f64, CliError> {
        self.beta.ok_or_else(|| missing("beta"))
    }

    pub fn function(&self, dimension: usize) -> Result<&TestFunction, CliError> {
        let f = self.function.as_ref().ok_or_else(|| missing("function"))?;
        f.validate(dimension)?;
        Ok(f)
    }

    /// Configured envelope, or the catalogue envelope of the function.
    pub fn envelope_for(&self, f: &TestFunction) -> Envelope {
        self.envelope.unwrap_or_else(|| f.envelope())
    }

    pub fn points(&self) -> Result<&[Vec<f64>], CliError> {
        self.points.as_deref().ok_or_else(|| missing("points"))
    }

    pub fn radii(&self) -> Result<&[f64], CliError> {
        self.radii.as_deref().ok_or_else(|| missing("radii"))
    }
}
