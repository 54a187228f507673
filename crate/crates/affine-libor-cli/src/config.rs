use std::path::{Path, PathBuf};

use affine_libor::affine::ProcessSpec;
use affine_libor::analytics::{CorrelationKind, RateIndex};
use affine_libor::calibration::CalibrationConfig;
use affine_libor::curves::{build_curveset, CurveSet, CurveTables, NelsonSiegelParams};
use affine_libor::model::{build_negative_rate_model, fit_model, fit_model_relaxed, FactorLayout, ModelParams, RateMode};
use affine_libor::montecarlo::SimConfig;
use affine_libor::pricing::{BasisSwaptionSpec, BoundaryMethod, CapletSpec, QuadConfig, SwaptionSpec};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TenorCurveConfig {
    pub label: String,
    pub delta: f64,
    pub params: NelsonSiegelParams,
}

/// Where the initial curves come from.
#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum CurveSource {
    NelsonSiegel { ois: NelsonSiegelParams, tenors: Vec<TenorCurveConfig> },
    /// Directory with `discounts.csv` and `libor_<tenor>.csv`.
    TablesDir(PathBuf),
    /// A curve set written by `curves`.
    Curveset(PathBuf),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayoutConfig {
    pub maturity_count: usize,
    pub u_common: f64,
    pub v_common: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Instrument {
    Caplet(CapletSpec),
    Swaption(SwaptionSpec),
    BasisSwaption(BasisSwaptionSpec),
}

impl Instrument {
    pub fn name(&self) -> &'static str {
        match self {
            Instrument::Caplet(_) => "caplet",
            Instrument::Swaption(_) => "swaption",
            Instrument::BasisSwaption(_) => "basis-swaption",
        }
    }

    pub fn params(&self) -> serde_json::Value {
        match self {
            Instrument::Caplet(s) => serde_json::to_value(s),
            Instrument::Swaption(s) => serde_json::to_value(s),
            Instrument::BasisSwaption(s) => serde_json::to_value(s),
        }
        .expect("instrument serializes")
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DumpConfig {
    pub paths: usize,
    pub dates: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrelationRequest {
    pub kind: CorrelationKind,
    pub date: f64,
    pub rates: Vec<RateIndex>,
}

fn default_fine_step() -> f64 {
    0.25
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub curves: Option<CurveSource>,
    #[serde(default = "default_fine_step")]
    pub fine_step: f64,
    pub terminal: Option<f64>,
    #[serde(default)]
    pub mode: Option<RateMode>,
    pub spec: Option<ProcessSpec>,
    pub layout: Option<LayoutConfig>,
    /// Let solved coordinates take either sign and skip the ordering checks.
    #[serde(default)]
    pub relaxed_fit: bool,
    /// Second coordinate of `u` in the negative-rates construction.
    pub spread_level: Option<f64>,
    /// A fitted model written by `build`; skips the fit.
    pub model: Option<PathBuf>,
    #[serde(default)]
    pub instruments: Vec<Instrument>,
    #[serde(default)]
    pub quad: QuadConfig,
    #[serde(default)]
    pub boundary: BoundaryMethod,
    #[serde(default)]
    pub mc: SimConfig,
    pub dump_paths: Option<DumpConfig>,
    pub surface: Option<PathBuf>,
    #[serde(default)]
    pub calibration: CalibrationConfig,
    pub correlations: Option<CorrelationRequest>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = read_text(path)?;
        let mut cfg: RunConfig = serde_json::from_str(&text).map_err(|e| CliError::json(path, &e))?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn mode(&self) -> RateMode {
        self.mode.unwrap_or(RateMode::PositiveRates)
    }

    pub fn apply_seed(&mut self, seed: u64) {
        self.mc.seed = seed;
        if let BoundaryMethod::Regression { seed: s, .. } = &mut self.boundary {
            *s = seed;
        }
    }

    pub fn curveset(&self) -> Result<CurveSet, CliError> {
        let source = self.curves.as_ref().ok_or_else(|| CliError::Config("config has no `curves` section".into()))?;
        let require_positive = self.mode() == RateMode::PositiveRates;
        let terminal = || self.terminal.ok_or_else(|| CliError::Config("config has no `terminal` date".into()));
        let curves = match source {
            CurveSource::NelsonSiegel { ois, tenors } => {
                let t: Vec<(String, NelsonSiegelParams, f64)> =
                    tenors.iter().map(|t| (t.label.clone(), t.params, t.delta)).collect();
                build_curveset(ois, &t, self.fine_step, terminal()?, require_positive)?
            }
            CurveSource::TablesDir(dir) => {
                CurveTables::from_csv_dir(&self.resolve(dir))?.to_curveset(self.fine_step, terminal()?, require_positive)?
            }
            CurveSource::Curveset(path) => {
                let path = self.resolve(path);
                CurveSet::from_json(&read_text(&path)?)?
            }
        };
        Ok(curves)
    }

    pub fn spec(&self) -> Result<&ProcessSpec, CliError> {
        self.spec.as_ref().ok_or_else(|| CliError::Config("config has no `spec` section".into()))
    }

    pub fn layout(&self, curves: &CurveSet) -> Result<FactorLayout, CliError> {
        let l = self.layout.as_ref().ok_or_else(|| CliError::Config("config has no `layout` section".into()))?;
        let grids = curves.tenors.iter().map(|t| t.grid).collect();
        Ok(FactorLayout::new(l.maturity_count, grids, l.u_common, l.v_common.clone())?)
    }

    /// Fits the model from curves, driver and layout.
    pub fn fit(&self) -> Result<ModelParams, CliError> {
        let curves = self.curveset()?;
        let spec = self.spec()?;
        let model = match self.mode() {
            RateMode::PositiveRates if self.relaxed_fit => {
                fit_model_relaxed(spec, &curves, &self.layout(&curves)?, RateMode::PositiveRates)?
            }
            RateMode::PositiveRates => fit_model(spec, &curves, &self.layout(&curves)?, RateMode::PositiveRates)?,
            RateMode::NegativeRates => {
                let level = self
                    .spread_level
                    .ok_or_else(|| CliError::Config("negative-rates mode needs `spread_level`".into()))?;
                build_negative_rate_model(spec, &curves, level)?
            }
        };
        Ok(model)
    }

    /// The model named by `model`, or a fresh fit.
    pub fn model(&self) -> Result<ModelParams, CliError> {
        match &self.model {
            Some(path) => {
                let path = self.resolve(path);
                Ok(ModelParams::from_json(&read_text(&path)?)?)
            }
            None => self.fit(),
        }
    }
}

pub fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}
