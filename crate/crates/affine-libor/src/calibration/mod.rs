//! Sequential calibration of the per-maturity factors to caplet implied
//! volatilities, from the longest maturity backwards.

mod surface;

use argmin::core::{CostFunction, Executor, State};
use argmin::solver::neldermead::NelderMead;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::affine::{FactorKind, FactorSpec, ProcessSpec};
use crate::curves::{CurveSet, TenorId};
use crate::error::{Error, Result};
use crate::model::{fit_model, fit_model_relaxed, not_below, FactorLayout, ModelParams, RateMode};
use crate::pricing::{caplet_exponent, caplet_implied_vol, caplet_price, CapletSpec, QuadConfig};

pub use surface::{CapletQuote, CapletSurface};

/// Box bounds of `(lambda, theta, eta, nu, mu, x0)`.
pub const PARAM_BOUNDS: [(f64, f64); 6] =
    [(1e-4, 5.0), (1e-6, 50.0), (1e-6, 5.0), (0.0, 5.0), (0.0, 5.0), (1e-6, 50.0)];

/// Objective reported for candidates that cannot be fitted or priced.
const PENALTY: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationConfig {
    /// Nelder-Mead iterations per restart.
    pub max_iters: u64,
    pub restarts: usize,
    /// Stop restarting once the RMS error (in vol units) is below this.
    pub target_rms: f64,
    /// Fail if any maturity ends above this RMS error.
    pub tolerance: f64,
    /// Initial simplex size in the unbounded coordinates.
    pub simplex_step: f64,
    pub mode: RateMode,
    pub quad: QuadConfig,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self {
            max_iters: 400,
            restarts: 4,
            target_rms: 1e-5,
            tolerance: 1e-3,
            simplex_step: 0.4,
            mode: RateMode::PositiveRates,
            quad: QuadConfig { abs_tol: 1e-12, ..QuadConfig::default() },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaturityReport {
    pub maturity: usize,
    pub quotes: usize,
    /// Root-mean-square implied volatility error in vol units.
    pub rms: f64,
    pub iterations: u64,
    pub evaluations: usize,
    /// Best objective after each restart; non-increasing.
    pub trace: Vec<f64>,
    pub factor: FactorSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub maturities: Vec<MaturityReport>,
}

impl CalibrationReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationResult {
    pub spec: ProcessSpec,
    pub model: ModelParams,
    pub report: CalibrationReport,
}

fn to_params(f: &FactorSpec) -> [f64; 6] {
    [f.lambda, f.theta, f.eta, f.nu, f.mu, f.x0]
}

fn from_params(p: &[f64]) -> FactorSpec {
    FactorSpec { kind: FactorKind::Cirj, x0: p[5], lambda: p[0], theta: p[1], eta: p[2], nu: p[3], mu: p[4] }
}

fn squash(z: &[f64]) -> Vec<f64> {
    z.iter().zip(PARAM_BOUNDS).map(|(&z, (lo, hi))| lo + (hi - lo) / (1.0 + (-z).exp())).collect()
}

fn unsquash(p: &[f64]) -> Vec<f64> {
    p.iter()
        .zip(PARAM_BOUNDS)
        .map(|(&p, (lo, hi))| {
            let s = ((p - lo) / (hi - lo)).clamp(1e-9, 1.0 - 1e-9);
            (s / (1.0 - s)).ln()
        })
        .collect()
}

/// Quotes of one maturity resolved against the curve set.
struct Target {
    tenor: TenorId,
    k: usize,
    strike: f64,
    vol: f64,
}

fn targets(surface: &CapletSurface, curves: &CurveSet, layout: &FactorLayout, maturity: usize) -> Result<Vec<Target>> {
    surface
        .quotes
        .iter()
        .filter(|q| q.maturity == maturity)
        .map(|q| {
            let tenor = curves.tenor_by_label(&q.tenor)?;
            let k = layout.caplet_period(tenor.0, maturity);
            if k == 0 || k > curves.grid(tenor)?.n_points {
                return Err(Error::Config(format!("maturity {maturity} outside the {} grid", q.tenor)));
            }
            Ok(Target { tenor, k, strike: q.strike, vol: q.vol })
        })
        .collect()
}

/// Root-mean-square implied volatility error of `model` on `targets`.
/// Quotes the model cannot reproduce contribute an error of one.
fn rms_error(model: &ModelParams, targets: &[Target], quad: &QuadConfig) -> f64 {
    let sq: f64 = targets
        .par_iter()
        .map(|t| {
            let spec = CapletSpec { tenor: t.tenor, k: t.k, strike: t.strike, damping: None };
            let iv = caplet_price(model, &spec, quad).and_then(|p| caplet_implied_vol(model, &spec, p));
            match iv {
                Ok(v) => (v - t.vol).powi(2),
                Err(_) => 1.0,
            }
        })
        .sum();
    (sq / targets.len() as f64).sqrt()
}

/// Whether the rows solved for `maturity` keep the positive-rate orderings.
fn block_ordered(model: &ModelParams, layout: &FactorLayout, maturity: usize) -> bool {
    let n = model.n_fine();
    let in_block = |l: usize| l < n && layout.active_maturity(l) == maturity;
    let ge = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(x, y)| not_below(*x, *y));
    for l in (0..n).filter(|&l| in_block(l)) {
        let row = &model.u_fine[l];
        if row.iter().any(|&c| c < 0.0) || !ge(row, &model.u_fine[l + 1]) || (l > 0 && !ge(&model.u_fine[l - 1], row)) {
            return false;
        }
    }
    model.tenors.iter().enumerate().all(|(xi, t)| {
        (0..t.grid.n_points)
            .filter(|&k| in_block(t.grid.map_to_fine(k)))
            .all(|k| model.u(TenorId(xi), k).is_ok_and(|u| ge(&t.v[k], u)))
    })
}

struct MaturityObjective<'a> {
    base: &'a ProcessSpec,
    curves: &'a CurveSet,
    layout: &'a FactorLayout,
    maturity: usize,
    targets: &'a [Target],
    cfg: &'a CalibrationConfig,
    evaluations: std::sync::atomic::AtomicUsize,
}

impl MaturityObjective<'_> {
    fn model_for(&self, params: &[f64]) -> Result<ModelParams> {
        let mut spec = self.base.clone();
        spec.factors[self.layout.idiosyncratic_index(self.maturity)] = from_params(params);
        spec.validate()?;
        fit_model_relaxed(&spec, self.curves, self.layout, self.cfg.mode)
    }

    fn value(&self, params: &[f64]) -> f64 {
        self.evaluations.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
        match self.model_for(params) {
            Ok(m) if self.cfg.mode == RateMode::NegativeRates || block_ordered(&m, self.layout, self.maturity) => {
                rms_error(&m, self.targets, &self.cfg.quad)
            }
            _ => PENALTY,
        }
    }
}

impl CostFunction for &MaturityObjective<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, z: &Vec<f64>) -> std::result::Result<f64, argmin::core::Error> {
        Ok(self.value(&squash(z)))
    }
}

/// Calibrates the factor of `maturity` with the other factors of `spec`
/// held fixed and returns the updated driver.
pub fn calibrate_maturity(
    surface: &CapletSurface,
    layout: &FactorLayout,
    spec: &ProcessSpec,
    curves: &CurveSet,
    maturity: usize,
    cfg: &CalibrationConfig,
) -> Result<(ProcessSpec, MaturityReport)> {
    let targets = targets(surface, curves, layout, maturity)?;
    if targets.is_empty() {
        return Err(Error::Calibration(format!("no quotes for maturity {maturity}")));
    }
    let idx = layout.idiosyncratic_index(maturity);
    let objective = MaturityObjective {
        base: spec,
        curves,
        layout,
        maturity,
        targets: &targets,
        cfg,
        evaluations: Default::default(),
    };
    let mut best = unsquash(&to_params(&spec.factors[idx]));
    let mut best_cost = objective.value(&squash(&best));
    let mut trace = vec![best_cost];
    let mut iterations = 0;
    for _ in 0..cfg.restarts.max(1) {
        if best_cost < cfg.target_rms {
            break;
        }
        let mut simplex = vec![best.clone()];
        for j in 0..best.len() {
            let mut v = best.clone();
            v[j] += if v[j] > 0.0 { -cfg.simplex_step } else { cfg.simplex_step };
            simplex.push(v);
        }
        let solver = NelderMead::new(simplex)
            .with_sd_tolerance(cfg.target_rms * 1e-3)
            .map_err(|e| Error::Calibration(e.to_string()))?;
        let res = Executor::new(&objective, solver)
            .configure(|s| s.max_iters(cfg.max_iters).target_cost(cfg.target_rms))
            .run()
            .map_err(|e| Error::Calibration(e.to_string()))?;
        iterations += res.state().get_iter();
        let cost = res.state().get_best_cost();
        let improved = best_cost - cost;
        if cost < best_cost {
            best = res.state().get_best_param().cloned().unwrap_or(best);
            best_cost = cost;
        }
        trace.push(best_cost);
        if improved < 1e-3 * cfg.target_rms {
            break;
        }
    }
    let mut out = spec.clone();
    out.factors[idx] = from_params(&squash(&best));
    let report = MaturityReport {
        maturity,
        quotes: targets.len(),
        rms: best_cost,
        iterations,
        evaluations: objective.evaluations.into_inner(),
        trace,
        factor: out.factors[idx].clone(),
    };
    Ok((out, report))
}

/// Calibrates every maturity of `surface` from the longest to the shortest;
/// `initial` supplies the common factor and the starting guesses.
pub fn calibrate_sequential(
    surface: &CapletSurface,
    layout: &FactorLayout,
    initial: &ProcessSpec,
    curves: &CurveSet,
    cfg: &CalibrationConfig,
) -> Result<CalibrationResult> {
    surface.validate()?;
    if initial.dim() != layout.dim() {
        return Err(Error::Layout(format!("{} factors for a layout of dimension {}", initial.dim(), layout.dim())));
    }
    let mut spec = initial.clone();
    let mut reports = Vec::new();
    for maturity in (1..=layout.maturity_count).rev() {
        if !surface.quotes.iter().any(|q| q.maturity == maturity) {
            continue;
        }
        let (next, report) = calibrate_maturity(surface, layout, &spec, curves, maturity, cfg)?;
        spec = next;
        reports.push(report);
    }
    if let Some(worst) = reports.iter().find(|r| !(r.rms <= cfg.tolerance)) {
        return Err(Error::Calibration(format!(
            "maturity {} ends at RMS {:.3e} above {:.3e}",
            worst.maturity, worst.rms, cfg.tolerance
        )));
    }
    let model = match cfg.mode {
        RateMode::PositiveRates => fit_model(&spec, curves, layout, cfg.mode)?,
        RateMode::NegativeRates => fit_model_relaxed(&spec, curves, layout, cfg.mode)?,
    };
    Ok(CalibrationResult { spec, model, report: CalibrationReport { maturities: reports } })
}

/// Share of the variance of `log(1 + delta L)` at the caplet fixing of
/// `maturity` that comes from the common factor.
pub fn variance_share(model: &ModelParams, layout: &FactorLayout, tenor: TenorId, maturity: usize) -> Result<f64> {
    let k = layout.caplet_period(tenor.0, maturity);
    let fixing = model.grid(tenor)?.date(k - 1);
    let (_, loading) = caplet_exponent(model, tenor, k)?;
    let parts: Vec<f64> = model
        .spec
        .factors
        .iter()
        .zip(&loading)
        .map(|(f, b)| b * b * f.moments(fixing).1)
        .collect();
    let total: f64 = parts.iter().sum();
    if total <= 0.0 {
        return Err(Error::Degenerate("the rate has no variance at its fixing".into()));
    }
    Ok(parts[layout.common_index()] / total)
}
