//! Fitted parameter sequences `u_l` (fine grid) and `v_k^x` (per tenor) that
//! reproduce the initial OIS and LIBOR curves exactly.

pub mod layout;
pub mod negative;

use serde::{Deserialize, Serialize};

use crate::affine::{FactorKind, FactorSpec, ProcessSpec};
use crate::curves::{build_curveset, example_curves, CurveSet, TenorGrid, TenorId};
use crate::error::{Error, Result};
use crate::numeric::brent;

pub use layout::{Coord, FactorLayout, RowPlan};
pub use negative::build_negative_rate_model;

/// Sign regime the fitted model is meant for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RateMode {
    PositiveRates,
    NegativeRates,
}

/// `v_k^x` rows of one tenor, `k = 0..=N^x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TenorParams {
    pub label: String,
    pub grid: TenorGrid,
    pub v: Vec<Vec<f64>>,
}

/// Driver plus fitted `u`/`v` sequences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub spec: ProcessSpec,
    pub terminal: f64,
    pub fine_step: f64,
    /// `u_l` for `l = 0..=N`; `u_N = 0`.
    pub u_fine: Vec<Vec<f64>>,
    pub tenors: Vec<TenorParams>,
    pub mode: RateMode,
}

impl ModelParams {
    pub fn n_fine(&self) -> usize {
        self.u_fine.len() - 1
    }

    pub fn grid(&self, x: TenorId) -> Result<TenorGrid> {
        self.tenors
            .get(x.0)
            .map(|t| t.grid)
            .ok_or_else(|| Error::Index(format!("tenor {} not present", x.0)))
    }

    /// `u_k^x`, i.e. the fine row at `T_k^x`.
    pub fn u(&self, x: TenorId, k: usize) -> Result<&[f64]> {
        let g = self.grid(x)?;
        if k > g.n_points {
            return Err(Error::Index(format!("u index {k} beyond {}", g.n_points)));
        }
        Ok(&self.u_fine[g.map_to_fine(k)])
    }

    pub fn v(&self, x: TenorId, k: usize) -> Result<&[f64]> {
        let t = self.tenors.get(x.0).ok_or_else(|| Error::Index(format!("tenor {}", x.0)))?;
        t.v.get(k)
            .map(|r| r.as_slice())
            .ok_or_else(|| Error::Index(format!("v index {k} beyond {}", t.v.len() - 1)))
    }

    /// `M_t^w` at state `x_t`.
    pub fn martingale(&self, w: &[f64], t: f64, x_t: &[f64]) -> Result<f64> {
        self.spec.martingale_value(w, t, self.terminal, x_t)
    }

    /// `log M_0^w`.
    pub fn log_m0(&self, w: &[f64]) -> Result<f64> {
        self.spec.log_mgf(self.terminal, w, &self.spec.initial_state())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(text)
            .map_err(|e| Error::Parse { source_name: "model".into(), message: e.to_string() })?;
        m.spec.validate()?;
        if m.u_fine.is_empty() || m.u_fine.iter().any(|r| r.len() != m.spec.dim()) {
            return Err(Error::Config("u rows do not match the driver dimension".into()));
        }
        Ok(m)
    }

    /// Fitted values laid out as `k, u^x1, v^x1, u^x2, v^x2, ...` with the
    /// given coordinate of each row, 6 decimals.
    pub fn table(&self, coord: usize) -> String {
        let rows = self.tenors.iter().map(|t| t.grid.n_points).max().unwrap_or(0);
        let mut out = String::from("k");
        for t in &self.tenors {
            out.push_str(&format!("\tu^{0}\tv^{0}", t.label));
        }
        out.push('\n');
        for k in 0..=rows {
            out.push_str(&k.to_string());
            for (xi, t) in self.tenors.iter().enumerate() {
                let cell = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.6}"));
                let u = (k >= 1 && k <= t.grid.n_points)
                    .then(|| self.u(TenorId(xi), k).ok().map(|r| r[coord]))
                    .flatten();
                let v = (k < t.grid.n_points).then(|| t.v[k][coord]);
                out.push_str(&format!("\t{}\t{}", cell(u), cell(v)));
            }
            out.push('\n');
        }
        out
    }
}

fn materialize(plan: &RowPlan, s: f64, u_rows: &[Option<Vec<f64>>]) -> Result<Vec<f64>> {
    match plan {
        RowPlan::Ray(d) => Ok(d.iter().map(|v| v * s).collect()),
        RowPlan::Coords(cs) => cs
            .iter()
            .enumerate()
            .map(|(j, c)| match c {
                Coord::Fixed(v) => Ok(*v),
                Coord::Solve => Ok(s),
                Coord::FromU(l) => u_rows
                    .get(*l)
                    .and_then(|r| r.as_ref())
                    .map(|r| r[j])
                    .ok_or_else(|| Error::Layout(format!("row u_{l} needed before it is fitted"))),
            })
            .collect(),
    }
}

/// Largest admissible value of the solved scalar.
fn solve_ceiling(spec: &ProcessSpec, plan: &RowPlan, horizon: f64) -> f64 {
    match plan {
        RowPlan::Ray(d) => spec.validate_domain(d, horizon).max_safe_scale,
        RowPlan::Coords(cs) => cs
            .iter()
            .position(|c| *c == Coord::Solve)
            .map(|j| spec.factors[j].critical_exponent(horizon))
            .unwrap_or(f64::INFINITY),
    }
}

/// Solves `log M_0^{w(s)} = log_target` for the scalar `s` of `plan`.
/// Positive mode restricts `s >= 0`; otherwise the root closest to zero
/// is returned.
pub fn solve_row(
    spec: &ProcessSpec,
    terminal: f64,
    plan: &RowPlan,
    u_rows: &[Option<Vec<f64>>],
    log_target: f64,
    signed: bool,
    index: usize,
) -> Result<Vec<f64>> {
    if plan.dim() != spec.dim() {
        return Err(Error::Layout(format!("row plan of length {} for dimension {}", plan.dim(), spec.dim())));
    }
    let has_solve = match plan {
        RowPlan::Ray(_) => true,
        RowPlan::Coords(cs) => cs.contains(&Coord::Solve),
    };
    let x0 = spec.initial_state();
    let zero_row = materialize(plan, 0.0, u_rows)?;
    if !has_solve {
        return Ok(zero_row);
    }
    let ceiling = solve_ceiling(spec, plan, terminal);
    let eval = |s: f64| -> f64 {
        match materialize(plan, s, u_rows).and_then(|w| spec.log_mgf(terminal, &w, &x0)) {
            Ok(v) => v - log_target,
            Err(_) => f64::INFINITY,
        }
    };
    let f0 = eval(0.0);
    if f0 == 0.0 {
        return Ok(zero_row);
    }
    if !f0.is_finite() {
        return Err(Error::Fit { index, reason: "fixed coordinates are not admissible".into() });
    }
    let fail = |why: &str| Error::Fit { index, reason: why.to_string() };
    let xtol = 1e-18;
    // Expand geometrically from zero in the permitted directions.
    let mut h: f64 = 1e-3;
    for _ in 0..80 {
        let mut found: Option<(f64, f64)> = None;
        let up = h.min(ceiling * (1.0 - 1e-13));
        if up > 0.0 {
            let fu = eval(up);
            if fu.is_finite() && fu.signum() != f0.signum() {
                found = Some((0.0, up));
            }
        }
        if found.is_none() && signed {
            let fd = eval(-h);
            if fd.is_finite() && fd.signum() != f0.signum() {
                found = Some((-h, 0.0));
            }
        }
        if let Some((a, b)) = found {
            let s = brent(eval, a, b, xtol, 500).map_err(|e| fail(&e.to_string()))?;
            return materialize(plan, s, u_rows);
        }
        if h >= ceiling && !signed {
            break;
        }
        h *= 2.0;
    }
    Err(fail(&format!(
        "target {:.6e} is outside the reachable range of the moment generating function",
        log_target.exp()
    )))
}

/// Fits `u_l`, `l = 0..N`, from the last row backwards so that
/// `M_0^{u_l} = B(0,T_l) / B(0,T_N)`.
pub fn fit_u_sequence(
    spec: &ProcessSpec,
    curves: &CurveSet,
    plans: &[RowPlan],
    mode: RateMode,
) -> Result<Vec<Vec<f64>>> {
    let n = curves.n_fine();
    if plans.len() != n + 1 {
        return Err(Error::Layout(format!("{} row plans for {} fine rows", plans.len(), n + 1)));
    }
    let bn = curves.discount(n)?;
    let mut rows: Vec<Option<Vec<f64>>> = vec![None; n + 1];
    rows[n] = Some(vec![0.0; spec.dim()]);
    for l in (0..n).rev() {
        let target = (curves.discount(l)? / bn).ln();
        let row = solve_row(spec, curves.terminal, &plans[l], &rows, target, mode == RateMode::NegativeRates, l)?;
        rows[l] = Some(row);
    }
    let rows: Vec<Vec<f64>> = rows.into_iter().map(|r| r.expect("every row fitted")).collect();
    if mode == RateMode::PositiveRates {
        check_u_order(&rows)?;
    }
    Ok(rows)
}

/// Relative slack in the ordering checks for root-solver rounding.
const ORDER_TOL: f64 = 1e-13;

/// `a >= b` up to rounding.
pub(crate) fn not_below(a: f64, b: f64) -> bool {
    a >= b - ORDER_TOL * a.abs().max(b.abs())
}

fn check_u_order(rows: &[Vec<f64>]) -> Result<()> {
    for (l, r) in rows.iter().enumerate() {
        if let Some(j) = r.iter().position(|v| *v < 0.0) {
            return Err(Error::Ordering { index: l, reason: format!("coordinate {j} is negative") });
        }
    }
    for l in 1..rows.len() {
        if let Some(j) = (0..rows[l].len()).find(|&j| !not_below(rows[l - 1][j], rows[l][j])) {
            return Err(Error::Ordering {
                index: l,
                reason: format!("coordinate {j} increases from the previous row"),
            });
        }
    }
    Ok(())
}

/// Fits `v_k^x`, `k = 0..N^x`, from `M_0^{v_k} = (1 + delta L_{k+1}(0)) M_0^{u_{k+1}}`.
pub fn fit_v_sequence(
    spec: &ProcessSpec,
    curves: &CurveSet,
    u_fine: &[Vec<f64>],
    x: TenorId,
    plans: &[RowPlan],
    mode: RateMode,
) -> Result<Vec<Vec<f64>>> {
    let g = curves.grid(x)?;
    if plans.len() != g.n_points + 1 {
        return Err(Error::Layout(format!("{} v plans for {} rows", plans.len(), g.n_points + 1)));
    }
    let x0 = spec.initial_state();
    let u_rows: Vec<Option<Vec<f64>>> = u_fine.iter().cloned().map(Some).collect();
    let mut v = vec![vec![0.0; spec.dim()]; g.n_points + 1];
    for k in 0..g.n_points {
        let u_next = &u_fine[g.map_to_fine(k + 1)];
        let target = (g.delta * curves.libor(x, k + 1)?).ln_1p() + spec.log_mgf(curves.terminal, u_next, &x0)?;
        v[k] = solve_row(spec, curves.terminal, &plans[k], &u_rows, target, mode == RateMode::NegativeRates, k)?;
        if mode == RateMode::PositiveRates {
            let u_k = &u_fine[g.map_to_fine(k)];
            if let Some(j) = (0..u_k.len()).find(|&j| !not_below(v[k][j], u_k[j])) {
                return Err(Error::Ordering { index: k, reason: format!("v below u in coordinate {j}") });
            }
        }
    }
    Ok(v)
}

/// Fits every sequence of `curves` under `layout`. Positive mode only
/// accepts non-negative solved coordinates and enforces the orderings.
pub fn fit_model(
    spec: &ProcessSpec,
    curves: &CurveSet,
    layout: &FactorLayout,
    mode: RateMode,
) -> Result<ModelParams> {
    fit_model_with(spec, curves, layout, mode, true)
}

/// Like [`fit_model`] but lets every solved coordinate take either sign and
/// leaves the ordering checks to [`validate_model`].
pub fn fit_model_relaxed(
    spec: &ProcessSpec,
    curves: &CurveSet,
    layout: &FactorLayout,
    mode: RateMode,
) -> Result<ModelParams> {
    fit_model_with(spec, curves, layout, mode, false)
}

fn fit_model_with(
    spec: &ProcessSpec,
    curves: &CurveSet,
    layout: &FactorLayout,
    mode: RateMode,
    enforce: bool,
) -> Result<ModelParams> {
    spec.validate()?;
    if layout.dim() != spec.dim() {
        return Err(Error::Layout(format!(
            "layout of dimension {} for a {}-factor driver",
            layout.dim(),
            spec.dim()
        )));
    }
    if layout.grids.len() != curves.tenors.len() {
        return Err(Error::Layout("layout and curves disagree on the tenors".into()));
    }
    let fit_mode = if enforce { mode } else { RateMode::NegativeRates };
    let plans: Vec<RowPlan> = (0..=curves.n_fine()).map(|l| layout.u_plan(l)).collect();
    let u_fine = fit_u_sequence(spec, curves, &plans, fit_mode)?;
    let mut tenors = Vec::with_capacity(curves.tenors.len());
    for (xi, t) in curves.tenors.iter().enumerate() {
        let vplans: Vec<RowPlan> = (0..=t.grid.n_points).map(|k| layout.v_plan(xi, k)).collect();
        let v = fit_v_sequence(spec, curves, &u_fine, TenorId(xi), &vplans, fit_mode)?;
        tenors.push(TenorParams { label: t.label.clone(), grid: t.grid, v });
    }
    Ok(ModelParams {
        spec: spec.clone(),
        terminal: curves.terminal,
        fine_step: curves.fine_step,
        u_fine,
        tenors,
        mode,
    })
}

/// Regime of `v_k^x` relative to the neighbouring `u` values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpreadRegime {
    /// `u_k <= v_k <= u_{k-1}`.
    Normal,
    /// `v_k > u_{k-1}` in some coordinate.
    Extreme,
}

/// Outcome of [`validate_model`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelReport {
    pub u_decreasing: bool,
    pub v_above_u: bool,
    pub admissible: bool,
    /// Per tenor, per `k >= 1`.
    pub regimes: Vec<Vec<SpreadRegime>>,
    pub issues: Vec<String>,
}

impl ModelReport {
    pub fn all_normal(&self) -> bool {
        self.regimes.iter().flatten().all(|r| *r == SpreadRegime::Normal)
    }

    pub fn is_consistent(&self) -> bool {
        self.u_decreasing && self.v_above_u && self.admissible
    }
}

/// Checks ordering and admissibility and classifies the spread regime.
pub fn validate_model(params: &ModelParams) -> ModelReport {
    let mut issues = Vec::new();
    let ge = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(x, y)| not_below(*x, *y));
    let positive = params.mode == RateMode::PositiveRates;
    let mut u_decreasing = true;
    for l in 1..params.u_fine.len() {
        if !ge(&params.u_fine[l - 1], &params.u_fine[l]) {
            u_decreasing = false;
            if positive {
                issues.push(format!("u_{l} exceeds u_{}", l - 1));
            }
        }
    }
    let mut admissible = true;
    let mut check = |name: String, w: &[f64]| {
        if !params.spec.validate_domain(w, params.terminal).admissible {
            admissible = false;
            issues.push(format!("{name} is not admissible"));
        }
    };
    for (l, u) in params.u_fine.iter().enumerate() {
        check(format!("u_{l}"), u);
    }
    for t in &params.tenors {
        for (k, v) in t.v.iter().enumerate() {
            check(format!("v_{k}^{}", t.label), v);
        }
    }
    let mut v_above_u = true;
    let mut regimes = Vec::new();
    for (xi, t) in params.tenors.iter().enumerate() {
        let mut reg = Vec::new();
        for k in 0..t.grid.n_points {
            let u_k = params.u(TenorId(xi), k).expect("in range");
            if !ge(&t.v[k], u_k) {
                v_above_u = false;
                issues.push(format!("v_{k}^{} below u_{k}", t.label));
            }
            if k >= 1 {
                let u_prev = params.u(TenorId(xi), k - 1).expect("in range");
                reg.push(if ge(u_prev, &t.v[k]) { SpreadRegime::Normal } else { SpreadRegime::Extreme });
            }
        }
        regimes.push(reg);
    }
    ModelReport {
        u_decreasing: u_decreasing || !positive,
        v_above_u,
        admissible,
        regimes,
        issues,
    }
}

/// Driver, curves and layout of the two-factor worked example: terminal
/// 4.5 years, quarterly fine grid, 3m and 6m tenors, `u_c = 0.0065`,
/// common `v` coordinates 0.007 and 0.0075.
pub fn reference_setup() -> Result<(ProcessSpec, CurveSet, FactorLayout)> {
    let spec = ProcessSpec::new(vec![
        FactorSpec { kind: FactorKind::Cirj, x0: 0.5, lambda: 0.1, theta: 1.53, eta: 0.266, nu: 0.0, mu: 0.0 },
        FactorSpec {
            kind: FactorKind::Cirj,
            x0: 9.4531,
            lambda: 0.0407,
            theta: 0.0591,
            eta: 0.4640,
            nu: 0.0074,
            mu: 0.2499,
        },
    ])?;
    let (ois, tenors) = example_curves();
    let curves = build_curveset(&ois, &tenors, 0.25, 4.5, true)?;
    let grids = curves.tenors.iter().map(|t| t.grid).collect();
    let layout = FactorLayout::new(1, grids, 0.0065, vec![0.007, 0.0075])?;
    Ok((spec, curves, layout))
}

/// Fitted model of [`reference_setup`]. With these inputs the last
/// non-zero row needs a slightly negative idiosyncratic coordinate, so the
/// strict positive fit fails and the relaxed fit is used.
pub fn reference_model() -> Result<ModelParams> {
    let (spec, curves, layout) = reference_setup()?;
    fit_model_relaxed(&spec, &curves, &layout, RateMode::PositiveRates)
}
