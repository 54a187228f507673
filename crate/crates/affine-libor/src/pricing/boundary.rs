//! Exercise functions of swaptions at expiry and their linear approximation.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::curves::BasisLegs;
use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::numeric::{brent, CompensatedSum};

use super::dot;

/// One term `weight * M_{T_p}^{row}` of an exercise function, with the
/// exponents of `M^{row}` at horizon `T_N - T_p`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExerciseTerm {
    pub weight: f64,
    pub row: Vec<f64>,
    pub phi: f64,
    pub psi: Vec<f64>,
}

/// `f(y) = sum_j weight_j exp(phi_j + <psi_j, y>)`: the payoff at expiry in
/// units of `B(T_p, T_N)`. The option is exercised where `f >= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExerciseFn {
    pub expiry: f64,
    pub terms: Vec<ExerciseTerm>,
}

impl ExerciseFn {
    pub fn new(model: &ModelParams, expiry: f64, weighted: Vec<(f64, &[f64])>) -> Result<Self> {
        let horizon = model.terminal - expiry;
        let terms = weighted
            .into_iter()
            .map(|(weight, row)| {
                let e = model.spec.phi_psi(horizon, row)?;
                Ok(ExerciseTerm { weight, row: row.to_vec(), phi: e.phi, psi: e.psi })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { expiry, terms })
    }

    pub fn eval(&self, y: &[f64]) -> f64 {
        let mut s = CompensatedSum::new();
        for t in &self.terms {
            s.add(t.weight * (t.phi + dot(&t.psi, y)).exp());
        }
        s.value()
    }

    pub fn gradient(&self, y: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; y.len()];
        for t in &self.terms {
            let e = t.weight * (t.phi + dot(&t.psi, y)).exp();
            for (gi, p) in g.iter_mut().zip(&t.psi) {
                *gi += e * p;
            }
        }
        g
    }

    /// Value at time 0 divided by `B(0, T_N)`: `sum_j weight_j M_0^{row_j}`.
    pub fn forward_value(&self, model: &ModelParams) -> Result<f64> {
        let mut s = CompensatedSum::new();
        for t in &self.terms {
            s.add(t.weight * model.log_m0(&t.row)?.exp());
        }
        Ok(s.value())
    }
}

/// Payer swaption exercise function on tenor `x` over periods `p+1..=q`:
/// `sum_i (M^{v_{i-1}} - (1 + delta K) M^{u_i})`.
pub fn swaption_exercise_fn(
    model: &ModelParams,
    x: crate::curves::TenorId,
    p: usize,
    q: usize,
    strike: f64,
) -> Result<ExerciseFn> {
    let g = model.grid(x)?;
    if p >= q || q > g.n_points {
        return Err(Error::Index(format!("swaption periods {p}..{q} outside 0..={}", g.n_points)));
    }
    let kx = 1.0 + g.delta * strike;
    let mut w = Vec::with_capacity(2 * (q - p));
    for i in p + 1..=q {
        w.push((1.0, model.v(x, i - 1)?));
        w.push((-kx, model.u(x, i)?));
    }
    ExerciseFn::new(model, g.date(p), w)
}

/// Basis swaption exercise function: receive the long-tenor leg, pay the
/// short-tenor leg plus `spread`.
pub fn basis_exercise_fn(model: &ModelParams, legs: &BasisLegs, spread: f64) -> Result<ExerciseFn> {
    let g1 = model.grid(legs.short)?;
    let g2 = model.grid(legs.long)?;
    if legs.p1 >= legs.q1 || legs.q1 > g1.n_points || legs.p2 >= legs.q2 || legs.q2 > g2.n_points {
        return Err(Error::Index("basis swaption legs out of range".into()));
    }
    if (g1.date(legs.p1) - g2.date(legs.p2)).abs() > 1e-9 || (g1.date(legs.q1) - g2.date(legs.q2)).abs() > 1e-9 {
        return Err(Error::Alignment("basis legs do not share start and end dates".into()));
    }
    let short_fixed = 1.0 - g1.delta * spread;
    let mut w = Vec::new();
    for i in legs.p2 + 1..=legs.q2 {
        w.push((1.0, model.v(legs.long, i - 1)?));
        w.push((-1.0, model.u(legs.long, i)?));
    }
    for i in legs.p1 + 1..=legs.q1 {
        w.push((-1.0, model.v(legs.short, i - 1)?));
        w.push((short_fixed, model.u(legs.short, i)?));
    }
    ExerciseFn::new(model, g1.date(legs.p1), w)
}

/// Exercise region approximated by `intercept + <direction, y> >= 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryCoeffs {
    pub intercept: f64,
    pub direction: Vec<f64>,
}

impl BoundaryCoeffs {
    pub fn eval(&self, y: &[f64]) -> f64 {
        self.intercept + dot(&self.direction, y)
    }

    /// Scales so that the last direction coefficient has modulus one, or the
    /// smallest non-zero one if the last vanishes.
    fn normalized(intercept: f64, direction: Vec<f64>) -> Result<Self> {
        let last = direction.last().map_or(0.0, |s| s.abs());
        let scale = if last > 0.0 {
            last
        } else {
            direction.iter().map(|s| s.abs()).filter(|&s| s > 0.0).fold(f64::INFINITY, f64::min)
        };
        if !scale.is_finite() {
            return Err(Error::Boundary("boundary normal vanishes".into()));
        }
        Ok(Self { intercept: intercept / scale, direction: direction.into_iter().map(|s| s / scale).collect() })
    }
}

/// How the linear boundary is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "method")]
pub enum BoundaryMethod {
    /// Two-factor drivers: the line through the exact boundary points at the
    /// 5% and 95% Gaussian quantiles of the first factor.
    Quantile2d,
    /// Total least squares through sampled states with the smallest `|f|`.
    Regression { samples: usize, keep_fraction: f64, seed: u64 },
}

impl Default for BoundaryMethod {
    fn default() -> Self {
        BoundaryMethod::Quantile2d
    }
}

/// Fits the linear exercise boundary of `ef`.
pub fn fit_linear_boundary(model: &ModelParams, ef: &ExerciseFn, method: BoundaryMethod) -> Result<BoundaryCoeffs> {
    match method {
        BoundaryMethod::Quantile2d => quantile_boundary(model, ef),
        BoundaryMethod::Regression { samples, keep_fraction, seed } => {
            let states = crate::montecarlo::sample_states(&model.spec, ef.expiry, samples, seed)?;
            regression_boundary(ef, &states, keep_fraction)
        }
    }
}

fn quantile_boundary(model: &ModelParams, ef: &ExerciseFn) -> Result<BoundaryCoeffs> {
    if model.spec.dim() != 2 {
        return Err(Error::Boundary(format!(
            "quantile boundary needs two factors, driver has {}",
            model.spec.dim()
        )));
    }
    let (m0, v0) = model.spec.factors[0].moments(ef.expiry);
    let (m1, v1) = model.spec.factors[1].moments(ef.expiry);
    let sd0 = v0.sqrt();
    let (q_lo, q_hi) = if sd0 > 0.0 {
        let n = Normal::new(m0, sd0).map_err(|e| Error::Degenerate(e.to_string()))?;
        (n.inverse_cdf(0.05), n.inverse_cdf(0.95))
    } else {
        (m0 - 1.0, m0 + 1.0)
    };
    let scale = v1.sqrt().max(1e-3 * (1.0 + m1.abs()));
    let y_lo = boundary_point(ef, q_lo, m1, scale)?;
    let y_hi = boundary_point(ef, q_hi, m1, scale)?;
    let normal = vec![y_hi - y_lo, -(q_hi - q_lo)];
    let anchor = [q_lo, y_lo];
    orient(ef, normal, &anchor)
}

/// Second coordinate where `f(q, .)` vanishes, by bracket expansion around `center`.
fn boundary_point(ef: &ExerciseFn, q: f64, center: f64, scale: f64) -> Result<f64> {
    let f = |y: f64| ef.eval(&[q, y]);
    let fc = f(center);
    if fc == 0.0 {
        return Ok(center);
    }
    let mut step = scale;
    for _ in 0..60 {
        for y in [center + step, center - step] {
            let fy = f(y);
            if !fy.is_finite() {
                continue;
            }
            if fy.signum() != fc.signum() {
                let (a, b) = if y > center { (center, y) } else { (y, center) };
                return brent(f, a, b, 1e-14 * (1.0 + a.abs().max(b.abs())), 200);
            }
        }
        step *= 2.0;
        if step > 1e6 * (1.0 + center.abs()) {
            break;
        }
    }
    Err(Error::Boundary(format!("exercise function keeps one sign along coordinate 2 at {q}")))
}

/// Orients `normal` so that the positive side is the exercise region and
/// normalizes the line through `anchor`.
fn orient(ef: &ExerciseFn, mut normal: Vec<f64>, anchor: &[f64]) -> Result<BoundaryCoeffs> {
    let grad = ef.gradient(anchor);
    if dot(&grad, &normal) < 0.0 {
        normal.iter_mut().for_each(|n| *n = -*n);
    }
    let intercept = -dot(&normal, anchor);
    BoundaryCoeffs::normalized(intercept, normal)
}

/// Hyperplane fitted by total least squares through the states with the
/// smallest `|f|`.
pub fn regression_boundary(ef: &ExerciseFn, states: &[Vec<f64>], keep_fraction: f64) -> Result<BoundaryCoeffs> {
    let dim = states.first().map(Vec::len).ok_or_else(|| Error::Boundary("no states".into()))?;
    if !(keep_fraction > 0.0 && keep_fraction <= 1.0) {
        return Err(Error::InvalidParameter(format!("keep fraction {keep_fraction} outside (0, 1]")));
    }
    let mut scored: Vec<(f64, &Vec<f64>)> = states.iter().map(|s| (ef.eval(s), s)).collect();
    let pos = scored.iter().filter(|(v, _)| *v >= 0.0).count();
    if pos == 0 || pos == scored.len() {
        return Err(Error::Boundary("no sampled state on the other side of the boundary".into()));
    }
    scored.sort_by(|a, b| a.0.abs().total_cmp(&b.0.abs()));
    let keep = ((keep_fraction * scored.len() as f64).ceil() as usize).clamp(dim + 1, scored.len());
    let near = &scored[..keep];
    let mut mean = vec![0.0; dim];
    for (_, s) in near {
        for (m, v) in mean.iter_mut().zip(s.iter()) {
            *m += v / keep as f64;
        }
    }
    let mut cov = DMatrix::<f64>::zeros(dim, dim);
    for (_, s) in near {
        for i in 0..dim {
            for j in 0..dim {
                cov[(i, j)] += (s[i] - mean[i]) * (s[j] - mean[j]);
            }
        }
    }
    let eig = SymmetricEigen::new(cov);
    let (idx, _) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty spectrum");
    let normal: Vec<f64> = eig.eigenvectors.column(idx).iter().copied().collect();
    orient(ef, normal, &mean)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curves::TenorId;
    use crate::model::reference_model;

    #[test]
    fn swap_value_at_zero_matches_curves() {
        let m = reference_model().unwrap();
        let (_, curves, _) = crate::model::reference_setup().unwrap();
        let ef = swaption_exercise_fn(&m, TenorId(0), 8, 16, 0.013).unwrap();
        let tn = crate::pricing::terminal_discount(&m).unwrap();
        let v = ef.forward_value(&m).unwrap() * tn;
        assert!((v - curves.swap_value(TenorId(0), 8, 16, 0.013).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn quantile_boundary_passes_through_zero_set() {
        let m = reference_model().unwrap();
        let ef = swaption_exercise_fn(&m, TenorId(0), 8, 16, 0.013238).unwrap();
        let b = fit_linear_boundary(&m, &ef, BoundaryMethod::Quantile2d).unwrap();
        assert!(b.direction.iter().all(|&s| s > 0.0));
        assert_eq!(b.direction[1], 1.0);
        // Points on the fitted line at the quantiles sit on the true boundary.
        let (m0, v0) = m.spec.factors[0].moments(2.0);
        for z in [-1.6448536269514722, 1.6448536269514722] {
            let y0 = m0 + z * v0.sqrt();
            let y1 = -(b.intercept + b.direction[0] * y0) / b.direction[1];
            assert!(ef.eval(&[y0, y1]).abs() < 1e-10);
        }
    }

    #[test]
    fn regression_matches_a_linear_zero_set() {
        // f = e^{y0} - e^{-y1} vanishes on y0 + y1 = 0.
        let ef = ExerciseFn {
            expiry: 1.0,
            terms: vec![
                ExerciseTerm { weight: 1.0, row: vec![], phi: 0.0, psi: vec![1.0, 0.0] },
                ExerciseTerm { weight: -1.0, row: vec![], phi: 0.0, psi: vec![0.0, -1.0] },
            ],
        };
        let states: Vec<Vec<f64>> = (0..400)
            .map(|i| {
                let a = (i as f64 * 0.7548776662466927).fract() * 2.0 - 1.0;
                let b = (i as f64 * 0.5698402909980532).fract() * 2.0 - 1.0;
                vec![a, b]
            })
            .collect();
        let b = regression_boundary(&ef, &states, 0.1).unwrap();
        assert!((b.direction[0] - 1.0).abs() < 0.05 && (b.direction[1] - 1.0).abs() < 0.05, "{b:?}");
        assert!(b.intercept.abs() < 0.05);
    }
}
