//! Swaption and basis-swaption prices under a linear exercise boundary.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::affine::ShiftedMgf;
use crate::curves::{BasisLegs, TenorId};
use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::numeric::{integrate_oscillatory, integrate_semi_infinite, CompensatedSum};

use super::boundary::{basis_exercise_fn, fit_linear_boundary, swaption_exercise_fn, BoundaryCoeffs, BoundaryMethod, ExerciseFn};
use super::{black76_implied_vol, terminal_discount, QuadConfig};

/// Payer swaption on `tenor` with expiry `T_p` over periods `p+1..=q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwaptionSpec {
    pub tenor: TenorId,
    pub p: usize,
    pub q: usize,
    pub strike: f64,
}

/// Option to enter a basis swap receiving the long-tenor leg and paying the
/// short-tenor leg plus `spread`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BasisSwaptionSpec {
    pub legs: BasisLegs,
    pub spread: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Exercise {
    Boundary,
    /// No boundary crossing and the payoff is positive everywhere.
    Always,
    Never,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproxPrice {
    pub price: f64,
    pub exercise: Exercise,
    pub boundary: Option<BoundaryCoeffs>,
}

/// `P^{row}(intercept + <direction, X_T> >= 0)` under the measure with density
/// `M^{row}_T / M^{row}_0`, by Gil-Pelaez inversion.
pub fn exercise_probability(
    model: &ModelParams,
    row: &[f64],
    expiry: f64,
    boundary: &BoundaryCoeffs,
    quad: &QuadConfig,
) -> Result<f64> {
    let x0 = model.spec.initial_state();
    if expiry <= 0.0 {
        return Ok(if boundary.eval(&x0) >= 0.0 { 1.0 } else { 0.0 });
    }
    let mgf = ShiftedMgf::new(&model.spec, row, expiry, model.terminal, &x0)?;
    let c = boundary.intercept;
    let direction = &boundary.direction;
    let mut failure = None;
    let integrand = |z: f64| -> f64 {
        match mgf.log_eval_along(Complex64::new(0.0, z), direction) {
            Ok(l) => (Complex64::new(0.0, z * c) + l).exp().im / z,
            Err(e) => {
                failure.get_or_insert(e);
                0.0
            }
        }
    };
    let integral = oscillatory_or_plain(integrand, c.abs(), quad)?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(0.5 + integral / std::f64::consts::PI)
}

/// Integral over `[0, inf)` of a Fourier integrand whose tail oscillates
/// with angular frequency `freq`.
pub(crate) fn oscillatory_or_plain<F>(f: F, freq: f64, quad: &QuadConfig) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    if freq > 1e-2 {
        integrate_oscillatory(f, quad.first_segment, std::f64::consts::PI / freq, quad.abs_tol, 20_000)
    } else {
        integrate_semi_infinite(f, quad.first_segment, quad.abs_tol, quad.max_frequency)
    }
}

/// `B(0,T_N) sum_j weight_j M_0^{row_j} P^{row_j}(Y >= 0)`.
pub fn price_with_boundary(
    model: &ModelParams,
    ef: &ExerciseFn,
    boundary: &BoundaryCoeffs,
    quad: &QuadConfig,
) -> Result<f64> {
    let parts = ef
        .terms
        .par_iter()
        .map(|t| {
            if t.weight == 0.0 {
                return Ok(0.0);
            }
            let p = exercise_probability(model, &t.row, ef.expiry, boundary, quad)?;
            Ok(t.weight * model.log_m0(&t.row)?.exp() * p)
        })
        .collect::<Result<Vec<f64>>>()?;
    let mut s = CompensatedSum::new();
    parts.into_iter().for_each(|p| s.add(p));
    Ok(terminal_discount(model)? * s.value())
}

fn approx(model: &ModelParams, ef: &ExerciseFn, method: BoundaryMethod, quad: &QuadConfig) -> Result<ApproxPrice> {
    match fit_linear_boundary(model, ef, method) {
        Ok(b) => {
            let price = price_with_boundary(model, ef, &b, quad)?;
            Ok(ApproxPrice { price, exercise: Exercise::Boundary, boundary: Some(b) })
        }
        Err(Error::Boundary(_)) => {
            let x0 = model.spec.initial_state();
            if ef.eval(&x0) >= 0.0 {
                let price = terminal_discount(model)? * ef.forward_value(model)?;
                Ok(ApproxPrice { price, exercise: Exercise::Always, boundary: None })
            } else {
                Ok(ApproxPrice { price: 0.0, exercise: Exercise::Never, boundary: None })
            }
        }
        Err(e) => Err(e),
    }
}

pub fn swaption_price_approx(
    model: &ModelParams,
    spec: &SwaptionSpec,
    method: BoundaryMethod,
    quad: &QuadConfig,
) -> Result<ApproxPrice> {
    let ef = swaption_exercise_fn(model, spec.tenor, spec.p, spec.q, spec.strike)?;
    approx(model, &ef, method, quad)
}

pub fn basis_swaption_price_approx(
    model: &ModelParams,
    spec: &BasisSwaptionSpec,
    method: BoundaryMethod,
    quad: &QuadConfig,
) -> Result<ApproxPrice> {
    let ef = basis_exercise_fn(model, &spec.legs, spec.spread)?;
    approx(model, &ef, method, quad)
}

/// Model forward swap rate and OIS annuity `delta sum B(0,T_i)`.
pub fn swap_rate_and_annuity(model: &ModelParams, spec: &SwaptionSpec) -> Result<(f64, f64)> {
    let g = model.grid(spec.tenor)?;
    let tn = terminal_discount(model)?;
    let (mut float, mut annuity) = (CompensatedSum::new(), CompensatedSum::new());
    for i in spec.p + 1..=spec.q {
        let mu = model.log_m0(model.u(spec.tenor, i)?)?.exp();
        let mv = model.log_m0(model.v(spec.tenor, i - 1)?)?.exp();
        float.add(tn * (mv - mu));
        annuity.add(g.delta * tn * mu);
    }
    Ok((float.value() / annuity.value(), annuity.value()))
}

/// Black76 implied volatility of a payer swaption price.
pub fn swaption_implied_vol(model: &ModelParams, spec: &SwaptionSpec, price: f64) -> Result<f64> {
    let (rate, annuity) = swap_rate_and_annuity(model, spec)?;
    let expiry = model.grid(spec.tenor)?.date(spec.p);
    black76_implied_vol(price, rate, spec.strike, expiry, annuity)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::reference_model;

    #[test]
    fn probability_limits() {
        let m = reference_model().unwrap();
        let quad = QuadConfig::default();
        let row = m.u(TenorId(0), 16).unwrap().to_vec();
        let far = BoundaryCoeffs { intercept: -500.0, direction: vec![1.0, 1.0] };
        let near = BoundaryCoeffs { intercept: 500.0, direction: vec![1.0, 1.0] };
        assert!(exercise_probability(&m, &row, 2.0, &far, &quad).unwrap().abs() < 1e-9);
        assert!((exercise_probability(&m, &row, 2.0, &near, &quad).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn reference_swaption_is_bounded_by_swap_and_positive() {
        let m = reference_model().unwrap();
        let quad = QuadConfig::default();
        let spec = SwaptionSpec { tenor: TenorId(0), p: 8, q: 16, strike: 0.013238 };
        let a = swaption_price_approx(&m, &spec, BoundaryMethod::Quantile2d, &quad).unwrap();
        assert_eq!(a.exercise, Exercise::Boundary);
        let (rate, annuity) = swap_rate_and_annuity(&m, &spec).unwrap();
        assert!(a.price > 0.0);
        assert!(a.price > annuity * (rate - spec.strike));
        assert!(a.price < annuity * rate);
    }

    #[test]
    fn deep_strikes_fall_back_to_swap_or_zero() {
        let m = reference_model().unwrap();
        let quad = QuadConfig::default();
        let low = SwaptionSpec { tenor: TenorId(0), p: 8, q: 16, strike: -3.0 };
        let a = swaption_price_approx(&m, &low, BoundaryMethod::Quantile2d, &quad).unwrap();
        let (rate, annuity) = swap_rate_and_annuity(&m, &low).unwrap();
        if a.exercise == Exercise::Always {
            assert!((a.price - annuity * (rate - low.strike)).abs() < 1e-12);
        }
        assert!((a.price - annuity * (rate - low.strike)).abs() < 1e-6);
    }
}
