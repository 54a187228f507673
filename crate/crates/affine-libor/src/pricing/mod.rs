//! Model-implied rates, Fourier caplet prices, linear-boundary swaption and
//! basis-swaption approximations, and Black76 implied volatilities.

pub mod black;
pub mod boundary;
pub mod swaption;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::affine::ShiftedMgf;
use crate::curves::TenorId;
use crate::error::{Error, Result};
use crate::model::ModelParams;

pub use black::{black76_call, black76_implied_vol, black76_vega};
pub use boundary::{
    basis_exercise_fn, fit_linear_boundary, regression_boundary, swaption_exercise_fn, BoundaryCoeffs,
    BoundaryMethod, ExerciseFn, ExerciseTerm,
};
pub use swaption::{
    basis_swaption_price_approx, exercise_probability, price_with_boundary, swap_rate_and_annuity,
    swaption_implied_vol, swaption_price_approx, ApproxPrice, BasisSwaptionSpec, Exercise, SwaptionSpec,
};

/// Quadrature settings for the Fourier integrals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadConfig {
    /// Absolute tolerance on each normalized integral.
    pub abs_tol: f64,
    /// Length of the first integration segment.
    pub first_segment: f64,
    /// Give up beyond this frequency.
    pub max_frequency: f64,
}

impl Default for QuadConfig {
    fn default() -> Self {
        Self { abs_tol: 1e-13, first_segment: 4.0, max_frequency: 1e9 }
    }
}

/// OIS forward `F_k^x(t)` at state `x_t`.
pub fn ois_rate(model: &ModelParams, x: TenorId, k: usize, t: f64, x_t: &[f64]) -> Result<f64> {
    let (lo, hi, d) = bracket_rows(model, x, k, t)?;
    let r = model.martingale(model.u(x, lo)?, t, x_t)? / model.martingale(model.u(x, hi)?, t, x_t)?;
    Ok((r - 1.0) / d)
}

/// LIBOR forward `L_k^x(t)` at state `x_t`.
pub fn libor_rate(model: &ModelParams, x: TenorId, k: usize, t: f64, x_t: &[f64]) -> Result<f64> {
    let (lo, hi, d) = bracket_rows(model, x, k, t)?;
    let r = model.martingale(model.v(x, lo)?, t, x_t)? / model.martingale(model.u(x, hi)?, t, x_t)?;
    Ok((r - 1.0) / d)
}

/// Additive and multiplicative spreads `(L - F, ((1 + dL)/(1 + dF) - 1)/d)`.
pub fn spreads(model: &ModelParams, x: TenorId, k: usize, t: f64, x_t: &[f64]) -> Result<(f64, f64)> {
    let d = model.grid(x)?.delta;
    let f = ois_rate(model, x, k, t, x_t)?;
    let l = libor_rate(model, x, k, t, x_t)?;
    Ok((l - f, ((1.0 + d * l) / (1.0 + d * f) - 1.0) / d))
}

fn bracket_rows(model: &ModelParams, x: TenorId, k: usize, t: f64) -> Result<(usize, usize, f64)> {
    let g = model.grid(x)?;
    if k == 0 || k > g.n_points {
        return Err(Error::Index(format!("period {k} outside 1..={}", g.n_points)));
    }
    if t > g.date(k - 1) + 1e-12 {
        return Err(Error::Domain(format!("time {t} after the fixing date {}", g.date(k - 1))));
    }
    Ok((k - 1, k, g.delta))
}

/// Caplet on `tenor` for the period `[T_{k-1}, T_k]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CapletSpec {
    pub tenor: TenorId,
    pub k: usize,
    pub strike: f64,
    /// Damping exponent; `None` picks 1.5 or less if the strip is narrower.
    pub damping: Option<f64>,
}

/// Log-payoff `W = A + <B, X_{T_{k-1}}>` with `e^W = 1 + delta L_k(T_{k-1})`.
pub(crate) fn caplet_exponent(model: &ModelParams, x: TenorId, k: usize) -> Result<(f64, Vec<f64>)> {
    let g = model.grid(x)?;
    let horizon = model.terminal - g.date(k - 1);
    let ev = model.spec.phi_psi(horizon, model.v(x, k - 1)?)?;
    let eu = model.spec.phi_psi(horizon, model.u(x, k)?)?;
    let b = ev.psi.iter().zip(&eu.psi).map(|(a, b)| a - b).collect();
    Ok((ev.phi - eu.phi, b))
}

/// Fourier caplet price
/// `B(0,T_k)/pi * int_0^inf Re[K^{1-R+iw} Theta(R-iw) / ((R-iw)(R-1-iw))] dw`
/// with `Theta` the moment generating function of `W` under the
/// `T_k`-forward measure and `K = 1 + delta strike`.
pub fn caplet_price(model: &ModelParams, spec: &CapletSpec, quad: &QuadConfig) -> Result<f64> {
    let g = model.grid(spec.tenor)?;
    if spec.k == 0 || spec.k > g.n_points {
        return Err(Error::Index(format!("caplet period {} outside 1..={}", spec.k, g.n_points)));
    }
    let curves_b = model.log_m0(model.u(spec.tenor, spec.k)?)?.exp() * terminal_discount(model)?;
    let kx = 1.0 + g.delta * spec.strike;
    let fixing = g.date(spec.k - 1);
    let (a, b) = caplet_exponent(model, spec.tenor, spec.k)?;
    let x0 = model.spec.initial_state();
    if fixing <= 0.0 {
        return Ok(curves_b * ((a + dot(&b, &x0)).exp() - kx).max(0.0));
    }
    if kx <= 0.0 {
        // Always exercised: forward value of the payoff.
        let fwd = libor_forward_factor(model, spec.tenor, spec.k)?;
        return Ok(curves_b * (fwd - kx));
    }
    let mgf = ShiftedMgf::new(&model.spec, model.u(spec.tenor, spec.k)?, fixing, model.terminal, &x0)?;
    let strip = mgf.real_strip_end(&b);
    let damping = match spec.damping {
        Some(r) => {
            if !(r > 1.0 && r < strip) {
                return Err(Error::Domain(format!("damping {r} outside (1, {strip})")));
            }
            r
        }
        None => {
            if strip <= 1.0 {
                return Err(Error::Domain("no admissible damping above 1".into()));
            }
            1.5f64.min(0.5 * (1.0 + strip))
        }
    };
    let log_k = kx.ln();
    let mut failure = None;
    let integrand = |w: f64| -> f64 {
        let z = Complex64::new(damping, -w);
        match mgf.log_eval_along(z, &b) {
            Ok(lm) => {
                let log_num = (1.0 - z) * log_k + z * a + lm;
                (log_num.exp() / (z * (z - 1.0))).re
            }
            Err(e) => {
                failure.get_or_insert(e);
                0.0
            }
        }
    };
    let integral = swaption::oscillatory_or_plain(integrand, (a - log_k).abs(), quad)?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(curves_b * integral / std::f64::consts::PI)
}

/// `B(0, T_N)` recovered from any fitted row: `B(0,T_l) = B(0,T_N) M_0^{u_l}`
/// with `u_0` at `B(0,0) = 1`.
pub(crate) fn terminal_discount(model: &ModelParams) -> Result<f64> {
    Ok((-model.log_m0(&model.u_fine[0])?).exp())
}

/// `B(0, T_k^x)` implied by the fitted model.
pub fn model_discount(model: &ModelParams, x: TenorId, k: usize) -> Result<f64> {
    Ok(model.log_m0(model.u(x, k)?)?.exp() * terminal_discount(model)?)
}

/// `1 + delta L_k(0)` implied by the model.
fn libor_forward_factor(model: &ModelParams, x: TenorId, k: usize) -> Result<f64> {
    Ok((model.log_m0(model.v(x, k - 1)?)? - model.log_m0(model.u(x, k)?)?).exp())
}

/// Black76 implied volatility of a caplet price with OIS annuity `delta B(0,T_k)`.
pub fn caplet_implied_vol(model: &ModelParams, spec: &CapletSpec, price: f64) -> Result<f64> {
    let g = model.grid(spec.tenor)?;
    let fwd = (libor_forward_factor(model, spec.tenor, spec.k)? - 1.0) / g.delta;
    let annuity = g.delta * model_discount(model, spec.tenor, spec.k)?;
    black76_implied_vol(price, fwd, spec.strike, g.date(spec.k - 1), annuity)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::affine::{FactorSpec, ProcessSpec};
    use crate::curves::build_curveset;
    use crate::model::{fit_model, reference_model, FactorLayout, RateMode};

    #[test]
    fn rates_at_zero_match_curves() {
        let m = reference_model().unwrap();
        let (_, curves, _) = crate::model::reference_setup().unwrap();
        let x0 = m.spec.initial_state();
        for xi in 0..2 {
            let x = TenorId(xi);
            for k in 1..=curves.tenors[xi].grid.n_points {
                let f = ois_rate(&m, x, k, 0.0, &x0).unwrap();
                let l = libor_rate(&m, x, k, 0.0, &x0).unwrap();
                assert!((f - curves.ois_forward(x, k).unwrap()).abs() < 1e-10);
                assert!((l - curves.libor(x, k).unwrap()).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn deterministic_caplet_is_intrinsic() {
        let spec = ProcessSpec::new(vec![
            FactorSpec::cirj(0.5, 0.1, 1.53, 0.0, 0.0, 0.0),
            FactorSpec::cirj(9.4531, 0.0407, 0.0591, 0.0, 0.0, 0.0),
        ])
        .unwrap();
        let (ois, tenors) = crate::curves::example_curves();
        let curves = build_curveset(&ois, &tenors[..1], 0.25, 4.5, true).unwrap();
        let layout = FactorLayout::new(1, vec![curves.tenors[0].grid], 0.0, vec![0.0]).unwrap();
        let m = fit_model(&spec, &curves, &layout, RateMode::PositiveRates).unwrap();
        let x = TenorId(0);
        let l = curves.libor(x, 8).unwrap();
        let b = curves.tenor_discount(x, 8).unwrap();
        for strike in [0.5 * l, 0.9 * l] {
            let spec = CapletSpec { tenor: x, k: 8, strike, damping: None };
            let p = caplet_price(&m, &spec, &QuadConfig::default());
            // A degenerate law has a non-decaying transform; the integral
            // cannot converge, so the pricer must not return garbage.
            if let Ok(p) = p {
                assert!((p - 0.25 * b * (l - strike)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn damping_invariance() {
        let m = reference_model().unwrap();
        let quad = QuadConfig::default();
        let prices: Vec<f64> = [1.2, 1.5, 2.5]
            .iter()
            .map(|&r| {
                let s = CapletSpec { tenor: TenorId(0), k: 8, strike: 0.02, damping: Some(r) };
                caplet_price(&m, &s, &quad).unwrap()
            })
            .collect();
        for p in &prices {
            assert!((p / prices[1] - 1.0).abs() < 1e-9, "{prices:?}");
        }
    }

    #[test]
    fn caplet_minus_forward_is_decreasing_and_positive() {
        let m = reference_model().unwrap();
        let quad = QuadConfig::default();
        let x = TenorId(0);
        let b = model_discount(&m, x, 8).unwrap();
        let l = (libor_forward_factor(&m, x, 8).unwrap() - 1.0) / 0.25;
        let mut last = f64::INFINITY;
        for strike in [0.005, 0.01, 0.015, 0.02, 0.03] {
            let c = caplet_price(&m, &CapletSpec { tenor: x, k: 8, strike, damping: None }, &quad).unwrap();
            let floor = c - 0.25 * b * (l - strike);
            assert!(floor >= -1e-13, "{strike}: {floor}");
            assert!(c < last);
            last = c;
        }
    }
}
