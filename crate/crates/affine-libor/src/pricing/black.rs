//! Black76 prices on a forward with an explicit discounting annuity, and
//! the implied-volatility inverse.

use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::error::{Error, Result};

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

/// `annuity * (F N(d1) - K N(d2))`.
pub fn black76_call(forward: f64, strike: f64, vol: f64, expiry: f64, annuity: f64) -> f64 {
    let intrinsic = (forward - strike).max(0.0);
    let sd = vol * expiry.max(0.0).sqrt();
    if sd <= 0.0 || strike <= 0.0 {
        return annuity * intrinsic;
    }
    let n = std_normal();
    let d1 = ((forward / strike).ln() + 0.5 * sd * sd) / sd;
    let d2 = d1 - sd;
    annuity * (forward * n.cdf(d1) - strike * n.cdf(d2))
}

/// `d price / d vol`.
pub fn black76_vega(forward: f64, strike: f64, vol: f64, expiry: f64, annuity: f64) -> f64 {
    let sd = vol * expiry.sqrt();
    if sd <= 0.0 || strike <= 0.0 {
        return 0.0;
    }
    let d1 = ((forward / strike).ln() + 0.5 * sd * sd) / sd;
    annuity * forward * std_normal().pdf(d1) * expiry.sqrt()
}

/// Volatility reproducing `price` under Black76 with the given annuity.
/// Newton steps are kept inside a shrinking bisection bracket.
pub fn black76_implied_vol(price: f64, forward: f64, strike: f64, expiry: f64, annuity: f64) -> Result<f64> {
    if !(forward > 0.0 && strike > 0.0 && expiry > 0.0 && annuity > 0.0) {
        return Err(Error::Bounds(format!(
            "Black76 needs positive forward, strike, expiry and annuity (F={forward}, K={strike})"
        )));
    }
    let intrinsic = annuity * (forward - strike).max(0.0);
    let upper = annuity * forward;
    let slack = 1e-14 * upper;
    if !(price >= intrinsic - slack && price < upper) {
        return Err(Error::Bounds(format!(
            "price {price:e} outside [{intrinsic:e}, {upper:e})"
        )));
    }
    if price <= intrinsic {
        return Ok(0.0);
    }
    let f = |s: f64| black76_call(forward, strike, s, expiry, annuity) - price;
    let (mut lo, mut hi) = (0.0, 1.0);
    while f(hi) < 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi > 1e4 {
            return Err(Error::Bounds("implied volatility above 1e4".into()));
        }
    }
    let mut s = 0.5 * (lo + hi);
    for _ in 0..200 {
        let v = f(s);
        if v == 0.0 {
            return Ok(s);
        }
        if v > 0.0 {
            hi = s;
        } else {
            lo = s;
        }
        let vega = black76_vega(forward, strike, s, expiry, annuity);
        let mut next = if vega > 0.0 { s - v / vega } else { f64::NAN };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - s).abs() <= 1e-15 * (1.0 + s) || hi - lo <= 1e-15 * (1.0 + s) {
            return Ok(next);
        }
        s = next;
    }
    Ok(s)
}
