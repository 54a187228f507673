//! Two-factor variant with a real-valued first factor (negative OIS rates)
//! and a non-negative second factor carrying the multiplicative spreads.

use crate::affine::{FactorKind, ProcessSpec};
use crate::curves::{CurveSet, TenorId};
use crate::error::{Error, Result};

use super::{fit_u_sequence, fit_v_sequence, Coord, ModelParams, RateMode, RowPlan, TenorParams};

/// Fits the negative-rates model.
///
/// Step 1 solves the first coordinate of every `u_l` with the second held at
/// `spread_level` (zero on the last row). Step 2 copies the first coordinate
/// of `u_k^x` into `v_k^x` and solves the second, so that
/// `1 + delta R_k = M^{v_{k-1}} / M^{u_{k-1}}` only involves the second factor.
pub fn build_negative_rate_model(
    spec: &ProcessSpec,
    curves: &CurveSet,
    spread_level: f64,
) -> Result<ModelParams> {
    spec.validate()?;
    if spec.dim() != 2 || spec.factors[0].kind != FactorKind::Ou || spec.factors[1].kind != FactorKind::Cirj {
        return Err(Error::InvalidParameter(
            "negative-rates model needs an OU first factor and a CIRJ second factor".into(),
        ));
    }
    if spread_level < 0.0 {
        return Err(Error::InvalidParameter("second coordinate of u must be non-negative".into()));
    }
    for (xi, t) in curves.tenors.iter().enumerate() {
        for k in 1..=t.grid.n_points {
            let r = curves.multiplicative_spread(TenorId(xi), k)?;
            if r < 0.0 {
                return Err(Error::SpreadSign { index: k, value: r });
            }
        }
    }
    let n = curves.n_fine();
    let plans: Vec<RowPlan> = (0..=n)
        .map(|l| {
            if l == n {
                RowPlan::Coords(vec![Coord::Fixed(0.0), Coord::Fixed(0.0)])
            } else {
                RowPlan::Coords(vec![Coord::Solve, Coord::Fixed(spread_level)])
            }
        })
        .collect();
    let u_fine = fit_u_sequence(spec, curves, &plans, RateMode::NegativeRates)?;
    let mut tenors = Vec::with_capacity(curves.tenors.len());
    for (xi, t) in curves.tenors.iter().enumerate() {
        let vplans: Vec<RowPlan> = (0..=t.grid.n_points)
            .map(|k| {
                let u_k = &u_fine[t.grid.map_to_fine(k)];
                if k == t.grid.n_points {
                    RowPlan::Coords(vec![Coord::Fixed(0.0), Coord::Fixed(0.0)])
                } else {
                    RowPlan::Coords(vec![Coord::Fixed(u_k[0]), Coord::Solve])
                }
            })
            .collect();
        let mut v = fit_v_sequence(spec, curves, &u_fine, TenorId(xi), &vplans, RateMode::NegativeRates)?;
        // A vanishing spread means v = u exactly, not up to solver noise.
        for k in 0..t.grid.n_points {
            if curves.multiplicative_spread(TenorId(xi), k + 1)? * t.grid.delta < 1e-15 {
                v[k] = u_fine[t.grid.map_to_fine(k)].clone();
            }
        }
        for (k, row) in v.iter().enumerate().take(t.grid.n_points) {
            let u_k = &u_fine[t.grid.map_to_fine(k)];
            if row[1] < u_k[1] - 1e-14 {
                return Err(Error::Ordering {
                    index: k,
                    reason: "spread coordinate of v fell below u".into(),
                });
            }
        }
        tenors.push(TenorParams { label: t.label.clone(), grid: t.grid, v });
    }
    Ok(ModelParams {
        spec: spec.clone(),
        terminal: curves.terminal,
        fine_step: curves.fine_step,
        u_fine,
        tenors,
        mode: RateMode::NegativeRates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::affine::FactorSpec;
    use crate::curves::{build_curveset, NelsonSiegelParams};

    fn spec() -> ProcessSpec {
        ProcessSpec::new(vec![
            FactorSpec::ou(1.0, 0.3, 1.0, 0.05),
            FactorSpec::cirj(0.02, 0.5, 0.02, 0.1, 0.0, 0.0),
        ])
        .unwrap()
    }

    #[test]
    fn zero_spreads_give_v_equal_u() {
        let ois = NelsonSiegelParams::new(-0.0025, 0.0, 0.0, 1.0).unwrap();
        let curves = build_curveset(&ois, &[("3m".into(), ois, 0.25)], 0.25, 3.0, false).unwrap();
        let m = build_negative_rate_model(&spec(), &curves, 0.0).unwrap();
        for k in 0..12 {
            let u = m.u(TenorId(0), k).unwrap();
            let v = m.v(TenorId(0), k).unwrap();
            assert_eq!(u[0], v[0]);
            assert_eq!(u, v);
        }
    }

    #[test]
    fn negative_curve_fits_with_unordered_first_coordinate() {
        let ois = NelsonSiegelParams::new(-0.0025, 0.0, 0.0, 1.0).unwrap();
        let l3 = NelsonSiegelParams::new(0.0005, 0.0, 0.0, 1.0).unwrap();
        let l6 = NelsonSiegelParams::new(0.0035, 0.0, 0.0, 1.0).unwrap();
        let curves =
            build_curveset(&ois, &[("3m".into(), l3, 0.25), ("6m".into(), l6, 0.5)], 0.25, 3.0, false).unwrap();
        let m = build_negative_rate_model(&spec(), &curves, 0.01).unwrap();
        assert!(m.u_fine[..12].iter().all(|r| r[0] < 0.0));
        for t in &m.tenors {
            for k in 0..t.grid.n_points {
                assert!(t.v[k][1] > 0.01);
            }
        }
    }

    #[test]
    fn negative_spread_is_rejected() {
        let ois = NelsonSiegelParams::new(0.01, 0.0, 0.0, 1.0).unwrap();
        let l3 = NelsonSiegelParams::new(0.005, 0.0, 0.0, 1.0).unwrap();
        let curves = build_curveset(&ois, &[("3m".into(), l3, 0.25)], 0.25, 3.0, false).unwrap();
        assert!(matches!(
            build_negative_rate_model(&spec(), &curves, 0.0),
            Err(Error::SpreadSign { .. })
        ));
    }
}
