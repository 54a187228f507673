//! Dormand–Prince 5(4) integration of the Riccati system, used as an
//! independent check on the closed forms.

use super::{ExpAffine, ProcessSpec};
use crate::error::{Error, Result};
use num_complex::Complex64;

const PSI_CEILING: f64 = 1e12;
const MAX_STEPS: usize = 2_000_000;

// Butcher tableau; the system is autonomous so the nodes are not needed.
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Right-hand side: state is `[phi, psi_1, ..., psi_d]`.
fn rhs(spec: &ProcessSpec, y: &[f64], out: &mut [f64]) -> Result<()> {
    out[0] = 0.0;
    for (i, f) in spec.factors.iter().enumerate() {
        let psi = y[i + 1];
        if f.has_jumps() && 1.0 - f.mu * psi <= 0.0 {
            return Err(Error::Domain(format!("jump transform diverges for factor {i}")));
        }
        let z = Complex64::new(psi, 0.0);
        out[0] += f.riccati_f(z).re;
        out[i + 1] = f.riccati_r(z).re;
    }
    Ok(())
}

/// Integrates `d phi/dt = F(psi)`, `d psi/dt = R(psi)` from `(0, u)` to `t`
/// with relative and absolute error control `tol`.
pub fn phi_psi_ode(spec: &ProcessSpec, t: f64, u: &[f64], tol: f64) -> Result<ExpAffine> {
    if u.len() != spec.dim() {
        return Err(Error::InvalidParameter("argument length differs from dimension".into()));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter("tolerance must be positive".into()));
    }
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::Domain(format!("horizon {t} must be finite and >= 0")));
    }
    let n = spec.dim() + 1;
    let mut y = Vec::with_capacity(n);
    y.push(0.0);
    y.extend_from_slice(u);
    if t == 0.0 {
        return Ok(ExpAffine { phi: 0.0, psi: u.to_vec() });
    }

    let mut k = vec![vec![0.0; n]; 7];
    let mut tmp = vec![0.0; n];
    let mut y5 = vec![0.0; n];
    let mut s = 0.0;
    let mut h = (t * 1e-3).min(0.01 * t.max(1.0));
    rhs(spec, &y, &mut k[0])?;
    let min_step = 1e-14 * t;

    for _ in 0..MAX_STEPS {
        if s >= t {
            break;
        }
        h = h.min(t - s);
        let mut stage_err = None;
        for st in 1..7 {
            for j in 0..n {
                let mut acc = y[j];
                for (m, km) in k.iter().enumerate().take(st) {
                    acc += h * A[st][m] * km[j];
                }
                tmp[j] = acc;
            }
            let (_, tail) = k.split_at_mut(st);
            if let Err(e) = rhs(spec, &tmp, &mut tail[0]) {
                stage_err = Some(e);
                break;
            }
        }
        let mut err = 0.0f64;
        if stage_err.is_none() {
            for j in 0..n {
                let mut hi = y[j];
                let mut lo = y[j];
                for st in 0..7 {
                    hi += h * B5[st] * k[st][j];
                    lo += h * B4[st] * k[st][j];
                }
                y5[j] = hi;
                let scale = tol * (1.0 + y[j].abs().max(hi.abs()));
                err = err.max(((hi - lo) / scale).abs());
            }
        }
        if stage_err.is_some() || !err.is_finite() || err > 1.0 {
            let factor = if err.is_finite() && stage_err.is_none() {
                (0.9 * err.powf(-0.2)).clamp(0.1, 0.5)
            } else {
                0.25
            };
            h *= factor;
            if h < min_step {
                return Err(Error::Domain(format!(
                    "Riccati solution blows up before horizon {t} (step collapse at {s})"
                )));
            }
            continue;
        }
        s += h;
        y.copy_from_slice(&y5);
        if y[1..].iter().any(|v| v.abs() > PSI_CEILING) {
            return Err(Error::Domain(format!("Riccati solution exceeds {PSI_CEILING:e} at {s}")));
        }
        // FSAL: last stage is the derivative at the new point.
        let last = k[6].clone();
        k[0].copy_from_slice(&last);
        let grow = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h *= grow;
    }
    if s < t {
        return Err(Error::Domain("Riccati integration did not finish".into()));
    }
    Ok(ExpAffine { phi: y[0], psi: y[1..].to_vec() })
}
