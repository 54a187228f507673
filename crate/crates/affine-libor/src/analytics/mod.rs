//! Volatility structures and instantaneous correlations for diffusion
//! drivers, and terminal correlations from moment generating functions.

use serde::{Deserialize, Serialize};

use crate::affine::FactorKind;
use crate::curves::TenorId;
use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::montecarlo::{simulate_paths, McEstimate, SimConfig};
use crate::pricing::dot;

/// Rate identified by its tenor and period index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RateIndex {
    pub tenor: TenorId,
    pub k: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolStructure {
    /// OIS volatility `Gamma_{x,k}(t)`.
    pub gamma: Vec<f64>,
    /// LIBOR volatility `Lambda_{x,k}(t)`.
    pub lambda_vec: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CorrelationKind {
    Instantaneous,
    Terminal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub value: f64,
    pub kind: CorrelationKind,
    pub first: RateIndex,
    pub second: RateIndex,
    pub date: f64,
}

fn require_diffusion(model: &ModelParams) -> Result<()> {
    if model.spec.has_jumps() {
        return Err(Error::UnsupportedDriver(
            "volatility structures are only defined for diffusion drivers".into(),
        ));
    }
    Ok(())
}

/// Per-factor diffusion loading `sqrt(X^i) |sigma_i|` (CIR) or `|sigma_i|` (OU).
fn loadings(model: &ModelParams, state: &[f64]) -> Result<Vec<f64>> {
    if state.len() != model.spec.dim() {
        return Err(Error::InvalidParameter("state length differs from the driver dimension".into()));
    }
    Ok(model
        .spec
        .factors
        .iter()
        .zip(state)
        .map(|(f, &x)| match f.kind {
            FactorKind::Cirj => 2.0 * f.eta * x.max(0.0).sqrt(),
            FactorKind::Ou => f.eta,
        })
        .collect())
}

fn psi_at(model: &ModelParams, t: f64, w: &[f64]) -> Result<Vec<f64>> {
    Ok(model.spec.phi_psi(model.terminal - t, w)?.psi)
}

/// `Upsilon_t(w, y)`: componentwise `(psi(w) - psi(y)) sqrt(X^i) sigma_i`.
pub fn upsilon(model: &ModelParams, w: &[f64], y: &[f64], t: f64, state: &[f64]) -> Result<Vec<f64>> {
    require_diffusion(model)?;
    let load = loadings(model, state)?;
    let pw = psi_at(model, t, w)?;
    let py = psi_at(model, t, y)?;
    Ok(pw.iter().zip(&py).zip(&load).map(|((a, b), s)| (a - b) * s).collect())
}

/// `Gamma_{x,k}(t)` and `Lambda_{x,k}(t)` at `state`.
pub fn vol_structures(model: &ModelParams, x: TenorId, k: usize, t: f64, state: &[f64]) -> Result<VolStructure> {
    require_diffusion(model)?;
    let g = model.grid(x)?;
    let d = g.delta;
    let f = crate::pricing::ois_rate(model, x, k, t, state)?;
    let l = crate::pricing::libor_rate(model, x, k, t, state)?;
    let u_prev = model.u(x, k - 1)?;
    let u_k = model.u(x, k)?;
    let v_prev = model.v(x, k - 1)?;
    let scale = |r: f64| if r == 0.0 { 0.0 } else { (1.0 + d * r) / (d * r) };
    let gamma = upsilon(model, u_prev, u_k, t, state)?.into_iter().map(|c| scale(f) * c).collect();
    let lambda_vec = upsilon(model, v_prev, u_k, t, state)?.into_iter().map(|c| scale(l) * c).collect();
    Ok(VolStructure { gamma, lambda_vec })
}

/// Instantaneous correlation of `L_k^x` and `L_l^x` at `state`.
pub fn inst_correlation(model: &ModelParams, x: TenorId, k: usize, l: usize, t: f64, state: &[f64]) -> Result<CorrelationReport> {
    require_diffusion(model)?;
    let load = loadings(model, state)?;
    let diff = |j: usize| -> Result<Vec<f64>> {
        let pv = psi_at(model, t, model.v(x, j - 1)?)?;
        let pu = psi_at(model, t, model.u(x, j)?)?;
        Ok(pv.iter().zip(&pu).map(|(a, b)| a - b).collect())
    };
    let a = diff(k)?;
    let b = diff(l)?;
    let w: Vec<f64> = load.iter().map(|s| s * s).collect();
    let inner = |p: &[f64], q: &[f64]| -> f64 { p.iter().zip(q).zip(&w).map(|((p, q), w)| p * q * w).sum() };
    let (aa, bb) = (inner(&a, &a), inner(&b, &b));
    if aa <= 0.0 || bb <= 0.0 {
        return Err(Error::Degenerate("a rate has zero instantaneous volatility".into()));
    }
    let value = if k == l { 1.0 } else { inner(&a, &b) / (aa.sqrt() * bb.sqrt()) };
    Ok(CorrelationReport {
        value,
        kind: CorrelationKind::Instantaneous,
        first: RateIndex { tenor: x, k },
        second: RateIndex { tenor: x, k: l },
        date: t,
    })
}

/// `(Phi, Psi)` with `1 + delta L_k^x(t) = exp(Phi + <Psi, X_t>)`.
pub fn libor_exponent(model: &ModelParams, r: RateIndex, t: f64) -> Result<(f64, Vec<f64>)> {
    let g = model.grid(r.tenor)?;
    if r.k == 0 || r.k > g.n_points {
        return Err(Error::Index(format!("period {} outside 1..={}", r.k, g.n_points)));
    }
    if t > g.date(r.k - 1) + 1e-12 {
        return Err(Error::Domain(format!("date {t} after the fixing date {}", g.date(r.k - 1))));
    }
    let h = model.terminal - t;
    let ev = model.spec.phi_psi(h, model.v(r.tenor, r.k - 1)?)?;
    let eu = model.spec.phi_psi(h, model.u(r.tenor, r.k)?)?;
    Ok((ev.phi - eu.phi, ev.psi.iter().zip(&eu.psi).map(|(a, b)| a - b).collect()))
}

/// Correlation at date `t` of two LIBOR rates under the terminal measure:
/// `(Theta(P1 + P2) - Theta(P1) Theta(P2)) / sqrt(...)`, evaluated through
/// `expm1` of log-MGF differences.
pub fn terminal_correlation(model: &ModelParams, a: RateIndex, b: RateIndex, t: f64) -> Result<CorrelationReport> {
    // Fixed evaluation order keeps the result exactly symmetric.
    let (lo, hi) = (a.min(b), a.max(b));
    let (_, pa) = libor_exponent(model, lo, t)?;
    let (_, pb) = libor_exponent(model, hi, t)?;
    let x0 = model.spec.initial_state();
    let log_theta = |w: &[f64]| -> Result<f64> {
        let check = model.spec.validate_domain(w, t);
        if !check.admissible {
            return Err(Error::Domain(format!("argument {w:?} leaves the moment domain at {t}")));
        }
        model.spec.log_mgf(t, w, &x0)
    };
    let double = |p: &[f64]| p.iter().map(|v| 2.0 * v).collect::<Vec<_>>();
    let sum: Vec<f64> = pa.iter().zip(&pb).map(|(p, q)| p + q).collect();
    let (la, lb) = (log_theta(&pa)?, log_theta(&pb)?);
    let var_a = (log_theta(&double(&pa))? - 2.0 * la).exp_m1();
    let var_b = (log_theta(&double(&pb))? - 2.0 * lb).exp_m1();
    if var_a <= 0.0 || var_b <= 0.0 {
        return Err(Error::Degenerate("a rate is deterministic at the correlation date".into()));
    }
    let value = if a == b {
        1.0
    } else {
        let cov = (log_theta(&sum)? - (la + lb)).exp_m1();
        (cov / (var_a.sqrt() * var_b.sqrt())).clamp(-1.0, 1.0)
    };
    Ok(CorrelationReport { value, kind: CorrelationKind::Terminal, first: a, second: b, date: t })
}

/// Sample correlation of two simulated LIBOR rates at `t`, with a standard
/// error from the spread of correlations over contiguous batches of paths.
pub fn mc_terminal_correlation(
    model: &ModelParams,
    a: RateIndex,
    b: RateIndex,
    t: f64,
    cfg: &SimConfig,
) -> Result<McEstimate> {
    const BATCHES: usize = 20;
    let (fa, pa) = libor_exponent(model, a, t)?;
    let (fb, pb) = libor_exponent(model, b, t)?;
    if cfg.paths < 2 * BATCHES {
        return Err(Error::Config(format!("at least {} paths are needed", 2 * BATCHES)));
    }
    let paths = simulate_paths(&model.spec, &[t], cfg)?;
    let pairs: Vec<(f64, f64)> = paths
        .iter()
        .map(|p| ((fa + dot(&pa, &p[0])).exp(), (fb + dot(&pb, &p[0])).exp()))
        .collect();
    let total = sample_correlation(&pairs)?;
    let size = pairs.len() / BATCHES;
    let batch: Vec<f64> = pairs.chunks_exact(size).take(BATCHES).map(sample_correlation).collect::<Result<_>>()?;
    let mean = batch.iter().sum::<f64>() / BATCHES as f64;
    let var = batch.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (BATCHES - 1) as f64;
    Ok(McEstimate { mean: total, std_error: (var / BATCHES as f64).sqrt(), paths_used: pairs.len() })
}

fn sample_correlation(pairs: &[(f64, f64)]) -> Result<f64> {
    let n = pairs.len() as f64;
    let (ma, mb) = pairs.iter().fold((0.0, 0.0), |(x, y), (a, b)| (x + a / n, y + b / n));
    let (mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0);
    for (a, b) in pairs {
        let (da, db) = (a - ma, b - mb);
        saa += da * da;
        sbb += db * db;
        sab += da * db;
    }
    if saa <= 0.0 || sbb <= 0.0 {
        return Err(Error::Degenerate("simulated rate has zero variance".into()));
    }
    Ok(sab / (saa.sqrt() * sbb.sqrt()))
}
