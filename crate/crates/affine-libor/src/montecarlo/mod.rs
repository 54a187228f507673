//! Monte Carlo simulation of the driver under the terminal measure and
//! estimators for caplets, swaptions and martingale checks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Gamma, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::affine::{FactorKind, FactorSpec, ProcessSpec};
use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::pricing::{
    basis_exercise_fn, swaption_exercise_fn, terminal_discount, BasisSwaptionSpec, BoundaryCoeffs, CapletSpec,
    ExerciseFn, SwaptionSpec,
};

/// Paths per parallel work unit; fixed so results do not depend on the
/// thread count.
const CHUNK: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Exact transition laws (noncentral chi-square, Gaussian) with jumps
    /// inserted at their arrival times.
    #[serde(rename = "exact-cir")]
    Exact,
    /// Euler steps with the square root taken of the positive part and the
    /// state floored at zero.
    EulerTruncated,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub paths: usize,
    pub steps_per_year: usize,
    pub seed: u64,
    pub scheme: Scheme,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self { paths: 100_000, steps_per_year: 10, seed: 1, scheme: Scheme::Exact }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.paths == 0 {
            return Err(Error::Config("at least one path is needed".into()));
        }
        if self.steps_per_year == 0 {
            return Err(Error::Config("steps per year must be positive".into()));
        }
        Ok(())
    }
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub paths_used: usize,
}

impl McEstimate {
    /// Whether `value` lies within `k` standard errors.
    pub fn contains(&self, value: f64, k: f64) -> bool {
        (self.mean - value).abs() <= k * self.std_error
    }
}

/// Running mean and centered second moment, mergeable across chunks.
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: f64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1.0;
        let d = x - self.mean;
        self.mean += d / self.n;
        self.m2 += d * (x - self.mean);
    }

    fn merge(&mut self, o: &Moments) {
        if o.n == 0.0 {
            return;
        }
        let n = self.n + o.n;
        let d = o.mean - self.mean;
        self.mean += d * o.n / n;
        self.m2 += o.m2 + d * d * self.n * o.n / n;
        self.n = n;
    }

    fn estimate(&self) -> McEstimate {
        // A single path has no error estimate.
        let var = if self.n > 1.0 { self.m2 / (self.n - 1.0) } else { f64::NAN };
        McEstimate { mean: self.mean, std_error: (var / self.n).sqrt(), paths_used: self.n as usize }
    }
}

/// Generator for `(seed, factor)` positioned on the stream of `path`.
fn factor_rng(seed: u64, factor: usize, path: usize) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&(factor as u64).to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(path as u64);
    rng
}

/// Exact CIR transition over `h` without jumps:
/// `c * chi'^2_d(x e^{-lambda h} / c)` with `sigma = 2 eta`.
fn cir_exact(f: &FactorSpec, x: f64, h: f64, rng: &mut ChaCha8Rng) -> f64 {
    let sigma2 = 4.0 * f.eta * f.eta;
    if sigma2 == 0.0 {
        let decay = (-f.lambda * h).exp();
        return f.theta + (x - f.theta) * decay;
    }
    let c = sigma2 * crate::numeric::decay_integral(f.lambda, h) / 4.0;
    let d = 4.0 * f.lambda * f.theta / sigma2;
    let nc = x.max(0.0) * (-f.lambda * h).exp() / c;
    let n = if nc > 0.0 {
        Poisson::new(0.5 * nc).map(|p| p.sample(rng)).unwrap_or(0.0)
    } else {
        0.0
    };
    let shape = 0.5 * d + n;
    if shape <= 0.0 {
        return 0.0;
    }
    let g: f64 = Gamma::new(shape, 2.0).expect("positive gamma shape").sample(rng);
    c * g
}

fn ou_exact(f: &FactorSpec, x: f64, h: f64, rng: &mut ChaCha8Rng) -> f64 {
    let decay = (-f.lambda * h).exp();
    let sd = f.eta * crate::numeric::decay_integral(2.0 * f.lambda, h).sqrt();
    let z: f64 = StandardNormal.sample(rng);
    f.theta + (x - f.theta) * decay + sd * z
}

fn euler(f: &FactorSpec, x: f64, h: f64, rng: &mut ChaCha8Rng) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    let drift = f.lambda * (f.theta - x) * h;
    match f.kind {
        FactorKind::Ou => x + drift + f.eta * h.sqrt() * z,
        FactorKind::Cirj => (x + drift + 2.0 * f.eta * (x.max(0.0) * h).sqrt() * z).max(0.0),
    }
}

/// Advances one factor by `h`, including compound Poisson jumps with
/// exponential marks inserted at their arrival times.
fn step_factor(f: &FactorSpec, x: f64, h: f64, scheme: Scheme, rng: &mut ChaCha8Rng) -> f64 {
    let diffuse = |x: f64, dt: f64, rng: &mut ChaCha8Rng| -> f64 {
        if dt <= 0.0 {
            return x;
        }
        match (scheme, f.kind) {
            (Scheme::Exact, FactorKind::Cirj) => cir_exact(f, x, dt, rng),
            (Scheme::Exact, FactorKind::Ou) => ou_exact(f, x, dt, rng),
            (Scheme::EulerTruncated, _) => euler(f, x, dt, rng),
        }
    };
    if !f.has_jumps() {
        return diffuse(x, h, rng);
    }
    let arrivals = Exp::new(f.nu).expect("positive intensity");
    let marks = Exp::new(1.0 / f.mu).expect("positive mark mean");
    let (mut x, mut elapsed) = (x, 0.0);
    loop {
        let wait: f64 = arrivals.sample(rng);
        if elapsed + wait >= h {
            return diffuse(x, h - elapsed, rng);
        }
        x = diffuse(x, wait, rng);
        x += marks.sample(rng);
        elapsed += wait;
    }
}

/// Simulation dates: uniform steps merged with the requested times.
fn time_grid(times: &[f64], steps_per_year: usize) -> Result<Vec<f64>> {
    let last = times.iter().cloned().fold(0.0, f64::max);
    if times.iter().any(|&t| !(t >= 0.0) || !t.is_finite()) {
        return Err(Error::Config("observation times must be finite and non-negative".into()));
    }
    let n = (last * steps_per_year as f64).ceil() as usize;
    let mut grid: Vec<f64> = (0..=n).map(|i| (i as f64 / steps_per_year as f64).min(last)).collect();
    grid.extend_from_slice(times);
    grid.sort_by(f64::total_cmp);
    grid.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    Ok(grid)
}

/// States of one path at each of `times` (sorted ascending).
fn simulate_path(spec: &ProcessSpec, grid: &[f64], times: &[f64], cfg: &SimConfig, path: usize) -> Vec<Vec<f64>> {
    let d = spec.dim();
    let mut out = vec![vec![0.0; d]; times.len()];
    for (j, f) in spec.factors.iter().enumerate() {
        let mut rng = factor_rng(cfg.seed, j, path);
        let mut x = f.x0;
        let mut ti = 0;
        let mut prev = 0.0;
        for &t in grid {
            x = step_factor(f, x, t - prev, cfg.scheme, &mut rng);
            prev = t;
            while ti < times.len() && (times[ti] - t).abs() < 1e-12 {
                out[ti][j] = x;
                ti += 1;
            }
        }
    }
    out
}

fn check_sorted(times: &[f64]) -> Result<()> {
    if times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Config("observation times must be ascending".into()));
    }
    Ok(())
}

/// All simulated paths observed at `times`: `paths[path][time][factor]`.
pub fn simulate_paths(spec: &ProcessSpec, times: &[f64], cfg: &SimConfig) -> Result<Vec<Vec<Vec<f64>>>> {
    spec.validate()?;
    cfg.validate()?;
    check_sorted(times)?;
    let grid = time_grid(times, cfg.steps_per_year)?;
    Ok((0..cfg.paths).into_par_iter().map(|p| simulate_path(spec, &grid, times, cfg, p)).collect())
}

/// Independent exact samples of `X_t` (one step per sample).
pub fn sample_states(spec: &ProcessSpec, t: f64, n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let cfg = SimConfig { paths: n.max(1), steps_per_year: 1, seed, scheme: Scheme::Exact };
    let grid = [t];
    let mut out: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|p| simulate_path(spec, &grid, &grid, &cfg, p).pop().expect("one observation"))
        .collect();
    out.truncate(n);
    Ok(out)
}

/// Means of `n_out` path functionals of the states at `times`. Paths are
/// split into fixed chunks and merged in order, so the result depends only
/// on the configuration.
pub fn estimate<F>(spec: &ProcessSpec, times: &[f64], cfg: &SimConfig, n_out: usize, payoff: F) -> Result<Vec<McEstimate>>
where
    F: Fn(&[Vec<f64>], &mut [f64]) + Sync,
{
    spec.validate()?;
    cfg.validate()?;
    check_sorted(times)?;
    let grid = time_grid(times, cfg.steps_per_year)?;
    let chunks = cfg.paths.div_ceil(CHUNK);
    let parts: Vec<Vec<Moments>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = vec![Moments::default(); n_out];
            let mut buf = vec![0.0; n_out];
            for p in c * CHUNK..((c + 1) * CHUNK).min(cfg.paths) {
                let states = simulate_path(spec, &grid, times, cfg, p);
                payoff(&states, &mut buf);
                for (a, &v) in acc.iter_mut().zip(&buf) {
                    a.push(v);
                }
            }
            acc
        })
        .collect();
    let mut total = vec![Moments::default(); n_out];
    for part in &parts {
        for (t, p) in total.iter_mut().zip(part) {
            t.merge(p);
        }
    }
    Ok(total.iter().map(Moments::estimate).collect())
}

/// Caplet price `B(0,T_N) E_N[(M^{v_{k-1}} - (1 + delta K) M^{u_k})^+]` at `T_{k-1}`.
pub fn mc_caplet(model: &ModelParams, spec: &CapletSpec, cfg: &SimConfig) -> Result<McEstimate> {
    let g = model.grid(spec.tenor)?;
    if spec.k == 0 || spec.k > g.n_points {
        return Err(Error::Index(format!("caplet period {} outside 1..={}", spec.k, g.n_points)));
    }
    let kx = 1.0 + g.delta * spec.strike;
    let ef = ExerciseFn::new(
        model,
        g.date(spec.k - 1),
        vec![(1.0, model.v(spec.tenor, spec.k - 1)?), (-kx, model.u(spec.tenor, spec.k)?)],
    )?;
    let tn = terminal_discount(model)?;
    let est = estimate(&model.spec, &[ef.expiry], cfg, 1, |s, out| {
        out[0] = tn * ef.eval(&s[0]).max(0.0);
    })?;
    Ok(est[0])
}

/// Prices of an option with exercise function `ef` under the exact boundary
/// and, on the same paths, a linear boundary, plus their paired difference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExerciseMc {
    pub exact: McEstimate,
    pub linear: Option<McEstimate>,
    /// `exact - linear` path by path.
    pub difference: Option<McEstimate>,
}

pub fn mc_exercise(
    model: &ModelParams,
    ef: &ExerciseFn,
    boundary: Option<&BoundaryCoeffs>,
    cfg: &SimConfig,
) -> Result<ExerciseMc> {
    let tn = terminal_discount(model)?;
    let n_out = if boundary.is_some() { 3 } else { 1 };
    let est = estimate(&model.spec, &[ef.expiry], cfg, n_out, |s, out| {
        let v = tn * ef.eval(&s[0]);
        out[0] = v.max(0.0);
        if let Some(b) = boundary {
            out[1] = if b.eval(&s[0]) >= 0.0 { v } else { 0.0 };
            out[2] = out[0] - out[1];
        }
    })?;
    Ok(ExerciseMc { exact: est[0], linear: boundary.map(|_| est[1]), difference: boundary.map(|_| est[2]) })
}

pub fn mc_swaption(
    model: &ModelParams,
    spec: &SwaptionSpec,
    boundary: Option<&BoundaryCoeffs>,
    cfg: &SimConfig,
) -> Result<ExerciseMc> {
    let ef = swaption_exercise_fn(model, spec.tenor, spec.p, spec.q, spec.strike)?;
    mc_exercise(model, &ef, boundary, cfg)
}

pub fn mc_basis_swaption(
    model: &ModelParams,
    spec: &BasisSwaptionSpec,
    boundary: Option<&BoundaryCoeffs>,
    cfg: &SimConfig,
) -> Result<ExerciseMc> {
    let ef = basis_exercise_fn(model, &spec.legs, spec.spread)?;
    mc_exercise(model, &ef, boundary, cfg)
}

/// `E_N[M_t^{w}]` for each row `w`; equals `M_0^{w}` for a martingale.
pub fn mc_martingale(model: &ModelParams, rows: &[Vec<f64>], t: f64, cfg: &SimConfig) -> Result<Vec<McEstimate>> {
    for r in rows {
        if r.len() != model.spec.dim() {
            return Err(Error::InvalidParameter("row length differs from the driver dimension".into()));
        }
    }
    let spec = &model.spec;
    let terminal = model.terminal;
    let exps = rows
        .iter()
        .map(|r| spec.phi_psi(terminal - t, r))
        .collect::<Result<Vec<_>>>()?;
    estimate(spec, &[t], cfg, rows.len(), |s, out| {
        for (o, e) in out.iter_mut().zip(&exps) {
            *o = (e.phi + e.psi.iter().zip(&s[0]).map(|(a, b)| a * b).sum::<f64>()).exp();
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cir() -> FactorSpec {
        FactorSpec::cirj(0.5, 0.1, 1.53, 0.266, 0.0, 0.0)
    }

    fn cirj() -> FactorSpec {
        FactorSpec::cirj(9.4531, 0.0407, 0.0591, 0.4640, 0.0074, 0.2499)
    }

    #[test]
    fn exact_moments_match_closed_form() {
        for f in [cir(), cirj(), FactorSpec::ou(0.1, 0.8, -0.2, 0.3)] {
            let spec = ProcessSpec::new(vec![f.clone()]).unwrap();
            let cfg = SimConfig { paths: 200_000, steps_per_year: 2, seed: 7, scheme: Scheme::Exact };
            let est = estimate(&spec, &[2.0], &cfg, 1, |s, o| o[0] = s[0][0]).unwrap();
            let (m, _) = f.moments(2.0);
            assert!(est[0].contains(m, 4.0), "{f:?} {est:?} {m}");
        }
    }

    #[test]
    fn results_do_not_depend_on_thread_count() {
        let spec = ProcessSpec::new(vec![cir(), cirj()]).unwrap();
        let cfg = SimConfig { paths: 5000, ..Default::default() };
        let run = || estimate(&spec, &[1.0, 2.0], &cfg, 1, |s, o| o[0] = s[1][0] * s[0][1]).unwrap();
        let a = run();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(run);
        assert_eq!(a, b);
    }

    #[test]
    fn cir_stays_non_negative() {
        let spec = ProcessSpec::new(vec![cirj()]).unwrap();
        for scheme in [Scheme::Exact, Scheme::EulerTruncated] {
            let cfg = SimConfig { paths: 2000, steps_per_year: 50, seed: 3, scheme };
            let times: Vec<f64> = (1..=10).map(|i| i as f64 * 0.45).collect();
            let paths = simulate_paths(&spec, &times, &cfg).unwrap();
            assert!(paths.iter().flatten().all(|s| s[0] >= 0.0));
        }
    }

    #[test]
    fn moment_pooling_is_exact() {
        let mut a = Moments::default();
        let mut b = Moments::default();
        let mut all = Moments::default();
        for i in 0..100 {
            let x = (i as f64 * 0.37).sin();
            if i < 40 { a.push(x) } else { b.push(x) }
            all.push(x);
        }
        a.merge(&b);
        assert!((a.mean - all.mean).abs() < 1e-15 && (a.m2 - all.m2).abs() < 1e-12);
    }
}
