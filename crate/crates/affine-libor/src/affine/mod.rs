//! Affine driving processes: Riccati exponents, admissible domains and the
//! moment generating functions used throughout the model.
//!
//! A factor follows either
//!
//! ```text
//! CIRJ: dX = -lambda (X - theta) dt + 2 eta sqrt(X) dW + dZ
//! OU:   dX = -lambda (X - theta) dt + sigma dW          (sigma stored in `eta`)
//! ```
//!
//! where `Z` is compound Poisson with intensity `nu` and exponential jumps of
//! mean `mu`. Factors are independent, so the joint exponents are assembled
//! componentwise:
//!
//! `E[exp(<u, X_t>)] = exp(phi_t(u) + <psi_t(u), x>)`.

pub mod ode;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{decay_integral, neg_log_ratio, neg_log_ratio_real};

pub use ode::phi_psi_ode;

/// Family of a single driving factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FactorKind {
    Cirj,
    Ou,
}

/// Parameters of one independent factor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FactorSpec {
    pub kind: FactorKind,
    pub x0: f64,
    pub lambda: f64,
    pub theta: f64,
    pub eta: f64,
    #[serde(default)]
    pub nu: f64,
    #[serde(default)]
    pub mu: f64,
}

/// Ordered list of mutually independent factors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ProcessSpec {
    pub factors: Vec<FactorSpec>,
}

/// Real exponents `(phi, psi)` of the conditional moment generating function.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpAffine {
    pub phi: f64,
    pub psi: Vec<f64>,
}

/// Complex counterpart of [`ExpAffine`].
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexExpAffine {
    pub phi: Complex64,
    pub psi: Vec<Complex64>,
}

/// Verdict of [`ProcessSpec::validate_domain`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DomainCheck {
    pub admissible: bool,
    /// Supremum of the scalings `s >= 0` for which `s * u` stays admissible.
    pub max_safe_scale: f64,
}

/// Classification of the fitting capacity of a driver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FittingCapacity {
    Infinite,
    Finite(f64),
}

impl FactorSpec {
    pub fn cirj(x0: f64, lambda: f64, theta: f64, eta: f64, nu: f64, mu: f64) -> Self {
        Self { kind: FactorKind::Cirj, x0, lambda, theta, eta, nu, mu }
    }

    /// Gaussian factor with constant volatility `sigma`.
    pub fn ou(x0: f64, lambda: f64, theta: f64, sigma: f64) -> Self {
        Self { kind: FactorKind::Ou, x0, lambda, theta, eta: sigma, nu: 0.0, mu: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [self.x0, self.lambda, self.theta, self.eta, self.nu, self.mu];
        if fields.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite factor parameter".into()));
        }
        if self.lambda < 0.0 || self.eta < 0.0 || self.nu < 0.0 || self.mu < 0.0 {
            return Err(Error::InvalidParameter(
                "lambda, eta, nu and mu must be non-negative".into(),
            ));
        }
        match self.kind {
            FactorKind::Cirj if self.x0 < 0.0 || self.theta < 0.0 => Err(Error::InvalidParameter(
                "a CIRJ factor needs x0 >= 0 and theta >= 0".into(),
            )),
            FactorKind::Ou if self.nu != 0.0 || self.mu != 0.0 => {
                Err(Error::InvalidParameter("an OU factor carries no jumps".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn has_jumps(&self) -> bool {
        self.kind == FactorKind::Cirj && self.nu > 0.0 && self.mu > 0.0
    }

    /// Quadratic coefficient of the Riccati function `R`.
    fn quad_coef(&self) -> f64 {
        match self.kind {
            FactorKind::Cirj => 2.0 * self.eta * self.eta,
            FactorKind::Ou => 0.0,
        }
    }

    /// `R(u)`, the right-hand side of `d psi / dt`.
    pub fn riccati_r(&self, u: Complex64) -> Complex64 {
        -self.lambda * u + self.quad_coef() * u * u
    }

    /// `F(u)`, the right-hand side of `d phi / dt`.
    pub fn riccati_f(&self, u: Complex64) -> Complex64 {
        let mut f = self.lambda * self.theta * u;
        match self.kind {
            FactorKind::Cirj => {
                if self.has_jumps() {
                    f += self.nu * self.mu * u / (1.0 - self.mu * u);
                }
            }
            FactorKind::Ou => f += 0.5 * self.eta * self.eta * u * u,
        }
        f
    }

    /// Supremum of the real arguments `u` admissible at horizon `t`
    /// (`+inf` when the factor has no upper restriction).
    pub fn critical_exponent(&self, t: f64) -> f64 {
        if self.kind == FactorKind::Ou {
            return f64::INFINITY;
        }
        let g = decay_integral(self.lambda, t);
        let ag = self.quad_coef() * g;
        let mut crit = if ag > 0.0 { 1.0 / ag } else { f64::INFINITY };
        if self.has_jumps() {
            // mu * psi_s(u) < 1 on [0, t]; the binding constraint sits at an endpoint.
            let worst = self.mu.max(self.mu * (-self.lambda * t).exp() + ag);
            crit = crit.min(1.0 / worst);
        }
        crit
    }

    fn check_arg(&self, t: f64, re_u: f64) -> Result<()> {
        if !(t >= 0.0) || !t.is_finite() {
            return Err(Error::Domain(format!("horizon {t} must be finite and >= 0")));
        }
        if !re_u.is_finite() {
            return Err(Error::Domain("non-finite argument".into()));
        }
        let crit = self.critical_exponent(t);
        if re_u >= crit {
            return Err(Error::Domain(format!(
                "argument {re_u} at horizon {t} reaches the explosion threshold {crit}"
            )));
        }
        Ok(())
    }

    /// Closed-form `(phi_t(u), psi_t(u))` for real `u`.
    pub fn exponents(&self, t: f64, u: f64) -> Result<(f64, f64)> {
        self.check_arg(t, u)?;
        Ok(self.exponents_unchecked(t, u))
    }

    pub(crate) fn exponents_unchecked(&self, t: f64, u: f64) -> (f64, f64) {
        if t == 0.0 || u == 0.0 {
            return (0.0, u);
        }
        let decay = (-self.lambda * t).exp();
        let g = decay_integral(self.lambda, t);
        match self.kind {
            FactorKind::Cirj => {
                let a = self.quad_coef();
                let aug = a * u * g;
                let psi = u * decay / (1.0 - aug);
                let mut phi = self.lambda * self.theta * u * g * neg_log_ratio_real(aug);
                if self.has_jumps() {
                    let m = 1.0 - self.mu * u;
                    let x = u * (a - self.mu * self.lambda) * g / m;
                    phi += self.nu * self.mu * u * g / m * neg_log_ratio_real(x);
                }
                (phi, psi)
            }
            FactorKind::Ou => {
                let g2 = decay_integral(2.0 * self.lambda, t);
                let phi = self.lambda * self.theta * u * g + 0.5 * self.eta * self.eta * u * u * g2;
                (phi, u * decay)
            }
        }
    }

    /// Closed-form exponents for complex `u`; admissibility depends on `Re u` only.
    pub fn exponents_complex(&self, t: f64, u: Complex64) -> Result<(Complex64, Complex64)> {
        self.check_arg(t, u.re)?;
        Ok(self.exponents_complex_unchecked(t, u))
    }

    pub(crate) fn exponents_complex_unchecked(&self, t: f64, u: Complex64) -> (Complex64, Complex64) {
        let zero = Complex64::new(0.0, 0.0);
        if t == 0.0 || u == zero {
            return (zero, u);
        }
        let decay = (-self.lambda * t).exp();
        let g = decay_integral(self.lambda, t);
        match self.kind {
            FactorKind::Cirj => {
                let a = self.quad_coef();
                let aug = a * g * u;
                let psi = u * decay / (1.0 - aug);
                let mut phi = self.lambda * self.theta * g * u * neg_log_ratio(aug);
                if self.has_jumps() {
                    let m = 1.0 - self.mu * u;
                    let x = u * ((a - self.mu * self.lambda) * g) / m;
                    phi += self.nu * self.mu * g * u / m * neg_log_ratio(x);
                }
                (phi, psi)
            }
            FactorKind::Ou => {
                let g2 = decay_integral(2.0 * self.lambda, t);
                let phi = self.lambda * self.theta * g * u + 0.5 * self.eta * self.eta * g2 * u * u;
                (phi, u * decay)
            }
        }
    }

    /// Mean and variance of `X_t` started at `x0`.
    pub fn moments(&self, t: f64) -> (f64, f64) {
        let decay = (-self.lambda * t).exp();
        let g = decay_integral(self.lambda, t);
        let g2 = decay_integral(2.0 * self.lambda, t);
        match self.kind {
            FactorKind::Ou => (
                self.theta + (self.x0 - self.theta) * decay,
                self.eta * self.eta * g2,
            ),
            FactorKind::Cirj => {
                let a = self.quad_coef();
                let mut mean = self.x0 * decay + self.lambda * self.theta * g;
                let mut var = 2.0 * a * g * decay * self.x0 + self.lambda * self.theta * a * g * g;
                if self.has_jumps() {
                    // int_0^t G_s e^{-lambda s} ds
                    let lt = self.lambda * t;
                    let cross = if lt.abs() < 1e-3 {
                        t * t * (0.5 - lt / 2.0 + 7.0 * lt * lt / 24.0)
                    } else {
                        (g - g2) / self.lambda
                    };
                    mean += self.nu * self.mu * g;
                    var += self.nu * (2.0 * self.mu * a * cross + 2.0 * self.mu * self.mu * g2);
                }
                (mean, var)
            }
        }
    }
}

impl ProcessSpec {
    pub fn new(factors: Vec<FactorSpec>) -> Result<Self> {
        let spec = Self { factors };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        self.factors.iter().try_for_each(FactorSpec::validate)
    }

    pub fn dim(&self) -> usize {
        self.factors.len()
    }

    pub fn initial_state(&self) -> Vec<f64> {
        self.factors.iter().map(|f| f.x0).collect()
    }

    pub fn has_jumps(&self) -> bool {
        self.factors.iter().any(FactorSpec::has_jumps)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text).map_err(|e| Error::Parse {
            source_name: "process spec".into(),
            message: e.to_string(),
        })?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("process spec serializes")
    }

    fn check_len(&self, n: usize) -> Result<()> {
        if n != self.dim() {
            return Err(Error::InvalidParameter(format!(
                "vector of length {n} for a {}-factor process",
                self.dim()
            )));
        }
        Ok(())
    }

    /// Closed-form `(phi_t(u), psi_t(u))`.
    pub fn phi_psi(&self, t: f64, u: &[f64]) -> Result<ExpAffine> {
        self.check_len(u.len())?;
        let mut phi = 0.0;
        let mut psi = Vec::with_capacity(u.len());
        for (f, &ui) in self.factors.iter().zip(u) {
            let (p, q) = f.exponents(t, ui)?;
            phi += p;
            psi.push(q);
        }
        Ok(ExpAffine { phi, psi })
    }

    /// Closed-form exponents at a complex argument.
    pub fn phi_psi_complex(&self, t: f64, u: &[Complex64]) -> Result<ComplexExpAffine> {
        self.check_len(u.len())?;
        let mut phi = Complex64::new(0.0, 0.0);
        let mut psi = Vec::with_capacity(u.len());
        for (f, &ui) in self.factors.iter().zip(u) {
            let (p, q) = f.exponents_complex(t, ui)?;
            phi += p;
            psi.push(q);
        }
        Ok(ComplexExpAffine { phi, psi })
    }

    /// `phi_t(u) + <psi_t(u), x>` without allocating.
    pub fn log_mgf(&self, t: f64, u: &[f64], x: &[f64]) -> Result<f64> {
        self.check_len(u.len())?;
        self.check_len(x.len())?;
        let mut s = 0.0;
        for ((f, &ui), &xi) in self.factors.iter().zip(u).zip(x) {
            let (p, q) = f.exponents(t, ui)?;
            s += p + q * xi;
        }
        Ok(s)
    }

    /// Whether `u` lies in the admissible set at `horizon`, and how far it
    /// can be scaled. The boundary itself is excluded, so a vector whose
    /// safe scale equals exactly one is not admissible.
    pub fn validate_domain(&self, u: &[f64], horizon: f64) -> DomainCheck {
        let mut scale = f64::INFINITY;
        for (f, &ui) in self.factors.iter().zip(u) {
            if ui > 0.0 {
                scale = scale.min(f.critical_exponent(horizon.max(0.0)) / ui);
            } else if ui.is_nan() {
                scale = 0.0;
            }
        }
        DomainCheck { admissible: scale > 1.0, max_safe_scale: scale }
    }

    pub fn fitting_capacity(&self) -> FittingCapacity {
        if self.factors.is_empty() {
            FittingCapacity::Finite(1.0)
        } else {
            FittingCapacity::Infinite
        }
    }

    /// `M_t^u = exp(phi_{T_N - t}(u) + <psi_{T_N - t}(u), x_t>)`.
    pub fn martingale_value(&self, u: &[f64], t: f64, terminal: f64, x_t: &[f64]) -> Result<f64> {
        if t > terminal || t < 0.0 {
            return Err(Error::Domain(format!("time {t} outside [0, {terminal}]")));
        }
        Ok(self.log_mgf(terminal - t, u, x_t)?.exp())
    }

    /// Moment generating function of `X_t` under the measure whose density
    /// with respect to the terminal measure is `M^{u_k}_t / M^{u_k}_0`.
    pub fn forward_mgf(
        &self,
        u_k: &[f64],
        w: &[Complex64],
        t: f64,
        terminal: f64,
        x0: &[f64],
    ) -> Result<Complex64> {
        Ok(ShiftedMgf::new(self, u_k, t, terminal, x0)?.log_eval(w)?.exp())
    }
}

/// Moment generating function of `X_t` under a measure obtained from the
/// terminal one through the density `M^{u}`. The shift `psi_{T_N - t}(u)`
/// is computed once and reused across many arguments.
#[derive(Debug, Clone)]
pub struct ShiftedMgf<'a> {
    spec: &'a ProcessSpec,
    t: f64,
    x0: Vec<f64>,
    shift: Vec<f64>,
    base: Vec<(f64, f64)>,
}

impl<'a> ShiftedMgf<'a> {
    pub fn new(spec: &'a ProcessSpec, u: &[f64], t: f64, terminal: f64, x0: &[f64]) -> Result<Self> {
        spec.check_len(u.len())?;
        spec.check_len(x0.len())?;
        if t < 0.0 || t > terminal {
            return Err(Error::Domain(format!("time {t} outside [0, {terminal}]")));
        }
        let shift = spec.phi_psi(terminal - t, u)?.psi;
        let base = spec
            .factors
            .iter()
            .zip(&shift)
            .map(|(f, &s)| f.exponents(t, s))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { spec, t, x0: x0.to_vec(), shift, base })
    }

    /// Terminal-measure version (no shift).
    pub fn terminal(spec: &'a ProcessSpec, t: f64, x0: &[f64]) -> Result<Self> {
        spec.check_len(x0.len())?;
        let d = spec.dim();
        Ok(Self { spec, t, x0: x0.to_vec(), shift: vec![0.0; d], base: vec![(0.0, 0.0); d] })
    }

    pub fn horizon(&self) -> f64 {
        self.t
    }

    /// Log of the moment generating function at `w`.
    pub fn log_eval(&self, w: &[Complex64]) -> Result<Complex64> {
        self.spec.check_len(w.len())?;
        let mut acc = Complex64::new(0.0, 0.0);
        for (i, f) in self.spec.factors.iter().enumerate() {
            if w[i] == Complex64::new(0.0, 0.0) {
                continue;
            }
            let arg = w[i] + self.shift[i];
            let (p, q) = f.exponents_complex(self.t, arg)?;
            let (p0, q0) = self.base[i];
            acc += p - p0 + (q - q0) * self.x0[i];
        }
        Ok(acc)
    }

    /// Log of the moment generating function along `z * direction`, i.e. at
    /// `w = z b` for a real direction `b` and complex scalar `z`.
    pub fn log_eval_along(&self, z: Complex64, direction: &[f64]) -> Result<Complex64> {
        let mut acc = Complex64::new(0.0, 0.0);
        for (i, f) in self.spec.factors.iter().enumerate() {
            let b = direction[i];
            if b == 0.0 {
                continue;
            }
            let arg = z * b + self.shift[i];
            let (p, q) = f.exponents_complex(self.t, arg)?;
            let (p0, q0) = self.base[i];
            acc += p - p0 + (q - q0) * self.x0[i];
        }
        Ok(acc)
    }

    /// Largest real `s` such that `s * direction` keeps every shifted
    /// argument admissible (may be infinite).
    pub fn real_strip_end(&self, direction: &[f64]) -> f64 {
        let mut s_max = f64::INFINITY;
        for (i, f) in self.spec.factors.iter().enumerate() {
            let b = direction[i];
            if b > 0.0 {
                let crit = f.critical_exponent(self.t);
                s_max = s_max.min((crit - self.shift[i]) / b);
            }
        }
        s_max
    }
}
