//! Small numerical kernels shared across the crate: bracketed root finding,
//! adaptive Gauss–Kronrod quadrature, compensated summation and a few
//! complex helpers.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Compensated sum of a slice, reduced pairwise in fixed-size blocks so the
/// result does not depend on how the slice was produced.
pub fn stable_sum(xs: &[f64]) -> f64 {
    const BLOCK: usize = 4096;
    if xs.len() <= BLOCK {
        let mut s = CompensatedSum::new();
        xs.iter().for_each(|&x| s.add(x));
        return s.value();
    }
    let mid = (xs.len() / 2).div_ceil(BLOCK) * BLOCK;
    stable_sum(&xs[..mid]) + stable_sum(&xs[mid..])
}

/// Brent's method on a sign-changing bracket `[a, b]`.
pub fn brent<F>(mut f: F, a: f64, b: f64, xtol: f64, max_iter: usize) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    let (mut a, mut b) = (a, b);
    let mut fa = f(a);
    let mut fb = f(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if !(fa.is_finite() && fb.is_finite()) || fa.signum() == fb.signum() {
        return Err(Error::Domain(format!(
            "root not bracketed on [{a}, {b}] (f = {fa}, {fb})"
        )));
    }
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;
    for _ in 0..max_iter {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = 2.0 * f64::EPSILON * b.abs() + 0.5 * xtol;
        let m = 0.5 * (c - b);
        if m.abs() <= tol || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol.copysign(m) };
        fb = f(b);
        if !fb.is_finite() {
            return Err(Error::Domain(format!("non-finite function value at {b}")));
        }
    }
    Err(Error::Domain("root finder exhausted its iteration budget".into()))
}

const GK_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const GK_WEIGHTS: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728_0,
];
const G7_WEIGHTS: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// One 15-point Kronrod rule with its embedded 7-point Gauss estimate.
/// Returns `(kronrod, |kronrod - gauss|)`. Endpoints are never evaluated.
pub fn gk15<F>(f: &mut F, a: f64, b: f64) -> (f64, f64)
where
    F: FnMut(f64) -> f64,
{
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * GK_WEIGHTS[7];
    let mut g = fc * G7_WEIGHTS[3];
    for j in 0..7 {
        let dx = h * GK_NODES[j];
        let s = f(c - dx) + f(c + dx);
        k += GK_WEIGHTS[j] * s;
        if j % 2 == 1 {
            g += G7_WEIGHTS[j / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Adaptive Gauss–Kronrod integration by recursive bisection.
///
/// The error budget is split evenly between halves, so the traversal order,
/// and hence the rounded result, is fixed for given inputs.
pub fn integrate<F>(mut f: F, a: f64, b: f64, abs_tol: f64, max_depth: usize) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    let (whole, err) = gk15(&mut f, a, b);
    let mut ok = true;
    let v = refine(&mut f, a, b, whole, err, abs_tol, max_depth, &mut ok);
    if !v.is_finite() {
        return Err(Error::Integration(format!("non-finite integral on [{a}, {b}]")));
    }
    if ok {
        Ok(v)
    } else {
        Err(Error::Integration(format!(
            "tolerance {abs_tol:e} not reached on [{a}, {b}]"
        )))
    }
}

#[allow(clippy::too_many_arguments)]
fn refine<F>(
    f: &mut F,
    a: f64,
    b: f64,
    whole: f64,
    err: f64,
    tol: f64,
    depth: usize,
    ok: &mut bool,
) -> f64
where
    F: FnMut(f64) -> f64,
{
    // Below this level the estimate is dominated by rounding.
    let floor = 64.0 * f64::EPSILON * whole.abs();
    if err <= tol.max(floor) || !whole.is_finite() {
        return whole;
    }
    if depth == 0 {
        *ok = false;
        return whole;
    }
    let m = 0.5 * (a + b);
    let (l, el) = gk15(f, a, m);
    let (r, er) = gk15(f, m, b);
    if (el + er) <= tol {
        return l + r;
    }
    refine(f, a, m, l, el, 0.5 * tol, depth - 1, ok) + refine(f, m, b, r, er, 0.5 * tol, depth - 1, ok)
}

/// Integral over `[0, inf)` as a sum of adaptive integrals on `[0, a0]`,
/// `[a0, 2 a0]`, `[2 a0, 4 a0]`, ... The sweep stops once two consecutive
/// segments each contribute less than a quarter of `abs_tol`.
pub fn integrate_semi_infinite<F>(mut f: F, a0: f64, abs_tol: f64, max_end: f64) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    let seg_tol = 0.25 * abs_tol;
    let mut total = CompensatedSum::new();
    total.add(integrate(&mut f, 0.0, a0, seg_tol, 40)?);
    let (mut a, mut quiet) = (a0, 0);
    while a < max_end {
        let b = 2.0 * a;
        let part = integrate(&mut f, a, b, seg_tol, 40)?;
        total.add(part);
        quiet = if part.abs() < seg_tol { quiet + 1 } else { 0 };
        if quiet >= 2 {
            return Ok(total.value());
        }
        a = b;
    }
    Err(Error::Integration(format!(
        "integrand still contributes beyond {max_end:e}"
    )))
}

/// Integral over `[0, inf)` of an integrand oscillating with half-period
/// `half_period` and slowly decaying amplitude. Partial integrals up to
/// `a0 + n * half_period` are accelerated with Wynn's epsilon algorithm.
pub fn integrate_oscillatory<F>(mut f: F, a0: f64, half_period: f64, abs_tol: f64, max_terms: usize) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    if !(half_period > 0.0 && half_period.is_finite()) {
        return Err(Error::Integration(format!("half period {half_period} is not positive")));
    }
    // Whole half periods up to a0 form the head; extrapolation starts after it.
    let head = ((a0 / half_period).ceil() as usize).max(1);
    let mut total = CompensatedSum::new();
    let mut partial = Vec::new();
    let mut last_est = f64::NAN;
    let mut hits = 0;
    for n in 0..head + max_terms {
        let a = n as f64 * half_period;
        total.add(integrate(&mut f, a, a + half_period, 0.01 * abs_tol, 40)?);
        if n + 1 < head {
            continue;
        }
        partial.push(total.value());
        if partial.len() < 8 {
            continue;
        }
        let window = &partial[partial.len().saturating_sub(24)..];
        let est = wynn_epsilon(window);
        if (est - last_est).abs() < abs_tol {
            hits += 1;
            if hits >= 2 {
                return Ok(est);
            }
        } else {
            hits = 0;
        }
        last_est = est;
    }
    Err(Error::Integration(format!(
        "oscillatory tail did not settle after {max_terms} half periods"
    )))
}

/// Wynn epsilon extrapolation of a sequence of partial sums; returns the
/// deepest even-column entry.
pub fn wynn_epsilon(seq: &[f64]) -> f64 {
    let n = seq.len();
    if n == 0 {
        return f64::NAN;
    }
    let mut prev = vec![0.0; n + 1];
    let mut cur = seq.to_vec();
    let mut best = seq[n - 1];
    for col in 1..n {
        let len = cur.len() - 1;
        let mut next = Vec::with_capacity(len);
        for j in 0..len {
            let d = cur[j + 1] - cur[j];
            if d == 0.0 || !d.is_finite() {
                return best;
            }
            next.push(prev[j + 1] + 1.0 / d);
        }
        if col % 2 == 0 {
            match next.last() {
                Some(&v) if v.is_finite() => best = v,
                _ => return best,
            }
        }
        prev = cur;
        cur = next;
    }
    best
}

/// `ln(1 + z)` accurate for small `|z|`.
pub fn ln_1p(z: Complex64) -> Complex64 {
    let re = 0.5 * (2.0 * z.re + z.re * z.re + z.im * z.im).ln_1p();
    let im = z.im.atan2(1.0 + z.re);
    Complex64::new(re, im)
}

/// `-ln(1 - x) / x`, equal to 1 at the origin.
pub fn neg_log_ratio(x: Complex64) -> Complex64 {
    if x.norm() < 1e-4 {
        // 1 + x/2 + x^2/3 + x^3/4 + x^4/5
        let mut acc = Complex64::new(0.2, 0.0);
        for c in [0.25, 1.0 / 3.0, 0.5, 1.0] {
            acc = acc * x + c;
        }
        acc
    } else {
        -ln_1p(-x) / x
    }
}

/// Real version of [`neg_log_ratio`].
pub fn neg_log_ratio_real(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        1.0 + x * (0.5 + x * (1.0 / 3.0 + x * (0.25 + x * 0.2)))
    } else {
        -(-x).ln_1p() / x
    }
}

/// `(1 - e^{-c t}) / c` with its `c -> 0` limit.
pub fn decay_integral(c: f64, t: f64) -> f64 {
    let x = c * t;
    if x.abs() < 1e-12 {
        t * (1.0 - 0.5 * x)
    } else {
        -(-x).exp_m1() / c
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn brent_finds_cubic_root() {
        let r = brent(|x| x * x * x - 2.0, 0.0, 2.0, 1e-15, 200).unwrap();
        assert_relative_eq!(r, 2f64.cbrt(), epsilon = 1e-14);
    }

    #[test]
    fn semi_infinite_integrals() {
        let v = integrate_semi_infinite(|x| (-x).exp(), 1.0, 1e-13, 1e6).unwrap();
        assert_relative_eq!(v, 1.0, epsilon = 1e-12);
        // Dirichlet-type tail: int_0^inf sin(3x) x / (1 + x^2) dx = pi/2 e^-3.
        let v = integrate_semi_infinite(|x| (3.0 * x).sin() * x / (1.0 + x * x) / (1.0 + x * x), 1.0, 1e-12, 1e8)
            .unwrap();
        let exact = std::f64::consts::PI * 3.0 / 4.0 * (-3.0f64).exp();
        assert_relative_eq!(v, exact, epsilon = 1e-10);
    }

    #[test]
    fn oscillatory_integrals() {
        let v = integrate_oscillatory(|x| if x == 0.0 { 1.0 } else { x.sin() / x }, 1.0, PI, 1e-12, 400).unwrap();
        assert!((v - 0.5 * PI).abs() < 1e-10, "{v}");
        // Slow algebraic decay: int_0^inf sin(5x)/(1+x)^1.1 dx against a long direct sum.
        let f = |x: f64| (5.0 * x).sin() / (1.0 + x).powf(1.1);
        let v = integrate_oscillatory(f, 1.0, PI / 5.0, 1e-12, 400).unwrap();
        // Averaging two truncations half a period apart cancels the leading error.
        let end = 2.0e4 * PI / 5.0;
        let head = integrate(f, 0.0, end, 1e-11, 60).unwrap();
        let direct = head + 0.5 * integrate(f, end, end + PI / 5.0, 1e-13, 30).unwrap();
        assert!((v - direct).abs() < 1e-8, "{v} {direct}");
    }

    #[test]
    fn wynn_accelerates_alternating_series() {
        let mut s = 0.0;
        let partial: Vec<f64> = (0..20)
            .map(|k| {
                s += if k % 2 == 0 { 1.0 } else { -1.0 } / (k as f64 + 1.0);
                s
            })
            .collect();
        assert!((wynn_epsilon(&partial) - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn brent_rejects_unbracketed() {
        assert!(brent(|x| x * x + 1.0, -1.0, 1.0, 1e-12, 100).is_err());
    }

    #[test]
    fn gauss_kronrod_integrates_smooth_and_oscillatory() {
        let v = integrate(|x| x.exp(), 0.0, 1.0, 1e-14, 30).unwrap();
        assert_relative_eq!(v, std::f64::consts::E - 1.0, epsilon = 1e-14);
        let v = integrate(|x| (20.0 * x).cos(), 0.0, 3.0, 1e-13, 40).unwrap();
        assert_relative_eq!(v, (60f64).sin() / 20.0, epsilon = 1e-12);
    }

    #[test]
    fn compensated_sum_beats_naive() {
        let mut s = CompensatedSum::new();
        s.add(1.0);
        for _ in 0..10 {
            s.add(1e-16);
        }
        assert_relative_eq!(s.value(), 1.0 + 1e-15, epsilon = 1e-17);
    }

    #[test]
    fn stable_sum_is_blocked() {
        let xs: Vec<f64> = (0..10_000).map(|i| (i as f64).sin()).collect();
        let naive: f64 = xs.iter().sum();
        assert!((stable_sum(&xs) - naive).abs() < 1e-10);
    }

    #[test]
    fn complex_log_ratio_matches_series() {
        let x = Complex64::new(3e-5, -2e-5);
        let direct = -(Complex64::new(1.0, 0.0) - x).ln() / x;
        assert!((neg_log_ratio(x) - direct).norm() < 1e-11);
        let y = Complex64::new(0.3, 0.7);
        let direct = -(Complex64::new(1.0, 0.0) - y).ln() / y;
        assert!((neg_log_ratio(y) - direct).norm() < 1e-14);
    }
}
