//! Tenor grids, initial OIS/LIBOR term structures and linear products
//! (swaps, basis swaps) valued off them.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const DATE_TOL: f64 = 1e-9;

/// Nelson–Siegel zero-coupon rate parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NelsonSiegelParams {
    pub beta0: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub gamma: f64,
}

impl NelsonSiegelParams {
    pub fn new(beta0: f64, beta1: f64, beta2: f64, gamma: f64) -> Result<Self> {
        let p = Self { beta0, beta1, beta2, gamma };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if ![self.beta0, self.beta1, self.beta2, self.gamma].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite Nelson-Siegel parameter".into()));
        }
        if self.gamma <= 0.0 {
            return Err(Error::InvalidParameter("Nelson-Siegel gamma must be positive".into()));
        }
        Ok(())
    }

    /// Continuously compounded zero rate to maturity `t`; `t = 0` gives the limit.
    pub fn zero_rate(&self, t: f64) -> f64 {
        let x = self.gamma * t;
        let (slope, e) = if x.abs() < 1e-10 {
            (1.0 - x / 2.0, 1.0 - x)
        } else {
            (-(-x).exp_m1() / x, (-x).exp())
        };
        self.beta0 + self.beta1 * slope + self.beta2 * (slope - e)
    }

    pub fn discount(&self, t: f64) -> f64 {
        (-self.zero_rate(t) * t).exp()
    }
}

/// Equidistant payment grid of one tenor, embedded in the fine grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TenorGrid {
    pub delta: f64,
    pub n_points: usize,
    pub fine_step: f64,
}

impl TenorGrid {
    pub fn new(delta: f64, fine_step: f64, terminal: f64) -> Result<Self> {
        if !(delta > 0.0 && fine_step > 0.0 && terminal > 0.0) {
            return Err(Error::InvalidParameter("grid steps and terminal must be positive".into()));
        }
        let ratio = delta / fine_step;
        if (ratio - ratio.round()).abs() > 1e-9 || ratio.round() < 1.0 {
            return Err(Error::Consistency(format!(
                "accrual {delta} is not a multiple of the base step {fine_step}"
            )));
        }
        let n = terminal / delta;
        if (n - n.round()).abs() > 1e-9 || n.round() < 1.0 {
            return Err(Error::Consistency(format!(
                "terminal {terminal} is not on the grid with accrual {delta}"
            )));
        }
        Ok(Self { delta, n_points: n.round() as usize, fine_step })
    }

    /// Number of fine steps per accrual period.
    pub fn ratio(&self) -> usize {
        (self.delta / self.fine_step).round() as usize
    }

    pub fn map_to_fine(&self, k: usize) -> usize {
        k * self.ratio()
    }

    pub fn date(&self, k: usize) -> f64 {
        k as f64 * self.delta
    }

    pub fn terminal(&self) -> f64 {
        self.date(self.n_points)
    }

    /// Index `k` with `T_k = t`, if `t` is a grid date.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let k = (t / self.delta).round();
        ((t - k * self.delta).abs() < DATE_TOL && k >= 0.0 && k as usize <= self.n_points)
            .then_some(k as usize)
    }
}

/// Index of a tenor inside a [`CurveSet`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TenorId(pub usize);

/// Initial LIBOR curve of one tenor; `libor[k - 1]` is `L_k(0)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TenorCurve {
    pub label: String,
    pub grid: TenorGrid,
    pub libor: Vec<f64>,
}

/// OIS discount factors on the fine grid plus initial LIBOR curves per tenor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveSet {
    pub fine_step: f64,
    pub terminal: f64,
    /// `B(0, T_l)` for `l = 0..=N`.
    pub ois_discounts: Vec<f64>,
    pub tenors: Vec<TenorCurve>,
}

/// Tenor length parsed from labels such as `3m`, `6M` or `1y`.
pub fn tenor_from_label(label: &str) -> Result<f64> {
    let l = label.trim().to_ascii_lowercase();
    let (num, unit) = l.split_at(l.len().saturating_sub(1));
    let n: f64 = num
        .parse()
        .map_err(|_| Error::Config(format!("cannot read tenor label {label:?}")))?;
    match unit {
        "m" => Ok(n / 12.0),
        "y" => Ok(n),
        _ => Err(Error::Config(format!("cannot read tenor label {label:?}"))),
    }
}

/// Builds a [`CurveSet`] from Nelson–Siegel parameterisations.
pub fn build_curveset(
    ois: &NelsonSiegelParams,
    tenor_curves: &[(String, NelsonSiegelParams, f64)],
    fine_step: f64,
    terminal: f64,
    require_positive: bool,
) -> Result<CurveSet> {
    ois.validate()?;
    let base = TenorGrid::new(fine_step, fine_step, terminal)?;
    let ois_discounts = (0..=base.n_points).map(|l| ois.discount(base.date(l))).collect();
    let mut tenors = Vec::with_capacity(tenor_curves.len());
    for (label, ns, delta) in tenor_curves {
        ns.validate()?;
        let grid = TenorGrid::new(*delta, fine_step, terminal)?;
        let libor = (1..=grid.n_points)
            .map(|k| (ns.discount(grid.date(k - 1)) / ns.discount(grid.date(k)) - 1.0) / delta)
            .collect();
        tenors.push(TenorCurve { label: label.clone(), grid, libor });
    }
    let cs = CurveSet { fine_step, terminal, ois_discounts, tenors };
    if require_positive {
        cs.check_positive()?;
    }
    Ok(cs)
}

#[derive(Debug, Deserialize)]
struct DiscountRow {
    maturity: f64,
    discount: f64,
}

#[derive(Debug, Deserialize)]
struct LiborRow {
    maturity_end: f64,
    rate: f64,
}

fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let name = path.display().to_string();
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => Error::Config(format!("cannot open {name}: {e}")),
            _ => Error::Parse { source_name: name.clone(), message: e.to_string() },
        })?;
    let mut rows = Vec::new();
    for rec in rdr.deserialize() {
        rows.push(rec.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            Error::Parse { source_name: format!("{name}:{line}"), message: e.to_string() }
        })?);
    }
    if rows.is_empty() {
        return Err(Error::Parse { source_name: name, message: "no data rows".into() });
    }
    Ok(rows)
}

/// Raw tabular input: discount factors and per-tenor LIBOR fixings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveTables {
    pub discounts: Vec<DiscountPoint>,
    pub libor: BTreeMap<String, Vec<LiborPoint>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscountPoint {
    pub maturity: f64,
    pub discount: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LiborPoint {
    pub maturity_end: f64,
    pub rate: f64,
}

impl CurveTables {
    /// Reads `discounts.csv` and every `libor_<tenor>.csv` in `dir`.
    pub fn from_csv_dir(dir: &Path) -> Result<Self> {
        let discounts = read_csv::<DiscountRow>(&dir.join("discounts.csv"))?
            .into_iter()
            .map(|r| DiscountPoint { maturity: r.maturity, discount: r.discount })
            .collect();
        let mut libor = BTreeMap::new();
        let entries = std::fs::read_dir(dir)
            .map_err(|e| Error::Config(format!("cannot list {}: {e}", dir.display())))?;
        for entry in entries {
            let path = entry?.path();
            let Some(name) = path.file_name().and_then(|n| n.to_str()) else { continue };
            if let Some(label) = name.strip_prefix("libor_").and_then(|n| n.strip_suffix(".csv")) {
                let rows = read_csv::<LiborRow>(&path)?
                    .into_iter()
                    .map(|r| LiborPoint { maturity_end: r.maturity_end, rate: r.rate })
                    .collect();
                libor.insert(label.to_string(), rows);
            }
        }
        Ok(Self { discounts, libor })
    }

    /// Normalizes the tables onto the fine grid. Discount factors are
    /// interpolated log-linearly between quoted maturities (with `B(0,0) = 1`);
    /// LIBOR fixings must sit exactly on their tenor grid.
    pub fn to_curveset(&self, fine_step: f64, terminal: f64, require_positive: bool) -> Result<CurveSet> {
        let base = TenorGrid::new(fine_step, fine_step, terminal)?;
        let mut knots: Vec<(f64, f64)> = vec![(0.0, 0.0)];
        for p in &self.discounts {
            if !(p.discount > 0.0) || !p.maturity.is_finite() || p.maturity < 0.0 {
                return Err(Error::Consistency(format!(
                    "discount {} at maturity {} is not usable",
                    p.discount, p.maturity
                )));
            }
            if p.maturity.abs() < DATE_TOL {
                continue;
            }
            knots.push((p.maturity, p.discount.ln()));
        }
        knots.sort_by(|a, b| a.0.total_cmp(&b.0));
        if knots.windows(2).any(|w| (w[1].0 - w[0].0).abs() < DATE_TOL) {
            return Err(Error::Consistency("duplicate discount maturity".into()));
        }
        let mut ois_discounts = Vec::with_capacity(base.n_points + 1);
        for l in 0..=base.n_points {
            let t = base.date(l);
            let j = knots.partition_point(|k| k.0 < t - DATE_TOL);
            let log_b = if j < knots.len() && (knots[j].0 - t).abs() < DATE_TOL {
                knots[j].1
            } else if j == 0 || j == knots.len() {
                return Err(Error::Consistency(format!("grid date {t} outside the discount table")));
            } else {
                let (t0, y0) = knots[j - 1];
                let (t1, y1) = knots[j];
                y0 + (y1 - y0) * (t - t0) / (t1 - t0)
            };
            ois_discounts.push(log_b.exp());
        }
        let mut tenors = Vec::new();
        for (label, points) in &self.libor {
            let delta = tenor_from_label(label)?;
            let grid = TenorGrid::new(delta, fine_step, terminal)?;
            let mut libor = vec![f64::NAN; grid.n_points];
            for p in points {
                let k = grid.index_of(p.maturity_end).filter(|&k| k >= 1).ok_or_else(|| {
                    Error::Consistency(format!(
                        "LIBOR {label} maturity {} is not a payment date",
                        p.maturity_end
                    ))
                })?;
                libor[k - 1] = p.rate;
            }
            if let Some(k) = libor.iter().position(|v| !v.is_finite()) {
                return Err(Error::Consistency(format!("LIBOR {label} missing period {}", k + 1)));
            }
            tenors.push(TenorCurve { label: label.clone(), grid, libor });
        }
        tenors.sort_by(|a, b| a.grid.delta.total_cmp(&b.grid.delta));
        let cs = CurveSet { fine_step, terminal, ois_discounts, tenors };
        if require_positive {
            cs.check_positive()?;
        }
        Ok(cs)
    }
}

impl CurveSet {
    pub fn n_fine(&self) -> usize {
        self.ois_discounts.len() - 1
    }

    pub fn tenor(&self, x: TenorId) -> Result<&TenorCurve> {
        self.tenors.get(x.0).ok_or_else(|| Error::Index(format!("tenor {} not present", x.0)))
    }

    pub fn tenor_by_label(&self, label: &str) -> Result<TenorId> {
        self.tenors
            .iter()
            .position(|t| t.label.eq_ignore_ascii_case(label))
            .map(TenorId)
            .ok_or_else(|| Error::Config(format!("unknown tenor {label:?}")))
    }

    pub fn grid(&self, x: TenorId) -> Result<TenorGrid> {
        Ok(self.tenor(x)?.grid)
    }

    /// `B(0, T_l)` on the fine grid.
    pub fn discount(&self, l: usize) -> Result<f64> {
        self.ois_discounts
            .get(l)
            .copied()
            .ok_or_else(|| Error::Index(format!("fine index {l} beyond {}", self.n_fine())))
    }

    /// `B(0, T_k^x)`.
    pub fn tenor_discount(&self, x: TenorId, k: usize) -> Result<f64> {
        let g = self.grid(x)?;
        if k > g.n_points {
            return Err(Error::Index(format!("tenor index {k} beyond {}", g.n_points)));
        }
        self.discount(g.map_to_fine(k))
    }

    /// `L_k^x(0)` for `k = 1..=N^x`.
    pub fn libor(&self, x: TenorId, k: usize) -> Result<f64> {
        let t = self.tenor(x)?;
        if k == 0 || k > t.libor.len() {
            return Err(Error::Index(format!("LIBOR period {k} outside 1..={}", t.libor.len())));
        }
        Ok(t.libor[k - 1])
    }

    /// Forward OIS rate `F_k^x(0)`.
    pub fn ois_forward(&self, x: TenorId, k: usize) -> Result<f64> {
        if k == 0 {
            return Err(Error::Index("forward period 0".into()));
        }
        let g = self.grid(x)?;
        Ok((self.tenor_discount(x, k - 1)? / self.tenor_discount(x, k)? - 1.0) / g.delta)
    }

    /// Additive spread `L - F`.
    pub fn additive_spread(&self, x: TenorId, k: usize) -> Result<f64> {
        Ok(self.libor(x, k)? - self.ois_forward(x, k)?)
    }

    /// Multiplicative spread `((1 + dL) / (1 + dF) - 1) / d`.
    pub fn multiplicative_spread(&self, x: TenorId, k: usize) -> Result<f64> {
        let d = self.grid(x)?.delta;
        let l = self.libor(x, k)?;
        let f = self.ois_forward(x, k)?;
        Ok(((1.0 + d * l) / (1.0 + d * f) - 1.0) / d)
    }

    /// Positive, non-increasing discounts and non-negative spreads.
    pub fn check_positive(&self) -> Result<()> {
        if let Some(l) = self.ois_discounts.iter().position(|b| !(*b > 0.0)) {
            return Err(Error::Consistency(format!("non-positive discount at fine index {l}")));
        }
        if let Some(l) = self.ois_discounts.windows(2).position(|w| w[1] > w[0]) {
            return Err(Error::Consistency(format!("discounts increase at fine index {}", l + 1)));
        }
        for (xi, t) in self.tenors.iter().enumerate() {
            for k in 1..=t.grid.n_points {
                let s = self.additive_spread(TenorId(xi), k)?;
                if s < 0.0 {
                    return Err(Error::Consistency(format!(
                        "LIBOR {} below OIS forward at period {k} (spread {s:e})",
                        t.label
                    )));
                }
            }
        }
        Ok(())
    }

    fn check_range(&self, x: TenorId, p: usize, q: usize) -> Result<TenorGrid> {
        let g = self.grid(x)?;
        if p > q || q > g.n_points {
            return Err(Error::Index(format!("swap indices {p}..{q} outside 0..={}", g.n_points)));
        }
        Ok(g)
    }

    /// `sum_{k=p+1}^{q} B(0, T_k^x)`.
    pub fn annuity_discounts(&self, x: TenorId, p: usize, q: usize) -> Result<f64> {
        self.check_range(x, p, q)?;
        (p + 1..=q).map(|k| self.tenor_discount(x, k)).sum()
    }

    fn float_leg(&self, x: TenorId, p: usize, q: usize) -> Result<f64> {
        let g = self.check_range(x, p, q)?;
        let mut s = 0.0;
        for k in p + 1..=q {
            s += g.delta * self.tenor_discount(x, k)? * self.libor(x, k)?;
        }
        Ok(s)
    }

    pub fn fair_swap_rate(&self, x: TenorId, p: usize, q: usize) -> Result<f64> {
        if p >= q {
            return Err(Error::Index(format!("swap needs p < q, got {p}..{q}")));
        }
        let g = self.check_range(x, p, q)?;
        Ok(self.float_leg(x, p, q)? / (g.delta * self.annuity_discounts(x, p, q)?))
    }

    /// Payer swap value `delta * sum B(0,T_k)(L_k(0) - K)`.
    pub fn swap_value(&self, x: TenorId, p: usize, q: usize, strike: f64) -> Result<f64> {
        let g = self.check_range(x, p, q)?;
        Ok(self.float_leg(x, p, q)? - strike * g.delta * self.annuity_discounts(x, p, q)?)
    }

    fn check_alignment(&self, legs: &BasisLegs) -> Result<()> {
        let g1 = self.check_range(legs.short, legs.p1, legs.q1)?;
        let g2 = self.check_range(legs.long, legs.p2, legs.q2)?;
        let same = |a: f64, b: f64| (a - b).abs() < DATE_TOL;
        if !same(g1.date(legs.p1), g2.date(legs.p2)) || !same(g1.date(legs.q1), g2.date(legs.q2)) {
            return Err(Error::Alignment(format!(
                "legs [{}, {}] and [{}, {}] do not share start and end dates",
                g1.date(legs.p1),
                g1.date(legs.q1),
                g2.date(legs.p2),
                g2.date(legs.q2)
            )));
        }
        if g2.ratio() % g1.ratio() != 0 {
            return Err(Error::Alignment("long-tenor dates are not short-tenor dates".into()));
        }
        Ok(())
    }

    /// Spread on the short leg that makes the basis swap worth zero.
    pub fn fair_basis_spread(&self, legs: &BasisLegs) -> Result<f64> {
        self.check_alignment(legs)?;
        if legs.p1 >= legs.q1 {
            return Err(Error::Index("empty basis swap".into()));
        }
        let d1 = self.grid(legs.short)?.delta;
        let diff = self.float_leg(legs.long, legs.p2, legs.q2)? - self.float_leg(legs.short, legs.p1, legs.q1)?;
        Ok(diff / (d1 * self.annuity_discounts(legs.short, legs.p1, legs.q1)?))
    }

    /// Value of receiving the long-tenor leg and paying the short-tenor
    /// leg plus `spread`.
    pub fn basis_swap_value(&self, legs: &BasisLegs, spread: f64) -> Result<f64> {
        self.check_alignment(legs)?;
        let d1 = self.grid(legs.short)?.delta;
        Ok(self.float_leg(legs.long, legs.p2, legs.q2)?
            - self.float_leg(legs.short, legs.p1, legs.q1)?
            - spread * d1 * self.annuity_discounts(legs.short, legs.p1, legs.q1)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("curve set serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cs: Self = serde_json::from_str(text)
            .map_err(|e| Error::Parse { source_name: "curve set".into(), message: e.to_string() })?;
        if cs.ois_discounts.len() < 2 {
            return Err(Error::Consistency("curve set needs at least two discounts".into()));
        }
        Ok(cs)
    }
}

/// Leg indices of a basis swap: `short` carries the spread.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BasisLegs {
    pub short: TenorId,
    pub long: TenorId,
    pub p1: usize,
    pub q1: usize,
    pub p2: usize,
    pub q2: usize,
}

/// The two-tenor example curves: OIS, 3m and 6m Nelson–Siegel parameters.
pub fn example_curves() -> (NelsonSiegelParams, Vec<(String, NelsonSiegelParams, f64)>) {
    let ns = |b0| NelsonSiegelParams { beta0: b0, beta1: 0.01, beta2: 0.07, gamma: 0.06 };
    (ns(0.0003), vec![("3m".to_string(), ns(0.0032), 0.25), ("6m".to_string(), ns(0.0050), 0.5)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn example() -> CurveSet {
        let (ois, tenors) = example_curves();
        build_curveset(&ois, &tenors, 0.25, 4.5, true).unwrap()
    }

    #[test]
    fn nelson_siegel_values() {
        let (ois, _) = example_curves();
        assert_relative_eq!(ois.zero_rate(0.0), 0.0103, epsilon = 1e-15);
        assert_relative_eq!(ois.zero_rate(4.5), 0.0169732, epsilon = 5e-8);
        let flat = NelsonSiegelParams::new(0.02, 0.0, 0.0, 0.5).unwrap();
        assert_relative_eq!(flat.zero_rate(7.0), 0.02, epsilon = 1e-16);
    }

    #[test]
    fn grid_mapping() {
        let g = TenorGrid::new(0.5, 0.25, 4.5).unwrap();
        assert_eq!(g.n_points, 9);
        assert_eq!(g.map_to_fine(4), 8);
        assert!(TenorGrid::new(0.3, 0.25, 4.5).is_err());
        assert_eq!(g.index_of(2.0), Some(4));
        assert_eq!(g.index_of(2.1), None);
    }

    #[test]
    fn single_period_swap_rate_is_libor() {
        let cs = example();
        let x = TenorId(0);
        assert_relative_eq!(cs.fair_swap_rate(x, 3, 4).unwrap(), cs.libor(x, 4).unwrap(), epsilon = 1e-16);
    }

    #[test]
    fn swap_value_vanishes_at_fair_rate() {
        let cs = example();
        let x = TenorId(0);
        let k = cs.fair_swap_rate(x, 8, 16).unwrap();
        assert!(cs.swap_value(x, 8, 16, k).unwrap().abs() < 1e-14);
        assert_eq!(cs.swap_value(x, 8, 8, k).unwrap(), 0.0);
        assert!(cs.swap_value(x, 8, 16, 0.0).unwrap() > 0.0);
    }

    #[test]
    fn basis_spread_example() {
        let cs = example();
        let legs = BasisLegs { short: TenorId(0), long: TenorId(1), p1: 8, q1: 16, p2: 4, q2: 8 };
        let s = cs.fair_basis_spread(&legs).unwrap();
        assert!(cs.basis_swap_value(&legs, s).unwrap().abs() < 1e-15);
        // The option table spans 50% to 200% of this level.
        assert!(s > 0.0010945 && s < 0.0036484);
        let bad = BasisLegs { p2: 3, ..legs };
        assert!(matches!(cs.fair_basis_spread(&bad), Err(Error::Alignment(_))));
    }

    #[test]
    fn single_curve_has_zero_spreads() {
        let (ois, _) = example_curves();
        let cs = build_curveset(&ois, &[("3m".into(), ois, 0.25)], 0.25, 4.5, true).unwrap();
        for k in 1..=18 {
            assert!(cs.additive_spread(TenorId(0), k).unwrap().abs() < 1e-15);
            assert!(cs.multiplicative_spread(TenorId(0), k).unwrap().abs() < 1e-14);
        }
    }

    #[test]
    fn tables_round_trip_through_grid() {
        let cs = example();
        let tables = CurveTables {
            discounts: (0..=18)
                .step_by(2)
                .map(|l| DiscountPoint { maturity: 0.25 * l as f64, discount: cs.ois_discounts[l] })
                .collect(),
            libor: [("6m".to_string(), (1..=9).map(|k| LiborPoint { maturity_end: 0.5 * k as f64, rate: cs.tenors[1].libor[k - 1] }).collect())]
                .into_iter()
                .collect(),
        };
        let back = tables.to_curveset(0.25, 4.5, false).unwrap();
        for l in (0..=18).step_by(2) {
            assert_relative_eq!(back.ois_discounts[l], cs.ois_discounts[l], max_relative = 1e-15);
        }
        assert_eq!(back.tenors[0].libor, cs.tenors[1].libor);
        assert_eq!(tenor_from_label("6M").unwrap(), 0.5);
    }
}
