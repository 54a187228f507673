use std::path::Path;

use affine_libor::analytics::{inst_correlation, terminal_correlation, CorrelationKind};
use affine_libor::calibration::{calibrate_sequential, CapletSurface};
use affine_libor::curves::TenorId;
use affine_libor::model::ModelParams;
use affine_libor::montecarlo::{mc_basis_swaption, mc_caplet, mc_swaption, simulate_paths, McEstimate, SimConfig};
use affine_libor::pricing::{
    basis_swaption_price_approx, caplet_implied_vol, caplet_price, swaption_implied_vol, swaption_price_approx,
    ApproxPrice, BoundaryCoeffs, Exercise,
};
use affine_libor::Error;
use serde::Serialize;
use serde_json::Value;

use crate::config::{Instrument, RunConfig};
use crate::output::{cell, to_json, write_file};
use crate::CliError;

const BP: f64 = 1e4;

#[derive(Debug, Serialize)]
struct ErrorRecord {
    kind: &'static str,
    message: String,
}

impl From<&Error> for ErrorRecord {
    fn from(e: &Error) -> Self {
        Self { kind: e.kind(), message: e.to_string() }
    }
}

#[derive(Debug, Serialize)]
struct PriceRecord {
    instrument: &'static str,
    params: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    price_bp: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    implied_vol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    exercise: Option<Exercise>,
    #[serde(skip_serializing_if = "Option::is_none")]
    boundary: Option<BoundaryCoeffs>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<ErrorRecord>,
}

impl PriceRecord {
    fn new(inst: &Instrument) -> Self {
        Self {
            instrument: inst.name(),
            params: inst.params(),
            price_bp: None,
            implied_vol: None,
            exercise: None,
            boundary: None,
            error: None,
        }
    }
}

fn approx_price(model: &ModelParams, inst: &Instrument, cfg: &RunConfig) -> affine_libor::Result<ApproxPrice> {
    match inst {
        Instrument::Caplet(s) => Ok(ApproxPrice {
            price: caplet_price(model, s, &cfg.quad)?,
            exercise: Exercise::Boundary,
            boundary: None,
        }),
        Instrument::Swaption(s) => swaption_price_approx(model, s, cfg.boundary, &cfg.quad),
        Instrument::BasisSwaption(s) => basis_swaption_price_approx(model, s, cfg.boundary, &cfg.quad),
    }
}

fn price_one(model: &ModelParams, inst: &Instrument, cfg: &RunConfig) -> PriceRecord {
    let mut rec = PriceRecord::new(inst);
    match approx_price(model, inst, cfg) {
        Ok(a) => {
            rec.price_bp = Some(a.price * BP);
            rec.implied_vol = match inst {
                Instrument::Caplet(s) => caplet_implied_vol(model, s, a.price).ok(),
                Instrument::Swaption(s) => swaption_implied_vol(model, s, a.price).ok(),
                Instrument::BasisSwaption(_) => None,
            };
            if !matches!(inst, Instrument::Caplet(_)) {
                rec.exercise = Some(a.exercise);
            }
            rec.boundary = a.boundary;
        }
        Err(e) => rec.error = Some((&e).into()),
    }
    rec
}

fn fmt6(v: Option<f64>) -> String {
    v.map_or("-".into(), |v| format!("{v:.6}"))
}

/// Writes `curves.json` and prints discount and forward rates.
pub fn curves(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let curves = cfg.curveset()?;
    write_file(out, "curves.json", &curves.to_json())?;
    for (xi, t) in curves.tenors.iter().enumerate() {
        println!("tenor {}\nk\tdate\tB(0,T_k)\tF_k(0)\tL_k(0)", t.label);
        for k in 1..=t.grid.n_points {
            let x = TenorId(xi);
            println!(
                "{k}\t{:.6}\t{:.6}\t{:.6}\t{:.6}",
                t.grid.date(k),
                curves.tenor_discount(x, k)?,
                curves.ois_forward(x, k)?,
                curves.libor(x, k)?
            );
        }
    }
    Ok(())
}

/// Writes `model.json` and prints the fitted rows coordinate by coordinate.
pub fn build(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let model = cfg.fit()?;
    write_file(out, "model.json", &model.to_json())?;
    for j in 0..model.spec.dim() {
        println!("coordinate {j}\n{}", model.table(j));
    }
    Ok(())
}

/// Writes `prices.json`; instruments that fail get an error record.
pub fn price(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let model = cfg.model()?;
    let records: Vec<PriceRecord> = cfg.instruments.iter().map(|i| price_one(&model, i, cfg)).collect();
    write_file(out, "prices.json", &to_json(&records))?;
    println!("instrument\tprice_bp\timplied_vol\tintercept");
    for r in &records {
        match &r.error {
            Some(e) => println!("{}\terror: {}", r.instrument, e.message),
            None => println!(
                "{}\t{}\t{}\t{}",
                r.instrument,
                fmt6(r.price_bp),
                fmt6(r.implied_vol),
                fmt6(r.boundary.as_ref().map(|b| b.intercept))
            ),
        }
    }
    let failed = records.iter().filter(|r| r.error.is_some()).count();
    if failed > 0 {
        return Err(CliError::Numerical(format!("{failed} of {} instruments failed", records.len())));
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct McRecord {
    instrument: &'static str,
    params: Value,
    paths: usize,
    seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    mean_bp: Option<f64>,
    /// `null` when fewer than two paths make the error undefined.
    #[serde(skip_serializing_if = "Option::is_none")]
    std_error_bp: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    std_error_defined: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    approx_bp: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    linear_mean_bp: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    linear_std_error_bp: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    difference_bp: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    difference_std_error_bp: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<ErrorRecord>,
}

fn mc_one(model: &ModelParams, inst: &Instrument, cfg: &RunConfig) -> McRecord {
    let mut rec = McRecord {
        instrument: inst.name(),
        params: inst.params(),
        paths: cfg.mc.paths,
        seed: cfg.mc.seed,
        mean_bp: None,
        std_error_bp: None,
        std_error_defined: None,
        approx_bp: None,
        linear_mean_bp: None,
        linear_std_error_bp: None,
        difference_bp: None,
        difference_std_error_bp: None,
        error: None,
    };
    let result = approx_price(model, inst, cfg).and_then(|a| {
        let boundary = a.boundary.as_ref();
        let mc = match inst {
            Instrument::Caplet(s) => (mc_caplet(model, s, &cfg.mc)?, None, None),
            Instrument::Swaption(s) => {
                let e = mc_swaption(model, s, boundary, &cfg.mc)?;
                (e.exact, e.linear, e.difference)
            }
            Instrument::BasisSwaption(s) => {
                let e = mc_basis_swaption(model, s, boundary, &cfg.mc)?;
                (e.exact, e.linear, e.difference)
            }
        };
        Ok((a.price, mc))
    });
    match result {
        Ok((approx, (exact, linear, diff))) => {
            rec.approx_bp = Some(approx * BP);
            rec.mean_bp = Some(exact.mean * BP);
            rec.std_error_bp = Some(exact.std_error * BP);
            rec.std_error_defined = Some(exact.std_error.is_finite());
            let split = |e: Option<McEstimate>| (e.map(|e| e.mean * BP), e.map(|e| e.std_error * BP));
            (rec.linear_mean_bp, rec.linear_std_error_bp) = split(linear);
            (rec.difference_bp, rec.difference_std_error_bp) = split(diff);
        }
        Err(e) => rec.error = Some((&e).into()),
    }
    rec
}

/// Writes `mc.json` and, if requested, `paths.csv`.
pub fn mc(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let model = cfg.model()?;
    cfg.mc.validate()?;
    let records: Vec<McRecord> = cfg.instruments.iter().map(|i| mc_one(&model, i, cfg)).collect();
    write_file(out, "mc.json", &to_json(&records))?;
    println!("instrument\tmean_bp\tstd_error_bp\tapprox_bp\tdifference_bp");
    for r in &records {
        match &r.error {
            Some(e) => println!("{}\terror: {}", r.instrument, e.message),
            None => println!(
                "{}\t{}\t{}\t{}\t{}",
                r.instrument,
                fmt6(r.mean_bp),
                fmt6(r.std_error_bp),
                fmt6(r.approx_bp),
                fmt6(r.difference_bp)
            ),
        }
    }
    if let Some(dump) = &cfg.dump_paths {
        let sim = SimConfig { paths: dump.paths, ..cfg.mc };
        let paths = simulate_paths(&model.spec, &dump.dates, &sim)?;
        let mut csv = String::from("path,date,factor,value\n");
        for (p, states) in paths.iter().enumerate() {
            for (date, state) in dump.dates.iter().zip(states) {
                for (f, v) in state.iter().enumerate() {
                    csv.push_str(&format!("{p},{},{f},{}\n", cell(*date), cell(*v)));
                }
            }
        }
        write_file(out, "paths.csv", &csv)?;
    }
    let failed = records.iter().filter(|r| r.error.is_some()).count();
    if failed > 0 {
        return Err(CliError::Numerical(format!("{failed} of {} instruments failed", records.len())));
    }
    Ok(())
}

/// Writes `model.json` and `calibration_report.json`.
pub fn calibrate(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let path = cfg.surface.as_ref().ok_or_else(|| CliError::Config("config has no `surface` file".into()))?;
    let path = cfg.resolve(path);
    if !path.exists() {
        return Err(CliError::Io {
            path: path.clone(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "surface file not found"),
        });
    }
    let surface = CapletSurface::from_csv_path(&path)?;
    let curves = cfg.curveset()?;
    let layout = cfg.layout(&curves)?;
    let mut calib = cfg.calibration.clone();
    calib.mode = cfg.mode();
    let result = calibrate_sequential(&surface, &layout, cfg.spec()?, &curves, &calib)?;
    write_file(out, "model.json", &result.model.to_json())?;
    write_file(out, "calibration_report.json", &to_json(&result.report))?;
    println!("maturity\tquotes\trms_vol_points\titerations");
    for m in &result.report.maturities {
        println!("{}\t{}\t{:.6}\t{}", m.maturity, m.quotes, 100.0 * m.rms, m.iterations);
    }
    Ok(())
}

/// Writes `correlations.csv`, a square matrix over the requested rates.
pub fn correlations(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let req = cfg
        .correlations
        .as_ref()
        .ok_or_else(|| CliError::Config("config has no `correlations` section".into()))?;
    let model = cfg.model()?;
    let x0 = model.spec.initial_state();
    let label = |r: &affine_libor::analytics::RateIndex| -> Result<String, CliError> {
        let t = model
            .tenors
            .get(r.tenor.0)
            .ok_or_else(|| CliError::Config(format!("tenor {} not in the model", r.tenor.0)))?;
        Ok(format!("{}:{}", t.label, r.k))
    };
    let labels = req.rates.iter().map(label).collect::<Result<Vec<_>, _>>()?;
    let mut csv = format!(",{}\n", labels.join(","));
    for (a, la) in req.rates.iter().zip(&labels) {
        let mut row = vec![la.clone()];
        for b in &req.rates {
            let c = match req.kind {
                CorrelationKind::Terminal => terminal_correlation(&model, *a, *b, req.date)?,
                CorrelationKind::Instantaneous => {
                    if a.tenor != b.tenor {
                        return Err(CliError::Config("instantaneous correlations need a single tenor".into()));
                    }
                    inst_correlation(&model, a.tenor, a.k, b.k, req.date, &x0)?
                }
            };
            row.push(cell(c.value));
        }
        csv.push_str(&row.join(","));
        csv.push('\n');
    }
    write_file(out, "correlations.csv", &csv)?;
    print!("{csv}");
    Ok(())
}
