//! Command implementations. Every report write is atomic, and no report
//! carries a timestamp: wall-clock metadata goes to `run_meta.json` only, so
//! a rerun with the same config and seed produces byte-identical reports.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use strongfrac::characteristic::{
    bump_characteristic_sup, bump_characteristic_sup_with_table, PowerWeightSpec, WeightPair,
};
use strongfrac::checks::{builtin_calibration, run_all, Calibration, CheckResult, CHECK_NAMES};
use strongfrac::error::{Error, Result};
use strongfrac::grid::{ExponentConfig, GridFunction, ProductGrid, RectangleFilter};
use strongfrac::io::{
    read_grid_function, write_decay_csv, write_grid_function, write_json_atomic,
    write_rectangle_table_csv, OperatorMeta,
};
use strongfrac::operator::{strong_fractional_integral, strong_fractional_integral_direct};
use strongfrac::verify::{
    build_corpus, characteristic_decay_profile, cone_norm_profile, fit_decay_rate, weighted_norm,
    CorpusKind, DecayReport, QuantityKind,
};

use crate::config::{
    CorpusKindSpec, FilterSpec, FunctionSpec, ProfileSpec, RunConfig, WeightSpec,
};

pub struct Ctx {
    pub config: RunConfig,
    pub out_dir: PathBuf,
    pub command: &'static str,
    pub threads: Option<usize>,
}

impl Ctx {
    fn out(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    fn write_run_meta(&self) -> Result<()> {
        #[derive(Serialize)]
        struct RunMeta<'a> {
            command: &'a str,
            unix_time_seconds: u64,
            seed: u64,
            threads: Option<usize>,
        }
        let meta = RunMeta {
            command: self.command,
            unix_time_seconds: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            seed: self.config.seed,
            threads: self.threads,
        };
        write_json_atomic(&self.out("run_meta.json"), &meta)
    }
}

pub fn build_grid(config: &RunConfig) -> Result<Arc<ProductGrid>> {
    Ok(Arc::new(config.grid.try_into()?))
}

pub fn build_exponents(config: &RunConfig) -> Result<ExponentConfig> {
    let e = &config.exponents;
    ExponentConfig::new(config.grid.n, config.grid.m, e.alpha, e.beta, e.p, e.q, e.theta)
}

pub fn build_weights(config: &RunConfig, grid: &Arc<ProductGrid>) -> Result<WeightPair> {
    match &config.weights {
        WeightSpec::Unit => Ok(WeightPair::unit(grid)),
        WeightSpec::Power { a, b, c, d, delta } => {
            let spec = PowerWeightSpec {
                a: *a,
                b: *b,
                c: *c,
                d: *d,
                delta: delta.unwrap_or_else(|| grid.step_x()),
            };
            spec.sample(grid)
        }
        WeightSpec::File { omega, sigma } => {
            let omega = read_grid_function(omega)?;
            let sigma = read_grid_function(sigma)?;
            WeightPair::new(omega, sigma)
        }
    }
}

pub fn build_function(config: &RunConfig, grid: &Arc<ProductGrid>) -> Result<GridFunction> {
    match &config.function {
        FunctionSpec::Zero => Ok(GridFunction::zeros(grid)),
        FunctionSpec::Constant { value } => GridFunction::constant(grid, *value),
        FunctionSpec::Random => {
            let corpus = build_corpus(grid, CorpusKind::Random, 1, config.seed)?;
            Ok(corpus.functions.into_iter().next().expect("one member"))
        }
        FunctionSpec::SingleCell { ix, iy } => GridFunction::single_cell(grid, *ix, *iy),
        FunctionSpec::File { path } => read_grid_function(path),
    }
}

fn corpus_kind(spec: CorpusKindSpec) -> CorpusKind {
    match spec {
        CorpusKindSpec::DyadicIndicators => CorpusKind::DyadicIndicators,
        CorpusKindSpec::Random => CorpusKind::Random,
        CorpusKindSpec::SingleCells => CorpusKind::SingleCells,
    }
}

fn filter(spec: FilterSpec) -> RectangleFilter {
    match spec {
        FilterSpec::All => RectangleFilter::All,
        FilterSpec::Diagonal => RectangleFilter::Diagonal,
        FilterSpec::Eccentricity { ell } => RectangleFilter::Eccentricity(ell),
    }
}

fn rel_l2(a: &GridFunction, b: &GridFunction) -> Result<f64> {
    let unit = GridFunction::constant(a.grid(), 1.0)?;
    let diff = a.add_scaled(b, -1.0)?;
    let num = weighted_norm(&diff, &unit, 2.0)?;
    let den = weighted_norm(b, &unit, 2.0)?;
    Ok(if den == 0.0 { num } else { num / den })
}

pub fn cmd_eval(ctx: &Ctx) -> Result<i32> {
    let grid = build_grid(&ctx.config)?;
    let cfg = build_exponents(&ctx.config)?;
    let f = build_function(&ctx.config, &grid)?;
    let out = strong_fractional_integral(&f, &cfg)?;

    let oracle_discrepancy = if ctx.config.oracle {
        let direct = strong_fractional_integral_direct(&f, &cfg)?;
        let disc = rel_l2(&out.result, &direct.result)?;
        println!("oracle discrepancy (relative l2): {disc:.3e}");
        Some(disc)
    } else {
        None
    };

    write_grid_function(&out.result, &ctx.out("output"))?;
    let meta = OperatorMeta {
        grid: ctx.config.grid,
        cfg,
        l_range_used: out.l_range_used,
        excluded_mass: out.excluded_mass,
        oracle_discrepancy,
    };
    write_json_atomic(&ctx.out("output_meta.json"), &meta)?;
    ctx.write_run_meta()?;
    println!("wrote {}", ctx.out("output.bin").display());
    Ok(0)
}

pub fn cmd_characteristic(ctx: &Ctx) -> Result<i32> {
    let grid = build_grid(&ctx.config)?;
    let cfg = build_exponents(&ctx.config)?;
    let w = build_weights(&ctx.config, &grid)?;
    let t = ctx.config.exponents.t;
    let fam = filter(ctx.config.filter);
    let mut report = if ctx.config.table {
        bump_characteristic_sup_with_table(&w, &cfg, t, fam)?
    } else {
        bump_characteristic_sup(&w, &cfg, t, fam)?
    };
    if let Some(table) = report.per_rectangle.take() {
        write_rectangle_table_csv(
            &ctx.out("characteristic.csv"),
            &table,
            grid.n(),
            grid.m(),
        )?;
    }
    write_json_atomic(&ctx.out("characteristic.json"), &report)?;
    ctx.write_run_meta()?;
    println!(
        "characteristic sup {:.6e} over {} rectangles (argmax Q side {}, P side {})",
        report.value, report.family_size, report.argmax.q_side, report.argmax.p_side
    );
    Ok(0)
}

fn decay_outputs(ctx: &Ctx, name: &str, report: &DecayReport) -> Result<()> {
    write_json_atomic(&ctx.out(&format!("decay_{name}.json")), report)?;
    write_decay_csv(&ctx.out(&format!("decay_{name}.csv")), report)
}

pub fn cmd_cone_decay(ctx: &Ctx, profile: ProfileSpec) -> Result<i32> {
    let grid = build_grid(&ctx.config)?;
    let cfg = build_exponents(&ctx.config)?;
    let [l_min, l_max] = ctx.config.l_range;
    match profile {
        ProfileSpec::Synthetic => {
            let slope = ctx.config.synthetic_slope;
            let report = DecayReport {
                kind: QuantityKind::Characteristic,
                ell_values: (l_min..=l_max).collect(),
                quantities: (l_min..=l_max)
                    .map(|l| 2f64.powf(-slope * l.abs() as f64))
                    .collect(),
                fitted_epsilon: None,
                fit_residual: None,
                dropped: vec![],
            };
            let fitted = fit_decay_rate(&report)?;
            let eps = fitted.fitted_epsilon.expect("fit populated");
            decay_outputs(ctx, "synthetic", &fitted)?;
            ctx.write_run_meta()?;
            println!("synthetic self-test: injected {slope}, fitted {eps}");
            if (eps - slope).abs() > 1e-9 {
                println!("FAIL synthetic slope recovery");
                return Ok(1);
            }
            Ok(0)
        }
        ProfileSpec::Characteristic => {
            let w = build_weights(&ctx.config, &grid)?;
            let profile =
                characteristic_decay_profile(&w, &cfg, ctx.config.exponents.t, (l_min, l_max))?;
            let fitted = fit_or_keep(profile)?;
            decay_outputs(ctx, "characteristic", &fitted)?;
            ctx.write_run_meta()?;
            print_fit("characteristic", &fitted);
            Ok(0)
        }
        ProfileSpec::Norm => {
            let w = build_weights(&ctx.config, &grid)?;
            let corpus = build_corpus(
                &grid,
                corpus_kind(ctx.config.corpus.kind),
                ctx.config.corpus.count,
                ctx.config.seed,
            )?;
            let profile = cone_norm_profile(&w, &cfg, (l_min, l_max), &corpus)?;
            let fitted = fit_or_keep(profile)?;
            decay_outputs(ctx, "norm", &fitted)?;
            ctx.write_run_meta()?;
            print_fit("norm", &fitted);
            Ok(0)
        }
    }
}

/// Fit when enough entries survive; otherwise keep the unfitted profile.
fn fit_or_keep(report: DecayReport) -> Result<DecayReport> {
    match fit_decay_rate(&report) {
        Ok(fitted) => Ok(fitted),
        Err(Error::FitTooFewPoints { .. }) => Ok(report),
        Err(e) => Err(e),
    }
}

fn print_fit(name: &str, report: &DecayReport) {
    match (report.fitted_epsilon, report.fit_residual) {
        (Some(eps), Some(res)) => {
            println!("{name} profile: {} entries, fitted decay rate {eps:.4} (residual {res:.4})",
                report.quantities.len())
        }
        _ => println!(
            "{name} profile: {} entries, too few for a decay fit",
            report.quantities.len()
        ),
    }
}

pub fn cmd_verify(ctx: &Ctx, list: bool) -> Result<i32> {
    if list {
        for name in CHECK_NAMES {
            println!("{name}");
        }
        return Ok(0);
    }
    let calibration: Calibration = match &ctx.config.calibration_path {
        Some(path) => serde_json::from_str(&std::fs::read_to_string(path)?)?,
        None => builtin_calibration(),
    };
    let results = run_all(&calibration);
    for r in &results {
        println!("{} {} — {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.details);
    }
    #[derive(Serialize)]
    struct Summary {
        all_passed: bool,
        calibration: Calibration,
        results: Vec<CheckResult>,
    }
    let all_passed = results.iter().all(|r| r.passed);
    let summary = Summary { all_passed, calibration, results };
    write_json_atomic(&ctx.out("verify_summary.json"), &summary)?;
    ctx.write_run_meta()?;
    Ok(if all_passed { 0 } else { 1 })
}

/// Exit code for a library error: resource guards map to 3, everything else
/// is a configuration or input problem.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::GuardExceeded { .. } => 3,
        _ => 2,
    }
}

pub fn ensure_out_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path)?;
    Ok(())
}
