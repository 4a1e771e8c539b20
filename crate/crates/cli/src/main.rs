//! Experiment runner for the operator laboratory: evaluates nonlocal
//! p-Laplace operators and their mean-value kernels on the field
//! corpus, sweeps expansion residuals and sharp-exponent limits, and
//! emits reproducible CSV tables with JSON summaries.

mod config;
mod output;
mod registry;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fraclab_core::asymptotics;
use fraclab_core::constants::Constants;
use fraclab_core::fields::{Field, FieldOps};
use fraclab_core::geom::Vector;
use fraclab_core::local_ops::Variant;
use fraclab_core::quadrature::QuadratureSpec;
use fraclab_core::{Error, Result};
use serde::Serialize;

use config::{ExperimentConfig, FieldConfig, OutputConfig};
use output::{Cell, Format, Summary};
use registry::Ctx;

#[derive(Parser)]
#[command(
    name = "fraclab",
    version,
    about = "Numerical laboratory for fractional p-Laplace operators and their mean-value kernels"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate one operator at a point
    Eval(RunArgs),
    /// Sweep an expansion residual over a radius grid and fit its decay order
    Verify(RunArgs),
    /// Drive an operator along exponents toward s = 1 and compare with its local limit
    Limit(RunArgs),
    /// Tabulate the auxiliary annular-kernel integrals over a radius grid
    Appendix(AppendixArgs),
    /// Print the normalization constants for one (n, s, p) triple
    Constants(ConstantsArgs),
    /// List the field corpus with parameters and far-field profiles
    Corpus,
}

#[derive(Args)]
struct RunArgs {
    /// Operator name; a trailing + or - picks the one-sided variant
    operator: String,

    /// JSON experiment config; flags override its entries
    #[arg(long)]
    config: Option<PathBuf>,

    /// Corpus field name (see `fraclab corpus`)
    #[arg(long)]
    field: Option<String>,

    /// Constant field level
    #[arg(long)]
    level: Option<f64>,

    /// Affine field base value
    #[arg(long)]
    base: Option<f64>,

    /// Affine field slope, comma-separated
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    slope: Option<Vec<f64>>,

    /// Field center, comma-separated
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    center: Option<Vec<f64>>,

    /// Gaussian width
    #[arg(long)]
    width: Option<f64>,

    /// Cone amplitude
    #[arg(long)]
    amplitude: Option<f64>,

    /// Cone vertical offset
    #[arg(long)]
    offset: Option<f64>,

    /// Cone pole, comma-separated
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pole: Option<Vec<f64>>,

    /// Bump support radius
    #[arg(long)]
    radius: Option<f64>,

    /// Windowed polynomial constant term
    #[arg(long)]
    constant: Option<f64>,

    /// Windowed polynomial linear coefficients, comma-separated
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    linear: Option<Vec<f64>>,

    /// Windowed polynomial quadratic coefficients, row-major, up to nine
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    quadratic: Option<Vec<f64>>,

    /// Windowed polynomial inner plateau radius
    #[arg(long)]
    inner: Option<f64>,

    /// Windowed polynomial outer cutoff radius
    #[arg(long)]
    outer: Option<f64>,

    /// Cosine wave vector, comma-separated
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    wave: Option<Vec<f64>>,

    /// Dimension (1, 2, or 3)
    #[arg(long)]
    n: Option<usize>,

    /// Fractional exponent in (0, 1)
    #[arg(long)]
    s: Option<f64>,

    /// Integrability exponent, at least 2
    #[arg(long)]
    p: Option<f64>,

    /// Radius for mean-value operators; defaults to an eighth of the
    /// smoothness radius at the evaluation point
    #[arg(long)]
    r: Option<f64>,

    /// Evaluation point, comma-separated
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    x: Option<Vec<f64>>,

    /// Variant at critical points: plus, minus, or auto
    #[arg(long)]
    variant: Option<String>,

    /// Ascending radius grid for verify, comma-separated; defaults to
    /// eight dyadic radii below an eighth of the smoothness radius
    #[arg(long, value_delimiter = ',')]
    r_grid: Option<Vec<f64>>,

    /// Ascending exponent grid for limit, comma-separated
    #[arg(long, value_delimiter = ',')]
    s_grid: Option<Vec<f64>>,

    /// Slope tolerance or slack (verify), relative tolerance (limit)
    #[arg(long)]
    tolerance: Option<f64>,

    /// Angular quadrature order
    #[arg(long)]
    sphere_order: Option<usize>,

    /// Nodes on panels with an endpoint singularity
    #[arg(long)]
    jacobi_nodes: Option<usize>,

    /// Nodes on smooth panels
    #[arg(long)]
    smooth_nodes: Option<usize>,

    /// Absolute tolerance allotted to each dropped far-field tail
    #[arg(long)]
    truncation_tol: Option<f64>,

    /// Ceiling on truncation radii
    #[arg(long)]
    max_radius_cap: Option<f64>,

    /// Re-run integrals at doubled resolution and fail on disagreement
    #[arg(long)]
    self_check: bool,

    /// Output directory; defaults to $FRACLAB_OUT_DIR, then the working
    /// directory
    #[arg(long)]
    out_dir: Option<PathBuf>,

    /// Artifacts to write: csv, json, both, or none
    #[arg(long)]
    format: Option<String>,
}

#[derive(Args)]
struct AppendixArgs {
    /// JSON experiment config; flags override its entries
    #[arg(long)]
    config: Option<PathBuf>,

    /// Fractional exponent in (0, 1)
    #[arg(long)]
    s: Option<f64>,

    /// Ascending radius grid, comma-separated; defaults to eight dyadic
    /// radii from 0.001
    #[arg(long, value_delimiter = ',')]
    r_grid: Option<Vec<f64>>,

    /// Output directory; defaults to $FRACLAB_OUT_DIR, then the working
    /// directory
    #[arg(long)]
    out_dir: Option<PathBuf>,

    /// Artifacts to write: csv, json, both, or none
    #[arg(long)]
    format: Option<String>,
}

#[derive(Args)]
struct ConstantsArgs {
    /// Dimension (1, 2, or 3)
    #[arg(long, default_value_t = 2)]
    n: usize,

    /// Fractional exponent in (0, 1)
    #[arg(long, default_value_t = 0.5)]
    s: f64,

    /// Integrability exponent, at least 2
    #[arg(long, default_value_t = 3.0)]
    p: f64,

    /// Output directory; defaults to $FRACLAB_OUT_DIR, then the working
    /// directory
    #[arg(long)]
    out_dir: Option<PathBuf>,

    /// Artifacts to write in addition to the table: csv, json, both, or
    /// none
    #[arg(long)]
    format: Option<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error[{}]: {e}", code_slug(&e));
            ExitCode::from(exit_code(&e))
        }
    }
}

fn dispatch(command: Command) -> Result<bool> {
    match command {
        Command::Eval(args) => run_eval(args),
        Command::Verify(args) => run_verify(args),
        Command::Limit(args) => run_limit(args),
        Command::Appendix(args) => run_appendix(args),
        Command::Constants(args) => run_constants(args),
        Command::Corpus => run_corpus(),
    }
}

fn code_slug(e: &Error) -> &'static str {
    match e {
        Error::Domain(_) => "domain",
        Error::DegenerateWeight(_) => "degenerate-weight",
        Error::TailDivergent(_) => "tail-divergent",
        Error::NearOrigin(_) => "near-origin",
        Error::Convergence(_) => "convergence",
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Domain(_) => 2,
        _ => 3,
    }
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "pass"
    } else {
        "FAIL"
    }
}

/// A fully resolved run: the field, the operator context, and the
/// artifact plumbing.
struct Experiment {
    command: &'static str,
    u: Field,
    operator: String,
    n: usize,
    s: f64,
    p: f64,
    r: f64,
    x: Vector,
    variant: Variant,
    r_grid: Vec<f64>,
    s_grid: Vec<f64>,
    tolerance: Option<f64>,
    spec: QuadratureSpec,
    out_dir: PathBuf,
    format: Format,
    echo: ExperimentConfig,
}

impl RunArgs {
    /// The flag side of the config merge; quadrature flags are applied
    /// separately so partial overrides keep the file's other knobs.
    fn as_config(&self) -> ExperimentConfig {
        ExperimentConfig {
            field: Some(FieldConfig {
                name: self.field.clone(),
                level: self.level,
                base: self.base,
                slope: self.slope.clone(),
                center: self.center.clone(),
                width: self.width,
                amplitude: self.amplitude,
                offset: self.offset,
                pole: self.pole.clone(),
                radius: self.radius,
                constant: self.constant,
                linear: self.linear.clone(),
                quadratic: self.quadratic.clone(),
                inner: self.inner,
                outer: self.outer,
                wave: self.wave.clone(),
            }),
            operator: Some(self.operator.clone()),
            n: self.n,
            s: self.s,
            p: self.p,
            r: self.r,
            x: self.x.clone(),
            variant: self.variant.clone(),
            r_grid: self.r_grid.clone(),
            s_grid: self.s_grid.clone(),
            tolerance: self.tolerance,
            quadrature: None,
            output: Some(OutputConfig {
                dir: self.out_dir.clone(),
                format: self.format.clone(),
            }),
        }
    }

    fn apply_quadrature(&self, spec: &mut QuadratureSpec) {
        if let Some(v) = self.sphere_order {
            spec.sphere_order = v;
        }
        if let Some(v) = self.jacobi_nodes {
            spec.jacobi_nodes = v;
        }
        if let Some(v) = self.smooth_nodes {
            spec.smooth_nodes = v;
        }
        if let Some(v) = self.truncation_tol {
            spec.truncation_tol = v;
        }
        if let Some(v) = self.max_radius_cap {
            spec.max_radius_cap = v;
        }
        if self.self_check {
            spec.self_check = true;
        }
    }
}

impl Experiment {
    fn build(args: RunArgs, command: &'static str) -> Result<Experiment> {
        let file = match &args.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        let mut cfg = file.merged_with(args.as_config());
        let mut spec = cfg.quadrature();
        args.apply_quadrature(&mut spec);
        cfg.quadrature = Some(spec);

        let u = cfg.build_field()?;
        let n = cfg.n();
        let x = cfg.x(n);
        let eta = u.smooth_radius(x);
        let variant = registry::parse_variant(cfg.variant.as_deref().unwrap_or("auto"))?;
        let out = cfg.output.clone().unwrap_or_default();
        let format = match out.format.as_deref() {
            Some(text) => Format::parse(text)?,
            None => Format::Both,
        };
        let operator = cfg
            .operator
            .clone()
            .expect("the positional operator argument always fills this");
        Ok(Experiment {
            command,
            operator,
            n,
            s: cfg.s(),
            p: cfg.p(),
            r: cfg.r(eta),
            x,
            variant,
            r_grid: cfg.r_grid(eta),
            s_grid: cfg.s_grid(),
            tolerance: cfg.tolerance,
            spec,
            out_dir: output::resolve_out_dir(None, out.dir.clone()),
            format,
            echo: cfg.populated(eta),
            u,
        })
    }

    fn ctx(&self) -> Ctx<'_> {
        Ctx {
            u: &self.u,
            x: self.x,
            n: self.n,
            s: self.s,
            p: self.p,
            r: self.r,
            variant: self.variant,
            spec: self.spec,
        }
    }

    fn artifact(&self, ext: &str) -> PathBuf {
        self.out_dir
            .join(format!("{}-{}.{ext}", self.command, self.operator))
    }

    fn emit_csv(&self, header: &[&str], rows: Vec<Vec<Cell>>) -> Result<()> {
        if self.format.wants_csv() {
            output::write_csv(&self.artifact("csv"), header, &rows)?;
        }
        Ok(())
    }

    fn emit_json<R: Serialize>(&self, report: R, pass: bool) -> Result<()> {
        if self.format.wants_json() {
            let summary = Summary {
                command: self.command.into(),
                operator: self.operator.clone(),
                config: self.echo.clone(),
                report,
                pass,
            };
            output::write_json(&self.artifact("json"), &summary)?;
        }
        Ok(())
    }
}

fn run_eval(args: RunArgs) -> Result<bool> {
    let exp = Experiment::build(args, "eval")?;
    let ev = registry::evaluate(&exp.operator, &exp.ctx())?;
    let note = if ev.tail_truncated {
        " (far tail truncated at the radius cap)"
    } else {
        ""
    };
    println!("{} = {}{note}", exp.operator, output::fmt_float(ev.value));
    exp.emit_csv(
        &["r", "s", "value", "tail_truncated"],
        vec![vec![
            Cell::Float(exp.r),
            Cell::Float(exp.s),
            Cell::Float(ev.value),
            Cell::Bool(ev.tail_truncated),
        ]],
    )?;
    exp.emit_json(&ev, true)?;
    Ok(true)
}

fn run_verify(args: RunArgs) -> Result<bool> {
    let exp = Experiment::build(args, "verify")?;
    let report = registry::verify(&exp.operator, &exp.ctx(), &exp.r_grid, exp.tolerance)?;
    match report.fitted_slope {
        Some(slope) => println!(
            "verify {}: {} (fitted slope {slope:.4} +/- {:.4}, expected {:.4})",
            exp.operator,
            verdict(report.pass),
            report.slope_ci,
            report.expected_slope
        ),
        None => println!(
            "verify {}: pass (residuals saturated below the measurement floor)",
            exp.operator
        ),
    }
    let rows = report
        .abscissae
        .iter()
        .zip(&report.residuals)
        .map(|(&r, &res)| vec![Cell::Float(r), Cell::Float(res)])
        .collect();
    exp.emit_csv(&["r", "residual"], rows)?;
    let pass = report.pass;
    exp.emit_json(&report, pass)?;
    Ok(pass)
}

fn run_limit(args: RunArgs) -> Result<bool> {
    let exp = Experiment::build(args, "limit")?;
    let report = registry::limit(&exp.operator, &exp.ctx(), &exp.s_grid, exp.tolerance)?;
    println!(
        "limit {}: {} (sharpest value {}, target {}, relative error {:.3e})",
        exp.operator,
        verdict(report.pass),
        output::fmt_float(*report.values.last().unwrap()),
        output::fmt_float(report.target),
        report.relative_errors.last().unwrap()
    );
    let rows = report
        .abscissae
        .iter()
        .zip(report.values.iter().zip(&report.relative_errors))
        .map(|(&s, (&v, &err))| vec![Cell::Float(s), Cell::Float(v), Cell::Float(err)])
        .collect();
    exp.emit_csv(&["s", "value", "relative_error"], rows)?;
    let pass = report.pass;
    exp.emit_json(&report, pass)?;
    Ok(pass)
}

fn run_appendix(args: AppendixArgs) -> Result<bool> {
    let file = match &args.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    let flags = ExperimentConfig {
        s: args.s,
        r_grid: args.r_grid.clone(),
        output: Some(OutputConfig {
            dir: args.out_dir.clone(),
            format: args.format.clone(),
        }),
        ..ExperimentConfig::default()
    };
    let cfg = file.merged_with(flags);
    let s = cfg.s.unwrap_or(0.5);
    let grid: Vec<f64> = cfg
        .r_grid
        .clone()
        .unwrap_or_else(|| (0..8).map(|k| 1e-3 * 2f64.powi(k)).collect());
    let report = asymptotics::auxiliary_checks(s, &grid)?;
    println!(
        "appendix: head spread {:.4}, excess slope {}, excess coefficient {:.6} (s/2 = {:.6})",
        report.head_spread,
        report
            .excess_slope
            .map_or("undefined".into(), |m| format!("{m:.4}")),
        report.excess_coefficient,
        0.5 * s
    );
    let out = cfg.output.clone().unwrap_or_default();
    let format = match out.format.as_deref() {
        Some(text) => Format::parse(text)?,
        None => Format::Both,
    };
    let dir = output::resolve_out_dir(None, out.dir.clone());
    if format.wants_csv() {
        let rows: Vec<Vec<Cell>> = grid
            .iter()
            .enumerate()
            .map(|(i, &r)| {
                vec![
                    Cell::Float(r),
                    Cell::Float(report.head_values[i]),
                    Cell::Float(report.excess_values[i]),
                    Cell::Float(report.remainder_values[i]),
                ]
            })
            .collect();
        output::write_csv(
            &dir.join("appendix-kernel-integrals.csv"),
            &["r", "head", "excess", "remainder"],
            &rows,
        )?;
    }
    if format.wants_json() {
        let summary = Summary {
            command: "appendix".into(),
            operator: "kernel-integrals".into(),
            config: cfg.clone(),
            report: &report,
            pass: true,
        };
        output::write_json(&dir.join("appendix-kernel-integrals.json"), &summary)?;
    }
    Ok(true)
}

fn run_constants(args: ConstantsArgs) -> Result<bool> {
    let c = Constants::new(args.n, args.s, args.p)?;
    let f = output::fmt_float;
    let mut rows: Vec<(String, String)> = vec![
        ("n".into(), c.n.to_string()),
        ("s".into(), f(c.s)),
        ("p".into(), f(c.p)),
        ("mean_kernel".into(), f(c.mean_kernel)),
        ("normalizer".into(), f(c.normalizer)),
        ("radial_tail".into(), f(c.radial_tail)),
        ("infinity_tail".into(), f(c.infinity_tail)),
        ("gamma_dir".into(), f(c.gamma_dir)),
        ("gamma_dir_axial".into(), f(c.gamma_dir_axial)),
        ("sphere_moment".into(), f(c.sphere_moment)),
    ];
    if let Some(cap) = c.cap {
        rows.push(("cap_threshold".into(), f(cap.threshold)));
        rows.push(("cap_alpha".into(), f(cap.alpha)));
        rows.push(("cap_beta".into(), f(cap.beta)));
        rows.push(("cap_gamma".into(), f(cap.gamma_cap)));
    }
    output::print_table(&rows);

    let format = match args.format.as_deref() {
        Some(text) => Format::parse(text)?,
        None => Format::None,
    };
    let dir = output::resolve_out_dir(args.out_dir.clone(), None);
    if format.wants_csv() {
        let table: Vec<Vec<Cell>> = rows
            .iter()
            .map(|(k, v)| {
                let cell = if k == "n" {
                    Cell::Int(v.parse::<i64>().unwrap())
                } else {
                    Cell::Float(v.parse::<f64>().unwrap())
                };
                vec![Cell::Str(k.clone()), cell]
            })
            .collect();
        output::write_csv(&dir.join("constants.csv"), &["name", "value"], &table)?;
    }
    if format.wants_json() {
        let map: serde_json::Map<String, serde_json::Value> = rows
            .iter()
            .map(|(k, v)| {
                let value = if k == "n" {
                    serde_json::json!(v.parse::<i64>().unwrap())
                } else {
                    serde_json::json!(v.parse::<f64>().unwrap())
                };
                (k.clone(), value)
            })
            .collect();
        let text = serde_json::to_string_pretty(&map)
            .map_err(|e| Error::Domain(format!("cannot serialize constants: {e}")))?;
        std::fs::write(dir.join("constants.json"), format!("{text}\n"))
            .map_err(|e| Error::Domain(format!("cannot write constants.json: {e}")))?;
    }
    Ok(true)
}

fn run_corpus() -> Result<bool> {
    for (name, params, tail) in config::CORPUS {
        println!("{name:<14} {tail}");
        println!("{:<14} defaults: {params}", "");
    }
    Ok(true)
}
