//! Command-line front end: single-point queries, grid sweeps emitting CSV or
//! JSON, and the tail / composition experiments.
//!
//! Exit codes: 0 success, 2 parameter-domain error, 3 applicability error,
//! 64 unknown flag / bad usage.

use std::ffi::OsString;
use std::fs;
use std::io::Write;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::closed_form::{
    approx_dp_bound, eps0_for_frequency, eps_closed_form, eps_krr, sgd_accounting, LocalPrivacy,
};
use crate::clones::{default_stride, delta_upper, eps_upper, SearchConfig};
use crate::dist::CloneInstance;
use crate::renyi::{
    compose_via_advanced, compose_via_rdp, default_alpha_grid, rdp_clones, rdp_clones_curve,
    rdp_compose, rdp_to_dp,
};
use crate::rr_lower::{eps_lower_2rr, tail_sweep};
use crate::{Error, Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_PARAMETER: i32 = 2;
pub const EXIT_APPLICABILITY: i32 = 3;
pub const EXIT_USAGE: i32 = 64;

/// Format with 6 significant digits, deterministically (no locale).
pub fn sig6(x: f64) -> String {
    if x == 0.0 {
        return "0.00000".to_string();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let s = format!("{:.5e}", x);
    let (mantissa, exp) = s.split_once('e').expect("exponential format");
    let exp: i32 = exp.parse().expect("exponent");
    if !(-4..=8).contains(&exp) {
        return s;
    }
    let neg = mantissa.starts_with('-');
    let digits: String = mantissa.chars().filter(|c| c.is_ascii_digit()).collect();
    let body = if exp < 0 {
        format!("0.{}{}", "0".repeat((-exp - 1) as usize), digits)
    } else if (exp as usize) >= digits.len() - 1 {
        format!("{}{}", digits, "0".repeat(exp as usize - (digits.len() - 1)))
    } else {
        format!("{}.{}", &digits[..exp as usize + 1], &digits[exp as usize + 1..])
    };
    if neg {
        format!("-{body}")
    } else {
        body
    }
}

/// Round to the printed precision (for bit-exact JSON round-trips).
fn sig6_value(x: f64) -> f64 {
    sig6(x).parse().unwrap_or(x)
}

#[derive(Parser, Debug)]
#[command(
    name = "shuffle-dp",
    version,
    about = "Privacy accountant for amplification by shuffling",
    disable_help_subcommand = true
)]
struct Cli {
    /// Worker threads for sweeps (falls back to SHUFFLE_DP_JOBS, then all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Central (eps, delta) bound for one deployment.
    Bound(BoundArgs),
    /// k-ary randomized response closed-form bound.
    Krr(KrrArgs),
    /// Certified lower bound from shuffled binary randomized response.
    #[command(name = "lower-2rr")]
    Lower2rr(LowerArgs),
    /// Renyi-DP curve of the shuffled deployment.
    Rdp(RdpArgs),
    /// Compose repeated shuffled rounds (RDP or advanced-composition route).
    Compose(ComposeArgs),
    /// Grid sweep over one variable, CSV or JSON output.
    Sweep(SweepArgs),
    /// Deep-tail sweep: lower-bound eps across a descending delta grid.
    Tail(TailArgs),
    /// Local eps0 to request for a frequency-estimation target (eps, delta).
    #[command(name = "freq-eps0")]
    FreqEps0(FreqArgs),
    /// DP-SGD noise scale and central guarantee.
    Sgd(SgdArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum BoundMethod {
    #[value(name = "closed-form")]
    ClosedForm,
    Numeric,
    #[value(name = "approx-dp")]
    ApproxDp,
}

#[derive(Args, Debug)]
struct BoundArgs {
    #[arg(long, default_value_t = 1_000_000)]
    n: u64,
    #[arg(long)]
    eps0: f64,
    #[arg(long, default_value_t = 1e-6)]
    delta: f64,
    #[arg(long, value_enum, default_value = "numeric")]
    method: BoundMethod,
    #[arg(long, default_value_t = 0.0)]
    delta0: f64,
    #[arg(long)]
    stride: Option<u64>,
    #[arg(long, default_value_t = 40)]
    iters: u32,
}

#[derive(Args, Debug)]
struct KrrArgs {
    #[arg(long, default_value_t = 1_000_000)]
    n: u64,
    #[arg(long)]
    eps0: f64,
    #[arg(long, default_value_t = 1e-6)]
    delta: f64,
    #[arg(long)]
    k: u64,
}

#[derive(Args, Debug)]
struct LowerArgs {
    #[arg(long, default_value_t = 1_000_000)]
    n: u64,
    #[arg(long)]
    eps0: f64,
    #[arg(long, default_value_t = 1e-6)]
    delta: f64,
    #[arg(long, default_value_t = 40)]
    iters: u32,
}

#[derive(Args, Debug)]
struct RdpArgs {
    #[arg(long, default_value_t = 1_000_000)]
    n: u64,
    #[arg(long)]
    eps0: f64,
    /// Single Renyi order.
    #[arg(long, conflicts_with = "alpha_grid")]
    alpha: Option<f64>,
    /// Comma-separated Renyi orders (defaults to the built-in grid).
    #[arg(long, value_delimiter = ',')]
    alpha_grid: Option<Vec<f64>>,
    #[arg(long, default_value_t = 1e-12)]
    mass_tol: f64,
    /// Also convert the curve to an (eps, delta) guarantee at this delta.
    #[arg(long)]
    delta: Option<f64>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Route {
    Rdp,
    Advanced,
}

#[derive(Args, Debug)]
struct ComposeArgs {
    #[arg(long, default_value_t = 1_000_000)]
    n: u64,
    #[arg(long)]
    eps0: f64,
    #[arg(long, default_value_t = 1e-6)]
    delta: f64,
    #[arg(long)]
    reps: u64,
    #[arg(long, value_enum)]
    route: Route,
    #[arg(long)]
    stride: Option<u64>,
    #[arg(long, default_value_t = 40)]
    iters: u32,
    #[arg(long, default_value_t = 1e-12)]
    mass_tol: f64,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum SweepVariable {
    N,
    Eps0,
    Delta,
    Alpha,
    Reps,
}

impl SweepVariable {
    fn as_str(&self) -> &'static str {
        match self {
            SweepVariable::N => "n",
            SweepVariable::Eps0 => "eps0",
            SweepVariable::Delta => "delta",
            SweepVariable::Alpha => "alpha",
            SweepVariable::Reps => "reps",
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum SweepMethod {
    #[value(name = "closed-form")]
    ClosedForm,
    Numeric,
    Krr,
    #[value(name = "lower-2rr")]
    Lower2rr,
    Rdp,
    #[value(name = "approx-dp")]
    ApproxDp,
}

impl SweepMethod {
    fn as_str(&self) -> &'static str {
        match self {
            SweepMethod::ClosedForm => "closed-form",
            SweepMethod::Numeric => "numeric",
            SweepMethod::Krr => "krr",
            SweepMethod::Lower2rr => "lower-2rr",
            SweepMethod::Rdp => "rdp",
            SweepMethod::ApproxDp => "approx-dp",
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum OutputFormat {
    Csv,
    Json,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[arg(long, value_enum)]
    variable: SweepVariable,
    /// Explicit grid values, comma separated.
    #[arg(long, value_delimiter = ',')]
    values: Option<Vec<f64>>,
    /// Log-spaced range start (with --max and --points).
    #[arg(long)]
    min: Option<f64>,
    #[arg(long)]
    max: Option<f64>,
    #[arg(long)]
    points: Option<usize>,
    #[arg(long, value_enum, value_delimiter = ',', required = true)]
    methods: Vec<SweepMethod>,
    #[arg(long, default_value_t = 1_000_000)]
    n: u64,
    #[arg(long, default_value_t = 1.0)]
    eps0: f64,
    #[arg(long, default_value_t = 1e-6)]
    delta: f64,
    #[arg(long, default_value_t = 2)]
    k: u64,
    #[arg(long, default_value_t = 1)]
    reps: u64,
    #[arg(long, default_value_t = 0.0)]
    delta0: f64,
    #[arg(long)]
    stride: Option<u64>,
    #[arg(long, default_value_t = 40)]
    iters: u32,
    #[arg(long, default_value_t = 1e-12)]
    mass_tol: f64,
    #[arg(long, value_enum, default_value = "csv")]
    format: OutputFormat,
    #[arg(long)]
    out: Option<std::path::PathBuf>,
    /// Post-pass: running minimum of upper bounds over ascending n
    /// (raw values otherwise; off by default).
    #[arg(long)]
    monotone_envelope: bool,
}

#[derive(Args, Debug)]
struct TailArgs {
    #[arg(long, default_value_t = 1_000_000)]
    n: u64,
    #[arg(long)]
    eps0: f64,
    #[arg(long)]
    delta_min: f64,
    #[arg(long)]
    delta_max: f64,
    #[arg(long, default_value_t = 50)]
    points: usize,
}

#[derive(Args, Debug)]
struct FreqArgs {
    #[arg(long, default_value_t = 1_000_000)]
    n: u64,
    #[arg(long)]
    eps: f64,
    #[arg(long, default_value_t = 1e-6)]
    delta: f64,
}

#[derive(Args, Debug)]
struct SgdArgs {
    #[arg(long, default_value_t = 1_000_000)]
    n: u64,
    #[arg(long)]
    eps0: f64,
    #[arg(long)]
    delta0: f64,
    #[arg(long, default_value_t = 1e-6)]
    delta: f64,
}

/// One sweep row; fields appear in the CSV column order.
#[derive(Serialize, Clone, Debug)]
struct SweepRow {
    variable: String,
    value: f64,
    method: String,
    eps: Option<f64>,
    delta: Option<f64>,
    direction: String,
    terminated: String,
}

#[derive(Serialize, Debug)]
struct SweepDoc {
    rows: Vec<SweepRow>,
}

/// Entry point used by `main` and the CLI tests.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(err) => {
            return match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    print!("{err}");
                    EXIT_OK
                }
                ErrorKind::UnknownArgument | ErrorKind::InvalidSubcommand => {
                    eprint!("{err}");
                    EXIT_USAGE
                }
                _ => {
                    eprint!("{err}");
                    EXIT_PARAMETER
                }
            };
        }
    };
    let jobs = cli
        .jobs
        .or_else(|| {
            std::env::var("SHUFFLE_DP_JOBS")
                .ok()
                .and_then(|v| v.parse().ok())
        })
        .filter(|&j| j > 0);
    let result = match cli.cmd {
        Cmd::Bound(args) => cmd_bound(&args),
        Cmd::Krr(args) => cmd_krr(&args),
        Cmd::Lower2rr(args) => cmd_lower(&args),
        Cmd::Rdp(args) => cmd_rdp(&args),
        Cmd::Compose(args) => cmd_compose(&args),
        Cmd::Sweep(args) => cmd_sweep(&args, jobs),
        Cmd::Tail(args) => cmd_tail(&args),
        Cmd::FreqEps0(args) => cmd_freq(&args),
        Cmd::Sgd(args) => cmd_sgd(&args),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                Error::ParameterDomain(_) => EXIT_PARAMETER,
                Error::Applicability { .. } => EXIT_APPLICABILITY,
            }
        }
    }
}

fn search_config(n: u64, stride: Option<u64>, iters: u32, budget: f64) -> SearchConfig {
    SearchConfig {
        iterations: iters,
        stride: stride.unwrap_or_else(|| default_stride(n)),
        delta_budget: budget,
    }
}

fn cmd_bound(args: &BoundArgs) -> Result<()> {
    match args.method {
        BoundMethod::ClosedForm => {
            let eps = eps_closed_form(args.n, args.eps0, args.delta)?;
            println!("eps={} direction=upper", sig6(eps));
        }
        BoundMethod::Numeric => {
            let inst = CloneInstance::new(args.n, args.eps0)?;
            let cfg = search_config(args.n, args.stride, args.iters, args.delta);
            let eps = eps_upper(&inst, args.delta, &cfg)?;
            println!("eps={} direction=upper", sig6(eps));
        }
        BoundMethod::ApproxDp => {
            let lp = LocalPrivacy::new(args.eps0, args.delta0)?;
            let bound = approx_dp_bound(args.n, &lp, args.delta)?;
            println!(
                "eps={} delta={} direction=upper",
                sig6(bound.eps),
                sig6(bound.delta)
            );
        }
    }
    Ok(())
}

fn cmd_krr(args: &KrrArgs) -> Result<()> {
    let eps = eps_krr(args.n, args.k, args.eps0, args.delta)?;
    println!("eps={} direction=upper", sig6(eps));
    Ok(())
}

fn cmd_lower(args: &LowerArgs) -> Result<()> {
    let eps = eps_lower_2rr(args.n, args.eps0, args.delta, args.iters)?;
    println!("eps={} direction=lower", sig6(eps));
    Ok(())
}

fn cmd_rdp(args: &RdpArgs) -> Result<()> {
    let inst = CloneInstance::new(args.n, args.eps0)?;
    if let Some(alpha) = args.alpha {
        let v = rdp_clones(&inst, alpha, args.mass_tol)?;
        println!(
            "alpha={} eps={} slack={}",
            sig6(alpha),
            sig6(v.bound(inst.eps0())),
            sig6(v.slack)
        );
        return Ok(());
    }
    let grid = args
        .alpha_grid
        .clone()
        .unwrap_or_else(default_alpha_grid);
    let curve = rdp_clones_curve(&inst, &grid, args.mass_tol)?;
    for &(alpha, eps) in &curve.points {
        println!("alpha={} eps={}", sig6(alpha), sig6(eps));
    }
    println!("provenance={}", curve.provenance.as_str());
    if let Some(delta) = args.delta {
        let eps = rdp_to_dp(&rdp_compose(&curve, 1), delta)?;
        println!("eps={} delta={} direction=upper", sig6(eps), sig6(delta));
    }
    Ok(())
}

fn cmd_compose(args: &ComposeArgs) -> Result<()> {
    let inst = CloneInstance::new(args.n, args.eps0)?;
    let bound = match args.route {
        Route::Rdp => compose_via_rdp(
            &inst,
            args.reps,
            args.delta,
            args.mass_tol,
            &default_alpha_grid(),
        )?,
        Route::Advanced => {
            let cfg = search_config(args.n, args.stride, args.iters, 1.0);
            compose_via_advanced(&inst, args.reps, args.delta, &cfg)?
        }
    };
    let route = match args.route {
        Route::Rdp => "rdp",
        Route::Advanced => "advanced",
    };
    println!(
        "eps={} delta={} route={route} direction=upper",
        sig6(bound.eps),
        sig6(bound.delta)
    );
    Ok(())
}

fn log_spaced(min: f64, max: f64, points: usize) -> Result<Vec<f64>> {
    if !(min > 0.0 && max > min) {
        return Err(Error::parameter(
            "log-spaced range requires 0 < min < max",
        ));
    }
    if points < 2 {
        return Err(Error::parameter("log-spaced range requires points >= 2"));
    }
    let step = (max.ln() - min.ln()) / (points - 1) as f64;
    Ok((0..points)
        .map(|i| {
            if i == points - 1 {
                max
            } else {
                (min.ln() + step * i as f64).exp()
            }
        })
        .collect())
}

fn sweep_row(args: &SweepArgs, value: f64, method: SweepMethod) -> SweepRow {
    let mut n = args.n;
    let mut eps0 = args.eps0;
    let mut delta = args.delta;
    let mut alpha = None;
    let mut reps = args.reps;
    match args.variable {
        SweepVariable::N => n = value.round() as u64,
        SweepVariable::Eps0 => eps0 = value,
        SweepVariable::Delta => delta = value,
        SweepVariable::Alpha => alpha = Some(value),
        SweepVariable::Reps => reps = value.round() as u64,
    }
    let outcome: Result<(Option<f64>, Option<f64>, &str, String)> = (|| {
        match method {
            SweepMethod::ClosedForm => {
                let eps = eps_closed_form(n, eps0, delta)?;
                Ok((Some(eps), Some(delta), "upper", "n/a".into()))
            }
            SweepMethod::Numeric => {
                let inst = CloneInstance::new(n, eps0)?;
                let cfg = search_config(n, args.stride, args.iters, delta);
                let eps = eps_upper(&inst, delta, &cfg)?;
                let tag = delta_upper(&inst, eps, &cfg)?.terminated.as_str();
                Ok((Some(eps), Some(delta), "upper", tag.into()))
            }
            SweepMethod::Krr => {
                let eps = eps_krr(n, args.k, eps0, delta)?;
                Ok((Some(eps), Some(delta), "upper", "n/a".into()))
            }
            SweepMethod::Lower2rr => {
                let eps = eps_lower_2rr(n, eps0, delta, args.iters)?;
                Ok((Some(eps), Some(delta), "lower", "n/a".into()))
            }
            SweepMethod::Rdp => {
                let inst = CloneInstance::new(n, eps0)?;
                if let Some(alpha) = alpha {
                    let v = rdp_clones(&inst, alpha, args.mass_tol)?;
                    Ok((Some(v.bound(eps0)), None, "upper", "n/a".into()))
                } else {
                    let bound = compose_via_rdp(
                        &inst,
                        reps,
                        delta,
                        args.mass_tol,
                        &default_alpha_grid(),
                    )?;
                    Ok((Some(bound.eps), Some(bound.delta), "upper", "n/a".into()))
                }
            }
            SweepMethod::ApproxDp => {
                if reps > 1 {
                    let inst = CloneInstance::new(n, eps0)?;
                    let cfg = search_config(n, args.stride, args.iters, 1.0);
                    let bound = compose_via_advanced(&inst, reps, delta, &cfg)?;
                    Ok((Some(bound.eps), Some(bound.delta), "upper", "n/a".into()))
                } else {
                    let lp = LocalPrivacy::new(eps0, args.delta0)?;
                    let bound = approx_dp_bound(n, &lp, delta)?;
                    Ok((Some(bound.eps), Some(bound.delta), "upper", "n/a".into()))
                }
            }
        }
    })();
    let (eps, delta_out, direction, terminated) = match outcome {
        Ok(row) => row,
        Err(_) => (None, None, "n/a", "n/a".into()),
    };
    SweepRow {
        variable: args.variable.as_str().to_string(),
        value: sig6_value(value),
        method: method.as_str().to_string(),
        eps: eps.map(sig6_value),
        delta: delta_out.map(sig6_value),
        direction: direction.to_string(),
        terminated,
    }
}

fn cmd_sweep(args: &SweepArgs, jobs: Option<usize>) -> Result<()> {
    let values: Vec<f64> = match (&args.values, args.min, args.max, args.points) {
        (Some(v), None, None, None) => v.clone(),
        (None, Some(min), Some(max), Some(points)) => log_spaced(min, max, points)?,
        _ => {
            return Err(Error::parameter(
                "specify either --values or all of --min/--max/--points",
            ))
        }
    };
    if values.is_empty() {
        return Err(Error::parameter("sweep values must be nonempty"));
    }
    let ascending = values.windows(2).all(|w| w[0] < w[1]);
    let descending = values.windows(2).all(|w| w[0] > w[1]);
    if !(ascending || descending) {
        return Err(Error::parameter("sweep values must be strictly monotone"));
    }
    if args.methods.is_empty() {
        return Err(Error::parameter("at least one method is required"));
    }
    let tasks: Vec<(f64, SweepMethod)> = values
        .iter()
        .flat_map(|&v| args.methods.iter().map(move |&m| (v, m)))
        .collect();
    let compute = || -> Vec<SweepRow> {
        use rayon::prelude::*;
        tasks
            .par_iter()
            .map(|&(value, method)| sweep_row(args, value, method))
            .collect()
    };
    let mut rows = match jobs {
        Some(j) => rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build()
            .map_err(|e| Error::parameter(format!("thread pool: {e}")))?
            .install(compute),
        None => compute(),
    };
    if args.monotone_envelope && args.variable == SweepVariable::N {
        apply_monotone_envelope(&mut rows, &args.methods, &values);
    }
    let rendered = match args.format {
        OutputFormat::Csv => render_csv(&rows),
        OutputFormat::Json => {
            let mut s = serde_json::to_string_pretty(&SweepDoc { rows }).expect("serialize");
            s.push('\n');
            s
        }
    };
    match &args.out {
        Some(path) => fs::write(path, rendered)
            .map_err(|e| Error::parameter(format!("cannot write {}: {e}", path.display())))?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(rendered.as_bytes()).expect("stdout");
        }
    }
    Ok(())
}

/// Running minimum of upper-bound eps values over ascending n, per method.
fn apply_monotone_envelope(rows: &mut [SweepRow], methods: &[SweepMethod], values: &[f64]) {
    let m = methods.len();
    for (mi, _) in methods.iter().enumerate() {
        let mut order: Vec<usize> = (0..values.len()).collect();
        order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
        let mut best = f64::INFINITY;
        for vi in order {
            let row = &mut rows[vi * m + mi];
            if row.direction != "upper" {
                continue;
            }
            if let Some(eps) = row.eps {
                best = best.min(eps);
                row.eps = Some(best);
            }
        }
    }
}

fn render_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("variable,value,method,eps,delta,direction,terminated\n");
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            row.variable,
            sig6(row.value),
            row.method,
            row.eps.map(sig6).unwrap_or_default(),
            row.delta.map(sig6).unwrap_or_default(),
            row.direction,
            row.terminated
        ));
    }
    out
}

fn cmd_tail(args: &TailArgs) -> Result<()> {
    if !(args.delta_min > 0.0 && args.delta_max < 1.0 && args.delta_min < args.delta_max) {
        return Err(Error::parameter(
            "tail requires 0 < delta-min < delta-max < 1",
        ));
    }
    let grid: Vec<f64> = if args.points == 1 {
        vec![args.delta_max]
    } else {
        let mut g = log_spaced(args.delta_min, args.delta_max, args.points)?;
        g.reverse();
        g
    };
    let sweep = tail_sweep(args.n, args.eps0, &grid)?;
    println!("delta,eps");
    for (delta, eps) in sweep {
        println!("{},{}", sig6(delta), sig6(eps));
    }
    Ok(())
}

fn cmd_freq(args: &FreqArgs) -> Result<()> {
    let eps0 = eps0_for_frequency(args.n, args.eps, args.delta)?;
    println!("eps0={}", sig6(eps0));
    Ok(())
}

fn cmd_sgd(args: &SgdArgs) -> Result<()> {
    let lp = LocalPrivacy::new(args.eps0, args.delta0)?;
    let acct = sgd_accounting(args.n, &lp, args.delta)?;
    println!(
        "sigma={} eps={} delta={} direction=upper",
        sig6(acct.sigma),
        sig6(acct.guarantee.eps),
        sig6(acct.guarantee.delta)
    );
    Ok(())
}
