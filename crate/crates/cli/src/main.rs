//! `levelflow` command-line front end.

mod check;
mod output;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use levelflow::hellmann_feynman::{element_maximum, hf_offdiag_residual};
use levelflow::oscillator::{self, OscSpec, OscState};
use levelflow::spectral_flow::{detect_events, events_json, sweep_directed};
use levelflow::{g17, BuiltinName, LevelflowError, MatrixFamily, Settings, C64};
use serde_json::json;

use output::{emit, write_gnuplot, OutputArgs, PlotArgs, PlotKind, Secondary};

#[derive(Parser, Debug)]
#[command(name = "levelflow", version, about = "Eigenvalue branches, crossings and exceptional points of matrix families")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Track eigenvalue branches over a real range and classify level crossings.
    Sweep(SweepArgs),
    /// Off-diagonal Hellmann-Feynman element and identity residual along a sweep.
    Hf(HfArgs),
    /// Anisotropic 2D oscillator: numeric and exact levels, degeneracy table, selection rule.
    Osc(OscArgs),
    /// Newton search for an exceptional point from a complex seed.
    Ep(EpArgs),
    /// PT phase classification over a real coupling range.
    Pt(PtArgs),
    /// Eigenvalues over a rectangle of the complex parameter plane.
    Surface(SurfaceArgs),
    /// Run the identity suite on a model; exits 1 if any check fails.
    Check(CheckArgs),
}

#[derive(Args, Debug, Clone)]
pub struct ModelArgs {
    /// Builtin model: two_level_hermitian, two_level_pt or oscillator_2d.
    #[arg(long, value_name = "NAME", conflicts_with = "model_file", required_unless_present = "model_file")]
    model: Option<String>,
    /// Builtin parameter, repeatable (oscillator_2d takes k, N, lambda_ref).
    #[arg(long = "param", value_name = "KEY=VALUE", requires = "model")]
    params: Vec<String>,
    /// JSON model file.
    #[arg(long, value_name = "PATH")]
    model_file: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Parameter range `a:b`.
    #[arg(long, value_name = "A:B", allow_hyphen_values = true)]
    range: String,
    #[arg(long)]
    steps: usize,
    /// Track from b down to a.
    #[arg(long)]
    reverse: bool,
    /// Alias of --json for the crossing events.
    #[arg(long, value_name = "PATH", conflicts_with = "json")]
    events: Option<PathBuf>,
    #[command(flatten)]
    out: OutputArgs,
    #[command(flatten)]
    plot: PlotArgs,
}

#[derive(Args, Debug)]
struct HfArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, value_name = "A:B", allow_hyphen_values = true)]
    range: String,
    #[arg(long)]
    steps: usize,
    /// Tracked branch pair `a,b`.
    #[arg(long, value_name = "A,B", default_value = "0,1")]
    pair: String,
    /// Step of the derivative stencil (default 1e-3·(1+|λ|)).
    #[arg(long, value_name = "H")]
    fd_step: Option<f64>,
    #[command(flatten)]
    out: OutputArgs,
    #[command(flatten)]
    plot: PlotArgs,
}

#[derive(Args, Debug)]
struct OscArgs {
    /// x stiffness.
    #[arg(long)]
    k: f64,
    /// Largest quantum number kept in each direction.
    #[arg(long, value_name = "N")]
    n_max: usize,
    /// Stiffness of the y basis (default k).
    #[arg(long)]
    lambda_ref: Option<f64>,
    #[arg(long, value_name = "A:B", allow_hyphen_values = true)]
    range: String,
    #[arg(long)]
    steps: usize,
    /// Emit levels with m + n up to this value.
    #[arg(long, default_value_t = 3)]
    levels: usize,
    #[command(flatten)]
    out: OutputArgs,
    #[command(flatten)]
    plot: PlotArgs,
}

#[derive(Args, Debug)]
struct EpArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Complex seed `re,im`.
    #[arg(long, value_name = "RE,IM", allow_hyphen_values = true)]
    seed: String,
    /// Convergence threshold on |D(z)|.
    #[arg(long)]
    ep_tol: Option<f64>,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args, Debug)]
struct PtArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, value_name = "A:B", allow_hyphen_values = true)]
    range: String,
    #[arg(long)]
    steps: usize,
    /// Largest |Im E| still classified as real.
    #[arg(long)]
    real_tol: Option<f64>,
    #[command(flatten)]
    out: OutputArgs,
    #[command(flatten)]
    plot: PlotArgs,
}

#[derive(Args, Debug)]
struct SurfaceArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, value_name = "A:B", allow_hyphen_values = true)]
    x_range: String,
    #[arg(long, value_name = "A:B", allow_hyphen_values = true)]
    y_range: String,
    #[arg(long)]
    nx: usize,
    #[arg(long)]
    ny: usize,
    #[command(flatten)]
    out: OutputArgs,
    #[command(flatten)]
    plot: PlotArgs,
}

#[derive(Args, Debug)]
pub struct CheckArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Sweep range (defaults depend on the model).
    #[arg(long, value_name = "A:B", allow_hyphen_values = true)]
    range: Option<String>,
    #[arg(long, default_value_t = 201)]
    steps: usize,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Lib(LevelflowError),
    /// The check suite ran and at least one check failed.
    Violated,
}

impl From<LevelflowError> for CliError {
    fn from(e: LevelflowError) -> Self {
        CliError::Lib(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Violated => 1,
            CliError::Usage(_) => 2,
            CliError::Lib(e) => match e {
                LevelflowError::NumericalFailure { .. }
                | LevelflowError::SearchFailure { .. }
                | LevelflowError::Bracket { .. }
                | LevelflowError::Precondition(_) => 3,
                _ => 2,
            },
        }
    }
}

pub fn parse_range(text: &str) -> Result<(f64, f64), CliError> {
    let bad = || CliError::Usage(format!("range must look like a:b with a < b, got `{text}`"));
    let (a, b) = text.split_once(':').ok_or_else(bad)?;
    let a: f64 = a.trim().parse().map_err(|_| bad())?;
    let b: f64 = b.trim().parse().map_err(|_| bad())?;
    if !(a.is_finite() && b.is_finite() && a < b) {
        return Err(bad());
    }
    Ok((a, b))
}

fn parse_pair<T: std::str::FromStr>(text: &str, what: &str) -> Result<(T, T), CliError> {
    let bad = || CliError::Usage(format!("{what} must look like x,y, got `{text}`"));
    let (a, b) = text.split_once(',').ok_or_else(bad)?;
    Ok((a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?))
}

fn check_steps(steps: usize, what: &str) -> Result<(), CliError> {
    if steps < 2 {
        return Err(CliError::Usage(format!("{what} must be at least 2, got {steps}")));
    }
    Ok(())
}

pub fn load_model(args: &ModelArgs) -> Result<MatrixFamily, CliError> {
    if let Some(path) = &args.model_file {
        return Ok(MatrixFamily::from_json_file(path)?);
    }
    let name: BuiltinName = args.model.as_deref().unwrap_or_default().parse()?;
    let mut params = BTreeMap::new();
    for p in &args.params {
        let (k, v) = p
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("--param expects KEY=VALUE, got `{p}`")))?;
        let v: f64 = v.trim().parse().map_err(|_| CliError::Usage(format!("--param {k}: `{v}` is not a number")))?;
        params.insert(k.trim().to_string(), v);
    }
    Ok(MatrixFamily::builtin(name, &params)?)
}

fn run_sweep(argv: &[String], a: SweepArgs, settings: &Settings) -> Result<(), CliError> {
    let family = load_model(&a.model)?;
    let (lo, hi) = parse_range(&a.range)?;
    check_steps(a.steps, "--steps")?;
    let flow = sweep_directed(&family, lo, hi, a.steps, a.reverse, settings)?;
    let events = detect_events(&flow, &family, settings)?;
    let doc = json!({
        "model": family.label(),
        "events": events_json(&events),
        "low_overlap": flow.low_overlap,
        "slope_bound": flow.slope_bound,
    });
    let mut out = a.out.clone();
    if a.events.is_some() {
        out.json = a.events.clone();
    }
    emit(argv, &flow.to_csv(), Secondary::Document(doc), &out)?;
    write_gnuplot(&a.plot, &out, PlotKind::Lines { columns: flow.dim() + 1, xlabel: "lambda", ylabel: "E" })
}

fn run_hf(argv: &[String], a: HfArgs, settings: &Settings) -> Result<(), CliError> {
    let family = load_model(&a.model)?;
    let (lo, hi) = parse_range(&a.range)?;
    check_steps(a.steps, "--steps")?;
    let (ba, bb): (usize, usize) = parse_pair(&a.pair, "--pair")?;
    if ba == bb {
        return Err(CliError::Usage("--pair needs two different branches".into()));
    }
    let flow = sweep_directed(&family, lo, hi, a.steps, false, settings)?;
    let elements = levelflow::hellmann_feynman::element_along_flow(&flow, &family, ba, bb)?;
    let mut csv = format!("lambda,E_{ba},E_{bb},element_abs,residual\n");
    let mut lines = Vec::new();
    for (i, &lam) in flow.grid.iter().enumerate() {
        let (m, n) = (flow.permutations[i][ba], flow.permutations[i][bb]);
        let residual = match hf_offdiag_residual(&family, lam, m, n, a.fd_step, settings) {
            Ok(r) => {
                let v = r.residual;
                lines.push(serde_json::to_value(&r).expect("report serializes"));
                v
            }
            // Degenerate points have no well-defined sorted-index identity.
            Err(LevelflowError::Precondition(_)) => f64::NAN,
            Err(e) => return Err(e.into()),
        };
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            g17(lam),
            g17(flow.energies[i][ba]),
            g17(flow.energies[i][bb]),
            g17(elements[i]),
            g17(residual)
        ));
    }
    let (x, v) = element_maximum(&flow, &family, ba, bb, settings)?;
    lines.push(json!({ "element_maximum": { "branches": [ba, bb], "lambda": x, "value": v } }));
    emit(argv, &csv, Secondary::Lines(lines), &a.out)?;
    write_gnuplot(&a.plot, &a.out, PlotKind::Lines { columns: 5, xlabel: "lambda", ylabel: "value" })
}

fn run_osc(argv: &[String], a: OscArgs, settings: &Settings) -> Result<(), CliError> {
    let spec = OscSpec { k: a.k, n_max: a.n_max, lambda_ref: a.lambda_ref.unwrap_or(a.k) };
    spec.validate()?;
    let (lo, hi) = parse_range(&a.range)?;
    check_steps(a.steps, "--steps")?;
    if a.levels > spec.n_max {
        return Err(CliError::Usage(format!("--levels {} exceeds N = {}", a.levels, spec.n_max)));
    }
    let mut states: Vec<OscState> =
        (0..=a.levels).flat_map(|l| (0..=l).map(move |m| OscState::new(m, l - m))).collect();
    states.sort_by_key(|s| (s.level(), s.m));
    let mut csv = String::from("lambda");
    for s in &states {
        csv.push_str(&format!(",num_{}_{},exact_{}_{}", s.m, s.n, s.m, s.n));
    }
    csv.push('\n');
    for lam in levelflow::spectral_flow::linear_grid(lo, hi, a.steps) {
        let sectors = oscillator::sector_energies(&spec, lam, settings)?;
        csv.push_str(&g17(lam));
        for s in &states {
            let exact = oscillator::exact_energy(&spec, *s, lam)?;
            csv.push_str(&format!(",{},{}", g17(sectors[s.m][s.n]), g17(exact)));
        }
        csv.push('\n');
    }
    let table = oscillator::degeneracy_table(&spec, a.levels, settings)?;
    let rules = [lo, 0.5 * (lo + hi), hi]
        .iter()
        .map(|&l| oscillator::selection_rule(&spec, l, settings))
        .collect::<levelflow::Result<Vec<_>>>()?;
    let doc = json!({ "spec": spec, "degeneracy_table": table, "selection_rule": rules });
    emit(argv, &csv, Secondary::Document(doc), &a.out)?;
    write_gnuplot(&a.plot, &a.out, PlotKind::Lines { columns: 1 + 2 * states.len(), xlabel: "lambda", ylabel: "E" })
}

fn run_ep(argv: &[String], a: EpArgs, settings: &Settings) -> Result<(), CliError> {
    let family = load_model(&a.model)?;
    let (re, im): (f64, f64) = parse_pair(&a.seed, "--seed")?;
    let ep = levelflow::find_exceptional_point(&family, C64::new(re, im), a.ep_tol, settings)?;
    let csv = format!(
        "re_z,im_z,discriminant_abs,sigma_min,puiseux_exponent,iterations,pair_0,pair_1\n{},{},{},{},{},{},{},{}\n",
        g17(ep.z_star.re),
        g17(ep.z_star.im),
        g17(ep.discriminant_abs),
        g17(ep.sigma_min),
        g17(ep.puiseux_exponent),
        ep.iterations,
        ep.pair.0,
        ep.pair.1
    );
    emit(argv, &csv, Secondary::Document(ep.to_json()), &a.out)
}

fn run_pt(argv: &[String], a: PtArgs, settings: &Settings) -> Result<(), CliError> {
    let family = load_model(&a.model)?;
    let (lo, hi) = parse_range(&a.range)?;
    check_steps(a.steps, "--steps")?;
    let sweep = levelflow::pt_classify_sweep(&family, lo, hi, a.steps, a.real_tol, settings)?;
    let doc = json!({ "model": family.label(), "boundaries": sweep.boundaries });
    emit(argv, &sweep.to_csv(), Secondary::Document(doc), &a.out)?;
    write_gnuplot(&a.plot, &a.out, PlotKind::ComplexLines { values: family.dim(), xlabel: "g" })
}

fn run_surface(argv: &[String], a: SurfaceArgs, settings: &Settings) -> Result<(), CliError> {
    let family = load_model(&a.model)?;
    let xr = parse_range(&a.x_range)?;
    let yr = parse_range(&a.y_range)?;
    check_steps(a.nx, "--nx")?;
    check_steps(a.ny, "--ny")?;
    let grid = levelflow::surface_scan(&family, xr, yr, a.nx, a.ny, settings)?;
    // Node with the closest eigenvalue pair: where to seed an EP search.
    let closest = grid
        .nodes
        .iter()
        .map(|node| {
            let mut gap = f64::INFINITY;
            for i in 0..node.eigenvalues.len() {
                for j in i + 1..node.eigenvalues.len() {
                    gap = gap.min((node.eigenvalues[i] - node.eigenvalues[j]).norm());
                }
            }
            (node.x, node.y, gap)
        })
        .fold((f64::NAN, f64::NAN, f64::INFINITY), |best, c| if c.2 < best.2 { c } else { best });
    let doc = json!({
        "model": family.label(),
        "nx": a.nx,
        "ny": a.ny,
        "closest_pair": { "x": closest.0, "y": closest.1, "gap": closest.2 },
    });
    emit(argv, &grid.to_csv(), Secondary::Document(doc), &a.out)?;
    write_gnuplot(&a.plot, &a.out, PlotKind::Surface { values: family.dim() })
}

fn run(argv: &[String], command: Command) -> Result<(), CliError> {
    let settings = Settings::from_env()?;
    match command {
        Command::Sweep(a) => run_sweep(argv, a, &settings),
        Command::Hf(a) => run_hf(argv, a, &settings),
        Command::Osc(a) => run_osc(argv, a, &settings),
        Command::Ep(a) => run_ep(argv, a, &settings),
        Command::Pt(a) => run_pt(argv, a, &settings),
        Command::Surface(a) => run_surface(argv, a, &settings),
        Command::Check(a) => check::run(argv, a, &settings),
    }
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    // clap prints help and exits 0, or prints usage and exits 2.
    let cli = Cli::parse_from(&argv);
    match run(&argv, cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            match &e {
                CliError::Usage(msg) => eprintln!("error: {msg}\n\nFor more information, try '--help'."),
                CliError::Lib(err) => {
                    eprintln!("error: {err}");
                    match err {
                        LevelflowError::NumericalFailure { diagnostics, .. } => {
                            for d in diagnostics {
                                eprintln!("  {d}");
                            }
                        }
                        LevelflowError::SearchFailure { trace, .. } => {
                            for (re, im, d) in trace.iter().rev().take(5).rev() {
                                eprintln!("  z = {} + {}i, |D| = {}", g17(*re), g17(*im), g17(*d));
                            }
                        }
                        _ => {}
                    }
                }
                CliError::Violated => eprintln!("error: identity checks failed"),
            }
            ExitCode::from(e.exit_code())
        }
    }
}
