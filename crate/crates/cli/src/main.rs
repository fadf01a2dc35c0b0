//! `logweight` command-line front end.
//!
//! Reports are JSON on stdout (or `--out`), one-line summaries on stderr.
//! Exit status: 0 when every check passes, 1 when a check fails, 2 on bad
//! input or unmet preconditions.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use serde_json::{json, Value};

use logweight::ball::{
    ball_lower_bound_check, build_ball_functions, verify_family, BallCheckOptions, FamilyManifest, PolynomialFamily,
};
use logweight::construction::{
    h_for_delta, run_construction, verify_tangent_lemmas, ConstructionParams, ConstructionState,
};
use logweight::envelope::{hadamard_check, log_convex_envelope, random_polynomials, AngleMode, DiskFunction};
use logweight::grid::{geomspace, t_grid, Spacing};
use logweight::numeric::fmt17;
use logweight::series::{sandwich_check, sandwich_samples, split_parity, zero_adjust, InnerGrid, OuterGrid};
use logweight::weight::{WeightFunction, WeightSpec};

#[derive(Parser)]
#[command(
    name = "logweight",
    version,
    about = "Lacunary series equivalent to log-convex radial weights"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the tangent-line construction and write the state as JSON.
    Construct(ConstructArgs),
    /// Check a state or a weight.
    #[command(subcommand)]
    Verify(Verify),
    /// Write the sandwich samples of a state as CSV.
    Emit(EmitArgs),
}

#[derive(Subcommand)]
enum Verify {
    /// Two-sided modulus bounds on a (t, θ) grid.
    Sandwich(SandwichArgs),
    /// Separation and segment estimates of the tangent lines.
    Lemmas(LemmasArgs),
    /// Log-convexity of the maximum modulus for random polynomials.
    Hadamard(HadamardArgs),
    /// Distance of log ω from its lower convex envelope.
    Envelope(EnvelopeArgs),
    /// Polynomial family claims and the lower bound on the unit ball.
    Ball(BallArgs),
}

#[derive(Args)]
struct WeightArgs {
    /// Builtin weight family; defaults to the weight recorded in the state.
    #[arg(long)]
    family: Option<String>,
    /// Family parameters, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    params: Vec<f64>,
    /// `[[t, omega], ...]` for the tabulated family.
    #[arg(long)]
    table: Option<PathBuf>,
    /// Full weight spec as JSON (`{"family", "params", "table"}`).
    #[arg(long, conflicts_with_all = ["family", "table"])]
    weight: Option<PathBuf>,
}

#[derive(Args)]
struct OutArgs {
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ConstructArgs {
    #[command(flatten)]
    weight: WeightArgs,
    #[arg(long, default_value_t = 2.0)]
    h: f64,
    #[arg(long, conflicts_with = "x0")]
    t0: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    x0: Option<f64>,
    #[arg(long, default_value_t = 0.9999)]
    t_stop: f64,
    #[arg(long)]
    k_max: Option<usize>,
    #[arg(long)]
    root_tol: Option<f64>,
    /// Retry with x0 halved on exponent collisions.
    #[arg(long)]
    auto_restart: bool,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum SpacingArg {
    Log,
    Linear,
}

impl From<SpacingArg> for Spacing {
    fn from(s: SpacingArg) -> Self {
        match s {
            SpacingArg::Log => Spacing::Log,
            SpacingArg::Linear => Spacing::Linear,
        }
    }
}

#[derive(Args)]
struct GridArgs {
    #[arg(long, default_value_t = 2000)]
    t_points: usize,
    #[arg(long, default_value_t = 256)]
    angles: usize,
    #[arg(long, value_enum, default_value_t = SpacingArg::Log)]
    spacing: SpacingArg,
    /// Lower end of the t range (exclusive); defaults to t0 of the state.
    #[arg(long)]
    t_lo: Option<f64>,
    /// Upper end of the t range; defaults to the verified end of the state.
    #[arg(long)]
    t_hi: Option<f64>,
}

#[derive(Args)]
struct SandwichArgs {
    #[arg(long)]
    state: PathBuf,
    #[command(flatten)]
    weight: WeightArgs,
    #[command(flatten)]
    grid: GridArgs,
    /// Also remove the zeros near the origin and measure global constants.
    #[arg(long)]
    adjust: bool,
    #[arg(long, default_value_t = 720)]
    adjust_candidates: usize,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct LemmasArgs {
    #[arg(long)]
    state: PathBuf,
    #[command(flatten)]
    weight: WeightArgs,
    #[arg(long, default_value_t = 50)]
    samples: usize,
    #[arg(long)]
    delta: Option<f64>,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct HadamardArgs {
    #[arg(long, default_value_t = 100)]
    random_polys: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 30)]
    max_degree: usize,
    #[arg(long, default_value_t = 64)]
    radii: usize,
    #[arg(long, default_value_t = 0.01)]
    r_min: f64,
    #[arg(long, default_value_t = 0.99)]
    r_max: f64,
    /// Initial angle count, doubled until the maximum settles.
    #[arg(long, default_value_t = 64)]
    start_angles: usize,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct EnvelopeArgs {
    #[command(flatten)]
    weight: WeightArgs,
    #[arg(long, default_value_t = 400)]
    points: usize,
    #[arg(long, default_value_t = -2.0, allow_hyphen_values = true)]
    x_min: f64,
    #[arg(long, default_value_t = -1e-3, allow_hyphen_values = true)]
    x_max: f64,
    #[arg(long, default_value_t = logweight::envelope::DEFAULT_GAP_BOUND)]
    gap_bound: f64,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct BallArgs {
    /// Without a state only the family claims are checked (needs --degrees).
    #[arg(long)]
    state: Option<PathBuf>,
    #[command(flatten)]
    weight: WeightArgs,
    /// Family manifest `{"d", "Q", "delta", "kind"}`; defaults to monomials.
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    degrees: Vec<u64>,
    #[arg(long, default_value_t = 256)]
    sphere_samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 400)]
    t_points: usize,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct EmitArgs {
    #[arg(long)]
    state: PathBuf,
    #[command(flatten)]
    weight: WeightArgs,
    #[command(flatten)]
    grid: GridArgs,
    #[command(flatten)]
    out: OutArgs,
}

/// An input or precondition problem; reported with exit status 2.
struct Failure(String);

impl From<logweight::Error> for Failure {
    fn from(e: logweight::Error) -> Self {
        Failure(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure(e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure(e.to_string())
    }
}

type CmdResult<T> = std::result::Result<T, Failure>;

/// Output of a command: the body to write and the pass flag.
struct Outcome {
    body: String,
    passed: bool,
    summary: String,
}

fn read(path: &Path) -> CmdResult<String> {
    fs::read_to_string(path).map_err(|e| Failure(format!("{}: {e}", path.display())))
}

fn load_state(path: &Path) -> CmdResult<ConstructionState> {
    Ok(ConstructionState::from_json(&read(path)?)?)
}

#[derive(Deserialize)]
#[serde(untagged)]
enum TableFile {
    Pairs(Vec<[f64; 2]>),
    Spec { table: Vec<[f64; 2]> },
}

impl WeightArgs {
    fn resolve(&self, state: Option<&ConstructionState>) -> CmdResult<WeightFunction> {
        if let Some(path) = &self.weight {
            return Ok(WeightFunction::from_json(&read(path)?)?);
        }
        if let Some(family) = &self.family {
            let mut spec = WeightSpec::new(family, &self.params);
            if let Some(path) = &self.table {
                spec.table = Some(match serde_json::from_str(&read(path)?)? {
                    TableFile::Pairs(t) | TableFile::Spec { table: t } => t,
                });
            }
            return Ok(WeightFunction::from_spec(&spec)?);
        }
        match state.and_then(|s| s.weight.as_ref()) {
            Some(spec) => Ok(WeightFunction::from_spec(spec)?),
            None => Err(Failure("no weight given: use --family or --weight".into())),
        }
    }
}

fn report(command: &str, passed: bool, body: Value) -> CmdResult<String> {
    let mut v = json!({ "command": command, "passed": passed });
    if let (Value::Object(m), Value::Object(b)) = (&mut v, body) {
        m.extend(b);
    }
    Ok(serde_json::to_string_pretty(&v)?)
}

fn state_grid(state: &ConstructionState, g: &GridArgs) -> Vec<f64> {
    let lo = g.t_lo.unwrap_or_else(|| state.t0());
    let hi = g.t_hi.unwrap_or_else(|| state.t_verified());
    t_grid(lo, hi, g.t_points, g.spacing.into())
}

fn construct(a: &ConstructArgs) -> CmdResult<Outcome> {
    let w = a.weight.resolve(None)?;
    let mut params = match (a.t0, a.x0) {
        (_, Some(x0)) => ConstructionParams::new(a.h, x0, a.t_stop),
        (t0, None) => ConstructionParams::from_t0(a.h, t0.unwrap_or(0.95), a.t_stop),
    };
    if let Some(k) = a.k_max {
        params = params.with_k_max(k);
    }
    if let Some(tol) = a.root_tol {
        params.root_tol = tol;
    }
    params.auto_restart = a.auto_restart;
    let state = run_construction(&w, &params)?;
    Ok(Outcome {
        summary: format!(
            "construct: {} lines, t_K = {}",
            state.len(),
            state.ts().last().copied().unwrap_or(0.0)
        ),
        body: state.to_json()?,
        passed: true,
    })
}

fn sandwich(a: &SandwichArgs) -> CmdResult<Outcome> {
    let state = load_state(&a.state)?;
    let w = a.weight.resolve(Some(&state))?;
    let pair = split_parity(&state)?;
    let grid = state_grid(&state, &a.grid);
    let rep = sandwich_check(&pair, &w, &grid, a.grid.angles)?;
    let mut passed = rep.passed;
    let mut body = json!({ "sandwich": rep });
    if a.adjust {
        let outer = OuterGrid {
            t_grid: grid,
            angles: a.grid.angles,
        };
        let adj = zero_adjust(&pair, &w, a.adjust_candidates, InnerGrid::default(), &outer)?;
        passed &= adj.c_low > 0.0 && adj.c_high.is_finite();
        body["adjusted"] = serde_json::to_value(&adj)?;
    }
    Ok(Outcome {
        summary: format!(
            "sandwich: lower margin {:.3e}, upper margin {:.3e}",
            rep.worst_lower.margin, rep.worst_upper.margin
        ),
        body: report("verify sandwich", passed, body)?,
        passed,
    })
}

fn lemmas(a: &LemmasArgs) -> CmdResult<Outcome> {
    let state = load_state(&a.state)?;
    let w = a.weight.resolve(Some(&state))?;
    let rep = verify_tangent_lemmas(&state, &w, a.samples, a.delta)?;
    let worst = rep.checks.iter().map(|c| c.worst_margin).fold(f64::INFINITY, f64::min);
    Ok(Outcome {
        summary: format!("lemmas: {} checks, smallest margin {worst:.3e}", rep.checks.len()),
        passed: rep.passed,
        body: report("verify lemmas", rep.passed, json!({ "lemmas": rep }))?,
    })
}

fn hadamard(a: &HadamardArgs) -> CmdResult<Outcome> {
    if !(a.r_min > 0.0 && a.r_min < a.r_max && a.r_max < 1.0) {
        return Err(Failure("need 0 < r-min < r-max < 1".into()));
    }
    let polys = random_polynomials(a.random_polys, a.max_degree, a.seed);
    let r = geomspace(a.r_min, a.r_max, a.radii);
    let mode = AngleMode::Adaptive(a.start_angles);
    let mut rows = Vec::with_capacity(polys.len());
    let mut passed = true;
    let mut worst = f64::INFINITY;
    for (i, p) in polys.iter().enumerate() {
        let rep = hadamard_check(&[p as &dyn DiskFunction], &r, mode)?;
        passed &= rep.passed;
        worst = worst.min(rep.min_second_difference);
        rows.push(json!({
            "index": i,
            "degree": p.degree(),
            "passed": rep.passed,
            "min_second_difference": rep.min_second_difference,
            "witness_r": rep.witness_r,
            "unconverged_radii": rep.unconverged_radii,
        }));
    }
    Ok(Outcome {
        summary: format!(
            "hadamard: {} polynomials, smallest second difference {worst:.3e}",
            polys.len()
        ),
        passed,
        body: report(
            "verify hadamard",
            passed,
            json!({
                "seed": a.seed,
                "tolerance": logweight::envelope::HADAMARD_TOL,
                "min_second_difference": worst,
                "polynomials": rows,
            }),
        )?,
    })
}

fn envelope(a: &EnvelopeArgs) -> CmdResult<Outcome> {
    let w = a.weight.resolve(None)?;
    if !(a.x_min < a.x_max && a.x_max < 0.0) {
        return Err(Failure("need x-min < x-max < 0".into()));
    }
    let mut grid = geomspace(a.x_min, a.x_max, a.points);
    grid.extend(w.landmarks().into_iter().filter(|x| (a.x_min..=a.x_max).contains(x)));
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let rep = log_convex_envelope(&w, &grid, a.gap_bound)?;
    Ok(Outcome {
        summary: format!("envelope: gap {:.6e} at x = {}", rep.gap, rep.gap_witness),
        passed: rep.equivalent,
        body: report("verify envelope", rep.equivalent, json!({ "envelope": rep }))?,
    })
}

fn family(a: &BallArgs) -> CmdResult<Arc<dyn PolynomialFamily>> {
    let manifest = match &a.manifest {
        Some(path) => FamilyManifest::from_json(&read(path)?)?,
        None => FamilyManifest {
            d: 1,
            q: 1,
            delta: 1.0,
            kind: "monomial".into(),
            scale: None,
        },
    };
    Ok(manifest.build()?)
}

fn ball(a: &BallArgs) -> CmdResult<Outcome> {
    let fam = family(a)?;
    let Some(path) = &a.state else {
        if a.degrees.is_empty() {
            return Err(Failure("give --state or --degrees".into()));
        }
        let rep = verify_family(fam.as_ref(), &a.degrees, a.sphere_samples, a.seed)?;
        return Ok(Outcome {
            summary: format!("ball: family claims {}", if rep.passed { "hold" } else { "fail" }),
            passed: rep.passed,
            body: report("verify ball", rep.passed, json!({ "family": rep }))?,
        });
    };
    let state = load_state(path)?;
    let w = a.weight.resolve(Some(&state))?;
    let need = h_for_delta(fam.delta_claimed())?;
    if state.h < need * (1.0 - 1e-12) {
        return Err(Failure(format!(
            "precondition failed: delta = {} needs h >= {need}, state has h = {}",
            fam.delta_claimed(),
            state.h
        )));
    }
    let mut degrees = state.es.clone();
    degrees.extend(&a.degrees);
    let fam_rep = verify_family(fam.as_ref(), &degrees, a.sphere_samples, a.seed)?;
    if !fam_rep.passed {
        return Ok(Outcome {
            summary: "ball: family claims fail".into(),
            passed: false,
            body: report("verify ball", false, json!({ "family": fam_rep }))?,
        });
    }
    let sys = build_ball_functions(&state, fam, a.sphere_samples, a.seed)?;
    let grid = t_grid(state.t0(), state.t_verified(), a.t_points, Spacing::Log);
    let opts = BallCheckOptions {
        sphere_samples: a.sphere_samples,
        seed: a.seed,
        ..Default::default()
    };
    let rep = ball_lower_bound_check(&sys, &w, &grid, opts)?;
    Ok(Outcome {
        summary: format!("ball: lower margin {:.3e}, C = {:.3e}", rep.worst.margin, rep.c),
        passed: rep.passed,
        body: report(
            "verify ball",
            rep.passed,
            json!({ "family": fam_rep, "lower_bound": rep }),
        )?,
    })
}

const CSV_HEADER: [&str; 8] = [
    "t",
    "theta",
    "log_g1_abs",
    "log_g2_abs",
    "log_sum",
    "log_omega",
    "lower_margin",
    "upper_margin",
];

fn emit(a: &EmitArgs) -> CmdResult<Outcome> {
    let state = load_state(&a.state)?;
    let w = a.weight.resolve(Some(&state))?;
    let pair = split_parity(&state)?;
    let grid = state_grid(&state, &a.grid);
    let rows = sandwich_samples(&pair, &w, &grid, a.grid.angles)?;
    let mut out = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Failure(e.to_string());
    out.write_record(CSV_HEADER).map_err(csv_err)?;
    for s in &rows {
        let fields = [
            s.t,
            s.theta,
            s.log_g1_abs,
            s.log_g2_abs,
            s.log_sum,
            s.log_omega,
            s.lower_margin,
            s.upper_margin,
        ];
        out.write_record(fields.iter().map(|v| fmt17(*v))).map_err(csv_err)?;
    }
    let bytes = out.into_inner().map_err(|e| Failure(e.to_string()))?;
    Ok(Outcome {
        summary: format!("emit: {} rows", rows.len()),
        body: String::from_utf8(bytes).map_err(|e| Failure(e.to_string()))?,
        passed: true,
    })
}

fn write_body(out: &Option<PathBuf>, body: &str) -> std::io::Result<()> {
    let mut text = body.to_string();
    if !text.ends_with('\n') {
        text.push('\n');
    }
    match out {
        Some(path) => fs::write(path, text),
        None => std::io::stdout().lock().write_all(text.as_bytes()),
    }
}

fn configure_threads() {
    if let Some(n) = std::env::var("LOGWEIGHT_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
    {
        if n > 0 {
            // Fails only if a pool already exists, which cannot happen here.
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    configure_threads();
    let (result, out) = match &cli.command {
        Command::Construct(a) => (construct(a), &a.out.out),
        Command::Verify(Verify::Sandwich(a)) => (sandwich(a), &a.out.out),
        Command::Verify(Verify::Lemmas(a)) => (lemmas(a), &a.out.out),
        Command::Verify(Verify::Hadamard(a)) => (hadamard(a), &a.out.out),
        Command::Verify(Verify::Envelope(a)) => (envelope(a), &a.out.out),
        Command::Verify(Verify::Ball(a)) => (ball(a), &a.out.out),
        Command::Emit(a) => (emit(a), &a.out.out),
    };
    match result {
        Ok(o) => {
            eprintln!("{} [{}]", o.summary, if o.passed { "pass" } else { "FAIL" });
            if let Err(e) = write_body(out, &o.body) {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
            if o.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(Failure(msg)) => {
            eprintln!("error: {msg}");
            let body = serde_json::to_string_pretty(&json!({ "error": msg })).unwrap_or_default();
            let _ = write_body(out, &body);
            ExitCode::from(2)
        }
    }
}
