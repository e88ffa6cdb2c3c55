//! `legendre`: command-line driver. Every subcommand prints one JSON document
//! on stdout. Exit status: 0 ok, 2 bad input, 3 numerical failure.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde_json::{json, Value};

use legendre_core::analytic::TorusCoordinate;
use legendre_core::analytic::{
    in_sigma, lambda_of_tau, monodromy_residuals, periods, sigma_grid, tau_of_lambda,
    AnalyticError, ComplexFiberPoint,
};
use legendre_core::arith::normalize_projective;
use legendre_core::duppoly::{certify_degrees, dup_apply, dup_apply_triple, triples_up_to};
use legendre_core::exec::Execution;
use legendre_core::experiments::{
    parse_rational, parse_samples, run_height_inequality, run_silverman_tate,
    run_specialization_ratio, write_run, ExperimentError, FamilySpec, Run, RunConfig,
    RunParameters,
};
use legendre_core::heights::{lambda_height, neron_tate, weil_height, HeightConfig, HeightError};
use legendre_core::legendre::FiberPoint;
use legendre_core::torsion::{
    box_count_lower_bound, closed_form_root_count, count_roots_in_box, fiber_torsion_points,
    TorsionError, TorusBox,
};

#[derive(Parser)]
#[command(
    name = "legendre",
    version,
    about = "Heights, periods and torsion on the Legendre family"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Weil height of a projective point given by rational coordinates.
    Weil {
        #[arg(required = true, allow_hyphen_values = true)]
        coords: Vec<String>,
    },
    /// Néron–Tate height of a point on the fiber at a rational lambda.
    Nt {
        #[arg(long, allow_hyphen_values = true)]
        lambda: String,
        /// `x,y,z`
        #[arg(long, allow_hyphen_values = true)]
        point: String,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
    },
    /// Periods and tau of the fiber at lambda (`p/q` or `re,im`).
    Periods {
        #[arg(long, allow_hyphen_values = true)]
        lambda: String,
    },
    /// Max |Lambda(T(lambda)) - lambda| over an n x n grid in Sigma.
    LambdaCheck {
        #[arg(long, default_value_t = 10)]
        grid: usize,
    },
    /// Checks both cusp monodromy identities on pseudo-random samples.
    MonodromyCheck {
        #[arg(long, default_value_t = 20)]
        samples: usize,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
    },
    /// Duplication polynomials at level N.
    Duppoly(DuppolyArgs),
    /// The order^2 points of order dividing `order` on the fiber at lambda.
    Torsion {
        #[arg(long, allow_hyphen_values = true)]
        lambda: String,
        #[arg(long)]
        order: u32,
    },
    /// Solutions of N xi = xi0 in a box of the torus.
    CountRoots {
        /// `c1,...,c2g:eps`
        #[arg(long = "box")]
        bx: String,
        /// `a1,...,a2g`; defaults to the origin.
        #[arg(long)]
        xi0: Option<String>,
        #[arg(long)]
        n: u64,
    },
    /// Sweep a family and persist the run.
    Experiment(ExperimentArgs),
}

#[derive(Args)]
struct DuppolyArgs {
    #[arg(long)]
    level: u32,
    /// Print the term lists (levels up to 3).
    #[arg(long, conflicts_with = "verify")]
    emit: bool,
    /// Check the degree bounds and agreement with [2^N].
    #[arg(long)]
    verify: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    HeightIneq,
    SilvermanTate,
    Specialization,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(value_enum)]
    kind: Kind,
    /// JSON file or `builtin:x2` / `builtin:identity` / `builtin:two-torsion`.
    #[arg(long)]
    family: String,
    /// `a..b` (inclusive integers) or a comma list of rationals.
    #[arg(long)]
    samples: String,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long)]
    sequential: bool,
}

enum Failure {
    Input(String),
    Numeric(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Input(_) => 2,
            Failure::Numeric(_) => 3,
        }
    }
}

impl From<AnalyticError> for Failure {
    fn from(e: AnalyticError) -> Self {
        match e {
            AnalyticError::NoConvergence(_) => Failure::Numeric(e.to_string()),
            _ => Failure::Input(e.to_string()),
        }
    }
}

impl From<HeightError> for Failure {
    fn from(e: HeightError) -> Self {
        match e {
            HeightError::NonConvergence { .. } => Failure::Numeric(e.to_string()),
            _ => Failure::Input(e.to_string()),
        }
    }
}

impl From<TorsionError> for Failure {
    fn from(e: TorsionError) -> Self {
        match e {
            TorsionError::Verification { .. } => Failure::Numeric(e.to_string()),
            TorsionError::Analytic(a) => a.into(),
            _ => Failure::Input(e.to_string()),
        }
    }
}

impl From<ExperimentError> for Failure {
    fn from(e: ExperimentError) -> Self {
        if e.is_non_convergence() {
            Failure::Numeric(e.to_string())
        } else {
            Failure::Input(e.to_string())
        }
    }
}

fn bad(msg: impl Into<String>) -> Failure {
    Failure::Input(msg.into())
}

fn rational(s: &str) -> Result<num_rational::BigRational, Failure> {
    parse_rational(s.trim()).ok_or_else(|| bad(format!("not a rational number: {s:?}")))
}

fn floats(s: &str) -> Result<Vec<f64>, Failure> {
    s.split(',')
        .map(|x| {
            x.trim()
                .parse::<f64>()
                .map_err(|_| bad(format!("not a number: {x:?}")))
        })
        .collect()
}

// `p/q` or `re,im`.
fn complex_lambda(s: &str) -> Result<Complex64, Failure> {
    if s.contains(',') {
        match floats(s)?.as_slice() {
            [re, im] => Ok(Complex64::new(*re, *im)),
            _ => Err(bad(format!("expected re,im: {s:?}"))),
        }
    } else {
        let q = rational(s)?;
        Ok(Complex64::new(
            legendre_core::arith::rational_to_f64(&q),
            0.0,
        ))
    }
}

fn cjson(z: Complex64) -> Value {
    json!([z.re, z.im])
}

fn point_json(p: &ComplexFiberPoint) -> Value {
    match p.affine() {
        None => json!("O"),
        Some((x, y)) => json!({ "x": cjson(x), "y": cjson(y) }),
    }
}

// Weyl sequence in [0, 1): deterministic, well spread.
fn weyl(k: usize, alpha: f64) -> f64 {
    (k as f64 * alpha).fract()
}

fn run(cmd: Command) -> Result<Value, Failure> {
    match cmd {
        Command::Weil { coords } => {
            let qs = coords
                .iter()
                .map(|c| rational(c))
                .collect::<Result<Vec<_>, _>>()?;
            let p = normalize_projective(&qs).map_err(|e| bad(e.to_string()))?;
            let h = weil_height(&p);
            Ok(
                json!({ "point": p.to_string(), "height": h.value(), "max_abs": h.arg().to_string() }),
            )
        }
        Command::Nt { lambda, point, tol } => {
            let lam = rational(&lambda)?;
            let qs = point
                .split(',')
                .map(rational)
                .collect::<Result<Vec<_>, _>>()?;
            if qs.len() != 3 {
                return Err(bad("point needs three coordinates x,y,z"));
            }
            let p = normalize_projective(&qs).map_err(|e| bad(e.to_string()))?;
            let p = FiberPoint::new(p, lam.clone()).map_err(|e| bad(e.to_string()))?;
            let est = neron_tate(&p, &HeightConfig::with_tolerance(tol))?;
            Ok(json!({
                "point": p.to_string(),
                "lambda": lam.to_string(),
                "nt_height": est.value,
                "depth": est.depth,
                "error_bound": est.error_bound,
                "weil_height": weil_height(p.point()).value(),
                "h_lambda": lambda_height(&lam).value(),
                "rational_torsion_order": p.rational_torsion_order(),
            }))
        }
        Command::Periods { lambda } => {
            let lam = complex_lambda(&lambda)?;
            let pp = periods(lam)?;
            Ok(json!({
                "lambda": cjson(lam),
                "in_sigma": in_sigma(lam),
                "omega1": cjson(pp.omega1),
                "omega2": cjson(pp.omega2),
                "tau": cjson(pp.tau()),
            }))
        }
        Command::LambdaCheck { grid } => {
            if grid == 0 {
                return Err(bad("grid must be positive"));
            }
            let start = Instant::now();
            let mut worst = 0.0f64;
            for lam in sigma_grid(grid) {
                let back = lambda_of_tau(tau_of_lambda(lam)?)?;
                worst = worst.max((back - lam).norm());
            }
            let pass = worst < 1e-10;
            let doc = json!({
                "points": grid * grid,
                "max_error": worst,
                "seconds": start.elapsed().as_secs_f64(),
                "pass": pass,
            });
            check(pass, doc)
        }
        Command::MonodromyCheck { samples, tol } => {
            let (mut worst0, mut worst1) = (0.0f64, 0.0f64);
            for k in 1..=samples {
                let xi = [weyl(k, 0.618_033_988_75), weyl(k, 0.414_213_562_37)];
                let tau = Complex64::new(
                    weyl(k, 0.732_050_807_57) - 0.5,
                    0.7 + 0.8 * weyl(k, 0.236_067_977_5),
                );
                let (r0, r1) = monodromy_residuals(xi, tau)?;
                worst0 = worst0.max(r0);
                worst1 = worst1.max(r1);
            }
            let pass = worst0 < tol && worst1 < tol;
            check(
                pass,
                json!({
                    "samples": samples,
                    "max_residual_shift0": worst0,
                    "max_residual_shift1": worst1,
                    "pass": pass,
                }),
            )
        }
        Command::Duppoly(args) => duppoly(args),
        Command::Torsion { lambda, order } => {
            let lam = complex_lambda(&lambda)?;
            let pts = fiber_torsion_points(lam, order)?;
            let list: Vec<Value> = pts
                .iter()
                .map(|p| json!({ "xi": p.xi, "point": point_json(&p.point) }))
                .collect();
            Ok(json!({ "lambda": cjson(lam), "order": order, "count": list.len(), "points": list }))
        }
        Command::CountRoots { bx, xi0, n } => count_roots(&bx, xi0.as_deref(), n),
        Command::Experiment(args) => experiment(args),
    }
}

// A failed self-check is reported on stdout and signalled with status 3.
fn check(pass: bool, doc: Value) -> Result<Value, Failure> {
    if pass {
        Ok(doc)
    } else {
        println!("{}", serde_json::to_string_pretty(&doc).unwrap());
        Err(Failure::Numeric("check failed".into()))
    }
}

// Points of infinite order on a few curves, plus a 2-torsion point.
fn sample_points() -> Vec<FiberPoint> {
    let mut out = Vec::new();
    for k in 2..=5i64 {
        let lam = num_rational::BigRational::from_integer((2 - 2 * k * k).into());
        let p =
            FiberPoint::from_i64s([2, 2 * k, 1], lam.clone()).expect("(2, 2k) lies on the fiber");
        out.push(p.clone());
        out.push(p.mul_n(3));
        out.push(FiberPoint::from_i64s([0, 0, 1], lam).unwrap());
    }
    out
}

fn duppoly(args: DuppolyArgs) -> Result<Value, Failure> {
    let level = args.level;
    if level == 0 {
        return Err(bad("level must be at least 1"));
    }
    if args.emit {
        if level > 3 {
            return Err(bad("term lists are only emitted up to level 3"));
        }
        let triple = triples_up_to(level).pop().unwrap();
        print!("{}", triple.emit());
        return Ok(Value::Null);
    }
    let pts = sample_points();
    let mut levels = Vec::new();
    let mut ok = true;
    for n in 1..=level {
        let agree = pts
            .iter()
            .map(|p| dup_apply(p, n).map(|q| q == p.mul_n(1 << n)))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| Failure::Numeric(e.to_string()))?
            .into_iter()
            .all(|b| b);
        let entry = if n <= 3 {
            let triple = triples_up_to(n).pop().unwrap();
            let profile = triple.degree_profile();
            let expanded_agree = pts.iter().all(|p| {
                dup_apply_triple(p, &triple)
                    .map(|q| q == p.mul_n(1 << n))
                    .unwrap_or(false)
            });
            let bounds = profile.within_bounds(n);
            ok &= agree && expanded_agree && bounds;
            json!({
                "level": n,
                "method": "expanded",
                "homogeneous_degree": profile.homogeneous_degree,
                "max_x3_degree": profile.max_x3_degree,
                "max_total_degree": profile.max_total_degree,
                "bounds_hold": bounds,
                "matches_multiplication": agree && expanded_agree,
            })
        } else {
            let cert = certify_degrees(n, &[[1, 2, 3], [2, -1, 5], [3, 1, -2]]);
            ok &= agree && cert.holds();
            json!({
                "level": n,
                "method": "certificate",
                "homogeneous_degree": cert.profile.homogeneous_degree,
                "max_x3_degree": cert.profile.max_x3_degree,
                "max_total_degree": cert.profile.max_total_degree,
                "bounds_hold": cert.holds(),
                "matches_multiplication": agree,
            })
        };
        levels.push(entry);
    }
    if !args.verify {
        return Ok(json!({ "levels": levels }));
    }
    check(ok, json!({ "levels": levels, "pass": ok }))
}

fn count_roots(bx: &str, xi0: Option<&str>, n: u64) -> Result<Value, Failure> {
    let (center, eps) = bx
        .split_once(':')
        .ok_or_else(|| bad("box must look like c1,...,c2g:eps"))?;
    let center = floats(center)?;
    let eps: f64 = eps
        .trim()
        .parse()
        .map_err(|_| bad(format!("not a number: {eps:?}")))?;
    let bx = TorusBox::new(center, eps)?;
    let xi0 = match xi0 {
        Some(s) => floats(s)?,
        None => vec![0.0; bx.dimension()],
    };
    let xi0 = TorusCoordinate::new(xi0)?;
    let closed = closed_form_root_count(&bx, &xi0, n)?;
    // Enumeration is only worth doing when it is small.
    let enumerated = if closed <= 1_000_000u32.into() {
        Some(count_roots_in_box(&bx, &xi0, n)?.len())
    } else {
        None
    };
    let bound = box_count_lower_bound(&bx, n);
    let applies = (eps * n as f64) >= 1.0;
    Ok(json!({
        "n": n,
        "closed_form": closed.to_string(),
        "enumerated": enumerated,
        "lower_bound": bound.to_string(),
        "lower_bound_applies": applies,
    }))
}

fn experiment(args: ExperimentArgs) -> Result<Value, Failure> {
    let family = FamilySpec::resolve(&args.family)?;
    let samples = parse_samples(&args.samples)?;
    if !(args.tol > 0.0) {
        return Err(bad("tolerance must be positive"));
    }
    let mut cfg = RunConfig::with_tolerance(args.tol);
    if args.sequential {
        cfg.execution = Execution::Sequential;
    }
    let run: Box<dyn Run> = match args.kind {
        Kind::HeightIneq => Box::new(run_height_inequality(&family, &samples, &cfg)),
        Kind::SilvermanTate => Box::new(run_silverman_tate(&family, &samples, &cfg)),
        Kind::Specialization => Box::new(run_specialization_ratio(&family, &samples, &cfg)),
    };
    let params = RunParameters::new(&samples, &cfg);
    let (json_path, csv_path) = write_run(&args.out, &family, &params, run.as_ref())?;
    Ok(json!({
        "kind": run.kind(),
        "records": run.records().len(),
        "skipped": run.skipped().len(),
        "diagnostics": run.diagnostics(),
        "json": json_path,
        "csv": csv_path,
    }))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli.command) {
        Ok(Value::Null) => ExitCode::SUCCESS,
        Ok(doc) => {
            println!("{}", serde_json::to_string_pretty(&doc).unwrap());
            ExitCode::SUCCESS
        }
        Err(f) => {
            let (Failure::Input(msg) | Failure::Numeric(msg)) = &f;
            eprintln!("error: {msg}");
            ExitCode::from(f.code())
        }
    }
}
