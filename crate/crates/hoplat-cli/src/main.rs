//! Command-line driver: construct rules, export points, evaluate the
//! criterion and its bounds, integrate test functions, run convergence
//! studies, and self-check the numerical core.
//!
//! Every command is deterministic given its flags and seeds; no environment
//! variables are consulted. Failures print one machine-readable JSON object
//! to stderr and exit nonzero.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use hoplat::cbc::{cbc_fast, cbc_slow, verify_construction};
use hoplat::criterion::{b_dual_oracle, b_points, cbc_bound, lambda_grid};
use hoplat::f2poly::F2Poly;
use hoplat::format::{
    parse_weight_spec, points_to_binary, points_to_csv, PointExportHeader, RuleFile,
};
use hoplat::kernel::{
    a_lambda_1, a_lambda_2, d_alpha, d_alpha_exact, omega_series_table, OmegaTables, WeightModel,
};
use hoplat::points::{self, RuleSpec, ShiftVector, SplitMix64, DEFAULT_SHIFT_PRECISION};
use hoplat::qmc::{
    self, convergence_study, integrate, worst_case_error_kernel, Integrand, StudyOptions,
};
use hoplat::{Error, Result};

#[derive(Parser)]
#[command(name = "hoplat", version, about = "Higher-order polynomial lattice rules")]
struct Cli {
    /// Worker threads for internal parallel maps (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Construct a rule by component-by-component search.
    Construct(ConstructArgs),
    /// Export the folded (optionally shifted) point set.
    Points(PointsArgs),
    /// Evaluate the quality criterion and its guaranteed bounds.
    Criterion(CriterionArgs),
    /// Randomized integration of a named test function.
    Integrate(IntegrateArgs),
    /// Construct rules over an m-range and fit convergence slopes.
    Convergence(ConvergenceArgs),
    /// Run the built-in consistency checks.
    Selftest(SelftestArgs),
}

#[derive(Args)]
struct ConstructArgs {
    /// Number of coordinates.
    #[arg(short)]
    s: usize,
    /// log2 of the point count.
    #[arg(short)]
    m: u32,
    #[arg(long)]
    alpha: u32,
    /// Modulus degree; defaults to max(1, ceil(alpha m / 2)).
    #[arg(long)]
    mprime: Option<u32>,
    /// Weight specification, e.g. prod:0.5^j (see the points module docs).
    #[arg(long)]
    weights: String,
    /// Use the reference quadratic search (required for general weights).
    #[arg(long)]
    slow: bool,
    /// Rule file to write; the document goes to stdout when omitted.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct PointsArgs {
    #[arg(long)]
    rule: PathBuf,
    /// Digital-shift seed; omitted means the zero shift.
    #[arg(long)]
    seed: Option<u64>,
    /// Shift precision in bits; defaults to max(53, m').
    #[arg(long)]
    precision: Option<u32>,
    #[arg(long, value_enum, default_value_t = ExportFormat::Csv)]
    format: ExportFormat,
    /// Output file; CSV defaults to stdout, binary requires a file.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ExportFormat {
    Csv,
    Bin,
}

#[derive(Args)]
struct CriterionArgs {
    #[arg(long)]
    rule: PathBuf,
    /// Also run the truncated dual-space oracle up to this index bound.
    #[arg(long)]
    oracle: Option<u64>,
}

#[derive(Args)]
struct IntegrateArgs {
    #[arg(long)]
    rule: PathBuf,
    /// Integrand name: one, b2prod, or x1.
    #[arg(long = "fn")]
    function: String,
    /// Number of independent randomizations.
    #[arg(short = 'R', long = "shifts", default_value_t = 64)]
    shifts: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct ConvergenceArgs {
    #[arg(short)]
    s: usize,
    #[arg(long)]
    alpha: u32,
    /// Inclusive m range, e.g. 6..12.
    #[arg(long)]
    m: String,
    #[arg(long)]
    weights: String,
    /// Integrand for the RMS error column.
    #[arg(long = "fn", default_value = "b2prod")]
    function: String,
    #[arg(short = 'R', long = "shifts", default_value_t = 32)]
    shifts: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Shifts for the kernel-error columns; 0 skips them.
    #[arg(long, default_value_t = 0)]
    kernel_shifts: u32,
    /// CSV output file; stdout when omitted.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SelftestArgs {
    /// Dump the exact constants as JSON instead of running checks.
    #[arg(long)]
    constants: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        // Ignore failure: the global pool can only be set once, which is fine.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!(
                "{}",
                json!({ "error": e.to_string(), "kind": error_kind(&e) })
            );
            ExitCode::FAILURE
        }
    }
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::DivisionByZero => "division_by_zero",
        Error::NotIrreducible(_) => "not_irreducible",
        Error::DegreeOutOfRange { .. } => "degree_out_of_range",
        Error::AlphaUnsupported(_) => "alpha_unsupported",
        Error::LambdaOutOfRange { .. } => "lambda_out_of_range",
        Error::BoundViolated { .. } => "bound_violated",
        Error::InvalidParameter(_) => "invalid_parameter",
        Error::Io(_) => "io",
        Error::Json(_) => "json",
    }
}

fn run(command: Command) -> Result<ExitCode> {
    match command {
        Command::Construct(args) => cmd_construct(args)?,
        Command::Points(args) => cmd_points(args)?,
        Command::Criterion(args) => cmd_criterion(args)?,
        Command::Integrate(args) => cmd_integrate(args)?,
        Command::Convergence(args) => cmd_convergence(args)?,
        Command::Selftest(args) => return cmd_selftest(args),
    }
    Ok(ExitCode::SUCCESS)
}

fn load_rule(path: &Path) -> Result<RuleSpec> {
    RuleFile::read(path)?.to_rule()
}

fn cmd_construct(args: ConstructArgs) -> Result<()> {
    let mprime = args
        .mprime
        .unwrap_or_else(|| qmc::default_mprime(args.alpha, args.m).max(1));
    let weights = parse_weight_spec(&args.weights, args.s)?;
    let (rule, report) = if args.slow {
        cbc_slow(args.s, args.m, mprime, args.alpha, weights)?
    } else {
        cbc_fast(args.s, args.m, mprime, args.alpha, weights)?
    };
    let verdict = verify_construction(&rule)?;
    let construction = if args.slow { "cbc_slow" } else { "cbc_fast" };
    let file = RuleFile::from_rule(&rule, construction, &chrono::Utc::now().to_rfc3339());
    match args.output {
        Some(path) => {
            file.write(&path)?;
            let summary = json!({
                "file": path.display().to_string(),
                "s": rule.s(),
                "m": rule.m(),
                "mprime": rule.mprime(),
                "alpha": rule.alpha(),
                "construction": construction,
                "b": verdict.b,
                "min_bound": verdict.min_bound,
                "tightest_lambda": verdict.tightest_lambda,
                "seconds": report.step_seconds.iter().sum::<f64>(),
            });
            println!("{}", serde_json::to_string_pretty(&summary)?);
        }
        None => print!("{}", file.to_json()?),
    }
    Ok(())
}

fn cmd_points(args: PointsArgs) -> Result<()> {
    let rule = load_rule(&args.rule)?;
    let precision = args
        .precision
        .unwrap_or(DEFAULT_SHIFT_PRECISION.max(rule.mprime()));
    if precision < rule.mprime() || precision > 63 {
        return Err(Error::InvalidParameter(format!(
            "precision {} not in [m' = {}, 63]",
            precision,
            rule.mprime()
        )));
    }
    let set = match args.seed {
        Some(seed) => points::randomize(&rule, seed, precision)?,
        None => points::randomize_with_shift(&rule, &ShiftVector::zero(rule.s(), precision)),
    };
    match args.format {
        ExportFormat::Csv => {
            let text = points_to_csv(&set.points);
            match args.output {
                Some(path) => fs::write(path, text)?,
                None => print!("{}", text),
            }
        }
        ExportFormat::Bin => {
            let path = args.output.ok_or_else(|| {
                Error::InvalidParameter("binary export needs --output".into())
            })?;
            let header = PointExportHeader {
                s: rule.s() as u32,
                m: rule.m(),
                mprime: rule.mprime(),
                precision,
            };
            fs::write(path, points_to_binary(&header, &set.points))?;
        }
    }
    Ok(())
}

fn cmd_criterion(args: CriterionArgs) -> Result<()> {
    let rule = load_rule(&args.rule)?;
    let crit = b_points(&rule);
    let mut bounds = Vec::new();
    let mut min_bound = f64::INFINITY;
    let mut tightest = f64::NAN;
    for lam in lambda_grid(rule.alpha()) {
        let b = cbc_bound(rule.alpha(), rule.weights(), rule.m(), rule.mprime(), lam)?;
        if b < min_bound {
            min_bound = b;
            tightest = lam;
        }
        bounds.push(json!([lam, b]));
    }
    let mut doc = json!({
        "value": crit.value,
        "alpha": crit.alpha,
        "mprime": crit.mprime,
        "n_points": crit.n_points,
        "lambda_bounds": bounds,
        "min_bound": min_bound,
        "tightest_lambda": tightest,
    });
    if let Some(k_max) = args.oracle {
        let oracle = b_dual_oracle(&rule, k_max)?;
        doc["oracle"] = json!({
            "value": oracle.value,
            "tail": oracle.tail,
            "k_max": oracle.k_max,
        });
    }
    println!("{}", serde_json::to_string_pretty(&doc)?);
    Ok(())
}

fn cmd_integrate(args: IntegrateArgs) -> Result<()> {
    let rule = load_rule(&args.rule)?;
    let integrand = Integrand::by_name(&args.function, rule.s())?;
    let out = integrate(&rule, &integrand, args.shifts, args.seed)?;
    let doc = json!({
        "integrand": integrand.name(),
        "estimate": out.estimate,
        "rms_error": out.rms_error,
        "shifts": args.shifts,
        "seed": args.seed,
    });
    println!("{}", serde_json::to_string_pretty(&doc)?);
    Ok(())
}

/// "lo..hi" (inclusive; "lo..=hi" also accepted).
fn parse_m_range(text: &str) -> Result<(u32, u32)> {
    let parse = |part: &str| -> Result<u32> {
        part.parse()
            .map_err(|_| Error::InvalidParameter(format!("bad m range '{}'", text)))
    };
    match text.split_once("..") {
        Some((lo, hi)) => Ok((parse(lo)?, parse(hi.strip_prefix('=').unwrap_or(hi))?)),
        None => Err(Error::InvalidParameter(format!(
            "m range '{}' must look like 6..12",
            text
        ))),
    }
}

fn csv_float(v: f64) -> String {
    format!("{:.16e}", v)
}

fn csv_opt(v: Option<f64>) -> String {
    v.map(csv_float).unwrap_or_default()
}

fn csv_slope(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{:.6}", v)
    }
}

fn cmd_convergence(args: ConvergenceArgs) -> Result<()> {
    let (m_lo, m_hi) = parse_m_range(&args.m)?;
    let weights = parse_weight_spec(&args.weights, args.s)?;
    let integrand = Integrand::by_name(&args.function, args.s)?;
    let options = StudyOptions {
        shifts: args.shifts,
        seed: args.seed,
        kernel_shifts: args.kernel_shifts,
    };
    let study = convergence_study(args.s, args.alpha, &weights, m_lo, m_hi, &integrand, &options)?;
    let mut out = String::from(
        "m,N,B,mse_mean,mse_stderr,rms_err,slope_b_full,slope_b_upper,slope_rms_full,slope_rms_upper\n",
    );
    for r in &study.records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            r.m,
            r.n_points,
            csv_float(r.b_value),
            csv_opt(r.kernel_mse_mean),
            csv_opt(r.kernel_mse_stderr),
            csv_float(r.rms_error),
            csv_slope(study.b_slope.full),
            csv_slope(study.b_slope.upper_half),
            csv_slope(study.rms_slope.full),
            csv_slope(study.rms_slope.upper_half),
        ));
    }
    match args.output {
        Some(path) => fs::write(path, out)?,
        None => print!("{}", out),
    }
    Ok(())
}

fn cmd_selftest(args: SelftestArgs) -> Result<ExitCode> {
    if args.constants {
        let doc = json!({
            "d_alpha": {
                "2": d_alpha(2)?,
                "3": d_alpha(3)?,
                "2_exact": d_alpha_exact(2)?.to_string(),
                "3_exact": d_alpha_exact(3)?.to_string(),
            },
            "a_lambda_1": { "alpha2_lambda1": a_lambda_1(2, 1.0)?, "alpha3_lambda1": a_lambda_1(3, 1.0)? },
            "a_lambda_2": { "alpha2_lambda1": a_lambda_2(2, 1.0)?, "alpha3_lambda1": a_lambda_2(3, 1.0)? },
            "omega_zero_alpha2": OmegaTables::new(2, 6)?.omega_zero(),
        });
        println!("{}", serde_json::to_string_pretty(&doc)?);
        return Ok(ExitCode::SUCCESS);
    }

    type Check = std::result::Result<(), String>;
    let fail = |e: Error| e.to_string();

    let mut failures = 0u32;
    let mut check = |name: &str, outcome: Check| match outcome {
        Ok(()) => println!("ok   {}", name),
        Err(msg) => {
            failures += 1;
            println!("FAIL {}: {}", name, msg);
        }
    };

    check("splitmix reference vector", {
        let mut rng = SplitMix64::new(0);
        if rng.next_u64() == 0xE220A8397B1DCDAF && rng.next_u64() == 0x6E789E6AA1B965F4 {
            Ok(())
        } else {
            Err("sequence diverged from the documented recurrence".into())
        }
    });

    check("exact constants", (|| -> Check {
        let checks = [
            (d_alpha(2).map_err(fail)?, 59.0 / 144.0),
            (d_alpha(3).map_err(fail)?, 1475.0 / 5184.0),
            (a_lambda_1(2, 1.0).map_err(fail)?, 5.0 / 14.0),
            (a_lambda_2(2, 1.0).map_err(fail)?, 8.0 / 21.0),
        ];
        if checks.iter().all(|(got, want)| (got - want).abs() < 1e-12) {
            Ok(())
        } else {
            Err(format!("constant drifted: {:?}", checks))
        }
    })());

    check("digit-weight closed form vs series", (|| -> Check {
        let tables = OmegaTables::new(2, 3).map_err(fail)?;
        let (series, tail) = omega_series_table(2, 3, 1 << 14);
        let worst = (0..8u64)
            .map(|l| (tables.omega(l) - series[l as usize]).abs())
            .fold(0.0, f64::max);
        if worst <= tail + 1e-12 {
            Ok(())
        } else {
            Err(format!("max deviation {} exceeds tail {}", worst, tail))
        }
    })());

    let tiny = RuleSpec::new(
        2,
        2,
        3,
        2,
        F2Poly::find_irreducible(3)?,
        vec![F2Poly::ONE, F2Poly::from_bits(0b110)],
        WeightModel::product(vec![1.0, 0.5])?,
    )?;

    check("character sum is the dual indicator", (|| -> Check {
        for k1 in 0..32u64 {
            for k2 in 0..32u64 {
                let ks = [k1, k2];
                let cs = hoplat::criterion::character_sum(&ks, &tiny);
                let member = hoplat::criterion::dual_membership(&ks, &tiny);
                if cs != if member { 1.0 } else { 0.0 } {
                    return Err(format!("mismatch at ({}, {}): {} vs {}", k1, k2, cs, member));
                }
            }
        }
        Ok(())
    })());

    check("criterion point form vs dual oracle", (|| -> Check {
        let point = b_points(&tiny).value;
        let oracle = b_dual_oracle(&tiny, 1 << 10).map_err(fail)?;
        if (point - oracle.value).abs() <= oracle.tail + 1e-12 {
            Ok(())
        } else {
            Err(format!(
                "point {} vs oracle {} (tail {})",
                point, oracle.value, oracle.tail
            ))
        }
    })());

    check("fast and slow construction agree", (|| -> Check {
        let w = WeightModel::product(vec![1.0, 0.5]).map_err(fail)?;
        let (rf, repf) = cbc_fast(2, 3, 4, 2, w.clone()).map_err(fail)?;
        let (rs, reps) = cbc_slow(2, 3, 4, 2, w).map_err(fail)?;
        if rf.generators() == rs.generators() && repf.b_trace == reps.b_trace {
            Ok(())
        } else {
            Err("construction paths diverged".into())
        }
    })());

    check("constructed rule meets its bound", (|| -> Check {
        let w = WeightModel::product(vec![1.0, 0.5, 0.25]).map_err(fail)?;
        let (rule, _) = cbc_fast(3, 4, 4, 2, w).map_err(fail)?;
        verify_construction(&rule).map(|_| ()).map_err(fail)
    })());

    check("kernel error of the origin point", (|| -> Check {
        let w = WeightModel::product(vec![1.0]).map_err(fail)?;
        let e2 = worst_case_error_kernel(&[vec![0.0]], 2, &w).map_err(fail)?;
        if (e2 - 31.0 / 120.0).abs() < 1e-14 {
            Ok(())
        } else {
            Err(format!("expected 31/120, got {}", e2))
        }
    })());

    check("rule file round trip", (|| -> Check {
        let file = RuleFile::from_rule(&tiny, "manual", "1970-01-01T00:00:00Z");
        let text = file.to_json().map_err(fail)?;
        let back = RuleFile::from_json(&text).map_err(fail)?;
        if back.to_json().map_err(fail)? == text {
            Ok(())
        } else {
            Err("serialization is not idempotent".into())
        }
    })());

    if failures == 0 {
        println!("all checks passed");
        Ok(ExitCode::SUCCESS)
    } else {
        println!("{} check(s) failed", failures);
        Ok(ExitCode::FAILURE)
    }
}
