use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use latticerisk::pipeline::{self, RollingConfig};
use latticerisk::theory;
use latticerisk::{
    submodularity_gap, DeviationWeight, DistortionFunction, EmpiricalSample, LossFunction, MeasureKind,
    PairGenerator, RiskError, RiskMeasureSpec, DEFAULT_EPSILON,
};
use serde_json::json;

macro_rules! outln {
    ($($t:tt)*) => { emit(format_args!($($t)*)) };
}

/// Writes one stdout line; a closed pipe (e.g. `| head`) ends the process quietly.
fn emit(args: std::fmt::Arguments) {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    if let Err(e) = out.write_fmt(args).and_then(|_| out.write_all(b"\n")) {
        if e.kind() == std::io::ErrorKind::BrokenPipe {
            std::process::exit(0);
        }
        eprintln!("latticerisk: cannot write output: {e}");
        std::process::exit(2);
    }
}

#[derive(Parser, Debug)]
#[command(name = "latticerisk", version, about = "Submodularity checks for law-invariant risk measures")]
struct Cli {
    /// Worker threads for sweeps and the pipeline (default: all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Csv,
    Json,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Curvature profile and linear-dominance verdict for a shortfall loss
    Check(CheckArgs),
    /// Seeded random-pair submodularity sweep
    Sweep(SweepArgs),
    /// Build and measure a constructive counterexample
    Counterexample(CounterexampleArgs),
    /// Rolling-window violation analysis on a price panel
    Pipeline(PipelineArgs),
    /// Run the invariant suite
    Selftest,
}

#[derive(Args, Debug)]
struct CheckArgs {
    /// Loss spec, e.g. `exp:1`, `poly2exp`, `expectile:1`, `piecewise:1,2`
    #[arg(long)]
    loss: String,
    #[arg(long, default_value_t = -20.0, allow_hyphen_values = true)]
    lo: f64,
    #[arg(long, default_value_t = 20.0, allow_hyphen_values = true)]
    hi: f64,
    #[arg(long, default_value_t = 1e-3)]
    step: f64,
    /// Exit 1 when the loss is not feasible
    #[arg(long)]
    expect_feasible: bool,
}

#[derive(Args, Debug)]
struct SweepArgs {
    /// Measure spec, e.g. `es:0.95`, `oce:exp:1`, `shortfall:expectile:1`
    #[arg(long)]
    measure: String,
    #[arg(long)]
    atoms: usize,
    #[arg(long)]
    trials: usize,
    #[arg(long)]
    seed: u64,
    /// gaussian, heavy_tail, two_point or three_point
    #[arg(long, default_value = "gaussian")]
    generator: String,
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    epsilon: f64,
    /// Exit 1 if any violation is found
    #[arg(long, conflicts_with = "expect_violation")]
    expect_zero: bool,
    /// Exit 1 if no violation is found
    #[arg(long)]
    expect_violation: bool,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Family {
    Aes,
    Mmd,
    ShortfallJump,
    Ce,
}

#[derive(Args, Debug)]
struct CounterexampleArgs {
    #[arg(long, value_enum)]
    family: Family,
    /// aes: slope and intercept of the tail map
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    a: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    b: f64,
    /// aes: upper level q and lower level p1 < q
    #[arg(long, default_value_t = 0.5)]
    q: f64,
    #[arg(long, default_value_t = 0.25)]
    p1: f64,
    /// aes / mmd: number of atoms
    #[arg(long)]
    atoms: Option<usize>,
    /// mmd: concave distortion
    #[arg(long, default_value = "es:0.5")]
    phi: String,
    /// mmd: deviation weight
    #[arg(long, default_value = "square")]
    g: String,
    /// mmd: explicit level triple `p,q,r`
    #[arg(long)]
    triple: Option<String>,
    /// shortfall-jump: slopes below and above zero
    #[arg(long, default_value_t = 1.0)]
    sminus: f64,
    #[arg(long, default_value_t = 2.0)]
    splus: f64,
    /// shortfall-jump: step size
    #[arg(long, default_value_t = 1e-3)]
    h: f64,
    /// ce: strictly increasing loss and search range
    #[arg(long, default_value = "cubic")]
    loss: String,
    #[arg(long, default_value_t = -2.0, allow_hyphen_values = true)]
    lo: f64,
    #[arg(long, default_value_t = 2.0, allow_hyphen_values = true)]
    hi: f64,
    #[arg(long, default_value_t = 40)]
    steps: usize,
}

#[derive(Args, Debug)]
struct PipelineArgs {
    /// Long-format CSV with columns date,ticker,adj_close
    #[arg(long, required_unless_present = "synthetic", conflicts_with = "synthetic")]
    prices: Option<PathBuf>,
    /// Generate a synthetic panel instead of reading prices
    #[arg(long)]
    synthetic: bool,
    #[arg(long, default_value_t = 60)]
    days: usize,
    #[arg(long, default_value_t = 4)]
    assets: usize,
    #[arg(long, default_value_t = 0.02)]
    vol: f64,
    #[arg(long, default_value_t = 0.05)]
    jump_prob: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

enum Failure {
    Expectation(String),
    Usage(String),
}

impl From<RiskError> for Failure {
    fn from(e: RiskError) -> Self {
        match e {
            RiskError::Search(_) | RiskError::Numeric(_) | RiskError::Bracket(_) => Failure::Expectation(e.to_string()),
            _ => Failure::Usage(e.to_string()),
        }
    }
}

type Outcome = std::result::Result<(), Failure>;

fn emit_json(v: &serde_json::Value) {
    outln!("{}", serde_json::to_string_pretty(v).expect("json value"));
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "none".into(), |x| format!("{x}"))
}

fn csv_line(fields: &[String]) -> String {
    fields
        .iter()
        .map(|f| if f.contains([',', '"']) { format!("\"{}\"", f.replace('"', "\"\"")) } else { f.clone() })
        .collect::<Vec<_>>()
        .join(",")
}

fn run_check(a: &CheckArgs, format: Format) -> Outcome {
    let ell = LossFunction::parse(&a.loss)?;
    let profile = theory::curvature_profile(&ell, a.lo, a.hi, a.step)?;
    let v = theory::linear_dominance_check(&profile, &ell)?;
    match format {
        Format::Json => emit_json(&serde_json::to_value(&v).expect("verdict")),
        Format::Csv => {
            outln!("loss,feasible,alpha_plus,alpha_minus,h_at_zero,r_min,r_max,sufficient_condition");
            outln!(
                "{}",
                csv_line(&[
                    v.loss.clone(),
                    v.feasible.to_string(),
                    fmt_opt(v.alpha_plus),
                    fmt_opt(v.alpha_minus),
                    v.h_at_zero.to_string(),
                    v.r_min.to_string(),
                    v.r_max.to_string(),
                    v.sufficient_condition_holds.to_string(),
                ])
            );
        }
        Format::Text => {
            outln!("loss: {}", v.loss);
            outln!("grid: [{}, {}] step {}", v.grid_lo, v.grid_hi, v.grid_step);
            outln!("R range: [{:.6}, {:.6}]", v.r_min, v.r_max);
            outln!("alpha+: {}  alpha-: {}", fmt_opt(v.alpha_plus), fmt_opt(v.alpha_minus));
            outln!("h(0): {:.6e}", v.h_at_zero);
            outln!("sup R <= 2 inf R: {}", v.sufficient_condition_holds);
            match v.lambda_interval {
                Some((l, u)) => outln!("verdict: feasible, lambda in [{l}, {u}]"),
                None => {
                    outln!("verdict: infeasible");
                    if !v.witnesses.is_empty() {
                        let w: Vec<String> = v.witnesses.iter().take(8).map(|x| format!("{x}")).collect();
                        outln!("witnesses: {}", w.join(" "));
                    }
                }
            }
            if v.one_sided {
                outln!("note: grid covers only one side of zero");
            }
        }
    }
    if a.expect_feasible && !v.feasible {
        return Err(Failure::Expectation(format!("`{}` is not feasible", v.loss)));
    }
    Ok(())
}

fn run_sweep(a: &SweepArgs, format: Format) -> Outcome {
    let spec: RiskMeasureSpec = a.measure.parse()?;
    let generator: PairGenerator = a.generator.parse()?;
    let r = latticerisk::random_pair_sweep(&spec, a.atoms, a.trials, a.seed, generator, a.epsilon)?;
    match format {
        Format::Json => emit_json(&serde_json::to_value(&r).expect("report")),
        Format::Csv => {
            outln!("measure,generator,n_atoms,trials,seed,epsilon,violations,worst_gap");
            outln!(
                "{}",
                csv_line(&[
                    r.measure.clone(),
                    r.generator.to_string(),
                    r.n_atoms.to_string(),
                    r.trials.to_string(),
                    r.seed.to_string(),
                    r.epsilon.to_string(),
                    r.violations.to_string(),
                    r.worst_gap.to_string(),
                ])
            );
        }
        Format::Text => {
            outln!(
                "{}: {} violations in {} trials (n={}, generator={}, seed={}, epsilon={:e})",
                r.measure, r.violations, r.trials, r.n_atoms, r.generator, r.seed, r.epsilon
            );
            outln!("worst gap: {:.6e}", r.worst_gap);
            if r.violations > 0 {
                outln!("worst x: {:?}", r.worst_pair.0.as_slice());
                outln!("worst y: {:?}", r.worst_pair.1.as_slice());
            }
        }
    }
    if a.expect_zero && r.violations > 0 {
        return Err(Failure::Expectation(format!("expected zero violations, found {}", r.violations)));
    }
    if a.expect_violation && r.violations == 0 {
        return Err(Failure::Expectation("expected a violation, found none".into()));
    }
    Ok(())
}

fn pair_fields(x: &EmpiricalSample, y: &EmpiricalSample) -> serde_json::Value {
    json!({ "x": x.as_slice(), "y": y.as_slice() })
}

fn print_pair(x: &EmpiricalSample, y: &EmpiricalSample) {
    outln!("x: {:?}", x.as_slice());
    outln!("y: {:?}", y.as_slice());
}

fn parse_triple(s: &str) -> std::result::Result<(f64, f64, f64), Failure> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Failure::Usage(format!("bad --triple `{s}`: {e}")))?;
    match v[..] {
        [p, q, r] => Ok((p, q, r)),
        _ => Err(Failure::Usage(format!("--triple needs three values, got `{s}`"))),
    }
}

fn run_counterexample(a: &CounterexampleArgs, format: Format) -> Outcome {
    // (family, headline number, whether the counterexample bites, json)
    let (name, value, holds, body) = match a.family {
        Family::Aes => {
            let n = a.atoms.unwrap_or(10_000);
            let ce = theory::aes_counterexample(a.a, a.b, a.q, a.p1, n)?;
            let measured = ce.measured_gap()?;
            let deficit = ce.aes_deficit()?;
            if format == Format::Text {
                if n <= 20 {
                    print_pair(&ce.x, &ce.y);
                }
                outln!("atoms: {n}, q: {}, p1: {}", ce.q, ce.p1);
                outln!("grid: {}", ce.proof_grid()?);
                outln!("measured ES gap: {measured:.7}");
                outln!("predicted ES gap: {:.7}", ce.predicted_gap);
                outln!("adjusted ES deficit: {deficit:.7e}");
            }
            let mut body = json!({
                "atoms": n, "q": ce.q, "p1": ce.p1, "grid": ce.proof_grid()?.to_string(),
                "measured_gap": measured, "predicted_gap": ce.predicted_gap, "deficit": deficit,
            });
            if n <= 20 {
                body["pair"] = pair_fields(&ce.x, &ce.y);
            }
            ("aes", deficit, deficit > DEFAULT_EPSILON, body)
        }
        Family::Mmd => {
            let phi = DistortionFunction::parse(&a.phi)?;
            let g = DeviationWeight::parse(&a.g)?;
            let n = a.atoms.unwrap_or(10);
            let ce = match &a.triple {
                Some(t) => theory::mmd_counterexample_with_triple(&phi, &g, n, parse_triple(t)?)?,
                None => theory::mmd_counterexample(&phi, &g, n)?,
            };
            let spec = RiskMeasureSpec::new(MeasureKind::MMD(g, phi))?;
            let gap = submodularity_gap(&spec, &ce.x, &ce.y, DEFAULT_EPSILON)?;
            if format == Format::Text {
                print_pair(&ce.x, &ce.y);
                outln!("measure: {}", spec.label);
                outln!("levels: p={} q={} r={}", ce.p, ce.q, ce.r);
                outln!("gap: {:.6e}", gap.gap);
                outln!("deficit: {:.6e}", -gap.gap);
            }
            let body = json!({
                "measure": spec.label, "p": ce.p, "q": ce.q, "r": ce.r, "scale": ce.scale,
                "pair": pair_fields(&ce.x, &ce.y), "gap": gap.gap, "deficit": -gap.gap,
            });
            ("mmd", -gap.gap, gap.violated, body)
        }
        Family::ShortfallJump => {
            let d = theory::shortfall_jump_deficit(a.sminus, a.splus, a.h)?;
            if format == Format::Text {
                outln!("s-: {}, s+: {}, h: {}", a.sminus, a.splus, d.h);
                outln!("alpha: {:.6}, beta: {:.6}, gamma: {:.6}", d.alpha, d.beta, d.gamma);
                outln!("ratio: {:.6}", d.measured_ratio);
                outln!("limit ratio: {:.6}", d.limit_ratio);
            }
            let body = serde_json::to_value(d).expect("jump");
            ("shortfall-jump", d.measured_ratio, d.measured_ratio < 0.0, body)
        }
        Family::Ce => {
            let ell = LossFunction::parse(&a.loss)?;
            let ce = theory::ce_two_point_counterexample(&ell, a.lo, a.hi, a.steps)?;
            if format == Format::Text {
                print_pair(&ce.x, &ce.y);
                outln!("loss: {ell}");
                outln!("deficit: {:.6e}", ce.deficit);
            }
            let body = json!({ "loss": ell.to_string(), "pair": pair_fields(&ce.x, &ce.y), "deficit": ce.deficit });
            ("ce", ce.deficit, ce.deficit > DEFAULT_EPSILON, body)
        }
    };
    match format {
        Format::Json => emit_json(&json!({ "family": name, "violation": holds, "result": body })),
        Format::Csv => {
            outln!("family,value,violation");
            outln!("{name},{value},{holds}");
        }
        Format::Text => outln!("violation: {holds}"),
    }
    if !holds {
        return Err(Failure::Expectation(format!("{name}: construction did not produce a violation")));
    }
    Ok(())
}

fn run_pipeline(a: &PipelineArgs, format: Format) -> Outcome {
    let config = RollingConfig::from_file(&a.config)?;
    let (out, files) = if a.synthetic {
        let panel = pipeline::synth_prices(a.seed, a.days, a.assets, a.vol, a.jump_prob)?;
        std::fs::create_dir_all(&a.out).map_err(|e| Failure::Usage(format!("{}: {e}", a.out.display())))?;
        let prices = a.out.join("prices.csv");
        panel.write_csv(&prices)?;
        let source = format!("synthetic(seed={}, days={}, assets={})", a.seed, a.days, a.assets);
        let out = pipeline::run_on_prices(&panel, &config, &source)?;
        let mut files = pipeline::export_report(&a.out, &out.records, &out.series, &out.correlations, &out.summary)?;
        files.insert(0, prices);
        (out, files)
    } else {
        let prices = a.prices.as_ref().expect("clap enforces --prices");
        pipeline::run_pipeline(prices, &config, &a.out)?
    };
    let counts = &out.summary.counts;
    match format {
        Format::Json => emit_json(&serde_json::to_value(&out.summary).expect("summary")),
        Format::Csv => {
            outln!("measure,tests,violations");
            for (m, c) in counts {
                outln!("{},{},{}", csv_line(std::slice::from_ref(m)), c.tests, c.violations);
            }
        }
        Format::Text => {
            outln!("source: {}", out.summary.source);
            outln!(
                "tickers: {} ({} pairs), loss rows: {}, tested dates: {}",
                out.summary.tickers.len(),
                out.summary.pairs,
                out.summary.loss_rows,
                out.summary.tested_dates
            );
            for (m, c) in counts {
                outln!("{m}: {} / {} violations", c.violations, c.tests);
            }
            for c in &out.correlations {
                outln!(
                    "corr {} ~ {}: pearson {:.4} spearman {:.4} dcor {:.4}",
                    c.series_a, c.series_b, c.result.pearson, c.result.spearman, c.result.dcor
                );
            }
            for f in &files {
                outln!("wrote {}", f.display());
            }
        }
    }
    Ok(())
}

fn run_selftest(format: Format) -> Outcome {
    let checks = latticerisk::selftest::run_all();
    match format {
        Format::Json => emit_json(&serde_json::to_value(&checks).expect("checks")),
        Format::Csv => {
            outln!("check,passed,detail");
            for c in &checks {
                outln!("{}", csv_line(&[c.name.clone(), c.passed.to_string(), c.detail.clone()]));
            }
        }
        Format::Text => {
            for c in &checks {
                outln!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
        }
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    if failed > 0 {
        return Err(Failure::Expectation(format!("{failed} of {} checks failed", checks.len())));
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let outcome = match &cli.command {
        Command::Check(a) => run_check(a, cli.format),
        Command::Sweep(a) => run_sweep(a, cli.format),
        Command::Counterexample(a) => run_counterexample(a, cli.format),
        Command::Pipeline(a) => run_pipeline(a, cli.format),
        Command::Selftest => run_selftest(cli.format),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Expectation(m)) => {
            eprintln!("latticerisk: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(m)) => {
            eprintln!("latticerisk: error: {m}");
            ExitCode::from(2)
        }
    }
}
