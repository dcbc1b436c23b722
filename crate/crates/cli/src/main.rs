use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use dyndiv::channel_div::{
    amortized_lb, channel_dmax, channel_hyptest, channel_umegaki, geometric_renyi_channel, isometry_max_ext,
    ChannelEstimate, OptimizerConfig,
};
use dyndiv::channels::{ProbVector, QuantumChannel, QuantumState};
use dyndiv::classical::{dmax_c, dmin_c, hyptest_c, kl, renyi, ClassicalDivergence};
use dyndiv::harness::{has_hard_failure, run_suite, CheckReport, SuiteConfig};
use dyndiv::io::{dichotomy_to_json, parse_str, real_to_json, round_sig, vertices_to_json, Object};
use dyndiv::linalg::{install_tolerances, ToleranceConfig};
use dyndiv::majorization::{
    classical_channel_max_ext, classical_channel_min_ext, dichotomy_join, lorenz_curve, Dichotomy,
};
use dyndiv::state::{dmax_q, dmin_q, geometric_renyi_state, hyptest_q, sandwiched_renyi, umegaki};
use dyndiv::value::DivergenceValue;
use dyndiv::Error;

const EXIT_PARSE: u8 = 2;
const EXIT_SHAPE: u8 = 3;
const EXIT_CHECKS: u8 = 4;

/// Divergences of states and channels, Lorenz curves and joins of
/// dichotomies, and a randomized property suite.
///
/// The environment variable DYNDIV_TOL overrides the equality tolerance.
#[derive(Parser, Debug)]
#[command(name = "dyndiv", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evaluate a divergence between two objects read from JSON files.
    Compute(ComputeArgs),
    /// Least element above a set of dichotomies in the relative majorization order.
    Join(JoinArgs),
    /// Vertices of the lower Lorenz curve of a dichotomy.
    Lorenz(LorenzArgs),
    /// Run the randomized property suite.
    Suite(SuiteArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Div {
    Kl,
    Renyi,
    Dmax,
    Dmin,
    Hyptest,
    Umegaki,
    Sandwiched,
    Geometric,
    ChannelDmax,
    ChannelUmegaki,
    ChannelHyptest,
    MinExt,
    MaxExt,
    IsometryMaxExt,
    AmortizedLb,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Base {
    Kl,
    Renyi,
    Dmax,
    Dmin,
    Hyptest,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Default)]
enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Args, Debug)]
struct Output {
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Write to this file instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ComputeArgs {
    #[arg(long, value_enum)]
    div: Div,
    /// First argument of the divergence.
    first: PathBuf,
    /// Second argument of the divergence.
    second: PathBuf,
    /// Order of renyi, sandwiched and geometric, and of a renyi base.
    #[arg(long)]
    alpha: Option<f64>,
    /// Type-I error of hyptest and channel-hyptest, and of a hyptest base.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Classical divergence extended by min-ext and max-ext.
    #[arg(long, value_enum, default_value = "kl")]
    base: Base,
    /// Haar restarts of the optimizer-backed divergences.
    #[arg(long, default_value_t = 4)]
    restarts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Debug)]
struct JoinArgs {
    /// Either two classical channels `M N`, whose columns form the
    /// dichotomies, or any number of dichotomy files.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Debug)]
struct LorenzArgs {
    /// A dichotomy file.
    input: PathBuf,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Debug)]
struct SuiteArgs {
    /// JSON suite configuration; omitted fields take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Instances per check; optimizer-backed checks run at most this many.
    #[arg(long)]
    instances: Option<usize>,
    #[arg(long)]
    restarts: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Replace the configured divergences, e.g. `--div channel-dmax --div geometric:1.5`.
    #[arg(long = "div")]
    divs: Vec<String>,
    #[command(flatten)]
    output: Output,
}

#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

type CliResult<T> = Result<T, Failure>;

fn parse_failure(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_PARSE,
        message: message.into(),
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::ShapeMismatch(_) | Error::DimensionMismatch(_) => EXIT_SHAPE,
            Error::BadAlpha(_) | Error::BadEpsilon(_) | Error::BadConfig(_) | Error::Invalid(_) => EXIT_PARSE,
            _ => 1,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn read_object(path: &Path) -> CliResult<Object> {
    let text = fs::read_to_string(path).map_err(|e| parse_failure(format!("{}: {e}", path.display())))?;
    parse_str(&text).map_err(|e| parse_failure(format!("{}: {e}", path.display())))
}

fn emit(output: &Output, text: String) -> CliResult<()> {
    match &output.out {
        Some(p) => fs::write(p, text).map_err(|e| Failure {
            code: 1,
            message: format!("{}: {e}", p.display()),
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON values serialize");
    s.push('\n');
    s
}

fn real_csv(x: f64) -> String {
    if x == f64::INFINITY {
        "inf".into()
    } else {
        round_sig(x).to_string()
    }
}

fn wrong_kind(path: &Path, obj: &Object, want: &str) -> Failure {
    parse_failure(format!("{}: expected {want}, found a {}", path.display(), obj.kind()))
}

fn as_probs(path: &Path, obj: &Object) -> CliResult<ProbVector> {
    let p = match obj {
        Object::Probs(p) => Some(p.clone()),
        Object::State(s) => s.as_classical(),
        Object::Classical(c) if c.dim_in() == 1 => Some(c.column(0)),
        _ => None,
    };
    p.ok_or_else(|| wrong_kind(path, obj, "a probability vector or a diagonal state"))
}

fn as_state(path: &Path, obj: &Object) -> CliResult<QuantumState> {
    match obj {
        Object::State(s) => Ok(s.clone()),
        Object::Probs(p) => Ok(QuantumState::diagonal(p)),
        Object::Channel(c) if c.dim_in() == 1 => Ok(QuantumState::new(c.choi().clone())?),
        Object::Classical(c) if c.dim_in() == 1 => Ok(QuantumState::diagonal(&c.column(0))),
        _ => Err(wrong_kind(path, obj, "a state")),
    }
}

fn as_channel(path: &Path, obj: &Object) -> CliResult<QuantumChannel> {
    obj.to_channel().ok_or_else(|| wrong_kind(path, obj, "a channel or a state"))
}

fn need(v: Option<f64>, flag: &str, div: Div) -> CliResult<f64> {
    v.ok_or_else(|| parse_failure(format!("--div {} requires --{flag}", div_name(div))))
}

fn div_name(d: Div) -> String {
    d.to_possible_value().map(|v| v.get_name().to_string()).unwrap_or_default()
}

fn base_divergence(args: &ComputeArgs) -> CliResult<ClassicalDivergence> {
    let d = match args.base {
        Base::Kl => ClassicalDivergence::Kl,
        Base::Dmax => ClassicalDivergence::Dmax,
        Base::Dmin => ClassicalDivergence::Dmin,
        Base::Renyi => ClassicalDivergence::Renyi(need(args.alpha, "alpha", args.div)?),
        Base::Hyptest => ClassicalDivergence::Hyptest(need(args.epsilon, "epsilon", args.div)?),
    };
    d.validate()?;
    Ok(d)
}

struct Computed {
    value: DivergenceValue,
    upper: Option<DivergenceValue>,
}

impl From<DivergenceValue> for Computed {
    fn from(value: DivergenceValue) -> Self {
        Self { value, upper: None }
    }
}

impl From<ChannelEstimate> for Computed {
    fn from(e: ChannelEstimate) -> Self {
        Self {
            value: e.value,
            upper: e.upper,
        }
    }
}

fn compute(args: &ComputeArgs) -> CliResult<Computed> {
    let (pa, pb) = (args.first.as_path(), args.second.as_path());
    let (a, b) = (read_object(pa)?, read_object(pb)?);
    let cfg = OptimizerConfig {
        restarts: args.restarts,
        seed: args.seed,
        ..OptimizerConfig::default()
    };
    cfg.validate()?;
    let probs = || -> CliResult<(ProbVector, ProbVector)> { Ok((as_probs(pa, &a)?, as_probs(pb, &b)?)) };
    let states = || -> CliResult<(QuantumState, QuantumState)> { Ok((as_state(pa, &a)?, as_state(pb, &b)?)) };
    let channels = || -> CliResult<(QuantumChannel, QuantumChannel)> { Ok((as_channel(pa, &a)?, as_channel(pb, &b)?)) };
    let classical_channels = || {
        let m = a.to_classical().ok_or_else(|| wrong_kind(pa, &a, "a classical channel"))?;
        let n = b.to_classical().ok_or_else(|| wrong_kind(pb, &b, "a classical channel"))?;
        CliResult::Ok((m, n))
    };
    let d = args.div;
    Ok(match d {
        Div::Kl => {
            let (p, q) = probs()?;
            kl(&p, &q)?.into()
        }
        Div::Renyi => {
            let (p, q) = probs()?;
            renyi(&p, &q, need(args.alpha, "alpha", d)?)?.into()
        }
        Div::Dmax => match (&a, &b) {
            (Object::Probs(_), Object::Probs(_)) => {
                let (p, q) = probs()?;
                dmax_c(&p, &q)?.into()
            }
            _ => {
                let (r, s) = states()?;
                dmax_q(&r, &s)?.into()
            }
        },
        Div::Dmin => match (&a, &b) {
            (Object::Probs(_), Object::Probs(_)) => {
                let (p, q) = probs()?;
                dmin_c(&p, &q)?.into()
            }
            _ => {
                let (r, s) = states()?;
                dmin_q(&r, &s)?.into()
            }
        },
        Div::Hyptest => {
            let eps = need(args.epsilon, "epsilon", d)?;
            match (&a, &b) {
                (Object::Probs(_), Object::Probs(_)) => {
                    let (p, q) = probs()?;
                    hyptest_c(&p, &q, eps)?.into()
                }
                _ => {
                    let (r, s) = states()?;
                    hyptest_q(&r, &s, eps)?.into()
                }
            }
        }
        Div::Umegaki => {
            let (r, s) = states()?;
            umegaki(&r, &s)?.into()
        }
        Div::Sandwiched => {
            let (r, s) = states()?;
            sandwiched_renyi(&r, &s, need(args.alpha, "alpha", d)?)?.into()
        }
        Div::Geometric => {
            let alpha = need(args.alpha, "alpha", d)?;
            match (&a, &b) {
                (Object::State(_) | Object::Probs(_), Object::State(_) | Object::Probs(_)) => {
                    let (r, s) = states()?;
                    geometric_renyi_state(&r, &s, alpha)?.into()
                }
                _ => {
                    let (m, n) = channels()?;
                    geometric_renyi_channel(&m, &n, alpha)?.into()
                }
            }
        }
        Div::ChannelDmax => {
            let (m, n) = channels()?;
            channel_dmax(&m, &n)?.into()
        }
        Div::ChannelUmegaki => {
            let (m, n) = channels()?;
            channel_umegaki(&m, &n, &cfg)?.into()
        }
        Div::ChannelHyptest => {
            let (m, n) = channels()?;
            channel_hyptest(&m, &n, need(args.epsilon, "epsilon", d)?, &cfg)?.into()
        }
        Div::AmortizedLb => {
            let (m, n) = channels()?;
            amortized_lb(&m, &n, &cfg)?.into()
        }
        Div::IsometryMaxExt => {
            let (v, n) = channels()?;
            isometry_max_ext(&v, &n)?.into()
        }
        Div::MinExt => {
            let (m, n) = classical_channels()?;
            classical_channel_min_ext(base_divergence(args)?, &m, &n)?.into()
        }
        Div::MaxExt => {
            let (m, n) = classical_channels()?;
            classical_channel_max_ext(base_divergence(args)?, &m, &n)?.into()
        }
    })
}

/// Divergence values this close to zero are rounding noise.
const ZERO_BITS: f64 = 1e-12;

fn snap(v: f64) -> f64 {
    if v.abs() < ZERO_BITS {
        0.0
    } else {
        v
    }
}

fn cmd_compute(args: &ComputeArgs) -> CliResult<u8> {
    let c = compute(args)?;
    let value = snap(c.value.value);
    let name = div_name(args.div);
    let text = match args.output.format.unwrap_or_default() {
        Format::Json => {
            let mut doc = json!({
                "divergence": name,
                "value_bits": real_to_json(value),
                "exact": c.value.exact,
            });
            if let Some(u) = c.upper {
                doc["upper_bits"] = real_to_json(snap(u.value));
            }
            pretty(&doc)
        }
        Format::Csv => format!("divergence,value_bits,exact\n{name},{},{}\n", real_csv(value), c.value.exact),
    };
    emit(&args.output, text)?;
    Ok(0)
}

fn join_inputs(args: &JoinArgs) -> CliResult<Vec<Dichotomy>> {
    let objs: Vec<(PathBuf, Object)> = args
        .inputs
        .iter()
        .map(|p| Ok((p.clone(), read_object(p)?)))
        .collect::<CliResult<_>>()?;
    if objs.iter().all(|(_, o)| matches!(o, Object::Dichotomy(_))) {
        return Ok(objs
            .into_iter()
            .map(|(_, o)| match o {
                Object::Dichotomy(d) => d,
                _ => unreachable!(),
            })
            .collect());
    }
    if objs.len() != 2 {
        return Err(parse_failure("join takes two classical channels M N or a list of dichotomies"));
    }
    let (pm, m) = &objs[0];
    let (pn, n) = &objs[1];
    let m = m.to_classical().ok_or_else(|| wrong_kind(pm, m, "a classical channel"))?;
    let n = n.to_classical().ok_or_else(|| wrong_kind(pn, n, "a classical channel"))?;
    if m.dim_in() != n.dim_in() || m.dim_out() != n.dim_out() {
        return Err(Error::ShapeMismatch(format!(
            "{}->{} vs {}->{}",
            m.dim_in(),
            m.dim_out(),
            n.dim_in(),
            n.dim_out()
        ))
        .into());
    }
    (0..m.dim_in())
        .map(|x| Ok(Dichotomy::new(m.column(x), n.column(x))?))
        .collect()
}

fn lorenz_csv(d: &Dichotomy) -> String {
    let mut s = String::from("a,b\n");
    for &(a, b) in lorenz_curve(d).vertices() {
        s.push_str(&format!("{},{}\n", real_csv(a), real_csv(b)));
    }
    s
}

fn cmd_join(args: &JoinArgs) -> CliResult<u8> {
    let ds = join_inputs(args)?;
    let j = dichotomy_join(&ds)?;
    let text = match args.output.format.unwrap_or_default() {
        Format::Json => {
            let mut doc = dichotomy_to_json(&j);
            doc["lorenz"] = vertices_to_json(lorenz_curve(&j).vertices());
            pretty(&doc)
        }
        Format::Csv => lorenz_csv(&j),
    };
    emit(&args.output, text)?;
    Ok(0)
}

fn cmd_lorenz(args: &LorenzArgs) -> CliResult<u8> {
    let d = match read_object(&args.input)? {
        Object::Dichotomy(d) => d,
        o => return Err(wrong_kind(&args.input, &o, "a dichotomy")),
    };
    let text = match args.output.format.unwrap_or(Format::Csv) {
        Format::Csv => lorenz_csv(&d),
        Format::Json => pretty(&json!({ "lorenz": vertices_to_json(lorenz_curve(&d).vertices()) })),
    };
    emit(&args.output, text)?;
    Ok(0)
}

fn suite_config(args: &SuiteArgs) -> CliResult<SuiteConfig> {
    let mut cfg = match &args.config {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| parse_failure(format!("{}: {e}", p.display())))?;
            serde_json::from_str(&text).map_err(|e| parse_failure(format!("{}: {e}", p.display())))?
        }
        None => SuiteConfig::default(),
    };
    if let Some(n) = args.instances {
        cfg.instances = n;
        cfg.optimizer_instances = cfg.optimizer_instances.min(n);
    }
    if let Some(r) = args.restarts {
        cfg.restarts = r;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if !args.divs.is_empty() {
        cfg.divergences = args
            .divs
            .iter()
            .map(|s| s.parse().map_err(|e: Error| parse_failure(format!("--div {s}: {e}"))))
            .collect::<CliResult<_>>()?;
    }
    Ok(cfg)
}

fn reports_csv(reports: &[CheckReport]) -> String {
    let mut s = String::from("check,instances,failures,worst_slack,tolerance,soft\n");
    for r in reports {
        let worst = match r.worst_slack {
            x if x == f64::NEG_INFINITY => "-inf".to_string(),
            x => real_csv(x),
        };
        s.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.check_name,
            r.instances,
            r.failures,
            worst,
            real_csv(r.tolerance),
            r.soft
        ));
    }
    s
}

fn cmd_suite(args: &SuiteArgs) -> CliResult<u8> {
    let cfg = suite_config(args)?;
    let reports = run_suite(&cfg)?;
    for r in reports.iter().filter(|r| r.failures > 0) {
        eprintln!(
            "{} {}: {}/{} failed, worst slack {}",
            if r.soft { "soft" } else { "FAIL" },
            r.check_name,
            r.failures,
            r.instances,
            r.worst_slack
        );
    }
    let text = match args.output.format.unwrap_or_default() {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(&reports).expect("reports serialize");
            s.push('\n');
            s
        }
        Format::Csv => reports_csv(&reports),
    };
    emit(&args.output, text)?;
    Ok(if has_hard_failure(&reports) { EXIT_CHECKS } else { 0 })
}

fn install_env_tolerance() -> CliResult<()> {
    let Ok(raw) = std::env::var("DYNDIV_TOL") else {
        return Ok(());
    };
    let eq: f64 = raw
        .trim()
        .parse()
        .map_err(|_| parse_failure(format!("DYNDIV_TOL: not a number: {raw:?}")))?;
    let cfg = ToleranceConfig::default()
        .with_eq(eq)
        .map_err(|e| parse_failure(format!("DYNDIV_TOL: {e}")))?;
    install_tolerances(cfg)?;
    Ok(())
}

fn run(cli: &Cli) -> CliResult<u8> {
    install_env_tolerance()?;
    match &cli.command {
        Command::Compute(a) => cmd_compute(a),
        Command::Join(a) => cmd_join(a),
        Command::Lorenz(a) => cmd_lorenz(a),
        Command::Suite(a) => cmd_suite(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
