use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use unbias::bits::{parse_bits, serialize_bits, BitFormat, BitString};
use unbias::bounds::{calibrate_delta, BoundFamily, VariationReport};
use unbias::exactdist::{check_independence, exact_source_dist, normalized_dist_with, Independence};
use unbias::markov::{markov_csv, run_markov_experiment, MarkovExperiment};
use unbias::normalize::NormalizationMethod;
use unbias::sources::{sample, DriftParams, DriftTrace, MarkovTable, PairDist, SourceSpec, Trajectory};
use unbias::stats::{
    borel_counts, empirical_tv_to_uniform, format_sig, log_grid, sweep_alpha, sweep_csv, sweep_drift,
    CountMode, DriftPoint,
};

/// Seed used when `--seed` is not given.
const DEFAULT_SEED: u64 = 42;
const DIGITS: usize = 12;

#[derive(Debug)]
enum CliError {
    Validation(String),
    Io(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Io(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Validation(m) | CliError::Io(m) => m,
        }
    }
}

fn invalid(e: impl std::fmt::Display) -> CliError {
    CliError::Validation(e.to_string())
}

type CliResult<T> = Result<T, CliError>;

#[derive(Parser, Debug)]
#[command(name = "unbias", version, about = "Un-bias bit streams and bound their distance from uniform")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample bits from a source model
    Generate(GenerateArgs),
    /// Apply a normalisation method to a bit file
    Normalize(NormalizeArgs),
    /// Block frequencies and distance from uniform of a bit file
    Analyze(AnalyzeArgs),
    /// Exact source or normalized distribution as CSV (n <= 26)
    Dist(DistArgs),
    /// Distance bound from uniform for block length m and asymmetry alpha
    Tv(TvArgs),
    /// Largest asymmetry (and drift speed) meeting a distance target
    Calibrate(CalibrateArgs),
    /// Bound values over a grid, as CSV
    Sweep(SweepArgs),
    /// Distance from uniform for short-memory sources, as CSV
    Markov(MarkovArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SourceKind {
    Constant,
    Drifting,
    Markov,
    Pairwise,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum TrajectoryKind {
    Walk,
    Sine,
    Fixed,
    Adversarial,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum MethodKind {
    Vn,
    Peres,
    Parity,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FormatKind {
    Ascii,
    Packed,
}

impl From<FormatKind> for BitFormat {
    fn from(f: FormatKind) -> Self {
        match f {
            FormatKind::Ascii => BitFormat::Ascii,
            FormatKind::Packed => BitFormat::Packed,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum BoundKind {
    Exact,
    Naive,
    Linear,
}

impl From<BoundKind> for BoundFamily {
    fn from(b: BoundKind) -> Self {
        match b {
            BoundKind::Exact => BoundFamily::Exact,
            BoundKind::Naive => BoundFamily::Naive,
            BoundKind::Linear => BoundFamily::Linear,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeKind {
    NonOverlapping,
    Overlapping,
}

impl From<ModeKind> for CountMode {
    fn from(m: ModeKind) -> Self {
        match m {
            ModeKind::NonOverlapping => CountMode::NonOverlapping,
            ModeKind::Overlapping => CountMode::Overlapping,
        }
    }
}

#[derive(Args, Debug)]
struct SourceArgs {
    #[arg(long, value_enum, default_value = "constant")]
    source: SourceKind,
    /// Probability of a zero bit
    #[arg(long, default_value_t = 0.5)]
    p0: f64,
    /// Drift amplitude bound
    #[arg(long, default_value_t = 0.0)]
    beta: f64,
    /// Drift speed bound
    #[arg(long, default_value_t = 0.0)]
    delta: f64,
    #[arg(long, value_enum, default_value = "walk")]
    trajectory: TrajectoryKind,
    /// Period of the sine trajectory
    #[arg(long)]
    period: Option<f64>,
    /// Drift trace file (one epsilon per line) for the fixed trajectory
    #[arg(long)]
    trace_file: Option<PathBuf>,
    /// Memory length of the markov source
    #[arg(long, default_value_t = 1)]
    k: usize,
    /// Largest deviation of a conditional probability from p0
    #[arg(long, default_value_t = 0.0)]
    kappa: f64,
    /// Conditional table file ("history p0" per line) for the markov source
    #[arg(long)]
    table: Option<PathBuf>,
    /// Pair distribution "P(00),P(01),P(10),P(11)"; repeat for several pairs
    #[arg(long = "pair")]
    pairs: Vec<String>,
}

impl SourceArgs {
    fn spec(&self) -> CliResult<SourceSpec> {
        let spec = match self.source {
            SourceKind::Constant => SourceSpec::constant(self.p0),
            SourceKind::Drifting => {
                let params = DriftParams::new(self.p0, self.beta, self.delta).map_err(invalid)?;
                let trajectory = match self.trajectory {
                    TrajectoryKind::Walk => Trajectory::Walk,
                    TrajectoryKind::Adversarial => Trajectory::Adversarial,
                    TrajectoryKind::Sine => Trajectory::Sine {
                        period: self
                            .period
                            .ok_or_else(|| invalid("--trajectory sine needs --period"))?,
                    },
                    TrajectoryKind::Fixed => {
                        let path = self
                            .trace_file
                            .as_ref()
                            .ok_or_else(|| invalid("--trajectory fixed needs --trace-file"))?;
                        Trajectory::Fixed(DriftTrace::parse(&read_text(path)?).map_err(invalid)?)
                    }
                };
                SourceSpec::Drifting { params, trajectory }
            }
            SourceKind::Markov => {
                let table = match &self.table {
                    Some(path) => MarkovTable::parse(&read_text(path)?).map_err(invalid)?,
                    None => MarkovTable::alternating(self.k, self.p0, self.kappa).map_err(invalid)?,
                };
                SourceSpec::Markov { p0: self.p0, kappa: self.kappa, table }
            }
            SourceKind::Pairwise => {
                if self.pairs.is_empty() {
                    return Err(invalid("--source pairwise needs at least one --pair"));
                }
                let pairs = self
                    .pairs
                    .iter()
                    .map(|p| PairDist::parse(p))
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(invalid)?;
                SourceSpec::Pairwise(pairs)
            }
        };
        spec.validate().map_err(invalid)?;
        Ok(spec)
    }
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[command(flatten)]
    source: SourceArgs,
    /// Number of bits
    #[arg(short = 'n', long)]
    n: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long, value_enum, default_value = "ascii")]
    format: FormatKind,
    /// Output file (standard output when absent)
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Where to write the realized drift trace
    #[arg(long)]
    trace_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct NormalizeArgs {
    #[arg(long, value_enum, default_value = "vn")]
    method: MethodKind,
    /// Block length for the parity method
    #[arg(long, default_value_t = 2)]
    block: usize,
    /// Input file (standard input when absent)
    #[arg(short, long)]
    input: Option<PathBuf>,
    #[arg(short, long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "ascii")]
    in_format: FormatKind,
    #[arg(long, value_enum, default_value = "ascii")]
    out_format: FormatKind,
}

#[derive(Args, Debug)]
struct AnalyzeArgs {
    #[arg(short, long)]
    input: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "ascii")]
    format: FormatKind,
    /// Largest block length to count
    #[arg(long, default_value_t = 3)]
    max_m: usize,
    #[arg(long, value_enum, default_value = "non-overlapping")]
    mode: ModeKind,
    /// Emit block counts as CSV instead of a table
    #[arg(long)]
    csv: bool,
}

#[derive(Args, Debug)]
struct DistArgs {
    #[command(flatten)]
    source: SourceArgs,
    /// Source string length
    #[arg(short = 'n', long)]
    n: usize,
    /// Output length; without it the source distribution itself is printed
    #[arg(long)]
    m: Option<usize>,
    #[arg(long, value_enum, default_value = "vn")]
    method: MethodKind,
    #[arg(long, default_value_t = 2)]
    block: usize,
    /// Print the independence verdict instead of the table
    #[arg(long)]
    independence: bool,
}

#[derive(Args, Debug)]
struct TvArgs {
    #[arg(long)]
    m: u64,
    #[arg(long)]
    alpha: f64,
    #[arg(long, value_enum, default_value = "exact")]
    method: BoundKind,
}

#[derive(Args, Debug)]
struct CalibrateArgs {
    #[arg(long)]
    m: u64,
    #[arg(long)]
    rho: f64,
    #[arg(long, value_enum, default_value = "exact")]
    method: BoundKind,
    /// With --beta, also solve for the drift speed
    #[arg(long, requires = "beta")]
    p0: Option<f64>,
    #[arg(long, requires = "p0")]
    beta: Option<f64>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    /// Block lengths
    #[arg(long, value_delimiter = ',', default_value = "100,1000,10000,1000000")]
    m: Vec<u64>,
    /// Explicit alpha values; overrides the log grid
    #[arg(long, value_delimiter = ',')]
    alphas: Vec<f64>,
    #[arg(long, default_value_t = 1e-6)]
    alpha_min: f64,
    #[arg(long, default_value_t = 0.5)]
    alpha_max: f64,
    #[arg(long, default_value_t = 50)]
    points: usize,
    /// Drift grid: sweep alpha_max(p0, beta, delta) instead of alpha
    #[arg(long, value_delimiter = ',')]
    p0: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    beta: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    delta: Vec<f64>,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct MarkovArgs {
    #[arg(long, default_value_t = 0.5)]
    p0: f64,
    /// Memory lengths
    #[arg(long, value_delimiter = ',', default_value = "1")]
    k: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "0.05")]
    kappa: Vec<f64>,
    #[arg(long, default_value_t = 2)]
    m: usize,
    /// Chain length per sample
    #[arg(short = 'n', long, default_value_t = 16)]
    n: usize,
    #[arg(long, default_value_t = 100_000)]
    samples: u64,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Conditional table file; replaces the default table for every k
    #[arg(long)]
    table: Option<PathBuf>,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))
}

fn read_input(path: Option<&Path>) -> CliResult<Vec<u8>> {
    match path {
        Some(p) => fs::read(p).map_err(|e| CliError::Io(format!("cannot read {}: {e}", p.display()))),
        None => {
            let mut buf = Vec::new();
            io::stdin()
                .read_to_end(&mut buf)
                .map_err(|e| CliError::Io(format!("cannot read standard input: {e}")))?;
            Ok(buf)
        }
    }
}

fn write_output(path: Option<&Path>, bytes: &[u8]) -> CliResult<()> {
    match path {
        Some(p) => fs::write(p, bytes).map_err(|e| CliError::Io(format!("cannot write {}: {e}", p.display()))),
        None => {
            let mut out = io::stdout().lock();
            out.write_all(bytes)
                .and_then(|_| out.flush())
                .map_err(|e| CliError::Io(format!("cannot write standard output: {e}")))
        }
    }
}

fn read_bits(path: Option<&Path>, format: FormatKind) -> CliResult<BitString> {
    parse_bits(&read_input(path)?, format.into()).map_err(invalid)
}

fn method(kind: MethodKind, block: usize) -> CliResult<NormalizationMethod> {
    Ok(match kind {
        MethodKind::Vn => NormalizationMethod::VonNeumann,
        MethodKind::Peres => NormalizationMethod::Peres,
        MethodKind::Parity => NormalizationMethod::parity(block).map_err(invalid)?,
    })
}

fn generate(args: &GenerateArgs) -> CliResult<()> {
    let spec = args.source.spec()?;
    let (bits, trace) = sample(&spec, args.n, args.seed).map_err(invalid)?;
    if let Some(path) = &args.trace_out {
        let trace = trace.ok_or_else(|| invalid("--trace-out needs a drifting source"))?;
        fs::write(path, trace.to_text()).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
    }
    write_output(args.output.as_deref(), &serialize_bits(&bits, args.format.into()))
}

fn normalize(args: &NormalizeArgs) -> CliResult<()> {
    let m = method(args.method, args.block)?;
    let bits = read_bits(args.input.as_deref(), args.in_format)?;
    write_output(args.output.as_deref(), &serialize_bits(&m.apply(&bits), args.out_format.into()))
}

fn analyze(args: &AnalyzeArgs) -> CliResult<String> {
    let bits = read_bits(args.input.as_deref(), args.format)?;
    let mut out = String::new();
    if args.csv {
        for m in 1..=args.max_m.min(bits.len()) {
            let report = borel_counts(&bits, m, args.mode.into()).map_err(invalid)?;
            let csv = report.to_csv();
            out.push_str(if m == 1 { &csv } else { csv.split_once('\n').map_or("", |(_, rows)| rows) });
        }
        return Ok(out);
    }
    out.push_str(&format!("bits {}\n", bits.len()));
    if bits.is_empty() {
        return Ok(out);
    }
    let single = borel_counts(&bits, 1, CountMode::NonOverlapping).map_err(invalid)?;
    out.push_str(&format!(
        "ones {} frequency {} deviation_sigma {}\n",
        single.counts[1],
        format_sig(single.counts[1] as f64 / single.total as f64, DIGITS),
        format_sig(single.deviations()[1], 6)
    ));
    for m in 1..=args.max_m.min(bits.len()) {
        let report = borel_counts(&bits, m, args.mode.into()).map_err(invalid)?;
        out.push('\n');
        out.push_str(&report.to_table());
        let tv = empirical_tv_to_uniform(&bits, m).map_err(invalid)?;
        out.push_str(&format!(
            "distance_from_uniform {} slack {}\n",
            format_sig(tv.value, DIGITS),
            format_sig(tv.slack, DIGITS)
        ));
    }
    Ok(out)
}

fn dist(args: &DistArgs) -> CliResult<String> {
    let spec = args.source.spec()?;
    let table = match args.m {
        Some(m) => normalized_dist_with(&spec, args.n, m, method(args.method, args.block)?).map_err(invalid)?,
        None => exact_source_dist(&spec, args.n).map_err(invalid)?,
    };
    if args.independence {
        return Ok(match check_independence(&table).map_err(invalid)? {
            Independence::Independent => "independent\n".into(),
            Independence::Counterexample { k, prefix, lhs, rhs } => format!(
                "dependent k {k} prefix {prefix} joint {} product {}\n",
                format_sig(lhs, DIGITS),
                format_sig(rhs, DIGITS)
            ),
        });
    }
    let mut out = String::from("string,probability\n");
    for (x, p) in table.iter() {
        out.push_str(&format!("{x},{}\n", format_sig(p, DIGITS)));
    }
    Ok(out)
}

fn tv(args: &TvArgs) -> CliResult<String> {
    let r = VariationReport::for_alpha(args.method.into(), args.m, args.alpha).map_err(invalid)?;
    Ok(format!("{}\n", format_sig(r.value, DIGITS)))
}

fn calibrate(args: &CalibrateArgs) -> CliResult<String> {
    let r = VariationReport::for_rho(args.method.into(), args.m, args.rho).map_err(invalid)?;
    match (args.p0, args.beta) {
        (Some(p0), Some(beta)) => {
            let delta = calibrate_delta(p0, beta, r.alpha).map_err(invalid)?;
            Ok(format!("alpha {}\ndelta {}\n", format_sig(r.alpha, DIGITS), format_sig(delta, DIGITS)))
        }
        _ => Ok(format!("{}\n", format_sig(r.alpha, DIGITS))),
    }
}

fn sweep(args: &SweepArgs) -> CliResult<()> {
    let drift = !(args.p0.is_empty() && args.beta.is_empty() && args.delta.is_empty());
    let rows = if drift {
        if args.p0.is_empty() || args.beta.is_empty() || args.delta.is_empty() {
            return Err(invalid("a drift sweep needs --p0, --beta and --delta"));
        }
        let mut points = Vec::new();
        for &p0 in &args.p0 {
            for &beta in &args.beta {
                for &delta in &args.delta {
                    points.push(DriftPoint { p0, beta, delta });
                }
            }
        }
        sweep_drift(&args.m, &points).map_err(invalid)?
    } else {
        let alphas = if args.alphas.is_empty() {
            if !(args.alpha_min > 0.0 && args.alpha_min <= args.alpha_max) {
                return Err(invalid("--alpha-min must be positive and at most --alpha-max"));
            }
            log_grid(args.alpha_min, args.alpha_max, args.points)
        } else {
            args.alphas.clone()
        };
        sweep_alpha(&args.m, &alphas).map_err(invalid)?
    };
    write_output(args.output.as_deref(), sweep_csv(&rows).as_bytes())
}

fn markov(args: &MarkovArgs) -> CliResult<()> {
    let table = match &args.table {
        Some(path) => Some(MarkovTable::parse(&read_text(path)?).map_err(invalid)?),
        None => None,
    };
    let mut reports = Vec::new();
    for &k in &args.k {
        for &kappa in &args.kappa {
            let exp = MarkovExperiment {
                p0: args.p0,
                k,
                kappa,
                m: args.m,
                n: args.n,
                samples: args.samples,
                seed: args.seed,
                table: table.clone(),
            };
            reports.push(run_markov_experiment(&exp).map_err(invalid)?);
        }
    }
    write_output(args.output.as_deref(), markov_csv(&reports).as_bytes())
}

fn run(cli: Cli) -> CliResult<()> {
    let text = match &cli.command {
        Command::Generate(a) => return generate(a),
        Command::Normalize(a) => return normalize(a),
        Command::Sweep(a) => return sweep(a),
        Command::Markov(a) => return markov(a),
        Command::Analyze(a) => analyze(a)?,
        Command::Dist(a) => dist(a)?,
        Command::Tv(a) => tv(a)?,
        Command::Calibrate(a) => calibrate(a)?,
    };
    write_output(None, text.as_bytes())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}
