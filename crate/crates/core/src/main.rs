use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use covlrt::calibration::{
    centering, limiting_density, make_ratios, quadrature_centering, support, DesignRatios, Kernel,
    KurtosisPair, Variant,
};
use covlrt::comparators::{clx_test, li_chen_test, ComparatorResult};
use covlrt::io::{
    ingest_csv, log_return_matrix, read_prices, write_matrix_csv, CsvGrid, Orientation,
    ReportDocument, Timings,
};
use covlrt::kurtosis::{estimate_delta, estimate_delta_lowdim, KurtosisEstimate};
use covlrt::simulation::{
    calibration_surface, reproduce_table, run_scenario, AlternativeScaling, Case, KurtosisMode,
    Quantity, ScenarioConfig, SurfaceSpec, TableId, TableOptions, TestKind,
};
use covlrt::test_engine::{run_test, KurtosisOption, Sidedness, TestOptions, TestResult};
use covlrt::{Error, Warning};

#[derive(Parser, Debug)]
#[command(
    name = "covlrt",
    version,
    about = "Modified likelihood-ratio tests for equality of two high-dimensional covariance matrices"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct GlobalArgs {
    /// Report format.
    #[arg(long, value_enum, default_value_t = Format::Json, global = true)]
    format: Format,
    /// Write the report to a file instead of stdout.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    /// Include wall-clock timings in the report (makes reports non-reproducible).
    #[arg(long, global = true)]
    timings: bool,
    /// Worker threads for simulations (default: all cores).
    #[arg(long, env = "COVLRT_THREADS", global = true)]
    threads: Option<usize>,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Test equality of the covariance matrices of two CSV samples.
    Test(TestArgs),
    /// Monte Carlo size/power of one scenario.
    Simulate(SimulateArgs),
    /// Regenerate a size/power table (1-4) or a kurtosis table (del1, del2).
    Table(TableArgs),
    /// Leave-one-out estimate of a sample's fourth cumulant.
    EstimateKurtosis(KurtosisArgs),
    /// Limiting spectral density, its support and the quadrature oracle.
    Density(DensityArgs),
    /// Centering constants over a (y1, y2) grid.
    Surface(SurfaceArgs),
    /// Log returns of a price table (date column plus one column per ticker).
    LogReturns(LogReturnsArgs),
}

#[derive(Copy, Clone, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum VariantArg {
    Full,
    Lite,
    Both,
}

impl VariantArg {
    fn variants(self) -> Vec<Variant> {
        match self {
            VariantArg::Full => vec![Variant::FullLrt],
            VariantArg::Lite => vec![Variant::LiteLrt],
            VariantArg::Both => vec![Variant::FullLrt, Variant::LiteLrt],
        }
    }
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum SidedArg {
    Two,
    Lower,
}

impl From<SidedArg> for Sidedness {
    fn from(s: SidedArg) -> Self {
        match s {
            SidedArg::Two => Sidedness::TwoSided,
            SidedArg::Lower => Sidedness::Lower,
        }
    }
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum OrientationArg {
    Rows,
    Columns,
}

impl From<OrientationArg> for Orientation {
    fn from(o: OrientationArg) -> Self {
        match o {
            OrientationArg::Rows => Orientation::VariablesInRows,
            OrientationArg::Columns => Orientation::VariablesInColumns,
        }
    }
}

#[derive(Args, Debug)]
struct InputArgs {
    /// `rows`: one variable per row; `columns`: one variable per column.
    #[arg(long, value_enum, default_value_t = OrientationArg::Rows)]
    orientation: OrientationArg,
    /// The first row of each file is a header.
    #[arg(long)]
    header: bool,
}

#[derive(Args, Debug)]
struct TestArgs {
    sample1: PathBuf,
    sample2: PathBuf,
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, value_enum, default_value_t = VariantArg::Full)]
    variant: VariantArg,
    /// `gaussian`, `estimate`, or `known:D1,D2`.
    #[arg(long, default_value = "gaussian", value_parser = parse_kurtosis)]
    kurtosis: KurtosisOption,
    /// With `--kurtosis estimate`, use own-sample estimators when p < min(n1,n2)-1.
    #[arg(long)]
    lowdim: bool,
    #[arg(long, value_enum, default_value_t = SidedArg::Two)]
    sided: SidedArg,
    #[arg(long, default_value_t = 0.05)]
    level: f64,
    /// Also run the trace (lc) and max-entry (clx) comparator tests.
    #[arg(long)]
    comparators: bool,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum KurtosisModeArg {
    True,
    Estimated,
    Gaussian,
}

impl From<KurtosisModeArg> for KurtosisMode {
    fn from(k: KurtosisModeArg) -> Self {
        match k {
            KurtosisModeArg::True => KurtosisMode::TrueValues,
            KurtosisModeArg::Estimated => KurtosisMode::Estimated,
            KurtosisModeArg::Gaussian => KurtosisMode::Gaussian,
        }
    }
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum ScalingArg {
    Amplitude,
    Covariance,
}

impl From<ScalingArg> for AlternativeScaling {
    fn from(s: ScalingArg) -> Self {
        match s {
            ScalingArg::Amplitude => AlternativeScaling::Amplitude,
            ScalingArg::Covariance => AlternativeScaling::Covariance,
        }
    }
}

#[derive(Args, Debug)]
struct MonteCarloArgs {
    #[arg(long)]
    replicates: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.05)]
    level: f64,
    /// Comma-separated subset of T, T~, lc, clx.
    #[arg(long, value_delimiter = ',', value_parser = parse_test_kind)]
    tests: Option<Vec<TestKind>>,
    #[arg(long, value_enum, default_value_t = KurtosisModeArg::True)]
    kurtosis_mode: KurtosisModeArg,
    /// How the alternative strength a enters sample 1.
    #[arg(long, value_enum, default_value_t = ScalingArg::Amplitude)]
    scaling: ScalingArg,
    #[arg(long, value_enum, default_value_t = SidedArg::Two)]
    sided: SidedArg,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long, value_parser = parse_case)]
    case: Case,
    #[arg(long)]
    n1: usize,
    #[arg(long)]
    n2: usize,
    #[arg(long)]
    p: usize,
    #[arg(long, default_value_t = 0.0)]
    a: f64,
    #[command(flatten)]
    mc: MonteCarloArgs,
}

#[derive(Args, Debug)]
struct TableArgs {
    /// 1, 2, 3, 4, del1 or del2.
    #[arg(value_parser = parse_table)]
    table: TableId,
    #[command(flatten)]
    mc: MonteCarloArgs,
}

#[derive(Args, Debug)]
struct KurtosisArgs {
    /// Sample whose fourth cumulant is estimated.
    own: PathBuf,
    /// The other sample (required unless --lowdim).
    other: Option<PathBuf>,
    #[command(flatten)]
    input: InputArgs,
    /// Label of the own sample.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=2))]
    which: u8,
    /// Own-sample estimator (needs p < n-1).
    #[arg(long)]
    lowdim: bool,
    /// Include the per-observation quadratic forms.
    #[arg(long)]
    diagnostics: bool,
}

#[derive(Args, Debug)]
struct DensityArgs {
    #[arg(long, requires = "y2", conflicts_with_all = ["p", "n1", "n2"])]
    y1: Option<f64>,
    #[arg(long, requires = "y1")]
    y2: Option<f64>,
    #[arg(long, requires_all = ["n1", "n2"])]
    p: Option<usize>,
    #[arg(long)]
    n1: Option<usize>,
    #[arg(long)]
    n2: Option<usize>,
    /// Number of evaluation points inside the support.
    #[arg(long, default_value_t = 101)]
    points: usize,
}

#[derive(Args, Debug)]
struct SurfaceArgs {
    #[arg(long, default_value = "0,2", value_parser = parse_range)]
    y1_range: (f64, f64),
    #[arg(long, default_value = "0,2", value_parser = parse_range)]
    y2_range: (f64, f64),
    #[arg(long, default_value_t = 41)]
    steps: usize,
    #[arg(long, value_parser = parse_quantity, default_value = "mu")]
    quantity: Quantity,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    delta1: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    delta2: f64,
    #[arg(long, value_enum, default_value_t = VariantArg::Full)]
    variant: VariantArg,
}

#[derive(Args, Debug)]
struct LogReturnsArgs {
    prices: PathBuf,
    /// First date (inclusive), YYYY-MM-DD.
    #[arg(long)]
    from: Option<NaiveDate>,
    /// Last date (inclusive), YYYY-MM-DD.
    #[arg(long)]
    to: Option<NaiveDate>,
    /// Write the returns as CSV (header of tickers, one observation per row),
    /// ready for `test --orientation columns --header`.
    #[arg(long)]
    returns_out: Option<PathBuf>,
}

fn parse_kurtosis(s: &str) -> Result<KurtosisOption, String> {
    match s {
        "gaussian" => Ok(KurtosisOption::Gaussian),
        "estimate" => Ok(KurtosisOption::Estimate {
            prefer_lowdim: false,
        }),
        _ => {
            let rest = s
                .strip_prefix("known:")
                .ok_or_else(|| format!("expected gaussian, estimate or known:D1,D2, got {s:?}"))?;
            let (a, b) = rest
                .split_once(',')
                .ok_or_else(|| format!("expected known:D1,D2, got {s:?}"))?;
            let d1 = a.trim().parse::<f64>().map_err(|e| format!("{a:?}: {e}"))?;
            let d2 = b.trim().parse::<f64>().map_err(|e| format!("{b:?}: {e}"))?;
            Ok(KurtosisOption::Known {
                delta1: d1,
                delta2: d2,
            })
        }
    }
}

fn parse_test_kind(s: &str) -> Result<TestKind, String> {
    TestKind::parse(s.trim()).ok_or_else(|| format!("unknown test {s:?}; expected T, T~, lc or clx"))
}

fn parse_case(s: &str) -> Result<Case, String> {
    let v: u8 = s.parse().map_err(|_| format!("case must be 1-4, got {s:?}"))?;
    Case::try_from(v).map_err(|e| e.to_string())
}

fn parse_table(s: &str) -> Result<TableId, String> {
    TableId::parse(s).map_err(|e| e.to_string())
}

fn parse_quantity(s: &str) -> Result<Quantity, String> {
    Quantity::parse(s).map_err(|e| e.to_string())
}

fn parse_range(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s
        .split_once(',')
        .ok_or_else(|| format!("expected LO,HI, got {s:?}"))?;
    let lo = a.trim().parse::<f64>().map_err(|e| format!("{a:?}: {e}"))?;
    let hi = b.trim().parse::<f64>().map_err(|e| format!("{b:?}: {e}"))?;
    Ok((lo, hi))
}

enum CliError {
    Usage(String),
    Lib(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Lib(e)
    }
}

type CliResult<T> = Result<T, CliError>;

/// A finished report plus its CSV rendering.
struct Output {
    doc: ReportDocument,
    grid: Option<CsvGrid>,
}

#[derive(Serialize)]
struct TestConfig<'a> {
    sample1: &'a Path,
    sample2: &'a Path,
    orientation: Orientation,
    header: bool,
    variant: VariantArg,
    kurtosis: KurtosisOption,
    sidedness: Sidedness,
    level: f64,
    comparators: bool,
}

#[derive(Serialize)]
struct Decision {
    test: &'static str,
    statistic: f64,
    p_value: f64,
    reject: bool,
}

#[derive(Serialize)]
struct TestOutput {
    p: usize,
    n1: usize,
    n2: usize,
    statistics: Vec<TestResult>,
    comparators: Vec<ComparatorResult>,
    decisions: Vec<Decision>,
}

fn check_level(level: f64) -> CliResult<()> {
    if level > 0.0 && level < 1.0 {
        Ok(())
    } else {
        Err(CliError::Usage(format!("--level must lie in (0,1), got {level}")))
    }
}

fn cmd_test(args: &TestArgs) -> CliResult<Output> {
    check_level(args.level)?;
    let orientation = args.input.orientation.into();
    let x = ingest_csv(&args.sample1, orientation, args.input.header)?;
    let y = ingest_csv(&args.sample2, orientation, args.input.header)?;
    let kurtosis = match args.kurtosis {
        KurtosisOption::Estimate { .. } => KurtosisOption::Estimate {
            prefer_lowdim: args.lowdim,
        },
        k => k,
    };
    let sidedness: Sidedness = args.sided.into();
    let mut statistics = Vec::new();
    let mut warnings: Vec<Warning> = Vec::new();
    for variant in args.variant.variants() {
        let res = run_test(
            &x,
            &y,
            &TestOptions {
                variant,
                kurtosis,
                sidedness,
            },
        )?;
        for w in &res.warnings {
            if !warnings.contains(w) {
                warnings.push(w.clone());
            }
        }
        statistics.push(res);
    }
    let comparators = if args.comparators {
        vec![li_chen_test(&x, &y)?, clx_test(&x, &y)?]
    } else {
        vec![]
    };
    let mut decisions: Vec<Decision> = statistics
        .iter()
        .map(|r| Decision {
            test: r.variant.symbol(),
            statistic: r.standardized,
            p_value: r.p_value,
            reject: r.p_value < args.level,
        })
        .collect();
    decisions.extend(comparators.iter().map(|c| Decision {
        test: match c.name {
            covlrt::comparators::ComparatorName::Lc => "lc",
            covlrt::comparators::ComparatorName::Clx => "clx",
        },
        statistic: c.statistic,
        p_value: c.p_value,
        reject: c.p_value < args.level,
    }));
    let config = TestConfig {
        sample1: &args.sample1,
        sample2: &args.sample2,
        orientation,
        header: args.input.header,
        variant: args.variant,
        kurtosis,
        sidedness,
        level: args.level,
        comparators: args.comparators,
    };
    let out = TestOutput {
        p: x.p(),
        n1: x.dof(),
        n2: y.dof(),
        statistics,
        comparators,
        decisions,
    };
    let doc = ReportDocument::new("test", &config, &out)?.with_warnings(warnings);
    Ok(Output { doc, grid: None })
}

fn scenario_defaults(mc: &MonteCarloArgs) -> CliResult<Vec<TestKind>> {
    check_level(mc.level)?;
    let tests = mc.tests.clone().unwrap_or_else(|| TestKind::ALL.to_vec());
    if tests.is_empty() {
        return Err(CliError::Usage("--tests selects nothing".into()));
    }
    Ok(tests)
}

fn cmd_simulate(args: &SimulateArgs) -> CliResult<Output> {
    let tests = scenario_defaults(&args.mc)?;
    let cfg = ScenarioConfig {
        case: args.case,
        n1: args.n1,
        n2: args.n2,
        p: args.p,
        a: args.a,
        replicates: args.mc.replicates.unwrap_or(covlrt::simulation::DEFAULT_REPLICATES),
        master_seed: args.mc.seed,
        level: args.mc.level,
        tests,
        kurtosis_mode: args.mc.kurtosis_mode.into(),
        scaling: args.mc.scaling.into(),
        sidedness: args.mc.sided.into(),
    };
    let report = run_scenario(&cfg)?;
    let grid = CsvGrid::scenario(&report);
    Ok(Output {
        doc: ReportDocument::new("simulate", &cfg, &report)?,
        grid: Some(grid),
    })
}

#[derive(Serialize)]
struct TableConfig<'a> {
    table: TableId,
    #[serde(flatten)]
    options: &'a TableOptions,
}

fn cmd_table(args: &TableArgs) -> CliResult<Output> {
    let tests = scenario_defaults(&args.mc)?;
    let mut options = TableOptions::for_table(args.table);
    options.replicates = args.mc.replicates.unwrap_or(options.replicates);
    options.master_seed = args.mc.seed;
    options.level = args.mc.level;
    options.tests = tests;
    options.kurtosis_mode = args.mc.kurtosis_mode.into();
    options.scaling = args.mc.scaling.into();
    options.sidedness = args.mc.sided.into();
    if options.replicates == 0 {
        return Err(CliError::Usage("--replicates must be at least 1".into()));
    }
    let report = reproduce_table(args.table, &options)?;
    let grid = CsvGrid::table(&report);
    let config = TableConfig {
        table: args.table,
        options: &options,
    };
    Ok(Output {
        doc: ReportDocument::new("table", &config, &report)?,
        grid: Some(grid),
    })
}

#[derive(Serialize)]
struct KurtosisConfig<'a> {
    own: &'a Path,
    other: Option<&'a PathBuf>,
    which: u8,
    lowdim: bool,
    orientation: Orientation,
    header: bool,
    diagnostics: bool,
}

fn cmd_kurtosis(args: &KurtosisArgs) -> CliResult<Output> {
    let orientation = args.input.orientation.into();
    let own = ingest_csv(&args.own, orientation, args.input.header)?;
    let estimate: KurtosisEstimate = if args.lowdim {
        estimate_delta_lowdim(&own, args.which)?
    } else {
        let path = args
            .other
            .as_ref()
            .ok_or_else(|| CliError::Usage("the pooled estimator needs the other sample (or pass --lowdim)".into()))?;
        let other = ingest_csv(path, orientation, args.input.header)?;
        estimate_delta(&own, &other, args.which)?
    };
    let warnings: Vec<Warning> = estimate.warning().into_iter().collect();
    let estimate = if args.diagnostics {
        estimate
    } else {
        estimate.without_diagnostics()
    };
    let config = KurtosisConfig {
        own: &args.own,
        other: args.other.as_ref(),
        which: args.which,
        lowdim: args.lowdim,
        orientation,
        header: args.input.header,
        diagnostics: args.diagnostics,
    };
    Ok(Output {
        doc: ReportDocument::new("estimate-kurtosis", &config, &estimate)?.with_warnings(warnings),
        grid: None,
    })
}

#[derive(Serialize)]
struct DensityConfig {
    y1: f64,
    y2: f64,
    dims: Option<(usize, usize, usize)>,
    points: usize,
}

#[derive(Serialize)]
struct OracleCheck {
    quadrature: f64,
    closed_form: f64,
}

#[derive(Serialize)]
struct DensityOutput {
    ratios: DesignRatios,
    support: covlrt::calibration::SupportInterval,
    continuous_mass: f64,
    lite_ell: OracleCheck,
    full_ell: OracleCheck,
    x: Vec<f64>,
    density: Vec<f64>,
}

fn cmd_density(args: &DensityArgs) -> CliResult<Output> {
    let (ratios, dims) = match (args.y1, args.y2, args.p, args.n1, args.n2) {
        (Some(y1), Some(y2), None, None, None) => (DesignRatios::from_ratios(y1, y2)?, None),
        (None, None, Some(p), Some(n1), Some(n2)) => (make_ratios(p, n1, n2)?, Some((p, n1, n2))),
        _ => {
            return Err(CliError::Usage(
                "give either --y1 and --y2, or --p, --n1 and --n2".into(),
            ))
        }
    };
    if args.points < 2 {
        return Err(CliError::Usage("--points must be at least 2".into()));
    }
    let s = support(&ratios);
    let x: Vec<f64> = (0..args.points)
        .map(|i| s.x_l + (s.x_r - s.x_l) * i as f64 / (args.points - 1) as f64)
        .collect();
    let density: Vec<f64> = x.iter().map(|&v| limiting_density(&ratios, v)).collect();
    let lite = centering(Variant::LiteLrt, &ratios, KurtosisPair::GAUSSIAN)?;
    let full = centering(Variant::FullLrt, &ratios, KurtosisPair::GAUSSIAN)?;
    let out = DensityOutput {
        ratios,
        support: s,
        continuous_mass: quadrature_centering(&ratios, Kernel::Unit)?,
        lite_ell: OracleCheck {
            quadrature: quadrature_centering(&ratios, Kernel::LogX)?,
            closed_form: lite.ell,
        },
        full_ell: OracleCheck {
            quadrature: quadrature_centering(&ratios, Kernel::FullLrt)?,
            closed_form: full.ell,
        },
        x: x.clone(),
        density: density.clone(),
    };
    let grid = CsvGrid {
        header: vec!["x".into(), "density".into()],
        rows: x
            .iter()
            .zip(&density)
            .map(|(a, b)| vec![covlrt::io::format_number(*a), covlrt::io::format_number(*b)])
            .collect(),
    };
    let config = DensityConfig {
        y1: ratios.y1,
        y2: ratios.y2,
        dims,
        points: args.points,
    };
    Ok(Output {
        doc: ReportDocument::new("density", &config, &out)?.with_warnings(ratios.warnings()),
        grid: Some(grid),
    })
}

fn cmd_surface(args: &SurfaceArgs) -> CliResult<Output> {
    let variant = match args.variant {
        VariantArg::Full => Variant::FullLrt,
        VariantArg::Lite => Variant::LiteLrt,
        VariantArg::Both => {
            return Err(CliError::Usage("surface takes --variant full or lite".into()))
        }
    };
    let spec = SurfaceSpec {
        y1_range: args.y1_range,
        y2_range: args.y2_range,
        steps: args.steps,
        quantity: args.quantity,
        kurtosis: KurtosisPair::new(args.delta1, args.delta2),
        variant,
    };
    let surface = calibration_surface(&spec)?;
    let grid = CsvGrid::surface(&surface);
    Ok(Output {
        doc: ReportDocument::new("surface", &spec, &surface)?,
        grid: Some(grid),
    })
}

#[derive(Serialize)]
struct LogReturnsConfig<'a> {
    prices: &'a Path,
    from: Option<NaiveDate>,
    to: Option<NaiveDate>,
    returns_out: Option<&'a PathBuf>,
}

#[derive(Serialize)]
struct LogReturnsOutput {
    tickers: Vec<String>,
    dates: Vec<NaiveDate>,
    p: usize,
    n_obs: usize,
    n: usize,
    /// One row per date (the later date of each pair).
    returns: Vec<Vec<f64>>,
}

fn cmd_log_returns(args: &LogReturnsArgs) -> CliResult<Output> {
    let (table, warnings) = read_prices(&args.prices)?;
    let table = table.between(args.from, args.to);
    let r = log_return_matrix(&table)?;
    let by_date = r.transpose();
    if let Some(path) = &args.returns_out {
        write_matrix_csv(path, Some(&table.tickers), &by_date)?;
    }
    let dates: Vec<NaiveDate> = table.dates[1..].to_vec();
    let returns: Vec<Vec<f64>> = by_date
        .row_iter()
        .map(|row| row.iter().copied().collect())
        .collect();
    let mut header = vec!["date".to_owned()];
    header.extend(table.tickers.iter().cloned());
    let grid = CsvGrid {
        header,
        rows: dates
            .iter()
            .zip(&returns)
            .map(|(d, row)| {
                let mut cells = vec![d.to_string()];
                cells.extend(row.iter().map(|v| covlrt::io::format_number(*v)));
                cells
            })
            .collect(),
    };
    let out = LogReturnsOutput {
        tickers: table.tickers.clone(),
        dates,
        p: r.nrows(),
        n_obs: r.ncols(),
        n: r.ncols().saturating_sub(1),
        returns,
    };
    let config = LogReturnsConfig {
        prices: &args.prices,
        from: args.from,
        to: args.to,
        returns_out: args.returns_out.as_ref(),
    };
    Ok(Output {
        doc: ReportDocument::new("log-returns", &config, &out)?.with_warnings(warnings),
        grid: Some(grid),
    })
}

fn run(cli: Cli) -> CliResult<()> {
    if let Some(n) = cli.global.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    let start = Instant::now();
    let mut out = match &cli.command {
        Command::Test(a) => cmd_test(a)?,
        Command::Simulate(a) => cmd_simulate(a)?,
        Command::Table(a) => cmd_table(a)?,
        Command::EstimateKurtosis(a) => cmd_kurtosis(a)?,
        Command::Density(a) => cmd_density(a)?,
        Command::Surface(a) => cmd_surface(a)?,
        Command::LogReturns(a) => cmd_log_returns(a)?,
    };
    if cli.global.timings {
        out.doc.timings = Some(Timings {
            total_seconds: start.elapsed().as_secs_f64(),
        });
    }
    let text = match cli.global.format {
        Format::Json => out.doc.to_json()?,
        Format::Csv => match &out.grid {
            Some(g) => g.render()?,
            None => out.doc.to_flat_csv()?,
        },
    };
    for w in &out.doc.warnings {
        eprintln!("warning: {}", w.message);
    }
    match &cli.global.output {
        Some(path) => fs::write(path, text).map_err(|e| CliError::Lib(Error::Io(e)))?,
        None => print!("{text}"),
    }
    Ok(())
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
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Lib(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_assumption_failure() { 2 } else { 1 })
        }
    }
}
