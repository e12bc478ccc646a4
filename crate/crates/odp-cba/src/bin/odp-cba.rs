//! Command line front end. Exit codes: 0 success, 2 validation error,
//! 3 fixture discrepancy, 4 runtime failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use odp_cba::io::config::{load_config, ConfigError, RunConfig, RunMode};
use odp_cba::io::fixtures::{check_fixtures, load_fixtures, Anomaly, FixtureError, FixturePack};
use odp_cba::io::pipeline::{prepare, run, PipelineError, ReportBundle, Stages};
use odp_cba::io::report::{emit_report, frac, money, ratio, Format, ReportError};
use odp_cba::model::MoneyM;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
    Plotdata,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Format {
        match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
            FormatArg::Plotdata => Format::Plotdata,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Fixture,
    Formula,
}

#[derive(Debug, Parser)]
#[command(
    name = "odp-cba",
    version,
    about = "Cost-benefit appraisal of an operational digital platform"
)]
struct Cli {
    /// Run configuration (JSON). Defaults to the shipped configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Fixture directory with a MANIFEST.sha256. Defaults to the embedded pack.
    #[arg(long, global = true)]
    fixtures: Option<PathBuf>,
    /// Master seed of the Monte Carlo run.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Number of Monte Carlo trials.
    #[arg(long, global = true)]
    trials: Option<u64>,
    /// Output directory for report files.
    #[arg(long, global = true, env = "ODP_CBA_OUT", default_value = "out")]
    out: PathBuf,
    /// Report formats to write.
    #[arg(long, global = true, value_enum, value_delimiter = ',', default_values_t = [FormatArg::Csv, FormatArg::Json, FormatArg::Plotdata])]
    format: Vec<FormatArg>,
    /// Source of the benefit and cost tables.
    #[arg(long, global = true, value_enum)]
    mode: Option<ModeArg>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print EV, ET and RES projections per country.
    Project,
    /// Print benefit stream PVs.
    Benefits,
    /// Print the cost schedule.
    Costs,
    /// Print the headline appraisal.
    Appraise,
    /// Run the scenario suite.
    Scenario,
    /// Run the one-way sensitivity analysis.
    Tornado,
    /// Run the Monte Carlo analysis.
    Montecarlo,
    /// Run everything and write report files.
    Report,
    /// Verify fixture checksums, anomalies and stream fidelity.
    CheckFixtures,
}

enum Failure {
    Validation(String),
    Discrepancy(String),
    Runtime(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Validation(_) => 2,
            Failure::Discrepancy(_) => 3,
            Failure::Runtime(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Validation(m) | Failure::Discrepancy(m) | Failure::Runtime(m) => m,
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Io { .. } => Failure::Runtime(e.to_string()),
            _ => Failure::Validation(e.to_string()),
        }
    }
}

impl From<FixtureError> for Failure {
    fn from(e: FixtureError) -> Self {
        match e {
            FixtureError::ChecksumMismatch { .. } => Failure::Discrepancy(e.to_string()),
            FixtureError::MalformedRow { .. } | FixtureError::MissingReference(_) | FixtureError::Projection(_) => {
                Failure::Validation(e.to_string())
            }
            FixtureError::MissingFixture(_) | FixtureError::Io { .. } => Failure::Runtime(e.to_string()),
        }
    }
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Config(c) => c.into(),
            PipelineError::Fixture(f) => f.into(),
            PipelineError::Model(_) | PipelineError::Scenario(_) | PipelineError::Inconsistent(_) => {
                Failure::Validation(e.to_string())
            }
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

impl From<ReportError> for Failure {
    fn from(e: ReportError) -> Self {
        Failure::Runtime(e.to_string())
    }
}

fn load(cli: &Cli) -> Result<(RunConfig, FixturePack), Failure> {
    let mut cfg = match &cli.config {
        Some(p) => load_config(p)?,
        None => RunConfig::shipped()?,
    };
    if let Some(s) = cli.seed {
        cfg.monte_carlo.master_seed = s;
    }
    if let Some(n) = cli.trials {
        cfg.monte_carlo.n_trials = n;
    }
    if let Some(m) = cli.mode {
        cfg.mode = match m {
            ModeArg::Fixture => RunMode::Fixture,
            ModeArg::Formula => RunMode::Formula,
        };
    }
    cfg.validate()?;
    let pack = match &cli.fixtures {
        Some(dir) => load_fixtures(dir)?,
        None => FixturePack::shipped()?,
    };
    Ok((cfg, pack))
}

fn opt_money(v: Option<MoneyM>) -> String {
    v.map(money).unwrap_or_else(|| "-".into())
}

fn print_headline(b: &ReportBundle) {
    let h = &b.headline;
    println!("PV benefits  {} M EUR", money(h.pv_benefits));
    println!("PV costs     {} M EUR", money(h.pv_costs));
    println!("NPV          {} M EUR", money(h.npv));
    println!("BCR          {}", ratio(h.bcr));
    match (h.payback_eoy, h.payback_interp) {
        (Some(y), Some(i)) => println!("Payback      {y} (interpolated {i:.2})"),
        (Some(y), None) => println!("Payback      {y}"),
        _ => println!("Payback      not reached"),
    }
    for c in &b.countries {
        println!(
            "  {}  benefits {}  costs {}  npv {}  bcr {}",
            c.country,
            money(c.result.pv_benefits),
            money(c.result.pv_costs),
            money(c.result.npv),
            ratio(c.result.bcr)
        );
    }
}

fn execute(cli: &Cli) -> Result<(), Failure> {
    let (cfg, pack) = load(cli)?;
    match cli.command {
        Command::Project => {
            let prep = prepare(&cfg, &pack)?;
            println!("year,country,ev_stock_k,et_stock_k,res_gw");
            for (c, p) in prep.projections.iter() {
                for y in prep.projections.axis().years() {
                    println!(
                        "{y},{c},{:.1},{:.1},{:.2}",
                        p.ev_stock.get(y).copied().unwrap_or(0.0),
                        p.et_stock.get(y).copied().unwrap_or(0.0),
                        p.res_capacity.get(y).copied().unwrap_or(0.0)
                    );
                }
            }
        }
        Command::Benefits => {
            let b = run(&cfg, &pack, Stages::NONE)?;
            println!("stream,pv,reference");
            for s in &b.streams {
                println!("{},{},{}", s.stream.code(), money(s.pv), opt_money(s.reference));
            }
            println!("total,{},", money(b.headline.pv_benefits));
        }
        Command::Costs => {
            let prep = prepare(&cfg, &pack)?;
            let s = &prep.costs.schedule;
            println!("year,capex,opex");
            for y in s.axis().years() {
                println!(
                    "{y},{},{}",
                    money(s.capex.get(y).copied().unwrap_or(MoneyM::ZERO)),
                    money(s.opex.get(y).copied().unwrap_or(MoneyM::ZERO))
                );
            }
            println!("one_time,{}", money(s.one_time));
            println!("total,{}", money(s.total()));
        }
        Command::Appraise => print_headline(&run(&cfg, &pack, Stages::NONE)?),
        Command::Scenario => {
            let stages = Stages {
                scenarios: true,
                ..Stages::NONE
            };
            let b = run(&cfg, &pack, stages)?;
            println!("scenario,npv,bcr,reference_npv,reference_bcr");
            for s in &b.scenarios {
                println!(
                    "{},{},{},{},{}",
                    s.name,
                    money(s.npv),
                    ratio(s.bcr),
                    opt_money(s.reference_npv),
                    ratio(s.reference_bcr)
                );
            }
        }
        Command::Tornado => {
            let stages = Stages {
                tornado: true,
                ..Stages::NONE
            };
            let b = run(&cfg, &pack, stages)?;
            println!("parameter,low,high,npv_low,npv_high,range");
            for t in &b.tornado {
                println!(
                    "{},{},{},{},{},{}",
                    t.parameter,
                    frac(t.low),
                    frac(t.high),
                    money(t.npv_low),
                    money(t.npv_high),
                    money(t.range)
                );
            }
            println!("discount sweep:");
            for p in &b.discount_sweep {
                println!("  {} npv {} bcr {}", p.rate, money(p.npv), ratio(p.bcr));
            }
        }
        Command::Montecarlo => {
            let stages = Stages {
                monte_carlo: true,
                country_monte_carlo: true,
                ..Stages::NONE
            };
            let b = run(&cfg, &pack, stages)?;
            if let Some(mc) = &b.monte_carlo {
                let s = &mc.summary;
                println!("trials       {}", s.n_trials);
                println!("NPV mean     {}", money(s.npv.mean));
                println!("NPV p5..p95  {} .. {}", money(s.npv.p5), money(s.npv.p95));
                println!("P(NPV > 0)   {}", frac(s.prob_npv_pos));
                println!("P(BCR > 1)   {}", frac(s.prob_bcr_gt1));
            }
            for c in &b.countries {
                if let Some(s) = &c.monte_carlo {
                    println!(
                        "  {} mean {} p5 {} p95 {}",
                        c.country,
                        money(s.npv.mean),
                        money(s.npv.p5),
                        money(s.npv.p95)
                    );
                }
            }
        }
        Command::Report => {
            let b = run(&cfg, &pack, Stages::ALL)?;
            let formats: Vec<Format> = cli.format.iter().map(|f| (*f).into()).collect();
            let written = emit_report(&b, &formats, &cli.out)?;
            print_headline(&b);
            for p in written {
                println!("wrote {}", p.display());
            }
        }
        Command::CheckFixtures => {
            let model = cfg.model()?;
            let check = check_fixtures(&pack, Some(&model))?;
            for a in &check.anomalies {
                match a {
                    Anomaly::ColumnDip {
                        stream,
                        year,
                        value,
                        neighbour_mean,
                    } => println!(
                        "anomaly: {} {year} = {} against neighbour mean {}",
                        stream.code(),
                        money(*value),
                        money(*neighbour_mean)
                    ),
                    Anomaly::RowTotal {
                        year,
                        printed,
                        component_sum,
                    } => println!(
                        "anomaly: row {year} total {} against component sum {}",
                        money(*printed),
                        money(*component_sum)
                    ),
                }
            }
            for s in &check.stream_fidelity {
                println!(
                    "{}: reference {} raw {} ({}) repaired {} ({}) {}",
                    s.stream.code(),
                    money(s.reference),
                    money(s.raw_sum),
                    frac(s.raw_deviation),
                    money(s.repaired_sum),
                    frac(s.repaired_deviation),
                    if s.within_tolerance { "ok" } else { "OUT OF TOLERANCE" }
                );
            }
            let drift = check.projection_drift.iter().filter(|p| !p.within_tolerance).count();
            println!(
                "projection cells outside tolerance: {drift} of {}",
                check.projection_drift.len()
            );
            if !check.streams_ok() {
                return Err(Failure::Discrepancy(
                    "benefit stream columns disagree with stream PVs".into(),
                ));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
