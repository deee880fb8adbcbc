use std::collections::BTreeMap;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use tuplecause::lineage::d_lineage;
use tuplecause::metrics::{actual_causes, correlate_all, rank_by_effect, Options};
use tuplecause::probability::{trace_worlds, AggregateVariable, LineageVariable, OutcomeSpace};
use tuplecause::query::{parse_query_file, AvgMode, Comparator, Query};
use tuplecause::relational::load_instance_from_paths;
use tuplecause::report::{render_lineage, render_rows, Format, Kind, Row};
use tuplecause::{Error, Instance, Tuple};

#[derive(Parser)]
#[command(
    name = "tuplecause",
    version,
    about = "Causal effect and responsibility of database tuples"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Rank tuples by causal effect on the query.
    Effect(RunArgs),
    /// Actual causes, smallest contingency sets and responsibility.
    Causes(RunArgs),
    /// Print the instance-specialized lineage and its variable table.
    Lineage(RunArgs),
    /// Pearson correlation of the query with each tuple variable.
    Correlate(RunArgs),
}

#[derive(clap::Args)]
struct RunArgs {
    /// Schema declaration file.
    #[arg(long)]
    schema: PathBuf,
    /// Directory holding one `<relation>.csv` per relation.
    #[arg(long)]
    data: PathBuf,
    /// File listing the exogenous tuples, one per line.
    #[arg(long)]
    partition: Option<PathBuf>,
    /// Query file with a `FO:`, `DATALOG:` or `AGG:` header.
    #[arg(long)]
    query: PathBuf,
    #[arg(long, default_value_t = Format::Tsv)]
    format: Format,
    /// Cap on enumerated free variables and on contingency-search tuples.
    #[arg(long, env = "TUPLECAUSE_CAP", value_parser = clap::value_parser!(u32).range(1..))]
    cap: Option<u32>,
    #[arg(long, value_enum)]
    avg_mode: Option<AvgModeArg>,
    #[arg(long, value_parser = parse_comparator)]
    comparator: Option<Comparator>,
    /// Print per-world query values to stderr (at most six free variables).
    #[arg(long)]
    trace: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum AvgModeArg {
    Fixed,
    PerWorld,
}

fn parse_comparator(s: &str) -> Result<Comparator, String> {
    match s {
        ">" | "gt" => Ok(Comparator::Greater),
        ">=" | "ge" => Ok(Comparator::GreaterOrEqual),
        _ => Err(format!(
            "unknown comparator `{s}` (expected >, >=, gt or ge)"
        )),
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Syntax { .. }
        | Error::Io { .. }
        | Error::Data { .. }
        | Error::DuplicatePredicate(_)
        | Error::ArityMismatch { .. }
        | Error::ConstantOutsideUniverse(_)
        | Error::UnknownRelation(_)
        | Error::UnboundVariable(_)
        | Error::UnsafeRule { .. }
        | Error::NonPositiveRule(_)
        | Error::UnknownColumn { .. }
        | Error::UnknownPartitionTuple(_)
        | Error::WrongQueryKind { .. }
        | Error::BindingMismatch(_)
        | Error::NonNumeric { .. } => 2,
        Error::CapExceeded { .. } => 3,
        Error::MixedPolarity(_) => 4,
        Error::QueryFalse => 5,
        Error::ZeroVariance => 6,
        _ => 1,
    }
}

struct Loaded {
    inst: Instance,
    query: Query,
    opts: Options,
    format: Format,
}

fn load(args: &RunArgs) -> tuplecause::Result<Loaded> {
    let inst = load_instance_from_paths(&args.schema, &args.data, args.partition.as_deref())?;
    let text = std::fs::read_to_string(&args.query).map_err(|source| Error::Io {
        path: args.query.clone(),
        source,
    })?;
    let avg = args.avg_mode.map(|m| match m {
        AvgModeArg::Fixed => AvgMode::FixedDenominator,
        AvgModeArg::PerWorld => AvgMode::PerWorld,
    });
    let query = parse_query_file(&text, inst.schema())?.with_overrides(args.comparator, avg);
    let opts = args
        .cap
        .map_or_else(Options::default, |c| Options::with_cap(c as usize));
    Ok(Loaded {
        inst,
        query,
        opts,
        format: args.format,
    })
}

fn trace(l: &Loaded) -> tuplecause::Result<String> {
    let mut buf = Vec::new();
    match &l.query {
        Query::Aggregate(a) => {
            let vars: Vec<Tuple> = l.inst.relation(&a.relation).cloned().collect();
            let rv = AggregateVariable::new(a, &l.inst, vars)?;
            trace_worlds(&rv, &rv.space(), &mut buf)
        }
        q => {
            let dl = d_lineage(q, &l.inst)?;
            trace_worlds(
                &LineageVariable(&dl.lineage),
                &OutcomeSpace::for_lineage(&dl),
                &mut buf,
            )
        }
    }
    .expect("writing to memory");
    Ok(String::from_utf8(buf).expect("utf-8 trace"))
}

fn run(command: &Command) -> tuplecause::Result<(String, Option<String>)> {
    let (args, kind) = match command {
        Command::Effect(a) => (a, Kind::Effect),
        Command::Causes(a) => (a, Kind::Causes),
        Command::Lineage(a) => {
            let l = load(a)?;
            let dl = d_lineage(&l.query, &l.inst)?;
            return Ok((render_lineage(&dl, l.format), None));
        }
        Command::Correlate(a) => (a, Kind::Correlate),
    };
    let l = load(args)?;
    let traced = if args.trace { Some(trace(&l)?) } else { None };
    let effects = rank_by_effect(&l.inst, &l.query, &l.opts)?;
    let rows: Vec<Row> = match kind {
        Kind::Effect => effects.into_iter().map(Row::effect_only).collect(),
        Kind::Causes => {
            let mut causes: BTreeMap<Tuple, _> = actual_causes(&l.inst, &l.query, &l.opts)?
                .into_iter()
                .map(|c| (c.tuple.clone(), c))
                .collect();
            effects
                .into_iter()
                .map(|e| Row {
                    cause: causes.remove(&e.tuple),
                    effect: e,
                    correlation: None,
                })
                .collect()
        }
        Kind::Correlate => {
            let mut corr: BTreeMap<Tuple, _> = correlate_all(&l.inst, &l.query, &l.opts)?
                .into_iter()
                .map(|c| (c.tuple.clone(), c))
                .collect();
            effects
                .into_iter()
                .map(|e| Row {
                    correlation: corr.remove(&e.tuple),
                    effect: e,
                    cause: None,
                })
                .collect()
        }
    };
    Ok((render_rows(&rows, kind, l.format), traced))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli.command) {
        Ok((report, traced)) => {
            if let Some(t) = traced {
                eprint!("{t}");
            }
            let mut out = io::stdout().lock();
            if out
                .write_all(report.as_bytes())
                .and_then(|_| out.flush())
                .is_err()
            {
                return ExitCode::from(1);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
