//! `geospace` command-line driver: trace geodesics, chart spaces of
//! geodesics, connect points and run the property suites.

mod report;
mod svg;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use geospace::{GeoError, Space, SpaceSpec};
use serde_json::json;

#[derive(Parser, Debug)]
#[command(
    name = "geospace",
    version,
    about = "Geodesics, spaces of geodesics and their properties"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Space, e.g. `euclidean2`, `klein(2)`, `cylinder`, `product(cylinder,euclidean1)`.
    #[arg(long)]
    space: Option<String>,
    /// Space parameter overrides, `key=value` (repeatable).
    #[arg(long = "param", value_name = "KEY=VALUE")]
    params: Vec<String>,
    /// Seed for all sampling.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Integration tolerance (trace) or detection tolerance (properties).
    #[arg(long)]
    tol: Option<f64>,
    /// Write the result here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum Format {
    Json,
    Csv,
    Svg,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum ChartKind {
    #[value(name = "g-r2")]
    GR2,
    Ts,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum Family {
    /// The geodesic given by --start and --dir.
    Single,
    /// Lines through --through with slopes ±2^k, k = 1..=--kmax.
    Slopes,
    /// --samples random geodesics.
    Random,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Closed,
    Returning,
    #[value(name = "regularity-product")]
    RegularityProduct,
    Hull,
    Covering,
    All,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Integrate one geodesic and print its samples.
    Trace {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "X,Y,...")]
        start: String,
        #[arg(long, value_name = "V,W,...")]
        dir: String,
        /// Final parameter (negative integrates backwards).
        #[arg(long)]
        t: f64,
        /// Chart label of the start point (sphere factors).
        #[arg(long, default_value_t = 0)]
        chart_label: u32,
    },
    /// Chart points of geodesics in a space of geodesics.
    Chart {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        chart: ChartKind,
        #[arg(long, value_enum, default_value = "single")]
        family: Family,
        #[arg(long)]
        start: Option<String>,
        #[arg(long)]
        dir: Option<String>,
        #[arg(long, default_value = "1,0")]
        through: String,
        #[arg(long, default_value_t = 12)]
        kmax: u32,
        /// Sign of the slopes of the `slopes` family.
        #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
        sign: f64,
        #[arg(long, default_value_t = 500)]
        samples: usize,
    },
    /// Geodesics joining two points.
    Connect {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_hyphen_values = true)]
        from: String,
        #[arg(long, allow_hyphen_values = true)]
        to: String,
        #[arg(long, default_value_t = 2)]
        windings: u32,
    },
    /// Run property suites and report witnesses.
    Properties {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        suite: Suite,
        /// Covering for the covering suite.
        #[arg(long)]
        covering: Option<String>,
        #[arg(long)]
        samples: Option<usize>,
    },
}

/// A failure with its exit code.
pub struct Failure {
    code: u8,
    tag: String,
    message: String,
}

impl Failure {
    pub fn bad_args(message: impl Into<String>) -> Failure {
        Failure {
            code: 4,
            tag: "bad_arguments".into(),
            message: message.into(),
        }
    }

    pub fn unsupported(message: impl Into<String>) -> Failure {
        Failure {
            code: 3,
            tag: "unsupported".into(),
            message: message.into(),
        }
    }
}

impl From<GeoError> for Failure {
    fn from(e: GeoError) -> Failure {
        let code = match e {
            GeoError::UnsupportedChart { .. } => 3,
            GeoError::UnknownSpace(_)
            | GeoError::BadParams(_)
            | GeoError::Parse(_)
            | GeoError::UnknownCovering(_)
            | GeoError::BadSheet { .. }
            | GeoError::OutOfChart { .. }
            | GeoError::OutsideDisc(_) => 4,
            _ => 2,
        };
        Failure {
            code,
            tag: e.code().to_string(),
            message: e.to_string(),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, Failure>;

pub fn parse_vector(s: &str) -> CliResult<Vec<f64>> {
    Ok(geospace::parse_vector(s)?.as_slice().to_vec())
}

fn resolve_space(common: &Common) -> CliResult<Space> {
    let name = common
        .space
        .as_deref()
        .ok_or_else(|| Failure::bad_args("--space is required"))?;
    let mut params = Vec::new();
    for p in &common.params {
        let (k, v) = p
            .split_once('=')
            .ok_or_else(|| Failure::bad_args(format!("--param `{p}` is not key=value")))?;
        params.push((k.trim().to_string(), v.trim().to_string()));
    }
    let spec: SpaceSpec = name.parse()?;
    Ok(Space::new(spec.with_params(&params)?)?)
}

fn emit(common: &Common, text: &str) -> CliResult<()> {
    match &common.out {
        Some(path) => {
            std::fs::write(path, text).map_err(|e| Failure::bad_args(format!("cannot write {}: {e}", path.display())))
        }
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| Failure {
                    code: 2,
                    tag: "io".into(),
                    message: e.to_string(),
                })
        }
    }
}

fn to_json(v: &impl serde::Serialize) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("results serialize");
    s.push('\n');
    s
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Trace {
            common,
            start,
            dir,
            t,
            chart_label,
        } => {
            let space = resolve_space(&common)?;
            let text = report::trace(
                &space,
                &parse_vector(&start)?,
                &parse_vector(&dir)?,
                chart_label,
                t,
                common.tol,
                common.format,
            )?;
            emit(&common, &text)
        }
        Command::Chart {
            common,
            chart,
            family,
            start,
            dir,
            through,
            kmax,
            sign,
            samples,
        } => {
            let space = resolve_space(&common)?;
            let states = report::chart_family(
                &space,
                family,
                start.as_deref(),
                dir.as_deref(),
                &through,
                kmax,
                sign,
                samples,
                common.seed,
            )?;
            let points = report::chart_points(&space, chart, &states)?;
            let text = match common.format.unwrap_or(Format::Json) {
                Format::Json => to_json(&json!({
                    "space": space.id(),
                    "chart": match chart { ChartKind::GR2 => "g-r2", ChartKind::Ts => "ts" },
                    "points": points,
                })),
                Format::Svg => match chart {
                    ChartKind::GR2 => svg::g_r2(&points),
                    ChartKind::Ts => svg::ts(&points),
                },
                Format::Csv => return Err(Failure::unsupported("chart output is JSON or SVG")),
            };
            emit(&common, &text)
        }
        Command::Connect {
            common,
            from,
            to,
            windings,
        } => {
            let space = resolve_space(&common)?;
            if !matches!(common.format, None | Some(Format::Json)) {
                return Err(Failure::unsupported("connect output is JSON"));
            }
            let value = report::connect(&space, &parse_vector(&from)?, &parse_vector(&to)?, windings)?;
            emit(&common, &to_json(&value))
        }
        Command::Properties {
            common,
            suite,
            covering,
            samples,
        } => {
            if !matches!(common.format, None | Some(Format::Json)) {
                return Err(Failure::unsupported("property reports are JSON"));
            }
            let space = match (&common.space, &covering) {
                (None, Some(_)) => None,
                _ => Some(resolve_space(&common)?),
            };
            let value = report::properties(
                space.as_ref(),
                covering.as_deref(),
                suite,
                samples,
                common.seed,
                common.tol,
            )?;
            emit(&common, &to_json(&value))
        }
    }
}

fn fail(code: u8, tag: &str, message: &str) -> ExitCode {
    let err = json!({ "error": { "code": tag, "message": message, "exit_code": code } });
    eprintln!("{err}");
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e)
            if matches!(
                e.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            ) =>
        {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail(4, "bad_arguments", e.to_string().trim()),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => fail(f.code, &f.tag, &f.message),
    }
}
