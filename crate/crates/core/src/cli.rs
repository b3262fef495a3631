//! Command-line entry points: `simulate`, `fit` and `validate`.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::analysis::{analyze, AnalysisOptions, ModelKind, TheorySource};
use crate::config::{load_spec, Spec};
use crate::dataset::{load_table, Dataset};
use crate::error::{Error, Result};
use crate::gauge::{simulate_design, GaugeConstants};
use crate::report::{all_formats, render_summary, write_outputs, OutputFormat};
use crate::validate::validate;

#[derive(Debug, Parser)]
#[command(name = "hybridreg", version, about = "Hybrid physical/simulation regression analysis")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the gauge simulator over a design and append the theory column.
    Simulate(SimulateArgs),
    /// Fit a model and write coefficients, ANOVA tables and residual plots.
    Fit(FitArgs),
    /// Reproduce the bundled case study and compare against published values.
    Validate(ValidateArgs),
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Delimited data table with a header row.
    #[arg(long)]
    pub data: PathBuf,
    /// TOML spec: factors, response, gauge constants.
    #[arg(long)]
    pub spec: PathBuf,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// adiabatic or isochoric.
    #[arg(long)]
    pub theory: Option<String>,
    /// Name of the appended column (default P_<theory>).
    #[arg(long)]
    pub column: Option<String>,
    /// Output directory; the table goes to stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// mlr1, mlr2 or hybrid.
    #[arg(long)]
    pub model: Option<String>,
    /// adiabatic, isochoric, column:<name> or none.
    #[arg(long)]
    pub theory: Option<String>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Output directory (default "out").
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Comma-separated subset of text, rows, plots.
    #[arg(long, value_delimiter = ',')]
    pub format: Option<Vec<String>>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// Directory holding the bundled gauge data and spec files.
    #[arg(long, default_value = "data")]
    pub data_dir: PathBuf,
    /// Also write the check list to <out>/validation.txt.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn load_inputs(input: &InputArgs) -> Result<(Spec, Dataset)> {
    let spec = load_spec(&input.spec)?;
    let file = File::open(&input.data)
        .map_err(|e| Error::Config(format!("cannot open {}: {e}", input.data.display())))?;
    let ds = load_table(file, &spec.schema)?;
    Ok((spec, ds))
}

fn constants_line(k: &GaugeConstants) -> String {
    format!(
        "gauge constants: gamma = {}, p_atm = {} kPa, c_orifice = {}, c_sensor = {}",
        k.gamma, k.p_atm, k.c_orifice, k.c_sensor
    )
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<()> {
    let (spec, ds) = load_inputs(&args.input)?;
    let theory = args
        .theory
        .clone()
        .or_else(|| spec.run.theory.clone())
        .ok_or_else(|| Error::Config("simulate needs --theory adiabatic|isochoric".into()))?;
    let model = match theory.parse::<TheorySource>()? {
        TheorySource::Gauge(m) => m,
        other => return Err(Error::Config(format!("simulate needs a gauge theory, got {other}"))),
    };
    let theory = simulate_design(&ds, model, &spec.gauge, &spec.columns)?;
    let name = args.column.clone().unwrap_or_else(|| format!("P_{}", model.name()));
    let table = ds.with_appended_column(&name, theory.values.as_slice(), 6)?;
    let rendered = table.render();
    match &args.out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            let path = dir.join(format!("simulated_{}.tsv", model.name()));
            std::fs::write(&path, rendered)?;
            println!("{}", constants_line(&spec.gauge));
            println!("wrote {}", path.display());
        }
        None => {
            eprintln!("{}", constants_line(&spec.gauge));
            let mut out = std::io::stdout().lock();
            out.write_all(rendered.as_bytes())?;
        }
    }
    Ok(())
}

/// Flags win over the spec's `[run]` section, which wins over defaults.
pub fn fit_options(args: &FitArgs, spec: &Spec) -> Result<(AnalysisOptions, PathBuf, BTreeSet<OutputFormat>)> {
    let theory: TheorySource = args
        .theory
        .as_deref()
        .or(spec.run.theory.as_deref())
        .unwrap_or("none")
        .parse()?;
    let model: ModelKind = match args.model.as_deref().or(spec.run.model.as_deref()) {
        Some(m) => m.parse()?,
        None if theory == TheorySource::None => ModelKind::Mlr1,
        None => ModelKind::Hybrid,
    };
    let mut opts = AnalysisOptions::new(model, theory);
    opts.alpha = args.alpha.or(spec.run.alpha).unwrap_or(0.05);
    opts.gauge = spec.gauge;
    opts.columns = spec.columns.clone();
    opts.validate()?;

    let out = args
        .out
        .clone()
        .or_else(|| spec.run.out.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    let formats = match args.format.as_ref().or(spec.run.format.as_ref()) {
        Some(list) => list.iter().map(|f| f.trim().parse()).collect::<Result<BTreeSet<_>>>()?,
        None => all_formats(),
    };
    Ok((opts, out, formats))
}

pub fn cmd_fit(args: &FitArgs) -> Result<()> {
    let (spec, ds) = load_inputs(&args.input)?;
    let (opts, out, formats) = fit_options(args, &spec)?;
    let analysis = analyze(&ds, &opts)?;
    write_outputs(&analysis, &out, &formats)?;
    print!("{}", render_summary(&analysis));
    println!("reports written to {}", out.display());
    Ok(())
}

/// Returns whether every check passed.
pub fn cmd_validate(args: &ValidateArgs) -> Result<bool> {
    let report = validate(&args.data_dir)?;
    let text = report.render();
    print!("{text}");
    if let Some(dir) = &args.out {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("validation.txt"), &text)?;
    }
    Ok(report.all_passed())
}

pub fn run(cli: Cli) -> ExitCode {
    let result = match &cli.command {
        Command::Simulate(a) => cmd_simulate(a).map(|()| true),
        Command::Fit(a) => cmd_fit(a).map(|()| true),
        Command::Validate(a) => cmd_validate(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(cli),
        Err(e) => {
            let _ = e.print();
            if e.use_stderr() {
                ExitCode::from(64)
            } else {
                ExitCode::SUCCESS
            }
        }
    }
}
