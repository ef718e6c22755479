use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use mblab::cli::{
    run, Format, Mode, PermutationSource, RunConfig, SweepAxis, SweepConfig, EXIT_ERROR, EXIT_FAIL, EXIT_PASS,
    THREADS_ENV,
};
use mblab::seqplan::{EpsilonSpec, PlanMode};
use mblab::{Error, Result};

#[derive(Parser, Debug)]
#[command(
    name = "mblab",
    version,
    about = "Almost-Auerbach M-basis constructions and certificates"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON run configuration; flags override its fields.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,

    /// Tolerance for both identities and inequalities.
    #[arg(long, global = true, value_name = "X")]
    tol: Option<f64>,

    /// Write the report here instead of stdout.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,

    #[arg(long, global = true, value_enum)]
    format: Option<FormatArg>,

    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Plan blocks and report closed-form block diagnostics.
    Construct,
    /// Check the stability chain on normalized systems.
    Verify,
    /// Build conditionality witnesses against a permutation.
    Witness,
    /// Exact basis constants and the best ordering at small dimension.
    Oracle,
    /// Check the Auerbach renorming on sampled vectors.
    Renorm,
    /// Walsh character prefix norms, orderings and unconditionality.
    Characters,
    /// Run one axis of a parameter sweep.
    Sweep,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum FormatArg {
    Json,
    Csv,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum PlanArg {
    Theorem2,
    Theorem4,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum AxisArg {
    C,
    M,
    P,
    Dim,
    Block,
}

#[derive(Args, Debug, Default)]
struct Overrides {
    /// constant:V, power:EXP[:SCALE], geometric:FIRST:RATIO, list:V1,V2,.. or csv:PATH
    #[arg(long, global = true, value_name = "SPEC")]
    epsilon: Option<String>,

    #[arg(long, global = true, value_enum)]
    plan: Option<PlanArg>,

    #[arg(long, global = true, value_name = "N")]
    blocks: Option<usize>,

    #[arg(long, global = true, value_delimiter = ',', value_name = "N,..")]
    dims: Option<Vec<usize>>,

    #[arg(long, global = true, value_delimiter = ',', value_name = "C,..")]
    targets: Option<Vec<f64>>,

    /// identity, reversal, random[:SEED] or csv:PATH
    #[arg(long, global = true, value_name = "SOURCE")]
    permutation: Option<String>,

    /// Random permutations per target in a C sweep.
    #[arg(long, global = true, value_name = "N")]
    permutations: Option<usize>,

    /// Explicit system file (JSON rows or CSV).
    #[arg(long, global = true, value_name = "PATH")]
    system: Option<PathBuf>,

    #[arg(long, global = true, value_delimiter = ',', value_name = "M,..")]
    ranks: Option<Vec<u32>>,

    #[arg(long = "p", global = true, value_delimiter = ',', value_name = "P,..")]
    exponents: Option<Vec<f64>>,

    #[arg(long, global = true, value_name = "N")]
    trials: Option<usize>,

    #[arg(long, global = true, value_name = "N")]
    samples: Option<usize>,

    #[arg(long, global = true, value_enum)]
    axis: Option<AxisArg>,

    #[arg(long, global = true, value_delimiter = ',', value_name = "V,..")]
    values: Option<Vec<f64>>,
}

fn parse_f64(field: &str, s: &str) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|e| Error::config(field, format!("{s:?}: {e}")))
}

fn parse_epsilon(spec: &str) -> Result<EpsilonSpec> {
    let (kind, rest) = spec.split_once(':').unwrap_or((spec, ""));
    let parts: Vec<&str> = rest.split(':').collect();
    let field = "--epsilon";
    Ok(match kind {
        "constant" => EpsilonSpec::Constant {
            value: parse_f64(field, rest)?,
        },
        "power" => EpsilonSpec::PowerLaw {
            exponent: parse_f64(field, parts[0])?,
            scale: parts.get(1).map(|s| parse_f64(field, s)).transpose()?.unwrap_or(1.0),
        },
        "geometric" if parts.len() == 2 => EpsilonSpec::Geometric {
            first: parse_f64(field, parts[0])?,
            ratio: parse_f64(field, parts[1])?,
        },
        "list" => EpsilonSpec::Explicit {
            values: rest.split(',').map(|s| parse_f64(field, s)).collect::<Result<_>>()?,
        },
        "csv" => EpsilonSpec::Csv { path: rest.to_string() },
        _ => return Err(Error::config(field, format!("unrecognized spec {spec:?}"))),
    })
}

fn parse_permutation(spec: &str) -> Result<PermutationSource> {
    let (kind, rest) = spec.split_once(':').unwrap_or((spec, ""));
    Ok(match kind {
        "identity" => PermutationSource::Identity,
        "reversal" => PermutationSource::Reversal,
        "random" if rest.is_empty() => PermutationSource::Random { seed: None },
        "random" => PermutationSource::Random {
            seed: Some(
                rest.parse()
                    .map_err(|e| Error::config("--permutation", format!("{rest:?}: {e}")))?,
            ),
        },
        "csv" => PermutationSource::Csv { path: rest.into() },
        _ => return Err(Error::config("--permutation", format!("unrecognized source {spec:?}"))),
    })
}

fn build_config(cli: &Cli) -> Result<RunConfig> {
    let mut c = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    c.mode = Some(match cli.command {
        Command::Construct => Mode::Construct,
        Command::Verify => Mode::Verify,
        Command::Witness => Mode::Witness,
        Command::Oracle => Mode::Oracle,
        Command::Renorm => Mode::Renorm,
        Command::Characters => Mode::Characters,
        Command::Sweep => Mode::Sweep,
    });
    if let Some(seed) = cli.seed {
        c.seed = Some(seed);
    }
    if let Some(tol) = cli.tol {
        c.tolerances.identity = tol;
        c.tolerances.inequality = tol;
    }
    if let Some(out) = &cli.out {
        c.output = Some(out.clone());
    }
    if let Some(f) = cli.format {
        c.format = match f {
            FormatArg::Json => Format::Json,
            FormatArg::Csv => Format::Csv,
        };
    }
    let o = &cli.overrides;
    if let Some(spec) = &o.epsilon {
        c.epsilon = parse_epsilon(spec)?;
    }
    if let Some(plan) = o.plan {
        c.plan = match plan {
            PlanArg::Theorem2 => PlanMode::Theorem2,
            PlanArg::Theorem4 => PlanMode::Theorem4,
        };
    }
    if let Some(n) = o.blocks {
        c.block_count = n;
    }
    if let Some(v) = &o.dims {
        c.dims = v.clone();
    }
    if let Some(v) = &o.targets {
        c.targets = v.clone();
    }
    if let Some(p) = &o.permutation {
        c.permutation = parse_permutation(p)?;
    }
    if let Some(n) = o.permutations {
        c.permutations = n;
    }
    if let Some(path) = &o.system {
        c.system = Some(path.clone());
    }
    if let Some(v) = &o.ranks {
        c.ranks = v.clone();
    }
    if let Some(v) = &o.exponents {
        c.p = v.clone();
    }
    if let Some(n) = o.trials {
        c.trials = n;
    }
    if let Some(n) = o.samples {
        c.samples = n;
    }
    if o.axis.is_some() || o.values.is_some() {
        let previous = c.sweep.take();
        let axis = match o.axis {
            Some(AxisArg::C) => SweepAxis::C,
            Some(AxisArg::M) => SweepAxis::M,
            Some(AxisArg::P) => SweepAxis::P,
            Some(AxisArg::Dim) => SweepAxis::Dim,
            Some(AxisArg::Block) => SweepAxis::Block,
            None => previous
                .as_ref()
                .map(|s| s.axis)
                .ok_or_else(|| Error::config("--axis", "--values needs an axis"))?,
        };
        let values = match &o.values {
            Some(v) => v.clone(),
            None => previous.map(|s| s.values).unwrap_or_default(),
        };
        c.sweep = Some(SweepConfig { axis, values });
    }
    Ok(c)
}

fn configure_threads() -> Result<()> {
    if let Ok(value) = std::env::var(THREADS_ENV) {
        let n: usize = value
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Error::config(THREADS_ENV, format!("{value:?} is not a positive integer")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::config(THREADS_ENV, e.to_string()))?;
    }
    Ok(())
}

fn execute(cli: &Cli) -> Result<bool> {
    configure_threads()?;
    let config = build_config(cli)?;
    let report = run(&config)?;
    match &config.output {
        Some(path) => {
            let mut w = BufWriter::new(File::create(path)?);
            report.write(config.format, &mut w)?;
            w.flush()?;
        }
        None => {
            let stdout = io::stdout();
            report.write(config.format, stdout.lock())?;
        }
    }
    for f in &report.failures {
        eprintln!("FAIL: {f}");
    }
    Ok(report.passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match execute(&cli) {
        Ok(true) => EXIT_PASS,
        Ok(false) => EXIT_FAIL,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    };
    ExitCode::from(code as u8)
}
