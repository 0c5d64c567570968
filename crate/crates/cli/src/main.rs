use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use qbask_cli::config::{parse_domain, parse_list, SequenceChoice, SetChoice};
use qbask_cli::error::exit;
use qbask_cli::{render, run, CliError, Command, ExperimentConfig, Format};
use qbask_core::operators::{Family, Wavelet};
use qbask_core::qcalc::TruncationPolicy;

/// Wavelet-aided Kantorovich q-Baskakov operators: figures, moment and
/// Korovkin checks, rate experiments and q-densities.
#[derive(Parser)]
#[command(name = "qbask", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Moment table |S e_j - closed form| for j = 0, 1, 2
    Moments(Common),
    /// Evaluate an operator family on a grid
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "wavelet")]
        family: FamilyArg,
    },
    /// g(x) = (x-1/5)(x-4/9), q = 0.95, m = 10, 30, 80
    Figure1(Common),
    /// g(x) = x^2 - 1, q = 1, m = 10, 30, 60
    Figure2(Common),
    /// f(x) = x^2 - 4x + 3, m = 50, q = 0.5, 0.7, 0.9, 0.99
    Figure3(Common),
    /// Weighted Korovkin test on e0, e1, e2 along a q-sequence
    Korovkin {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "canonical")]
        sequence: SequenceArg,
    },
    /// Weighted error against 3 C_alpha omega(g; delta_n)
    Rate {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "canonical")]
        sequence: SequenceArg,
        /// Use this C_alpha instead of computing it from the operator
        #[arg(long)]
        c_alpha: Option<f64>,
    },
    /// q-density of an index set
    Density {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "evens")]
        set: SetArg,
        #[arg(long, default_value_t = 1000)]
        horizon: u64,
        /// Fail unless the density at the horizon is within --expect-tol of this
        #[arg(long)]
        expect: Option<f64>,
        #[arg(long, default_value_t = 1e-3)]
        expect_tol: f64,
    },
}

#[derive(Args)]
struct Common {
    /// Comma-separated degrees
    #[arg(long)]
    m: Option<String>,
    /// Comma-separated q values
    #[arg(long)]
    q: Option<String>,
    /// Weight exponent alpha
    #[arg(long)]
    alpha: Option<f64>,
    /// Domain as a:b
    #[arg(long)]
    domain: Option<String>,
    /// Number of grid points
    #[arg(long)]
    points: Option<usize>,
    /// Function name (e0, e1, e2, example1..3) or expression in x
    #[arg(long)]
    function: Option<String>,
    /// Output file; stdout when absent
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: FormatArg,
    /// Series truncation tolerance
    #[arg(long)]
    tail_tol: Option<f64>,
    /// Series term cap; exceeding it exits 3
    #[arg(long)]
    max_terms: Option<usize>,
    /// haar, moment (two vanishing moments) or moment:K
    #[arg(long)]
    wavelet: Option<String>,
    /// Run the assertions only; emit nothing
    #[arg(long)]
    check: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Svg,
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    Wavelet,
    QBaskakov,
    QBaskakovKantorovich,
    Baskakov,
    BaskakovKantorovich,
    Bernstein,
    BernsteinKantorovich,
}

#[derive(Clone, Copy, ValueEnum)]
enum SequenceArg {
    Canonical,
    Harmonic,
}

#[derive(Clone, Copy, ValueEnum)]
enum SetArg {
    All,
    Evens,
    Squares,
    Empty,
}

fn parse_wavelet(text: &str) -> Result<Wavelet, CliError> {
    match text {
        "haar" => Ok(Wavelet::haar()),
        "moment" => Ok(Wavelet::moment_exact()),
        _ => {
            let k = text
                .strip_prefix("moment:")
                .and_then(|k| k.parse().ok())
                .ok_or_else(|| CliError::Config(format!("unknown wavelet {text:?}")))?;
            Ok(Wavelet::moment_polynomial(k)?)
        }
    }
}

fn apply_common(c: &mut ExperimentConfig, common: Common) -> Result<(), CliError> {
    if let Some(m) = common.m {
        c.m_values = parse_list(&m, "--m")?;
    }
    if let Some(q) = common.q {
        c.q_values = parse_list(&q, "--q")?;
    }
    if let Some(a) = common.alpha {
        c.alpha = a;
    }
    if let Some(d) = common.domain {
        c.domain = parse_domain(&d)?;
    }
    if let Some(p) = common.points {
        c.grid_points = p;
    }
    if let Some(f) = common.function {
        c.function = qbask_cli::config::FunctionSpec::parse(&f)?;
    }
    if let Some(w) = common.wavelet {
        c.wavelet = parse_wavelet(&w)?;
    }
    if common.tail_tol.is_some() || common.max_terms.is_some() {
        c.policy = TruncationPolicy::new(
            common.tail_tol.unwrap_or(c.policy.tail_tol()),
            common.max_terms.unwrap_or(c.policy.max_terms()),
        )?;
    }
    c.output_path = common.out;
    c.format = match common.format {
        FormatArg::Csv => Format::Csv,
        FormatArg::Svg => Format::Svg,
    };
    c.check_only = common.check;
    Ok(())
}

fn build_config(cmd: Cmd) -> Result<ExperimentConfig, CliError> {
    let sequence = |s: SequenceArg| match s {
        SequenceArg::Canonical => SequenceChoice::Canonical,
        SequenceArg::Harmonic => SequenceChoice::Harmonic,
    };
    let (command, common) = match cmd {
        Cmd::Moments(c) => (Command::Moments, c),
        Cmd::Figure1(c) => (Command::Figure1, c),
        Cmd::Figure2(c) => (Command::Figure2, c),
        Cmd::Figure3(c) => (Command::Figure3, c),
        Cmd::Evaluate { common, family } => {
            let mut cfg = ExperimentConfig::defaults(Command::Evaluate);
            cfg.family = match family {
                FamilyArg::Wavelet => Family::WaveletQBaskakovKantorovich,
                FamilyArg::QBaskakov => Family::QBaskakov,
                FamilyArg::QBaskakovKantorovich => Family::QBaskakovKantorovich,
                FamilyArg::Baskakov => Family::Baskakov,
                FamilyArg::BaskakovKantorovich => Family::BaskakovKantorovich,
                FamilyArg::Bernstein => Family::Bernstein,
                FamilyArg::BernsteinKantorovich => Family::BernsteinKantorovich,
            };
            apply_common(&mut cfg, common)?;
            return Ok(cfg);
        }
        Cmd::Korovkin { common, sequence: s } => {
            let mut cfg = ExperimentConfig::defaults(Command::Korovkin);
            cfg.sequence = sequence(s);
            apply_common(&mut cfg, common)?;
            return Ok(cfg);
        }
        Cmd::Rate {
            common,
            sequence: s,
            c_alpha,
        } => {
            let mut cfg = ExperimentConfig::defaults(Command::Rate);
            cfg.sequence = sequence(s);
            cfg.c_alpha = c_alpha;
            apply_common(&mut cfg, common)?;
            return Ok(cfg);
        }
        Cmd::Density {
            common,
            set,
            horizon,
            expect,
            expect_tol,
        } => {
            let mut cfg = ExperimentConfig::defaults(Command::Density);
            cfg.index_set = match set {
                SetArg::All => SetChoice::All,
                SetArg::Evens => SetChoice::Evens,
                SetArg::Squares => SetChoice::Squares,
                SetArg::Empty => SetChoice::Empty,
            };
            cfg.horizon = horizon;
            cfg.expect = expect;
            cfg.expect_tol = expect_tol;
            apply_common(&mut cfg, common)?;
            return Ok(cfg);
        }
    };
    let mut cfg = ExperimentConfig::defaults(command);
    apply_common(&mut cfg, common)?;
    Ok(cfg)
}

/// `QBASK_THREADS` caps the grid parallelism; 0 or unset means automatic.
fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("QBASK_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .map_err(|_| CliError::Config(format!("QBASK_THREADS must be a non-negative integer, got {raw:?}")))?;
    if n > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    Ok(())
}

fn execute(cmd: Cmd) -> Result<i32, CliError> {
    configure_threads()?;
    let config = build_config(cmd)?;
    let outcome = run(&config)?;
    if !config.check_only {
        let bytes = render(&outcome.artifact, config.format)?;
        match &config.output_path {
            Some(path) => std::fs::write(path, bytes)?,
            None => std::io::stdout().lock().write_all(&bytes)?,
        }
    }
    let status = if outcome.passed { "pass" } else { "FAIL" };
    eprintln!("{}: {status}", config.command.name());
    for m in &outcome.messages {
        eprintln!("  {m}");
    }
    Ok(outcome.exit_code())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("qbask: {e}");
            e.exit_code()
        }
    };
    debug_assert!((exit::PASS..=exit::NON_CONVERGENT).contains(&code));
    ExitCode::from(code as u8)
}
