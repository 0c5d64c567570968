//! Experiment configuration and per-command defaults.

use std::fmt;
use std::path::PathBuf;

use qbask_core::convergence::{IndexSet, QSequence, WeightedGrid};
use qbask_core::operators::{Family, Wavelet};
use qbask_core::qcalc::{QInterval, QParam, TruncationPolicy};

use crate::error::CliError;
use crate::expr::Expr;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Moments,
    Evaluate,
    Figure1,
    Figure2,
    Figure3,
    Korovkin,
    Rate,
    Density,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Moments => "moments",
            Command::Evaluate => "evaluate",
            Command::Figure1 => "figure1",
            Command::Figure2 => "figure2",
            Command::Figure3 => "figure3",
            Command::Korovkin => "korovkin",
            Command::Rate => "rate",
            Command::Density => "density",
        }
    }

    fn uses_operator(self) -> bool {
        !matches!(self, Command::Density)
    }

    /// Commands whose q comes from a q-sequence rather than a q list.
    fn uses_sequence(self) -> bool {
        matches!(self, Command::Korovkin | Command::Rate)
    }

    pub fn emits_curve(self) -> bool {
        matches!(
            self,
            Command::Evaluate | Command::Figure1 | Command::Figure2 | Command::Figure3
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Svg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SequenceChoice {
    Canonical,
    Harmonic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SetChoice {
    All,
    Evens,
    Squares,
    Empty,
}

impl SetChoice {
    pub fn build(self, horizon: u64) -> Result<IndexSet, CliError> {
        Ok(match self {
            SetChoice::All => IndexSet::all(horizon)?,
            SetChoice::Evens => IndexSet::evens(horizon)?,
            SetChoice::Squares => IndexSet::squares(horizon)?,
            SetChoice::Empty => IndexSet::empty(horizon)?,
        })
    }
}

/// A test function, given by name or by expression text.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionSpec {
    text: String,
    expr: Expr,
}

impl FunctionSpec {
    /// Named functions: `e0`, `e1`, `e2`, `example1`, `example2`, `example3`.
    pub fn parse(id: &str) -> Result<Self, CliError> {
        let text = match id.trim() {
            "e0" => "1",
            "e1" => "x",
            "e2" => "x^2",
            "example1" => "(x-1/5)*(x-4/9)",
            "example2" => "x^2-1",
            "example3" => "x^2-4*x+3",
            other => other,
        };
        Ok(Self {
            text: text.to_string(),
            expr: Expr::parse(text)?,
        })
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.expr.eval(x)
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    /// Coefficient of `x^2` if the function is a polynomial of degree <= 2.
    pub fn quadratic_leading(&self) -> Option<f64> {
        let p = self.expr.as_polynomial()?;
        match p.len() {
            0..=2 => Some(0.0),
            3 => Some(p[2]),
            _ => None,
        }
    }
}

impl fmt::Display for FunctionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub command: Command,
    pub function: FunctionSpec,
    pub m_values: Vec<u32>,
    pub q_values: Vec<f64>,
    pub domain: QInterval,
    pub grid_points: usize,
    pub alpha: f64,
    pub output_path: Option<PathBuf>,
    pub format: Format,
    pub policy: TruncationPolicy,
    pub wavelet: Wavelet,
    /// Operator family for `evaluate`.
    pub family: Family,
    /// q-sequence for `korovkin` and `rate` when no q list is given.
    pub sequence: SequenceChoice,
    /// Supplied `C_α` for `rate`; computed from the operator when absent.
    pub c_alpha: Option<f64>,
    pub index_set: SetChoice,
    pub horizon: u64,
    /// Expected density at the horizon for `density`.
    pub expect: Option<f64>,
    pub expect_tol: f64,
    /// Run the assertions without emitting an artifact.
    pub check_only: bool,
}

fn interval(a: f64, b: f64) -> QInterval {
    QInterval::new(a, b).expect("static interval")
}

impl ExperimentConfig {
    pub fn defaults(command: Command) -> Self {
        let (function, m_values, q_values, domain, points): (&str, Vec<u32>, Vec<f64>, _, usize) = match command {
            Command::Figure1 => ("example1", vec![10, 30, 80], vec![0.95], interval(0.0, 1.0), 201),
            Command::Figure2 => ("example2", vec![10, 30, 60], vec![1.0], interval(0.0, 1.0), 201),
            Command::Figure3 => ("example3", vec![50], vec![0.5, 0.7, 0.9, 0.99], interval(0.0, 4.0), 201),
            Command::Moments => ("e2", vec![2, 5, 10, 20, 50], vec![0.8, 0.9, 0.95, 1.0], interval(0.0, 2.0), 9),
            Command::Evaluate => ("e2", vec![10], vec![0.9], interval(0.0, 2.0), 21),
            Command::Korovkin => ("e2", (1..=20).map(|k| 10 * k).collect(), vec![], interval(0.0, 50.0), 201),
            Command::Rate => ("e2", vec![10, 20, 40, 80], vec![], interval(0.0, 50.0), 201),
            Command::Density => ("e0", vec![], vec![1.0], interval(0.0, 1.0), 2),
        };
        Self {
            command,
            function: FunctionSpec::parse(function).expect("builtin function"),
            m_values,
            q_values,
            domain,
            grid_points: points,
            alpha: 0.0,
            output_path: None,
            format: Format::Csv,
            policy: TruncationPolicy::default(),
            wavelet: Wavelet::moment_exact(),
            family: Family::WaveletQBaskakovKantorovich,
            sequence: SequenceChoice::Canonical,
            c_alpha: None,
            index_set: SetChoice::Evens,
            horizon: 1000,
            expect: None,
            expect_tol: 1e-3,
            check_only: false,
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Config(msg));
        if self.grid_points < 2 {
            return bad(format!("--points must be >= 2, got {}", self.grid_points));
        }
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return bad(format!("--alpha must be >= 0, got {}", self.alpha));
        }
        if self.format == Format::Svg && !self.command.emits_curve() {
            return bad(format!("svg output is not available for {}", self.command.name()));
        }
        if self.command.uses_operator() {
            if self.m_values.is_empty() {
                return bad("--m must list at least one degree".into());
            }
            if self.m_values.contains(&0) {
                return bad("degrees in --m must be >= 1".into());
            }
            if self.q_values.is_empty() && !self.command.uses_sequence() {
                return bad("--q must list at least one value".into());
            }
            if let Some(q) = self.q_values.iter().find(|&&q| !(q > 0.0 && q <= 1.0)) {
                return bad(format!("operator q values must lie in (0, 1], got {q}"));
            }
            if self.domain.lower() < 0.0 {
                return bad("the domain must lie in [0, inf)".into());
            }
            let unit_only = matches!(self.family, Family::Bernstein | Family::BernsteinKantorovich);
            if self.command == Command::Evaluate && unit_only && self.domain.upper() > 1.0 {
                return bad("Bernstein-type operators need a domain inside [0, 1]".into());
            }
        }
        match self.command {
            Command::Figure1 | Command::Figure2 | Command::Korovkin | Command::Rate => {
                if self.m_values.windows(2).any(|w| w[0] >= w[1]) {
                    return bad("--m must be strictly increasing".into());
                }
                if matches!(self.command, Command::Figure1 | Command::Figure2) && self.q_values.len() != 1 {
                    return bad(format!("{} takes a single --q", self.command.name()));
                }
            }
            Command::Figure3 => {
                if self.q_values.windows(2).any(|w| w[0] >= w[1]) {
                    return bad("--q must be strictly increasing".into());
                }
                if self.m_values.len() != 1 {
                    return bad("figure3 takes a single --m".into());
                }
            }
            Command::Density => {
                if self.q_values.len() != 1 || !(self.q_values[0] >= 1.0) {
                    return bad("density takes a single --q >= 1".into());
                }
                if self.horizon == 0 {
                    return bad("--horizon must be >= 1".into());
                }
            }
            _ => {}
        }
        if self.command.uses_sequence() {
            if self.domain.lower() != 0.0 {
                return bad("weighted norms need a domain starting at 0".into());
            }
            if self.q_values.len() > 1 {
                return bad("give at most one --q (a constant sequence)".into());
            }
        }
        Ok(())
    }

    /// Grid points `a + i (b - a)/(N - 1)`, with the last point exactly `b`.
    pub fn points(&self) -> Vec<f64> {
        let (a, b) = (self.domain.lower(), self.domain.upper());
        let n = self.grid_points;
        (0..n)
            .map(|i| {
                if i + 1 == n {
                    b
                } else {
                    a + i as f64 * (b - a) / (n - 1) as f64
                }
            })
            .collect()
    }

    pub fn weighted_grid(&self) -> Result<WeightedGrid, CliError> {
        Ok(WeightedGrid::new(self.domain.upper(), self.grid_points, self.alpha)?)
    }

    pub fn q_sequence(&self) -> Result<QSequence, CliError> {
        Ok(match (self.q_values.first(), self.sequence) {
            (Some(&q), _) => QSequence::constant(q)?,
            (None, SequenceChoice::Canonical) => QSequence::canonical(),
            (None, SequenceChoice::Harmonic) => QSequence::harmonic(),
        })
    }

    pub fn q_params(&self) -> Result<Vec<QParam>, CliError> {
        Ok(self.q_values.iter().map(|&q| QParam::new(q)).collect::<Result<_, _>>()?)
    }
}

/// Parses `a:b` into an interval.
pub fn parse_domain(text: &str) -> Result<QInterval, CliError> {
    let err = || CliError::Config(format!("domain must look like a:b with a <= b, got {text:?}"));
    let (a, b) = text.split_once(':').ok_or_else(err)?;
    let a: f64 = a.trim().parse().map_err(|_| err())?;
    let b: f64 = b.trim().parse().map_err(|_| err())?;
    QInterval::new(a, b).map_err(|_| err())
}

/// Parses a comma-separated list.
pub fn parse_list<T: std::str::FromStr>(text: &str, what: &str) -> Result<Vec<T>, CliError> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|_| CliError::Config(format!("bad {what} value {s:?}")))
        })
        .collect()
}
