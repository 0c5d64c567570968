//! Command implementations. Each returns the artifact plus the outcome of its
//! assertion suite; nothing here touches the filesystem.

use rayon::prelude::*;

use qbask_core::convergence::{
    korovkin_harness, q_density, rate_experiment, ConvergenceReport, HarnessSettings, ReportRow, Verdict,
};
use qbask_core::operators::{
    baskakov_kantorovich, moment_closed_form, operator_error_curve, q_baskakov_kantorovich,
    second_central_moment, wavelet_q_operator, Family, OperatorSpec, Wavelet,
};
use qbask_core::qcalc::QParam;

use crate::config::{Command, ExperimentConfig};
use crate::error::{exit, CliError};
use crate::output::{Cell, Curve, Table};

/// Residual allowed by every closed-form check.
pub const CHECK_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub enum Artifact {
    Curve(Curve),
    Table(Table),
}

impl Artifact {
    pub fn table(&self) -> Table {
        match self {
            Artifact::Curve(c) => c.to_table(),
            Artifact::Table(t) => t.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub artifact: Artifact,
    pub passed: bool,
    /// Diagnostics; on failure the first entry names the violation.
    pub messages: Vec<String>,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        if self.passed {
            exit::PASS
        } else {
            exit::ASSERTION
        }
    }
}

pub fn run(config: &ExperimentConfig) -> Result<Outcome, CliError> {
    config.validate()?;
    match config.command {
        Command::Moments => run_moments(config),
        Command::Evaluate => run_evaluate(config),
        Command::Figure1 => run_figure1(config),
        Command::Figure2 => run_figure2(config),
        Command::Figure3 => run_figure3(config),
        Command::Korovkin => run_korovkin(config),
        Command::Rate => run_rate(config),
        Command::Density => run_density(config),
    }
}

fn settings(config: &ExperimentConfig) -> HarnessSettings {
    HarnessSettings {
        wavelet: config.wavelet,
        policy: config.policy,
        ..HarnessSettings::default()
    }
}

/// Operator values on the config grid; the first failing point aborts.
fn operator_values(config: &ExperimentConfig, spec: &OperatorSpec, xs: &[f64]) -> Result<Vec<f64>, CliError> {
    let g = |x: f64| config.function.eval(x);
    let curve = operator_error_curve(g, spec, &config.wavelet, xs);
    if let Some(p) = curve.iter().find(|p| p.diagnostic.is_some()) {
        return Err(CliError::Numerical(format!(
            "m = {}, q = {}, x = {}: {}",
            spec.degree(),
            spec.q().value(),
            p.x,
            p.diagnostic.as_deref().unwrap_or_default()
        )));
    }
    Ok(curve.into_iter().map(|p| p.approx).collect())
}

struct Series {
    label: String,
    m: u32,
    q: QParam,
    values: Vec<f64>,
}

fn figure_series(config: &ExperimentConfig, by_q: bool) -> Result<(Vec<f64>, Vec<Series>), CliError> {
    let xs = config.points();
    let mut out = Vec::new();
    for &m in &config.m_values {
        for q in config.q_params()? {
            let spec = OperatorSpec::new(config.family, m, q, config.policy)?;
            let label = if by_q { format!("q={}", q.value()) } else { format!("m={m}") };
            out.push(Series {
                label,
                m,
                q,
                values: operator_values(config, &spec, &xs)?,
            });
        }
    }
    Ok((xs, out))
}

fn figure_curve(config: &ExperimentConfig, title: &str, xs: &[f64], series: &[Series]) -> Result<Curve, CliError> {
    let mut curve = Curve::new(format!("{title}: g(x) = {}", config.function), xs);
    let g: Vec<f64> = xs.iter().map(|&x| config.function.eval(x)).collect();
    curve.add_series("g", &g)?;
    for s in series {
        curve.add_series(s.label.clone(), &s.values)?;
    }
    Ok(curve)
}

fn max_error(config: &ExperimentConfig, xs: &[f64], s: &Series) -> f64 {
    xs.iter()
        .zip(&s.values)
        .map(|(&x, &v)| (v - config.function.eval(x)).abs())
        .fold(0.0, f64::max)
}

/// Max errors strictly decrease along the series, unless every operator
/// already reproduces `g` to `CHECK_TOL`.
fn check_improvement(config: &ExperimentConfig, xs: &[f64], series: &[Series], messages: &mut Vec<String>) -> bool {
    let errs: Vec<f64> = series.iter().map(|s| max_error(config, xs, s)).collect();
    for (s, e) in series.iter().zip(&errs) {
        messages.push(format!("max error {}: {e:e}", s.label));
    }
    if errs.iter().all(|&e| e <= CHECK_TOL) {
        return true;
    }
    match errs.windows(2).position(|w| !(w[1] < w[0])) {
        Some(i) => {
            messages.insert(
                0,
                format!(
                    "max error does not improve from {} ({:e}) to {} ({:e})",
                    series[i].label,
                    errs[i],
                    series[i + 1].label,
                    errs[i + 1]
                ),
            );
            false
        }
        None => true,
    }
}

/// For `g` of degree <= 2 with leading coefficient `a`, `S g - g` must equal
/// `a` times the second central moment at every grid point.
fn check_closed_form(config: &ExperimentConfig, xs: &[f64], series: &[Series], messages: &mut Vec<String>) -> bool {
    let Some(a) = config.function.quadratic_leading() else {
        messages.push("closed-form check skipped: g is not a polynomial of degree <= 2".into());
        return true;
    };
    let mut worst: Option<(f64, String)> = None;
    for s in series {
        for (&x, &v) in xs.iter().zip(&s.values) {
            let expected = a * second_central_moment(s.m, s.q, x);
            let r = ((v - config.function.eval(x)) - expected).abs();
            if worst.as_ref().is_none_or(|(w, _)| r > *w) {
                worst = Some((r, format!("{} at x = {x}", s.label)));
            }
        }
    }
    let (r, at) = worst.unwrap_or((0.0, String::new()));
    if r <= CHECK_TOL {
        messages.push(format!("closed-form error check passed (worst residual {r:e})"));
        true
    } else {
        messages.insert(0, format!("closed-form error check failed: residual {r:e} at {at}"));
        false
    }
}

pub fn run_figure1(config: &ExperimentConfig) -> Result<Outcome, CliError> {
    let (xs, series) = figure_series(config, false)?;
    let mut messages = Vec::new();
    let passed = check_improvement(config, &xs, &series, &mut messages);
    Ok(Outcome {
        artifact: Artifact::Curve(figure_curve(config, "figure1", &xs, &series)?),
        passed,
        messages,
    })
}

pub fn run_figure2(config: &ExperimentConfig) -> Result<Outcome, CliError> {
    let (xs, series) = figure_series(config, false)?;
    let mut messages = Vec::new();
    let improving = check_improvement(config, &xs, &series, &mut messages);
    let closed = check_closed_form(config, &xs, &series, &mut messages);
    Ok(Outcome {
        artifact: Artifact::Curve(figure_curve(config, "figure2", &xs, &series)?),
        passed: improving && closed,
        messages,
    })
}

pub fn run_figure3(config: &ExperimentConfig) -> Result<Outcome, CliError> {
    let (xs, series) = figure_series(config, true)?;
    let mut messages = Vec::new();
    let closed = check_closed_form(config, &xs, &series, &mut messages);

    // at fixed x > 0 the error shrinks as q (and with it q[m]_q) grows
    let mut monotone = true;
    for pair in series.windows(2) {
        for (i, &x) in xs.iter().enumerate() {
            if x <= 0.0 {
                continue;
            }
            let g = config.function.eval(x);
            let (e0, e1) = ((pair[0].values[i] - g).abs(), (pair[1].values[i] - g).abs());
            if e1 > e0 + 1e-10 {
                messages.insert(
                    0,
                    format!(
                        "error grows from {} ({e0:e}) to {} ({e1:e}) at x = {x}",
                        pair[0].label, pair[1].label
                    ),
                );
                monotone = false;
                break;
            }
        }
        if !monotone {
            break;
        }
    }
    Ok(Outcome {
        artifact: Artifact::Curve(figure_curve(config, "figure3", &xs, &series)?),
        passed: closed && monotone,
        messages,
    })
}

pub fn run_evaluate(config: &ExperimentConfig) -> Result<Outcome, CliError> {
    let xs = config.points();
    let mut curve = Curve::new(format!("evaluate: g(x) = {}", config.function), &xs);
    let g: Vec<f64> = xs.iter().map(|&x| config.function.eval(x)).collect();
    curve.add_series("g", &g)?;
    for &m in &config.m_values {
        for q in config.q_params()? {
            let spec = OperatorSpec::new(config.family, m, q, config.policy)?;
            let values = operator_values(config, &spec, &xs)?;
            curve.add_series(format!("m={m} q={}", q.value()), &values)?;
        }
    }
    Ok(Outcome {
        artifact: Artifact::Curve(curve),
        passed: true,
        messages: Vec::new(),
    })
}

/// Computes `S e_j` at `x` for the moment table.
pub type MomentEvaluator<'a> = dyn Fn(u32, &OperatorSpec, &Wavelet, f64) -> qbask_core::Result<f64> + Sync + 'a;

fn wavelet_moment(j: u32, spec: &OperatorSpec, wavelet: &Wavelet, x: f64) -> qbask_core::Result<f64> {
    wavelet_q_operator(|t| t.powi(j as i32), spec, wavelet, x)
}

struct MomentRow {
    j: u32,
    m: u32,
    q: QParam,
    x: f64,
    value: f64,
    closed: f64,
    /// `|T g - BK g|` at q = 1.
    reduction: Option<f64>,
}

pub fn run_moments(config: &ExperimentConfig) -> Result<Outcome, CliError> {
    run_moments_with(config, &wavelet_moment)
}

/// Moment table `|S e_j - closed form|` over `j <= 2`, `m`, `q` and the grid.
/// At `q = 1` the q-Kantorovich operator is also compared with the classical
/// Baskakov-Kantorovich operator.
pub fn run_moments_with(config: &ExperimentConfig, evaluator: &MomentEvaluator<'_>) -> Result<Outcome, CliError> {
    config.validate()?;
    let xs = config.points();
    let mut cases = Vec::new();
    for j in 0..=2u32 {
        for &m in &config.m_values {
            for q in config.q_params()? {
                for &x in &xs {
                    cases.push((j, m, q, x));
                }
            }
        }
    }
    let rows: Vec<MomentRow> = cases
        .par_iter()
        .map(|&(j, m, q, x)| {
            let spec = OperatorSpec::wavelet(m, q)?.with_policy(config.policy);
            let value = evaluator(j, &spec, &config.wavelet, x)?;
            let closed = moment_closed_form(j, m, q, x)?;
            let reduction = if q.is_unit() {
                let e = |t: f64| t.powi(j as i32);
                let t_spec = spec.with_family(Family::QBaskakovKantorovich)?;
                let t = q_baskakov_kantorovich(e, &t_spec, x)?;
                let bk = baskakov_kantorovich(e, m, x, &config.policy)?;
                Some((t - bk).abs())
            } else {
                None
            };
            Ok(MomentRow { j, m, q, x, value, closed, reduction })
        })
        .collect::<Result<_, qbask_core::Error>>()?;

    let mut table = Table::new(
        ["j", "m", "q", "x", "operator", "closed_form", "residual", "kantorovich_residual"]
            .map(String::from)
            .to_vec(),
    );
    let mut worst = (0.0_f64, String::new());
    let mut passed = true;
    for &MomentRow { j, m, q, x, value, closed, reduction } in &rows {
        let residual = (value - closed).abs();
        let at = format!("j = {j}, m = {m}, q = {}, x = {x}", q.value());
        for r in std::iter::once(residual).chain(reduction) {
            if !(r <= CHECK_TOL) {
                passed = false;
            }
            if !(r <= worst.0) {
                worst = (r, at.clone());
            }
        }
        table.push(vec![
            Cell::Int(j as i64),
            Cell::Int(m as i64),
            Cell::Real(q.value()),
            Cell::Real(x),
            Cell::Real(value),
            Cell::Real(closed),
            Cell::Real(residual),
            reduction.map_or(Cell::Empty, Cell::Real),
        ]);
    }
    let summary = format!("worst residual {:e} at {}", worst.0, worst.1);
    Ok(Outcome {
        artifact: Artifact::Table(table),
        passed,
        messages: vec![if passed { summary } else { format!("moment check failed: {summary}") }],
    })
}

fn report_table<R: ReportRow>(report: &ConvergenceReport<R>) -> Table {
    let mut table = Table::new(R::columns().iter().map(|s| s.to_string()).collect());
    for row in &report.rows {
        let values = row.values();
        let mut cells = vec![Cell::Int(values[0] as i64)];
        cells.extend(values[1..].iter().map(|&v| Cell::Real(v)));
        table.push(cells);
    }
    table
}

fn report_outcome<R: ReportRow>(report: ConvergenceReport<R>) -> Outcome {
    let passed = report.verdict == Verdict::Pass;
    let mut messages = report.notes.clone();
    if !passed {
        // move the first violation to the front
        if let Some(v) = messages.pop() {
            messages.insert(0, v);
        }
    }
    Outcome {
        artifact: Artifact::Table(report_table(&report)),
        passed,
        messages,
    }
}

pub fn run_korovkin(config: &ExperimentConfig) -> Result<Outcome, CliError> {
    let report = korovkin_harness(
        &config.q_sequence()?,
        &settings(config),
        &config.m_values,
        &config.weighted_grid()?,
    )?;
    Ok(report_outcome(report))
}

pub fn run_rate(config: &ExperimentConfig) -> Result<Outcome, CliError> {
    let g = |x: f64| config.function.eval(x);
    let report = rate_experiment(
        g,
        &config.q_sequence()?,
        &settings(config),
        &config.m_values,
        &config.weighted_grid()?,
        config.c_alpha,
    )?;
    Ok(report_outcome(report))
}

pub fn run_density(config: &ExperimentConfig) -> Result<Outcome, CliError> {
    let set = config.index_set.build(config.horizon)?;
    let q = QParam::new(config.q_values[0])?;
    let mut ns: Vec<u64> = std::iter::successors(Some(10u64), |n| n.checked_mul(10))
        .take_while(|&n| n < config.horizon)
        .collect();
    ns.push(config.horizon);
    let mut table = Table::new(vec!["n".into(), "q_density".into()]);
    let mut last = f64::NAN;
    for n in ns {
        last = q_density(&set, n, q)?;
        table.push(vec![Cell::Int(n as i64), Cell::Real(last)]);
    }
    let mut messages = vec![format!("q-density at n = {}: {last}", config.horizon)];
    let passed = match config.expect {
        Some(v) if !((last - v).abs() <= config.expect_tol) => {
            messages.insert(0, format!("density {last} differs from the expected {v} by more than {}", config.expect_tol));
            false
        }
        _ => true,
    };
    Ok(Outcome {
        artifact: Artifact::Table(table),
        passed,
        messages,
    })
}

/// Serialises an artifact in the requested format.
pub fn render(artifact: &Artifact, format: crate::config::Format) -> Result<Vec<u8>, CliError> {
    use crate::config::Format;
    match (format, artifact) {
        (Format::Csv, a) => Ok(a.table().to_csv_string()?.into_bytes()),
        (Format::Svg, Artifact::Curve(c)) => Ok(c.to_svg().into_bytes()),
        (Format::Svg, Artifact::Table(_)) => Err(CliError::Config("svg output needs a curve".into())),
    }
}
