//! Statistical convergence and weighted approximation analysis.
//!
//! Every supremum over `x >= 0` is estimated on a finite [`WeightedGrid`], so
//! the weighted norms and moduli reported here are lower estimates of the
//! true suprema. Asymptotic statements (densities, statistical limits) are
//! evaluated at a finite horizon and labelled as such.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::operators::{q_baskakov, second_central_moment, wavelet_q_operator, OperatorSpec, Wavelet};
use crate::qcalc::{q_integer, q_pochhammer, QParam, TruncationPolicy};

/// Number of increments sampled in `(0, δ]` by the weighted modulus.
pub const DEFAULT_MODULUS_STEPS: usize = 64;

/// Tolerance for quantities that are exactly zero in exact arithmetic.
pub const EXACT_TOL: f64 = 1e-10;

/// Slack allowed on top of a closed-form bound.
pub const BOUND_TOL: f64 = 1e-8;

/// Uniform grid on `[0, x_max]` (endpoints included) carrying the weight
/// `ρ_α(x) = 1 + x^{2+α}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedGrid {
    x_max: f64,
    n_points: usize,
    alpha: f64,
}

impl WeightedGrid {
    pub const DEFAULT_X_MAX: f64 = 50.0;
    pub const DEFAULT_POINTS: usize = 2001;

    pub fn new(x_max: f64, n_points: usize, alpha: f64) -> Result<Self> {
        if !(x_max.is_finite() && x_max > 0.0) {
            return Err(Error::invalid(format!("grid x_max must be > 0, got {x_max}")));
        }
        if n_points < 2 {
            return Err(Error::invalid(format!("grid needs at least 2 points, got {n_points}")));
        }
        if !(alpha.is_finite() && alpha >= 0.0) {
            return Err(Error::invalid(format!("weight exponent alpha must be >= 0, got {alpha}")));
        }
        Ok(Self {
            x_max,
            n_points,
            alpha,
        })
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn step(&self) -> f64 {
        self.x_max / (self.n_points - 1) as f64
    }

    pub fn points(&self) -> Vec<f64> {
        let h = self.step();
        (0..self.n_points)
            .map(|i| if i + 1 == self.n_points { self.x_max } else { i as f64 * h })
            .collect()
    }

    #[inline]
    pub fn weight(&self, x: f64) -> f64 {
        weight(self.alpha, x)
    }
}

impl Default for WeightedGrid {
    fn default() -> Self {
        Self {
            x_max: Self::DEFAULT_X_MAX,
            n_points: Self::DEFAULT_POINTS,
            alpha: 0.0,
        }
    }
}

/// `ρ_α(x) = 1 + x^{2+α}`.
#[inline]
pub fn weight(alpha: f64, x: f64) -> f64 {
    1.0 + x.abs().powf(2.0 + alpha)
}

type QGenerator = Arc<dyn Fn(u32) -> f64 + Send + Sync>;

/// A sequence `n ↦ q_n` with `q_n ∈ (0, 1]`.
#[derive(Clone)]
pub struct QSequence {
    generator: QGenerator,
    description: String,
}

impl fmt::Debug for QSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("QSequence")
            .field("description", &self.description)
            .finish_non_exhaustive()
    }
}

impl QSequence {
    pub fn new(description: impl Into<String>, generator: impl Fn(u32) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            generator: Arc::new(generator),
            description: description.into(),
        }
    }

    /// `q_n = n / (n + 1)`: `q_n → 1` but `q_n^n → 1/e`.
    pub fn harmonic() -> Self {
        Self::new("q_n = n/(n+1)", |n| n as f64 / (n as f64 + 1.0))
    }

    /// `q_n = 1 - 1/(n ln(n+2))`: `q_n → 1`, `q_n^n → 1` and `[n]_{q_n} → ∞`.
    pub fn slow_log() -> Self {
        Self::new("q_n = 1 - 1/(n ln(n+2))", |n| {
            let n = n as f64;
            1.0 - 1.0 / (n * (n + 2.0).ln())
        })
    }

    /// Default sequence for experiments.
    pub fn canonical() -> Self {
        Self::slow_log()
    }

    pub fn constant(q: f64) -> Result<Self> {
        if !(q > 0.0 && q <= 1.0) {
            return Err(Error::invalid(format!("constant q-sequence requires q in (0, 1], got {q}")));
        }
        Ok(Self::new(format!("q_n = {q}"), move |_| q))
    }

    pub fn description(&self) -> &str {
        &self.description
    }

    pub fn raw(&self, n: u32) -> f64 {
        (self.generator)(n)
    }

    pub fn q_at(&self, n: u32) -> Result<QParam> {
        let v = self.raw(n);
        if !(v > 0.0 && v <= 1.0) {
            return Err(Error::invalid(format!(
                "{}: q_{n} = {v} lies outside (0, 1]",
                self.description
            )));
        }
        QParam::new(v)
    }
}

/// Finite-horizon evidence for the two statistical limits a sequence must
/// satisfy: `q_n → 1` and `q_n^n → 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RemarkCheck {
    pub horizon: u32,
    /// Density of `{n : |q_n - 1| >= eps}` up to the horizon.
    pub density_q_far: f64,
    /// Density of `{n : |q_n^n - 1| >= eps}` up to the horizon.
    pub density_power_far: f64,
    /// `[n]_{q_n}` at the horizon.
    pub q_integer_at_horizon: f64,
}

pub fn remark_check(seq: &QSequence, horizon: u32, eps: f64) -> Result<RemarkCheck> {
    if horizon == 0 || !(eps > 0.0) {
        return Err(Error::invalid("remark check needs horizon >= 1 and eps > 0"));
    }
    let mut far_q = 0u32;
    let mut far_pow = 0u32;
    for n in 1..=horizon {
        let q = seq.q_at(n)?.value();
        if (q - 1.0).abs() >= eps {
            far_q += 1;
        }
        if (q.powi(n as i32) - 1.0).abs() >= eps {
            far_pow += 1;
        }
    }
    Ok(RemarkCheck {
        horizon,
        density_q_far: far_q as f64 / horizon as f64,
        density_power_far: far_pow as f64 / horizon as f64,
        q_integer_at_horizon: q_integer(horizon as u64, seq.q_at(horizon)?),
    })
}

type Membership = Arc<dyn Fn(u64) -> bool + Send + Sync>;

/// A set of positive integers, observed on `1..=horizon`.
#[derive(Clone)]
pub struct IndexSet {
    membership: Membership,
    horizon: u64,
}

impl fmt::Debug for IndexSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("IndexSet")
            .field("horizon", &self.horizon)
            .finish_non_exhaustive()
    }
}

impl IndexSet {
    pub fn new(horizon: u64, membership: impl Fn(u64) -> bool + Send + Sync + 'static) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::invalid("index set horizon must be >= 1"));
        }
        Ok(Self {
            membership: Arc::new(membership),
            horizon,
        })
    }

    pub fn all(horizon: u64) -> Result<Self> {
        Self::new(horizon, |_| true)
    }

    pub fn empty(horizon: u64) -> Result<Self> {
        Self::new(horizon, |_| false)
    }

    pub fn evens(horizon: u64) -> Result<Self> {
        Self::new(horizon, |k| k % 2 == 0)
    }

    pub fn squares(horizon: u64) -> Result<Self> {
        Self::new(horizon, is_square)
    }

    #[inline]
    pub fn contains(&self, k: u64) -> bool {
        (self.membership)(k)
    }

    pub fn horizon(&self) -> u64 {
        self.horizon
    }
}

/// Exact perfect-square test.
pub fn is_square(k: u64) -> bool {
    let r = (k as f64).sqrt() as u64;
    (r.saturating_sub(1)..=r + 1).any(|c| c.checked_mul(c) == Some(k))
}

/// `(1/r) #{k <= r : k ∈ K}`.
pub fn asymptotic_density(set: &IndexSet, r: u64) -> Result<f64> {
    if r == 0 || r > set.horizon {
        return Err(Error::invalid(format!(
            "density index r = {r} must lie in 1..={}",
            set.horizon
        )));
    }
    let count = (1..=r).filter(|&k| set.contains(k)).count();
    Ok(count as f64 / r as f64)
}

/// `sum_{k ∈ K, k <= n} q^{k-1} / [n]_q` for `q >= 1`.
pub fn q_density(set: &IndexSet, n: u64, q: QParam) -> Result<f64> {
    q.require_at_least_one("q-density")?;
    if n == 0 || n > set.horizon {
        return Err(Error::invalid(format!(
            "density index n = {n} must lie in 1..={}",
            set.horizon
        )));
    }
    if q.is_unit() {
        return asymptotic_density(set, n);
    }
    // q^{k-1}/[n]_q = (q-1) q^{k-1-n} / (1 - q^{-n}), finite for any n.
    let ln_q = q.value().ln();
    let norm = (q.value() - 1.0) / -(-(n as f64) * ln_q).exp_m1();
    let total: f64 = (1..=n)
        .filter(|&k| set.contains(k))
        .map(|k| ((k as f64 - 1.0 - n as f64) * ln_q).exp())
        .sum();
    Ok(total * norm)
}

/// Result of the finite-horizon q-statistical limit estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StatisticalLimitEstimate {
    pub horizon: u64,
    /// Estimated density of exceedances at `n = horizon`.
    pub density: f64,
    /// The same estimate one decade earlier, `n = max(1, horizon / 10)`.
    pub density_decade_earlier: f64,
    /// `density < threshold` and the estimate did not grow over the last decade.
    pub verdict: bool,
}

/// Finite-horizon estimate of `(1/[n]_q) #{k <= n : q^{k-1}|η_k - L| >= ε}`.
///
/// This cannot decide an asymptotic property; the verdict only reports
/// whether the estimate is below `threshold` at the horizon and
/// non-increasing over the last decade of `n`.
pub fn q_statistical_limit<E: Fn(u64) -> f64>(
    eta: E,
    limit: f64,
    eps: f64,
    q: QParam,
    horizon: u64,
    threshold: f64,
) -> Result<StatisticalLimitEstimate> {
    if !(eps > 0.0) {
        return Err(Error::invalid(format!("eps must be > 0, got {eps}")));
    }
    q.require_at_least_one("q-statistical limit")?;
    if horizon == 0 {
        return Err(Error::invalid("horizon must be >= 1"));
    }
    let ln_q = q.value().ln();
    let ln_eps = eps.ln();
    let earlier = (horizon / 10).max(1);
    let mut count = 0u64;
    let mut count_earlier = 0u64;
    for k in 1..=horizon {
        let diff = (eta(k) - limit).abs();
        let exceeds = diff > 0.0 && (k as f64 - 1.0) * ln_q + diff.ln() >= ln_eps;
        if exceeds {
            count += 1;
            if k <= earlier {
                count_earlier += 1;
            }
        }
    }
    let density = count as f64 / q_integer(horizon, q);
    let density_decade_earlier = count_earlier as f64 / q_integer(earlier, q);
    Ok(StatisticalLimitEstimate {
        horizon,
        density,
        density_decade_earlier,
        verdict: density < threshold && density <= density_decade_earlier,
    })
}

/// Grid estimate of `sup_x |f(x)| / ρ_α(x)`. NaN anywhere yields NaN.
pub fn weighted_norm<F: Fn(f64) -> f64>(f: F, grid: &WeightedGrid) -> f64 {
    grid.points()
        .into_iter()
        .map(|x| f(x).abs() / grid.weight(x))
        .fold(0.0, nan_max)
}

#[inline]
fn nan_max(acc: f64, v: f64) -> f64 {
    if acc.is_nan() || v.is_nan() {
        f64::NAN
    } else {
        acc.max(v)
    }
}

/// Grid estimate of the weighted modulus of smoothness
/// `sup_{x, 0 < i <= δ} |g(x+i) - g(x)| / (1 + (x+i)^{2+α})`, with `x` over the
/// grid and `i = δ k / i_steps`, `k = 1..=i_steps`.
pub fn weighted_modulus<G: Fn(f64) -> f64>(g: G, delta: f64, grid: &WeightedGrid, i_steps: usize) -> Result<f64> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::invalid(format!("delta must be > 0, got {delta}")));
    }
    if i_steps < 2 {
        return Err(Error::invalid("the modulus needs at least 2 increments"));
    }
    let increments: Vec<f64> = (1..=i_steps).map(|k| delta * k as f64 / i_steps as f64).collect();
    let mut best = 0.0_f64;
    for x in grid.points() {
        let gx = g(x);
        for &i in &increments {
            let v = (g(x + i) - gx).abs() / grid.weight(x + i);
            best = nan_max(best, v);
        }
    }
    Ok(best)
}

/// `1/(q [n]_q) + 1/[n]_q`: the weighted-norm bound on `S e2 - e2`.
pub fn korovkin_bound(n: u32, q: QParam) -> f64 {
    let nq = q_integer(n as u64, q);
    1.0 / (q.value() * nq) + 1.0 / nq
}

/// `δ = sqrt(1/(q [n]_q))`.
pub fn delta_for(n: u32, q: QParam) -> f64 {
    (1.0 / (q.value() * q_integer(n as u64, q))).sqrt()
}

/// `δ_n = sqrt(1/(q_n [n]_{q_n}))` along a q-sequence.
pub fn rate_delta(n: u32, seq: &QSequence) -> Result<f64> {
    if n == 0 {
        return Err(Error::invalid("rate_delta needs n >= 1"));
    }
    Ok(delta_for(n, seq.q_at(n)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
}

/// Column layout shared by report rows, for tabular serialisation.
pub trait ReportRow {
    fn columns() -> &'static [&'static str];
    fn values(&self) -> Vec<f64>;
}

/// One `n` of the Korovkin harness.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KorovkinRow {
    pub n: u32,
    pub q_n: f64,
    /// `‖S e_v - e_v‖_{ρ₀}` from operator evaluation on the grid.
    pub norm_e0: f64,
    pub norm_e1: f64,
    pub norm_e2: f64,
    /// `‖S e2 - e2‖_{ρ₀}` from the closed-form moments on the same grid.
    pub closed_form_norm_e2: f64,
    /// `1/(q_n [n]) + 1/[n]`.
    pub bound: f64,
    pub delta_n: f64,
    /// `ω_{ρ₀}(e2; δ_n)` on the grid.
    pub omega_at_delta: f64,
}

impl ReportRow for KorovkinRow {
    fn columns() -> &'static [&'static str] {
        &[
            "n",
            "q_n",
            "norm_e0",
            "norm_e1",
            "norm_e2",
            "closed_form_norm_e2",
            "bound",
            "delta_n",
            "omega_at_delta",
        ]
    }

    fn values(&self) -> Vec<f64> {
        vec![
            self.n as f64,
            self.q_n,
            self.norm_e0,
            self.norm_e1,
            self.norm_e2,
            self.closed_form_norm_e2,
            self.bound,
            self.delta_n,
            self.omega_at_delta,
        ]
    }
}

/// One `n` of a rate experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateRow {
    pub n: u32,
    pub q_n: f64,
    /// `‖S g - g‖_{ρ_α}` on the grid.
    pub norm: f64,
    pub delta_n: f64,
    /// `ω_{ρ_α}(g; δ_n)` on the grid.
    pub omega_at_delta: f64,
    /// `sup_x S(μ_{x,α}²; x) / ρ_α(x)` on the grid, or the supplied constant.
    pub c_alpha: f64,
    /// `3 C_α ω_{ρ_α}(g; δ_n)`.
    pub bound: f64,
}

impl ReportRow for RateRow {
    fn columns() -> &'static [&'static str] {
        &["n", "q_n", "norm", "delta_n", "omega_at_delta", "c_alpha", "bound"]
    }

    fn values(&self) -> Vec<f64> {
        vec![
            self.n as f64,
            self.q_n,
            self.norm,
            self.delta_n,
            self.omega_at_delta,
            self.c_alpha,
            self.bound,
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport<R> {
    pub rows: Vec<R>,
    pub verdict: Verdict,
    pub tolerance: f64,
    /// Human-readable findings; the first failing row is named here.
    pub notes: Vec<String>,
}

/// Operator-side settings shared by the harnesses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HarnessSettings {
    pub wavelet: Wavelet,
    pub policy: TruncationPolicy,
    pub modulus_steps: usize,
}

impl Default for HarnessSettings {
    fn default() -> Self {
        Self {
            wavelet: Wavelet::moment_exact(),
            policy: TruncationPolicy::default(),
            modulus_steps: DEFAULT_MODULUS_STEPS,
        }
    }
}

fn spec_for(n: u32, q: QParam, policy: TruncationPolicy) -> Result<OperatorSpec> {
    Ok(OperatorSpec::wavelet(n, q)?.with_policy(policy))
}

fn check_degrees(list: &[u32]) -> Result<()> {
    if list.is_empty() {
        return Err(Error::invalid("degree list must be nonempty"));
    }
    if list.contains(&0) || list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("degree list must be positive and strictly increasing"));
    }
    Ok(())
}

/// Weighted Korovkin test on `e0, e1, e2` along a q-sequence.
///
/// For each `n` the operator is evaluated on every grid point; the verdict is
/// `Pass` iff `norm_e0, norm_e1 <= EXACT_TOL` and
/// `norm_e2 <= 1/(q_n[n]) + 1/[n] + BOUND_TOL` on every row.
pub fn korovkin_harness(
    seq: &QSequence,
    settings: &HarnessSettings,
    m_list: &[u32],
    grid: &WeightedGrid,
) -> Result<ConvergenceReport<KorovkinRow>> {
    check_degrees(m_list)?;
    let rho0 = WeightedGrid::new(grid.x_max(), grid.n_points(), 0.0)?;
    let points = rho0.points();
    let rows: Vec<KorovkinRow> = m_list
        .iter()
        .map(|&n| {
            let q = seq.q_at(n)?;
            let spec = spec_for(n, q, settings.policy)?;
            let per_point: Vec<[f64; 4]> = points
                .par_iter()
                .map(|&x| {
                    let w = rho0.weight(x);
                    let s0 = wavelet_q_operator(|_| 1.0, &spec, &settings.wavelet, x)?;
                    let s1 = wavelet_q_operator(|t| t, &spec, &settings.wavelet, x)?;
                    let s2 = wavelet_q_operator(|t| t * t, &spec, &settings.wavelet, x)?;
                    let closed = second_central_moment(n, q, x);
                    Ok([
                        (s0 - 1.0).abs() / w,
                        (s1 - x).abs() / w,
                        (s2 - x * x).abs() / w,
                        closed / w,
                    ])
                })
                .collect::<Result<_>>()?;
            let col = |i: usize| per_point.iter().map(|r| r[i]).fold(0.0, nan_max);
            let delta_n = delta_for(n, q);
            Ok(KorovkinRow {
                n,
                q_n: q.value(),
                norm_e0: col(0),
                norm_e1: col(1),
                norm_e2: col(2),
                closed_form_norm_e2: col(3),
                bound: korovkin_bound(n, q),
                delta_n,
                omega_at_delta: weighted_modulus(|t| t * t, delta_n, &rho0, settings.modulus_steps)?,
            })
        })
        .collect::<Result<_>>()?;

    let mut notes = vec![format!(
        "sequence {}; grid [0, {}] with {} points; finite-horizon estimate",
        seq.description(),
        grid.x_max(),
        grid.n_points()
    )];
    let failing = rows.iter().find(|r| {
        !(r.norm_e0 <= EXACT_TOL && r.norm_e1 <= EXACT_TOL && r.norm_e2 <= r.bound + BOUND_TOL)
    });
    let verdict = match failing {
        Some(r) => {
            notes.push(format!(
                "first violation at n = {}: norm_e0 = {:e}, norm_e1 = {:e}, norm_e2 = {:e}, bound = {:e}",
                r.n, r.norm_e0, r.norm_e1, r.norm_e2, r.bound
            ));
            Verdict::Fail
        }
        None => Verdict::Pass,
    };
    Ok(ConvergenceReport {
        rows,
        verdict,
        tolerance: BOUND_TOL,
        notes,
    })
}

/// Both sides of the pointwise weighted-modulus error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorEstimate {
    pub lhs: f64,
    pub rhs: f64,
    /// `S(μ_{x,α}²; x)` by operator evaluation.
    pub s_mu_squared: f64,
    /// `S(φ_x²; x)` from the closed form.
    pub s_phi_squared: f64,
    pub omega: f64,
}

impl ErrorEstimate {
    pub fn holds(&self) -> bool {
        self.lhs <= self.rhs
    }
}

/// `μ_{x,α}(y) = 1 + (x + |y - x|)^{2+α}`.
#[inline]
pub fn mu(x: f64, alpha: f64, y: f64) -> f64 {
    1.0 + (x + (y - x).abs()).powf(2.0 + alpha)
}

/// Evaluates `lhs = |S g(x) - g(x)|` and
/// `rhs = sqrt(S(μ²; x)) (1 + sqrt(S(φ²; x))/δ) ω_{ρ_α}(g; δ)`.
pub fn theorem33_bound<G: Fn(f64) -> f64>(
    g: G,
    spec: &OperatorSpec,
    wavelet: &Wavelet,
    x: f64,
    delta: f64,
    grid: &WeightedGrid,
) -> Result<ErrorEstimate> {
    if !(delta > 0.0) {
        return Err(Error::invalid(format!("delta must be > 0, got {delta}")));
    }
    let alpha = grid.alpha();
    let lhs = (wavelet_q_operator(&g, spec, wavelet, x)? - g(x)).abs();
    let s_mu_squared = wavelet_q_operator(|y| mu(x, alpha, y).powi(2), spec, wavelet, x)?;
    let s_phi_squared = second_central_moment(spec.degree(), spec.q(), x);
    let omega = weighted_modulus(&g, delta, grid, DEFAULT_MODULUS_STEPS)?;
    let rhs = s_mu_squared.sqrt() * (1.0 + s_phi_squared.sqrt() / delta) * omega;
    Ok(ErrorEstimate {
        lhs,
        rhs,
        s_mu_squared,
        s_phi_squared,
        omega,
    })
}

/// Both sides of the moment recursion bound for the q-Baskakov operator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecursionBound {
    pub lhs: f64,
    pub rhs: f64,
}

impl RecursionBound {
    pub fn holds(&self) -> bool {
        self.lhs <= self.rhs + EXACT_TOL
    }
}

/// `V_m e_i (x) <= x / ([m]^{i-1} (1+x)_q^m) + (2/q)^{i-1} x Γ_{m+1} e_{i-1} (x)`.
///
/// `Γ_{m+1}` is the degree `m + 1` basis with the degree `m` nodes
/// `[s]/(q^{s-1} [m])`, so on a monomial it is `([m+1]/[m])^{i-1} V_{m+1}`.
/// With plain `V_{m+1}` the bound fails, e.g. at `q = 1, m = 2, x = 1/2, i = 2`.
pub fn moment_recursion(i: u32, m: u32, q: QParam, x: f64, policy: &TruncationPolicy) -> Result<RecursionBound> {
    if i == 0 || m == 0 {
        return Err(Error::invalid(format!("moment recursion needs i, m >= 1, got i = {i}, m = {m}")));
    }
    let k = i as i32 - 1;
    let lhs = q_baskakov(|t| t.powi(i as i32), &OperatorSpec::q_baskakov(m, q)?.with_policy(*policy), x)?;
    let next = q_baskakov(|t| t.powi(k), &OperatorSpec::q_baskakov(m + 1, q)?.with_policy(*policy), x)?;
    let mq = q_integer(m as u64, q);
    let shifted = (q_integer(m as u64 + 1, q) / mq).powi(k) * next;
    let rhs = x / (mq.powi(k) * q_pochhammer(x, m as u64, q)?) + (2.0 / q.value()).powi(k) * x * shifted;
    Ok(RecursionBound { lhs, rhs })
}

/// Grid sup of `S(μ_{x,α}²; x) / ρ_α(x)`.
pub fn c_alpha(spec: &OperatorSpec, wavelet: &Wavelet, grid: &WeightedGrid) -> Result<f64> {
    let alpha = grid.alpha();
    let values: Vec<f64> = grid
        .points()
        .par_iter()
        .map(|&x| {
            wavelet_q_operator(|y| mu(x, alpha, y).powi(2), spec, wavelet, x).map(|v| v / grid.weight(x))
        })
        .collect::<Result<_>>()?;
    Ok(values.into_iter().fold(0.0, nan_max))
}

fn non_increasing_tail(values: &[f64]) -> bool {
    let tail = &values[values.len() / 2..];
    tail.windows(2).all(|w| w[1] <= w[0])
}

/// Rate experiment: `‖S g - g‖_{ρ_α}` against `3 C_α ω_{ρ_α}(g; δ_n)`.
///
/// `C_α` is computed from the operator for each `n` unless supplied.
/// The verdict is `Pass` iff the norm is below the bound on every row and
/// both columns are non-increasing over the second half of the rows.
pub fn rate_experiment<G: Fn(f64) -> f64 + Sync>(
    g: G,
    seq: &QSequence,
    settings: &HarnessSettings,
    n_list: &[u32],
    grid: &WeightedGrid,
    c_alpha_override: Option<f64>,
) -> Result<ConvergenceReport<RateRow>> {
    check_degrees(n_list)?;
    if let Some(c) = c_alpha_override {
        if !(c > 0.0) {
            return Err(Error::invalid(format!("C_alpha must be > 0, got {c}")));
        }
    }
    let points = grid.points();
    let rows: Vec<RateRow> = n_list
        .iter()
        .map(|&n| {
            let q = seq.q_at(n)?;
            let spec = spec_for(n, q, settings.policy)?;
            let errors: Vec<f64> = points
                .par_iter()
                .map(|&x| {
                    wavelet_q_operator(&g, &spec, &settings.wavelet, x)
                        .map(|s| (s - g(x)).abs() / grid.weight(x))
                })
                .collect::<Result<_>>()?;
            let norm = errors.into_iter().fold(0.0, nan_max);
            let delta_n = delta_for(n, q);
            let omega = weighted_modulus(&g, delta_n, grid, settings.modulus_steps)?;
            let c = match c_alpha_override {
                Some(c) => c,
                None => c_alpha(&spec, &settings.wavelet, grid)?,
            };
            Ok(RateRow {
                n,
                q_n: q.value(),
                norm,
                delta_n,
                omega_at_delta: omega,
                c_alpha: c,
                bound: 3.0 * c * omega,
            })
        })
        .collect::<Result<_>>()?;

    let mut notes = vec![format!(
        "sequence {}; grid [0, {}] with {} points, alpha = {}",
        seq.description(),
        grid.x_max(),
        grid.n_points(),
        grid.alpha()
    )];
    let mut verdict = Verdict::Pass;
    if let Some(r) = rows.iter().find(|r| !(r.norm <= r.bound)) {
        notes.push(format!("first violation at n = {}: norm = {:e} > bound = {:e}", r.n, r.norm, r.bound));
        verdict = Verdict::Fail;
    }
    let norms: Vec<f64> = rows.iter().map(|r| r.norm).collect();
    let bounds: Vec<f64> = rows.iter().map(|r| r.bound).collect();
    if !non_increasing_tail(&norms) || !non_increasing_tail(&bounds) {
        notes.push("norm or bound column increases in the tail".to_string());
        verdict = Verdict::Fail;
    }
    Ok(ConvergenceReport {
        rows,
        verdict,
        tolerance: 0.0,
        notes,
    })
}
