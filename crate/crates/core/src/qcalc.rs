//! q-calculus primitives: q-integers, q-factorials, q-binomial coefficients,
//! q-Pochhammer products, the q-derivative and the Jackson q-integral.
//!
//! The classical branch `q = 1` is implemented explicitly everywhere instead of
//! being reached as a limit, so no primitive ever evaluates `0/0`.

use crate::error::{Error, Result};

/// Which side of 1 a deformation parameter lies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    SubUnit,
    Unit,
    SuperUnit,
}

/// A validated deformation parameter `q > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QParam {
    q: f64,
    regime: Regime,
}

impl QParam {
    pub fn new(q: f64) -> Result<Self> {
        if !q.is_finite() || q <= 0.0 {
            return Err(Error::invalid(format!("q must be finite and > 0, got {q}")));
        }
        let regime = if q < 1.0 {
            Regime::SubUnit
        } else if q > 1.0 {
            Regime::SuperUnit
        } else {
            Regime::Unit
        };
        Ok(Self { q, regime })
    }

    /// The classical parameter `q = 1`.
    pub fn unit() -> Self {
        Self {
            q: 1.0,
            regime: Regime::Unit,
        }
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.q
    }

    #[inline]
    pub fn regime(self) -> Regime {
        self.regime
    }

    #[inline]
    pub fn is_unit(self) -> bool {
        self.regime == Regime::Unit
    }

    /// Operators are only defined for `0 < q <= 1`.
    pub fn require_at_most_one(self, what: &str) -> Result<()> {
        if self.regime == Regime::SuperUnit {
            return Err(Error::invalid(format!("{what} requires 0 < q <= 1, got q = {}", self.q)));
        }
        Ok(())
    }

    /// q-densities and q-statistical limits are only defined for `q >= 1`.
    pub fn require_at_least_one(self, what: &str) -> Result<()> {
        if self.regime == Regime::SubUnit {
            return Err(Error::invalid(format!("{what} requires q >= 1, got q = {}", self.q)));
        }
        Ok(())
    }
}

/// Cut-off contract for every infinite series and Jackson sum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationPolicy {
    tail_tol: f64,
    max_terms: usize,
}

impl TruncationPolicy {
    pub const DEFAULT_TAIL_TOL: f64 = 1e-12;
    pub const DEFAULT_MAX_TERMS: usize = 100_000;

    pub fn new(tail_tol: f64, max_terms: usize) -> Result<Self> {
        if !(tail_tol > 0.0 && tail_tol < 1.0) {
            return Err(Error::invalid(format!("tail_tol must lie in (0, 1), got {tail_tol}")));
        }
        if max_terms == 0 {
            return Err(Error::invalid("max_terms must be at least 1"));
        }
        Ok(Self { tail_tol, max_terms })
    }

    #[inline]
    pub fn tail_tol(&self) -> f64 {
        self.tail_tol
    }

    #[inline]
    pub fn max_terms(&self) -> usize {
        self.max_terms
    }
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        Self {
            tail_tol: Self::DEFAULT_TAIL_TOL,
            max_terms: Self::DEFAULT_MAX_TERMS,
        }
    }
}

/// A closed interval `0 <= lower <= upper`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QInterval {
    lower: f64,
    upper: f64,
}

impl QInterval {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if !(lower.is_finite() && upper.is_finite()) || lower < 0.0 || upper < lower {
            return Err(Error::invalid(format!(
                "interval requires 0 <= lower <= upper, got [{lower}, {upper}]"
            )));
        }
        Ok(Self { lower, upper })
    }

    #[inline]
    pub fn lower(&self) -> f64 {
        self.lower
    }

    #[inline]
    pub fn upper(&self) -> f64 {
        self.upper
    }

    #[inline]
    pub fn length(&self) -> f64 {
        self.upper - self.lower
    }
}

/// The q-integer `[m]_q = (1 - q^m) / (1 - q)`, or `m` when `q = 1`.
pub fn q_integer(m: u64, q: QParam) -> f64 {
    if m == 0 {
        return 0.0;
    }
    if q.is_unit() {
        return m as f64;
    }
    let q = q.value();
    // expm1/ln keep full precision when q is within a few ulps of 1.
    -(m as f64 * q.ln()).exp_m1() / (1.0 - q)
}

/// `[m]_q! = [m]_q [m-1]_q ... [1]_q`, with `[0]_q! = 1`.
pub fn q_factorial(m: u64, q: QParam) -> Result<f64> {
    let mut acc = 1.0_f64;
    for i in 1..=m {
        acc *= q_integer(i, q);
        if !acc.is_finite() {
            return Err(Error::Overflow("q_factorial"));
        }
    }
    Ok(acc)
}

/// Gaussian binomial coefficient via the product form
/// `prod_{i=1..k} [n-k+i]_q / [i]_q`. Total: returns 0 when `k > n`.
pub fn q_binomial(n: u64, k: u64, q: QParam) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (1..=k).fold(1.0, |acc, i| acc * q_integer(n - k + i, q) / q_integer(i, q))
}

/// Gaussian binomial coefficient by its factorial definition.
pub fn q_binomial_strict(n: u64, k: u64, q: QParam) -> Result<f64> {
    if k > n {
        return Err(Error::invalid(format!("q-binomial requires k <= n, got n = {n}, k = {k}")));
    }
    Ok(q_factorial(n, q)? / (q_factorial(k, q)? * q_factorial(n - k, q)?))
}

/// Natural log of the q-binomial coefficient, used by the operator basis
/// where the top index grows without bound.
pub fn ln_q_binomial(n: u64, k: u64, q: QParam) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    let k = k.min(n - k);
    (1..=k).map(|i| q_integer(n - k + i, q).ln() - q_integer(i, q).ln()).sum()
}

/// The q-Pochhammer product `(1+x)_q^m = (1+x)(1+qx)...(1+q^{m-1}x)`.
pub fn q_pochhammer(x: f64, m: u64, q: QParam) -> Result<f64> {
    let q = q.value();
    let mut acc = 1.0_f64;
    let mut qi = 1.0_f64;
    for _ in 0..m {
        acc *= 1.0 + qi * x;
        qi *= q;
        if !acc.is_finite() {
            return Err(Error::Overflow("q_pochhammer"));
        }
    }
    Ok(acc)
}

/// `ln (1+x)_q^m` for `x >= 0`, summed factor by factor with `ln_1p`.
pub fn ln_q_pochhammer(x: f64, m: u64, q: QParam) -> f64 {
    let q = q.value();
    let mut acc = 0.0;
    let mut qi = 1.0_f64;
    for _ in 0..m {
        acc += (qi * x).ln_1p();
        qi *= q;
    }
    acc
}

/// Log-domain evaluation of `(1+x)_q^m`, exponentiated at the end.
///
/// For `x < 0` some factors may be non-positive; the direct product is used
/// there instead.
pub fn q_pochhammer_limit(x: f64, m: u64, q: QParam) -> f64 {
    if x < 0.0 {
        let qv = q.value();
        let mut acc = 1.0;
        let mut qi = 1.0;
        for _ in 0..m {
            acc *= 1.0 + qi * x;
            qi *= qv;
        }
        return acc;
    }
    ln_q_pochhammer(x, m, q).exp()
}

/// Right-hand side of the Gauss binomial formula,
/// `sum_k [m choose k]_q q^{k(k-1)/2} a^k x^{m-k}`, which equals
/// `(x+a)_q^m = prod_{i<m} (x + q^i a)`.
pub fn gauss_binomial_expand(x: f64, a: f64, m: u64, q: QParam) -> f64 {
    let qv = q.value();
    (0..=m)
        .map(|k| {
            let tri = (k * k.saturating_sub(1) / 2) as i32;
            q_binomial(m, k, q) * qv.powi(tri) * a.powi(k as i32) * x.powi((m - k) as i32)
        })
        .sum()
}

/// Step of the central difference used for the classical derivative at `q = 1`.
pub const CLASSICAL_DERIVATIVE_STEP: f64 = 1e-6;

/// The q-difference quotient `(g(x) - g(qx)) / ((1-q)x)`.
///
/// At `q = 1` this returns a central finite difference with step
/// [`CLASSICAL_DERIVATIVE_STEP`]. `x = 0` is rejected: the value there is
/// `g'(0)`, which cannot be recovered from samples without guessing.
pub fn q_derivative<F: Fn(f64) -> f64>(f: F, x: f64, q: QParam) -> Result<f64> {
    if x == 0.0 {
        return Err(Error::UndefinedAtZero("q_derivative"));
    }
    if q.is_unit() {
        let h = CLASSICAL_DERIVATIVE_STEP;
        return Ok((f(x + h) - f(x - h)) / (2.0 * h));
    }
    let qv = q.value();
    Ok((f(x) - f(qv * x)) / ((1.0 - qv) * x))
}

/// Past this many estimated lattice terms the Jackson sum switches from
/// direct summation to Euler–Maclaurin summation over the lattice index.
pub const DIRECT_SUM_LIMIT: usize = 4096;

/// Consecutive below-tolerance terms required before the direct sum stops.
const STOP_STREAK: usize = 3;

/// Jackson integral `int_0^b f d_q t = (1-q) b sum_{n>=0} q^n f(q^n b)`.
///
/// At `q = 1` the classical integral is computed by adaptive Simpson
/// quadrature with absolute tolerance `tail_tol * max(1, |I|)`.
///
/// For `q < 1` the lattice sum is added term by term until the last
/// [`STOP_STREAK`] terms are each below `tail_tol * (|partial sum| + 1e-300)`.
/// The remaining tail is then closed with the geometric series implied by the
/// ratio of the last two terms. When the lattice is too dense for direct
/// summation (q close to 1) the sum is evaluated by Euler–Maclaurin instead.
pub fn jackson_integral_0b<F: Fn(f64) -> f64>(
    f: F,
    b: f64,
    q: QParam,
    policy: &TruncationPolicy,
) -> Result<f64> {
    if !b.is_finite() || b < 0.0 {
        return Err(Error::invalid(format!("Jackson integral upper limit must be >= 0, got {b}")));
    }
    q.require_at_most_one("Jackson integral")?;
    if b == 0.0 {
        return Ok(0.0);
    }
    if q.is_unit() {
        let v = classical_integral(&f, 0.0, b, policy.tail_tol());
        return finite_or_nonconvergent(v, "classical quadrature", 0);
    }

    let qv = q.value();
    let estimated = (policy.tail_tol().ln() / qv.ln()).ceil();
    if estimated > DIRECT_SUM_LIMIT as f64 {
        return euler_maclaurin_lattice(&f, b, qv, policy);
    }
    direct_lattice_sum(&f, b, qv, policy)
}

fn direct_lattice_sum<F: Fn(f64) -> f64>(
    f: &F,
    b: f64,
    q: f64,
    policy: &TruncationPolicy,
) -> Result<f64> {
    let scale = (1.0 - q) * b;
    let tol = policy.tail_tol();
    let mut sum = NeumaierSum::default();
    let mut qn = 1.0_f64;
    let mut prev = f64::NAN;
    let mut streak = 0;
    for n in 0..policy.max_terms() {
        let term = scale * qn * f(qn * b);
        if !term.is_finite() {
            return Err(Error::NonConvergent {
                what: "Jackson integral",
                terms: n + 1,
            });
        }
        sum.add(term);
        if term.abs() <= tol * (sum.value().abs() + 1e-300) {
            streak += 1;
        } else {
            streak = 0;
        }
        if streak >= STOP_STREAK {
            let ratio = term / prev;
            if ratio > 0.0 && ratio < 1.0 {
                sum.add(term * ratio / (1.0 - ratio));
            }
            return Ok(sum.value());
        }
        prev = term;
        qn *= q;
    }
    Err(Error::NonConvergent {
        what: "Jackson integral",
        terms: policy.max_terms(),
    })
}

/// Number of forward differences used to recover lattice derivatives.
const EM_DIFFERENCES: usize = 10;

/// `sum_{n>=0} F(n)` with `F(u) = (1-q) b q^u f(q^u b)` by Euler–Maclaurin:
/// the integral term is `(1-q)/ln(1/q) * int_0^b f`, and the odd derivatives
/// of `F` at 0 come from forward differences along the lattice.
fn euler_maclaurin_lattice<F: Fn(f64) -> f64>(
    f: &F,
    b: f64,
    q: f64,
    policy: &TruncationPolicy,
) -> Result<f64> {
    let scale = (1.0 - q) * b;
    let samples: Vec<f64> = (0..=EM_DIFFERENCES)
        .map(|n| {
            let qn = q.powi(n as i32);
            scale * qn * f(qn * b)
        })
        .collect();
    let integral = classical_integral(f, 0.0, b, policy.tail_tol());
    let integral = finite_or_nonconvergent(integral, "Jackson integral", 0)?;
    let head = (1.0 - q) / (-(q.ln())) * integral;

    let diffs = forward_differences(&samples);
    let d1 = derivative_from_differences(&diffs, 1);
    let d3 = derivative_from_differences(&diffs, 3);
    let d5 = derivative_from_differences(&diffs, 5);
    // Bernoulli numbers B2 = 1/6, B4 = -1/30, B6 = 1/42.
    let value = head + samples[0] / 2.0 - d1 / 12.0 + d3 / 720.0 - d5 / 30240.0;
    finite_or_nonconvergent(value, "Jackson integral", EM_DIFFERENCES + 1)
}

/// `diffs[k] = Δ^k F(0)` for `k = 0..samples.len()`.
fn forward_differences(samples: &[f64]) -> Vec<f64> {
    let mut row = samples.to_vec();
    let mut out = Vec::with_capacity(samples.len());
    while !row.is_empty() {
        out.push(row[0]);
        row = row.windows(2).map(|w| w[1] - w[0]).collect();
    }
    out
}

/// Applies `D^p = (ln(1 + Δ))^p`, truncated at the available differences.
fn derivative_from_differences(diffs: &[f64], p: usize) -> f64 {
    let len = diffs.len();
    // ln(1+x) = x - x^2/2 + x^3/3 - ...
    let log_series: Vec<f64> = (0..len)
        .map(|k| {
            if k == 0 {
                0.0
            } else if k % 2 == 1 {
                1.0 / k as f64
            } else {
                -1.0 / k as f64
            }
        })
        .collect();
    let mut power = vec![0.0; len];
    power[0] = 1.0;
    for _ in 0..p {
        let mut next = vec![0.0; len];
        for (i, &a) in power.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            for (j, &c) in log_series.iter().enumerate().skip(1) {
                if i + j < len {
                    next[i + j] += a * c;
                }
            }
        }
        power = next;
    }
    power.iter().zip(diffs).map(|(c, d)| c * d).sum()
}

/// Jackson integral over a cell, `int_0^upper - int_0^lower`.
pub fn jackson_integral<F: Fn(f64) -> f64>(
    f: F,
    cell: QInterval,
    q: QParam,
    policy: &TruncationPolicy,
) -> Result<f64> {
    q.require_at_most_one("Jackson integral")?;
    if q.is_unit() {
        let v = classical_integral(&f, cell.lower(), cell.upper(), policy.tail_tol());
        return finite_or_nonconvergent(v, "classical quadrature", 0);
    }
    let upper = jackson_integral_0b(&f, cell.upper(), q, policy)?;
    let lower = jackson_integral_0b(&f, cell.lower(), q, policy)?;
    Ok(upper - lower)
}

fn finite_or_nonconvergent(v: f64, what: &'static str, terms: usize) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonConvergent { what, terms })
    }
}

const SIMPSON_PANELS: usize = 8;
const SIMPSON_MAX_DEPTH: u32 = 40;

/// Adaptive Simpson quadrature on `[a, b]` with Richardson correction.
///
/// The interval is first split into eight panels so that symmetric
/// integrands cannot satisfy the error test on the first bisection.
pub fn classical_integral<F: Fn(f64) -> f64 + ?Sized>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let h = (b - a) / SIMPSON_PANELS as f64;
    let panels: Vec<(f64, f64, f64, f64, f64, f64)> = (0..SIMPSON_PANELS)
        .map(|i| {
            let lo = a + h * i as f64;
            let hi = if i + 1 == SIMPSON_PANELS { b } else { lo + h };
            let mid = 0.5 * (lo + hi);
            let (flo, fmid, fhi) = (f(lo), f(mid), f(hi));
            (lo, hi, flo, fmid, fhi, (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi))
        })
        .collect();
    let rough: f64 = panels.iter().map(|p| p.5).sum();
    let abs_tol = tol * rough.abs().max(1.0) / SIMPSON_PANELS as f64;
    panels
        .into_iter()
        .map(|(lo, hi, flo, fmid, fhi, whole)| {
            simpson_step(f, lo, hi, flo, fmid, fhi, whole, abs_tol, SIMPSON_MAX_DEPTH)
        })
        .sum()
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64 + ?Sized>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol || !delta.is_finite() {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

/// Compensated (Neumaier) running sum.
#[derive(Debug, Default, Clone, Copy)]
pub(crate) struct NeumaierSum {
    sum: f64,
    comp: f64,
}

impl NeumaierSum {
    #[inline]
    pub(crate) fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub(crate) fn value(&self) -> f64 {
        self.sum + self.comp
    }
}
