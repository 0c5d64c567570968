//! Positive linear approximation operators.
//!
//! Classical references (Bernstein, Bernstein–Kantorovich, Baskakov,
//! Baskakov–Kantorovich) are evaluated with ordinary binomial weights and
//! Riemann integrals. The q-family shares one basis generator,
//! [`q_basis_terms`], which produces the weights
//!
//! ```text
//! B_{m,s,q}(x) = [m+s-1 choose s]_q q^{s(s-1)/2} x^s / (1+x)_q^{m+s}
//! ```
//!
//! together with the sampling node `[s]_q / (q^{s-1} [m]_q)` and the
//! Kantorovich cell `[q[s]_q/[m]_q, [s+1]_q/[m]_q]` of each index.
//!
//! All series are truncated by the partition-of-unity criterion: summation
//! stops once the accumulated weight reaches `1 - tail_tol`, or once the
//! geometric bound on the remaining weights drops below `tail_tol` (the ratio
//! of consecutive weights is non-increasing in `s` for every `0 < q <= 1`).

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::qcalc::{
    classical_integral, jackson_integral, jackson_integral_0b, ln_q_pochhammer, q_integer,
    NeumaierSum, QInterval, QParam, Regime, TruncationPolicy,
};

/// Tolerance of the Simpson rule used by the classical Kantorovich cells.
pub const CLASSICAL_CELL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Bernstein,
    BernsteinKantorovich,
    Baskakov,
    BaskakovKantorovich,
    QBaskakov,
    QBaskakovKantorovich,
    WaveletQBaskakovKantorovich,
}

impl Family {
    fn is_q_family(self) -> bool {
        matches!(
            self,
            Family::QBaskakov | Family::QBaskakovKantorovich | Family::WaveletQBaskakovKantorovich
        )
    }
}

/// One operator instance: family, degree `m >= 1`, deformation `q` and the
/// truncation policy used for its series and Jackson integrals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatorSpec {
    family: Family,
    degree: u32,
    q: QParam,
    policy: TruncationPolicy,
}

impl OperatorSpec {
    pub fn new(family: Family, degree: u32, q: QParam, policy: TruncationPolicy) -> Result<Self> {
        if degree == 0 {
            return Err(Error::invalid("operator degree m must be >= 1"));
        }
        if family.is_q_family() && q.regime() == Regime::SuperUnit {
            return Err(Error::invalid(format!(
                "{family:?} requires 0 < q <= 1, got q = {}",
                q.value()
            )));
        }
        Ok(Self {
            family,
            degree,
            q,
            policy,
        })
    }

    pub fn q_baskakov(degree: u32, q: QParam) -> Result<Self> {
        Self::new(Family::QBaskakov, degree, q, TruncationPolicy::default())
    }

    pub fn q_baskakov_kantorovich(degree: u32, q: QParam) -> Result<Self> {
        Self::new(Family::QBaskakovKantorovich, degree, q, TruncationPolicy::default())
    }

    pub fn wavelet(degree: u32, q: QParam) -> Result<Self> {
        Self::new(Family::WaveletQBaskakovKantorovich, degree, q, TruncationPolicy::default())
    }

    pub fn with_policy(mut self, policy: TruncationPolicy) -> Self {
        self.policy = policy;
        self
    }

    pub fn with_family(mut self, family: Family) -> Result<Self> {
        Self::new(family, self.degree, self.q, self.policy).map(|s| {
            self = s;
            self
        })
    }

    #[inline]
    pub fn family(&self) -> Family {
        self.family
    }

    #[inline]
    pub fn degree(&self) -> u32 {
        self.degree
    }

    #[inline]
    pub fn q(&self) -> QParam {
        self.q
    }

    #[inline]
    pub fn policy(&self) -> &TruncationPolicy {
        &self.policy
    }

    fn expect(&self, family: Family) -> Result<()> {
        if self.family != family {
            return Err(Error::invalid(format!(
                "operator spec has family {:?}, expected {family:?}",
                self.family
            )));
        }
        Ok(())
    }
}

/// One index of the q-Baskakov basis at a fixed `x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasisTerm {
    pub index: u64,
    pub weight: f64,
    pub node: f64,
    pub cell: QInterval,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WaveletKind {
    /// Indicator of `[0, 1]`; reproduces constants only.
    Haar,
    /// Polynomial kernel on `[0, 1]` whose first `k` Jackson q-moments vanish
    /// and whose zeroth moment is 1, so it reproduces polynomials of degree `<= k`.
    MomentPolynomial,
}

/// A compactly supported averaging kernel `Ψ` with `supp Ψ ⊂ [0, ξ]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Wavelet {
    kind: WaveletKind,
    support: f64,
    vanishing_moments: usize,
}

/// Highest vanishing-moment order accepted for [`WaveletKind::MomentPolynomial`];
/// beyond this the q-Hilbert moment matrix becomes too ill-conditioned.
pub const MAX_VANISHING_MOMENTS: usize = 4;

impl Wavelet {
    pub fn haar() -> Self {
        Self {
            kind: WaveletKind::Haar,
            support: 1.0,
            vanishing_moments: 0,
        }
    }

    pub fn moment_polynomial(vanishing_moments: usize) -> Result<Self> {
        if vanishing_moments > MAX_VANISHING_MOMENTS {
            return Err(Error::invalid(format!(
                "at most {MAX_VANISHING_MOMENTS} vanishing moments are supported, got {vanishing_moments}"
            )));
        }
        Ok(Self {
            kind: WaveletKind::MomentPolynomial,
            support: 1.0,
            vanishing_moments,
        })
    }

    /// The kernel used by the moment, Korovkin, rate and figure pipelines:
    /// two vanishing moments, so `e0`, `e1` and `e2` are carried over from the
    /// q-Baskakov operator exactly.
    pub fn moment_exact() -> Self {
        Self {
            kind: WaveletKind::MomentPolynomial,
            support: 1.0,
            vanishing_moments: 2,
        }
    }

    #[inline]
    pub fn kind(&self) -> WaveletKind {
        self.kind
    }

    #[inline]
    pub fn support(&self) -> f64 {
        self.support
    }

    #[inline]
    pub fn vanishing_moments(&self) -> usize {
        self.vanishing_moments
    }

    /// Materialises `Ψ` for a given `q`; the moment kernel's coefficients
    /// depend on `q` because its moments are Jackson q-integrals.
    pub fn kernel(&self, q: QParam) -> Result<Kernel> {
        match self.kind {
            WaveletKind::Haar => Ok(Kernel {
                support: self.support,
                coefficients: vec![1.0],
            }),
            WaveletKind::MomentPolynomial => Ok(Kernel {
                support: self.support,
                coefficients: moment_kernel_coefficients(self.vanishing_moments, q)?,
            }),
        }
    }
}

/// A polynomial kernel on `[0, support]`, zero elsewhere.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    support: f64,
    coefficients: Vec<f64>,
}

impl Kernel {
    #[inline]
    pub fn eval(&self, t: f64) -> f64 {
        if !(0.0..=self.support).contains(&t) {
            return 0.0;
        }
        self.coefficients.iter().rev().fold(0.0, |acc, &c| acc * t + c)
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn support(&self) -> f64 {
        self.support
    }
}

/// Solves `sum_j c_j M_{i+j} = [i == 0]` for `i = 0..=k`, where
/// `M_n = int_0^1 t^n d_q t = 1/[n+1]_q`.
fn moment_kernel_coefficients(k: usize, q: QParam) -> Result<Vec<f64>> {
    let n = k + 1;
    let moment = |p: usize| 1.0 / q_integer(p as u64 + 1, q);
    let mut a: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut row: Vec<f64> = (0..n).map(|j| moment(i + j)).collect();
            row.push(if i == 0 { 1.0 } else { 0.0 });
            row
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&r, &s| a[r][col].abs().total_cmp(&a[s][col].abs()))
            .unwrap_or(col);
        a.swap(col, pivot);
        let p = a[col][col];
        if p.abs() < 1e-300 {
            return Err(Error::invalid("singular moment system for the wavelet kernel"));
        }
        let pivot_row = a[col].clone();
        for (r, row) in a.iter_mut().enumerate() {
            if r != col {
                let factor = row[col] / p;
                for (v, pv) in row.iter_mut().zip(&pivot_row).skip(col) {
                    *v -= factor * pv;
                }
            }
        }
    }
    Ok((0..n).map(|i| a[i][n] / a[i][i]).collect())
}

fn check_x(x: f64) -> Result<()> {
    if !x.is_finite() || x < 0.0 {
        return Err(Error::invalid(format!("x must be finite and >= 0, got {x}")));
    }
    Ok(())
}

fn check_unit_interval(x: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::invalid(format!("x must lie in [0, 1], got {x}")));
    }
    Ok(())
}

/// `k ln y`, with `0 ln 0 = 0`.
#[inline]
fn xlogy(k: f64, y: f64) -> f64 {
    if k == 0.0 {
        0.0
    } else {
        k * y.ln()
    }
}

/// Series cap from the truncation design: `max(1000, 50 m (1 + ceil x))`.
pub fn series_cap(m: u32, x: f64) -> usize {
    let raw = 50.0 * m as f64 * (1.0 + x.ceil());
    if raw.is_finite() && raw < usize::MAX as f64 {
        (raw as usize).max(1000)
    } else {
        usize::MAX
    }
}

/// Tracks accumulated weight and decides when a nonnegative series with
/// non-increasing ratios may stop.
struct WeightTail {
    tol: f64,
    cum: NeumaierSum,
    prev: f64,
}

impl WeightTail {
    fn new(tol: f64) -> Self {
        Self {
            tol,
            cum: NeumaierSum::default(),
            prev: f64::NAN,
        }
    }

    /// Tracks `w (1 + node^2)` so the stopping rule bounds the tail for any
    /// `g` of quadratic growth, not only the mass.
    fn push(&mut self, w: f64, node: f64) -> bool {
        let v = if w == 0.0 { 0.0 } else { w * (1.0 + node * node) };
        self.cum.add(v);
        let total = self.cum.value();
        let prev = std::mem::replace(&mut self.prev, v);
        if total <= 0.0 {
            return false;
        }
        if v == 0.0 {
            return prev == 0.0;
        }
        let ratio = v / prev;
        ratio < 1.0 && v * ratio / (1.0 - ratio) <= self.tol * total
    }
}

/// Classical Bernstein polynomial `sum C(m,s) x^s (1-x)^{m-s} g(s/m)`.
pub fn bernstein<G: Fn(f64) -> f64>(g: G, m: u32, x: f64) -> Result<f64> {
    check_unit_interval(x)?;
    if m == 0 {
        return Err(Error::invalid("degree m must be >= 1"));
    }
    Ok(bernstein_weights(m, x)
        .enumerate()
        .map(|(s, w)| w * g(s as f64 / m as f64))
        .sum())
}

fn bernstein_weights(m: u32, x: f64) -> impl Iterator<Item = f64> {
    let mf = m as f64;
    let mut ln_c = 0.0;
    (0..=m).map(move |s| {
        let sf = s as f64;
        if s > 0 {
            ln_c += ((mf - sf + 1.0) / sf).ln();
        }
        (ln_c + xlogy(sf, x) + xlogy(mf - sf, 1.0 - x)).exp()
    })
}

/// Bernstein–Kantorovich operator with cells `[s/(m+1), (s+1)/(m+1)]`.
pub fn bernstein_kantorovich<G: Fn(f64) -> f64>(g: G, m: u32, x: f64) -> Result<f64> {
    check_unit_interval(x)?;
    if m == 0 {
        return Err(Error::invalid("degree m must be >= 1"));
    }
    let h = 1.0 / (m as f64 + 1.0);
    let sum: f64 = bernstein_weights(m, x)
        .enumerate()
        .filter(|(_, w)| *w > 0.0)
        .map(|(s, w)| {
            let lo = s as f64 * h;
            w * classical_integral(&g, lo, lo + h, CLASSICAL_CELL_TOL)
        })
        .sum();
    Ok((m as f64 + 1.0) * sum)
}

/// Negative-binomial weights `C(m+s-1, s) x^s / (1+x)^{m+s}`, truncated.
fn classical_baskakov_weights(m: u32, x: f64, policy: &TruncationPolicy) -> Result<Vec<f64>> {
    check_x(x)?;
    if m == 0 {
        return Err(Error::invalid("degree m must be >= 1"));
    }
    if x == 0.0 {
        return Ok(vec![1.0]);
    }
    let mf = m as f64;
    let ln_x = x.ln();
    let ln_1px = x.ln_1p();
    let cap = series_cap(m, x).min(policy.max_terms());
    let mut tail = WeightTail::new(policy.tail_tol());
    // ln w_s accumulated from the O(1) log-ratios w_s / w_{s-1}
    let mut ln_w = NeumaierSum::default();
    ln_w.add(-mf * ln_1px);
    let mut out = Vec::new();
    for s in 0..cap {
        let sf = s as f64;
        if s > 0 {
            ln_w.add(((mf + sf - 1.0) / sf).ln() + ln_x - ln_1px);
        }
        let w = ln_w.value().exp();
        out.push(w);
        if tail.push(w, sf / mf) {
            return Ok(out);
        }
    }
    Err(Error::NonConvergent {
        what: "Baskakov series",
        terms: cap,
    })
}

/// Classical Baskakov operator `sum C(m+s-1,s) x^s/(1+x)^{m+s} g(s/m)`.
pub fn baskakov<G: Fn(f64) -> f64>(g: G, m: u32, x: f64, policy: &TruncationPolicy) -> Result<f64> {
    let weights = classical_baskakov_weights(m, x, policy)?;
    Ok(weights
        .iter()
        .enumerate()
        .map(|(s, w)| w * g(s as f64 / m as f64))
        .sum())
}

/// Classical Baskakov–Kantorovich operator with cells `[s/m, (s+1)/m]`.
pub fn baskakov_kantorovich<G: Fn(f64) -> f64>(
    g: G,
    m: u32,
    x: f64,
    policy: &TruncationPolicy,
) -> Result<f64> {
    let weights = classical_baskakov_weights(m, x, policy)?;
    let h = 1.0 / m as f64;
    let sum: f64 = weights
        .iter()
        .enumerate()
        .map(|(s, w)| {
            let lo = s as f64 * h;
            w * classical_integral(&g, lo, lo + h, CLASSICAL_CELL_TOL)
        })
        .sum();
    Ok(m as f64 * sum)
}

/// The q-Baskakov basis at `x`, truncated by the partition-of-unity rule.
pub fn q_basis_terms(m: u32, x: f64, q: QParam, policy: &TruncationPolicy) -> Result<Vec<BasisTerm>> {
    check_x(x)?;
    if m == 0 {
        return Err(Error::invalid("degree m must be >= 1"));
    }
    q.require_at_most_one("q-Baskakov basis")?;
    let qv = q.value();
    let ln_q = qv.ln();
    let m_int = q_integer(m as u64, q);
    let term = |s: u64, weight: f64| -> Result<BasisTerm> {
        let node = if s == 0 {
            0.0
        } else {
            q_integer(s, q) / ((s as f64 - 1.0) * ln_q).exp() / m_int
        };
        let cell = QInterval::new(qv * q_integer(s, q) / m_int, q_integer(s + 1, q) / m_int)?;
        Ok(BasisTerm {
            index: s,
            weight,
            node,
            cell,
        })
    };

    if x == 0.0 {
        return Ok(vec![term(0, 1.0)?]);
    }

    let ln_x = x.ln();
    let cap = series_cap(m, x).min(policy.max_terms());
    let mut tail = WeightTail::new(policy.tail_tol());
    // ln w_s accumulated from the O(1) log-ratios w_s / w_{s-1}
    let mut ln_w = NeumaierSum::default();
    ln_w.add(-ln_q_pochhammer(x, m as u64, q));
    let mut out = Vec::new();
    for s in 0..cap as u64 {
        if s > 0 {
            let top = m as u64 + s - 1;
            ln_w.add(
                q_integer(top, q).ln() - q_integer(s, q).ln() + ln_x + (s - 1) as f64 * ln_q
                    - ((top as f64 * ln_q).exp() * x).ln_1p(),
            );
        }
        let w = ln_w.value().exp();
        let t = term(s, w)?;
        let node = t.node;
        out.push(t);
        if tail.push(w, node) {
            return Ok(out);
        }
    }
    Err(Error::NonConvergent {
        what: "q-Baskakov series",
        terms: cap,
    })
}

/// The q-Baskakov operator `V`: `sum_s B_{m,s,q}(x) g(node_s)`.
pub fn q_baskakov<G: Fn(f64) -> f64>(g: G, spec: &OperatorSpec, x: f64) -> Result<f64> {
    spec.expect(Family::QBaskakov)?;
    q_baskakov_raw(&g, spec.degree, spec.q, spec.policy(), x)
}

fn q_baskakov_raw<G: Fn(f64) -> f64>(
    g: &G,
    m: u32,
    q: QParam,
    policy: &TruncationPolicy,
    x: f64,
) -> Result<f64> {
    let terms = q_basis_terms(m, x, q, policy)?;
    let mut sum = NeumaierSum::default();
    for t in terms.iter().filter(|t| t.weight > 0.0) {
        sum.add(t.weight * g(t.node));
    }
    Ok(sum.value())
}

/// The q-Baskakov–Kantorovich operator
/// `[m]_q sum_s q^{s-1} B_{m,s,q}(x) int_{cell_s} g(q^{1-s} t) d_q t`.
pub fn q_baskakov_kantorovich<G: Fn(f64) -> f64>(g: G, spec: &OperatorSpec, x: f64) -> Result<f64> {
    spec.expect(Family::QBaskakovKantorovich)?;
    let q = spec.q;
    let ln_q = q.value().ln();
    let terms = q_basis_terms(spec.degree, x, q, spec.policy())?;
    let mut sum = NeumaierSum::default();
    for t in terms.iter().filter(|t| t.weight > 0.0) {
        let shift = (1.0 - t.index as f64) * ln_q;
        let scale = shift.exp();
        let cell = jackson_integral(|u| g(scale * u), t.cell, q, spec.policy())?;
        sum.add((-shift).exp() * t.weight * cell);
    }
    Ok(q_integer(spec.degree as u64, q) * sum.value())
}

/// The wavelet-aided Kantorovich q-Baskakov operator in its bounded form
/// `sum_s B_{m,s,q}(x) int_0^ξ g((t + [s]_q)/(q^{s-1}[m]_q)) Ψ(t) d_q t`.
pub fn wavelet_q_operator<G: Fn(f64) -> f64>(
    g: G,
    spec: &OperatorSpec,
    wavelet: &Wavelet,
    x: f64,
) -> Result<f64> {
    spec.expect(Family::WaveletQBaskakovKantorovich)?;
    let q = spec.q;
    let kernel = wavelet.kernel(q)?;
    let ln_q = q.value().ln();
    let m_int = q_integer(spec.degree as u64, q);
    let terms = q_basis_terms(spec.degree, x, q, spec.policy())?;
    let mut sum = NeumaierSum::default();
    for t in terms.iter().filter(|t| t.weight > 0.0) {
        let s_int = q_integer(t.index, q);
        let denom = ((t.index as f64 - 1.0) * ln_q).exp() * m_int;
        let inner = jackson_integral_0b(
            |u| g((u + s_int) / denom) * kernel.eval(u),
            kernel.support(),
            q,
            spec.policy(),
        )?;
        sum.add(t.weight * inner);
    }
    Ok(sum.value())
}

/// Dispatches on `spec.family`; `wavelet` is used only by the wavelet family.
pub fn evaluate<G: Fn(f64) -> f64>(g: G, spec: &OperatorSpec, wavelet: &Wavelet, x: f64) -> Result<f64> {
    let m = spec.degree;
    match spec.family {
        Family::Bernstein => bernstein(g, m, x),
        Family::BernsteinKantorovich => bernstein_kantorovich(g, m, x),
        Family::Baskakov => baskakov(g, m, x, spec.policy()),
        Family::BaskakovKantorovich => baskakov_kantorovich(g, m, x, spec.policy()),
        Family::QBaskakov => q_baskakov(g, spec, x),
        Family::QBaskakovKantorovich => q_baskakov_kantorovich(g, spec, x),
        Family::WaveletQBaskakovKantorovich => wavelet_q_operator(g, spec, wavelet, x),
    }
}

/// Closed-form moments of the q-Baskakov operator on `e_j = t^j`, `j <= 2`.
pub fn moment_closed_form(j: u32, m: u32, q: QParam, x: f64) -> Result<f64> {
    match j {
        0 => Ok(1.0),
        1 => Ok(x),
        2 => Ok(x * x + x / q_integer(m as u64, q) * (1.0 + x / q.value())),
        _ => Err(Error::invalid(format!("closed-form moments exist for j in {{0,1,2}}, got {j}"))),
    }
}

/// The operator applied to `(t - x)^2`: `x^2/(q [m]_q) + x/[m]_q`.
pub fn second_central_moment(m: u32, q: QParam, x: f64) -> f64 {
    let mq = q_integer(m as u64, q);
    x * x / (q.value() * mq) + x / mq
}

/// One row of an error curve. Failed evaluations become NaN rows carrying
/// the diagnostic instead of aborting the curve.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub x: f64,
    pub approx: f64,
    pub exact: f64,
    pub error: f64,
    pub diagnostic: Option<String>,
}

/// Evaluates the operator over `points` in parallel; rows come back in
/// grid order.
pub fn operator_error_curve<G>(g: G, spec: &OperatorSpec, wavelet: &Wavelet, points: &[f64]) -> Vec<CurvePoint>
where
    G: Fn(f64) -> f64 + Sync,
{
    points
        .par_iter()
        .map(|&x| {
            let exact = g(x);
            match evaluate(&g, spec, wavelet, x) {
                Ok(approx) => CurvePoint {
                    x,
                    approx,
                    exact,
                    error: (approx - exact).abs(),
                    diagnostic: None,
                },
                Err(e) => CurvePoint {
                    x,
                    approx: f64::NAN,
                    exact,
                    error: f64::NAN,
                    diagnostic: Some(e.to_string()),
                },
            }
        })
        .collect()
}
