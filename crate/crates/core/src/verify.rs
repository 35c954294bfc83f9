//! Brute-force checks of the rate certificates and of the inequalities used to derive them.

use std::fmt;

use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::iteration::{HalpernTrace, ResolventPath};
use crate::numeric::{ceil_nat, floor_dyadic, nat, rat, rat_from_nat, to_f64, Natural, Rational};
use crate::rates::{k_resolvent_meta, lemma_ineq_bound, phi_rate, Budget, Counterfunction, RateResult};
use crate::schedules::Schedule;
use crate::spaces::{Space, Vector};

/// Absolute slack for float-world comparisons against rates.
pub const RESIDUAL_SLACK: f64 = 1e-9;
/// Slack for the proof-internal inequalities, whose sides carry accumulated roundoff.
pub const DIAGNOSTIC_SLACK: f64 = 1e-6;

fn window_within(points: &[Vector], space: &Space, from: usize, to: usize, eps: f64) -> bool {
    // Endpoint distances catch most failures before the full pairwise scan.
    if (from + 1..=to).any(|j| space.distance(&points[from], &points[j]) > eps) {
        return false;
    }
    (from + 1..=to).all(|i| (i + 1..=to).all(|j| space.distance(&points[i], &points[j]) <= eps))
}

/// Least `n` whose window `[n, n+g(n)]` fits in `points` and has all pairs within `ε`.
pub fn brute_force_metastability(
    points: &[Vector],
    space: &Space,
    eps: &Rational,
    g: &Counterfunction,
) -> Result<Option<u64>> {
    brute_force_metastability_from(points, 0, space, eps, g)
}

/// As [`brute_force_metastability`], with `points[i]` carrying index `offset + i`.
pub fn brute_force_metastability_from(
    points: &[Vector],
    offset: u64,
    space: &Space,
    eps: &Rational,
    g: &Counterfunction,
) -> Result<Option<u64>> {
    let e = to_f64(eps);
    let len = points.len();
    for i in 0..len {
        let n = offset + i as u64;
        let Some(w) = window_end(g, n, i, len)? else { continue };
        if window_within(points, space, i, w, e) {
            return Ok(Some(n));
        }
    }
    Ok(None)
}

/// Position of the last point of the window starting at position `i`, if it fits.
fn window_end(g: &Counterfunction, n: u64, i: usize, len: usize) -> Result<Option<usize>> {
    let w = g.apply_u64(n)?;
    Ok(w.to_usize().and_then(|w| i.checked_add(w)).filter(|end| *end < len))
}

/// True iff `residual(n) ≤ ε + 1e−9` for every `n` in `[rate, end)` of the trace.
pub fn check_asymptotic_regularity(trace: &HalpernTrace, eps: &Rational, rate: &Natural) -> Result<bool> {
    first_regularity_violation(trace, eps, rate, None).map(|v| v.is_none())
}

/// First index in `[rate, rate+window]` (or `[rate, end)`) whose residual exceeds `ε + 1e−9`.
pub fn first_regularity_violation(
    trace: &HalpernTrace,
    eps: &Rational,
    rate: &Natural,
    window: Option<u64>,
) -> Result<Option<u64>> {
    let rate = rate.to_u64().ok_or(Error::TraceTooShort)?;
    let last = match window {
        Some(w) => rate.checked_add(w).ok_or(Error::TraceTooShort)?,
        None => trace.end_index().saturating_sub(1),
    };
    if rate >= trace.end_index() || last >= trace.end_index() {
        return Err(Error::TraceTooShort);
    }
    let limit = to_f64(eps) + RESIDUAL_SLACK;
    let from = rate.max(trace.start_index);
    Ok((from..=last).find(|&n| trace.residual(n).is_some_and(|r| r.is_nan() || r > limit)))
}

/// Whether a brute-force witness respects a computed bound.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum BoundStatus {
    Verified,
    /// Every window up to the bound fits in the data and none is ε-close.
    Violated {
        witness: Option<u64>,
        bound: String,
    },
    NotComparable {
        reason: String,
    },
}

impl BoundStatus {
    pub fn outcome(&self) -> &'static str {
        match self {
            BoundStatus::Verified => "pass",
            BoundStatus::Violated { .. } => "fail",
            BoundStatus::NotComparable { .. } => "not-comparable",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetastabilityReport {
    pub eps: Rational,
    pub g: String,
    pub witness: Option<u64>,
    pub bound: RateResult,
    pub status: BoundStatus,
}

/// Compares a brute-force witness (indices starting at `offset`) with an exact bound.
///
/// Bounds below `offset` are read as `offset`, the first index that exists.
pub fn compare_witness(
    points: &[Vector],
    offset: u64,
    space: &Space,
    eps: &Rational,
    g: &Counterfunction,
    bound: &RateResult,
) -> Result<(Option<u64>, BoundStatus)> {
    let witness = brute_force_metastability_from(points, offset, space, eps, g)?;
    let RateResult::Exact(b) = bound else {
        return Ok((witness, BoundStatus::NotComparable { reason: "bound exceeded the evaluation budget".into() }));
    };
    let b = b.to_u64().unwrap_or(u64::MAX).max(offset);
    if witness.is_some_and(|w| w <= b) {
        return Ok((witness, BoundStatus::Verified));
    }
    // A witness beyond the bound (or none) refutes it only if every window up to the bound fits.
    let len = points.len();
    let mut all_fit = true;
    for n in offset..=b {
        let i = (n - offset) as usize;
        if i >= len || window_end(g, n, i, len)?.is_none() {
            all_fit = false;
            break;
        }
    }
    let status = if all_fit {
        BoundStatus::Violated { witness, bound: b.to_string() }
    } else {
        BoundStatus::NotComparable { reason: "path too short".into() }
    };
    Ok((witness, status))
}

/// Brute-force witness on `(z_{1/m})_{m≥1}` against `K(ε, g)` from [`k_resolvent_meta`].
pub fn check_resolvent_metastability(
    path: &ResolventPath,
    space: &Space,
    eps: &Rational,
    g: &Counterfunction,
    m: &Rational,
    budget: &Budget,
) -> Result<MetastabilityReport> {
    let bound = k_resolvent_meta(eps, g, m, budget)?;
    let (witness, status) = compare_witness(&path.points(), 1, space, eps, g, &bound)?;
    Ok(MetastabilityReport { eps: eps.clone(), g: g.to_string(), witness, bound, status })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiagnosticRow {
    pub n: u64,
    pub m: u64,
    pub beta: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// `β_n^m = 2⟨u − z_m, J(x_n − z_m)⟩ − M²/m`.
pub fn beta(space: &Space, u: &Vector, x: &Vector, z: &Vector, m_bound: f64, m: u64) -> Result<f64> {
    let j = space.duality_map(&x.sub(z))?;
    Ok(2.0 * space.pairing(&u.sub(z), &j.functional) - m_bound * m_bound / m as f64)
}

/// Checks `β_n^m ≤ 3·m·M·‖x_n − S x_n‖` on the grid `ns × ms`.
pub fn beta_diagnostics(
    trace: &HalpernTrace,
    path: &ResolventPath,
    space: &Space,
    u: &Vector,
    m_bound: f64,
    ns: &[u64],
    ms: &[u64],
) -> Result<Vec<DiagnosticRow>> {
    let mut rows = Vec::with_capacity(ns.len() * ms.len());
    for &n in ns {
        let x = trace.point(n).ok_or_else(|| Error::IndexOutOfRange(format!("n = {n} not in trace")))?;
        let res = trace.residual(n).expect("residual stored with point");
        for &m in ms {
            let z = path.z(m).ok_or_else(|| Error::IndexOutOfRange(format!("m = {m} not in path")))?;
            let b = beta(space, u, x, z, m_bound, m)?;
            let rhs = 3.0 * m as f64 * m_bound * res;
            rows.push(DiagnosticRow { n, m, beta: b, rhs, holds: b <= rhs + DIAGNOSTIC_SLACK * rhs.abs().max(1.0) });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DescentCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// Checks `‖x_n − z_m‖² ≤ (∏_{k=n₀}^{n−1}(1−α_k))·M² + C + (2M²/m)·(n − n₀) + 1e−6`
/// with `C = max{ε²/12, max_{n₀<k≤n} β_k^m}`.
///
/// With `C` at least the largest `β` actually met, the right side is a bound that holds for
/// any `(m, n₀, n)`; it reduces to the `ε²/12` form once `n₀` is past the asymptotic
/// regularity threshold. The count of `2M²/m` terms is `n − n₀`, one per recurrence step.
#[allow(clippy::too_many_arguments)]
pub fn check_descent_inequality(
    trace: &HalpernTrace,
    path: &ResolventPath,
    space: &Space,
    u: &Vector,
    m: u64,
    n0: u64,
    n: u64,
    m_bound: f64,
    eps: f64,
) -> Result<DescentCheck> {
    if n <= n0 {
        return Err(Error::IndexOutOfRange(format!("n = {n} must exceed n0 = {n0}")));
    }
    let missing = |k: u64| Error::IndexOutOfRange(format!("index {k} not in trace"));
    trace.point(n0).ok_or_else(|| missing(n0))?;
    let xn = trace.point(n).ok_or_else(|| missing(n))?;
    let z = path.z(m).ok_or_else(|| Error::IndexOutOfRange(format!("m = {m} not in path")))?;
    let mut prod = 1.0;
    let mut c = eps * eps / 12.0;
    for k in n0..n {
        prod *= 1.0 - trace.alpha(k).ok_or_else(|| missing(k))?;
        let xk = trace.point(k + 1).ok_or_else(|| missing(k + 1))?;
        c = c.max(beta(space, u, xk, z, m_bound, m)?);
    }
    let d = space.distance(xn, z);
    let lhs = d * d;
    let m2 = m_bound * m_bound;
    let rhs = prod * m2 + c + 2.0 * m2 / m as f64 * (n - n0) as f64;
    Ok(DescentCheck { lhs, rhs, holds: lhs <= rhs + DIAGNOSTIC_SLACK })
}

/// Result of one randomized lemma instance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LemmaOutcome {
    Holds,
    /// The generated data does not satisfy the lemma's hypotheses; nothing was concluded.
    PremiseViolated(String),
    ConclusionFailed(String),
}

/// Denominator granularity used to keep simulated sequences from growing without bound.
/// Rounding `s_{n+1}` down preserves the recurrence inequality.
const DYADIC_BITS: u32 = 32;

fn random_rational<R: Rng>(rng: &mut R, max_num: i64, den: i64) -> Rational {
    rat(rng.gen_range(0..=max_num), den)
}

/// Random instance of the two-sided recurrence with `β_k ≤ C` for `k ≥ m`.
#[derive(Debug, Clone)]
pub struct RecurrenceInstance {
    pub m: u64,
    pub c: Rational,
    pub alphas: Vec<Rational>,
    pub betas: Vec<Rational>,
    pub gammas: Vec<Rational>,
    pub s0: Rational,
}

impl RecurrenceInstance {
    pub fn random<R: Rng>(rng: &mut R) -> Self {
        let len = rng.gen_range(1..=24usize);
        let m = rng.gen_range(0..len as u64);
        let c = random_rational(rng, 16, 4) - rat(1, 1);
        let alphas = (0..len)
            .map(|_| {
                let d = rng.gen_range(1..=12);
                rat(rng.gen_range(0..=d), d)
            })
            .collect();
        let betas =
            (0..len)
                .map(|k| {
                    if (k as u64) < m {
                        random_rational(rng, 40, 4) - rat(5, 1)
                    } else {
                        &c - random_rational(rng, 8, 4)
                    }
                })
                .collect();
        let gammas = (0..len).map(|_| random_rational(rng, 4, 16)).collect();
        let s0 = random_rational(rng, 40, 8) - rat(2, 1);
        RecurrenceInstance { m, c, alphas, betas, gammas, s0 }
    }

    pub fn run(&self) -> Result<LemmaOutcome> {
        let len = self.alphas.len();
        for k in self.m as usize..len {
            if self.betas[k] > self.c {
                return Ok(LemmaOutcome::PremiseViolated(format!("β_{k} = {} exceeds C = {}", self.betas[k], self.c)));
            }
        }
        if let Some(k) = (0..len).find(|&k| self.gammas[k].is_negative()) {
            return Ok(LemmaOutcome::PremiseViolated(format!("γ_{k} is negative")));
        }
        let mut s = Vec::with_capacity(len + 1);
        s.push(self.s0.clone());
        for k in 0..len {
            let a = &self.alphas[k];
            let next = (Rational::one() - a) * &s[k] + a * &self.betas[k] + &self.gammas[k];
            s.push(floor_dyadic(&next, DYADIC_BITS));
        }
        let schedule = Schedule::custom(0, self.alphas.clone(), None)?;
        let m = self.m;
        for n in m..len as u64 {
            let bound = lemma_ineq_bound(m, n, &s[m as usize], &schedule, &self.c, &self.gammas)?;
            if s[n as usize + 1] > bound {
                return Ok(LemmaOutcome::ConclusionFailed(format!(
                    "s_{} = {} exceeds bound {bound} (m = {m})",
                    n + 1,
                    s[n as usize + 1]
                )));
            }
        }
        Ok(LemmaOutcome::Holds)
    }
}

/// Random instance satisfying the hypotheses of the Φ-rate lemma by construction:
/// `α_n ∈ {1/(n+b), 2/(n+b)}`, `0 ≤ β_n ≤ B/(n+1)`, `0 ≤ γ_n ≤ G/((n+1)(n+2))`,
/// `0 ≤ s_n ≤ C`. The moduli follow from telescoping:
/// `S1(ε) = ⌈(b−1)/ε⌉ − b`, `S2(ε) = ⌈B/ε⌉ − 1`, `S3(ε) = ⌈G/ε⌉ − 1` (clamped at 0).
#[derive(Debug, Clone)]
pub struct RateInstance {
    pub b: u64,
    pub big_b: Rational,
    pub big_g: Rational,
    pub c: Rational,
    pub eps: Rational,
    pub s0: Rational,
    pub seed: u64,
    /// Overrides `β_n` at one index, to exercise the premise guard.
    pub beta_spike: Option<(u64, Rational)>,
}

impl RateInstance {
    pub fn random<R: Rng>(rng: &mut R) -> Self {
        let c = rat(rng.gen_range(1..=2), 1);
        let s0 = &c * random_rational(rng, 8, 8);
        RateInstance {
            b: rng.gen_range(3..=5),
            big_b: random_rational(rng, 8, 4),
            big_g: random_rational(rng, 8, 4),
            eps: rat(1, rng.gen_range(1..=4)),
            c,
            s0,
            seed: rng.gen(),
            beta_spike: None,
        }
    }

    fn s1(&self, e: &Rational) -> Result<Natural> {
        let v = ceil_nat(&(rat(self.b as i64 - 1, 1) / e));
        Ok(if v > nat(self.b) { v - self.b } else { Natural::zero() })
    }

    fn tail(k: &Rational, e: &Rational) -> Natural {
        let v = ceil_nat(&(k / e));
        if v.is_zero() {
            v
        } else {
            v - 1u32
        }
    }

    pub fn run(&self) -> Result<LemmaOutcome> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut alphas: Vec<Rational> = Vec::new();
        let alpha = |n: usize, rng: &mut ChaCha8Rng, alphas: &mut Vec<Rational>| -> Rational {
            while alphas.len() <= n {
                let k = alphas.len() as i64;
                alphas.push(rat(rng.gen_range(1..=2), k + self.b as i64));
            }
            alphas[n].clone()
        };
        let s2 = |e: &Rational| Ok(Self::tail(&self.big_b, e));
        let s3 = |e: &Rational| Ok(Self::tail(&self.big_g, e));
        let third = &self.eps / rat(3, 1);
        let top = Self::tail(&self.big_b, &third).max(Self::tail(&self.big_g, &third));
        let top = top.to_usize().ok_or_else(|| Error::Budget("product range".into()))?;
        let mut d_val = Rational::one();
        for n in 0..=top {
            d_val *= Rational::one() - alpha(n, &mut rng, &mut alphas);
        }
        // D may only be queried at ε itself.
        let eps = self.eps.clone();
        let d = |e: &Rational| {
            if *e == eps {
                Ok(d_val.clone())
            } else {
                Err(Error::InvalidParameter("D queried off its tabulated point".into()))
            }
        };
        let phi = phi_rate(&self.eps, &self.c, &|e| self.s1(e), &s2, &s3, &d)?;
        let phi = phi.to_u64().ok_or_else(|| Error::Budget("Φ too large to simulate".into()))?;
        let horizon = phi + 64;

        let mut s = self.s0.clone();
        for n in 0..=horizon {
            let a = alpha(n as usize, &mut rng, &mut alphas);
            let mut beta = rat_from_nat(&nat(rng.gen_range(0..=16))) / rat(16 * (n as i64 + 1), 1) * &self.big_b;
            if let Some((k, v)) = &self.beta_spike {
                if *k == n {
                    beta = v.clone();
                }
            }
            let gamma = rat(rng.gen_range(0..=16), 16 * (n as i64 + 1) * (n as i64 + 2)) * &self.big_g;
            if beta.is_negative() || beta > &self.big_b / rat(n as i64 + 1, 1) {
                return Ok(LemmaOutcome::PremiseViolated(format!("β_{n} = {beta} exceeds B/(n+1)")));
            }
            let mut next = (Rational::one() - &a) * &s + &a * beta + gamma;
            if next > self.c {
                next = self.c.clone();
            }
            let next = floor_dyadic(&next, DYADIC_BITS);
            if n >= phi && next > self.eps {
                return Ok(LemmaOutcome::ConclusionFailed(format!(
                    "s_{} = {next} exceeds ε = {} (Φ = {phi})",
                    n + 1,
                    self.eps
                )));
            }
            s = next;
        }
        Ok(LemmaOutcome::Holds)
    }
}

/// Per-lemma tallies from [`simulate_lemma_recurrences_detailed`].
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SimulationSummary {
    pub recurrence_holds: usize,
    pub rate_holds: usize,
    pub failures: Vec<String>,
}

pub fn simulate_lemma_recurrences_detailed(count: usize, seed: u64) -> Result<SimulationSummary> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut summary = SimulationSummary::default();
    for i in 0..count {
        match RecurrenceInstance::random(&mut rng).run()? {
            LemmaOutcome::Holds => summary.recurrence_holds += 1,
            other => summary.failures.push(format!("recurrence instance {i}: {other:?}")),
        }
        match RateInstance::random(&mut rng).run()? {
            LemmaOutcome::Holds => summary.rate_holds += 1,
            other => summary.failures.push(format!("rate instance {i}: {other:?}")),
        }
    }
    Ok(summary)
}

/// Runs `count` instances of each lemma; true iff every instance satisfies its conclusion.
pub fn simulate_lemma_recurrences(count: usize, seed: u64) -> bool {
    simulate_lemma_recurrences_detailed(count, seed).is_ok_and(|s| s.failures.is_empty())
}

/// One entry of the JSON verification report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckRecord {
    pub check: String,
    pub instance: String,
    pub parameters: serde_json::Value,
    pub outcome: String,
    pub witness: Option<String>,
    pub bound: Option<String>,
    pub elapsed_ms: Option<f64>,
}

impl CheckRecord {
    pub fn new(check: &str, instance: &str, parameters: serde_json::Value, outcome: &str) -> Self {
        CheckRecord {
            check: check.into(),
            instance: instance.into(),
            parameters,
            outcome: outcome.into(),
            witness: None,
            bound: None,
            elapsed_ms: None,
        }
    }

    pub fn passed(&self) -> bool {
        self.outcome == "pass"
    }
}

impl fmt::Display for CheckRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} [{}] {}", self.check, self.instance, self.outcome)
    }
}
