//! Exact rate functions: the two-sided recurrence bound, Φ, ψ (general and closed form),
//! the resolvent metastability bound K, and the Halpern metastability bound Σ.

mod counterfunction;

use std::fmt;
use std::sync::{Arc, Mutex};

use num_traits::{One, Signed, ToPrimitive, Zero};

pub use counterfunction::{
    cf_iterate, cf_star, cf_tilde_max, cf_tilde_strong, Budget, Counterfunction, Exhausted, Meter, NativeFn, RateResult,
};
pub(crate) use counterfunction::{tokenize, Token};

use crate::error::{Error, Result};
use crate::numeric::{ceil_nat, floor_nat, rat, rat_from_nat, require_positive, Natural, Rational};
use crate::schedules::{LowerBoundFn, RateFn, Schedule};
use crate::spaces::Modulus;

/// `(∏_{k=m}^{n}(1−α_k))·s_m + (1 − ∏_{k=m}^{n}(1−α_k))·C + Σ_{k=m}^{n} γ_k`.
///
/// Bounds `s_{n+1}` for any sequence with `s_{k+1} ≤ (1−α_k)s_k + α_kβ_k + γ_k` and
/// `β_k ≤ C` on `[m, n]`. `gamma` is indexed absolutely, so it needs at least `n+1` entries.
pub fn lemma_ineq_bound(
    m: u64,
    n: u64,
    s_m: &Rational,
    schedule: &Schedule,
    c: &Rational,
    gamma: &[Rational],
) -> Result<Rational> {
    if n < m {
        return Err(Error::InvalidParameter(format!("n = {n} is below m = {m}")));
    }
    if (gamma.len() as u64) <= n {
        return Err(Error::IndexOutOfRange(format!("γ has {} entries, index {n} needed", gamma.len())));
    }
    let mut prod = Rational::one();
    let mut sum = Rational::zero();
    for k in m..=n {
        prod *= Rational::one() - schedule.alpha_at(k)?;
        sum += &gamma[k as usize];
    }
    Ok(&prod * s_m + (Rational::one() - &prod) * c + sum)
}

/// `Φ(ε, C, S1, S2, S3, D) = max{S1(ε·D(ε)/3C), S2(ε/3), S3(ε/3)}`.
pub fn phi_rate(
    eps: &Rational,
    c: &Rational,
    s1: &dyn Fn(&Rational) -> Result<Natural>,
    s2: &dyn Fn(&Rational) -> Result<Natural>,
    s3: &dyn Fn(&Rational) -> Result<Natural>,
    d: &dyn Fn(&Rational) -> Result<Rational>,
) -> Result<Natural> {
    require_positive(eps, "ε")?;
    require_positive(c, "C")?;
    let d_eps = d(eps)?;
    require_positive(&d_eps, "D(ε)")?;
    let third = eps / rat(3, 1);
    let a = s1(&(eps * d_eps / (c * rat(3, 1))))?;
    let b = s2(&third)?;
    let e = s3(&third)?;
    Ok(a.max(b).max(e))
}

/// Which rate of asymptotic regularity a bundle uses.
#[derive(Clone)]
pub enum Psi {
    /// `max{R1(ε/2M), Φ(ε/2, M, R2, R3(·/M), 0, D)}` built from the bundle's moduli.
    Pipeline,
    /// `⌊12M⌊3M/ε⌋/ε⌋`; only valid for `α_n = 1/(n+1)`, `M ≥ 1`, `ε ≤ 3/2`.
    ClosedForm,
    Custom(RateFn),
}

impl fmt::Debug for Psi {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Psi::Pipeline => f.write_str("Pipeline"),
            Psi::ClosedForm => f.write_str("ClosedForm"),
            Psi::Custom(_) => f.write_str("Custom"),
        }
    }
}

/// Everything the ψ and Σ computations consume.
#[derive(Clone)]
pub struct ModuliBundle {
    pub m: Rational,
    pub r1: RateFn,
    pub r2: RateFn,
    pub r3: RateFn,
    pub e: LowerBoundFn,
    pub omega: Modulus,
    pub psi: Psi,
}

impl fmt::Debug for ModuliBundle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ModuliBundle")
            .field("m", &self.m)
            .field("omega", &self.omega)
            .field("psi", &self.psi)
            .finish_non_exhaustive()
    }
}

impl ModuliBundle {
    /// Bundle whose R1, R2, R3, E come from the schedule and whose ψ is the general pipeline.
    pub fn from_schedule(schedule: &Schedule, m: Rational, omega: Modulus) -> Result<Self> {
        require_positive(&m, "M")?;
        let (s1, s2, s3, s4) = (schedule.clone(), schedule.clone(), schedule.clone(), schedule.clone());
        Ok(ModuliBundle {
            m,
            r1: Arc::new(move |eps| s1.r1(eps)),
            r2: Arc::new(move |eps| s2.r2(eps)),
            r3: Arc::new(move |eps| s3.r3(eps)),
            e: Arc::new(move |k| s4.e(k)),
            omega,
            psi: Psi::Pipeline,
        })
    }

    pub fn with_psi(mut self, psi: Psi) -> Self {
        self.psi = psi;
        self
    }

    /// `D(ε) = E(R3(ε/3M))`.
    pub fn d(&self, eps: &Rational) -> Result<Rational> {
        let r = (self.r3)(&(eps / (&self.m * rat(3, 1))))?;
        (self.e)(&r)
    }

    /// `Φ(ε, M, R2, R3(·/M), 0, D)`, the Φ-part of the ψ pipeline.
    pub fn phi(&self, eps: &Rational) -> Result<Natural> {
        let m = self.m.clone();
        phi_rate(eps, &self.m, &|x| (self.r2)(x), &|x| (self.r3)(&(x / &m)), &|_| Ok(Natural::zero()), &|x| self.d(x))
    }
}

/// ψ(ε) as selected by the bundle.
pub fn psi_rate(eps: &Rational, bundle: &ModuliBundle) -> Result<Natural> {
    require_positive(eps, "ε")?;
    match &bundle.psi {
        Psi::Pipeline => {
            let a = (bundle.r1)(&(eps / (&bundle.m * rat(2, 1))))?;
            let b = bundle.phi(&(eps / rat(2, 1)))?;
            Ok(a.max(b))
        }
        Psi::ClosedForm => psi_closed_form(eps, &bundle.m),
        Psi::Custom(f) => f(eps),
    }
}

/// `⌊12M⌊3M/ε⌋/ε⌋`, checked against the envelope `⌊36M²/ε²⌋`.
pub fn psi_closed_form(eps: &Rational, m: &Rational) -> Result<Natural> {
    if !eps.is_positive() || *eps > rat(3, 2) {
        return Err(Error::InvalidParameter(format!("ε = {eps} outside (0, 3/2]")));
    }
    if *m < Rational::one() {
        return Err(Error::InvalidParameter(format!("M = {m} is below 1")));
    }
    let inner = floor_nat(&(m * rat(3, 1) / eps));
    let value = floor_nat(&(m * rat(12, 1) * rat_from_nat(&inner) / eps));
    let envelope = floor_nat(&(m * m * rat(36, 1) / (eps * eps)));
    if value > envelope {
        return Err(Error::InvalidParameter(format!("closed form {value} exceeds envelope {envelope}")));
    }
    Ok(value)
}

/// `K(ε, g) = g̃^{(⌈M²/ε²⌉)}(0)` with `g̃(n) = max{n, g(n)}`.
pub fn k_resolvent_meta(eps: &Rational, g: &Counterfunction, m: &Rational, budget: &Budget) -> Result<RateResult> {
    require_positive(eps, "ε")?;
    require_positive(m, "M")?;
    let count = ceil_nat(&(m * m / (eps * eps)));
    Ok(cf_iterate(&cf_tilde_max(g), &count, budget))
}

/// A metastability bound for the resolvent path, as consumed by [`sigma_rate`].
pub type ResolventBound<'a> = dyn Fn(&Rational, &Counterfunction, &Budget) -> Result<RateResult> + 'a;

/// Shared slot for an error raised inside a [`NativeFn`], which can only signal exhaustion.
type ErrorSlot = Arc<Mutex<Option<Error>>>;

fn record(slot: &ErrorSlot, e: Error) -> Exhausted {
    let mut guard = slot.lock().expect("error slot poisoned");
    guard.get_or_insert(e);
    Exhausted
}

fn take(slot: &ErrorSlot) -> Option<Error> {
    slot.lock().expect("error slot poisoned").take()
}

/// Σ(ε, g) for the Halpern iteration, given a metastability bound `k_bound` for the
/// resolvent path.
///
/// The inner maximum also includes `k+1`, which the soundness argument needs.
/// Budget exhaustion in any phase returns a value the true Σ provably dominates.
pub fn sigma_rate(
    eps: &Rational,
    g: &Counterfunction,
    bundle: &ModuliBundle,
    k_bound: &ResolventBound<'_>,
    budget: &Budget,
) -> Result<RateResult> {
    require_positive(eps, "ε")?;
    let m = bundle.m.clone();
    let eps2 = eps * eps;
    let delta = &eps2 / (&m * rat(144, 1));
    let omega = bundle.omega.certified(&m, &delta).ok_or(Error::ModulusRequired)?;
    let eps0 = if omega < delta { omega } else { delta };
    let m0 = ceil_nat(&(&m * &m * rat(72, 1) / &eps2));

    let phi = {
        let (bundle, eps2, m) = (bundle.clone(), eps2.clone(), m.clone());
        move |k: &Natural| -> Result<Natural> {
            let arg = &eps2 / (&m * rat(72, 1) * rat_from_nat(k));
            psi_rate(&arg, &bundle)
        }
    };
    let r2_term = {
        let (bundle, eps2, m) = (bundle.clone(), eps2.clone(), m.clone());
        move |k: &Natural| -> Result<Natural> {
            let e = (bundle.e)(k)?;
            (bundle.r2)(&(e * &eps2 / (&m * &m * rat(12, 1))))
        }
    };

    let slot: ErrorSlot = Arc::new(Mutex::new(None));
    let f_star = {
        let (slot, phi, r2_term, g) = (slot.clone(), phi.clone(), r2_term.clone(), g.clone());
        let (eps2, m, m0) = (eps2.clone(), m.clone(), m0.clone());
        NativeFn::new("f*", false, move |k: &Natural, meter: &mut Meter| {
            meter.charge(1)?;
            let k = k + &m0;
            let phik = phi(&k).map_err(|e| record(&slot, e))?;
            let r = r2_term(&phik).map_err(|e| record(&slot, e))?;
            meter.check_bits(&r)?;
            let gs = cf_star(&g).eval(&r, meter)?;
            let floor = &phik + 1u32;
            let excess = gs.max(floor.clone()) - floor;
            let raw = &m * &m * rat(24, 1) * rat_from_nat(&excess) / &eps2 - rat_from_nat(&k);
            let f = if raw.is_positive() { ceil_nat(&raw) } else { Natural::zero() };
            Ok(f + &m0)
        })
    };

    let k_value = k_bound(&eps0, &Counterfunction::Native(f_star), budget);
    if let Some(e) = take(&slot) {
        return Err(e);
    }
    let mut steps = 0u64;
    let kk = match k_value? {
        RateResult::Exact(v) => v,
        RateResult::BudgetExceeded { steps_done, .. } => {
            // φ(m₀) lies in [Γ̃, Γ] however large K is.
            let n0 = phi(&m0)?;
            let lower = r2_term(&n0)?.max(&n0 + 1u32);
            return Ok(RateResult::BudgetExceeded { lower_bound: lower, steps_done });
        }
    };

    let mut meter = budget.meter();
    let hi_k = &kk + &m0;
    let mut k = m0.clone();
    let mut gamma_hi = Natural::zero();
    let mut gamma_lo: Option<Natural> = None;
    while k <= hi_k {
        if meter.charge(1).is_err() {
            let n0 = phi(&m0)?;
            let lower = r2_term(&n0)?.max(&n0 + 1u32);
            return Ok(RateResult::BudgetExceeded { lower_bound: lower, steps_done: meter.used() });
        }
        let v = phi(&k)?;
        gamma_lo = Some(match gamma_lo {
            Some(lo) if lo <= v => lo,
            _ => v.clone(),
        });
        gamma_hi = gamma_hi.max(v);
        k += 1u32;
    }
    steps += meter.used();

    let gamma_lo = gamma_lo.expect("range [m₀, K+m₀] is nonempty");
    let mut meter = budget.meter();
    let mut best = Natural::zero();
    let mut k = gamma_lo;
    while k <= gamma_hi {
        if meter.charge(1).is_err() {
            return Ok(RateResult::BudgetExceeded { lower_bound: best, steps_done: steps + meter.used() });
        }
        let term = r2_term(&k)?.max(&k + 1u32);
        best = best.max(term);
        k += 1u32;
    }
    Ok(RateResult::Exact(best))
}

/// Convenience: Σ with K taken from [`k_resolvent_meta`] at the bundle's M.
pub fn sigma_with_resolvent_k(
    eps: &Rational,
    g: &Counterfunction,
    bundle: &ModuliBundle,
    budget: &Budget,
) -> Result<RateResult> {
    let m = bundle.m.clone();
    sigma_rate(eps, g, bundle, &|e, f, b| k_resolvent_meta(e, f, &m, b), budget)
}

/// Small helper for callers that want a `u64` out of an exact result.
pub fn exact_u64(r: &RateResult) -> Option<u64> {
    r.exact().and_then(|v| v.to_u64())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::{ceil_recip, nat};
    use crate::schedules::Schedule;
    use num_rational::Ratio;

    fn q(n: i64, d: i64) -> Rational {
        rat(n, d)
    }

    #[test]
    fn lemma_bound_examples() {
        let zero = Schedule::custom(0, vec![q(0, 1); 5], None).unwrap();
        let g0 = vec![q(0, 1); 5];
        assert_eq!(lemma_ineq_bound(0, 4, &q(7, 3), &zero, &q(100, 1), &g0).unwrap(), q(7, 3));

        let half = Schedule::custom(0, vec![q(1, 2), q(1, 2)], None).unwrap();
        let g = vec![q(1, 8), q(1, 8)];
        assert_eq!(lemma_ineq_bound(0, 1, &q(4, 1), &half, &q(2, 1), &g).unwrap(), q(11, 4));
        assert!(lemma_ineq_bound(0, 2, &q(4, 1), &half, &q(2, 1), &g).is_err());
        assert!(lemma_ineq_bound(2, 1, &q(4, 1), &half, &q(2, 1), &g).is_err());
    }

    #[test]
    fn phi_examples() {
        let zero = |_: &Rational| Ok(Natural::zero());
        let d = |e: &Rational| Ok(e / q(6, 1));
        assert_eq!(phi_rate(&q(1, 1), &q(1, 1), &zero, &zero, &zero, &d).unwrap(), nat(0));
        let recip = |e: &Rational| ceil_recip(e);
        // S1(1·(1/6)/3) = 18, S2(1/3) = 3.
        assert_eq!(phi_rate(&q(1, 1), &q(1, 1), &recip, &recip, &zero, &d).unwrap(), nat(18));
        assert!(phi_rate(&q(0, 1), &q(1, 1), &recip, &recip, &zero, &d).is_err());
    }

    #[test]
    fn closed_form_examples() {
        assert_eq!(psi_closed_form(&q(1, 1), &q(1, 1)).unwrap(), nat(36));
        assert_eq!(psi_closed_form(&q(1, 2), &q(2, 1)).unwrap(), nat(576));
        assert_eq!(psi_closed_form(&q(3, 2), &q(1, 1)).unwrap(), nat(16));
        assert!(psi_closed_form(&q(2, 1), &q(1, 1)).is_err());
        assert!(psi_closed_form(&q(1, 1), &q(1, 2)).is_err());
    }

    /// Independent evaluation of the ψ chain for `α_n = 1/(n+2)` with moduli found by
    /// scanning the defining conditions directly rather than through closed forms.
    fn scanned_psi_natural_shifted(eps: &Rational, m: &Rational) -> u64 {
        let alpha = |n: u64| q(1, n as i64 + 2);
        // Least n with α_k ≤ x for all k ≥ n (α decreasing, so the first such n).
        let r1 = |x: &Rational| (0u64..).find(|&n| alpha(n) <= *x).unwrap();
        let r2 = |x: &Rational| {
            let mut p = q(1, 1);
            (0u64..)
                .find(|&n| {
                    p *= q(1, 1) - alpha(n);
                    p <= *x
                })
                .unwrap()
        };
        let r3 = |x: &Rational| (1u64..).find(|&n| (alpha(n - 1) - alpha(n)) <= x * alpha(n)).unwrap();
        let e = |k: u64| (0..=k).fold(q(1, 1), |p, n| p * (q(1, 1) - alpha(n)));
        let d = |x: &Rational| e(r3(&(x / (m * q(3, 1)))));
        let half = eps / q(2, 1);
        let a = r1(&(eps / (m * q(2, 1))));
        let b = r2(&(&half * d(&half) / (m * q(3, 1))));
        let c = r3(&(&half / q(3, 1) / m));
        a.max(b).max(c)
    }

    #[test]
    fn psi_pipeline_golden_value() {
        let bundle = ModuliBundle::from_schedule(&Schedule::natural_shifted(), q(1, 1), Modulus::Identity).unwrap();
        let oracle = scanned_psi_natural_shifted(&q(1, 1), &q(1, 1));
        assert_eq!(oracle, 40);
        assert_eq!(psi_rate(&q(1, 1), &bundle).unwrap(), nat(oracle));
        for (e, m) in [(q(1, 2), q(1, 1)), (q(1, 3), q(2, 1)), (q(3, 4), q(3, 2))] {
            let b = ModuliBundle::from_schedule(&Schedule::natural_shifted(), m.clone(), Modulus::Identity).unwrap();
            assert_eq!(psi_rate(&e, &b).unwrap(), nat(scanned_psi_natural_shifted(&e, &m)));
        }
    }

    #[test]
    fn psi_pipeline_nonincreasing_in_eps() {
        for sched in [Schedule::natural_shifted(), Schedule::classic()] {
            let b = ModuliBundle::from_schedule(&sched, q(2, 1), Modulus::Identity).unwrap();
            let grid: Vec<Rational> = (1..=60).map(|i| q(i, 20)).collect();
            let vals: Vec<Natural> = grid.iter().map(|e| psi_rate(e, &b).unwrap()).collect();
            assert!(vals.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn psi_zero_for_large_eps() {
        let zero: RateFn = Arc::new(|_| Ok(Natural::zero()));
        let bundle = ModuliBundle {
            m: q(1, 1),
            r1: zero.clone(),
            r2: zero.clone(),
            r3: zero,
            e: Arc::new(|_| Ok(q(1, 2))),
            omega: Modulus::Identity,
            psi: Psi::Pipeline,
        };
        assert_eq!(psi_rate(&q(5, 1), &bundle).unwrap(), nat(0));
    }

    #[test]
    fn k_examples() {
        let b = Budget::default();
        let k = |e: Rational, g: &Counterfunction, m: Rational| k_resolvent_meta(&e, g, &m, &b).unwrap();
        assert_eq!(k(q(1, 3), &Counterfunction::constant(0), q(1, 1)), RateResult::Exact(nat(0)));
        for c in [1, 17] {
            assert_eq!(k(q(1, 3), &Counterfunction::constant(c), q(2, 1)), RateResult::Exact(nat(c)));
        }
        assert_eq!(k(q(1, 2), &Counterfunction::affine(1, 1), q(1, 1)), RateResult::Exact(nat(4)));
    }

    fn stub_bundle() -> ModuliBundle {
        ModuliBundle {
            m: q(1, 1),
            r1: Arc::new(ceil_recip),
            r2: Arc::new(ceil_recip),
            r3: Arc::new(ceil_recip),
            e: Arc::new(|k| Ok(rat_from_nat(&(k + 2u32)).recip())),
            omega: Modulus::Identity,
            psi: Psi::Custom(Arc::new(ceil_recip)),
        }
    }

    /// Straight-line evaluation of the Σ chain for the stub bundle with K ≡ 0.
    fn stub_sigma_oracle(eps: &Rational) -> Natural {
        let m = q(1, 1);
        let eps2 = eps * eps;
        let m0 = ceil_nat(&(q(72, 1) * &m * &m / &eps2));
        let psi = |x: Rational| ceil_nat(&x.recip());
        let phi = |k: &Natural| psi(&eps2 / (q(72, 1) * &m * rat_from_nat(k)));
        let n0 = phi(&m0);
        let e = rat_from_nat(&(&n0 + 2u32)).recip();
        let r2 = ceil_nat(&(e * &eps2 / (q(12, 1) * &m * &m)).recip());
        r2.max(n0 + 1u32)
    }

    #[test]
    fn sigma_stub_golden_values() {
        let bundle = stub_bundle();
        let k0 = |_: &Rational, _: &Counterfunction, _: &Budget| Ok(RateResult::Exact(nat(0)));
        let g = Counterfunction::constant(0);
        for (eps, want) in [(q(12, 1), 2u64), (q(1, 1), 62_232)] {
            assert_eq!(stub_sigma_oracle(&eps), nat(want));
            let got = sigma_rate(&eps, &g, &bundle, &k0, &Budget::default()).unwrap();
            assert_eq!(got, RateResult::Exact(nat(want)));
        }
    }

    #[test]
    fn sigma_requires_certified_modulus() {
        let mut bundle = stub_bundle();
        bundle.omega = Modulus::Empirical { space: crate::spaces::Space::hilbert(2).unwrap(), samples: 10 };
        let k0 = |_: &Rational, _: &Counterfunction, _: &Budget| Ok(RateResult::Exact(nat(0)));
        let err = sigma_rate(&q(1, 1), &Counterfunction::Identity, &bundle, &k0, &Budget::default());
        assert_eq!(err, Err(Error::ModulusRequired));
    }

    #[test]
    fn sigma_realistic_exceeds_budget() {
        let bundle = ModuliBundle::from_schedule(&Schedule::natural_shifted(), q(2, 1), Modulus::Identity).unwrap();
        let r = sigma_with_resolvent_k(&q(1, 1), &Counterfunction::Identity, &bundle, &Budget::default()).unwrap();
        assert!(matches!(r, RateResult::BudgetExceeded { .. }), "got {r}");
    }

    #[test]
    fn sigma_nondecreasing_in_g_on_stubs() {
        let bundle = stub_bundle();
        let kb = |e: &Rational, f: &Counterfunction, b: &Budget| k_resolvent_meta(e, f, &q(1, 1), b);
        let small = Budget { max_steps: 100_000, max_bits: 4_000 };
        let gs = [Counterfunction::constant(0), Counterfunction::constant(3), Counterfunction::affine(1, 3)];
        let vals: Vec<RateResult> =
            gs.iter().map(|g| sigma_rate(&q(12, 1), g, &bundle, &kb, &small).unwrap()).collect();
        for w in vals.windows(2) {
            if let (Some(a), Some(b)) = (w[0].exact(), w[1].exact()) {
                assert!(a <= b);
            }
        }
        assert!(vals[0].is_exact());
        let again = sigma_rate(&q(12, 1), &gs[2], &bundle, &kb, &small).unwrap();
        assert_eq!(again, vals[2]);
    }

    #[test]
    fn power_law_bundle_matches_natural_shifted() {
        let pl = Schedule::power_law(q(1, 1), Ratio::new(1, 1)).unwrap();
        let a = ModuliBundle::from_schedule(&pl, q(1, 1), Modulus::Identity).unwrap();
        let b = ModuliBundle::from_schedule(&Schedule::natural_shifted(), q(1, 1), Modulus::Identity).unwrap();
        for e in [q(1, 1), q(1, 2)] {
            assert_eq!(psi_rate(&e, &a).unwrap(), psi_rate(&e, &b).unwrap());
        }
    }
}
