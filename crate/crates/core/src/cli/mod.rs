//! Command-line front end: `iterate`, `rates` and `verify`.

pub mod config;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use num_traits::{One, ToPrimitive};
use serde_json::json;

use crate::error::{Error, Result};
use crate::iteration::{halpern_orbit, resolvent_path, save_path, save_trace, HalpernTrace, ResolventPath};
use crate::numeric::{parse_rational, rat, to_f64, Natural, Rational};
use crate::operators::certify_nonexpansive_seeded;
use crate::rates::{
    k_resolvent_meta, psi_closed_form, psi_rate, sigma_with_resolvent_k, Budget, Counterfunction, ModuliBundle, Psi,
    RateResult,
};
use crate::schedules::{parse_schedule, Schedule, ScheduleKind};
use crate::spaces::{Modulus, Space};
use crate::verify::{
    beta_diagnostics, check_descent_inequality, check_resolvent_metastability, compare_witness,
    first_regularity_violation, simulate_lemma_recurrences_detailed, CheckRecord,
};
use config::{read_config, ExperimentConfig, Instance};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;
pub const EXIT_MODULUS: i32 = 4;
pub const EXIT_CHECK_FAILED: i32 = 5;

const CERTIFY_SAMPLES: usize = 10_000;

/// Longest orbit the verifier will run for a single instance.
const MAX_TRACE: u64 = 20_000_000;

#[derive(Parser, Debug)]
#[command(name = "halpern", version, about = "Halpern iteration experiments and rate certificates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write orbit and resolvent-path CSVs for every configured instance.
    Iterate {
        config: PathBuf,
        /// Overrides the config's output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print one rate certificate.
    Rates(RatesArgs),
    /// Run the verification suite and write a JSON report.
    Verify {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Record wall-clock time per check (makes the report nondeterministic).
        #[arg(long)]
        timings: bool,
    },
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Which {
    Psi,
    PsiClosed,
    Phi,
    #[value(name = "K", alias = "k")]
    K,
    Sigma,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum ModulusArg {
    Identity,
    Empirical,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum PsiArg {
    Pipeline,
    Closed,
}

#[derive(clap::Args, Debug)]
struct RatesArgs {
    #[arg(long, value_enum)]
    which: Which,
    /// Rational, written `p/q`.
    #[arg(long, allow_hyphen_values = true)]
    eps: String,
    #[arg(long = "M", allow_hyphen_values = true)]
    m: String,
    #[arg(long, default_value = "natural-shifted")]
    schedule: String,
    /// Counterfunction expression, e.g. `affine 1 1`.
    #[arg(long, default_value = "id")]
    g: String,
    /// `STEPS` or `STEPS:BITS`; defaults to `HALPERN_BUDGET` or 1000000:10000.
    #[arg(long)]
    budget: Option<String>,
    /// Modulus of continuity of the duality map used by `sigma`.
    #[arg(long, value_enum, default_value = "identity")]
    modulus: ModulusArg,
    /// Rate of asymptotic regularity used inside `sigma`.
    #[arg(long, value_enum, default_value = "pipeline")]
    psi: PsiArg,
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Parse(_)
        | Error::InvalidParameter(_)
        | Error::DimensionMismatch { .. }
        | Error::UnknownFixedPoint
        | Error::BelowStartIndex { .. }
        | Error::InstanceBound(_) => EXIT_CONFIG,
        Error::ModulusRequired => EXIT_MODULUS,
        _ => EXIT_NUMERIC,
    }
}

/// Parses arguments and runs a subcommand, returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let result = match cli.command {
        Command::Iterate { config, out: dir } => cmd_iterate(&config, dir.as_deref(), &mut out),
        Command::Rates(args) => cmd_rates(&args, &mut out),
        Command::Verify { config, out: dir, timings } => cmd_verify(&config, dir.as_deref(), timings, &mut out),
    };
    match result {
        Ok(code) => code,
        Err((code, msg)) => {
            eprintln!("error: {msg}");
            code
        }
    }
}

type CmdResult = std::result::Result<i32, (i32, String)>;

fn fail(e: Error) -> (i32, String) {
    (exit_code(&e), e.to_string())
}

fn io_fail(e: std::io::Error) -> (i32, String) {
    (EXIT_IO, e.to_string())
}

fn load(config: &Path, dir: Option<&Path>) -> std::result::Result<ExperimentConfig, (i32, String)> {
    let mut cfg = read_config(config).map_err(|e| (EXIT_CONFIG, e.to_string()))?;
    if let Some(d) = dir {
        cfg.output = d.to_path_buf();
    }
    Ok(cfg)
}

fn cmd_iterate(config: &Path, dir: Option<&Path>, out: &mut dyn Write) -> CmdResult {
    let cfg = load(config, dir)?;
    std::fs::create_dir_all(&cfg.output).map_err(io_fail)?;
    for inst in &cfg.instances {
        let steps = inst.steps.unwrap_or(1000);
        let trace = halpern_orbit(&inst.op, &inst.space, &inst.schedule, &inst.u, &inst.x0, steps).map_err(fail)?;
        let path = resolvent_path(&inst.op, &inst.space, &inst.u, cfg.path_length, cfg.tol).map_err(fail)?;
        let tp = cfg.output.join(format!("{}.trace.csv", inst.name));
        let pp = cfg.output.join(format!("{}.path.csv", inst.name));
        save_trace(&trace, &tp).map_err(fail)?;
        save_path(&path, &pp).map_err(fail)?;
        writeln!(out, "{}: {} and {}", inst.name, tp.display(), pp.display()).map_err(io_fail)?;
    }
    Ok(EXIT_OK)
}

/// Inputs for one rate certificate.
#[derive(Debug, Clone)]
pub struct RateQuery {
    pub which: Which,
    pub eps: Rational,
    pub m: Rational,
    pub schedule: Schedule,
    pub g: Counterfunction,
    pub budget: Budget,
    /// Modulus of continuity of the duality map; only `sigma` reads it.
    pub omega: Modulus,
    /// Use the closed-form ψ inside `sigma` instead of the general pipeline.
    pub closed_psi: bool,
}

pub fn certificate(q: &RateQuery) -> Result<RateResult> {
    let bundle = || -> Result<ModuliBundle> {
        let b = ModuliBundle::from_schedule(&q.schedule, q.m.clone(), q.omega.clone())?;
        Ok(if q.closed_psi { b.with_psi(Psi::ClosedForm) } else { b })
    };
    match q.which {
        Which::Psi => bundle().and_then(|b| psi_rate(&q.eps, &b)).map(RateResult::Exact),
        Which::PsiClosed => psi_closed_form(&q.eps, &q.m).map(RateResult::Exact),
        Which::Phi => bundle().and_then(|b| b.phi(&q.eps)).map(RateResult::Exact),
        Which::K => k_resolvent_meta(&q.eps, &q.g, &q.m, &q.budget),
        Which::Sigma => bundle().and_then(|b| sigma_with_resolvent_k(&q.eps, &q.g, &b, &q.budget)),
    }
}

fn cmd_rates(args: &RatesArgs, out: &mut dyn Write) -> CmdResult {
    let query = || -> Result<RateQuery> {
        Ok(RateQuery {
            which: args.which,
            eps: parse_rational(&args.eps)?,
            m: parse_rational(&args.m)?,
            schedule: parse_schedule(&args.schedule)?,
            g: args.g.parse()?,
            budget: match &args.budget {
                Some(b) => Budget::parse(b)?,
                None => Budget::from_env()?,
            },
            omega: match args.modulus {
                ModulusArg::Identity => Modulus::Identity,
                ModulusArg::Empirical => Modulus::Empirical { space: Space::hilbert(2)?, samples: 1000 },
            },
            closed_psi: args.psi == PsiArg::Closed,
        })
    };
    let result = query().and_then(|q| certificate(&q)).map_err(fail)?;
    writeln!(out, "{result}").map_err(io_fail)?;
    Ok(EXIT_OK)
}

fn uses_closed_form(schedule: &Schedule, m: &Rational, eps: &Rational) -> bool {
    matches!(schedule.kind(), ScheduleKind::Classic | ScheduleKind::NaturalShifted)
        && *m >= Rational::one()
        && *eps <= rat(3, 2)
}

/// ψ(ε) for an instance: the closed form where its regime applies, the general pipeline otherwise.
pub fn instance_psi(schedule: &Schedule, m: &Rational, eps: &Rational) -> Result<Natural> {
    if uses_closed_form(schedule, m, eps) {
        psi_closed_form(eps, m)
    } else {
        psi_rate(eps, &ModuliBundle::from_schedule(schedule, m.clone(), Modulus::Identity)?)
    }
}

struct Timer {
    on: bool,
    start: Instant,
}

impl Timer {
    fn start(on: bool) -> Self {
        Timer { on, start: Instant::now() }
    }

    fn stamp(&self, mut r: CheckRecord) -> CheckRecord {
        if self.on {
            r.elapsed_ms = Some(self.start.elapsed().as_secs_f64() * 1e3);
        }
        r
    }
}

fn error_record(check: &str, instance: &str, params: serde_json::Value, e: &Error) -> CheckRecord {
    let mut params = params;
    params["error"] = json!(e.to_string());
    CheckRecord::new(check, instance, params, "error")
}

/// All checks for one instance, in a fixed order.
pub fn verify_instance(cfg: &ExperimentConfig, inst: &Instance, timings: bool) -> Vec<CheckRecord> {
    let name = inst.name.as_str();
    let mut records = Vec::new();

    let t = Timer::start(timings);
    let m = match inst.checked_bound() {
        Ok(b) => {
            let mut r = CheckRecord::new("m-bound", name, json!({"M": b.value().to_string()}), "pass");
            r.bound = Some(b.value().to_string());
            records.push(t.stamp(r));
            b.value().clone()
        }
        Err(e @ Error::InstanceBound(_)) => {
            let mut params = json!({"M": inst.m_declared.as_ref().map(|m| m.to_string())});
            params["error"] = json!(e.to_string());
            records.push(t.stamp(CheckRecord::new("m-bound", name, params, "fail")));
            return records;
        }
        Err(e) => {
            records.push(t.stamp(error_record("m-bound", name, json!({}), &e)));
            return records;
        }
    };
    let m_f = to_f64(&m);

    let t = Timer::start(timings);
    let reach = [inst.space.norm(&inst.u), inst.space.norm(&inst.x0), 5.0].into_iter().fold(0.0, f64::max) * 2.0;
    let params = json!({"samples": CERTIFY_SAMPLES, "half_width": reach, "seed": cfg.seed});
    records.push(t.stamp(match certify_nonexpansive_seeded(&inst.op, &inst.space, CERTIFY_SAMPLES, reach, cfg.seed) {
        Ok(ok) => CheckRecord::new("nonexpansive", name, params, if ok { "pass" } else { "fail" }),
        Err(e) => error_record("nonexpansive", name, params, &e),
    }));

    // One orbit long enough for every ε.
    let mut rates = Vec::new();
    for eps in &cfg.epsilons {
        match instance_psi(&inst.schedule, &m, eps) {
            Ok(p) => rates.push((eps.clone(), Some(p))),
            Err(e) => {
                records.push(error_record("asymptotic-regularity", name, json!({"eps": eps.to_string()}), &e));
                rates.push((eps.clone(), None));
            }
        }
    }
    let longest = rates.iter().filter_map(|(_, p)| p.as_ref()).max().cloned().unwrap_or_default();
    let need = longest.to_u64().and_then(|p| p.checked_add(cfg.window)).filter(|n| *n <= MAX_TRACE);
    let Some(need) = need else {
        let e = Error::Budget(format!("orbit of length {longest} + {}", cfg.window));
        records.push(error_record("asymptotic-regularity", name, json!({}), &e));
        return records;
    };
    let steps = need.max(inst.steps.unwrap_or(0)).max(1);
    let trace = match halpern_orbit(&inst.op, &inst.space, &inst.schedule, &inst.u, &inst.x0, steps) {
        Ok(t) => t,
        Err(e) => {
            records.push(error_record("orbit", name, json!({"steps": steps}), &e));
            return records;
        }
    };
    for (eps, rate) in &rates {
        let Some(rate) = rate else { continue };
        let t = Timer::start(timings);
        let params = json!({"eps": eps.to_string(), "window": cfg.window});
        let r = match first_regularity_violation(&trace, eps, rate, Some(cfg.window)) {
            Ok(v) => {
                let mut r =
                    CheckRecord::new("asymptotic-regularity", name, params, if v.is_none() { "pass" } else { "fail" });
                r.witness = v.map(|n| n.to_string());
                r.bound = Some(format!("Exact {rate}"));
                r
            }
            Err(e) => error_record("asymptotic-regularity", name, params, &e),
        };
        records.push(t.stamp(r));
    }

    let path = match resolvent_path(&inst.op, &inst.space, &inst.u, cfg.path_length, cfg.tol) {
        Ok(p) => p,
        Err(e) => {
            records.push(error_record("resolvent-path", name, json!({"m_max": cfg.path_length}), &e));
            return records;
        }
    };
    for eps in &cfg.epsilons {
        for g in &cfg.counterfunctions {
            let t = Timer::start(timings);
            let params = json!({"eps": eps.to_string(), "g": g.to_string(), "M": m.to_string()});
            let r = match check_resolvent_metastability(&path, &inst.space, eps, g, &m, &cfg.budget) {
                Ok(rep) => {
                    let mut r = CheckRecord::new("resolvent-metastability", name, params, rep.status.outcome());
                    r.witness = rep.witness.map(|w| w.to_string());
                    r.bound = Some(rep.bound.to_string());
                    r
                }
                Err(e) => error_record("resolvent-metastability", name, params, &e),
            };
            records.push(t.stamp(r));
        }
    }

    records.push(orbit_bound_record(&trace, &path, inst, m_f, cfg.tol, timings));
    records.push(beta_record(&trace, &path, inst, m_f, timings));
    if let Some(eps) = cfg.epsilons.first() {
        records.push(descent_record(&trace, &path, inst, m_f, to_f64(eps), timings));
        for g in &cfg.counterfunctions {
            records.push(sigma_record(&trace, inst, &m, eps, g, &cfg.budget, timings));
        }
    }
    records
}

fn grid_in_trace(trace: &HalpernTrace, ns: &[u64]) -> Vec<u64> {
    ns.iter().copied().filter(|n| trace.point(*n).is_some()).collect()
}

fn grid_in_path(path: &ResolventPath, ms: &[u64]) -> Vec<u64> {
    ms.iter().copied().filter(|m| path.z(*m).is_some()).collect()
}

/// Iterates and resolvent points stay within M/2 of the known fixed point.
fn orbit_bound_record(
    trace: &HalpernTrace,
    path: &ResolventPath,
    inst: &Instance,
    m: f64,
    tol: f64,
    timings: bool,
) -> CheckRecord {
    let t = Timer::start(timings);
    let Some(p) = inst.op.known_fixed_point() else {
        let params = json!({"reason": "no known fixed point"});
        return t.stamp(CheckRecord::new("orbit-bound", &inst.name, params, "not-comparable"));
    };
    let far = |pts: &mut dyn Iterator<Item = &crate::spaces::Vector>| {
        pts.map(|x| inst.space.distance(x, p)).fold(0.0, f64::max)
    };
    let orbit = far(&mut trace.points.iter());
    let resolvents = far(&mut path.entries.iter().map(|e| &e.z));
    let holds = orbit <= m / 2.0 + 1e-9 && resolvents <= m / 2.0 + tol;
    let params = json!({"M": m, "tol": tol});
    let mut r = CheckRecord::new("orbit-bound", &inst.name, params, if holds { "pass" } else { "fail" });
    r.witness = Some(format!("orbit {orbit:.6e}, path {resolvents:.6e}"));
    r.bound = Some(format!("{:.6e}", m / 2.0));
    t.stamp(r)
}

fn beta_record(trace: &HalpernTrace, path: &ResolventPath, inst: &Instance, m: f64, timings: bool) -> CheckRecord {
    let t = Timer::start(timings);
    let ns = grid_in_trace(trace, &[10, 100, 1000]);
    let ms = grid_in_path(path, &[1, 5, 25]);
    let params = json!({"n": ns, "m": ms});
    t.stamp(match beta_diagnostics(trace, path, &inst.space, &inst.u, m, &ns, &ms) {
        Ok(rows) => {
            let bad = rows.iter().filter(|r| !r.holds).count();
            let mut r =
                CheckRecord::new("beta-diagnostics", &inst.name, params, if bad == 0 { "pass" } else { "fail" });
            r.witness = Some(format!("{bad} of {} rows fail", rows.len()));
            r
        }
        Err(e) => error_record("beta-diagnostics", &inst.name, params, &e),
    })
}

fn descent_record(
    trace: &HalpernTrace,
    path: &ResolventPath,
    inst: &Instance,
    m: f64,
    eps: f64,
    timings: bool,
) -> CheckRecord {
    let t = Timer::start(timings);
    let ms = grid_in_path(path, &[1, 5, 25]);
    let pairs: Vec<(u64, u64)> = [(10, 100), (100, 1000)]
        .into_iter()
        .filter(|(a, b)| trace.point(*a).is_some() && trace.point(*b).is_some())
        .collect();
    let params = json!({"m": ms, "pairs": pairs, "eps": eps});
    let mut bad = 0;
    let mut total = 0;
    for &mm in &ms {
        for &(n0, n) in &pairs {
            match check_descent_inequality(trace, path, &inst.space, &inst.u, mm, n0, n, m, eps) {
                Ok(c) => {
                    total += 1;
                    bad += usize::from(!c.holds);
                }
                Err(e) => return t.stamp(error_record("descent-inequality", &inst.name, params, &e)),
            }
        }
    }
    let mut r = CheckRecord::new("descent-inequality", &inst.name, params, if bad == 0 { "pass" } else { "fail" });
    r.witness = Some(format!("{bad} of {total} points fail"));
    t.stamp(r)
}

fn sigma_record(
    trace: &HalpernTrace,
    inst: &Instance,
    m: &Rational,
    eps: &Rational,
    g: &Counterfunction,
    budget: &Budget,
    timings: bool,
) -> CheckRecord {
    let t = Timer::start(timings);
    let params = json!({"eps": eps.to_string(), "g": g.to_string(), "M": m.to_string()});
    let omega = if inst.space.is_hilbert() {
        Modulus::Identity
    } else {
        Modulus::Empirical { space: inst.space, samples: 1000 }
    };
    let run = || -> Result<CheckRecord> {
        let mut bundle = ModuliBundle::from_schedule(&inst.schedule, m.clone(), omega)?;
        if uses_closed_form(&inst.schedule, m, eps) {
            bundle = bundle.with_psi(Psi::ClosedForm);
        }
        let bound = sigma_with_resolvent_k(eps, g, &bundle, budget)?;
        let (witness, status) = compare_witness(&trace.points, trace.start_index, &inst.space, eps, g, &bound)?;
        let mut r = CheckRecord::new("sigma-metastability", &inst.name, params.clone(), status.outcome());
        r.witness = witness.map(|w| w.to_string());
        r.bound = Some(bound.to_string());
        Ok(r)
    };
    t.stamp(match run() {
        Ok(r) => r,
        Err(Error::ModulusRequired) => {
            let mut p = params.clone();
            p["reason"] = json!("modulus required");
            CheckRecord::new("sigma-metastability", &inst.name, p, "not-comparable")
        }
        Err(e) => error_record("sigma-metastability", &inst.name, params.clone(), &e),
    })
}

/// Runs every instance (concurrently) and the global lemma simulations; records are ordered
/// by instance as listed in the config.
pub fn verify_all(cfg: &ExperimentConfig, timings: bool) -> Vec<CheckRecord> {
    if cfg.instances.is_empty() {
        return Vec::new();
    }
    let per_instance: Vec<Vec<CheckRecord>> = std::thread::scope(|s| {
        let handles: Vec<_> =
            cfg.instances.iter().map(|inst| s.spawn(move || verify_instance(cfg, inst, timings))).collect();
        handles.into_iter().map(|h| h.join().expect("verification thread panicked")).collect()
    });
    let mut records: Vec<CheckRecord> = per_instance.into_iter().flatten().collect();

    let t = Timer::start(timings);
    let params = json!({"count": 100, "seed": cfg.seed});
    records.push(t.stamp(match simulate_lemma_recurrences_detailed(100, cfg.seed) {
        Ok(s) => {
            let mut r =
                CheckRecord::new("lemma-simulations", "-", params, if s.failures.is_empty() { "pass" } else { "fail" });
            r.witness = s.failures.first().cloned();
            r
        }
        Err(e) => error_record("lemma-simulations", "-", params, &e),
    }));
    records
}

fn cmd_verify(config: &Path, dir: Option<&Path>, timings: bool, out: &mut dyn Write) -> CmdResult {
    let cfg = load(config, dir)?;
    let records = verify_all(&cfg, timings);
    std::fs::create_dir_all(&cfg.output).map_err(io_fail)?;
    let report = cfg.output.join("report.json");
    let mut text = serde_json::to_string_pretty(&records).map_err(|e| (EXIT_IO, e.to_string()))?;
    text.push('\n');
    std::fs::write(&report, text).map_err(io_fail)?;
    let count = |o: &str| records.iter().filter(|r| r.outcome == o).count();
    for r in records.iter().filter(|r| r.outcome == "fail" || r.outcome == "error") {
        writeln!(out, "{r}").map_err(io_fail)?;
    }
    writeln!(
        out,
        "{} checks: {} pass, {} fail, {} not comparable, {} error; report at {}",
        records.len(),
        count("pass"),
        count("fail"),
        count("not-comparable"),
        count("error"),
        report.display()
    )
    .map_err(io_fail)?;
    Ok(if count("error") > 0 {
        EXIT_NUMERIC
    } else if count("fail") > 0 {
        EXIT_CHECK_FAILED
    } else {
        EXIT_OK
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rates(args: &[&str]) -> (i32, String) {
        let cli =
            Cli::try_parse_from(std::iter::once("halpern").chain(std::iter::once("rates")).chain(args.iter().copied()));
        let Command::Rates(a) = cli.unwrap().command else { unreachable!() };
        let mut buf = Vec::new();
        let code = match cmd_rates(&a, &mut buf) {
            Ok(c) => c,
            Err((c, _)) => c,
        };
        (code, String::from_utf8(buf).unwrap())
    }

    #[test]
    fn rates_examples() {
        assert_eq!(rates(&["--which", "psi-closed", "--M", "1", "--eps", "1"]), (0, "Exact 36\n".into()));
        assert_eq!(rates(&["--which", "K", "--M", "1", "--eps", "1/2", "--g", "affine 1 1"]), (0, "Exact 4\n".into()));
        assert_eq!(rates(&["--which", "psi", "--M", "1", "--eps", "1"]), (0, "Exact 40\n".into()));
        let (code, text) = rates(&["--which", "sigma", "--M", "2", "--eps", "1", "--g", "id"]);
        assert_eq!(code, 0);
        assert!(text.starts_with("BudgetExceeded lower="), "{text}");
        assert_eq!(rates(&["--which", "sigma", "--M", "2", "--eps", "1", "--modulus", "empirical"]).0, EXIT_MODULUS);
        assert_eq!(rates(&["--which", "psi-closed", "--M", "1", "--eps", "2"]).0, EXIT_CONFIG);
        assert_eq!(rates(&["--which", "K", "--M", "1", "--eps", "1/2", "--g", "affine 1"]).0, EXIT_CONFIG);
    }

    #[test]
    fn bad_flags_exit_2() {
        assert_eq!(run(["halpern", "rates", "--which", "nope", "--M", "1", "--eps", "1"]), EXIT_CONFIG);
        assert_eq!(run(["halpern", "frobnicate"]), EXIT_CONFIG);
    }
}
