//! Halpern orbits and resolvent paths, with CSV export and import.

use std::io::{Read, Write};
use std::path::Path;

use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::numeric::{rat, to_f64, Rational};
use crate::operators::NonexpansiveOp;
use crate::schedules::Schedule;
use crate::spaces::{Space, Vector};

pub const DEFAULT_TOL: f64 = 1e-10;

/// Iterates `x_0, x_1, ...` of `x_{n+1} = α_n·u + (1−α_n)·S x_n`, indexed from the
/// schedule's start index. `alphas[i]` is the step size used to produce `points[i+1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct HalpernTrace {
    pub schedule_id: String,
    pub start_index: u64,
    pub points: Vec<Vector>,
    pub alphas: Vec<f64>,
    pub residuals: Vec<f64>,
}

impl HalpernTrace {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// One past the last absolute index.
    pub fn end_index(&self) -> u64 {
        self.start_index + self.points.len() as u64
    }

    fn slot(&self, n: u64) -> Option<usize> {
        let i = n.checked_sub(self.start_index)? as usize;
        (i < self.points.len()).then_some(i)
    }

    pub fn point(&self, n: u64) -> Option<&Vector> {
        self.slot(n).map(|i| &self.points[i])
    }

    pub fn residual(&self, n: u64) -> Option<f64> {
        self.slot(n).map(|i| self.residuals[i])
    }

    pub fn alpha(&self, n: u64) -> Option<f64> {
        self.slot(n).and_then(|i| self.alphas.get(i).copied())
    }

    pub fn x0(&self) -> &Vector {
        &self.points[0]
    }
}

/// Runs `n_steps` steps of the Halpern recurrence, producing `n_steps + 1` points.
pub fn halpern_orbit(
    op: &NonexpansiveOp,
    space: &Space,
    schedule: &Schedule,
    u: &Vector,
    x0: &Vector,
    n_steps: u64,
) -> Result<HalpernTrace> {
    if n_steps == 0 {
        return Err(Error::InvalidParameter("orbit needs at least one step".into()));
    }
    space.check(u)?;
    space.check(x0)?;
    let start = schedule.start_index();
    let cap = n_steps as usize + 1;
    let mut points = Vec::with_capacity(cap);
    let mut alphas = Vec::with_capacity(cap);
    let mut residuals = Vec::with_capacity(cap);
    let mut x = x0.clone();
    for n in start..=start + n_steps {
        let sx = op.apply(&x)?;
        residuals.push(space.distance(&x, &sx));
        let a = to_f64(&schedule.alpha_at(n)?);
        alphas.push(a);
        points.push(x);
        if n == start + n_steps {
            break;
        }
        let next = u.lin_comb(a, &sx, 1.0 - a);
        if !next.is_finite() {
            return Err(Error::NonFinite(format!("iterate {} of the orbit", n + 1)));
        }
        x = next;
    }
    Ok(HalpernTrace { schedule_id: schedule.to_string(), start_index: start, points, alphas, residuals })
}

/// `z = t·u + (1−t)·S z`, solved by fixed-point iteration of the contraction.
///
/// Stops once the a-posteriori error estimate `q/(1−q)·‖z_{k+1}−z_k‖` or the a-priori
/// estimate `q^k/(1−q)·‖z_1−z_0‖` drops below `tol/2` and the residual is at most `tol`.
pub fn resolvent(
    op: &NonexpansiveOp,
    space: &Space,
    t: &Rational,
    u: &Vector,
    guess: &Vector,
    tol: f64,
) -> Result<Vector> {
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::InvalidParameter(format!("tolerance {tol} must be positive")));
    }
    if t.is_zero() {
        return Err(Error::NotAContraction);
    }
    if t.is_negative() || *t > Rational::one() {
        return Err(Error::InvalidParameter(format!("t = {t} outside (0, 1]")));
    }
    space.check(u)?;
    space.check(guess)?;
    if t.is_one() {
        return Ok(u.clone());
    }
    let tf = to_f64(t);
    let q = 1.0 - tf;
    let step = |z: &Vector| -> Result<Vector> { Ok(u.lin_comb(tf, &op.apply(z)?, q)) };

    let mut z = guess.clone();
    let mut next = step(&z)?;
    let d0 = space.distance(&next, &z);
    if d0 == 0.0 {
        return Ok(z);
    }
    let apriori = ((tol * (1.0 - q) / (2.0 * d0)).ln() / q.ln()).ceil().max(1.0);
    let cap = apriori as u64 + 10;
    for k in 1..=cap {
        let after = step(&next)?;
        let d = space.distance(&after, &next);
        if !d.is_finite() {
            return Err(Error::NonFinite("resolvent iterate".into()));
        }
        let settled = q / (1.0 - q) * space.distance(&next, &z) <= tol / 2.0 || k as f64 >= apriori;
        if settled && d <= tol {
            return Ok(next);
        }
        z = next;
        next = after;
    }
    Err(Error::IterationCap(cap))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResolventEntry {
    pub m: u64,
    pub z: Vector,
    pub residual: f64,
}

impl ResolventEntry {
    pub fn t(&self) -> f64 {
        1.0 / self.m as f64
    }
}

/// `z_{1/m}` for `m = 1, 2, ...`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResolventPath {
    pub entries: Vec<ResolventEntry>,
}

impl ResolventPath {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn z(&self, m: u64) -> Option<&Vector> {
        let i = m.checked_sub(1)? as usize;
        self.entries.get(i).map(|e| &e.z)
    }

    pub fn points(&self) -> Vec<Vector> {
        self.entries.iter().map(|e| e.z.clone()).collect()
    }
}

/// Solves for `z_{1/m}`, `m = 1..=m_max`, warm-starting each solve at the previous point.
pub fn resolvent_path(op: &NonexpansiveOp, space: &Space, u: &Vector, m_max: u64, tol: f64) -> Result<ResolventPath> {
    if m_max == 0 {
        return Err(Error::InvalidParameter("resolvent path needs m_max ≥ 1".into()));
    }
    let mut entries = Vec::with_capacity(m_max as usize);
    let mut guess = u.clone();
    for m in 1..=m_max {
        let t = rat(1, m as i64);
        let z = resolvent(op, space, &t, u, &guess, tol)?;
        let tz = u.lin_comb(1.0 / m as f64, &op.apply(&z)?, 1.0 - 1.0 / m as f64);
        let residual = space.distance(&z, &tz);
        guess = z.clone();
        entries.push(ResolventEntry { m, z, residual });
    }
    Ok(ResolventPath { entries })
}

fn csv_err(e: csv::Error) -> Error {
    Error::Parse(format!("csv: {e}"))
}

fn io_err(e: std::io::Error) -> Error {
    Error::Parse(format!("io: {e}"))
}

fn coord_header(prefix: &str, dim: usize) -> impl Iterator<Item = String> + '_ {
    (0..dim).map(move |i| format!("{prefix}_{i}"))
}

/// Columns `n,alpha,x_0..x_{d-1},residual`; floats use shortest round-trip formatting.
pub fn write_trace_csv<W: Write>(trace: &HalpernTrace, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let dim = trace.points.first().map_or(0, Vector::dim);
    let mut header = vec!["n".to_string(), "alpha".to_string()];
    header.extend(coord_header("x", dim));
    header.push("residual".into());
    w.write_record(&header).map_err(csv_err)?;
    for (i, x) in trace.points.iter().enumerate() {
        let mut row = vec![(trace.start_index + i as u64).to_string(), trace.alphas[i].to_string()];
        row.extend(x.coords().iter().map(f64::to_string));
        row.push(trace.residuals[i].to_string());
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(io_err)
}

/// Columns `m,t,z_0..z_{d-1},residual`.
pub fn write_path_csv<W: Write>(path: &ResolventPath, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let dim = path.entries.first().map_or(0, |e| e.z.dim());
    let mut header = vec!["m".to_string(), "t".to_string()];
    header.extend(coord_header("z", dim));
    header.push("residual".into());
    w.write_record(&header).map_err(csv_err)?;
    for e in &path.entries {
        let mut row = vec![e.m.to_string(), e.t().to_string()];
        row.extend(e.z.coords().iter().map(f64::to_string));
        row.push(e.residual.to_string());
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(io_err)
}

/// Parsed rows: leading index, second column, coordinates, trailing residual.
/// One parsed CSV row: index, parameter, coordinates, residual.
type Row = (u64, f64, Vec<f64>, f64);

fn read_rows<R: Read>(input: R, first: &str, second: &str) -> Result<Vec<Row>> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers().map_err(csv_err)?.clone();
    if header.len() < 4 || &header[0] != first || &header[1] != second || &header[header.len() - 1] != "residual" {
        return Err(Error::Parse(format!("unexpected csv header {:?}", header.iter().collect::<Vec<_>>())));
    }
    let num = |s: &str| s.parse::<f64>().map_err(|_| Error::Parse(format!("bad number '{s}'")));
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        let idx = rec[0].parse::<u64>().map_err(|_| Error::Parse(format!("bad index '{}'", &rec[0])))?;
        let coords = (2..rec.len() - 1).map(|i| num(&rec[i])).collect::<Result<Vec<_>>>()?;
        rows.push((idx, num(&rec[1])?, coords, num(&rec[rec.len() - 1])?));
    }
    Ok(rows)
}

pub fn read_trace_csv<R: Read>(input: R, schedule_id: &str) -> Result<HalpernTrace> {
    let rows = read_rows(input, "n", "alpha")?;
    let start_index = rows.first().map_or(0, |r| r.0);
    let mut trace = HalpernTrace {
        schedule_id: schedule_id.to_string(),
        start_index,
        points: Vec::with_capacity(rows.len()),
        alphas: Vec::with_capacity(rows.len()),
        residuals: Vec::with_capacity(rows.len()),
    };
    for (i, (n, a, x, r)) in rows.into_iter().enumerate() {
        if n != start_index + i as u64 {
            return Err(Error::Parse(format!("trace rows not consecutive at n = {n}")));
        }
        trace.points.push(Vector::new(x)?);
        trace.alphas.push(a);
        trace.residuals.push(r);
    }
    Ok(trace)
}

pub fn read_path_csv<R: Read>(input: R) -> Result<ResolventPath> {
    let rows = read_rows(input, "m", "t")?;
    let mut entries = Vec::with_capacity(rows.len());
    for (i, (m, _, z, residual)) in rows.into_iter().enumerate() {
        if m != i as u64 + 1 {
            return Err(Error::Parse(format!("path rows must run m = 1, 2, ...; found m = {m}")));
        }
        entries.push(ResolventEntry { m, z: Vector::new(z)?, residual });
    }
    Ok(ResolventPath { entries })
}

pub fn save_trace(trace: &HalpernTrace, path: &Path) -> Result<()> {
    write_trace_csv(trace, std::fs::File::create(path).map_err(io_err)?)
}

pub fn save_path(rp: &ResolventPath, path: &Path) -> Result<()> {
    write_path_csv(rp, std::fs::File::create(path).map_err(io_err)?)
}
