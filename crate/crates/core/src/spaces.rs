//! Finite-dimensional normed spaces: norms, the normalized duality map, moduli of
//! continuity for it, and numerical probes of the classical geometric inequalities.

use std::fmt;

use num_rational::Rational64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::numeric::{to_f64, Rational};

/// Dense point of a finite-dimensional space. All coordinates are finite.
#[derive(Debug, Clone, PartialEq)]
pub struct Vector(Vec<f64>);

impl Vector {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::InvalidParameter("vector must have positive dimension".into()));
        }
        if let Some(bad) = coords.iter().find(|c| !c.is_finite()) {
            return Err(Error::NonFinite(format!("vector coordinate {bad}")));
        }
        Ok(Vector(coords))
    }

    pub fn zeros(dim: usize) -> Self {
        Vector(vec![0.0; dim.max(1)])
    }

    pub fn basis(dim: usize, i: usize) -> Self {
        let mut v = vec![0.0; dim];
        v[i] = 1.0;
        Vector(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|c| *c == 0.0)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }

    pub(crate) fn from_raw(coords: Vec<f64>) -> Self {
        Vector(coords)
    }

    pub fn add(&self, other: &Vector) -> Vector {
        Vector(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &Vector) -> Vector {
        Vector(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn scale(&self, s: f64) -> Vector {
        Vector(self.0.iter().map(|a| a * s).collect())
    }

    /// `a·self + b·other`
    pub fn lin_comb(&self, a: f64, other: &Vector, b: f64) -> Vector {
        Vector(self.0.iter().zip(&other.0).map(|(x, y)| a * x + b * y).collect())
    }

    pub fn check_dim(&self, dim: usize) -> Result<()> {
        if self.dim() == dim {
            Ok(())
        } else {
            Err(Error::DimensionMismatch { expected: dim, got: self.dim() })
        }
    }
}

impl fmt::Display for Vector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|c| c.to_string()).collect();
        write!(f, "({})", parts.join(", "))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Geometry {
    Hilbert,
    /// ℓ_p with rational exponent 1 < p < ∞.
    Lp(Rational64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Space {
    dim: usize,
    geometry: Geometry,
}

/// Value of the duality map at a point, with both norms recorded.
#[derive(Debug, Clone, PartialEq)]
pub struct DualityValue {
    pub functional: Vector,
    pub primal_norm: f64,
    pub dual_norm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubdifferentialCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothnessProbe {
    pub lower: f64,
    pub quotient: f64,
    pub upper: f64,
    pub holds: bool,
}

fn p_norm(coords: &[f64], p: f64) -> f64 {
    let scale = coords.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    if scale == 0.0 {
        return 0.0;
    }
    let s: f64 = coords.iter().map(|c| (c.abs() / scale).powf(p)).sum();
    scale * s.powf(1.0 / p)
}

fn l2_norm(coords: &[f64]) -> f64 {
    let scale = coords.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    if scale == 0.0 {
        return 0.0;
    }
    let s: f64 = coords.iter().map(|c| (c / scale) * (c / scale)).sum();
    scale * s.sqrt()
}

impl Space {
    pub fn hilbert(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be positive".into()));
        }
        Ok(Space { dim, geometry: Geometry::Hilbert })
    }

    pub fn lp(dim: usize, p: Rational64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be positive".into()));
        }
        if p <= Rational64::from_integer(1) {
            return Err(Error::InvalidParameter(format!("exponent p must exceed 1, got {p}")));
        }
        // p = 2 is the Euclidean case; keep it under the Hilbert branch so J is exactly the identity.
        if p == Rational64::from_integer(2) {
            return Self::hilbert(dim);
        }
        Ok(Space { dim, geometry: Geometry::Lp(p) })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn geometry(&self) -> Geometry {
        self.geometry
    }

    pub fn is_hilbert(&self) -> bool {
        matches!(self.geometry, Geometry::Hilbert)
    }

    /// Exponent p as a float (2 for Hilbert space).
    pub fn p(&self) -> f64 {
        match self.geometry {
            Geometry::Hilbert => 2.0,
            Geometry::Lp(p) => *p.numer() as f64 / *p.denom() as f64,
        }
    }

    /// Conjugate exponent q with 1/p + 1/q = 1.
    pub fn q(&self) -> f64 {
        let p = self.p();
        p / (p - 1.0)
    }

    pub fn norm(&self, x: &Vector) -> f64 {
        match self.geometry {
            Geometry::Hilbert => l2_norm(x.coords()),
            Geometry::Lp(_) => p_norm(x.coords(), self.p()),
        }
    }

    /// Norm of a functional given by its coordinates (the q-norm).
    pub fn dual_norm(&self, f: &Vector) -> f64 {
        match self.geometry {
            Geometry::Hilbert => l2_norm(f.coords()),
            Geometry::Lp(_) => p_norm(f.coords(), self.q()),
        }
    }

    pub fn distance(&self, x: &Vector, y: &Vector) -> f64 {
        self.norm(&x.sub(y))
    }

    /// Evaluation ⟨x, f⟩ of a functional on a point.
    pub fn pairing(&self, x: &Vector, f: &Vector) -> f64 {
        x.coords().iter().zip(f.coords()).map(|(a, b)| a * b).sum()
    }

    /// Inner product; only meaningful in Hilbert geometry.
    pub fn inner(&self, x: &Vector, y: &Vector) -> f64 {
        self.pairing(x, y)
    }

    pub fn check(&self, x: &Vector) -> Result<()> {
        x.check_dim(self.dim)
    }

    /// Normalized duality map. `J(0) = 0`.
    pub fn duality_map(&self, x: &Vector) -> Result<DualityValue> {
        self.check(x)?;
        let functional = match self.geometry {
            Geometry::Hilbert => x.clone(),
            Geometry::Lp(_) => {
                let n = self.norm(x);
                if n == 0.0 {
                    Vector::zeros(self.dim)
                } else {
                    let p = self.p();
                    // ‖x‖^{2-p}|x_i|^{p-1} sign(x_i), written as ‖x‖·(|x_i|/‖x‖)^{p-1} to stay in range.
                    Vector::from_raw(x.coords().iter().map(|c| n * (c.abs() / n).powf(p - 1.0) * c.signum()).collect())
                }
            }
        };
        let primal_norm = self.norm(x);
        let dual_norm = self.dual_norm(&functional);
        Ok(DualityValue { functional, primal_norm, dual_norm })
    }

    /// Compares `‖x+y‖²` with `‖x‖² + 2⟨y, J(x+y)⟩`.
    pub fn subdifferential_check(&self, x: &Vector, y: &Vector) -> Result<SubdifferentialCheck> {
        self.check(x)?;
        self.check(y)?;
        let s = x.add(y);
        let ns = self.norm(&s);
        let nx = self.norm(x);
        let j = self.duality_map(&s)?;
        let lhs = ns * ns;
        let rhs = nx * nx + 2.0 * self.pairing(y, &j.functional);
        let holds = lhs <= rhs + 1e-9 * rhs.abs().max(1.0);
        Ok(SubdifferentialCheck { lhs, rhs, holds })
    }

    /// Brackets the difference quotient `(‖x+λy‖−‖x‖)/λ` between the duality-map
    /// directional values at `x` and at `x+λy`, for unit vectors `x` and `y`.
    pub fn smoothness_probe(&self, x: &Vector, y: &Vector, lambda: f64) -> Result<SmoothnessProbe> {
        self.check(x)?;
        self.check(y)?;
        if lambda == 0.0 || !lambda.is_finite() {
            return Err(Error::InvalidParameter("λ must be a nonzero finite real".into()));
        }
        for (name, v) in [("x", x), ("y", y)] {
            let n = self.norm(v);
            if (n - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidParameter(format!("{name} is not a unit vector (norm {n})")));
            }
        }
        let shifted = x.lin_comb(1.0, y, lambda);
        let ns = self.norm(&shifted);
        if ns == 0.0 {
            return Err(Error::DegenerateProbe);
        }
        let nx = self.norm(x);
        let lower = self.pairing(y, &self.duality_map(x)?.functional) / nx;
        let quotient = (ns - nx) / lambda;
        let upper = self.pairing(y, &self.duality_map(&shifted)?.functional) / ns;
        let slack = 1e-9;
        let holds = if lambda > 0.0 {
            lower <= quotient + slack && quotient <= upper + slack
        } else {
            lower + slack >= quotient && quotient + slack >= upper
        };
        Ok(SmoothnessProbe { lower, quotient, upper, holds })
    }

    /// Largest δ from a fixed grid for which sampled pairs with `‖x‖,‖y‖ ≤ M` and
    /// `‖x−y‖ < δ` always satisfied `‖J(x)−J(y)‖ < ε`. An estimate, not a certificate.
    ///
    /// The grid is `2M` (the diameter of the ball) followed by `ε·2^{-k}` for `k = 0..=40`
    /// below it, scanned from the top.
    pub fn estimate_modulus(&self, m: f64, eps: f64, samples: usize) -> Result<f64> {
        self.estimate_modulus_seeded(m, eps, samples, 0x006d_6f64_756c_7573)
    }

    pub fn estimate_modulus_seeded(&self, m: f64, eps: f64, samples: usize, seed: u64) -> Result<f64> {
        if !(m > 0.0 && eps > 0.0) || samples == 0 {
            return Err(Error::InvalidParameter("M, ε must be positive and samples ≥ 1".into()));
        }
        let top = 2.0 * m;
        let mut grid = vec![top];
        grid.extend((0..=40).map(|k| eps * 0.5f64.powi(k)).filter(|d| *d < top));

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for &delta in &grid {
            if self.modulus_holds(m, eps, delta, samples, &mut rng)? {
                return Ok(delta);
            }
        }
        Ok(*grid.last().unwrap_or(&top))
    }

    fn modulus_holds(&self, m: f64, eps: f64, delta: f64, samples: usize, rng: &mut ChaCha8Rng) -> Result<bool> {
        let mut accepted = 0;
        let mut attempts = 0;
        while accepted < samples && attempts < 4 * samples {
            attempts += 1;
            let x = self.random_in_ball(m, rng);
            let dir = self.random_unit(rng);
            let h = dir.scale(delta * rng.gen::<f64>());
            let mut y = x.add(&h);
            let ny = self.norm(&y);
            if ny > m {
                y = y.scale(m / ny);
            }
            if self.distance(&x, &y) >= delta {
                continue;
            }
            accepted += 1;
            let jx = self.duality_map(&x)?.functional;
            let jy = self.duality_map(&y)?.functional;
            if self.dual_norm(&jx.sub(&jy)) >= eps {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Uniformly random direction of unit norm (coordinates drawn from [-1, 1]).
    pub fn random_unit<R: Rng>(&self, rng: &mut R) -> Vector {
        loop {
            let v = Vector::from_raw((0..self.dim).map(|_| rng.gen_range(-1.0..=1.0)).collect());
            let n = self.norm(&v);
            if n > 1e-3 {
                let u = v.scale(1.0 / n);
                // A second normalization pass pulls the norm to within an ulp or two of 1.
                let nu = self.norm(&u);
                return u.scale(1.0 / nu);
            }
        }
    }

    pub fn random_in_ball<R: Rng>(&self, radius: f64, rng: &mut R) -> Vector {
        self.random_unit(rng).scale(radius * rng.gen::<f64>())
    }

    pub fn random_in_box<R: Rng>(&self, half_width: f64, rng: &mut R) -> Vector {
        Vector::from_raw((0..self.dim).map(|_| rng.gen_range(-half_width..=half_width)).collect())
    }
}

impl fmt::Display for Space {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.geometry {
            Geometry::Hilbert => write!(f, "hilbert({})", self.dim),
            Geometry::Lp(p) => write!(f, "l{}({})", p, self.dim),
        }
    }
}

/// Modulus of uniform continuity ω for the duality map.
#[derive(Debug, Clone, PartialEq)]
pub enum Modulus {
    /// ω(M, ε) = ε; exact in Hilbert space.
    Identity,
    /// User-certified `(M, ε, ω)` triples.
    UserTable(Vec<(Rational, Rational, Rational)>),
    /// Sampled estimate; never treated as a certificate.
    Empirical { space: Space, samples: usize },
}

impl Modulus {
    pub fn user_table(entries: Vec<(Rational, Rational, Rational)>) -> Result<Self> {
        use num_traits::Signed;
        for (m, e, w) in &entries {
            if !(m.is_positive() && e.is_positive() && w.is_positive()) {
                return Err(Error::InvalidParameter(format!("modulus entry ({m}, {e}, {w}) must be positive")));
            }
        }
        for a in &entries {
            for b in &entries {
                if a.0 == b.0 && a.1 < b.1 && a.2 > b.2 {
                    return Err(Error::InvalidParameter(format!(
                        "modulus not monotone in ε at M = {}: ω({}) = {} > ω({}) = {}",
                        a.0, a.1, a.2, b.1, b.2
                    )));
                }
            }
        }
        Ok(Modulus::UserTable(entries))
    }

    /// A certified value of ω(M, ε), if this modulus can provide one.
    ///
    /// Table lookups use any entry with `M' ≥ M` and `ε' ≤ ε`, which remains a valid
    /// witness; the largest such ω is returned.
    pub fn certified(&self, m: &Rational, eps: &Rational) -> Option<Rational> {
        match self {
            Modulus::Identity => Some(eps.clone()),
            Modulus::UserTable(entries) => {
                entries.iter().filter(|(em, ee, _)| em >= m && ee <= eps).map(|(_, _, w)| w.clone()).max()
            }
            Modulus::Empirical { .. } => None,
        }
    }

    /// Float evaluation; empirical moduli run the sampler.
    pub fn evaluate(&self, m: &Rational, eps: &Rational) -> Result<f64> {
        match self {
            Modulus::Empirical { space, samples } => space.estimate_modulus(to_f64(m), to_f64(eps), *samples),
            _ => self.certified(m, eps).map(|w| to_f64(&w)).ok_or(Error::ModulusRequired),
        }
    }
}
