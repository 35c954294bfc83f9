//! Catalog of nonexpansive self-maps with known fixed points.

use std::fmt;

use nalgebra::DMatrix;
use num_traits::Zero;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::numeric::{nat, Rational};
use crate::spaces::{Space, Vector};

const NONEXPANSIVE_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum OpKind {
    /// Rotation by `angle` radians in the plane of the first two coordinates.
    Rotation {
        angle: f64,
    },
    /// Reflection through the hyperplane through 0 with the given normal.
    Reflection {
        normal: Vector,
    },
    ProjectionBall {
        center: Vector,
        radius: f64,
    },
    /// Coordinatewise clamp; nonexpansive in every ℓ_p.
    ProjectionBox {
        lows: Vector,
        highs: Vector,
    },
    /// `x ↦ Ax + b` with Euclidean operator norm of `A` at most 1.
    AffineContractive {
        matrix: Vec<Vec<f64>>,
        offset: Vector,
    },
    /// Applied left to right: the first operator acts first.
    Composition(Vec<NonexpansiveOp>),
    /// `x ↦ (1−λ)x + λSx`.
    Averaged {
        op: Box<NonexpansiveOp>,
        weight: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct NonexpansiveOp {
    kind: OpKind,
    known_fixed_point: Option<Vector>,
}

/// Bound `M ≥ 2·max{‖p−x₀‖, ‖p−u‖}` on an instance, a multiple of 1/64.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceBound {
    m: Rational,
}

impl InstanceBound {
    /// Wraps a user-supplied `M`, checking it against the instance.
    pub fn new(m: Rational, op: &NonexpansiveOp, space: &Space, u: &Vector, x0: &Vector) -> Result<Self> {
        let need = instance_radius(op, space, u, x0)? * 2.0;
        let have = crate::numeric::to_f64(&m);
        if have + 1e-12 < need {
            return Err(Error::InstanceBound(format!("M = {m} but 2·max{{‖p−x₀‖,‖p−u‖}} = {need}")));
        }
        Ok(InstanceBound { m })
    }

    pub fn value(&self) -> &Rational {
        &self.m
    }

    pub fn as_f64(&self) -> f64 {
        crate::numeric::to_f64(&self.m)
    }
}

fn instance_radius(op: &NonexpansiveOp, space: &Space, u: &Vector, x0: &Vector) -> Result<f64> {
    let p = op.known_fixed_point.as_ref().ok_or(Error::UnknownFixedPoint)?;
    space.check(p)?;
    space.check(u)?;
    space.check(x0)?;
    Ok(space.distance(p, x0).max(space.distance(p, u)))
}

/// Smallest `k/64` dominating `2·max{‖p−x₀‖, ‖p−u‖}`.
pub fn compute_instance_bound(op: &NonexpansiveOp, space: &Space, u: &Vector, x0: &Vector) -> Result<InstanceBound> {
    let r = instance_radius(op, space, u, x0)?;
    let k = (2.0 * r * 64.0).ceil();
    if !k.is_finite() {
        return Err(Error::NonFinite("instance bound".into()));
    }
    let m = if k <= 0.0 { Rational::zero() } else { Rational::new(nat(k as u64).into(), 64.into()) };
    Ok(InstanceBound { m })
}

fn operator_norm(matrix: &[Vec<f64>]) -> Result<f64> {
    let rows = matrix.len();
    let cols = matrix.first().map_or(0, Vec::len);
    if rows == 0 || rows != cols || matrix.iter().any(|r| r.len() != cols) {
        return Err(Error::InvalidParameter("affine map needs a nonempty square matrix".into()));
    }
    let m = DMatrix::from_fn(rows, cols, |i, j| matrix[i][j]);
    Ok(m.singular_values().max())
}

impl NonexpansiveOp {
    fn plain(kind: OpKind) -> Self {
        NonexpansiveOp { kind, known_fixed_point: None }
    }

    pub fn rotation(angle: f64) -> Result<Self> {
        if !angle.is_finite() {
            return Err(Error::NonFinite("rotation angle".into()));
        }
        Ok(Self::plain(OpKind::Rotation { angle }))
    }

    pub fn reflection(normal: Vector) -> Result<Self> {
        if normal.is_zero() {
            return Err(Error::InvalidParameter("reflection normal must be nonzero".into()));
        }
        Ok(Self::plain(OpKind::Reflection { normal }))
    }

    pub fn projection_ball(center: Vector, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidParameter("ball radius must be positive".into()));
        }
        Ok(Self::plain(OpKind::ProjectionBall { center, radius }))
    }

    pub fn projection_box(lows: Vector, highs: Vector) -> Result<Self> {
        lows.check_dim(highs.dim())?;
        if lows.coords().iter().zip(highs.coords()).any(|(l, h)| l > h) {
            return Err(Error::InvalidParameter("box needs lows ≤ highs".into()));
        }
        Ok(Self::plain(OpKind::ProjectionBox { lows, highs }))
    }

    /// Rejects matrices whose spectral norm exceeds 1.
    pub fn affine(matrix: Vec<Vec<f64>>, offset: Vector) -> Result<Self> {
        let n = operator_norm(&matrix)?;
        if n > 1.0 + 1e-12 {
            return Err(Error::InvalidParameter(format!("operator norm {n} exceeds 1")));
        }
        Self::affine_unchecked(matrix, offset)
    }

    /// Affine map without the operator-norm check, for exercising certification.
    pub fn affine_unchecked(matrix: Vec<Vec<f64>>, offset: Vector) -> Result<Self> {
        operator_norm(&matrix)?;
        offset.check_dim(matrix.len())?;
        Ok(Self::plain(OpKind::AffineContractive { matrix, offset }))
    }

    pub fn identity(dim: usize) -> Result<Self> {
        let matrix = (0..dim).map(|i| Vector::basis(dim, i).coords().to_vec()).collect();
        Self::affine(matrix, Vector::zeros(dim))
    }

    pub fn composition(ops: Vec<NonexpansiveOp>) -> Result<Self> {
        if ops.is_empty() {
            return Err(Error::InvalidParameter("composition needs at least one operator".into()));
        }
        Ok(Self::plain(OpKind::Composition(ops)))
    }

    pub fn averaged(op: NonexpansiveOp, weight: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&weight) {
            return Err(Error::InvalidParameter(format!("averaging weight {weight} outside [0, 1]")));
        }
        Ok(Self::plain(OpKind::Averaged { op: Box::new(op), weight }))
    }

    /// Attaches a fixed point, checking `‖Sp − p‖ ≤ 1e−9` in the Euclidean norm.
    pub fn with_fixed_point(mut self, p: Vector) -> Result<Self> {
        let sp = self.apply(&p)?;
        let gap = Space::hilbert(p.dim())?.distance(&sp, &p);
        if gap > 1e-9 {
            return Err(Error::InvalidParameter(format!("{p} is not a fixed point (‖Sp−p‖ = {gap})")));
        }
        self.known_fixed_point = Some(p);
        Ok(self)
    }

    pub fn kind(&self) -> &OpKind {
        &self.kind
    }

    pub fn known_fixed_point(&self) -> Option<&Vector> {
        self.known_fixed_point.as_ref()
    }

    pub fn apply(&self, x: &Vector) -> Result<Vector> {
        match &self.kind {
            OpKind::Rotation { angle } => {
                if x.dim() < 2 {
                    return Err(Error::DimensionMismatch { expected: 2, got: x.dim() });
                }
                let (s, c) = angle.sin_cos();
                let mut out = x.coords().to_vec();
                out[0] = c * x.coords()[0] - s * x.coords()[1];
                out[1] = s * x.coords()[0] + c * x.coords()[1];
                Ok(Vector::from_raw(out))
            }
            OpKind::Reflection { normal } => {
                x.check_dim(normal.dim())?;
                let nn: f64 = normal.coords().iter().map(|c| c * c).sum();
                let dot: f64 = x.coords().iter().zip(normal.coords()).map(|(a, b)| a * b).sum();
                Ok(x.lin_comb(1.0, normal, -2.0 * dot / nn))
            }
            OpKind::ProjectionBall { center, radius } => {
                x.check_dim(center.dim())?;
                let d = x.sub(center);
                let n = Space::hilbert(x.dim())?.norm(&d);
                if n <= *radius {
                    Ok(x.clone())
                } else {
                    Ok(center.lin_comb(1.0, &d, radius / n))
                }
            }
            OpKind::ProjectionBox { lows, highs } => {
                x.check_dim(lows.dim())?;
                Ok(Vector::from_raw(
                    x.coords()
                        .iter()
                        .zip(lows.coords().iter().zip(highs.coords()))
                        .map(|(c, (l, h))| c.clamp(*l, *h))
                        .collect(),
                ))
            }
            OpKind::AffineContractive { matrix, offset } => {
                x.check_dim(offset.dim())?;
                Ok(Vector::from_raw(
                    matrix
                        .iter()
                        .zip(offset.coords())
                        .map(|(row, b)| row.iter().zip(x.coords()).map(|(a, c)| a * c).sum::<f64>() + b)
                        .collect(),
                ))
            }
            OpKind::Composition(ops) => ops.iter().try_fold(x.clone(), |acc, op| op.apply(&acc)),
            OpKind::Averaged { op, weight } => {
                let sx = op.apply(x)?;
                Ok(x.lin_comb(1.0 - weight, &sx, *weight))
            }
        }
    }
}

impl fmt::Display for NonexpansiveOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn list(v: &Vector) -> String {
            v.coords().iter().map(|c| c.to_string()).collect::<Vec<_>>().join(",")
        }
        match &self.kind {
            OpKind::Rotation { angle } => write!(f, "rotation {angle}"),
            OpKind::Reflection { normal } => write!(f, "reflection {}", list(normal)),
            OpKind::ProjectionBall { center, radius } => write!(f, "ball {} {radius}", list(center)),
            OpKind::ProjectionBox { lows, highs } => write!(f, "box {} {}", list(lows), list(highs)),
            OpKind::AffineContractive { matrix, offset } => {
                let rows: Vec<String> =
                    matrix.iter().map(|r| r.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(",")).collect();
                write!(f, "affine {} {}", rows.join(";"), list(offset))
            }
            OpKind::Composition(ops) => {
                write!(f, "compose")?;
                for op in ops {
                    write!(f, " ({op})")?;
                }
                Ok(())
            }
            OpKind::Averaged { op, weight } => write!(f, "averaged {weight} ({op})"),
        }
    }
}

/// Samples pairs from `[-box, box]^d` and checks `‖Sx−Sy‖ ≤ ‖x−y‖(1+1e−9)` in the space's norm.
pub fn certify_nonexpansive(op: &NonexpansiveOp, space: &Space, samples: usize, half_width: f64) -> Result<bool> {
    certify_nonexpansive_seeded(op, space, samples, half_width, 0x6e6f_6e65_7870)
}

pub fn certify_nonexpansive_seeded(
    op: &NonexpansiveOp,
    space: &Space,
    samples: usize,
    half_width: f64,
    seed: u64,
) -> Result<bool> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..samples {
        let x = space.random_in_box(half_width, &mut rng);
        let y = space.random_in_box(half_width, &mut rng);
        let lhs = space.distance(&op.apply(&x)?, &op.apply(&y)?);
        if lhs > space.distance(&x, &y) * (1.0 + NONEXPANSIVE_SLACK) {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::rat;
    use std::f64::consts::PI;

    fn v(c: &[f64]) -> Vector {
        Vector::new(c.to_vec()).unwrap()
    }

    fn close(a: &Vector, b: &Vector) -> bool {
        a.coords().iter().zip(b.coords()).all(|(x, y)| (x - y).abs() < 1e-12)
    }

    #[test]
    fn apply_examples() {
        let r = NonexpansiveOp::rotation(PI / 2.0).unwrap();
        assert!(close(&r.apply(&v(&[1.0, 0.0])).unwrap(), &v(&[0.0, 1.0])));

        let b = NonexpansiveOp::projection_ball(v(&[0.0, 0.0]), 1.0).unwrap();
        assert!(close(&b.apply(&v(&[3.0, 4.0])).unwrap(), &v(&[0.6, 0.8])));

        let refl = NonexpansiveOp::reflection(v(&[1.0, 0.0])).unwrap();
        let avg = NonexpansiveOp::averaged(refl, 0.5).unwrap();
        assert_eq!(avg.apply(&v(&[2.0, 5.0])).unwrap(), v(&[0.0, 5.0]));
    }

    #[test]
    fn apply_dimension_mismatch() {
        let b = NonexpansiveOp::projection_ball(v(&[0.0, 0.0]), 1.0).unwrap();
        assert!(matches!(b.apply(&v(&[1.0])), Err(Error::DimensionMismatch { .. })));
        let r = NonexpansiveOp::rotation(1.0).unwrap();
        assert!(r.apply(&v(&[1.0])).is_err());
    }

    #[test]
    fn construction_rejects_expansive_affine_map() {
        let m = vec![vec![2.0, 0.0], vec![0.0, 2.0]];
        assert!(NonexpansiveOp::affine(m.clone(), Vector::zeros(2)).is_err());
        let op = NonexpansiveOp::affine_unchecked(m, Vector::zeros(2)).unwrap();
        let s = Space::hilbert(2).unwrap();
        assert!(!certify_nonexpansive(&op, &s, 100, 10.0).unwrap());
    }

    #[test]
    fn certification_of_catalog_maps() {
        let s = Space::hilbert(2).unwrap();
        for angle in [0.3, PI / 3.0, 2.0, -1.0] {
            assert!(certify_nonexpansive(&NonexpansiveOp::rotation(angle).unwrap(), &s, 2000, 10.0).unwrap());
        }
        let comp = NonexpansiveOp::composition(vec![
            NonexpansiveOp::projection_ball(v(&[1.0, 0.0]), 1.5).unwrap(),
            NonexpansiveOp::projection_box(v(&[-1.0, -0.5]), v(&[0.5, 2.0])).unwrap(),
        ])
        .unwrap();
        assert!(certify_nonexpansive(&comp, &s, 5000, 10.0).unwrap());
    }

    #[test]
    fn fixed_point_is_checked() {
        let r = NonexpansiveOp::rotation(1.0).unwrap();
        assert!(r.clone().with_fixed_point(v(&[0.0, 0.0])).is_ok());
        assert!(r.with_fixed_point(v(&[1.0, 0.0])).is_err());
    }

    #[test]
    fn instance_bounds() {
        let s = Space::hilbert(2).unwrap();
        let op = NonexpansiveOp::rotation(1.0).unwrap().with_fixed_point(v(&[0.0, 0.0])).unwrap();
        let z = v(&[0.0, 0.0]);
        assert_eq!(compute_instance_bound(&op, &s, &z, &z).unwrap().value(), &rat(0, 1));
        let b = compute_instance_bound(&op, &s, &v(&[1.0, 0.0]), &v(&[0.0, 1.0])).unwrap();
        assert_eq!(b.value(), &rat(2, 1));
        let b = compute_instance_bound(&op, &s, &v(&[0.6, 0.0]), &v(&[0.0, 0.7])).unwrap();
        assert_eq!(b.value(), &rat(90, 64));
        assert_eq!(b.as_f64(), 1.40625);

        let bare = NonexpansiveOp::rotation(1.0).unwrap();
        assert_eq!(compute_instance_bound(&bare, &s, &z, &z).unwrap_err(), Error::UnknownFixedPoint);

        assert!(InstanceBound::new(rat(1, 1), &op, &s, &v(&[1.0, 0.0]), &v(&[0.0, 1.0])).is_err());
        assert!(InstanceBound::new(rat(2, 1), &op, &s, &v(&[1.0, 0.0]), &v(&[0.0, 1.0])).is_ok());
    }
}
