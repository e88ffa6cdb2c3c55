//! The Legendre curve `zy^2 = x(x - z)(x - lambda z)` over Q: exact group law,
//! multiplication by integers and points of fibered powers.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use thiserror::Error;

use crate::arith::{normalize_projective, ArithError, ProjectivePoint};

/// Largest order of a Q-rational torsion point (Mazur).
pub const MAX_RATIONAL_TORSION_ORDER: u32 = 12;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CurveError {
    #[error("lambda = {0} is not allowed (must avoid 0 and 1)")]
    BadLambda(BigRational),
    #[error("fiber parameters differ: {0} vs {1}")]
    LambdaMismatch(BigRational, BigRational),
    #[error("point {0} is not on the Legendre curve")]
    NotOnCurve(ProjectivePoint),
    #[error("expected a point of P^2, got {0} coordinates")]
    WrongDimension(usize),
    #[error("product point needs at least one component")]
    EmptyProduct,
    #[error(transparent)]
    Arith(#[from] ArithError),
}

fn check_lambda(lambda: &BigRational) -> Result<(), CurveError> {
    if lambda.is_zero() || lambda.is_one() {
        Err(CurveError::BadLambda(lambda.clone()))
    } else {
        Ok(())
    }
}

/// One fiber `E_lambda` of the Legendre family.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct LegendreCurve {
    lambda: BigRational,
}

impl LegendreCurve {
    pub fn new(lambda: BigRational) -> Result<Self, CurveError> {
        check_lambda(&lambda)?;
        Ok(LegendreCurve { lambda })
    }

    pub fn lambda(&self) -> &BigRational {
        &self.lambda
    }

    pub fn identity(&self) -> FiberPoint {
        FiberPoint {
            point: ProjectivePoint::from_i64s(&[0, 1, 0]).unwrap(),
            lambda: self.lambda.clone(),
        }
    }

    /// The three nontrivial 2-torsion points `(0,0)`, `(1,0)`, `(lambda,0)`.
    pub fn two_torsion(&self) -> [FiberPoint; 3] {
        let zero = BigRational::zero();
        let one = BigRational::one();
        [
            self.affine_point(&zero, &zero).unwrap(),
            self.affine_point(&one, &zero).unwrap(),
            self.affine_point(&self.lambda, &zero).unwrap(),
        ]
    }

    pub fn affine_point(&self, x: &BigRational, y: &BigRational) -> Result<FiberPoint, CurveError> {
        FiberPoint::new(
            normalize_projective(&[x.clone(), y.clone(), BigRational::one()])?,
            self.lambda.clone(),
        )
    }

    /// Right-hand side `x(x-1)(x-lambda)` of the affine equation.
    pub fn rhs(&self, x: &BigRational) -> BigRational {
        x * (x - BigRational::one()) * (x - &self.lambda)
    }
}

/// Exact check of `zy^2 = x(x - z)(x - lambda z)`.
pub fn on_curve(p: &ProjectivePoint, lambda: &BigRational) -> Result<bool, CurveError> {
    check_lambda(lambda)?;
    let c = p.coords();
    if c.len() != 3 {
        return Err(CurveError::WrongDimension(c.len()));
    }
    let (x, y, z) = (&c[0], &c[1], &c[2]);
    // Scale by the denominator of lambda to stay in integers.
    let a = lambda.numer();
    let b = lambda.denom();
    let lhs = b * z * y * y;
    let rhs = x * (x - z) * (b * x - a * z);
    Ok(lhs == rhs)
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Affine {
    Infinity,
    Point(BigRational, BigRational),
}

/// A Q-point of the fiber `E_lambda`, kept in canonical projective form.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct FiberPoint {
    point: ProjectivePoint,
    lambda: BigRational,
}

impl FiberPoint {
    pub fn new(point: ProjectivePoint, lambda: BigRational) -> Result<Self, CurveError> {
        if !on_curve(&point, &lambda)? {
            return Err(CurveError::NotOnCurve(point));
        }
        Ok(FiberPoint { point, lambda })
    }

    pub fn from_i64s(coords: [i64; 3], lambda: BigRational) -> Result<Self, CurveError> {
        Self::new(ProjectivePoint::from_i64s(&coords)?, lambda)
    }

    pub fn identity(lambda: BigRational) -> Result<Self, CurveError> {
        Ok(LegendreCurve::new(lambda)?.identity())
    }

    pub fn point(&self) -> &ProjectivePoint {
        &self.point
    }

    pub fn lambda(&self) -> &BigRational {
        &self.lambda
    }

    pub fn curve(&self) -> LegendreCurve {
        LegendreCurve {
            lambda: self.lambda.clone(),
        }
    }

    pub fn is_identity(&self) -> bool {
        self.point.coords()[2].is_zero()
    }

    /// Affine coordinates, `None` at the identity.
    pub fn affine(&self) -> Option<(BigRational, BigRational)> {
        match self.to_affine() {
            Affine::Infinity => None,
            Affine::Point(x, y) => Some((x, y)),
        }
    }

    fn to_affine(&self) -> Affine {
        let c = self.point.coords();
        if c[2].is_zero() {
            Affine::Infinity
        } else {
            let z = &c[2];
            Affine::Point(
                BigRational::new(c[0].clone(), z.clone()),
                BigRational::new(c[1].clone(), z.clone()),
            )
        }
    }

    fn from_affine(a: Affine, lambda: &BigRational) -> Self {
        let point = match a {
            Affine::Infinity => ProjectivePoint::from_i64s(&[0, 1, 0]).unwrap(),
            Affine::Point(x, y) => normalize_projective(&[x, y, BigRational::one()]).unwrap(),
        };
        FiberPoint {
            point,
            lambda: lambda.clone(),
        }
    }

    pub fn neg(&self) -> Self {
        let c = self.point.coords();
        let point = ProjectivePoint::from_integers(vec![c[0].clone(), -&c[1], c[2].clone()])
            .expect("negation keeps a nonzero coordinate");
        FiberPoint {
            point,
            lambda: self.lambda.clone(),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self, CurveError> {
        if self.lambda != other.lambda {
            return Err(CurveError::LambdaMismatch(
                self.lambda.clone(),
                other.lambda.clone(),
            ));
        }
        let sum = affine_add(&self.to_affine(), &other.to_affine(), &self.lambda);
        Ok(Self::from_affine(sum, &self.lambda))
    }

    pub fn double(&self) -> Self {
        let a = self.to_affine();
        Self::from_affine(affine_add(&a, &a, &self.lambda), &self.lambda)
    }

    /// `[n]P` by double-and-add.
    pub fn mul_n(&self, n: i64) -> Self {
        let base = if n < 0 { self.neg() } else { self.clone() };
        let base = base.to_affine();
        let mut k = n.unsigned_abs();
        let mut acc = Affine::Infinity;
        let mut pow = base;
        while k > 0 {
            if k & 1 == 1 {
                acc = affine_add(&acc, &pow, &self.lambda);
            }
            k >>= 1;
            if k > 0 {
                pow = affine_add(&pow, &pow, &self.lambda);
            }
        }
        Self::from_affine(acc, &self.lambda)
    }

    /// Smallest `n <= 12` with `[n]P = O`, or `None` if `P` has infinite order.
    pub fn rational_torsion_order(&self) -> Option<u32> {
        let base = self.to_affine();
        let mut acc = base.clone();
        for n in 1..=MAX_RATIONAL_TORSION_ORDER {
            if acc == Affine::Infinity {
                return Some(n);
            }
            acc = affine_add(&acc, &base, &self.lambda);
        }
        None
    }
}

impl fmt::Display for FiberPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, lambda={})", self.point, self.lambda)
    }
}

// Chord-tangent law on y^2 = x^3 - (1 + lambda) x^2 + lambda x.
fn affine_add(p: &Affine, q: &Affine, lambda: &BigRational) -> Affine {
    let (x1, y1, x2, y2) = match (p, q) {
        (Affine::Infinity, _) => return q.clone(),
        (_, Affine::Infinity) => return p.clone(),
        (Affine::Point(x1, y1), Affine::Point(x2, y2)) => (x1, y1, x2, y2),
    };
    let one = BigRational::one();
    let a2 = -(&one + lambda);
    let slope = if x1 == x2 {
        if (y1 + y2).is_zero() {
            return Affine::Infinity;
        }
        let three = BigRational::from_integer(BigInt::from(3));
        let two = BigRational::from_integer(BigInt::from(2));
        (three * x1 * x1 + &two * &a2 * x1 + lambda) / (two * y1)
    } else {
        (y2 - y1) / (x2 - x1)
    };
    let x3 = &slope * &slope - &a2 - x1 - x2;
    let y3 = -(y1 + &slope * (&x3 - x1));
    Affine::Point(x3, y3)
}

/// A point `(P_1, ..., P_g)` of the g-fold fibered power over one `lambda`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ProductPoint {
    components: Vec<FiberPoint>,
    lambda: BigRational,
}

impl ProductPoint {
    pub fn new(components: Vec<FiberPoint>) -> Result<Self, CurveError> {
        let lambda = components
            .first()
            .ok_or(CurveError::EmptyProduct)?
            .lambda
            .clone();
        if let Some(bad) = components.iter().find(|c| c.lambda != lambda) {
            return Err(CurveError::LambdaMismatch(lambda, bad.lambda.clone()));
        }
        Ok(ProductPoint { components, lambda })
    }

    pub fn components(&self) -> &[FiberPoint] {
        &self.components
    }

    pub fn lambda(&self) -> &BigRational {
        &self.lambda
    }

    pub fn g(&self) -> usize {
        self.components.len()
    }

    pub fn mul_n(&self, n: i64) -> Self {
        ProductPoint {
            components: self.components.iter().map(|c| c.mul_n(n)).collect(),
            lambda: self.lambda.clone(),
        }
    }
}
