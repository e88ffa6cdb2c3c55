use std::fmt;

use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};

use super::hyper::{periods, PeriodPair};
use super::weierstrass::{lambda_of_tau, r_of_tau, Lattice};
use super::{c, AnalyticError, C64};
use crate::legendre::FiberPoint;

// Two affine coordinates closer than this (relative) are treated as equal by
// the complex chord-tangent law.
const MERGE_TOL: f64 = 1e-9;
// Torus arguments this close to an integer pair are lattice points.
const LATTICE_TOL: f64 = 1e-12;
const GRID: usize = 64;
const MAX_NEWTON: usize = 80;
// Residual (scaled) accepted by the elliptic logarithm.
const ACCEPT_RESIDUAL: f64 = 1e-9;

/// Reduces `x` into `[0, 1)`.
pub(crate) fn wrap(x: f64) -> f64 {
    let r = x.rem_euclid(1.0);
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// Distance between `a` and `b` on `R/Z`.
pub(crate) fn circle_dist(a: f64, b: f64) -> f64 {
    let d = wrap(a - b);
    d.min(1.0 - d)
}

/// A point of `(R/Z)^(2g)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TorusCoordinate {
    entries: Vec<f64>,
}

impl TorusCoordinate {
    pub fn new(entries: Vec<f64>) -> Result<Self, AnalyticError> {
        if entries.len() % 2 != 0 || entries.is_empty() {
            return Err(AnalyticError::OddLength(entries.len()));
        }
        Ok(TorusCoordinate {
            entries: entries.into_iter().map(wrap).collect(),
        })
    }

    pub fn zero(g: usize) -> Self {
        TorusCoordinate {
            entries: vec![0.0; 2 * g],
        }
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn g(&self) -> usize {
        self.entries.len() / 2
    }

    /// The pair `(xi_{2k+1}, xi_{2k+2})` belonging to the `k`-th factor.
    pub fn pair(&self, k: usize) -> [f64; 2] {
        [self.entries[2 * k], self.entries[2 * k + 1]]
    }

    pub fn add(&self, other: &Self) -> Self {
        TorusCoordinate {
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(a, b)| wrap(a + b))
                .collect(),
        }
    }

    pub fn scale(&self, n: i64) -> Self {
        TorusCoordinate {
            entries: self.entries.iter().map(|a| wrap(a * n as f64)).collect(),
        }
    }

    /// Sup-norm distance on the torus.
    pub fn distance(&self, other: &Self) -> f64 {
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| circle_dist(*a, *b))
            .fold(0.0, f64::max)
    }
}

impl fmt::Display for TorusCoordinate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, e) in self.entries.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{}", e)?;
        }
        write!(f, ")")
    }
}

/// A point on `z y^2 = x (x - z)(x - lambda z)` over `C`, stored in the affine
/// chart `z = 1` or as the origin `[0:1:0]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ComplexFiberPoint {
    affine: Option<(C64, C64)>,
    lambda: C64,
}

impl ComplexFiberPoint {
    pub fn identity(lambda: C64) -> Self {
        ComplexFiberPoint {
            affine: None,
            lambda,
        }
    }

    pub fn affine_point(x: C64, y: C64, lambda: C64) -> Self {
        ComplexFiberPoint {
            affine: Some((x, y)),
            lambda,
        }
    }

    /// Embeds a rational point.
    pub fn embed(p: &FiberPoint) -> Self {
        let lambda = c(p.lambda().to_f64().unwrap_or(f64::NAN), 0.0);
        match p.affine() {
            None => Self::identity(lambda),
            Some((x, y)) => Self::affine_point(
                c(x.to_f64().unwrap_or(f64::NAN), 0.0),
                c(y.to_f64().unwrap_or(f64::NAN), 0.0),
                lambda,
            ),
        }
    }

    pub fn lambda(&self) -> C64 {
        self.lambda
    }

    pub fn is_identity(&self) -> bool {
        self.affine.is_none()
    }

    pub fn affine(&self) -> Option<(C64, C64)> {
        self.affine
    }

    /// Projective coordinates `[x : y : z]`.
    pub fn projective(&self) -> [C64; 3] {
        match self.affine {
            None => [c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)],
            Some((x, y)) => [x, y, c(1.0, 0.0)],
        }
    }

    /// `|y^2 - x (x - 1)(x - lambda)|`, scaled by the size of the terms.
    pub fn curve_residual(&self) -> f64 {
        match self.affine {
            None => 0.0,
            Some((x, y)) => {
                let rhs = x * (x - 1.0) * (x - self.lambda);
                (y * y - rhs).norm() / (1.0 + (y * y).norm().max(rhs.norm()))
            }
        }
    }

    /// Projective sine distance `|u ^ v| / (|u| |v|)`.
    pub fn distance(&self, other: &Self) -> f64 {
        let u = self.projective();
        let v = other.projective();
        let mut wedge = 0.0;
        for i in 0..3 {
            for j in i + 1..3 {
                wedge += (u[i] * v[j] - u[j] * v[i]).norm_sqr();
            }
        }
        let nu: f64 = u.iter().map(|a| a.norm_sqr()).sum();
        let nv: f64 = v.iter().map(|a| a.norm_sqr()).sum();
        (wedge / (nu * nv)).sqrt()
    }

    /// Distance after identifying `y` with `-y`.
    pub fn distance_up_to_sign(&self, other: &Self) -> f64 {
        self.distance(other).min(self.distance(&other.neg()))
    }

    pub fn neg(&self) -> Self {
        ComplexFiberPoint {
            affine: self.affine.map(|(x, y)| (x, -y)),
            lambda: self.lambda,
        }
    }

    /// Complex chord-tangent addition on `y^2 = x^3 - (1 + lambda) x^2 + lambda x`.
    pub fn add(&self, other: &Self) -> Self {
        let (x1, y1) = match self.affine {
            None => return *other,
            Some(p) => p,
        };
        let (x2, y2) = match other.affine {
            None => return *self,
            Some(p) => p,
        };
        let lambda = self.lambda;
        let a2 = -(lambda + 1.0);
        let near = |a: C64, b: C64| (a - b).norm() <= MERGE_TOL * (1.0 + a.norm().max(b.norm()));
        let m = if near(x1, x2) {
            if near(y1, -y2) {
                return Self::identity(lambda);
            }
            (x1 * x1 * 3.0 + a2 * x1 * 2.0 + lambda) / (y1 * 2.0)
        } else {
            (y2 - y1) / (x2 - x1)
        };
        let x3 = m * m - a2 - x1 - x2;
        let y3 = -(y1 + m * (x3 - x1));
        Self::affine_point(x3, y3, lambda)
    }

    pub fn double(&self) -> Self {
        self.add(self)
    }

    pub fn mul_n(&self, n: i64) -> Self {
        let mut acc = Self::identity(self.lambda);
        let mut base = if n < 0 { self.neg() } else { *self };
        let mut k = n.unsigned_abs();
        while k > 0 {
            if k & 1 == 1 {
                acc = acc.add(&base);
            }
            base = base.double();
            k >>= 1;
        }
        acc
    }
}

impl fmt::Display for ComplexFiberPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.affine {
            None => write!(f, "[0:1:0]"),
            Some((x, y)) => write!(f, "[{}:{}:1]", x, y),
        }
    }
}

/// Everything needed to move between a fiber and its torus coordinates.
#[derive(Clone, Copy, Debug)]
pub struct FiberContext {
    lambda: C64,
    tau: C64,
    periods: Option<PeriodPair>,
    lattice: Lattice,
    e1: C64,
    scale: C64,
    r3: C64,
    g2: C64,
}

impl FiberContext {
    /// The fiber over `lambda`, uniformized by `tau = T(lambda)`.
    pub fn new(lambda: C64) -> Result<Self, AnalyticError> {
        let p = periods(lambda)?;
        let mut ctx = Self::build(p.tau(), lambda)?;
        ctx.periods = Some(p);
        Ok(ctx)
    }

    /// The fiber over `Lambda(tau)`.
    pub fn from_tau(tau: C64) -> Result<Self, AnalyticError> {
        Self::build(tau, lambda_of_tau(tau)?)
    }

    fn build(tau: C64, lambda: C64) -> Result<Self, AnalyticError> {
        let lattice = Lattice::new(tau)?;
        let (e1, e2, e3) = lattice.e_values();
        let r = r_of_tau(tau)?;
        Ok(FiberContext {
            lambda,
            tau,
            periods: None,
            lattice,
            e1,
            scale: e2 - e1,
            r3: r * r * r,
            g2: (e1 * e1 + e2 * e2 + e3 * e3) * 2.0,
        })
    }

    pub fn lambda(&self) -> C64 {
        self.lambda
    }

    pub fn tau(&self) -> C64 {
        self.tau
    }

    pub fn periods(&self) -> Option<PeriodPair> {
        self.periods
    }

    /// The point with lattice-normalized argument `w` (periods `1` and `tau`).
    pub fn point_at(&self, w: C64) -> ComplexFiberPoint {
        let m = (w.im / self.tau.im).round();
        let v = w - self.tau * m;
        let v = c(v.re - v.re.round(), v.im);
        if v.norm() < LATTICE_TOL {
            return ComplexFiberPoint::identity(self.lambda);
        }
        match self.lattice.p_and_prime(v) {
            Ok((p, dp)) => ComplexFiberPoint::affine_point(
                (p - self.e1) / self.scale,
                dp / (self.r3 * 2.0),
                self.lambda,
            ),
            Err(_) => ComplexFiberPoint::identity(self.lambda),
        }
    }

    pub fn point_at_xi(&self, xi: [f64; 2]) -> ComplexFiberPoint {
        self.point_at(self.tau * xi[1] + xi[0])
    }

    fn residual(&self, w: C64, target: (C64, C64)) -> Option<(f64, C64, C64, C64, C64)> {
        let (p, dp) = self.lattice.p_and_prime(w).ok()?;
        let s1 = 1.0 + target.0.norm();
        let s2 = 1.0 + target.1.norm();
        let r1 = (p - target.0) / s1;
        let r2 = (dp - target.1) / s2;
        let ddp = p * p * 6.0 - self.g2 * 0.5;
        Some(((r1.norm_sqr() + r2.norm_sqr()).sqrt(), r1, r2, dp / s1, ddp / s2))
    }

    /// Elliptic logarithm: the torus coordinate `xi` with `point_at_xi(xi) = P`.
    pub fn xi_of(
        &self,
        point: &ComplexFiberPoint,
        guess: Option<[f64; 2]>,
    ) -> Result<[f64; 2], AnalyticError> {
        let (x, y) = match point.affine() {
            None => return Ok([0.0, 0.0]),
            Some(a) => a,
        };
        // Target values of (p, p') at the unknown argument.
        let target = (self.e1 + x * self.scale, y * self.r3 * 2.0);
        let score = |w: C64| self.residual(w, target).map(|r| r.0).unwrap_or(f64::INFINITY);

        let mut starts: Vec<C64> = Vec::new();
        if let Some(g) = guess {
            starts.push(self.tau * g[1] + g[0]);
        }
        // Near the origin p ~ w^-2 and p' ~ -2 w^-3.
        if target.0.norm() > 1.0 {
            let w0 = target.0.sqrt().inv();
            let dp0 = -(w0 * w0 * w0).inv() * 2.0;
            starts.push(if (dp0 - target.1).norm() <= (dp0 + target.1).norm() {
                w0
            } else {
                -w0
            });
        }
        let mut best = (f64::INFINITY, c(0.5, 0.0));
        for i in 0..GRID {
            for j in 0..GRID {
                let xi1 = (i as f64 + 0.5) / GRID as f64;
                let xi2 = (j as f64 + 0.5) / GRID as f64;
                let w = self.tau * xi2 + xi1;
                let s = score(w);
                if s < best.0 {
                    best = (s, w);
                }
            }
        }
        starts.push(best.1);

        let mut winner = (f64::INFINITY, c(0.0, 0.0));
        for start in starts {
            let (res, w) = self.newton(start, target);
            if res < winner.0 {
                winner = (res, w);
            }
            if winner.0 < 1e-13 {
                break;
            }
        }
        if !(winner.0 <= ACCEPT_RESIDUAL) {
            return Err(AnalyticError::NoConvergence(winner.0));
        }
        let w = winner.1;
        let xi2 = w.im / self.tau.im;
        let xi1 = w.re - self.tau.re * xi2;
        Ok([wrap(xi1), wrap(xi2)])
    }

    // Damped Gauss-Newton on (p(w) - p*, p'(w) - p'*). Both residuals are
    // holomorphic in w, so the least-squares step is a single complex number.
    fn newton(&self, start: C64, target: (C64, C64)) -> (f64, C64) {
        let mut w = start;
        let Some(mut cur) = self.residual(w, target) else {
            return (f64::INFINITY, w);
        };
        for _ in 0..MAX_NEWTON {
            let (res, r1, r2, j1, j2) = cur;
            if res < 1e-15 {
                break;
            }
            let den = j1.norm_sqr() + j2.norm_sqr();
            if den == 0.0 {
                break;
            }
            let step = -(j1.conj() * r1 + j2.conj() * r2) / den;
            let mut t = 1.0;
            let mut moved = false;
            for _ in 0..30 {
                let cand = w + step * t;
                if let Some(next) = self.residual(cand, target) {
                    if next.0 < res {
                        w = cand;
                        cur = next;
                        moved = true;
                        break;
                    }
                }
                t *= 0.5;
            }
            if !moved || (step * t).norm() < 1e-16 * (1.0 + w.norm()) {
                break;
            }
        }
        (cur.0, w)
    }
}

/// `exp(z, lambda)` on a single fiber.
pub fn exp_fiber(z: C64, lambda: C64) -> Result<ComplexFiberPoint, AnalyticError> {
    let ctx = FiberContext::new(lambda)?;
    let omega1 = ctx.periods.expect("built from lambda").omega1;
    Ok(ctx.point_at(z / omega1))
}

/// The `g`-fold product of [`exp_fiber`].
pub fn exp_map(z: &[C64], lambda: C64) -> Result<Vec<ComplexFiberPoint>, AnalyticError> {
    let ctx = FiberContext::new(lambda)?;
    let omega1 = ctx.periods.expect("built from lambda").omega1;
    Ok(z.iter().map(|zi| ctx.point_at(*zi / omega1)).collect())
}

/// `Omega(lambda) xi^T`, i.e. `omega1 xi_(2k+1) + omega2 xi_(2k+2)` per factor.
pub fn omega_times_xi(xi: &TorusCoordinate, lambda: C64) -> Result<Vec<C64>, AnalyticError> {
    let p = periods(lambda)?;
    Ok((0..xi.g())
        .map(|k| {
            let [a, b] = xi.pair(k);
            p.omega1 * a + p.omega2 * b
        })
        .collect())
}

/// Torus coordinates of a point on the fiber over its own `lambda`.
pub fn xi_map(point: &ComplexFiberPoint) -> Result<TorusCoordinate, AnalyticError> {
    let ctx = FiberContext::new(point.lambda())?;
    let xi = ctx.xi_of(point, None)?;
    TorusCoordinate::new(xi.to_vec())
}

/// Like [`xi_map`] with a prepared context and an optional warm start.
pub fn xi_map_from(
    point: &ComplexFiberPoint,
    ctx: &FiberContext,
    guess: Option<[f64; 2]>,
) -> Result<[f64; 2], AnalyticError> {
    ctx.xi_of(point, guess)
}

pub fn xi_map_product(points: &[ComplexFiberPoint]) -> Result<TorusCoordinate, AnalyticError> {
    let lambda = points.first().map(|p| p.lambda()).ok_or(AnalyticError::OddLength(0))?;
    let ctx = FiberContext::new(lambda)?;
    let mut entries = Vec::with_capacity(2 * points.len());
    for p in points {
        entries.extend(ctx.xi_of(p, None)?);
    }
    TorusCoordinate::new(entries)
}

/// `rho~_xi(tau)` for a single pair `xi = (xi1, xi2)`, on the fiber over `Lambda(tau)`.
pub fn rho_tilde(xi: [f64; 2], tau: C64) -> Result<ComplexFiberPoint, AnalyticError> {
    let ctx = FiberContext::from_tau(tau)?;
    if wrap(xi[0]) == 0.0 && wrap(xi[1]) == 0.0 {
        return Ok(ComplexFiberPoint::identity(ctx.lambda));
    }
    Ok(ctx.point_at_xi(xi))
}

pub fn rho_tilde_product(
    xi: &TorusCoordinate,
    tau: C64,
) -> Result<Vec<ComplexFiberPoint>, AnalyticError> {
    let ctx = FiberContext::from_tau(tau)?;
    Ok((0..xi.g()).map(|k| ctx.point_at_xi(xi.pair(k))).collect())
}

/// Monodromy around `lambda = 0`: `xi + 2 (xi2, 0, xi4, 0, ...)`.
pub fn monodromy_shift_0(xi: &TorusCoordinate) -> TorusCoordinate {
    let mut e = xi.entries.clone();
    for k in 0..xi.g() {
        e[2 * k] = wrap(e[2 * k] + 2.0 * e[2 * k + 1]);
    }
    TorusCoordinate { entries: e }
}

/// Monodromy around `lambda = 1`: `xi - 4 (0, xi1, 0, xi3, ...)`.
pub fn monodromy_shift_1(xi: &TorusCoordinate) -> TorusCoordinate {
    let mut e = xi.entries.clone();
    for k in 0..xi.g() {
        e[2 * k + 1] = wrap(e[2 * k + 1] - 4.0 * e[2 * k]);
    }
    TorusCoordinate { entries: e }
}

/// Componentwise relative difference of two points in the affine chart
/// `z = 1`; infinite if exactly one of them is the origin.
pub fn affine_difference(a: &ComplexFiberPoint, b: &ComplexFiberPoint) -> f64 {
    match (a.affine(), b.affine()) {
        (None, None) => 0.0,
        (Some((x1, y1)), Some((x2, y2))) => {
            ((x1 - x2).norm() / (1.0 + x1.norm())).max((y1 - y2).norm() / (1.0 + y1.norm()))
        }
        _ => f64::INFINITY,
    }
}

/// Residuals of the two cusp monodromy identities at `(xi, tau)`:
/// `rho_xi(tau + 2)` against `rho_{shift_0 xi}(tau)`, and
/// `rho_xi(tau / (1 - 4 tau))` against `rho_{shift_1 xi}(tau)`.
pub fn monodromy_residuals(xi: [f64; 2], tau: C64) -> Result<(f64, f64), AnalyticError> {
    let t = TorusCoordinate::new(xi.to_vec())?;
    let r0 = affine_difference(
        &rho_tilde(xi, tau + 2.0)?,
        &rho_tilde(monodromy_shift_0(&t).pair(0), tau)?,
    );
    let moved = tau / (tau * -4.0 + 1.0);
    let r1 = affine_difference(
        &rho_tilde(xi, moved)?,
        &rho_tilde(monodromy_shift_1(&t).pair(0), tau)?,
    );
    Ok((r0, r1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::tau_of_lambda;
    use num_bigint::BigInt;
    use num_rational::BigRational;

    fn lam() -> [C64; 4] {
        [c(0.5, 0.0), c(0.3, 0.2), c(0.7, -0.35), c(0.2, 0.0)]
    }

    #[test]
    fn torus_coordinate_wraps() {
        let t = TorusCoordinate::new(vec![1.25, -0.25]).unwrap();
        assert_eq!(t.entries(), &[0.25, 0.75]);
        assert_eq!(wrap(-1e-18), 0.0);
        assert!(matches!(
            TorusCoordinate::new(vec![0.1, 0.2, 0.3]),
            Err(AnalyticError::OddLength(3))
        ));
    }

    #[test]
    fn monodromy_examples() {
        let t = TorusCoordinate::new(vec![0.0, 0.3]).unwrap();
        let s = monodromy_shift_0(&t);
        assert!((s.entries()[0] - 0.6).abs() < 1e-15 && s.entries()[1] == 0.3);
        let t = TorusCoordinate::new(vec![0.3, 0.0]).unwrap();
        let s = monodromy_shift_1(&t);
        assert!(s.entries()[0] == 0.3 && circle_dist(s.entries()[1], -1.2) < 1e-15);
        let t = TorusCoordinate::new(vec![0.41, 0.0]).unwrap();
        assert_eq!(monodromy_shift_0(&t), t);
    }

    #[test]
    fn exp_basic() {
        for l in lam() {
            assert!(exp_fiber(c(0.0, 0.0), l).unwrap().is_identity());
            let p = periods(l).unwrap();
            let z = c(0.37, 0.11);
            let a = exp_fiber(z, l).unwrap();
            assert!(a.curve_residual() < 1e-10);
            assert!(a.distance(&exp_fiber(z + p.omega1, l).unwrap()) < 1e-10);
            assert!(a.distance(&exp_fiber(z + p.omega2, l).unwrap()) < 1e-10);
            let half = exp_fiber(p.omega1 * 0.5, l).unwrap();
            let (x, y) = half.affine().unwrap();
            assert!(y.norm() < 1e-9);
            assert!([c(0.0, 0.0), c(1.0, 0.0), l].iter().any(|r| (x - r).norm() < 1e-9));
        }
    }

    #[test]
    fn exp_is_a_homomorphism() {
        for l in lam() {
            for (z1, z2) in [(c(0.3, 0.1), c(0.45, -0.2)), (c(-0.8, 0.4), c(0.2, 0.9))] {
                let lhs = exp_fiber(z1 + z2, l).unwrap();
                let rhs = exp_fiber(z1, l).unwrap().add(&exp_fiber(z2, l).unwrap());
                assert!(lhs.distance(&rhs) < 1e-8, "{} vs {}", lhs, rhs);
                let dbl = exp_fiber(z1 * 2.0, l).unwrap();
                assert!(dbl.distance(&exp_fiber(z1, l).unwrap().double()) < 1e-8);
            }
        }
    }

    #[test]
    fn xi_round_trip() {
        for l in lam() {
            let ctx = FiberContext::new(l).unwrap();
            for xi in [[0.1, 0.2], [0.73, 0.41], [0.5, 0.0], [0.0, 0.5], [0.999, 0.001], [0.25, 0.9]] {
                let p = ctx.point_at_xi(xi);
                let back = ctx.xi_of(&p, None).unwrap();
                let d = circle_dist(back[0], xi[0]).max(circle_dist(back[1], xi[1]));
                assert!(d < 1e-8, "lambda={} xi={:?} back={:?}", l, xi, back);
            }
        }
    }

    #[test]
    fn xi_is_additive() {
        let l = c(0.4, 0.1);
        let ctx = FiberContext::new(l).unwrap();
        let a = [0.12, 0.34];
        let b = [0.56, 0.91];
        let p = ctx.point_at_xi(a).add(&ctx.point_at_xi(b));
        let s = ctx.xi_of(&p, None).unwrap();
        assert!(circle_dist(s[0], a[0] + b[0]) < 1e-8);
        assert!(circle_dist(s[1], a[1] + b[1]) < 1e-8);
    }

    #[test]
    fn xi_of_identity_is_zero() {
        let p = ComplexFiberPoint::identity(c(0.5, 0.0));
        assert_eq!(xi_map(&p).unwrap().entries(), &[0.0, 0.0]);
    }

    #[test]
    fn consistency_with_rational_points() {
        // (2, 2k) lies on the fiber over 2 - 2k^2; k = 7/8 gives lambda = 15/32.
        let lambda = BigRational::new(BigInt::from(15), BigInt::from(32));
        let fp = FiberPoint::new(
            crate::arith::ProjectivePoint::from_i64s(&[8, 7, 4]).unwrap(),
            lambda,
        )
        .unwrap();
        for n in 1..4 {
            let q = fp.mul_n(n);
            let emb = ComplexFiberPoint::embed(&q);
            let xi = xi_map(&emb).unwrap();
            let z = omega_times_xi(&xi, emb.lambda()).unwrap();
            let back = exp_fiber(z[0], emb.lambda()).unwrap();
            assert!(back.distance(&emb) < 1e-8, "n={} {} vs {}", n, back, emb);
        }
    }

    #[test]
    fn rho_matches_exp() {
        for l in lam() {
            let tau = tau_of_lambda(l).unwrap();
            for xi in [[0.2, 0.7], [0.45, 0.15]] {
                let r = rho_tilde(xi, tau).unwrap();
                let t = TorusCoordinate::new(xi.to_vec()).unwrap();
                let z = omega_times_xi(&t, l).unwrap();
                let e = exp_fiber(z[0], l).unwrap();
                assert!(r.distance(&e) < 1e-9);
                assert!((r.lambda() - l).norm() < 1e-10);
                assert!(r.curve_residual() < 1e-10);
            }
        }
        assert!(rho_tilde([0.0, 0.0], c(0.1, 1.0)).unwrap().is_identity());
    }

    #[test]
    fn monodromy_coherence() {
        for tau in [c(0.1, 0.9), c(-0.3, 1.3), c(0.45, 0.75)] {
            for xi in [[0.13, 0.27], [0.61, 0.84]] {
                let (r0, r1) = monodromy_residuals(xi, tau).unwrap();
                assert!(r0 < 1e-8 && r1 < 1e-8, "tau={} xi={:?}: {} {}", tau, xi, r0, r1);
            }
        }
    }
}
