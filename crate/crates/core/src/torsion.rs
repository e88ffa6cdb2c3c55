//! Torsion on the fibers, seen through torus coordinates: N-th roots in a box,
//! the analytic `T`-torsion subgroup of a fiber, Kronecker orbit density, and
//! parameter values where a section becomes torsion.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, One, Signed};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analytic::{
    AnalyticError, ComplexFiberPoint, FiberContext, TorusCoordinate, C64,
};
use crate::exec::Execution;
use crate::experiments::FamilySpec;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TorsionError {
    #[error("half width must lie in (0, 1/2], got {0}")]
    BadHalfWidth(f64),
    #[error("box has {box_len} coordinates but the target has {target_len}")]
    DimensionMismatch { box_len: usize, target_len: usize },
    #[error("order must be at least 1")]
    BadOrder,
    #[error("enumerated point for xi = {xi:?} failed verification (residual {residual:e})")]
    Verification { xi: [f64; 2], residual: f64 },
    #[error(transparent)]
    Analytic(#[from] AnalyticError),
}

/// The open box `prod (c_i - eps, c_i + eps)` in `(R/Z)^(2g)`. With
/// `eps = 1/2` it is the whole torus.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TorusBox {
    center: Vec<f64>,
    half_width: f64,
}

impl TorusBox {
    pub fn new(center: Vec<f64>, half_width: f64) -> Result<Self, TorsionError> {
        if !(half_width > 0.0 && half_width <= 0.5) {
            return Err(TorsionError::BadHalfWidth(half_width));
        }
        if center.is_empty() || center.len() % 2 != 0 {
            return Err(AnalyticError::OddLength(center.len()).into());
        }
        Ok(TorusBox { center, half_width })
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn dimension(&self) -> usize {
        self.center.len()
    }

    fn whole(&self) -> bool {
        self.half_width == 0.5
    }
}

fn exact(x: f64) -> BigRational {
    BigRational::from_f64(x).expect("finite")
}

fn frac(q: &BigRational) -> BigRational {
    q - q.floor()
}

// Residues k in 0..n with (xi0 + k)/n strictly inside (c - eps, c + eps) mod 1,
// by direct enumeration in exact arithmetic.
fn roots_1d(c: &BigRational, eps: &BigRational, xi0: &BigRational, n: u64, whole: bool) -> Vec<u64> {
    let nq = BigRational::from_integer(n.into());
    let half = BigRational::new(1.into(), 2.into());
    (0..n)
        .filter(|&k| {
            if whole {
                return true;
            }
            let x = (xi0 + BigRational::from_integer(k.into())) / &nq;
            // Signed distance from the center, taken in [-1/2, 1/2).
            let d = frac(&(x - c + &half)) - &half;
            d.abs() < *eps
        })
        .collect()
}

// Closed form: the integers k with a < k < b, a = n (c - eps) - xi0 and
// b = n (c + eps) - xi0, counted as ceil(b) - floor(a) - 1. The interval has
// length 2 eps n < n, so distinct k give distinct roots mod 1.
fn count_1d(c: &BigRational, eps: &BigRational, xi0: &BigRational, n: u64, whole: bool) -> BigInt {
    if whole {
        return n.into();
    }
    let nq = BigRational::from_integer(n.into());
    let a = &nq * (c - eps) - xi0;
    let b = &nq * (c + eps) - xi0;
    b.ceil().to_integer() - a.floor().to_integer() - BigInt::one()
}

fn check_dims(bx: &TorusBox, xi0: &TorusCoordinate, n: u64) -> Result<(), TorsionError> {
    if n == 0 {
        return Err(TorsionError::BadOrder);
    }
    if bx.dimension() != xi0.entries().len() {
        return Err(TorsionError::DimensionMismatch {
            box_len: bx.dimension(),
            target_len: xi0.entries().len(),
        });
    }
    Ok(())
}

/// All `xi` with `n xi = xi0` (mod 1, componentwise) in the open box.
/// Membership is decided exactly on the binary values of the inputs.
pub fn count_roots_in_box(
    bx: &TorusBox,
    xi0: &TorusCoordinate,
    n: u64,
) -> Result<Vec<TorusCoordinate>, TorsionError> {
    check_dims(bx, xi0, n)?;
    let eps = exact(bx.half_width);
    let per_coord: Vec<Vec<f64>> = bx
        .center
        .iter()
        .zip(xi0.entries())
        .map(|(c, x)| {
            roots_1d(&exact(*c), &eps, &exact(*x), n, bx.whole())
                .into_iter()
                .map(|k| (x + k as f64) / n as f64)
                .collect()
        })
        .collect();
    let mut out: Vec<Vec<f64>> = vec![vec![]];
    for coord in &per_coord {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                coord.iter().map(move |v| {
                    let mut p = prefix.clone();
                    p.push(*v);
                    p
                })
            })
            .collect();
    }
    if per_coord.iter().any(Vec::is_empty) {
        return Ok(vec![]);
    }
    out.into_iter()
        .map(|e| TorusCoordinate::new(e).map_err(Into::into))
        .collect()
}

/// Number of roots counted by the per-coordinate closed form.
pub fn closed_form_root_count(
    bx: &TorusBox,
    xi0: &TorusCoordinate,
    n: u64,
) -> Result<BigInt, TorsionError> {
    check_dims(bx, xi0, n)?;
    let eps = exact(bx.half_width);
    Ok(bx
        .center
        .iter()
        .zip(xi0.entries())
        .map(|(c, x)| count_1d(&exact(*c), &eps, &exact(*x), n, bx.whole()))
        .fold(BigInt::one(), |acc, k| acc * k))
}

/// `eps^(2g) n^(2g)`, the lower bound for the count when `n >= 1/eps`,
/// as an exact rational.
pub fn box_count_lower_bound(bx: &TorusBox, n: u64) -> BigRational {
    let base = exact(bx.half_width) * BigRational::from_integer(n.into());
    num_traits::pow(base, bx.dimension())
}

/// A fiber torsion point with its defining torus coordinate.
#[derive(Clone, Copy, Debug)]
pub struct TorsionPoint {
    pub xi: [f64; 2],
    pub point: ComplexFiberPoint,
}

// Accepted size of T * P for an enumerated point, in the projective distance
// to the origin.
const TORSION_CHECK: f64 = 1e-6;

/// The `order^2` points `exp(Omega xi)` for `xi` in `((1/order) Z / Z)^2`,
/// each checked to lie on the curve and to be killed by `order`.
pub fn fiber_torsion_points(lambda: C64, order: u32) -> Result<Vec<TorsionPoint>, TorsionError> {
    if order == 0 {
        return Err(TorsionError::BadOrder);
    }
    let ctx = FiberContext::new(lambda)?;
    fiber_torsion_points_in(&ctx, order, Execution::Parallel)
}

pub fn fiber_torsion_points_in(
    ctx: &FiberContext,
    order: u32,
    exec: Execution,
) -> Result<Vec<TorsionPoint>, TorsionError> {
    let t = order as f64;
    let grid: Vec<[f64; 2]> = (0..order)
        .flat_map(|a| (0..order).map(move |b| [a as f64 / t, b as f64 / t]))
        .collect();
    let origin = ComplexFiberPoint::identity(ctx.lambda());
    exec.map(&grid, |xi| {
        let point = ctx.point_at_xi(*xi);
        let residual = point
            .curve_residual()
            .max(point.mul_n(order as i64).distance(&origin));
        if residual > TORSION_CHECK || residual.is_nan() {
            return Err(TorsionError::Verification { xi: *xi, residual });
        }
        Ok(TorsionPoint { xi: *xi, point })
    })
    .into_iter()
    .collect()
}

/// Covering radius of the orbit `{2k xi mod 1 : k = 1..K}` in `(R/Z)^g`
/// (sup-norm). Exact for `g = 1`; for `g >= 2` the supremum is taken over a
/// uniform grid, which can only under-estimate it.
pub fn kronecker_orbit_gap(xi_even: &[f64], k_max: u32) -> f64 {
    assert!(k_max >= 1, "K must be at least 1");
    let g = xi_even.len();
    let orbit: Vec<Vec<f64>> = (1..=k_max)
        .map(|k| {
            xi_even
                .iter()
                .map(|x| (2.0 * k as f64 * x).rem_euclid(1.0))
                .collect()
        })
        .collect();
    if g == 1 {
        let mut pts: Vec<f64> = orbit.iter().map(|p| p[0]).collect();
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        let mut gap = 1.0 - pts[pts.len() - 1] + pts[0];
        for w in pts.windows(2) {
            gap = gap.max(w[1] - w[0]);
        }
        return gap / 2.0;
    }
    let m = grid_side(g);
    let cells = m.pow(g as u32);
    let idx: Vec<usize> = (0..cells).collect();
    let dist = |a: f64, b: f64| {
        let d = (a - b).rem_euclid(1.0);
        d.min(1.0 - d)
    };
    Execution::Parallel
        .map(&idx, |&cell| {
            let mut rest = cell;
            let y: Vec<f64> = (0..g)
                .map(|_| {
                    let i = rest % m;
                    rest /= m;
                    (i as f64 + 0.5) / m as f64
                })
                .collect();
            orbit
                .iter()
                .map(|p| p.iter().zip(&y).map(|(a, b)| dist(*a, *b)).fold(0.0, f64::max))
                .fold(f64::INFINITY, f64::min)
        })
        .into_iter()
        .fold(0.0, f64::max)
}

fn grid_side(g: usize) -> usize {
    match g {
        2 => 128,
        3 => 24,
        _ => 8,
    }
}

/// A parameter where the section is (numerically) torsion of the given order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TorsionCandidate {
    pub t: f64,
    pub lambda: f64,
    pub xi: Vec<f64>,
    /// `max |order * xi|` (distance to 0 mod 1) at the candidate.
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum SectionTorsion {
    /// The section is torsion of the given order on every fiber of the window.
    Everywhere,
    /// Isolated parameters, sorted.
    Candidates(Vec<TorsionCandidate>),
}

/// Scan settings for [`torsion_on_section`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScanConfig {
    /// Number of grid intervals over the window.
    pub grid: usize,
    /// Bisection stops at this width in `t`.
    pub bisection_tol: f64,
    /// A candidate is kept if `order * xi` is this close to 0.
    pub accept: f64,
}

impl Default for ScanConfig {
    fn default() -> Self {
        ScanConfig {
            grid: 400,
            bisection_tol: 1e-10,
            accept: 1e-6,
        }
    }
}

// Torus coordinates of the section at real t, or None off the admissible set.
fn section_xi(family: &FamilySpec, t: f64, guess: Option<&[f64]>) -> Option<(f64, Vec<f64>)> {
    let (lambda, pts) = family.complex_point_at(t)?;
    let ctx = FiberContext::new(C64::new(lambda, 0.0)).ok()?;
    let mut xi = Vec::with_capacity(2 * pts.len());
    for (k, p) in pts.iter().enumerate() {
        let g = guess.map(|g| [g[2 * k], g[2 * k + 1]]);
        xi.extend(ctx.xi_of(p, g).ok()?);
    }
    Some((lambda, xi))
}

// order * x reduced to [-1/2, 1/2).
fn centered(order: u32, x: f64) -> f64 {
    let y = (order as f64 * x + 0.5).rem_euclid(1.0) - 0.5;
    if y >= 0.5 {
        -0.5
    } else {
        y
    }
}

/// Parameters `t` in the real window where `order * Xi(section(t)) = 0`.
///
/// The section must be real over the window with `lambda(t)` in `Sigma`, so
/// each torus coordinate is real-analytic in `t`. Each coordinate of
/// `order * xi`, centered mod 1, is scanned on a uniform grid; sign changes
/// that are not wrap-around jumps are bisected. Coordinates that vanish on the
/// whole grid impose no condition; if all do, the section is torsion
/// everywhere. Survivors are re-checked against the enumerated torsion points
/// of their fiber.
pub fn torsion_on_section(
    family: &FamilySpec,
    order: u32,
    window: (f64, f64),
    cfg: &ScanConfig,
) -> Result<SectionTorsion, TorsionError> {
    if order == 0 {
        return Err(TorsionError::BadOrder);
    }
    let (lo, hi) = window;
    let ts: Vec<f64> = (0..=cfg.grid)
        .map(|i| lo + (hi - lo) * i as f64 / cfg.grid as f64)
        .collect();
    let samples = Execution::Parallel.map(&ts, |t| section_xi(family, *t, None));
    let valid: Vec<(f64, f64, Vec<f64>)> = ts
        .iter()
        .zip(samples)
        .filter_map(|(t, s)| s.map(|(l, xi)| (*t, l, xi)))
        .collect();
    if valid.is_empty() {
        return Ok(SectionTorsion::Candidates(vec![]));
    }
    let dims = valid[0].2.len();
    let flat: Vec<bool> = (0..dims)
        .map(|i| valid.iter().all(|v| centered(order, v.2[i]).abs() < cfg.accept))
        .collect();
    if flat.iter().all(|f| *f) {
        return Ok(SectionTorsion::Everywhere);
    }

    let mut brackets: Vec<(f64, f64)> = Vec::new();
    for i in (0..dims).filter(|i| !flat[*i]) {
        for w in valid.windows(2) {
            let (a, b) = (centered(order, w[0].2[i]), centered(order, w[1].2[i]));
            // A genuine zero crossing moves little; a jump across +-1/2 does not count.
            if a == 0.0 || (a.signum() != b.signum() && (a - b).abs() < 0.5) {
                brackets.push((w[0].0, w[1].0));
            }
        }
    }

    let mut found: Vec<TorsionCandidate> = Vec::new();
    for (mut a, mut b) in brackets {
        let coord = |t: f64, guess: Option<&[f64]>| section_xi(family, t, guess);
        let Some((_, xa)) = coord(a, None) else { continue };
        let i = (0..dims)
            .filter(|i| !flat[*i])
            .min_by(|p, q| {
                centered(order, xa[*p]).abs().total_cmp(&centered(order, xa[*q]).abs())
            })
            .unwrap_or(0);
        let mut fa = centered(order, xa[i]);
        let mut guess = xa;
        while b - a > cfg.bisection_tol {
            let m = 0.5 * (a + b);
            let Some((_, xm)) = coord(m, Some(&guess)) else { break };
            let fm = centered(order, xm[i]);
            if fm == 0.0 {
                a = m;
                b = m;
                guess = xm;
                break;
            }
            if fm.signum() == fa.signum() {
                a = m;
                fa = fm;
            } else {
                b = m;
            }
            guess = xm;
        }
        let t = 0.5 * (a + b);
        let Some((lambda, xi)) = coord(t, Some(&guess)) else { continue };
        let residual = xi.iter().map(|x| centered(order, *x).abs()).fold(0.0, f64::max);
        if residual > cfg.accept {
            continue;
        }
        if !matches_enumerated(family, t, lambda, order)? {
            continue;
        }
        if found.iter().any(|c| (c.t - t).abs() < 1e3 * cfg.bisection_tol) {
            continue;
        }
        found.push(TorsionCandidate {
            t,
            lambda,
            xi,
            residual,
        });
    }
    found.sort_by(|p, q| p.t.total_cmp(&q.t));
    Ok(SectionTorsion::Candidates(found))
}

// The section's point at t must coincide with one of the enumerated torsion
// points of its fiber.
fn matches_enumerated(
    family: &FamilySpec,
    t: f64,
    lambda: f64,
    order: u32,
) -> Result<bool, TorsionError> {
    let Some((_, pts)) = family.complex_point_at(t) else {
        return Ok(false);
    };
    let ctx = FiberContext::new(C64::new(lambda, 0.0))?;
    let torsion = fiber_torsion_points_in(&ctx, order, Execution::Sequential)?;
    Ok(pts.iter().all(|p| {
        torsion
            .iter()
            .any(|tp| tp.point.distance(p) < 1e-6)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::xi_map_from;
    use crate::experiments::{builtin_family_x2, identity_family, two_torsion_family};
    use proptest::prelude::*;

    fn tc(v: &[f64]) -> TorusCoordinate {
        TorusCoordinate::new(v.to_vec()).unwrap()
    }

    #[test]
    fn whole_torus_and_small_box() {
        let full = TorusBox::new(vec![0.3, 0.8], 0.5).unwrap();
        let roots = count_roots_in_box(&full, &tc(&[0.0, 0.0]), 3).unwrap();
        assert_eq!(roots.len(), 9);
        let bx = TorusBox::new(vec![0.25, 0.25], 0.15).unwrap();
        let roots = count_roots_in_box(&bx, &tc(&[0.0, 0.0]), 10).unwrap();
        let mut got: Vec<(i64, i64)> = roots
            .iter()
            .map(|r| ((r.entries()[0] * 10.0).round() as i64, (r.entries()[1] * 10.0).round() as i64))
            .collect();
        got.sort();
        assert_eq!(got, vec![(2, 2), (2, 3), (3, 2), (3, 3)]);
        assert_eq!(closed_form_root_count(&bx, &tc(&[0.0, 0.0]), 10).unwrap(), 4.into());
    }

    #[test]
    fn order_one() {
        let bx = TorusBox::new(vec![0.5, 0.5], 0.1).unwrap();
        assert_eq!(count_roots_in_box(&bx, &tc(&[0.55, 0.45]), 1).unwrap().len(), 1);
        assert_eq!(count_roots_in_box(&bx, &tc(&[0.55, 0.75]), 1).unwrap().len(), 0);
        // Open box: the boundary is excluded.
        let bx = TorusBox::new(vec![0.5, 0.5], 0.25).unwrap();
        assert_eq!(count_roots_in_box(&bx, &tc(&[0.75, 0.5]), 1).unwrap().len(), 0);
    }

    #[test]
    fn box_errors() {
        assert!(matches!(TorusBox::new(vec![0.1, 0.1], 0.6), Err(TorsionError::BadHalfWidth(_))));
        assert!(TorusBox::new(vec![0.1], 0.2).is_err());
        let bx = TorusBox::new(vec![0.1, 0.1], 0.2).unwrap();
        assert!(count_roots_in_box(&bx, &tc(&[0.0, 0.0, 0.0, 0.0]), 2).is_err());
        assert!(count_roots_in_box(&bx, &tc(&[0.0, 0.0]), 0).is_err());
    }

    proptest! {
        #[test]
        fn enumeration_matches_closed_form(
            g in 1usize..3,
            seed in proptest::collection::vec((0.0f64..1.0, 0.0f64..1.0), 4),
            eps in 0.01f64..0.5,
            n in 1u64..25,
        ) {
            let center: Vec<f64> = seed.iter().take(2 * g).map(|p| p.0).collect();
            let target: Vec<f64> = seed.iter().take(2 * g).map(|p| p.1).collect();
            let bx = TorusBox::new(center, eps).unwrap();
            let xi0 = tc(&target);
            let roots = count_roots_in_box(&bx, &xi0, n).unwrap();
            let count = closed_form_root_count(&bx, &xi0, n).unwrap();
            prop_assert_eq!(BigInt::from(roots.len()), count.clone());
            if n as f64 * eps >= 1.0 {
                prop_assert!(BigRational::from_integer(count) >= box_count_lower_bound(&bx, n));
            }
            for r in &roots {
                prop_assert!(r.scale(n as i64).distance(&xi0) < 1e-9);
            }
        }
    }

    #[test]
    fn small_orders() {
        let lambda = C64::new(0.3, 0.1);
        let one = fiber_torsion_points(lambda, 1).unwrap();
        assert_eq!(one.len(), 1);
        assert!(one[0].point.is_identity());
        let two = fiber_torsion_points(lambda, 2).unwrap();
        assert_eq!(two.len(), 4);
        let roots = [C64::new(0.0, 0.0), C64::new(1.0, 0.0), lambda];
        let mut hit = [false; 3];
        for tp in two.iter().filter(|tp| !tp.point.is_identity()) {
            let (x, y) = tp.point.affine().unwrap();
            assert!(y.norm() < 1e-9);
            let k = roots.iter().position(|r| (x - r).norm() < 1e-9).unwrap();
            hit[k] = true;
        }
        assert_eq!(hit, [true; 3]);
    }

    #[test]
    fn order_three_is_closed_under_negation() {
        let pts = fiber_torsion_points(C64::new(0.5, 0.0), 3).unwrap();
        assert_eq!(pts.len(), 9);
        for p in &pts {
            let n = p.point.neg();
            assert!(pts.iter().any(|q| q.point.distance(&n) < 1e-9));
        }
    }

    #[test]
    fn torsion_xi_round_trip() {
        let ctx = FiberContext::new(C64::new(0.6, -0.2)).unwrap();
        for tp in fiber_torsion_points_in(&ctx, 5, Execution::Sequential).unwrap() {
            let back = xi_map_from(&tp.point, &ctx, None).unwrap();
            let d = tc(&back).distance(&tc(&tp.xi));
            assert!(d < 1e-8, "{:?} -> {:?}", tp.xi, back);
        }
    }

    #[test]
    fn kronecker_examples() {
        assert_eq!(kronecker_orbit_gap(&[0.0], 10), 0.5);
        assert!(kronecker_orbit_gap(&[0.0], 1000) >= 0.25);
        assert!(kronecker_orbit_gap(&[2f64.sqrt() - 1.0], 1000) < 0.01);
        let third = kronecker_orbit_gap(&[1.0 / 3.0], 50);
        assert!((third - 1.0 / 6.0).abs() < 1e-12);
        assert_eq!(third, kronecker_orbit_gap(&[1.0 / 3.0], 500));
        let g2 = [2f64.sqrt() - 1.0, 3f64.sqrt() - 1.0];
        let a = kronecker_orbit_gap(&g2, 100);
        let b = kronecker_orbit_gap(&g2, 2000);
        assert!(b <= a && b < 0.1);
    }

    #[test]
    fn special_sections() {
        let cfg = ScanConfig { grid: 20, ..Default::default() };
        let r = torsion_on_section(&identity_family(), 3, (0.2, 0.8), &cfg).unwrap();
        assert_eq!(r, SectionTorsion::Everywhere);
        let r = torsion_on_section(&two_torsion_family(), 4, (0.2, 0.8), &cfg).unwrap();
        assert_eq!(r, SectionTorsion::Everywhere);
        let r = torsion_on_section(&two_torsion_family(), 3, (0.2, 0.8), &cfg).unwrap();
        assert_eq!(r, SectionTorsion::Candidates(vec![]));
    }

    #[test]
    fn x2_section_order_five() {
        let cfg = ScanConfig { grid: 200, ..Default::default() };
        let r = torsion_on_section(&builtin_family_x2(), 5, (0.71, 0.999), &cfg).unwrap();
        let SectionTorsion::Candidates(c) = r else { panic!("x = 2 is not a torsion section") };
        assert!(!c.is_empty());
        for cand in &c {
            assert!(cand.residual < 1e-6);
            assert!(cand.lambda > 0.0 && cand.lambda < 1.0);
        }
    }
}
