//! Explicit multiplication-by-`2^N` polynomials `G_{N,0}, G_{N,1}, G_{N,2}` in
//! `Z[X0, X1, X2, X3]` for the Legendre family, with `X3` standing for lambda.

use std::fmt::Write as _;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use thiserror::Error;

use crate::arith::{normalize_projective, ArithError, IntPolynomial};
use crate::exec::Execution;
use crate::legendre::FiberPoint;

pub const VARS: [&str; 4] = ["X0", "X1", "X2", "X3"];

/// Highest level built by [`triples_up_to`] unless asked otherwise.
pub const DEFAULT_MAX_LEVEL: u32 = 4;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DupError {
    #[error("duplication level must be at least 1")]
    BadLevel,
    #[error("G_(N,i) vanish simultaneously at {0}")]
    AllZero(String),
    #[error(transparent)]
    Arith(#[from] ArithError),
}

/// The three polynomials describing `[2^N]` at one level `N`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DuplicationTriple {
    pub level: u32,
    pub polys: [IntPolynomial; 3],
}

/// Degree profile of a triple, checked against the bounds `4^N` (homogeneous
/// in X0..X2), `4^N - 1` (in X3) and `2 * 4^N` (total).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DegreeProfile {
    pub homogeneous_degree: Option<u32>,
    pub max_x3_degree: u32,
    pub max_total_degree: u32,
}

impl DegreeProfile {
    pub fn within_bounds(&self, level: u32) -> bool {
        let d = 4u32.pow(level);
        self.homogeneous_degree == Some(d)
            && self.max_x3_degree < d
            && self.max_total_degree <= 2 * d
    }
}

/// `G_{1,0}, G_{1,1}, G_{1,2}`: the duplication formula written in
/// homogeneous coordinates with lambda as a fourth variable.
pub fn base_triple() -> DuplicationTriple {
    let g0 = IntPolynomial::from_terms(
        &VARS,
        [
            (2, vec![0, 1, 3, 2]),
            (2, vec![3, 1, 0, 1]),
            (-6, vec![2, 1, 1, 1]),
            (2, vec![3, 1, 0, 0]),
            (2, vec![1, 3, 0, 0]),
        ],
    );
    let g1 = IntPolynomial::from_terms(
        &VARS,
        [
            // X3^3
            (-4, vec![2, 0, 2, 3]),
            (6, vec![1, 0, 3, 3]),
            (-1, vec![0, 0, 4, 3]),
            // X3^2
            (-1, vec![4, 0, 0, 2]),
            (9, vec![3, 0, 1, 2]),
            (-17, vec![2, 0, 2, 2]),
            (6, vec![1, 0, 3, 2]),
            (-4, vec![0, 2, 2, 2]),
            // X3^1
            (-2, vec![4, 0, 0, 1]),
            (9, vec![3, 0, 1, 1]),
            (-4, vec![2, 0, 2, 1]),
            (3, vec![1, 2, 1, 1]),
            (-4, vec![0, 2, 2, 1]),
            // X3^0
            (-1, vec![4, 0, 0, 0]),
            (1, vec![0, 4, 0, 0]),
        ],
    );
    let g2 = IntPolynomial::from_terms(&VARS, [(8, vec![0, 3, 1, 0])]);
    DuplicationTriple {
        level: 1,
        polys: [g0, g1, g2],
    }
}

impl DuplicationTriple {
    /// `G_{N+1,i} = G_{1,i}(G_{N,0}, G_{N,1}, G_{N,2}, X3)`.
    pub fn lift(&self) -> DuplicationTriple {
        let base = base_triple();
        let x3 = IntPolynomial::var(&VARS, 3);
        let inner = [
            self.polys[0].clone(),
            self.polys[1].clone(),
            self.polys[2].clone(),
            x3,
        ];
        let composed = Execution::Parallel.map(&base.polys, |g| {
            g.compose(&inner).expect("four variables on both sides")
        });
        let [g0, g1, g2]: [IntPolynomial; 3] = composed.try_into().expect("three polynomials");
        DuplicationTriple {
            level: self.level + 1,
            polys: [g0, g1, g2],
        }
    }

    pub fn degree_profile(&self) -> DegreeProfile {
        let homs: Vec<Option<u32>> = self
            .polys
            .iter()
            .map(|p| p.homogeneous_degree_in(&[0, 1, 2]))
            .collect();
        let homogeneous_degree = if homs.iter().all(|h| *h == homs[0]) {
            homs[0]
        } else {
            None
        };
        DegreeProfile {
            homogeneous_degree,
            max_x3_degree: self
                .polys
                .iter()
                .filter_map(|p| p.degree_in(3))
                .max()
                .unwrap_or(0),
            max_total_degree: self
                .polys
                .iter()
                .filter_map(|p| p.total_degree())
                .max()
                .unwrap_or(0),
        }
    }

    /// Term listing: one header line per polynomial followed by lines of
    /// `e0 e1 e2 e3 coefficient`.
    pub fn emit(&self) -> String {
        let mut out = String::new();
        for (i, p) in self.polys.iter().enumerate() {
            writeln!(out, "# G_{},{} terms={}", self.level, i, p.num_terms()).unwrap();
            for (e, c) in p.terms() {
                writeln!(out, "{} {} {} {} {}", e[0], e[1], e[2], e[3], c).unwrap();
            }
        }
        out
    }
}

/// Triples for levels `1..=max_level`, each built from the previous one.
pub fn triples_up_to(max_level: u32) -> Vec<DuplicationTriple> {
    let mut out = Vec::with_capacity(max_level as usize);
    if max_level == 0 {
        return out;
    }
    out.push(base_triple());
    while out.len() < max_level as usize {
        let next = out.last().unwrap().lift();
        out.push(next);
    }
    out
}

/// Symbolic degree bookkeeping without expanding the polynomials: if the
/// inner triple is homogeneous of degree `d` in X0..X2 with X3-degree at most
/// `e`, substituting it into `G_{1,i}` gives homogeneous degree `4d` and
/// X3-degree at most `4e + 3`.
pub fn bookkept_profile(level: u32) -> DegreeProfile {
    let base = base_triple().degree_profile();
    let mut hom = base.homogeneous_degree.unwrap();
    let mut x3 = base.max_x3_degree;
    let base_x3_max = base.max_x3_degree;
    for _ in 1..level {
        hom *= 4;
        x3 = 4 * x3 + base_x3_max;
    }
    DegreeProfile {
        homogeneous_degree: Some(hom),
        max_x3_degree: x3,
        max_total_degree: hom + x3,
    }
}

fn apply_once(p: &[BigRational; 4]) -> Result<[BigRational; 3], DupError> {
    let base = base_triple();
    let mut out = Vec::with_capacity(3);
    for g in &base.polys {
        out.push(g.eval(p)?);
    }
    Ok([out[0].clone(), out[1].clone(), out[2].clone()])
}

/// `[2^N]P` by evaluating the level-1 polynomials `N` times.
pub fn dup_apply(p: &FiberPoint, level: u32) -> Result<FiberPoint, DupError> {
    if level == 0 {
        return Err(DupError::BadLevel);
    }
    let lambda = p.lambda().clone();
    let mut coords = p.point().as_rationals();
    for _ in 0..level {
        let args = [
            coords[0].clone(),
            coords[1].clone(),
            coords[2].clone(),
            lambda.clone(),
        ];
        let next = apply_once(&args)?;
        let normalized = normalize_projective(&next)
            .map_err(|_| DupError::AllZero(format!("{} at level {}", p, level)))?;
        coords = normalized.as_rationals();
    }
    let point = normalize_projective(&coords)?;
    Ok(FiberPoint::new(point, lambda).expect("[2^N] maps the curve into itself"))
}

/// `[2^N]P` by direct evaluation of the expanded level-`N` triple.
pub fn dup_apply_triple(p: &FiberPoint, triple: &DuplicationTriple) -> Result<FiberPoint, DupError> {
    let c = p.point().as_rationals();
    let args = [c[0].clone(), c[1].clone(), c[2].clone(), p.lambda().clone()];
    let vals: Vec<BigRational> = triple
        .polys
        .iter()
        .map(|g| g.eval(&args))
        .collect::<Result<_, _>>()?;
    let point = normalize_projective(&vals)
        .map_err(|_| DupError::AllZero(format!("{} at level {}", p, triple.level)))?;
    Ok(FiberPoint::new(point, p.lambda().clone()).expect("[2^N] maps the curve into itself"))
}

/// `(G_{N,0}, G_{N,1}, G_{N,2})` at an integer point, without normalizing
/// between levels, so the value equals the expanded level-`N` polynomials at
/// that point.
pub fn raw_iterate(coords: &[BigInt; 3], lambda: &BigInt, level: u32) -> [BigInt; 3] {
    let base = base_triple();
    let mut cur = coords.clone();
    for _ in 0..level {
        let args = [cur[0].clone(), cur[1].clone(), cur[2].clone(), lambda.clone()];
        let next: Vec<BigInt> = base
            .polys
            .iter()
            .map(|g| g.eval_int(&args).expect("four arguments"))
            .collect();
        cur = [next[0].clone(), next[1].clone(), next[2].clone()];
    }
    cur
}

// Whether X3 -> G_{N,i}(x, X3) has degree at most `e` for all i: its
// (e+1)-st finite difference over X3 = 0..=e+1 must vanish.
fn x3_degree_at_most(x: &[BigInt; 3], level: u32, e: u32) -> bool {
    let mut series: Vec<[BigInt; 3]> = (0..=e as i64 + 1)
        .map(|l| raw_iterate(x, &BigInt::from(l), level))
        .collect();
    for _ in 0..=e {
        series = series
            .windows(2)
            .map(|w| [&w[1][0] - &w[0][0], &w[1][1] - &w[0][1], &w[1][2] - &w[0][2]])
            .collect();
    }
    series.iter().all(|v| v.iter().all(Zero::is_zero))
}

/// Outcome of [`certify_degrees`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DegreeCertificate {
    pub level: u32,
    pub profile: DegreeProfile,
    /// Integer base points `(x0, x1, x2)` used for the checks.
    pub samples: usize,
    pub homogeneity_ok: bool,
    pub x3_degree_ok: bool,
}

impl DegreeCertificate {
    pub fn holds(&self) -> bool {
        self.profile.within_bounds(self.level) && self.homogeneity_ok && self.x3_degree_ok
    }
}

/// Checks the degree profile of level `N` without expanding `G_{N,i}`.
///
/// The bounds themselves come from [`bookkept_profile`]. They are then tested
/// against the actual composite polynomials at integer points:
/// homogeneity by comparing `G(s x, X3)` with `s^(4^N) G(x, X3)`, and the X3
/// degree by checking that the `(e+1)`-st finite difference of
/// `X3 -> G(x, X3)` over `X3 = 0..=e+1` vanishes, where `e` is the bound.
pub fn certify_degrees(level: u32, points: &[[i64; 3]]) -> DegreeCertificate {
    let profile = bookkept_profile(level);
    let hom = profile.homogeneous_degree.expect("bookkeeping is homogeneous");
    let e = profile.max_x3_degree;
    let checks = Execution::Parallel.map(points, |p| {
        let x: [BigInt; 3] = p.map(BigInt::from);
        let mut homogeneous = true;
        for (s, lam) in [(2i64, 3i64), (-3, -5)] {
            let lam = BigInt::from(lam);
            let scaled = x.clone().map(|c| c * s);
            let lhs = raw_iterate(&scaled, &lam, level);
            let factor = BigInt::from(s).pow(hom);
            let rhs = raw_iterate(&x, &lam, level).map(|v| v * &factor);
            homogeneous &= lhs == rhs;
        }
        let degree_ok = x3_degree_at_most(&x, level, e);
        (homogeneous, degree_ok)
    });
    DegreeCertificate {
        level,
        profile,
        samples: points.len(),
        homogeneity_ok: checks.iter().all(|c| c.0),
        x3_degree_ok: checks.iter().all(|c| c.1),
    }
}
