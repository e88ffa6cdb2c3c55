//! Weil heights, the total height on the fibered power, canonical heights via
//! Tate's doubling limit, and the related comparison quantities.
//!
//! Canonical heights use the x-coordinate map `[X : Z]` and the doubling
//! polynomials of the Legendre curve with `lambda = a/b`:
//!
//! ```text
//! F(X, Z) = (b X^2 - a Z^2)^2
//! G(X, Z) = 4 b X Z (X - Z)(b X - a Z)
//! ```
//!
//! so that `x(2Q) = [F : G]`. Writing `h_n = h(x([2^n]P))`, the estimate after
//! `N` doublings is `h_N / (2 * 4^N)` and the tail is at most `C / (6 * 4^N)`
//! where `C` bounds `|h(x(2Q)) - 4 h(x(Q))|` uniformly on the curve.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arith::{log_abs, normalize_projective, rational_to_f64, ProjectivePoint};
use crate::legendre::{FiberPoint, ProductPoint};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HeightError {
    #[error("tolerance must be positive, got {0}")]
    BadTolerance(f64),
    #[error("no convergence within {budget} bits (needed {needed} bits at depth {depth})")]
    NonConvergence { budget: u64, needed: u64, depth: u32 },
}

/// Logarithmic height of a Q-point, stored exactly as `log(arg)` for a
/// positive integer `arg`; sums of such heights stay exact.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct HeightValue {
    arg: BigInt,
}

impl HeightValue {
    pub fn from_arg(arg: BigInt) -> Self {
        assert!(arg.is_positive(), "height argument must be positive");
        HeightValue { arg }
    }

    pub fn zero() -> Self {
        HeightValue { arg: BigInt::one() }
    }

    /// The integer whose logarithm is the height.
    pub fn arg(&self) -> &BigInt {
        &self.arg
    }

    pub fn value(&self) -> f64 {
        log_abs(&self.arg)
    }

    pub fn sum(&self, other: &HeightValue) -> HeightValue {
        HeightValue {
            arg: &self.arg * &other.arg,
        }
    }
}

/// Result of a canonical height computation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NtEstimate {
    pub value: f64,
    /// Number of doublings performed.
    pub depth: u32,
    /// Certified bound on `|value - canonical height|`.
    pub error_bound: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HeightConfig {
    pub tolerance: f64,
    /// Size limit in bits for the exact integers carried by the iteration.
    pub bit_budget: u64,
}

impl Default for HeightConfig {
    fn default() -> Self {
        HeightConfig {
            tolerance: 1e-8,
            bit_budget: 1 << 20,
        }
    }
}

impl HeightConfig {
    pub fn with_tolerance(tolerance: f64) -> Self {
        HeightConfig {
            tolerance,
            ..Default::default()
        }
    }
}

/// `log max |c_i|` of the reduced integer coordinates.
pub fn weil_height(p: &ProjectivePoint) -> HeightValue {
    HeightValue::from_arg(p.max_abs())
}

/// Height of `[lambda : 1]`.
pub fn lambda_height(lambda: &BigRational) -> HeightValue {
    HeightValue::from_arg(lambda.numer().abs().max(lambda.denom().clone()))
}

/// `h(P_1) + ... + h(P_g) + h(lambda)`.
pub fn total_height(p: &ProductPoint) -> HeightValue {
    p.components()
        .iter()
        .map(|c| weil_height(c.point()))
        .fold(lambda_height(p.lambda()), |acc, h| acc.sum(&h))
}

/// Segre image of `(P_1, ..., P_g, [lambda : 1])` in `P^(2 * 3^g - 1)`.
pub fn segre_image(p: &ProductPoint) -> ProjectivePoint {
    let lam = [p.lambda().numer().clone(), p.lambda().denom().clone()];
    let mut coords: Vec<BigInt> = vec![BigInt::one()];
    for c in p.components() {
        coords = coords
            .iter()
            .flat_map(|a| c.point().coords().iter().map(move |b| a * b))
            .collect();
    }
    let coords = coords
        .iter()
        .flat_map(|a| lam.iter().map(move |b| a * b))
        .collect();
    ProjectivePoint::from_integers(coords).expect("Segre image of a point is nonzero")
}

/// Weil height of the Segre image.
pub fn segre_height(p: &ProductPoint) -> HeightValue {
    weil_height(&segre_image(p))
}

/// Integer doubling polynomials on the x-line of one fiber together with the
/// constants bounding the doubling defect.
#[derive(Clone, Debug)]
pub struct DoublingMap {
    /// Coefficients of `X^(4-i) Z^i`.
    f: [BigInt; 5],
    g: [BigInt; 5],
    f_float: [f64; 5],
    g_float: [f64; 5],
    /// Every `gcd(F(X,Z), G(X,Z))` with coprime `X, Z` divides this.
    gcd_bound: BigInt,
    /// Uniform bound on `|h(x(2Q)) - 4 h(x(Q))|`.
    defect: f64,
}

fn poly_mul(a: &[BigInt], b: &[BigInt]) -> Vec<BigInt> {
    let mut out = vec![BigInt::zero(); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn l1(v: &[BigRational]) -> BigRational {
    v.iter().fold(BigRational::zero(), |acc, x| acc + x.abs())
}

// Solves f*F + g*G = X^(7-k) Z^k for cubic binary forms f, g.
fn bezout_cubics(f: &[BigInt; 5], g: &[BigInt; 5], k: usize) -> (Vec<BigRational>, Vec<BigRational>) {
    let n = 8;
    let mut m: Vec<Vec<BigRational>> = vec![vec![BigRational::zero(); n + 1]; n];
    for row in 0..n {
        for i in 0..4 {
            if row >= i && row - i <= 4 {
                m[row][i] = BigRational::from_integer(f[row - i].clone());
                m[row][4 + i] = BigRational::from_integer(g[row - i].clone());
            }
        }
        m[row][n] = if row == k {
            BigRational::one()
        } else {
            BigRational::zero()
        };
    }
    for col in 0..n {
        let pivot = (col..n)
            .find(|&r| !m[r][col].is_zero())
            .expect("resultant of the doubling polynomials is nonzero");
        m.swap(col, pivot);
        let inv = m[col][col].recip();
        for x in m[col].iter_mut() {
            *x *= &inv;
        }
        for r in 0..n {
            if r != col && !m[r][col].is_zero() {
                let factor = m[r][col].clone();
                for c in col..=n {
                    let delta = &factor * &m[col][c];
                    m[r][c] -= delta;
                }
            }
        }
    }
    let sol: Vec<BigRational> = m.iter().map(|row| row[n].clone()).collect();
    (sol[..4].to_vec(), sol[4..].to_vec())
}

impl DoublingMap {
    pub fn new(lambda: &BigRational) -> Self {
        let a = lambda.numer().clone();
        let b = lambda.denom().clone();
        let zero = BigInt::zero();
        // b X^2 - a Z^2
        let quad = [b.clone(), zero.clone(), -&a];
        let fv = poly_mul(&quad, &quad);
        // 4b X Z (X - Z)(b X - a Z)  ->  coefficients of X^4 .. Z^4
        let xz = [zero.clone(), BigInt::from(4) * &b, zero.clone()];
        let lin1 = [BigInt::one(), -BigInt::one()];
        let lin2 = [b.clone(), -&a];
        let gv = poly_mul(&poly_mul(&xz, &lin1), &lin2);
        let f: [BigInt; 5] = fv.try_into().unwrap();
        let g: [BigInt; 5] = gv.try_into().unwrap();

        let (f1, g1) = bezout_cubics(&f, &g, 0);
        let (f2, g2) = bezout_cubics(&f, &g, 7);
        let denom = f1
            .iter()
            .chain(&g1)
            .chain(&f2)
            .chain(&g2)
            .fold(BigInt::one(), |acc, q| acc.lcm(q.denom()));
        let k = (l1(&f1) + l1(&g1)).max(l1(&f2) + l1(&g2));
        let l1_int = |v: &[BigInt]| v.iter().fold(BigInt::zero(), |acc, x| acc + x.abs());
        let upper = log_abs(&l1_int(&f).max(l1_int(&g)));
        let lower = rational_ln(&k) + log_abs(&denom);
        DoublingMap {
            f_float: f.clone().map(|c| c.to_f64().unwrap_or(f64::INFINITY)),
            g_float: g.clone().map(|c| c.to_f64().unwrap_or(f64::INFINITY)),
            f,
            g,
            gcd_bound: denom,
            defect: upper.max(lower),
        }
    }

    /// Uniform bound on the doubling defect of the naive x-height.
    pub fn defect_constant(&self) -> f64 {
        self.defect
    }

    pub fn gcd_bound(&self) -> &BigInt {
        &self.gcd_bound
    }

    fn eval_int(coeffs: &[BigInt; 5], x: &BigInt, z: &BigInt) -> BigInt {
        // Horner in X with powers of Z.
        let mut acc = BigInt::zero();
        let mut zp = BigInt::one();
        let mut zpows = Vec::with_capacity(5);
        for _ in 0..5 {
            zpows.push(zp.clone());
            zp *= z;
        }
        for (i, c) in coeffs.iter().enumerate() {
            acc = acc * x + c * &zpows[i];
        }
        acc
    }

    fn eval_float(coeffs: &[f64; 5], x: f64, z: f64) -> f64 {
        let zp = [1.0, z, z * z, z * z * z, z * z * z * z];
        coeffs
            .iter()
            .enumerate()
            .fold(0.0, |acc, (i, c)| acc * x + c * zp[i])
    }

    /// Exact doubling on the x-line, reduced to coprime coordinates.
    pub fn double_exact(&self, x: &BigInt, z: &BigInt) -> (BigInt, BigInt) {
        let fx = Self::eval_int(&self.f, x, z);
        let gx = Self::eval_int(&self.g, x, z);
        let d = fx.gcd(&gx);
        (fx / &d, gx / &d)
    }
}

fn rational_ln(q: &BigRational) -> f64 {
    log_abs(q.numer()) - log_abs(q.denom())
}

/// `[X : Z]` image of a fiber point under the x-coordinate map.
pub fn x_line(p: &FiberPoint) -> (BigInt, BigInt) {
    if p.is_identity() {
        return (BigInt::one(), BigInt::zero());
    }
    let c = p.point().coords();
    let pt = normalize_projective(&[
        BigRational::from_integer(c[0].clone()),
        BigRational::from_integer(c[2].clone()),
    ])
    .expect("affine point has z != 0");
    (pt.coords()[0].clone(), pt.coords()[1].clone())
}

/// Depth needed so that the tail `C / (6 * 4^N)` plus a rounding allowance
/// drops below `tolerance`.
fn depth_for(defect: f64, allowance: f64, tolerance: f64) -> Option<u32> {
    (0..200u32).find(|&n| defect / (6.0 * 4f64.powi(n as i32)) + allowance <= tolerance)
}

/// Canonical height of a fiber point.
///
/// The archimedean size of `x([2^n]P)` is tracked in floating point on the
/// real projective line, while the gcd cancellations are computed exactly
/// from the coordinates modulo a power of [`DoublingMap::gcd_bound`]. The
/// two parts reproduce the terms `h_{n+1} - 4 h_n` of the exact iteration,
/// so the same tail bound applies.
pub fn neron_tate(p: &FiberPoint, cfg: &HeightConfig) -> Result<NtEstimate, HeightError> {
    if !(cfg.tolerance > 0.0) {
        return Err(HeightError::BadTolerance(cfg.tolerance));
    }
    if p.is_identity() {
        return Ok(NtEstimate {
            value: 0.0,
            depth: 0,
            error_bound: 0.0,
        });
    }
    let map = DoublingMap::new(p.lambda());
    let (x0, z0) = x_line(p);
    let h0 = log_abs(&x0.abs().max(z0.abs()));
    let allowance = 1e-14 * (1.0 + h0 + map.defect);
    let depth = match depth_for(map.defect, allowance, cfg.tolerance) {
        Some(d) => d,
        None => {
            return Err(HeightError::NonConvergence {
                budget: cfg.bit_budget,
                needed: u64::MAX,
                depth: 200,
            })
        }
    };
    let modulus_bits = map.gcd_bound.bits() * u64::from(depth + 1);
    if modulus_bits > cfg.bit_budget {
        return Err(HeightError::NonConvergence {
            budget: cfg.bit_budget,
            needed: modulus_bits,
            depth,
        });
    }

    let mut modulus = num_traits::pow(map.gcd_bound.clone(), depth as usize + 1);
    let mut xm = x0.mod_floor(&modulus);
    let mut zm = z0.mod_floor(&modulus);
    let (mut ux, mut uz) = unit_pair(&x0, &z0);

    let mut sum = h0;
    let mut scale = 1.0;
    for _ in 0..depth {
        scale *= 0.25;
        let fu = DoublingMap::eval_float(&map.f_float, ux, uz);
        let gu = DoublingMap::eval_float(&map.g_float, ux, uz);
        let size = fu.abs().max(gu.abs());
        let arch = size.ln();

        let fm = DoublingMap::eval_int(&map.f, &xm, &zm).mod_floor(&modulus);
        let gm = DoublingMap::eval_int(&map.g, &xm, &zm).mod_floor(&modulus);
        let common = fm.gcd(&gm).gcd(&map.gcd_bound);
        let nonarch = log_abs(&common);

        sum += scale * (arch - nonarch);

        modulus /= &common;
        xm = (fm / &common).mod_floor(&modulus);
        zm = (gm / &common).mod_floor(&modulus);
        ux = fu / size;
        uz = gu / size;
    }
    Ok(NtEstimate {
        value: (0.5 * sum).max(0.0),
        depth,
        error_bound: map.defect / (6.0 * 4f64.powi(depth as i32)) + allowance,
    })
}

fn unit_pair(x: &BigInt, z: &BigInt) -> (f64, f64) {
    if z.is_zero() {
        return (1.0, 0.0);
    }
    if x.is_zero() {
        return (0.0, 1.0);
    }
    let r = rational_to_f64(&BigRational::new(x.clone(), z.clone()));
    if r.abs() >= 1.0 {
        (1.0f64.copysign(r), 1.0 / r.abs())
    } else {
        (r, 1.0)
    }
}

/// Canonical height by the plain exact iteration `h(x([2^N]P)) / (2 * 4^N)`.
///
/// Coordinates grow fourfold in size per doubling, so this route only
/// reaches moderate tolerances before the bit budget is exhausted. It shares
/// no code with [`neron_tate`] beyond the doubling polynomials.
pub fn neron_tate_exact(p: &FiberPoint, cfg: &HeightConfig) -> Result<NtEstimate, HeightError> {
    if !(cfg.tolerance > 0.0) {
        return Err(HeightError::BadTolerance(cfg.tolerance));
    }
    let map = DoublingMap::new(p.lambda());
    let depth = depth_for(map.defect, 0.0, cfg.tolerance).unwrap_or(200);
    let (mut x, mut z) = x_line(p);
    for n in 0..depth {
        let (nx, nz) = map.double_exact(&x, &z);
        let bits = nx.bits().max(nz.bits());
        if bits > cfg.bit_budget {
            return Err(HeightError::NonConvergence {
                budget: cfg.bit_budget,
                needed: bits,
                depth: n + 1,
            });
        }
        x = nx;
        z = nz;
    }
    let h = log_abs(&x.abs().max(z.abs()));
    Ok(NtEstimate {
        value: h / (2.0 * 4f64.powi(depth as i32)),
        depth,
        error_bound: map.defect / (6.0 * 4f64.powi(depth as i32)),
    })
}

/// Sum of the componentwise canonical heights.
pub fn neron_tate_product(p: &ProductPoint, cfg: &HeightConfig) -> Result<NtEstimate, HeightError> {
    let mut total = NtEstimate {
        value: 0.0,
        depth: 0,
        error_bound: 0.0,
    };
    for c in p.components() {
        let e = neron_tate(c, cfg)?;
        total.value += e.value;
        total.depth = total.depth.max(e.depth);
        total.error_bound += e.error_bound;
    }
    Ok(total)
}

/// `|h_total(P) - canonical(P)| / max(1, h(lambda))`.
pub fn silverman_tate_ratio(p: &ProductPoint, cfg: &HeightConfig) -> Result<f64, HeightError> {
    let total = total_height(p).value();
    let nt = neron_tate_product(p, cfg)?.value;
    let hl = lambda_height(p.lambda()).value();
    Ok((total - nt).abs() / hl.max(1.0))
}

/// Prime factorization by trial division.
pub fn factorize(mut n: u64) -> Vec<(u64, u32)> {
    let mut out = Vec::new();
    let mut p = 2u64;
    while p * p <= n {
        if n % p == 0 {
            let mut e = 0;
            while n % p == 0 {
                n /= p;
                e += 1;
            }
            out.push((p, e));
        }
        p += if p == 2 { 1 } else { 2 };
    }
    if n > 1 {
        out.push((n, 1));
    }
    out
}

/// Right-hand side of the Szpiro-Ullmo lower bound for the Faltings height
/// of an `N`-isogenous curve:
/// `h_F + (1/2) log N - sum_{p | N} (p^e - 1) / ((p^2 - 1) p^(e-1)) * log p - c`.
pub fn szpiro_ullmo_bound(n: u64, faltings_h: f64, c: f64) -> f64 {
    assert!(n >= 1, "N must be positive");
    let correction: f64 = factorize(n)
        .into_iter()
        .map(|(p, e)| {
            let pf = p as f64;
            let pe = pf.powi(e as i32);
            (pe - 1.0) / ((pf * pf - 1.0) * pf.powi(e as i32 - 1)) * pf.ln()
        })
        .sum();
    faltings_h + 0.5 * (n as f64).ln() - correction - c
}
