use std::f64::consts::PI;

use super::{c, AnalyticError, C64, WORKING_EPS};

/// Smallest `Im(tau)` accepted. Below it the product for `r` needs more than
/// ~10^4 factors and the modular reduction loses too many digits.
pub const MIN_IM_TAU: f64 = 1e-3;

// Reduced arguments closer than this to a lattice point are treated as poles.
const POLE_RADIUS: f64 = 1e-12;

/// The lattice `Z + tau Z`, with `tau` carried to the standard fundamental
/// domain so that the q-series converge at least as fast as `e^(-pi sqrt 3)`.
///
/// If `tau' = (a tau + b) / (c tau + d)` is the reduced parameter and
/// `alpha = c tau + d`, then `Z + tau Z = alpha (Z + tau' Z)`, hence
/// `p(z; tau) = alpha^-2 p(z / alpha; tau')`.
#[derive(Clone, Copy, Debug)]
pub struct Lattice {
    tau: C64,
    reduced: C64,
    alpha: C64,
    q: C64,
}

impl Lattice {
    pub fn new(tau: C64) -> Result<Self, AnalyticError> {
        if !(tau.im >= MIN_IM_TAU) || !tau.re.is_finite() {
            return Err(AnalyticError::LowImaginaryPart(tau.im));
        }
        // gamma = [[a, b], [c, d]] with reduced = gamma . tau
        let (mut a, mut b, mut cc, mut d) = (1.0f64, 0.0f64, 0.0f64, 1.0f64);
        let mut t = tau;
        for _ in 0..1000 {
            let n = t.re.round();
            if n != 0.0 {
                t.re -= n;
                a -= n * cc;
                b -= n * d;
            }
            if t.norm_sqr() < 1.0 - 1e-15 {
                t = -t.inv();
                let (na, nb, nc, nd) = (-cc, -d, a, b);
                a = na;
                b = nb;
                cc = nc;
                d = nd;
            } else {
                break;
            }
        }
        let alpha = tau * cc + d;
        // Recompute from the integer matrix to avoid drift in the loop.
        let reduced = (tau * a + b) / alpha;
        let q = (c(0.0, 2.0 * PI) * reduced).exp();
        Ok(Lattice {
            tau,
            reduced,
            alpha,
            q,
        })
    }

    pub fn tau(&self) -> C64 {
        self.tau
    }

    /// Reduces `w` (already divided by `alpha`) into the period
    /// parallelogram centred at 0.
    fn reduce(&self, w: C64) -> C64 {
        let m = (w.im / self.reduced.im).round();
        let w = w - self.reduced * m;
        c(w.re - w.re.round(), w.im)
    }

    /// `(p(z), p'(z))` for this lattice.
    pub fn p_and_prime(&self, z: C64) -> Result<(C64, C64), AnalyticError> {
        let w = self.reduce(z / self.alpha);
        if w.norm() < POLE_RADIUS {
            return Err(AnalyticError::PoleError { z, tau: self.tau });
        }
        let (p, dp) = p_reduced(w, self.q);
        let a2 = self.alpha * self.alpha;
        Ok((p / a2, dp / (a2 * self.alpha)))
    }

    pub fn p(&self, z: C64) -> Result<C64, AnalyticError> {
        Ok(self.p_and_prime(z)?.0)
    }

    pub fn p_prime(&self, z: C64) -> Result<C64, AnalyticError> {
        Ok(self.p_and_prime(z)?.1)
    }

    /// `(e1, e2, e3) = (p(tau/2), p(1/2), p((1 + tau)/2))`.
    pub fn e_values(&self) -> (C64, C64, C64) {
        let half = |z: C64| self.p(z).expect("half periods are not lattice points");
        (
            half(self.tau * 0.5),
            half(c(0.5, 0.0)),
            half((self.tau + 1.0) * 0.5),
        )
    }
}

// q-expansion with u = e^(2 pi i w):
//   p  = pi^2 / sin^2(pi w) + (2 pi i)^2 [1/12 + sum_n t(q^n u) + t(q^n / u) - 2 t(q^n)]
//   p' = -2 pi^3 cos(pi w) / sin^3(pi w) + (2 pi i)^3 sum_n s(q^n u) - s(q^n / u)
// with t(x) = x / (1 - x)^2 and s(x) = x (1 + x) / (1 - x)^3.
fn p_reduced(w: C64, q: C64) -> (C64, C64) {
    let one = c(1.0, 0.0);
    let two_pi_i = c(0.0, 2.0 * PI);
    let u = (two_pi_i * w).exp();
    let u_inv = u.inv();
    let t = |x: C64| x / ((one - x) * (one - x));
    let s = |x: C64| x * (one + x) / ((one - x) * (one - x) * (one - x));

    let mut sum_p = c(1.0 / 12.0, 0.0);
    let mut sum_d = c(0.0, 0.0);
    let mut qn = q;
    let spread = u.norm().max(u_inv.norm());
    for _ in 0..200 {
        let xa = qn * u;
        let xb = qn * u_inv;
        let tp = t(xa) + t(xb) - t(qn) * 2.0;
        let td = s(xa) - s(xb);
        sum_p += tp;
        sum_d += td;
        if qn.norm() * spread <= WORKING_EPS * 1e-2 {
            break;
        }
        qn *= q;
    }
    let sn = (w * PI).sin();
    let cs = (w * PI).cos();
    let p = c(PI * PI, 0.0) / (sn * sn) + two_pi_i * two_pi_i * sum_p;
    let dp = -cs * (2.0 * PI * PI * PI) / (sn * sn * sn) + two_pi_i * two_pi_i * two_pi_i * sum_d;
    (p, dp)
}

pub fn weierstrass_p(z: C64, tau: C64) -> Result<C64, AnalyticError> {
    Lattice::new(tau)?.p(z)
}

pub fn weierstrass_p_prime(z: C64, tau: C64) -> Result<C64, AnalyticError> {
    Lattice::new(tau)?.p_prime(z)
}

/// `p(z)` for the lattice `omega1 Z + omega2 Z`, `Im(omega2 / omega1) > 0`.
pub fn weierstrass_p_periods(z: C64, omega1: C64, omega2: C64) -> Result<C64, AnalyticError> {
    Ok(weierstrass_p(z / omega1, omega2 / omega1)? / (omega1 * omega1))
}

pub fn weierstrass_p_prime_periods(
    z: C64,
    omega1: C64,
    omega2: C64,
) -> Result<C64, AnalyticError> {
    Ok(weierstrass_p_prime(z / omega1, omega2 / omega1)? / (omega1 * omega1 * omega1))
}

pub fn e_values(tau: C64) -> Result<(C64, C64, C64), AnalyticError> {
    Ok(Lattice::new(tau)?.e_values())
}

/// `Lambda(tau) = (e3 - e1) / (e2 - e1)`.
pub fn lambda_of_tau(tau: C64) -> Result<C64, AnalyticError> {
    let (e1, e2, e3) = e_values(tau)?;
    Ok((e3 - e1) / (e2 - e1))
}

/// `r(tau) = pi prod_n (1 - e^(2 pi i n tau))^2 (1 + e^(2 pi i (n - 1/2) tau))^4`,
/// a holomorphic square root of `e2 - e1`.
pub fn r_of_tau(tau: C64) -> Result<C64, AnalyticError> {
    if !(tau.im >= MIN_IM_TAU) {
        return Err(AnalyticError::LowImaginaryPart(tau.im));
    }
    let one = c(1.0, 0.0);
    let nome = (c(0.0, PI) * tau).exp();
    let nome2 = nome * nome;
    let mut odd = nome;
    let mut even = nome2;
    let mut prod = c(PI, 0.0);
    loop {
        let a = one - even;
        let b = one + odd;
        let b2 = b * b;
        prod *= a * a * b2 * b2;
        if odd.norm() <= WORKING_EPS * 1e-2 {
            break;
        }
        odd *= nome2;
        even *= nome2;
    }
    Ok(prod)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: C64, b: C64, tol: f64) -> bool {
        (a - b).norm() <= tol * (1.0 + a.norm().max(b.norm()))
    }

    const TAUS: [C64; 5] = [
        C64::new(0.0, 1.0),
        C64::new(0.3, 0.8),
        C64::new(-0.45, 1.7),
        C64::new(0.1, 0.55),
        C64::new(2.3, 0.6),
    ];
    const ZS: [C64; 4] = [
        C64::new(0.13, 0.07),
        C64::new(-0.31, 0.22),
        C64::new(0.4, -0.3),
        C64::new(0.05, 0.01),
    ];

    #[test]
    fn laurent_expansion_near_zero() {
        // p(z) = 1/z^2 + g2 z^2 / 20 + O(z^4)
        let lat = Lattice::new(c(0.0, 1.0)).unwrap();
        let z = c(1e-3, 2e-3);
        let p = lat.p(z).unwrap();
        assert!((p - (z * z).inv()).norm() < 1e-3);
    }

    #[test]
    fn evenness_and_periodicity() {
        for tau in TAUS {
            let lat = Lattice::new(tau).unwrap();
            for z in ZS {
                let p = lat.p(z).unwrap();
                assert!(close(p, lat.p(-z).unwrap(), 1e-12));
                assert!(close(p, lat.p(z + 1.0).unwrap(), 1e-12));
                assert!(close(p, lat.p(z + tau).unwrap(), 1e-12));
                let d = lat.p_prime(z).unwrap();
                assert!(close(d, -lat.p_prime(-z).unwrap(), 1e-12));
            }
        }
    }

    #[test]
    fn differential_equation() {
        for tau in TAUS {
            let lat = Lattice::new(tau).unwrap();
            let (e1, e2, e3) = lat.e_values();
            assert!((e1 + e2 + e3).norm() < 1e-10 * (1.0 + e1.norm()));
            for z in ZS {
                let (p, d) = lat.p_and_prime(z).unwrap();
                let rhs = (p - e1) * (p - e2) * (p - e3) * 4.0;
                assert!(close(d * d, rhs, 1e-9), "tau={} z={}", tau, z);
            }
        }
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let lat = Lattice::new(c(0.2, 0.9)).unwrap();
        for z in ZS {
            let h = 1e-5;
            let fd = (lat.p(z + h).unwrap() - lat.p(z - h).unwrap()) / (2.0 * h);
            assert!(close(fd, lat.p_prime(z).unwrap(), 1e-7));
        }
    }

    #[test]
    fn homogeneity() {
        let one = c(1.0, 0.0);
        for alpha in [c(2.0, 0.0), c(3.0, 0.0), c(0.4, 1.1)] {
            for tau in TAUS {
                for z in ZS {
                    let lhs = weierstrass_p_periods(z * alpha, alpha, tau * alpha).unwrap();
                    let rhs = weierstrass_p(z, tau).unwrap() / (alpha * alpha);
                    assert!(close(lhs, rhs, 1e-11));
                    let lhs = weierstrass_p_prime_periods(z * alpha, alpha, tau * alpha).unwrap();
                    let rhs = weierstrass_p_prime(z, tau).unwrap() / (alpha * alpha * alpha);
                    assert!(close(lhs, rhs, 1e-11));
                }
            }
        }
        // Z + tau Z = alpha (Z + tau' Z) with alpha = 1 - 2 tau, tau' = tau / alpha.
        for tau in TAUS {
            let alpha = tau * -2.0 + one;
            let moved = tau / alpha;
            for z in ZS {
                let lhs = weierstrass_p(z / alpha, moved).unwrap();
                let rhs = weierstrass_p(z, tau).unwrap() * alpha * alpha;
                assert!(close(lhs, rhs, 1e-9));
            }
        }
    }

    #[test]
    fn lambda_examples() {
        assert!(close(lambda_of_tau(c(0.0, 1.0)).unwrap(), c(0.5, 0.0), 1e-13));
        for tau in [c(0.1, 0.8), c(-0.3, 1.2), c(0.45, 0.7)] {
            let l = lambda_of_tau(tau).unwrap();
            assert!(close(l, lambda_of_tau(tau + 2.0).unwrap(), 1e-10));
            let moved = tau / (tau * -2.0 + 1.0);
            assert!(close(l, lambda_of_tau(moved).unwrap(), 1e-9));
            let (e1, e2, e3) = e_values(tau).unwrap();
            let (f1, f2, f3) = e_values(moved).unwrap();
            let k = (tau * -2.0 + 1.0).powu(2);
            assert!(close(f1, e1 * k, 1e-9));
            assert!(close(f2, e2 * k, 1e-9));
            assert!(close(f3, e3 * k, 1e-9));
        }
    }

    #[test]
    fn r_squared_is_e2_minus_e1() {
        for tau in TAUS {
            let (e1, e2, _) = e_values(tau).unwrap();
            let r = r_of_tau(tau).unwrap();
            assert!(close(r * r, e2 - e1, 1e-9), "tau={}", tau);
            assert!(close(r, r_of_tau(tau + 2.0).unwrap(), 1e-12));
        }
        assert!(r_of_tau(c(0.0, 1.0)).unwrap().norm() > 1.0);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            weierstrass_p(c(0.1, 0.1), c(0.0, 1e-4)),
            Err(AnalyticError::LowImaginaryPart(_))
        ));
        assert!(matches!(
            weierstrass_p(c(1.0, 1.0), c(0.0, 1.0)),
            Err(AnalyticError::PoleError { .. })
        ));
    }

    #[test]
    fn small_imaginary_part_via_reduction() {
        let tau = c(0.21, 0.04);
        let lat = Lattice::new(tau).unwrap();
        let (e1, e2, e3) = lat.e_values();
        for z in ZS {
            let (p, d) = lat.p_and_prime(z).unwrap();
            let rhs = (p - e1) * (p - e2) * (p - e3) * 4.0;
            assert!(close(d * d, rhs, 1e-8));
        }
        let r = r_of_tau(tau).unwrap();
        assert!(close(r * r, e2 - e1, 1e-8));
    }
}
