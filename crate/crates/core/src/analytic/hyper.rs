use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{c, AnalyticError, C64, WORKING_EPS};

/// Distance kept from the boundary of the lens `|lambda| < 1, |1 - lambda| < 1`.
pub const SIGMA_MARGIN: f64 = 1e-6;

// Beyond this radius the series is replaced by the AGM.
const SERIES_RADIUS: f64 = 0.9;

/// Periods `omega1 = pi F(lambda)` and `omega2 = pi i F(1 - lambda)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeriodPair {
    pub omega1: C64,
    pub omega2: C64,
}

impl PeriodPair {
    pub fn tau(&self) -> C64 {
        self.omega2 / self.omega1
    }
}

pub fn in_sigma(lambda: C64) -> bool {
    lambda.norm() < 1.0 - SIGMA_MARGIN && (c(1.0, 0.0) - lambda).norm() < 1.0 - SIGMA_MARGIN
}

/// `sum_n ((2n)!^2 / (2^(4n) n!^4)) lambda^n`, summed until the geometric tail
/// bound falls below working precision.
pub fn hyper_f_series(lambda: C64) -> Result<C64, AnalyticError> {
    let r = lambda.norm();
    if r >= 1.0 - SIGMA_MARGIN {
        return Err(AnalyticError::DomainError(lambda));
    }
    let mut term = c(1.0, 0.0);
    let mut sum = term;
    let mut n = 0.0f64;
    loop {
        let ratio = (2.0 * n + 1.0) / (2.0 * n + 2.0);
        term *= lambda * ratio * ratio;
        sum += term;
        n += 1.0;
        // Coefficients decrease, so the remaining tail is below |term| r / (1 - r).
        if term.norm() * r / (1.0 - r) <= WORKING_EPS * sum.norm() * 0.5 {
            break;
        }
    }
    Ok(sum)
}

/// `F(lambda) = 1 / AGM(1, sqrt(1 - lambda))`, valid on the unit disc.
pub fn hyper_f_agm(lambda: C64) -> Result<C64, AnalyticError> {
    if lambda.norm() >= 1.0 - SIGMA_MARGIN {
        return Err(AnalyticError::DomainError(lambda));
    }
    let mut a = c(1.0, 0.0);
    let mut b = (c(1.0, 0.0) - lambda).sqrt();
    for _ in 0..64 {
        let an = (a + b) * 0.5;
        let mut bn = (a * b).sqrt();
        if (an - bn).norm() > (an + bn).norm() {
            bn = -bn;
        }
        a = an;
        b = bn;
        if (a - b).norm() <= 4.0 * WORKING_EPS * a.norm() {
            break;
        }
    }
    Ok(c(1.0, 0.0) / ((a + b) * 0.5))
}

/// Gauss's `2F1(1/2, 1/2; 1; lambda)` on the open unit disc.
pub fn hyper_f(lambda: C64) -> Result<C64, AnalyticError> {
    if lambda.norm() <= SERIES_RADIUS {
        hyper_f_series(lambda)
    } else {
        hyper_f_agm(lambda)
    }
}

pub fn periods(lambda: C64) -> Result<PeriodPair, AnalyticError> {
    if !in_sigma(lambda) {
        return Err(AnalyticError::DomainError(lambda));
    }
    Ok(PeriodPair {
        omega1: hyper_f(lambda)? * PI,
        omega2: hyper_f(c(1.0, 0.0) - lambda)? * c(0.0, PI),
    })
}

/// `T(lambda) = i F(1 - lambda) / F(lambda)`.
pub fn tau_of_lambda(lambda: C64) -> Result<C64, AnalyticError> {
    Ok(periods(lambda)?.tau())
}

/// An `n x n` grid inside `Sigma`: `n` abscissae in `(0, 1)`, and at each one
/// `n` ordinates spread over 90% of the lens height there.
pub fn sigma_grid(n: usize) -> Vec<C64> {
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        let x = (i as f64 + 0.5) / n as f64;
        let h = (1.0 - x * x).sqrt().min((1.0 - (1.0 - x) * (1.0 - x)).sqrt());
        for j in 0..n {
            let s = 2.0 * (j as f64 + 0.5) / n as f64 - 1.0;
            out.push(c(x, 0.9 * h * s));
        }
    }
    out
}

/// `2^8 (lambda^2 - lambda + 1)^3 / (lambda^2 (lambda - 1)^2)`.
pub fn j_invariant(lambda: C64) -> C64 {
    let one = c(1.0, 0.0);
    let num = (lambda * lambda - lambda + one).powu(3) * 256.0;
    num / (lambda * lambda * (lambda - one) * (lambda - one))
}
