//! Exact rational arithmetic, canonical projective points and sparse
//! multivariate integer polynomials.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use num_bigint::{BigInt, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ArithError {
    #[error("all projective coordinates are zero")]
    AllZero,
    #[error("arity mismatch: expected {expected} arguments, got {got}")]
    ArityMismatch { expected: usize, got: usize },
    #[error("inner polynomials do not share one variable set")]
    VariableMismatch,
}

/// Natural logarithm of `|n|` for a nonzero big integer, accurate to a few ulps
/// regardless of size.
pub fn log_abs(n: &BigInt) -> f64 {
    debug_assert!(!n.is_zero());
    let bits = n.bits();
    if bits <= 1000 {
        return n.abs().to_f64().unwrap().ln();
    }
    let shift = bits - 64;
    let top = (n.abs() >> shift).to_f64().unwrap();
    top.ln() + shift as f64 * std::f64::consts::LN_2
}

/// Approximates a rational by the nearest double (handles huge parts).
pub fn rational_to_f64(q: &BigRational) -> f64 {
    if let (Some(n), Some(d)) = (q.numer().to_f64(), q.denom().to_f64()) {
        if n.is_finite() && d.is_finite() && d != 0.0 {
            return n / d;
        }
    }
    let sign = if q.is_negative() { -1.0 } else { 1.0 };
    if q.is_zero() {
        return 0.0;
    }
    sign * (log_abs(q.numer()) - log_abs(q.denom())).exp()
}

/// Point of projective space over Q in its canonical integer form: coprime
/// coordinates whose first nonzero entry is positive.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ProjectivePoint {
    coords: Vec<BigInt>,
}

impl ProjectivePoint {
    /// Canonicalizes integer coordinates.
    pub fn from_integers(mut coords: Vec<BigInt>) -> Result<Self, ArithError> {
        let g = coords.iter().fold(BigInt::zero(), |acc, c| acc.gcd(c));
        if g.is_zero() {
            return Err(ArithError::AllZero);
        }
        let first_negative = coords
            .iter()
            .find(|c| !c.is_zero())
            .map(|c| c.is_negative())
            .unwrap_or(false);
        for c in coords.iter_mut() {
            *c = &*c / &g;
            if first_negative {
                *c = -&*c;
            }
        }
        Ok(ProjectivePoint { coords })
    }

    pub fn from_i64s(coords: &[i64]) -> Result<Self, ArithError> {
        Self::from_integers(coords.iter().map(|&c| BigInt::from(c)).collect())
    }

    pub fn coords(&self) -> &[BigInt] {
        &self.coords
    }

    /// Projective dimension `n` (the point has `n + 1` coordinates).
    pub fn dimension(&self) -> usize {
        self.coords.len() - 1
    }

    /// Largest absolute coordinate.
    pub fn max_abs(&self) -> BigInt {
        self.coords
            .iter()
            .map(|c| c.abs())
            .max()
            .unwrap_or_else(BigInt::zero)
    }

    pub fn as_rationals(&self) -> Vec<BigRational> {
        self.coords
            .iter()
            .map(|c| BigRational::from_integer(c.clone()))
            .collect()
    }
}

impl fmt::Display for ProjectivePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, c) in self.coords.iter().enumerate() {
            if i > 0 {
                write!(f, ":")?;
            }
            write!(f, "{}", c)?;
        }
        write!(f, "]")
    }
}

/// Clears denominators and reduces to the canonical representative.
pub fn normalize_projective(raw: &[BigRational]) -> Result<ProjectivePoint, ArithError> {
    let lcm = raw
        .iter()
        .fold(BigInt::one(), |acc, q| acc.lcm(q.denom()));
    let ints = raw
        .iter()
        .map(|q| q.numer() * (&lcm / q.denom()))
        .collect();
    ProjectivePoint::from_integers(ints)
}

pub type Exponents = Vec<u32>;

/// Sparse multivariate polynomial with big integer coefficients.
///
/// Terms are keyed by exponent vectors; zero coefficients are never stored.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IntPolynomial {
    vars: Vec<String>,
    terms: BTreeMap<Exponents, BigInt>,
}

impl IntPolynomial {
    pub fn zero(vars: &[&str]) -> Self {
        IntPolynomial {
            vars: vars.iter().map(|s| s.to_string()).collect(),
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(vars: &[&str], c: impl Into<BigInt>) -> Self {
        let mut p = Self::zero(vars);
        p.add_term(vec![0; vars.len()], c.into());
        p
    }

    /// The polynomial consisting of variable `index` alone.
    pub fn var(vars: &[&str], index: usize) -> Self {
        let mut e = vec![0; vars.len()];
        e[index] = 1;
        let mut p = Self::zero(vars);
        p.add_term(e, BigInt::one());
        p
    }

    /// Builds a polynomial from `(coefficient, exponents)` pairs; like terms are merged.
    pub fn from_terms<I>(vars: &[&str], terms: I) -> Self
    where
        I: IntoIterator<Item = (i64, Exponents)>,
    {
        let mut p = Self::zero(vars);
        for (c, e) in terms {
            assert_eq!(e.len(), vars.len(), "exponent vector length");
            p.add_term(e, BigInt::from(c));
        }
        p
    }

    fn with_vars(vars: Vec<String>) -> Self {
        IntPolynomial {
            vars,
            terms: BTreeMap::new(),
        }
    }

    fn add_term(&mut self, e: Exponents, c: BigInt) {
        if c.is_zero() {
            return;
        }
        let entry = self.terms.entry(e);
        match entry {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    pub fn variables(&self) -> &[String] {
        &self.vars
    }

    pub fn nvars(&self) -> usize {
        self.vars.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Exponents, &BigInt)> {
        self.terms.iter()
    }

    pub fn coefficient(&self, e: &[u32]) -> BigInt {
        self.terms.get(e).cloned().unwrap_or_else(BigInt::zero)
    }

    /// Total degree; `None` for the zero polynomial.
    pub fn total_degree(&self) -> Option<u32> {
        self.terms.keys().map(|e| e.iter().sum()).max()
    }

    /// Degree in a single variable; `None` for the zero polynomial.
    pub fn degree_in(&self, var: usize) -> Option<u32> {
        self.terms.keys().map(|e| e[var]).max()
    }

    /// Returns `Some(d)` if every term has degree `d` in the given subset of
    /// variables.
    pub fn homogeneous_degree_in(&self, subset: &[usize]) -> Option<u32> {
        let mut degrees = self
            .terms
            .keys()
            .map(|e| subset.iter().map(|&i| e[i]).sum::<u32>());
        let first = degrees.next()?;
        degrees.all(|d| d == first).then_some(first)
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.vars, other.vars, "variable sets differ");
        let mut out = self.clone();
        for (e, c) in &other.terms {
            out.add_term(e.clone(), c.clone());
        }
        out
    }

    pub fn neg(&self) -> Self {
        let mut out = self.clone();
        for c in out.terms.values_mut() {
            *c = -&*c;
        }
        out
    }

    pub fn scale(&self, k: &BigInt) -> Self {
        if k.is_zero() {
            return Self::with_vars(self.vars.clone());
        }
        let mut out = self.clone();
        for c in out.terms.values_mut() {
            *c *= k;
        }
        out
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.vars, other.vars, "variable sets differ");
        if self.is_zero() || other.is_zero() {
            return Self::with_vars(self.vars.clone());
        }
        let fits = |p: &Self| p.terms.keys().all(|e| e.iter().all(|&k| k < 1 << 15));
        if self.nvars() <= 8 && fits(self) && fits(other) {
            return self.mul_packed(other);
        }
        let mut acc: HashMap<Exponents, BigInt> = HashMap::new();
        for (ea, ca) in &self.terms {
            for (eb, cb) in &other.terms {
                let e: Exponents = ea.iter().zip(eb).map(|(a, b)| a + b).collect();
                let prod = ca * cb;
                match acc.get_mut(&e) {
                    Some(c) => *c += prod,
                    None => {
                        acc.insert(e, prod);
                    }
                }
            }
        }
        IntPolynomial {
            vars: self.vars.clone(),
            terms: acc.into_iter().filter(|(_, c)| !c.is_zero()).collect(),
        }
    }

    // Exponents packed 16 bits per variable; sums of two entries below 2^15
    // cannot carry into the neighbouring field.
    fn mul_packed(&self, other: &Self) -> Self {
        let n = self.nvars();
        let pack = |e: &Exponents| -> u128 {
            e.iter()
                .enumerate()
                .fold(0u128, |acc, (i, &k)| acc | (u128::from(k) << (16 * i)))
        };
        let a: Vec<(u128, &BigInt)> = self.terms.iter().map(|(e, c)| (pack(e), c)).collect();
        let b: Vec<(u128, &BigInt)> = other.terms.iter().map(|(e, c)| (pack(e), c)).collect();
        let mut acc: HashMap<u128, BigInt> = HashMap::with_capacity((a.len() * b.len()).min(1 << 22));
        for (ka, ca) in &a {
            for (kb, cb) in &b {
                let prod = *ca * *cb;
                match acc.get_mut(&(ka + kb)) {
                    Some(c) => *c += prod,
                    None => {
                        acc.insert(ka + kb, prod);
                    }
                }
            }
        }
        let terms = acc
            .into_iter()
            .filter(|(_, c)| !c.is_zero())
            .map(|(k, c)| {
                let e = (0..n).map(|i| ((k >> (16 * i)) & 0xffff) as u32).collect();
                (e, c)
            })
            .collect();
        IntPolynomial {
            vars: self.vars.clone(),
            terms,
        }
    }

    pub fn pow(&self, mut k: u32) -> Self {
        let mut base = self.clone();
        let mut out = Self::constant(
            &self.vars.iter().map(String::as_str).collect::<Vec<_>>(),
            1,
        );
        while k > 0 {
            if k & 1 == 1 {
                out = out.mul(&base);
            }
            k >>= 1;
            if k > 0 {
                base = base.mul(&base);
            }
        }
        out
    }

    /// Exact evaluation at rational arguments.
    ///
    /// Arguments are brought to a common denominator `D` and the sum is
    /// accumulated in integers as `D^M * value` (`M` the total degree), so
    /// only one fraction is reduced.
    pub fn eval(&self, args: &[BigRational]) -> Result<BigRational, ArithError> {
        if args.len() != self.nvars() {
            return Err(ArithError::ArityMismatch {
                expected: self.nvars(),
                got: args.len(),
            });
        }
        let d = args
            .iter()
            .fold(BigInt::one(), |acc, a| acc.lcm(a.denom()));
        let nums: Vec<BigInt> = args.iter().map(|a| a.numer() * (&d / a.denom())).collect();
        let m = self.total_degree().unwrap_or(0) as usize;
        let mut d_pows = vec![BigInt::one()];
        for _ in 0..m {
            let next = d_pows.last().unwrap() * &d;
            d_pows.push(next);
        }
        let mut powers: Vec<Vec<BigInt>> = vec![vec![BigInt::one()]; args.len()];
        let mut total = BigInt::zero();
        for (e, c) in &self.terms {
            let mut term = c.clone();
            let mut deg = 0usize;
            for (i, &k) in e.iter().enumerate() {
                if k == 0 {
                    continue;
                }
                deg += k as usize;
                while powers[i].len() <= k as usize {
                    let next = powers[i].last().unwrap() * &nums[i];
                    powers[i].push(next);
                }
                term *= &powers[i][k as usize];
            }
            if deg < m {
                term *= &d_pows[m - deg];
            }
            total += term;
        }
        Ok(BigRational::new(total, d_pows[m].clone()))
    }

    /// Exact evaluation at integer arguments.
    pub fn eval_int(&self, args: &[BigInt]) -> Result<BigInt, ArithError> {
        if args.len() != self.nvars() {
            return Err(ArithError::ArityMismatch {
                expected: self.nvars(),
                got: args.len(),
            });
        }
        let mut powers: Vec<Vec<BigInt>> = vec![vec![BigInt::one()]; args.len()];
        let mut total = BigInt::zero();
        for (e, c) in &self.terms {
            let mut term = c.clone();
            for (i, &k) in e.iter().enumerate() {
                if k == 0 {
                    continue;
                }
                while powers[i].len() <= k as usize {
                    let next = powers[i].last().unwrap() * &args[i];
                    powers[i].push(next);
                }
                term *= &powers[i][k as usize];
            }
            total += term;
        }
        Ok(total)
    }

    /// Substitutes `inner[i]` for the i-th variable of `self`.
    ///
    /// Terms are grouped by their leading exponent and the groups are combined
    /// Horner-style, so each power of `inner[0]` is multiplied in only once.
    pub fn compose(&self, inner: &[IntPolynomial]) -> Result<IntPolynomial, ArithError> {
        if inner.len() != self.nvars() {
            return Err(ArithError::ArityMismatch {
                expected: self.nvars(),
                got: inner.len(),
            });
        }
        let target_vars = match inner.first() {
            Some(p) => p.vars.clone(),
            None => return Ok(self.clone()),
        };
        if inner.iter().any(|p| p.vars != target_vars) {
            return Err(ArithError::VariableMismatch);
        }
        let mut cache = PowerCache::new(inner);
        Ok(compose_rec(&self.terms, 0, inner, &mut cache, &target_vars))
    }
}

struct PowerCache<'a> {
    inner: &'a [IntPolynomial],
    powers: Vec<Vec<IntPolynomial>>,
}

impl<'a> PowerCache<'a> {
    fn new(inner: &'a [IntPolynomial]) -> Self {
        let powers = inner
            .iter()
            .map(|p| {
                let names: Vec<&str> = p.vars.iter().map(String::as_str).collect();
                vec![IntPolynomial::constant(&names, 1)]
            })
            .collect();
        PowerCache { inner, powers }
    }

    fn get(&mut self, var: usize, k: u32) -> &IntPolynomial {
        while self.powers[var].len() <= k as usize {
            let next = self.powers[var].last().unwrap().mul(&self.inner[var]);
            self.powers[var].push(next);
        }
        &self.powers[var][k as usize]
    }
}

// Horner in variable `depth`: f = sum_k inner[depth]^k * f_k where f_k only
// involves the later variables.
fn compose_rec(
    terms: &BTreeMap<Exponents, BigInt>,
    depth: usize,
    inner: &[IntPolynomial],
    cache: &mut PowerCache<'_>,
    target_vars: &[String],
) -> IntPolynomial {
    if depth == inner.len() {
        let c = terms.values().fold(BigInt::zero(), |a, c| a + c);
        let mut p = IntPolynomial::with_vars(target_vars.to_vec());
        p.add_term(vec![0; target_vars.len()], c);
        return p;
    }
    let mut groups: BTreeMap<u32, BTreeMap<Exponents, BigInt>> = BTreeMap::new();
    for (e, c) in terms {
        let mut rest = e.clone();
        let k = rest[depth];
        rest[depth] = 0;
        groups.entry(k).or_default().insert(rest, c.clone());
    }
    let mut out = IntPolynomial::with_vars(target_vars.to_vec());
    for (k, group) in groups {
        let sub = compose_rec(&group, depth + 1, inner, cache, target_vars);
        if sub.is_zero() {
            continue;
        }
        let term = if k == 0 {
            sub
        } else {
            cache.get(depth, k).mul(&sub)
        };
        out = out.add(&term);
    }
    out
}

impl fmt::Display for IntPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (e, c)) in self.terms.iter().rev().enumerate() {
            let (sign, mag) = match c.sign() {
                Sign::Minus => ("-", -c.clone()),
                _ => ("+", c.clone()),
            };
            if i == 0 {
                if sign == "-" {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {} ", sign)?;
            }
            let monomial: Vec<String> = e
                .iter()
                .enumerate()
                .filter(|(_, &k)| k > 0)
                .map(|(v, &k)| {
                    if k == 1 {
                        self.vars[v].clone()
                    } else {
                        format!("{}^{}", self.vars[v], k)
                    }
                })
                .collect();
            if monomial.is_empty() {
                write!(f, "{}", mag)?;
            } else if mag.is_one() {
                write!(f, "{}", monomial.join("*"))?;
            } else {
                write!(f, "{}*{}", mag, monomial.join("*"))?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn normalize_examples() {
        let p = normalize_projective(&[q(3, 1), q(6, 1)]).unwrap();
        assert_eq!(p, ProjectivePoint::from_i64s(&[1, 2]).unwrap());
        assert_eq!(p.coords(), &[BigInt::from(1), BigInt::from(2)]);

        let p = normalize_projective(&[q(1, 2), q(1, 3)]).unwrap();
        assert_eq!(p.coords(), &[BigInt::from(3), BigInt::from(2)]);

        let p = normalize_projective(&[q(0, 1), q(-5, 1), q(10, 1)]).unwrap();
        assert_eq!(
            p.coords(),
            &[BigInt::from(0), BigInt::from(1), BigInt::from(-2)]
        );
    }

    #[test]
    fn normalize_all_zero() {
        assert_eq!(
            normalize_projective(&[q(0, 1), q(0, 7)]),
            Err(ArithError::AllZero)
        );
    }

    #[test]
    fn log_abs_large() {
        let n = BigInt::from(3).pow(2000u32);
        let expected = 2000.0 * 3f64.ln();
        assert!((log_abs(&n) - expected).abs() < 1e-9 * expected);
        assert!((log_abs(&BigInt::from(-24)) - 24f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn eval_examples() {
        let vars = ["X0"];
        let p = IntPolynomial::from_terms(&vars, [(1, vec![2])]);
        assert_eq!(p.eval(&[q(3, 1)]).unwrap(), q(9, 1));

        let vars4 = ["X0", "X1", "X2", "X3"];
        let g12 = IntPolynomial::from_terms(&vars4, [(8, vec![0, 3, 1, 0])]);
        let v = g12.eval(&[q(0, 1), q(1, 1), q(1, 1), q(5, 1)]).unwrap();
        assert_eq!(v, q(8, 1));

        let z = IntPolynomial::zero(&vars4);
        assert_eq!(z.eval(&[q(1, 2), q(3, 1), q(0, 1), q(-1, 1)]).unwrap(), q(0, 1));

        assert_eq!(
            g12.eval(&[q(1, 1)]),
            Err(ArithError::ArityMismatch { expected: 4, got: 1 })
        );
    }

    #[test]
    fn compose_examples() {
        let vars = ["X0", "X1"];
        let sum = IntPolynomial::from_terms(&vars, [(1, vec![1, 0]), (1, vec![0, 1])]);
        let sq0 = IntPolynomial::from_terms(&vars, [(1, vec![2, 0])]);
        let sq1 = IntPolynomial::from_terms(&vars, [(1, vec![0, 2])]);
        let c = sum.compose(&[sq0.clone(), sq1.clone()]).unwrap();
        assert_eq!(c, sq0.add(&sq1));

        let x0 = IntPolynomial::var(&["X0"], 0);
        let p = IntPolynomial::from_terms(&vars, [(3, vec![1, 2]), (-7, vec![0, 0])]);
        assert_eq!(x0.compose(&[p.clone()]).unwrap(), p);

        assert!(matches!(
            sum.compose(&[sq0]),
            Err(ArithError::ArityMismatch { .. })
        ));
    }

    #[test]
    fn display_is_readable() {
        let vars = ["X0", "X1"];
        let p = IntPolynomial::from_terms(&vars, [(-2, vec![1, 1]), (1, vec![0, 0])]);
        assert_eq!(p.to_string(), "-2*X0*X1 + 1");
    }

    fn small_poly(nvars: usize) -> impl Strategy<Value = IntPolynomial> {
        prop::collection::vec(
            (-5i64..=5, prop::collection::vec(0u32..=2, nvars)),
            0..5,
        )
        .prop_map(move |terms| {
            let names: Vec<String> = (0..nvars).map(|i| format!("X{}", i)).collect();
            let refs: Vec<&str> = names.iter().map(String::as_str).collect();
            IntPolynomial::from_terms(&refs, terms)
        })
    }

    fn small_rat() -> impl Strategy<Value = BigRational> {
        (-6i64..=6, 1i64..=4).prop_map(|(n, d)| q(n, d))
    }

    proptest! {
        #[test]
        fn normalize_scale_invariant(
            v in prop::collection::vec(-30i64..=30, 2..5),
            cn in 1i64..=9, cd in 1i64..=9, neg in any::<bool>(),
        ) {
            prop_assume!(v.iter().any(|&x| x != 0));
            let raw: Vec<BigRational> = v.iter().map(|&x| q(x, 1)).collect();
            let c = if neg { q(-cn, cd) } else { q(cn, cd) };
            let scaled: Vec<BigRational> = raw.iter().map(|x| x * &c).collect();
            let a = normalize_projective(&raw).unwrap();
            let b = normalize_projective(&scaled).unwrap();
            prop_assert_eq!(&a, &b);
            let again = normalize_projective(&a.as_rationals()).unwrap();
            prop_assert_eq!(a, again);
        }

        #[test]
        fn compose_commutes_with_eval(
            f in small_poly(2),
            g0 in small_poly(3),
            g1 in small_poly(3),
            args in prop::collection::vec(small_rat(), 3),
        ) {
            let comp = f.compose(&[g0.clone(), g1.clone()]).unwrap();
            let lhs = comp.eval(&args).unwrap();
            let inner_vals = vec![g0.eval(&args).unwrap(), g1.eval(&args).unwrap()];
            let rhs = f.eval(&inner_vals).unwrap();
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn compose_degree_bound(f in small_poly(2), g0 in small_poly(2), g1 in small_poly(2)) {
            let comp = f.compose(&[g0.clone(), g1.clone()]).unwrap();
            if let Some(d) = comp.total_degree() {
                let dg = g0.total_degree().unwrap_or(0).max(g1.total_degree().unwrap_or(0));
                prop_assert!(d <= f.total_degree().unwrap() * dg);
            }
            let prod = g0.mul(&g1);
            if !prod.is_zero() {
                prop_assert_eq!(
                    prod.total_degree().unwrap(),
                    g0.total_degree().unwrap() + g1.total_degree().unwrap()
                );
            }
        }
    }
}
