use std::fmt;
use std::path::Path;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use super::ExperimentError;
use crate::analytic::{c, ComplexFiberPoint};
use crate::arith::normalize_projective;
use crate::legendre::{CurveError, FiberPoint, ProductPoint};

/// Dense integer polynomial in `t`, lowest degree first, no trailing zeros.
#[derive(Clone, Debug, PartialEq, Eq)]
struct Poly(Vec<BigInt>);

impl Poly {
    fn constant(c: BigInt) -> Self {
        Poly(vec![c]).trimmed()
    }

    fn t() -> Self {
        Poly(vec![BigInt::zero(), BigInt::one()])
    }

    fn trimmed(mut self) -> Self {
        while self.0.last().is_some_and(Zero::is_zero) {
            self.0.pop();
        }
        self
    }

    fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    fn add(&self, o: &Self) -> Self {
        let n = self.0.len().max(o.0.len());
        let z = BigInt::zero();
        Poly((0..n)
            .map(|i| self.0.get(i).unwrap_or(&z) + o.0.get(i).unwrap_or(&z))
            .collect())
        .trimmed()
    }

    fn neg(&self) -> Self {
        Poly(self.0.iter().map(|c| -c).collect())
    }

    fn mul(&self, o: &Self) -> Self {
        if self.is_zero() || o.is_zero() {
            return Poly(vec![]);
        }
        let mut out = vec![BigInt::zero(); self.0.len() + o.0.len() - 1];
        for (i, a) in self.0.iter().enumerate() {
            for (j, b) in o.0.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Poly(out).trimmed()
    }

    fn eval(&self, t: &BigRational) -> BigRational {
        self.0
            .iter()
            .rev()
            .fold(BigRational::zero(), |acc, c| acc * t + BigRational::from_integer(c.clone()))
    }

    fn eval_f64(&self, t: f64) -> f64 {
        self.0
            .iter()
            .rev()
            .fold(0.0, |acc, c| acc * t + c.to_f64().unwrap_or(f64::NAN))
    }
}

/// `p(t) / q(t)` with integer coefficients, kept together with its source text.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RationalFunction {
    num: Poly,
    den: Poly,
    text: String,
}

impl RationalFunction {
    /// Accepts `+ - * ^ / ( )`, integers and the variable `t`; juxtaposition
    /// such as `2t` means multiplication.
    pub fn parse(text: &str) -> Result<Self, ExperimentError> {
        let tokens = tokenize(text)?;
        let mut p = Parser {
            tokens: &tokens,
            pos: 0,
            text,
        };
        let (num, den) = p.expr()?;
        if p.pos != tokens.len() {
            return Err(p.error("trailing input"));
        }
        if den.is_zero() {
            return Err(p.error("denominator is identically zero"));
        }
        Ok(RationalFunction {
            num,
            den,
            text: text.trim().to_string(),
        })
    }

    pub fn constant(c: i64) -> Self {
        RationalFunction {
            num: Poly::constant(c.into()),
            den: Poly::constant(1.into()),
            text: c.to_string(),
        }
    }

    pub fn is_identically_zero(&self) -> bool {
        self.num.is_zero()
    }

    /// `None` where the denominator vanishes.
    pub fn eval(&self, t: &BigRational) -> Option<BigRational> {
        let d = self.den.eval(t);
        if d.is_zero() {
            None
        } else {
            Some(self.num.eval(t) / d)
        }
    }

    pub fn eval_f64(&self, t: f64) -> f64 {
        self.num.eval_f64(t) / self.den.eval_f64(t)
    }
}

impl fmt::Display for RationalFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Int(BigInt),
    T,
    Op(char),
}

fn tokenize(text: &str) -> Result<Vec<Tok>, ExperimentError> {
    let mut out = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let ch = chars[i];
        if ch.is_whitespace() {
            i += 1;
        } else if ch.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let s: String = chars[start..i].iter().collect();
            out.push(Tok::Int(s.parse().expect("digits")));
        } else if ch == 't' {
            out.push(Tok::T);
            i += 1;
        } else if "+-*/^()".contains(ch) {
            out.push(Tok::Op(ch));
            i += 1;
        } else {
            return Err(ExperimentError::Parse {
                input: text.to_string(),
                reason: format!("unexpected character {:?}", ch),
            });
        }
    }
    Ok(out)
}

type Frac = (Poly, Poly);

struct Parser<'a> {
    tokens: &'a [Tok],
    pos: usize,
    text: &'a str,
}

impl Parser<'_> {
    fn error(&self, reason: &str) -> ExperimentError {
        ExperimentError::Parse {
            input: self.text.to_string(),
            reason: reason.to_string(),
        }
    }

    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos)
    }

    fn expr(&mut self) -> Result<Frac, ExperimentError> {
        let mut acc = self.term()?;
        while let Some(Tok::Op(op @ ('+' | '-'))) = self.peek().cloned() {
            self.pos += 1;
            let (n, d) = self.term()?;
            let n = if op == '-' { n.neg() } else { n };
            acc = (acc.0.mul(&d).add(&n.mul(&acc.1)), acc.1.mul(&d));
        }
        Ok(acc)
    }

    fn term(&mut self) -> Result<Frac, ExperimentError> {
        let mut acc = self.unary()?;
        loop {
            match self.peek() {
                Some(Tok::Op('*')) => {
                    self.pos += 1;
                    let (n, d) = self.unary()?;
                    acc = (acc.0.mul(&n), acc.1.mul(&d));
                }
                Some(Tok::Op('/')) => {
                    self.pos += 1;
                    let (n, d) = self.unary()?;
                    if n.is_zero() {
                        return Err(self.error("division by zero"));
                    }
                    acc = (acc.0.mul(&d), acc.1.mul(&n));
                }
                Some(Tok::Int(_)) | Some(Tok::T) | Some(Tok::Op('(')) => {
                    let (n, d) = self.power()?;
                    acc = (acc.0.mul(&n), acc.1.mul(&d));
                }
                _ => return Ok(acc),
            }
        }
    }

    fn unary(&mut self) -> Result<Frac, ExperimentError> {
        match self.peek() {
            Some(Tok::Op('-')) => {
                self.pos += 1;
                let (n, d) = self.unary()?;
                Ok((n.neg(), d))
            }
            Some(Tok::Op('+')) => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Frac, ExperimentError> {
        let base = self.atom()?;
        if let Some(Tok::Op('^')) = self.peek() {
            self.pos += 1;
            let k = match self.peek() {
                Some(Tok::Int(k)) => k.to_u32().ok_or_else(|| self.error("exponent too large"))?,
                _ => return Err(self.error("expected a non-negative integer exponent")),
            };
            self.pos += 1;
            let mut acc = (Poly::constant(1.into()), Poly::constant(1.into()));
            for _ in 0..k {
                acc = (acc.0.mul(&base.0), acc.1.mul(&base.1));
            }
            return Ok(acc);
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Frac, ExperimentError> {
        let one = Poly::constant(1.into());
        match self.peek().cloned() {
            Some(Tok::Int(n)) => {
                self.pos += 1;
                Ok((Poly::constant(n), one))
            }
            Some(Tok::T) => {
                self.pos += 1;
                Ok((Poly::t(), one))
            }
            Some(Tok::Op('(')) => {
                self.pos += 1;
                let inner = self.expr()?;
                if self.peek() != Some(&Tok::Op(')')) {
                    return Err(self.error("missing ')'"));
                }
                self.pos += 1;
                Ok(inner)
            }
            _ => Err(self.error("expected a number, 't' or '('")),
        }
    }
}

/// Coordinate rules `[x(t) : y(t) : z(t)]` for one factor; `z` defaults to 1.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ComponentSpec {
    pub x: RationalFunction,
    pub y: RationalFunction,
    pub z: RationalFunction,
}

/// A one-parameter family of points `t -> (P_1(t), ..., P_g(t), lambda(t))`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawFamily", into = "RawFamily")]
pub struct FamilySpec {
    pub g: usize,
    pub components: Vec<ComponentSpec>,
    pub lambda: RationalFunction,
}

#[derive(Serialize, Deserialize)]
struct RawComponent {
    x: String,
    y: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    z: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct RawFamily {
    g: usize,
    components: Vec<RawComponent>,
    lambda: String,
}

impl TryFrom<RawFamily> for FamilySpec {
    type Error = ExperimentError;

    fn try_from(raw: RawFamily) -> Result<Self, Self::Error> {
        let components = raw
            .components
            .iter()
            .map(|c| {
                Ok(ComponentSpec {
                    x: RationalFunction::parse(&c.x)?,
                    y: RationalFunction::parse(&c.y)?,
                    z: match &c.z {
                        Some(z) => RationalFunction::parse(z)?,
                        None => RationalFunction::constant(1),
                    },
                })
            })
            .collect::<Result<Vec<_>, ExperimentError>>()?;
        FamilySpec::new(components, RationalFunction::parse(&raw.lambda)?)
            .and_then(|f| {
                if f.g == raw.g {
                    Ok(f)
                } else {
                    Err(ExperimentError::Shape(format!(
                        "g = {} but {} components given",
                        raw.g,
                        f.components.len()
                    )))
                }
            })
    }
}

impl From<FamilySpec> for RawFamily {
    fn from(f: FamilySpec) -> Self {
        RawFamily {
            g: f.g,
            components: f
                .components
                .iter()
                .map(|c| RawComponent {
                    x: c.x.to_string(),
                    y: c.y.to_string(),
                    z: Some(c.z.to_string()).filter(|z| z != "1"),
                })
                .collect(),
            lambda: f.lambda.to_string(),
        }
    }
}

impl FamilySpec {
    pub fn new(
        components: Vec<ComponentSpec>,
        lambda: RationalFunction,
    ) -> Result<Self, ExperimentError> {
        if components.is_empty() {
            return Err(ExperimentError::Shape("a family needs g >= 1 components".into()));
        }
        Ok(FamilySpec {
            g: components.len(),
            components,
            lambda,
        })
    }

    pub fn from_json(text: &str) -> Result<Self, ExperimentError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// `builtin:<name>` or a path to a JSON file.
    pub fn resolve(arg: &str) -> Result<Self, ExperimentError> {
        match arg.strip_prefix("builtin:") {
            Some("x2") => Ok(builtin_family_x2()),
            Some("identity") => Ok(identity_family()),
            Some("two-torsion") => Ok(two_torsion_family()),
            Some(other) => Err(ExperimentError::Shape(format!("unknown builtin family {other:?}"))),
            None => Self::load(Path::new(arg)),
        }
    }

    pub fn lambda_at(&self, t: &BigRational) -> Result<BigRational, ExperimentError> {
        let lambda = self
            .lambda
            .eval(t)
            .ok_or_else(|| ExperimentError::Undefined(t.to_string()))?;
        if lambda.is_zero() || lambda.is_one() {
            return Err(CurveError::BadLambda(lambda).into());
        }
        Ok(lambda)
    }

    /// The exact point at `t`, checked against the curve equation.
    pub fn point_at(&self, t: &BigRational) -> Result<ProductPoint, ExperimentError> {
        let lambda = self.lambda_at(t)?;
        let mut pts = Vec::with_capacity(self.g);
        for comp in &self.components {
            let coords = [&comp.x, &comp.y, &comp.z]
                .iter()
                .map(|f| f.eval(t).ok_or_else(|| ExperimentError::Undefined(t.to_string())))
                .collect::<Result<Vec<_>, _>>()?;
            let point = normalize_projective(&coords)
                .map_err(|_| ExperimentError::Undefined(t.to_string()))?;
            pts.push(FiberPoint::new(point, lambda.clone())?);
        }
        Ok(ProductPoint::new(pts)?)
    }

    /// Floating-point evaluation at a real parameter: `(lambda, points)`.
    pub fn complex_point_at(&self, t: f64) -> Option<(f64, Vec<ComplexFiberPoint>)> {
        let lambda = self.lambda.eval_f64(t);
        if !lambda.is_finite() {
            return None;
        }
        let lam = c(lambda, 0.0);
        let pts = self
            .components
            .iter()
            .map(|comp| {
                let z = comp.z.eval_f64(t);
                if comp.z.is_identically_zero() || z == 0.0 {
                    ComplexFiberPoint::identity(lam)
                } else {
                    ComplexFiberPoint::affine_point(
                        c(comp.x.eval_f64(t) / z, 0.0),
                        c(comp.y.eval_f64(t) / z, 0.0),
                        lam,
                    )
                }
            })
            .collect();
        Some((lambda, pts))
    }
}

fn single(x: &str, y: &str, z: Option<&str>, lambda: &str) -> FamilySpec {
    let comp = ComponentSpec {
        x: RationalFunction::parse(x).expect("builtin"),
        y: RationalFunction::parse(y).expect("builtin"),
        z: RationalFunction::parse(z.unwrap_or("1")).expect("builtin"),
    };
    FamilySpec::new(vec![comp], RationalFunction::parse(lambda).expect("builtin")).expect("builtin")
}

/// `P(t) = ([2 : 2t : 1], lambda = 2 - 2t^2)`.
pub fn builtin_family_x2() -> FamilySpec {
    single("2", "2*t", None, "2 - 2*t^2")
}

/// The zero section `[0 : 1 : 0]` over `lambda = t`.
pub fn identity_family() -> FamilySpec {
    single("0", "1", Some("0"), "t")
}

/// The 2-torsion section `(0, 0)` over `lambda = t`.
pub fn two_torsion_family() -> FamilySpec {
    single("0", "0", None, "t")
}

/// Parses `a..b` (inclusive, integers) or a comma-separated list of rationals.
pub fn parse_samples(spec: &str) -> Result<Vec<BigRational>, ExperimentError> {
    let bad = |reason: &str| ExperimentError::Parse {
        input: spec.to_string(),
        reason: reason.to_string(),
    };
    if let Some((a, b)) = spec.split_once("..") {
        let a: i64 = a.trim().parse().map_err(|_| bad("range start is not an integer"))?;
        let b: i64 = b.trim().parse().map_err(|_| bad("range end is not an integer"))?;
        if a > b {
            return Err(bad("empty range"));
        }
        return Ok((a..=b).map(|k| BigRational::from_integer(k.into())).collect());
    }
    spec.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| parse_rational(s.trim()).ok_or_else(|| bad("not a rational number")))
        .collect()
}

/// `p` or `p/q` with integers `p`, `q != 0`.
pub fn parse_rational(s: &str) -> Option<BigRational> {
    let (n, d) = match s.split_once('/') {
        Some((n, d)) => (n.trim().parse::<BigInt>().ok()?, d.trim().parse::<BigInt>().ok()?),
        None => (s.trim().parse::<BigInt>().ok()?, BigInt::one()),
    };
    if d.is_zero() {
        return None;
    }
    Some(BigRational::new(n, d))
}

pub(crate) fn rational_text(q: &BigRational) -> String {
    if q.denom().is_one() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}
