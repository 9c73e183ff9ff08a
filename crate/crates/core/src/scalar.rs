//! Coefficient fields used throughout the crate.
//!
//! Everything algebraic is generic over [`Scalar`], which has two
//! implementations: [`CRational`] (exact complex rationals, the default
//! layer) and [`Complex64`] (double precision, used for groups whose
//! reflection matrices are irrational).

use std::fmt;
use std::hash::Hash;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::str::FromStr;

use num::bigint::BigInt;
use num::rational::BigRational;
use num::traits::{One, Signed, ToPrimitive, Zero};
pub use num::complex::Complex64;

use crate::error::{Error, Result};

/// Hashable identity of a scalar, used to deduplicate group elements.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ScalarKey {
    Exact(BigRational, BigRational),
    Rounded(i64, i64),
}

/// Field of polynomial coefficients.
pub trait Scalar:
    Clone
    + fmt::Debug
    + fmt::Display
    + PartialEq
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    /// True when arithmetic is exact and equality tests are meaningful.
    const EXACT: bool;

    fn zero() -> Self;
    fn one() -> Self;
    fn from_i64(v: i64) -> Self;
    fn from_rational(r: &BigRational) -> Self;
    /// Conversion from a double. Exact scalars convert the binary value exactly.
    fn from_f64(v: f64) -> Self;
    fn from_parts(re: Self, im: Self) -> Self;
    fn to_c64(&self) -> Complex64;
    fn is_zero(&self) -> bool;
    /// Zero test for values produced by cancellation; `scale` is the magnitude
    /// of the quantities that cancelled. Exact scalars ignore it.
    fn is_negligible(&self, scale: f64) -> bool;
    fn is_real(&self) -> bool;
    fn conj(&self) -> Self;
    fn key(&self) -> ScalarKey;

    fn add_ref(&self, o: &Self) -> Self;
    fn sub_ref(&self, o: &Self) -> Self;
    fn mul_ref(&self, o: &Self) -> Self;
    fn div_ref(&self, o: &Self) -> Self;
    fn add_assign_ref(&mut self, o: &Self) {
        *self = self.add_ref(o);
    }

    fn abs_f64(&self) -> f64 {
        self.to_c64().norm()
    }
    fn parse_scalar(s: &str) -> Result<Self>;
}

/// Exact complex rational number.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CRational {
    pub re: BigRational,
    pub im: BigRational,
}

impl CRational {
    pub fn new(re: BigRational, im: BigRational) -> Self {
        CRational { re, im }
    }

    pub fn real(re: BigRational) -> Self {
        CRational { re, im: BigRational::zero() }
    }

    pub fn ratio(num: i64, den: i64) -> Self {
        Self::real(BigRational::new(BigInt::from(num), BigInt::from(den)))
    }

    pub fn i() -> Self {
        CRational { re: BigRational::zero(), im: BigRational::one() }
    }
}

/// Render a rational as `p` or `p/q`.
pub fn format_rational(r: &BigRational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Parse `p`, `p/q`, or a decimal such as `-1.25e-3` into an exact rational.
pub fn parse_rational(s: &str) -> Result<BigRational> {
    let s = s.trim();
    if s.is_empty() {
        return Err(Error::Parse("empty number".into()));
    }
    if let Some((n, d)) = s.split_once('/') {
        let n = BigInt::from_str(n.trim()).map_err(|e| Error::Parse(format!("{s}: {e}")))?;
        let d = BigInt::from_str(d.trim()).map_err(|e| Error::Parse(format!("{s}: {e}")))?;
        if d.is_zero() {
            return Err(Error::Parse(format!("{s}: zero denominator")));
        }
        return Ok(BigRational::new(n, d));
    }
    if let Ok(n) = BigInt::from_str(s) {
        return Ok(BigRational::from_integer(n));
    }
    parse_decimal(s).ok_or_else(|| Error::Parse(format!("not a number: {s}")))
}

fn parse_decimal(s: &str) -> Option<BigRational> {
    let (mantissa, exp) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i32>().ok()?),
        None => (s, 0),
    };
    let (neg, mantissa) = match mantissa.strip_prefix('-') {
        Some(m) => (true, m),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let digits = format!("{int_part}{frac_part}");
    let mut value = BigRational::from_integer(BigInt::from_str(&digits).ok()?);
    let shift = exp - frac_part.len() as i32;
    let ten = BigRational::from_integer(BigInt::from(10));
    if shift >= 0 {
        value *= num::pow(ten, shift as usize);
    } else {
        value /= num::pow(ten, (-shift) as usize);
    }
    Some(if neg { -value } else { value })
}

/// Split `(a, b)` into its two components; anything else is a real literal.
fn split_complex(s: &str) -> Result<Option<(&str, &str)>> {
    let s = s.trim();
    if let Some(inner) = s.strip_prefix('(') {
        let inner = inner
            .strip_suffix(')')
            .ok_or_else(|| Error::Parse(format!("unbalanced parenthesis in {s}")))?;
        let (a, b) = inner
            .split_once(',')
            .ok_or_else(|| Error::Parse(format!("complex literal needs two parts: {s}")))?;
        return Ok(Some((a, b)));
    }
    Ok(None)
}

impl fmt::Display for CRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.im.is_zero() {
            write!(f, "{}", format_rational(&self.re))
        } else {
            write!(f, "({}, {})", format_rational(&self.re), format_rational(&self.im))
        }
    }
}

impl Add for CRational {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        self.add_ref(&o)
    }
}
impl Sub for CRational {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        self.sub_ref(&o)
    }
}
impl Mul for CRational {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        self.mul_ref(&o)
    }
}
impl Div for CRational {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        self.div_ref(&o)
    }
}
impl Neg for CRational {
    type Output = Self;
    fn neg(self) -> Self {
        CRational { re: -self.re, im: -self.im }
    }
}

impl Scalar for CRational {
    const EXACT: bool = true;

    fn zero() -> Self {
        CRational { re: BigRational::zero(), im: BigRational::zero() }
    }
    fn one() -> Self {
        CRational::real(BigRational::one())
    }
    fn from_i64(v: i64) -> Self {
        CRational::real(BigRational::from_integer(BigInt::from(v)))
    }
    fn from_rational(r: &BigRational) -> Self {
        CRational::real(r.clone())
    }
    fn from_f64(v: f64) -> Self {
        CRational::real(BigRational::from_float(v).unwrap_or_else(BigRational::zero))
    }
    fn from_parts(re: Self, im: Self) -> Self {
        // re + i*im for possibly complex parts.
        CRational { re: re.re - im.im, im: re.im + im.re }
    }
    fn to_c64(&self) -> Complex64 {
        Complex64::new(
            self.re.to_f64().unwrap_or(f64::NAN),
            self.im.to_f64().unwrap_or(f64::NAN),
        )
    }
    fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }
    fn is_negligible(&self, _scale: f64) -> bool {
        Scalar::is_zero(self)
    }
    fn is_real(&self) -> bool {
        self.im.is_zero()
    }
    fn conj(&self) -> Self {
        CRational { re: self.re.clone(), im: -self.im.clone() }
    }
    fn key(&self) -> ScalarKey {
        ScalarKey::Exact(self.re.clone(), self.im.clone())
    }

    fn add_ref(&self, o: &Self) -> Self {
        CRational {
            re: &self.re + &o.re,
            im: if self.im.is_zero() { o.im.clone() } else { &self.im + &o.im },
        }
    }
    fn sub_ref(&self, o: &Self) -> Self {
        CRational { re: &self.re - &o.re, im: &self.im - &o.im }
    }
    fn mul_ref(&self, o: &Self) -> Self {
        if self.im.is_zero() && o.im.is_zero() {
            return CRational::real(&self.re * &o.re);
        }
        CRational {
            re: &self.re * &o.re - &self.im * &o.im,
            im: &self.re * &o.im + &self.im * &o.re,
        }
    }
    fn div_ref(&self, o: &Self) -> Self {
        if o.im.is_zero() {
            return CRational { re: &self.re / &o.re, im: &self.im / &o.re };
        }
        let den = &o.re * &o.re + &o.im * &o.im;
        CRational {
            re: (&self.re * &o.re + &self.im * &o.im) / &den,
            im: (&self.im * &o.re - &self.re * &o.im) / &den,
        }
    }
    fn add_assign_ref(&mut self, o: &Self) {
        self.re += &o.re;
        if !o.im.is_zero() {
            self.im += &o.im;
        }
    }

    fn abs_f64(&self) -> f64 {
        if self.im.is_zero() {
            self.re.abs().to_f64().unwrap_or(f64::INFINITY)
        } else {
            self.to_c64().norm()
        }
    }

    fn parse_scalar(s: &str) -> Result<Self> {
        match split_complex(s)? {
            Some((a, b)) => Ok(CRational::new(parse_rational(a)?, parse_rational(b)?)),
            None => Ok(CRational::real(parse_rational(s)?)),
        }
    }
}

/// Rounding grid used to identify floating-point group elements.
pub const FLOAT_KEY_RESOLUTION: f64 = 1e-10;

impl Scalar for Complex64 {
    const EXACT: bool = false;

    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn one() -> Self {
        Complex64::new(1.0, 0.0)
    }
    fn from_i64(v: i64) -> Self {
        Complex64::new(v as f64, 0.0)
    }
    fn from_rational(r: &BigRational) -> Self {
        Complex64::new(r.to_f64().unwrap_or(f64::NAN), 0.0)
    }
    fn from_f64(v: f64) -> Self {
        Complex64::new(v, 0.0)
    }
    fn from_parts(re: Self, im: Self) -> Self {
        re + Complex64::i() * im
    }
    fn to_c64(&self) -> Complex64 {
        *self
    }
    fn is_zero(&self) -> bool {
        self.re == 0.0 && self.im == 0.0
    }
    fn is_negligible(&self, scale: f64) -> bool {
        self.norm() <= 1e-11 * scale.max(1.0)
    }
    fn is_real(&self) -> bool {
        self.im.abs() <= 1e-12 * self.re.abs().max(1.0)
    }
    fn conj(&self) -> Self {
        Complex64::conj(self)
    }
    fn key(&self) -> ScalarKey {
        let round = |v: f64| (v / FLOAT_KEY_RESOLUTION).round() as i64;
        ScalarKey::Rounded(round(self.re), round(self.im))
    }
    fn add_ref(&self, o: &Self) -> Self {
        self + o
    }
    fn sub_ref(&self, o: &Self) -> Self {
        self - o
    }
    fn mul_ref(&self, o: &Self) -> Self {
        self * o
    }
    fn div_ref(&self, o: &Self) -> Self {
        self / o
    }
    fn add_assign_ref(&mut self, o: &Self) {
        *self += o;
    }
    fn parse_scalar(s: &str) -> Result<Self> {
        let real = |t: &str| -> Result<f64> {
            let r = parse_rational(t)?;
            Ok(r.to_f64().unwrap_or(f64::NAN))
        };
        match split_complex(s)? {
            Some((a, b)) => Ok(Complex64::new(real(a)?, real(b)?)),
            None => Ok(Complex64::new(real(s)?, 0.0)),
        }
    }
}

/// `n!` as an exact integer.
pub fn factorial(n: u32) -> BigInt {
    (1..=n).fold(BigInt::one(), |acc, k| acc * BigInt::from(k))
}

/// `ln(n!)` in double precision.
pub fn ln_factorial(n: u32) -> f64 {
    statrs::function::factorial::ln_factorial(n as u64)
}
