//! Exact arithmetic over the Gaussian integers `Z[j]` and their ratios.
//!
//! Every fade state that can make a PAM or square-QAM relay constellation
//! collapse is a ratio of two Gaussian integers, so fade states are kept in
//! exact reduced form here and only converted to floating point at the edges.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::str::FromStr;

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// `re + j·im` with integer parts.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GaussianInt {
    pub re: i64,
    pub im: i64,
}

impl GaussianInt {
    pub const ZERO: Self = Self::new(0, 0);
    pub const ONE: Self = Self::new(1, 0);
    pub const J: Self = Self::new(0, 1);
    pub const UNITS: [Self; 4] = [Self::new(1, 0), Self::new(0, 1), Self::new(-1, 0), Self::new(0, -1)];

    pub const fn new(re: i64, im: i64) -> Self {
        Self { re, im }
    }

    pub fn norm(self) -> i64 {
        self.re * self.re + self.im * self.im
    }

    pub fn conj(self) -> Self {
        Self::new(self.re, -self.im)
    }

    pub fn is_zero(self) -> bool {
        self.re == 0 && self.im == 0
    }

    pub fn is_unit(self) -> bool {
        self.norm() == 1
    }

    /// Multiplication by `j`.
    pub fn mul_j(self) -> Self {
        Self::new(-self.im, self.re)
    }

    /// Swaps real and imaginary parts: `a + jb -> b + ja`, i.e. `j·conj(self)`.
    pub fn swap(self) -> Self {
        Self::new(self.im, self.re)
    }

    pub fn to_complex<T: Scalar>(self) -> Complex<T> {
        Complex::new(T::of(self.re as f64), T::of(self.im as f64))
    }

    /// Euclidean division with the quotient rounded to the nearest Gaussian
    /// integer, so that `norm(rem) <= norm(divisor) / 2`.
    pub fn div_rem(self, divisor: Self) -> (Self, Self) {
        assert!(!divisor.is_zero(), "division by zero Gaussian integer");
        let n = divisor.norm() as i128;
        let (a, b) = (self.re as i128, self.im as i128);
        let (c, d) = (divisor.re as i128, divisor.im as i128);
        // self * conj(divisor)
        let pr = a * c + b * d;
        let pi = b * c - a * d;
        let q = Self::new(round_div(pr, n) as i64, round_div(pi, n) as i64);
        (q, self - q * divisor)
    }

    /// `self / divisor` if the division is exact in `Z[j]`.
    pub fn div_exact(self, divisor: Self) -> Option<Self> {
        if divisor.is_zero() {
            return None;
        }
        let (q, r) = self.div_rem(divisor);
        r.is_zero().then_some(q)
    }

    pub fn divides(self, other: Self) -> bool {
        if self.is_zero() {
            return other.is_zero();
        }
        other.div_rem(self).1.is_zero()
    }

    /// The associate lying in the quadrant `re > 0, im >= 0`, together with
    /// the unit it was multiplied by. Zero maps to itself with unit 1.
    pub fn normalized(self) -> (Self, Self) {
        if self.is_zero() {
            return (self, Self::ONE);
        }
        for u in Self::UNITS {
            let v = self * u;
            if v.re > 0 && v.im >= 0 {
                return (v, u);
            }
        }
        unreachable!("every nonzero Gaussian integer has an associate in the first quadrant")
    }
}

fn round_div(a: i128, n: i128) -> i128 {
    (2 * a + n).div_euclid(2 * n)
}

impl Add for GaussianInt {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.re + o.re, self.im + o.im)
    }
}

impl Sub for GaussianInt {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.re - o.re, self.im - o.im)
    }
}

impl Mul for GaussianInt {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        Self::new(self.re * o.re - self.im * o.im, self.re * o.im + self.im * o.re)
    }
}

impl Mul<i64> for GaussianInt {
    type Output = Self;
    fn mul(self, k: i64) -> Self {
        Self::new(self.re * k, self.im * k)
    }
}

impl Neg for GaussianInt {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.re, -self.im)
    }
}

impl fmt::Display for GaussianInt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.im < 0 {
            write!(f, "{}-{}i", self.re, -self.im)
        } else {
            write!(f, "{}+{}i", self.re, self.im)
        }
    }
}

impl FromStr for GaussianInt {
    type Err = Error;

    /// Accepts `a+bi`, `a-bi`, `a`, `bi`, `i`, with optional whitespace.
    fn from_str(s: &str) -> Result<Self> {
        let err = || Error::Parse(s.to_string());
        let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        if t.is_empty() {
            return Err(err());
        }
        let Some(body) = t.strip_suffix(['i', 'j']) else {
            return t.parse::<i64>().map(|re| Self::new(re, 0)).map_err(|_| err());
        };
        // Split at the last sign that is not the leading one.
        let split = body.char_indices().skip(1).filter(|&(_, c)| c == '+' || c == '-').map(|(i, _)| i).last();
        let (re_part, im_part) = match split {
            Some(i) => (&body[..i], &body[i..]),
            None => ("0", body),
        };
        let re = re_part.parse::<i64>().map_err(|_| err())?;
        let im = match im_part {
            "" | "+" => 1,
            "-" => -1,
            other => other.parse::<i64>().map_err(|_| err())?,
        };
        Ok(Self::new(re, im))
    }
}

/// A greatest common divisor of `a` and `b`, normalized to the quadrant
/// `re > 0, im >= 0`.
pub fn gcd(a: GaussianInt, b: GaussianInt) -> Result<GaussianInt> {
    if a.is_zero() && b.is_zero() {
        return Err(Error::GcdOfZeros);
    }
    let (mut x, mut y) = (a, b);
    while !y.is_zero() {
        let (_, r) = x.div_rem(y);
        x = y;
        y = r;
    }
    Ok(x.normalized().0)
}

/// True iff the only common divisors of `a` and `b` are units.
pub fn is_coprime(a: GaussianInt, b: GaussianInt) -> bool {
    gcd(a, b).map(GaussianInt::is_unit).unwrap_or(false)
}

/// Euler's totient: the count of `1 <= k <= n` with `gcd(k, n) = 1`.
pub fn euler_phi(n: u64) -> Result<u64> {
    if n == 0 {
        return Err(Error::NonPositivePhi);
    }
    let mut rest = n;
    let mut phi = n;
    let mut p = 2;
    while p * p <= rest {
        if rest.is_multiple_of(p) {
            while rest.is_multiple_of(p) {
                rest /= p;
            }
            phi -= phi / p;
        }
        p += 1;
    }
    if rest > 1 {
        phi -= phi / rest;
    }
    Ok(phi)
}

/// Exact ratio `num / den` of Gaussian integers in canonical form: the two
/// parts share no non-unit factor and `den` lies in the quadrant
/// `re > 0, im >= 0`. Zero is stored as `0/1`.
///
/// With this normalization structural equality coincides with equality of
/// the complex values.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct GaussianRational {
    num: GaussianInt,
    den: GaussianInt,
}

impl GaussianRational {
    pub fn new(num: GaussianInt, den: GaussianInt) -> Result<Self> {
        if den.is_zero() {
            return Err(Error::ZeroDenominator);
        }
        if num.is_zero() {
            return Ok(Self { num, den: GaussianInt::ONE });
        }
        let g = gcd(num, den)?;
        let num = num.div_exact(g).expect("gcd divides numerator");
        let den = den.div_exact(g).expect("gcd divides denominator");
        let (den, unit) = den.normalized();
        Ok(Self { num: num * unit, den })
    }

    pub fn from_int(v: GaussianInt) -> Self {
        Self { num: v, den: GaussianInt::ONE }
    }

    pub fn one() -> Self {
        Self::from_int(GaussianInt::ONE)
    }

    pub fn num(&self) -> GaussianInt {
        self.num
    }

    pub fn den(&self) -> GaussianInt {
        self.den
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn recip(&self) -> Result<Self> {
        Self::new(self.den, self.num)
    }

    pub fn mul_int(&self, k: GaussianInt) -> Self {
        Self::new(self.num * k, self.den).expect("denominator stays nonzero")
    }

    pub fn conj(&self) -> Self {
        Self::new(self.num.conj(), self.den.conj()).expect("denominator stays nonzero")
    }

    pub fn to_complex<T: Scalar>(&self) -> Complex<T> {
        self.num.to_complex::<T>() / self.den.to_complex::<T>()
    }

    /// `num·conj(den)`, i.e. the value scaled by the positive integer `|den|²`.
    /// Signs and ratios of its parts give exact angle tests.
    pub fn scaled_value(&self) -> GaussianInt {
        self.num * self.den.conj()
    }

    /// Exact comparison of `|self|` against 1.
    pub fn cmp_unit_circle(&self) -> Ordering {
        self.num.norm().cmp(&self.den.norm())
    }

    fn order_key(&self) -> (i64, i64, i64, i64, i64, i64) {
        (self.num.norm(), self.den.norm(), self.num.re, self.num.im, self.den.re, self.den.im)
    }
}

/// Deterministic tie-break order: by `|num|²`, then `|den|²`, then the parts
/// lexicographically.
impl Ord for GaussianRational {
    fn cmp(&self, other: &Self) -> Ordering {
        self.order_key().cmp(&other.order_key())
    }
}

impl PartialOrd for GaussianRational {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Reduces `q` to canonical form. Values built through
/// [`GaussianRational::new`] are already canonical, so this is idempotent.
pub fn canonical(q: &GaussianRational) -> Result<GaussianRational> {
    GaussianRational::new(q.num, q.den)
}

impl fmt::Display for GaussianRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

impl FromStr for GaussianRational {
    type Err = Error;

    /// Parses `a+bi/c+di`; a missing denominator means 1.
    fn from_str(s: &str) -> Result<Self> {
        match s.split_once('/') {
            Some((n, d)) => Self::new(n.parse()?, d.parse()?),
            None => Self::new(s.parse()?, GaussianInt::ONE),
        }
    }
}
