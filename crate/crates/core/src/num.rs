//! Scalar plumbing: complex alias, double-double reals, and scaled complex values.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Rem, Sub, SubAssign};

use num_complex::Complex;
use num_traits::{Num, One, Zero};
use serde::{Deserialize, Serialize};

pub type C64 = Complex<f64>;

pub const I: C64 = C64 { re: 0.0, im: 1.0 };

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Primitive cube root of unity e^{2 pi i/3}.
pub fn eta() -> C64 {
    C64::from_polar(1.0, 2.0 * std::f64::consts::PI / 3.0)
}

/// Real scalar usable in the generic determinant and series code.
pub trait Real:
    Copy + Send + Sync + fmt::Debug + PartialOrd + Num + Neg<Output = Self> + 'static
{
    fn from_f64(x: f64) -> Self;
    fn to_f64(self) -> f64;
    /// Unit roundoff of the representation.
    const EPS: f64;
}

impl Real for f64 {
    fn from_f64(x: f64) -> Self {
        x
    }
    fn to_f64(self) -> f64 {
        self
    }
    const EPS: f64 = f64::EPSILON;
}

/// Unevaluated sum hi + lo with |lo| <= ulp(hi)/2, about 32 significant digits.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl Dd {
    pub const fn new(hi: f64, lo: f64) -> Self {
        Dd { hi, lo }
    }

    pub fn from_f64(x: f64) -> Self {
        Dd { hi: x, lo: 0.0 }
    }

    /// Parse a decimal literal to full double-double accuracy.
    pub fn parse(s: &str) -> Self {
        let s = s.trim();
        let (neg, body) = match s.strip_prefix('-') {
            Some(r) => (true, r),
            None => (false, s.strip_prefix('+').unwrap_or(s)),
        };
        let (mant, exp) = match body.find(['e', 'E']) {
            Some(p) => (&body[..p], body[p + 1..].parse::<i32>().expect("exponent")),
            None => (body, 0),
        };
        let mut acc = Dd::zero();
        let ten = Dd::from_f64(10.0);
        let mut frac_digits = 0;
        let mut seen_dot = false;
        for ch in mant.chars() {
            if ch == '.' {
                seen_dot = true;
                continue;
            }
            let d = ch.to_digit(10).expect("digit") as f64;
            acc = acc * ten + Dd::from_f64(d);
            if seen_dot {
                frac_digits += 1;
            }
        }
        let e = exp - frac_digits;
        let p = Dd::from_f64(10.0).powi(e.unsigned_abs());
        let v = if e >= 0 { acc * p } else { acc / p };
        if neg {
            -v
        } else {
            v
        }
    }

    pub fn powi(self, n: u32) -> Self {
        let mut r = Dd::one();
        let mut b = self;
        let mut k = n;
        while k > 0 {
            if k & 1 == 1 {
                r = r * b;
            }
            b = b * b;
            k >>= 1;
        }
        r
    }

    pub fn abs(self) -> Self {
        if self.hi < 0.0 {
            -self
        } else {
            self
        }
    }

    pub fn sqrt(self) -> Self {
        if self.hi <= 0.0 {
            return Dd::zero();
        }
        let x = self.hi.sqrt();
        let (p, e) = two_prod(x, x);
        let r = ((self.hi - p) - e + self.lo) / (2.0 * x);
        let (h, l) = quick_two_sum(x, r);
        Dd { hi: h, lo: l }
    }
}

impl Add for Dd {
    type Output = Dd;
    #[inline]
    fn add(self, o: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, o.hi);
        let (t, f) = two_sum(self.lo, o.lo);
        let (s, e) = quick_two_sum(s, e + t);
        let (hi, lo) = quick_two_sum(s, e + f);
        Dd { hi, lo }
    }
}

impl Sub for Dd {
    type Output = Dd;
    #[inline]
    fn sub(self, o: Dd) -> Dd {
        self + (-o)
    }
}

impl Neg for Dd {
    type Output = Dd;
    #[inline]
    fn neg(self) -> Dd {
        Dd { hi: -self.hi, lo: -self.lo }
    }
}

impl Mul for Dd {
    type Output = Dd;
    #[inline]
    fn mul(self, o: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, o.hi);
        let e = e + (self.hi * o.lo + self.lo * o.hi);
        let (hi, lo) = quick_two_sum(p, e);
        Dd { hi, lo }
    }
}

impl Div for Dd {
    type Output = Dd;
    #[inline]
    fn div(self, o: Dd) -> Dd {
        let q1 = self.hi / o.hi;
        let r = self - o * Dd::from_f64(q1);
        let q2 = r.hi / o.hi;
        let r = r - o * Dd::from_f64(q2);
        let q3 = r.hi / o.hi;
        let (h, l) = quick_two_sum(q1, q2);
        Dd { hi: h, lo: l } + Dd::from_f64(q3)
    }
}

impl Rem for Dd {
    type Output = Dd;
    fn rem(self, o: Dd) -> Dd {
        let q = (self / o).hi.trunc();
        self - o * Dd::from_f64(q)
    }
}

impl AddAssign for Dd {
    fn add_assign(&mut self, o: Dd) {
        *self = *self + o;
    }
}

impl SubAssign for Dd {
    fn sub_assign(&mut self, o: Dd) {
        *self = *self - o;
    }
}

impl MulAssign for Dd {
    fn mul_assign(&mut self, o: Dd) {
        *self = *self * o;
    }
}

impl PartialOrd for Dd {
    fn partial_cmp(&self, o: &Dd) -> Option<Ordering> {
        match self.hi.partial_cmp(&o.hi) {
            Some(Ordering::Equal) => self.lo.partial_cmp(&o.lo),
            other => other,
        }
    }
}

impl Zero for Dd {
    fn zero() -> Self {
        Dd { hi: 0.0, lo: 0.0 }
    }
    fn is_zero(&self) -> bool {
        self.hi == 0.0
    }
}

impl One for Dd {
    fn one() -> Self {
        Dd { hi: 1.0, lo: 0.0 }
    }
}

impl Num for Dd {
    type FromStrRadixErr = ();
    fn from_str_radix(s: &str, radix: u32) -> Result<Self, ()> {
        if radix != 10 {
            return Err(());
        }
        Ok(Dd::parse(s))
    }
}

impl Real for Dd {
    fn from_f64(x: f64) -> Self {
        Dd::from_f64(x)
    }
    fn to_f64(self) -> f64 {
        self.hi + self.lo
    }
    const EPS: f64 = 4.93e-32;
}

pub type CDd = Complex<Dd>;

pub fn cdd(z: C64) -> CDd {
    Complex::new(Dd::from_f64(z.re), Dd::from_f64(z.im))
}

pub fn to_c64<R: Real>(z: Complex<R>) -> C64 {
    C64::new(z.re.to_f64(), z.im.to_f64())
}

/// Complex number written as `mant * 10^exp10` with `1 <= |mant| < 10`, or exactly zero.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scaled {
    pub mant: C64,
    pub exp10: i32,
}

impl Scaled {
    pub const ZERO: Scaled = Scaled { mant: C64 { re: 0.0, im: 0.0 }, exp10: 0 };
    pub const ONE: Scaled = Scaled { mant: C64 { re: 1.0, im: 0.0 }, exp10: 0 };

    pub fn new(mant: C64, exp10: i32) -> Self {
        Scaled { mant, exp10 }.normalized()
    }

    pub fn from_c64(z: C64) -> Self {
        Scaled::new(z, 0)
    }

    /// Value `m * 2^e2`, converted to decimal scaling.
    pub fn from_binary(m: C64, e2: i64) -> Self {
        let a = m.norm();
        if a == 0.0 || !a.is_finite() {
            return Scaled { mant: m, exp10: 0 };
        }
        let l = a.log10() + e2 as f64 * std::f64::consts::LOG10_2;
        let e = l.floor();
        // m * 2^e2 / 10^e with the fractional part applied once
        let unit = m / a;
        let mut s = Scaled { mant: unit * 10f64.powf(l - e), exp10: e as i32 };
        s = s.normalized();
        s
    }

    pub fn is_zero(&self) -> bool {
        self.mant.re == 0.0 && self.mant.im == 0.0
    }

    fn normalized(self) -> Self {
        let a = self.mant.norm();
        if a == 0.0 || !a.is_finite() {
            return Scaled { mant: self.mant, exp10: if a == 0.0 { 0 } else { self.exp10 } };
        }
        let mut e = a.log10().floor() as i32;
        let mut m = self.mant * 10f64.powi(-e);
        // guard the rounding of log10 near powers of ten
        let am = m.norm();
        if am >= 10.0 {
            m /= 10.0;
            e += 1;
        } else if am < 1.0 {
            m *= 10.0;
            e -= 1;
        }
        Scaled { mant: m, exp10: self.exp10 + e }
    }

    /// Plain complex value; may overflow to infinity or underflow to zero.
    pub fn to_c64(&self) -> C64 {
        if self.exp10 > 308 {
            return self.mant * f64::INFINITY;
        }
        self.mant * 10f64.powi(self.exp10)
    }

    /// log10 of the modulus.
    pub fn log10_abs(&self) -> f64 {
        if self.is_zero() {
            f64::NEG_INFINITY
        } else {
            self.mant.norm().log10() + self.exp10 as f64
        }
    }

    pub fn mul(&self, o: &Scaled) -> Scaled {
        Scaled::new(self.mant * o.mant, self.exp10 + o.exp10)
    }

    pub fn div(&self, o: &Scaled) -> Scaled {
        Scaled::new(self.mant / o.mant, self.exp10 - o.exp10)
    }

    pub fn scale(&self, f: C64) -> Scaled {
        Scaled::new(self.mant * f, self.exp10)
    }

    pub fn neg(&self) -> Scaled {
        Scaled { mant: -self.mant, exp10: self.exp10 }
    }

    pub fn add(&self, o: &Scaled) -> Scaled {
        if self.is_zero() {
            return *o;
        }
        if o.is_zero() {
            return *self;
        }
        let e = self.exp10.max(o.exp10);
        let a = self.mant * 10f64.powi(self.exp10 - e);
        let b = o.mant * 10f64.powi(o.exp10 - e);
        Scaled::new(a + b, e)
    }

    pub fn sub(&self, o: &Scaled) -> Scaled {
        self.add(&o.neg())
    }

    /// self / o as a plain complex number (the ratio is assumed representable).
    pub fn ratio(&self, o: &Scaled) -> C64 {
        self.mant / o.mant * 10f64.powi(self.exp10 - o.exp10)
    }
}

impl fmt::Display for Scaled {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:.15e}{:+.15e}i)e{}", self.mant.re, self.mant.im, self.exp10)
    }
}

/// Relative distance |a - b| / max(|a|, |b|, floor).
pub fn rel_err(a: C64, b: C64, floor: f64) -> f64 {
    (a - b).norm() / a.norm().max(b.norm()).max(floor)
}

/// Total ordering used for deterministic output: by real part, then imaginary part.
pub fn lex_cmp(a: &C64, b: &C64) -> Ordering {
    a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dd_recovers_third() {
        let x = Dd::one() / Dd::from_f64(3.0);
        let back = x * Dd::from_f64(3.0) - Dd::one();
        assert!(back.to_f64().abs() < 1e-31);
    }

    #[test]
    fn dd_parse_tracks_digits() {
        let x = Dd::parse("0.355028053887817239260063186004183176397979174199177");
        assert_eq!(x.hi, 0.355028053887817239260063186004183176397979174199177_f64);
        let r = x - Dd::from_f64(x.hi);
        assert!(r.hi.abs() > 0.0 && r.hi.abs() < 1e-16);
    }

    #[test]
    fn dd_sqrt_two() {
        let s = Dd::from_f64(2.0).sqrt();
        assert!((s * s - Dd::from_f64(2.0)).to_f64().abs() < 1e-31);
    }

    #[test]
    fn scaled_roundtrip() {
        let s = Scaled::from_c64(c(-3.5e20, 2.0e19));
        assert!(s.mant.norm() >= 1.0 && s.mant.norm() < 10.0);
        assert!(rel_err(s.to_c64(), c(-3.5e20, 2.0e19), 0.0) < 1e-15);
        let b = Scaled::from_binary(c(0.75, 0.0), 1000);
        assert!((b.log10_abs() - (0.75f64.log10() + 1000.0 * 2f64.log10())).abs() < 1e-12);
    }

    #[test]
    fn scaled_arith() {
        let a = Scaled::new(c(2.0, 1.0), 300);
        let b = Scaled::new(c(1.0, -1.0), 300);
        let p = a.mul(&b);
        assert_eq!(p.exp10, 600);
        assert!(rel_err(a.add(&b).mant, c(3.0, 0.0), 0.0) < 1e-15);
        assert!(rel_err(a.ratio(&b), c(2.0, 1.0) / c(1.0, -1.0), 0.0) < 1e-15);
    }
}
