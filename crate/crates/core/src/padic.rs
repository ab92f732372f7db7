//! Fixed-precision p-adic integers.
//!
//! Values live in `Z/p^π` where `π` is an absolute precision attached to the
//! value. A context fixes the prime and a global working exponent `W`; no
//! value ever carries more than `W` digits. Residues are stored in a `u64`, so
//! `p^W` must stay below `2^63`.

use std::fmt;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

const MODULUS_LIMIT: u128 = 1 << 63;

static BINOM_SIGN_FAULT: AtomicBool = AtomicBool::new(false);

/// Flips the sign convention of [`binom_neg`]. Only used by the self-test
/// harness to prove that the property corpus notices a corrupted kernel.
#[doc(hidden)]
pub fn set_binom_sign_fault(on: bool) {
    BINOM_SIGN_FAULT.store(on, Ordering::SeqCst);
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PadicError {
    #[error("precision exhausted")]
    PrecisionExhausted,
    #[error("quotient is not p-integral")]
    NonIntegralQuotient,
    #[error("operands have different primes ({0} vs {1})")]
    PrimeMismatch(u64, u64),
    #[error("X^2 - a_p X + p^(k-1) has no root of slope < (k-1)/2")]
    NoUnitRoot,
    #[error("{0} is divisible by p")]
    NotCoprime(i64),
    #[error("denominator of {0} is divisible by p")]
    NonIntegralRational(String),
    #[error("p^W = {p}^{w} does not fit in 63 bits")]
    WorkingExponentTooLarge { p: u64, w: u32 },
    #[error("{0} is not a prime")]
    InvalidPrime(u64),
    #[error("working exponent must be at least 1")]
    ZeroWorkingExponent,
    #[error("malformed residue string {0:?}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, PadicError>;

pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

const BINOM_ROWS: usize = 192;

/// Prime, working exponent, powers `p^0 ..= p^W` and a Pascal triangle
/// reduced mod `p^W`.
#[derive(Clone)]
pub struct PadicContext {
    p: u64,
    w: u32,
    pows: Arc<[u64]>,
    pascal: Arc<[u64]>,
}

impl PartialEq for PadicContext {
    fn eq(&self, o: &Self) -> bool {
        self.p == o.p && self.w == o.w
    }
}

impl Eq for PadicContext {}

impl fmt::Debug for PadicContext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PadicContext(p={}, W={})", self.p, self.w)
    }
}

impl PadicContext {
    pub fn new(p: u64, w: u32) -> Result<Self> {
        if !is_prime(p) {
            return Err(PadicError::InvalidPrime(p));
        }
        if w == 0 {
            return Err(PadicError::ZeroWorkingExponent);
        }
        let mut pows = Vec::with_capacity(w as usize + 1);
        let mut acc: u128 = 1;
        for _ in 0..=w {
            if acc >= MODULUS_LIMIT {
                return Err(PadicError::WorkingExponentTooLarge { p, w });
            }
            pows.push(acc as u64);
            acc *= p as u128;
        }
        let m = *pows.last().unwrap();
        let mut pascal = vec![0u64; BINOM_ROWS * (BINOM_ROWS + 1) / 2];
        for n in 0..BINOM_ROWS {
            let row = n * (n + 1) / 2;
            pascal[row] = 1 % m;
            pascal[row + n] = 1 % m;
            for r in 1..n {
                let prev = (n - 1) * n / 2;
                pascal[row + r] = (pascal[prev + r - 1] + pascal[prev + r]) % m;
            }
        }
        Ok(PadicContext { p, w, pows: pows.into(), pascal: pascal.into() })
    }

    #[inline]
    pub fn p(&self) -> u64 {
        self.p
    }

    #[inline]
    pub fn w(&self) -> u32 {
        self.w
    }

    /// `p^W`.
    #[inline]
    pub fn modulus(&self) -> u64 {
        self.pows[self.w as usize]
    }

    /// `p^e` for `e <= W`.
    #[inline]
    pub fn pow_p(&self, e: u32) -> u64 {
        self.pows[e.min(self.w) as usize]
    }

    #[inline]
    pub fn reduce_i128(&self, x: i128) -> u64 {
        x.rem_euclid(self.modulus() as i128) as u64
    }

    #[inline]
    pub fn add(&self, a: u64, b: u64) -> u64 {
        let m = self.modulus();
        let s = a + b;
        if s >= m {
            s - m
        } else {
            s
        }
    }

    #[inline]
    pub fn sub(&self, a: u64, b: u64) -> u64 {
        if a >= b {
            a - b
        } else {
            a + self.modulus() - b
        }
    }

    #[inline]
    pub fn neg(&self, a: u64) -> u64 {
        if a == 0 {
            0
        } else {
            self.modulus() - a
        }
    }

    #[inline]
    pub fn mul(&self, a: u64, b: u64) -> u64 {
        ((a as u128 * b as u128) % self.modulus() as u128) as u64
    }

    pub fn pow(&self, mut base: u64, mut e: u64) -> u64 {
        let mut acc = 1 % self.modulus();
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            e >>= 1;
        }
        acc
    }

    /// Inverse of a unit modulo `p^W`.
    pub fn inv(&self, a: u64) -> Result<u64> {
        mod_inverse(a, self.modulus()).ok_or(PadicError::NonIntegralQuotient)
    }

    /// Valuation of a residue, reported as `cap` for zero.
    pub fn valuation(&self, mut x: u64, cap: u32) -> u32 {
        if x == 0 {
            return cap;
        }
        let mut v = 0;
        while v < cap && x % self.p == 0 {
            x /= self.p;
            v += 1;
        }
        v
    }

    pub fn from_i64(&self, x: i64) -> PadicScalar {
        PadicScalar::new(self.p, self.w, self.reduce_i128(x as i128), self.w)
    }

    pub fn from_bigint(&self, x: &BigInt) -> PadicScalar {
        let m = BigInt::from(self.modulus());
        let r = x.mod_floor(&m).to_u64().expect("residue fits");
        PadicScalar::new(self.p, self.w, r, self.w)
    }

    pub fn zero(&self) -> PadicScalar {
        PadicScalar::new(self.p, self.w, 0, self.w)
    }

    pub fn one(&self) -> PadicScalar {
        self.from_i64(1)
    }

    /// Embeds a p-integral rational. Denominators prime to `p` are inverted
    /// modulo `p^W`.
    pub fn embed_rational(&self, q: &BigRational) -> Result<PadicScalar> {
        let den = self.from_bigint(q.denom());
        if den.residue % self.p == 0 {
            return Err(PadicError::NonIntegralRational(q.to_string()));
        }
        let num = self.from_bigint(q.numer());
        let r = self.mul(num.residue, self.inv(den.residue)?);
        Ok(PadicScalar::new(self.p, self.w, r, self.w))
    }

    /// `p`-adic valuation of a nonzero rational.
    pub fn ord_rational(&self, q: &BigRational) -> Option<i64> {
        if q.is_zero() {
            return None;
        }
        let p = BigInt::from(self.p);
        Some(ord_bigint(q.numer(), &p) as i64 - ord_bigint(q.denom(), &p) as i64)
    }
}

pub(crate) fn ord_bigint(x: &BigInt, p: &BigInt) -> u32 {
    let mut x = x.abs();
    let mut v = 0;
    while !x.is_zero() && (&x % p).is_zero() {
        x /= p;
        v += 1;
    }
    v
}

pub(crate) fn mod_inverse(a: u64, m: u64) -> Option<u64> {
    if m == 1 {
        return Some(0);
    }
    let e = (a as i128).extended_gcd(&(m as i128));
    if e.gcd != 1 {
        return None;
    }
    Some(e.x.rem_euclid(m as i128) as u64)
}

/// An element of `Z_p` known modulo `p^prec`.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct PadicScalar {
    p: u64,
    w: u32,
    residue: u64,
    prec: u32,
}

impl fmt::Debug for PadicScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} + O({}^{})", self.residue, self.p, self.prec)
    }
}

impl fmt::Display for PadicScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
}

fn checked_pow(p: u64, e: u32) -> u64 {
    (p as u128).pow(e).try_into().expect("p^prec bounded by p^W")
}

impl PadicScalar {
    /// Builds a scalar, clamping `prec` to `w` and reducing the residue.
    pub fn new(p: u64, w: u32, residue: u64, prec: u32) -> Self {
        let prec = prec.min(w);
        let m = checked_pow(p, prec);
        PadicScalar { p, w, residue: residue % m, prec }
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn working_exponent(&self) -> u32 {
        self.w
    }

    pub fn residue(&self) -> u64 {
        self.residue
    }

    pub fn precision(&self) -> u32 {
        self.prec
    }

    /// Valuation, `prec` for a value indistinguishable from zero.
    pub fn valuation(&self) -> u32 {
        if self.residue == 0 {
            return self.prec;
        }
        let mut x = self.residue;
        let mut v = 0;
        while x % self.p == 0 {
            x /= self.p;
            v += 1;
        }
        v
    }

    pub fn is_zero(&self) -> bool {
        self.residue == 0
    }

    fn modulus(&self) -> u64 {
        checked_pow(self.p, self.prec)
    }

    pub fn with_precision(&self, prec: u32) -> Self {
        PadicScalar::new(self.p, self.w, self.residue, prec.min(self.prec))
    }

    /// Equality modulo the smaller of the two precisions.
    pub fn agrees_with(&self, other: &PadicScalar) -> bool {
        let prec = self.prec.min(other.prec);
        let m = checked_pow(self.p, prec);
        self.residue % m == other.residue % m
    }

    /// The residue as a signed integer in `(-p^prec/2, p^prec/2]`.
    pub fn centered(&self) -> i128 {
        let m = self.modulus() as i128;
        let r = self.residue as i128;
        if 2 * r > m {
            r - m
        } else {
            r
        }
    }

    fn check_prime(&self, other: &PadicScalar) -> Result<()> {
        if self.p != other.p {
            return Err(PadicError::PrimeMismatch(self.p, other.p));
        }
        Ok(())
    }

    pub fn add(&self, other: &PadicScalar) -> Result<PadicScalar> {
        self.check_prime(other)?;
        let prec = self.prec.min(other.prec);
        let m = checked_pow(self.p, prec) as u128;
        let r = (self.residue as u128 + other.residue as u128) % m;
        Ok(PadicScalar::new(self.p, self.w.max(other.w), r as u64, prec))
    }

    pub fn neg(&self) -> PadicScalar {
        let m = self.modulus();
        let r = if self.residue == 0 { 0 } else { m - self.residue };
        PadicScalar { residue: r, ..*self }
    }

    pub fn sub(&self, other: &PadicScalar) -> Result<PadicScalar> {
        self.add(&other.neg())
    }

    /// Product with precision `min(π_a + v_b, π_b + v_a)` capped at `W`.
    pub fn mul(&self, other: &PadicScalar) -> Result<PadicScalar> {
        self.check_prime(other)?;
        let w = self.w.max(other.w);
        let prec = (self.prec + other.valuation())
            .min(other.prec + self.valuation())
            .min(w);
        if prec == 0 {
            return Err(PadicError::PrecisionExhausted);
        }
        let m = checked_pow(self.p, prec) as u128;
        let r = (self.residue as u128 % m) * (other.residue as u128 % m) % m;
        Ok(PadicScalar::new(self.p, w, r as u64, prec))
    }

    /// Quotient. Dividing by `p^v · unit` costs `v` digits of precision and
    /// requires the numerator to be divisible by `p^v`.
    pub fn div(&self, other: &PadicScalar) -> Result<PadicScalar> {
        self.check_prime(other)?;
        let v = other.valuation();
        if v >= other.prec {
            return Err(PadicError::PrecisionExhausted);
        }
        let vx = self.valuation();
        if vx < v {
            return if self.residue == 0 {
                Err(PadicError::PrecisionExhausted)
            } else {
                Err(PadicError::NonIntegralQuotient)
            };
        }
        let w = self.w.max(other.w);
        let prec = ((self.prec - v) as i64)
            .min(other.prec as i64 - 2 * v as i64 + vx as i64)
            .min(w as i64);
        if prec <= 0 {
            return Err(PadicError::PrecisionExhausted);
        }
        let prec = prec as u32;
        let pv = checked_pow(self.p, v);
        let m = checked_pow(self.p, prec);
        let num = (self.residue / pv) % m;
        let den = (other.residue / pv) % m;
        let inv = mod_inverse(den, m).ok_or(PadicError::NonIntegralQuotient)?;
        let r = (num as u128 * inv as u128 % m as u128) as u64;
        Ok(PadicScalar::new(self.p, w, r, prec))
    }

    pub fn pow(&self, e: u32) -> Result<PadicScalar> {
        let mut acc = PadicScalar::new(self.p, self.w, 1, self.w);
        for _ in 0..e {
            acc = acc.mul(self)?;
        }
        Ok(acc)
    }

    /// `(residue as decimal string, precision)`.
    pub fn to_pair(&self) -> ScalarRepr {
        ScalarRepr(self.residue.to_string(), self.prec)
    }

    pub fn from_pair(ctx: &PadicContext, repr: &ScalarRepr) -> Result<PadicScalar> {
        let r: u64 = repr.0.parse().map_err(|_| PadicError::Parse(repr.0.clone()))?;
        if repr.1 > ctx.w() || r >= checked_pow(ctx.p(), repr.1) {
            return Err(PadicError::Parse(repr.0.clone()));
        }
        Ok(PadicScalar::new(ctx.p(), ctx.w(), r, repr.1))
    }
}

/// Wire form of a scalar: residue as a decimal string, then its precision.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScalarRepr(pub String, pub u32);

pub fn arith(x: &PadicScalar, y: &PadicScalar, op: ArithOp) -> Result<PadicScalar> {
    match op {
        ArithOp::Add => x.add(y),
        ArithOp::Sub => x.sub(y),
        ArithOp::Mul => x.mul(y),
        ArithOp::Div => x.div(y),
    }
}

/// `C(n, r)` for any integer `n` and `r >= 0`, reduced mod `p^W`.
pub fn binomial(n: i64, r: u64, ctx: &PadicContext) -> u64 {
    if n >= 0 {
        if r as i64 > n {
            return 0;
        }
        binomial_nonneg(n as u64, r, ctx)
    } else {
        // C(n, r) = (-1)^r C(r - n - 1, r)
        let b = binomial_nonneg(r + (-n) as u64 - 1, r, ctx);
        if r % 2 == 1 {
            ctx.neg(b)
        } else {
            b
        }
    }
}

fn binomial_nonneg(n: u64, r: u64, ctx: &PadicContext) -> u64 {
    if (n as usize) < BINOM_ROWS {
        let n = n as usize;
        return ctx.pascal[n * (n + 1) / 2 + r as usize];
    }
    let r = r.min(n - r);
    let mut acc = BigInt::one();
    for i in 0..r {
        acc *= n - i;
        acc /= i + 1;
    }
    ctx.from_bigint(&acc).residue
}

/// `C(-j-1, i) = (-1)^i C(j+i, i)`, the coefficients of `(1 - x)^{-j-1}`.
pub fn binom_neg(j: u64, i: u64, ctx: &PadicContext) -> PadicScalar {
    let mut b = binomial_nonneg(j + i, i, ctx);
    let negate = (i % 2 == 1) ^ BINOM_SIGN_FAULT.load(Ordering::Relaxed);
    if negate {
        b = ctx.neg(b);
    }
    PadicScalar::new(ctx.p(), ctx.w(), b, ctx.w())
}

/// Root of `X^2 - a_p X + p^{k-1}` of minimal valuation, to precision `W`.
pub fn quadratic_unit_root(a_p: &BigRational, k: u32, ctx: &PadicContext) -> Result<PadicScalar> {
    let v = ctx.ord_rational(a_p).ok_or(PadicError::NoUnitRoot)?;
    if v < 0 {
        return Err(PadicError::NonIntegralRational(a_p.to_string()));
    }
    let v = v as u32;
    if 2 * v >= k - 1 {
        return Err(PadicError::NoUnitRoot);
    }
    // X = p^v Y turns the equation into Y^2 - a' Y + p^{k-1-2v} = 0 with
    // a' = a_p / p^v a unit; Y ≡ a' is a simple root mod p.
    let pv = BigRational::from_integer(BigInt::from(ctx.p()).pow(v));
    let a_unit = ctx.embed_rational(&(a_p / pv))?.residue();
    let c = ctx.pow(ctx.p() % ctx.modulus(), (k - 1 - 2 * v) as u64);
    let mut y = a_unit;
    for _ in 0..=ctx.w() + 1 {
        let f = ctx.add(ctx.sub(ctx.mul(y, y), ctx.mul(a_unit, y)), c);
        if f == 0 {
            break;
        }
        let df = ctx.sub(ctx.add(y, y), a_unit);
        y = ctx.sub(y, ctx.mul(f, ctx.inv(df)?));
    }
    let alpha = ctx.mul(y, ctx.pow_p(v));
    Ok(PadicScalar::new(ctx.p(), ctx.w(), alpha, ctx.w()))
}

/// Teichmüller lift: the `(p-1)`-st root of unity congruent to `a` mod `p`.
pub fn teichmuller(a: i64, ctx: &PadicContext) -> Result<PadicScalar> {
    let p = ctx.p();
    if a.rem_euclid(p as i64) == 0 {
        return Err(PadicError::NotCoprime(a));
    }
    let mut x = ctx.reduce_i128(a as i128);
    for _ in 0..=ctx.w() {
        let next = ctx.pow(x, p);
        if next == x {
            break;
        }
        x = next;
    }
    Ok(PadicScalar::new(p, ctx.w(), x, ctx.w()))
}

/// `value / p^den_exp`: a p-adic number with bounded denominator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScaledScalar {
    pub value: PadicScalar,
    pub den_exp: u32,
}

impl ScaledScalar {
    pub fn integral(value: PadicScalar) -> Self {
        ScaledScalar { value, den_exp: 0 }
    }

    /// Embeds any rational whose denominator's prime-to-p part is invertible.
    pub fn from_rational(q: &BigRational, ctx: &PadicContext) -> Result<Self> {
        if q.is_zero() {
            return Ok(ScaledScalar::integral(ctx.zero()));
        }
        let p = BigInt::from(ctx.p());
        let dv = ord_bigint(q.denom(), &p);
        let shifted = q * BigRational::from_integer(p.pow(dv));
        Ok(ScaledScalar { value: ctx.embed_rational(&shifted)?, den_exp: dv })
    }

    /// The numerator over `p^den_exp`; requires `den_exp >= self.den_exp`.
    pub fn lift_to(&self, den_exp: u32) -> Result<PadicScalar> {
        let shift = den_exp - self.den_exp;
        let pp = PadicScalar::new(self.value.p(), self.value.working_exponent(), self.value.p(), u32::MAX);
        let mut v = self.value;
        for _ in 0..shift {
            v = v.mul(&pp)?;
        }
        Ok(v)
    }

    pub fn add(&self, other: &ScaledScalar) -> Result<ScaledScalar> {
        let e = self.den_exp.max(other.den_exp);
        Ok(ScaledScalar { value: self.lift_to(e)?.add(&other.lift_to(e)?)?, den_exp: e })
    }

    pub fn sub(&self, other: &ScaledScalar) -> Result<ScaledScalar> {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> ScaledScalar {
        ScaledScalar { value: self.value.neg(), den_exp: self.den_exp }
    }

    pub fn mul(&self, other: &ScaledScalar) -> Result<ScaledScalar> {
        Ok(ScaledScalar {
            value: self.value.mul(&other.value)?,
            den_exp: self.den_exp + other.den_exp,
        })
    }

    /// Equality modulo the coarser of the two absolute precisions.
    pub fn agrees_with(&self, other: &ScaledScalar) -> Result<bool> {
        let e = self.den_exp.max(other.den_exp);
        Ok(self.lift_to(e)?.agrees_with(&other.lift_to(e)?))
    }

    /// Absolute precision `prec - den_exp` (may be negative).
    pub fn absolute_precision(&self) -> i64 {
        self.value.precision() as i64 - self.den_exp as i64
    }
}
