//! Fixed-precision arithmetic in Q_p and its quadratic extensions.
//!
//! A nonzero [`PadicScalar`] is `p^v · u` where `u` is a unit known modulo
//! `p^N`; `N` is the relative precision. Sums lose the digits that cancel;
//! products and inverses keep the smaller of the input precisions.

use std::cell::RefCell;
use std::collections::HashMap;
use std::fmt;

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::ArithError;

/// Default working precision in digits.
pub const DEFAULT_WORKING_PRECISION: u32 = 64;

thread_local! {
    static POWERS: RefCell<HashMap<(u32, u32), BigUint>> = RefCell::new(HashMap::new());
}

/// `p^k` as a big integer, memoized per thread.
pub fn prime_power(p: u32, k: u32) -> BigUint {
    POWERS.with(|cache| {
        cache
            .borrow_mut()
            .entry((p, k))
            .or_insert_with(|| BigUint::from(p).pow(k))
            .clone()
    })
}

/// p-adic valuation of a nonzero big integer.
pub fn int_valuation(n: &BigInt, p: u32) -> Option<i64> {
    if n.is_zero() {
        return None;
    }
    let pb = BigInt::from(p);
    let mut m = n.clone();
    let mut v = 0;
    loop {
        let (q, r) = m.div_rem(&pb);
        if !r.is_zero() {
            return Some(v);
        }
        m = q;
        v += 1;
    }
}

/// p-adic valuation of a rational; `None` for zero.
pub fn rational_valuation(r: &BigRational, p: u32) -> Option<i64> {
    let vn = int_valuation(r.numer(), p)?;
    let vd = int_valuation(r.denom(), p).expect("nonzero denominator");
    Some(vn - vd)
}

/// Strips `p^k` from a nonzero integer, returning the cofactor.
fn strip_prime(n: &BigInt, p: u32, k: i64) -> BigInt {
    n / BigInt::from(prime_power(p, k as u32))
}

/// Reduces `x` modulo `m`, returning a non-negative representative.
fn mod_nonneg(x: &BigInt, m: &BigUint) -> BigUint {
    let mi = BigInt::from(m.clone());
    let r = x.mod_floor(&mi);
    r.to_biguint().expect("non-negative")
}

/// Number of trailing zero base-p digits of a positive integer, capped at `cap`.
fn trailing_zero_digits(n: &BigUint, p: u32, cap: u32) -> u32 {
    if n.is_zero() {
        return cap;
    }
    let pb = BigUint::from(p);
    let mut m = n.clone();
    let mut k = 0;
    while k < cap {
        let (q, r) = m.div_rem(&pb);
        if !r.is_zero() {
            break;
        }
        m = q;
        k += 1;
    }
    k
}

/// Precision settings used by integration and reporting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrecisionPolicy {
    pub working_precision: u32,
    pub output_precision: u32,
    pub cancellation_floor: u32,
}

impl PrecisionPolicy {
    pub fn new(working: u32, output: u32, floor: u32) -> Result<Self, ArithError> {
        if output > working {
            return Err(ArithError::Malformed(format!(
                "output precision {output} exceeds working precision {working}"
            )));
        }
        if floor == 0 {
            return Err(ArithError::Malformed("cancellation floor must be at least 1".into()));
        }
        Ok(PrecisionPolicy { working_precision: working, output_precision: output, cancellation_floor: floor })
    }

    /// Rejects a value whose surviving relative precision is below the floor.
    pub fn check(&self, x: &QuadExtScalar) -> Result<(), ArithError> {
        let surviving = x.precision();
        if !x.is_exact_zero() && surviving < self.cancellation_floor {
            return Err(ArithError::Cancellation { surviving, floor: self.cancellation_floor });
        }
        Ok(())
    }
}

impl Default for PrecisionPolicy {
    fn default() -> Self {
        PrecisionPolicy { working_precision: DEFAULT_WORKING_PRECISION, output_precision: 20, cancellation_floor: 1 }
    }
}

/// An element of Q_p with explicit relative precision.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct PadicScalar {
    prime: u32,
    /// `None` for the exact zero.
    valuation: Option<i64>,
    /// Unit part modulo `p^precision`; zero only for the exact zero.
    unit: BigUint,
    precision: u32,
}

impl PadicScalar {
    pub fn zero(p: u32, precision: u32) -> Self {
        PadicScalar { prime: p, valuation: None, unit: BigUint::zero(), precision }
    }

    pub fn one(p: u32, precision: u32) -> Self {
        Self::from_int(1, p, precision)
    }

    pub fn from_int(n: i64, p: u32, precision: u32) -> Self {
        Self::from_bigint(&BigInt::from(n), p, precision)
    }

    pub fn from_bigint(n: &BigInt, p: u32, precision: u32) -> Self {
        match int_valuation(n, p) {
            None => Self::zero(p, precision),
            Some(v) => {
                let u = strip_prime(n, p, v);
                let unit = mod_nonneg(&u, &prime_power(p, precision));
                PadicScalar { prime: p, valuation: Some(v), unit, precision }
            }
        }
    }

    pub fn from_rational(r: &BigRational, p: u32, precision: u32) -> Self {
        let Some(v) = rational_valuation(r, p) else {
            return Self::zero(p, precision);
        };
        let vn = int_valuation(r.numer(), p).unwrap();
        let vd = int_valuation(r.denom(), p).unwrap();
        let n = strip_prime(r.numer(), p, vn);
        let d = strip_prime(r.denom(), p, vd);
        let m = prime_power(p, precision);
        let n = mod_nonneg(&n, &m);
        let d = mod_nonneg(&d, &m);
        let dinv = d.modinv(&m).expect("unit denominator");
        PadicScalar { prime: p, valuation: Some(v), unit: (n * dinv) % &m, precision }
    }

    /// Builds `p^v · unit` from raw parts; `unit` is reduced mod `p^precision`.
    pub fn from_parts(p: u32, valuation: i64, unit: BigUint, precision: u32) -> Result<Self, ArithError> {
        let m = prime_power(p, precision);
        let unit = unit % &m;
        if precision == 0 || (&unit % p).is_zero() {
            return Err(ArithError::Malformed("unit part divisible by p".into()));
        }
        Ok(PadicScalar { prime: p, valuation: Some(valuation), unit, precision })
    }

    pub fn prime(&self) -> u32 {
        self.prime
    }

    pub fn valuation(&self) -> Option<i64> {
        self.valuation
    }

    pub fn precision(&self) -> u32 {
        self.precision
    }

    pub fn unit(&self) -> &BigUint {
        &self.unit
    }

    /// Absolute precision `v + N`; the value is known modulo `p` to this power.
    /// For the exact zero this is unbounded.
    pub fn abs_precision(&self) -> i64 {
        match self.valuation {
            Some(v) => v + self.precision as i64,
            None => i64::MAX / 4,
        }
    }

    pub fn is_exact_zero(&self) -> bool {
        self.valuation.is_none()
    }

    pub fn is_one(&self) -> bool {
        self.valuation == Some(0) && self.unit.is_one()
    }

    /// Little-endian base-p digits of the unit part, `N` of them.
    pub fn digits(&self) -> Vec<u32> {
        let mut out = Vec::with_capacity(self.precision as usize);
        if self.is_exact_zero() {
            return out;
        }
        let pb = BigUint::from(self.prime);
        let mut m = self.unit.clone();
        for _ in 0..self.precision {
            let (q, r) = m.div_rem(&pb);
            out.push(r.to_u32().unwrap());
            m = q;
        }
        out
    }

    pub fn with_precision(&self, precision: u32) -> Self {
        if self.is_exact_zero() {
            return Self::zero(self.prime, precision);
        }
        let n = precision.min(self.precision);
        PadicScalar {
            prime: self.prime,
            valuation: self.valuation,
            unit: &self.unit % prime_power(self.prime, n),
            precision: n,
        }
    }

    fn check_prime(&self, other: &Self) -> Result<(), ArithError> {
        if self.prime != other.prime {
            return Err(ArithError::PrimeMismatch(self.prime, other.prime));
        }
        Ok(())
    }

    /// `self + other`, failing when fewer than `floor` digits survive.
    pub fn add_with_floor(&self, other: &Self, floor: u32) -> Result<Self, ArithError> {
        self.check_prime(other)?;
        let (x, y) = match (self.valuation, other.valuation) {
            (None, _) => return Ok(other.clone()),
            (_, None) => return Ok(self.clone()),
            (Some(a), Some(b)) if a <= b => (self, other),
            _ => (other, self),
        };
        let vx = x.valuation.unwrap();
        let vy = y.valuation.unwrap();
        let abs = x.abs_precision().min(y.abs_precision());
        let rel = (abs - vx) as u32;
        let m = prime_power(x.prime, rel);
        let shift = vy - vx;
        let mut s = &x.unit % &m;
        if shift < rel as i64 {
            s += &y.unit * prime_power(x.prime, shift as u32);
            s %= &m;
        }
        if s.is_zero() {
            return Err(ArithError::Cancellation { surviving: 0, floor });
        }
        let k = trailing_zero_digits(&s, x.prime, rel);
        let precision = rel - k;
        if precision < floor {
            return Err(ArithError::Cancellation { surviving: precision, floor });
        }
        Ok(PadicScalar {
            prime: x.prime,
            valuation: Some(vx + k as i64),
            unit: s / prime_power(x.prime, k),
            precision,
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self, ArithError> {
        self.add_with_floor(other, 1)
    }

    pub fn neg(&self) -> Self {
        if self.is_exact_zero() {
            return self.clone();
        }
        let m = prime_power(self.prime, self.precision);
        PadicScalar { unit: (&m - &self.unit) % &m, ..self.clone() }
    }

    pub fn sub(&self, other: &Self) -> Result<Self, ArithError> {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Self) -> Result<Self, ArithError> {
        self.check_prime(other)?;
        match (self.valuation, other.valuation) {
            (None, _) | (_, None) => Ok(Self::zero(self.prime, self.precision.min(other.precision))),
            (Some(a), Some(b)) => {
                let n = self.precision.min(other.precision);
                let m = prime_power(self.prime, n);
                Ok(PadicScalar { prime: self.prime, valuation: Some(a + b), unit: (&self.unit * &other.unit) % m, precision: n })
            }
        }
    }

    pub fn inv(&self) -> Result<Self, ArithError> {
        let v = self.valuation.ok_or(ArithError::DivisionByZero)?;
        let m = prime_power(self.prime, self.precision);
        let unit = self.unit.modinv(&m).expect("unit is invertible");
        Ok(PadicScalar { prime: self.prime, valuation: Some(-v), unit, precision: self.precision })
    }

    pub fn div(&self, other: &Self) -> Result<Self, ArithError> {
        self.mul(&other.inv()?)
    }

    pub fn pow(&self, e: i64) -> Result<Self, ArithError> {
        if e == 0 {
            return Ok(Self::one(self.prime, self.precision));
        }
        let base = if e < 0 { self.inv()? } else { self.clone() };
        let Some(v) = base.valuation else {
            return Ok(base);
        };
        let m = prime_power(self.prime, base.precision);
        let k = e.unsigned_abs();
        Ok(PadicScalar {
            prime: self.prime,
            valuation: Some(v * k as i64),
            unit: base.unit.modpow(&BigUint::from(k), &m),
            precision: base.precision,
        })
    }

    /// Sum that reports a complete cancellation as "zero modulo `p^k`"
    /// instead of failing.
    pub(crate) fn coord_sum(&self, other: &Self) -> Result<CoordSum, ArithError> {
        match self.add(other) {
            Ok(s) => Ok(CoordSum::Value(s)),
            Err(ArithError::Cancellation { .. }) => Ok(CoordSum::ZeroMod(self.abs_precision().min(other.abs_precision()))),
            Err(e) => Err(e),
        }
    }

    /// Truncates to absolute precision `k`, failing below `floor` digits.
    pub fn with_abs_precision(&self, k: i64, floor: u32) -> Result<Self, ArithError> {
        let Some(v) = self.valuation else {
            return Ok(self.clone());
        };
        let rel = (k - v).min(self.precision as i64);
        if rel < floor.max(1) as i64 {
            return Err(ArithError::Cancellation { surviving: rel.max(0) as u32, floor });
        }
        Ok(self.with_precision(rel as u32))
    }

    /// Absolute p-adic precision to which `self` and `other` agree: the largest
    /// `k` with `self ≡ other (mod p^k)`, capped by what both values know.
    pub fn abs_agreement(&self, other: &Self) -> i64 {
        let cap = self.abs_precision().min(other.abs_precision());
        match self.sub(other) {
            Ok(d) => d.valuation.unwrap_or(cap).min(cap),
            Err(_) => cap,
        }
    }

    /// Relative digits to which two values agree (0 when valuations differ).
    pub fn agreement_digits(&self, other: &Self) -> u32 {
        match (self.valuation, other.valuation) {
            (None, None) => self.precision.min(other.precision),
            (Some(a), Some(b)) if a == b => {
                let n = self.precision.min(other.precision);
                let m = prime_power(self.prime, n);
                let d = (BigInt::from(self.unit.clone()) - BigInt::from(other.unit.clone())).mod_floor(&BigInt::from(m));
                trailing_zero_digits(&d.to_biguint().unwrap(), self.prime, n)
            }
            _ => 0,
        }
    }

    /// The exact rational `Σ_{k<n} d_k p^k` obtained by truncating the expansion
    /// below absolute position `n`. Fails if the value is not known that far.
    pub fn truncate_below(&self, n: i64) -> Result<BigRational, ArithError> {
        let Some(v) = self.valuation else {
            return Ok(BigRational::zero());
        };
        if n <= v {
            return Ok(BigRational::zero());
        }
        if n > self.abs_precision() {
            return Err(ArithError::Cancellation { surviving: self.precision, floor: (n - v) as u32 });
        }
        let keep = (n - v) as u32;
        let u = &self.unit % prime_power(self.prime, keep);
        let num = BigInt::from(u);
        let r = if v >= 0 {
            BigRational::from_integer(num * BigInt::from(prime_power(self.prime, v as u32)))
        } else {
            BigRational::new(num, BigInt::from(prime_power(self.prime, (-v) as u32)))
        };
        Ok(r)
    }

    /// Exact rational value of the known digits (valid for exact inputs).
    pub fn to_rational(&self) -> BigRational {
        self.truncate_below(self.abs_precision()).unwrap_or_else(|_| BigRational::zero())
    }

    pub fn to_record(&self) -> ScalarRecord {
        ScalarRecord {
            valuation: match self.valuation {
                Some(v) => RecordValuation::Finite(v),
                None => RecordValuation::Infinite("inf".into()),
            },
            digits: self.digits(),
            precision: self.precision,
        }
    }

    pub fn from_record(rec: &ScalarRecord, p: u32) -> Result<Self, ArithError> {
        match &rec.valuation {
            RecordValuation::Infinite(s) => {
                if s != "inf" || !rec.digits.is_empty() {
                    return Err(ArithError::Malformed("zero must have valuation \"inf\" and no digits".into()));
                }
                Ok(Self::zero(p, rec.precision))
            }
            RecordValuation::Finite(v) => {
                if rec.digits.len() != rec.precision as usize || rec.digits.is_empty() {
                    return Err(ArithError::Malformed("digit count must equal precision".into()));
                }
                if rec.digits[0] == 0 || rec.digits.iter().any(|&d| d >= p) {
                    return Err(ArithError::Malformed("invalid digit".into()));
                }
                let mut unit = BigUint::zero();
                for &d in rec.digits.iter().rev() {
                    unit = unit * p + d;
                }
                Self::from_parts(p, *v, unit, rec.precision)
            }
        }
    }
}

impl fmt::Debug for PadicScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for PadicScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.valuation {
            None => write!(f, "0"),
            Some(v) => {
                let digits: Vec<String> = self.digits().iter().take(8).map(|d| d.to_string()).collect();
                let more = if self.precision > 8 { "…" } else { "" };
                write!(f, "{}^{}·[{}{}]+O({})", self.prime, v, digits.join(","), more, self.precision)
            }
        }
    }
}

/// Result of adding two coordinates.
#[derive(Debug, Clone)]
pub(crate) enum CoordSum {
    Value(PadicScalar),
    ZeroMod(i64),
}

/// JSON valuation: an integer or the string `"inf"`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RecordValuation {
    Finite(i64),
    Infinite(String),
}

/// Canonical serialized form of a [`PadicScalar`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScalarRecord {
    pub valuation: RecordValuation,
    pub digits: Vec<u32>,
    pub precision: u32,
}

pub fn serialize_padic(x: &PadicScalar) -> String {
    serde_json::to_string(&x.to_record()).expect("record serializes")
}

pub fn deserialize_padic(s: &str, p: u32) -> Result<PadicScalar, ArithError> {
    let rec: ScalarRecord = serde_json::from_str(s).map_err(|e| ArithError::Malformed(e.to_string()))?;
    PadicScalar::from_record(&rec, p)
}

/// Parses `"num/den"` or an integer literal into a rational.
pub fn parse_rational(s: &str) -> Option<BigRational> {
    let s = s.trim();
    match s.split_once('/') {
        Some((n, d)) => {
            let n: BigInt = n.trim().parse().ok()?;
            let d: BigInt = d.trim().parse().ok()?;
            if d.is_zero() {
                return None;
            }
            Some(BigRational::new(n, d))
        }
        None => s.parse::<BigInt>().ok().map(BigRational::from_integer),
    }
}

pub fn format_rational(r: &BigRational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Defining data of a quadratic extension `Q_p(ω)`, `ω² = d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Extension {
    pub prime: u32,
    pub d: i64,
    pub ramified: bool,
}

impl Extension {
    /// `d` must be a non-square unit (unramified, `p` odd) or `p` times a unit (ramified).
    pub fn new(prime: u32, d: i64) -> Result<Self, ArithError> {
        let v = int_valuation(&BigInt::from(d), prime).ok_or(ArithError::SquareDescriptor(d))?;
        match v {
            0 => {
                if prime == 2 {
                    return Err(ArithError::EvenPrimeUnramified);
                }
                let p = prime as i64;
                let r = BigInt::from(d.rem_euclid(p)).modpow(&BigInt::from((p - 1) / 2), &BigInt::from(p));
                if r.is_one() {
                    return Err(ArithError::SquareDescriptor(d));
                }
                Ok(Extension { prime, d, ramified: false })
            }
            1 => Ok(Extension { prime, d, ramified: true }),
            _ => Err(ArithError::SquareDescriptor(d)),
        }
    }

    /// The unramified extension given by the least positive non-residue.
    pub fn unramified(prime: u32) -> Result<Self, ArithError> {
        if prime == 2 {
            return Err(ArithError::EvenPrimeUnramified);
        }
        (2..prime as i64).find_map(|d| Extension::new(prime, d).ok()).ok_or(ArithError::SquareDescriptor(0))
    }

    /// Ramification index.
    pub fn e(&self) -> i64 {
        if self.ramified {
            2
        } else {
            1
        }
    }
}

/// `a + b·ω` over Q_p; `ext == None` means `b = 0` and the value lies in Q_p.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct QuadExtScalar {
    ext: Option<Extension>,
    a: PadicScalar,
    b: PadicScalar,
}

impl QuadExtScalar {
    pub fn from_base(a: PadicScalar) -> Self {
        let b = PadicScalar::zero(a.prime, a.precision);
        QuadExtScalar { ext: None, a, b }
    }

    pub fn new(ext: Extension, a: PadicScalar, b: PadicScalar) -> Result<Self, ArithError> {
        if a.prime != ext.prime || b.prime != ext.prime {
            return Err(ArithError::PrimeMismatch(a.prime, ext.prime));
        }
        Ok(QuadExtScalar { ext: Some(ext), a, b })
    }

    /// `ω` itself.
    pub fn omega(ext: Extension, precision: u32) -> Self {
        QuadExtScalar {
            ext: Some(ext),
            a: PadicScalar::zero(ext.prime, precision),
            b: PadicScalar::one(ext.prime, precision),
        }
    }

    pub fn from_rational(r: &BigRational, p: u32, precision: u32) -> Self {
        Self::from_base(PadicScalar::from_rational(r, p, precision))
    }

    pub fn from_int(n: i64, p: u32, precision: u32) -> Self {
        Self::from_base(PadicScalar::from_int(n, p, precision))
    }

    pub fn zero(p: u32, precision: u32) -> Self {
        Self::from_base(PadicScalar::zero(p, precision))
    }

    pub fn one(p: u32, precision: u32) -> Self {
        Self::from_int(1, p, precision)
    }

    pub fn prime(&self) -> u32 {
        self.a.prime
    }

    pub fn extension(&self) -> Option<Extension> {
        self.ext
    }

    pub fn re(&self) -> &PadicScalar {
        &self.a
    }

    pub fn im(&self) -> &PadicScalar {
        &self.b
    }

    /// True when the ω-coordinate is the exact zero.
    pub fn is_base(&self) -> bool {
        self.b.is_exact_zero()
    }

    pub fn is_exact_zero(&self) -> bool {
        self.a.is_exact_zero() && self.b.is_exact_zero()
    }

    /// Valuation in units of `1/e` (e = ramification index); `None` for zero.
    pub fn valuation_e(&self) -> Option<i64> {
        let e = self.ext.map(|x| x.e()).unwrap_or(1);
        let va = self.a.valuation().map(|v| v * e);
        let vb = self.b.valuation().map(|v| v * e + (e - 1));
        match (va, vb) {
            (None, None) => None,
            (Some(x), None) | (None, Some(x)) => Some(x),
            (Some(x), Some(y)) => Some(x.min(y)),
        }
    }

    pub fn ramification(&self) -> i64 {
        self.ext.map(|x| x.e()).unwrap_or(1)
    }

    /// Integer valuation; only meaningful when the ramification index is 1.
    pub fn valuation(&self) -> Option<i64> {
        self.valuation_e().map(|v| v.div_euclid(self.ramification()))
    }

    /// Absolute precision in units of `1/e`.
    pub fn abs_precision_e(&self) -> i64 {
        let e = self.ramification();
        let pa = self.a.abs_precision().saturating_mul(e);
        let pb = self.b.abs_precision().saturating_mul(e).saturating_add(e - 1);
        pa.min(pb)
    }

    /// Relative precision in units of `1/e`, clamped to non-negative.
    pub fn precision_e(&self) -> u32 {
        match self.valuation_e() {
            None => self.a.precision().min(self.b.precision()),
            Some(v) => (self.abs_precision_e() - v).max(0) as u32,
        }
    }

    /// Relative precision in digits (integer part for ramified values).
    pub fn precision(&self) -> u32 {
        self.precision_e() / self.ramification() as u32
    }

    fn join_ext(&self, other: &Self) -> Result<Option<Extension>, ArithError> {
        if self.prime() != other.prime() {
            return Err(ArithError::PrimeMismatch(self.prime(), other.prime()));
        }
        match (self.ext, other.ext) {
            (None, x) | (x, None) => Ok(x),
            (Some(x), Some(y)) if x == y => Ok(Some(x)),
            _ => Err(ArithError::ExtensionMismatch),
        }
    }

    fn omega_squared(ext: &Extension, precision: u32) -> PadicScalar {
        PadicScalar::from_int(ext.d, ext.prime, precision)
    }

    /// Assembles a value from coordinate sums, where a coordinate may have
    /// cancelled to zero modulo `p^k`. That coordinate becomes the exact zero
    /// and the other one is truncated to absolute precision `k`.
    fn assemble(ext: Option<Extension>, a: CoordSum, b: CoordSum, floor: u32) -> Result<Self, ArithError> {
        let (a, b) = match (a, b) {
            (CoordSum::Value(a), CoordSum::Value(b)) => (a, b),
            (CoordSum::Value(a), CoordSum::ZeroMod(k)) => {
                let a = a.with_abs_precision(k, floor)?;
                let b = PadicScalar::zero(a.prime, a.precision);
                (a, b)
            }
            (CoordSum::ZeroMod(k), CoordSum::Value(b)) => {
                let b = b.with_abs_precision(k, floor)?;
                let a = PadicScalar::zero(b.prime, b.precision);
                (a, b)
            }
            (CoordSum::ZeroMod(_), CoordSum::ZeroMod(_)) => {
                return Err(ArithError::Cancellation { surviving: 0, floor });
            }
        };
        Ok(QuadExtScalar { ext, a, b })
    }

    pub fn add_with_floor(&self, other: &Self, floor: u32) -> Result<Self, ArithError> {
        let ext = self.join_ext(other)?;
        if self.is_base() && other.is_base() {
            let a = self.a.add_with_floor(&other.a, floor)?;
            let b = PadicScalar::zero(a.prime, a.precision);
            return Ok(QuadExtScalar { ext, a, b });
        }
        let a = self.a.coord_sum(&other.a)?;
        let b = self.b.coord_sum(&other.b)?;
        Self::assemble(ext, a, b, floor)
    }

    pub fn add(&self, other: &Self) -> Result<Self, ArithError> {
        self.add_with_floor(other, 1)
    }

    pub fn neg(&self) -> Self {
        QuadExtScalar { ext: self.ext, a: self.a.neg(), b: self.b.neg() }
    }

    pub fn sub(&self, other: &Self) -> Result<Self, ArithError> {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Self) -> Result<Self, ArithError> {
        let ext = self.join_ext(other)?;
        if self.is_base() && other.is_base() {
            let a = self.a.mul(&other.a)?;
            let b = PadicScalar::zero(a.prime, a.precision);
            return Ok(QuadExtScalar { ext, a, b });
        }
        let ext_val = ext.expect("non-base value carries an extension");
        if self.is_base() || other.is_base() {
            let (s, z) = if self.is_base() { (&self.a, other) } else { (&other.a, self) };
            return Ok(QuadExtScalar { ext, a: s.mul(&z.a)?, b: s.mul(&z.b)? });
        }
        let n = self.a.precision().max(self.b.precision()).max(other.a.precision()).max(other.b.precision());
        let d = Self::omega_squared(&ext_val, n);
        let ac = self.a.mul(&other.a)?;
        let bd = self.b.mul(&other.b)?.mul(&d)?;
        let ad = self.a.mul(&other.b)?;
        let bc = self.b.mul(&other.a)?;
        Self::assemble(ext, ac.coord_sum(&bd)?, ad.coord_sum(&bc)?, 1)
    }

    pub fn conj(&self) -> Self {
        QuadExtScalar { ext: self.ext, a: self.a.clone(), b: self.b.neg() }
    }

    /// Norm `a² − d b²` down to Q_p.
    pub fn norm(&self) -> Result<PadicScalar, ArithError> {
        if self.is_base() {
            return self.a.mul(&self.a);
        }
        let ext = self.ext.expect("extension");
        let n = self.a.precision().max(self.b.precision());
        let d = Self::omega_squared(&ext, n);
        let bb = self.b.mul(&self.b)?.mul(&d)?;
        if self.a.is_exact_zero() {
            return Ok(bb.neg());
        }
        self.a.mul(&self.a)?.sub(&bb)
    }

    pub fn inv(&self) -> Result<Self, ArithError> {
        if self.is_exact_zero() {
            return Err(ArithError::DivisionByZero);
        }
        if self.is_base() {
            let a = self.a.inv()?;
            let b = PadicScalar::zero(a.prime, a.precision);
            return Ok(QuadExtScalar { ext: self.ext, a, b });
        }
        let ninv = self.norm()?.inv()?;
        let c = self.conj();
        Ok(QuadExtScalar { ext: self.ext, a: c.a.mul(&ninv)?, b: c.b.mul(&ninv)? })
    }

    pub fn div(&self, other: &Self) -> Result<Self, ArithError> {
        self.mul(&other.inv()?)
    }

    pub fn pow(&self, e: i64) -> Result<Self, ArithError> {
        if self.is_base() {
            let a = self.a.pow(e)?;
            let b = PadicScalar::zero(a.prime, a.precision);
            return Ok(QuadExtScalar { ext: self.ext, a, b });
        }
        let base = if e < 0 { self.inv()? } else { self.clone() };
        let mut k = e.unsigned_abs();
        let mut acc = Self::one(self.prime(), self.precision().max(1));
        acc.ext = self.ext;
        let mut sq = base;
        while k > 0 {
            if k & 1 == 1 {
                acc = acc.mul(&sq)?;
            }
            k >>= 1;
            if k > 0 {
                sq = sq.mul(&sq)?;
            }
        }
        Ok(acc)
    }

    /// The nontrivial automorphism `a + bω ↦ a − bω` of an unramified extension.
    pub fn frobenius(&self) -> Result<Self, ArithError> {
        match self.ext {
            Some(e) if e.ramified => Err(ArithError::RamifiedUnsupported),
            _ => Ok(self.conj()),
        }
    }

    /// Relative digits to which two values agree: `v(x − y) − v(x)`, capped by
    /// the precision of both.
    pub fn agreement_digits(&self, other: &Self) -> u32 {
        if self.is_base() && other.is_base() {
            return self.a.agreement_digits(&other.a);
        }
        let (Some(vx), Some(vy)) = (self.valuation_e(), other.valuation_e()) else {
            return 0;
        };
        if vx != vy {
            return 0;
        }
        let e = self.ramification().max(other.ramification());
        let aa = self.a.abs_agreement(&other.a) * e;
        let bb = self.b.abs_agreement(&other.b) * e + (e - 1);
        let cap = self.abs_precision_e().min(other.abs_precision_e());
        let abs = aa.min(bb).min(cap);
        ((abs - vx).max(0) / e) as u32
    }

    pub fn with_precision(&self, precision: u32) -> Self {
        QuadExtScalar { ext: self.ext, a: self.a.with_precision(precision), b: self.b.with_precision(precision) }
    }
}

impl fmt::Debug for QuadExtScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for QuadExtScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_base() {
            write!(f, "{}", self.a)
        } else {
            write!(f, "({}) + ({})·ω", self.a, self.b)
        }
    }
}

/// Serialized extension scalar: the base record, plus an `omega` record when
/// the value leaves Q_p.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtRecord {
    #[serde(flatten)]
    pub re: ScalarRecord,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub omega: Option<ScalarRecord>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub d: Option<i64>,
}

impl QuadExtScalar {
    pub fn to_record(&self) -> ExtRecord {
        if self.is_base() {
            ExtRecord { re: self.a.to_record(), omega: None, d: None }
        } else {
            ExtRecord { re: self.a.to_record(), omega: Some(self.b.to_record()), d: self.ext.map(|e| e.d) }
        }
    }

    pub fn from_record(rec: &ExtRecord, p: u32) -> Result<Self, ArithError> {
        let a = PadicScalar::from_record(&rec.re, p)?;
        match (&rec.omega, rec.d) {
            (None, _) => Ok(Self::from_base(a)),
            (Some(b), Some(d)) => Self::new(Extension::new(p, d)?, a, PadicScalar::from_record(b, p)?),
            (Some(_), None) => Err(ArithError::Malformed("omega coordinate without extension descriptor".into())),
        }
    }
}

/// Reduces a rational p-adically modulo `p^n`, returning the canonical
/// representative in `Z[1/p] ∩ [0, p^n)`.
pub fn rational_mod_prime_power(r: &BigRational, p: u32, n: i64) -> BigRational {
    // r = N / (p^k · M) with gcd(M, p) = 1; reduce N·M⁻¹ modulo p^(n+k).
    if r.is_zero() {
        return BigRational::zero();
    }
    let vd = int_valuation(r.denom(), p).unwrap();
    let m = strip_prime(r.denom(), p, vd);
    let shift = n + vd;
    if shift <= 0 {
        return BigRational::zero();
    }
    let modulus = prime_power(p, shift as u32);
    let mm = mod_nonneg(&m, &modulus);
    let minv = mm.modinv(&modulus).expect("coprime");
    let num = mod_nonneg(r.numer(), &modulus) * minv % &modulus;
    let den = BigInt::from(prime_power(p, vd as u32));
    BigRational::new(BigInt::from_biguint(Sign::Plus, num), den)
}


#[cfg(test)]
mod tests {
    use super::*;

    fn q5(n: i64) -> PadicScalar {
        PadicScalar::from_int(n, 5, 4)
    }

    #[test]
    fn add_small_carry() {
        let s = q5(2).add(&q5(3)).unwrap();
        assert_eq!(s.valuation(), Some(1));
        assert_eq!(s.precision(), 3);
        assert_eq!(s.digits()[0], 1);
        assert_eq!(s.to_rational(), BigRational::from_integer(5.into()));
    }

    #[test]
    fn add_zero_is_identity() {
        let x = q5(17);
        assert_eq!(x.add(&PadicScalar::zero(5, 4)).unwrap(), x);
    }

    #[test]
    fn perturbation_below_precision_vanishes() {
        let one = q5(1);
        let tiny = PadicScalar::from_int(625, 5, 4);
        assert_eq!(one.add(&tiny).unwrap(), one);
    }

    #[test]
    fn mul_examples() {
        assert_eq!(q5(13).mul(&q5(3)).unwrap().digits(), vec![4, 2, 1, 0]);
        let x = q5(38);
        assert_eq!(x.mul(&q5(1)).unwrap(), x);
        let f = q5(5).mul(&q5(5)).unwrap();
        assert_eq!(f.valuation(), Some(2));
        assert_eq!(f.digits()[0], 1);
    }

    #[test]
    fn inverse_of_two() {
        let i = q5(2).inv().unwrap();
        assert_eq!(i.digits(), vec![3, 2, 2, 2]);
        assert!(q5(1).inv().unwrap().is_one());
        assert_eq!(i.inv().unwrap(), q5(2));
        assert_eq!(PadicScalar::zero(5, 4).inv(), Err(ArithError::DivisionByZero));
    }

    #[test]
    fn total_cancellation_is_an_error() {
        let x = PadicScalar::from_int(7, 5, 4);
        let y = PadicScalar::from_int(7 + 625, 5, 4);
        assert!(matches!(x.sub(&y), Err(ArithError::Cancellation { .. })));
        assert!(matches!(
            q5(1).add_with_floor(&q5(4), 4),
            Err(ArithError::Cancellation { surviving: 3, floor: 4 })
        ));
    }

    #[test]
    fn prime_mismatch() {
        let x = PadicScalar::from_int(1, 5, 4);
        let y = PadicScalar::from_int(1, 7, 4);
        assert_eq!(x.add(&y), Err(ArithError::PrimeMismatch(5, 7)));
        assert_eq!(x.mul(&y), Err(ArithError::PrimeMismatch(5, 7)));
    }

    #[test]
    fn record_examples() {
        assert_eq!(serialize_padic(&q5(39)), r#"{"valuation":0,"digits":[4,2,1,0],"precision":4}"#);
        assert_eq!(serialize_padic(&PadicScalar::zero(5, 4)), r#"{"valuation":"inf","digits":[],"precision":4}"#);
        let x = PadicScalar::from_rational(&BigRational::new((-7).into(), 25.into()), 5, 6);
        assert_eq!(deserialize_padic(&serialize_padic(&x), 5).unwrap(), x);
    }

    #[test]
    fn rationals_expand() {
        let third = PadicScalar::from_rational(&BigRational::new(1.into(), 3.into()), 5, 6);
        let three = PadicScalar::from_int(3, 5, 6);
        assert!(third.mul(&three).unwrap().is_one());
        assert_eq!(parse_rational("2/3"), Some(BigRational::new(2.into(), 3.into())));
        assert_eq!(parse_rational("-4"), Some(BigRational::from_integer((-4).into())));
        assert_eq!(parse_rational("1/0"), None);
    }

    #[test]
    fn truncation_is_exact() {
        let x = PadicScalar::from_rational(&BigRational::new(1.into(), 5.into()), 5, 6);
        assert_eq!(x.truncate_below(0).unwrap(), BigRational::new(1.into(), 5.into()));
        let y = PadicScalar::from_int(39, 5, 6);
        assert_eq!(y.truncate_below(2).unwrap(), BigRational::from_integer(14.into()));
    }

    #[test]
    fn mod_prime_power_reduces() {
        let r = BigRational::new(1.into(), 3.into());
        let red = rational_mod_prime_power(&r, 5, 2);
        // 1/3 ≡ 17 mod 25
        assert_eq!(red, BigRational::from_integer(17.into()));
        let r = BigRational::new(7.into(), 5.into());
        assert_eq!(rational_mod_prime_power(&r, 5, 0), BigRational::new(2.into(), 5.into()));
    }

    #[test]
    fn extension_descriptors() {
        assert!(Extension::new(5, 4).is_err());
        let e = Extension::new(5, 2).unwrap();
        assert!(!e.ramified);
        assert!(Extension::new(5, 10).unwrap().ramified);
        assert_eq!(Extension::unramified(7).unwrap().d, 3);
        assert!(Extension::new(2, 5).is_err());
    }

    #[test]
    fn frobenius_examples() {
        let e = Extension::new(5, 2).unwrap();
        let w = QuadExtScalar::omega(e, 10);
        assert_eq!(w.frobenius().unwrap(), w.neg());
        let a = QuadExtScalar::from_int(7, 5, 10);
        assert_eq!(a.frobenius().unwrap(), a);
        let z = QuadExtScalar::new(e, PadicScalar::from_int(3, 5, 10), PadicScalar::from_int(11, 5, 10)).unwrap();
        assert_eq!(z.frobenius().unwrap().frobenius().unwrap(), z);
        let r = Extension::new(5, 5).unwrap();
        assert_eq!(QuadExtScalar::omega(r, 4).frobenius(), Err(ArithError::RamifiedUnsupported));
    }

    #[test]
    fn extension_inverse() {
        let e = Extension::new(5, 2).unwrap();
        let z = QuadExtScalar::new(e, PadicScalar::from_int(3, 5, 12), PadicScalar::from_int(10, 5, 12)).unwrap();
        let one = z.mul(&z.inv().unwrap()).unwrap();
        assert!(one.agreement_digits(&QuadExtScalar::one(5, 12)) >= 11);
        let r = Extension::new(5, 5).unwrap();
        let w = QuadExtScalar::omega(r, 10);
        assert_eq!(w.valuation_e(), Some(1));
        assert_eq!(w.mul(&w).unwrap().valuation_e(), Some(2));
    }
}
