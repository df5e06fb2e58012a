//! The projective line over the scalar tower and the Möbius action of PGL₂(Q).

use std::fmt;

use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{ArithError, GeomError};
use crate::padic::{format_rational, parse_rational, rational_valuation, CoordSum, PadicScalar, QuadExtScalar};

/// A point `[x : y]` of P¹, normalized so the coordinate of minimal valuation is 1.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct ProjPoint {
    x: QuadExtScalar,
    y: QuadExtScalar,
}

impl ProjPoint {
    pub fn infinity(p: u32, precision: u32) -> Self {
        ProjPoint { x: QuadExtScalar::one(p, precision), y: QuadExtScalar::zero(p, precision) }
    }

    pub fn finite(z: QuadExtScalar) -> Result<Self, ArithError> {
        let one = QuadExtScalar::one(z.prime(), z.precision().max(1));
        Self::from_homogeneous(z, one)
    }

    pub fn from_rational(r: &BigRational, p: u32, precision: u32) -> Self {
        Self::finite(QuadExtScalar::from_rational(r, p, precision)).expect("rational point")
    }

    pub fn from_int(n: i64, p: u32, precision: u32) -> Self {
        Self::from_rational(&BigRational::from_integer(n.into()), p, precision)
    }

    /// Normalizes `[x : y]`; fails if both coordinates vanish.
    pub fn from_homogeneous(x: QuadExtScalar, y: QuadExtScalar) -> Result<Self, ArithError> {
        match (x.valuation_e(), y.valuation_e()) {
            (None, None) => Err(ArithError::DivisionByZero),
            (Some(_), None) => {
                let p = x.prime();
                let n = x.precision();
                let mut zero = QuadExtScalar::zero(p, n);
                if let Some(e) = x.extension().or(y.extension()) {
                    zero = QuadExtScalar::new(e, zero.re().clone(), zero.re().clone())?;
                }
                Ok(ProjPoint { x: QuadExtScalar::one(p, n), y: zero })
            }
            (None, Some(_)) => {
                let p = y.prime();
                let n = y.precision();
                Ok(ProjPoint { x: QuadExtScalar::zero(p, n), y: QuadExtScalar::one(p, n) })
            }
            (Some(vx), Some(vy)) => {
                if vx <= vy {
                    let yy = y.div(&x)?;
                    let one = QuadExtScalar::one(x.prime(), yy.precision().max(1));
                    Ok(ProjPoint { x: one, y: yy })
                } else {
                    let xx = x.div(&y)?;
                    let one = QuadExtScalar::one(x.prime(), xx.precision().max(1));
                    Ok(ProjPoint { x: xx, y: one })
                }
            }
        }
    }

    pub fn prime(&self) -> u32 {
        self.x.prime()
    }

    pub fn coords(&self) -> (&QuadExtScalar, &QuadExtScalar) {
        (&self.x, &self.y)
    }

    pub fn is_infinity(&self) -> bool {
        self.y.is_exact_zero()
    }

    /// Affine coordinate `x / y`; `None` at infinity.
    pub fn affine(&self) -> Option<QuadExtScalar> {
        if self.is_infinity() {
            None
        } else {
            Some(self.x.div(&self.y).expect("nonzero second coordinate"))
        }
    }

    /// True when both coordinates lie in Q_p.
    pub fn is_base(&self) -> bool {
        self.x.is_base() && self.y.is_base()
    }

    /// Relative precision of the normalized non-unit coordinate.
    pub fn precision(&self) -> u32 {
        self.x.precision().min(self.y.precision())
    }

    /// Number of digits to which two points agree, measured on the normalized
    /// coordinates (0 when they lie in different unit balls of the chart).
    pub fn agreement_digits(&self, other: &ProjPoint) -> u32 {
        // x y' − x' y, relative to the normalized scale.
        let l = self.x.mul(&other.y);
        let r = other.x.mul(&self.y);
        let cap = self.precision().min(other.precision());
        match (l, r) {
            (Ok(l), Ok(r)) => match l.sub(&r) {
                Ok(d) => match d.valuation_e() {
                    Some(v) => ((v / d.ramification()).max(0) as u32).min(cap),
                    None => cap,
                },
                Err(_) => cap,
            },
            _ => 0,
        }
    }

    pub fn frobenius(&self) -> Result<Self, ArithError> {
        Ok(ProjPoint { x: self.x.frobenius()?, y: self.y.frobenius()? })
    }
}

impl fmt::Debug for ProjPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for ProjPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_infinity() {
            write!(f, "∞")
        } else {
            write!(f, "[{} : {}]", self.x, self.y)
        }
    }
}

/// An element of PGL₂(Q), stored with its first nonzero entry scaled to 1.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Pgl2 {
    m: [BigRational; 4],
}

/// Classification of a Möbius map over Q_p.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ElementKind {
    Hyperbolic,
    Parabolic,
    EllipticOrTorsion,
}

/// Fixed-point data of a hyperbolic element.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedPoints {
    /// Limit of `gⁿ(z)` for generic `z`.
    pub attracting: ProjPoint,
    pub repelling: ProjPoint,
    /// Eigenvalue ratio with positive valuation.
    pub multiplier: PadicScalar,
}

impl Pgl2 {
    pub fn new(a: BigRational, b: BigRational, c: BigRational, d: BigRational) -> Result<Self, GeomError> {
        let det = &a * &d - &b * &c;
        if det.is_zero() {
            return Err(GeomError::Singular);
        }
        let pivot = [&a, &b, &c, &d].into_iter().find(|x| !x.is_zero()).unwrap().clone();
        Ok(Pgl2 { m: [a / &pivot, b / &pivot, c / &pivot, d / &pivot] })
    }

    pub fn from_ints(a: i64, b: i64, c: i64, d: i64) -> Result<Self, GeomError> {
        let r = |x: i64| BigRational::from_integer(x.into());
        Self::new(r(a), r(b), r(c), r(d))
    }

    pub fn identity() -> Self {
        Self::from_ints(1, 0, 0, 1).unwrap()
    }

    /// `diag(q, 1)` conjugated so that it attracts to `a` and repels from `b`.
    pub fn with_fixed_points(a: &BigRational, b: &BigRational, q: &BigRational) -> Result<Self, GeomError> {
        // h(0) = a, h(∞) = b
        let h = Pgl2::new(b.clone(), a.clone(), BigRational::one(), BigRational::one())?;
        let d = Pgl2::new(q.clone(), BigRational::zero(), BigRational::zero(), BigRational::one())?;
        Ok(h.compose(&d).compose(&h.inverse()))
    }

    pub fn entries(&self) -> &[BigRational; 4] {
        &self.m
    }

    pub fn det(&self) -> BigRational {
        &self.m[0] * &self.m[3] - &self.m[1] * &self.m[2]
    }

    pub fn trace(&self) -> BigRational {
        &self.m[0] + &self.m[3]
    }

    /// Matrix product `self · other`.
    pub fn compose(&self, other: &Pgl2) -> Pgl2 {
        let [a, b, c, d] = &self.m;
        let [e, f, g, h] = &other.m;
        Pgl2::new(a * e + b * g, a * f + b * h, c * e + d * g, c * f + d * h).expect("product of invertibles")
    }

    pub fn inverse(&self) -> Pgl2 {
        let [a, b, c, d] = &self.m;
        Pgl2::new(d.clone(), -b.clone(), -c.clone(), a.clone()).expect("invertible")
    }

    pub fn conjugate_by(&self, h: &Pgl2) -> Pgl2 {
        h.compose(self).compose(&h.inverse())
    }

    pub fn is_identity(&self) -> bool {
        *self == Pgl2::identity()
    }

    /// `[a:b] ↦ [g₁₁a+g₁₂b : g₂₁a+g₂₂b]`.
    pub fn apply(&self, z: &ProjPoint) -> Result<ProjPoint, GeomError> {
        let p = z.prime();
        let n = z.precision().max(1) + 2;
        let e: Vec<QuadExtScalar> = self.m.iter().map(|x| QuadExtScalar::from_rational(x, p, n)).collect();
        let (x, y) = z.coords();
        let nx = lin(&e[0], x, &e[1], y)?;
        let ny = lin(&e[2], x, &e[3], y)?;
        match (nx, ny) {
            (Lin::Value(a), Lin::Value(b)) => Ok(ProjPoint::from_homogeneous(a, b)?),
            (Lin::Value(a), Lin::Zero) => Ok(ProjPoint::from_homogeneous(a, QuadExtScalar::zero(p, n))?),
            (Lin::Zero, Lin::Value(b)) => Ok(ProjPoint::from_homogeneous(QuadExtScalar::zero(p, n), b)?),
            _ => Err(GeomError::PrecisionExhausted { needed: 1, available: 0 }),
        }
    }

    pub fn kind(&self, p: u32) -> ElementKind {
        classify_element(self, p)
    }

    pub fn to_strings(&self) -> [[String; 2]; 2] {
        let f = |x: &BigRational| format_rational(x);
        [[f(&self.m[0]), f(&self.m[1])], [f(&self.m[2]), f(&self.m[3])]]
    }

    pub fn from_strings(rows: &[[String; 2]; 2]) -> Option<Pgl2> {
        let g = |s: &String| parse_rational(s);
        Pgl2::new(g(&rows[0][0])?, g(&rows[0][1])?, g(&rows[1][0])?, g(&rows[1][1])?).ok()
    }
}

impl fmt::Debug for Pgl2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = self.to_strings();
        write!(f, "[[{}, {}], [{}, {}]]", s[0][0], s[0][1], s[1][0], s[1][1])
    }
}

enum Lin {
    Value(QuadExtScalar),
    Zero,
}

/// `a·x + b·y` where an exact or total cancellation is reported as zero.
fn lin(a: &QuadExtScalar, x: &QuadExtScalar, b: &QuadExtScalar, y: &QuadExtScalar) -> Result<Lin, ArithError> {
    let ax = if a.is_exact_zero() || x.is_exact_zero() { None } else { Some(a.mul(x)?) };
    let by = if b.is_exact_zero() || y.is_exact_zero() { None } else { Some(b.mul(y)?) };
    match (ax, by) {
        (None, None) => Ok(Lin::Zero),
        (Some(u), None) | (None, Some(u)) => Ok(Lin::Value(u)),
        (Some(u), Some(v)) => match u.add(&v) {
            Ok(s) => Ok(Lin::Value(s)),
            Err(ArithError::Cancellation { .. }) => Ok(Lin::Zero),
            Err(e) => Err(e),
        },
    }
}

/// Hyperbolic iff `v(tr²/det) < 0`; parabolic iff `tr² = 4 det`.
pub fn classify_element(g: &Pgl2, p: u32) -> ElementKind {
    let t = g.trace();
    let d = g.det();
    let t2 = &t * &t;
    if t2 == BigRational::from_integer(4.into()) * &d {
        return ElementKind::Parabolic;
    }
    match rational_valuation(&t2, p) {
        Some(vt) if vt < rational_valuation(&d, p).unwrap() => ElementKind::Hyperbolic,
        _ => ElementKind::EllipticOrTorsion,
    }
}

/// Exact square root of a non-negative rational, if it is a square.
fn rational_sqrt(r: &BigRational) -> Option<BigRational> {
    if r.is_negative() {
        return None;
    }
    let n = r.numer().sqrt();
    let d = r.denom().sqrt();
    if &(&n * &n) == r.numer() && &(&d * &d) == r.denom() {
        Some(BigRational::new(n, d))
    } else {
        None
    }
}

/// Fixed points and multiplier of a hyperbolic element.
pub fn fixed_points(g: &Pgl2, p: u32, precision: u32) -> Result<FixedPoints, GeomError> {
    if classify_element(g, p) != ElementKind::Hyperbolic {
        return Err(GeomError::NotHyperbolic);
    }
    let [a, b, c, d] = g.entries().clone();
    let t = g.trace();
    let det = g.det();
    let disc = &t * &t - BigRational::from_integer(4.into()) * &det;
    if let Some(s) = rational_sqrt(&disc) {
        let two = BigRational::from_integer(2.into());
        let l1 = (&t + &s) / &two;
        let l2 = (&t - &s) / &two;
        let v1 = rational_valuation(&l1, p).unwrap();
        let v2 = rational_valuation(&l2, p).unwrap();
        let (big, small) = if v1 < v2 { (l1, l2) } else { (l2, l1) };
        let attracting = rational_eigenpoint(&a, &b, &c, &d, &big, p, precision);
        let repelling = rational_eigenpoint(&a, &b, &c, &d, &small, p, precision);
        let q = PadicScalar::from_rational(&(small / big), p, precision);
        return Ok(FixedPoints { attracting, repelling, multiplier: q });
    }
    // Eigenvalues are in Q_p but not Q: λ ← t − det/λ converges to the
    // eigenvalue of smaller valuation.
    let n = precision + 4;
    let tp = PadicScalar::from_rational(&t, p, n);
    let dp = PadicScalar::from_rational(&det, p, n);
    let mut lam = tp.clone();
    for _ in 0..(2 * n + 4) {
        let next = tp.sub(&dp.div(&lam)?)?;
        if next == lam {
            break;
        }
        lam = next;
    }
    let small = dp.div(&lam)?;
    let attracting = padic_eigenpoint(&a, &b, &c, &d, &lam, p, n)?;
    let repelling = padic_eigenpoint(&a, &b, &c, &d, &small, p, n)?;
    Ok(FixedPoints { attracting, repelling, multiplier: small.div(&lam)?.with_precision(precision) })
}

fn rational_eigenpoint(
    a: &BigRational,
    b: &BigRational,
    c: &BigRational,
    d: &BigRational,
    lam: &BigRational,
    p: u32,
    precision: u32,
) -> ProjPoint {
    // (b, λ − a) or (λ − d, c), whichever is nonzero.
    let (x, y) = if !(b.is_zero() && (lam - a).is_zero()) { (b.clone(), lam - a) } else { (lam - d, c.clone()) };
    if y.is_zero() {
        ProjPoint::infinity(p, precision)
    } else {
        ProjPoint::from_rational(&(x / y), p, precision)
    }
}

fn padic_eigenpoint(
    a: &BigRational,
    b: &BigRational,
    c: &BigRational,
    d: &BigRational,
    lam: &PadicScalar,
    p: u32,
    n: u32,
) -> Result<ProjPoint, GeomError> {
    let conv = |x: &BigRational| PadicScalar::from_rational(x, p, n);
    let la = lam.coord_sum(&conv(a).neg())?;
    let ld = lam.coord_sum(&conv(d).neg())?;
    let cands = [(CoordSum::Value(conv(b)), la), (ld, CoordSum::Value(conv(c)))];
    let mut best: Option<(i64, ProjPoint)> = None;
    for (x, y) in cands {
        let (x, y) = match (x, y) {
            (CoordSum::Value(x), CoordSum::Value(y)) => (x, y),
            (CoordSum::Value(x), CoordSum::ZeroMod(_)) if !x.is_exact_zero() => (x, PadicScalar::zero(p, n)),
            (CoordSum::ZeroMod(_), CoordSum::Value(y)) if !y.is_exact_zero() => (PadicScalar::zero(p, n), y),
            _ => continue,
        };
        let m = match (x.valuation(), y.valuation()) {
            (None, None) => continue,
            (Some(u), None) | (None, Some(u)) => u,
            (Some(u), Some(v)) => u.min(v),
        };
        let pt = ProjPoint::from_homogeneous(QuadExtScalar::from_base(x), QuadExtScalar::from_base(y))?;
        if best.as_ref().map_or(true, |(bm, _)| m < *bm) {
            best = Some((m, pt));
        }
    }
    best.map(|(_, pt)| pt).ok_or(GeomError::PrecisionExhausted { needed: 1, available: 0 })
}

/// `(t − x)/(t − y)` with the conventions `y = ∞ ⇒ t − x`, `x = ∞ ⇒ 1/(t − y)`,
/// `t = ∞ ⇒ 1`, and `x = y ⇒ 1`.
pub fn cross_ratio_factor(t: &ProjPoint, x: &ProjPoint, y: &ProjPoint) -> Result<QuadExtScalar, GeomError> {
    let p = t.prime();
    let n = t.precision().max(x.precision()).max(y.precision()).max(1);
    if x == y {
        return Ok(QuadExtScalar::one(p, n));
    }
    let Some(tv) = t.affine() else {
        return Ok(QuadExtScalar::one(p, n));
    };
    let diff = |u: &ProjPoint| -> Result<QuadExtScalar, GeomError> {
        let uv = u.affine().expect("finite");
        tv.sub(&uv).map_err(|e| match e {
            ArithError::Cancellation { .. } => GeomError::Pole,
            e => GeomError::Arith(e),
        })
    };
    match (x.is_infinity(), y.is_infinity()) {
        (true, true) => Ok(QuadExtScalar::one(p, n)),
        (true, false) => Ok(diff(y)?.inv()?),
        (false, true) => diff(x),
        (false, false) => Ok(diff(x)?.div(&diff(y)?)?),
    }
}

/// `(−1)^{Σ v_p(det g_p)}` over the places of a tuple.
pub fn orientation_character(g: &[Pgl2], p: u32) -> i8 {
    let total: i64 = g.iter().map(|h| rational_valuation(&h.det(), p).unwrap()).sum();
    if total.rem_euclid(2) == 0 {
        1
    } else {
        -1
    }
}

#[cfg(test)]
pub(crate) fn rat(n: i64) -> BigRational {
    BigRational::from_integer(n.into())
}

#[cfg(test)]
mod tests {
    use super::*;

    const N: u32 = 30;

    fn pt(n: i64) -> ProjPoint {
        ProjPoint::from_int(n, 5, N)
    }

    #[test]
    fn apply_examples() {
        let g = Pgl2::from_ints(5, 0, 0, 1).unwrap();
        assert!(g.apply(&pt(1)).unwrap().agreement_digits(&pt(5)) >= N - 2);
        let z = pt(17);
        assert_eq!(Pgl2::identity().apply(&z).unwrap().agreement_digits(&z), N);
        let inf = ProjPoint::infinity(5, N);
        assert!(g.apply(&inf).unwrap().is_infinity());
    }

    #[test]
    fn classify_examples() {
        assert_eq!(classify_element(&Pgl2::from_ints(5, 0, 0, 1).unwrap(), 5), ElementKind::Hyperbolic);
        assert_eq!(classify_element(&Pgl2::from_ints(1, 1, 0, 1).unwrap(), 5), ElementKind::Parabolic);
        assert_eq!(classify_element(&Pgl2::from_ints(0, 1, -1, 0).unwrap(), 5), ElementKind::EllipticOrTorsion);
    }

    #[test]
    fn diagonal_fixed_points() {
        let g = Pgl2::from_ints(5, 0, 0, 1).unwrap();
        let fp = fixed_points(&g, 5, N).unwrap();
        assert!(fp.attracting.agreement_digits(&pt(0)) >= N - 1);
        assert!(fp.repelling.is_infinity());
        assert_eq!(fp.multiplier.to_rational(), rat(5));
        let inv = fixed_points(&g.inverse(), 5, N).unwrap();
        assert!(inv.attracting.is_infinity());
        assert_eq!(inv.multiplier.to_rational(), rat(5));
    }

    #[test]
    fn irrational_fixed_points_are_fixed() {
        // trace 7, det 5: λ² − 7λ + 5 has no rational root
        let g = Pgl2::from_ints(6, 1, 1, 1).unwrap();
        let fp = fixed_points(&g, 5, N).unwrap();
        assert!(g.apply(&fp.attracting).unwrap().agreement_digits(&fp.attracting) >= N - 4);
        assert!(g.apply(&fp.repelling).unwrap().agreement_digits(&fp.repelling) >= N - 4);
        assert_eq!(fp.multiplier.valuation(), Some(1));
    }

    #[test]
    fn cross_ratio_examples() {
        let v = cross_ratio_factor(&pt(0), &pt(2), &pt(3)).unwrap();
        let two_thirds = QuadExtScalar::from_rational(&BigRational::new(2.into(), 3.into()), 5, N);
        assert!(v.agreement_digits(&two_thirds) >= N - 2);
        assert!(cross_ratio_factor(&pt(4), &pt(2), &pt(2)).unwrap().agreement_digits(&QuadExtScalar::one(5, N)) >= N - 1);
        let inf = ProjPoint::infinity(5, N);
        assert_eq!(cross_ratio_factor(&inf, &pt(2), &pt(3)).unwrap(), QuadExtScalar::one(5, N));
        assert_eq!(cross_ratio_factor(&pt(2), &pt(2), &pt(3)), Err(GeomError::Pole));
    }

    #[test]
    fn orientation_examples() {
        let g = Pgl2::from_ints(5, 0, 0, 1).unwrap();
        assert_eq!(orientation_character(&[g.clone()], 5), -1);
        assert_eq!(orientation_character(&[Pgl2::identity(), Pgl2::identity()], 5), 1);
        assert_eq!(orientation_character(&[g.clone(), g], 5), 1);
    }

    #[test]
    fn with_fixed_points_builds_conjugate() {
        let g = Pgl2::with_fixed_points(&rat(1), &rat(2), &rat(125)).unwrap();
        assert_eq!(g, Pgl2::from_ints(249, -248, 124, -123).unwrap());
        let fp = fixed_points(&g, 5, N).unwrap();
        assert!(fp.attracting.agreement_digits(&pt(1)) >= N - 1);
        assert!(fp.repelling.agreement_digits(&pt(2)) >= N - 1);
    }
}
