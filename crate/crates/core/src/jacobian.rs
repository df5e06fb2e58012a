//! Period lattices, plectic Jacobians and Tate curves.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::Serialize;

use crate::error::{ArithError, JacobianError};
use crate::group::PlecticGroup;
use crate::integration::{integrate_group, period_matrix, MultiplicativeTensor, PlecticCycle, RiemannOptions};
use crate::intlin::LatticeBasis;
use crate::padic::{rational_valuation, QuadExtScalar};

/// Periods `qᵢⱼ` of one factor (row `i`: measure basis, column `j`: generator).
#[derive(Debug, Clone, PartialEq)]
pub struct FactorPeriods {
    pub matrix: Vec<Vec<QuadExtScalar>>,
    valuations: Vec<Vec<i64>>,
    basis: LatticeBasis,
}

impl FactorPeriods {
    pub fn new(matrix: Vec<Vec<QuadExtScalar>>) -> Result<Self, JacobianError> {
        let valuations: Vec<Vec<i64>> = matrix
            .iter()
            .map(|row| row.iter().map(|q| q.valuation().ok_or(JacobianError::DegenerateLattice)).collect())
            .collect::<Result<_, _>>()?;
        if (0..valuations.len()).any(|i| valuations[i][i] <= 0) {
            return Err(JacobianError::NonPositivePeriod);
        }
        let basis = LatticeBasis::new(&valuations).ok_or(JacobianError::DegenerateLattice)?;
        Ok(FactorPeriods { matrix, valuations, basis })
    }

    pub fn rank(&self) -> usize {
        self.matrix.len()
    }

    pub fn valuations(&self) -> &[Vec<i64>] {
        &self.valuations
    }

    /// Digits to which `qᵢⱼ = qⱼᵢ` for every pair.
    pub fn symmetry_digits(&self) -> u32 {
        let g = self.rank();
        let mut d = u32::MAX;
        for i in 0..g {
            for j in (i + 1)..g {
                d = d.min(self.matrix[i][j].agreement_digits(&self.matrix[j][i]));
            }
        }
        d
    }

    /// Divides by the lattice element that puts the valuation vector in the
    /// Hermite box.
    pub fn reduce(&self, u: &[QuadExtScalar]) -> Result<Vec<QuadExtScalar>, JacobianError> {
        let g = self.rank();
        if u.len() != g {
            return Err(JacobianError::Dimension(format!("{} coordinates for rank {g}", u.len())));
        }
        let v: Vec<i64> = u.iter().map(|x| x.valuation().ok_or(JacobianError::NonElementary)).collect::<Result<_, _>>()?;
        let (_, ks) = self.basis.reduce(&v);
        let m: Vec<i64> = (0..g).map(|j| (0..g).map(|l| self.basis.u[j][l] * ks[l] as i128).sum::<i128>() as i64).collect();
        let mut out = Vec::with_capacity(g);
        for (i, x) in u.iter().enumerate() {
            let mut y = x.clone();
            for (j, &mj) in m.iter().enumerate() {
                if mj != 0 {
                    y = y.div(&self.matrix[i][j].pow(mj)?)?;
                }
            }
            out.push(y);
        }
        Ok(out)
    }
}

/// Per-place period data; `None` at trivial places.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodLattice {
    pub places: Vec<Option<FactorPeriods>>,
}

pub fn period_lattice(group: &PlecticGroup, opts: &RiemannOptions) -> Result<PeriodLattice, JacobianError> {
    let places = group
        .factors()
        .iter()
        .map(|f| match f.schottky() {
            None => Ok(None),
            Some(s) => Ok(Some(FactorPeriods::new(period_matrix(s, opts)?)?)),
        })
        .collect::<Result<_, JacobianError>>()?;
    Ok(PeriodLattice { places })
}

/// A pure tensor `j₁ ⊗ ⋯ ⊗ j_r` of per-place classes; each class is a
/// reduced coordinate vector over that place's measure basis.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobianElement {
    pub factors: Vec<Vec<QuadExtScalar>>,
}

impl JacobianElement {
    /// The identity with the given per-place ranks.
    pub fn identity(p: u32, precision: u32, ranks: &[usize]) -> Self {
        JacobianElement { factors: ranks.iter().map(|&g| vec![QuadExtScalar::one(p, precision); g]).collect() }
    }

    pub fn places(&self) -> usize {
        self.factors.len()
    }

    pub fn ranks(&self) -> Vec<usize> {
        self.factors.iter().map(Vec::len).collect()
    }

    /// Value at every basis multi-index, last place fastest.
    pub fn values(&self) -> Vec<MultiplicativeTensor> {
        let mut out: Vec<Vec<QuadExtScalar>> = vec![Vec::new()];
        for f in &self.factors {
            out = out.iter().flat_map(|t| f.iter().map(move |x| [t.clone(), vec![x.clone()]].concat())).collect();
        }
        out.into_iter().map(MultiplicativeTensor::elementary).collect()
    }

    pub fn is_identity(&self) -> Result<bool, JacobianError> {
        for v in self.values() {
            if !v.is_identity()? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Digits to which the class is trivial: some place is `1` in every
    /// coordinate to that many digits.
    pub fn identity_digits(&self) -> u32 {
        self.factors
            .iter()
            .map(|f| f.iter().map(|x| x.agreement_digits(&QuadExtScalar::one(x.prime(), x.precision().max(1)))).min().unwrap_or(u32::MAX))
            .max()
            .unwrap_or(u32::MAX)
    }

    /// Smallest digit agreement over basis indices.
    pub fn agreement_digits(&self, other: &Self) -> Result<u32, JacobianError> {
        if self.ranks() != other.ranks() {
            return Ok(0);
        }
        let mut d = u32::MAX;
        for (a, b) in self.values().iter().zip(other.values()) {
            d = d.min(a.agreement_digits(&b)?);
        }
        Ok(d)
    }

    pub fn to_record(&self) -> Result<JacobianRecord, ArithError> {
        Ok(JacobianRecord { factors: self.factors.iter().map(|f| f.iter().map(QuadExtScalar::to_record).collect()).collect() })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JacobianRecord {
    pub factors: Vec<Vec<crate::padic::ExtRecord>>,
}

/// Splits per-index elementary tensors into per-place vectors and checks
/// the result is a pure tensor.
pub fn kunneth_split(values: &[MultiplicativeTensor], ranks: &[usize], p: u32, precision: u32) -> Result<Vec<Vec<QuadExtScalar>>, JacobianError> {
    let total: usize = ranks.iter().product();
    if values.len() != total {
        return Err(JacobianError::Dimension(format!("{} values for {total} basis indices", values.len())));
    }
    let r = ranks.len();
    let mut normalized = Vec::with_capacity(total);
    for v in values {
        let n = v.normalize()?;
        match n.terms().len() {
            0 => return Ok(ranks.iter().map(|&g| vec![QuadExtScalar::one(p, precision); g]).collect()),
            1 => normalized.push(n.terms()[0].iter().map(|f| f.evaluate()).collect::<Result<Vec<_>, _>>()?),
            _ => return Err(JacobianError::NonElementary),
        }
    }
    let stride = |place: usize| ranks[place + 1..].iter().product::<usize>();
    let factors: Vec<Vec<QuadExtScalar>> = (0..r).map(|place| (0..ranks[place]).map(|i| normalized[i * stride(place)][place].clone()).collect()).collect();
    let candidate = JacobianElement { factors };
    for (a, b) in candidate.values().iter().zip(values) {
        if a.agreement_digits(b)? < precision.saturating_sub(4) {
            return Err(JacobianError::NonElementary);
        }
    }
    Ok(candidate.factors)
}

/// Reduces per-index values modulo the lattice, place by place.
pub fn reduce_mod_lattice(values: &[MultiplicativeTensor], lattice: &PeriodLattice, p: u32, precision: u32) -> Result<JacobianElement, JacobianError> {
    let ranks: Vec<usize> = lattice.places.iter().map(|f| f.as_ref().map_or(0, FactorPeriods::rank)).collect();
    let split = kunneth_split(values, &ranks, p, precision)?;
    reduce_factors(split, lattice)
}

pub fn reduce_factors(factors: Vec<Vec<QuadExtScalar>>, lattice: &PeriodLattice) -> Result<JacobianElement, JacobianError> {
    let factors = factors
        .iter()
        .zip(&lattice.places)
        .map(|(u, f)| f.as_ref().expect("nontrivial place").reduce(u))
        .collect::<Result<_, _>>()?;
    Ok(JacobianElement { factors })
}

pub fn abel_jacobi(group: &PlecticGroup, lattice: &PeriodLattice, cycle: &PlecticCycle, opts: &RiemannOptions) -> Result<JacobianElement, JacobianError> {
    let r = integrate_group(group, cycle, opts)?;
    reduce_mod_lattice(&r.values, lattice, group.prime(), group.precision())
}

/// `j₁ ⊗ j₂`.
pub fn kunneth_compose(parts: &[JacobianElement]) -> JacobianElement {
    JacobianElement { factors: parts.iter().flat_map(|j| j.factors.iter().cloned()).collect() }
}

/// Per-place single-factor classes.
pub fn kunneth_decompose(j: &JacobianElement) -> Vec<JacobianElement> {
    j.factors.iter().map(|f| JacobianElement { factors: vec![f.clone()] }).collect()
}

/// `C^×/q^Z` with `v(q) > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct TateCurve {
    q: QuadExtScalar,
    vq: i64,
}

impl TateCurve {
    pub fn new(q: QuadExtScalar) -> Result<Self, JacobianError> {
        match q.valuation() {
            Some(v) if v > 0 => Ok(TateCurve { q, vq: v }),
            _ => Err(JacobianError::NonPositivePeriod),
        }
    }

    pub fn period(&self) -> &QuadExtScalar {
        &self.q
    }

    /// The representative with `0 ≤ v(u) < v(q)`.
    pub fn reduce(&self, u: &QuadExtScalar) -> Result<QuadExtScalar, JacobianError> {
        let v = u.valuation().ok_or(JacobianError::NonElementary)?;
        let k = v.div_euclid(self.vq);
        Ok(if k == 0 { u.clone() } else { u.div(&self.q.pow(k)?)? })
    }

    pub fn identity(&self) -> QuadExtScalar {
        QuadExtScalar::one(self.q.prime(), self.q.precision())
    }

    pub fn add(&self, u: &QuadExtScalar, w: &QuadExtScalar) -> Result<QuadExtScalar, JacobianError> {
        self.reduce(&u.mul(w)?)
    }

    pub fn neg(&self, u: &QuadExtScalar) -> Result<QuadExtScalar, JacobianError> {
        self.reduce(&u.inv()?)
    }

    pub fn same_point(&self, u: &QuadExtScalar, w: &QuadExtScalar) -> Result<u32, JacobianError> {
        Ok(self.reduce(u)?.agreement_digits(&self.reduce(w)?))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "answer", rename_all = "lowercase")]
pub enum Commensurability {
    Yes { a: i64, b: i64 },
    No,
}

/// Exact check of `q^a = q̃^b` for rationals with positive valuation.
pub fn commensurability_check(q: &BigRational, qt: &BigRational, p: u32) -> Result<Commensurability, JacobianError> {
    let (Some(v), Some(vt)) = (rational_valuation(q, p), rational_valuation(qt, p)) else {
        return Err(JacobianError::NonPositivePeriod);
    };
    if v <= 0 || vt <= 0 {
        return Err(JacobianError::NonPositivePeriod);
    }
    let g = v.gcd(&vt);
    let (a, b) = (vt / g, v / g);
    let lhs = pow_rational(q, a);
    let rhs = pow_rational(qt, b);
    // q^a / q̃^b is a unit; only ±1 are rational roots of unity
    Ok(if lhs == rhs {
        Commensurability::Yes { a, b }
    } else if lhs == -rhs.clone() {
        Commensurability::Yes { a: 2 * a, b: 2 * b }
    } else {
        Commensurability::No
    })
}

fn pow_rational(r: &BigRational, e: i64) -> BigRational {
    let mut out = BigRational::one();
    for _ in 0..e {
        out *= r;
    }
    out
}

/// The p-adic version: decided by valuations and the unit part up to the
/// common precision. A `Yes` here is certified only to the returned digits.
pub fn commensurability_check_padic(q: &QuadExtScalar, qt: &QuadExtScalar) -> Result<(Commensurability, u32), JacobianError> {
    let (Some(v), Some(vt)) = (q.valuation(), qt.valuation()) else {
        return Err(JacobianError::NonPositivePeriod);
    };
    if v <= 0 || vt <= 0 {
        return Err(JacobianError::NonPositivePeriod);
    }
    let g = v.gcd(&vt);
    let (a, b) = (vt / g, v / g);
    let u = q.pow(a)?.div(&qt.pow(b)?)?;
    let p = q.prime();
    let prec = u.precision();
    let one = QuadExtScalar::one(p, prec);
    // roots of unity have order dividing p − 1 (or 2 when p = 2)
    let m = if p == 2 { 2 } else { i64::from(p) - 1 };
    for k in 1..=m {
        if m % k == 0 {
            let d = u.pow(k)?.agreement_digits(&one);
            if d >= prec {
                return Ok((Commensurability::Yes { a: k * a, b: k * b }, d));
            }
        }
    }
    Ok((Commensurability::No, 0))
}

/// Contraction by a primitive character `λ` on the measure basis followed by
/// per-place Tate reduction.
#[derive(Debug, Clone, PartialEq)]
pub struct ModularProjection {
    pub lambda: Vec<i64>,
    pub curves: Vec<TateCurve>,
}

pub fn modular_projection(lambda: &[i64], q_tilde: &[QuadExtScalar]) -> Result<ModularProjection, JacobianError> {
    let g = lambda.iter().fold(BigInt::zero(), |acc, &x| acc.gcd(&BigInt::from(x)));
    if !g.abs().is_one() {
        return Err(JacobianError::NonPrimitiveCharacter);
    }
    let curves = q_tilde.iter().cloned().map(TateCurve::new).collect::<Result<_, _>>()?;
    Ok(ModularProjection { lambda: lambda.to_vec(), curves })
}

impl ModularProjection {
    /// One Tate point per place; fails when the contraction is not an
    /// elementary tensor.
    pub fn apply(&self, j: &JacobianElement) -> Result<Vec<QuadExtScalar>, JacobianError> {
        let values = j.values();
        if values.len() != self.lambda.len() {
            return Err(JacobianError::Dimension(format!("character of length {} on {} coordinates", self.lambda.len(), values.len())));
        }
        let places = j.places();
        let mut acc = MultiplicativeTensor::identity(places);
        for (v, &l) in values.iter().zip(&self.lambda) {
            acc = acc.mul(&v.pow(l));
        }
        match acc.canonical().map_err(|_| JacobianError::NonElementary)? {
            None => Ok(self.curves.iter().map(TateCurve::identity).collect()),
            Some(vals) => vals.iter().zip(&self.curves).map(|(x, c)| c.reduce(x)).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::{Factor, SchottkyFactor};
    use crate::proj::{Pgl2, ProjPoint};

    fn tate_group(places: usize) -> PlecticGroup {
        let f = SchottkyFactor::cyclic(5, 40, Pgl2::from_ints(5, 0, 0, 1).unwrap()).unwrap();
        PlecticGroup::new(5, 40, vec![Factor::Cyclic(f); places])
    }

    fn q(n: i64, d: i64) -> QuadExtScalar {
        QuadExtScalar::from_rational(&BigRational::new(n.into(), d.into()), 5, 40)
    }

    #[test]
    fn tate_abel_jacobi() {
        let g = tate_group(1);
        let opts = RiemannOptions::default();
        let lat = period_lattice(&g, &opts).unwrap();
        assert_eq!(lat.places[0].as_ref().unwrap().matrix[0][0].agreement_digits(&q(5, 1)), 40);
        let pt = |n| ProjPoint::from_int(n, 5, 40);
        let aj = abel_jacobi(&g, &lat, &PlecticCycle::single(pt(2), pt(3)), &opts).unwrap();
        assert!(aj.factors[0][0].agreement_digits(&q(2, 3)) >= 30);
        let gen = abel_jacobi(&g, &lat, &PlecticCycle::single(pt(10), pt(2)), &opts).unwrap();
        assert!(gen.is_identity().unwrap());
    }

    #[test]
    fn tate_normal_form() {
        let e = TateCurve::new(q(5, 1)).unwrap();
        assert_eq!(e.reduce(&q(250, 1)).unwrap().agreement_digits(&q(2, 1)), 40);
        assert_eq!(e.add(&q(2, 1), &q(3, 1)).unwrap().agreement_digits(&q(6, 1)), 40);
        let u = q(7, 25);
        assert!(e.add(&u, &e.neg(&u).unwrap()).unwrap().agreement_digits(&e.identity()) >= 39);
        assert!(TateCurve::new(q(2, 1)).is_err());
    }

    #[test]
    fn commensurability_examples() {
        let r = |n: i64| BigRational::from_integer(n.into());
        assert_eq!(commensurability_check(&r(5), &r(25), 5).unwrap(), Commensurability::Yes { a: 2, b: 1 });
        assert_eq!(commensurability_check(&r(5), &r(10), 5).unwrap(), Commensurability::No);
        assert_eq!(commensurability_check(&r(5), &r(5), 5).unwrap(), Commensurability::Yes { a: 1, b: 1 });
        assert_eq!(commensurability_check(&r(5), &r(-5), 5).unwrap(), Commensurability::Yes { a: 2, b: 2 });
        assert_eq!(commensurability_check_padic(&q(5, 1), &q(25, 1)).unwrap().0, Commensurability::Yes { a: 2, b: 1 });
        assert_eq!(commensurability_check_padic(&q(5, 1), &q(10, 1)).unwrap().0, Commensurability::No);
    }

    #[test]
    fn kunneth_and_projection() {
        let g = tate_group(2);
        let opts = RiemannOptions::default();
        let lat = period_lattice(&g, &opts).unwrap();
        let pt = |n| ProjPoint::from_int(n, 5, 40);
        let d = PlecticCycle::elementary(vec![(pt(2), pt(3)), (pt(7), pt(1))]);
        let aj = abel_jacobi(&g, &lat, &d, &opts).unwrap();
        let g1 = tate_group(1);
        let lat1 = period_lattice(&g1, &opts).unwrap();
        let a1 = abel_jacobi(&g1, &lat1, &PlecticCycle::single(pt(2), pt(3)), &opts).unwrap();
        let a2 = abel_jacobi(&g1, &lat1, &PlecticCycle::single(pt(7), pt(1)), &opts).unwrap();
        assert!(aj.agreement_digits(&kunneth_compose(&[a1, a2])).unwrap() >= 30);
        assert_eq!(kunneth_compose(&kunneth_decompose(&aj)), aj);
        let m = modular_projection(&[1], &[q(5, 1), q(5, 1)]).unwrap();
        let pts = m.apply(&aj).unwrap();
        assert_eq!(pts.len(), 2);
        assert!(modular_projection(&[0], &[q(5, 1)]).is_err());
    }
}
