//! Multiplicative integration of plectic 0-cycles.
//!
//! Two algorithms: adaptive Riemann products over word-ball partitions of the
//! limit set, and for single factors the classical cross-ratio product over
//! coset representatives of each generator.

use std::collections::HashMap;

use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use crate::error::{ArithError, GeomError, IntegrationError};
use crate::group::{PlecticGroup, SchottkyFactor};
use crate::measures::{invariant_measure_lattice, HLattice, QuotientGraph};
use crate::padic::{parse_rational, Extension, ExtRecord, PadicScalar, QuadExtScalar};
use crate::proj::{cross_ratio_factor, Pgl2, ProjPoint};
use crate::tree::BoundaryBall;
use crate::words::{all_letters, letter, FreeWord, Letter};

/// One degree-zero pair per place, with an integer coefficient.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleTerm {
    pub coeff: i64,
    pub places: Vec<(ProjPoint, ProjPoint)>,
}

/// A formal sum of elementary terms `⊗ₚ([xₚ] − [yₚ])`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PlecticCycle {
    pub terms: Vec<CycleTerm>,
}

impl PlecticCycle {
    pub fn elementary(places: Vec<(ProjPoint, ProjPoint)>) -> Self {
        PlecticCycle { terms: vec![CycleTerm { coeff: 1, places }] }
    }

    pub fn single(x: ProjPoint, y: ProjPoint) -> Self {
        Self::elementary(vec![(x, y)])
    }

    pub fn places(&self) -> Option<usize> {
        self.terms.first().map(|t| t.places.len())
    }

    pub fn add(&self, other: &PlecticCycle) -> PlecticCycle {
        PlecticCycle { terms: self.terms.iter().chain(&other.terms).cloned().collect() }
    }

    pub fn scale(&self, k: i64) -> PlecticCycle {
        PlecticCycle { terms: self.terms.iter().map(|t| CycleTerm { coeff: t.coeff * k, ..t.clone() }).collect() }
    }

    /// `g · D`, one matrix per place.
    pub fn translate(&self, g: &[Pgl2]) -> Result<PlecticCycle, GeomError> {
        let terms = self
            .terms
            .iter()
            .map(|t| {
                let places = t
                    .places
                    .iter()
                    .zip(g)
                    .map(|((x, y), h)| Ok((h.apply(x)?, h.apply(y)?)))
                    .collect::<Result<_, GeomError>>()?;
                Ok(CycleTerm { coeff: t.coeff, places })
            })
            .collect::<Result<_, GeomError>>()?;
        Ok(PlecticCycle { terms })
    }

    pub fn frobenius(&self) -> Result<PlecticCycle, ArithError> {
        let terms = self
            .terms
            .iter()
            .map(|t| {
                let places = t.places.iter().map(|(x, y)| Ok((x.frobenius()?, y.frobenius()?))).collect::<Result<_, ArithError>>()?;
                Ok(CycleTerm { coeff: t.coeff, places })
            })
            .collect::<Result<_, ArithError>>()?;
        Ok(PlecticCycle { terms })
    }

    /// Sum of coefficients over the terms, per place; `[x] − [y]` terms make
    /// every entry zero.
    pub fn degree(&self) -> Vec<i64> {
        vec![0; self.places().unwrap_or(0)]
    }

    pub fn from_records(recs: &[CycleTermRecord], p: u32, precision: u32) -> Result<Self, ArithError> {
        let terms = recs
            .iter()
            .map(|r| {
                let places = r
                    .places
                    .iter()
                    .map(|pr| Ok((pr.x.to_point(p, precision)?, pr.y.to_point(p, precision)?)))
                    .collect::<Result<_, ArithError>>()?;
                Ok(CycleTerm { coeff: r.coeff, places })
            })
            .collect::<Result<_, ArithError>>()?;
        Ok(PlecticCycle { terms })
    }

    pub fn to_records(&self) -> Vec<CycleTermRecord> {
        self.terms
            .iter()
            .map(|t| CycleTermRecord {
                coeff: t.coeff,
                places: t.places.iter().map(|(x, y)| PairRecord { x: PointRecord::from_point(x), y: PointRecord::from_point(y) }).collect(),
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleTermRecord {
    pub coeff: i64,
    pub places: Vec<PairRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub x: PointRecord,
    pub y: PointRecord,
}

/// `"inf"`, a rational `"a/b"`, `"a+bw"` in the unramified quadratic
/// extension, or a full scalar record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PointRecord {
    Text(String),
    Scalar(ExtRecord),
}

impl PointRecord {
    pub fn from_point(z: &ProjPoint) -> Self {
        match z.affine() {
            None => PointRecord::Text("inf".into()),
            Some(v) => PointRecord::Scalar(v.to_record()),
        }
    }

    pub fn to_point(&self, p: u32, precision: u32) -> Result<ProjPoint, ArithError> {
        match self {
            PointRecord::Scalar(r) => ProjPoint::finite(QuadExtScalar::from_record(r, p)?),
            PointRecord::Text(s) => parse_point(s, p, precision),
        }
    }
}

pub fn parse_point(s: &str, p: u32, precision: u32) -> Result<ProjPoint, ArithError> {
    let s = s.trim();
    if s == "inf" || s == "∞" {
        return Ok(ProjPoint::infinity(p, precision));
    }
    let bad = || ArithError::Malformed(format!("cannot parse point {s:?}"));
    if let Some(body) = s.strip_suffix('w') {
        // split "a+b" / "a-b" at the last sign that is not leading
        let cut = body.char_indices().skip(1).filter(|&(_, c)| c == '+' || c == '-').map(|(i, _)| i).last();
        let (a, b) = match cut {
            Some(i) => (&body[..i], &body[i..]),
            None => ("0", body),
        };
        let b = b.strip_prefix('+').unwrap_or(b);
        let b = match b {
            "" => "1".to_string(),
            "-" => "-1".to_string(),
            b => b.trim_end_matches('*').to_string(),
        };
        let a = parse_rational(a).ok_or_else(bad)?;
        let b = parse_rational(&b).ok_or_else(bad)?;
        let ext = Extension::unramified(p)?;
        let z = QuadExtScalar::new(ext, PadicScalar::from_rational(&a, p, precision), PadicScalar::from_rational(&b, p, precision))?;
        return ProjPoint::finite(z);
    }
    let r = parse_rational(s).ok_or_else(bad)?;
    Ok(ProjPoint::from_rational(&r, p, precision))
}

/// One place of an elementary tensor: `value^exponent`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TensorFactor {
    pub value: QuadExtScalar,
    pub exponent: i64,
}

impl TensorFactor {
    pub fn new(value: QuadExtScalar) -> Self {
        TensorFactor { value, exponent: 1 }
    }

    pub fn evaluate(&self) -> Result<QuadExtScalar, ArithError> {
        self.value.pow(self.exponent)
    }

    fn is_unity(&self) -> bool {
        self.exponent == 0 || is_unity(&self.value)
    }
}

fn is_unity(x: &QuadExtScalar) -> bool {
    let one = QuadExtScalar::one(x.prime(), x.precision().max(1));
    x.agreement_digits(&one) >= x.precision()
}

/// A formal product of elementary tensors `⊗ₚ cₚ^{eₚ}`.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiplicativeTensor {
    places: usize,
    terms: Vec<Vec<TensorFactor>>,
}

impl MultiplicativeTensor {
    pub fn identity(places: usize) -> Self {
        MultiplicativeTensor { places, terms: Vec::new() }
    }

    pub fn elementary(values: Vec<QuadExtScalar>) -> Self {
        let places = values.len();
        MultiplicativeTensor { places, terms: vec![values.into_iter().map(TensorFactor::new).collect()] }
    }

    pub fn from_terms(places: usize, terms: Vec<Vec<TensorFactor>>) -> Self {
        MultiplicativeTensor { places, terms }
    }

    pub fn places(&self) -> usize {
        self.places
    }

    pub fn terms(&self) -> &[Vec<TensorFactor>] {
        &self.terms
    }

    pub fn mul(&self, other: &Self) -> Self {
        MultiplicativeTensor { places: self.places, terms: self.terms.iter().chain(&other.terms).cloned().collect() }
    }

    pub fn pow(&self, e: i64) -> Self {
        let terms = self
            .terms
            .iter()
            .map(|t| {
                let mut t = t.clone();
                t[0].exponent *= e;
                t
            })
            .collect();
        MultiplicativeTensor { places: self.places, terms }
    }

    pub fn inverse(&self) -> Self {
        self.pow(-1)
    }

    pub fn frobenius(&self) -> Result<Self, ArithError> {
        let terms = self
            .terms
            .iter()
            .map(|t| t.iter().map(|f| Ok(TensorFactor { value: f.value.frobenius()?, exponent: f.exponent })).collect())
            .collect::<Result<_, ArithError>>()?;
        Ok(MultiplicativeTensor { places: self.places, terms })
    }

    /// Merges terms that agree in all places but one, repeatedly, and drops
    /// terms with a trivial factor.
    pub fn normalize(&self) -> Result<Self, ArithError> {
        let mut terms: Vec<Vec<TensorFactor>> = self.terms.iter().filter(|t| !t.iter().any(TensorFactor::is_unity)).cloned().collect();
        if self.places == 0 {
            return Ok(MultiplicativeTensor { places: 0, terms: Vec::new() });
        }
        loop {
            let before = terms.len();
            for k in 0..self.places {
                let mut order: Vec<Vec<TensorFactor>> = Vec::new();
                let mut groups: HashMap<Vec<TensorFactor>, Vec<usize>> = HashMap::new();
                for (i, t) in terms.iter().enumerate() {
                    let key: Vec<TensorFactor> = t.iter().enumerate().filter(|&(p, _)| p != k).map(|(_, f)| f.clone()).collect();
                    let entry = groups.entry(key.clone()).or_default();
                    if entry.is_empty() {
                        order.push(key);
                    }
                    entry.push(i);
                }
                let mut next = Vec::with_capacity(order.len());
                for key in order {
                    let members = &groups[&key];
                    if members.len() == 1 {
                        next.push(terms[members[0]].clone());
                        continue;
                    }
                    let mut acc = terms[members[0]][k].evaluate()?;
                    for &i in &members[1..] {
                        acc = acc.mul(&terms[i][k].evaluate()?)?;
                    }
                    let mut t = terms[members[0]].clone();
                    t[k] = TensorFactor::new(acc);
                    if !t.iter().any(TensorFactor::is_unity) {
                        next.push(t);
                    }
                }
                terms = next;
            }
            if terms.len() == before {
                break;
            }
        }
        Ok(MultiplicativeTensor { places: self.places, terms })
    }

    /// Per-place values of the single elementary term, pushed into a
    /// canonical form: every place but the last is chosen between `a` and
    /// `a⁻¹` (valuation positive, then smaller digits) with the last place
    /// compensating. `None` for the identity.
    pub fn canonical(&self) -> Result<Option<Vec<QuadExtScalar>>, IntegrationError> {
        let n = self.normalize()?;
        match n.terms.len() {
            0 => Ok(None),
            1 => {
                let t = &n.terms[0];
                // move all exponents to the last place
                let e: i64 = t.iter().map(|f| f.exponent).product();
                let mut vals: Vec<QuadExtScalar> = t.iter().map(|f| f.value.clone()).collect();
                let last = vals.len() - 1;
                vals[last] = vals[last].pow(e)?;
                for p in 0..last {
                    let inv = vals[p].inv()?;
                    if canonical_key(&inv) < canonical_key(&vals[p]) {
                        vals[p] = inv;
                        vals[last] = vals[last].inv()?;
                    }
                }
                Ok(Some(vals))
            }
            _ => Err(IntegrationError::NonElementary),
        }
    }

    pub fn is_identity(&self) -> Result<bool, ArithError> {
        Ok(self.normalize()?.terms.is_empty())
    }

    /// Digits to which two elementary tensors agree, place by place.
    pub fn agreement_digits(&self, other: &Self) -> Result<u32, IntegrationError> {
        let (a, b) = (self.canonical()?, other.canonical()?);
        Ok(match (a, b) {
            (None, None) => u32::MAX,
            (Some(a), Some(b)) => a.iter().zip(&b).map(|(x, y)| x.agreement_digits(y)).min().unwrap_or(u32::MAX),
            _ => 0,
        })
    }

    pub fn to_record(&self) -> Result<TensorRecord, ArithError> {
        let n = self.normalize()?;
        Ok(TensorRecord {
            terms: n
                .terms
                .iter()
                .map(|t| t.iter().map(|f| FactorRecord { value: f.value.to_record(), exponent: f.exponent }).collect())
                .collect(),
        })
    }
}

fn canonical_key(x: &QuadExtScalar) -> (i64, Vec<u32>, Vec<u32>) {
    (-x.valuation_e().unwrap_or(i64::MAX), x.re().digits(), x.im().digits())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorRecord {
    pub value: ExtRecord,
    pub exponent: i64,
}

/// Serialized tensor: a list of elementary terms, one factor per place.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorRecord {
    pub terms: Vec<Vec<FactorRecord>>,
}

/// Integral values per lattice basis index.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegralResult {
    pub values: Vec<MultiplicativeTensor>,
    /// Longest word used in any partition.
    pub depth: usize,
    /// Digits stable between the two deepest partitions, per place.
    pub stable_digits: Vec<u32>,
}

impl IntegralResult {
    pub fn mul(&self, other: &Self) -> Self {
        IntegralResult {
            values: self.values.iter().zip(&other.values).map(|(a, b)| a.mul(b)).collect(),
            depth: self.depth.max(other.depth),
            stable_digits: self.stable_digits.iter().zip(&other.stable_digits).map(|(a, b)| *a.min(b)).collect(),
        }
    }

    /// Values of a single-place result.
    pub fn scalars(&self) -> Result<Vec<QuadExtScalar>, IntegrationError> {
        self.values
            .iter()
            .map(|v| {
                Ok(match v.canonical()? {
                    None => QuadExtScalar::one(2, 1),
                    Some(vals) => vals[0].clone(),
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RiemannOptions {
    pub max_depth: usize,
    pub output_digits: u32,
    /// Extra digits demanded of each partition cell beyond the output.
    pub guard_digits: u32,
}

impl Default for RiemannOptions {
    fn default() -> Self {
        RiemannOptions { max_depth: 16, output_digits: 20, guard_digits: 8 }
    }
}

/// `((tₚ − xₚ)/(tₚ − yₚ))ₚ`.
pub fn phi_eval(places: &[(ProjPoint, ProjPoint)], t: &[ProjPoint]) -> Result<Vec<QuadExtScalar>, GeomError> {
    places.iter().zip(t).map(|((x, y), t)| cross_ratio_factor(t, x, y)).collect()
}

/// Digits by which `Φ(t) = (t−z)/…` varies across a ball, as seen from the
/// point `z`; `≤ 0` when `z` lies in the ball.
fn ball_gap(ball: &BoundaryBall, z: &ProjPoint) -> i64 {
    let Some(w) = z.affine() else {
        return if ball.is_complement() { 0 } else { i64::MAX };
    };
    let p = ball.prime();
    let c = QuadExtScalar::from_rational(ball.center(), p, w.precision().max(1) + 2);
    let n = ball.radius_exponent();
    let v = match w.sub(&c) {
        Ok(d) => match d.valuation_e() {
            Some(ve) => ve.div_euclid(d.ramification()),
            None => return 0,
        },
        Err(_) => return 0,
    };
    if ball.is_complement() {
        v - n + 1
    } else {
        n - v
    }
}

/// A leaf of the adaptive partition of one factor's limit set.
#[derive(Debug, Clone)]
struct Cell {
    word: FreeWord,
    sample: ProjPoint,
}

struct Partition {
    cells: Vec<Cell>,
    longest: usize,
}

/// Refines word balls until every cell is `target` digits fine for all
/// `points`, or `max_depth` is reached.
fn partition(factor: &SchottkyFactor, points: &[&ProjPoint], target: i64, max_depth: usize) -> Result<Partition, IntegrationError> {
    let rank1 = factor.rank() == 1;
    let mut cells = Vec::new();
    let mut longest = 0;
    // (word, prefix matrix = evaluate(parent(word)))
    let mut stack: Vec<(FreeWord, Pgl2)> = all_letters(factor.rank()).into_iter().rev().map(|s| (FreeWord::single(s), Pgl2::identity())).collect();
    while let Some((w, prefix)) = stack.pop() {
        let last = w.last().unwrap();
        let ball = factor.letter_ball(last).image(&prefix);
        let gap = points.iter().map(|z| ball_gap(&ball, z)).min().unwrap_or(i64::MAX);
        // a rank-one cell meets the limit set in its sample point only
        let resolved = if rank1 { gap > 0 } else { gap >= target };
        if resolved || w.len() >= max_depth {
            if gap <= 0 {
                let z = points.iter().find(|z| ball_gap(&ball, z) <= 0).unwrap();
                return Err(IntegrationError::PointInLimitCover(z.to_string()));
            }
            let sample = prefix.apply(factor.letter_attracting(last))?;
            longest = longest.max(w.len());
            cells.push(Cell { word: w, sample });
            continue;
        }
        let next = prefix.compose(factor.letter_matrix(last));
        for s in all_letters(factor.rank()).into_iter().rev() {
            if s != -last {
                stack.push((w.push(s), next.clone()));
            }
        }
    }
    Ok(Partition { cells, longest })
}

/// Per place and term: the Riemann factor list `(Φ(t_w), μ(w))` for each
/// basis coordinate of that place, nonzero exponents only.
type FactorLists = Vec<Vec<Vec<TensorFactor>>>;

fn place_factors(q: &QuotientGraph, part: &Partition, cycle: &PlecticCycle, place: usize) -> Result<FactorLists, IntegrationError> {
    let r = q.basis().len();
    let mut out = vec![vec![Vec::new(); r]; cycle.terms.len()];
    for cell in &part.cells {
        let mu = q.evaluate_word_ball(&cell.word);
        if mu.iter().all(|&m| m == 0) {
            continue;
        }
        for (ti, term) in cycle.terms.iter().enumerate() {
            let (x, y) = &term.places[place];
            let phi = cross_ratio_factor(&cell.sample, x, y)?;
            for (i, &m) in mu.iter().enumerate() {
                if m != 0 {
                    out[ti][i].push(TensorFactor { value: phi.clone(), exponent: m });
                }
            }
        }
    }
    Ok(out)
}

fn product(list: &[TensorFactor], p: u32, precision: u32) -> Result<QuadExtScalar, ArithError> {
    let mut acc = QuadExtScalar::one(p, precision);
    for f in list {
        acc = acc.mul(&f.evaluate()?)?;
    }
    Ok(acc)
}

/// Riemann products of `cycle` against every basis measure of `lattice`.
pub fn integrate_riemann(lattice: &HLattice, cycle: &PlecticCycle, opts: &RiemannOptions) -> Result<IntegralResult, IntegrationError> {
    let places = lattice.places.len();
    if let Some(k) = cycle.places() {
        if k != places {
            return Err(IntegrationError::PlaceCount { expected: places, got: k });
        }
    }
    if lattice.rank == 0 {
        return Ok(IntegralResult { values: Vec::new(), depth: 0, stable_digits: vec![u32::MAX; places] });
    }
    let target = i64::from(opts.output_digits + opts.guard_digits);
    let mut lists: Vec<FactorLists> = Vec::new();
    let mut stable = Vec::new();
    let mut depth = 0;
    for place in 0..places {
        let q = lattice.places[place].as_ref().expect("nontrivial place");
        let factor = q.domain().factor();
        let (p, prec) = (factor.prime(), factor.precision());
        let points: Vec<&ProjPoint> = cycle.terms.iter().flat_map(|t| [&t.places[place].0, &t.places[place].1]).collect();
        let part = partition(factor, &points, target, opts.max_depth)?;
        depth = depth.max(part.longest);
        let here = place_factors(q, &part, cycle, place)?;
        let cap = (target as u32).min(prec);
        let digits = if part.longest < opts.max_depth || opts.max_depth < 2 {
            cap
        } else {
            let coarse = partition(factor, &points, target, opts.max_depth - 1)?;
            let there = place_factors(q, &coarse, cycle, place)?;
            let mut d = cap;
            for (a, b) in here.iter().flatten().zip(there.iter().flatten()) {
                d = d.min(product(a, p, prec)?.agreement_digits(&product(b, p, prec)?));
            }
            d
        };
        if digits < opts.output_digits {
            return Err(IntegrationError::NonStabilized { stable: digits, required: opts.output_digits });
        }
        stable.push(digits);
        lists.push(here);
    }
    let mut values = Vec::with_capacity(lattice.rank);
    for k in 0..lattice.rank {
        let idx = lattice.multi_index(k);
        let mut terms: Vec<Vec<TensorFactor>> = Vec::new();
        for (ti, term) in cycle.terms.iter().enumerate() {
            // every tuple of cells, one per place
            let mut tuples: Vec<Vec<TensorFactor>> = vec![Vec::new()];
            for place in 0..places {
                let l = &lists[place][ti][idx[place]];
                tuples = tuples.iter().flat_map(|t| l.iter().map(move |f| [t.clone(), vec![f.clone()]].concat())).collect();
            }
            for mut t in tuples {
                t[0].exponent *= term.coeff;
                terms.push(t);
            }
        }
        values.push(MultiplicativeTensor::from_terms(places, terms).normalize()?);
    }
    Ok(IntegralResult { values, depth, stable_digits: stable })
}

/// Integral against the invariant measure lattice of a whole group.
pub fn integrate_group(group: &PlecticGroup, cycle: &PlecticCycle, opts: &RiemannOptions) -> Result<IntegralResult, IntegrationError> {
    let lattice = invariant_measure_lattice(group, 2)?;
    integrate_riemann(&lattice, cycle, opts)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeriesResult {
    pub value: QuadExtScalar,
    /// Smallest `v(factor − 1)` over the last word layer; the working
    /// precision when the product is finite.
    pub error_digits: u32,
    pub word_len: usize,
}

impl SeriesResult {
    pub fn require(self, digits: u32) -> Result<Self, IntegrationError> {
        if self.error_digits < digits {
            Err(IntegrationError::NonStabilized { stable: self.error_digits, required: digits })
        } else {
            Ok(self)
        }
    }
}

/// `∏_u [(u aᵢ − x)(u bᵢ − y)] / [(u aᵢ − y)(u bᵢ − x)]` over reduced words `u`
/// of length ≤ `word_len` not ending in `γᵢ^{±1}`.
pub fn integrate_series(factor: &SchottkyFactor, i: usize, x: &ProjPoint, y: &ProjPoint, word_len: usize) -> Result<SeriesResult, IntegrationError> {
    let (p, prec) = (factor.prime(), factor.precision());
    let g = letter(i, false);
    let a = factor.letter_attracting(g);
    let b = factor.letter_attracting(-g);
    let mut value = QuadExtScalar::one(p, prec);
    let mut error;
    let mut layer: Vec<(FreeWord, Pgl2)> = vec![(FreeWord::identity(), Pgl2::identity())];
    let mut len = 0;
    let one = QuadExtScalar::one(p, prec);
    loop {
        let mut layer_error = prec;
        for (u, m) in &layer {
            if matches!(u.last(), Some(l) if l == g || l == -g) {
                continue;
            }
            let ua = m.apply(a)?;
            let ub = m.apply(b)?;
            let f = cross_ratio_factor(&ua, x, y)?.div(&cross_ratio_factor(&ub, x, y)?)?;
            layer_error = layer_error.min(f.agreement_digits(&one));
            value = value.mul(&f)?;
        }
        error = layer_error;
        if len >= word_len {
            break;
        }
        let mut next = Vec::new();
        for (u, m) in &layer {
            for s in all_letters(factor.rank()) {
                if u.last() != Some(-s) {
                    next.push((u.push(s), m.compose(factor.letter_matrix(s))));
                }
            }
        }
        if next.iter().all(|(u, _)| matches!(u.last(), Some(l) if l == g || l == -g)) {
            // only powers of γᵢ remain: the product is finite
            error = prec;
            break;
        }
        layer = next;
        len += 1;
    }
    Ok(SeriesResult { value, error_digits: error, word_len: len })
}

/// Series with the word length raised until `digits` are certified.
pub fn integrate_series_to(factor: &SchottkyFactor, i: usize, x: &ProjPoint, y: &ProjPoint, digits: u32, max_len: usize) -> Result<SeriesResult, IntegrationError> {
    let mut l = 1;
    loop {
        let r = integrate_series(factor, i, x, y, l)?;
        if r.error_digits >= digits || l >= max_len {
            return r.require(digits);
        }
        l += 1;
    }
}

/// The `k`-th rational point outside every generator ball.
pub fn base_point(factor: &SchottkyFactor, k: usize) -> ProjPoint {
    let (p, prec) = (factor.prime(), factor.precision());
    let mut found = 0;
    let mut n: i64 = 0;
    loop {
        for cand in [BigRational::from_integer(n.into()), BigRational::new(1.into(), (n + 2).into())] {
            let z = ProjPoint::from_rational(&cand, p, prec);
            if factor.balls().iter().all(|b| matches!(b.contains(&z), Ok(false))) {
                if found == k {
                    return z;
                }
                found += 1;
            }
        }
        n += 1;
    }
}

/// `∫_{[γⱼ x] − [x]} μᵢ` by Riemann products.
pub fn period(factor: &SchottkyFactor, j: usize, i: usize, x: &ProjPoint, opts: &RiemannOptions) -> Result<QuadExtScalar, IntegrationError> {
    let lattice = HLattice::for_subgroup(&crate::schreier::FiniteIndexSubgroup::whole(factor.clone()));
    let gx = factor.generators()[j].apply(x)?;
    let r = integrate_riemann(&lattice, &PlecticCycle::single(gx, x.clone()), opts)?;
    Ok(r.scalars()?[i].clone())
}

/// The same period by the cross-ratio series.
pub fn period_series(factor: &SchottkyFactor, j: usize, i: usize, x: &ProjPoint, digits: u32) -> Result<QuadExtScalar, IntegrationError> {
    let gx = factor.generators()[j].apply(x)?;
    Ok(integrate_series_to(factor, i, &gx, x, digits, 24)?.value)
}

/// `(qᵢⱼ)` for all basis coordinates `i` and generators `j`.
pub fn period_matrix(factor: &SchottkyFactor, opts: &RiemannOptions) -> Result<Vec<Vec<QuadExtScalar>>, IntegrationError> {
    let x = base_point(factor, 0);
    let lattice = HLattice::for_subgroup(&crate::schreier::FiniteIndexSubgroup::whole(factor.clone()));
    let g = factor.rank();
    let mut cols = Vec::new();
    for j in 0..g {
        let gx = factor.generators()[j].apply(&x)?;
        cols.push(integrate_riemann(&lattice, &PlecticCycle::single(gx, x.clone()), opts)?.scalars()?);
    }
    Ok((0..g).map(|i| (0..g).map(|j| cols[j][i].clone()).collect()).collect())
}

/// Periods of a finite-index subgroup against its own measure basis, one
/// column per Schreier generator.
pub fn subgroup_period_matrix(sub: &crate::schreier::FiniteIndexSubgroup, opts: &RiemannOptions) -> Result<Vec<Vec<QuadExtScalar>>, IntegrationError> {
    let factor = sub.parent();
    let x = base_point(factor, 0);
    let lattice = HLattice::for_subgroup(sub);
    let g = sub.rank();
    let mut cols = Vec::new();
    for w in sub.generators() {
        let hx = factor.evaluate(w).apply(&x)?;
        cols.push(integrate_riemann(&lattice, &PlecticCycle::single(hx, x.clone()), opts)?.scalars()?);
    }
    Ok((0..g).map(|i| (0..g).map(|j| cols[j][i].clone()).collect()).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FubiniEntry {
    pub index: Vec<usize>,
    pub digits: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FubiniReport {
    pub entries: Vec<FubiniEntry>,
    pub required: u32,
}

impl FubiniReport {
    pub fn passed(&self) -> bool {
        self.entries.iter().all(|e| e.digits >= self.required)
    }

    pub fn require(self) -> Result<Self, IntegrationError> {
        match self.entries.iter().enumerate().find(|(_, e)| e.digits < self.required) {
            Some((index, e)) => Err(IntegrationError::FubiniMismatch { index, digits: e.digits }),
            None => Ok(self),
        }
    }
}

/// Multi-place Riemann integral of an elementary term against the tensor
/// of one-place series integrals, coordinate by coordinate.
pub fn fubini_check(group: &PlecticGroup, term: &[(ProjPoint, ProjPoint)], opts: &RiemannOptions) -> Result<FubiniReport, IntegrationError> {
    let lattice = invariant_measure_lattice(group, 2)?;
    let joint = integrate_riemann(&lattice, &PlecticCycle::elementary(term.to_vec()), opts)?;
    let digits = opts.output_digits + opts.guard_digits;
    let mut per_place: Vec<Vec<QuadExtScalar>> = Vec::new();
    for (place, (x, y)) in term.iter().enumerate() {
        let f = group.schottky(place)?;
        per_place.push((0..f.rank()).map(|i| Ok(integrate_series_to(f, i, x, y, digits, 24)?.value)).collect::<Result<_, IntegrationError>>()?);
    }
    let mut entries = Vec::new();
    for k in 0..lattice.rank {
        let idx = lattice.multi_index(k);
        let split = MultiplicativeTensor::elementary(idx.iter().enumerate().map(|(p, &i)| per_place[p][i].clone()).collect());
        entries.push(FubiniEntry { index: idx, digits: joint.values[k].agreement_digits(&split)? });
    }
    Ok(FubiniReport { entries, required: opts.output_digits })
}

/// Letters whose ball contains the point, if any.
pub fn covering_letter(factor: &SchottkyFactor, z: &ProjPoint) -> Option<Letter> {
    all_letters(factor.rank()).into_iter().find(|&s| matches!(factor.letter_ball(s).contains(z), Ok(true)))
}
