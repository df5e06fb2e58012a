//! Schottky factors, cyclic factors and plectic product groups.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{CertificateViolation, GroupError};
use crate::proj::{classify_element, fixed_points, orientation_character, ElementKind, FixedPoints, Pgl2, ProjPoint};
use crate::tree::{geodesic_between_ends, BoundaryBall, DirectedEdge, TreeVertex};
use crate::words::{all_letters, generator_of, is_inverse, letter, letter_index, FreeWord, Letter};

/// A free group of hyperbolic elements in good position, with a verified
/// ping-pong certificate.
///
/// `balls[letter_index(s)]` contains the attracting point of `s` and equals
/// `s(P¹ ∖ balls[letter_index(s⁻¹)])`.
#[derive(Debug, Clone, PartialEq)]
pub struct SchottkyFactor {
    p: u32,
    precision: u32,
    generators: Vec<Pgl2>,
    inverses: Vec<Pgl2>,
    supplied: Vec<BoundaryBall>,
    balls: Vec<BoundaryBall>,
    fixed: Vec<FixedPoints>,
}

impl SchottkyFactor {
    /// Checks the certificate `balls = [B₀⁺, B₀⁻, B₁⁺, B₁⁻, …]`: disjointness and
    /// `γⱼ(P¹ ∖ Bⱼ⁻) ⊆ Bⱼ⁺`.
    pub fn certify(
        p: u32,
        precision: u32,
        generators: Vec<Pgl2>,
        balls: Vec<BoundaryBall>,
    ) -> Result<Self, CertificateViolation> {
        let g = generators.len();
        if balls.len() != 2 * g || g == 0 {
            return Err(CertificateViolation::BallCount { expected: 2 * g.max(1), got: balls.len() });
        }
        for (j, h) in generators.iter().enumerate() {
            if classify_element(h, p) != ElementKind::Hyperbolic {
                return Err(CertificateViolation::NotHyperbolic(j));
            }
        }
        for i in 0..balls.len() {
            for k in (i + 1)..balls.len() {
                if !balls[i].is_disjoint_from(&balls[k]) {
                    return Err(CertificateViolation::Overlap(i, k));
                }
            }
        }
        let mut tight = balls.clone();
        for (j, h) in generators.iter().enumerate() {
            let image = balls[2 * j + 1].complement().image(h);
            if !image.is_subset_of(&balls[2 * j]) {
                return Err(CertificateViolation::Inclusion { generator: j, image });
            }
            tight[2 * j] = image;
        }
        let fixed = generators
            .iter()
            .map(|h| fixed_points(h, p, precision))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| CertificateViolation::Geometry(e.to_string()))?;
        Ok(SchottkyFactor {
            p,
            precision,
            inverses: generators.iter().map(Pgl2::inverse).collect(),
            generators,
            supplied: balls,
            balls: tight,
            fixed,
        })
    }

    /// Rank-1 factor with balls cut from its axis next to the standard vertex.
    pub fn cyclic(p: u32, precision: u32, generator: Pgl2) -> Result<Self, CertificateViolation> {
        if classify_element(&generator, p) != ElementKind::Hyperbolic {
            return Err(CertificateViolation::NotHyperbolic(0));
        }
        let fp = fixed_points(&generator, p, precision).map_err(|e| CertificateViolation::Geometry(e.to_string()))?;
        let axis = geodesic_between_ends(&fp.attracting, &fp.repelling, 1)
            .map_err(|e| CertificateViolation::Geometry(e.to_string()))?;
        let minus = DirectedEdge::new(axis[1].clone(), axis[2].clone()).ball();
        let plus = minus.complement().image(&generator);
        Self::certify(p, precision, vec![generator], vec![plus, minus])
    }

    pub fn prime(&self) -> u32 {
        self.p
    }

    pub fn precision(&self) -> u32 {
        self.precision
    }

    pub fn rank(&self) -> usize {
        self.generators.len()
    }

    pub fn generators(&self) -> &[Pgl2] {
        &self.generators
    }

    pub fn supplied_balls(&self) -> &[BoundaryBall] {
        &self.supplied
    }

    /// Tightened certificate balls, indexed by letter index.
    pub fn balls(&self) -> &[BoundaryBall] {
        &self.balls
    }

    pub fn fixed_points(&self, j: usize) -> &FixedPoints {
        &self.fixed[j]
    }

    pub fn letter_matrix(&self, l: Letter) -> &Pgl2 {
        let j = generator_of(l);
        if is_inverse(l) {
            &self.inverses[j]
        } else {
            &self.generators[j]
        }
    }

    pub fn letter_ball(&self, l: Letter) -> &BoundaryBall {
        &self.balls[letter_index(l)]
    }

    /// The edge whose ends are the ball of `l`.
    pub fn letter_edge(&self, l: Letter) -> DirectedEdge {
        self.letter_ball(l).edge()
    }

    /// Attracting fixed point of the letter (repelling point of its inverse).
    pub fn letter_attracting(&self, l: Letter) -> &ProjPoint {
        let fp = &self.fixed[generator_of(l)];
        if is_inverse(l) {
            &fp.repelling
        } else {
            &fp.attracting
        }
    }

    pub fn evaluate(&self, w: &FreeWord) -> Pgl2 {
        w.letters().iter().fold(Pgl2::identity(), |acc, &l| acc.compose(self.letter_matrix(l)))
    }

    /// `s₁⋯s_{n−1} · B(s_n)`.
    pub fn word_ball(&self, w: &FreeWord) -> BoundaryBall {
        let last = w.last().expect("nonempty word");
        self.letter_ball(last).image(&self.evaluate(&w.parent()))
    }

    /// Every reduced word of length ≤ `max_len` with its matrix.
    pub fn enumerate_words(&self, max_len: usize) -> Vec<(FreeWord, Pgl2)> {
        let mut out = vec![(FreeWord::identity(), Pgl2::identity())];
        let mut layer = vec![(FreeWord::identity(), Pgl2::identity())];
        for _ in 0..max_len {
            let mut next = Vec::new();
            for (w, m) in &layer {
                for l in all_letters(self.rank()) {
                    if w.last() != Some(-l) {
                        next.push((w.push(l), m.compose(self.letter_matrix(l))));
                    }
                }
            }
            out.extend(next.iter().cloned());
            layer = next;
        }
        out
    }

    /// A vertex of the fundamental domain used as base for ball descent.
    pub fn base_vertex(&self) -> TreeVertex {
        self.letter_edge(letter(0, false)).source
    }

    /// Letter `s` with `v` beyond the edge of `B(s)`, if any.
    pub fn region_of(&self, v: &TreeVertex) -> Option<Letter> {
        all_letters(self.rank()).into_iter().find(|&s| self.letter_edge(s).has_beyond(v))
    }

    /// The reduced word equal to `g`, found by nested-ball descent of
    /// `g · o`; `None` when `g` is not in the group within the bound.
    pub fn membership_word(&self, g: &Pgl2, max_len: usize) -> Option<FreeWord> {
        let o = self.base_vertex();
        let mut v = o.act(g);
        let mut letters = Vec::new();
        while let Some(s) = self.region_of(&v) {
            if letters.len() >= max_len {
                return None;
            }
            letters.push(s);
            v = v.act(self.letter_matrix(-s));
        }
        let w = FreeWord::new(letters);
        (self.evaluate(&w) == *g).then_some(w)
    }

    /// Fixed points of every nontrivial reduced word of length ≤ `depth`,
    /// with the exact cover by word balls of length `depth`.
    pub fn limit_set_approx(&self, depth: usize) -> LimitSetApprox {
        let depth = depth.max(1);
        let words = self.enumerate_words(depth);
        let mut points: Vec<ProjPoint> = Vec::new();
        let mut cover = Vec::new();
        for (w, m) in &words {
            if w.is_empty() {
                continue;
            }
            if w.len() == depth {
                cover.push(self.letter_ball(w.last().unwrap()).image(&m.compose(self.letter_matrix(-w.last().unwrap()))));
            }
            if self.rank() == 1 && w.len() > 1 {
                continue;
            }
            if let Ok(fp) = fixed_points(m, self.p, self.precision) {
                for z in [fp.attracting, fp.repelling] {
                    if !points.iter().any(|q| q.agreement_digits(&z) >= self.precision.saturating_sub(8)) {
                        points.push(z);
                    }
                }
            }
        }
        LimitSetApprox { points, cover }
    }

    pub fn conjugate(&self, h: &Pgl2) -> Result<Self, CertificateViolation> {
        let gens = self.generators.iter().map(|g| g.conjugate_by(h)).collect();
        let balls = self.supplied.iter().map(|b| b.image(h)).collect();
        Self::certify(self.p, self.precision, gens, balls)
    }
}

/// Finite point sample of a limit set plus an exact ball cover of it.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitSetApprox {
    pub points: Vec<ProjPoint>,
    pub cover: Vec<BoundaryBall>,
}

impl LimitSetApprox {
    pub fn cover_contains(&self, z: &ProjPoint) -> bool {
        self.cover.iter().any(|b| b.contains(z).unwrap_or(true))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LimitSetKind {
    Empty,
    TwoPoints,
    Perfect,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Factor {
    Trivial,
    Cyclic(SchottkyFactor),
    Schottky(SchottkyFactor),
}

impl Factor {
    pub fn schottky(&self) -> Option<&SchottkyFactor> {
        match self {
            Factor::Trivial => None,
            Factor::Cyclic(f) | Factor::Schottky(f) => Some(f),
        }
    }

    pub fn rank(&self) -> usize {
        self.schottky().map_or(0, SchottkyFactor::rank)
    }

    pub fn limit_set_kind(&self) -> LimitSetKind {
        match self.rank() {
            0 => LimitSetKind::Empty,
            1 => LimitSetKind::TwoPoints,
            _ => LimitSetKind::Perfect,
        }
    }

    fn conjugate(&self, h: &Pgl2) -> Result<Factor, CertificateViolation> {
        Ok(match self {
            Factor::Trivial => Factor::Trivial,
            Factor::Cyclic(f) => Factor::Cyclic(f.conjugate(h)?),
            Factor::Schottky(f) => Factor::Schottky(f.conjugate(h)?),
        })
    }
}

/// A product of Schottky, cyclic and trivial factors, one per place.
#[derive(Debug, Clone, PartialEq)]
pub struct PlecticGroup {
    prime: u32,
    precision: u32,
    factors: Vec<Factor>,
}

impl PlecticGroup {
    pub fn new(prime: u32, precision: u32, factors: Vec<Factor>) -> Self {
        PlecticGroup { prime, precision, factors }
    }

    /// Builds a product from generator tuples, each nontrivial at exactly one
    /// place. Tuples moving several places at once (diagonal embeddings)
    /// are refused.
    pub fn from_generator_tuples(prime: u32, precision: u32, places: usize, tuples: &[Vec<Pgl2>]) -> Result<Self, GroupError> {
        let mut per_place: Vec<Vec<Pgl2>> = vec![Vec::new(); places];
        for (k, t) in tuples.iter().enumerate() {
            if t.len() != places {
                return Err(GroupError::BadPlace(t.len()));
            }
            let moving: Vec<usize> = (0..places).filter(|&i| !t[i].is_identity()).collect();
            if moving.len() != 1 {
                return Err(GroupError::UnsupportedGroupShape(format!(
                    "generator {k} acts at {} places; only products of one-place factors are constructible",
                    moving.len()
                )));
            }
            per_place[moving[0]].push(t[moving[0]].clone());
        }
        let factors = per_place
            .into_iter()
            .map(|gens| match gens.len() {
                0 => Ok(Factor::Trivial),
                1 => Ok(Factor::Cyclic(SchottkyFactor::cyclic(prime, precision, gens[0].clone())?)),
                _ => Err(GroupError::UnsupportedGroupShape("higher-rank factors need a ball certificate".into())),
            })
            .collect::<Result<Vec<_>, GroupError>>()?;
        Ok(PlecticGroup { prime, precision, factors })
    }

    pub fn prime(&self) -> u32 {
        self.prime
    }

    pub fn precision(&self) -> u32 {
        self.precision
    }

    pub fn places(&self) -> usize {
        self.factors.len()
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn factor(&self, i: usize) -> Result<&Factor, GroupError> {
        self.factors.get(i).ok_or(GroupError::BadPlace(i))
    }

    pub fn schottky(&self, i: usize) -> Result<&SchottkyFactor, GroupError> {
        self.factor(i)?
            .schottky()
            .ok_or_else(|| GroupError::UnsupportedGroupShape(format!("place {i} carries the trivial factor")))
    }

    /// Places with a nontrivial factor.
    pub fn support(&self) -> Vec<usize> {
        (0..self.places()).filter(|&i| self.factors[i].rank() > 0).collect()
    }

    pub fn ranks(&self) -> Vec<usize> {
        self.factors.iter().map(Factor::rank).collect()
    }

    pub fn limit_set_approx(&self, place: usize, depth: usize) -> Result<LimitSetApprox, GroupError> {
        Ok(self.schottky(place)?.limit_set_approx(depth))
    }

    pub fn classify_limit_set(&self, place: usize) -> Result<LimitSetKind, GroupError> {
        Ok(self.factor(place)?.limit_set_kind())
    }

    /// `hΓh⁻¹`, factor by factor.
    pub fn conjugate(&self, h: &[Pgl2]) -> Result<Self, GroupError> {
        if h.len() != self.places() {
            return Err(GroupError::BadPlace(h.len()));
        }
        let factors = self.factors.iter().zip(h).map(|(f, h)| f.conjugate(h)).collect::<Result<Vec<_>, _>>()?;
        Ok(PlecticGroup { factors, ..self.clone() })
    }

    /// `Γ ∩ (PGL₂(F_{S₁}) × U)` for `U` a product of vertex stabilizers on the
    /// complementary places. Free factors act freely on their trees, so the
    /// complementary components meet `U` trivially and the result is the
    /// subproduct on `S₁`.
    pub fn partial_intersection(&self, s1: &[usize], u: &HashMap<usize, TreeVertex>) -> Result<Self, GroupError> {
        for &i in s1 {
            self.factor(i)?;
        }
        for i in 0..self.places() {
            if s1.contains(&i) {
                continue;
            }
            let v = u.get(&i).ok_or_else(|| GroupError::UnsupportedGroupShape(format!("no stabilizer given for place {i}")))?;
            if let Some(f) = self.factors[i].schottky() {
                if f.generators().iter().any(|g| v.is_stabilized_by(g)) {
                    return Err(GroupError::UnsupportedGroupShape(format!("factor at place {i} has torsion at {v:?}")));
                }
            }
        }
        let factors = s1.iter().map(|&i| self.factors[i].clone()).collect();
        Ok(PlecticGroup { factors, ..self.clone() })
    }

    /// χ^or of a tuple, one element per place.
    pub fn orientation_character(&self, g: &[Pgl2]) -> i8 {
        orientation_character(g, self.prime)
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::proj::rat;
    use num_rational::BigRational;

    pub(crate) fn rank2_q5() -> SchottkyFactor {
        let q = rat(3125);
        let g1 = Pgl2::with_fixed_points(&rat(1), &rat(2), &q).unwrap();
        let g2 = Pgl2::with_fixed_points(&rat(3), &rat(4), &q).unwrap();
        let b = |c: i64| BoundaryBall::closed(5, &rat(c), 3);
        SchottkyFactor::certify(5, 40, vec![g1, g2], vec![b(1), b(2), b(3), b(4)]).unwrap()
    }

    #[test]
    fn certificate_is_tight() {
        let f = rank2_q5();
        for s in all_letters(2) {
            let img = f.letter_ball(-s).complement().image(f.letter_matrix(s));
            assert_eq!(&img, f.letter_ball(s));
        }
    }

    #[test]
    fn duplicate_generators_fail() {
        let g = Pgl2::with_fixed_points(&rat(1), &rat(2), &rat(3125)).unwrap();
        let b = |c: i64| BoundaryBall::closed(5, &rat(c), 3);
        let r = SchottkyFactor::certify(5, 40, vec![g.clone(), g], vec![b(1), b(2), b(1), b(2)]);
        assert!(matches!(r, Err(CertificateViolation::Overlap(0, 2))));
    }

    #[test]
    fn bad_inclusion_reports_image() {
        let g = Pgl2::with_fixed_points(&rat(1), &rat(2), &rat(5)).unwrap();
        let b = |c: i64| BoundaryBall::closed(5, &rat(c), 3);
        let r = SchottkyFactor::certify(5, 40, vec![g], vec![b(1), b(2)]);
        assert!(matches!(r, Err(CertificateViolation::Inclusion { generator: 0, .. })));
    }

    #[test]
    fn cyclic_balls() {
        let f = SchottkyFactor::cyclic(5, 40, Pgl2::from_ints(5, 0, 0, 1).unwrap()).unwrap();
        let zero = BigRational::from_integer(0.into());
        assert_eq!(f.balls()[0], BoundaryBall::closed(5, &zero, 1));
        assert_eq!(f.balls()[1], BoundaryBall::closed(5, &zero, 0).complement());
        let ls = f.limit_set_approx(3);
        assert_eq!(ls.points.len(), 2);
    }

    #[test]
    fn word_counts_and_freeness() {
        let f = rank2_q5();
        let words = f.enumerate_words(3);
        assert_eq!(words.len(), 53);
        let mut mats: Vec<&Pgl2> = words.iter().map(|(_, m)| m).collect();
        mats.sort_by_key(|m| format!("{m:?}"));
        mats.dedup();
        assert_eq!(mats.len(), 53);
        assert!(words.iter().skip(1).all(|(_, m)| !m.is_identity()));
    }

    #[test]
    fn membership_descent() {
        let f = rank2_q5();
        let w = FreeWord::parse("aB").unwrap();
        assert_eq!(f.membership_word(&f.evaluate(&w), 5), Some(w));
        assert_eq!(f.membership_word(&Pgl2::identity(), 5), Some(FreeWord::identity()));
        assert_eq!(f.membership_word(&Pgl2::from_ints(2, 1, 1, 1).unwrap(), 10), None);
        for (w, m) in f.enumerate_words(3) {
            assert_eq!(f.membership_word(&m, 3), Some(w));
        }
    }

    #[test]
    fn diagonal_embedding_refused() {
        let g = Pgl2::from_ints(5, 0, 0, 1).unwrap();
        let r = PlecticGroup::from_generator_tuples(5, 30, 2, &[vec![g.clone(), g]]);
        assert!(matches!(r, Err(GroupError::UnsupportedGroupShape(_))));
    }
}
