//! The Bruhat–Tits tree of PGL₂(Q_p).
//!
//! A vertex is the closed ball `{x : v(x − c) ≥ n}` of Q_p, stored as `(n, c)`
//! with `c` the canonical representative of `c mod p^n` in `Z[1/p] ∩ [0, p^n)`.
//! As a lattice class it is `[[p^n, c], [0, 1]]`.

use std::collections::{HashSet, VecDeque};
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{ArithError, GeomError};
use crate::padic::{format_rational, parse_rational, prime_power, rational_mod_prime_power, rational_valuation};
use crate::proj::{Pgl2, ProjPoint};

fn pow_rat(p: u32, n: i64) -> BigRational {
    let m = BigInt::from(prime_power(p, n.unsigned_abs() as u32));
    if n >= 0 {
        BigRational::from_integer(m)
    } else {
        BigRational::new(BigInt::one(), m)
    }
}

/// `v(a − b)`, `None` when equal.
fn diff_val(a: &BigRational, b: &BigRational, p: u32) -> Option<i64> {
    rational_valuation(&(a - b), p)
}

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TreeVertex {
    p: u32,
    n: i64,
    c: BigRational,
}

impl TreeVertex {
    pub fn new(p: u32, n: i64, c: &BigRational) -> Self {
        TreeVertex { p, n, c: rational_mod_prime_power(c, p, n) }
    }

    pub fn standard(p: u32) -> Self {
        TreeVertex { p, n: 0, c: BigRational::zero() }
    }

    pub fn prime(&self) -> u32 {
        self.p
    }

    pub fn level(&self) -> i64 {
        self.n
    }

    pub fn center(&self) -> &BigRational {
        &self.c
    }

    pub fn parent(&self) -> TreeVertex {
        TreeVertex::new(self.p, self.n - 1, &self.c)
    }

    /// Child `d` is the ball `B(c + d p^n, n + 1)`.
    pub fn child(&self, d: u32) -> TreeVertex {
        let c = &self.c + BigRational::from_integer(d.into()) * pow_rat(self.p, self.n);
        TreeVertex { p: self.p, n: self.n + 1, c }
    }

    /// The `p + 1` neighbours: children by digit, then the parent.
    pub fn neighbors(&self) -> Vec<TreeVertex> {
        let mut out: Vec<TreeVertex> = (0..self.p).map(|d| self.child(d)).collect();
        out.push(self.parent());
        out
    }

    pub fn distance(&self, other: &TreeVertex) -> u64 {
        let m = match diff_val(&self.c, &other.c, self.p) {
            Some(v) => v.min(self.n).min(other.n),
            None => self.n.min(other.n),
        };
        ((self.n - m) + (other.n - m)) as u64
    }

    pub fn is_adjacent(&self, other: &TreeVertex) -> bool {
        self.distance(other) == 1
    }

    /// `g · v` computed on the lattice class `g · [[p^n, c], [0, 1]]`.
    pub fn act(&self, g: &Pgl2) -> TreeVertex {
        let [a, b, c, d] = g.entries();
        let pn = pow_rat(self.p, self.n);
        let m11 = a * &pn;
        let m12 = a * &self.c + b;
        let m21 = c * &pn;
        let m22 = c * &self.c + d;
        let det = &m11 * &m22 - &m12 * &m21;
        let vdet = rational_valuation(&det, self.p).expect("invertible");
        let v22 = rational_valuation(&m22, self.p);
        let v21 = rational_valuation(&m21, self.p);
        let use_second = match (v22, v21) {
            (Some(x), Some(y)) => x <= y,
            (Some(_), None) => true,
            _ => false,
        };
        if use_second {
            let n = vdet - 2 * v22.unwrap();
            TreeVertex::new(self.p, n, &(m12 / m22))
        } else {
            let n = vdet - 2 * v21.unwrap();
            TreeVertex::new(self.p, n, &(m11 / m21))
        }
    }

    /// True when the ball of `self` lies inside the ball of `anc`.
    pub fn is_within(&self, anc: &TreeVertex) -> bool {
        self.n >= anc.n && diff_val(&self.c, &anc.c, self.p).map_or(true, |v| v >= anc.n)
    }

    /// Ancestor at level `k ≤ n`.
    pub fn ancestor(&self, k: i64) -> TreeVertex {
        TreeVertex::new(self.p, k, &self.c)
    }

    pub fn is_stabilized_by(&self, g: &Pgl2) -> bool {
        self.act(g) == *self
    }

    /// The ball of ends seen from ∞ through this vertex.
    pub fn ball(&self) -> BoundaryBall {
        BoundaryBall { p: self.p, n: self.n, c: self.c.clone(), complement: false }
    }

    /// Label `n:c` used in DOT output.
    pub fn label(&self) -> String {
        format!("{}:{}", self.n, format_rational(&self.c))
    }

    pub fn from_label(p: u32, s: &str) -> Option<TreeVertex> {
        let (n, c) = s.split_once(':')?;
        Some(TreeVertex::new(p, n.parse().ok()?, &parse_rational(c)?))
    }
}

impl fmt::Debug for TreeVertex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({})", self.label())
    }
}

/// An ordered pair of adjacent vertices.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DirectedEdge {
    pub source: TreeVertex,
    pub target: TreeVertex,
}

impl DirectedEdge {
    pub fn new(source: TreeVertex, target: TreeVertex) -> Self {
        debug_assert!(source.is_adjacent(&target));
        DirectedEdge { source, target }
    }

    pub fn reverse(&self) -> Self {
        DirectedEdge { source: self.target.clone(), target: self.source.clone() }
    }

    /// True when the edge points away from ∞ (towards a child).
    pub fn is_downward(&self) -> bool {
        self.target.n == self.source.n + 1
    }

    pub fn ball(&self) -> BoundaryBall {
        if self.is_downward() {
            self.target.ball()
        } else {
            self.source.ball().complement()
        }
    }

    /// True when `v` lies on the target side of the edge.
    pub fn has_beyond(&self, v: &TreeVertex) -> bool {
        if self.is_downward() {
            v.is_within(&self.target)
        } else {
            !v.is_within(&self.source)
        }
    }

    pub fn act(&self, g: &Pgl2) -> Self {
        DirectedEdge { source: self.source.act(g), target: self.target.act(g) }
    }
}

impl fmt::Debug for DirectedEdge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}->{:?}", self.source, self.target)
    }
}

/// The set of ends through a directed edge: `B(c, n)` or its complement.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BoundaryBall {
    p: u32,
    n: i64,
    #[serde(with = "rational_str")]
    c: BigRational,
    complement: bool,
}

mod rational_str {
    use num_rational::BigRational;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(r: &BigRational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&crate::padic::format_rational(r))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigRational, D::Error> {
        let s = String::deserialize(d)?;
        crate::padic::parse_rational(&s).ok_or_else(|| serde::de::Error::custom("bad rational"))
    }
}

impl fmt::Debug for BoundaryBall {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = format_rational(&self.c);
        if self.complement {
            write!(f, "P1\\B({c}, {})", self.n)
        } else {
            write!(f, "B({c}, {})", self.n)
        }
    }
}

impl BoundaryBall {
    /// `{x : v(x − c) ≥ n}`.
    pub fn closed(p: u32, c: &BigRational, n: i64) -> Self {
        BoundaryBall { p, n, c: rational_mod_prime_power(c, p, n), complement: false }
    }

    pub fn prime(&self) -> u32 {
        self.p
    }

    pub fn radius_exponent(&self) -> i64 {
        self.n
    }

    pub fn center(&self) -> &BigRational {
        &self.c
    }

    pub fn is_complement(&self) -> bool {
        self.complement
    }

    pub fn complement(&self) -> Self {
        BoundaryBall { complement: !self.complement, ..self.clone() }
    }

    /// The directed edge whose ends are this ball.
    pub fn edge(&self) -> DirectedEdge {
        let v = TreeVertex { p: self.p, n: self.n, c: self.c.clone() };
        let e = DirectedEdge { source: v.parent(), target: v };
        if self.complement {
            e.reverse()
        } else {
            e
        }
    }

    /// Exact image under a Möbius map.
    pub fn image(&self, g: &Pgl2) -> Self {
        self.edge().act(g).ball()
    }

    fn plain_subset(a: &BoundaryBall, b: &BoundaryBall) -> bool {
        a.n >= b.n && diff_val(&a.c, &b.c, a.p).map_or(true, |v| v >= b.n)
    }

    fn plain_disjoint(a: &BoundaryBall, b: &BoundaryBall) -> bool {
        diff_val(&a.c, &b.c, a.p).is_some_and(|v| v < a.n.min(b.n))
    }

    pub fn is_subset_of(&self, other: &BoundaryBall) -> bool {
        match (self.complement, other.complement) {
            (false, false) => Self::plain_subset(self, other),
            (false, true) => Self::plain_disjoint(self, &other.complement()),
            (true, false) => false,
            (true, true) => Self::plain_subset(&other.complement(), &self.complement()),
        }
    }

    pub fn is_disjoint_from(&self, other: &BoundaryBall) -> bool {
        match (self.complement, other.complement) {
            (false, false) => Self::plain_disjoint(self, other),
            (false, true) => Self::plain_subset(self, &other.complement()),
            (true, false) => Self::plain_subset(other, &self.complement()),
            (true, true) => false,
        }
    }

    /// Membership of a point of P¹; fails when the point is not known to
    /// enough digits to decide.
    pub fn contains(&self, z: &ProjPoint) -> Result<bool, GeomError> {
        let inside_plain = match z.affine() {
            None => false,
            Some(w) => {
                let e = w.ramification();
                let c = crate::padic::QuadExtScalar::from_rational(&self.c, self.p, w.precision().max(1) + 2);
                match w.sub(&c) {
                    Ok(d) => d.valuation_e().map_or(true, |v| v >= self.n * e),
                    Err(ArithError::Cancellation { .. }) => {
                        let k = w.abs_precision_e();
                        if k >= self.n * e {
                            true
                        } else {
                            return Err(GeomError::PrecisionExhausted { needed: self.n, available: k / e });
                        }
                    }
                    Err(err) => return Err(err.into()),
                }
            }
        };
        Ok(inside_plain != self.complement)
    }

    /// A Q_p-rational point of the ball.
    pub fn sample_point(&self, precision: u32) -> ProjPoint {
        if self.complement {
            ProjPoint::infinity(self.p, precision)
        } else {
            ProjPoint::from_rational(&self.c, self.p, precision)
        }
    }

    /// The `p` balls of the edges leaving the edge's target away from its source.
    pub fn children(&self) -> Vec<BoundaryBall> {
        let e = self.edge();
        e.target
            .neighbors()
            .into_iter()
            .filter(|w| *w != e.source)
            .map(|w| DirectedEdge { source: e.target.clone(), target: w }.ball())
            .collect()
    }
}

/// The `p + 1` balls of the edges leaving `v`, in neighbour order.
pub fn balls_at_vertex(v: &TreeVertex) -> Vec<BoundaryBall> {
    v.neighbors().into_iter().map(|w| DirectedEdge { source: v.clone(), target: w }.ball()).collect()
}

/// The vertices of the geodesic from `u` to `v`, both included.
pub fn vertex_path(u: &TreeVertex, v: &TreeVertex) -> Vec<TreeVertex> {
    let m = match diff_val(&u.c, &v.c, u.p) {
        Some(x) => x.min(u.n).min(v.n),
        None => u.n.min(v.n),
    };
    let mut out: Vec<TreeVertex> = (m..=u.n).rev().map(|k| u.ancestor(k)).collect();
    out.extend(((m + 1)..=v.n).map(|k| v.ancestor(k)));
    out
}

/// Vertices within `radius` of `center`, in breadth-first neighbour order.
pub fn bfs_ball(center: &TreeVertex, radius: u32) -> Vec<TreeVertex> {
    let mut seen: HashSet<TreeVertex> = HashSet::new();
    let mut out = Vec::new();
    let mut queue = VecDeque::new();
    seen.insert(center.clone());
    queue.push_back((center.clone(), 0u32));
    while let Some((v, d)) = queue.pop_front() {
        out.push(v.clone());
        if d == radius {
            continue;
        }
        for w in v.neighbors() {
            if seen.insert(w.clone()) {
                queue.push_back((w, d + 1));
            }
        }
    }
    out
}

/// BFS distance, for cross-checking the closed form.
pub fn bfs_distance(u: &TreeVertex, v: &TreeVertex, max: u32) -> Option<u32> {
    let mut seen: HashSet<TreeVertex> = HashSet::new();
    let mut queue = VecDeque::new();
    seen.insert(u.clone());
    queue.push_back((u.clone(), 0u32));
    while let Some((w, d)) = queue.pop_front() {
        if w == *v {
            return Some(d);
        }
        if d == max {
            continue;
        }
        for x in w.neighbors() {
            if seen.insert(x.clone()) {
                queue.push_back((x, d + 1));
            }
        }
    }
    None
}

/// DOT rendering of the subgraph induced on `vertices`.
pub fn to_dot(name: &str, vertices: &[TreeVertex]) -> String {
    let set: HashSet<&TreeVertex> = vertices.iter().collect();
    let mut s = format!("graph \"{name}\" {{\n");
    for v in vertices {
        s.push_str(&format!("  \"{}\";\n", v.label()));
    }
    for v in vertices {
        for w in v.neighbors().iter().take(v.p as usize) {
            if set.contains(w) {
                s.push_str(&format!("  \"{}\" -- \"{}\";\n", v.label(), w.label()));
            }
        }
    }
    s.push_str("}\n");
    s
}

/// Vertex reached from a point of P¹(C) ∖ P¹(Q_p) with unramified coordinates.
pub fn reduction_map(z: &ProjPoint) -> Result<TreeVertex, GeomError> {
    let p = z.prime();
    let Some(w) = z.affine() else {
        return Err(GeomError::RationalPoint);
    };
    if w.is_base() {
        return Err(GeomError::RationalPoint);
    }
    if w.ramification() == 2 {
        return Err(GeomError::RamifiedMidpoint);
    }
    let n = w.im().valuation().expect("non-base");
    let c = w.re().truncate_below(n).map_err(GeomError::Arith)?;
    Ok(TreeVertex::new(p, n, &c))
}

/// Vertex `k` steps along the geodesic from end `x` to end `y`, indexed so
/// that index 0 is the branch vertex `B(x, v(x − y))` (or level 0 for a
/// geodesic through ∞).
fn geodesic_vertex(x: &ProjPoint, y: &ProjPoint, k: i64) -> Result<TreeVertex, GeomError> {
    let p = x.prime();
    let trunc = |z: &ProjPoint, n: i64| -> Result<TreeVertex, GeomError> {
        let w = z.affine().expect("finite");
        let c = w.re().truncate_below(n).map_err(GeomError::Arith)?;
        Ok(TreeVertex::new(p, n, &c))
    };
    match (x.affine(), y.affine()) {
        (None, None) => Err(GeomError::Pole),
        (Some(_), None) => trunc(x, -k),
        (None, Some(_)) => trunc(y, k),
        (Some(a), Some(b)) => {
            let m = a.sub(&b).map_err(|_| GeomError::Pole)?.valuation().unwrap();
            if k >= 0 {
                trunc(y, m + k)
            } else {
                trunc(x, m - k)
            }
        }
    }
}

/// The apartment between ends `x ≠ y`, ordered from `x` to `y`, truncated to
/// `radius` steps around its vertex nearest the standard vertex.
pub fn geodesic_between_ends(x: &ProjPoint, y: &ProjPoint, radius: u32) -> Result<Vec<TreeVertex>, GeomError> {
    let p = x.prime();
    let o = TreeVertex::standard(p);
    let vx = x.affine().and_then(|w| w.valuation()).unwrap_or(0).abs();
    let vy = y.affine().and_then(|w| w.valuation()).unwrap_or(0).abs();
    let bound = vx + vy + 2;
    let mut best = (u64::MAX, 0i64);
    for k in -bound..=bound {
        let d = geodesic_vertex(x, y, k)?.distance(&o);
        if d < best.0 {
            best = (d, k);
        }
    }
    let r = radius as i64;
    ((best.1 - r)..=(best.1 + r)).map(|k| geodesic_vertex(x, y, k)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::padic::{Extension, PadicScalar, QuadExtScalar};

    fn v(p: u32, n: i64, c: i64) -> TreeVertex {
        TreeVertex::new(p, n, &BigRational::from_integer(c.into()))
    }

    #[test]
    fn valence_and_symmetry() {
        let o = TreeVertex::standard(5);
        let nb = o.neighbors();
        assert_eq!(nb.len(), 6);
        for w in &nb {
            assert!(w.neighbors().contains(&o));
        }
    }

    #[test]
    fn bfs_growth_q2() {
        assert_eq!(bfs_ball(&TreeVertex::standard(2), 2).len(), 10);
    }

    #[test]
    fn distances() {
        assert_eq!(v(5, 0, 0).distance(&v(5, 0, 0)), 0);
        assert_eq!(v(5, 0, 0).distance(&v(5, 1, 0)), 1);
        assert_eq!(v(5, 2, 3).distance(&v(5, 2, 8)), 2);
        assert_eq!(v(5, 2, 3).distance(&v(5, -1, 0)), 3);
    }

    #[test]
    fn edge_ball_example() {
        let e = DirectedEdge::new(v(5, 0, 0), v(5, 1, 0));
        assert_eq!(e.ball(), BoundaryBall::closed(5, &BigRational::zero(), 1));
        assert_eq!(e.reverse().ball(), e.ball().complement());
        assert_eq!(e.ball().edge(), e);
        assert_eq!(e.reverse().ball().edge(), e.reverse());
    }

    #[test]
    fn paths_match_distance() {
        let a = v(5, 3, 7);
        let b = v(5, 2, 13);
        let path = vertex_path(&a, &b);
        assert_eq!(path.len() as u64, a.distance(&b) + 1);
        for w in path.windows(2) {
            assert!(w[0].is_adjacent(&w[1]));
        }
    }

    #[test]
    fn stabilizers() {
        let o = TreeVertex::standard(5);
        assert!(o.is_stabilized_by(&Pgl2::identity()));
        assert!(!o.is_stabilized_by(&Pgl2::from_ints(5, 0, 0, 1).unwrap()));
        assert!(o.is_stabilized_by(&Pgl2::from_ints(2, 1, 1, 1).unwrap()));
        assert!(o.is_stabilized_by(&Pgl2::from_ints(0, 1, 1, 0).unwrap()));
    }

    #[test]
    fn reduction_examples() {
        let ext = Extension::unramified(5).unwrap();
        let w = QuadExtScalar::omega(ext, 20);
        let pt = |z: QuadExtScalar| ProjPoint::finite(z).unwrap();
        assert_eq!(reduction_map(&pt(w.clone())).unwrap(), TreeVertex::standard(5));
        let one = QuadExtScalar::one(5, 20);
        assert_eq!(reduction_map(&pt(one.add(&w).unwrap())).unwrap(), TreeVertex::standard(5));
        let five = QuadExtScalar::from_int(5, 5, 20);
        assert_eq!(reduction_map(&pt(five.mul(&w).unwrap())).unwrap(), v(5, 1, 0));
        assert_eq!(reduction_map(&ProjPoint::from_int(3, 5, 20)), Err(GeomError::RationalPoint));
        let ram = Extension::new(5, 5).unwrap();
        let z = QuadExtScalar::new(ram, PadicScalar::zero(5, 20), PadicScalar::one(5, 20)).unwrap();
        assert_eq!(reduction_map(&pt(z)), Err(GeomError::RamifiedMidpoint));
    }

    #[test]
    fn standard_apartment() {
        let zero = ProjPoint::from_int(0, 5, 20);
        let inf = ProjPoint::infinity(5, 20);
        let g = geodesic_between_ends(&zero, &inf, 2).unwrap();
        let levels: Vec<i64> = g.iter().map(|w| w.level()).collect();
        assert_eq!(levels, vec![2, 1, 0, -1, -2]);
        assert!(g.iter().all(|w| w.center().is_zero()));
        let mut back = geodesic_between_ends(&inf, &zero, 2).unwrap();
        back.reverse();
        assert_eq!(back, g);
    }

    #[test]
    fn ball_relations() {
        let b = |c: i64, n: i64| BoundaryBall::closed(5, &BigRational::from_integer(c.into()), n);
        assert!(b(3, 2).is_subset_of(&b(3, 1)));
        assert!(b(3, 2).is_disjoint_from(&b(4, 2)));
        assert!(b(3, 2).is_subset_of(&b(4, 2).complement()));
        assert!(!b(3, 1).complement().is_subset_of(&b(0, 0)));
        assert!(b(0, 0).complement().is_subset_of(&b(3, 1).complement()));
        assert!(!b(0, 0).complement().is_disjoint_from(&b(3, 1).complement()));
    }

    #[test]
    fn partition_at_standard_vertex() {
        let balls = balls_at_vertex(&TreeVertex::standard(5));
        for k in -30..30 {
            let z = ProjPoint::from_rational(&BigRational::new(k.into(), 7.into()), 5, 20);
            let hits = balls.iter().filter(|b| b.contains(&z).unwrap()).count();
            assert_eq!(hits, 1);
        }
        let inf = ProjPoint::infinity(5, 20);
        assert_eq!(balls.iter().filter(|b| b.contains(&inf).unwrap()).count(), 1);
    }
}
