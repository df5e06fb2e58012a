//! Limit trees, quotient graphs and the lattice of invariant plectic measures.
//!
//! For a certified factor the tails `o_s` of the letter edges `e_s` span a
//! finite subtree `C`; the quotient of the limit tree is `C` plus one loop
//! `o_{γⱼ} → o_{γⱼ⁻¹}` per generator. A finite-index subgroup with coset table
//! `H\Γ` sees the covering graph on `C × H\Γ`. Invariant measures are the
//! harmonic integer flows on that graph.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use serde::Serialize;

use crate::error::{GroupError, MeasureError};
use crate::group::{PlecticGroup, SchottkyFactor};
use crate::intlin::integer_kernel;
use crate::proj::Pgl2;
use crate::schreier::FiniteIndexSubgroup;
use crate::tree::{vertex_path, BoundaryBall, DirectedEdge, TreeVertex};
use crate::words::{all_letters, letter, FreeWord, Letter};

/// Descent steps allowed before a ball is declared too deep.
const MAX_DESCENT: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum EdgeClass {
    /// Edge of `C`; `forward` when it points from parent to child.
    Tree { index: usize, forward: bool },
    /// The loop of generator `j`; `forward` when it runs `o_{γⱼ} → o_{γⱼ⁻¹}`.
    Loop { generator: usize, forward: bool },
    /// Not an edge of the limit tree.
    Outside,
}

/// An edge written as `word · e₀` with `e₀` in the fundamental set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Classified {
    pub word: FreeWord,
    pub class: EdgeClass,
}

/// The finite subtree `C` and letter edges of a certified factor.
#[derive(Debug, Clone, PartialEq)]
pub struct FundamentalDomain {
    factor: SchottkyFactor,
    letter_edges: Vec<DirectedEdge>,
    hull: Vec<TreeVertex>,
    hull_index: HashMap<TreeVertex, usize>,
    tree_edges: Vec<(usize, usize)>,
    tree_edge_index: HashMap<(usize, usize), usize>,
}

impl FundamentalDomain {
    pub fn new(factor: &SchottkyFactor) -> Self {
        let letters = all_letters(factor.rank());
        let letter_edges: Vec<DirectedEdge> = letters.iter().map(|&s| factor.letter_edge(s)).collect();
        let tails: Vec<TreeVertex> = letter_edges.iter().map(|e| e.source.clone()).collect();
        let mut set: BTreeSet<TreeVertex> = BTreeSet::new();
        for a in &tails {
            for b in &tails {
                set.extend(vertex_path(a, b));
            }
        }
        let hull: Vec<TreeVertex> = set.into_iter().collect();
        let hull_index: HashMap<TreeVertex, usize> = hull.iter().cloned().enumerate().map(|(i, v)| (v, i)).collect();
        let mut tree_edges = Vec::new();
        for (i, v) in hull.iter().enumerate() {
            if let Some(&j) = hull_index.get(&v.parent()) {
                tree_edges.push((j, i));
            }
        }
        tree_edges.sort();
        let tree_edge_index = tree_edges.iter().enumerate().map(|(k, &e)| (e, k)).collect();
        FundamentalDomain { factor: factor.clone(), letter_edges, hull, hull_index, tree_edges, tree_edge_index }
    }

    pub fn factor(&self) -> &SchottkyFactor {
        &self.factor
    }

    pub fn hull(&self) -> &[TreeVertex] {
        &self.hull
    }

    pub fn tree_edges(&self) -> &[(usize, usize)] {
        &self.tree_edges
    }

    pub fn rank(&self) -> usize {
        self.factor.rank()
    }

    /// Hull index of the tail `o_s`.
    pub fn tail(&self, s: Letter) -> usize {
        self.hull_index[&self.letter_edges[crate::words::letter_index(s)].source]
    }

    fn letter_edge(&self, s: Letter) -> &DirectedEdge {
        &self.letter_edges[crate::words::letter_index(s)]
    }

    /// Writes `e = w · e₀` by pulling the edge back through the letter regions.
    pub fn classify(&self, e: &DirectedEdge) -> Result<Classified, MeasureError> {
        let mut e = e.clone();
        let mut letters: Vec<Letter> = Vec::new();
        'descent: loop {
            for s in all_letters(self.rank()) {
                let es = self.letter_edge(s);
                if es.has_beyond(&e.source) && es.has_beyond(&e.target) {
                    if letters.len() >= MAX_DESCENT {
                        return Err(MeasureError::BallTooDeep(letters.len()));
                    }
                    letters.push(s);
                    e = e.act(self.factor.letter_matrix(-s));
                    continue 'descent;
                }
            }
            break;
        }
        let mut word = FreeWord::new(letters);
        for j in 0..self.rank() {
            let g = letter(j, false);
            let fwd = self.letter_edge(g);
            let inv = self.letter_edge(-g);
            // e_{γ⁻¹} = γ⁻¹ · reverse(e_γ)
            let class = if e == *fwd {
                Some(true)
            } else if e == fwd.reverse() {
                Some(false)
            } else if e == *inv {
                word = word.push(-g);
                Some(false)
            } else if e == inv.reverse() {
                word = word.push(-g);
                Some(true)
            } else {
                None
            };
            if let Some(forward) = class {
                return Ok(Classified { word, class: EdgeClass::Loop { generator: j, forward } });
            }
        }
        if let (Some(&a), Some(&b)) = (self.hull_index.get(&e.source), self.hull_index.get(&e.target)) {
            if let Some(&k) = self.tree_edge_index.get(&(a, b)) {
                return Ok(Classified { word, class: EdgeClass::Tree { index: k, forward: true } });
            }
            if let Some(&k) = self.tree_edge_index.get(&(b, a)) {
                return Ok(Classified { word, class: EdgeClass::Tree { index: k, forward: false } });
            }
        }
        Ok(Classified { word, class: EdgeClass::Outside })
    }

    /// `⋃_{|w| ≤ depth} w · C`, with the tree edges between its vertices.
    pub fn limit_tree(&self, depth: usize) -> LimitTree {
        let mut vertices: BTreeSet<TreeVertex> = BTreeSet::new();
        for (_, m) in self.factor.enumerate_words(depth) {
            for v in &self.hull {
                vertices.insert(v.act(&m));
            }
        }
        let mut edges = Vec::new();
        for v in &vertices {
            if vertices.contains(&v.parent()) {
                edges.push(DirectedEdge::new(v.parent(), v.clone()));
            }
        }
        LimitTree { vertices: vertices.into_iter().collect(), edges }
    }

    /// Quotient of `limit_tree(depth)` by the generator moves, checked
    /// against the exact fundamental graph.
    pub fn quotient_from_depth(&self, depth: usize) -> Result<QuotientGraph, MeasureError> {
        let lt = self.limit_tree(depth);
        let index: HashMap<&TreeVertex, usize> = lt.vertices.iter().enumerate().map(|(i, v)| (v, i)).collect();
        let mut uf: Vec<usize> = (0..lt.vertices.len()).collect();
        fn find(uf: &mut [usize], x: usize) -> usize {
            let mut r = x;
            while uf[r] != r {
                r = uf[r];
            }
            uf[x] = r;
            r
        }
        for (i, v) in lt.vertices.iter().enumerate() {
            for g in self.factor.generators() {
                if let Some(&k) = index.get(&v.act(g)) {
                    let (a, b) = (find(&mut uf, i), find(&mut uf, k));
                    uf[a.max(b)] = a.min(b);
                }
            }
        }
        let vertex_classes: BTreeSet<usize> = (0..lt.vertices.len()).map(|i| find(&mut uf, i)).collect();
        let eindex: HashMap<&DirectedEdge, usize> = lt.edges.iter().enumerate().map(|(i, e)| (e, i)).collect();
        let mut euf: Vec<usize> = (0..lt.edges.len()).collect();
        for (i, e) in lt.edges.iter().enumerate() {
            for g in self.factor.generators() {
                let img = e.act(g);
                let k = eindex.get(&img).or_else(|| eindex.get(&img.reverse()));
                if let Some(&k) = k {
                    let (a, b) = (find(&mut euf, i), find(&mut euf, k));
                    euf[a.max(b)] = a.min(b);
                }
            }
        }
        let edge_classes: BTreeSet<usize> = (0..lt.edges.len()).map(|i| find(&mut euf, i)).collect();
        let v = vertex_classes.len();
        let e = edge_classes.len();
        let expected_v = self.hull.len();
        let expected_e = self.tree_edges.len() + self.rank();
        if v != expected_v || e != expected_e || e + 1 != v + self.rank() {
            return Err(MeasureError::DepthInsufficient(depth));
        }
        Ok(QuotientGraph::new(self, &FiniteIndexSubgroup::whole(self.factor.clone())))
    }
}

/// A window of the tree of limit points.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitTree {
    pub vertices: Vec<TreeVertex>,
    /// Parent → child edges between window vertices.
    pub edges: Vec<DirectedEdge>,
}

impl LimitTree {
    pub fn contains(&self, v: &TreeVertex) -> bool {
        self.vertices.binary_search(v).is_ok()
    }

    pub fn balls(&self) -> Vec<BoundaryBall> {
        self.edges.iter().flat_map(|e| [e.ball(), e.reverse().ball()]).collect()
    }
}

/// The quotient graph of the limit tree by a finite-index subgroup, with a
/// spanning tree and the cotree basis of harmonic flows.
#[derive(Debug, Clone, PartialEq)]
pub struct QuotientGraph {
    base_vertices: usize,
    base_tree_edges: usize,
    rank: usize,
    index: usize,
    vertex_labels: Vec<String>,
    /// `(source, target)` per edge; edge `(k, c)` has index `c·E + k`.
    edges: Vec<(usize, usize)>,
    in_tree: Vec<bool>,
    basis: Vec<Vec<i64>>,
    domain: FundamentalDomain,
    subgroup: FiniteIndexSubgroup,
}

impl QuotientGraph {
    pub fn new(domain: &FundamentalDomain, subgroup: &FiniteIndexSubgroup) -> Self {
        let v0 = domain.hull.len();
        let t = domain.tree_edges.len();
        let g = domain.rank();
        let n = subgroup.index();
        let e0 = t + g;
        let mut edges = Vec::with_capacity(n * e0);
        let mut in_tree = Vec::with_capacity(n * e0);
        for c in 0..n {
            for &(a, b) in &domain.tree_edges {
                edges.push((c * v0 + a, c * v0 + b));
                in_tree.push(true);
            }
            for j in 0..g {
                let s = letter(j, false);
                let d = subgroup.table().action()[j][c];
                edges.push((c * v0 + domain.tail(s), d * v0 + domain.tail(-s)));
                in_tree.push(subgroup.is_tree_slot(j, c));
            }
        }
        let mut vertex_labels = Vec::new();
        for c in 0..n {
            for v in &domain.hull {
                vertex_labels.push(if n == 1 { v.label() } else { format!("{}#{c}", v.label()) });
            }
        }
        let mut q = QuotientGraph {
            base_vertices: v0,
            base_tree_edges: t,
            rank: g,
            index: n,
            vertex_labels,
            edges,
            in_tree,
            basis: Vec::new(),
            domain: domain.clone(),
            subgroup: subgroup.clone(),
        };
        q.basis = subgroup.slots().iter().map(|&(j, c)| q.fundamental_cycle(c * e0 + t + j)).collect();
        q
    }

    /// `+1` on a cotree edge and the spanning-tree path closing it up.
    fn fundamental_cycle(&self, edge: usize) -> Vec<i64> {
        let nv = self.vertex_count();
        let (src, tgt) = self.edges[edge];
        let mut adj: Vec<Vec<(usize, usize, i64)>> = vec![Vec::new(); nv];
        for (k, &(a, b)) in self.edges.iter().enumerate() {
            if self.in_tree[k] {
                adj[a].push((b, k, 1));
                adj[b].push((a, k, -1));
            }
        }
        let mut prev: Vec<Option<(usize, usize, i64)>> = vec![None; nv];
        let mut seen = vec![false; nv];
        seen[tgt] = true;
        let mut queue = VecDeque::from([tgt]);
        while let Some(x) = queue.pop_front() {
            for &(y, k, s) in &adj[x] {
                if !seen[y] {
                    seen[y] = true;
                    prev[y] = Some((x, k, s));
                    queue.push_back(y);
                }
            }
        }
        let mut f = vec![0i64; self.edges.len()];
        f[edge] += 1;
        let mut x = src;
        while x != tgt {
            let (y, k, s) = prev[x].expect("spanning tree is connected");
            f[k] += s;
            x = y;
        }
        f
    }

    pub fn vertex_count(&self) -> usize {
        self.base_vertices * self.index
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn betti(&self) -> usize {
        self.edge_count() + 1 - self.vertex_count()
    }

    pub fn basis(&self) -> &[Vec<i64>] {
        &self.basis
    }

    pub fn domain(&self) -> &FundamentalDomain {
        &self.domain
    }

    pub fn subgroup(&self) -> &FiniteIndexSubgroup {
        &self.subgroup
    }

    /// Net outflow of `f` at every vertex.
    pub fn divergence(&self, f: &[i64]) -> Vec<i64> {
        let mut d = vec![0; self.vertex_count()];
        for (k, &(a, b)) in self.edges.iter().enumerate() {
            d[a] += f[k];
            d[b] -= f[k];
        }
        d
    }

    pub fn is_harmonic(&self, f: &[i64]) -> bool {
        self.divergence(f).iter().all(|&x| x == 0)
    }

    /// Rows of the harmonicity system.
    pub fn incidence(&self) -> Vec<Vec<i64>> {
        let mut rows = vec![vec![0i64; self.edge_count()]; self.vertex_count()];
        for (k, &(a, b)) in self.edges.iter().enumerate() {
            rows[a][k] += 1;
            rows[b][k] -= 1;
        }
        rows
    }

    /// Edge index and sign of a classified tree edge.
    pub fn edge_slot(&self, c: &Classified) -> Option<(usize, i64)> {
        let e0 = self.base_tree_edges + self.rank;
        let coset = self.subgroup.table().coset_of(&c.word);
        let (k, fwd) = match c.class {
            EdgeClass::Tree { index, forward } => (index, forward),
            EdgeClass::Loop { generator, forward } => (self.base_tree_edges + generator, forward),
            EdgeClass::Outside => return None,
        };
        Some((coset * e0 + k, if fwd { 1 } else { -1 }))
    }

    /// Values of all basis flows on the directed tree edge.
    pub fn evaluate_edge(&self, e: &DirectedEdge) -> Result<Vec<i64>, MeasureError> {
        let c = self.domain.classify(e)?;
        Ok(match self.edge_slot(&c) {
            None => vec![0; self.basis.len()],
            Some((k, s)) => self.basis.iter().map(|f| s * f[k]).collect(),
        })
    }

    /// Values of all basis flows on a boundary ball.
    pub fn evaluate_ball(&self, b: &BoundaryBall) -> Result<Vec<i64>, MeasureError> {
        self.evaluate_edge(&b.edge())
    }

    /// Basis values on the word ball `B(w)`, read off the last letter.
    pub fn evaluate_word_ball(&self, w: &FreeWord) -> Vec<i64> {
        let e0 = self.base_tree_edges + self.rank;
        let s = w.last().expect("nonempty");
        let j = crate::words::generator_of(s);
        let (coset, sign) = if crate::words::is_inverse(s) {
            (self.subgroup.table().coset_of(w), -1)
        } else {
            (self.subgroup.table().coset_of(&w.parent()), 1)
        };
        let k = coset * e0 + self.base_tree_edges + j;
        self.basis.iter().map(|f| sign * f[k]).collect()
    }

    pub fn to_dot(&self, name: &str) -> String {
        let mut s = format!("digraph \"{name}\" {{\n");
        for l in &self.vertex_labels {
            s.push_str(&format!("  \"{l}\";\n"));
        }
        let e0 = self.base_tree_edges + self.rank;
        for (k, &(a, b)) in self.edges.iter().enumerate() {
            let (va, vb) = (&self.vertex_labels[a], &self.vertex_labels[b]);
            if k % e0 < self.base_tree_edges {
                s.push_str(&format!("  \"{va}\" -> \"{vb}\";\n"));
            } else {
                s.push_str(&format!("  \"{va}\" -> \"{vb}\" [label=\"{}\"];\n", (b'a' + (k % e0 - self.base_tree_edges) as u8) as char));
            }
        }
        s.push_str("}\n");
        s
    }
}

/// Quotient graphs of every factor plus product cell counts.
#[derive(Debug, Clone, PartialEq)]
pub struct QuotientComplex {
    pub graphs: Vec<Option<QuotientGraph>>,
    pub betti: Vec<usize>,
    /// Number of product cells of each dimension `0..=places`.
    pub cells: Vec<usize>,
}

pub fn quotient_complex(group: &PlecticGroup, depth: usize) -> Result<QuotientComplex, MeasureError> {
    let mut graphs = Vec::new();
    for f in group.factors() {
        graphs.push(match f.schottky() {
            None => None,
            Some(s) => Some(FundamentalDomain::new(s).quotient_from_depth(depth)?),
        });
    }
    let betti = graphs.iter().map(|g| g.as_ref().map_or(0, QuotientGraph::betti)).collect();
    // (V + E·t) per factor, multiplied out; a trivial factor is one vertex
    let mut poly = vec![1usize];
    for g in &graphs {
        let (v, e) = g.as_ref().map_or((1, 0), |g| (g.vertex_count(), g.edge_count()));
        let mut next = vec![0; poly.len() + 1];
        for (i, &c) in poly.iter().enumerate() {
            next[i] += c * v;
            next[i + 1] += c * e;
        }
        poly = next;
    }
    Ok(QuotientComplex { graphs, betti, cells: poly })
}

/// Measure spaces per place and the tensor basis of the invariant lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct HLattice {
    pub places: Vec<Option<QuotientGraph>>,
    pub ranks: Vec<usize>,
    pub rank: usize,
}

impl HLattice {
    /// Lattice of a single factor's finite-index subgroup.
    pub fn for_subgroup(subgroup: &FiniteIndexSubgroup) -> Self {
        let d = FundamentalDomain::new(subgroup.parent());
        let q = QuotientGraph::new(&d, subgroup);
        let r = q.basis().len();
        HLattice { places: vec![Some(q)], ranks: vec![r], rank: r }
    }

    /// Multi-index of basis element `k`, last place varying fastest.
    pub fn multi_index(&self, k: usize) -> Vec<usize> {
        let mut out = vec![0; self.ranks.len()];
        let mut k = k;
        for (i, &r) in self.ranks.iter().enumerate().rev() {
            out[i] = k % r.max(1);
            k /= r.max(1);
        }
        out
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.ranks).fold(0, |acc, (&i, &r)| acc * r + i)
    }

    /// Values of every basis measure on a tuple of balls (one per place).
    pub fn measure_of_balls(&self, balls: &[BoundaryBall]) -> Result<Vec<i64>, MeasureError> {
        if balls.len() != self.places.len() {
            return Err(MeasureError::PlaceCount { expected: self.places.len(), got: balls.len() });
        }
        if self.rank == 0 {
            return Ok(Vec::new());
        }
        let per: Vec<Vec<i64>> = self
            .places
            .iter()
            .zip(balls)
            .map(|(q, b)| q.as_ref().expect("nontrivial place").evaluate_ball(b))
            .collect::<Result<_, _>>()?;
        Ok((0..self.rank)
            .map(|k| self.multi_index(k).iter().enumerate().map(|(p, &i)| per[p][i]).product())
            .collect())
    }
}

/// Solves antisymmetry + harmonicity per place on products of quotient
/// edges and checks the tensor cotree basis spans the integer solutions.
pub fn invariant_measure_lattice(group: &PlecticGroup, depth: usize) -> Result<HLattice, MeasureError> {
    let qc = quotient_complex(group, depth)?;
    let ranks: Vec<usize> = qc.betti.clone();
    let rank: usize = if ranks.is_empty() { 0 } else { ranks.iter().product() };
    if rank == 0 {
        return Ok(HLattice { places: qc.graphs, ranks, rank: 0 });
    }
    let graphs: Vec<&QuotientGraph> = qc.graphs.iter().map(|g| g.as_ref().unwrap()).collect();
    let dims: Vec<usize> = graphs.iter().map(|g| g.edge_count()).collect();
    let total: usize = dims.iter().product();
    // f(e₁,…,e_r), place p harmonic at every vertex for every fixed other edges
    let mut rows: Vec<Vec<i64>> = Vec::new();
    for (p, g) in graphs.iter().enumerate() {
        let inc = g.incidence();
        let others: usize = total / dims[p];
        for other in 0..others {
            for row in &inc {
                let mut r = vec![0i64; total];
                for (k, &val) in row.iter().enumerate() {
                    if val != 0 {
                        r[splice_index(&dims, p, k, other)] = val;
                    }
                }
                rows.push(r);
            }
        }
    }
    let kernel = integer_kernel(&rows, total);
    if kernel.len() != rank {
        return Err(MeasureError::RankMismatch { expected: rank, got: kernel.len() });
    }
    let lattice = HLattice { places: qc.graphs.clone(), ranks, rank };
    for k in 0..rank {
        let idx = lattice.multi_index(k);
        let v = tensor_flow(&graphs, &idx);
        if rows.iter().any(|r| r.iter().zip(&v).map(|(a, b)| a * b).sum::<i64>() != 0) {
            return Err(MeasureError::RankMismatch { expected: rank, got: k });
        }
    }
    Ok(lattice)
}

/// Flat index into the product of edge sets with place `p` set to `k` and
/// the remaining places enumerated by `other`.
fn splice_index(dims: &[usize], p: usize, k: usize, other: usize) -> usize {
    let mut rest = other;
    let mut coords = vec![0; dims.len()];
    for i in (0..dims.len()).rev() {
        if i == p {
            continue;
        }
        coords[i] = rest % dims[i];
        rest /= dims[i];
    }
    coords[p] = k;
    coords.iter().zip(dims).fold(0, |acc, (&c, &d)| acc * d + c)
}

/// `⊗ₚ f_{iₚ}` on the product of edge sets.
pub fn tensor_flow(graphs: &[&QuotientGraph], idx: &[usize]) -> Vec<i64> {
    let mut out = vec![1i64];
    for (g, &i) in graphs.iter().zip(idx) {
        let f = &g.basis()[i];
        out = out.iter().flat_map(|&a| f.iter().map(move |&b| a * b)).collect();
    }
    out
}

/// Consistency data: dimension of the product complex, lattice rank and the
/// orientation character on generators.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DualityReport {
    pub dimension: usize,
    pub rank: usize,
    /// `(place, generator, χ^or)`.
    pub orientation: Vec<(usize, usize, i8)>,
    pub note: String,
}

pub fn orientation_and_duality_report(group: &PlecticGroup, depth: usize) -> Result<DualityReport, MeasureError> {
    let lattice = invariant_measure_lattice(group, depth)?;
    let mut orientation = Vec::new();
    for (i, f) in group.factors().iter().enumerate() {
        if let Some(s) = f.schottky() {
            for (j, g) in s.generators().iter().enumerate() {
                let mut tuple = vec![Pgl2::identity(); group.places()];
                tuple[i] = g.clone();
                orientation.push((i, j, group.orientation_character(&tuple)));
            }
        }
    }
    Ok(DualityReport {
        dimension: group.support().len(),
        rank: lattice.rank,
        orientation,
        note: "consistency report only; duality statements are not verified".into(),
    })
}

/// Basis values per ball for the factor at `place`, keyed by ball.
pub fn ball_values(group: &PlecticGroup, place: usize, balls: &[BoundaryBall]) -> Result<BTreeMap<BoundaryBall, Vec<i64>>, MeasureError> {
    let f = group.schottky(place).map_err(MeasureError::Group)?;
    let q = QuotientGraph::new(&FundamentalDomain::new(f), &FiniteIndexSubgroup::whole(f.clone()));
    balls.iter().map(|b| Ok((b.clone(), q.evaluate_ball(b)?))).collect()
}

impl From<crate::error::CertificateViolation> for MeasureError {
    fn from(e: crate::error::CertificateViolation) -> Self {
        MeasureError::Group(GroupError::Certificate(e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::Factor;
    use crate::proj::rat;
    use crate::schreier::CosetTable;

    fn rank2() -> SchottkyFactor {
        let q = rat(3125);
        let g1 = Pgl2::with_fixed_points(&rat(1), &rat(2), &q).unwrap();
        let g2 = Pgl2::with_fixed_points(&rat(3), &rat(4), &q).unwrap();
        let b = |c: i64| BoundaryBall::closed(5, &rat(c), 3);
        SchottkyFactor::certify(5, 40, vec![g1, g2], vec![b(1), b(2), b(3), b(4)]).unwrap()
    }

    fn tate() -> SchottkyFactor {
        SchottkyFactor::cyclic(5, 40, Pgl2::from_ints(5, 0, 0, 1).unwrap()).unwrap()
    }

    #[test]
    fn cyclic_quotient_is_one_loop() {
        let d = FundamentalDomain::new(&tate());
        let q = d.quotient_from_depth(1).unwrap();
        assert_eq!((q.vertex_count(), q.edge_count(), q.betti()), (1, 1, 1));
        assert!(matches!(d.quotient_from_depth(0), Err(MeasureError::DepthInsufficient(0))));
    }

    #[test]
    fn cyclic_ball_signs() {
        let f = tate();
        let q = QuotientGraph::new(&FundamentalDomain::new(&f), &FiniteIndexSubgroup::whole(f.clone()));
        let zero = rat(0);
        assert_eq!(q.evaluate_ball(&BoundaryBall::closed(5, &zero, 1)).unwrap(), vec![1]);
        assert_eq!(q.evaluate_ball(&BoundaryBall::closed(5, &zero, 4)).unwrap(), vec![1]);
        assert_eq!(q.evaluate_ball(&BoundaryBall::closed(5, &zero, 0).complement()).unwrap(), vec![-1]);
        assert_eq!(q.evaluate_ball(&BoundaryBall::closed(5, &rat(1), 1)).unwrap(), vec![0]);
    }

    #[test]
    fn rank2_quotient_betti() {
        let d = FundamentalDomain::new(&rank2());
        let q = d.quotient_from_depth(2).unwrap();
        assert_eq!(q.betti(), 2);
        assert_eq!(q.vertex_count(), 9);
        for f in q.basis() {
            assert!(q.is_harmonic(f));
        }
    }

    #[test]
    fn word_balls_match_classification() {
        let f = rank2();
        let q = QuotientGraph::new(&FundamentalDomain::new(&f), &FiniteIndexSubgroup::whole(f.clone()));
        for (w, _) in f.enumerate_words(3).into_iter().skip(1) {
            assert_eq!(q.evaluate_ball(&f.word_ball(&w)).unwrap(), q.evaluate_word_ball(&w));
        }
        let t = CosetTable::from_action(vec![vec![1, 0], vec![1, 0]]).unwrap();
        let h = FiniteIndexSubgroup::new(f.clone(), t).unwrap();
        let qh = QuotientGraph::new(&FundamentalDomain::new(&f), &h);
        assert_eq!(qh.betti(), 3);
        for (w, _) in f.enumerate_words(3).into_iter().skip(1) {
            assert_eq!(qh.evaluate_ball(&f.word_ball(&w)).unwrap(), qh.evaluate_word_ball(&w));
        }
    }

    #[test]
    fn product_ranks() {
        let g = PlecticGroup::new(5, 40, vec![Factor::Cyclic(tate()), Factor::Schottky(rank2())]);
        let l = invariant_measure_lattice(&g, 2).unwrap();
        assert_eq!(l.rank, 2);
        let qc = quotient_complex(&g, 2).unwrap();
        assert_eq!(qc.cells, vec![9, 1 * 10 + 9, 10]);
        let triv = PlecticGroup::new(5, 40, vec![Factor::Trivial]);
        assert_eq!(invariant_measure_lattice(&triv, 1).unwrap().rank, 0);
    }
}
