//! Finite-index subgroups of free groups: coset tables, Schreier
//! transversals and generators, and Stallings folding.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{GroupError, HeckeError};
use crate::group::SchottkyFactor;
use crate::words::{generator_of, is_inverse, letter, FreeWord, Letter};

/// Right action of the generators on `n` cosets; coset 0 is the subgroup.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CosetTable {
    /// `forward[j][c] = c · γⱼ`.
    forward: Vec<Vec<usize>>,
    backward: Vec<Vec<usize>>,
}

impl CosetTable {
    pub fn trivial(rank: usize) -> Self {
        CosetTable { forward: vec![vec![0]; rank], backward: vec![vec![0]; rank] }
    }

    pub fn from_action(action: Vec<Vec<usize>>) -> Result<Self, GroupError> {
        let n = action.first().map_or(1, Vec::len);
        let mut backward = Vec::new();
        for (j, perm) in action.iter().enumerate() {
            if perm.len() != n {
                return Err(GroupError::BadCosetAction(format!("generator {j} acts on {} points, expected {n}", perm.len())));
            }
            let mut inv = vec![usize::MAX; n];
            for (c, &d) in perm.iter().enumerate() {
                if d >= n || inv[d] != usize::MAX {
                    return Err(GroupError::BadCosetAction(format!("generator {j} is not a permutation")));
                }
                inv[d] = c;
            }
            backward.push(inv);
        }
        let t = CosetTable { forward: action, backward };
        if t.reachable().len() != n {
            return Err(GroupError::NotTransitive);
        }
        Ok(t)
    }

    pub fn index(&self) -> usize {
        self.forward.first().map_or(1, Vec::len)
    }

    pub fn rank(&self) -> usize {
        self.forward.len()
    }

    pub fn action(&self) -> &[Vec<usize>] {
        &self.forward
    }

    pub fn act(&self, c: usize, l: Letter) -> usize {
        let j = generator_of(l);
        if is_inverse(l) {
            self.backward[j][c]
        } else {
            self.forward[j][c]
        }
    }

    /// Coset `H · w`.
    pub fn coset_of(&self, w: &FreeWord) -> usize {
        self.act_word(0, w)
    }

    pub fn act_word(&self, c: usize, w: &FreeWord) -> usize {
        w.letters().iter().fold(c, |c, &l| self.act(c, l))
    }

    pub fn contains(&self, w: &FreeWord) -> bool {
        self.coset_of(w) == 0
    }

    fn reachable(&self) -> Vec<usize> {
        let n = self.index();
        let mut seen = vec![false; n];
        let mut order = vec![0];
        seen[0] = true;
        let mut i = 0;
        while i < order.len() {
            let c = order[i];
            for j in 0..self.rank() {
                for d in [self.forward[j][c], self.backward[j][c]] {
                    if !seen[d] {
                        seen[d] = true;
                        order.push(d);
                    }
                }
            }
            i += 1;
        }
        order
    }
}

/// A finite-index subgroup of a Schottky factor given by its coset table,
/// with Schreier transversal and free generators.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteIndexSubgroup {
    parent: SchottkyFactor,
    table: CosetTable,
    transversal: Vec<FreeWord>,
    /// `tree_slot[j][c]`: the lift of loop `j` at coset `c` lies in the
    /// Schreier tree.
    tree_slot: Vec<Vec<bool>>,
    /// `(j, c)` for each Schreier generator, in order.
    slots: Vec<(usize, usize)>,
    generators: Vec<FreeWord>,
}

impl FiniteIndexSubgroup {
    pub fn new(parent: SchottkyFactor, table: CosetTable) -> Result<Self, GroupError> {
        if table.rank() != parent.rank() {
            return Err(GroupError::BadCosetAction(format!(
                "table has {} generators, factor has {}",
                table.rank(),
                parent.rank()
            )));
        }
        let n = table.index();
        let g = parent.rank();
        let mut transversal: Vec<Option<FreeWord>> = vec![None; n];
        transversal[0] = Some(FreeWord::identity());
        let mut tree_slot = vec![vec![false; n]; g];
        let mut queue = VecDeque::from([0usize]);
        while let Some(c) = queue.pop_front() {
            let tc = transversal[c].clone().unwrap();
            for j in 0..g {
                let d = table.forward[j][c];
                if transversal[d].is_none() {
                    transversal[d] = Some(tc.push(letter(j, false)));
                    tree_slot[j][c] = true;
                    queue.push_back(d);
                }
                let d = table.backward[j][c];
                if transversal[d].is_none() {
                    transversal[d] = Some(tc.push(letter(j, true)));
                    tree_slot[j][d] = true;
                    queue.push_back(d);
                }
            }
        }
        let transversal: Vec<FreeWord> = transversal.into_iter().collect::<Option<Vec<_>>>().ok_or(GroupError::NotTransitive)?;
        let mut slots = Vec::new();
        let mut generators = Vec::new();
        for c in 0..n {
            for j in 0..g {
                if !tree_slot[j][c] {
                    let d = table.forward[j][c];
                    slots.push((j, c));
                    generators.push(transversal[c].push(letter(j, false)).mul(&transversal[d].inverse()));
                }
            }
        }
        Ok(FiniteIndexSubgroup { parent, table, transversal, tree_slot, slots, generators })
    }

    /// The whole factor as an index-1 subgroup.
    pub fn whole(parent: SchottkyFactor) -> Self {
        let g = parent.rank();
        Self::new(parent, CosetTable::trivial(g)).expect("trivial table")
    }

    pub fn parent(&self) -> &SchottkyFactor {
        &self.parent
    }

    pub fn table(&self) -> &CosetTable {
        &self.table
    }

    pub fn index(&self) -> usize {
        self.table.index()
    }

    pub fn rank(&self) -> usize {
        self.generators.len()
    }

    pub fn generators(&self) -> &[FreeWord] {
        &self.generators
    }

    pub fn slots(&self) -> &[(usize, usize)] {
        &self.slots
    }

    pub fn transversal(&self) -> &[FreeWord] {
        &self.transversal
    }

    pub fn is_tree_slot(&self, j: usize, c: usize) -> bool {
        self.tree_slot[j][c]
    }

    pub fn contains(&self, w: &FreeWord) -> bool {
        self.table.contains(w)
    }

    /// Exponent vector of `w ∈ H` in the Schreier generators (abelianized
    /// Reidemeister–Schreier rewriting).
    pub fn rewrite_abelian(&self, w: &FreeWord) -> Option<Vec<i64>> {
        if !self.contains(w) {
            return None;
        }
        let mut pos: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        for (k, s) in self.slots.iter().enumerate() {
            pos.insert(*s, k);
        }
        let mut out = vec![0; self.rank()];
        let mut c = 0;
        for &l in w.letters() {
            let j = generator_of(l);
            let (slot, sign) = if is_inverse(l) { ((j, self.table.backward[j][c]), -1) } else { ((j, c), 1) };
            if let Some(&k) = pos.get(&slot) {
                out[k] += sign;
            }
            c = self.table.act(c, l);
        }
        Some(out)
    }
}

/// Folded core graph of a finitely generated subgroup of a free group.
#[derive(Debug, Clone)]
pub struct StallingsGraph {
    rank: usize,
    /// `edges[v]` maps a letter to the target vertex.
    edges: Vec<BTreeMap<Letter, usize>>,
}

impl StallingsGraph {
    /// Folds the bouquet of loops spelling `words` at vertex 0.
    pub fn fold(rank: usize, words: &[FreeWord]) -> Self {
        let mut parent: Vec<usize> = vec![0];
        let mut raw: Vec<(usize, Letter, usize)> = Vec::new();
        for w in words {
            if w.is_empty() {
                continue;
            }
            let mut v = 0;
            for (i, &l) in w.letters().iter().enumerate() {
                let t = if i + 1 == w.len() {
                    0
                } else {
                    parent.push(parent.len());
                    parent.len() - 1
                };
                raw.push((v, l, t));
                v = t;
            }
        }
        fn find(parent: &mut [usize], x: usize) -> usize {
            let mut r = x;
            while parent[r] != r {
                r = parent[r];
            }
            let mut y = x;
            while parent[y] != r {
                let next = parent[y];
                parent[y] = r;
                y = next;
            }
            r
        }
        loop {
            let mut adj: BTreeMap<(usize, Letter), usize> = BTreeMap::new();
            let mut merged = false;
            for &(a, l, b) in &raw {
                let (a, b) = (find(&mut parent, a), find(&mut parent, b));
                for (u, m, w) in [(a, l, b), (b, -l, a)] {
                    match adj.get(&(u, m)) {
                        Some(&x) => {
                            let (x, w) = (find(&mut parent, x), find(&mut parent, w));
                            if x != w {
                                let (lo, hi) = if x < w { (x, w) } else { (w, x) };
                                parent[hi] = lo;
                                merged = true;
                            }
                        }
                        None => {
                            adj.insert((u, m), w);
                        }
                    }
                }
            }
            if !merged {
                break;
            }
        }
        let mut label: BTreeMap<usize, usize> = BTreeMap::new();
        let root = find(&mut parent, 0);
        label.insert(root, 0);
        let mut edges: Vec<BTreeMap<Letter, usize>> = vec![BTreeMap::new()];
        let mut resolved: Vec<(usize, Letter, usize)> = Vec::new();
        for &(a, l, b) in &raw {
            resolved.push((find(&mut parent, a), l, find(&mut parent, b)));
        }
        for &(a, _, b) in &resolved {
            for x in [a, b] {
                if !label.contains_key(&x) {
                    label.insert(x, edges.len());
                    edges.push(BTreeMap::new());
                }
            }
        }
        for (a, l, b) in resolved {
            let (a, b) = (label[&a], label[&b]);
            edges[a].insert(l, b);
            edges[b].insert(-l, a);
        }
        StallingsGraph { rank, edges }
    }

    pub fn vertex_count(&self) -> usize {
        self.edges.len()
    }

    pub fn is_complete(&self) -> bool {
        self.edges.iter().all(|e| e.len() == 2 * self.rank)
    }

    /// Whether the graph reads `w` as a loop at the base vertex.
    pub fn accepts(&self, w: &FreeWord) -> bool {
        let mut v = 0;
        for l in w.letters() {
            match self.edges[v].get(l) {
                Some(&t) => v = t,
                None => return false,
            }
        }
        v == 0
    }

    /// Coset table of a finite-index subgroup, cosets numbered in BFS order.
    pub fn coset_table(&self) -> Result<CosetTable, HeckeError> {
        if !self.is_complete() {
            return Err(HeckeError::InfiniteIndex);
        }
        let n = self.vertex_count();
        let mut order = vec![usize::MAX; n];
        let mut seq = vec![0];
        order[0] = 0;
        let mut i = 0;
        while i < seq.len() {
            let v = seq[i];
            for (_, &t) in &self.edges[v] {
                if order[t] == usize::MAX {
                    order[t] = seq.len();
                    seq.push(t);
                }
            }
            i += 1;
        }
        let action = (0..self.rank)
            .map(|j| {
                let mut perm = vec![0; n];
                for v in 0..n {
                    perm[order[v]] = order[self.edges[v][&letter(j, false)]];
                }
                perm
            })
            .collect();
        CosetTable::from_action(action).map_err(HeckeError::Group)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::proj::{rat, Pgl2};
    use crate::tree::BoundaryBall;

    fn rank2() -> SchottkyFactor {
        let q = rat(3125);
        let g1 = Pgl2::with_fixed_points(&rat(1), &rat(2), &q).unwrap();
        let g2 = Pgl2::with_fixed_points(&rat(3), &rat(4), &q).unwrap();
        let b = |c: i64| BoundaryBall::closed(5, &rat(c), 3);
        SchottkyFactor::certify(5, 40, vec![g1, g2], vec![b(1), b(2), b(3), b(4)]).unwrap()
    }

    #[test]
    fn index_two_rank_three() {
        let t = CosetTable::from_action(vec![vec![1, 0], vec![1, 0]]).unwrap();
        let h = FiniteIndexSubgroup::new(rank2(), t).unwrap();
        assert_eq!(h.rank(), 3);
        for w in h.generators() {
            assert!(h.contains(w));
        }
    }

    #[test]
    fn index_one_is_whole() {
        let h = FiniteIndexSubgroup::whole(rank2());
        assert_eq!(h.generators(), &[FreeWord::parse("a").unwrap(), FreeWord::parse("b").unwrap()]);
    }

    #[test]
    fn cyclic_index_two_is_square() {
        let f = SchottkyFactor::cyclic(5, 30, Pgl2::from_ints(5, 0, 0, 1).unwrap()).unwrap();
        let h = FiniteIndexSubgroup::new(f, CosetTable::from_action(vec![vec![1, 0]]).unwrap()).unwrap();
        assert_eq!(h.generators(), &[FreeWord::parse("aa").unwrap()]);
    }

    #[test]
    fn not_transitive() {
        assert_eq!(CosetTable::from_action(vec![vec![0, 1], vec![1, 0], vec![0, 1]].into_iter().take(1).collect()), Err(GroupError::NotTransitive));
    }

    #[test]
    fn stallings_recovers_table() {
        let t = CosetTable::from_action(vec![vec![1, 2, 0], vec![0, 2, 1]]).unwrap();
        let h = FiniteIndexSubgroup::new(rank2(), t).unwrap();
        assert_eq!(h.rank(), 4);
        let s = StallingsGraph::fold(2, h.generators());
        let t2 = s.coset_table().unwrap();
        assert_eq!(t2.index(), 3);
        for w in crate::words::reduced_words(2, 4) {
            assert_eq!(h.contains(&w), t2.contains(&w));
        }
        let inf = StallingsGraph::fold(2, &[FreeWord::parse("a").unwrap()]);
        assert!(matches!(inf.coset_table(), Err(HeckeError::InfiniteIndex)));
    }

    #[test]
    fn abelian_rewriting_is_dual() {
        let t = CosetTable::from_action(vec![vec![1, 0], vec![1, 0]]).unwrap();
        let h = FiniteIndexSubgroup::new(rank2(), t).unwrap();
        for (k, w) in h.generators().iter().enumerate() {
            let mut e = vec![0; h.rank()];
            e[k] = 1;
            assert_eq!(h.rewrite_abelian(w), Some(e));
        }
    }
}
