//! Morphisms `[x] ↦ [gx]` between quotients by finite-index subgroups of a
//! common Schottky factor, their action on cycles, measure lattices and
//! Jacobians, and composition of correspondences by double cosets.

use std::collections::{BTreeMap, HashMap, VecDeque};

use serde::Serialize;

use crate::error::{GroupError, HeckeError, JacobianError};
use crate::group::SchottkyFactor;
use crate::integration::{integrate_riemann, subgroup_period_matrix, CycleTerm, PlecticCycle, RiemannOptions};
use crate::intlin::mat_mul;
use crate::jacobian::{FactorPeriods, JacobianElement};
use crate::measures::{FundamentalDomain, HLattice, QuotientGraph};
use crate::padic::QuadExtScalar;
use crate::proj::Pgl2;
use crate::schreier::{CosetTable, FiniteIndexSubgroup, StallingsGraph};
use crate::words::{letter, FreeWord};

/// Diagonal action of the generators on the orbit of `base` in a product of
/// coset spaces, relabeled in breadth-first order.
pub fn orbit_table(tables: &[&CosetTable], base: &[usize]) -> Result<CosetTable, GroupError> {
    let rank = tables[0].rank();
    let mut index: HashMap<Vec<usize>, usize> = HashMap::from([(base.to_vec(), 0)]);
    let mut points = vec![base.to_vec()];
    let mut queue = VecDeque::from([0usize]);
    let mut forward: Vec<Vec<usize>> = vec![Vec::new(); rank];
    let mut edges: Vec<(usize, usize, usize)> = Vec::new();
    while let Some(i) = queue.pop_front() {
        for j in 0..rank {
            for inv in [false, true] {
                let l = letter(j, inv);
                let img: Vec<usize> = points[i].iter().zip(tables).map(|(&c, t)| t.act(c, l)).collect();
                let k = *index.entry(img.clone()).or_insert_with(|| {
                    points.push(img);
                    queue.push_back(points.len() - 1);
                    points.len() - 1
                });
                if !inv {
                    edges.push((j, i, k));
                }
            }
        }
    }
    for row in forward.iter_mut() {
        *row = vec![0; points.len()];
    }
    for (j, i, k) in edges {
        forward[j][i] = k;
    }
    CosetTable::from_action(forward)
}

/// Table of `x⁻¹ H x` from the table of `H`.
pub fn conjugate_table(t: &CosetTable, x: &FreeWord) -> Result<CosetTable, GroupError> {
    orbit_table(&[t], &[t.coset_of(x)])
}

/// Table of `H₁ ∩ H₂`.
pub fn intersection_table(a: &CosetTable, b: &CosetTable) -> Result<CosetTable, GroupError> {
    orbit_table(&[a, b], &[0, 0])
}

/// `f(g): X_Γ → X_Γ′` with `gΓg⁻¹ ⊆ Γ′` of finite index.
#[derive(Debug, Clone, PartialEq)]
pub struct MumfordMorphism {
    pub g: Pgl2,
    pub source: FiniteIndexSubgroup,
    pub target: FiniteIndexSubgroup,
    /// `g hᵢ g⁻¹` as words in the ambient generators.
    pub image_words: Vec<FreeWord>,
    pub index: usize,
    /// `t` with `Γ′ = ⊔ (gΓg⁻¹) t`.
    pub coset_reps: Vec<FreeWord>,
}

impl MumfordMorphism {
    pub fn is_inclusion(&self) -> bool {
        self.g.is_identity()
    }
}

pub fn validate_morphism(g: &Pgl2, source: &FiniteIndexSubgroup, target: &FiniteIndexSubgroup, word_bound: usize) -> Result<MumfordMorphism, HeckeError> {
    let f = target.parent();
    if source.parent() != f {
        return Err(HeckeError::Mismatch("source and target live in different factors".into()));
    }
    let gi = g.inverse();
    let mut image_words = Vec::new();
    for (k, w) in source.generators().iter().enumerate() {
        let h = g.compose(&f.evaluate(w)).compose(&gi);
        let word = f.membership_word(&h, word_bound).ok_or(HeckeError::NotASubgroup { generator: k, bound: word_bound })?;
        if !target.contains(&word) {
            return Err(HeckeError::NotASubgroup { generator: k, bound: word_bound });
        }
        image_words.push(word);
    }
    let table = StallingsGraph::fold(f.rank(), &image_words).coset_table()?;
    let coset_reps: Vec<FreeWord> = FiniteIndexSubgroup::new(f.clone(), table.clone())?
        .transversal()
        .iter()
        .filter(|t| target.contains(t))
        .cloned()
        .collect();
    let index = table.index() / target.index();
    if coset_reps.len() != index {
        return Err(HeckeError::Mismatch(format!("{} coset representatives for index {index}", coset_reps.len())));
    }
    Ok(MumfordMorphism { g: g.clone(), source: source.clone(), target: target.clone(), image_words, index, coset_reps })
}

/// `[x] ↦ [gx]` on every place-0 point.
pub fn pushforward_cycles(f: &MumfordMorphism, d: &PlecticCycle) -> Result<PlecticCycle, HeckeError> {
    d.translate(&[f.g.clone()]).map_err(|e| HeckeError::PointCollision(e.to_string()))
}

/// `[y] ↦ Σ_t [g⁻¹ t y]`.
pub fn pullback_cycles(f: &MumfordMorphism, d: &PlecticCycle) -> Result<PlecticCycle, HeckeError> {
    let factor = f.target.parent();
    let gi = f.g.inverse();
    let mut terms = Vec::new();
    for term in &d.terms {
        for t in &f.coset_reps {
            let m = gi.compose(&factor.evaluate(t));
            let (x, y) = &term.places[0];
            let pair = (m.apply(x).map_err(|e| HeckeError::PointCollision(e.to_string()))?, m.apply(y).map_err(|e| HeckeError::PointCollision(e.to_string()))?);
            terms.push(CycleTerm { coeff: term.coeff, places: vec![pair] });
        }
    }
    Ok(PlecticCycle { terms })
}

fn graph(sub: &FiniteIndexSubgroup) -> QuotientGraph {
    QuotientGraph::new(&FundamentalDomain::new(sub.parent()), sub)
}

/// Coordinates of a harmonic flow in the cotree basis: its values on the
/// non-tree loop lifts.
fn coordinates(q: &QuotientGraph, flow: &[i64]) -> Vec<i64> {
    let sub = q.subgroup();
    let t = q.domain().tree_edges().len();
    let e0 = t + q.domain().rank();
    sub.slots().iter().map(|&(j, c)| flow[c * e0 + t + j]).collect()
}

/// Integer maps between measure lattices of an inclusion `Γ ⊆ Γ′`:
/// `res` (rows: Γ basis, columns: Γ′ basis) and `cores` (the transfer).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LatticeMaps {
    pub res: Vec<Vec<i64>>,
    pub cores: Vec<Vec<i64>>,
    /// `f_* = resᵀ` on H.
    pub push: Vec<Vec<i64>>,
    /// `f^* = coresᵀ` on H.
    pub pull: Vec<Vec<i64>>,
    pub index: usize,
}

pub fn lattice_maps(f: &MumfordMorphism) -> Result<LatticeMaps, HeckeError> {
    if !f.is_inclusion() {
        return Err(HeckeError::Mismatch("lattice maps are computed for inclusions".into()));
    }
    let (qs, qt) = (graph(&f.source), graph(&f.target));
    let t = qs.domain().tree_edges().len();
    let e0 = t + qs.domain().rank();
    // covering map on cosets
    let pi: Vec<usize> = f.source.transversal().iter().map(|w| f.target.table().coset_of(w)).collect();
    let lift = |flow: &[i64]| -> Vec<i64> {
        let mut out = vec![0; qs.edge_count()];
        for (c, &pc) in pi.iter().enumerate() {
            for k in 0..e0 {
                out[c * e0 + k] = flow[pc * e0 + k];
            }
        }
        out
    };
    let sum = |flow: &[i64]| -> Vec<i64> {
        let mut out = vec![0; qt.edge_count()];
        for (c, &pc) in pi.iter().enumerate() {
            for k in 0..e0 {
                out[pc * e0 + k] += flow[c * e0 + k];
            }
        }
        out
    };
    let res_cols: Vec<Vec<i64>> = qt.basis().iter().map(|b| coordinates(&qs, &lift(b))).collect();
    let cores_cols: Vec<Vec<i64>> = qs.basis().iter().map(|b| coordinates(&qt, &sum(b))).collect();
    for b in qt.basis() {
        if !qs.is_harmonic(&lift(b)) {
            return Err(HeckeError::Mismatch("lifted flow is not harmonic".into()));
        }
    }
    let res = crate::intlin::transpose(&res_cols);
    let cores = crate::intlin::transpose(&cores_cols);
    let push = crate::intlin::transpose(&res);
    let pull = crate::intlin::transpose(&cores);
    Ok(LatticeMaps { res, cores, push, pull, index: f.index })
}

/// `u′_b = ∏_a u_a^{m[b][a]}`.
pub fn apply_matrix(m: &[Vec<i64>], u: &[QuadExtScalar]) -> Result<Vec<QuadExtScalar>, JacobianError> {
    let p = u[0].prime();
    let prec = u.iter().map(QuadExtScalar::precision).min().unwrap();
    m.iter()
        .map(|row| {
            let mut acc = QuadExtScalar::one(p, prec);
            for (x, &e) in u.iter().zip(row) {
                if e != 0 {
                    acc = acc.mul(&x.pow(e)?)?;
                }
            }
            Ok(acc)
        })
        .collect()
}

/// Period data and Abel–Jacobi map of a single finite-index subgroup.
#[derive(Debug, Clone, PartialEq)]
pub struct SubgroupJacobian {
    pub subgroup: FiniteIndexSubgroup,
    pub lattice: HLattice,
    pub periods: FactorPeriods,
}

impl SubgroupJacobian {
    pub fn new(sub: &FiniteIndexSubgroup, opts: &RiemannOptions) -> Result<Self, JacobianError> {
        let periods = FactorPeriods::new(subgroup_period_matrix(sub, opts)?)?;
        Ok(SubgroupJacobian { subgroup: sub.clone(), lattice: HLattice::for_subgroup(sub), periods })
    }

    pub fn integrate(&self, d: &PlecticCycle, opts: &RiemannOptions) -> Result<Vec<QuadExtScalar>, JacobianError> {
        Ok(integrate_riemann(&self.lattice, d, opts)?.scalars()?)
    }

    pub fn abel_jacobi(&self, d: &PlecticCycle, opts: &RiemannOptions) -> Result<JacobianElement, JacobianError> {
        let u = self.integrate(d, opts)?;
        self.reduce(&u)
    }

    pub fn reduce(&self, u: &[QuadExtScalar]) -> Result<JacobianElement, JacobianError> {
        Ok(JacobianElement { factors: vec![self.periods.reduce(u)?] })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FunctorialityReport {
    /// Digits of agreement of `AJ′(f_* D)` with `f_*(AJ(D))`, per sample.
    pub push_digits: Vec<u32>,
    /// Digits of agreement of `AJ(f^* D′)` with `f^*(AJ′(D′))`, per sample.
    pub pull_digits: Vec<u32>,
    /// `f_*∘f^*` equals multiplication by the index on `H_{Γ′}`.
    pub transfer_is_index: bool,
    /// `f_*` sends every source period into the target lattice.
    pub lattice_inclusion: bool,
    pub required: u32,
}

impl FunctorialityReport {
    pub fn passed(&self) -> bool {
        self.transfer_is_index
            && self.lattice_inclusion
            && self.push_digits.iter().chain(&self.pull_digits).all(|&d| d >= self.required)
    }
}

pub fn functoriality_check(f: &MumfordMorphism, samples: &[PlecticCycle], opts: &RiemannOptions) -> Result<FunctorialityReport, HeckeError> {
    let maps = lattice_maps(f)?;
    let src = SubgroupJacobian::new(&f.source, opts)?;
    let tgt = SubgroupJacobian::new(&f.target, opts)?;
    let n = f.target.rank();
    let scaled: Vec<Vec<i64>> = (0..n).map(|i| (0..n).map(|j| if i == j { f.index as i64 } else { 0 }).collect()).collect();
    let transfer_is_index = mat_mul(&maps.push, &maps.pull) == scaled;
    let mut lattice_inclusion = true;
    for j in 0..f.source.rank() {
        let col: Vec<QuadExtScalar> = (0..f.source.rank()).map(|i| src.periods.matrix[i][j].clone()).collect();
        let img = tgt.reduce(&apply_matrix(&maps.push, &col)?)?;
        lattice_inclusion &= img.identity_digits() >= opts.output_digits;
    }
    let mut push_digits = Vec::new();
    let mut pull_digits = Vec::new();
    for d in samples {
        let lhs = tgt.abel_jacobi(&pushforward_cycles(f, d)?, opts)?;
        let rhs = tgt.reduce(&apply_matrix(&maps.push, &src.integrate(d, opts)?)?)?;
        push_digits.push(lhs.agreement_digits(&rhs)?);
        let lhs = src.abel_jacobi(&pullback_cycles(f, d)?, opts)?;
        let rhs = src.reduce(&apply_matrix(&maps.pull, &tgt.integrate(d, opts)?)?)?;
        pull_digits.push(lhs.agreement_digits(&rhs)?);
    }
    Ok(FunctorialityReport { push_digits, pull_digits, transfer_is_index, lattice_inclusion, required: opts.output_digits })
}

/// One component `X_M` of a correspondence `X_Γa ← X_M → X_Γb`, the right
/// map being `[x] ↦ [g x]` with `g M g⁻¹ ⊆ Γb`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct Component {
    pub middle: CosetTable,
    pub g: FreeWord,
}

/// A finite disjoint union of components between two subgroups.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HeckeCorrespondence {
    pub source: CosetTable,
    pub target: CosetTable,
    pub components: Vec<Component>,
}

impl HeckeCorrespondence {
    pub fn identity(t: &CosetTable) -> Self {
        HeckeCorrespondence { source: t.clone(), target: t.clone(), components: vec![Component { middle: t.clone(), g: FreeWord::identity() }] }
    }

    /// Multiset of component indices in the ambient group, sorted.
    pub fn signature(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.components.iter().map(|c| c.middle.index()).collect();
        v.sort();
        v
    }
}

fn subgroup_words(t: &CosetTable, rank: usize) -> Vec<FreeWord> {
    // Schreier generators without the factor matrices
    let n = t.index();
    let mut transversal: Vec<Option<FreeWord>> = vec![None; n];
    transversal[0] = Some(FreeWord::identity());
    let mut tree = vec![vec![false; n]; rank];
    let mut queue = VecDeque::from([0usize]);
    while let Some(c) = queue.pop_front() {
        let tc = transversal[c].clone().unwrap();
        for j in 0..rank {
            for inv in [false, true] {
                let d = t.act(c, letter(j, inv));
                if transversal[d].is_none() {
                    transversal[d] = Some(tc.push(letter(j, inv)));
                    tree[j][if inv { d } else { c }] = true;
                    queue.push_back(d);
                }
            }
        }
    }
    let tr: Vec<FreeWord> = transversal.into_iter().map(Option::unwrap).collect();
    let mut gens = Vec::new();
    for c in 0..n {
        for j in 0..rank {
            if !tree[j][c] {
                gens.push(tr[c].push(letter(j, false)).mul(&tr[t.act(c, letter(j, false))].inverse()));
            }
        }
    }
    gens
}

fn transversal_words(t: &CosetTable, rank: usize) -> Vec<FreeWord> {
    let n = t.index();
    let mut out: Vec<Option<FreeWord>> = vec![None; n];
    out[0] = Some(FreeWord::identity());
    let mut queue = VecDeque::from([0usize]);
    while let Some(c) = queue.pop_front() {
        let tc = out[c].clone().unwrap();
        for j in 0..rank {
            for inv in [false, true] {
                let d = t.act(c, letter(j, inv));
                if out[d].is_none() {
                    out[d] = Some(tc.push(letter(j, inv)));
                    queue.push_back(d);
                }
            }
        }
    }
    out.into_iter().map(Option::unwrap).collect()
}

/// A double coset `A δ N ⊆ Γb` and its size in `A`-cosets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DoubleCoset {
    pub representative: FreeWord,
    pub size: usize,
}

/// `A\Γb/N` as orbits of `N` on the `A`-cosets contained in `Γb`.
pub fn double_cosets(a: &CosetTable, b: &CosetTable, n: &CosetTable, rank: usize, word_bound: usize) -> Result<Vec<DoubleCoset>, HeckeError> {
    let reps = transversal_words(a, rank);
    if reps.iter().any(|w| w.len() > word_bound) {
        return Err(HeckeError::BoundExhausted(word_bound));
    }
    let inside: Vec<bool> = reps.iter().map(|w| b.contains(w)).collect();
    let ngens = subgroup_words(n, rank);
    let mut seen = vec![false; a.index()];
    let mut out = Vec::new();
    for c in 0..a.index() {
        if !inside[c] || seen[c] {
            continue;
        }
        let mut orbit = vec![c];
        seen[c] = true;
        let mut i = 0;
        while i < orbit.len() {
            let x = orbit[i];
            for w in &ngens {
                for y in [a.act_word(x, w), a.act_word(x, &w.inverse())] {
                    if !seen[y] {
                        seen[y] = true;
                        orbit.push(y);
                    }
                }
            }
            i += 1;
        }
        out.push(DoubleCoset { representative: reps[c].clone(), size: orbit.len() });
    }
    Ok(out)
}

/// Counts `A\Γb/N` by joining words of length ≤ `len` in `Γb` under left
/// multiplication by generators of `A` and right multiplication by
/// generators of `N`. Independent of the orbit computation above.
pub fn double_cosets_brute_force(a: &CosetTable, b: &CosetTable, n: &CosetTable, rank: usize, len: usize) -> usize {
    let words: Vec<FreeWord> = crate::words::reduced_words(rank, len).into_iter().filter(|w| b.contains(w)).collect();
    let index: BTreeMap<FreeWord, usize> = words.iter().cloned().enumerate().map(|(i, w)| (w, i)).collect();
    let mut uf: Vec<usize> = (0..words.len()).collect();
    fn find(uf: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while uf[r] != r {
            r = uf[r];
        }
        uf[x] = r;
        r
    }
    let agens = subgroup_words(a, rank);
    let ngens = subgroup_words(n, rank);
    for (i, w) in words.iter().enumerate() {
        let mut nbrs = Vec::new();
        for h in &agens {
            nbrs.push(h.mul(w));
            nbrs.push(h.inverse().mul(w));
        }
        for h in &ngens {
            nbrs.push(w.mul(h));
            nbrs.push(w.mul(&h.inverse()));
        }
        for v in nbrs {
            if let Some(&k) = index.get(&v) {
                let (x, y) = (find(&mut uf, i), find(&mut uf, k));
                uf[x.max(y)] = x.min(y);
            }
        }
    }
    (0..words.len()).filter(|&i| find(&mut uf, i) == i).count()
}

/// `C₂ ∘ C₁`: for components `(M, g)` of `C₁` and `(N, h)` of `C₂`, one
/// component `M ∩ g⁻¹δNδ⁻¹g` with map `h δ⁻¹ g` per double coset
/// `(gMg⁻¹)\Γb/N`.
pub fn compose_correspondences(c2: &HeckeCorrespondence, c1: &HeckeCorrespondence, rank: usize, word_bound: usize) -> Result<HeckeCorrespondence, HeckeError> {
    if c1.target != c2.source {
        return Err(HeckeError::Mismatch("correspondences do not share the middle group".into()));
    }
    let mut components = Vec::new();
    for m in &c1.components {
        // g M g⁻¹ = x⁻¹ M x with x = g⁻¹
        let a = conjugate_table(&m.middle, &m.g.inverse())?;
        for n in &c2.components {
            for dc in double_cosets(&a, &c1.target, &n.middle, rank, word_bound)? {
                let x = dc.representative.inverse().mul(&m.g);
                let stab = conjugate_table(&n.middle, &x)?;
                let middle = intersection_table(&m.middle, &stab)?;
                components.push(Component { middle, g: n.g.mul(&x) });
            }
        }
    }
    Ok(HeckeCorrespondence { source: c1.source.clone(), target: c2.target.clone(), components })
}

/// Index-`n` subgroup of a cyclic factor, `⟨γⁿ⟩`.
pub fn cyclic_subgroup(f: &SchottkyFactor, n: usize) -> Result<FiniteIndexSubgroup, GroupError> {
    let action = vec![(0..n).map(|c| (c + 1) % n).collect()];
    FiniteIndexSubgroup::new(f.clone(), CosetTable::from_action(action)?)
}

/// The index-2 subgroup where every generator swaps the two cosets.
pub fn parity_subgroup(f: &SchottkyFactor) -> Result<FiniteIndexSubgroup, GroupError> {
    FiniteIndexSubgroup::new(f.clone(), CosetTable::from_action(vec![vec![1, 0]; f.rank()])?)
}
