//! Invariant suite run by `plectic verify`: one batch of checks per module,
//! driven by a group config and its seed.

use num_bigint::BigInt;
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::GroupConfig;
use crate::error::{ConfigError, IntegrationError};
use crate::group::{PlecticGroup, SchottkyFactor};
use crate::hecke::{double_cosets, double_cosets_brute_force, functoriality_check, parity_subgroup, validate_morphism};
use crate::integration::{
    base_point, fubini_check, integrate_group, integrate_riemann, integrate_series_to, parse_point, period, CycleTerm, PlecticCycle,
    RiemannOptions,
};
use crate::jacobian::{kunneth_compose, kunneth_decompose, period_lattice, JacobianElement};
use crate::measures::{invariant_measure_lattice, quotient_complex, HLattice};
use crate::padic::{deserialize_padic, serialize_padic, PadicScalar, QuadExtScalar};
use crate::proj::{cross_ratio_factor, fixed_points, orientation_character, Pgl2, ProjPoint};
use crate::schreier::{CosetTable, FiniteIndexSubgroup};
use crate::tree::{balls_at_vertex, bfs_distance, reduction_map, TreeVertex};
use crate::words::{reduced_words, FreeWord};

pub const MODULES: [&str; 8] =
    ["padic-arith", "proj-geom", "bt-tree", "plectic-groups", "steinberg-measures", "integration", "jacobian", "hecke"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub module: &'static str,
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub config: String,
    pub suite: String,
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

struct Ctx<'a> {
    cfg: &'a GroupConfig,
    group: PlecticGroup,
    rng: ChaCha8Rng,
    opts: RiemannOptions,
    out: Vec<Check>,
    module: &'static str,
}

impl Ctx<'_> {
    fn push(&mut self, name: impl Into<String>, passed: bool, detail: impl Into<String>) {
        self.out.push(Check { module: self.module, name: name.into(), passed, detail: detail.into() });
    }

    fn record<T, E: std::fmt::Display>(&mut self, name: &str, r: Result<T, E>, ok: impl FnOnce(&T) -> (bool, String)) {
        match r {
            Ok(v) => {
                let (passed, detail) = ok(&v);
                self.push(name, passed, detail);
            }
            Err(e) => self.push(name, false, format!("error: {e}")),
        }
    }

    fn p(&self) -> u32 {
        self.cfg.p
    }

    fn n(&self) -> u32 {
        self.cfg.precision
    }

    fn rational(&mut self) -> BigRational {
        let num: i64 = self.rng.gen_range(-999..=999);
        let den: i64 = self.rng.gen_range(1..=99);
        let r = BigRational::new(BigInt::from(if num == 0 { 1 } else { num }), BigInt::from(den));
        let k: i32 = self.rng.gen_range(-2..=2);
        r * BigRational::from_integer(BigInt::from(self.p())).pow(k)
    }

    fn matrix(&mut self) -> Pgl2 {
        loop {
            let e: Vec<i64> = (0..4).map(|_| self.rng.gen_range(-30..=30)).collect();
            if e[0] * e[3] - e[1] * e[2] != 0 {
                return Pgl2::from_ints(e[0], e[1], e[2], e[3]).unwrap();
            }
        }
    }

    /// Point of the unramified quadratic extension off P¹(Q_p).
    fn ext_point(&mut self) -> ProjPoint {
        let a: i64 = self.rng.gen_range(-50..=50);
        let b: i64 = self.rng.gen_range(1..=20);
        let b = if b % self.p() as i64 == 0 { b + 1 } else { b };
        parse_point(&format!("{a}+{b}w"), self.p(), self.n()).unwrap()
    }
}

pub fn run_suite(cfg: &GroupConfig, suite: &str) -> Result<VerifyReport, ConfigError> {
    if suite != "all" && !MODULES.contains(&suite) {
        return Err(ConfigError::Invalid(format!("unknown suite {suite:?}")));
    }
    let group = cfg.build()?;
    let mut ctx = Ctx {
        cfg,
        group,
        rng: ChaCha8Rng::seed_from_u64(cfg.seed),
        opts: RiemannOptions::default(),
        out: Vec::new(),
        module: "",
    };
    for m in MODULES {
        if suite != "all" && suite != m {
            continue;
        }
        ctx.module = m;
        match m {
            "padic-arith" => padic_checks(&mut ctx),
            "proj-geom" => proj_checks(&mut ctx),
            "bt-tree" => tree_checks(&mut ctx),
            "plectic-groups" => group_checks(&mut ctx),
            "steinberg-measures" => measure_checks(&mut ctx),
            "integration" => integration_checks(&mut ctx),
            "jacobian" => jacobian_checks(&mut ctx),
            _ => hecke_checks(&mut ctx),
        }
    }
    Ok(VerifyReport { config: cfg.name.clone(), suite: suite.into(), checks: ctx.out })
}

fn padic_checks(c: &mut Ctx) {
    let (p, n) = (c.p(), c.n());
    let mut val_ok = true;
    let mut inv_ok = true;
    let mut ser_ok = true;
    for _ in 0..20 {
        let (r, s) = (c.rational(), c.rational());
        let (x, y) = (PadicScalar::from_rational(&r, p, n), PadicScalar::from_rational(&s, p, n));
        let (vx, vy) = (x.valuation().unwrap(), y.valuation().unwrap());
        val_ok &= x.mul(&y).unwrap().valuation() == Some(vx + vy);
        if let Ok(sum) = x.add(&y) {
            let v = sum.valuation().unwrap();
            val_ok &= v >= vx.min(vy) && (vx == vy || v == vx.min(vy));
        }
        inv_ok &= x.inv().unwrap().precision() == x.precision();
        ser_ok &= deserialize_padic(&serialize_padic(&x), p).as_ref() == Ok(&x);
    }
    c.push("valuation is multiplicative and ultrametric", val_ok, "20 random pairs");
    c.push("inversion keeps relative precision", inv_ok, "20 samples");
    c.push("serialization round trip", ser_ok, "20 samples");
    let mut frob_ok = true;
    for _ in 0..10 {
        let (x, y) = (c.ext_point().affine().unwrap(), c.ext_point().affine().unwrap());
        let f = |z: &QuadExtScalar| z.frobenius().unwrap();
        frob_ok &= f(&x.add(&y).unwrap()).agreement_digits(&f(&x).add(&f(&y)).unwrap()) >= n - 2;
        frob_ok &= f(&x.mul(&y).unwrap()).agreement_digits(&f(&x).mul(&f(&y)).unwrap()) >= n - 2;
        frob_ok &= f(&f(&x)).agreement_digits(&x) >= n - 2;
    }
    c.push("frobenius is an involutive ring homomorphism", frob_ok, "10 random pairs");
}

fn proj_checks(c: &mut Ctx) {
    let (p, n) = (c.p(), c.n());
    let mut law = true;
    for _ in 0..20 {
        let (g, h) = (c.matrix(), c.matrix());
        let z = c.ext_point();
        law &= g.compose(&h).apply(&z).unwrap().agreement_digits(&g.apply(&h.apply(&z).unwrap()).unwrap()) >= n - 4;
    }
    c.push("action law (gh)z = g(hz)", law, "20 random triples");
    let mut cov = true;
    for _ in 0..10 {
        let g = c.matrix();
        let (x, y, t1, t2) = (c.ext_point(), c.ext_point(), c.ext_point(), c.ext_point());
        let q = |t: &ProjPoint| -> Result<QuadExtScalar, crate::error::GeomError> {
            let a = cross_ratio_factor(&g.apply(t)?, &g.apply(&x)?, &g.apply(&y)?)?;
            Ok(a.div(&cross_ratio_factor(t, &x, &y)?)?)
        };
        cov &= match (q(&t1), q(&t2)) {
            (Ok(a), Ok(b)) => a.agreement_digits(&b) >= n / 2,
            _ => false,
        };
    }
    c.push("cross-ratio factor covariance", cov, "10 random samples");
    let mut fixed = true;
    let mut detail = String::new();
    for (k, f) in c.group.factors().iter().enumerate() {
        let Some(s) = f.schottky() else { continue };
        for (j, g) in s.generators().iter().enumerate() {
            match fixed_points(g, p, n) {
                Ok(fp) => {
                    let d = g.apply(&fp.attracting).unwrap().agreement_digits(&fp.attracting);
                    let ok = d >= n / 2 && fp.multiplier.valuation().unwrap_or(0) > 0;
                    fixed &= ok;
                    detail += &format!("place {k} gen {j}: {d} digits; ");
                }
                Err(e) => {
                    fixed = false;
                    detail += &format!("place {k} gen {j}: {e}; ");
                }
            }
        }
    }
    c.push("generator fixed points", fixed, detail);
    let mut hom = true;
    for _ in 0..20 {
        let (g, h) = (c.matrix(), c.matrix());
        hom &= orientation_character(&[g.compose(&h)], p) == orientation_character(&[g.clone()], p) * orientation_character(&[h], p);
    }
    c.push("orientation character is a homomorphism", hom, "20 random pairs");
}

fn tree_checks(c: &mut Ctx) {
    let p = c.p();
    let o = TreeVertex::standard(p);
    let valence = o.neighbors().len() == p as usize + 1 && o.neighbors().iter().all(|w| w.neighbors().len() == p as usize + 1);
    c.push("valence p+1", valence, format!("p = {p}"));
    let radius = if p <= 5 { 6 } else { 4 };
    let mut dist = true;
    for _ in 0..20 {
        let mut v = o.clone();
        for _ in 0..c.rng.gen_range(0..=radius) {
            let nb = v.neighbors();
            v = nb[c.rng.gen_range(0..nb.len())].clone();
        }
        dist &= bfs_distance(&o, &v, radius as u32) == Some(o.distance(&v) as u32);
    }
    c.push(format!("closed-form distance matches BFS to radius {radius}"), dist, "20 random walks");
    let mut eq = true;
    for _ in 0..50 {
        let g = c.matrix();
        let z = c.ext_point();
        eq &= match (reduction_map(&g.apply(&z).unwrap()), reduction_map(&z)) {
            (Ok(a), Ok(b)) => a == b.act(&g),
            _ => false,
        };
    }
    c.push("reduction map equivariance", eq, "50 random samples");
    let mut part = true;
    for _ in 0..20 {
        let z = c.ext_point();
        let v = reduction_map(&z).unwrap();
        let w = v.neighbors()[c.rng.gen_range(0..=p as usize)].clone();
        let balls = balls_at_vertex(&w);
        let r = c.rational();
        let pt = ProjPoint::from_rational(&r, p, c.n());
        part &= balls.iter().filter(|b| b.contains(&pt).unwrap_or(false)).count() == 1;
        part &= balls.iter().all(|b| b.children().len() == p as usize);
    }
    c.push("balls at a vertex partition P1(Q_p)", part, "20 random vertices");
}

fn group_checks(c: &mut Ctx) {
    let factors: Vec<(usize, SchottkyFactor)> =
        c.group.factors().iter().enumerate().filter_map(|(k, f)| f.schottky().map(|s| (k, s.clone()))).collect();
    for (k, f) in factors {
        let len = if f.rank() == 1 { 5 } else { 3 };
        let words = f.enumerate_words(len);
        let mut mats: Vec<String> = words.iter().map(|(_, m)| format!("{m:?}")).collect();
        mats.sort();
        mats.dedup();
        c.push(format!("place {k}: freeness to length {len}"), mats.len() == words.len(), format!("{} words", words.len()));
        let member = words.iter().take(40).all(|(w, m)| f.membership_word(m, len).as_ref() == Some(w));
        c.push(format!("place {k}: membership words"), member, "first 40 words");
        let r = parity_subgroup(&f).map(|s| s.rank());
        let expected = 2 * (f.rank() - 1) + 1;
        c.record(&format!("place {k}: Nielsen-Schreier rank of the parity subgroup"), r, |&r| (r == expected, format!("{r} (expected {expected})")));
        let h = Pgl2::from_ints(1, 1, 0, 1).unwrap();
        let conj = f.conjugate(&h);
        c.record(&format!("place {k}: conjugate factor certifies"), conj, |g| {
            let ok = g.generators().iter().zip(f.generators()).all(|(a, b)| *a == b.conjugate_by(&h));
            (ok, "generators are h g h^-1".into())
        });
    }
}

fn measure_checks(c: &mut Ctx) {
    let depth = c.cfg.depth;
    let ranks = c.group.ranks();
    let expected: usize = if ranks.contains(&0) { 0 } else { ranks.iter().product() };
    let lattice = invariant_measure_lattice(&c.group, depth);
    c.record("lattice rank is the product of factor ranks", lattice.as_ref(), |l| (l.rank == expected, format!("rank {} for ranks {ranks:?}", l.rank)));
    let Ok(lattice) = lattice else { return };
    let qc = quotient_complex(&c.group, depth);
    c.record("basis flows are harmonic", qc.as_ref(), |q| {
        let ok = q.graphs.iter().flatten().all(|g| g.basis().iter().all(|b| g.is_harmonic(b)));
        (ok, format!("betti {:?}", q.betti))
    });
    if lattice.rank == 0 {
        return;
    }
    let p = c.p();
    let mut mass = true;
    let mut inv = true;
    for _ in 0..10 {
        let v = reduction_map(&c.ext_point()).unwrap();
        let fixed: Vec<_> = lattice.places.iter().map(|_| balls_at_vertex(&v)[0].clone()).collect();
        for place in 0..lattice.places.len() {
            let mut total = vec![0i64; lattice.rank];
            for b in balls_at_vertex(&v) {
                let mut tuple = fixed.clone();
                tuple[place] = b;
                match lattice.measure_of_balls(&tuple) {
                    Ok(m) => total.iter_mut().zip(m).for_each(|(t, x)| *t += x),
                    Err(_) => mass = false,
                }
            }
            mass &= total.iter().all(|&t| t == 0);
        }
        let place = c.rng.gen_range(0..lattice.places.len());
        let f = c.group.schottky(place).unwrap().clone();
        let words = reduced_words(f.rank(), 3);
        let w = &words[c.rng.gen_range(0..words.len())];
        let g = f.evaluate(w);
        let mut moved = fixed.clone();
        moved[place] = fixed[place].image(&g);
        inv &= matches!((lattice.measure_of_balls(&fixed), lattice.measure_of_balls(&moved)), (Ok(a), Ok(b)) if a == b);
    }
    c.push(format!("total mass zero at each place (p = {p})"), mass, "10 random vertices");
    c.push("measures are invariant under the group", inv, "10 random elements of length <= 3");
    let deeper = invariant_measure_lattice(&c.group, depth + 1);
    c.record("depth stability", deeper, |d| (d.rank == lattice.rank, format!("rank {} at depth {}", d.rank, depth + 1)));
}

fn whole(f: &SchottkyFactor) -> HLattice {
    HLattice::for_subgroup(&FiniteIndexSubgroup::whole(f.clone()))
}

fn sample_cycle(c: &Ctx) -> Result<PlecticCycle, ConfigError> {
    match c.cfg.default_cycle()? {
        Some(d) => Ok(d),
        None => {
            let places = (0..c.group.places())
                .map(|k| match c.group.schottky(k) {
                    Ok(f) => (base_point(f, 0), base_point(f, 1)),
                    Err(_) => (ProjPoint::from_int(0, c.p(), c.n()), ProjPoint::from_int(1, c.p(), c.n())),
                })
                .collect();
            Ok(PlecticCycle::elementary(places))
        }
    }
}

fn integration_checks(c: &mut Ctx) {
    let opts = c.opts.clone();
    let d = match sample_cycle(c) {
        Ok(d) => d,
        Err(e) => return c.push("sample cycle", false, e.to_string()),
    };
    let base = integrate_group(&c.group, &d, &opts);
    c.record("integral stabilizes", base.as_ref(), |r| (true, format!("{:?} stable digits at depth {}", r.stable_digits, r.depth)));
    let Ok(base) = base else { return };
    let twice = integrate_group(&c.group, &d.add(&d), &opts);
    c.record("bilinearity", twice, |r| {
        let sq = base.mul(&base);
        let digits = r.values.iter().zip(&sq.values).map(|(a, b)| a.agreement_digits(b).unwrap_or(0)).min().unwrap_or(u32::MAX);
        (digits >= opts.output_digits, format!("{digits} digits"))
    });
    // translate by one group element at each nontrivial place
    let g: Vec<Pgl2> = (0..c.group.places())
        .map(|k| c.group.schottky(k).map(|f| f.evaluate(&FreeWord::parse("aA").unwrap().mul(&FreeWord::parse("a").unwrap()))).unwrap_or(Pgl2::identity()))
        .collect();
    let moved = d.translate(&g).map_err(IntegrationError::from).and_then(|m| integrate_group(&c.group, &m, &opts));
    c.record("invariance under the group", moved, |r| {
        let digits = r.values.iter().zip(&base.values).map(|(a, b)| a.agreement_digits(b).unwrap_or(0)).min().unwrap_or(u32::MAX);
        (digits >= opts.output_digits, format!("{digits} digits"))
    });
    if c.group.places() == 1 {
        if let Ok(f) = c.group.schottky(0) {
            let f = f.clone();
            let (x, y) = d.terms[0].places[0].clone();
            let mut worst = u32::MAX;
            let mut err = None;
            for i in 0..f.rank() {
                match integrate_series_to(&f, i, &x, &y, opts.output_digits + opts.guard_digits, 24) {
                    Ok(s) => worst = worst.min(s.value.agreement_digits(&base.scalars().unwrap()[i])),
                    Err(e) => err = Some(e),
                }
            }
            match err {
                Some(e) => c.push("riemann and series agree", false, e.to_string()),
                None => c.push("riemann and series agree", worst >= opts.output_digits, format!("{worst} digits")),
            }
            let mut per_base = true;
            let periods: Vec<_> = (0..3).map(|k| period(&f, 0, 0, &base_point(&f, k), &opts)).collect();
            for q in &periods[1..] {
                per_base &= matches!((q, &periods[0]), (Ok(a), Ok(b)) if a.agreement_digits(b) >= opts.output_digits);
            }
            c.push("periods are independent of the base point", per_base, "3 base points");
            let (xe, ye) = (c.ext_point(), c.ext_point());
            let de = PlecticCycle::single(xe, ye);
            let lat = whole(&f);
            let galois = (|| -> Result<u32, IntegrationError> {
                let a = integrate_riemann(&lat, &de, &opts)?.scalars()?;
                let b = integrate_riemann(&lat, &de.frobenius()?, &opts)?.scalars()?;
                Ok(a.iter().zip(&b).map(|(u, v)| u.frobenius().map_or(0, |fu| fu.agreement_digits(v))).min().unwrap())
            })();
            c.record("frobenius equivariance", galois, |&g| (g >= opts.output_digits, format!("{g} digits")));
        }
    } else if c.group.ranks().iter().all(|&r| r > 0) {
        let rep = fubini_check(&c.group, &d.terms[0].places, &opts);
        c.record("fubini factorization", rep, |r| (r.passed(), format!("{:?}", r.entries.iter().map(|e| e.digits).collect::<Vec<_>>())));
    }
}

fn jacobian_checks(c: &mut Ctx) {
    let opts = c.opts.clone();
    let lattice = period_lattice(&c.group, &opts);
    c.record("period lattice", lattice.as_ref(), |l| (true, format!("{} places", l.places.len())));
    let Ok(lattice) = lattice else { return };
    for (k, fp) in lattice.places.iter().enumerate() {
        let Some(fp) = fp else { continue };
        if fp.rank() >= 2 {
            let s = fp.symmetry_digits();
            c.push(format!("place {k}: period matrix is symmetric"), s >= opts.output_digits, format!("{s} digits"));
        }
        let f = c.group.schottky(k).unwrap().clone();
        let kills = (|| -> Result<bool, crate::error::JacobianError> {
            let x = base_point(&f, 2);
            let mut ok = true;
            for g in f.generators() {
                let u = integrate_riemann(&whole(&f), &PlecticCycle::single(g.apply(&x)?, x.clone()), &opts)?.scalars()?;
                ok &= JacobianElement { factors: vec![fp.reduce(&u)?] }.identity_digits() >= opts.output_digits;
            }
            Ok(ok)
        })();
        c.record(&format!("place {k}: abel-jacobi kills periods"), kills, |&b| (b, String::new()));
        if fp.rank() == 1 {
            let q = fp.matrix[0][0].clone();
            let u = c.ext_point().affine().unwrap();
            let normal = (|| -> Result<bool, crate::error::JacobianError> {
                let a = fp.reduce(&[u.clone()])?;
                let b = fp.reduce(&[u.mul(&q.pow(3)?)?])?;
                let v = a[0].valuation().unwrap();
                Ok(a == b && v >= 0 && v < q.valuation().unwrap())
            })();
            c.record(&format!("place {k}: tate normal form is unique"), normal, |&b| (b, String::new()));
        }
    }
    if c.group.places() > 1 && c.group.ranks().iter().all(|&r| r > 0) {
        let ranks = c.group.ranks();
        let mut rt = true;
        for _ in 0..5 {
            let parts: Vec<JacobianElement> = ranks
                .iter()
                .map(|&r| JacobianElement { factors: vec![(0..r).map(|_| c.ext_point().affine().unwrap()).collect()] })
                .collect();
            rt &= kunneth_decompose(&kunneth_compose(&parts)) == parts;
        }
        c.push("kunneth round trip", rt, "5 random elements");
    }
}

fn hecke_checks(c: &mut Ctx) {
    let opts = c.opts.clone();
    let Some(&k) = c.group.support().first() else {
        return c.push("no nontrivial place", true, "skipped");
    };
    let f = c.group.schottky(k).unwrap().clone();
    let d = match sample_cycle(c) {
        Ok(d) => d,
        Err(e) => return c.push("sample cycle", false, e.to_string()),
    };
    let sample = PlecticCycle { terms: d.terms.iter().map(|t| CycleTerm { coeff: t.coeff, places: vec![t.places[k].clone()] }).collect() };
    let sub = parity_subgroup(&f).unwrap();
    let m = validate_morphism(&Pgl2::identity(), &sub, &FiniteIndexSubgroup::whole(f.clone()), c.cfg.word_bound);
    c.record(&format!("place {k}: index-2 inclusion"), m.as_ref(), |m| (m.index == 2, format!("index {}", m.index)));
    let Ok(m) = m else { return };
    let rep = functoriality_check(&m, &[sample.clone()], &opts);
    c.record(&format!("place {k}: functoriality squares"), rep, |r| (r.passed(), format!("push {:?} pull {:?}", r.push_digits, r.pull_digits)));
    let pulled = crate::hecke::pullback_cycles(&m, &sample);
    c.record("pullback keeps degree zero", pulled, |p| (p.degree().iter().all(|&x| x == 0) && p.terms.len() == 2 * sample.terms.len(), format!("{} terms", p.terms.len())));
    let t = sub.table().clone();
    let w = CosetTable::trivial(f.rank());
    let dc = double_cosets(&t, &w, &t, f.rank(), c.cfg.word_bound);
    let brute = double_cosets_brute_force(&t, &w, &t, f.rank(), 4);
    c.record("double cosets match enumeration", dc, |d| (d.len() == brute, format!("{} vs {brute}", d.len())));
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tate_suite_passes() {
        let cfg = GroupConfig::parse(
            r#"{"name": "tate", "p": 5, "precision": 40, "places": [{"kind": "cyclic", "generator": [["5", "0"], ["0", "1"]]}],
            "cycle": [{"coeff": 1, "places": [{"x": "2", "y": "3"}]}]}"#,
        )
        .unwrap();
        let rep = run_suite(&cfg, "all").unwrap();
        let failed: Vec<_> = rep.checks.iter().filter(|c| !c.passed).collect();
        assert!(failed.is_empty(), "{failed:#?}");
        assert!(run_suite(&cfg, "nope").is_err());
    }
}
