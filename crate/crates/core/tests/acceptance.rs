//! Acceptance suite: one line per criterion, `criterion N ... PASS|FAIL`.

use std::path::Path;
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use plectic::config::{GroupConfig, MorphismConfig};
use plectic::group::{Factor, PlecticGroup, SchottkyFactor};
use plectic::hecke::{functoriality_check, lattice_maps, validate_morphism};
use plectic::integration::{
    base_point, fubini_check, integrate_group, integrate_riemann, integrate_series_to, parse_point, period, MultiplicativeTensor,
    PlecticCycle, RiemannOptions,
};
use plectic::intlin::mat_mul;
use plectic::jacobian::{abel_jacobi, commensurability_check, kunneth_compose, kunneth_decompose, period_lattice, Commensurability, JacobianElement};
use plectic::measures::{invariant_measure_lattice, quotient_complex, FundamentalDomain, HLattice};
use plectic::padic::{PadicScalar, QuadExtScalar};
use plectic::proj::{Pgl2, ProjPoint};
use plectic::schreier::FiniteIndexSubgroup;
use plectic::tree::{balls_at_vertex, bfs_distance, reduction_map, TreeVertex};
use plectic::words::reduced_words;

fn load(name: &str) -> (GroupConfig, PlecticGroup) {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name);
    let cfg = GroupConfig::load(path).unwrap();
    let g = cfg.build().unwrap();
    (cfg, g)
}

fn morphism(name: &str) -> MorphismConfig {
    MorphismConfig::load(Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)).unwrap()
}

fn rat(a: i64, b: i64) -> BigRational {
    BigRational::new(BigInt::from(a), BigInt::from(b))
}

/// Runs `body`, prints the criterion line and fails the test on a miss.
fn criterion(n: u32, title: &str, budget: Duration, body: impl FnOnce() -> Result<String, String>) {
    let start = Instant::now();
    let outcome = body();
    let elapsed = start.elapsed();
    let (ok, detail) = match outcome {
        Ok(d) => (elapsed <= budget, d),
        Err(d) => (false, d),
    };
    println!(
        "criterion {n:>2} {title}: {} ({detail}; {:.2}s of {}s)",
        if ok { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        budget.as_secs()
    );
    assert!(ok, "criterion {n} failed: {detail}");
}

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn e<E: std::fmt::Display>(x: E) -> String {
    x.to_string()
}

fn single(f: &SchottkyFactor) -> PlecticGroup {
    PlecticGroup::new(f.prime(), f.precision(), vec![Factor::Schottky(f.clone())])
}

/// Random rational point of `P¹(Q_p)` outside every generator ball.
fn outside_point(f: &SchottkyFactor, rng: &mut ChaCha8Rng) -> ProjPoint {
    loop {
        let r = rat(rng.gen_range(-500..=500), rng.gen_range(1..=40));
        let z = ProjPoint::from_rational(&r, f.prime(), f.precision());
        if f.balls().iter().all(|b| !b.contains(&z).unwrap_or(true)) {
            return z;
        }
    }
}

fn unramified(s: &str, p: u32, prec: u32) -> ProjPoint {
    parse_point(s, p, prec).unwrap()
}

#[test]
fn criterion_01_tate_oracle() {
    criterion(1, "Tate period and Abel-Jacobi", Duration::from_secs(1), || {
        let (cfg, g) = load("tate.json");
        let opts = RiemannOptions::default();
        let lattice = period_lattice(&g, &opts).map_err(e)?;
        let q = &lattice.places[0].as_ref().unwrap().matrix[0][0];
        check(q.is_base() && q.re().to_rational() == rat(5, 1) && q.agreement_digits(&QuadExtScalar::from_int(5, 5, cfg.precision)) >= cfg.precision, format!("period {q:?}"))?;
        let d = cfg.default_cycle().unwrap().unwrap();
        let aj = abel_jacobi(&g, &lattice, &d, &opts).map_err(e)?;
        let u = &aj.factors[0][0];
        let exact = PadicScalar::from_rational(&rat(2, 3), 5, cfg.precision);
        let digits = u.re().agreement_digits(&exact);
        check(u.is_base() && u.valuation() == Some(0) && digits >= 30, format!("AJ digits {digits}"))?;
        Ok(format!("q = 5 exactly, AJ = 2/3 to {digits} digits"))
    });
}

#[test]
fn criterion_02_dual_algorithm_agreement() {
    criterion(2, "Riemann vs series on rank 2 over Q5", Duration::from_secs(60), || {
        let (cfg, g) = load("rank2_q5.json");
        let f = g.schottky(0).unwrap().clone();
        let lattice = HLattice::for_subgroup(&FiniteIndexSubgroup::whole(f.clone()));
        let opts = RiemannOptions::default();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut worst = u32::MAX;
        for _ in 0..5 {
            let (x, y) = (outside_point(&f, &mut rng), outside_point(&f, &mut rng));
            let r = integrate_riemann(&lattice, &PlecticCycle::single(x.clone(), y.clone()), &opts).map_err(e)?;
            let stable = *r.stable_digits.iter().min().unwrap();
            check(stable >= 20, format!("only {stable} stabilized digits"))?;
            let vals = r.scalars().map_err(e)?;
            for i in 0..2 {
                let s = integrate_series_to(&f, i, &x, &y, 28, 24).map_err(e)?;
                worst = worst.min(vals[i].agreement_digits(&s.value));
            }
        }
        check(worst >= 20, format!("agreement {worst}"))?;
        Ok(format!("5 cycles x 2 coordinates, min agreement {worst} digits"))
    });
}

#[test]
fn criterion_03_period_symmetry() {
    criterion(3, "period matrix symmetry", Duration::from_secs(60), || {
        let mut report = Vec::new();
        for (name, place) in [("rank2_q5.json", 0), ("rank2_q3.json", 0), ("cyclic_rank2.json", 1)] {
            let (_, g) = load(name);
            let f = g.schottky(place).unwrap();
            let lattice = period_lattice(&single(f), &RiemannOptions::default()).map_err(e)?;
            let s = lattice.places[0].as_ref().unwrap().symmetry_digits();
            check(s >= 20, format!("{name}: {s} digits"))?;
            report.push(format!("{name} {s}"));
        }
        Ok(report.join(", "))
    });
}

#[test]
fn criterion_04_fubini() {
    criterion(4, "Fubini factorization", Duration::from_secs(120), || {
        let opts = RiemannOptions::default();
        let mut detail = Vec::new();
        for name in ["cyclic_cyclic.json", "cyclic_rank2.json"] {
            let (cfg, g) = load(name);
            let d = cfg.default_cycle().unwrap().unwrap();
            let rep = fubini_check(&g, &d.terms[0].places, &opts).map_err(e)?;
            let min = rep.entries.iter().map(|x| x.digits).min().unwrap();
            check(rep.passed(), format!("{name}: {min} digits"))?;
            detail.push(format!("{name} {min}"));
        }
        let (cfg, g) = load("cyclic_cyclic.json");
        let d = cfg.default_cycle().unwrap().unwrap();
        let joint = integrate_group(&g, &d, &opts).map_err(e)?;
        let closed = MultiplicativeTensor::elementary(vec![
            QuadExtScalar::from_rational(&rat(2, 3), 5, cfg.precision),
            QuadExtScalar::from_rational(&rat(7, 1), 5, cfg.precision),
        ]);
        let c = joint.values[0].agreement_digits(&closed).map_err(e)?;
        let prec = joint.values[0].canonical().map_err(e)?.unwrap().iter().map(QuadExtScalar::precision).min().unwrap();
        check(c >= prec, format!("closed form {c} of {prec} digits"))?;
        detail.push(format!("closed form 2/3 (x) 7 to all {prec} digits"));
        Ok(detail.join(", "))
    });
}

#[test]
fn criterion_05_kunneth() {
    criterion(5, "Kunneth round trip and AJ compatibility", Duration::from_secs(60), || {
        let (cfg, g) = load("cyclic_rank2.json");
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let ranks = g.ranks();
        for _ in 0..20 {
            let parts: Vec<JacobianElement> = ranks
                .iter()
                .map(|&r| {
                    let v = (0..r)
                        .map(|_| QuadExtScalar::from_rational(&rat(rng.gen_range(1..999), rng.gen_range(1..99)), cfg.p, cfg.precision))
                        .collect();
                    JacobianElement { factors: vec![v] }
                })
                .collect();
            let composed = kunneth_compose(&parts);
            check(kunneth_decompose(&composed) == parts, "round trip")?;
            check(composed.values().len() == ranks.iter().product::<usize>(), "tensor size")?;
        }
        let opts = RiemannOptions::default();
        let d = cfg.default_cycle().unwrap().unwrap();
        let lattice = period_lattice(&g, &opts).map_err(e)?;
        let joint = abel_jacobi(&g, &lattice, &d, &opts).map_err(e)?;
        let mut parts = Vec::new();
        for k in 0..2 {
            let gk = single(g.schottky(k).unwrap());
            let lk = period_lattice(&gk, &opts).map_err(e)?;
            let dk = PlecticCycle::single(d.terms[0].places[k].0.clone(), d.terms[0].places[k].1.clone());
            parts.push(abel_jacobi(&gk, &lk, &dk, &opts).map_err(e)?);
        }
        let digits = joint.agreement_digits(&kunneth_compose(&parts)).map_err(e)?;
        check(digits >= 20, format!("AJ compatibility {digits}"))?;
        Ok(format!("20 round trips exact, AJ(X x X') = AJ(X) (x) AJ(X') to {digits} digits"))
    });
}

#[test]
fn criterion_06_lattice_ranks() {
    criterion(6, "measure lattice ranks", Duration::from_secs(30), || {
        let mut detail = Vec::new();
        for (name, expected) in [("tate.json", 1), ("rank2_q5.json", 2), ("cyclic_cyclic.json", 1), ("cyclic_rank2.json", 2)] {
            let (cfg, g) = load(name);
            let lattice = invariant_measure_lattice(&g, cfg.depth).map_err(e)?;
            check(lattice.rank == expected, format!("{name}: rank {}", lattice.rank))?;
            let qc = quotient_complex(&g, cfg.depth).map_err(e)?;
            for q in qc.graphs.iter().flatten() {
                check(q.basis().iter().all(|b| q.is_harmonic(b)), format!("{name}: quotient flow not harmonic"))?;
            }
            // antisymmetry and harmonicity on the tree, total mass zero
            for k in 0..g.places() {
                let f = g.schottky(k).unwrap();
                let dom = FundamentalDomain::new(f);
                let q = qc.graphs[k].as_ref().unwrap();
                let tree = dom.limit_tree(2);
                for edge in &tree.edges {
                    let (a, b) = (q.evaluate_edge(edge).map_err(e)?, q.evaluate_edge(&edge.reverse()).map_err(e)?);
                    check(a.iter().zip(&b).all(|(x, y)| x + y == 0), format!("{name}: antisymmetry"))?;
                }
                for v in &tree.vertices {
                    let mut total = vec![0i64; q.betti()];
                    for w in v.neighbors() {
                        let m = q.evaluate_edge(&plectic::tree::DirectedEdge::new(v.clone(), w)).map_err(e)?;
                        total.iter_mut().zip(m).for_each(|(t, x)| *t += x);
                    }
                    check(total.iter().all(|&t| t == 0), format!("{name}: harmonicity at {v:?}"))?;
                }
            }
            let o = TreeVertex::standard(cfg.p);
            let fixed: Vec<_> = (0..g.places()).map(|_| balls_at_vertex(&o)[0].clone()).collect();
            for k in 0..g.places() {
                let mut total = vec![0i64; lattice.rank];
                for b in balls_at_vertex(&o) {
                    let mut t = fixed.clone();
                    t[k] = b;
                    total.iter_mut().zip(lattice.measure_of_balls(&t).map_err(e)?).for_each(|(s, x)| *s += x);
                }
                check(total.iter().all(|&t| t == 0), format!("{name}: total mass at place {k}"))?;
            }
            detail.push(format!("{:?} -> {}", g.ranks(), lattice.rank));
        }
        Ok(detail.join(", "))
    });
}

#[test]
fn criterion_07_invariance() {
    criterion(7, "invariance suite", Duration::from_secs(120), || {
        let (cfg, g) = load("rank2_q5.json");
        let f = g.schottky(0).unwrap().clone();
        let opts = RiemannOptions::default();
        let d = cfg.default_cycle().unwrap().unwrap();
        let base = integrate_group(&g, &d, &opts).map_err(e)?;
        let mut inv = u32::MAX;
        let words = reduced_words(2, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        for _ in 0..3 {
            let w = &words[rng.gen_range(1..words.len())];
            let moved = integrate_group(&g, &d.translate(&[f.evaluate(w)]).map_err(e)?, &opts).map_err(e)?;
            for (a, b) in moved.values.iter().zip(&base.values) {
                inv = inv.min(a.agreement_digits(b).map_err(e)?);
            }
        }
        check(inv >= 20, format!("group invariance {inv}"))?;

        let mut bp = u32::MAX;
        for j in 0..2 {
            for i in 0..2 {
                let q0 = period(&f, j, i, &base_point(&f, 0), &opts).map_err(e)?;
                for k in 1..5 {
                    bp = bp.min(period(&f, j, i, &base_point(&f, k), &opts).map_err(e)?.agreement_digits(&q0));
                }
            }
        }
        check(bp >= 20, format!("base point {bp}"))?;

        let h = Pgl2::from_ints(2, 1, 1, 1).unwrap();
        let conj = f.conjugate(&h).map_err(e)?;
        for depth in 1..=3 {
            let (a, b) = (f.limit_set_approx(depth), conj.limit_set_approx(depth));
            let mut moved: Vec<_> = a.cover.iter().map(|x| x.image(&h)).collect();
            let mut theirs = b.cover.clone();
            moved.sort();
            theirs.sort();
            check(moved == theirs, format!("conjugated cover differs at depth {depth}"))?;
            let pts_ok = a.points.len() == b.points.len()
                && a.points.iter().all(|z| {
                    let hz = h.apply(z).unwrap();
                    b.points.iter().any(|w| w.agreement_digits(&hz) >= 20)
                });
            check(pts_ok, format!("conjugated points differ at depth {depth}"))?;
        }

        let lattice = HLattice::for_subgroup(&FiniteIndexSubgroup::whole(f.clone()));
        let de = PlecticCycle::single(unramified("7+w", 5, 40), unramified("-3+2w", 5, 40));
        let a = integrate_riemann(&lattice, &de, &opts).map_err(e)?.scalars().map_err(e)?;
        let b = integrate_riemann(&lattice, &de.frobenius().map_err(e)?, &opts).map_err(e)?.scalars().map_err(e)?;
        let gal = a.iter().zip(&b).map(|(x, y)| x.frobenius().unwrap().agreement_digits(y)).min().unwrap();
        check(gal >= 20, format!("galois {gal}"))?;
        Ok(format!("invariance {inv}, base point {bp}, conjugation exact to depth 3, frobenius {gal} digits"))
    });
}

#[test]
fn criterion_08_hecke() {
    criterion(8, "Hecke functoriality", Duration::from_secs(60), || {
        let opts = RiemannOptions::default();
        let mut detail = Vec::new();
        for (cfg_name, m_name) in [("tate.json", "index2_cyclic.morphism.json"), ("rank2_q5.json", "index2_rank2.morphism.json")] {
            let (cfg, g) = load(cfg_name);
            let m = morphism(m_name);
            let place = m.place(&g).unwrap();
            let f = g.schottky(place).unwrap();
            let mm = validate_morphism(&m.matrix(place).unwrap(), &m.source.build(f).unwrap(), &m.target.build(f).unwrap(), m.word_bound)
                .map_err(e)?;
            check(mm.index == 2, format!("{cfg_name}: index {}", mm.index))?;
            let maps = lattice_maps(&mm).map_err(e)?;
            let n = maps.push.len();
            let scaled: Vec<Vec<i64>> = (0..n).map(|i| (0..n).map(|j| if i == j { 2 } else { 0 }).collect()).collect();
            check(mat_mul(&maps.push, &maps.pull) == scaled, format!("{cfg_name}: transfer"))?;
            if n == maps.pull.len() {
                check(mat_mul(&maps.pull, &maps.push) == scaled, format!("{cfg_name}: reverse transfer"))?;
            }
            let samples = m.samples.iter().map(|s| PlecticCycle::from_records(s, cfg.p, cfg.precision).unwrap()).collect::<Vec<_>>();
            let rep = functoriality_check(&mm, &samples, &opts).map_err(e)?;
            check(rep.passed(), format!("{cfg_name}: {rep:?}"))?;
            let min = rep.push_digits.iter().chain(&rep.pull_digits).min().unwrap();
            detail.push(format!("{cfg_name} squares to {min} digits"));
        }
        Ok(detail.join(", "))
    });
}

#[test]
fn criterion_09_tree() {
    criterion(9, "tree and reduction map", Duration::from_secs(10), || {
        let p = 5;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mat = |rng: &mut ChaCha8Rng| loop {
            let v: Vec<i64> = (0..4).map(|_| rng.gen_range(-40..=40)).collect();
            if v[0] * v[3] != v[1] * v[2] {
                return Pgl2::from_ints(v[0], v[1], v[2], v[3]).unwrap();
            }
        };
        for _ in 0..50 {
            let g = mat(&mut rng);
            let z = unramified(&format!("{}+{}w", rng.gen_range(-60..60), rng.gen_range(1..5)), p, 30);
            let (a, b) = (reduction_map(&g.apply(&z).unwrap()).map_err(e)?, reduction_map(&z).map_err(e)?);
            check(a == b.act(&g), "reduction equivariance")?;

            let v = b;
            let balls = balls_at_vertex(&v);
            check(balls.len() == p as usize + 1, "p+1 balls")?;
            let pt = ProjPoint::from_rational(&rat(rng.gen_range(-999..999), rng.gen_range(1..50)), p, 30);
            check(balls.iter().filter(|x| x.contains(&pt).unwrap()).count() == 1, "partition at vertex")?;
            for (i, x) in balls.iter().enumerate() {
                check(x.edge().reverse().ball() == x.complement(), "reverse edge is complement")?;
                for y in &balls[i + 1..] {
                    check(x.is_disjoint_from(y), "balls at vertex overlap")?;
                }
                let kids = x.children();
                check(kids.iter().all(|c| c.is_subset_of(x)), "child not inside parent")?;
                if x.contains(&pt).unwrap() {
                    check(kids.iter().filter(|c| c.contains(&pt).unwrap()).count() == 1, "refinement")?;
                } else {
                    check(kids.iter().all(|c| !c.contains(&pt).unwrap()), "refinement outside")?;
                }
            }
        }
        let o = TreeVertex::standard(p);
        for _ in 0..50 {
            let mut v = o.clone();
            for _ in 0..rng.gen_range(0..=6) {
                let nb = v.neighbors();
                v = nb[rng.gen_range(0..nb.len())].clone();
            }
            check(bfs_distance(&o, &v, 6) == Some(o.distance(&v) as u32), format!("distance to {v:?}"))?;
        }
        Ok("50 equivariance and partition samples, 50 BFS distances to radius 6".into())
    });
}

#[test]
fn criterion_10_commensurability() {
    criterion(10, "commensurability", Duration::from_secs(1), || {
        let c = |a: i64, b: i64| commensurability_check(&rat(a, 1), &rat(b, 1), 5).map_err(e);
        check(c(5, 25)? == Commensurability::Yes { a: 2, b: 1 }, "(5,25)")?;
        check(c(5, 10)? == Commensurability::No, "(5,10)")?;
        check(c(5, 5)? == Commensurability::Yes { a: 1, b: 1 }, "(5,5)")?;
        Ok("(5,25) yes(2,1), (5,10) no, (5,5) yes(1,1)".into())
    });
}
