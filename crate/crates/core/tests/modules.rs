use std::path::Path;

use plectic::config::GroupConfig;
use plectic::group::PlecticGroup;
use plectic::hecke::{
    compose_correspondences, cyclic_subgroup, functoriality_check, lattice_maps, parity_subgroup, pullback_cycles, pushforward_cycles,
    validate_morphism, Component, HeckeCorrespondence,
};
use plectic::integration::{integrate_group, integrate_riemann, PlecticCycle, RiemannOptions};
use plectic::intlin::identity;
use plectic::measures::{invariant_measure_lattice, HLattice};
use plectic::proj::{Pgl2, ProjPoint};
use plectic::schreier::{CosetTable, FiniteIndexSubgroup};
use plectic::words::FreeWord;

fn load(name: &str) -> (GroupConfig, PlecticGroup) {
    let cfg = GroupConfig::load(Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)).unwrap();
    let g = cfg.build().unwrap();
    (cfg, g)
}

#[test]
fn identity_morphism_is_trivial() {
    let (cfg, g) = load("rank2_q5.json");
    let f = g.schottky(0).unwrap();
    let whole = FiniteIndexSubgroup::whole(f.clone());
    let m = validate_morphism(&Pgl2::identity(), &whole, &whole, 8).unwrap();
    let d = cfg.default_cycle().unwrap().unwrap();
    assert_eq!(pushforward_cycles(&m, &d).unwrap(), d);
    assert_eq!(pullback_cycles(&m, &d).unwrap(), d);
    let maps = lattice_maps(&m).unwrap();
    assert_eq!(maps.push, identity(2));
    assert_eq!(maps.pull, identity(2));
    assert!(functoriality_check(&m, &[d], &RiemannOptions::default()).unwrap().passed());
}

#[test]
fn index_three_transfer() {
    let (_, g) = load("tate.json");
    let f = g.schottky(0).unwrap();
    let m = validate_morphism(&Pgl2::identity(), &cyclic_subgroup(f, 3).unwrap(), &FiniteIndexSubgroup::whole(f.clone()), 8).unwrap();
    assert_eq!(m.index, 3);
    let maps = lattice_maps(&m).unwrap();
    assert_eq!(plectic::intlin::mat_mul(&maps.push, &maps.pull), vec![vec![3]]);
    let pt = |n| ProjPoint::from_int(n, 5, 40);
    let pulled = pullback_cycles(&m, &PlecticCycle::single(pt(2), pt(3))).unwrap();
    assert_eq!(pulled.terms.len(), 3);
    assert!(pulled.degree().iter().all(|&x| x == 0));
}

#[test]
fn composition_with_identity() {
    let (_, g) = load("rank2_q5.json");
    let f = g.schottky(0).unwrap();
    let t = parity_subgroup(f).unwrap().table().clone();
    let w = CosetTable::trivial(2);
    let c = HeckeCorrespondence { source: t.clone(), target: w.clone(), components: vec![Component { middle: t.clone(), g: FreeWord::identity() }] };
    let left = compose_correspondences(&HeckeCorrespondence::identity(&w), &c, 2, 8).unwrap();
    let right = compose_correspondences(&c, &HeckeCorrespondence::identity(&t), 2, 8).unwrap();
    assert_eq!(left.components, c.components);
    assert_eq!(right.signature(), c.signature());
}

#[test]
fn depth_monotonicity() {
    let (cfg, g) = load("rank2_q5.json");
    let d = cfg.default_cycle().unwrap().unwrap();
    let f = g.schottky(0).unwrap();
    let lattice = HLattice::for_subgroup(&FiniteIndexSubgroup::whole(f.clone()));
    let mut last = 0;
    for depth in 4..=10 {
        let opts = RiemannOptions { max_depth: depth, output_digits: 1, guard_digits: 40 };
        let r = integrate_riemann(&lattice, &d, &opts).unwrap();
        let s = *r.stable_digits.iter().min().unwrap();
        assert!(s >= last, "depth {depth}: {s} < {last}");
        last = s;
    }
}

#[test]
fn integrals_are_bilinear() {
    let (cfg, g) = load("cyclic_rank2.json");
    let d1 = cfg.default_cycle().unwrap().unwrap();
    let pt = |s: &str| plectic::integration::parse_point(s, 5, 40).unwrap();
    let x = d1.terms[0].places[0].clone();
    let d2 = PlecticCycle::elementary(vec![x, (pt("1/7"), pt("6/5"))]);
    let opts = RiemannOptions::default();
    let a = integrate_group(&g, &d1, &opts).unwrap();
    let b = integrate_group(&g, &d2, &opts).unwrap();
    let sum = integrate_group(&g, &d1.add(&d2), &opts).unwrap();
    let prod = a.mul(&b);
    for (u, v) in sum.values.iter().zip(&prod.values) {
        assert!(u.agreement_digits(v).unwrap() >= 20);
    }
}

#[test]
fn trivial_place_kills_the_lattice() {
    let cfg = GroupConfig::parse(
        r#"{"p": 5, "precision": 20, "places": [{"kind": "cyclic", "generator": [["5", "0"], ["0", "1"]]}, {"kind": "trivial"}]}"#,
    )
    .unwrap();
    assert_eq!(invariant_measure_lattice(&cfg.build().unwrap(), 2).unwrap().rank, 0);
}
