use num_bigint::BigInt;
use num_rational::BigRational;
use proptest::prelude::*;

use plectic::integration::parse_point;
use plectic::padic::{deserialize_padic, serialize_padic, PadicScalar, QuadExtScalar};
use plectic::proj::{cross_ratio_factor, orientation_character, Pgl2, ProjPoint};
use plectic::schreier::{CosetTable, FiniteIndexSubgroup, StallingsGraph};
use plectic::tree::{balls_at_vertex, bfs_distance, reduction_map, TreeVertex};
use plectic::words::{letter, FreeWord};

const P: u32 = 5;
const N: u32 = 30;

fn rational() -> impl Strategy<Value = BigRational> {
    (-2000i64..2000, 1i64..200, -3i32..3).prop_map(|(a, b, k)| {
        let a = if a == 0 { 1 } else { a };
        BigRational::new(BigInt::from(a), BigInt::from(b)) * BigRational::from_integer(BigInt::from(P)).pow(k)
    })
}

fn scalar() -> impl Strategy<Value = PadicScalar> {
    rational().prop_map(|r| PadicScalar::from_rational(&r, P, N))
}

fn matrix() -> impl Strategy<Value = Pgl2> {
    prop::array::uniform4(-50i64..50).prop_filter_map("singular", |[a, b, c, d]| Pgl2::from_ints(a, b, c, d).ok())
}

fn ext_point() -> impl Strategy<Value = ProjPoint> {
    (-80i64..80, 1i64..25).prop_filter_map("unit w-coefficient", |(a, b)| {
        (b % P as i64 != 0).then(|| parse_point(&format!("{a}+{b}w"), P, N).unwrap())
    })
}

fn word(rank: usize) -> impl Strategy<Value = FreeWord> {
    prop::collection::vec((0..rank, any::<bool>()), 0..8).prop_map(|ls| FreeWord::new(ls.into_iter().map(|(j, i)| letter(j, i))))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn valuation_is_multiplicative(x in scalar(), y in scalar()) {
        let v = x.mul(&y).unwrap().valuation().unwrap();
        prop_assert_eq!(v, x.valuation().unwrap() + y.valuation().unwrap());
    }

    #[test]
    fn valuation_is_ultrametric(x in scalar(), y in scalar()) {
        let (vx, vy) = (x.valuation().unwrap(), y.valuation().unwrap());
        if let Ok(s) = x.add(&y) {
            let v = s.valuation().unwrap();
            prop_assert!(v >= vx.min(vy));
            if vx != vy {
                prop_assert_eq!(v, vx.min(vy));
            }
        }
    }

    #[test]
    fn inverse_keeps_precision(x in scalar()) {
        let inv = x.inv().unwrap();
        prop_assert_eq!(inv.precision(), x.precision());
        prop_assert!(x.mul(&inv).unwrap().agreement_digits(&PadicScalar::one(P, N)) >= N);
    }

    #[test]
    fn serialization_round_trip(x in scalar()) {
        prop_assert_eq!(deserialize_padic(&serialize_padic(&x), P).unwrap(), x);
    }

    #[test]
    fn extension_records_round_trip(z in ext_point()) {
        let v = z.affine().unwrap();
        prop_assert_eq!(QuadExtScalar::from_record(&v.to_record(), P).unwrap(), v);
    }

    #[test]
    fn frobenius_is_a_ring_map(a in ext_point(), b in ext_point()) {
        let (x, y) = (a.affine().unwrap(), b.affine().unwrap());
        let f = |z: &QuadExtScalar| z.frobenius().unwrap();
        prop_assert!(f(&x.mul(&y).unwrap()).agreement_digits(&f(&x).mul(&f(&y)).unwrap()) >= N - 2);
        if let Ok(s) = x.add(&y) {
            prop_assert!(f(&s).agreement_digits(&f(&x).add(&f(&y)).unwrap()) >= N - 4);
        }
    }

    #[test]
    fn action_law(g in matrix(), h in matrix(), z in ext_point()) {
        let lhs = g.compose(&h).apply(&z).unwrap();
        let rhs = g.apply(&h.apply(&z).unwrap()).unwrap();
        prop_assert!(lhs.agreement_digits(&rhs) >= N - 6);
    }

    #[test]
    fn cross_ratio_covariance(g in matrix(), x in ext_point(), y in ext_point(), t1 in ext_point(), t2 in ext_point()) {
        let q = |t: &ProjPoint| -> Option<QuadExtScalar> {
            let a = cross_ratio_factor(&g.apply(t).ok()?, &g.apply(&x).ok()?, &g.apply(&y).ok()?).ok()?;
            a.div(&cross_ratio_factor(t, &x, &y).ok()?).ok()
        };
        if let (Some(a), Some(b)) = (q(&t1), q(&t2)) {
            prop_assert!(a.agreement_digits(&b) >= N / 2);
        }
    }

    #[test]
    fn orientation_is_a_character(g in matrix(), h in matrix()) {
        prop_assert_eq!(
            orientation_character(&[g.compose(&h)], P),
            orientation_character(&[g.clone()], P) * orientation_character(&[h], P)
        );
    }

    #[test]
    fn reduction_is_equivariant(g in matrix(), z in ext_point()) {
        let a = reduction_map(&g.apply(&z).unwrap()).unwrap();
        prop_assert_eq!(a, reduction_map(&z).unwrap().act(&g));
    }

    #[test]
    fn balls_partition(z in ext_point(), r in rational()) {
        let v = reduction_map(&z).unwrap();
        let pt = ProjPoint::from_rational(&r, P, N);
        let balls = balls_at_vertex(&v);
        prop_assert_eq!(balls.iter().filter(|b| b.contains(&pt).unwrap()).count(), 1);
    }

    #[test]
    fn distance_matches_bfs(steps in prop::collection::vec(0usize..6, 0..5)) {
        let o = TreeVertex::standard(P);
        let mut v = o.clone();
        for s in steps {
            v = v.neighbors()[s].clone();
        }
        prop_assert_eq!(bfs_distance(&o, &v, 5), Some(o.distance(&v) as u32));
        prop_assert_eq!(o.distance(&v), v.distance(&o));
    }

    #[test]
    fn words_are_a_group(a in word(2), b in word(2)) {
        prop_assert!(a.mul(&a.inverse()).is_empty());
        prop_assert_eq!(a.mul(&b).inverse(), b.inverse().mul(&a.inverse()));
    }

    #[test]
    fn stallings_membership(a in word(2), b in word(2)) {
        // the subgroup generated by a² and b always contains a²·b and b⁻¹
        let g = StallingsGraph::fold(2, &[a.pow(2), b.clone()]);
        prop_assert!(g.accepts(&a.pow(2).mul(&b)));
        prop_assert!(g.accepts(&b.inverse()));
    }

    #[test]
    fn schreier_rank_formula(t in 1usize..5, s in 0usize..5) {
        // cyclic actions on t cosets, generator 2 shifted by s
        let a: Vec<usize> = (0..t).map(|c| (c + 1) % t).collect();
        let b: Vec<usize> = (0..t).map(|c| (c + s) % t).collect();
        let table = CosetTable::from_action(vec![a, b]).unwrap();
        prop_assert_eq!(table.index(), t);
        let f = rank2();
        let h = FiniteIndexSubgroup::new(f, table).unwrap();
        prop_assert_eq!(h.rank(), t + 1);
        for w in h.generators() {
            prop_assert!(h.contains(w));
        }
    }
}

fn rank2() -> plectic::group::SchottkyFactor {
    let cfg = plectic::config::GroupConfig::load(std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/rank2_q5.json")).unwrap();
    cfg.build().unwrap().schottky(0).unwrap().clone()
}
