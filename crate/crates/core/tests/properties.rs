use dioph::bestapprox::{cf_records, enumerate_best_general, oracle_best, BestApprox, Definition, EngineConfig, Theta};
use dioph::dynamics::{flow_apply, flow_diagonal, hit_time, lambda_theta};
use dioph::geometry::{c_constant, region_contains, ApproxSpace, NormSpec, ProductRegion};
use dioph::numerics::{cmp_validated, rational, Comparison, ValidatedReal};
use dioph::stats::{count_constrained, dl_distribution, gap_distribution, levy_series, telescoping_check, ConstraintSet};
use num_bigint::BigInt;
use num_rational::BigRational;
use proptest::prelude::*;

fn rat() -> impl Strategy<Value = BigRational> {
    (-500i64..500, 1i64..200).prop_map(|(n, d)| rational(n, d))
}

fn pq(r: &BestApprox) -> (Vec<BigInt>, Vec<BigInt>) {
    (r.p.clone(), r.q.clone())
}

fn space_code() -> impl Strategy<Value = &'static str> {
    prop::sample::select(vec!["m:1s|n:1s", "m:1s,1s|n:1s", "m:2e|n:1s", "m:1s|n:1s,1s", "m:2s,1e|n:1s,2s"])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn validated_comparison_is_sound(a in rat(), b in rat(), wa in 0i64..50, wb in 0i64..50) {
        let w = |x: i64| rational(x, 1000);
        let va = ValidatedReal::new(&a - w(wa), &a + w(wa)).unwrap();
        let vb = ValidatedReal::new(&b - w(wb), &b + w(wb)).unwrap();
        match cmp_validated(&va, &vb) {
            Comparison::Undecided => {}
            c => prop_assert_eq!(c.decided(), Some(a.cmp(&b))),
        }
    }

    #[test]
    fn regions_grow_with_radii(code in space_code(), v in prop::collection::vec(-3.0f64..3.0, 6), r in prop::collection::vec(0.0f64..3.0, 4), grow in 1.0f64..2.0) {
        let space = ApproxSpace::parse(code).unwrap();
        let v = &v[..space.d()];
        let radii: Vec<f64> = r[..space.blocks()].to_vec();
        let bigger: Vec<f64> = radii.iter().map(|x| x * grow).collect();
        if region_contains(&ProductRegion::new(radii), v, &space) {
            prop_assert!(region_contains(&ProductRegion::new(bigger), v, &space));
        }
    }

    #[test]
    fn flow_is_a_group_action_of_determinant_one(code in space_code(), s in prop::collection::vec(-2.0f64..2.0, 3), t in prop::collection::vec(-2.0f64..2.0, 3), x in rat(), y in rat()) {
        let space = ApproxSpace::parse(code).unwrap();
        let dim = space.k() + space.r() - 1;
        let (s, t) = (&s[..dim], &t[..dim]);
        let det: f64 = flow_diagonal(t, &space).unwrap().iter().map(|v| v.ln()).sum();
        prop_assert!(det.abs() < 1e-12);
        let entries = vec![x, y].into_iter().cycle().take(space.m() * space.n()).collect();
        let base = lambda_theta(&Theta::explicit(space.m(), space.n(), entries).unwrap());
        let st: Vec<f64> = s.iter().zip(t).map(|(a, b)| a + b).collect();
        let two = flow_apply(s, &flow_apply(t, &base, &space).unwrap(), &space).unwrap();
        let one = flow_apply(&st, &base, &space).unwrap();
        for (a, b) in two.columns().iter().zip(one.columns().iter()) {
            prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0));
        }
    }

    #[test]
    fn c_constant_is_positive(k in 1usize..4, parts in prop::collection::vec(1usize..4, 1..4)) {
        prop_assert!(c_constant(k, &parts) > BigInt::from(0));
    }

    #[test]
    fn sign_twins_share_hitting_times(x in rat(), y in rat()) {
        let theta = Theta::explicit(2, 1, vec![x, y]).unwrap();
        let space = ApproxSpace::cuboid(2, 1);
        for r in enumerate_best_general(&theta, &space, &EngineConfig::new(Definition::General, 60.0)).unwrap() {
            if r.degenerate {
                continue;
            }
            let neg = |v: &[BigInt]| v.iter().map(|x| -x).collect::<Vec<_>>();
            let twin = BestApprox::from_pq(&theta, &space, neg(&r.p), neg(&r.q), r.index);
            prop_assert_eq!(hit_time(&r, &space).unwrap(), hit_time(&twin, &space).unwrap());
        }
    }

    #[test]
    fn engine_matches_oracle(entries in prop::collection::vec(rat(), 2), def in prop::sample::select(vec![Definition::Cuboid, Definition::NormCylinder, Definition::General])) {
        let theta = Theta::explicit(2, 1, entries).unwrap();
        let space = ApproxSpace::parse("m:2e|n:1s").unwrap();
        let b = 8;
        let resolved = def.resolve(&space).unwrap();
        let eng: Vec<_> = enumerate_best_general(&theta, &space, &EngineConfig::new(def, b as f64 * (1.0 + 1e-9)))
            .unwrap()
            .iter()
            .filter(|r| r.p.iter().chain(&r.q).all(|v| v.magnitude() <= &num_bigint::BigUint::from(b as u32)))
            .map(pq)
            .collect();
        let ora: Vec<_> = oracle_best(&theta, &resolved, b).iter().map(pq).collect();
        prop_assert_eq!(eng, ora);
    }

    #[test]
    fn one_dimensional_record_statistics(n in 1i64..1_000_000_007, d in 1_000_000i64..1_000_000_007) {
        let theta = Theta::explicit(1, 1, vec![rational(n % d, d)]).unwrap();
        let space = ApproxSpace::cuboid(1, 1);
        let (theta, records) = cf_records(&theta, &space, 60, None).unwrap();
        // Telescoping holds exactly up to rounding.
        let (direct, summed) = telescoping_check(&records);
        prop_assert!((direct - summed).abs() < 1e-12);
        let last = levy_series(&records, &space).points.last().unwrap().1;
        prop_assert!((last - direct).abs() < 1e-12);
        prop_assert!(gap_distribution(&records).samples().iter().all(|&g| g > 0.0));
        // Approximation qualities stay below ε and do not see the sign.
        let dl = dl_distribution(&records, &space, 0).unwrap();
        prop_assert!(dl.samples().iter().all(|&x| (0.0..space.epsilon()).contains(&x)));
        let flipped: Vec<BestApprox> = records
            .iter()
            .map(|r| BestApprox::from_pq(&theta, &space, vec![-&r.p[0]], vec![-&r.q[0]], r.index))
            .collect();
        let flipped_dl = dl_distribution(&flipped, &space, 0).unwrap();
        prop_assert_eq!(dl.samples(), flipped_dl.samples());
        // Counting: everything counts every record, residue cylinders add up.
        let big_t = records.last().unwrap().log_q;
        let all = count_constrained(&theta, &space, &records, &ConstraintSet::all(), big_t).unwrap();
        prop_assert_eq!(all.count as usize, records.iter().filter(|r| !r.degenerate).count());
        let class = |c: &str| count_constrained(&theta, &space, &records, &ConstraintSet::parse(&format!("mod=2:{c}")).unwrap(), big_t).unwrap().count;
        let both = count_constrained(&theta, &space, &records, &ConstraintSet::parse("mod=2:0,1/1,0").unwrap(), big_t).unwrap().count;
        prop_assert_eq!(class("0,1") + class("1,0"), both);
        prop_assert!(both <= all.count);
        prop_assert_eq!(class("0,1") + class("1,0") + class("1,1"), all.count);
    }
}

#[test]
fn sup_cylinder_records_are_cuboid_records() {
    let space = ApproxSpace::cylinder(2, 1, NormSpec::Sup, NormSpec::Sup).unwrap();
    for (x, y) in [(1, 5), (2, 9), (3, 11), (7, 13)] {
        let theta = Theta::explicit(2, 1, vec![rational(x, 17), rational(y, 23)]).unwrap();
        let cub: Vec<_> = enumerate_best_general(&theta, &space, &EngineConfig::new(Definition::Cuboid, 400.0)).unwrap().iter().map(pq).collect();
        for r in enumerate_best_general(&theta, &space, &EngineConfig::new(Definition::NormCylinder, 400.0)).unwrap() {
            assert!(cub.contains(&pq(&r)));
        }
    }
}
