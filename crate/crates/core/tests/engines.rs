use dioph::bestapprox::{
    cf_records, enumerate_best_general, oracle_best, scan_best_n1, search_best_n1, BestApprox, Definition,
    EngineConfig, SearchConfig, Theta,
};
use dioph::geometry::{ApproxSpace, NormSpec};
use dioph::numerics::rational;
use dioph::sampling::{SourceKind, ThetaSource};
use num_bigint::BigInt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

fn pq(r: &BestApprox) -> (Vec<i64>, Vec<i64>) {
    let f = |v: &[BigInt]| v.iter().map(|x| i64::try_from(x).unwrap()).collect();
    (f(&r.p), f(&r.q))
}

fn in_box(r: &BestApprox, b: i64) -> bool {
    r.p.iter().chain(&r.q).all(|x| x.magnitude() <= &BigInt::from(b).magnitude().clone())
}

fn random_theta(rng: &mut ChaCha8Rng, m: usize, n: usize) -> Theta {
    let entries = (0..m * n)
        .map(|_| {
            let d = rng.gen_range(2..60i64);
            rational(rng.gen_range(-2 * d..2 * d), d)
        })
        .collect();
    Theta::explicit(m, n, entries).unwrap()
}

#[test]
fn one_fifth_one_seventh_fixture() {
    let theta = Theta::parse("1/5,1/7", 2, 1).unwrap();
    let space = ApproxSpace::cylinder(2, 1, NormSpec::Sup, NormSpec::Sup).unwrap();
    let cuboid = scan_best_n1(&theta, &space, &EngineConfig::new(Definition::Cuboid, 40.0)).unwrap();
    assert!(cuboid.iter().any(|r| pq(r) == (vec![-1, -1], vec![5])));
    let cyl = scan_best_n1(&theta, &space, &EngineConfig::new(Definition::NormCylinder, 40.0)).unwrap();
    assert!(!cyl.iter().any(|r| pq(r) == (vec![-1, -1], vec![5])));
    // Every cylinder record is a cuboid record.
    for r in &cyl {
        assert!(cuboid.iter().any(|c| pq(c) == pq(r)), "{:?}", pq(r));
    }
    let oracle = oracle_best(&theta, &ApproxSpace::cuboid(2, 1), 10);
    assert!(oracle.iter().any(|r| pq(r) == (vec![-1, -1], vec![5])));
}

#[test]
fn golden_ratio_scan_matches_continued_fraction() {
    let src = Arc::new(ThetaSource::new(SourceKind::Quadratic { a: 1, b: 1, c: -1, bits: 300 }, 0).unwrap());
    let theta = src.sample(0);
    let space = ApproxSpace::cuboid(1, 1);
    let scan = scan_best_n1(&theta, &space, &EngineConfig::new(Definition::Cuboid, 1000.0)).unwrap();
    let (_, cf) = cf_records(&theta, &space, 20, None).unwrap();
    let cf: Vec<_> = cf.iter().filter(|r| r.q[0] <= BigInt::from(1000)).map(pq).collect();
    assert_eq!(scan.iter().map(pq).collect::<Vec<_>>(), cf);
    let q: Vec<i64> = cf.iter().map(|c| c.1[0]).collect();
    assert_eq!(q, vec![1, 2, 3, 5, 8, 13, 21, 34, 55, 89, 144, 233, 377, 610, 987]);
}

#[test]
fn general_engine_matches_oracle_on_two_columns() {
    let theta = Theta::parse("3/10,7/10", 1, 2).unwrap();
    let space = ApproxSpace::cuboid(1, 2);
    let eng = enumerate_best_general(&theta, &space, &EngineConfig::new(Definition::General, 10.0)).unwrap();
    let ora = oracle_best(&theta, &space, 10);
    let e: Vec<_> = eng.iter().filter(|r| in_box(r, 10)).map(pq).collect();
    let o: Vec<_> = ora.iter().map(pq).collect();
    assert_eq!(e, o);
}

fn shape_spaces(m: usize, n: usize) -> Vec<(Definition, ApproxSpace)> {
    let general = match (m, n) {
        (1, 1) => "m:1e|n:1s",
        (2, 1) => "m:2e|n:1s",
        (1, 2) => "m:1s|n:2e",
        (2, 2) => "m:1s,1s|n:2p3",
        (3, 1) => "m:2e,1s|n:1s",
        _ => unreachable!(),
    };
    let cyl = ApproxSpace::cylinder(m, n, NormSpec::Euclidean, NormSpec::Sup).unwrap();
    vec![
        (Definition::Cuboid, ApproxSpace::cuboid(m, n)),
        (Definition::NormCylinder, cyl),
        (Definition::General, ApproxSpace::parse(general).unwrap()),
    ]
}

#[test]
fn engines_match_oracle_on_random_rationals() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let shapes = [((1, 1), 30, 60), ((2, 1), 8, 40), ((1, 2), 8, 40), ((2, 2), 3, 30), ((3, 1), 4, 30)];
    let mut checked = 0;
    for ((m, n), b, count) in shapes {
        for _ in 0..count {
            let theta = random_theta(&mut rng, m, n);
            for (def, space) in shape_spaces(m, n) {
                let resolved = def.resolve(&space).unwrap();
                let reach = resolved
                    .n_norms()
                    .iter()
                    .map(|nb| nb.scale * nb.spec.norm(&vec![1.0; nb.dim]))
                    .fold(0.0, f64::max);
                let cfg = EngineConfig::new(def, (b as f64 * reach * (1.0 + 1e-9)).max(1.0));
                let ora: Vec<_> = oracle_best(&theta, &resolved, b).iter().map(pq).collect();
                let gen: Vec<_> = enumerate_best_general(&theta, &space, &cfg)
                    .unwrap()
                    .iter()
                    .filter(|r| in_box(r, b))
                    .map(pq)
                    .collect();
                assert_eq!(gen, ora, "general vs oracle, {def:?} θ={theta:?}");
                if n == 1 {
                    let scan: Vec<_> =
                        scan_best_n1(&theta, &space, &cfg).unwrap().iter().filter(|r| in_box(r, b)).map(pq).collect();
                    assert_eq!(scan, ora, "scan vs oracle, {def:?} θ={theta:?}");
                    let exact: Vec<_> = scan_best_n1(&theta, &space, &cfg.clone().exact())
                        .unwrap()
                        .iter()
                        .filter(|r| in_box(r, b))
                        .map(pq)
                        .collect();
                    assert_eq!(exact, scan);
                }
                checked += 1;
            }
        }
    }
    assert_eq!(checked, 600);
}

#[test]
fn lattice_search_matches_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for (m, code) in [(1, "m:1s|n:1s"), (2, "m:1s,1s|n:1s"), (2, "m:2s|n:1s"), (2, "m:2e|n:1s"), (3, "m:2e,1s|n:1s")] {
        let space = ApproxSpace::parse(code).unwrap();
        for _ in 0..10 {
            let theta = random_theta(&mut rng, m, 1);
            let bound = 3000.0;
            let scan: Vec<_> = scan_best_n1(&theta, &space, &EngineConfig::new(Definition::General, bound))
                .unwrap()
                .iter()
                .map(pq)
                .collect();
            let mut cfg = SearchConfig::new(Definition::General, 10_000);
            cfg.q_limit = Some(BigInt::from(3000));
            let search: Vec<_> = search_best_n1(&theta, &space, &cfg).unwrap().iter().map(pq).collect();
            assert_eq!(search, scan, "{code} θ={theta:?}");
        }
    }
}

#[test]
fn lattice_search_matches_scan_on_samples() {
    for (m, code) in [(1, "m:1s|n:1s"), (2, "m:1s,1s|n:1s"), (2, "m:2e|n:1s"), (3, "m:3s|n:1s")] {
        let src = Arc::new(
            ThetaSource::new(SourceKind::Lebesgue { rows: m, cols: 1, digits: 40 }, 11).unwrap(),
        );
        let space = ApproxSpace::parse(code).unwrap();
        for c in 0..5 {
            let theta = src.sample(c);
            let scan: Vec<_> = scan_best_n1(&theta, &space, &EngineConfig::new(Definition::General, 20000.0))
                .unwrap()
                .iter()
                .map(pq)
                .collect();
            let mut cfg = SearchConfig::new(Definition::General, 10_000);
            cfg.q_limit = Some(BigInt::from(20000));
            let search: Vec<_> = search_best_n1(&theta, &space, &cfg).unwrap().iter().map(pq).collect();
            assert_eq!(search, scan, "{code} θ={theta:?}");
        }
    }
}
