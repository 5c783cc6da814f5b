//! Acceptance criteria, one line per criterion. Runs without the test harness
//! so the summary is always printed; exits nonzero if any criterion fails.

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::sync::{Arc, OnceLock};
use std::time::Instant;

use dioph::bestapprox::{
    enumerate_best_general, oracle_best, scan_best_n1, BestApprox, Definition, EngineConfig, Theta,
};
use dioph::dynamics::{theta_j, verify_correspondence};
use dioph::experiment::{determinants, doeblin_lenstra, dual_levy, levy, residues, sweep, Run};
use dioph::geometry::{c_constant, in_jt, jt_volume, ApproxSpace, NormSpec};
use dioph::numerics::rational;
use dioph::sampling::{SourceKind, ThetaSource};
use dioph::stats::{frequencies, levy_series, telescoping_check, tv_distance};
use num_bigint::BigInt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const LEVY: f64 = 1.186_569_110_415_625; // π² / (12 ln 2)

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn source(kind: SourceKind, seed: u64) -> Arc<ThetaSource> {
    Arc::new(ThetaSource::new(kind, seed).expect("valid source"))
}

fn lebesgue_runs() -> Vec<Run> {
    let src = source(SourceKind::Lebesgue { rows: 1, cols: 1, digits: 5400 }, 1);
    sweep(&src, 0, 100, &ApproxSpace::cuboid(1, 1), Definition::Cuboid, 5000).expect("Lebesgue records")
}

/// The first `l` records of each run.
fn truncated(runs: &[Run], l: usize) -> Vec<Run> {
    runs.iter()
        .map(|r| Run { counter: r.counter, theta: r.theta.clone(), records: r.records[..l].to_vec() })
        .collect()
}

fn criterion_1(runs: &[Run]) -> Outcome {
    let s = levy(runs, &ApproxSpace::cuboid(1, 1));
    let rel = (s.mean - LEVY).abs() / LEVY;
    outcome(
        rel < 0.01 && runs.iter().all(|r| r.records.len() == 5000),
        format!("mean {:.5} ± {:.5} over {} θ, relative error {:.4}", s.mean, s.stderr, runs.len(), rel),
    )
}

fn criterion_2() -> Outcome {
    let src = Arc::new(
        ThetaSource::new(SourceKind::Cantor { digits: 2600 }, 2).expect("valid source").with_hard_cap(8000),
    );
    let space = ApproxSpace::cuboid(1, 1);
    let runs = sweep(&src, 0, 100, &space, Definition::Cuboid, 2000).expect("Cantor records");
    let s = levy(&runs, &space);
    let rel = (s.mean - LEVY).abs() / LEVY;
    outcome(rel < 0.02, format!("mean {:.5} ± {:.5} over {} Cantor θ, relative error {:.4}", s.mean, s.stderr, runs.len(), rel))
}

fn criterion_3(runs: &[Run]) -> Outcome {
    let pool = truncated(runs, 1000);
    let (_, s) = doeblin_lenstra(&pool, &ApproxSpace::cuboid(1, 1), 0).expect("k = r = 1");
    let spot = 0.5 / std::f64::consts::LN_2;
    outcome(
        s.samples >= 100_000 - pool.len() && s.ks < 0.02 && (s.cdf_at_half - spot).abs() < 0.01,
        format!("{} samples, KS {:.4}, F(1/2) {:.4} vs {:.5}", s.samples, s.ks, s.cdf_at_half, spot),
    )
}

fn criterion_4() -> Outcome {
    let src = source(SourceKind::Quadratic { a: 1, b: 1, c: -1, bits: 8000 }, 0);
    let space = ApproxSpace::cuboid(1, 1);
    let runs = sweep(&src, 0, 1, &space, Definition::Cuboid, 5000).expect("golden ratio records");
    let records = &runs[0].records;
    let ln_phi = ((1.0 + 5f64.sqrt()) / 2.0).ln();
    let rate = records[4999].log_q / 5000.0;
    let rate_err = (rate - ln_phi).abs() / ln_phi;
    let target = 1.0 / 5f64.sqrt();
    let dl_err = records[2500..]
        .iter()
        .map(|r| ((r.n_block_log_norms[0] + r.m_block_log_norms[0]).exp() - target).abs() / target)
        .fold(0.0, f64::max);
    outcome(
        rate_err < 1e-3 && dl_err < 1e-3,
        format!("ln q/l = {rate:.7} (rel {rate_err:.1e}); DL tail max deviation from 1/√5 {dl_err:.1e}"),
    )
}

fn pq(r: &BestApprox) -> (Vec<i64>, Vec<i64>) {
    let f = |v: &[BigInt]| v.iter().map(|x| i64::try_from(x).expect("small")).collect();
    (f(&r.p), f(&r.q))
}

fn in_box(r: &BestApprox, b: i64) -> bool {
    r.p.iter().chain(&r.q).all(|x| x.magnitude() <= BigInt::from(b).magnitude())
}

fn random_theta(rng: &mut ChaCha8Rng, m: usize, n: usize) -> Theta {
    let entries = (0..m * n)
        .map(|_| {
            let d = rng.gen_range(2..60i64);
            rational(rng.gen_range(-2 * d..2 * d), d)
        })
        .collect();
    Theta::explicit(m, n, entries).expect("shape")
}

fn general_space(m: usize, n: usize) -> ApproxSpace {
    let code = match (m, n) {
        (1, 1) => "m:1e|n:1s",
        (2, 1) => "m:2e|n:1s",
        (1, 2) => "m:1s|n:2e",
        (2, 2) => "m:1s,1s|n:2p3",
        (3, 1) => "m:2e,1s|n:1s",
        _ => unreachable!(),
    };
    ApproxSpace::parse(code).expect("space")
}

const SHAPES: [((usize, usize), i64, usize); 5] =
    [((1, 1), 30, 60), ((2, 1), 8, 50), ((1, 2), 8, 40), ((2, 2), 3, 20), ((3, 1), 4, 30)];

fn oracle_bound(space: &ApproxSpace, b: i64) -> f64 {
    let reach = space.n_norms().iter().map(|nb| nb.scale * nb.spec.norm(&vec![1.0; nb.dim])).fold(0.0, f64::max);
    (b as f64 * reach * (1.0 + 1e-9)).max(1.0)
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let (mut thetas, mut checks, mut mismatches) = (0, 0, Vec::new());
    for ((m, n), b, count) in SHAPES {
        for _ in 0..count {
            let theta = random_theta(&mut rng, m, n);
            thetas += 1;
            let spaces = [
                (Definition::Cuboid, ApproxSpace::cuboid(m, n)),
                (Definition::NormCylinder, ApproxSpace::cylinder(m, n, NormSpec::Euclidean, NormSpec::Sup).expect("space")),
                (Definition::General, general_space(m, n)),
            ];
            for (def, space) in spaces {
                let resolved = def.resolve(&space).expect("resolvable");
                let cfg = EngineConfig::new(def, oracle_bound(&resolved, b));
                let ora: Vec<_> = oracle_best(&theta, &resolved, b).iter().map(pq).collect();
                let mut engines = vec![("general", enumerate_best_general(&theta, &space, &cfg))];
                if n == 1 {
                    engines.push(("scan", scan_best_n1(&theta, &space, &cfg)));
                    engines.push(("exact scan", scan_best_n1(&theta, &space, &cfg.clone().exact())));
                }
                for (name, got) in engines {
                    checks += 1;
                    let got: Vec<_> = match got {
                        Ok(v) => v.iter().filter(|r| in_box(r, b)).map(pq).collect(),
                        Err(e) => {
                            mismatches.push(format!("{name} {def:?} θ={theta:?}: {e}"));
                            continue;
                        }
                    };
                    if got != ora {
                        mismatches.push(format!("{name} {def:?} θ={theta:?}"));
                    }
                }
            }
        }
    }
    let first = mismatches.first().cloned().unwrap_or_default();
    outcome(
        thetas == 200 && mismatches.is_empty(),
        format!("{thetas} θ, {checks} engine runs, {} mismatches {first}", mismatches.len()),
    )
}

fn criterion_6() -> Outcome {
    let fixture = Theta::parse("1/5,1/7", 2, 1).expect("fixture");
    let sup = |m, n| ApproxSpace::cylinder(m, n, NormSpec::Sup, NormSpec::Sup).expect("space");
    let target = (vec![-1, -1], vec![5]);
    let cub = scan_best_n1(&fixture, &sup(2, 1), &EngineConfig::new(Definition::Cuboid, 40.0).exact()).expect("scan");
    let cyl = scan_best_n1(&fixture, &sup(2, 1), &EngineConfig::new(Definition::NormCylinder, 40.0).exact()).expect("scan");
    let fixture_ok = cub.iter().any(|r| pq(r) == target) && !cyl.iter().any(|r| pq(r) == target);

    let mut rng = ChaCha8Rng::seed_from_u64(66);
    let (mut runs, mut violations) = (1, usize::from(!cyl.iter().all(|r| cub.iter().any(|c| pq(c) == pq(r)))));
    for ((m, n), b, count) in SHAPES {
        for _ in 0..count {
            let theta = random_theta(&mut rng, m, n);
            let space = sup(m, n);
            let bound = oracle_bound(&space, b);
            let c = enumerate_best_general(&theta, &space, &EngineConfig::new(Definition::Cuboid, bound)).expect("cuboid");
            let y = enumerate_best_general(&theta, &space, &EngineConfig::new(Definition::NormCylinder, bound)).expect("cylinder");
            runs += 1;
            let cset: Vec<_> = c.iter().map(pq).collect();
            if !y.iter().all(|r| cset.contains(&pq(r))) {
                violations += 1;
            }
        }
    }
    outcome(
        fixture_ok && violations == 0,
        format!("fixture ((-1,-1),5) in cuboid set only: {fixture_ok}; {runs} runs, {violations} nesting violations"),
    )
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut lines = Vec::new();
    let (mut checked, mut records) = (0, 0);
    for i in 0..20 {
        let (m, big_t) = if i < 10 { (1, 5.0) } else { (2, 4.0) };
        let theta = random_theta(&mut rng, m, 1);
        for (def, space) in [
            (Definition::Cuboid, ApproxSpace::cuboid(m, 1)),
            (Definition::NormCylinder, ApproxSpace::cylinder(m, 1, NormSpec::Euclidean, NormSpec::Sup).expect("space")),
            (Definition::General, general_space(m, 1)),
        ] {
            checked += 1;
            match verify_correspondence(&theta, &space, def, big_t) {
                Ok(report) => {
                    records += report.records;
                    if !report.exact() {
                        lines.push(format!("{def:?} θ={theta:?}: {:?}", report.mismatches));
                    }
                }
                Err(e) => lines.push(format!("{def:?} θ={theta:?}: {e}")),
            }
        }
    }
    outcome(
        lines.is_empty(),
        format!("{checked} (θ, definition) pairs, {records} hitting times, {} mismatches {}", lines.len(), lines.first().cloned().unwrap_or_default()),
    )
}

fn criterion_8() -> Outcome {
    let src = source(SourceKind::Lebesgue { rows: 2, cols: 1, digits: 400 }, 8);
    let space = ApproxSpace::cuboid(2, 1);
    let runs = sweep(&src, 0, 20, &space, Definition::Cuboid, 2000).expect("cuboid records");
    let s = levy(&runs, &space);
    outcome(
        s.spread < 0.10,
        format!("(ln q)^2/l tail estimates: mean {:.4}, spread (max-min)/median {:.4} over {} θ", s.mean, s.spread, runs.len()),
    )
}

fn criterion_9(runs: &[Run]) -> Outcome {
    let pool = truncated(runs, 1000);
    let table = residues(&pool, 2);
    let freq = frequencies(&table);
    let zero = freq.get(&vec![0, 0]).copied().unwrap_or(0.0);
    let classes = [vec![0, 1], vec![1, 0], vec![1, 1]];
    let worst = classes.iter().map(|c| (freq.get(c).copied().unwrap_or(0.0) - 1.0 / 3.0).abs()).fold(0.0, f64::max);
    let total: u64 = table.values().sum();
    outcome(
        zero == 0.0 && worst < 0.02 && total == 100_000,
        format!("{total} records, class frequencies {freq:?}, worst deviation {worst:.4}"),
    )
}

fn criterion_10(runs: &[Run]) -> Outcome {
    let one_d = determinants(runs, &ApproxSpace::cuboid(1, 1));
    let unimodular = one_d.keys().all(|d| d == &BigInt::from(1) || d == &BigInt::from(-1));
    let src = source(SourceKind::Lebesgue { rows: 2, cols: 1, digits: 600 }, 10);
    let space = ApproxSpace::cylinder(2, 1, NormSpec::Euclidean, NormSpec::Sup).expect("space");
    let a = sweep(&src, 0, 20, &space, Definition::NormCylinder, 502).expect("cylinder records");
    let b = sweep(&src, 1000, 20, &space, Definition::NormCylinder, 502).expect("cylinder records");
    let (ta, tb) = (determinants(&a, &space), determinants(&b, &space));
    let tv = tv_distance(&frequencies(&ta), &frequencies(&tb));
    let (na, nb): (u64, u64) = (ta.values().sum(), tb.values().sum());
    outcome(
        unimodular && tv < 0.05,
        format!("1x1 determinants {:?}; 2x1 runs of {na} and {nb} windows, {} values, TV {tv:.4}", one_d.keys().collect::<Vec<_>>(), ta.len()),
    )
}

fn criterion_11(runs: &[Run]) -> Outcome {
    let mut notes = Vec::new();
    let mut pass = true;

    // J^T volume against Monte Carlo over a bounding box.
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for code in ["m:1s|n:1s", "m:1s,1s|n:1s", "m:1s|n:1s,1s", "m:2s,1s|n:1s,2s", "m:1s,1s|n:1s,1s,1s"] {
        let space = ApproxSpace::parse(code).expect("space");
        let decomp = space.decomp();
        let (k, r, n) = (decomp.k(), decomp.r(), decomp.n() as f64);
        let big_t = 2.0;
        let upper: Vec<f64> = decomp.m_parts().iter().map(|&m| n * big_t / m as f64).chain(std::iter::repeat(big_t).take(r - 1)).collect();
        let box_volume: f64 = upper.iter().product();
        let trials = 2_000_000;
        let hits = (0..trials)
            .filter(|_| {
                let t: Vec<f64> = upper.iter().map(|&u| rng.gen::<f64>() * u).collect();
                in_jt(&t, big_t, &space)
            })
            .count();
        let mc = box_volume * hits as f64 / trials as f64;
        let exact = jt_volume(big_t, &space);
        let rel = (mc - exact).abs() / exact;
        let positive = c_constant(k, decomp.n_parts()) > BigInt::from(0);
        pass &= rel < 0.01 && positive;
        notes.push(format!("{code}: vol {exact:.4} mc rel {rel:.4}"));
    }

    // λ_j unimodular with e_j primitive on 10^3 records.
    let src = source(SourceKind::Lebesgue { rows: 2, cols: 1, digits: 1000 }, 12);
    let space = ApproxSpace::cylinder(2, 1, NormSpec::Euclidean, NormSpec::Sup).expect("space");
    let cyl = sweep(&src, 0, 20, &space, Definition::NormCylinder, 1000).expect("cylinder records");
    let (mut tested, mut worst_det, mut worst_int, mut all_primitive) = (0, 0.0f64, 0.0f64, true);
    'outer: for run in &cyl {
        for rec in run.records.iter().filter(|r| !r.degenerate).take(50) {
            if tested == 1000 {
                break 'outer;
            }
            let j = 1 + tested % space.d();
            match theta_j(&run.theta, rec, j, &space, &[2]) {
                Ok(tj) => {
                    worst_det = worst_det.max((tj.lattice.determinant().abs() - 1.0).abs());
                    let (dev, primitive) = tj.primitivity(j);
                    worst_int = worst_int.max(dev);
                    all_primitive &= primitive;
                    tested += 1;
                }
                Err(dioph::Error::ZeroCoordinate(_)) => {}
                Err(e) => {
                    pass = false;
                    notes.push(format!("theta_j failed: {e}"));
                    break 'outer;
                }
            }
        }
    }
    pass &= tested == 1000 && worst_det < 1e-9 && worst_int < 1e-9 && all_primitive;
    notes.push(format!("λ_j on {tested} records: |det|-1 ≤ {worst_det:.1e}, e_j off-integer ≤ {worst_int:.1e}, primitive {all_primitive}"));

    // Telescoping identity.
    let worst_tel = runs
        .iter()
        .map(|r| {
            let (direct, summed) = telescoping_check(&r.records);
            let tail = levy_series(&r.records, &ApproxSpace::cuboid(1, 1)).points.last().map_or(f64::NAN, |p| p.1);
            (direct - summed).abs().max((direct - tail).abs())
        })
        .fold(0.0, f64::max);
    pass &= worst_tel < 1e-12;
    notes.push(format!("telescoping ≤ {worst_tel:.1e}"));

    // Duality between growth of q and decay of the residual.
    let one = ApproxSpace::cuboid(1, 1);
    let (lq, lr) = (levy(runs, &one).mean, dual_levy(runs, &one).mean);
    let (cq, cr) = (levy(&cyl, &space).mean, dual_levy(&cyl, &space).mean);
    let (d1, d2) = ((lq - lr).abs() / lq, (cq - cr).abs() / cq);
    pass &= d1 < 0.02 && d2 < 0.02;
    notes.push(format!("duality 1x1 {lq:.4} vs {lr:.4} (rel {d1:.4}), 2x1 {cq:.4} vs {cr:.4} (rel {d2:.4})"));

    outcome(pass, notes.join("; "))
}

fn main() -> ExitCode {
    let start = Instant::now();
    // `ACCEPTANCE_ONLY=3,11` restricts the run to the listed criteria.
    let only: Option<Vec<usize>> =
        std::env::var("ACCEPTANCE_ONLY").ok().map(|v| v.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let lebesgue = OnceLock::new();
    let lebesgue = || lebesgue.get_or_init(lebesgue_runs).as_slice();
    let mut results: BTreeMap<usize, (&str, Outcome, f64)> = BTreeMap::new();
    let mut run = |n: usize, name: &'static str, f: &dyn Fn() -> Outcome| {
        if only.as_ref().is_some_and(|o| !o.contains(&n)) {
            return;
        }
        let t = Instant::now();
        let o = f();
        results.insert(n, (name, o, t.elapsed().as_secs_f64()));
    };
    run(1, "Lévy constant, Lebesgue", &|| criterion_1(lebesgue()));
    run(2, "Lévy constant, Cantor", &criterion_2);
    run(3, "Doeblin–Lenstra law", &|| criterion_3(lebesgue()));
    run(4, "golden ratio controls", &criterion_4);
    run(5, "engines equal oracle", &criterion_5);
    run(6, "definition nesting", &criterion_6);
    run(7, "cross-section correspondence", &criterion_7);
    run(8, "Cheung consistency", &criterion_8);
    run(9, "congruence equidistribution", &|| criterion_9(lebesgue()));
    run(10, "determinants", &|| criterion_10(lebesgue()));
    run(11, "structural invariants", &|| criterion_11(lebesgue()));
    let mut failed = 0;
    for (n, (name, o, secs)) in &results {
        failed += usize::from(!o.pass);
        println!("criterion {n:>2} {}: {name}: {} ({secs:.1}s)", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    println!("{} of {} criteria pass in {:.1}s", results.len() - failed, results.len(), start.elapsed().as_secs_f64());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
