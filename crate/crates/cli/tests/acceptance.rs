//! Acceptance gate: every pinned result the project promises, one test
//! per item, each printing a single ACCEPTANCE line with the measured
//! values. Time budgets are asserted with Instant so a regression in
//! the hot paths fails loudly here rather than in someone's pipeline.
//!
//! Run with `cargo test --test acceptance -- --nocapture` to see the
//! ACCEPTANCE lines on passing runs.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::{Duration, Instant};

use isogeny_radical::criterion::twist_witness_experiment;
use isogeny_radical::curves::CurveOverQ;
use isogeny_radical::galois_sim::{
    check_det_coincidence, goursat_degrees, projected_kernel_audit, GoursatDichotomy,
    JointImageModel, ScanMode,
};
use isogeny_radical::modmath::{
    legendre_symbol, pow_mod, primes_in_range, PrimeModulus, RationalInvariant,
};
use isogeny_radical::symplectic::{
    enumerate_sp, multiplier_of, normal_subgroup_audit, random_gsp_element, sp_order,
    sp_order_ell_valuation, GroupSpec, GspElement, Matrix,
};
use isogeny_radical::tame_inertia::{bound_check, enumerate_invariants, pairwise_separation};
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_isogeny-radical"))
}

fn fresh_dir(tag: &str) -> PathBuf {
    let dir =
        std::env::temp_dir().join(format!("isogeny-radical-acc-{tag}-{}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_pair_file(dir: &Path) -> PathBuf {
    let path = dir.join("pair.curves");
    fs::write(
        &path,
        "e1 : 0 1 1\n\
         e2 : 0 2 1\n\
         velu_dom : 1 2 0\n\
         velu_img : -2 -7 0\n",
    )
    .unwrap();
    path
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn exit_code(out: &Output) -> i32 {
    out.status.code().expect("process exited")
}

fn curve(label: &str, a2: i64, a4: i64, a6: i64) -> CurveOverQ {
    CurveOverQ::new(label, a2, a4, a6).unwrap()
}

#[test]
fn acceptance_01_group_orders() {
    const BUDGET: Duration = Duration::from_secs(5);
    let clock = Instant::now();

    let spec = GroupSpec::new(1, 5).unwrap();
    let sp = enumerate_sp(&spec).unwrap();
    assert_eq!(sp.len(), 120);
    assert_eq!(sp_order(&spec).unwrap(), 120);

    let pairs = [(1usize, 5u64), (1, 7), (2, 3), (2, 5), (3, 5)];
    for &(g, ell) in &pairs {
        let spec = GroupSpec::new(g, ell).unwrap();
        let val = sp_order_ell_valuation(&spec).unwrap();
        assert_eq!(val as usize, g * g, "valuation at (g={g}, ell={ell})");
    }

    let elapsed = clock.elapsed();
    assert!(elapsed < BUDGET, "took {elapsed:?}, budget {BUDGET:?}");
    println!(
        "ACCEPTANCE 1 PASS sp(1,5)=120 valuations=g^2 for {} pairs elapsed_ms={}",
        pairs.len(),
        elapsed.as_millis()
    );
}

#[test]
fn acceptance_02_normal_subgroup_audit() {
    const BUDGET: Duration = Duration::from_secs(60);
    let clock = Instant::now();

    let sp2_f5 = enumerate_sp(&GroupSpec::new(1, 5).unwrap()).unwrap();
    assert_eq!(normal_subgroup_audit(&sp2_f5), vec![1, 2, 120]);

    let sp4_f3 = enumerate_sp(&GroupSpec::new(2, 3).unwrap()).unwrap();
    assert_eq!(normal_subgroup_audit(&sp4_f3), vec![1, 2, 51840]);

    let sp2_f3 = enumerate_sp(&GroupSpec::new(1, 3).unwrap()).unwrap();
    let orders = normal_subgroup_audit(&sp2_f3);
    assert!(
        orders.contains(&8),
        "expected a proper subgroup of order 8, got {orders:?}"
    );

    let elapsed = clock.elapsed();
    assert!(elapsed < BUDGET, "took {elapsed:?}, budget {BUDGET:?}");
    println!(
        "ACCEPTANCE 2 PASS audits=[1,2,120] [1,2,51840] and order 8 found at (1,3) elapsed_ms={}",
        elapsed.as_millis()
    );
}

#[test]
fn acceptance_03_multiplier_laws() {
    const BUDGET: Duration = Duration::from_secs(10);
    const SAMPLES: u64 = 10_000;
    let clock = Instant::now();

    let mut checked = 0u64;
    for &(g, ell) in &[(1usize, 5u64), (2, 7), (3, 11)] {
        let spec = GroupSpec::new(g, ell).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0x6d75_6c74 + ell);
        for _ in 0..SAMPLES {
            let tm = 1 + rng.next_u64() % (ell - 1);
            let tn = 1 + rng.next_u64() % (ell - 1);
            let m = random_gsp_element(&spec, tm, &mut rng).unwrap();
            let n = random_gsp_element(&spec, tn, &mut rng).unwrap();
            let product = m.matrix().mul(n.matrix());
            let lam = multiplier_of(&product, &spec).unwrap();
            assert_eq!(lam, m.multiplier() * n.multiplier() % ell);
            assert_eq!(m.matrix().det(), pow_mod(m.multiplier(), g as u64, ell));
            checked += 1;
        }
    }

    let elapsed = clock.elapsed();
    assert!(elapsed < BUDGET, "took {elapsed:?}, budget {BUDGET:?}");
    println!(
        "ACCEPTANCE 3 PASS samples={checked} violations=0 elapsed_ms={}",
        elapsed.as_millis()
    );
}

#[test]
fn acceptance_04_det_coincidence() {
    const BUDGET: Duration = Duration::from_secs(30);
    let clock = Instant::now();

    let spec = GroupSpec::new(1, 5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let u = random_gsp_element(&spec, 1, &mut rng).unwrap();

    let graph = JointImageModel::graph_of_conjugation(u.clone());
    let report = check_det_coincidence(&graph, ScanMode::Exhaustive).unwrap();
    assert!(report.holds);
    assert_eq!(report.total, 480);
    assert_eq!(report.violations, 0);

    // the product admits (-1, 1): both sides have multiplier 1, but
    // det(-1 - 1) = 4 while det(1 - 1) = 0
    let product = JointImageModel::full_fibered_product(spec);
    let id = Matrix::identity(2, 5);
    let x = GspElement::new(id.neg(), &spec).unwrap();
    let y = GspElement::identity(&spec);
    assert!(product.contains(&x, &y));
    assert_eq!(x.matrix().sub(&id).det(), 4);
    assert_eq!(y.matrix().sub(&id).det(), 0);
    let report = check_det_coincidence(&product, ScanMode::Exhaustive).unwrap();
    assert!(!report.holds);

    let twist = JointImageModel::quadratic_twist_graph(u);
    let kernel = projected_kernel_audit(&twist).unwrap();
    assert_eq!(kernel.order, 2);
    assert!(kernel.contains_minus_identity);
    let goursat = goursat_degrees(&twist).unwrap();
    assert_eq!(goursat.dichotomy, GoursatDichotomy::IndexTwo);

    let kernel = projected_kernel_audit(&product).unwrap();
    assert_eq!(kernel.order, 120);

    let elapsed = clock.elapsed();
    assert!(elapsed < BUDGET, "took {elapsed:?}, budget {BUDGET:?}");
    println!(
        "ACCEPTANCE 4 PASS graph=480/0 product counterexample (-1,1) twist_kernel=2 product_kernel=120 elapsed_ms={}",
        elapsed.as_millis()
    );
}

#[test]
fn acceptance_05_point_counting() {
    const BUDGET: Duration = Duration::from_secs(30);
    let clock = Instant::now();

    let e = curve("e1", 0, 1, 1);
    let r = e.reduce(5).unwrap();
    assert_eq!(r.count_points(), 9);
    assert_eq!(r.count_points_direct(), 9);

    let fixed = [
        curve("c1", 0, 1, 1),
        curve("c2", 0, 2, 1),
        curve("c3", 1, 2, 0),
        curve("c4", -2, -7, 0),
        curve("c5", 0, -1, 0),
    ];

    let mut mismatches = 0u64;
    for e in &fixed {
        for p in primes_in_range(5, 1_000) {
            if !e.has_good_reduction(p) {
                continue;
            }
            let r = e.reduce(p).unwrap();
            if r.count_points() != r.count_points_direct() {
                mismatches += 1;
            }
        }
    }
    assert_eq!(mismatches, 0);

    let mut records = 0u64;
    for e in &fixed {
        for p in primes_in_range(5, 10_000) {
            if !e.has_good_reduction(p) {
                continue;
            }
            let t = e.reduce(p).unwrap().trace();
            assert!(
                (t as i128) * (t as i128) <= 4 * p as i128,
                "trace bound violated at {} p={p}: a_p={t}",
                e.label()
            );
            records += 1;
        }
    }

    let elapsed = clock.elapsed();
    assert!(elapsed < BUDGET, "took {elapsed:?}, budget {BUDGET:?}");
    println!(
        "ACCEPTANCE 5 PASS N(F_5)=9 both ways, mismatches=0, trace bound on {records} records elapsed_ms={}",
        elapsed.as_millis()
    );
}

#[test]
fn acceptance_06_isogeny_invariance() {
    const BUDGET: Duration = Duration::from_secs(60);
    let clock = Instant::now();

    let dom = curve("velu_dom", 1, 2, 0);
    let img = dom.two_isogenous().unwrap();
    assert_eq!((img.a2(), img.a4(), img.a6()), (-2, -7, 0));

    let mut common = 0u64;
    for p in primes_in_range(5, 10_000) {
        if !(dom.has_good_reduction(p) && img.has_good_reduction(p)) {
            continue;
        }
        assert_eq!(
            dom.reduce(p).unwrap().count_points(),
            img.reduce(p).unwrap().count_points(),
            "counts differ at p={p}"
        );
        common += 1;
    }
    assert!(common > 1_000);

    let dir = fresh_dir("velu");
    let file = write_pair_file(&dir);
    let out = bin()
        .args(["criterion"])
        .arg(&file)
        .args([
            "--labels",
            "velu_dom",
            "velu_img",
            "--pmax",
            "10000",
            "--lambda",
            "3,5,7,11,13",
        ])
        .output()
        .unwrap();
    assert_eq!(exit_code(&out), 0);
    assert_eq!(
        stdout_of(&out).lines().last().unwrap(),
        "VERDICT consistent p_max=10000 lambda=3,5,7,11,13"
    );

    let elapsed = clock.elapsed();
    assert!(elapsed < BUDGET, "took {elapsed:?}, budget {BUDGET:?}");
    println!(
        "ACCEPTANCE 6 PASS equal counts at {common} places, criterion exits 0 elapsed_ms={}",
        elapsed.as_millis()
    );
}

#[test]
fn acceptance_07_witness_detection() {
    const BUDGET: Duration = Duration::from_secs(60);
    const LAMBDA: [u64; 5] = [3, 5, 7, 11, 13];
    let clock = Instant::now();

    let dir = fresh_dir("witness");
    let file = write_pair_file(&dir);
    let out = bin()
        .args(["criterion"])
        .arg(&file)
        .args([
            "--labels",
            "e1",
            "e2",
            "--pmax",
            "10000",
            "--lambda",
            "3,5,7,11,13",
        ])
        .output()
        .unwrap();
    assert_eq!(exit_code(&out), 10);
    let text = stdout_of(&out);
    assert_eq!(text.lines().last().unwrap(), "VERDICT witness");
    let reported = text
        .lines()
        .find(|l| l.starts_with("WITNESS"))
        .expect("a witness line");

    // recompute the lexicographic minimum directly from the counts
    let e1 = curve("e1", 0, 1, 1);
    let e2 = curve("e2", 0, 2, 1);
    let mut first: Option<(u64, u64, u8)> = None;
    'scan: for p in primes_in_range(5, 10_000) {
        if !(e1.has_good_reduction(p) && e2.has_good_reduction(p)) {
            continue;
        }
        let n1 = e1.reduce(p).unwrap().count_points();
        let n2 = e2.reduce(p).unwrap().count_points();
        for &ell in &LAMBDA {
            let d1 = n1.is_multiple_of(ell);
            let d2 = n2.is_multiple_of(ell);
            if d1 != d2 {
                first = Some((p, ell, if d1 { 1 } else { 2 }));
                break 'scan;
            }
        }
    }
    let (p, ell, side) = first.expect("the pair is not isogenous");
    assert_eq!((p, ell, side), (5, 3, 1));
    assert_eq!(reported, format!("WITNESS p={p} ell={ell} side={side}"));

    let elapsed = clock.elapsed();
    assert!(elapsed < BUDGET, "took {elapsed:?}, budget {BUDGET:?}");
    println!(
        "ACCEPTANCE 7 PASS first witness p={p} ell={ell} side={side} certified independently elapsed_ms={}",
        elapsed.as_millis()
    );
}

#[test]
fn acceptance_08_twist_experiment() {
    const BUDGET: Duration = Duration::from_secs(120);
    const SPLITTING_10K: [u64; 24] = [
        139, 577, 631, 691, 1039, 1471, 2539, 3907, 3967, 4423, 5323, 5689, 6607, 6997, 7621, 7879,
        7951, 8233, 8887, 8929, 9337, 9403, 9421, 9733,
    ];
    const WITNESSES_10K: [u64; 15] = [
        139, 631, 691, 1039, 1471, 2539, 3907, 3967, 4423, 5323, 6607, 7879, 7951, 8887, 9403,
    ];
    let clock = Instant::now();

    let e = curve("e1", 0, 1, 1);
    let mut report = twist_witness_experiment(&e, -1, 3, 10_000).unwrap();
    if report.witness_places.is_empty() {
        report = twist_witness_experiment(&e, -1, 3, 100_000).unwrap();
        assert!(
            !report.witness_places.is_empty(),
            "no witness place up to 100000"
        );
    } else {
        assert_eq!(report.splitting_places, SPLITTING_10K);
        assert_eq!(report.witness_places, WITNESSES_10K);
        assert!((report.proportion() - 0.625).abs() < 1e-12);
    }
    assert_eq!(report.expected_residue, 1);
    assert!(report.all_congruent);

    // re-verify every claim about the splitting places from scratch
    let twist = e.quadratic_twist(-1).unwrap();
    for &p in &report.splitting_places {
        let r = e.reduce(p).unwrap();
        let n = r.count_points();
        let a = (p + 1) as i64 - n as i64;
        assert_eq!(n % 9, 0, "9 must divide N at p={p}");
        assert_eq!(p % 3, 1, "3 must divide p-1 at p={p}");
        assert_eq!(a.rem_euclid(3), 2, "a_p must be 2 mod 3 at p={p}");
        assert_eq!(r.ell_torsion_rank(3), 2, "full 3-torsion expected at p={p}");
    }
    for &p in &report.witness_places {
        let chi = legendre_symbol(-1, PrimeModulus::new(p).unwrap());
        assert_eq!(chi, -1, "witness places need chi(-1) = -1, p={p}");
        let m = twist.reduce(p).unwrap().count_points();
        assert_eq!(m % 3, 1, "twisted count must be 1 mod 3 at p={p}");
    }

    let elapsed = clock.elapsed();
    assert!(elapsed < BUDGET, "took {elapsed:?}, budget {BUDGET:?}");
    println!(
        "ACCEPTANCE 8 PASS splitting={} witnesses={} proportion={:.3} elapsed_ms={}",
        report.splitting_places.len(),
        report.witness_places.len(),
        report.proportion(),
        elapsed.as_millis()
    );
}

#[test]
fn acceptance_09_tame_inertia_bound() {
    const BUDGET: Duration = Duration::from_secs(5);
    let clock = Instant::now();

    let mut rows = 0u64;
    for g in 1..=3usize {
        for ell in primes_in_range(4 * g as u64 + 1, 100) {
            let set = enumerate_invariants(g, ell).unwrap();
            let expected_max = RationalInvariant::new(1, ell as u128 - 1).unwrap();
            assert_eq!(set.max(), &expected_max, "max at (g={g}, ell={ell})");
            assert!(bound_check(&set).below_bound, "bound at (g={g}, ell={ell})");
            let sep = pairwise_separation(g, ell).unwrap();
            assert!(sep.all_below_half, "separation at (g={g}, ell={ell})");
            rows += 1;
        }
    }
    assert!(rows > 0);

    let elapsed = clock.elapsed();
    assert!(elapsed < BUDGET, "took {elapsed:?}, budget {BUDGET:?}");
    println!(
        "ACCEPTANCE 9 PASS {rows} (g,ell) rows: max=1/(ell-1), all pairs separated elapsed_ms={}",
        elapsed.as_millis()
    );
}

#[test]
fn acceptance_10_determinism() {
    let run_twice = |configure: &dyn Fn() -> Command| {
        let a = configure().output().unwrap();
        let b = configure().output().unwrap();
        assert_eq!(exit_code(&a), exit_code(&b));
        assert_eq!(a.stdout, b.stdout, "stdout must be byte-identical");
        a
    };

    // count runs in separate directories with identical relative argv,
    // so the cache files must come out byte-identical too
    let caches: Vec<Vec<u8>> = ["det-count-a", "det-count-b"]
        .iter()
        .map(|tag| {
            let dir = fresh_dir(tag);
            write_pair_file(&dir);
            let out = bin()
                .current_dir(&dir)
                .args(["--seed", "7", "--jobs", "2", "count", "pair.curves"])
                .args(["--pmax", "100", "--cache", "counts.cache"])
                .output()
                .unwrap();
            assert_eq!(exit_code(&out), 0);
            (stdout_of(&out), fs::read(dir.join("counts.cache")).unwrap())
        })
        .map(|(stdout, cache)| {
            assert!(stdout.contains("TOTAL curves=4"));
            cache
        })
        .collect();
    assert_eq!(caches[0], caches[1]);

    let dir = fresh_dir("det-criterion");
    let file = write_pair_file(&dir);
    run_twice(&|| {
        let mut c = bin();
        c.args(["--seed", "7", "criterion"])
            .arg(&file)
            .args(["--labels", "e1", "e2", "--pmax", "200", "--lambda", "3,5"]);
        c
    });

    run_twice(&|| {
        let mut c = bin();
        c.args([
            "--seed", "7", "simulate", "--model", "twist", "--g", "1", "--ell", "5",
        ]);
        c
    });

    run_twice(&|| {
        let mut c = bin();
        c.args([
            "--seed", "7", "simulate", "--model", "product", "--g", "2", "--ell", "3",
        ]);
        c.args(["--trials", "500"]);
        c
    });

    run_twice(&|| {
        let mut c = bin();
        c.args(["--seed", "7", "group-audit", "--g", "1", "--ell", "5"]);
        c
    });

    run_twice(&|| {
        let mut c = bin();
        c.args(["--seed", "7", "raynaud-bound", "--g", "1", "--ellmax", "20"]);
        c
    });

    println!("ACCEPTANCE 10 PASS all commands byte-identical across reruns");
}
