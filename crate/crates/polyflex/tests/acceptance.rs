//! Acceptance criteria. Each test prints one `PASS`/`FAIL` line, written
//! straight to stderr so it shows even when output is captured, and then
//! asserts its verdict.

use std::io::Write;
use std::time::{Duration, Instant};

use polyflex::report::{AuditReport, Report, TrialStatus};
use polyflex::run::{self, AuditFlags, Loaded, RunConfig};
use polyflex_core::generate::{self, TriangleDisk};
use polyflex_core::numerics::{Tolerance, Vec3};
use polyflex_core::polygon_space::{self, PolygonPoint, SamplePolygon, SkewGenerator};
use polyflex_core::polyhedron_space::{self, IsotropyOptions, FIT_TOLERANCE};
use polyflex_core::surface::GraphSurface;
use polyflex_core::fixtures;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 0;

fn verdict(label: &str, name: &str, pass: bool, elapsed: Duration, detail: String) {
    let line = format!(
        "{label:<12} {:<4} {name}: {detail} [{:.2} s]\n",
        if pass { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64()
    );
    std::io::stderr().write_all(line.as_bytes()).unwrap();
    assert!(pass, "{label} ({name}) failed: {detail}");
}

#[test]
fn criterion_01_rp2_golden_value() {
    let start = Instant::now();
    let metric = fixtures::rp2_metric();
    let s = metric.surface();
    let q = fixtures::rp2_point();
    let (s1, s2) = fixtures::rp2_tangents();
    let polygon = metric.boundary_polygon().unwrap().polygon;
    let p = polyhedron_space::boundary_point(s, &q).unwrap();
    let t1 = polyhedron_space::d_delta(s, &s1).unwrap();
    let t2 = polyhedron_space::d_delta(s, &s2).unwrap();
    let omega = polygon_space::omega(&polygon, &p, &t1, &t2).unwrap();
    let elapsed = start.elapsed();
    let pass = (omega - 4.0).abs() <= 1e-12 && elapsed < Duration::from_secs(1);
    verdict("criterion 1", "projective-plane square", pass, elapsed, format!("omega = {omega}, expected 4 within 1e-12"));
}

fn random_polygon(rng: &mut ChaCha8Rng, k: usize) -> SamplePolygon {
    loop {
        let lengths = (0..k).map(|_| rng.random_range(0.5..1.5)).collect();
        if let Ok(p) = SamplePolygon::new(lengths) {
            return p;
        }
    }
}

/// `k` sides on one line through a random direction.
fn collinear_polygon(rng: &mut ChaCha8Rng, k: usize) -> (SamplePolygon, PolygonPoint) {
    let e = polygon_space::random_unit(rng);
    let mut signed: Vec<f64> = if k.is_multiple_of(2) { vec![] } else { vec![2.0, -1.0, -1.0] };
    while signed.len() < k {
        let sign = if signed.len().is_multiple_of(2) { 1.0 } else { -1.0 };
        signed.push(sign);
    }
    let polygon = SamplePolygon::new(signed.iter().map(|s| s.abs()).collect()).unwrap();
    (polygon, PolygonPoint(signed.iter().map(|&s| e * s).collect()))
}

fn polygon_samples() -> Vec<(SamplePolygon, PolygonPoint)> {
    let tol = Tolerance::default();
    (0..100u64)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(SEED.wrapping_add(i));
            let k = 4 + (i as usize % 9);
            let polygon = random_polygon(&mut rng, k);
            let p = polygon_space::sample_point(&polygon, &mut rng, &tol).unwrap();
            (polygon, p)
        })
        .collect()
}

fn collinear_samples() -> Vec<(SamplePolygon, PolygonPoint)> {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    (4..=12).map(|k| collinear_polygon(&mut rng, k)).collect()
}

#[test]
fn criterion_02_polygon_tangent_dimensions() {
    let start = Instant::now();
    let tol = Tolerance::default();
    let mut bad = Vec::new();
    for (polygon, p) in polygon_samples() {
        let k = polygon.len();
        let dim = polygon_space::tangent_basis(&polygon, &p, &tol).unwrap().len();
        if polygon_space::is_singular(&p, &tol) || dim != 2 * k - 3 {
            bad.push(format!("smooth k={k} dim={dim}"));
        }
    }
    for (polygon, p) in collinear_samples() {
        let k = polygon.len();
        let dim = polygon_space::tangent_basis(&polygon, &p, &tol).unwrap().len();
        if !polygon_space::is_singular(&p, &tol) || dim != 2 * k - 2 {
            bad.push(format!("collinear k={k} dim={dim}"));
        }
    }
    let elapsed = start.elapsed();
    let pass = bad.is_empty() && elapsed < Duration::from_secs(10);
    verdict("criterion 2", "polygon tangent dimensions", pass, elapsed, format!("100 smooth + 9 collinear polygons, mismatches {bad:?}"));
}

#[test]
fn criterion_03_omega_kernel() {
    let start = Instant::now();
    let tol = Tolerance::default();
    let mut failures = 0;
    let mut worst: f64 = 0.0;
    let samples = polygon_samples().into_iter().map(|s| (s, 3)).chain(collinear_samples().into_iter().map(|s| (s, 2)));
    let mut trials = 0;
    for ((polygon, p), expected) in samples {
        let r = polygon_space::omega_kernel_check(&polygon, &p, &tol).unwrap();
        worst = worst.max(r.orbit_residual);
        if r.kernel_dim != expected || r.orbit_residual > 1e-9 {
            failures += 1;
        }
        trials += 1;
    }
    verdict(
        "criterion 3",
        "kernel of the polygon form",
        failures == 0,
        start.elapsed(),
        format!("{trials} trials, {failures} failures, worst orbit residual {worst:.3e} (limit 1e-9)"),
    );
}

fn random_config(trials: usize, max_triangles: usize) -> RunConfig {
    RunConfig::with_seed(SEED, trials, max_triangles).unwrap()
}

fn checked(report: &AuditReport) -> usize {
    report.records.iter().filter(|r| r.status == TrialStatus::Checked).count()
}

#[test]
fn criterion_04_isotropy() {
    assert_eq!(IsotropyOptions::default().rel_tol, 1e-8);
    let start = Instant::now();
    let report = run::isotropy_random(&random_config(50, 20), AuditFlags::default()).unwrap();
    let elapsed = start.elapsed();
    let worst = report
        .records
        .iter()
        .filter_map(|r| Some(r.max_omega? / (r.threshold? / 1e-8)))
        .fold(0.0, f64::max);
    let within = report.records.iter().all(|r| r.max_omega.zip(r.threshold).is_some_and(|(m, t)| m <= t));
    let pass = report.pass && within && checked(&report) == 50 && elapsed < Duration::from_secs(60);
    verdict(
        "criterion 4",
        "isotropy on random disks",
        pass,
        elapsed,
        format!("{} of 50 checked, {} failed, worst |omega| / largest summand {worst:.3e} (limit 1e-8)", checked(&report), report.failed),
    );
}

#[test]
fn criterion_05_collapse_chain() {
    let start = Instant::now();
    let flags = AuditFlags { allow_nonorientable: false, verify_collapse_chain: true };
    let report = run::isotropy_random(&random_config(50, 20), flags).unwrap();
    let chains: Vec<_> = report.records.iter().filter_map(|r| r.chain.as_ref()).collect();
    let gap = chains.iter().map(|c| c.max_unchanged_gap / c.scale.max(1e-12)).fold(0.0, f64::max);
    let replaced = chains.iter().map(|c| c.max_replaced / c.scale.max(1e-12)).fold(0.0, f64::max);
    let steps: usize = chains.iter().map(|c| c.steps).sum();
    let pass = chains.len() == 50 && chains.iter().all(|c| c.pass) && gap <= 1e-8 && replaced <= 1e-8;
    verdict(
        "criterion 5",
        "collapse-chain consistency",
        pass,
        start.elapsed(),
        format!("{} chains, {steps} collapse steps, relative gap {gap:.3e}, relative replaced {replaced:.3e} (limit 1e-8)", chains.len()),
    );
}

fn counting_identity(s: &GraphSurface) -> bool {
    s.validate().is_ok_and(|d| d.counting_identity && 3 * d.triangles + d.boundary_len == 2 * d.edges)
}

#[test]
fn criterion_06_counting_identity() {
    let start = Instant::now();
    let mut surfaces = 0;
    let mut failures = 0;
    let mut check = |s: &GraphSurface| {
        surfaces += 1;
        if !counting_identity(s) {
            failures += 1;
        }
    };
    for s in [fixtures::single_triangle(), fixtures::tetrahedron_minus_face(), fixtures::rp2_square(), fixtures::thickened_tree(), fixtures::theta_torus()] {
        check(&s);
    }
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if !path.to_string_lossy().ends_with(".realization.json") {
            check(&Loaded::parse(std::fs::read_to_string(&path).unwrap()).unwrap().surface);
        }
    }
    for disk in generate::enumerate_disks(8) {
        let s = disk.to_surface().unwrap();
        check(&s);
        check(&s.cone_close().unwrap().surface);
    }
    for trial in 0..100 {
        let (mut s, _) = run::random_sample(SEED, trial, 20).unwrap();
        check(&s);
        while let Some(&i) = s.collapsible_positions().first() {
            s = s.collapse(i).unwrap().surface;
            check(&s);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    for n in 1..=20 {
        check(&TriangleDisk::random(&mut rng, n).to_surface().unwrap());
    }
    verdict("criterion 6", "counting identity", failures == 0, start.elapsed(), format!("{surfaces} surfaces, {failures} violations"));
}

#[test]
fn criterion_07_rank_counts() {
    let start = Instant::now();
    let report = run::lagrangian_random(&random_config(100, 20), AuditFlags::default()).unwrap();
    let mismatched = report
        .records
        .iter()
        .filter(|r| r.status == TrialStatus::Checked)
        .filter(|r| r.delta_rank != Some(r.boundary_len + 3) || r.mod_orbit_rank != Some(r.boundary_len - 3))
        .count();
    let pass = report.pass && mismatched == 0 && checked(&report) == 100;
    verdict(
        "criterion 7",
        "boundary-map rank counts",
        pass,
        start.elapsed(),
        format!("{} of 100 checked, {mismatched} rank mismatches, {} failed", checked(&report), report.failed),
    );
}

#[test]
fn criterion_08_cone_rigidity() {
    let start = Instant::now();
    let report = run::rigidity_random(&random_config(100, 20)).unwrap();
    let certs: Vec<_> = report.records.iter().filter_map(|r| r.certificates).collect();
    let not_six = certs.iter().filter(|c| c.cone_kernel_dim != 6).count();
    let violated = certs.iter().filter(|c| !c.implication).count();
    let pass = certs.len() == 100 && not_six == 0 && violated == 0;
    verdict(
        "criterion 8",
        "cone closures rigid",
        pass,
        start.elapsed(),
        format!("{} disks, {not_six} cone kernels != 6, {violated} implication violations", certs.len()),
    );
}

#[test]
fn criterion_09_fit_rotation_round_trip() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let cube = |rng: &mut ChaCha8Rng| Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    let (mut done, mut rejected, mut worst, mut errors) = (0, 0, 0.0f64, 0);
    while done < 1000 {
        let (p1, p2, w) = (cube(&mut rng), cube(&mut rng), cube(&mut rng));
        // a triangle needs two independent sides
        if p1.cross(&p2).norm() < 1e-2 * p1.norm() * p2.norm() {
            rejected += 1;
            continue;
        }
        let p = [p1, p2, -p1 - p2];
        let a0 = SkewGenerator::from_axial(w);
        match polyhedron_space::fit_rotation(p, p.map(|v| a0.apply(&v)), FIT_TOLERANCE) {
            Ok(a) => worst = worst.max((a.matrix() - a0.matrix()).norm() / a0.matrix().norm()),
            Err(_) => errors += 1,
        }
        done += 1;
    }
    let pass = errors == 0 && worst <= 1e-10;
    verdict(
        "criterion 9",
        "triangle rotation recovery",
        pass,
        start.elapsed(),
        format!("1000 generators, worst relative error {worst:.3e} (limit 1e-10), {errors} errors, {rejected} near-flat triangles redrawn"),
    );
}

#[test]
fn criterion_10_dome_audit() {
    let start = Instant::now();
    let report = run::dome_audit(&RunConfig::with_seed(SEED, 1, 8).unwrap()).unwrap();
    let elapsed = start.elapsed();
    let over = report.records.iter().filter(|r| r.mod_orbit_rank.zip(r.bound).is_some_and(|(m, b)| m > b)).count();
    let pass = report.pass && over == 0 && elapsed < Duration::from_secs(300);
    verdict(
        "criterion 10",
        "unit-dome rank bound",
        pass,
        elapsed,
        format!(
            "{} disks, {} checked, {} skipped, {over} over the bound, {} re-examined",
            report.trials, report.checked, report.skipped, report.reexamined
        ),
    );
}

#[test]
fn determinism() {
    let start = Instant::now();
    let config = random_config(10, 20);
    let flags = AuditFlags { allow_nonorientable: false, verify_collapse_chain: true };
    let runs = || {
        [
            run::isotropy_random(&config, flags).unwrap().json(),
            run::rigidity_random(&config).unwrap().json(),
            run::lagrangian_random(&config, flags).unwrap().json(),
            run::dome_audit(&RunConfig::with_seed(SEED, 1, 6).unwrap()).unwrap().text(),
            run::rp2_demo(&config).unwrap().json(),
        ]
    };
    let (a, b) = (runs(), runs());
    let same = a.iter().zip(&b).filter(|(x, y)| x == y).count();
    let hashes: Vec<String> = a.iter().map(|r| polyflex::format::short_hash(r.as_bytes())).collect();
    verdict("determinism", "byte-identical reports", same == a.len(), start.elapsed(), format!("{same} of {} reports byte-identical across runs, {hashes:?}", a.len()));
}
