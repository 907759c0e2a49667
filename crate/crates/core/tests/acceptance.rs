//! Acceptance criteria, one PASS/FAIL line each. Run with
//! `cargo test -p asyncnet-core --test acceptance`.

use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use nalgebra::DVector;

use asyncnet::harness::{
    closed_form_suite, full_operator_check, fusion_suite, ordering_suite, preset, random_model, run_compare,
    ComparisonReport, LemmaCheck,
};
use asyncnet::linalg::{db, vec_of};
use asyncnet::moments::{MomentSet, SecondMomentMode};
use asyncnet::sim::StrategyKind;

const SEED: u64 = 20_130_901;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn from_checks(checks: &[LemmaCheck]) -> Outcome {
    let detail = checks
        .iter()
        .map(|c| format!("{}={:.3e}", c.name, c.measured))
        .collect::<Vec<_>>()
        .join(", ");
    outcome(checks.iter().all(|c| c.passed), detail)
}

fn timed(limit: Duration, body: impl FnOnce() -> Outcome) -> Outcome {
    let start = Instant::now();
    let mut o = body();
    let elapsed = start.elapsed();
    if elapsed > limit {
        o.passed = false;
    }
    o.detail = format!("{}; {:.1}s of {}s", o.detail, elapsed.as_secs_f64(), limit.as_secs());
    o
}

fn moments_of_random_models() -> Vec<MomentSet> {
    (0..100)
        .map(|i| {
            let (model, _) = random_model(SEED, i, 3, 12, 1, 0.01).unwrap();
            MomentSet::compute(&model, SecondMomentMode::Exact { threshold: 20 }).unwrap()
        })
        .collect()
}

fn criterion_1() -> Outcome {
    timed(Duration::from_secs(30), || {
        let mut worst_eig = f64::INFINITY;
        let mut worst_rows: f64 = 0.0;
        let mut worst_asym: f64 = 0.0;
        for ms in moments_of_random_models() {
            let c = &ms.c_p;
            let eig = c.clone().symmetric_eigen().eigenvalues.min();
            let rows = (c * DVector::repeat(c.nrows(), 1.0)).amax();
            worst_eig = worst_eig.min(eig);
            worst_rows = worst_rows.max(rows);
            worst_asym = worst_asym.max((c - c.transpose()).amax());
        }
        outcome(
            worst_eig >= -1e-9 && worst_rows <= 1e-9 && worst_asym == 0.0,
            format!("min eig {worst_eig:.3e}, max |C_p 1| {worst_rows:.3e}, asymmetry {worst_asym:.1e}"),
        )
    })
}

fn criterion_2() -> Outcome {
    let mut worst_mean: f64 = 0.0;
    let mut worst_joint: f64 = 0.0;
    let mut smallest = f64::INFINITY;
    for ms in moments_of_random_models() {
        worst_mean = worst_mean.max((&ms.a_bar * &ms.p_bar - &ms.p_bar).amax());
        // dense S with S[(i + N j), (k + N m)] = E a_ik a_jm
        let s = ms.second.to_dense();
        let p = vec_of(&ms.p_p);
        worst_joint = worst_joint.max((&s * &p - &p).amax());
        smallest = smallest.min(ms.p_bar.min()).min(p.min());
    }
    outcome(
        worst_mean <= 1e-10 && worst_joint <= 1e-10 && smallest > 0.0,
        format!("|A p - p| {worst_mean:.3e}, |S p - p| {worst_joint:.3e}, min entry {smallest:.3e}"),
    )
}

fn criterion_3() -> Outcome {
    timed(Duration::from_secs(60), || {
        from_checks(&fusion_suite(200_000, 100, SEED).unwrap())
    })
}

fn delta(report: &ComparisonReport, kind: StrategyKind) -> f64 {
    report.deltas_db[&kind].abs()
}

fn criterion_4(report: &ComparisonReport, elapsed: Duration) -> Outcome {
    let lms = report.theory.msd_lms.expect("common step-size");
    let mut worst: f64 = 0.0;
    let mut detail = Vec::new();
    for kind in StrategyKind::ALL {
        let predicted = match kind {
            StrategyKind::DistAsync | StrategyKind::CentAsync => lms.r#async,
            _ => lms.sync,
        };
        let gap = (db(predicted) - report.simulated[&kind].msd_db).abs();
        assert!((gap - delta(report, kind)).abs() < 1e-9);
        worst = worst.max(gap);
        detail.push(format!("{kind} {gap:.2} dB"));
    }
    let limit = Duration::from_secs(300);
    outcome(
        worst <= 1.0 && elapsed <= limit,
        format!(
            "{}; {:.1}s of {}s",
            detail.join(", "),
            elapsed.as_secs_f64(),
            limit.as_secs()
        ),
    )
}

fn criterion_5(report: &ComparisonReport) -> Outcome {
    let s = |k: StrategyKind| report.simulated[&k].msd_db;
    let a = (s(StrategyKind::DistAsync) - s(StrategyKind::CentAsync)).abs();
    let b = (s(StrategyKind::DistSync) - s(StrategyKind::CentSync)).abs();
    let t = report.theory.msd_linear;
    let rel = |x: f64, y: f64| (x - y).abs() / x.abs().max(y.abs());
    let ta = rel(t.dist_async, t.cent_async);
    let tb = rel(t.dist_sync, t.cent_sync);
    outcome(
        a <= 0.5 && b <= 0.5 && ta <= 1e-12 && tb <= 1e-12,
        format!("simulated async {a:.2} dB, sync {b:.2} dB; theory {ta:.1e}, {tb:.1e}"),
    )
}

fn criterion_6(report: &ComparisonReport) -> Outcome {
    let order = ordering_suite(20, SEED).unwrap();
    let t = report.theory.msd_linear;
    let desk_gap = t.dist_async - t.dist_sync;
    let sweep = &report.mu_sweep;
    let ok_sweep = sweep.len() == 2 && sweep[0].mu == 0.0025 && sweep[1].mu == 0.005;
    let lin = |x: f64| 10f64.powf(x / 10.0);
    let theory_gap = |i: usize| lin(sweep[i].theory_db.dist_async) - lin(sweep[i].theory_db.dist_sync);
    let sim_gap = |i: usize| {
        let s = &sweep[i].simulated;
        s[&StrategyKind::DistAsync].msd_linear - s[&StrategyKind::DistSync].msd_linear
    };
    if !ok_sweep {
        return outcome(false, "desk report lacks the {0.0025, 0.005} sweep");
    }
    let theory_ratio = theory_gap(1) / theory_gap(0);
    let sim_ratio = sim_gap(1) / sim_gap(0);
    outcome(
        order.passed && desk_gap > 0.0 && (theory_ratio - 2.0).abs() <= 1e-9 && (1.5..=2.5).contains(&sim_ratio),
        format!(
            "min relative gap {:.3} over random models; theory gap ratio {theory_ratio:.12}; simulated {sim_ratio:.3}",
            order.measured
        ),
    )
}

fn criterion_7(report: &ComparisonReport) -> Outcome {
    let t = &report.theory;
    let gap = t.rho_ms_async - t.rho_ms_sync;
    let upper = 0.05 * (1.0 - t.rho_ms_sync);
    let mus: Vec<f64> = report.rate_sweep.iter().map(|r| r.mu).collect();
    let slope = report.rate_slope.unwrap_or(f64::NAN);
    // independent slope from the endpoints
    let (first, last) = (&report.rate_sweep[0], &report.rate_sweep[report.rate_sweep.len() - 1]);
    let endpoint = (last.gap / first.gap).ln() / (last.mu / first.mu).ln();
    outcome(
        mus == [0.001, 0.002, 0.004]
            && gap >= 0.0
            && gap <= upper
            && (1.5..=2.5).contains(&slope)
            && (1.5..=2.5).contains(&endpoint),
        format!("gap {gap:.3e} <= {upper:.3e}; slope {slope:.4} (endpoints {endpoint:.4})"),
    )
}

fn criterion_8() -> Outcome {
    from_checks(&[closed_form_suite(20, SEED).unwrap()])
}

fn criterion_9() -> Outcome {
    from_checks(&[full_operator_check(10_000, SEED).unwrap()])
}

fn criterion_10() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(
        &cfg,
        r#"{"topology": {"kind": "random_geometric", "n": 6, "radius": 0.6, "seed": 2},
            "m": 2, "mu": 0.01, "q": {"choice": [0.5, 0.9]}, "eta": {"uniform": [0.4, 0.8]},
            "sigma_u2": {"uniform": [0.8, 1.8]}, "sigma_xi2": 0.01,
            "simulation": {"trials": 8, "iterations": 400, "fusion_t": 50}}"#,
    )
    .unwrap();
    let run = |tag: &str| {
        let out = dir.path().join(format!("report-{tag}.json"));
        let csv = dir.path().join(format!("curves-{tag}.csv"));
        let status = Command::new(env!("CARGO_BIN_EXE_asyncnet"))
            .args(["compare", "--config"])
            .arg(&cfg)
            .args(["--seed", "7", "--out"])
            .arg(&out)
            .arg("--csv")
            .arg(&csv)
            .status()
            .unwrap();
        assert!(status.code().is_some());
        (std::fs::read(out).unwrap(), std::fs::read(csv).unwrap())
    };
    let (r1, c1) = run("a");
    let (r2, c2) = run("b");
    outcome(
        r1 == r2 && c1 == c2 && !r1.is_empty() && c1.len() > 100,
        format!("report {} bytes, csv {} bytes", r1.len(), c1.len()),
    )
}

fn main() -> ExitCode {
    let mut results: Vec<(usize, &str, Outcome)> = Vec::new();
    let mut record = |n: usize, name: &'static str, o: Outcome| {
        println!(
            "{} criterion {n} ({name}): {}",
            if o.passed { "PASS" } else { "FAIL" },
            o.detail
        );
        results.push((n, name, o));
    };
    record(1, "C_p PSD with zero row sums", criterion_1());
    record(2, "Perron residuals", criterion_2());
    record(3, "fusion sampler moments", criterion_3());

    let start = Instant::now();
    let desk = run_compare(&preset("desk").unwrap()).unwrap();
    let elapsed = start.elapsed();
    let report = &desk.report;
    assert!(report.error.is_none(), "{:?}", report.error);
    record(4, "theory vs simulation", criterion_4(report, elapsed));
    record(5, "distributed/centralized matching", criterion_5(report));
    record(6, "async degradation and scaling", criterion_6(report));
    record(7, "rate matching", criterion_7(report));
    record(8, "closed-form cross-check", criterion_8());
    record(9, "full operator Monte Carlo", criterion_9());
    record(10, "determinism", criterion_10());

    let failed = results.iter().filter(|r| !r.2.passed).count();
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
