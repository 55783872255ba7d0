//! Acceptance suite: one test per criterion, each printing a pass/fail line
//! with the measured numbers. Criteria run at their stated tolerances via
//! the same `--check` logic the CLI uses, so the suite and the binary cannot
//! drift apart.
//!
//! Criterion 1 is expected red on two of its six cells: the reference values
//! for the 2-D valley are not reproducible from the stated estimation
//! procedure (the converged grid values sit at ~0.55x of the printed ones);
//! the remaining four cells pass. The failure is intentional and documented.

use std::time::Instant;

use plaim::experiments::{run_experiment, ExperimentConfig, ExperimentKind};
use plaim::geometry::{estimate_constants, GridSpec};
use plaim::optim::{run_gd, run_nm_prime, GdConfig, NmPrimeConfig, NoiseModel};
use plaim::testbed;

fn run_checked(kind: ExperimentKind, seed: u64) -> (plaim::experiments::ExperimentOutcome, f64) {
    let dir = tempfile::tempdir().expect("tempdir");
    let mut cfg = ExperimentConfig::new(kind, dir.path().to_path_buf());
    cfg.check = true;
    cfg.seed = seed;
    let start = Instant::now();
    let outcome = run_experiment(&cfg).expect("experiment runs");
    (outcome, start.elapsed().as_secs_f64())
}

fn report(criterion: &str, failures: &[String]) {
    if failures.is_empty() {
        println!("criterion {criterion}: PASS");
    } else {
        println!("criterion {criterion}: FAIL");
        for f in failures {
            println!("  - {f}");
        }
    }
}

#[test]
fn criterion_1_figure1_table() {
    let (outcome, elapsed) = run_checked(ExperimentKind::Fig1Table, 0);
    for line in outcome.summary.lines().filter(|l| l.contains("Lambda")) {
        println!("  {line}");
    }
    let mut failures = outcome.check_failures.clone();
    if elapsed >= 60.0 {
        failures.push(format!("runtime {elapsed:.1}s exceeds 60s"));
    }
    report("1 (figure-1 rate table, +/-25%, <60s)", &failures);
    assert!(
        failures.is_empty(),
        "two 2-D cells are expected red; see the summary above and the \
         project notes: the printed 2-D references are not reproducible from \
         the stated grid procedure (converged values ~0.55x)"
    );
}

#[test]
fn criterion_2_figure5_constants() {
    let (outcome, _) = run_checked(ExperimentKind::Fig5Bounds, 0);
    for line in outcome.summary.lines().filter(|l| l.starts_with('[')) {
        println!("  {line}");
    }
    report("2 (quadratic-bound constants, +/-30%)", &outcome.check_failures);
    assert!(outcome.check_failures.is_empty());
}

#[test]
fn criterion_3_valley_aiming_value() {
    // a ~ 3e-4 within a factor of two on the 2-D valley
    let spec = testbed::valley_2d();
    let est = estimate_constants(&spec.objective, &GridSpec::new(1000)).expect("estimate");
    let ok = est.a_aim >= 1.5e-4 && est.a_aim <= 6e-4;
    let failures = if ok {
        vec![]
    } else {
        vec![format!("a = {:.4e} outside [1.5e-4, 6e-4]", est.a_aim)]
    };
    println!("  measured a = {:.6e} (reference 3e-4, factor-2 window)", est.a_aim);
    report("3 (valley aiming constant)", &failures);
    assert!(failures.is_empty());
}

#[test]
fn criterion_4_sine_valley_pl_bound() {
    // grid PL estimate must respect the closed-form upper bound on mu
    let spec = testbed::sine_valley(1e-3).expect("benchmark");
    let bound = spec.analytic["pl_mu_bound"];
    let est = estimate_constants(&spec.objective, &GridSpec::new(1000)).expect("estimate");
    let ok = est.mu_pl >= bound - 1e-6;
    println!(
        "  grid mu = {:.6e} vs bound (2 + eps - sqrt(eps^2 + 4))/2 = {:.6e}",
        est.mu_pl, bound
    );
    let failures = if ok {
        vec![]
    } else {
        vec![format!("mu = {:.6e} below bound {:.6e} - 1e-6", est.mu_pl, bound)]
    };
    report("4 (PL lower-bound consistency)", &failures);
    assert!(failures.is_empty());
}

#[test]
fn criterion_5_valley_dynamics() {
    // deterministic, must finish under 5 s
    let start = Instant::now();
    let spec = testbed::sine_valley(1e-3).expect("benchmark");
    let est = estimate_constants(&spec.objective, &GridSpec::new(1000)).expect("estimate");
    let gamma = 1.0 / est.l_smooth;
    let x0 = [0.0, 3.0];
    let gd = run_gd(
        &spec.objective,
        &GdConfig::new(gamma, 3000).unwrap(),
        &x0,
        &NoiseModel::none(),
    )
    .unwrap();
    let nm = run_nm_prime(
        &spec.objective,
        &NmPrimeConfig::new(0.9, gamma, 3000).unwrap(),
        &x0,
    )
    .unwrap();
    let elapsed = start.elapsed().as_secs_f64();

    let early_min = nm.aiming_values[..100]
        .iter()
        .copied()
        .filter(|v| v.is_finite())
        .fold(f64::INFINITY, f64::min);
    let ratio_1000 = nm.f_gaps[1000] / gd.f_gaps[1000];
    let ratio_3000 = nm.f_gaps[3000] / gd.f_gaps[3000];
    println!(
        "  min aiming[0..100] = {early_min:.4}, gap ratio at k=1000: {ratio_1000:.4}, \
         at k=3000: {ratio_3000:.4}, runtime {elapsed:.2}s"
    );
    let mut failures = Vec::new();
    if early_min >= 0.0 {
        failures.push(format!("no negative aiming in first 100 iterations ({early_min:.4})"));
    }
    if ratio_1000 <= 1.0 {
        failures.push(format!("momentum not behind descent at k=1000 ({ratio_1000:.4})"));
    }
    if ratio_3000 > 1.5 {
        failures.push(format!("momentum still {ratio_3000:.2}x behind at k=3000"));
    }
    if elapsed >= 5.0 {
        failures.push(format!("runtime {elapsed:.2}s exceeds 5s"));
    }
    report("5 (valley dynamics, <5s)", &failures);
    assert!(failures.is_empty());
}

#[test]
fn criterion_6_hard_instance_non_acceleration() {
    let (outcome, _) = run_checked(ExperimentKind::HardInstance, 0);
    for line in outcome
        .summary
        .lines()
        .filter(|l| l.starts_with('[') || l.contains("rate =") || l.contains("heuristic"))
    {
        println!("  {line}");
    }
    report("6 (hard-instance non-acceleration)", &outcome.check_failures);
    assert!(outcome.check_failures.is_empty());
}

#[test]
fn criterion_7_property_suites() {
    let (lemma, _) = run_checked(ExperimentKind::LemmaSuite, 0);
    let (envelopes, _) = run_checked(ExperimentKind::Envelopes, 0);
    for line in lemma
        .summary
        .lines()
        .chain(envelopes.summary.lines())
        .filter(|l| l.starts_with("[FAIL") || l.starts_with("[VIOLATED"))
    {
        println!("  {line}");
    }
    let mut failures = lemma.check_failures.clone();
    failures.extend(envelopes.check_failures.clone());
    report("7 (lemma/envelope/noise property suites)", &failures);
    assert!(failures.is_empty());
}

#[test]
fn criterion_8_sweep_qualitative_invariants() {
    let (fig2, _) = run_checked(ExperimentKind::Fig2Sweep, 0);
    let (fig7, _) = run_checked(ExperimentKind::Fig7SweepCont, 0);
    for line in fig2
        .summary
        .lines()
        .chain(fig7.summary.lines())
        .filter(|l| l.starts_with('['))
    {
        println!("  {line}");
    }
    let mut failures = fig2.check_failures.clone();
    failures.extend(fig7.check_failures.clone());
    report("8 (sweep maximizers and admissibility cutoff)", &failures);
    assert!(failures.is_empty());
}
