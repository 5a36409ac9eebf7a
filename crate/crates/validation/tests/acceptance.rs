//! Acceptance run: one PASS/FAIL line per criterion, then a summary.
//!
//! Runs without the libtest harness so every line is printed even when an
//! earlier criterion fails. Slow parts (the d=5 row and m=4) only run with
//! `BELLMAP_SLOW=1` or `--include-ignored`; otherwise they print SKIP.
//! A positional argument filters criteria by substring.

use std::f64::consts::TAU;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use bellmap::cglmp::optimize_cglmp;
use bellmap::lp::{critical_visibility, lr_feasible, VisibilityStatus};
use bellmap::optimize::{
    crossings, degree_range, grid, minimize_visibility, minimize_visibility_staged, scan_family,
    MultistartOptions, ObjectiveSpec, OptimizationResult, ScanOptions, ScanTemplate,
};
use bellmap::quantum::{
    mix_tables, probability_table, unitarity_deviation, NoiseModel, ObservableKind, ObservableSpec,
    ProbabilityTable, QuditState,
};
use bellmap::scenarios::{
    asymmetric_schmidt_coefficients, schmidt_family_state, NamedState, ASYMMETRIC_RESTARTS,
    RESTRICTED_M3_FROZEN,
};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<(bool, String), bellmap::Error>;

const SEED: u64 = 0;

fn opts(restarts: usize) -> MultistartOptions {
    MultistartOptions::with_restarts(restarts, SEED)
}

fn named(name: &str, d: usize) -> Result<QuditState, bellmap::Error> {
    Ok(NamedState::build(name, d)?.state)
}

fn u_spec(state: QuditState, noise: NoiseModel, m: usize) -> Result<ObjectiveSpec, bellmap::Error> {
    ObjectiveSpec::new(state, noise, ObservableKind::FullUnitary, m)
}

fn within(value: f64, expected: f64, tol: f64) -> bool {
    (value - expected).abs() <= tol
}

/// Search strategy per state. Larger spaces get a staged M1 start,
/// basin-hopping kicks, or a start from a related state's optimum.
enum Strategy {
    Plain,
    Staged { kicks: usize },
    Kicked,
    SeededFrom(&'static str),
}

fn table_entry(
    name: &str,
    d: usize,
    strategy: &Strategy,
    seeds: &[(String, OptimizationResult)],
) -> Result<OptimizationResult, bellmap::Error> {
    let spec = u_spec(named(name, d)?, NoiseModel::White, 2)?;
    let mut o = opts(30);
    match strategy {
        Strategy::Plain => minimize_visibility(&spec, &o),
        Strategy::Staged { kicks } => {
            o.kicks = *kicks;
            let stage = MultistartOptions {
                restarts: 30,
                ..opts(30)
            };
            minimize_visibility_staged(&spec, &o, ObservableKind::M1, &stage)
        }
        Strategy::Kicked => {
            o.kicks = 6;
            minimize_visibility(&spec, &o)
        }
        Strategy::SeededFrom(src) => {
            let from = seeds
                .iter()
                .find(|(n, _)| n == src)
                .map(|(_, r)| r)
                .ok_or_else(|| bellmap::Error::Scenario(format!("{src} must run before {name}")))?;
            o.kicks = 6;
            o.initial_points = vec![from.parameters.clone()];
            minimize_visibility(&spec, &o)
        }
    }
}

fn table_row(
    d: usize,
    rows: &[(&'static str, f64, Strategy)],
    tol: f64,
    budget: Duration,
) -> Check {
    let start = Instant::now();
    let mut done: Vec<(String, OptimizationResult)> = Vec::new();
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, expected, strategy) in rows {
        let r = table_entry(name, d, strategy, &done)?;
        let good = within(r.v_crit, *expected, tol);
        ok &= good;
        parts.push(format!("{name} {:.5} (want {expected})", r.v_crit));
        done.push((name.to_string(), r));
    }
    let elapsed = start.elapsed();
    ok &= elapsed < budget;
    parts.push(format!(
        "{:.0}s of {}s",
        elapsed.as_secs_f64(),
        budget.as_secs()
    ));
    Ok((ok, parts.join(", ")))
}

fn c1_qutrit_row() -> Check {
    let rows = [
        ("sym", 0.6962, Strategy::Plain),
        ("asym", 0.6861, Strategy::Plain),
        ("rank2-sym", 0.6821, Strategy::Plain),
    ];
    table_row(3, &rows, 5e-4, Duration::from_secs(300))
}

fn c2_d4_row() -> Check {
    let rows = [
        ("sym", 0.6906, Strategy::Staged { kicks: 0 }),
        ("asym", 0.6728, Strategy::Staged { kicks: 6 }),
        ("rank3-sym", 0.6824, Strategy::Kicked),
        ("rank3-asym", 0.6725, Strategy::SeededFrom("rank3-sym")),
        ("rank2-sym", 0.6442, Strategy::Plain),
    ];
    table_row(4, &rows, 2e-3, Duration::from_secs(7200))
}

fn c2_d5_row() -> Check {
    let rows = [
        ("sym", 0.6871, Strategy::Staged { kicks: 0 }),
        ("asym", 0.6632, Strategy::Staged { kicks: 6 }),
        ("rank4-sym", 0.6819, Strategy::Kicked),
        ("rank4-asym", 0.6637, Strategy::SeededFrom("rank4-sym")),
        ("rank3-sym", 0.6584, Strategy::Kicked),
        ("rank3-asym", 0.6485, Strategy::SeededFrom("rank3-sym")),
        ("rank2-sym", 0.6071, Strategy::Plain),
    ];
    table_row(5, &rows, 3e-3, Duration::from_secs(u64::MAX / 2))
}

fn c3_cglmp_cross_check() -> Check {
    let mut ok = true;
    let mut parts = Vec::new();
    for alpha in [50.0, 60.0, 70.0, 80.0, 90.0] {
        let state = schmidt_family_state(alpha, 45.0)?;
        let spec = ObjectiveSpec::new(state.clone(), NoiseModel::White, ObservableKind::M1, 2)?;
        let lp = minimize_visibility(&spec, &opts(30))?.v_crit;
        let cg = optimize_cglmp(&state, ObservableKind::M1, &opts(30))?
            .evaluation
            .implied_visibility;
        ok &= within(lp, cg, 5e-4);
        parts.push(format!("{alpha}: lp {lp:.5} cglmp {cg:.5}"));
    }
    Ok((ok, parts.join(", ")))
}

const NEIGHBOR_PASSES: usize = 20;

fn line_scan(kind: ObservableKind, alphas: &[f64]) -> Result<Vec<f64>, bellmap::Error> {
    let family = |a: f64, b: f64| schmidt_family_state(a, b);
    let scan = ScanOptions {
        multistart: opts(12),
        warm_start: true,
        reverse_pass: true,
        neighbor_passes: NEIGHBOR_PASSES,
    };
    let records = scan_family(
        &family,
        &grid(alphas, &[45.0]),
        &ScanTemplate::new(NoiseModel::White, kind, 2),
        &scan,
    )?;
    Ok(records.iter().map(|r| r.v_crit).collect())
}

fn matches_within(found: &[f64], expected: &[f64], tol: f64) -> bool {
    found.len() == expected.len()
        && found
            .iter()
            .zip(expected)
            .all(|(f, e)| (f - e).abs() <= tol)
}

fn c4_crossovers() -> Check {
    let alphas = degree_range(40.0, 80.0, 0.5)?;
    let m1 = line_scan(ObservableKind::M1, &alphas)?;
    let m2 = line_scan(ObservableKind::M2, &alphas)?;
    let m3 = line_scan(ObservableKind::M3, &alphas)?;
    let margin = 1e-4;
    let c21 = crossings(&alphas, &m1, &m2, margin)?;
    let c32 = crossings(&alphas, &m2, &m3, margin)?;
    let ok = matches_within(&c21, &[49.0, 73.0], 1.5) && matches_within(&c32, &[54.0, 70.0], 1.5);
    Ok((
        ok,
        format!("M2<M1 at {c21:?} (want ~49, ~73), M3<M2 at {c32:?} (want ~54, ~70)"),
    ))
}

fn restricted_m3(state: QuditState) -> Result<ObjectiveSpec, bellmap::Error> {
    ObjectiveSpec::new(state, NoiseModel::White, ObservableKind::M3, 2)?
        .with_frozen(&RESTRICTED_M3_FROZEN)
}

const POINT_RESTARTS: usize = 300;

fn c5_interferometer_economy() -> Check {
    let axis = degree_range(0.0, 90.0, 5.0)?;
    let points = grid(&axis, &axis);
    let family = |a: f64, b: f64| schmidt_family_state(a, b);
    let scan = ScanOptions {
        multistart: opts(10),
        warm_start: true,
        reverse_pass: true,
        // The restricted landscape has narrow basins that random restarts
        // rarely hit; settings found at one point carry over to its neighbors.
        neighbor_passes: NEIGHBOR_PASSES,
    };
    let u = scan_family(
        &family,
        &points,
        &ScanTemplate::new(NoiseModel::White, ObservableKind::FullUnitary, 2),
        &scan,
    )?;
    let mut template = ScanTemplate::new(NoiseModel::White, ObservableKind::M3, 2);
    template.frozen = RESTRICTED_M3_FROZEN.to_vec();
    let m3 = scan_family(&family, &points, &template, &scan)?;
    let (mut worst, mut at) = (f64::NEG_INFINITY, (f64::NAN, f64::NAN));
    for (a, b) in u.iter().zip(&m3) {
        let diff = b.v_crit - a.v_crit;
        // NaN (a failed point) must not pass silently.
        if diff.is_nan() || diff > worst {
            worst = if diff.is_nan() { f64::INFINITY } else { diff };
            at = (a.alpha_deg, a.beta_deg);
        }
    }
    let mut ok = worst < 0.015;
    let mut parts = vec![format!("max diff {worst:.5} at {at:?}")];

    let coeffs = asymmetric_schmidt_coefficients(3, &opts(ASYMMETRIC_RESTARTS))?;
    let smallest = coeffs.iter().copied().fold(f64::INFINITY, f64::min);
    let sym_alpha = (1.0f64 / 3.0).sqrt().acos().to_degrees();
    let asym_alpha = smallest.acos().to_degrees();
    for (label, alpha) in [("sym", sym_alpha), ("asym", asym_alpha)] {
        let state = schmidt_family_state(alpha, 45.0)?;
        let vu = minimize_visibility(
            &u_spec(state.clone(), NoiseModel::White, 2)?,
            &opts(POINT_RESTARTS),
        )?
        .v_crit;
        let vm = minimize_visibility(&restricted_m3(state)?, &opts(POINT_RESTARTS))?.v_crit;
        ok &= within(vm, vu, 5e-4);
        parts.push(format!("{label} ({alpha:.2}): u {vu:.5} m3 {vm:.5}"));
    }
    Ok((ok, parts.join(", ")))
}

#[allow(clippy::approx_constant)] // the expected value as stated
fn c6_product_noise() -> Check {
    let r = minimize_visibility(
        &u_spec(named("rank2-sym", 3)?, NoiseModel::Product, 2)?,
        &opts(30),
    )?;
    Ok((
        within(r.v_crit, 0.7071, 5e-4),
        format!("{:.5} (want 0.7071)", r.v_crit),
    ))
}

fn c7_dephasing() -> Check {
    let spec = u_spec(schmidt_family_state(45.0, 45.0)?, NoiseModel::Dephasing, 2)?;
    let r = minimize_visibility(&spec, &opts(30))?;
    let (signal, noise) = spec.tables(&r.parameters)?;
    let exact = critical_visibility(&signal, &noise)?;
    let mut ok = exact.status == VisibilityStatus::Optimal;
    let mut parts = vec![format!("v_crit {:.5}", exact.v_crit)];
    // The mixture at each threshold must itself have no local model.
    for v in [0.5, 0.2] {
        let local = lr_feasible(&mix_tables(&signal, &noise, v)?)?.feasible;
        let below = exact.v_crit < v && !local;
        ok &= below;
        parts.push(format!("violation at v={v}: {below}"));
    }
    Ok((ok, parts.join(", ")))
}

fn c8_bound_entanglement() -> Check {
    let mut ok = true;
    let mut parts = Vec::new();
    for name in ["bennett", "horodecki"] {
        let r = minimize_visibility(&u_spec(named(name, 3)?, NoiseModel::White, 2)?, &opts(50))?;
        let none = format!("{:.4}", r.v_crit) == "1.0000";
        ok &= none;
        parts.push(format!("{name} {:.5} ({:?})", r.v_crit, r.status));
    }
    Ok((ok, parts.join(", ")))
}

/// `m`-setting parameters repeating the last setting of each party.
fn duplicated(spec: &ObjectiveSpec, r: &OptimizationResult) -> Result<Vec<f64>, bellmap::Error> {
    let pad = |side: &[ObservableSpec]| {
        let mut v = side.to_vec();
        while v.len() < spec.m {
            v.push(side[side.len() - 1].clone());
        }
        v
    };
    let all: Vec<ObservableSpec> = pad(&r.alice).into_iter().chain(pad(&r.bob)).collect();
    spec.compress(&all)
}

fn settings_count(ms: &[usize]) -> Check {
    let mut ok = true;
    let mut parts = Vec::new();
    for alpha in [49.0, 73.0] {
        let state = schmidt_family_state(alpha, 45.0)?;
        let base = minimize_visibility(&u_spec(state.clone(), NoiseModel::White, 2)?, &opts(30))?;
        for &m in ms {
            let spec = u_spec(state.clone(), NoiseModel::White, m)?;
            let mut o = opts(6);
            o.initial_points = vec![duplicated(&spec, &base)?];
            let r = minimize_visibility(&spec, &o)?;
            ok &= within(r.v_crit, base.v_crit, 5e-4);
            parts.push(format!(
                "{alpha}: m=2 {:.5} m={m} {:.5}",
                base.v_crit, r.v_crit
            ));
        }
    }
    Ok((ok, parts.join(", ")))
}

fn c9_settings_m3() -> Check {
    settings_count(&[3])
}

fn c9_settings_m4() -> Check {
    settings_count(&[4])
}

fn random_pure(d: usize, rng: &mut ChaCha8Rng) -> QuditState {
    let amps = (0..d * d)
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    QuditState::pure_normalized(d, amps).expect("nonzero amplitudes")
}

fn random_settings(
    kind: ObservableKind,
    d: usize,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<ObservableSpec> {
    (0..n)
        .map(|_| {
            let angles = (0..kind.angle_count(d))
                .map(|_| rng.random_range(0.0..TAU))
                .collect();
            ObservableSpec::new(kind, d, angles).expect("angle count matches")
        })
        .collect()
}

/// Largest CHSH expression over the eight facet orientations.
fn chsh_max(t: &ProbabilityTable) -> f64 {
    let e = |i, k| {
        let mut s = 0.0;
        for a in 0..2 {
            for b in 0..2 {
                s += if a == b { 1.0 } else { -1.0 } * t.get(i, k, a, b);
            }
        }
        s
    };
    let es = [e(0, 0), e(0, 1), e(1, 0), e(1, 1)];
    (0..4)
        .map(|neg| {
            let s: f64 = es
                .iter()
                .enumerate()
                .map(|(j, x)| if j == neg { -x } else { *x })
                .sum();
            s.abs()
        })
        .fold(0.0, f64::max)
}

fn c10_properties() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut failures = Vec::new();

    let worst_unitarity = ObservableKind::ALL
        .iter()
        .flat_map(|&k| random_settings(k, 3, 50, &mut rng))
        .map(|s| unitarity_deviation(&s.compile()))
        .fold(0.0, f64::max);
    if worst_unitarity > 1e-12 {
        failures.push(format!("unitarity {worst_unitarity:e}"));
    }

    for _ in 0..50 {
        let state = random_pure(3, &mut rng);
        let a = random_settings(ObservableKind::FullUnitary, 3, 2, &mut rng);
        let b = random_settings(ObservableKind::FullUnitary, 3, 2, &mut rng);
        let t = probability_table(&state, &a, &b)?;
        for i in 0..2 {
            for k in 0..2 {
                let sum: f64 = (0..9).map(|ab| t.get(i, k, ab / 3, ab % 3)).sum();
                if (sum - 1.0).abs() > 1e-12 {
                    failures.push(format!("normalization {sum}"));
                }
            }
        }
        // Feasibility is monotone in v: local below v_crit, nonlocal above.
        let noise = ProbabilityTable::uniform(2, 3)?;
        let v = critical_visibility(&t, &noise)?.v_crit;
        if v < 0.99 {
            let below = lr_feasible(&mix_tables(&t, &noise, v - 0.01)?)?.feasible;
            let above = lr_feasible(&mix_tables(&t, &noise, v + 0.01)?)?.feasible;
            if !below || above {
                failures.push(format!("monotonicity at v_crit {v}"));
            }
        }
    }

    // At d=2 the local polytope is cut out by the CHSH facets, which gives a
    // brute-force oracle for the LP's verdict.
    let mut checked = 0;
    while checked < 100 {
        let state = random_pure(2, &mut rng);
        let a = random_settings(ObservableKind::FullUnitary, 2, 2, &mut rng);
        let b = random_settings(ObservableKind::FullUnitary, 2, 2, &mut rng);
        let t = probability_table(&state, &a, &b)?;
        let s = chsh_max(&t);
        if (s - 2.0).abs() < 1e-6 {
            continue;
        }
        checked += 1;
        if lr_feasible(&t)?.feasible != (s < 2.0) {
            failures.push(format!("d=2 verdict disagrees with CHSH {s}"));
        }
    }

    let spec = u_spec(schmidt_family_state(60.0, 45.0)?, NoiseModel::White, 2)?;
    let r = minimize_visibility(&spec, &opts(5))?;
    let mut worst_jump: f64 = 0.0;
    for _ in 0..20 {
        let x: Vec<f64> = r
            .parameters
            .iter()
            .map(|p| p + 1e-3 * rng.random_range(-1.0..1.0))
            .collect();
        worst_jump = worst_jump.max((spec.evaluate(&x)?.v_crit - r.v_crit).abs());
    }
    if worst_jump > 1e-2 {
        failures.push(format!("continuity jump {worst_jump}"));
    }

    let again = minimize_visibility(&spec, &opts(5))?;
    if again.v_crit.to_bits() != r.v_crit.to_bits() || again.parameters != r.parameters {
        failures.push("fixed seed not reproducible".into());
    }

    let detail = if failures.is_empty() {
        format!("unitarity {worst_unitarity:.1e}, continuity {worst_jump:.1e}")
    } else {
        failures.join("; ")
    };
    Ok((failures.is_empty(), detail))
}

struct Criterion {
    id: &'static str,
    title: &'static str,
    slow: bool,
    run: fn() -> Check,
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let criteria = [
        Criterion {
            id: "c1",
            title: "qutrit white-noise visibilities",
            slow: false,
            run: c1_qutrit_row,
        },
        Criterion {
            id: "c2-d4",
            title: "d=4 white-noise visibilities",
            slow: false,
            run: c2_d4_row,
        },
        Criterion {
            id: "c2-d5",
            title: "d=5 white-noise visibilities",
            slow: true,
            run: c2_d5_row,
        },
        Criterion {
            id: "c3",
            title: "LP vs CGLMP under M1",
            slow: false,
            run: c3_cglmp_cross_check,
        },
        Criterion {
            id: "c4",
            title: "multiport crossover angles",
            slow: false,
            run: c4_crossovers,
        },
        Criterion {
            id: "c5",
            title: "restricted M3 vs U(3)",
            slow: false,
            run: c5_interferometer_economy,
        },
        Criterion {
            id: "c6",
            title: "product noise",
            slow: false,
            run: c6_product_noise,
        },
        Criterion {
            id: "c7",
            title: "dephasing noise",
            slow: false,
            run: c7_dephasing,
        },
        Criterion {
            id: "c8",
            title: "bound entangled states",
            slow: false,
            run: c8_bound_entanglement,
        },
        Criterion {
            id: "c9-m3",
            title: "three settings per party",
            slow: false,
            run: c9_settings_m3,
        },
        Criterion {
            id: "c9-m4",
            title: "four settings per party",
            slow: true,
            run: c9_settings_m4,
        },
        Criterion {
            id: "c10",
            title: "property checks",
            slow: false,
            run: c10_properties,
        },
    ];
    if args.iter().any(|a| a == "--list") {
        for c in &criteria {
            println!("{}: test", c.id);
        }
        return ExitCode::SUCCESS;
    }
    let slow = std::env::var("BELLMAP_SLOW").is_ok_and(|v| v == "1")
        || args
            .iter()
            .any(|a| a == "--ignored" || a == "--include-ignored");
    let filter = args.iter().find(|a| !a.starts_with('-'));

    let (mut passed, mut failed, mut skipped) = (0, 0, 0);
    for c in &criteria {
        if filter.is_some_and(|f| !c.id.contains(f.as_str())) {
            continue;
        }
        if c.slow && !slow {
            println!("SKIP {} {} (slow; set BELLMAP_SLOW=1)", c.id, c.title);
            skipped += 1;
            continue;
        }
        let start = Instant::now();
        let (ok, detail) = match (c.run)() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        let secs = start.elapsed().as_secs_f64();
        println!(
            "{} {} {}: {detail} [{secs:.1}s]",
            if ok { "PASS" } else { "FAIL" },
            c.id,
            c.title
        );
        if ok {
            passed += 1;
        } else {
            failed += 1;
        }
    }
    println!("acceptance: {passed} passed, {failed} failed, {skipped} skipped");
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
