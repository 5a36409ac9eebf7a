use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use bellmap::cglmp::optimize_cglmp;
use bellmap::lp::{
    atom_assignment, critical_visibility, lr_feasible, to_cplex_lp, LrLpInstance, VisibilityStatus,
};
use bellmap::optimize::{
    crossings, degree_range, grid, minimize_visibility, minimize_visibility_staged,
    MultistartOptions, ObjectiveSpec, ScanOptions, ScanRecord, ScanTemplate,
};
use bellmap::quantum::io::{
    format_probability_table, parse_density_matrix, parse_probability_table,
};
use bellmap::quantum::{
    noise_state, probability_table, NoiseModel, ObservableKind, ObservableSpec, ProbabilityTable,
    QuditState,
};
use bellmap::scenarios::{catalog as list_catalog, schmidt_family_state, NamedState};
use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::output::{emit, fmt_v, round4, write_pgm};
use crate::{
    CatalogArgs, CheckDataArgs, DiffMapArgs, GridArgs, LineArgs, MapArgs, OptimizeArgs, SearchArgs,
    StateArgs,
};

/// Differences smaller than this do not count as one kind beating another.
pub const CROSSING_MARGIN: f64 = 1e-4;

/// JSON record of one `optimize` run. Field order is fixed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizeRecord {
    pub state: String,
    pub d: usize,
    pub alpha_deg: Option<f64>,
    pub beta_deg: Option<f64>,
    pub kind: String,
    pub m: usize,
    pub noise: String,
    pub frozen: Vec<usize>,
    /// Rounded to four decimals.
    pub v_crit: f64,
    pub v_crit_exact: f64,
    pub status: String,
    pub extended_visibility: f64,
    pub restarts: usize,
    pub seed: u64,
    pub best_restart: usize,
    pub evaluations: usize,
    pub alice: Vec<Vec<f64>>,
    pub bob: Vec<Vec<f64>>,
    pub wall_time_s: f64,
}

#[derive(Debug, Serialize)]
struct CheckRecord {
    file: String,
    format: &'static str,
    m: usize,
    d: usize,
    verdict: &'static str,
    v_crit: Option<f64>,
    status: Option<&'static str>,
    witness: Option<String>,
}

#[derive(Debug, Deserialize)]
struct SettingsFile {
    alice: Vec<ObservableSpec>,
    bob: Vec<ObservableSpec>,
}

fn status_label(s: VisibilityStatus) -> &'static str {
    match s {
        VisibilityStatus::Optimal => "violation",
        VisibilityStatus::NoViolation => "no_violation",
        VisibilityStatus::SolverFailure => "solver_failure",
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn in_file(path: &Path, e: bellmap::Error) -> CliError {
    CliError::Usage(format!("{}: {e}", path.display()))
}

fn threads(search: &SearchArgs) -> Result<Option<usize>, CliError> {
    if search.threads.is_some() {
        return Ok(search.threads);
    }
    match std::env::var("BELLMAP_THREADS") {
        Ok(v) if !v.trim().is_empty() => v.trim().parse().map(Some).map_err(|_| {
            CliError::Usage(format!(
                "BELLMAP_THREADS must be a positive integer, got '{v}'"
            ))
        }),
        _ => Ok(None),
    }
}

fn multistart(search: &SearchArgs) -> Result<MultistartOptions, CliError> {
    if search.restarts == 0 {
        return Err(CliError::Usage("--restarts must be at least 1".into()));
    }
    Ok(MultistartOptions {
        restarts: search.restarts,
        seed: search.seed,
        polish_rounds: search.polish,
        kicks: search.kicks,
        kick_scale: search.kick_scale,
        threads: threads(search)?,
        warm_start_lp: !search.no_warm_start,
        ..Default::default()
    })
}

fn noise(search: &SearchArgs) -> Result<NoiseModel, CliError> {
    match &search.noise_file {
        Some(p) => Ok(NoiseModel::Custom(
            parse_density_matrix(&read(p)?).map_err(|e| in_file(p, e))?,
        )),
        None => Ok(search.noise.clone()),
    }
}

fn frozen(search: &SearchArgs) -> Vec<usize> {
    search.freeze.clone().map(|f| f.0).unwrap_or_default()
}

/// Inclusive `start:end:step` range in degrees.
fn range(text: &str) -> Result<Vec<f64>, CliError> {
    let parts: Vec<f64> = text
        .split(':')
        .map(|t| t.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| CliError::Usage(format!("bad range '{text}', expected start:end:step")))?;
    match parts[..] {
        [a, b, s] => Ok(degree_range(a, b, s)?),
        [a] => Ok(vec![a]),
        _ => Err(CliError::Usage(format!(
            "bad range '{text}', expected start:end:step"
        ))),
    }
}

struct Selected {
    label: String,
    alpha: Option<f64>,
    beta: Option<f64>,
    state: QuditState,
}

fn select_state(args: &StateArgs) -> Result<Selected, CliError> {
    let chosen = [
        args.state.is_some(),
        args.alpha.is_some(),
        args.state_file.is_some(),
    ];
    if chosen.iter().filter(|&&c| c).count() != 1 {
        return Err(CliError::Usage(
            "give exactly one of --state, --alpha or --state-file".into(),
        ));
    }
    if let Some(name) = &args.state {
        let named = NamedState::build(name, args.d)?;
        return Ok(Selected {
            label: named.name,
            alpha: None,
            beta: None,
            state: named.state,
        });
    }
    if let Some(alpha) = args.alpha {
        return Ok(Selected {
            label: format!("psi({alpha}, {})", args.beta),
            alpha: Some(alpha),
            beta: Some(args.beta),
            state: schmidt_family_state(alpha, args.beta)?,
        });
    }
    let path = args.state_file.as_ref().expect("one selection is set");
    Ok(Selected {
        label: path.display().to_string(),
        alpha: None,
        beta: None,
        state: parse_density_matrix(&read(path)?).map_err(|e| in_file(path, e))?,
    })
}

pub fn optimize(args: &OptimizeArgs) -> Result<(), CliError> {
    let sel = select_state(&args.state)?;
    let search = &args.search;
    let spec = ObjectiveSpec::new(sel.state.clone(), noise(search)?, search.kind, search.m)?
        .with_frozen(&frozen(search))?;
    let opts = multistart(search)?;
    let start = Instant::now();
    let result = match args.stage {
        Some(stage) => minimize_visibility_staged(&spec, &opts, stage, &opts),
        None => minimize_visibility(&spec, &opts),
    }?;
    if result.status == VisibilityStatus::SolverFailure {
        return Err(CliError::Compute(
            "LP solver failed at the best settings".into(),
        ));
    }
    let record = OptimizeRecord {
        state: sel.label,
        d: sel.state.dim(),
        alpha_deg: sel.alpha,
        beta_deg: sel.beta,
        kind: search.kind.to_string(),
        m: search.m,
        noise: spec.noise.to_string(),
        frozen: spec.frozen().to_vec(),
        v_crit: round4(result.v_crit),
        v_crit_exact: result.v_crit,
        status: status_label(result.status).into(),
        extended_visibility: result.extended_visibility,
        restarts: result.restarts(),
        seed: result.seed,
        best_restart: result.best_restart,
        evaluations: result.evaluations(),
        alice: result.alice.iter().map(|o| o.angles.clone()).collect(),
        bob: result.bob.iter().map(|o| o.angles.clone()).collect(),
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    let json =
        serde_json::to_string_pretty(&record).map_err(|e| CliError::Compute(e.to_string()))? + "\n";
    emit(None, &json)?;
    if let Some(p) = &args.out {
        emit(Some(p), &json)?;
    }
    if args.dump_lp.is_some() || args.table_out.is_some() {
        let (signal, noise) = spec.tables(&result.parameters)?;
        if let Some(p) = &args.dump_lp {
            let lp = LrLpInstance::new(&signal, &noise)?.to_linear_program(true);
            emit(Some(p), &to_cplex_lp(&lp))?;
        }
        if let Some(p) = &args.table_out {
            emit(Some(p), &format_probability_table(&signal))?;
        }
    }
    Ok(())
}

fn scan_options(search: &SearchArgs, reverse_pass: bool) -> Result<ScanOptions, CliError> {
    Ok(ScanOptions {
        multistart: multistart(search)?,
        warm_start: !search.no_warm_start,
        reverse_pass,
        neighbor_passes: search.neighbor_passes,
    })
}

fn family(alpha: f64, beta: f64) -> bellmap::Result<QuditState> {
    schmidt_family_state(alpha, beta)
}

fn run_grid(
    points: &[(f64, f64)],
    kind: ObservableKind,
    frozen: Vec<usize>,
    search: &SearchArgs,
    reverse_pass: bool,
) -> Result<Vec<ScanRecord>, CliError> {
    let template = ScanTemplate {
        frozen,
        ..ScanTemplate::new(noise(search)?, kind, search.m)
    };
    // Surface template errors (bad frozen indices, sizes) as usage errors up front.
    template.spec(schmidt_family_state(points[0].0, points[0].1)?)?;
    Ok(bellmap::optimize::scan_family(
        &family,
        points,
        &template,
        &scan_options(search, reverse_pass)?,
    )?)
}

fn grid_axes(g: &GridArgs) -> Result<(Vec<f64>, Vec<f64>), CliError> {
    Ok((range(&g.alphas)?, range(&g.betas)?))
}

fn report_failures(records: &[ScanRecord]) {
    for r in records.iter().filter(|r| !r.is_ok()) {
        eprintln!(
            "warning: alpha {} beta {}: {}",
            r.alpha_deg,
            r.beta_deg,
            r.error.as_deref().unwrap_or("no result")
        );
    }
}

fn all_failed(records: &[ScanRecord]) -> Result<(), CliError> {
    if records.iter().all(|r| !r.is_ok()) {
        return Err(CliError::Compute("every grid point failed".into()));
    }
    Ok(())
}

pub fn map(args: &MapArgs) -> Result<(), CliError> {
    let (alphas, betas) = grid_axes(&args.grid)?;
    let points = grid(&alphas, &betas);
    let records = run_grid(
        &points,
        args.search.kind,
        frozen(&args.search),
        &args.search,
        false,
    )?;
    report_failures(&records);
    all_failed(&records)?;
    let mut csv = String::from("alpha_deg,beta_deg,v_crit,restarts,seed\n");
    for r in &records {
        let _ = writeln!(
            csv,
            "{},{},{},{},{}",
            r.alpha_deg,
            r.beta_deg,
            fmt_v(r.v_crit),
            r.restarts,
            r.seed
        );
    }
    emit(args.out.as_deref(), &csv)?;
    if let Some(p) = &args.pgm {
        let values: Vec<f64> = records.iter().map(|r| r.v_crit).collect();
        write_pgm(p, &values, &alphas, &betas, "v_crit")?;
    }
    Ok(())
}

pub fn line(args: &LineArgs) -> Result<(), CliError> {
    let alphas = range(&args.alphas)?;
    let points: Vec<(f64, f64)> = alphas.iter().map(|&a| (a, args.beta)).collect();
    let kinds: Vec<&str> = args
        .kinds
        .split(',')
        .map(str::trim)
        .filter(|k| !k.is_empty())
        .collect();
    if kinds.is_empty() {
        return Err(CliError::Usage("--kinds is empty".into()));
    }
    let mut csv = String::from("kind,alpha_deg,beta_deg,v_crit,restarts,seed\n");
    let mut series: Vec<(String, Vec<f64>)> = Vec::new();
    for &name in &kinds {
        let values = if name == "cglmp" {
            let opts = multistart(&args.search)?;
            alphas
                .iter()
                .map(|&a| {
                    let state = schmidt_family_state(a, args.beta)?;
                    let best = optimize_cglmp(&state, ObservableKind::M1, &opts)?;
                    Ok(best.evaluation.implied_visibility.min(1.0))
                })
                .collect::<Result<Vec<f64>, CliError>>()?
        } else {
            let kind: ObservableKind = name.parse()?;
            let records = run_grid(
                &points,
                kind,
                frozen(&args.search),
                &args.search,
                args.reverse_pass,
            )?;
            report_failures(&records);
            all_failed(&records)?;
            records.iter().map(|r| r.v_crit).collect()
        };
        for (a, v) in alphas.iter().zip(&values) {
            let _ = writeln!(
                csv,
                "{name},{a},{},{},{},{}",
                args.beta,
                fmt_v(*v),
                args.search.restarts,
                args.search.seed
            );
        }
        series.push((name.to_string(), values));
    }
    emit(args.out.as_deref(), &csv)?;
    for pair in series.windows(2) {
        let (prev, next) = (&pair[0], &pair[1]);
        let at = crossings(&alphas, &prev.1, &next.1, CROSSING_MARGIN)?;
        let list: Vec<String> = at.iter().map(|a| format!("{a}")).collect();
        eprintln!(
            "{} below {} changes at alpha = [{}]",
            next.0,
            prev.0,
            list.join(", ")
        );
    }
    Ok(())
}

pub fn diff_map(args: &DiffMapArgs) -> Result<(), CliError> {
    let (alphas, betas) = grid_axes(&args.grid)?;
    let points = grid(&alphas, &betas);
    let reference = run_grid(&points, args.reference, Vec::new(), &args.search, false)?;
    let restricted = run_grid(
        &points,
        args.search.kind,
        frozen(&args.search),
        &args.search,
        false,
    )?;
    report_failures(&reference);
    report_failures(&restricted);
    all_failed(&reference)?;
    all_failed(&restricted)?;
    let mut csv = String::from("alpha_deg,beta_deg,v_reference,v_crit,diff,restarts,seed\n");
    let mut diffs = Vec::with_capacity(points.len());
    for (r, s) in reference.iter().zip(&restricted) {
        let diff = s.v_crit - r.v_crit;
        diffs.push(diff);
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{}",
            r.alpha_deg,
            r.beta_deg,
            fmt_v(r.v_crit),
            fmt_v(s.v_crit),
            fmt_v(diff),
            s.restarts,
            s.seed
        );
    }
    emit(args.out.as_deref(), &csv)?;
    if let Some(p) = &args.pgm {
        write_pgm(p, &diffs, &alphas, &betas, "v_crit difference")?;
    }
    let max = diffs
        .iter()
        .copied()
        .filter(|d| d.is_finite())
        .fold(f64::NEG_INFINITY, f64::max);
    eprintln!("max difference {}", fmt_v(max));
    Ok(())
}

fn first_token(text: &str) -> Option<&str> {
    text.lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .find(|l| !l.is_empty())
        .and_then(|l| l.split_whitespace().next())
}

fn write_witness(path: &Path, weights: &[f64], m: usize, d: usize) -> Result<(), CliError> {
    let mut text = String::from("# atom weight: a_0 .. a_{m-1} b_0 .. b_{m-1} p\n");
    for (j, &w) in weights.iter().enumerate().filter(|(_, w)| **w > 1e-12) {
        let atom = atom_assignment(j, m, d);
        for x in atom.alice.iter().chain(&atom.bob) {
            let _ = write!(text, "{x} ");
        }
        let _ = writeln!(text, "{w:e}");
    }
    emit(Some(path), &text)
}

pub fn check_data(args: &CheckDataArgs) -> Result<(), CliError> {
    let text = read(&args.file)?;
    let (format, signal, noise): (&'static str, ProbabilityTable, Option<ProbabilityTable>) =
        match first_token(&text) {
            Some("m") => {
                let table = parse_probability_table(&text).map_err(|e| in_file(&args.file, e))?;
                let noise = match &args.noise {
                    None => None,
                    Some(NoiseModel::White) => Some(ProbabilityTable::uniform(
                        table.settings(),
                        table.outcomes(),
                    )?),
                    Some(other) => {
                        return Err(CliError::Usage(format!(
                            "{other} noise needs the state; give a density matrix with --settings"
                        )))
                    }
                };
                ("table", table, noise)
            }
            Some("d") => {
                let state = parse_density_matrix(&text).map_err(|e| in_file(&args.file, e))?;
                let path = args.settings.as_ref().ok_or_else(|| {
                    CliError::Usage("a density-matrix file needs --settings".into())
                })?;
                let settings: SettingsFile = serde_json::from_str(&read(path)?)
                    .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
                let signal = probability_table(&state, &settings.alice, &settings.bob)?;
                let noise = match &args.noise {
                    None => None,
                    Some(model) => Some(probability_table(
                        &noise_state(model, &state)?,
                        &settings.alice,
                        &settings.bob,
                    )?),
                };
                ("density", signal, noise)
            }
            _ => {
                return Err(CliError::Usage(format!(
                    "{}: line 1, column 1: expected a 'm <m> d <d>' or 'd <d>' header",
                    args.file.display()
                )))
            }
        };
    let (m, d) = (signal.settings(), signal.outcomes());
    let feasibility = lr_feasible(&signal)?;
    let mut witness = feasibility.witness.clone();
    let mut record = CheckRecord {
        file: args.file.display().to_string(),
        format,
        m,
        d,
        verdict: if feasibility.feasible {
            "feasible"
        } else {
            "infeasible"
        },
        v_crit: None,
        status: None,
        witness: None,
    };
    if let Some(noise) = &noise {
        let vis = critical_visibility(&signal, noise)?;
        if vis.status == VisibilityStatus::SolverFailure {
            return Err(CliError::Compute(
                vis.failure.unwrap_or_else(|| "LP solver failure".into()),
            ));
        }
        record.v_crit = Some(vis.v_crit);
        record.status = Some(status_label(vis.status));
        if witness.is_none() {
            witness = vis.witness;
        }
    }
    if let (Some(path), Some(w)) = (&args.witness, &witness) {
        write_witness(path, w, m, d)?;
        record.witness = Some(path.display().to_string());
    }
    let json =
        serde_json::to_string_pretty(&record).map_err(|e| CliError::Compute(e.to_string()))? + "\n";
    emit(None, &json)
}

pub fn catalog(args: &CatalogArgs) -> Result<(), CliError> {
    let mut text = String::new();
    for entry in list_catalog(args.max_d) {
        let _ = writeln!(text, "{entry}");
    }
    emit(None, &text)
}
