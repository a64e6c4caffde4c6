//! Mode dispatch and artifact persistence.
//!
//! Every mode writes into one output directory: `manifest.json` first (tool
//! version + the normalized configuration, so even failed runs leave a
//! reproducible record), then `results.json` and the mode's CSV tables. CSV
//! is comma-separated with a header row and plain `.`-decimal formatting;
//! floats are written in shortest round-trip form. Nothing here depends on
//! wall-clock time, so two runs from the same configuration produce
//! byte-identical artifacts.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

use serde::Serialize;

use nehari_lab::bubbles::{expansion_report, ExpansionReport};
use nehari_lab::constants::{check_admissible, compute_constants, WindowVerdict};
use nehari_lab::estimates::{
    check_cbar, check_competitive, check_ground_vs_limit, check_level_sum, check_semitrivial,
    check_subadditivity, standard_suite, EstimateReport,
};
use nehari_lab::radial::RadialGrid;
use nehari_lab::solver::{minimize_on_nehari, scalar_levels, solve_single, LevelKind, SolveResult};
use nehari_lab::{Error, Params, Real};

use crate::config::{Mode, RunConfig};
use crate::Failure;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// The stable check names `verify` selects from, in suite order.
pub const CHECK_NAMES: [&str; 6] = [
    "cbar_bound",
    "level_sum",
    "subadditivity",
    "ground_vs_limit",
    "semitrivial",
    "competitive_splitting",
];

#[derive(Serialize)]
struct Manifest<'a> {
    version: &'static str,
    config: &'a RunConfig,
}

/// Executes a normalized configuration. Artifacts land in `config.out`.
pub fn run(config: &RunConfig) -> Result<(), Failure> {
    let out = config
        .out
        .clone()
        .expect("normalized configurations carry an output directory");
    std::fs::create_dir_all(&out).map_err(|e| Failure::io("creating the output directory", e))?;
    write_json(&out.join("manifest.json"), &Manifest { version: VERSION, config })?;

    match config.mode.expect("normalized configurations carry a mode") {
        Mode::Constants => run_constants(&out, config),
        Mode::Solve => run_solve(&out, config).map(|_| ()),
        Mode::Verify => run_verify(&out, config),
        Mode::Expansion => run_expansion(&out, config),
        Mode::Sweep => run_sweep(&out, config),
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Failure::Io(format!("serializing {}: {e}", path.display())))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Failure::io(&format!("writing {}", path.display()), e))
}

fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| Failure::io(&format!("writing {}", path.display()), e))
}

/// Rejects any λ outside the open admissibility window, naming the
/// component, before a mode spends time solving.
fn require_admissible(params: &Params) -> Result<(), Failure> {
    let report =
        check_admissible(params).map_err(|e| Failure::from_core("params", e))?;
    if let Some((i, c)) = report
        .components
        .iter()
        .enumerate()
        .find(|(_, c)| c.verdict != WindowVerdict::Inside)
    {
        return Err(Failure::Config(format!(
            "params.lambda[{i}] = {:.6} lies outside the admissible window ({:.6}, {:.6})",
            c.lambda, report.window.0, report.window.1
        )));
    }
    Ok(())
}

fn run_constants(out: &Path, rc: &RunConfig) -> Result<(), Failure> {
    let params = rc.params.build()?;
    require_admissible(&params)?;
    let scalars =
        scalar_levels(&params, &rc.solve).map_err(|e| Failure::from_core("scalar solves", e))?;
    let consts = compute_constants(&params, &scalars.m, scalars.s_quotient)
        .map_err(|e| Failure::from_core("constants", e))?;

    let mut dump = BTreeMap::new();
    dump.insert("s_tilde".to_string(), consts.s_tilde);
    dump.insert("s_quotient".to_string(), consts.s_quotient);
    dump.insert("lambda1".to_string(), consts.lambda1);
    dump.insert("lambda_star".to_string(), consts.lambda_star);
    dump.insert("cbar".to_string(), consts.cbar);
    dump.insert("k1".to_string(), consts.k1);
    dump.insert("k2".to_string(), consts.k2);
    dump.insert("k3".to_string(), consts.k3);
    dump.insert("k4".to_string(), consts.k4);
    dump.insert("k".to_string(), consts.k);
    dump.insert("c1".to_string(), consts.c1);
    dump.insert("c2".to_string(), consts.c2);
    dump.insert("c3".to_string(), consts.c3);
    dump.insert("delta".to_string(), consts.delta);
    dump.insert("p_max".to_string(), consts.p_max);
    dump.insert("b_limit".to_string(), consts.b_limit);
    for i in 0..params.d() {
        dump.insert(format!("m{}", i + 1), consts.m[i]);
        dump.insert(format!("q{}", i + 1), scalars.quotients[i]);
    }

    write_json(&out.join("results.json"), &dump)?;
    println!(
        "{}",
        serde_json::to_string_pretty(&dump).expect("a map of floats serializes")
    );
    println!("wrote {}", out.join("results.json").display());
    Ok(())
}

fn describe_kind(kind: &LevelKind) -> String {
    match kind {
        LevelKind::Single(i) => format!("single component {i}"),
        LevelKind::Subsystem(set) => format!("subsystem {set:?}"),
        LevelKind::Ground { nontrivial: true } => "aggregate ground state (fully nontrivial)".into(),
        LevelKind::Ground { nontrivial: false } => "aggregate ground state (semitrivial)".into(),
    }
}

/// Solves the configured system and writes `results.json` + `profiles.csv`.
///
/// A single component runs the scalar solver, which tolerates λ at the
/// nonexistence end of the window so the concentration dichotomy stays
/// observable; systems require every λ strictly inside.
fn run_solve(out: &Path, rc: &RunConfig) -> Result<SolveResult<Real>, Failure> {
    let params = rc.params.build()?;
    let result = if params.d() == 1 {
        let report =
            check_admissible(&params).map_err(|e| Failure::from_core("params", e))?;
        if report.components[0].verdict == WindowVerdict::BelowWindow {
            return Err(Failure::Config(format!(
                "params.lambda[0] = {:.6} is at or below -lambda1 = {:.6}; the quadratic form is degenerate",
                params.lambda(0),
                report.window.0
            )));
        }
        solve_single(&params, 0, &rc.solve)
    } else {
        require_admissible(&params)?;
        let subset: Vec<usize> = (0..params.d()).collect();
        minimize_on_nehari(&params, &subset, &rc.solve)
    }
    .map_err(|e| Failure::from_core("solve", e))?;

    write_json(&out.join("results.json"), &result)?;

    let nodes = result.fields.grid().nodes();
    let mut csv = String::from("r");
    for i in 1..=params.d() {
        let _ = write!(csv, ",u{i}");
    }
    csv.push('\n');
    for (k, &r) in nodes.iter().enumerate() {
        let _ = write!(csv, "{r}");
        for component in result.fields.components() {
            let _ = write!(csv, ",{}", component.values()[k]);
        }
        csv.push('\n');
    }
    write_text(&out.join("profiles.csv"), &csv)?;

    println!(
        "level = {:.8e} ({}); converged = {} after {} iterations",
        result.level,
        describe_kind(&result.kind),
        result.converged,
        result.iterations
    );
    if result.concentration.concentrated {
        let widths: Vec<String> = result
            .concentration
            .effective_width
            .iter()
            .map(|x| format!("{x:.3e}"))
            .collect();
        println!("concentration flag raised: effective widths {widths:?}");
    }
    println!("wrote {}", out.join("profiles.csv").display());
    Ok(result)
}

#[derive(Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
enum CheckStatus {
    Pass,
    Fail,
    Skip,
}

#[derive(Serialize)]
struct CheckRow {
    name: String,
    status: CheckStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    margin: Option<Real>,
    #[serde(skip_serializing_if = "Option::is_none")]
    reason: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    report: Option<EstimateReport<Real>>,
}

fn run_check(
    name: &str,
    params: &Params,
    solve: &nehari_lab::solver::SolveConfig,
) -> nehari_lab::Result<EstimateReport<Real>> {
    let d = params.d();
    let full: Vec<usize> = (0..d).collect();
    let q: Vec<usize> = if d >= 3 { vec![0, 1] } else { vec![0] };
    match name {
        "cbar_bound" => check_cbar(params, solve),
        "level_sum" => check_level_sum(params, solve),
        "subadditivity" => check_subadditivity(params, &full, &q, solve),
        "ground_vs_limit" => check_ground_vs_limit(params, solve),
        "semitrivial" => check_semitrivial(params, solve),
        "competitive_splitting" => check_competitive(params, solve),
        other => unreachable!("check names are validated at load time, got {other}"),
    }
}

fn run_verify(out: &Path, rc: &RunConfig) -> Result<(), Failure> {
    let params = rc.params.build()?;
    require_admissible(&params)?;

    let outcomes: Vec<(String, nehari_lab::Result<EstimateReport<Real>>)> =
        if rc.verify.checks.is_empty() {
            standard_suite(&params, &rc.solve)
        } else {
            let mut names: Vec<&str> = Vec::new();
            for name in &rc.verify.checks {
                if !names.contains(&name.as_str()) {
                    names.push(name);
                }
            }
            let params = &params;
            let solve = &rc.solve;
            std::thread::scope(|s| {
                let handles: Vec<_> = names
                    .iter()
                    .map(|&name| (name, s.spawn(move || run_check(name, params, solve))))
                    .collect();
                handles
                    .into_iter()
                    .map(|(name, h)| (name.to_string(), h.join().expect("check panicked")))
                    .collect()
            })
        };

    let rows: Vec<CheckRow> = outcomes
        .into_iter()
        .map(|(name, outcome)| match outcome {
            Ok(report) => CheckRow {
                name,
                status: if report.pass {
                    CheckStatus::Pass
                } else {
                    CheckStatus::Fail
                },
                margin: Some(report.margin),
                reason: None,
                report: Some(report),
            },
            Err(
                e @ (Error::RegimeViolated(_) | Error::InvalidParams(_) | Error::InvalidSubset(_)),
            ) => CheckRow {
                name,
                status: CheckStatus::Skip,
                margin: None,
                reason: Some(e.to_string()),
                report: None,
            },
            Err(e) => CheckRow {
                name,
                status: CheckStatus::Fail,
                margin: None,
                reason: Some(e.to_string()),
                report: None,
            },
        })
        .collect();

    let reports: Vec<&EstimateReport<Real>> =
        rows.iter().filter_map(|row| row.report.as_ref()).collect();
    write_json(&out.join("estimates.json"), &reports)?;
    write_json(&out.join("results.json"), &rows)?;

    let name_width = rows
        .iter()
        .map(|row| row.name.len())
        .chain(std::iter::once("check".len()))
        .max()
        .unwrap_or(5);
    println!("{:<name_width$}  {:<6}  {:>12}  detail", "check", "status", "margin");
    let mut passed = 0;
    let mut failed = 0;
    let mut skipped = 0;
    for row in &rows {
        let (status, detail) = match row.status {
            CheckStatus::Pass => {
                passed += 1;
                ("PASS", headline(row))
            }
            CheckStatus::Fail => {
                failed += 1;
                ("FAIL", row.reason.clone().unwrap_or_else(|| headline(row)))
            }
            CheckStatus::Skip => {
                skipped += 1;
                ("SKIP", row.reason.clone().unwrap_or_default())
            }
        };
        let margin = row
            .margin
            .map(|m| format!("{m:.4e}"))
            .unwrap_or_else(|| "-".into());
        println!("{:<name_width$}  {status:<6}  {margin:>12}  {detail}", row.name);
    }
    println!("{passed} passed, {failed} failed, {skipped} skipped");
    println!("wrote {}", out.join("estimates.json").display());

    if failed > 0 {
        return Err(Failure::Numerical(format!(
            "{failed} of {} checks failed",
            rows.len()
        )));
    }
    Ok(())
}

fn headline(row: &CheckRow) -> String {
    row.report
        .as_ref()
        .map(|r| format!("lhs = {:.8e}, rhs = {:.8e}", r.lhs, r.rhs))
        .unwrap_or_default()
}

/// The fitted coefficients of the bubble-integral expansions, split out of
/// the row table for the trailing JSON block.
#[derive(Serialize)]
struct ExpansionFits {
    s32: Real,
    grad_slope: Real,
    grad_curvature: Real,
    l2_slope: Real,
    l2_curvature: Real,
    l6_order: Real,
    l3_ratios: Vec<Real>,
    l3_ratio_variation: Real,
}

impl From<&ExpansionReport<Real>> for ExpansionFits {
    fn from(r: &ExpansionReport<Real>) -> Self {
        Self {
            s32: r.s32,
            grad_slope: r.grad_slope,
            grad_curvature: r.grad_curvature,
            l2_slope: r.l2_slope,
            l2_curvature: r.l2_curvature,
            l6_order: r.l6_order,
            l3_ratios: r.l3_ratios.clone(),
            l3_ratio_variation: r.l3_ratio_variation,
        }
    }
}

fn run_expansion(out: &Path, rc: &RunConfig) -> Result<(), Failure> {
    let params = rc.params.build()?;
    let grid = RadialGrid::new(params.radius(), rc.solve.grid_cells)
        .map_err(|e| Failure::from_core("solve.grid_cells", e))?;
    let report = expansion_report(&rc.expansion.epsilons, &grid)
        .map_err(|e| Failure::from_core("expansion.epsilons", e))?;

    let mut csv = String::from("epsilon,grad_energy,l6,l2,l3\n");
    for row in &report.rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{}",
            row.epsilon, row.grad_energy, row.l6, row.l2, row.l3
        );
    }
    write_text(&out.join("expansion.csv"), &csv)?;

    let fits = ExpansionFits::from(&report);
    write_json(&out.join("fits.json"), &fits)?;

    print!("{csv}");
    println!(
        "{}",
        serde_json::to_string_pretty(&fits).expect("a struct of floats serializes")
    );
    println!("wrote {}", out.join("expansion.csv").display());
    Ok(())
}

struct SweepRow {
    token: String,
    beta: Real,
    result: Result<SolveResult<Real>, Failure>,
}

fn run_sweep(out: &Path, rc: &RunConfig) -> Result<(), Failure> {
    let params = rc.params.build()?;
    require_admissible(&params)?;
    let [i, j] = rc.sweep.pair;

    // K depends only on the diagonal data (scalar levels and quotients), so
    // one resolution serves every swept off-diagonal value.
    let threshold = if rc.sweep.values.iter().any(|v| v.needs_threshold()) {
        let scalars = scalar_levels(&params, &rc.solve)
            .map_err(|e| Failure::from_core("scalar solves", e))?;
        let consts = compute_constants(&params, &scalars.m, scalars.s_quotient)
            .map_err(|e| Failure::from_core("constants", e))?;
        println!("threshold K = {:.8e}", consts.k);
        consts.k
    } else {
        0.0
    };

    let subruns: Vec<(PathBuf, RunConfig, Real)> = rc
        .sweep
        .values
        .iter()
        .enumerate()
        .map(|(index, value)| {
            let beta = value.resolve(threshold);
            let dir = out.join(format!("value-{index}"));
            let mut sub = rc.clone();
            sub.mode = Some(Mode::Solve);
            sub.out = Some(dir.clone());
            sub.params.beta[i][j] = beta;
            sub.params.beta[j][i] = beta;
            (dir, sub, beta)
        })
        .collect();

    let workers = if rc.sweep.workers == 0 {
        std::thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(1)
            .min(subruns.len())
    } else {
        rc.sweep.workers.min(subruns.len())
    };

    let next = AtomicUsize::new(0);
    let mut rows: Vec<Option<SweepRow>> = Vec::new();
    rows.resize_with(subruns.len(), || None);
    let collected: Vec<Vec<(usize, SweepRow)>> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..workers)
            .map(|_| {
                s.spawn(|| {
                    let mut local = Vec::new();
                    loop {
                        let k = next.fetch_add(1, Ordering::SeqCst);
                        let Some((dir, sub, beta)) = subruns.get(k) else {
                            break;
                        };
                        let result = std::fs::create_dir_all(dir)
                            .map_err(|e| Failure::io("creating the value directory", e))
                            .and_then(|()| {
                                write_json(
                                    &dir.join("manifest.json"),
                                    &Manifest {
                                        version: VERSION,
                                        config: sub,
                                    },
                                )
                            })
                            .and_then(|()| run_solve(dir, sub));
                        local.push((
                            k,
                            SweepRow {
                                token: rc.sweep.values[k].token(),
                                beta: *beta,
                                result,
                            },
                        ));
                    }
                    local
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("sweep worker panicked"))
            .collect()
    });
    for (k, row) in collected.into_iter().flatten() {
        rows[k] = Some(row);
    }

    let mut csv = String::from("index,coupling,beta,level,converged,iterations\n");
    let mut failures = Vec::new();
    for (k, slot) in rows.iter().enumerate() {
        let row = slot.as_ref().expect("every sweep index is claimed once");
        match &row.result {
            Ok(result) => {
                let _ = writeln!(
                    csv,
                    "{k},{},{},{},{},{}",
                    row.token, row.beta, result.level, result.converged, result.iterations
                );
            }
            Err(e) => {
                eprintln!("value-{k} (beta = {}): {e}", row.beta);
                failures.push(k);
            }
        }
    }
    write_text(&out.join("summary.csv"), &csv)?;
    println!("wrote {}", out.join("summary.csv").display());

    if let [first, ..] = failures[..] {
        return Err(Failure::Numerical(format!(
            "{} of {} sweep values failed, first at value-{first}",
            failures.len(),
            rows.len()
        )));
    }
    Ok(())
}
