//! Command cores behind the binary's subcommands, kept library-side so
//! integration tests can drive them without spawning processes.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use compmdp_core::algebra::AlgebraError;
use compmdp_core::expr::{arity_of, Bindings, DiagramExpr};
use compmdp_core::flatten::{flatten, position_count, primitive_census};
use compmdp_core::model::Scheduler;
use compmdp_core::selftest::run_axiom_suite;
use compmdp_core::semantics::{solve_query, EvalConfig, SemError};
use compmdp_core::termination::certify_all_scheduler_exit;
use serde::Serialize;

use crate::dsl::{parse_component, parse_diagram, DiagramFile, FileLoader, ParseError};
use crate::export;
use crate::families::{generate, GenConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Parse(#[from] ParseError),
    #[error("{0}")]
    Algebra(AlgebraError),
    #[error("{0}")]
    Sem(SemError),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Usage(String),
}

impl From<AlgebraError> for CliError {
    fn from(e: AlgebraError) -> Self {
        CliError::Algebra(e)
    }
}

impl CliError {
    /// Process exit code: 2 for parse and validation failures, 3 for
    /// composition errors, 4 for semantic evaluation limits, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse(ParseError::Arity { .. }) => 3,
            CliError::Parse(_) => 2,
            CliError::Algebra(e) => algebra_code(e),
            CliError::Sem(e) => match e {
                SemError::SchedulerExplosion { .. } | SemError::FrozenMultiExit { .. } => 4,
                SemError::Algebra(a) => algebra_code(a),
                _ => 1,
            },
            CliError::Io(_) | CliError::Usage(_) => 1,
        }
    }
}

fn algebra_code(e: &AlgebraError) -> i32 {
    match e {
        AlgebraError::ArityMismatch(_)
        | AlgebraError::ActionSetMismatch(_)
        | AlgebraError::WireCycle { .. } => 3,
        AlgebraError::UnboundName(_) | AlgebraError::Invalid(_) => 2,
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

/// Input files are either a single component (first keyword `mdp`/`omdp`) or
/// a diagram.
fn is_component_text(text: &str) -> bool {
    for line in text.lines() {
        let line = line.trim_start();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let word: String = line.chars().take_while(|c| c.is_ascii_alphanumeric() || *c == '_').collect();
        return word == "mdp" || word == "omdp";
    }
    false
}

/// Parses an input file as a diagram, wrapping a bare component as a
/// one-primitive diagram over entrance 1 and exit 1.
pub fn load_input(path: &Path) -> Result<DiagramFile, CliError> {
    let text = read(path)?;
    if is_component_text(&text) {
        let def = parse_component(&text)?;
        let expr = DiagramExpr::prim(&def.name, def.model);
        return Ok(DiagramFile { bindings: Bindings::new(), expr, entrance: 1, exit: 1 });
    }
    let base = path.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."));
    let mut loader = FileLoader::new(base);
    Ok(parse_diagram(&text, &mut loader)?)
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SolveStats {
    pub component_solves: u64,
    pub cache_hits: u64,
    pub front_sizes: BTreeMap<String, usize>,
    /// Seconds; averaged over runs under `--bench`.
    pub wall_time: f64,
}

#[derive(Clone, Debug, Default)]
pub struct SolveOpts {
    pub entrance: Option<usize>,
    pub exit: Option<usize>,
    pub max_schedulers: Option<u64>,
    pub no_prune: bool,
    pub bench: bool,
}

#[derive(Debug)]
pub struct SolveOutcome {
    pub p: f64,
    pub r: f64,
    pub scheduler: Scheduler,
    pub stats: SolveStats,
    pub runs: usize,
}

pub fn cmd_solve(path: &Path, opts: &SolveOpts) -> Result<SolveOutcome, CliError> {
    let file = load_input(path)?;
    solve_file(&file, opts)
}

pub fn solve_file(file: &DiagramFile, opts: &SolveOpts) -> Result<SolveOutcome, CliError> {
    let entrance = opts.entrance.unwrap_or(file.entrance);
    let exit = opts.exit.unwrap_or(file.exit);
    let (dom, cod) = arity_of(&file.expr, &file.bindings)?;
    let m = dom.right + cod.left;
    let n = cod.right + dom.left;
    if entrance == 0 || entrance > m {
        return Err(ParseError::Arity {
            node: "query".into(),
            expected: format!("an entrance in 1..={m}"),
            found: format!("entrance {entrance}"),
        }
        .into());
    }
    if exit == 0 || exit > n {
        return Err(ParseError::Arity {
            node: "query".into(),
            expected: format!("an exit in 1..={n}"),
            found: format!("exit {exit}"),
        }
        .into());
    }

    let mut cfg = EvalConfig::default();
    if let Some(cap) = opts.max_schedulers {
        cfg.max_schedulers_per_component = cap;
    }
    cfg.pruning = !opts.no_prune;

    let runs = if opts.bench { 5 } else { 1 };
    let mut total = 0.0;
    let mut last = None;
    for _ in 0..runs {
        let t0 = Instant::now();
        let solved = solve_query(&file.expr, &file.bindings, cfg.clone(), entrance, exit)
            .map_err(CliError::Sem)?;
        total += t0.elapsed().as_secs_f64();
        last = Some(solved);
    }
    let (p, r, scheduler, stats) = last.expect("runs >= 1");
    Ok(SolveOutcome {
        p,
        r,
        scheduler,
        stats: SolveStats {
            component_solves: stats.component_solves,
            cache_hits: stats.cache_hits,
            front_sizes: stats.front_sizes,
            wall_time: total / runs as f64,
        },
        runs,
    })
}

pub fn format_solution(p: f64, r: f64) -> String {
    format!("p={p:.12} r={r:.12}")
}

/// One `position action` line per choice, in position order.
pub fn scheduler_lines(s: &Scheduler) -> String {
    let mut out = String::new();
    for (q, a) in s.choices() {
        out.push_str(q);
        out.push(' ');
        out.push_str(a);
        out.push('\n');
    }
    out
}

pub fn stats_json(stats: &SolveStats) -> String {
    serde_json::to_string_pretty(stats).expect("stats serialize")
}

pub struct CheckReport {
    pub lines: Vec<String>,
    pub warnings: usize,
}

pub fn cmd_check(path: &Path, termination: bool) -> Result<CheckReport, CliError> {
    let file = load_input(path)?;
    let mut lines = Vec::new();
    let mut warnings = 0;

    let (dom, cod) = arity_of(&file.expr, &file.bindings)?;
    let m = dom.right + cod.left;
    let n = cod.right + dom.left;
    let census = primitive_census(&file.expr, &file.bindings)?;
    let occurrences: u128 = census.values().sum();
    let positions = position_count(&file.expr, &file.bindings)?;
    lines.push(format!("ok: diagram with arity {m} -> {n}"));
    lines.push(format!(
        "ok: {} distinct components, {occurrences} occurrences in the expansion",
        census.len()
    ));
    lines.push(format!("ok: {positions} positions in the expansion"));

    if termination {
        let flat = flatten(&file.expr, &file.bindings)?;
        let report = certify_all_scheduler_exit(flat.body());
        if report.certified {
            lines.push("termination: certified, every scheduler reaches the exits almost surely".into());
        } else {
            warnings += 1;
            let culprit = report.culprit.unwrap_or_default();
            lines.push(format!(
                "WARNING: termination not certified, some scheduler avoids the exits from position `{culprit}`"
            ));
        }
    }
    Ok(CheckReport { lines, warnings })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum FlattenFormat {
    Native,
    Prism,
}

pub fn cmd_flatten(path: &Path, format: FlattenFormat, out: &Path) -> Result<(), CliError> {
    let file = load_input(path)?;
    let flat = flatten(&file.expr, &file.bindings)?;
    let name = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "flat".into());
    let text = match format {
        FlattenFormat::Native => export::native_text(&name, &flat),
        FlattenFormat::Prism => export::prism_text(&flat),
    };
    write(out, &text)
}

pub fn cmd_gen(cfg: &GenConfig, outdir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let out = generate(cfg).map_err(CliError::Usage)?;
    fs::create_dir_all(outdir)
        .map_err(|e| CliError::Io(format!("cannot create {}: {e}", outdir.display())))?;
    let mut paths = Vec::new();
    for (name, text) in &out.files {
        let path = outdir.join(name);
        write(&path, text)?;
        paths.push(path);
    }
    Ok(paths)
}

pub struct SelftestOutcome {
    pub lines: Vec<String>,
    pub passed: bool,
}

pub fn cmd_selftest(seed: u64, instances: usize) -> SelftestOutcome {
    let report = run_axiom_suite(seed, instances);
    let mut lines = Vec::new();
    for check in &report.checks {
        let status = if check.passed { "PASS" } else { "FAIL" };
        if check.detail.is_empty() {
            lines.push(format!("{status} {}", check.name));
        } else {
            lines.push(format!("{status} {} ({})", check.name, check.detail));
        }
    }
    SelftestOutcome { lines, passed: report.all_passed() }
}

/// `COMPMDP_SEED` overrides any seed given on the command line.
pub fn env_seed() -> Result<Option<u64>, CliError> {
    match std::env::var("COMPMDP_SEED") {
        Ok(s) => s
            .trim()
            .parse::<u64>()
            .map(Some)
            .map_err(|_| CliError::Usage(format!("COMPMDP_SEED must be a u64, got `{s}`"))),
        Err(_) => Ok(None),
    }
}
