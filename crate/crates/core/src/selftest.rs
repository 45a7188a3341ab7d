//! Seeded property suites shared by the `selftest` command and the
//! acceptance tests: the diagram axiom equalities, the decomposition
//! equalities for open Markov chains, functoriality of the scheduler
//! semantics, pruning soundness, and end-to-end equivalence against
//! brute-force scheduler enumeration on the flattened model.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::algebra::{identity_wire, seq_ro, sum_ro, swap_wire, trace_ro, AlgebraError};
use crate::flatten::flatten;
use crate::linalg::{fabs, Mat};
use crate::mc::{path_oracle, seq_mc, solve_component_mc, sum_mc, trace_mc, McArrow};
use crate::model::{RoMc, RoMdp};
use crate::randgen::{
    default_actions, random_romdp, random_terminating_diagram, DiagramShape, ModelShape,
    SplitMix64,
};
use crate::semantics::{
    extract_optimal, lift_romdp, seq_sem, sum_sem, trace_sem, witness, EvalConfig, Evaluator,
    Front, SemError,
};
use crate::termination::certify_all_scheduler_exit;

/// One named check with its outcome.
#[derive(Clone, Debug)]
pub struct CheckLine {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Default)]
pub struct SuiteReport {
    pub checks: Vec<CheckLine>,
}

impl SuiteReport {
    pub fn record(&mut self, name: &str, passed: bool, detail: impl Into<String>) {
        self.checks.push(CheckLine { name: name.to_string(), passed, detail: detail.into() });
    }

    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn merge(&mut self, other: SuiteReport) {
        self.checks.extend(other.checks);
    }
}

/// Configuration for exhaustive scheduler enumeration: no cap that a padded
/// flattened model could trip, no pruning.
pub fn brute_cfg() -> EvalConfig {
    EvalConfig {
        max_schedulers_per_component: u64::MAX / 2,
        pruning: false,
        ..EvalConfig::default()
    }
}

/// Enumerates every memoryless scheduler of `flat` and solves each.
pub fn brute_force_front(flat: &RoMdp) -> Result<Front, SemError> {
    lift_romdp(flat, "brute", &brute_cfg())
}

fn pruned_cfg() -> EvalConfig {
    EvalConfig { max_schedulers_per_component: u64::MAX / 2, ..EvalConfig::default() }
}

/// Set equality of front matrices up to `tol`, ignoring tags.
pub fn fronts_match(a: &Front, b: &Front, tol: f64) -> bool {
    if a.m() != b.m() || a.n() != b.n() {
        return false;
    }
    let covered = |x: &Front, y: &Front| {
        x.elements()
            .iter()
            .all(|(ax, _)| y.elements().iter().any(|(by, _)| ax.approx_eq(by, tol)))
    };
    covered(a, b) && covered(b, a)
}

/// Structural equality for positionless models.
pub fn wires_equal(a: &RoMdp, b: &RoMdp) -> bool {
    a.positions().is_empty()
        && b.positions().is_empty()
        && a.entrances() == b.entrances()
        && a.exits() == b.exits()
        && a.entry_targets() == b.entry_targets()
}

const SEM_TOL: f64 = 1e-9;
const MAX_RESAMPLE: usize = 10_000;

/// A terminating instance with exact arity m -> n, padded to the two-action
/// set so it composes with anything the suites build. Termination under
/// every scheduler forces single-action generation when only one exit is
/// available.
fn inst(rng: &mut SplitMix64, m: usize, n: usize) -> RoMdp {
    let actions = if n >= 2 { 2 } else { 1 };
    let shape = ModelShape {
        entrances: m,
        exits: n,
        positions: rng.range(1, 2),
        actions,
        max_stay: 0.45,
        terminating: true,
        max_reward: 4.0,
    };
    random_romdp(rng, &shape).pad_actions(&default_actions(2))
}

fn acts() -> Vec<String> {
    default_actions(2)
}

fn ident(m: usize) -> RoMdp {
    identity_wire(m, &acts())
}

fn swp(m: usize, n: usize) -> RoMdp {
    swap_wire(m, n, &acts())
}

type Pairs = Result<Vec<(RoMdp, RoMdp)>, AlgebraError>;

fn sem_equal(lhs: &RoMdp, rhs: &RoMdp) -> Result<bool, SemError> {
    let fa = brute_force_front(lhs)?;
    let fb = brute_force_front(rhs)?;
    Ok(fronts_match(&fa, &fb, SEM_TOL))
}

/// Runs one axiom family: `build` produces the two composite models per
/// instance; wire-only families are additionally compared structurally.
fn run_axiom(
    report: &mut SuiteReport,
    rng: &mut SplitMix64,
    name: &str,
    wire_only: bool,
    instances: usize,
    build: &mut dyn FnMut(&mut SplitMix64) -> Pairs,
) {
    let mut done = 0usize;
    let mut attempts = 0usize;
    while done < instances {
        attempts += 1;
        if attempts > MAX_RESAMPLE {
            report.record(name, false, format!("exhausted resampling after {done} instances"));
            return;
        }
        let pairs = match build(rng) {
            Ok(p) => p,
            Err(_) => continue,
        };
        // Traced composites can trap probability forever; those instances
        // are resampled since their solutions are not defined.
        if pairs.iter().any(|(l, _)| !certify_all_scheduler_exit(l).certified) {
            continue;
        }
        for (lhs, rhs) in &pairs {
            if wire_only && !wires_equal(lhs, rhs) {
                report.record(name, false, format!("structural mismatch at instance {done}"));
                return;
            }
            match sem_equal(lhs, rhs) {
                Ok(true) => {}
                Ok(false) => {
                    report.record(name, false, format!("semantic mismatch at instance {done}"));
                    return;
                }
                Err(e) => {
                    report.record(name, false, format!("solve failed at instance {done}: {e}"));
                    return;
                }
            }
        }
        done += 1;
    }
    let kind = if wire_only { "structural+semantic" } else { "semantic" };
    report.record(name, true, format!("{instances} instances, {kind}, tol {SEM_TOL:.0e}"));
}

/// The diagram axiom suite over seeded random instances.
pub fn run_axiom_suite(seed: u64, instances: usize) -> SuiteReport {
    let mut report = SuiteReport::default();
    let mut rng = SplitMix64::new(seed);

    run_axiom(&mut report, &mut rng, "seq-unit", false, instances, &mut |rng| {
        let (m, n) = (rng.range(1, 2), rng.range(1, 2));
        let a = inst(rng, m, n);
        Ok(alloc::vec![
            (seq_ro(&ident(m), &a)?, a.clone()),
            (seq_ro(&a, &ident(n))?, a.clone()),
        ])
    });

    run_axiom(&mut report, &mut rng, "seq-assoc", false, instances, &mut |rng| {
        let (m, k, l, n) = (rng.range(1, 2), rng.range(1, 2), rng.range(1, 2), rng.range(1, 2));
        let a = inst(rng, m, k);
        let b = inst(rng, k, l);
        let c = inst(rng, l, n);
        Ok(alloc::vec![(seq_ro(&seq_ro(&a, &b)?, &c)?, seq_ro(&a, &seq_ro(&b, &c)?)?)])
    });

    run_axiom(&mut report, &mut rng, "sum-assoc", false, instances, &mut |rng| {
        let (am, an) = (rng.range(1, 2), rng.range(1, 2));
        let a = inst(rng, am, an);
        let (bm, bn) = (rng.range(1, 2), rng.range(1, 2));
        let b = inst(rng, bm, bn);
        let (cm, cn) = (rng.range(1, 2), rng.range(1, 2));
        let c = inst(rng, cm, cn);
        Ok(alloc::vec![(sum_ro(&sum_ro(&a, &b)?, &c)?, sum_ro(&a, &sum_ro(&b, &c)?)?)])
    });

    run_axiom(&mut report, &mut rng, "sum-of-identities", true, instances, &mut |rng| {
        let (m, n) = (rng.range(1, 3), rng.range(1, 3));
        Ok(alloc::vec![(sum_ro(&ident(m), &ident(n))?, ident(m + n))])
    });

    run_axiom(&mut report, &mut rng, "sum-seq-interchange", false, instances, &mut |rng| {
        let (m1, k1, n1) = (rng.range(1, 2), rng.range(1, 2), rng.range(1, 2));
        let (m2, k2, n2) = (rng.range(1, 2), rng.range(1, 2), rng.range(1, 2));
        let a = inst(rng, m1, k1);
        let b = inst(rng, m2, k2);
        let c = inst(rng, k1, n1);
        let d = inst(rng, k2, n2);
        Ok(alloc::vec![(
            seq_ro(&sum_ro(&a, &b)?, &sum_ro(&c, &d)?)?,
            sum_ro(&seq_ro(&a, &c)?, &seq_ro(&b, &d)?)?,
        )])
    });

    run_axiom(&mut report, &mut rng, "swap-nothing", true, instances, &mut |rng| {
        let m = rng.range(1, 3);
        Ok(alloc::vec![(swp(m, 0), ident(m))])
    });

    run_axiom(&mut report, &mut rng, "swap-hexagon", true, instances, &mut |rng| {
        let (l, m, n) = (rng.range(1, 2), rng.range(1, 2), rng.range(1, 2));
        Ok(alloc::vec![(
            swp(l, m + n),
            seq_ro(&sum_ro(&swp(l, m), &ident(n))?, &sum_ro(&ident(m), &swp(l, n))?)?,
        )])
    });

    run_axiom(&mut report, &mut rng, "swap-involution", true, instances, &mut |rng| {
        let (m, n) = (rng.range(1, 2), rng.range(1, 2));
        Ok(alloc::vec![(seq_ro(&swp(m, n), &swp(n, m))?, ident(m + n))])
    });

    run_axiom(&mut report, &mut rng, "vanishing-zero", false, instances, &mut |rng| {
        let (am, an) = (rng.range(1, 2), rng.range(1, 2));
        let a = inst(rng, am, an);
        Ok(alloc::vec![(trace_ro(0, &a)?, a.clone())])
    });

    run_axiom(&mut report, &mut rng, "vanishing-join", false, instances, &mut |rng| {
        let (l1, l2, m, n) = (1, rng.range(1, 2), rng.range(1, 2), rng.range(1, 2));
        let a = inst(rng, l1 + l2 + m, l1 + l2 + n);
        Ok(alloc::vec![(trace_ro(l1 + l2, &a)?, trace_ro(l2, &trace_ro(l1, &a)?)?)])
    });

    run_axiom(&mut report, &mut rng, "superposing", false, instances, &mut |rng| {
        let (l, m1, n1) = (1, rng.range(1, 2), rng.range(1, 2));
        let a = inst(rng, l + m1, l + n1);
        let (bm, bn) = (rng.range(1, 2), rng.range(1, 2));
        let b = inst(rng, bm, bn);
        Ok(alloc::vec![(sum_ro(&trace_ro(l, &a)?, &b)?, trace_ro(l, &sum_ro(&a, &b)?)?)])
    });

    run_axiom(&mut report, &mut rng, "yanking", true, instances, &mut |rng| {
        let m = rng.range(1, 2);
        Ok(alloc::vec![(trace_ro(m, &swp(m, m))?, ident(m))])
    });

    run_axiom(&mut report, &mut rng, "naturality-pre", false, instances, &mut |rng| {
        let (l, m, m2, n) = (1, rng.range(1, 2), rng.range(1, 2), rng.range(1, 2));
        let a = inst(rng, l + m2, l + n);
        let b = inst(rng, m, m2);
        Ok(alloc::vec![(
            trace_ro(l, &seq_ro(&sum_ro(&ident(l), &b)?, &a)?)?,
            seq_ro(&b, &trace_ro(l, &a)?)?,
        )])
    });

    run_axiom(&mut report, &mut rng, "naturality-post", false, instances, &mut |rng| {
        let (l, m, n2, n) = (1, rng.range(1, 2), rng.range(1, 2), rng.range(1, 2));
        let a = inst(rng, l + m, l + n2);
        let b = inst(rng, n2, n);
        Ok(alloc::vec![(
            trace_ro(l, &seq_ro(&a, &sum_ro(&ident(l), &b)?)?)?,
            seq_ro(&trace_ro(l, &a)?, &b)?,
        )])
    });

    run_axiom(&mut report, &mut rng, "dinaturality", false, instances, &mut |rng| {
        let (k, l, m, n) = (1, rng.range(1, 2), rng.range(1, 2), rng.range(1, 2));
        let a = inst(rng, l + m, k + n);
        let b = inst(rng, k, l);
        Ok(alloc::vec![(
            trace_ro(k, &seq_ro(&sum_ro(&b, &ident(m))?, &a)?)?,
            trace_ro(l, &seq_ro(&a, &sum_ro(&b, &ident(n))?)?)?,
        )])
    });

    report
}

fn mc_inst(rng: &mut SplitMix64, m: usize, n: usize) -> RoMc {
    let shape = ModelShape::small_mc(rng.range(2, 5), m, n);
    RoMc::from_romdp(random_romdp(rng, &shape)).expect("single action")
}

fn max_reward(m: &RoMdp) -> f64 {
    let mut best = 0.0;
    for q in m.positions() {
        if m.reward(q) > best {
            best = m.reward(q);
        }
    }
    best
}

/// Truncated path enumeration brackets an exact solution on every
/// entrance/exit pair. Slowly mixing loops need longer horizons, so the
/// horizon deepens until the residual is small enough. Returns the largest
/// residual seen.
fn sandwich(c: &RoMc, arrow: &McArrow) -> Result<f64, String> {
    let rmax = max_reward(c.as_romdp());
    let mut worst = 0.0f64;
    for i in 1..=arrow.m() {
        for j in 1..=arrow.n() {
            let mut picked = None;
            let mut horizon = 200;
            while horizon <= 12_800 {
                let est = path_oracle(c, i, j, horizon, 10_000_000)
                    .map_err(|e| format!("path oracle failed: {e}"))?;
                if est.residual_mass < 1e-6 {
                    picked = Some((est, horizon));
                    break;
                }
                horizon *= 4;
            }
            let (est, horizon) = match picked {
                Some(x) => x,
                None => return Err(format!("residual stayed above 1e-6 at ({i},{j})")),
            };
            if est.residual_mass > worst {
                worst = est.residual_mass;
            }
            let p = arrow.p(i, j);
            let r = arrow.r(i, j);
            // Headroom for accumulated rounding in the step-by-step oracle,
            // which grows with the magnitude of the bounded value.
            let p_head = 1e-11;
            let r_head = 1e-9 * (1.0 + fabs(r));
            if p < est.p_lower - p_head || p > est.p_lower + est.residual_mass + p_head {
                return Err(format!("p={p} outside [{}, +res] at ({i},{j})", est.p_lower));
            }
            let slack = est.residual_mass * rmax * (horizon as f64 + 50.0);
            if r < est.r_lower - r_head || r > est.r_lower + slack + r_head {
                return Err(format!("r={r} outside [{}, +slack] at ({i},{j})", est.r_lower));
            }
        }
    }
    Ok(worst)
}

/// The decomposition equalities for Markov chains: sequencing, tracing and
/// sum of solutions against monolithically solved composites, each
/// bracketed by the path oracle.
pub fn run_decomposition_suite(seed: u64, instances: usize) -> SuiteReport {
    let mut report = SuiteReport::default();
    let mut rng = SplitMix64::new(seed);

    let mut seq_fail: Option<String> = None;
    for i in 0..instances {
        let (m, k, n) = (rng.range(1, 2), rng.range(1, 2), rng.range(1, 2));
        let a = mc_inst(&mut rng, m, k);
        let b = mc_inst(&mut rng, k, n);
        let run = || -> Result<(), String> {
            let sa = solve_component_mc(&a).map_err(|e| e.to_string())?;
            let sb = solve_component_mc(&b).map_err(|e| e.to_string())?;
            let composed = seq_mc(&sa, &sb).map_err(|e| e.to_string())?;
            let glued = seq_ro(a.as_romdp(), b.as_romdp()).map_err(|e| e.to_string())?;
            let glued = RoMc::from_romdp(glued).map_err(|e| e.to_string())?;
            let mono = solve_component_mc(&glued).map_err(|e| e.to_string())?;
            if !mono.p_mat().approx_eq(composed.p_mat(), SEM_TOL) {
                return Err("reachability mismatch".to_string());
            }
            if !mono.r_mat().approx_eq(composed.r_mat(), SEM_TOL) {
                return Err("reward mismatch".to_string());
            }
            sandwich(&glued, &mono)?;
            Ok(())
        };
        if let Err(e) = run() {
            seq_fail = Some(format!("instance {i}: {e}"));
            break;
        }
    }
    report.record(
        "decompose-seq",
        seq_fail.is_none(),
        seq_fail.clone().unwrap_or_else(|| format!("{instances} pairs, both equalities, sandwiched")),
    );

    let mut tr_fail: Option<String> = None;
    let mut done = 0usize;
    let mut attempts = 0usize;
    while done < instances {
        attempts += 1;
        if attempts > MAX_RESAMPLE {
            tr_fail = Some(format!("exhausted resampling after {done} instances"));
            break;
        }
        let (l, m, n) = (1, rng.range(1, 2), rng.range(1, 2));
        let a = mc_inst(&mut rng, l + m, l + n);
        let traced = match trace_ro(l, a.as_romdp()) {
            Ok(t) => t,
            Err(_) => continue,
        };
        if !certify_all_scheduler_exit(&traced).certified {
            continue;
        }
        let run = || -> Result<(), String> {
            let sa = solve_component_mc(&a).map_err(|e| e.to_string())?;
            let composed = trace_mc(l, &sa).map_err(|e| e.to_string())?;
            let glued = RoMc::from_romdp(traced.clone()).map_err(|e| e.to_string())?;
            let mono = solve_component_mc(&glued).map_err(|e| e.to_string())?;
            if !mono.p_mat().approx_eq(composed.p_mat(), SEM_TOL) {
                return Err("reachability mismatch".to_string());
            }
            if !mono.r_mat().approx_eq(composed.r_mat(), SEM_TOL) {
                return Err("reward mismatch".to_string());
            }
            sandwich(&glued, &mono)?;
            Ok(())
        };
        if let Err(e) = run() {
            tr_fail = Some(format!("instance {done}: {e}"));
            break;
        }
        done += 1;
    }
    report.record(
        "decompose-trace",
        tr_fail.is_none(),
        tr_fail.clone().unwrap_or_else(|| format!("{instances} instances, both equalities, sandwiched")),
    );

    let mut sum_fail: Option<String> = None;
    for i in 0..instances {
        let (am, an) = (rng.range(1, 2), rng.range(1, 2));
        let a = mc_inst(&mut rng, am, an);
        let (bm, bn) = (rng.range(1, 2), rng.range(1, 2));
        let b = mc_inst(&mut rng, bm, bn);
        let run = || -> Result<(), String> {
            let sa = solve_component_mc(&a).map_err(|e| e.to_string())?;
            let sb = solve_component_mc(&b).map_err(|e| e.to_string())?;
            let composed = sum_mc(&sa, &sb);
            let summed = sum_ro(a.as_romdp(), b.as_romdp()).map_err(|e| e.to_string())?;
            let glued = RoMc::from_romdp(summed).map_err(|e| e.to_string())?;
            let mono = solve_component_mc(&glued).map_err(|e| e.to_string())?;
            if !mono.approx_eq(&composed, SEM_TOL) {
                return Err("sum mismatch".to_string());
            }
            sandwich(&glued, &mono)?;
            Ok(())
        };
        if let Err(e) = run() {
            sum_fail = Some(format!("instance {i}: {e}"));
            break;
        }
    }
    report.record(
        "decompose-sum",
        sum_fail.is_none(),
        sum_fail.clone().unwrap_or_else(|| format!("{instances} pairs, sandwiched")),
    );

    report
}

/// Verifies one functoriality instance: the full fronts agree as sets, the
/// production pipeline (pruned composition) only reports achievable
/// behaviors, and its optima match the monolithic lift. Comparing pruned
/// fronts pairwise would be brittle: two schedulers tied in one entry can
/// flip their dominance order by a rounding ulp.
fn functorial_ok(
    whole_full: &Front,
    parts_full: &Front,
    parts_pruned: &Front,
) -> Result<(), String> {
    if !fronts_match(whole_full, parts_full, SEM_TOL) {
        return Err("full front mismatch".to_string());
    }
    for (x, _) in parts_pruned.elements() {
        if !whole_full.elements().iter().any(|(y, _)| x.approx_eq(y, SEM_TOL)) {
            return Err("pruned element not achievable".to_string());
        }
    }
    for i in 1..=whole_full.m() {
        for j in 1..=whole_full.n() {
            let (pw, rw, _) = extract_optimal(whole_full, i, j).map_err(|e| e.to_string())?;
            let (pp, rp, _) = extract_optimal(parts_pruned, i, j).map_err(|e| e.to_string())?;
            if fabs(pw - pp) > SEM_TOL || fabs(rw - rp) > SEM_TOL {
                return Err(format!("optimum mismatch at ({i},{j})"));
            }
        }
    }
    Ok(())
}

/// Functoriality of the scheduler semantics: lifting a composite equals
/// composing the lifts.
pub fn run_functoriality_suite(seed: u64, instances: usize) -> SuiteReport {
    let mut report = SuiteReport::default();
    let mut rng = SplitMix64::new(seed);
    let raw = brute_cfg();
    let cfg = pruned_cfg();

    let mut seq_fail: Option<String> = None;
    for i in 0..instances {
        let (m, k, n) = (rng.range(1, 2), 2, 2);
        let a = inst(&mut rng, m, k);
        let b = inst(&mut rng, k, n);
        let _ = n;
        let run = || -> Result<(), String> {
            let glued = seq_ro(&a, &b).map_err(|e| e.to_string())?;
            let whole = lift_romdp(&glued, "w", &raw).map_err(|e| e.to_string())?;
            let full = seq_sem(
                &lift_romdp(&a, "a", &raw).map_err(|e| e.to_string())?,
                &lift_romdp(&b, "b", &raw).map_err(|e| e.to_string())?,
                &raw,
            )
            .map_err(|e| e.to_string())?;
            let pruned = seq_sem(
                &lift_romdp(&a, "a", &cfg).map_err(|e| e.to_string())?,
                &lift_romdp(&b, "b", &cfg).map_err(|e| e.to_string())?,
                &cfg,
            )
            .map_err(|e| e.to_string())?;
            functorial_ok(&whole, &full, &pruned)
        };
        if let Err(e) = run() {
            seq_fail = Some(format!("instance {i}: {e}"));
            break;
        }
    }
    report.record(
        "functorial-seq",
        seq_fail.is_none(),
        seq_fail.clone().unwrap_or_else(|| format!("{instances} instances, fronts match")),
    );

    let mut sum_fail: Option<String> = None;
    for i in 0..instances {
        let (am, an) = (rng.range(1, 2), rng.range(1, 2));
        let a = inst(&mut rng, am, an);
        let bm = rng.range(1, 2);
        let b = inst(&mut rng, bm, 2);
        let run = || -> Result<(), String> {
            let glued = sum_ro(&a, &b).map_err(|e| e.to_string())?;
            let whole = lift_romdp(&glued, "w", &raw).map_err(|e| e.to_string())?;
            let full = sum_sem(
                &lift_romdp(&a, "a", &raw).map_err(|e| e.to_string())?,
                &lift_romdp(&b, "b", &raw).map_err(|e| e.to_string())?,
                &raw,
            )
            .map_err(|e| e.to_string())?;
            let pruned = sum_sem(
                &lift_romdp(&a, "a", &cfg).map_err(|e| e.to_string())?,
                &lift_romdp(&b, "b", &cfg).map_err(|e| e.to_string())?,
                &cfg,
            )
            .map_err(|e| e.to_string())?;
            functorial_ok(&whole, &full, &pruned)
        };
        if let Err(e) = run() {
            sum_fail = Some(format!("instance {i}: {e}"));
            break;
        }
    }
    report.record(
        "functorial-sum",
        sum_fail.is_none(),
        sum_fail.clone().unwrap_or_else(|| format!("{instances} instances, fronts match")),
    );

    let mut tr_fail: Option<String> = None;
    let mut done = 0usize;
    let mut attempts = 0usize;
    while done < instances {
        attempts += 1;
        if attempts > MAX_RESAMPLE {
            tr_fail = Some(format!("exhausted resampling after {done} instances"));
            break;
        }
        let (l, m, n) = (1, rng.range(1, 2), rng.range(1, 2));
        let a = inst(&mut rng, l + m, l + n);
        let traced = match trace_ro(l, &a) {
            Ok(t) => t,
            Err(_) => continue,
        };
        if !certify_all_scheduler_exit(&traced).certified {
            continue;
        }
        let run = || -> Result<(), String> {
            let whole = lift_romdp(&traced, "w", &raw).map_err(|e| e.to_string())?;
            let full = trace_sem(l, &lift_romdp(&a, "a", &raw).map_err(|e| e.to_string())?, &raw)
                .map_err(|e| e.to_string())?;
            let pruned = trace_sem(l, &lift_romdp(&a, "a", &cfg).map_err(|e| e.to_string())?, &cfg)
                .map_err(|e| e.to_string())?;
            functorial_ok(&whole, &full, &pruned)
        };
        if let Err(e) = run() {
            tr_fail = Some(format!("instance {done}: {e}"));
            break;
        }
        done += 1;
    }
    report.record(
        "functorial-trace",
        tr_fail.is_none(),
        tr_fail.clone().unwrap_or_else(|| format!("{instances} instances, fronts match")),
    );

    report
}

/// Compositional optima against exhaustive scheduler enumeration on the
/// flattened model, over every entrance/exit pair.
pub fn run_oracle_suite(seed: u64, diagrams: usize) -> SuiteReport {
    let mut report = SuiteReport::default();
    let mut rng = SplitMix64::new(seed);
    let shape = DiagramShape::default();
    let mut worst = 0.0f64;
    for d in 0..diagrams {
        let (env, expr) = random_terminating_diagram(&mut rng, &shape);
        let run = || -> Result<f64, String> {
            let mut ev = Evaluator::new(&env, EvalConfig::default());
            let front = ev.solve(&expr).map_err(|e| e.to_string())?;
            let flat = flatten(&expr, &env).map_err(|e| e.to_string())?;
            let brute = brute_force_front(flat.body()).map_err(|e| e.to_string())?;
            let mut dev = 0.0f64;
            for i in 1..=front.m() {
                for j in 1..=front.n() {
                    let (pc, rc, _) = extract_optimal(&front, i, j).map_err(|e| e.to_string())?;
                    let (pb, rb, _) = extract_optimal(&brute, i, j).map_err(|e| e.to_string())?;
                    let (dp, dr) = (fabs(pc - pb), fabs(rc - rb));
                    if dp > dev {
                        dev = dp;
                    }
                    if dr > dev {
                        dev = dr;
                    }
                    if dp > SEM_TOL || dr > SEM_TOL {
                        return Err(format!(
                            "({i},{j}): compositional p={pc} r={rc}, brute p={pb} r={rb}"
                        ));
                    }
                }
            }
            Ok(dev)
        };
        match run() {
            Ok(dev) => {
                if dev > worst {
                    worst = dev;
                }
            }
            Err(e) => {
                report.record("oracle-equivalence", false, format!("diagram {d}: {e}"));
                return report;
            }
        }
    }
    report.record(
        "oracle-equivalence",
        true,
        format!("{diagrams} diagrams, max deviation {worst:.2e}"),
    );
    report
}

/// Re-solving the flattened model under the synthesized scheduler
/// reproduces the reported optimum at every entrance/exit pair.
pub fn run_witness_suite(seed: u64, diagrams: usize) -> SuiteReport {
    let mut report = SuiteReport::default();
    let mut rng = SplitMix64::new(seed);
    let shape = DiagramShape::default();
    for d in 0..diagrams {
        let (env, expr) = random_terminating_diagram(&mut rng, &shape);
        let run = || -> Result<(), String> {
            let mut ev = Evaluator::new(&env, EvalConfig::default());
            let front = ev.solve(&expr).map_err(|e| e.to_string())?;
            let flat = flatten(&expr, &env).map_err(|e| e.to_string())?;
            for i in 1..=front.m() {
                for j in 1..=front.n() {
                    let (p, r, tag) = extract_optimal(&front, i, j).map_err(|e| e.to_string())?;
                    let sched = witness(&expr, &env, tag).map_err(|e| e.to_string())?;
                    let mc = flat.body().induced_mc(&sched).map_err(|e| format!("{e:?}"))?;
                    let solved = solve_component_mc(&mc).map_err(|e| e.to_string())?;
                    if fabs(solved.p(i, j) - p) > SEM_TOL || fabs(solved.r(i, j) - r) > SEM_TOL {
                        return Err(format!(
                            "({i},{j}): reported p={p} r={r}, witness p={} r={}",
                            solved.p(i, j),
                            solved.r(i, j)
                        ));
                    }
                }
            }
            Ok(())
        };
        if let Err(e) = run() {
            report.record("scheduler-witness", false, format!("diagram {d}: {e}"));
            return report;
        }
    }
    report.record("scheduler-witness", true, format!("{diagrams} diagrams reproduced"));
    report
}

fn random_arrow(rng: &mut SplitMix64, m: usize, n: usize, scale: f64) -> McArrow {
    let mut p = Mat::zeros(m, n);
    let mut r = Mat::zeros(m, n);
    for i in 0..m {
        let mut weights: Vec<f64> = (0..n).map(|_| rng.next_f64()).collect();
        let total: f64 = weights.iter().sum::<f64>().max(1e-9);
        for (j, w) in weights.iter_mut().enumerate() {
            p.set(i, j, *w / total * scale);
            r.set(i, j, rng.next_f64() * 3.0);
        }
    }
    McArrow::new(p, r)
}

fn shrink(rng: &mut SplitMix64, b: &McArrow) -> McArrow {
    let (m, n) = (b.m(), b.n());
    let mut p = Mat::zeros(m, n);
    let mut r = Mat::zeros(m, n);
    for i in 0..m {
        for j in 0..n {
            p.set(i, j, b.p(i + 1, j + 1) * (0.7 + 0.3 * rng.next_f64()));
            r.set(i, j, b.r(i + 1, j + 1) * (0.7 + 0.3 * rng.next_f64()));
        }
    }
    McArrow::new(p, r)
}

/// Composition preserves the entrywise order that pruning relies on: a
/// shrunk arrow stays dominated after sequencing, summing and tracing.
pub fn run_monotonicity_suite(seed: u64, perturbations: usize) -> SuiteReport {
    let mut report = SuiteReport::default();
    let mut rng = SplitMix64::new(seed);
    const EPS: f64 = 1e-12;
    for t in 0..perturbations {
        let (m, n) = (rng.range(2, 3), rng.range(2, 3));
        let b = random_arrow(&mut rng, m, n, 0.98);
        let a = shrink(&mut rng, &b);
        let ck = rng.range(1, 2);
        let c = random_arrow(&mut rng, n, ck, 0.98);
        let dk = rng.range(1, 2);
        let d = random_arrow(&mut rng, dk, m, 0.98);
        let run = || -> Result<(), String> {
            if !a.dominated_by(&b, EPS) {
                return Err("shrink lost dominance".to_string());
            }
            let (ac, bc) = (seq_mc(&a, &c), seq_mc(&b, &c));
            match (ac, bc) {
                (Ok(x), Ok(y)) if x.dominated_by(&y, EPS) => {}
                _ => return Err("sequencing broke dominance".to_string()),
            }
            let (da, db) = (seq_mc(&d, &a), seq_mc(&d, &b));
            match (da, db) {
                (Ok(x), Ok(y)) if x.dominated_by(&y, EPS) => {}
                _ => return Err("left sequencing broke dominance".to_string()),
            }
            if !sum_mc(&a, &c).dominated_by(&sum_mc(&b, &c), EPS) {
                return Err("sum broke dominance".to_string());
            }
            let (ta, tb) = (trace_mc(1, &a), trace_mc(1, &b));
            match (ta, tb) {
                (Ok(x), Ok(y)) if x.dominated_by(&y, EPS) => {}
                _ => return Err("trace broke dominance".to_string()),
            }
            Ok(())
        };
        if let Err(e) = run() {
            report.record("mc-monotonicity", false, format!("perturbation {t}: {e}"));
            return report;
        }
    }
    report.record("mc-monotonicity", true, format!("{perturbations} perturbations"));
    report
}

/// Optima agree with and without pruning across random diagrams.
pub fn run_pruning_suite(seed: u64, diagrams: usize) -> SuiteReport {
    let mut report = SuiteReport::default();
    let mut rng = SplitMix64::new(seed);
    let shape = DiagramShape::default();
    for d in 0..diagrams {
        let (env, expr) = random_terminating_diagram(&mut rng, &shape);
        let run = || -> Result<(), String> {
            let mut pruned = Evaluator::new(&env, EvalConfig::default());
            let fp = pruned.solve(&expr).map_err(|e| e.to_string())?;
            let raw_cfg = EvalConfig {
                pruning: false,
                max_schedulers_per_component: u64::MAX / 2,
                ..EvalConfig::default()
            };
            let mut raw = Evaluator::new(&env, raw_cfg);
            let fr = raw.solve(&expr).map_err(|e| e.to_string())?;
            for i in 1..=fp.m() {
                for j in 1..=fp.n() {
                    let (pp, rp, _) = extract_optimal(&fp, i, j).map_err(|e| e.to_string())?;
                    let (pr, rr, _) = extract_optimal(&fr, i, j).map_err(|e| e.to_string())?;
                    if fabs(pp - pr) > 1e-12 || fabs(rp - rr) > 1e-12 {
                        return Err(format!(
                            "({i},{j}): pruned p={pp} r={rp}, unpruned p={pr} r={rr}"
                        ));
                    }
                }
            }
            Ok(())
        };
        if let Err(e) = run() {
            report.record("pruning-soundness", false, format!("diagram {d}: {e}"));
            return report;
        }
    }
    report.record("pruning-soundness", true, format!("{diagrams} diagrams, tol 1e-12"));
    report
}
