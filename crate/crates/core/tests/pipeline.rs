//! End-to-end run through the public API: build components, compose a
//! diagram with a feedback loop, solve it compositionally, and cross-check
//! against brute-force enumeration of the flattened model.

use std::collections::BTreeMap;

use compmdp_core::expr::{Bindings, DiagramExpr, WireSpec};
use compmdp_core::flatten::{flatten, position_count};
use compmdp_core::mc::solve_component_mc;
use compmdp_core::model::{OpenMdp, RoMdp, Row, Target};
use compmdp_core::selftest::{brute_force_front, fronts_match};
use compmdp_core::semantics::{solve_query, EvalConfig, Evaluator, SemError};
use compmdp_core::termination::certify_all_scheduler_exit;

fn build(
    entrances: usize,
    exits: usize,
    actions: &[&str],
    positions: &[(&str, f64)],
    entry: &[Target],
    rows: &[(&str, &str, &[(Target, f64)])],
) -> OpenMdp {
    let mut trans = BTreeMap::new();
    for (q, a, entries) in rows {
        let mut row = Row::new();
        for (t, p) in entries.iter() {
            row.insert(t.clone(), *p);
        }
        trans.insert((q.to_string(), a.to_string()), row);
    }
    let body = RoMdp::new(
        entrances,
        exits,
        actions.iter().map(|a| a.to_string()).collect(),
        positions.iter().map(|(q, _)| q.to_string()).collect(),
        positions.iter().map(|(q, r)| (q.to_string(), *r)).collect(),
        entry.to_vec(),
        trans,
    );
    assert!(body.validate().is_ok(), "{:?}", body.validate().violations());
    OpenMdp::from_rightward(body)
}

fn pos(q: &str) -> Target {
    Target::Position(q.into())
}

fn task(reward: f64) -> OpenMdp {
    build(
        1,
        1,
        &["move"],
        &[("t", reward)],
        &[pos("t")],
        &[("t", "move", &[(pos("t"), 0.2), (Target::Exit(1), 0.8)])],
    )
}

/// Two actions splitting exits: slow pays more reward, quick leaves sooner.
/// Forces a real scheduling decision.
fn chooser() -> OpenMdp {
    build(
        1,
        2,
        &["quick", "slow"],
        &[("c", 1.0)],
        &[pos("c")],
        &[
            ("c", "slow", &[(pos("c"), 0.5), (Target::Exit(1), 0.5)]),
            ("c", "quick", &[(Target::Exit(2), 1.0)]),
        ],
    )
}

fn hub() -> OpenMdp {
    build(
        2,
        2,
        &["move"],
        &[("h", 0.3)],
        &[pos("h"), pos("h")],
        &[("h", "move", &[(pos("h"), 0.05), (Target::Exit(1), 0.7), (Target::Exit(2), 0.25)])],
    )
}

fn diagram() -> (DiagramExpr, Bindings) {
    let mut env = Bindings::new();
    env.define("task", DiagramExpr::prim("task", task(3.0)));
    env.define("hub", DiagramExpr::prim("hub", hub()));
    env.define("chooser", DiagramExpr::prim("chooser", chooser()));
    env.define(
        "branch",
        DiagramExpr::seq(
            DiagramExpr::var("chooser"),
            DiagramExpr::sum(DiagramExpr::var("task"), DiagramExpr::var("task")),
        ),
    );
    env.define(
        "floor",
        DiagramExpr::trace(
            1,
            DiagramExpr::seq(
                DiagramExpr::var("hub"),
                DiagramExpr::sum(DiagramExpr::var("task"), DiagramExpr::Wire(WireSpec::Identity(1))),
            ),
        ),
    );
    let top = DiagramExpr::seq(
        DiagramExpr::var("floor"),
        DiagramExpr::seq(
            DiagramExpr::var("branch"),
            DiagramExpr::seq(
                DiagramExpr::Wire(WireSpec::Swap(1, 1)),
                DiagramExpr::sum(DiagramExpr::var("floor"), DiagramExpr::var("floor")),
            ),
        ),
    );
    (top, env)
}

#[test]
fn compositional_solve_matches_brute_force() {
    let (top, env) = diagram();
    let flat = flatten(&top, &env).unwrap();
    assert!(certify_all_scheduler_exit(flat.body()).certified);

    let brute = brute_force_front(flat.body()).unwrap();
    let mut ev = Evaluator::new(&env, EvalConfig { pruning: false, ..EvalConfig::default() });
    let front = ev.solve(&top).unwrap();
    assert!(fronts_match(&front, &brute, 1e-9));
}

#[test]
fn witness_scheduler_reproduces_the_optimum() {
    let (top, env) = diagram();
    let (p, r, tau, stats) = solve_query(&top, &env, EvalConfig::default(), 1, 1).unwrap();
    assert!(p > 0.0 && p <= 1.0 + 1e-12);
    assert!(r > 0.0);
    assert_eq!(stats.component_solves, 3);
    assert!(stats.cache_hits > 0);

    let flat = flatten(&top, &env).unwrap();
    let mc = flat.body().induced_mc(&tau).unwrap();
    let arrow = solve_component_mc(&mc).unwrap();
    assert!((arrow.p(1, 1) - p).abs() < 1e-9);
    assert!((arrow.r(1, 1) - r).abs() < 1e-9);
}

#[test]
fn census_counts_positions_without_flattening() {
    let (top, env) = diagram();
    let n = position_count(&top, &env).unwrap();
    let flat = flatten(&top, &env).unwrap();
    assert_eq!(n, flat.body().positions().len() as u128);
}

#[test]
fn freeze_collapses_the_front_to_one_element() {
    let (_, env) = diagram();
    let mut ev = Evaluator::new(&env, EvalConfig::default());

    let frozen = DiagramExpr::freeze(DiagramExpr::var("floor"));
    let front = ev.solve(&frozen).unwrap();
    assert_eq!(front.elements().len(), 1);

    // Freezing is rejected when the subdiagram has several exits, since a
    // single optimal summary cannot speak for every exit at once.
    let multi = DiagramExpr::freeze(DiagramExpr::var("chooser"));
    let err = ev.solve(&multi).unwrap_err();
    assert!(matches!(err, SemError::FrozenMultiExit { exits: 2 }));
}
