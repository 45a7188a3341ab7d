//! Qualitative check that a model leaves through an exit almost surely
//! under every scheduler.
//!
//! A position can trap mass exactly when some action keeps the run inside a
//! closed region with no exit mass anywhere. The set of such positions is
//! the greatest fixpoint of
//!
//!   C := { q | some action row of q has zero exit mass and all its
//!          probability stays inside C }
//!
//! where a missing row counts as an empty row (a dead end a scheduler can
//! choose to halt in). The model is certified when no position of C is
//! reachable from an entrance under any action.

use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::model::{RoMdp, Target};

#[derive(Clone, Debug)]
pub struct TerminationReport {
    pub certified: bool,
    /// A reachable position from which some scheduler avoids every exit
    /// forever, when one exists.
    pub culprit: Option<String>,
}

/// Decides whether every scheduler leaves the model almost surely once it
/// enters through any entrance. Positionless models are trivially certified.
pub fn certify_all_scheduler_exit(m: &RoMdp) -> TerminationReport {
    let positions: Vec<&String> = m.positions().iter().collect();
    if positions.is_empty() {
        return TerminationReport { certified: true, culprit: None };
    }
    let index: BTreeMap<&String, usize> = positions.iter().enumerate().map(|(i, q)| (*q, i)).collect();

    // Per (position, action): does the row leak to an exit, and which
    // positions does it touch. Missing rows are dead ends: no exit mass and
    // no successors.
    struct RowInfo {
        has_exit_mass: bool,
        succ: Vec<usize>,
    }
    let mut rows: Vec<Vec<RowInfo>> = Vec::with_capacity(positions.len());
    for q in &positions {
        let mut per_action = Vec::with_capacity(m.actions().len());
        for a in m.actions() {
            let mut info = RowInfo { has_exit_mass: false, succ: Vec::new() };
            if let Some(row) = m.row(q, a) {
                for (t, p) in row.iter() {
                    if *p <= 0.0 {
                        continue;
                    }
                    match t {
                        Target::Exit(_) => info.has_exit_mass = true,
                        Target::Position(next) => {
                            if let Some(&ni) = index.get(next) {
                                info.succ.push(ni);
                            }
                        }
                    }
                }
            }
            per_action.push(info);
        }
        rows.push(per_action);
    }

    // Greatest fixpoint by iterated removal: drop q once every action of q
    // either leaks to an exit or steps outside the surviving set.
    let n = positions.len();
    let mut in_c = alloc::vec![true; n];
    loop {
        let mut changed = false;
        for q in 0..n {
            if !in_c[q] {
                continue;
            }
            let keeps = rows[q]
                .iter()
                .any(|r| !r.has_exit_mass && r.succ.iter().all(|&s| in_c[s]));
            if !keeps {
                in_c[q] = false;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }

    // Positions reachable from entrance targets over any action.
    let mut reach = alloc::vec![false; n];
    let mut queue = VecDeque::new();
    for t in m.entry_targets() {
        if let Target::Position(q) = t {
            if let Some(&qi) = index.get(q) {
                if !reach[qi] {
                    reach[qi] = true;
                    queue.push_back(qi);
                }
            }
        }
    }
    while let Some(q) = queue.pop_front() {
        for r in &rows[q] {
            for &s in &r.succ {
                if !reach[s] {
                    reach[s] = true;
                    queue.push_back(s);
                }
            }
        }
    }

    let culprit = (0..n).find(|&q| reach[q] && in_c[q]).map(|q| positions[q].to_string());
    TerminationReport { certified: culprit.is_none(), culprit }
}

/// Positions reachable from the entrances over any action, by name.
pub fn reachable_positions(m: &RoMdp) -> BTreeSet<String> {
    let mut seen: BTreeSet<String> = BTreeSet::new();
    let mut queue: VecDeque<String> = VecDeque::new();
    for t in m.entry_targets() {
        if let Target::Position(q) = t {
            if seen.insert(q.clone()) {
                queue.push_back(q.clone());
            }
        }
    }
    while let Some(q) = queue.pop_front() {
        for a in m.actions() {
            if let Some(row) = m.row(&q, a) {
                for (t, p) in row.iter() {
                    if *p > 0.0 {
                        if let Target::Position(next) = t {
                            if seen.insert(next.clone()) {
                                queue.push_back(next.clone());
                            }
                        }
                    }
                }
            }
        }
    }
    seen
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::collections::BTreeMap;
    use alloc::vec;
    use alloc::vec::Vec;
    use crate::model::Row;

    fn single(
        rows: Vec<(&str, &str, Vec<(Target, f64)>)>,
        positions: Vec<&str>,
        entry: Vec<Target>,
        exits: usize,
        actions: Vec<&str>,
    ) -> RoMdp {
        let mut trans = BTreeMap::new();
        for (q, a, pairs) in rows {
            let mut row = Row::new();
            for (t, p) in pairs {
                row.insert(t, p);
            }
            trans.insert((q.to_string(), a.to_string()), row);
        }
        let rewards = positions.iter().map(|q| (q.to_string(), 1.0)).collect();
        RoMdp::new(
            entry.len(),
            exits,
            actions.into_iter().map(|a| a.to_string()).collect(),
            positions.into_iter().map(|q| q.to_string()).collect(),
            rewards,
            entry,
            trans,
        )
    }

    #[test]
    fn leaky_chain_certifies() {
        let m = single(
            vec![
                ("q0", "a", vec![(Target::Position("q1".into()), 0.5), (Target::Exit(1), 0.5)]),
                ("q1", "a", vec![(Target::Exit(1), 1.0)]),
            ],
            vec!["q0", "q1"],
            vec![Target::Position("q0".into())],
            1,
            vec!["a"],
        );
        let rep = certify_all_scheduler_exit(&m);
        assert!(rep.certified);
        assert!(rep.culprit.is_none());
    }

    #[test]
    fn pure_self_loop_is_rejected() {
        let m = single(
            vec![("q0", "a", vec![(Target::Position("q0".into()), 1.0)])],
            vec!["q0"],
            vec![Target::Position("q0".into())],
            1,
            vec!["a"],
        );
        let rep = certify_all_scheduler_exit(&m);
        assert!(!rep.certified);
        assert_eq!(rep.culprit.as_deref(), Some("q0"));
    }

    #[test]
    fn dead_end_row_is_rejected() {
        // q1 has no row at all, so a run reaching it halts inside.
        let m = single(
            vec![("q0", "a", vec![(Target::Position("q1".into()), 0.3), (Target::Exit(1), 0.7)])],
            vec!["q0", "q1"],
            vec![Target::Position("q0".into())],
            1,
            vec!["a"],
        );
        let rep = certify_all_scheduler_exit(&m);
        assert!(!rep.certified);
        assert_eq!(rep.culprit.as_deref(), Some("q1"));
    }

    #[test]
    fn trap_only_matters_when_reachable() {
        // q1 self-loops forever but nothing reaches it.
        let m = single(
            vec![
                ("q0", "a", vec![(Target::Exit(1), 1.0)]),
                ("q1", "a", vec![(Target::Position("q1".into()), 1.0)]),
            ],
            vec!["q0", "q1"],
            vec![Target::Position("q0".into())],
            1,
            vec!["a"],
        );
        assert!(certify_all_scheduler_exit(&m).certified);
    }

    #[test]
    fn one_looping_action_breaks_certification() {
        // Action b always exits, but a scheduler may pick a and loop.
        let m = single(
            vec![
                ("q0", "a", vec![(Target::Position("q0".into()), 1.0)]),
                ("q0", "b", vec![(Target::Exit(1), 1.0)]),
            ],
            vec!["q0"],
            vec![Target::Position("q0".into())],
            1,
            vec!["a", "b"],
        );
        let rep = certify_all_scheduler_exit(&m);
        assert!(!rep.certified);
        assert_eq!(rep.culprit.as_deref(), Some("q0"));
    }

    #[test]
    fn two_state_cycle_without_leak_is_rejected() {
        // Under action a the pair q0 <-> q1 circulates forever even though
        // action b would leave; the gfp keeps both.
        let m = single(
            vec![
                ("q0", "a", vec![(Target::Position("q1".into()), 1.0)]),
                ("q1", "a", vec![(Target::Position("q0".into()), 1.0)]),
                ("q0", "b", vec![(Target::Exit(1), 1.0)]),
                ("q1", "b", vec![(Target::Exit(1), 1.0)]),
            ],
            vec!["q0", "q1"],
            vec![Target::Position("q0".into())],
            1,
            vec!["a", "b"],
        );
        assert!(!certify_all_scheduler_exit(&m).certified);
    }

    #[test]
    fn entrance_straight_to_exit_certifies() {
        let m = RoMdp::wire(1, 1, vec!["a".to_string()], vec![Target::Exit(1)]);
        assert!(certify_all_scheduler_exit(&m).certified);
    }

    #[test]
    fn reachable_positions_follow_all_actions() {
        let m = single(
            vec![
                ("q0", "a", vec![(Target::Position("q1".into()), 1.0)]),
                ("q0", "b", vec![(Target::Position("q2".into()), 1.0)]),
                ("q1", "a", vec![(Target::Exit(1), 1.0)]),
                ("q2", "a", vec![(Target::Exit(1), 1.0)]),
            ],
            vec!["q0", "q1", "q2", "q3"],
            vec![Target::Position("q0".into())],
            1,
            vec!["a", "b"],
        );
        let r = reachable_positions(&m);
        assert!(r.contains("q0") && r.contains("q1") && r.contains("q2"));
        assert!(!r.contains("q3"));
    }
}
