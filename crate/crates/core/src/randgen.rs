//! Seeded random models and diagrams for the self-test suite and the
//! property tests. Determinism matters more than statistical quality, so
//! the generator is a fixed splitmix64 stream.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::expr::{Bindings, DiagramExpr, WireSpec};
use crate::flatten::{flatten, position_count};
use crate::model::{OpenMdp, RoMc, RoMdp, Row, Target};
use crate::termination::certify_all_scheduler_exit;

/// splitmix64: one 64-bit state, one additive constant, strong enough
/// mixing for test-case generation.
#[derive(Clone, Debug)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }

    /// Uniform in [0, 1) with 53 random bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in 0..n (n > 0).
    pub fn below(&mut self, n: usize) -> usize {
        (self.next_u64() % n as u64) as usize
    }

    /// Uniform in lo..=hi.
    pub fn range(&mut self, lo: usize, hi: usize) -> usize {
        lo + self.below(hi - lo + 1)
    }

    pub fn chance(&mut self, p: f64) -> bool {
        self.next_f64() < p
    }
}

/// Shape constraints for a random component.
#[derive(Clone, Debug)]
pub struct ModelShape {
    pub entrances: usize,
    pub exits: usize,
    pub positions: usize,
    pub actions: usize,
    /// Upper bound on self-loop mass per row.
    pub max_stay: f64,
    /// When set, rows only move to later positions or exits and dead ends
    /// are excluded, so exits are reached almost surely under every
    /// scheduler.
    pub terminating: bool,
    pub max_reward: f64,
}

impl ModelShape {
    pub fn small_mc(positions: usize, entrances: usize, exits: usize) -> ModelShape {
        ModelShape {
            entrances,
            exits,
            positions,
            actions: 1,
            max_stay: 0.45,
            terminating: true,
            max_reward: 5.0,
        }
    }
}

/// The action names the generators draw from: a0, a1, ...
pub fn default_actions(k: usize) -> Vec<String> {
    (0..k).map(|i| format!("a{i}")).collect()
}

/// A random valid component. Exits each get exactly one accessor. In
/// terminating mode every action of the last position owns an exit, so the
/// shape may receive more exits than requested when exits < actions.
pub fn random_romdp(rng: &mut SplitMix64, shape: &ModelShape) -> RoMdp {
    let nq = shape.positions.max(1);
    let na = shape.actions.max(1);
    let mut exits = shape.exits.max(1);
    if shape.terminating && exits < na {
        exits = na;
    }
    let positions: Vec<String> = (0..nq).map(|i| format!("q{i}")).collect();
    let actions = default_actions(na);
    let mut rewards = BTreeMap::new();
    for q in &positions {
        let r = (rng.next_f64() * shape.max_reward * 100.0) as u64 as f64 / 100.0;
        rewards.insert(q.clone(), r);
    }
    // Assign each exit one accessor: an entrance or a (position, action).
    // owned[exit j - 1] = Some((pos idx, act idx)) or None when an entrance
    // takes it.
    let mut owned: Vec<Option<(usize, usize)>> = alloc::vec![None; exits];
    let mut entrance_exit: Vec<Option<usize>> = alloc::vec![None; shape.entrances];
    let mut next_exit = 0usize;
    if shape.terminating {
        // The last position must exit under every action.
        for a in 0..na {
            owned[next_exit] = Some((nq - 1, a));
            next_exit += 1;
        }
    }
    for j in next_exit..exits {
        if shape.entrances > 0 && rng.chance(0.2) {
            let i = rng.below(shape.entrances);
            if entrance_exit[i].is_none() {
                entrance_exit[i] = Some(j);
                continue;
            }
        }
        let qi = if shape.terminating && nq > 1 {
            rng.range(nq / 2, nq - 1)
        } else {
            rng.below(nq)
        };
        owned[j] = Some((qi, rng.below(na)));
    }
    // Exit sets per (position, action).
    let mut exit_sets: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
    for (j, slot) in owned.iter().enumerate() {
        if let Some((qi, ai)) = slot {
            exit_sets.entry((*qi, *ai)).or_default().push(j + 1);
        }
    }
    let entry: Vec<Target> = (0..shape.entrances)
        .map(|i| match entrance_exit[i] {
            Some(j) => Target::Exit(j + 1),
            None => Target::Position(positions[rng.below(nq)].clone()),
        })
        .collect();
    let mut trans = BTreeMap::new();
    for qi in 0..nq {
        for ai in 0..na {
            let owned_exits = exit_sets.get(&(qi, ai)).cloned().unwrap_or_default();
            let row = random_row(rng, shape, qi, &positions, &owned_exits);
            if !row.is_empty() {
                trans.insert((positions[qi].clone(), actions[ai].clone()), row);
            }
        }
    }
    RoMdp::new(
        shape.entrances,
        exits,
        actions,
        positions,
        rewards,
        entry,
        trans,
    )
}

fn random_row(
    rng: &mut SplitMix64,
    shape: &ModelShape,
    qi: usize,
    positions: &[String],
    owned_exits: &[usize],
) -> Row {
    let nq = positions.len();
    let mut targets: Vec<Target> = owned_exits.iter().map(|j| Target::Exit(*j)).collect();
    if shape.terminating {
        // Forward motion plus a bounded self-loop. The last position only
        // uses its owned exits and the self-loop.
        for fi in qi + 1..nq {
            if rng.chance(0.6) {
                targets.push(Target::Position(positions[fi].clone()));
            }
        }
        if targets.is_empty() && qi + 1 < nq {
            targets.push(Target::Position(positions[qi + 1].clone()));
        }
        let stay = if rng.chance(0.5) {
            rng.next_f64() * shape.max_stay
        } else {
            0.0
        };
        if targets.is_empty() {
            // Only reachable for the last position, whose actions all own
            // exits in terminating mode.
            return Row::new();
        }
        return weighted_row(rng, &targets, stay, &positions[qi]);
    }
    // Unrestricted mode: any positions, owned exits, possible dead end.
    if owned_exits.is_empty() && rng.chance(0.15) {
        return Row::new();
    }
    for (fi, q) in positions.iter().enumerate() {
        if fi != qi && rng.chance(0.4) {
            targets.push(Target::Position(q.clone()));
        }
    }
    if targets.is_empty() {
        targets.push(Target::Position(positions[rng.below(nq)].clone()));
    }
    let stay = if rng.chance(0.4) {
        rng.next_f64() * shape.max_stay
    } else {
        0.0
    };
    weighted_row(rng, &targets, stay, &positions[qi])
}

/// Splits 1 - stay over the targets with random positive weights; the last
/// share is the exact remainder so the row sums to 1 in floating point.
fn weighted_row(rng: &mut SplitMix64, targets: &[Target], stay: f64, own: &str) -> Row {
    let mut row = Row::new();
    let mut remaining = 1.0;
    if stay > 0.0 {
        row.insert(Target::Position(own.to_string()), stay);
        remaining -= stay;
    }
    let k = targets.len();
    let mut weights: Vec<f64> = (0..k).map(|_| 0.05 + rng.next_f64()).collect();
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w = *w / total * remaining;
    }
    let mut spent = 0.0;
    for (i, t) in targets.iter().enumerate() {
        let share = if i + 1 == k { remaining - spent } else { weights[i] };
        spent += share;
        *row.entry(t.clone()).or_insert(0.0) += share;
    }
    row
}

/// A random valid single-action component.
pub fn random_romc(rng: &mut SplitMix64, shape: &ModelShape) -> RoMc {
    let mut s = shape.clone();
    s.actions = 1;
    let m = random_romdp(rng, &s);
    RoMc::from_romdp(m).expect("single-action by construction")
}

/// Options for random diagram generation.
#[derive(Clone, Debug)]
pub struct DiagramShape {
    pub max_depth: usize,
    /// Budget of multi-action positions across the expansion, to keep
    /// brute-force scheduler enumeration feasible.
    pub multi_action_budget: u128,
    pub max_component_positions: usize,
}

impl Default for DiagramShape {
    fn default() -> Self {
        DiagramShape { max_depth: 4, multi_action_budget: 10, max_component_positions: 6 }
    }
}

/// A random rightward diagram over almost-surely terminating components,
/// rejection-sampled so the flattened model is itself almost surely
/// terminating under every scheduler (traces can otherwise trap mass).
/// Components are valid on their own action sets; flattening pads them to
/// a shared set, which can duplicate exit rows, so the flattened body is
/// solved but not re-validated.
pub fn random_terminating_diagram(
    rng: &mut SplitMix64,
    shape: &DiagramShape,
) -> (Bindings, DiagramExpr) {
    loop {
        let mut env = Bindings::new();
        let mut budget = shape.multi_action_budget;
        let mut counter = 0usize;
        let expr = gen_expr(rng, shape, &mut env, &mut budget, &mut counter, shape.max_depth, 0);
        let flat = match flatten(&expr, &env) {
            Ok(f) => f,
            Err(_) => continue,
        };
        if position_count(&expr, &env).unwrap_or(u128::MAX) > 28 {
            continue;
        }
        if !certify_all_scheduler_exit(flat.body()).certified {
            continue;
        }
        return (env, expr);
    }
}

fn gen_component(
    rng: &mut SplitMix64,
    shape: &DiagramShape,
    budget: &mut u128,
    entrances: usize,
    exits: usize,
) -> OpenMdp {
    let positions = rng.range(1, shape.max_component_positions.min(3));
    let actions = if *budget >= positions as u128 && rng.chance(0.55) {
        *budget -= positions as u128;
        2
    } else {
        1
    };
    let ms = ModelShape {
        entrances,
        exits,
        positions,
        actions,
        max_stay: 0.45,
        terminating: true,
        max_reward: 4.0,
    };
    let m = random_romdp(rng, &ms);
    debug_assert!(m.validate().is_ok());
    OpenMdp::from_rightward(m)
}

/// Generates an expression with the given domain arity (0 means free
/// choice), returning the expression; its codomain is whatever the
/// construction produced.
#[allow(clippy::too_many_arguments)]
fn gen_expr(
    rng: &mut SplitMix64,
    shape: &DiagramShape,
    env: &mut Bindings,
    budget: &mut u128,
    counter: &mut usize,
    depth: usize,
    want_dom: usize,
) -> DiagramExpr {
    let dom = if want_dom == 0 { rng.range(1, 2) } else { want_dom };
    if depth == 0 || rng.chance(0.3) {
        let exits = rng.range(1, 2);
        let c = gen_component(rng, shape, budget, dom, exits);
        *counter += 1;
        let id = format!("C{}", *counter);
        // Half the primitives are shared through a binding used twice.
        if rng.chance(0.4) && c.body().entrances() == c.body().exits() {
            env.define(&id, DiagramExpr::prim(&id, c));
            return DiagramExpr::seq(DiagramExpr::var(&id), DiagramExpr::var(&id));
        }
        return DiagramExpr::prim(&id, c);
    }
    match rng.below(4) {
        0 => {
            let a = gen_expr(rng, shape, env, budget, counter, depth - 1, dom);
            let (k, _) = out_arity(&a, env);
            let b = gen_expr(rng, shape, env, budget, counter, depth - 1, k);
            DiagramExpr::seq(a, b)
        }
        1 => {
            let a = gen_expr(rng, shape, env, budget, counter, depth - 1, 0);
            let b = gen_expr(rng, shape, env, budget, counter, depth - 1, 0);
            DiagramExpr::sum(a, b)
        }
        2 => {
            // tr[1] around a body with one extra port on each side.
            let a = gen_expr(rng, shape, env, budget, counter, depth - 1, dom + 1);
            let (k, _) = out_arity(&a, env);
            if k < 2 {
                return a;
            }
            DiagramExpr::trace(1, a)
        }
        _ => {
            let a = gen_expr(rng, shape, env, budget, counter, depth - 1, dom);
            let (k, _) = out_arity(&a, env);
            DiagramExpr::seq(a, DiagramExpr::Wire(WireSpec::Identity(k)))
        }
    }
}

fn out_arity(expr: &DiagramExpr, env: &Bindings) -> (usize, usize) {
    match crate::expr::arity_of(expr, env) {
        Ok((_, cod)) => (cod.right + cod.left, cod.left),
        Err(_) => (1, 0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splitmix_is_deterministic() {
        let mut a = SplitMix64::new(7);
        let mut b = SplitMix64::new(7);
        for _ in 0..32 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
        let f = SplitMix64::new(7).next_f64();
        assert!((0.0..1.0).contains(&f));
    }

    #[test]
    fn random_models_validate() {
        let mut rng = SplitMix64::new(42);
        for i in 0..50 {
            let shape = ModelShape {
                entrances: rng.range(1, 3),
                exits: rng.range(1, 3),
                positions: rng.range(1, 6),
                actions: rng.range(1, 2),
                max_stay: 0.45,
                terminating: i % 2 == 0,
                max_reward: 5.0,
            };
            let m = random_romdp(&mut rng, &shape);
            let report = m.validate();
            assert!(report.is_ok(), "seed case {i}: {report}");
        }
    }

    #[test]
    fn terminating_models_certify() {
        let mut rng = SplitMix64::new(11);
        for _ in 0..30 {
            let shape = ModelShape {
                entrances: 2,
                exits: 2,
                positions: 4,
                actions: 2,
                max_stay: 0.45,
                terminating: true,
                max_reward: 5.0,
            };
            let m = random_romdp(&mut rng, &shape);
            assert!(certify_all_scheduler_exit(&m).certified);
        }
    }

    #[test]
    fn random_diagrams_flatten_and_certify() {
        let mut rng = SplitMix64::new(2024);
        for _ in 0..10 {
            let (env, expr) = random_terminating_diagram(&mut rng, &DiagramShape::default());
            let flat = flatten(&expr, &env).unwrap();
            assert!(certify_all_scheduler_exit(flat.body()).certified);
            assert!(flat.body().entrances() >= 1 && flat.body().exits() >= 1);
        }
    }
}
