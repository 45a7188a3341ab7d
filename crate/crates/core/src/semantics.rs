//! The scheduler-set semantics: components lift to Pareto fronts of Markov
//! chain behaviors, fronts compose elementwise, repeated bindings are solved
//! once, frozen subdiagrams are solved monolithically, and the optimal
//! element carries a tag from which a flat scheduler is reconstructed.

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::algebra::{compose_seq, compose_sum, AlgebraError, Tsmc};
use crate::expr::{Bindings, DiagramExpr, WireSpec};
use crate::flatten::flatten;
use crate::linalg::fabs;
use crate::mc::{seq_mc, solve_component_mc, sum_mc, trace_mc, McArrow, McError};
use crate::model::{OpenMdp, RoMdp, Scheduler, Target};

/// Evaluation knobs.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalConfig {
    pub max_schedulers_per_component: u64,
    pub prune_epsilon: f64,
    pub memoization: bool,
    pub pruning: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            max_schedulers_per_component: 65_536,
            prune_epsilon: 0.0,
            memoization: true,
            pruning: true,
        }
    }
}

impl EvalConfig {
    /// Mixes the fields into a cache-key component so fronts computed under
    /// one configuration are never reused under another.
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0x9e37_79b9_7f4a_7c15;
        let mut mix = |v: u64| {
            h ^= v;
            h = h.wrapping_mul(0xff51_afd7_ed55_8ccd);
            h ^= h >> 33;
        };
        mix(self.max_schedulers_per_component);
        mix(self.prune_epsilon.to_bits());
        mix(self.memoization as u64);
        mix(self.pruning as u64);
        h
    }
}

/// Failures of semantic evaluation.
#[derive(Clone, Debug, PartialEq)]
pub enum SemError {
    SchedulerExplosion { count: u64, cap: u64 },
    FrozenMultiExit { exits: usize },
    EmptyFront,
    TagShape(String),
    Algebra(AlgebraError),
    Numeric(McError),
}

impl From<AlgebraError> for SemError {
    fn from(e: AlgebraError) -> Self {
        SemError::Algebra(e)
    }
}

impl From<McError> for SemError {
    fn from(e: McError) -> Self {
        match e {
            McError::ArityMismatch(msg) => SemError::Algebra(AlgebraError::ArityMismatch(msg)),
            other => SemError::Numeric(other),
        }
    }
}

impl core::fmt::Display for SemError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            SemError::SchedulerExplosion { count, cap } => write!(
                f,
                "component has {count} memoryless schedulers, over the cap of {cap}; consider freeze(...)"
            ),
            SemError::FrozenMultiExit { exits } => {
                write!(f, "freeze needs a unique exit, found {exits}")
            }
            SemError::EmptyFront => write!(f, "no scheduler produced a behavior"),
            SemError::TagShape(msg) => write!(f, "scheduler tag does not match diagram: {msg}"),
            SemError::Algebra(e) => write!(f, "{e}"),
            SemError::Numeric(e) => write!(f, "{e}"),
        }
    }
}

/// A tree of scheduler choices mirroring the diagram structure.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum SchedulerTag {
    Leaf { component: String, scheduler: Scheduler },
    Seq(Box<SchedulerTag>, Box<SchedulerTag>),
    Sum(Box<SchedulerTag>, Box<SchedulerTag>),
    Trace(Box<SchedulerTag>),
    Frozen { component: String, scheduler: Scheduler },
}

/// A set of achievable behaviors with the schedulers achieving them, kept
/// in descending matrix order with dominated elements removed.
#[derive(Clone, Debug)]
pub struct Front {
    m: usize,
    n: usize,
    elems: Vec<(McArrow, SchedulerTag)>,
}

impl Front {
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn elements(&self) -> &[(McArrow, SchedulerTag)] {
        &self.elems
    }

    pub fn len(&self) -> usize {
        self.elems.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elems.is_empty()
    }

    fn from_elems(m: usize, n: usize, elems: Vec<(McArrow, SchedulerTag)>, cfg: &EvalConfig) -> Front {
        let elems = if cfg.pruning {
            prune(elems, cfg.prune_epsilon)
        } else {
            canonical_sort(elems)
        };
        Front { m, n, elems }
    }

    /// True when both fronts hold the same matrices within `tol`, element
    /// by element in canonical order, ignoring tags.
    pub fn approx_same_matrices(&self, other: &Front, tol: f64) -> bool {
        self.elems.len() == other.elems.len()
            && self
                .elems
                .iter()
                .zip(&other.elems)
                .all(|((a, _), (b, _))| a.approx_eq(b, tol))
    }
}

fn canonical_sort(mut elems: Vec<(McArrow, SchedulerTag)>) -> Vec<(McArrow, SchedulerTag)> {
    elems.sort_by(|(a, ta), (b, tb)| b.total_cmp(a).then_with(|| ta.cmp(tb)));
    elems
}

/// Removes every element dominated (entrywise, within `eps`) by a retained
/// one. Elements are considered in descending matrix order, so with eps = 0
/// exactly the maximal elements survive; exact duplicates keep the
/// lexicographically smallest tag.
pub fn prune(elems: Vec<(McArrow, SchedulerTag)>, eps: f64) -> Vec<(McArrow, SchedulerTag)> {
    let sorted = canonical_sort(elems);
    let mut kept: Vec<(McArrow, SchedulerTag)> = Vec::new();
    for (cand, tag) in sorted {
        let dominated = kept.iter().any(|(k, _)| cand.dominated_by(k, eps));
        if !dominated {
            kept.push((cand, tag));
        }
    }
    kept
}

fn wire_tag(name: &str) -> SchedulerTag {
    SchedulerTag::Leaf { component: name.to_string(), scheduler: Scheduler::new() }
}

/// All memoryless schedulers of a component, solved and pruned. The
/// scheduler count is the product over positions of available actions;
/// actions with identical rows at a position are enumerated once through
/// their alphabetically first representative.
pub fn lift_romdp(a: &RoMdp, id: &str, cfg: &EvalConfig) -> Result<Front, SemError> {
    let mut distinct_count: u64 = 1;
    let mut class_reps: Vec<(&String, Vec<&String>)> = Vec::new();
    for q in a.positions() {
        let mut classes: BTreeMap<Vec<(Target, u64)>, &String> = BTreeMap::new();
        for act in a.actions() {
            let key: Vec<(Target, u64)> = match a.row(q, act) {
                Some(row) => row.iter().map(|(t, p)| (t.clone(), p.to_bits())).collect(),
                None => Vec::new(),
            };
            let slot = classes.entry(key).or_insert(act);
            if act < *slot {
                *slot = act;
            }
        }
        distinct_count = distinct_count.saturating_mul(classes.len() as u64);
        class_reps.push((q, classes.into_values().collect()));
    }
    // Actions with bitwise-equal rows induce the same chain, so the cap
    // binds on the distinct choices the solver will actually enumerate.
    if distinct_count > cfg.max_schedulers_per_component {
        return Err(SemError::SchedulerExplosion {
            count: distinct_count,
            cap: cfg.max_schedulers_per_component,
        });
    }
    let mut elems = Vec::new();
    let mut odometer = alloc::vec![0usize; class_reps.len()];
    loop {
        let mut tau = Scheduler::new();
        for (slot, (q, reps)) in odometer.iter().zip(&class_reps) {
            tau.assign(*q, reps[*slot]);
        }
        let mc = a
            .induced_mc(&tau)
            .map_err(|e| SemError::TagShape(format!("{e:?}")))?;
        let arrow = solve_component_mc(&mc)?;
        elems.push((
            arrow,
            SchedulerTag::Leaf { component: id.to_string(), scheduler: tau },
        ));
        let mut k = class_reps.len();
        loop {
            if k == 0 {
                return Ok(Front::from_elems(a.entrances(), a.exits(), elems, cfg));
            }
            k -= 1;
            odometer[k] += 1;
            if odometer[k] < class_reps[k].1.len() {
                break;
            }
            odometer[k] = 0;
        }
    }
}

/// Sequential composition of fronts, elementwise over the product.
pub fn seq_sem(f: &Front, g: &Front, cfg: &EvalConfig) -> Result<Front, SemError> {
    let mut elems = Vec::with_capacity(f.len() * g.len());
    for (fa, ft) in &f.elems {
        for (ga, gt) in &g.elems {
            elems.push((
                seq_mc(fa, ga)?,
                SchedulerTag::Seq(Box::new(ft.clone()), Box::new(gt.clone())),
            ));
        }
    }
    Ok(Front::from_elems(f.m, g.n, elems, cfg))
}

/// Sum of fronts, elementwise over the product.
pub fn sum_sem(f: &Front, g: &Front, cfg: &EvalConfig) -> Result<Front, SemError> {
    let mut elems = Vec::with_capacity(f.len() * g.len());
    for (fa, ft) in &f.elems {
        for (ga, gt) in &g.elems {
            elems.push((
                sum_mc(fa, ga),
                SchedulerTag::Sum(Box::new(ft.clone()), Box::new(gt.clone())),
            ));
        }
    }
    Ok(Front::from_elems(f.m + g.m, f.n + g.n, elems, cfg))
}

/// Trace of a front, elementwise.
pub fn trace_sem(l: usize, f: &Front, cfg: &EvalConfig) -> Result<Front, SemError> {
    if f.m < l || f.n < l {
        return Err(SemError::Algebra(AlgebraError::ArityMismatch(format!(
            "cannot trace {l} ports of a {}x{} front",
            f.m, f.n
        ))));
    }
    let mut elems = Vec::with_capacity(f.len());
    for (fa, ft) in &f.elems {
        elems.push((trace_mc(l, fa)?, SchedulerTag::Trace(Box::new(ft.clone()))));
    }
    Ok(Front::from_elems(f.m - l, f.n - l, elems, cfg))
}

/// The front interpretation of the category operations, used by the
/// bidirectional composites so the evaluator, the flattener, and witness
/// reconstruction all agree on composite shape.
struct FrontAlgebra {
    cfg: EvalConfig,
}

impl Tsmc for FrontAlgebra {
    type Arrow = Front;
    type Error = SemError;

    fn seq(&mut self, a: &Front, b: &Front) -> Result<Front, SemError> {
        seq_sem(a, b, &self.cfg)
    }

    fn sum(&mut self, a: &Front, b: &Front) -> Result<Front, SemError> {
        sum_sem(a, b, &self.cfg)
    }

    fn trace(&mut self, l: usize, a: &Front) -> Result<Front, SemError> {
        trace_sem(l, a, &self.cfg)
    }

    fn identity(&mut self, m: usize) -> Front {
        Front {
            m,
            n: m,
            elems: alloc::vec![(McArrow::identity(m), wire_tag(&format!("id[{m}]")))],
        }
    }

    fn swap(&mut self, m: usize, n: usize) -> Front {
        Front {
            m: m + n,
            n: n + m,
            elems: alloc::vec![(McArrow::swap(m, n), wire_tag(&format!("swap[{m},{n}]")))],
        }
    }
}

/// The structural interpretation used to pre-expand bidirectional nodes:
/// arrows are diagram expressions read at body arities.
struct ExprAlgebra;

impl Tsmc for ExprAlgebra {
    type Arrow = DiagramExpr;
    type Error = AlgebraError;

    fn seq(&mut self, a: &DiagramExpr, b: &DiagramExpr) -> Result<DiagramExpr, AlgebraError> {
        Ok(DiagramExpr::seq(a.clone(), b.clone()))
    }

    fn sum(&mut self, a: &DiagramExpr, b: &DiagramExpr) -> Result<DiagramExpr, AlgebraError> {
        Ok(DiagramExpr::sum(a.clone(), b.clone()))
    }

    fn trace(&mut self, l: usize, a: &DiagramExpr) -> Result<DiagramExpr, AlgebraError> {
        Ok(DiagramExpr::trace(l, a.clone()))
    }

    fn identity(&mut self, m: usize) -> DiagramExpr {
        DiagramExpr::Wire(WireSpec::Identity(m))
    }

    fn swap(&mut self, m: usize, n: usize) -> DiagramExpr {
        DiagramExpr::Wire(WireSpec::Swap(m, n))
    }
}

/// Rewrites a diagram so every composition node is rightward: bidirectional
/// `;` and `(+)` become the wire-rearranged composites, unit and counit
/// wires become identities, and all nodes are read at body arities. The
/// result evaluates to the same flattened model and the same semantics, and
/// its shape matches the tags produced during evaluation.
pub fn normalize(expr: &DiagramExpr, env: &Bindings) -> Result<DiagramExpr, AlgebraError> {
    match expr {
        DiagramExpr::Prim(_) | DiagramExpr::Var(_) => Ok(expr.clone()),
        DiagramExpr::Wire(w) => match w {
            WireSpec::Identity(_) | WireSpec::Swap(_, _) => Ok(expr.clone()),
            WireSpec::Unit(ar) | WireSpec::Counit(ar) => {
                Ok(DiagramExpr::Wire(WireSpec::Identity(ar.right + ar.left)))
            }
        },
        DiagramExpr::Seq(a, b) => {
            let (ad, ac) = crate::expr::arity_of(a, env)?;
            let (bd, bc) = crate::expr::arity_of(b, env)?;
            let na = normalize(a, env)?;
            let nb = normalize(b, env)?;
            compose_seq(&mut ExprAlgebra, &na, (ad, ac), &nb, (bd, bc))
        }
        DiagramExpr::Sum(a, b) => {
            let (ad, ac) = crate::expr::arity_of(a, env)?;
            let (bd, bc) = crate::expr::arity_of(b, env)?;
            let na = normalize(a, env)?;
            let nb = normalize(b, env)?;
            compose_sum(&mut ExprAlgebra, &na, (ad, ac), &nb, (bd, bc))
        }
        DiagramExpr::Trace(l, a) => {
            let (ad, ac) = crate::expr::arity_of(a, env)?;
            if !ad.is_rightward() || !ac.is_rightward() {
                return Err(AlgebraError::ArityMismatch(format!(
                    "tr[{l}] needs a rightward operand, found {ad} -> {ac}"
                )));
            }
            if ad.right < *l || ac.right < *l {
                return Err(AlgebraError::ArityMismatch(format!(
                    "tr[{l}] needs arity at least {l}+m -> {l}+n, found {ad} -> {ac}"
                )));
            }
            Ok(DiagramExpr::trace(*l, normalize(a, env)?))
        }
        DiagramExpr::Freeze(a) => Ok(DiagramExpr::freeze(normalize(a, env)?)),
    }
}

/// Counters and sizes gathered during one evaluation.
#[derive(Clone, Debug, Default)]
pub struct EvalStats {
    pub component_solves: u64,
    pub cache_hits: u64,
    pub front_sizes: BTreeMap<String, usize>,
}

/// Evaluates diagrams to fronts with per-binding memoization.
pub struct Evaluator<'e> {
    pub cfg: EvalConfig,
    env: &'e Bindings,
    memo: BTreeMap<(String, u64), Front>,
    pub stats: EvalStats,
}

impl<'e> Evaluator<'e> {
    pub fn new(env: &'e Bindings, cfg: EvalConfig) -> Self {
        Evaluator { cfg, env, memo: BTreeMap::new(), stats: EvalStats::default() }
    }

    pub fn env(&self) -> &'e Bindings {
        self.env
    }

    /// Solves a diagram: normalizes away bidirectional composition, then
    /// evaluates bottom-up.
    pub fn solve(&mut self, expr: &DiagramExpr) -> Result<Front, SemError> {
        let n = normalize(expr, self.env)?;
        self.eval(&n, "")
    }

    fn record(&mut self, path: &str, front: &Front) {
        let key = if path.is_empty() { String::from("<root>") } else { String::from(path) };
        self.stats.front_sizes.insert(key, front.len());
    }

    fn eval(&mut self, expr: &DiagramExpr, path: &str) -> Result<Front, SemError> {
        let front = match expr {
            DiagramExpr::Prim(p) => {
                self.stats.component_solves += 1;
                lift_romdp(p.model.body(), &p.id, &self.cfg)?
            }
            DiagramExpr::Var(name) => {
                let key = (name.clone(), self.cfg.fingerprint());
                if self.cfg.memoization {
                    if let Some(hit) = self.memo.get(&key) {
                        self.stats.cache_hits += 1;
                        let front = hit.clone();
                        self.record(path, &front);
                        return Ok(front);
                    }
                }
                let bound = self
                    .env
                    .get(name)
                    .ok_or(SemError::Algebra(AlgebraError::UnboundName(name.clone())))?
                    .clone();
                let nb = normalize(&bound, self.env)?;
                let front = self.eval(&nb, name)?;
                if self.cfg.memoization {
                    self.memo.insert(key, front.clone());
                }
                front
            }
            DiagramExpr::Seq(a, b) => {
                let fa = self.eval(a, &format!("{path}.;L"))?;
                let fb = self.eval(b, &format!("{path}.;R"))?;
                seq_sem(&fa, &fb, &self.cfg)?
            }
            DiagramExpr::Sum(a, b) => {
                let fa = self.eval(a, &format!("{path}.+L"))?;
                let fb = self.eval(b, &format!("{path}.+R"))?;
                sum_sem(&fa, &fb, &self.cfg)?
            }
            DiagramExpr::Trace(l, a) => {
                let fa = self.eval(a, &format!("{path}.tr"))?;
                trace_sem(*l, &fa, &self.cfg)?
            }
            DiagramExpr::Freeze(a) => {
                self.stats.component_solves += 1;
                let flat = flatten(a, self.env).map_err(SemError::Algebra)?;
                let id = if path.is_empty() { String::from("<frozen>") } else { format!("{path}.fz") };
                let (arrow, tau) = solve_frozen(&flat)?;
                Front {
                    m: flat.body().entrances(),
                    n: 1,
                    elems: alloc::vec![(
                        arrow,
                        SchedulerTag::Frozen { component: id, scheduler: tau },
                    )],
                }
            }
            DiagramExpr::Wire(w) => {
                let mut alg = FrontAlgebra { cfg: self.cfg.clone() };
                match *w {
                    WireSpec::Identity(m) => alg.identity(m),
                    WireSpec::Swap(m, n) => alg.swap(m, n),
                    WireSpec::Unit(ar) | WireSpec::Counit(ar) => {
                        alg.identity(ar.right + ar.left)
                    }
                }
            }
        };
        self.record(path, &front);
        Ok(front)
    }
}

/// Solves a frozen block monolithically: value iteration maximizes the
/// expected reward to the unique exit (reachability breaking ties), the
/// greedy policy is extracted, and the induced chain is solved exactly, so
/// the reported numbers are exact for the reported scheduler.
pub fn solve_frozen(flat: &OpenMdp) -> Result<(McArrow, Scheduler), SemError> {
    let body = flat.body();
    if body.exits() != 1 {
        return Err(SemError::FrozenMultiExit { exits: body.exits() });
    }
    let positions: Vec<&String> = body.positions().iter().collect();
    let index: BTreeMap<&String, usize> = positions.iter().enumerate().map(|(i, q)| (*q, i)).collect();
    let nq = positions.len();
    let mut x = alloc::vec![0.0f64; nq];
    let mut y = alloc::vec![0.0f64; nq];
    let mut sorted_actions: Vec<&String> = body.actions().iter().collect();
    sorted_actions.sort();
    let eval_action = |q: &String, act: &String, x: &[f64], y: &[f64]| -> Option<(f64, f64)> {
        let row = body.row(q, act)?;
        let mut xa = 0.0;
        let mut ya = 0.0;
        for (t, p) in row {
            match t {
                Target::Exit(_) => xa += p,
                Target::Position(q2) => {
                    let k = index[q2];
                    xa += p * x[k];
                    ya += p * y[k];
                }
            }
        }
        ya += body.reward(q) * xa;
        Some((xa, ya))
    };
    const REL_TOL: f64 = 1e-10;
    const MAX_SWEEPS: usize = 1_000_000;
    for _ in 0..MAX_SWEEPS {
        let mut delta = 0.0f64;
        let mut nx = x.clone();
        let mut ny = y.clone();
        for (k, q) in positions.iter().enumerate() {
            let mut best: Option<(f64, f64)> = None;
            for act in &sorted_actions {
                if let Some((xa, ya)) = eval_action(q, act, &x, &y) {
                    let better = match best {
                        None => true,
                        Some((bx, by)) => ya > by || (ya == by && xa > bx),
                    };
                    if better {
                        best = Some((xa, ya));
                    }
                }
            }
            let (xa, ya) = best.unwrap_or((0.0, 0.0));
            let scale_x = if fabs(x[k]) > 1.0 { fabs(x[k]) } else { 1.0 };
            let scale_y = if fabs(y[k]) > 1.0 { fabs(y[k]) } else { 1.0 };
            let dx = fabs(xa - x[k]) / scale_x;
            let dy = fabs(ya - y[k]) / scale_y;
            if dx > delta {
                delta = dx;
            }
            if dy > delta {
                delta = dy;
            }
            nx[k] = xa;
            ny[k] = ya;
        }
        x = nx;
        y = ny;
        if delta <= REL_TOL {
            break;
        }
    }
    let mut tau = Scheduler::new();
    for q in &positions {
        let mut best: Option<(f64, f64, &String)> = None;
        for act in &sorted_actions {
            if let Some((xa, ya)) = eval_action(q, act, &x, &y) {
                let better = match best {
                    None => true,
                    Some((bx, by, _)) => ya > by || (ya == by && xa > bx),
                };
                if better {
                    best = Some((xa, ya, act));
                }
            }
        }
        let act = match best {
            Some((_, _, a)) => a,
            None => &sorted_actions[0],
        };
        tau.assign(*q, act);
    }
    let mc = body
        .induced_mc(&tau)
        .map_err(|e| SemError::TagShape(format!("{e:?}")))?;
    let arrow = solve_component_mc(&mc)?;
    Ok((arrow, tau))
}

/// The optimal behavior at (entrance i, exit j): maximal expected reward,
/// ties broken by reachability probability, then by smallest tag.
pub fn extract_optimal(
    f: &Front,
    i: usize,
    j: usize,
) -> Result<(f64, f64, &SchedulerTag), SemError> {
    if f.is_empty() {
        return Err(SemError::EmptyFront);
    }
    let mut best: Option<(f64, f64, &SchedulerTag)> = None;
    for (arrow, tag) in &f.elems {
        let p = arrow.p(i, j);
        let r = arrow.r(i, j);
        let better = match best {
            None => true,
            Some((bp, br, bt)) => {
                r > br || (r == br && p > bp) || (r == br && p == bp && tag < bt)
            }
        };
        if better {
            best = Some((p, r, tag));
        }
    }
    let (p, r, tag) = best.expect("front is nonempty");
    Ok((p, r, tag))
}

/// Rebuilds a memoryless scheduler over the flattened position names from a
/// tag tree, by walking the normalized diagram and the tag in lockstep with
/// the same name prefixes the flattener applies.
pub fn witness(
    expr: &DiagramExpr,
    env: &Bindings,
    tag: &SchedulerTag,
) -> Result<Scheduler, SemError> {
    let n = normalize(expr, env)?;
    let mut out = Scheduler::new();
    collect(&n, env, tag, "", &mut out)?;
    Ok(out)
}

fn collect(
    expr: &DiagramExpr,
    env: &Bindings,
    tag: &SchedulerTag,
    prefix: &str,
    out: &mut Scheduler,
) -> Result<(), SemError> {
    match (expr, tag) {
        (DiagramExpr::Prim(p), SchedulerTag::Leaf { scheduler, .. }) => {
            for q in p.model.body().positions() {
                match scheduler.choice(q) {
                    Some(a) => out.assign(&format!("{prefix}{q}"), a),
                    None => {
                        return Err(SemError::TagShape(format!(
                            "leaf scheduler misses position {q}"
                        )))
                    }
                }
            }
            Ok(())
        }
        (DiagramExpr::Wire(_), SchedulerTag::Leaf { .. }) => Ok(()),
        (DiagramExpr::Var(name), _) => {
            let bound = env
                .get(name)
                .ok_or(SemError::Algebra(AlgebraError::UnboundName(name.clone())))?;
            let nb = normalize(bound, env).map_err(SemError::Algebra)?;
            collect(&nb, env, tag, prefix, out)
        }
        (DiagramExpr::Seq(a, b), SchedulerTag::Seq(ta, tb)) => {
            collect(a, env, ta, &format!("{prefix}L/"), out)?;
            collect(b, env, tb, &format!("{prefix}R/"), out)
        }
        (DiagramExpr::Sum(a, b), SchedulerTag::Sum(ta, tb)) => {
            collect(a, env, ta, &format!("{prefix}L/"), out)?;
            collect(b, env, tb, &format!("{prefix}R/"), out)
        }
        (DiagramExpr::Trace(_, a), SchedulerTag::Trace(ta)) => collect(a, env, ta, prefix, out),
        (DiagramExpr::Freeze(a), SchedulerTag::Frozen { scheduler, .. }) => {
            let flat = flatten(a, env).map_err(SemError::Algebra)?;
            for q in flat.body().positions() {
                match scheduler.choice(q) {
                    Some(act) => out.assign(&format!("{prefix}{q}"), act),
                    None => {
                        return Err(SemError::TagShape(format!(
                            "frozen scheduler misses position {q}"
                        )))
                    }
                }
            }
            Ok(())
        }
        (e, t) => Err(SemError::TagShape(format!(
            "node {} paired with tag {}",
            node_kind(e),
            tag_kind(t)
        ))),
    }
}

fn node_kind(e: &DiagramExpr) -> &'static str {
    match e {
        DiagramExpr::Prim(_) => "prim",
        DiagramExpr::Var(_) => "var",
        DiagramExpr::Seq(_, _) => ";",
        DiagramExpr::Sum(_, _) => "(+)",
        DiagramExpr::Trace(_, _) => "tr",
        DiagramExpr::Freeze(_) => "freeze",
        DiagramExpr::Wire(_) => "wire",
    }
}

fn tag_kind(t: &SchedulerTag) -> &'static str {
    match t {
        SchedulerTag::Leaf { .. } => "leaf",
        SchedulerTag::Seq(_, _) => "seq",
        SchedulerTag::Sum(_, _) => "sum",
        SchedulerTag::Trace(_) => "trace",
        SchedulerTag::Frozen { .. } => "frozen",
    }
}

/// Convenience: solve and extract in one call, also returning the flat
/// scheduler witness.
pub fn solve_query(
    expr: &DiagramExpr,
    env: &Bindings,
    cfg: EvalConfig,
    entrance: usize,
    exit: usize,
) -> Result<(f64, f64, Scheduler, EvalStats), SemError> {
    let mut ev = Evaluator::new(env, cfg);
    let front = ev.solve(expr)?;
    let (p, r, tag) = extract_optimal(&front, entrance, exit)?;
    let tau = witness(expr, env, tag)?;
    Ok((p, r, tau, ev.stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Row;
    use alloc::vec;

    fn acts(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    fn pos(q: &str) -> Target {
        Target::Position(q.to_string())
    }

    /// One position with two actions: sure exit vs a rewarded loop.
    fn two_action_cell() -> RoMdp {
        let mut trans = BTreeMap::new();
        trans.insert(
            ("q".to_string(), "alpha".to_string()),
            Row::from_iter([(Target::Exit(1), 1.0)]),
        );
        trans.insert(
            ("q".to_string(), "beta".to_string()),
            Row::from_iter([(pos("q"), 0.5), (Target::Exit(1), 0.5)]),
        );
        RoMdp::new(
            1,
            1,
            acts(&["alpha", "beta"]),
            vec!["q".to_string()],
            [("q".to_string(), 1.0)].into_iter().collect(),
            vec![pos("q")],
            trans,
        )
    }

    /// One position, two actions leading to different exits.
    fn fork_cell() -> RoMdp {
        let mut trans = BTreeMap::new();
        trans.insert(
            ("q".to_string(), "a".to_string()),
            Row::from_iter([(Target::Exit(1), 1.0)]),
        );
        trans.insert(
            ("q".to_string(), "b".to_string()),
            Row::from_iter([(Target::Exit(2), 1.0)]),
        );
        RoMdp::new(
            1,
            2,
            acts(&["a", "b"]),
            vec!["q".to_string()],
            [("q".to_string(), 0.0)].into_iter().collect(),
            vec![pos("q")],
            trans,
        )
    }

    fn task() -> RoMdp {
        let mut trans = BTreeMap::new();
        trans.insert(
            ("t".to_string(), "a".to_string()),
            Row::from_iter([(pos("t"), 0.2), (Target::Exit(1), 0.8)]),
        );
        RoMdp::new(
            1,
            1,
            acts(&["a"]),
            vec!["t".to_string()],
            [("t".to_string(), 4.0)].into_iter().collect(),
            vec![pos("t")],
            trans,
        )
    }

    #[test]
    fn lift_singleton_for_single_action() {
        let f = lift_romdp(&task(), "T", &EvalConfig::default()).unwrap();
        assert_eq!(f.len(), 1);
        let (a, _) = &f.elements()[0];
        assert!(fabs(a.p(1, 1) - 1.0) < 1e-12);
        assert!(fabs(a.r(1, 1) - 5.0) < 1e-12);
    }

    #[test]
    fn lift_prunes_dominated_scheduler() {
        // alpha gives (1, 1); beta gives p=1, r = 2 by the geometric series,
        // so alpha is subsumed.
        let f = lift_romdp(&two_action_cell(), "C", &EvalConfig::default()).unwrap();
        assert_eq!(f.len(), 1);
        let (a, tag) = &f.elements()[0];
        assert!(fabs(a.p(1, 1) - 1.0) < 1e-12);
        assert!(fabs(a.r(1, 1) - 2.0) < 1e-12);
        match tag {
            SchedulerTag::Leaf { scheduler, .. } => {
                assert_eq!(scheduler.choice("q"), Some("beta"));
            }
            other => panic!("unexpected tag {other:?}"),
        }
    }

    #[test]
    fn lift_keeps_incomparable_elements() {
        let f = lift_romdp(&fork_cell(), "F", &EvalConfig::default()).unwrap();
        assert_eq!(f.len(), 2);
    }

    #[test]
    fn lift_explodes_over_cap() {
        let cfg = EvalConfig { max_schedulers_per_component: 1, ..EvalConfig::default() };
        let err = lift_romdp(&two_action_cell(), "C", &cfg).unwrap_err();
        assert_eq!(err, SemError::SchedulerExplosion { count: 2, cap: 1 });
    }

    #[test]
    fn prune_keeps_smallest_tag_on_duplicates() {
        let a = McArrow::identity(1);
        let t1 = wire_tag("a");
        let t2 = wire_tag("b");
        let kept = prune(vec![(a.clone(), t2), (a.clone(), t1.clone())], 0.0);
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].1, t1);
    }

    #[test]
    fn memo_contract_var_vs_aliases() {
        let t = OpenMdp::from_rightward(task());
        let mut env = Bindings::new();
        env.define("T", DiagramExpr::prim("T", t.clone()));
        let expr = DiagramExpr::seq(DiagramExpr::var("T"), DiagramExpr::var("T"));
        let mut ev = Evaluator::new(&env, EvalConfig::default());
        let f = ev.solve(&expr).unwrap();
        assert_eq!(f.len(), 1);
        assert_eq!(ev.stats.component_solves, 1);
        assert_eq!(ev.stats.cache_hits, 1);

        let mut env2 = Bindings::new();
        env2.define("T1", DiagramExpr::prim("T1", t.clone()));
        env2.define("T2", DiagramExpr::prim("T2", t));
        let expr2 = DiagramExpr::seq(DiagramExpr::var("T1"), DiagramExpr::var("T2"));
        let mut ev2 = Evaluator::new(&env2, EvalConfig::default());
        let f2 = ev2.solve(&expr2).unwrap();
        assert_eq!(ev2.stats.component_solves, 2);
        assert_eq!(ev2.stats.cache_hits, 0);
        assert!(f.approx_same_matrices(&f2, 1e-12));
    }

    #[test]
    fn solve_seq_matches_composed_values() {
        let t = OpenMdp::from_rightward(task());
        let env = Bindings::new();
        let expr = DiagramExpr::seq(
            DiagramExpr::prim("T", t.clone()),
            DiagramExpr::prim("T", t),
        );
        let mut ev = Evaluator::new(&env, EvalConfig::default());
        let f = ev.solve(&expr).unwrap();
        let (p, r, _) = extract_optimal(&f, 1, 1).unwrap();
        assert!(fabs(p - 1.0) < 1e-12);
        assert!(fabs(r - 10.0) < 1e-12);
    }

    #[test]
    fn freeze_matches_unfrozen_on_unique_exit() {
        let c = OpenMdp::from_rightward(two_action_cell());
        let env = Bindings::new();
        let sub = DiagramExpr::seq(
            DiagramExpr::prim("C", c.clone()),
            DiagramExpr::prim("C", c.clone()),
        );
        let mut ev = Evaluator::new(&env, EvalConfig::default());
        let unfrozen = ev.solve(&sub).unwrap();
        let (p0, r0, _) = extract_optimal(&unfrozen, 1, 1).unwrap();
        let frozen = ev.solve(&DiagramExpr::freeze(sub)).unwrap();
        let (p1, r1, _) = extract_optimal(&frozen, 1, 1).unwrap();
        assert!(fabs(p0 - p1) < 1e-9);
        assert!(fabs(r0 - r1) < 1e-9);
    }

    #[test]
    fn freeze_rejects_multi_exit() {
        let f = OpenMdp::from_rightward(fork_cell());
        let env = Bindings::new();
        let mut ev = Evaluator::new(&env, EvalConfig::default());
        let err = ev
            .solve(&DiagramExpr::freeze(DiagramExpr::prim("F", f)))
            .unwrap_err();
        assert_eq!(err, SemError::FrozenMultiExit { exits: 2 });
    }

    #[test]
    fn witness_reproduces_reported_value() {
        let c = OpenMdp::from_rightward(two_action_cell());
        let env = Bindings::new();
        let expr = DiagramExpr::seq(
            DiagramExpr::prim("C", c.clone()),
            DiagramExpr::prim("C", c),
        );
        let (p, r, tau, _) =
            solve_query(&expr, &env, EvalConfig::default(), 1, 1).unwrap();
        let flat = flatten(&expr, &env).unwrap();
        let mc = flat.body().induced_mc(&tau).unwrap();
        let a = solve_component_mc(&mc).unwrap();
        assert!(fabs(a.p(1, 1) - p) < 1e-9);
        assert!(fabs(a.r(1, 1) - r) < 1e-9);
    }

    #[test]
    fn pruning_off_preserves_optimum() {
        let c = OpenMdp::from_rightward(two_action_cell());
        let env = Bindings::new();
        let expr = DiagramExpr::seq(
            DiagramExpr::prim("C", c.clone()),
            DiagramExpr::prim("C", c),
        );
        let mut on = Evaluator::new(&env, EvalConfig::default());
        let f_on = on.solve(&expr).unwrap();
        let cfg_off = EvalConfig { pruning: false, ..EvalConfig::default() };
        let mut off = Evaluator::new(&env, cfg_off);
        let f_off = off.solve(&expr).unwrap();
        assert!(f_off.len() >= f_on.len());
        let (p1, r1, _) = extract_optimal(&f_on, 1, 1).unwrap();
        let (p2, r2, _) = extract_optimal(&f_off, 1, 1).unwrap();
        assert!(fabs(p1 - p2) < 1e-12);
        assert!(fabs(r1 - r2) < 1e-12);
    }

    #[test]
    fn bidirectional_roundtrip_solves() {
        // A loop built from bidirectional composition: C read as
        // (0,1)->(0,1) composed with the identity, solved end to end.
        let body = two_action_cell();
        let o = crate::algebra::twist_to_o(
            body,
            crate::model::Arity::new(0, 1),
            crate::model::Arity::new(0, 1),
        )
        .unwrap();
        let env = Bindings::new();
        let id = DiagramExpr::prim(
            "W",
            crate::algebra::twist_to_o(
                crate::algebra::identity_wire(1, &acts(&["alpha", "beta"])),
                crate::model::Arity::new(0, 1),
                crate::model::Arity::new(0, 1),
            )
            .unwrap(),
        );
        let expr = DiagramExpr::seq(DiagramExpr::prim("C", o.clone()), id);
        let mut ev = Evaluator::new(&env, EvalConfig::default());
        let f = ev.solve(&expr).unwrap();
        let direct = lift_romdp(o.body(), "C", &EvalConfig::default()).unwrap();
        assert!(f.approx_same_matrices(&direct, 1e-9));
        // The witness over the composite names covers the one position.
        let (_, _, tag) = extract_optimal(&f, 1, 1).unwrap();
        let tau = witness(&expr, &env, tag).unwrap();
        let flat = flatten(&expr, &env).unwrap();
        for q in flat.body().positions() {
            assert!(tau.choice(q).is_some(), "missing choice for {q}");
        }
    }
}
