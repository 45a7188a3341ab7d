//! Open MDP model types and validation.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

/// Absolute tolerance for per-(position, action) probability row sums.
pub const ROW_SUM_TOL: f64 = 1e-12;

fn fabs(x: f64) -> f64 {
    f64::from_bits(x.to_bits() & !(1u64 << 63))
}

/// A transition or entry target: an internal position or a 1-based exit port.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Target {
    Position(String),
    Exit(usize),
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Target::Position(q) => write!(f, "{q}"),
            Target::Exit(j) => write!(f, "exit {j}"),
        }
    }
}

/// Bidirectional port counts on one boundary of an open MDP.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Arity {
    /// Rightward wires (left to right flow).
    pub right: usize,
    /// Leftward wires (right to left flow).
    pub left: usize,
}

impl Arity {
    pub const fn new(right: usize, left: usize) -> Self {
        Arity { right, left }
    }

    /// Purely rightward arity, as used by right-oriented models.
    pub const fn rightward(n: usize) -> Self {
        Arity { right: n, left: 0 }
    }

    pub const fn is_rightward(&self) -> bool {
        self.left == 0
    }
}

impl fmt::Display for Arity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.left == 0 {
            write!(f, "{}", self.right)
        } else {
            write!(f, "({}, {})", self.right, self.left)
        }
    }
}

/// A probability row: target -> probability, zero entries omitted.
pub type Row = BTreeMap<Target, f64>;

/// A right-oriented open MDP: every entrance on the left, every exit on the
/// right. Entrances and exits are 1-based port indices.
///
/// Invariants (checked by [`RoMdp::validate`]):
/// * action and position names are unique, the action set is nonempty;
/// * every row sums to exactly 0 or exactly 1 (within [`ROW_SUM_TOL`]);
/// * rewards are nonnegative and finite;
/// * each exit has a unique access: at most one entrance or one
///   (position, action) pair carries probability into it.
#[derive(Clone, Debug, PartialEq)]
pub struct RoMdp {
    entrances: usize,
    exits: usize,
    actions: Vec<String>,
    positions: Vec<String>,
    rewards: BTreeMap<String, f64>,
    entry: Vec<Target>,
    trans: BTreeMap<(String, String), Row>,
}

impl RoMdp {
    /// Builds a model without validating it; call [`RoMdp::validate`] to
    /// check the invariants. `entry` must have one target per entrance and
    /// `rewards` one value per position.
    pub fn new(
        entrances: usize,
        exits: usize,
        actions: Vec<String>,
        positions: Vec<String>,
        rewards: BTreeMap<String, f64>,
        entry: Vec<Target>,
        trans: BTreeMap<(String, String), Row>,
    ) -> Self {
        RoMdp { entrances, exits, actions, positions, rewards, entry, trans }
    }

    /// A model with no positions whose entry function is `entry`.
    pub fn wire(entrances: usize, exits: usize, actions: Vec<String>, entry: Vec<Target>) -> Self {
        RoMdp {
            entrances,
            exits,
            actions,
            positions: Vec::new(),
            rewards: BTreeMap::new(),
            entry,
            trans: BTreeMap::new(),
        }
    }

    pub fn entrances(&self) -> usize {
        self.entrances
    }

    pub fn exits(&self) -> usize {
        self.exits
    }

    pub fn actions(&self) -> &[String] {
        &self.actions
    }

    pub fn positions(&self) -> &[String] {
        &self.positions
    }

    pub fn reward(&self, position: &str) -> f64 {
        self.rewards.get(position).copied().unwrap_or(0.0)
    }

    /// Entry target of the 1-based entrance `i`.
    pub fn entry(&self, i: usize) -> &Target {
        &self.entry[i - 1]
    }

    pub fn entry_targets(&self) -> &[Target] {
        &self.entry
    }

    /// The row of `position` under `action`; absent rows are all-zero.
    pub fn row(&self, position: &str, action: &str) -> Option<&Row> {
        self.trans.get(&(position.to_string(), action.to_string()))
    }

    pub fn rows(&self) -> impl Iterator<Item = (&(String, String), &Row)> {
        self.trans.iter()
    }

    fn row_sum(row: &Row) -> f64 {
        row.values().sum()
    }

    /// Checks all structural invariants and returns a report of violations.
    pub fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport::default();
        if self.actions.is_empty() {
            report.push("action set is empty");
        }
        let mut seen = BTreeSet::new();
        for a in &self.actions {
            if !seen.insert(a.clone()) {
                report.push(format!("duplicate action {a}"));
            }
        }
        let mut pos_set = BTreeSet::new();
        for q in &self.positions {
            if !pos_set.insert(q.clone()) {
                report.push(format!("duplicate position {q}"));
            }
        }
        for q in &self.positions {
            match self.rewards.get(q) {
                None => report.push(format!("position {q} has no reward")),
                Some(r) if !r.is_finite() || *r < 0.0 => {
                    report.push(format!("position {q} has invalid reward {r}"))
                }
                _ => {}
            }
        }
        for q in self.rewards.keys() {
            if !pos_set.contains(q) {
                report.push(format!("reward given for unknown position {q}"));
            }
        }
        if self.entry.len() != self.entrances {
            report.push(format!(
                "entry function covers {} of {} entrances",
                self.entry.len(),
                self.entrances
            ));
        }
        for (i, t) in self.entry.iter().enumerate() {
            match t {
                Target::Position(q) if !pos_set.contains(q) => {
                    report.push(format!("entrance {} enters unknown position {q}", i + 1))
                }
                Target::Exit(j) if *j < 1 || *j > self.exits => {
                    report.push(format!("entrance {} exits through unknown port {j}", i + 1))
                }
                _ => {}
            }
        }
        let action_set: BTreeSet<&String> = self.actions.iter().collect();
        for ((q, a), row) in &self.trans {
            if !pos_set.contains(q) {
                report.push(format!("transition from unknown position {q}"));
            }
            if !action_set.contains(a) {
                report.push(format!("transition from {q} under unknown action {a}"));
            }
            for (t, p) in row {
                if !p.is_finite() || *p < 0.0 {
                    report.push(format!("P({q}, {a}, {t}) = {p} is not a probability"));
                }
                match t {
                    Target::Position(q2) if !pos_set.contains(q2) => {
                        report.push(format!("P({q}, {a}, {q2}) targets an unknown position"))
                    }
                    Target::Exit(j) if *j < 1 || *j > self.exits => {
                        report.push(format!("P({q}, {a}, exit {j}) targets an unknown exit"))
                    }
                    _ => {}
                }
            }
            let sum = Self::row_sum(row);
            if fabs(sum) > ROW_SUM_TOL && fabs(sum - 1.0) > ROW_SUM_TOL {
                report.push(format!("row sum of ({q}, {a}) is {sum}, expected 0 or 1"));
            }
        }
        self.check_unique_exit(&mut report);
        report
    }

    /// Exit accessors: for each exit, the entrances and (position, action)
    /// pairs that carry probability into it.
    fn exit_accessors(&self) -> BTreeMap<usize, Vec<Accessor>> {
        let mut acc: BTreeMap<usize, Vec<Accessor>> = BTreeMap::new();
        for (i, t) in self.entry.iter().enumerate() {
            if let Target::Exit(j) = t {
                acc.entry(*j).or_default().push(Accessor::Entrance(i + 1));
            }
        }
        for ((q, a), row) in &self.trans {
            for (t, p) in row {
                if let (Target::Exit(j), true) = (t, *p > 0.0) {
                    acc.entry(*j).or_default().push(Accessor::Step(q.clone(), a.clone()));
                }
            }
        }
        acc
    }

    fn check_unique_exit(&self, report: &mut ValidationReport) {
        for (j, accessors) in self.exit_accessors() {
            let mut sources: BTreeSet<String> = BTreeSet::new();
            let mut step_actions: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
            for acc in &accessors {
                match acc {
                    Accessor::Entrance(i) => {
                        sources.insert(format!("entrance {i}"));
                    }
                    Accessor::Step(q, a) => {
                        sources.insert(format!("position {q}"));
                        step_actions.entry(q.clone()).or_default().insert(a.clone());
                    }
                }
            }
            if sources.len() > 1 {
                let list: Vec<String> = sources.into_iter().collect();
                report.push(format!("exit {j} is accessed from {}", list.join(" and ")));
            } else {
                for (q, acts) in step_actions {
                    if acts.len() > 1 {
                        let list: Vec<String> = acts.into_iter().collect();
                        report.push(format!(
                            "exit {j} is accessed from {q} under actions {}",
                            list.join(" and ")
                        ));
                    }
                }
            }
        }
    }

    /// Restores the unique-exit invariant by inserting a zero-reward access
    /// position in front of every exit with more than one accessor. All
    /// probability into such an exit is redirected through the new position,
    /// which forwards to the exit with probability 1 under the first action.
    /// Reachability and expected reward per entrance/exit are unchanged.
    pub fn normalize_exits(&self) -> RoMdp {
        let shared: BTreeSet<usize> = self
            .exit_accessors()
            .into_iter()
            .filter(|(_, acc)| {
                let mut sources = BTreeSet::new();
                for a in acc {
                    match a {
                        Accessor::Entrance(i) => sources.insert(format!("e{i}")),
                        Accessor::Step(q, act) => sources.insert(format!("q{q}/{act}")),
                    };
                }
                sources.len() > 1
            })
            .map(|(j, _)| j)
            .collect();
        if shared.is_empty() {
            return self.clone();
        }
        let mut out = self.clone();
        fn access_name(taken: &[String], j: usize) -> String {
            let mut name = format!("access_exit_{j}");
            while taken.iter().any(|q| *q == name) {
                name.push('_');
            }
            name
        }
        let default_action = self.actions[0].clone();
        for j in shared {
            let q_acc = access_name(&out.positions, j);
            for t in out.entry.iter_mut() {
                if *t == Target::Exit(j) {
                    *t = Target::Position(q_acc.clone());
                }
            }
            for row in out.trans.values_mut() {
                if let Some(p) = row.remove(&Target::Exit(j)) {
                    *row.entry(Target::Position(q_acc.clone())).or_insert(0.0) += p;
                }
            }
            out.positions.push(q_acc.clone());
            out.rewards.insert(q_acc.clone(), 0.0);
            let mut fwd = Row::new();
            fwd.insert(Target::Exit(j), 1.0);
            out.trans.insert((q_acc, default_action.clone()), fwd);
        }
        out
    }

    /// The Markov chain induced by a memoryless scheduler: every position
    /// keeps only the row of its chosen action. The scheduler must cover
    /// every position with a declared action.
    pub fn induced_mc(&self, scheduler: &Scheduler) -> Result<RoMc, SchedulerError> {
        let action_set: BTreeSet<&String> = self.actions.iter().collect();
        let mut trans = BTreeMap::new();
        for q in &self.positions {
            let a = scheduler
                .choice(q)
                .ok_or_else(|| SchedulerError::Unassigned(q.clone()))?;
            if !action_set.contains(&a.to_string()) {
                return Err(SchedulerError::UnknownAction(q.clone(), a.to_string()));
            }
            if let Some(row) = self.row(q, a) {
                trans.insert((q.clone(), STAR.to_string()), row.clone());
            }
        }
        Ok(RoMc(RoMdp {
            entrances: self.entrances,
            exits: self.exits,
            actions: alloc::vec![STAR.to_string()],
            positions: self.positions.clone(),
            rewards: self.rewards.clone(),
            entry: self.entry.clone(),
            trans,
        }))
    }

    /// Tests isomorphism: a reward- and transition-preserving bijection of
    /// positions that commutes with entries and is the identity on ports.
    /// Backtracking over candidate pairings with exact equality of numbers.
    pub fn isomorphic(&self, other: &RoMdp) -> bool {
        if self.entrances != other.entrances
            || self.exits != other.exits
            || self.actions != other.actions
            || self.positions.len() != other.positions.len()
        {
            return false;
        }
        // Candidate images must match on reward and per-action row shape.
        let sig = |m: &RoMdp, q: &String| -> (u64, Vec<(String, usize, u64)>) {
            let mut rows = Vec::new();
            for a in &m.actions {
                if let Some(row) = m.row(q, a) {
                    let sum: f64 = row.values().sum();
                    rows.push((a.clone(), row.len(), sum.to_bits()));
                }
            }
            (m.reward(q).to_bits(), rows)
        };
        let mut candidates: Vec<Vec<usize>> = Vec::new();
        for q in &self.positions {
            let s = sig(self, q);
            let mut cands = Vec::new();
            for (k, q2) in other.positions.iter().enumerate() {
                if sig(other, q2) == s {
                    cands.push(k);
                }
            }
            if cands.is_empty() {
                return false;
            }
            candidates.push(cands);
        }
        let mut map: BTreeMap<String, String> = BTreeMap::new();
        let mut used = alloc::vec![false; other.positions.len()];
        self.search_iso(other, 0, &candidates, &mut map, &mut used)
    }

    fn search_iso(
        &self,
        other: &RoMdp,
        idx: usize,
        candidates: &[Vec<usize>],
        map: &mut BTreeMap<String, String>,
        used: &mut [bool],
    ) -> bool {
        if idx == self.positions.len() {
            return self.iso_consistent(other, map);
        }
        let q = self.positions[idx].clone();
        for &k in &candidates[idx] {
            if used[k] {
                continue;
            }
            used[k] = true;
            map.insert(q.clone(), other.positions[k].clone());
            if self.search_iso(other, idx + 1, candidates, map, used) {
                return true;
            }
            map.remove(&q);
            used[k] = false;
        }
        false
    }

    fn iso_consistent(&self, other: &RoMdp, map: &BTreeMap<String, String>) -> bool {
        let image = |t: &Target| -> Target {
            match t {
                Target::Position(q) => Target::Position(map[q].clone()),
                Target::Exit(j) => Target::Exit(*j),
            }
        };
        for (i, t) in self.entry.iter().enumerate() {
            if image(t) != other.entry[i] {
                return false;
            }
        }
        for q in &self.positions {
            if self.reward(q) != other.reward(&map[q]) {
                return false;
            }
            for a in &self.actions {
                let lhs: Row = self
                    .row(q, a)
                    .map(|row| row.iter().map(|(t, p)| (image(t), *p)).collect())
                    .unwrap_or_default();
                let rhs: Row = other.row(&map[q], a).cloned().unwrap_or_default();
                let nonzero = |r: &Row| -> Row {
                    r.iter().filter(|(_, p)| **p != 0.0).map(|(t, p)| (t.clone(), *p)).collect()
                };
                if nonzero(&lhs) != nonzero(&rhs) {
                    return false;
                }
            }
        }
        true
    }

    /// Renames every position through `f`, keeping everything else.
    pub fn rename_positions(&self, f: impl Fn(&str) -> String) -> RoMdp {
        let map_t = |t: &Target| match t {
            Target::Position(q) => Target::Position(f(q)),
            Target::Exit(j) => Target::Exit(*j),
        };
        RoMdp {
            entrances: self.entrances,
            exits: self.exits,
            actions: self.actions.clone(),
            positions: self.positions.iter().map(|q| f(q)).collect(),
            rewards: self.rewards.iter().map(|(q, r)| (f(q), *r)).collect(),
            entry: self.entry.iter().map(map_t).collect(),
            trans: self
                .trans
                .iter()
                .map(|((q, a), row)| {
                    ((f(q), a.clone()), row.iter().map(|(t, p)| (map_t(t), *p)).collect())
                })
                .collect(),
        }
    }

    /// Pads the action set to `actions`: every new action copies the rows of
    /// the model's first declared action. The padded model behaves
    /// identically under every scheduler because padded rows duplicate an
    /// existing choice. Used internally before composing models that were
    /// declared over different action sets; padded models are not
    /// re-validated since duplicated rows may share an exit access.
    pub fn pad_actions(&self, actions: &[String]) -> RoMdp {
        if self.actions.as_slice() == actions {
            return self.clone();
        }
        let mut out = self.clone();
        out.actions = actions.to_vec();
        if self.actions.is_empty() {
            return out;
        }
        let default = self.actions[0].clone();
        for a in actions {
            if self.actions.contains(a) {
                continue;
            }
            for q in &self.positions {
                if let Some(row) = self.row(q, &default) {
                    out.trans.insert((q.clone(), a.clone()), row.clone());
                }
            }
        }
        out
    }
}

/// Something that carries probability into an exit.
#[derive(Clone, Debug, PartialEq, Eq)]
enum Accessor {
    Entrance(usize),
    Step(String, String),
}

/// The action name used by induced Markov chains.
pub const STAR: &str = "*";

/// A right-oriented Markov chain: an [`RoMdp`] over the singleton action set.
#[derive(Clone, Debug, PartialEq)]
pub struct RoMc(RoMdp);

impl RoMc {
    /// Wraps a single-action model; fails if more than one action is declared.
    pub fn from_romdp(m: RoMdp) -> Result<RoMc, ValidationError> {
        if m.actions.len() != 1 {
            let mut report = ValidationReport::default();
            report.push(format!("Markov chain declares {} actions", m.actions.len()));
            return Err(ValidationError(report));
        }
        Ok(RoMc(m))
    }

    pub fn as_romdp(&self) -> &RoMdp {
        &self.0
    }

    pub fn into_romdp(self) -> RoMdp {
        self.0
    }

    /// The single row of `position`, if any.
    pub fn row(&self, position: &str) -> Option<&Row> {
        self.0.row(position, &self.0.actions[0])
    }
}

/// A bidirectional open MDP: an [`RoMdp`] body together with the boundary
/// arities it is read at. Entrances of the body are the rightward wires of
/// `dom` followed by the leftward wires of `cod`; exits are the rightward
/// wires of `cod` followed by the leftward wires of `dom`.
#[derive(Clone, Debug, PartialEq)]
pub struct OpenMdp {
    pub dom: Arity,
    pub cod: Arity,
    body: RoMdp,
}

impl OpenMdp {
    pub fn new(dom: Arity, cod: Arity, body: RoMdp) -> Result<OpenMdp, ValidationError> {
        let mut report = ValidationReport::default();
        if body.entrances() != dom.right + cod.left {
            report.push(format!(
                "body has {} entrances, arity {} -> {} needs {}",
                body.entrances(),
                dom,
                cod,
                dom.right + cod.left
            ));
        }
        if body.exits() != cod.right + dom.left {
            report.push(format!(
                "body has {} exits, arity {} -> {} needs {}",
                body.exits(),
                dom,
                cod,
                cod.right + dom.left
            ));
        }
        if report.is_ok() {
            Ok(OpenMdp { dom, cod, body })
        } else {
            Err(ValidationError(report))
        }
    }

    /// Reads a right-oriented model as a bidirectional one with no leftward
    /// wires.
    pub fn from_rightward(body: RoMdp) -> OpenMdp {
        OpenMdp {
            dom: Arity::rightward(body.entrances()),
            cod: Arity::rightward(body.exits()),
            body,
        }
    }

    /// The underlying right-oriented body (the two views share positions).
    pub fn body(&self) -> &RoMdp {
        &self.body
    }

    pub fn into_body(self) -> RoMdp {
        self.body
    }

    pub fn is_rightward(&self) -> bool {
        self.dom.is_rightward() && self.cod.is_rightward()
    }
}

/// A memoryless scheduler: one action per position.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord)]
pub struct Scheduler {
    choices: BTreeMap<String, String>,
}

impl Scheduler {
    pub fn new() -> Self {
        Scheduler { choices: BTreeMap::new() }
    }

    pub fn from_choices(choices: BTreeMap<String, String>) -> Self {
        Scheduler { choices }
    }

    pub fn assign(&mut self, position: impl Into<String>, action: impl Into<String>) {
        self.choices.insert(position.into(), action.into());
    }

    pub fn choice(&self, position: &str) -> Option<&str> {
        self.choices.get(position).map(|s| s.as_str())
    }

    pub fn choices(&self) -> &BTreeMap<String, String> {
        &self.choices
    }

    pub fn len(&self) -> usize {
        self.choices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.choices.is_empty()
    }
}

/// Violations found by [`RoMdp::validate`].
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ValidationReport {
    violations: Vec<String>,
}

impl ValidationReport {
    pub fn push(&mut self, msg: impl Into<String>) {
        self.violations.push(msg.into());
    }

    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn violations(&self) -> &[String] {
        &self.violations
    }

    pub fn into_result(self) -> Result<(), ValidationError> {
        if self.is_ok() {
            Ok(())
        } else {
            Err(ValidationError(self))
        }
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// A model failed validation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ValidationError(pub ValidationReport);

impl fmt::Display for ValidationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid model: {}", self.0)
    }
}

/// A scheduler does not cover a model.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SchedulerError {
    Unassigned(String),
    UnknownAction(String, String),
}

impl fmt::Display for SchedulerError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SchedulerError::Unassigned(q) => write!(f, "scheduler assigns no action to {q}"),
            SchedulerError::UnknownAction(q, a) => {
                write!(f, "scheduler assigns unknown action {a} to {q}")
            }
        }
    }
}
