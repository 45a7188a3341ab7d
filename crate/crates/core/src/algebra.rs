//! Structural composition of right-oriented and bidirectional open MDPs:
//! identity and swap wires, sequential composition, sum, trace, and the
//! wire-rearranged composites that reduce bidirectional composition to
//! rightward operations.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::model::{Arity, OpenMdp, RoMdp, Row, Target, ValidationError};

/// Composition failures.
#[derive(Clone, Debug, PartialEq)]
pub enum AlgebraError {
    ArityMismatch(String),
    ActionSetMismatch(String),
    /// A trace wired loop ports into a cycle that never reaches a position
    /// or an external exit; `port` is the loop port whose entry chain
    /// revisited itself.
    WireCycle { port: usize },
    UnboundName(String),
    Invalid(ValidationError),
}

impl fmt::Display for AlgebraError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AlgebraError::ArityMismatch(msg) => write!(f, "arity mismatch: {msg}"),
            AlgebraError::ActionSetMismatch(msg) => write!(f, "action sets differ: {msg}"),
            AlgebraError::WireCycle { port } => {
                write!(f, "trace closes a wire-only cycle through loop port {port}")
            }
            AlgebraError::UnboundName(name) => write!(f, "unbound name {name}"),
            AlgebraError::Invalid(e) => write!(f, "{e}"),
        }
    }
}

/// Positionless model routing entrance i to exit i.
pub fn identity_wire(m: usize, actions: &[String]) -> RoMdp {
    RoMdp::wire(m, m, actions.to_vec(), (1..=m).map(Target::Exit).collect())
}

/// Positionless model crossing a block of `m` wires over a block of `n`.
pub fn swap_wire(m: usize, n: usize, actions: &[String]) -> RoMdp {
    let entry = (1..=m + n)
        .map(|i| {
            if i <= m {
                Target::Exit(i + n)
            } else {
                Target::Exit(i - m)
            }
        })
        .collect();
    RoMdp::wire(m + n, n + m, actions.to_vec(), entry)
}

/// The unit wire: bends `ar.right + ar.left` wires rightward out of nothing.
pub fn unit_wire(ar: Arity, actions: &[String]) -> OpenMdp {
    let k = ar.right + ar.left;
    OpenMdp::new(Arity::new(0, 0), Arity::new(k, k), identity_wire(k, actions))
        .expect("unit wire arities are consistent by construction")
}

/// The counit wire: absorbs `ar.right + ar.left` wires.
pub fn counit_wire(ar: Arity, actions: &[String]) -> OpenMdp {
    let k = ar.right + ar.left;
    OpenMdp::new(Arity::new(k, k), Arity::new(0, 0), identity_wire(k, actions))
        .expect("counit wire arities are consistent by construction")
}

fn check_actions(a: &RoMdp, b: &RoMdp) -> Result<(), AlgebraError> {
    if a.actions() != b.actions() {
        return Err(AlgebraError::ActionSetMismatch(format!(
            "[{}] vs [{}]",
            a.actions().join(", "),
            b.actions().join(", ")
        )));
    }
    Ok(())
}

fn prefix_left(q: &str) -> String {
    format!("L/{q}")
}

fn prefix_right(q: &str) -> String {
    format!("R/{q}")
}

/// Sequential composition of right-oriented models: exits of `a` are plugged
/// into entrances of `b`. Positions are the disjoint union with "L/" and
/// "R/" name prefixes; probability into an `a`-exit is redirected to the
/// entry target of the matching `b`-entrance.
pub fn seq_ro(a: &RoMdp, b: &RoMdp) -> Result<RoMdp, AlgebraError> {
    if a.exits() != b.entrances() {
        return Err(AlgebraError::ArityMismatch(format!(
            "cannot sequence {}→{} with {}→{}",
            a.entrances(),
            a.exits(),
            b.entrances(),
            b.exits()
        )));
    }
    check_actions(a, b)?;
    let via_b = |e: usize| -> Target {
        match b.entry(e) {
            Target::Position(q) => Target::Position(prefix_right(q)),
            Target::Exit(j) => Target::Exit(*j),
        }
    };
    let entry: Vec<Target> = a
        .entry_targets()
        .iter()
        .map(|t| match t {
            Target::Position(q) => Target::Position(prefix_left(q)),
            Target::Exit(e) => via_b(*e),
        })
        .collect();
    let mut positions: Vec<String> = a.positions().iter().map(|q| prefix_left(q)).collect();
    positions.extend(b.positions().iter().map(|q| prefix_right(q)));
    let mut rewards = BTreeMap::new();
    for q in a.positions() {
        rewards.insert(prefix_left(q), a.reward(q));
    }
    for q in b.positions() {
        rewards.insert(prefix_right(q), b.reward(q));
    }
    let mut trans = BTreeMap::new();
    for ((q, act), row) in a.rows() {
        let mut out = Row::new();
        for (t, p) in row {
            let nt = match t {
                Target::Position(q2) => Target::Position(prefix_left(q2)),
                Target::Exit(e) => via_b(*e),
            };
            *out.entry(nt).or_insert(0.0) += p;
        }
        trans.insert((prefix_left(q), act.clone()), out);
    }
    for ((q, act), row) in b.rows() {
        let out: Row = row
            .iter()
            .map(|(t, p)| {
                let nt = match t {
                    Target::Position(q2) => Target::Position(prefix_right(q2)),
                    Target::Exit(j) => Target::Exit(*j),
                };
                (nt, *p)
            })
            .collect();
        trans.insert((prefix_right(q), act.clone()), out);
    }
    Ok(RoMdp::new(
        a.entrances(),
        b.exits(),
        a.actions().to_vec(),
        positions,
        rewards,
        entry,
        trans,
    ))
}

/// Sum of right-oriented models: disjoint union with `b`'s ports appended
/// after `a`'s on both sides.
pub fn sum_ro(a: &RoMdp, b: &RoMdp) -> Result<RoMdp, AlgebraError> {
    check_actions(a, b)?;
    let mut entry: Vec<Target> = a
        .entry_targets()
        .iter()
        .map(|t| match t {
            Target::Position(q) => Target::Position(prefix_left(q)),
            Target::Exit(j) => Target::Exit(*j),
        })
        .collect();
    entry.extend(b.entry_targets().iter().map(|t| match t {
        Target::Position(q) => Target::Position(prefix_right(q)),
        Target::Exit(j) => Target::Exit(j + a.exits()),
    }));
    let mut positions: Vec<String> = a.positions().iter().map(|q| prefix_left(q)).collect();
    positions.extend(b.positions().iter().map(|q| prefix_right(q)));
    let mut rewards = BTreeMap::new();
    for q in a.positions() {
        rewards.insert(prefix_left(q), a.reward(q));
    }
    for q in b.positions() {
        rewards.insert(prefix_right(q), b.reward(q));
    }
    let mut trans = BTreeMap::new();
    for ((q, act), row) in a.rows() {
        let out: Row = row
            .iter()
            .map(|(t, p)| match t {
                Target::Position(q2) => (Target::Position(prefix_left(q2)), *p),
                Target::Exit(j) => (Target::Exit(*j), *p),
            })
            .collect();
        trans.insert((prefix_left(q), act.clone()), out);
    }
    for ((q, act), row) in b.rows() {
        let out: Row = row
            .iter()
            .map(|(t, p)| match t {
                Target::Position(q2) => (Target::Position(prefix_right(q2)), *p),
                Target::Exit(j) => (Target::Exit(j + a.exits()), *p),
            })
            .collect();
        trans.insert((prefix_right(q), act.clone()), out);
    }
    Ok(RoMdp::new(
        a.entrances() + b.entrances(),
        a.exits() + b.exits(),
        a.actions().to_vec(),
        positions,
        rewards,
        entry,
        trans,
    ))
}

/// Where a loop port's entry chain finally lands.
enum PortDest {
    Position(String),
    /// 1-based exit of the traced model.
    Exit(usize),
}

/// Trace over the first `l` ports: exit k is fed back into entrance k for
/// k ≤ l. Positions are unchanged; entries and transitions targeting loop
/// exits are redirected along the loop ports' entry chains. Fails with
/// [`AlgebraError::WireCycle`] when a chain of loop ports revisits itself,
/// which would loop probability mass through wires forever.
pub fn trace_ro(l: usize, a: &RoMdp) -> Result<RoMdp, AlgebraError> {
    if a.entrances() < l || a.exits() < l {
        return Err(AlgebraError::ArityMismatch(format!(
            "cannot trace {l} ports of {}→{}",
            a.entrances(),
            a.exits()
        )));
    }
    let m = a.entrances() - l;
    let n = a.exits() - l;
    // Resolve each loop port (as an entrance of `a`) to its final target.
    let mut dests: Vec<PortDest> = Vec::with_capacity(l);
    for start in 1..=l {
        let mut visited = alloc::vec![false; l + 1];
        let mut cur = start;
        let dest = loop {
            if visited[cur] {
                return Err(AlgebraError::WireCycle { port: start });
            }
            visited[cur] = true;
            match a.entry(cur) {
                Target::Position(q) => break PortDest::Position(q.clone()),
                Target::Exit(e) if *e > l => break PortDest::Exit(e - l),
                Target::Exit(e) => cur = *e,
            }
        };
        dests.push(dest);
    }
    let redirect = |t: &Target| -> Target {
        match t {
            Target::Position(q) => Target::Position(q.clone()),
            Target::Exit(e) if *e > l => Target::Exit(e - l),
            Target::Exit(e) => match &dests[e - 1] {
                PortDest::Position(q) => Target::Position(q.clone()),
                PortDest::Exit(j) => Target::Exit(*j),
            },
        }
    };
    let mut entry: Vec<Target> = Vec::with_capacity(m);
    for i in 1..=m {
        entry.push(redirect(a.entry(l + i)));
    }
    let mut trans = BTreeMap::new();
    for ((q, act), row) in a.rows() {
        let mut out = Row::new();
        for (t, p) in row {
            *out.entry(redirect(t)).or_insert(0.0) += p;
        }
        trans.insert((q.clone(), act.clone()), out);
    }
    let mut rewards = BTreeMap::new();
    for q in a.positions() {
        rewards.insert(q.clone(), a.reward(q));
    }
    Ok(RoMdp::new(
        m,
        n,
        a.actions().to_vec(),
        a.positions().to_vec(),
        rewards,
        entry,
        trans,
    ))
}

/// Reads a bidirectional model as its right-oriented body (the twist is a
/// retyping; positions are shared).
pub fn twist_to_ro(a: &OpenMdp) -> RoMdp {
    a.body().clone()
}

/// Reads a right-oriented model at bidirectional arities.
pub fn twist_to_o(a: RoMdp, dom: Arity, cod: Arity) -> Result<OpenMdp, AlgebraError> {
    OpenMdp::new(dom, cod, a).map_err(AlgebraError::Invalid)
}

/// The operations of a traced symmetric monoidal category. Implemented by
/// the structural algebra on models, the Markov chain arrow algebra, and
/// the scheduler-front algebra, so that the bidirectional composites below
/// are written once and interpreted uniformly.
pub trait Tsmc {
    type Arrow: Clone;
    type Error: From<AlgebraError>;
    fn seq(&mut self, a: &Self::Arrow, b: &Self::Arrow) -> Result<Self::Arrow, Self::Error>;
    fn sum(&mut self, a: &Self::Arrow, b: &Self::Arrow) -> Result<Self::Arrow, Self::Error>;
    fn trace(&mut self, l: usize, a: &Self::Arrow) -> Result<Self::Arrow, Self::Error>;
    fn identity(&mut self, m: usize) -> Self::Arrow;
    fn swap(&mut self, m: usize, n: usize) -> Self::Arrow;
}

/// The structural instance: arrows are right-oriented models over a fixed
/// action set.
pub struct RoAlgebra {
    pub actions: Vec<String>,
}

impl Tsmc for RoAlgebra {
    type Arrow = RoMdp;
    type Error = AlgebraError;

    fn seq(&mut self, a: &RoMdp, b: &RoMdp) -> Result<RoMdp, AlgebraError> {
        seq_ro(a, b)
    }

    fn sum(&mut self, a: &RoMdp, b: &RoMdp) -> Result<RoMdp, AlgebraError> {
        sum_ro(a, b)
    }

    fn trace(&mut self, l: usize, a: &RoMdp) -> Result<RoMdp, AlgebraError> {
        trace_ro(l, a)
    }

    fn identity(&mut self, m: usize) -> RoMdp {
        identity_wire(m, &self.actions)
    }

    fn swap(&mut self, m: usize, n: usize) -> RoMdp {
        swap_wire(m, n, &self.actions)
    }
}

/// Sequential composition at bidirectional arities `a: ma -> la`,
/// `b: la -> nb`, expressed over rightward operations: the leftward wires of
/// the shared boundary are routed around `a` and `b` with swaps and closed
/// with a trace. Rightward-only inputs compose directly.
pub fn compose_seq<T: Tsmc>(
    alg: &mut T,
    a: &T::Arrow,
    ma: (Arity, Arity),
    b: &T::Arrow,
    nb: (Arity, Arity),
) -> Result<T::Arrow, T::Error> {
    let (m, la) = ma;
    let (lb, n) = nb;
    if la != lb {
        return Err(T::Error::from(AlgebraError::ArityMismatch(format!(
            "cannot sequence codomain {la} with domain {lb}"
        ))));
    }
    let l = la;
    if m.is_rightward() && l.is_rightward() && n.is_rightward() {
        return alg.seq(a, b);
    }
    let w1 = {
        let s = alg.swap(l.left, m.right);
        let i = alg.identity(n.left);
        alg.sum(&s, &i)?
    };
    let f2 = {
        let i = alg.identity(n.left);
        alg.sum(a, &i)?
    };
    let w3 = {
        let i = alg.identity(l.right);
        let s = alg.swap(m.left, n.left);
        alg.sum(&i, &s)?
    };
    let f4 = {
        let i = alg.identity(m.left);
        alg.sum(b, &i)?
    };
    let w5 = {
        let s = alg.swap(n.right, l.left);
        let i = alg.identity(m.left);
        alg.sum(&s, &i)?
    };
    let c = alg.seq(&w1, &f2)?;
    let c = alg.seq(&c, &w3)?;
    let c = alg.seq(&c, &f4)?;
    let c = alg.seq(&c, &w5)?;
    alg.trace(l.left, &c)
}

/// Sum at bidirectional arities `a: ma -> na`, `b: kb -> lb`: the operands'
/// boundary blocks are interleaved with swaps so the result reads as
/// `(ma.right + kb.right, kb.left + ma.left) -> (na.right + lb.right,
/// lb.left + na.left)`. Rightward-only inputs sum directly.
pub fn compose_sum<T: Tsmc>(
    alg: &mut T,
    a: &T::Arrow,
    ma: (Arity, Arity),
    b: &T::Arrow,
    kb: (Arity, Arity),
) -> Result<T::Arrow, T::Error> {
    let (m, n) = ma;
    let (k, l) = kb;
    if m.is_rightward() && n.is_rightward() && k.is_rightward() && l.is_rightward() {
        return alg.sum(a, b);
    }
    let g1 = {
        let s1 = alg.swap(m.right, k.right);
        let s2 = alg.swap(l.left, n.left);
        alg.sum(&s1, &s2)?
    };
    let g2 = {
        let i1 = alg.identity(k.right);
        let i2 = alg.identity(l.left);
        let mid = alg.sum(&i1, a)?;
        alg.sum(&mid, &i2)?
    };
    let g3 = {
        let s1 = alg.swap(k.right, n.right);
        let s2 = alg.swap(m.left, l.left);
        alg.sum(&s1, &s2)?
    };
    let g4 = {
        let i1 = alg.identity(n.right);
        let i2 = alg.identity(m.left);
        let mid = alg.sum(&i1, b)?;
        alg.sum(&mid, &i2)?
    };
    let c = alg.seq(&g1, &g2)?;
    let c = alg.seq(&c, &g3)?;
    alg.seq(&c, &g4)
}

/// Sequential composition of bidirectional models.
pub fn seq_o(a: &OpenMdp, b: &OpenMdp) -> Result<OpenMdp, AlgebraError> {
    check_actions(a.body(), b.body())?;
    let mut alg = RoAlgebra { actions: a.body().actions().to_vec() };
    let body = compose_seq(&mut alg, a.body(), (a.dom, a.cod), b.body(), (b.dom, b.cod))?;
    twist_to_o(body, a.dom, b.cod)
}

/// Sum of bidirectional models.
pub fn sum_o(a: &OpenMdp, b: &OpenMdp) -> Result<OpenMdp, AlgebraError> {
    check_actions(a.body(), b.body())?;
    let mut alg = RoAlgebra { actions: a.body().actions().to_vec() };
    let body = compose_sum(&mut alg, a.body(), (a.dom, a.cod), b.body(), (b.dom, b.cod))?;
    twist_to_o(
        body,
        Arity::new(a.dom.right + b.dom.right, b.dom.left + a.dom.left),
        Arity::new(a.cod.right + b.cod.right, b.cod.left + a.cod.left),
    )
}
