//! Diagram expressions: the abstract syntax of string diagrams over open
//! MDP components, with name bindings and arity checking.

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::algebra::AlgebraError;
use crate::model::{Arity, OpenMdp};

/// A wire diagram with no positions.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WireSpec {
    Identity(usize),
    Swap(usize, usize),
    Unit(Arity),
    Counit(Arity),
}

impl WireSpec {
    pub fn dom(&self) -> Arity {
        match *self {
            WireSpec::Identity(m) => Arity::rightward(m),
            WireSpec::Swap(m, n) => Arity::rightward(m + n),
            WireSpec::Unit(_) => Arity::new(0, 0),
            WireSpec::Counit(ar) => {
                let k = ar.right + ar.left;
                Arity::new(k, k)
            }
        }
    }

    pub fn cod(&self) -> Arity {
        match *self {
            WireSpec::Identity(m) => Arity::rightward(m),
            WireSpec::Swap(m, n) => Arity::rightward(n + m),
            WireSpec::Unit(ar) => {
                let k = ar.right + ar.left;
                Arity::new(k, k)
            }
            WireSpec::Counit(_) => Arity::new(0, 0),
        }
    }
}

/// A primitive component occurrence. The `id` names the component for
/// caching and scheduler reporting (a binding name or a load path).
#[derive(Clone, Debug, PartialEq)]
pub struct PrimRef {
    pub id: String,
    pub model: OpenMdp,
}

/// A string diagram over components.
#[derive(Clone, Debug, PartialEq)]
pub enum DiagramExpr {
    Prim(PrimRef),
    Var(String),
    Seq(Box<DiagramExpr>, Box<DiagramExpr>),
    Sum(Box<DiagramExpr>, Box<DiagramExpr>),
    Trace(usize, Box<DiagramExpr>),
    Freeze(Box<DiagramExpr>),
    Wire(WireSpec),
}

impl DiagramExpr {
    pub fn seq(a: DiagramExpr, b: DiagramExpr) -> DiagramExpr {
        DiagramExpr::Seq(Box::new(a), Box::new(b))
    }

    pub fn sum(a: DiagramExpr, b: DiagramExpr) -> DiagramExpr {
        DiagramExpr::Sum(Box::new(a), Box::new(b))
    }

    pub fn trace(l: usize, a: DiagramExpr) -> DiagramExpr {
        DiagramExpr::Trace(l, Box::new(a))
    }

    pub fn freeze(a: DiagramExpr) -> DiagramExpr {
        DiagramExpr::Freeze(Box::new(a))
    }

    pub fn var(name: &str) -> DiagramExpr {
        DiagramExpr::Var(String::from(name))
    }

    pub fn prim(id: &str, model: OpenMdp) -> DiagramExpr {
        DiagramExpr::Prim(PrimRef { id: String::from(id), model })
    }
}

/// Named diagram definitions in declaration order. Definitions may only
/// reference earlier names, so lookups never cycle.
#[derive(Clone, Debug, Default)]
pub struct Bindings {
    map: BTreeMap<String, DiagramExpr>,
    order: Vec<String>,
}

impl Bindings {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn define(&mut self, name: &str, expr: DiagramExpr) {
        if !self.map.contains_key(name) {
            self.order.push(String::from(name));
        }
        self.map.insert(String::from(name), expr);
    }

    pub fn get(&self, name: &str) -> Option<&DiagramExpr> {
        self.map.get(name)
    }

    pub fn names(&self) -> &[String] {
        &self.order
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }
}

/// Infers the arity of an expression, checking that children compose
/// legally. The trace operates on rightward diagrams only.
pub fn arity_of(expr: &DiagramExpr, env: &Bindings) -> Result<(Arity, Arity), AlgebraError> {
    match expr {
        DiagramExpr::Prim(p) => Ok((p.model.dom, p.model.cod)),
        DiagramExpr::Var(name) => match env.get(name) {
            Some(e) => arity_of(e, env),
            None => Err(AlgebraError::UnboundName(name.clone())),
        },
        DiagramExpr::Seq(a, b) => {
            let (ad, ac) = arity_of(a, env)?;
            let (bd, bc) = arity_of(b, env)?;
            if ac != bd {
                return Err(AlgebraError::ArityMismatch(format!(
                    "`;` joins codomain {ac} to domain {bd}"
                )));
            }
            Ok((ad, bc))
        }
        DiagramExpr::Sum(a, b) => {
            let (ad, ac) = arity_of(a, env)?;
            let (bd, bc) = arity_of(b, env)?;
            Ok((
                Arity::new(ad.right + bd.right, bd.left + ad.left),
                Arity::new(ac.right + bc.right, bc.left + ac.left),
            ))
        }
        DiagramExpr::Trace(l, a) => {
            let (ad, ac) = arity_of(a, env)?;
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
            Ok((Arity::rightward(ad.right - l), Arity::rightward(ac.right - l)))
        }
        DiagramExpr::Freeze(a) => arity_of(a, env),
        DiagramExpr::Wire(w) => Ok((w.dom(), w.cod())),
    }
}

/// Union of the action sets of all primitives in the expression, in order
/// of first appearance (depth-first, left to right).
pub fn action_union(expr: &DiagramExpr, env: &Bindings) -> Result<Vec<String>, AlgebraError> {
    let mut seen_bindings: Vec<String> = Vec::new();
    let mut actions: Vec<String> = Vec::new();
    collect_actions(expr, env, &mut seen_bindings, &mut actions)?;
    Ok(actions)
}

fn collect_actions(
    expr: &DiagramExpr,
    env: &Bindings,
    seen: &mut Vec<String>,
    out: &mut Vec<String>,
) -> Result<(), AlgebraError> {
    match expr {
        DiagramExpr::Prim(p) => {
            for a in p.model.body().actions() {
                if !out.contains(a) {
                    out.push(a.clone());
                }
            }
            Ok(())
        }
        DiagramExpr::Var(name) => {
            if seen.contains(name) {
                return Ok(());
            }
            seen.push(name.clone());
            match env.get(name) {
                Some(e) => collect_actions(e, env, seen, out),
                None => Err(AlgebraError::UnboundName(name.clone())),
            }
        }
        DiagramExpr::Seq(a, b) | DiagramExpr::Sum(a, b) => {
            collect_actions(a, env, seen, out)?;
            collect_actions(b, env, seen, out)
        }
        DiagramExpr::Trace(_, a) | DiagramExpr::Freeze(a) => collect_actions(a, env, seen, out),
        DiagramExpr::Wire(_) => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{RoMdp, Target};
    use alloc::string::ToString;
    use alloc::vec;

    fn prim_1to1(id: &str, actions: &[&str]) -> DiagramExpr {
        let mut trans = BTreeMap::new();
        for a in actions {
            let mut row = crate::model::Row::new();
            row.insert(Target::Exit(1), 1.0);
            trans.insert(("q".to_string(), a.to_string()), row);
        }
        let m = RoMdp::new(
            1,
            1,
            actions.iter().map(|a| a.to_string()).collect(),
            vec!["q".to_string()],
            [("q".to_string(), 1.0)].into_iter().collect(),
            vec![Target::Position("q".to_string())],
            trans,
        );
        DiagramExpr::prim(id, OpenMdp::from_rightward(m))
    }

    #[test]
    fn wire_arities() {
        assert_eq!(WireSpec::Identity(3).dom(), Arity::rightward(3));
        assert_eq!(WireSpec::Swap(2, 1).cod(), Arity::rightward(3));
        let u = WireSpec::Unit(Arity::new(1, 1));
        assert_eq!(u.dom(), Arity::new(0, 0));
        assert_eq!(u.cod(), Arity::new(2, 2));
        let c = WireSpec::Counit(Arity::new(1, 1));
        assert_eq!(c.dom(), Arity::new(2, 2));
        assert_eq!(c.cod(), Arity::new(0, 0));
    }

    #[test]
    fn arity_checks_seq_and_sum() {
        let env = Bindings::new();
        let t = prim_1to1("T", &["a"]);
        let good = DiagramExpr::seq(t.clone(), t.clone());
        assert_eq!(
            arity_of(&good, &env).unwrap(),
            (Arity::rightward(1), Arity::rightward(1))
        );
        let bad = DiagramExpr::seq(t.clone(), DiagramExpr::Wire(WireSpec::Identity(2)));
        assert!(matches!(arity_of(&bad, &env), Err(AlgebraError::ArityMismatch(_))));
        let s = DiagramExpr::sum(t.clone(), t.clone());
        assert_eq!(
            arity_of(&s, &env).unwrap(),
            (Arity::rightward(2), Arity::rightward(2))
        );
    }

    #[test]
    fn arity_checks_trace_bounds() {
        let env = Bindings::new();
        let id2 = DiagramExpr::Wire(WireSpec::Identity(2));
        assert_eq!(
            arity_of(&DiagramExpr::trace(1, id2.clone()), &env).unwrap(),
            (Arity::rightward(1), Arity::rightward(1))
        );
        assert!(matches!(
            arity_of(&DiagramExpr::trace(3, id2), &env),
            Err(AlgebraError::ArityMismatch(_))
        ));
    }

    #[test]
    fn arity_resolves_vars() {
        let mut env = Bindings::new();
        env.define("T", prim_1to1("T", &["a"]));
        let expr = DiagramExpr::seq(DiagramExpr::var("T"), DiagramExpr::var("T"));
        assert!(arity_of(&expr, &env).is_ok());
        let missing = DiagramExpr::var("U");
        assert_eq!(
            arity_of(&missing, &env),
            Err(AlgebraError::UnboundName("U".to_string()))
        );
    }

    #[test]
    fn action_union_first_seen_order() {
        let mut env = Bindings::new();
        env.define("A", prim_1to1("A", &["b", "a"]));
        env.define("B", prim_1to1("B", &["c", "a"]));
        let expr = DiagramExpr::seq(DiagramExpr::var("A"), DiagramExpr::var("B"));
        assert_eq!(
            action_union(&expr, &env).unwrap(),
            vec!["b".to_string(), "a".to_string(), "c".to_string()]
        );
    }
}
