//! Structural evaluation of a diagram into a single open MDP. This is the
//! monolithic-model constructor used by oracles, the exporter, and the
//! freeze operator; the compositional solver never calls it on the full
//! diagram unless asked.

use alloc::collections::BTreeMap;
use alloc::string::String;

use crate::algebra::{
    compose_seq, compose_sum, identity_wire, swap_wire, trace_ro, twist_to_o, AlgebraError,
    RoAlgebra,
};
use crate::expr::{action_union, Bindings, DiagramExpr, WireSpec};
use crate::model::{Arity, OpenMdp, RoMdp};

/// Flattens a diagram to one open MDP by applying the structural
/// composition operations. Freeze markers are transparent. Primitive action
/// sets are padded to their union so compositions type-check.
pub fn flatten(expr: &DiagramExpr, env: &Bindings) -> Result<OpenMdp, AlgebraError> {
    let mut actions = action_union(expr, env)?;
    if actions.is_empty() {
        actions.push(String::from(crate::model::STAR));
    }
    let mut fl = Flattener {
        env,
        alg: RoAlgebra { actions },
        memo: BTreeMap::new(),
    };
    let (body, dom, cod) = fl.eval(expr)?;
    twist_to_o(body, dom, cod)
}

struct Flattener<'a> {
    env: &'a Bindings,
    alg: RoAlgebra,
    memo: BTreeMap<String, (RoMdp, Arity, Arity)>,
}

impl Flattener<'_> {
    fn eval(&mut self, expr: &DiagramExpr) -> Result<(RoMdp, Arity, Arity), AlgebraError> {
        match expr {
            DiagramExpr::Prim(p) => {
                let body = p.model.body().pad_actions(&self.alg.actions);
                Ok((body, p.model.dom, p.model.cod))
            }
            DiagramExpr::Var(name) => {
                if let Some(hit) = self.memo.get(name) {
                    return Ok(hit.clone());
                }
                let bound = self
                    .env
                    .get(name)
                    .ok_or_else(|| AlgebraError::UnboundName(name.clone()))?
                    .clone();
                let r = self.eval(&bound)?;
                self.memo.insert(name.clone(), r.clone());
                Ok(r)
            }
            DiagramExpr::Seq(a, b) => {
                let (fa, ad, ac) = self.eval(a)?;
                let (fb, bd, bc) = self.eval(b)?;
                let body = compose_seq(&mut self.alg, &fa, (ad, ac), &fb, (bd, bc))?;
                Ok((body, ad, bc))
            }
            DiagramExpr::Sum(a, b) => {
                let (fa, ad, ac) = self.eval(a)?;
                let (fb, bd, bc) = self.eval(b)?;
                let body = compose_sum(&mut self.alg, &fa, (ad, ac), &fb, (bd, bc))?;
                Ok((
                    body,
                    Arity::new(ad.right + bd.right, bd.left + ad.left),
                    Arity::new(ac.right + bc.right, bc.left + ac.left),
                ))
            }
            DiagramExpr::Trace(l, a) => {
                let (fa, ad, ac) = self.eval(a)?;
                if !ad.is_rightward() || !ac.is_rightward() {
                    return Err(AlgebraError::ArityMismatch(alloc::format!(
                        "tr[{l}] needs a rightward operand, found {ad} -> {ac}"
                    )));
                }
                if ad.right < *l || ac.right < *l {
                    return Err(AlgebraError::ArityMismatch(alloc::format!(
                        "tr[{l}] needs arity at least {l}+m -> {l}+n, found {ad} -> {ac}"
                    )));
                }
                let body = trace_ro(*l, &fa)?;
                Ok((
                    body,
                    Arity::rightward(ad.right - l),
                    Arity::rightward(ac.right - l),
                ))
            }
            DiagramExpr::Freeze(a) => self.eval(a),
            DiagramExpr::Wire(w) => {
                let body = match *w {
                    WireSpec::Identity(m) => identity_wire(m, &self.alg.actions),
                    WireSpec::Swap(m, n) => swap_wire(m, n, &self.alg.actions),
                    WireSpec::Unit(ar) | WireSpec::Counit(ar) => {
                        identity_wire(ar.right + ar.left, &self.alg.actions)
                    }
                };
                Ok((body, w.dom(), w.cod()))
            }
        }
    }
}

/// Number of positions the flattened diagram would have, without building
/// it. Computed per binding once, so heavily shared diagrams stay cheap.
pub fn position_count(expr: &DiagramExpr, env: &Bindings) -> Result<u128, AlgebraError> {
    fn go(
        expr: &DiagramExpr,
        env: &Bindings,
        memo: &mut BTreeMap<String, u128>,
    ) -> Result<u128, AlgebraError> {
        match expr {
            DiagramExpr::Prim(p) => Ok(p.model.body().positions().len() as u128),
            DiagramExpr::Var(name) => {
                if let Some(&hit) = memo.get(name) {
                    return Ok(hit);
                }
                let bound = env
                    .get(name)
                    .ok_or_else(|| AlgebraError::UnboundName(name.clone()))?;
                let n = go(bound, env, memo)?;
                memo.insert(name.clone(), n);
                Ok(n)
            }
            DiagramExpr::Seq(a, b) | DiagramExpr::Sum(a, b) => {
                Ok(go(a, env, memo)? + go(b, env, memo)?)
            }
            DiagramExpr::Trace(_, a) | DiagramExpr::Freeze(a) => go(a, env, memo),
            DiagramExpr::Wire(_) => Ok(0),
        }
    }
    let mut memo = BTreeMap::new();
    go(expr, env, &mut memo)
}

/// Occurrences of primitive components in the expansion, keyed by their id.
pub fn primitive_census(
    expr: &DiagramExpr,
    env: &Bindings,
) -> Result<BTreeMap<String, u128>, AlgebraError> {
    fn go(
        expr: &DiagramExpr,
        env: &Bindings,
        memo: &mut BTreeMap<String, BTreeMap<String, u128>>,
        out: &mut BTreeMap<String, u128>,
    ) -> Result<(), AlgebraError> {
        match expr {
            DiagramExpr::Prim(p) => {
                *out.entry(p.id.clone()).or_insert(0) += 1;
                Ok(())
            }
            DiagramExpr::Var(name) => {
                if let Some(hit) = memo.get(name) {
                    for (k, v) in hit {
                        *out.entry(k.clone()).or_insert(0) += v;
                    }
                    return Ok(());
                }
                let bound = env
                    .get(name)
                    .ok_or_else(|| AlgebraError::UnboundName(name.clone()))?;
                let mut own = BTreeMap::new();
                go(bound, env, memo, &mut own)?;
                for (k, v) in &own {
                    *out.entry(k.clone()).or_insert(0) += v;
                }
                memo.insert(name.clone(), own);
                Ok(())
            }
            DiagramExpr::Seq(a, b) | DiagramExpr::Sum(a, b) => {
                go(a, env, memo, out)?;
                go(b, env, memo, out)
            }
            DiagramExpr::Trace(_, a) | DiagramExpr::Freeze(a) => go(a, env, memo, out),
            DiagramExpr::Wire(_) => Ok(()),
        }
    }
    let mut memo = BTreeMap::new();
    let mut out = BTreeMap::new();
    go(expr, env, &mut memo, &mut out)?;
    Ok(out)
}
