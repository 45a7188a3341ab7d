//! Print/parse round-trip over randomly generated well-typed diagram
//! expressions: the printed text must reparse to a structurally equal
//! expression with the same arity.

use std::collections::BTreeMap;

use compmdp::core::expr::{arity_of, Bindings, DiagramExpr, WireSpec};
use compmdp::core::model::{OpenMdp, RoMdp, Row, Target};
use compmdp::core::randgen::SplitMix64;
use compmdp::dsl::{parse_diagram, print_diagram, DiagramFile, MapLoader};

/// A valid single-action component with the given port counts, every
/// entrance feeding one position that splits its mass across all exits.
fn prim(m: usize, n: usize) -> OpenMdp {
    let mut row = Row::new();
    row.insert(Target::Position("q".into()), 0.5);
    for j in 1..=n {
        row.insert(Target::Exit(j), 0.5 / n as f64);
    }
    let mut trans = BTreeMap::new();
    trans.insert(("q".into(), "a".into()), row);
    let body = RoMdp::new(
        m,
        n,
        vec!["a".into()],
        vec!["q".into()],
        [("q".into(), 1.0)].into_iter().collect(),
        (0..m).map(|_| Target::Position("q".into())).collect(),
        trans,
    );
    assert!(body.validate().is_ok());
    OpenMdp::from_rightward(body)
}

struct Gen {
    rng: SplitMix64,
    library: BTreeMap<(usize, usize), (String, OpenMdp)>,
}

impl Gen {
    fn new(seed: u64) -> Gen {
        let mut library = BTreeMap::new();
        for m in 1..=2 {
            for n in 1..=2 {
                library.insert((m, n), (format!("c{m}{n}.omdp"), prim(m, n)));
            }
        }
        Gen { rng: SplitMix64::new(seed), library }
    }

    fn loader(&self) -> MapLoader {
        MapLoader(self.library.values().map(|(k, v)| (k.clone(), v.clone())).collect())
    }

    fn leaf(&mut self, m: usize, n: usize) -> DiagramExpr {
        if m == n && self.rng.chance(0.3) {
            if m >= 2 && self.rng.chance(0.5) {
                return DiagramExpr::Wire(WireSpec::Swap(1, m - 1));
            }
            return DiagramExpr::Wire(WireSpec::Identity(m));
        }
        let (path, model) = &self.library[&(m, n)];
        DiagramExpr::prim(path, model.clone())
    }

    fn expr(&mut self, m: usize, n: usize, depth: usize) -> DiagramExpr {
        if depth == 0 || (m, n) == (0, 0) {
            return self.leaf(m.max(1), n.max(1));
        }
        match self.rng.below(6) {
            0 | 1 => {
                let k = self.rng.range(1, 2);
                DiagramExpr::seq(self.expr(m, k, depth - 1), self.expr(k, n, depth - 1))
            }
            2 if m >= 2 && n >= 2 => {
                let m1 = self.rng.range(1, m - 1);
                let n1 = self.rng.range(1, n - 1);
                DiagramExpr::sum(
                    self.expr(m1, n1, depth - 1),
                    self.expr(m - m1, n - n1, depth - 1),
                )
            }
            3 if m + 1 <= 2 && n + 1 <= 2 => {
                DiagramExpr::trace(1, self.expr(m + 1, n + 1, depth - 1))
            }
            4 => DiagramExpr::freeze(self.expr(m, n, depth - 1)),
            _ => self.leaf(m, n),
        }
    }
}

#[test]
fn print_parse_is_the_identity_on_well_typed_expressions() {
    let mut gen = Gen::new(20260814);
    for case in 0..1000 {
        let m = gen.rng.range(1, 2);
        let n = gen.rng.range(1, 2);
        let expr = gen.expr(m, n, 4);
        let env = Bindings::new();
        let (dom, cod) = arity_of(&expr, &env).expect("generated expression is well typed");
        assert_eq!(dom.right + cod.left, m);
        assert_eq!(cod.right + dom.left, n);

        let file = DiagramFile { bindings: env, expr: expr.clone(), entrance: 1, exit: 1 };
        let text = print_diagram(&file);
        let reparsed = parse_diagram(&text, &mut gen.loader())
            .unwrap_or_else(|e| panic!("case {case}: {e}\n{text}"));
        assert_eq!(reparsed.expr, expr, "case {case}:\n{text}");
        assert_eq!((reparsed.entrance, reparsed.exit), (1, 1));

        let text2 = print_diagram(&reparsed);
        assert_eq!(text2, text, "printing is not a fixpoint on case {case}");
    }
}

#[test]
fn roundtrip_preserves_bindings_and_query() {
    let mut gen = Gen::new(7);
    let mut env = Bindings::new();
    env.define("left", gen.expr(2, 2, 3));
    env.define("right", gen.expr(2, 1, 3));
    let expr = DiagramExpr::seq(DiagramExpr::var("left"), DiagramExpr::var("right"));
    let file = DiagramFile { bindings: env, expr: expr.clone(), entrance: 2, exit: 1 };
    let text = print_diagram(&file);
    let reparsed = parse_diagram(&text, &mut gen.loader()).unwrap();
    assert_eq!(reparsed.expr, expr);
    assert_eq!(reparsed.bindings.names(), file.bindings.names());
    assert_eq!((reparsed.entrance, reparsed.exit), (2, 1));
}
