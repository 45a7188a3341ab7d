//! The diagram file format: named bindings over composition expressions
//! and a final solve query.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use compmdp_core::expr::{Bindings, DiagramExpr, WireSpec};
use compmdp_core::model::{Arity, OpenMdp};

use super::component::parse_component;
use super::lexer::{Cursor, Tok};
use super::ParseError;

/// Resolves `load` paths to component models.
pub trait Loader {
    fn load(&mut self, path: &str) -> Result<OpenMdp, ParseError>;
}

/// Loads and caches component files relative to a base directory.
pub struct FileLoader {
    base: PathBuf,
    cache: BTreeMap<String, OpenMdp>,
}

impl FileLoader {
    pub fn new(base: impl Into<PathBuf>) -> FileLoader {
        FileLoader { base: base.into(), cache: BTreeMap::new() }
    }
}

impl Loader for FileLoader {
    fn load(&mut self, path: &str) -> Result<OpenMdp, ParseError> {
        if let Some(hit) = self.cache.get(path) {
            return Ok(hit.clone());
        }
        let full = self.base.join(path);
        let text = fs::read_to_string(&full).map_err(|e| ParseError::Load {
            path: path.to_string(),
            reason: e.to_string(),
        })?;
        let def = parse_component(&text).map_err(|e| ParseError::Load {
            path: path.to_string(),
            reason: e.to_string(),
        })?;
        self.cache.insert(path.to_string(), def.model.clone());
        Ok(def.model)
    }
}

/// Serves components from a fixed in-memory table.
pub struct MapLoader(pub BTreeMap<String, OpenMdp>);

impl Loader for MapLoader {
    fn load(&mut self, path: &str) -> Result<OpenMdp, ParseError> {
        self.0.get(path).cloned().ok_or_else(|| ParseError::Load {
            path: path.to_string(),
            reason: String::from("not in the component table"),
        })
    }
}

/// A parsed diagram file: bindings in declaration order, the solve
/// expression, and the queried entrance/exit pair.
#[derive(Clone, Debug)]
pub struct DiagramFile {
    pub bindings: Bindings,
    pub expr: DiagramExpr,
    pub entrance: usize,
    pub exit: usize,
}

const RESERVED: &[&str] = &[
    "let", "solve", "entrance", "exit", "tr", "freeze", "id", "swap", "load",
];

pub fn parse_diagram(text: &str, loader: &mut dyn Loader) -> Result<DiagramFile, ParseError> {
    let mut p = DiagramParser {
        cur: Cursor::new(text)?,
        loader,
        bindings: Bindings::new(),
        arities: BTreeMap::new(),
    };
    while p.cur.eat_keyword("let") {
        let name = p.cur.expect_name("a binding name")?;
        if RESERVED.contains(&name.as_str()) {
            return Err(p.cur.err(format!("a binding name, `{name}` is reserved")));
        }
        if p.bindings.get(&name).is_some() {
            return Err(p.cur.err(format!("a fresh binding name, `{name}` is already bound")));
        }
        p.cur.expect(Tok::Eq, "`=`")?;
        let (expr, dom, cod) = p.sum()?;
        p.cur.expect(Tok::Semi, "`;` to close the binding")?;
        p.bindings.define(&name, expr);
        p.arities.insert(name, (dom, cod));
    }
    p.cur.expect_keyword("solve")?;
    let (expr, dom, cod) = p.sum()?;
    p.cur.expect_keyword("entrance")?;
    let entrance = p.cur.expect_int("an entrance index")?;
    p.cur.expect_keyword("exit")?;
    let exit = p.cur.expect_int("an exit index")?;
    p.cur.expect_end()?;
    let m = dom.right + cod.left;
    let n = cod.right + dom.left;
    if entrance < 1 || entrance > m {
        return Err(ParseError::Arity {
            node: String::from("solve"),
            expected: format!("an entrance in 1..={m}"),
            found: entrance.to_string(),
        });
    }
    if exit < 1 || exit > n {
        return Err(ParseError::Arity {
            node: String::from("solve"),
            expected: format!("an exit in 1..={n}"),
            found: exit.to_string(),
        });
    }
    Ok(DiagramFile { bindings: p.bindings, expr, entrance, exit })
}

/// Parses a diagram file from disk, resolving `load` paths relative to the
/// file's directory.
pub fn parse_diagram_file(path: &Path) -> Result<DiagramFile, ParseError> {
    let text = fs::read_to_string(path).map_err(|e| ParseError::Load {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let mut loader = FileLoader::new(base);
    parse_diagram(&text, &mut loader)
}

struct DiagramParser<'a> {
    cur: Cursor,
    loader: &'a mut dyn Loader,
    bindings: Bindings,
    arities: BTreeMap<String, (Arity, Arity)>,
}

impl DiagramParser<'_> {
    fn sum(&mut self) -> Result<(DiagramExpr, Arity, Arity), ParseError> {
        let (mut e, mut d, mut c) = self.seq()?;
        while matches!(self.cur.peek(), Some(Tok::Oplus)) {
            self.cur.bump();
            let (rhs, rd, rc) = self.seq()?;
            d = Arity::new(d.right + rd.right, rd.left + d.left);
            c = Arity::new(c.right + rc.right, rc.left + c.left);
            e = DiagramExpr::sum(e, rhs);
        }
        Ok((e, d, c))
    }

    fn seq(&mut self) -> Result<(DiagramExpr, Arity, Arity), ParseError> {
        let (mut e, d, mut c) = self.atom()?;
        loop {
            if !matches!(self.cur.peek(), Some(Tok::Semi)) || !self.atom_follows_semi() {
                break;
            }
            let (line, col) = self.cur.here();
            self.cur.bump();
            let (rhs, rd, rc) = self.atom()?;
            if c != rd {
                return Err(ParseError::Arity {
                    node: format!("`;` at {line}:{col}"),
                    expected: format!("an operand with domain {c}"),
                    found: format!("domain {rd}"),
                });
            }
            e = DiagramExpr::seq(e, rhs);
            c = rc;
        }
        Ok((e, d, c))
    }

    /// A `;` continues the sequence only when an expression follows it;
    /// otherwise it terminates a `let` binding.
    fn atom_follows_semi(&self) -> bool {
        match self.cur.peek2() {
            Some(Tok::LParen) => true,
            Some(Tok::Name(n)) => {
                !matches!(n.as_str(), "let" | "solve" | "entrance" | "exit")
            }
            _ => false,
        }
    }

    fn atom(&mut self) -> Result<(DiagramExpr, Arity, Arity), ParseError> {
        let (line, col) = self.cur.here();
        match self.cur.peek() {
            Some(Tok::LParen) => {
                self.cur.bump();
                let r = self.sum()?;
                self.cur.expect(Tok::RParen, "`)`")?;
                Ok(r)
            }
            Some(Tok::Name(n)) => match n.as_str() {
                "tr" => {
                    self.cur.bump();
                    self.cur.expect(Tok::LBracket, "`[`")?;
                    let l = self.cur.expect_int("a loop width")?;
                    self.cur.expect(Tok::RBracket, "`]`")?;
                    self.cur.expect(Tok::LParen, "`(`")?;
                    let (inner, d, c) = self.sum()?;
                    self.cur.expect(Tok::RParen, "`)`")?;
                    let node = format!("tr[{l}] at {line}:{col}");
                    if !d.is_rightward() || !c.is_rightward() {
                        return Err(ParseError::Arity {
                            node,
                            expected: String::from("a rightward operand"),
                            found: format!("{d} -> {c}"),
                        });
                    }
                    if d.right < l || c.right < l {
                        return Err(ParseError::Arity {
                            node,
                            expected: format!("arity at least {l}+m -> {l}+n"),
                            found: format!("{d} -> {c}"),
                        });
                    }
                    Ok((
                        DiagramExpr::trace(l, inner),
                        Arity::rightward(d.right - l),
                        Arity::rightward(c.right - l),
                    ))
                }
                "freeze" => {
                    self.cur.bump();
                    self.cur.expect(Tok::LParen, "`(`")?;
                    let (inner, d, c) = self.sum()?;
                    self.cur.expect(Tok::RParen, "`)`")?;
                    Ok((DiagramExpr::freeze(inner), d, c))
                }
                "id" => {
                    self.cur.bump();
                    self.cur.expect(Tok::LBracket, "`[`")?;
                    let m = self.cur.expect_int("a wire count")?;
                    self.cur.expect(Tok::RBracket, "`]`")?;
                    Ok((
                        DiagramExpr::Wire(WireSpec::Identity(m)),
                        Arity::rightward(m),
                        Arity::rightward(m),
                    ))
                }
                "swap" => {
                    self.cur.bump();
                    self.cur.expect(Tok::LBracket, "`[`")?;
                    let m = self.cur.expect_int("a wire count")?;
                    self.cur.expect(Tok::Comma, "`,`")?;
                    let n = self.cur.expect_int("a wire count")?;
                    self.cur.expect(Tok::RBracket, "`]`")?;
                    Ok((
                        DiagramExpr::Wire(WireSpec::Swap(m, n)),
                        Arity::rightward(m + n),
                        Arity::rightward(n + m),
                    ))
                }
                "load" => {
                    self.cur.bump();
                    let path = self.cur.expect_str("a component path")?;
                    let model = self.loader.load(&path)?;
                    let (dom, cod) = (model.dom, model.cod);
                    Ok((DiagramExpr::prim(&path, model), dom, cod))
                }
                "let" | "solve" | "entrance" | "exit" => Err(self.cur.err("an expression")),
                _ => {
                    let name = self.cur.expect_name("a name")?;
                    match self.arities.get(&name) {
                        Some(&(d, c)) => Ok((DiagramExpr::var(&name), d, c)),
                        None => Err(ParseError::Unbound(name)),
                    }
                }
            },
            _ => Err(self.cur.err("an expression")),
        }
    }
}

/// Canonical diagram text: one binding per line, minimal parentheses, and
/// the solve query last. Parsing the output reproduces the tree exactly.
pub fn print_diagram(file: &DiagramFile) -> String {
    let mut out = String::new();
    for name in file.bindings.names() {
        let expr = file.bindings.get(name).expect("binding order lists bound names");
        out.push_str(&format!("let {name} = {};\n", expr_text(expr, 0)));
    }
    out.push_str(&format!(
        "solve {} entrance {} exit {}\n",
        expr_text(&file.expr, 0),
        file.entrance,
        file.exit
    ));
    out
}

/// Levels: 0 admits sums, 1 admits sequences, 2 only atoms.
fn expr_text(e: &DiagramExpr, level: u8) -> String {
    match e {
        DiagramExpr::Sum(a, b) => {
            let s = format!("{} (+) {}", expr_text(a, 0), expr_text(b, 1));
            if level > 0 {
                format!("({s})")
            } else {
                s
            }
        }
        DiagramExpr::Seq(a, b) => {
            let s = format!("{} ; {}", expr_text(a, 1), expr_text(b, 2));
            if level > 1 {
                format!("({s})")
            } else {
                s
            }
        }
        DiagramExpr::Trace(l, a) => format!("tr[{l}]({})", expr_text(a, 0)),
        DiagramExpr::Freeze(a) => format!("freeze({})", expr_text(a, 0)),
        DiagramExpr::Wire(WireSpec::Identity(m)) => format!("id[{m}]"),
        DiagramExpr::Wire(WireSpec::Swap(m, n)) => format!("swap[{m},{n}]"),
        DiagramExpr::Wire(_) => {
            unreachable!("bidirectional unit/counit wires have no surface syntax")
        }
        DiagramExpr::Var(name) => name.clone(),
        DiagramExpr::Prim(p) => format!("load \"{}\"", p.id),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use compmdp_core::model::{Row, RoMdp, Target};

    fn task_model() -> OpenMdp {
        let mut trans = BTreeMap::new();
        trans.insert(
            ("t".to_string(), "move".to_string()),
            Row::from_iter([(Target::Position("t".into()), 0.2), (Target::Exit(1), 0.8)]),
        );
        OpenMdp::from_rightward(RoMdp::new(
            1,
            1,
            vec!["move".into()],
            vec!["t".into()],
            [("t".to_string(), 4.0)].into_iter().collect(),
            vec![Target::Position("t".into())],
            trans,
        ))
    }

    fn loader() -> MapLoader {
        MapLoader([(String::from("task.omdp"), task_model())].into_iter().collect())
    }

    #[test]
    fn parses_bindings_and_query() {
        let text = "let T = load \"task.omdp\";\nsolve T ; T entrance 1 exit 1\n";
        let file = parse_diagram(text, &mut loader()).unwrap();
        assert_eq!(file.bindings.names(), ["T".to_string()]);
        assert_eq!(
            file.expr,
            DiagramExpr::seq(DiagramExpr::var("T"), DiagramExpr::var("T"))
        );
        assert_eq!((file.entrance, file.exit), (1, 1));
    }

    #[test]
    fn seq_binds_tighter_than_sum() {
        let text = "solve id[1] ; id[1] (+) id[2] entrance 1 exit 3\n";
        let file = parse_diagram(text, &mut loader()).unwrap();
        let seq = DiagramExpr::seq(
            DiagramExpr::Wire(WireSpec::Identity(1)),
            DiagramExpr::Wire(WireSpec::Identity(1)),
        );
        assert_eq!(
            file.expr,
            DiagramExpr::sum(seq, DiagramExpr::Wire(WireSpec::Identity(2)))
        );
    }

    #[test]
    fn semicolon_closes_bindings_without_ambiguity() {
        let text = "let A = id[1] ; id[1];\nlet B = A ; A;\nsolve B entrance 1 exit 1\n";
        let file = parse_diagram(text, &mut loader()).unwrap();
        assert_eq!(file.bindings.names(), ["A".to_string(), "B".to_string()]);
    }

    #[test]
    fn print_parse_round_trip() {
        let text = "let T = load \"task.omdp\";\nlet P = (T (+) T) ; swap[1,1];\nsolve tr[1](P (+) id[1]) entrance 1 exit 1\n";
        let file = parse_diagram(text, &mut loader()).unwrap();
        let printed = print_diagram(&file);
        let again = parse_diagram(&printed, &mut loader()).unwrap();
        assert_eq!(file.expr, again.expr);
        assert_eq!((file.entrance, file.exit), (again.entrance, again.exit));
        assert_eq!(file.bindings.names(), again.bindings.names());
        for name in file.bindings.names() {
            assert_eq!(file.bindings.get(name), again.bindings.get(name));
        }
        assert_eq!(printed, print_diagram(&again));
    }

    #[test]
    fn unbound_names_are_reported() {
        let text = "solve U entrance 1 exit 1\n";
        match parse_diagram(text, &mut loader()) {
            Err(ParseError::Unbound(n)) => assert_eq!(n, "U"),
            other => panic!("expected an unbound error, got {other:?}"),
        }
    }

    #[test]
    fn seq_arity_mismatch_names_the_join() {
        let text = "solve id[1] ; id[2] entrance 1 exit 1\n";
        match parse_diagram(text, &mut loader()) {
            Err(ParseError::Arity { node, expected, found }) => {
                assert!(node.contains("`;`"), "{node}");
                assert!(expected.contains('1'), "{expected}");
                assert!(found.contains('2'), "{found}");
            }
            other => panic!("expected an arity error, got {other:?}"),
        }
    }

    #[test]
    fn solve_indices_are_range_checked() {
        let text = "solve id[1] entrance 2 exit 1\n";
        assert!(matches!(
            parse_diagram(text, &mut loader()),
            Err(ParseError::Arity { .. })
        ));
    }

    #[test]
    fn reserved_names_cannot_be_bound() {
        let text = "let tr = id[1];\nsolve tr entrance 1 exit 1\n";
        assert!(matches!(
            parse_diagram(text, &mut loader()),
            Err(ParseError::Syntax { .. })
        ));
    }

    #[test]
    fn trace_on_too_narrow_operand_is_an_arity_error() {
        let text = "solve tr[2](id[1]) entrance 1 exit 1\n";
        match parse_diagram(text, &mut loader()) {
            Err(ParseError::Arity { node, .. }) => assert!(node.starts_with("tr[2]"), "{node}"),
            other => panic!("expected an arity error, got {other:?}"),
        }
    }
}
