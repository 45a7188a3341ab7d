//! The component file format: one open MDP per file.

use std::collections::BTreeMap;

use compmdp_core::model::{Arity, OpenMdp, Row, RoMdp, Target, ValidationError, ValidationReport};

use super::lexer::{Cursor, Tok};
use super::{fmt_real, ParseError};

/// A parsed component file: the declared name and the model.
#[derive(Clone, Debug, PartialEq)]
pub struct ComponentDef {
    pub name: String,
    pub model: OpenMdp,
}

pub fn parse_component(text: &str) -> Result<ComponentDef, ParseError> {
    let mut cur = Cursor::new(text)?;
    match cur.peek() {
        Some(Tok::Name(kw)) if kw == "mdp" || kw == "omdp" => {
            cur.bump();
        }
        _ => return Err(cur.err("`mdp` or `omdp`")),
    }
    let name = cur.expect_name("a component name")?;
    cur.expect(Tok::LBrace, "`{`")?;

    cur.expect_keyword("arity")?;
    let (dom, cod) = parse_arity(&mut cur)?;
    let entrances = dom.right + cod.left;
    let exits = cod.right + dom.left;

    cur.expect_keyword("actions")?;
    cur.expect(Tok::LBracket, "`[`")?;
    let mut actions = vec![declared_name(&mut cur, "an action name")?];
    while matches!(cur.peek(), Some(Tok::Comma)) {
        cur.bump();
        actions.push(declared_name(&mut cur, "an action name")?);
    }
    cur.expect(Tok::RBracket, "`]`")?;

    cur.expect_keyword("positions")?;
    cur.expect(Tok::LBrace, "`{`")?;
    let mut positions = Vec::new();
    let mut rewards = BTreeMap::new();
    let mut extra = ValidationReport::default();
    while matches!(cur.peek(), Some(Tok::Name(_))) {
        let q = declared_name(&mut cur, "a position name")?;
        cur.expect_keyword("reward")?;
        let r = cur.expect_real("a reward value")?;
        if rewards.insert(q.clone(), r).is_some() {
            extra.push(format!("position {q} declared twice"));
        } else {
            positions.push(q);
        }
    }
    cur.expect(Tok::RBrace, "`}`")?;

    cur.expect_keyword("entry")?;
    let mut entry_map: BTreeMap<usize, Target> = BTreeMap::new();
    let mut saw_entry = false;
    loop {
        if cur.eat_keyword("entry") {
            continue;
        }
        if !matches!(cur.peek(), Some(Tok::Int(_))) {
            break;
        }
        saw_entry = true;
        let i = cur.expect_int("an entrance index")?;
        cur.expect(Tok::Arrow, "`->`")?;
        let t = parse_target(&mut cur)?;
        if i < 1 || i > entrances {
            extra.push(format!("entry for unknown entrance {i} (model has {entrances})"));
        } else if entry_map.insert(i, t).is_some() {
            extra.push(format!("entrance {i} assigned twice"));
        }
    }
    if !saw_entry && entrances > 0 {
        return Err(cur.err("an entrance index"));
    }
    let mut entry = Vec::with_capacity(entrances);
    for i in 1..=entrances {
        match entry_map.remove(&i) {
            Some(t) => entry.push(t),
            None => extra.push(format!("entrance {i} has no entry target")),
        }
    }

    let mut trans: BTreeMap<(String, String), Row> = BTreeMap::new();
    while matches!(cur.peek(), Some(Tok::Name(kw)) if kw == "trans") {
        cur.bump();
        let q = cur.expect_name("a position name")?;
        let a = cur.expect_name("an action name")?;
        cur.expect(Tok::LBrace, "`{`")?;
        let mut row = Row::new();
        loop {
            let t = parse_target(&mut cur)?;
            cur.expect(Tok::Colon, "`:`")?;
            let p = cur.expect_real("a probability")?;
            *row.entry(t).or_insert(0.0) += p;
            if matches!(cur.peek(), Some(Tok::Comma)) {
                cur.bump();
            } else {
                break;
            }
        }
        cur.expect(Tok::RBrace, "`}`")?;
        if trans.insert((q.clone(), a.clone()), row).is_some() {
            extra.push(format!("duplicate transition row for ({q}, {a})"));
        }
    }
    cur.expect(Tok::RBrace, "`}`")?;
    cur.expect_end()?;

    let body = RoMdp::new(entrances, exits, actions, positions, rewards, entry, trans);
    let mut report = body.validate();
    for line in extra.violations() {
        report.push(line.clone());
    }
    if !report.is_ok() {
        return Err(ParseError::Validation(ValidationError(report)));
    }
    let model = OpenMdp::new(dom, cod, body).map_err(ParseError::Validation)?;
    Ok(ComponentDef { name, model })
}

fn parse_arity(cur: &mut Cursor) -> Result<(Arity, Arity), ParseError> {
    let dom = parse_arity_side(cur)?;
    cur.expect(Tok::Arrow, "`->`")?;
    let cod = parse_arity_side(cur)?;
    Ok((dom, cod))
}

fn parse_arity_side(cur: &mut Cursor) -> Result<Arity, ParseError> {
    match cur.peek() {
        Some(Tok::Int(_)) => Ok(Arity::rightward(cur.expect_int("a port count")?)),
        Some(Tok::LParen) => {
            cur.bump();
            let right = cur.expect_int("a rightward port count")?;
            cur.expect(Tok::Comma, "`,`")?;
            let left = cur.expect_int("a leftward port count")?;
            cur.expect(Tok::RParen, "`)`")?;
            Ok(Arity::new(right, left))
        }
        _ => Err(cur.err("a port count or `(`")),
    }
}

fn parse_target(cur: &mut Cursor) -> Result<Target, ParseError> {
    match cur.peek() {
        Some(Tok::Name(n)) if n == "exit" => {
            cur.bump();
            Ok(Target::Exit(cur.expect_int("an exit index")?))
        }
        Some(Tok::Name(_)) => Ok(Target::Position(cur.expect_name("a position name")?)),
        _ => Err(cur.err("a position name or `exit`")),
    }
}

/// A declared name; `exit` is reserved so targets stay unambiguous.
fn declared_name(cur: &mut Cursor, what: &str) -> Result<String, ParseError> {
    match cur.peek() {
        Some(Tok::Name(n)) if n == "exit" => Err(cur.err(format!("{what} other than `exit`"))),
        _ => cur.expect_name(what),
    }
}

/// Canonical component text. Parsing the output yields a model equal up to
/// the 12-significant-digit rounding of [`fmt_real`].
pub fn print_component(name: &str, model: &OpenMdp) -> String {
    let body = model.body();
    let mut out = String::new();
    out.push_str(&format!("omdp {name} {{\n"));
    let (dom, cod) = (model.dom, model.cod);
    if dom.left == 0 && cod.left == 0 {
        out.push_str(&format!("  arity {} -> {}\n", dom.right, cod.right));
    } else {
        out.push_str(&format!(
            "  arity ({}, {}) -> ({}, {})\n",
            dom.right, dom.left, cod.right, cod.left
        ));
    }
    out.push_str(&format!("  actions [{}]\n", body.actions().join(", ")));
    out.push_str("  positions {\n");
    for q in body.positions() {
        out.push_str(&format!("    {q} reward {}\n", fmt_real(body.reward(q))));
    }
    out.push_str("  }\n");
    for (i, t) in body.entry_targets().iter().enumerate() {
        out.push_str(&format!("  entry {} -> {}\n", i + 1, target_text(t)));
    }
    for ((q, a), row) in body.rows() {
        let cells: Vec<String> = row
            .iter()
            .map(|(t, p)| format!("{} : {}", target_text(t), fmt_real(*p)))
            .collect();
        out.push_str(&format!("  trans {q} {a} {{ {} }}\n", cells.join(", ")));
    }
    out.push_str("}\n");
    out
}

fn target_text(t: &Target) -> String {
    match t {
        Target::Position(q) => q.clone(),
        Target::Exit(j) => format!("exit {j}"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TASK: &str = "omdp task {\n  arity 1 -> 1\n  actions [move]\n  positions {\n    t reward 4\n  }\n  entry 1 -> t\n  trans t move { t : 0.2, exit 1 : 0.8 }\n}\n";

    #[test]
    fn parses_task_component() {
        let def = parse_component(TASK).unwrap();
        assert_eq!(def.name, "task");
        let body = def.model.body();
        assert_eq!(body.positions(), ["t".to_string()]);
        assert_eq!(body.reward("t"), 4.0);
        let row = body.row("t", "move").unwrap();
        assert_eq!(row[&Target::Exit(1)], 0.8);
        assert_eq!(row[&Target::Position("t".into())], 0.2);
    }

    #[test]
    fn print_parse_round_trip_is_exact() {
        let def = parse_component(TASK).unwrap();
        let printed = print_component(&def.name, &def.model);
        assert_eq!(printed, TASK);
        let again = parse_component(&printed).unwrap();
        assert_eq!(again, def);
    }

    #[test]
    fn missing_entry_clause_is_a_syntax_error() {
        let text = "omdp broken {\n  arity 1 -> 1\n  actions [a]\n  positions { q reward 1 }\n  trans q a { exit 1 : 1 }\n}\n";
        match parse_component(text) {
            Err(ParseError::Syntax { line, expected, .. }) => {
                assert_eq!(line, 5);
                assert!(expected.contains("entry"), "{expected}");
            }
            other => panic!("expected a syntax error, got {other:?}"),
        }
    }

    #[test]
    fn bad_row_sum_is_a_validation_error() {
        let text = "omdp leak {\n  arity 1 -> 1\n  actions [a]\n  positions { q reward 1 }\n  entry 1 -> q\n  trans q a { q : 0.3, exit 1 : 0.6 }\n}\n";
        match parse_component(text) {
            Err(ParseError::Validation(e)) => {
                assert!(format!("{e}").contains("row sum"), "{e}");
            }
            other => panic!("expected a validation error, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_row_is_reported() {
        let text = "omdp dup {\n  arity 1 -> 1\n  actions [a]\n  positions { q reward 1 }\n  entry 1 -> q\n  trans q a { exit 1 : 1 }\n  trans q a { q : 1 }\n}\n";
        match parse_component(text) {
            Err(ParseError::Validation(e)) => {
                assert!(format!("{e}").contains("duplicate transition row"), "{e}");
            }
            other => panic!("expected a validation error, got {other:?}"),
        }
    }

    #[test]
    fn bidirectional_arity_reads_paired_counts() {
        let text = "omdp bidi {\n  arity (1, 1) -> (1, 1)\n  actions [a]\n  positions { q reward 0 }\n  entry 1 -> q\n  entry 2 -> q\n  trans q a { exit 1 : 0.5, exit 2 : 0.5 }\n}\n";
        let def = parse_component(text).unwrap();
        assert_eq!(def.model.dom, Arity::new(1, 1));
        assert_eq!(def.model.cod, Arity::new(1, 1));
        assert_eq!(def.model.body().entrances(), 2);
        assert_eq!(def.model.body().exits(), 2);
    }

    #[test]
    fn exit_is_reserved_in_declarations() {
        let text = "omdp bad {\n  arity 1 -> 1\n  actions [a]\n  positions { exit reward 1 }\n  entry 1 -> exit 1\n}\n";
        assert!(matches!(parse_component(text), Err(ParseError::Syntax { .. })));
    }
}
