//! Exporters for flattened models: the native component format and a PRISM
//! module.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use compmdp_core::model::{OpenMdp, Target};

use crate::dsl::{fmt_real, print_component};

/// Renders a flattened model in the native component format under the given
/// name. Flattening can leave exits accessed from several rows, which the
/// native format forbids, so the body is normalized first.
pub fn native_text(name: &str, model: &OpenMdp) -> String {
    let body = model.body().normalize_exits();
    debug_assert!(body.validate().is_ok());
    let normalized =
        OpenMdp::new(model.dom, model.cod, body).expect("normalization preserves port counts");
    print_component(&sanitize_name(name), &normalized)
}

/// Maps an arbitrary string to a legal component name: letters, digits,
/// underscores, starting with a letter or underscore.
fn sanitize_name(raw: &str) -> String {
    let mut out = String::new();
    for c in raw.chars() {
        if c.is_ascii_alphanumeric() || c == '_' {
            out.push(c);
        } else {
            out.push('_');
        }
    }
    if out.is_empty() || out.chars().next().is_some_and(|c| c.is_ascii_digit()) {
        out.insert(0, '_');
    }
    out
}

/// Renders a flattened model as a PRISM `mdp` module.
///
/// State layout: entrances first (dispatch states with a single unlabeled
/// command), then positions in model order, then one absorbing state per
/// exit, then a dead sink for action rows the model leaves undefined.
pub fn prism_text(model: &OpenMdp) -> String {
    let body = model.body();
    let m = body.entrances();
    let n = body.exits();
    let positions = body.positions();
    let pos_index: BTreeMap<&str, usize> =
        positions.iter().enumerate().map(|(i, q)| (q.as_str(), m + i)).collect();
    let exit_state = |j: usize| m + positions.len() + (j - 1);
    let dead = m + positions.len() + n;

    let state_of = |t: &Target| match t {
        Target::Position(q) => pos_index[q.as_str()],
        Target::Exit(j) => exit_state(*j),
    };

    let labels = action_labels(body.actions());

    let mut out = String::new();
    out.push_str("// Exported from an open-MDP diagram.\n");
    out.push_str("//\n");
    out.push_str("// Reward caveat: the source solver reports expected cumulative reward\n");
    out.push_str("// weighted by the probability of each run, so runs that never reach the\n");
    out.push_str("// target contribute the reward they collected, not infinity. PRISM's\n");
    out.push_str("// Rmax=? [F \"exit_j\"] assigns infinite reward to non-reaching runs and\n");
    out.push_str("// agrees with the source only when every scheduler reaches the exits\n");
    out.push_str("// almost surely.\n");
    out.push_str("mdp\n\n");

    out.push_str("// state map\n");
    for i in 1..=m {
        let _ = writeln!(out, "//   {}: entrance {i}", i - 1);
    }
    for (i, q) in positions.iter().enumerate() {
        let _ = writeln!(out, "//   {}: position {q}", m + i);
    }
    for j in 1..=n {
        let _ = writeln!(out, "//   {}: exit {j}", exit_state(j));
    }
    let _ = writeln!(out, "//   {dead}: dead sink");
    out.push('\n');

    out.push_str("module flat\n");
    let _ = writeln!(out, "  s : [0..{dead}];");
    out.push('\n');
    for i in 1..=m {
        let _ = writeln!(out, "  [] s={} -> 1:(s'={});", i - 1, state_of(body.entry(i)));
    }
    for q in positions {
        for a in body.actions() {
            let label = &labels[a.as_str()];
            let sum: f64 = body.row(q, a).map(|row| row.values().sum()).unwrap_or(0.0);
            if sum == 0.0 {
                let _ = writeln!(out, "  [{label}] s={} -> 1:(s'={dead});", pos_index[q.as_str()]);
                continue;
            }
            let row = body.row(q, a).expect("nonzero sum implies a row");
            let updates: Vec<String> = row
                .iter()
                .map(|(t, p)| format!("{}:(s'={})", fmt_real(*p), state_of(t)))
                .collect();
            let _ = writeln!(
                out,
                "  [{label}] s={} -> {};",
                pos_index[q.as_str()],
                updates.join(" + ")
            );
        }
    }
    for j in 1..=n {
        let _ = writeln!(out, "  [] s={} -> 1:(s'={});", exit_state(j), exit_state(j));
    }
    let _ = writeln!(out, "  [] s={dead} -> 1:(s'={dead});");
    out.push_str("endmodule\n\n");

    if m > 0 {
        out.push_str("init\n");
        let _ = writeln!(out, "  s < {m}");
        out.push_str("endinit\n\n");
    }

    for j in 1..=n {
        let _ = writeln!(out, "label \"exit_{j}\" = s={};", exit_state(j));
    }
    if n > 0 {
        out.push('\n');
    }

    let rewarded: Vec<(&String, f64)> = positions
        .iter()
        .map(|q| (q, body.reward(q)))
        .filter(|(_, r)| *r != 0.0)
        .collect();
    if !rewarded.is_empty() {
        out.push_str("rewards\n");
        for (q, r) in rewarded {
            let _ = writeln!(out, "  s={} : {};", pos_index[q.as_str()], fmt_real(r));
        }
        out.push_str("endrewards\n");
    }
    out
}

/// Assigns each action a PRISM-legal synchronization label, reusing the
/// action name when it already qualifies.
fn action_labels(actions: &[String]) -> BTreeMap<&str, String> {
    let mut used: Vec<String> = Vec::new();
    let mut out = BTreeMap::new();
    for (i, a) in actions.iter().enumerate() {
        let legal = !a.is_empty()
            && a.chars().next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
            && a.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
        let mut label = if legal { a.clone() } else { format!("act{i}") };
        while used.contains(&label) {
            label = format!("act{i}_{label}");
        }
        used.push(label.clone());
        out.insert(a.as_str(), label);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use compmdp_core::algebra::seq_ro;
    use compmdp_core::expr::{Bindings, DiagramExpr, WireSpec};
    use compmdp_core::flatten::flatten;
    use compmdp_core::model::{Row, RoMdp};

    use crate::dsl::parse_component;

    fn coin(action: &str, heads: f64) -> RoMdp {
        let mut row = Row::new();
        row.insert(Target::Exit(1), heads);
        row.insert(Target::Position("c".into()), 1.0 - heads);
        let mut trans = BTreeMap::new();
        trans.insert(("c".into(), action.into()), row);
        RoMdp::new(
            1,
            1,
            vec![action.into()],
            vec!["c".into()],
            [("c".into(), 1.5)].into_iter().collect(),
            vec![Target::Position("c".into())],
            trans,
        )
    }

    #[test]
    fn native_text_reparses_after_padding() {
        // Sequencing components with different action sets pads rows, which
        // duplicates exit access across actions; the exporter must hand back
        // a valid component file anyway.
        let both = ["a".to_string(), "b".to_string()];
        let left = coin("a", 0.5).pad_actions(&both);
        let right = coin("b", 0.25).pad_actions(&both);
        let composed = seq_ro(&left, &right.rename_positions(|q| format!("r_{q}"))).unwrap();
        assert!(!composed.validate().is_ok());
        let text = native_text("flat", &OpenMdp::from_rightward(composed));
        let def = parse_component(&text).unwrap();
        assert_eq!(def.name, "flat");
        assert_eq!(def.model.body().entrances(), 1);
        assert_eq!(def.model.body().exits(), 1);
    }

    #[test]
    fn sanitize_name_makes_identifiers() {
        assert_eq!(sanitize_name("out-1.flat"), "out_1_flat");
        assert_eq!(sanitize_name("9lives"), "_9lives");
        assert_eq!(sanitize_name(""), "_");
    }

    #[test]
    fn prism_text_covers_every_action_row() {
        let mut row = Row::new();
        row.insert(Target::Exit(1), 1.0);
        let mut trans = BTreeMap::new();
        trans.insert(("q".into(), "go".into()), row);
        let body = RoMdp::new(
            1,
            2,
            vec!["go".into(), "2nd".into()],
            vec!["q".into()],
            [("q".into(), 2.0)].into_iter().collect(),
            vec![Target::Position("q".into())],
            trans,
        );
        let text = prism_text(&OpenMdp::from_rightward(body));
        assert!(text.contains("mdp\n"));
        assert!(text.contains("s : [0..4];"));
        assert!(text.contains("[go] s=1 -> 1:(s'=2);"));
        // The undeclared action row routes to the dead sink under a
        // sanitized label.
        assert!(text.contains("[act1] s=1 -> 1:(s'=4);"));
        assert!(text.contains("label \"exit_1\" = s=2;"));
        assert!(text.contains("label \"exit_2\" = s=3;"));
        assert!(text.contains("init\n  s < 1\nendinit"));
        assert!(text.contains("rewards\n  s=1 : 2;\nendrewards"));
    }

    #[test]
    fn prism_text_of_wire_has_no_rewards_block() {
        let expr = DiagramExpr::Wire(WireSpec::Identity(2));
        let flat = flatten(&expr, &Bindings::new()).unwrap();
        let text = prism_text(&flat);
        assert!(!text.contains("rewards"));
        assert!(text.contains("[] s=0 -> 1:(s'=2);"));
        assert!(text.contains("[] s=1 -> 1:(s'=3);"));
    }
}
