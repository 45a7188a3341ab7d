//! Parsers and printers for the two text formats: component files
//! describing a single open MDP, and diagram files composing them.

mod component;
mod diagram;
mod lexer;

pub use component::{parse_component, print_component, ComponentDef};
pub use diagram::{
    parse_diagram, parse_diagram_file, print_diagram, DiagramFile, FileLoader, Loader, MapLoader,
};

use compmdp_core::model::ValidationError;
use thiserror::Error;

/// Errors from parsing either text format.
#[derive(Debug, Error)]
pub enum ParseError {
    #[error("{line}:{col}: expected {expected}")]
    Syntax { line: usize, col: usize, expected: String },
    #[error("{0}")]
    Validation(ValidationError),
    #[error("unbound name `{0}`")]
    Unbound(String),
    #[error("arity mismatch at {node}: expected {expected}, found {found}")]
    Arity { node: String, expected: String, found: String },
    #[error("cannot load `{path}`: {reason}")]
    Load { path: String, reason: String },
}

/// Renders a real with up to 12 significant digits, trimming trailing
/// zeros. Values whose decimal exponent is far from zero fall back to
/// scientific notation.
pub fn fmt_real(x: f64) -> String {
    if x == 0.0 {
        return String::from("0");
    }
    let exp = x.abs().log10().floor() as i32;
    if (-4..=11).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        let s = format!("{x:.11e}");
        match s.split_once('e') {
            Some((mantissa, e)) => format!("{}e{e}", trim_zeros(mantissa.to_string())),
            None => s,
        }
    }
}

fn trim_zeros(mut s: String) -> String {
    if s.contains('.') {
        while s.ends_with('0') {
            s.pop();
        }
        if s.ends_with('.') {
            s.pop();
        }
    }
    s
}
