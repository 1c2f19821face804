//! A small declarative pattern language over the event graph.
//!
//! ```text
//! MATCH (o:Entity {EntityType: 'Offer'}) <-[:E_EN]- (e1:Event) -[:DF*]-> (e2:Event)
//! WHERE e1.Activity = 'Create Offer' AND e2.Activity = 'Offer Returned'
//! RETURN e1, e2
//! ```
//!
//! Node matching is homomorphic; within one solution no relationship is
//! used twice. Rows are ordered by their bindings.

pub mod ast;
mod eval;
mod lexer;
mod parser;
mod plan;

use std::fmt;

use thiserror::Error;

use crate::store::{GraphError, NodeRef, PropertyValue, RelRef};

pub use ast::PatternAst;
pub use eval::{evaluate, evaluate_with};
pub use parser::parse;
pub use plan::{explain, plan, Anchor, ClausePlan, Expand, QueryPlan};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("syntax error at line {line}, column {column}: expected {}, found {found}", .expected.join(" or "))]
pub struct SyntaxError {
    pub line: usize,
    pub column: usize,
    pub expected: Vec<String>,
    pub found: String,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PatternError {
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
    #[error("variable `{0}` is not bound by any MATCH clause")]
    UnboundVariable(String),
    #[error("variable `{0}` is used both as a node and as a relationship")]
    VariableConflict(String),
    #[error("invalid comparison `{0}`: variables can only be compared to variables with = or <>")]
    InvalidComparison(String),
    #[error("variable-length path exceeds the cap of {cap} hops")]
    VarLengthOverflow { cap: u32 },
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EvalOptions {
    /// Hop cap for variable-length relationships.
    pub max_hops: u32,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self { max_hops: 1000 }
    }
}

/// One output value.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Node(NodeRef),
    Rel(RelRef),
    Path(Vec<RelRef>),
    Value(PropertyValue),
    Null,
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Node(n) => write!(f, "{n}"),
            Cell::Rel(r) => write!(f, "{r}"),
            Cell::Path(rs) => {
                let parts: Vec<String> = rs.iter().map(ToString::to_string).collect();
                write!(f, "[{}]", parts.join(","))
            }
            Cell::Value(v) => f.write_str(&v.to_plain_string()),
            Cell::Null => f.write_str("null"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResultTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl ResultTable {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Column `name` of every row.
    pub fn column(&self, name: &str) -> Option<Vec<&Cell>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| &r[i]).collect())
    }

    /// Space-aligned table with a header line.
    pub fn to_text(&self) -> String {
        let rendered: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| r.iter().map(ToString::to_string).collect())
            .collect();
        let mut widths: Vec<usize> = self.columns.iter().map(|c| c.chars().count()).collect();
        for row in &rendered {
            for (w, cell) in widths.iter_mut().zip(row) {
                *w = (*w).max(cell.chars().count());
            }
        }
        let line = |cells: &[String]| {
            let padded: Vec<String> = cells
                .iter()
                .zip(&widths)
                .map(|(c, w)| format!("{c:<w$}"))
                .collect();
            padded.join("  ").trim_end().to_owned() + "\n"
        };
        let mut out = line(&self.columns);
        for row in &rendered {
            out.push_str(&line(row));
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let _ = w.write_record(&self.columns);
        for row in &self.rows {
            let _ = w.write_record(row.iter().map(ToString::to_string));
        }
        String::from_utf8(w.into_inner().unwrap_or_default()).unwrap_or_default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_rendering() {
        let t = ResultTable {
            columns: vec!["e".into(), "e.Activity".into()],
            rows: vec![
                vec![Cell::Node(NodeRef(4)), Cell::Value("Create Offer".into())],
                vec![Cell::Node(NodeRef(12)), Cell::Null],
            ],
        };
        assert_eq!(
            t.to_text(),
            "e    e.Activity\nn4   Create Offer\nn12  null\n"
        );
        assert_eq!(t.to_csv(), "e,e.Activity\nn4,Create Offer\nn12,null\n");
        assert_eq!(
            t.column("e").unwrap(),
            vec![&Cell::Node(NodeRef(4)), &Cell::Node(NodeRef(12))]
        );
    }

    #[test]
    fn syntax_error_message() {
        let e = SyntaxError {
            line: 1,
            column: 16,
            expected: vec!["')'".into(), "'{'".into()],
            found: "identifier RETURN".into(),
        };
        assert_eq!(
            e.to_string(),
            "syntax error at line 1, column 16: expected ')' or '{', found identifier RETURN"
        );
    }
}
