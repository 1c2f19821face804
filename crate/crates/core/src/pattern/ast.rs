use std::fmt;

use crate::store::{format_timestamp, Comparator, PropertyValue};

#[derive(Debug, Clone, PartialEq)]
pub struct PatternAst {
    pub matches: Vec<PathPattern>,
    pub filters: Vec<Comparison>,
    pub returns: Vec<ReturnItem>,
    pub limit: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathPattern {
    pub start: NodePattern,
    pub steps: Vec<(RelPattern, NodePattern)>,
}

impl PathPattern {
    pub fn nodes(&self) -> impl Iterator<Item = &NodePattern> + '_ {
        std::iter::once(&self.start).chain(self.steps.iter().map(|(_, n)| n))
    }

    pub fn node(&self, i: usize) -> &NodePattern {
        if i == 0 {
            &self.start
        } else {
            &self.steps[i - 1].1
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct NodePattern {
    pub var: Option<String>,
    pub label: Option<String>,
    pub props: Vec<(String, PropertyValue)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RelDirection {
    /// `-[...]->`
    Out,
    /// `<-[...]-`
    In,
}

/// Hop bounds of a `*` relationship; `max: None` is unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VarLength {
    pub min: u32,
    pub max: Option<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelPattern {
    pub var: Option<String>,
    pub rel_type: String,
    pub direction: RelDirection,
    pub var_length: Option<VarLength>,
    pub props: Vec<(String, PropertyValue)>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Operand {
    Var(String),
    Prop(String, String),
    Literal(PropertyValue),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub left: Operand,
    pub op: Comparator,
    pub right: Operand,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ReturnItem {
    Var(String),
    Prop(String, String),
}

impl ReturnItem {
    pub fn var(&self) -> &str {
        match self {
            ReturnItem::Var(v) | ReturnItem::Prop(v, _) => v,
        }
    }
}

pub(crate) const KEYWORDS: [&str; 7] =
    ["MATCH", "WHERE", "AND", "RETURN", "LIMIT", "TRUE", "FALSE"];

pub(crate) fn is_keyword(s: &str) -> bool {
    KEYWORDS.iter().any(|k| k.eq_ignore_ascii_case(s)) || s.eq_ignore_ascii_case("datetime")
}

pub(crate) struct Ident<'a>(pub &'a str);

impl fmt::Display for Ident<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = self.0;
        let plain = s
            .chars()
            .next()
            .is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
            && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
            && !is_keyword(s);
        if plain {
            f.write_str(s)
        } else {
            write!(f, "`{s}`")
        }
    }
}

pub(crate) struct Literal<'a>(pub &'a PropertyValue);

fn quote(f: &mut fmt::Formatter<'_>, s: &str) -> fmt::Result {
    f.write_str("'")?;
    for c in s.chars() {
        match c {
            '\'' => f.write_str("\\'")?,
            '\\' => f.write_str("\\\\")?,
            '\n' => f.write_str("\\n")?,
            '\t' => f.write_str("\\t")?,
            '\r' => f.write_str("\\r")?,
            c => write!(f, "{c}")?,
        }
    }
    f.write_str("'")
}

impl fmt::Display for Literal<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            PropertyValue::Text(s) => quote(f, s),
            PropertyValue::Int(v) => write!(f, "{v}"),
            PropertyValue::Float(v) => write!(f, "{v:?}"),
            PropertyValue::Bool(true) => f.write_str("true"),
            PropertyValue::Bool(false) => f.write_str("false"),
            PropertyValue::Timestamp(ms) => {
                f.write_str("datetime(")?;
                quote(f, &format_timestamp(*ms))?;
                f.write_str(")")
            }
            PropertyValue::TextList(items) => {
                // lists have no literal syntax; printed as joined text
                quote(f, &items.join(","))
            }
        }
    }
}

fn write_props(f: &mut fmt::Formatter<'_>, props: &[(String, PropertyValue)]) -> fmt::Result {
    if props.is_empty() {
        return Ok(());
    }
    f.write_str(" {")?;
    for (i, (k, v)) in props.iter().enumerate() {
        if i > 0 {
            f.write_str(", ")?;
        }
        write!(f, "{}: {}", Ident(k), Literal(v))?;
    }
    f.write_str("}")
}

impl fmt::Display for NodePattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        if let Some(v) = &self.var {
            write!(f, "{}", Ident(v))?;
        }
        if let Some(l) = &self.label {
            write!(f, ":{}", Ident(l))?;
        }
        write_props(f, &self.props)?;
        f.write_str(")")
    }
}

impl fmt::Display for RelPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(if self.direction == RelDirection::In {
            "<-["
        } else {
            "-["
        })?;
        if let Some(v) = &self.var {
            write!(f, "{}", Ident(v))?;
        }
        write!(f, ":{}", Ident(&self.rel_type))?;
        match self.var_length {
            Some(VarLength { min: 1, max: None }) => f.write_str("*")?,
            Some(VarLength {
                min,
                max: Some(max),
            }) => write!(f, "*{min}..{max}")?,
            Some(VarLength { min, max: None }) => write!(f, "*{min}..")?,
            None => {}
        }
        write_props(f, &self.props)?;
        f.write_str(if self.direction == RelDirection::In {
            "]-"
        } else {
            "]->"
        })
    }
}

impl fmt::Display for PathPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.start)?;
        for (r, n) in &self.steps {
            write!(f, "{r}{n}")?;
        }
        Ok(())
    }
}

impl fmt::Display for Operand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Operand::Var(v) => write!(f, "{}", Ident(v)),
            Operand::Prop(v, k) => write!(f, "{}.{}", Ident(v), Ident(k)),
            Operand::Literal(l) => write!(f, "{}", Literal(l)),
        }
    }
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.left, self.op.symbol(), self.right)
    }
}

impl fmt::Display for ReturnItem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReturnItem::Var(v) => write!(f, "{}", Ident(v)),
            ReturnItem::Prop(v, k) => write!(f, "{}.{}", Ident(v), Ident(k)),
        }
    }
}

/// The canonical text of a query: one line, single-quoted strings.
impl fmt::Display for PatternAst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, m) in self.matches.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "MATCH {m}")?;
        }
        for (i, c) in self.filters.iter().enumerate() {
            f.write_str(if i == 0 { " WHERE " } else { " AND " })?;
            write!(f, "{c}")?;
        }
        f.write_str(" RETURN ")?;
        for (i, r) in self.returns.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{r}")?;
        }
        if let Some(l) = self.limit {
            write!(f, " LIMIT {l}")?;
        }
        Ok(())
    }
}
