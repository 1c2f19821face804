use std::collections::BTreeSet;
use std::fmt::Write as _;

use crate::store::IndexSpec;

use super::ast::*;

/// How a clause finds its first node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Anchor {
    /// The variable was bound by an earlier clause.
    Bound(String),
    IndexSeek {
        label: String,
        key: String,
    },
    LabelScanFiltered(String),
    LabelScan(String),
    FullScan,
}

impl Anchor {
    fn rank(&self) -> u8 {
        match self {
            Anchor::Bound(_) => 0,
            Anchor::IndexSeek { .. } => 1,
            Anchor::LabelScanFiltered(_) => 2,
            Anchor::LabelScan(_) => 3,
            Anchor::FullScan => 4,
        }
    }
}

/// Traverse relationship `rel` (index into the path's steps) from node
/// `from` to node `to`; `forward` is the written left-to-right direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Expand {
    pub rel: usize,
    pub from: usize,
    pub to: usize,
    pub forward: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClausePlan {
    pub clause: usize,
    pub anchor_node: usize,
    pub anchor: Anchor,
    pub expansions: Vec<Expand>,
    /// Variables shared with earlier clauses.
    pub joins: Vec<String>,
    /// WHERE conjuncts that become checkable after this clause's step `i`
    /// (0 = anchor, i = after expansion i-1).
    pub filters_after: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryPlan {
    pub clauses: Vec<ClausePlan>,
    /// Conjuncts without variables, checked once up front.
    pub constant_filters: Vec<usize>,
}

fn operand_vars(o: &Operand) -> Option<&str> {
    match o {
        Operand::Var(v) | Operand::Prop(v, _) => Some(v),
        Operand::Literal(_) => None,
    }
}

pub(crate) fn comparison_vars(c: &Comparison) -> BTreeSet<&str> {
    [operand_vars(&c.left), operand_vars(&c.right)]
        .into_iter()
        .flatten()
        .collect()
}

fn choose_anchor(node: &NodePattern, bound: &BTreeSet<String>, catalog: &[IndexSpec]) -> Anchor {
    if let Some(v) = &node.var {
        if bound.contains(v) {
            return Anchor::Bound(v.clone());
        }
    }
    match &node.label {
        Some(label) => {
            let indexed = node
                .props
                .iter()
                .find(|(k, _)| catalog.iter().any(|s| &s.label == label && &s.key == k));
            match indexed {
                Some((k, _)) => Anchor::IndexSeek {
                    label: label.clone(),
                    key: k.clone(),
                },
                None if !node.props.is_empty() => Anchor::LabelScanFiltered(label.clone()),
                None => Anchor::LabelScan(label.clone()),
            }
        }
        None => Anchor::FullScan,
    }
}

/// Plans clauses in written order; each anchors on its cheapest node and
/// expands outwards, right side first.
pub fn plan(ast: &PatternAst, catalog: &[IndexSpec]) -> QueryPlan {
    let mut bound: BTreeSet<String> = BTreeSet::new();
    let mut pending: Vec<usize> = Vec::new();
    let mut constant_filters = Vec::new();
    for (i, c) in ast.filters.iter().enumerate() {
        if comparison_vars(c).is_empty() {
            constant_filters.push(i);
        } else {
            pending.push(i);
        }
    }
    let mut clauses = Vec::new();
    for (ci, path) in ast.matches.iter().enumerate() {
        let (anchor_node, anchor) = path
            .nodes()
            .enumerate()
            .map(|(i, n)| (i, choose_anchor(n, &bound, catalog)))
            .min_by_key(|(i, a)| (a.rank(), *i))
            .expect("a path has at least one node");
        let mut joins: BTreeSet<String> = BTreeSet::new();
        let mut order = vec![anchor_node];
        let mut expansions = Vec::new();
        for to in anchor_node + 1..=path.steps.len() {
            expansions.push(Expand {
                rel: to - 1,
                from: to - 1,
                to,
                forward: true,
            });
            order.push(to);
        }
        for to in (0..anchor_node).rev() {
            expansions.push(Expand {
                rel: to,
                from: to + 1,
                to,
                forward: false,
            });
            order.push(to);
        }
        let mut filters_after = Vec::new();
        for step in 0..=expansions.len() {
            let mut newly: Vec<&str> = Vec::new();
            let node = path.node(order[step]);
            newly.extend(node.var.as_deref());
            if step > 0 {
                newly.extend(path.steps[expansions[step - 1].rel].0.var.as_deref());
            }
            for v in newly {
                if bound.contains(v) {
                    joins.insert(v.to_owned());
                } else {
                    bound.insert(v.to_owned());
                }
            }
            let (ready, rest): (Vec<usize>, Vec<usize>) = pending.iter().partition(|i| {
                comparison_vars(&ast.filters[**i])
                    .iter()
                    .all(|v| bound.contains(*v))
            });
            pending = rest;
            filters_after.push(ready);
        }
        clauses.push(ClausePlan {
            clause: ci,
            anchor_node,
            anchor,
            expansions,
            joins: joins.into_iter().collect(),
            filters_after,
        });
    }
    QueryPlan {
        clauses,
        constant_filters,
    }
}

fn describe_node(n: &NodePattern) -> String {
    let mut s = String::from("(");
    if let Some(v) = &n.var {
        s.push_str(v);
    }
    if let Some(l) = &n.label {
        s.push(':');
        s.push_str(l);
    }
    s.push(')');
    s
}

/// Human-readable plan; a pure function of the query and the index catalog.
pub fn explain(ast: &PatternAst, catalog: &[IndexSpec]) -> String {
    let plan = plan(ast, catalog);
    let mut out = String::new();
    if !plan.constant_filters.is_empty() {
        let _ = writeln!(out, "constant filters:");
        for f in &plan.constant_filters {
            let _ = writeln!(out, "  filter {}", ast.filters[*f]);
        }
    }
    for cp in &plan.clauses {
        let path = &ast.matches[cp.clause];
        let _ = writeln!(out, "clause {}: MATCH {}", cp.clause + 1, path);
        let anchor = describe_node(path.node(cp.anchor_node));
        let how = match &cp.anchor {
            Anchor::Bound(v) => format!("reuse binding of {v}"),
            Anchor::IndexSeek { label, key } => format!("index seek on :{label}({key})"),
            Anchor::LabelScanFiltered(l) => format!("label scan on :{l} with property filter"),
            Anchor::LabelScan(l) => format!("label scan on :{l}"),
            Anchor::FullScan => "full node scan".to_owned(),
        };
        let _ = writeln!(out, "  anchor {anchor} via {how}");
        if cp.anchor == Anchor::FullScan {
            let _ = writeln!(out, "  warning: anchor has no label, every node is visited");
        }
        for f in &cp.filters_after[0] {
            let _ = writeln!(out, "  filter {}", ast.filters[*f]);
        }
        for (i, e) in cp.expansions.iter().enumerate() {
            let rel = &path.steps[e.rel].0;
            let mut r = String::from("[");
            if let Some(v) = &rel.var {
                r.push_str(v);
            }
            r.push(':');
            r.push_str(&rel.rel_type);
            if let Some(VarLength { min, max }) = rel.var_length {
                let _ = write!(
                    r,
                    "*{min}..{}",
                    max.map_or("inf".to_owned(), |m| m.to_string())
                );
            }
            r.push(']');
            let outgoing = (rel.direction == RelDirection::Out) == e.forward;
            let arrow = if outgoing {
                format!("-{r}->")
            } else {
                format!("<-{r}-")
            };
            let _ = writeln!(
                out,
                "  expand {} {arrow} {}",
                describe_node(path.node(e.from)),
                describe_node(path.node(e.to))
            );
            for f in &cp.filters_after[i + 1] {
                let _ = writeln!(out, "  filter {}", ast.filters[*f]);
            }
        }
        for j in &cp.joins {
            let _ = writeln!(out, "  join on {j}");
        }
    }
    let items: Vec<String> = ast.returns.iter().map(ToString::to_string).collect();
    let _ = writeln!(out, "sort by bound variables, return {}", items.join(", "));
    if let Some(l) = ast.limit {
        let _ = writeln!(out, "limit {l}");
    }
    out
}
