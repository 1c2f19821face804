use std::collections::{BTreeMap, HashMap, HashSet};

use crate::store::{
    Comparator, LabeledPropertyGraph, NodeRef, PropertyValue, RelRef, Relationship,
};

use super::ast::*;
use super::plan::{plan, Anchor, Expand, QueryPlan};
use super::{Cell, EvalOptions, PatternError, ResultTable};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum Binding {
    Node(NodeRef),
    Rel(RelRef),
    Rels(Vec<RelRef>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum VarKind {
    Node,
    Rel,
    Path,
}

/// Evaluates `ast` with default options.
pub fn evaluate(
    graph: &LabeledPropertyGraph,
    ast: &PatternAst,
) -> Result<ResultTable, PatternError> {
    evaluate_with(graph, ast, &EvalOptions::default())
}

pub fn evaluate_with(
    graph: &LabeledPropertyGraph,
    ast: &PatternAst,
    options: &EvalOptions,
) -> Result<ResultTable, PatternError> {
    let vars = check(ast)?;
    let columns: Vec<String> = ast.returns.iter().map(ToString::to_string).collect();
    for &f in &plan(ast, &[]).constant_filters {
        let c = &ast.filters[f];
        if let (Operand::Literal(l), Operand::Literal(r)) = (&c.left, &c.right) {
            if !c.op.eval(l, r)? {
                return Ok(ResultTable {
                    columns,
                    rows: Vec::new(),
                });
            }
        }
    }

    // Sort key: returned variables first, then the remaining named ones by name.
    let mut key_vars: Vec<&str> = Vec::new();
    for item in &ast.returns {
        if !key_vars.contains(&item.var()) {
            key_vars.push(item.var());
        }
    }
    let mut rest: Vec<&str> = vars
        .keys()
        .copied()
        .filter(|v| !key_vars.contains(v))
        .collect();
    rest.sort_unstable();
    key_vars.extend(rest);

    let slots: HashMap<&str, usize> = key_vars.iter().enumerate().map(|(i, v)| (*v, i)).collect();
    let mut search = Search {
        graph,
        ast,
        plan: plan(ast, graph.index_specs()),
        cap: options.max_hops,
        slots,
        allowed: HashMap::new(),
        bindings: vec![None; key_vars.len()],
        positions: ast
            .matches
            .iter()
            .map(|p| vec![None; p.steps.len() + 1])
            .collect(),
        used: HashSet::new(),
        solutions: Vec::new(),
    };
    search.prepare()?;
    search.clause(0)?;

    let mut solutions = std::mem::take(&mut search.solutions);
    solutions.sort();
    if let Some(limit) = ast.limit {
        solutions.truncate(usize::try_from(limit).unwrap_or(usize::MAX));
    }
    let rows = solutions
        .into_iter()
        .map(|key| {
            ast.returns
                .iter()
                .map(|item| project(graph, item, &key[search.slots[item.var()]]))
                .collect()
        })
        .collect();
    Ok(ResultTable { columns, rows })
}

fn project(graph: &LabeledPropertyGraph, item: &ReturnItem, b: &Binding) -> Cell {
    match (item, b) {
        (ReturnItem::Var(_), Binding::Node(n)) => Cell::Node(*n),
        (ReturnItem::Var(_), Binding::Rel(r)) => Cell::Rel(*r),
        (ReturnItem::Var(_), Binding::Rels(rs)) => Cell::Path(rs.clone()),
        (ReturnItem::Prop(_, k), Binding::Node(n)) => graph
            .node(*n)
            .ok()
            .and_then(|n| n.prop(k))
            .map_or(Cell::Null, |v| Cell::Value(v.clone())),
        (ReturnItem::Prop(_, k), Binding::Rel(r)) => graph
            .relationship(*r)
            .ok()
            .and_then(|r| r.prop(k))
            .map_or(Cell::Null, |v| Cell::Value(v.clone())),
        (ReturnItem::Prop(..), Binding::Rels(_)) => Cell::Null,
    }
}

/// Static checks; returns every named variable with its kind.
fn check<'q>(ast: &'q PatternAst) -> Result<BTreeMap<&'q str, VarKind>, PatternError> {
    let mut vars: BTreeMap<&'q str, VarKind> = BTreeMap::new();
    let mut declare = |v: &'q Option<String>, kind: VarKind| -> Result<(), PatternError> {
        if let Some(v) = v {
            match vars.get(v.as_str()) {
                Some(k) if *k != kind => return Err(PatternError::VariableConflict(v.clone())),
                Some(_) => {}
                None => {
                    vars.insert(v, kind);
                }
            }
        }
        Ok(())
    };
    for path in &ast.matches {
        declare(&path.start.var, VarKind::Node)?;
        for (rel, node) in &path.steps {
            let kind = if rel.var_length.is_some() {
                VarKind::Path
            } else {
                VarKind::Rel
            };
            declare(&rel.var, kind)?;
            declare(&node.var, VarKind::Node)?;
        }
    }
    let known = |v: &str| -> Result<(), PatternError> {
        if vars.contains_key(v) {
            Ok(())
        } else {
            Err(PatternError::UnboundVariable(v.to_owned()))
        }
    };
    for c in &ast.filters {
        for o in [&c.left, &c.right] {
            if let Operand::Var(v) | Operand::Prop(v, _) = o {
                known(v)?;
            }
        }
        let left_var = matches!(c.left, Operand::Var(_));
        let right_var = matches!(c.right, Operand::Var(_));
        if (left_var || right_var)
            && !(left_var && right_var && matches!(c.op, Comparator::Eq | Comparator::Ne))
        {
            return Err(PatternError::InvalidComparison(c.to_string()));
        }
    }
    for item in &ast.returns {
        known(item.var())?;
    }
    Ok(vars)
}

enum Value<'a> {
    Prop(&'a PropertyValue),
    Bound(&'a Binding),
    Missing,
}

struct Search<'a> {
    graph: &'a LabeledPropertyGraph,
    ast: &'a PatternAst,
    plan: QueryPlan,
    cap: u32,
    slots: HashMap<&'a str, usize>,
    /// Nodes matching each labeled node pattern that carries properties,
    /// keyed by (clause, position).
    allowed: HashMap<(usize, usize), HashSet<NodeRef>>,
    bindings: Vec<Option<Binding>>,
    positions: Vec<Vec<Option<NodeRef>>>,
    used: HashSet<RelRef>,
    solutions: Vec<Vec<Binding>>,
}

/// Which variable slot a bind call filled, so it can be undone.
type Undo = Option<usize>;

impl<'a> Search<'a> {
    fn prepare(&mut self) -> Result<(), PatternError> {
        for (ci, path) in self.ast.matches.iter().enumerate() {
            for (i, node) in path.nodes().enumerate() {
                if let (Some(label), false) = (&node.label, node.props.is_empty()) {
                    let preds: Vec<_> = node
                        .props
                        .iter()
                        .map(|(k, v)| crate::store::Predicate::eq(k.clone(), v.clone()))
                        .collect();
                    let found = self.graph.find_nodes(label, &preds)?;
                    self.allowed.insert((ci, i), found.into_iter().collect());
                }
            }
        }
        Ok(())
    }

    fn node_ok(&self, ci: usize, i: usize, n: NodeRef) -> Result<bool, PatternError> {
        if let Some(set) = self.allowed.get(&(ci, i)) {
            return Ok(set.contains(&n));
        }
        let pat = self.ast.matches[ci].node(i);
        let node = self.graph.node(n)?;
        if let Some(l) = &pat.label {
            if !node.has_label(l) {
                return Ok(false);
            }
        }
        props_match(&pat.props, |k| node.prop(k))
    }

    fn rel_ok(&self, pat: &RelPattern, rel: &Relationship) -> Result<bool, PatternError> {
        if rel.rel_type != pat.rel_type {
            return Ok(false);
        }
        props_match(&pat.props, |k| rel.prop(k))
    }

    fn bind(&mut self, var: &Option<String>, b: Binding) -> Option<Undo> {
        let Some(v) = var else { return Some(None) };
        let slot = self.slots[v.as_str()];
        match &self.bindings[slot] {
            Some(existing) if *existing == b => Some(None),
            Some(_) => None,
            None => {
                self.bindings[slot] = Some(b);
                Some(Some(slot))
            }
        }
    }

    fn unbind(&mut self, undo: Undo) {
        if let Some(slot) = undo {
            self.bindings[slot] = None;
        }
    }

    /// Places `n` at position `i` of clause `ci`, then continues at `step`.
    fn place(&mut self, ci: usize, i: usize, n: NodeRef, step: usize) -> Result<(), PatternError> {
        if !self.node_ok(ci, i, n)? {
            return Ok(());
        }
        let ast = self.ast;
        let var = &ast.matches[ci].node(i).var;
        let Some(undo) = self.bind(var, Binding::Node(n)) else {
            return Ok(());
        };
        self.positions[ci][i] = Some(n);
        let r = self.step(ci, step);
        self.positions[ci][i] = None;
        self.unbind(undo);
        r
    }

    fn clause(&mut self, ci: usize) -> Result<(), PatternError> {
        if ci == self.ast.matches.len() {
            let key = self
                .bindings
                .iter()
                .map(|b| b.clone().expect("all variables bound"))
                .collect();
            self.solutions.push(key);
            return Ok(());
        }
        let cp = &self.plan.clauses[ci];
        let anchor = cp.anchor_node;
        let candidates: Vec<NodeRef> = match &cp.anchor {
            Anchor::Bound(v) => match &self.bindings[self.slots[v.as_str()]] {
                Some(Binding::Node(n)) => vec![*n],
                _ => Vec::new(),
            },
            Anchor::IndexSeek { .. } | Anchor::LabelScanFiltered(_) => {
                let mut v: Vec<NodeRef> = self.allowed[&(ci, anchor)].iter().copied().collect();
                v.sort_unstable();
                v
            }
            Anchor::LabelScan(l) => self.graph.nodes_with_label(l).map(|n| n.id).collect(),
            Anchor::FullScan => self.graph.nodes().map(|n| n.id).collect(),
        };
        for n in candidates {
            self.place(ci, anchor, n, 0)?;
        }
        Ok(())
    }

    fn filters_hold(&self, ci: usize, step: usize) -> Result<bool, PatternError> {
        let ast = self.ast;
        for &f in &self.plan.clauses[ci].filters_after[step] {
            if !self.compare(&ast.filters[f])? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    fn value(&self, o: &'a Operand) -> Result<Value<'_>, PatternError> {
        Ok(match o {
            Operand::Literal(v) => Value::Prop(v),
            Operand::Var(v) => match &self.bindings[self.slots[v.as_str()]] {
                Some(b) => Value::Bound(b),
                None => Value::Missing,
            },
            Operand::Prop(v, k) => {
                let found = match &self.bindings[self.slots[v.as_str()]] {
                    Some(Binding::Node(n)) => self.graph.node(*n)?.prop(k),
                    Some(Binding::Rel(r)) => self.graph.relationship(*r)?.prop(k),
                    _ => None,
                };
                found.map_or(Value::Missing, Value::Prop)
            }
        })
    }

    fn compare(&self, c: &'a Comparison) -> Result<bool, PatternError> {
        match (self.value(&c.left)?, self.value(&c.right)?) {
            (Value::Bound(l), Value::Bound(r)) => Ok(match c.op {
                Comparator::Eq => l == r,
                _ => l != r,
            }),
            (Value::Prop(l), Value::Prop(r)) => Ok(c.op.eval(l, r)?),
            _ => Ok(false),
        }
    }

    fn step(&mut self, ci: usize, step: usize) -> Result<(), PatternError> {
        if !self.filters_hold(ci, step)? {
            return Ok(());
        }
        let Some(&e) = self.plan.clauses[ci].expansions.get(step) else {
            return self.clause(ci + 1);
        };
        let ast = self.ast;
        let pat = &ast.matches[ci].steps[e.rel].0;
        let from = self.positions[ci][e.from].expect("expansion source is placed");
        match pat.var_length {
            None => self.expand_one(ci, step, e, pat, from),
            Some(VarLength { min, max }) => {
                if let Some(var) = &pat.var {
                    if let Some(Binding::Rels(path)) = &self.bindings[self.slots[var.as_str()]] {
                        let path = path.clone();
                        return self.follow_bound(ci, step, e, pat, from, &path);
                    }
                }
                let mut trail = Vec::new();
                self.expand_var(ci, step, e, pat, from, min, max, &mut trail)
            }
        }
    }

    /// Relationships leaving `from` in the traversal direction, paired with
    /// the node at their far end.
    fn incident(
        &self,
        e: Expand,
        pat: &RelPattern,
        from: NodeRef,
    ) -> Vec<(&'a Relationship, NodeRef)> {
        let g: &'a LabeledPropertyGraph = self.graph;
        let outgoing = (pat.direction == RelDirection::Out) == e.forward;
        let ty = pat.rel_type.as_str();
        if outgoing {
            g.out_rels(from, None)
                .filter(|r| r.rel_type == ty)
                .map(|r| (r, r.target))
                .collect()
        } else {
            g.in_rels(from, None)
                .filter(|r| r.rel_type == ty)
                .map(|r| (r, r.source))
                .collect()
        }
    }

    fn expand_one(
        &mut self,
        ci: usize,
        step: usize,
        e: Expand,
        pat: &RelPattern,
        from: NodeRef,
    ) -> Result<(), PatternError> {
        let bound = pat
            .var
            .as_ref()
            .and_then(|v| match &self.bindings[self.slots[v.as_str()]] {
                Some(Binding::Rel(r)) => Some(*r),
                _ => None,
            });
        for (rel, to) in self.incident(e, pat, from) {
            match bound {
                Some(r) if r != rel.id => continue,
                Some(_) => {}
                None if self.used.contains(&rel.id) => continue,
                None => {}
            }
            if !self.rel_ok(pat, rel)? {
                continue;
            }
            let Some(undo) = self.bind(&pat.var, Binding::Rel(rel.id)) else {
                continue;
            };
            let fresh = bound.is_none() && self.used.insert(rel.id);
            let r = self.place(ci, e.to, to, step + 1);
            if fresh {
                self.used.remove(&rel.id);
            }
            self.unbind(undo);
            r?;
        }
        Ok(())
    }

    #[allow(clippy::too_many_arguments)]
    fn expand_var(
        &mut self,
        ci: usize,
        step: usize,
        e: Expand,
        pat: &RelPattern,
        at: NodeRef,
        min: u32,
        max: Option<u32>,
        trail: &mut Vec<RelRef>,
    ) -> Result<(), PatternError> {
        let depth = trail.len() as u32;
        if depth >= min {
            let mut written = trail.clone();
            if !e.forward {
                written.reverse();
            }
            if let Some(undo) = self.bind(&pat.var, Binding::Rels(written)) {
                let r = self.place(ci, e.to, at, step + 1);
                self.unbind(undo);
                r?;
            }
        }
        if max.is_some_and(|m| depth >= m) {
            return Ok(());
        }
        let mut next = Vec::new();
        for (rel, to) in self.incident(e, pat, at) {
            if !self.used.contains(&rel.id) && self.rel_ok(pat, rel)? {
                next.push((rel.id, to));
            }
        }
        if depth >= self.cap {
            return if next.is_empty() {
                Ok(())
            } else {
                Err(PatternError::VarLengthOverflow { cap: self.cap })
            };
        }
        for (rel, to) in next {
            self.used.insert(rel);
            trail.push(rel);
            let r = self.expand_var(ci, step, e, pat, to, min, max, trail);
            trail.pop();
            self.used.remove(&rel);
            r?;
        }
        Ok(())
    }

    /// A path variable bound by an earlier clause must be walkable again here.
    fn follow_bound(
        &mut self,
        ci: usize,
        step: usize,
        e: Expand,
        pat: &RelPattern,
        from: NodeRef,
        path: &[RelRef],
    ) -> Result<(), PatternError> {
        let VarLength { min, max } = pat.var_length.expect("path variable");
        let len = path.len() as u32;
        if len < min || max.is_some_and(|m| len > m) {
            return Ok(());
        }
        let mut order = path.to_vec();
        if !e.forward {
            order.reverse();
        }
        let mut at = from;
        for r in order {
            let Some((rel, to)) = self
                .incident(e, pat, at)
                .into_iter()
                .find(|(rel, _)| rel.id == r)
            else {
                return Ok(());
            };
            if !self.rel_ok(pat, rel)? {
                return Ok(());
            }
            at = to;
        }
        self.place(ci, e.to, at, step + 1)
    }
}

fn props_match<'p>(
    wanted: &[(String, PropertyValue)],
    get: impl Fn(&str) -> Option<&'p PropertyValue>,
) -> Result<bool, PatternError> {
    for (k, v) in wanted {
        match get(k) {
            Some(have) if Comparator::Eq.eval(have, v)? => {}
            _ => return Ok(false),
        }
    }
    Ok(true)
}
