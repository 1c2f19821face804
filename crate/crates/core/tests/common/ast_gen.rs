use ekg_core::pattern::ast::*;
use ekg_core::{Comparator, PropertyValue};
use proptest::prelude::*;

const RESERVED: [&str; 8] = [
    "match", "where", "and", "return", "limit", "true", "false", "datetime",
];

fn ident() -> impl Strategy<Value = String> {
    prop_oneof![
        4 => "[A-Za-z_][A-Za-z0-9_]{0,6}".prop_filter("reserved word", |s| {
            !RESERVED.contains(&s.to_ascii_lowercase().as_str())
        }),
        1 => "[A-Za-z0-9 _.:-]{1,8}",
        1 => prop::sample::select(vec!["Match".to_owned(), "limit".to_owned(), "DateTime".to_owned()]),
    ]
}

pub fn literal() -> impl Strategy<Value = PropertyValue> {
    prop_oneof![
        any::<String>().prop_map(PropertyValue::Text),
        any::<i64>().prop_map(PropertyValue::Int),
        prop::num::f64::NORMAL.prop_map(PropertyValue::Float),
        (-1e6f64..1e6).prop_map(PropertyValue::Float),
        any::<bool>().prop_map(PropertyValue::Bool),
        (0i64..4_102_444_800_000).prop_map(PropertyValue::Timestamp),
    ]
}

fn props() -> impl Strategy<Value = Vec<(String, PropertyValue)>> {
    prop::collection::vec((ident(), literal()), 0..3)
}

fn node() -> impl Strategy<Value = NodePattern> {
    (
        prop::option::of(ident()),
        prop::option::of(ident()),
        props(),
    )
        .prop_map(|(var, label, props)| NodePattern { var, label, props })
}

fn var_length() -> impl Strategy<Value = Option<VarLength>> {
    prop_oneof![
        2 => Just(None),
        1 => (1u32..5, prop::option::of(0u32..5)).prop_map(|(min, extra)| Some(VarLength {
            min,
            max: extra.map(|e| min + e),
        })),
    ]
}

fn rel() -> impl Strategy<Value = RelPattern> {
    (
        prop::option::of(ident()),
        ident(),
        prop::bool::ANY,
        var_length(),
        props(),
    )
        .prop_map(|(var, rel_type, out, var_length, props)| RelPattern {
            var,
            rel_type,
            direction: if out {
                RelDirection::Out
            } else {
                RelDirection::In
            },
            var_length,
            props,
        })
}

fn path() -> impl Strategy<Value = PathPattern> {
    (node(), prop::collection::vec((rel(), node()), 0..3))
        .prop_map(|(start, steps)| PathPattern { start, steps })
}

fn operand() -> impl Strategy<Value = Operand> {
    prop_oneof![
        ident().prop_map(Operand::Var),
        (ident(), ident()).prop_map(|(v, k)| Operand::Prop(v, k)),
        literal().prop_map(Operand::Literal),
    ]
}

fn comparator() -> impl Strategy<Value = Comparator> {
    prop::sample::select(vec![
        Comparator::Eq,
        Comparator::Ne,
        Comparator::Lt,
        Comparator::Le,
        Comparator::Gt,
        Comparator::Ge,
    ])
}

fn return_item() -> impl Strategy<Value = ReturnItem> {
    prop_oneof![
        ident().prop_map(ReturnItem::Var),
        (ident(), ident()).prop_map(|(v, k)| ReturnItem::Prop(v, k)),
    ]
}

/// Syntactically valid queries; variables need not be bound.
pub fn query() -> impl Strategy<Value = PatternAst> {
    (
        prop::collection::vec(path(), 1..3),
        prop::collection::vec(
            (operand(), comparator(), operand()).prop_map(|(left, op, right)| Comparison {
                left,
                op,
                right,
            }),
            0..3,
        ),
        prop::collection::vec(return_item(), 1..3),
        prop::option::of(1u64..1000),
    )
        .prop_map(|(matches, filters, returns, limit)| PatternAst {
            matches,
            filters,
            returns,
            limit,
        })
}
