use proptest::prelude::*;
use sqlmend::query::{
    parse_lenient, print, BoolOp, CmpOp, Comparison, Direction, Operand, OrderBy, Predicate, Query,
    SelectItem, SelectList,
};

const COLUMNS: [&str; 4] = ["item", "price", "qty", "CUI2"];

fn column() -> impl Strategy<Value = String> {
    prop::sample::select(&COLUMNS[..]).prop_map(str::to_string)
}

fn constant() -> impl Strategy<Value = Operand> {
    prop_oneof![
        (-1000i64..1000).prop_map(Operand::Int),
        "[a-zA-Z0-9 _'.]{0,8}".prop_map(Operand::Str),
    ]
}

fn comparison() -> impl Strategy<Value = Comparison> {
    let op = prop::sample::select(&CmpOp::ALL[..]);
    prop_oneof![
        (column(), op.clone(), constant()).prop_map(|(c, op, k)| Comparison::new(
            Operand::Column(c),
            op,
            k
        )),
        (constant(), op.clone(), column()).prop_map(|(k, op, c)| Comparison::new(
            k,
            op,
            Operand::Column(c)
        )),
        (column(), op, column()).prop_map(|(a, op, b)| Comparison::new(
            Operand::Column(a),
            op,
            Operand::Column(b)
        )),
    ]
}

fn predicate() -> impl Strategy<Value = Predicate> {
    prop::collection::vec(comparison(), 1..=5).prop_flat_map(|leaves| {
        let n = leaves.len() - 1;
        prop::collection::vec(prop_oneof![Just(BoolOp::And), Just(BoolOp::Or)], n).prop_map(
            move |connectors| Predicate {
                leaves: leaves.clone(),
                connectors,
            },
        )
    })
}

fn select_list() -> impl Strategy<Value = SelectList> {
    prop_oneof![
        Just(SelectList::Star),
        prop::collection::vec((column(), prop::option::of("x[0-9]")), 1..=3).prop_map(|items| {
            SelectList::Items(
                items
                    .into_iter()
                    .map(|(column, alias)| SelectItem { column, alias })
                    .collect(),
            )
        }),
    ]
}

fn query() -> impl Strategy<Value = Query> {
    (
        any::<bool>(),
        select_list(),
        prop::option::of(predicate()),
        prop::option::of((
            column(),
            prop_oneof![Just(Direction::Asc), Just(Direction::Desc)],
        )),
    )
        .prop_map(|(distinct, select, filter, order)| Query {
            distinct,
            select,
            table: "fruitSellers".into(),
            filter,
            order_by: order.map(|(column, direction)| OrderBy { column, direction }),
            lenient: Vec::new(),
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn print_then_parse_is_identity(q in query()) {
        let text = print(&q).unwrap();
        let mut back = parse_lenient(&text).unwrap();
        back.bind_columns(COLUMNS);
        prop_assert_eq!(back, q, "{}", text);
    }

    #[test]
    fn printing_is_a_fixed_point(q in query()) {
        let text = print(&q).unwrap();
        let mut back = parse_lenient(&text).unwrap();
        back.bind_columns(COLUMNS);
        prop_assert_eq!(print(&back).unwrap(), text);
    }
}
