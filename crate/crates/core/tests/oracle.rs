mod common;

use common::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use sqlmend::eval::{eval, triage};
use sqlmend::pipeline::repair;
use sqlmend::query::{parse_lenient, Direction, SelectList};
use sqlmend::synth::Budget;

const CASES: u64 = 1000;

#[test]
fn eval_agrees_with_reference_interpreter() {
    let mut rng = StdRng::seed_from_u64(7);
    for seed in 0..CASES {
        let case = random_case(seed);
        let mut q = case.gold.clone();
        if rng.random_bool(0.5) {
            let cols: Vec<String> = case.problem.pairs[0]
                .source
                .columns
                .iter()
                .map(|c| c.name.clone())
                .collect();
            let dir = if rng.random_bool(0.5) {
                Direction::Asc
            } else {
                Direction::Desc
            };
            q.order_by = Some(order_by(&cols[rng.random_range(0..cols.len())], dir));
        }
        for pair in &case.problem.pairs {
            let expected = reference_eval(&q, &pair.source).unwrap();
            let actual = eval(&q, &pair.source).unwrap();
            let names: Vec<&str> = actual.columns.iter().map(|c| c.name.as_str()).collect();
            assert_eq!(names, expected.names, "seed {seed}");
            assert!(same_bag(&actual.rows, &expected.rows), "seed {seed}: {q}");
            if let Some(order) = &q.order_by {
                let key = pair.source.column_index(&order.column).unwrap();
                let keys: Vec<_> = pair.source.rows.iter().map(|r| &r[key]).collect();
                let unique = keys.iter().enumerate().all(|(i, k)| !keys[..i].contains(k));
                if unique && matches!(q.select, SelectList::Star) {
                    assert_eq!(actual.rows, expected.rows, "seed {seed}: {q}");
                }
            }
        }
    }
}

#[test]
fn repaired_queries_pass_every_pair() {
    let mut repaired = 0;
    for seed in 0..CASES {
        let case = random_case(seed);
        let result = repair(&case.text, &case.problem, Budget::default());
        if let Some(q) = &result.repaired {
            repaired += 1;
            assert!(
                reference_passes(q, &case.problem),
                "seed {seed}: {} -> {q}",
                case.text
            );
            assert!(
                triage(&q.to_string(), &case.problem).is_correct(),
                "seed {seed}"
            );
        }
    }
    assert!(repaired > CASES / 2, "only {repaired} repaired");
}

#[test]
fn pipeline_repairs_whenever_enumerator_finds_a_where() {
    let mut required = 0;
    for seed in 0..CASES {
        let case = random_case(seed);
        if triage(&case.text, &case.problem).is_correct() {
            continue;
        }
        let submitted = parse_lenient(&case.text).unwrap();
        let Some(witness) = brute_force_where(&shape_of(&submitted), &case.problem) else {
            continue;
        };
        required += 1;
        let result = repair(&case.text, &case.problem, Budget::default());
        assert!(
            result.is_repaired(),
            "seed {seed}: {} unrepaired ({:?}); witness {witness}",
            case.text,
            result.reason
        );
    }
    assert!(required > CASES / 2, "only {required} cases had a witness");
}

#[test]
fn gold_queries_pass_their_own_problem() {
    for seed in 0..100 {
        let case = random_case(seed);
        assert!(reference_passes(&case.gold, &case.problem));
        assert!(
            triage(&case.gold.to_string(), &case.problem).is_correct(),
            "seed {seed}"
        );
    }
}
