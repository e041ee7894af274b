//! Problems shared by unit tests.

use crate::table::ProblemSpec;

pub(crate) fn fruit_problem() -> ProblemSpec {
    ProblemSpec::from_json(include_str!("../fixtures/problems/fruit.json")).unwrap()
}
