//! Query execution against a single source table, and submission triage.

use serde::{Deserialize, Serialize};

use crate::query::{
    parse_lenient, BoolOp, CmpOp, Comparison, Direction, Operand, Query, SelectList,
};
use crate::table::{tables_equal, Column, ColumnType, ProblemSpec, Table, Value};

/// Failures a database would report as an error message.
#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("unknown table `{found}`")]
    UnknownTable { found: String },
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("cannot compare {lhs} with {rhs} in `{comparison}`")]
    TypeMismatch {
        lhs: ColumnType,
        rhs: ColumnType,
        comparison: String,
    },
    #[error("unrepaired token `{0}`")]
    Lenient(String),
}

#[derive(Clone, Debug)]
pub(crate) enum Slot {
    Col(usize),
    Const(Value),
}

impl Slot {
    fn get<'a>(&'a self, row: &'a [Value]) -> &'a Value {
        match self {
            Slot::Col(i) => &row[*i],
            Slot::Const(v) => v,
        }
    }
}

/// A comparison resolved against a schema.
#[derive(Clone, Debug)]
pub(crate) struct CompiledLeaf {
    lhs: Slot,
    op: CmpOp,
    rhs: Slot,
}

impl CompiledLeaf {
    pub(crate) fn matches(&self, row: &[Value]) -> bool {
        self.op.holds(self.lhs.get(row).cmp(self.rhs.get(row)))
    }
}

fn compile_operand(operand: &Operand, schema: &[Column]) -> Result<(Slot, ColumnType), EvalError> {
    match operand {
        Operand::Column(name) => schema
            .iter()
            .position(|c| &c.name == name)
            .map(|i| (Slot::Col(i), schema[i].ty))
            .ok_or_else(|| EvalError::UnknownColumn(name.clone())),
        Operand::Int(i) => Ok((Slot::Const(Value::Int(*i)), ColumnType::Int)),
        Operand::Str(s) => Ok((Slot::Const(Value::Str(s.clone())), ColumnType::Str)),
        Operand::Bare(word) => Err(EvalError::Lenient(word.clone())),
    }
}

/// Resolves a comparison against `schema`, returning the compiled leaf and
/// the type both operands share.
pub(crate) fn compile_leaf(
    cmp: &Comparison,
    schema: &[Column],
) -> Result<(CompiledLeaf, ColumnType), EvalError> {
    let (lhs, lt) = compile_operand(&cmp.lhs, schema)?;
    let (rhs, rt) = compile_operand(&cmp.rhs, schema)?;
    if lt != rt {
        return Err(EvalError::TypeMismatch {
            lhs: lt,
            rhs: rt,
            comparison: cmp.to_string(),
        });
    }
    Ok((
        CompiledLeaf {
            lhs,
            op: cmp.op,
            rhs,
        },
        lt,
    ))
}

/// Everything about a query except its WHERE clause: projection, ordering
/// and duplicate elimination.
#[derive(Clone, Debug)]
pub(crate) struct Shape {
    projection: Vec<usize>,
    pub(crate) columns: Vec<Column>,
    order: Option<(usize, Direction)>,
    distinct: bool,
}

impl Shape {
    pub(crate) fn compile(q: &Query, source: &Table) -> Result<Shape, EvalError> {
        if q.table != source.name {
            return Err(EvalError::UnknownTable {
                found: q.table.clone(),
            });
        }
        let lookup = |name: &str| {
            source
                .column_index(name)
                .ok_or_else(|| EvalError::UnknownColumn(name.to_string()))
        };
        let (projection, columns) = match &q.select {
            SelectList::Star => ((0..source.columns.len()).collect(), source.columns.clone()),
            SelectList::Items(items) => {
                let mut projection = Vec::with_capacity(items.len());
                let mut columns = Vec::with_capacity(items.len());
                for item in items {
                    let idx = lookup(&item.column)?;
                    projection.push(idx);
                    columns.push(Column::new(item.output_name(), source.columns[idx].ty));
                }
                (projection, columns)
            }
        };
        let order = match &q.order_by {
            None => None,
            Some(order) => {
                // Source columns first, then output aliases.
                let idx = source
                    .column_index(&order.column)
                    .or_else(|| match &q.select {
                        SelectList::Items(items) => items
                            .iter()
                            .find(|it| it.alias.as_deref() == Some(order.column.as_str()))
                            .and_then(|it| source.column_index(&it.column)),
                        SelectList::Star => None,
                    });
                Some((
                    idx.ok_or_else(|| EvalError::UnknownColumn(order.column.clone()))?,
                    order.direction,
                ))
            }
        };
        Ok(Shape {
            projection,
            columns,
            order,
            distinct: q.distinct,
        })
    }

    /// Source row indices in output order. Sorting is stable.
    pub(crate) fn row_order(&self, source: &Table) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..source.rows.len()).collect();
        if let Some((col, dir)) = self.order {
            match dir {
                Direction::Asc => {
                    idx.sort_by(|&a, &b| source.rows[a][col].cmp(&source.rows[b][col]))
                }
                Direction::Desc => {
                    idx.sort_by(|&a, &b| source.rows[b][col].cmp(&source.rows[a][col]))
                }
            }
        }
        idx
    }

    pub(crate) fn project(&self, row: &[Value]) -> Vec<Value> {
        self.projection.iter().map(|&i| row[i].clone()).collect()
    }

    /// Output of the query when exactly the rows accepted by `selected` pass
    /// the WHERE clause.
    pub(crate) fn output(&self, source: &Table, selected: impl Fn(usize) -> bool) -> Table {
        let mut rows: Vec<Vec<Value>> = Vec::new();
        for i in self.row_order(source) {
            if !selected(i) {
                continue;
            }
            let row = self.project(&source.rows[i]);
            if self.distinct && rows.contains(&row) {
                continue;
            }
            rows.push(row);
        }
        Table {
            name: source.name.clone(),
            columns: self.columns.clone(),
            rows,
        }
    }
}

/// A query compiled against a source schema.
#[derive(Clone, Debug)]
pub(crate) struct Plan {
    pub(crate) shape: Shape,
    leaves: Vec<CompiledLeaf>,
    connectors: Vec<BoolOp>,
}

impl Plan {
    pub(crate) fn compile(q: &Query, source: &Table) -> Result<Plan, EvalError> {
        if let Some(tok) = q.lenient.first() {
            return Err(EvalError::Lenient(tok.text.clone()));
        }
        let shape = Shape::compile(q, source)?;
        let (leaves, connectors) = match &q.filter {
            None => (Vec::new(), Vec::new()),
            Some(pred) => {
                let leaves = pred
                    .leaves
                    .iter()
                    .map(|leaf| compile_leaf(leaf, &source.columns).map(|(c, _)| c))
                    .collect::<Result<Vec<_>, _>>()?;
                (leaves, pred.connectors.clone())
            }
        };
        Ok(Plan {
            shape,
            leaves,
            connectors,
        })
    }

    pub(crate) fn selects(&self, row: &[Value]) -> bool {
        if self.leaves.is_empty() {
            return true;
        }
        // OR of AND-runs.
        let mut run = self.leaves[0].matches(row);
        for (bop, leaf) in self.connectors.iter().zip(&self.leaves[1..]) {
            match bop {
                BoolOp::And => run = run && leaf.matches(row),
                BoolOp::Or => {
                    if run {
                        return true;
                    }
                    run = leaf.matches(row);
                }
            }
        }
        run
    }

    pub(crate) fn run(&self, source: &Table) -> Table {
        self.shape.output(source, |i| self.selects(&source.rows[i]))
    }
}

/// Runs `q` on `source`.
///
/// ```
/// use sqlmend::eval::eval;
/// use sqlmend::query::parse_lenient;
/// use sqlmend::table::{Column, ColumnType, Table, Value};
///
/// let t = Table::new("t", vec![Column::new("c", ColumnType::Int)],
///     vec![vec![Value::Int(1)], vec![Value::Int(1)], vec![Value::Int(2)]]).unwrap();
/// let out = eval(&parse_lenient("SELECT DISTINCT c FROM t").unwrap(), &t).unwrap();
/// assert_eq!(out.rows, vec![vec![Value::Int(1)], vec![Value::Int(2)]]);
/// ```
pub fn eval(q: &Query, source: &Table) -> Result<Table, EvalError> {
    Ok(Plan::compile(q, source)?.run(source))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Verdict {
    Correct,
    SyntaxError,
    SemanticError,
}

/// Outcome of grading a submission against all pairs of a problem.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Triage {
    pub verdict: Verdict,
    /// Index of the first pair whose expected output differs.
    pub first_failing_pair: Option<usize>,
    /// Actual output on the first failing pair.
    pub actual_output: Option<Table>,
    /// Error message for syntax errors.
    pub detail: Option<String>,
}

impl Triage {
    fn syntax(detail: impl ToString) -> Triage {
        Triage {
            verdict: Verdict::SyntaxError,
            first_failing_pair: None,
            actual_output: None,
            detail: Some(detail.to_string()),
        }
    }

    pub fn is_correct(&self) -> bool {
        self.verdict == Verdict::Correct
    }
}

/// Parses `text` and resolves bare words that name source columns.
pub(crate) fn parse_for(
    text: &str,
    problem: &ProblemSpec,
) -> Result<Query, crate::query::ParseFailure> {
    let mut q = parse_lenient(text)?;
    q.bind_columns(problem.source_schema().column_names());
    Ok(q)
}

/// Grades `text` the way a database-backed checker would: anything that
/// fails to parse, still holds lenient tokens, or errors during execution is
/// a syntax error; a query that runs but produces a wrong table on some
/// pair is a semantic error.
pub fn triage(text: &str, problem: &ProblemSpec) -> Triage {
    let q = match parse_for(text, problem) {
        Ok(q) => q,
        Err(e) => return Triage::syntax(e),
    };
    triage_query(&q, problem)
}

pub fn triage_query(q: &Query, problem: &ProblemSpec) -> Triage {
    let plan = match Plan::compile(q, problem.source_schema()) {
        Ok(plan) => plan,
        Err(e) => return Triage::syntax(e),
    };
    for (i, pair) in problem.pairs.iter().enumerate() {
        let actual = plan.run(&pair.source);
        if !tables_equal(&actual, &pair.destination, pair.ordered) {
            return Triage {
                verdict: Verdict::SemanticError,
                first_failing_pair: Some(i),
                actual_output: Some(actual),
                detail: None,
            };
        }
    }
    Triage {
        verdict: Verdict::Correct,
        first_failing_pair: None,
        actual_output: None,
        detail: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::fruit_problem;

    fn q(text: &str) -> Query {
        parse_lenient(text).unwrap()
    }

    #[test]
    fn star_is_identity() {
        let p = fruit_problem();
        let src = &p.pairs[0].source;
        assert_eq!(&eval(&q("SELECT * FROM fruitSellers"), src).unwrap(), src);
    }

    #[test]
    fn running_example_repaired() {
        let p = fruit_problem();
        let pair = &p.pairs[0];
        let repaired = q("SELECT item, price, quantity, country FROM fruitSellers \
                          WHERE country = 'US' AND quantity != 500");
        let out = eval(&repaired, &pair.source).unwrap();
        assert!(tables_equal(&out, &pair.destination, false));
        assert_eq!(out.rows.len(), 1);
    }

    #[test]
    fn precedence_and_binds_tighter() {
        let p = fruit_problem();
        let src = &p.pairs[0].source;
        // country = 'MX' OR (country = 'US' AND price < 5)
        let out = eval(
            &q("SELECT item FROM fruitSellers WHERE country = 'MX' OR country = 'US' AND price < 5"),
            src,
        )
        .unwrap();
        let items: Vec<_> = out.rows.iter().map(|r| r[0].to_string()).collect();
        assert_eq!(items, ["bananas", "grapes"]);
    }

    #[test]
    fn order_by_desc_is_stable() {
        let p = fruit_problem();
        let src = &p.pairs[0].source;
        let out = eval(
            &q("SELECT item FROM fruitSellers ORDER BY country DESC"),
            src,
        )
        .unwrap();
        let items: Vec<_> = out.rows.iter().map(|r| r[0].to_string()).collect();
        assert_eq!(items, ["apples", "grapes", "bananas", "oranges"]);
    }

    #[test]
    fn errors() {
        let p = fruit_problem();
        let src = &p.pairs[0].source;
        assert_eq!(
            eval(&q("SELECT nope FROM fruitSellers"), src),
            Err(EvalError::UnknownColumn("nope".into()))
        );
        assert!(matches!(
            eval(&q("SELECT * FROM fruit"), src),
            Err(EvalError::UnknownTable { .. })
        ));
        assert!(matches!(
            eval(&q("SELECT * FROM fruitSellers WHERE price = 'x'"), src),
            Err(EvalError::TypeMismatch { .. })
        ));
        assert!(matches!(
            eval(&q("SELECT * FROM fruitSellers WHERE country = US"), src),
            Err(EvalError::Lenient(_))
        ));
    }

    #[test]
    fn triage_verdicts() {
        let p = fruit_problem();
        let gold = "SELECT item, price, quantity, country FROM fruitSellers WHERE country = 'US' AND quantity < 300";
        assert_eq!(triage(gold, &p).verdict, Verdict::Correct);

        let t = triage("SELECT * FROM fruitSellers WHERE country = 'US'", &p);
        assert_eq!(t.verdict, Verdict::SemanticError);
        assert_eq!(t.first_failing_pair, Some(0));
        assert!(t.actual_output.is_some());

        for bad in [
            "SELECT * FROM fruitSellers WHERE country=US && quantity < 800",
            "SELECT DISTINCT WHERE MRRANK_RANK < 384;",
            "SELECT nope FROM fruitSellers",
        ] {
            assert_eq!(triage(bad, &p).verdict, Verdict::SyntaxError, "{bad}");
        }
    }

    #[test]
    fn column_compared_to_column_is_not_lenient() {
        let p = fruit_problem();
        let t = triage("SELECT item FROM fruitSellers WHERE price = quantity", &p);
        assert_eq!(t.verdict, Verdict::SemanticError);
    }
}
