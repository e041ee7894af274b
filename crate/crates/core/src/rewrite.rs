//! Rule-based rewrites that need no search: C-style operators, select-list
//! reconciliation against the destination schema, and string quoting.

use std::fmt;

use serde::Serialize;

use crate::query::{LenientKind, Operand, Query, SelectItem, SelectList, Side};
use crate::table::{ColumnType, ProblemSpec, Table};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum RewriteKind {
    OperatorMismatch,
    ColumnMismatch,
    StringRepair,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Rewrite {
    pub kind: RewriteKind,
    pub before: String,
    pub after: String,
}

impl fmt::Display for Rewrite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}: `{}` -> `{}`", self.kind, self.before, self.after)
    }
}

/// Rewrites applied by one or more fixes, in application order.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct RewriteLog {
    pub applied: Vec<Rewrite>,
}

impl RewriteLog {
    pub fn is_empty(&self) -> bool {
        self.applied.is_empty()
    }

    pub fn contains(&self, kind: RewriteKind) -> bool {
        self.applied.iter().any(|r| r.kind == kind)
    }

    pub fn extend(&mut self, other: RewriteLog) {
        self.applied.extend(other.applied);
    }

    fn push(&mut self, kind: RewriteKind, before: impl Into<String>, after: impl Into<String>) {
        self.applied.push(Rewrite {
            kind,
            before: before.into(),
            after: after.into(),
        });
    }
}

/// Replaces `==`, `&&` and `||` with `=`, `AND` and `OR`.
///
/// The parser already stores the SQL operator in the tree, so the fix
/// consists of clearing the corresponding lenient tokens.
pub fn fix_operators(q: &Query) -> (Query, RewriteLog) {
    let mut out = q.clone();
    let mut log = RewriteLog::default();
    out.lenient.retain(|tok| {
        let replacement = match tok.kind {
            LenientKind::DoubleEq => "=",
            LenientKind::AmpAmp => "AND",
            LenientKind::PipePipe => "OR",
            _ => return true,
        };
        log.push(RewriteKind::OperatorMismatch, tok.text.clone(), replacement);
        false
    });
    (out, log)
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ColumnFixError {
    #[error(
        "select list `{select}` cannot be reconciled with destination columns {destination:?}"
    )]
    NoFix {
        select: String,
        destination: Vec<String>,
    },
}

/// Reconciles the select list with the destination schema.
///
/// Sub-cases, first applicable wins:
/// 1. `*` when every destination column exists in the source: expand to the
///    destination columns.
/// 2. Same arity, and each mismatching position names a destination column
///    absent from the source: alias by position.
/// 3. Every destination column exists in the source: rewrite the list to
///    exactly the destination columns in destination order.
/// 4. Unknown columns with a unique case-insensitive match in the source
///    are corrected.
pub fn fix_columns(
    q: &Query,
    problem: &ProblemSpec,
) -> Result<(Query, RewriteLog), ColumnFixError> {
    let source = problem.source_schema();
    let dst: Vec<&str> = problem
        .destination_columns()
        .iter()
        .map(|c| c.name.as_str())
        .collect();
    let in_source = |name: &str| source.column_index(name).is_some();

    let current: Vec<&str> = match &q.select {
        SelectList::Star => source.column_names().collect(),
        SelectList::Items(items) => items.iter().map(SelectItem::output_name).collect(),
    };
    if current == dst {
        return Ok((q.clone(), RewriteLog::default()));
    }

    let dst_in_source = dst.iter().all(|d| in_source(d));
    let as_items =
        |names: &[&str]| SelectList::Items(names.iter().map(|&n| SelectItem::column(n)).collect());

    let new_select = match &q.select {
        SelectList::Star if dst_in_source => Some(as_items(&dst)),
        SelectList::Star => None,
        SelectList::Items(items) => {
            let renamable = items.len() == dst.len()
                && items.iter().all(|it| in_source(&it.column))
                && items
                    .iter()
                    .zip(&dst)
                    .all(|(it, d)| it.output_name() == *d || !in_source(d));
            if renamable {
                let renamed = items
                    .iter()
                    .zip(&dst)
                    .map(|(it, d)| {
                        if it.column == *d {
                            SelectItem::column(*d)
                        } else {
                            SelectItem::aliased(it.column.clone(), *d)
                        }
                    })
                    .collect();
                Some(SelectList::Items(renamed))
            } else if dst_in_source {
                Some(as_items(&dst))
            } else {
                let mut changed = false;
                let corrected = items
                    .iter()
                    .map(|it| {
                        if in_source(&it.column) {
                            return it.clone();
                        }
                        let mut matches = source
                            .column_names()
                            .filter(|c| c.eq_ignore_ascii_case(&it.column));
                        match (matches.next(), matches.next()) {
                            (Some(only), None) => {
                                changed = true;
                                SelectItem {
                                    column: only.to_string(),
                                    alias: it.alias.clone(),
                                }
                            }
                            _ => it.clone(),
                        }
                    })
                    .collect();
                changed.then_some(SelectList::Items(corrected))
            }
        }
    };

    match new_select {
        Some(select) if select != q.select => {
            let mut out = q.clone();
            let mut log = RewriteLog::default();
            log.push(
                RewriteKind::ColumnMismatch,
                q.select.to_string(),
                select.to_string(),
            );
            out.select = select;
            Ok((out, log))
        }
        _ => Err(ColumnFixError::NoFix {
            select: q.select.to_string(),
            destination: dst.iter().map(|s| s.to_string()).collect(),
        }),
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum StringFixError {
    #[error("cannot tell whether {tokens:?} are strings")]
    Ambiguous { tokens: Vec<String> },
}

/// Normalizes string literals: double quotes become single quotes, and an
/// unquoted word compared against a string column becomes a string literal.
/// A word that names a source column becomes a column reference instead.
pub fn fix_strings(q: &Query, source: &Table) -> Result<(Query, RewriteLog), StringFixError> {
    let mut out = q.clone();
    let mut log = RewriteLog::default();
    let mut resolved = Vec::new();
    let mut ambiguous = Vec::new();

    if let Some(pred) = out.filter.as_mut() {
        for leaf in &mut pred.leaves {
            for side in [Side::Lhs, Side::Rhs] {
                let Operand::Bare(word) = leaf.operand(side).clone() else {
                    continue;
                };
                if source.column_index(&word).is_some() {
                    *leaf.operand_mut(side) = Operand::Column(word.clone());
                    log.push(RewriteKind::StringRepair, word.clone(), word.clone());
                    resolved.push(word);
                    continue;
                }
                let context = match leaf.operand(side.other()) {
                    Operand::Column(c) => source.column_index(c).map(|i| source.columns[i].ty),
                    other => other.literal_type(),
                };
                if context == Some(ColumnType::Str) {
                    let fixed = Operand::Str(word.clone());
                    log.push(RewriteKind::StringRepair, word.clone(), fixed.to_string());
                    *leaf.operand_mut(side) = fixed;
                    resolved.push(word);
                } else {
                    ambiguous.push(word);
                }
            }
        }
    }

    for word in resolved {
        if let Some(pos) = out
            .lenient
            .iter()
            .position(|t| t.kind == LenientKind::BareToken && t.text == word)
        {
            out.lenient.remove(pos);
        }
    }
    out.lenient.retain(|tok| {
        if tok.kind != LenientKind::DoubleQuotedString {
            return true;
        }
        let inner = tok.text.trim_matches('"').replace("\"\"", "\"");
        log.push(
            RewriteKind::StringRepair,
            tok.text.clone(),
            Operand::Str(inner).to_string(),
        );
        false
    });

    if ambiguous.is_empty() {
        Ok((out, log))
    } else {
        Err(StringFixError::Ambiguous { tokens: ambiguous })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::fruit_problem;
    use crate::query::{parse_lenient, print};

    fn q(text: &str) -> Query {
        parse_lenient(text).unwrap()
    }

    #[test]
    fn operators_min_eq() {
        let (fixed, log) = fix_operators(&q("SELECT * FROM t WHERE min==0"));
        assert_eq!(print(&fixed).unwrap(), "SELECT * FROM t WHERE min = 0");
        assert_eq!(log.applied.len(), 1);
    }

    #[test]
    fn operators_compose() {
        let (fixed, log) = fix_operators(&q("SELECT * FROM t WHERE a==1 && b==2"));
        let text = print(&fixed).unwrap();
        assert_eq!(text, "SELECT * FROM t WHERE a = 1 AND b = 2");
        assert_eq!(parse_lenient(&text).unwrap(), fixed);
        assert_eq!(log.applied.len(), 3);
    }

    #[test]
    fn operators_identity() {
        let strict = q("SELECT * FROM t WHERE a = 1 OR b = 2");
        let (fixed, log) = fix_operators(&strict);
        assert_eq!(fixed, strict);
        assert!(log.is_empty());
    }

    #[test]
    fn columns_star_expansion() {
        let p = fruit_problem();
        let (fixed, log) =
            fix_columns(&q("SELECT * FROM fruitSellers WHERE country = 'US'"), &p).unwrap();
        assert_eq!(
            print(&fixed).unwrap(),
            "SELECT item, price, quantity, country FROM fruitSellers WHERE country = 'US'"
        );
        assert!(log.contains(RewriteKind::ColumnMismatch));
    }

    #[test]
    fn columns_extension_and_identity() {
        let p = fruit_problem();
        let (fixed, _) = fix_columns(&q("SELECT item, price FROM fruitSellers"), &p).unwrap();
        assert_eq!(
            print(&fixed).unwrap(),
            "SELECT item, price, quantity, country FROM fruitSellers"
        );

        let exact = q("SELECT item, price, quantity, country FROM fruitSellers");
        let (same, log) = fix_columns(&exact, &p).unwrap();
        assert_eq!(same, exact);
        assert!(log.is_empty());
    }

    #[test]
    fn columns_never_touch_where() {
        let p = fruit_problem();
        let input = q("SELECT * FROM fruitSellers WHERE country=US && quantity < 800");
        let (fixed, _) = fix_columns(&input, &p).unwrap();
        assert_eq!(fixed.filter, input.filter);
        assert_eq!(fixed.lenient, input.lenient);
    }

    #[test]
    fn strings_running_example() {
        let p = fruit_problem();
        let (fixed, log) = fix_strings(
            &q("SELECT * FROM fruitSellers WHERE country=US AND quantity < 800"),
            &p.pairs[0].source,
        )
        .unwrap();
        assert_eq!(
            print(&fixed).unwrap(),
            "SELECT * FROM fruitSellers WHERE country = 'US' AND quantity < 800"
        );
        assert_eq!(log.applied[0].after, "'US'");
    }

    #[test]
    fn strings_double_quotes() {
        let p = fruit_problem();
        let (fixed, _) = fix_strings(
            &q("SELECT * FROM fruitSellers WHERE item = \"x\""),
            &p.pairs[0].source,
        )
        .unwrap();
        assert_eq!(
            print(&fixed).unwrap(),
            "SELECT * FROM fruitSellers WHERE item = 'x'"
        );
    }

    #[test]
    fn strings_ambiguous_against_int() {
        let p = fruit_problem();
        let err = fix_strings(
            &q("SELECT * FROM fruitSellers WHERE price = cheap"),
            &p.pairs[0].source,
        )
        .unwrap_err();
        assert_eq!(
            err,
            StringFixError::Ambiguous {
                tokens: vec!["cheap".into()]
            }
        );
    }

    #[test]
    fn strings_prefer_column() {
        let p = fruit_problem();
        let (fixed, _) = fix_strings(
            &q("SELECT * FROM fruitSellers WHERE item = seller"),
            &p.pairs[0].source,
        )
        .unwrap();
        assert!(fixed.lenient.is_empty());
        assert_eq!(
            fixed.filter.unwrap().leaves[0].rhs,
            Operand::Column("seller".into())
        );
    }
}
