use std::fmt::{self, Write};

use super::{Comparison, Direction, Operand, Predicate, Query, SelectList};

/// Returned when asked to print a query that still carries lenient tokens.
#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("query still contains {count} non-standard token(s), first `{first}`")]
pub struct RenderError {
    pub count: usize,
    pub first: String,
}

/// Canonical text: uppercase keywords, single spaces, single-quoted strings,
/// no trailing semicolon.
///
/// ```
/// use sqlmend::query::{parse_lenient, print};
///
/// let q = parse_lenient("select a as b from t where a=1;").unwrap();
/// assert_eq!(print(&q).unwrap(), "SELECT a AS b FROM t WHERE a = 1");
/// ```
pub fn print(q: &Query) -> Result<String, RenderError> {
    if let Some(first) = q.lenient.first() {
        return Err(RenderError {
            count: q.lenient.len(),
            first: first.text.clone(),
        });
    }
    Ok(q.to_string())
}

// Display renders lenient queries too (bare words verbatim); it backs the
// rewrite log fragments. Use `print` for anything user-facing.
impl fmt::Display for Query {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("SELECT ")?;
        if self.distinct {
            f.write_str("DISTINCT ")?;
        }
        write!(f, "{} FROM {}", self.select, self.table)?;
        if let Some(pred) = &self.filter {
            write!(f, " WHERE {pred}")?;
        }
        if let Some(order) = &self.order_by {
            write!(f, " ORDER BY {}", order.column)?;
            if order.direction == Direction::Desc {
                f.write_str(" DESC")?;
            }
        }
        Ok(())
    }
}

impl fmt::Display for SelectList {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SelectList::Star => f.write_char('*'),
            SelectList::Items(items) => {
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    f.write_str(&item.column)?;
                    if let Some(alias) = &item.alias {
                        write!(f, " AS {alias}")?;
                    }
                }
                Ok(())
            }
        }
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, leaf) in self.leaves.iter().enumerate() {
            if i > 0 {
                write!(f, " {} ", self.connectors[i - 1])?;
            }
            write!(f, "{leaf}")?;
        }
        Ok(())
    }
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.lhs, self.op, self.rhs)
    }
}

impl fmt::Display for Operand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Operand::Column(c) | Operand::Bare(c) => f.write_str(c),
            Operand::Int(i) => write!(f, "{i}"),
            Operand::Str(s) => write!(f, "'{}'", s.replace('\'', "''")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::{parse_lenient, SelectItem};
    use super::*;

    #[test]
    fn identity_case() {
        let q = parse_lenient("SELECT a FROM t WHERE a = 1").unwrap();
        assert_eq!(print(&q).unwrap(), "SELECT a FROM t WHERE a = 1");
    }

    #[test]
    fn alias() {
        let mut q = Query::star("t");
        q.select = SelectList::Items(vec![SelectItem::aliased("a", "b")]);
        assert_eq!(print(&q).unwrap(), "SELECT a AS b FROM t");
    }

    #[test]
    fn lenient_refuses() {
        let q = parse_lenient("SELECT a FROM t WHERE a == 1").unwrap();
        let err = print(&q).unwrap_err();
        assert_eq!(err.first, "==");
    }

    #[test]
    fn quotes_are_escaped() {
        let q = parse_lenient("SELECT a FROM t WHERE a = 'it''s' ORDER BY a ASC").unwrap();
        let text = print(&q).unwrap();
        assert_eq!(text, "SELECT a FROM t WHERE a = 'it''s' ORDER BY a");
        assert_eq!(parse_lenient(&text).unwrap(), q);
    }
}
