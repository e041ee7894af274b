//! Error taxonomy for incorrect submissions.
//!
//! Syntax categories are detected from tokens, so they work on text the
//! parser rejects. Semantic categories compare actual and expected output
//! and ask the synthesis stages which kind of edit makes the query pass.

use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;

use crate::eval::{parse_for, EvalError, Plan, Triage, Verdict};
use crate::query::lex::{tokenize, Keyword, Token, TokenKind};
use crate::query::{parse_lenient, Query};
use crate::rewrite::fix_columns;
use crate::synth::{
    check, remove_clauses, synth_clauses, synth_columns, synth_constants, synth_operators, Budget,
};
use crate::table::{tables_equal, ProblemSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Category {
    BrokenOperator,
    ColumnReferenceError,
    QuotesOnStrings,
    IncompleteQuery,
    WrongOrder,
    TableReferenceError,
    ExtraCommas,
    MissingCommas,
    MiscSyntax,
    WrongSubclausesInWhere,
    MissingOrExtraOperator,
    WrongValuesInWhere,
    WrongOrdering,
    ColumnMismatch,
    WrongOperatorInWhere,
    MissingJoin,
    MiscSemantic,
}

impl Category {
    pub const SYNTAX: [Category; 9] = [
        Category::BrokenOperator,
        Category::ColumnReferenceError,
        Category::QuotesOnStrings,
        Category::IncompleteQuery,
        Category::WrongOrder,
        Category::TableReferenceError,
        Category::ExtraCommas,
        Category::MissingCommas,
        Category::MiscSyntax,
    ];

    pub const SEMANTIC: [Category; 8] = [
        Category::WrongSubclausesInWhere,
        Category::MissingOrExtraOperator,
        Category::WrongValuesInWhere,
        Category::WrongOrdering,
        Category::ColumnMismatch,
        Category::WrongOperatorInWhere,
        Category::MissingJoin,
        Category::MiscSemantic,
    ];

    pub fn is_syntax(self) -> bool {
        Category::SYNTAX.contains(&self)
    }

    pub fn name(self) -> &'static str {
        match self {
            Category::BrokenOperator => "Broken operator",
            Category::ColumnReferenceError => "Column reference error",
            Category::QuotesOnStrings => "Quotes on strings",
            Category::IncompleteQuery => "Incomplete query",
            Category::WrongOrder => "Wrong order",
            Category::TableReferenceError => "Table reference error",
            Category::ExtraCommas => "Extra commas",
            Category::MissingCommas => "Missing commas",
            Category::MiscSyntax => "Miscellaneous syntax",
            Category::WrongSubclausesInWhere => "Wrong subclauses in WHERE",
            Category::MissingOrExtraOperator => "Missing or extra operator",
            Category::WrongValuesInWhere => "Wrong values in WHERE",
            Category::WrongOrdering => "Wrong ordering",
            Category::ColumnMismatch => "Column mismatch",
            Category::WrongOperatorInWhere => "Wrong operator in WHERE",
            Category::MissingJoin => "Missing join",
            Category::MiscSemantic => "Miscellaneous semantic",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ErrorReport {
    pub verdict: Verdict,
    pub categories: BTreeSet<Category>,
}

/// Assigns error categories to an incorrect submission. A correct
/// submission gets an empty set.
pub fn classify(text: &str, triage: &Triage, problem: &ProblemSpec) -> ErrorReport {
    let categories = match triage.verdict {
        Verdict::Correct => BTreeSet::new(),
        Verdict::SyntaxError => syntax_categories(text, problem),
        Verdict::SemanticError => semantic_categories(text, problem),
    };
    ErrorReport {
        verdict: triage.verdict,
        categories,
    }
}

/// Token ranges of the top-level clauses.
struct Layout<'t> {
    tokens: &'t [Token],
    select: Option<usize>,
    from: Option<usize>,
    where_: Option<usize>,
}

impl<'t> Layout<'t> {
    fn new(tokens: &'t [Token]) -> Self {
        let find = |kw| tokens.iter().position(|t| t.is_keyword(kw));
        Layout {
            tokens,
            select: find(Keyword::Select),
            from: find(Keyword::From),
            where_: find(Keyword::Where),
        }
    }

    /// Tokens from `start` up to the next clause keyword or `;`.
    fn region(&self, start: usize) -> &'t [Token] {
        let rest = &self.tokens[start..];
        let end = rest
            .iter()
            .position(|t| {
                t.keyword().is_some_and(Keyword::is_clause) || t.kind == TokenKind::Semicolon
            })
            .unwrap_or(rest.len());
        &rest[..end]
    }

    fn select_list(&self) -> &'t [Token] {
        let Some(s) = self.select else {
            return &[];
        };
        let mut start = s + 1;
        if self
            .tokens
            .get(start)
            .is_some_and(|t| t.is_keyword(Keyword::Distinct))
        {
            start += 1;
        }
        if start > self.tokens.len() {
            return &[];
        }
        self.region(start)
    }

    fn table_tokens(&self) -> &'t [Token] {
        self.from.map_or(&[], |f| self.region(f + 1))
    }

    fn where_region(&self) -> &'t [Token] {
        self.where_.map_or(&[], |w| self.region(w + 1))
    }

    /// Table names and aliases listed after FROM.
    fn table_names(&self) -> Vec<&'t str> {
        self.table_tokens()
            .iter()
            .filter_map(Token::identifier)
            .collect()
    }

    /// Number of comma-separated FROM entries.
    fn table_entries(&self) -> usize {
        let list = self.table_tokens();
        if list.is_empty() {
            0
        } else {
            1 + list.iter().filter(|t| t.kind == TokenKind::Comma).count()
        }
    }
}

fn syntax_categories(text: &str, problem: &ProblemSpec) -> BTreeSet<Category> {
    let tokens = tokenize(text);
    let layout = Layout::new(&tokens);
    let source = problem.source_schema();
    let is_column = |w: &str| source.column_index(w).is_some();
    let mut out = BTreeSet::new();

    if tokens.iter().any(|t| {
        matches!(
            t.kind,
            TokenKind::EqEq | TokenKind::AmpAmp | TokenKind::PipePipe
        )
    }) {
        out.insert(Category::BrokenOperator);
    }

    let quoted = tokens.iter().any(|t| {
        matches!(
            t.kind,
            TokenKind::DoubleQuoted(_) | TokenKind::Unterminated(_)
        )
    });
    let bare_value = tokens.windows(3).any(|w| {
        w[0].is_comparison()
            && w[1].identifier().is_some_and(|word| !is_column(word))
            && w[2].kind != TokenKind::Dot
    }) || tokens
        .last()
        .is_some_and(|t| t.identifier().is_some_and(|w| !is_column(w)))
        && tokens.len() >= 2
        && tokens[tokens.len() - 2].is_comparison();
    if quoted || bare_value {
        out.insert(Category::QuotesOnStrings);
    }

    let select = layout.select_list();
    let commas_odd = select.first().is_some_and(|t| t.kind == TokenKind::Comma)
        || select.last().is_some_and(|t| t.kind == TokenKind::Comma)
        || select
            .windows(2)
            .any(|w| w[0].kind == TokenKind::Comma && w[1].kind == TokenKind::Comma)
        || layout
            .where_region()
            .iter()
            .any(|t| t.kind == TokenKind::Comma);
    if commas_odd {
        out.insert(Category::ExtraCommas);
    }
    let missing_comma = select.windows(2).enumerate().any(|(i, w)| {
        let after_as = i > 0 && select[i - 1].is_keyword(Keyword::As);
        w[0].identifier().is_some() && w[1].identifier().is_some() && !after_as
    });
    if missing_comma {
        out.insert(Category::MissingCommas);
    }

    if wrong_order(&tokens) {
        out.insert(Category::WrongOrder);
    }

    let where_empty = layout.where_.is_some() && layout.where_region().is_empty();
    let from_empty = layout.from.is_some() && layout.table_names().is_empty();
    if layout.select.is_none()
        || select.is_empty()
        || layout.from.is_none()
        || from_empty
        || where_empty
    {
        out.insert(Category::IncompleteQuery);
    }

    let parse_failure = parse_lenient(text).err();
    let table_names = layout.table_names();

    // Qualified references `a.b`.
    let mut bad_qualifier = false;
    let mut unknown_column = false;
    for w in tokens.windows(3) {
        if w[1].kind != TokenKind::Dot {
            continue;
        }
        if let (Some(qualifier), Some(column)) = (w[0].identifier(), w[2].identifier()) {
            if !table_names.contains(&qualifier) {
                bad_qualifier = true;
            } else if qualifier == source.name && !is_column(column) {
                unknown_column = true;
            }
        }
    }
    if let (1, Some(&target)) = (layout.table_entries(), table_names.first()) {
        // A keyword glued to the table name is a different mistake.
        let blamed = parse_failure.as_ref().is_some_and(|e| e.token == target);
        if target != source.name && !blamed {
            bad_qualifier = true;
        }
    }

    // Unqualified names in the select list and on the left of comparisons.
    let mut names: Vec<&str> = Vec::new();
    for (i, t) in select.iter().enumerate() {
        let qualified = select.get(i + 1).is_some_and(|n| n.kind == TokenKind::Dot)
            || (i > 0 && select[i - 1].kind == TokenKind::Dot);
        let alias = i > 0 && select[i - 1].is_keyword(Keyword::As);
        if let Some(word) = t.identifier() {
            if !qualified && !alias {
                names.push(word);
            }
        }
    }
    let where_tokens = layout.where_region();
    for (i, w) in where_tokens.windows(2).enumerate() {
        let qualified = i > 0 && where_tokens[i - 1].kind == TokenKind::Dot;
        if let Some(word) = w[0].identifier() {
            if w[1].is_comparison() && !qualified {
                names.push(word);
            }
        }
    }
    if layout.table_entries() >= 2 && !names.is_empty() {
        unknown_column = true;
    }
    if layout.table_entries() <= 1 && names.iter().any(|n| !is_column(n)) {
        unknown_column = true;
    }

    if parse_failure.is_none() {
        if let Ok(q) = parse_for(text, problem) {
            match Plan::compile(&strip_lenient(&q), source) {
                Err(EvalError::UnknownColumn(_)) => unknown_column = true,
                Err(EvalError::UnknownTable { .. }) => bad_qualifier = true,
                _ => {}
            }
        }
    }
    if unknown_column {
        out.insert(Category::ColumnReferenceError);
    }
    if bad_qualifier {
        out.insert(Category::TableReferenceError);
    }

    if out.is_empty() {
        out.insert(Category::MiscSyntax);
    }
    out
}

/// Evaluation errors other than leftover lenient tokens are what matter
/// for reference checks.
fn strip_lenient(q: &Query) -> Query {
    let mut q = q.clone();
    q.lenient.clear();
    q
}

fn wrong_order(tokens: &[Token]) -> bool {
    if let Some(d) = tokens.iter().position(|t| t.is_keyword(Keyword::Distinct)) {
        if d == 0 || !tokens[d - 1].is_keyword(Keyword::Select) {
            return true;
        }
    }
    if tokens.first().is_some_and(|t| {
        t.keyword().is_some_and(Keyword::is_clause) && !t.is_keyword(Keyword::Select)
    }) {
        return true;
    }
    const ORDER: [Keyword; 7] = [
        Keyword::Select,
        Keyword::From,
        Keyword::Where,
        Keyword::Group,
        Keyword::Having,
        Keyword::Order,
        Keyword::Limit,
    ];
    let positions: Vec<usize> = ORDER
        .iter()
        .filter_map(|&kw| tokens.iter().position(|t| t.is_keyword(kw)))
        .collect();
    positions.windows(2).any(|w| w[0] > w[1])
}

fn semantic_categories(text: &str, problem: &ProblemSpec) -> BTreeSet<Category> {
    let mut out = BTreeSet::new();
    let Ok(q) = parse_for(text, problem) else {
        out.insert(Category::MiscSemantic);
        return out;
    };
    let Ok(plan) = Plan::compile(&q, problem.source_schema()) else {
        out.insert(Category::MiscSemantic);
        return out;
    };
    if plan.shape.columns != problem.destination_columns() {
        out.insert(Category::ColumnMismatch);
    }
    let fixed = fix_columns(&q, problem).map_or(q, |(fixed, _)| fixed);
    if check(&fixed, problem) == Ok(true) {
        return out;
    }

    if let Ok(plan) = Plan::compile(&fixed, problem.source_schema()) {
        let outputs: Vec<_> = problem
            .pairs
            .iter()
            .map(|p| (plan.run(&p.source), p))
            .collect();
        let same_bags = outputs
            .iter()
            .all(|(actual, p)| tables_equal(actual, &p.destination, false));
        if same_bags {
            out.insert(Category::WrongOrdering);
        }
    }

    let mut toggled = fixed.clone();
    toggled.distinct = !toggled.distinct;
    if check(&toggled, problem) == Ok(true) {
        out.insert(Category::MissingOrExtraOperator);
    }

    if !out.contains(&Category::WrongOrdering) && !out.contains(&Category::MissingOrExtraOperator) {
        let timer = Budget::default().start();
        let found = if synth_constants(&fixed, problem, &timer).is_ok() {
            Some(Category::WrongValuesInWhere)
        } else if synth_operators(&fixed, problem, &timer).is_ok() {
            Some(Category::WrongOperatorInWhere)
        } else if synth_columns(&fixed, problem, &timer).is_ok()
            || remove_clauses(&fixed, problem, &timer).is_ok()
            || synth_clauses(&fixed, problem, &timer).is_ok()
        {
            Some(Category::WrongSubclausesInWhere)
        } else {
            None
        };
        out.extend(found);
    }

    // Joins are outside the supported grammar, so a missing join is never
    // reported.
    if out.is_empty() {
        out.insert(Category::MiscSemantic);
    }
    out
}
