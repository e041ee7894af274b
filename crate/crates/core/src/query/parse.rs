use std::fmt;

use super::lex::{tokenize, Keyword, Token, TokenKind};
use super::{
    BoolOp, CmpOp, Comparison, Direction, LenientKind, LenientToken, Operand, OrderBy, Predicate,
    Query, SelectItem, SelectList,
};

/// The first token the parser could not accept.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParseFailure {
    /// Offending token text; empty at end of input.
    pub token: String,
    /// Token index of the offending token.
    pub position: usize,
    /// Byte offset of the offending token.
    pub offset: usize,
    pub expected: String,
}

impl fmt::Display for ParseFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.token.is_empty() {
            write!(f, "unexpected end of input, expected {}", self.expected)
        } else {
            write!(
                f,
                "unexpected `{}` at token {}, expected {}",
                self.token, self.position, self.expected
            )
        }
    }
}

impl std::error::Error for ParseFailure {}

/// Parses `text`, accepting the lenient token set.
///
/// ```
/// use sqlmend::query::{parse_lenient, LenientKind};
///
/// let q = parse_lenient("SELECT * FROM fruitSellers WHERE country=US && quantity < 800").unwrap();
/// let kinds: Vec<_> = q.lenient.iter().map(|t| t.kind).collect();
/// assert_eq!(kinds, [LenientKind::BareToken, LenientKind::AmpAmp]);
/// ```
pub fn parse_lenient(text: &str) -> Result<Query, ParseFailure> {
    let tokens = tokenize(text);
    let mut parser = Parser {
        tokens: &tokens,
        pos: 0,
        lenient: Vec::new(),
        len: text.len(),
    };
    parser.query()
}

struct Parser<'a> {
    tokens: &'a [Token],
    pos: usize,
    lenient: Vec<LenientToken>,
    len: usize,
}

// Clause keywords long enough that a glued suffix is unambiguous.
const GLUE_SUFFIXES: [&str; 7] = [
    "SELECT", "FROM", "WHERE", "ORDER", "GROUP", "HAVING", "LIMIT",
];

impl Parser<'_> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn bump(&mut self) -> Option<&Token> {
        let tok = self.tokens.get(self.pos);
        self.pos += 1;
        tok
    }

    fn at_keyword(&self, kw: Keyword) -> bool {
        self.peek().is_some_and(|t| t.is_keyword(kw))
    }

    fn eat_keyword(&mut self, kw: Keyword) -> bool {
        if self.at_keyword(kw) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn fail(&self, expected: &str) -> ParseFailure {
        // `FROM hotelORDER BY x`: blame the word that swallowed the keyword.
        if let (Some(prev), Some(_)) = (
            self.pos.checked_sub(1).and_then(|i| self.tokens.get(i)),
            self.peek(),
        ) {
            if let Some(word) = prev.identifier() {
                let upper = word.to_ascii_uppercase();
                if GLUE_SUFFIXES
                    .iter()
                    .any(|kw| upper.len() > kw.len() && upper.ends_with(kw))
                {
                    return ParseFailure {
                        token: prev.text.clone(),
                        position: self.pos - 1,
                        offset: prev.offset,
                        expected: "a keyword separated from the preceding identifier".into(),
                    };
                }
            }
        }
        match self.peek() {
            Some(tok) => ParseFailure {
                token: tok.text.clone(),
                position: self.pos,
                offset: tok.offset,
                expected: expected.into(),
            },
            None => ParseFailure {
                token: String::new(),
                position: self.pos,
                offset: self.len,
                expected: expected.into(),
            },
        }
    }

    fn expect_keyword(&mut self, kw: Keyword, name: &str) -> Result<(), ParseFailure> {
        if self.eat_keyword(kw) {
            Ok(())
        } else {
            Err(self.fail(name))
        }
    }

    fn identifier(&mut self, what: &str) -> Result<String, ParseFailure> {
        match self.peek().and_then(Token::identifier) {
            Some(word) => {
                let word = word.to_string();
                self.pos += 1;
                Ok(word)
            }
            None => Err(self.fail(what)),
        }
    }

    fn flag(&mut self, kind: LenientKind, position: usize) {
        let text = self.tokens[position].text.clone();
        self.lenient.push(LenientToken {
            kind,
            position,
            text,
        });
    }

    fn query(&mut self) -> Result<Query, ParseFailure> {
        self.expect_keyword(Keyword::Select, "SELECT")?;
        let distinct = self.eat_keyword(Keyword::Distinct);
        let select = self.select_list()?;
        self.expect_keyword(Keyword::From, "FROM")?;
        let table = self.identifier("a table name")?;

        let filter = if self.eat_keyword(Keyword::Where) {
            Some(self.predicate()?)
        } else {
            None
        };

        let order_by = if self.eat_keyword(Keyword::Order) {
            self.expect_keyword(Keyword::By, "BY")?;
            let column = self.identifier("an ORDER BY column")?;
            let direction = if self.eat_keyword(Keyword::Desc) {
                Direction::Desc
            } else {
                self.eat_keyword(Keyword::Asc);
                Direction::Asc
            };
            Some(OrderBy { column, direction })
        } else {
            None
        };

        if matches!(
            self.peek(),
            Some(Token {
                kind: TokenKind::Semicolon,
                ..
            })
        ) {
            self.pos += 1;
        }
        if self.peek().is_some() {
            return Err(self.fail("end of query"));
        }

        self.lenient.sort_by_key(|t| t.position);
        Ok(Query {
            distinct,
            select,
            table,
            filter,
            order_by,
            lenient: std::mem::take(&mut self.lenient),
        })
    }

    fn select_list(&mut self) -> Result<SelectList, ParseFailure> {
        if matches!(
            self.peek(),
            Some(Token {
                kind: TokenKind::Star,
                ..
            })
        ) {
            self.pos += 1;
            return Ok(SelectList::Star);
        }
        let mut items = Vec::new();
        loop {
            let column = self.identifier("a column name or *")?;
            let alias = if self.eat_keyword(Keyword::As) {
                Some(self.identifier("an alias after AS")?)
            } else {
                None
            };
            items.push(SelectItem { column, alias });
            if matches!(
                self.peek(),
                Some(Token {
                    kind: TokenKind::Comma,
                    ..
                })
            ) {
                self.pos += 1;
            } else {
                break;
            }
        }
        Ok(SelectList::Items(items))
    }

    fn predicate(&mut self) -> Result<Predicate, ParseFailure> {
        let mut leaves = vec![self.comparison()?];
        let mut connectors = Vec::new();
        loop {
            let position = self.pos;
            let bop = match self.peek().map(|t| (&t.kind, t.keyword())) {
                Some((_, Some(Keyword::And))) => BoolOp::And,
                Some((_, Some(Keyword::Or))) => BoolOp::Or,
                Some((TokenKind::AmpAmp, _)) => {
                    self.flag(LenientKind::AmpAmp, position);
                    BoolOp::And
                }
                Some((TokenKind::PipePipe, _)) => {
                    self.flag(LenientKind::PipePipe, position);
                    BoolOp::Or
                }
                _ => break,
            };
            self.pos += 1;
            connectors.push(bop);
            leaves.push(self.comparison()?);
        }
        Ok(Predicate { leaves, connectors })
    }

    fn comparison(&mut self) -> Result<Comparison, ParseFailure> {
        let lhs = self.operand(false)?;
        let position = self.pos;
        let op = match self.peek().map(|t| &t.kind) {
            Some(TokenKind::Eq) => CmpOp::Eq,
            Some(TokenKind::EqEq) => {
                self.flag(LenientKind::DoubleEq, position);
                CmpOp::Eq
            }
            Some(TokenKind::Ne) => CmpOp::Ne,
            Some(TokenKind::Lt) => CmpOp::Lt,
            Some(TokenKind::Le) => CmpOp::Le,
            Some(TokenKind::Gt) => CmpOp::Gt,
            Some(TokenKind::Ge) => CmpOp::Ge,
            _ => return Err(self.fail("a comparison operator")),
        };
        self.pos += 1;
        // A word facing a column is a value the student forgot to quote.
        let rhs = self.operand(matches!(lhs, Operand::Column(_)))?;
        Ok(Comparison { lhs, op, rhs })
    }

    fn operand(&mut self, word_is_value: bool) -> Result<Operand, ParseFailure> {
        let position = self.pos;
        let Some(tok) = self.peek() else {
            return Err(self.fail("an operand"));
        };
        let operand = match &tok.kind {
            TokenKind::Word(_) => {
                let Some(word) = tok.identifier() else {
                    return Err(self.fail("an operand"));
                };
                let word = word.to_string();
                if word_is_value {
                    self.flag(LenientKind::BareToken, position);
                    Operand::Bare(word)
                } else {
                    Operand::Column(word)
                }
            }
            TokenKind::Int(n) => match i64::try_from(*n) {
                Ok(v) => Operand::Int(v),
                Err(_) => return Err(self.fail("an integer within 64 bits")),
            },
            TokenKind::Minus => {
                let magnitude = match self.tokens.get(self.pos + 1).map(|t| &t.kind) {
                    Some(TokenKind::Int(n)) => *n,
                    _ => {
                        self.pos += 1;
                        return Err(self.fail("an integer after `-`"));
                    }
                };
                let value = if magnitude == 1 << 63 {
                    i64::MIN
                } else {
                    match i64::try_from(magnitude) {
                        Ok(v) => -v,
                        Err(_) => {
                            self.pos += 1;
                            return Err(self.fail("an integer within 64 bits"));
                        }
                    }
                };
                self.pos += 1;
                Operand::Int(value)
            }
            TokenKind::SingleQuoted(s) => Operand::Str(s.clone()),
            TokenKind::DoubleQuoted(s) => {
                let s = s.clone();
                self.flag(LenientKind::DoubleQuotedString, position);
                Operand::Str(s)
            }
            _ => return Err(self.fail("an operand")),
        };
        self.bump();
        Ok(operand)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_query_is_strict() {
        let q = parse_lenient("SELECT a FROM t").unwrap();
        assert_eq!(q.select, SelectList::Items(vec![SelectItem::column("a")]));
        assert_eq!(q.table, "t");
        assert!(q.lenient.is_empty());
    }

    #[test]
    fn running_example_flags() {
        let q =
            parse_lenient("SELECT * FROM fruitSellers WHERE country=US && quantity < 800").unwrap();
        let flags: Vec<_> = q
            .lenient
            .iter()
            .map(|t| (t.kind, t.text.as_str()))
            .collect();
        assert_eq!(
            flags,
            [(LenientKind::BareToken, "US"), (LenientKind::AmpAmp, "&&")]
        );
        let pred = q.filter.unwrap();
        assert_eq!(pred.leaves[0].rhs, Operand::Bare("US".into()));
        assert_eq!(pred.connectors, [BoolOp::And]);
    }

    #[test]
    fn glued_keyword_blames_identifier() {
        let err = parse_lenient("SELECT CUI, STN, TUI from hotelORDER BY TUI DESC").unwrap_err();
        assert_eq!(err.token, "hotelORDER");
        assert_eq!(err.position, 7);
    }

    #[test]
    fn incomplete_query_fails() {
        let err = parse_lenient("SELECT DISTINCT WHERE MRRANK_RANK < 384;").unwrap_err();
        assert_eq!(err.token, "WHERE");
    }

    #[test]
    fn trailing_semicolon_and_case() {
        let a = parse_lenient("select distinct a from t where a >= -3 order by a desc;").unwrap();
        let b = parse_lenient("SELECT DISTINCT a FROM t WHERE a >= -3 ORDER BY a DESC").unwrap();
        assert_eq!(a, b);
        assert_eq!(a.order_by.unwrap().direction, Direction::Desc);
    }

    #[test]
    fn unsupported_constructs_fail() {
        for text in [
            "SELECT a FROM t GROUP BY a",
            "SELECT a FROM t, u",
            "SELECT a FROM t WHERE a BETWEEN 1 AND 2",
            "SELECT a FROM t LIMIT 3",
            "SELECT COUNT(a) FROM t",
            "SELECT a FROM t WHERE (a = 1)",
            "SELECT a, FROM t",
            "SELECT a b FROM t",
        ] {
            assert!(parse_lenient(text).is_err(), "{text}");
        }
    }

    #[test]
    fn i64_bounds() {
        let q = parse_lenient("SELECT a FROM t WHERE a > -9223372036854775808").unwrap();
        assert_eq!(q.filter.unwrap().leaves[0].rhs, Operand::Int(i64::MIN));
        assert!(parse_lenient("SELECT a FROM t WHERE a > 9223372036854775808").is_err());
    }

    #[test]
    fn literal_on_left_makes_word_a_column() {
        let q = parse_lenient("SELECT a FROM t WHERE 5 < a").unwrap();
        assert!(q.lenient.is_empty());
        assert_eq!(q.filter.unwrap().leaves[0].rhs, Operand::Column("a".into()));
    }
}
