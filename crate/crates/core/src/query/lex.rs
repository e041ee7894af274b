//! Tokenizer shared by the parser and the error classifier.
//!
//! Lexing never fails: anything unrecognized becomes a [`TokenKind::Unknown`]
//! or [`TokenKind::Unterminated`] token and is left for the parser to reject.

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TokenKind {
    /// Identifier or keyword; keywords are matched case-insensitively.
    Word(String),
    /// Unsigned integer literal. Sign is handled by the parser.
    Int(u64),
    SingleQuoted(String),
    DoubleQuoted(String),
    /// String literal missing its closing quote.
    Unterminated(String),
    Comma,
    Dot,
    Star,
    Semicolon,
    LParen,
    RParen,
    Minus,
    Eq,
    EqEq,
    /// `!=` or `<>`.
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    AmpAmp,
    PipePipe,
    Unknown(char),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    /// Byte offset in the input.
    pub offset: usize,
    /// Source text of the token.
    pub text: String,
}

impl Token {
    pub fn is_keyword(&self, kw: Keyword) -> bool {
        matches!(&self.kind, TokenKind::Word(w) if Keyword::lookup(w) == Some(kw))
    }

    pub fn keyword(&self) -> Option<Keyword> {
        match &self.kind {
            TokenKind::Word(w) => Keyword::lookup(w),
            _ => None,
        }
    }

    /// A word that is not reserved.
    pub fn identifier(&self) -> Option<&str> {
        match &self.kind {
            TokenKind::Word(w) if Keyword::lookup(w).is_none() => Some(w),
            _ => None,
        }
    }

    pub fn is_comparison(&self) -> bool {
        matches!(
            self.kind,
            TokenKind::Eq
                | TokenKind::EqEq
                | TokenKind::Ne
                | TokenKind::Lt
                | TokenKind::Le
                | TokenKind::Gt
                | TokenKind::Ge
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Keyword {
    Select,
    Distinct,
    From,
    Where,
    And,
    Or,
    Order,
    By,
    Asc,
    Desc,
    As,
    // Reserved but unsupported.
    Group,
    Having,
    Join,
    Inner,
    Left,
    Right,
    Outer,
    On,
    Limit,
    Offset,
    Between,
    Not,
    In,
    Like,
    Is,
    Null,
    Union,
}

impl Keyword {
    pub fn lookup(word: &str) -> Option<Keyword> {
        use Keyword::*;
        let kw = match word.to_ascii_uppercase().as_str() {
            "SELECT" => Select,
            "DISTINCT" => Distinct,
            "FROM" => From,
            "WHERE" => Where,
            "AND" => And,
            "OR" => Or,
            "ORDER" => Order,
            "BY" => By,
            "ASC" => Asc,
            "DESC" => Desc,
            "AS" => As,
            "GROUP" => Group,
            "HAVING" => Having,
            "JOIN" => Join,
            "INNER" => Inner,
            "LEFT" => Left,
            "RIGHT" => Right,
            "OUTER" => Outer,
            "ON" => On,
            "LIMIT" => Limit,
            "OFFSET" => Offset,
            "BETWEEN" => Between,
            "NOT" => Not,
            "IN" => In,
            "LIKE" => Like,
            "IS" => Is,
            "NULL" => Null,
            "UNION" => Union,
            _ => return None,
        };
        Some(kw)
    }

    /// Keywords that start a top-level clause.
    pub fn is_clause(self) -> bool {
        matches!(
            self,
            Keyword::Select
                | Keyword::From
                | Keyword::Where
                | Keyword::Group
                | Keyword::Having
                | Keyword::Order
                | Keyword::Limit
        )
    }
}

pub fn tokenize(input: &str) -> Vec<Token> {
    let mut tokens = Vec::new();
    let mut chars = input.char_indices().peekable();

    while let Some(&(start, c)) = chars.peek() {
        if c.is_whitespace() {
            chars.next();
            continue;
        }
        let kind = if c.is_ascii_alphabetic() || c == '_' {
            let mut word = String::new();
            while let Some(&(_, c)) = chars.peek() {
                if c.is_ascii_alphanumeric() || c == '_' {
                    word.push(c);
                    chars.next();
                } else {
                    break;
                }
            }
            TokenKind::Word(word)
        } else if c.is_ascii_digit() {
            let mut digits = String::new();
            while let Some(&(_, c)) = chars.peek() {
                if c.is_ascii_digit() {
                    digits.push(c);
                    chars.next();
                } else {
                    break;
                }
            }
            match digits.parse::<u64>() {
                Ok(n) => TokenKind::Int(n),
                Err(_) => TokenKind::Unknown('0'),
            }
        } else if c == '\'' || c == '"' {
            chars.next();
            let mut text = String::new();
            let mut closed = false;
            while let Some((_, ch)) = chars.next() {
                if ch == c {
                    // Doubled quote is an escaped quote.
                    if matches!(chars.peek(), Some(&(_, next)) if next == c) {
                        chars.next();
                        text.push(c);
                        continue;
                    }
                    closed = true;
                    break;
                }
                text.push(ch);
            }
            match (closed, c) {
                (false, _) => TokenKind::Unterminated(text),
                (true, '\'') => TokenKind::SingleQuoted(text),
                (true, _) => TokenKind::DoubleQuoted(text),
            }
        } else {
            chars.next();
            let next = chars.peek().map(|&(_, n)| n);
            let two = |chars: &mut std::iter::Peekable<std::str::CharIndices<'_>>, kind| {
                chars.next();
                kind
            };
            match (c, next) {
                ('=', Some('=')) => two(&mut chars, TokenKind::EqEq),
                ('!', Some('=')) => two(&mut chars, TokenKind::Ne),
                ('<', Some('>')) => two(&mut chars, TokenKind::Ne),
                ('<', Some('=')) => two(&mut chars, TokenKind::Le),
                ('>', Some('=')) => two(&mut chars, TokenKind::Ge),
                ('&', Some('&')) => two(&mut chars, TokenKind::AmpAmp),
                ('|', Some('|')) => two(&mut chars, TokenKind::PipePipe),
                ('=', _) => TokenKind::Eq,
                ('<', _) => TokenKind::Lt,
                ('>', _) => TokenKind::Gt,
                (',', _) => TokenKind::Comma,
                ('.', _) => TokenKind::Dot,
                ('*', _) => TokenKind::Star,
                (';', _) => TokenKind::Semicolon,
                ('(', _) => TokenKind::LParen,
                (')', _) => TokenKind::RParen,
                ('-', _) => TokenKind::Minus,
                (other, _) => TokenKind::Unknown(other),
            }
        };
        let end = chars.peek().map_or(input.len(), |&(i, _)| i);
        tokens.push(Token {
            kind,
            offset: start,
            text: input[start..end].to_string(),
        });
    }
    tokens
}
