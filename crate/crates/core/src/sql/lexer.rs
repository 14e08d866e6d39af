use super::ParseError;

#[derive(Debug, Clone, PartialEq)]
pub enum TokenKind {
    /// Bare word; keywords are recognized by the parser.
    Word(String),
    /// Backtick- or bracket-quoted identifier.
    QuotedIdent(String),
    Number(String),
    /// Single- or double-quoted string literal (Spider uses both).
    Str(String),
    LParen,
    RParen,
    Comma,
    Dot,
    Star,
    Plus,
    Minus,
    Slash,
    Percent,
    Eq,
    NotEq,
    Lt,
    LtEq,
    Gt,
    GtEq,
    Semicolon,
    Concat,
    Eof,
}

impl TokenKind {
    pub fn describe(&self) -> String {
        match self {
            TokenKind::Word(w) => w.clone(),
            TokenKind::QuotedIdent(w) => format!("`{w}`"),
            TokenKind::Number(n) => n.clone(),
            TokenKind::Str(s) => format!("'{s}'"),
            TokenKind::Eof => "end of input".into(),
            other => symbol(other).to_string(),
        }
    }
}

fn symbol(k: &TokenKind) -> &'static str {
    match k {
        TokenKind::LParen => "(",
        TokenKind::RParen => ")",
        TokenKind::Comma => ",",
        TokenKind::Dot => ".",
        TokenKind::Star => "*",
        TokenKind::Plus => "+",
        TokenKind::Minus => "-",
        TokenKind::Slash => "/",
        TokenKind::Percent => "%",
        TokenKind::Eq => "=",
        TokenKind::NotEq => "!=",
        TokenKind::Lt => "<",
        TokenKind::LtEq => "<=",
        TokenKind::Gt => ">",
        TokenKind::GtEq => ">=",
        TokenKind::Semicolon => ";",
        TokenKind::Concat => "||",
        _ => "?",
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    /// Character offsets into the source.
    pub start: usize,
    pub end: usize,
}

pub fn tokenize(src: &str) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    let err = |pos: usize, msg: &str| ParseError {
        position: pos,
        found: msg.to_string(),
        expected: Vec::new(),
    };
    while i < chars.len() {
        let c = chars[i];
        let start = i;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c == '-' && chars.get(i + 1) == Some(&'-') {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let kind = if c.is_alphabetic() || c == '_' {
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_' || chars[i] == '$') {
                i += 1;
            }
            TokenKind::Word(chars[start..i].iter().collect())
        } else if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            if i < chars.len() && chars[i] == '.' {
                i += 1;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            if i < chars.len() && (chars[i].is_alphabetic() || chars[i] == '_') {
                return Err(err(i, "malformed number"));
            }
            TokenKind::Number(chars[start..i].iter().collect())
        } else if c == '\'' || c == '"' || c == '`' || c == '[' {
            let close = if c == '[' { ']' } else { c };
            i += 1;
            let mut s = String::new();
            loop {
                match chars.get(i) {
                    None => return Err(err(start, "unterminated quoted token")),
                    Some(&ch) if ch == close => {
                        if close != ']' && chars.get(i + 1) == Some(&close) {
                            s.push(close);
                            i += 2;
                        } else {
                            i += 1;
                            break;
                        }
                    }
                    Some(&ch) => {
                        s.push(ch);
                        i += 1;
                    }
                }
            }
            if c == '\'' || c == '"' {
                TokenKind::Str(s)
            } else {
                TokenKind::QuotedIdent(s)
            }
        } else {
            let next = chars.get(i + 1).copied();
            let (kind, len) = match (c, next) {
                ('!', Some('=')) => (TokenKind::NotEq, 2),
                ('<', Some('>')) => (TokenKind::NotEq, 2),
                ('<', Some('=')) => (TokenKind::LtEq, 2),
                ('>', Some('=')) => (TokenKind::GtEq, 2),
                ('=', Some('=')) => (TokenKind::Eq, 2),
                ('|', Some('|')) => (TokenKind::Concat, 2),
                ('(', _) => (TokenKind::LParen, 1),
                (')', _) => (TokenKind::RParen, 1),
                (',', _) => (TokenKind::Comma, 1),
                ('.', _) => (TokenKind::Dot, 1),
                ('*', _) => (TokenKind::Star, 1),
                ('+', _) => (TokenKind::Plus, 1),
                ('-', _) => (TokenKind::Minus, 1),
                ('/', _) => (TokenKind::Slash, 1),
                ('%', _) => (TokenKind::Percent, 1),
                ('=', _) => (TokenKind::Eq, 1),
                ('<', _) => (TokenKind::Lt, 1),
                ('>', _) => (TokenKind::Gt, 1),
                (';', _) => (TokenKind::Semicolon, 1),
                _ => return Err(err(i, &format!("unexpected character `{c}`"))),
            };
            i += len;
            kind
        };
        out.push(Token { kind, start, end: i });
    }
    out.push(Token {
        kind: TokenKind::Eof,
        start: chars.len(),
        end: chars.len(),
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(s: &str) -> Vec<TokenKind> {
        tokenize(s).unwrap().into_iter().map(|t| t.kind).collect()
    }

    #[test]
    fn basic_tokens() {
        assert_eq!(
            kinds("SELECT T1.a, 'it''s' FROM t WHERE x <> 1.5"),
            vec![
                TokenKind::Word("SELECT".into()),
                TokenKind::Word("T1".into()),
                TokenKind::Dot,
                TokenKind::Word("a".into()),
                TokenKind::Comma,
                TokenKind::Str("it's".into()),
                TokenKind::Word("FROM".into()),
                TokenKind::Word("t".into()),
                TokenKind::Word("WHERE".into()),
                TokenKind::Word("x".into()),
                TokenKind::NotEq,
                TokenKind::Number("1.5".into()),
                TokenKind::Eof,
            ]
        );
    }

    #[test]
    fn positions_are_char_offsets() {
        let toks = tokenize("'é' x").unwrap();
        assert_eq!((toks[1].start, toks[1].end), (4, 5));
    }

    #[test]
    fn unterminated_string() {
        assert!(tokenize("select 'abc").is_err());
    }
}
