//! Recursive-descent parser for the Spider query dialect.

use super::ast::*;
use super::lexer::{tokenize, Token, TokenKind};
use super::{ParseError, SqlError};

const RESERVED: &[&str] = &[
    "ALL", "AND", "AS", "ASC", "BETWEEN", "BY", "CASE", "CROSS", "DESC", "DISTINCT", "ELSE",
    "END", "EXCEPT", "EXISTS", "FROM", "FULL", "GROUP", "HAVING", "IN", "INNER", "INTERSECT",
    "IS", "JOIN", "LEFT", "LIKE", "LIMIT", "NATURAL", "NOT", "NULL", "OFFSET", "ON", "OR",
    "ORDER", "OUTER", "RIGHT", "SELECT", "THEN", "UNION", "USING", "WHEN", "WHERE", "WITH",
];

/// Words that cannot serve as bare identifiers or implicit aliases.
pub fn is_reserved(word: &str) -> bool {
    RESERVED.iter().any(|r| r.eq_ignore_ascii_case(word))
}

/// Parses one statement. A trailing semicolon is accepted.
pub fn parse_sql(text: &str) -> Result<Query, SqlError> {
    let tokens = tokenize(text)?;
    let mut p = Parser { tokens, pos: 0 };
    let q = p.parse_query()?;
    p.eat(&TokenKind::Semicolon);
    if !p.at(&TokenKind::Eof) {
        return Err(p.unexpected(&["end of input"]));
    }
    Ok(q)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn peek_at(&self, offset: usize) -> &TokenKind {
        let i = (self.pos + offset).min(self.tokens.len() - 1);
        &self.tokens[i].kind
    }

    fn advance(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos < self.tokens.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn at(&self, kind: &TokenKind) -> bool {
        &self.peek().kind == kind
    }

    fn eat(&mut self, kind: &TokenKind) -> bool {
        if self.at(kind) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn at_kw(&self, kw: &str) -> bool {
        matches!(&self.peek().kind, TokenKind::Word(w) if w.eq_ignore_ascii_case(kw))
    }

    fn kw_at(&self, offset: usize, kw: &str) -> bool {
        matches!(self.peek_at(offset), TokenKind::Word(w) if w.eq_ignore_ascii_case(kw))
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.at_kw(kw) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn unexpected(&self, expected: &[&str]) -> SqlError {
        let t = self.peek();
        SqlError::Parse(ParseError {
            position: t.start,
            found: t.kind.describe(),
            expected: expected.iter().map(|s| s.to_string()).collect(),
        })
    }

    fn unsupported(&self, feature: impl Into<String>) -> SqlError {
        SqlError::Unsupported {
            feature: feature.into(),
            position: self.peek().start,
        }
    }

    fn expect(&mut self, kind: TokenKind, label: &str) -> Result<Token, SqlError> {
        if self.at(&kind) {
            Ok(self.advance())
        } else {
            Err(self.unexpected(&[label]))
        }
    }

    fn expect_kw(&mut self, kw: &str) -> Result<(), SqlError> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            Err(self.unexpected(&[kw]))
        }
    }

    /// Rejects constructs outside the dialect with a precise feature name.
    fn check_unsupported_word(&self) -> Result<(), SqlError> {
        if let TokenKind::Word(w) = &self.peek().kind {
            let up = w.to_ascii_uppercase();
            let feature = match up.as_str() {
                "LEFT" | "RIGHT" | "FULL" | "OUTER" | "CROSS" | "NATURAL" => "outer/cross joins",
                "USING" => "JOIN ... USING",
                "CASE" | "WHEN" => "CASE expressions",
                "EXISTS" => "EXISTS",
                "WITH" => "common table expressions",
                "OFFSET" => "OFFSET",
                "INSERT" | "UPDATE" | "DELETE" | "CREATE" | "DROP" | "ALTER" | "REPLACE" | "PRAGMA" => {
                    "non-SELECT statements"
                }
                _ => return Ok(()),
            };
            return Err(self.unsupported(feature));
        }
        if self.at(&TokenKind::Concat) {
            return Err(self.unsupported("string concatenation"));
        }
        Ok(())
    }

    fn parse_query(&mut self) -> Result<Query, SqlError> {
        let mut left = Query::Select(Box::new(self.parse_select()?));
        loop {
            let op = if self.eat_kw("UNION") {
                SetOperator::Union
            } else if self.eat_kw("INTERSECT") {
                SetOperator::Intersect
            } else if self.eat_kw("EXCEPT") {
                SetOperator::Except
            } else {
                break;
            };
            if self.at_kw("ALL") {
                return Err(self.unsupported("UNION ALL"));
            }
            let right = Query::Select(Box::new(self.parse_select()?));
            left = Query::SetOp {
                op,
                left: Box::new(left),
                right: Box::new(right),
            };
        }
        Ok(left)
    }

    fn parse_select(&mut self) -> Result<Select, SqlError> {
        self.check_unsupported_word()?;
        if self.at(&TokenKind::Eof) {
            return Err(self.unexpected(&["SELECT"]));
        }
        self.expect_kw("SELECT")?;
        let distinct = self.eat_kw("DISTINCT");
        if self.at_kw("ALL") {
            self.advance();
        }
        let mut items = vec![self.parse_select_item()?];
        while self.eat(&TokenKind::Comma) {
            items.push(self.parse_select_item()?);
        }
        let from = if self.eat_kw("FROM") {
            Some(self.parse_from()?)
        } else {
            None
        };
        let where_clause = if self.eat_kw("WHERE") {
            Some(self.parse_expr()?)
        } else {
            None
        };
        let mut group_by = Vec::new();
        if self.eat_kw("GROUP") {
            self.expect_kw("BY")?;
            group_by.push(self.parse_expr()?);
            while self.eat(&TokenKind::Comma) {
                group_by.push(self.parse_expr()?);
            }
        }
        let having = if self.eat_kw("HAVING") {
            Some(self.parse_expr()?)
        } else {
            None
        };
        let mut order_by = Vec::new();
        if self.eat_kw("ORDER") {
            self.expect_kw("BY")?;
            loop {
                let expr = self.parse_expr()?;
                let direction = if self.eat_kw("DESC") {
                    Direction::Desc
                } else {
                    self.eat_kw("ASC");
                    Direction::Asc
                };
                order_by.push(OrderItem { expr, direction });
                if !self.eat(&TokenKind::Comma) {
                    break;
                }
            }
        }
        let limit = if self.eat_kw("LIMIT") {
            let t = self.peek().clone();
            match &t.kind {
                TokenKind::Number(n) => {
                    let v = n.parse::<u64>().map_err(|_| self.unexpected(&["integer"]))?;
                    self.advance();
                    if self.at(&TokenKind::Comma) {
                        return Err(self.unsupported("LIMIT with offset"));
                    }
                    Some(v)
                }
                _ => return Err(self.unexpected(&["integer"])),
            }
        } else {
            None
        };
        self.check_unsupported_word()?;
        Ok(Select {
            distinct,
            items,
            from,
            where_clause,
            group_by,
            having,
            order_by,
            limit,
        })
    }

    fn parse_select_item(&mut self) -> Result<SelectItem, SqlError> {
        let expr = if self.at(&TokenKind::Star) {
            self.advance();
            Expr::Wildcard { qualifier: None }
        } else {
            self.parse_expr()?
        };
        let alias = self.parse_alias()?;
        Ok(SelectItem { expr, alias })
    }

    fn parse_alias(&mut self) -> Result<Option<Ident>, SqlError> {
        if self.eat_kw("AS") {
            return self.parse_ident(&["alias"]).map(Some);
        }
        match &self.peek().kind {
            TokenKind::Word(w) if !is_reserved(w) => Ok(Some(self.parse_ident(&["alias"])?)),
            TokenKind::QuotedIdent(_) => Ok(Some(self.parse_ident(&["alias"])?)),
            _ => Ok(None),
        }
    }

    fn parse_ident(&mut self, expected: &[&str]) -> Result<Ident, SqlError> {
        match self.peek().kind.clone() {
            TokenKind::Word(w) if !is_reserved(&w) => {
                self.advance();
                Ok(Ident::new(w))
            }
            TokenKind::QuotedIdent(w) => {
                self.advance();
                Ok(Ident {
                    value: w,
                    quoted: true,
                })
            }
            _ => {
                self.check_unsupported_word()?;
                Err(self.unexpected(expected))
            }
        }
    }

    fn parse_from(&mut self) -> Result<FromClause, SqlError> {
        let first = self.parse_table_factor()?;
        let mut joins = Vec::new();
        loop {
            self.check_unsupported_word()?;
            if self.eat(&TokenKind::Comma) {
                joins.push(Join {
                    factor: self.parse_table_factor()?,
                    on: None,
                });
                continue;
            }
            if self.at_kw("INNER") && self.kw_at(1, "JOIN") {
                self.advance();
            }
            if !self.eat_kw("JOIN") {
                break;
            }
            let factor = self.parse_table_factor()?;
            let on = if self.eat_kw("ON") {
                Some(self.parse_expr()?)
            } else {
                None
            };
            joins.push(Join { factor, on });
        }
        Ok(FromClause { first, joins })
    }

    fn parse_table_factor(&mut self) -> Result<TableFactor, SqlError> {
        if self.at(&TokenKind::LParen) {
            if !self.kw_at(1, "SELECT") {
                return Err(self.unsupported("parenthesized joins"));
            }
            self.advance();
            let query = self.parse_query()?;
            self.expect(TokenKind::RParen, ")")?;
            let alias = self.parse_alias()?;
            return Ok(TableFactor::Derived {
                query: Box::new(query),
                alias,
            });
        }
        let name = self.parse_ident(&["table name", "("])?;
        if self.at(&TokenKind::Dot) {
            return Err(self.unsupported("schema-qualified table names"));
        }
        let alias = self.parse_alias()?;
        Ok(TableFactor::Table { name, alias })
    }

    pub fn parse_expr(&mut self) -> Result<Expr, SqlError> {
        self.parse_or()
    }

    fn parse_or(&mut self) -> Result<Expr, SqlError> {
        let mut left = self.parse_and()?;
        while self.eat_kw("OR") {
            let right = self.parse_and()?;
            left = Expr::binary(BinaryOp::Or, left, right);
        }
        Ok(left)
    }

    fn parse_and(&mut self) -> Result<Expr, SqlError> {
        let mut left = self.parse_not()?;
        while self.eat_kw("AND") {
            let right = self.parse_not()?;
            left = Expr::binary(BinaryOp::And, left, right);
        }
        Ok(left)
    }

    fn parse_not(&mut self) -> Result<Expr, SqlError> {
        if self.eat_kw("NOT") {
            let expr = self.parse_not()?;
            return Ok(Expr::Unary {
                op: UnaryOp::Not,
                expr: Box::new(expr),
            });
        }
        self.parse_predicate()
    }

    fn parse_predicate(&mut self) -> Result<Expr, SqlError> {
        let expr = self.parse_additive()?;
        let cmp = match &self.peek().kind {
            TokenKind::Eq => Some(BinaryOp::Eq),
            TokenKind::NotEq => Some(BinaryOp::NotEq),
            TokenKind::Lt => Some(BinaryOp::Lt),
            TokenKind::LtEq => Some(BinaryOp::LtEq),
            TokenKind::Gt => Some(BinaryOp::Gt),
            TokenKind::GtEq => Some(BinaryOp::GtEq),
            _ => None,
        };
        if let Some(op) = cmp {
            self.advance();
            let right = self.parse_additive()?;
            return Ok(Expr::binary(op, expr, right));
        }
        if self.eat_kw("IS") {
            let negated = self.eat_kw("NOT");
            self.expect_kw("NULL")?;
            return Ok(Expr::IsNull {
                expr: Box::new(expr),
                negated,
            });
        }
        let negated = if self.at_kw("NOT")
            && (self.kw_at(1, "IN") || self.kw_at(1, "LIKE") || self.kw_at(1, "BETWEEN"))
        {
            self.advance();
            true
        } else {
            false
        };
        if self.eat_kw("BETWEEN") {
            let low = self.parse_additive()?;
            self.expect_kw("AND")?;
            let high = self.parse_additive()?;
            return Ok(Expr::Between {
                expr: Box::new(expr),
                negated,
                low: Box::new(low),
                high: Box::new(high),
            });
        }
        if self.eat_kw("LIKE") {
            let pattern = self.parse_additive()?;
            if self.at_kw("ESCAPE") {
                return Err(self.unsupported("LIKE ... ESCAPE"));
            }
            return Ok(Expr::Like {
                expr: Box::new(expr),
                negated,
                pattern: Box::new(pattern),
            });
        }
        if self.eat_kw("IN") {
            self.expect(TokenKind::LParen, "(")?;
            if self.at_kw("SELECT") {
                let query = self.parse_query()?;
                self.expect(TokenKind::RParen, ")")?;
                return Ok(Expr::InSubquery {
                    expr: Box::new(expr),
                    negated,
                    query: Box::new(query),
                });
            }
            let mut list = vec![self.parse_expr()?];
            while self.eat(&TokenKind::Comma) {
                list.push(self.parse_expr()?);
            }
            self.expect(TokenKind::RParen, ")")?;
            return Ok(Expr::InList {
                expr: Box::new(expr),
                negated,
                list,
            });
        }
        if self.at_kw("GLOB") || self.at_kw("REGEXP") || self.at_kw("MATCH") {
            return Err(self.unsupported("pattern operators other than LIKE"));
        }
        Ok(expr)
    }

    fn parse_additive(&mut self) -> Result<Expr, SqlError> {
        let mut left = self.parse_multiplicative()?;
        loop {
            let op = match self.peek().kind {
                TokenKind::Plus => BinaryOp::Plus,
                TokenKind::Minus => BinaryOp::Minus,
                TokenKind::Concat => return Err(self.unsupported("string concatenation")),
                _ => break,
            };
            self.advance();
            let right = self.parse_multiplicative()?;
            left = Expr::binary(op, left, right);
        }
        Ok(left)
    }

    fn parse_multiplicative(&mut self) -> Result<Expr, SqlError> {
        let mut left = self.parse_unary()?;
        loop {
            let op = match self.peek().kind {
                TokenKind::Star => BinaryOp::Mul,
                TokenKind::Slash => BinaryOp::Div,
                TokenKind::Percent => BinaryOp::Mod,
                _ => break,
            };
            self.advance();
            let right = self.parse_unary()?;
            left = Expr::binary(op, left, right);
        }
        Ok(left)
    }

    fn parse_unary(&mut self) -> Result<Expr, SqlError> {
        if self.eat(&TokenKind::Minus) {
            let expr = self.parse_unary()?;
            return Ok(Expr::Unary {
                op: UnaryOp::Neg,
                expr: Box::new(expr),
            });
        }
        if self.eat(&TokenKind::Plus) {
            return self.parse_unary();
        }
        self.parse_primary()
    }

    fn parse_primary(&mut self) -> Result<Expr, SqlError> {
        self.check_unsupported_word()?;
        let tok = self.peek().clone();
        match tok.kind {
            TokenKind::Number(n) => {
                self.advance();
                Ok(Expr::Literal(Literal::Number(n)))
            }
            TokenKind::Str(s) => {
                self.advance();
                Ok(Expr::Literal(Literal::Str(s)))
            }
            TokenKind::LParen => {
                self.advance();
                let e = if self.at_kw("SELECT") {
                    Expr::Subquery(Box::new(self.parse_query()?))
                } else {
                    self.parse_expr()?
                };
                self.expect(TokenKind::RParen, ")")?;
                Ok(e)
            }
            TokenKind::Word(ref w) if w.eq_ignore_ascii_case("NULL") => {
                self.advance();
                Ok(Expr::Literal(Literal::Null))
            }
            TokenKind::Word(ref w) if matches!(self.peek_at(1), TokenKind::LParen) && !is_reserved(w) => {
                let Some(func) = AggFunc::from_name(w) else {
                    return Err(self.unsupported(format!("function `{w}`")));
                };
                self.advance();
                self.advance();
                let distinct = self.eat_kw("DISTINCT");
                let arg = if self.at(&TokenKind::Star) {
                    self.advance();
                    Expr::Wildcard { qualifier: None }
                } else {
                    self.parse_expr()?
                };
                if self.at(&TokenKind::Comma) {
                    return Err(self.unsupported("multi-argument aggregates"));
                }
                self.expect(TokenKind::RParen, ")")?;
                Ok(Expr::Aggregate {
                    func,
                    distinct,
                    arg: Box::new(arg),
                })
            }
            TokenKind::Word(_) | TokenKind::QuotedIdent(_) => {
                let first = self.parse_ident(&["expression"])?;
                if self.eat(&TokenKind::Dot) {
                    if self.eat(&TokenKind::Star) {
                        return Ok(Expr::Wildcard {
                            qualifier: Some(first),
                        });
                    }
                    let name_tok = self.peek().clone();
                    let name = self.parse_ident(&["column name", "*"])?;
                    return Ok(Expr::Column {
                        qualifier: Some(first),
                        name,
                        span: Span {
                            start: tok.start,
                            end: name_tok.end,
                        },
                    });
                }
                Ok(Expr::Column {
                    qualifier: None,
                    name: first,
                    span: Span {
                        start: tok.start,
                        end: tok.end,
                    },
                })
            }
            _ => Err(self.unexpected(&["expression"])),
        }
    }
}
