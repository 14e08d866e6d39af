use serde::Serialize;

use super::ast::*;
use crate::schema::DatabaseSchema;

/// One explicit column identifier occurring in a query.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ColumnRef {
    /// Real table the reference resolves to, if it could be determined.
    pub table: Option<String>,
    pub column: String,
    pub span: Span,
}

struct Entry {
    key: String,
    table: Option<String>,
}

struct Walker<'a> {
    schema: Option<&'a DatabaseSchema>,
    scopes: Vec<Vec<Entry>>,
    out: Vec<ColumnRef>,
}

/// Lists every explicit column identifier in every clause, subqueries
/// included, in source order. `*` and `count(*)` contribute nothing;
/// unresolvable references are kept with `table: None`.
pub fn extract_column_refs(q: &Query, schema: Option<&DatabaseSchema>) -> Vec<ColumnRef> {
    let mut w = Walker {
        schema,
        scopes: Vec::new(),
        out: Vec::new(),
    };
    w.query(q);
    w.out
}

impl Walker<'_> {
    fn query(&mut self, q: &Query) {
        match q {
            Query::Select(s) => self.select(s),
            Query::SetOp { left, right, .. } => {
                self.query(left);
                self.query(right);
            }
        }
    }

    fn table_name(&self, name: &Ident) -> String {
        self.schema
            .and_then(|s| s.table(&name.value))
            .map(|t| t.name.clone())
            .unwrap_or_else(|| name.value.clone())
    }

    fn select(&mut self, s: &Select) {
        let mut scope = Vec::new();
        if let Some(from) = &s.from {
            for f in from.factors() {
                match f {
                    TableFactor::Table { name, alias } => scope.push(Entry {
                        key: alias.as_ref().unwrap_or(name).value.to_lowercase(),
                        table: Some(self.table_name(name)),
                    }),
                    TableFactor::Derived { alias, .. } => {
                        if let Some(a) = alias {
                            scope.push(Entry {
                                key: a.value.to_lowercase(),
                                table: None,
                            });
                        }
                    }
                }
            }
        }
        let aliases: Vec<String> = s
            .items
            .iter()
            .filter_map(|i| i.alias.as_ref().map(|a| a.value.to_lowercase()))
            .collect();

        self.scopes.push(scope);
        for item in &s.items {
            self.expr(&item.expr, &[]);
        }
        if let Some(from) = &s.from {
            for f in from.factors() {
                if let TableFactor::Derived { query, .. } = f {
                    // Derived tables cannot see the enclosing FROM.
                    let saved = self.scopes.pop();
                    self.query(query);
                    self.scopes.extend(saved);
                }
            }
            for j in &from.joins {
                if let Some(on) = &j.on {
                    self.expr(on, &[]);
                }
            }
        }
        if let Some(w) = &s.where_clause {
            self.expr(w, &[]);
        }
        for g in &s.group_by {
            self.expr(g, &aliases);
        }
        if let Some(h) = &s.having {
            self.expr(h, &aliases);
        }
        for o in &s.order_by {
            self.expr(&o.expr, &aliases);
        }
        self.scopes.pop();
    }

    fn resolve(&self, qualifier: Option<&Ident>, column: &str) -> Option<String> {
        if let Some(q) = qualifier {
            let key = q.value.to_lowercase();
            return self
                .scopes
                .iter()
                .rev()
                .flat_map(|s| s.iter())
                .find(|e| e.key == key)
                .and_then(|e| e.table.clone());
        }
        for scope in self.scopes.iter().rev() {
            if let Some(schema) = self.schema {
                let hits: Vec<&String> = scope
                    .iter()
                    .filter_map(|e| e.table.as_ref())
                    .filter(|t| schema.table(t).is_some_and(|t| t.column(column).is_some()))
                    .collect();
                match hits.len() {
                    1 => return Some(hits[0].clone()),
                    0 => continue,
                    _ => return None,
                }
            } else {
                return match scope.as_slice() {
                    [only] => only.table.clone(),
                    _ => None,
                };
            }
        }
        match self.scopes.last().map(|s| s.as_slice()) {
            Some([only]) => only.table.clone(),
            _ => None,
        }
    }

    fn expr(&mut self, e: &Expr, select_aliases: &[String]) {
        match e {
            Expr::Column {
                qualifier,
                name,
                span,
            } => {
                if qualifier.is_none() && select_aliases.contains(&name.value.to_lowercase()) {
                    return;
                }
                let table = self.resolve(qualifier.as_ref(), &name.value);
                self.out.push(ColumnRef {
                    table,
                    column: name.value.clone(),
                    span: *span,
                });
            }
            Expr::Wildcard { .. } | Expr::Literal(_) => {}
            Expr::Unary { expr, .. } | Expr::IsNull { expr, .. } => self.expr(expr, select_aliases),
            Expr::Binary { left, right, .. } => {
                self.expr(left, select_aliases);
                self.expr(right, select_aliases);
            }
            Expr::Aggregate { arg, .. } => self.expr(arg, select_aliases),
            Expr::Between {
                expr, low, high, ..
            } => {
                self.expr(expr, select_aliases);
                self.expr(low, select_aliases);
                self.expr(high, select_aliases);
            }
            Expr::InList { expr, list, .. } => {
                self.expr(expr, select_aliases);
                for item in list {
                    self.expr(item, select_aliases);
                }
            }
            Expr::InSubquery { expr, query, .. } => {
                self.expr(expr, select_aliases);
                self.query(query);
            }
            Expr::Like { expr, pattern, .. } => {
                self.expr(expr, select_aliases);
                self.expr(pattern, select_aliases);
            }
            Expr::Subquery(q) => self.query(q),
        }
    }
}
