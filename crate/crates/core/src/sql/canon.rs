//! Canonical forms for query comparison.
//!
//! Identifiers are case-folded and table aliases renamed by position in the
//! FROM clause (`t1`, `t2`, ... at the top level; `t<depth>_<n>` inside nested
//! scopes so correlated references stay unambiguous). A scope with a single
//! table drops its alias and all qualifiers that point at it. String literals
//! keep their case; numeric literals are normalized.
//!
//! In [`CanonMode::Component`] the commutative parts of a query are also put
//! in a fixed order: select items, GROUP BY keys, AND/OR chains, IN lists,
//! operands of `=`/`!=`, and the tables of an inner-join FROM clause (with all
//! ON conditions merged into one chain on the last join).

use super::ast::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CanonMode {
    /// Unordered comparison of commutative components.
    #[default]
    Component,
    /// Order-preserving.
    Strict,
}

/// Canonical form in the default (component) mode.
pub fn canonicalize(q: &Query) -> Query {
    canonicalize_with(q, CanonMode::Component)
}

pub fn canonicalize_with(q: &Query, mode: CanonMode) -> Query {
    let mut q = q.clone();
    let mut c = Canon {
        mode,
        scopes: Vec::new(),
    };
    c.query(&mut q, 0);
    q
}

struct ScopeEntry {
    key: String,
    alias: Option<String>,
}

struct Canon {
    mode: CanonMode,
    scopes: Vec<Vec<ScopeEntry>>,
}

fn fold(id: &mut Ident) {
    id.value = id.value.to_lowercase();
    id.quoted = false;
}

fn normalize_number(s: &str) -> String {
    let s = s.trim_start_matches('+');
    if s.contains(['.', 'e', 'E']) {
        match s.parse::<f64>() {
            Ok(v) if v.is_finite() => v.to_string(),
            _ => s.to_string(),
        }
    } else {
        let t = s.trim_start_matches('0');
        if t.is_empty() {
            "0".into()
        } else {
            t.to_string()
        }
    }
}

fn split_chain(e: Expr, op: BinaryOp, out: &mut Vec<Expr>) {
    match e {
        Expr::Binary {
            op: o,
            left,
            right,
        } if o == op => {
            split_chain(*left, op, out);
            split_chain(*right, op, out);
        }
        other => out.push(other),
    }
}

fn join_chain(mut items: Vec<Expr>, op: BinaryOp) -> Option<Expr> {
    if items.is_empty() {
        return None;
    }
    let first = items.remove(0);
    Some(items.into_iter().fold(first, |acc, e| Expr::binary(op, acc, e)))
}

fn sort_by_text<T: std::fmt::Display>(items: &mut [T]) {
    items.sort_by_cached_key(|e| e.to_string());
}

impl Canon {
    fn query(&mut self, q: &mut Query, depth: usize) {
        match q {
            Query::Select(s) => self.select(s, depth),
            Query::SetOp { left, right, .. } => {
                self.query(left, depth);
                self.query(right, depth);
            }
        }
    }

    fn alias_name(depth: usize, i: usize) -> String {
        if depth == 0 {
            format!("t{i}")
        } else {
            format!("t{depth}_{i}")
        }
    }

    fn select(&mut self, s: &mut Select, depth: usize) {
        let mut scope = Vec::new();
        if let Some(from) = s.from.take() {
            let FromClause { first, joins } = from;
            let mut factors = vec![(first, None)];
            factors.extend(joins.into_iter().map(|j| (j.factor, j.on)));

            for (f, _) in &mut factors {
                match f {
                    TableFactor::Table { name, alias } => {
                        fold(name);
                        if let Some(a) = alias {
                            fold(a);
                        }
                    }
                    TableFactor::Derived { query, alias } => {
                        if let Some(a) = alias {
                            fold(a);
                        }
                        self.query(query, depth + 1);
                    }
                }
            }

            let mut merged_on = Vec::new();
            if self.mode == CanonMode::Component {
                for (_, on) in &mut factors {
                    if let Some(e) = on.take() {
                        split_chain(e, BinaryOp::And, &mut merged_on);
                    }
                }
                factors.sort_by_key(|(f, _)| match f {
                    TableFactor::Table { name, .. } => (0, name.value.clone()),
                    TableFactor::Derived { .. } => (1, String::new()),
                });
            }

            let single = factors.len() == 1;
            for (i, (f, _)) in factors.iter_mut().enumerate() {
                let key = match (&*f, f.alias()) {
                    (_, Some(a)) => Some(a.value.clone()),
                    (TableFactor::Table { name, .. }, None) => Some(name.value.clone()),
                    (TableFactor::Derived { .. }, None) => None,
                };
                let alias = (!single).then(|| Self::alias_name(depth, i + 1));
                *f.alias_mut() = alias.clone().map(Ident::new);
                if let Some(key) = key {
                    scope.push(ScopeEntry { key, alias });
                }
            }

            let mut iter = factors.into_iter();
            let (first, _) = iter.next().expect("at least one factor");
            let mut joins: Vec<Join> = iter.map(|(factor, on)| Join { factor, on }).collect();
            if !merged_on.is_empty() {
                if let Some(last) = joins.last_mut() {
                    last.on = join_chain(merged_on, BinaryOp::And);
                }
            }
            s.from = Some(FromClause { first, joins });
        }

        self.scopes.push(scope);
        if let Some(from) = &mut s.from {
            for j in &mut from.joins {
                if let Some(on) = &mut j.on {
                    self.expr(on, depth);
                }
            }
        }
        for item in &mut s.items {
            self.expr(&mut item.expr, depth);
            if let Some(a) = &mut item.alias {
                fold(a);
            }
        }
        if let Some(w) = &mut s.where_clause {
            self.expr(w, depth);
        }
        for g in &mut s.group_by {
            self.expr(g, depth);
        }
        if let Some(h) = &mut s.having {
            self.expr(h, depth);
        }
        for o in &mut s.order_by {
            self.expr(&mut o.expr, depth);
        }
        self.scopes.pop();

        if self.mode == CanonMode::Component {
            sort_by_text(&mut s.items);
            sort_by_text(&mut s.group_by);
        }
    }

    fn resolve(&self, qualifier: &str) -> Option<Option<String>> {
        self.scopes
            .iter()
            .rev()
            .flat_map(|scope| scope.iter())
            .find(|e| e.key == qualifier)
            .map(|e| e.alias.clone())
    }

    fn requalify(&self, qualifier: &mut Option<Ident>) {
        if let Some(q) = qualifier {
            fold(q);
            match self.resolve(&q.value) {
                Some(alias) => *qualifier = alias.map(Ident::new),
                // Left quoted so a dangling `T1` cannot pass for the canonical `t1`.
                None => q.quoted = true,
            }
        }
    }

    fn expr(&mut self, e: &mut Expr, depth: usize) {
        match e {
            Expr::Column {
                qualifier, name, ..
            } => {
                fold(name);
                self.requalify(qualifier);
            }
            Expr::Wildcard { qualifier } => self.requalify(qualifier),
            Expr::Literal(Literal::Number(n)) => *n = normalize_number(n),
            Expr::Literal(_) => {}
            Expr::Unary { expr, .. } => self.expr(expr, depth),
            Expr::Binary { op, left, right } => {
                self.expr(left, depth);
                self.expr(right, depth);
                if self.mode == CanonMode::Component {
                    match op {
                        BinaryOp::And | BinaryOp::Or => {
                            let op = *op;
                            let taken = std::mem::replace(e, Expr::Literal(Literal::Null));
                            let mut parts = Vec::new();
                            split_chain(taken, op, &mut parts);
                            sort_by_text(&mut parts);
                            *e = join_chain(parts, op).expect("non-empty chain");
                        }
                        BinaryOp::Eq | BinaryOp::NotEq if left.to_string() > right.to_string() => {
                            std::mem::swap(left, right);
                        }
                        _ => {}
                    }
                }
            }
            Expr::Aggregate { arg, .. } => self.expr(arg, depth),
            Expr::Between {
                expr, low, high, ..
            } => {
                self.expr(expr, depth);
                self.expr(low, depth);
                self.expr(high, depth);
            }
            Expr::InList { expr, list, .. } => {
                self.expr(expr, depth);
                for item in list.iter_mut() {
                    self.expr(item, depth);
                }
                if self.mode == CanonMode::Component {
                    sort_by_text(list);
                }
            }
            Expr::InSubquery { expr, query, .. } => {
                self.expr(expr, depth);
                self.query(query, depth + 1);
            }
            Expr::Like { expr, pattern, .. } => {
                self.expr(expr, depth);
                self.expr(pattern, depth);
            }
            Expr::IsNull { expr, .. } => self.expr(expr, depth),
            Expr::Subquery(q) => self.query(q, depth + 1),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sql::parse_sql;

    fn canon(s: &str) -> String {
        canonicalize(&parse_sql(s).unwrap()).to_string()
    }

    fn strict(s: &str) -> String {
        canonicalize_with(&parse_sql(s).unwrap(), CanonMode::Strict).to_string()
    }

    #[test]
    fn case_folding() {
        assert_eq!(canon("select A from b"), canon("SELECT a FROM B"));
        assert_eq!(canon("select A from b"), "SELECT a FROM b");
    }

    #[test]
    fn and_chain_commutes() {
        assert_eq!(
            canon("SELECT a FROM t WHERE x=1 AND y=2"),
            canon("SELECT a FROM t WHERE y=2 AND x=1")
        );
        assert_ne!(
            strict("SELECT a FROM t WHERE x=1 AND y=2"),
            strict("SELECT a FROM t WHERE y=2 AND x=1")
        );
    }

    #[test]
    fn join_order_and_aliases() {
        let gold = "SELECT count(*) FROM FLIGHTS AS T1 JOIN AIRPORTS AS T2 ON T1.DestAirport = T2.AirportCode WHERE T2.City = \"Aberdeen\"";
        let pred = "SELECT count(*) FROM airports AS T1 JOIN flights AS T2 ON T1.AirportCode = T2.DestAirport WHERE T1.City = \"Aberdeen\"";
        assert_eq!(canon(gold), canon(pred));
        assert_eq!(
            canon(gold),
            "SELECT count(*) FROM airports AS t1 JOIN flights AS t2 ON t1.airportcode = t2.destairport WHERE 'Aberdeen' = t1.city"
        );
        assert_ne!(strict(gold), strict(pred));
    }

    #[test]
    fn single_table_qualifiers_dropped() {
        assert_eq!(
            canon("SELECT T1.name FROM people AS T1 WHERE T1.age > 3"),
            canon("SELECT name FROM people WHERE age > 3")
        );
    }

    #[test]
    fn dangling_qualifier_is_not_a_canonical_alias() {
        let gold = "SELECT T1.a FROM x AS T1 JOIN y AS T2 ON T1.id = T2.id";
        let pred = "SELECT T1.a FROM x AS Ty JOIN y AS T2 ON T1.id = T2.id";
        assert_ne!(canon(gold), canon(pred));
        assert_ne!(canon("SELECT T1.a FROM x"), canon("SELECT a FROM x"));
    }

    #[test]
    fn literals_keep_case() {
        assert_ne!(
            canon("SELECT Country FROM airlines WHERE Airline = 'JetBlue Airways'"),
            canon("SELECT Country FROM airlines WHERE Airline = 'Jetblue Airways'")
        );
        assert_eq!(
            canon("SELECT a FROM t WHERE b = \"x\" AND c = 1.50"),
            canon("SELECT a FROM t WHERE b = 'x' AND c = 1.5")
        );
    }

    #[test]
    fn nested_scopes_get_depth_aliases() {
        let c = canon(
            "SELECT T1.name FROM a AS T1 JOIN b AS T2 ON T1.id = T2.id WHERE T1.id IN \
             (SELECT T1.id FROM c AS T1 JOIN d AS T2 ON T1.k = T2.k)",
        );
        assert!(c.contains("t1_1.id"), "{c}");
    }

    #[test]
    fn idempotent() {
        for s in [
            "SELECT T2.name, count(*) FROM a AS T1 JOIN b AS T2 ON T1.id = T2.aid GROUP BY T1.id ORDER BY count(*) DESC LIMIT 1",
            "SELECT name FROM singer WHERE age > (SELECT avg(age) FROM singer) OR x IN (3, 1, 2)",
            "SELECT a FROM (SELECT a, b FROM t) WHERE b = 1 UNION SELECT a FROM u",
        ] {
            let once = canonicalize(&parse_sql(s).unwrap());
            let twice = canonicalize(&parse_sql(&once.to_string()).unwrap());
            assert_eq!(once, twice, "{s}");
            assert_eq!(canonicalize(&once), once);
        }
    }
}
