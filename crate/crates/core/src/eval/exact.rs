use crate::sql::{canonicalize_with, parse_sql, CanonMode, SqlError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EmOutcome {
    Match,
    Mismatch,
    PredInvalid(SqlError),
    GoldInvalid(SqlError),
}

impl EmOutcome {
    pub fn is_match(&self) -> bool {
        matches!(self, EmOutcome::Match)
    }
}

/// Compares canonical forms. A query that does not parse never matches.
pub fn compare_exact(pred: &str, gold: &str, mode: CanonMode) -> EmOutcome {
    let pred = match parse_sql(pred) {
        Ok(q) => q,
        Err(e) => return EmOutcome::PredInvalid(e),
    };
    let gold = match parse_sql(gold) {
        Ok(q) => q,
        Err(e) => return EmOutcome::GoldInvalid(e),
    };
    if canonicalize_with(&pred, mode) == canonicalize_with(&gold, mode) {
        EmOutcome::Match
    } else {
        EmOutcome::Mismatch
    }
}

pub fn exact_match(pred: &str, gold: &str, mode: CanonMode) -> bool {
    compare_exact(pred, gold, mode).is_match()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_strings_match_in_both_modes() {
        let q = "SELECT name FROM singer WHERE age > 20";
        assert!(exact_match(q, q, CanonMode::Component));
        assert!(exact_match(q, q, CanonMode::Strict));
    }

    #[test]
    fn reordered_select_items() {
        let a = "SELECT name, country FROM singer";
        let b = "SELECT country, name FROM singer";
        assert!(exact_match(a, b, CanonMode::Component));
        assert!(!exact_match(a, b, CanonMode::Strict));
    }

    #[test]
    fn string_literals_keep_case() {
        let gold = "SELECT Country FROM AIRLINES WHERE Airline = \"JetBlue Airways\"";
        let pred = "SELECT Country FROM airlines WHERE Airline = 'Jetblue Airways'";
        assert!(!exact_match(pred, gold, CanonMode::Component));
        assert!(exact_match(&pred.replace("Jetblue", "JetBlue"), gold, CanonMode::Component));
    }

    #[test]
    fn unparseable_prediction() {
        assert!(matches!(
            compare_exact("SELEC x", "SELECT x FROM t", CanonMode::Component),
            EmOutcome::PredInvalid(_)
        ));
    }
}
