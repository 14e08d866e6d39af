//! Gold, prediction and verdict files.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{EvalError, EvalExample, Verdict};

/// One entry of a Spider-format gold file. Extra fields are ignored.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldEntry {
    pub db_id: String,
    #[serde(default)]
    pub question: String,
    pub query: String,
}

fn read(path: &Path) -> Result<String, EvalError> {
    fs::read_to_string(path).map_err(|e| EvalError::Io {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

pub fn parse_gold(text: &str) -> Result<Vec<GoldEntry>, String> {
    serde_json::from_str(text).map_err(|e| e.to_string())
}

pub fn read_gold(path: &Path) -> Result<Vec<GoldEntry>, EvalError> {
    parse_gold(&read(path)?).map_err(|reason| EvalError::Format {
        path: path.to_path_buf(),
        line: None,
        reason,
    })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct IndexedPrediction {
    index: usize,
    sql: String,
}

/// Parses predictions for `expected` gold entries. Two layouts are accepted:
/// JSONL objects `{"index": i, "sql": "..."}`, where missing indices count as
/// empty predictions, or plain text with one SQL statement per line aligned
/// with the gold file. The layout is JSONL when the first non-blank line
/// starts with `{`. Errors carry the 1-based line number.
pub fn parse_predictions(text: &str, expected: usize) -> Result<Vec<String>, (Option<usize>, String)> {
    let first = text.lines().find(|l| !l.trim().is_empty());
    if first.is_some_and(|l| l.trim_start().starts_with('{')) {
        let mut out: Vec<Option<String>> = vec![None; expected];
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let p: IndexedPrediction =
                serde_json::from_str(line).map_err(|e| (Some(i + 1), e.to_string()))?;
            let slot = out
                .get_mut(p.index)
                .ok_or_else(|| (Some(i + 1), format!("index {} out of range 0..{expected}", p.index)))?;
            if slot.is_some() {
                return Err((Some(i + 1), format!("duplicate index {}", p.index)));
            }
            *slot = Some(p.sql);
        }
        return Ok(out.into_iter().map(Option::unwrap_or_default).collect());
    }
    let mut lines: Vec<String> = text.lines().map(|l| l.trim_end_matches('\r').to_string()).collect();
    while lines.len() > expected && lines.last().is_some_and(|l| l.trim().is_empty()) {
        lines.pop();
    }
    if lines.len() != expected {
        return Err((None, format!("{} prediction lines for {expected} gold queries", lines.len())));
    }
    Ok(lines)
}

pub fn read_predictions(path: &Path, expected: usize) -> Result<Vec<String>, EvalError> {
    parse_predictions(&read(path)?, expected).map_err(|(line, reason)| EvalError::Format {
        path: path.to_path_buf(),
        line,
        reason,
    })
}

/// Zips gold entries with predictions by index.
pub fn pair_examples(gold: &[GoldEntry], preds: &[String]) -> Vec<EvalExample> {
    gold.iter()
        .zip(preds)
        .map(|(g, p)| EvalExample {
            db_id: g.db_id.clone(),
            question: g.question.clone(),
            gold_sql: g.query.clone(),
            predicted_sql: p.clone(),
        })
        .collect()
}

pub fn write_verdicts<W: Write>(mut w: W, verdicts: &[Verdict]) -> std::io::Result<()> {
    for v in verdicts {
        serde_json::to_writer(&mut w, v)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plain_lines() {
        let p = parse_predictions("SELECT 1\nSELECT 2\n", 2).unwrap();
        assert_eq!(p, vec!["SELECT 1", "SELECT 2"]);
        assert!(parse_predictions("SELECT 1\n", 2).is_err());
        // An empty prediction keeps its slot.
        assert_eq!(parse_predictions("SELECT 1\n\n", 2).unwrap(), vec!["SELECT 1", ""]);
    }

    #[test]
    fn indexed_jsonl() {
        let text = "{\"index\": 1, \"sql\": \"SELECT 2\"}\n{\"index\": 0, \"sql\": \"SELECT 1\"}\n";
        assert_eq!(parse_predictions(text, 3).unwrap(), vec!["SELECT 1", "SELECT 2", ""]);
        let dup = "{\"index\": 0, \"sql\": \"a\"}\n{\"index\": 0, \"sql\": \"b\"}\n";
        assert_eq!(parse_predictions(dup, 1).unwrap_err().0, Some(2));
        let bad = "{\"index\": 0, \"sql\": \"a\"}\n{oops\n";
        assert_eq!(parse_predictions(bad, 1).unwrap_err().0, Some(2));
    }

    #[test]
    fn gold_ignores_extra_fields() {
        let g = parse_gold(r#"[{"db_id": "a", "query": "SELECT 1", "question": "q", "query_toks": []}]"#).unwrap();
        assert_eq!(g[0].db_id, "a");
    }
}
