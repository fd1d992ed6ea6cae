//! Phrase and SQL-subset search over the `records` table.

mod sql;

use std::collections::HashSet;

use thiserror::Error;

use crate::store::Record;

pub use sql::{
    execute_sql, like_match, parse_sql, CmpOp, Column, Literal, Predicate, Projection, SqlQuery,
    FORBIDDEN_STATEMENTS, MAX_NESTING,
};

pub const RECORDS_TABLE: &str = "records";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SearchError {
    /// Syntax error; `position` is a 1-based character index.
    #[error("at position {position}: {message}")]
    Parse { position: usize, message: String },
    #[error("type mismatch: {0}")]
    Type(String),
    #[error("statement {0} is not allowed")]
    Forbidden(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    /// Canonical text of the query that was actually run.
    pub interpreted: String,
    pub total: usize,
}

impl SearchResult {
    fn new(columns: Vec<String>, rows: Vec<Vec<Cell>>, interpreted: String) -> Self {
        let total = rows.len();
        SearchResult {
            columns,
            rows,
            interpreted,
            total,
        }
    }
}

/// Lowercases and splits on anything that is not alphanumeric.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

fn record_tokens(r: &Record) -> Vec<String> {
    let mut tokens = tokenize(&r.name);
    tokens.extend(tokenize(&r.category));
    tokens.extend(tokenize(&r.description));
    tokens
}

pub(crate) fn record_row(r: &Record) -> Vec<Cell> {
    vec![
        Cell::Int(r.id),
        Cell::Text(r.name.clone()),
        Cell::Text(r.category.clone()),
        Cell::Text(r.description.clone()),
    ]
}

/// Records whose text fields contain every query token. Ranked by how many
/// of the record's tokens hit the query (descending), then by ascending id.
pub fn phrase_search(text: &str, records: &[Record]) -> SearchResult {
    let mut query: Vec<String> = Vec::new();
    for t in tokenize(text) {
        if !query.contains(&t) {
            query.push(t);
        }
    }
    let interpreted = format!("phrase:{}", query.join(" "));
    let columns = Column::ALL.iter().map(|c| c.name().to_owned()).collect();
    if query.is_empty() {
        return SearchResult::new(columns, Vec::new(), interpreted);
    }
    let wanted: HashSet<&str> = query.iter().map(String::as_str).collect();
    let mut hits: Vec<(usize, &Record)> = records
        .iter()
        .filter_map(|r| {
            let tokens = record_tokens(r);
            let present: HashSet<&str> = tokens.iter().map(String::as_str).collect();
            if !wanted.iter().all(|t| present.contains(t)) {
                return None;
            }
            let score = tokens.iter().filter(|t| wanted.contains(t.as_str())).count();
            Some((score, r))
        })
        .collect();
    hits.sort_by(|(sa, ra), (sb, rb)| sb.cmp(sa).then(ra.id.cmp(&rb.id)));
    let rows = hits.into_iter().map(|(_, r)| record_row(r)).collect();
    SearchResult::new(columns, rows, interpreted)
}
