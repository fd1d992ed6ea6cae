//! `SELECT cols FROM records [WHERE pred] [LIMIT n]`
//!
//! Keywords are case-insensitive; string literals are single-quoted with
//! `''` as the escape for a quote. Comparisons are `column op literal` with
//! `op` one of `= != < <= > >= LIKE`, combined with `AND` (binding tighter)
//! and `OR`, and grouped with parentheses.

use std::cmp::Ordering;
use std::fmt;

use super::{record_row, Cell, SearchError, SearchResult, RECORDS_TABLE};
use crate::store::Record;

/// Leading keywords that are rejected as forbidden rather than malformed.
pub const FORBIDDEN_STATEMENTS: &[&str] = &[
    "INSERT", "UPDATE", "DELETE", "DROP", "CREATE", "ALTER", "TRUNCATE", "REPLACE", "MERGE",
    "UPSERT", "GRANT", "REVOKE", "ATTACH", "DETACH", "PRAGMA", "VACUUM", "EXEC", "EXECUTE",
    "CALL", "SET", "BEGIN", "COMMIT", "ROLLBACK", "RENAME", "LOAD", "COPY",
];

const RESERVED: &[&str] = &["SELECT", "FROM", "WHERE", "LIMIT", "AND", "OR", "LIKE"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Column {
    Id,
    Name,
    Category,
    Description,
}

impl Column {
    pub const ALL: [Column; 4] = [Column::Id, Column::Name, Column::Category, Column::Description];

    pub fn name(self) -> &'static str {
        match self {
            Column::Id => "id",
            Column::Name => "name",
            Column::Category => "category",
            Column::Description => "description",
        }
    }

    pub fn from_name(name: &str) -> Option<Column> {
        Column::ALL
            .into_iter()
            .find(|c| c.name().eq_ignore_ascii_case(name))
    }

    pub fn is_numeric(self) -> bool {
        self == Column::Id
    }

    fn cell(self, r: &Record) -> Cell {
        match self {
            Column::Id => Cell::Int(r.id),
            Column::Name => Cell::Text(r.name.clone()),
            Column::Category => Cell::Text(r.category.clone()),
            Column::Description => Cell::Text(r.description.clone()),
        }
    }

    fn text(self, r: &Record) -> &str {
        match self {
            Column::Id => unreachable!("id is numeric"),
            Column::Name => &r.name,
            Column::Category => &r.category,
            Column::Description => &r.description,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Like,
}

impl CmpOp {
    pub const ALL: [CmpOp; 7] = [
        CmpOp::Eq,
        CmpOp::Ne,
        CmpOp::Lt,
        CmpOp::Le,
        CmpOp::Gt,
        CmpOp::Ge,
        CmpOp::Like,
    ];

    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "=",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
            CmpOp::Like => "LIKE",
        }
    }

    fn holds(self, ord: Ordering) -> bool {
        match self {
            CmpOp::Eq => ord == Ordering::Equal,
            CmpOp::Ne => ord != Ordering::Equal,
            CmpOp::Lt => ord == Ordering::Less,
            CmpOp::Le => ord != Ordering::Greater,
            CmpOp::Gt => ord == Ordering::Greater,
            CmpOp::Ge => ord != Ordering::Less,
            CmpOp::Like => unreachable!("LIKE is not an ordering"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Literal {
    Int(i64),
    Float(f64),
    Text(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Predicate {
    Compare {
        column: Column,
        op: CmpOp,
        value: Literal,
    },
    And(Box<Predicate>, Box<Predicate>),
    Or(Box<Predicate>, Box<Predicate>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Projection {
    All,
    Columns(Vec<Column>),
}

impl Projection {
    pub fn columns(&self) -> Vec<Column> {
        match self {
            Projection::All => Column::ALL.to_vec(),
            Projection::Columns(cols) => cols.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SqlQuery {
    pub projection: Projection,
    pub table: String,
    pub predicate: Option<Predicate>,
    pub limit: Option<u64>,
}

// ---- rendering ----

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Literal::Int(n) => write!(f, "{n}"),
            Literal::Float(x) => write!(f, "{x:?}"),
            Literal::Text(s) => write!(f, "'{}'", s.replace('\'', "''")),
        }
    }
}

impl Predicate {
    fn precedence(&self) -> u8 {
        match self {
            Predicate::Or(..) => 1,
            Predicate::And(..) => 2,
            Predicate::Compare { .. } => 3,
        }
    }

    fn render(&self, f: &mut fmt::Formatter<'_>, parent: u8, right: bool) -> fmt::Result {
        let prec = self.precedence();
        let parens = prec < parent || (right && prec == parent && prec < 3);
        if parens {
            f.write_str("(")?;
        }
        match self {
            Predicate::Compare { column, op, value } => {
                write!(f, "{} {} {value}", column.name(), op.symbol())?
            }
            Predicate::And(l, r) | Predicate::Or(l, r) => {
                l.render(f, prec, false)?;
                f.write_str(if prec == 1 { " OR " } else { " AND " })?;
                r.render(f, prec, true)?;
            }
        }
        if parens {
            f.write_str(")")?;
        }
        Ok(())
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.render(f, 0, false)
    }
}

/// Canonical text; parsing it back yields an equal query.
impl fmt::Display for SqlQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("SELECT ")?;
        match &self.projection {
            Projection::All => f.write_str("*")?,
            Projection::Columns(cols) => {
                let names: Vec<&str> = cols.iter().map(|c| c.name()).collect();
                f.write_str(&names.join(", "))?;
            }
        }
        write!(f, " FROM {}", self.table)?;
        if let Some(p) = &self.predicate {
            write!(f, " WHERE {p}")?;
        }
        if let Some(n) = self.limit {
            write!(f, " LIMIT {n}")?;
        }
        Ok(())
    }
}

// ---- lexing ----

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Word(String),
    Number(String),
    Str(String),
    Star,
    Comma,
    LParen,
    RParen,
    Semicolon,
    Op(CmpOp),
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    /// 1-based character position
    pos: usize,
}

fn parse_error(position: usize, message: impl Into<String>) -> SearchError {
    SearchError::Parse {
        position,
        message: message.into(),
    }
}

fn lex(text: &str) -> Result<Vec<Token>, SearchError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let pos = i + 1;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let single = match c {
            '*' => Some(Tok::Star),
            ',' => Some(Tok::Comma),
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            ';' => Some(Tok::Semicolon),
            '=' => Some(Tok::Op(CmpOp::Eq)),
            _ => None,
        };
        if let Some(tok) = single {
            out.push(Token { tok, pos });
            i += 1;
            continue;
        }
        let next = chars.get(i + 1).copied();
        let tok = match c {
            '!' if next == Some('=') => {
                i += 2;
                Tok::Op(CmpOp::Ne)
            }
            '<' | '>' => {
                let or_equal = next == Some('=');
                i += if or_equal { 2 } else { 1 };
                Tok::Op(match (c, or_equal) {
                    ('<', false) => CmpOp::Lt,
                    ('<', true) => CmpOp::Le,
                    ('>', false) => CmpOp::Gt,
                    _ => CmpOp::Ge,
                })
            }
            '\'' => {
                let mut s = String::new();
                i += 1;
                loop {
                    match chars.get(i) {
                        None => return Err(parse_error(pos, "unterminated string literal")),
                        Some('\'') if chars.get(i + 1) == Some(&'\'') => {
                            s.push('\'');
                            i += 2;
                        }
                        Some('\'') => {
                            i += 1;
                            break;
                        }
                        Some(&ch) => {
                            s.push(ch);
                            i += 1;
                        }
                    }
                }
                Tok::Str(s)
            }
            c if c.is_ascii_digit() || (c == '-' && next.is_some_and(|n| n.is_ascii_digit())) => {
                let start = i;
                i += 1;
                while chars.get(i).is_some_and(|c| c.is_ascii_digit()) {
                    i += 1;
                }
                if chars.get(i) == Some(&'.') {
                    i += 1;
                    while chars.get(i).is_some_and(|c| c.is_ascii_digit()) {
                        i += 1;
                    }
                }
                if matches!(chars.get(i), Some('e' | 'E')) {
                    let mut j = i + 1;
                    if matches!(chars.get(j), Some('+' | '-')) {
                        j += 1;
                    }
                    if chars.get(j).is_some_and(|c| c.is_ascii_digit()) {
                        i = j;
                        while chars.get(i).is_some_and(|c| c.is_ascii_digit()) {
                            i += 1;
                        }
                    }
                }
                if chars.get(i).is_some_and(|c| c.is_alphanumeric() || *c == '_') {
                    return Err(parse_error(i + 1, "malformed number"));
                }
                Tok::Number(chars[start..i].iter().collect())
            }
            c if c.is_alphabetic() || c == '_' => {
                let start = i;
                while chars.get(i).is_some_and(|c| c.is_alphanumeric() || *c == '_') {
                    i += 1;
                }
                Tok::Word(chars[start..i].iter().collect())
            }
            other => return Err(parse_error(pos, format!("unexpected character {other:?}"))),
        };
        out.push(Token { tok, pos });
    }
    Ok(out)
}

// ---- parsing ----

/// Parenthesis nesting beyond this is rejected rather than risking the stack.
pub const MAX_NESTING: usize = 64;

struct Parser {
    toks: Vec<Token>,
    at: usize,
    end: usize,
    depth: usize,
}

fn is_word(tok: &Tok, kw: &str) -> bool {
    matches!(tok, Tok::Word(w) if w.eq_ignore_ascii_case(kw))
}

fn is_forbidden(tok: &Tok) -> Option<String> {
    match tok {
        Tok::Word(w) => FORBIDDEN_STATEMENTS
            .iter()
            .find(|kw| w.eq_ignore_ascii_case(kw))
            .map(|kw| kw.to_string()),
        _ => None,
    }
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.toks.get(self.at)
    }

    fn bump(&mut self) -> Option<Token> {
        let t = self.toks.get(self.at).cloned();
        self.at += 1;
        t
    }

    fn eat_word(&mut self, kw: &str) -> bool {
        if self.peek().is_some_and(|t| is_word(&t.tok, kw)) {
            self.at += 1;
            true
        } else {
            false
        }
    }

    fn expect_word(&mut self, kw: &str) -> Result<(), SearchError> {
        if self.eat_word(kw) {
            Ok(())
        } else {
            Err(self.unexpected(&format!("expected {kw}")))
        }
    }

    fn unexpected(&self, what: &str) -> SearchError {
        match self.peek() {
            Some(t) => parse_error(t.pos, format!("{what}, found {}", describe(&t.tok))),
            None => parse_error(self.end, format!("{what}, found end of query")),
        }
    }

    /// Identifier that is not a reserved keyword.
    fn ident(&mut self, what: &str) -> Result<(String, usize), SearchError> {
        match self.peek() {
            Some(Token {
                tok: Tok::Word(w),
                pos,
            }) if !RESERVED.iter().any(|kw| w.eq_ignore_ascii_case(kw)) => {
                let out = (w.clone(), *pos);
                self.at += 1;
                Ok(out)
            }
            _ => Err(self.unexpected(&format!("expected {what}"))),
        }
    }

    fn query(&mut self) -> Result<SqlQuery, SearchError> {
        self.expect_word("SELECT")?;
        let mut raw_columns = Vec::new();
        let star = matches!(self.peek(), Some(Token { tok: Tok::Star, .. }));
        if star {
            self.at += 1;
        } else {
            loop {
                raw_columns.push(self.ident("column name or *")?);
                if !matches!(self.peek(), Some(Token { tok: Tok::Comma, .. })) {
                    break;
                }
                self.at += 1;
            }
        }
        self.expect_word("FROM")?;
        let (table, table_pos) = self.ident("table name")?;
        if !table.eq_ignore_ascii_case(RECORDS_TABLE) {
            return Err(parse_error(table_pos, format!("unknown table {table}")));
        }
        let projection = if star {
            Projection::All
        } else {
            let cols = raw_columns
                .into_iter()
                .map(|(name, pos)| {
                    Column::from_name(&name).ok_or_else(|| parse_error(pos, format!("unknown column {name}")))
                })
                .collect::<Result<_, _>>()?;
            Projection::Columns(cols)
        };
        let predicate = if self.eat_word("WHERE") {
            Some(self.or_expr()?)
        } else {
            None
        };
        let limit = if self.eat_word("LIMIT") {
            match self.bump() {
                Some(Token {
                    tok: Tok::Number(n),
                    pos,
                }) => Some(
                    n.parse::<u64>()
                        .map_err(|_| parse_error(pos, format!("LIMIT needs a non-negative integer, got {n}")))?,
                ),
                _ => {
                    self.at -= 1;
                    return Err(self.unexpected("expected LIMIT count"));
                }
            }
        } else {
            None
        };
        if let Some(t) = self.peek() {
            if t.tok == Tok::Semicolon {
                if let Some(stmt) = self.toks.get(self.at + 1).and_then(|t| is_forbidden(&t.tok)) {
                    return Err(SearchError::Forbidden(stmt));
                }
            }
            return Err(self.unexpected("expected end of query"));
        }
        Ok(SqlQuery {
            projection,
            table: RECORDS_TABLE.to_owned(),
            predicate,
            limit,
        })
    }

    fn or_expr(&mut self) -> Result<Predicate, SearchError> {
        let mut left = self.and_expr()?;
        while self.eat_word("OR") {
            let right = self.and_expr()?;
            left = Predicate::Or(Box::new(left), Box::new(right));
        }
        Ok(left)
    }

    fn and_expr(&mut self) -> Result<Predicate, SearchError> {
        let mut left = self.primary()?;
        while self.eat_word("AND") {
            let right = self.primary()?;
            left = Predicate::And(Box::new(left), Box::new(right));
        }
        Ok(left)
    }

    fn primary(&mut self) -> Result<Predicate, SearchError> {
        if let Some(Token { tok: Tok::LParen, pos }) = self.peek() {
            if self.depth == MAX_NESTING {
                return Err(parse_error(*pos, format!("parentheses nested deeper than {MAX_NESTING}")));
            }
            self.at += 1;
            self.depth += 1;
            let inner = self.or_expr()?;
            self.depth -= 1;
            match self.peek() {
                Some(Token { tok: Tok::RParen, .. }) => {
                    self.at += 1;
                    return Ok(inner);
                }
                _ => return Err(self.unexpected("expected )")),
            }
        }
        let (name, pos) = self.ident("column name")?;
        let column = Column::from_name(&name).ok_or_else(|| parse_error(pos, format!("unknown column {name}")))?;
        let op = match self.peek() {
            Some(Token { tok: Tok::Op(op), .. }) => *op,
            Some(t) if is_word(&t.tok, "LIKE") => CmpOp::Like,
            _ => return Err(self.unexpected("expected comparison operator")),
        };
        self.at += 1;
        let value = match self.bump() {
            Some(Token { tok: Tok::Str(s), .. }) => Literal::Text(s),
            Some(Token {
                tok: Tok::Number(n),
                pos,
            }) => {
                if n.contains(['.', 'e', 'E']) {
                    let x: f64 = n.parse().map_err(|_| parse_error(pos, format!("bad number {n}")))?;
                    if !x.is_finite() {
                        return Err(parse_error(pos, format!("number {n} out of range")));
                    }
                    Literal::Float(x)
                } else {
                    Literal::Int(n.parse().map_err(|_| parse_error(pos, format!("integer {n} out of range")))?)
                }
            }
            _ => {
                self.at -= 1;
                return Err(self.unexpected("expected literal"));
            }
        };
        Ok(Predicate::Compare { column, op, value })
    }
}

fn describe(tok: &Tok) -> String {
    match tok {
        Tok::Word(w) => w.clone(),
        Tok::Number(n) => n.clone(),
        Tok::Str(s) => format!("'{s}'"),
        Tok::Star => "*".into(),
        Tok::Comma => ",".into(),
        Tok::LParen => "(".into(),
        Tok::RParen => ")".into(),
        Tok::Semicolon => ";".into(),
        Tok::Op(op) => op.symbol().into(),
    }
}

pub fn parse_sql(text: &str) -> Result<SqlQuery, SearchError> {
    let toks = lex(text);
    // a forbidden leading keyword wins over any later lexing problem
    let first_word = text
        .trim_start()
        .split(|c: char| !(c.is_alphanumeric() || c == '_'))
        .next()
        .unwrap_or("");
    if let Some(stmt) = is_forbidden(&Tok::Word(first_word.to_owned())) {
        return Err(SearchError::Forbidden(stmt));
    }
    let toks = toks?;
    if toks.is_empty() {
        return Err(parse_error(1, "empty query"));
    }
    let mut p = Parser {
        toks,
        at: 0,
        end: text.chars().count() + 1,
        depth: 0,
    };
    p.query()
}

// ---- execution ----

fn type_check(p: &Predicate) -> Result<(), SearchError> {
    match p {
        Predicate::And(l, r) | Predicate::Or(l, r) => {
            type_check(l)?;
            type_check(r)
        }
        Predicate::Compare { column, op, value } => {
            let ok = match (column.is_numeric(), value) {
                (true, Literal::Int(_) | Literal::Float(_)) => *op != CmpOp::Like,
                (false, Literal::Text(_)) => true,
                _ => false,
            };
            if ok {
                Ok(())
            } else {
                Err(SearchError::Type(format!(
                    "{} {} {value}",
                    column.name(),
                    op.symbol()
                )))
            }
        }
    }
}

fn eval(p: &Predicate, r: &Record) -> bool {
    match p {
        Predicate::And(a, b) => eval(a, r) && eval(b, r),
        Predicate::Or(a, b) => eval(a, r) || eval(b, r),
        Predicate::Compare { column, op, value } => match value {
            Literal::Int(n) => op.holds(r.id.cmp(n)),
            // non-finite literals are rejected by the parser
            Literal::Float(x) => op.holds((r.id as f64).partial_cmp(x).unwrap_or(Ordering::Less)),
            Literal::Text(s) if *op == CmpOp::Like => like_match(s, column.text(r)),
            Literal::Text(s) => op.holds(column.text(r).cmp(s.as_str())),
        },
    }
}

/// Case-insensitive SQL LIKE: `%` matches any run, `_` any single character.
pub fn like_match(pattern: &str, text: &str) -> bool {
    let p: Vec<char> = pattern.to_lowercase().chars().collect();
    let t: Vec<char> = text.to_lowercase().chars().collect();
    let (mut pi, mut ti) = (0, 0);
    let mut star: Option<(usize, usize)> = None;
    while ti < t.len() {
        if pi < p.len() && (p[pi] == '_' || (p[pi] != '%' && p[pi] == t[ti])) {
            pi += 1;
            ti += 1;
        } else if pi < p.len() && p[pi] == '%' {
            star = Some((pi, ti));
            pi += 1;
        } else if let Some((sp, st)) = star {
            pi = sp + 1;
            ti = st + 1;
            star = Some((sp, st + 1));
        } else {
            return false;
        }
    }
    p[pi..].iter().all(|&c| c == '%')
}

/// Runs a parsed query against a read-only view of the records.
pub fn execute_sql(query: &SqlQuery, records: &[Record]) -> Result<SearchResult, SearchError> {
    if let Some(p) = &query.predicate {
        type_check(p)?;
    }
    let columns = query.projection.columns();
    let limit = query.limit.map_or(usize::MAX, |n| usize::try_from(n).unwrap_or(usize::MAX));
    let rows: Vec<Vec<Cell>> = records
        .iter()
        .filter(|r| query.predicate.as_ref().is_none_or(|p| eval(p, r)))
        .take(limit)
        .map(|r| match query.projection {
            Projection::All => record_row(r),
            Projection::Columns(_) => columns.iter().map(|c| c.cell(r)).collect(),
        })
        .collect();
    Ok(SearchResult::new(
        columns.iter().map(|c| c.name().to_owned()).collect(),
        rows,
        query.to_string(),
    ))
}
