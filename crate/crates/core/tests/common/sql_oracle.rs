//! Random well-typed SQL-subset queries and a brute-force evaluator that
//! shares no code with the engine (LIKE goes through `regex`).

use std::cell::RefCell;
use std::cmp::Ordering;
use std::collections::HashMap;

use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::Rng;
use regex::{Regex, RegexBuilder};

use flexgui_core::search::{Cell, CmpOp, Column, Literal, Predicate, Projection, SqlQuery};

#[derive(Debug, Clone, PartialEq)]
pub enum OVal {
    Int(i64),
    Text(String),
}

#[derive(Debug, Clone)]
pub struct Row {
    pub id: i64,
    pub name: String,
    pub category: String,
    pub description: String,
}

impl Row {
    fn get(&self, col: Column) -> OVal {
        match col.name() {
            "id" => OVal::Int(self.id),
            "name" => OVal::Text(self.name.clone()),
            "category" => OVal::Text(self.category.clone()),
            _ => OVal::Text(self.description.clone()),
        }
    }
}

pub fn load_rows(csv_text: &str) -> Vec<Row> {
    let mut reader = csv::Reader::from_reader(csv_text.as_bytes());
    reader
        .records()
        .map(|r| {
            let r = r.unwrap();
            Row {
                id: r[0].parse().unwrap(),
                name: r[1].to_owned(),
                category: r[2].to_owned(),
                description: r[3].to_owned(),
            }
        })
        .collect()
}

thread_local! {
    // compiling a regex per row dominates the oracle's runtime otherwise
    static LIKE_CACHE: RefCell<HashMap<String, Regex>> = RefCell::new(HashMap::new());
}

pub fn like(pattern: &str, text: &str) -> bool {
    LIKE_CACHE.with(|cache| {
        cache
            .borrow_mut()
            .entry(pattern.to_owned())
            .or_insert_with(|| like_regex(pattern))
            .is_match(text)
    })
}

fn like_regex(pattern: &str) -> Regex {
    let mut re = String::from("^");
    for c in pattern.chars() {
        match c {
            '%' => re.push_str(".*"),
            '_' => re.push('.'),
            c => re.push_str(&regex::escape(&c.to_string())),
        }
    }
    re.push('$');
    RegexBuilder::new(&re)
        .case_insensitive(true)
        .dot_matches_new_line(true)
        .build()
        .unwrap()
}

fn holds(op: CmpOp, ord: Ordering) -> bool {
    match op.symbol() {
        "=" => ord.is_eq(),
        "!=" => ord.is_ne(),
        "<" => ord.is_lt(),
        "<=" => ord.is_le(),
        ">" => ord.is_gt(),
        ">=" => ord.is_ge(),
        other => panic!("not an ordering operator: {other}"),
    }
}

fn eval(p: &Predicate, row: &Row) -> bool {
    match p {
        Predicate::And(a, b) => eval(a, row) && eval(b, row),
        Predicate::Or(a, b) => eval(a, row) || eval(b, row),
        Predicate::Compare { column, op, value } => match (row.get(*column), value) {
            (OVal::Text(t), Literal::Text(s)) if *op == CmpOp::Like => like(s, &t),
            (OVal::Text(t), Literal::Text(s)) => holds(*op, t.as_str().cmp(s.as_str())),
            (OVal::Int(n), Literal::Int(m)) => holds(*op, n.cmp(m)),
            (OVal::Int(n), Literal::Float(x)) => holds(*op, (n as f64).partial_cmp(x).unwrap()),
            other => panic!("ill-typed comparison {other:?}"),
        },
    }
}

pub fn evaluate(q: &SqlQuery, rows: &[Row]) -> Vec<Vec<OVal>> {
    let cols = match &q.projection {
        Projection::All => Column::ALL.to_vec(),
        Projection::Columns(c) => c.clone(),
    };
    let mut out = Vec::new();
    for row in rows {
        if q.limit.is_some_and(|n| out.len() as u64 >= n) {
            break;
        }
        if q.predicate.as_ref().is_none_or(|p| eval(p, row)) {
            out.push(cols.iter().map(|c| row.get(*c)).collect());
        }
    }
    out
}

pub fn cells_to_ovals(rows: &[Vec<Cell>]) -> Vec<Vec<OVal>> {
    rows.iter()
        .map(|r| {
            r.iter()
                .map(|c| match c {
                    Cell::Int(n) => OVal::Int(*n),
                    Cell::Text(s) => OVal::Text(s.clone()),
                    Cell::Float(x) => panic!("no float columns, got {x}"),
                })
                .collect()
        })
        .collect()
}

// ---- generation ----

const TEXT_COLUMNS: [Column; 3] = [Column::Name, Column::Category, Column::Description];

fn text_of(row: &Row, col: Column) -> &str {
    match col.name() {
        "name" => &row.name,
        "category" => &row.category,
        _ => &row.description,
    }
}

fn random_fragment(rng: &mut StdRng, text: &str) -> String {
    let words: Vec<&str> = text.split_whitespace().collect();
    if words.is_empty() {
        return String::new();
    }
    let start = rng.gen_range(0..words.len());
    let len = rng.gen_range(1..=(words.len() - start).min(3));
    words[start..start + len].join(" ")
}

fn like_pattern(rng: &mut StdRng, fragment: &str) -> String {
    let mut chars: Vec<char> = fragment
        .chars()
        .map(|c| if rng.gen_bool(0.3) { c.to_ascii_uppercase() } else { c })
        .collect();
    if !chars.is_empty() && rng.gen_bool(0.3) {
        let i = rng.gen_range(0..chars.len());
        chars[i] = '_';
    }
    let body: String = chars.into_iter().collect();
    match rng.gen_range(0..5) {
        0 => body,
        1 => format!("{body}%"),
        2 => format!("%{body}"),
        3 => "%".into(),
        _ => format!("%{body}%"),
    }
}

fn gen_compare(rng: &mut StdRng, rows: &[Row]) -> Predicate {
    let ops_ord = [CmpOp::Eq, CmpOp::Ne, CmpOp::Lt, CmpOp::Le, CmpOp::Gt, CmpOp::Ge];
    if rng.gen_bool(0.35) {
        let op = *ops_ord.choose(rng).unwrap();
        let value = if rng.gen_bool(0.7) {
            Literal::Int(rng.gen_range(-5..=110))
        } else {
            Literal::Float(rng.gen_range(-5..=110) as f64 + [0.0, 0.5, 0.25][rng.gen_range(0..3)])
        };
        return Predicate::Compare {
            column: Column::Id,
            op,
            value,
        };
    }
    let column = *TEXT_COLUMNS.choose(rng).unwrap();
    let row = rows.choose(rng).unwrap();
    let source = text_of(row, column);
    let (op, text) = if rng.gen_bool(0.5) {
        let fragment = random_fragment(rng, source);
        (CmpOp::Like, like_pattern(rng, &fragment))
    } else {
        let op = *ops_ord.choose(rng).unwrap();
        let text = match rng.gen_range(0..4) {
            0 => random_fragment(rng, source),
            1 => format!("{source}'s"),
            _ => source.to_owned(),
        };
        (op, text)
    };
    Predicate::Compare {
        column,
        op,
        value: Literal::Text(text),
    }
}

fn gen_predicate(rng: &mut StdRng, rows: &[Row], depth: u32) -> Predicate {
    if depth == 0 || rng.gen_bool(0.4) {
        return gen_compare(rng, rows);
    }
    let l = Box::new(gen_predicate(rng, rows, depth - 1));
    let r = Box::new(gen_predicate(rng, rows, depth - 1));
    if rng.gen_bool(0.5) {
        Predicate::And(l, r)
    } else {
        Predicate::Or(l, r)
    }
}

/// A random query that type-checks against the records schema.
pub fn gen_query(rng: &mut StdRng, rows: &[Row]) -> SqlQuery {
    let projection = if rng.gen_bool(0.25) {
        Projection::All
    } else {
        let n = rng.gen_range(1..=4);
        Projection::Columns((0..n).map(|_| *Column::ALL.choose(rng).unwrap()).collect())
    };
    let predicate = rng.gen_bool(0.85).then(|| gen_predicate(rng, rows, 3));
    let limit = rng.gen_bool(0.3).then(|| rng.gen_range(0..=120));
    SqlQuery {
        projection,
        table: "records".into(),
        predicate,
        limit,
    }
}
