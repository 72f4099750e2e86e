//! The 22 held-out stories with actual and predicted story points, as
//! published for the with- and without-severity models.

use std::io::BufRead;

use serde::{Deserialize, Serialize};

use super::EvalError;

pub const TABLE5_JSONL: &str = include_str!("../../fixtures/table5.jsonl");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Table5Row {
    pub story_index: u32,
    pub actual_sp: u32,
    pub pred_with_severity: u32,
    pub pred_without_severity: u32,
}

pub fn parse_table5<R: BufRead>(input: R) -> Result<Vec<Table5Row>, EvalError> {
    let mut rows = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        rows.push(
            serde_json::from_str(&line)
                .map_err(|e| EvalError::MalformedFixture { line: i + 1, message: e.to_string() })?,
        );
    }
    Ok(rows)
}

/// The bundled fixture.
pub fn table5() -> Vec<Table5Row> {
    parse_table5(TABLE5_JSONL.as_bytes()).expect("bundled fixture parses")
}
