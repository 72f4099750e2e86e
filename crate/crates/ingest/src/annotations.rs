use std::collections::BTreeMap;
use std::io::Read;

use serde::Deserialize;
use spforge::dataset::FibClassMap;

use crate::IngestError;

#[derive(Deserialize)]
struct Row {
    id: u64,
    story_point: i64,
}

/// Reads the `id,story_point` sidecar. Story points must belong to `classes`.
pub fn parse_annotations<R: Read>(input: R, classes: &FibClassMap) -> Result<BTreeMap<u64, u32>, IngestError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = reader
        .headers()
        .map_err(|e| IngestError::Annotation { line: 1, message: e.to_string() })?
        .clone();
    if headers.iter().collect::<Vec<_>>() != ["id", "story_point"] {
        return Err(IngestError::Annotation {
            line: 1,
            message: format!("expected header `id,story_point`, got `{}`", headers.iter().collect::<Vec<_>>().join(",")),
        });
    }
    let mut out = BTreeMap::new();
    for (i, row) in reader.deserialize::<Row>().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| IngestError::Annotation { line, message: e.to_string() })?;
        if row.id == 0 {
            return Err(IngestError::Annotation { line, message: "bug id must be positive".into() });
        }
        if classes.sp_to_class(row.story_point).is_err() {
            return Err(IngestError::Annotation {
                line,
                message: format!("story_point {} is not a Fibonacci class", row.story_point),
            });
        }
        if out.insert(row.id, row.story_point as u32).is_some() {
            return Err(IngestError::Annotation { line, message: format!("duplicate id {}", row.id) });
        }
    }
    Ok(out)
}
