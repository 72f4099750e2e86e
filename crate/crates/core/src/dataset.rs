//! Story records: parsing, validation, ordinal encodings and the train/test split.
//!
//! The records file is UTF-8 JSON Lines, one story per line:
//!
//! ```text
//! {"story_id":"620552","story_text":"Bugzilla cannot connect to Oracle 11G RAC","severity":2,"story_point":2}
//! ```
//!
//! `image_ref` is optional and unknown keys are ignored.

use std::collections::HashSet;
use std::fmt;
use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Story-point values used when no other class set is configured.
pub const FIBONACCI_POINTS: [u32; 5] = [1, 2, 3, 5, 8];

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("line {line}: malformed record: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: duplicate story_id {id:?}")]
    DuplicateId { line: usize, id: String },
    #[error("line {line}: story_text is empty")]
    EmptyText { line: usize },
    #[error("line {line}: story_point {value} is not a Fibonacci class")]
    RecordClass { line: usize, value: i64 },
    #[error("story_point {0} is not a Fibonacci class")]
    NotAClass(i64),
    #[error("class index {index} out of range for {classes} classes")]
    ClassIndexOutOfRange { index: usize, classes: usize },
    #[error("severity label {0} is not in the scale")]
    UnknownSeverity(String),
    #[error("invalid class set: {0}")]
    InvalidClassMap(String),
    #[error("invalid severity scale: {0}")]
    InvalidScale(String),
    #[error("test fraction {0} must lie strictly between 0 and 1")]
    InvalidFraction(f64),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A severity value as it appears in a records file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SeverityLabel {
    Rank(i64),
    Name(String),
}

impl fmt::Display for SeverityLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SeverityLabel::Rank(r) => write!(f, "{r}"),
            SeverityLabel::Name(s) => write!(f, "{s:?}"),
        }
    }
}

impl From<i64> for SeverityLabel {
    fn from(rank: i64) -> Self {
        SeverityLabel::Rank(rank)
    }
}

impl From<&str> for SeverityLabel {
    fn from(name: &str) -> Self {
        SeverityLabel::Name(name.to_string())
    }
}

/// One user story.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct StoryRecord {
    pub story_id: String,
    pub story_text: String,
    pub severity: SeverityLabel,
    pub story_point: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub image_ref: Option<String>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum IdRepr {
    Text(String),
    Number(u64),
}

#[derive(Deserialize)]
struct RecordLine {
    story_id: IdRepr,
    story_text: String,
    severity: SeverityLabel,
    story_point: i64,
    #[serde(default)]
    image_ref: Option<String>,
}

/// Ordered severity categories, lowest severity first.
///
/// `Numeric` passes integer labels through unchanged (the form used by the
/// tracker exports); `Named` ranks a label by its 1-based position.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "ScaleRepr", into = "ScaleRepr")]
pub enum SeverityScale {
    #[default]
    Numeric,
    Named(Vec<String>),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum ScaleRepr {
    Keyword(String),
    Labels(Vec<String>),
}

impl TryFrom<ScaleRepr> for SeverityScale {
    type Error = DatasetError;

    fn try_from(repr: ScaleRepr) -> Result<Self, Self::Error> {
        match repr {
            ScaleRepr::Keyword(k) if k == "numeric" => Ok(SeverityScale::Numeric),
            ScaleRepr::Keyword(k) => Err(DatasetError::InvalidScale(format!(
                "expected \"numeric\" or a list of labels, got {k:?}"
            ))),
            ScaleRepr::Labels(labels) => SeverityScale::named(labels),
        }
    }
}

impl From<SeverityScale> for ScaleRepr {
    fn from(scale: SeverityScale) -> Self {
        match scale {
            SeverityScale::Numeric => ScaleRepr::Keyword("numeric".into()),
            SeverityScale::Named(labels) => ScaleRepr::Labels(labels),
        }
    }
}

impl SeverityScale {
    /// Builds a named scale. Labels compare case-insensitively and must be unique.
    pub fn named<I, S>(labels: I) -> Result<Self, DatasetError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let labels: Vec<String> = labels.into_iter().map(|s| s.into().trim().to_string()).collect();
        if labels.is_empty() {
            return Err(DatasetError::InvalidScale("scale has no labels".into()));
        }
        let mut seen = HashSet::new();
        for label in &labels {
            if label.is_empty() {
                return Err(DatasetError::InvalidScale("empty label".into()));
            }
            if !seen.insert(label.to_lowercase()) {
                return Err(DatasetError::InvalidScale(format!("duplicate label {label:?}")));
            }
        }
        Ok(SeverityScale::Named(labels))
    }

    /// Ordinal rank of `label` under this scale.
    pub fn encode(&self, label: &SeverityLabel) -> Result<u32, DatasetError> {
        let unknown = || DatasetError::UnknownSeverity(label.to_string());
        match (self, label) {
            (SeverityScale::Numeric, SeverityLabel::Rank(r)) => u32::try_from(*r).map_err(|_| unknown()),
            (SeverityScale::Numeric, SeverityLabel::Name(s)) => s.trim().parse::<u32>().map_err(|_| unknown()),
            (SeverityScale::Named(labels), SeverityLabel::Name(s)) => {
                let wanted = s.trim().to_lowercase();
                labels
                    .iter()
                    .position(|l| l.to_lowercase() == wanted)
                    .map(|p| p as u32 + 1)
                    .ok_or_else(unknown)
            }
            (SeverityScale::Named(labels), SeverityLabel::Rank(r)) => {
                if *r >= 1 && (*r as usize) <= labels.len() {
                    Ok(*r as u32)
                } else {
                    Err(unknown())
                }
            }
        }
    }
}

/// Bijection between story-point values and 0-based class indices.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<u32>", into = "Vec<u32>")]
pub struct FibClassMap {
    values: Vec<u32>,
}

impl Default for FibClassMap {
    fn default() -> Self {
        Self { values: FIBONACCI_POINTS.to_vec() }
    }
}

impl TryFrom<Vec<u32>> for FibClassMap {
    type Error = DatasetError;

    fn try_from(values: Vec<u32>) -> Result<Self, Self::Error> {
        Self::new(values)
    }
}

impl From<FibClassMap> for Vec<u32> {
    fn from(map: FibClassMap) -> Self {
        map.values
    }
}

impl FibClassMap {
    pub fn new(values: Vec<u32>) -> Result<Self, DatasetError> {
        if values.is_empty() {
            return Err(DatasetError::InvalidClassMap("no story-point values".into()));
        }
        if values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(DatasetError::InvalidClassMap(format!(
                "values must be strictly increasing: {values:?}"
            )));
        }
        Ok(Self { values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[u32] {
        &self.values
    }

    pub fn sp_to_class(&self, sp: i64) -> Result<usize, DatasetError> {
        u32::try_from(sp)
            .ok()
            .and_then(|v| self.values.binary_search(&v).ok())
            .ok_or(DatasetError::NotAClass(sp))
    }

    pub fn class_to_sp(&self, index: usize) -> Result<u32, DatasetError> {
        self.values
            .get(index)
            .copied()
            .ok_or(DatasetError::ClassIndexOutOfRange { index, classes: self.values.len() })
    }
}

/// Parses a records stream, validating ids, text and story-point classes.
///
/// Blank lines are skipped; line numbers in errors are 1-based.
pub fn parse_records<R: BufRead>(input: R, classes: &FibClassMap) -> Result<Vec<StoryRecord>, DatasetError> {
    let mut records = Vec::new();
    let mut ids = HashSet::new();
    for (i, line) in input.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RecordLine = serde_json::from_str(&line)
            .map_err(|e| DatasetError::Malformed { line: line_no, message: e.to_string() })?;
        let story_id = match raw.story_id {
            IdRepr::Text(s) => s,
            IdRepr::Number(n) => n.to_string(),
        };
        if raw.story_text.trim().is_empty() {
            return Err(DatasetError::EmptyText { line: line_no });
        }
        if classes.sp_to_class(raw.story_point).is_err() {
            return Err(DatasetError::RecordClass { line: line_no, value: raw.story_point });
        }
        if !ids.insert(story_id.clone()) {
            return Err(DatasetError::DuplicateId { line: line_no, id: story_id });
        }
        records.push(StoryRecord {
            story_id,
            story_text: raw.story_text,
            severity: raw.severity,
            story_point: raw.story_point as u32,
            image_ref: raw.image_ref,
        });
    }
    Ok(records)
}

/// Writes records in the records-file format, one JSON object per line.
pub fn write_records<W: Write>(mut out: W, records: &[StoryRecord]) -> std::io::Result<()> {
    for record in records {
        serde_json::to_writer(&mut out, record)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Number of records per class, indexed by class.
pub fn class_counts(records: &[StoryRecord], classes: &FibClassMap) -> Result<Vec<usize>, DatasetError> {
    let mut counts = vec![0; classes.len()];
    for r in records {
        counts[classes.sp_to_class(r.story_point as i64)?] += 1;
    }
    Ok(counts)
}

/// Train/test membership by story id.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub seed: u64,
    pub test_fraction: f64,
    pub train: Vec<String>,
    pub test: Vec<String>,
}

/// A class whose rows all landed on one side of a split.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitWarning {
    pub class: usize,
    pub train_rows: usize,
    pub test_rows: usize,
}

impl fmt::Display for SplitWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "class {} has {} train and {} test rows",
            self.class, self.train_rows, self.test_rows
        )
    }
}

/// Positions of the train and test rows produced by [`stratified_indices`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IndexSplit {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub warnings: Vec<SplitWarning>,
}

/// Number of test rows for `n` rows at `fraction`.
pub fn test_size(n: usize, fraction: f64) -> usize {
    ((fraction * n as f64) + 1e-9).floor() as usize
}

/// Seeded stratified split over class labels.
///
/// The test set holds `floor(fraction * n)` rows. Each class receives the
/// floor of its proportional share, and leftover slots go to the classes with
/// the largest fractional remainders (lowest class first on ties), so every
/// class is within one row of proportional. Rows are drawn from a per-class
/// shuffle driven by a ChaCha8 stream seeded with `seed`; both outputs are
/// returned in ascending position order.
pub fn stratified_indices(labels: &[usize], fraction: f64, seed: u64) -> Result<IndexSplit, DatasetError> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(DatasetError::InvalidFraction(fraction));
    }
    let n_classes = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for (pos, &label) in labels.iter().enumerate() {
        members[label].push(pos);
    }

    let n_test = test_size(labels.len(), fraction);
    let quotas: Vec<f64> = members.iter().map(|m| fraction * m.len() as f64).collect();
    let mut take: Vec<usize> = quotas
        .iter()
        .zip(&members)
        .map(|(q, m)| ((q + 1e-9).floor() as usize).min(m.len()))
        .collect();
    let mut remaining = n_test.saturating_sub(take.iter().sum());
    let mut order: Vec<usize> = (0..n_classes).collect();
    order.sort_by(|&a, &b| {
        let fa = quotas[a] - quotas[a].floor();
        let fb = quotas[b] - quotas[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &c in order.iter().cycle().take(n_classes * 2) {
        if remaining == 0 {
            break;
        }
        if take[c] < members[c].len() && (take[c] as f64) < quotas[c] + 1.0 - 1e-9 {
            take[c] += 1;
            remaining -= 1;
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::with_capacity(labels.len() - n_test);
    let mut test = Vec::with_capacity(n_test);
    let mut warnings = Vec::new();
    for (class, rows) in members.iter_mut().enumerate() {
        if rows.is_empty() {
            continue;
        }
        rows.shuffle(&mut rng);
        let (t, r) = rows.split_at(take[class]);
        test.extend_from_slice(t);
        train.extend_from_slice(r);
        if t.is_empty() || r.is_empty() {
            warnings.push(SplitWarning { class, train_rows: r.len(), test_rows: t.len() });
        }
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(IndexSplit { train, test, warnings })
}

/// Stratified split of a corpus into train and test story ids.
///
/// Warnings name classes by their story-point value.
pub fn stratified_split(
    records: &[StoryRecord],
    test_fraction: f64,
    seed: u64,
    classes: &FibClassMap,
) -> Result<(DatasetSplit, Vec<SplitWarning>), DatasetError> {
    let labels = records
        .iter()
        .map(|r| classes.sp_to_class(r.story_point as i64))
        .collect::<Result<Vec<_>, _>>()?;
    let split = stratified_indices(&labels, test_fraction, seed)?;
    let ids = |idx: &[usize]| idx.iter().map(|&i| records[i].story_id.clone()).collect();
    let warnings = split
        .warnings
        .iter()
        .map(|w| SplitWarning { class: classes.values()[w.class] as usize, ..w.clone() })
        .collect();
    Ok((
        DatasetSplit { seed, test_fraction, train: ids(&split.train), test: ids(&split.test) },
        warnings,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(id: &str, sp: u32) -> StoryRecord {
        StoryRecord {
            story_id: id.into(),
            story_text: format!("story {id}"),
            severity: SeverityLabel::Rank(1),
            story_point: sp,
            image_ref: None,
        }
    }

    #[test]
    fn parses_table1_row() {
        let line = r#"{"story_id":"620552","story_text":"Bugzilla cannot connect to Oracle 11G RAC","severity":2,"story_point":2}"#;
        let records = parse_records(line.as_bytes(), &FibClassMap::default()).unwrap();
        assert_eq!(records.len(), 1);
        assert_eq!(records[0].story_id, "620552");
        assert_eq!(records[0].severity, SeverityLabel::Rank(2));
        assert_eq!(records[0].story_point, 2);
        assert_eq!(records[0].image_ref, None);
    }

    #[test]
    fn empty_stream_is_empty_corpus() {
        assert!(parse_records("".as_bytes(), &FibClassMap::default()).unwrap().is_empty());
        assert!(parse_records("\n  \n".as_bytes(), &FibClassMap::default()).unwrap().is_empty());
    }

    #[test]
    fn rejects_non_fibonacci_point() {
        let line = r#"{"story_id":"1","story_text":"x","severity":1,"story_point":4}"#;
        let err = parse_records(line.as_bytes(), &FibClassMap::default()).unwrap_err();
        assert!(err.to_string().contains("not a Fibonacci class"), "{err}");
        assert!(matches!(err, DatasetError::RecordClass { line: 1, value: 4 }));
    }

    #[test]
    fn reports_malformed_line_position() {
        let input = concat!(
            r#"{"story_id":"1","story_text":"x","severity":1,"story_point":1}"#,
            "\n",
            "{not json}\n"
        );
        match parse_records(input.as_bytes(), &FibClassMap::default()) {
            Err(DatasetError::Malformed { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_duplicate_ids() {
        let input = concat!(
            r#"{"story_id":"7","story_text":"a","severity":1,"story_point":1}"#,
            "\n",
            r#"{"story_id":7,"story_text":"b","severity":1,"story_point":2}"#,
        );
        let err = parse_records(input.as_bytes(), &FibClassMap::default()).unwrap_err();
        assert!(matches!(err, DatasetError::DuplicateId { line: 2, .. }));
    }

    #[test]
    fn ignores_unknown_keys_and_keeps_image_ref() {
        let line = r#"{"story_id":"9","story_text":"t","severity":"high","story_point":8,"image_ref":"a.png","extra":[1,2]}"#;
        let r = &parse_records(line.as_bytes(), &FibClassMap::default()).unwrap()[0];
        assert_eq!(r.image_ref.as_deref(), Some("a.png"));
        assert_eq!(r.severity, SeverityLabel::Name("high".into()));
    }

    #[test]
    fn written_records_parse_back() {
        let mut r = record("a", 5);
        r.image_ref = Some("x.png".into());
        let records = vec![r, record("b", 1)];
        let mut buf = Vec::new();
        write_records(&mut buf, &records).unwrap();
        assert_eq!(parse_records(buf.as_slice(), &FibClassMap::default()).unwrap(), records);
    }

    #[test]
    fn severity_encoding() {
        let numeric = SeverityScale::Numeric;
        assert_eq!(numeric.encode(&SeverityLabel::Rank(2)).unwrap(), 2);
        assert_eq!(numeric.encode(&"3".into()).unwrap(), 3);
        assert!(numeric.encode(&"major".into()).is_err());
        assert!(numeric.encode(&SeverityLabel::Rank(-1)).is_err());

        let named = SeverityScale::named(["low", "medium", "high"]).unwrap();
        assert_eq!(named.encode(&"high".into()).unwrap(), 3);
        assert_eq!(named.encode(&"Low".into()).unwrap(), 1);
        assert!(matches!(named.encode(&"urgent".into()), Err(DatasetError::UnknownSeverity(_))));
        assert_eq!(named.encode(&SeverityLabel::Rank(2)).unwrap(), 2);
        assert!(named.encode(&SeverityLabel::Rank(4)).is_err());
    }

    #[test]
    fn severity_scale_validation() {
        assert!(SeverityScale::named(Vec::<String>::new()).is_err());
        assert!(SeverityScale::named(["low", "LOW"]).is_err());
        let parsed: SeverityScale = serde_json::from_str(r#"["low","high"]"#).unwrap();
        assert_eq!(parsed.encode(&"high".into()).unwrap(), 2);
        let numeric: SeverityScale = serde_json::from_str(r#""numeric""#).unwrap();
        assert_eq!(numeric, SeverityScale::Numeric);
        assert!(serde_json::from_str::<SeverityScale>(r#""loud""#).is_err());
    }

    #[test]
    fn class_map_round_trip() {
        let map = FibClassMap::default();
        assert_eq!(map.sp_to_class(1).unwrap(), 0);
        assert_eq!(map.sp_to_class(8).unwrap(), 4);
        assert_eq!(map.class_to_sp(map.sp_to_class(5).unwrap()).unwrap(), 5);
        assert!(matches!(map.sp_to_class(6), Err(DatasetError::NotAClass(6))));
        assert!(map.class_to_sp(5).is_err());
        assert!(FibClassMap::new(vec![1, 3, 2]).is_err());
        assert!(FibClassMap::new(vec![]).is_err());
        let extended = FibClassMap::new(vec![1, 2, 3, 5, 8, 13]).unwrap();
        assert_eq!(extended.sp_to_class(13).unwrap(), 5);
    }

    #[test]
    fn split_of_113_has_22_test_rows() {
        let sps = [1u32, 2, 3, 5, 8];
        let counts = [10, 41, 46, 11, 5];
        let mut records = Vec::new();
        for (sp, n) in sps.iter().zip(counts) {
            for i in 0..n {
                records.push(record(&format!("{sp}-{i}"), *sp));
            }
        }
        let (split, warnings) = stratified_split(&records, 0.2, 7, &FibClassMap::default()).unwrap();
        assert_eq!(split.test.len(), 22);
        assert_eq!(split.train.len(), 91);
        assert!(warnings.is_empty());
        let (again, _) = stratified_split(&records, 0.2, 7, &FibClassMap::default()).unwrap();
        assert_eq!(split, again);
    }

    #[test]
    fn split_two_record_single_class() {
        let records = vec![record("a", 3), record("b", 3)];
        let (split, _) = stratified_split(&records, 0.5, 1, &FibClassMap::default()).unwrap();
        assert_eq!(split.train.len(), 1);
        assert_eq!(split.test.len(), 1);
    }

    #[test]
    fn split_warns_on_class_missing_from_test() {
        let records = vec![record("a", 1), record("b", 2), record("c", 2), record("d", 2), record("e", 2)];
        let (split, warnings) = stratified_split(&records, 0.2, 3, &FibClassMap::default()).unwrap();
        assert_eq!(split.test.len(), 1);
        assert_eq!(warnings.len(), 1);
        assert_eq!(warnings[0].class, 1);
        assert_eq!(warnings[0].test_rows, 0);
    }

    #[test]
    fn split_rejects_bad_fraction() {
        for f in [0.0, 1.0, -0.1, f64::NAN] {
            assert!(matches!(stratified_indices(&[0, 1], f, 0), Err(DatasetError::InvalidFraction(_))));
        }
    }
}
