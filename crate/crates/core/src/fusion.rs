//! Joining records with embeddings into a numeric feature matrix.
//!
//! Column order is fixed: `text_0..text_{d_t-1}`, `image_0..image_{d_i-1}`,
//! then `severity` when requested.

use std::collections::HashMap;
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use crate::dataset::{DatasetError, FibClassMap, SeverityScale, StoryRecord};

/// Columns whose standard deviation falls below this are treated as constant.
pub const DEGENERATE_STD: f64 = 1e-12;

pub const SEVERITY_COLUMN: &str = "severity";

#[derive(Debug, thiserror::Error)]
pub enum FusionError {
    #[error("line {line}: malformed embedding record: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: {field} has dimension {found}, expected {expected}")]
    DimensionMismatch { line: usize, field: &'static str, expected: usize, found: usize },
    #[error("line {line}: non-finite value in {field}")]
    NonFinite { line: usize, field: &'static str },
    #[error("line {line}: duplicate embedding for story_id {id:?}")]
    DuplicateId { line: usize, id: String },
    #[error("no embedding for story_id(s): {}", .0.join(", "))]
    MissingEmbeddings(Vec<String>),
    #[error("embedding dimensions differ between stories")]
    InconsistentDimensions,
    #[error("cannot take the mean of an empty vector")]
    EmptyVector,
    #[error("matrix has {found} columns, normaliser expects {expected}")]
    ColumnMismatch { expected: usize, found: usize },
    #[error("correlation needs equal-length inputs with at least 2 values (got {0} and {1})")]
    CorrelationLength(usize, usize),
    #[error("correlation is undefined for a constant input")]
    ConstantInput,
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Text and image vectors for one story.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingRecord {
    pub story_id: String,
    pub story_embedding: Vec<f64>,
    pub image_embedding: Vec<f64>,
}

/// Optional metadata line at the top of an embeddings file.
///
/// Any line whose object has no `story_id` key is read as a header. Recorded
/// dimensions, when present, are enforced on every following line.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingHeader {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pooling: Option<String>,
    #[serde(default, alias = "story_dim", skip_serializing_if = "Option::is_none")]
    pub text_dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_dim: Option<usize>,
}

/// A parsed embeddings file.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EmbeddingSet {
    pub header: Option<EmbeddingHeader>,
    pub records: Vec<EmbeddingRecord>,
}

impl EmbeddingSet {
    pub fn text_dim(&self) -> Option<usize> {
        self.records.first().map(|r| r.story_embedding.len())
    }

    pub fn image_dim(&self) -> Option<usize> {
        self.records.first().map(|r| r.image_embedding.len())
    }
}

fn check_vector(line: usize, field: &'static str, v: &[f64], expected: Option<usize>) -> Result<(), FusionError> {
    if let Some(expected) = expected {
        if v.len() != expected {
            return Err(FusionError::DimensionMismatch { line, field, expected, found: v.len() });
        }
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(FusionError::NonFinite { line, field });
    }
    Ok(())
}

/// Parses an embeddings stream (JSON Lines).
pub fn parse_embeddings<R: BufRead>(input: R) -> Result<EmbeddingSet, FusionError> {
    let mut set = EmbeddingSet::default();
    let mut seen = HashMap::new();
    let mut dims: Option<(usize, usize)> = None;
    for (i, line) in input.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |e: serde_json::Error| FusionError::Malformed { line: line_no, message: e.to_string() };
        let value: serde_json::Value = serde_json::from_str(&line).map_err(malformed)?;
        if !value.is_object() {
            return Err(FusionError::Malformed { line: line_no, message: "expected a JSON object".into() });
        }
        if value.get("story_id").is_none() {
            if set.header.is_some() || !set.records.is_empty() {
                return Err(FusionError::Malformed {
                    line: line_no,
                    message: "missing field `story_id`".into(),
                });
            }
            set.header = Some(serde_json::from_value(value).map_err(malformed)?);
            continue;
        }
        let record: EmbeddingRecord = serde_json::from_value(value).map_err(malformed)?;
        let (text_dim, image_dim) = match dims {
            Some(d) => d,
            None => {
                let header = set.header.clone().unwrap_or_default();
                let d = (
                    header.text_dim.unwrap_or(record.story_embedding.len()),
                    header.image_dim.unwrap_or(record.image_embedding.len()),
                );
                dims = Some(d);
                d
            }
        };
        check_vector(line_no, "story_embedding", &record.story_embedding, Some(text_dim))?;
        check_vector(line_no, "image_embedding", &record.image_embedding, Some(image_dim))?;
        if seen.insert(record.story_id.clone(), line_no).is_some() {
            return Err(FusionError::DuplicateId { line: line_no, id: record.story_id });
        }
        set.records.push(record);
    }
    Ok(set)
}

/// Arithmetic mean of a vector.
pub fn mean_pool(v: &[f64]) -> Result<f64, FusionError> {
    if v.is_empty() {
        return Err(FusionError::EmptyVector);
    }
    Ok(v.iter().sum::<f64>() / v.len() as f64)
}

/// Fused feature rows (row-major) with their class labels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub story_ids: Vec<String>,
    pub column_names: Vec<String>,
    pub n_cols: usize,
    pub data: Vec<f64>,
    pub labels: Vec<usize>,
    pub include_severity: bool,
}

impl FeatureMatrix {
    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.n_cols.max(1)).take(self.n_rows())
    }

    pub fn value(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.n_cols + col]
    }

    pub fn column(&self, col: usize) -> Vec<f64> {
        (0..self.n_rows()).map(|r| self.value(r, col)).collect()
    }

    /// The rows at `indices`, in the given order.
    pub fn select(&self, indices: &[usize]) -> FeatureMatrix {
        let mut data = Vec::with_capacity(indices.len() * self.n_cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        FeatureMatrix {
            story_ids: indices.iter().map(|&i| self.story_ids[i].clone()).collect(),
            column_names: self.column_names.clone(),
            n_cols: self.n_cols,
            data,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            include_severity: self.include_severity,
        }
    }

    /// Row positions of the given story ids. Unknown ids are reported together.
    pub fn positions_of(&self, ids: &[String]) -> Result<Vec<usize>, FusionError> {
        let index: HashMap<&str, usize> =
            self.story_ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
        let mut missing = Vec::new();
        let positions = ids
            .iter()
            .filter_map(|id| {
                let p = index.get(id.as_str()).copied();
                if p.is_none() {
                    missing.push(id.clone());
                }
                p
            })
            .collect();
        if missing.is_empty() {
            Ok(positions)
        } else {
            Err(FusionError::MissingEmbeddings(missing))
        }
    }
}

fn index_embeddings<'a>(
    records: &[StoryRecord],
    embeddings: &'a [EmbeddingRecord],
) -> Result<Vec<&'a EmbeddingRecord>, FusionError> {
    let by_id: HashMap<&str, &EmbeddingRecord> =
        embeddings.iter().map(|e| (e.story_id.as_str(), e)).collect();
    let mut missing = Vec::new();
    let mut joined = Vec::with_capacity(records.len());
    for r in records {
        match by_id.get(r.story_id.as_str()) {
            Some(e) => joined.push(*e),
            None => missing.push(r.story_id.clone()),
        }
    }
    if !missing.is_empty() {
        return Err(FusionError::MissingEmbeddings(missing));
    }
    if let Some(first) = joined.first() {
        let dims = (first.story_embedding.len(), first.image_embedding.len());
        if joined
            .iter()
            .any(|e| (e.story_embedding.len(), e.image_embedding.len()) != dims)
        {
            return Err(FusionError::InconsistentDimensions);
        }
    }
    Ok(joined)
}

/// Builds the feature matrix: text vector, image vector, then the severity
/// rank when `include_severity` is set. Row `i` corresponds to `records[i]`.
pub fn fuse(
    records: &[StoryRecord],
    embeddings: &[EmbeddingRecord],
    scale: &SeverityScale,
    classes: &FibClassMap,
    include_severity: bool,
) -> Result<FeatureMatrix, FusionError> {
    let joined = index_embeddings(records, embeddings)?;
    let (text_dim, image_dim) = joined
        .first()
        .map_or((0, 0), |e| (e.story_embedding.len(), e.image_embedding.len()));
    let n_cols = text_dim + image_dim + usize::from(include_severity);

    let mut column_names: Vec<String> = (0..text_dim).map(|i| format!("text_{i}")).collect();
    column_names.extend((0..image_dim).map(|i| format!("image_{i}")));
    if include_severity {
        column_names.push(SEVERITY_COLUMN.to_string());
    }

    let mut data = Vec::with_capacity(records.len() * n_cols);
    let mut labels = Vec::with_capacity(records.len());
    for (record, emb) in records.iter().zip(&joined) {
        data.extend_from_slice(&emb.story_embedding);
        data.extend_from_slice(&emb.image_embedding);
        if include_severity {
            data.push(f64::from(scale.encode(&record.severity)?));
        }
        labels.push(classes.sp_to_class(i64::from(record.story_point))?);
    }
    Ok(FeatureMatrix {
        story_ids: records.iter().map(|r| r.story_id.clone()).collect(),
        column_names,
        n_cols,
        data,
        labels,
        include_severity,
    })
}

/// Per-column z-score parameters fit on training rows.
///
/// Columns flagged in `passthrough` (the severity rank) are left as is.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizationStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub passthrough: Vec<bool>,
}

impl NormalizationStats {
    pub fn n_cols(&self) -> usize {
        self.mean.len()
    }

    pub fn apply_row(&self, row: &[f64]) -> Result<Vec<f64>, FusionError> {
        if row.len() != self.n_cols() {
            return Err(FusionError::ColumnMismatch { expected: self.n_cols(), found: row.len() });
        }
        Ok(row
            .iter()
            .enumerate()
            .map(|(j, &x)| self.apply_value(j, x))
            .collect())
    }

    fn apply_value(&self, col: usize, x: f64) -> f64 {
        if self.passthrough[col] {
            x
        } else if self.std[col] < DEGENERATE_STD {
            0.0
        } else {
            (x - self.mean[col]) / self.std[col]
        }
    }
}

/// Fits per-column mean and population standard deviation.
pub fn fit_normalizer(train: &FeatureMatrix) -> NormalizationStats {
    let n = train.n_rows();
    let mut mean = vec![0.0; train.n_cols];
    let mut std = vec![0.0; train.n_cols];
    if n > 0 {
        for row in train.rows() {
            for (m, x) in mean.iter_mut().zip(row) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        for row in train.rows() {
            for ((s, x), m) in std.iter_mut().zip(row).zip(&mean) {
                *s += (x - m) * (x - m);
            }
        }
        std.iter_mut().for_each(|s| *s = (*s / n as f64).sqrt());
    }
    let passthrough = train
        .column_names
        .iter()
        .map(|c| train.include_severity && c == SEVERITY_COLUMN)
        .collect();
    NormalizationStats { mean, std, passthrough }
}

pub fn apply_normalizer(stats: &NormalizationStats, matrix: &FeatureMatrix) -> Result<FeatureMatrix, FusionError> {
    if matrix.n_cols != stats.n_cols() {
        return Err(FusionError::ColumnMismatch { expected: stats.n_cols(), found: matrix.n_cols });
    }
    let data = matrix
        .data
        .iter()
        .enumerate()
        .map(|(k, &x)| stats.apply_value(k % matrix.n_cols, x))
        .collect();
    Ok(FeatureMatrix { data, ..matrix.clone() })
}

/// Pearson product-moment correlation.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, FusionError> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(FusionError::CorrelationLength(x.len(), y.len()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if is_constant(sxx, x) || is_constant(syy, y) {
        return Err(FusionError::ConstantInput);
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

// Sum of squared deviations indistinguishable from rounding noise.
fn is_constant(ss: f64, v: &[f64]) -> bool {
    let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(f64::MIN_POSITIVE);
    ss <= v.len() as f64 * (1e-12 * scale).powi(2)
}

pub const STORY_MEAN_VAR: &str = "Story_Embedding_Mean";
pub const IMAGE_MEAN_VAR: &str = "Image_Feature_Embedding_Mean";
pub const STORY_POINT_VAR: &str = "StoryPoint_Encoded";
pub const SEVERITY_VAR: &str = "Severity_Encoded";

/// Symmetric matrix of pairwise Pearson coefficients.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub variables: Vec<String>,
    pub matrix: Vec<Vec<f64>>,
}

impl CorrelationMatrix {
    /// Correlation between two named variables.
    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        let i = self.variables.iter().position(|v| v == a)?;
        let j = self.variables.iter().position(|v| v == b)?;
        Some(self.matrix[i][j])
    }

    pub fn from_columns(variables: Vec<String>, columns: &[Vec<f64>]) -> Result<Self, FusionError> {
        let k = columns.len();
        let mut matrix = vec![vec![0.0; k]; k];
        for i in 0..k {
            matrix[i][i] = 1.0;
            for j in (i + 1)..k {
                let r = pearson(&columns[i], &columns[j])?;
                matrix[i][j] = r;
                matrix[j][i] = r;
            }
        }
        if k == 1 {
            pearson(&columns[0], &columns[0])?;
        }
        Ok(Self { variables, matrix })
    }

    /// Fixed-width text rendering with two decimals.
    pub fn render(&self) -> String {
        let width = self.variables.iter().map(|v| v.len()).max().unwrap_or(0);
        let mut out = format!("{:width$}", "");
        for (j, _) in self.variables.iter().enumerate() {
            out.push_str(&format!(" {:>7}", format!("[{j}]")));
        }
        out.push('\n');
        for (i, v) in self.variables.iter().enumerate() {
            out.push_str(&format!("{v:width$}"));
            for r in &self.matrix[i] {
                out.push_str(&format!(" {r:>7.2}"));
            }
            out.push_str(&format!("   [{i}]\n"));
        }
        out
    }
}

/// Correlations among the mean story embedding, mean image embedding and the
/// story-point class index, plus the severity rank when requested.
pub fn correlation_matrix(
    records: &[StoryRecord],
    embeddings: &[EmbeddingRecord],
    scale: &SeverityScale,
    classes: &FibClassMap,
    include_severity: bool,
) -> Result<CorrelationMatrix, FusionError> {
    let joined = index_embeddings(records, embeddings)?;
    let mut story = Vec::with_capacity(records.len());
    let mut image = Vec::with_capacity(records.len());
    let mut target = Vec::with_capacity(records.len());
    let mut severity = Vec::with_capacity(records.len());
    for (record, emb) in records.iter().zip(&joined) {
        story.push(mean_pool(&emb.story_embedding)?);
        image.push(mean_pool(&emb.image_embedding)?);
        target.push(classes.sp_to_class(i64::from(record.story_point))? as f64);
        if include_severity {
            severity.push(f64::from(scale.encode(&record.severity)?));
        }
    }
    let mut variables = vec![STORY_MEAN_VAR.to_string(), IMAGE_MEAN_VAR.to_string(), STORY_POINT_VAR.to_string()];
    let mut columns = vec![story, image, target];
    if include_severity {
        variables.push(SEVERITY_VAR.to_string());
        columns.push(severity);
    }
    CorrelationMatrix::from_columns(variables, &columns)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::SeverityLabel;

    fn record(id: &str, severity: i64, sp: u32) -> StoryRecord {
        StoryRecord {
            story_id: id.into(),
            story_text: "t".into(),
            severity: SeverityLabel::Rank(severity),
            story_point: sp,
            image_ref: None,
        }
    }

    fn emb(id: &str, t: Vec<f64>, i: Vec<f64>) -> EmbeddingRecord {
        EmbeddingRecord { story_id: id.into(), story_embedding: t, image_embedding: i }
    }

    #[test]
    fn mean_pool_cases() {
        assert_eq!(mean_pool(&[1.0, 2.0, 3.0]).unwrap(), 2.0);
        assert_eq!(mean_pool(&[0.0; 8]).unwrap(), 0.0);
        assert!(matches!(mean_pool(&[]), Err(FusionError::EmptyVector)));
    }

    #[test]
    fn fuse_dimensions() {
        let records = vec![record("a", 2, 3), record("b", 1, 8)];
        let embs = vec![emb("b", vec![5.0; 4], vec![6.0; 4]), emb("a", vec![1.0, 2.0, 3.0, 4.0], vec![0.5; 4])];
        let scale = SeverityScale::Numeric;
        let classes = FibClassMap::default();
        let with = fuse(&records, &embs, &scale, &classes, true).unwrap();
        assert_eq!(with.n_cols, 9);
        assert_eq!(with.column_names.last().unwrap(), "severity");
        assert_eq!(with.row(0), &[1.0, 2.0, 3.0, 4.0, 0.5, 0.5, 0.5, 0.5, 2.0]);
        assert_eq!(with.labels, vec![2, 4]);
        let without = fuse(&records, &embs, &scale, &classes, false).unwrap();
        assert_eq!(without.n_cols, 8);
        assert_eq!(without.column_names[4], "image_0");
    }

    #[test]
    fn fuse_names_missing_ids() {
        let records = vec![record("a", 1, 1), record("zz", 1, 1)];
        let embs = vec![emb("a", vec![1.0], vec![1.0])];
        let err = fuse(&records, &embs, &SeverityScale::Numeric, &FibClassMap::default(), false).unwrap_err();
        match &err {
            FusionError::MissingEmbeddings(ids) => assert_eq!(ids, &vec!["zz".to_string()]),
            other => panic!("unexpected {other:?}"),
        }
        assert!(err.to_string().contains("zz"));
    }

    #[test]
    fn fuse_rejects_mixed_dimensions() {
        let records = vec![record("a", 1, 1), record("b", 1, 1)];
        let embs = vec![emb("a", vec![1.0, 2.0], vec![1.0]), emb("b", vec![1.0], vec![1.0])];
        assert!(matches!(
            fuse(&records, &embs, &SeverityScale::Numeric, &FibClassMap::default(), false),
            Err(FusionError::InconsistentDimensions)
        ));
    }

    fn single_column(values: &[f64]) -> FeatureMatrix {
        FeatureMatrix {
            story_ids: (0..values.len()).map(|i| i.to_string()).collect(),
            column_names: vec!["text_0".into()],
            n_cols: 1,
            data: values.to_vec(),
            labels: vec![0; values.len()],
            include_severity: false,
        }
    }

    #[test]
    fn normalizer_uses_population_std() {
        let m = single_column(&[1.0, 2.0, 3.0]);
        let stats = fit_normalizer(&m);
        assert_eq!(stats.mean, vec![2.0]);
        assert!((stats.std[0] - (2.0f64 / 3.0).sqrt()).abs() < 1e-15);
        let z = apply_normalizer(&stats, &m).unwrap();
        assert!(z.data.iter().sum::<f64>().abs() < 1e-12);
        // (4 - 2) / sqrt(2/3) = sqrt(6)
        let applied = stats.apply_row(&[4.0]).unwrap();
        assert!((applied[0] - 6.0f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn normalizer_zeroes_constant_column() {
        let m = single_column(&[5.0, 5.0, 5.0]);
        let z = apply_normalizer(&fit_normalizer(&m), &m).unwrap();
        assert_eq!(z.data, vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn normalizer_leaves_severity_alone() {
        let records = vec![record("a", 1, 1), record("b", 3, 2), record("c", 2, 3)];
        let embs = vec![
            emb("a", vec![1.0], vec![0.0]),
            emb("b", vec![2.0], vec![1.0]),
            emb("c", vec![4.0], vec![5.0]),
        ];
        let m = fuse(&records, &embs, &SeverityScale::Numeric, &FibClassMap::default(), true).unwrap();
        let z = apply_normalizer(&fit_normalizer(&m), &m).unwrap();
        assert_eq!(z.column(2), vec![1.0, 3.0, 2.0]);
        assert!(z.column(0).iter().sum::<f64>().abs() < 1e-12);
    }

    #[test]
    fn normalizer_dimension_mismatch() {
        let stats = fit_normalizer(&single_column(&[1.0, 2.0]));
        assert!(matches!(stats.apply_row(&[1.0, 2.0]), Err(FusionError::ColumnMismatch { .. })));
    }

    #[test]
    fn pearson_cases() {
        assert_eq!(pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap(), 1.0);
        assert_eq!(pearson(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap(), -1.0);
        assert!(matches!(pearson(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]), Err(FusionError::ConstantInput)));
        assert!(matches!(pearson(&[0.1, 0.1, 0.1], &[1.0, 2.0, 3.0]), Err(FusionError::ConstantInput)));
        assert!(pearson(&[1.0], &[1.0]).is_err());
        assert!(pearson(&[1.0, 2.0], &[1.0]).is_err());
    }

    #[test]
    fn severity_equal_to_class_gives_unit_correlation() {
        let records: Vec<_> = [1u32, 2, 3, 5, 8, 3]
            .iter()
            .enumerate()
            .map(|(i, &sp)| {
                let class = FibClassMap::default().sp_to_class(sp as i64).unwrap();
                record(&i.to_string(), class as i64, sp)
            })
            .collect();
        let embs: Vec<_> = (0..6)
            .map(|i| emb(&i.to_string(), vec![i as f64, 1.0], vec![(i * i) as f64, 0.0]))
            .collect();
        let cm = correlation_matrix(&records, &embs, &SeverityScale::Numeric, &FibClassMap::default(), true).unwrap();
        assert_eq!(cm.variables.len(), 4);
        assert!((cm.get(SEVERITY_VAR, STORY_POINT_VAR).unwrap() - 1.0).abs() < 1e-12);
        let without =
            correlation_matrix(&records, &embs, &SeverityScale::Numeric, &FibClassMap::default(), false).unwrap();
        assert_eq!(without.variables, vec![STORY_MEAN_VAR, IMAGE_MEAN_VAR, STORY_POINT_VAR]);
    }

    #[test]
    fn embeddings_file_with_header() {
        let input = concat!(
            r#"{"pooling":"canonical","text_dim":2,"image_dim":1}"#,
            "\n",
            r#"{"story_id":"a","story_embedding":[1.0,2.0],"image_embedding":[0.5],"image_missing":false}"#,
            "\n",
        );
        let set = parse_embeddings(input.as_bytes()).unwrap();
        assert_eq!(set.header.as_ref().unwrap().pooling.as_deref(), Some("canonical"));
        assert_eq!(set.records.len(), 1);

        let bad = concat!(
            r#"{"pooling":"canonical","text_dim":3,"image_dim":1}"#,
            "\n",
            r#"{"story_id":"a","story_embedding":[1.0,2.0],"image_embedding":[0.5]}"#,
        );
        assert!(matches!(
            parse_embeddings(bad.as_bytes()),
            Err(FusionError::DimensionMismatch { line: 2, .. })
        ));
    }

    #[test]
    fn embeddings_file_errors() {
        let mixed = concat!(
            r#"{"story_id":"a","story_embedding":[1.0,2.0],"image_embedding":[0.5]}"#,
            "\n",
            r#"{"story_id":"b","story_embedding":[1.0],"image_embedding":[0.5]}"#,
        );
        assert!(matches!(
            parse_embeddings(mixed.as_bytes()),
            Err(FusionError::DimensionMismatch { line: 2, field: "story_embedding", .. })
        ));
        let dup = concat!(
            r#"{"story_id":"a","story_embedding":[1.0],"image_embedding":[0.5]}"#,
            "\n",
            r#"{"story_id":"a","story_embedding":[1.0],"image_embedding":[0.5]}"#,
        );
        assert!(matches!(parse_embeddings(dup.as_bytes()), Err(FusionError::DuplicateId { .. })));
        assert!(parse_embeddings("[1,2]".as_bytes()).is_err());
    }
}
