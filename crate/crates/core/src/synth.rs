//! Seeded synthetic corpora with class-dependent embeddings.
//!
//! Each class gets a random prototype direction in the text and image
//! embedding spaces; a story's vectors are `signal * prototype + noise`.
//! Severity tracks the class rank with a configurable amount of jitter.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::{FibClassMap, SeverityLabel, StoryRecord};
use crate::fusion::EmbeddingRecord;
use crate::{Error, Result};

/// Per-class counts for 113 stories, skewed towards 2 and 3 points with few
/// 8-point stories.
pub const IMBALANCED_113: [usize; 5] = [10, 41, 46, 11, 5];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    /// Stories per class, in class order.
    pub class_counts: Vec<usize>,
    pub text_dim: usize,
    pub image_dim: usize,
    /// Scale of the class prototype relative to unit noise.
    pub text_signal: f64,
    pub image_signal: f64,
    /// Standard deviation of the jitter added to the severity rank.
    pub severity_noise: f64,
    /// Number of severity levels.
    pub severity_levels: u32,
    /// Probability that a story has no image reference.
    pub missing_image_rate: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            class_counts: IMBALANCED_113.to_vec(),
            text_dim: 16,
            image_dim: 8,
            text_signal: 0.5,
            image_signal: 0.3,
            severity_noise: 0.5,
            severity_levels: 3,
            missing_image_rate: 0.2,
            seed: 2024,
        }
    }
}

const SUBJECTS: [&str; 8] = [
    "quicksearch", "login form", "attachment viewer", "database adapter", "email notifier",
    "admin panel", "bug list export", "REST endpoint",
];
const PROBLEMS: [&str; 8] = [
    "rejects valid input", "times out under load", "shows a stale value", "crashes on empty fields",
    "needs a new option", "loses the sort order", "renders incorrectly", "fails after upgrade",
];

fn gaussian_vector(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| StandardNormal.sample(rng)).collect()
}

fn unit_prototypes(rng: &mut ChaCha8Rng, classes: usize, dim: usize) -> Vec<Vec<f64>> {
    (0..classes)
        .map(|_| {
            let v = gaussian_vector(rng, dim);
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
            v.into_iter().map(|x| x / norm * (dim as f64).sqrt()).collect()
        })
        .collect()
}

/// Generates records and matching embeddings. Record order is shuffled.
pub fn generate(config: &SynthConfig, classes: &FibClassMap) -> Result<(Vec<StoryRecord>, Vec<EmbeddingRecord>)> {
    if config.class_counts.len() != classes.len() {
        return Err(Error::Config(format!(
            "{} class counts given for {} classes",
            config.class_counts.len(),
            classes.len()
        )));
    }
    if config.text_dim == 0 || config.image_dim == 0 || config.severity_levels == 0 {
        return Err(Error::Config("dimensions and severity levels must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let text_protos = unit_prototypes(&mut rng, classes.len(), config.text_dim);
    let image_protos = unit_prototypes(&mut rng, classes.len(), config.image_dim);

    let mut labels: Vec<usize> = config
        .class_counts
        .iter()
        .enumerate()
        .flat_map(|(c, &n)| std::iter::repeat(c).take(n))
        .collect();
    labels.shuffle(&mut rng);

    let top = (classes.len().max(2) - 1) as f64;
    let levels = f64::from(config.severity_levels);
    let mut records = Vec::with_capacity(labels.len());
    let mut embeddings = Vec::with_capacity(labels.len());
    for (i, &class) in labels.iter().enumerate() {
        let story_id = format!("syn-{:04}", i + 1);
        let subject = SUBJECTS[rng.gen_range(0..SUBJECTS.len())];
        let problem = PROBLEMS[rng.gen_range(0..PROBLEMS.len())];
        let jitter: f64 = StandardNormal.sample(&mut rng);
        let severity = (1.0 + (class as f64 / top) * (levels - 1.0) + config.severity_noise * jitter)
            .round()
            .clamp(1.0, levels) as i64;
        let has_image = rng.gen::<f64>() >= config.missing_image_rate;

        let mut text = gaussian_vector(&mut rng, config.text_dim);
        for (t, p) in text.iter_mut().zip(&text_protos[class]) {
            *t = 0.1 * (*t + config.text_signal * p);
        }
        let mut image = gaussian_vector(&mut rng, config.image_dim);
        for (v, p) in image.iter_mut().zip(&image_protos[class]) {
            *v = if has_image { 0.1 * (*v + config.image_signal * p) } else { 0.0 };
        }

        records.push(StoryRecord {
            story_id: story_id.clone(),
            story_text: format!("The {subject} {problem}"),
            severity: SeverityLabel::Rank(severity),
            story_point: classes.class_to_sp(class)?,
            image_ref: has_image.then(|| format!("images/{story_id}.png")),
        });
        embeddings.push(EmbeddingRecord { story_id, story_embedding: text, image_embedding: image });
    }
    Ok((records, embeddings))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::class_counts;

    #[test]
    fn default_corpus_shape() {
        let classes = FibClassMap::default();
        let (records, embs) = generate(&SynthConfig::default(), &classes).unwrap();
        assert_eq!(records.len(), 113);
        assert_eq!(embs.len(), 113);
        assert_eq!(class_counts(&records, &classes).unwrap(), IMBALANCED_113.to_vec());
        assert!(embs.iter().all(|e| e.story_embedding.len() == 16 && e.image_embedding.len() == 8));
    }

    #[test]
    fn seeded() {
        let classes = FibClassMap::default();
        let a = generate(&SynthConfig::default(), &classes).unwrap();
        let b = generate(&SynthConfig::default(), &classes).unwrap();
        assert_eq!(a, b);
        let c = generate(&SynthConfig { seed: 1, ..Default::default() }, &classes).unwrap();
        assert_ne!(a.1, c.1);
    }

    #[test]
    fn class_count_mismatch() {
        let cfg = SynthConfig { class_counts: vec![1, 2], ..Default::default() };
        assert!(generate(&cfg, &FibClassMap::default()).is_err());
    }
}
