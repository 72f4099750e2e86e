//! WebAssembly entry points for the demo page in `www/`.
//!
//! Each export takes and returns JSON strings so the page needs no generated
//! type bindings beyond the functions themselves.

use serde::{Deserialize, Serialize};
use spforge::dataset::FibClassMap;
use spforge::eval::{ablation_compare, evaluate_story_points, table5, AblationDiff};
use spforge::fusion::{correlation_matrix, CorrelationMatrix};
use spforge::pipeline::{ablate, AblationOutcome, RunConfig};
use spforge::synth::{generate, SynthConfig};
use wasm_bindgen::prelude::*;

/// Knobs exposed by the page. Anything omitted keeps its default.
#[derive(Clone, Debug, Deserialize)]
#[serde(default)]
pub struct DemoParams {
    pub seed: u64,
    pub text_signal: f64,
    pub image_signal: f64,
    pub severity_noise: f64,
    pub n_estimators: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub test_fraction: f64,
}

impl Default for DemoParams {
    fn default() -> Self {
        let synth = SynthConfig::default();
        let run = RunConfig::default();
        Self {
            seed: 7,
            text_signal: synth.text_signal,
            image_signal: synth.image_signal,
            severity_noise: synth.severity_noise,
            n_estimators: run.train.n_estimators,
            max_depth: run.train.max_depth,
            learning_rate: run.train.learning_rate,
            test_fraction: run.test_fraction,
        }
    }
}

impl DemoParams {
    fn parse(json: &str) -> Result<Self, String> {
        if json.trim().is_empty() {
            return Ok(Self::default());
        }
        serde_json::from_str(json).map_err(|e| format!("bad parameters: {e}"))
    }

    fn synth(&self) -> SynthConfig {
        SynthConfig {
            text_signal: self.text_signal,
            image_signal: self.image_signal,
            severity_noise: self.severity_noise,
            seed: self.seed,
            ..Default::default()
        }
    }

    fn run(&self) -> RunConfig {
        let mut run = RunConfig { seed: self.seed, test_fraction: self.test_fraction, ..Default::default() };
        run.train.seed = self.seed;
        run.train.n_estimators = self.n_estimators;
        run.train.max_depth = self.max_depth;
        run.train.learning_rate = self.learning_rate;
        run
    }
}

#[derive(Serialize)]
pub struct Table5View {
    pub diff: AblationDiff,
    pub table: String,
}

/// Scores the bundled 22-story prediction table at a near-miss tolerance.
pub fn table5_view(tolerance: usize) -> Result<Table5View, String> {
    let rows = table5();
    let classes = FibClassMap::default();
    let actual: Vec<u32> = rows.iter().map(|r| r.actual_sp).collect();
    let score = |preds: Vec<u32>, include: bool| {
        let mut r = evaluate_story_points(&actual, &preds, &classes, tolerance).map_err(|e| e.to_string())?;
        r.include_severity = Some(include);
        Ok::<_, String>(r)
    };
    let with = score(rows.iter().map(|r| r.pred_with_severity).collect(), true)?;
    let without = score(rows.iter().map(|r| r.pred_without_severity).collect(), false)?;
    let diff = ablation_compare(&with, &without).map_err(|e| e.to_string())?;
    let table = diff.render();
    Ok(Table5View { diff, table })
}

#[derive(Serialize)]
pub struct TrainView {
    pub outcome: AblationOutcome,
    pub table: String,
}

/// Generates a synthetic corpus and runs the severity ablation on it.
pub fn train_view(params: &DemoParams) -> Result<TrainView, String> {
    let run = params.run();
    let (records, embs) = generate(&params.synth(), &run.fib_class_values).map_err(|e| e.to_string())?;
    let outcome = ablate(&records, &embs, &run).map_err(|e| e.to_string())?;
    let table = outcome.diff.render();
    Ok(TrainView { outcome, table })
}

/// Correlation matrix (with severity) of a synthetic corpus.
pub fn correlation_view(params: &DemoParams) -> Result<CorrelationMatrix, String> {
    let classes = FibClassMap::default();
    let (records, embs) = generate(&params.synth(), &classes).map_err(|e| e.to_string())?;
    correlation_matrix(&records, &embs, &Default::default(), &classes, true).map_err(|e| e.to_string())
}

fn to_js<T: Serialize>(result: Result<T, String>) -> Result<String, JsValue> {
    result
        .and_then(|v| serde_json::to_string(&v).map_err(|e| e.to_string()))
        .map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = evaluateTable5)]
pub fn evaluate_table5(tolerance: u32) -> Result<String, JsValue> {
    to_js(table5_view(tolerance as usize))
}

#[wasm_bindgen(js_name = trainSynthetic)]
pub fn train_synthetic(params_json: &str) -> Result<String, JsValue> {
    to_js(DemoParams::parse(params_json).and_then(|p| train_view(&p)))
}

#[wasm_bindgen(js_name = correlateSynthetic)]
pub fn correlate_synthetic(params_json: &str) -> Result<String, JsValue> {
    to_js(DemoParams::parse(params_json).and_then(|p| correlation_view(&p)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table5_tolerance_widens_near_miss() {
        let strict = table5_view(0).unwrap();
        assert_eq!(strict.diff.with_severity.near_miss_accuracy, strict.diff.with_severity.accuracy);
        let loose = table5_view(1).unwrap();
        assert_eq!(loose.diff.without_severity.near_miss_accuracy, 21.0 / 22.0);
        assert!(loose.table.contains("near-miss"));
    }

    #[test]
    fn training_is_repeatable() {
        let p = DemoParams { n_estimators: 10, ..Default::default() };
        let a = serde_json::to_string(&train_view(&p).unwrap().outcome).unwrap();
        let b = serde_json::to_string(&train_view(&p).unwrap().outcome).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn params_parse() {
        assert_eq!(DemoParams::parse("").unwrap().n_estimators, 75);
        assert_eq!(DemoParams::parse(r#"{"max_depth": 2}"#).unwrap().max_depth, 2);
        assert!(DemoParams::parse("{").is_err());
    }

    #[test]
    fn correlation_has_severity_row() {
        let cm = correlation_view(&DemoParams::default()).unwrap();
        assert_eq!(cm.variables.len(), 4);
    }
}
