//! Single-hidden-layer SELU classifier trained with Adam on softmax cross-entropy.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{smote, stratified_split, CodedDataset, DatasetError, SplitSpec};

pub const SELU_LAMBDA: f64 = 1.0507009873554805;
pub const SELU_ALPHA: f64 = 1.6732632423543772;

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPSILON: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum PredictorError {
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("training set is empty")]
    EmptyTraining,
    #[error("class `{0}` does not occur in the training data")]
    MissingClass(String),
    #[error("target `{0}` must have at least two classes")]
    TooFewClasses(String),
    #[error("schema mismatch: {0}")]
    Schema(String),
    #[error("prediction and truth have lengths {0} and {1}")]
    Length(usize, usize),
    #[error("no predictions to score")]
    Empty,
    #[error("class `{label}` has {rows} rows, fewer than the {k} folds")]
    ClassTooSmall { label: String, rows: usize, k: usize },
    #[error("model file: {0}")]
    Format(String),
    #[error("cannot access {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = PredictorError> = std::result::Result<T, E>;

pub fn selu(x: f64) -> f64 {
    if x > 0.0 {
        SELU_LAMBDA * x
    } else {
        SELU_LAMBDA * SELU_ALPHA * x.exp_m1()
    }
}

fn selu_derivative(x: f64) -> f64 {
    if x > 0.0 {
        SELU_LAMBDA
    } else {
        SELU_LAMBDA * SELU_ALPHA * x.exp()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MlpConfig {
    pub hidden_units: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without a new best validation loss before training stops.
    pub patience: usize,
    pub seed: u64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        MlpConfig {
            hidden_units: 28,
            learning_rate: 0.0005,
            batch_size: 32,
            max_epochs: 200,
            patience: 10,
            seed: 0,
        }
    }
}

impl MlpConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(PredictorError::Config(m.to_string()));
        if self.hidden_units < 1 {
            return fail("hidden_units must be at least 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return fail("learning_rate must be positive");
        }
        if self.batch_size < 1 {
            return fail("batch_size must be at least 1");
        }
        if self.max_epochs < 1 {
            return fail("max_epochs must be at least 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub train: f64,
    /// `None` when training ran without a validation set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub validation: Option<f64>,
}

/// Trained network.
///
/// Parameters are stored flat as input-to-hidden weights (row per hidden
/// unit), hidden biases, hidden-to-output weights (row per class), and output
/// biases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub features: Vec<String>,
    pub target: String,
    pub class_codes: Vec<i32>,
    pub class_labels: Vec<String>,
    pub n_hidden: usize,
    pub config: MlpConfig,
    pub best_epoch: usize,
    pub history: Vec<EpochLoss>,
    params: Vec<f64>,
}

struct Layout {
    inputs: usize,
    hidden: usize,
    classes: usize,
}

impl Layout {
    fn w1(&self) -> usize {
        0
    }
    fn b1(&self) -> usize {
        self.hidden * self.inputs
    }
    fn w2(&self) -> usize {
        self.b1() + self.hidden
    }
    fn b2(&self) -> usize {
        self.w2() + self.classes * self.hidden
    }
    fn len(&self) -> usize {
        self.b2() + self.classes
    }
}

impl MlpModel {
    /// Freshly initialized network: weights drawn from a zero-mean normal with
    /// variance `1 / fan_in`, biases zero.
    pub fn initialize(
        features: Vec<String>,
        target: String,
        class_codes: Vec<i32>,
        class_labels: Vec<String>,
        config: &MlpConfig,
    ) -> Result<Self> {
        config.validate()?;
        if class_codes.len() < 2 {
            return Err(PredictorError::TooFewClasses(target));
        }
        let layout = Layout {
            inputs: features.len(),
            hidden: config.hidden_units,
            classes: class_codes.len(),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut params = vec![0.0; layout.len()];
        let w1 = Normal::new(0.0, (1.0 / layout.inputs.max(1) as f64).sqrt()).expect("finite");
        for p in &mut params[layout.w1()..layout.b1()] {
            *p = w1.sample(&mut rng);
        }
        let w2 = Normal::new(0.0, (1.0 / layout.hidden as f64).sqrt()).expect("finite");
        for p in &mut params[layout.w2()..layout.b2()] {
            *p = w2.sample(&mut rng);
        }
        Ok(MlpModel {
            features,
            target,
            class_codes,
            class_labels,
            n_hidden: config.hidden_units,
            config: config.clone(),
            best_epoch: 0,
            history: Vec::new(),
            params,
        })
    }

    fn layout(&self) -> Layout {
        Layout {
            inputs: self.features.len(),
            hidden: self.n_hidden,
            classes: self.class_codes.len(),
        }
    }

    pub fn n_classes(&self) -> usize {
        self.class_codes.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    /// Replaces all parameters; the length must match the architecture.
    pub fn set_params(&mut self, params: Vec<f64>) -> Result<()> {
        if params.len() != self.layout().len() {
            return Err(PredictorError::Schema(format!(
                "{} parameters, expected {}",
                params.len(),
                self.layout().len()
            )));
        }
        self.params = params;
        Ok(())
    }

    /// Hidden pre-activations and class probabilities for one input.
    fn forward(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let l = self.layout();
        let p = &self.params;
        let pre: Vec<f64> = (0..l.hidden)
            .map(|h| {
                let row = &p[l.w1() + h * l.inputs..l.w1() + (h + 1) * l.inputs];
                p[l.b1() + h] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
            })
            .collect();
        let act: Vec<f64> = pre.iter().map(|&z| selu(z)).collect();
        let logits: Vec<f64> = (0..l.classes)
            .map(|c| {
                let row = &p[l.w2() + c * l.hidden..l.w2() + (c + 1) * l.hidden];
                p[l.b2() + c] + row.iter().zip(&act).map(|(w, a)| w * a).sum::<f64>()
            })
            .collect();
        (pre, softmax(&logits))
    }

    /// Class probabilities for one feature vector in the model's feature order.
    pub fn probabilities(&self, x: &[f64]) -> Vec<f64> {
        self.forward(x).1
    }

    /// Mean cross-entropy of `x` against class indices `y`.
    pub fn loss(&self, x: &[Vec<f64>], y: &[usize]) -> f64 {
        x.iter()
            .zip(y)
            .map(|(row, &c)| -self.probabilities(row)[c].max(f64::MIN_POSITIVE).ln())
            .sum::<f64>()
            / x.len() as f64
    }

    /// Mean cross-entropy and its gradient with respect to the flat parameters.
    pub fn loss_gradient(&self, x: &[Vec<f64>], y: &[usize]) -> (f64, Vec<f64>) {
        let l = self.layout();
        let p = &self.params;
        let mut grad = vec![0.0; l.len()];
        let mut loss = 0.0;
        let scale = 1.0 / x.len() as f64;
        for (row, &target) in x.iter().zip(y) {
            let (pre, probs) = self.forward(row);
            loss -= probs[target].max(f64::MIN_POSITIVE).ln();
            let act: Vec<f64> = pre.iter().map(|&z| selu(z)).collect();
            let mut dhidden = vec![0.0; l.hidden];
            for c in 0..l.classes {
                let dlogit = (probs[c] - if c == target { 1.0 } else { 0.0 }) * scale;
                grad[l.b2() + c] += dlogit;
                for h in 0..l.hidden {
                    grad[l.w2() + c * l.hidden + h] += dlogit * act[h];
                    dhidden[h] += dlogit * p[l.w2() + c * l.hidden + h];
                }
            }
            for h in 0..l.hidden {
                let dpre = dhidden[h] * selu_derivative(pre[h]);
                grad[l.b1() + h] += dpre;
                for (i, v) in row.iter().enumerate() {
                    grad[l.w1() + h * l.inputs + i] += dpre * v;
                }
            }
        }
        (loss * scale, grad)
    }

    /// Column indices of the model's features in `data`.
    fn feature_columns(&self, data: &CodedDataset) -> Result<Vec<usize>> {
        self.features
            .iter()
            .map(|f| {
                data.column_index(f)
                    .ok_or_else(|| PredictorError::Schema(format!("missing feature column `{f}`")))
            })
            .collect()
    }

    pub fn save(&self, path: &Path, comment: Option<&str>) -> Result<()> {
        let io = |source| PredictorError::Io {
            path: path.display().to_string(),
            source,
        };
        std::fs::write(path, self.to_toml_string(comment)).map_err(io)
    }

    pub fn to_toml_string(&self, comment: Option<&str>) -> String {
        let body = toml::to_string(self).expect("model serializes");
        match comment {
            Some(c) => format!("# {c}\n{body}"),
            None => body,
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let model: MlpModel =
            toml::from_str(text).map_err(|e| PredictorError::Format(e.to_string()))?;
        if model.params.len() != model.layout().len() || model.class_codes.len() != model.class_labels.len() {
            return Err(PredictorError::Format("parameter count does not match the architecture".into()));
        }
        Ok(model)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| PredictorError::Io {
            path: path.display().to_string(),
            source,
        })?;
        MlpModel::from_toml_str(&text)
    }
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|z| (z - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Features and class indices of `data` for a model's schema.
fn design(model: &MlpModel, data: &CodedDataset) -> Result<(Vec<Vec<f64>>, Vec<usize>)> {
    let cols = model.feature_columns(data)?;
    let t = data
        .column_index(&model.target)
        .ok_or_else(|| PredictorError::Schema(format!("missing target column `{}`", model.target)))?;
    let y = data
        .column(t)
        .map(|code| {
            model
                .class_codes
                .iter()
                .position(|&c| c == code)
                .ok_or_else(|| PredictorError::Schema(format!("target code {code} is not a class")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((data.feature_matrix(&cols), y))
}

/// Names of every column except `target`.
pub fn feature_names(data: &CodedDataset, target: &str) -> Vec<String> {
    data.column_names()
        .into_iter()
        .filter(|n| *n != target)
        .map(str::to_string)
        .collect()
}

/// Trains on `train` (all non-target columns are features), early-stopping on
/// `val` and restoring the best-validation weights. An empty `val` disables
/// early stopping.
pub fn train_mlp(train: &CodedDataset, val: &CodedDataset, target: &str, config: &MlpConfig) -> Result<MlpModel> {
    config.validate()?;
    if train.n_rows() == 0 {
        return Err(PredictorError::EmptyTraining);
    }
    let t = train.require_column(target)?;
    let var = train.variable(t).clone();
    let mut model = MlpModel::initialize(
        feature_names(train, target),
        target.to_string(),
        var.codes().collect(),
        var.levels.iter().map(|l| l.label.clone()).collect(),
        config,
    )?;
    let counts = train.class_counts(t);
    for (code, label) in model.class_codes.iter().zip(&model.class_labels) {
        if !counts.contains_key(code) {
            return Err(PredictorError::MissingClass(label.clone()));
        }
    }
    let (x, y) = design(&model, train)?;
    let (vx, vy) = if val.n_rows() > 0 {
        design(&model, val)?
    } else {
        (Vec::new(), Vec::new())
    };

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(1));
    let mut order: Vec<usize> = (0..x.len()).collect();
    let mut m = vec![0.0; model.params.len()];
    let mut v = vec![0.0; model.params.len()];
    let mut step = 0i32;
    let mut best = (f64::INFINITY, model.params.clone(), 0usize);
    let mut stale = 0;
    for epoch in 0..config.max_epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(config.batch_size) {
            let bx: Vec<Vec<f64>> = batch.iter().map(|&i| x[i].clone()).collect();
            let by: Vec<usize> = batch.iter().map(|&i| y[i]).collect();
            let (_, grad) = model.loss_gradient(&bx, &by);
            step += 1;
            let c1 = 1.0 - ADAM_BETA1.powi(step);
            let c2 = 1.0 - ADAM_BETA2.powi(step);
            for k in 0..grad.len() {
                m[k] = ADAM_BETA1 * m[k] + (1.0 - ADAM_BETA1) * grad[k];
                v[k] = ADAM_BETA2 * v[k] + (1.0 - ADAM_BETA2) * grad[k] * grad[k];
                model.params[k] -= config.learning_rate * (m[k] / c1) / ((v[k] / c2).sqrt() + ADAM_EPSILON);
            }
        }
        let train_loss = model.loss(&x, &y);
        let val_loss = (!vx.is_empty()).then(|| model.loss(&vx, &vy));
        model.history.push(EpochLoss {
            train: train_loss,
            validation: val_loss,
        });
        if let Some(vl) = val_loss {
            if vl < best.0 {
                best = (vl, model.params.clone(), epoch);
                stale = 0;
            } else {
                stale += 1;
                if stale >= config.patience {
                    break;
                }
            }
        } else {
            best = (train_loss, model.params.clone(), epoch);
        }
    }
    model.params = best.1;
    model.best_epoch = best.2;
    Ok(model)
}

/// Softmax probabilities per row of `data`.
pub fn predict(model: &MlpModel, data: &CodedDataset) -> Result<Vec<Vec<f64>>> {
    let cols = model.feature_columns(data)?;
    Ok(data
        .feature_matrix(&cols)
        .iter()
        .map(|row| model.probabilities(row))
        .collect())
}

/// Index of the largest probability, ties to the lowest index.
pub fn argmax(probs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > probs[best] {
            best = i;
        }
    }
    best
}

/// Predicted class codes per row of `data`.
pub fn predict_classes(model: &MlpModel, data: &CodedDataset) -> Result<Vec<i32>> {
    Ok(predict(model, data)?
        .iter()
        .map(|p| model.class_codes[argmax(p)])
        .collect())
}

/// Percentage of positions where `predicted` equals `actual`.
pub fn accuracy<T: PartialEq>(predicted: &[T], actual: &[T]) -> Result<f64> {
    if predicted.len() != actual.len() {
        return Err(PredictorError::Length(predicted.len(), actual.len()));
    }
    if predicted.is_empty() {
        return Err(PredictorError::Empty);
    }
    let hits = predicted.iter().zip(actual).filter(|(a, b)| a == b).count();
    Ok(100.0 * hits as f64 / predicted.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassScore {
    pub label: String,
    pub precision: f64,
    pub recall: f64,
    pub support: usize,
}

/// Per-class precision and recall; an undefined ratio is reported as 0.
pub fn class_scores(model: &MlpModel, predicted: &[i32], actual: &[i32]) -> Result<Vec<ClassScore>> {
    if predicted.len() != actual.len() {
        return Err(PredictorError::Length(predicted.len(), actual.len()));
    }
    Ok(model
        .class_codes
        .iter()
        .zip(&model.class_labels)
        .map(|(&code, label)| {
            let tp = predicted.iter().zip(actual).filter(|(p, a)| **p == code && **a == code).count();
            let pp = predicted.iter().filter(|&&p| p == code).count();
            let support = actual.iter().filter(|&&a| a == code).count();
            let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
            ClassScore {
                label: label.clone(),
                precision: ratio(tp, pp),
                recall: ratio(tp, support),
                support,
            }
        })
        .collect())
}

/// Row indices of `data` dealt into `k` folds, stratified on `target`.
pub fn stratified_folds(data: &CodedDataset, target: &str, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(PredictorError::Config("need at least 2 folds".into()));
    }
    let t = data.require_column(target)?;
    let var = data.variable(t).clone();
    let mut folds = vec![Vec::new(); k];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut offset = 0;
    for (code, _) in data.class_counts(t) {
        let mut rows: Vec<usize> = (0..data.n_rows()).filter(|&r| data.value(r, t) == code).collect();
        if rows.len() < k {
            return Err(PredictorError::ClassTooSmall {
                label: var.label_of(code).unwrap_or("?").to_string(),
                rows: rows.len(),
                k,
            });
        }
        rows.shuffle(&mut rng);
        for (i, r) in rows.into_iter().enumerate() {
            folds[(offset + i) % k].push(r);
        }
        offset += 1;
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

/// Seed for fold `fold` derived from a base seed.
fn fold_seed(seed: u64, fold: usize) -> u64 {
    seed ^ (fold as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Holds out 10% of `train` (stratified) for early stopping, oversamples the
/// rest with SMOTE, and trains.
pub fn fit_with_protocol(train: &CodedDataset, target: &str, smote_k: usize, config: &MlpConfig) -> Result<MlpModel> {
    let spec = SplitSpec::new(&[("fit", 0.9), ("validation", 0.1)], target, config.seed);
    let parts = stratified_split(train, &spec)?;
    let balanced = smote(&parts[0], target, smote_k, config.seed)?;
    train_mlp(&balanced, &parts[1], target, config)
}

/// Stratified `k`-fold accuracies; each fold's model is fit on the other folds
/// with [`fit_with_protocol`].
pub fn cross_validate(
    data: &CodedDataset,
    target: &str,
    k: usize,
    smote_k: usize,
    config: &MlpConfig,
) -> Result<Vec<f64>> {
    config.validate()?;
    let folds = stratified_folds(data, target, k, config.seed)?;
    let t = data.require_column(target)?;
    (0..k)
        .into_par_iter()
        .map(|i| {
            let train_rows: Vec<usize> = (0..k)
                .filter(|&j| j != i)
                .flat_map(|j| folds[j].iter().copied())
                .collect::<std::collections::BTreeSet<_>>()
                .into_iter()
                .collect();
            let train = data.select_rows(&train_rows);
            let test = data.select_rows(&folds[i]);
            let cfg = MlpConfig {
                seed: fold_seed(config.seed, i),
                ..config.clone()
            };
            let model = fit_with_protocol(&train, target, smote_k, &cfg)?;
            let predicted = predict_classes(&model, &test)?;
            let actual: Vec<i32> = test.column(t).collect();
            accuracy(&predicted, &actual)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{collapse_one_hot, Variable};
    use rand::Rng;

    fn separable(n: usize, seed: u64) -> CodedDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows = (0..n)
            .map(|_| {
                let a = rng.random_range(0..=9);
                let b = rng.random_range(0..=9);
                vec![a, b, i32::from(a + b > 9)]
            })
            .collect();
        CodedDataset::new(
            vec![
                Variable::with_codes("a", 0, 9),
                Variable::with_codes("b", 0, 9),
                Variable::with_labels("y", &["low", "high"]),
            ],
            rows,
        )
        .unwrap()
    }

    fn three_class(n: usize, seed: u64) -> CodedDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows = (0..n)
            .map(|_| {
                let a = rng.random_range(0..=5);
                let b = rng.random_range(0..=1);
                vec![a, b, (a / 2).min(2)]
            })
            .collect();
        CodedDataset::new(
            vec![
                Variable::with_codes("a", 0, 5),
                Variable::with_codes("b", 0, 1),
                Variable::with_labels("mode", &["Car", "Public", "Walk"]),
            ],
            rows,
        )
        .unwrap()
    }

    #[test]
    fn selu_values() {
        assert_eq!(selu(0.0), 0.0);
        assert_eq!(selu(1.0), 1.0507009873554805);
        assert!((selu(-20.0) + 1.7580993408473766).abs() < 1e-6);
        assert!((selu(1e-12) - selu(-1e-12)).abs() < 1e-11);
    }

    #[test]
    fn accuracy_examples() {
        assert_eq!(accuracy(&[1, 2, 3], &[1, 2, 3]).unwrap(), 100.0);
        assert!((accuracy(&[1, 1, 0], &[1, 0, 0]).unwrap() - 200.0 / 3.0).abs() < 1e-12);
        let pred: Vec<i32> = (0..100).map(|i| i32::from(i < 75)).collect();
        assert_eq!(accuracy(&pred, &[1; 100]).unwrap(), 75.0);
        assert!(matches!(accuracy::<i32>(&[], &[]), Err(PredictorError::Empty)));
        assert!(matches!(accuracy(&[1], &[1, 2]), Err(PredictorError::Length(1, 2))));
    }

    #[test]
    fn separable_toy_reaches_full_accuracy() {
        let data = separable(200, 3);
        let cfg = MlpConfig {
            learning_rate: 0.01,
            max_epochs: 200,
            patience: 200,
            ..MlpConfig::default()
        };
        let model = train_mlp(&data, &data, "y", &cfg).unwrap();
        let predicted = predict_classes(&model, &data).unwrap();
        let actual: Vec<i32> = data.column(2).collect();
        assert_eq!(accuracy(&predicted, &actual).unwrap(), 100.0);
    }

    #[test]
    fn training_is_deterministic() {
        let data = three_class(300, 1);
        let cfg = MlpConfig { max_epochs: 5, ..MlpConfig::default() };
        let a = train_mlp(&data, &data, "mode", &cfg).unwrap();
        let b = train_mlp(&data, &data, "mode", &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn probabilities_are_normalized() {
        let data = three_class(50, 2);
        let model = train_mlp(&data, &data, "mode", &MlpConfig { max_epochs: 2, ..MlpConfig::default() }).unwrap();
        for row in predict(&model, &data).unwrap() {
            assert_eq!(row.len(), 3);
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-6);
            assert!(row.iter().all(|p| (0.0..=1.0).contains(p)));
        }
    }

    #[test]
    fn zero_output_layer_is_uniform() {
        let data = three_class(20, 4);
        let mut model = MlpModel::initialize(
            vec!["a".into(), "b".into()],
            "mode".into(),
            vec![0, 1, 2],
            vec!["Car".into(), "Public".into(), "Walk".into()],
            &MlpConfig::default(),
        )
        .unwrap();
        let l = model.layout();
        let mut p = model.params().to_vec();
        p[l.w2()..].iter_mut().for_each(|w| *w = 0.0);
        model.set_params(p).unwrap();
        for row in predict(&model, &data).unwrap() {
            for q in row {
                assert!((q - 1.0 / 3.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn argmax_ties_go_low() {
        assert_eq!(argmax(&[0.2, 0.4, 0.4]), 1);
        assert_eq!(argmax(&[0.5, 0.5]), 0);
    }

    #[test]
    fn schema_and_class_errors() {
        let data = three_class(60, 5);
        let model = train_mlp(&data, &data, "mode", &MlpConfig { max_epochs: 1, ..MlpConfig::default() }).unwrap();
        let missing = data.select_columns(&["a", "mode"]).unwrap();
        assert!(matches!(predict(&model, &missing), Err(PredictorError::Schema(_))));

        let only_car: Vec<usize> = (0..data.n_rows()).filter(|&r| data.value(r, 2) == 0).collect();
        let car = data.select_rows(&only_car);
        assert!(matches!(
            train_mlp(&car, &car, "mode", &MlpConfig::default()),
            Err(PredictorError::MissingClass(_))
        ));
        let empty = data.select_rows(&[]);
        assert!(matches!(
            train_mlp(&empty, &data, "mode", &MlpConfig::default()),
            Err(PredictorError::EmptyTraining)
        ));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let data = three_class(5, 8);
        let model = MlpModel::initialize(
            vec!["a".into(), "b".into()],
            "mode".into(),
            vec![0, 1, 2],
            vec!["Car".into(), "Public".into(), "Walk".into()],
            &MlpConfig { hidden_units: 6, seed: 3, ..MlpConfig::default() },
        )
        .unwrap();
        let (x, y) = design(&model, &data).unwrap();
        let (_, analytic) = model.loss_gradient(&x, &y);
        let eps = 1e-5;
        for k in 0..analytic.len() {
            let mut plus = model.clone();
            let mut minus = model.clone();
            plus.params[k] += eps;
            minus.params[k] -= eps;
            let numeric = (plus.loss(&x, &y) - minus.loss(&x, &y)) / (2.0 * eps);
            let rel = (analytic[k] - numeric).abs() / analytic[k].abs().max(numeric.abs()).max(1e-6);
            assert!(rel < 1e-4, "param {k}: {} vs {numeric}", analytic[k]);
        }
    }

    #[test]
    fn class_permutation_is_equivariant() {
        let data = three_class(40, 9);
        let model = train_mlp(&data, &data, "mode", &MlpConfig { max_epochs: 3, ..MlpConfig::default() }).unwrap();
        let l = model.layout();
        let perm = [2usize, 0, 1];
        let mut permuted = model.clone();
        let mut p = model.params().to_vec();
        for (new, &old) in perm.iter().enumerate() {
            for h in 0..l.hidden {
                p[l.w2() + new * l.hidden + h] = model.params()[l.w2() + old * l.hidden + h];
            }
            p[l.b2() + new] = model.params()[l.b2() + old];
        }
        permuted.set_params(p).unwrap();
        let a = predict(&model, &data).unwrap();
        let b = predict(&permuted, &data).unwrap();
        for (ra, rb) in a.iter().zip(&b) {
            assert_eq!(perm[argmax(rb)], argmax(ra));
            for (new, &old) in perm.iter().enumerate() {
                assert!((rb[new] - ra[old]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn early_training_loss_does_not_rise() {
        let data = crate::scm_oracle::preset("northlike").unwrap().sample(3000, 12);
        let data = collapse_one_hot(&data, &["Car", "Public", "Walk"], "mode").unwrap();
        let keep: Vec<&str> = data
            .column_names()
            .into_iter()
            .filter(|c| !["Car", "Public", "Walk"].contains(c))
            .collect();
        let data = data.select_columns(&keep).unwrap();
        let model = train_mlp(&data, &data, "mode", &MlpConfig { max_epochs: 5, ..MlpConfig::default() }).unwrap();
        assert_eq!(model.history.len(), 5);
        for w in model.history.windows(2) {
            assert!(w[1].train <= w[0].train + 1e-3, "{:?}", model.history);
        }
    }

    #[test]
    fn save_load_round_trip() {
        let data = three_class(60, 6);
        let model = train_mlp(&data, &data, "mode", &MlpConfig { max_epochs: 2, ..MlpConfig::default() }).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.toml");
        model.save(&path, Some("test")).unwrap();
        let back = MlpModel::load(&path).unwrap();
        assert_eq!(back, model);
        assert!(MlpModel::from_toml_str("features = []").is_err());
    }

    #[test]
    fn cross_validation_on_noiseless_target() {
        let data = three_class(400, 10);
        let cfg = MlpConfig {
            learning_rate: 0.01,
            max_epochs: 150,
            patience: 150,
            ..MlpConfig::default()
        };
        let accs = cross_validate(&data, "mode", 2, 5, &cfg).unwrap();
        assert_eq!(accs, vec![100.0, 100.0]);
    }

    #[test]
    fn folds_require_enough_rows_per_class() {
        let data = three_class(12, 11);
        assert!(matches!(
            stratified_folds(&data, "mode", 50, 0),
            Err(PredictorError::ClassTooSmall { .. })
        ));
        let folds = stratified_folds(&three_class(300, 1), "mode", 5, 0).unwrap();
        let mut all: Vec<usize> = folds.concat();
        all.sort_unstable();
        assert_eq!(all, (0..300).collect::<Vec<_>>());
    }

    #[test]
    fn class_scores_count() {
        let model = MlpModel::initialize(
            vec!["a".into()],
            "y".into(),
            vec![0, 1],
            vec!["no".into(), "yes".into()],
            &MlpConfig::default(),
        )
        .unwrap();
        let s = class_scores(&model, &[1, 1, 0, 0], &[1, 0, 0, 0]).unwrap();
        assert_eq!(s[1].precision, 0.5);
        assert_eq!(s[1].recall, 1.0);
        assert_eq!(s[0].support, 3);
        assert!((s[0].recall - 2.0 / 3.0).abs() < 1e-12);
    }
}
