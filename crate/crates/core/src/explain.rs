//! Exact Shapley attributions by full coalition enumeration.
//!
//! The value of a coalition `S` for an instance `x` is the mean model output
//! over background rows `b` after overwriting the features in `S` with those of
//! `x`. Every coalition is enumerated, so the attributions satisfy efficiency,
//! symmetry and the dummy property up to floating-point rounding.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::dataset::CodedDataset;
use crate::predictor::MlpModel;

/// Largest feature count accepted by [`exact_shap`].
pub const MAX_FEATURES: usize = 15;

#[derive(Debug, Error)]
pub enum ExplainError {
    #[error("background sample is empty")]
    EmptyBackground,
    #[error("{0} features exceed the enumeration limit of {MAX_FEATURES}")]
    TooManyFeatures(usize),
    #[error("coalition size {s} is invalid for {f} features")]
    WeightRange { s: usize, f: usize },
    #[error("expected {expected} features, got {got}")]
    Width { expected: usize, got: usize },
    #[error("class index {0} out of range")]
    Class(usize),
    #[error("missing feature column `{0}`")]
    MissingFeature(String),
}

pub type Result<T, E = ExplainError> = std::result::Result<T, E>;

/// A probabilistic classifier over a fixed-width numeric feature vector.
pub trait Classifier: Sync {
    fn n_features(&self) -> usize;
    fn n_classes(&self) -> usize;
    fn predict_proba(&self, x: &[f64]) -> Vec<f64>;
}

impl Classifier for MlpModel {
    fn n_features(&self) -> usize {
        self.features.len()
    }

    fn n_classes(&self) -> usize {
        MlpModel::n_classes(self)
    }

    fn predict_proba(&self, x: &[f64]) -> Vec<f64> {
        self.probabilities(x)
    }
}

/// Classifier backed by a closure; handy for closed-form reference models.
pub struct FnClassifier<F> {
    pub n_features: usize,
    pub n_classes: usize,
    pub f: F,
}

impl<F: Fn(&[f64]) -> Vec<f64> + Sync> Classifier for FnClassifier<F> {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn predict_proba(&self, x: &[f64]) -> Vec<f64> {
        (self.f)(x)
    }
}

/// Distinct background rows with their relative frequencies.
#[derive(Debug, Clone, PartialEq)]
pub struct Background {
    rows: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

impl Background {
    pub fn new(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.is_empty() {
            return Err(ExplainError::EmptyBackground);
        }
        let width = rows[0].len();
        let mut counts: BTreeMap<Vec<u64>, (usize, usize)> = BTreeMap::new();
        for (i, r) in rows.iter().enumerate() {
            if r.len() != width {
                return Err(ExplainError::Width {
                    expected: width,
                    got: r.len(),
                });
            }
            counts
                .entry(r.iter().map(|v| v.to_bits()).collect())
                .or_insert((i, 0))
                .1 += 1;
        }
        let mut unique: Vec<(usize, usize)> = counts.into_values().collect();
        unique.sort_unstable();
        let n = rows.len() as f64;
        Ok(Background {
            rows: unique.iter().map(|&(i, _)| rows[i].clone()).collect(),
            weights: unique.iter().map(|&(_, c)| c as f64 / n).collect(),
        })
    }

    /// Background over the named feature columns of `data`.
    pub fn from_dataset(data: &CodedDataset, features: &[String]) -> Result<Self> {
        Background::new(&feature_rows(data, features)?)
    }

    pub fn width(&self) -> usize {
        self.rows[0].len()
    }

    pub fn n_distinct(&self) -> usize {
        self.rows.len()
    }
}

fn feature_rows(data: &CodedDataset, features: &[String]) -> Result<Vec<Vec<f64>>> {
    let cols = features
        .iter()
        .map(|f| {
            data.column_index(f)
                .ok_or_else(|| ExplainError::MissingFeature(f.clone()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(data.feature_matrix(&cols))
}

/// Up to `max_rows` rows of `data` chosen without replacement, in original order.
pub fn background_sample(data: &CodedDataset, max_rows: usize, seed: u64) -> CodedDataset {
    if data.n_rows() <= max_rows {
        return data.clone();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = rand::seq::index::sample(&mut rng, data.n_rows(), max_rows).into_vec();
    idx.sort_unstable();
    data.select_rows(&idx)
}

/// `|S|! (|F| - |S| - 1)! / |F|!`.
pub fn shapley_weight(s_size: usize, f_size: usize) -> Result<f64> {
    if f_size == 0 || s_size >= f_size {
        return Err(ExplainError::WeightRange { s: s_size, f: f_size });
    }
    // 1 / (|F| * C(|F|-1, |S|)), with the binomial built incrementally.
    let k = s_size.min(f_size - 1 - s_size);
    let mut binom = 1.0;
    for i in 0..k {
        binom = binom * (f_size - 1 - i) as f64 / (i + 1) as f64;
    }
    Ok(1.0 / (f_size as f64 * binom.round()))
}

fn check(model: &dyn Classifier, instance: &[f64], background: &Background) -> Result<()> {
    let f = model.n_features();
    if instance.len() != f {
        return Err(ExplainError::Width {
            expected: f,
            got: instance.len(),
        });
    }
    if background.width() != f {
        return Err(ExplainError::Width {
            expected: f,
            got: background.width(),
        });
    }
    Ok(())
}

/// Expected output of every class when the features in bitmask `mask` come
/// from `instance` and the others from the background.
fn masked_outputs(model: &dyn Classifier, instance: &[f64], mask: usize, background: &Background) -> Vec<f64> {
    let mut out = vec![0.0; model.n_classes()];
    let mut hybrid = vec![0.0; instance.len()];
    for (row, &w) in background.rows.iter().zip(&background.weights) {
        for (j, h) in hybrid.iter_mut().enumerate() {
            *h = if mask >> j & 1 == 1 { instance[j] } else { row[j] };
        }
        for (o, p) in out.iter_mut().zip(model.predict_proba(&hybrid)) {
            *o += w * p;
        }
    }
    out
}

/// Mean probability of `class` with features in `s` taken from `instance`.
pub fn coalition_value(
    model: &dyn Classifier,
    instance: &[f64],
    s: &[usize],
    background: &Background,
    class: usize,
) -> Result<f64> {
    check(model, instance, background)?;
    if class >= model.n_classes() {
        return Err(ExplainError::Class(class));
    }
    let mut mask = 0usize;
    for &j in s {
        if j >= instance.len() {
            return Err(ExplainError::Width {
                expected: instance.len(),
                got: j + 1,
            });
        }
        mask |= 1 << j;
    }
    Ok(masked_outputs(model, instance, mask, background)[class])
}

/// Shapley values of one instance: `phi[class][feature]`, plus the base value
/// (empty-coalition output) per class.
pub fn exact_shap_all(model: &dyn Classifier, instance: &[f64], background: &Background) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    check(model, instance, background)?;
    let f = instance.len();
    if f > MAX_FEATURES {
        return Err(ExplainError::TooManyFeatures(f));
    }
    let values: Vec<Vec<f64>> = (0..1usize << f)
        .into_par_iter()
        .map(|mask| masked_outputs(model, instance, mask, background))
        .collect();
    let weights: Vec<f64> = (0..f.max(1))
        .map(|s| if f == 0 { 0.0 } else { shapley_weight(s, f).expect("in range") })
        .collect();
    let k = model.n_classes();
    let mut phi = vec![vec![0.0; f]; k];
    for (i, _) in instance.iter().enumerate() {
        let bit = 1usize << i;
        for mask in (0..1usize << f).filter(|m| m & bit == 0) {
            let w = weights[mask.count_ones() as usize];
            for c in 0..k {
                phi[c][i] += w * (values[mask | bit][c] - values[mask][c]);
            }
        }
    }
    Ok((phi, values[0].clone()))
}

/// Shapley values of `instance` for one class.
pub fn exact_shap(model: &dyn Classifier, instance: &[f64], background: &Background, class: usize) -> Result<Vec<f64>> {
    if class >= model.n_classes() {
        return Err(ExplainError::Class(class));
    }
    Ok(exact_shap_all(model, instance, background)?.0.swap_remove(class))
}

/// Attributions for a set of instances.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapReport {
    pub features: Vec<String>,
    pub classes: Vec<String>,
    /// Empty-coalition output per class.
    pub base_values: Vec<f64>,
    /// `phi[instance][class][feature]`.
    pub phi: Vec<Vec<Vec<f64>>>,
    /// Full model output per instance and class.
    pub outputs: Vec<Vec<f64>>,
}

impl ShapReport {
    /// Per class, the mean over instances of `|phi|` per feature.
    pub fn mean_abs(&self) -> MeanAbsShap {
        let n = self.phi.len().max(1) as f64;
        let values = (0..self.classes.len())
            .map(|c| {
                (0..self.features.len())
                    .map(|j| self.phi.iter().map(|p| p[c][j].abs()).sum::<f64>() / n)
                    .collect()
            })
            .collect();
        MeanAbsShap {
            features: self.features.clone(),
            classes: self.classes.clone(),
            values,
        }
    }

    /// Largest `|sum(phi) + base - output|` over instances and classes.
    pub fn efficiency_gap(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (p, out) in self.phi.iter().zip(&self.outputs) {
            for c in 0..self.classes.len() {
                let total: f64 = p[c].iter().sum::<f64>() + self.base_values[c];
                worst = worst.max((total - out[c]).abs());
            }
        }
        worst
    }

    /// One row per instance and class with the attribution of every feature.
    pub fn to_instance_csv(&self, comment: Option<&str>) -> String {
        let mut header = vec!["instance".to_string(), "class".to_string()];
        header.extend(self.features.iter().cloned());
        let mut records = vec![header];
        for (i, p) in self.phi.iter().enumerate() {
            for (c, class) in self.classes.iter().enumerate() {
                let mut r = vec![i.to_string(), class.clone()];
                r.extend(p[c].iter().map(|v| format!("{v:?}")));
                records.push(r);
            }
        }
        write_csv(comment, &records)
    }
}

/// Per-class mean absolute attribution per feature.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanAbsShap {
    pub features: Vec<String>,
    pub classes: Vec<String>,
    /// `values[class][feature]`.
    pub values: Vec<Vec<f64>>,
}

impl MeanAbsShap {
    /// Feature indices from most to least important for `class`; ties keep feature order.
    pub fn ranking(&self, class: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.features.len()).collect();
        idx.sort_by(|&a, &b| self.values[class][b].total_cmp(&self.values[class][a]));
        idx
    }

    /// Value for a class and feature by name.
    pub fn get(&self, class: &str, feature: &str) -> Option<f64> {
        let c = self.classes.iter().position(|x| x == class)?;
        let f = self.features.iter().position(|x| x == feature)?;
        Some(self.values[c][f])
    }

    /// Ranked rows `class,rank,feature,mean_abs_shap`.
    pub fn to_csv(&self, comment: Option<&str>) -> String {
        let mut records = vec![vec![
            "class".to_string(),
            "rank".to_string(),
            "feature".to_string(),
            "mean_abs_shap".to_string(),
        ]];
        for (c, class) in self.classes.iter().enumerate() {
            for (rank, j) in self.ranking(c).into_iter().enumerate() {
                records.push(vec![
                    class.clone(),
                    (rank + 1).to_string(),
                    self.features[j].clone(),
                    format!("{:?}", self.values[c][j]),
                ]);
            }
        }
        write_csv(comment, &records)
    }

    /// Parses the output of [`MeanAbsShap::to_csv`].
    pub fn from_csv(text: &str) -> std::result::Result<Self, String> {
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let mut classes: Vec<String> = Vec::new();
        let mut features: Vec<String> = Vec::new();
        let mut entries = Vec::new();
        for rec in reader.records() {
            let rec = rec.map_err(|e| e.to_string())?;
            if rec.len() != 4 {
                return Err(format!("expected 4 fields, found {}", rec.len()));
            }
            let value: f64 = rec[3].parse().map_err(|_| format!("bad value `{}`", &rec[3]))?;
            if !classes.iter().any(|c| c == &rec[0]) {
                classes.push(rec[0].to_string());
            }
            if !features.iter().any(|f| f == &rec[2]) {
                features.push(rec[2].to_string());
            }
            entries.push((rec[0].to_string(), rec[2].to_string(), value));
        }
        features.sort();
        let mut values = vec![vec![f64::NAN; features.len()]; classes.len()];
        for (c, f, v) in entries {
            let ci = classes.iter().position(|x| *x == c).expect("collected");
            let fi = features.iter().position(|x| *x == f).expect("collected");
            values[ci][fi] = v;
        }
        if values.iter().flatten().any(|v| v.is_nan()) {
            return Err("every class must list every feature".into());
        }
        Ok(MeanAbsShap {
            features,
            classes,
            values,
        })
    }
}

fn write_csv(comment: Option<&str>, records: &[Vec<String>]) -> String {
    let mut out = Vec::new();
    if let Some(c) = comment {
        out.extend_from_slice(format!("# {c}\n").as_bytes());
    }
    {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(&mut out);
        for r in records {
            w.write_record(r).expect("in-memory write");
        }
        w.flush().expect("in-memory write");
    }
    String::from_utf8(out).expect("CSV is UTF-8")
}

/// Attributions of every row in `instances` against `background`.
pub fn explain_rows(
    model: &dyn Classifier,
    features: &[String],
    classes: &[String],
    instances: &[Vec<f64>],
    background: &Background,
) -> Result<ShapReport> {
    let mut phi = Vec::with_capacity(instances.len());
    let mut outputs = Vec::with_capacity(instances.len());
    let mut base_values = masked_outputs(model, &vec![0.0; model.n_features()], 0, background);
    for x in instances {
        let (p, base) = exact_shap_all(model, x, background)?;
        phi.push(p);
        outputs.push(model.predict_proba(x));
        base_values = base;
    }
    Ok(ShapReport {
        features: features.to_vec(),
        classes: classes.to_vec(),
        base_values,
        phi,
        outputs,
    })
}

/// Shapley report for an MLP over the rows of `data`.
pub fn explain_model(model: &MlpModel, data: &CodedDataset, background: &CodedDataset) -> Result<ShapReport> {
    let bg = Background::from_dataset(background, &model.features)?;
    let rows = feature_rows(data, &model.features)?;
    explain_rows(model, &model.features, &model.class_labels, &rows, &bg)
}

/// Per-class mean `|phi|` of an MLP over the rows of `data`.
pub fn mean_abs_shap(model: &MlpModel, data: &CodedDataset, background: &CodedDataset) -> Result<MeanAbsShap> {
    Ok(explain_model(model, data, background)?.mean_abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn additive() -> FnClassifier<impl Fn(&[f64]) -> Vec<f64> + Sync> {
        FnClassifier {
            n_features: 2,
            n_classes: 1,
            f: |x: &[f64]| vec![x[0] + x[1]],
        }
    }

    fn binomial(n: usize, k: usize) -> f64 {
        (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
    }

    #[test]
    fn weight_examples() {
        assert_eq!(shapley_weight(0, 1).unwrap(), 1.0);
        assert_eq!(shapley_weight(0, 2).unwrap(), 0.5);
        assert!((shapley_weight(1, 3).unwrap() - 1.0 / 6.0).abs() < 1e-15);
        assert!(shapley_weight(2, 2).is_err());
        assert!(shapley_weight(0, 0).is_err());
    }

    #[test]
    fn weight_completeness() {
        for f in 1..=MAX_FEATURES {
            let total: f64 = (0..f).map(|s| binomial(f - 1, s) * shapley_weight(s, f).unwrap()).sum();
            assert!((total - 1.0).abs() <= 1e-12, "f = {f}: {total}");
        }
    }

    #[test]
    fn coalition_value_extremes() {
        let model = additive();
        let bg = Background::new(&[vec![1.0, 2.0], vec![3.0, 6.0]]).unwrap();
        let x = [5.0, 7.0];
        assert_eq!(coalition_value(&model, &x, &[0, 1], &bg, 0).unwrap(), 12.0);
        assert_eq!(coalition_value(&model, &x, &[], &bg, 0).unwrap(), 6.0);
        assert!(matches!(Background::new(&[]), Err(ExplainError::EmptyBackground)));
    }

    #[test]
    fn additive_closed_form() {
        let model = additive();
        let rows = vec![vec![1.0, 2.0], vec![3.0, 6.0], vec![2.0, 1.0]];
        let bg = Background::new(&rows).unwrap();
        let (m1, m2) = (2.0, 3.0);
        let x = [5.0, -1.0];
        let phi = exact_shap(&model, &x, &bg, 0).unwrap();
        assert!((phi[0] - (x[0] - m1)).abs() <= 1e-9);
        assert!((phi[1] - (x[1] - m2)).abs() <= 1e-9);
    }

    #[test]
    fn single_feature_gets_everything() {
        let model = FnClassifier {
            n_features: 1,
            n_classes: 1,
            f: |x: &[f64]| vec![x[0] * x[0]],
        };
        let bg = Background::new(&[vec![1.0], vec![2.0], vec![4.0]]).unwrap();
        let phi = exact_shap(&model, &[3.0], &bg, 0).unwrap();
        assert!((phi[0] - (9.0 - 7.0)).abs() < 1e-12);
    }

    #[test]
    fn ignored_feature_has_no_influence() {
        let model = FnClassifier {
            n_features: 3,
            n_classes: 2,
            f: |x: &[f64]| {
                let p = 1.0 / (1.0 + (-(x[0] * x[2] - 1.0)).exp());
                vec![p, 1.0 - p]
            },
        };
        let bg = Background::new(&[vec![0.0, 1.0, 2.0], vec![1.0, 5.0, 0.0], vec![2.0, 3.0, 1.0]]).unwrap();
        let x = [1.5, 9.0, -0.5];
        for mask in 0..8usize {
            let s: Vec<usize> = (0..3).filter(|j| mask >> j & 1 == 1 && *j != 1).collect();
            let mut with = s.clone();
            with.push(1);
            assert_eq!(
                coalition_value(&model, &x, &s, &bg, 0).unwrap(),
                coalition_value(&model, &x, &with, &bg, 0).unwrap()
            );
        }
        let phi = exact_shap(&model, &x, &bg, 1).unwrap();
        assert!(phi[1].abs() <= 1e-12);
    }

    #[test]
    fn errors() {
        let model = additive();
        let bg = Background::new(&[vec![1.0, 2.0]]).unwrap();
        assert!(matches!(exact_shap(&model, &[1.0], &bg, 0), Err(ExplainError::Width { .. })));
        assert!(matches!(exact_shap(&model, &[1.0, 2.0], &bg, 3), Err(ExplainError::Class(3))));
        let wide = FnClassifier {
            n_features: 16,
            n_classes: 1,
            f: |_: &[f64]| vec![1.0],
        };
        let bg16 = Background::new(&[vec![0.0; 16]]).unwrap();
        assert!(matches!(
            exact_shap(&wide, &[0.0; 16], &bg16, 0),
            Err(ExplainError::TooManyFeatures(16))
        ));
    }

    #[test]
    fn dummy_ranks_last_and_csv_shape() {
        let report = ShapReport {
            features: vec!["a".into(), "b".into(), "dummy".into()],
            classes: vec!["Car".into(), "Walk".into()],
            base_values: vec![0.5, 0.5],
            phi: vec![vec![vec![0.2, -0.3, 0.0], vec![-0.2, 0.3, 0.0]]],
            outputs: vec![vec![0.4, 0.6]],
        };
        let agg = report.mean_abs();
        assert_eq!(agg.values[0], vec![0.2, 0.3, 0.0]);
        assert_eq!(agg.ranking(0), vec![1, 0, 2]);
        let csv = agg.to_csv(Some("prov"));
        assert_eq!(csv.lines().filter(|l| l.starts_with("Car,")).count(), 3);
        assert!(csv.starts_with("# prov\nclass,rank,feature,mean_abs_shap\nCar,1,b,0.3\n"));
        let back = MeanAbsShap::from_csv(&csv).unwrap();
        assert_eq!(back.get("Walk", "a"), Some(0.2));
        assert!(report.efficiency_gap() < 1e-15);
    }

    #[test]
    fn background_deduplicates() {
        let bg = Background::new(&[vec![1.0], vec![2.0], vec![1.0], vec![1.0]]).unwrap();
        assert_eq!(bg.n_distinct(), 2);
        assert_eq!(bg.weights, vec![0.75, 0.25]);
    }

    fn model_strategy() -> impl Strategy<Value = (Vec<f64>, Vec<Vec<f64>>, Vec<f64>)> {
        (
            proptest::collection::vec(-2.0f64..2.0, 4),
            proptest::collection::vec(proptest::collection::vec(0.0f64..4.0, 4), 1..6),
            proptest::collection::vec(0.0f64..4.0, 4),
        )
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn efficiency_and_symmetry((w, bg_rows, x) in model_strategy()) {
            // Features 0 and 1 enter symmetrically; feature 3 is ignored.
            let model = FnClassifier {
                n_features: 4,
                n_classes: 2,
                f: move |v: &[f64]| {
                    let z = w[0] * (v[0] + v[1]) + w[2] * v[2] + w[0] * v[0] * v[1] * w[1];
                    let p = 1.0 / (1.0 + (-z).exp());
                    vec![p, 1.0 - p]
                },
            };
            let bg = Background::new(&bg_rows).unwrap();
            let sym_x = vec![x[0], x[0], x[2], x[3]];
            let (phi, base) = exact_shap_all(&model, &sym_x, &bg).unwrap();
            let out = model.predict_proba(&sym_x);
            for c in 0..2 {
                let total: f64 = phi[c].iter().sum::<f64>() + base[c];
                prop_assert!((total - out[c]).abs() <= 1e-6);
                prop_assert!(phi[c][3].abs() <= 1e-12);
            }
            let swapped: Vec<Vec<f64>> = bg_rows.iter().map(|r| vec![r[1], r[0], r[2], r[3]]).collect();
            let mut both = bg_rows.clone();
            both.extend(swapped);
            let sym_bg = Background::new(&both).unwrap();
            let (phi, _) = exact_shap_all(&model, &sym_x, &sym_bg).unwrap();
            for c in 0..2 {
                prop_assert!((phi[c][0] - phi[c][1]).abs() <= 1e-9);
            }
        }
    }
}
