//! Double machine learning estimates of average treatment effects.
//!
//! Outcome and treatment are each residualized against the adjustment set
//! with gradient-boosted regression trees under K-fold cross-fitting, and the
//! pooled outcome residuals are regressed on the pooled treatment residuals
//! with a one-coefficient lasso.

use std::collections::{BTreeSet, HashMap};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::CodedDataset;
use crate::graph::MixedGraph;

#[derive(Debug, Error)]
pub enum EffectsError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("empty input")]
    Empty,
    #[error("length mismatch: {0} values against {1}")]
    Length(usize, usize),
    #[error("regressor is constant")]
    ConstantRegressor,
    #[error("treatment `{0}` has no variation left to identify an effect")]
    ConstantTreatment(String),
    #[error("need at least {needed} rows for {folds} folds, got {rows}")]
    TooFewRows { rows: usize, folds: usize, needed: usize },
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("`{0}` appears as treatment, outcome or covariate more than once")]
    Overlap(String),
    #[error("undirected edge `{0}` -- `{1}` leaves the adjustment set ambiguous")]
    Undirected(String, String),
    #[error("graph has a directed cycle through {0:?}")]
    Cycle(Vec<String>),
    #[error("malformed effects table: {0}")]
    Parse(String),
}

pub type Result<T, E = EffectsError> = std::result::Result<T, E>;

/// Settings for [`dml_ate`] and its nuisance learners.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DmlConfig {
    pub n_folds: usize,
    pub gb_stages: usize,
    pub gb_depth: usize,
    pub gb_rate: f64,
    pub lasso_lambda: f64,
    pub seed: u64,
}

impl Default for DmlConfig {
    fn default() -> Self {
        DmlConfig {
            n_folds: 2,
            gb_stages: 100,
            gb_depth: 3,
            gb_rate: 0.1,
            lasso_lambda: 1e-3,
            seed: 0,
        }
    }
}

impl DmlConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(EffectsError::Config(m.to_string()));
        if self.n_folds < 2 {
            return fail("n_folds must be at least 2");
        }
        if self.gb_stages < 1 {
            return fail("gb_stages must be at least 1");
        }
        if self.gb_depth < 1 {
            return fail("gb_depth must be at least 1");
        }
        if !(self.gb_rate > 0.0 && self.gb_rate <= 1.0) {
            return fail("gb_rate must lie in (0, 1]");
        }
        if !(self.lasso_lambda >= 0.0 && self.lasso_lambda.is_finite()) {
            return fail("lasso_lambda must be a nonnegative number");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
enum TreeNode {
    Leaf(f64),
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
struct Tree {
    nodes: Vec<TreeNode>,
}

impl Tree {
    fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                TreeNode::Leaf(v) => return v,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[feature] <= threshold { left } else { right },
            }
        }
    }
}

/// Distinct feature vectors with their row counts.
///
/// Rows sharing a feature vector always land in the same leaf, so fitting on
/// groups with per-group counts and residual sums is exactly row-level fitting.
struct Groups {
    points: Vec<Vec<f64>>,
    counts: Vec<f64>,
    y_sums: Vec<f64>,
}

impl Groups {
    fn new(x: &[Vec<f64>], y: &[f64]) -> Groups {
        let mut index: HashMap<Vec<u64>, usize> = HashMap::new();
        let mut groups = Groups {
            points: Vec::new(),
            counts: Vec::new(),
            y_sums: Vec::new(),
        };
        for (row, &target) in x.iter().zip(y) {
            let key: Vec<u64> = row.iter().map(|v| v.to_bits()).collect();
            let g = *index.entry(key).or_insert_with(|| {
                groups.points.push(row.clone());
                groups.counts.push(0.0);
                groups.y_sums.push(0.0);
                groups.points.len() - 1
            });
            groups.counts[g] += 1.0;
            groups.y_sums[g] += target;
        }
        groups
    }
}

/// Squared-loss gradient boosting with depth-limited regression trees.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientBoost {
    base: f64,
    rate: f64,
    trees: Vec<Tree>,
}

impl GradientBoost {
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.base + self.rate * self.trees.iter().map(|t| t.predict(x)).sum::<f64>()
    }

    pub fn n_stages(&self) -> usize {
        self.trees.len()
    }
}

/// Fits a regression tree to per-group residual sums.
fn fit_tree(
    points: &[Vec<f64>],
    counts: &[f64],
    residual_sums: &[f64],
    members: Vec<usize>,
    depth: usize,
    nodes: &mut Vec<TreeNode>,
) -> usize {
    let n: f64 = members.iter().map(|&g| counts[g]).sum();
    let s: f64 = members.iter().map(|&g| residual_sums[g]).sum();
    let id = nodes.len();
    nodes.push(TreeNode::Leaf(s / n));
    if depth == 0 || members.len() < 2 {
        return id;
    }

    let parent_score = s * s / n;
    let mut best: Option<(f64, usize, f64)> = None;
    let n_features = points[members[0]].len();
    for f in 0..n_features {
        let mut sorted = members.clone();
        sorted.sort_by(|&a, &b| points[a][f].total_cmp(&points[b][f]));
        let (mut nl, mut sl) = (0.0, 0.0);
        for w in 0..sorted.len() - 1 {
            let g = sorted[w];
            nl += counts[g];
            sl += residual_sums[g];
            let (here, next) = (points[g][f], points[sorted[w + 1]][f]);
            if here == next {
                continue;
            }
            let (nr, sr) = (n - nl, s - sl);
            let gain = sl * sl / nl + sr * sr / nr - parent_score;
            if gain > 1e-12 && best.is_none_or(|(b, _, _)| gain > b) {
                best = Some((gain, f, 0.5 * (here + next)));
            }
        }
    }
    let Some((_, feature, threshold)) = best else {
        return id;
    };
    let (left_members, right_members): (Vec<usize>, Vec<usize>) =
        members.iter().partition(|&&g| points[g][feature] <= threshold);
    let left = fit_tree(points, counts, residual_sums, left_members, depth - 1, nodes);
    let right = fit_tree(points, counts, residual_sums, right_members, depth - 1, nodes);
    nodes[id] = TreeNode::Split {
        feature,
        threshold,
        left,
        right,
    };
    id
}

/// Stagewise boosting: base mean plus `gb_stages` shrunken trees fit to residuals.
pub fn gradient_boost_fit(x: &[Vec<f64>], y: &[f64], config: &DmlConfig) -> Result<GradientBoost> {
    config.validate()?;
    if x.is_empty() {
        return Err(EffectsError::Empty);
    }
    if x.len() != y.len() {
        return Err(EffectsError::Length(x.len(), y.len()));
    }
    let n = y.len() as f64;
    let base = y.iter().sum::<f64>() / n;
    let groups = Groups::new(x, y);
    let mut fitted = vec![0.0; groups.points.len()];
    let mut trees = Vec::with_capacity(config.gb_stages);
    for _ in 0..config.gb_stages {
        let residual_sums: Vec<f64> = (0..fitted.len())
            .map(|g| groups.y_sums[g] - groups.counts[g] * (base + config.gb_rate * fitted[g]))
            .collect();
        let mut nodes = Vec::new();
        fit_tree(
            &groups.points,
            &groups.counts,
            &residual_sums,
            (0..fitted.len()).collect(),
            config.gb_depth,
            &mut nodes,
        );
        let tree = Tree { nodes };
        for (g, f) in fitted.iter_mut().enumerate() {
            *f += tree.predict(&groups.points[g]);
        }
        trees.push(tree);
    }
    Ok(GradientBoost {
        base,
        rate: config.gb_rate,
        trees,
    })
}

/// Minimizer of `sum (y - b x)^2 / (2n) + lambda |b|` over `b`.
pub fn lasso_fit(x: &[f64], y: &[f64], lambda: f64) -> Result<f64> {
    if x.len() != y.len() {
        return Err(EffectsError::Length(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(EffectsError::Empty);
    }
    if !(lambda >= 0.0) {
        return Err(EffectsError::Config("lambda must be nonnegative".into()));
    }
    if x.iter().all(|&v| v == x[0]) {
        return Err(EffectsError::ConstantRegressor);
    }
    let n = x.len() as f64;
    let sxx = x.iter().map(|v| v * v).sum::<f64>() / n;
    let sxy = x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>() / n;
    if sxx == 0.0 {
        return Err(EffectsError::ConstantRegressor);
    }
    let shrunk = sxy.signum() * (sxy.abs() - lambda).max(0.0);
    Ok(shrunk / sxx)
}

fn column_of(data: &CodedDataset, name: &str) -> Result<usize> {
    data.column_index(name)
        .ok_or_else(|| EffectsError::UnknownVariable(name.to_string()))
}

/// Fold of every row: rows are put in a canonical order by content, the
/// canonical positions are shuffled with the seed, and position `p` in the
/// shuffle goes to fold `p mod K`.
fn fold_assignment(data: &CodedDataset, columns: &[usize], folds: usize, seed: u64) -> Vec<usize> {
    let n = data.n_rows();
    let mut canonical: Vec<usize> = (0..n).collect();
    canonical.sort_by(|&a, &b| {
        columns
            .iter()
            .map(|&c| data.value(a, c))
            .cmp(columns.iter().map(|&c| data.value(b, c)))
    });
    let mut shuffled: Vec<usize> = (0..n).collect();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut fold = vec![0; n];
    for (p, &pos) in shuffled.iter().enumerate() {
        fold[canonical[pos]] = p % folds;
    }
    fold
}

fn root_mean_square(v: &[f64]) -> f64 {
    (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt()
}

/// Cross-fitted residuals of `target` given covariates `x`.
fn cross_fit_residuals(
    x: &[Vec<f64>],
    target: &[f64],
    fold: &[usize],
    config: &DmlConfig,
) -> Result<Vec<f64>> {
    let mut residuals = vec![0.0; target.len()];
    for k in 0..config.n_folds {
        let train: Vec<usize> = (0..target.len()).filter(|&i| fold[i] != k).collect();
        let test: Vec<usize> = (0..target.len()).filter(|&i| fold[i] == k).collect();
        if x.first().is_none_or(|row| row.is_empty()) {
            let mean = train.iter().map(|&i| target[i]).sum::<f64>() / train.len() as f64;
            for &i in &test {
                residuals[i] = target[i] - mean;
            }
        } else {
            let tx: Vec<Vec<f64>> = train.iter().map(|&i| x[i].clone()).collect();
            let ty: Vec<f64> = train.iter().map(|&i| target[i]).collect();
            let model = gradient_boost_fit(&tx, &ty, config)?;
            for &i in &test {
                residuals[i] = target[i] - model.predict(&x[i]);
            }
        }
    }
    Ok(residuals)
}

/// Cross-fitted double machine learning estimate of the effect of a one-code
/// increase of `treatment` on `outcome`, adjusting for `z`.
pub fn dml_ate(
    data: &CodedDataset,
    treatment: &str,
    outcome: &str,
    z: &[&str],
    config: &DmlConfig,
) -> Result<f64> {
    config.validate()?;
    let t = column_of(data, treatment)?;
    let o = column_of(data, outcome)?;
    let zc: Vec<usize> = z.iter().map(|name| column_of(data, name)).collect::<Result<_>>()?;
    let mut seen = BTreeSet::new();
    for (&c, name) in [t, o].iter().chain(&zc).zip([treatment, outcome].into_iter().chain(z.iter().copied())) {
        if !seen.insert(c) {
            return Err(EffectsError::Overlap(name.to_string()));
        }
    }
    let n = data.n_rows();
    let needed = 10 * config.n_folds;
    if n < needed {
        return Err(EffectsError::TooFewRows {
            rows: n,
            folds: config.n_folds,
            needed,
        });
    }
    let tv: Vec<f64> = data.column_f64(t);
    if tv.iter().all(|&v| v == tv[0]) {
        return Err(EffectsError::ConstantTreatment(treatment.to_string()));
    }
    let ov: Vec<f64> = data.column_f64(o);
    let x = data.feature_matrix(&zc);

    let mut canonical_cols = zc.clone();
    canonical_cols.extend([t, o]);
    let fold = fold_assignment(data, &canonical_cols, config.n_folds, config.seed);

    let rt = cross_fit_residuals(&x, &tv, &fold, config)?;
    let ro = cross_fit_residuals(&x, &ov, &fold, config)?;
    let st = root_mean_square(&rt);
    if st < 1e-12 {
        return Err(EffectsError::ConstantTreatment(treatment.to_string()));
    }
    let so = root_mean_square(&ro);
    if so == 0.0 {
        return Ok(0.0);
    }
    let xs: Vec<f64> = rt.iter().map(|v| v / st).collect();
    let ys: Vec<f64> = ro.iter().map(|v| v / so).collect();
    let slope = lasso_fit(&xs, &ys, config.lasso_lambda)
        .map_err(|_| EffectsError::ConstantTreatment(treatment.to_string()))?;
    Ok(slope * so / st)
}

/// Parents of `treatment`; any undirected edge at the treatment is an error.
pub fn adjustment_set(g: &MixedGraph, treatment: &str, outcome: &str) -> Result<BTreeSet<String>> {
    let t = g
        .index_of(treatment)
        .ok_or_else(|| EffectsError::UnknownVariable(treatment.to_string()))?;
    let o = g
        .index_of(outcome)
        .ok_or_else(|| EffectsError::UnknownVariable(outcome.to_string()))?;
    if t == o {
        return Err(EffectsError::Overlap(treatment.to_string()));
    }
    if let Some(cycle) = g.find_cycle() {
        return Err(EffectsError::Cycle(cycle.iter().map(|&v| g.name(v).to_string()).collect()));
    }
    if let Some(&u) = g.undirected_neighbors(t).first() {
        return Err(EffectsError::Undirected(treatment.to_string(), g.name(u).to_string()));
    }
    Ok(g.parents(t).into_iter().map(|p| g.name(p).to_string()).collect())
}

/// Cause-by-effect matrix of total effects; the diagonal is `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectsTable {
    names: Vec<String>,
    values: Vec<Vec<Option<f64>>>,
}

impl EffectsTable {
    pub fn new(names: Vec<String>, values: Vec<Vec<Option<f64>>>) -> Result<Self> {
        if values.len() != names.len() || values.iter().any(|r| r.len() != names.len()) {
            return Err(EffectsError::Length(values.len(), names.len()));
        }
        Ok(EffectsTable { names, values })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn values(&self) -> &[Vec<Option<f64>>] {
        &self.values
    }

    /// Entry for `(cause, effect)`, `None` for unknown names or the diagonal.
    pub fn get(&self, cause: &str, effect: &str) -> Option<f64> {
        let c = self.names.iter().position(|n| n == cause)?;
        let e = self.names.iter().position(|n| n == effect)?;
        self.values[c][e]
    }

    /// CSV with one row per cause; `decimals = None` writes full precision.
    pub fn to_csv(&self, decimals: Option<usize>, comment: Option<&str>) -> String {
        let mut out = Vec::new();
        if let Some(c) = comment {
            out.extend_from_slice(format!("# {c}\n").as_bytes());
        }
        {
            let mut w = csv::WriterBuilder::new()
                .terminator(csv::Terminator::Any(b'\n'))
                .from_writer(&mut out);
            let mut header = vec!["cause".to_string()];
            header.extend(self.names.iter().cloned());
            w.write_record(&header).expect("in-memory write");
            for (name, row) in self.names.iter().zip(&self.values) {
                let mut record = vec![name.clone()];
                record.extend(row.iter().map(|v| match v {
                    None => String::new(),
                    Some(x) => format_effect(*x, decimals),
                }));
                w.write_record(&record).expect("in-memory write");
            }
            w.flush().expect("in-memory write");
        }
        String::from_utf8(out).expect("CSV is UTF-8")
    }
}

impl EffectsTable {
    /// Parses the output of [`EffectsTable::to_csv`]; blank cells become `None`.
    pub fn from_csv(text: &str) -> Result<Self> {
        let parse = |m: String| EffectsError::Parse(m);
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let header = reader.headers().map_err(|e| parse(e.to_string()))?.clone();
        if header.get(0) != Some("cause") {
            return Err(parse("first column must be `cause`".into()));
        }
        let names: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
        let mut values = Vec::with_capacity(names.len());
        for (i, rec) in reader.records().enumerate() {
            let rec = rec.map_err(|e| parse(e.to_string()))?;
            if names.get(i).map(String::as_str) != rec.get(0) {
                return Err(parse(format!("row {} does not match column order", i + 1)));
            }
            let row = rec
                .iter()
                .skip(1)
                .map(|cell| match cell.trim() {
                    "" => Ok(None),
                    v => v.parse::<f64>().map(Some).map_err(|_| parse(format!("bad value `{v}`"))),
                })
                .collect::<Result<Vec<_>>>()?;
            values.push(row);
        }
        EffectsTable::new(names, values)
    }
}

fn format_effect(x: f64, decimals: Option<usize>) -> String {
    match decimals {
        Some(d) => {
            let s = format!("{x:.d$}");
            if s.starts_with('-') && s[1..].chars().all(|c| c == '0' || c == '.') {
                s[1..].to_string()
            } else {
                s
            }
        }
        None => format!("{x:?}"),
    }
}

/// Total effect of every node on every other node of `g`.
///
/// Pairs without a directed path are exactly 0.0; the rest are [`dml_ate`]
/// estimates adjusting for the parents of the cause.
pub fn total_effects_table(g: &MixedGraph, data: &CodedDataset, config: &DmlConfig) -> Result<EffectsTable> {
    config.validate()?;
    if let Some(cycle) = g.find_cycle() {
        return Err(EffectsError::Cycle(cycle.iter().map(|&v| g.name(v).to_string()).collect()));
    }
    if let Some(&(a, b)) = g.undirected_edges().first() {
        return Err(EffectsError::Undirected(g.name(a).to_string(), g.name(b).to_string()));
    }
    for name in g.names() {
        column_of(data, name)?;
    }
    let n = g.n_nodes();
    let cells: Vec<(usize, usize)> = (0..n).flat_map(|a| (0..n).map(move |b| (a, b))).collect();
    let values = cells
        .par_iter()
        .map(|&(c, e)| -> Result<Option<f64>> {
            if c == e {
                return Ok(None);
            }
            if !g.has_directed_path(c, e) {
                return Ok(Some(0.0));
            }
            let z = adjustment_set(g, g.name(c), g.name(e))?;
            let z: Vec<&str> = z.iter().map(String::as_str).collect();
            dml_ate(data, g.name(c), g.name(e), &z, config).map(Some)
        })
        .collect::<Result<Vec<_>>>()?;
    EffectsTable::new(
        g.names().to_vec(),
        values.chunks(n).map(<[_]>::to_vec).collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Variable;
    use crate::scm_oracle::preset;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn table_csv_round_trip() {
        let table = EffectsTable::new(
            vec!["a".into(), "b, c".into()],
            vec![vec![None, Some(0.1 + 0.2)], vec![Some(-0.0), None]],
        )
        .unwrap();
        let back = EffectsTable::from_csv(&table.to_csv(None, Some("prov"))).unwrap();
        assert_eq!(back.get("a", "b, c"), Some(0.1 + 0.2));
        assert_eq!(back.get("b, c", "a"), Some(0.0));
        assert!(EffectsTable::from_csv("x,a\na,\n").is_err());
    }

    fn xy_dataset(rows: Vec<Vec<i32>>, names: &[(&str, i32, i32)]) -> CodedDataset {
        CodedDataset::new(
            names.iter().map(|&(n, lo, hi)| Variable::with_codes(n, lo, hi)).collect(),
            rows,
        )
        .unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(DmlConfig::default().validate().is_ok());
        for bad in [
            DmlConfig { n_folds: 1, ..DmlConfig::default() },
            DmlConfig { gb_stages: 0, ..DmlConfig::default() },
            DmlConfig { gb_depth: 0, ..DmlConfig::default() },
            DmlConfig { gb_rate: 0.0, ..DmlConfig::default() },
            DmlConfig { gb_rate: 1.5, ..DmlConfig::default() },
            DmlConfig { lasso_lambda: -1.0, ..DmlConfig::default() },
        ] {
            assert!(bad.validate().is_err(), "{bad:?}");
        }
        let zero = DmlConfig { gb_stages: 0, ..DmlConfig::default() };
        assert!(gradient_boost_fit(&[vec![1.0]], &[1.0], &zero).is_err());
    }

    #[test]
    fn boosting_constant_target() {
        let x: Vec<Vec<f64>> = (0..50).map(|i| vec![f64::from(i % 7), f64::from(i % 3)]).collect();
        let y = vec![4.25; 50];
        let model = gradient_boost_fit(&x, &y, &DmlConfig::default()).unwrap();
        for row in &x {
            assert_eq!(model.predict(row), 4.25);
        }
        assert_eq!(model.predict(&[100.0, -3.0]), 4.25);
    }

    #[test]
    fn boosting_fits_identity() {
        let x: Vec<Vec<f64>> = (0..100).map(|i| vec![f64::from(i)]).collect();
        let y: Vec<f64> = (0..100).map(f64::from).collect();
        let model = gradient_boost_fit(&x, &y, &DmlConfig::default()).unwrap();
        let mean = 49.5;
        let std = (y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 100.0).sqrt();
        let rmse = (x
            .iter()
            .zip(&y)
            .map(|(r, t)| (model.predict(r) - t).powi(2))
            .sum::<f64>()
            / 100.0)
            .sqrt();
        assert!(rmse < 0.1 * std, "rmse {rmse} std {std}");
        assert_eq!(model.n_stages(), 100);
    }

    #[test]
    fn boosting_on_groups_equals_duplicated_rows() {
        // Duplicating every row leaves all split gains and leaf means unchanged.
        let x: Vec<Vec<f64>> = (0..40).map(|i| vec![f64::from(i % 5), f64::from(i % 4)]).collect();
        let y: Vec<f64> = (0..40).map(|i| f64::from((i * 7) % 11)).collect();
        let cfg = DmlConfig { gb_stages: 20, ..DmlConfig::default() };
        let a = gradient_boost_fit(&x, &y, &cfg).unwrap();
        let x2: Vec<Vec<f64>> = x.iter().chain(&x).cloned().collect();
        let y2: Vec<f64> = y.iter().chain(&y).copied().collect();
        let b = gradient_boost_fit(&x2, &y2, &cfg).unwrap();
        for row in &x {
            assert!((a.predict(row) - b.predict(row)).abs() < 1e-9);
        }
    }

    #[test]
    fn lasso_examples() {
        let x = [1.0, -2.0, 3.0, 0.5];
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        assert!((lasso_fit(&x, &y, 0.0).unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(lasso_fit(&x, &y, 1e6).unwrap(), 0.0);
        assert!(matches!(lasso_fit(&[1.0, 1.0], &[1.0, 2.0], 0.0), Err(EffectsError::ConstantRegressor)));
        assert!(lasso_fit(&[1.0], &[1.0], 0.0).is_err());

        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let normal = rand_distr::StandardNormal;
        let xs: Vec<f64> = (0..10_000).map(|_| rng.sample(normal)).collect();
        let ys: Vec<f64> = xs.iter().map(|v: &f64| 2.0 * v + rng.sample::<f64, _>(normal)).collect();
        let b = lasso_fit(&xs, &ys, 1e-3).unwrap();
        assert!((1.9..=2.1).contains(&b), "{b}");
    }

    #[test]
    fn soft_threshold_formula() {
        let x = [1.0, 2.0, 3.0];
        let y = [1.0, 1.0, 2.0];
        // sxx = 14/3, sxy = 9/3 = 3, lambda 0.5 -> (3 - 0.5) / (14/3)
        let b = lasso_fit(&x, &y, 0.5).unwrap();
        assert!((b - 2.5 / (14.0 / 3.0)).abs() < 1e-12);
    }

    /// `O = round-free 0.7 T + noise` on an integer grid: O takes values
    /// 0..=9 with mean 2 + 0.7 * 5 * T spread by a uniform offset.
    fn linear_data(n: usize, effect_tenths: i32, seed: u64) -> CodedDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows = (0..n)
            .map(|_| {
                let t = rng.random_range(0..=1);
                let noise = rng.random_range(0..=2);
                let o = 10 * noise + effect_tenths * t;
                vec![t, o]
            })
            .collect();
        xy_dataset(rows, &[("T", 0, 1), ("O", 0, 40)])
    }

    #[test]
    fn dml_recovers_linear_effect_without_covariates() {
        for seed in 0..10 {
            let data = linear_data(10_000, 7, seed);
            let cfg = DmlConfig { seed, ..DmlConfig::default() };
            let est = dml_ate(&data, "T", "O", &[], &cfg).unwrap() / 10.0;
            assert!((est - 0.7).abs() <= 0.05, "seed {seed}: {est}");
            let null = linear_data(10_000, 0, seed + 100);
            let est0 = dml_ate(&null, "T", "O", &[], &cfg).unwrap() / 10.0;
            assert!(est0.abs() <= 0.05, "seed {seed}: {est0}");
        }
    }

    #[test]
    fn dml_matches_oracle_on_confounded_preset() {
        let scm = preset("confounded").unwrap();
        let truth = scm.true_ate("T", "O", 1, 0).unwrap();
        let data = scm.sample(10_000, 3);
        let est = dml_ate(&data, "T", "O", &["Z"], &DmlConfig::default()).unwrap();
        assert!((est - truth).abs() <= 0.05, "{est} vs {truth}");
    }

    #[test]
    fn dml_error_cases() {
        let data = preset("confounded").unwrap().sample(100, 1);
        let cfg = DmlConfig::default();
        assert!(matches!(dml_ate(&data, "T", "O", &["T"], &cfg), Err(EffectsError::Overlap(_))));
        assert!(matches!(dml_ate(&data, "T", "Q", &[], &cfg), Err(EffectsError::UnknownVariable(_))));
        let small = data.select_rows(&(0..15).collect::<Vec<_>>());
        assert!(matches!(dml_ate(&small, "T", "O", &[], &cfg), Err(EffectsError::TooFewRows { .. })));
        let constant = xy_dataset((0..100).map(|i| vec![1, i % 2]).collect(), &[("T", 0, 1), ("O", 0, 1)]);
        assert!(matches!(
            dml_ate(&constant, "T", "O", &[], &cfg),
            Err(EffectsError::ConstantTreatment(_))
        ));
    }

    #[test]
    fn dml_is_row_order_invariant() {
        let data = preset("confounded").unwrap().sample(2000, 9);
        let mut order: Vec<usize> = (0..data.n_rows()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(4));
        let shuffled = data.select_rows(&order);
        let cfg = DmlConfig::default();
        let a = dml_ate(&data, "T", "O", &["Z"], &cfg).unwrap();
        let b = dml_ate(&shuffled, "T", "O", &["Z"], &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn dml_error_shrinks_with_sample_size() {
        let scm = preset("confounded").unwrap();
        let truth = scm.true_ate("T", "O", 1, 0).unwrap();
        let cfg = DmlConfig::default();
        let better = (0..10u64)
            .filter(|&seed| {
                let small = scm.sample(2500, 1000 + seed);
                let large = scm.sample(40_000, 2000 + seed);
                let e_small = (dml_ate(&small, "T", "O", &["Z"], &cfg).unwrap() - truth).abs();
                let e_large = (dml_ate(&large, "T", "O", &["Z"], &cfg).unwrap() - truth).abs();
                e_large <= e_small
            })
            .count();
        assert!(better >= 8, "{better} of 10");
    }

    #[test]
    fn adjustment_examples() {
        let g = MixedGraph::from_edges(&["Z", "T", "O"], &[("Z", "T"), ("Z", "O"), ("T", "O")], &[]).unwrap();
        let z = adjustment_set(&g, "T", "O").unwrap();
        assert_eq!(z.into_iter().collect::<Vec<_>>(), vec!["Z".to_string()]);
        assert!(adjustment_set(&g, "Z", "O").unwrap().is_empty());

        let north = preset("northlike").unwrap();
        let z = adjustment_set(north.dag(), "hhveh_x", "Car").unwrap();
        assert_eq!(z.into_iter().collect::<Vec<_>>(), vec!["hhsize_x".to_string()]);

        let mixed = MixedGraph::from_edges(&["A", "B", "C"], &[("B", "C")], &[("A", "B")]).unwrap();
        assert!(matches!(adjustment_set(&mixed, "B", "C"), Err(EffectsError::Undirected(_, _))));
    }

    #[test]
    fn two_node_table_matches_oracle() {
        let scm = preset("pair").unwrap();
        let data = scm.sample(10_000, 21);
        let table = total_effects_table(scm.dag(), &data, &DmlConfig::default()).unwrap();
        let truth = scm.true_ate("T", "O", 1, 0).unwrap();
        assert!((table.get("T", "O").unwrap() - truth).abs() <= 0.05);
        assert_eq!(table.get("O", "T"), Some(0.0));
        assert_eq!(table.get("T", "T"), None);
    }

    #[test]
    fn table_rejects_undirected_and_cycles() {
        let data = preset("chain").unwrap().sample(200, 2);
        let mixed = MixedGraph::from_edges(&["A", "B", "C"], &[("B", "C")], &[("A", "B")]).unwrap();
        assert!(matches!(
            total_effects_table(&mixed, &data, &DmlConfig::default()),
            Err(EffectsError::Undirected(_, _))
        ));
        let cyc = MixedGraph::from_edges(&["A", "B", "C"], &[("A", "B"), ("B", "C"), ("C", "A")], &[]).unwrap();
        assert!(matches!(
            total_effects_table(&cyc, &data, &DmlConfig::default()),
            Err(EffectsError::Cycle(_))
        ));
    }

    #[test]
    fn csv_formatting() {
        let table = EffectsTable::new(
            vec!["a".into(), "b,c".into()],
            vec![vec![None, Some(-0.001)], vec![Some(0.416), None]],
        )
        .unwrap();
        let csv = table.to_csv(Some(2), Some("v1"));
        assert_eq!(csv, "# v1\ncause,a,\"b,c\"\na,,0.00\n\"b,c\",0.42,\n");
        let full = table.to_csv(None, None);
        assert!(full.contains("-0.001"));
        assert_eq!(format_effect(-0.3149, Some(2)), "-0.31");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn lasso_zero_penalty_is_ols(
            pts in proptest::collection::vec((-50.0f64..50.0, -50.0f64..50.0), 2..40)
        ) {
            let x: Vec<f64> = pts.iter().map(|p| p.0).collect();
            let y: Vec<f64> = pts.iter().map(|p| p.1).collect();
            prop_assume!(x.iter().any(|&v| v != x[0]));
            let ols = x.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>()
                / x.iter().map(|a| a * a).sum::<f64>();
            let b = lasso_fit(&x, &y, 0.0).unwrap();
            prop_assert!((b - ols).abs() <= 1e-12 * ols.abs().max(1.0));
        }

        #[test]
        fn boosting_constant_prediction(
            rows in proptest::collection::vec(proptest::collection::vec(0i32..5, 3), 1..30),
            c in -10.0f64..10.0,
        ) {
            let x: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|&v| f64::from(v)).collect()).collect();
            let y = vec![c; x.len()];
            let cfg = DmlConfig { gb_stages: 5, ..DmlConfig::default() };
            let model = gradient_boost_fit(&x, &y, &cfg).unwrap();
            for row in &x {
                prop_assert!((model.predict(row) - c).abs() <= 1e-12 * c.abs().max(1.0));
            }
        }

        #[test]
        fn structural_zeros_are_exact(seed in 0u64..1000) {
            let scm = preset("diamond").unwrap();
            let data = scm.sample(100, seed);
            let cfg = DmlConfig { gb_stages: 3, ..DmlConfig::default() };
            let table = total_effects_table(scm.dag(), &data, &cfg).unwrap();
            for (c, row) in table.values().iter().enumerate() {
                for (e, v) in row.iter().enumerate() {
                    if c != e && !scm.dag().has_directed_path(c, e) {
                        prop_assert_eq!(*v, Some(0.0));
                    }
                }
            }
        }
    }
}
