//! End-to-end commands: simulate, discover, effects, train-explain and compare.
//!
//! Every command is a pure function of its input files and [`RunConfig`].
//! Each output file starts with a provenance comment carrying the tool
//! version, the seed and a hash of the configuration.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::dataset::{
    clean, collapse_one_hot, load_csv, stratified_split, Codebook, CodedDataset, DatasetError, SplitSpec,
};
use crate::discovery::{discover, discovery_report, DiscoveryError, Knowledge, PcOptions};
use crate::effects::{total_effects_table, DmlConfig, EffectsError, EffectsTable};
use crate::explain::{background_sample, explain_model, ExplainError, MeanAbsShap};
use crate::graph::{GraphError, MixedGraph};
use crate::predictor::{
    class_scores, cross_validate, fit_with_protocol, predict_classes, accuracy, MlpConfig, PredictorError,
};
use crate::scm_oracle::{preset, DiscreteScm, ScmError};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Indicator columns merged into the class column when it is absent.
pub const MODE_COLUMNS: [&str; 3] = ["Car", "Public", "Walk"];

/// Mean |SHAP| above this counts as nonzero in the comparison report.
pub const SHAP_ZERO_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Scm(#[from] ScmError),
    #[error(transparent)]
    Discovery(#[from] DiscoveryError),
    #[error(transparent)]
    Effects(#[from] EffectsError),
    #[error(transparent)]
    Predictor(#[from] PredictorError),
    #[error(transparent)]
    Explain(#[from] ExplainError),
    #[error("{0}")]
    Mismatch(String),
}

impl PipelineError {
    /// Short machine-readable category for error lines.
    pub fn category(&self) -> &'static str {
        match self {
            PipelineError::Config(_) => "config",
            PipelineError::Io { .. } => "io",
            PipelineError::Dataset(_) => "dataset",
            PipelineError::Graph(_) => "graph",
            PipelineError::Scm(_) => "scm",
            PipelineError::Discovery(_) => "discovery",
            PipelineError::Effects(_) => "effects",
            PipelineError::Predictor(_) => "predictor",
            PipelineError::Explain(_) => "explain",
            PipelineError::Mismatch(_) => "mismatch",
        }
    }
}

pub type Result<T, E = PipelineError> = std::result::Result<T, E>;

/// Settings shared by all commands. Missing keys take their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// CSV to analyse; mutually exclusive with `preset`.
    pub input: Option<PathBuf>,
    /// Built-in SCM to sample from; mutually exclusive with `input`.
    pub preset: Option<String>,
    /// Rows to sample from the preset.
    pub n: Option<usize>,
    /// Defaults to `codebook.toml` next to the input, then the survey codebook.
    pub codebook: Option<PathBuf>,
    /// Defaults to the shipped survey knowledge.
    pub knowledge: Option<PathBuf>,
    /// Graph for `effects`; defaults to `graph.dot` in the output directory.
    pub graph: Option<PathBuf>,
    pub alpha: f64,
    pub max_depth: Option<usize>,
    /// Class column for train-explain; built from the mode indicators when absent.
    pub target: String,
    pub test_fraction: f64,
    pub smote_k: usize,
    /// Cross-validation folds reported by train-explain; 0 disables it.
    pub cv_folds: usize,
    pub explain_rows: usize,
    pub background_rows: usize,
    /// Overrides the seeds of `dml` and `mlp`.
    pub seed: Option<u64>,
    pub out: PathBuf,
    pub dml: DmlConfig,
    pub mlp: MlpConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            input: None,
            preset: None,
            n: None,
            codebook: None,
            knowledge: None,
            graph: None,
            alpha: 0.05,
            max_depth: None,
            target: "mode".into(),
            test_fraction: 0.2,
            smote_k: 5,
            cv_folds: 5,
            explain_rows: 200,
            background_rows: 100,
            seed: None,
            out: PathBuf::from("out"),
            dml: DmlConfig::default(),
            mlp: MlpConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        RunConfig::from_toml_str(&read_text(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// First 16 hex digits of the SHA-256 of the configuration without its output directory.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.out = PathBuf::new();
        let digest = Sha256::digest(canonical.to_toml_string().as_bytes());
        hex::encode(&digest[..8])
    }

    /// `modecause <version> seed=<seed> config=<hash>`.
    pub fn provenance(&self) -> String {
        let seed = self.seed.map_or_else(|| "none".to_string(), |s| s.to_string());
        format!("modecause {VERSION} seed={seed} config={}", self.hash())
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(PipelineError::Config(m));
        match (&self.input, &self.preset) {
            (Some(_), Some(_)) => return fail("set either an input file or a preset, not both".into()),
            (None, None) => return fail("an input file or a preset is required".into()),
            _ => {}
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return fail(format!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return fail(format!("test_fraction must lie in (0, 1), got {}", self.test_fraction));
        }
        if self.smote_k == 0 {
            return fail("smote_k must be at least 1".into());
        }
        if self.cv_folds == 1 {
            return fail("cv_folds must be 0 or at least 2".into());
        }
        if self.explain_rows == 0 || self.background_rows == 0 {
            return fail("explain_rows and background_rows must be positive".into());
        }
        self.dml.validate()?;
        self.mlp.validate()?;
        Ok(())
    }

    fn require_seed(&self, command: &str) -> Result<u64> {
        self.seed
            .ok_or_else(|| PipelineError::Config(format!("`{command}` needs a seed")))
    }

    fn path(&self, file: &str) -> PathBuf {
        self.out.join(file)
    }
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| PipelineError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn write_output(path: &Path, contents: &str) -> Result<()> {
    let io = |source| PipelineError::Io {
        path: path.display().to_string(),
        source,
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io)?;
    }
    std::fs::write(path, contents).map_err(io)
}

fn load_preset(cfg: &RunConfig) -> Result<DiscreteScm> {
    let name = cfg
        .preset
        .as_deref()
        .ok_or_else(|| PipelineError::Config("a preset is required".into()))?;
    Ok(preset(name)?)
}

fn codebook_for(cfg: &RunConfig, input: &Path) -> Result<Codebook> {
    if let Some(path) = &cfg.codebook {
        return Ok(Codebook::load(path)?);
    }
    let sibling = input.with_file_name("codebook.toml");
    if sibling.is_file() {
        return Ok(Codebook::load(&sibling)?);
    }
    Ok(Codebook::survey())
}

/// The cleaned input CSV, or a sample from the preset.
pub fn load_data(cfg: &RunConfig, command: &str) -> Result<CodedDataset> {
    cfg.validate()?;
    match &cfg.input {
        Some(path) => {
            let codebook = codebook_for(cfg, path)?;
            Ok(clean(&load_csv(path, &codebook)?, &codebook))
        }
        None => {
            let n = cfg
                .n
                .ok_or_else(|| PipelineError::Config("sampling a preset needs a row count".into()))?;
            Ok(load_preset(cfg)?.sample(n, cfg.require_seed(command)?))
        }
    }
}

fn knowledge_for(cfg: &RunConfig) -> Result<Knowledge> {
    match &cfg.knowledge {
        Some(path) => Ok(Knowledge::load(path)?),
        None => Ok(Knowledge::survey()),
    }
}

/// Writes `data.csv`, `truth.dot`, `true_effects.csv` and `codebook.toml`.
pub fn cmd_simulate(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    if cfg.input.is_some() {
        return Err(PipelineError::Config("simulate samples a preset; drop the input file".into()));
    }
    let scm = load_preset(cfg)?;
    let n = cfg
        .n
        .ok_or_else(|| PipelineError::Config("simulate needs a row count".into()))?;
    let seed = cfg.require_seed("simulate")?;
    cfg.validate()?;
    let prov = cfg.provenance();

    let data = scm.sample(n, seed);
    let mut csv = Vec::new();
    data.write_csv(&mut csv, Some(&prov))?;
    let csv = String::from_utf8(csv).expect("CSV is UTF-8");

    let names: Vec<String> = scm.names().iter().map(|s| s.to_string()).collect();
    let truth = EffectsTable::new(names, scm.true_effects()?)?;
    let codebook = Codebook::new(scm.variables().to_vec())?;

    let outputs = [
        ("data.csv", csv),
        ("truth.dot", scm.dag().to_dot(Some(&prov))),
        ("true_effects.csv", truth.to_csv(None, Some(&prov))),
        ("codebook.toml", format!("# {prov}\n{}", codebook.to_toml_string())),
    ];
    let mut written = Vec::new();
    for (file, text) in outputs {
        let path = cfg.path(file);
        write_output(&path, &text)?;
        written.push(path);
    }
    Ok(written)
}

/// Writes `graph.dot` and `discovery_report.txt`.
pub fn cmd_discover(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let data = load_data(cfg, "discover")?;
    let knowledge = knowledge_for(cfg)?;
    let options = PcOptions {
        alpha: cfg.alpha,
        max_depth: cfg.max_depth,
    };
    let found = discover(&data, &options, &knowledge)?;
    let prov = cfg.provenance();
    let graph_path = cfg.path("graph.dot");
    let report_path = cfg.path("discovery_report.txt");
    write_output(&graph_path, &found.graph.to_dot(Some(&prov)))?;
    write_output(&report_path, &discovery_report(&found, &prov))?;
    Ok(vec![graph_path, report_path])
}

/// Writes `effects.csv` (two decimals), `effects_full.csv` and `effects_meta.txt`.
pub fn cmd_effects(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let seed = cfg.require_seed("effects")?;
    let data = load_data(cfg, "effects")?;
    let graph_path = cfg.graph.clone().unwrap_or_else(|| cfg.path("graph.dot"));
    let graph = MixedGraph::from_dot(&read_text(&graph_path)?)?;
    let dml = DmlConfig {
        seed,
        ..cfg.dml.clone()
    };
    let table = total_effects_table(&graph, &data, &dml)?;
    let prov = cfg.provenance();

    let mut meta = String::new();
    let _ = writeln!(meta, "# {prov}");
    let _ = writeln!(meta, "graph: {}", graph_path.display());
    let _ = writeln!(meta, "rows: {}", data.n_rows());
    let _ = writeln!(meta, "adjustment: parents of the cause (backdoor set read off the graph)");
    let _ = writeln!(meta, "no directed path: effect reported as exactly 0");
    let _ = writeln!(meta, "estimator: double machine learning, effect per unit change of the cause");
    let _ = writeln!(
        meta,
        "settings: folds={} stages={} depth={} rate={} lambda={} seed={}",
        dml.n_folds, dml.gb_stages, dml.gb_depth, dml.gb_rate, dml.lasso_lambda, dml.seed
    );
    let _ = writeln!(meta, "[adjustment sets]");
    for name in graph.names() {
        let set = graph.parents_of(name)?;
        let members: Vec<&str> = set.iter().map(String::as_str).collect();
        let _ = writeln!(meta, "{name}: {{{}}}", members.join(", "));
    }

    let outputs = [
        ("effects.csv", table.to_csv(Some(2), Some(&prov))),
        ("effects_full.csv", table.to_csv(None, Some(&prov))),
        ("effects_meta.txt", meta),
    ];
    let mut written = Vec::new();
    for (file, text) in outputs {
        let path = cfg.path(file);
        write_output(&path, &text)?;
        written.push(path);
    }
    Ok(written)
}

/// `data` with `target` present, merging the mode indicators if needed.
pub fn with_target(data: CodedDataset, target: &str) -> Result<CodedDataset> {
    if data.column_index(target).is_some() {
        return Ok(data);
    }
    if MODE_COLUMNS.iter().all(|m| data.column_index(m).is_some()) {
        return Ok(collapse_one_hot(&data, &MODE_COLUMNS, target)?);
    }
    Err(PipelineError::Mismatch(format!(
        "no column `{target}` and no mode indicators to build it from"
    )))
}

/// Writes `metrics.txt`, `shap_mean_abs.csv`, `shap_instances.csv` and `model.toml`.
pub fn cmd_train_explain(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let seed = cfg.require_seed("train-explain")?;
    let data = with_target(load_data(cfg, "train-explain")?, &cfg.target)?;
    let target = cfg.target.as_str();
    let mlp = MlpConfig {
        seed,
        ..cfg.mlp.clone()
    };
    let spec = SplitSpec::new(
        &[("train", 1.0 - cfg.test_fraction), ("test", cfg.test_fraction)],
        target,
        seed,
    );
    let parts = stratified_split(&data, &spec)?;
    let (train, test) = (&parts[0], &parts[1]);
    let model = fit_with_protocol(train, target, cfg.smote_k, &mlp)?;

    let t = test.require_column(target)?;
    let actual: Vec<i32> = test.column(t).collect();
    let predicted = predict_classes(&model, test)?;
    let test_accuracy = accuracy(&predicted, &actual)?;
    let counts = test.class_counts(t);
    let (majority_code, majority_count) = counts
        .iter()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
        .map(|(c, n)| (*c, *n))
        .ok_or(PredictorError::Empty)?;
    let baseline = 100.0 * majority_count as f64 / actual.len() as f64;
    let cv = if cfg.cv_folds >= 2 {
        cross_validate(&data, target, cfg.cv_folds, cfg.smote_k, &mlp)?
    } else {
        Vec::new()
    };

    let background = background_sample(train, cfg.background_rows, seed);
    let explained = background_sample(test, cfg.explain_rows, seed.wrapping_add(1));
    let report = explain_model(&model, &explained, &background)?;
    let mean_abs = report.mean_abs();
    let prov = cfg.provenance();

    let label = |code: i32| {
        test.variable(t)
            .label_of(code)
            .map_or_else(|| code.to_string(), str::to_string)
    };
    let mut metrics = String::new();
    let _ = writeln!(metrics, "# {prov}");
    let _ = writeln!(
        metrics,
        "rows: total={} train={} test={}",
        data.n_rows(),
        train.n_rows(),
        test.n_rows()
    );
    let _ = writeln!(metrics, "target: {target}");
    let _ = writeln!(metrics, "features: {}", model.features.join(", "));
    let _ = writeln!(metrics, "best_epoch: {}", model.best_epoch);
    let _ = writeln!(metrics, "test_accuracy: {test_accuracy:.2}");
    let _ = writeln!(
        metrics,
        "majority_baseline: {baseline:.2} ({})",
        label(majority_code)
    );
    let _ = writeln!(metrics, "[per class] label,precision,recall,support");
    for s in class_scores(&model, &predicted, &actual)? {
        let _ = writeln!(metrics, "{},{:.4},{:.4},{}", s.label, s.precision, s.recall, s.support);
    }
    if !cv.is_empty() {
        let max = cv.iter().copied().fold(f64::MIN, f64::max);
        let min = cv.iter().copied().fold(f64::MAX, f64::min);
        let mean = cv.iter().sum::<f64>() / cv.len() as f64;
        let folds: Vec<String> = cv.iter().map(|a| format!("{a:.2}")).collect();
        let _ = writeln!(metrics, "[cross-validation] folds={}", cv.len());
        let _ = writeln!(metrics, "accuracies: {}", folds.join(", "));
        let _ = writeln!(metrics, "mean: {mean:.2}");
        let _ = writeln!(metrics, "spread: {:.2}", max - min);
    }
    let _ = writeln!(
        metrics,
        "[shap] explained_rows={} background_rows={} efficiency_gap={:.3e}",
        explained.n_rows(),
        background.n_rows(),
        report.efficiency_gap()
    );

    let shap_comment = format!("{prov}; values are mean absolute SHAP per class");
    let outputs = [
        ("metrics.txt", metrics),
        ("shap_mean_abs.csv", mean_abs.to_csv(Some(&shap_comment))),
        ("shap_instances.csv", report.to_instance_csv(Some(&prov))),
        ("model.toml", model.to_toml_string(Some(&prov))),
    ];
    let mut written = Vec::new();
    for (file, text) in outputs {
        let path = cfg.path(file);
        write_output(&path, &text)?;
        written.push(path);
    }
    Ok(written)
}

/// Average ranks (1 = smallest), ties sharing the mean of their positions.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation; `None` when either side is constant or shorter than 2.
pub fn spearman(a: &[f64], b: &[f64]) -> Option<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return None;
    }
    let (ra, rb) = (average_ranks(a), average_ranks(b));
    let n = ra.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in ra.iter().zip(&rb) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return None;
    }
    Some(sab / (saa * sbb).sqrt())
}

/// One variable's causal and predictive importance for one class.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub variable: String,
    pub total_effect: f64,
    pub mean_abs_shap: f64,
    /// Zero causal effect but nonzero attribution.
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassComparison {
    pub class: String,
    pub rows: Vec<ComparisonRow>,
    pub spearman: Option<f64>,
}

impl ClassComparison {
    /// Variables ordered by decreasing |effect|, ties by name.
    pub fn by_effect(&self) -> Vec<&str> {
        self.ordered(|r| r.total_effect.abs())
    }

    /// Variables ordered by decreasing mean |SHAP|, ties by name.
    pub fn by_shap(&self) -> Vec<&str> {
        self.ordered(|r| r.mean_abs_shap)
    }

    fn ordered(&self, key: impl Fn(&ComparisonRow) -> f64) -> Vec<&str> {
        let mut rows: Vec<&ComparisonRow> = self.rows.iter().collect();
        rows.sort_by(|a, b| key(b).total_cmp(&key(a)).then(a.variable.cmp(&b.variable)));
        rows.into_iter().map(|r| r.variable.as_str()).collect()
    }
}

/// Aligns the total effect of every SHAP feature on each class with its mean |SHAP|.
pub fn compare(effects: &EffectsTable, shap: &MeanAbsShap) -> Result<Vec<ClassComparison>> {
    let known: BTreeMap<&str, ()> = effects.names().iter().map(|n| (n.as_str(), ())).collect();
    for name in shap.features.iter().chain(&shap.classes) {
        if !known.contains_key(name.as_str()) {
            return Err(PipelineError::Mismatch(format!(
                "`{name}` appears in the attributions but not in the effects table"
            )));
        }
    }
    Ok(shap
        .classes
        .iter()
        .enumerate()
        .map(|(c, class)| {
            let rows: Vec<ComparisonRow> = shap
                .features
                .iter()
                .enumerate()
                .map(|(j, feature)| {
                    let total_effect = effects.get(feature, class).unwrap_or(0.0);
                    let mean_abs_shap = shap.values[c][j];
                    ComparisonRow {
                        variable: feature.clone(),
                        total_effect,
                        mean_abs_shap,
                        flagged: total_effect == 0.0 && mean_abs_shap > SHAP_ZERO_TOLERANCE,
                    }
                })
                .collect();
            let abs_effect: Vec<f64> = rows.iter().map(|r| r.total_effect.abs()).collect();
            let shap_values: Vec<f64> = rows.iter().map(|r| r.mean_abs_shap).collect();
            ClassComparison {
                class: class.clone(),
                spearman: spearman(&abs_effect, &shap_values),
                rows,
            }
        })
        .collect())
}

/// Plain-text rendering of [`compare`].
pub fn comparison_report(comparisons: &[ClassComparison], provenance: &str) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# {provenance}");
    for cmp in comparisons {
        let _ = writeln!(out, "[{}]", cmp.class);
        let _ = writeln!(out, "variable,total_effect,mean_abs_shap,flag");
        for r in &cmp.rows {
            let flag = if r.flagged { "zero-effect-nonzero-shap" } else { "" };
            let _ = writeln!(
                out,
                "{},{:.4},{:.4},{}",
                r.variable, r.total_effect, r.mean_abs_shap, flag
            );
        }
        let rho = cmp
            .spearman
            .map_or_else(|| "undefined".to_string(), |v| format!("{v:.4}"));
        let _ = writeln!(out, "spearman(|effect|, mean_abs_shap): {rho}");
        let _ = writeln!(out, "top by |effect|: {}", cmp.by_effect().iter().take(2).copied().collect::<Vec<_>>().join(", "));
        let _ = writeln!(out, "top by mean_abs_shap: {}", cmp.by_shap().iter().take(2).copied().collect::<Vec<_>>().join(", "));
        let _ = writeln!(out);
    }
    out
}

/// Reads `effects_full.csv` and `shap_mean_abs.csv` from the output directory
/// and writes `comparison.txt`.
pub fn cmd_compare(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let effects = EffectsTable::from_csv(&read_text(&cfg.path("effects_full.csv"))?)?;
    let shap = MeanAbsShap::from_csv(&read_text(&cfg.path("shap_mean_abs.csv"))?)
        .map_err(PipelineError::Mismatch)?;
    let report = comparison_report(&compare(&effects, &shap)?, &cfg.provenance());
    let path = cfg.path("comparison.txt");
    write_output(&path, &report)?;
    Ok(vec![path])
}
