//! Integer-coded tabular data.
//!
//! Every analysis in this crate consumes a [`CodedDataset`]: a row-major matrix
//! of small integer codes whose columns are described by [`Variable`] entries
//! from a [`Codebook`]. This module owns loading and writing CSV files, dropping
//! incomplete responses, stratified splitting and SMOTE oversampling.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Marker stored in a cell whose response was one of the variable's invalid labels.
pub const MISSING: i32 = i32::MIN;

const DEFAULT_CODEBOOK: &str = include_str!("../data/codebook.toml");

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("codebook: {0}")]
    Codebook(String),
    #[error("missing variable column `{0}`")]
    MissingColumn(String),
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("row {row}, column `{column}`: cannot decode `{value}`")]
    Undecodable {
        row: usize,
        column: String,
        value: String,
    },
    #[error("invalid split: {0}")]
    InvalidSplit(String),
    #[error("stratum {code} of `{variable}` has {rows} rows, fewer than the {parts} parts")]
    StratumTooSmall {
        variable: String,
        code: i32,
        rows: usize,
        parts: usize,
    },
    #[error("class {code} of `{variable}` has {rows} rows; k = {k} needs at least k + 1")]
    ClassTooSmall {
        variable: String,
        code: i32,
        rows: usize,
        k: usize,
    },
    #[error("`{0}` has fewer than two classes")]
    TooFewClasses(String),
    #[error("row {row}: expected exactly one of {columns:?} to be set")]
    NotOneHot { row: usize, columns: Vec<String> },
    #[error("shape mismatch: {0}")]
    Shape(String),
}

pub type Result<T, E = DatasetError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VariableKind {
    Binary,
    Ordinal,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Level {
    pub code: i32,
    pub label: String,
}

/// One codebook entry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    pub kind: VariableKind,
    pub levels: Vec<Level>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub invalid_labels: Vec<String>,
}

impl Variable {
    /// Variable with codes `min..=max` labelled by their decimal value.
    pub fn with_codes(name: &str, min: i32, max: i32) -> Self {
        let kind = if max - min == 1 {
            VariableKind::Binary
        } else {
            VariableKind::Ordinal
        };
        Variable {
            name: name.to_string(),
            description: String::new(),
            kind,
            levels: (min..=max)
                .map(|code| Level {
                    code,
                    label: code.to_string(),
                })
                .collect(),
            invalid_labels: Vec::new(),
        }
    }

    /// Variable whose codes are `0..labels.len()` with the given labels.
    pub fn with_labels(name: &str, labels: &[&str]) -> Self {
        let mut var = Variable::with_codes(name, 0, labels.len() as i32 - 1);
        for (level, label) in var.levels.iter_mut().zip(labels) {
            level.label = label.to_string();
        }
        var
    }

    pub fn n_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn min_code(&self) -> i32 {
        self.levels.first().map(|l| l.code).unwrap_or(0)
    }

    pub fn max_code(&self) -> i32 {
        self.levels.last().map(|l| l.code).unwrap_or(0)
    }

    pub fn codes(&self) -> impl Iterator<Item = i32> + '_ {
        self.levels.iter().map(|l| l.code)
    }

    /// Position of `code` in the level list, if valid.
    pub fn level_index(&self, code: i32) -> Option<usize> {
        if self.levels.is_empty() || code < self.min_code() || code > self.max_code() {
            return None;
        }
        Some((code - self.min_code()) as usize)
    }

    pub fn is_valid(&self, code: i32) -> bool {
        self.level_index(code).is_some()
    }

    pub fn code_of_label(&self, label: &str) -> Option<i32> {
        self.levels.iter().find(|l| l.label == label).map(|l| l.code)
    }

    pub fn label_of(&self, code: i32) -> Option<&str> {
        self.level_index(code).map(|i| self.levels[i].label.as_str())
    }

    /// Nearest valid code to a real value.
    pub fn nearest_code(&self, value: f64) -> i32 {
        let rounded = value.round();
        rounded.clamp(self.min_code() as f64, self.max_code() as f64) as i32
    }

    fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(DatasetError::Codebook(format!("`{}`: {msg}", self.name)));
        if self.name.is_empty() {
            return Err(DatasetError::Codebook("variable with empty name".into()));
        }
        match self.kind {
            VariableKind::Binary if self.levels.len() != 2 => {
                return fail("binary variables need exactly 2 levels")
            }
            VariableKind::Ordinal if self.levels.len() < 2 => {
                return fail("ordinal variables need at least 2 levels")
            }
            _ => {}
        }
        for pair in self.levels.windows(2) {
            if pair[1].code != pair[0].code + 1 {
                return fail("codes must be distinct, ascending and contiguous");
            }
        }
        let labels: BTreeSet<&str> = self.levels.iter().map(|l| l.label.as_str()).collect();
        if labels.len() != self.levels.len() {
            return fail("duplicate level labels");
        }
        Ok(())
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct CodebookFile {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    invalid_labels: Vec<String>,
    #[serde(default)]
    variable: Vec<Variable>,
}

/// Ordered collection of variable definitions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Codebook {
    variables: Vec<Variable>,
}

impl Codebook {
    pub fn new(variables: Vec<Variable>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for var in &variables {
            var.validate()?;
            if !seen.insert(var.name.as_str()) {
                return Err(DatasetError::Codebook(format!(
                    "variable `{}` defined twice",
                    var.name
                )));
            }
        }
        Ok(Codebook { variables })
    }

    /// The shipped survey codebook (household, person and trip variables plus the three modes).
    pub fn survey() -> Self {
        Codebook::from_toml_str(DEFAULT_CODEBOOK).expect("shipped codebook is valid")
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: CodebookFile =
            toml::from_str(text).map_err(|e| DatasetError::Codebook(e.to_string()))?;
        let mut variables = file.variable;
        for var in &mut variables {
            for label in &file.invalid_labels {
                if !var.invalid_labels.contains(label) {
                    var.invalid_labels.push(label.clone());
                }
            }
        }
        Codebook::new(variables)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| DatasetError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Codebook::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        let file = CodebookFile {
            invalid_labels: Vec::new(),
            variable: self.variables.clone(),
        };
        toml::to_string(&file).expect("codebook serializes")
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn get(&self, name: &str) -> Option<&Variable> {
        self.variables.iter().find(|v| v.name == name)
    }
}

/// Row-major matrix of integer codes with one [`Variable`] per column.
///
/// A freshly loaded dataset may still hold [`MISSING`] markers or
/// out-of-range codes; [`clean`] removes those rows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodedDataset {
    columns: Vec<Variable>,
    cells: Vec<i32>,
}

impl CodedDataset {
    pub fn new(columns: Vec<Variable>, rows: Vec<Vec<i32>>) -> Result<Self> {
        let width = columns.len();
        let mut cells = Vec::with_capacity(rows.len() * width);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != width {
                return Err(DatasetError::Shape(format!(
                    "row {i} has {} cells, expected {width}",
                    row.len()
                )));
            }
            cells.extend(row);
        }
        Ok(CodedDataset { columns, cells })
    }

    pub fn from_flat(columns: Vec<Variable>, cells: Vec<i32>) -> Result<Self> {
        let width = columns.len();
        if (width == 0 && !cells.is_empty()) || (width > 0 && cells.len() % width != 0) {
            return Err(DatasetError::Shape(format!(
                "{} cells do not fill rows of width {width}",
                cells.len()
            )));
        }
        Ok(CodedDataset { columns, cells })
    }

    pub fn empty(columns: Vec<Variable>) -> Self {
        CodedDataset {
            columns,
            cells: Vec::new(),
        }
    }

    pub fn n_rows(&self) -> usize {
        if self.columns.is_empty() {
            0
        } else {
            self.cells.len() / self.columns.len()
        }
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[Variable] {
        &self.columns
    }

    pub fn column_names(&self) -> Vec<&str> {
        self.columns.iter().map(|c| c.name.as_str()).collect()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn require_column(&self, name: &str) -> Result<usize> {
        self.column_index(name)
            .ok_or_else(|| DatasetError::UnknownVariable(name.to_string()))
    }

    pub fn variable(&self, col: usize) -> &Variable {
        &self.columns[col]
    }

    pub fn value(&self, row: usize, col: usize) -> i32 {
        self.cells[row * self.columns.len() + col]
    }

    pub fn row(&self, row: usize) -> &[i32] {
        let w = self.columns.len();
        &self.cells[row * w..(row + 1) * w]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[i32]> {
        self.cells.chunks(self.columns.len().max(1))
    }

    pub fn column(&self, col: usize) -> impl Iterator<Item = i32> + '_ {
        self.rows().map(move |r| r[col])
    }

    /// Column values as reals, for the learners.
    pub fn column_f64(&self, col: usize) -> Vec<f64> {
        self.column(col).map(f64::from).collect()
    }

    /// Rows restricted to `cols`, as reals.
    pub fn feature_matrix(&self, cols: &[usize]) -> Vec<Vec<f64>> {
        self.rows()
            .map(|r| cols.iter().map(|&c| f64::from(r[c])).collect())
            .collect()
    }

    pub fn select_rows(&self, indices: &[usize]) -> Self {
        let mut cells = Vec::with_capacity(indices.len() * self.columns.len());
        for &i in indices {
            cells.extend_from_slice(self.row(i));
        }
        CodedDataset {
            columns: self.columns.clone(),
            cells,
        }
    }

    pub fn select_columns<S: AsRef<str>>(&self, names: &[S]) -> Result<Self> {
        let idx = names
            .iter()
            .map(|n| self.require_column(n.as_ref()))
            .collect::<Result<Vec<_>>>()?;
        let columns = idx.iter().map(|&i| self.columns[i].clone()).collect();
        let mut cells = Vec::with_capacity(self.n_rows() * idx.len());
        for row in self.rows() {
            cells.extend(idx.iter().map(|&i| row[i]));
        }
        Ok(CodedDataset { columns, cells })
    }

    pub fn push_row(&mut self, row: &[i32]) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(DatasetError::Shape(format!(
                "row has {} cells, expected {}",
                row.len(),
                self.columns.len()
            )));
        }
        self.cells.extend_from_slice(row);
        Ok(())
    }

    /// True when every cell is a valid code of its column.
    pub fn is_valid(&self) -> bool {
        self.rows()
            .all(|row| row.iter().zip(&self.columns).all(|(&v, c)| c.is_valid(v)))
    }

    /// Row counts per code of column `col`, in code order.
    pub fn class_counts(&self, col: usize) -> BTreeMap<i32, usize> {
        let mut counts = BTreeMap::new();
        for v in self.column(col) {
            *counts.entry(v).or_insert(0) += 1;
        }
        counts
    }

    /// Writes a header row and one line per data row. `comment` becomes a leading `# ` line.
    pub fn write_csv<W: Write>(&self, writer: W, comment: Option<&str>) -> Result<()> {
        let mut writer = writer;
        if let Some(comment) = comment {
            writeln!(writer, "# {comment}").map_err(|source| DatasetError::Io {
                path: "<csv output>".into(),
                source,
            })?;
        }
        let mut out = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(writer);
        out.write_record(self.column_names())?;
        for row in self.rows() {
            out.write_record(row.iter().map(|v| v.to_string()))?;
        }
        out.flush().map_err(|source| DatasetError::Io {
            path: "<csv output>".into(),
            source,
        })?;
        Ok(())
    }
}

/// Loads the codebook variables from a CSV file. Lines starting with `#` are ignored.
pub fn load_csv(path: &Path, codebook: &Codebook) -> Result<CodedDataset> {
    let file = std::fs::File::open(path).map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_csv(file, codebook)
}

/// Cells may be integer codes or exact level labels; invalid-response labels
/// become [`MISSING`]. Out-of-range integers are kept for [`clean`] to drop.
pub fn read_csv<R: Read>(reader: R, codebook: &Codebook) -> Result<CodedDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    let positions = codebook
        .variables()
        .iter()
        .map(|v| {
            header
                .iter()
                .position(|h| h == v.name)
                .ok_or_else(|| DatasetError::MissingColumn(v.name.clone()))
        })
        .collect::<Result<Vec<_>>>()?;

    let columns = codebook.variables().to_vec();
    let mut cells = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let row_number = i + 1;
        for (var, &pos) in columns.iter().zip(&positions) {
            let raw = record.get(pos).unwrap_or("");
            cells.push(decode_cell(var, raw).ok_or_else(|| DatasetError::Undecodable {
                row: row_number,
                column: var.name.clone(),
                value: raw.to_string(),
            })?);
        }
    }
    CodedDataset::from_flat(columns, cells)
}

fn decode_cell(var: &Variable, raw: &str) -> Option<i32> {
    if let Ok(code) = raw.parse::<i32>() {
        return Some(code);
    }
    if let Some(code) = var.code_of_label(raw) {
        return Some(code);
    }
    if var.invalid_labels.iter().any(|l| l == raw) {
        return Some(MISSING);
    }
    None
}

/// Drops every row holding a [`MISSING`] marker or a code outside its variable's levels.
///
/// Columns are judged by the codebook definition when it has one, otherwise by
/// the dataset's own column metadata.
pub fn clean(data: &CodedDataset, codebook: &Codebook) -> CodedDataset {
    let defs: Vec<&Variable> = data
        .columns()
        .iter()
        .map(|c| codebook.get(&c.name).unwrap_or(c))
        .collect();
    let keep: Vec<usize> = (0..data.n_rows())
        .filter(|&r| {
            data.row(r)
                .iter()
                .zip(&defs)
                .all(|(&v, def)| v != MISSING && def.is_valid(v))
        })
        .collect();
    data.select_rows(&keep)
}

/// Replaces one-hot indicator columns with a single class column coded `0..columns.len()`.
///
/// The class column is appended after the remaining columns; its labels are the
/// indicator names.
pub fn collapse_one_hot(data: &CodedDataset, indicators: &[&str], name: &str) -> Result<CodedDataset> {
    let idx = indicators
        .iter()
        .map(|n| data.require_column(n))
        .collect::<Result<Vec<_>>>()?;
    let keep: Vec<usize> = (0..data.n_cols()).filter(|c| !idx.contains(c)).collect();
    let mut columns: Vec<Variable> = keep.iter().map(|&c| data.variable(c).clone()).collect();
    columns.push(Variable::with_labels(name, indicators));

    let mut cells = Vec::with_capacity(data.n_rows() * columns.len());
    for (r, row) in data.rows().enumerate() {
        let hot: Vec<usize> = idx
            .iter()
            .enumerate()
            .filter(|(_, &c)| row[c] == 1)
            .map(|(k, _)| k)
            .collect();
        if hot.len() != 1 || idx.iter().any(|&c| row[c] != 0 && row[c] != 1) {
            return Err(DatasetError::NotOneHot {
                row: r + 1,
                columns: indicators.iter().map(|s| s.to_string()).collect(),
            });
        }
        cells.extend(keep.iter().map(|&c| row[c]));
        cells.push(hot[0] as i32);
    }
    CodedDataset::from_flat(columns, cells)
}

/// Named fractions for a stratified partition.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitSpec {
    pub fractions: Vec<(String, f64)>,
    pub stratify_on: String,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(fractions: &[(&str, f64)], stratify_on: &str, seed: u64) -> Self {
        SplitSpec {
            fractions: fractions.iter().map(|(n, f)| (n.to_string(), *f)).collect(),
            stratify_on: stratify_on.to_string(),
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.fractions.is_empty() {
            return Err(DatasetError::InvalidSplit("no parts".into()));
        }
        for (name, f) in &self.fractions {
            if !(*f > 0.0 && *f <= 1.0) {
                return Err(DatasetError::InvalidSplit(format!(
                    "fraction {f} of part `{name}` is outside (0, 1]"
                )));
            }
        }
        let total: f64 = self.fractions.iter().map(|(_, f)| f).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(DatasetError::InvalidSplit(format!(
                "fractions sum to {total}, not 1"
            )));
        }
        Ok(())
    }
}

/// Per-part row counts for one stratum of `m` rows.
///
/// Each part receives `floor(m * fraction)`; leftover rows go one at a time to
/// the parts in descending-fraction order, ties broken by part order.
fn stratum_counts(m: usize, fractions: &[f64]) -> Vec<usize> {
    let mut counts: Vec<usize> = fractions
        .iter()
        .map(|f| (m as f64 * f + 1e-9).floor() as usize)
        .collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..fractions.len()).collect();
    order.sort_by(|&a, &b| fractions[b].total_cmp(&fractions[a]).then(a.cmp(&b)));
    let mut remainder = m.saturating_sub(assigned);
    let mut k = 0;
    while remainder > 0 {
        counts[order[k % order.len()]] += 1;
        remainder -= 1;
        k += 1;
    }
    counts
}

/// Partitions rows into the parts of `spec`, preserving each stratum's proportions.
///
/// Rows inside every part keep their original relative order.
pub fn stratified_split(data: &CodedDataset, spec: &SplitSpec) -> Result<Vec<CodedDataset>> {
    spec.validate()?;
    let col = data.require_column(&spec.stratify_on)?;
    let fractions: Vec<f64> = spec.fractions.iter().map(|(_, f)| *f).collect();
    let parts = fractions.len();

    let mut strata: BTreeMap<i32, Vec<usize>> = BTreeMap::new();
    for (r, v) in data.column(col).enumerate() {
        strata.entry(v).or_default().push(r);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut assignment: Vec<Vec<usize>> = vec![Vec::new(); parts];
    for (&code, rows) in &strata {
        if rows.len() < parts {
            return Err(DatasetError::StratumTooSmall {
                variable: spec.stratify_on.clone(),
                code,
                rows: rows.len(),
                parts,
            });
        }
        let mut shuffled = rows.clone();
        shuffled.shuffle(&mut rng);
        let mut start = 0;
        for (p, count) in stratum_counts(rows.len(), &fractions).into_iter().enumerate() {
            assignment[p].extend_from_slice(&shuffled[start..start + count]);
            start += count;
        }
    }
    Ok(assignment
        .into_iter()
        .map(|mut rows| {
            rows.sort_unstable();
            data.select_rows(&rows)
        })
        .collect())
}

/// Provenance of one SMOTE row.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticRow {
    pub class_code: i32,
    /// Row index of the donor in the input dataset.
    pub donor: usize,
    /// Row index of the chosen same-class neighbour.
    pub neighbor: usize,
    pub gap: f64,
    /// Feature values before rounding to codes, in column order (the class column holds its code).
    pub interpolated: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SmoteOutcome {
    /// Input rows followed by the synthetic rows, in the order of `synthetic`.
    pub data: CodedDataset,
    pub synthetic: Vec<SyntheticRow>,
}

/// Oversamples every minority class of `class_var` up to the majority count.
pub fn smote(data: &CodedDataset, class_var: &str, k: usize, seed: u64) -> Result<CodedDataset> {
    smote_traced(data, class_var, k, seed).map(|out| out.data)
}

/// [`smote`], also returning how each synthetic row was built.
pub fn smote_traced(
    data: &CodedDataset,
    class_var: &str,
    k: usize,
    seed: u64,
) -> Result<SmoteOutcome> {
    let class_col = data.require_column(class_var)?;
    if k == 0 {
        return Err(DatasetError::InvalidSplit("SMOTE needs k >= 1".into()));
    }
    let mut members: BTreeMap<i32, Vec<usize>> = BTreeMap::new();
    for (r, v) in data.column(class_col).enumerate() {
        members.entry(v).or_default().push(r);
    }
    if members.len() < 2 {
        return Err(DatasetError::TooFewClasses(class_var.to_string()));
    }
    let majority = members.values().map(Vec::len).max().unwrap_or(0);
    for (&code, rows) in &members {
        if rows.len() < majority && rows.len() < k + 1 {
            return Err(DatasetError::ClassTooSmall {
                variable: class_var.to_string(),
                code,
                rows: rows.len(),
                k,
            });
        }
    }

    let features: Vec<usize> = (0..data.n_cols()).filter(|&c| c != class_col).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = data.clone();
    let mut synthetic = Vec::new();
    for (&code, rows) in &members {
        let needed = majority - rows.len();
        if needed == 0 {
            continue;
        }
        let neighbors = nearest_neighbors(data, rows, &features, k);
        for _ in 0..needed {
            let d = rng.random_range(0..rows.len());
            let z = neighbors[d][rng.random_range(0..k)];
            let gap: f64 = rng.random();
            let donor = data.row(rows[d]);
            let neighbor = data.row(z);
            let mut interpolated = vec![0.0; data.n_cols()];
            let mut cells = vec![0; data.n_cols()];
            for c in 0..data.n_cols() {
                if c == class_col {
                    interpolated[c] = f64::from(code);
                    cells[c] = code;
                    continue;
                }
                let x = f64::from(donor[c]);
                let value = x + gap * (f64::from(neighbor[c]) - x);
                interpolated[c] = value;
                cells[c] = data.variable(c).nearest_code(value);
            }
            out.push_row(&cells)?;
            synthetic.push(SyntheticRow {
                class_code: code,
                donor: rows[d],
                neighbor: z,
                gap,
                interpolated,
            });
        }
    }
    Ok(SmoteOutcome {
        data: out,
        synthetic,
    })
}

/// For each member, the dataset indices of its `k` nearest other members
/// (squared Euclidean distance on codes, ties by row index).
fn nearest_neighbors(
    data: &CodedDataset,
    rows: &[usize],
    features: &[usize],
    k: usize,
) -> Vec<Vec<usize>> {
    rows.iter()
        .map(|&a| {
            let ra = data.row(a);
            let mut dists: Vec<(i64, usize)> = rows
                .iter()
                .filter(|&&b| b != a)
                .map(|&b| {
                    let rb = data.row(b);
                    let d = features
                        .iter()
                        .map(|&c| {
                            let diff = i64::from(ra[c]) - i64::from(rb[c]);
                            diff * diff
                        })
                        .sum();
                    (d, b)
                })
                .collect();
            dists.sort_unstable();
            dists.into_iter().take(k).map(|(_, b)| b).collect()
        })
        .collect()
}
