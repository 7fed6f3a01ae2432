//! Discrete structural causal models used as ground truth.
//!
//! A [`DiscreteScm`] pairs a DAG with one conditional probability table per
//! node. It can be sampled ancestrally, enumerated into its exact joint
//! distribution, and intervened on to obtain exact average treatment effects.

use std::collections::BTreeSet;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Codebook, CodedDataset, Level, Variable, VariableKind};
use crate::graph::{d_separated, Dag, GraphError, MixedGraph};

/// Largest joint state space [`DiscreteScm::exact_joint`] will enumerate.
pub const MAX_STATES: usize = 1_000_000;

/// Dependence (in nats) a d-connected triple must exceed for [`DiscreteScm::is_faithful`].
pub const FAITHFUL_MIN_CMI: f64 = 1e-4;

const ROW_SUM_TOLERANCE: f64 = 1e-12;
const SAMPLE_CHUNK: usize = 4096;

/// Names accepted by [`preset`].
pub const PRESETS: &[&str] = &[
    "pair",
    "chain",
    "fork",
    "collider",
    "diamond",
    "confounded",
    "null",
    "northlike",
    "westlike",
    "southlike",
];

#[derive(Debug, Error)]
pub enum ScmError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Dataset(#[from] crate::dataset::DatasetError),
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("unknown preset `{0}`; expected one of {PRESETS:?}")]
    UnknownPreset(String),
    #[error("conditional table of `{node}`: {message}")]
    Cpt { node: String, message: String },
    #[error("joint state space of {0} states exceeds the limit of {MAX_STATES}")]
    StateSpace(u128),
    #[error("code {code} is not a level of `{node}`")]
    UnknownCode { node: String, code: i32 },
    #[error("treatment and outcome are both `{0}`")]
    SameNode(String),
    #[error("SCM file: {0}")]
    Format(String),
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = ScmError> = std::result::Result<T, E>;

/// A DAG with a conditional probability table per node.
///
/// Row `r` of a node's table is the distribution of the node given the parent
/// assignment whose level indices, read in mixed radix with the first parent
/// most significant, equal `r`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteScm {
    dag: Dag,
    variables: Vec<Variable>,
    parents: Vec<Vec<usize>>,
    cpts: Vec<Vec<Vec<f64>>>,
    order: Vec<usize>,
}

impl DiscreteScm {
    /// Builds and validates a model. `parents[v]` lists node indices in table order.
    pub fn new(
        variables: Vec<Variable>,
        parents: Vec<Vec<usize>>,
        cpts: Vec<Vec<Vec<f64>>>,
    ) -> Result<Self> {
        let n = variables.len();
        if parents.len() != n || cpts.len() != n {
            return Err(ScmError::Format(format!(
                "{n} variables but {} parent lists and {} tables",
                parents.len(),
                cpts.len()
            )));
        }
        let names: Vec<&str> = variables.iter().map(|v| v.name.as_str()).collect();
        let mut graph = MixedGraph::new(&names)?;
        for (child, ps) in parents.iter().enumerate() {
            let unique: BTreeSet<usize> = ps.iter().copied().collect();
            if unique.len() != ps.len() {
                return Err(cpt_error(&variables[child], "repeated parent"));
            }
            for &p in ps {
                if p >= n {
                    return Err(GraphError::NodeOutOfRange(p).into());
                }
                graph.add_directed(p, child)?;
            }
        }
        let dag = Dag::new(graph)?;
        for (v, table) in cpts.iter().enumerate() {
            let var = &variables[v];
            let expected: usize = parents[v].iter().map(|&p| variables[p].n_levels()).product();
            if table.len() != expected {
                return Err(cpt_error(
                    var,
                    &format!("{} rows, expected {expected}", table.len()),
                ));
            }
            for (r, row) in table.iter().enumerate() {
                if row.len() != var.n_levels() {
                    return Err(cpt_error(
                        var,
                        &format!("row {r} has {} entries, expected {}", row.len(), var.n_levels()),
                    ));
                }
                if row.iter().any(|p| !(0.0..=1.0).contains(p)) {
                    return Err(cpt_error(var, &format!("row {r} has an entry outside [0, 1]")));
                }
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                    return Err(cpt_error(var, &format!("row {r} sums to {sum}")));
                }
            }
        }
        let order = dag.topological_order();
        Ok(DiscreteScm {
            dag,
            variables,
            parents,
            cpts,
            order,
        })
    }

    pub fn dag(&self) -> &Dag {
        &self.dag
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn n_nodes(&self) -> usize {
        self.variables.len()
    }

    pub fn names(&self) -> Vec<&str> {
        self.variables.iter().map(|v| v.name.as_str()).collect()
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.variables
            .iter()
            .position(|v| v.name == name)
            .ok_or_else(|| ScmError::UnknownNode(name.to_string()))
    }

    pub fn parents(&self, v: usize) -> &[usize] {
        &self.parents[v]
    }

    pub fn cpt(&self, v: usize) -> &[Vec<f64>] {
        &self.cpts[v]
    }

    /// Smallest `I(a; b | z)` over single nodes `a`, `b` and conditioning sets
    /// `z` that the graph leaves d-connected; `None` when there is no such triple.
    ///
    /// Enumerates every conditioning set, so it is meant for small models.
    pub fn min_dependence(&self) -> Result<Option<f64>> {
        let joint = self.exact_joint()?;
        let n = self.n_nodes();
        let mut smallest: Option<f64> = None;
        for a in 0..n {
            for b in a + 1..n {
                let rest: Vec<usize> = (0..n).filter(|&v| v != a && v != b).collect();
                for mask in 0..1usize << rest.len() {
                    let z: Vec<usize> = (0..rest.len())
                        .filter(|i| mask >> i & 1 == 1)
                        .map(|i| rest[i])
                        .collect();
                    let zs: BTreeSet<usize> = z.iter().copied().collect();
                    if d_separated(&self.dag, &BTreeSet::from([a]), &BTreeSet::from([b]), &zs)? {
                        continue;
                    }
                    let cmi = joint.conditional_mutual_information(a, b, &z);
                    smallest = Some(smallest.map_or(cmi, |s| s.min(cmi)));
                }
            }
        }
        Ok(smallest)
    }

    /// Whether every d-connected triple carries more than [`FAITHFUL_MIN_CMI`] nats.
    pub fn is_faithful(&self) -> Result<bool> {
        Ok(self.min_dependence()?.is_none_or(|m| m > FAITHFUL_MIN_CMI))
    }

    /// Table row of `v` for a full assignment of level indices.
    fn row_index(&self, v: usize, levels: &[usize]) -> usize {
        self.parents[v].iter().fold(0, |acc, &p| {
            acc * self.variables[p].n_levels() + levels[p]
        })
    }

    /// Draws `n` rows ancestrally.
    ///
    /// Row `r` consumes its own fixed window of the seeded stream, so the
    /// result does not depend on how rows are split across threads.
    pub fn sample(&self, n: usize, seed: u64) -> CodedDataset {
        self.sample_chunked(n, seed, SAMPLE_CHUNK)
    }

    /// [`DiscreteScm::sample`] with an explicit chunk size for the parallel split.
    pub fn sample_chunked(&self, n: usize, seed: u64, chunk: usize) -> CodedDataset {
        let width = self.n_nodes();
        let mut cells = vec![0i32; n * width];
        if width > 0 && n > 0 {
            let rows_per_chunk = chunk.max(1);
            cells
                .par_chunks_mut(rows_per_chunk * width)
                .enumerate()
                .for_each(|(c, block)| {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    let mut levels = vec![0usize; width];
                    for (k, row) in block.chunks_mut(width).enumerate() {
                        let r = c * rows_per_chunk + k;
                        rng.set_word_pos((r as u128) * (width as u128) * 2);
                        for &v in &self.order {
                            let dist = &self.cpts[v][self.row_index(v, &levels)];
                            let u: f64 = rng.random();
                            levels[v] = draw(dist, u);
                            row[v] = self.variables[v].min_code() + levels[v] as i32;
                        }
                    }
                });
        }
        CodedDataset::from_flat(self.variables.clone(), cells).expect("shape is consistent")
    }

    /// Enumerates the full joint distribution.
    pub fn exact_joint(&self) -> Result<JointDistribution> {
        let radices: Vec<usize> = self.variables.iter().map(Variable::n_levels).collect();
        let states = radices.iter().map(|&r| r as u128).product::<u128>();
        if states > MAX_STATES as u128 {
            return Err(ScmError::StateSpace(states));
        }
        let states = states as usize;
        let mut probs = Vec::with_capacity(states);
        let mut levels = vec![0usize; radices.len()];
        for _ in 0..states {
            let mut p = 1.0;
            for v in 0..levels.len() {
                p *= self.cpts[v][self.row_index(v, &levels)][levels[v]];
                if p == 0.0 {
                    break;
                }
            }
            probs.push(p);
            for v in (0..levels.len()).rev() {
                levels[v] += 1;
                if levels[v] < radices[v] {
                    break;
                }
                levels[v] = 0;
            }
        }
        Ok(JointDistribution {
            variables: self.variables.clone(),
            radices,
            probs,
        })
    }

    /// The model with `node`'s table replaced by a point mass on `code`.
    pub fn intervene(&self, node: usize, code: i32) -> Result<DiscreteScm> {
        let var = &self.variables[node];
        let idx = var.level_index(code).ok_or_else(|| ScmError::UnknownCode {
            node: var.name.clone(),
            code,
        })?;
        let mut point = vec![0.0; var.n_levels()];
        point[idx] = 1.0;
        let mut parents = self.parents.clone();
        let mut cpts = self.cpts.clone();
        parents[node].clear();
        cpts[node] = vec![point];
        DiscreteScm::new(self.variables.clone(), parents, cpts)
    }

    /// The sub-model on `keep`, which must be closed under taking parents.
    fn restricted(&self, keep: &BTreeSet<usize>) -> Result<DiscreteScm> {
        let nodes: Vec<usize> = keep.iter().copied().collect();
        let remap = |v: usize| nodes.iter().position(|&k| k == v).expect("ancestral set");
        DiscreteScm::new(
            nodes.iter().map(|&v| self.variables[v].clone()).collect(),
            nodes
                .iter()
                .map(|&v| self.parents[v].iter().map(|&p| remap(p)).collect())
                .collect(),
            nodes.iter().map(|&v| self.cpts[v].clone()).collect(),
        )
    }

    /// `E[outcome | do(treatment = t1)] - E[outcome | do(treatment = t0)]`, with
    /// outcome codes read as numbers.
    pub fn true_ate(&self, treatment: &str, outcome: &str, t1: i32, t0: i32) -> Result<f64> {
        let t = self.index_of(treatment)?;
        let o = self.index_of(outcome)?;
        if t == o {
            return Err(ScmError::SameNode(treatment.to_string()));
        }
        for code in [t1, t0] {
            if !self.variables[t].is_valid(code) {
                return Err(ScmError::UnknownCode {
                    node: treatment.to_string(),
                    code,
                });
            }
        }
        if t1 == t0 || !self.dag.has_directed_path(t, o) {
            return Ok(0.0);
        }
        let mut keep = self.dag.ancestors(o);
        keep.insert(o);
        let sub = self.restricted(&keep)?;
        let (st, so) = (sub.index_of(treatment)?, sub.index_of(outcome)?);
        let high = sub.intervene(st, t1)?.exact_joint()?.expectation(so);
        let low = sub.intervene(st, t0)?.exact_joint()?.expectation(so);
        Ok(high - low)
    }

    /// Average effect per unit code of the treatment, from its lowest to its highest level.
    pub fn true_ate_per_unit(&self, treatment: &str, outcome: &str) -> Result<f64> {
        let var = &self.variables[self.index_of(treatment)?];
        let (lo, hi) = (var.min_code(), var.max_code());
        Ok(self.true_ate(treatment, outcome, hi, lo)? / f64::from(hi - lo))
    }

    /// Per-unit true effects for every ordered pair; `None` on the diagonal.
    pub fn true_effects(&self) -> Result<Vec<Vec<Option<f64>>>> {
        let names = self.names();
        let cells: Vec<(usize, usize)> = (0..names.len())
            .flat_map(|a| (0..names.len()).map(move |b| (a, b)))
            .collect();
        let values = cells
            .par_iter()
            .map(|&(a, b)| {
                if a == b {
                    Ok(None)
                } else {
                    self.true_ate_per_unit(names[a], names[b]).map(Some)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(values.chunks(names.len()).map(<[_]>::to_vec).collect())
    }

    pub fn to_toml_string(&self) -> String {
        let file = ScmFile {
            node: (0..self.n_nodes())
                .map(|v| {
                    let var = &self.variables[v];
                    NodeFile {
                        name: var.name.clone(),
                        description: var.description.clone(),
                        kind: var.kind,
                        levels: var.codes().collect(),
                        labels: var.levels.iter().map(|l| l.label.clone()).collect(),
                        invalid_labels: var.invalid_labels.clone(),
                        parents: self.parents[v]
                            .iter()
                            .map(|&p| self.variables[p].name.clone())
                            .collect(),
                        cpt: self.cpts[v].clone(),
                    }
                })
                .collect(),
        };
        toml::to_string(&file).expect("SCM serializes")
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: ScmFile = toml::from_str(text).map_err(|e| ScmError::Format(e.to_string()))?;
        let names: Vec<String> = file.node.iter().map(|n| n.name.clone()).collect();
        let mut variables = Vec::with_capacity(file.node.len());
        let mut parents = Vec::with_capacity(file.node.len());
        let mut cpts = Vec::with_capacity(file.node.len());
        for node in file.node {
            if node.labels.len() != node.levels.len() {
                return Err(ScmError::Format(format!(
                    "`{}` has {} levels but {} labels",
                    node.name,
                    node.levels.len(),
                    node.labels.len()
                )));
            }
            let var = Variable {
                name: node.name.clone(),
                description: node.description,
                kind: node.kind,
                levels: node
                    .levels
                    .iter()
                    .zip(node.labels)
                    .map(|(&code, label)| Level { code, label })
                    .collect(),
                invalid_labels: node.invalid_labels,
            };
            Codebook::new(vec![var.clone()])?;
            variables.push(var);
            parents.push(
                node.parents
                    .iter()
                    .map(|p| {
                        names
                            .iter()
                            .position(|n| n == p)
                            .ok_or_else(|| ScmError::UnknownNode(p.clone()))
                    })
                    .collect::<Result<Vec<_>>>()?,
            );
            cpts.push(node.cpt);
        }
        DiscreteScm::new(variables, parents, cpts)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| ScmError::Io {
            path: path.display().to_string(),
            source,
        })?;
        DiscreteScm::from_toml_str(&text)
    }
}

fn cpt_error(var: &Variable, message: &str) -> ScmError {
    ScmError::Cpt {
        node: var.name.clone(),
        message: message.to_string(),
    }
}

/// Level index selected by a uniform draw `u` from `dist`.
fn draw(dist: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, &p) in dist.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    dist.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

#[derive(Debug, Serialize, Deserialize)]
struct ScmFile {
    node: Vec<NodeFile>,
}

#[derive(Debug, Serialize, Deserialize)]
struct NodeFile {
    name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    description: String,
    kind: VariableKind,
    levels: Vec<i32>,
    labels: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    invalid_labels: Vec<String>,
    #[serde(default)]
    parents: Vec<String>,
    cpt: Vec<Vec<f64>>,
}

/// Probability of every joint assignment, indexed in mixed radix with the first
/// variable most significant.
#[derive(Debug, Clone, PartialEq)]
pub struct JointDistribution {
    variables: Vec<Variable>,
    radices: Vec<usize>,
    probs: Vec<f64>,
}

impl JointDistribution {
    pub fn n_states(&self) -> usize {
        self.probs.len()
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    /// Codes of the assignment with the given state index.
    pub fn assignment(&self, mut index: usize) -> Vec<i32> {
        let mut codes = vec![0; self.radices.len()];
        for v in (0..self.radices.len()).rev() {
            codes[v] = self.variables[v].min_code() + (index % self.radices[v]) as i32;
            index /= self.radices[v];
        }
        codes
    }

    /// Probability of a full assignment of codes; 0 for invalid codes.
    pub fn prob(&self, codes: &[i32]) -> f64 {
        if codes.len() != self.radices.len() {
            return 0.0;
        }
        let mut index = 0;
        for (v, &code) in codes.iter().enumerate() {
            match self.variables[v].level_index(code) {
                Some(i) => index = index * self.radices[v] + i,
                None => return 0.0,
            }
        }
        self.probs[index]
    }

    /// Marginal table over `vars`, indexed in mixed radix in the given order.
    pub fn marginal(&self, vars: &[usize]) -> Vec<f64> {
        let size: usize = vars.iter().map(|&v| self.radices[v]).product();
        let mut out = vec![0.0; size];
        let mut levels = vec![0usize; self.radices.len()];
        for &p in &self.probs {
            let idx = vars.iter().fold(0, |acc, &v| acc * self.radices[v] + levels[v]);
            out[idx] += p;
            for v in (0..levels.len()).rev() {
                levels[v] += 1;
                if levels[v] < self.radices[v] {
                    break;
                }
                levels[v] = 0;
            }
        }
        out
    }

    /// Expected code of variable `v`.
    pub fn expectation(&self, v: usize) -> f64 {
        let min = self.variables[v].min_code();
        self.marginal(&[v])
            .iter()
            .enumerate()
            .map(|(i, p)| p * f64::from(min + i as i32))
            .sum()
    }

    /// `I(a; b | z)` in nats.
    pub fn conditional_mutual_information(&self, a: usize, b: usize, z: &[usize]) -> f64 {
        let ra = self.radices[a];
        let rb = self.radices[b];
        let rz: usize = z.iter().map(|&v| self.radices[v]).product();
        let mut vars = vec![a, b];
        vars.extend_from_slice(z);
        let abz = self.marginal(&vars);
        let mut az = vec![0.0; ra * rz];
        let mut bz = vec![0.0; rb * rz];
        let mut pz = vec![0.0; rz];
        for i in 0..ra {
            for j in 0..rb {
                for k in 0..rz {
                    let p = abz[(i * rb + j) * rz + k];
                    az[i * rz + k] += p;
                    bz[j * rz + k] += p;
                    pz[k] += p;
                }
            }
        }
        let mut cmi = 0.0;
        for i in 0..ra {
            for j in 0..rb {
                for k in 0..rz {
                    let p = abz[(i * rb + j) * rz + k];
                    if p > 0.0 {
                        cmi += p * (p * pz[k] / (az[i * rz + k] * bz[j * rz + k])).ln();
                    }
                }
            }
        }
        cmi.max(0.0)
    }
}

/// Random model over `X0..X{n-1}` with edges only from lower to higher index.
///
/// Every node has between 2 and `max_levels` levels; raw table entries are
/// drawn uniformly, clamped to `[0.1, 0.9]` and normalized per row.
pub fn random_scm<R: Rng>(n: usize, edge_prob: f64, max_levels: usize, rng: &mut R) -> DiscreteScm {
    let max_levels = max_levels.max(2);
    let variables: Vec<Variable> = (0..n)
        .map(|i| {
            let k = rng.random_range(2..=max_levels) as i32;
            Variable::with_codes(&format!("X{i}"), 0, k - 1)
        })
        .collect();
    let parents: Vec<Vec<usize>> = (0..n)
        .map(|child| (0..child).filter(|_| rng.random_bool(edge_prob)).collect())
        .collect();
    let cpts = (0..n)
        .map(|v| {
            let rows: usize = parents[v].iter().map(|&p| variables[p].n_levels()).product();
            (0..rows)
                .map(|_| {
                    let k = variables[v].n_levels();
                    if k == 2 {
                        let p: f64 = rng.random::<f64>().clamp(0.1, 0.9);
                        vec![1.0 - p, p]
                    } else {
                        let raw: Vec<f64> =
                            (0..k).map(|_| rng.random::<f64>().clamp(0.1, 0.9)).collect();
                        normalized(raw)
                    }
                })
                .collect()
        })
        .collect();
    DiscreteScm::new(variables, parents, cpts).expect("random model is valid")
}

fn normalized(mut row: Vec<f64>) -> Vec<f64> {
    let sum: f64 = row.iter().sum();
    row.iter_mut().for_each(|p| *p /= sum);
    let last = row.len() - 1;
    row[last] = 1.0 - row[..last].iter().sum::<f64>();
    row
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn bernoulli(p1: f64) -> Vec<f64> {
    vec![1.0 - p1, p1]
}

/// Cutpoints of an ordered logit whose distribution at zero shift is `marginal`.
fn cutpoints(marginal: &[f64]) -> Vec<f64> {
    let total: f64 = marginal.iter().sum();
    let mut acc = 0.0;
    marginal[..marginal.len() - 1]
        .iter()
        .map(|p| {
            acc += p / total;
            (acc / (1.0 - acc)).ln()
        })
        .collect()
}

/// Ordered-logit distribution: `P(Y <= k) = sigmoid(cut_k - shift)`.
fn ordered_logit(cuts: &[f64], shift: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(cuts.len() + 1);
    let mut prev = 0.0;
    for &c in cuts {
        let cum = sigmoid(c - shift);
        out.push(cum - prev);
        prev = cum;
    }
    out.push(1.0 - prev);
    out
}

/// Table rows for `child` given parents, from a function of the parent codes.
fn table<F: Fn(&[i32]) -> Vec<f64>>(parents: &[&Variable], f: F) -> Vec<Vec<f64>> {
    let rows: usize = parents.iter().map(|v| v.n_levels()).product();
    (0..rows)
        .map(|mut r| {
            let mut codes = vec![0; parents.len()];
            for (i, var) in parents.iter().enumerate().rev() {
                codes[i] = var.min_code() + (r % var.n_levels()) as i32;
                r /= var.n_levels();
            }
            f(&codes)
        })
        .collect()
}

/// Incremental builder keyed by node name.
struct Builder {
    variables: Vec<Variable>,
    parents: Vec<Vec<usize>>,
    cpts: Vec<Vec<Vec<f64>>>,
}

impl Builder {
    fn new(variables: Vec<Variable>) -> Self {
        let n = variables.len();
        Builder {
            variables,
            parents: vec![Vec::new(); n],
            cpts: vec![Vec::new(); n],
        }
    }

    fn idx(&self, name: &str) -> usize {
        self.variables
            .iter()
            .position(|v| v.name == name)
            .unwrap_or_else(|| panic!("preset node `{name}`"))
    }

    fn node<F: Fn(&[i32]) -> Vec<f64>>(&mut self, name: &str, parents: &[&str], f: F) -> &mut Self {
        let child = self.idx(name);
        let ps: Vec<usize> = parents.iter().map(|p| self.idx(p)).collect();
        let vars: Vec<&Variable> = ps.iter().map(|&p| &self.variables[p]).collect();
        self.cpts[child] = table(&vars, f);
        self.parents[child] = ps;
        self
    }

    fn root(&mut self, name: &str, marginal: &[f64]) -> &mut Self {
        let total: f64 = marginal.iter().sum();
        let row = normalized(marginal.iter().map(|p| p / total).collect());
        self.node(name, &[], move |_| row.clone())
    }

    fn build(&mut self) -> DiscreteScm {
        DiscreteScm::new(
            std::mem::take(&mut self.variables),
            std::mem::take(&mut self.parents),
            std::mem::take(&mut self.cpts),
        )
        .expect("preset is valid")
    }
}

fn binary_vars(names: &[&str]) -> Vec<Variable> {
    names.iter().map(|n| Variable::with_codes(n, 0, 1)).collect()
}

/// Small reference models and the three survey-shaped models.
pub fn preset(name: &str) -> Result<DiscreteScm> {
    let scm = match name {
        "pair" => Builder::new(binary_vars(&["T", "O"]))
            .root("T", &[0.5, 0.5])
            .node("O", &["T"], |c| bernoulli(0.3 + 0.5 * f64::from(c[0])))
            .build(),
        "chain" => Builder::new(binary_vars(&["A", "B", "C"]))
            .root("A", &[0.5, 0.5])
            .node("B", &["A"], |c| bernoulli(0.2 + 0.6 * f64::from(c[0])))
            .node("C", &["B"], |c| bernoulli(0.2 + 0.6 * f64::from(c[0])))
            .build(),
        "fork" => Builder::new(binary_vars(&["A", "B", "C"]))
            .root("B", &[0.5, 0.5])
            .node("A", &["B"], |c| bernoulli(0.2 + 0.6 * f64::from(c[0])))
            .node("C", &["B"], |c| bernoulli(0.8 - 0.6 * f64::from(c[0])))
            .build(),
        "collider" => Builder::new(binary_vars(&["A", "B", "C"]))
            .root("A", &[0.5, 0.5])
            .root("B", &[0.5, 0.5])
            .node("C", &["A", "B"], |c| {
                bernoulli(0.1 + 0.4 * f64::from(c[0]) + 0.4 * f64::from(c[1]))
            })
            .build(),
        "diamond" => Builder::new(binary_vars(&["A", "B", "C", "D"]))
            .root("A", &[0.5, 0.5])
            .node("B", &["A"], |c| bernoulli(0.2 + 0.6 * f64::from(c[0])))
            .node("C", &["A"], |c| bernoulli(0.2 + 0.6 * f64::from(c[0])))
            .node("D", &["B", "C"], |c| {
                bernoulli(0.1 + 0.4 * f64::from(c[0]) + 0.4 * f64::from(c[1]))
            })
            .build(),
        "confounded" => Builder::new(binary_vars(&["Z", "T", "O"]))
            .root("Z", &[0.5, 0.5])
            .node("T", &["Z"], |c| bernoulli(0.3 + 0.4 * f64::from(c[0])))
            .node("O", &["T", "Z"], |c| {
                bernoulli(0.2 + 0.3 * f64::from(c[0]) + 0.3 * f64::from(c[1]))
            })
            .build(),
        "null" => Builder::new(binary_vars(&["Z", "T", "O"]))
            .root("Z", &[0.5, 0.5])
            .node("T", &["Z"], |c| bernoulli(0.3 + 0.4 * f64::from(c[0])))
            .node("O", &["Z"], |c| bernoulli(0.2 + 0.3 * f64::from(c[0])))
            .build(),
        "northlike" | "westlike" | "southlike" => return make_survey_scm(name),
        other => return Err(ScmError::UnknownPreset(other.to_string())),
    };
    Ok(scm)
}

/// Marginal percentages of one survey region.
struct Region {
    race_nonwhite: f64,
    sex: [f64; 2],
    age: [f64; 4],
    hhsize: [f64; 3],
    hhinc: [f64; 10],
    distance: [f64; 8],
    work: f64,
}

const NORTH: Region = Region {
    race_nonwhite: 14.14,
    sex: [46.25, 53.75],
    age: [31.40, 45.10, 20.59, 2.91],
    hhsize: [28.30, 43.70, 28.00],
    hhinc: [2.50, 3.25, 2.53, 2.69, 7.37, 7.83, 11.81, 16.91, 21.83, 23.27],
    distance: [12.14, 12.95, 12.71, 16.19, 15.94, 18.89, 8.77, 2.41],
    work: 28.75,
};

const WEST: Region = Region {
    race_nonwhite: 27.88,
    sex: [41.92, 58.08],
    age: [32.88, 52.01, 14.47, 0.65],
    hhsize: [22.10, 49.40, 28.50],
    hhinc: [5.39, 4.85, 3.36, 2.75, 8.50, 7.88, 9.01, 11.46, 22.71, 24.09],
    distance: [11.65, 12.51, 12.95, 20.51, 22.06, 9.95, 7.67, 2.71],
    work: 28.68,
};

const SOUTH: Region = Region {
    race_nonwhite: 63.84,
    sex: [37.28, 62.72],
    age: [26.88, 37.12, 31.37, 4.63],
    hhsize: [23.90, 28.96, 47.14],
    hhinc: [11.03, 10.90, 7.58, 6.54, 12.40, 7.75, 11.17, 11.25, 14.07, 7.31],
    distance: [8.57, 8.46, 11.74, 17.57, 15.74, 18.29, 16.78, 2.85],
    work: 24.20,
};

/// Mode utilities `(car, public, walk)` for a vehicle indicator and distance code.
fn mode_utilities(vehicle: i32, distance: i32) -> [f64; 3] {
    let (v, d) = (f64::from(vehicle), f64::from(distance));
    [
        -5.0 + 4.2 * v + 0.35 * d,
        -1.5 - 2.0 * v + 0.65 * d,
        4.8 - 1.0 * v - 1.3 * d,
    ]
}

fn softmax3(u: [f64; 3]) -> [f64; 3] {
    let m = u.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e = u.map(|x| (x - m).exp());
    let s: f64 = e.iter().sum();
    e.map(|x| x / s)
}

/// Survey-shaped model over the codebook variables.
///
/// Mode choice is generated sequentially so that exactly one mode is set per
/// trip: car given vehicle ownership and distance, then the second mode given
/// the first, then the remaining mode deterministically.
pub fn make_survey_scm(name: &str) -> Result<DiscreteScm> {
    let codebook = Codebook::survey();
    let mut b = Builder::new(codebook.variables().to_vec());
    let region = match name {
        "northlike" => &NORTH,
        "westlike" => &WEST,
        "southlike" => &SOUTH,
        other => return Err(ScmError::UnknownPreset(other.to_string())),
    };
    let inc_cuts = cutpoints(&region.hhinc);
    let dist_cuts = cutpoints(&region.distance);
    let size_cuts = cutpoints(&region.hhsize);
    let nonwhite = region.race_nonwhite / 100.0;

    b.root("sex", &region.sex)
        .root("race_x", &[1.0 - nonwhite, nonwhite])
        .root("age_x", &region.age)
        .root("work_purp", &[100.0 - region.work, region.work]);

    match name {
        "northlike" => {
            b.root("hhsize_x", &region.hhsize)
                .node("hhinc", &["race_x", "age_x", "hhsize_x"], |c| {
                    let shift = -1.2 * f64::from(c[0]) + 0.5 * f64::from(c[1] - 2) + 0.9 * f64::from(c[2] - 2);
                    ordered_logit(&inc_cuts, shift)
                })
                .node("hhveh_x", &["hhsize_x"], |c| {
                    bernoulli(sigmoid(0.2 + 1.2 * f64::from(c[0] - 1)))
                })
                .node("distance_x", &["work_purp"], |c| {
                    ordered_logit(&dist_cuts, 1.2 * f64::from(c[0]))
                });
        }
        "westlike" => {
            b.node("hhsize_x", &["race_x"], |c| {
                ordered_logit(&size_cuts, 0.4 * f64::from(c[0]))
            })
            .node("hhinc", &["race_x", "hhsize_x"], |c| {
                let shift = -1.8 * f64::from(c[0]) + 0.7 * f64::from(c[1] - 2);
                ordered_logit(&inc_cuts, shift)
            })
            .node("hhveh_x", &["hhinc", "hhsize_x"], |c| {
                bernoulli(sigmoid(-0.8 + 0.2 * f64::from(c[0]) + 0.9 * f64::from(c[1] - 1)))
            })
            .root("distance_x", &region.distance);
        }
        _ => {
            b.root("hhsize_x", &region.hhsize)
                .node("hhinc", &["race_x", "age_x", "hhsize_x"], |c| {
                    let shift = -1.5 * f64::from(c[0]) + 0.5 * f64::from(c[1] - 2) + 0.6 * f64::from(c[2] - 2);
                    ordered_logit(&inc_cuts, shift)
                })
                .node("hhveh_x", &["race_x", "hhinc", "hhsize_x"], |c| {
                    let x = 0.3 - 0.5 * f64::from(c[0]) + 0.15 * f64::from(c[1]) + 0.7 * f64::from(c[2] - 1);
                    bernoulli(sigmoid(x))
                })
                .node("distance_x", &["work_purp"], |c| {
                    ordered_logit(&dist_cuts, 1.2 * f64::from(c[0]))
                });
        }
    }

    b.node("Car", &["hhveh_x", "distance_x"], |c| {
        bernoulli(softmax3(mode_utilities(c[0], c[1]))[0])
    });
    if name == "southlike" {
        b.node("Walk", &["Car", "race_x", "hhveh_x", "distance_x"], |c| {
            if c[0] == 1 {
                return bernoulli(0.0);
            }
            let u = mode_utilities(c[2], c[3]);
            bernoulli(sigmoid(u[2] - u[1] - 0.8 * f64::from(c[1])))
        })
        .node("Public", &["Car", "Walk"], |c| bernoulli(f64::from(i32::from(c[0] == 0 && c[1] == 0))));
    } else {
        b.node("Public", &["Car", "hhveh_x", "distance_x"], |c| {
            if c[0] == 1 {
                return bernoulli(0.0);
            }
            let u = mode_utilities(c[1], c[2]);
            bernoulli(sigmoid(u[1] - u[2]))
        })
        .node("Walk", &["Car", "Public"], |c| bernoulli(f64::from(i32::from(c[0] == 0 && c[1] == 0))));
    }
    Ok(b.build())
}
