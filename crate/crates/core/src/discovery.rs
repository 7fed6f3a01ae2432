//! PC structure search.
//!
//! The search starts from the complete undirected graph and removes an edge
//! as soon as some conditioning set drawn from the current neighbours renders
//! its endpoints independent. Conditioning sets grow one variable per level and
//! adjacency is frozen at the start of each level (the order-independent
//! "stable" variant), so every test of a level can run in parallel. Unshielded
//! colliders are then oriented from the separating sets and the orientation is
//! propagated with Meek's four rules plus tiered background knowledge.
//!
//! All iteration happens in variable-name order, which makes the output
//! independent of the column order of the input.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::citest::{chi_square_ci, CiError, CiResult, DEFAULT_ALPHA};
use crate::dataset::CodedDataset;
use crate::graph::{GraphError, MixedGraph};

const SURVEY_KNOWLEDGE: &str = include_str!("../data/knowledge.toml");

#[derive(Debug, Error)]
pub enum DiscoveryError {
    #[error(transparent)]
    Ci(#[from] CiError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("need at least two variables, got {0}")]
    TooFewVariables(usize),
    #[error("invalid knowledge: {0}")]
    Knowledge(String),
    #[error("knowledge forbids both orientations of `{0}` -- `{1}`")]
    Contradiction(String, String),
    #[error("edge `{0}` -> `{1}` violates background knowledge")]
    Violation(String, String),
    #[error("input graph has a directed cycle")]
    Cyclic,
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = DiscoveryError> = std::result::Result<T, E>;

/// Tiered background knowledge.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Knowledge {
    /// Variables that cannot cause anything.
    #[serde(default)]
    pub sinks: BTreeSet<String>,
    /// Variables that nothing can cause.
    #[serde(default)]
    pub sources: BTreeSet<String>,
    /// Disallowed `(cause, effect)` pairs.
    #[serde(default)]
    pub forbidden: BTreeSet<(String, String)>,
    /// Orientations applied to edges the search leaves undirected.
    #[serde(default)]
    pub required: BTreeSet<(String, String)>,
}

impl Knowledge {
    /// The shipped mode-choice knowledge: modes are sinks, gender, race and age are
    /// sources, plus the household-size and income exclusions.
    pub fn survey() -> Self {
        Knowledge::from_toml_str(SURVEY_KNOWLEDGE).expect("shipped knowledge is valid")
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let k: Knowledge =
            toml::from_str(text).map_err(|e| DiscoveryError::Knowledge(e.to_string()))?;
        k.validate()?;
        Ok(k)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| DiscoveryError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Knowledge::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(both) = self.sinks.intersection(&self.sources).next() {
            return Err(DiscoveryError::Knowledge(format!(
                "`{both}` is both a sink and a source"
            )));
        }
        for (a, b) in &self.required {
            if !self.allows(a, b) {
                return Err(DiscoveryError::Knowledge(format!(
                    "required `{a}` -> `{b}` is forbidden"
                )));
            }
        }
        Ok(())
    }

    /// Whether an edge `from -> to` is permitted.
    pub fn allows(&self, from: &str, to: &str) -> bool {
        !self.sinks.contains(from)
            && !self.sources.contains(to)
            && !self.forbidden.contains(&(from.to_string(), to.to_string()))
    }

    pub fn is_empty(&self) -> bool {
        self.sinks.is_empty()
            && self.sources.is_empty()
            && self.forbidden.is_empty()
            && self.required.is_empty()
    }
}

/// Separating sets found during the skeleton search, keyed by unordered name pair.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SepSets {
    map: BTreeMap<(String, String), BTreeSet<String>>,
}

impl SepSets {
    fn key(a: &str, b: &str) -> (String, String) {
        if a <= b {
            (a.to_string(), b.to_string())
        } else {
            (b.to_string(), a.to_string())
        }
    }

    pub fn insert<S: AsRef<str>>(&mut self, a: &str, b: &str, set: &[S]) {
        self.map.insert(
            SepSets::key(a, b),
            set.iter().map(|s| s.as_ref().to_string()).collect(),
        );
    }

    pub fn get(&self, a: &str, b: &str) -> Option<&BTreeSet<String>> {
        self.map.get(&SepSets::key(a, b))
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(String, String), &BTreeSet<String>)> {
        self.map.iter()
    }
}

/// One conditional-independence test run by the skeleton search.
#[derive(Debug, Clone, PartialEq)]
pub struct CiRecord {
    pub level: usize,
    pub x: String,
    pub y: String,
    pub conditioning: Vec<String>,
    pub result: CiResult,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PcOptions {
    pub alpha: f64,
    /// Largest conditioning-set size tried; `None` means unlimited.
    pub max_depth: Option<usize>,
}

impl Default for PcOptions {
    fn default() -> Self {
        PcOptions {
            alpha: DEFAULT_ALPHA,
            max_depth: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SkeletonSearch {
    pub graph: MixedGraph,
    pub sepsets: SepSets,
    pub tests: Vec<CiRecord>,
}

/// Column indices of `data` sorted by variable name.
fn name_order(data: &CodedDataset) -> Vec<usize> {
    let mut order: Vec<usize> = (0..data.n_cols()).collect();
    order.sort_by(|&a, &b| data.variable(a).name.cmp(&data.variable(b).name));
    order
}

/// Lexicographic `k`-subsets of `items`.
fn combinations(items: &[usize], k: usize) -> Vec<Vec<usize>> {
    fn go(items: &[usize], k: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..items.len() {
            if items.len() - i < k - cur.len() {
                break;
            }
            cur.push(items[i]);
            go(items, k, i + 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(items, k, 0, &mut Vec::with_capacity(k), &mut out);
    out
}

/// Skeleton search over nodes in name order; the returned graph uses that order.
fn skeleton_sorted(
    data: &CodedDataset,
    options: &PcOptions,
    knowledge: &Knowledge,
) -> Result<SkeletonSearch> {
    if data.n_cols() < 2 {
        return Err(DiscoveryError::TooFewVariables(data.n_cols()));
    }
    if !(options.alpha > 0.0 && options.alpha < 1.0) {
        return Err(CiError::Alpha(options.alpha).into());
    }
    let order = name_order(data);
    let names: Vec<String> = order.iter().map(|&c| data.variable(c).name.clone()).collect();
    let n = names.len();
    let mut graph = MixedGraph::complete_undirected(&names)?;
    for i in 0..n {
        for j in i + 1..n {
            if !knowledge.allows(&names[i], &names[j]) && !knowledge.allows(&names[j], &names[i]) {
                graph.remove_edge(i, j);
            }
        }
    }

    let mut sepsets = SepSets::default();
    let mut tests = Vec::new();
    let mut level = 0;
    loop {
        if options.max_depth.is_some_and(|d| level > d) {
            break;
        }
        let frozen: Vec<Vec<usize>> = (0..n).map(|v| graph.adjacents(v)).collect();
        let pairs: Vec<(usize, usize)> = graph.skeleton().into_iter().collect();
        let testable = pairs
            .iter()
            .any(|&(i, j)| frozen[i].len() > level || frozen[j].len() > level);
        if !testable {
            break;
        }

        let outcomes = pairs
            .par_iter()
            .map(|&(i, j)| -> Result<(Option<Vec<usize>>, Vec<CiRecord>)> {
                let mut records = Vec::new();
                let mut tried = BTreeSet::new();
                for (own, other) in [(i, j), (j, i)] {
                    let candidates: Vec<usize> =
                        frozen[own].iter().copied().filter(|&v| v != other).collect();
                    if candidates.len() < level {
                        continue;
                    }
                    for subset in combinations(&candidates, level) {
                        if !tried.insert(subset.clone()) {
                            continue;
                        }
                        let cond: Vec<usize> = subset.iter().map(|&v| order[v]).collect();
                        let result = chi_square_ci(data, order[i], order[j], &cond, options.alpha)?;
                        records.push(CiRecord {
                            level,
                            x: names[i].clone(),
                            y: names[j].clone(),
                            conditioning: subset.iter().map(|&v| names[v].clone()).collect(),
                            result,
                        });
                        if result.informative && result.independent {
                            return Ok((Some(subset), records));
                        }
                    }
                }
                Ok((None, records))
            })
            .collect::<Result<Vec<_>>>()?;

        for (&(i, j), (separator, records)) in pairs.iter().zip(outcomes) {
            tests.extend(records);
            if let Some(set) = separator {
                graph.remove_edge(i, j);
                let set_names: Vec<&str> = set.iter().map(|&v| names[v].as_str()).collect();
                sepsets.insert(&names[i], &names[j], &set_names);
            }
        }
        level += 1;
    }
    Ok(SkeletonSearch {
        graph,
        sepsets,
        tests,
    })
}

/// Undirected skeleton and separating sets, with nodes in the dataset's column order.
pub fn pc_skeleton(
    data: &CodedDataset,
    alpha: f64,
    knowledge: &Knowledge,
) -> Result<(MixedGraph, SepSets)> {
    let options = PcOptions {
        alpha,
        ..PcOptions::default()
    };
    let search = pc_skeleton_traced(data, &options, knowledge)?;
    Ok((search.graph, search.sepsets))
}

/// [`pc_skeleton`] with explicit options, also returning every test performed.
pub fn pc_skeleton_traced(
    data: &CodedDataset,
    options: &PcOptions,
    knowledge: &Knowledge,
) -> Result<SkeletonSearch> {
    let mut search = skeleton_sorted(data, options, knowledge)?;
    search.graph = search.graph.reordered(&data.column_names())?;
    Ok(search)
}

/// Orients every unshielded triple `a -- b -- c` into `a -> b <- c` when `b` is
/// not in the separating set of `a` and `c`.
pub fn orient_colliders(skeleton: &MixedGraph, sepsets: &SepSets) -> MixedGraph {
    orient_colliders_with(skeleton, sepsets, &Knowledge::default())
}

/// Triples whose endpoints have no recorded separating set (for example pairs
/// excluded by knowledge before testing) are left alone, as are colliders
/// that knowledge forbids or that would reverse an edge already oriented.
pub fn orient_colliders_with(
    skeleton: &MixedGraph,
    sepsets: &SepSets,
    knowledge: &Knowledge,
) -> MixedGraph {
    let mut g = skeleton.clone();
    let names = skeleton.names();
    for mid in 0..skeleton.n_nodes() {
        let adj = skeleton.adjacents(mid);
        for (k, &a) in adj.iter().enumerate() {
            for &c in &adj[k + 1..] {
                if skeleton.is_adjacent(a, c) {
                    continue;
                }
                let Some(sep) = sepsets.get(&names[a], &names[c]) else {
                    continue;
                };
                if sep.contains(&names[mid]) {
                    continue;
                }
                let into_mid = |g: &MixedGraph, x: usize| {
                    g.has_directed(x, mid) || (g.has_undirected(x, mid) && knowledge.allows(&names[x], &names[mid]))
                };
                if into_mid(&g, a) && into_mid(&g, c) {
                    g.orient(a, mid).expect("adjacent");
                    g.orient(c, mid).expect("adjacent");
                }
            }
        }
    }
    g
}

fn would_close_cycle(g: &MixedGraph, from: usize, to: usize) -> bool {
    g.has_directed_path(to, from)
}

fn would_add_collider(g: &MixedGraph, from: usize, to: usize) -> bool {
    g.parents(to)
        .into_iter()
        .any(|w| w != from && !g.is_adjacent(w, from))
}

/// Whether one of Meek's rules compels `x -> y` for the undirected edge `x -- y`.
fn meek_compels(g: &MixedGraph, x: usize, y: usize) -> bool {
    let n = g.n_nodes();
    // R1: w -> x -- y, w and y non-adjacent.
    if g.parents(x).into_iter().any(|w| !g.is_adjacent(w, y)) {
        return true;
    }
    // R2: x -> w -> y.
    if g.children(x).into_iter().any(|w| g.has_directed(w, y)) {
        return true;
    }
    // R3: x -- w1 -> y, x -- w2 -> y, w1 and w2 non-adjacent.
    let spouses: Vec<usize> = g
        .undirected_neighbors(x)
        .into_iter()
        .filter(|&w| g.has_directed(w, y))
        .collect();
    for (k, &w1) in spouses.iter().enumerate() {
        if spouses[k + 1..].iter().any(|&w2| !g.is_adjacent(w1, w2)) {
            return true;
        }
    }
    // R4: x -- d -> c -> y, x adjacent to c, d and y non-adjacent.
    for d in g.undirected_neighbors(x) {
        if d == y || g.is_adjacent(d, y) {
            continue;
        }
        for c in 0..n {
            if c != x && c != y && g.has_directed(d, c) && g.has_directed(c, y) && g.is_adjacent(x, c) {
                return true;
            }
        }
    }
    false
}

/// Propagates orientations to a fixpoint.
///
/// Undirected edges with one orientation excluded by knowledge are oriented
/// the other way; then Meek's rules R1 to R4 are applied, never against
/// knowledge and never when the result would close a directed cycle or add an
/// unshielded collider.
pub fn apply_meek_rules(g: &MixedGraph, knowledge: &Knowledge) -> Result<MixedGraph> {
    if !g.is_acyclic() {
        return Err(DiscoveryError::Cyclic);
    }
    let names = g.names();
    for (a, b) in g.directed_edges() {
        if !knowledge.allows(&names[a], &names[b]) {
            return Err(DiscoveryError::Violation(names[a].clone(), names[b].clone()));
        }
    }
    for (a, b) in g.undirected_edges() {
        if !knowledge.allows(&names[a], &names[b]) && !knowledge.allows(&names[b], &names[a]) {
            return Err(DiscoveryError::Contradiction(names[a].clone(), names[b].clone()));
        }
    }

    let mut g = g.clone();
    loop {
        let mut changed = false;
        for (a, b) in g.undirected_edges() {
            let forced = if !knowledge.allows(&names[a], &names[b]) {
                Some((b, a))
            } else if !knowledge.allows(&names[b], &names[a]) {
                Some((a, b))
            } else {
                None
            };
            if let Some((from, to)) = forced {
                if would_close_cycle(&g, from, to) {
                    return Err(DiscoveryError::Cyclic);
                }
                g.orient(from, to)?;
                changed = true;
            }
        }
        for (a, b) in g.undirected_edges() {
            for (x, y) in [(a, b), (b, a)] {
                if !g.has_undirected(x, y) {
                    break;
                }
                if meek_compels(&g, x, y)
                    && knowledge.allows(&names[x], &names[y])
                    && !would_close_cycle(&g, x, y)
                    && !would_add_collider(&g, x, y)
                {
                    g.orient(x, y)?;
                    changed = true;
                }
            }
        }
        if !changed {
            return Ok(g);
        }
    }
}

/// Result of a full structure search.
#[derive(Debug, Clone)]
pub struct Discovery {
    /// Partially directed graph, nodes in the dataset's column order.
    pub graph: MixedGraph,
    pub sepsets: SepSets,
    pub tests: Vec<CiRecord>,
    /// Edges oriented from `knowledge.required` after propagation stalled.
    pub required_applied: Vec<(String, String)>,
}

impl Discovery {
    /// Edges still undirected in the final graph, by name.
    pub fn residual_undirected(&self) -> Vec<(String, String)> {
        self.graph
            .undirected_edges()
            .into_iter()
            .map(|(a, b)| (self.graph.name(a).to_string(), self.graph.name(b).to_string()))
            .collect()
    }
}

/// Skeleton search, collider orientation, propagation, then the required
/// orientations for edges that remain undirected (followed by another
/// propagation pass).
pub fn discover(data: &CodedDataset, options: &PcOptions, knowledge: &Knowledge) -> Result<Discovery> {
    knowledge.validate()?;
    let search = skeleton_sorted(data, options, knowledge)?;
    let oriented = orient_colliders_with(&search.graph, &search.sepsets, knowledge);
    let mut g = apply_meek_rules(&oriented, knowledge)?;

    let mut required_applied = Vec::new();
    for (a, b) in &knowledge.required {
        let (Some(ia), Some(ib)) = (g.index_of(a), g.index_of(b)) else {
            continue;
        };
        if g.has_undirected(ia, ib) && !would_close_cycle(&g, ia, ib) {
            g.orient(ia, ib)?;
            required_applied.push((a.clone(), b.clone()));
        }
    }
    if !required_applied.is_empty() {
        g = apply_meek_rules(&g, knowledge)?;
    }

    Ok(Discovery {
        graph: g.reordered(&data.column_names())?,
        sepsets: search.sepsets,
        tests: search.tests,
        required_applied,
    })
}

/// Plain-text account of a search: separating sets, every test, and a warning
/// block for edges left undirected.
pub fn discovery_report(discovery: &Discovery, provenance: &str) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# {provenance}");
    let _ = writeln!(out, "[separating sets]");
    for ((a, b), set) in discovery.sepsets.iter() {
        let members: Vec<&str> = set.iter().map(String::as_str).collect();
        let _ = writeln!(out, "{a} _||_ {b} | {{{}}}", members.join(", "));
    }
    let _ = writeln!(out);
    let _ = writeln!(out, "[tests] level,x,y,conditioning,statistic,dof,p_value,informative,independent");
    for t in &discovery.tests {
        let _ = writeln!(
            out,
            "{},{},{},{{{}}},{:.6},{},{:.6e},{},{}",
            t.level,
            t.x,
            t.y,
            t.conditioning.join(" "),
            t.result.statistic,
            t.result.dof,
            t.result.p_value,
            t.result.informative,
            t.result.independent
        );
    }
    let _ = writeln!(out);
    if !discovery.required_applied.is_empty() {
        let _ = writeln!(out, "[oriented from required knowledge]");
        for (a, b) in &discovery.required_applied {
            let _ = writeln!(out, "{a} -> {b}");
        }
        let _ = writeln!(out);
    }
    let residual = discovery.residual_undirected();
    let _ = writeln!(out, "[warnings]");
    if residual.is_empty() {
        let _ = writeln!(out, "none");
    } else {
        for (a, b) in residual {
            let _ = writeln!(
                out,
                "undirected edge {a} -- {b}: orientation not identified; add a required orientation to resolve"
            );
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph(names: &[&str], directed: &[(&str, &str)], undirected: &[(&str, &str)]) -> MixedGraph {
        MixedGraph::from_edges(names, directed, undirected).unwrap()
    }

    #[test]
    fn survey_knowledge_content() {
        let k = Knowledge::survey();
        assert!(k.sinks.contains("Walk"));
        assert!(k.sources.contains("race_x"));
        assert!(!k.allows("Car", "hhinc"));
        assert!(!k.allows("hhinc", "sex"));
        assert!(!k.allows("hhveh_x", "hhinc"));
        assert!(k.allows("hhinc", "hhveh_x"));
        assert!(!k.allows("age_x", "hhsize_x"));
        assert!(k.required.contains(&("work_purp".to_string(), "distance_x".to_string())));
    }

    #[test]
    fn knowledge_validation() {
        assert!(Knowledge::from_toml_str("sinks = [\"A\"]\nsources = [\"A\"]").is_err());
        assert!(Knowledge::from_toml_str("sinks = [\"A\"]\nrequired = [[\"A\", \"B\"]]").is_err());
        assert!(Knowledge::from_toml_str("").unwrap().is_empty());
    }

    #[test]
    fn combinations_are_lexicographic() {
        assert_eq!(
            combinations(&[1, 3, 5], 2),
            vec![vec![1, 3], vec![1, 5], vec![3, 5]]
        );
        assert_eq!(combinations(&[1, 2], 0), vec![Vec::<usize>::new()]);
        assert!(combinations(&[1], 2).is_empty());
    }

    #[test]
    fn collider_from_empty_sepset() {
        let skel = graph(&["A", "B", "C"], &[], &[("A", "C"), ("B", "C")]);
        let mut sep = SepSets::default();
        sep.insert::<&str>("A", "B", &[]);
        let g = orient_colliders(&skel, &sep);
        assert_eq!(g, graph(&["A", "B", "C"], &[("A", "C"), ("B", "C")], &[]));
    }

    #[test]
    fn no_collider_when_middle_separates() {
        let skel = graph(&["A", "B", "C"], &[], &[("A", "B"), ("B", "C")]);
        let mut sep = SepSets::default();
        sep.insert("A", "C", &["B"]);
        assert_eq!(orient_colliders(&skel, &sep), skel);
    }

    #[test]
    fn shielded_triangle_untouched() {
        let skel = graph(&["A", "B", "C"], &[], &[("A", "B"), ("B", "C"), ("A", "C")]);
        assert_eq!(orient_colliders(&skel, &SepSets::default()), skel);
        assert_eq!(apply_meek_rules(&skel, &Knowledge::default()).unwrap(), skel);
    }

    #[test]
    fn rule_one_propagates() {
        let g = graph(&["A", "B", "C"], &[("A", "B")], &[("B", "C")]);
        let out = apply_meek_rules(&g, &Knowledge::default()).unwrap();
        assert_eq!(out, graph(&["A", "B", "C"], &[("A", "B"), ("B", "C")], &[]));
    }

    #[test]
    fn rule_two_avoids_cycle() {
        let g = graph(&["A", "B", "C"], &[("A", "B"), ("B", "C")], &[("A", "C")]);
        let out = apply_meek_rules(&g, &Knowledge::default()).unwrap();
        assert!(out.has_directed(0, 2));
    }

    #[test]
    fn rule_three() {
        // A -- C, A -- D, A -- B, C -> B <- D, C and D non-adjacent.
        let g = graph(
            &["A", "B", "C", "D"],
            &[("C", "B"), ("D", "B")],
            &[("A", "B"), ("A", "C"), ("A", "D")],
        );
        let out = apply_meek_rules(&g, &Knowledge::default()).unwrap();
        assert!(out.has_directed(0, 1));
        assert!(out.has_undirected(0, 2) && out.has_undirected(0, 3));
    }

    #[test]
    fn rule_four() {
        // A -- B, A -- D, A -- C, D -> C -> B, B and D non-adjacent.
        let g = graph(
            &["A", "B", "C", "D"],
            &[("D", "C"), ("C", "B")],
            &[("A", "B"), ("A", "C"), ("A", "D")],
        );
        assert!(meek_compels(&g, 0, 1));
        let out = apply_meek_rules(&g, &Knowledge::default()).unwrap();
        assert!(out.has_directed(0, 1));
    }

    #[test]
    fn sink_knowledge_orients_into_mode() {
        let g = graph(&["hhveh_x", "Car"], &[], &[("hhveh_x", "Car")]);
        let out = apply_meek_rules(&g, &Knowledge::survey()).unwrap();
        assert!(out.has_directed(0, 1));
    }

    #[test]
    fn source_knowledge_then_rule_one() {
        let g = graph(&["A", "B", "C"], &[], &[("A", "B"), ("B", "C")]);
        let k = Knowledge {
            sources: ["A".to_string()].into_iter().collect(),
            ..Knowledge::default()
        };
        let out = apply_meek_rules(&g, &k).unwrap();
        assert_eq!(out, graph(&["A", "B", "C"], &[("A", "B"), ("B", "C")], &[]));
    }

    #[test]
    fn contradictions_are_errors() {
        let g = graph(&["Car", "Walk"], &[], &[("Car", "Walk")]);
        assert!(matches!(
            apply_meek_rules(&g, &Knowledge::survey()),
            Err(DiscoveryError::Contradiction(_, _))
        ));
        let bad = graph(&["Car", "hhinc"], &[("Car", "hhinc")], &[]);
        assert!(matches!(
            apply_meek_rules(&bad, &Knowledge::survey()),
            Err(DiscoveryError::Violation(_, _))
        ));
    }

    #[test]
    fn both_way_forbidden_pairs_start_absent() {
        use crate::dataset::Variable;
        let rows: Vec<Vec<i32>> = (0..400).map(|i| vec![i % 2, i % 2, (i / 2) % 2]).collect();
        let data = CodedDataset::new(
            vec![
                Variable::with_codes("Car", 0, 1),
                Variable::with_codes("Walk", 0, 1),
                Variable::with_codes("hhveh_x", 0, 1),
            ],
            rows,
        )
        .unwrap();
        let (g, sep) = pc_skeleton(&data, 0.05, &Knowledge::survey()).unwrap();
        assert!(!g.is_adjacent(0, 1));
        assert!(sep.get("Car", "Walk").is_none());
    }
}
