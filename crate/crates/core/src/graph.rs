//! Mixed graphs with directed and undirected edges.
//!
//! [`MixedGraph`] covers DAGs, CPDAGs and the intermediate graphs produced
//! during structure search. Nodes are addressed by index; the index order is
//! the insertion order of node names and drives every deterministic iteration.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::ops::Deref;

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("node index {0} out of range")]
    NodeOutOfRange(usize),
    #[error("duplicate node `{0}`")]
    DuplicateNode(String),
    #[error("self-loop on `{0}`")]
    SelfLoop(String),
    #[error("`{0}` and `{1}` are already adjacent")]
    AlreadyAdjacent(String, String),
    #[error("`{0}` and `{1}` are not adjacent")]
    NotAdjacent(String, String),
    #[error("directed cycle: {}", .0.join(" -> "))]
    Cycle(Vec<String>),
    #[error("graph has undirected edge `{0}` -- `{1}`")]
    Undirected(String, String),
    #[error("node sets overlap at `{0}`")]
    Overlap(String),
    #[error("empty node set")]
    EmptySet,
    #[error("path endpoint `{0}` is in the conditioning set")]
    EndpointConditioned(String),
    #[error("path needs at least two nodes")]
    ShortPath,
    #[error("DOT line {line}: {message}")]
    Dot { line: usize, message: String },
}

pub type Result<T, E = GraphError> = std::result::Result<T, E>;

/// Edge mark stored at `adj[i][j]`, read from `i`'s side.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Mark {
    None,
    /// `i -> j`
    Out,
    /// `j -> i`
    In,
    Undirected,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MixedGraph {
    names: Vec<String>,
    adj: Vec<Vec<Mark>>,
}

impl MixedGraph {
    /// Edgeless graph over `names`.
    pub fn new<S: AsRef<str>>(names: &[S]) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for n in names {
            if !seen.insert(n.as_ref()) {
                return Err(GraphError::DuplicateNode(n.as_ref().to_string()));
            }
        }
        let n = names.len();
        Ok(MixedGraph {
            names: names.iter().map(|s| s.as_ref().to_string()).collect(),
            adj: vec![vec![Mark::None; n]; n],
        })
    }

    /// Complete undirected graph over `names`.
    pub fn complete_undirected<S: AsRef<str>>(names: &[S]) -> Result<Self> {
        let mut g = MixedGraph::new(names)?;
        for i in 0..g.n_nodes() {
            for j in i + 1..g.n_nodes() {
                g.set(i, j, Mark::Undirected);
            }
        }
        Ok(g)
    }

    /// Builds a graph from named directed and undirected edge lists.
    pub fn from_edges<S: AsRef<str>>(
        names: &[S],
        directed: &[(&str, &str)],
        undirected: &[(&str, &str)],
    ) -> Result<Self> {
        let mut g = MixedGraph::new(names)?;
        for (a, b) in directed {
            g.add_directed(g.require(a)?, g.require(b)?)?;
        }
        for (a, b) in undirected {
            g.add_undirected(g.require(a)?, g.require(b)?)?;
        }
        Ok(g)
    }

    pub fn n_nodes(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, v: usize) -> &str {
        &self.names[v]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn require(&self, name: &str) -> Result<usize> {
        self.index_of(name)
            .ok_or_else(|| GraphError::UnknownNode(name.to_string()))
    }

    fn check(&self, v: usize) -> Result<()> {
        if v < self.n_nodes() {
            Ok(())
        } else {
            Err(GraphError::NodeOutOfRange(v))
        }
    }

    fn set(&mut self, a: usize, b: usize, mark: Mark) {
        let back = match mark {
            Mark::Out => Mark::In,
            Mark::In => Mark::Out,
            m => m,
        };
        self.adj[a][b] = mark;
        self.adj[b][a] = back;
    }

    fn add(&mut self, a: usize, b: usize, mark: Mark) -> Result<()> {
        self.check(a)?;
        self.check(b)?;
        if a == b {
            return Err(GraphError::SelfLoop(self.names[a].clone()));
        }
        if self.is_adjacent(a, b) {
            return Err(GraphError::AlreadyAdjacent(
                self.names[a].clone(),
                self.names[b].clone(),
            ));
        }
        self.set(a, b, mark);
        Ok(())
    }

    pub fn add_directed(&mut self, from: usize, to: usize) -> Result<()> {
        self.add(from, to, Mark::Out)
    }

    pub fn add_undirected(&mut self, a: usize, b: usize) -> Result<()> {
        self.add(a, b, Mark::Undirected)
    }

    pub fn remove_edge(&mut self, a: usize, b: usize) {
        self.set(a, b, Mark::None);
    }

    /// Turns the existing adjacency between `from` and `to` into `from -> to`.
    pub fn orient(&mut self, from: usize, to: usize) -> Result<()> {
        if !self.is_adjacent(from, to) {
            return Err(GraphError::NotAdjacent(
                self.names[from].clone(),
                self.names[to].clone(),
            ));
        }
        self.set(from, to, Mark::Out);
        Ok(())
    }

    /// Turns the existing adjacency between `a` and `b` into `a -- b`.
    pub fn unorient(&mut self, a: usize, b: usize) {
        if self.is_adjacent(a, b) {
            self.set(a, b, Mark::Undirected);
        }
    }

    pub fn is_adjacent(&self, a: usize, b: usize) -> bool {
        self.adj[a][b] != Mark::None
    }

    pub fn has_directed(&self, from: usize, to: usize) -> bool {
        self.adj[from][to] == Mark::Out
    }

    pub fn has_undirected(&self, a: usize, b: usize) -> bool {
        self.adj[a][b] == Mark::Undirected
    }

    fn with_mark(&self, v: usize, mark: Mark) -> Vec<usize> {
        (0..self.n_nodes())
            .filter(|&u| self.adj[v][u] == mark)
            .collect()
    }

    /// `{u : u -> v}`, ascending.
    pub fn parents(&self, v: usize) -> Vec<usize> {
        self.with_mark(v, Mark::In)
    }

    pub fn children(&self, v: usize) -> Vec<usize> {
        self.with_mark(v, Mark::Out)
    }

    pub fn undirected_neighbors(&self, v: usize) -> Vec<usize> {
        self.with_mark(v, Mark::Undirected)
    }

    /// Every node sharing an edge of any kind with `v`.
    pub fn adjacents(&self, v: usize) -> Vec<usize> {
        (0..self.n_nodes())
            .filter(|&u| self.is_adjacent(v, u))
            .collect()
    }

    /// Parent names of the node called `name`.
    pub fn parents_of(&self, name: &str) -> Result<BTreeSet<String>> {
        let v = self.require(name)?;
        Ok(self
            .parents(v)
            .into_iter()
            .map(|u| self.names[u].clone())
            .collect())
    }

    /// `(from, to)` pairs ordered by `from`, then `to`.
    pub fn directed_edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.n_nodes() {
            for j in 0..self.n_nodes() {
                if self.adj[i][j] == Mark::Out {
                    out.push((i, j));
                }
            }
        }
        out
    }

    /// `(a, b)` pairs with `a < b`.
    pub fn undirected_edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.n_nodes() {
            for j in i + 1..self.n_nodes() {
                if self.adj[i][j] == Mark::Undirected {
                    out.push((i, j));
                }
            }
        }
        out
    }

    /// Adjacent pairs `(a, b)` with `a < b`, ignoring orientation.
    pub fn skeleton(&self) -> BTreeSet<(usize, usize)> {
        let mut out = BTreeSet::new();
        for i in 0..self.n_nodes() {
            for j in i + 1..self.n_nodes() {
                if self.is_adjacent(i, j) {
                    out.insert((i, j));
                }
            }
        }
        out
    }

    pub fn edge_count(&self) -> usize {
        self.skeleton().len()
    }

    /// Named edges, independent of node order: (directed, undirected with sorted endpoints).
    pub fn named_edges(&self) -> (BTreeSet<(String, String)>, BTreeSet<(String, String)>) {
        let directed = self
            .directed_edges()
            .into_iter()
            .map(|(a, b)| (self.names[a].clone(), self.names[b].clone()))
            .collect();
        let undirected = self
            .undirected_edges()
            .into_iter()
            .map(|(a, b)| {
                let (x, y) = (self.names[a].clone(), self.names[b].clone());
                if x <= y {
                    (x, y)
                } else {
                    (y, x)
                }
            })
            .collect();
        (directed, undirected)
    }

    /// Same nodes and edges, compared by name.
    pub fn same_structure(&self, other: &MixedGraph) -> bool {
        let mine: BTreeSet<&String> = self.names.iter().collect();
        let theirs: BTreeSet<&String> = other.names.iter().collect();
        mine == theirs && self.named_edges() == other.named_edges()
    }

    /// The same graph with nodes re-indexed in the order of `names`.
    pub fn reordered<S: AsRef<str>>(&self, names: &[S]) -> Result<Self> {
        let map = names
            .iter()
            .map(|n| self.require(n.as_ref()))
            .collect::<Result<Vec<_>>>()?;
        if map.len() != self.n_nodes() {
            return Err(GraphError::UnknownNode(format!(
                "reordering lists {} of {} nodes",
                map.len(),
                self.n_nodes()
            )));
        }
        let mut g = MixedGraph::new(names)?;
        for (i, &oi) in map.iter().enumerate() {
            for (j, &oj) in map.iter().enumerate() {
                g.adj[i][j] = self.adj[oi][oj];
            }
        }
        Ok(g)
    }

    /// True iff the directed part has no directed cycle.
    pub fn is_acyclic(&self) -> bool {
        self.find_cycle().is_none()
    }

    /// Some directed cycle, listed from its first node back to that node.
    pub fn find_cycle(&self) -> Option<Vec<usize>> {
        #[derive(Clone, Copy, PartialEq)]
        enum State {
            New,
            Active,
            Done,
        }
        fn visit(
            g: &MixedGraph,
            v: usize,
            state: &mut [State],
            stack: &mut Vec<usize>,
        ) -> Option<Vec<usize>> {
            state[v] = State::Active;
            stack.push(v);
            for c in g.children(v) {
                match state[c] {
                    State::Active => {
                        let start = stack.iter().position(|&s| s == c).unwrap();
                        let mut cycle = stack[start..].to_vec();
                        cycle.push(c);
                        return Some(cycle);
                    }
                    State::New => {
                        if let Some(cycle) = visit(g, c, state, stack) {
                            return Some(cycle);
                        }
                    }
                    State::Done => {}
                }
            }
            stack.pop();
            state[v] = State::Done;
            None
        }
        let mut state = vec![State::New; self.n_nodes()];
        for v in 0..self.n_nodes() {
            if state[v] == State::New {
                let mut stack = Vec::new();
                if let Some(cycle) = visit(self, v, &mut state, &mut stack) {
                    return Some(cycle);
                }
            }
        }
        None
    }

    /// Nodes reachable from `v` along directed edges, excluding `v` unless on a cycle.
    pub fn descendants(&self, v: usize) -> BTreeSet<usize> {
        self.reach(v, |g, u| g.children(u))
    }

    pub fn ancestors(&self, v: usize) -> BTreeSet<usize> {
        self.reach(v, |g, u| g.parents(u))
    }

    fn reach(&self, v: usize, step: impl Fn(&Self, usize) -> Vec<usize>) -> BTreeSet<usize> {
        let mut seen = BTreeSet::new();
        let mut stack = step(self, v);
        while let Some(u) = stack.pop() {
            if seen.insert(u) {
                stack.extend(step(self, u));
            }
        }
        seen
    }

    /// Whether a directed path `from -> ... -> to` of length ≥ 1 exists.
    pub fn has_directed_path(&self, from: usize, to: usize) -> bool {
        self.descendants(from).contains(&to)
    }

    /// DOT rendering: node declarations in index order, then directed edges
    /// as `a -> b;` and undirected edges as `a -> b [dir=none];`.
    pub fn to_dot(&self, comment: Option<&str>) -> String {
        let mut out = String::new();
        if let Some(c) = comment {
            let _ = writeln!(out, "// {c}");
        }
        out.push_str("digraph G {\n");
        for n in &self.names {
            let _ = writeln!(out, "  {};", dot_id(n));
        }
        let mut edges: Vec<(usize, usize, bool)> = self
            .directed_edges()
            .into_iter()
            .map(|(a, b)| (a, b, true))
            .chain(self.undirected_edges().into_iter().map(|(a, b)| (a, b, false)))
            .collect();
        edges.sort_unstable();
        for (a, b, directed) in edges {
            let attr = if directed { "" } else { " [dir=none]" };
            let _ = writeln!(out, "  {} -> {}{};", dot_id(&self.names[a]), dot_id(&self.names[b]), attr);
        }
        out.push_str("}\n");
        out
    }

    /// Parses the DOT subset written by [`MixedGraph::to_dot`].
    pub fn from_dot(text: &str) -> Result<Self> {
        let mut names: Vec<String> = Vec::new();
        let mut edges: Vec<(String, String, bool, usize)> = Vec::new();
        let add_name = |names: &mut Vec<String>, n: &str| {
            if !names.iter().any(|m| m == n) {
                names.push(n.to_string());
            }
        };
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim();
            if line.is_empty()
                || line.starts_with("//")
                || line.starts_with('#')
                || line == "}"
                || line.starts_with("digraph")
            {
                continue;
            }
            let stmt = line.strip_suffix(';').unwrap_or(line).trim();
            let dot_err = |message: &str| GraphError::Dot {
                line: line_no,
                message: message.to_string(),
            };
            if let Some((lhs, rhs)) = stmt.split_once("->") {
                let (rhs, attrs) = match rhs.find('[') {
                    Some(p) => (&rhs[..p], rhs[p..].trim()),
                    None => (rhs, ""),
                };
                let undirected = match attrs {
                    "" => false,
                    a if a.replace(' ', "") == "[dir=none]" => true,
                    _ => return Err(dot_err("unsupported edge attributes")),
                };
                let a = parse_dot_id(lhs.trim()).ok_or_else(|| dot_err("bad node id"))?;
                let b = parse_dot_id(rhs.trim()).ok_or_else(|| dot_err("bad node id"))?;
                add_name(&mut names, &a);
                add_name(&mut names, &b);
                edges.push((a, b, !undirected, line_no));
            } else {
                let n = parse_dot_id(stmt).ok_or_else(|| dot_err("bad node id"))?;
                add_name(&mut names, &n);
            }
        }
        let mut g = MixedGraph::new(&names)?;
        for (a, b, directed, line) in edges {
            let (ia, ib) = (g.require(&a)?, g.require(&b)?);
            let res = if directed {
                g.add_directed(ia, ib)
            } else {
                g.add_undirected(ia, ib)
            };
            res.map_err(|e| GraphError::Dot {
                line,
                message: e.to_string(),
            })?;
        }
        Ok(g)
    }
}

fn is_plain_id(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn dot_id(name: &str) -> String {
    if is_plain_id(name) {
        name.to_string()
    } else {
        format!("\"{}\"", name.replace('\\', "\\\\").replace('"', "\\\""))
    }
}

fn parse_dot_id(s: &str) -> Option<String> {
    if let Some(inner) = s.strip_prefix('"').and_then(|r| r.strip_suffix('"')) {
        Some(inner.replace("\\\"", "\"").replace("\\\\", "\\"))
    } else if is_plain_id(s) {
        Some(s.to_string())
    } else {
        None
    }
}

/// A [`MixedGraph`] with only directed edges and no directed cycle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dag(MixedGraph);

impl Dag {
    pub fn new(graph: MixedGraph) -> Result<Self> {
        if let Some(&(a, b)) = graph.undirected_edges().first() {
            return Err(GraphError::Undirected(
                graph.names[a].clone(),
                graph.names[b].clone(),
            ));
        }
        if let Some(cycle) = graph.find_cycle() {
            return Err(GraphError::Cycle(
                cycle.into_iter().map(|v| graph.names[v].clone()).collect(),
            ));
        }
        Ok(Dag(graph))
    }

    pub fn from_edges<S: AsRef<str>>(names: &[S], edges: &[(&str, &str)]) -> Result<Self> {
        Dag::new(MixedGraph::from_edges(names, edges, &[])?)
    }

    pub fn graph(&self) -> &MixedGraph {
        &self.0
    }

    pub fn into_graph(self) -> MixedGraph {
        self.0
    }

    /// Kahn order, smallest available index first.
    pub fn topological_order(&self) -> Vec<usize> {
        let n = self.n_nodes();
        let mut indegree: Vec<usize> = (0..n).map(|v| self.parents(v).len()).collect();
        let mut ready: BTreeSet<usize> = (0..n).filter(|&v| indegree[v] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(v) = ready.pop_first() {
            order.push(v);
            for c in self.children(v) {
                indegree[c] -= 1;
                if indegree[c] == 0 {
                    ready.insert(c);
                }
            }
        }
        order
    }
}

impl Deref for Dag {
    type Target = MixedGraph;
    fn deref(&self) -> &MixedGraph {
        &self.0
    }
}

fn is_collider(g: &MixedGraph, prev: usize, mid: usize, next: usize) -> bool {
    g.has_directed(prev, mid) && g.has_directed(next, mid)
}

/// Whether `path` is blocked by `z`.
///
/// A non-collider on the path blocks when it is in `z`; a collider blocks when
/// neither it nor any of its descendants is in `z`.
pub fn path_blocked(dag: &Dag, path: &[usize], z: &BTreeSet<usize>) -> Result<bool> {
    if path.len() < 2 {
        return Err(GraphError::ShortPath);
    }
    for &v in path.iter().chain(z) {
        dag.check(v)?;
    }
    for pair in path.windows(2) {
        if !dag.is_adjacent(pair[0], pair[1]) {
            return Err(GraphError::NotAdjacent(
                dag.names[pair[0]].clone(),
                dag.names[pair[1]].clone(),
            ));
        }
    }
    for &end in [path[0], path[path.len() - 1]].iter() {
        if z.contains(&end) {
            return Err(GraphError::EndpointConditioned(dag.names[end].clone()));
        }
    }
    for w in path.windows(3) {
        let (prev, mid, next) = (w[0], w[1], w[2]);
        if is_collider(dag, prev, mid, next) {
            let opened = z.contains(&mid) || dag.descendants(mid).iter().any(|d| z.contains(d));
            if !opened {
                return Ok(true);
            }
        } else if z.contains(&mid) {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Whether `z` blocks every path between a node of `a` and a node of `b`.
///
/// Enumerates simple paths depth-first, abandoning a prefix as soon as one of
/// its interior nodes blocks.
pub fn d_separated(
    dag: &Dag,
    a: &BTreeSet<usize>,
    b: &BTreeSet<usize>,
    z: &BTreeSet<usize>,
) -> Result<bool> {
    if a.is_empty() || b.is_empty() {
        return Err(GraphError::EmptySet);
    }
    for &v in a.iter().chain(b).chain(z) {
        dag.check(v)?;
    }
    for &v in a {
        if b.contains(&v) || z.contains(&v) {
            return Err(GraphError::Overlap(dag.names[v].clone()));
        }
    }
    for &v in b {
        if z.contains(&v) {
            return Err(GraphError::Overlap(dag.names[v].clone()));
        }
    }

    let n = dag.n_nodes();
    // A collider opens when it or one of its descendants is conditioned on.
    let collider_open: Vec<bool> = (0..n)
        .map(|v| z.contains(&v) || dag.descendants(v).iter().any(|d| z.contains(d)))
        .collect();
    let neighbors: Vec<Vec<usize>> = (0..n).map(|v| dag.adjacents(v)).collect();

    struct Search<'a> {
        dag: &'a Dag,
        a: &'a BTreeSet<usize>,
        b: &'a BTreeSet<usize>,
        z: &'a BTreeSet<usize>,
        collider_open: &'a [bool],
        neighbors: &'a [Vec<usize>],
        on_path: Vec<bool>,
    }

    impl Search<'_> {
        /// Extends a path whose last two nodes are `prev` (if any) and `cur`.
        fn open_path_from(&mut self, prev: Option<usize>, cur: usize) -> bool {
            for &next in &self.neighbors[cur] {
                if self.on_path[next] || self.a.contains(&next) {
                    continue;
                }
                if let Some(p) = prev {
                    let blocks = if is_collider(self.dag, p, cur, next) {
                        !self.collider_open[cur]
                    } else {
                        self.z.contains(&cur)
                    };
                    if blocks {
                        continue;
                    }
                }
                if self.b.contains(&next) {
                    return true;
                }
                self.on_path[next] = true;
                let found = self.open_path_from(Some(cur), next);
                self.on_path[next] = false;
                if found {
                    return true;
                }
            }
            false
        }
    }

    let mut search = Search {
        dag,
        a,
        b,
        z,
        collider_open: &collider_open,
        neighbors: &neighbors,
        on_path: vec![false; n],
    };
    for &start in a {
        search.on_path[start] = true;
        let connected = search.open_path_from(None, start);
        search.on_path[start] = false;
        if connected {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Unshielded colliders `(a, mid, c)` with `a < c`.
pub fn unshielded_colliders(g: &MixedGraph) -> BTreeSet<(usize, usize, usize)> {
    let mut out = BTreeSet::new();
    for mid in 0..g.n_nodes() {
        let parents = g.parents(mid);
        for (i, &a) in parents.iter().enumerate() {
            for &c in &parents[i + 1..] {
                if !g.is_adjacent(a, c) {
                    out.insert((a, mid, c));
                }
            }
        }
    }
    out
}

/// Completed partially directed graph of the Markov-equivalence class of `dag`.
///
/// Enumerates every acyclic orientation of the skeleton with the same
/// unshielded colliders; an edge stays directed iff all of them agree on it.
pub fn cpdag_of(dag: &Dag) -> MixedGraph {
    let edges: Vec<(usize, usize)> = dag.skeleton().into_iter().collect();
    let n = dag.n_nodes();
    let target = unshielded_colliders(dag);

    struct Enumeration<'a> {
        edges: &'a [(usize, usize)],
        skeleton: &'a MixedGraph,
        target: &'a BTreeSet<(usize, usize, usize)>,
        current: MixedGraph,
        seen_forward: Vec<bool>,
        seen_backward: Vec<bool>,
    }

    impl Enumeration<'_> {
        fn consistent_at(&self, mid: usize) -> bool {
            let g = &self.current;
            let adj = self.skeleton.adjacents(mid);
            for (i, &a) in adj.iter().enumerate() {
                for &c in &adj[i + 1..] {
                    if self.skeleton.is_adjacent(a, c) {
                        continue;
                    }
                    let oriented = |x: usize| !g.has_undirected(x, mid);
                    if !(oriented(a) && oriented(c)) {
                        continue;
                    }
                    let collider = g.has_directed(a, mid) && g.has_directed(c, mid);
                    let (lo, hi) = if a < c { (a, c) } else { (c, a) };
                    if collider != self.target.contains(&(lo, mid, hi)) {
                        return false;
                    }
                }
            }
            true
        }

        fn assign(&mut self, k: usize) {
            if k == self.edges.len() {
                for (e, &(a, b)) in self.edges.iter().enumerate() {
                    if self.current.has_directed(a, b) {
                        self.seen_forward[e] = true;
                    } else {
                        self.seen_backward[e] = true;
                    }
                }
                return;
            }
            let (a, b) = self.edges[k];
            for (from, to) in [(a, b), (b, a)] {
                // Adding from -> to closes a cycle iff `from` is already reachable from `to`.
                if self.current.has_directed_path(to, from) {
                    continue;
                }
                self.current.set(from, to, Mark::Out);
                if self.consistent_at(a) && self.consistent_at(b) {
                    self.assign(k + 1);
                }
                self.current.set(from, to, Mark::Undirected);
            }
        }
    }

    let mut skeleton = MixedGraph {
        names: dag.names.clone(),
        adj: vec![vec![Mark::None; n]; n],
    };
    for &(a, b) in &edges {
        skeleton.set(a, b, Mark::Undirected);
    }
    let mut run = Enumeration {
        edges: &edges,
        skeleton: &skeleton,
        target: &target,
        current: skeleton.clone(),
        seen_forward: vec![false; edges.len()],
        seen_backward: vec![false; edges.len()],
    };
    run.assign(0);

    let mut out = skeleton.clone();
    for (e, &(a, b)) in edges.iter().enumerate() {
        match (run.seen_forward[e], run.seen_backward[e]) {
            (true, false) => out.set(a, b, Mark::Out),
            (false, true) => out.set(b, a, Mark::Out),
            _ => {}
        }
    }
    out
}

/// Directed edges whose orientation differs between two graphs over the same
/// names, plus adjacency differences: a structural Hamming distance.
pub fn structural_hamming_distance(a: &MixedGraph, b: &MixedGraph) -> Result<usize> {
    let b = b.reordered(a.names())?;
    let mut distance = 0;
    for i in 0..a.n_nodes() {
        for j in i + 1..a.n_nodes() {
            if a.adj[i][j] != b.adj[i][j] {
                distance += 1;
            }
        }
    }
    Ok(distance)
}

/// Index sets keyed by name, for tests and reports.
pub fn node_set(g: &MixedGraph, names: &[&str]) -> Result<BTreeSet<usize>> {
    names.iter().map(|n| g.require(n)).collect()
}
