//! Undirected simple graphs stored as sorted neighbor lists.
//!
//! A [`Graph`] is the observed adjacency matrix `A`: symmetric, zero
//! diagonal, 0/1 entries. Storage is CSR-style (`offsets` into one flat
//! `targets` array), so matrix-vector products cost `O(n + m)` and entry
//! probes cost `O(log d_i)`.
//!
//! Nodes are always relabeled to `0..n`. The identifiers found in the input
//! file are kept in a side table ([`Graph::node_ids`]) and are what the
//! edge-list writer emits.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("graph has no edges")]
    Empty,
    #[error("node index {index} out of range for a graph with {n} nodes")]
    IndexOutOfRange { index: usize, n: usize },
}

/// How integer node tokens in an edge list are interpreted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Indexing {
    #[default]
    ZeroBased,
    /// Tokens start at 1; a `0` token is rejected.
    OneBased,
}

/// Counts of entries dropped while building a simple graph.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BuildReport {
    pub self_loops: usize,
    pub duplicates: usize,
}

/// Undirected simple graph with sorted, symmetric neighbor lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    offsets: Vec<usize>,
    targets: Vec<usize>,
    node_ids: Vec<u64>,
}

impl Graph {
    /// Builds a graph on `n` nodes, dropping self loops and repeated pairs.
    pub fn from_edges<I>(n: usize, edges: I) -> Result<(Self, BuildReport), GraphError>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut report = BuildReport::default();
        let mut pairs = Vec::new();
        for (u, v) in edges {
            for index in [u, v] {
                if index >= n {
                    return Err(GraphError::IndexOutOfRange { index, n });
                }
            }
            if u == v {
                report.self_loops += 1;
                continue;
            }
            pairs.push((u.min(v), u.max(v)));
        }
        pairs.sort_unstable();
        let before = pairs.len();
        pairs.dedup();
        report.duplicates = before - pairs.len();
        Ok((Self::from_sorted_pairs(n, &pairs), report))
    }

    fn from_sorted_pairs(n: usize, pairs: &[(usize, usize)]) -> Self {
        let mut degree = vec![0usize; n];
        for &(u, v) in pairs {
            degree[u] += 1;
            degree[v] += 1;
        }
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        for d in &degree {
            offsets.push(offsets.last().unwrap() + d);
        }
        let mut cursor = offsets[..n].to_vec();
        let mut targets = vec![0usize; offsets[n]];
        // Pairs are sorted by (u, v) with u < v, so pushing v into u and u
        // into v keeps every list increasing.
        for &(u, v) in pairs {
            targets[cursor[v]] = u;
            cursor[v] += 1;
        }
        for &(u, v) in pairs {
            targets[cursor[u]] = v;
            cursor[u] += 1;
        }
        Self {
            offsets,
            targets,
            node_ids: (0..n as u64).collect(),
        }
    }

    /// Replaces the identifier table used by the edge-list writer.
    pub fn with_node_ids(mut self, ids: Vec<u64>) -> Self {
        assert_eq!(ids.len(), self.node_count(), "one identifier per node");
        self.node_ids = ids;
        self
    }

    pub fn complete(n: usize) -> Self {
        let pairs: Vec<_> = (0..n)
            .flat_map(|u| (u + 1..n).map(move |v| (u, v)))
            .collect();
        Self::from_sorted_pairs(n, &pairs)
    }

    pub fn cycle(n: usize) -> Self {
        assert!(n >= 3, "a cycle needs at least 3 nodes");
        let mut pairs: Vec<_> = (0..n - 1).map(|u| (u, u + 1)).collect();
        pairs.push((0, n - 1));
        pairs.sort_unstable();
        Self::from_sorted_pairs(n, &pairs)
    }

    pub fn path(n: usize) -> Self {
        let pairs: Vec<_> = (1..n).map(|u| (u - 1, u)).collect();
        Self::from_sorted_pairs(n, &pairs)
    }

    /// Star `K_{1,leaves}` with the hub at node 0.
    pub fn star(leaves: usize) -> Self {
        let pairs: Vec<_> = (1..=leaves).map(|v| (0, v)).collect();
        Self::from_sorted_pairs(leaves + 1, &pairs)
    }

    pub fn node_count(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn edge_count(&self) -> usize {
        self.targets.len() / 2
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.targets[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.offsets[i + 1] - self.offsets[i]
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.neighbors(i).binary_search(&j).is_ok()
    }

    /// Identifier of each node as it appeared in the source file.
    pub fn node_ids(&self) -> &[u64] {
        &self.node_ids
    }

    /// Unique pairs `(u, v)` with `u < v`, in increasing order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.node_count()).flat_map(move |u| {
            self.neighbors(u)
                .iter()
                .copied()
                .filter(move |&v| v > u)
                .map(move |v| (u, v))
        })
    }

    /// `y = A x`.
    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.neighbors(i).iter().map(|&j| x[j]).sum();
        }
    }

    /// Relabels node `i` as `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let n = self.node_count();
        assert_eq!(perm.len(), n);
        let pairs = self.edges().map(|(u, v)| (perm[u], perm[v]));
        let (mut g, _) = Self::from_edges(n, pairs).expect("permutation keeps indices in range");
        let mut ids = vec![0; n];
        for (i, &p) in perm.iter().enumerate() {
            ids[p] = self.node_ids[i];
        }
        g.node_ids = ids;
        g
    }

    /// Subgraph induced by `nodes` (kept in the given order).
    pub fn induced(&self, nodes: &[usize]) -> Self {
        let mut new_index = vec![usize::MAX; self.node_count()];
        for (k, &v) in nodes.iter().enumerate() {
            new_index[v] = k;
        }
        let mut pairs = Vec::new();
        for &u in nodes {
            for &v in self.neighbors(u) {
                let (a, b) = (new_index[u], new_index[v]);
                if b != usize::MAX && a < b {
                    pairs.push((a, b));
                }
            }
        }
        pairs.sort_unstable();
        let mut g = Self::from_sorted_pairs(nodes.len(), &pairs);
        g.node_ids = nodes.iter().map(|&v| self.node_ids[v]).collect();
        g
    }
}

/// Degree sequence summary.
#[derive(Debug, Clone, PartialEq)]
pub struct DegreeProfile {
    pub degrees: Vec<usize>,
    pub mean: f64,
    pub max: usize,
    pub min: usize,
}

pub fn degrees(graph: &Graph) -> DegreeProfile {
    let n = graph.node_count();
    let degrees: Vec<usize> = (0..n).map(|i| graph.degree(i)).collect();
    DegreeProfile {
        mean: if n == 0 { 0.0 } else { 2.0 * graph.edge_count() as f64 / n as f64 },
        max: degrees.iter().copied().max().unwrap_or(0),
        min: degrees.iter().copied().min().unwrap_or(0),
        degrees,
    }
}

/// Component index of every node; components are numbered in order of their
/// smallest node.
pub fn connected_components(graph: &Graph) -> (Vec<usize>, usize) {
    let n = graph.node_count();
    let mut component = vec![usize::MAX; n];
    let mut count = 0;
    let mut queue = VecDeque::new();
    for start in 0..n {
        if component[start] != usize::MAX {
            continue;
        }
        component[start] = count;
        queue.push_back(start);
        while let Some(u) = queue.pop_front() {
            for &v in graph.neighbors(u) {
                if component[v] == usize::MAX {
                    component[v] = count;
                    queue.push_back(v);
                }
            }
        }
        count += 1;
    }
    (component, count)
}

pub fn is_connected(graph: &Graph) -> bool {
    connected_components(graph).1 <= 1
}

/// The largest connected component together with the index maps between the
/// original graph and the subgraph.
#[derive(Debug, Clone)]
pub struct Component {
    pub graph: Graph,
    /// `old_to_new[i]` is the subgraph index of original node `i`, if kept.
    pub old_to_new: Vec<Option<usize>>,
    pub new_to_old: Vec<usize>,
}

impl Component {
    pub fn is_whole_graph(&self) -> bool {
        self.new_to_old.len() == self.old_to_new.len()
    }
}

/// Restricts to the largest component. Ties go to the component holding the
/// smallest original index.
pub fn largest_component(graph: &Graph) -> Component {
    let (component, count) = connected_components(graph);
    let mut sizes = vec![0usize; count];
    for &c in &component {
        sizes[c] += 1;
    }
    // Components are numbered by smallest member, so the first maximum wins ties.
    let best = (0..count).fold(0, |best, c| if sizes[c] > sizes[best] { c } else { best });
    let new_to_old: Vec<usize> = (0..graph.node_count())
        .filter(|&i| component[i] == best)
        .collect();
    let mut old_to_new = vec![None; graph.node_count()];
    for (k, &i) in new_to_old.iter().enumerate() {
        old_to_new[i] = Some(k);
    }
    Component {
        graph: graph.induced(&new_to_old),
        old_to_new,
        new_to_old,
    }
}

/// A graph read from disk plus what was cleaned up on the way in.
#[derive(Debug, Clone)]
pub struct LoadedGraph {
    pub graph: Graph,
    pub report: BuildReport,
}

pub fn load_edge_list(path: impl AsRef<Path>, indexing: Indexing) -> Result<LoadedGraph, GraphError> {
    parse_edge_list(BufReader::new(File::open(path)?), indexing)
}

/// Parses `u v` lines; blank lines and `#` comments are ignored, extra
/// columns (weights) are ignored.
pub fn parse_edge_list(reader: impl BufRead, indexing: Indexing) -> Result<LoadedGraph, GraphError> {
    let mut raw = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with('%') {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let mut next = || -> Result<u64, GraphError> {
            let token = tokens.next().ok_or_else(|| GraphError::Parse {
                line: lineno + 1,
                message: "expected two node tokens".into(),
            })?;
            let value: u64 = token.parse().map_err(|_| GraphError::Parse {
                line: lineno + 1,
                message: format!("invalid node token {token:?}"),
            })?;
            if indexing == Indexing::OneBased && value == 0 {
                return Err(GraphError::Parse {
                    line: lineno + 1,
                    message: "node 0 in a one-based edge list".into(),
                });
            }
            Ok(value)
        };
        let u = next()?;
        let v = next()?;
        raw.push((u, v));
    }
    build_from_ids(raw, BTreeSet::new())
}

fn build_from_ids(raw: Vec<(u64, u64)>, extra_nodes: BTreeSet<u64>) -> Result<LoadedGraph, GraphError> {
    if raw.is_empty() {
        return Err(GraphError::Empty);
    }
    let ids: BTreeSet<u64> = raw
        .iter()
        .flat_map(|&(u, v)| [u, v])
        .chain(extra_nodes)
        .collect();
    let index: BTreeMap<u64, usize> = ids.iter().enumerate().map(|(k, &id)| (id, k)).collect();
    let (graph, report) = Graph::from_edges(ids.len(), raw.iter().map(|(u, v)| (index[u], index[v])))?;
    if graph.edge_count() == 0 {
        return Err(GraphError::Empty);
    }
    if report.self_loops > 0 || report.duplicates > 0 {
        log::warn!(
            "dropped {} self loops and {} duplicate edges",
            report.self_loops,
            report.duplicates
        );
    }
    Ok(LoadedGraph {
        graph: graph.with_node_ids(ids.into_iter().collect()),
        report,
    })
}

/// Reads the `node [ id .. ]` and `edge [ source .. target .. ]` records of a
/// GML file. Edge direction is ignored.
pub fn load_gml(path: impl AsRef<Path>) -> Result<LoadedGraph, GraphError> {
    parse_gml(&std::fs::read_to_string(path)?)
}

pub fn parse_gml(text: &str) -> Result<LoadedGraph, GraphError> {
    let tokens = gml_tokens(text);
    let mut stack: Vec<String> = Vec::new();
    let mut nodes = BTreeSet::new();
    let mut edges = Vec::new();
    let (mut source, mut target): (Option<u64>, Option<u64>) = (None, None);
    let mut i = 0;
    while i < tokens.len() {
        let (line, tok) = &tokens[i];
        match tok.as_str() {
            "[" => {
                let key = if i > 0 { tokens[i - 1].1.clone() } else { String::new() };
                stack.push(key);
                source = None;
                target = None;
            }
            "]" => {
                let key = stack.pop().ok_or_else(|| GraphError::Parse {
                    line: *line,
                    message: "unbalanced ']'".into(),
                })?;
                if key == "edge" {
                    match (source, target) {
                        (Some(s), Some(t)) => edges.push((s, t)),
                        _ => {
                            return Err(GraphError::Parse {
                                line: *line,
                                message: "edge without source and target".into(),
                            })
                        }
                    }
                }
            }
            key @ ("id" | "source" | "target") if i + 1 < tokens.len() => {
                let context = stack.last().map(String::as_str);
                let wanted = matches!((context, key), (Some("node"), "id") | (Some("edge"), "source" | "target"));
                if wanted {
                    let (vline, value) = &tokens[i + 1];
                    let value: u64 = value.parse().map_err(|_| GraphError::Parse {
                        line: *vline,
                        message: format!("invalid integer {value:?} for {key}"),
                    })?;
                    match key {
                        "id" => {
                            nodes.insert(value);
                        }
                        "source" => source = Some(value),
                        _ => target = Some(value),
                    }
                    i += 1;
                }
            }
            _ => {}
        }
        i += 1;
    }
    build_from_ids(edges, nodes)
}

fn gml_tokens(text: &str) -> Vec<(usize, String)> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let mut chars = line.chars().peekable();
        while let Some(&c) = chars.peek() {
            if c.is_whitespace() {
                chars.next();
            } else if c == '"' {
                chars.next();
                let s: String = chars.by_ref().take_while(|&c| c != '"').collect();
                out.push((lineno + 1, s));
            } else if c == '[' || c == ']' {
                chars.next();
                out.push((lineno + 1, c.to_string()));
            } else {
                let mut s = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_whitespace() || c == '[' || c == ']' {
                        break;
                    }
                    s.push(c);
                    chars.next();
                }
                out.push((lineno + 1, s));
            }
        }
    }
    out
}

/// Writes the canonical edge list: one `u v` line per edge with `u < v`,
/// sorted, using the original node identifiers.
pub fn write_edge_list(graph: &Graph, mut out: impl Write) -> io::Result<()> {
    let ids = graph.node_ids();
    for (u, v) in graph.edges() {
        writeln!(out, "{} {}", ids[u], ids[v])?;
    }
    Ok(())
}

pub fn save_edge_list(graph: &Graph, path: impl AsRef<Path>) -> io::Result<()> {
    let mut file = io::BufWriter::new(File::create(path)?);
    write_edge_list(graph, &mut file)?;
    file.flush()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn parse(text: &str) -> LoadedGraph {
        parse_edge_list(text.as_bytes(), Indexing::ZeroBased).unwrap()
    }

    fn canonical(g: &Graph) -> String {
        let mut buf = Vec::new();
        write_edge_list(g, &mut buf).unwrap();
        String::from_utf8(buf).unwrap()
    }

    #[test]
    fn triangle_from_text() {
        let g = parse("0 1\n1 2\n2 0").graph;
        assert_eq!((g.node_count(), g.edge_count()), (3, 3));
        assert_eq!(g.neighbors(0), &[1, 2]);
    }

    #[test]
    fn duplicate_edge_collapses() {
        let loaded = parse("0 1\n1 0");
        assert_eq!((loaded.graph.node_count(), loaded.graph.edge_count()), (2, 1));
        assert_eq!(loaded.report.duplicates, 1);
    }

    #[test]
    fn self_loops_are_counted() {
        let loaded = parse("# comment\n0 0\n0 1\n\n1 2 0.5\n");
        assert_eq!(loaded.report.self_loops, 1);
        assert_eq!(loaded.graph.edge_count(), 2);
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let err = parse_edge_list("0 1\n1 x\n".as_bytes(), Indexing::ZeroBased).unwrap_err();
        assert!(matches!(err, GraphError::Parse { line: 2, .. }), "{err}");
        let err = parse_edge_list("0 1\n2\n".as_bytes(), Indexing::ZeroBased).unwrap_err();
        assert!(matches!(err, GraphError::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(matches!(
            parse_edge_list("# nothing\n".as_bytes(), Indexing::ZeroBased),
            Err(GraphError::Empty)
        ));
        assert!(matches!(
            parse_edge_list("3 3\n".as_bytes(), Indexing::ZeroBased),
            Err(GraphError::Empty)
        ));
    }

    #[test]
    fn one_based_rejects_zero() {
        assert!(parse_edge_list("0 1\n".as_bytes(), Indexing::OneBased).is_err());
        let g = parse_edge_list("1 2\n2 3\n".as_bytes(), Indexing::OneBased).unwrap().graph;
        assert_eq!(g.node_ids(), &[1, 2, 3]);
        assert_eq!(canonical(&g), "1 2\n2 3\n");
    }

    #[test]
    fn sparse_ids_are_compacted_and_written_back() {
        let g = parse("10 30\n30 20\n").graph;
        assert_eq!(g.node_count(), 3);
        assert_eq!(canonical(&g), "10 30\n20 30\n");
    }

    #[test]
    fn karate_counts() {
        let path = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/karate.txt");
        let g = load_edge_list(path, Indexing::ZeroBased).unwrap().graph;
        assert_eq!((g.node_count(), g.edge_count()), (34, 78));
        assert!(is_connected(&g));
    }

    #[test]
    fn gml_records() {
        let text = r#"graph [
  directed 0
  node [ id 1 label "a [x]" ]
  node [ id 2 label "b" ]
  node [ id 3 ]
  node [ id 9 ]
  edge [ source 1 target 2 ]
  edge [ source 3 target 2 value 4 ]
]"#;
        let loaded = parse_gml(text).unwrap();
        assert_eq!(loaded.graph.node_count(), 4);
        assert_eq!(loaded.graph.edge_count(), 2);
        assert!(!is_connected(&loaded.graph));
        assert_eq!(canonical(&loaded.graph), "1 2\n2 3\n");
    }

    #[test]
    fn connectivity_examples() {
        assert!(is_connected(&Graph::complete(3)));
        assert!(is_connected(&Graph::path(5)));
        let (two_edges, _) = Graph::from_edges(4, [(0, 1), (2, 3)]).unwrap();
        assert!(!is_connected(&two_edges));
    }

    #[test]
    fn largest_component_identity_on_connected() {
        let g = Graph::cycle(6);
        let comp = largest_component(&g);
        assert!(comp.is_whole_graph());
        assert_eq!(comp.new_to_old, (0..6).collect::<Vec<_>>());
        assert_eq!(comp.graph, g);
    }

    #[test]
    fn largest_component_drops_isolate() {
        let (g, _) = Graph::from_edges(4, [(1, 2), (2, 3), (1, 3)]).unwrap();
        let comp = largest_component(&g);
        assert_eq!(comp.new_to_old, vec![1, 2, 3]);
        assert_eq!(comp.old_to_new, vec![None, Some(0), Some(1), Some(2)]);
        assert_eq!(comp.graph.edge_count(), 3);
    }

    #[test]
    fn largest_component_tie_prefers_node_zero() {
        let (g, _) = Graph::from_edges(6, [(3, 4), (4, 5), (3, 5), (0, 1), (1, 2), (0, 2)]).unwrap();
        assert_eq!(largest_component(&g).new_to_old, vec![0, 1, 2]);
        let (g, _) = Graph::from_edges(6, [(0, 4), (4, 5), (0, 5), (3, 1), (1, 2), (3, 2)]).unwrap();
        assert_eq!(largest_component(&g).new_to_old, vec![0, 4, 5]);
    }

    #[test]
    fn degree_examples() {
        assert_eq!(degrees(&Graph::star(4)).degrees, vec![4, 1, 1, 1, 1]);
        assert_eq!(degrees(&Graph::cycle(4)).degrees, vec![2; 4]);
        let k5 = degrees(&Graph::complete(5));
        assert_eq!(k5.degrees, vec![4; 5]);
        assert_eq!((k5.min, k5.max, k5.mean), (4, 4, 4.0));
    }

    fn arb_edges() -> impl Strategy<Value = (usize, Vec<(usize, usize)>)> {
        (2usize..25).prop_flat_map(|n| (Just(n), prop::collection::vec((0..n, 0..n), 1..80)))
    }

    proptest! {
        #[test]
        fn structural_invariants((n, edges) in arb_edges()) {
            let (g, _) = Graph::from_edges(n, edges).unwrap();
            let profile = degrees(&g);
            prop_assert_eq!(profile.degrees.iter().sum::<usize>(), 2 * g.edge_count());
            for i in 0..n {
                let nb = g.neighbors(i);
                prop_assert!(nb.windows(2).all(|w| w[0] < w[1]));
                prop_assert!(!nb.contains(&i));
                for &j in nb {
                    prop_assert!(g.has_edge(j, i));
                }
            }
            prop_assert!(is_connected(&largest_component(&g).graph));
        }

        #[test]
        fn edge_list_round_trip((n, edges) in arb_edges()) {
            let (g, _) = Graph::from_edges(n, edges.clone()).unwrap();
            prop_assume!(g.edge_count() > 0);
            let text: String = edges.iter().map(|(u, v)| format!("{u} {v}\n")).collect();
            let loaded = parse(&text).graph;
            let first = canonical(&loaded);
            let again = canonical(&parse(&first).graph);
            prop_assert_eq!(&first, &again);
            let mut expected: Vec<(usize, usize)> = edges
                .iter()
                .filter(|(u, v)| u != v)
                .map(|&(u, v)| (u.min(v), u.max(v)))
                .collect();
            expected.sort_unstable();
            expected.dedup();
            let expected: String = expected.iter().map(|(u, v)| format!("{u} {v}\n")).collect();
            prop_assert_eq!(first, expected);
        }
    }
}
