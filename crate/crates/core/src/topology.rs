//! Network graph, GraphML ingestion and hop-distance queries.
//!
//! Node identifiers are kept verbatim from the input document. Rows of the hop
//! matrix follow the lexicographic order of the identifiers so that two
//! documents describing the same graph always produce the same matrix.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::Rng;
use thiserror::Error;

use crate::rng::seeded_rng;

const OS3E_GRAPHML: &str = include_str!("../resources/os3e.graphml");
const FIG1_GRAPHML: &str = include_str!("../resources/fig1.graphml");

/// Index of a node inside a [`Topology`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeIndex(pub usize);

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TopologyError {
    #[error("malformed GraphML document: {0}")]
    Xml(String),
    #[error("GraphML has no <graph> element")]
    MissingGraph,
    #[error("<{element}> at line {line}: {reason}")]
    BadElement {
        element: &'static str,
        line: u32,
        reason: String,
    },
    #[error("duplicate node id `{0}`")]
    DuplicateNode(String),
    #[error("topology has no nodes")]
    Empty,
    #[error("graph is disconnected; components: {}", format_components(.0))]
    Disconnected(Vec<Vec<String>>),
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("unknown builtin topology `{0}` (expected one of: os3e, fig1)")]
    UnknownBuiltin(String),
}

fn format_components(components: &[Vec<String>]) -> String {
    components
        .iter()
        .map(|c| format!("{{{}}}", c.join(", ")))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Undirected, connected graph with precomputed all-pairs hop counts.
///
/// Immutable after construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    nodes: Vec<String>,
    index: BTreeMap<String, NodeIndex>,
    links: Vec<(NodeIndex, NodeIndex)>,
    hops: Vec<u32>,
}

impl Topology {
    /// Builds a topology from node ids and undirected links.
    ///
    /// Self-loops are dropped and parallel links collapsed. Links must only
    /// reference listed nodes and the resulting graph must be connected.
    pub fn new<S, I, L>(nodes: I, links: L) -> Result<Self, TopologyError>
    where
        S: AsRef<str>,
        I: IntoIterator<Item = S>,
        L: IntoIterator<Item = (S, S)>,
    {
        let mut ids = BTreeSet::new();
        for n in nodes {
            let n = n.as_ref().to_string();
            if !ids.insert(n.clone()) {
                return Err(TopologyError::DuplicateNode(n));
            }
        }
        if ids.is_empty() {
            return Err(TopologyError::Empty);
        }
        let nodes: Vec<String> = ids.into_iter().collect();
        let index: BTreeMap<String, NodeIndex> = nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), NodeIndex(i)))
            .collect();

        let mut set = BTreeSet::new();
        for (a, b) in links {
            let ia = *index
                .get(a.as_ref())
                .ok_or_else(|| TopologyError::UnknownNode(a.as_ref().to_string()))?;
            let ib = *index
                .get(b.as_ref())
                .ok_or_else(|| TopologyError::UnknownNode(b.as_ref().to_string()))?;
            if ia == ib {
                continue;
            }
            set.insert((ia.min(ib), ia.max(ib)));
        }
        let links: Vec<_> = set.into_iter().collect();
        let hops = all_pairs_hops(nodes.len(), &links).map_err(|components| {
            TopologyError::Disconnected(
                components
                    .into_iter()
                    .map(|c| c.into_iter().map(|i| nodes[i].clone()).collect())
                    .collect(),
            )
        })?;
        Ok(Self {
            nodes,
            index,
            links,
            hops,
        })
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn link_count(&self) -> usize {
        self.links.len()
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn links(&self) -> &[(NodeIndex, NodeIndex)] {
        &self.links
    }

    pub fn node_id(&self, node: NodeIndex) -> &str {
        &self.nodes[node.0]
    }

    pub fn node_index(&self, id: &str) -> Option<NodeIndex> {
        self.index.get(id).copied()
    }

    /// Fewest links between `a` and `b`.
    pub fn hops(&self, a: NodeIndex, b: NodeIndex) -> u32 {
        self.hops[a.0 * self.nodes.len() + b.0]
    }

    /// The full hop matrix, one row per node in index order.
    pub fn hop_matrix(&self) -> Vec<Vec<u32>> {
        self.hops.chunks(self.nodes.len()).map(|row| row.to_vec()).collect()
    }

    pub fn neighbors(&self, node: NodeIndex) -> impl Iterator<Item = NodeIndex> + '_ {
        self.links.iter().filter_map(move |&(a, b)| {
            if a == node {
                Some(b)
            } else if b == node {
                Some(a)
            } else {
                None
            }
        })
    }

    /// Parses a Topology Zoo style GraphML document.
    pub fn from_graphml(text: &str) -> Result<Self, TopologyError> {
        let doc = roxmltree::Document::parse(text).map_err(|e| TopologyError::Xml(e.to_string()))?;
        let graph = doc
            .descendants()
            .find(|n| n.has_tag_name("graph"))
            .ok_or(TopologyError::MissingGraph)?;

        let line_of = |n: &roxmltree::Node| doc.text_pos_at(n.range().start).row;
        let mut nodes = Vec::new();
        let mut links = Vec::new();
        for child in graph.children().filter(|n| n.is_element()) {
            match child.tag_name().name() {
                "node" => {
                    let id = child.attribute("id").ok_or_else(|| TopologyError::BadElement {
                        element: "node",
                        line: line_of(&child),
                        reason: "missing `id` attribute".into(),
                    })?;
                    nodes.push(id.to_string());
                }
                "edge" => {
                    let attr = |name: &str| {
                        child.attribute(name).ok_or_else(|| TopologyError::BadElement {
                            element: "edge",
                            line: line_of(&child),
                            reason: format!("missing `{name}` attribute"),
                        })
                    };
                    let source = attr("source")?.to_string();
                    let target = attr("target")?.to_string();
                    links.push((child, source, target));
                }
                _ => {}
            }
        }
        let known: BTreeSet<&str> = nodes.iter().map(String::as_str).collect();
        for (element, source, target) in &links {
            for end in [source, target] {
                if !known.contains(end.as_str()) {
                    return Err(TopologyError::BadElement {
                        element: "edge",
                        line: line_of(element),
                        reason: format!("references unknown node `{end}`"),
                    });
                }
            }
        }
        Topology::new(
            nodes.iter().map(String::as_str),
            links.iter().map(|(_, s, t)| (s.as_str(), t.as_str())),
        )
    }

    /// Serializes to a minimal GraphML document readable by [`Topology::from_graphml`].
    pub fn to_graphml(&self) -> String {
        let mut out = String::from(
            "<?xml version=\"1.0\" encoding=\"utf-8\"?>\n\
             <graphml xmlns=\"http://graphml.graphdrawing.org/xmlns\">\n  \
             <graph edgedefault=\"undirected\">\n",
        );
        for id in &self.nodes {
            let _ = writeln!(out, "    <node id=\"{}\" />", xml_escape(id));
        }
        for &(a, b) in &self.links {
            let _ = writeln!(
                out,
                "    <edge source=\"{}\" target=\"{}\" />",
                xml_escape(self.node_id(a)),
                xml_escape(self.node_id(b))
            );
        }
        out.push_str("  </graph>\n</graphml>\n");
        out
    }

    /// Internet2 OS3E: 34 nodes, 42 links.
    pub fn builtin_os3e() -> Self {
        Self::from_graphml(OS3E_GRAPHML).expect("embedded OS3E topology is valid")
    }

    /// The three-domain motivating network: controllers `c1..c3`, switches `s1..s9`.
    pub fn builtin_fig1() -> Self {
        Self::from_graphml(FIG1_GRAPHML).expect("embedded fig1 topology is valid")
    }

    pub fn builtin(name: &str) -> Result<Self, TopologyError> {
        match name.to_ascii_lowercase().as_str() {
            "os3e" => Ok(Self::builtin_os3e()),
            "fig1" => Ok(Self::builtin_fig1()),
            _ => Err(TopologyError::UnknownBuiltin(name.to_string())),
        }
    }

    /// Random connected graph: a random spanning tree plus `extra_links` chords.
    /// Node ids are `n000`, `n001`, ...
    pub fn random_connected(node_count: usize, extra_links: usize, seed: u64) -> Self {
        assert!(node_count > 0, "random topology needs at least one node");
        let mut rng = seeded_rng(seed);
        let ids: Vec<String> = (0..node_count).map(|i| format!("n{i:03}")).collect();
        let mut order: Vec<usize> = (0..node_count).collect();
        order.shuffle(&mut rng);
        let mut links = Vec::new();
        for k in 1..node_count {
            let parent = order[rng.random_range(0..k)];
            links.push((order[k], parent));
        }
        if node_count > 1 {
            for _ in 0..extra_links {
                let a = rng.random_range(0..node_count);
                let b = rng.random_range(0..node_count);
                links.push((a, b));
            }
        }
        Topology::new(
            ids.iter().map(String::as_str),
            links.iter().map(|&(a, b)| (ids[a].as_str(), ids[b].as_str())),
        )
        .expect("spanning tree keeps the graph connected")
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Breadth-first hop counts from every node. On a disconnected graph returns
/// the connected components (sorted node indices) instead.
fn all_pairs_hops(n: usize, links: &[(NodeIndex, NodeIndex)]) -> Result<Vec<u32>, Vec<Vec<usize>>> {
    let mut adjacency = vec![Vec::new(); n];
    for &(a, b) in links {
        adjacency[a.0].push(b.0);
        adjacency[b.0].push(a.0);
    }
    let mut hops = vec![u32::MAX; n * n];
    let mut queue = VecDeque::new();
    for src in 0..n {
        let row = &mut hops[src * n..(src + 1) * n];
        row[src] = 0;
        queue.push_back(src);
        while let Some(u) = queue.pop_front() {
            for &v in &adjacency[u] {
                if row[v] == u32::MAX {
                    row[v] = row[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        if src == 0 && row.contains(&u32::MAX) {
            return Err(components(n, &adjacency));
        }
    }
    Ok(hops)
}

fn components(n: usize, adjacency: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let mut seen = vec![false; n];
    let mut out = Vec::new();
    for start in 0..n {
        if seen[start] {
            continue;
        }
        let mut comp = vec![start];
        seen[start] = true;
        let mut i = 0;
        while i < comp.len() {
            for &v in &adjacency[comp[i]] {
                if !seen[v] {
                    seen[v] = true;
                    comp.push(v);
                }
            }
            i += 1;
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}
