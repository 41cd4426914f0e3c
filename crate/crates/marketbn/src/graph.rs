//! Directed acyclic graph core: construction, cycle prevention, degree
//! queries, deterministic ordering and DOT export.
//!
//! A [`Dag`] is a value type. Mutating operations such as [`Dag::add_edge`]
//! return a new graph and leave the receiver untouched, so graphs can be
//! shared freely across threads.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("node `{0}` declared twice")]
    DuplicateNode(String),
    #[error("self-loop on `{0}`")]
    SelfLoop(String),
    #[error("edge `{parent}` -> `{child}` already present")]
    DuplicateEdge { parent: String, child: String },
    #[error("edge `{parent}` -> `{child}` would create a cycle")]
    WouldCreateCycle { parent: String, child: String },
    #[error("strength {value} for node `{node}` outside [0, 1]")]
    StrengthOutOfRange { node: String, value: f64 },
}

/// A directed acyclic graph over named variables.
///
/// Nodes keep their declaration order; that order breaks all ties in
/// [`Dag::topological_order`] and fixes the line order of
/// [`Dag::export_dot`], so identical graphs always render identically.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dag {
    nodes: Vec<String>,
    /// Edges as (parent index, child index), kept sorted.
    edges: BTreeSet<(usize, usize)>,
}

impl Dag {
    /// Builds an edgeless graph over the given variable names.
    pub fn new<I, S>(nodes: I) -> Result<Self, GraphError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let nodes: Vec<String> = nodes.into_iter().map(Into::into).collect();
        let mut seen = HashMap::new();
        for (i, n) in nodes.iter().enumerate() {
            if seen.insert(n.clone(), i).is_some() {
                return Err(GraphError::DuplicateNode(n.clone()));
            }
        }
        Ok(Dag {
            nodes,
            edges: BTreeSet::new(),
        })
    }

    pub fn node_names(&self) -> &[String] {
        &self.nodes
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Edges as (parent index, child index) in sorted order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn node_index(&self, name: &str) -> Result<usize, GraphError> {
        self.nodes
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| GraphError::UnknownNode(name.to_string()))
    }

    pub fn contains_edge(&self, parent: usize, child: usize) -> bool {
        self.edges.contains(&(parent, child))
    }

    /// Returns a new graph with the edge added, rejecting self-loops,
    /// duplicates and anything that would close a directed cycle.
    pub fn add_edge(&self, parent: &str, child: &str) -> Result<Self, GraphError> {
        let p = self.node_index(parent)?;
        let c = self.node_index(child)?;
        self.add_edge_by_index(p, c)
    }

    /// Index-based variant of [`Dag::add_edge`] used by the learners.
    pub fn add_edge_by_index(&self, parent: usize, child: usize) -> Result<Self, GraphError> {
        assert!(parent < self.nodes.len() && child < self.nodes.len());
        if parent == child {
            return Err(GraphError::SelfLoop(self.nodes[parent].clone()));
        }
        if self.edges.contains(&(parent, child)) {
            return Err(GraphError::DuplicateEdge {
                parent: self.nodes[parent].clone(),
                child: self.nodes[child].clone(),
            });
        }
        // Adding parent -> child closes a cycle iff child already reaches parent.
        if self.has_path(child, parent) {
            return Err(GraphError::WouldCreateCycle {
                parent: self.nodes[parent].clone(),
                child: self.nodes[child].clone(),
            });
        }
        let mut next = self.clone();
        next.edges.insert((parent, child));
        Ok(next)
    }

    /// Returns a new graph without the edge. No-op if the edge is absent.
    pub fn remove_edge_by_index(&self, parent: usize, child: usize) -> Self {
        let mut next = self.clone();
        next.edges.remove(&(parent, child));
        next
    }

    /// Depth-first reachability along directed edges.
    fn has_path(&self, from: usize, to: usize) -> bool {
        if from == to {
            return true;
        }
        let mut stack = vec![from];
        let mut visited = vec![false; self.nodes.len()];
        visited[from] = true;
        while let Some(v) = stack.pop() {
            for &(p, c) in self.edges.range((v, 0)..(v + 1, 0)) {
                debug_assert_eq!(p, v);
                if c == to {
                    return true;
                }
                if !visited[c] {
                    visited[c] = true;
                    stack.push(c);
                }
            }
        }
        false
    }

    pub fn parents(&self, child: usize) -> Vec<usize> {
        self.edges
            .iter()
            .filter(|&&(_, c)| c == child)
            .map(|&(p, _)| p)
            .collect()
    }

    pub fn children(&self, parent: usize) -> Vec<usize> {
        self.edges
            .range((parent, 0)..(parent + 1, 0))
            .map(|&(_, c)| c)
            .collect()
    }

    pub fn in_degree(&self, node: &str) -> Result<usize, GraphError> {
        let idx = self.node_index(node)?;
        Ok(self.in_degree_by_index(idx))
    }

    pub fn in_degree_by_index(&self, node: usize) -> usize {
        self.edges.iter().filter(|&&(_, c)| c == node).count()
    }

    /// Topological order as node indices. Among nodes whose parents are all
    /// placed, the lowest declaration index goes first, so the result is a
    /// pure function of the graph.
    pub fn topological_order(&self) -> Vec<usize> {
        let n = self.nodes.len();
        let mut remaining_parents: Vec<usize> =
            (0..n).map(|v| self.in_degree_by_index(v)).collect();
        let mut placed = vec![false; n];
        let mut order = Vec::with_capacity(n);
        for _ in 0..n {
            let next = (0..n)
                .find(|&v| !placed[v] && remaining_parents[v] == 0)
                .expect("acyclicity is a Dag invariant");
            placed[next] = true;
            order.push(next);
            for c in self.children(next) {
                remaining_parents[c] -= 1;
            }
        }
        order
    }

    /// Renders the graph as DOT text. `annotations` maps node names to an
    /// influence strength in [0, 1]; annotated nodes are filled with a colour
    /// interpolated from white (0) to full red (1).
    pub fn export_dot(
        &self,
        annotations: Option<&BTreeMap<String, f64>>,
    ) -> Result<String, GraphError> {
        if let Some(ann) = annotations {
            for (name, &value) in ann {
                self.node_index(name)?;
                if !(0.0..=1.0).contains(&value) {
                    return Err(GraphError::StrengthOutOfRange {
                        node: name.clone(),
                        value,
                    });
                }
            }
        }
        let mut out = String::from("digraph marketbn {\n");
        for (i, name) in self.nodes.iter().enumerate() {
            let _ = write!(out, "    \"{}\"", escape(name));
            if let Some(&s) = annotations.and_then(|a| a.get(name)) {
                let _ = write!(out, " [style=filled, fillcolor=\"{}\"]", shade(s));
            }
            let _ = writeln!(out, ";");
            let _ = i;
        }
        for &(p, c) in &self.edges {
            let _ = writeln!(
                out,
                "    \"{}\" -> \"{}\";",
                escape(&self.nodes[p]),
                escape(&self.nodes[c])
            );
        }
        out.push_str("}\n");
        Ok(out)
    }
}

fn escape(name: &str) -> String {
    name.replace('"', "\\\"")
}

/// White-to-red fill for a strength in [0, 1].
fn shade(strength: f64) -> String {
    let gb = (255.0 * (1.0 - strength)).round() as u8;
    format!("#ff{gb:02x}{gb:02x}")
}
