//! Structure learning (score-based hill climbing, constraint-based PC) and
//! parameter learning (maximum likelihood with Dirichlet smoothing,
//! expectation-maximisation under missing data) over discrete datasets.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::discretize::{DiscretizeError, Variable};
use crate::graph::{Dag, GraphError};

mod ci;
mod cpt;
mod em;
mod hill_climb;
mod pc;
mod score;

pub use ci::{chi_square_ci_test, CiTestResult};
pub use cpt::fit_cpts_mle;
pub use em::{fit_cpts_em, EmFit};
pub use hill_climb::hill_climb;
pub use pc::pc_learn;
pub use score::{family_score, graph_score, ScoreCache};

#[derive(Debug, Error)]
pub enum LearnError {
    #[error("no complete rows for the family of `{child}`")]
    EmptyEffectiveData { child: String },
    #[error("no rows with complete data for the conditional independence test")]
    EmptyStratumData,
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("structure learning needs at least 2 variables, got {0}")]
    TooFewVariables(usize),
    #[error(
        "parent configuration {row} of `{child}` has no observations and smoothing is disabled"
    )]
    ZeroRowWithoutSmoothing { child: String, row: usize },
    #[error("variable `{0}` is never observed")]
    NoObservationsForVariable(String),
    #[error("row {0} has zero probability under the current parameters")]
    ZeroProbabilityRow(usize),
    #[error("invalid conditional probability table: {0}")]
    InvalidCpt(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Discretize(#[from] DiscretizeError),
}

/// Decomposable structure score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ScoreSpec {
    Bic,
    Bdeu { equivalent_sample_size: f64 },
}

impl ScoreSpec {
    /// Stable token used in seed derivation and reports.
    pub fn token(&self) -> String {
        match self {
            ScoreSpec::Bic => "bic".to_string(),
            ScoreSpec::Bdeu {
                equivalent_sample_size,
            } => format!("bdeu({equivalent_sample_size})"),
        }
    }
}

/// Conditional probability table of one node given its parents.
///
/// Rows are indexed row-major over the parent declaration order (the first
/// parent varies slowest); each row is a distribution over child states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cpt {
    pub child: String,
    pub parents: Vec<String>,
    pub child_cardinality: usize,
    pub parent_cardinalities: Vec<usize>,
    pub table: Vec<Vec<f64>>,
}

impl Cpt {
    pub fn new(
        child: String,
        parents: Vec<String>,
        child_cardinality: usize,
        parent_cardinalities: Vec<usize>,
        table: Vec<Vec<f64>>,
    ) -> Result<Self, LearnError> {
        let q: usize = parent_cardinalities.iter().product();
        if table.len() != q {
            return Err(LearnError::InvalidCpt(format!(
                "`{child}`: {} rows, expected {q}",
                table.len()
            )));
        }
        for (j, row) in table.iter().enumerate() {
            if row.len() != child_cardinality {
                return Err(LearnError::InvalidCpt(format!(
                    "`{child}` row {j}: {} entries, expected {child_cardinality}",
                    row.len()
                )));
            }
            if row.iter().any(|&p| p < 0.0) {
                return Err(LearnError::InvalidCpt(format!(
                    "`{child}` row {j}: negative probability"
                )));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(LearnError::InvalidCpt(format!(
                    "`{child}` row {j}: probabilities sum to {sum}"
                )));
            }
        }
        Ok(Cpt {
            child,
            parents,
            child_cardinality,
            parent_cardinalities,
            table,
        })
    }

    pub fn row_count(&self) -> usize {
        self.table.len()
    }

    /// Flat row index of a parent-state configuration.
    pub fn row_index(&self, parent_states: &[usize]) -> usize {
        debug_assert_eq!(parent_states.len(), self.parent_cardinalities.len());
        let mut row = 0;
        for (&s, &card) in parent_states.iter().zip(&self.parent_cardinalities) {
            debug_assert!(s < card);
            row = row * card + s;
        }
        row
    }

    /// Parent-state configuration of a flat row index.
    pub fn parent_states(&self, mut row: usize) -> Vec<usize> {
        let mut states = vec![0; self.parent_cardinalities.len()];
        for i in (0..self.parent_cardinalities.len()).rev() {
            states[i] = row % self.parent_cardinalities[i];
            row /= self.parent_cardinalities[i];
        }
        states
    }

    /// Free parameters: (child states - 1) per parent configuration.
    pub fn free_parameters(&self) -> usize {
        (self.child_cardinality - 1) * self.row_count()
    }
}

/// A directed acyclic graph plus one conditional probability table per node.
#[derive(Debug, Clone, PartialEq)]
pub struct BayesianNetwork {
    dag: Dag,
    variables: Vec<Variable>,
    cpts: Vec<Cpt>,
}

impl BayesianNetwork {
    /// Assembles a network, checking that every CPT matches the graph
    /// parents of its node (order-normalised by declaration index) and the
    /// variable cardinalities.
    pub fn new(dag: Dag, variables: Vec<Variable>, cpts: Vec<Cpt>) -> Result<Self, LearnError> {
        if variables.len() != dag.node_count() || cpts.len() != dag.node_count() {
            return Err(LearnError::InvalidCpt(
                "variable/CPT count does not match the graph".to_string(),
            ));
        }
        for (v, (var, cpt)) in variables.iter().zip(&cpts).enumerate() {
            if dag.node_names()[v] != var.name || cpt.child != var.name {
                return Err(LearnError::InvalidCpt(format!(
                    "node {v} names disagree: `{}` / `{}` / `{}`",
                    dag.node_names()[v],
                    var.name,
                    cpt.child
                )));
            }
            if cpt.child_cardinality != var.cardinality {
                return Err(LearnError::InvalidCpt(format!(
                    "`{}`: cardinality {} vs CPT {}",
                    var.name, var.cardinality, cpt.child_cardinality
                )));
            }
            let parent_names: Vec<String> = dag
                .parents(v)
                .iter()
                .map(|&p| dag.node_names()[p].clone())
                .collect();
            if cpt.parents != parent_names {
                return Err(LearnError::InvalidCpt(format!(
                    "`{}`: CPT parents {:?} vs graph parents {:?}",
                    var.name, cpt.parents, parent_names
                )));
            }
            let parent_cards: Vec<usize> = dag
                .parents(v)
                .iter()
                .map(|&p| variables[p].cardinality)
                .collect();
            if cpt.parent_cardinalities != parent_cards {
                return Err(LearnError::InvalidCpt(format!(
                    "`{}`: parent cardinalities disagree with the graph",
                    var.name
                )));
            }
        }
        Ok(BayesianNetwork {
            dag,
            variables,
            cpts,
        })
    }

    pub fn dag(&self) -> &Dag {
        &self.dag
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v.name == name)
    }

    pub fn cpt(&self, node: usize) -> &Cpt {
        &self.cpts[node]
    }

    pub fn cpts(&self) -> &[Cpt] {
        &self.cpts
    }

    pub fn node_count(&self) -> usize {
        self.variables.len()
    }

    /// Total free parameters across all tables.
    pub fn parameter_count(&self) -> usize {
        self.cpts.iter().map(Cpt::free_parameters).sum()
    }

    /// Replaces one CPT (used by the sensitivity machinery). The new table
    /// must have the same shape.
    pub fn with_cpt(&self, node: usize, table: Vec<Vec<f64>>) -> Result<Self, LearnError> {
        let old = &self.cpts[node];
        let cpt = Cpt::new(
            old.child.clone(),
            old.parents.clone(),
            old.child_cardinality,
            old.parent_cardinalities.clone(),
            table,
        )?;
        let mut next = self.clone();
        next.cpts[node] = cpt;
        Ok(next)
    }

    /// Forward sampling in topological order.
    pub fn sample<R: Rng>(&self, n_rows: usize, rng: &mut R) -> Vec<Vec<usize>> {
        let order = self.dag.topological_order();
        let mut rows = Vec::with_capacity(n_rows);
        for _ in 0..n_rows {
            let mut row = vec![usize::MAX; self.node_count()];
            for &v in &order {
                let cpt = &self.cpts[v];
                let parent_states: Vec<usize> =
                    self.dag.parents(v).iter().map(|&p| row[p]).collect();
                let dist = &cpt.table[cpt.row_index(&parent_states)];
                let mut u: f64 = rng.gen();
                let mut state = cpt.child_cardinality - 1;
                for (k, &p) in dist.iter().enumerate() {
                    if u < p {
                        state = k;
                        break;
                    }
                    u -= p;
                }
                row[v] = state;
            }
            rows.push(row);
        }
        rows
    }

    /// Lossless JSON document: `{nodes: [{name, states, parents, cpt_rows}], edges}`.
    pub fn to_json(&self) -> serde_json::Value {
        let nodes: Vec<serde_json::Value> = (0..self.node_count())
            .map(|v| {
                serde_json::json!({
                    "name": self.variables[v].name,
                    "states": self.variables[v].state_labels,
                    "parents": self.cpts[v].parents,
                    "cpt_rows": self.cpts[v].table,
                })
            })
            .collect();
        let edges: Vec<serde_json::Value> = self
            .dag
            .edges()
            .map(|(p, c)| {
                serde_json::json!([self.variables[p].name, self.variables[c].name])
            })
            .collect();
        serde_json::json!({ "nodes": nodes, "edges": edges })
    }

    pub fn from_json(doc: &serde_json::Value) -> Result<Self, LearnError> {
        let invalid = |msg: &str| LearnError::InvalidCpt(msg.to_string());
        let nodes = doc["nodes"].as_array().ok_or_else(|| invalid("missing nodes"))?;
        let mut names = Vec::new();
        let mut variables = Vec::new();
        for node in nodes {
            let name = node["name"]
                .as_str()
                .ok_or_else(|| invalid("node without name"))?
                .to_string();
            let states: Vec<String> = serde_json::from_value(node["states"].clone())
                .map_err(|e| invalid(&format!("states: {e}")))?;
            variables.push(Variable {
                name: name.clone(),
                cardinality: states.len(),
                state_labels: states,
            });
            names.push(name);
        }
        let mut dag = Dag::new(names.clone())?;
        let edges = doc["edges"].as_array().ok_or_else(|| invalid("missing edges"))?;
        for e in edges {
            let pair: Vec<String> = serde_json::from_value(e.clone())
                .map_err(|e| invalid(&format!("edge: {e}")))?;
            if pair.len() != 2 {
                return Err(invalid("edge is not a pair"));
            }
            dag = dag.add_edge(&pair[0], &pair[1])?;
        }
        let mut cpts = Vec::new();
        for (v, node) in nodes.iter().enumerate() {
            let parents: Vec<String> = serde_json::from_value(node["parents"].clone())
                .map_err(|e| invalid(&format!("parents: {e}")))?;
            let table: Vec<Vec<f64>> = serde_json::from_value(node["cpt_rows"].clone())
                .map_err(|e| invalid(&format!("cpt_rows: {e}")))?;
            let parent_cards: Vec<usize> = parents
                .iter()
                .map(|p| {
                    names
                        .iter()
                        .position(|n| n == p)
                        .map(|i| variables[i].cardinality)
                        .ok_or_else(|| LearnError::UnknownVariable(p.clone()))
                })
                .collect::<Result<_, _>>()?;
            cpts.push(Cpt::new(
                variables[v].name.clone(),
                parents,
                variables[v].cardinality,
                parent_cards,
                table,
            )?);
        }
        BayesianNetwork::new(dag, variables, cpts)
    }
}

/// Shared counting core: joint counts of (parent configuration, child state)
/// over rows that are complete on the whole family.
pub(crate) struct FamilyCounts {
    /// counts[row * child_cardinality + state]
    pub counts: Vec<f64>,
    pub q: usize,
    pub r: usize,
    pub n_effective: usize,
}

pub(crate) fn count_family(
    data: &crate::discretize::DiscreteDataset,
    child: usize,
    parents: &[usize],
) -> FamilyCounts {
    let r = data.cardinality(child);
    let q: usize = parents.iter().map(|&p| data.cardinality(p)).product();
    let mut counts = vec![0.0; q * r];
    let mut n_effective = 0;
    'rows: for row in data.rows() {
        let Some(child_state) = row[child] else {
            continue;
        };
        let mut j = 0;
        for &p in parents {
            match row[p] {
                Some(s) => j = j * data.cardinality(p) + s,
                None => continue 'rows,
            }
        }
        counts[j * r + child_state] += 1.0;
        n_effective += 1;
    }
    FamilyCounts {
        counts,
        q,
        r,
        n_effective,
    }
}
