//! Exact posterior inference on discrete networks: evidence conditioning,
//! target distributions, prediction and what-if deltas.
//!
//! The engine is variable elimination with a min-degree ordering over the
//! moralised graph. [`joint_brute_force`] enumerates the full joint instead
//! and exists as an independent oracle for the elimination path.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::learn::BayesianNetwork;

#[derive(Debug, Error, PartialEq)]
pub enum InferError {
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("state {state} out of range for `{variable}` (cardinality {cardinality})")]
    StateOutOfRange {
        variable: String,
        state: usize,
        cardinality: usize,
    },
    #[error("target `{0}` is part of the evidence")]
    TargetInEvidence(String),
    #[error("evidence has zero probability under the network")]
    ZeroProbabilityEvidence,
    #[error("joint state space exceeds 2^24 configurations")]
    StateSpaceTooLarge,
    #[error("`{0}` cannot be both the set node and a report node")]
    SetNodeAmongReports(String),
}

/// A partial state assignment, keyed by variable name. Each variable can
/// appear at most once; setting it again replaces the previous state.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Evidence(BTreeMap<String, usize>);

impl Evidence {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, variable: &str, state: usize) -> Self {
        self.set(variable, state);
        self
    }

    pub fn set(&mut self, variable: &str, state: usize) {
        self.0.insert(variable.to_string(), state);
    }

    pub fn contains(&self, variable: &str) -> bool {
        self.0.contains_key(variable)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, usize)> {
        self.0.iter().map(|(k, &v)| (k.as_str(), v))
    }

    /// Resolves names to node indices and validates the states.
    fn resolve(&self, net: &BayesianNetwork) -> Result<BTreeMap<usize, usize>, InferError> {
        let mut out = BTreeMap::new();
        for (name, &state) in &self.0 {
            let v = net
                .var_index(name)
                .ok_or_else(|| InferError::UnknownVariable(name.clone()))?;
            let cardinality = net.variables()[v].cardinality;
            if state >= cardinality {
                return Err(InferError::StateOutOfRange {
                    variable: name.clone(),
                    state,
                    cardinality,
                });
            }
            out.insert(v, state);
        }
        Ok(out)
    }
}

/// Posterior distribution of one variable over its states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorDistribution {
    pub variable: String,
    pub probabilities: Vec<f64>,
}

/// Exact `P(target | evidence)` by variable elimination.
pub fn eliminate(
    net: &BayesianNetwork,
    evidence: &Evidence,
    target: &str,
) -> Result<PosteriorDistribution, InferError> {
    Ok(eliminate_with_normalizer(net, evidence, target)?.0)
}

/// As [`eliminate`], but also returns `P(evidence)`; the sensitivity module
/// needs the unnormalised quantities.
pub(crate) fn eliminate_with_normalizer(
    net: &BayesianNetwork,
    evidence: &Evidence,
    target: &str,
) -> Result<(PosteriorDistribution, f64), InferError> {
    let target_idx = net
        .var_index(target)
        .ok_or_else(|| InferError::UnknownVariable(target.to_string()))?;
    if evidence.contains(target) {
        return Err(InferError::TargetInEvidence(target.to_string()));
    }
    let assignments = evidence.resolve(net)?;

    // CPT factors, restricted by the evidence.
    let mut factors: Vec<Factor> = (0..net.node_count())
        .map(|v| Factor::from_cpt(net, v))
        .collect();
    for (&v, &s) in &assignments {
        for f in &mut factors {
            if f.vars.contains(&v) {
                *f = f.restrict(v, s);
            }
        }
    }

    for v in elimination_order(net, &assignments, target_idx) {
        let (mut touching, rest): (Vec<Factor>, Vec<Factor>) =
            factors.into_iter().partition(|f| f.vars.contains(&v));
        factors = rest;
        let mut product = touching.pop().expect("var appears in some factor");
        for f in touching {
            product = product.multiply(&f);
        }
        factors.push(product.sum_out(v));
    }

    let mut result = Factor::constant(1.0);
    for f in &factors {
        result = result.multiply(f);
    }
    debug_assert_eq!(result.vars, vec![target_idx]);

    let p_evidence: f64 = result.values.iter().sum();
    if p_evidence <= 0.0 {
        return Err(InferError::ZeroProbabilityEvidence);
    }
    Ok((
        PosteriorDistribution {
            variable: target.to_string(),
            probabilities: result.values.iter().map(|v| v / p_evidence).collect(),
        },
        p_evidence,
    ))
}

/// Min-degree elimination order over the moralised interaction graph,
/// ties broken by declaration index. Evidence variables are already
/// restricted away; the target is never eliminated.
fn elimination_order(
    net: &BayesianNetwork,
    evidence: &BTreeMap<usize, usize>,
    target: usize,
) -> Vec<usize> {
    let n = net.node_count();
    let mut neighbours: Vec<std::collections::BTreeSet<usize>> =
        vec![std::collections::BTreeSet::new(); n];
    let connect = |scope: Vec<usize>, neighbours: &mut Vec<std::collections::BTreeSet<usize>>| {
        for (i, &a) in scope.iter().enumerate() {
            for &b in &scope[i + 1..] {
                neighbours[a].insert(b);
                neighbours[b].insert(a);
            }
        }
    };
    for v in 0..n {
        let mut scope: Vec<usize> = net.dag().parents(v);
        scope.push(v);
        scope.retain(|u| !evidence.contains_key(u));
        connect(scope, &mut neighbours);
    }

    let mut alive: Vec<bool> = (0..n)
        .map(|v| v != target && !evidence.contains_key(&v))
        .collect();
    let mut order = Vec::new();
    loop {
        let next = (0..n)
            .filter(|&v| alive[v])
            .min_by_key(|&v| (neighbours[v].iter().filter(|&&u| alive[u] || u == target).count(), v));
        let Some(v) = next else { break };
        alive[v] = false;
        order.push(v);
        let around: Vec<usize> = neighbours[v]
            .iter()
            .copied()
            .filter(|&u| alive[u] || u == target)
            .collect();
        connect(around, &mut neighbours);
    }
    order
}

/// Full-joint enumeration oracle: builds `P(target | evidence)` directly
/// from the factorisation. Refuses state spaces above 2^24 configurations.
pub fn joint_brute_force(
    net: &BayesianNetwork,
    evidence: &Evidence,
    target: &str,
) -> Result<PosteriorDistribution, InferError> {
    let target_idx = net
        .var_index(target)
        .ok_or_else(|| InferError::UnknownVariable(target.to_string()))?;
    if evidence.contains(target) {
        return Err(InferError::TargetInEvidence(target.to_string()));
    }
    let assignments = evidence.resolve(net)?;

    let n = net.node_count();
    let mut configs: u64 = 1;
    for v in 0..n {
        configs = configs.saturating_mul(net.variables()[v].cardinality as u64);
        if configs > (1 << 24) {
            return Err(InferError::StateSpaceTooLarge);
        }
    }

    let parent_sets: Vec<Vec<usize>> = (0..n).map(|v| net.dag().parents(v)).collect();
    let mut totals = vec![0.0; net.variables()[target_idx].cardinality];
    let mut assignment = vec![0usize; n];
    'outer: loop {
        let consistent = assignments.iter().all(|(&v, &s)| assignment[v] == s);
        if consistent {
            let mut p = 1.0;
            for v in 0..n {
                let cpt = net.cpt(v);
                let states: Vec<usize> = parent_sets[v].iter().map(|&q| assignment[q]).collect();
                p *= cpt.table[cpt.row_index(&states)][assignment[v]];
            }
            totals[assignment[target_idx]] += p;
        }
        // advance odometer
        let mut pos = n;
        loop {
            if pos == 0 {
                break 'outer;
            }
            pos -= 1;
            assignment[pos] += 1;
            if assignment[pos] < net.variables()[pos].cardinality {
                break;
            }
            assignment[pos] = 0;
        }
    }

    let z: f64 = totals.iter().sum();
    if z <= 0.0 {
        return Err(InferError::ZeroProbabilityEvidence);
    }
    Ok(PosteriorDistribution {
        variable: target.to_string(),
        probabilities: totals.iter().map(|t| t / z).collect(),
    })
}

/// Most probable target state under the evidence; ties go to the lowest
/// state index.
pub fn predict(
    net: &BayesianNetwork,
    evidence: &Evidence,
    target: &str,
) -> Result<(usize, PosteriorDistribution), InferError> {
    let posterior = eliminate(net, evidence, target)?;
    let mut best = 0;
    for (k, &p) in posterior.probabilities.iter().enumerate() {
        if p > posterior.probabilities[best] {
            best = k;
        }
    }
    Ok((best, posterior))
}

/// Marginal shift of one report node when `set_node` is fixed to `set_state`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeDelta {
    pub node: String,
    pub baseline: Vec<f64>,
    pub conditioned: Vec<f64>,
    pub delta: Vec<f64>,
}

/// Fixing one node to one state and recording how every report node's
/// marginal moves reproduces the usual inference-diagram reading of a
/// network as data.
#[derive(Debug, Clone, PartialEq)]
pub struct WhatIfReport {
    pub set_node: String,
    pub set_state: usize,
    pub set_state_label: String,
    pub nodes: Vec<NodeDelta>,
}

impl WhatIfReport {
    /// `{set: {node, state}, baseline: {..}, conditioned: {..}, deltas: {..}}`
    pub fn to_json(&self) -> serde_json::Value {
        let map = |pick: fn(&NodeDelta) -> &Vec<f64>| -> serde_json::Value {
            let mut m = serde_json::Map::new();
            for d in &self.nodes {
                m.insert(
                    d.node.clone(),
                    serde_json::json!(pick(d)),
                );
            }
            serde_json::Value::Object(m)
        };
        serde_json::json!({
            "set": {
                "node": self.set_node,
                "state": self.set_state,
                "state_label": self.set_state_label,
            },
            "baseline": map(|d| &d.baseline),
            "conditioned": map(|d| &d.conditioned),
            "deltas": map(|d| &d.delta),
        })
    }
}

pub fn what_if(
    net: &BayesianNetwork,
    set_node: &str,
    set_state: usize,
    report_nodes: &[&str],
) -> Result<WhatIfReport, InferError> {
    let set_idx = net
        .var_index(set_node)
        .ok_or_else(|| InferError::UnknownVariable(set_node.to_string()))?;
    let cardinality = net.variables()[set_idx].cardinality;
    if set_state >= cardinality {
        return Err(InferError::StateOutOfRange {
            variable: set_node.to_string(),
            state: set_state,
            cardinality,
        });
    }
    if report_nodes.contains(&set_node) {
        return Err(InferError::SetNodeAmongReports(set_node.to_string()));
    }
    let conditioning = Evidence::new().with(set_node, set_state);
    let empty = Evidence::new();
    let mut nodes = Vec::with_capacity(report_nodes.len());
    for &name in report_nodes {
        let baseline = eliminate(net, &empty, name)?.probabilities;
        let conditioned = eliminate(net, &conditioning, name)?.probabilities;
        let delta = conditioned
            .iter()
            .zip(&baseline)
            .map(|(c, b)| c - b)
            .collect();
        nodes.push(NodeDelta {
            node: name.to_string(),
            baseline,
            conditioned,
            delta,
        });
    }
    Ok(WhatIfReport {
        set_node: set_node.to_string(),
        set_state,
        set_state_label: net.variables()[set_idx].state_labels[set_state].clone(),
        nodes,
    })
}

/// A non-negative function over the joint states of a sorted variable set,
/// stored row-major.
#[derive(Debug, Clone)]
struct Factor {
    vars: Vec<usize>,
    cards: Vec<usize>,
    values: Vec<f64>,
}

impl Factor {
    fn constant(value: f64) -> Self {
        Factor {
            vars: vec![],
            cards: vec![],
            values: vec![value],
        }
    }

    fn from_cpt(net: &BayesianNetwork, node: usize) -> Self {
        let cpt = net.cpt(node);
        let parents = net.dag().parents(node);
        let mut vars: Vec<usize> = parents.clone();
        vars.push(node);
        vars.sort_unstable();
        let cards: Vec<usize> = vars.iter().map(|&v| net.variables()[v].cardinality).collect();
        let mut values = vec![0.0; cards.iter().product()];
        let mut assignment = vec![0usize; vars.len()];
        for (flat, value) in values.iter_mut().enumerate() {
            let mut rem = flat;
            for i in (0..vars.len()).rev() {
                assignment[i] = rem % cards[i];
                rem /= cards[i];
            }
            let child_state = assignment[vars.iter().position(|&v| v == node).unwrap()];
            let parent_states: Vec<usize> = parents
                .iter()
                .map(|p| assignment[vars.iter().position(|v| v == p).unwrap()])
                .collect();
            *value = cpt.table[cpt.row_index(&parent_states)][child_state];
        }
        Factor { vars, cards, values }
    }

    fn position(&self, var: usize) -> usize {
        self.vars.iter().position(|&v| v == var).expect("var in scope")
    }

    fn restrict(&self, var: usize, state: usize) -> Factor {
        let pos = self.position(var);
        let mut vars = self.vars.clone();
        let mut cards = self.cards.clone();
        vars.remove(pos);
        cards.remove(pos);
        let mut values = vec![0.0; cards.iter().product::<usize>().max(1)];
        let mut assignment = vec![0usize; self.vars.len()];
        for (flat, value) in values.iter_mut().enumerate() {
            let mut rem = flat;
            for i in (0..vars.len()).rev() {
                let j = if i >= pos { i + 1 } else { i };
                assignment[j] = rem % cards[i];
                rem /= cards[i];
            }
            assignment[pos] = state;
            *value = self.values[self.flat_index(&assignment)];
        }
        Factor { vars, cards, values }
    }

    fn flat_index(&self, assignment: &[usize]) -> usize {
        let mut idx = 0;
        for (i, &card) in self.cards.iter().enumerate() {
            idx = idx * card + assignment[i];
        }
        idx
    }

    fn multiply(&self, other: &Factor) -> Factor {
        let mut vars: Vec<usize> = self.vars.clone();
        for &v in &other.vars {
            if !vars.contains(&v) {
                vars.push(v);
            }
        }
        vars.sort_unstable();
        let cards: Vec<usize> = vars
            .iter()
            .map(|&v| {
                self.vars
                    .iter()
                    .position(|&u| u == v)
                    .map(|i| self.cards[i])
                    .unwrap_or_else(|| other.cards[other.position(v)])
            })
            .collect();
        let self_pos: Vec<usize> = self.vars.iter().map(|&v| vars.iter().position(|&u| u == v).unwrap()).collect();
        let other_pos: Vec<usize> = other.vars.iter().map(|&v| vars.iter().position(|&u| u == v).unwrap()).collect();

        let mut values = vec![0.0; cards.iter().product::<usize>().max(1)];
        let mut assignment = vec![0usize; vars.len()];
        for (flat, value) in values.iter_mut().enumerate() {
            let mut rem = flat;
            for i in (0..vars.len()).rev() {
                assignment[i] = rem % cards[i];
                rem /= cards[i];
            }
            let a = self.values[flat_of(&self_pos, &self.cards, &assignment)];
            let b = other.values[flat_of(&other_pos, &other.cards, &assignment)];
            *value = a * b;
        }
        Factor { vars, cards, values }
    }

    fn sum_out(&self, var: usize) -> Factor {
        let pos = self.position(var);
        let mut vars = self.vars.clone();
        let mut cards = self.cards.clone();
        let removed_card = cards[pos];
        vars.remove(pos);
        cards.remove(pos);
        let mut values = vec![0.0; cards.iter().product::<usize>().max(1)];
        let mut assignment = vec![0usize; self.vars.len()];
        for (flat, value) in values.iter_mut().enumerate() {
            let mut rem = flat;
            for i in (0..vars.len()).rev() {
                let j = if i >= pos { i + 1 } else { i };
                assignment[j] = rem % cards[i];
                rem /= cards[i];
            }
            let mut sum = 0.0;
            for s in 0..removed_card {
                assignment[pos] = s;
                sum += self.values[self.flat_index(&assignment)];
            }
            *value = sum;
        }
        Factor { vars, cards, values }
    }
}

fn flat_of(positions: &[usize], cards: &[usize], assignment: &[usize]) -> usize {
    let mut idx = 0;
    for (i, &p) in positions.iter().enumerate() {
        idx = idx * cards[i] + assignment[p];
    }
    idx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretize::{label_states, Variable};
    use crate::graph::Dag;
    use crate::learn::Cpt;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn two_node_net() -> BayesianNetwork {
        let dag = Dag::new(["A", "B"]).unwrap().add_edge("A", "B").unwrap();
        let vars = ["A", "B"]
            .iter()
            .map(|n| Variable {
                name: n.to_string(),
                cardinality: 2,
                state_labels: label_states(2).unwrap(),
            })
            .collect();
        let cpts = vec![
            Cpt::new("A".into(), vec![], 2, vec![], vec![vec![0.5, 0.5]]).unwrap(),
            Cpt::new(
                "B".into(),
                vec!["A".into()],
                2,
                vec![2],
                vec![vec![0.9, 0.1], vec![0.2, 0.8]],
            )
            .unwrap(),
        ];
        BayesianNetwork::new(dag, vars, cpts).unwrap()
    }

    /// Random structure and random tables over 2-state nodes.
    pub(crate) fn random_net(n: usize, seed: u64) -> BayesianNetwork {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let names: Vec<String> = (0..n).map(|i| format!("V{i}")).collect();
        let mut dag = Dag::new(names.clone()).unwrap();
        for c in 1..n {
            for p in 0..c {
                if rng.gen_bool(0.35) && dag.parents(c).len() < 3 {
                    dag = dag.add_edge_by_index(p, c).unwrap();
                }
            }
        }
        let vars: Vec<Variable> = names
            .iter()
            .map(|name| Variable {
                name: name.clone(),
                cardinality: 2,
                state_labels: label_states(2).unwrap(),
            })
            .collect();
        let cpts = (0..n)
            .map(|v| {
                let parents = dag.parents(v);
                let q = 1usize << parents.len();
                let table: Vec<Vec<f64>> = (0..q)
                    .map(|_| {
                        let p: f64 = rng.gen_range(0.05..0.95);
                        vec![p, 1.0 - p]
                    })
                    .collect();
                Cpt::new(
                    names[v].clone(),
                    parents.iter().map(|&p| names[p].clone()).collect(),
                    2,
                    vec![2; parents.len()],
                    table,
                )
                .unwrap()
            })
            .collect();
        BayesianNetwork::new(dag, vars, cpts).unwrap()
    }

    #[test]
    fn marginalisation_by_hand() {
        let net = two_node_net();
        let post = eliminate(&net, &Evidence::new(), "B").unwrap();
        assert!((post.probabilities[0] - 0.55).abs() < 1e-12);
        assert!((post.probabilities[1] - 0.45).abs() < 1e-12);
    }

    #[test]
    fn bayes_rule_by_hand() {
        let net = two_node_net();
        let post = eliminate(&net, &Evidence::new().with("B", 1), "A").unwrap();
        assert!((post.probabilities[0] - 1.0 / 9.0).abs() < 1e-12);
        assert!((post.probabilities[1] - 8.0 / 9.0).abs() < 1e-12);
    }

    #[test]
    fn elimination_matches_brute_force_on_random_nets() {
        for seed in 0..30 {
            let n = 3 + (seed as usize % 10);
            let net = random_net(n, seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed + 1000);
            let mut evidence = Evidence::new();
            for v in 0..n {
                if rng.gen_bool(0.3) {
                    evidence.set(&format!("V{v}"), rng.gen_range(0..2));
                }
            }
            let target = format!("V{}", rng.gen_range(0..n));
            if evidence.contains(&target) {
                continue;
            }
            let fast = eliminate(&net, &evidence, &target).unwrap();
            let slow = joint_brute_force(&net, &evidence, &target).unwrap();
            for (a, b) in fast.probabilities.iter().zip(&slow.probabilities) {
                assert!((a - b).abs() < 1e-9, "seed {seed}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn brute_force_identity_prior() {
        let dag = Dag::new(["X"]).unwrap();
        let vars = vec![Variable {
            name: "X".into(),
            cardinality: 2,
            state_labels: label_states(2).unwrap(),
        }];
        let cpts = vec![Cpt::new("X".into(), vec![], 2, vec![], vec![vec![0.3, 0.7]]).unwrap()];
        let net = BayesianNetwork::new(dag, vars, cpts).unwrap();
        let post = joint_brute_force(&net, &Evidence::new(), "X").unwrap();
        assert_eq!(post.probabilities, vec![0.3, 0.7]);
    }

    fn deterministic_chain() -> BayesianNetwork {
        let dag = Dag::new(["A", "B"]).unwrap().add_edge("A", "B").unwrap();
        let vars = ["A", "B"]
            .iter()
            .map(|n| Variable {
                name: n.to_string(),
                cardinality: 2,
                state_labels: label_states(2).unwrap(),
            })
            .collect();
        let cpts = vec![
            Cpt::new("A".into(), vec![], 2, vec![], vec![vec![0.5, 0.5]]).unwrap(),
            Cpt::new(
                "B".into(),
                vec!["A".into()],
                2,
                vec![2],
                vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            )
            .unwrap(),
        ];
        BayesianNetwork::new(dag, vars, cpts).unwrap()
    }

    #[test]
    fn deterministic_inversion() {
        let net = deterministic_chain();
        let post = joint_brute_force(&net, &Evidence::new().with("B", 1), "A").unwrap();
        assert_eq!(post.probabilities, vec![0.0, 1.0]);
        let ve = eliminate(&net, &Evidence::new().with("B", 1), "A").unwrap();
        assert_eq!(ve.probabilities, vec![0.0, 1.0]);
    }

    #[test]
    fn zero_probability_evidence_is_an_error() {
        let net = deterministic_chain();
        // B copies A, so A=0 with B=1 is impossible.
        let impossible = Evidence::new().with("A", 0).with("B", 1);
        // Query something else: add a third isolated node? Two-node net, so
        // query A with evidence on both is invalid; instead query B given A=0
        // after making B's evidence impossible through a chained query.
        let err = eliminate(&net, &impossible, "A").unwrap_err();
        assert_eq!(err, InferError::TargetInEvidence("A".to_string()));

        // Proper zero-probability case on a three-node chain.
        let dag = Dag::new(["A", "B", "C"])
            .unwrap()
            .add_edge("A", "B")
            .unwrap()
            .add_edge("B", "C")
            .unwrap();
        let vars = ["A", "B", "C"]
            .iter()
            .map(|n| Variable {
                name: n.to_string(),
                cardinality: 2,
                state_labels: label_states(2).unwrap(),
            })
            .collect();
        let copy = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let cpts = vec![
            Cpt::new("A".into(), vec![], 2, vec![], vec![vec![0.5, 0.5]]).unwrap(),
            Cpt::new("B".into(), vec!["A".into()], 2, vec![2], copy.clone()).unwrap(),
            Cpt::new("C".into(), vec!["B".into()], 2, vec![2], copy).unwrap(),
        ];
        let net3 = BayesianNetwork::new(dag, vars, cpts).unwrap();
        let impossible = Evidence::new().with("A", 0).with("C", 1);
        assert_eq!(
            eliminate(&net3, &impossible, "B").unwrap_err(),
            InferError::ZeroProbabilityEvidence
        );
        assert_eq!(
            joint_brute_force(&net3, &impossible, "B").unwrap_err(),
            InferError::ZeroProbabilityEvidence
        );
    }

    #[test]
    fn explaining_away_on_a_collider() {
        // A, B independent causes; C = noisy OR.
        let dag = Dag::new(["A", "B", "C"])
            .unwrap()
            .add_edge("A", "C")
            .unwrap()
            .add_edge("B", "C")
            .unwrap();
        let vars = ["A", "B", "C"]
            .iter()
            .map(|n| Variable {
                name: n.to_string(),
                cardinality: 2,
                state_labels: label_states(2).unwrap(),
            })
            .collect();
        let cpts = vec![
            Cpt::new("A".into(), vec![], 2, vec![], vec![vec![0.7, 0.3]]).unwrap(),
            Cpt::new("B".into(), vec![], 2, vec![], vec![vec![0.7, 0.3]]).unwrap(),
            Cpt::new(
                "C".into(),
                vec!["A".into(), "B".into()],
                2,
                vec![2, 2],
                vec![
                    vec![0.99, 0.01],
                    vec![0.2, 0.8],
                    vec![0.2, 0.8],
                    vec![0.05, 0.95],
                ],
            )
            .unwrap(),
        ];
        let net = BayesianNetwork::new(dag, vars, cpts).unwrap();
        let given_c = joint_brute_force(&net, &Evidence::new().with("C", 1), "A").unwrap();
        let given_cb = joint_brute_force(
            &net,
            &Evidence::new().with("C", 1).with("B", 1),
            "A",
        )
        .unwrap();
        assert!(given_c.probabilities[1] > given_cb.probabilities[1]);
    }

    #[test]
    fn predict_argmax_and_tie_break() {
        let net = two_node_net();
        let (state, post) = predict(&net, &Evidence::new(), "B").unwrap();
        assert_eq!(state, 0);
        assert!((post.probabilities[0] - 0.55).abs() < 1e-12);

        // An isolated uniform node always ties; the tie goes to state 0.
        let dag = Dag::new(["U"]).unwrap();
        let vars = vec![Variable {
            name: "U".into(),
            cardinality: 2,
            state_labels: label_states(2).unwrap(),
        }];
        let cpts = vec![Cpt::new("U".into(), vec![], 2, vec![], vec![vec![0.5, 0.5]]).unwrap()];
        let uniform = BayesianNetwork::new(dag, vars, cpts).unwrap();
        let (state, _) = predict(&uniform, &Evidence::new(), "U").unwrap();
        assert_eq!(state, 0);
    }

    #[test]
    fn d_separated_evidence_leaves_posterior_unchanged() {
        // A -> B plus an isolated C: conditioning on C must not move B.
        let dag = Dag::new(["A", "B", "C"]).unwrap().add_edge("A", "B").unwrap();
        let vars = ["A", "B", "C"]
            .iter()
            .map(|n| Variable {
                name: n.to_string(),
                cardinality: 2,
                state_labels: label_states(2).unwrap(),
            })
            .collect();
        let cpts = vec![
            Cpt::new("A".into(), vec![], 2, vec![], vec![vec![0.6, 0.4]]).unwrap(),
            Cpt::new(
                "B".into(),
                vec!["A".into()],
                2,
                vec![2],
                vec![vec![0.9, 0.1], vec![0.2, 0.8]],
            )
            .unwrap(),
            Cpt::new("C".into(), vec![], 2, vec![], vec![vec![0.25, 0.75]]).unwrap(),
        ];
        let net = BayesianNetwork::new(dag, vars, cpts).unwrap();
        let plain = eliminate(&net, &Evidence::new(), "B").unwrap();
        let with_c = eliminate(&net, &Evidence::new().with("C", 0), "B").unwrap();
        for (a, b) in plain.probabilities.iter().zip(&with_c.probabilities) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn what_if_deltas() {
        // Independent nodes: all deltas vanish.
        let dag = Dag::new(["A", "B"]).unwrap();
        let vars = ["A", "B"]
            .iter()
            .map(|n| Variable {
                name: n.to_string(),
                cardinality: 2,
                state_labels: label_states(2).unwrap(),
            })
            .collect();
        let cpts = vec![
            Cpt::new("A".into(), vec![], 2, vec![], vec![vec![0.5, 0.5]]).unwrap(),
            Cpt::new("B".into(), vec![], 2, vec![], vec![vec![0.3, 0.7]]).unwrap(),
        ];
        let net = BayesianNetwork::new(dag, vars, cpts).unwrap();
        let report = what_if(&net, "A", 1, &["B"]).unwrap();
        assert!(report.nodes[0].delta.iter().all(|d| d.abs() < 1e-12));

        // A -> B: the conditioned marginal is the CPT row.
        let net = two_node_net();
        let report = what_if(&net, "A", 1, &["B"]).unwrap();
        assert!((report.nodes[0].conditioned[1] - 0.8).abs() < 1e-12);
        assert!((report.nodes[0].delta[1] - (0.8 - 0.45)).abs() < 1e-12);
    }

    #[test]
    fn what_if_is_compositional_on_a_random_net() {
        let net = random_net(7, 99);
        let report = what_if(&net, "V0", 1, &["V1", "V2", "V3", "V4", "V5", "V6"]).unwrap();
        for d in &report.nodes {
            let baseline = eliminate(&net, &Evidence::new(), &d.node).unwrap();
            let conditioned =
                eliminate(&net, &Evidence::new().with("V0", 1), &d.node).unwrap();
            for k in 0..2 {
                assert!((d.baseline[k] - baseline.probabilities[k]).abs() < 1e-12);
                assert!((d.conditioned[k] - conditioned.probabilities[k]).abs() < 1e-12);
                assert!(
                    (d.delta[k] - (conditioned.probabilities[k] - baseline.probabilities[k]))
                        .abs()
                        < 1e-12
                );
            }
        }
    }

    #[test]
    fn what_if_json_shape() {
        let net = two_node_net();
        let report = what_if(&net, "A", 0, &["B"]).unwrap();
        let doc = report.to_json();
        assert_eq!(doc["set"]["node"], "A");
        assert_eq!(doc["set"]["state"], 0);
        assert!(doc["baseline"]["B"].is_array());
        assert!(doc["conditioned"]["B"].is_array());
        assert!(doc["deltas"]["B"].is_array());
    }
}
