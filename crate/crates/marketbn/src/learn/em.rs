//! Expectation-maximisation for CPTs under missing data.
//!
//! The E-step computes expected family counts per row by exact enumeration
//! over that row's missing variables given its observed ones; the M-step
//! re-estimates every table. With `alpha_smoothing == 0` this is plain
//! maximum-likelihood EM and the observed-data log-likelihood is
//! non-decreasing by the classical argument; with smoothing the M-step
//! maximises the posterior instead.

use crate::discretize::DiscreteDataset;
use crate::graph::Dag;

use super::cpt::check_alignment;
use super::{count_family, BayesianNetwork, Cpt, LearnError};

#[derive(Debug, Clone)]
pub struct EmFit {
    pub network: BayesianNetwork,
    /// Observed-data log-likelihood evaluated at the start of each iteration.
    pub log_likelihood: Vec<f64>,
    /// False when `max_iterations` ran out before the gain fell below
    /// tolerance. Not fatal; the last parameters are still returned.
    pub converged: bool,
}

pub fn fit_cpts_em(
    data: &DiscreteDataset,
    dag: &Dag,
    alpha_smoothing: f64,
    tolerance: f64,
    max_iterations: usize,
) -> Result<EmFit, LearnError> {
    assert!(alpha_smoothing >= 0.0 && tolerance >= 0.0 && max_iterations > 0);
    check_alignment(data, dag)?;
    for (v, var) in data.variables().iter().enumerate() {
        if data.rows().iter().all(|row| row[v].is_none()) {
            return Err(LearnError::NoObservationsForVariable(var.name.clone()));
        }
    }

    let mut net = initial_network(data, dag, alpha_smoothing)?;
    let mut trace: Vec<f64> = Vec::new();
    let mut converged = false;
    for _ in 0..max_iterations {
        let (expected, ll) = e_step(&net, data)?;
        if let Some(&prev) = trace.last() {
            if ll - prev < tolerance {
                trace.push(ll);
                converged = true;
                break;
            }
        }
        trace.push(ll);
        net = m_step(&net, &expected, alpha_smoothing)?;
    }
    Ok(EmFit {
        network: net,
        log_likelihood: trace,
        converged,
    })
}

/// Available-case start: per-family counts over rows complete on that
/// family, smoothed; parent configurations never seen start uniform.
fn initial_network(
    data: &DiscreteDataset,
    dag: &Dag,
    alpha: f64,
) -> Result<BayesianNetwork, LearnError> {
    let mut cpts = Vec::with_capacity(dag.node_count());
    for v in 0..dag.node_count() {
        let parents = dag.parents(v);
        let fam = count_family(data, v, &parents);
        let table = normalise_counts(&fam.counts, fam.q, fam.r, alpha);
        cpts.push(make_cpt(data, dag, v, table)?);
    }
    BayesianNetwork::new(dag.clone(), data.variables().to_vec(), cpts)
}

fn normalise_counts(counts: &[f64], q: usize, r: usize, alpha: f64) -> Vec<Vec<f64>> {
    (0..q)
        .map(|j| {
            let row = &counts[j * r..(j + 1) * r];
            let total: f64 = row.iter().sum();
            if total + alpha == 0.0 {
                vec![1.0 / r as f64; r]
            } else {
                let denom = total + alpha * r as f64;
                row.iter().map(|&c| (c + alpha) / denom).collect()
            }
        })
        .collect()
}

fn make_cpt(
    data: &DiscreteDataset,
    dag: &Dag,
    v: usize,
    table: Vec<Vec<f64>>,
) -> Result<Cpt, LearnError> {
    let parents = dag.parents(v);
    Cpt::new(
        data.variables()[v].name.clone(),
        parents
            .iter()
            .map(|&p| data.variables()[p].name.clone())
            .collect(),
        data.cardinality(v),
        parents.iter().map(|&p| data.cardinality(p)).collect(),
        table,
    )
}

type ExpectedCounts = Vec<Vec<f64>>;

fn e_step(
    net: &BayesianNetwork,
    data: &DiscreteDataset,
) -> Result<(ExpectedCounts, f64), LearnError> {
    let n = net.node_count();
    let parent_sets: Vec<Vec<usize>> = (0..n).map(|v| net.dag().parents(v)).collect();
    let mut counts: ExpectedCounts = (0..n)
        .map(|v| vec![0.0; net.cpt(v).row_count() * net.cpt(v).child_cardinality])
        .collect();
    let mut ll = 0.0;

    let mut assignment = vec![0usize; n];
    for (row_idx, row) in data.rows().iter().enumerate() {
        let missing: Vec<usize> = (0..n).filter(|&v| row[v].is_none()).collect();
        for v in 0..n {
            assignment[v] = row[v].unwrap_or(0);
        }
        if missing.is_empty() {
            let p = joint_probability(net, &parent_sets, &assignment);
            if p <= 0.0 {
                return Err(LearnError::ZeroProbabilityRow(row_idx));
            }
            ll += p.ln();
            accumulate(&mut counts, net, &parent_sets, &assignment, 1.0);
            continue;
        }

        // Two sweeps over the joint assignments of the missing variables:
        // one for the normaliser, one to spread the posterior weight.
        let total = sweep(net, &parent_sets, &missing, &mut assignment, |_, _| {});
        if total <= 0.0 {
            return Err(LearnError::ZeroProbabilityRow(row_idx));
        }
        ll += total.ln();
        let counts_ref = &mut counts;
        sweep(net, &parent_sets, &missing, &mut assignment, |full, w| {
            accumulate(counts_ref, net, &parent_sets, full, w / total);
        });
    }
    Ok((counts, ll))
}

/// Iterates every assignment of the missing variables (odometer order),
/// calling `visit` with the completed row and its joint probability.
/// Returns the probability sum.
fn sweep(
    net: &BayesianNetwork,
    parent_sets: &[Vec<usize>],
    missing: &[usize],
    assignment: &mut [usize],
    mut visit: impl FnMut(&[usize], f64),
) -> f64 {
    for &v in missing {
        assignment[v] = 0;
    }
    let mut total = 0.0;
    loop {
        let p = joint_probability(net, parent_sets, assignment);
        total += p;
        visit(assignment, p);
        // advance odometer
        let mut pos = missing.len();
        loop {
            if pos == 0 {
                return total;
            }
            pos -= 1;
            let v = missing[pos];
            assignment[v] += 1;
            if assignment[v] < net.cpt(v).child_cardinality {
                break;
            }
            assignment[v] = 0;
        }
    }
}

fn joint_probability(net: &BayesianNetwork, parent_sets: &[Vec<usize>], full: &[usize]) -> f64 {
    let mut p = 1.0;
    for v in 0..net.node_count() {
        let cpt = net.cpt(v);
        let states: Vec<usize> = parent_sets[v].iter().map(|&q| full[q]).collect();
        p *= cpt.table[cpt.row_index(&states)][full[v]];
        if p == 0.0 {
            return 0.0;
        }
    }
    p
}

fn accumulate(
    counts: &mut ExpectedCounts,
    net: &BayesianNetwork,
    parent_sets: &[Vec<usize>],
    full: &[usize],
    weight: f64,
) {
    for v in 0..net.node_count() {
        let cpt = net.cpt(v);
        let states: Vec<usize> = parent_sets[v].iter().map(|&q| full[q]).collect();
        let j = cpt.row_index(&states);
        counts[v][j * cpt.child_cardinality + full[v]] += weight;
    }
}

fn m_step(
    net: &BayesianNetwork,
    expected: &ExpectedCounts,
    alpha: f64,
) -> Result<BayesianNetwork, LearnError> {
    let mut next = net.clone();
    for v in 0..net.node_count() {
        let cpt = net.cpt(v);
        let table = normalise_counts(&expected[v], cpt.row_count(), cpt.child_cardinality, alpha);
        next = next.with_cpt(v, table)?;
    }
    Ok(next)
}
