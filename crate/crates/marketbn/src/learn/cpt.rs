//! Maximum-likelihood CPT estimation with Dirichlet (additive) smoothing.

use crate::discretize::DiscreteDataset;
use crate::graph::Dag;

use super::{count_family, BayesianNetwork, Cpt, LearnError};

/// Fits one CPT per node: `(count + alpha) / (row_total + alpha * r_child)`.
/// With `alpha_smoothing > 0` unobserved parent configurations become
/// uniform rows; with `alpha_smoothing == 0` they are an error.
pub fn fit_cpts_mle(
    data: &DiscreteDataset,
    dag: &Dag,
    alpha_smoothing: f64,
) -> Result<BayesianNetwork, LearnError> {
    assert!(alpha_smoothing >= 0.0);
    check_alignment(data, dag)?;
    let mut cpts = Vec::with_capacity(dag.node_count());
    for v in 0..dag.node_count() {
        let parents = dag.parents(v);
        let fam = count_family(data, v, &parents);
        let mut table = Vec::with_capacity(fam.q);
        for j in 0..fam.q {
            let row = &fam.counts[j * fam.r..(j + 1) * fam.r];
            let total: f64 = row.iter().sum();
            if total == 0.0 && alpha_smoothing == 0.0 {
                return Err(LearnError::ZeroRowWithoutSmoothing {
                    child: data.variables()[v].name.clone(),
                    row: j,
                });
            }
            let denom = total + alpha_smoothing * fam.r as f64;
            table.push(
                row.iter()
                    .map(|&n| (n + alpha_smoothing) / denom)
                    .collect::<Vec<f64>>(),
            );
        }
        cpts.push(Cpt::new(
            data.variables()[v].name.clone(),
            parents
                .iter()
                .map(|&p| data.variables()[p].name.clone())
                .collect(),
            fam.r,
            parents.iter().map(|&p| data.cardinality(p)).collect(),
            table,
        )?);
    }
    BayesianNetwork::new(
        dag.clone(),
        data.variables().to_vec(),
        cpts,
    )
}

pub(crate) fn check_alignment(data: &DiscreteDataset, dag: &Dag) -> Result<(), LearnError> {
    for (v, name) in dag.node_names().iter().enumerate() {
        if data.variables().get(v).map(|var| var.name.as_str()) != Some(name.as_str()) {
            return Err(LearnError::UnknownVariable(name.clone()));
        }
    }
    if data.variables().len() != dag.node_count() {
        return Err(LearnError::TooFewVariables(dag.node_count()));
    }
    Ok(())
}
