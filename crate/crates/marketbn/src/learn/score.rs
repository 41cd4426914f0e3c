//! Decomposable family scores: BIC and the BDeu Dirichlet-multinomial
//! marginal likelihood (uniform structure prior, so graph score is just the
//! sum of family scores).

use std::collections::HashMap;

use statrs::function::gamma::ln_gamma;

use crate::discretize::DiscreteDataset;
use crate::graph::Dag;

use super::{count_family, LearnError, ScoreSpec};

/// Score of one child given a parent set. Rows with a missing value in any
/// involved column are dropped for this family only, which keeps the total
/// graph score decomposable.
pub fn family_score(
    data: &DiscreteDataset,
    child: usize,
    parents: &[usize],
    spec: &ScoreSpec,
) -> Result<f64, LearnError> {
    let fam = count_family(data, child, parents);
    if fam.n_effective == 0 {
        return Err(LearnError::EmptyEffectiveData {
            child: data.variables()[child].name.clone(),
        });
    }
    let (q, r) = (fam.q, fam.r);
    match spec {
        ScoreSpec::Bic => {
            let mut log_lik = 0.0;
            for j in 0..q {
                let row = &fam.counts[j * r..(j + 1) * r];
                let n_j: f64 = row.iter().sum();
                if n_j == 0.0 {
                    continue;
                }
                for &n_jk in row {
                    if n_jk > 0.0 {
                        log_lik += n_jk * (n_jk / n_j).ln();
                    }
                }
            }
            let penalty = 0.5 * (fam.n_effective as f64).ln() * ((r - 1) * q) as f64;
            Ok(log_lik - penalty)
        }
        ScoreSpec::Bdeu {
            equivalent_sample_size,
        } => {
            let ess = *equivalent_sample_size;
            assert!(ess > 0.0, "equivalent sample size must be positive");
            let a_j = ess / q as f64;
            let a_jk = ess / (q * r) as f64;
            let mut score = 0.0;
            for j in 0..q {
                let row = &fam.counts[j * r..(j + 1) * r];
                let n_j: f64 = row.iter().sum();
                if n_j == 0.0 {
                    continue;
                }
                score += ln_gamma(a_j) - ln_gamma(a_j + n_j);
                for &n_jk in row {
                    score += ln_gamma(a_jk + n_jk) - ln_gamma(a_jk);
                }
            }
            Ok(score)
        }
    }
}

/// Sum of family scores over every node of the graph.
pub fn graph_score(
    data: &DiscreteDataset,
    dag: &Dag,
    spec: &ScoreSpec,
) -> Result<f64, LearnError> {
    let mut total = 0.0;
    for v in 0..dag.node_count() {
        total += family_score(data, v, &dag.parents(v), spec)?;
    }
    Ok(total)
}

/// Memoising wrapper around [`family_score`]; hill climbing revisits the
/// same families constantly, especially across restarts.
pub struct ScoreCache<'a> {
    data: &'a DiscreteDataset,
    spec: ScoreSpec,
    memo: HashMap<(usize, Vec<usize>), f64>,
}

impl<'a> ScoreCache<'a> {
    pub fn new(data: &'a DiscreteDataset, spec: ScoreSpec) -> Self {
        ScoreCache {
            data,
            spec,
            memo: HashMap::new(),
        }
    }

    pub fn family(&mut self, child: usize, parents: &[usize]) -> Result<f64, LearnError> {
        debug_assert!(parents.windows(2).all(|w| w[0] < w[1]));
        if let Some(&s) = self.memo.get(&(child, parents.to_vec())) {
            return Ok(s);
        }
        let s = family_score(self.data, child, parents, &self.spec)?;
        self.memo.insert((child, parents.to_vec()), s);
        Ok(s)
    }

    pub fn graph(&mut self, dag: &Dag) -> Result<f64, LearnError> {
        let mut total = 0.0;
        for v in 0..dag.node_count() {
            total += self.family(v, &dag.parents(v))?;
        }
        Ok(total)
    }
}
