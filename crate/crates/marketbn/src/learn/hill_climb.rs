//! Greedy score-based structure search over add/delete/reverse moves with
//! seeded random restarts.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::discretize::DiscreteDataset;
use crate::graph::Dag;
use crate::seed::derive_seed;

use super::{LearnError, ScoreCache, ScoreSpec};

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Op {
    Add,
    Delete,
    Reverse,
}

/// A move must clear this margin to count as strictly improving. Score
/// deltas of true ties come out as last-ulp noise (adding the same cached
/// family scores in a different order), and accepting them makes
/// reverse/reverse pairs cycle forever.
const MIN_IMPROVEMENT: f64 = 1e-9;

/// Local search from the empty graph: the best strictly-improving move wins
/// each round (ties broken by operation, then parent and child name), then
/// `restarts - 1` extra climbs start from seeded random graphs and the best
/// final score is returned.
pub fn hill_climb(
    data: &DiscreteDataset,
    spec: &ScoreSpec,
    max_parents: usize,
    restarts: usize,
    seed: u64,
) -> Result<Dag, LearnError> {
    hill_climb_constrained(data, spec, max_parents, restarts, seed, &BTreeSet::new())
}

/// [`hill_climb`] with a set of forbidden directed edges that the search
/// never proposes.
pub fn hill_climb_constrained(
    data: &DiscreteDataset,
    spec: &ScoreSpec,
    max_parents: usize,
    restarts: usize,
    seed: u64,
    forbidden: &BTreeSet<(usize, usize)>,
) -> Result<Dag, LearnError> {
    let n = data.variables().len();
    if n < 2 {
        return Err(LearnError::TooFewVariables(n));
    }
    let names: Vec<String> = data.variables().iter().map(|v| v.name.clone()).collect();
    let empty = Dag::new(names)?;
    let mut cache = ScoreCache::new(data, *spec);

    let mut best: Option<(f64, Dag)> = None;
    for run in 0..restarts.max(1) {
        let start = if run == 0 {
            empty.clone()
        } else {
            let run_seed = derive_seed(seed, &["hill_climb_restart", &run.to_string()]);
            random_dag(&empty, max_parents, forbidden, &mut ChaCha8Rng::seed_from_u64(run_seed))
        };
        let (score, dag) = climb(&mut cache, start, max_parents, forbidden)?;
        if best.as_ref().map_or(true, |(s, _)| score > *s) {
            best = Some((score, dag));
        }
    }
    Ok(best.expect("at least one run").1)
}

fn climb(
    cache: &mut ScoreCache,
    mut dag: Dag,
    max_parents: usize,
    forbidden: &BTreeSet<(usize, usize)>,
) -> Result<(f64, Dag), LearnError> {
    let n = dag.node_count();
    let mut score = cache.graph(&dag)?;
    loop {
        // (delta, tie-break key, resulting graph)
        let mut best_move: Option<(f64, (Op, String, String), Dag)> = None;
        let consider =
            |delta: f64, key: (Op, String, String), next: Dag, best: &mut Option<_>| {
                let better = match best {
                    None => true,
                    Some((d, k, _)) => delta > *d || (delta == *d && key < *k),
                };
                if delta > MIN_IMPROVEMENT && better {
                    *best = Some((delta, key, next));
                }
            };

        for p in 0..n {
            for c in 0..n {
                if p == c {
                    continue;
                }
                let parents_c = dag.parents(c);
                if !dag.contains_edge(p, c) {
                    // Add p -> c
                    if forbidden.contains(&(p, c)) || parents_c.len() >= max_parents {
                        continue;
                    }
                    if let Ok(next) = dag.add_edge_by_index(p, c) {
                        let delta =
                            cache.family(c, &next.parents(c))? - cache.family(c, &parents_c)?;
                        let key = (
                            Op::Add,
                            dag.node_names()[p].clone(),
                            dag.node_names()[c].clone(),
                        );
                        consider(delta, key, next, &mut best_move);
                    }
                } else {
                    // Delete p -> c
                    let without = dag.remove_edge_by_index(p, c);
                    let delta =
                        cache.family(c, &without.parents(c))? - cache.family(c, &parents_c)?;
                    let key = (
                        Op::Delete,
                        dag.node_names()[p].clone(),
                        dag.node_names()[c].clone(),
                    );
                    consider(delta, key, without.clone(), &mut best_move);

                    // Reverse p -> c into c -> p
                    if !forbidden.contains(&(c, p)) && dag.parents(p).len() < max_parents {
                        if let Ok(next) = without.add_edge_by_index(c, p) {
                            let delta = cache.family(c, &next.parents(c))?
                                + cache.family(p, &next.parents(p))?
                                - cache.family(c, &parents_c)?
                                - cache.family(p, &dag.parents(p))?;
                            let key = (
                                Op::Reverse,
                                dag.node_names()[p].clone(),
                                dag.node_names()[c].clone(),
                            );
                            consider(delta, key, next, &mut best_move);
                        }
                    }
                }
            }
        }

        match best_move {
            Some((delta, _, next)) => {
                dag = next;
                score += delta;
            }
            None => return Ok((score, dag)),
        }
    }
}

/// Random DAG: a shuffled topological order with each admissible
/// predecessor edge included with probability 1/4, capped at `max_parents`.
fn random_dag(
    empty: &Dag,
    max_parents: usize,
    forbidden: &BTreeSet<(usize, usize)>,
    rng: &mut ChaCha8Rng,
) -> Dag {
    let n = empty.node_count();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut dag = empty.clone();
    for i in 1..n {
        let child = order[i];
        let mut predecessors: Vec<usize> = order[..i].to_vec();
        predecessors.shuffle(rng);
        let mut added = 0;
        for p in predecessors {
            if added >= max_parents {
                break;
            }
            if forbidden.contains(&(p, child)) || !rng.gen_bool(0.25) {
                continue;
            }
            dag = dag
                .add_edge_by_index(p, child)
                .expect("edges along a topological order cannot cycle");
            added += 1;
        }
    }
    dag
}
