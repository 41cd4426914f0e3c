//! PC constraint-based structure learning: skeleton discovery through
//! conditional-independence tests with growing conditioning sets, v-structure
//! orientation, Meek propagation, and a deterministic declaration-order
//! fallback that turns the partially directed result into a concrete DAG.

use std::collections::{BTreeMap, BTreeSet};

use crate::discretize::DiscreteDataset;
use crate::graph::Dag;

use super::{chi_square_ci_test, LearnError};

/// Learns a DAG at the given significance level. Edges the tests cannot
/// orient are directed from the lower declaration index to the higher one
/// (flipped only if that would close a cycle), so the output is a pure
/// function of the data.
pub fn pc_learn(data: &DiscreteDataset, alpha: f64) -> Result<Dag, LearnError> {
    let n = data.variables().len();
    if n < 2 {
        return Err(LearnError::TooFewVariables(n));
    }

    // --- Skeleton phase ---
    let mut adj: Vec<BTreeSet<usize>> = (0..n)
        .map(|v| (0..n).filter(|&u| u != v).collect())
        .collect();
    let mut sepsets: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();

    let mut level = 0usize;
    loop {
        let mut testable = false;
        let pairs: Vec<(usize, usize)> = (0..n)
            .flat_map(|x| (x + 1..n).map(move |y| (x, y)))
            .collect();
        for (x, y) in pairs {
            if !adj[x].contains(&y) {
                continue;
            }
            'sides: for (from, to) in [(x, y), (y, x)] {
                let candidates: Vec<usize> =
                    adj[from].iter().copied().filter(|&v| v != to).collect();
                if candidates.len() < level {
                    continue;
                }
                testable = true;
                for subset in combinations(&candidates, level) {
                    let result = chi_square_ci_test(data, x, y, &subset, alpha)?;
                    if result.independent {
                        adj[x].remove(&y);
                        adj[y].remove(&x);
                        sepsets.insert((x, y), subset);
                        break 'sides;
                    }
                }
            }
        }
        if !testable {
            break;
        }
        level += 1;
    }

    // --- V-structures: x - z - y with x, y non-adjacent and z outside
    // sepset(x, y) becomes x -> z <- y. ---
    let mut oriented: BTreeSet<(usize, usize)> = BTreeSet::new();
    for z in 0..n {
        let neighbours: Vec<usize> = adj[z].iter().copied().collect();
        for (i, &x) in neighbours.iter().enumerate() {
            for &y in &neighbours[i + 1..] {
                if adj[x].contains(&y) {
                    continue;
                }
                let sep = sepsets.get(&(x.min(y), x.max(y)));
                if sep.map_or(true, |s| !s.contains(&z)) {
                    orient(&mut oriented, x, z);
                    orient(&mut oriented, y, z);
                }
            }
        }
    }

    meek_closure(&adj, &mut oriented);

    // --- Declaration-order fallback to a full DAG ---
    loop {
        let undirected = first_undirected(&adj, &oriented);
        let Some((i, j)) = undirected else { break };
        if creates_cycle(&oriented, i, j) {
            oriented.insert((j, i));
        } else {
            oriented.insert((i, j));
        }
        meek_closure(&adj, &mut oriented);
    }

    let names: Vec<String> = data.variables().iter().map(|v| v.name.clone()).collect();
    let mut dag = Dag::new(names)?;
    for &(p, c) in &oriented {
        dag = dag.add_edge_by_index(p, c)?;
    }
    Ok(dag)
}

fn orient(oriented: &mut BTreeSet<(usize, usize)>, from: usize, to: usize) {
    // First orientation wins; a conflicting later v-structure never
    // overwrites, keeping the procedure deterministic.
    if !oriented.contains(&(to, from)) {
        oriented.insert((from, to));
    }
}

fn is_undirected(
    adj: &[BTreeSet<usize>],
    oriented: &BTreeSet<(usize, usize)>,
    a: usize,
    b: usize,
) -> bool {
    adj[a].contains(&b) && !oriented.contains(&(a, b)) && !oriented.contains(&(b, a))
}

fn first_undirected(
    adj: &[BTreeSet<usize>],
    oriented: &BTreeSet<(usize, usize)>,
) -> Option<(usize, usize)> {
    let n = adj.len();
    for i in 0..n {
        for j in i + 1..n {
            if is_undirected(adj, oriented, i, j) {
                return Some((i, j));
            }
        }
    }
    None
}

fn creates_cycle(oriented: &BTreeSet<(usize, usize)>, from: usize, to: usize) -> bool {
    // Adding from -> to closes a cycle iff `to` already reaches `from`.
    let mut stack = vec![to];
    let mut seen = BTreeSet::new();
    while let Some(v) = stack.pop() {
        if v == from {
            return true;
        }
        for &(p, c) in oriented {
            if p == v && seen.insert(c) {
                stack.push(c);
            }
        }
    }
    false
}

/// Meek rules R1-R3 applied to a fixpoint.
fn meek_closure(adj: &[BTreeSet<usize>], oriented: &mut BTreeSet<(usize, usize)>) {
    let n = adj.len();
    loop {
        let mut changed = false;
        // R1: a -> b, b - c, a and c non-adjacent  =>  b -> c
        for &(a, b) in oriented.clone().iter() {
            for &c in &adj[b] {
                if c != a && is_undirected(adj, oriented, b, c) && !adj[a].contains(&c) {
                    orient(oriented, b, c);
                    changed = true;
                }
            }
        }
        // R2: a -> c -> b with a - b  =>  a -> b
        for a in 0..n {
            for b in 0..n {
                if a == b || !is_undirected(adj, oriented, a, b) {
                    continue;
                }
                let chain = (0..n).any(|c| {
                    oriented.contains(&(a, c)) && oriented.contains(&(c, b))
                });
                if chain {
                    orient(oriented, a, b);
                    changed = true;
                }
            }
        }
        // R3: a - b, a - c, a - d, c -> b, d -> b, c and d non-adjacent  =>  a -> b
        for a in 0..n {
            for b in 0..n {
                if a == b || !is_undirected(adj, oriented, a, b) {
                    continue;
                }
                let spouses: Vec<usize> = (0..n)
                    .filter(|&c| {
                        c != a
                            && c != b
                            && is_undirected(adj, oriented, a, c)
                            && oriented.contains(&(c, b))
                    })
                    .collect();
                let found = spouses.iter().enumerate().any(|(i, &c)| {
                    spouses[i + 1..]
                        .iter()
                        .any(|&d| !adj[c].contains(&d))
                });
                if found {
                    orient(oriented, a, b);
                    changed = true;
                }
            }
        }
        if !changed {
            return;
        }
    }
}

/// All size-k index subsets of `items` in lexicographic order.
fn combinations(items: &[usize], k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(k);
    fn recurse(
        items: &[usize],
        k: usize,
        start: usize,
        current: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
    ) {
        if current.len() == k {
            out.push(current.clone());
            return;
        }
        for i in start..items.len() {
            current.push(items[i]);
            recurse(items, k, i + 1, current, out);
            current.pop();
        }
    }
    recurse(items, k, 0, &mut current, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learn::tests::binary_variable;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn dataset(names: &[&str], rows: Vec<Vec<usize>>) -> DiscreteDataset {
        DiscreteDataset::new(
            names.iter().map(|n| binary_variable(n)).collect(),
            rows.into_iter()
                .map(|r| r.into_iter().map(Some).collect())
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn combinations_enumerate_in_order() {
        assert_eq!(combinations(&[1, 2, 3], 0), vec![Vec::<usize>::new()]);
        assert_eq!(
            combinations(&[1, 2, 3], 2),
            vec![vec![1, 2], vec![1, 3], vec![2, 3]]
        );
    }

    #[test]
    fn collider_v_structure_is_oriented() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let rows: Vec<Vec<usize>> = (0..10_000)
            .map(|_| {
                let a = rng.gen_range(0..2usize);
                let b = rng.gen_range(0..2usize);
                let c = if rng.gen_bool(0.9) { a ^ b } else { 1 - (a ^ b) };
                vec![a, b, c]
            })
            .collect();
        let dag = pc_learn(&dataset(&["A", "B", "C"], rows), 0.01).unwrap();
        assert_eq!(dag.edges().collect::<Vec<_>>(), vec![(0, 2), (1, 2)]);
    }

    #[test]
    fn independent_variables_give_empty_graph() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let rows: Vec<Vec<usize>> = (0..5000)
            .map(|_| vec![rng.gen_range(0..2), rng.gen_range(0..2), rng.gen_range(0..2)])
            .collect();
        let dag = pc_learn(&dataset(&["A", "B", "C"], rows), 0.01).unwrap();
        assert_eq!(dag.edge_count(), 0);
    }

    /// A chain is not orientation-identifiable; the skeleton must come back
    /// and the fallback orients it from the lower declaration index, after
    /// which Meek's first rule cascades down the chain.
    #[test]
    fn chain_skeleton_with_declaration_fallback() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let noisy = |v: usize, rng: &mut ChaCha8Rng| {
            if rng.gen_bool(0.85) {
                v
            } else {
                1 - v
            }
        };
        let rows: Vec<Vec<usize>> = (0..10_000)
            .map(|_| {
                let a = rng.gen_range(0..2usize);
                let b = noisy(a, &mut rng);
                let c = noisy(b, &mut rng);
                vec![a, b, c]
            })
            .collect();
        let dag = pc_learn(&dataset(&["A", "B", "C"], rows), 0.01).unwrap();
        assert_eq!(dag.edges().collect::<Vec<_>>(), vec![(0, 1), (1, 2)]);
    }
}
