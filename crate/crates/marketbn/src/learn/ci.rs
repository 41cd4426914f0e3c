//! Pearson chi-square test of conditional independence, stratified over the
//! states of the conditioning set.

use std::collections::BTreeMap;

use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::discretize::DiscreteDataset;

use super::LearnError;

#[derive(Debug, Clone, PartialEq)]
pub struct CiTestResult {
    pub statistic: f64,
    pub degrees_of_freedom: usize,
    pub p_value: f64,
    /// `p_value > alpha`
    pub independent: bool,
    /// Some stratum had expected counts below 5 in more than 20% of cells.
    pub low_power: bool,
}

/// Tests x independent of y given a (possibly empty) conditioning set.
/// Statistics and degrees of freedom are summed across the strata of the
/// conditioning variables; rows with a missing value in any involved column
/// are dropped.
pub fn chi_square_ci_test(
    data: &DiscreteDataset,
    x: usize,
    y: usize,
    conditioning: &[usize],
    alpha: f64,
) -> Result<CiTestResult, LearnError> {
    assert_ne!(x, y, "x and y must differ");
    assert!(
        !conditioning.contains(&x) && !conditioning.contains(&y),
        "conditioning set must exclude x and y"
    );
    let r_x = data.cardinality(x);
    let r_y = data.cardinality(y);

    // stratum key -> contingency counts (r_x * r_y)
    let mut strata: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    'rows: for row in data.rows() {
        let (Some(sx), Some(sy)) = (row[x], row[y]) else {
            continue;
        };
        let mut key = 0;
        for &z in conditioning {
            match row[z] {
                Some(s) => key = key * data.cardinality(z) + s,
                None => continue 'rows,
            }
        }
        strata.entry(key).or_insert_with(|| vec![0.0; r_x * r_y])[sx * r_y + sy] += 1.0;
    }
    if strata.is_empty() {
        return Err(LearnError::EmptyStratumData);
    }

    let mut statistic = 0.0;
    let mut dof = 0usize;
    let mut low_power = false;
    for counts in strata.values() {
        let n: f64 = counts.iter().sum();
        if n == 0.0 {
            continue;
        }
        let row_tot: Vec<f64> = (0..r_x)
            .map(|i| (0..r_y).map(|j| counts[i * r_y + j]).sum())
            .collect();
        let col_tot: Vec<f64> = (0..r_y)
            .map(|j| (0..r_x).map(|i| counts[i * r_y + j]).sum())
            .collect();
        let mut sparse_cells = 0usize;
        for i in 0..r_x {
            for j in 0..r_y {
                let expected = row_tot[i] * col_tot[j] / n;
                if expected < 5.0 {
                    sparse_cells += 1;
                }
                if expected > 0.0 {
                    let observed = counts[i * r_y + j];
                    statistic += (observed - expected).powi(2) / expected;
                }
            }
        }
        if (sparse_cells as f64) > 0.2 * (r_x * r_y) as f64 {
            low_power = true;
        }
        dof += (r_x - 1) * (r_y - 1);
    }

    let p_value = if dof == 0 {
        1.0
    } else {
        let dist = ChiSquared::new(dof as f64).expect("dof > 0");
        1.0 - dist.cdf(statistic)
    };
    Ok(CiTestResult {
        statistic,
        degrees_of_freedom: dof,
        p_value,
        independent: p_value > alpha,
        low_power,
    })
}
