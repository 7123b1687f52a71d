//! Agreement between two partitions of the same `N` items.
//!
//! All three indices are computed from the contingency table `n_ij` (items
//! with label `i` in `a` and `j` in `b`) and are invariant to relabeling.
//! Pair counts use `Σ C(n_ij, 2)`, `Σ C(a_i, 2)` and `Σ C(b_j, 2)`.

use std::collections::HashMap;

use crate::error::{Error, Result};

struct Contingency {
    n: u64,
    cells: Vec<u64>,
    rows: Vec<u64>,
    cols: Vec<u64>,
}

fn dense(labels: &[usize]) -> (Vec<usize>, usize) {
    let mut map = HashMap::new();
    let ids = labels
        .iter()
        .map(|l| {
            let next = map.len();
            *map.entry(*l).or_insert(next)
        })
        .collect();
    (ids, map.len())
}

impl Contingency {
    fn new(a: &[usize], b: &[usize]) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::LengthMismatch(a.len(), b.len()));
        }
        if a.is_empty() {
            return Err(Error::TooFewPoints {
                needed: 1,
                found: 0,
            });
        }
        let (a, ra) = dense(a);
        let (b, rb) = dense(b);
        let mut cells = vec![0u64; ra * rb];
        let mut rows = vec![0u64; ra];
        let mut cols = vec![0u64; rb];
        for (&i, &j) in a.iter().zip(&b) {
            cells[i * rb + j] += 1;
            rows[i] += 1;
            cols[j] += 1;
        }
        Ok(Self {
            n: a.len() as u64,
            cells,
            rows,
            cols,
        })
    }
}

fn pairs(m: u64) -> u64 {
    m * m.saturating_sub(1) / 2
}

/// `(same in both, same in a, same in b)` pair counts.
fn pair_counts(t: &Contingency) -> (u64, u64, u64) {
    let both = t.cells.iter().map(|&c| pairs(c)).sum();
    let in_a = t.rows.iter().map(|&c| pairs(c)).sum();
    let in_b = t.cols.iter().map(|&c| pairs(c)).sum();
    (both, in_a, in_b)
}

/// `|S11| / (|S11| + |S10| + |S01|)` over pairs placed together in either
/// partition. Two all-singleton partitions have no such pair and score 1.
pub fn jaccard_index(a: &[usize], b: &[usize]) -> Result<f64> {
    let (both, in_a, in_b) = pair_counts(&Contingency::new(a, b)?);
    let union = in_a + in_b - both;
    Ok(if union == 0 {
        1.0
    } else {
        both as f64 / union as f64
    })
}

/// Fraction of the `C(N, 2)` pairs on which the partitions agree. A single
/// item scores 1.
pub fn rand_index(a: &[usize], b: &[usize]) -> Result<f64> {
    let t = Contingency::new(a, b)?;
    let total = pairs(t.n);
    if total == 0 {
        return Ok(1.0);
    }
    let (both, in_a, in_b) = pair_counts(&t);
    let disagree = in_a + in_b - 2 * both;
    Ok((total - disagree) as f64 / total as f64)
}

/// Mutual information normalized by `sqrt(H(a) H(b))`, entropies in nats.
/// Returns 0 when either partition has a single cluster.
pub fn nmi(a: &[usize], b: &[usize]) -> Result<f64> {
    let t = Contingency::new(a, b)?;
    let n = t.n as f64;
    let entropy = |counts: &[u64]| -> f64 {
        counts
            .iter()
            .filter(|&&c| c > 0)
            .map(|&c| {
                let p = c as f64 / n;
                -p * p.ln()
            })
            .sum()
    };
    let ha = entropy(&t.rows);
    let hb = entropy(&t.cols);
    if ha <= 0.0 || hb <= 0.0 {
        return Ok(0.0);
    }
    let rb = t.cols.len();
    let mut mi = 0.0;
    for (i, &ai) in t.rows.iter().enumerate() {
        for (j, &bj) in t.cols.iter().enumerate() {
            let c = t.cells[i * rb + j];
            if c > 0 {
                let c = c as f64;
                mi += c / n * (n * c / (ai as f64 * bj as f64)).ln();
            }
        }
    }
    Ok((mi / (ha * hb).sqrt()).clamp(0.0, 1.0))
}

/// Jaccard, Rand and NMI together.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ClusterIndices {
    pub jaccard: f64,
    pub rand: f64,
    pub nmi: f64,
}

pub fn cluster_indices(truth: &[usize], labels: &[usize]) -> Result<ClusterIndices> {
    Ok(ClusterIndices {
        jaccard: jaccard_index(truth, labels)?,
        rand: rand_index(truth, labels)?,
        nmi: nmi(truth, labels)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_partitions() {
        let a = [0, 0, 1, 1, 2];
        assert_eq!(jaccard_index(&a, &a).unwrap(), 1.0);
        assert_eq!(rand_index(&a, &a).unwrap(), 1.0);
        assert!((nmi(&a, &a).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn crossed_partitions() {
        let a = [0, 0, 1, 1];
        let b = [0, 1, 0, 1];
        assert_eq!(jaccard_index(&a, &b).unwrap(), 0.0);
        assert_eq!(rand_index(&a, &b).unwrap(), 2.0 / 6.0);
        assert!(nmi(&a, &b).unwrap().abs() < 1e-15);
    }

    #[test]
    fn jaccard_quarter() {
        assert_eq!(jaccard_index(&[0, 0, 0, 1], &[0, 0, 1, 1]).unwrap(), 0.25);
    }

    #[test]
    fn singleton_partitions() {
        assert_eq!(rand_index(&[0, 1], &[0, 1]).unwrap(), 1.0);
        assert_eq!(jaccard_index(&[0, 1], &[5, 3]).unwrap(), 1.0);
        assert_eq!(rand_index(&[3], &[7]).unwrap(), 1.0);
    }

    #[test]
    fn nmi_hand_computed_table() {
        // contingency {{2,0},{1,1}}, N = 4
        let (a, b) = ([0, 0, 1, 1], [0, 0, 0, 1]);
        let h = |ps: &[f64]| -> f64 { ps.iter().map(|p| -p * p.ln()).sum() };
        let ha = h(&[0.5, 0.5]);
        let hb = h(&[0.75, 0.25]);
        let mi = 0.5 * (0.5f64 / (0.5 * 0.75)).ln()
            + 0.25 * (0.25f64 / (0.5 * 0.75)).ln()
            + 0.25 * (0.25f64 / (0.5 * 0.25)).ln();
        let expected = mi / (ha * hb).sqrt();
        assert!((nmi(&a, &b).unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn nmi_single_cluster_is_zero() {
        assert_eq!(nmi(&[0, 0, 0], &[0, 1, 2]).unwrap(), 0.0);
        assert_eq!(nmi(&[4, 4], &[4, 4]).unwrap(), 0.0);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            jaccard_index(&[0], &[0, 1]),
            Err(Error::LengthMismatch(1, 2))
        ));
        assert!(rand_index(&[], &[]).is_err());
        assert!(nmi(&[0, 1], &[0]).is_err());
    }
}
