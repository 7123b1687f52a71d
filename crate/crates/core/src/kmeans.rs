//! Euclidean k-means on ambient coordinates, used to initialize EM.

use rand::Rng;

use crate::error::{Error, Result};

pub const DEFAULT_RESTARTS: usize = 10;
const MAX_LLOYD_ITER: usize = 300;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub labels: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    /// Within-cluster sum of squares.
    pub wcss: f64,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Index and squared distance of the nearest centroid (lowest index on ties).
fn nearest(x: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centroids.iter().enumerate() {
        let d = sq_dist(x, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

/// k-means++ seeding.
fn seed<R: Rng + ?Sized>(data: &[&[f64]], k: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let n = data.len();
    let mut centroids = vec![data[rng.random_range(0..n)].to_vec()];
    let mut d2: Vec<f64> = data.iter().map(|x| sq_dist(x, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let idx = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                if u < d {
                    pick = i;
                    break;
                }
                u -= d;
            }
            pick
        } else {
            rng.random_range(0..n)
        };
        centroids.push(data[idx].to_vec());
        let c = centroids.last().unwrap();
        for (di, x) in d2.iter_mut().zip(data) {
            *di = di.min(sq_dist(x, c));
        }
    }
    centroids
}

fn lloyd(data: &[&[f64]], mut centroids: Vec<Vec<f64>>) -> KMeansResult {
    let n = data.len();
    let k = centroids.len();
    let dim = data[0].len();
    let mut labels = vec![usize::MAX; n];
    for _ in 0..MAX_LLOYD_ITER {
        let mut changed = false;
        for (i, x) in data.iter().enumerate() {
            let (j, _) = nearest(x, &centroids);
            if labels[i] != j {
                labels[i] = j;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (x, &l) in data.iter().zip(&labels) {
            counts[l] += 1;
            sums[l].iter_mut().zip(x.iter()).for_each(|(s, v)| *s += v);
        }
        for j in 0..k {
            if counts[j] > 0 {
                centroids[j] = sums[j].iter().map(|s| s / counts[j] as f64).collect();
            } else {
                // Re-seed an empty cluster at the point farthest from its centroid.
                let far = (0..n)
                    .max_by(|&a, &b| {
                        sq_dist(data[a], &centroids[labels[a]])
                            .total_cmp(&sq_dist(data[b], &centroids[labels[b]]))
                    })
                    .unwrap();
                centroids[j] = data[far].to_vec();
                labels[far] = j;
            }
        }
    }
    let wcss = data
        .iter()
        .zip(&labels)
        .map(|(x, &l)| sq_dist(x, &centroids[l]))
        .sum();
    KMeansResult {
        labels,
        centroids,
        wcss,
    }
}

/// Best of `restarts` k-means++ / Lloyd runs by within-cluster sum of squares.
pub fn kmeans<R: Rng + ?Sized>(
    data: &[&[f64]],
    k: usize,
    restarts: usize,
    rng: &mut R,
) -> Result<KMeansResult> {
    if k == 0 {
        return Err(Error::InvalidParameter(
            "number of clusters must be >= 1".into(),
        ));
    }
    if k > data.len() {
        return Err(Error::TooManyClusters { k, n: data.len() });
    }
    let mut best: Option<KMeansResult> = None;
    for _ in 0..restarts.max(1) {
        let run = lloyd(data, seed(data, k, rng));
        if best.as_ref().is_none_or(|b| run.wcss < b.wcss) {
            best = Some(run);
        }
    }
    Ok(best.unwrap())
}
