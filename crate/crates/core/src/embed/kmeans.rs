//! Lloyd's k-means with k-means++ seeding and best-of-n restarts.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::{par, seed};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KmeansParams {
    pub k: usize,
    pub seed: u64,
    pub max_iter: usize,
    pub restarts: usize,
}

impl Default for KmeansParams {
    fn default() -> Self {
        KmeansParams {
            k: 10,
            seed: 0,
            max_iter: 300,
            restarts: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KmeansRun {
    pub centroids: Vec<Vec<f64>>,
    pub assignment: Vec<usize>,
    /// Within-cluster sum of squared distances of the final assignment.
    pub sse: f64,
    /// SSE after each assignment step.
    pub sse_trace: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KmeansFit {
    pub best: KmeansRun,
    /// Final SSE of every restart, in restart order.
    pub restart_sse: Vec<f64>,
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Index of the nearest centroid and the squared distance to it. Ties go to
/// the lowest index.
pub(crate) fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, c) in centroids.iter().enumerate() {
        let d = sq_dist(point, c);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

fn assign(points: &[Vec<f64>], centroids: &[Vec<f64>]) -> (Vec<usize>, f64) {
    let mut sse = 0.0;
    let assignment = points
        .iter()
        .map(|p| {
            let (i, d) = nearest(p, centroids);
            sse += d;
            i
        })
        .collect();
    (assignment, sse)
}

fn plus_plus_init<R: Rng>(points: &[Vec<f64>], k: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let mut centroids = vec![points[rng.random_range(0..points.len())].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let idx = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = points.len() - 1;
            for (i, &d) in d2.iter().enumerate() {
                if d > 0.0 && target < d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            chosen
        } else {
            rng.random_range(0..points.len())
        };
        let c = points[idx].clone();
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(sq_dist(p, &c));
        }
        centroids.push(c);
    }
    centroids
}

fn update(points: &[Vec<f64>], assignment: &[usize], previous: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let k = previous.len();
    let dim = points[0].len();
    let mut sums = vec![vec![0.0; dim]; k];
    let mut counts = vec![0usize; k];
    for (p, &c) in points.iter().zip(assignment) {
        counts[c] += 1;
        for (s, x) in sums[c].iter_mut().zip(p) {
            *s += x;
        }
    }
    let mut centroids: Vec<Vec<f64>> = sums
        .into_iter()
        .zip(&counts)
        .map(|(s, &n)| {
            if n == 0 {
                s
            } else {
                s.into_iter().map(|v| v / n as f64).collect()
            }
        })
        .collect();
    for c in 0..k {
        if counts[c] == 0 {
            // re-seed at the point farthest from the empty cluster's old centroid
            let (far, _) = points
                .iter()
                .enumerate()
                .map(|(i, p)| (i, sq_dist(p, &previous[c])))
                .fold((0, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc });
            centroids[c] = points[far].clone();
        }
    }
    centroids
}

/// One Lloyd run from k-means++ seeding.
pub fn lloyd<R: Rng>(points: &[Vec<f64>], k: usize, max_iter: usize, rng: &mut R) -> KmeansRun {
    let mut centroids = plus_plus_init(points, k, rng);
    let mut trace = Vec::new();
    let mut previous: Option<Vec<usize>> = None;
    for _ in 0..max_iter.max(1) {
        let (assignment, sse) = assign(points, &centroids);
        trace.push(sse);
        if previous.as_ref() == Some(&assignment) {
            break;
        }
        centroids = update(points, &assignment, &centroids);
        previous = Some(assignment);
    }
    let (assignment, sse) = assign(points, &centroids);
    if trace.last() != Some(&sse) {
        trace.push(sse);
    }
    KmeansRun {
        centroids,
        assignment,
        sse,
        sse_trace: trace,
    }
}

/// Best of `params.restarts` runs by SSE; restart `r` draws from the seed
/// stream `[STREAM_KMEANS, r]`, and ties go to the earliest restart.
pub fn kmeans(points: &[Vec<f64>], params: &KmeansParams) -> Result<KmeansFit> {
    if params.k == 0 {
        return Err(Error::Config("k must be at least 1".into()));
    }
    if points.len() < params.k {
        return Err(Error::InsufficientData(format!(
            "k-means with k={} needs at least {} vectors, got {}",
            params.k,
            params.k,
            points.len()
        )));
    }
    let dim = points[0].len();
    if points.iter().any(|p| p.len() != dim) {
        return Err(Error::Format("vectors of differing dimension".into()));
    }
    if points.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Format("non-finite vector component".into()));
    }
    let runs = par::map_range(params.restarts.max(1), |r| {
        let mut rng = seed::rng(params.seed, &[seed::STREAM_KMEANS, r as u64]);
        lloyd(points, params.k, params.max_iter, &mut rng)
    });
    let restart_sse = runs.iter().map(|r| r.sse).collect();
    let best = runs
        .into_iter()
        .reduce(|best, r| if r.sse < best.sse { r } else { best })
        .expect("at least one restart");
    Ok(KmeansFit { best, restart_sse })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn k1_is_the_mean() {
        let pts = vec![vec![0.0, 0.0], vec![2.0, 4.0], vec![4.0, 2.0]];
        let fit = kmeans(&pts, &KmeansParams { k: 1, ..Default::default() }).unwrap();
        assert_eq!(fit.best.centroids, vec![vec![2.0, 2.0]]);
    }

    #[test]
    fn separated_pairs() {
        let pts = vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![10.0, 0.0], vec![10.0, 1.0]];
        let fit = kmeans(&pts, &KmeansParams { k: 2, ..Default::default() }).unwrap();
        let mut c = fit.best.centroids.clone();
        c.sort_by(|a, b| a[0].total_cmp(&b[0]));
        assert_eq!(c, vec![vec![0.0, 0.5], vec![10.0, 0.5]]);
        assert_eq!(fit.best.sse, 1.0);
    }

    #[test]
    fn too_few_points() {
        let pts = vec![vec![0.0]];
        assert!(kmeans(&pts, &KmeansParams { k: 2, ..Default::default() }).is_err());
    }

    #[test]
    fn non_finite_rejected() {
        let pts = vec![vec![0.0], vec![f64::NAN]];
        assert!(kmeans(&pts, &KmeansParams { k: 1, ..Default::default() }).is_err());
    }

    #[test]
    fn duplicate_points_keep_k_centroids() {
        let pts = vec![vec![1.0]; 5];
        let fit = kmeans(&pts, &KmeansParams { k: 3, ..Default::default() }).unwrap();
        assert_eq!(fit.best.centroids.len(), 3);
        assert_eq!(fit.best.sse, 0.0);
    }

    #[test]
    fn same_seed_same_result() {
        let pts: Vec<Vec<f64>> = (0..40).map(|i| vec![(i * 7 % 13) as f64, (i * 5 % 11) as f64]).collect();
        let p = KmeansParams { k: 4, seed: 9, ..Default::default() };
        assert_eq!(kmeans(&pts, &p).unwrap(), kmeans(&pts, &p).unwrap());
    }
}
