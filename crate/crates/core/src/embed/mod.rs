//! Word vectors and the cluster model behind semantic idea density.
//!
//! Word types are clustered with k-means. Each cluster then gets the mean
//! `mu` and population standard deviation `sigma` of its members' Euclidean
//! distances to the centroid, so that any word's distance to its nearest
//! centroid can be expressed as a z-score (`d_scaled`).

mod kmeans;
mod table;

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use kmeans::{kmeans, lloyd, KmeansFit, KmeansParams, KmeansRun};
pub use table::{load_embeddings, parse_embeddings, EmbeddingTable, DEFAULT_DIM};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    pub format_version: u32,
    pub k: usize,
    pub seed: u64,
    pub centroids: Vec<Vec<f64>>,
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
    /// Word types whose vectors the centroids were fitted on.
    pub training_vocab: BTreeSet<String>,
}

impl ClusterModel {
    /// A model from given centroids, with zeroed distance statistics.
    pub fn from_centroids(centroids: Vec<Vec<f64>>, seed: u64) -> Self {
        let k = centroids.len();
        ClusterModel {
            format_version: MODEL_FORMAT_VERSION,
            k,
            seed,
            centroids,
            mu: vec![0.0; k],
            sigma: vec![0.0; k],
            training_vocab: BTreeSet::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.centroids.first().map_or(0, Vec::len)
    }

    /// Clusters the given word types and fits the distance statistics.
    pub fn fit<'a, I>(words: I, params: &KmeansParams) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a str, &'a [f64])>,
    {
        let (vocab, vectors): (Vec<&str>, Vec<Vec<f64>>) = words.into_iter().map(|(w, v)| (w, v.to_vec())).unzip();
        let fit = kmeans(&vectors, params)?;
        let mut model = ClusterModel::from_centroids(fit.best.centroids, params.seed);
        model.training_vocab = vocab.into_iter().map(str::to_string).collect();
        Ok(fit_cluster_stats(model, &vectors))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self).map_err(|e| Error::Format(e.to_string()))?;
        crate::report::write_atomic(path, json.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let model: ClusterModel =
            serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        if model.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::Format(format!(
                "{}: unsupported model format version {}",
                path.display(),
                model.format_version
            )));
        }
        if model.centroids.len() != model.k || model.mu.len() != model.k || model.sigma.len() != model.k {
            return Err(Error::Format(format!("{}: inconsistent cluster count", path.display())));
        }
        Ok(model)
    }

    /// Nearest centroid (ties to the lowest index) and the Euclidean distance to it.
    pub fn nearest(&self, vector: &[f64]) -> Result<(usize, f64)> {
        if vector.len() != self.dim() {
            return Err(Error::Format(format!(
                "vector has dimension {}, model has {}",
                vector.len(),
                self.dim()
            )));
        }
        let (c, d2) = kmeans::nearest(vector, &self.centroids);
        Ok((c, d2.sqrt()))
    }
}

/// Sets `mu` and `sigma` (population) of each cluster from the distances of
/// the vectors assigned to it. Empty clusters get zeros.
pub fn fit_cluster_stats(mut model: ClusterModel, vectors: &[Vec<f64>]) -> ClusterModel {
    let mut distances: Vec<Vec<f64>> = vec![Vec::new(); model.k];
    for v in vectors {
        let (c, d2) = kmeans::nearest(v, &model.centroids);
        distances[c].push(d2.sqrt());
    }
    for (c, ds) in distances.iter().enumerate() {
        if ds.is_empty() {
            model.mu[c] = 0.0;
            model.sigma[c] = 0.0;
            continue;
        }
        let n = ds.len() as f64;
        let mu = ds.iter().sum::<f64>() / n;
        let var = ds.iter().map(|d| (d - mu) * (d - mu)).sum::<f64>() / n;
        model.mu[c] = mu;
        model.sigma[c] = var.sqrt();
    }
    model
}

/// `(cluster, (d - mu) / sigma)` for the nearest cluster. With `sigma = 0` the
/// result is 0 when `d == mu` and +inf otherwise.
pub fn scaled_distance(vector: &[f64], model: &ClusterModel) -> Result<(usize, f64)> {
    let (c, d) = model.nearest(vector)?;
    let (mu, sigma) = (model.mu[c], model.sigma[c]);
    let scaled = if sigma > 0.0 {
        (d - mu) / sigma
    } else if d == mu {
        0.0
    } else {
        f64::INFINITY
    };
    Ok((c, scaled))
}
