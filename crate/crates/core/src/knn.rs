//! Exact k-nearest-neighbor scoring against a normal-only train set.
//!
//! The anomaly score of a query is the mean of its `k` smallest squared
//! Euclidean distances to the train rows. Search is brute force; with the
//! dataset sizes this crate targets (tens to tens of thousands of rows) a
//! full scan is fast and keeps results exact and reproducible.

use std::cmp::Ordering;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::par;

/// Immutable set of train vectors, stored row-major in `f64`.
#[derive(Debug, Clone)]
pub struct TrainIndex {
    dims: usize,
    data: Vec<f64>,
    ids: Vec<String>,
    normalize: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KnnScore {
    /// Mean of `neighbor_distances`.
    pub score: f64,
    pub neighbor_ids: Vec<String>,
    /// Squared distances, ascending.
    pub neighbor_distances: Vec<f64>,
}

impl TrainIndex {
    /// Builds an index. Row order is kept and decides distance ties.
    pub fn build(vectors: Vec<(String, Vec<f64>)>) -> Result<Self> {
        Self::build_with(vectors, false)
    }

    /// Like [`TrainIndex::build`], optionally L2-normalizing rows and,
    /// later, every query.
    pub fn build_with(vectors: Vec<(String, Vec<f64>)>, normalize: bool) -> Result<Self> {
        let dims = match vectors.first() {
            Some((_, v)) if !v.is_empty() => v.len(),
            Some((id, _)) => return Err(Error::Validation(format!("train vector {id:?} is empty"))),
            None => return Err(Error::Validation("cannot build an index from zero vectors".into())),
        };
        let mut data = Vec::with_capacity(dims * vectors.len());
        let mut ids = Vec::with_capacity(vectors.len());
        for (id, mut v) in vectors {
            if v.len() != dims {
                return Err(Error::Validation(format!(
                    "train vector {id:?} has dimension {}, expected {dims}",
                    v.len()
                )));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::Validation(format!("train vector {id:?} is not finite")));
            }
            if normalize {
                l2_normalize(&mut v);
            }
            data.extend_from_slice(&v);
            ids.push(id);
        }
        Ok(Self { dims, data, ids, normalize })
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dims..(i + 1) * self.dims]
    }

    pub fn normalizes(&self) -> bool {
        self.normalize
    }

    /// `min(k, N)`.
    pub fn effective_k(&self, k: usize) -> usize {
        k.min(self.len())
    }

    /// Scores one query. `k` larger than the index is clamped.
    pub fn score(&self, query: &[f64], k: usize) -> Result<KnnScore> {
        self.check_query(query, k)?;
        if k > self.len() {
            log::warn!("k={k} exceeds the {} train vectors; using k={}", self.len(), self.len());
        }
        Ok(self.score_unchecked(query, k))
    }

    /// Scores each query in order, in parallel when the `parallel` feature
    /// is enabled. Output is bitwise identical to [`Self::score_batch_sequential`].
    pub fn score_batch<Q: AsRef<[f64]> + Sync>(&self, queries: &[Q], k: usize) -> Result<Vec<KnnScore>> {
        self.check_batch(queries, k)?;
        Ok(par::map(queries, |q| self.score_unchecked(q.as_ref(), k)))
    }

    pub fn score_batch_sequential<Q: AsRef<[f64]>>(&self, queries: &[Q], k: usize) -> Result<Vec<KnnScore>> {
        self.check_batch(queries, k)?;
        Ok(queries.iter().map(|q| self.score_unchecked(q.as_ref(), k)).collect())
    }

    fn check_batch<Q: AsRef<[f64]>>(&self, queries: &[Q], k: usize) -> Result<()> {
        for (position, q) in queries.iter().enumerate() {
            self.check_query(q.as_ref(), k)
                .map_err(|e| Error::Query { position, source: Box::new(e) })?;
        }
        if k > self.len() && !queries.is_empty() {
            log::warn!("k={k} exceeds the {} train vectors; using k={}", self.len(), self.len());
        }
        Ok(())
    }

    fn check_query(&self, query: &[f64], k: usize) -> Result<()> {
        if k == 0 {
            return Err(Error::Contract("k must be at least 1".into()));
        }
        if query.len() != self.dims {
            return Err(Error::Contract(format!(
                "query has dimension {}, index has {}",
                query.len(),
                self.dims
            )));
        }
        if query.iter().any(|x| !x.is_finite()) {
            return Err(Error::Contract("query is not finite".into()));
        }
        Ok(())
    }

    fn score_unchecked(&self, query: &[f64], k: usize) -> KnnScore {
        let normalized;
        let query = if self.normalize {
            let mut q = query.to_vec();
            l2_normalize(&mut q);
            normalized = q;
            &normalized[..]
        } else {
            query
        };
        let k = self.effective_k(k);
        // (distance, row) pairs, kept sorted; ties go to the lower row.
        let mut best: Vec<(f64, usize)> = Vec::with_capacity(k + 1);
        for (row, train) in self.data.chunks_exact(self.dims).enumerate() {
            let d = squared_distance(train, query);
            if best.len() == k && d >= best[k - 1].0 {
                continue;
            }
            let at = best.partition_point(|&(bd, _)| bd.total_cmp(&d) != Ordering::Greater);
            best.insert(at, (d, row));
            best.truncate(k);
        }
        let neighbor_distances: Vec<f64> = best.iter().map(|&(d, _)| d).collect();
        let score = neighbor_distances.iter().sum::<f64>() / k as f64;
        KnnScore {
            score,
            neighbor_ids: best.iter().map(|&(_, r)| self.ids[r].clone()).collect(),
            neighbor_distances,
        }
    }
}

/// Squared Euclidean distance.
///
/// Accumulates in four interleaved lanes so the loop vectorizes; the
/// reduction order is fixed, so results are reproducible.
pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut lanes = [0.0f64; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| (x - y) * (x - y)).sum();
    for (x, y) in ca.zip(cb) {
        for i in 0..4 {
            let d = x[i] - y[i];
            lanes[i] += d * d;
        }
    }
    (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]) + tail
}

/// Scales `v` to unit length; zero vectors are left unchanged.
pub fn l2_normalize(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
}
