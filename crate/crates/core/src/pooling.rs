//! Temporal pooling of frame features into one video-level vector.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::embedding_io::EmbeddingMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PoolingMode {
    #[default]
    #[serde(rename = "avg")]
    Average,
    #[serde(rename = "max")]
    Maximum,
    /// Pass-through for inputs that already hold a single video-level row.
    Identity,
}

impl fmt::Display for PoolingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PoolingMode::Average => "avg",
            PoolingMode::Maximum => "max",
            PoolingMode::Identity => "identity",
        })
    }
}

impl FromStr for PoolingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "avg" | "average" => Ok(PoolingMode::Average),
            "max" | "maximum" => Ok(PoolingMode::Maximum),
            "identity" => Ok(PoolingMode::Identity),
            other => Err(Error::Contract(format!("unknown pooling mode {other:?}"))),
        }
    }
}

/// Pools every row of `matrix`.
pub fn pool(matrix: &EmbeddingMatrix, mode: PoolingMode) -> Result<Vec<f64>> {
    pool_rows(matrix.as_slice(), matrix.dims(), mode)
}

/// Pools a row-major block of `rows.len() / dims` frames.
///
/// Averages accumulate in `f64` in frame order.
pub fn pool_rows(rows: &[f32], dims: usize, mode: PoolingMode) -> Result<Vec<f64>> {
    if dims == 0 || rows.is_empty() || !rows.len().is_multiple_of(dims) {
        return Err(Error::Contract(format!(
            "cannot pool {} values as rows of width {dims}",
            rows.len()
        )));
    }
    let frames = rows.len() / dims;
    let mut chunks = rows.chunks_exact(dims);
    match mode {
        PoolingMode::Identity => {
            if frames != 1 {
                return Err(Error::Contract(format!(
                    "identity pooling needs exactly one frame, got {frames}"
                )));
            }
            Ok(rows.iter().map(|&v| f64::from(v)).collect())
        }
        PoolingMode::Average => {
            let mut acc = vec![0.0f64; dims];
            for row in chunks {
                for (a, &v) in acc.iter_mut().zip(row) {
                    *a += f64::from(v);
                }
            }
            let n = frames as f64;
            acc.iter_mut().for_each(|a| *a /= n);
            Ok(acc)
        }
        PoolingMode::Maximum => {
            let mut acc: Vec<f32> = chunks.next().unwrap().to_vec();
            for row in chunks {
                for (a, &v) in acc.iter_mut().zip(row) {
                    *a = a.max(v);
                }
            }
            Ok(acc.into_iter().map(f64::from).collect())
        }
    }
}

/// Picks `min(target_count, total_frames)` evenly spaced frame indices,
/// always including the first and last frame when at least two are taken.
///
/// Index `i` of `n` is `round(i·(total−1)/(n−1))`, rounding halves up.
pub fn even_sample_indices(total_frames: usize, target_count: usize) -> Result<Vec<usize>> {
    if total_frames == 0 || target_count == 0 {
        return Err(Error::Contract(format!(
            "even sampling needs positive counts, got total={total_frames} target={target_count}"
        )));
    }
    let n = target_count.min(total_frames);
    if n == 1 {
        return Ok(vec![0]);
    }
    let span = (total_frames - 1) as u128;
    let steps = (n - 1) as u128;
    let mut out: Vec<usize> = (0..n as u128)
        .map(|i| ((2 * i * span + steps) / (2 * steps)) as usize)
        .collect();
    out.dedup();
    Ok(out)
}

/// Keeps only the frames chosen by [`even_sample_indices`].
pub fn subsample_frames(matrix: &EmbeddingMatrix, target_count: usize) -> Result<EmbeddingMatrix> {
    let picks = even_sample_indices(matrix.frames(), target_count)?;
    if picks.len() == matrix.frames() {
        return Ok(matrix.clone());
    }
    let data = picks.iter().flat_map(|&i| matrix.row(i)).copied().collect();
    EmbeddingMatrix::new(matrix.video_id(), picks.len(), matrix.dims(), data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn m(rows: &[Vec<f32>]) -> EmbeddingMatrix {
        EmbeddingMatrix::from_rows("v", rows).unwrap()
    }

    #[test]
    fn hand_examples() {
        let x = m(&[vec![1.0, 3.0], vec![3.0, 5.0]]);
        assert_eq!(pool(&x, PoolingMode::Average).unwrap(), vec![2.0, 4.0]);
        assert_eq!(pool(&x, PoolingMode::Maximum).unwrap(), vec![3.0, 5.0]);
        assert!(matches!(pool(&x, PoolingMode::Identity), Err(Error::Contract(_))));
    }

    #[test]
    fn single_frame_all_modes_agree() {
        let x = m(&[vec![7.0, 7.0]]);
        for mode in [PoolingMode::Average, PoolingMode::Maximum, PoolingMode::Identity] {
            assert_eq!(pool(&x, mode).unwrap(), vec![7.0, 7.0]);
        }
    }

    #[test]
    fn sampling_examples() {
        assert_eq!(even_sample_indices(10, 10).unwrap(), (0..10).collect::<Vec<_>>());
        assert_eq!(even_sample_indices(9, 3).unwrap(), vec![0, 4, 8]);
        assert_eq!(even_sample_indices(5, 1).unwrap(), vec![0]);
        assert_eq!(even_sample_indices(3, 16).unwrap(), vec![0, 1, 2]);
        assert!(even_sample_indices(0, 3).is_err());
        assert!(even_sample_indices(3, 0).is_err());
    }

    #[test]
    fn subsample_keeps_chosen_rows() {
        let rows: Vec<Vec<f32>> = (0..9).map(|i| vec![i as f32]).collect();
        let s = subsample_frames(&m(&rows), 3).unwrap();
        assert_eq!(s.as_slice(), &[0.0, 4.0, 8.0]);
    }

    #[test]
    fn mode_names_round_trip() {
        for mode in [PoolingMode::Average, PoolingMode::Maximum, PoolingMode::Identity] {
            assert_eq!(mode.to_string().parse::<PoolingMode>().unwrap(), mode);
        }
    }

    proptest! {
        #[test]
        fn sampling_is_increasing_with_endpoints(total in 1usize..500, target in 1usize..64) {
            let idx = even_sample_indices(total, target).unwrap();
            prop_assert_eq!(idx.len(), target.min(total));
            prop_assert!(idx.windows(2).all(|w| w[0] < w[1]));
            prop_assert_eq!(idx[0], 0);
            prop_assert!(*idx.last().unwrap() < total);
            if target >= 2 && total >= 2 {
                prop_assert_eq!(*idx.last().unwrap(), total - 1);
            }
            // oracle: real-valued rounding of i·(T−1)/(N−1)
            let n = idx.len();
            if n >= 2 {
                for (i, &v) in idx.iter().enumerate() {
                    let exact = i as f64 * (total - 1) as f64 / (n - 1) as f64;
                    prop_assert!((v as f64 - exact).abs() <= 0.5 + 1e-9);
                }
            }
        }
    }
}
