use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numerics::Tensor;

/// Per-point neighbor lists, ascending by distance.
#[derive(Clone, Debug, PartialEq)]
pub struct KnnResult {
    pub indices: Vec<Vec<usize>>,
    pub distances: Vec<Vec<f64>>,
}

/// Exact brute-force Euclidean k-nearest neighbors of every row of
/// `points` (`N x D`), excluding the point itself. Ties go to the lower index.
pub fn knn(points: &Tensor, k: usize) -> Result<KnnResult> {
    let (n, d) = match *points.shape() {
        [n, d] => (n, d),
        ref s => return Err(Error::Shape(format!("knn expects N x D points, got {s:?}"))),
    };
    if k == 0 || k >= n {
        return Err(Error::Argument(format!("k must lie in 1..{n}, got {k}")));
    }
    let data = points.data();
    let rows: Vec<(Vec<usize>, Vec<f64>)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let xi = &data[i * d..(i + 1) * d];
            let mut cand: Vec<(f64, usize)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| {
                    let xj = &data[j * d..(j + 1) * d];
                    let sq: f64 = xi.iter().zip(xj).map(|(a, b)| (a - b) * (a - b)).sum();
                    (sq, j)
                })
                .collect();
            let by_dist = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
            cand.select_nth_unstable_by(k - 1, by_dist);
            cand.truncate(k);
            cand.sort_by(by_dist);
            (
                cand.iter().map(|c| c.1).collect(),
                cand.iter().map(|c| c.0.sqrt()).collect(),
            )
        })
        .collect();
    let (indices, distances) = rows.into_iter().unzip();
    Ok(KnnResult { indices, distances })
}
