use crate::error::{Error, Result};
use crate::numerics::Tensor;

fn sq_dists_from(points: &Tensor, i: usize) -> Vec<(f64, usize)> {
    let n = points.shape()[0];
    let xi = points.outer(i);
    (0..n)
        .filter(|&j| j != i)
        .map(|j| {
            let s: f64 = xi.iter().zip(points.outer(j)).map(|(a, b)| (a - b) * (a - b)).sum();
            (s, j)
        })
        .collect()
}

fn ranked(points: &Tensor, i: usize) -> Vec<usize> {
    let mut d = sq_dists_from(points, i);
    d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    d.into_iter().map(|x| x.1).collect()
}

/// Trustworthiness of a low-dimensional embedding with respect to `k`
/// neighbors:
///
/// `1 - 2 / (n k (2n - 3k - 1)) * sum_i sum_{j in U_i} (r(i, j) - k)`
///
/// where `U_i` are the embedding neighbors of `i` that are not among its `k`
/// original neighbors and `r(i, j)` is the rank of `j` among `i`'s original
/// neighbors (nearest is rank 1).
pub fn trustworthiness(high: &Tensor, low: &Tensor, k: usize) -> Result<f64> {
    let n = high.shape()[0];
    if high.ndim() != 2 || low.ndim() != 2 || low.shape()[0] != n {
        return Err(Error::Shape(format!(
            "point sets {:?} and {:?} must be N x D",
            high.shape(),
            low.shape()
        )));
    }
    if k == 0 || 2 * k >= n {
        return Err(Error::Argument(format!("k = {k} too large for {n} points")));
    }
    let mut penalty = 0.0;
    for i in 0..n {
        let high_order = ranked(high, i);
        let mut rank = vec![0usize; n];
        for (r, &j) in high_order.iter().enumerate() {
            rank[j] = r + 1;
        }
        for &j in ranked(low, i).iter().take(k) {
            if rank[j] > k {
                penalty += (rank[j] - k) as f64;
            }
        }
    }
    let (nf, kf) = (n as f64, k as f64);
    Ok(1.0 - 2.0 / (nf * kf * (2.0 * nf - 3.0 * kf - 1.0)) * penalty)
}
