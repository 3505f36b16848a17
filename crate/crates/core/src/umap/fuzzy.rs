use std::collections::BTreeMap;

use crate::error::{Error, Result};

use super::KnnResult;

const SMOOTH_K_TOLERANCE: f64 = 1e-5;
const BISECTION_STEPS: usize = 64;
/// Lower bound on sigma relative to the mean neighbor distance.
const MIN_SIGMA_SCALE: f64 = 1e-3;

/// Per-point offset `rho` and bandwidth `sigma`.
///
/// `rho` is the distance to the `local_connectivity`-th neighbor. `sigma` is
/// bisected so that `sum_j exp(-max(0, d_j - rho) / sigma) = log2(k)`.
/// All-zero distances give `sigma = 1`; otherwise sigma is floored at
/// `1e-3 * mean(dists)`.
pub fn smooth_knn_params(dists: &[f64], k: usize, local_connectivity: usize) -> (f64, f64) {
    if dists.is_empty() {
        return (0.0, 1.0);
    }
    let rho = dists[local_connectivity.clamp(1, dists.len()) - 1];
    if dists.iter().all(|&d| d == 0.0) {
        return (rho, 1.0);
    }
    let target = (k as f64).log2();
    let membership_sum =
        |sigma: f64| -> f64 { dists.iter().map(|&d| (-(d - rho).max(0.0) / sigma).exp()).sum() };

    let (mut lo, mut hi, mut mid) = (0.0, f64::INFINITY, 1.0);
    for _ in 0..BISECTION_STEPS {
        let s = membership_sum(mid);
        if (s - target).abs() < SMOOTH_K_TOLERANCE {
            break;
        }
        if s > target {
            hi = mid;
            mid = (lo + hi) / 2.0;
        } else {
            lo = mid;
            mid = if hi.is_infinite() { mid * 2.0 } else { (lo + hi) / 2.0 };
        }
    }
    let mean = dists.iter().sum::<f64>() / dists.len() as f64;
    (rho, mid.max(MIN_SIGMA_SCALE * mean))
}

/// Directed memberships `exp(-max(0, d - rho_i) / sigma_i)` for every kNN edge.
pub fn directed_weights(neighbors: &KnnResult, calib: &[(f64, f64)]) -> Result<Vec<Vec<f64>>> {
    if calib.len() != neighbors.distances.len() {
        return Err(Error::Shape(format!(
            "{} calibrations for {} points",
            calib.len(),
            neighbors.distances.len()
        )));
    }
    Ok(neighbors
        .distances
        .iter()
        .zip(calib)
        .map(|(ds, &(rho, sigma))| {
            ds.iter()
                .map(|&d| (-(d - rho).max(0.0) / sigma).exp())
                .collect()
        })
        .collect())
}

/// Probabilistic t-conorm.
pub fn fuzzy_union(a: f64, b: f64) -> f64 {
    a + b - a * b
}

/// Symmetric weighted graph stored once per unordered pair `(i, j)`, `i < j`,
/// sorted by `(i, j)`. Weights lie in `(0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct FuzzyGraph {
    pub n: usize,
    pub edges: Vec<(usize, usize, f64)>,
}

impl FuzzyGraph {
    pub fn weight(&self, i: usize, j: usize) -> Option<f64> {
        let key = (i.min(j), i.max(j));
        self.edges
            .binary_search_by(|e| (e.0, e.1).cmp(&key))
            .ok()
            .map(|p| self.edges[p].2)
    }
}

/// Union of the directed kNN memberships.
pub fn fuzzy_graph(neighbors: &KnnResult, calib: &[(f64, f64)]) -> Result<FuzzyGraph> {
    let weights = directed_weights(neighbors, calib)?;
    let n = neighbors.indices.len();
    let mut pairs: BTreeMap<(usize, usize), (f64, f64)> = BTreeMap::new();
    for (i, (nb, ws)) in neighbors.indices.iter().zip(&weights).enumerate() {
        for (&j, &w) in nb.iter().zip(ws) {
            if j == i || j >= n {
                continue;
            }
            let slot = pairs.entry((i.min(j), i.max(j))).or_insert((0.0, 0.0));
            if i < j {
                slot.0 = w;
            } else {
                slot.1 = w;
            }
        }
    }
    let edges = pairs
        .into_iter()
        .map(|((i, j), (a, b))| (i, j, fuzzy_union(a, b)))
        .filter(|e| e.2 > 0.0)
        .collect();
    Ok(FuzzyGraph { n, edges })
}
