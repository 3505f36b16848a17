use crate::error::{Error, Result};
use crate::numerics::{child_seed, seeded_rng, Tensor};

use super::{FuzzyGraph, UmapConfig};

const INIT_HALF_WIDTH: f64 = 10.0;
const GRAD_CLIP: f64 = 4.0;
const REPULSION_FLOOR: f64 = 0.001;

/// Uniform start in `[-10, 10]^2`.
pub fn random_init(n: usize, seed: u64) -> Tensor {
    let mut rng = seeded_rng(seed);
    Tensor::from_fn(&[n.max(1), 2], |_| rng.uniform_range(-INIT_HALF_WIDTH, INIT_HALF_WIDTH))
}

/// Initial layout for `graph`. Only the random start is implemented.
pub fn spectral_or_random_init(graph: &FuzzyGraph, seed: u64) -> Tensor {
    random_init(graph.n, seed)
}

fn clip(v: f64) -> f64 {
    v.clamp(-GRAD_CLIP, GRAD_CLIP)
}

/// Stochastic layout optimization over the fuzzy graph.
///
/// Every directed edge `head -> tail` is visited once per
/// `max_weight / weight` epochs. A visit pulls both endpoints together along
/// the gradient of `log(1 / (1 + a d^(2b)))`, then pushes `head` away from
/// `negative_sample_rate` uniformly drawn points per visit. The step size
/// decays linearly from 1 towards 0 and every per-coordinate step is clipped
/// to `[-4, 4]`. Updates are applied in place, sequentially.
pub fn optimize_layout(
    graph: &FuzzyGraph,
    init: &Tensor,
    a: f64,
    b: f64,
    config: &UmapConfig,
) -> Result<Tensor> {
    let n = graph.n;
    if init.shape() != [n, 2] {
        return Err(Error::Shape(format!(
            "initial layout {:?} does not match {n} vertices",
            init.shape()
        )));
    }
    if config.n_epochs == 0 {
        return Err(Error::Argument("n_epochs must be at least 1".into()));
    }
    let mut coords = init.clone();
    if graph.edges.is_empty() {
        return Ok(coords);
    }

    let mut directed: Vec<(usize, usize, f64)> = graph
        .edges
        .iter()
        .flat_map(|&(i, j, w)| [(i, j, w), (j, i, w)])
        .collect();
    directed.sort_by_key(|e| (e.0, e.1));
    let max_w = directed.iter().map(|e| e.2).fold(0.0, f64::max);
    let epochs_per_sample: Vec<f64> = directed.iter().map(|e| max_w / e.2).collect();
    let neg_rate = config.negative_sample_rate as f64;
    let epochs_per_negative: Vec<f64> = epochs_per_sample.iter().map(|e| e / neg_rate).collect();
    let mut next_sample = epochs_per_sample.clone();
    let mut next_negative = epochs_per_negative.clone();
    let mut rng = seeded_rng(child_seed(config.seed, 1));

    let total = config.n_epochs as f64;
    let xy = coords.data_mut();
    for epoch in 1..=config.n_epochs {
        let now = epoch as f64;
        let alpha = 1.0 - (epoch - 1) as f64 / total;
        for (e, &(head, tail, _)) in directed.iter().enumerate() {
            if next_sample[e] > now {
                continue;
            }
            let (dx, dy) = (xy[2 * head] - xy[2 * tail], xy[2 * head + 1] - xy[2 * tail + 1]);
            let dist_sq = dx * dx + dy * dy;
            if dist_sq > 0.0 {
                let coeff = -2.0 * a * b * dist_sq.powf(b - 1.0) / (a * dist_sq.powf(b) + 1.0);
                let (gx, gy) = (clip(coeff * dx) * alpha, clip(coeff * dy) * alpha);
                xy[2 * head] += gx;
                xy[2 * head + 1] += gy;
                xy[2 * tail] -= gx;
                xy[2 * tail + 1] -= gy;
            }
            next_sample[e] += epochs_per_sample[e];

            if neg_rate > 0.0 {
                let n_neg = ((now - next_negative[e]) / epochs_per_negative[e]).floor().max(0.0) as usize;
                for _ in 0..n_neg {
                    let other = rng.below(n);
                    if other == head {
                        continue;
                    }
                    let (dx, dy) = (xy[2 * head] - xy[2 * other], xy[2 * head + 1] - xy[2 * other + 1]);
                    let dist_sq = dx * dx + dy * dy;
                    if dist_sq <= 0.0 {
                        continue;
                    }
                    let coeff = 2.0 * b / ((REPULSION_FLOOR + dist_sq) * (a * dist_sq.powf(b) + 1.0));
                    xy[2 * head] += clip(coeff * dx) * alpha;
                    xy[2 * head + 1] += clip(coeff * dy) * alpha;
                }
                next_negative[e] += n_neg as f64 * epochs_per_negative[e];
            }
        }
        if !xy.iter().all(|v| v.is_finite()) {
            return Err(Error::LayoutDivergence(format!(
                "non-finite coordinate after epoch {epoch}"
            )));
        }
    }
    Ok(coords)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::umap::{fit_ab, fuzzy_graph, knn, smooth_knn_params};

    fn dist(c: &Tensor, i: usize, j: usize) -> f64 {
        (c.at2(i, 0) - c.at2(j, 0)).hypot(c.at2(i, 1) - c.at2(j, 1))
    }

    #[test]
    fn init_contract() {
        let g = FuzzyGraph { n: 50, edges: vec![] };
        let a = spectral_or_random_init(&g, 3);
        assert_eq!(a.shape(), &[50, 2]);
        assert!(a.data().iter().all(|v| (-10.0..=10.0).contains(v)));
        assert_eq!(a, spectral_or_random_init(&g, 3));
        assert_ne!(a, spectral_or_random_init(&g, 4));
    }

    #[test]
    fn single_epoch_pulls_a_pair_together() {
        let g = FuzzyGraph {
            n: 2,
            edges: vec![(0, 1, 1.0)],
        };
        let init = Tensor::new(&[2, 2], vec![0.0, 0.0, 4.0, 0.0]).unwrap();
        let (a, b) = fit_ab(0.1, 1.0).unwrap();
        let cfg = UmapConfig {
            n_epochs: 1,
            ..Default::default()
        };
        let out = optimize_layout(&g, &init, a, b, &cfg).unwrap();
        assert!(dist(&out, 0, 1) < 4.0, "{out:?}");
        let zero = UmapConfig {
            n_epochs: 0,
            ..Default::default()
        };
        assert!(optimize_layout(&g, &init, a, b, &zero).is_err());
    }

    #[test]
    fn disconnected_clusters_separate() {
        let mut rng = seeded_rng(5);
        let mut pts = Vec::new();
        for c in 0..2 {
            for _ in 0..50 {
                for d in 0..8 {
                    let center = if d == 0 { 100.0 * c as f64 } else { 0.0 };
                    pts.push(center + rng.normal());
                }
            }
        }
        let pts = Tensor::new(&[100, 8], pts).unwrap();
        let nb = knn(&pts, 15).unwrap();
        let calib: Vec<_> = nb.distances.iter().map(|d| smooth_knn_params(d, 15, 1)).collect();
        let g = fuzzy_graph(&nb, &calib).unwrap();
        assert!(g.edges.iter().all(|&(i, j, _)| (i < 50) == (j < 50)));
        let (a, b) = fit_ab(0.1, 1.0).unwrap();
        let cfg = UmapConfig::default();
        let out = optimize_layout(&g, &spectral_or_random_init(&g, 9), a, b, &cfg).unwrap();

        let centroid = |r: std::ops::Range<usize>| {
            let n = r.len() as f64;
            let (sx, sy) = r.clone().fold((0.0, 0.0), |(x, y), i| (x + out.at2(i, 0), y + out.at2(i, 1)));
            (sx / n, sy / n)
        };
        let spread = |r: std::ops::Range<usize>, c: (f64, f64)| {
            r.clone()
                .map(|i| (out.at2(i, 0) - c.0).hypot(out.at2(i, 1) - c.1))
                .sum::<f64>()
                / r.len() as f64
        };
        let (c0, c1) = (centroid(0..50), centroid(50..100));
        let gap = (c0.0 - c1.0).hypot(c0.1 - c1.1);
        let intra = (spread(0..50, c0) + spread(50..100, c1)) / 2.0;
        assert!(gap > 2.0 * intra, "gap {gap} intra {intra}");
    }

    #[test]
    fn deterministic_for_equal_seeds() {
        let g = FuzzyGraph {
            n: 4,
            edges: vec![(0, 1, 1.0), (1, 2, 0.5), (2, 3, 0.25)],
        };
        let init = random_init(4, 1);
        let cfg = UmapConfig {
            n_epochs: 30,
            ..Default::default()
        };
        let x = optimize_layout(&g, &init, 1.5, 0.9, &cfg).unwrap();
        let y = optimize_layout(&g, &init, 1.5, 0.9, &cfg).unwrap();
        assert_eq!(x, y);
    }
}
