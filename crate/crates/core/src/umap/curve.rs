use crate::error::{Error, Result};

const SAMPLES: usize = 300;
const MAX_ITERS: usize = 200;

/// `1 / (1 + a d^(2b))`
pub fn low_dim_similarity(d: f64, a: f64, b: f64) -> f64 {
    1.0 / (1.0 + a * d.powf(2.0 * b))
}

/// Least-squares fit of `(a, b)` so the low-dimensional similarity tracks
/// `1` for `d <= min_dist` and `exp(-(d - min_dist) / spread)` beyond, on
/// 300 evenly spaced points in `(0, 3 * spread]`. Levenberg-Marquardt from
/// `(1, 1)`.
pub fn fit_ab(min_dist: f64, spread: f64) -> Result<(f64, f64)> {
    if !(min_dist > 0.0 && min_dist <= spread) {
        return Err(Error::Argument(format!(
            "need 0 < min_dist <= spread, got {min_dist}, {spread}"
        )));
    }
    let xs: Vec<f64> = (1..=SAMPLES)
        .map(|i| 3.0 * spread * i as f64 / SAMPLES as f64)
        .collect();
    let ys: Vec<f64> = xs
        .iter()
        .map(|&x| {
            if x <= min_dist {
                1.0
            } else {
                (-(x - min_dist) / spread).exp()
            }
        })
        .collect();
    let sse = |a: f64, b: f64| -> f64 {
        xs.iter()
            .zip(&ys)
            .map(|(&x, &y)| (low_dim_similarity(x, a, b) - y).powi(2))
            .sum()
    };

    let (mut a, mut b) = (1.0, 1.0);
    let mut cost = sse(a, b);
    let mut lambda = 1e-3;
    for _ in 0..MAX_ITERS {
        // Normal equations J^T J and J^T r.
        let (mut jaa, mut jab, mut jbb, mut ga, mut gb) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (&x, &y) in xs.iter().zip(&ys) {
            let q = x.powf(2.0 * b);
            let f = 1.0 / (1.0 + a * q);
            let r = f - y;
            let da = -q * f * f;
            let db = -a * q * 2.0 * x.ln() * f * f;
            jaa += da * da;
            jab += da * db;
            jbb += db * db;
            ga += da * r;
            gb += db * r;
        }
        loop {
            let (m00, m11) = (jaa * (1.0 + lambda), jbb * (1.0 + lambda));
            let det = m00 * m11 - jab * jab;
            if det.abs() < f64::MIN_POSITIVE {
                lambda *= 10.0;
                if lambda > 1e16 {
                    return Err(Error::Numerical("curve fit: singular normal equations".into()));
                }
                continue;
            }
            let step_a = -(m11 * ga - jab * gb) / det;
            let step_b = -(m00 * gb - jab * ga) / det;
            let (na, nb) = (a + step_a, b + step_b);
            let new_cost = if na > 0.0 && nb > 0.0 { sse(na, nb) } else { f64::INFINITY };
            if new_cost <= cost {
                let converged = step_a.abs() <= 1e-12 * (1.0 + a.abs())
                    && step_b.abs() <= 1e-12 * (1.0 + b.abs());
                let improvement = cost - new_cost;
                a = na;
                b = nb;
                cost = new_cost;
                lambda = (lambda / 10.0).max(1e-12);
                if converged || improvement <= 1e-15 * cost.max(f64::MIN_POSITIVE) {
                    return Ok((a, b));
                }
                break;
            }
            lambda *= 10.0;
            if lambda > 1e16 {
                // No descent direction left: at a minimum to working precision.
                return Ok((a, b));
            }
        }
    }
    Err(Error::Numerical(format!(
        "curve fit did not converge in {MAX_ITERS} iterations"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    // Reference values from an independent trust-region least-squares solver
    // on the same 300-point grid.
    const REFERENCE: [(f64, f64, f64); 3] = [
        (0.01, 1.895605396508602, 0.8006368232444001),
        (0.1, 1.5769420584936804, 0.8950617801587475),
        (0.5, 0.5830177718568386, 1.3341894305686566),
    ];

    #[test]
    fn matches_reference_fits() {
        for (md, ra, rb) in REFERENCE {
            let (a, b) = fit_ab(md, 1.0).unwrap();
            assert!((a - ra).abs() < 1e-6, "min_dist {md}: a {a} vs {ra}");
            assert!((b - rb).abs() < 1e-6, "min_dist {md}: b {b} vs {rb}");
        }
    }

    #[test]
    fn default_fit_is_near_one_at_min_dist() {
        let (a, b) = fit_ab(0.1, 1.0).unwrap();
        assert!((a - 1.58).abs() < 0.01 && (b - 0.90).abs() < 0.01);
        assert!((low_dim_similarity(0.1, a, b) - 1.0).abs() < 0.08);
    }

    #[test]
    fn a_shrinks_as_min_dist_grows() {
        let a: Vec<f64> = [0.01, 0.1, 0.5].iter().map(|&m| fit_ab(m, 1.0).unwrap().0).collect();
        assert!(a[0] > a[1] && a[1] > a[2]);
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(fit_ab(0.0, 1.0).is_err());
        assert!(fit_ab(1.5, 1.0).is_err());
    }

    #[test]
    fn least_squares_optimality_by_grid_probe() {
        // No neighbor on a fine local grid has lower squared error.
        let (a, b) = fit_ab(0.1, 1.0).unwrap();
        let xs: Vec<f64> = (1..=300).map(|i| 3.0 * i as f64 / 300.0).collect();
        let err = |a: f64, b: f64| -> f64 {
            xs.iter()
                .map(|&x| {
                    let y = if x <= 0.1 { 1.0 } else { (-(x - 0.1f64)).exp() };
                    (low_dim_similarity(x, a, b) - y).powi(2)
                })
                .sum()
        };
        let best = err(a, b);
        for da in [-1e-3, 0.0, 1e-3] {
            for db in [-1e-3, 0.0, 1e-3] {
                assert!(err(a + da, b + db) >= best - 1e-15);
            }
        }
    }
}
