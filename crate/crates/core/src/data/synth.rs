use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::numerics::{seeded_rng, Tensor};

use super::{Dataset, DiagnosticClass, Sample};

const COMPONENTS: usize = 3;
const BACKGROUND: f64 = 0.5;
const AMPLITUDE: (f64, f64) = (0.08, 0.14);

/// Radial limits `(lo, hi]` of the frequency band assigned to class `k`.
pub fn band_radius_limits(class: usize, size: usize) -> (f64, f64) {
    let unit = size as f64 / 16.0;
    (class as f64 * unit, (class + 1) as f64 * unit)
}

/// Distance of DFT index `(u, v)` from DC on a periodic `size x size` grid.
pub fn wrapped_radius(u: usize, v: usize, size: usize) -> f64 {
    let fold = |k: usize| {
        if k <= size / 2 {
            k as f64
        } else {
            k as f64 - size as f64
        }
    };
    fold(u).hypot(fold(v))
}

/// Class band containing radius `r`, if any.
pub fn band_of_radius(r: f64, size: usize) -> Option<usize> {
    (0..4).find(|&k| {
        let (lo, hi) = band_radius_limits(k, size);
        r > lo && r <= hi
    })
}

/// Synthetic four-class dataset whose classes differ only in spatial
/// frequency content.
///
/// A class-`k` image is a mid-gray background plus a few cosines with integer
/// frequency vectors whose radius falls in band `k` (see
/// [`band_radius_limits`]), random orientation, phase and amplitude, then
/// Gaussian pixel noise with std `noise_sigma`, clamped to `[0, 1]`.
pub fn synth_dataset(n: usize, size: usize, noise_sigma: f64, seed: u64) -> Result<Dataset> {
    if n == 0 || !n.is_multiple_of(4) {
        return Err(Error::Argument(format!("n must be divisible by 4, got {n}")));
    }
    if !size.is_power_of_two() || size < 16 {
        return Err(Error::Argument(format!(
            "size must be a power of two of at least 16, got {size}"
        )));
    }
    if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
        return Err(Error::Argument(format!("noise_sigma must be >= 0, got {noise_sigma}")));
    }
    let mut rng = seeded_rng(seed);
    let mut samples = Vec::with_capacity(n);
    for class in DiagnosticClass::ALL {
        let (lo, hi) = band_radius_limits(class.code(), size);
        for j in 0..n / 4 {
            let mut comps = Vec::with_capacity(COMPONENTS);
            while comps.len() < COMPONENTS {
                let r = rng.uniform_range(lo, hi);
                let theta = rng.uniform_range(0.0, PI);
                let (fu, fv) = ((r * theta.cos()).round(), (r * theta.sin()).round());
                let radius = fu.hypot(fv);
                if radius <= lo || radius > hi {
                    continue;
                }
                let phase = rng.uniform_range(0.0, 2.0 * PI);
                let amp = rng.uniform_range(AMPLITUDE.0, AMPLITUDE.1);
                comps.push((fu, fv, phase, amp));
            }
            let mut data = vec![BACKGROUND; size * size];
            for &(fu, fv, phase, amp) in &comps {
                for y in 0..size {
                    for x in 0..size {
                        let arg = 2.0 * PI * (fu * y as f64 + fv * x as f64) / size as f64 + phase;
                        data[y * size + x] += amp * arg.cos();
                    }
                }
            }
            if noise_sigma > 0.0 {
                for v in &mut data {
                    *v += noise_sigma * rng.normal();
                }
            }
            for v in &mut data {
                *v = v.clamp(0.0, 1.0);
            }
            samples.push(Sample {
                id: format!("{}/synth_{j:05}", class.name()),
                image: Tensor::new(&[size, size], data)?,
                label: class,
            });
        }
    }
    Dataset::new(samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::fft2;

    fn band_energies(image: &Tensor) -> [f64; 4] {
        let size = image.shape()[0];
        let k = fft2(image).unwrap();
        let mut e = [0.0; 4];
        for u in 0..size {
            for v in 0..size {
                if let Some(b) = band_of_radius(wrapped_radius(u, v, size), size) {
                    e[b] += k.real.at2(u, v).powi(2) + k.imag.at2(u, v).powi(2);
                }
            }
        }
        e
    }

    fn argmax(xs: &[f64]) -> usize {
        (0..xs.len()).fold(0, |b, i| if xs[i] > xs[b] { i } else { b })
    }

    #[test]
    fn deterministic() {
        assert_eq!(
            synth_dataset(16, 32, 0.05, 3).unwrap(),
            synth_dataset(16, 32, 0.05, 3).unwrap()
        );
        assert_ne!(
            synth_dataset(16, 32, 0.05, 3).unwrap(),
            synth_dataset(16, 32, 0.05, 4).unwrap()
        );
    }

    #[test]
    fn balanced_classes() {
        let d = synth_dataset(400, 64, 0.05, 1).unwrap();
        assert_eq!(d.class_counts(None), [100; 4]);
        assert!(d
            .samples()
            .iter()
            .all(|s| s.image.data().iter().all(|v| (0.0..=1.0).contains(v))));
    }

    #[test]
    fn rejects_indivisible_n() {
        let err = synth_dataset(402, 64, 0.0, 0).unwrap_err();
        assert!(err.to_string().contains("n must be divisible by 4"));
    }

    #[test]
    fn noiseless_peak_lies_in_class_band() {
        let size = 64;
        let d = synth_dataset(40, size, 0.0, 8).unwrap();
        for s in d.samples() {
            let k = fft2(&s.image).unwrap();
            let mut best = (0.0, 0, 0);
            for u in 0..size {
                for v in 0..size {
                    if (u, v) == (0, 0) {
                        continue;
                    }
                    let m = k.real.at2(u, v).hypot(k.imag.at2(u, v));
                    if m > best.0 {
                        best = (m, u, v);
                    }
                }
            }
            let r = wrapped_radius(best.1, best.2, size);
            assert_eq!(band_of_radius(r, size), Some(s.label.code()), "{}", s.id);
        }
    }

    #[test]
    fn band_energy_rule_is_perfect_without_noise() {
        let d = synth_dataset(80, 32, 0.0, 12).unwrap();
        for s in d.samples() {
            assert_eq!(argmax(&band_energies(&s.image)), s.label.code());
        }
    }
}
