//! 2-D discrete Fourier analysis of images and assembly of the dual-domain
//! input stack.
//!
//! The forward transform is unnormalized,
//! `X[u,v] = sum_{m,n} x[m,n] exp(-2 pi i (u m / H + v n / W))`, computed as
//! row transforms followed by column transforms with an iterative radix-2
//! Cooley-Tukey kernel. The inverse carries the `1 / (H W)` factor.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Tensor;

/// Residual imaginary magnitude above which an inverse transform of a
/// supposedly real spectrum is rejected.
pub const IMAG_RESIDUE_LIMIT: f64 = 1e-6;

/// Which input channels the classifier sees.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputMode {
    /// Grayscale image only.
    Control,
    /// Grayscale image plus real and imaginary k-space planes.
    Experimental,
}

impl InputMode {
    pub const ALL: [InputMode; 2] = [InputMode::Experimental, InputMode::Control];

    pub fn channels(self) -> usize {
        match self {
            InputMode::Control => 1,
            InputMode::Experimental => 3,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            InputMode::Control => "control",
            InputMode::Experimental => "experimental",
        }
    }
}

impl fmt::Display for InputMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for InputMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "control" => Ok(InputMode::Control),
            "experimental" => Ok(InputMode::Experimental),
            other => Err(Error::Argument(format!("unknown input mode {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scaling {
    Raw,
    /// `sign(v) * ln(1 + |v|)`
    SignedLog,
}

/// Real and imaginary frequency planes of one image.
#[derive(Clone, Debug, PartialEq)]
pub struct KSpacePlanes {
    pub real: Tensor,
    pub imag: Tensor,
    pub dc_centered: bool,
    pub scaling: Scaling,
}

impl KSpacePlanes {
    pub fn height(&self) -> usize {
        self.real.shape()[0]
    }

    pub fn width(&self) -> usize {
        self.real.shape()[1]
    }

    fn check(&self) -> Result<(usize, usize)> {
        match (self.real.shape(), self.imag.shape()) {
            (&[h, w], &[h2, w2]) if h == h2 && w == w2 => Ok((h, w)),
            (r, i) => Err(Error::Shape(format!(
                "real plane {r:?} and imaginary plane {i:?} must be equal 2-D shapes"
            ))),
        }
    }

    /// Quadrant-swap both planes so DC sits at `(H/2, W/2)`.
    pub fn centered(&self) -> Result<Self> {
        if self.dc_centered {
            return Ok(self.clone());
        }
        Ok(Self {
            real: fftshift(&self.real)?,
            imag: fftshift(&self.imag)?,
            dc_centered: true,
            scaling: self.scaling,
        })
    }

    pub fn signed_log(&self) -> Self {
        if self.scaling == Scaling::SignedLog {
            return self.clone();
        }
        Self {
            real: self.real.map(signed_log),
            imag: self.imag.map(signed_log),
            dc_centered: self.dc_centered,
            scaling: Scaling::SignedLog,
        }
    }
}

pub fn signed_log(v: f64) -> f64 {
    v.signum() * v.abs().ln_1p()
}

fn image_extents(image: &Tensor) -> Result<(usize, usize)> {
    match *image.shape() {
        [h, w] => Ok((h, w)),
        ref s => Err(Error::Shape(format!("expected a 2-D plane, got {s:?}"))),
    }
}

fn require_pow2(h: usize, w: usize) -> Result<()> {
    if !h.is_power_of_two() || !w.is_power_of_two() {
        return Err(Error::Dimension(format!(
            "radix-2 FFT needs power-of-two extents, got {h}x{w}"
        )));
    }
    Ok(())
}

/// In-place radix-2 transform of one complex sequence. `inverse` flips the
/// twiddle sign and does not normalize.
fn fft_in_place(re: &mut [f64], im: &mut [f64], twiddles: &[(f64, f64)], inverse: bool) {
    let n = re.len();
    debug_assert!(n.is_power_of_two() && im.len() == n);
    if n < 2 {
        return;
    }
    let bits = n.trailing_zeros();
    for i in 0..n {
        let j = i.reverse_bits() >> (usize::BITS - bits);
        if j > i {
            re.swap(i, j);
            im.swap(i, j);
        }
    }
    let sign = if inverse { -1.0 } else { 1.0 };
    let mut len = 2;
    while len <= n {
        let half = len / 2;
        let step = n / len;
        for start in (0..n).step_by(len) {
            for k in 0..half {
                let (wr, wi) = twiddles[k * step];
                let wi = sign * wi;
                let (a, b) = (start + k, start + k + half);
                let tr = re[b] * wr - im[b] * wi;
                let ti = re[b] * wi + im[b] * wr;
                re[b] = re[a] - tr;
                im[b] = im[a] - ti;
                re[a] += tr;
                im[a] += ti;
            }
        }
        len <<= 1;
    }
}

/// `exp(-2 pi i k / n)` for `k < n / 2`, each evaluated directly.
fn twiddles(n: usize) -> Vec<(f64, f64)> {
    (0..n / 2)
        .map(|k| {
            let theta = -2.0 * PI * k as f64 / n as f64;
            (theta.cos(), theta.sin())
        })
        .collect()
}

fn transform_2d(re: &mut [f64], im: &mut [f64], h: usize, w: usize, inverse: bool) {
    let tw_row = twiddles(w);
    for r in 0..h {
        let span = r * w..(r + 1) * w;
        fft_in_place(&mut re[span.clone()], &mut im[span], &tw_row, inverse);
    }
    let tw_col = twiddles(h);
    let mut col_re = vec![0.0; h];
    let mut col_im = vec![0.0; h];
    for c in 0..w {
        for r in 0..h {
            col_re[r] = re[r * w + c];
            col_im[r] = im[r * w + c];
        }
        fft_in_place(&mut col_re, &mut col_im, &tw_col, inverse);
        for r in 0..h {
            re[r * w + c] = col_re[r];
            im[r * w + c] = col_im[r];
        }
    }
}

/// Forward 2-D DFT of a real image, no normalization, DC at `(0, 0)`.
pub fn fft2(image: &Tensor) -> Result<KSpacePlanes> {
    let (h, w) = image_extents(image)?;
    require_pow2(h, w)?;
    let mut re = image.data().to_vec();
    let mut im = vec![0.0; h * w];
    transform_2d(&mut re, &mut im, h, w, false);
    Ok(KSpacePlanes {
        real: Tensor::new(&[h, w], re)?,
        imag: Tensor::new(&[h, w], im)?,
        dc_centered: false,
        scaling: Scaling::Raw,
    })
}

/// Inverse 2-D DFT with `1 / (H W)` normalization, returning the real part.
///
/// The imaginary residue is checked and discarded; anything above
/// [`IMAG_RESIDUE_LIMIT`] means the planes were not the spectrum of a real
/// image.
pub fn ifft2(planes: &KSpacePlanes) -> Result<Tensor> {
    if planes.dc_centered || planes.scaling != Scaling::Raw {
        return Err(Error::Argument(
            "ifft2 needs raw, un-shifted planes".to_string(),
        ));
    }
    let (h, w) = planes.check()?;
    require_pow2(h, w)?;
    let mut re = planes.real.data().to_vec();
    let mut im = planes.imag.data().to_vec();
    transform_2d(&mut re, &mut im, h, w, true);
    let norm = 1.0 / (h * w) as f64;
    let residue = im.iter().fold(0.0f64, |m, v| m.max((v * norm).abs()));
    if residue > IMAG_RESIDUE_LIMIT {
        return Err(Error::NumericalConsistency(format!(
            "inverse transform left an imaginary residue of {residue:e}"
        )));
    }
    re.iter_mut().for_each(|v| *v *= norm);
    Tensor::new(&[h, w], re)
}

/// Quadrant swap moving index `(0, 0)` to `(H/2, W/2)`.
pub fn fftshift(plane: &Tensor) -> Result<Tensor> {
    let (h, w) = image_extents(plane)?;
    if h % 2 != 0 || w % 2 != 0 {
        return Err(Error::Dimension(format!(
            "fftshift needs even extents, got {h}x{w}"
        )));
    }
    let src = plane.data();
    let mut out = vec![0.0; h * w];
    for r in 0..h {
        let rr = (r + h / 2) % h;
        for c in 0..w {
            out[rr * w + (c + w / 2) % w] = src[r * w + c];
        }
    }
    Tensor::new(&[h, w], out)
}

/// `ln(1 + |X|)` per coefficient, for display.
pub fn log_magnitude(planes: &KSpacePlanes) -> Result<Tensor> {
    let (h, w) = planes.check()?;
    let data = planes
        .real
        .data()
        .iter()
        .zip(planes.imag.data())
        .map(|(re, im)| re.hypot(*im).ln_1p())
        .collect();
    Tensor::new(&[h, w], data)
}

/// Mean and standard deviation applied as `(v - mean) / std`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: f64,
    pub std: f64,
}

impl Standardizer {
    pub const IDENTITY: Standardizer = Standardizer { mean: 0.0, std: 1.0 };

    /// Population statistics over every value yielded. A zero spread falls
    /// back to unit scale.
    pub fn fit<'a>(values: impl IntoIterator<Item = &'a f64>) -> Self {
        let (mut n, mut sum, mut sum_sq) = (0usize, 0.0, 0.0);
        let mut vals = Vec::new();
        for &v in values {
            n += 1;
            sum += v;
            vals.push(v);
        }
        if n == 0 {
            return Self::IDENTITY;
        }
        let mean = sum / n as f64;
        for v in &vals {
            sum_sq += (v - mean) * (v - mean);
        }
        let std = (sum_sq / n as f64).sqrt();
        Self {
            mean,
            std: if std > 1e-12 { std } else { 1.0 },
        }
    }

    pub fn apply(&self, v: f64) -> f64 {
        (v - self.mean) / self.std
    }
}

/// Standardization statistics for the two k-space channels.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelStats {
    pub real: Standardizer,
    pub imag: Standardizer,
}

/// Classifier input for one image, `C x H x W`.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelStack {
    pub channels: Tensor,
    pub mode: InputMode,
}

/// Centered, signed-log k-space planes of `image`, before standardization.
pub fn kspace_features(image: &Tensor) -> Result<KSpacePlanes> {
    Ok(fft2(image)?.centered()?.signed_log())
}

/// Build the classifier input for one image.
///
/// Control mode passes the image through. Experimental mode appends the
/// centered, signed-log real and imaginary planes, each standardized with the
/// supplied dataset statistics. Channel order is `[spatial, real, imag]`.
pub fn assemble_channels(
    image: &Tensor,
    mode: InputMode,
    stats: Option<&ChannelStats>,
) -> Result<ChannelStack> {
    let (h, w) = image_extents(image)?;
    match mode {
        InputMode::Control => Ok(ChannelStack {
            channels: image.clone().reshape(&[1, h, w])?,
            mode,
        }),
        InputMode::Experimental => {
            let stats = stats.ok_or_else(|| {
                Error::Config("experimental mode needs k-space channel statistics".to_string())
            })?;
            let k = kspace_features(image)?;
            let mut data = Vec::with_capacity(3 * h * w);
            data.extend_from_slice(image.data());
            data.extend(k.real.data().iter().map(|&v| stats.real.apply(v)));
            data.extend(k.imag.data().iter().map(|&v| stats.imag.apply(v)));
            Ok(ChannelStack {
                channels: Tensor::new(&[3, h, w], data)?,
                mode,
            })
        }
    }
}
