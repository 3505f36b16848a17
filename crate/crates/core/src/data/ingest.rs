use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use image::{GrayImage, Luma};

use crate::error::{Error, Result};
use crate::numerics::Tensor;

use super::{Dataset, DiagnosticClass, Sample};

const IMAGE_EXTENSIONS: [&str; 3] = ["png", "jpg", "jpeg"];

fn is_image(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
}

fn is_hidden(path: &Path) -> bool {
    path.file_name()
        .and_then(|n| n.to_str())
        .is_some_and(|n| n.starts_with('.'))
}

/// Load `<root>/<ClassName>/<file>.{png,jpg}` into a square dataset.
///
/// Images are converted to grayscale in `[0, 1]` and bilinearly resized to
/// `image_size x image_size`. Samples are ordered by relative path; ids are
/// those relative paths with `/` separators.
pub fn load_dataset(root: &Path, image_size: usize) -> Result<Dataset> {
    if !image_size.is_power_of_two() {
        return Err(Error::Argument(format!(
            "image_size must be a power of two, got {image_size}"
        )));
    }
    let mut class_dirs = Vec::new();
    let mut unknown = Vec::new();
    for entry in fs::read_dir(root)
        .map_err(|e| Error::Ingestion(format!("cannot read {}: {e}", root.display())))?
    {
        let path = entry?.path();
        if !path.is_dir() || is_hidden(&path) {
            continue;
        }
        let name = path.file_name().unwrap_or_default().to_string_lossy().into_owned();
        match DiagnosticClass::from_dir_name(&name) {
            Some(class) => class_dirs.push((name, class, path)),
            None => unknown.push(name),
        }
    }
    if !unknown.is_empty() {
        unknown.sort();
        return Err(Error::Ingestion(format!(
            "unexpected directories under {}: {}",
            root.display(),
            unknown.join(", ")
        )));
    }
    let present: BTreeSet<DiagnosticClass> = class_dirs.iter().map(|(_, c, _)| *c).collect();
    if present.len() != class_dirs.len() {
        return Err(Error::Ingestion(
            "more than one directory maps to the same class".into(),
        ));
    }
    let missing: Vec<&str> = DiagnosticClass::ALL
        .iter()
        .filter(|c| !present.contains(c))
        .map(|c| c.name())
        .collect();
    if !missing.is_empty() {
        return Err(Error::Ingestion(format!(
            "missing class directories: {}",
            missing.join(", ")
        )));
    }

    let mut files: Vec<(String, DiagnosticClass, PathBuf)> = Vec::new();
    for (dir_name, class, dir) in &class_dirs {
        let mut count = 0;
        for entry in fs::read_dir(dir)? {
            let path = entry?.path();
            if path.is_file() && !is_hidden(&path) && is_image(&path) {
                let file = path.file_name().unwrap_or_default().to_string_lossy().into_owned();
                files.push((format!("{dir_name}/{file}"), *class, path));
                count += 1;
            }
        }
        if count == 0 {
            return Err(Error::Ingestion(format!("class directory {dir_name} is empty")));
        }
    }
    files.sort_by(|a, b| a.0.cmp(&b.0));

    let samples = files
        .into_iter()
        .map(|(id, label, path)| {
            let image = decode_gray(&path)?;
            Ok(Sample {
                id,
                image: resize_bilinear(&image, image_size, image_size)?,
                label,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(samples)
}

/// Decode one image file to grayscale in `[0, 1]`, `H x W`.
pub fn decode_gray(path: &Path) -> Result<Tensor> {
    let img = image::open(path).map_err(|e| Error::Decode {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    let gray = img.to_luma8();
    let (w, h) = gray.dimensions();
    let data = gray.as_raw().iter().map(|&p| p as f64 / 255.0).collect();
    Tensor::new(&[h as usize, w as usize], data)
}

/// Bilinear resampling with half-pixel centers and clamped borders. Equal
/// source and target sizes return the input unchanged.
pub fn resize_bilinear(image: &Tensor, out_h: usize, out_w: usize) -> Result<Tensor> {
    let (h, w) = match *image.shape() {
        [h, w] => (h, w),
        ref s => return Err(Error::Shape(format!("resize expects a 2-D image, got {s:?}"))),
    };
    if (h, w) == (out_h, out_w) {
        return Ok(image.clone());
    }
    let src = image.data();
    let sample_axis = |o: usize, n_out: usize, n_in: usize| {
        let pos = ((o as f64 + 0.5) * n_in as f64 / n_out as f64 - 0.5).clamp(0.0, (n_in - 1) as f64);
        let i0 = pos.floor() as usize;
        let i1 = (i0 + 1).min(n_in - 1);
        (i0, i1, pos - i0 as f64)
    };
    let mut out = Vec::with_capacity(out_h * out_w);
    for y in 0..out_h {
        let (y0, y1, fy) = sample_axis(y, out_h, h);
        for x in 0..out_w {
            let (x0, x1, fx) = sample_axis(x, out_w, w);
            let top = src[y0 * w + x0] * (1.0 - fx) + src[y0 * w + x1] * fx;
            let bottom = src[y1 * w + x0] * (1.0 - fx) + src[y1 * w + x1] * fx;
            out.push(top * (1.0 - fy) + bottom * fy);
        }
    }
    Tensor::new(&[out_h, out_w], out)
}

/// Write every sample as an 8-bit grayscale PNG at `<root>/<ClassName>/<name>.png`.
///
/// The file name is the last `/`-separated component of the sample id.
pub fn export_png_tree(dataset: &Dataset, root: &Path) -> Result<Vec<PathBuf>> {
    for class in DiagnosticClass::ALL {
        fs::create_dir_all(root.join(class.name()))?;
    }
    let size = dataset.image_size() as u32;
    let mut written = Vec::with_capacity(dataset.len());
    for s in dataset.samples() {
        let stem = s.id.rsplit('/').next().unwrap_or(&s.id);
        let path = root.join(s.label.name()).join(format!("{stem}.png"));
        let mut img = GrayImage::new(size, size);
        for (i, &v) in s.image.data().iter().enumerate() {
            let px = (v.clamp(0.0, 1.0) * 255.0).round() as u8;
            img.put_pixel(i as u32 % size, i as u32 / size, Luma([px]));
        }
        img.save(&path).map_err(|e| Error::Ingestion(format!(
            "cannot write {}: {e}",
            path.display()
        )))?;
        written.push(path);
    }
    Ok(written)
}
