//! Rasters, binary masks and the pixel-level operations the pipelines are
//! built from.

use std::path::Path;

use image::{GrayImage, ImageReader, Luma, Rgb, RgbImage};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::color::{rgb_to_lab, LabColor, RgbColor};
use crate::error::{Error, Result};

/// Long-side limit above which inputs are downscaled before processing.
pub const MAX_WORKING_SIDE: u32 = 1024;

/// Row-major 8-bit sRGB raster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageBuffer {
    width: u32,
    height: u32,
    pixels: Vec<RgbColor>,
}

impl ImageBuffer {
    pub fn new(width: u32, height: u32, pixels: Vec<RgbColor>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidParameter(format!(
                "image dimensions must be positive, got {width}x{height}"
            )));
        }
        if pixels.len() != width as usize * height as usize {
            return Err(Error::InvalidParameter(format!(
                "{} pixels do not fill a {width}x{height} image",
                pixels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: u32, height: u32, color: RgbColor) -> Self {
        Self::from_fn(width, height, |_, _| color)
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> RgbColor) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be positive");
        let mut pixels = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            pixels,
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn pixels(&self) -> &[RgbColor] {
        &self.pixels
    }

    pub fn get(&self, x: u32, y: u32) -> RgbColor {
        self.pixels[(y * self.width + x) as usize]
    }

    pub fn set(&mut self, x: u32, y: u32, c: RgbColor) {
        self.pixels[(y * self.width + x) as usize] = c;
    }

    pub fn map_pixels(&self, f: impl Fn(RgbColor) -> RgbColor) -> Self {
        Self {
            width: self.width,
            height: self.height,
            pixels: self.pixels.iter().map(|&p| f(p)).collect(),
        }
    }

    pub fn to_rgb_image(&self) -> RgbImage {
        RgbImage::from_fn(self.width, self.height, |x, y| {
            Rgb(self.get(x, y).channels())
        })
    }

    pub fn from_rgb_image(img: &RgbImage) -> Self {
        Self::from_fn(img.width(), img.height(), |x, y| {
            let Rgb([r, g, b]) = *img.get_pixel(x, y);
            RgbColor::new(r, g, b)
        })
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        self.to_rgb_image()
            .save_with_format(path, image::ImageFormat::Png)
            .map_err(|e| image_write_error(path, e))
    }

    /// Area-averaged downscale so that the long side is at most `max_side`.
    /// Returns the image unchanged when it already fits.
    pub fn downscale_to_fit(&self, max_side: u32) -> ImageBuffer {
        let Some((w, h)) = fit_dims(self.width, self.height, max_side) else {
            return self.clone();
        };
        let planes: Vec<Vec<f64>> = (0..3)
            .map(|ch| {
                let src: Vec<f64> = self
                    .pixels
                    .iter()
                    .map(|p| p.channels()[ch] as f64)
                    .collect();
                area_resample(&src, self.width, self.height, w, h)
            })
            .collect();
        let pixels = (0..(w * h) as usize)
            .map(|i| RgbColor::from_f64([planes[0][i], planes[1][i], planes[2][i]]))
            .collect();
        ImageBuffer {
            width: w,
            height: h,
            pixels,
        }
    }
}

fn image_write_error(path: &Path, e: image::ImageError) -> Error {
    match e {
        image::ImageError::IoError(source) => Error::Io {
            path: path.to_path_buf(),
            source,
        },
        other => Error::Io {
            path: path.to_path_buf(),
            source: std::io::Error::other(other.to_string()),
        },
    }
}

/// Target dimensions when `(w, h)` exceeds `max_side`, preserving aspect.
pub fn fit_dims(w: u32, h: u32, max_side: u32) -> Option<(u32, u32)> {
    let long = w.max(h);
    if long <= max_side {
        return None;
    }
    let scale = max_side as f64 / long as f64;
    let nw = ((w as f64 * scale).round() as u32).clamp(1, max_side);
    let nh = ((h as f64 * scale).round() as u32).clamp(1, max_side);
    Some((nw, nh))
}

/// Source index/weight lists mapping `src` samples onto `dst` samples by
/// exact interval overlap.
fn area_weights(src: u32, dst: u32) -> Vec<Vec<(usize, f64)>> {
    let scale = src as f64 / dst as f64;
    (0..dst)
        .map(|o| {
            let lo = o as f64 * scale;
            let hi = (o + 1) as f64 * scale;
            let mut w = Vec::new();
            let mut i = lo.floor() as usize;
            while (i as f64) < hi && i < src as usize {
                let overlap = (hi.min(i as f64 + 1.0) - lo.max(i as f64)).max(0.0);
                if overlap > 0.0 {
                    w.push((i, overlap / scale));
                }
                i += 1;
            }
            w
        })
        .collect()
}

fn area_resample(src: &[f64], sw: u32, sh: u32, dw: u32, dh: u32) -> Vec<f64> {
    let wx = area_weights(sw, dw);
    let wy = area_weights(sh, dh);
    let mut tmp = vec![0.0; (dw * sh) as usize];
    for y in 0..sh as usize {
        let row = &src[y * sw as usize..(y + 1) * sw as usize];
        for (x, ws) in wx.iter().enumerate() {
            tmp[y * dw as usize + x] = ws.iter().map(|&(i, w)| row[i] * w).sum();
        }
    }
    let mut out = vec![0.0; (dw * dh) as usize];
    for (y, ws) in wy.iter().enumerate() {
        for x in 0..dw as usize {
            out[y * dw as usize + x] = ws.iter().map(|&(i, w)| tmp[i * dw as usize + x] * w).sum();
        }
    }
    out
}

/// Row-major binary region membership; `true` marks the region of interest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PixelMask {
    width: u32,
    height: u32,
    bits: Vec<bool>,
}

impl PixelMask {
    pub fn new(width: u32, height: u32, bits: Vec<bool>) -> Result<Self> {
        if width == 0 || height == 0 || bits.len() != width as usize * height as usize {
            return Err(Error::InvalidParameter(format!(
                "{} bits do not fill a {width}x{height} mask",
                bits.len()
            )));
        }
        Ok(Self {
            width,
            height,
            bits,
        })
    }

    pub fn filled(width: u32, height: u32, value: bool) -> Self {
        Self::from_fn(width, height, |_, _| value)
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> bool) -> Self {
        assert!(width > 0 && height > 0, "mask dimensions must be positive");
        let mut bits = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            bits,
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, x: u32, y: u32) -> bool {
        self.bits[(y * self.width + x) as usize]
    }

    pub fn set(&mut self, x: u32, y: u32, v: bool) {
        self.bits[(y * self.width + x) as usize] = v;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    fn ensure_dims(&self, other: (u32, u32)) -> Result<()> {
        if self.dims() != other {
            return Err(Error::DimensionMismatch {
                expected: other,
                found: self.dims(),
            });
        }
        Ok(())
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        GrayImage::from_fn(self.width, self.height, |x, y| {
            Luma([if self.get(x, y) { 255 } else { 0 }])
        })
        .save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| image_write_error(path, e))
    }

    /// Area-averaged downscale; a target pixel is set when at least half of
    /// its footprint was set.
    pub fn downscale_to_fit(&self, max_side: u32) -> PixelMask {
        let Some((w, h)) = fit_dims(self.width, self.height, max_side) else {
            return self.clone();
        };
        let src: Vec<f64> = self
            .bits
            .iter()
            .map(|&b| if b { 1.0 } else { 0.0 })
            .collect();
        let cover = area_resample(&src, self.width, self.height, w, h);
        PixelMask {
            width: w,
            height: h,
            bits: cover.iter().map(|&c| c >= 0.5).collect(),
        }
    }
}

fn open_image(path: &Path) -> Result<image::DynamicImage> {
    if !path.is_file() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let decode_err = |message: String| Error::Decode {
        path: path.to_path_buf(),
        message,
    };
    ImageReader::open(path)
        .map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?
        .with_guessed_format()
        .map_err(|e| decode_err(e.to_string()))?
        .decode()
        .map_err(|e| decode_err(e.to_string()))
}

/// Decodes a PNG or JPEG into an 8-bit RGB raster, dropping alpha.
pub fn decode_image(path: &Path) -> Result<ImageBuffer> {
    Ok(ImageBuffer::from_rgb_image(&open_image(path)?.to_rgb8()))
}

/// Loads a grayscale or RGB mask, thresholding luma at 128. The mask must
/// have the same dimensions as `img`.
pub fn load_mask(path: &Path, img: &ImageBuffer) -> Result<PixelMask> {
    let luma = open_image(path)?.to_luma8();
    let mask = PixelMask {
        width: luma.width(),
        height: luma.height(),
        bits: luma.pixels().map(|p| p.0[0] >= 128).collect(),
    };
    mask.ensure_dims(img.dims())?;
    Ok(mask)
}

/// Gaussian kernel side for an image: `max(3, round(min(w, h) / divisor))`,
/// bumped to the next odd number.
pub fn blur_kernel_size(width: u32, height: u32, kernel_divisor: u32) -> usize {
    let raw = (width.min(height) as f64 / kernel_divisor.max(1) as f64).round() as usize;
    let k = raw.max(3);
    if k.is_multiple_of(2) {
        k + 1
    } else {
        k
    }
}

/// Normalized 1-D Gaussian of odd length `size` with
/// `σ = 0.3·((size − 1)·0.5 − 1) + 0.8`.
pub fn gaussian_kernel(size: usize) -> Vec<f64> {
    let sigma = 0.3 * ((size as f64 - 1.0) * 0.5 - 1.0) + 0.8;
    let half = (size / 2) as f64;
    let raw: Vec<f64> = (0..size)
        .map(|i| {
            let x = i as f64 - half;
            (-x * x / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let sum: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / sum).collect()
}

/// Half-sample symmetric reflection (`cba|abc|cba`), valid for any offset.
#[inline]
fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let m = i.rem_euclid(2 * n);
    (if m < n { m } else { 2 * n - 1 - m }) as usize
}

/// Separable Gaussian blur with a kernel proportional to the smaller image
/// side. Borders are mirrored, which keeps the channel sums unchanged up to
/// the final rounding.
pub fn gaussian_blur(img: &ImageBuffer, kernel_divisor: u32) -> Result<ImageBuffer> {
    if kernel_divisor == 0 {
        return Err(Error::InvalidParameter(
            "kernel divisor must be >= 1".into(),
        ));
    }
    let size = blur_kernel_size(img.width, img.height, kernel_divisor);
    Ok(convolve_separable(img, &gaussian_kernel(size)))
}

pub(crate) fn convolve_separable(img: &ImageBuffer, kernel: &[f64]) -> ImageBuffer {
    let (w, h) = (img.width as usize, img.height as usize);
    let half = (kernel.len() / 2) as isize;

    let mut horiz = vec![[0.0f64; 3]; w * h];
    horiz.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        let src = &img.pixels[y * w..(y + 1) * w];
        for (x, out) in row.iter_mut().enumerate() {
            let mut acc = [0.0; 3];
            for (t, &k) in kernel.iter().enumerate() {
                let p = src[reflect(x as isize + t as isize - half, w)];
                acc[0] += k * p.r as f64;
                acc[1] += k * p.g as f64;
                acc[2] += k * p.b as f64;
            }
            *out = acc;
        }
    });

    let mut pixels = vec![RgbColor::BLACK; w * h];
    pixels.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        for (x, out) in row.iter_mut().enumerate() {
            let mut acc = [0.0; 3];
            for (t, &k) in kernel.iter().enumerate() {
                let p = horiz[reflect(y as isize + t as isize - half, h) * w + x];
                acc[0] += k * p[0];
                acc[1] += k * p[1];
                acc[2] += k * p[2];
            }
            *out = RgbColor::from_f64(acc);
        }
    });

    ImageBuffer {
        width: img.width,
        height: img.height,
        pixels,
    }
}

/// Sliding-window test along one axis. `dilate` asks "any set bit in the
/// window", erosion asks "every in-bounds bit set".
fn window_pass(
    bits: &[bool],
    w: usize,
    h: usize,
    radius: usize,
    horizontal: bool,
    dilate: bool,
) -> Vec<bool> {
    let (lines, len) = if horizontal { (h, w) } else { (w, h) };
    let idx = |line: usize, i: usize| {
        if horizontal {
            line * w + i
        } else {
            i * w + line
        }
    };
    let mut out = vec![false; bits.len()];
    let mut prefix = vec![0usize; len + 1];
    for line in 0..lines {
        for i in 0..len {
            prefix[i + 1] = prefix[i] + bits[idx(line, i)] as usize;
        }
        for i in 0..len {
            let lo = i.saturating_sub(radius);
            let hi = (i + radius + 1).min(len);
            let set = prefix[hi] - prefix[lo];
            out[idx(line, i)] = if dilate { set > 0 } else { set == hi - lo };
        }
    }
    out
}

/// Dilation followed by erosion with a `(2·radius + 1)²` square. Pixels
/// outside the image take no part in either step, so regions touching the
/// border are not eroded away.
pub fn morphological_close(mask: &PixelMask, radius: u32) -> Result<PixelMask> {
    if radius == 0 {
        return Err(Error::InvalidParameter(
            "closing radius must be >= 1".into(),
        ));
    }
    let (w, h, r) = (mask.width as usize, mask.height as usize, radius as usize);
    let dilated = window_pass(
        &window_pass(&mask.bits, w, h, r, true, true),
        w,
        h,
        r,
        false,
        true,
    );
    let closed = window_pass(
        &window_pass(&dilated, w, h, r, true, false),
        w,
        h,
        r,
        false,
        false,
    );
    Ok(PixelMask {
        width: mask.width,
        height: mask.height,
        bits: closed,
    })
}

/// Closed LAB intervals selecting a region by color.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabThresholds {
    pub l_min: f64,
    pub l_max: f64,
    pub a_min: f64,
    pub a_max: f64,
    pub b_min: f64,
    pub b_max: f64,
}

impl LabThresholds {
    /// Default skin box for wrist images.
    pub const SKIN: LabThresholds = LabThresholds {
        l_min: 35.0,
        l_max: 90.0,
        a_min: 0.0,
        a_max: 35.0,
        b_min: 5.0,
        b_max: 45.0,
    };

    /// Default vein box for wrist images.
    pub const VEIN: LabThresholds = LabThresholds {
        l_min: 25.0,
        l_max: 75.0,
        a_min: -30.0,
        a_max: 20.0,
        b_min: -40.0,
        b_max: 10.0,
    };

    pub fn validate(&self) -> Result<()> {
        let axes = [
            ("L", self.l_min, self.l_max),
            ("a", self.a_min, self.a_max),
            ("b", self.b_min, self.b_max),
        ];
        for (name, lo, hi) in axes {
            if !(lo.is_finite() && hi.is_finite()) || lo > hi {
                return Err(Error::InvalidParameter(format!(
                    "threshold interval on {name} is invalid: [{lo}, {hi}]"
                )));
            }
        }
        if self.l_min < 0.0 || self.l_max > 100.0 {
            return Err(Error::InvalidParameter(format!(
                "L thresholds [{}, {}] outside [0, 100]",
                self.l_min, self.l_max
            )));
        }
        Ok(())
    }

    pub fn contains(&self, c: LabColor) -> bool {
        (self.l_min..=self.l_max).contains(&c.l)
            && (self.a_min..=self.a_max).contains(&c.a)
            && (self.b_min..=self.b_max).contains(&c.b)
    }
}

pub fn lab_threshold_mask(img: &ImageBuffer, t: &LabThresholds) -> Result<PixelMask> {
    t.validate()?;
    let bits = img
        .pixels
        .par_iter()
        .map(|&p| t.contains(rgb_to_lab(p)))
        .collect();
    Ok(PixelMask {
        width: img.width,
        height: img.height,
        bits,
    })
}

/// Pixels set in `a` and clear in `b`.
pub fn subtract_mask(a: &PixelMask, b: &PixelMask) -> Result<PixelMask> {
    b.ensure_dims(a.dims())?;
    Ok(PixelMask {
        width: a.width,
        height: a.height,
        bits: a.bits.iter().zip(&b.bits).map(|(&x, &y)| x && !y).collect(),
    })
}

/// Pixels set in both masks.
pub fn intersect_mask(a: &PixelMask, b: &PixelMask) -> Result<PixelMask> {
    b.ensure_dims(a.dims())?;
    Ok(PixelMask {
        width: a.width,
        height: a.height,
        bits: a.bits.iter().zip(&b.bits).map(|(&x, &y)| x && y).collect(),
    })
}

/// Colors under the mask, in row-major order.
pub fn masked_pixels(img: &ImageBuffer, mask: &PixelMask) -> Result<Vec<RgbColor>> {
    mask.ensure_dims(img.dims())?;
    Ok(img
        .pixels
        .iter()
        .zip(&mask.bits)
        .filter(|(_, &m)| m)
        .map(|(&p, _)| p)
        .collect())
}

/// Mean of the per-pixel LAB values.
pub fn mean_lab(pixels: &[RgbColor]) -> Result<LabColor> {
    if pixels.is_empty() {
        return Err(Error::EmptySelection);
    }
    let n = pixels.len() as f64;
    let sum = pixels.iter().fold([0.0; 3], |mut acc, &p| {
        let lab = rgb_to_lab(p);
        acc[0] += lab.l;
        acc[1] += lab.a;
        acc[2] += lab.b;
        acc
    });
    Ok(LabColor::new(sum[0] / n, sum[1] / n, sum[2] / n))
}

/// Disk of pixels whose centers lie within `radius` of `center`. Pixel
/// `(x, y)` sits at integer coordinates, matching landmark files.
pub fn circular_mask(
    center: (f64, f64),
    radius: f64,
    width: u32,
    height: u32,
) -> Result<PixelMask> {
    if !(radius.is_finite() && radius > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "radius must be positive, got {radius}"
        )));
    }
    let r2 = radius * radius;
    Ok(PixelMask::from_fn(width, height, |x, y| {
        let dx = x as f64 - center.0;
        let dy = y as f64 - center.1;
        dx * dx + dy * dy <= r2
    }))
}

/// 68-point facial landmarks, stored zero-based.
#[derive(Debug, Clone, PartialEq)]
pub struct Landmarks {
    points: Vec<(f64, f64)>,
}

impl Landmarks {
    pub const COUNT: usize = 68;

    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.len() != Self::COUNT {
            return Err(Error::InvalidLandmarks(format!(
                "expected {} points, found {}",
                Self::COUNT,
                points.len()
            )));
        }
        Ok(Self { points })
    }

    /// Landmark by its one-based index in the 68-point convention.
    pub fn point(&self, one_based: usize) -> (f64, f64) {
        self.points[one_based - 1]
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn scaled(&self, sx: f64, sy: f64) -> Self {
        Self {
            points: self.points.iter().map(|&(x, y)| (x * sx, y * sy)).collect(),
        }
    }

    /// Parses one `x y` integer pair per line; blank lines are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut points = Vec::with_capacity(Self::COUNT);
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut it = line.split_whitespace();
            let mut coord = || -> Result<f64> {
                it.next()
                    .and_then(|t| t.parse::<i64>().ok())
                    .map(|v| v as f64)
                    .ok_or_else(|| {
                        Error::InvalidLandmarks(format!("line {}: expected two integers", n + 1))
                    })
            };
            let (x, y) = (coord()?, coord()?);
            if it.next().is_some() {
                return Err(Error::InvalidLandmarks(format!(
                    "line {}: expected two integers",
                    n + 1
                )));
            }
            points.push((x, y));
        }
        Self::new(points)
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.is_file() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn to_text(&self) -> String {
        self.points
            .iter()
            .map(|&(x, y)| format!("{} {}\n", x.round() as i64, y.round() as i64))
            .collect()
    }
}
