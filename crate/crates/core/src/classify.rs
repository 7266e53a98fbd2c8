//! Skin tone, hair, iris and undertone pipelines.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::cluster::{distinct_count, dominant_cluster, kmeans, xmeans, ClusterConfig};
use crate::color::{
    gamma_correct, hsv_to_rgb, rgb_to_hsv, rgb_to_lab, srgb_f64_to_lab, HsvColor, LabColor,
    RgbColor,
};
use crate::delta_e::{ciede2000, lab_cosine_similarity, DeltaEParams};
use crate::error::{Error, Result};
use crate::imaging::{
    blur_kernel_size, circular_mask, gaussian_blur, lab_threshold_mask, masked_pixels, mean_lab,
    morphological_close, subtract_mask, ImageBuffer, LabThresholds, Landmarks, PixelMask,
    MAX_WORKING_SIDE,
};
use crate::scale::{ToneClass, ToneScale};

/// Masks with fewer pixels than this carry no usable signal.
pub const MIN_REGION_PIXELS: usize = 50;

pub const WARM: &str = "Warm";
pub const COOL: &str = "Cool";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Classification {
    pub label: String,
    pub distance: f64,
    pub dominant: LabColor,
    pub runner_up: Option<(String, f64)>,
    /// Pipeline diagnostics such as `cluster_share` or `pixel_count`.
    pub metadata: BTreeMap<String, f64>,
}

impl Classification {
    pub fn cluster_share(&self) -> Option<f64> {
        self.metadata.get("cluster_share").copied()
    }
}

/// Index of the smallest score and the runner-up. Earlier entries win ties.
fn argmin(scores: &[f64]) -> (usize, Option<usize>) {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s < scores[best] {
            best = i;
        }
    }
    let mut second: Option<usize> = None;
    for (i, &s) in scores.iter().enumerate() {
        if i != best && second.is_none_or(|j| s < scores[j]) {
            second = Some(i);
        }
    }
    (best, second)
}

fn pick(classes: &[ToneClass], scores: &[f64], dominant: LabColor) -> Classification {
    let (best, second) = argmin(scores);
    Classification {
        label: classes[best].name.clone(),
        distance: scores[best],
        dominant,
        runner_up: second.map(|j| (classes[j].name.clone(), scores[j])),
        metadata: BTreeMap::new(),
    }
}

/// Nearest class under the scale's metric.
pub fn classify_nearest(dominant: LabColor, scale: &ToneScale) -> Classification {
    let scores: Vec<f64> = scale
        .classes
        .iter()
        .map(|c| {
            scale
                .metric
                .lab_distance(dominant, c.reference, &scale.params)
        })
        .collect();
    pick(&scale.classes, &scores, dominant)
}

/// Picks the nearest main class, then the nearest subclass inside it.
pub fn classify_two_stage(dominant: LabColor, scale: &ToneScale) -> Result<Classification> {
    if !scale.has_subclasses() {
        return Err(Error::MissingSubclasses(scale.name.clone()));
    }
    let main = classify_nearest(dominant, scale);
    let main_idx = scale
        .classes
        .iter()
        .position(|c| c.name == main.label)
        .expect("label comes from the scale");
    let subs = &scale.classes[main_idx].subclasses;
    let scores: Vec<f64> = subs
        .iter()
        .map(|c| {
            scale
                .metric
                .lab_distance(dominant, c.reference, &scale.params)
        })
        .collect();
    let mut out = pick(subs, &scores, dominant);
    out.metadata
        .insert("main_class_index".into(), main_idx as f64);
    out.metadata
        .insert("main_class_distance".into(), main.distance);
    Ok(out)
}

/// Feature space used to cluster skin pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClusterSpace {
    /// `(h°, s·255, v·255)` with plain Euclidean distance; hue does not wrap.
    #[default]
    Hsv,
    Rgb,
}

impl std::str::FromStr for ClusterSpace {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hsv" => Ok(Self::Hsv),
            "rgb" => Ok(Self::Rgb),
            _ => Err(Error::InvalidParameter(format!(
                "unknown cluster space {s:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkinOptions {
    pub cluster: ClusterConfig,
    pub blur: bool,
    pub kernel_divisor: u32,
    pub gamma: f64,
    pub space: ClusterSpace,
}

impl Default for SkinOptions {
    fn default() -> Self {
        Self {
            cluster: ClusterConfig::default(),
            blur: true,
            kernel_divisor: 20,
            gamma: 1.0,
            space: ClusterSpace::Hsv,
        }
    }
}

/// Dominant skin color in every representation the pipelines use.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DominantTone {
    pub hsv: HsvColor,
    pub rgb: RgbColor,
    pub lab: LabColor,
    pub share: f64,
    pub pixel_count: usize,
    pub clusters: usize,
    pub blur_kernel: Option<usize>,
}

fn working_size(img: &ImageBuffer, mask: &PixelMask) -> Result<(ImageBuffer, PixelMask)> {
    if mask.dims() != img.dims() {
        return Err(Error::DimensionMismatch {
            expected: img.dims(),
            found: mask.dims(),
        });
    }
    Ok((
        img.downscale_to_fit(MAX_WORKING_SIDE),
        mask.downscale_to_fit(MAX_WORKING_SIDE),
    ))
}

fn require_pixels(mask: &PixelMask) -> Result<usize> {
    let n = mask.count();
    if n < MIN_REGION_PIXELS {
        return Err(Error::TooFewPixels {
            found: n,
            required: MIN_REGION_PIXELS,
        });
    }
    Ok(n)
}

/// Gamma and blur over the whole image, then X-means over the masked
/// pixels. The largest cluster's center is the dominant tone, snapped to
/// whole hue degrees and 1/255 saturation/value steps (or whole RGB levels).
pub fn extract_dominant_skin_tone(
    img: &ImageBuffer,
    skin_mask: &PixelMask,
    opts: &SkinOptions,
) -> Result<DominantTone> {
    let (img, mask) = working_size(img, skin_mask)?;
    let pixel_count = require_pixels(&mask)?;

    let mut work = if opts.gamma != 1.0 {
        gamma_correct(&img, opts.gamma)?
    } else {
        img
    };
    let mut blur_kernel = None;
    if opts.blur {
        work = gaussian_blur(&work, opts.kernel_divisor)?;
        blur_kernel = Some(blur_kernel_size(
            work.width(),
            work.height(),
            opts.kernel_divisor,
        ));
    }
    let pixels = masked_pixels(&work, &mask)?;

    let points: Vec<[f64; 3]> = match opts.space {
        ClusterSpace::Hsv => pixels
            .iter()
            .map(|&p| {
                let c = rgb_to_hsv(p);
                [c.h, c.s * 255.0, c.v * 255.0]
            })
            .collect(),
        ClusterSpace::Rgb => pixels.iter().map(|p| p.to_f64()).collect(),
    };
    let model = xmeans(&points, &opts.cluster)?;
    let (center, share) = dominant_cluster(&model);

    let (hsv, rgb) = match opts.space {
        ClusterSpace::Hsv => {
            let hsv = HsvColor {
                h: center[0].rem_euclid(360.0),
                s: (center[1] / 255.0).clamp(0.0, 1.0),
                v: (center[2] / 255.0).clamp(0.0, 1.0),
            }
            .quantized();
            (hsv, hsv_to_rgb(hsv))
        }
        ClusterSpace::Rgb => {
            let rgb = RgbColor::from_f64(center);
            (rgb_to_hsv(rgb), rgb)
        }
    };
    Ok(DominantTone {
        hsv,
        rgb,
        lab: rgb_to_lab(rgb),
        share,
        pixel_count,
        clusters: model.k(),
        blur_kernel,
    })
}

/// Full skin pipeline: dominant tone, then nearest (or two-stage) match.
/// A flat scale is paired on the fly when `two_stage` is requested.
pub fn classify_skin(
    img: &ImageBuffer,
    skin_mask: &PixelMask,
    scale: &ToneScale,
    opts: &SkinOptions,
    two_stage: bool,
) -> Result<(Classification, DominantTone)> {
    let tone = extract_dominant_skin_tone(img, skin_mask, opts)?;
    let mut out = if two_stage {
        if scale.has_subclasses() {
            classify_two_stage(tone.lab, scale)?
        } else {
            classify_two_stage(tone.lab, &scale.paired())?
        }
    } else if scale.has_subclasses() {
        // a two-stage scale used flat: match against the leaves
        let flat = ToneScale {
            classes: scale
                .classes
                .iter()
                .flat_map(|c| c.subclasses.clone())
                .collect(),
            ..scale.clone()
        };
        classify_nearest(tone.lab, &flat)
    } else {
        classify_nearest(tone.lab, scale)
    };
    out.metadata.insert("cluster_share".into(), tone.share);
    out.metadata
        .insert("pixel_count".into(), tone.pixel_count as f64);
    out.metadata.insert("clusters".into(), tone.clusters as f64);
    if let Some(k) = tone.blur_kernel {
        out.metadata.insert("blur_kernel".into(), k as f64);
    }
    Ok((out, tone))
}

/// Hair: k-means (k = 3) in LAB over the masked pixels. Each category is
/// scored by the mean of its distance to the dominant cluster center and its
/// distance to the average hair color.
pub fn classify_hair(
    img: &ImageBuffer,
    hair_mask: &PixelMask,
    scale: &ToneScale,
    seed: u64,
) -> Result<Classification> {
    let (img, mask) = working_size(img, hair_mask)?;
    let pixel_count = require_pixels(&mask)?;
    let pixels = masked_pixels(&img, &mask)?;
    let points: Vec<[f64; 3]> = pixels.iter().map(|&p| rgb_to_lab(p).to_array()).collect();

    let k = distinct_count(&points).min(3);
    let model = kmeans(&points, k, &ClusterConfig::with_seed(seed))?;
    let (center, share) = dominant_cluster(&model);
    let dominant = LabColor::from_array(center);
    let average = mean_lab(&pixels)?;

    let scores: Vec<f64> = scale
        .classes
        .iter()
        .map(|c| {
            let d = scale
                .metric
                .lab_distance(dominant, c.reference, &scale.params);
            let a = scale
                .metric
                .lab_distance(average, c.reference, &scale.params);
            (d + a) / 2.0
        })
        .collect();
    let mut out = pick(&scale.classes, &scores, dominant);
    out.metadata.insert("cluster_share".into(), share);
    out.metadata
        .insert("pixel_count".into(), pixel_count as f64);
    out.metadata.insert("average_l".into(), average.l);
    out.metadata.insert("average_a".into(), average.a);
    out.metadata.insert("average_b".into(), average.b);
    Ok(out)
}

/// Iris disk geometry relative to the eye landmarks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IrisGeometry {
    /// Iris radius as a fraction of the corner-to-corner eye width.
    pub radius_factor: f64,
    /// Excluded pupil radius as a fraction of the iris radius.
    pub pupil_factor: f64,
}

impl Default for IrisGeometry {
    fn default() -> Self {
        Self {
            radius_factor: 0.4,
            pupil_factor: 0.35,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Eye {
    /// Landmarks 37–42, corners 37 and 40.
    First,
    /// Landmarks 43–48, corners 43 and 46.
    Second,
}

impl Eye {
    fn first_landmark(self) -> usize {
        match self {
            Eye::First => 37,
            Eye::Second => 43,
        }
    }
}

/// Center and iris radius for one eye.
pub fn eye_circle(
    landmarks: &Landmarks,
    eye: Eye,
    geometry: &IrisGeometry,
) -> Result<((f64, f64), f64)> {
    let first = eye.first_landmark();
    let pts: Vec<(f64, f64)> = (first..first + 6).map(|i| landmarks.point(i)).collect();
    let cx = pts.iter().map(|p| p.0).sum::<f64>() / 6.0;
    let cy = pts.iter().map(|p| p.1).sum::<f64>() / 6.0;
    let (a, b) = (pts[0], pts[3]);
    let width = (b.0 - a.0).hypot(b.1 - a.1);
    if width < 1e-9 {
        return Err(Error::DegenerateLandmarks(format!(
            "eye starting at landmark {first} has zero width"
        )));
    }
    Ok(((cx, cy), geometry.radius_factor * width))
}

/// Iris disk minus the pupil disk for one eye.
pub fn iris_annulus(
    landmarks: &Landmarks,
    eye: Eye,
    geometry: &IrisGeometry,
    width: u32,
    height: u32,
) -> Result<PixelMask> {
    let (center, r) = eye_circle(landmarks, eye, geometry)?;
    let disk = circular_mask(center, r, width, height)?;
    let pupil_r = geometry.pupil_factor * r;
    if pupil_r <= 0.0 {
        return Ok(disk);
    }
    subtract_mask(&disk, &circular_mask(center, pupil_r, width, height)?)
}

fn mean_rgb(pixels: &[RgbColor]) -> [f64; 3] {
    let n = pixels.len() as f64;
    let s = pixels.iter().fold([0.0; 3], |mut acc, p| {
        acc[0] += p.r as f64;
        acc[1] += p.g as f64;
        acc[2] += p.b as f64;
        acc
    });
    s.map(|v| v / n)
}

pub fn classify_iris(
    img: &ImageBuffer,
    landmarks: &Landmarks,
    scale: &ToneScale,
) -> Result<Classification> {
    classify_iris_with(img, landmarks, scale, &IrisGeometry::default())
}

/// Averages the RGB of each eye's iris annulus, averages the two eyes, and
/// matches the result in LAB.
pub fn classify_iris_with(
    img: &ImageBuffer,
    landmarks: &Landmarks,
    scale: &ToneScale,
    geometry: &IrisGeometry,
) -> Result<Classification> {
    let work = img.downscale_to_fit(MAX_WORKING_SIDE);
    let landmarks = if work.dims() != img.dims() {
        landmarks.scaled(
            work.width() as f64 / img.width() as f64,
            work.height() as f64 / img.height() as f64,
        )
    } else {
        landmarks.clone()
    };

    let mut eyes = Vec::with_capacity(2);
    let mut counts = Vec::with_capacity(2);
    for eye in [Eye::First, Eye::Second] {
        let mask = iris_annulus(&landmarks, eye, geometry, work.width(), work.height())?;
        let pixels = masked_pixels(&work, &mask)?;
        if pixels.is_empty() {
            return Err(Error::EmptyIrisRegion);
        }
        counts.push(pixels.len());
        eyes.push(mean_rgb(&pixels));
    }
    let avg = [0, 1, 2].map(|i| (eyes[0][i] + eyes[1][i]) / 2.0);
    let mut out = classify_nearest(srgb_f64_to_lab(avg), scale);
    out.metadata
        .insert("pixel_count".into(), (counts[0] + counts[1]) as f64);
    out.metadata
        .insert("first_eye_pixels".into(), counts[0] as f64);
    out.metadata
        .insert("second_eye_pixels".into(), counts[1] as f64);
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UndertoneRefs {
    pub warm: LabColor,
    pub cool: LabColor,
}

impl Default for UndertoneRefs {
    fn default() -> Self {
        Self {
            warm: LabColor::new(70.0, 20.0, 40.0),
            cool: LabColor::new(60.0, -20.0, -30.0),
        }
    }
}

impl UndertoneRefs {
    pub fn new(warm: LabColor, cool: LabColor) -> Result<Self> {
        if warm == cool {
            return Err(Error::InvalidParameter(
                "warm and cool references are identical".into(),
            ));
        }
        Ok(Self { warm, cool })
    }

    /// Reads references from a scale with exactly the classes "Warm" and
    /// "Cool".
    pub fn from_scale(scale: &ToneScale) -> Result<Self> {
        let find = |name: &str| {
            scale
                .classes
                .iter()
                .find(|c| c.name == name)
                .map(|c| c.reference)
        };
        match (scale.classes.len(), find(WARM), find(COOL)) {
            (2, Some(w), Some(c)) => Self::new(w, c),
            _ => Err(Error::config(
                &scale.name,
                "undertone references need exactly two classes named \"Warm\" and \"Cool\"",
            )),
        }
    }
}

/// Thresholds file layout: `{"skin": {...}, "vein": {...}}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UndertoneThresholds {
    pub skin: LabThresholds,
    pub vein: LabThresholds,
}

impl Default for UndertoneThresholds {
    fn default() -> Self {
        Self {
            skin: LabThresholds::SKIN,
            vein: LabThresholds::VEIN,
        }
    }
}

/// Vein pixels: inside the vein box, outside the skin box, then closed.
/// Returns the mean LAB and the pixel count.
pub fn vein_mean(
    img: &ImageBuffer,
    thresholds: &UndertoneThresholds,
    close_radius: u32,
) -> Result<(LabColor, usize)> {
    let work = img.downscale_to_fit(MAX_WORKING_SIDE);
    let skin = lab_threshold_mask(&work, &thresholds.skin)?;
    let vein = lab_threshold_mask(&work, &thresholds.vein)?;
    let isolated = subtract_mask(&vein, &skin)?;
    let closed = morphological_close(&isolated, close_radius)?;
    let pixels = masked_pixels(&work, &closed)?;
    if pixels.is_empty() {
        return Err(Error::NoVeinsDetected);
    }
    Ok((mean_lab(&pixels)?, pixels.len()))
}

/// ΔE₀₀ against both references; the nearer wins and ties go to Warm.
pub fn classify_vein_color(vein: LabColor, refs: &UndertoneRefs) -> Classification {
    let params = DeltaEParams::default();
    let warm = ciede2000(vein, refs.warm, &params);
    let cool = ciede2000(vein, refs.cool, &params);
    let (label, distance, other, other_d) = if warm <= cool {
        (WARM, warm, COOL, cool)
    } else {
        (COOL, cool, WARM, warm)
    };
    let mut metadata = BTreeMap::new();
    metadata.insert("warm_delta".into(), warm);
    metadata.insert("cool_delta".into(), cool);
    Classification {
        label: label.into(),
        distance,
        dominant: vein,
        runner_up: Some((other.into(), other_d)),
        metadata,
    }
}

pub fn classify_undertone(
    img: &ImageBuffer,
    thresholds: &UndertoneThresholds,
    refs: &UndertoneRefs,
    close_radius: u32,
) -> Result<Classification> {
    let (mean, n) = vein_mean(img, thresholds, close_radius)?;
    let mut out = classify_vein_color(mean, refs);
    out.metadata.insert("pixel_count".into(), n as f64);
    Ok(out)
}

/// Alternate strategy: cosine similarity of the raw LAB vectors. The
/// reported distance is `1 − similarity`; ties go to Warm.
pub fn classify_undertone_cosine(
    vein_mean: LabColor,
    refs: &UndertoneRefs,
) -> Result<Classification> {
    let warm = lab_cosine_similarity(vein_mean, refs.warm)?;
    let cool = lab_cosine_similarity(vein_mean, refs.cool)?;
    let (label, sim, other, other_sim) = if warm >= cool {
        (WARM, warm, COOL, cool)
    } else {
        (COOL, cool, WARM, warm)
    };
    let mut metadata = BTreeMap::new();
    metadata.insert("warm_similarity".into(), warm);
    metadata.insert("cool_similarity".into(), cool);
    Ok(Classification {
        label: label.into(),
        distance: 1.0 - sim,
        dominant: vein_mean,
        runner_up: Some((other.into(), 1.0 - other_sim)),
        metadata,
    })
}
