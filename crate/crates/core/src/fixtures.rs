//! Synthetic labeled corpora with known ground truth.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::classify::UndertoneThresholds;
use crate::cluster::derive_seed;
use crate::color::{lab_to_rgb, rgb_to_lab, RgbColor};
use crate::error::{Error, Result};
use crate::imaging::{ImageBuffer, LabThresholds, Landmarks, PixelMask};
use crate::scale::{BundledScale, ToneScale};

/// Wrist color painted around the veins.
pub const WRIST_SKIN: RgbColor = RgbColor::new(224, 172, 140);
/// Face color around the eyes in iris fixtures.
pub const FACE_SKIN: RgbColor = RgbColor::new(214, 170, 142);
const BACKGROUND: RgbColor = RgbColor::new(40, 90, 60);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FixtureKind {
    Skin,
    Hair,
    Iris,
    Vein,
}

impl FixtureKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FixtureKind::Skin => "skin",
            FixtureKind::Hair => "hair",
            FixtureKind::Iris => "iris",
            FixtureKind::Vein => "vein",
        }
    }

    fn scale(self) -> BundledScale {
        match self {
            FixtureKind::Skin => BundledScale::Skin,
            FixtureKind::Hair => BundledScale::Hair,
            FixtureKind::Iris => BundledScale::Iris,
            FixtureKind::Vein => BundledScale::Undertone,
        }
    }
}

impl fmt::Display for FixtureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FixtureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            FixtureKind::Skin,
            FixtureKind::Hair,
            FixtureKind::Iris,
            FixtureKind::Vein,
        ]
        .into_iter()
        .find(|k| k.as_str() == s)
        .ok_or_else(|| Error::InvalidParameter(format!("unknown fixture kind {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixtureSpec {
    pub kind: FixtureKind,
    pub count: usize,
    /// Standard deviation of the per-channel Gaussian noise, in 8-bit levels.
    pub noise: f64,
    pub seed: u64,
}

impl FixtureSpec {
    pub fn validate(&self) -> Result<()> {
        if self.count == 0 {
            return Err(Error::InvalidParameter(
                "fixture count must be positive".into(),
            ));
        }
        if !(self.noise.is_finite() && self.noise >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "noise must be a nonnegative number, got {}",
                self.noise
            )));
        }
        Ok(())
    }
}

/// What [`generate_fixtures`] wrote.
#[derive(Debug, Clone, PartialEq)]
pub struct FixtureSet {
    pub manifest: PathBuf,
    pub labels: Vec<String>,
    pub thresholds: Option<PathBuf>,
}

/// Adds independent Gaussian noise to every channel of every pixel.
pub fn add_noise(img: &ImageBuffer, sigma: f64, rng: &mut ChaCha8Rng) -> ImageBuffer {
    if sigma == 0.0 {
        return img.clone();
    }
    let normal = Normal::new(0.0, sigma).expect("sigma is finite and positive");
    let pixels = img
        .pixels()
        .iter()
        .map(|p| {
            let c = p.to_f64();
            RgbColor::from_f64([
                c[0] + normal.sample(rng),
                c[1] + normal.sample(rng),
                c[2] + normal.sample(rng),
            ])
        })
        .collect();
    ImageBuffer::new(img.width(), img.height(), pixels).expect("same dimensions")
}

/// Ellipse covering most of a `size`×`size` frame.
pub fn region_mask(size: u32) -> PixelMask {
    let c = (size as f64 - 1.0) / 2.0;
    let (rx, ry) = (size as f64 * 0.34, size as f64 * 0.42);
    PixelMask::from_fn(size, size, |x, y| {
        let dx = (x as f64 - c) / rx;
        let dy = (y as f64 - c) / ry;
        dx * dx + dy * dy <= 1.0
    })
}

/// Region painted `color` on a contrasting background, plus its mask.
pub fn region_image(color: RgbColor, size: u32) -> (ImageBuffer, PixelMask) {
    let mask = region_mask(size);
    let img = ImageBuffer::from_fn(
        size,
        size,
        |x, y| if mask.get(x, y) { color } else { BACKGROUND },
    );
    (img, mask)
}

const EYE_HALF_WIDTH: i32 = 18;

/// Face with both irises painted `iris` and black pupils, plus 68
/// landmarks whose eye points frame the irises.
pub fn iris_image(iris: RgbColor) -> (ImageBuffer, Landmarks) {
    let (w, h) = (160u32, 90u32);
    let eyes = [(48i32, 40i32), (112i32, 40i32)];
    let mut pts: Vec<(f64, f64)> = (0..68)
        .map(|i| {
            // outline points scattered away from the eyes
            let t = i as f64 / 68.0 * std::f64::consts::TAU;
            (80.0 + 70.0 * t.cos(), 45.0 + 40.0 * t.sin())
        })
        .map(|(x, y)| (x.round(), y.round()))
        .collect();
    for (e, &(cx, cy)) in eyes.iter().enumerate() {
        let base = 36 + 6 * e;
        let hw = EYE_HALF_WIDTH;
        let offsets = [(-hw, 0), (-6, -7), (6, -7), (hw, 0), (6, 7), (-6, 7)];
        for (j, (dx, dy)) in offsets.into_iter().enumerate() {
            pts[base + j] = ((cx + dx) as f64, (cy + dy) as f64);
        }
    }
    let r = 0.4 * 2.0 * EYE_HALF_WIDTH as f64;
    let img = ImageBuffer::from_fn(w, h, |x, y| {
        for &(cx, cy) in &eyes {
            let d = (x as f64 - cx as f64).hypot(y as f64 - cy as f64);
            if d <= 0.3 * r {
                return RgbColor::BLACK;
            }
            if d <= r + 1.5 {
                return iris;
            }
            if (x as f64 - cx as f64).abs() <= EYE_HALF_WIDTH as f64
                && (y as f64 - cy as f64).abs() <= 8.0
            {
                return RgbColor::WHITE;
            }
        }
        FACE_SKIN
    });
    (img, Landmarks::new(pts).expect("68 points"))
}

/// Wrist on a black background with four horizontal vein bands.
pub fn vein_image(vein: RgbColor, skin: RgbColor) -> ImageBuffer {
    let (w, h) = (128u32, 96u32);
    ImageBuffer::from_fn(w, h, |x, y| {
        if !(8..w - 8).contains(&x) || !(8..h - 8).contains(&y) {
            return RgbColor::BLACK;
        }
        let band = (y - 8) % 20;
        if (8..14).contains(&band) && (16..w - 16).contains(&x) {
            vein
        } else {
            skin
        }
    })
}

/// Thresholds matched to [`vein_image`]: a skin box around the wrist
/// color, widened with the noise level, and a vein box that takes every
/// remaining pixel brighter than the black background.
pub fn vein_thresholds(skin: RgbColor, noise: f64) -> UndertoneThresholds {
    let c = rgb_to_lab(skin);
    let half = 4.0 + noise;
    UndertoneThresholds {
        skin: LabThresholds {
            l_min: (c.l - half).max(0.0),
            l_max: (c.l + half).min(100.0),
            a_min: c.a - half,
            a_max: c.a + half,
            b_min: c.b - half,
            b_max: c.b + half,
        },
        vein: LabThresholds {
            l_min: 15.0,
            l_max: 100.0,
            a_min: -128.0,
            a_max: 128.0,
            b_min: -128.0,
            b_max: 128.0,
        },
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes `count` labeled images into `out`. Image `i` carries class
/// `i mod classes` of the bundled scale for the kind, so `count` equal to
/// the class count gives one image per class.
pub fn generate_fixtures(out: &Path, spec: &FixtureSpec) -> Result<FixtureSet> {
    spec.validate()?;
    let scale: ToneScale = spec.kind.scale().load()?;
    fs::create_dir_all(out).map_err(io_err(out))?;

    let header: &[&str] = match spec.kind {
        FixtureKind::Skin | FixtureKind::Hair => &["path", "label", "mask_path"],
        FixtureKind::Iris => &["path", "label", "landmarks_path"],
        FixtureKind::Vein => &["path", "label"],
    };
    let manifest = out.join("manifest.csv");
    let mut w = csv::Writer::from_path(&manifest)
        .map_err(|e| Error::config(manifest.display().to_string(), e))?;
    let csv_err = |e: csv::Error| Error::config("manifest.csv", e);
    w.write_record(header).map_err(csv_err)?;

    let mut labels = Vec::with_capacity(spec.count);
    for i in 0..spec.count {
        let class = &scale.classes[i % scale.classes.len()];
        let color = lab_to_rgb(class.reference).0;
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, i as u64, 0));
        let stem = format!("{}_{i:04}", spec.kind);
        let image_name = format!("{stem}.png");
        let mut record = vec![image_name.clone(), class.name.clone()];
        let img = match spec.kind {
            FixtureKind::Skin | FixtureKind::Hair => {
                let (img, mask) = region_image(color, 128);
                let mask_name = format!("{stem}_mask.png");
                mask.save_png(&out.join(&mask_name))?;
                record.push(mask_name);
                img
            }
            FixtureKind::Iris => {
                let (img, lm) = iris_image(color);
                let lm_name = format!("{stem}_landmarks.txt");
                let p = out.join(&lm_name);
                fs::write(&p, lm.to_text()).map_err(io_err(&p))?;
                record.push(lm_name);
                img
            }
            FixtureKind::Vein => vein_image(color, WRIST_SKIN),
        };
        add_noise(&img, spec.noise, &mut rng).save_png(&out.join(&image_name))?;
        w.write_record(&record).map_err(csv_err)?;
        labels.push(class.name.clone());
    }
    w.flush().map_err(io_err(&manifest))?;

    let thresholds = if spec.kind == FixtureKind::Vein {
        let p = out.join("thresholds.json");
        let json = serde_json::to_string_pretty(&vein_thresholds(WRIST_SKIN, spec.noise))
            .expect("thresholds serialize");
        fs::write(&p, json + "\n").map_err(io_err(&p))?;
        Some(p)
    } else {
        None
    };
    Ok(FixtureSet {
        manifest,
        labels,
        thresholds,
    })
}
