//! Color difference metrics.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::color::{lab_to_srgb_f64, rgb_to_lab, LabColor, RgbColor};
use crate::error::{Error, Result};

/// Parametric weighting factors `k_L`, `k_C`, `k_H`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaEParams {
    pub k_l: f64,
    pub k_c: f64,
    pub k_h: f64,
}

impl Default for DeltaEParams {
    fn default() -> Self {
        Self {
            k_l: 1.0,
            k_c: 1.0,
            k_h: 1.0,
        }
    }
}

impl DeltaEParams {
    pub fn new(k_l: f64, k_c: f64, k_h: f64) -> Result<Self> {
        if [k_l, k_c, k_h].iter().all(|k| k.is_finite() && *k > 0.0) {
            Ok(Self { k_l, k_c, k_h })
        } else {
            Err(Error::InvalidParameter(format!(
                "weighting factors must be positive, got ({k_l}, {k_c}, {k_h})"
            )))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistanceMetric {
    EuclideanRgb,
    EuclideanLab,
    Cie76,
    Cie94,
    #[default]
    Ciede2000,
}

impl DistanceMetric {
    pub const ALL: [DistanceMetric; 5] = [
        DistanceMetric::EuclideanRgb,
        DistanceMetric::EuclideanLab,
        DistanceMetric::Cie76,
        DistanceMetric::Cie94,
        DistanceMetric::Ciede2000,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DistanceMetric::EuclideanRgb => "euclidean-rgb",
            DistanceMetric::EuclideanLab => "euclidean-lab",
            DistanceMetric::Cie76 => "cie76",
            DistanceMetric::Cie94 => "cie94",
            DistanceMetric::Ciede2000 => "ciede2000",
        }
    }

    /// Distance between two LAB colors under this metric. `euclidean-rgb`
    /// compares the unquantized sRGB renderings, clamped to the gamut.
    pub fn lab_distance(self, a: LabColor, b: LabColor, params: &DeltaEParams) -> f64 {
        match self {
            DistanceMetric::EuclideanRgb => {
                let clamp = |c: [f64; 3]| c.map(|v| v.clamp(0.0, 255.0));
                euclidean_distance(clamp(lab_to_srgb_f64(a)), clamp(lab_to_srgb_f64(b)))
            }
            DistanceMetric::EuclideanLab | DistanceMetric::Cie76 => cie76(a, b),
            DistanceMetric::Cie94 => cie94(a, b, params),
            DistanceMetric::Ciede2000 => ciede2000(a, b, params),
        }
    }
}

impl fmt::Display for DistanceMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DistanceMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DistanceMetric::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown metric {s:?}")))
    }
}

pub fn euclidean_distance(p: [f64; 3], q: [f64; 3]) -> f64 {
    p.iter()
        .zip(q.iter())
        .map(|(a, b)| (b - a) * (b - a))
        .sum::<f64>()
        .sqrt()
}

/// ΔE*ab: plain Euclidean distance in LAB.
pub fn cie76(a: LabColor, b: LabColor) -> f64 {
    euclidean_distance(a.to_array(), b.to_array())
}

/// CIE94 with the graphic-arts constants. The first argument is the
/// reference color: its chroma drives `S_C` and `S_H`, so the metric is not
/// symmetric.
pub fn cie94(reference: LabColor, sample: LabColor, params: &DeltaEParams) -> f64 {
    const K1: f64 = 0.045;
    const K2: f64 = 0.015;

    let c1 = reference.a.hypot(reference.b);
    let c2 = sample.a.hypot(sample.b);
    let dl = reference.l - sample.l;
    let dc = c1 - c2;
    let da = reference.a - sample.a;
    let db = reference.b - sample.b;
    let dh_sq = (da * da + db * db - dc * dc).max(0.0);

    let s_c = 1.0 + K1 * c1;
    let s_h = 1.0 + K2 * c1;

    let tl = dl / params.k_l;
    let tc = dc / (params.k_c * s_c);
    let th_sq = dh_sq / (params.k_h * s_h).powi(2);
    (tl * tl + tc * tc + th_sq).sqrt()
}

/// Hue angle in degrees `[0, 360)`, zero for the neutral axis.
fn hue_degrees(b: f64, a: f64) -> f64 {
    if a == 0.0 && b == 0.0 {
        return 0.0;
    }
    let h = b.atan2(a).to_degrees();
    if h < 0.0 {
        h + 360.0
    } else {
        h
    }
}

/// CIEDE2000 color difference.
pub fn ciede2000(x: LabColor, y: LabColor, params: &DeltaEParams) -> f64 {
    let pow7_25 = 25f64.powi(7);

    let c1 = x.a.hypot(x.b);
    let c2 = y.a.hypot(y.b);
    let c_bar = (c1 + c2) / 2.0;
    let c_bar7 = c_bar.powi(7);
    let g = 0.5 * (1.0 - (c_bar7 / (c_bar7 + pow7_25)).sqrt());

    let a1p = (1.0 + g) * x.a;
    let a2p = (1.0 + g) * y.a;
    let c1p = a1p.hypot(x.b);
    let c2p = a2p.hypot(y.b);
    let h1p = hue_degrees(x.b, a1p);
    let h2p = hue_degrees(y.b, a2p);

    let dlp = y.l - x.l;
    let dcp = c2p - c1p;

    let chroma_product = c1p * c2p;
    let dhp = if chroma_product == 0.0 {
        0.0
    } else {
        let d = h2p - h1p;
        if d > 180.0 {
            d - 360.0
        } else if d < -180.0 {
            d + 360.0
        } else {
            d
        }
    };
    let d_big_hp = 2.0 * chroma_product.sqrt() * (dhp.to_radians() / 2.0).sin();

    let l_bar_p = (x.l + y.l) / 2.0;
    let c_bar_p = (c1p + c2p) / 2.0;
    let h_bar_p = if chroma_product == 0.0 {
        h1p + h2p
    } else if (h1p - h2p).abs() <= 180.0 {
        (h1p + h2p) / 2.0
    } else if h1p + h2p < 360.0 {
        (h1p + h2p + 360.0) / 2.0
    } else {
        (h1p + h2p - 360.0) / 2.0
    };

    let t = 1.0 - 0.17 * (h_bar_p - 30.0).to_radians().cos()
        + 0.24 * (2.0 * h_bar_p).to_radians().cos()
        + 0.32 * (3.0 * h_bar_p + 6.0).to_radians().cos()
        - 0.20 * (4.0 * h_bar_p - 63.0).to_radians().cos();

    let d_theta = 30.0 * (-((h_bar_p - 275.0) / 25.0).powi(2)).exp();
    let c_bar_p7 = c_bar_p.powi(7);
    let r_c = 2.0 * (c_bar_p7 / (c_bar_p7 + pow7_25)).sqrt();
    let l50 = (l_bar_p - 50.0).powi(2);
    let s_l = 1.0 + 0.015 * l50 / (20.0 + l50).sqrt();
    let s_c = 1.0 + 0.045 * c_bar_p;
    let s_h = 1.0 + 0.015 * c_bar_p * t;
    let r_t = -(2.0 * d_theta).to_radians().sin() * r_c;

    let tl = dlp / (params.k_l * s_l);
    let tc = dcp / (params.k_c * s_c);
    let th = d_big_hp / (params.k_h * s_h);
    (tl * tl + tc * tc + th * th + r_t * tc * th)
        .max(0.0)
        .sqrt()
}

/// Distance between two 8-bit sRGB colors: raw channels for `euclidean-rgb`,
/// LAB for everything else.
pub fn color_distance(
    metric: DistanceMetric,
    a: RgbColor,
    b: RgbColor,
    params: &DeltaEParams,
) -> f64 {
    match metric {
        DistanceMetric::EuclideanRgb => euclidean_distance(a.to_f64(), b.to_f64()),
        m => m.lab_distance(rgb_to_lab(a), rgb_to_lab(b), params),
    }
}

/// Cosine similarity of two LAB triples taken as plain vectors.
pub fn lab_cosine_similarity(a: LabColor, b: LabColor) -> Result<f64> {
    let (u, v) = (a.to_array(), b.to_array());
    let dot: f64 = u.iter().zip(v.iter()).map(|(x, y)| x * y).sum();
    let nu = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok((dot / (nu * nv)).clamp(-1.0, 1.0))
}
