//! Color records and the conversions between 8-bit sRGB, HSV, CIE XYZ and
//! CIELAB.
//!
//! All math is done in `f64`. The white point is D65 with the 2° observer and
//! XYZ is scaled so that the reference white has `Y = 100`. The white point is
//! taken as the row sums of the sRGB → XYZ matrix, which makes every
//! achromatic sRGB triple land exactly on the neutral axis in LAB.

use std::sync::LazyLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::ImageBuffer;

/// 8-bit sRGB color.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct RgbColor {
    pub r: u8,
    pub g: u8,
    pub b: u8,
}

impl RgbColor {
    pub const BLACK: RgbColor = RgbColor::new(0, 0, 0);
    pub const WHITE: RgbColor = RgbColor::new(255, 255, 255);

    pub const fn new(r: u8, g: u8, b: u8) -> Self {
        Self { r, g, b }
    }

    pub fn channels(self) -> [u8; 3] {
        [self.r, self.g, self.b]
    }

    pub fn to_f64(self) -> [f64; 3] {
        [self.r as f64, self.g as f64, self.b as f64]
    }

    /// Rounds and clamps a floating point `[0, 255]` triple.
    pub fn from_f64(c: [f64; 3]) -> Self {
        let q = |v: f64| v.round().clamp(0.0, 255.0) as u8;
        Self::new(q(c[0]), q(c[1]), q(c[2]))
    }
}

/// Hexcone HSV. `h` in degrees `[0, 360)`, `s` and `v` in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct HsvColor {
    pub h: f64,
    pub s: f64,
    pub v: f64,
}

impl HsvColor {
    pub fn new(h: f64, s: f64, v: f64) -> Result<Self> {
        if !(0.0..360.0).contains(&h) || !(0.0..=1.0).contains(&s) || !(0.0..=1.0).contains(&v) {
            return Err(Error::InvalidParameter(format!(
                "HSV ({h}, {s}, {v}) out of range"
            )));
        }
        Ok(Self { h, s, v })
    }

    /// Snaps to whole degrees of hue and 1/255 steps of saturation and value.
    pub fn quantized(self) -> Self {
        let mut h = self.h.round();
        if h >= 360.0 {
            h -= 360.0;
        }
        let step = |x: f64| (x.clamp(0.0, 1.0) * 255.0).round() / 255.0;
        let s = step(self.s);
        Self {
            h: if s == 0.0 { 0.0 } else { h },
            s,
            v: step(self.v),
        }
    }
}

/// CIE XYZ tristimulus values, `Y = 100` for the D65 reference white.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct XyzColor {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

/// CIELAB color. `l` in `[0, 100]`; `a` and `b` are signed.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LabColor {
    pub l: f64,
    pub a: f64,
    pub b: f64,
}

impl LabColor {
    pub const fn new(l: f64, a: f64, b: f64) -> Self {
        Self { l, a, b }
    }

    /// Validating constructor for values coming from outside the crate.
    pub fn checked(l: f64, a: f64, b: f64) -> Result<Self> {
        if !(l.is_finite() && a.is_finite() && b.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "LAB ({l}, {a}, {b}) is not finite"
            )));
        }
        if !(0.0..=100.0).contains(&l) {
            return Err(Error::InvalidParameter(format!(
                "LAB lightness {l} outside [0, 100]"
            )));
        }
        Ok(Self { l, a, b })
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.l, self.a, self.b]
    }

    pub fn from_array(v: [f64; 3]) -> Self {
        Self::new(v[0], v[1], v[2])
    }

    /// Component-wise mean of two colors.
    pub fn midpoint(self, other: LabColor) -> LabColor {
        LabColor::new(
            (self.l + other.l) / 2.0,
            (self.a + other.a) / 2.0,
            (self.b + other.b) / 2.0,
        )
    }
}

const SRGB_TO_XYZ: [[f64; 3]; 3] = [
    [0.4124564, 0.3575761, 0.1804375],
    [0.2126729, 0.7151522, 0.0721750],
    [0.0193339, 0.1191920, 0.9503041],
];

static XYZ_TO_SRGB: LazyLock<[[f64; 3]; 3]> = LazyLock::new(|| invert3(&SRGB_TO_XYZ));

/// D65 white, scaled to `Y = 100`.
pub static WHITE_D65: LazyLock<XyzColor> = LazyLock::new(|| {
    let row = |i: usize| SRGB_TO_XYZ[i].iter().sum::<f64>() * 100.0;
    XyzColor {
        x: row(0),
        y: row(1),
        z: row(2),
    }
});

static DECODE_LUT: LazyLock<[f64; 256]> = LazyLock::new(|| {
    let mut lut = [0.0; 256];
    for (i, v) in lut.iter_mut().enumerate() {
        *v = srgb_decode(i as f64 / 255.0);
    }
    lut
});

const LAB_EPSILON: f64 = 216.0 / 24389.0;
const LAB_KAPPA: f64 = 24389.0 / 27.0;

fn invert3(m: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    let mut inv = [[0.0; 3]; 3];
    for (i, row) in inv.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            // cofactor of m[j][i]
            let (r0, r1) = match j {
                0 => (1, 2),
                1 => (0, 2),
                _ => (0, 1),
            };
            let (c0, c1) = match i {
                0 => (1, 2),
                1 => (0, 2),
                _ => (0, 1),
            };
            let minor = m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0];
            let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
            *v = sign * minor / det;
        }
    }
    inv
}

fn mat_mul(m: &[[f64; 3]; 3], v: [f64; 3]) -> [f64; 3] {
    [
        m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
        m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
        m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
    ]
}

/// sRGB electro-optical transfer: companded `[0, 1]` to linear `[0, 1]`.
pub fn srgb_decode(c: f64) -> f64 {
    if c <= 0.04045 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

/// Inverse of [`srgb_decode`].
pub fn srgb_encode(c: f64) -> f64 {
    if c <= 0.0031308 {
        c * 12.92
    } else {
        1.055 * c.powf(1.0 / 2.4) - 0.055
    }
}

pub fn rgb_to_hsv(c: RgbColor) -> HsvColor {
    let [r, g, b] = c.to_f64();
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let v = max / 255.0;
    if delta == 0.0 {
        return HsvColor { h: 0.0, s: 0.0, v };
    }
    let s = delta / max;
    let sector = if max == r {
        ((g - b) / delta).rem_euclid(6.0)
    } else if max == g {
        (b - r) / delta + 2.0
    } else {
        (r - g) / delta + 4.0
    };
    let mut h = 60.0 * sector;
    if h >= 360.0 {
        h -= 360.0;
    }
    HsvColor { h, s, v }
}

/// HSV to `[0, 255]` floating point RGB, without quantization.
pub fn hsv_to_rgb_f64(c: HsvColor) -> [f64; 3] {
    let v = c.v * 255.0;
    let chroma = v * c.s;
    let hp = c.h.rem_euclid(360.0) / 60.0;
    let x = chroma * (1.0 - ((hp % 2.0) - 1.0).abs());
    let m = v - chroma;
    let (r, g, b) = match hp as u32 {
        0 => (chroma, x, 0.0),
        1 => (x, chroma, 0.0),
        2 => (0.0, chroma, x),
        3 => (0.0, x, chroma),
        4 => (x, 0.0, chroma),
        _ => (chroma, 0.0, x),
    };
    [r + m, g + m, b + m]
}

pub fn hsv_to_rgb(c: HsvColor) -> RgbColor {
    RgbColor::from_f64(hsv_to_rgb_f64(c))
}

pub fn rgb_to_xyz(c: RgbColor) -> XyzColor {
    let lut = &*DECODE_LUT;
    linear_to_xyz([lut[c.r as usize], lut[c.g as usize], lut[c.b as usize]])
}

fn linear_to_xyz(lin: [f64; 3]) -> XyzColor {
    let [x, y, z] = mat_mul(&SRGB_TO_XYZ, lin);
    XyzColor {
        x: x * 100.0,
        y: y * 100.0,
        z: z * 100.0,
    }
}

fn lab_f(t: f64) -> f64 {
    if t > LAB_EPSILON {
        t.cbrt()
    } else {
        (LAB_KAPPA * t + 16.0) / 116.0
    }
}

fn lab_f_inv(f: f64) -> f64 {
    let t = f * f * f;
    if t > LAB_EPSILON {
        t
    } else {
        (116.0 * f - 16.0) / LAB_KAPPA
    }
}

pub fn xyz_to_lab(c: XyzColor) -> LabColor {
    let w = &*WHITE_D65;
    let fx = lab_f(c.x / w.x);
    let fy = lab_f(c.y / w.y);
    let fz = lab_f(c.z / w.z);
    LabColor {
        l: 116.0 * fy - 16.0,
        a: 500.0 * (fx - fy),
        b: 200.0 * (fy - fz),
    }
}

pub fn lab_to_xyz(c: LabColor) -> XyzColor {
    let w = &*WHITE_D65;
    let fy = (c.l + 16.0) / 116.0;
    let fx = fy + c.a / 500.0;
    let fz = fy - c.b / 200.0;
    let y = if c.l > LAB_KAPPA * LAB_EPSILON {
        fy * fy * fy
    } else {
        c.l / LAB_KAPPA
    };
    XyzColor {
        x: lab_f_inv(fx) * w.x,
        y: y * w.y,
        z: lab_f_inv(fz) * w.z,
    }
}

pub fn rgb_to_lab(c: RgbColor) -> LabColor {
    xyz_to_lab(rgb_to_xyz(c))
}

/// LAB of an unquantized `[0, 255]` sRGB triple, e.g. an averaged color.
pub fn srgb_f64_to_lab(c: [f64; 3]) -> LabColor {
    let lin = c.map(|v| srgb_decode((v / 255.0).clamp(0.0, 1.0)));
    xyz_to_lab(linear_to_xyz(lin))
}

/// LAB to `[0, 255]` sRGB without clamping or rounding.
pub fn lab_to_srgb_f64(c: LabColor) -> [f64; 3] {
    let xyz = lab_to_xyz(c);
    let lin = mat_mul(&XYZ_TO_SRGB, [xyz.x / 100.0, xyz.y / 100.0, xyz.z / 100.0]);
    lin.map(|v| {
        let e = if v < 0.0 {
            -srgb_encode(-v)
        } else {
            srgb_encode(v)
        };
        e * 255.0
    })
}

/// Converts LAB to 8-bit sRGB, clamping out-of-gamut channels. The flag is
/// set when any channel had to be clamped.
pub fn lab_to_rgb(c: LabColor) -> (RgbColor, bool) {
    let raw = lab_to_srgb_f64(c);
    let clamped = raw
        .iter()
        .any(|&v| !(-0.5..255.5).contains(&v) || !v.is_finite());
    (RgbColor::from_f64(raw), clamped)
}

/// Applies `c ↦ 255·(c/255)^(1/gamma)` to every channel.
pub fn gamma_correct(img: &ImageBuffer, gamma: f64) -> Result<ImageBuffer> {
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "gamma must be positive, got {gamma}"
        )));
    }
    let inv = 1.0 / gamma;
    let mut lut = [0u8; 256];
    for (i, v) in lut.iter_mut().enumerate() {
        *v = (255.0 * (i as f64 / 255.0).powf(inv))
            .round()
            .clamp(0.0, 255.0) as u8;
    }
    Ok(img.map_pixels(|p| RgbColor::new(lut[p.r as usize], lut[p.g as usize], lut[p.b as usize])))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn hsv_examples() {
        let red = rgb_to_hsv(RgbColor::new(255, 0, 0));
        assert_eq!((red.h, red.s, red.v), (0.0, 1.0, 1.0));

        let grey = rgb_to_hsv(RgbColor::new(128, 128, 128));
        assert_eq!((grey.h, grey.s), (0.0, 0.0));
        assert_abs_diff_eq!(grey.v, 128.0 / 255.0, epsilon = 1e-12);

        let brown = rgb_to_hsv(RgbColor::new(128, 64, 32));
        assert_abs_diff_eq!(brown.h, 20.0, epsilon = 1e-12);
        assert_abs_diff_eq!(brown.s, 0.75, epsilon = 1e-12);
        assert_abs_diff_eq!(brown.v, 0.502, epsilon = 1e-3);
    }

    #[test]
    fn hsv_to_rgb_examples() {
        assert_eq!(
            hsv_to_rgb(HsvColor {
                h: 0.0,
                s: 1.0,
                v: 1.0
            }),
            RgbColor::new(255, 0, 0)
        );
        for h in [0.0, 90.0, 200.0, 359.0] {
            assert_eq!(
                hsv_to_rgb(HsvColor { h, s: 0.0, v: 0.5 }),
                RgbColor::new(128, 128, 128)
            );
        }
        assert_eq!(
            hsv_to_rgb(HsvColor {
                h: 20.0,
                s: 0.75,
                v: 0.502
            }),
            RgbColor::new(128, 64, 32)
        );
    }

    #[test]
    fn lab_reference_points() {
        let w = rgb_to_lab(RgbColor::WHITE);
        assert_abs_diff_eq!(w.l, 100.0, epsilon = 1e-9);
        assert_abs_diff_eq!(w.a, 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(w.b, 0.0, epsilon = 1e-9);

        let k = rgb_to_lab(RgbColor::BLACK);
        assert_eq!((k.l, k.a, k.b), (0.0, 0.0, 0.0));

        // scikit-image rgb2lab: (53.2406, 80.0923, 67.2028)
        let r = rgb_to_lab(RgbColor::new(255, 0, 0));
        assert_abs_diff_eq!(r.l, 53.2406, epsilon = 0.01);
        assert_abs_diff_eq!(r.a, 80.0923, epsilon = 0.01);
        assert_abs_diff_eq!(r.b, 67.2028, epsilon = 0.01);
    }

    #[test]
    fn lab_to_rgb_examples() {
        assert_eq!(
            lab_to_rgb(LabColor::new(100.0, 0.0, 0.0)),
            (RgbColor::WHITE, false)
        );
        assert_eq!(
            lab_to_rgb(LabColor::new(0.0, 0.0, 0.0)),
            (RgbColor::BLACK, false)
        );
        let (red, _) = lab_to_rgb(LabColor::new(53.24, 80.09, 67.20));
        assert!(red.r >= 254 && red.g <= 1 && red.b <= 1, "{red:?}");
        let (_, clamped) = lab_to_rgb(LabColor::new(50.0, 120.0, -120.0));
        assert!(clamped);
    }

    #[test]
    fn achromatic_inputs_are_neutral() {
        for v in 0..=255u8 {
            let c = RgbColor::new(v, v, v);
            let lab = rgb_to_lab(c);
            assert!(lab.a.abs() < 0.01 && lab.b.abs() < 0.01, "{v}: {lab:?}");
            assert_eq!(rgb_to_hsv(c).s, 0.0);
        }
    }

    #[test]
    fn lightness_is_monotone_in_grey_level() {
        let mut prev = -1.0;
        for v in 0..=255u8 {
            let l = rgb_to_lab(RgbColor::new(v, v, v)).l;
            assert!(l >= prev);
            prev = l;
        }
    }

    #[test]
    fn gamma_examples() {
        let img = ImageBuffer::filled(4, 3, RgbColor::new(64, 64, 64));
        let out = gamma_correct(&img, 2.0).unwrap();
        assert!(out
            .pixels()
            .iter()
            .all(|&p| p == RgbColor::new(128, 128, 128)));

        let black = ImageBuffer::filled(2, 2, RgbColor::BLACK);
        assert_eq!(gamma_correct(&black, 0.4).unwrap(), black);

        assert!(gamma_correct(&img, 0.0).is_err());
        assert!(gamma_correct(&img, -1.0).is_err());
    }

    #[test]
    fn quantized_hsv_snaps_to_steps() {
        let q = HsvColor {
            h: 359.7,
            s: 0.5011,
            v: 0.2,
        }
        .quantized();
        assert_eq!(q.h, 0.0);
        assert_abs_diff_eq!(q.s * 255.0, (0.5011f64 * 255.0).round(), epsilon = 1e-9);
    }
}
