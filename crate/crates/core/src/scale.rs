//! Reference scales: ordered, named LAB anchors loaded from JSON.
//!
//! ```json
//! {"name": "skin-8", "metric": "ciede2000",
//!  "classes": [{"name": "1", "lab": [88.56, 5.35, 13.49]}, ...]}
//! ```
//!
//! A class may carry `subclasses` for two-stage matching; its own `lab` is
//! then optional and defaults to the mean of the subclass anchors.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::color::LabColor;
use crate::delta_e::{DeltaEParams, DistanceMetric};
use crate::error::{Error, Result};

/// Environment variable naming a directory that replaces the bundled scales.
pub const SCALE_DIR_ENV: &str = "CHROMATONE_SCALE_DIR";

#[derive(Debug, Clone, PartialEq)]
pub struct ToneClass {
    pub name: String,
    pub reference: LabColor,
    /// Empty for single-stage classes.
    pub subclasses: Vec<ToneClass>,
}

impl ToneClass {
    pub fn new(name: impl Into<String>, reference: LabColor) -> Self {
        Self {
            name: name.into(),
            reference,
            subclasses: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToneScale {
    pub name: String,
    pub classes: Vec<ToneClass>,
    pub metric: DistanceMetric,
    pub params: DeltaEParams,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScaleFile {
    name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    description: Option<String>,
    #[serde(default)]
    metric: Option<String>,
    classes: Vec<ClassFile>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ClassFile {
    name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lab: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    subclasses: Option<Vec<ClassFile>>,
}

/// The scales that ship with the crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BundledScale {
    Skin,
    Hair,
    Iris,
    Undertone,
}

impl BundledScale {
    pub const ALL: [BundledScale; 4] = [
        BundledScale::Skin,
        BundledScale::Hair,
        BundledScale::Iris,
        BundledScale::Undertone,
    ];

    pub fn file_name(self) -> &'static str {
        match self {
            BundledScale::Skin => "skin.json",
            BundledScale::Hair => "hair.json",
            BundledScale::Iris => "iris.json",
            BundledScale::Undertone => "undertone.json",
        }
    }

    fn embedded(self) -> &'static str {
        match self {
            BundledScale::Skin => include_str!("../scales/skin.json"),
            BundledScale::Hair => include_str!("../scales/hair.json"),
            BundledScale::Iris => include_str!("../scales/iris.json"),
            BundledScale::Undertone => include_str!("../scales/undertone.json"),
        }
    }

    /// Loads the scale, honoring [`SCALE_DIR_ENV`] when it is set.
    pub fn load(self) -> Result<ToneScale> {
        match std::env::var_os(SCALE_DIR_ENV) {
            Some(dir) if !dir.is_empty() => {
                load_tone_scale(&PathBuf::from(dir).join(self.file_name()))
            }
            _ => self.load_embedded(),
        }
    }

    /// The copy compiled into the binary, ignoring the environment.
    pub fn load_embedded(self) -> Result<ToneScale> {
        parse_tone_scale(self.embedded(), self.file_name())
    }
}

pub fn load_tone_scale(path: &Path) -> Result<ToneScale> {
    if !path.is_file() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_tone_scale(&text, &path.display().to_string())
}

/// Parses and validates a scale document. `origin` names the source in
/// error messages.
pub fn parse_tone_scale(text: &str, origin: &str) -> Result<ToneScale> {
    let file: ScaleFile = serde_json::from_str(text).map_err(|e| Error::config(origin, e))?;
    let metric = match &file.metric {
        Some(m) => m
            .parse::<DistanceMetric>()
            .map_err(|e| Error::config(origin, format!("field `metric`: {e}")))?,
        None => DistanceMetric::default(),
    };
    let classes = file
        .classes
        .iter()
        .enumerate()
        .map(|(i, c)| convert_class(c, &format!("classes[{i}]"), origin))
        .collect::<Result<Vec<_>>>()?;
    let scale = ToneScale {
        name: file.name,
        classes,
        metric,
        params: DeltaEParams::default(),
    };
    scale.validate().map_err(|e| match e {
        Error::InvalidParameter(m) => Error::config(origin, m),
        other => other,
    })?;
    Ok(scale)
}

fn convert_class(c: &ClassFile, field: &str, origin: &str) -> Result<ToneClass> {
    let subclasses = match &c.subclasses {
        Some(subs) => subs
            .iter()
            .enumerate()
            .map(|(i, s)| convert_class(s, &format!("{field}.subclasses[{i}]"), origin))
            .collect::<Result<Vec<_>>>()?,
        None => Vec::new(),
    };
    if c.subclasses.is_some() && subclasses.is_empty() {
        return Err(Error::config(
            origin,
            format!("{field}.subclasses: must not be empty"),
        ));
    }
    let reference = match (c.lab, subclasses.is_empty()) {
        (Some([l, a, b]), _) => LabColor::checked(l, a, b)
            .map_err(|e| Error::config(origin, format!("{field}.lab: {e}")))?,
        (None, false) => mean_reference(&subclasses),
        (None, true) => {
            return Err(Error::config(origin, format!("{field}: missing `lab`")));
        }
    };
    Ok(ToneClass {
        name: c.name.clone(),
        reference,
        subclasses,
    })
}

fn mean_reference(classes: &[ToneClass]) -> LabColor {
    let n = classes.len() as f64;
    let s = classes.iter().fold([0.0; 3], |mut acc, c| {
        acc[0] += c.reference.l;
        acc[1] += c.reference.a;
        acc[2] += c.reference.b;
        acc
    });
    LabColor::new(s[0] / n, s[1] / n, s[2] / n)
}

impl ToneScale {
    pub fn validate(&self) -> Result<()> {
        if self.classes.len() < 2 {
            return Err(Error::InvalidParameter(format!(
                "scale {:?} needs at least 2 classes, has {}",
                self.name,
                self.classes.len()
            )));
        }
        let mut top = HashSet::new();
        let mut sub = HashSet::new();
        for c in &self.classes {
            if !top.insert(c.name.as_str()) {
                return Err(Error::InvalidParameter(format!(
                    "duplicate class name {:?}",
                    c.name
                )));
            }
            check_lab(&c.name, c.reference)?;
            for s in &c.subclasses {
                if !sub.insert(s.name.as_str()) {
                    return Err(Error::InvalidParameter(format!(
                        "duplicate subclass name {:?}",
                        s.name
                    )));
                }
                check_lab(&s.name, s.reference)?;
            }
        }
        Ok(())
    }

    pub fn names(&self) -> Vec<&str> {
        self.classes.iter().map(|c| c.name.as_str()).collect()
    }

    pub fn has_subclasses(&self) -> bool {
        !self.classes.is_empty() && self.classes.iter().all(|c| !c.subclasses.is_empty())
    }

    /// Labels a classifier over this scale can emit: subclass names for a
    /// two-stage scale, class names otherwise.
    pub fn leaf_labels(&self) -> Vec<String> {
        if self.has_subclasses() {
            self.classes
                .iter()
                .flat_map(|c| c.subclasses.iter().map(|s| s.name.clone()))
                .collect()
        } else {
            self.classes.iter().map(|c| c.name.clone()).collect()
        }
    }

    /// Two-stage form of a flat scale: consecutive classes are grouped in
    /// pairs, each main class anchored at the mean of its pair. An odd last
    /// class forms a group of one.
    pub fn paired(&self) -> ToneScale {
        let classes = self
            .classes
            .chunks(2)
            .map(|pair| {
                let name = pair
                    .iter()
                    .map(|c| c.name.as_str())
                    .collect::<Vec<_>>()
                    .join("+");
                ToneClass {
                    name,
                    reference: mean_reference(pair),
                    subclasses: pair.to_vec(),
                }
            })
            .collect();
        ToneScale {
            name: format!("{}-paired", self.name),
            classes,
            metric: self.metric,
            params: self.params,
        }
    }

    pub fn with_metric(mut self, metric: DistanceMetric) -> Self {
        self.metric = metric;
        self
    }

    /// Serializes back to the JSON file format.
    pub fn to_json(&self) -> String {
        fn class(c: &ToneClass) -> ClassFile {
            ClassFile {
                name: c.name.clone(),
                lab: Some(c.reference.to_array()),
                subclasses: (!c.subclasses.is_empty())
                    .then(|| c.subclasses.iter().map(class).collect()),
            }
        }
        let file = ScaleFile {
            name: self.name.clone(),
            description: None,
            metric: Some(self.metric.to_string()),
            classes: self.classes.iter().map(class).collect(),
        };
        serde_json::to_string_pretty(&file).expect("scale serializes")
    }
}

fn check_lab(name: &str, c: LabColor) -> Result<()> {
    LabColor::checked(c.l, c.a, c.b)
        .map(|_| ())
        .map_err(|e| Error::InvalidParameter(format!("class {name:?}: {e}")))
}
