//! The attribute registry: which facial attributes can be transferred, and
//! whether each one travels through layer arithmetic or a region mask.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::latent::LayerMask;

/// The eight transferable attributes, in canonical composition order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Attribute {
    Eyes,
    Nose,
    Mouth,
    Hair,
    Age,
    FaceShape,
    HeadPose,
    Makeup,
}

impl Attribute {
    pub const ALL: [Attribute; 8] = [
        Attribute::Eyes,
        Attribute::Nose,
        Attribute::Mouth,
        Attribute::Hair,
        Attribute::Age,
        Attribute::FaceShape,
        Attribute::HeadPose,
        Attribute::Makeup,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Attribute::Eyes => "eyes",
            Attribute::Nose => "nose",
            Attribute::Mouth => "mouth",
            Attribute::Hair => "hair",
            Attribute::Age => "age",
            Attribute::FaceShape => "faceshape",
            Attribute::HeadPose => "headpose",
            Attribute::Makeup => "makeup",
        }
    }

    pub fn region(self) -> Option<Region> {
        match self {
            Attribute::Eyes => Some(Region::Eyes),
            Attribute::Nose => Some(Region::Nose),
            Attribute::Mouth => Some(Region::Mouth),
            Attribute::Hair => Some(Region::Hair),
            _ => None,
        }
    }

    pub fn is_local(self) -> bool {
        self.region().is_some()
    }

    /// Parses every name, collecting all unknown ones into the error.
    pub fn parse_all<S: AsRef<str>>(names: &[S]) -> Result<Vec<Attribute>, Vec<String>> {
        let mut good = Vec::with_capacity(names.len());
        let mut bad = Vec::new();
        for n in names {
            match n.as_ref().parse::<Attribute>() {
                Ok(a) => good.push(a),
                Err(_) => bad.push(n.as_ref().to_string()),
            }
        }
        if bad.is_empty() {
            Ok(good)
        } else {
            Err(bad)
        }
    }
}

impl fmt::Display for Attribute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Attribute {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Attribute::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| s.to_string())
    }
}

/// Face regions that local attributes are confined to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Region {
    Eyes,
    Nose,
    Mouth,
    Hair,
}

impl Region {
    pub const ALL: [Region; 4] = [Region::Eyes, Region::Nose, Region::Mouth, Region::Hair];

    pub fn as_str(self) -> &'static str {
        match self {
            Region::Eyes => "eyes",
            Region::Nose => "nose",
            Region::Mouth => "mouth",
            Region::Hair => "hair",
        }
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum TransferMode {
    /// Layer-restricted latent interpolation.
    Global { layers: LayerMask },
    /// Latent pre-blend on `layers`, then compositing through the region mask.
    Local { region: Region, layers: LayerMask },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeSpec {
    pub attribute: Attribute,
    #[serde(flatten)]
    pub mode: TransferMode,
}

impl AttributeSpec {
    pub fn layers(&self) -> &LayerMask {
        match &self.mode {
            TransferMode::Global { layers } | TransferMode::Local { layers, .. } => layers,
        }
    }

    pub fn region(&self) -> Option<Region> {
        match &self.mode {
            TransferMode::Local { region, .. } => Some(*region),
            TransferMode::Global { .. } => None,
        }
    }

    pub fn is_global(&self) -> bool {
        matches!(self.mode, TransferMode::Global { .. })
    }
}

/// Inclusive layer range written against an 18-layer generator.
pub type LayerSpan = (usize, usize);

/// Layer groups in the 18-layer convention. For generators with a different
/// depth each span is rescaled proportionally, so every group stays
/// non-empty.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct LayerGroups {
    pub convention_layers: usize,
    pub headpose: LayerSpan,
    pub faceshape: LayerSpan,
    pub age: LayerSpan,
    pub makeup: LayerSpan,
    pub local: LayerSpan,
}

impl Default for LayerGroups {
    fn default() -> Self {
        Self {
            convention_layers: 18,
            headpose: (0, 3),
            faceshape: (0, 5),
            age: (4, 9),
            makeup: (10, 17),
            local: (4, 13),
        }
    }
}

impl LayerGroups {
    /// Mask over `layers` for a span written in the convention depth.
    pub fn mask(&self, span: LayerSpan, layers: usize) -> LayerMask {
        let mut bits = vec![false; layers];
        let conv = self.convention_layers.max(1);
        for i in span.0..=span.1 {
            let mapped = i * layers / conv;
            if mapped < layers {
                bits[mapped] = true;
            }
        }
        LayerMask::from_bools(bits)
    }

    fn span_for(&self, attribute: Attribute) -> LayerSpan {
        match attribute {
            Attribute::HeadPose => self.headpose,
            Attribute::FaceShape => self.faceshape,
            Attribute::Age => self.age,
            Attribute::Makeup => self.makeup,
            _ => self.local,
        }
    }
}

/// All known attributes with their transfer configuration, canonical order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeRegistry {
    specs: Vec<AttributeSpec>,
}

impl AttributeRegistry {
    pub fn new(layers: usize, groups: &LayerGroups) -> Self {
        let specs = Attribute::ALL
            .into_iter()
            .map(|attribute| {
                let mask = groups.mask(groups.span_for(attribute), layers);
                let mode = match attribute.region() {
                    Some(region) => TransferMode::Local {
                        region,
                        layers: mask,
                    },
                    None => TransferMode::Global { layers: mask },
                };
                AttributeSpec { attribute, mode }
            })
            .collect();
        Self { specs }
    }

    pub fn with_default_groups(layers: usize) -> Self {
        Self::new(layers, &LayerGroups::default())
    }

    pub fn get(&self, attribute: Attribute) -> &AttributeSpec {
        self.specs
            .iter()
            .find(|s| s.attribute == attribute)
            .expect("registry holds every attribute")
    }

    pub fn iter(&self) -> impl Iterator<Item = &AttributeSpec> {
        self.specs.iter()
    }

    pub fn len(&self) -> usize {
        self.specs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.specs.is_empty()
    }
}
