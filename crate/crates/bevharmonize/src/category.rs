//! Harmonized object taxonomy and the per-dataset label mapping.
//!
//! Heterogeneous datasets label the same physical objects differently
//! ("car", "truck", "van" vs a single vehicle class). Everything in this
//! crate works on a fixed three-way taxonomy; raw labels are folded into
//! it at load time through a [`CategoryMap`], with an explicit `ignore`
//! target for labels that should be dropped.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Harmonized object category.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Category {
    #[serde(rename = "vehicle")]
    Vehicle,
    #[serde(rename = "two-wheeler")]
    TwoWheeler,
    #[serde(rename = "pedestrian")]
    Pedestrian,
}

impl Category {
    /// All categories in fixed evaluation order.
    pub const ALL: [Category; 3] = [
        Category::Vehicle,
        Category::TwoWheeler,
        Category::Pedestrian,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Category::Vehicle => "vehicle",
            Category::TwoWheeler => "two-wheeler",
            Category::Pedestrian => "pedestrian",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Category {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "vehicle" => Ok(Category::Vehicle),
            "two-wheeler" => Ok(Category::TwoWheeler),
            "pedestrian" => Ok(Category::Pedestrian),
            other => Err(format!("unknown category '{other}'")),
        }
    }
}

/// Target of a raw-label mapping: a harmonized category or "drop this box".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MappedCategory {
    #[serde(rename = "vehicle")]
    Vehicle,
    #[serde(rename = "two-wheeler")]
    TwoWheeler,
    #[serde(rename = "pedestrian")]
    Pedestrian,
    #[serde(rename = "ignore")]
    Ignore,
}

impl MappedCategory {
    pub fn to_category(self) -> Option<Category> {
        match self {
            MappedCategory::Vehicle => Some(Category::Vehicle),
            MappedCategory::TwoWheeler => Some(Category::TwoWheeler),
            MappedCategory::Pedestrian => Some(Category::Pedestrian),
            MappedCategory::Ignore => None,
        }
    }
}

/// Wildcard key matching any dataset id in a [`CategoryMap`] file.
pub const ANY_DATASET: &str = "*";

/// Mapping from `(dataset_id, raw label)` to a harmonized category.
///
/// The on-disk form is a single JSON object keyed by dataset id, then by
/// raw label; the dataset key `"*"` matches any dataset and is consulted
/// when no exact entry exists:
///
/// ```json
/// {
///   "nuscenes": {"car": "vehicle", "bicycle": "two-wheeler"},
///   "*": {"vehicle": "vehicle"}
/// }
/// ```
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CategoryMap {
    entries: BTreeMap<String, BTreeMap<String, MappedCategory>>,
}

impl CategoryMap {
    pub fn new() -> Self {
        Self::default()
    }

    /// Identity map accepting already-harmonized labels from any dataset.
    ///
    /// This is what manifest consumers use after `merge` has run: the
    /// harmonized names map to themselves, so re-applying the map is a
    /// no-op.
    pub fn identity() -> Self {
        let mut map = Self::new();
        for cat in Category::ALL {
            map.insert(ANY_DATASET, cat.as_str(), cat.into());
        }
        map
    }

    pub fn insert(&mut self, dataset_id: &str, raw: &str, target: MappedCategory) {
        self.entries
            .entry(dataset_id.to_string())
            .or_default()
            .insert(raw.to_string(), target);
    }

    /// Exact `(dataset_id, raw)` entry, falling back to the `"*"` dataset.
    pub fn lookup(&self, dataset_id: &str, raw: &str) -> Option<MappedCategory> {
        self.entries
            .get(dataset_id)
            .and_then(|m| m.get(raw))
            .or_else(|| self.entries.get(ANY_DATASET).and_then(|m| m.get(raw)))
            .copied()
    }

    pub fn from_json_str(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }

    pub fn from_path(path: &Path) -> Result<Self, std::io::Error> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
            .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }
}

impl From<Category> for MappedCategory {
    fn from(c: Category) -> Self {
        match c {
            Category::Vehicle => MappedCategory::Vehicle,
            Category::TwoWheeler => MappedCategory::TwoWheeler,
            Category::Pedestrian => MappedCategory::Pedestrian,
        }
    }
}
