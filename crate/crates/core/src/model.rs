//! Domain types shared by every pipeline stage: the urban semantic taxonomy,
//! building categories and height classes, annotated point clouds, and
//! building proposals.
//!
//! All integer codes are frozen and appear verbatim in on-disk files; see
//! FORMAT.md in the repository root.

use alloc::vec::Vec;

use crate::{Error, Result, Vec3};

/// Sentinel instance id for points that belong to no building.
pub const NO_INSTANCE: u32 = u32::MAX;

/// Urban-level semantic classes. Codes 0..=6 are frozen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
#[repr(u8)]
pub enum UrbanClass {
    Ground = 0,
    Water = 1,
    Boat = 2,
    Vegetation = 3,
    Bridge = 4,
    Vehicle = 5,
    Building = 6,
}

impl UrbanClass {
    pub const ALL: [UrbanClass; 7] = [
        UrbanClass::Ground,
        UrbanClass::Water,
        UrbanClass::Boat,
        UrbanClass::Vegetation,
        UrbanClass::Bridge,
        UrbanClass::Vehicle,
        UrbanClass::Building,
    ];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<UrbanClass> {
        Self::ALL.get(code as usize).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            UrbanClass::Ground => "ground",
            UrbanClass::Water => "water",
            UrbanClass::Boat => "boat",
            UrbanClass::Vegetation => "vegetation",
            UrbanClass::Bridge => "bridge",
            UrbanClass::Vehicle => "vehicle",
            UrbanClass::Building => "building",
        }
    }
}

/// Functional building categories. Codes 0..=6 are frozen; `Unlabeled`
/// (code 255) marks buildings whose function could not be determined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
#[repr(u8)]
pub enum BuildingCategory {
    Commercial = 0,
    Residential = 1,
    Office = 2,
    Cultural = 3,
    Transportation = 4,
    Municipal = 5,
    Temporary = 6,
    Unlabeled = 255,
}

impl BuildingCategory {
    /// The seven labeled categories, excluding `Unlabeled`.
    pub const LABELED: [BuildingCategory; 7] = [
        BuildingCategory::Commercial,
        BuildingCategory::Residential,
        BuildingCategory::Office,
        BuildingCategory::Cultural,
        BuildingCategory::Transportation,
        BuildingCategory::Municipal,
        BuildingCategory::Temporary,
    ];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<BuildingCategory> {
        match code {
            255 => Some(BuildingCategory::Unlabeled),
            c => Self::LABELED.get(c as usize).copied(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BuildingCategory::Commercial => "commercial",
            BuildingCategory::Residential => "residential",
            BuildingCategory::Office => "office",
            BuildingCategory::Cultural => "cultural",
            BuildingCategory::Transportation => "transportation",
            BuildingCategory::Municipal => "municipal",
            BuildingCategory::Temporary => "temporary",
            BuildingCategory::Unlabeled => "unlabeled",
        }
    }
}

/// Building height classes. Codes 0..=2 are frozen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
#[repr(u8)]
pub enum HeightClass {
    LowRise = 0,
    HighRise = 1,
    SuperHighRise = 2,
}

impl HeightClass {
    pub const ALL: [HeightClass; 3] = [
        HeightClass::LowRise,
        HeightClass::HighRise,
        HeightClass::SuperHighRise,
    ];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<HeightClass> {
        Self::ALL.get(code as usize).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            HeightClass::LowRise => "low_rise",
            HeightClass::HighRise => "high_rise",
            HeightClass::SuperHighRise => "super_high_rise",
        }
    }
}

/// Classify a building height in meters: low-rise below 24 m, high-rise for
/// the closed interval 24 m to 100 m, super high-rise above 100 m.
pub fn classify_height(height_m: f64) -> Result<HeightClass> {
    if !height_m.is_finite() || height_m < 0.0 {
        return Err(Error::InvalidInput("height must be finite and non-negative"));
    }
    Ok(if height_m < 24.0 {
        HeightClass::LowRise
    } else if height_m <= 100.0 {
        HeightClass::HighRise
    } else {
        HeightClass::SuperHighRise
    })
}

/// A point cloud annotated with per-point semantics, building instance ids,
/// and building categories.
///
/// All channels share the same length. Instance ids are `NO_INSTANCE` exactly
/// on points whose semantic class is not `Building`; real ids need not be
/// contiguous.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotatedPointCloud {
    positions: Vec<Vec3>,
    colors: Vec<[u8; 3]>,
    semantic: Vec<UrbanClass>,
    instance: Vec<u32>,
    category: Vec<BuildingCategory>,
}

impl AnnotatedPointCloud {
    pub fn new(
        positions: Vec<Vec3>,
        colors: Vec<[u8; 3]>,
        semantic: Vec<UrbanClass>,
        instance: Vec<u32>,
        category: Vec<BuildingCategory>,
    ) -> Result<Self> {
        let n = positions.len();
        for (what, len) in [
            ("colors", colors.len()),
            ("semantic", semantic.len()),
            ("instance", instance.len()),
            ("category", category.len()),
        ] {
            if len != n {
                return Err(Error::DimensionMismatch {
                    what,
                    expected: n,
                    got: len,
                });
            }
        }
        for (i, (&sem, &inst)) in semantic.iter().zip(&instance).enumerate() {
            let is_building = sem == UrbanClass::Building;
            if is_building == (inst == NO_INSTANCE) {
                let _ = i;
                return Err(Error::InvalidInput(
                    "instance ids must mark exactly the building points",
                ));
            }
        }
        Ok(AnnotatedPointCloud {
            positions,
            colors,
            semantic,
            instance,
            category,
        })
    }

    pub fn empty() -> Self {
        AnnotatedPointCloud {
            positions: Vec::new(),
            colors: Vec::new(),
            semantic: Vec::new(),
            instance: Vec::new(),
            category: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[Vec3] {
        &self.positions
    }

    pub fn colors(&self) -> &[[u8; 3]] {
        &self.colors
    }

    pub fn semantic(&self) -> &[UrbanClass] {
        &self.semantic
    }

    pub fn instance(&self) -> &[u32] {
        &self.instance
    }

    pub fn category(&self) -> &[BuildingCategory] {
        &self.category
    }

    /// Distinct building instance ids, ascending.
    pub fn instance_ids(&self) -> Vec<u32> {
        let mut ids: Vec<u32> = self
            .instance
            .iter()
            .copied()
            .filter(|&id| id != NO_INSTANCE)
            .collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }
}

/// A candidate building instance: the foreground points assigned to it, the
/// offset-shifted position of its representative candidate, a score in
/// [0, 1], and the member-majority building category.
#[derive(Debug, Clone, PartialEq)]
pub struct Proposal {
    /// Block-local point indices, sorted ascending.
    pub members: Vec<u32>,
    /// Offset-shifted position of the representative candidate.
    pub anchor: Vec3,
    pub score: f64,
    pub category: BuildingCategory,
}
