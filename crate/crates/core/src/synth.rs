//! Procedural desk-scale test scenes: box buildings on a ground plane with
//! vegetation blobs and parked vehicles.
//!
//! Buildings are placed on a jittered grid, so the minimum gap between any
//! two buildings is `pitch - max footprint - 2 * jitter`. Keeping that gap
//! larger than the longest building diagonal guarantees furthest point
//! sampling lands a candidate in every building when the candidate budget
//! allows one each.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::model::{AnnotatedPointCloud, BuildingCategory, UrbanClass, NO_INSTANCE};
use crate::{Error, Result, Vec3};

/// Parameters of the procedural scene generator.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub buildings: usize,
    /// Footprint side range, meters.
    pub footprint: (f64, f64),
    /// Building height range, meters.
    pub height: (f64, f64),
    /// Grid pitch between building centers, meters.
    pub pitch: f64,
    /// Maximum displacement of a building from its grid cell center.
    pub jitter: f64,
    /// Sampled points per building (walls plus roof).
    pub points_per_building: (usize, usize),
    /// Ground points per square meter.
    pub ground_density: f64,
    pub vegetation_blobs: usize,
    pub points_per_blob: usize,
    pub vehicles: usize,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            buildings: 20,
            footprint: (8.0, 16.0),
            height: (4.0, 24.0),
            pitch: 64.0,
            jitter: 5.0,
            points_per_building: (3300, 6000),
            ground_density: 1.0,
            vegetation_blobs: 8,
            points_per_blob: 1200,
            vehicles: 10,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.footprint.0 <= 0.0 || self.footprint.1 < self.footprint.0 {
            return Err(Error::InvalidInput("footprint range must be positive and ordered"));
        }
        if self.height.0 <= 0.0 || self.height.1 < self.height.0 {
            return Err(Error::InvalidInput("height range must be positive and ordered"));
        }
        if self.pitch <= self.footprint.1 + 2.0 * self.jitter {
            return Err(Error::InvalidInput(
                "pitch must exceed the footprint plus twice the jitter",
            ));
        }
        if self.points_per_building.0 == 0
            || self.points_per_building.1 < self.points_per_building.0
        {
            return Err(Error::InvalidInput("points per building range must be ordered"));
        }
        if self.ground_density < 0.0 {
            return Err(Error::InvalidInput("ground density must be non-negative"));
        }
        Ok(())
    }

    /// Side length of the square scene footprint.
    pub fn extent(&self) -> f64 {
        let cols = grid_side(self.buildings);
        cols as f64 * self.pitch + 2.0 * MARGIN
    }

    /// The smallest possible gap between two buildings' walls.
    pub fn min_gap(&self) -> f64 {
        self.pitch - self.footprint.1 - 2.0 * self.jitter
    }

    /// The longest possible 3D diagonal of a building.
    pub fn max_diameter(&self) -> f64 {
        libm::sqrt(2.0 * self.footprint.1 * self.footprint.1 + self.height.1 * self.height.1)
    }
}

const MARGIN: f64 = 20.0;

fn grid_side(buildings: usize) -> usize {
    (libm::ceil(libm::sqrt(buildings.max(1) as f64)) as usize).max(1)
}

struct SceneBuilder {
    positions: Vec<Vec3>,
    colors: Vec<[u8; 3]>,
    semantic: Vec<UrbanClass>,
    instance: Vec<u32>,
    category: Vec<BuildingCategory>,
}

impl SceneBuilder {
    fn push(
        &mut self,
        p: Vec3,
        color: [u8; 3],
        class: UrbanClass,
        instance: u32,
        category: BuildingCategory,
    ) {
        self.positions.push(p);
        self.colors.push(color);
        self.semantic.push(class);
        self.instance.push(instance);
        self.category.push(category);
    }
}

/// Generate a synthetic annotated scene. Deterministic given the seed;
/// building instance ids are deliberately non-contiguous.
pub fn generate_scene(spec: &SynthSpec, seed: u64) -> Result<AnnotatedPointCloud> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut scene = SceneBuilder {
        positions: Vec::new(),
        colors: Vec::new(),
        semantic: Vec::new(),
        instance: Vec::new(),
        category: Vec::new(),
    };

    let cols = grid_side(spec.buildings);
    let extent = spec.extent();

    // Ground plane.
    let ground_points = (spec.ground_density * extent * extent) as usize;
    for _ in 0..ground_points {
        let p = Vec3::new(
            rng.random_range(0.0..extent),
            rng.random_range(0.0..extent),
            0.0,
        );
        let shade = rng.random_range(90..130u8);
        scene.push(
            p,
            [shade, shade / 2 + 40, 40],
            UrbanClass::Ground,
            NO_INSTANCE,
            BuildingCategory::Unlabeled,
        );
    }

    // Buildings on the jittered grid.
    for b in 0..spec.buildings {
        let (col, row) = (b % cols, b / cols);
        let center = Vec3::new(
            MARGIN + (col as f64 + 0.5) * spec.pitch + rng.random_range(-spec.jitter..=spec.jitter),
            MARGIN + (row as f64 + 0.5) * spec.pitch + rng.random_range(-spec.jitter..=spec.jitter),
            0.0,
        );
        let w = rng.random_range(spec.footprint.0..=spec.footprint.1);
        let d = rng.random_range(spec.footprint.0..=spec.footprint.1);
        let h = rng.random_range(spec.height.0..=spec.height.1);
        let count =
            rng.random_range(spec.points_per_building.0..=spec.points_per_building.1);
        let id = b as u32 * 17 + 5;
        let category = BuildingCategory::LABELED
            [rng.random_range(0..BuildingCategory::LABELED.len())];
        let tint = rng.random_range(140..220u8);

        sample_box_surface(&mut rng, center, w, d, h, count, |rng, p| {
            let shade = tint.saturating_sub(rng.random_range(0..30u8));
            scene.push(p, [shade, shade, shade], UrbanClass::Building, id, category);
        });
    }

    // Vegetation blobs in the corridors between grid cells.
    for _ in 0..spec.vegetation_blobs {
        let radius = rng.random_range(1.5..4.0);
        let center = Vec3::new(
            rng.random_range(0.0..extent),
            rng.random_range(0.0..extent),
            radius * 0.8,
        );
        for _ in 0..spec.points_per_blob {
            // Rejection-free ball sample: direction times cbrt-distributed radius.
            let dir = loop {
                let v = Vec3::new(
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                );
                if v.norm_sq() > 1e-9 && v.norm_sq() <= 1.0 {
                    break v * (1.0 / v.norm());
                }
            };
            let r = radius * libm::cbrt(rng.random_range(0.0..1.0f64));
            let mut p = center + dir * r;
            p.z = p.z.max(0.0);
            scene.push(
                p,
                [40, rng.random_range(120..180u8), 50],
                UrbanClass::Vegetation,
                NO_INSTANCE,
                BuildingCategory::Unlabeled,
            );
        }
    }

    // Vehicles: small boxes down on the ground.
    for _ in 0..spec.vehicles {
        let center = Vec3::new(
            rng.random_range(0.0..extent),
            rng.random_range(0.0..extent),
            0.0,
        );
        sample_box_surface(&mut rng, center, 2.0, 4.5, 1.6, 160, |rng, p| {
            scene.push(
                p,
                [rng.random_range(0..255u8), 30, 30],
                UrbanClass::Vehicle,
                NO_INSTANCE,
                BuildingCategory::Unlabeled,
            );
        });
    }

    AnnotatedPointCloud::new(
        scene.positions,
        scene.colors,
        scene.semantic,
        scene.instance,
        scene.category,
    )
}

/// Sample `count` points over the four walls and roof of an axis-aligned box
/// sitting on the ground, allocating per face by area.
fn sample_box_surface(
    rng: &mut ChaCha8Rng,
    center: Vec3,
    w: f64,
    d: f64,
    h: f64,
    count: usize,
    mut emit: impl FnMut(&mut ChaCha8Rng, Vec3),
) {
    let half_w = w / 2.0;
    let half_d = d / 2.0;
    let areas = [w * h, w * h, d * h, d * h, w * d];
    let total: f64 = areas.iter().sum();
    let mut emitted = 0usize;
    for (face, &area) in areas.iter().enumerate() {
        let quota = if face == areas.len() - 1 {
            count - emitted
        } else {
            (count as f64 * area / total) as usize
        };
        for _ in 0..quota {
            let (u, v) = (rng.random_range(0.0..1.0f64), rng.random_range(0.0..1.0f64));
            let p = match face {
                0 => Vec3::new((u - 0.5) * w, -half_d, v * h),
                1 => Vec3::new((u - 0.5) * w, half_d, v * h),
                2 => Vec3::new(-half_w, (u - 0.5) * d, v * h),
                3 => Vec3::new(half_w, (u - 0.5) * d, v * h),
                _ => Vec3::new((u - 0.5) * w, (v - 0.5) * d, h),
            };
            emit(rng, center + p);
        }
        emitted += quota;
    }
}

/// Human-readable description of a spec, for logs and reports.
pub fn describe(spec: &SynthSpec) -> String {
    format!(
        "{} buildings, pitch {:.0} m, footprint {:.0}-{:.0} m, height {:.0}-{:.0} m",
        spec.buildings,
        spec.pitch,
        spec.footprint.0,
        spec.footprint.1,
        spec.height.0,
        spec.height.1
    )
}
