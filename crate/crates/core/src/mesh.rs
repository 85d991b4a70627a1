//! Triangle meshes and surface-density point sampling.
//!
//! Sampling allocates a deterministic number of points to each triangle in
//! proportion to its area (largest-remainder rounding, so the total is
//! exactly `round(density * total_area)`), then draws uniform barycentric
//! samples inside each triangle from a per-triangle RNG stream. Output order
//! is (triangle index, sample index), so serial and parallel samplers agree
//! byte for byte.

use alloc::vec::Vec;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::model::{AnnotatedPointCloud, BuildingCategory, UrbanClass, NO_INSTANCE};
use crate::{Error, Result, Vec3};

/// A labeled triangle mesh. Labels are per triangle; colors, when present,
/// are per vertex and interpolated onto samples.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    vertices: Vec<Vec3>,
    vertex_colors: Option<Vec<[u8; 3]>>,
    triangles: Vec<[u32; 3]>,
    semantic: Vec<UrbanClass>,
    instance: Vec<u32>,
    category: Vec<BuildingCategory>,
}

impl TriangleMesh {
    pub fn new(
        vertices: Vec<Vec3>,
        vertex_colors: Option<Vec<[u8; 3]>>,
        triangles: Vec<[u32; 3]>,
        semantic: Vec<UrbanClass>,
        instance: Vec<u32>,
        category: Vec<BuildingCategory>,
    ) -> Result<Self> {
        for (i, v) in vertices.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    what: "vertices",
                    index: i,
                });
            }
        }
        if let Some(colors) = &vertex_colors {
            if colors.len() != vertices.len() {
                return Err(Error::DimensionMismatch {
                    what: "vertex_colors",
                    expected: vertices.len(),
                    got: colors.len(),
                });
            }
        }
        let t = triangles.len();
        for (what, len) in [
            ("triangle semantic", semantic.len()),
            ("triangle instance", instance.len()),
            ("triangle category", category.len()),
        ] {
            if len != t {
                return Err(Error::DimensionMismatch {
                    what,
                    expected: t,
                    got: len,
                });
            }
        }
        for tri in &triangles {
            if tri.iter().any(|&v| v as usize >= vertices.len()) {
                return Err(Error::InvalidInput("triangle vertex index out of range"));
            }
        }
        for (&sem, &inst) in semantic.iter().zip(&instance) {
            if (sem == UrbanClass::Building) == (inst == NO_INSTANCE) {
                return Err(Error::InvalidInput(
                    "triangle instance ids must mark exactly the building triangles",
                ));
            }
        }
        Ok(TriangleMesh {
            vertices,
            vertex_colors,
            triangles,
            semantic,
            instance,
            category,
        })
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn vertex_colors(&self) -> Option<&[[u8; 3]]> {
        self.vertex_colors.as_deref()
    }

    pub fn triangles(&self) -> &[[u32; 3]] {
        &self.triangles
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

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    fn corners(&self, tri: usize) -> (Vec3, Vec3, Vec3) {
        let [a, b, c] = self.triangles[tri];
        (
            self.vertices[a as usize],
            self.vertices[b as usize],
            self.vertices[c as usize],
        )
    }

    pub fn triangle_area(&self, tri: usize) -> f64 {
        let (a, b, c) = self.corners(tri);
        (b - a).cross(c - a).norm() * 0.5
    }

    pub fn total_area(&self) -> f64 {
        (0..self.triangle_count()).map(|t| self.triangle_area(t)).sum()
    }
}

/// Sample a point cloud from a mesh at `density` points per square meter.
///
/// Per-triangle counts follow area-proportional largest-remainder rounding;
/// zero-area triangles contribute nothing. Each sample inherits its
/// triangle's labels and an interpolated vertex color (triangle gray
/// 128,128,128 when the mesh carries no colors). Deterministic given `seed`.
pub fn sample_mesh(mesh: &TriangleMesh, density: f64, seed: u64) -> Result<AnnotatedPointCloud> {
    if !density.is_finite() || density <= 0.0 {
        return Err(Error::InvalidInput("density must be positive and finite"));
    }
    if mesh.triangle_count() == 0 {
        return Ok(AnnotatedPointCloud::empty());
    }

    let counts = allocate_counts(mesh, density);
    let total: usize = counts.iter().map(|&c| c as usize).sum();

    let mut positions = Vec::with_capacity(total);
    let mut colors = Vec::with_capacity(total);
    let mut semantic = Vec::with_capacity(total);
    let mut instance = Vec::with_capacity(total);
    let mut category = Vec::with_capacity(total);

    for (tri, &count) in counts.iter().enumerate() {
        if count == 0 {
            continue;
        }
        let (a, b, c) = mesh.corners(tri);
        let tri_colors = mesh.vertex_colors().map(|colors| {
            let [ia, ib, ic] = mesh.triangles()[tri];
            (
                colors[ia as usize],
                colors[ib as usize],
                colors[ic as usize],
            )
        });
        // One ChaCha stream per triangle, keyed by its index, so sampling
        // can run per triangle in any order without changing the output.
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(tri as u64 + 1);
        for _ in 0..count {
            let r0: f64 = rng.random();
            let r1: f64 = rng.random();
            let (u, v) = if r0 + r1 > 1.0 {
                (1.0 - r0, 1.0 - r1)
            } else {
                (r0, r1)
            };
            positions.push(a + (b - a) * u + (c - a) * v);
            colors.push(match tri_colors {
                Some((ca, cb, cc)) => interpolate_color(ca, cb, cc, u, v),
                None => [128, 128, 128],
            });
            semantic.push(mesh.semantic()[tri]);
            instance.push(mesh.instance()[tri]);
            category.push(mesh.category()[tri]);
        }
    }

    AnnotatedPointCloud::new(positions, colors, semantic, instance, category)
}

/// Largest-remainder allocation of `round(density * total_area)` samples
/// over triangles, proportional to area.
fn allocate_counts(mesh: &TriangleMesh, density: f64) -> Vec<u64> {
    let n = mesh.triangle_count();
    let areas: Vec<f64> = (0..n).map(|t| mesh.triangle_area(t)).collect();
    let total_area: f64 = areas.iter().sum();
    let total = libm::round(density * total_area) as u64;

    let mut counts: Vec<u64> = Vec::with_capacity(n);
    let mut remainders: Vec<(usize, f64)> = Vec::new();
    let mut allocated = 0u64;
    for (tri, &area) in areas.iter().enumerate() {
        if area <= 0.0 {
            counts.push(0);
            continue;
        }
        let quota = density * area;
        let base = libm::floor(quota) as u64;
        counts.push(base);
        allocated += base;
        remainders.push((tri, quota - libm::floor(quota)));
    }
    remainders.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap_or(core::cmp::Ordering::Equal)
            .then(a.0.cmp(&b.0))
    });
    let extra = total.saturating_sub(allocated) as usize;
    if !remainders.is_empty() {
        for slot in 0..extra {
            counts[remainders[slot % remainders.len()].0] += 1;
        }
    }
    counts
}

fn interpolate_color(ca: [u8; 3], cb: [u8; 3], cc: [u8; 3], u: f64, v: f64) -> [u8; 3] {
    let w = 1.0 - u - v;
    let mut out = [0u8; 3];
    for ch in 0..3 {
        let value = w * ca[ch] as f64 + u * cb[ch] as f64 + v * cc[ch] as f64;
        out[ch] = libm::round(value).clamp(0.0, 255.0) as u8;
    }
    out
}
