//! Spatial preprocessing: block cropping, voxelization, and furthest point
//! sampling.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::model::AnnotatedPointCloud;
use crate::{Error, Result, Vec3};

/// A spatially cropped subset of a scene; the unit of pipeline processing.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    id: u32,
    /// Indices into the parent cloud, sorted ascending, no duplicates.
    indices: Vec<u32>,
    min: Vec3,
    max: Vec3,
}

impl Block {
    pub fn new(id: u32, mut indices: Vec<u32>, cloud: &AnnotatedPointCloud) -> Result<Self> {
        indices.sort_unstable();
        indices.dedup();
        if indices.last().is_some_and(|&i| i as usize >= cloud.len()) {
            return Err(Error::InvalidInput("block index out of range for cloud"));
        }
        let positions = cloud.positions();
        let mut min = Vec3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY);
        let mut max = Vec3::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for &i in &indices {
            min = min.min(positions[i as usize]);
            max = max.max(positions[i as usize]);
        }
        Ok(Block {
            id,
            indices,
            min,
            max,
        })
    }

    /// A single block containing every point of the cloud.
    pub fn covering(cloud: &AnnotatedPointCloud) -> Self {
        Block::new(0, (0..cloud.len() as u32).collect(), cloud)
            .expect("indices are in range by construction")
    }

    pub fn id(&self) -> u32 {
        self.id
    }

    pub fn indices(&self) -> &[u32] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn bounds(&self) -> (Vec3, Vec3) {
        (self.min, self.max)
    }

    /// Positions of the block's points, in block-local order.
    pub fn gather_positions(&self, cloud: &AnnotatedPointCloud) -> Vec<Vec3> {
        let positions = cloud.positions();
        self.indices
            .iter()
            .map(|&i| positions[i as usize])
            .collect()
    }
}

/// Crop a cloud into blocks of at most `max_points` points by recursive
/// bisection along the longest horizontal axis.
///
/// The split position is jittered around the median (40%..60% of the points,
/// drawn from `seed`), so repeated runs with the same seed produce the same
/// decomposition. The returned blocks partition the point indices.
pub fn crop_blocks(
    cloud: &AnnotatedPointCloud,
    max_points: usize,
    seed: u64,
) -> Result<Vec<Block>> {
    if max_points == 0 {
        return Err(Error::InvalidInput("max_points must be at least 1"));
    }
    if cloud.is_empty() {
        return Ok(Vec::new());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let all: Vec<u32> = (0..cloud.len() as u32).collect();
    let mut leaves: Vec<Vec<u32>> = Vec::new();
    split_recursive(cloud, all, max_points, &mut rng, &mut leaves);
    leaves
        .into_iter()
        .enumerate()
        .map(|(id, indices)| Block::new(id as u32, indices, cloud))
        .collect()
}

fn split_recursive(
    cloud: &AnnotatedPointCloud,
    mut indices: Vec<u32>,
    max_points: usize,
    rng: &mut ChaCha8Rng,
    out: &mut Vec<Vec<u32>>,
) {
    if indices.len() <= max_points {
        out.push(indices);
        return;
    }
    let positions = cloud.positions();
    let mut min = Vec3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY);
    let mut max = Vec3::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for &i in &indices {
        min = min.min(positions[i as usize]);
        max = max.max(positions[i as usize]);
    }
    // Horizontal axes only: 0 = x, 1 = y. Ties go to x.
    let axis = if (max.y - min.y) > (max.x - min.x) { 1 } else { 0 };
    let coord = |i: u32| {
        let p = positions[i as usize];
        if axis == 0 {
            p.x
        } else {
            p.y
        }
    };
    indices.sort_unstable_by(|&a, &b| {
        coord(a)
            .partial_cmp(&coord(b))
            .unwrap_or(core::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let frac: f64 = rng.random_range(0.4..=0.6);
    let split = ((indices.len() as f64 * frac) as usize).clamp(1, indices.len() - 1);
    let right = indices.split_off(split);
    split_recursive(cloud, indices, max_points, rng, out);
    split_recursive(cloud, right, max_points, rng, out);
}

/// A hash of points into axis-aligned cubes of a fixed edge length.
///
/// Every point maps to exactly one voxel: `floor(position / edge)`
/// componentwise.
#[derive(Debug, Clone)]
pub struct VoxelGrid {
    edge: f64,
    cells: BTreeMap<[i64; 3], Vec<u32>>,
}

impl VoxelGrid {
    pub fn edge(&self) -> f64 {
        self.edge
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Voxel coordinate of a position under this grid's edge length.
    pub fn voxel_of(&self, p: Vec3) -> [i64; 3] {
        voxel_coord(p, self.edge)
    }

    pub fn cells(&self) -> impl Iterator<Item = (&[i64; 3], &[u32])> {
        self.cells.iter().map(|(k, v)| (k, v.as_slice()))
    }

    pub fn get(&self, voxel: [i64; 3]) -> Option<&[u32]> {
        self.cells.get(&voxel).map(|v| v.as_slice())
    }

    /// One representative point per voxel (the lowest contained index),
    /// sorted ascending. Suitable for voxel-level downsampling.
    pub fn representatives(&self) -> Vec<u32> {
        let mut reps: Vec<u32> = self
            .cells
            .values()
            .map(|v| *v.iter().min().expect("voxels are non-empty"))
            .collect();
        reps.sort_unstable();
        reps
    }
}

fn voxel_coord(p: Vec3, edge: f64) -> [i64; 3] {
    [
        libm::floor(p.x / edge) as i64,
        libm::floor(p.y / edge) as i64,
        libm::floor(p.z / edge) as i64,
    ]
}

/// Bucket points into a voxel grid with the given edge length (meters).
pub fn voxelize(points: &[Vec3], edge: f64) -> Result<VoxelGrid> {
    if !edge.is_finite() || edge <= 0.0 {
        return Err(Error::InvalidInput("voxel edge must be positive and finite"));
    }
    let mut cells: BTreeMap<[i64; 3], Vec<u32>> = BTreeMap::new();
    for (i, &p) in points.iter().enumerate() {
        if !p.is_finite() {
            return Err(Error::NonFinite {
                what: "positions",
                index: i,
            });
        }
        cells.entry(voxel_coord(p, edge)).or_default().push(i as u32);
    }
    Ok(VoxelGrid { edge, cells })
}

/// Greedy furthest point sampling.
///
/// The first selection is `start`; each subsequent selection maximizes the
/// minimum Euclidean distance to everything selected so far, with ties
/// broken by the lowest index. Exact O(n*k).
pub fn fps(points: &[Vec3], k: usize, start: usize) -> Result<Vec<usize>> {
    if k == 0 || k > points.len() {
        return Err(Error::InvalidInput("fps requires 1 <= k <= |points|"));
    }
    if start >= points.len() {
        return Err(Error::InvalidInput("fps start index out of range"));
    }
    for (i, p) in points.iter().enumerate() {
        if !p.is_finite() {
            return Err(Error::NonFinite {
                what: "points",
                index: i,
            });
        }
    }

    let n = points.len();
    let mut selected = Vec::with_capacity(k);
    let mut taken = alloc::vec![false; n];
    let mut dist_sq = alloc::vec![f64::INFINITY; n];

    let mut last = start;
    selected.push(start);
    taken[start] = true;

    while selected.len() < k {
        let last_p = points[last];
        let mut best = usize::MAX;
        let mut best_d = f64::NEG_INFINITY;
        for i in 0..n {
            let d = dist_sq[i].min(points[i].dist_sq(last_p));
            dist_sq[i] = d;
            if !taken[i] && d > best_d {
                best_d = d;
                best = i;
            }
        }
        selected.push(best);
        taken[best] = true;
        last = best;
    }
    Ok(selected)
}

/// The deterministic default start for [`fps`]: the lowest index among
/// points attaining minimal x, then y, then z.
pub fn fps_min_start(points: &[Vec3]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, p) in points.iter().enumerate() {
        match best {
            None => best = Some(i),
            Some(b) => {
                let q = points[b];
                if (p.x, p.y, p.z) < (q.x, q.y, q.z) {
                    best = Some(i);
                }
            }
        }
    }
    best
}
