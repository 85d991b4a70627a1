//! The per-point feature contract consumed by the segmenter, and the
//! ground-truth oracle provider with controllable noise.
//!
//! Providers stand in for a learned backbone: for each block they supply a
//! semantic prediction, a center-offset vector, and an instance-aware
//! embedding per point. The oracle derives all three from the annotations,
//! which lets the grouping machinery be tested independently of any network.

use alloc::format;
use alloc::vec::Vec;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::model::{AnnotatedPointCloud, UrbanClass, NO_INSTANCE};
use crate::partition::Block;
use crate::{Error, Result, Vec3};

/// A dense row-major matrix of per-point embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl EmbeddingMatrix {
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("embedding dimension must be >= 1"));
        }
        if !data.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch {
                what: "embedding data",
                expected: dim * (data.len() / dim + 1),
                got: data.len(),
            });
        }
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "embeddings",
                index,
            });
        }
        Ok(EmbeddingMatrix { dim, data })
    }

    pub fn zeros(rows: usize, dim: usize) -> Result<Self> {
        Self::new(dim, alloc::vec![0.0; rows * dim])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Copy the given rows into a new matrix.
    pub fn gather(&self, rows: &[u32]) -> EmbeddingMatrix {
        let mut data = Vec::with_capacity(rows.len() * self.dim);
        for &r in rows {
            data.extend_from_slice(self.row(r as usize));
        }
        EmbeddingMatrix {
            dim: self.dim,
            data,
        }
    }
}

/// Per-point pipeline inputs for one block: semantic predictions, center
/// offsets, and instance-aware embeddings. All channels have the block's
/// length and only finite values.
#[derive(Debug, Clone, PartialEq)]
pub struct PointFeatures {
    semantic_pred: Vec<UrbanClass>,
    /// Optional per-class score rows (7 entries per point, row-major).
    semantic_scores: Option<Vec<f64>>,
    offsets: Vec<Vec3>,
    embeddings: EmbeddingMatrix,
}

impl PointFeatures {
    pub fn new(
        semantic_pred: Vec<UrbanClass>,
        semantic_scores: Option<Vec<f64>>,
        offsets: Vec<Vec3>,
        embeddings: EmbeddingMatrix,
    ) -> Result<Self> {
        let n = semantic_pred.len();
        if offsets.len() != n {
            return Err(Error::DimensionMismatch {
                what: "offsets",
                expected: n,
                got: offsets.len(),
            });
        }
        if embeddings.rows() != n {
            return Err(Error::DimensionMismatch {
                what: "embedding rows",
                expected: n,
                got: embeddings.rows(),
            });
        }
        if let Some(scores) = &semantic_scores {
            if scores.len() != n * UrbanClass::ALL.len() {
                return Err(Error::DimensionMismatch {
                    what: "semantic scores",
                    expected: n * UrbanClass::ALL.len(),
                    got: scores.len(),
                });
            }
            if let Some(index) = scores.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    what: "semantic scores",
                    index,
                });
            }
        }
        if let Some(index) = offsets.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "offsets",
                index,
            });
        }
        Ok(PointFeatures {
            semantic_pred,
            semantic_scores,
            offsets,
            embeddings,
        })
    }

    pub fn len(&self) -> usize {
        self.semantic_pred.len()
    }

    pub fn is_empty(&self) -> bool {
        self.semantic_pred.is_empty()
    }

    pub fn semantic_pred(&self) -> &[UrbanClass] {
        &self.semantic_pred
    }

    pub fn semantic_scores(&self) -> Option<&[f64]> {
        self.semantic_scores.as_deref()
    }

    pub fn offsets(&self) -> &[Vec3] {
        &self.offsets
    }

    pub fn embeddings(&self) -> &EmbeddingMatrix {
        &self.embeddings
    }
}

/// Mask of points predicted as `Building`; only these are eligible for
/// instance grouping.
pub fn foreground_mask(features: &PointFeatures) -> Vec<bool> {
    features
        .semantic_pred()
        .iter()
        .map(|&c| c == UrbanClass::Building)
        .collect()
}

/// Supplies per-point features for a block. Implementations must be
/// stateless after construction; blocks may be processed concurrently.
pub trait FeatureProvider: Send + Sync {
    fn provide(&self, cloud: &AnnotatedPointCloud, block: &Block) -> Result<PointFeatures>;
}

/// Independent noise dials for the oracle provider.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NoiseParams {
    /// Std dev of iid Gaussian noise added to each embedding dimension.
    pub embedding_sigma: f64,
    /// Std dev of iid Gaussian noise added to each offset component.
    pub offset_sigma: f64,
    /// Probability of replacing a semantic prediction with a random other class.
    pub semantic_flip: f64,
}

impl NoiseParams {
    pub fn validate(&self) -> Result<()> {
        if self.embedding_sigma < 0.0 || self.offset_sigma < 0.0 {
            return Err(Error::InvalidInput("noise sigma must be non-negative"));
        }
        if !(0.0..=1.0).contains(&self.semantic_flip) {
            return Err(Error::InvalidInput("semantic flip probability must be in [0, 1]"));
        }
        Ok(())
    }
}

/// Feature provider that derives features from ground-truth annotations.
///
/// Semantics are the annotated classes; offsets point from each building
/// point to its instance's centroid within the block; instance embeddings
/// are well-separated axis codes: the instance of dense rank `r` (by
/// ascending id) gets `(1 + r / D)` in dimension `r % D`, which keeps every
/// pair of codes at distance >= 1.
#[derive(Debug, Clone)]
pub struct OracleProvider {
    dim: usize,
    noise: NoiseParams,
    seed: u64,
}

impl OracleProvider {
    pub const DEFAULT_DIM: usize = 16;

    pub fn new(dim: usize, noise: NoiseParams, seed: u64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("embedding dimension must be >= 1"));
        }
        noise.validate()?;
        Ok(OracleProvider { dim, noise, seed })
    }

    /// Zero-noise oracle with the default embedding dimension.
    pub fn exact() -> Self {
        OracleProvider {
            dim: Self::DEFAULT_DIM,
            noise: NoiseParams::default(),
            seed: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn code_for_rank(&self, rank: usize) -> (usize, f64) {
        (rank % self.dim, 1.0 + (rank / self.dim) as f64)
    }
}

impl FeatureProvider for OracleProvider {
    fn provide(&self, cloud: &AnnotatedPointCloud, block: &Block) -> Result<PointFeatures> {
        let indices = block.indices();
        let n = indices.len();
        let positions = cloud.positions();
        let semantic = cloud.semantic();
        let instance = cloud.instance();

        // Dense ranks and block-local centroids per instance.
        let mut ids: Vec<u32> = indices
            .iter()
            .map(|&i| instance[i as usize])
            .filter(|&id| id != NO_INSTANCE)
            .collect();
        ids.sort_unstable();
        ids.dedup();
        let rank_of = |id: u32| ids.binary_search(&id).expect("id collected above");
        let mut centroid_sum = alloc::vec![Vec3::ZERO; ids.len()];
        let mut centroid_count = alloc::vec![0u64; ids.len()];
        for &i in indices {
            let id = instance[i as usize];
            if id != NO_INSTANCE {
                let r = rank_of(id);
                centroid_sum[r] += positions[i as usize];
                centroid_count[r] += 1;
            }
        }
        let centroids: Vec<Vec3> = centroid_sum
            .iter()
            .zip(&centroid_count)
            .map(|(&sum, &count)| sum * (1.0 / count as f64))
            .collect();

        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(block.id() as u64);

        let mut semantic_pred = Vec::with_capacity(n);
        let mut offsets = Vec::with_capacity(n);
        let mut embeddings = EmbeddingMatrix::zeros(n, self.dim)?;

        let embedding_noise = (self.noise.embedding_sigma > 0.0)
            .then(|| Normal::new(0.0, self.noise.embedding_sigma))
            .transpose()
            .map_err(|_| Error::InvalidInput("embedding sigma must be finite"))?;
        let offset_noise = (self.noise.offset_sigma > 0.0)
            .then(|| Normal::new(0.0, self.noise.offset_sigma))
            .transpose()
            .map_err(|_| Error::InvalidInput("offset sigma must be finite"))?;

        for (row, &i) in indices.iter().enumerate() {
            let gt_class = semantic[i as usize];
            let class = if self.noise.semantic_flip > 0.0
                && rng.random::<f64>() < self.noise.semantic_flip
            {
                let shift = rng.random_range(1..UrbanClass::ALL.len() as u8);
                UrbanClass::from_code((gt_class.code() + shift) % UrbanClass::ALL.len() as u8)
                    .expect("shifted code stays in range")
            } else {
                gt_class
            };
            semantic_pred.push(class);

            let id = instance[i as usize];
            let mut offset = if id != NO_INSTANCE {
                centroids[rank_of(id)] - positions[i as usize]
            } else {
                Vec3::ZERO
            };
            if let Some(noise) = &offset_noise {
                offset.x += noise.sample(&mut rng);
                offset.y += noise.sample(&mut rng);
                offset.z += noise.sample(&mut rng);
            }
            offsets.push(offset);

            if id != NO_INSTANCE {
                let (axis, scale) = self.code_for_rank(rank_of(id));
                embeddings.row_mut(row)[axis] = scale;
            }
            if let Some(noise) = &embedding_noise {
                for value in embeddings.row_mut(row) {
                    *value += noise.sample(&mut rng);
                }
            }
        }

        PointFeatures::new(semantic_pred, None, offsets, embeddings)
    }
}

/// Gather per-block features out of whole-cloud feature channels, checking
/// that the channel length matches the cloud.
///
/// This backs file-based providers: a network exports features for every
/// point of a scene once, and each block picks out its rows.
pub fn gather_block_features(
    whole: &PointFeatures,
    cloud: &AnnotatedPointCloud,
    block: &Block,
) -> Result<PointFeatures> {
    if whole.len() != cloud.len() {
        return Err(Error::Provider(format!(
            "feature channel length {} does not match cloud length {}",
            whole.len(),
            cloud.len()
        )));
    }
    let indices = block.indices();
    let semantic_pred = indices
        .iter()
        .map(|&i| whole.semantic_pred()[i as usize])
        .collect();
    let semantic_scores = whole.semantic_scores().map(|scores| {
        let classes = UrbanClass::ALL.len();
        let mut out = Vec::with_capacity(indices.len() * classes);
        for &i in indices {
            out.extend_from_slice(&scores[i as usize * classes..(i as usize + 1) * classes]);
        }
        out
    });
    let offsets = indices
        .iter()
        .map(|&i| whole.offsets()[i as usize])
        .collect();
    let embeddings = whole.embeddings().gather(indices);
    PointFeatures::new(semantic_pred, semantic_scores, offsets, embeddings)
}
