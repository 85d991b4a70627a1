//! The clustering-free proposal pipeline: candidate selection by furthest
//! point sampling, relation-matrix grouping by argmin over embedding
//! distances, anchor-based candidate merging, and proposal scoring.

use alloc::vec;
use alloc::vec::Vec;

use crate::features::{foreground_mask, EmbeddingMatrix, PointFeatures};
use crate::metrics::instance_iou;
use crate::model::{AnnotatedPointCloud, BuildingCategory, Proposal, NO_INSTANCE};
use crate::partition::{fps, fps_min_start, Block};
use crate::{Error, Result, Vec3};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Sentinel for points that belong to no surviving proposal.
pub const UNASSIGNED: u32 = u32::MAX;

/// How the furthest-point-sampling seed point is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CandidateStart {
    /// The lowest-index point attaining minimal x, then y, then z.
    MinCoord,
    /// A seeded uniformly random foreground point.
    Seeded(u64),
}

/// Tunable parameters of the proposal pipeline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmenterParams {
    /// One candidate per this many foreground points.
    pub k_ratio: usize,
    /// Hard cap on candidates per block.
    pub k_max: usize,
    /// Single-linkage threshold on shifted anchors, meters.
    pub merge_radius: f64,
    /// Proposals scoring strictly below this are dropped.
    pub score_threshold: f64,
    pub candidate_start: CandidateStart,
}

impl Default for SegmenterParams {
    fn default() -> Self {
        SegmenterParams {
            k_ratio: 3000,
            k_max: 100,
            merge_radius: 1.0,
            score_threshold: 0.1,
            candidate_start: CandidateStart::MinCoord,
        }
    }
}

impl SegmenterParams {
    pub fn validate(&self) -> Result<()> {
        if self.k_ratio == 0 {
            return Err(Error::InvalidInput("k_ratio must be >= 1"));
        }
        if self.k_max == 0 {
            return Err(Error::InvalidInput("k_max must be >= 1"));
        }
        if !self.merge_radius.is_finite() || self.merge_radius <= 0.0 {
            return Err(Error::InvalidInput("merge_radius must be positive"));
        }
        if !(0.0..=1.0).contains(&self.score_threshold) {
            return Err(Error::InvalidInput("score_threshold must be in [0, 1]"));
        }
        Ok(())
    }
}

/// Foreground-by-candidate matrix of embedding distances.
#[derive(Debug, Clone, PartialEq)]
pub struct RelationMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl RelationMatrix {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }
}

fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum()
}

/// Pipeline stages reported to a [`StageObserver`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    CandidateSelection,
    Assignment,
    Merging,
    Scoring,
}

/// Callback invoked as [`segment_block_observed`] finishes each stage;
/// drivers use it for per-stage timing.
pub trait StageObserver {
    fn stage_completed(&mut self, stage: Stage);
}

impl StageObserver for () {
    fn stage_completed(&mut self, _stage: Stage) {}
}

/// Select candidate points among the foreground by furthest point sampling:
/// one candidate per `k_ratio` foreground points (rounded up, at least one),
/// capped at `k_max`.
///
/// `foreground` holds block-local indices into `positions`; the returned
/// candidates are block-local indices as well.
pub fn select_candidates(
    foreground: &[u32],
    positions: &[Vec3],
    k_ratio: usize,
    k_max: usize,
    start: CandidateStart,
) -> Result<Vec<u32>> {
    if foreground.is_empty() {
        return Ok(Vec::new());
    }
    if k_ratio == 0 || k_max == 0 {
        return Err(Error::InvalidInput("k_ratio and k_max must be >= 1"));
    }
    let k = foreground.len().div_ceil(k_ratio).max(1).min(k_max);
    let fg_positions: Vec<Vec3> = foreground
        .iter()
        .map(|&i| positions[i as usize])
        .collect();
    let start_index = match start {
        CandidateStart::MinCoord => {
            fps_min_start(&fg_positions).expect("foreground is non-empty")
        }
        CandidateStart::Seeded(seed) => {
            ChaCha8Rng::seed_from_u64(seed).random_range(0..fg_positions.len())
        }
    };
    let picks = fps(&fg_positions, k, start_index)?;
    Ok(picks.into_iter().map(|i| foreground[i]).collect())
}

/// Build the relation matrix of Euclidean embedding distances between every
/// foreground point (rows) and every candidate (columns).
pub fn build_relation_matrix(
    fg_embeddings: &EmbeddingMatrix,
    cand_embeddings: &EmbeddingMatrix,
) -> Result<RelationMatrix> {
    if fg_embeddings.dim() != cand_embeddings.dim() {
        return Err(Error::DimensionMismatch {
            what: "embedding dimension",
            expected: fg_embeddings.dim(),
            got: cand_embeddings.dim(),
        });
    }
    if cand_embeddings.rows() == 0 {
        return Err(Error::InvalidInput("at least one candidate is required"));
    }
    let rows = fg_embeddings.rows();
    let cols = cand_embeddings.rows();
    let mut data = Vec::with_capacity(rows * cols);
    for i in 0..rows {
        let fi = fg_embeddings.row(i);
        for j in 0..cols {
            data.push(libm::sqrt(dist_sq(fi, cand_embeddings.row(j))));
        }
    }
    Ok(RelationMatrix { rows, cols, data })
}

/// Row-wise argmin over the relation matrix: each foreground point maps to
/// its nearest candidate, ties to the lowest candidate index.
pub fn assign(matrix: &RelationMatrix) -> Vec<u32> {
    (0..matrix.rows())
        .map(|i| {
            let row = matrix.row(i);
            let mut best = 0usize;
            for (j, &d) in row.iter().enumerate().skip(1) {
                if d < row[best] {
                    best = j;
                }
            }
            best as u32
        })
        .collect()
}

/// Argmin assignment computed row by row without materializing the relation
/// matrix; equivalent to `assign(&build_relation_matrix(..))` and used by
/// [`segment_block`] to keep memory linear in the block size.
pub fn assign_nearest(
    fg_embeddings: &EmbeddingMatrix,
    cand_embeddings: &EmbeddingMatrix,
) -> Result<Vec<u32>> {
    if fg_embeddings.dim() != cand_embeddings.dim() {
        return Err(Error::DimensionMismatch {
            what: "embedding dimension",
            expected: fg_embeddings.dim(),
            got: cand_embeddings.dim(),
        });
    }
    if cand_embeddings.rows() == 0 {
        return Err(Error::InvalidInput("at least one candidate is required"));
    }
    Ok((0..fg_embeddings.rows())
        .map(|i| {
            let fi = fg_embeddings.row(i);
            let mut best = 0usize;
            let mut best_d = dist_sq(fi, cand_embeddings.row(0));
            for j in 1..cand_embeddings.rows() {
                let d = dist_sq(fi, cand_embeddings.row(j));
                if d < best_d {
                    best_d = d;
                    best = j;
                }
            }
            best as u32
        })
        .collect())
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, i: usize) -> usize {
        let mut root = i;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        let mut cur = i;
        while self.parent[cur] != root {
            cur = core::mem::replace(&mut self.parent[cur], root);
        }
        root
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        // Keep the lower index as the root so cluster representatives are
        // the lowest candidate slot.
        let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
        self.parent[hi] = lo;
    }
}

/// Shift each candidate by its offset vector and merge candidates whose
/// anchors fall within `merge_radius` of each other, by single linkage:
/// anchor chains within the radius collapse into one proposal, and the
/// member sets of merged candidates are unioned.
///
/// `assignment[r]` is the candidate slot of the r-th foreground point
/// (`foreground[r]`, a block-local index). Proposals are returned with
/// placeholder score and category, ordered by their lowest candidate slot;
/// candidates that attracted no members disappear with their cluster.
pub fn merge_candidates(
    candidates: &[u32],
    positions: &[Vec3],
    offsets: &[Vec3],
    assignment: &[u32],
    foreground: &[u32],
    merge_radius: f64,
) -> Result<Vec<Proposal>> {
    if !merge_radius.is_finite() || merge_radius <= 0.0 {
        return Err(Error::InvalidInput("merge_radius must be positive"));
    }
    if assignment.len() != foreground.len() {
        return Err(Error::DimensionMismatch {
            what: "assignment",
            expected: foreground.len(),
            got: assignment.len(),
        });
    }

    let anchors: Vec<Vec3> = candidates
        .iter()
        .map(|&c| positions[c as usize] + offsets[c as usize])
        .collect();

    let mut uf = UnionFind::new(candidates.len());
    for i in 0..anchors.len() {
        for j in (i + 1)..anchors.len() {
            if anchors[i].dist(anchors[j]) <= merge_radius {
                uf.union(i, j);
            }
        }
    }

    let mut members_by_slot: Vec<Vec<u32>> = vec![Vec::new(); candidates.len()];
    for (r, &slot) in assignment.iter().enumerate() {
        members_by_slot[slot as usize].push(foreground[r]);
    }

    // Group slots by cluster root; roots are the lowest slot of each cluster.
    let mut proposals: Vec<(usize, Proposal)> = Vec::new();
    let mut root_to_proposal: Vec<Option<usize>> = vec![None; candidates.len()];
    for (slot, slot_members) in members_by_slot.iter_mut().enumerate() {
        let root = uf.find(slot);
        let members = core::mem::take(slot_members);
        match root_to_proposal[root] {
            Some(p) => proposals[p].1.members.extend_from_slice(&members),
            None => {
                root_to_proposal[root] = Some(proposals.len());
                proposals.push((
                    root,
                    Proposal {
                        members,
                        anchor: anchors[root],
                        score: 0.0,
                        category: BuildingCategory::Unlabeled,
                    },
                ));
            }
        }
    }

    let mut out: Vec<Proposal> = proposals
        .into_iter()
        .filter(|(_, p)| !p.members.is_empty())
        .map(|(_, mut p)| {
            p.members.sort_unstable();
            p
        })
        .collect();
    // Already ordered by root slot; make the invariant explicit.
    out.sort_by(|a, b| a.members[0].cmp(&b.members[0]));
    Ok(out)
}

/// Per-point result of segmenting one block.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentationResult {
    /// For each block-local point: the surviving proposal index, or
    /// [`UNASSIGNED`].
    pub assignment: Vec<u32>,
    pub proposals: Vec<Proposal>,
}

impl SegmentationResult {
    pub fn empty(n_points: usize) -> Self {
        SegmentationResult {
            assignment: vec![UNASSIGNED; n_points],
            proposals: Vec::new(),
        }
    }
}

/// Scores proposals in [0, 1]; higher means more likely a real building.
pub trait ProposalScorer: Send + Sync {
    fn score_proposals(
        &self,
        cloud: &AnnotatedPointCloud,
        block: &Block,
        proposals: &[Proposal],
    ) -> Vec<f64>;
}

/// Default deterministic scorer: `coverage * compactness`, where coverage is
/// the proposal's share of assigned points inside its own bounding box and
/// compactness is the fraction of members within twice the median distance
/// to the anchor.
#[derive(Debug, Clone, Copy, Default)]
pub struct CoverageScorer;

impl ProposalScorer for CoverageScorer {
    fn score_proposals(
        &self,
        cloud: &AnnotatedPointCloud,
        block: &Block,
        proposals: &[Proposal],
    ) -> Vec<f64> {
        let positions = cloud.positions();
        let indices = block.indices();
        let pos_of = |local: u32| positions[indices[local as usize] as usize];

        let boxes: Vec<(Vec3, Vec3)> = proposals
            .iter()
            .map(|p| {
                let mut min = Vec3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY);
                let mut max = Vec3::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
                for &m in &p.members {
                    min = min.min(pos_of(m));
                    max = max.max(pos_of(m));
                }
                (min, max)
            })
            .collect();

        proposals
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let (min, max) = boxes[i];
                let inside = |q: Vec3| {
                    q.x >= min.x
                        && q.x <= max.x
                        && q.y >= min.y
                        && q.y <= max.y
                        && q.z >= min.z
                        && q.z <= max.z
                };
                let mut foreign = 0usize;
                for (j, other) in proposals.iter().enumerate() {
                    if j == i {
                        continue;
                    }
                    foreign += other.members.iter().filter(|&&m| inside(pos_of(m))).count();
                }
                let coverage = p.members.len() as f64 / (p.members.len() + foreign) as f64;

                let mut dists: Vec<f64> =
                    p.members.iter().map(|&m| pos_of(m).dist(p.anchor)).collect();
                dists.sort_by(|a, b| a.partial_cmp(b).unwrap_or(core::cmp::Ordering::Equal));
                let median = dists[dists.len() / 2];
                let within = dists.iter().filter(|&&d| d <= 2.0 * median).count();
                let compactness = within as f64 / dists.len() as f64;

                (coverage * compactness).clamp(0.0, 1.0)
            })
            .collect()
    }
}

/// Evaluation-isolation scorer: each proposal scores its best IoU against
/// any ground-truth instance of the block.
#[derive(Debug, Clone, Copy, Default)]
pub struct GroundTruthScorer;

impl ProposalScorer for GroundTruthScorer {
    fn score_proposals(
        &self,
        cloud: &AnnotatedPointCloud,
        block: &Block,
        proposals: &[Proposal],
    ) -> Vec<f64> {
        let gt_sets = block_instances(cloud, block);
        proposals
            .iter()
            .map(|p| {
                gt_sets
                    .iter()
                    .map(|(_, set)| instance_iou(&p.members, set).unwrap_or(0.0))
                    .fold(0.0f64, f64::max)
            })
            .collect()
    }
}

/// Map sorted block-local indices to sorted parent-cloud indices.
pub fn globalize_members(block: &Block, members: &[u32]) -> Vec<u32> {
    let indices = block.indices();
    members.iter().map(|&m| indices[m as usize]).collect()
}

/// Ground-truth instances of a block as (id, sorted block-local indices).
pub fn block_instances(cloud: &AnnotatedPointCloud, block: &Block) -> Vec<(u32, Vec<u32>)> {
    let instance = cloud.instance();
    let mut pairs: Vec<(u32, u32)> = block
        .indices()
        .iter()
        .enumerate()
        .filter_map(|(local, &global)| {
            let id = instance[global as usize];
            (id != NO_INSTANCE).then_some((id, local as u32))
        })
        .collect();
    pairs.sort_unstable();
    let mut out: Vec<(u32, Vec<u32>)> = Vec::new();
    for (id, local) in pairs {
        match out.last_mut() {
            Some((last_id, set)) if *last_id == id => set.push(local),
            _ => out.push((id, vec![local])),
        }
    }
    out
}

/// Run the scorer, clamp scores into [0, 1], drop proposals scoring strictly
/// below `threshold`, and materialize the per-point assignment. Points of
/// dropped proposals become [`UNASSIGNED`].
pub fn score_and_filter(
    cloud: &AnnotatedPointCloud,
    block: &Block,
    mut proposals: Vec<Proposal>,
    scorer: &dyn ProposalScorer,
    threshold: f64,
) -> Result<SegmentationResult> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::InvalidInput("score threshold must be in [0, 1]"));
    }
    let scores = scorer.score_proposals(cloud, block, &proposals);
    if scores.len() != proposals.len() {
        return Err(Error::DimensionMismatch {
            what: "proposal scores",
            expected: proposals.len(),
            got: scores.len(),
        });
    }
    for (p, s) in proposals.iter_mut().zip(&scores) {
        p.score = s.clamp(0.0, 1.0);
    }
    proposals.retain(|p| p.score >= threshold);

    let mut assignment = vec![UNASSIGNED; block.len()];
    for (pid, p) in proposals.iter().enumerate() {
        for &m in &p.members {
            assignment[m as usize] = pid as u32;
        }
    }
    Ok(SegmentationResult {
        assignment,
        proposals,
    })
}

fn vote_category(cloud: &AnnotatedPointCloud, block: &Block, members: &[u32]) -> BuildingCategory {
    let category = cloud.category();
    let indices = block.indices();
    let mut votes = [0u32; 256];
    for &m in members {
        votes[category[indices[m as usize] as usize].code() as usize] += 1;
    }
    let mut best = BuildingCategory::Unlabeled;
    let mut best_votes = 0u32;
    for code in 0..=255u8 {
        if votes[code as usize] > best_votes {
            if let Some(cat) = BuildingCategory::from_code(code) {
                best = cat;
                best_votes = votes[code as usize];
            }
        }
    }
    best
}

/// Segment one block: select candidates, assign every foreground point to
/// its nearest candidate in embedding space, merge candidates through their
/// shifted anchors, vote categories, then score and filter.
pub fn segment_block(
    cloud: &AnnotatedPointCloud,
    block: &Block,
    features: &PointFeatures,
    scorer: &dyn ProposalScorer,
    params: &SegmenterParams,
) -> Result<SegmentationResult> {
    segment_block_observed(cloud, block, features, scorer, params, &mut ())
}

/// [`segment_block`] with a stage callback for driver-side timing.
pub fn segment_block_observed(
    cloud: &AnnotatedPointCloud,
    block: &Block,
    features: &PointFeatures,
    scorer: &dyn ProposalScorer,
    params: &SegmenterParams,
    observer: &mut dyn StageObserver,
) -> Result<SegmentationResult> {
    params.validate()?;
    if features.len() != block.len() {
        return Err(Error::DimensionMismatch {
            what: "features",
            expected: block.len(),
            got: features.len(),
        });
    }

    let foreground: Vec<u32> = foreground_mask(features)
        .iter()
        .enumerate()
        .filter_map(|(i, &fg)| fg.then_some(i as u32))
        .collect();
    if foreground.is_empty() {
        return Ok(SegmentationResult::empty(block.len()));
    }

    let positions = block.gather_positions(cloud);
    let candidates = select_candidates(
        &foreground,
        &positions,
        params.k_ratio,
        params.k_max,
        params.candidate_start,
    )?;
    observer.stage_completed(Stage::CandidateSelection);

    let fg_embeddings = features.embeddings().gather(&foreground);
    let cand_embeddings = features.embeddings().gather(&candidates);
    let assignment = assign_nearest(&fg_embeddings, &cand_embeddings)?;
    observer.stage_completed(Stage::Assignment);

    let mut proposals = merge_candidates(
        &candidates,
        &positions,
        features.offsets(),
        &assignment,
        &foreground,
        params.merge_radius,
    )?;
    observer.stage_completed(Stage::Merging);

    for p in &mut proposals {
        p.category = vote_category(cloud, block, &p.members);
    }
    let result = score_and_filter(cloud, block, proposals, scorer, params.score_threshold)?;
    observer.stage_completed(Stage::Scoring);
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{NoiseParams, OracleProvider, FeatureProvider};
    use crate::model::UrbanClass;

    struct FixedScorer(Vec<f64>);

    impl ProposalScorer for FixedScorer {
        fn score_proposals(
            &self,
            _cloud: &AnnotatedPointCloud,
            _block: &Block,
            _proposals: &[Proposal],
        ) -> Vec<f64> {
            self.0.clone()
        }
    }

    fn grid_positions(n: usize, base: Vec3, step: f64) -> Vec<Vec3> {
        let side = libm::ceil(libm::sqrt(n as f64)) as usize;
        (0..n)
            .map(|i| base + Vec3::new((i % side) as f64 * step, (i / side) as f64 * step, 0.0))
            .collect()
    }

    /// Buildings of `sizes` points at well-separated bases, plus ground.
    fn building_cloud(sizes: &[usize], ground: usize) -> AnnotatedPointCloud {
        let mut positions = Vec::new();
        let mut semantic = Vec::new();
        let mut instance = Vec::new();
        let mut category = Vec::new();
        for (b, &size) in sizes.iter().enumerate() {
            let base = Vec3::new(b as f64 * 100.0, 0.0, 0.0);
            positions.extend(grid_positions(size, base, 0.5));
            semantic.extend(vec![UrbanClass::Building; size]);
            // Non-contiguous ids.
            instance.extend(vec![b as u32 * 10 + 3; size]);
            category.extend(vec![
                BuildingCategory::LABELED[b % BuildingCategory::LABELED.len()];
                size
            ]);
        }
        positions.extend(grid_positions(ground, Vec3::new(0.0, 500.0, 0.0), 2.0));
        semantic.extend(vec![UrbanClass::Ground; ground]);
        instance.extend(vec![NO_INSTANCE; ground]);
        category.extend(vec![BuildingCategory::Unlabeled; ground]);
        let n = positions.len();
        AnnotatedPointCloud::new(positions, vec![[0, 0, 0]; n], semantic, instance, category)
            .unwrap()
    }

    fn matrix(dim: usize, rows: &[&[f64]]) -> EmbeddingMatrix {
        let data: Vec<f64> = rows.iter().flat_map(|r| r.iter().copied()).collect();
        EmbeddingMatrix::new(dim, data).unwrap()
    }

    #[test]
    fn candidate_counts_follow_the_ratio_rule() {
        for (n, expected) in [
            (0usize, 0usize),
            (1, 1),
            (10, 1),
            (2999, 1),
            (3000, 1),
            (3001, 2),
            (9000, 3),
        ] {
            let positions = grid_positions(n.max(1), Vec3::ZERO, 1.0);
            let foreground: Vec<u32> = (0..n as u32).collect();
            let picked = select_candidates(
                &foreground,
                &positions,
                3000,
                100,
                CandidateStart::MinCoord,
            )
            .unwrap();
            assert_eq!(picked.len(), expected, "n = {n}");
        }
    }

    #[test]
    fn candidate_cap_applies() {
        let positions = grid_positions(1000, Vec3::ZERO, 1.0);
        let foreground: Vec<u32> = (0..1000).collect();
        let picked =
            select_candidates(&foreground, &positions, 10, 100, CandidateStart::MinCoord).unwrap();
        assert_eq!(picked.len(), 100);
        let seeded =
            select_candidates(&foreground, &positions, 10, 100, CandidateStart::Seeded(1)).unwrap();
        assert_eq!(seeded.len(), 100);
    }

    #[test]
    fn relation_matrix_small_example() {
        let fg = matrix(2, &[&[0.0, 0.0], &[1.0, 1.0]]);
        let cands = matrix(2, &[&[0.0, 0.0], &[2.0, 2.0]]);
        let rel = build_relation_matrix(&fg, &cands).unwrap();
        assert_eq!(rel.get(0, 0), 0.0);
        assert_eq!(rel.get(0, 1), libm::sqrt(8.0));
        assert_eq!(rel.get(1, 0), libm::sqrt(2.0));
        assert_eq!(rel.get(1, 1), libm::sqrt(2.0));
    }

    #[test]
    fn relation_matrix_zero_exactly_where_indices_coincide() {
        let rows: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64, 2.0 * i as f64]).collect();
        let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
        let m = matrix(2, &refs);
        let rel = build_relation_matrix(&m, &m).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                if i == j {
                    assert_eq!(rel.get(i, j), 0.0);
                } else {
                    assert!(rel.get(i, j) > 0.0);
                }
            }
        }
    }

    #[test]
    fn relation_matrix_matches_scalar_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let dim = 8;
        let fg_data: Vec<f64> = (0..1000 * dim).map(|_| rng.random_range(-3.0..3.0)).collect();
        let cand_data: Vec<f64> = (0..50 * dim).map(|_| rng.random_range(-3.0..3.0)).collect();
        let fg = EmbeddingMatrix::new(dim, fg_data).unwrap();
        let cands = EmbeddingMatrix::new(dim, cand_data).unwrap();
        let rel = build_relation_matrix(&fg, &cands).unwrap();
        for i in (0..1000).step_by(37) {
            for j in 0..50 {
                let mut acc = 0.0;
                for d in 0..dim {
                    let diff = fg.row(i)[d] - cands.row(j)[d];
                    acc += diff * diff;
                }
                assert!((rel.get(i, j) - libm::sqrt(acc)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn relation_matrix_rejects_dim_mismatch() {
        let fg = matrix(2, &[&[0.0, 0.0]]);
        let cands = matrix(3, &[&[0.0, 0.0, 0.0]]);
        assert!(build_relation_matrix(&fg, &cands).is_err());
    }

    #[test]
    fn assign_breaks_ties_to_lowest_candidate() {
        let rel = RelationMatrix {
            rows: 2,
            cols: 2,
            data: vec![0.0, 2.828, 1.414, 1.414],
        };
        assert_eq!(assign(&rel), vec![0, 0]);
    }

    #[test]
    fn assign_single_candidate_takes_all() {
        let fg = matrix(2, &[&[0.0, 1.0], &[5.0, -2.0]]);
        let cands = matrix(2, &[&[9.0, 9.0]]);
        let rel = build_relation_matrix(&fg, &cands).unwrap();
        assert_eq!(assign(&rel), vec![0, 0]);
    }

    #[test]
    fn streaming_assignment_matches_matrix_route() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let dim = rng.random_range(1..6);
            let nf = rng.random_range(1..40);
            let nc = rng.random_range(1..8);
            let fg = EmbeddingMatrix::new(
                dim,
                (0..nf * dim).map(|_| rng.random_range(-2.0..2.0)).collect(),
            )
            .unwrap();
            let cands = EmbeddingMatrix::new(
                dim,
                (0..nc * dim).map(|_| rng.random_range(-2.0..2.0)).collect(),
            )
            .unwrap();
            let via_matrix = assign(&build_relation_matrix(&fg, &cands).unwrap());
            let streaming = assign_nearest(&fg, &cands).unwrap();
            assert_eq!(via_matrix, streaming);
        }
    }

    #[test]
    fn assignment_invariant_under_positive_scaling() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let dim = 4;
        let fg = EmbeddingMatrix::new(
            dim,
            (0..30 * dim).map(|_| rng.random_range(-1.0..1.0)).collect(),
        )
        .unwrap();
        let cands = EmbeddingMatrix::new(
            dim,
            (0..5 * dim).map(|_| rng.random_range(-1.0..1.0)).collect(),
        )
        .unwrap();
        let scale = 3.7;
        let scaled = |m: &EmbeddingMatrix| {
            EmbeddingMatrix::new(dim, m.data().iter().map(|v| v * scale).collect()).unwrap()
        };
        assert_eq!(
            assign_nearest(&fg, &cands).unwrap(),
            assign_nearest(&scaled(&fg), &scaled(&cands)).unwrap()
        );
    }

    #[test]
    fn merge_chains_by_single_linkage() {
        // Anchors at 0, 0.9r, 1.8r: the outer pair is farther than r apart
        // but chains through the middle one.
        let r = 2.0;
        let positions = vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(0.9 * r, 0.0, 0.0),
            Vec3::new(1.8 * r, 0.0, 0.0),
        ];
        let offsets = vec![Vec3::ZERO; 3];
        let candidates = vec![0, 1, 2];
        let foreground = vec![0, 1, 2];
        let assignment = vec![0, 1, 2];
        let merged =
            merge_candidates(&candidates, &positions, &offsets, &assignment, &foreground, r)
                .unwrap();
        assert_eq!(merged.len(), 1);
        assert_eq!(merged[0].members, vec![0, 1, 2]);
        assert_eq!(merged[0].anchor, positions[0]);
    }

    #[test]
    fn merge_keeps_separated_anchors_apart() {
        let r = 1.0;
        let positions = vec![Vec3::new(0.0, 0.0, 0.0), Vec3::new(5.0, 0.0, 0.0)];
        let merged = merge_candidates(
            &[0, 1],
            &positions,
            &[Vec3::ZERO; 2],
            &[0, 1],
            &[0, 1],
            r,
        )
        .unwrap();
        assert_eq!(merged.len(), 2);
    }

    #[test]
    fn merge_output_partitions_assigned_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 60;
        let positions: Vec<Vec3> = (0..n)
            .map(|_| {
                Vec3::new(
                    rng.random_range(-10.0..10.0),
                    rng.random_range(-10.0..10.0),
                    0.0,
                )
            })
            .collect();
        let offsets: Vec<Vec3> = (0..n)
            .map(|_| {
                Vec3::new(
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    0.0,
                )
            })
            .collect();
        let candidates: Vec<u32> = (0..6).map(|i| i * 10).collect();
        let foreground: Vec<u32> = (0..n as u32).collect();
        let assignment: Vec<u32> = (0..n).map(|_| rng.random_range(0..6)).collect();
        let merged = merge_candidates(
            &candidates,
            &positions,
            &offsets,
            &assignment,
            &foreground,
            1.5,
        )
        .unwrap();
        let mut seen = vec![false; n];
        for p in &merged {
            for &m in &p.members {
                assert!(!seen[m as usize], "point {m} in two proposals");
                seen[m as usize] = true;
            }
        }
        assert_eq!(seen.iter().filter(|&&s| s).count(), n);
    }

    #[test]
    fn filter_drops_strictly_below_threshold() {
        let cloud = building_cloud(&[4, 4, 4], 0);
        let block = Block::covering(&cloud);
        let proposals: Vec<Proposal> = (0..3)
            .map(|b| Proposal {
                members: (b * 4..(b + 1) * 4).collect(),
                anchor: Vec3::ZERO,
                score: 0.0,
                category: BuildingCategory::Unlabeled,
            })
            .collect();
        let result = score_and_filter(
            &cloud,
            &block,
            proposals.clone(),
            &FixedScorer(vec![0.05, 0.1, 0.5]),
            0.1,
        )
        .unwrap();
        assert_eq!(result.proposals.len(), 2);
        assert_eq!(result.proposals[0].score, 0.1);
        assert!(result.assignment[..4].iter().all(|&a| a == UNASSIGNED));
        assert!(result.assignment[4..8].iter().all(|&a| a == 0));

        let keep_all = score_and_filter(
            &cloud,
            &block,
            proposals.clone(),
            &FixedScorer(vec![0.05, 0.1, 0.5]),
            0.0,
        )
        .unwrap();
        assert_eq!(keep_all.proposals.len(), 3);

        let drop_all = score_and_filter(
            &cloud,
            &block,
            proposals,
            &FixedScorer(vec![0.01, 0.02, 0.03]),
            0.5,
        )
        .unwrap();
        assert!(drop_all.proposals.is_empty());
        assert!(drop_all.assignment.iter().all(|&a| a == UNASSIGNED));
    }

    #[test]
    fn zero_noise_oracle_recovers_ground_truth_exactly() {
        let cloud = building_cloud(&[40, 25, 60], 30);
        let block = Block::covering(&cloud);
        let features = OracleProvider::exact().provide(&cloud, &block).unwrap();
        let params = SegmenterParams {
            k_ratio: 10,
            ..SegmenterParams::default()
        };
        let result =
            segment_block(&cloud, &block, &features, &CoverageScorer, &params).unwrap();

        let gt = block_instances(&cloud, &block);
        assert_eq!(result.proposals.len(), gt.len());
        let mut got: Vec<Vec<u32>> = result.proposals.iter().map(|p| p.members.clone()).collect();
        got.sort();
        let mut expected: Vec<Vec<u32>> = gt.into_iter().map(|(_, set)| set).collect();
        expected.sort();
        assert_eq!(got, expected);

        // Majority-vote categories match the annotation.
        for p in &result.proposals {
            let global = block.indices()[p.members[0] as usize] as usize;
            assert_eq!(p.category, cloud.category()[global]);
        }
    }

    #[test]
    fn segment_block_is_deterministic() {
        let cloud = building_cloud(&[30, 30], 20);
        let block = Block::covering(&cloud);
        let provider = OracleProvider::new(
            16,
            NoiseParams {
                embedding_sigma: 0.2,
                offset_sigma: 0.1,
                semantic_flip: 0.05,
            },
            11,
        )
        .unwrap();
        let features = provider.provide(&cloud, &block).unwrap();
        let params = SegmenterParams {
            k_ratio: 10,
            ..SegmenterParams::default()
        };
        let a = segment_block(&cloud, &block, &features, &CoverageScorer, &params).unwrap();
        let b = segment_block(&cloud, &block, &features, &CoverageScorer, &params).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn block_without_foreground_yields_empty_result() {
        let cloud = building_cloud(&[], 25);
        let block = Block::covering(&cloud);
        let features = OracleProvider::exact().provide(&cloud, &block).unwrap();
        let result = segment_block(
            &cloud,
            &block,
            &features,
            &CoverageScorer,
            &SegmenterParams::default(),
        )
        .unwrap();
        assert!(result.proposals.is_empty());
        assert!(result.assignment.iter().all(|&a| a == UNASSIGNED));
    }

    #[test]
    fn candidate_permutation_preserves_the_partition() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let dim = 3;
        let nf = 50;
        let nc = 6;
        let fg = EmbeddingMatrix::new(
            dim,
            (0..nf * dim).map(|_| rng.random_range(-2.0..2.0)).collect(),
        )
        .unwrap();
        let cand_rows: Vec<Vec<f64>> = (0..nc)
            .map(|_| (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();

        let canonical = |order: &[usize]| {
            let data: Vec<f64> = order
                .iter()
                .flat_map(|&j| cand_rows[j].iter().copied())
                .collect();
            let cands = EmbeddingMatrix::new(dim, data).unwrap();
            let assignment = assign_nearest(&fg, &cands).unwrap();
            let mut groups: Vec<Vec<u32>> = vec![Vec::new(); nc];
            for (r, &slot) in assignment.iter().enumerate() {
                groups[slot as usize].push(r as u32);
            }
            let mut groups: Vec<Vec<u32>> =
                groups.into_iter().filter(|g| !g.is_empty()).collect();
            groups.sort();
            groups
        };

        let identity: Vec<usize> = (0..nc).collect();
        let reversed: Vec<usize> = (0..nc).rev().collect();
        assert_eq!(canonical(&identity), canonical(&reversed));
    }

    #[test]
    fn params_validation() {
        assert!(SegmenterParams::default().validate().is_ok());
        assert!(SegmenterParams {
            merge_radius: 0.0,
            ..SegmenterParams::default()
        }
        .validate()
        .is_err());
        assert!(SegmenterParams {
            score_threshold: 1.5,
            ..SegmenterParams::default()
        }
        .validate()
        .is_err());
        assert!(SegmenterParams {
            k_ratio: 0,
            ..SegmenterParams::default()
        }
        .validate()
        .is_err());
    }
}
