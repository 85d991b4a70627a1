//! Scene-level driver: crops a cloud into blocks, runs feature provision and
//! segmentation on a bounded worker pool, and assembles scene-global outputs
//! with per-block timing. Outputs are ordered by block id, so thread count
//! never changes the result.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use urbanseg_core::features::FeatureProvider;
use urbanseg_core::metrics::{evaluate_instances, ApRange, EvalReport, ScoredInstance};
use urbanseg_core::model::{AnnotatedPointCloud, BuildingCategory, NO_INSTANCE};
use urbanseg_core::partition::{crop_blocks, voxelize, Block};
use urbanseg_core::segmenter::{
    globalize_members, segment_block_observed, ProposalScorer, SegmentationResult,
    SegmenterParams, Stage, StageObserver, UNASSIGNED,
};

use crate::config::{PipelineConfig, ScorerKind};
use crate::container::{ProposalRow, ResultFile};
use crate::error::CliError;

/// Wall-clock milliseconds per pipeline stage of one block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct BlockTiming {
    pub block: u32,
    pub points: usize,
    pub proposals: usize,
    pub provide_ms: f64,
    pub select_ms: f64,
    pub assign_ms: f64,
    pub merge_ms: f64,
    pub score_ms: f64,
    pub total_ms: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SceneTiming {
    pub blocks: Vec<BlockTiming>,
    pub total_ms: f64,
    pub threads: usize,
}

struct TimingObserver {
    last: Instant,
    select_ms: f64,
    assign_ms: f64,
    merge_ms: f64,
    score_ms: f64,
}

impl TimingObserver {
    fn new() -> Self {
        TimingObserver {
            last: Instant::now(),
            select_ms: 0.0,
            assign_ms: 0.0,
            merge_ms: 0.0,
            score_ms: 0.0,
        }
    }

    fn lap(&mut self) -> f64 {
        let now = Instant::now();
        let ms = now.duration_since(self.last).as_secs_f64() * 1000.0;
        self.last = now;
        ms
    }
}

impl StageObserver for TimingObserver {
    fn stage_completed(&mut self, stage: Stage) {
        let ms = self.lap();
        match stage {
            Stage::CandidateSelection => self.select_ms = ms,
            Stage::Assignment => self.assign_ms = ms,
            Stage::Merging => self.merge_ms = ms,
            Stage::Scoring => self.score_ms = ms,
        }
    }
}

/// Per-block outcome plus the block it came from.
#[derive(Debug, Clone)]
pub struct BlockOutcome {
    pub block: Block,
    pub result: SegmentationResult,
    pub timing: BlockTiming,
}

#[derive(Debug, Clone)]
pub struct SceneSegmentation {
    pub outcomes: Vec<BlockOutcome>,
    pub timing: SceneTiming,
}

/// Everything the driver needs besides the cloud itself.
pub struct ScenePipeline<'a> {
    pub provider: &'a dyn FeatureProvider,
    pub scorer: &'a dyn ProposalScorer,
    pub params: SegmenterParams,
    pub max_points: usize,
    pub crop_seed: u64,
    /// Worker threads; 0 = available parallelism.
    pub threads: usize,
    /// Voxel edge for optional representative-point downsampling.
    pub voxel_downsample: Option<f64>,
}

impl ScenePipeline<'_> {
    pub fn run(&self, cloud: &AnnotatedPointCloud) -> Result<SceneSegmentation, CliError> {
        let started = Instant::now();
        let blocks = crop_blocks(cloud, self.max_points, self.crop_seed)?;

        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.threads)
            .build()
            .map_err(|e| CliError::Internal(e.to_string()))?;
        let threads = pool.current_num_threads();

        let outcomes: Result<Vec<BlockOutcome>, CliError> = pool.install(|| {
            blocks
                .into_par_iter()
                .map(|block| self.run_block(cloud, block))
                .collect()
        });
        let mut outcomes = outcomes?;
        // Collect preserves input order, which is block-id order; keep the
        // invariant explicit.
        outcomes.sort_by_key(|o| o.block.id());

        let total_ms = started.elapsed().as_secs_f64() * 1000.0;
        let timing = SceneTiming {
            blocks: outcomes.iter().map(|o| o.timing).collect(),
            total_ms,
            threads,
        };
        Ok(SceneSegmentation { outcomes, timing })
    }

    fn run_block(
        &self,
        cloud: &AnnotatedPointCloud,
        block: Block,
    ) -> Result<BlockOutcome, CliError> {
        let block_started = Instant::now();
        match self.voxel_downsample {
            None => {
                let provide_started = Instant::now();
                let features = self.provider.provide(cloud, &block)?;
                let provide_ms = provide_started.elapsed().as_secs_f64() * 1000.0;

                let mut observer = TimingObserver::new();
                let result = segment_block_observed(
                    cloud,
                    &block,
                    &features,
                    self.scorer,
                    &self.params,
                    &mut observer,
                )?;
                Ok(BlockOutcome {
                    timing: BlockTiming {
                        block: block.id(),
                        points: block.len(),
                        proposals: result.proposals.len(),
                        provide_ms,
                        select_ms: observer.select_ms,
                        assign_ms: observer.assign_ms,
                        merge_ms: observer.merge_ms,
                        score_ms: observer.score_ms,
                        total_ms: block_started.elapsed().as_secs_f64() * 1000.0,
                    },
                    block,
                    result,
                })
            }
            Some(edge) => self.run_block_downsampled(cloud, block, edge, block_started),
        }
    }

    /// Segment only one representative point per voxel, then broadcast each
    /// representative's label to every point of its voxel.
    fn run_block_downsampled(
        &self,
        cloud: &AnnotatedPointCloud,
        block: Block,
        edge: f64,
        block_started: Instant,
    ) -> Result<BlockOutcome, CliError> {
        let positions = block.gather_positions(cloud);
        let grid = voxelize(&positions, edge)?;
        let reps = grid.representatives();

        let reduced_indices: Vec<u32> = reps
            .iter()
            .map(|&local| block.indices()[local as usize])
            .collect();
        let reduced = Block::new(block.id(), reduced_indices, cloud)?;

        let provide_started = Instant::now();
        let features = self.provider.provide(cloud, &reduced)?;
        let provide_ms = provide_started.elapsed().as_secs_f64() * 1000.0;

        let mut observer = TimingObserver::new();
        let reduced_result = segment_block_observed(
            cloud,
            &reduced,
            &features,
            self.scorer,
            &self.params,
            &mut observer,
        )?;

        // reps is sorted, so representative block-local index -> reduced row.
        let row_of = |local: u32| reps.binary_search(&local).expect("representative");
        let mut assignment = vec![UNASSIGNED; block.len()];
        for (_, members) in grid.cells() {
            let rep = *members.iter().min().expect("voxels are non-empty");
            let label = reduced_result.assignment[row_of(rep)];
            for &local in members {
                assignment[local as usize] = label;
            }
        }
        let mut proposals = reduced_result.proposals;
        for (pid, proposal) in proposals.iter_mut().enumerate() {
            proposal.members = assignment
                .iter()
                .enumerate()
                .filter(|&(_, &a)| a == pid as u32)
                .map(|(i, _)| i as u32)
                .collect();
        }
        let result = SegmentationResult {
            assignment,
            proposals,
        };
        Ok(BlockOutcome {
            timing: BlockTiming {
                block: block.id(),
                points: block.len(),
                proposals: result.proposals.len(),
                provide_ms,
                select_ms: observer.select_ms,
                assign_ms: observer.assign_ms,
                merge_ms: observer.merge_ms,
                score_ms: observer.score_ms,
                total_ms: block_started.elapsed().as_secs_f64() * 1000.0,
            },
            block,
            result,
        })
    }
}

/// Build a pipeline from a config. The provider and scorer live outside so
/// the borrow can outlive this call.
pub fn pipeline_from_config<'a>(
    config: &PipelineConfig,
    provider: &'a dyn FeatureProvider,
    scorer: &'a dyn ProposalScorer,
) -> Result<ScenePipeline<'a>, CliError> {
    Ok(ScenePipeline {
        provider,
        scorer,
        params: config.segmenter_params()?,
        max_points: config.max_points,
        crop_seed: config.seed,
        threads: config.threads,
        voxel_downsample: config.voxel_downsample.then_some(config.voxel_edge),
    })
}

pub fn build_scorer(kind: ScorerKind) -> Box<dyn ProposalScorer> {
    match kind {
        ScorerKind::Coverage => Box::new(urbanseg_core::segmenter::CoverageScorer),
        ScorerKind::GroundTruth => Box::new(urbanseg_core::segmenter::GroundTruthScorer),
    }
}

impl SceneSegmentation {
    /// Flatten per-block results into scene-global channels and the proposal
    /// table. Proposal ids are global, assigned in block order.
    pub fn to_result_file(&self, n_points: usize) -> ResultFile {
        let mut assignment = vec![UNASSIGNED; n_points];
        let mut block_of = vec![u32::MAX; n_points];
        let mut proposals = Vec::new();
        let mut next_id = 0u32;
        for outcome in &self.outcomes {
            let indices = outcome.block.indices();
            for (local, &global) in indices.iter().enumerate() {
                block_of[global as usize] = outcome.block.id();
                let a = outcome.result.assignment[local];
                if a != UNASSIGNED {
                    assignment[global as usize] = next_id + a;
                }
            }
            for (pid, p) in outcome.result.proposals.iter().enumerate() {
                proposals.push(ProposalRow {
                    id: next_id + pid as u32,
                    block: outcome.block.id(),
                    category: p.category,
                    score: p.score,
                    points: p.members.len() as u64,
                    anchor: p.anchor,
                });
            }
            next_id += outcome.result.proposals.len() as u32;
        }
        ResultFile {
            assignment,
            block_of,
            proposals,
        }
    }

    /// Predictions as scene-global point sets with scores.
    pub fn scored_instances(&self) -> Vec<ScoredInstance> {
        let mut out = Vec::new();
        for outcome in &self.outcomes {
            for p in &outcome.result.proposals {
                out.push(ScoredInstance {
                    points: globalize_members(&outcome.block, &p.members),
                    score: p.score,
                });
            }
        }
        out
    }
}

/// Scope of ground truth during evaluation: whole-scene instances, or
/// instances restricted to the block that processed each point (block-level
/// inference makes no cross-block claims).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EvalScope {
    #[default]
    Scene,
    Block,
}

/// Evaluate a stored result against its ground-truth cloud.
pub fn evaluate_result(
    result: &ResultFile,
    gt: &AnnotatedPointCloud,
    range: ApRange,
    scope: EvalScope,
) -> Result<EvalReport, CliError> {
    if result.assignment.len() != gt.len() {
        return Err(CliError::Validation(format!(
            "result covers {} points but the ground-truth cloud has {}",
            result.assignment.len(),
            gt.len()
        )));
    }

    // Predictions grouped by global proposal id.
    let mut preds: Vec<ScoredInstance> = result
        .proposals
        .iter()
        .map(|p| ScoredInstance {
            points: Vec::new(),
            score: p.score,
        })
        .collect();
    let id_to_slot: std::collections::BTreeMap<u32, usize> = result
        .proposals
        .iter()
        .enumerate()
        .map(|(slot, p)| (p.id, slot))
        .collect();
    for (point, &a) in result.assignment.iter().enumerate() {
        if a == UNASSIGNED {
            continue;
        }
        let slot = id_to_slot.get(&a).ok_or_else(|| {
            CliError::Validation(format!("point {point} references unknown proposal {a}"))
        })?;
        preds[*slot].points.push(point as u32);
    }

    // Ground-truth sets, optionally split at block boundaries.
    let mut gt_sets: std::collections::BTreeMap<(u32, u32), Vec<u32>> =
        std::collections::BTreeMap::new();
    for (point, &id) in gt.instance().iter().enumerate() {
        if id == NO_INSTANCE {
            continue;
        }
        let block = match scope {
            EvalScope::Scene => 0,
            EvalScope::Block => result.block_of[point],
        };
        gt_sets.entry((id, block)).or_default().push(point as u32);
    }
    let gts: Vec<Vec<u32>> = gt_sets.into_values().collect();

    // Per-point category labels.
    let pred_labels: Vec<Option<BuildingCategory>> = result
        .assignment
        .iter()
        .map(|&a| {
            (a != UNASSIGNED)
                .then(|| result.proposals[id_to_slot[&a]].category)
        })
        .collect();
    let gt_labels: Vec<Option<BuildingCategory>> = gt
        .instance()
        .iter()
        .zip(gt.category())
        .map(|(&id, &cat)| (id != NO_INSTANCE).then_some(cat))
        .collect();

    Ok(evaluate_instances(&preds, &gts, &pred_labels, &gt_labels, range)?)
}
