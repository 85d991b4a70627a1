//! End-to-end pipeline tests on synthetic scenes: exact recovery with the
//! zero-noise oracle, multi-block exactness, and graceful degradation as
//! embedding noise grows.

use urbanseg_core::features::{FeatureProvider, NoiseParams, OracleProvider};
use urbanseg_core::metrics::{ap_summary, ScoredInstance};
use urbanseg_core::model::AnnotatedPointCloud;
use urbanseg_core::partition::{crop_blocks, Block};
use urbanseg_core::segmenter::{
    block_instances, globalize_members, segment_block, CoverageScorer, GroundTruthScorer,
    SegmenterParams,
};
use urbanseg_core::synth::{generate_scene, SynthSpec};

fn segment_whole_scene(
    cloud: &AnnotatedPointCloud,
    provider: &OracleProvider,
    params: &SegmenterParams,
) -> (Vec<ScoredInstance>, Vec<Vec<u32>>) {
    let block = Block::covering(cloud);
    let features = provider.provide(cloud, &block).unwrap();
    let result = segment_block(cloud, &block, &features, &CoverageScorer, params).unwrap();
    let preds = result
        .proposals
        .iter()
        .map(|p| ScoredInstance {
            points: p.members.clone(),
            score: p.score,
        })
        .collect();
    let gts = block_instances(cloud, &block)
        .into_iter()
        .map(|(_, set)| set)
        .collect();
    (preds, gts)
}

#[test]
fn zero_noise_oracle_gives_perfect_ap_on_synthetic_scenes() {
    for (seed, buildings) in [(1u64, 5usize), (2, 12), (3, 40)] {
        let spec = SynthSpec {
            buildings,
            ..SynthSpec::default()
        };
        let cloud = generate_scene(&spec, seed).unwrap();
        let (preds, gts) = segment_whole_scene(
            &cloud,
            &OracleProvider::exact(),
            &SegmenterParams::default(),
        );
        let scores = ap_summary(&preds, &gts);
        assert_eq!(
            (scores.ap, scores.ap50, scores.ap25),
            (1.0, 1.0, 1.0),
            "seed {seed}, {buildings} buildings"
        );
    }
}

#[test]
fn multi_block_segmentation_recovers_block_local_instances() {
    let spec = SynthSpec {
        buildings: 12,
        ..SynthSpec::default()
    };
    let cloud = generate_scene(&spec, 9).unwrap();
    let blocks = crop_blocks(&cloud, cloud.len() / 3, 7).unwrap();
    assert!(blocks.len() >= 3);

    // A generous candidate budget guarantees a candidate in every
    // instance piece a split may produce.
    let params = SegmenterParams {
        k_ratio: 50,
        ..SegmenterParams::default()
    };
    let provider = OracleProvider::exact();

    let mut preds: Vec<ScoredInstance> = Vec::new();
    let mut gts: Vec<Vec<u32>> = Vec::new();
    for block in &blocks {
        let features = provider.provide(&cloud, block).unwrap();
        let result = segment_block(&cloud, block, &features, &CoverageScorer, &params).unwrap();
        preds.extend(result.proposals.iter().map(|p| ScoredInstance {
            points: globalize_members(block, &p.members),
            score: p.score,
        }));
        gts.extend(
            block_instances(&cloud, block)
                .into_iter()
                .map(|(_, set)| globalize_members(block, &set)),
        );
    }
    let scores = ap_summary(&preds, &gts);
    assert_eq!((scores.ap, scores.ap50, scores.ap25), (1.0, 1.0, 1.0));
}

#[test]
fn ground_truth_scorer_gives_unit_scores_on_exact_proposals() {
    let spec = SynthSpec {
        buildings: 8,
        ..SynthSpec::default()
    };
    let cloud = generate_scene(&spec, 21).unwrap();
    let block = Block::covering(&cloud);
    let features = OracleProvider::exact().provide(&cloud, &block).unwrap();
    let result = segment_block(
        &cloud,
        &block,
        &features,
        &GroundTruthScorer,
        &SegmenterParams::default(),
    )
    .unwrap();
    assert_eq!(result.proposals.len(), 8);
    for p in &result.proposals {
        assert_eq!(p.score, 1.0);
    }
}

#[test]
fn ap_degrades_gracefully_with_embedding_noise() {
    let spec = SynthSpec {
        buildings: 15,
        points_per_building: (3300, 3600),
        ..SynthSpec::default()
    };
    let cloud = generate_scene(&spec, 5).unwrap();

    let mean_ap = |sigma: f64| {
        let seeds = [0u64, 1, 2, 3];
        let mut total = 0.0;
        for seed in seeds {
            let provider = OracleProvider::new(
                16,
                NoiseParams {
                    embedding_sigma: sigma,
                    ..NoiseParams::default()
                },
                seed,
            )
            .unwrap();
            let (preds, gts) =
                segment_whole_scene(&cloud, &provider, &SegmenterParams::default());
            total += ap_summary(&preds, &gts).ap;
        }
        total / seeds.len() as f64
    };

    let clean = mean_ap(0.0);
    assert_eq!(clean, 1.0);
    let noisy = mean_ap(0.5);
    assert!(noisy <= clean, "noise should not improve AP: {noisy}");
}
