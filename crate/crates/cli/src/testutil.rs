//! Shared helpers for unit tests.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use urbanseg_core::model::{AnnotatedPointCloud, BuildingCategory, UrbanClass, NO_INSTANCE};
use urbanseg_core::Vec3;

pub fn random_cloud(rng: &mut ChaCha8Rng, max_points: usize) -> AnnotatedPointCloud {
    let n = rng.random_range(0..=max_points);
    let mut positions = Vec::with_capacity(n);
    let mut colors = Vec::with_capacity(n);
    let mut semantic = Vec::with_capacity(n);
    let mut instance = Vec::with_capacity(n);
    let mut category = Vec::with_capacity(n);
    for _ in 0..n {
        positions.push(Vec3::new(
            rng.random_range(-1000.0..1000.0),
            rng.random_range(-1000.0..1000.0),
            rng.random_range(-10.0..300.0),
        ));
        colors.push([rng.random(), rng.random(), rng.random()]);
        let class = UrbanClass::ALL[rng.random_range(0..7)];
        semantic.push(class);
        if class == UrbanClass::Building {
            instance.push(rng.random_range(0..50));
            category.push(if rng.random::<f64>() < 0.2 {
                BuildingCategory::Unlabeled
            } else {
                BuildingCategory::LABELED[rng.random_range(0..7)]
            });
        } else {
            instance.push(NO_INSTANCE);
            category.push(BuildingCategory::Unlabeled);
        }
    }
    AnnotatedPointCloud::new(positions, colors, semantic, instance, category).unwrap()
}
