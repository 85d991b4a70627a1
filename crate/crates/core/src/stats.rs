//! Scene statistics: per-class point counts, building category and height
//! histograms, long-tail orderings, and inter-scene correlations.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use crate::model::{
    classify_height, AnnotatedPointCloud, BuildingCategory, UrbanClass, NO_INSTANCE,
};
use crate::{Error, Result};

/// Aggregate counts for one scene.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SceneSummary {
    pub name: String,
    /// Point counts indexed by [`UrbanClass`] code.
    pub points_by_class: [u64; 7],
    pub total_points: u64,
    /// Building instance counts indexed by [`BuildingCategory::LABELED`].
    pub buildings_by_category: [u64; 7],
    /// Buildings whose function could not be determined; excluded from the
    /// category vector.
    pub unlabeled_buildings: u64,
    /// Building instance counts indexed by [`HeightClass`] code.
    pub buildings_by_height: [u64; 3],
    pub total_buildings: u64,
    #[cfg_attr(feature = "serde", serde(default))]
    pub area_m2: Option<f64>,
}

impl SceneSummary {
    /// A summary carrying only building-category counts, as published
    /// dataset tables provide them.
    pub fn from_category_counts(name: &str, counts: [u64; 7]) -> Self {
        SceneSummary {
            name: String::from(name),
            points_by_class: [0; 7],
            total_points: 0,
            buildings_by_category: counts,
            unlabeled_buildings: 0,
            buildings_by_height: [0; 3],
            total_buildings: counts.iter().sum(),
            area_m2: None,
        }
    }
}

/// Tally a scene: per-class point counts plus per-category and per-height
/// building counts. A building's height is its vertical point extent.
pub fn summarize(cloud: &AnnotatedPointCloud, name: &str) -> SceneSummary {
    let mut points_by_class = [0u64; 7];
    for &class in cloud.semantic() {
        points_by_class[class.code() as usize] += 1;
    }

    struct InstanceAgg {
        min_z: f64,
        max_z: f64,
        votes: BTreeMap<u8, u64>,
    }
    let mut instances: BTreeMap<u32, InstanceAgg> = BTreeMap::new();
    for (i, &id) in cloud.instance().iter().enumerate() {
        if id == NO_INSTANCE {
            continue;
        }
        let z = cloud.positions()[i].z;
        let cat = cloud.category()[i].code();
        let agg = instances.entry(id).or_insert(InstanceAgg {
            min_z: z,
            max_z: z,
            votes: BTreeMap::new(),
        });
        agg.min_z = agg.min_z.min(z);
        agg.max_z = agg.max_z.max(z);
        *agg.votes.entry(cat).or_insert(0) += 1;
    }

    let mut buildings_by_category = [0u64; 7];
    let mut unlabeled_buildings = 0u64;
    let mut buildings_by_height = [0u64; 3];
    let total_buildings = instances.len() as u64;
    for agg in instances.values() {
        // Majority category, ties to the lowest code.
        let (&code, _) = agg
            .votes
            .iter()
            .max_by_key(|(&code, &count)| (count, core::cmp::Reverse(code)))
            .expect("instances are non-empty");
        match BuildingCategory::from_code(code) {
            Some(BuildingCategory::Unlabeled) | None => unlabeled_buildings += 1,
            Some(cat) => buildings_by_category[cat.code() as usize] += 1,
        }
        let extent = (agg.max_z - agg.min_z).max(0.0);
        if let Ok(hc) = classify_height(extent) {
            buildings_by_height[hc.code() as usize] += 1;
        }
    }

    SceneSummary {
        name: String::from(name),
        points_by_class,
        total_points: cloud.len() as u64,
        buildings_by_category,
        unlabeled_buildings,
        buildings_by_height,
        total_buildings,
        area_m2: None,
    }
}

/// Urban classes ordered by descending point count, ties by class code.
pub fn long_tail(summary: &SceneSummary) -> Vec<(UrbanClass, u64)> {
    let mut out: Vec<(UrbanClass, u64)> = UrbanClass::ALL
        .iter()
        .map(|&c| (c, summary.points_by_class[c.code() as usize]))
        .collect();
    out.sort_by_key(|&(class, count)| (core::cmp::Reverse(count), class.code()));
    out
}

/// Pearson correlation of the two scenes' building-category count vectors.
pub fn scene_correlation(a: &SceneSummary, b: &SceneSummary) -> Result<f64> {
    pearson(&a.buildings_by_category, &b.buildings_by_category)
}

fn pearson(xs: &[u64; 7], ys: &[u64; 7]) -> Result<f64> {
    let n = xs.len() as f64;
    let mean = |v: &[u64; 7]| v.iter().sum::<u64>() as f64 / n;
    let (mx, my) = (mean(xs), mean(ys));
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        let dx = x as f64 - mx;
        let dy = y as f64 - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::ZeroVariance);
    }
    Ok((sxy / libm::sqrt(sxx * syy)).clamp(-1.0, 1.0))
}

/// Full pairwise correlation matrix over scenes, in input order. Every
/// scene must have building-category variance, or the whole matrix is
/// undefined (a scene correlates with itself at exactly 1 only then).
pub fn correlation_matrix(summaries: &[SceneSummary]) -> Result<Vec<Vec<f64>>> {
    for s in summaries {
        scene_correlation(s, s)?;
    }
    let n = summaries.len();
    let mut out = alloc::vec![alloc::vec![1.0; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let r = scene_correlation(&summaries[i], &summaries[j])?;
            out[i][j] = r;
            out[j][i] = r;
        }
    }
    Ok(out)
}
