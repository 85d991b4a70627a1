//! Pipeline configuration: a versioned flat key-value (TOML) file plus the
//! CLI flags that override it.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use urbanseg_core::features::{NoiseParams, OracleProvider};
use urbanseg_core::metrics::ApRange;
use urbanseg_core::segmenter::{CandidateStart, SegmenterParams};

use crate::error::CliError;

/// Environment variable naming a default config file.
pub const CONFIG_ENV: &str = "URBANSEG_CONFIG";

pub const DEFAULT_VOXEL_EDGE: f64 = 1.0 / 3.0;

/// Which feature provider feeds the segmenter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderSpec {
    /// Ground-truth oracle with the configured noise dials.
    Oracle,
    /// Per-point features exported by an external network.
    File(PathBuf),
}

impl ProviderSpec {
    /// Parse the CLI form: `oracle` or `file:PATH`.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        if text == "oracle" {
            return Ok(ProviderSpec::Oracle);
        }
        if let Some(path) = text.strip_prefix("file:") {
            if path.is_empty() {
                return Err(CliError::Validation(
                    "`--features file:` needs a path".to_string(),
                ));
            }
            return Ok(ProviderSpec::File(PathBuf::from(path)));
        }
        Err(CliError::Validation(format!(
            "unknown features provider `{text}`; use `oracle` or `file:PATH`"
        )))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ScorerKind {
    #[default]
    Coverage,
    GroundTruth,
}

/// Every tunable of the pipeline with its default value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub version: u32,
    pub features: String,
    pub embedding_dim: usize,
    pub noise_embedding: f64,
    pub noise_offset: f64,
    pub noise_semantic: f64,
    pub seed: u64,
    pub k_ratio: usize,
    pub k_max: usize,
    pub merge_radius: f64,
    pub score_threshold: f64,
    pub max_points: usize,
    pub voxel_edge: f64,
    pub voxel_downsample: bool,
    pub scorer: ScorerKind,
    pub ap_range: String,
    /// Worker threads; 0 means available parallelism.
    pub threads: usize,
    /// Mesh sampling density, points per square meter.
    pub density: f64,
    pub fps_start: String,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            version: 1,
            features: "oracle".to_string(),
            embedding_dim: 16,
            noise_embedding: 0.0,
            noise_offset: 0.0,
            noise_semantic: 0.0,
            seed: 0,
            k_ratio: 3000,
            k_max: 100,
            merge_radius: 1.0,
            score_threshold: 0.1,
            max_points: 500_000,
            voxel_edge: DEFAULT_VOXEL_EDGE,
            voxel_downsample: false,
            scorer: ScorerKind::Coverage,
            ap_range: "25-95".to_string(),
            threads: 0,
            density: 80.0,
            fps_start: "min-coord".to_string(),
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let config: PipelineConfig = toml::from_str(&text)
            .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
        if config.version != 1 {
            return Err(CliError::Validation(format!(
                "{}: unsupported config version {}",
                path.display(),
                config.version
            )));
        }
        config.validate()?;
        Ok(config)
    }

    /// Load from `--config`, else from `URBANSEG_CONFIG`, else defaults.
    pub fn load_default(explicit: Option<&Path>) -> Result<Self, CliError> {
        if let Some(path) = explicit {
            return Self::load(path);
        }
        if let Ok(path) = std::env::var(CONFIG_ENV) {
            if !path.is_empty() {
                return Self::load(Path::new(&path));
            }
        }
        Ok(Self::default())
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let positive = [
            ("k_ratio", self.k_ratio as f64),
            ("k_max", self.k_max as f64),
            ("merge_radius", self.merge_radius),
            ("max_points", self.max_points as f64),
            ("voxel_edge", self.voxel_edge),
            ("embedding_dim", self.embedding_dim as f64),
            ("density", self.density),
        ];
        for (name, value) in positive {
            if !value.is_finite() || value <= 0.0 {
                return Err(CliError::Validation(format!("{name} must be positive")));
            }
        }
        if !(0.0..=1.0).contains(&self.score_threshold) {
            return Err(CliError::Validation(
                "score_threshold must be in [0, 1]".to_string(),
            ));
        }
        for (name, value) in [
            ("noise_embedding", self.noise_embedding),
            ("noise_offset", self.noise_offset),
        ] {
            if value < 0.0 {
                return Err(CliError::Validation(format!("{name} must be non-negative")));
            }
        }
        if !(0.0..=1.0).contains(&self.noise_semantic) {
            return Err(CliError::Validation(
                "noise_semantic must be in [0, 1]".to_string(),
            ));
        }
        ProviderSpec::parse(&self.features)?;
        self.parse_ap_range()?;
        self.candidate_start()?;
        Ok(())
    }

    pub fn provider_spec(&self) -> Result<ProviderSpec, CliError> {
        ProviderSpec::parse(&self.features)
    }

    pub fn noise(&self) -> NoiseParams {
        NoiseParams {
            embedding_sigma: self.noise_embedding,
            offset_sigma: self.noise_offset,
            semantic_flip: self.noise_semantic,
        }
    }

    pub fn oracle(&self) -> Result<OracleProvider, CliError> {
        Ok(OracleProvider::new(self.embedding_dim, self.noise(), self.seed)?)
    }

    pub fn candidate_start(&self) -> Result<CandidateStart, CliError> {
        match self.fps_start.as_str() {
            "min-coord" => Ok(CandidateStart::MinCoord),
            "seeded" => Ok(CandidateStart::Seeded(self.seed)),
            other => Err(CliError::Validation(format!(
                "unknown fps_start `{other}`; use `min-coord` or `seeded`"
            ))),
        }
    }

    pub fn segmenter_params(&self) -> Result<SegmenterParams, CliError> {
        let params = SegmenterParams {
            k_ratio: self.k_ratio,
            k_max: self.k_max,
            merge_radius: self.merge_radius,
            score_threshold: self.score_threshold,
            candidate_start: self.candidate_start()?,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn parse_ap_range(&self) -> Result<ApRange, CliError> {
        match self.ap_range.as_str() {
            "25-95" => Ok(ApRange::From25),
            "50-95" => Ok(ApRange::From50),
            other => Err(CliError::Validation(format!(
                "unknown ap_range `{other}`; use `25-95` or `50-95`"
            ))),
        }
    }
}
