//! File-backed feature provider: whole-scene feature channels exported by an
//! external network (see FORMAT.md), gathered per block.

use std::path::{Path, PathBuf};

use urbanseg_core::features::{gather_block_features, FeatureProvider, PointFeatures};
use urbanseg_core::model::AnnotatedPointCloud;
use urbanseg_core::partition::Block;
use urbanseg_core::Error;

use crate::config::ProviderSpec;
use crate::container;
use crate::error::CliError;

pub struct FileProvider {
    path: PathBuf,
    features: PointFeatures,
}

impl FileProvider {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let features = container::read_features_file(path)
            .map_err(|e| CliError::file(path, e))?;
        Ok(FileProvider {
            path: path.to_path_buf(),
            features,
        })
    }

    pub fn features(&self) -> &PointFeatures {
        &self.features
    }
}

impl FeatureProvider for FileProvider {
    fn provide(
        &self,
        cloud: &AnnotatedPointCloud,
        block: &Block,
    ) -> Result<PointFeatures, Error> {
        gather_block_features(&self.features, cloud, block).map_err(|e| match e {
            Error::Provider(msg) => {
                Error::Provider(format!("{}: {msg}", self.path.display()))
            }
            other => other,
        })
    }
}

/// Build the provider a config asks for.
pub fn build_provider(
    spec: &ProviderSpec,
    config: &crate::config::PipelineConfig,
) -> Result<Box<dyn FeatureProvider>, CliError> {
    match spec {
        ProviderSpec::Oracle => Ok(Box::new(config.oracle()?)),
        ProviderSpec::File(path) => Ok(Box::new(FileProvider::load(path)?)),
    }
}
