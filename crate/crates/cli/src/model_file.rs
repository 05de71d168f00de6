//! The trained-model document written by `train` and read by `predict`.

use anyhow::{bail, ensure, Context, Result};
use ndarray::Axis;
use serde::{Deserialize, Serialize};
use tti_core::evaluate::FeaturePipeline;
use tti_core::regress::MODEL_FORMAT_VERSION;
use tti_core::{fit, DesignMatrix, FittedModel, ModelSpec, PredictionCase, Preprocess};

/// Bumped whenever the document layout changes.
pub const MODEL_FILE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    pub case: PredictionCase,
    /// Raw design-matrix columns the model consumes, in order.
    pub features: Vec<String>,
    pub pipeline: FeaturePipeline,
    pub model: FittedModel,
    pub training_rows: usize,
}

impl ModelFile {
    pub fn train(
        matrix: &DesignMatrix,
        case: PredictionCase,
        features: &[String],
        spec: &ModelSpec,
        preprocess: Preprocess,
    ) -> Result<Self> {
        let cols = matrix.column_indexes(features)?;
        let x = matrix.x.select(Axis(1), &cols);
        let (pipeline, z) = FeaturePipeline::fit(x.view(), preprocess)?;
        let model = fit(spec, z.view(), matrix.y.view())?;
        Ok(Self {
            format_version: MODEL_FILE_VERSION,
            case,
            features: features.to_vec(),
            pipeline,
            model,
            training_rows: matrix.n_rows(),
        })
    }

    pub fn predict(&self, matrix: &DesignMatrix) -> Result<ndarray::Array1<f64>> {
        let cols = matrix.column_indexes(&self.features)?;
        let z = self.pipeline.transform(matrix.x.select(Axis(1), &cols).view());
        Ok(self.model.predict(z.view())?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model file serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: serde_json::Value = serde_json::from_str(text).context("model file is not JSON")?;
        let version = raw.get("format_version").and_then(|v| v.as_u64());
        if version != Some(MODEL_FILE_VERSION as u64) {
            bail!(
                "unsupported model file version {version:?} (expected {MODEL_FILE_VERSION}, estimator format {MODEL_FORMAT_VERSION})"
            );
        }
        let file: ModelFile = serde_json::from_value(raw).context("malformed model file")?;
        ensure!(
            file.pipeline.input_width() == file.features.len(),
            "pipeline expects {} inputs but {} features are listed",
            file.pipeline.input_width(),
            file.features.len()
        );
        Ok(file)
    }
}
