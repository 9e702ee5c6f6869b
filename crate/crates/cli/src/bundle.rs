//! Versioned model bundle: JSON with base64-encoded little-endian f64 matrix
//! blobs, shape metadata, and a content checksum. Save/load/predict round
//! trips bit-identically.

use anyhow::{bail, Context, Result};
use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use mmfl_core::types::model::FitDiagnostics;
use mmfl_core::{
    FeatureScaling, FissionModel, FitConfig, Structure, StructureSpecFile, TaskKind,
};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const FORMAT_VERSION: u32 = 1;

/// Dense matrix as shape metadata plus a base64 blob of little-endian f64
/// values in column-major order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatrixBlob {
    pub rows: usize,
    pub cols: usize,
    pub data: String,
}

impl MatrixBlob {
    pub fn from_matrix(m: &DMatrix<f64>) -> Self {
        let mut bytes = Vec::with_capacity(m.len() * 8);
        for v in m.iter() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        Self {
            rows: m.nrows(),
            cols: m.ncols(),
            data: BASE64.encode(bytes),
        }
    }

    pub fn from_vector(v: &DVector<f64>) -> Self {
        Self::from_matrix(&DMatrix::from_column_slice(v.len(), 1, v.as_slice()))
    }

    pub fn to_matrix(&self) -> Result<DMatrix<f64>> {
        let bytes = BASE64.decode(&self.data).context("invalid base64 blob")?;
        if bytes.len() != self.rows * self.cols * 8 {
            bail!(
                "blob has {} bytes, expected {} for a {}x{} matrix",
                bytes.len(),
                self.rows * self.cols * 8,
                self.rows,
                self.cols
            );
        }
        let values: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        Ok(DMatrix::from_column_slice(self.rows, self.cols, &values))
    }

    pub fn to_vector(&self) -> Result<DVector<f64>> {
        let m = self.to_matrix()?;
        if m.ncols() != 1 {
            bail!("blob is {}x{}, expected a column vector", m.nrows(), m.ncols());
        }
        Ok(DVector::from_column_slice(m.as_slice()))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LabelCodecJson {
    pub negative: f64,
    pub positive: f64,
}

/// Serialized model: parameters, spec, configuration, scaling, diagnostics.
///
/// The training-sample latent matrix may be omitted to keep bundles small;
/// prediction never needs it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelBundle {
    pub format_version: u32,
    pub task: TaskKind,
    pub modalities: Vec<String>,
    pub feature_dims: Vec<usize>,
    pub spec: StructureSpecFile,
    pub lambda: f64,
    pub gamma: f64,
    pub mu: f64,
    pub epsilon: f64,
    pub max_iter: usize,
    pub outer_max_iter: usize,
    pub seed: u64,
    pub intercept: f64,
    pub coef: MatrixBlob,
    pub loadings: MatrixBlob,
    #[serde(default)]
    pub latent: Option<MatrixBlob>,
    pub scaling_center: MatrixBlob,
    pub scaling_scale: MatrixBlob,
    #[serde(default)]
    pub label_codec: Option<LabelCodecJson>,
    /// Youden cutoff estimated on training scores (classification only).
    #[serde(default)]
    pub threshold: Option<f64>,
    pub converged: bool,
    pub iterations: usize,
    #[serde(default)]
    pub outer_iterations: Option<usize>,
    pub checksum: String,
}

fn checksum_of(bundle: &ModelBundle) -> Result<String> {
    let mut copy = bundle.clone();
    copy.checksum = String::new();
    let canonical = serde_json::to_vec(&copy)?;
    let digest = Sha256::digest(&canonical);
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

impl ModelBundle {
    pub fn from_model(
        model: &FissionModel<f64>,
        modality_names: &[String],
        threshold: Option<f64>,
        include_latent: bool,
    ) -> Result<Self> {
        let spec = StructureSpecFile::from_spec(&model.structure.spec, modality_names)
            .context("rendering spec with modality names")?;
        let feature_dims = model
            .structure
            .mask
            .modality_rows()
            .iter()
            .map(|r| r.len())
            .collect();
        let mut bundle = Self {
            format_version: FORMAT_VERSION,
            task: model.config.task,
            modalities: modality_names.to_vec(),
            feature_dims,
            spec,
            lambda: model.config.lambda,
            gamma: model.config.gamma,
            mu: model.config.mu,
            epsilon: model.config.epsilon,
            max_iter: model.config.max_iter,
            outer_max_iter: model.config.outer_max_iter,
            seed: model.config.seed,
            intercept: model.intercept,
            coef: MatrixBlob::from_vector(&model.coef),
            loadings: MatrixBlob::from_matrix(&model.loadings),
            latent: include_latent.then(|| MatrixBlob::from_matrix(&model.latent)),
            scaling_center: MatrixBlob::from_vector(&model.scaling.center),
            scaling_scale: MatrixBlob::from_vector(&model.scaling.scale),
            label_codec: model.label_codec.map(|c| LabelCodecJson {
                negative: c.negative,
                positive: c.positive,
            }),
            threshold,
            converged: model.diagnostics.converged,
            iterations: model.diagnostics.iterations,
            outer_iterations: model.diagnostics.outer_iterations,
            checksum: String::new(),
        };
        bundle.checksum = checksum_of(&bundle)?;
        Ok(bundle)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let bundle: Self = serde_json::from_str(json).context("parsing model bundle")?;
        if bundle.format_version != FORMAT_VERSION {
            bail!(
                "model bundle format version {} is not supported (expected {FORMAT_VERSION})",
                bundle.format_version
            );
        }
        let expected = checksum_of(&bundle)?;
        if expected != bundle.checksum {
            bail!("model bundle checksum mismatch; the file is corrupt or was edited");
        }
        Ok(bundle)
    }

    /// Reconstructs the in-memory model (with an empty latent matrix when it
    /// was omitted from the bundle).
    pub fn to_model(&self) -> Result<FissionModel<f64>> {
        let spec = self.spec.resolve().context("resolving bundle spec")?;
        let structure = Structure::new(spec, &self.feature_dims)
            .context("rebinding bundle spec to feature dims")?;
        let coef = self.coef.to_vector()?;
        let loadings = self.loadings.to_matrix()?;
        let latent = match &self.latent {
            Some(blob) => blob.to_matrix()?,
            None => DMatrix::zeros(0, coef.len()),
        };
        let scaling = FeatureScaling {
            center: self.scaling_center.to_vector()?,
            scale: self.scaling_scale.to_vector()?,
        };
        if scaling.center.len() != loadings.nrows() || scaling.scale.len() != loadings.nrows() {
            bail!("bundle scaling length does not match the loading rows");
        }
        let config = FitConfig {
            lambda: self.lambda,
            gamma: self.gamma,
            mu: self.mu,
            epsilon: self.epsilon,
            max_iter: self.max_iter,
            outer_max_iter: self.outer_max_iter,
            task: self.task,
            seed: self.seed,
        };
        config.validate().context("bundle fit configuration")?;
        Ok(FissionModel {
            latent,
            loadings,
            coef,
            intercept: self.intercept,
            dual: None,
            slack: None,
            structure,
            config,
            scaling,
            label_codec: self.label_codec.as_ref().map(|c| mmfl_core::LabelCodec {
                negative: c.negative,
                positive: c.positive,
            }),
            diagnostics: FitDiagnostics {
                converged: self.converged,
                iterations: self.iterations,
                objective_history: Vec::new(),
                outer_iterations: self.outer_iterations,
                outer_objective_history: Vec::new(),
            },
        })
    }
}
