//! CSV and JSON file I/O: modality matrices, availability grids, labels,
//! score tables. All writes are atomic (write to a temp file, then rename)
//! so interrupted runs never leave partial outputs; floats are serialized
//! with 17 significant digits.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use nalgebra::DMatrix;

/// Floating-point formatting used in all CSV output.
pub fn fmt_float(v: f64) -> String {
    if v.is_nan() {
        "NaN".to_string()
    } else {
        format!("{v:.16e}")
    }
}

/// Writes `content` to `path` atomically.
pub fn write_atomic(path: &Path, content: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)
                .with_context(|| format!("creating directory {}", parent.display()))?;
        }
    }
    let tmp = path.with_extension(format!(
        "tmp-{}",
        std::process::id()
    ));
    fs::write(&tmp, content).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path)
        .with_context(|| format!("renaming {} to {}", tmp.display(), path.display()))?;
    Ok(())
}

/// One parsed modality file: sample ids in order plus the feature matrix.
pub struct ModalityFile {
    pub name: String,
    pub sample_ids: Vec<String>,
    pub features: DMatrix<f64>,
    pub feature_names: Vec<String>,
}

/// Reads a modality CSV: header `sample_id,<feature...>`, one row per sample.
pub fn read_modality(path: &Path) -> Result<ModalityFile> {
    let name = path
        .file_stem()
        .and_then(|s| s.to_str())
        .context("modality path has no file stem")?
        .to_string();
    let mut reader = csv::Reader::from_path(path)
        .with_context(|| format!("opening modality file {}", path.display()))?;
    let headers = reader.headers()?.clone();
    if headers.is_empty() || headers.get(0) != Some("sample_id") {
        bail!(
            "{}: first header column must be 'sample_id'",
            path.display()
        );
    }
    let feature_names: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
    if feature_names.is_empty() {
        bail!("{}: no feature columns", path.display());
    }
    let mut sample_ids = Vec::new();
    let mut values: Vec<f64> = Vec::new();
    for record in reader.records() {
        let record = record?;
        if record.len() != feature_names.len() + 1 {
            bail!(
                "{}: row {} has {} fields, expected {}",
                path.display(),
                sample_ids.len() + 2,
                record.len(),
                feature_names.len() + 1
            );
        }
        sample_ids.push(record[0].to_string());
        for field in record.iter().skip(1) {
            values.push(
                field
                    .parse::<f64>()
                    .with_context(|| format!("{}: non-numeric value {field:?}", path.display()))?,
            );
        }
    }
    if sample_ids.is_empty() {
        bail!("{}: no data rows", path.display());
    }
    let features = DMatrix::from_row_slice(sample_ids.len(), feature_names.len(), &values);
    Ok(ModalityFile {
        name,
        sample_ids,
        features,
        feature_names,
    })
}

/// Writes a modality CSV.
pub fn write_modality(
    path: &Path,
    sample_ids: &[String],
    feature_names: &[String],
    features: &DMatrix<f64>,
) -> Result<()> {
    let mut out = String::new();
    out.push_str("sample_id");
    for name in feature_names {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for (i, id) in sample_ids.iter().enumerate() {
        out.push_str(id);
        for j in 0..features.ncols() {
            out.push(',');
            out.push_str(&fmt_float(features[(i, j)]));
        }
        out.push('\n');
    }
    write_atomic(path, out.as_bytes())
}

/// Reads a labels CSV: header `sample_id,label`.
pub fn read_labels(path: &Path) -> Result<(Vec<String>, Vec<f64>)> {
    let mut reader = csv::Reader::from_path(path)
        .with_context(|| format!("opening labels file {}", path.display()))?;
    let headers = reader.headers()?.clone();
    if headers.get(0) != Some("sample_id") || headers.get(1) != Some("label") || headers.len() != 2
    {
        bail!("{}: header must be 'sample_id,label'", path.display());
    }
    let mut ids = Vec::new();
    let mut labels = Vec::new();
    for record in reader.records() {
        let record = record?;
        ids.push(record[0].to_string());
        labels.push(
            record[1]
                .parse::<f64>()
                .with_context(|| format!("{}: non-numeric label {:?}", path.display(), &record[1]))?,
        );
    }
    if ids.is_empty() {
        bail!("{}: no data rows", path.display());
    }
    Ok((ids, labels))
}

pub fn write_labels(path: &Path, sample_ids: &[String], labels: &[f64]) -> Result<()> {
    let mut out = String::from("sample_id,label\n");
    for (id, label) in sample_ids.iter().zip(labels) {
        out.push_str(id);
        out.push(',');
        out.push_str(&fmt_float(*label));
        out.push('\n');
    }
    write_atomic(path, out.as_bytes())
}

/// Reads an availability CSV: header `sample_id,<modality...>`, entries 0/1.
/// Returns (sample ids, modality names, bits per modality).
pub fn read_availability(path: &Path) -> Result<(Vec<String>, Vec<String>, Vec<Vec<bool>>)> {
    let mut reader = csv::Reader::from_path(path)
        .with_context(|| format!("opening availability file {}", path.display()))?;
    let headers = reader.headers()?.clone();
    if headers.get(0) != Some("sample_id") || headers.len() < 2 {
        bail!(
            "{}: header must be 'sample_id' followed by one column per modality",
            path.display()
        );
    }
    let modality_names: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
    let mut ids = Vec::new();
    let mut bits: Vec<Vec<bool>> = vec![Vec::new(); modality_names.len()];
    for record in reader.records() {
        let record = record?;
        ids.push(record[0].to_string());
        for (k, field) in record.iter().skip(1).enumerate() {
            let bit = match field.trim() {
                "0" => false,
                "1" => true,
                other => bail!(
                    "{}: availability entries must be 0 or 1, found {other:?}",
                    path.display()
                ),
            };
            bits[k].push(bit);
        }
    }
    if ids.is_empty() {
        bail!("{}: no data rows", path.display());
    }
    Ok((ids, modality_names, bits))
}

pub fn write_availability(
    path: &Path,
    sample_ids: &[String],
    modality_names: &[String],
    availability: &[Vec<bool>],
) -> Result<()> {
    let mut out = String::from("sample_id");
    for name in modality_names {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for (i, id) in sample_ids.iter().enumerate() {
        out.push_str(id);
        for bits in availability {
            out.push(',');
            out.push(if bits[i] { '1' } else { '0' });
        }
        out.push('\n');
    }
    write_atomic(path, out.as_bytes())
}

/// Reads a scores CSV produced by `predict` (or any `sample_id,score,...`).
pub fn read_scores(path: &Path) -> Result<(Vec<String>, Vec<f64>)> {
    let mut reader = csv::Reader::from_path(path)
        .with_context(|| format!("opening scores file {}", path.display()))?;
    let headers = reader.headers()?.clone();
    if headers.get(0) != Some("sample_id") || headers.get(1) != Some("score") {
        bail!("{}: header must start with 'sample_id,score'", path.display());
    }
    let mut ids = Vec::new();
    let mut scores = Vec::new();
    for record in reader.records() {
        let record = record?;
        ids.push(record[0].to_string());
        scores.push(
            record[1]
                .parse::<f64>()
                .with_context(|| format!("{}: non-numeric score {:?}", path.display(), &record[1]))?,
        );
    }
    if ids.is_empty() {
        bail!("{}: no data rows", path.display());
    }
    Ok((ids, scores))
}

/// Checks that every file agrees on the sample-id sequence.
pub fn check_sample_ids(reference: &[String], other: &[String], what: &str) -> Result<()> {
    if reference.len() != other.len() {
        bail!(
            "{what}: {} samples, expected {}",
            other.len(),
            reference.len()
        );
    }
    for (i, (a, b)) in reference.iter().zip(other).enumerate() {
        if a != b {
            bail!("{what}: sample id mismatch at row {} ({a:?} vs {b:?})", i + 1);
        }
    }
    Ok(())
}

/// Resolves `--data` modality files against the spec's modality names by file
/// stem and returns them in spec order.
pub fn order_by_spec(files: Vec<ModalityFile>, names: &[String]) -> Result<Vec<ModalityFile>> {
    let mut ordered = Vec::with_capacity(names.len());
    let mut pool = files;
    for name in names {
        let pos = pool
            .iter()
            .position(|f| &f.name == name)
            .with_context(|| format!("no data file for modality {name:?} (matched by file stem)"))?;
        ordered.push(pool.swap_remove(pos));
    }
    if let Some(extra) = pool.first() {
        bail!("data file {:?} does not match any spec modality", extra.name);
    }
    Ok(ordered)
}

/// A run manifest: effective configuration plus the files written.
pub fn write_manifest(
    path: &Path,
    command: &str,
    effective: serde_json::Value,
    outputs: &[PathBuf],
) -> Result<()> {
    let manifest = serde_json::json!({
        "command": command,
        "effective_config": effective,
        "outputs": outputs.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
    });
    write_atomic(path, serde_json::to_string_pretty(&manifest)?.as_bytes())
}
