//! Subcommand implementations.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Deserialize;

use mmfl_core::eval::{
    accuracy_at, roc_auc, run_benchmark, youden_threshold, BenchmarkScenario, EvalReport,
};
use mmfl_core::rank::{
    loading_profile_of, select_ranks_incremental, select_ranks_sequential, RankSearchConfig,
    SearchMetric, SearchStrategy,
};
use mmfl_core::sim::{generate, mask_training_rows, SimulationConfig};
use mmfl_core::solver::{fit_classification, fit_incomplete, fit_regression};
use mmfl_core::{
    validate_dataset, FitConfig, MultiModalDataset, StructureSpecFile, TaskKind,
};

use crate::bundle::ModelBundle;
use crate::io::{self, fmt_float};

/// Effective fit settings: defaults, overridden by a config file, overridden
/// by flags.
#[derive(Debug, Clone, Copy, Default)]
pub struct FitOverrides {
    pub lambda: Option<f64>,
    pub gamma: Option<f64>,
    pub mu: Option<f64>,
    pub epsilon: Option<f64>,
    pub max_iter: Option<usize>,
    pub outer_max_iter: Option<usize>,
    pub task: Option<TaskKind>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfigFile {
    pub lambda: Option<f64>,
    pub gamma: Option<f64>,
    pub mu: Option<f64>,
    pub epsilon: Option<f64>,
    pub max_iter: Option<usize>,
    pub outer_max_iter: Option<usize>,
    pub task: Option<TaskKind>,
    pub seed: Option<u64>,
}

pub fn effective_fit_config(
    config_path: Option<&Path>,
    overrides: &FitOverrides,
) -> Result<FitConfig<f64>> {
    let file: FitConfigFile = match config_path {
        Some(path) => serde_json::from_str(
            &std::fs::read_to_string(path)
                .with_context(|| format!("reading config file {}", path.display()))?,
        )
        .with_context(|| format!("parsing config file {}", path.display()))?,
        None => FitConfigFile::default(),
    };
    let defaults = FitConfig::<f64>::default();
    let config = FitConfig {
        lambda: overrides.lambda.or(file.lambda).unwrap_or(defaults.lambda),
        gamma: overrides.gamma.or(file.gamma).unwrap_or(defaults.gamma),
        mu: overrides.mu.or(file.mu).unwrap_or(defaults.mu),
        epsilon: overrides.epsilon.or(file.epsilon).unwrap_or(defaults.epsilon),
        max_iter: overrides.max_iter.or(file.max_iter).unwrap_or(defaults.max_iter),
        outer_max_iter: overrides
            .outer_max_iter
            .or(file.outer_max_iter)
            .unwrap_or(defaults.outer_max_iter),
        task: overrides.task.or(file.task).unwrap_or(defaults.task),
        seed: overrides.seed.or(file.seed).unwrap_or(defaults.seed),
    };
    config
        .validate()
        .map_err(|e| anyhow::anyhow!("invalid fit configuration: {e}"))?;
    Ok(config)
}

pub fn config_json(config: &FitConfig<f64>) -> serde_json::Value {
    serde_json::json!({
        "lambda": config.lambda,
        "gamma": config.gamma,
        "mu": config.mu,
        "epsilon": config.epsilon,
        "max_iter": config.max_iter,
        "outer_max_iter": config.outer_max_iter,
        "task": config.task.to_string(),
        "seed": config.seed,
    })
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimulateFile {
    n_train: usize,
    n_test: usize,
    modality_dims: Vec<usize>,
    spec: StructureSpecFile,
    delta: f64,
    snr_per_modality: Vec<f64>,
    #[serde(default)]
    train_missing_rates: Option<Vec<f64>>,
    #[serde(default)]
    seed: Option<u64>,
}

pub fn cmd_simulate(config_path: &Path, out_dir: &Path, seed_flag: Option<u64>) -> Result<()> {
    let text = std::fs::read_to_string(config_path)
        .with_context(|| format!("reading simulation config {}", config_path.display()))?;
    let file: SimulateFile = serde_json::from_str(&text)
        .with_context(|| format!("parsing simulation config {}", config_path.display()))?;
    let seed = seed_flag
        .or(file.seed)
        .context("missing key: 'seed' (provide it in the config file or with --seed)")?;
    let names = file.spec.modalities.clone();
    let spec = file.spec.resolve()?;
    let m = file.modality_dims.len();
    let config = SimulationConfig {
        n_train: file.n_train,
        n_test: file.n_test,
        modality_dims: file.modality_dims,
        spec,
        delta: file.delta,
        snr_per_modality: file.snr_per_modality,
        train_missing_rates: file.train_missing_rates.unwrap_or_else(|| vec![0.0; m]),
        seed,
    };
    config.validate()?;

    let (train, test, truth) = generate(&config)?;
    let masked_train = mask_training_rows(
        &train,
        &config.train_missing_rates,
        mmfl_core::rng::derive_seed(seed, 1),
    )?;

    let train_ids: Vec<String> = (0..train.n()).map(|i| format!("train{i:05}")).collect();
    let test_ids: Vec<String> = (0..test.n()).map(|i| format!("test{i:05}")).collect();
    let mut outputs = Vec::new();

    for (k, name) in names.iter().enumerate() {
        let feature_names: Vec<String> = (0..masked_train.modality(k).ncols())
            .map(|j| format!("f{j:04}"))
            .collect();
        let train_path = out_dir.join("train").join(format!("{name}.csv"));
        io::write_modality(&train_path, &train_ids, &feature_names, masked_train.modality(k))?;
        outputs.push(train_path);
        let test_path = out_dir.join("test").join(format!("{name}.csv"));
        io::write_modality(&test_path, &test_ids, &feature_names, test.modality(k))?;
        outputs.push(test_path);
    }

    let train_labels = out_dir.join("train").join("labels.csv");
    io::write_labels(&train_labels, &train_ids, &masked_train.labels().originals())?;
    outputs.push(train_labels);
    let test_labels = out_dir.join("test").join("labels.csv");
    io::write_labels(&test_labels, &test_ids, &test.labels().originals())?;
    outputs.push(test_labels);

    let availability_path = out_dir.join("train").join("availability.csv");
    io::write_availability(
        &availability_path,
        &train_ids,
        &names,
        masked_train.availability(),
    )?;
    outputs.push(availability_path);

    let spec_path = out_dir.join("spec.json");
    let spec_file = StructureSpecFile::from_spec(&config.spec, &names)?;
    io::write_atomic(&spec_path, serde_json::to_string_pretty(&spec_file)?.as_bytes())?;
    outputs.push(spec_path);

    let truth_path = out_dir.join("ground_truth.json");
    let truth_json = serde_json::json!({
        "seed": seed,
        "delta": config.delta,
        "snr_per_modality": config.snr_per_modality,
        "noise_sd": truth.noise_sd,
        "latent": crate::bundle::MatrixBlob::from_matrix(&truth.latent),
        "loadings": crate::bundle::MatrixBlob::from_matrix(&truth.loadings),
        "signal": crate::bundle::MatrixBlob::from_matrix(&truth.signal),
    });
    io::write_atomic(&truth_path, serde_json::to_string_pretty(&truth_json)?.as_bytes())?;
    outputs.push(truth_path);

    let manifest_path = out_dir.join("manifest.json");
    let effective = serde_json::json!({
        "n_train": config.n_train,
        "n_test": config.n_test,
        "modalities": names,
        "delta": config.delta,
        "snr_per_modality": config.snr_per_modality,
        "train_missing_rates": config.train_missing_rates,
        "seed": seed,
    });
    io::write_manifest(&manifest_path, "simulate", effective, &outputs)?;

    println!("simulate: wrote {} files under {}", outputs.len() + 1, out_dir.display());
    for path in &outputs {
        println!("  {}", path.display());
    }
    println!("  {}", manifest_path.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// dataset loading shared by fit / predict / evaluate / select-ranks
// ---------------------------------------------------------------------------

pub fn load_dataset(
    data_paths: &[PathBuf],
    labels_path: &Path,
    availability_path: Option<&Path>,
    names: &[String],
    task: TaskKind,
) -> Result<MultiModalDataset<f64>> {
    if data_paths.is_empty() {
        bail!("no modality data files given");
    }
    let mut files = Vec::new();
    for path in data_paths {
        files.push(io::read_modality(path)?);
    }
    let files = io::order_by_spec(files, names)?;
    let sample_ids = files[0].sample_ids.clone();
    for file in &files[1..] {
        io::check_sample_ids(&sample_ids, &file.sample_ids, &format!("modality {}", file.name))?;
    }
    let (label_ids, labels) = io::read_labels(labels_path)?;
    io::check_sample_ids(&sample_ids, &label_ids, "labels")?;

    let availability = match availability_path {
        Some(path) => {
            let (avail_ids, avail_names, bits) = io::read_availability(path)?;
            io::check_sample_ids(&sample_ids, &avail_ids, "availability")?;
            if avail_names != names {
                bail!(
                    "availability columns {avail_names:?} do not match the spec modalities {names:?}"
                );
            }
            Some(bits)
        }
        None => None,
    };

    let feature_names: Vec<Vec<String>> = files.iter().map(|f| f.feature_names.clone()).collect();
    let matrices = files.into_iter().map(|f| f.features).collect();
    let dataset = validate_dataset(matrices, availability, &labels, task)?
        .with_feature_names(feature_names)?;
    Ok(dataset)
}

fn load_spec(path: &Path) -> Result<(StructureSpecFile, Vec<String>)> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading spec {}", path.display()))?;
    let file: StructureSpecFile =
        serde_json::from_str(&text).with_context(|| format!("parsing spec {}", path.display()))?;
    let names = file.modalities.clone();
    Ok((file, names))
}

// ---------------------------------------------------------------------------
// fit
// ---------------------------------------------------------------------------

#[allow(clippy::too_many_arguments)]
pub fn cmd_fit(
    spec_path: &Path,
    data_paths: &[PathBuf],
    labels_path: &Path,
    availability_path: Option<&Path>,
    config_path: Option<&Path>,
    overrides: &FitOverrides,
    out_path: &Path,
    omit_latent: bool,
) -> Result<()> {
    let (spec_file, names) = load_spec(spec_path)?;
    let spec = spec_file.resolve()?;
    let config = effective_fit_config(config_path, overrides)?;
    let data = &load_dataset(data_paths, labels_path, availability_path, &names, config.task)?;

    let incomplete = !data.is_complete();
    let algorithm = if incomplete {
        "Algorithm 2 (incomplete-modality)"
    } else {
        match config.task {
            TaskKind::Classification => "Algorithm 1 (complete-modality)",
            TaskKind::Regression => "Algorithm 1 (complete-modality, regression updates)",
        }
    };

    let model = if incomplete {
        fit_incomplete(data, &spec, &config)
    } else {
        match config.task {
            TaskKind::Classification => fit_classification(data, &spec, &config),
            TaskKind::Regression => fit_regression(data, &spec, &config),
        }
    }?;

    // classification cutoff on training scores through the prediction path
    let threshold = if config.task == TaskKind::Classification {
        let scores: Vec<f64> = model.predict(data)?.iter().copied().collect();
        let labels = data
            .labels()
            .positives()
            .context("classification labels expected")?;
        Some(youden_threshold(&scores, &labels).map_err(|e| anyhow::anyhow!("{e}"))?)
    } else {
        None
    };

    let bundle = ModelBundle::from_model(&model, &names, threshold, !omit_latent)?;
    io::write_atomic(out_path, bundle.to_json()?.as_bytes())?;

    let final_objective = model
        .diagnostics
        .objective_history
        .last()
        .copied()
        .unwrap_or(f64::NAN);
    println!("fit: {algorithm}");
    println!(
        "fit: {} iterations{}; final objective {}",
        model.diagnostics.iterations,
        model
            .diagnostics
            .outer_iterations
            .map(|o| format!(" over {o} outer passes"))
            .unwrap_or_default(),
        fmt_float(final_objective)
    );
    println!(
        "fit: effective config {}",
        serde_json::to_string(&config_json(&config))?
    );
    if !model.diagnostics.converged {
        eprintln!(
            "warning: objective change did not reach epsilon = {} within the iteration caps",
            fmt_float(config.epsilon)
        );
    }
    println!("fit: model written to {}", out_path.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// predict
// ---------------------------------------------------------------------------

pub fn cmd_predict(
    model_path: &Path,
    data_paths: &[PathBuf],
    availability_path: Option<&Path>,
    out_path: &Path,
) -> Result<()> {
    let bundle = ModelBundle::from_json(
        &std::fs::read_to_string(model_path)
            .with_context(|| format!("reading model bundle {}", model_path.display()))?,
    )?;
    let model = bundle.to_model()?;
    let names = bundle.modalities.clone();

    let mut files = Vec::new();
    for path in data_paths {
        files.push(io::read_modality(path)?);
    }
    let files = io::order_by_spec(files, &names)?;
    let sample_ids = files[0].sample_ids.clone();
    for file in &files[1..] {
        io::check_sample_ids(&sample_ids, &file.sample_ids, &format!("modality {}", file.name))?;
    }
    for (file, expected) in files.iter().zip(&bundle.feature_dims) {
        if file.features.ncols() != *expected {
            bail!(
                "modality {:?} has {} features, the model expects {}",
                file.name,
                file.features.ncols(),
                expected
            );
        }
    }
    let availability = match availability_path {
        Some(path) => {
            let (avail_ids, avail_names, bits) = io::read_availability(path)?;
            io::check_sample_ids(&sample_ids, &avail_ids, "availability")?;
            if avail_names != names {
                bail!("availability columns do not match the model's modalities");
            }
            Some(bits)
        }
        None => None,
    };

    let matrices: Vec<nalgebra::DMatrix<f64>> = files.into_iter().map(|f| f.features).collect();
    let scores = model.predict_rows(&matrices, availability.as_deref())?;

    let m = names.len();
    let mut out = String::from("sample_id,score");
    let classify = bundle.threshold.is_some() && bundle.label_codec.is_some();
    if classify {
        out.push_str(",predicted_label");
    }
    out.push_str(",partial\n");
    for (i, id) in sample_ids.iter().enumerate() {
        let observed = (0..m)
            .filter(|&k| availability.as_ref().is_none_or(|a| a[k][i]))
            .count();
        out.push_str(id);
        out.push(',');
        out.push_str(&fmt_float(scores[i]));
        if classify {
            let threshold = bundle.threshold.expect("checked");
            let codec = bundle.label_codec.as_ref().expect("checked");
            let label = if scores[i] >= threshold {
                codec.positive
            } else {
                codec.negative
            };
            out.push(',');
            out.push_str(&fmt_float(label));
        }
        out.push(',');
        out.push(if observed < m { '1' } else { '0' });
        out.push('\n');
    }
    io::write_atomic(out_path, out.as_bytes())?;
    println!(
        "predict: {} samples scored; output written to {}",
        sample_ids.len(),
        out_path.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

pub fn cmd_evaluate(scores_path: &Path, labels_path: &Path, out_path: &Path) -> Result<()> {
    let (score_ids, scores) = io::read_scores(scores_path)?;
    let (label_ids, labels) = io::read_labels(labels_path)?;
    io::check_sample_ids(&score_ids, &label_ids, "labels")?;
    let codec = mmfl_core::LabelCodec::from_values(&labels)
        .map_err(|e| anyhow::anyhow!("{e}"))?;
    let positives: Vec<bool> = labels.iter().map(|&l| l == codec.positive).collect();
    let auc = roc_auc(&scores, &positives).map_err(|e| anyhow::anyhow!("{e}"))?;
    let threshold = youden_threshold(&scores, &positives).map_err(|e| anyhow::anyhow!("{e}"))?;
    let accuracy = accuracy_at(&scores, &positives, threshold);
    let report = serde_json::json!({
        "n": scores.len(),
        "positive_label": codec.positive,
        "negative_label": codec.negative,
        "auc": auc,
        "youden_threshold": threshold,
        "accuracy_at_threshold": accuracy,
    });
    io::write_atomic(out_path, serde_json::to_string_pretty(&report)?.as_bytes())?;
    println!("evaluate: auc={auc:.6} accuracy={accuracy:.6} threshold={threshold:.6}");
    println!("evaluate: report written to {}", out_path.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// select-ranks
// ---------------------------------------------------------------------------

#[allow(clippy::too_many_arguments)]
pub fn cmd_select_ranks(
    spec_path: &Path,
    data_paths: &[PathBuf],
    labels_path: &Path,
    availability_path: Option<&Path>,
    strategy: SearchStrategy,
    metric: SearchMetric,
    folds: usize,
    min_improvement: f64,
    r_max: usize,
    config_path: Option<&Path>,
    overrides: &FitOverrides,
    out_dir: &Path,
) -> Result<()> {
    let (spec_file, names) = load_spec(spec_path)?;
    let candidates = spec_file.resolve()?;
    let mut fit = effective_fit_config(config_path, overrides)?;
    fit.task = match metric {
        SearchMetric::CvAuc => TaskKind::Classification,
        SearchMetric::CvRmse => TaskKind::Regression,
    };
    let dataset = load_dataset(data_paths, labels_path, availability_path, &names, fit.task)?;

    let config = RankSearchConfig {
        strategy,
        block_order: None,
        metric,
        folds,
        min_improvement,
        r_max,
        seed: fit.seed,
        fit,
    };
    let selection = match strategy {
        SearchStrategy::Sequential => select_ranks_sequential(&dataset, &candidates, &config)?,
        SearchStrategy::Incremental => select_ranks_incremental(&dataset, &candidates, &config)?,
    };

    let trace_path = out_dir.join("selection_trace.jsonl");
    let mut trace = String::new();
    for record in &selection.trace {
        trace.push_str(&serde_json::to_string(record)?);
        trace.push('\n');
    }
    io::write_atomic(&trace_path, trace.as_bytes())?;

    let spec_out = out_dir.join("selected_spec.json");
    let selected = StructureSpecFile::from_spec(&selection.spec, &names)?;
    io::write_atomic(&spec_out, serde_json::to_string_pretty(&selected)?.as_bytes())?;

    println!(
        "select-ranks: {} evaluations, selected total rank {}",
        selection.trace.len(),
        selection.spec.total_rank()
    );
    for (block, named) in selection.spec.blocks().iter().zip(&selected.blocks) {
        println!("  {:?} -> rank {}", named.subset, block.rank);
    }
    println!("select-ranks: trace {} / spec {}", trace_path.display(), spec_out.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// profile (loading magnitudes for the top-down rank estimate)
// ---------------------------------------------------------------------------

#[allow(clippy::too_many_arguments)]
pub fn cmd_profile(
    spec_path: &Path,
    data_paths: &[PathBuf],
    labels_path: &Path,
    availability_path: Option<&Path>,
    config_path: Option<&Path>,
    overrides: &FitOverrides,
    out_path: &Path,
) -> Result<()> {
    let (spec_file, names) = load_spec(spec_path)?;
    let spec = spec_file.resolve()?;
    let config = effective_fit_config(config_path, overrides)?;
    let dataset = load_dataset(data_paths, labels_path, availability_path, &names, config.task)?;
    let model = mmfl_core::eval::fit_auto(&dataset, &spec, &config)?;
    let profile = loading_profile_of(&model);

    let mut out = String::from("block,subset,column_in_block,column,mean_abs_loading\n");
    for row in &profile {
        let subset: Vec<String> = row.subset.iter().map(|&k| names[k].clone()).collect();
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            row.block,
            subset.join("|"),
            row.column_in_block,
            row.column,
            fmt_float(row.mean_abs_loading)
        ));
    }
    io::write_atomic(out_path, out.as_bytes())?;
    println!("profile: {} component columns written to {}", profile.len(), out_path.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// benchmark
// ---------------------------------------------------------------------------

pub fn cmd_benchmark(table: u8, reps: usize, seed: u64, out_dir: &Path) -> Result<()> {
    let scenario = match table {
        2 => BenchmarkScenario::CompleteModality,
        3 => BenchmarkScenario::IncompleteModality,
        other => bail!("unknown table {other}; expected 2 or 3"),
    };
    let report = run_benchmark(scenario, reps, seed)?;

    let csv_path = out_dir.join(format!("benchmark_table{table}.csv"));
    let mut out = String::from(
        "model,cohort,reps,auc_mean,auc_sd,accuracy_mean,accuracy_sd,time_mean,time_sd\n",
    );
    let opt = |v: Option<f64>| v.map_or_else(|| "NaN".to_string(), fmt_float);
    for cell in &report.cells {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            cell.model,
            cell.cohort,
            cell.reps,
            fmt_float(cell.auc_mean),
            opt(cell.auc_sd),
            fmt_float(cell.accuracy_mean),
            opt(cell.accuracy_sd),
            fmt_float(cell.time_mean),
            opt(cell.time_sd),
        ));
    }
    io::write_atomic(&csv_path, out.as_bytes())?;

    let json_path = out_dir.join(format!("benchmark_table{table}.json"));
    io::write_atomic(&json_path, serde_json::to_string_pretty(&report)?.as_bytes())?;

    print_report(&report);
    println!("benchmark: table written to {}", csv_path.display());
    println!("benchmark: full report written to {}", json_path.display());
    Ok(())
}

fn print_report(report: &EvalReport) {
    println!(
        "benchmark: scenario={} reps={} seed={} tuned lambda={} gamma={}",
        report.scenario, report.reps, report.seed, report.tuned_lambda, report.tuned_gamma
    );
    for cell in &report.cells {
        println!(
            "  {:<24} {:<10} auc {:.4} ({}) acc {:.4} ({}) time {:.3}s",
            cell.model,
            cell.cohort,
            cell.auc_mean,
            cell.auc_sd.map_or("-".into(), |v| format!("{v:.4}")),
            cell.accuracy_mean,
            cell.accuracy_sd.map_or("-".into(), |v| format!("{v:.4}")),
            cell.time_mean,
        );
    }
    let failures = report.records.iter().filter(|r| r.error.is_some()).count();
    if failures > 0 {
        eprintln!("warning: {failures} replication cells failed; see the JSON report");
    }
}

