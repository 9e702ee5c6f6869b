//! Synthetic benchmark data: class-conditioned latent components, masked
//! uniform loadings, SNR-calibrated Gaussian noise, and train/test
//! missingness patterns.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::algebra::{apply_mask_in_place, orthogonalize};
use crate::error::{Error, Result};
use crate::rng::rng_for;
use crate::scalar::Real;
use crate::types::config::TaskKind;
use crate::types::dataset::{validate_dataset, MultiModalDataset};
use crate::types::structure::{Structure, StructureSpec};

/// Generator configuration.
///
/// `delta` shifts the class-1 latent distribution (nominal separability);
/// `snr_per_modality[k]` is the target of `||Z_k||_F^2 / (sigma_k^2 n p_k)`
/// (infinite targets produce noiseless modalities); `train_missing_rates[k]`
/// is the probability a training row loses modality `k`.
#[derive(Debug, Clone)]
pub struct SimulationConfig<T: Real> {
    pub n_train: usize,
    pub n_test: usize,
    pub modality_dims: Vec<usize>,
    pub spec: StructureSpec,
    pub delta: T,
    pub snr_per_modality: Vec<f64>,
    pub train_missing_rates: Vec<f64>,
    pub seed: u64,
}

impl<T: Real> SimulationConfig<T> {
    /// The stock benchmark layout: three modalities of 100 features, the full
    /// seven-block family at rank 3 each, 200 training and 200 test samples,
    /// SNR targets (1, 2, 3), no training missingness.
    pub fn standard_benchmark(delta: T, seed: u64) -> Self {
        Self {
            n_train: 200,
            n_test: 200,
            modality_dims: vec![100, 100, 100],
            spec: StructureSpec::full_family(3, 3).expect("three modalities"),
            delta,
            snr_per_modality: vec![1.0, 2.0, 3.0],
            train_missing_rates: vec![0.0, 0.0, 0.0],
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.modality_dims.len();
        if m == 0 {
            return Err(Error::NoModalities);
        }
        if self.spec.modality_count() != m {
            return Err(Error::DimensionMismatch {
                context: format!(
                    "spec covers {} modalities but {} dims were given",
                    self.spec.modality_count(),
                    m
                ),
            });
        }
        if self.snr_per_modality.len() != m {
            return Err(Error::InvalidConfig(format!(
                "snr_per_modality has {} entries for {m} modalities",
                self.snr_per_modality.len()
            )));
        }
        if self.train_missing_rates.len() != m {
            return Err(Error::InvalidConfig(format!(
                "train_missing_rates has {} entries for {m} modalities",
                self.train_missing_rates.len()
            )));
        }
        if self.snr_per_modality.iter().any(|&s| !(s > 0.0)) {
            return Err(Error::InvalidConfig("SNR targets must be > 0".into()));
        }
        if self
            .train_missing_rates
            .iter()
            .any(|&r| !(0.0..1.0).contains(&r))
        {
            return Err(Error::InvalidConfig(
                "missing rates must lie in [0, 1)".into(),
            ));
        }
        if !(self.delta >= T::zero()) {
            return Err(Error::InvalidConfig("delta must be >= 0".into()));
        }
        if self.n_train == 0 || self.n_test == 0 {
            return Err(Error::InvalidConfig(
                "n_train and n_test must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// The generating model behind a simulated dataset.
#[derive(Debug, Clone)]
pub struct GroundTruth<T: Real> {
    /// Orthonormalized latent components, train rows first.
    pub latent: DMatrix<T>,
    /// Masked loadings shared by train and test.
    pub loadings: DMatrix<T>,
    /// Noise-free signal `Z = U Vᵀ`.
    pub signal: DMatrix<T>,
    /// Per-modality noise standard deviation.
    pub noise_sd: Vec<T>,
}

/// Runs the generative pipeline: sample labels Bernoulli(0.5); sample the
/// latent rows uniformly on [0,1) per coordinate, shifted by `delta` for
/// class 1; orthonormalize; sample loadings uniformly on [-1,1) and mask;
/// form `Z = U Vᵀ`; add Gaussian noise with `sigma_k` solving the SNR target
/// per modality. Train and test come from one joint generation (shared
/// loadings and noise calibration) split by row.
pub fn generate<T: Real>(
    config: &SimulationConfig<T>,
) -> Result<(MultiModalDataset<T>, MultiModalDataset<T>, GroundTruth<T>)> {
    config.validate()?;
    let structure = Structure::new(config.spec.clone(), &config.modality_dims)?;
    let mask = &structure.mask;
    let n = config.n_train + config.n_test;
    let p = mask.total_features();
    let r = mask.total_rank();
    if r > n.min(p) {
        return Err(Error::RankTooLarge {
            rank: r,
            limit: n.min(p),
        });
    }

    let mut rng = rng_for(config.seed);

    let labels: Vec<f64> = (0..n)
        .map(|_| f64::from(rng.random::<f64>() < 0.5))
        .collect();

    let mut latent = DMatrix::<T>::zeros(n, r);
    for i in 0..n {
        let shift = if labels[i] == 1.0 { config.delta } else { T::zero() };
        for j in 0..r {
            latent[(i, j)] = T::of(rng.random::<f64>()) + shift;
        }
    }
    let latent = orthogonalize(&latent)?;

    let mut loadings = DMatrix::<T>::zeros(p, r);
    for i in 0..p {
        for j in 0..r {
            loadings[(i, j)] = T::of(2.0 * rng.random::<f64>() - 1.0);
        }
    }
    apply_mask_in_place(&mut loadings, mask)?;

    let signal = &latent * loadings.transpose();

    let mut noise_sd = Vec::with_capacity(config.modality_dims.len());
    for (k, rows) in mask.modality_rows().iter().enumerate() {
        let mut energy = T::zero();
        for j in rows.clone() {
            for i in 0..n {
                let v = signal[(i, j)];
                energy += v * v;
            }
        }
        if energy == T::zero() {
            return Err(Error::ZeroSignal { modality: k });
        }
        let target = config.snr_per_modality[k];
        let sd = if target.is_infinite() {
            T::zero()
        } else {
            (energy / T::of(target * n as f64 * rows.len() as f64)).sqrt()
        };
        noise_sd.push(sd);
    }

    let mut modalities: Vec<DMatrix<T>> = Vec::with_capacity(config.modality_dims.len());
    for (k, rows) in mask.modality_rows().iter().enumerate() {
        let sd = noise_sd[k];
        let mut block = DMatrix::<T>::zeros(n, rows.len());
        for i in 0..n {
            for (j, feature) in rows.clone().enumerate() {
                let noise: f64 = rng.sample(StandardNormal);
                block[(i, j)] = signal[(i, feature)] + sd * T::of(noise);
            }
        }
        modalities.push(block);
    }

    let train_rows: Vec<usize> = (0..config.n_train).collect();
    let test_rows: Vec<usize> = (config.n_train..n).collect();
    let split = |rows: &[usize]| -> Result<MultiModalDataset<T>> {
        let mats: Vec<DMatrix<T>> = modalities
            .iter()
            .map(|x| DMatrix::from_fn(rows.len(), x.ncols(), |i, j| x[(rows[i], j)]))
            .collect();
        let labs: Vec<f64> = rows.iter().map(|&i| labels[i]).collect();
        validate_dataset(mats, None, &labs, TaskKind::Classification)
    };
    let train = split(&train_rows)?;
    let test = split(&test_rows)?;

    Ok((
        train,
        test,
        GroundTruth {
            latent,
            loadings,
            signal,
            noise_sd,
        },
    ))
}

/// Marks training rows unavailable, independently per modality with the given
/// rates. Samples that would lose every modality are redrawn (up to 100
/// times each); values are untouched, masking is metadata only.
pub fn mask_training_rows<T: Real>(
    data: &MultiModalDataset<T>,
    rates: &[f64],
    seed: u64,
) -> Result<MultiModalDataset<T>> {
    if rates.len() != data.modality_count() {
        return Err(Error::InvalidConfig(format!(
            "{} masking rates for {} modalities",
            rates.len(),
            data.modality_count()
        )));
    }
    if rates.iter().any(|&r| !(0.0..1.0).contains(&r)) {
        return Err(Error::InvalidConfig(
            "missing rates must lie in [0, 1)".into(),
        ));
    }
    let mut rng = rng_for(seed);
    let m = data.modality_count();
    let n = data.n();
    let mut availability = vec![vec![true; n]; m];
    const ATTEMPTS: usize = 100;
    for i in 0..n {
        let mut done = false;
        for _ in 0..ATTEMPTS {
            let bits: Vec<bool> = rates.iter().map(|&r| !(rng.random::<f64>() < r)).collect();
            if bits.iter().any(|&b| b) {
                for k in 0..m {
                    availability[k][i] = bits[k];
                }
                done = true;
                break;
            }
        }
        if !done {
            return Err(Error::MaskingInfeasible {
                sample: i,
                attempts: ATTEMPTS,
            });
        }
    }
    data.with_availability(availability)
}

/// One test cohort per modality subset: all samples keep only the subset's
/// modalities marked available (labels and sample order are shared).
pub fn build_test_cohorts<T: Real>(
    test: &MultiModalDataset<T>,
    subsets: &[Vec<usize>],
) -> Result<Vec<MultiModalDataset<T>>> {
    let mut cohorts = Vec::with_capacity(subsets.len());
    for subset in subsets {
        if subset.is_empty() {
            return Err(Error::EmptySubset);
        }
        for &k in subset {
            if k >= test.modality_count() {
                return Err(Error::SubsetOutOfRange {
                    index: k,
                    modalities: test.modality_count(),
                });
            }
        }
        let availability: Vec<Vec<bool>> = (0..test.modality_count())
            .map(|k| vec![subset.contains(&k); test.n()])
            .collect();
        cohorts.push(test.with_availability(availability)?);
    }
    Ok(cohorts)
}
