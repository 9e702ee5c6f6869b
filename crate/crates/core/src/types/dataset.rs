//! Multi-modal dataset container and validation.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::types::config::TaskKind;

/// Mapping between the two original class label values and the internal
/// {-1, +1} coding. The smaller original value maps to -1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabelCodec {
    pub negative: f64,
    pub positive: f64,
}

impl LabelCodec {
    /// Derives the codec from raw labels; errors unless exactly two distinct
    /// values are present.
    pub fn from_values(labels: &[f64]) -> Result<Self> {
        let mut distinct: Vec<f64> = Vec::new();
        for &v in labels {
            if !distinct.contains(&v) {
                distinct.push(v);
            }
        }
        if distinct.len() != 2 {
            return Err(Error::NonBinaryLabels {
                found: distinct.len(),
            });
        }
        distinct.sort_by(|a, b| a.partial_cmp(b).expect("finite labels"));
        Ok(Self {
            negative: distinct[0],
            positive: distinct[1],
        })
    }

    /// Original value -> -1/+1.
    pub fn encode(&self, value: f64) -> Result<f64> {
        if value == self.negative {
            Ok(-1.0)
        } else if value == self.positive {
            Ok(1.0)
        } else {
            Err(Error::InvalidConfig(format!(
                "label {value} is not one of the training classes ({}, {})",
                self.negative, self.positive
            )))
        }
    }

    /// Signed internal value -> original vocabulary.
    pub fn decode(&self, signed: f64) -> f64 {
        if signed >= 0.0 {
            self.positive
        } else {
            self.negative
        }
    }
}

/// Labels after validation: binary labels are recoded to {-1, +1} internally
/// while the codec retains the original vocabulary for I/O.
#[derive(Debug, Clone)]
pub enum LabelData<T: Real> {
    Binary {
        encoded: DVector<T>,
        codec: LabelCodec,
    },
    Continuous(DVector<T>),
}

impl<T: Real> LabelData<T> {
    pub fn len(&self) -> usize {
        match self {
            LabelData::Binary { encoded, .. } => encoded.len(),
            LabelData::Continuous(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// The numeric target the solvers consume (+-1 or the raw response).
    pub fn targets(&self) -> &DVector<T> {
        match self {
            LabelData::Binary { encoded, .. } => encoded,
            LabelData::Continuous(v) => v,
        }
    }

    pub fn task(&self) -> TaskKind {
        match self {
            LabelData::Binary { .. } => TaskKind::Classification,
            LabelData::Continuous(_) => TaskKind::Regression,
        }
    }

    pub fn codec(&self) -> Option<&LabelCodec> {
        match self {
            LabelData::Binary { codec, .. } => Some(codec),
            LabelData::Continuous(_) => None,
        }
    }

    /// Labels in the original vocabulary.
    pub fn originals(&self) -> Vec<f64> {
        match self {
            LabelData::Binary { encoded, codec } => {
                encoded.iter().map(|&v| codec.decode(v.as_f64())).collect()
            }
            LabelData::Continuous(v) => v.iter().map(|&v| v.as_f64()).collect(),
        }
    }

    /// Boolean view of binary labels (true = positive class).
    pub fn positives(&self) -> Option<Vec<bool>> {
        match self {
            LabelData::Binary { encoded, .. } => {
                Some(encoded.iter().map(|&v| v > T::zero()).collect())
            }
            LabelData::Continuous(_) => None,
        }
    }

    fn subset(&self, rows: &[usize]) -> Self {
        match self {
            LabelData::Binary { encoded, codec } => LabelData::Binary {
                encoded: DVector::from_iterator(rows.len(), rows.iter().map(|&i| encoded[i])),
                codec: *codec,
            },
            LabelData::Continuous(v) => LabelData::Continuous(DVector::from_iterator(
                rows.len(),
                rows.iter().map(|&i| v[i]),
            )),
        }
    }
}

/// Validated multi-modal dataset: per-modality feature matrices sharing a
/// sample axis, per-sample availability bits, and labels.
///
/// Availability is metadata: matrices keep values for unavailable rows, the
/// solvers simply never read them. Instances are immutable after
/// construction and safe to share across threads.
#[derive(Debug, Clone)]
pub struct MultiModalDataset<T: Real> {
    modalities: Vec<DMatrix<T>>,
    availability: Vec<Vec<bool>>,
    labels: LabelData<T>,
    feature_names: Option<Vec<Vec<String>>>,
}

/// Validates raw matrices, availability, and labels into a dataset.
///
/// Checks: at least one modality, every modality nonempty and with the same
/// sample count, availability vectors of matching length, no sample with all
/// modalities unavailable, finite values, and (for classification) exactly
/// two distinct label values which are recoded to {-1, +1} with the smaller
/// original value mapped to -1.
pub fn validate_dataset<T: Real>(
    modalities: Vec<DMatrix<T>>,
    availability: Option<Vec<Vec<bool>>>,
    labels: &[f64],
    task: TaskKind,
) -> Result<MultiModalDataset<T>> {
    if modalities.is_empty() {
        return Err(Error::NoModalities);
    }
    let n = modalities[0].nrows();
    for (k, x) in modalities.iter().enumerate() {
        if x.ncols() == 0 {
            return Err(Error::EmptyModality { modality: k });
        }
        if x.nrows() != n {
            return Err(Error::SampleCountMismatch {
                modality: k,
                found: x.nrows(),
                expected: n,
            });
        }
        if x.iter().any(|v| !v.as_f64().is_finite()) {
            return Err(Error::NonFinite {
                context: format!("modality {k}"),
            });
        }
    }
    if labels.len() != n {
        return Err(Error::LabelLength {
            found: labels.len(),
            expected: n,
        });
    }
    if labels.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            context: "labels".into(),
        });
    }

    let availability = match availability {
        Some(a) => {
            if a.len() != modalities.len() {
                return Err(Error::DimensionMismatch {
                    context: format!(
                        "{} availability vectors for {} modalities",
                        a.len(),
                        modalities.len()
                    ),
                });
            }
            for (k, bits) in a.iter().enumerate() {
                if bits.len() != n {
                    return Err(Error::AvailabilityLength {
                        modality: k,
                        found: bits.len(),
                        expected: n,
                    });
                }
            }
            a
        }
        None => vec![vec![true; n]; modalities.len()],
    };
    for i in 0..n {
        if availability.iter().all(|bits| !bits[i]) {
            return Err(Error::AllModalitiesMissing { sample: i });
        }
    }

    let labels = match task {
        TaskKind::Classification => {
            let codec = LabelCodec::from_values(labels)?;
            let encoded = DVector::from_iterator(
                n,
                labels.iter().map(|&v| T::of(codec.encode(v).expect("validated"))),
            );
            LabelData::Binary { encoded, codec }
        }
        TaskKind::Regression => LabelData::Continuous(DVector::from_iterator(
            n,
            labels.iter().map(|&v| T::of(v)),
        )),
    };

    Ok(MultiModalDataset {
        modalities,
        availability,
        labels,
        feature_names: None,
    })
}

impl<T: Real> MultiModalDataset<T> {
    /// Dataset with every modality available for every sample.
    pub fn complete(
        modalities: Vec<DMatrix<T>>,
        labels: &[f64],
        task: TaskKind,
    ) -> Result<Self> {
        validate_dataset(modalities, None, labels, task)
    }

    pub fn with_feature_names(mut self, names: Vec<Vec<String>>) -> Result<Self> {
        if names.len() != self.modality_count()
            || names
                .iter()
                .zip(&self.modalities)
                .any(|(n, x)| n.len() != x.ncols())
        {
            return Err(Error::DimensionMismatch {
                context: "feature name lists must match modality dimensions".into(),
            });
        }
        self.feature_names = Some(names);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.modalities[0].nrows()
    }

    pub fn modality_count(&self) -> usize {
        self.modalities.len()
    }

    pub fn feature_dims(&self) -> Vec<usize> {
        self.modalities.iter().map(|x| x.ncols()).collect()
    }

    pub fn total_features(&self) -> usize {
        self.modalities.iter().map(|x| x.ncols()).sum()
    }

    pub fn modality(&self, k: usize) -> &DMatrix<T> {
        &self.modalities[k]
    }

    pub fn modalities(&self) -> &[DMatrix<T>] {
        &self.modalities
    }

    pub fn availability(&self) -> &[Vec<bool>] {
        &self.availability
    }

    pub fn labels(&self) -> &LabelData<T> {
        &self.labels
    }

    pub fn feature_names(&self) -> Option<&[Vec<String>]> {
        self.feature_names.as_deref()
    }

    pub fn observed(&self, modality: usize, sample: usize) -> bool {
        self.availability[modality][sample]
    }

    /// Indices of modalities observed for `sample`, in modality order.
    pub fn omega(&self, sample: usize) -> Vec<usize> {
        (0..self.modality_count())
            .filter(|&k| self.availability[k][sample])
            .collect()
    }

    /// Availability pattern of `sample` as a bitmask (bit k = modality k).
    pub fn pattern(&self, sample: usize) -> u32 {
        (0..self.modality_count())
            .filter(|&k| self.availability[k][sample])
            .fold(0u32, |acc, k| acc | 1 << k)
    }

    pub fn is_complete(&self) -> bool {
        self.availability.iter().all(|bits| bits.iter().all(|&b| b))
    }

    /// Rows with every modality observed.
    pub fn complete_rows(&self) -> Vec<usize> {
        (0..self.n())
            .filter(|&i| self.availability.iter().all(|bits| bits[i]))
            .collect()
    }

    /// Number of observed samples per modality.
    pub fn observed_counts(&self) -> Vec<usize> {
        self.availability
            .iter()
            .map(|bits| bits.iter().filter(|&&b| b).count())
            .collect()
    }

    /// New dataset holding the given rows (availability and labels follow).
    pub fn subset_rows(&self, rows: &[usize]) -> Self {
        let modalities = self
            .modalities
            .iter()
            .map(|x| DMatrix::from_fn(rows.len(), x.ncols(), |i, j| x[(rows[i], j)]))
            .collect();
        let availability = self
            .availability
            .iter()
            .map(|bits| rows.iter().map(|&i| bits[i]).collect())
            .collect();
        Self {
            modalities,
            availability,
            labels: self.labels.subset(rows),
            feature_names: self.feature_names.clone(),
        }
    }

    /// New dataset keeping only the listed modalities, reindexed in order.
    ///
    /// Samples that lose all their observed modalities are invalid, so this
    /// returns an error in that case.
    pub fn restrict_modalities(&self, keep: &[usize]) -> Result<Self> {
        if keep.is_empty() {
            return Err(Error::NoModalities);
        }
        for &k in keep {
            if k >= self.modality_count() {
                return Err(Error::SubsetOutOfRange {
                    index: k,
                    modalities: self.modality_count(),
                });
            }
        }
        let modalities: Vec<DMatrix<T>> = keep.iter().map(|&k| self.modalities[k].clone()).collect();
        let availability: Vec<Vec<bool>> =
            keep.iter().map(|&k| self.availability[k].clone()).collect();
        for i in 0..self.n() {
            if availability.iter().all(|bits| !bits[i]) {
                return Err(Error::AllModalitiesMissing { sample: i });
            }
        }
        Ok(Self {
            modalities,
            availability,
            labels: self.labels.clone(),
            feature_names: self
                .feature_names
                .as_ref()
                .map(|names| keep.iter().map(|&k| names[k].clone()).collect()),
        })
    }

    /// Same data with new availability bits (values untouched).
    pub fn with_availability(&self, availability: Vec<Vec<bool>>) -> Result<Self> {
        validate_availability_shape(&availability, self.modality_count(), self.n())?;
        for i in 0..self.n() {
            if availability.iter().all(|bits| !bits[i]) {
                return Err(Error::AllModalitiesMissing { sample: i });
            }
        }
        Ok(Self {
            modalities: self.modalities.clone(),
            availability,
            labels: self.labels.clone(),
            feature_names: self.feature_names.clone(),
        })
    }
}

fn validate_availability_shape(
    availability: &[Vec<bool>],
    m: usize,
    n: usize,
) -> Result<()> {
    if availability.len() != m {
        return Err(Error::DimensionMismatch {
            context: format!("{} availability vectors for {} modalities", availability.len(), m),
        });
    }
    for (k, bits) in availability.iter().enumerate() {
        if bits.len() != n {
            return Err(Error::AvailabilityLength {
                modality: k,
                found: bits.len(),
                expected: n,
            });
        }
    }
    Ok(())
}
