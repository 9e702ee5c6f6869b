//! Component-block layout and the derived binary loading mask.
//!
//! A [`StructureSpec`] declares which latent blocks exist (one per modality
//! subset) and how many components each carries. [`build_structure_mask`]
//! turns a spec plus the per-modality feature counts into the `p x r` 0/1
//! matrix `S` that zeroes loadings of non-contributing components: feature
//! rows of modality `k` are 1 exactly in the columns of blocks whose subset
//! contains `k`.

use std::cmp::Ordering;
use std::ops::Range;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One component block: the modality subset it loads on and its rank.
///
/// Subsets are stored sorted and 0-based. Rank 0 is allowed (the block
/// contributes no columns); rank selection grows specs from all-zero states.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockSpec {
    pub subset: Vec<usize>,
    pub rank: usize,
}

impl BlockSpec {
    pub fn new(mut subset: Vec<usize>, rank: usize) -> Self {
        subset.sort_unstable();
        subset.dedup();
        Self { subset, rank }
    }

    /// True when the block loads on every one of `m` modalities.
    pub fn is_global(&self, m: usize) -> bool {
        self.subset.len() == m
    }
}

/// Declarative component-block layout over `m` modalities.
///
/// Blocks are kept in canonical order: decreasing subset cardinality, then
/// lexicographic subset order (global first, then pairs, then individuals).
/// Instances are immutable after construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StructureSpec {
    modality_count: usize,
    blocks: Vec<BlockSpec>,
}

fn canonical_cmp(a: &BlockSpec, b: &BlockSpec) -> Ordering {
    b.subset
        .len()
        .cmp(&a.subset.len())
        .then_with(|| a.subset.cmp(&b.subset))
}

impl StructureSpec {
    /// Validates, canonicalizes, and returns the spec.
    ///
    /// Rejects empty subsets, out-of-range modality indices, and duplicate
    /// subsets. A total rank of zero is permitted here; it is rejected when
    /// the spec is bound to data (mask construction, fitting).
    pub fn new(modality_count: usize, blocks: Vec<BlockSpec>) -> Result<Self> {
        if modality_count == 0 {
            return Err(Error::NoModalities);
        }
        let mut blocks: Vec<BlockSpec> = blocks
            .into_iter()
            .map(|b| BlockSpec::new(b.subset, b.rank))
            .collect();
        for block in &blocks {
            if block.subset.is_empty() {
                return Err(Error::EmptySubset);
            }
            if let Some(&index) = block.subset.iter().find(|&&i| i >= modality_count) {
                return Err(Error::SubsetOutOfRange {
                    index,
                    modalities: modality_count,
                });
            }
        }
        blocks.sort_by(canonical_cmp);
        for pair in blocks.windows(2) {
            if pair[0].subset == pair[1].subset {
                return Err(Error::DuplicateSubset {
                    subset: pair[0].subset.clone(),
                });
            }
        }
        Ok(Self {
            modality_count,
            blocks,
        })
    }

    /// The full block family over `m` modalities (all 2^m - 1 nonempty
    /// subsets), each at the given rank. For m = 3 this is the seven-block
    /// layout: global, three pairs, three individuals.
    pub fn full_family(modality_count: usize, rank_per_block: usize) -> Result<Self> {
        if modality_count == 0 {
            return Err(Error::NoModalities);
        }
        if modality_count > 16 {
            return Err(Error::InvalidConfig(
                "full block family is limited to 16 modalities".into(),
            ));
        }
        let mut blocks = Vec::new();
        for bits in 1u32..(1u32 << modality_count) {
            let subset: Vec<usize> = (0..modality_count).filter(|k| bits >> k & 1 == 1).collect();
            blocks.push(BlockSpec::new(subset, rank_per_block));
        }
        Self::new(modality_count, blocks)
    }

    /// Single global block spanning all modalities.
    pub fn global_only(modality_count: usize, rank: usize) -> Result<Self> {
        Self::new(modality_count, vec![BlockSpec::new((0..modality_count).collect(), rank)])
    }

    pub fn modality_count(&self) -> usize {
        self.modality_count
    }

    pub fn blocks(&self) -> &[BlockSpec] {
        &self.blocks
    }

    pub fn total_rank(&self) -> usize {
        self.blocks.iter().map(|b| b.rank).sum()
    }

    /// Copy of the spec with block `index` set to `rank` (rank-search moves).
    pub fn with_rank(&self, index: usize, rank: usize) -> Self {
        let mut blocks = self.blocks.clone();
        blocks[index].rank = rank;
        Self {
            modality_count: self.modality_count,
            blocks,
        }
    }

    /// Restriction of the spec to a subset of modalities.
    ///
    /// Each block's subset is intersected with `keep`; empty intersections are
    /// dropped and blocks that collapse onto the same subset are merged by
    /// summing their ranks. Modalities are reindexed to `0..keep.len()` in the
    /// order given. Used to train reduced-modality models on the same
    /// generative structure.
    pub fn restricted(&self, keep: &[usize]) -> Result<Self> {
        let mut merged: Vec<BlockSpec> = Vec::new();
        for block in &self.blocks {
            let subset: Vec<usize> = keep
                .iter()
                .enumerate()
                .filter(|(_, orig)| block.subset.contains(orig))
                .map(|(new_idx, _)| new_idx)
                .collect();
            if subset.is_empty() {
                continue;
            }
            match merged.iter_mut().find(|b| b.subset == subset) {
                Some(existing) => existing.rank += block.rank,
                None => merged.push(BlockSpec { subset, rank: block.rank }),
            }
        }
        Self::new(keep.len(), merged)
    }
}

/// Named JSON form of a [`StructureSpec`].
///
/// Schema: `{"modalities": ["name1", ...], "blocks": [{"subset": ["name1",
/// "name2"], "rank": 3}, ...]}`. The order of the `modalities` array is
/// authoritative for modality indexing.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StructureSpecFile {
    pub modalities: Vec<String>,
    pub blocks: Vec<NamedBlock>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NamedBlock {
    pub subset: Vec<String>,
    pub rank: usize,
}

impl StructureSpecFile {
    /// Resolves modality names to indices and validates the spec.
    pub fn resolve(&self) -> Result<StructureSpec> {
        let mut blocks = Vec::with_capacity(self.blocks.len());
        for block in &self.blocks {
            let mut subset = Vec::with_capacity(block.subset.len());
            for name in &block.subset {
                let idx = self
                    .modalities
                    .iter()
                    .position(|m| m == name)
                    .ok_or_else(|| Error::UnknownModality { name: name.clone() })?;
                subset.push(idx);
            }
            blocks.push(BlockSpec::new(subset, block.rank));
        }
        StructureSpec::new(self.modalities.len(), blocks)
    }

    /// Renders a spec back into the named form.
    pub fn from_spec(spec: &StructureSpec, names: &[String]) -> Result<Self> {
        if names.len() != spec.modality_count() {
            return Err(Error::DimensionMismatch {
                context: format!(
                    "{} modality names for a {}-modality spec",
                    names.len(),
                    spec.modality_count()
                ),
            });
        }
        Ok(Self {
            modalities: names.to_vec(),
            blocks: spec
                .blocks()
                .iter()
                .map(|b| NamedBlock {
                    subset: b.subset.iter().map(|&k| names[k].clone()).collect(),
                    rank: b.rank,
                })
                .collect(),
        })
    }
}

/// The `p x r` 0/1 loading mask derived from a spec and feature dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct StructureMask {
    matrix: DMatrix<u8>,
    block_cols: Vec<Range<usize>>,
    modality_rows: Vec<Range<usize>>,
}

/// Builds the loading mask for `spec` over the given per-modality feature
/// counts. Feature rows of modality `k` are set to 1 in the columns of every
/// block whose subset contains `k`, 0 elsewhere; columns follow the spec's
/// canonical block order.
pub fn build_structure_mask(spec: &StructureSpec, feature_dims: &[usize]) -> Result<StructureMask> {
    if feature_dims.len() != spec.modality_count() {
        return Err(Error::DimensionMismatch {
            context: format!(
                "{} feature dims for a {}-modality spec",
                feature_dims.len(),
                spec.modality_count()
            ),
        });
    }
    for (k, &p_k) in feature_dims.iter().enumerate() {
        if p_k == 0 {
            return Err(Error::EmptyModality { modality: k });
        }
    }
    let total_rank = spec.total_rank();
    if total_rank == 0 {
        return Err(Error::ZeroTotalRank);
    }

    let mut modality_rows = Vec::with_capacity(feature_dims.len());
    let mut row = 0;
    for &p_k in feature_dims {
        modality_rows.push(row..row + p_k);
        row += p_k;
    }
    let p = row;

    let mut block_cols = Vec::with_capacity(spec.blocks().len());
    let mut col = 0;
    for block in spec.blocks() {
        block_cols.push(col..col + block.rank);
        col += block.rank;
    }

    let mut matrix = DMatrix::<u8>::zeros(p, total_rank);
    for (block, cols) in spec.blocks().iter().zip(&block_cols) {
        for &k in &block.subset {
            for r in modality_rows[k].clone() {
                for c in cols.clone() {
                    matrix[(r, c)] = 1;
                }
            }
        }
    }

    Ok(StructureMask {
        matrix,
        block_cols,
        modality_rows,
    })
}

impl StructureMask {
    pub fn matrix(&self) -> &DMatrix<u8> {
        &self.matrix
    }

    /// Column range of block `index` (empty for rank-0 blocks).
    pub fn block_cols(&self) -> &[Range<usize>] {
        &self.block_cols
    }

    /// Feature-row range of modality `k` in the concatenated layout.
    pub fn modality_rows(&self) -> &[Range<usize>] {
        &self.modality_rows
    }

    pub fn total_features(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn total_rank(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn modality_count(&self) -> usize {
        self.modality_rows.len()
    }

    pub fn is_one(&self, row: usize, col: usize) -> bool {
        self.matrix[(row, col)] == 1
    }
}

/// A spec bound to concrete feature dimensions, with its derived mask.
#[derive(Debug, Clone)]
pub struct Structure {
    pub spec: StructureSpec,
    pub mask: StructureMask,
}

impl Structure {
    pub fn new(spec: StructureSpec, feature_dims: &[usize]) -> Result<Self> {
        let mask = build_structure_mask(&spec, feature_dims)?;
        Ok(Self { spec, mask })
    }
}
