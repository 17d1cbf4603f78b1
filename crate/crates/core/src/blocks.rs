//! Block partitions of `R^N` and block-addressable dense vectors.
//!
//! A partition splits the coordinates into `n` contiguous blocks of sizes
//! `N_1..N_n`; the column selectors of the decomposition are represented
//! implicitly by `(offset, size)` ranges. All per-block norms are Euclidean,
//! so the dual norm of a block equals its primal norm.

use std::ops::Range;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Partition of `{0..N}` into `n` contiguous blocks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockPartition {
    sizes: Vec<usize>,
    /// Prefix sums: `offsets[i]..offsets[i+1]` is block `i`; `offsets[n] = N`.
    offsets: Vec<usize>,
}

impl BlockPartition {
    /// Builds a partition from explicit block sizes. Requires at least one
    /// block and every size positive.
    pub fn new(sizes: Vec<usize>) -> Result<Arc<Self>> {
        if sizes.is_empty() {
            return Err(Error::InvalidParameter(
                "a partition needs at least one block".into(),
            ));
        }
        if let Some(&bad) = sizes.iter().find(|&&s| s == 0) {
            return Err(Error::InvalidParameter(format!(
                "block sizes must be positive, got {bad}"
            )));
        }
        let mut offsets = Vec::with_capacity(sizes.len() + 1);
        let mut acc = 0usize;
        offsets.push(0);
        for &s in &sizes {
            acc += s;
            offsets.push(acc);
        }
        Ok(Arc::new(Self { sizes, offsets }))
    }

    /// Splits `total` coordinates into `blocks` near-equal blocks; the last
    /// block absorbs any remainder.
    pub fn uniform_split(total: usize, blocks: usize) -> Result<Arc<Self>> {
        if blocks == 0 || total < blocks {
            return Err(Error::InvalidParameter(format!(
                "cannot split {total} coordinates into {blocks} blocks"
            )));
        }
        let base = total / blocks;
        let mut sizes = vec![base; blocks];
        *sizes.last_mut().unwrap() += total - base * blocks;
        Self::new(sizes)
    }

    /// Single block covering all coordinates.
    pub fn single(total: usize) -> Result<Arc<Self>> {
        Self::new(vec![total])
    }

    /// `n` blocks of size one (one coordinate per block).
    pub fn scalar_blocks(total: usize) -> Result<Arc<Self>> {
        Self::new(vec![1; total])
    }

    pub fn num_blocks(&self) -> usize {
        self.sizes.len()
    }

    pub fn total(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn size(&self, i: usize) -> usize {
        self.sizes[i]
    }

    pub fn offset(&self, i: usize) -> usize {
        self.offsets[i]
    }

    pub fn range(&self, i: usize) -> Range<usize> {
        self.offsets[i]..self.offsets[i + 1]
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i < self.num_blocks() {
            Ok(())
        } else {
            Err(Error::BlockIndexOutOfRange {
                index: i,
                blocks: self.num_blocks(),
            })
        }
    }
}

/// Dense vector in `R^N` addressable by block index.
///
/// Plain value type: moving it between threads is safe and every solver run
/// owns its vectors exclusively.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockVector {
    data: Vec<f64>,
    partition: Arc<BlockPartition>,
}

impl BlockVector {
    pub fn zeros(partition: &Arc<BlockPartition>) -> Self {
        Self {
            data: vec![0.0; partition.total()],
            partition: Arc::clone(partition),
        }
    }

    pub fn from_vec(partition: &Arc<BlockPartition>, data: Vec<f64>) -> Result<Self> {
        if data.len() != partition.total() {
            return Err(Error::LengthMismatch {
                len: data.len(),
                total: partition.total(),
            });
        }
        Ok(Self {
            data,
            partition: Arc::clone(partition),
        })
    }

    pub fn partition(&self) -> &Arc<BlockPartition> {
        &self.partition
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// Contiguous view of block `i`. Mutation through [`Self::block_mut`]
    /// mutates the vector in place.
    ///
    /// # Panics
    /// Panics if `i` is out of range; use [`Self::try_block`] for a checked
    /// variant.
    pub fn block(&self, i: usize) -> &[f64] {
        &self.data[self.partition.range(i)]
    }

    /// Mutable view of block `i`.
    ///
    /// # Panics
    /// Panics if `i` is out of range.
    pub fn block_mut(&mut self, i: usize) -> &mut [f64] {
        let r = self.partition.range(i);
        &mut self.data[r]
    }

    pub fn try_block(&self, i: usize) -> Result<&[f64]> {
        self.partition.check_index(i)?;
        Ok(self.block(i))
    }

    pub fn try_block_mut(&mut self, i: usize) -> Result<&mut [f64]> {
        self.partition.check_index(i)?;
        Ok(self.block_mut(i))
    }

    /// Euclidean norm of block `i` (self-dual under the Euclidean choice).
    pub fn block_norm(&self, i: usize) -> f64 {
        slice_norm(self.block(i))
    }

    /// Euclidean norm of the whole vector; satisfies
    /// `norm()^2 == Σ_i block_norm(i)^2`.
    pub fn norm(&self) -> f64 {
        slice_norm(&self.data)
    }

    /// `self += c * other`.
    pub fn scaled_add(&mut self, c: f64, other: &Self) {
        debug_assert_eq!(self.data.len(), other.data.len());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += c * b;
        }
    }

    pub fn scale(&mut self, c: f64) {
        for a in &mut self.data {
            *a *= c;
        }
    }

    pub fn fill(&mut self, v: f64) {
        self.data.fill(v);
    }
}

pub fn slice_norm(s: &[f64]) -> f64 {
    s.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
