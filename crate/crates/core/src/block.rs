//! Partitioning of a matrix into 2^k x 2^l blocks and the exact bit
//! footprint of every block format and blocking storage scheme.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::{Precision, SparseMatrix};

pub const MAX_EXP: u8 = 8;

/// Number of bits needed to index `n` entities; 0 for n <= 1.
pub fn ceil_log2(n: u64) -> u64 {
    if n <= 1 {
        0
    } else {
        64 - (n - 1).leading_zeros() as u64
    }
}

#[derive(Debug, Error)]
pub enum BlockError {
    #[error("block exponent {0} outside 1..=8")]
    BadExponent(u8),
    #[error("block nonzero count {z} outside 1..={max}")]
    BadNnz { z: u64, max: u64 },
}

/// Block size 2^k rows by 2^l cols, exponents in 1..=8.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct BlockSize {
    k: u8,
    l: u8,
}

impl BlockSize {
    pub fn new(k: u8, l: u8) -> Result<Self, BlockError> {
        if k < 1 || k > MAX_EXP {
            return Err(BlockError::BadExponent(k));
        }
        if l < 1 || l > MAX_EXP {
            return Err(BlockError::BadExponent(l));
        }
        Ok(BlockSize { k, l })
    }

    pub fn row_exp(self) -> u8 {
        self.k
    }

    pub fn col_exp(self) -> u8 {
        self.l
    }

    /// Block height 2^k.
    pub fn height(self) -> u64 {
        1 << self.k
    }

    /// Block width 2^l.
    pub fn width(self) -> u64 {
        1 << self.l
    }

    pub fn cells(self) -> u64 {
        self.height() * self.width()
    }

    /// Parses labels of the form "8x16" (height x width).
    pub fn parse(label: &str) -> Option<Self> {
        let (h, w) = label.split_once('x')?;
        let h: u64 = h.trim().parse().ok()?;
        let w: u64 = w.trim().parse().ok()?;
        if !h.is_power_of_two() || !w.is_power_of_two() {
            return None;
        }
        BlockSize::new(h.trailing_zeros() as u8, w.trailing_zeros() as u8).ok()
    }
}

impl fmt::Display for BlockSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.height(), self.width())
    }
}

/// All 64 block sizes, ordered by (k, l).
pub fn b64() -> Vec<BlockSize> {
    let mut v = Vec::with_capacity(64);
    for k in 1..=MAX_EXP {
        for l in 1..=MAX_EXP {
            v.push(BlockSize { k, l });
        }
    }
    v
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum BlockFormat {
    Coo,
    Csr,
    Bitmap,
    Dense,
}

impl BlockFormat {
    pub const ALL: [BlockFormat; 4] = [
        BlockFormat::Coo,
        BlockFormat::Csr,
        BlockFormat::Bitmap,
        BlockFormat::Dense,
    ];

    pub fn index(self) -> usize {
        match self {
            BlockFormat::Coo => 0,
            BlockFormat::Csr => 1,
            BlockFormat::Bitmap => 2,
            BlockFormat::Dense => 3,
        }
    }

    pub fn from_index(i: usize) -> Option<Self> {
        BlockFormat::ALL.get(i).copied()
    }
}

impl fmt::Display for BlockFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BlockFormat::Coo => write!(f, "COO"),
            BlockFormat::Csr => write!(f, "CSR"),
            BlockFormat::Bitmap => write!(f, "bitmap"),
            BlockFormat::Dense => write!(f, "dense"),
        }
    }
}

/// Nonempty candidate format set for the min-fixed and adaptive
/// schemes, stored as a 4-bit mask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FormatSet(u8);

impl FormatSet {
    pub const ALL: FormatSet = FormatSet(0b1111);
    /// COO, bitmap and dense only.
    pub const WITHOUT_CSR: FormatSet = FormatSet(0b1101);

    pub fn from_formats(formats: &[BlockFormat]) -> FormatSet {
        let mut mask = 0;
        for f in formats {
            mask |= 1 << f.index();
        }
        FormatSet(mask)
    }

    pub fn mask(self) -> u8 {
        self.0
    }

    pub fn from_mask(mask: u8) -> Option<FormatSet> {
        if mask == 0 || mask > 0b1111 {
            None
        } else {
            Some(FormatSet(mask))
        }
    }

    pub fn contains(self, f: BlockFormat) -> bool {
        self.0 & (1 << f.index()) != 0
    }

    pub fn without(self, f: BlockFormat) -> Option<FormatSet> {
        FormatSet::from_mask(self.0 & !(1 << f.index()))
    }

    pub fn iter(self) -> impl Iterator<Item = BlockFormat> {
        BlockFormat::ALL.into_iter().filter(move |f| self.contains(*f))
    }
}

impl fmt::Display for FormatSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<String> = self.iter().map(|x| x.to_string()).collect();
        write!(f, "{{{}}}", names.join(","))
    }
}

/// Blocking storage scheme: one prescribed format for all blocks, one
/// format chosen collectively (+2 tag bits total), or a format chosen
/// per block (+2 tag bits per block).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scheme {
    Fixed(BlockFormat),
    MinFixed(FormatSet),
    Adaptive(FormatSet),
}

impl Scheme {
    /// The six schemes of the base optimization space, in their
    /// canonical order.
    pub fn s6() -> [Scheme; 6] {
        [
            Scheme::Fixed(BlockFormat::Coo),
            Scheme::Fixed(BlockFormat::Csr),
            Scheme::Fixed(BlockFormat::Bitmap),
            Scheme::Fixed(BlockFormat::Dense),
            Scheme::MinFixed(FormatSet::ALL),
            Scheme::Adaptive(FormatSet::ALL),
        ]
    }

    /// min-fixed-w/o-CSR and adaptive-w/o-CSR.
    pub fn without_csr_variants() -> [Scheme; 2] {
        [
            Scheme::MinFixed(FormatSet::WITHOUT_CSR),
            Scheme::Adaptive(FormatSet::WITHOUT_CSR),
        ]
    }

    /// Deterministic ordering used for tie-breaking: fixed formats in
    /// COO, CSR, bitmap, dense order, then min-fixed, then adaptive.
    pub fn order_key(self) -> (u8, u8) {
        match self {
            Scheme::Fixed(f) => (f.index() as u8, 0),
            Scheme::MinFixed(s) => (4, s.mask()),
            Scheme::Adaptive(s) => (5, s.mask()),
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scheme::Fixed(fmt_) => write!(f, "{fmt_}"),
            Scheme::MinFixed(FormatSet::ALL) => write!(f, "min-fixed"),
            Scheme::MinFixed(FormatSet::WITHOUT_CSR) => write!(f, "min-fixed-w/o-CSR"),
            Scheme::MinFixed(s) => write!(f, "min-fixed{s}"),
            Scheme::Adaptive(FormatSet::ALL) => write!(f, "adaptive"),
            Scheme::Adaptive(FormatSet::WITHOUT_CSR) => write!(f, "adaptive-w/o-CSR"),
            Scheme::Adaptive(s) => write!(f, "adaptive{s}"),
        }
    }
}

/// One nonzero block of a partition: block coordinates and its nonzero
/// count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Block {
    pub row: u32,
    pub col: u32,
    pub nnz: u32,
}

/// Per-block nonzero counts for one block size: lexicographically
/// sorted nonzero blocks plus per-block-row counts of nonzero blocks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockNnzMap {
    size: BlockSize,
    block_rows: u32,
    block_cols: u32,
    blocks: Vec<Block>,
    row_counts: Vec<u32>,
}

impl BlockNnzMap {
    pub fn size(&self) -> BlockSize {
        self.size
    }

    /// M = ceil(m / h).
    pub fn block_rows(&self) -> u32 {
        self.block_rows
    }

    /// N = ceil(n / w).
    pub fn block_cols(&self) -> u32 {
        self.block_cols
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn row_counts(&self) -> &[u32] {
        &self.row_counts
    }

    pub fn total_nnz(&self) -> u64 {
        self.blocks.iter().map(|b| b.nnz as u64).sum()
    }

    /// Block column indices plus per-block-row nonzero-block counts,
    /// both index-compressed.
    pub fn structure_overhead(&self) -> u64 {
        let n = self.block_cols as u64;
        self.blocks.len() as u64 * ceil_log2(n)
            + self.row_counts.len() as u64 * ceil_log2(n + 1)
    }

    /// Merges block-row pairs (2R, 2R+1), doubling the block height.
    pub fn aggregate_rows(&self) -> Result<BlockNnzMap, BlockError> {
        let size = BlockSize::new(self.size.k + 1, self.size.l)?;
        let block_rows = (self.block_rows + 1) / 2;
        let mut blocks: Vec<Block> = Vec::with_capacity(self.blocks.len());
        let mut merged: Vec<Block> = self.blocks.clone();
        for b in &mut merged {
            b.row >>= 1;
        }
        merged.sort_unstable_by_key(|b| (b.row, b.col));
        for b in merged {
            match blocks.last_mut() {
                Some(last) if last.row == b.row && last.col == b.col => last.nnz += b.nnz,
                _ => blocks.push(b),
            }
        }
        Ok(finish_map(size, block_rows, self.block_cols, blocks))
    }

    /// Merges block-column pairs (2C, 2C+1), doubling the block width.
    pub fn aggregate_cols(&self) -> Result<BlockNnzMap, BlockError> {
        let size = BlockSize::new(self.size.k, self.size.l + 1)?;
        let block_cols = (self.block_cols + 1) / 2;
        let mut blocks: Vec<Block> = Vec::with_capacity(self.blocks.len());
        // halving the column index preserves lexicographic order
        for b in &self.blocks {
            let col = b.col >> 1;
            match blocks.last_mut() {
                Some(last) if last.row == b.row && last.col == col => last.nnz += b.nnz,
                _ => blocks.push(Block { row: b.row, col, nnz: b.nnz }),
            }
        }
        Ok(finish_map(size, self.block_rows, block_cols, blocks))
    }
}

fn finish_map(size: BlockSize, block_rows: u32, block_cols: u32, blocks: Vec<Block>) -> BlockNnzMap {
    let mut row_counts = vec![0u32; block_rows as usize];
    for b in &blocks {
        row_counts[b.row as usize] += 1;
    }
    BlockNnzMap {
        size,
        block_rows,
        block_cols,
        blocks,
        row_counts,
    }
}

/// Buckets the stored elements into blocks using shift arithmetic.
pub fn block_nnz_map(a: &SparseMatrix, size: BlockSize) -> BlockNnzMap {
    let k = size.k as u32;
    let l = size.l as u32;
    let block_rows = ((a.rows() as u64 + size.height() - 1) >> k) as u32;
    let block_cols = ((a.cols() as u64 + size.width() - 1) >> l) as u32;
    let mut coords: Vec<(u32, u32)> = a
        .elements()
        .iter()
        .map(|&(r, c)| (r >> k, c >> l))
        .collect();
    coords.sort_unstable();
    let mut blocks: Vec<Block> = Vec::new();
    for (row, col) in coords {
        match blocks.last_mut() {
            Some(last) if last.row == row && last.col == col => last.nnz += 1,
            _ => blocks.push(Block { row, col, nnz: 1 }),
        }
    }
    finish_map(size, block_rows, block_cols, blocks)
}

/// Bits needed to store one nonzero block with `z` nonzeros in format
/// `f` at value width `b`.
///
/// COO: z local coordinate pairs plus values. CSR: values, local column
/// indices and h cumulative row end-offsets of ceil(log2(z+1)) bits.
/// bitmap: values plus an h*w occupancy bit array. dense: all h*w
/// values.
pub fn block_format_bits(
    f: BlockFormat,
    size: BlockSize,
    z: u64,
    p: Precision,
) -> Result<u64, BlockError> {
    if z == 0 || z > size.cells() {
        return Err(BlockError::BadNnz { z, max: size.cells() });
    }
    let b = p.bits();
    let (k, l) = (size.k as u64, size.l as u64);
    Ok(match f {
        BlockFormat::Coo => z * (k + l + b),
        BlockFormat::Csr => z * b + z * l + size.height() * ceil_log2(z + 1),
        BlockFormat::Bitmap => z * b + size.cells(),
        BlockFormat::Dense => size.cells() * b,
    })
}

/// Per-map format sums used to evaluate every scheme at one block size
/// without rescanning the block list.
#[derive(Debug, Clone, Copy)]
pub struct FormatSums {
    /// Total block body bits per format, over all nonzero blocks.
    pub per_format: [u64; 4],
    /// For each format mask, the sum over blocks of the per-block
    /// minimum across formats in the mask (tag bits excluded).
    pub adaptive_min: [u64; 16],
}

/// Scans the block list once and accumulates the sums needed by every
/// scheme.
pub fn format_sums(map: &BlockNnzMap, p: Precision) -> FormatSums {
    let size = map.size();
    let mut per_format = [0u64; 4];
    let mut adaptive_min = [0u64; 16];
    for block in map.blocks() {
        let mut bits = [0u64; 4];
        for f in BlockFormat::ALL {
            bits[f.index()] = block_format_bits(f, size, block.nnz as u64, p)
                .expect("block nnz within range");
            per_format[f.index()] += bits[f.index()];
        }
        for mask in 1u8..16 {
            let min = BlockFormat::ALL
                .iter()
                .filter(|f| mask & (1 << f.index()) != 0)
                .map(|f| bits[f.index()])
                .min()
                .unwrap();
            adaptive_min[mask as usize] += min;
        }
    }
    FormatSums {
        per_format,
        adaptive_min,
    }
}

/// Matrix memory footprint in bits for one (scheme, block size,
/// precision) configuration, given the block nonzero map.
pub fn mmf_from_sums(map: &BlockNnzMap, sums: &FormatSums, scheme: Scheme) -> u64 {
    let overhead = map.structure_overhead();
    match scheme {
        Scheme::Fixed(f) => overhead + sums.per_format[f.index()],
        Scheme::MinFixed(set) => {
            let best = set
                .iter()
                .map(|f| sums.per_format[f.index()])
                .min()
                .expect("nonempty format set");
            overhead + best + 2
        }
        Scheme::Adaptive(set) => {
            overhead + sums.adaptive_min[set.mask() as usize] + 2 * map.blocks().len() as u64
        }
    }
}

/// Convenience single-cell evaluation straight from a matrix.
pub fn mmf(a: &SparseMatrix, scheme: Scheme, size: BlockSize, p: Precision) -> u64 {
    let map = block_nnz_map(a, size);
    let sums = format_sums(&map, p);
    mmf_from_sums(&map, &sums, scheme)
}

/// Chooses the per-block formats an adaptive scheme would use;
/// ties go to the earlier format in COO, CSR, bitmap, dense order.
pub fn adaptive_block_formats(
    map: &BlockNnzMap,
    set: FormatSet,
    p: Precision,
) -> Vec<BlockFormat> {
    map.blocks()
        .iter()
        .map(|block| {
            set.iter()
                .min_by_key(|f| {
                    block_format_bits(*f, map.size(), block.nnz as u64, p)
                        .expect("block nnz within range")
                })
                .expect("nonempty format set")
        })
        .collect()
}

/// Collective format a min-fixed scheme would choose (same tie rule).
pub fn min_fixed_format(sums: &FormatSums, set: FormatSet) -> BlockFormat {
    set.iter()
        .min_by_key(|f| sums.per_format[f.index()])
        .expect("nonempty format set")
}

/// Footprints for every (scheme, block size) cell of one matrix at one
/// precision.
#[derive(Debug, Clone)]
pub struct FootprintTable {
    precision: Precision,
    schemes: Vec<Scheme>,
    sizes: Vec<BlockSize>,
    bits: Vec<u64>,
}

impl FootprintTable {
    /// Evaluates all requested cells, deriving coarser block sizes from
    /// finer ones through row/column aggregation.
    pub fn compute(a: &SparseMatrix, schemes: &[Scheme], sizes: &[BlockSize], p: Precision) -> Self {
        let mut sizes = sizes.to_vec();
        sizes.sort_unstable();
        sizes.dedup();
        let wanted: std::collections::HashSet<BlockSize> = sizes.iter().copied().collect();
        let mut bits = vec![0u64; schemes.len() * sizes.len()];

        let max_l = sizes.iter().map(|s| s.l).max().unwrap_or(1);
        let max_k = sizes.iter().map(|s| s.k).max().unwrap_or(1);

        let mut row_base = block_nnz_map(a, BlockSize { k: 1, l: 1 });
        for l in 1..=max_l {
            let mut map = row_base.clone();
            for k in 1..=max_k {
                let size = BlockSize { k, l };
                if wanted.contains(&size) {
                    let sums = format_sums(&map, p);
                    let col = sizes.binary_search(&size).expect("size present");
                    for (si, scheme) in schemes.iter().enumerate() {
                        bits[si * sizes.len() + col] = mmf_from_sums(&map, &sums, *scheme);
                    }
                }
                if k < max_k {
                    map = map.aggregate_rows().expect("exponent within range");
                }
            }
            if l < max_l {
                row_base = row_base.aggregate_cols().expect("exponent within range");
            }
        }
        FootprintTable {
            precision: p,
            schemes: schemes.to_vec(),
            sizes,
            bits,
        }
    }

    pub fn precision(&self) -> Precision {
        self.precision
    }

    pub fn schemes(&self) -> &[Scheme] {
        &self.schemes
    }

    pub fn sizes(&self) -> &[BlockSize] {
        &self.sizes
    }

    pub fn get(&self, scheme: Scheme, size: BlockSize) -> Option<u64> {
        let si = self.schemes.iter().position(|s| *s == scheme)?;
        let col = self.sizes.binary_search(&size).ok()?;
        Some(self.bits[si * self.sizes.len() + col])
    }

    pub fn cells(&self) -> impl Iterator<Item = (Scheme, BlockSize, u64)> + '_ {
        self.schemes.iter().enumerate().flat_map(move |(si, s)| {
            self.sizes
                .iter()
                .enumerate()
                .map(move |(ci, sz)| (*s, *sz, self.bits[si * self.sizes.len() + ci]))
        })
    }
}
