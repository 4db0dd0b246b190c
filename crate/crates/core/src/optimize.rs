//! Search over scheme x block-size spaces: optimal configurations,
//! relative degradation of restricted spaces, block-size ranking and
//! the reduced block-size sets.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::block::{
    adaptive_block_formats, b64, block_nnz_map, BlockFormat, BlockSize, FootprintTable, Scheme,
};
use crate::matrix::{Precision, SparseMatrix};

#[derive(Debug, Error)]
pub enum OptimizeError {
    #[error("search space must contain at least one scheme and one block size")]
    EmptySpace,
    #[error("cell ({scheme}, {size}) missing from footprint table")]
    MissingCell { scheme: String, size: String },
}

/// A subspace of the scheme x block-size optimization space.
#[derive(Debug, Clone)]
pub struct SearchSpace {
    pub schemes: Vec<Scheme>,
    pub sizes: Vec<BlockSize>,
}

impl SearchSpace {
    pub fn new(schemes: Vec<Scheme>, sizes: Vec<BlockSize>) -> Result<Self, OptimizeError> {
        if schemes.is_empty() || sizes.is_empty() {
            return Err(OptimizeError::EmptySpace);
        }
        Ok(SearchSpace { schemes, sizes })
    }

    /// The full base space: all six schemes over all 64 block sizes.
    pub fn full() -> Self {
        SearchSpace {
            schemes: Scheme::s6().to_vec(),
            sizes: b64(),
        }
    }
}

/// The minimizing cell of a search, with per-block formats when the
/// winning scheme is adaptive.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptimalConfig {
    pub scheme: Scheme,
    pub size: BlockSize,
    pub bits: u64,
    pub block_formats: Option<Vec<BlockFormat>>,
}

/// Finds the minimum-footprint cell of `space` within `table`.
///
/// Ties break toward smaller bits, then the canonical scheme order,
/// then (k, l) lexicographic block-size order.
pub fn optimal_in(table: &FootprintTable, space: &SearchSpace) -> Result<(Scheme, BlockSize, u64), OptimizeError> {
    if space.schemes.is_empty() || space.sizes.is_empty() {
        return Err(OptimizeError::EmptySpace);
    }
    let mut best: Option<(u64, (u8, u8), BlockSize, Scheme)> = None;
    for &scheme in &space.schemes {
        for &size in &space.sizes {
            let bits = table.get(scheme, size).ok_or_else(|| OptimizeError::MissingCell {
                scheme: scheme.to_string(),
                size: size.to_string(),
            })?;
            let key = (bits, scheme.order_key(), size, scheme);
            match &best {
                Some((b, ord, sz, _)) if (*b, *ord, *sz) <= (bits, scheme.order_key(), size) => {}
                _ => best = Some(key),
            }
        }
    }
    let (bits, _, size, scheme) = best.expect("nonempty space");
    Ok((scheme, size, bits))
}

/// Exhaustive search for the optimal configuration of one matrix.
pub fn optimal_config(
    a: &SparseMatrix,
    space: &SearchSpace,
    p: Precision,
) -> Result<OptimalConfig, OptimizeError> {
    let table = FootprintTable::compute(a, &space.schemes, &space.sizes, p);
    let (scheme, size, bits) = optimal_in(&table, space)?;
    let block_formats = match scheme {
        Scheme::Adaptive(set) => {
            let map = block_nnz_map(a, size);
            Some(adaptive_block_formats(&map, set, p))
        }
        _ => None,
    };
    Ok(OptimalConfig {
        scheme,
        size,
        bits,
        block_formats,
    })
}

/// Percent excess of the minimum within `space` over the minimum of
/// the full base space. Requires `table` to cover both.
pub fn delta_from_table(table: &FootprintTable, space: &SearchSpace) -> Result<f64, OptimizeError> {
    let (_, _, restricted) = optimal_in(table, space)?;
    let (_, _, optimal) = optimal_in(table, &SearchSpace::full())?;
    Ok((restricted as f64 / optimal as f64 - 1.0) * 100.0)
}

/// Convenience per-matrix delta computed from scratch.
pub fn delta(a: &SparseMatrix, space: &SearchSpace, p: Precision) -> Result<f64, OptimizeError> {
    let mut schemes = Scheme::s6().to_vec();
    for s in &space.schemes {
        if !schemes.contains(s) {
            schemes.push(*s);
        }
    }
    let table = FootprintTable::compute(a, &schemes, &b64(), p);
    delta_from_table(&table, space)
}

/// Minimum, mean and maximum of a set of per-matrix deltas.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UStats {
    pub min: f64,
    pub mean: f64,
    pub max: f64,
}

impl UStats {
    pub fn from_values(values: &[f64]) -> Option<UStats> {
        if values.is_empty() {
            return None;
        }
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        let mut sum = 0.0;
        for &v in values {
            min = min.min(v);
            max = max.max(v);
            sum += v;
        }
        Some(UStats {
            min,
            mean: sum / values.len() as f64,
            max,
        })
    }
}

/// Corpus statistics of per-matrix deltas for one restricted space.
/// `tables` holds one full-space footprint table per matrix.
pub fn u_set(tables: &[FootprintTable], space: &SearchSpace) -> Result<UStats, OptimizeError> {
    let deltas = per_matrix_deltas(tables, space)?;
    UStats::from_values(&deltas).ok_or(OptimizeError::EmptySpace)
}

pub fn per_matrix_deltas(
    tables: &[FootprintTable],
    space: &SearchSpace,
) -> Result<Vec<f64>, OptimizeError> {
    tables.iter().map(|t| delta_from_table(t, space)).collect()
}

/// One entry of the block-size ranking.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RankedSize {
    pub size: BlockSize,
    pub avg: f64,
    pub max: f64,
}

/// Ranks all 64 block sizes by the corpus average of the per-matrix
/// delta of the single-size space (all six schemes), ascending; ties
/// break by (k, l).
pub fn rank_block_sizes(tables: &[FootprintTable]) -> Result<Vec<RankedSize>, OptimizeError> {
    let mut ranked = Vec::with_capacity(64);
    for size in b64() {
        let space = SearchSpace::new(Scheme::s6().to_vec(), vec![size])?;
        let stats = u_set(tables, &space)?;
        ranked.push(RankedSize {
            size,
            avg: stats.mean,
            max: stats.max,
        });
    }
    ranked.sort_by(|a, b| {
        a.avg
            .partial_cmp(&b.avg)
            .expect("finite averages")
            .then(a.size.cmp(&b.size))
    });
    Ok(ranked)
}

/// The first `n` sizes of the ranking.
pub fn ranked_prefix(ranked: &[RankedSize], n: usize) -> Vec<BlockSize> {
    ranked.iter().take(n).map(|r| r.size).collect()
}

/// All square block sizes 2^k x 2^k.
pub fn b8() -> Vec<BlockSize> {
    (1..=8).map(|k| BlockSize::new(k, k).unwrap()).collect()
}

/// Square sizes plus rectangular sizes with both exponents in 2..=4.
pub fn b14() -> Vec<BlockSize> {
    reduced_union(4)
}

/// Square sizes plus rectangular sizes with both exponents in 2..=5.
pub fn b20() -> Vec<BlockSize> {
    reduced_union(5)
}

fn reduced_union(hi: u8) -> Vec<BlockSize> {
    let mut v = b8();
    for k in 2..=hi {
        for l in 2..=hi {
            let size = BlockSize::new(k, l).unwrap();
            if !v.contains(&size) {
                v.push(size);
            }
        }
    }
    v.sort_unstable();
    v
}

/// Resolves a named block-size set.
pub fn named_size_set(name: &str) -> Option<Vec<BlockSize>> {
    match name.to_ascii_lowercase().as_str() {
        "b64" => Some(b64()),
        "b20" => Some(b20()),
        "b14" => Some(b14()),
        "b8" => Some(b8()),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::block::FormatSet;
    use crate::matrix::Symmetry;

    fn identity(n: u32) -> SparseMatrix {
        SparseMatrix::new(n, n, Symmetry::General, (0..n).map(|i| (i, i)).collect()).unwrap()
    }

    #[test]
    fn reduced_set_cardinalities() {
        assert_eq!(b8().len(), 8);
        assert_eq!(b14().len(), 14);
        assert_eq!(b20().len(), 20);
    }

    #[test]
    fn b14_membership() {
        assert!(b14().contains(&BlockSize::new(2, 4).unwrap())); // 4x16
        assert!(!b14().contains(&BlockSize::new(1, 2).unwrap())); // 2x4
    }

    #[test]
    fn reduced_sets_nested() {
        let (b8, b14, b20, b64) = (b8(), b14(), b20(), b64());
        assert!(b8.iter().all(|s| b14.contains(s)));
        assert!(b14.iter().all(|s| b20.contains(s)));
        assert!(b20.iter().all(|s| b64.contains(s)));
    }

    #[test]
    fn optimal_agrees_with_exhaustive_scan() {
        let a = identity(16);
        let space = SearchSpace::full();
        for p in Precision::BOTH {
            let opt = optimal_config(&a, &space, p).unwrap();
            let brute = space
                .schemes
                .iter()
                .flat_map(|&s| space.sizes.iter().map(move |&sz| (s, sz)))
                .map(|(s, sz)| crate::block::mmf(&a, s, sz, p))
                .min()
                .unwrap();
            assert_eq!(opt.bits, brute);
        }
    }

    #[test]
    fn singleton_space() {
        let a = identity(16);
        let space = SearchSpace::new(
            vec![Scheme::Fixed(BlockFormat::Csr)],
            vec![BlockSize::new(3, 3).unwrap()],
        )
        .unwrap();
        let opt = optimal_config(&a, &space, Precision::Single).unwrap();
        assert_eq!(
            opt.bits,
            crate::block::mmf(
                &a,
                Scheme::Fixed(BlockFormat::Csr),
                BlockSize::new(3, 3).unwrap(),
                Precision::Single
            )
        );
    }

    #[test]
    fn dense_matrix_prefers_dense_blocks() {
        let a = SparseMatrix::from_coords(
            64,
            64,
            Symmetry::General,
            (0..64u32).flat_map(|r| (0..64u32).map(move |c| (r, c))),
        )
        .unwrap();
        let opt = optimal_config(&a, &SearchSpace::full(), Precision::Double).unwrap();
        match opt.scheme {
            Scheme::Fixed(BlockFormat::Dense) => {}
            Scheme::Adaptive(_) => {
                let formats = opt.block_formats.as_ref().unwrap();
                assert!(formats.iter().all(|f| *f == BlockFormat::Dense));
            }
            other => panic!("unexpected scheme {other}"),
        }
        let lb = a.lower_bound(Precision::Double);
        assert!((opt.bits as f64) < lb as f64 * 1.01);
    }

    #[test]
    fn delta_zero_on_full_space() {
        let a = identity(16);
        assert_eq!(delta(&a, &SearchSpace::full(), Precision::Single).unwrap(), 0.0);
    }

    #[test]
    fn delta_antitone_in_space() {
        let a = SparseMatrix::from_coords(
            200,
            200,
            Symmetry::General,
            (0..1500u32).map(|i| ((i * 7919) % 200, (i * 31) % 200)),
        )
        .unwrap();
        let schemes = Scheme::s6().to_vec();
        for p in Precision::BOTH {
            let table = FootprintTable::compute(&a, &schemes, &b64(), p);
            let mut prev = 0.0;
            for sizes in [b64(), b20(), b14(), b8()] {
                let space = SearchSpace::new(schemes.clone(), sizes).unwrap();
                let d = delta_from_table(&table, &space).unwrap();
                assert!(d >= prev - 1e-12);
                prev = d;
            }
        }
    }

    #[test]
    fn u_set_singleton_corpus() {
        let a = identity(16);
        let table = FootprintTable::compute(&a, &Scheme::s6(), &b64(), Precision::Single);
        let space = SearchSpace::new(
            vec![Scheme::MinFixed(FormatSet::ALL)],
            b64(),
        )
        .unwrap();
        let stats = u_set(std::slice::from_ref(&table), &space).unwrap();
        assert_eq!(stats.min, stats.mean);
        assert_eq!(stats.mean, stats.max);
    }

    #[test]
    fn ranking_is_permutation() {
        let mats: Vec<SparseMatrix> = (0..4)
            .map(|s| {
                SparseMatrix::from_coords(
                    128,
                    128,
                    Symmetry::General,
                    (0..800u32).map(move |i| ((i * 7919 + s * 13) % 128, (i * 31 + s) % 128)),
                )
                .unwrap()
            })
            .collect();
        let tables: Vec<FootprintTable> = mats
            .iter()
            .map(|a| FootprintTable::compute(a, &Scheme::s6(), &b64(), Precision::Double))
            .collect();
        let ranked = rank_block_sizes(&tables).unwrap();
        assert_eq!(ranked.len(), 64);
        let mut sizes: Vec<BlockSize> = ranked.iter().map(|r| r.size).collect();
        sizes.sort_unstable();
        assert_eq!(sizes, b64());
    }
}
