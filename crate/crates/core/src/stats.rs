//! Corpus-level pipeline: selection filters, savings and lower-bound
//! metrics, per-criterion breakdowns and the subset-consistency
//! experiment.

use std::collections::BTreeMap;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::block::{b64, BlockSize, FootprintTable, Scheme};
use crate::matrix::{AllStored, Precision, SparseMatrix, Symmetry};
use crate::optimize::{
    delta_from_table, optimal_in, OptimizeError, SearchSpace, UStats,
};

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("subset size {subset} exceeds corpus size {corpus}")]
    SubsetTooLarge { subset: usize, corpus: usize },
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error(transparent)]
    Optimize(#[from] OptimizeError),
}

/// Per-precision footprint metrics of one matrix.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PrecisionMetrics {
    pub optimal_bits: u64,
    pub optimal_scheme: String,
    pub optimal_size: String,
    pub csr32_bits: u64,
    pub lower_bound: u64,
    /// Percent saved against CSR32 by the optimal blocking.
    pub lambda: f64,
    /// Percent excess of the blocked optimum over the lower bound.
    pub gamma_blocked: f64,
    /// Percent excess of CSR32 over the lower bound.
    pub gamma_csr32: f64,
}

/// Per-matrix corpus record: metadata plus both-precision metrics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorpusRecord {
    pub id: String,
    pub kind: String,
    pub m: u32,
    pub n: u32,
    pub symmetry: Symmetry,
    pub nnz_all: u64,
    pub nnz_stored: u64,
    pub rho: AllStored<f64>,
    pub prnnz_std: AllStored<f64>,
    pub single: PrecisionMetrics,
    pub double: PrecisionMetrics,
    #[serde(skip)]
    pub fingerprint: [u8; 32],
}

impl CorpusRecord {
    pub fn metrics(&self, p: Precision) -> &PrecisionMetrics {
        match p {
            Precision::Single => &self.single,
            Precision::Double => &self.double,
        }
    }
}

pub fn lambda_savings(optimal: u64, csr32: u64) -> f64 {
    (1.0 - optimal as f64 / csr32 as f64) * 100.0
}

pub fn gamma(footprint: u64, lower_bound: u64) -> f64 {
    (footprint as f64 / lower_bound as f64 - 1.0) * 100.0
}

/// Canonical structure fingerprint: SHA-256 over dimensions, symmetry
/// and the sorted element coordinates.
pub fn fingerprint(a: &SparseMatrix) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(a.rows().to_le_bytes());
    h.update(a.cols().to_le_bytes());
    h.update([match a.symmetry() {
        Symmetry::General => 0u8,
        Symmetry::Symmetric => 1u8,
    }]);
    for &(r, c) in a.elements() {
        h.update(r.to_le_bytes());
        h.update(c.to_le_bytes());
    }
    h.finalize().into()
}

fn precision_metrics(a: &SparseMatrix, table: &FootprintTable) -> PrecisionMetrics {
    let p = table.precision();
    let (scheme, size, bits) =
        optimal_in(table, &SearchSpace::full()).expect("full table covers the base space");
    let csr32 = a.csr32_footprint(p);
    let lb = a.lower_bound(p);
    PrecisionMetrics {
        optimal_bits: bits,
        optimal_scheme: scheme.to_string(),
        optimal_size: size.to_string(),
        csr32_bits: csr32,
        lower_bound: lb,
        lambda: lambda_savings(bits, csr32),
        gamma_blocked: gamma(bits, lb),
        gamma_csr32: gamma(csr32, lb),
    }
}

/// Footprint tables for one matrix at both precisions, covering the six
/// base schemes plus the w/o-CSR variants over all 64 block sizes.
#[derive(Debug, Clone)]
pub struct MatrixTables {
    pub single: FootprintTable,
    pub double: FootprintTable,
}

impl MatrixTables {
    pub fn compute(a: &SparseMatrix) -> MatrixTables {
        let mut schemes = Scheme::s6().to_vec();
        schemes.extend(Scheme::without_csr_variants());
        let sizes = b64();
        MatrixTables {
            single: FootprintTable::compute(a, &schemes, &sizes, Precision::Single),
            double: FootprintTable::compute(a, &schemes, &sizes, Precision::Double),
        }
    }

    pub fn for_precision(&self, p: Precision) -> &FootprintTable {
        match p {
            Precision::Single => &self.single,
            Precision::Double => &self.double,
        }
    }
}

/// Builds the full corpus record for one matrix.
pub fn build_record(id: &str, kind: &str, a: &SparseMatrix) -> (CorpusRecord, MatrixTables) {
    let tables = MatrixTables::compute(a);
    let record = CorpusRecord {
        id: id.to_string(),
        kind: kind.to_string(),
        m: a.rows(),
        n: a.cols(),
        symmetry: a.symmetry(),
        nnz_all: a.nnz_all(),
        nnz_stored: a.nnz_stored(),
        rho: a.density(),
        prnnz_std: a.row_uniformity(),
        single: precision_metrics(a, &tables.single),
        double: precision_metrics(a, &tables.double),
        fingerprint: fingerprint(a),
    };
    (record, tables)
}

#[derive(Debug, Clone, Copy)]
pub struct FilterOptions {
    /// Keep only matrices with strictly more than this many logical
    /// nonzeros; `None` disables the threshold.
    pub min_nnz_exclusive: Option<u64>,
    /// Drop matrices whose structure fingerprint was already seen.
    pub dedup_structure: bool,
}

impl Default for FilterOptions {
    fn default() -> Self {
        FilterOptions {
            min_nnz_exclusive: Some(100_000),
            dedup_structure: true,
        }
    }
}

/// Result of corpus selection: indices of kept records and counts per
/// problem kind.
#[derive(Debug, Clone)]
pub struct FilterOutcome {
    pub kept: Vec<usize>,
    pub kind_counts: BTreeMap<String, usize>,
}

/// Applies the selection rules: nonzero threshold (strictly more than)
/// and unique nonzero structure.
pub fn filter_corpus(records: &[CorpusRecord], opts: FilterOptions) -> FilterOutcome {
    let mut seen = std::collections::HashSet::new();
    let mut kept = Vec::new();
    let mut kind_counts = BTreeMap::new();
    for (i, rec) in records.iter().enumerate() {
        if let Some(threshold) = opts.min_nnz_exclusive {
            if rec.nnz_all <= threshold {
                continue;
            }
        }
        if opts.dedup_structure && !seen.insert(rec.fingerprint) {
            continue;
        }
        kept.push(i);
        *kind_counts.entry(rec.kind.clone()).or_insert(0) += 1;
    }
    FilterOutcome { kept, kind_counts }
}

/// Per-problem-kind savings statistics plus scatter series over density
/// and row-uniformity, in both all/stored variants.
#[derive(Debug, Clone, Serialize)]
pub struct CriterionBreakdown {
    pub precision: Precision,
    pub by_kind: Vec<KindStats>,
    pub scatter_rho: AllStored<Vec<(f64, f64)>>,
    pub scatter_prnnz: AllStored<Vec<(f64, f64)>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct KindStats {
    pub kind: String,
    pub count: usize,
    pub min: f64,
    pub avg: f64,
    pub max: f64,
}

pub fn criterion_breakdown(records: &[CorpusRecord], p: Precision) -> CriterionBreakdown {
    let mut groups: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    let mut scatter_rho = AllStored { all: Vec::new(), stored: Vec::new() };
    let mut scatter_prnnz = AllStored { all: Vec::new(), stored: Vec::new() };
    for rec in records {
        let lambda = rec.metrics(p).lambda;
        groups.entry(&rec.kind).or_default().push(lambda);
        scatter_rho.all.push((rec.rho.all, lambda));
        scatter_rho.stored.push((rec.rho.stored, lambda));
        scatter_prnnz.all.push((rec.prnnz_std.all, lambda));
        scatter_prnnz.stored.push((rec.prnnz_std.stored, lambda));
    }
    let by_kind = groups
        .into_iter()
        .map(|(kind, values)| {
            let stats = UStats::from_values(&values).expect("nonempty group");
            KindStats {
                kind: kind.to_string(),
                count: values.len(),
                min: stats.min,
                avg: stats.mean,
                max: stats.max,
            }
        })
        .collect();
    CriterionBreakdown {
        precision: p,
        by_kind,
        scatter_rho,
        scatter_prnnz,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConsistencyParams {
    pub subset_size: usize,
    pub trials: usize,
    pub seed: u64,
}

impl Default for ConsistencyParams {
    fn default() -> Self {
        ConsistencyParams {
            subset_size: 200,
            trials: 50,
            seed: 0,
        }
    }
}

/// Standard deviations of per-subset average and maximum deltas, raw
/// and normalized by the full-corpus statistics (average normalized by
/// the corpus average, maximum by the corpus maximum).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyResult {
    pub scheme: String,
    pub size_set: String,
    pub precision: Precision,
    pub subset_size: usize,
    pub trials: usize,
    pub seed: u64,
    pub std_dev_avg: f64,
    pub std_dev_max: f64,
    pub normalized_avg: Option<f64>,
    pub normalized_max: Option<f64>,
}

fn population_std_dev(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt()
}

/// Draws `count` distinct indices from 0..n by partial Fisher-Yates
/// over an index array, using `next_u64` modulo the remaining range.
/// The generator is ChaCha8, so the draw is reproducible across
/// platforms for a fixed seed.
fn sample_without_replacement(rng: &mut ChaCha8Rng, n: usize, count: usize) -> Vec<usize> {
    let mut indices: Vec<usize> = (0..n).collect();
    for i in 0..count {
        let j = i + (rng.next_u64() % (n - i) as u64) as usize;
        indices.swap(i, j);
    }
    indices.truncate(count);
    indices
}

/// Measures the spread of per-subset delta statistics over repeated
/// random subsets of the corpus.
///
/// `deltas` holds the per-matrix delta of the tested (scheme, size set,
/// precision) configuration; `scheme`, `size_set` and `p` label the
/// result only.
pub fn consistency_experiment(
    deltas: &[f64],
    scheme: &str,
    size_set: &str,
    p: Precision,
    params: &ConsistencyParams,
) -> Result<ConsistencyResult, StatsError> {
    if deltas.is_empty() {
        return Err(StatsError::EmptyCorpus);
    }
    if params.subset_size > deltas.len() {
        return Err(StatsError::SubsetTooLarge {
            subset: params.subset_size,
            corpus: deltas.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut avgs = Vec::with_capacity(params.trials);
    let mut maxes = Vec::with_capacity(params.trials);
    for _ in 0..params.trials {
        let subset = sample_without_replacement(&mut rng, deltas.len(), params.subset_size);
        let values: Vec<f64> = subset.iter().map(|&i| deltas[i]).collect();
        let stats = UStats::from_values(&values).expect("nonempty subset");
        avgs.push(stats.mean);
        maxes.push(stats.max);
    }
    let std_dev_avg = population_std_dev(&avgs);
    let std_dev_max = population_std_dev(&maxes);
    let full = UStats::from_values(deltas).expect("nonempty corpus");
    let normalize = |std: f64, denom: f64| {
        if denom.abs() < f64::EPSILON {
            None
        } else {
            Some(std / denom * 100.0)
        }
    };
    Ok(ConsistencyResult {
        scheme: scheme.to_string(),
        size_set: size_set.to_string(),
        precision: p,
        subset_size: params.subset_size,
        trials: params.trials,
        seed: params.seed,
        std_dev_avg,
        std_dev_max,
        normalized_avg: normalize(std_dev_avg, full.mean),
        normalized_max: normalize(std_dev_max, full.max),
    })
}

/// Per-matrix deltas of a (scheme, sizes) space from precomputed
/// tables.
pub fn scheme_deltas(
    tables: &[MatrixTables],
    scheme: Scheme,
    sizes: &[BlockSize],
    p: Precision,
) -> Result<Vec<f64>, StatsError> {
    let space = SearchSpace::new(vec![scheme], sizes.to_vec())?;
    tables
        .iter()
        .map(|t| Ok(delta_from_table(t.for_precision(p), &space)?))
        .collect()
}
