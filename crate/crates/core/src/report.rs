//! Report emission: per-matrix analysis JSON and the corpus report
//! directory (scheme/block-size statistics, savings and lower-bound
//! tables, ranking, breakdown data series, consistency results).
//!
//! All emitted files are deterministic functions of the inputs and the
//! configured seed; reruns produce byte-identical output.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::block::{BlockSize, Scheme};
use crate::matrix::{parse_matrix_market, AllStored, Precision, SparseMatrix};
use crate::optimize::{
    b14, b20, b8, optimal_in, rank_block_sizes, SearchSpace, UStats,
};
use crate::block::b64;
use crate::stats::{
    build_record, consistency_experiment, criterion_breakdown, filter_corpus, scheme_deltas,
    ConsistencyParams, CorpusRecord, FilterOptions, MatrixTables, StatsError,
};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Optimize(#[from] crate::optimize::OptimizeError),
    #[error("all {0} input matrices failed")]
    AllFailed(usize),
}

/// Formats a percent value with two decimals (half-to-even ties).
pub fn pct(v: f64) -> String {
    format!("{:.2}", v)
}

/// One cell of a per-matrix analysis table.
#[derive(Debug, Serialize, Deserialize)]
pub struct CellReport {
    pub scheme: String,
    pub size: String,
    pub bits: u64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PrecisionReport {
    pub value_bits: u64,
    pub cells: Vec<CellReport>,
    pub optimal_scheme: String,
    pub optimal_size: String,
    pub optimal_bits: u64,
    pub csr32_bits: u64,
    pub lower_bound: u64,
    pub lambda_pct: String,
    pub gamma_blocked_pct: String,
    pub gamma_csr32_pct: String,
}

/// Per-matrix analysis output: every requested cell plus the matrix
/// metrics.
#[derive(Debug, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub schema_version: u32,
    pub id: String,
    pub rows: u32,
    pub cols: u32,
    pub symmetry: String,
    pub nnz_all: u64,
    pub nnz_stored: u64,
    pub rho_all_pct: String,
    pub rho_stored_pct: String,
    pub prnnz_std_all_pct: String,
    pub prnnz_std_stored_pct: String,
    pub precisions: Vec<PrecisionReport>,
}

pub fn analyze_matrix(
    id: &str,
    a: &SparseMatrix,
    schemes: &[Scheme],
    sizes: &[BlockSize],
    precisions: &[Precision],
) -> Result<AnalysisReport, ReportError> {
    let rho = a.density();
    let prnnz = a.row_uniformity();
    let mut reports = Vec::new();
    for &p in precisions {
        let table = crate::block::FootprintTable::compute(a, schemes, sizes, p);
        let cells = table
            .cells()
            .map(|(s, sz, bits)| CellReport {
                scheme: s.to_string(),
                size: sz.to_string(),
                bits,
            })
            .collect();
        let space = SearchSpace::new(schemes.to_vec(), sizes.to_vec())?;
        let (scheme, size, bits) = optimal_in(&table, &space)?;
        let csr32 = a.csr32_footprint(p);
        let lb = a.lower_bound(p);
        reports.push(PrecisionReport {
            value_bits: p.bits(),
            cells,
            optimal_scheme: scheme.to_string(),
            optimal_size: size.to_string(),
            optimal_bits: bits,
            csr32_bits: csr32,
            lower_bound: lb,
            lambda_pct: pct(crate::stats::lambda_savings(bits, csr32)),
            gamma_blocked_pct: pct(crate::stats::gamma(bits, lb)),
            gamma_csr32_pct: pct(crate::stats::gamma(csr32, lb)),
        });
    }
    Ok(AnalysisReport {
        schema_version: SCHEMA_VERSION,
        id: id.to_string(),
        rows: a.rows(),
        cols: a.cols(),
        symmetry: a.symmetry().to_string(),
        nnz_all: a.nnz_all(),
        nnz_stored: a.nnz_stored(),
        rho_all_pct: pct(rho.all),
        rho_stored_pct: pct(rho.stored),
        prnnz_std_all_pct: pct(prnnz.all),
        prnnz_std_stored_pct: pct(prnnz.stored),
        precisions: reports,
    })
}

/// One corpus input: where the matrix lives plus its labels.
#[derive(Debug, Clone)]
pub struct CorpusInput {
    pub id: String,
    pub kind: String,
    pub path: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorpusRunConfig {
    pub precisions: Vec<Precision>,
    pub apply_nnz_filter: bool,
    pub dedup_structure: bool,
    pub seed: u64,
    pub trials: usize,
    /// Defaults to min(200, corpus size) when unset.
    pub subset_size: Option<usize>,
}

impl Default for CorpusRunConfig {
    fn default() -> Self {
        CorpusRunConfig {
            precisions: Precision::BOTH.to_vec(),
            apply_nnz_filter: false,
            dedup_structure: true,
            seed: 0,
            trials: 50,
            subset_size: None,
        }
    }
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    schema_version: u32,
    tool_version: &'a str,
    config: &'a CorpusRunConfig,
    input_count: usize,
    kept_count: usize,
    failed_count: usize,
}

/// Outcome of a corpus run: how many matrices survived each stage.
#[derive(Debug)]
pub struct CorpusRunSummary {
    pub inputs: usize,
    pub kept: usize,
    pub failed: usize,
}

/// Runs the full corpus pipeline and writes the report directory.
/// Failures of individual matrices are recorded in `errors.csv` and do
/// not abort the run; only a fully failed corpus is an error.
pub fn corpus_run(
    inputs: &[CorpusInput],
    config: &CorpusRunConfig,
    out_dir: &Path,
) -> Result<CorpusRunSummary, ReportError> {
    fs::create_dir_all(out_dir)?;

    let results: Vec<Result<(CorpusRecord, MatrixTables), String>> = inputs
        .par_iter()
        .map(|input| {
            fs::read_to_string(&input.path)
                .map_err(|e| format!("{}: {e}", input.path.display()))
                .and_then(|text| {
                    parse_matrix_market(&text)
                        .map_err(|e| format!("{}: {e}", input.path.display()))
                })
                .map(|parsed| build_record(&input.id, &input.kind, &parsed.matrix))
        })
        .collect();

    let mut errors: Vec<(String, String)> = Vec::new();
    let mut records: Vec<CorpusRecord> = Vec::new();
    let mut tables: Vec<MatrixTables> = Vec::new();
    for (input, result) in inputs.iter().zip(results) {
        match result {
            Ok((rec, tbl)) => {
                records.push(rec);
                tables.push(tbl);
            }
            Err(e) => errors.push((input.id.clone(), e)),
        }
    }
    if records.is_empty() {
        write_errors(out_dir, &errors)?;
        return Err(ReportError::AllFailed(inputs.len()));
    }

    let filter = FilterOptions {
        min_nnz_exclusive: if config.apply_nnz_filter {
            Some(100_000)
        } else {
            None
        },
        dedup_structure: config.dedup_structure,
    };
    let outcome = filter_corpus(&records, filter);
    let kept_records: Vec<CorpusRecord> =
        outcome.kept.iter().map(|&i| records[i].clone()).collect();
    let kept_tables: Vec<MatrixTables> =
        outcome.kept.iter().map(|&i| tables[i].clone()).collect();

    write_errors(out_dir, &errors)?;
    write_kind_counts(out_dir, &outcome.kind_counts)?;
    write_records_csv(out_dir, &kept_records)?;

    for &p in &config.precisions {
        write_scheme_stats(out_dir, &kept_tables, p)?;
        write_reduced_set_stats(out_dir, &kept_tables, p, false)?;
        write_reduced_set_stats(out_dir, &kept_tables, p, true)?;
        write_lambda_stats(out_dir, &kept_records, p)?;
        write_gamma_stats(out_dir, &kept_records, p)?;
        write_ranking(out_dir, &kept_tables, p)?;
        write_breakdown(out_dir, &kept_records, p)?;
        write_consistency(out_dir, &kept_tables, p, config)?;
    }

    let manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        tool_version: env!("CARGO_PKG_VERSION"),
        config,
        input_count: inputs.len(),
        kept_count: kept_records.len(),
        failed_count: errors.len(),
    };
    fs::write(
        out_dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest)?,
    )?;

    Ok(CorpusRunSummary {
        inputs: inputs.len(),
        kept: kept_records.len(),
        failed: errors.len(),
    })
}

fn precision_suffix(p: Precision) -> &'static str {
    match p {
        Precision::Single => "b32",
        Precision::Double => "b64",
    }
}

fn write_errors(out_dir: &Path, errors: &[(String, String)]) -> Result<(), ReportError> {
    let mut w = csv::Writer::from_path(out_dir.join("errors.csv"))?;
    w.write_record(["id", "error"])?;
    for (id, e) in errors {
        w.write_record([id, e])?;
    }
    w.flush()?;
    Ok(())
}

fn write_kind_counts(
    out_dir: &Path,
    counts: &BTreeMap<String, usize>,
) -> Result<(), ReportError> {
    let mut w = csv::Writer::from_path(out_dir.join("problem_kinds.csv"))?;
    w.write_record(["kind", "matrices"])?;
    for (kind, count) in counts {
        w.write_record([kind.as_str(), &count.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

fn write_records_csv(out_dir: &Path, records: &[CorpusRecord]) -> Result<(), ReportError> {
    let mut w = csv::Writer::from_path(out_dir.join("records.csv"))?;
    w.write_record([
        "id",
        "kind",
        "rows",
        "cols",
        "symmetry",
        "nnz_all",
        "nnz_stored",
        "rho_all",
        "rho_stored",
        "prnnz_std_all",
        "prnnz_std_stored",
        "optimal_bits_b32",
        "optimal_scheme_b32",
        "optimal_size_b32",
        "csr32_bits_b32",
        "lambda_b32",
        "gamma_blocked_b32",
        "gamma_csr32_b32",
        "optimal_bits_b64",
        "optimal_scheme_b64",
        "optimal_size_b64",
        "csr32_bits_b64",
        "lambda_b64",
        "gamma_blocked_b64",
        "gamma_csr32_b64",
    ])?;
    for r in records {
        w.write_record([
            r.id.as_str(),
            r.kind.as_str(),
            &r.m.to_string(),
            &r.n.to_string(),
            &r.symmetry.to_string(),
            &r.nnz_all.to_string(),
            &r.nnz_stored.to_string(),
            &pct(r.rho.all),
            &pct(r.rho.stored),
            &pct(r.prnnz_std.all),
            &pct(r.prnnz_std.stored),
            &r.single.optimal_bits.to_string(),
            &r.single.optimal_scheme,
            &r.single.optimal_size,
            &r.single.csr32_bits.to_string(),
            &pct(r.single.lambda),
            &pct(r.single.gamma_blocked),
            &pct(r.single.gamma_csr32),
            &r.double.optimal_bits.to_string(),
            &r.double.optimal_scheme,
            &r.double.optimal_size,
            &r.double.csr32_bits.to_string(),
            &pct(r.double.lambda),
            &pct(r.double.gamma_blocked),
            &pct(r.double.gamma_csr32),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn u_stats(
    tables: &[MatrixTables],
    scheme: Scheme,
    sizes: &[BlockSize],
    p: Precision,
) -> Result<UStats, ReportError> {
    let deltas = scheme_deltas(tables, scheme, sizes, p)?;
    Ok(UStats::from_values(&deltas).expect("nonempty corpus"))
}

fn write_scheme_stats(
    out_dir: &Path,
    tables: &[MatrixTables],
    p: Precision,
) -> Result<(), ReportError> {
    let name = format!("scheme_stats_{}.csv", precision_suffix(p));
    let mut w = csv::Writer::from_path(out_dir.join(name))?;
    w.write_record(["scheme", "min", "avg", "max"])?;
    for scheme in Scheme::s6() {
        let stats = u_stats(tables, scheme, &b64(), p)?;
        w.write_record([
            &scheme.to_string(),
            &pct(stats.min),
            &pct(stats.mean),
            &pct(stats.max),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn reduced_size_sets() -> [(&'static str, Vec<BlockSize>); 4] {
    [
        ("B64", b64()),
        ("B20", b20()),
        ("B14", b14()),
        ("B8", b8()),
    ]
}

fn write_reduced_set_stats(
    out_dir: &Path,
    tables: &[MatrixTables],
    p: Precision,
    without_csr: bool,
) -> Result<(), ReportError> {
    let schemes: [Scheme; 2] = if without_csr {
        Scheme::without_csr_variants()
    } else {
        [
            Scheme::MinFixed(crate::block::FormatSet::ALL),
            Scheme::Adaptive(crate::block::FormatSet::ALL),
        ]
    };
    let stem = if without_csr {
        "reduced_sets_wo_csr"
    } else {
        "reduced_sets"
    };
    let name = format!("{stem}_{}.csv", precision_suffix(p));
    let mut w = csv::Writer::from_path(out_dir.join(name))?;
    w.write_record(["sizes", "scheme", "avg", "max"])?;
    for (label, sizes) in reduced_size_sets() {
        for scheme in schemes {
            let stats = u_stats(tables, scheme, &sizes, p)?;
            w.write_record([
                label,
                &scheme.to_string(),
                &pct(stats.mean),
                &pct(stats.max),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn write_lambda_stats(
    out_dir: &Path,
    records: &[CorpusRecord],
    p: Precision,
) -> Result<(), ReportError> {
    let values: Vec<f64> = records.iter().map(|r| r.metrics(p).lambda).collect();
    let stats = UStats::from_values(&values).expect("nonempty corpus");
    let name = format!("csr32_savings_{}.csv", precision_suffix(p));
    let mut w = csv::Writer::from_path(out_dir.join(name))?;
    w.write_record(["statistic", "lambda"])?;
    w.write_record(["min", &pct(stats.min)])?;
    w.write_record(["avg", &pct(stats.mean)])?;
    w.write_record(["max", &pct(stats.max)])?;
    w.flush()?;
    Ok(())
}

fn write_gamma_stats(
    out_dir: &Path,
    records: &[CorpusRecord],
    p: Precision,
) -> Result<(), ReportError> {
    let blocked: Vec<f64> = records.iter().map(|r| r.metrics(p).gamma_blocked).collect();
    let csr32: Vec<f64> = records.iter().map(|r| r.metrics(p).gamma_csr32).collect();
    let sb = UStats::from_values(&blocked).expect("nonempty corpus");
    let sc = UStats::from_values(&csr32).expect("nonempty corpus");
    let name = format!("lower_bound_excess_{}.csv", precision_suffix(p));
    let mut w = csv::Writer::from_path(out_dir.join(name))?;
    w.write_record(["statistic", "blocked_optimal", "csr32"])?;
    w.write_record(["min", &pct(sb.min), &pct(sc.min)])?;
    w.write_record(["avg", &pct(sb.mean), &pct(sc.mean)])?;
    w.write_record(["max", &pct(sb.max), &pct(sc.max)])?;
    w.flush()?;
    Ok(())
}

fn write_ranking(
    out_dir: &Path,
    tables: &[MatrixTables],
    p: Precision,
) -> Result<(), ReportError> {
    let per_precision: Vec<_> = tables.iter().map(|t| t.for_precision(p).clone()).collect();
    let ranked = rank_block_sizes(&per_precision)?;
    let name = format!("block_size_ranking_{}.csv", precision_suffix(p));
    let mut w = csv::Writer::from_path(out_dir.join(name))?;
    w.write_record(["rank", "size", "avg", "max"])?;
    for (i, r) in ranked.iter().enumerate() {
        w.write_record([
            &(i + 1).to_string(),
            &r.size.to_string(),
            &pct(r.avg),
            &pct(r.max),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn write_breakdown(
    out_dir: &Path,
    records: &[CorpusRecord],
    p: Precision,
) -> Result<(), ReportError> {
    let bd = criterion_breakdown(records, p);
    let suffix = precision_suffix(p);

    let mut w = csv::Writer::from_path(out_dir.join(format!("savings_by_kind_{suffix}.csv")))?;
    w.write_record(["kind", "matrices", "min", "avg", "max"])?;
    for g in &bd.by_kind {
        w.write_record([
            g.kind.as_str(),
            &g.count.to_string(),
            &pct(g.min),
            &pct(g.avg),
            &pct(g.max),
        ])?;
    }
    w.flush()?;

    write_scatter(
        out_dir,
        &format!("savings_vs_rho_{suffix}.csv"),
        "rho",
        &bd.scatter_rho,
    )?;
    write_scatter(
        out_dir,
        &format!("savings_vs_prnnz_{suffix}.csv"),
        "prnnz_std",
        &bd.scatter_prnnz,
    )?;
    Ok(())
}

fn write_scatter(
    out_dir: &Path,
    name: &str,
    x_label: &str,
    series: &AllStored<Vec<(f64, f64)>>,
) -> Result<(), ReportError> {
    let mut w = csv::Writer::from_path(out_dir.join(name))?;
    w.write_record(["variant", x_label, "lambda"])?;
    for (variant, points) in [("all", &series.all), ("stored", &series.stored)] {
        for &(x, lambda) in points {
            let mut xs = String::new();
            write!(xs, "{x:.6}").unwrap();
            w.write_record([variant, &xs, &pct(lambda)])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn write_consistency(
    out_dir: &Path,
    tables: &[MatrixTables],
    p: Precision,
    config: &CorpusRunConfig,
) -> Result<(), ReportError> {
    let subset = config
        .subset_size
        .unwrap_or_else(|| tables.len().min(200));
    let params = ConsistencyParams {
        subset_size: subset,
        trials: config.trials,
        seed: config.seed,
    };
    let schemes = [
        Scheme::MinFixed(crate::block::FormatSet::ALL),
        Scheme::Adaptive(crate::block::FormatSet::ALL),
    ];
    let name = format!("consistency_{}.csv", precision_suffix(p));
    let mut w = csv::Writer::from_path(out_dir.join(name))?;
    w.write_record([
        "scheme",
        "sizes",
        "std_dev_avg",
        "std_dev_max",
        "normalized_avg",
        "normalized_max",
    ])?;
    for scheme in schemes {
        for (label, sizes) in reduced_size_sets() {
            let deltas = scheme_deltas(tables, scheme, &sizes, p)?;
            let result =
                consistency_experiment(&deltas, &scheme.to_string(), label, p, &params)?;
            w.write_record([
                scheme.to_string(),
                label.to_string(),
                pct(result.std_dev_avg),
                pct(result.std_dev_max),
                result.normalized_avg.map_or("n/a".to_string(), pct),
                result.normalized_max.map_or("n/a".to_string(), pct),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
