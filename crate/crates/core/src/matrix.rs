//! Sparse matrix representation, Matrix Market I/O and matrix-level
//! reference quantities (CSR32 footprint, lower bound, density, row
//! uniformity).
//!
//! Matrices are kept in normalized stored-element form: unique element
//! positions sorted lexicographically by (row, col), with symmetric
//! matrices holding only their lower triangle (diagonal included).
//! Numeric values are not part of [`SparseMatrix`]; the codec carries
//! them separately.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Symmetry {
    General,
    Symmetric,
}

impl fmt::Display for Symmetry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Symmetry::General => write!(f, "general"),
            Symmetry::Symmetric => write!(f, "symmetric"),
        }
    }
}

/// Bits per stored nonzero value; IEEE 754 binary32 or binary64.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Precision {
    Single,
    Double,
}

impl Precision {
    pub const BOTH: [Precision; 2] = [Precision::Single, Precision::Double];

    pub fn bits(self) -> u64 {
        match self {
            Precision::Single => 32,
            Precision::Double => 64,
        }
    }

    pub fn from_bits(b: u64) -> Option<Self> {
        match b {
            32 => Some(Precision::Single),
            64 => Some(Precision::Double),
            _ => None,
        }
    }
}

impl fmt::Display for Precision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.bits())
    }
}

/// A pair of metric values computed once over all logical nonzeros and
/// once over the stored elements only. The two coincide for general
/// matrices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AllStored<T> {
    pub all: T,
    pub stored: T,
}

#[derive(Debug, Error)]
pub enum MatrixError {
    #[error("matrix dimensions must be positive")]
    EmptyDimensions,
    #[error("element ({0}, {1}) outside {2}x{3} matrix")]
    OutOfRange(u32, u32, u32, u32),
    #[error("elements must be unique and sorted lexicographically by (row, col)")]
    Unsorted,
    #[error("symmetric matrix must be square")]
    NotSquare,
    #[error("symmetric matrix element ({0}, {1}) above the diagonal")]
    UpperTriangle(u32, u32),
}

#[derive(Debug, Error)]
pub enum MmError {
    #[error("line {line}: {msg}")]
    Malformed { line: usize, msg: String },
    #[error("unsupported Matrix Market field kind `{0}` (only real, integer and pattern are supported)")]
    UnsupportedField(String),
    #[error("unsupported Matrix Market symmetry kind `{0}` (only general and symmetric are supported)")]
    UnsupportedSymmetry(String),
    #[error("unsupported Matrix Market format `{0}` (only coordinate is supported)")]
    UnsupportedFormat(String),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
}

/// Normalized sparse matrix: dimensions, symmetry kind and sorted
/// unique stored element positions (0-based).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparseMatrix {
    m: u32,
    n: u32,
    symmetry: Symmetry,
    elements: Vec<(u32, u32)>,
    diagonal: u64,
}

impl SparseMatrix {
    /// Builds a matrix from already sorted, unique element coordinates.
    pub fn new(
        m: u32,
        n: u32,
        symmetry: Symmetry,
        elements: Vec<(u32, u32)>,
    ) -> Result<Self, MatrixError> {
        if m == 0 || n == 0 {
            return Err(MatrixError::EmptyDimensions);
        }
        if symmetry == Symmetry::Symmetric && m != n {
            return Err(MatrixError::NotSquare);
        }
        let mut diagonal = 0u64;
        for (i, &(r, c)) in elements.iter().enumerate() {
            if r >= m || c >= n {
                return Err(MatrixError::OutOfRange(r, c, m, n));
            }
            if symmetry == Symmetry::Symmetric && r < c {
                return Err(MatrixError::UpperTriangle(r, c));
            }
            if i > 0 && elements[i - 1] >= (r, c) {
                return Err(MatrixError::Unsorted);
            }
            if r == c {
                diagonal += 1;
            }
        }
        Ok(SparseMatrix {
            m,
            n,
            symmetry,
            elements,
            diagonal,
        })
    }

    /// Builds a matrix from unsorted coordinates, sorting and
    /// collapsing duplicates. Symmetric coordinates are reflected into
    /// the lower triangle.
    pub fn from_coords(
        m: u32,
        n: u32,
        symmetry: Symmetry,
        coords: impl IntoIterator<Item = (u32, u32)>,
    ) -> Result<Self, MatrixError> {
        let mut elements: Vec<(u32, u32)> = coords
            .into_iter()
            .map(|(r, c)| {
                if symmetry == Symmetry::Symmetric && r < c {
                    (c, r)
                } else {
                    (r, c)
                }
            })
            .collect();
        elements.sort_unstable();
        elements.dedup();
        SparseMatrix::new(m, n, symmetry, elements)
    }

    pub fn rows(&self) -> u32 {
        self.m
    }

    pub fn cols(&self) -> u32 {
        self.n
    }

    pub fn symmetry(&self) -> Symmetry {
        self.symmetry
    }

    pub fn elements(&self) -> &[(u32, u32)] {
        &self.elements
    }

    pub fn nnz_stored(&self) -> u64 {
        self.elements.len() as u64
    }

    /// Number of logical nonzeros; mirrors off-diagonal stored elements
    /// for symmetric matrices.
    pub fn nnz_all(&self) -> u64 {
        match self.symmetry {
            Symmetry::General => self.nnz_stored(),
            Symmetry::Symmetric => 2 * self.nnz_stored() - self.diagonal,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// Whole-matrix CSR with 32-bit indices: values, nnz column
    /// indices, and m+1 row pointers.
    pub fn csr32_footprint(&self, p: Precision) -> u64 {
        let nnz = self.nnz_stored();
        nnz * p.bits() + nnz * 32 + (self.m as u64 + 1) * 32
    }

    /// Value bits only; structural information is negligible for the
    /// bound.
    pub fn lower_bound(&self, p: Precision) -> u64 {
        self.nnz_stored() * p.bits()
    }

    /// Nonzero density in percents, nnz / (m * n) * 100.
    pub fn density(&self) -> AllStored<f64> {
        let cells = self.m as f64 * self.n as f64;
        AllStored {
            all: self.nnz_all() as f64 / cells * 100.0,
            stored: self.nnz_stored() as f64 / cells * 100.0,
        }
    }

    /// Per-row nonzero counts of the stored elements.
    pub fn row_counts_stored(&self) -> Vec<u64> {
        let mut counts = vec![0u64; self.m as usize];
        for &(r, _) in &self.elements {
            counts[r as usize] += 1;
        }
        counts
    }

    /// Per-row counts of all logical nonzeros (mirrored for symmetric).
    pub fn row_counts_all(&self) -> Vec<u64> {
        let mut counts = vec![0u64; self.m as usize];
        for &(r, c) in &self.elements {
            counts[r as usize] += 1;
            if self.symmetry == Symmetry::Symmetric && r != c {
                counts[c as usize] += 1;
            }
        }
        counts
    }

    /// Population standard deviation of the per-row relative nonzero
    /// counts prnnz(i) = rnnz(i) / n * 100.
    pub fn row_uniformity(&self) -> AllStored<f64> {
        AllStored {
            all: prnnz_std_dev(&self.row_counts_all(), self.n),
            stored: prnnz_std_dev(&self.row_counts_stored(), self.n),
        }
    }

    /// Emits the matrix in Matrix Market coordinate form. With `values`
    /// absent every element is written with value 1.
    pub fn to_matrix_market(&self, values: Option<&[f64]>) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "%%MatrixMarket matrix coordinate real {}\n",
            self.symmetry
        ));
        out.push_str(&format!("{} {} {}\n", self.m, self.n, self.elements.len()));
        for (i, &(r, c)) in self.elements.iter().enumerate() {
            let v = values.map_or(1.0, |vs| vs[i]);
            out.push_str(&format!("{} {} {:?}\n", r + 1, c + 1, v));
        }
        out
    }
}

fn prnnz_std_dev(counts: &[u64], n: u32) -> f64 {
    let m = counts.len() as f64;
    let prnnz: Vec<f64> = counts
        .iter()
        .map(|&c| c as f64 / n as f64 * 100.0)
        .collect();
    let mean = prnnz.iter().sum::<f64>() / m;
    let var = prnnz.iter().map(|p| (p - mean) * (p - mean)).sum::<f64>() / m;
    var.sqrt()
}

/// Outcome of parsing a Matrix Market file: the normalized matrix plus
/// the values aligned with its stored elements (pattern files get 1.0).
#[derive(Debug, Clone)]
pub struct ParsedMatrix {
    pub matrix: SparseMatrix,
    pub values: Vec<f64>,
}

/// Parses a Matrix Market coordinate file with field real, integer or
/// pattern and symmetry general or symmetric.
///
/// Explicitly stored zero values are dropped; duplicate coordinates
/// collapse to one stored position (first occurrence's value wins);
/// symmetric entries are reflected into the lower triangle.
pub fn parse_matrix_market(text: &str) -> Result<ParsedMatrix, MmError> {
    let mut lines = text.lines().enumerate();

    let (_, header) = lines
        .next()
        .ok_or_else(|| malformed(1, "empty input"))?;
    let tokens: Vec<&str> = header.split_whitespace().collect();
    if tokens.len() < 5 || !tokens[0].eq_ignore_ascii_case("%%MatrixMarket") {
        return Err(malformed(1, "expected `%%MatrixMarket matrix coordinate <field> <symmetry>` header"));
    }
    if !tokens[1].eq_ignore_ascii_case("matrix") {
        return Err(malformed(1, &format!("unsupported object `{}`", tokens[1])));
    }
    if !tokens[2].eq_ignore_ascii_case("coordinate") {
        return Err(MmError::UnsupportedFormat(tokens[2].to_string()));
    }
    let field = tokens[3].to_ascii_lowercase();
    let pattern = match field.as_str() {
        "real" | "integer" => false,
        "pattern" => true,
        _ => return Err(MmError::UnsupportedField(field)),
    };
    let symmetry = match tokens[4].to_ascii_lowercase().as_str() {
        "general" => Symmetry::General,
        "symmetric" => Symmetry::Symmetric,
        other => return Err(MmError::UnsupportedSymmetry(other.to_string())),
    };

    // size line: first non-comment, non-blank line after the header
    let mut size: Option<(u32, u32, u64)> = None;
    let mut entries: Vec<((u32, u32), f64)> = Vec::new();
    for (idx, line) in lines {
        let lineno = idx + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        let mut fields = line.split_whitespace();
        if size.is_none() {
            let m = parse_num::<u32>(fields.next(), lineno, "rows")?;
            let n = parse_num::<u32>(fields.next(), lineno, "cols")?;
            let nnz = parse_num::<u64>(fields.next(), lineno, "nnz")?;
            size = Some((m, n, nnz));
            entries.reserve(nnz as usize);
            continue;
        }
        let (m, n, _) = size.unwrap();
        let i = parse_num::<u32>(fields.next(), lineno, "row index")?;
        let j = parse_num::<u32>(fields.next(), lineno, "col index")?;
        if i < 1 || i > m || j < 1 || j > n {
            return Err(malformed(
                lineno,
                &format!("index ({i}, {j}) outside {m}x{n} matrix"),
            ));
        }
        let v = if pattern {
            1.0
        } else {
            parse_num::<f64>(fields.next(), lineno, "value")?
        };
        if v == 0.0 {
            continue; // explicitly stored zero
        }
        let (mut r, mut c) = (i - 1, j - 1);
        if symmetry == Symmetry::Symmetric && r < c {
            std::mem::swap(&mut r, &mut c);
        }
        entries.push(((r, c), v));
    }
    let (m, n, declared) = size.ok_or_else(|| malformed(1, "missing size line"))?;
    if entries.len() as u64 > declared {
        // tolerated: nnz line counts entries before zero-dropping, so
        // only flag when we read more than declared
        return Err(malformed(0, "more entries than declared in size line"));
    }

    entries.sort_by_key(|&(pos, _)| pos);
    entries.dedup_by_key(|&mut (pos, _)| pos);

    let (coords, values): (Vec<(u32, u32)>, Vec<f64>) = entries.into_iter().unzip();
    let matrix = SparseMatrix::new(m, n, symmetry, coords)?;
    Ok(ParsedMatrix { matrix, values })
}

fn malformed(line: usize, msg: &str) -> MmError {
    MmError::Malformed {
        line,
        msg: msg.to_string(),
    }
}

fn parse_num<T: std::str::FromStr>(
    tok: Option<&str>,
    line: usize,
    what: &str,
) -> Result<T, MmError> {
    tok.ok_or_else(|| malformed(line, &format!("missing {what}")))?
        .parse()
        .map_err(|_| malformed(line, &format!("invalid {what}")))
}
