//! Bit-exact serialization of a matrix in any (scheme, block size,
//! precision) configuration.
//!
//! The payload bitstream carries exactly the bits the footprint model
//! charges: an optional collective format tag, per-block-row nonzero
//! block counts, and per nonzero block its column index, an optional
//! per-block tag, and the block body. The header (including a per-block
//! nonzero-count table that makes COO and CSR bodies self-delimiting on
//! decode) is byte-aligned and excluded from footprint accounting.

use std::path::Path;

use thiserror::Error;

use crate::bits::{BitReader, BitWriter, BitstreamOverrun};
use crate::block::{
    adaptive_block_formats, block_nnz_map, ceil_log2, format_sums, min_fixed_format,
    mmf_from_sums, BlockError, BlockFormat, BlockSize, FormatSet, Scheme,
};
use crate::matrix::{MatrixError, Precision, SparseMatrix, Symmetry};

pub const MAGIC: &[u8; 8] = b"SBMCNTR1";
pub const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CodecError {
    #[error("matrix is empty")]
    EmptyMatrix,
    #[error("value count {got} does not match stored element count {expected}")]
    ValueCountMismatch { got: usize, expected: usize },
    #[error("value precision does not match requested precision {0}")]
    PrecisionMismatch(Precision),
    #[error("explicit zero value in dense-format block ({row}, {col})")]
    ExplicitZeroInDense { row: u32, col: u32 },
    #[error("bad container magic")]
    BadMagic,
    #[error("unknown container version {0}")]
    UnknownVersion(u32),
    #[error("invalid container header: {0}")]
    InvalidHeader(String),
    #[error("container truncated")]
    Truncated,
    #[error("corrupt payload: {0}")]
    Corrupt(String),
    #[error("payload length {payload} bits disagrees with model footprint {model} bits")]
    ModelMismatch { payload: u64, model: u64 },
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error(transparent)]
    Block(#[from] BlockError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<BitstreamOverrun> for CodecError {
    fn from(e: BitstreamOverrun) -> Self {
        CodecError::Corrupt(e.to_string())
    }
}

/// Nonzero values aligned with a matrix's stored elements, kept at
/// their exact IEEE 754 bit patterns.
#[derive(Debug, Clone, PartialEq)]
pub enum Values {
    F32(Vec<f32>),
    F64(Vec<f64>),
}

impl Values {
    pub fn len(&self) -> usize {
        match self {
            Values::F32(v) => v.len(),
            Values::F64(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn precision(&self) -> Precision {
        match self {
            Values::F32(_) => Precision::Single,
            Values::F64(_) => Precision::Double,
        }
    }

    /// Narrows or keeps `values` to match `p`.
    pub fn from_f64(p: Precision, values: &[f64]) -> Values {
        match p {
            Precision::Single => Values::F32(values.iter().map(|&v| v as f32).collect()),
            Precision::Double => Values::F64(values.to_vec()),
        }
    }

    fn bit_pattern(&self, i: usize) -> u64 {
        match self {
            Values::F32(v) => v[i].to_bits() as u64,
            Values::F64(v) => v[i].to_bits(),
        }
    }

    fn push_pattern(&mut self, bits: u64) {
        match self {
            Values::F32(v) => v.push(f32::from_bits(bits as u32)),
            Values::F64(v) => v.push(f64::from_bits(bits)),
        }
    }

    fn empty(p: Precision) -> Values {
        match p {
            Precision::Single => Values::F32(Vec::new()),
            Precision::Double => Values::F64(Vec::new()),
        }
    }
}

/// Serialized matrix container: fixed header, per-block nonzero-count
/// table, and the model-exact payload bitstream.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockedContainer {
    pub m: u32,
    pub n: u32,
    pub symmetry: Symmetry,
    pub size: BlockSize,
    pub precision: Precision,
    pub scheme: Scheme,
    pub block_nnz: Vec<u32>,
    pub payload_bits: u64,
    pub payload: Vec<u8>,
}

fn scheme_kind_param(scheme: Scheme) -> (u32, u32) {
    match scheme {
        Scheme::Fixed(f) => (0, f.index() as u32),
        Scheme::MinFixed(set) => (1, set.mask() as u32),
        Scheme::Adaptive(set) => (2, set.mask() as u32),
    }
}

fn scheme_from_kind_param(kind: u32, param: u32) -> Option<Scheme> {
    match kind {
        0 => BlockFormat::from_index(param as usize).map(Scheme::Fixed),
        1 => FormatSet::from_mask(param as u8).map(Scheme::MinFixed),
        2 => FormatSet::from_mask(param as u8).map(Scheme::Adaptive),
        _ => None,
    }
}

/// Encodes a matrix and its values into a container whose payload bit
/// length equals the model footprint exactly.
pub fn encode(
    a: &SparseMatrix,
    values: &Values,
    scheme: Scheme,
    size: BlockSize,
    p: Precision,
) -> Result<BlockedContainer, CodecError> {
    if a.is_empty() {
        return Err(CodecError::EmptyMatrix);
    }
    if values.len() != a.elements().len() {
        return Err(CodecError::ValueCountMismatch {
            got: values.len(),
            expected: a.elements().len(),
        });
    }
    if values.precision() != p {
        return Err(CodecError::PrecisionMismatch(p));
    }

    let map = block_nnz_map(a, size);
    let sums = format_sums(&map, p);
    let model_bits = mmf_from_sums(&map, &sums, scheme);

    // element indices grouped per block, in block-lexicographic order
    let (k, l) = (size.row_exp() as u32, size.col_exp() as u32);
    let mut grouped: Vec<(u32, u32, u32)> = a
        .elements()
        .iter()
        .enumerate()
        .map(|(i, &(r, c))| (r >> k, c >> l, i as u32))
        .collect();
    grouped.sort_unstable_by_key(|&(br, bc, i)| (br, bc, a.elements()[i as usize]));

    let formats: Vec<BlockFormat> = match scheme {
        Scheme::Fixed(f) => vec![f; map.blocks().len()],
        Scheme::MinFixed(set) => vec![min_fixed_format(&sums, set); map.blocks().len()],
        Scheme::Adaptive(set) => adaptive_block_formats(&map, set, p),
    };

    let n_blocks = map.block_cols() as u64;
    let col_width = ceil_log2(n_blocks) as u32;
    let count_width = ceil_log2(n_blocks + 1) as u32;
    let b = p.bits() as u32;

    let mut w = BitWriter::new();
    if let Scheme::MinFixed(_) = scheme {
        w.write_bits(formats[0].index() as u64, 2);
    }
    for &count in map.row_counts() {
        w.write_bits(count as u64, count_width);
    }

    let adaptive = matches!(scheme, Scheme::Adaptive(_));
    let mut cursor = 0usize;
    for (bi, block) in map.blocks().iter().enumerate() {
        let z = block.nnz as usize;
        let elems = &grouped[cursor..cursor + z];
        cursor += z;
        debug_assert!(elems.iter().all(|&(br, bc, _)| br == block.row && bc == block.col));

        w.write_bits(block.col as u64, col_width);
        if adaptive {
            w.write_bits(formats[bi].index() as u64, 2);
        }
        write_block_body(&mut w, a, values, elems, formats[bi], size, b)?;
    }

    let (payload, payload_bits) = w.into_bytes();
    assert_eq!(payload_bits, model_bits, "payload bits must equal model footprint");

    Ok(BlockedContainer {
        m: a.rows(),
        n: a.cols(),
        symmetry: a.symmetry(),
        size,
        precision: p,
        scheme,
        block_nnz: map.blocks().iter().map(|blk| blk.nnz).collect(),
        payload_bits,
        payload,
    })
}

fn write_block_body(
    w: &mut BitWriter,
    a: &SparseMatrix,
    values: &Values,
    elems: &[(u32, u32, u32)],
    format: BlockFormat,
    size: BlockSize,
    b: u32,
) -> Result<(), CodecError> {
    let (k, l) = (size.row_exp() as u32, size.col_exp() as u32);
    let h = size.height() as u32;
    let w_cells = size.width() as u32;
    let local = |i: u32| {
        let (r, c) = a.elements()[i as usize];
        (r & (h - 1), c & (w_cells - 1))
    };
    let z = elems.len() as u64;
    match format {
        BlockFormat::Coo => {
            for &(_, _, i) in elems {
                let (lr, lc) = local(i);
                w.write_bits(lr as u64, k);
                w.write_bits(lc as u64, l);
                w.write_bits(values.bit_pattern(i as usize), b);
            }
        }
        BlockFormat::Csr => {
            let off_width = ceil_log2(z + 1) as u32;
            let mut ends = vec![0u64; h as usize];
            for &(_, _, i) in elems {
                let (lr, _) = local(i);
                ends[lr as usize] += 1;
            }
            let mut acc = 0;
            for e in &mut ends {
                acc += *e;
                *e = acc;
            }
            for &e in &ends {
                w.write_bits(e, off_width);
            }
            for &(_, _, i) in elems {
                let (_, lc) = local(i);
                w.write_bits(lc as u64, l);
            }
            for &(_, _, i) in elems {
                w.write_bits(values.bit_pattern(i as usize), b);
            }
        }
        BlockFormat::Bitmap => {
            let mut occupancy = vec![false; (h * w_cells) as usize];
            for &(_, _, i) in elems {
                let (lr, lc) = local(i);
                occupancy[(lr * w_cells + lc) as usize] = true;
            }
            for &bit in &occupancy {
                w.write_bits(bit as u64, 1);
            }
            for &(_, _, i) in elems {
                w.write_bits(values.bit_pattern(i as usize), b);
            }
        }
        BlockFormat::Dense => {
            let mut cells = vec![0u64; (h * w_cells) as usize];
            for &(_, _, i) in elems {
                let (lr, lc) = local(i);
                let pattern = values.bit_pattern(i as usize);
                if pattern == 0 {
                    let (r, c) = a.elements()[i as usize];
                    return Err(CodecError::ExplicitZeroInDense { row: r, col: c });
                }
                cells[(lr * w_cells + lc) as usize] = pattern;
            }
            for &pattern in &cells {
                w.write_bits(pattern, b);
            }
        }
    }
    Ok(())
}

/// Decodes a container back into the matrix and its values.
pub fn decode(c: &BlockedContainer) -> Result<(SparseMatrix, Values), CodecError> {
    let size = c.size;
    let p = c.precision;
    let block_rows = (c.m as u64 + size.height() - 1) >> size.row_exp();
    let block_cols = (c.n as u64 + size.width() - 1) >> size.col_exp();
    let col_width = ceil_log2(block_cols) as u32;
    let count_width = ceil_log2(block_cols + 1) as u32;
    let b = p.bits() as u32;

    let mut r = BitReader::new(&c.payload, c.payload_bits);

    let collective = match c.scheme {
        Scheme::MinFixed(set) => {
            let tag = r.read_bits(2)?;
            let f = BlockFormat::from_index(tag as usize)
                .ok_or_else(|| CodecError::Corrupt(format!("bad format tag {tag}")))?;
            if !set.contains(f) {
                return Err(CodecError::Corrupt(format!(
                    "format {f} outside candidate set {set}"
                )));
            }
            Some(f)
        }
        Scheme::Fixed(f) => Some(f),
        Scheme::Adaptive(_) => None,
    };

    let mut row_counts = Vec::with_capacity(block_rows as usize);
    for _ in 0..block_rows {
        row_counts.push(r.read_bits(count_width)? as u32);
    }
    let total_blocks: u64 = row_counts.iter().map(|&x| x as u64).sum();
    if total_blocks != c.block_nnz.len() as u64 {
        return Err(CodecError::Corrupt(format!(
            "row counts declare {total_blocks} blocks, header table has {}",
            c.block_nnz.len()
        )));
    }

    let mut elements: Vec<((u32, u32), u64)> = Vec::new();
    let mut bi = 0usize;
    for (br, &count) in row_counts.iter().enumerate() {
        let mut prev_col: Option<u32> = None;
        if count as u64 > block_cols {
            return Err(CodecError::Corrupt(format!(
                "block row {br} declares {count} blocks on a {block_cols}-column grid"
            )));
        }
        for _ in 0..count {
            let bc = r.read_bits(col_width)? as u32;
            if bc as u64 >= block_cols {
                return Err(CodecError::Corrupt(format!("block column {bc} out of range")));
            }
            if let Some(prev) = prev_col {
                if bc <= prev {
                    return Err(CodecError::Corrupt(
                        "block columns not strictly increasing".into(),
                    ));
                }
            }
            prev_col = Some(bc);

            let format = match collective {
                Some(f) => f,
                None => {
                    let tag = r.read_bits(2)?;
                    let f = BlockFormat::from_index(tag as usize)
                        .ok_or_else(|| CodecError::Corrupt(format!("bad format tag {tag}")))?;
                    if let Scheme::Adaptive(set) = c.scheme {
                        if !set.contains(f) {
                            return Err(CodecError::Corrupt(format!(
                                "format {f} outside candidate set {set}"
                            )));
                        }
                    }
                    f
                }
            };

            let z = *c
                .block_nnz
                .get(bi)
                .ok_or_else(|| CodecError::Corrupt("block count table too short".into()))?
                as u64;
            bi += 1;
            if z == 0 || z > size.cells() {
                return Err(CodecError::Corrupt(format!("block nonzero count {z} out of range")));
            }

            read_block_body(
                &mut r,
                &mut elements,
                format,
                size,
                z,
                br as u32,
                bc,
                b,
                c.m,
                c.n,
            )?;
        }
    }

    if r.remaining() != 0 {
        return Err(CodecError::Corrupt(format!(
            "{} unread payload bits",
            r.remaining()
        )));
    }

    elements.sort_unstable_by_key(|&(pos, _)| pos);
    let mut values = Values::empty(p);
    let coords: Vec<(u32, u32)> = elements
        .iter()
        .map(|&(pos, bits)| {
            values.push_pattern(bits);
            pos
        })
        .collect();
    let matrix = SparseMatrix::new(c.m, c.n, c.symmetry, coords)?;

    // the defining invariant: payload length must match the model
    let model = crate::block::mmf(&matrix, c.scheme, size, p);
    if model != c.payload_bits {
        return Err(CodecError::ModelMismatch {
            payload: c.payload_bits,
            model,
        });
    }
    Ok((matrix, values))
}

#[allow(clippy::too_many_arguments)]
fn read_block_body(
    r: &mut BitReader<'_>,
    elements: &mut Vec<((u32, u32), u64)>,
    format: BlockFormat,
    size: BlockSize,
    z: u64,
    block_row: u32,
    block_col: u32,
    b: u32,
    m: u32,
    n: u32,
) -> Result<(), CodecError> {
    let (k, l) = (size.row_exp() as u32, size.col_exp() as u32);
    let h = size.height() as u32;
    let w_cells = size.width() as u32;
    let base_r = block_row << k;
    let base_c = block_col << l;
    let mut push = |lr: u32, lc: u32, bits: u64| -> Result<(), CodecError> {
        let (gr, gc) = (base_r + lr, base_c + lc);
        if gr >= m || gc >= n {
            return Err(CodecError::Corrupt(format!(
                "element ({gr}, {gc}) outside {m}x{n} matrix"
            )));
        }
        elements.push(((gr, gc), bits));
        Ok(())
    };
    match format {
        BlockFormat::Coo => {
            let mut prev: Option<(u32, u32)> = None;
            for _ in 0..z {
                let lr = r.read_bits(k)? as u32;
                let lc = r.read_bits(l)? as u32;
                if let Some(p) = prev {
                    if (lr, lc) <= p {
                        return Err(CodecError::Corrupt(
                            "COO block elements not strictly increasing".into(),
                        ));
                    }
                }
                prev = Some((lr, lc));
                let bits = r.read_bits(b)?;
                push(lr, lc, bits)?;
            }
        }
        BlockFormat::Csr => {
            let off_width = ceil_log2(z + 1) as u32;
            let mut ends = Vec::with_capacity(h as usize);
            let mut prev = 0u64;
            for _ in 0..h {
                let e = r.read_bits(off_width)?;
                if e < prev || e > z {
                    return Err(CodecError::Corrupt("bad CSR row offsets".into()));
                }
                ends.push(e);
                prev = e;
            }
            if prev != z {
                return Err(CodecError::Corrupt("CSR offsets do not cover the block".into()));
            }
            let mut locals = Vec::with_capacity(z as usize);
            let mut start = 0u64;
            for (lr, &end) in ends.iter().enumerate() {
                let mut prev_col: Option<u32> = None;
                for _ in start..end {
                    let lc = r.read_bits(l)? as u32;
                    if let Some(pc) = prev_col {
                        if lc <= pc {
                            return Err(CodecError::Corrupt(
                                "CSR block columns not strictly increasing".into(),
                            ));
                        }
                    }
                    prev_col = Some(lc);
                    locals.push((lr as u32, lc));
                }
                start = end;
            }
            for (lr, lc) in locals {
                let bits = r.read_bits(b)?;
                push(lr, lc, bits)?;
            }
        }
        BlockFormat::Bitmap => {
            let mut positions = Vec::with_capacity(z as usize);
            for cell in 0..(h * w_cells) {
                if r.read_bits(1)? == 1 {
                    positions.push((cell / w_cells, cell % w_cells));
                }
            }
            if positions.len() as u64 != z {
                return Err(CodecError::Corrupt(format!(
                    "bitmap occupancy has {} bits set, expected {z}",
                    positions.len()
                )));
            }
            for (lr, lc) in positions {
                let bits = r.read_bits(b)?;
                push(lr, lc, bits)?;
            }
        }
        BlockFormat::Dense => {
            let mut found = 0u64;
            for cell in 0..(h * w_cells) {
                let bits = r.read_bits(b)?;
                if bits != 0 {
                    push(cell / w_cells, cell % w_cells, bits)?;
                    found += 1;
                }
            }
            if found != z {
                return Err(CodecError::Corrupt(format!(
                    "dense block decoded {found} nonzeros, expected {z}"
                )));
            }
        }
    }
    Ok(())
}

impl BlockedContainer {
    /// Header plus payload as stored on disk.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(64 + self.block_nnz.len() * 4 + self.payload.len());
        out.extend_from_slice(MAGIC);
        let (kind, param) = scheme_kind_param(self.scheme);
        let fields: [u32; 10] = [
            VERSION,
            self.m,
            self.n,
            match self.symmetry {
                Symmetry::General => 0,
                Symmetry::Symmetric => 1,
            },
            self.size.row_exp() as u32,
            self.size.col_exp() as u32,
            self.precision.bits() as u32,
            kind,
            param,
            self.block_nnz.len() as u32,
        ];
        for f in fields {
            out.extend_from_slice(&f.to_le_bytes());
        }
        out.extend_from_slice(&self.payload_bits.to_le_bytes());
        for &z in &self.block_nnz {
            out.extend_from_slice(&z.to_le_bytes());
        }
        out.extend_from_slice(&self.payload);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CodecError> {
        if bytes.len() < 8 {
            return Err(CodecError::Truncated);
        }
        if &bytes[..8] != MAGIC {
            return Err(CodecError::BadMagic);
        }
        let mut pos = 8usize;
        let next_u32 = |pos: &mut usize| -> Result<u32, CodecError> {
            let end = *pos + 4;
            if end > bytes.len() {
                return Err(CodecError::Truncated);
            }
            let v = u32::from_le_bytes(bytes[*pos..end].try_into().unwrap());
            *pos = end;
            Ok(v)
        };
        let version = next_u32(&mut pos)?;
        if version != VERSION {
            return Err(CodecError::UnknownVersion(version));
        }
        let m = next_u32(&mut pos)?;
        let n = next_u32(&mut pos)?;
        let symmetry = match next_u32(&mut pos)? {
            0 => Symmetry::General,
            1 => Symmetry::Symmetric,
            x => return Err(CodecError::InvalidHeader(format!("symmetry code {x}"))),
        };
        let k = next_u32(&mut pos)?;
        let l = next_u32(&mut pos)?;
        let size = BlockSize::new(k as u8, l as u8)
            .map_err(|e| CodecError::InvalidHeader(e.to_string()))?;
        let b = next_u32(&mut pos)?;
        let precision = Precision::from_bits(b as u64)
            .ok_or_else(|| CodecError::InvalidHeader(format!("value width {b}")))?;
        let kind = next_u32(&mut pos)?;
        let param = next_u32(&mut pos)?;
        let scheme = scheme_from_kind_param(kind, param)
            .ok_or_else(|| CodecError::InvalidHeader(format!("scheme {kind}/{param}")))?;
        let block_count = next_u32(&mut pos)? as usize;
        if pos + 8 > bytes.len() {
            return Err(CodecError::Truncated);
        }
        let payload_bits = u64::from_le_bytes(bytes[pos..pos + 8].try_into().unwrap());
        pos += 8;
        let mut block_nnz = Vec::with_capacity(block_count);
        for _ in 0..block_count {
            block_nnz.push(next_u32(&mut pos)?);
        }
        let payload_len = payload_bits.div_ceil(8) as usize;
        if pos + payload_len > bytes.len() {
            return Err(CodecError::Truncated);
        }
        let payload = bytes[pos..pos + payload_len].to_vec();
        Ok(BlockedContainer {
            m,
            n,
            symmetry,
            size,
            precision,
            scheme,
            block_nnz,
            payload_bits,
            payload,
        })
    }

    pub fn write_file(&self, path: impl AsRef<Path>) -> Result<(), CodecError> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn read_file(path: impl AsRef<Path>) -> Result<Self, CodecError> {
        let bytes = std::fs::read(path)?;
        BlockedContainer::from_bytes(&bytes)
    }
}

/// Checks a container's payload length against the model footprint of
/// its decoded matrix. Returns (payload bits, model bits).
pub fn verify(c: &BlockedContainer) -> Result<(u64, u64), CodecError> {
    let (matrix, _) = decode(c)?;
    let model = crate::block::mmf(&matrix, c.scheme, c.size, c.precision);
    if model != c.payload_bits {
        return Err(CodecError::ModelMismatch {
            payload: c.payload_bits,
            model,
        });
    }
    Ok((c.payload_bits, model))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::block::mmf;

    fn identity(n: u32) -> SparseMatrix {
        SparseMatrix::new(n, n, Symmetry::General, (0..n).map(|i| (i, i)).collect()).unwrap()
    }

    fn seq_values(a: &SparseMatrix, p: Precision) -> Values {
        let v: Vec<f64> = (0..a.elements().len()).map(|i| i as f64 + 1.0).collect();
        Values::from_f64(p, &v)
    }

    #[test]
    fn identity2_coo_payload_is_69_bits() {
        let a = identity(2);
        let p = Precision::Single;
        let c = encode(
            &a,
            &seq_values(&a, p),
            Scheme::Fixed(BlockFormat::Coo),
            BlockSize::new(1, 1).unwrap(),
            p,
        )
        .unwrap();
        assert_eq!(c.payload_bits, 69);
        assert_eq!(
            c.payload_bits,
            mmf(&a, Scheme::Fixed(BlockFormat::Coo), BlockSize::new(1, 1).unwrap(), p)
        );
    }

    #[test]
    fn round_trip_all_schemes() {
        let a = SparseMatrix::from_coords(
            40,
            24,
            Symmetry::General,
            (0..120u32).map(|i| ((i * 17) % 40, (i * 11) % 24)),
        )
        .unwrap();
        let mut schemes = Scheme::s6().to_vec();
        schemes.extend(Scheme::without_csr_variants());
        for p in Precision::BOTH {
            let values = seq_values(&a, p);
            for scheme in &schemes {
                for size in [BlockSize::new(2, 2).unwrap(), BlockSize::new(3, 1).unwrap()] {
                    let c = encode(&a, &values, *scheme, size, p).unwrap();
                    assert_eq!(c.payload_bits, mmf(&a, *scheme, size, p));
                    let (back, back_values) = decode(&c).unwrap();
                    assert_eq!(back, a);
                    assert_eq!(back_values, values);
                }
            }
        }
    }

    #[test]
    fn round_trip_symmetric() {
        let a = SparseMatrix::from_coords(
            20,
            20,
            Symmetry::Symmetric,
            (0..60u32).map(|i| {
                let r = (i * 13) % 20;
                let c = (i * 7) % 20;
                (r.max(c), r.min(c))
            }),
        )
        .unwrap();
        let p = Precision::Double;
        let values = seq_values(&a, p);
        let c = encode(&a, &values, Scheme::Adaptive(FormatSet::ALL), BlockSize::new(2, 3).unwrap(), p)
            .unwrap();
        let (back, back_values) = decode(&c).unwrap();
        assert_eq!(back, a);
        assert_eq!(back_values, values);
    }

    #[test]
    fn adaptive_mixes_formats() {
        // one fully dense 8x8 block and one nearly-empty block
        let mut coords = Vec::new();
        for r in 0..8u32 {
            for c in 0..8u32 {
                coords.push((r, c));
            }
        }
        coords.push((0, 15));
        let a = SparseMatrix::from_coords(8, 16, Symmetry::General, coords).unwrap();
        let p = Precision::Double;
        let c = encode(
            &a,
            &seq_values(&a, p),
            Scheme::Adaptive(FormatSet::ALL),
            BlockSize::new(3, 3).unwrap(),
            p,
        )
        .unwrap();
        let map = block_nnz_map(&a, BlockSize::new(3, 3).unwrap());
        let formats = adaptive_block_formats(&map, FormatSet::ALL, p);
        assert_eq!(formats.len(), 2);
        assert_ne!(formats[0], formats[1]);
        assert_eq!(formats[0], BlockFormat::Dense);
        let (back, _) = decode(&c).unwrap();
        assert_eq!(back, a);
    }

    #[test]
    fn nan_bit_patterns_survive() {
        let a = identity(4);
        let quiet = f64::from_bits(0x7FF8_0000_0000_0001);
        let values = Values::F64(vec![1.0, quiet, -0.0, 3.5]);
        let c = encode(
            &a,
            &values,
            Scheme::Fixed(BlockFormat::Coo),
            BlockSize::new(1, 1).unwrap(),
            Precision::Double,
        )
        .unwrap();
        let (_, back) = decode(&c).unwrap();
        match back {
            Values::F64(v) => {
                assert_eq!(v[1].to_bits(), quiet.to_bits());
                assert_eq!(v[2].to_bits(), (-0.0f64).to_bits());
            }
            _ => panic!("wrong precision"),
        }
    }

    #[test]
    fn dense_rejects_zero_pattern() {
        let a = identity(2);
        let values = Values::F64(vec![1.0, 0.0]);
        let err = encode(
            &a,
            &values,
            Scheme::Fixed(BlockFormat::Dense),
            BlockSize::new(1, 1).unwrap(),
            Precision::Double,
        )
        .unwrap_err();
        assert!(matches!(err, CodecError::ExplicitZeroInDense { .. }));
    }

    #[test]
    fn value_count_mismatch() {
        let a = identity(4);
        let err = encode(
            &a,
            &Values::F64(vec![1.0]),
            Scheme::Fixed(BlockFormat::Coo),
            BlockSize::new(1, 1).unwrap(),
            Precision::Double,
        )
        .unwrap_err();
        assert!(matches!(err, CodecError::ValueCountMismatch { .. }));
    }

    #[test]
    fn corrupted_magic_detected() {
        let a = identity(4);
        let c = encode(
            &a,
            &seq_values(&a, Precision::Single),
            Scheme::Fixed(BlockFormat::Bitmap),
            BlockSize::new(1, 1).unwrap(),
            Precision::Single,
        )
        .unwrap();
        let mut bytes = c.to_bytes();
        bytes[0] ^= 0xFF;
        assert!(matches!(
            BlockedContainer::from_bytes(&bytes),
            Err(CodecError::BadMagic)
        ));
    }

    #[test]
    fn unknown_version_detected() {
        let a = identity(4);
        let c = encode(
            &a,
            &seq_values(&a, Precision::Single),
            Scheme::Fixed(BlockFormat::Bitmap),
            BlockSize::new(1, 1).unwrap(),
            Precision::Single,
        )
        .unwrap();
        let mut bytes = c.to_bytes();
        bytes[8] = 99;
        assert!(matches!(
            BlockedContainer::from_bytes(&bytes),
            Err(CodecError::UnknownVersion(99))
        ));
    }

    #[test]
    fn length_mismatch_detected() {
        let a = identity(4);
        let mut c = encode(
            &a,
            &seq_values(&a, Precision::Single),
            Scheme::Fixed(BlockFormat::Coo),
            BlockSize::new(1, 1).unwrap(),
            Precision::Single,
        )
        .unwrap();
        c.payload_bits -= 2;
        assert!(decode(&c).is_err());
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.sbm");
        let a = identity(8);
        let c = encode(
            &a,
            &seq_values(&a, Precision::Double),
            Scheme::MinFixed(FormatSet::ALL),
            BlockSize::new(2, 2).unwrap(),
            Precision::Double,
        )
        .unwrap();
        c.write_file(&path).unwrap();
        let back = BlockedContainer::read_file(&path).unwrap();
        assert_eq!(back, c);
        assert!(verify(&back).is_ok());
    }
}
