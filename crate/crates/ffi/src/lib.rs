//! C ABI surface over the sbmf core library.
//!
//! Matrices are passed around as opaque handles; every fallible call
//! returns an [`SbmfStatus`] and writes its result through out
//! pointers. The most recent error message is kept per thread and can
//! be copied out with [`sbmf_last_error_message`].

use std::cell::RefCell;
use std::os::raw::c_char;
use std::slice;

use sbmf::block::{BlockFormat, BlockSize, FormatSet, Scheme};
use sbmf::matrix::{parse_matrix_market, Precision, SparseMatrix};
use sbmf::optimize::{optimal_config, SearchSpace};

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

/// Status code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SbmfStatus {
    /// Success.
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// The input could not be parsed as a Matrix Market file.
    ParseError = 2,
    /// A scheme, block size or precision argument is out of range.
    InvalidArgument = 3,
    /// The operation failed; see `sbmf_last_error_message`.
    Failed = 4,
}

/// Storage scheme selector.
///
/// Values 0-3 are the fixed per-format schemes in COO, CSR, bitmap,
/// dense order; 4 and 5 are min-fixed and adaptive over all four
/// formats; 6 and 7 are their variants without the CSR block format.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SbmfScheme {
    FixedCoo = 0,
    FixedCsr = 1,
    FixedBitmap = 2,
    FixedDense = 3,
    MinFixed = 4,
    Adaptive = 5,
    MinFixedWithoutCsr = 6,
    AdaptiveWithoutCsr = 7,
}

fn scheme_from_code(code: u32) -> Option<Scheme> {
    Some(match code {
        0 => Scheme::Fixed(BlockFormat::Coo),
        1 => Scheme::Fixed(BlockFormat::Csr),
        2 => Scheme::Fixed(BlockFormat::Bitmap),
        3 => Scheme::Fixed(BlockFormat::Dense),
        4 => Scheme::MinFixed(FormatSet::ALL),
        5 => Scheme::Adaptive(FormatSet::ALL),
        6 => Scheme::MinFixed(FormatSet::WITHOUT_CSR),
        7 => Scheme::Adaptive(FormatSet::WITHOUT_CSR),
        _ => return None,
    })
}

fn scheme_code(scheme: Scheme) -> u32 {
    match scheme {
        Scheme::Fixed(BlockFormat::Coo) => 0,
        Scheme::Fixed(BlockFormat::Csr) => 1,
        Scheme::Fixed(BlockFormat::Bitmap) => 2,
        Scheme::Fixed(BlockFormat::Dense) => 3,
        Scheme::MinFixed(FormatSet::WITHOUT_CSR) => 6,
        Scheme::Adaptive(FormatSet::WITHOUT_CSR) => 7,
        Scheme::MinFixed(_) => 4,
        Scheme::Adaptive(_) => 5,
    }
}

/// Opaque parsed matrix handle.
pub struct SbmfMatrix {
    inner: SparseMatrix,
}

/// Parses a Matrix Market file held in memory.
///
/// On success writes a freshly allocated handle to `out`; release it
/// with `sbmf_matrix_free`.
///
/// # Safety
/// `data` must point to `len` readable bytes and `out` must be a valid
/// pointer.
#[no_mangle]
pub unsafe extern "C" fn sbmf_matrix_parse(
    data: *const c_char,
    len: usize,
    out: *mut *mut SbmfMatrix,
) -> SbmfStatus {
    if data.is_null() || out.is_null() {
        set_error("null argument");
        return SbmfStatus::NullArgument;
    }
    let bytes = slice::from_raw_parts(data as *const u8, len);
    let text = match std::str::from_utf8(bytes) {
        Ok(t) => t,
        Err(e) => {
            set_error(format!("input is not UTF-8: {e}"));
            return SbmfStatus::ParseError;
        }
    };
    match parse_matrix_market(text) {
        Ok(parsed) => {
            *out = Box::into_raw(Box::new(SbmfMatrix {
                inner: parsed.matrix,
            }));
            SbmfStatus::Ok
        }
        Err(e) => {
            set_error(e.to_string());
            SbmfStatus::ParseError
        }
    }
}

/// Releases a handle returned by `sbmf_matrix_parse`. Null is ignored.
///
/// # Safety
/// `matrix` must be a handle from `sbmf_matrix_parse` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sbmf_matrix_free(matrix: *mut SbmfMatrix) {
    if !matrix.is_null() {
        drop(Box::from_raw(matrix));
    }
}

unsafe fn handle<'a>(matrix: *const SbmfMatrix) -> Option<&'a SparseMatrix> {
    matrix.as_ref().map(|m| &m.inner)
}

/// Number of matrix rows; 0 on a null handle.
///
/// # Safety
/// `matrix` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn sbmf_matrix_rows(matrix: *const SbmfMatrix) -> u32 {
    handle(matrix).map_or(0, |a| a.rows())
}

/// Number of matrix columns; 0 on a null handle.
///
/// # Safety
/// `matrix` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn sbmf_matrix_cols(matrix: *const SbmfMatrix) -> u32 {
    handle(matrix).map_or(0, |a| a.cols())
}

/// Number of stored elements; 0 on a null handle.
///
/// # Safety
/// `matrix` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn sbmf_matrix_nnz_stored(matrix: *const SbmfMatrix) -> u64 {
    handle(matrix).map_or(0, |a| a.nnz_stored())
}

/// Number of logical nonzeros (symmetric mirroring included); 0 on a
/// null handle.
///
/// # Safety
/// `matrix` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn sbmf_matrix_nnz_all(matrix: *const SbmfMatrix) -> u64 {
    handle(matrix).map_or(0, |a| a.nnz_all())
}

fn precision_from_bits(value_bits: u32) -> Option<Precision> {
    Precision::from_bits(value_bits as u64)
}

/// CSR32 reference footprint in bits for 32- or 64-bit values.
///
/// # Safety
/// `matrix` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sbmf_matrix_csr32_bits(
    matrix: *const SbmfMatrix,
    value_bits: u32,
    out: *mut u64,
) -> SbmfStatus {
    let (Some(a), false) = (handle(matrix), out.is_null()) else {
        set_error("null argument");
        return SbmfStatus::NullArgument;
    };
    let Some(p) = precision_from_bits(value_bits) else {
        set_error(format!("value width {value_bits} is not 32 or 64"));
        return SbmfStatus::InvalidArgument;
    };
    *out = a.csr32_footprint(p);
    SbmfStatus::Ok
}

/// Footprint lower bound (value bits only).
///
/// # Safety
/// `matrix` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sbmf_matrix_lower_bound(
    matrix: *const SbmfMatrix,
    value_bits: u32,
    out: *mut u64,
) -> SbmfStatus {
    let (Some(a), false) = (handle(matrix), out.is_null()) else {
        set_error("null argument");
        return SbmfStatus::NullArgument;
    };
    let Some(p) = precision_from_bits(value_bits) else {
        set_error(format!("value width {value_bits} is not 32 or 64"));
        return SbmfStatus::InvalidArgument;
    };
    *out = a.lower_bound(p);
    SbmfStatus::Ok
}

/// Memory footprint of one (scheme, block size) configuration. `k` and
/// `l` are the block dimension exponents: blocks are 2^k rows by 2^l
/// columns, with both exponents in 1..=8.
///
/// # Safety
/// `matrix` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sbmf_matrix_footprint(
    matrix: *const SbmfMatrix,
    scheme: u32,
    k: u32,
    l: u32,
    value_bits: u32,
    out: *mut u64,
) -> SbmfStatus {
    let (Some(a), false) = (handle(matrix), out.is_null()) else {
        set_error("null argument");
        return SbmfStatus::NullArgument;
    };
    let Some(p) = precision_from_bits(value_bits) else {
        set_error(format!("value width {value_bits} is not 32 or 64"));
        return SbmfStatus::InvalidArgument;
    };
    let Some(scheme) = scheme_from_code(scheme) else {
        set_error(format!("scheme code {scheme} out of range"));
        return SbmfStatus::InvalidArgument;
    };
    let Ok(size) = BlockSize::new(k as u8, l as u8) else {
        set_error(format!("block exponents ({k}, {l}) outside 1..=8"));
        return SbmfStatus::InvalidArgument;
    };
    *out = sbmf::block::mmf(a, scheme, size, p);
    SbmfStatus::Ok
}

/// Finds the optimal configuration over all six schemes and all 64
/// block sizes. Any of the out pointers may be null to skip that field.
///
/// # Safety
/// `matrix` must be a live handle; non-null out pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn sbmf_matrix_optimal(
    matrix: *const SbmfMatrix,
    value_bits: u32,
    out_scheme: *mut u32,
    out_k: *mut u32,
    out_l: *mut u32,
    out_bits: *mut u64,
) -> SbmfStatus {
    let Some(a) = handle(matrix) else {
        set_error("null matrix handle");
        return SbmfStatus::NullArgument;
    };
    let Some(p) = precision_from_bits(value_bits) else {
        set_error(format!("value width {value_bits} is not 32 or 64"));
        return SbmfStatus::InvalidArgument;
    };
    match optimal_config(a, &SearchSpace::full(), p) {
        Ok(opt) => {
            if !out_scheme.is_null() {
                *out_scheme = scheme_code(opt.scheme);
            }
            if !out_k.is_null() {
                *out_k = opt.size.row_exp() as u32;
            }
            if !out_l.is_null() {
                *out_l = opt.size.col_exp() as u32;
            }
            if !out_bits.is_null() {
                *out_bits = opt.bits;
            }
            SbmfStatus::Ok
        }
        Err(e) => {
            set_error(e.to_string());
            SbmfStatus::Failed
        }
    }
}

/// Copies the current thread's last error message into `buf` (NUL
/// terminated, truncated to `len` bytes). Returns the full message
/// length in bytes, not counting the terminator.
///
/// # Safety
/// `buf` must point to `len` writable bytes, or be null (query mode).
#[no_mangle]
pub unsafe extern "C" fn sbmf_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            std::ptr::copy_nonoverlapping(msg.as_ptr(), buf as *mut u8, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ptr;

    const EYE4: &str = "%%MatrixMarket matrix coordinate real general\n4 4 4\n1 1 1.0\n2 2 1.0\n3 3 1.0\n4 4 1.0\n";

    unsafe fn parse(text: &str) -> *mut SbmfMatrix {
        let mut out = ptr::null_mut();
        let status = sbmf_matrix_parse(text.as_ptr() as *const c_char, text.len(), &mut out);
        assert_eq!(status, SbmfStatus::Ok);
        out
    }

    #[test]
    fn parse_and_getters() {
        unsafe {
            let m = parse(EYE4);
            assert_eq!(sbmf_matrix_rows(m), 4);
            assert_eq!(sbmf_matrix_cols(m), 4);
            assert_eq!(sbmf_matrix_nnz_stored(m), 4);
            assert_eq!(sbmf_matrix_nnz_all(m), 4);
            sbmf_matrix_free(m);
        }
    }

    #[test]
    fn footprint_matches_core() {
        unsafe {
            let m = parse(EYE4);
            let mut bits = 0u64;
            // fixed COO at 2x2 blocks, 32-bit values
            assert_eq!(
                sbmf_matrix_footprint(m, 0, 1, 1, 32, &mut bits),
                SbmfStatus::Ok
            );
            let a = parse_matrix_market(EYE4).unwrap().matrix;
            let expected = sbmf::block::mmf(
                &a,
                Scheme::Fixed(BlockFormat::Coo),
                BlockSize::new(1, 1).unwrap(),
                Precision::Single,
            );
            assert_eq!(bits, expected);
            sbmf_matrix_free(m);
        }
    }

    #[test]
    fn optimal_round_trips_through_codes() {
        unsafe {
            let m = parse(EYE4);
            let (mut scheme, mut k, mut l, mut bits) = (99u32, 0u32, 0u32, 0u64);
            assert_eq!(
                sbmf_matrix_optimal(m, 64, &mut scheme, &mut k, &mut l, &mut bits),
                SbmfStatus::Ok
            );
            assert!(scheme <= 5);
            let mut direct = 0u64;
            assert_eq!(
                sbmf_matrix_footprint(m, scheme, k, l, 64, &mut direct),
                SbmfStatus::Ok
            );
            assert_eq!(direct, bits);
            sbmf_matrix_free(m);
        }
    }

    #[test]
    fn errors_set_message() {
        unsafe {
            let mut out = ptr::null_mut();
            let garbage = "not a matrix";
            let status =
                sbmf_matrix_parse(garbage.as_ptr() as *const c_char, garbage.len(), &mut out);
            assert_eq!(status, SbmfStatus::ParseError);
            let mut buf = [0u8; 256];
            let n = sbmf_last_error_message(buf.as_mut_ptr() as *mut c_char, buf.len());
            assert!(n > 0);
            let msg = std::str::from_utf8(&buf[..n.min(buf.len() - 1)]).unwrap();
            assert!(!msg.is_empty());
        }
    }

    #[test]
    fn invalid_arguments_rejected() {
        unsafe {
            let m = parse(EYE4);
            let mut bits = 0u64;
            assert_eq!(
                sbmf_matrix_footprint(m, 42, 1, 1, 32, &mut bits),
                SbmfStatus::InvalidArgument
            );
            assert_eq!(
                sbmf_matrix_footprint(m, 0, 0, 1, 32, &mut bits),
                SbmfStatus::InvalidArgument
            );
            assert_eq!(
                sbmf_matrix_footprint(m, 0, 1, 1, 48, &mut bits),
                SbmfStatus::InvalidArgument
            );
            assert_eq!(
                sbmf_matrix_csr32_bits(ptr::null(), 32, &mut bits),
                SbmfStatus::NullArgument
            );
            sbmf_matrix_free(m);
        }
    }
}
