//! C ABI over `cross_kernels`.
//!
//! Every fallible call returns a [`CkStatus`]. On failure the message is kept in a
//! thread-local slot readable through [`ck_last_error`]. Handles are opaque and must be
//! released with their matching `*_free` function. Buffers are caller-owned; lengths are
//! element counts. Matrices are row-major.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::sync::Arc;

use cross_kernels::lpmm::{mat_mod_mul, KnownMatrix};
use cross_kernels::modarith::{gen_ntt_primes, vec_mod_elementwise, VecOp};
use cross_kernels::nttmat::{compile_ntt_plan, default_split, negacyclic_polymul, NttPlan};
use cross_kernels::rnsconv::{rescale, BasisConverter, RnsBasis, RnsPoly};
use cross_kernels::{Error, Modulus, ResidueMatrix, Strategy};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CkStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    OutOfRange = 3,
    ShapeMismatch = 4,
    Precision = 5,
    NotPrime = 6,
    Exhausted = 7,
    Malformed = 8,
    Io = 9,
    Internal = 10,
    Panic = 11,
}

/// Reduction strategy selector, passed as `uint32_t`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CkStrategy {
    Native = 0,
    Barrett = 1,
    Montgomery = 2,
    Shoup = 3,
}

/// A validated word-size modulus.
pub struct CkModulus(Modulus);

/// A compiled negacyclic NTT plan for one modulus.
pub struct CkNttPlan(NttPlan);

/// A compiled known left operand for repeated modular matrix products.
pub struct CkKnownMatrix(KnownMatrix);

/// A compiled RNS basis converter.
pub struct CkBasisConverter(BasisConverter);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let msg = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn status_of(e: &Error) -> CkStatus {
    match e {
        Error::NotPrime { .. } => CkStatus::NotPrime,
        Error::OutOfRange(_) => CkStatus::OutOfRange,
        Error::Domain(_) | Error::Config(_) => CkStatus::InvalidArgument,
        Error::Shape(_) => CkStatus::ShapeMismatch,
        Error::Precision(_) => CkStatus::Precision,
        Error::Exhausted(_) => CkStatus::Exhausted,
        Error::Format(_) => CkStatus::Malformed,
        Error::Io(_) => CkStatus::Io,
        Error::Internal(_) => CkStatus::Internal,
    }
}

enum Fail {
    Null(&'static str),
    Lib(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Lib(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> CkStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CkStatus::Ok,
        Ok(Err(Fail::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            CkStatus::NullPointer
        }
        Ok(Err(Fail::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            CkStatus::Panic
        }
    }
}

unsafe fn as_ref<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Fail> {
    unsafe { p.as_ref() }.ok_or(Fail::Null(what))
}

unsafe fn slice<'a>(p: *const u32, len: usize, what: &'static str) -> Result<&'a [u32], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    Ok(unsafe { std::slice::from_raw_parts(p, len) })
}

unsafe fn slice_mut<'a>(p: *mut u32, len: usize, what: &'static str) -> Result<&'a mut [u32], Fail> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    Ok(unsafe { std::slice::from_raw_parts_mut(p, len) })
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(Fail::Null("out"));
    }
    unsafe { *out = Box::into_raw(Box::new(value)) };
    Ok(())
}

fn strategy(s: u32) -> Result<Strategy, Fail> {
    Ok(match s {
        0 => Strategy::Native,
        1 => Strategy::Barrett,
        2 => Strategy::Montgomery,
        3 => Strategy::Shoup,
        _ => return Err(Error::Config(format!("unknown strategy {s}")).into()),
    })
}

fn mat(rows: usize, cols: usize, data: &[u32]) -> Result<ResidueMatrix, Fail> {
    Ok(ResidueMatrix::from_vec(rows, cols, data.to_vec())?)
}

fn basis(primes: &[u32]) -> Result<Arc<RnsBasis>, Fail> {
    Ok(Arc::new(RnsBasis::from_primes(primes)?))
}

fn checked_mul(a: usize, b: usize) -> Result<usize, Fail> {
    a.checked_mul(b)
        .ok_or_else(|| Error::OutOfRange(format!("{a} x {b} overflows")).into())
}

/// Message for the last failed call on this thread, or NULL. Valid until the next call.
#[no_mangle]
pub extern "C" fn ck_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ck_version() -> *const c_char {
    static V: &CStr = match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
        Ok(v) => v,
        Err(_) => panic!("version string"),
    };
    V.as_ptr()
}

/// Fill `out[0..count]` with distinct `bits`-bit primes `q ≡ 1 (mod 2n)`, descending.
///
/// # Safety
/// `out` must point to `count` writable words.
#[no_mangle]
pub unsafe extern "C" fn ck_gen_ntt_primes(bits: u32, n: usize, count: usize, out: *mut u32) -> CkStatus {
    guard(|| {
        let out = unsafe { slice_mut(out, count, "out")? };
        out.copy_from_slice(&gen_ntt_primes(bits, n, count, &[])?);
        Ok(())
    })
}

/// # Safety
/// `out` must be a valid pointer to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn ck_modulus_new(q: u32, out: *mut *mut CkModulus) -> CkStatus {
    guard(|| unsafe { put(out, CkModulus(Modulus::new(q)?)) })
}

/// # Safety
/// `m` must be NULL or a handle from [`ck_modulus_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ck_modulus_free(m: *mut CkModulus) {
    if !m.is_null() {
        drop(unsafe { Box::from_raw(m) });
    }
}

/// The modulus value, or 0 for NULL.
///
/// # Safety
/// `m` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ck_modulus_value(m: *const CkModulus) -> u32 {
    unsafe { m.as_ref() }.map_or(0, |m| m.0.q())
}

/// Element-wise `out[i] = a[i]·b[i] mod q` under `strategy`.
///
/// # Safety
/// `a`, `b` and `out` must each hold `len` words.
#[no_mangle]
pub unsafe extern "C" fn ck_vec_mulmod(
    m: *const CkModulus,
    a: *const u32,
    b: *const u32,
    len: usize,
    strategy_id: u32,
    out: *mut u32,
) -> CkStatus {
    guard(|| {
        let m = unsafe { as_ref(m, "m")? };
        let (a, b) = unsafe { (slice(a, len, "a")?, slice(b, len, "b")?) };
        let out = unsafe { slice_mut(out, len, "out")? };
        out.copy_from_slice(&vec_mod_elementwise(VecOp::Mul, a, b, &m.0, strategy(strategy_id)?)?);
        Ok(())
    })
}

/// Compile an NTT plan for degree `n`. `r = c = 0` picks the default split.
///
/// # Safety
/// `m` must be a live handle and `out` a valid handle slot.
#[no_mangle]
pub unsafe extern "C" fn ck_ntt_plan_new(
    m: *const CkModulus,
    n: usize,
    r: usize,
    c: usize,
    bp: u32,
    strategy_id: u32,
    out: *mut *mut CkNttPlan,
) -> CkStatus {
    guard(|| {
        let m = unsafe { as_ref(m, "m")? };
        let (r, c) = if r == 0 && c == 0 { default_split(n)? } else { (r, c) };
        let plan = compile_ntt_plan(n, r, c, &m.0, bp, strategy(strategy_id)?)?;
        unsafe { put(out, CkNttPlan(plan)) }
    })
}

/// # Safety
/// `p` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ck_ntt_plan_free(p: *mut CkNttPlan) {
    if !p.is_null() {
        drop(unsafe { Box::from_raw(p) });
    }
}

/// Transform length of the plan, or 0 for NULL.
///
/// # Safety
/// `p` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ck_ntt_plan_degree(p: *const CkNttPlan) -> usize {
    unsafe { p.as_ref() }.map_or(0, |p| p.0.n())
}

/// The 2n-th root of unity the plan was built with, or 0 for NULL.
///
/// # Safety
/// `p` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ck_ntt_plan_psi(p: *const CkNttPlan) -> u32 {
    unsafe { p.as_ref() }.map_or(0, |p| p.0.psi())
}

/// Forward transform; output is in bit-reversed order.
///
/// # Safety
/// `input` and `out` must hold `len` words; `len` must equal the plan degree.
#[no_mangle]
pub unsafe extern "C" fn ck_ntt_forward(p: *const CkNttPlan, input: *const u32, len: usize, out: *mut u32) -> CkStatus {
    guard(|| {
        let p = unsafe { as_ref(p, "plan")? };
        let (y, _) = p.0.forward(unsafe { slice(input, len, "input")? }, None)?;
        unsafe { slice_mut(out, len, "out")? }.copy_from_slice(&y);
        Ok(())
    })
}

/// Inverse of [`ck_ntt_forward`].
///
/// # Safety
/// As for [`ck_ntt_forward`].
#[no_mangle]
pub unsafe extern "C" fn ck_ntt_inverse(p: *const CkNttPlan, input: *const u32, len: usize, out: *mut u32) -> CkStatus {
    guard(|| {
        let p = unsafe { as_ref(p, "plan")? };
        let (y, _) = p.0.inverse(unsafe { slice(input, len, "input")? }, None)?;
        unsafe { slice_mut(out, len, "out")? }.copy_from_slice(&y);
        Ok(())
    })
}

/// Product of `a` and `b` in `Z_q[X]/(X^n + 1)`.
///
/// # Safety
/// `a`, `b` and `out` must hold `len` words.
#[no_mangle]
pub unsafe extern "C" fn ck_polymul(
    p: *const CkNttPlan,
    a: *const u32,
    b: *const u32,
    len: usize,
    out: *mut u32,
) -> CkStatus {
    guard(|| {
        let p = unsafe { as_ref(p, "plan")? };
        let (a, b) = unsafe { (slice(a, len, "a")?, slice(b, len, "b")?) };
        let y = negacyclic_polymul(a, b, &p.0)?;
        unsafe { slice_mut(out, len, "out")? }.copy_from_slice(&y);
        Ok(())
    })
}

/// One-shot `out = a·b mod q` for `a` of shape h×v and `b` of shape v×w.
///
/// # Safety
/// `a` holds h·v words, `b` holds v·w words, `out` holds h·w words.
#[no_mangle]
pub unsafe extern "C" fn ck_mat_mod_mul(
    m: *const CkModulus,
    a: *const u32,
    b: *const u32,
    h: usize,
    v: usize,
    w: usize,
    bp: u32,
    strategy_id: u32,
    out: *mut u32,
) -> CkStatus {
    guard(|| {
        let m = unsafe { as_ref(m, "m")? };
        let a = mat(h, v, unsafe { slice(a, checked_mul(h, v)?, "a")? })?;
        let b = mat(v, w, unsafe { slice(b, checked_mul(v, w)?, "b")? })?;
        let y = mat_mod_mul(&a, &b, &m.0, bp, strategy(strategy_id)?)?;
        unsafe { slice_mut(out, checked_mul(h, w)?, "out")? }.copy_from_slice(y.as_slice());
        Ok(())
    })
}

/// Compile the rows×cols matrix `a` as a known left operand.
///
/// # Safety
/// `a` holds rows·cols words; `out` is a valid handle slot.
#[no_mangle]
pub unsafe extern "C" fn ck_known_matrix_new(
    m: *const CkModulus,
    a: *const u32,
    rows: usize,
    cols: usize,
    bp: u32,
    strategy_id: u32,
    out: *mut *mut CkKnownMatrix,
) -> CkStatus {
    guard(|| {
        let m = unsafe { as_ref(m, "m")? };
        let a = mat(rows, cols, unsafe { slice(a, checked_mul(rows, cols)?, "a")? })?;
        let known = KnownMatrix::compile(&a, &m.0, bp, strategy(strategy_id)?)?;
        unsafe { put(out, CkKnownMatrix(known)) }
    })
}

/// # Safety
/// `k` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ck_known_matrix_free(k: *mut CkKnownMatrix) {
    if !k.is_null() {
        drop(unsafe { Box::from_raw(k) });
    }
}

/// `out = A·b` where `b` is cols(A)×w.
///
/// # Safety
/// `b` holds cols(A)·w words and `out` rows(A)·w words.
#[no_mangle]
pub unsafe extern "C" fn ck_known_matrix_mul(
    k: *const CkKnownMatrix,
    b: *const u32,
    w: usize,
    out: *mut u32,
) -> CkStatus {
    guard(|| {
        let k = unsafe { as_ref(k, "matrix")? };
        let (rows, cols) = (k.0.rows(), k.0.cols());
        let b = mat(cols, w, unsafe { slice(b, checked_mul(cols, w)?, "b")? })?;
        let (y, _) = k.0.mul_left(&b, None)?;
        unsafe { slice_mut(out, checked_mul(rows, w)?, "out")? }.copy_from_slice(y.as_slice());
        Ok(())
    })
}

/// Compile a converter between two disjoint prime bases.
///
/// # Safety
/// `src` holds `l` primes, `dst` holds `lp` primes; `out` is a valid handle slot.
#[no_mangle]
pub unsafe extern "C" fn ck_basis_converter_new(
    src: *const u32,
    l: usize,
    dst: *const u32,
    lp: usize,
    bp: u32,
    strategy_id: u32,
    out: *mut *mut CkBasisConverter,
) -> CkStatus {
    guard(|| {
        let s = basis(unsafe { slice(src, l, "src")? })?;
        let d = basis(unsafe { slice(dst, lp, "dst")? })?;
        let conv = BasisConverter::new(s, d, bp, strategy(strategy_id)?)?;
        unsafe { put(out, CkBasisConverter(conv)) }
    })
}

/// # Safety
/// `c` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ck_basis_converter_free(c: *mut CkBasisConverter) {
    if !c.is_null() {
        drop(unsafe { Box::from_raw(c) });
    }
}

/// Convert an L×n limb matrix to the L′×n target representation. `use_bat = 0`
/// selects the 64-bit word path; results are identical.
///
/// # Safety
/// `input` holds L·n words and `out` L′·n words.
#[no_mangle]
pub unsafe extern "C" fn ck_basis_convert(
    c: *const CkBasisConverter,
    input: *const u32,
    n: usize,
    use_bat: i32,
    out: *mut u32,
) -> CkStatus {
    guard(|| {
        let c = unsafe { as_ref(c, "converter")? };
        let (l, lp) = (c.0.source().len(), c.0.target().len());
        let limbs = mat(l, n, unsafe { slice(input, checked_mul(l, n)?, "input")? })?;
        let p = RnsPoly::new(c.0.source().clone(), limbs)?;
        let (y, _) = c.0.convert(&p, use_bat != 0)?;
        unsafe { slice_mut(out, checked_mul(lp, n)?, "out")? }.copy_from_slice(y.limbs().as_slice());
        Ok(())
    })
}

/// Drop the last `times` limbs of an L×n polynomial over `primes`, dividing by each
/// dropped modulus with rounding toward zero. `out` receives (L − times)×n words.
///
/// # Safety
/// `primes` holds `l` words, `input` l·n words and `out` (l − times)·n words.
#[no_mangle]
pub unsafe extern "C" fn ck_rescale(
    primes: *const u32,
    l: usize,
    input: *const u32,
    n: usize,
    times: usize,
    out: *mut u32,
) -> CkStatus {
    guard(|| {
        let b = basis(unsafe { slice(primes, l, "primes")? })?;
        let limbs = mat(l, n, unsafe { slice(input, checked_mul(l, n)?, "input")? })?;
        let y = rescale(&RnsPoly::new(b, limbs)?, times)?;
        let len = y.limbs().as_slice().len();
        unsafe { slice_mut(out, len, "out")? }.copy_from_slice(y.limbs().as_slice());
        Ok(())
    })
}
