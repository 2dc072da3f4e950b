//! C ABI for the autownet library.
//!
//! Every fallible function returns an [`AwStatus`]; on failure a message is
//! available from [`aw_last_error_message`] on the same thread. Objects are
//! opaque handles released with their `_free` function. Panics never cross
//! the boundary and are reported as `AW_STATUS_INTERNAL`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use autownet::evaluator;
use autownet::purifier::{purify, PurifyConfig};
use autownet::wsi::{self, Atoms, ModelFormat, WsiConfig, WsiModel};
use autownet::{Embeddings, Error, WordId};

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AwStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Io = 3,
    Parse = 4,
    Validation = 5,
    OutOfRange = 6,
    BufferTooSmall = 7,
    Internal = 8,
}

/// Loaded, unit-normalized word vectors.
pub struct AwEmbeddings {
    inner: Embeddings,
}

/// A fitted sparse-coding sense model with the vocabulary it was fitted on.
pub struct AwWsiModel {
    model: WsiModel,
    words: Vec<String>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

type Failure = (AwStatus, String);

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> AwStatus {
    match e {
        Error::Io { .. } => AwStatus::Io,
        Error::Parse { .. } | Error::Json(_) => AwStatus::Parse,
        Error::UnknownWordId(_) | Error::UnknownWord(_) | Error::UnknownSynset(_) => AwStatus::OutOfRange,
        _ => AwStatus::Validation,
    }
}

fn lib_err(e: Error) -> Failure {
    (status_of(&e), e.to_string())
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> AwStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            AwStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal error: panic inside autownet".into());
            AwStatus::Internal
        }
    }
}

fn non_null<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    // SAFETY: the caller guarantees a non-null pointer refers to a live value.
    unsafe { p.as_ref() }.ok_or_else(|| (AwStatus::NullPointer, format!("{name} is null")))
}

fn path_arg(p: *const c_char) -> Result<PathBuf, Failure> {
    Ok(PathBuf::from(str_arg(p, "path")?))
}

fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err((AwStatus::NullPointer, format!("{name} is null")));
    }
    // SAFETY: non-null and, per the contract, NUL-terminated.
    unsafe { CStr::from_ptr(p) }
        .to_str()
        .map_err(|_| (AwStatus::InvalidUtf8, format!("{name} is not valid UTF-8")))
}

fn slice_arg<'a, T>(p: *const T, len: usize, name: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err((AwStatus::NullPointer, format!("{name} is null")));
    }
    // SAFETY: the caller guarantees `len` readable elements at `p`.
    Ok(unsafe { std::slice::from_raw_parts(p, len) })
}

fn write_out<T>(p: *mut T, value: T, name: &str) -> Result<(), Failure> {
    if p.is_null() {
        return Err((AwStatus::NullPointer, format!("{name} is null")));
    }
    // SAFETY: non-null output pointer supplied by the caller.
    unsafe { p.write(value) };
    Ok(())
}

/// Copies `items` into a caller buffer of `capacity` elements. `out_len`
/// always receives the required length.
fn write_buffer<T: Copy>(items: &[T], out: *mut T, capacity: usize, out_len: *mut usize) -> Result<(), Failure> {
    write_out(out_len, items.len(), "out_len")?;
    if items.len() > capacity {
        return Err((
            AwStatus::BufferTooSmall,
            format!("buffer holds {capacity} elements, {} needed", items.len()),
        ));
    }
    if !items.is_empty() {
        if out.is_null() {
            return Err((AwStatus::NullPointer, "output buffer is null".into()));
        }
        // SAFETY: `out` has room for `capacity >= items.len()` elements.
        unsafe { ptr::copy_nonoverlapping(items.as_ptr(), out, items.len()) };
    }
    Ok(())
}

/// Message of the last failed call on this thread, or NULL. The pointer
/// stays valid until the next autownet call on the same thread.
#[no_mangle]
pub extern "C" fn aw_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn aw_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads a word-vector text file. `expect_dim` of 0 infers the dimension.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn aw_embeddings_load(
    path: *const c_char,
    expect_dim: usize,
    out: *mut *mut AwEmbeddings,
) -> AwStatus {
    guard(|| {
        let path = path_arg(path)?;
        let dim = (expect_dim > 0).then_some(expect_dim);
        let inner = Embeddings::load(&path, dim).map_err(lib_err)?;
        write_out(out, Box::into_raw(Box::new(AwEmbeddings { inner })), "out")
    })
}

/// # Safety
/// `emb` must be NULL or a handle from `aw_embeddings_load` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn aw_embeddings_free(emb: *mut AwEmbeddings) {
    if !emb.is_null() {
        // SAFETY: handle created by Box::into_raw in this crate.
        drop(unsafe { Box::from_raw(emb) });
    }
}

/// Vocabulary size; 0 for NULL.
///
/// # Safety
/// `emb` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn aw_embeddings_len(emb: *const AwEmbeddings) -> usize {
    unsafe { emb.as_ref() }.map_or(0, |e| e.inner.len())
}

/// Vector dimension; 0 for NULL.
///
/// # Safety
/// `emb` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn aw_embeddings_dim(emb: *const AwEmbeddings) -> usize {
    unsafe { emb.as_ref() }.map_or(0, |e| e.inner.dim())
}

/// Id of a token; `AW_STATUS_OUT_OF_RANGE` when it is not in the vocabulary.
///
/// # Safety
/// `emb` must be a live handle, `token` NUL-terminated, `out_id` writable.
#[no_mangle]
pub unsafe extern "C" fn aw_embeddings_lookup(
    emb: *const AwEmbeddings,
    token: *const c_char,
    out_id: *mut usize,
) -> AwStatus {
    guard(|| {
        let emb = non_null(emb, "emb")?;
        let token = str_arg(token, "token")?;
        let id = emb.inner.vocab.get(token).ok_or_else(|| lib_err(Error::UnknownWord(token.into())))?;
        write_out(out_id, id.index(), "out_id")
    })
}

/// Copies the unit vector of word `id` into `out` (`dim` elements).
///
/// # Safety
/// `emb` must be a live handle and `out` must hold `capacity` doubles.
#[no_mangle]
pub unsafe extern "C" fn aw_embeddings_vector(
    emb: *const AwEmbeddings,
    id: usize,
    out: *mut f64,
    capacity: usize,
    out_len: *mut usize,
) -> AwStatus {
    guard(|| {
        let emb = non_null(emb, "emb")?;
        let row = emb.inner.matrix.get(WordId(id)).map_err(lib_err)?;
        write_buffer(row, out, capacity, out_len)
    })
}

/// Cosine similarity of two words.
///
/// # Safety
/// `emb` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn aw_embeddings_cosine(
    emb: *const AwEmbeddings,
    a: usize,
    b: usize,
    out: *mut f64,
) -> AwStatus {
    guard(|| {
        let emb = non_null(emb, "emb")?;
        let c = emb.inner.cosine(WordId(a), WordId(b)).map_err(lib_err)?;
        write_out(out, c, "out")
    })
}

/// Fits a sense model with K-SVD. `reinit_threshold` of 0 means 1.
///
/// # Safety
/// `emb` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn aw_wsi_fit(
    emb: *const AwEmbeddings,
    k: usize,
    s: usize,
    iterations: usize,
    seed: u64,
    reinit_threshold: usize,
    out: *mut *mut AwWsiModel,
) -> AwStatus {
    guard(|| {
        let emb = non_null(emb, "emb")?;
        let cfg = WsiConfig {
            k,
            s,
            iterations,
            seed,
            reinit_threshold: reinit_threshold.max(1),
        };
        let model = wsi::ksvd_fit(&emb.inner.matrix, &cfg).map_err(lib_err)?;
        let words = emb.inner.vocab.words().to_vec();
        write_out(out, Box::into_raw(Box::new(AwWsiModel { model, words })), "out")
    })
}

/// Loads a model file (JSON or binary, detected from the content).
///
/// # Safety
/// `path` must be NUL-terminated and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn aw_wsi_load(path: *const c_char, out: *mut *mut AwWsiModel) -> AwStatus {
    guard(|| {
        let path = path_arg(path)?;
        let (model, words) = wsi::read_model(&path).map_err(lib_err)?;
        write_out(out, Box::into_raw(Box::new(AwWsiModel { model, words })), "out")
    })
}

/// Saves a model; binary when the path ends in `.bin`, JSON otherwise.
///
/// # Safety
/// `model` must be a live handle and `path` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn aw_wsi_save(model: *const AwWsiModel, path: *const c_char) -> AwStatus {
    guard(|| {
        let m = non_null(model, "model")?;
        let path = path_arg(path)?;
        wsi::write_model(&path, &m.model, &m.words, ModelFormat::from_path(&path)).map_err(lib_err)
    })
}

/// # Safety
/// `model` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn aw_wsi_free(model: *mut AwWsiModel) {
    if !model.is_null() {
        // SAFETY: handle created by Box::into_raw in this crate.
        drop(unsafe { Box::from_raw(model) });
    }
}

/// Number of atoms; 0 for NULL.
///
/// # Safety
/// `model` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn aw_wsi_num_atoms(model: *const AwWsiModel) -> usize {
    unsafe { model.as_ref() }.map_or(0, |m| m.model.num_atoms())
}

/// Atoms with a positive coefficient for word `id`, by descending coefficient.
///
/// # Safety
/// `model` must be a live handle; `out` must hold `capacity` elements.
#[no_mangle]
pub unsafe extern "C" fn aw_wsi_word_atoms(
    model: *const AwWsiModel,
    id: usize,
    out: *mut usize,
    capacity: usize,
    out_len: *mut usize,
) -> AwStatus {
    guard(|| {
        let m = non_null(model, "model")?;
        let atoms = wsi::word_atoms(&m.model, WordId(id)).map_err(lib_err)?;
        write_buffer(&atoms, out, capacity, out_len)
    })
}

/// Orthogonal matching pursuit of `v` (`dim` doubles) over `k` row-major
/// unit atoms with at most `s` terms. Atom indices and coefficients are
/// written to parallel buffers of `capacity` elements.
///
/// # Safety
/// `v` must hold `dim` doubles, `atoms` `k * dim` doubles, and the output
/// buffers `capacity` elements each.
#[no_mangle]
pub unsafe extern "C" fn aw_omp_encode(
    v: *const f64,
    dim: usize,
    atoms: *const f64,
    k: usize,
    s: usize,
    out_atoms: *mut usize,
    out_coefs: *mut f64,
    capacity: usize,
    out_len: *mut usize,
    out_residual: *mut f64,
) -> AwStatus {
    guard(|| {
        let v = slice_arg(v, dim, "v")?;
        let flat = slice_arg(atoms, k.saturating_mul(dim), "atoms")?;
        let atoms = Atoms::new(dim, flat.to_vec()).map_err(lib_err)?;
        let r = wsi::omp_encode(v, &atoms, s).map_err(lib_err)?;
        let idx: Vec<usize> = r.code.iter().map(|&(i, _)| i).collect();
        let coef: Vec<f64> = r.code.iter().map(|&(_, c)| c).collect();
        write_buffer(&idx, out_atoms, capacity, out_len)?;
        write_buffer(&coef, out_coefs, capacity, out_len)?;
        write_out(out_residual, r.residual_norm, "out_residual")
    })
}

/// Sense purification of word `word` on atom `atom` over a search space of
/// word ids. Cluster ids (seed word first) go to `out_words`.
///
/// # Safety
/// Handles must be live and fitted on the same vocabulary; `search` must
/// hold `search_len` ids and `out_words` `capacity` elements.
#[no_mangle]
pub unsafe extern "C" fn aw_purify(
    emb: *const AwEmbeddings,
    model: *const AwWsiModel,
    word: usize,
    atom: usize,
    search: *const usize,
    search_len: usize,
    n: usize,
    min_cos: f64,
    out_words: *mut usize,
    capacity: usize,
    out_len: *mut usize,
    out_gamma: *mut f64,
) -> AwStatus {
    guard(|| {
        let emb = non_null(emb, "emb")?;
        let m = non_null(model, "model")?;
        if m.words != emb.inner.vocab.words() {
            return Err((AwStatus::Validation, "model and embeddings use different vocabularies".into()));
        }
        if atom >= m.model.num_atoms() {
            return Err((AwStatus::OutOfRange, format!("atom {atom} out of range")));
        }
        let space: Vec<WordId> = slice_arg(search, search_len, "search")?.iter().map(|&i| WordId(i)).collect();
        let cfg = PurifyConfig { n, min_cos };
        let c = purify(&emb.inner, &m.model.atoms, WordId(word), atom, &space, &cfg).map_err(lib_err)?;
        let ids: Vec<usize> = c.words.iter().map(|w| w.index()).collect();
        write_buffer(&ids, out_words, capacity, out_len)?;
        write_out(out_gamma, c.gamma, "out_gamma")
    })
}

/// `1.25 p r / (0.25 p + r)`; 0 when both are 0.
#[no_mangle]
pub extern "C" fn aw_f05(precision: f64, recall: f64) -> f64 {
    evaluator::f05(precision, recall)
}
