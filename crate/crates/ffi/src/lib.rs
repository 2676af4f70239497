//! C interface to embedding lookup, prototype construction and zero-shot
//! ranking.
//!
//! Objects are opaque handles created by `*_load`/`*_build` functions and
//! released with the matching `*_free`. Every fallible call returns a
//! [`WebzslStatus`]; on failure [`webzsl_last_error`] describes the error
//! until the next failing call on the same thread. Panics never cross the
//! boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use nalgebra::DVector;
use webzsl::prototypes::{build_prototypes, load_class_names, normalize, PrototypeSet};
use webzsl::sgns::EmbeddingMatrix;
use webzsl::zsl::{predict_rank, ZslModel};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WebzslStatus {
    Ok = 0,
    NullPointer = 1,
    Io = 2,
    Parse = 3,
    InvalidArgument = 4,
    Shape = 5,
    /// A linear system could not be solved.
    Numeric = 6,
    NotFound = 7,
    Panic = 8,
}

/// Word vectors, optionally with subword tables.
pub struct WebzslEmbeddings {
    inner: EmbeddingMatrix,
}

/// Class prototypes with their ids.
pub struct WebzslPrototypes {
    inner: PrototypeSet,
    ids: Vec<CString>,
}

/// A fitted zero-shot model.
pub struct WebzslModel {
    inner: ZslModel,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

struct Failure(WebzslStatus, String);

impl From<webzsl::Error> for Failure {
    fn from(e: webzsl::Error) -> Self {
        use webzsl::Error as E;
        let status = match &e {
            E::Io { .. } | E::RawIo(_) => WebzslStatus::Io,
            E::Parse { .. } => WebzslStatus::Parse,
            E::Shape(_) => WebzslStatus::Shape,
            E::Singular(_) => WebzslStatus::Numeric,
            E::InvalidArgument(_) | E::Empty(_) | E::Taxonomy(_) => WebzslStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> WebzslStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => WebzslStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_last_error(&msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(&format!("panic: {msg}"));
            WebzslStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(WebzslStatus::NullPointer, format!("{what} is null"))
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn string(p: *const c_char, what: &str) -> Result<String, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(str::to_owned)
        .map_err(|_| Failure(WebzslStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn to_path(p: *const c_char, what: &str) -> Result<PathBuf, Failure> {
    string(p, what).map(PathBuf::from)
}

unsafe fn emit<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("output handle"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn put<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(what));
    }
    *out = value;
    Ok(())
}

fn wrap_prototypes(inner: PrototypeSet) -> WebzslPrototypes {
    let ids = inner
        .class_ids
        .iter()
        .map(|s| CString::new(s.replace('\0', " ")).unwrap_or_default())
        .collect();
    WebzslPrototypes { inner, ids }
}

/// Message of the last failed call on this thread; empty if none. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn webzsl_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn webzsl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads word2vec text or a binary model file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn webzsl_embeddings_load(path: *const c_char, out: *mut *mut WebzslEmbeddings) -> WebzslStatus {
    guard(|| {
        let p = to_path(path, "path")?;
        emit(out, WebzslEmbeddings { inner: EmbeddingMatrix::load(p)? })
    })
}

/// # Safety
/// `handle` must come from [`webzsl_embeddings_load`] or be null.
#[no_mangle]
pub unsafe extern "C" fn webzsl_embeddings_free(handle: *mut WebzslEmbeddings) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Vector dimension and vocabulary size.
///
/// # Safety
/// `handle` must be a live handle; `dim` and `words` writable.
#[no_mangle]
pub unsafe extern "C" fn webzsl_embeddings_shape(
    handle: *const WebzslEmbeddings,
    dim: *mut usize,
    words: *mut usize,
) -> WebzslStatus {
    guard(|| {
        let h = deref(handle, "embeddings")?;
        put(dim, h.inner.dim(), "dim")?;
        put(words, h.inner.len(), "words")
    })
}

/// Copies the vector of `word` into `out` (`len` must equal the dimension).
/// Subword models compose vectors for unknown words; otherwise an unknown
/// word gives `NotFound`.
///
/// # Safety
/// `out` must point to `len` writable floats.
#[no_mangle]
pub unsafe extern "C" fn webzsl_embeddings_lookup(
    handle: *const WebzslEmbeddings,
    word: *const c_char,
    out: *mut f32,
    len: usize,
) -> WebzslStatus {
    guard(|| {
        let h = deref(handle, "embeddings")?;
        let w = string(word, "word")?;
        if out.is_null() {
            return Err(null("output buffer"));
        }
        if len != h.inner.dim() {
            return Err(Failure(WebzslStatus::Shape, format!("buffer of {len} for dimension {}", h.inner.dim())));
        }
        let v = h
            .inner
            .lookup(&w)
            .ok_or_else(|| Failure(WebzslStatus::NotFound, format!("no vector for {w:?}")))?;
        std::slice::from_raw_parts_mut(out, len).copy_from_slice(&v);
        Ok(())
    })
}

/// Loads a prototype file (class id then vector on each row).
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn webzsl_prototypes_load(path: *const c_char, out: *mut *mut WebzslPrototypes) -> WebzslStatus {
    guard(|| {
        let p = to_path(path, "path")?;
        emit(out, wrap_prototypes(PrototypeSet::load(p)?))
    })
}

/// Builds prototypes from a class-name file, l2-normalized when
/// `normalize_rows` is nonzero.
///
/// # Safety
/// `class_names` must be a NUL-terminated string, `embeddings` a live
/// handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn webzsl_prototypes_build(
    class_names: *const c_char,
    embeddings: *const WebzslEmbeddings,
    normalize_rows: i32,
    out: *mut *mut WebzslPrototypes,
) -> WebzslStatus {
    guard(|| {
        let entries = load_class_names(to_path(class_names, "class_names")?)?;
        let emb = deref(embeddings, "embeddings")?;
        let protos = normalize(&build_prototypes(&entries, &emb.inner)?, normalize_rows != 0);
        emit(out, wrap_prototypes(protos))
    })
}

/// # Safety
/// `handle` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn webzsl_prototypes_free(handle: *mut WebzslPrototypes) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Number of classes and prototype dimension.
///
/// # Safety
/// `handle` must be a live handle; `classes` and `dim` writable.
#[no_mangle]
pub unsafe extern "C" fn webzsl_prototypes_shape(
    handle: *const WebzslPrototypes,
    classes: *mut usize,
    dim: *mut usize,
) -> WebzslStatus {
    guard(|| {
        let h = deref(handle, "prototypes")?;
        put(classes, h.inner.len(), "classes")?;
        put(dim, h.inner.dim(), "dim")
    })
}

/// Id of class `index`, owned by the handle; null when out of range.
///
/// # Safety
/// `handle` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn webzsl_prototypes_class_id(handle: *const WebzslPrototypes, index: usize) -> *const c_char {
    match handle.as_ref().and_then(|h| h.ids.get(index)) {
        Some(s) => s.as_ptr(),
        None => ptr::null(),
    }
}

/// # Safety
/// `handle` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn webzsl_prototypes_save(handle: *const WebzslPrototypes, path: *const c_char) -> WebzslStatus {
    guard(|| {
        let h = deref(handle, "prototypes")?;
        h.inner.save(to_path(path, "path")?)?;
        Ok(())
    })
}

/// Loads a model written by `webzsl zsl-fit`.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn webzsl_model_load(path: *const c_char, out: *mut *mut WebzslModel) -> WebzslStatus {
    guard(|| {
        let p = to_path(path, "path")?;
        emit(out, WebzslModel { inner: ZslModel::load(p)? })
    })
}

/// # Safety
/// `handle` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn webzsl_model_free(handle: *mut WebzslModel) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Visual and semantic dimensions the model expects.
///
/// # Safety
/// `handle` must be a live handle; `visual_dim` and `semantic_dim` writable.
#[no_mangle]
pub unsafe extern "C" fn webzsl_model_dims(
    handle: *const WebzslModel,
    visual_dim: *mut usize,
    semantic_dim: *mut usize,
) -> WebzslStatus {
    guard(|| {
        let (d, k) = deref(handle, "model")?.inner.dims()?;
        put(visual_dim, d, "visual_dim")?;
        put(semantic_dim, k, "semantic_dim")
    })
}

/// Ranks every prototype class for one feature vector. The best
/// `min(capacity, classes)` class indices and scores are written to
/// `indices` and `scores` (which may be null) and their number to
/// `written`.
///
/// # Safety
/// `features` must point to `feature_len` doubles; `indices` and `scores`
/// to `capacity` writable elements unless null.
#[no_mangle]
pub unsafe extern "C" fn webzsl_model_rank(
    model: *const WebzslModel,
    prototypes: *const WebzslPrototypes,
    features: *const f64,
    feature_len: usize,
    indices: *mut usize,
    scores: *mut f64,
    capacity: usize,
    written: *mut usize,
) -> WebzslStatus {
    guard(|| {
        let m = deref(model, "model")?;
        let p = deref(prototypes, "prototypes")?;
        if features.is_null() {
            return Err(null("features"));
        }
        if indices.is_null() && capacity > 0 {
            return Err(null("indices"));
        }
        let x = DVector::from_column_slice(std::slice::from_raw_parts(features, feature_len));
        let ranked = predict_rank(&m.inner, &x, &p.inner)?;
        let n = capacity.min(ranked.len());
        for (i, (c, s)) in ranked.into_iter().take(n).enumerate() {
            *indices.add(i) = c;
            if !scores.is_null() {
                *scores.add(i) = s;
            }
        }
        put(written, n, "written")
    })
}
