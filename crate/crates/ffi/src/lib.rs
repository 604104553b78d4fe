//! C ABI for the translation workbench.
//!
//! Objects are opaque handles released with their `_free` function.
//! Fallible calls return a [`BtxStatus`]; on failure
//! [`btx_last_error`] describes the problem for the calling thread.
//! Strings returned through out-parameters are owned by the caller and
//! must be released with [`btx_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use btx::corpus::tokenize;
use btx::decoding::{SearchMode, Translator};
use btx::subword::{BpeModel, Segmenter};
use btx::training::Checkpoint;
use btx::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BtxStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Io = 3,
    Data = 4,
    InvalidArgument = 5,
    Panic = 6,
}

/// A loaded BPE model.
pub struct BtxBpe {
    segmenter: Segmenter,
}

/// A loaded translation checkpoint.
pub struct BtxModel {
    checkpoint: Checkpoint,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> BtxStatus {
    match e {
        Error::Io { .. } => BtxStatus::Io,
        Error::InvalidArgument(_) | Error::Config(_) => BtxStatus::InvalidArgument,
        _ => BtxStatus::Data,
    }
}

fn guard(f: impl FnOnce() -> Result<(), BtxStatus>) -> BtxStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => BtxStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("internal panic");
            BtxStatus::Panic
        }
    }
}

fn fail(e: Error) -> BtxStatus {
    set_error(&e.to_string());
    status_of(&e)
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, BtxStatus> {
    if p.is_null() {
        set_error(&format!("{what} is null"));
        return Err(BtxStatus::NullPointer);
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        set_error(&format!("{what} is not valid UTF-8"));
        BtxStatus::InvalidUtf8
    })
}

unsafe fn put_string(out: *mut *mut c_char, s: String) -> Result<(), BtxStatus> {
    if out.is_null() {
        set_error("output pointer is null");
        return Err(BtxStatus::NullPointer);
    }
    let c = CString::new(s).map_err(|_| {
        set_error("result contains a nul byte");
        BtxStatus::Data
    })?;
    *out = c.into_raw();
    Ok(())
}

/// Message for the most recent failure on this thread. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn btx_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn btx_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `s` must be null or a string returned by this library.
#[no_mangle]
pub unsafe extern "C" fn btx_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn btx_bpe_load(path: *const c_char, out: *mut *mut BtxBpe) -> BtxStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        if out.is_null() {
            set_error("output pointer is null");
            return Err(BtxStatus::NullPointer);
        }
        let model = BpeModel::load(Path::new(path)).map_err(fail)?;
        *out = Box::into_raw(Box::new(BtxBpe {
            segmenter: Segmenter::Bpe(model),
        }));
        Ok(())
    })
}

/// Segments a tokenized line into space-separated units.
///
/// # Safety
/// `bpe` must come from [`btx_bpe_load`]; `line` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn btx_bpe_apply(
    bpe: *const BtxBpe,
    line: *const c_char,
    out: *mut *mut c_char,
) -> BtxStatus {
    guard(|| {
        let Some(bpe) = bpe.as_ref() else {
            set_error("bpe handle is null");
            return Err(BtxStatus::NullPointer);
        };
        let line = str_arg(line, "line")?;
        put_string(out, bpe.segmenter.segment(&tokenize(line)).join(" "))
    })
}

/// # Safety
/// `bpe` must be null or a handle from [`btx_bpe_load`], freed once.
#[no_mangle]
pub unsafe extern "C" fn btx_bpe_free(bpe: *mut BtxBpe) {
    if !bpe.is_null() {
        drop(Box::from_raw(bpe));
    }
}

/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn btx_model_load(
    path: *const c_char,
    out: *mut *mut BtxModel,
) -> BtxStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        if out.is_null() {
            set_error("output pointer is null");
            return Err(BtxStatus::NullPointer);
        }
        let checkpoint = Checkpoint::load(Path::new(path)).map_err(fail)?;
        *out = Box::into_raw(Box::new(BtxModel { checkpoint }));
        Ok(())
    })
}

/// Translates one line. `beam == 0` selects greedy search.
///
/// # Safety
/// `model` must come from [`btx_model_load`]; `line` must be
/// NUL-terminated and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn btx_model_translate(
    model: *const BtxModel,
    line: *const c_char,
    beam: u32,
    out: *mut *mut c_char,
) -> BtxStatus {
    guard(|| {
        let Some(model) = model.as_ref() else {
            set_error("model handle is null");
            return Err(BtxStatus::NullPointer);
        };
        let line = str_arg(line, "line")?;
        let ck = &model.checkpoint;
        let translator = Translator {
            models: std::slice::from_ref(&ck.model),
            src_vocab: &ck.preprocessor.src_vocab,
            tgt_vocab: &ck.preprocessor.tgt_vocab,
            segmenter: &ck.preprocessor.segmenter,
            mode: match beam {
                0 => SearchMode::Greedy,
                b => SearchMode::Beam(b as usize),
            },
        };
        let text = translator.translate_line(line).map_err(fail)?;
        put_string(out, text)
    })
}

/// # Safety
/// `model` must be null or a handle from [`btx_model_load`], freed once.
#[no_mangle]
pub unsafe extern "C" fn btx_model_free(model: *mut BtxModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Case-sensitive corpus BLEU (0-100) over `n` tokenized line pairs.
///
/// # Safety
/// `hyps` and `refs` must each point to `n` NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn btx_bleu(
    hyps: *const *const c_char,
    refs: *const *const c_char,
    n: usize,
    out: *mut f64,
) -> BtxStatus {
    guard(|| {
        if hyps.is_null() || refs.is_null() || out.is_null() {
            set_error("null argument");
            return Err(BtxStatus::NullPointer);
        }
        let mut h = Vec::with_capacity(n);
        let mut r = Vec::with_capacity(n);
        for i in 0..n {
            h.push(str_arg(*hyps.add(i), "hypothesis")?);
            r.push(str_arg(*refs.add(i), "reference")?);
        }
        let report = btx::eval::bleu(&h, &r, 4, true).map_err(fail)?;
        *out = report.bleu;
        Ok(())
    })
}
