use std::ffi::{c_char, CStr, CString};
use std::ptr;

use btx::corpus::Vocabulary;
use btx::decoding::{SearchMode, Translator};
use btx::model::{ModelDims, ModelParams};
use btx::pipeline::Preprocessor;
use btx::rng::Rng;
use btx::subword::{BpeModel, Segmenter};
use btx::training::{Checkpoint, CheckpointInfo};
use btx_ffi::*;

fn cstr(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(btx_last_error()) }.to_string_lossy().into_owned()
}

unsafe fn take(s: *mut c_char) -> String {
    let out = CStr::from_ptr(s).to_str().unwrap().to_owned();
    btx_string_free(s);
    out
}

fn checkpoint() -> Checkpoint {
    let src = Vocabulary::build([["a", "b", "c"]], 10).unwrap();
    let tgt = Vocabulary::build([["x", "y"]], 10).unwrap();
    let dims = ModelDims {
        embed: 4,
        hidden: 5,
        attention: 3,
        output: 4,
        src_vocab: src.len(),
        tgt_vocab: tgt.len(),
    };
    let mut rng = Rng::new(3);
    Checkpoint {
        model: ModelParams::new(dims, 0.5, &mut rng).unwrap(),
        preprocessor: Preprocessor {
            segmenter: Segmenter::Identity,
            src_vocab: src,
            tgt_vocab: tgt,
        },
        rng: None,
        info: CheckpointInfo::default(),
    }
}

#[test]
fn version_is_crate_version() {
    let v = unsafe { CStr::from_ptr(btx_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn bpe_load_and_apply() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bpe.model");
    let model = BpeModel::new(vec![("l".into(), "o".into()), ("lo".into(), "w".into())], "@@").unwrap();
    model.save(&path).unwrap();
    unsafe {
        let mut bpe = ptr::null_mut();
        let p = cstr(path.to_str().unwrap());
        assert_eq!(btx_bpe_load(p.as_ptr(), &mut bpe), BtxStatus::Ok);
        let mut out = ptr::null_mut();
        let line = cstr("low lot");
        assert_eq!(btx_bpe_apply(bpe, line.as_ptr(), &mut out), BtxStatus::Ok);
        let expected = Segmenter::Bpe(model).segment(&["low", "lot"]).join(" ");
        assert_eq!(take(out), expected);
        btx_bpe_free(bpe);
    }
}

#[test]
fn model_translate_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.btx");
    let ck = checkpoint();
    ck.save(&path).unwrap();
    let t = |mode| Translator {
        models: std::slice::from_ref(&ck.model),
        src_vocab: &ck.preprocessor.src_vocab,
        tgt_vocab: &ck.preprocessor.tgt_vocab,
        segmenter: &ck.preprocessor.segmenter,
        mode,
    };
    unsafe {
        let mut model = ptr::null_mut();
        let p = cstr(path.to_str().unwrap());
        assert_eq!(btx_model_load(p.as_ptr(), &mut model), BtxStatus::Ok);
        for (beam, mode) in [(0, SearchMode::Greedy), (3, SearchMode::Beam(3))] {
            let mut out = ptr::null_mut();
            let line = cstr("a b c");
            assert_eq!(btx_model_translate(model, line.as_ptr(), beam, &mut out), BtxStatus::Ok);
            assert_eq!(take(out), t(mode).translate_line("a b c").unwrap());
        }
        btx_model_free(model);
    }
}

#[test]
fn missing_file_reports_io() {
    unsafe {
        let mut model = ptr::null_mut();
        let p = cstr("/nonexistent/model.btx");
        assert_eq!(btx_model_load(p.as_ptr(), &mut model), BtxStatus::Io);
        assert!(model.is_null());
        assert!(!last_error().is_empty());
    }
}

#[test]
fn corrupt_model_reports_data() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.btx");
    std::fs::write(&path, b"not a checkpoint").unwrap();
    unsafe {
        let mut model = ptr::null_mut();
        let p = cstr(path.to_str().unwrap());
        assert_eq!(btx_model_load(p.as_ptr(), &mut model), BtxStatus::Data);
    }
}

#[test]
fn null_pointers_are_rejected() {
    unsafe {
        let mut out = ptr::null_mut();
        let line = cstr("a");
        assert_eq!(btx_model_translate(ptr::null(), line.as_ptr(), 0, &mut out), BtxStatus::NullPointer);
        assert!(last_error().contains("null"));
        assert_eq!(btx_bpe_apply(ptr::null(), line.as_ptr(), &mut out), BtxStatus::NullPointer);
        let mut bpe = ptr::null_mut();
        assert_eq!(btx_bpe_load(ptr::null(), &mut bpe), BtxStatus::NullPointer);
        let mut score = 0.0;
        assert_eq!(btx_bleu(ptr::null(), ptr::null(), 0, &mut score), BtxStatus::NullPointer);
        btx_bpe_free(ptr::null_mut());
        btx_model_free(ptr::null_mut());
        btx_string_free(ptr::null_mut());
    }
}

#[test]
fn invalid_utf8_is_rejected() {
    let bad = CString::new(vec![0xffu8, 0xfe]).unwrap();
    unsafe {
        let mut bpe = ptr::null_mut();
        assert_eq!(btx_bpe_load(bad.as_ptr(), &mut bpe), BtxStatus::InvalidUtf8);
    }
}

#[test]
fn bleu_matches_library() {
    let hyps = [cstr("the cat sat on the mat"), cstr("a dog ran")];
    let refs = [cstr("the cat sat on the mat"), cstr("a dog ran away")];
    let hp: Vec<_> = hyps.iter().map(|s| s.as_ptr()).collect();
    let rp: Vec<_> = refs.iter().map(|s| s.as_ptr()).collect();
    let mut score = -1.0;
    unsafe {
        assert_eq!(btx_bleu(hp.as_ptr(), rp.as_ptr(), 2, &mut score), BtxStatus::Ok);
    }
    let expected = btx::eval::bleu(
        &["the cat sat on the mat", "a dog ran"],
        &["the cat sat on the mat", "a dog ran away"],
        4,
        true,
    )
    .unwrap()
    .bleu;
    assert_eq!(score, expected);
    assert!(score > 0.0 && score < 100.0);
}
