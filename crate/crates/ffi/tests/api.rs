use std::ffi::{c_char, CStr, CString};
use std::path::{Path, PathBuf};
use std::ptr;

use metaharm::crosswalk::Strategy;
use metaharm::embedding::{save_model, train, Hyperparams};
use metaharm::fixture::{marine_litter_csv, marine_litter_schema};
use metaharm::review::{Action, ReviewConfig, ReviewService};
use metaharm::textify::textify_schema;
use metaharm::{ColumnMeta, EntryId};
use metaharm_ffi::*;

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn text(p: *const c_char) -> String {
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_string()
}

fn last_error() -> String {
    text(mh_last_error())
}

struct Files {
    _dir: tempfile::TempDir,
    std: PathBuf,
    model: PathBuf,
    root: PathBuf,
}

fn files() -> Files {
    let dir = tempfile::tempdir().unwrap();
    let std = dir.path().join("std.csv");
    std::fs::write(&std, marine_litter_csv()).unwrap();
    let model = dir.path().join("model.bin");
    let m = train(&textify_schema(&marine_litter_schema()), &Hyperparams::default()).unwrap();
    save_model(&m, &model).unwrap();
    let root = dir.path().to_path_buf();
    Files { _dir: dir, std, model, root }
}

fn load(std: &Path, model: Option<&Path>) -> *mut MhEngine {
    let std = c(std.to_str().unwrap());
    let model = model.map(|m| c(m.to_str().unwrap()));
    let mut engine = ptr::null_mut();
    let status = unsafe {
        mh_engine_load(std.as_ptr(), model.as_ref().map_or(ptr::null(), |m| m.as_ptr()), &mut engine)
    };
    assert_eq!(status, MhStatus::Ok, "{}", last_error());
    engine
}

fn crosswalk(engine: *const MhEngine, names: &[&str], strategy: Option<&MhStrategy>) -> *mut MhResults {
    let owned: Vec<CString> = names.iter().map(|n| c(n)).collect();
    let ptrs: Vec<*const c_char> = owned.iter().map(|n| n.as_ptr()).collect();
    let mut out = ptr::null_mut();
    let status = unsafe {
        mh_crosswalk(engine, ptrs.as_ptr(), ptrs.len(), strategy.map_or(ptr::null(), |s| s), &mut out)
    };
    assert_eq!(status, MhStatus::Ok, "{}", last_error());
    out
}

fn path_of(results: *const MhResults, i: usize) -> String {
    let mut p = ptr::null();
    assert_eq!(unsafe { mh_result_path(results, i, &mut p) }, MhStatus::Ok);
    text(p)
}

fn entry_of(results: *const MhResults, i: usize) -> Option<String> {
    let mut p = ptr::null();
    assert_eq!(unsafe { mh_result_entry_id(results, i, &mut p) }, MhStatus::Ok);
    (!p.is_null()).then(|| text(p))
}

#[test]
fn crosswalks_fixture_in_both_modes() {
    let f = files();
    let engine = load(&f.std, Some(&f.model));
    let mut n = 0;
    assert_eq!(unsafe { mh_engine_entry_count(engine, &mut n) }, MhStatus::Ok);
    assert_eq!(n, marine_litter_schema().len());

    for mode in [MhMode::Levenshtein, MhMode::Hybrid] {
        let strategy = MhStrategy { mode: mode as i32, ..mh_strategy_default() };
        let results = crosswalk(engine, &["Used Plates", "straw"], Some(&strategy));
        let mut len = 0;
        assert_eq!(unsafe { mh_results_len(results, &mut len) }, MhStatus::Ok);
        assert_eq!(len, 2);
        assert_eq!(path_of(results, 0), "Metal");
        assert!(path_of(results, 1).ends_with("soft plastics"));

        let mut src = ptr::null();
        assert_eq!(unsafe { mh_result_source(results, 0, &mut src) }, MhStatus::Ok);
        assert_eq!(text(src), "Used Plates");

        let mut score = 0.0;
        let mut conf = MhConfidence::Unmatched;
        let mut method = MhMethod::None;
        unsafe {
            assert_eq!(mh_result_score(results, 1, &mut score), MhStatus::Ok);
            assert_eq!(mh_result_confidence(results, 1, &mut conf), MhStatus::Ok);
            assert_eq!(mh_result_method(results, 1, &mut method), MhStatus::Ok);
        }
        assert_eq!(score, 100.0);
        assert_eq!(conf, MhConfidence::Qualified);
        let expected = if mode == MhMode::Hybrid { MhMethod::Embedding } else { MhMethod::Levenshtein };
        assert_eq!(method, expected);
        unsafe { mh_results_free(results) };
    }
    unsafe { mh_engine_free(engine) };
}

#[test]
fn alternates_and_bounds() {
    let f = files();
    let engine = load(&f.std, None);
    let results = crosswalk(engine, &["plates"], None);
    let mut count = 0;
    assert_eq!(unsafe { mh_result_alternate_count(results, 0, &mut count) }, MhStatus::Ok);
    assert!(count > 0 && count < 5);
    let mut id = ptr::null();
    let mut score = 0.0;
    assert_eq!(unsafe { mh_result_alternate(results, 0, 0, &mut id, &mut score) }, MhStatus::Ok);
    assert!(text(id).starts_with('e'));
    assert!(score <= 100.0);

    assert_eq!(
        unsafe { mh_result_alternate(results, 0, count, &mut id, &mut score) },
        MhStatus::IndexOutOfRange
    );
    let mut p = ptr::null();
    assert_eq!(unsafe { mh_result_path(results, 1, &mut p) }, MhStatus::IndexOutOfRange);
    assert!(last_error().contains("out of range"));
    unsafe {
        mh_results_free(results);
        mh_engine_free(engine);
    }
}

#[test]
fn strict_threshold_leaves_entry_null() {
    let f = files();
    let engine = load(&f.std, None);
    let strategy = MhStrategy { threshold: 100, strict: true, ..mh_strategy_default() };
    let results = crosswalk(engine, &["Used Plates"], Some(&strategy));
    assert_eq!(entry_of(results, 0), None);
    assert_eq!(path_of(results, 0), "");
    unsafe {
        mh_results_free(results);
        mh_engine_free(engine);
    }
}

#[test]
fn error_codes() {
    let f = files();
    let mut engine = ptr::null_mut();
    let missing = c(f.root.join("nope.csv").to_str().unwrap());
    assert_eq!(unsafe { mh_engine_load(missing.as_ptr(), ptr::null(), &mut engine) }, MhStatus::Io);
    assert!(engine.is_null());
    assert!(last_error().contains("nope.csv"));

    assert_eq!(unsafe { mh_engine_load(ptr::null(), ptr::null(), &mut engine) }, MhStatus::NullArgument);
    assert_eq!(last_error(), "std_path is null");

    let bad = f.root.join("bad.csv");
    std::fs::write(&bad, "label,T1\nx,y\n").unwrap();
    let bad = c(bad.to_str().unwrap());
    assert_eq!(unsafe { mh_engine_load(bad.as_ptr(), ptr::null(), &mut engine) }, MhStatus::Parse);

    let std = c(f.std.to_str().unwrap());
    let garbage = f.root.join("garbage.bin");
    std::fs::write(&garbage, b"not a model").unwrap();
    let garbage = c(garbage.to_str().unwrap());
    assert_eq!(unsafe { mh_engine_load(std.as_ptr(), garbage.as_ptr(), &mut engine) }, MhStatus::Model);

    let engine = load(&f.std, None);
    let names = [c("plates")];
    let ptrs = [names[0].as_ptr()];
    let mut out = ptr::null_mut();
    let hybrid = MhStrategy { mode: MhMode::Hybrid as i32, ..mh_strategy_default() };
    assert_eq!(
        unsafe { mh_crosswalk(engine, ptrs.as_ptr(), 1, &hybrid, &mut out) },
        MhStatus::InvalidArgument
    );
    let bogus = MhStrategy { mode: 42, ..mh_strategy_default() };
    assert_eq!(
        unsafe { mh_crosswalk(engine, ptrs.as_ptr(), 1, &bogus, &mut out) },
        MhStatus::InvalidArgument
    );
    assert!(last_error().contains("42"));

    let invalid = [0xffu8, 0];
    let ptrs = [invalid.as_ptr().cast::<c_char>()];
    assert_eq!(
        unsafe { mh_crosswalk(engine, ptrs.as_ptr(), 1, ptr::null(), &mut out) },
        MhStatus::InvalidUtf8
    );
    assert!(out.is_null());

    // success clears the previous message
    let results = crosswalk(engine, &[], None);
    assert_eq!(last_error(), "");
    unsafe {
        mh_results_free(results);
        mh_engine_free(engine);
        mh_engine_free(ptr::null_mut());
        mh_results_free(ptr::null_mut());
        mh_string_free(ptr::null_mut());
    }
}

#[test]
fn json_round_trip() {
    let f = files();
    let engine = load(&f.std, None);
    let source = c(r#"{"dataset_id":"d","columns":[{"name":"Used Plates"},{"name":"straw"}]}"#);
    let strategy = c(r#"{"k":2}"#);
    let mut out = ptr::null_mut();
    assert_eq!(
        unsafe { mh_crosswalk_json(engine, source.as_ptr(), strategy.as_ptr(), &mut out) },
        MhStatus::Ok
    );
    let value: serde_json::Value = serde_json::from_str(&text(out)).unwrap();
    unsafe { mh_string_free(out) };
    assert_eq!(value[0]["predicted_path"], serde_json::json!(["Metal"]));
    assert_eq!(value[1]["source_column"], "straw");
    assert!(value[0]["alternates"].as_array().unwrap().len() <= 1);

    let broken = c("{");
    assert_eq!(
        unsafe { mh_crosswalk_json(engine, broken.as_ptr(), ptr::null(), &mut out) },
        MhStatus::Parse
    );
    assert!(out.is_null());
    unsafe { mh_engine_free(engine) };
}

#[test]
fn decision_log_trains_classifier() {
    let f = files();
    let state = f.root.join("state");
    let svc = ReviewService::open(
        marine_litter_schema(),
        None,
        ReviewConfig { auto_accept: false, state_dir: Some(state.clone()), default_strategy: Strategy::default() },
    )
    .unwrap();
    let run = svc.submit("d", vec![ColumnMeta::named("used dishes")], None).unwrap();
    let target = EntryId::from("e0014");
    svc.decide(&run.items[0].item_id, &Action::Override { entry_id: target.clone() }).unwrap();
    drop(svc);

    let engine = load(&f.std, None);
    let before = crosswalk(engine, &["used dishes"], None);
    assert_ne!(entry_of(before, 0).as_deref(), Some("e0014"));

    let log = c(state.join("decisions.ndjson").to_str().unwrap());
    assert_eq!(unsafe { mh_engine_load_decisions(engine, log.as_ptr()) }, MhStatus::Ok, "{}", last_error());
    let after = crosswalk(engine, &["used dishes"], None);
    assert_eq!(entry_of(after, 0).as_deref(), Some("e0014"));
    let mut method = MhMethod::None;
    assert_eq!(unsafe { mh_result_method(after, 0, &mut method) }, MhStatus::Ok);
    assert_eq!(method, MhMethod::Classifier);

    let empty = f.root.join("empty.ndjson");
    std::fs::write(&empty, "").unwrap();
    let empty = c(empty.to_str().unwrap());
    assert_eq!(unsafe { mh_engine_load_decisions(engine, empty.as_ptr()) }, MhStatus::Data);
    unsafe {
        mh_results_free(before);
        mh_results_free(after);
        mh_engine_free(engine);
    }
}

#[test]
fn version_matches_crate() {
    assert_eq!(text(mh_version()), env!("CARGO_PKG_VERSION"));
}
