use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use grapheye::gcgat::{GcGatConfig, GcGatModel};
use grapheye::veccpg::FunctionVocabulary;
use grapheye_ffi::*;

const LISTINGS: &str = include_str!("../../core/tests/fixtures/listings.c");

fn cstr(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> String {
    let p = ge_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn model_json() -> String {
    let vocab = FunctionVocabulary::new(["printLine"]).unwrap();
    GcGatModel::new(GcGatConfig::default(), vocab).unwrap().to_json()
}

fn graph(function: Option<&str>) -> *mut GeGraph {
    let src = cstr(LISTINGS);
    let name = function.map(cstr);
    let mut g = ptr::null_mut();
    let st = unsafe { ge_graph_from_source(src.as_ptr(), name.as_ref().map_or(ptr::null(), |n| n.as_ptr()), &mut g) };
    assert_eq!(st, GeStatus::Ok);
    g
}

#[test]
fn graph_round_trip() {
    let g = graph(Some("bad"));
    assert_eq!(unsafe { ge_graph_num_nodes(g) }, 18);
    let mut json = ptr::null_mut();
    assert_eq!(unsafe { ge_graph_to_json(g, &mut json) }, GeStatus::Ok);
    let v: serde_json::Value = serde_json::from_str(unsafe { CStr::from_ptr(json) }.to_str().unwrap()).unwrap();
    assert_eq!(v["name"], "bad");
    let mut dot = ptr::null_mut();
    assert_eq!(unsafe { ge_graph_to_dot(g, &mut dot) }, GeStatus::Ok);
    assert!(unsafe { CStr::from_ptr(dot) }.to_str().unwrap().starts_with("digraph"));
    unsafe {
        ge_string_free(json);
        ge_string_free(dot);
        ge_graph_free(g);
    }
}

#[test]
fn predict_matches_library() {
    let text = model_json();
    let json = cstr(&text);
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { ge_model_from_json(json.as_ptr(), &mut m) }, GeStatus::Ok);
    let g = graph(Some("good"));
    let mut p = GePrediction::default();
    assert_eq!(unsafe { ge_model_predict(m, g, &mut p) }, GeStatus::Ok);

    let model = GcGatModel::from_json(&text).unwrap();
    let ast = grapheye::frontend::parse_unit(LISTINGS).unwrap().remove(1);
    let expected = model.predict(&grapheye::cpg::build_cpg(&ast).unwrap()).unwrap();
    assert_eq!(p.prob_bad, expected.prob_bad);
    assert_eq!(p.label, expected.class.index() as i32);

    let mut vocab = ptr::null_mut();
    assert_eq!(unsafe { ge_model_vocab(m, &mut vocab) }, GeStatus::Ok);
    let mut vec_json = ptr::null_mut();
    assert_eq!(unsafe { ge_graph_vectorize_json(g, vocab, &mut vec_json) }, GeStatus::Ok);
    let v: serde_json::Value = serde_json::from_str(unsafe { CStr::from_ptr(vec_json) }.to_str().unwrap()).unwrap();
    assert_eq!(v["x"].as_array().unwrap()[0].as_array().unwrap().len(), 133);
    unsafe {
        ge_string_free(vec_json);
        ge_vocab_free(vocab);
        ge_graph_free(g);
        ge_model_free(m);
    }
}

#[test]
fn error_codes() {
    let mut g = ptr::null_mut();
    assert_eq!(unsafe { ge_graph_from_source(ptr::null(), ptr::null(), &mut g) }, GeStatus::NullArgument);
    assert!(last_error().contains("source"));

    let src = cstr(LISTINGS);
    assert_eq!(unsafe { ge_graph_from_source(src.as_ptr(), ptr::null(), &mut g) }, GeStatus::NotFound);
    let missing = cstr("nope");
    assert_eq!(unsafe { ge_graph_from_source(src.as_ptr(), missing.as_ptr(), &mut g) }, GeStatus::NotFound);
    assert!(last_error().contains("nope"));

    let broken = cstr("void f() { \"abc");
    assert_eq!(unsafe { ge_graph_from_source(broken.as_ptr(), ptr::null(), &mut g) }, GeStatus::Parse);

    let goto = cstr("void f() { goto nowhere; }");
    assert_eq!(unsafe { ge_graph_from_source(goto.as_ptr(), ptr::null(), &mut g) }, GeStatus::Graph);

    let mut m = ptr::null_mut();
    let path = cstr("/nonexistent/model.json");
    assert_eq!(unsafe { ge_model_load(path.as_ptr(), &mut m) }, GeStatus::Io);
    let junk = cstr("{\"config\": 1}");
    assert_eq!(unsafe { ge_model_from_json(junk.as_ptr(), &mut m) }, GeStatus::Model);
    let bad_utf8 = [0xffu8, 0xfe, 0];
    assert_eq!(unsafe { ge_model_load(bad_utf8.as_ptr().cast(), &mut m) }, GeStatus::InvalidUtf8);

    let mut p = GePrediction::default();
    assert_eq!(unsafe { ge_model_predict(ptr::null(), ptr::null(), &mut p) }, GeStatus::NullArgument);
    assert_eq!(unsafe { ge_graph_num_nodes(ptr::null()) }, 0);

    let g = graph(Some("bad"));
    unsafe { ge_graph_free(g) };
    assert!(ge_last_error().is_null());
}

#[test]
fn load_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    std::fs::write(&path, model_json()).unwrap();
    let p = cstr(path.to_str().unwrap());
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { ge_model_load(p.as_ptr(), &mut m) }, GeStatus::Ok);
    assert!(!m.is_null());
    unsafe { ge_model_free(m) };
    assert_eq!(unsafe { CStr::from_ptr(ge_version()) }.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("include/grapheye.h")).unwrap();
    for f in [
        "ge_last_error", "ge_version", "ge_string_free", "ge_model_load", "ge_model_from_json", "ge_model_free",
        "ge_model_predict", "ge_graph_from_source", "ge_graph_free", "ge_graph_num_nodes", "ge_graph_to_json",
        "ge_graph_to_dot", "ge_vocab_from_json", "ge_model_vocab", "ge_vocab_free", "ge_graph_vectorize_json",
    ] {
        assert!(header.contains(&format!("{f}(")), "{f} missing from header");
    }
    assert!(header.contains("typedef struct GeModel GeModel;"));
}

fn static_lib() -> PathBuf {
    // target/<profile>/deps/<test binary>
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().join("libgrapheye_ffi.a")
}

#[test]
fn c_program_links_and_runs() {
    let lib = static_lib();
    assert!(lib.exists(), "{} not built", lib.display());
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("model.json");
    std::fs::write(&model, model_json()).unwrap();
    let c_src = dir.path().join("main.c");
    std::fs::write(
        &c_src,
        r#"#include <stdio.h>
#include "grapheye.h"
int main(int argc, char **argv) {
    GeModel *m = NULL;
    GeGraph *g = NULL;
    GePrediction p;
    if (ge_model_load(argv[1], &m) != GE_STATUS_OK) { fprintf(stderr, "%s\n", ge_last_error()); return 3; }
    if (ge_graph_from_source("void bad(int d) { int r = 100 / d; printLine(r); }", NULL, &g) != GE_STATUS_OK) return 4;
    if (ge_model_predict(m, g, &p) != GE_STATUS_OK) return 5;
    printf("%zu %d %.6f\n", ge_graph_num_nodes(g), p.label, p.prob_bad);
    if (ge_graph_from_source("void f() { \"abc", NULL, &g) != GE_STATUS_PARSE) return 6;
    ge_graph_free(g);
    ge_model_free(m);
    return argc == 2 ? 0 : 7;
}
"#,
    )
    .unwrap();
    let exe = dir.path().join("prog");
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    let out = Command::new(cc)
        .arg(&c_src)
        .arg("-I")
        .arg(Path::new(env!("CARGO_MANIFEST_DIR")).join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let run = Command::new(&exe).arg(&model).output().unwrap();
    assert!(run.status.success(), "exit {:?}: {}", run.status, String::from_utf8_lossy(&run.stderr));
    let line = String::from_utf8(run.stdout).unwrap();
    let fields: Vec<&str> = line.split_whitespace().collect();
    assert_eq!(fields.len(), 3);
    assert!(fields[0].parse::<usize>().unwrap() > 5);
    let prob: f64 = fields[2].parse().unwrap();
    assert!((0.0..=1.0).contains(&prob));
}
