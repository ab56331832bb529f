use std::path::Path;

use casimir_core::cli::{self, EXIT_DIFFERENT, EXIT_INVALID, EXIT_NOT_SIMPLE, EXIT_NUMERICAL, EXIT_OK};
use serde_json::Value;

fn run(out: &Path, args: &[&str]) -> (i32, Value, String) {
    let mut full = vec!["casimir-kit", "-o", out.to_str().unwrap()];
    full.extend_from_slice(args);
    let code = cli::run(full);
    let text = std::fs::read_to_string(out).unwrap();
    (code, serde_json::from_str(&text).unwrap(), text)
}

#[test]
fn octahedron_analyze_and_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let s = |p: &str| d.join(p).to_str().unwrap().to_string();
    let (code, _, _) = run(&d.join("fx.json"), &["fixture", "octahedron", "--dir", &s("oct")]);
    assert_eq!(code, EXIT_OK);
    let (mesh, field) = (s("oct/mesh.off"), s("oct/field.txt"));

    let (code, doc, first) = run(&d.join("a.json"), &["analyze", "--mesh", &mesh, "--field", &field]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(doc["version"], "casimir-kit/1");
    assert_eq!(doc["graph"]["arcs"].as_array().unwrap().len(), 1);
    assert_eq!(doc["compatibility"]["pass"], true);
    let (_, _, second) = run(&d.join("b.json"), &["analyze", "--mesh", &mesh, "--field", &field]);
    assert_eq!(first, second, "output must be byte-identical");

    let (code, doc, _) = run(&d.join("m.json"), &["moments", "--graph", &s("a.json"), "--lambda", "3,0"]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(doc["arcs"][0]["feasible"], true);
    assert!(doc["arcs"][0]["stieltjes"]["re"].as_f64().unwrap() > 0.0);

    let (code, doc, _) = run(&d.join("r.json"), &["reconstruct", "--graph", &s("a.json"), "-N", "16", "--eps", "0.05"]);
    assert_eq!(code, EXIT_OK, "{doc}");
    assert_eq!(doc["density"].as_array().unwrap().len(), 201);

    let (code, doc, _) = run(&d.join("e.json"), &["equiv", "--graph-a", &s("a.json"), "--graph-b", &s("b.json")]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(doc["result"]["verdict"], "same");
}

#[test]
fn degenerate_field_is_not_simple() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    run(&d.join("fx.json"), &["fixture", "octahedron", "--dir", d.to_str().unwrap()]);
    let flat = d.join("flat.txt");
    std::fs::write(&flat, "0\n0\n0\n0\n0\n0\n").unwrap();
    let mesh = d.join("mesh.off");
    let (code, doc, _) = run(&d.join("a.json"), &["analyze", "--mesh", mesh.to_str().unwrap(), "--field", flat.to_str().unwrap()]);
    assert_eq!(code, EXIT_NOT_SIMPLE);
    assert_eq!(doc["error"]["kind"], "not_simple");
    assert!(!doc["error"]["violations"].as_array().unwrap().is_empty());
}

#[test]
fn invalid_inputs_and_infeasible_moments() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let missing = d.join("nope.off");
    let (code, _, _) = run(&d.join("a.json"), &["analyze", "--mesh", missing.to_str().unwrap(), "--field", missing.to_str().unwrap()]);
    assert_eq!(code, EXIT_INVALID);
    let (code, _, _) = run(&d.join("b.json"), &["--tol-rel", "0", "fixture", "octahedron", "--dir", d.to_str().unwrap()]);
    assert_eq!(code, EXIT_INVALID);
    let (code, _, _) = run(&d.join("c.json"), &["-N", "1", "fixture", "octahedron", "--dir", d.to_str().unwrap()]);
    assert_eq!(code, EXIT_INVALID);

    let m = d.join("m.json");
    std::fs::write(&m, r#"{"lo": 0.0, "hi": 1.0, "m": [1.0, 2.0, 1.0]}"#).unwrap();
    let (code, doc, _) = run(&d.join("r.json"), &["reconstruct", "--moment-file", m.to_str().unwrap()]);
    assert_eq!(code, EXIT_NUMERICAL);
    assert_eq!(doc["error"]["kind"], "infeasible_moments");
}

#[test]
fn circulation_output_feeds_equiv() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let s = |p: &str| d.join(p).to_str().unwrap().to_string();
    run(&d.join("fx.json"), &["fixture", "shift", "--size", "16", "--dir", &s("sh")]);
    let (mesh, areas) = (s("sh/mesh.off"), s("sh/areas.txt"));
    let (code, doc, _) = run(&d.join("ca.json"), &["circulation", "--mesh", &mesh, "--areas", &areas, "--form", &s("sh/form_a.txt")]);
    assert_eq!(code, EXIT_OK, "{doc}");
    assert!(doc["graph"]["arcs"][0]["c_mid"].is_number());
    let (code, _, _) = run(&d.join("cb.json"), &["circulation", "--mesh", &mesh, "--areas", &areas, "--form", &s("sh/form_b.txt")]);
    assert_eq!(code, EXIT_OK);
    // graph documents carry the measure only, so the shifted cosets compare equal there
    let (code, _, _) = run(&d.join("e.json"), &["equiv", "--graph-a", &s("ca.json"), "--graph-b", &s("cb.json")]);
    assert_eq!(code, EXIT_OK);
    let (code, doc, _) = run(
        &d.join("f.json"),
        &["equiv", "--mesh-a", &mesh, "--areas-a", &areas, "--form-a", &s("sh/form_a.txt"), "--mesh-b", &mesh, "--areas-b", &areas, "--form-b", &s("sh/form_b.txt")],
    );
    assert_eq!(code, EXIT_DIFFERENT);
    assert_eq!(doc["result"]["witness"]["type"], "circulation");
}

#[test]
fn shear_fixture_is_same_orbit() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let s = |p: &str| d.join(p).to_str().unwrap().to_string();
    run(&d.join("fx.json"), &["--seed", "11", "fixture", "shear", "--size", "24", "--dir", &s("sr")]);
    let areas = s("sr/areas.txt");
    let (code, doc, _) = run(
        &d.join("e.json"),
        &[
            "equiv", "--mesh-a", &s("sr/mesh_a.off"), "--areas-a", &areas, "--field-a", &s("sr/field_a.txt"), "--mesh-b",
            &s("sr/mesh_b.off"), "--areas-b", &areas, "--field-b", &s("sr/field_b.txt"),
        ],
    );
    assert_eq!(code, EXIT_OK, "{}", doc["result"]);
}

#[test]
fn short_simulation() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let init = d.join("init.json");
    std::fs::write(&init, r#"{"modes": [{"kx": 1, "ky": 0, "amp": 1.0}, {"kx": 0, "ky": 1, "amp": 0.5}, {"kx": 1, "ky": 1, "amp": 0.1}]}"#).unwrap();
    let (code, doc, _) = run(
        &d.join("s.json"),
        &["simulate", "--n", "32", "--init", init.to_str().unwrap(), "--t-end", "0.2", "--snapshots", "2", "--upsample", "1", "-N", "4"],
    );
    assert_eq!(code, EXIT_OK, "{doc}");
    assert_eq!(doc["trace"]["samples"].as_array().unwrap().len(), 2);
    assert!(doc["trace"]["drift"]["energy"].as_f64().unwrap() < 1e-10);

    std::fs::write(&init, r#"{"modes": [{"kx": 0, "ky": 0, "amp": 1.0}]}"#).unwrap();
    let (code, doc, _) = run(&d.join("t.json"), &["simulate", "--n", "16", "--init", init.to_str().unwrap()]);
    assert_eq!(code, EXIT_INVALID);
    assert_eq!(doc["error"]["kind"], "non_zero_mean");
}
