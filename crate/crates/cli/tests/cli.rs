use std::process::{Command, Output};

use fbh_core::domain::{fbh_defining, DomainParams, DomainPoint};
use fbh_core::fbhaut::{FbhAut, FbhAutJson};
use fbh_core::mapsys::MapDescriptor;
use serde_json::Value;

fn fbh(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fbh"))
        .args(args)
        .env_remove("FBH_SEED")
        .output()
        .expect("spawn fbh")
}

fn json_of(out: &Output) -> Value {
    let s = String::from_utf8_lossy(&out.stdout);
    assert_eq!(s.lines().count(), 1, "one report line expected, got {s:?}");
    serde_json::from_str(s.trim()).expect("stdout is json")
}

fn ok(args: &[&str]) -> Value {
    let out = fbh(args);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    json_of(&out)
}

fn rejected(args: &[&str]) -> Value {
    let out = fbh(args);
    assert_eq!(out.status.code(), Some(2), "stdout: {}", String::from_utf8_lossy(&out.stdout));
    assert!(!out.stderr.is_empty());
    json_of(&out)
}

fn fixture(name: &str) -> String {
    format!("{}/tests/fixtures/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn aut_json(g: &FbhAut<f64>) -> String {
    serde_json::to_string(&FbhAutJson::from(g)).unwrap()
}

#[test]
fn member_classifies_three_ways() {
    let inside = ok(&["member", "--mu", "1", "--point", r#"{"z":[[0,0]],"w":[[0.5,0]]}"#]);
    assert_eq!(inside["classification"], "Interior");
    let base = ok(&["member", "--point", r#"{"z":[[0,0],[0,0]],"w":[[1,0]]}"#]);
    assert_eq!(base["classification"], "Boundary");
    let out = ok(&["member", "--point", r#"{"z":[[1,0]],"w":[[0.9,0]]}"#]);
    assert_eq!(out["classification"], "Exterior");
    // e^{-1} = 0.3679 so |w|^2 = 0.25 lies inside
    let v = ok(&["member", "--point", r#"{"z":[[1,0]],"w":[[0.5,0]]}"#]);
    assert!((v["defining_value"].as_f64().unwrap() - (0.25 - (-1.0f64).exp())).abs() < 1e-15);
}

#[test]
fn compose_with_inverse_is_identity() {
    let p = DomainParams::hartogs(3, 1.0).unwrap();
    let g = FbhAut::random(p, 17);
    let gs = aut_json(&g);
    let inv = ok(&["aut", "invert", "--g", &gs]).to_string();
    let id = ok(&["aut", "compose", "--f", &gs, "--g", &inv]);
    let id: FbhAutJson<f64> = serde_json::from_value(id).unwrap();
    let id = id.into_aut(1.0).unwrap();
    assert!(id.max_field_diff(&FbhAut::identity(p)) < 1e-12);
}

#[test]
fn to_base_on_p_fixes_p() {
    let g = ok(&["aut", "to-base", "--mu", "2", "--point", r#"{"z":[[0,0]],"w":[[1,0]]}"#]);
    let g: FbhAutJson<f64> = serde_json::from_value(g).unwrap();
    let g = g.into_aut(2.0).unwrap();
    let base = DomainParams::hartogs(1, 2.0).unwrap().base_point();
    assert!(g.apply(&base).unwrap().max_abs_diff(&base) < 1e-15);
}

#[test]
fn apply_keeps_boundary() {
    let p = DomainParams::hartogs(2, 0.5).unwrap();
    let g = FbhAut::random(p, 3);
    let q = r#"{"z":[[0.3,0.1],[0,-0.2]],"w":[[0.5,0]]}"#;
    // rescale w so that the point lies on the boundary
    let mut pt: DomainPoint<f64> = serde_json::from_str(q).unwrap();
    let r = (-0.5 * pt.z.norm_sqr()).exp().sqrt();
    pt.w[0] = pt.w[0] / pt.w[0].norm() * r;
    let qs = serde_json::to_string(&pt).unwrap();
    let y = ok(&["aut", "apply", "--mu", "0.5", "--g", &aut_json(&g), "--point", &qs]);
    let y: DomainPoint<f64> = serde_json::from_value(y).unwrap();
    assert!(fbh_defining(&p, &y).unwrap().abs() < 1e-12);
}

#[test]
fn normalize_fixture_files() {
    let v = ok(&["normalize", "--map", &fixture("power2.json")]);
    assert_eq!(v["k"], 2);
    assert_eq!(v["strategy"], "direct");
    for key in ["sigma", "tau", "residual_sup"] {
        assert!(v.get(key).is_some(), "{key}");
    }
    assert_eq!(ok(&["normalize", "--map", &fixture("identity.json")])["k"], 1);
    let both = ok(&["normalize", "--strategy", "both", "--map", &fixture("power2.json")]);
    assert_eq!(both["ballfit"]["k"], 2);
}

#[test]
fn normalize_black_box_conjugated_fixture() {
    let f = MapDescriptor::classified_fixture(2, 2, 3, 1.0, 0.4, 5).unwrap();
    let v = ok(&["normalize", "--black-box", "--strategy", "both", "--map", &f.to_json()]);
    assert_eq!(v["k"], 3);
}

#[test]
fn constant_map_is_not_proper() {
    let v = rejected(&["normalize", "--map", &fixture("constant.json")]);
    assert_eq!(v["reason"], "NotProper");
    let v = rejected(&["verify-proper", "--map", &fixture("constant.json")]);
    assert_eq!(v["reason"], "NotProper");
    assert_eq!(v["pass"], false);
}

#[test]
fn fiber_count_of_power_map() {
    let v = ok(&[
        "fiber-count",
        "--map",
        &fixture("power2.json"),
        "--target",
        r#"{"z":[[0.1,0],[0,0.05]],"w":[[0.3,0.1]]}"#,
    ]);
    assert_eq!(v["count"], 2);
}

#[test]
fn too_many_target_dimensions_are_refused() {
    let f = MapDescriptor::<f64>::embed(2, 4, 2, 1.0).unwrap();
    let v = rejected(&["normalize", "--map", &f.to_json()]);
    assert_eq!(v["reason"], "HypothesisViolated");
}

#[test]
fn output_is_deterministic() {
    let f = MapDescriptor::classified_fixture(2, 3, 2, 1.0, 0.5, 11).unwrap().to_json();
    let run = |seed: &str| {
        Command::new(env!("CARGO_BIN_EXE_fbh"))
            .args(["normalize", "--strategy", "both", "--map", &f])
            .env("FBH_SEED", seed)
            .output()
            .unwrap()
            .stdout
    };
    let a = run("4");
    assert_eq!(a, run("4"));
    let jobs = Command::new(env!("CARGO_BIN_EXE_fbh"))
        .args(["--jobs", "1", "--seed", "4", "normalize", "--strategy", "both", "--map", &f])
        .output()
        .unwrap()
        .stdout;
    assert_eq!(a, jobs);
}

#[test]
fn schema_errors_name_the_path() {
    let v = rejected(&["member", "--point", r#"{"z":[[0,0]],"w":[[0.5]]}"#]);
    assert_eq!(v["reason"], "SchemaViolation");
    assert!(v["message"].as_str().unwrap().contains("w[0]"), "{v}");
    let v = rejected(&["normalize", "--map", r#"{"in":{"n":1,"m":1,"mu":1},"out":{"n":1,"m":1,"mu":1},"stages":[{"type":"power"}]}"#]);
    assert_eq!(v["reason"], "SchemaViolation");
    assert!(v["message"].as_str().unwrap().contains("stages[0]"), "{v}");
    let v = rejected(&["member", "--point", "/no/such/file.json"]);
    assert_eq!(v["reason"], "InputUnreadable");
}

#[test]
fn stage_tags_are_enforced() {
    let v = rejected(&["transfer", "from-ball", "--point", r#"{"stage":"siegel","coords":[[0,0],[0,0]]}"#]);
    assert_eq!(v["reason"], "StageMismatch");
    let ball = ok(&["transfer", "to-ball", "--point", r#"{"z":[[0,0]],"w":[[1,0]]}"#]);
    assert_eq!(ball["stage"], "ball");
    let back = ok(&["transfer", "from-ball", "--point", &ball.to_string()]);
    assert_eq!(back["stage"], "fbh");
}

#[test]
fn ball_canonical_of_identity() {
    let v = ok(&[
        "ball",
        "canonical",
        "--transform",
        r#"{"M":[[[1,0],[0,0],[0,0]],[[0,0],[1,0],[0,0]],[[0,0],[0,0],[1,0]]]}"#,
    ]);
    assert_eq!(v["diagnostics"]["kappa"][0], 1.0);
}

#[test]
fn bad_flags_are_rejected() {
    assert_eq!(fbh(&["--mu", "-1", "member", "--point", "{}"]).status.code(), Some(2));
    assert_eq!(fbh(&["--tol", "k_gate=-3", "member", "--point", "{}"]).status.code(), Some(2));
}
