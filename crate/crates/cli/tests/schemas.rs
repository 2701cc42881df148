//! Validates every JSON output of the binary against the schemas shipped in
//! docs/schemas/. The checker below covers the subset of JSON Schema draft-07
//! those files use: type, enum, properties, required, additionalProperties,
//! items (uniform and positional), minItems/maxItems, and oneOf.

use std::path::Path;
use std::process::Command;

use serde_json::Value;

fn type_matches(name: &str, value: &Value) -> bool {
    match name {
        "object" => value.is_object(),
        "array" => value.is_array(),
        "string" => value.is_string(),
        "boolean" => value.is_boolean(),
        "null" => value.is_null(),
        "number" => value.is_number(),
        "integer" => value.is_i64() || value.is_u64(),
        other => panic!("unsupported type keyword {other:?}"),
    }
}

fn validate(schema: &Value, value: &Value, path: &str, errors: &mut Vec<String>) {
    if let Some(one_of) = schema.get("oneOf").and_then(Value::as_array) {
        let matches = one_of
            .iter()
            .filter(|sub| {
                let mut sub_errors = Vec::new();
                validate(sub, value, path, &mut sub_errors);
                sub_errors.is_empty()
            })
            .count();
        if matches != 1 {
            errors.push(format!("{path}: matches {matches} of {} oneOf branches", one_of.len()));
        }
        return;
    }

    if let Some(ty) = schema.get("type") {
        let names: Vec<&str> = match ty {
            Value::String(s) => vec![s.as_str()],
            Value::Array(list) => list.iter().filter_map(Value::as_str).collect(),
            other => panic!("unsupported type form {other:?}"),
        };
        if !names.iter().any(|name| type_matches(name, value)) {
            errors.push(format!("{path}: expected type {names:?}, got {value}"));
            return;
        }
    }

    if let Some(allowed) = schema.get("enum").and_then(Value::as_array) {
        if !allowed.contains(value) {
            errors.push(format!("{path}: {value} not among {allowed:?}"));
        }
    }

    if let Some(object) = value.as_object() {
        let properties = schema.get("properties").and_then(Value::as_object);
        if let Some(required) = schema.get("required").and_then(Value::as_array) {
            for key in required.iter().filter_map(Value::as_str) {
                if !object.contains_key(key) {
                    errors.push(format!("{path}: missing required property {key:?}"));
                }
            }
        }
        if schema.get("additionalProperties") == Some(&Value::Bool(false)) {
            for key in object.keys() {
                if !properties.is_some_and(|p| p.contains_key(key)) {
                    errors.push(format!("{path}: unexpected property {key:?}"));
                }
            }
        }
        if let Some(properties) = properties {
            for (key, sub) in properties {
                if let Some(child) = object.get(key) {
                    validate(sub, child, &format!("{path}.{key}"), errors);
                }
            }
        }
    }

    if let Some(array) = value.as_array() {
        if let Some(min) = schema.get("minItems").and_then(Value::as_u64) {
            if (array.len() as u64) < min {
                errors.push(format!("{path}: {} items, minItems {min}", array.len()));
            }
        }
        if let Some(max) = schema.get("maxItems").and_then(Value::as_u64) {
            if (array.len() as u64) > max {
                errors.push(format!("{path}: {} items, maxItems {max}", array.len()));
            }
        }
        match schema.get("items") {
            Some(Value::Array(position_schemas)) => {
                for (i, (sub, child)) in position_schemas.iter().zip(array).enumerate() {
                    validate(sub, child, &format!("{path}[{i}]"), errors);
                }
            }
            Some(sub) => {
                for (i, child) in array.iter().enumerate() {
                    validate(sub, child, &format!("{path}[{i}]"), errors);
                }
            }
            None => {}
        }
    }
}

fn assert_valid(schema_file: &str, value: &Value) {
    let path = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../docs/schemas")
        .join(schema_file);
    let schema: Value =
        serde_json::from_str(&std::fs::read_to_string(&path).expect("schema file")).unwrap();
    let mut errors = Vec::new();
    validate(&schema, value, "$", &mut errors);
    assert!(errors.is_empty(), "{schema_file}:\n{}", errors.join("\n"));
}

fn run_json(dir: &Path, args: &[&str]) -> Value {
    let out = Command::new(env!("CARGO_BIN_EXE_postclust"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs");
    assert!(
        out.status.success(),
        "postclust {args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn demo_csv(dir: &Path) -> String {
    let path = dir.join("demo.csv");
    std::fs::write(
        &path,
        "0.1,0.2\n5.2,5.1\n0.3,-0.1\n5.0,4.8\n-4.9,5.3\n0.2,0.05\n-5.1,5.0\n5.1,5.05\n-5.0,5.15\n",
    )
    .unwrap();
    path.display().to_string()
}

#[test]
fn cluster_report_matches_its_schema() {
    let dir = tempfile::tempdir().unwrap();
    let input = demo_csv(dir.path());
    let report = run_json(dir.path(), &[
        "cluster", "--input", &input, "--linkage", "ward", "--k", "3",
    ]);
    assert_valid("cluster_report.schema.json", &report);
}

#[test]
fn test_reports_match_their_schema_across_methods() {
    let dir = tempfile::tempdir().unwrap();
    let input = demo_csv(dir.path());
    std::fs::write(dir.path().join("id.csv"), "1,0\n0,1\n").unwrap();

    let exact = run_json(dir.path(), &[
        "test", "--input", &input, "--linkage", "average", "--k", "3",
        "--all-pairs", "--sigma", "1",
    ]);
    assert_valid("test_report.schema.json", &exact);

    let mc = run_json(dir.path(), &[
        "test", "--input", &input, "--linkage", "complete", "--k", "3",
        "--pair", "1,2", "--sigma", "1", "--mc-samples", "200", "--seed", "7",
    ]);
    assert_valid("test_report.schema.json", &mc);
    assert_eq!(mc["records"][0]["method"], "monte_carlo");

    let plugin = run_json(dir.path(), &[
        "test", "--input", &input, "--linkage", "average", "--k", "3",
        "--pair", "1,3", "--estimate-sigma",
    ]);
    assert_valid("test_report.schema.json", &plugin);

    let cov = run_json(dir.path(), &[
        "test", "--input", &input, "--linkage", "average", "--k", "3",
        "--pair", "2,3", "--cov", "id.csv",
    ]);
    assert_valid("test_report.schema.json", &cov);
}

#[test]
fn oracle_report_matches_its_schema() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_postclust"))
        .current_dir(dir.path())
        .args([
            "oracle-check", "--linkage", "centroid", "--k", "3", "--instances", "2",
            "--n", "9", "--q", "2", "--grid-points", "120", "--out", "oracle.json",
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("oracle.json")).unwrap(),
    )
    .unwrap();
    assert_valid("oracle_report.schema.json", &report);
}

#[test]
fn simulation_reports_match_their_schema_across_studies() {
    let dir = tempfile::tempdir().unwrap();
    let studies: [&[&str]; 4] = [
        &["--study", "null", "--n", "16", "--q", "2", "--reps", "4"],
        &[
            "--study", "conditional-power", "--n", "18", "--q", "2", "--reps", "3",
            "--delta", "4", "--delta", "6",
        ],
        &["--study", "plugin-sigma", "--n", "20", "--q", "2", "--reps", "3", "--delta", "3"],
        &[
            "--study", "effect-size", "--n", "18", "--q", "2", "--reps", "4",
            "--delta", "5",
        ],
    ];
    for (i, study_args) in studies.iter().enumerate() {
        let json_name = format!("sim{i}.json");
        let mut args: Vec<&str> = vec!["simulate", "--linkage", "average", "--seed", "9"];
        args.extend_from_slice(study_args);
        args.extend_from_slice(&["--json", &json_name]);
        let out = Command::new(env!("CARGO_BIN_EXE_postclust"))
            .current_dir(dir.path())
            .args(&args)
            .output()
            .unwrap();
        assert!(
            out.status.success(),
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        let report: Value = serde_json::from_str(
            &std::fs::read_to_string(dir.path().join(&json_name)).unwrap(),
        )
        .unwrap();
        assert_valid("sim_report.schema.json", &report);
    }
}

#[test]
fn the_checker_itself_rejects_bad_documents() {
    let schema = serde_json::json!({
        "type": "object",
        "required": ["a"],
        "additionalProperties": false,
        "properties": {
            "a": { "type": "integer" },
            "b": { "type": ["number", "null"] },
            "c": { "enum": ["x", "y"] },
            "d": { "type": "array", "items": [{ "type": "number" }, { "type": "boolean" }] }
        }
    });
    let check = |doc: Value| {
        let mut errors = Vec::new();
        validate(&schema, &doc, "$", &mut errors);
        errors
    };
    assert!(check(serde_json::json!({"a": 1, "b": null, "c": "x", "d": [1.5, true]})).is_empty());
    assert!(!check(serde_json::json!({})).is_empty(), "missing required");
    assert!(!check(serde_json::json!({"a": 1.5})).is_empty(), "float is not integer");
    assert!(!check(serde_json::json!({"a": 1, "z": 0})).is_empty(), "extra property");
    assert!(!check(serde_json::json!({"a": 1, "c": "q"})).is_empty(), "enum violation");
    assert!(!check(serde_json::json!({"a": 1, "d": [true, 1.0]})).is_empty(), "tuple order");
}
