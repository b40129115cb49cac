use std::collections::BTreeMap;
use std::time::Duration;

use serde_json::{json, Value};
use vizrefine::dr::external::{build_request, run_backend};
use vizrefine::dr::{compute_embedding, BackendCommand, BackendRegistry, DrConfig, ParamValue};
use vizrefine::synthetic::{gaussian_blobs, random_matrix};
use vizrefine::{DataMatrix, Error};

fn echo() -> BackendCommand {
    BackendCommand::new(env!("CARGO_BIN_EXE_echo-backend"))
}

fn registry() -> BackendRegistry {
    let mut r = BackendRegistry::default();
    r.register("echo", echo());
    r
}

fn run(
    matrix: &DataMatrix,
    params: Value,
    registry: &BackendRegistry,
) -> vizrefine::Result<DataMatrix> {
    let params: BTreeMap<String, Value> = serde_json::from_value(params).unwrap();
    run_backend("echo", &echo(), &params, 0, matrix, registry)
}

fn first_two_columns(m: &DataMatrix) -> Vec<f64> {
    m.iter_rows().flat_map(|r| [r[0], r[1]]).collect()
}

fn backend_message(err: Error) -> (String, String) {
    match err {
        Error::Backend {
            message, stderr, ..
        } => (message, stderr),
        other => panic!("expected a backend error, got {other}"),
    }
}

#[test]
fn request_shape() {
    let m = DataMatrix::from_rows(&[[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]).unwrap();
    let params = BTreeMap::from([("n_neighbors".to_string(), json!(15))]);
    let inline = build_request("umap", &params, 7, &m, None);
    assert_eq!(
        inline,
        json!({"method": "umap", "params": {"n_neighbors": 15}, "seed": 7,
               "data": {"rows": 2, "cols": 3, "values": [1.0, 2.0, 3.0, 4.0, 5.0, 6.0]}})
    );
    let spilled = build_request("umap", &params, 7, &m, Some("/tmp/x.csv"));
    assert_eq!(spilled["data"]["path"], "/tmp/x.csv");
    assert!(spilled["data"].get("values").is_none());
}

#[test]
fn inline_round_trip() {
    let m = random_matrix(25, 4, 1);
    let out = run(&m, json!({}), &registry()).unwrap();
    assert_eq!((out.rows(), out.cols()), (25, 2));
    assert_eq!(out.values(), first_two_columns(&m));
}

#[test]
fn large_input_goes_through_a_file() {
    let m = random_matrix(30, 5, 2);
    let reg = BackendRegistry {
        inline_limit: 10,
        ..registry()
    };
    let out = run(&m, json!({}), &reg).unwrap();
    assert_eq!(out.values(), first_two_columns(&m));
}

#[test]
fn short_reply_is_rejected() {
    let m = random_matrix(10, 3, 3);
    let (msg, _) = backend_message(run(&m, json!({"drop_rows": 2}), &registry()).unwrap_err());
    assert_eq!(msg, "expected 10 rows, got 8");
}

#[test]
fn wide_reply_is_rejected() {
    let m = random_matrix(4, 3, 3);
    let (msg, _) = backend_message(run(&m, json!({"wide_rows": true}), &registry()).unwrap_err());
    assert_eq!(msg, "row 0 has 3 coordinates, expected 2");
}

#[test]
fn error_reply_and_stderr_are_surfaced() {
    let m = random_matrix(4, 3, 3);
    let (msg, stderr) =
        backend_message(run(&m, json!({"fail": "library missing"}), &registry()).unwrap_err());
    assert!(msg.contains("library missing"), "{msg}");
    assert!(stderr.contains("echo backend: library missing"), "{stderr}");
}

#[test]
fn non_json_reply_is_rejected() {
    let m = random_matrix(4, 3, 3);
    let (msg, _) = backend_message(run(&m, json!({"garbage": true}), &registry()).unwrap_err());
    assert!(msg.starts_with("malformed response"), "{msg}");
}

#[test]
fn slow_backend_times_out() {
    let m = random_matrix(4, 3, 3);
    let reg = BackendRegistry {
        timeout: Duration::from_millis(200),
        ..registry()
    };
    let (msg, _) = backend_message(run(&m, json!({"sleep_ms": 5000}), &reg).unwrap_err());
    assert!(msg.starts_with("timed out"), "{msg}");
}

#[test]
fn missing_program() {
    let m = random_matrix(4, 3, 3);
    let err = run_backend(
        "ghost",
        &BackendCommand::new("/nonexistent/backend"),
        &BTreeMap::new(),
        0,
        &m,
        &registry(),
    )
    .unwrap_err();
    assert!(backend_message(err).0.contains("cannot start"));
}

#[test]
fn external_method_through_dispatch() {
    let data = gaussian_blobs(3, 10, 6, 10.0, 5).unwrap();
    let mut config = DrConfig::external("echo", data.rows(), data.cols());
    config.set_param("n_pcs", ParamValue::Int(4));
    let r = compute_embedding(&data, &config, &registry()).unwrap();
    assert_eq!((r.coordinates.rows(), r.coordinates.cols()), (30, 2));
    assert_eq!(r.input_dim, 4);
    assert_eq!(r.coordinates.labels(), data.labels());
}
