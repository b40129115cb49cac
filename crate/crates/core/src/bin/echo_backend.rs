//! Test backend for the external embedding protocol: answers with the first
//! two input columns. Test-only params bend the reply:
//! `fail` (error message, exit 1), `drop_rows` (omit trailing rows),
//! `wide_rows` (three coordinates per row), `garbage` (non-JSON reply),
//! `sleep_ms` (delay before answering).

use std::io::{self, Read, Write};
use std::process::ExitCode;
use std::time::Duration;

use serde_json::{json, Value};
use vizrefine::DataMatrix;

fn input(request: &Value) -> Result<DataMatrix, String> {
    let data = &request["data"];
    let rows = data["rows"].as_u64().ok_or("data.rows missing")? as usize;
    let cols = data["cols"].as_u64().ok_or("data.cols missing")? as usize;
    let matrix = if let Some(path) = data["path"].as_str() {
        DataMatrix::read_csv(path, "").map_err(|e| format!("cannot read {path}: {e}"))?
    } else {
        let values: Vec<f64> = data["values"]
            .as_array()
            .ok_or("data.values or data.path required")?
            .iter()
            .map(|v| v.as_f64().ok_or("non-numeric value"))
            .collect::<Result<_, _>>()?;
        if values.len() != rows * cols {
            return Err(format!(
                "shape mismatch: rows={rows}, cols={cols} but {} values",
                values.len()
            ));
        }
        DataMatrix::new(rows, cols, values).map_err(|e| e.to_string())?
    };
    if matrix.rows() != rows || matrix.cols() != cols {
        return Err(format!(
            "shape mismatch: header says {rows}x{cols}, data is {}x{}",
            matrix.rows(),
            matrix.cols()
        ));
    }
    Ok(matrix)
}

fn serve(request: &Value) -> Result<Value, String> {
    let params = &request["params"];
    if let Some(ms) = params["sleep_ms"].as_u64() {
        std::thread::sleep(Duration::from_millis(ms));
    }
    if let Some(msg) = params["fail"].as_str() {
        return Err(msg.to_string());
    }
    let matrix = input(request)?;
    let keep = matrix
        .rows()
        .saturating_sub(params["drop_rows"].as_u64().unwrap_or(0) as usize);
    let wide = params["wide_rows"].as_bool().unwrap_or(false);
    let coords: Vec<Vec<f64>> = (0..keep)
        .map(|i| {
            let row = matrix.row(i);
            let mut out = vec![
                row.first().copied().unwrap_or(0.0),
                row.get(1).copied().unwrap_or(0.0),
            ];
            if wide {
                out.push(0.0);
            }
            out
        })
        .collect();
    Ok(json!({ "coordinates": coords }))
}

fn main() -> ExitCode {
    let mut text = String::new();
    if let Err(e) = io::stdin().read_to_string(&mut text) {
        eprintln!("cannot read stdin: {e}");
        return ExitCode::FAILURE;
    }
    let request: Value = match serde_json::from_str(&text) {
        Ok(v) => v,
        Err(e) => {
            println!("{}", json!({ "error": format!("malformed request: {e}") }));
            return ExitCode::FAILURE;
        }
    };
    if request["params"]["garbage"].as_bool() == Some(true) {
        println!("this is not json");
        return ExitCode::SUCCESS;
    }
    eprintln!("echo backend: method {}", request["method"]);
    let (reply, code) = match serve(&request) {
        Ok(v) => (v, ExitCode::SUCCESS),
        Err(e) => {
            eprintln!("echo backend: {e}");
            (json!({ "error": e }), ExitCode::FAILURE)
        }
    };
    let mut out = io::stdout().lock();
    let _ = writeln!(out, "{reply}");
    code
}
