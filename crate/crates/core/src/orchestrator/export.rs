use std::fs;
use std::path::Path;

use serde::Serialize;
use serde_json::json;

use super::Trajectory;
use crate::error::{Error, Result};
use crate::render::{render_dendrogram, render_embedding};

/// Relative paths of everything an export wrote.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ExportedFiles {
    pub manifest: String,
    pub trajectory: String,
    pub metrics_csv: String,
    pub iterations: Vec<IterationFiles>,
    pub failed_response: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IterationFiles {
    pub iteration: usize,
    pub prompt: String,
    pub response: String,
    pub scatter: String,
    pub dendro_hd: Option<String>,
    pub dendro_2d: Option<String>,
}

impl ExportedFiles {
    pub fn all(&self) -> Vec<&str> {
        let mut v = vec![
            self.manifest.as_str(),
            self.trajectory.as_str(),
            self.metrics_csv.as_str(),
        ];
        for it in &self.iterations {
            v.extend([
                it.prompt.as_str(),
                it.response.as_str(),
                it.scatter.as_str(),
            ]);
            v.extend(it.dendro_hd.as_deref());
            v.extend(it.dendro_2d.as_deref());
        }
        v.extend(self.failed_response.as_deref());
        v
    }
}

fn unwritable(path: &Path, source: std::io::Error) -> Error {
    Error::Unwritable {
        path: path.to_path_buf(),
        source,
    }
}

fn metrics_csv(t: &Trajectory) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "iteration",
        "method",
        "spearman",
        "stress",
        "mean_distance_ratio",
        "trustworthiness",
        "continuity",
        "silhouette",
        "lof_median",
        "lof_outliers",
        "composite",
        "quality",
        "recommendations",
    ])?;
    for r in &t.records {
        let m = &r.report;
        w.write_record([
            r.iteration.to_string(),
            r.config.method.to_string(),
            m.spearman.to_string(),
            m.stress.to_string(),
            m.mean_distance_ratio.to_string(),
            m.trustworthiness.value.to_string(),
            m.continuity.value.to_string(),
            m.silhouette.map_or_else(String::new, |s| s.to_string()),
            m.lof.median.to_string(),
            m.lof.outlier_count.to_string(),
            r.composite.to_string(),
            r.quality.to_string(),
            r.diagnostic.recommendations.len().to_string(),
        ])?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

/// Writes the trajectory and all per-iteration artifacts into `dir`.
/// Output depends only on the trajectory, so re-exporting is byte-stable.
/// Fails before writing anything when `dir` is not writable.
pub fn export_trajectory(t: &Trajectory, dir: &Path) -> Result<ExportedFiles> {
    fs::create_dir_all(dir).map_err(|e| unwritable(dir, e))?;
    tempfile::NamedTempFile::new_in(dir).map_err(|e| unwritable(dir, e))?;

    // render everything first so a rendering error leaves the directory as is
    let mut outputs: Vec<(String, Vec<u8>)> = Vec::new();
    let mut iterations = Vec::new();
    for r in &t.records {
        let k = r.iteration;
        let files = IterationFiles {
            iteration: k,
            prompt: format!("iter_{k}_prompt.json"),
            response: format!("iter_{k}_response.json"),
            scatter: format!("iter_{k}_scatter.svg"),
            dendro_hd: r
                .hierarchy_hd
                .as_ref()
                .map(|_| format!("iter_{k}_dendro_hd.svg")),
            dendro_2d: r
                .hierarchy_2d
                .as_ref()
                .map(|_| format!("iter_{k}_dendro_2d.svg")),
        };
        outputs.push((files.prompt.clone(), r.prompt().to_json().into_bytes()));
        outputs.push((files.response.clone(), r.raw_response.clone().into_bytes()));
        outputs.push((
            files.scatter.clone(),
            render_embedding(&r.embedding, &t.plot)?.into_bytes(),
        ));
        for (name, tree) in [
            (&files.dendro_hd, &r.hierarchy_hd),
            (&files.dendro_2d, &r.hierarchy_2d),
        ] {
            if let (Some(name), Some(tree)) = (name, tree) {
                outputs.push((name.clone(), render_dendrogram(tree, &t.plot)?.into_bytes()));
            }
        }
        iterations.push(files);
    }
    let failed_response = t
        .failure
        .as_ref()
        .and_then(|f| f.raw_response.as_ref().map(|raw| (f.iteration, raw)))
        .map(|(k, raw)| {
            let name = format!("iter_{k}_failed_response.txt");
            outputs.push((name.clone(), raw.clone().into_bytes()));
            name
        });
    let files = ExportedFiles {
        manifest: "manifest.json".into(),
        trajectory: "trajectory.json".into(),
        metrics_csv: "metrics.csv".into(),
        iterations,
        failed_response,
    };
    outputs.push((files.metrics_csv.clone(), metrics_csv(t)?));
    outputs.push((files.trajectory.clone(), serde_json::to_vec_pretty(t)?));
    let manifest = json!({
        "run_id": t.run_id,
        "dataset": t.dataset,
        "mode": t.mode,
        "agent": t.agent,
        "iterations": t.records.len(),
        "best_iteration": t.best_record().map(|r| r.iteration),
        "stop_reason": t.stop_reason,
        "failure": t.failure.as_ref().map(|f| json!({"iteration": f.iteration, "message": f.message})),
        "files": files,
    });
    outputs.push((
        files.manifest.clone(),
        serde_json::to_vec_pretty(&manifest)?,
    ));

    for (name, bytes) in outputs {
        let path = dir.join(&name);
        fs::write(&path, bytes).map_err(|e| unwritable(&path, e))?;
    }
    Ok(files)
}

pub fn load_trajectory(path: &Path) -> Result<Trajectory> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

/// Re-renders every artifact of a stored trajectory into `dir`.
pub fn replay(trajectory_json: &Path, dir: &Path) -> Result<(Trajectory, ExportedFiles)> {
    let t = load_trajectory(trajectory_json)?;
    let files = export_trajectory(&t, dir)?;
    Ok((t, files))
}
