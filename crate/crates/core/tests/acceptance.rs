//! Acceptance criteria, one line each. Runs without the test harness so the
//! report reads top to bottom; exits nonzero if any criterion fails.

mod common;

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use vizrefine::agent::{
    build_master_prompt, explicit_composite_score, DiagnosticReport, HierarchyEntry, MockAgent,
    ScoredMetric, WeightVector, PRESET_NAMES,
};
use vizrefine::dr::tsne::{tsne, TsneParams};
use vizrefine::dr::{DrConfig, Method};
use vizrefine::hierarchy::{centroid_dendrogram, upgma, Dendrogram};
use vizrefine::metrics::{
    assemble_report, continuity, lof_scores, mean_distance_ratio, pairwise_distances, silhouette,
    spearman_distance_score, stress, trustworthiness, DistanceMatrix, KScore, LofSummary,
    MetricsConfig, MetricsReport,
};
use vizrefine::orchestrator::{
    export_trajectory, replay, run_pipeline, score_embedding, PipelineOptions, ScoreMode,
    StopReason,
};
use vizrefine::synthetic::{gaussian_blobs, random_matrix};
use vizrefine::DataMatrix;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($fmt)+));
        }
    };
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

fn to_points(m: &DataMatrix) -> common::Points {
    m.iter_rows().map(<[f64]>::to_vec).collect()
}

fn random_points(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> DataMatrix {
    let values = (0..n * dim)
        .map(|_| rng.random_range(-10.0..10.0))
        .collect();
    DataMatrix::new(n, dim, values).unwrap()
}

fn metric_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let tol = 1e-9;
    let mut worst = 0.0f64;
    let mut check = |name: &str, inst: usize, got: f64, want: f64| -> Result<(), String> {
        worst = worst.max((got - want).abs());
        ensure!(
            close(got, want, tol),
            "instance {inst}: {name} {got} vs oracle {want}"
        );
        Ok(())
    };
    for inst in 0..200 {
        let n = rng.random_range(5..=20);
        let dim = rng.random_range(2..=6);
        let hd = random_points(&mut rng, n, dim);
        let ld = random_points(&mut rng, n, 2);
        let (dh, dl) = (
            pairwise_distances(&hd).unwrap(),
            pairwise_distances(&ld).unwrap(),
        );
        let (ph, pl) = (to_points(&hd), to_points(&ld));
        let (oh, ol) = (common::distances(&ph), common::distances(&pl));

        check(
            "spearman",
            inst,
            spearman_distance_score(&dh, &dl).unwrap(),
            common::spearman(&oh, &ol),
        )?;
        check(
            "stress",
            inst,
            stress(&dh, &dl).unwrap(),
            common::stress(&oh, &ol),
        )?;
        check(
            "ratio",
            inst,
            mean_distance_ratio(&dh, &dl).unwrap(),
            common::distance_ratio(&oh, &ol),
        )?;
        for k in 1..=(n - 1) / 2 {
            check(
                "trust",
                inst,
                trustworthiness(&dh, &dl, k).unwrap(),
                common::trustworthiness(&oh, &ol, k),
            )?;
            check(
                "cont",
                inst,
                continuity(&dh, &dl, k).unwrap(),
                common::continuity(&oh, &ol, k),
            )?;
        }
        let groups = rng.random_range(2..=3.min(n));
        let ids: Vec<usize> = (0..n)
            .map(|i| {
                if i < groups {
                    i
                } else {
                    rng.random_range(0..groups)
                }
            })
            .collect();
        let labels: Vec<String> = ids.iter().map(|g| format!("g{g}")).collect();
        let sil = silhouette(&ld, &labels)
            .unwrap()
            .expect("two or more labels");
        check("silhouette", inst, sil, common::silhouette(&pl, &ids))?;
        let k = rng.random_range(1..n);
        let lof = lof_scores(&ld, k, 1.5).unwrap();
        for (i, (got, want)) in lof.scores.iter().zip(common::lof(&pl, k)).enumerate() {
            check(&format!("lof[{i}] k={k}"), inst, *got, want)?;
        }
    }
    Ok(format!("200 instances, max deviation {worst:.1e}"))
}

fn identity_invariants() -> Outcome {
    let hd = random_matrix(50, 6, 11);
    let d = pairwise_distances(&hd).unwrap();
    let tol = 1e-12;
    let rho = spearman_distance_score(&d, &d).unwrap();
    let s = stress(&d, &d).unwrap();
    let r = mean_distance_ratio(&d, &d).unwrap();
    ensure!(close(rho, 1.0, tol), "spearman {rho}");
    ensure!(close(s, 0.0, tol), "stress {s}");
    ensure!(close(r, 1.0, tol), "ratio {r}");
    for k in [1, 5, 10] {
        let t = trustworthiness(&d, &d, k).unwrap();
        let c = continuity(&d, &d, k).unwrap();
        ensure!(
            close(t, 1.0, tol) && close(c, 1.0, tol),
            "k={k}: T {t}, C {c}"
        );
    }
    Ok("n=50, k in {1, 5, 10}".into())
}

fn duality() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for inst in 0..100 {
        let n = rng.random_range(6..=30);
        let a = pairwise_distances(&random_points(&mut rng, n, 4)).unwrap();
        let b = pairwise_distances(&random_points(&mut rng, n, 2)).unwrap();
        let k = rng.random_range(1..=(n - 1) / 2);
        let t = trustworthiness(&a, &b, k).unwrap();
        let c = continuity(&b, &a, k).unwrap();
        ensure!(t == c, "instance {inst}: T(A,B) {t} != C(B,A) {c}");
    }
    Ok("100 instances, exact equality".into())
}

fn names(n: usize) -> Vec<String> {
    (0..n).map(|i| i.to_string()).collect()
}

fn merge_sets(t: &Dendrogram) -> Vec<(BTreeSet<usize>, BTreeSet<usize>, f64)> {
    t.merges()
        .iter()
        .map(|m| {
            (
                t.members(m.left).into_iter().collect(),
                t.members(m.right).into_iter().collect(),
                m.height,
            )
        })
        .collect()
}

fn upgma_checks() -> Outcome {
    let hand =
        DistanceMatrix::from_square(3, vec![0.0, 1.0, 4.0, 1.0, 0.0, 4.0, 4.0, 4.0, 0.0]).unwrap();
    let t = upgma(&hand, &["A", "B", "C"].map(String::from)).unwrap();
    let heights: Vec<f64> = t.merges().iter().map(|m| m.height).collect();
    ensure!(heights == [0.5, 2.0], "hand trace heights {heights:?}");
    ensure!(
        t.to_newick() == "((A,B),C);",
        "hand trace newick {}",
        t.to_newick()
    );

    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for inst in 0..50 {
        let m = random_points(&mut rng, 6, 3);
        let d = pairwise_distances(&m).unwrap();
        let got = merge_sets(&upgma(&d, &names(6)).unwrap());
        let want = common::naive_upgma(&common::distances(&to_points(&m)));
        for (g, w) in got.iter().zip(&want) {
            ensure!(
                g.0 == w.0 && g.1 == w.1 && close(g.2, w.2, 1e-9),
                "matrix {inst}: merge {g:?} vs naive {w:?}"
            );
        }
    }

    for inst in 0..20 {
        let n = rng.random_range(4..=10);
        // random binary tree with strictly increasing merge heights
        let mut clusters: Vec<BTreeSet<usize>> = (0..n).map(|i| BTreeSet::from([i])).collect();
        let mut clades = BTreeSet::new();
        let mut d = vec![0.0; n * n];
        let mut h: f64 = 0.0;
        while clusters.len() > 1 {
            h += rng.random_range(0.5..2.0);
            let a = rng.random_range(0..clusters.len());
            let mut b = rng.random_range(0..clusters.len() - 1);
            if b >= a {
                b += 1;
            }
            let (a, b) = (a.min(b), a.max(b));
            let right = clusters.remove(b);
            for &x in &clusters[a] {
                for &y in &right {
                    d[x * n + y] = 2.0 * h;
                    d[y * n + x] = 2.0 * h;
                }
            }
            clusters[a].extend(right);
            clades.insert((
                clusters[a].iter().copied().collect::<Vec<_>>(),
                (h * 1e9).round() as i64,
            ));
        }
        let tree = upgma(&DistanceMatrix::from_square(n, d).unwrap(), &names(n)).unwrap();
        let recovered: BTreeSet<_> = tree
            .merges()
            .iter()
            .enumerate()
            .map(|(i, m)| {
                let mut members = tree.members(n + i);
                members.sort_unstable();
                (members, (m.height * 1e9).round() as i64)
            })
            .collect();
        ensure!(recovered == clades, "ultrametric {inst}: clades differ");
    }
    Ok("hand trace, 50 random 6-leaf matrices, 20 ultrametrics".into())
}

const SAMPLE_DIAGNOSTIC: &str = r#"{
  "quality_score": 6.0,
  "score_rationale": "Excellent local neighbor preservation but poor global structure...",
  "overall_assessment": {
    "key_strengths": ["High local fidelity"],
    "key_weaknesses": ["Global structure distortion"],
    "metric_analysis": { ... }
  },
  "dendrogram_comparison": {
    "agreement_level": "moderate",
    "key_differences": ["MNP relocated toward endothelial block..."]
  },
  "visual_inspection": {
    "artifacts": ["Large amorphous Proximal Tubule island"]
  },
  "recommendations": [
    {
      "parameter": "tsne.perplexity",
      "current_value": "30.0",
      "suggested_value": "80",
      "rationale": "Larger perplexity increases the effective neighborhood size...",
      "expected_impact": "Reduce Stress-1; more coherent macro-branches.",
      "priority": "high"
    },
    ...
  ],
  "follow_up_metrics": [ ... ]
}"#;

fn schema_fidelity() -> Outcome {
    let hd = gaussian_blobs(3, 10, 4, 8.0, 2).unwrap();
    let emb = hd.leading_columns(2);
    let labels = hd.labels().unwrap();
    let report = assemble_report(&hd, &emb, Some(labels), &MetricsConfig::default()).unwrap();
    let prompt = build_master_prompt(
        &report,
        Some(HierarchyEntry::new(
            &centroid_dendrogram(&hd, labels).unwrap(),
            "4D",
        )),
        Some(HierarchyEntry::new(
            &centroid_dendrogram(&emb, labels).unwrap(),
            "2D",
        )),
        &DrConfig::tsne(30, 4),
        1,
    );
    let v: Value = serde_json::from_str(&prompt.to_json()).unwrap();
    let keys: BTreeSet<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
    let expected = BTreeSet::from([
        "metrics",
        "label_summary",
        "hierarchy_hd",
        "hierarchy_2d",
        "parameters",
    ]);
    ensure!(keys == expected, "prompt keys {keys:?}");

    let d = DiagnosticReport::from_json(SAMPLE_DIAGNOSTIC).map_err(|e| e.to_string())?;
    ensure!(d.quality_score == 6.0, "quality_score {}", d.quality_score);
    let r = d.recommendations.first().ok_or("no recommendations")?;
    ensure!(
        r.parameter == "tsne.perplexity" && r.current_value == "30.0" && r.suggested_value == "80",
        "first recommendation {r:?}"
    );
    for name in PRESET_NAMES {
        let sum = WeightVector::preset(name).unwrap().sum();
        ensure!(sum == 1.0, "{name} sums to {sum}");
    }
    Ok("prompt keys, sample diagnostic with placeholders, 3 presets".into())
}

fn report(t: f64, sil: f64, rho: f64, stress: f64, lof: f64) -> MetricsReport {
    MetricsReport {
        n: 100,
        spearman: rho,
        stress,
        mean_distance_ratio: 1.0,
        trustworthiness: KScore { k: 10, value: t },
        continuity: KScore { k: 10, value: t },
        silhouette: Some(sil),
        lof: LofSummary {
            k: 20,
            median: lof,
            threshold: 1.5,
            outlier_count: 0,
        },
        label_summary: vec![],
        centroids_2d: vec![],
        follow_up: vec![],
        subsample: None,
    }
}

fn composite_checks() -> Outcome {
    let perfect = report(1.0, 1.0, 1.0, 0.0, 1.0);
    for name in PRESET_NAMES {
        let s = explicit_composite_score(&perfect, &WeightVector::preset(name).unwrap());
        ensure!(s == 1.0, "{name}: perfect report scores {s}");
    }
    let w = WeightVector::preset("gemini-3-pro-preview").unwrap();
    let mixed = report(0.9, 0.2, 0.6, 0.4, 1.1);
    let hand = w.get(ScoredMetric::Trustworthiness) * 0.9
        + w.get(ScoredMetric::SilhouetteScore) * ((0.2 + 1.0) / 2.0)
        + w.get(ScoredMetric::SpearmanCorrelation) * ((0.6 + 1.0) / 2.0)
        + w.get(ScoredMetric::Stress1) * (1.0 - 0.4)
        + w.get(ScoredMetric::LofMedian) * (1.0 - 0.1);
    let got = explicit_composite_score(&mixed, &w);
    ensure!(close(got, hand, 1e-9), "mixed report {got} vs hand {hand}");

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for inst in 0..100 {
        let base = report(
            rng.random_range(0.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(0.0..1.5),
            rng.random_range(0.5..2.0),
        );
        let mut higher = base.clone();
        higher.trustworthiness.value = rng.random_range(base.trustworthiness.value..=1.0);
        let w = WeightVector::preset(PRESET_NAMES[inst % 3]).unwrap();
        let (a, b) = (
            explicit_composite_score(&base, &w),
            explicit_composite_score(&higher, &w),
        );
        ensure!(
            a <= b,
            "instance {inst}: raising T lowered the score {a} -> {b}"
        );
    }
    Ok(format!(
        "perfect = 1 under all presets, mixed = {got:.6}, 100 monotone pairs"
    ))
}

fn tsne_sanity() -> Outcome {
    let data = gaussian_blobs(3, 50, 10, 20.0, 42).unwrap();
    let params = TsneParams {
        perplexity: 10.0,
        seed: 42,
        ..Default::default()
    };
    let start = Instant::now();
    let (y, trace) = tsne(&data, &params).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let sil = silhouette(&y, data.labels().unwrap()).unwrap().unwrap();
    ensure!(
        trace.kl_final < trace.kl_after_exaggeration,
        "KL final {} >= after exaggeration {}",
        trace.kl_final,
        trace.kl_after_exaggeration
    );
    ensure!(sil > 0.5, "silhouette {sil}");
    ensure!(elapsed < Duration::from_secs(60), "took {elapsed:?}");
    Ok(format!(
        "KL {:.4} -> {:.4}, silhouette {sil:.4}, {:.1}s",
        trace.kl_after_exaggeration,
        trace.kl_final,
        elapsed.as_secs_f64()
    ))
}

fn closed_loop() -> Outcome {
    let data = gaussian_blobs(3, 100, 50, 20.0, 3).unwrap();
    let mut config = DrConfig::tsne(data.rows(), data.cols());
    config.set_param_str("perplexity", "5").unwrap();
    let options = PipelineOptions {
        mode: ScoreMode::Explicit,
        weights: WeightVector::preset("gpt-5.2").unwrap(),
        ..Default::default()
    };
    let mut agent = MockAgent::new(options.weights.clone());
    let start = Instant::now();
    let t = run_pipeline(&data, config, &mut agent, &options).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    ensure!(
        t.stop_reason != StopReason::Error,
        "run failed: {:?}",
        t.failure
    );
    ensure!(t.records.len() <= 10, "{} iterations", t.records.len());
    let first = t.records[0].composite;
    let best = t.best_record().unwrap();
    let path: Vec<String> = t
        .records
        .iter()
        .map(|r| {
            format!(
                "{}@{}",
                r.config.get("perplexity").unwrap(),
                (r.composite * 1e4).round() / 1e4
            )
        })
        .collect();
    ensure!(
        best.composite > first,
        "best {} does not exceed first {first}; path {} ({})",
        best.composite,
        path.join(" "),
        t.stop_reason
    );
    ensure!(elapsed < Duration::from_secs(300), "took {elapsed:?}");
    Ok(format!(
        "{} iterations ({}), composite {first:.4} -> best {:.4} at iteration {} (perplexity {}), {:.1}s",
        t.records.len(),
        t.stop_reason,
        best.composite,
        best.iteration,
        best.config.get("perplexity").unwrap(),
        elapsed.as_secs_f64()
    ))
}

fn replayability() -> Outcome {
    let data = gaussian_blobs(3, 20, 12, 10.0, 8).unwrap();
    let mut config = DrConfig::tsne(data.rows(), data.cols());
    config.set_param_str("perplexity", "5").unwrap();
    config.set_param_str("n_iter", "300").unwrap();
    let options = PipelineOptions {
        max_iterations: 3,
        mode: ScoreMode::Explicit,
        ..Default::default()
    };
    let mut agent = MockAgent::new(options.weights.clone());
    let t = run_pipeline(&data, config, &mut agent, &options).map_err(|e| e.to_string())?;
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let files = export_trajectory(&t, a.path()).map_err(|e| e.to_string())?;
    replay(&a.path().join("trajectory.json"), b.path()).map_err(|e| e.to_string())?;
    let mut compared = 0;
    for it in &files.iterations {
        let mut names = vec![&it.prompt, &it.scatter];
        names.extend(it.dendro_hd.iter().chain(&it.dendro_2d));
        for name in names {
            let (x, y) = (
                std::fs::read(a.path().join(name)).unwrap(),
                std::fs::read(b.path().join(name)).unwrap(),
            );
            ensure!(x == y, "{name} differs after replay");
            compared += 1;
        }
    }
    // prompts rebuilt from the dataset and the stored embeddings
    for r in &t.records {
        let eval = score_embedding(
            &data,
            &r.config,
            r.embedding.clone(),
            r.embedding_diagnostics.clone(),
            r.input_dimension.clone(),
            &t.metrics,
            options.kmeans_k,
        )
        .map_err(|e| e.to_string())?;
        let rebuilt = build_master_prompt(
            &eval.report,
            eval.hierarchy_hd
                .as_ref()
                .map(|h| HierarchyEntry::new(h, eval.input_dimension.clone())),
            eval.hierarchy_2d
                .as_ref()
                .map(|h| HierarchyEntry::new(h, "2D")),
            &r.config,
            r.iteration,
        );
        let stored =
            std::fs::read_to_string(a.path().join(format!("iter_{}_prompt.json", r.iteration)))
                .unwrap();
        ensure!(
            rebuilt.to_json() == stored,
            "iteration {} prompt not reproducible",
            r.iteration
        );
        ensure!(r.config.method == Method::Tsne, "unexpected method");
    }
    Ok(format!(
        "{compared} artifacts byte-identical, {} prompts rebuilt from data",
        t.records.len()
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("metric oracle suite", metric_oracles),
        ("identity-embedding invariants", identity_invariants),
        ("trustworthiness/continuity duality", duality),
        ("UPGMA", upgma_checks),
        ("schema fidelity", schema_fidelity),
        ("composite score", composite_checks),
        ("t-SNE sanity", tsne_sanity),
        ("closed loop offline", closed_loop),
        ("replayability", replayability),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS  {name:<36} {detail} [{secs:.2}s]"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name:<36} {why} [{secs:.2}s]");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 9 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
