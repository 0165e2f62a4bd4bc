use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use dynfuse::engine::{with_workers, ResultDocument, RunContext, StrategyRegistry};
use dynfuse::eval::{aliasing_histogram, frame_separation_sweep, recall_at_k, sweep_csv};
use dynfuse::ingest::{self, sidecar_path};
use dynfuse::synth::{self, SynthSpec};
use log::info;
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{CliError, CliResult};
use crate::manifest::{Overrides, RunManifest, TechniqueInput};

pub const DEFAULT_SWEEP: [usize; 5] = [1, 5, 10, 25, 50];

fn write(path: &Path, contents: impl AsRef<[u8]>) -> CliResult<()> {
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

fn to_pretty(v: &impl Serialize) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("output documents serialize");
    s.push('\n');
    s
}

fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

fn prepare(config: &Path, overrides: &Overrides) -> CliResult<RunManifest> {
    let mut m = RunManifest::load(config)?;
    m.apply(overrides);
    m.check()?;
    Ok(m)
}

pub fn run(config: &Path, overrides: &Overrides) -> CliResult<()> {
    let started = Instant::now();
    let m = prepare(config, overrides)?;
    let registry = StrategyRegistry::builtin();

    let mut strategies = Vec::new();
    for name in &m.strategies {
        if strategies.iter().any(|(n, _)| n == name) {
            continue;
        }
        let params = m.strategy_params.get(name).cloned().unwrap_or(Value::Null);
        strategies.push((name.clone(), registry.create(name, &params)?));
    }
    for key in m.strategy_params.keys() {
        if !registry.contains(key) {
            return Err(CliError::config(
                format!("strategy_params.{key}"),
                "no such strategy",
            ));
        }
    }

    let load_start = Instant::now();
    let (tensor, gt) = m.load_data()?;
    m.config.validate(tensor.n_techniques(), tensor.database_size())?;
    let load_ms = ms(load_start);
    info!(
        "loaded {} techniques, {} queries, database of {}",
        tensor.n_techniques(),
        tensor.queries(),
        tensor.database_size()
    );

    let out = m.out_dir();
    create_dir(out)?;
    let workers = m.workers();
    let ctx = RunContext::new(&tensor, &m.config)
        .with_ground_truth(&gt)
        .with_rank_depth(m.rank_depth());

    let mut recall_csv = String::from("strategy,K,recall\n");
    let mut summaries = Vec::new();
    for (name, strategy) in &strategies {
        let t0 = Instant::now();
        let result = with_workers(workers, || strategy.run(&ctx))??;
        let run_ms = ms(t0);
        let report = recall_at_k(&result, &gt, &m.recall_k)?;
        let hist = aliasing_histogram(&result, &gt, m.histogram_bins)?;
        info!("{name}: Recall@1 = {:?} ({run_ms:.1} ms)", report.recall(1));

        write(
            &out.join(format!("{name}.result.json")),
            ResultDocument::from(&result).to_json() + "\n",
        )?;
        write(&out.join(format!("{name}.recall.json")), to_pretty(&report))?;
        write(&out.join(format!("{name}.histogram.csv")), hist.to_csv())?;
        report.append_csv_rows(&mut recall_csv);

        summaries.push(json!({
            "strategy": name,
            "params": result.params,
            "valid_queries": report.valid_queries,
            "recall": report.recall_at,
            "mean_ratio_correct": hist.mean_ratio_correct,
            "mean_ratio_incorrect": hist.mean_ratio_incorrect,
            "wall_ms": run_ms,
        }));
    }
    write(&out.join("recall.csv"), recall_csv)?;

    let summary = json!({
        "manifest": m,
        "workers": workers,
        "techniques": tensor.names(),
        "queries": tensor.queries(),
        "database_size": tensor.database_size(),
        "strategies": summaries,
        "load_ms": load_ms,
        "total_ms": ms(started),
    });
    write(&out.join("summary.json"), to_pretty(&summary))?;
    println!("{}", out.display());
    Ok(())
}

pub fn sweep(config: &Path, overrides: &Overrides, f_values: Option<&[usize]>) -> CliResult<()> {
    let started = Instant::now();
    let m = prepare(config, overrides)?;
    let f_values = f_values.unwrap_or(&DEFAULT_SWEEP);
    if f_values.is_empty() {
        return Err(CliError::config("frame_sep", "no frame separation given"));
    }
    if let Some(f) = f_values.iter().find(|&&f| f == 0) {
        return Err(CliError::config(
            "frame_sep",
            format!("frame separation must be positive, got {f}"),
        ));
    }
    let (tensor, gt) = m.load_data()?;
    m.config.validate(tensor.n_techniques(), tensor.database_size())?;
    let out = m.out_dir();
    create_dir(out)?;
    let workers = m.workers();
    let points = with_workers(workers, || {
        frame_separation_sweep(&tensor, &gt, &m.config, f_values, &m.recall_k)
    })??;
    write(&out.join("sweep.csv"), sweep_csv(&points, &m.recall_k))?;
    write(&out.join("sweep.json"), to_pretty(&points))?;
    let summary = json!({
        "manifest": m,
        "workers": workers,
        "frame_separations": f_values,
        "total_ms": ms(started),
    });
    write(&out.join("summary.json"), to_pretty(&summary))?;
    println!("{}", out.display());
    Ok(())
}

pub fn synth(spec_path: &Path, out: &Path, seed: Option<u64>) -> CliResult<()> {
    let text = fs::read_to_string(spec_path).map_err(|e| CliError::io(spec_path, e))?;
    let mut spec: SynthSpec = serde_json::from_str(&text)
        .map_err(|e| CliError::config("spec", format!("{}: {e}", spec_path.display())))?;
    if let Some(s) = seed {
        spec.seed = s;
    }
    let (tensor, gt) = synth::generate(&spec)?;
    let paths = synth::write_dataset(out, &tensor, &gt)?;
    write(&out.join("spec.json"), to_pretty(&spec))?;

    let techniques = paths
        .iter()
        .map(|p| TechniqueInput {
            name: None,
            similarity: Some(PathBuf::from(p.file_name().expect("written file has a name"))),
            query: None,
            database: None,
            metric: Default::default(),
        })
        .collect();
    let manifest = RunManifest {
        techniques,
        ground_truth: Some("ground_truth.json".into()),
        config: dynfuse::FusionConfig {
            r_window: spec.r_window,
            ..Default::default()
        },
        strategies: vec!["dyn-mpf".into(), "full-mpf".into()],
        strategy_params: BTreeMap::new(),
        recall_k: vec![1, 5, 10],
        histogram_bins: 20,
        rank_depth: None,
        out: Some("results".into()),
        workers: None,
    };
    write(&out.join("manifest.json"), to_pretty(&manifest))?;
    println!("{}", out.display());
    Ok(())
}

/// Loads every payload/sidecar pair and reports its shape. Fails if any file does not load.
pub fn ingest_check(config: Option<&Path>, files: &[PathBuf]) -> CliResult<()> {
    let mut targets: Vec<PathBuf> = files.to_vec();
    if let Some(c) = config {
        let m = RunManifest::load(c)?;
        for t in &m.techniques {
            targets.extend(
                [&t.similarity, &t.query, &t.database]
                    .into_iter()
                    .flatten()
                    .filter(|p| p.extension().is_none_or(|e| e != "csv"))
                    .cloned(),
            );
        }
    }
    if targets.is_empty() {
        return Err(CliError::config("files", "nothing to check"));
    }
    let mut report = Vec::new();
    let mut first_error = None;
    for path in &targets {
        match ingest::load_matrix(path, None) {
            Ok(m) => report.push(json!({
                "path": path,
                "sidecar": sidecar_path(path),
                "ok": true,
                "rows": m.meta.rows,
                "cols": m.meta.cols,
                "role": m.meta.role,
                "technique": m.meta.technique,
            })),
            Err(e) => {
                let e = CliError::from(e);
                report.push(json!({ "path": path, "ok": false, "error": e.to_json()["error"] }));
                first_error.get_or_insert(e);
            }
        }
    }
    println!("{}", to_pretty(&report).trim_end());
    first_error.map_or(Ok(()), Err)
}
