use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use jampred::datagen::{generate_alerts, generate_jams, GenConfig};
use jampred::eval::{self, BenchOptions, EvalReport};
use jampred::ingest::{
    read_matrix, read_matrix_header, write_matrix, CleanConfig, FeatureMatrix, FeatureSchema, JamIngestor, MatrixHeader,
};
use jampred::trees::{train, Ensemble, ModelKind, TrainConfig};
use jampred::Scalar;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::args::{BenchArgs, DtypeArg, EvaluateArgs, GenerateArgs, IngestArgs, SplitFlags, TrainArgs, TrainFlags};
use crate::error::{CliError, CliResult};
use crate::manifest::{sidecar_path, RunManifest};

fn read_json_file<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let file = File::open(path).map_err(CliError::io(path))?;
    serde_json::from_reader(BufReader::new(file)).map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    fs::write(path, bytes).map_err(CliError::io(path))
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    Ok(BufWriter::with_capacity(
        1 << 20,
        File::create(path).map_err(CliError::io(path))?,
    ))
}

/// Writes to stdout; a closed pipe (e.g. `| head`) is not an error.
fn emit(text: &str) -> CliResult<()> {
    match std::io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(CliError::Io {
            path: PathBuf::from("<stdout>"),
            source: e,
        }),
        _ => Ok(()),
    }
}

fn print_json<T: Serialize>(value: &T) -> CliResult<()> {
    emit(&(serde_json::to_string_pretty(value)? + "\n"))
}

pub fn generate(args: &GenerateArgs) -> CliResult<()> {
    let mut config: GenConfig = match &args.config {
        Some(p) => read_json_file(p)?,
        None => GenConfig::default(),
    };
    if let Some(v) = args.jams {
        config.n_jams = v;
    }
    if let Some(v) = args.alerts {
        config.n_alerts = v;
    }
    if let Some(v) = args.seed {
        config.seed = v;
    }
    if let Some(v) = args.noise {
        config.coupling_noise = v;
    }
    if let Some(v) = args.start_ms {
        config.date_window.0 = v;
    }
    if let Some(v) = args.end_ms {
        config.date_window.1 = v;
    }
    config.validate()?;
    if args.shards == 0 {
        return Err(CliError::Invalid("--shards must be at least 1".into()));
    }
    fs::create_dir_all(&args.out).map_err(CliError::io(&args.out))?;

    let start = Instant::now();
    let mut artifacts = Vec::new();
    for shard in 0..args.shards {
        // spread the totals, the first shards taking the remainders
        let share = |total: u64| total / args.shards + u64::from(shard < total % args.shards);
        let shard_config = GenConfig {
            n_jams: share(config.n_jams),
            n_alerts: share(config.n_alerts),
            ..if args.shards == 1 {
                config.clone()
            } else {
                config.shard(shard)
            }
        };
        let name = |kind: &str| {
            if args.shards == 1 {
                format!("{kind}.jsonl")
            } else {
                format!("{kind}-{shard:05}.jsonl")
            }
        };
        let jams = args.out.join(name("jams"));
        let mut out = create(&jams)?;
        generate_jams(&shard_config, &mut out)?;
        out.flush().map_err(CliError::io(&jams))?;
        let alerts = args.out.join(name("alerts"));
        let mut out = create(&alerts)?;
        generate_alerts(&shard_config, &mut out)?;
        out.flush().map_err(CliError::io(&alerts))?;
        artifacts.push(jams);
        artifacts.push(alerts);
    }
    let mut manifest = RunManifest::new("generate", &config, Some(config.seed), None)?;
    manifest.time("generate_seconds", start.elapsed().as_secs_f64());
    manifest.write(&artifacts)?;
    let listing: String = artifacts.iter().map(|a| format!("{}\n", a.display())).collect();
    emit(&listing)
}

/// Expands the `--input` patterns into a sorted, de-duplicated file list.
fn expand_inputs(patterns: &[String]) -> CliResult<Vec<PathBuf>> {
    let mut files = Vec::new();
    for pattern in patterns {
        let paths =
            glob::glob(pattern).map_err(|e| CliError::Invalid(format!("bad input pattern {pattern:?}: {e}")))?;
        for entry in paths {
            let path = entry.map_err(|e| CliError::Io {
                path: e.path().to_path_buf(),
                source: e.into(),
            })?;
            if path.is_file() {
                files.push(path);
            }
        }
    }
    files.sort();
    files.dedup();
    if files.is_empty() {
        return Err(CliError::NoInput(format!(
            "no input files match {}",
            patterns.join(" ")
        )));
    }
    Ok(files)
}

fn ingest_typed<F: Scalar>(args: &IngestArgs, files: &[PathBuf], manifest: &mut RunManifest) -> CliResult<()> {
    let schema = FeatureSchema::named(args.feature_set.into())?;
    let existing = match &args.encoding_from {
        Some(p) => {
            let mut file = BufReader::new(File::open(p).map_err(CliError::io(p))?);
            Some(read_matrix_header(&mut file)?.encoding)
        }
        None => None,
    };
    let clean = CleanConfig {
        window: match (args.window_start_ms, args.window_end_ms) {
            (None, None) => None,
            (start, end) => Some((start.unwrap_or(i64::MIN), end.unwrap_or(i64::MAX))),
        },
    };
    let start = Instant::now();
    let mut ingestor = JamIngestor::<F>::new(schema, clean, existing)?;
    for path in files {
        let file = File::open(path).map_err(CliError::io(path))?;
        ingestor.ingest(BufReader::with_capacity(1 << 20, file))?;
    }
    let (matrix, encoding, report) = ingestor.finish()?;
    manifest.time("ingest_seconds", start.elapsed().as_secs_f64());
    let mut out = create(&args.out)?;
    write_matrix(&mut out, &matrix, &encoding, Some(&report))?;
    out.flush().map_err(CliError::io(&args.out))?;
    print_json(&report)
}

pub fn ingest(args: &IngestArgs) -> CliResult<()> {
    let files = expand_inputs(&args.input)?;
    let config = serde_json::json!({
        "feature_set": FeatureSchema::named(args.feature_set.into())?.feature_set,
        "dtype": match args.dtype { DtypeArg::F32 => "f32", DtypeArg::F64 => "f64" },
        "window_start_ms": args.window_start_ms,
        "window_end_ms": args.window_end_ms,
        "encoding_from": args.encoding_from,
    });
    let mut manifest = RunManifest::new("ingest", &config, None, None)?;
    manifest.add_inputs(files.iter().map(PathBuf::as_path))?;
    match args.dtype {
        DtypeArg::F32 => ingest_typed::<f32>(args, &files, &mut manifest)?,
        DtypeArg::F64 => ingest_typed::<f64>(args, &files, &mut manifest)?,
    }
    manifest.write(std::slice::from_ref(&args.out))
}

fn matrix_dtype(path: &Path) -> CliResult<String> {
    let mut file = BufReader::new(File::open(path).map_err(CliError::io(path))?);
    Ok(read_matrix_header(&mut file)?.dtype)
}

fn load_matrix<F: Scalar>(path: &Path) -> CliResult<(FeatureMatrix<F>, MatrixHeader)> {
    let file = File::open(path).map_err(CliError::io(path))?;
    Ok(read_matrix(BufReader::with_capacity(1 << 20, file))?)
}

/// Runs `$body` with `$F` bound to the element type stored in `$path`.
macro_rules! with_dtype {
    ($path:expr, |$F:ident| $body:expr) => {
        match matrix_dtype($path)?.as_str() {
            "f32" => {
                type $F = f32;
                $body
            }
            "f64" => {
                type $F = f64;
                $body
            }
            other => Err(CliError::Invalid(format!("unsupported matrix dtype {other:?}"))),
        }
    };
}

fn resolve_config(kind: ModelKind, flags: &TrainFlags) -> CliResult<TrainConfig> {
    let base = match &flags.config {
        Some(p) => read_json_file(p)?,
        None => TrainConfig::for_kind(kind),
    };
    let config = flags.apply(base);
    config.validate()?;
    Ok(config)
}

/// The training rows (or test rows) of `matrix` under `split`.
fn split_part<F: Scalar>(
    matrix: FeatureMatrix<F>,
    split: &SplitFlags,
    seed: u64,
    want_train: bool,
) -> CliResult<FeatureMatrix<F>> {
    if split.no_split {
        return Ok(matrix);
    }
    let (train_rows, test_rows) = eval::split_indices(matrix.n_rows, split.train_fraction, seed)?;
    Ok(matrix.select_rows(if want_train { &train_rows } else { &test_rows }))
}

fn train_typed<F: Scalar>(args: &TrainArgs, config: &TrainConfig, manifest: &mut RunManifest) -> CliResult<()> {
    let (matrix, _) = load_matrix::<F>(&args.matrix)?;
    let train_set = split_part(matrix, &args.split, config.seed, true)?;
    let start = Instant::now();
    let model = train(args.model.into(), &train_set, config)?;
    manifest.time("train_seconds", start.elapsed().as_secs_f64());
    write_file(&args.out, &model.to_json()?)?;
    eprintln!(
        "trained {} ({} trees) on {} rows",
        model.kind,
        model.trees.len(),
        train_set.n_rows
    );
    Ok(())
}

pub fn train_cmd(args: &TrainArgs) -> CliResult<()> {
    let kind: ModelKind = args.model.into();
    let config = resolve_config(kind, &args.params)?;
    let echo = serde_json::json!({
        "model": kind,
        "train": config,
        "train_fraction": (!args.split.no_split).then_some(args.split.train_fraction),
    });
    let mut manifest = RunManifest::new("train", &echo, Some(config.seed), Some(config.n_workers))?;
    manifest.add_inputs([args.matrix.as_path()])?;
    with_dtype!(&args.matrix, |F| train_typed::<F>(args, &config, &mut manifest))?;
    manifest.write(std::slice::from_ref(&args.out))
}

fn evaluate_typed<F: Scalar>(args: &EvaluateArgs) -> CliResult<EvalReport> {
    let file = File::open(&args.model).map_err(CliError::io(&args.model))?;
    let model = Ensemble::<F>::read_json(BufReader::new(file))?;
    let (matrix, header) = load_matrix::<F>(&args.matrix)?;
    let n_rows = matrix.n_rows;
    let seed = args.seed.unwrap_or(model.config.seed);
    let test = split_part(matrix, &args.split, seed, false)?;
    let (metrics, predict_seconds) = eval::evaluate(&model, &test, args.threshold)?;
    // training time and workers come from the model's manifest when present
    let trained = RunManifest::read(&sidecar_path(&args.model)).ok();
    Ok(EvalReport {
        model: model.kind,
        feature_set: header.schema.feature_set,
        dtype: F::DTYPE.to_string(),
        n_train: if args.split.no_split { 0 } else { n_rows - test.n_rows },
        n_test: test.n_rows,
        metrics,
        train_seconds: trained
            .as_ref()
            .and_then(|m| m.timings.get("train_seconds").copied())
            .unwrap_or(0.0),
        predict_seconds,
        n_workers: trained.as_ref().and_then(|m| m.n_workers).unwrap_or(1),
        config: model.config.clone(),
    })
}

pub fn evaluate(args: &EvaluateArgs) -> CliResult<()> {
    let report = with_dtype!(&args.matrix, |F| evaluate_typed::<F>(args))?;
    print_json(&report)?;
    if let Some(out) = &args.out {
        let mut json = serde_json::to_vec_pretty(&report)?;
        json.push(b'\n');
        write_file(out, &json)?;
        let echo = serde_json::json!({
            "threshold": args.threshold,
            "train_fraction": (!args.split.no_split).then_some(args.split.train_fraction),
        });
        let mut manifest = RunManifest::new("evaluate", &echo, Some(report.config.seed), Some(report.n_workers))?;
        manifest.add_inputs([args.model.as_path(), args.matrix.as_path()])?;
        manifest.time("predict_seconds", report.predict_seconds);
        manifest.write(std::slice::from_ref(out))?;
    }
    Ok(())
}

fn bench_typed<F: Scalar>(
    args: &BenchArgs,
    configs: &[(ModelKind, TrainConfig)],
    options: &BenchOptions,
) -> CliResult<Vec<eval::BenchEntry>> {
    let (mut matrix, _) = load_matrix::<F>(&args.matrix)?;
    if let Some(set) = args.feature_set {
        matrix = matrix.project(&FeatureSchema::named(set.into())?)?;
    }
    Ok(eval::bench(&matrix, configs, options)?)
}

pub fn bench(args: &BenchArgs) -> CliResult<()> {
    let configs = args
        .models
        .iter()
        .map(|&m| {
            let kind: ModelKind = m.into();
            Ok((kind, resolve_config(kind, &args.params)?))
        })
        .collect::<CliResult<Vec<_>>>()?;
    let seed = configs.first().map_or(TrainConfig::default().seed, |c| c.1.seed);
    let n_workers = configs.first().map_or(1, |c| c.1.n_workers);
    let options = BenchOptions {
        train_fraction: args.train_fraction,
        split_seed: seed,
        threshold: args.threshold,
    };
    let entries = with_dtype!(&args.matrix, |F| bench_typed::<F>(args, &configs, &options))?;
    let table = eval::render_table(&entries);
    emit(&table)?;
    for e in &entries {
        if let Some(err) = &e.error {
            eprintln!("{} failed: {err}", e.model);
        }
    }
    if let Some(dir) = &args.out_dir {
        fs::create_dir_all(dir).map_err(CliError::io(dir))?;
        let (json_path, csv_path, txt_path) = (dir.join("bench.json"), dir.join("bench.csv"), dir.join("bench.txt"));
        let mut json = serde_json::to_vec_pretty(&entries)?;
        json.push(b'\n');
        write_file(&json_path, &json)?;
        write_file(&csv_path, eval::render_csv(&entries).as_bytes())?;
        write_file(&txt_path, table.as_bytes())?;
        let echo = serde_json::json!({
            "configs": configs,
            "options": options,
            "feature_set": args.feature_set.map(|f| format!("{f:?}").to_lowercase()),
        });
        let mut manifest = RunManifest::new("bench", &echo, Some(seed), Some(n_workers))?;
        manifest.add_inputs([args.matrix.as_path()])?;
        for e in entries.iter().filter_map(|e| e.report.as_ref()) {
            manifest.time(&format!("{}_train_seconds", e.model), e.train_seconds);
        }
        manifest.write(&[json_path, csv_path, txt_path])?;
    }
    if entries.iter().any(|e| e.error.is_some()) {
        return Err(CliError::Invalid("one or more models failed".into()));
    }
    Ok(())
}
