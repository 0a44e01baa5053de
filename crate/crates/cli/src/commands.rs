use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use dear_core::data::{load_csv, named_schema, EncodingWarning, RawValue, SplitSpec};
use dear_core::eval::{run_benchmark, save_records_csv, BenchmarkConfig, BenchmarkReport, SyntheticSetup};
use dear_core::models::{CaeArchitecture, ClassifierArch, ClassifierFit, TrainConfig};
use dear_core::{FeatureSchema, ModelBundle};
use dear_service::views::{CandidatesRequest, FeatureRef, InstanceRef, RecourseBody, RecourseView};
use dear_service::{ApiSession, SessionConfig};
use serde::Serialize;
use serde_json::Value;

use crate::{resolve_data_path, BenchmarkArgs, CliError, RecourseArgs, ServeArgs, TrainArgs};

fn emit_json<T: Serialize>(value: &T) -> Result<(), CliError> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out).map_err(|e| CliError::Internal(e.to_string()))
}

fn load_bundle(path: &Path) -> Result<ModelBundle, CliError> {
    ModelBundle::load(path).map_err(|e| CliError::Usage(format!("cannot load bundle '{}': {e}", path.display())))
}

/// `seed=` goes first so an explicit key in the spec wins.
fn synthetic_setup(spec: &str, seed: u64) -> Result<SyntheticSetup, CliError> {
    Ok(SyntheticSetup::parse(&format!("seed={seed},{spec}"))?)
}

fn load_schema(path: &Path) -> Result<(FeatureSchema, Option<&'static str>), CliError> {
    let resolved = resolve_data_path(path);
    if !resolved.exists() {
        if let Some((schema, label)) = path.to_str().and_then(named_schema) {
            return Ok((schema, Some(label)));
        }
    }
    Ok((FeatureSchema::load(&resolved)?, None))
}

#[derive(Serialize)]
struct TrainSummary {
    bundle: PathBuf,
    classifier: ClassifierArch,
    train_rows: usize,
    test_rows: usize,
    encoded_columns: usize,
    train_accuracy: f64,
    test_accuracy: Option<f64>,
    final_loss: Option<f64>,
    cached_action_sets: Vec<Vec<usize>>,
    warnings: Vec<EncodingWarning>,
}

pub fn train(args: &TrainArgs, json: bool) -> Result<(), CliError> {
    let source = &args.source;
    let (bundle, fit, warnings): (ModelBundle, ClassifierFit, Vec<EncodingWarning>) =
        match (&source.data, &source.schema, &source.synthetic) {
            (Some(data), Some(schema), None) => {
                let (schema, builtin_label) = load_schema(schema)?;
                let label = source.label.as_deref().or(builtin_label).unwrap_or("label");
                let table = load_csv(resolve_data_path(data), &schema, label)?;
                let mut classifier_config = TrainConfig {
                    seed: args.seed,
                    ..TrainConfig::classifier()
                };
                if let Some(epochs) = args.epochs {
                    classifier_config.epochs = epochs;
                }
                let cae_config = TrainConfig {
                    seed: args.seed,
                    ..TrainConfig::default()
                };
                ModelBundle::from_table(
                    &table,
                    SplitSpec::new(args.train_fraction, args.seed)?,
                    args.model.unwrap_or_default(),
                    &classifier_config,
                    CaeArchitecture::adult(),
                    cae_config,
                )?
            }
            (None, None, Some(spec)) => {
                let mut setup = synthetic_setup(spec, args.seed)?;
                setup.train_fraction = args.train_fraction;
                if let Some(model) = args.model {
                    setup.classifier = model;
                }
                if let Some(epochs) = args.epochs {
                    setup.classifier_config.epochs = epochs;
                }
                let (bundle, fit) = setup.build()?;
                (bundle, fit, Vec::new())
            }
            _ => return Err(CliError::Usage("give either --data with --schema, or --synthetic".into())),
        };

    if let Some(spec) = &args.prewarm {
        let sets = parse_action_sets(&bundle, spec)?;
        if !json {
            eprintln!("training {} conditional autoencoder(s)", sets.len());
        }
        bundle.prewarm(&sets)?;
    }
    bundle.save(&args.out)?;

    let summary = TrainSummary {
        bundle: args.out.clone(),
        classifier: bundle.classifier_arch(),
        train_rows: bundle.train_set().len(),
        test_rows: bundle.test_set().len(),
        encoded_columns: bundle.encoder().width(),
        train_accuracy: fit.train_accuracy,
        test_accuracy: fit.test_accuracy,
        final_loss: fit.losses.last().copied(),
        cached_action_sets: bundle.cached_action_sets(),
        warnings,
    };
    if json {
        return emit_json(&summary);
    }
    for w in &summary.warnings {
        eprintln!("warning: {}: {}", w.column, w.message);
    }
    println!("wrote {}", summary.bundle.display());
    println!("classifier      {:?}", summary.classifier);
    println!("rows            {} train / {} test", summary.train_rows, summary.test_rows);
    println!("train accuracy  {:.4}", summary.train_accuracy);
    if let Some(acc) = summary.test_accuracy {
        println!("test accuracy   {acc:.4}");
    }
    if let Some(loss) = summary.final_loss {
        println!("final loss      {loss:.6}");
    }
    Ok(())
}

/// `a;b,c` -> [[cols of a], [cols of b and c]].
fn parse_action_sets(bundle: &ModelBundle, spec: &str) -> Result<Vec<Vec<usize>>, CliError> {
    let encoder = bundle.encoder();
    spec.split(';')
        .filter(|s| !s.trim().is_empty())
        .map(|set| {
            let mut columns = Vec::new();
            for name in set.split(',').map(str::trim) {
                let f = encoder
                    .schema()
                    .index_of(name)
                    .ok_or_else(|| CliError::Usage(format!("unknown feature '{name}'")))?;
                columns.extend(encoder.feature_columns(f));
            }
            columns.sort_unstable();
            columns.dedup();
            Ok(columns)
        })
        .collect()
}

fn instance_ref(args: &RecourseArgs) -> Result<InstanceRef, CliError> {
    let instance = match &args.features {
        Some(text) => Some(
            serde_json::from_str::<BTreeMap<String, Value>>(text)
                .map_err(|e| CliError::Usage(format!("--features must be a JSON object: {e}")))?,
        ),
        None => None,
    };
    Ok(InstanceRef {
        instance,
        row: args.row,
    })
}

pub fn recourse(args: &RecourseArgs, json: bool) -> Result<(), CliError> {
    let bundle = Arc::new(load_bundle(&args.bundle)?);
    let mut config = SessionConfig::default();
    if let Some(n) = args.max_iterations {
        config.request.max_iterations = n;
    }
    let session = ApiSession::new(bundle, config)?;
    let target = instance_ref(args)?;

    if args.candidates {
        let view = session.candidates(&CandidatesRequest {
            target,
            k: Some(args.k),
        })?;
        if json {
            return emit_json(&view);
        }
        println!("score {:.4} (target {:.4})", view.score, view.target);
        println!("{:<4} {:<24} {:>12} {:>10}", "rank", "feature", "attribution", "alignment");
        for (i, c) in view.candidates.iter().enumerate() {
            let alignment = c.alignment.map_or("-".to_string(), |a| format!("{a:.4}"));
            println!("{:<4} {:<24} {:>12.6} {:>10}", i + 1, c.name, c.attribution, alignment);
        }
        return Ok(());
    }

    let body = RecourseBody {
        target,
        s: args
            .s
            .as_ref()
            .map(|names| names.iter().map(|n| FeatureRef::Name(n.trim().to_string())).collect()),
        lambda: args.lambda,
        method: Some(args.method),
    };
    match session.recourse(&body) {
        Ok(view) => {
            if json {
                emit_json(&view)
            } else {
                print_recourse(&view);
                Ok(())
            }
        }
        Err(e) if e.code == "no_recourse" => {
            if json {
                emit_json(&e.detail)?;
            } else if let Ok(view) = serde_json::from_value::<RecourseView>(e.detail.clone()) {
                print_recourse(&view);
            }
            Err(e.into())
        }
        Err(e) => Err(e.into()),
    }
}

fn show(v: &RawValue) -> String {
    match v {
        RawValue::Number(x) => format!("{x:.4}"),
        RawValue::Level(l) => l.clone(),
    }
}

fn print_recourse(view: &RecourseView) {
    println!(
        "{}: {} after {} iterations, score {:.4} (target {:.4})",
        view.method,
        if view.success { "success" } else { "no counterfactual" },
        view.iterations,
        view.score,
        view.target
    );
    if !view.s.is_empty() {
        println!("action set S = {{{}}}", view.s.join(", "));
    }
    println!("{:<3} {:<24} {:>14} {:>14} {:>12}", "", "feature", "before", "after", "delta");
    for f in &view.features {
        if f.encoded_l1 == 0.0 && !f.in_s {
            continue;
        }
        let delta = f.raw_delta.map_or(String::new(), |d| format!("{d:+.4}"));
        let mark = if f.in_s { "S" } else { "" };
        println!("{:<3} {:<24} {:>14} {:>14} {:>12}", mark, f.name, show(&f.before), show(&f.after), delta);
    }
    let c = &view.cost;
    match (c.direct_l1, c.indirect_l1) {
        (Some(d), Some(i)) => println!("cost l1 {:.4} = direct {d:.4} + indirect {i:.4}", c.total_l1),
        _ => println!("cost l1 {:.4}", c.total_l1),
    }
    for v in &view.violations {
        println!("violation: {v:?}");
    }
}

#[derive(Serialize)]
struct BenchmarkOutput<'a> {
    report_path: &'a Path,
    csv_path: &'a Path,
    report: &'a BenchmarkReport,
}

pub fn benchmark(args: &BenchmarkArgs, json: bool) -> Result<(), CliError> {
    let bundle = match (&args.bundle, &args.synthetic) {
        (Some(path), None) => load_bundle(path)?,
        (None, Some(spec)) => {
            if !json {
                eprintln!("building synthetic bundle ({spec})");
            }
            synthetic_setup(spec, args.seed)?.build()?.0
        }
        _ => return Err(CliError::Usage("give either --bundle or --synthetic".into())),
    };
    let config = BenchmarkConfig {
        methods: args.methods.0.clone(),
        seeds: args.seeds.clone().unwrap_or_else(|| vec![args.seed]),
        limit: args.limit,
        jobs: args.jobs,
        ..BenchmarkConfig::default()
    };
    config.validate()?;
    let run = run_benchmark(&bundle, &config)?;
    let csv_path = args.csv.clone().unwrap_or_else(|| args.out.with_extension("csv"));
    run.report.save(&args.out)?;
    save_records_csv(&csv_path, &run.records)?;

    if json {
        return emit_json(&BenchmarkOutput {
            report_path: &args.out,
            csv_path: &csv_path,
            report: &run.report,
        });
    }
    println!(
        "{} instances, seeds {:?}; report {}, records {}",
        run.report.instances.len(),
        config.seeds,
        args.out.display(),
        csv_path.display()
    );
    println!(
        "{:<8} {:>6} {:>9} {:>9} {:>9} {:>8} {:>7}",
        "method", "SR", "q1", "median", "q3", "CV", "YNN"
    );
    for s in &run.report.pooled {
        let (q1, med, q3) = s
            .cost
            .map_or(("-".into(), "-".into(), "-".into()), |q| {
                (format!("{:.4}", q.q1), format!("{:.4}", q.median), format!("{:.4}", q.q3))
            });
        let ynn = s.mean_ynn.map_or("-".into(), |y| format!("{y:.3}"));
        println!(
            "{:<8} {:>6.3} {:>9} {:>9} {:>9} {:>8.3} {:>7}",
            s.method.name(),
            s.sr,
            q1,
            med,
            q3,
            s.mean_cv,
            ynn
        );
    }
    Ok(())
}

pub fn serve(args: &ServeArgs, json: bool) -> Result<(), CliError> {
    let bundle = Arc::new(load_bundle(&args.bundle)?);
    let config = SessionConfig {
        allowed_origin: args.origin.clone(),
        ..SessionConfig::default()
    };
    let session = Arc::new(ApiSession::new(bundle, config)?);
    let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::Environment(e.to_string()))?;
    runtime.block_on(async {
        let addr = format!("{}:{}", args.host, args.port);
        let listener = tokio::net::TcpListener::bind(&addr)
            .await
            .map_err(|e| CliError::Environment(format!("cannot bind {addr}: {e}")))?;
        let local = listener.local_addr().map_err(|e| CliError::Environment(e.to_string()))?;
        if json {
            emit_json(&serde_json::json!({ "address": local.to_string() }))?;
        } else {
            println!("listening on http://{local}");
        }
        std::io::stdout().flush().ok();
        dear_service::serve(listener, session)
            .await
            .map_err(|e| CliError::Environment(e.to_string()))
    })
}
