//! Command-line interface for the smile genuineness pipeline.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use auda::data::{
    load_dataset_dir, synth_generate, write_au_csv, write_deep_csv, write_feature_cache,
    assign_subject_folds, FeatureRecord,
};
use auda::error::{Error, Result};
use auda::eval::{
    attach_timings, bench_timing, cache_file_name, kfold_evaluate, train_head_for,
    train_model_for, FeatureStore, FoldModels, Method,
};
use auda::features::FeatureFamily;
use auda::model::{
    fuse_forward, load_model, save_fusion_head, save_model, LoadedModel, SequenceModel,
};
use auda::util::derive_seed;
use auda::RunConfig;

#[derive(Parser)]
#[command(
    name = "auda",
    about = "Smile genuineness assessment from facial action-unit dynamics",
    version
)]
struct Cli {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for every randomized stage.
    #[arg(long, global = true, default_value_t = 7)]
    seed: u64,
    /// Output directory for generated artifacts.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic labeled dataset of smile sequences.
    Synth {
        /// Sequences per class.
        #[arg(long)]
        n: Option<usize>,
        /// Noise level override.
        #[arg(long)]
        noise: Option<f64>,
    },
    /// Extract feature families from a directory of sequence CSVs into a
    /// feature cache.
    Extract {
        #[arg(long)]
        data: PathBuf,
    },
    /// Train one model from a feature cache.
    Train {
        /// Feature cache directory (from `extract`).
        #[arg(long)]
        features: PathBuf,
        /// Model to train: deep_frame, auda_frame, au_wise, or cross_au.
        #[arg(long)]
        method: String,
        /// Hold out this fold from training.
        #[arg(long)]
        exclude_fold: Option<usize>,
    },
    /// Evaluate a saved model on one fold of a feature cache.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        fold: usize,
        /// Contributing model files (fusion heads only), fusion order.
        #[arg(long, value_delimiter = ',')]
        base_models: Vec<PathBuf>,
    },
    /// Full k-fold cross-validation over raw sequence CSVs.
    Crossval {
        #[arg(long)]
        data: PathBuf,
        /// Comma-separated method list; defaults to the config.
        #[arg(long, value_delimiter = ',')]
        methods: Vec<String>,
        /// Timing repetitions for the report (0 skips timing).
        #[arg(long, default_value_t = 21)]
        bench_reps: usize,
    },
    /// Train a late-fusion head over saved contributing models.
    Fuse {
        /// Contributing model files in fusion order
        /// (deep_frame, auda_frame, au_wise, cross_au; absent kinds skipped).
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        models: Vec<PathBuf>,
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        exclude_fold: Option<usize>,
    },
    /// Measure per-sequence processing time per method.
    Bench {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_delimiter = ',')]
        methods: Vec<String>,
        #[arg(long, default_value_t = 21)]
        reps: usize,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = u8::from(e.use_stderr());
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    std::fs::create_dir_all(&cli.out).map_err(|e| Error::io(&cli.out, e))?;
    match &cli.command {
        Command::Synth { n, noise } => cmd_synth(&cfg, &cli, *n, *noise),
        Command::Extract { data } => cmd_extract(&cfg, &cli, data),
        Command::Train {
            features,
            method,
            exclude_fold,
        } => cmd_train(&cfg, &cli, features, method, *exclude_fold),
        Command::Evaluate {
            model,
            features,
            fold,
            base_models,
        } => cmd_evaluate(&cfg, &cli, model, features, *fold, base_models),
        Command::Crossval {
            data,
            methods,
            bench_reps,
        } => cmd_crossval(&cfg, &cli, data, methods, *bench_reps),
        Command::Fuse {
            models,
            features,
            exclude_fold,
        } => cmd_fuse(&cfg, &cli, models, features, *exclude_fold),
        Command::Bench {
            data,
            methods,
            reps,
        } => cmd_bench(&cfg, &cli, data, methods, *reps),
    }
}

fn cmd_synth(cfg: &RunConfig, cli: &Cli, n: Option<usize>, noise: Option<f64>) -> Result<()> {
    let mut synth = cfg.synth.clone();
    if let Some(n) = n {
        synth.sequences_per_class = n;
    }
    if let Some(noise) = noise {
        synth.noise = noise;
    }
    let dataset = synth_generate(&synth, cli.seed)?;
    for s in &dataset.sequences {
        let path = cli.out.join(format!("{}.csv", s.signals.id()));
        write_au_csv(&path, &s.signals, &cfg.csv)?;
        if let Some(deep) = &s.deep {
            let deep_path = cli.out.join(format!("{}.deep.csv", s.signals.id()));
            write_deep_csv(&deep_path, deep)?;
        }
    }
    let (posed, spontaneous, _) = dataset.class_counts();
    println!(
        "wrote {} sequences ({posed} posed, {spontaneous} spontaneous) to {}",
        dataset.len(),
        cli.out.display()
    );
    Ok(())
}

fn cmd_extract(cfg: &RunConfig, cli: &Cli, data: &Path) -> Result<()> {
    let dataset = load_dataset_dir(data, &cfg.csv)?;
    let methods = if dataset.has_deep() {
        vec![Method::FusionAll]
    } else {
        vec![Method::FusionAuda]
    };
    let store = FeatureStore::extract(&dataset, cfg, &methods)?;

    let mut written = Vec::new();
    let make_records = |frames: &dyn Fn(usize) -> (usize, Vec<f64>)| -> Vec<FeatureRecord> {
        (0..store.len())
            .map(|i| {
                let (n, values) = frames(i);
                FeatureRecord {
                    sequence_id: store.ids[i].clone(),
                    subject: store.subjects[i].clone(),
                    label: store.labels[i],
                    frames: n,
                    values,
                }
            })
            .collect()
    };

    if let Some(frame) = &store.frame {
        let path = cli.out.join(cache_file_name(FeatureFamily::FrameWise));
        let records = make_records(&|i| (frame[i].frames(), frame[i].values().to_vec()));
        write_feature_cache(&path, frame[0].catalog(), &records)?;
        written.push(path);
    }
    if let Some(au) = &store.au {
        let path = cli.out.join(cache_file_name(FeatureFamily::AuWise));
        let records = make_records(&|i| (1, au[i].values().to_vec()));
        write_feature_cache(&path, au[0].catalog(), &records)?;
        written.push(path);
    }
    if let Some(cross) = &store.cross {
        let path = cli.out.join(cache_file_name(FeatureFamily::CrossAu));
        let records = make_records(&|i| (1, cross[i].values().to_vec()));
        write_feature_cache(&path, cross[0].catalog(), &records)?;
        written.push(path);
    }
    if let Some(deep) = &store.deep {
        let path = cli.out.join(cache_file_name(FeatureFamily::Deep));
        let records = make_records(&|i| (deep[i].frames(), deep[i].values().to_vec()));
        write_feature_cache(&path, deep[0].catalog(), &records)?;
        written.push(path);
    }
    println!("cached features for {} sequences:", store.len());
    for path in written {
        println!("  {}", path.display());
    }
    Ok(())
}

fn train_indices(
    store: &FeatureStore,
    folds_k: usize,
    seed: u64,
    exclude_fold: Option<usize>,
) -> Result<Vec<usize>> {
    match exclude_fold {
        None => Ok((0..store.len()).collect()),
        Some(fold) => {
            let assignment = assign_subject_folds(&store.fold_keys(), folds_k, seed)?;
            if fold == 0 || fold > folds_k {
                return Err(Error::InvalidArgument(format!(
                    "fold {fold} out of range 1..={folds_k}"
                )));
            }
            Ok((0..store.len())
                .filter(|i| assignment.fold_of(&store.ids[*i]) != Some(fold))
                .collect())
        }
    }
}

fn cmd_train(
    cfg: &RunConfig,
    cli: &Cli,
    features: &Path,
    method: &str,
    exclude_fold: Option<usize>,
) -> Result<()> {
    let method = Method::from_name(method)?;
    let kinds = method.required_kinds();
    if method.is_fusion() || kinds.len() != 1 {
        return Err(Error::InvalidArgument(format!(
            "`train` handles single-stream methods; use `fuse` for {}",
            method.name()
        )));
    }
    let kind = kinds[0];
    let store = FeatureStore::from_cache_dir(features)?;
    let idx = train_indices(&store, cfg.eval.folds, cli.seed, exclude_fold)?;
    if idx.is_empty() {
        return Err(Error::InvalidArgument("no training sequences left".into()));
    }
    let seed = derive_seed(cli.seed, kind.name(), exclude_fold.unwrap_or(0) as u64);
    let (mut model, history) = train_model_for(&store, kind, &idx, cfg, seed)?;
    model.meta.fold = exclude_fold;
    let path = cli.out.join(format!("model_{}.json", method.name()));
    save_model(&model, &path)?;
    println!(
        "trained {} on {} sequences ({} epochs), final loss {:.4}, accuracy {:.1}%",
        method.name(),
        idx.len(),
        history.epochs.len(),
        history.final_loss().unwrap_or(f64::NAN),
        history.final_accuracy().unwrap_or(f64::NAN),
    );
    println!("model: {} (params {:016x})", path.display(), model.param_hash());
    Ok(())
}

fn cmd_evaluate(
    cfg: &RunConfig,
    cli: &Cli,
    model_path: &Path,
    features: &Path,
    fold: usize,
    base_models: &[PathBuf],
) -> Result<()> {
    let store = FeatureStore::from_cache_dir(features)?;
    let assignment = assign_subject_folds(&store.fold_keys(), cfg.eval.folds, cli.seed)?;
    let test_idx: Vec<usize> = (0..store.len())
        .filter(|i| assignment.fold_of(&store.ids[*i]) == Some(fold))
        .collect();
    if test_idx.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "fold {fold} holds no sequences"
        )));
    }

    let decisions: Vec<bool> = match load_model(model_path)? {
        LoadedModel::Sequence(model) => test_idx
            .iter()
            .map(|&i| Ok(model.forward(&store.input(model.kind, i)?)?.1.decision))
            .collect::<Result<_>>()?,
        LoadedModel::Fusion(head) => {
            let mut loaded: Vec<SequenceModel> = Vec::new();
            for path in base_models {
                match load_model(path)? {
                    LoadedModel::Sequence(m) => loaded.push(m),
                    LoadedModel::Fusion(_) => {
                        return Err(Error::InvalidArgument(format!(
                            "{}: base models must be sequence models",
                            path.display()
                        )))
                    }
                }
            }
            loaded.sort_by_key(|m| m.kind.fusion_rank());
            let refs: Vec<&SequenceModel> = loaded.iter().collect();
            test_idx
                .iter()
                .map(|&i| {
                    let inputs = refs
                        .iter()
                        .map(|m| store.input(m.kind, i))
                        .collect::<Result<Vec<_>>>()?;
                    Ok(fuse_forward(&head, &refs, &inputs)?.decision)
                })
                .collect::<Result<_>>()?
        }
    };
    let labels: Vec<auda::data::Label> = test_idx.iter().map(|&i| store.labels[i]).collect();
    let acc = auda::eval::accuracy_percent(&decisions, &labels);
    println!(
        "fold {fold}: accuracy {acc:.2}% over {} sequences",
        test_idx.len()
    );
    Ok(())
}

fn cmd_crossval(
    cfg: &RunConfig,
    cli: &Cli,
    data: &Path,
    methods: &[String],
    bench_reps: usize,
) -> Result<()> {
    let dataset = load_dataset_dir(data, &cfg.csv)?;
    let methods: Vec<Method> = if methods.is_empty() {
        cfg.eval.parsed_methods()?
    } else {
        methods
            .iter()
            .map(|m| Method::from_name(m))
            .collect::<Result<_>>()?
    };
    let mut report = kfold_evaluate(&dataset, &methods, cfg, cli.seed)?;
    if bench_reps > 0 {
        // timing on a small slice keeps the report cheap
        let sample = auda::data::Dataset {
            sequences: dataset
                .sequences
                .iter()
                .take(16)
                .cloned()
                .collect(),
        };
        let timings = bench_timing(&sample, cfg, &methods, bench_reps)?;
        attach_timings(&mut report, &timings);
    }
    let (csv_path, txt_path) = report.write_files(&cli.out)?;
    print!("{}", report.table());
    println!("\nreports: {} {}", csv_path.display(), txt_path.display());
    Ok(())
}

fn cmd_fuse(
    cfg: &RunConfig,
    cli: &Cli,
    model_paths: &[PathBuf],
    features: &Path,
    exclude_fold: Option<usize>,
) -> Result<()> {
    let mut models: Vec<SequenceModel> = Vec::new();
    for path in model_paths {
        match load_model(path)? {
            LoadedModel::Sequence(m) => models.push(m),
            LoadedModel::Fusion(_) => {
                return Err(Error::InvalidArgument(format!(
                    "{}: fusion inputs must be sequence models",
                    path.display()
                )))
            }
        }
    }
    models.sort_by_key(|m| m.kind.fusion_rank());
    let kinds: Vec<auda::model::ModelKind> = models.iter().map(|m| m.kind).collect();
    let method = match kinds.len() {
        4 => Method::FusionAll,
        3 if !kinds.contains(&auda::model::ModelKind::DeepFrame) => Method::FusionAuda,
        _ => {
            return Err(Error::InvalidArgument(format!(
                "unsupported fusion set: {:?}",
                kinds.iter().map(|k| k.name()).collect::<Vec<_>>()
            )))
        }
    };

    let store = FeatureStore::from_cache_dir(features)?;
    let idx = train_indices(&store, cfg.eval.folds, cli.seed, exclude_fold)?;
    let mut fold_models = FoldModels {
        fold: exclude_fold.unwrap_or(0),
        models: Default::default(),
        histories: Default::default(),
    };
    for m in models {
        fold_models.models.insert(m.kind, m);
    }
    let hashes: Vec<u64> = fold_models.models.values().map(|m| m.param_hash()).collect();
    let head = train_head_for(method, &fold_models, &store, &idx, cfg, cli.seed)?;
    let after: Vec<u64> = fold_models.models.values().map(|m| m.param_hash()).collect();
    assert_eq!(hashes, after, "contributing models must stay frozen");

    let path = cli.out.join(format!("model_{}.json", method.name()));
    save_fusion_head(&head, &path)?;
    println!(
        "trained {} head over {} sequences; model: {} (params {:016x})",
        method.name(),
        idx.len(),
        path.display(),
        head.param_hash()
    );
    Ok(())
}

fn cmd_bench(
    cfg: &RunConfig,
    cli: &Cli,
    data: &Path,
    methods: &[String],
    reps: usize,
) -> Result<()> {
    let dataset = load_dataset_dir(data, &cfg.csv)?;
    let methods: Vec<Method> = if methods.is_empty() {
        cfg.eval.parsed_methods()?
    } else {
        methods
            .iter()
            .map(|m| Method::from_name(m))
            .collect::<Result<_>>()?
    };
    let report = bench_timing(&dataset, cfg, &methods, reps)?;
    let mut csv = String::from("method,ms_per_sequence\n");
    println!(
        "per-sequence processing time, median of {} repetitions over {} sequences:",
        report.repetitions,
        dataset.len()
    );
    for (method, ms) in &report.entries {
        println!("  {method:<14} {ms:>10.3} ms");
        csv.push_str(&format!("{method},{ms}\n"));
    }
    let path = cli.out.join("timing.csv");
    std::fs::write(&path, csv).map_err(|e| Error::io(&path, e))?;
    println!("timing report: {}", path.display());
    Ok(())
}
