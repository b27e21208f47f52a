//! Evaluation harness: feature stores, subject-disjoint k-fold
//! cross-validation with shared per-fold base models, accuracy reports in
//! the per-fold table format, and timing benchmarks.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::data::{Dataset, FoldAssignment, Label};
use crate::error::{Error, Result};
use crate::features::{FeatureExtractor, FeatureMatrix, FeatureVector};
use crate::model::{
    fuse_forward, train, train_fusion_head, FusionHead, ModelInput, ModelKind, SequenceModel,
    TrainHistory,
};
use crate::util::derive_seed;

/// Cache file name of one feature family, as written by `extract`.
pub fn cache_file_name(family: crate::features::FeatureFamily) -> String {
    format!("{}.features.csv", family.name())
}

/// An evaluated classification method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    /// Constant prediction of the training majority class.
    Majority,
    DeepFrame,
    AudaFrame,
    AuWise,
    CrossAu,
    /// Fusion of the three handcrafted streams.
    FusionAuda,
    /// Fusion of all four streams including deep features.
    FusionAll,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::Majority,
        Method::DeepFrame,
        Method::AudaFrame,
        Method::AuWise,
        Method::CrossAu,
        Method::FusionAuda,
        Method::FusionAll,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Method::Majority => "majority",
            Method::DeepFrame => "deep_frame",
            Method::AudaFrame => "auda_frame",
            Method::AuWise => "au_wise",
            Method::CrossAu => "cross_au",
            Method::FusionAuda => "fusion_auda",
            Method::FusionAll => "fusion_all",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Method::ALL
            .iter()
            .find(|m| m.name() == name)
            .copied()
            .ok_or_else(|| Error::InvalidArgument(format!("unknown method '{name}'")))
    }

    /// Contributing model kinds, in fusion order.
    pub fn required_kinds(&self) -> &'static [ModelKind] {
        match self {
            Method::Majority => &[],
            Method::DeepFrame => &[ModelKind::DeepFrame],
            Method::AudaFrame => &[ModelKind::AudaFrame],
            Method::AuWise => &[ModelKind::AuWise],
            Method::CrossAu => &[ModelKind::CrossAu],
            Method::FusionAuda => &[ModelKind::AudaFrame, ModelKind::AuWise, ModelKind::CrossAu],
            Method::FusionAll => &[
                ModelKind::DeepFrame,
                ModelKind::AudaFrame,
                ModelKind::AuWise,
                ModelKind::CrossAu,
            ],
        }
    }

    pub fn is_fusion(&self) -> bool {
        matches!(self, Method::FusionAuda | Method::FusionAll)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub folds: usize,
    pub methods: Vec<String>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            folds: 10,
            methods: vec!["majority".into(), "au_wise".into()],
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.folds < 2 {
            return Err(Error::InvalidArgument(format!(
                "folds must be at least 2, got {}",
                self.folds
            )));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidArgument("no methods configured".into()));
        }
        for m in &self.methods {
            Method::from_name(m)?;
        }
        Ok(())
    }

    pub fn parsed_methods(&self) -> Result<Vec<Method>> {
        self.methods.iter().map(|m| Method::from_name(m)).collect()
    }
}

/// Extracted features of a whole dataset, aligned by sequence index.
#[derive(Debug, Clone)]
pub struct FeatureStore {
    pub ids: Vec<String>,
    pub subjects: Vec<Option<String>>,
    pub labels: Vec<Label>,
    pub frame: Option<Vec<FeatureMatrix>>,
    pub au: Option<Vec<FeatureVector>>,
    pub cross: Option<Vec<FeatureVector>>,
    pub deep: Option<Vec<FeatureMatrix>>,
}

impl FeatureStore {
    /// Extract everything the given methods need. Handcrafted families are
    /// extracted together (the dynamics bundles dominate and are shared);
    /// deep features are taken from the dataset records.
    pub fn extract(dataset: &Dataset, cfg: &RunConfig, methods: &[Method]) -> Result<FeatureStore> {
        if dataset.is_empty() {
            return Err(Error::InsufficientData("dataset has no sequences".into()));
        }
        let mut need_handcrafted = false;
        let mut need_deep = false;
        for method in methods {
            for kind in method.required_kinds() {
                match kind {
                    ModelKind::DeepFrame => need_deep = true,
                    _ => need_handcrafted = true,
                }
            }
        }

        let mut ids = Vec::with_capacity(dataset.len());
        let mut subjects = Vec::with_capacity(dataset.len());
        let mut labels = Vec::with_capacity(dataset.len());
        for s in &dataset.sequences {
            ids.push(s.signals.id().to_string());
            subjects.push(s.signals.subject().map(|x| x.to_string()));
            labels.push(s.signals.label());
        }

        let (frame, au, cross) = if need_handcrafted {
            let extractor = FeatureExtractor::new(cfg.features.clone())?;
            let mut frame = Vec::with_capacity(dataset.len());
            let mut au = Vec::with_capacity(dataset.len());
            let mut cross = Vec::with_capacity(dataset.len());
            for s in &dataset.sequences {
                let f = extractor.extract(&s.signals)?;
                frame.push(f.frame_wise);
                au.push(f.au_wise);
                cross.push(f.cross_au);
            }
            (Some(frame), Some(au), Some(cross))
        } else {
            (None, None, None)
        };

        let deep = if need_deep {
            let mut deep = Vec::with_capacity(dataset.len());
            for s in &dataset.sequences {
                let m = s.deep.as_ref().ok_or_else(|| {
                    Error::InvalidArgument(format!(
                        "sequence '{}' has no deep feature stream",
                        s.signals.id()
                    ))
                })?;
                deep.push(m.clone());
            }
            if let Some(first) = deep.first() {
                for (m, id) in deep.iter().zip(&ids) {
                    if m.dim() != first.dim() {
                        return Err(Error::InvalidArgument(format!(
                            "deep feature dimension of '{id}' is {} but expected {}",
                            m.dim(),
                            first.dim()
                        )));
                    }
                }
            }
            Some(deep)
        } else {
            None
        };

        Ok(FeatureStore {
            ids,
            subjects,
            labels,
            frame,
            au,
            cross,
            deep,
        })
    }

    /// Rebuild a store from feature cache files written by `extract`.
    /// Families are aligned by sequence id; the first family found defines
    /// the order.
    pub fn from_cache_dir(dir: &Path) -> Result<FeatureStore> {
        use crate::data::read_feature_cache;
        use crate::features::FeatureFamily;

        let mut ids: Vec<String> = Vec::new();
        let mut subjects: Vec<Option<String>> = Vec::new();
        let mut labels: Vec<Label> = Vec::new();
        let mut frame = None;
        let mut au = None;
        let mut cross = None;
        let mut deep = None;

        for family in [
            FeatureFamily::FrameWise,
            FeatureFamily::AuWise,
            FeatureFamily::CrossAu,
            FeatureFamily::Deep,
        ] {
            let path = dir.join(cache_file_name(family));
            if !path.exists() {
                continue;
            }
            let (catalog, records) = read_feature_cache(&path)?;
            if ids.is_empty() {
                for r in &records {
                    ids.push(r.sequence_id.clone());
                    subjects.push(r.subject.clone());
                    labels.push(r.label);
                }
            } else {
                let found: Vec<&str> = records.iter().map(|r| r.sequence_id.as_str()).collect();
                let expected: Vec<&str> = ids.iter().map(|s| s.as_str()).collect();
                if found != expected {
                    return Err(Error::Load(format!(
                        "{}: sequence ids do not match the other cache files",
                        path.display()
                    )));
                }
            }
            match family {
                FeatureFamily::FrameWise | FeatureFamily::Deep => {
                    let matrices = records
                        .into_iter()
                        .map(|r| FeatureMatrix::new(r.values, r.frames, catalog.clone()))
                        .collect::<Result<Vec<_>>>()?;
                    if family == FeatureFamily::FrameWise {
                        frame = Some(matrices);
                    } else {
                        deep = Some(matrices);
                    }
                }
                FeatureFamily::AuWise | FeatureFamily::CrossAu => {
                    let vectors = records
                        .into_iter()
                        .map(|r| {
                            if r.frames != 1 {
                                return Err(Error::Load(format!(
                                    "{}: vector family record '{}' has {} frames",
                                    path.display(),
                                    r.sequence_id,
                                    r.frames
                                )));
                            }
                            FeatureVector::new(r.values, catalog.clone())
                        })
                        .collect::<Result<Vec<_>>>()?;
                    if family == FeatureFamily::AuWise {
                        au = Some(vectors);
                    } else {
                        cross = Some(vectors);
                    }
                }
            }
        }
        if ids.is_empty() {
            return Err(Error::InsufficientData(format!(
                "no feature cache files in {}",
                dir.display()
            )));
        }
        Ok(FeatureStore {
            ids,
            subjects,
            labels,
            frame,
            au,
            cross,
            deep,
        })
    }

    /// (sequence id, subject key) pairs for fold assignment.
    pub fn fold_keys(&self) -> Vec<(String, String)> {
        self.ids
            .iter()
            .zip(&self.subjects)
            .map(|(id, subject)| {
                (
                    id.clone(),
                    subject.clone().unwrap_or_else(|| id.clone()),
                )
            })
            .collect()
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn input(&self, kind: ModelKind, idx: usize) -> Result<ModelInput<'_>> {
        let missing = || {
            Error::InvalidArgument(format!(
                "feature store holds no {} features",
                kind.expected_family().name()
            ))
        };
        Ok(match kind {
            ModelKind::DeepFrame => {
                ModelInput::Frames(&self.deep.as_ref().ok_or_else(missing)?[idx])
            }
            ModelKind::AudaFrame => {
                ModelInput::Frames(&self.frame.as_ref().ok_or_else(missing)?[idx])
            }
            ModelKind::AuWise => ModelInput::Vector(&self.au.as_ref().ok_or_else(missing)?[idx]),
            ModelKind::CrossAu => {
                ModelInput::Vector(&self.cross.as_ref().ok_or_else(missing)?[idx])
            }
        })
    }

    pub fn input_dim(&self, kind: ModelKind) -> Result<usize> {
        Ok(self.input(kind, 0)?.dim())
    }

    /// Labeled training pairs for one model kind over the given indices.
    pub fn training_pairs(&self, kind: ModelKind, idx: &[usize]) -> Result<Vec<(ModelInput<'_>, f64)>> {
        idx.iter()
            .map(|&i| {
                let target = self.labels[i].target().ok_or_else(|| {
                    Error::InvalidArgument(format!("sequence '{}' is unlabeled", self.ids[i]))
                })?;
                Ok((self.input(kind, i)?, target))
            })
            .collect()
    }
}

/// Per-method cross-validation outcome.
#[derive(Debug, Clone)]
pub struct MethodReport {
    pub method: String,
    /// Accuracy (%) per fold, fold 1 first.
    pub fold_accuracy: Vec<f64>,
    pub mean: f64,
    pub std: f64,
    pub time_ms_per_sequence: Option<f64>,
}

impl MethodReport {
    fn from_accuracies(method: &Method, fold_accuracy: Vec<f64>) -> MethodReport {
        let (mean, std) = mean_std(&fold_accuracy);
        MethodReport {
            method: method.name().to_string(),
            fold_accuracy,
            mean,
            std,
            time_ms_per_sequence: None,
        }
    }
}

/// Mean and population standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.max(0.0).sqrt())
}

/// Accuracy (%) of spontaneous/posed decisions against labels.
pub fn accuracy_percent(decisions: &[bool], labels: &[Label]) -> f64 {
    assert_eq!(decisions.len(), labels.len());
    if decisions.is_empty() {
        return 0.0;
    }
    let correct = decisions
        .iter()
        .zip(labels)
        .filter(|(d, l)| match l {
            Label::Spontaneous => **d,
            Label::Posed => !**d,
            Label::Unlabeled => false,
        })
        .count();
    100.0 * correct as f64 / decisions.len() as f64
}

/// Full cross-validation report.
#[derive(Debug, Clone)]
pub struct FoldReport {
    pub folds: usize,
    pub seed: u64,
    pub reports: Vec<MethodReport>,
    pub config_snapshot: String,
}

impl FoldReport {
    /// Human-readable per-fold table.
    pub fn table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("{:<14} {:>9}", "Method", "Time [ms]"));
        for f in 1..=self.folds {
            out.push_str(&format!(" {f:>6}"));
        }
        out.push_str(&format!(" {:>12}\n", "Average"));
        for r in &self.reports {
            let time = match r.time_ms_per_sequence {
                Some(t) => format!("{t:.1}"),
                None => "-".to_string(),
            };
            out.push_str(&format!("{:<14} {:>9}", r.method, time));
            for a in &r.fold_accuracy {
                out.push_str(&format!(" {a:>6.1}"));
            }
            out.push_str(&format!(
                " {:>12}\n",
                format!("{:.1}±{:.1}", r.mean, r.std)
            ));
        }
        out
    }

    /// Machine-readable CSV: method, time, per-fold accuracies, mean, std.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("method,time_ms");
        for f in 1..=self.folds {
            out.push_str(&format!(",fold_{f}"));
        }
        out.push_str(",mean,std\n");
        for r in &self.reports {
            out.push_str(&r.method);
            match r.time_ms_per_sequence {
                Some(t) => out.push_str(&format!(",{t}")),
                None => out.push(','),
            }
            for a in &r.fold_accuracy {
                out.push_str(&format!(",{a}"));
            }
            out.push_str(&format!(",{},{}\n", r.mean, r.std));
        }
        out
    }

    /// Write `report.csv` and `report.txt` into a directory.
    pub fn write_files(&self, dir: &Path) -> Result<(PathBuf, PathBuf)> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let csv_path = dir.join("report.csv");
        let txt_path = dir.join("report.txt");
        std::fs::write(&csv_path, self.to_csv()).map_err(|e| Error::io(&csv_path, e))?;
        let mut text = self.table();
        text.push_str(&format!("\nseed: {}\nfolds: {}\n", self.seed, self.folds));
        std::fs::write(&txt_path, text).map_err(|e| Error::io(&txt_path, e))?;
        Ok((csv_path, txt_path))
    }
}

/// The trained base models of one fold.
pub struct FoldModels {
    pub fold: usize,
    pub models: HashMap<ModelKind, SequenceModel>,
    pub histories: HashMap<ModelKind, TrainHistory>,
}

/// Train one model kind on the given store indices.
pub fn train_model_for(
    store: &FeatureStore,
    kind: ModelKind,
    train_idx: &[usize],
    cfg: &RunConfig,
    seed: u64,
) -> Result<(SequenceModel, TrainHistory)> {
    let pairs = store.training_pairs(kind, train_idx)?;
    let dim = store.input_dim(kind)?;
    let mut model = SequenceModel::new(kind, dim, &cfg.model, seed)?;
    let history = train(&mut model, &pairs, &cfg.train, seed)?;
    Ok((model, history))
}

fn train_fold_models(
    store: &FeatureStore,
    kinds: &[ModelKind],
    train_idx: &[usize],
    cfg: &RunConfig,
    seed: u64,
    fold: usize,
) -> Result<FoldModels> {
    let mut models = HashMap::new();
    let mut histories = HashMap::new();
    for kind in kinds {
        let model_seed = derive_seed(seed, kind.name(), fold as u64);
        let (mut model, history) = train_model_for(store, *kind, train_idx, cfg, model_seed)?;
        model.meta.fold = Some(fold);
        models.insert(*kind, model);
        histories.insert(*kind, history);
    }
    Ok(FoldModels {
        fold,
        models,
        histories,
    })
}

/// Train a fusion head for a method over already-trained fold models.
pub fn train_head_for(
    method: Method,
    fold_models: &FoldModels,
    store: &FeatureStore,
    train_idx: &[usize],
    cfg: &RunConfig,
    seed: u64,
) -> Result<FusionHead> {
    let kinds = method.required_kinds();
    let models: Vec<&SequenceModel> = kinds
        .iter()
        .map(|k| {
            fold_models
                .models
                .get(k)
                .ok_or_else(|| Error::InvalidArgument(format!("missing {} model", k.name())))
        })
        .collect::<Result<_>>()?;
    let mut head = FusionHead::new(
        &models,
        derive_seed(seed, method.name(), fold_models.fold as u64),
    )?;
    let data: Vec<(Vec<ModelInput>, f64)> = train_idx
        .iter()
        .map(|&i| {
            let inputs = kinds
                .iter()
                .map(|k| store.input(*k, i))
                .collect::<Result<Vec<_>>>()?;
            let target = store.labels[i].target().ok_or_else(|| {
                Error::InvalidArgument(format!("sequence '{}' is unlabeled", store.ids[i]))
            })?;
            Ok((inputs, target))
        })
        .collect::<Result<_>>()?;
    train_fusion_head(
        &mut head,
        &models,
        &data,
        &cfg.train,
        derive_seed(seed, method.name(), fold_models.fold as u64),
    )?;
    Ok(head)
}

fn evaluate_method(
    method: Method,
    fold_models: &FoldModels,
    head: Option<&FusionHead>,
    store: &FeatureStore,
    train_idx: &[usize],
    test_idx: &[usize],
) -> Result<f64> {
    let decisions: Vec<bool> = match method {
        Method::Majority => {
            let spont = train_idx
                .iter()
                .filter(|&&i| store.labels[i] == Label::Spontaneous)
                .count();
            let majority = spont * 2 > train_idx.len();
            vec![majority; test_idx.len()]
        }
        Method::DeepFrame | Method::AudaFrame | Method::AuWise | Method::CrossAu => {
            let kind = method.required_kinds()[0];
            let model = &fold_models.models[&kind];
            test_idx
                .iter()
                .map(|&i| Ok(model.forward(&store.input(kind, i)?)?.1.decision))
                .collect::<Result<_>>()?
        }
        Method::FusionAuda | Method::FusionAll => {
            let kinds = method.required_kinds();
            let models: Vec<&SequenceModel> =
                kinds.iter().map(|k| &fold_models.models[k]).collect();
            let head = head.ok_or_else(|| {
                Error::InvalidArgument(format!("no fusion head for {}", method.name()))
            })?;
            test_idx
                .iter()
                .map(|&i| {
                    let inputs = kinds
                        .iter()
                        .map(|k| store.input(*k, i))
                        .collect::<Result<Vec<_>>>()?;
                    Ok(fuse_forward(head, &models, &inputs)?.decision)
                })
                .collect::<Result<_>>()?
        }
    };
    let labels: Vec<Label> = test_idx.iter().map(|&i| store.labels[i]).collect();
    Ok(accuracy_percent(&decisions, &labels))
}

fn check_fold_discipline(store: &FeatureStore, folds: &FoldAssignment) {
    let mut subject_fold: HashMap<&str, usize> = HashMap::new();
    for (i, id) in store.ids.iter().enumerate() {
        let fold = folds
            .fold_of(id)
            .unwrap_or_else(|| panic!("sequence '{id}' has no fold"));
        let key: &str = store.subjects[i].as_deref().unwrap_or(id);
        if let Some(prev) = subject_fold.insert(key, fold) {
            assert_eq!(
                prev, fold,
                "fold discipline violated: subject '{key}' appears in folds {prev} and {fold}"
            );
        }
    }
}

/// Subject-disjoint k-fold cross-validation over the configured methods.
///
/// Base models are trained once per fold and shared by every method that
/// needs them (fusion heads train on the same frozen models afterwards),
/// matching the train-contributors-then-fuse workflow.
pub fn kfold_evaluate(
    dataset: &Dataset,
    methods: &[Method],
    cfg: &RunConfig,
    seed: u64,
) -> Result<FoldReport> {
    cfg.validate()?;
    if methods.is_empty() {
        return Err(Error::InvalidArgument("no methods requested".into()));
    }
    let k = cfg.eval.folds;
    for s in &dataset.sequences {
        if s.signals.label() == Label::Unlabeled {
            return Err(Error::InvalidArgument(format!(
                "sequence '{}' is unlabeled",
                s.signals.id()
            )));
        }
    }
    let store = FeatureStore::extract(dataset, cfg, methods)?;
    let folds = dataset.assign_folds(k, seed)?;
    check_fold_discipline(&store, &folds);

    let mut kinds: Vec<ModelKind> = Vec::new();
    for method in methods {
        for kind in method.required_kinds() {
            if !kinds.contains(kind) {
                kinds.push(*kind);
            }
        }
    }
    kinds.sort_by_key(|k| k.fusion_rank());

    let mut accuracies: HashMap<Method, Vec<f64>> =
        methods.iter().map(|m| (*m, Vec::new())).collect();
    for fold in 1..=k {
        let (mut train_idx, mut test_idx) = (Vec::new(), Vec::new());
        for (i, id) in store.ids.iter().enumerate() {
            if folds.fold_of(id) == Some(fold) {
                test_idx.push(i);
            } else {
                train_idx.push(i);
            }
        }
        assert!(
            !test_idx.is_empty() && !train_idx.is_empty(),
            "fold {fold} has an empty split"
        );
        let fold_models = train_fold_models(&store, &kinds, &train_idx, cfg, seed, fold)?;
        for method in methods {
            let head = if method.is_fusion() {
                Some(train_head_for(
                    *method,
                    &fold_models,
                    &store,
                    &train_idx,
                    cfg,
                    seed,
                )?)
            } else {
                None
            };
            let acc = evaluate_method(
                *method,
                &fold_models,
                head.as_ref(),
                &store,
                &train_idx,
                &test_idx,
            )?;
            accuracies.get_mut(method).unwrap().push(acc);
        }
    }

    let reports = methods
        .iter()
        .map(|m| MethodReport::from_accuracies(m, accuracies.remove(m).unwrap()))
        .collect();
    Ok(FoldReport {
        folds: k,
        seed,
        reports,
        config_snapshot: cfg.to_toml(),
    })
}

/// Per-method timing report (milliseconds per sequence).
#[derive(Debug, Clone)]
pub struct TimingReport {
    pub entries: Vec<(String, f64)>,
    pub repetitions: usize,
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len();
    if n == 0 {
        0.0
    } else if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// Measure per-sequence processing time (feature extraction plus inference,
/// compute only, no file I/O) for each method: the median over `reps`
/// passes of the whole dataset. Models are freshly initialized; parameter
/// values do not affect the arithmetic cost.
pub fn bench_timing(
    dataset: &Dataset,
    cfg: &RunConfig,
    methods: &[Method],
    reps: usize,
) -> Result<TimingReport> {
    if dataset.is_empty() {
        return Err(Error::InsufficientData("dataset has no sequences".into()));
    }
    if methods.is_empty() {
        return Ok(TimingReport {
            entries: Vec::new(),
            repetitions: reps,
        });
    }
    let reps = reps.max(1);
    let store = FeatureStore::extract(dataset, cfg, methods)?;
    let extractor = FeatureExtractor::new(cfg.features.clone())?;
    let mut models: HashMap<ModelKind, SequenceModel> = HashMap::new();
    for method in methods {
        for kind in method.required_kinds() {
            if !models.contains_key(kind) {
                let dim = store.input_dim(*kind)?;
                models.insert(*kind, SequenceModel::new(*kind, dim, &cfg.model, 0)?);
            }
        }
    }

    let n = dataset.len() as f64;
    let mut entries = Vec::new();
    for method in methods {
        let mut times = Vec::with_capacity(reps);
        for _ in 0..reps {
            let start = Instant::now();
            for (i, s) in dataset.sequences.iter().enumerate() {
                match method {
                    Method::Majority => {
                        std::hint::black_box(store.labels[i]);
                    }
                    Method::DeepFrame => {
                        let kind = ModelKind::DeepFrame;
                        let input = store.input(kind, i)?;
                        std::hint::black_box(models[&kind].forward(&input)?);
                    }
                    Method::AudaFrame => {
                        let m = extractor.frame_wise(&s.signals)?;
                        std::hint::black_box(
                            models[&ModelKind::AudaFrame].forward(&ModelInput::Frames(&m))?,
                        );
                    }
                    Method::AuWise => {
                        let seg = extractor.segment(&s.signals)?;
                        let v = extractor.au_wise(&s.signals, &seg)?;
                        std::hint::black_box(
                            models[&ModelKind::AuWise].forward(&ModelInput::Vector(&v))?,
                        );
                    }
                    Method::CrossAu => {
                        let seg = extractor.segment(&s.signals)?;
                        let v = extractor.cross_au(&s.signals, &seg)?;
                        std::hint::black_box(
                            models[&ModelKind::CrossAu].forward(&ModelInput::Vector(&v))?,
                        );
                    }
                    Method::FusionAuda | Method::FusionAll => {
                        let feats = extractor.extract(&s.signals)?;
                        for kind in method.required_kinds() {
                            let out = match kind {
                                ModelKind::DeepFrame => {
                                    models[kind].forward(&store.input(*kind, i)?)?
                                }
                                ModelKind::AudaFrame => models[kind]
                                    .forward(&ModelInput::Frames(&feats.frame_wise))?,
                                ModelKind::AuWise => {
                                    models[kind].forward(&ModelInput::Vector(&feats.au_wise))?
                                }
                                ModelKind::CrossAu => {
                                    models[kind].forward(&ModelInput::Vector(&feats.cross_au))?
                                }
                            };
                            std::hint::black_box(out);
                        }
                    }
                }
            }
            times.push(start.elapsed().as_secs_f64() * 1000.0 / n);
        }
        entries.push((method.name().to_string(), median(times)));
    }
    Ok(TimingReport {
        entries,
        repetitions: reps,
    })
}

/// Attach bench timings to a fold report's matching methods.
pub fn attach_timings(report: &mut FoldReport, timings: &TimingReport) {
    for r in report.reports.iter_mut() {
        if let Some((_, t)) = timings.entries.iter().find(|(m, _)| *m == r.method) {
            r.time_ms_per_sequence = Some(*t);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn majority_baseline_on_published_class_counts() {
        // 643 posed, 597 spontaneous; constant "posed" prediction
        let mut labels = vec![Label::Posed; 643];
        labels.extend(vec![Label::Spontaneous; 597]);
        let decisions = vec![false; labels.len()];
        let acc = accuracy_percent(&decisions, &labels);
        assert!((acc - 100.0 * 643.0 / 1240.0).abs() < 1e-9);
        assert!((acc - 51.9).abs() < 0.1, "accuracy {acc}");
    }

    #[test]
    fn mean_std_is_population_form() {
        let (mean, std) = mean_std(&[1.0, 2.0, 3.0, 4.0]);
        assert!((mean - 2.5).abs() < 1e-12);
        assert!((std - (1.25_f64).sqrt()).abs() < 1e-12);
        assert_eq!(mean_std(&[]), (0.0, 0.0));
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(Method::from_name(m.name()).unwrap(), m);
        }
        assert!(Method::from_name("nope").is_err());
    }

    #[test]
    fn report_table_and_csv_have_fold_columns() {
        let report = FoldReport {
            folds: 3,
            seed: 7,
            reports: vec![MethodReport {
                method: "au_wise".into(),
                fold_accuracy: vec![90.0, 95.0, 100.0],
                mean: 95.0,
                std: (50.0 / 3.0_f64).sqrt(),
                time_ms_per_sequence: Some(1.25),
            }],
            config_snapshot: String::new(),
        };
        let table = report.table();
        assert!(table.contains("au_wise"));
        assert!(table.contains("95.0±"));
        let csv = report.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "method,time_ms,fold_1,fold_2,fold_3,mean,std");
        let row = lines.next().unwrap();
        assert!(row.starts_with("au_wise,1.25,90,95,100,95,"));
    }
}
