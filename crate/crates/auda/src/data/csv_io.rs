//! CSV ingestion (OpenFace-style AU tables, deep feature files) and the
//! feature cache.
//!
//! Cache values are serialized with 17 significant digits, which round-trips
//! every finite f64 exactly; a sidecar file pins the catalog and its hash so
//! stale caches are detected instead of silently misread.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::data::{AUSignalSet, Dataset, Label, SequenceRecord};
use crate::error::{Error, Result};
use crate::features::{FeatureCatalog, FeatureFamily, FeatureMatrix};
use crate::series::TimeSeries;

/// Column naming of input AU tables. Defaults match OpenFace AU intensity
/// output plus a smile-intensity column.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CsvSchema {
    pub frame_column: String,
    pub timestamp_column: String,
    pub au_columns: Vec<String>,
    pub smile_column: String,
    /// Optional columns: used when present, ignored when absent.
    pub label_column: String,
    pub subject_column: String,
}

impl Default for CsvSchema {
    fn default() -> Self {
        CsvSchema {
            frame_column: "frame".into(),
            timestamp_column: "timestamp".into(),
            au_columns: crate::features::DEFAULT_AU_NAMES
                .iter()
                .map(|s| s.to_string())
                .collect(),
            smile_column: crate::features::DEFAULT_SMILE_NAME.into(),
            label_column: "label".into(),
            subject_column: "subject".into(),
        }
    }
}

fn parse_cell(raw: &str, row: usize, column: &str) -> Result<f64> {
    let v: f64 = raw.trim().parse().map_err(|_| Error::Data {
        row,
        message: format!("cannot parse '{raw}' in column '{column}'"),
    })?;
    if !v.is_finite() {
        return Err(Error::Data {
            row,
            message: format!("non-finite value in column '{column}'"),
        });
    }
    Ok(v)
}

/// Load one sequence from an AU intensity CSV. The sequence id is the file
/// stem; label and subject come from their columns when present.
pub fn load_au_csv(path: &Path, schema: &CsvSchema) -> Result<AUSignalSet> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Schema(format!("{}: {e}", path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| Error::Schema(format!("{}: {e}", path.display())))?
        .clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let require = |name: &str| {
        col(name).ok_or_else(|| {
            Error::Schema(format!("{}: missing column '{name}'", path.display()))
        })
    };

    let t_idx = require(&schema.timestamp_column)?;
    // the frame column is structural; its values are not used
    require(&schema.frame_column)?;
    let mut value_cols = Vec::with_capacity(schema.au_columns.len() + 1);
    for au in &schema.au_columns {
        value_cols.push((au.clone(), require(au)?));
    }
    value_cols.push((schema.smile_column.clone(), require(&schema.smile_column)?));
    let label_idx = col(&schema.label_column);
    let subject_idx = col(&schema.subject_column);

    let mut timestamps = Vec::new();
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); value_cols.len()];
    let mut label = Label::Unlabeled;
    let mut subject: Option<String> = None;

    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Data {
            row,
            message: e.to_string(),
        })?;
        let cell = |idx: usize| record.get(idx).unwrap_or("");
        timestamps.push(parse_cell(cell(t_idx), row, &schema.timestamp_column)?);
        for (c, (name, idx)) in value_cols.iter().enumerate() {
            columns[c].push(parse_cell(cell(*idx), row, name)?);
        }
        if let Some(idx) = label_idx {
            let l = Label::from_str(cell(idx)).map_err(|e| Error::Data {
                row,
                message: e.to_string(),
            })?;
            if row == 0 {
                label = l;
            } else if l != label {
                return Err(Error::Data {
                    row,
                    message: format!(
                        "label changes mid-sequence ({} then {})",
                        label.as_str(),
                        l.as_str()
                    ),
                });
            }
        }
        if let Some(idx) = subject_idx {
            if row == 0 && !cell(idx).is_empty() {
                subject = Some(cell(idx).to_string());
            }
        }
    }

    let n = timestamps.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "{}: need at least 2 rows to establish the frame rate, got {n}",
            path.display()
        )));
    }
    let span = timestamps[n - 1] - timestamps[0];
    if span <= 0.0 {
        return Err(Error::Data {
            row: n - 1,
            message: "timestamps do not advance".into(),
        });
    }
    let fps = (n - 1) as f64 / span;

    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string());
    let signals = value_cols
        .into_iter()
        .zip(columns)
        .map(|((name, _), values)| {
            Ok((name, TimeSeries::new(values, timestamps.clone(), fps)?))
        })
        .collect::<Result<Vec<_>>>()?;
    AUSignalSet::new(id, subject, label, signals)
}

/// Load a per-sequence deep feature file: one row per frame, one column per
/// dimension. Column names become the catalog.
pub fn load_deep_csv(path: &Path) -> Result<FeatureMatrix> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Schema(format!("{}: {e}", path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| Error::Schema(format!("{}: {e}", path.display())))?
        .clone();
    if headers.is_empty() {
        return Err(Error::Schema(format!(
            "{}: deep feature file has no columns",
            path.display()
        )));
    }
    let names: Vec<String> = headers.iter().map(|h| h.to_string()).collect();
    let dim = names.len();
    let mut data = Vec::new();
    let mut frames = 0usize;
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Data {
            row,
            message: e.to_string(),
        })?;
        if record.len() != dim {
            return Err(Error::Data {
                row,
                message: format!("expected {dim} columns, got {}", record.len()),
            });
        }
        for (c, raw) in record.iter().enumerate() {
            data.push(parse_cell(raw, row, &names[c])?);
        }
        frames += 1;
    }
    let catalog = Arc::new(FeatureCatalog {
        family: FeatureFamily::Deep,
        names,
    });
    FeatureMatrix::new(data, frames, catalog)
}

const DEEP_SUFFIX: &str = ".deep.csv";

/// Load every `*.csv` sequence in a directory (sorted by name), attaching
/// `<id>.deep.csv` streams when present.
pub fn load_dataset_dir(dir: &Path, schema: &CsvSchema) -> Result<Dataset> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| {
            let name = p.file_name().map(|n| n.to_string_lossy().into_owned());
            match name {
                Some(n) => n.ends_with(".csv") && !n.ends_with(DEEP_SUFFIX),
                None => false,
            }
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::InsufficientData(format!(
            "no sequence CSV files in {}",
            dir.display()
        )));
    }
    let mut sequences = Vec::with_capacity(paths.len());
    for path in paths {
        let signals = load_au_csv(&path, schema)?;
        let deep_path = path.with_extension("").with_extension("deep.csv");
        let deep = if deep_path.exists() {
            Some(load_deep_csv(&deep_path)?)
        } else {
            None
        };
        sequences.push(SequenceRecord { signals, deep });
    }
    Ok(Dataset { sequences })
}

/// Write a sequence as an AU CSV readable by `load_au_csv`.
pub fn write_au_csv(path: &Path, aus: &AUSignalSet, schema: &CsvSchema) -> Result<()> {
    let mut writer =
        csv::Writer::from_path(path).map_err(|e| Error::Schema(format!("{}: {e}", path.display())))?;
    let mut header = vec![
        schema.frame_column.clone(),
        schema.timestamp_column.clone(),
    ];
    let mut names: Vec<&str> = Vec::new();
    for au in &schema.au_columns {
        header.push(au.clone());
        names.push(au);
    }
    header.push(schema.smile_column.clone());
    names.push(&schema.smile_column);
    header.push(schema.label_column.clone());
    header.push(schema.subject_column.clone());
    writer
        .write_record(&header)
        .map_err(|e| Error::Schema(e.to_string()))?;

    let reference = aus
        .signal(names[0])
        .ok_or_else(|| Error::InvalidArgument(format!("missing signal '{}'", names[0])))?;
    let timestamps = reference.timestamps();
    for t in 0..aus.frames() {
        let mut record = vec![t.to_string(), format!("{:.16e}", timestamps[t])];
        for name in &names {
            let series = aus
                .signal(name)
                .ok_or_else(|| Error::InvalidArgument(format!("missing signal '{name}'")))?;
            record.push(format!("{:.16e}", series.values()[t]));
        }
        record.push(aus.label().as_str().to_string());
        record.push(aus.subject().unwrap_or("").to_string());
        writer
            .write_record(&record)
            .map_err(|e| Error::Schema(e.to_string()))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Write a deep feature stream as a per-sequence CSV.
pub fn write_deep_csv(path: &Path, matrix: &FeatureMatrix) -> Result<()> {
    let mut writer =
        csv::Writer::from_path(path).map_err(|e| Error::Schema(format!("{}: {e}", path.display())))?;
    writer
        .write_record(&matrix.catalog().names)
        .map_err(|e| Error::Schema(e.to_string()))?;
    for t in 0..matrix.frames() {
        let record: Vec<String> = matrix.row(t).iter().map(|v| format!("{v:.16e}")).collect();
        writer
            .write_record(&record)
            .map_err(|e| Error::Schema(e.to_string()))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// One cached feature row: a sequence's vector (frames = 1) or flattened
/// frame matrix (frames = T).
#[derive(Debug, Clone)]
pub struct FeatureRecord {
    pub sequence_id: String,
    pub subject: Option<String>,
    pub label: Label,
    pub frames: usize,
    pub values: Vec<f64>,
}

fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("catalog")
}

/// Write one family's features for many sequences, plus the catalog sidecar.
pub fn write_feature_cache(
    path: &Path,
    catalog: &FeatureCatalog,
    records: &[FeatureRecord],
) -> Result<()> {
    let dim = catalog.len();
    let hash = catalog.hash();
    let mut sidecar = format!("family {}\nhash {hash:016x}\n", catalog.family.name());
    for name in &catalog.names {
        sidecar.push_str(name);
        sidecar.push('\n');
    }
    fs::write(sidecar_path(path), sidecar).map_err(|e| Error::io(sidecar_path(path), e))?;

    let mut writer = csv::WriterBuilder::new()
        .flexible(true)
        .from_path(path)
        .map_err(|e| Error::Schema(format!("{}: {e}", path.display())))?;
    writer
        .write_record([
            "sequence_id",
            "subject",
            "label",
            "family",
            "catalog_hash",
            "frames",
        ])
        .map_err(|e| Error::Schema(e.to_string()))?;
    for record in records {
        if record.values.len() != record.frames * dim {
            return Err(Error::InvalidArgument(format!(
                "sequence '{}': {} values cannot form {} frames of dimension {dim}",
                record.sequence_id,
                record.values.len(),
                record.frames
            )));
        }
        let mut row = vec![
            record.sequence_id.clone(),
            record.subject.clone().unwrap_or_default(),
            record.label.as_str().to_string(),
            catalog.family.name().to_string(),
            format!("{hash:016x}"),
            record.frames.to_string(),
        ];
        row.extend(record.values.iter().map(|v| format!("{v:.16e}")));
        writer
            .write_record(&row)
            .map_err(|e| Error::Schema(e.to_string()))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Read a feature cache file back, validating it against its sidecar.
pub fn read_feature_cache(path: &Path) -> Result<(Arc<FeatureCatalog>, Vec<FeatureRecord>)> {
    let sidecar = sidecar_path(path);
    let text = fs::read_to_string(&sidecar).map_err(|e| Error::io(&sidecar, e))?;
    let mut lines = text.lines();
    let family_line = lines
        .next()
        .ok_or_else(|| Error::Load(format!("{}: empty catalog sidecar", sidecar.display())))?;
    let family = FeatureFamily::from_name(
        family_line
            .strip_prefix("family ")
            .ok_or_else(|| Error::Load(format!("{}: malformed family line", sidecar.display())))?,
    )?;
    let hash_line = lines
        .next()
        .ok_or_else(|| Error::Load(format!("{}: missing hash line", sidecar.display())))?;
    let stated_hash = u64::from_str_radix(
        hash_line
            .strip_prefix("hash ")
            .ok_or_else(|| Error::Load(format!("{}: malformed hash line", sidecar.display())))?,
        16,
    )
    .map_err(|e| Error::Load(format!("{}: bad hash: {e}", sidecar.display())))?;
    let names: Vec<String> = lines.map(|l| l.to_string()).collect();
    let catalog = Arc::new(FeatureCatalog { family, names });
    if catalog.hash() != stated_hash {
        return Err(Error::Load(format!(
            "{}: catalog hash mismatch (stale or corrupted sidecar)",
            sidecar.display()
        )));
    }
    let dim = catalog.len();

    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .from_path(path)
        .map_err(|e| Error::Load(format!("{}: {e}", path.display())))?;
    let mut records = Vec::new();
    for (row, result) in reader.records().enumerate() {
        let record = result.map_err(|e| Error::Data {
            row,
            message: e.to_string(),
        })?;
        if record.len() < 6 {
            return Err(Error::Data {
                row,
                message: format!("expected at least 6 fields, got {}", record.len()),
            });
        }
        let get = |i: usize| record.get(i).unwrap_or("");
        if get(3) != catalog.family.name() {
            return Err(Error::Data {
                row,
                message: format!(
                    "family '{}' does not match sidecar family '{}'",
                    get(3),
                    catalog.family.name()
                ),
            });
        }
        let row_hash = u64::from_str_radix(get(4), 16).map_err(|e| Error::Data {
            row,
            message: format!("bad catalog hash: {e}"),
        })?;
        if row_hash != stated_hash {
            return Err(Error::Data {
                row,
                message: "catalog hash does not match sidecar".into(),
            });
        }
        let frames: usize = get(5).parse().map_err(|_| Error::Data {
            row,
            message: format!("bad frame count '{}'", get(5)),
        })?;
        let values = record
            .iter()
            .skip(6)
            .enumerate()
            .map(|(i, raw)| parse_cell(raw, row, &format!("value[{i}]")))
            .collect::<Result<Vec<f64>>>()?;
        if values.len() != frames * dim {
            return Err(Error::Data {
                row,
                message: format!(
                    "{} values cannot form {frames} frames of dimension {dim}",
                    values.len()
                ),
            });
        }
        records.push(FeatureRecord {
            sequence_id: get(0).to_string(),
            subject: if get(1).is_empty() {
                None
            } else {
                Some(get(1).to_string())
            },
            label: Label::from_str(get(2)).map_err(|e| Error::Data {
                row,
                message: e.to_string(),
            })?,
            frames,
            values,
        });
    }
    Ok((catalog, records))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FeatureConfig;

    fn write_sample_csv(dir: &Path, name: &str, rows: usize) -> PathBuf {
        let schema = CsvSchema::default();
        let mut header = vec!["frame".to_string(), "timestamp".to_string()];
        header.extend(schema.au_columns.iter().cloned());
        header.push("smile_intensity".into());
        header.push("label".into());
        header.push("subject".into());
        let mut text = header.join(",");
        text.push('\n');
        for i in 0..rows {
            let mut row = vec![i.to_string(), format!("{}", i as f64 * 0.02)];
            for c in 0..18 {
                row.push(format!("{}", (i + c) as f64 * 0.01));
            }
            row.push("spontaneous".into());
            row.push("s01".into());
            text.push_str(&row.join(","));
            text.push('\n');
        }
        let path = dir.join(name);
        fs::write(&path, text).unwrap();
        path
    }

    #[test]
    fn well_formed_file_parses() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_sample_csv(dir.path(), "seq01.csv", 150);
        let aus = load_au_csv(&path, &CsvSchema::default()).unwrap();
        assert_eq!(aus.signal_count(), 18);
        assert_eq!(aus.frames(), 150);
        assert_eq!(aus.label(), Label::Spontaneous);
        assert_eq!(aus.subject(), Some("s01"));
        assert_eq!(aus.id(), "seq01");
        assert!((aus.fps() - 50.0).abs() < 1e-6);
    }

    #[test]
    fn missing_au_column_names_it() {
        let dir = tempfile::tempdir().unwrap();
        let text = "frame,timestamp,smile_intensity\n0,0.0,0.1\n1,0.02,0.2\n";
        let path = dir.path().join("bad.csv");
        fs::write(&path, text).unwrap();
        match load_au_csv(&path, &CsvSchema::default()) {
            Err(Error::Schema(msg)) => assert!(msg.contains("AU01_r"), "{msg}"),
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn duplicated_timestamp_reports_row() {
        let dir = tempfile::tempdir().unwrap();
        let schema = CsvSchema::default();
        let mut header = vec!["frame".to_string(), "timestamp".to_string()];
        header.extend(schema.au_columns.iter().cloned());
        header.push("smile_intensity".into());
        let mut text = header.join(",");
        text.push('\n');
        for (i, t) in [(0, 0.0), (1, 0.02), (2, 0.02), (3, 0.06)] {
            let mut row = vec![i.to_string(), t.to_string()];
            row.extend(std::iter::repeat("0.0".to_string()).take(18));
            text.push_str(&row.join(","));
            text.push('\n');
        }
        let path = dir.path().join("dup.csv");
        fs::write(&path, text).unwrap();
        match load_au_csv(&path, &schema) {
            Err(Error::Data { row, .. }) => assert_eq!(row, 2),
            other => panic!("expected data error, got {other:?}"),
        }
    }

    #[test]
    fn nan_cell_is_a_data_error() {
        let dir = tempfile::tempdir().unwrap();
        let schema = CsvSchema::default();
        let mut header = vec!["frame".to_string(), "timestamp".to_string()];
        header.extend(schema.au_columns.iter().cloned());
        header.push("smile_intensity".into());
        let mut text = header.join(",");
        text.push('\n');
        for i in 0..3 {
            let mut row = vec![i.to_string(), format!("{}", i as f64 * 0.02)];
            row.extend(std::iter::repeat("0.0".to_string()).take(17));
            row.push(if i == 1 { "NaN".into() } else { "0.0".to_string() });
            text.push_str(&row.join(","));
            text.push('\n');
        }
        let path = dir.path().join("nan.csv");
        fs::write(&path, text).unwrap();
        match load_au_csv(&path, &schema) {
            Err(Error::Data { row, .. }) => assert_eq!(row, 1),
            other => panic!("expected data error, got {other:?}"),
        }
    }

    #[test]
    fn au_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_sample_csv(dir.path(), "orig.csv", 60);
        let schema = CsvSchema::default();
        let aus = load_au_csv(&path, &schema).unwrap();
        let copy = dir.path().join("copy.csv");
        write_au_csv(&copy, &aus, &schema).unwrap();
        let again = load_au_csv(&copy, &schema).unwrap();
        for (name, series) in aus.iter() {
            assert_eq!(series.values(), again.signal(name).unwrap().values());
        }
        assert_eq!(aus.label(), again.label());
        assert_eq!(aus.subject(), again.subject());
    }

    #[test]
    fn feature_cache_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let catalog = FeatureCatalog::au_wise(&FeatureConfig::default()).unwrap();
        let dim = catalog.len();
        let mut values = Vec::with_capacity(dim);
        let mut x = 0.1234567890123_f64;
        for _ in 0..dim {
            x = (x * 1.000000001).sin() + 0.5;
            values.push(x * 1e-3);
        }
        let records = vec![FeatureRecord {
            sequence_id: "seq".into(),
            subject: Some("s1".into()),
            label: Label::Posed,
            frames: 1,
            values: values.clone(),
        }];
        let path = dir.path().join("au_wise.features.csv");
        write_feature_cache(&path, &catalog, &records).unwrap();
        let (cat2, recs2) = read_feature_cache(&path).unwrap();
        assert_eq!(cat2.hash(), catalog.hash());
        assert_eq!(recs2.len(), 1);
        assert_eq!(recs2[0].values, values);
        assert_eq!(recs2[0].label, Label::Posed);
        assert_eq!(recs2[0].subject.as_deref(), Some("s1"));
    }

    #[test]
    fn tampered_sidecar_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let catalog = FeatureCatalog::deep(4);
        let records = vec![FeatureRecord {
            sequence_id: "seq".into(),
            subject: None,
            label: Label::Unlabeled,
            frames: 1,
            values: vec![1.0, 2.0, 3.0, 4.0],
        }];
        let path = dir.path().join("deep.features.csv");
        write_feature_cache(&path, &catalog, &records).unwrap();
        let sidecar = path.with_extension("catalog");
        let mut text = fs::read_to_string(&sidecar).unwrap();
        text.push_str("extra_feature\n");
        fs::write(&sidecar, text).unwrap();
        assert!(matches!(read_feature_cache(&path), Err(Error::Load(_))));
    }
}
