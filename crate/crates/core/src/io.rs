//! CSV datasets and ground-truth tables, model JSON documents, and report files.
//!
//! Dataset columns: `id`, `time`, `event`, `group`, `x0..x{p-1}`, optionally
//! followed by the truth columns `w1, w2, ws, wc, latent_time, latent_cause,
//! censor_time`. Only `time` and `event` are mandatory on load; a missing
//! `id` defaults to the 0-based row index and a missing `group` to 0.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{EventCode, Subject, SurvivalDataset};
use crate::error::{Error, Result};
use crate::estimators::{
    AalenJohansenModel, FitDiagnostics, FittedCox, FittedFineGray, FittedModel, KaplanMeierModel,
    ModelKind,
};
use crate::sim::GroundTruthRow;
use crate::step::StepFunction;

pub const TRUTH_COLUMNS: [&str; 7] = ["w1", "w2", "ws", "wc", "latent_time", "latent_cause", "censor_time"];
pub const MODEL_SCHEMA_VERSION: u32 = 1;

/// 17 significant digits: every finite double survives a write/parse cycle.
pub fn fmt_real(v: f64) -> String {
    format!("{v:.16e}")
}

fn csv_error(path: &Path, source: csv::Error) -> Error {
    Error::Csv {
        path: path.to_path_buf(),
        source,
    }
}

struct Header {
    index: HashMap<String, usize>,
}

impl Header {
    fn get(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    fn require(&self, path: &Path, name: &str) -> Result<usize> {
        self.get(name).ok_or_else(|| Error::MissingColumn {
            path: path.to_path_buf(),
            column: name.to_string(),
        })
    }

    /// Number of contiguous `x0, x1, ...` columns.
    fn covariate_count(&self) -> usize {
        (0..).take_while(|k| self.index.contains_key(&format!("x{k}"))).count()
    }
}

fn read_records(path: &Path) -> Result<(Header, Vec<csv::StringRecord>)> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Err(Error::EmptyFile(path.to_path_buf()));
    }
    let index = headers
        .iter()
        .enumerate()
        .map(|(i, h)| (h.to_string(), i))
        .collect();
    let records = reader
        .records()
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| csv_error(path, e))?;
    if records.is_empty() {
        return Err(Error::EmptyFile(path.to_path_buf()));
    }
    Ok((Header { index }, records))
}

struct Cells<'a> {
    path: &'a Path,
    record: &'a csv::StringRecord,
    /// 1-based data row number.
    row: usize,
}

impl Cells<'_> {
    fn bad(&self, column: &str, message: String) -> Error {
        Error::BadValue {
            path: self.path.to_path_buf(),
            row: self.row,
            column: column.to_string(),
            message,
        }
    }

    fn raw(&self, col: usize, name: &str) -> Result<&str> {
        self.record
            .get(col)
            .ok_or_else(|| self.bad(name, "missing field".into()))
    }

    fn real(&self, col: usize, name: &str) -> Result<f64> {
        let s = self.raw(col, name)?;
        s.parse::<f64>()
            .map_err(|_| self.bad(name, format!("`{s}` is not a number")))
    }

    fn code(&self, col: usize, name: &str) -> Result<u8> {
        let s = self.raw(col, name)?;
        s.parse::<u8>()
            .map_err(|_| self.bad(name, format!("`{s}` is not a non-negative integer code")))
    }
}

/// Loads a dataset; the number of competing risks is the largest event code.
pub fn load_dataset(path: impl AsRef<Path>, expected_p: Option<usize>) -> Result<SurvivalDataset> {
    let path = path.as_ref();
    let (header, records) = read_records(path)?;
    let time_col = header.require(path, "time")?;
    let event_col = header.require(path, "event")?;
    let id_col = header.get("id");
    let group_col = header.get("group");
    let p = header.covariate_count();
    if let Some(expected) = expected_p {
        if p < expected {
            return Err(Error::MissingColumn {
                path: path.to_path_buf(),
                column: format!("x{p}"),
            });
        }
    }
    let p = expected_p.unwrap_or(p);
    let cov_cols: Vec<usize> = (0..p).map(|k| header.get(&format!("x{k}")).unwrap()).collect();

    let mut subjects = Vec::with_capacity(records.len());
    for (i, record) in records.iter().enumerate() {
        let cells = Cells {
            path,
            record,
            row: i + 1,
        };
        let time = cells.real(time_col, "time")?;
        if !(time >= 0.0) || !time.is_finite() {
            return Err(cells.bad("time", format!("time {time} must be finite and non-negative")));
        }
        let event = cells.code(event_col, "event")?;
        let group = match group_col {
            Some(c) => {
                let g = cells.code(c, "group")?;
                if g > 1 {
                    return Err(cells.bad("group", format!("group {g} is not 0 or 1")));
                }
                g
            }
            None => 0,
        };
        let id = match id_col {
            Some(c) => cells.raw(c, "id")?.to_string(),
            None => i.to_string(),
        };
        let covariates = cov_cols
            .iter()
            .enumerate()
            .map(|(k, &c)| {
                let name = format!("x{k}");
                let v = cells.real(c, &name)?;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(cells.bad(&name, format!("covariate {v} is not finite")))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        subjects.push(Subject {
            id,
            covariates,
            group,
            time,
            event: EventCode(event),
        });
    }
    let n_risks = subjects.iter().map(|s| s.event.0).max().unwrap_or(0);
    SurvivalDataset::new(subjects, n_risks, p)
}

/// Reads the truth columns of a file written by [`save_dataset`] with truth.
pub fn load_truth(path: impl AsRef<Path>) -> Result<Vec<GroundTruthRow>> {
    let path = path.as_ref();
    let (header, records) = read_records(path)?;
    let id_col = header.require(path, "id")?;
    let group_col = header.require(path, "group")?;
    let cols: Vec<usize> = TRUTH_COLUMNS
        .iter()
        .map(|c| header.require(path, c))
        .collect::<Result<_>>()?;
    records
        .iter()
        .enumerate()
        .map(|(i, record)| {
            let cells = Cells {
                path,
                record,
                row: i + 1,
            };
            Ok(GroundTruthRow {
                id: cells.raw(id_col, "id")?.to_string(),
                group: cells.code(group_col, "group")?,
                w1: cells.real(cols[0], "w1")?,
                w2: cells.real(cols[1], "w2")?,
                ws: cells.real(cols[2], "ws")?,
                wc: cells.real(cols[3], "wc")?,
                latent_time: cells.real(cols[4], "latent_time")?,
                latent_cause: cells.code(cols[5], "latent_cause")?,
                censor_time: cells.real(cols[6], "censor_time")?,
            })
        })
        .collect()
}

pub fn save_dataset(data: &SurvivalDataset, truth: Option<&[GroundTruthRow]>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if let Some(rows) = truth {
        if rows.len() != data.len() {
            return Err(Error::InvalidInput(format!(
                "truth has {} rows but data has {} subjects",
                rows.len(),
                data.len()
            )));
        }
    }
    let mut writer = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    let mut header: Vec<String> = ["id", "time", "event", "group"].map(String::from).to_vec();
    header.extend((0..data.n_covariates()).map(|k| format!("x{k}")));
    if truth.is_some() {
        header.extend(TRUTH_COLUMNS.map(String::from));
    }
    writer.write_record(&header).map_err(|e| csv_error(path, e))?;
    let mut record: Vec<String> = Vec::with_capacity(header.len());
    for (i, s) in data.subjects().iter().enumerate() {
        record.clear();
        record.push(s.id.clone());
        record.push(fmt_real(s.time));
        record.push(s.event.0.to_string());
        record.push(s.group.to_string());
        record.extend(s.covariates.iter().map(|&v| fmt_real(v)));
        if let Some(rows) = truth {
            let r = &rows[i];
            record.extend([r.w1, r.w2, r.ws, r.wc, r.latent_time].map(fmt_real));
            record.push(r.latent_cause.to_string());
            record.push(fmt_real(r.censor_time));
        }
        writer.write_record(&record).map_err(|e| csv_error(path, e))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}

/// How a model's development portion was drawn, so evaluation can recover
/// the held-out subjects.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitInfo {
    pub seed: u64,
    pub dev_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ModelMeta {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    convergence: Option<FitDiagnostics>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    censoring_survival: Option<StepFunction>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    split: Option<SplitInfo>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ModelDocument {
    schema_version: u32,
    model_kind: String,
    cause: u8,
    beta: Vec<f64>,
    baseline: StepFunction,
    meta: ModelMeta,
}

#[derive(Deserialize)]
struct DocumentHeader {
    schema_version: u32,
    model_kind: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedModel {
    pub model: FittedModel,
    pub split: Option<SplitInfo>,
}

fn revalidate(step: StepFunction) -> Result<StepFunction> {
    let checked = StepFunction::new(
        step.initial_value(),
        step.jump_times().iter().copied().zip(step.values().iter().copied()),
    )?;
    if checked.jump_times() != step.jump_times() {
        return Err(Error::InvalidInput("step function jump times are not increasing".into()));
    }
    if step.values().iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("step function has non-finite values".into()));
    }
    Ok(checked)
}

pub fn model_to_json(model: &FittedModel, split: Option<SplitInfo>) -> Result<String> {
    let (baseline, censoring_survival) = match model {
        FittedModel::Cox(m) => (m.baseline_cumhaz.clone(), None),
        FittedModel::FineGray(m) => (m.baseline_cum_subhaz.clone(), Some(m.censoring_survival.clone())),
        FittedModel::Km(m) => (m.survival.clone(), None),
        FittedModel::Aj(m) => (m.cif.clone(), None),
    };
    let doc = ModelDocument {
        schema_version: MODEL_SCHEMA_VERSION,
        model_kind: model.kind().name().to_string(),
        cause: crate::estimators::CifModel::cause(model),
        beta: model.beta().to_vec(),
        baseline,
        meta: ModelMeta {
            convergence: model.diagnostics().cloned(),
            censoring_survival,
            split,
        },
    };
    Ok(serde_json::to_string_pretty(&doc)? + "\n")
}

pub fn model_from_json(text: &str) -> Result<LoadedModel> {
    let header: DocumentHeader = serde_json::from_str(text)?;
    if header.schema_version != MODEL_SCHEMA_VERSION {
        return Err(Error::SchemaVersion {
            found: header.schema_version,
            expected: MODEL_SCHEMA_VERSION,
        });
    }
    let kind: ModelKind = header.model_kind.parse()?;
    let doc: ModelDocument = serde_json::from_str(text)?;
    let cause = EventCode(doc.cause);
    let baseline = revalidate(doc.baseline)?;
    let convergence = || {
        doc.meta.convergence.clone().ok_or_else(|| {
            Error::InvalidInput(format!("{kind} model is missing its convergence record"))
        })
    };
    let model = match kind {
        ModelKind::Cox => FittedModel::Cox(FittedCox {
            beta: doc.beta.clone(),
            baseline_cumhaz: baseline,
            cause,
            convergence: convergence()?,
        }),
        ModelKind::FineGray => FittedModel::FineGray(FittedFineGray {
            beta: doc.beta.clone(),
            baseline_cum_subhaz: baseline,
            cause,
            censoring_survival: revalidate(doc.meta.censoring_survival.clone().ok_or_else(|| {
                Error::InvalidInput("finegray model is missing its censoring distribution".into())
            })?)?,
            convergence: convergence()?,
        }),
        ModelKind::Km => FittedModel::Km(KaplanMeierModel {
            cause,
            survival: baseline,
        }),
        ModelKind::Aj => FittedModel::Aj(AalenJohansenModel { cause, cif: baseline }),
    };
    Ok(LoadedModel {
        model,
        split: doc.meta.split,
    })
}

pub fn save_model(model: &FittedModel, split: Option<SplitInfo>, path: impl AsRef<Path>) -> Result<()> {
    write_text(path, &model_to_json(model, split)?)
}

pub fn load_model(path: impl AsRef<Path>) -> Result<LoadedModel> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    model_from_json(&text)
}

pub fn write_text(path: impl AsRef<Path>, text: &str) -> Result<()> {
    let path = path.as_ref();
    let mut file = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
    file.write_all(text.as_bytes())
        .and_then(|_| file.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize + ?Sized>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    write_text(path, &(serde_json::to_string_pretty(value)? + "\n"))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// Writes a header and string rows as CSV.
pub fn write_csv(path: impl AsRef<Path>, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let path = path.as_ref();
    let mut writer = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    writer.write_record(header).map_err(|e| csv_error(path, e))?;
    for row in rows {
        writer.write_record(row).map_err(|e| csv_error(path, e))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}
