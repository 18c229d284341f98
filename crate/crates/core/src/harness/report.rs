//! Run directories, report files and cross-seed summaries.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::data::Split;
use super::record::RunRecord;
use super::runner::RunOutput;
use crate::calib::{
    class_profiles, reliability_bins, reliability_csv, top_k_profile, CalibReport, PredictionSet,
};
use crate::error::{LdlError, Result};
use crate::nn::{save_model, Matrix, Network};

pub const RECORD_FILE: &str = "record.json";
pub const MODEL_FILE: &str = "student.ldlm";
pub const TEST_LOGITS_FILE: &str = "test_logits.json";
pub const TEST_LABELS_FILE: &str = "test_labels.json";
pub const VAL_LOGITS_FILE: &str = "val_logits.json";
pub const VAL_LABELS_FILE: &str = "val_labels.json";

/// Classes listed per row of the top-k profile export.
pub const TOP_K: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Json,
}

fn matrix_rows(m: &Matrix<f64>) -> Vec<Vec<f64>> {
    m.iter_rows().map(<[f64]>::to_vec).collect()
}

/// Parse a JSON array of equally long numeric arrays.
pub fn matrix_from_rows(rows: Vec<Vec<f64>>) -> Result<Matrix<f64>> {
    let k = rows.first().map_or(0, Vec::len);
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != k) {
        return Err(LdlError::dim(format!("logit row {i}"), k, r.len()));
    }
    Ok(Matrix::new(rows.len(), k, rows.into_iter().flatten().collect()))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    if !path.exists() {
        return Err(LdlError::NotFound(path.to_path_buf()));
    }
    Ok(serde_json::from_slice(&std::fs::read(path)?)?)
}

pub fn read_logits(path: &Path) -> Result<Matrix<f64>> {
    matrix_from_rows(read_json(path)?)
}

pub fn read_labels(path: &Path) -> Result<Vec<usize>> {
    read_json(path)
}

/// Write record, model, logits and labels of one run into `dir`.
pub fn save_run(out: &RunOutput, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(RECORD_FILE), serde_json::to_vec_pretty(&out.record)?)?;
    save_model(&out.model, &dir.join(MODEL_FILE))?;
    std::fs::write(
        dir.join(TEST_LOGITS_FILE),
        serde_json::to_vec(&matrix_rows(&out.test_logits))?,
    )?;
    std::fs::write(
        dir.join(VAL_LOGITS_FILE),
        serde_json::to_vec(&matrix_rows(&out.val_logits))?,
    )?;
    std::fs::write(dir.join(TEST_LABELS_FILE), serde_json::to_vec(&out.test_labels)?)?;
    std::fs::write(dir.join(VAL_LABELS_FILE), serde_json::to_vec(&out.val_labels)?)?;
    Ok(())
}

pub fn load_record(dir: &Path) -> Result<RunRecord> {
    read_json(&dir.join(RECORD_FILE))
}

/// Run directories below `root` (or `root` itself when it is one), sorted.
pub fn find_runs(root: &Path) -> Result<Vec<PathBuf>> {
    if !root.exists() {
        return Err(LdlError::NotFound(root.to_path_buf()));
    }
    if root.join(RECORD_FILE).exists() {
        return Ok(vec![root.to_path_buf()]);
    }
    let mut runs = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir)? {
            let path = entry?.path();
            if path.is_dir() {
                if path.join(RECORD_FILE).exists() {
                    runs.push(path);
                } else {
                    stack.push(path);
                }
            }
        }
    }
    runs.sort();
    if runs.is_empty() {
        return Err(LdlError::NotFound(root.join(RECORD_FILE)));
    }
    Ok(runs)
}

pub const CLASS_PROFILE_HEADER: &str = "class,f1,mean_confidence";
pub const TOPK_HEADER: &str = "class,rank,other_class,mean_prob";
pub const CLASS_LOSS_HEADER: &str = "epoch,class,train_loss,val_loss";

pub fn class_profile_csv(preds: &PredictionSet) -> String {
    let mut out = format!("{CLASS_PROFILE_HEADER}\n");
    for p in class_profiles(preds) {
        let conf = p.mean_confidence.map_or_else(String::new, |c| format!("{c:.6}"));
        let _ = writeln!(out, "{},{:.6},{conf}", p.class, p.f1);
    }
    out
}

pub fn topk_csv(preds: &PredictionSet, k: usize) -> Result<String> {
    let k = k.min(preds.classes());
    let mut out = format!("{TOPK_HEADER}\n");
    for class in 0..preds.classes() {
        if !preds.labels().contains(&class) {
            continue;
        }
        for (rank, (other, p)) in top_k_profile(preds, class, k)?.into_iter().enumerate() {
            let _ = writeln!(out, "{class},{},{other},{p:.6}", rank + 1);
        }
    }
    Ok(out)
}

pub fn class_loss_csv(record: &RunRecord) -> String {
    let mut out = format!("{CLASS_LOSS_HEADER}\n");
    for (epoch, c) in record.class_losses.iter().enumerate() {
        for (class, (t, v)) in c.train.iter().zip(&c.val).enumerate() {
            let _ = writeln!(out, "{epoch},{class},{t:.6},{v:.6}");
        }
    }
    out
}

/// Penultimate activations of the samples whose class is in `classes`.
/// An empty class list yields the header only.
pub fn export_penultimate(model: &Network<f32>, split: &Split, classes: &[usize]) -> Result<String> {
    let width = model.arch().penultimate_width()?;
    let mut out = String::from("sample_id,true_class");
    for d in 0..width {
        let _ = write!(out, ",d{d}");
    }
    out.push('\n');
    let idx: Vec<usize> = (0..split.len())
        .filter(|&i| classes.contains(&split.labels[i]))
        .collect();
    for chunk in idx.chunks(512) {
        let pen = model.forward_eval(&split.x.gather(chunk))?.penultimate;
        for (row, &i) in pen.iter_rows().zip(chunk) {
            let _ = write!(out, "{i},{}", split.labels[i]);
            for v in row {
                let _ = write!(out, ",{:.6}", *v as f64);
            }
            out.push('\n');
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JsonReport {
    pub record: RunRecord,
    pub test: CalibReport,
    pub reliability: crate::calib::ReliabilityBins,
    pub class_profiles: Vec<crate::calib::ClassProfile>,
}

/// Write report files for one run directory into `<run>/report/`.
pub fn export_report(run_dir: &Path, format: ReportFormat) -> Result<Vec<PathBuf>> {
    let record = load_record(run_dir)?;
    let logits = read_logits(&run_dir.join(TEST_LOGITS_FILE))?;
    let labels = read_labels(&run_dir.join(TEST_LABELS_FILE))?;
    let preds = PredictionSet::from_logits(&logits, labels, 1.0)?;
    let rel = reliability_bins(&preds, record.bins)?;
    let dir = run_dir.join("report");
    std::fs::create_dir_all(&dir)?;
    let mut written = Vec::new();
    let mut put = |name: &str, body: String| -> Result<()> {
        let p = dir.join(name);
        std::fs::write(&p, body)?;
        written.push(p);
        Ok(())
    };
    put("report.json", serde_json::to_string_pretty(&record.test)?)?;
    match format {
        ReportFormat::Csv => {
            put("reliability.csv", reliability_csv(&rel))?;
            put("class_profiles.csv", class_profile_csv(&preds))?;
            put("topk.csv", topk_csv(&preds, TOP_K)?)?;
            put("class_losses.csv", class_loss_csv(&record))?;
        }
        ReportFormat::Json => {
            let full = JsonReport {
                test: record.test.clone(),
                reliability: rel,
                class_profiles: class_profiles(&preds),
                record,
            };
            put("full_report.json", serde_json::to_string_pretty(&full)?)?;
        }
    }
    Ok(written)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Sample standard deviation; 0 for a single run.
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> MeanStd {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        MeanStd { mean, std }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mode: String,
    pub augment: String,
    pub runs: usize,
    pub accuracy: MeanStd,
    pub ece: MeanStd,
    pub uce: MeanStd,
    pub nll: MeanStd,
    pub brier: MeanStd,
}

/// Mean ± std over seeds, grouped by (mode, augment).
pub fn summarize(records: &[RunRecord]) -> Vec<Summary> {
    let mut groups: BTreeMap<(String, String), Vec<&RunRecord>> = BTreeMap::new();
    for r in records {
        groups
            .entry((r.mode.clone(), r.augment.clone()))
            .or_default()
            .push(r);
    }
    groups
        .into_iter()
        .map(|((mode, augment), rs)| {
            let stat =
                |f: fn(&CalibReport) -> f64| MeanStd::of(&rs.iter().map(|r| f(&r.test)).collect::<Vec<_>>());
            Summary {
                mode,
                augment,
                runs: rs.len(),
                accuracy: stat(|t| t.accuracy),
                ece: stat(|t| t.ece),
                uce: stat(|t| t.uce),
                nll: stat(|t| t.nll),
                brier: stat(|t| t.brier),
            }
        })
        .collect()
}

pub const SUMMARY_HEADER: &str =
    "mode,augment,runs,accuracy_mean,accuracy_std,ece_mean,ece_std,uce_mean,uce_std,nll_mean,nll_std,brier_mean,brier_std";

pub fn summary_csv(summaries: &[Summary]) -> String {
    let mut out = format!("{SUMMARY_HEADER}\n");
    for s in summaries {
        let _ = write!(out, "{},{},{}", s.mode, s.augment, s.runs);
        for m in [s.accuracy, s.ece, s.uce, s.nll, s.brier] {
            let _ = write!(out, ",{:.6},{:.6}", m.mean, m.std);
        }
        out.push('\n');
    }
    out
}
