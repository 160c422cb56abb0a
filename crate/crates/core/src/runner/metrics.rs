use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::Result;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordKind {
    Session,
    Eval,
}

/// One line of the metrics stream. True returns are evaluator-only.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricsRecord {
    pub kind: RecordKind,
    pub step: usize,
    pub session: usize,
    pub labels_used: usize,
    pub eval_return: Option<f64>,
    pub heldout_accuracy: Option<f64>,
    pub labeled_accuracy: Option<f64>,
    pub retained_fraction: Option<f64>,
    pub reward_loss: Option<f64>,
    pub critic_loss: Option<f64>,
    pub actor_loss: Option<f64>,
}

impl MetricsRecord {
    pub fn new(kind: RecordKind, step: usize, session: usize, labels_used: usize) -> Self {
        MetricsRecord {
            kind,
            step,
            session,
            labels_used,
            eval_return: None,
            heldout_accuracy: None,
            labeled_accuracy: None,
            retained_fraction: None,
            reward_loss: None,
            critic_loss: None,
            actor_loss: None,
        }
    }
}

/// Line-delimited JSON writer.
pub struct MetricsSink {
    out: BufWriter<File>,
}

impl MetricsSink {
    pub fn create(path: &Path) -> Result<Self> {
        Ok(MetricsSink {
            out: BufWriter::new(File::create(path)?),
        })
    }

    pub fn write(&mut self, rec: &MetricsRecord) -> Result<()> {
        serde_json::to_writer(&mut self.out, rec).map_err(std::io::Error::from)?;
        self.out.write_all(b"\n")?;
        self.out.flush()?;
        Ok(())
    }
}

/// Writes rows of equal length as CSV, quoting fields that need it.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    let line = |fields: &mut dyn Iterator<Item = &str>| -> String {
        fields
            .map(|f| {
                if f.contains([',', '"', '\n']) {
                    format!("\"{}\"", f.replace('"', "\"\""))
                } else {
                    f.to_string()
                }
            })
            .collect::<Vec<_>>()
            .join(",")
    };
    writeln!(out, "{}", line(&mut header.iter().copied()))?;
    for r in rows {
        writeln!(out, "{}", line(&mut r.iter().map(String::as_str)))?;
    }
    out.flush()?;
    Ok(())
}
