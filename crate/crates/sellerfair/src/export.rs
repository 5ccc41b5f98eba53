//! File outputs: per-round traces, histograms and JSON summaries.

use std::io::Write;
use std::path::Path;

use sellerfair_core::engine::{RoundObserver, RoundRecord};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sweep::HistogramBin;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t: u64,
    pub seller: usize,
    pub item: usize,
    pub clicked: bool,
    pub purchased: bool,
    pub revenue: f64,
    pub explored: bool,
    /// λ of the displayed seller after the round's dual step.
    pub lambda: f64,
}

/// Observer collecting one [`TraceRow`] per round.
#[derive(Debug, Default)]
pub struct TraceRecorder {
    pub rows: Vec<TraceRow>,
}

impl RoundObserver for TraceRecorder {
    fn on_round(&mut self, record: &RoundRecord<'_>) {
        let seller = record.displayed.seller;
        self.rows.push(TraceRow {
            t: record.round,
            seller,
            item: record.displayed.item,
            clicked: record.event.clicked,
            purchased: record.event.purchased,
            revenue: record.event.revenue,
            explored: record.explored,
            lambda: record.lambda_after[seller],
        });
    }
}

impl TraceRecorder {
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut csv = csv::Writer::from_writer(writer);
        for row in &self.rows {
            csv.serialize(row)?;
        }
        csv.flush().map_err(|e| Error::io("trace csv", e))?;
        Ok(())
    }
}

/// `bin,lower,upper,count`; the overflow bin has an empty `upper`.
pub fn write_histogram_csv<W: Write>(bins: &[HistogramBin], writer: W) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    csv.write_record(["bin", "lower", "upper", "count"])?;
    for (i, b) in bins.iter().enumerate() {
        let upper = b.upper.map(|u| u.to_string()).unwrap_or_default();
        csv.write_record([i.to_string(), b.lower.to_string(), upper, b.count.to_string()])?;
    }
    csv.flush().map_err(|e| Error::io("histogram csv", e))?;
    Ok(())
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Creates `path` and hands a buffered writer to `write`.
pub fn write_file(path: &Path, write: impl FnOnce(&mut std::io::BufWriter<std::fs::File>) -> Result<()>) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    write(&mut out)?;
    out.flush().map_err(|e| Error::io(path, e))
}
