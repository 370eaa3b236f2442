//! Files written into the output directory.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use diffdata::diffscan::{BaselineStats, ZScoreTable};
use serde::Serialize;
use serde_json::{Map, Value};

/// One row of `result.csv`; summary rows have no z-score.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub chunk: String,
    pub accuracy: f64,
    pub zscore: Option<f64>,
}

impl ResultRow {
    pub fn summary(label: &str, accuracy: f64) -> Self {
        ResultRow {
            chunk: label.into(),
            accuracy,
            zscore: None,
        }
    }
}

/// Chunk rows of a z-table, labels prefixed with `prefix` when non-empty.
pub fn table_rows(table: &ZScoreTable, prefix: &str) -> Vec<ResultRow> {
    table
        .entries
        .iter()
        .map(|e| ResultRow {
            chunk: if prefix.is_empty() {
                e.label.clone()
            } else {
                format!("{prefix}/{}", e.label)
            },
            accuracy: e.accuracy,
            zscore: Some(e.z),
        })
        .collect()
}

/// One row of `plot.csv`.
#[derive(Debug, Clone, Serialize)]
pub struct PlotPoint {
    pub x: f64,
    pub y: f64,
    pub series: String,
}

impl PlotPoint {
    pub fn new(x: f64, y: f64, series: impl Into<String>) -> Self {
        PlotPoint {
            x,
            y,
            series: series.into(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Timing {
    pub stage: String,
    pub seconds: f64,
}

/// Collects outputs and timings for `report.json`.
#[derive(Debug)]
pub struct Sink {
    pub dir: PathBuf,
    pub files: Vec<String>,
    pub outputs: Map<String, Value>,
    pub timings: Vec<Timing>,
}

impl Sink {
    pub fn new(dir: PathBuf) -> Result<Self> {
        fs::create_dir_all(&dir)
            .with_context(|| format!("cannot create output directory {}", dir.display()))?;
        Ok(Sink {
            dir,
            files: Vec::new(),
            outputs: Map::new(),
            timings: Vec::new(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn timed<T>(&mut self, stage: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.timings.push(Timing {
            stage: stage.into(),
            seconds: start.elapsed().as_secs_f64(),
        });
        out
    }

    pub fn output<T: Serialize>(&mut self, key: &str, value: &T) -> Result<()> {
        self.outputs
            .insert(key.into(), serde_json::to_value(value)?);
        Ok(())
    }

    fn create(&mut self, name: &str) -> Result<BufWriter<File>> {
        let path = self.path(name);
        let f = File::create(&path).with_context(|| format!("cannot write {}", path.display()))?;
        if !self.files.iter().any(|n| n == name) {
            self.files.push(name.into());
        }
        Ok(BufWriter::new(f))
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut w = self.create(name)?;
        serde_json::to_writer_pretty(&mut w, value)?;
        std::io::Write::write_all(&mut w, b"\n")?;
        Ok(())
    }

    pub fn result_csv(&mut self, rows: &[ResultRow]) -> Result<()> {
        let mut w = csv::Writer::from_writer(self.create("result.csv")?);
        w.write_record(["chunk", "accuracy", "zscore"])?;
        for r in rows {
            let z = r.zscore.map(|z| z.to_string()).unwrap_or_default();
            w.write_record([r.chunk.clone(), r.accuracy.to_string(), z])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn rows<T: Serialize>(&mut self, name: &str, rows: &[T]) -> Result<()> {
        let mut w = csv::Writer::from_writer(self.create(name)?);
        for r in rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn plot(&mut self, points: &[PlotPoint]) -> Result<()> {
        if points.is_empty() {
            return Ok(());
        }
        self.rows("plot.csv", points)
    }
}

/// Plot series for a chunk curve with optional full-data and baseline bands.
pub fn chunk_plot(
    table: &ZScoreTable,
    series: &str,
    full: Option<f64>,
    baseline: Option<&BaselineStats>,
) -> Vec<PlotPoint> {
    let mut pts = Vec::new();
    for (i, e) in table.entries.iter().enumerate() {
        let x = (i + 1) as f64;
        pts.push(PlotPoint::new(x, e.accuracy, series));
        if let Some(a) = full {
            pts.push(PlotPoint::new(x, a, "full"));
        }
        if let Some(b) = baseline {
            pts.push(PlotPoint::new(x, b.mean, "baseline"));
            pts.push(PlotPoint::new(x, b.mean - b.std, "baseline-minus-std"));
            pts.push(PlotPoint::new(x, b.mean + b.std, "baseline-plus-std"));
        }
    }
    pts
}

/// Rows of a `chunk,accuracy[,zscore]` file, skipping summary rows.
pub fn read_result_csv(path: &Path) -> Result<(Vec<String>, Vec<f64>, Option<f64>)> {
    let mut r =
        csv::Reader::from_path(path).with_context(|| format!("cannot read {}", path.display()))?;
    let mut labels = Vec::new();
    let mut acc = Vec::new();
    let mut full = None;
    for (i, rec) in r.records().enumerate() {
        let rec = rec.with_context(|| format!("{}: bad row {}", path.display(), i + 2))?;
        let label = rec.get(0).unwrap_or_default().trim().to_string();
        let value: f64 = rec
            .get(1)
            .unwrap_or_default()
            .trim()
            .parse()
            .with_context(|| {
                format!("{}: row {} has no numeric accuracy", path.display(), i + 2)
            })?;
        match label.as_str() {
            "full" => full = Some(value),
            "baseline" => {}
            _ => {
                labels.push(label);
                acc.push(value);
            }
        }
    }
    Ok((labels, acc, full))
}
