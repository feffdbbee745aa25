use std::fs::{File, OpenOptions};
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};

/// Provenance attached to every batch.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BatchMeta {
    pub seed: u64,
    pub sampler: String,
    pub prior: String,
    pub tilt: String,
    pub wall_time: f64,
    /// Chains dropped because an iterate became non-finite.
    pub diverged: usize,
    pub n_steps: usize,
}

/// `n × d` samples stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleBatch {
    n: usize,
    d: usize,
    data: Vec<f64>,
    pub meta: BatchMeta,
}

impl SampleBatch {
    pub fn new(n: usize, d: usize, data: Vec<f64>, meta: BatchMeta) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(Error::InvalidParameter("a batch needs at least one sample and one dimension".into()));
        }
        if data.len() != n * d {
            return Err(Error::DimensionMismatch { expected: n * d, got: data.len() });
        }
        ensure_finite(&data, "sample batch")?;
        Ok(Self { n, d, data, meta })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::InvalidParameter("ragged rows".into()));
        }
        Self::new(rows.len(), d, rows.concat(), BatchMeta::default())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> std::slice::Chunks<'_, f64> {
        self.data.chunks(self.d)
    }

    pub fn with_meta(mut self, meta: BatchMeta) -> Self {
        self.meta = meta;
        self
    }

    pub fn mean(&self) -> DVector<f64> {
        let mut m = DVector::zeros(self.d);
        for r in self.rows() {
            for (mi, ri) in m.iter_mut().zip(r) {
                *mi += ri;
            }
        }
        m / self.n as f64
    }

    /// Unbiased sample covariance.
    pub fn covariance(&self) -> DMatrix<f64> {
        let m = self.mean();
        let mut c = DMatrix::zeros(self.d, self.d);
        for r in self.rows() {
            let v = DVector::from_column_slice(r) - &m;
            c.ger(1.0, &v, &v, 1.0);
        }
        c / (self.n.max(2) - 1) as f64
    }

    /// `⟨xᵢ, θ⟩` for every sample.
    pub fn project(&self, theta: &[f64]) -> Vec<f64> {
        self.rows().map(|r| r.iter().zip(theta).map(|(a, b)| a * b).sum()).collect()
    }

    /// Write rows as CSV with header `x0..x{d-1}`; when appending to an
    /// existing non-empty file the header is not repeated.
    pub fn write_csv(&self, path: &Path, append: bool) -> Result<()> {
        let exists = append && path.metadata().map(|m| m.len() > 0).unwrap_or(false);
        let file = OpenOptions::new()
            .create(true)
            .write(true)
            .append(append)
            .truncate(!append)
            .open(path)?;
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(BufWriter::new(file));
        if !exists {
            w.write_record((0..self.d).map(|j| format!("x{j}")))?;
        }
        for r in self.rows() {
            w.write_record(r.iter().map(|v| format!("{v:e}")))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_reader(BufReader::new(File::open(path)?));
        let d = r.headers()?.len();
        let mut data = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            if rec.len() != d {
                return Err(Error::DimensionMismatch { expected: d, got: rec.len() });
            }
            for f in rec.iter() {
                data.push(
                    f.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::InvalidParameter(format!("bad CSV value `{f}`: {e}")))?,
                );
            }
        }
        Self::new(data.len() / d.max(1), d, data, BatchMeta::default())
    }

    /// JSON sidecar with the batch metadata and shape.
    pub fn write_sidecar(&self, path: &Path) -> Result<()> {
        #[derive(Serialize)]
        struct Sidecar<'a> {
            n: usize,
            d: usize,
            #[serde(flatten)]
            meta: &'a BatchMeta,
        }
        let mut f = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(&mut f, &Sidecar { n: self.n, d: self.d, meta: &self.meta })?;
        f.flush()?;
        Ok(())
    }
}
