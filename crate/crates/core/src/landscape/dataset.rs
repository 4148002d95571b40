use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

/// Labelled samples, row-major features.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    n_features: usize,
    labels: Vec<usize>,
    n_classes: usize,
}

impl Dataset {
    pub fn new(features: Vec<f64>, n_features: usize, labels: Vec<usize>, n_classes: usize) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if n_features == 0 || features.len() != labels.len() * n_features {
            return Err(crate::error::invalid(format!(
                "feature matrix of {} values does not hold {} rows of {} features",
                features.len(),
                labels.len(),
                n_features
            )));
        }
        if let Some(sample) = labels.iter().position(|&l| l >= n_classes) {
            return Err(Error::LabelOutOfRange { label: labels[sample], n_classes, sample });
        }
        Ok(Self { features, n_features, labels, n_classes })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn sample(&self, i: usize) -> (&[f64], usize) {
        let row = &self.features[i * self.n_features..(i + 1) * self.n_features];
        (row, self.labels[i])
    }

    /// Writes the dataset in the `f0,...,fk,label` CSV layout read by [`load_dataset`].
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path.as_ref()).map_err(csv_io)?;
        let mut header: Vec<String> = (0..self.n_features).map(|k| format!("f{k}")).collect();
        header.push("label".into());
        w.write_record(&header).map_err(csv_io)?;
        for i in 0..self.len() {
            let (x, y) = self.sample(i);
            let mut rec: Vec<String> = x.iter().map(|v| format!("{v:?}")).collect();
            rec.push(y.to_string());
            w.write_record(&rec).map_err(csv_io)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn csv_io(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// Reads a CSV with header `f0,...,fk,label`. The class count is inferred as
/// `max(label) + 1`, and at least 2.
pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    load_dataset_with_classes(path, None)
}

/// As [`load_dataset`], validating labels against a known class count.
pub fn load_dataset_with_classes(path: impl AsRef<Path>, n_classes: Option<usize>) -> Result<Dataset> {
    let path = path.as_ref();
    let parse_err = |line: u64, message: String| Error::Parse { path: path.to_path_buf(), line, message };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => csv_io(e),
            _ => parse_err(1, e.to_string()),
        })?;
    let header = reader.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
    let n_cols = header.len();
    if n_cols < 2 || header.get(n_cols - 1) != Some("label") {
        return Err(parse_err(1, "header must be `f0,...,fk,label`".into()));
    }
    for (k, name) in header.iter().take(n_cols - 1).enumerate() {
        if name != format!("f{k}") {
            return Err(parse_err(1, format!("expected column `f{k}`, found `{name}`")));
        }
    }
    let n_features = n_cols - 1;
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            parse_err(line, e.to_string())
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        for (k, field) in record.iter().take(n_features).enumerate() {
            let v: f64 = field
                .parse()
                .map_err(|_| parse_err(line, format!("feature f{k} is not a number: `{field}`")))?;
            if !v.is_finite() {
                return Err(parse_err(line, format!("feature f{k} is not finite")));
            }
            features.push(v);
        }
        let raw = &record[n_features];
        let label: usize = raw
            .parse()
            .map_err(|_| parse_err(line, format!("label is not a non-negative integer: `{raw}`")))?;
        labels.push(label);
    }
    if labels.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let n_classes = n_classes.unwrap_or_else(|| (labels.iter().copied().max().unwrap_or(0) + 1).max(2));
    Dataset::new(features, n_features, labels, n_classes)
}

/// Two interleaved half circles with Gaussian jitter; labels alternate 0/1
/// so the classes are balanced.
pub fn two_moons(n_samples: usize, noise: f64, seed: u64) -> Result<Dataset> {
    if n_samples == 0 {
        return Err(Error::EmptyDataset);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let jitter = Normal::new(0.0, noise.max(0.0)).map_err(|e| crate::error::invalid(e.to_string()))?;
    let per_class = n_samples.div_ceil(2);
    let mut features = Vec::with_capacity(2 * n_samples);
    let mut labels = Vec::with_capacity(n_samples);
    for i in 0..n_samples {
        let label = i % 2;
        let t = std::f64::consts::PI * (i / 2) as f64 / (per_class.max(2) - 1) as f64;
        let (x, y) = if label == 0 {
            (t.cos(), t.sin())
        } else {
            (1.0 - t.cos(), 0.5 - t.sin())
        };
        features.push(x + jitter.sample(&mut rng));
        features.push(y + jitter.sample(&mut rng));
        labels.push(label);
    }
    Dataset::new(features, 2, labels, 2)
}
