//! Datasets: synthetic two-moons, CSV loading, splitting and minibatching.

use std::path::Path;

use crate::error::{Error, Result};
use crate::rng::CounterRng;

/// Row-major feature matrix with one label per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    labels: Vec<f64>,
    n: usize,
    p: usize,
    pub seed: Option<u64>,
}

impl Dataset {
    pub fn new(features: Vec<f64>, labels: Vec<f64>, p: usize) -> Result<Self> {
        let n = labels.len();
        if n == 0 {
            return Err(Error::Dataset("dataset has no rows".into()));
        }
        if p == 0 || features.len() != n * p {
            return Err(Error::Dataset(format!(
                "feature matrix has {} entries, expected {n} x {p}",
                features.len()
            )));
        }
        if let Some(i) = features.iter().chain(&labels).position(|x| !x.is_finite()) {
            return Err(Error::Dataset(format!("non-finite entry at flat index {i}")));
        }
        Ok(Self {
            features,
            labels,
            n,
            p,
            seed: None,
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn num_features(&self) -> usize {
        self.p
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.p..(i + 1) * self.p]
    }

    pub fn label(&self, i: usize) -> f64 {
        self.labels[i]
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    /// Rows `idx` in the given order.
    pub fn subset(&self, idx: &[usize]) -> Result<Self> {
        let mut features = Vec::with_capacity(idx.len() * self.p);
        let mut labels = Vec::with_capacity(idx.len());
        for &i in idx {
            features.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        let mut out = Self::new(features, labels, self.p)?;
        out.seed = self.seed;
        Ok(out)
    }

    /// Seeded shuffle, then the first `1 - fraction` of rows for training and
    /// the rest for validation. `fraction == 0` returns the data unchanged
    /// and no validation set.
    pub fn split(&self, fraction: f64, seed: u64) -> Result<(Dataset, Option<Dataset>)> {
        if !(0.0..1.0).contains(&fraction) {
            return Err(Error::Dataset(format!(
                "validation fraction must lie in [0, 1), got {fraction}"
            )));
        }
        let n_val = (self.n as f64 * fraction).round() as usize;
        if n_val == 0 {
            return Ok((self.clone(), None));
        }
        if n_val >= self.n {
            return Err(Error::Dataset("validation split leaves no training rows".into()));
        }
        let mut idx: Vec<usize> = (0..self.n).collect();
        CounterRng::new(seed).stream(0x05EE_D5E7).shuffle(&mut idx);
        let (val, train) = idx.split_at(n_val);
        Ok((self.subset(train)?, Some(self.subset(val)?)))
    }

    /// True when every label is the same.
    pub fn is_single_class(&self) -> bool {
        self.labels.iter().all(|&y| y == self.labels[0])
    }

    /// Little-endian bytes of features then labels, for reproducibility checks.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.features
            .iter()
            .chain(&self.labels)
            .flat_map(|x| x.to_le_bytes())
            .collect()
    }
}

fn linspace_pi(k: usize) -> impl Iterator<Item = f64> {
    (0..k).map(move |i| {
        if k == 1 {
            0.0
        } else {
            std::f64::consts::PI * i as f64 / (k - 1) as f64
        }
    })
}

/// Two interleaving half circles. The first `n / 2` rows are the upper moon
/// (label 0) on `(cos s, sin s)`, the rest the lower moon (label 1) on
/// `(1 - cos s, 1/2 - sin s)`, with `s` evenly spaced over `[0, π]`.
/// Gaussian noise with standard deviation `noise` is added to each coordinate.
pub fn make_two_moons(n: usize, noise: f64, seed: u64) -> Result<Dataset> {
    if n < 2 {
        return Err(Error::Dataset(format!("two-moons needs n >= 2, got {n}")));
    }
    if !(noise.is_finite() && noise >= 0.0) {
        return Err(Error::Dataset(format!("noise must be >= 0, got {noise}")));
    }
    let n_out = n / 2;
    let n_in = n - n_out;
    let mut features = Vec::with_capacity(2 * n);
    let mut labels = Vec::with_capacity(n);
    for s in linspace_pi(n_out) {
        features.extend([s.cos(), s.sin()]);
        labels.push(0.0);
    }
    for s in linspace_pi(n_in) {
        features.extend([1.0 - s.cos(), 0.5 - s.sin()]);
        labels.push(1.0);
    }
    if noise > 0.0 {
        let mut rng = CounterRng::new(seed).stream(0x0000_3005);
        for x in &mut features {
            *x += noise * rng.next_normal();
        }
    }
    let mut ds = Dataset::new(features, labels, 2)?;
    ds.seed = Some(seed);
    Ok(ds)
}

/// Load a numeric CSV with a header row. `label_column` names the label;
/// every other column is a feature. Row order is preserved.
pub fn load_csv_dataset(path: impl AsRef<Path>, label_column: &str) -> Result<Dataset> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let headers = reader.headers()?.clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Err(Error::Dataset(format!("{}: empty file", path.display())));
    }
    let label_idx = headers
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| Error::Dataset(format!("label column `{label_column}` not found in header")))?;
    let p = headers.len() - 1;
    if p == 0 {
        return Err(Error::Dataset("no feature columns".into()));
    }
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let row = row + 1;
        let record = record.map_err(|e| Error::DatasetRow {
            row,
            reason: e.to_string(),
        })?;
        if record.len() != headers.len() {
            return Err(Error::DatasetRow {
                row,
                reason: format!("expected {} fields, found {}", headers.len(), record.len()),
            });
        }
        for (j, cell) in record.iter().enumerate() {
            let x: f64 = cell.parse().map_err(|_| Error::DatasetRow {
                row,
                reason: format!("column `{}`: non-numeric cell `{cell}`", &headers[j]),
            })?;
            if j == label_idx {
                labels.push(x);
            } else {
                features.push(x);
            }
        }
    }
    if labels.is_empty() {
        return Err(Error::Dataset(format!("{}: no data rows", path.display())));
    }
    Dataset::new(features, labels, p)
}

/// One epoch of minibatches: a seeded permutation of `0..n` cut into chunks
/// of `batch_size` (the last chunk may be shorter).
pub fn epoch_batches(n: usize, batch_size: usize, rng: &mut CounterRng) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut idx);
    idx.chunks(batch_size.max(1)).map(<[usize]>::to_vec).collect()
}
