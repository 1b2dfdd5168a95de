//! Dataset loading, splitting, standardization, and background construction.

use std::collections::HashSet;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::matrix::FeatureMatrix;

/// Which CSV columns play which role.
///
/// With `features` unset, every column that is neither the target nor the
/// group column is a feature. An explicit feature list may include the group
/// column, which is how a model gets to see group membership directly.
#[derive(Debug, Clone, Default, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Schema {
    #[serde(default)]
    pub features: Option<Vec<String>>,
    #[serde(default)]
    pub target: Option<String>,
    #[serde(default)]
    pub group: Option<String>,
}

impl Schema {
    /// Parses the inline form `target=y;group=g;features=a,b,c`. Every key is
    /// optional.
    pub fn parse(text: &str) -> Result<Self> {
        let mut schema = Schema::default();
        for part in text.split(';').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("schema entry '{part}' is not key=value")))?;
            let value = value.trim();
            match key.trim() {
                "target" => schema.target = Some(value.to_owned()),
                "group" => schema.group = Some(value.to_owned()),
                "features" => {
                    schema.features = Some(
                        value
                            .split(',')
                            .map(|s| s.trim().to_owned())
                            .filter(|s| !s.is_empty())
                            .collect(),
                    )
                }
                other => return Err(Error::Config(format!("unknown schema key '{other}'"))),
            }
        }
        Ok(schema)
    }
}

/// A named column kept as raw text: targets may be class labels or numbers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Column {
    pub name: String,
    pub values: Vec<String>,
}

impl Column {
    pub fn as_f64(&self) -> Result<Vec<f64>> {
        self.values
            .iter()
            .enumerate()
            .map(|(i, v)| parse_finite(v).map_err(|m| Error::load(Some(i + 1), Some(&self.name), m)))
            .collect()
    }

    /// Distinct values in sorted order.
    pub fn distinct(&self) -> Vec<String> {
        let mut v: Vec<String> = self.values.iter().cloned().collect::<HashSet<_>>().into_iter().collect();
        v.sort();
        v
    }

    fn select(&self, indices: &[usize]) -> Self {
        Self {
            name: self.name.clone(),
            values: indices.iter().map(|&i| self.values[i].clone()).collect(),
        }
    }
}

fn parse_finite(text: &str) -> std::result::Result<f64, String> {
    match text.trim().parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        Ok(v) => Err(format!("value {v} is not finite")),
        Err(_) => Err(format!("cannot parse '{text}' as a number")),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: FeatureMatrix,
    pub target: Option<Column>,
    pub group: Option<Column>,
}

impl Dataset {
    pub fn new(features: FeatureMatrix, target: Option<Column>, group: Option<Column>) -> Result<Self> {
        for col in target.iter().chain(group.iter()) {
            if col.values.len() != features.n_rows() {
                return Err(Error::InvalidMatrix(format!(
                    "column '{}' has {} values for {} rows",
                    col.name,
                    col.values.len(),
                    features.n_rows()
                )));
            }
        }
        if let Some(t) = &target {
            if features.feature_index(&t.name).is_some() {
                return Err(Error::Config(format!("'{}' is both a feature and the target", t.name)));
            }
            if group.as_ref().is_some_and(|g| g.name == t.name) {
                return Err(Error::Config(format!("'{}' is both the group and the target", t.name)));
            }
        }
        Ok(Self {
            features,
            target,
            group,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.features.n_rows()
    }

    pub fn select_rows(&self, indices: &[usize]) -> Result<Self> {
        Ok(Self {
            features: self.features.select_rows(indices)?,
            target: self.target.as_ref().map(|c| c.select(indices)),
            group: self.group.as_ref().map(|c| c.select(indices)),
        })
    }
}

/// Loads a comma-separated file with a header row.
pub fn load_csv(path: impl AsRef<Path>, schema: &Schema) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)
        .map_err(|e| Error::load(None, None, format!("cannot open {}: {e}", path.display())))?;
    read_csv(file, schema)
}

/// Reads CSV data from any reader. Row numbers in errors count data rows
/// from 1, excluding the header.
pub fn read_csv<R: Read>(reader: R, schema: &Schema) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::load(None, None, format!("cannot read header: {e}")))?
        .iter()
        .map(|h| h.trim().to_owned())
        .collect();
    let find = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::load(None, Some(name), "column not found in header"))
    };
    let target_idx = schema.target.as_deref().map(find).transpose()?;
    let group_idx = schema.group.as_deref().map(find).transpose()?;
    let feature_idx: Vec<usize> = match &schema.features {
        Some(names) => names.iter().map(|n| find(n)).collect::<Result<_>>()?,
        None => (0..header.len())
            .filter(|&i| Some(i) != target_idx && Some(i) != group_idx)
            .collect(),
    };
    if feature_idx.is_empty() {
        return Err(Error::load(None, None, "schema selects no feature columns"));
    }
    if let Some(t) = target_idx {
        if feature_idx.contains(&t) {
            return Err(Error::Config(format!("'{}' is both a feature and the target", header[t])));
        }
    }

    let mut values = Vec::new();
    let mut target = Vec::new();
    let mut group = Vec::new();
    let mut n = 0;
    for (r, record) in rdr.records().enumerate() {
        let row = r + 1;
        let record = record.map_err(|e| Error::load(Some(row), None, e.to_string()))?;
        if record.len() != header.len() {
            return Err(Error::load(
                Some(row),
                None,
                format!("expected {} fields, found {}", header.len(), record.len()),
            ));
        }
        for &j in &feature_idx {
            let v = parse_finite(&record[j]).map_err(|m| Error::load(Some(row), Some(&header[j]), m))?;
            values.push(v);
        }
        if let Some(t) = target_idx {
            target.push(record[t].trim().to_owned());
        }
        if let Some(g) = group_idx {
            group.push(record[g].trim().to_owned());
        }
        n += 1;
    }
    if n == 0 {
        return Err(Error::load(None, None, "file has no data rows"));
    }
    let names = feature_idx.iter().map(|&j| header[j].clone()).collect();
    let features = FeatureMatrix::new(values, n, names)?;
    let column = |idx: Option<usize>, values: Vec<String>| {
        idx.map(|i| Column {
            name: header[i].clone(),
            values,
        })
    };
    Dataset::new(features, column(target_idx, target), column(group_idx, group))
}

/// Writes a dataset as CSV: features, then target, then the group column
/// unless it is already a feature.
pub fn write_csv<W: Write>(ds: &Dataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let group = ds
        .group
        .as_ref()
        .filter(|g| ds.features.feature_index(&g.name).is_none());
    let mut header: Vec<&str> = ds.features.feature_names().iter().map(String::as_str).collect();
    header.extend(ds.target.iter().map(|c| c.name.as_str()));
    header.extend(group.iter().map(|c| c.name.as_str()));
    w.write_record(&header).map_err(csv_io)?;
    for i in 0..ds.n_rows() {
        let mut record: Vec<String> = ds.features.row(i).iter().map(f64::to_string).collect();
        record.extend(ds.target.iter().map(|c| c.values[i].clone()));
        record.extend(group.iter().map(|c| c.values[i].clone()));
        w.write_record(&record).map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_io(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

fn test_size(n: usize, test_fraction: f64) -> Result<usize> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::Split(format!("test fraction {test_fraction} is not in (0, 1)")));
    }
    let n_test = (n as f64 * test_fraction).round() as usize;
    if n_test == 0 || n_test >= n {
        return Err(Error::Split(format!(
            "test fraction {test_fraction} of {n} rows leaves an empty side"
        )));
    }
    Ok(n_test)
}

/// Seeded random split into `(train, test)`. Each side keeps the original
/// row order.
pub fn train_test_split(ds: &Dataset, test_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    let n = ds.n_rows();
    let n_test = test_size(n, test_fraction)?;
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (test, train) = idx.split_at_mut(n_test);
    test.sort_unstable();
    train.sort_unstable();
    Ok((ds.select_rows(train)?, ds.select_rows(test)?))
}

/// Split that keeps the last rows as the test set, for time-ordered data.
pub fn ordered_split(ds: &Dataset, test_fraction: f64) -> Result<(Dataset, Dataset)> {
    let n = ds.n_rows();
    let n_test = test_size(n, test_fraction)?;
    let train: Vec<usize> = (0..n - n_test).collect();
    let test: Vec<usize> = (n - n_test..n).collect();
    Ok((ds.select_rows(&train)?, ds.select_rows(&test)?))
}

/// How background rows are shuffled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ShuffleMode {
    /// Each column gets its own permutation, which breaks every cross-column
    /// association but keeps each column's values.
    #[default]
    Columns,
    /// One permutation of whole rows.
    Rows,
}

/// Shuffled copy of `features` for use as background data.
pub fn shuffle_background(features: &FeatureMatrix, seed: u64, mode: ShuffleMode) -> FeatureMatrix {
    let n = features.n_rows();
    let p = features.n_features();
    if n < 2 {
        return features.clone();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = features.as_slice().to_vec();
    match mode {
        ShuffleMode::Columns => {
            let mut perm: Vec<usize> = (0..n).collect();
            for j in 0..p {
                perm.shuffle(&mut rng);
                for (i, &src) in perm.iter().enumerate() {
                    values[i * p + j] = features.get(src, j);
                }
            }
        }
        ShuffleMode::Rows => {
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(&mut rng);
            for (i, &src) in perm.iter().enumerate() {
                values[i * p..(i + 1) * p].copy_from_slice(features.row(src));
            }
        }
    }
    FeatureMatrix::from_parts(values, n, features.shared_names())
}

/// Per-column z-scoring learned from training data.
///
/// Means and standard deviations are summed over sorted column values, so the
/// fitted parameters do not depend on row order. Constant columns are
/// centered and left unscaled.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    means: Vec<f64>,
    scales: Vec<f64>,
}

impl Standardizer {
    pub fn fit(train: &FeatureMatrix) -> Self {
        let n = train.n_rows() as f64;
        let (means, scales) = (0..train.n_features())
            .map(|j| {
                let mut col = train.column(j);
                col.sort_by(f64::total_cmp);
                let mean = col.iter().sum::<f64>() / n;
                let mut dev: Vec<f64> = col.iter().map(|v| (v - mean).powi(2)).collect();
                dev.sort_by(f64::total_cmp);
                let sd = (dev.iter().sum::<f64>() / n).sqrt();
                (mean, if sd > 0.0 { sd } else { 1.0 })
            })
            .unzip();
        Self { means, scales }
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn scales(&self) -> &[f64] {
        &self.scales
    }

    pub fn n_features(&self) -> usize {
        self.means.len()
    }

    pub(crate) fn transform_row_into(&self, row: &[f64], out: &mut Vec<f64>) {
        out.extend(
            row.iter()
                .zip(self.means.iter().zip(&self.scales))
                .map(|(v, (m, s))| (v - m) / s),
        );
    }

    pub fn transform(&self, x: &FeatureMatrix) -> Result<FeatureMatrix> {
        self.map(x, |v, m, s| (v - m) / s)
    }

    pub fn inverse_transform(&self, x: &FeatureMatrix) -> Result<FeatureMatrix> {
        self.map(x, |v, m, s| v * s + m)
    }

    fn map(&self, x: &FeatureMatrix, f: impl Fn(f64, f64, f64) -> f64) -> Result<FeatureMatrix> {
        if x.n_features() != self.n_features() {
            return Err(Error::InvalidMatrix(format!(
                "standardizer fitted on {} columns applied to {}",
                self.n_features(),
                x.n_features()
            )));
        }
        let p = self.n_features();
        let values = x
            .as_slice()
            .iter()
            .enumerate()
            .map(|(k, &v)| f(v, self.means[k % p], self.scales[k % p]))
            .collect();
        FeatureMatrix::new(values, x.n_rows(), x.feature_names().to_vec())
    }
}

/// Fits a [`Standardizer`] on `train` and applies it to `train` and to every
/// matrix in `apply_to`.
pub fn standardize(
    train: &FeatureMatrix,
    apply_to: &[&FeatureMatrix],
) -> Result<(FeatureMatrix, Vec<FeatureMatrix>, Standardizer)> {
    let s = Standardizer::fit(train);
    let train_z = s.transform(train)?;
    let others = apply_to.iter().map(|m| s.transform(m)).collect::<Result<_>>()?;
    Ok((train_z, others, s))
}
