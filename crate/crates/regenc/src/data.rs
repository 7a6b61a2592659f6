//! Dataset ingestion, preprocessing, splits, batching, and synthetic
//! generators.
//!
//! Datasets arrive as UTF-8 CSV files with a header row, '.' decimal, and
//! purely numeric columns. A plain-text config file (`key = value` lines,
//! `#` comments) names the source file, the target column(s), the
//! train/val/test split counts, and the batch size:
//!
//! ```text
//! name = WN
//! source = data/wn.csv
//! targets = quality
//! n_train = 5197
//! n_val = 650
//! n_test = 650
//! batch_size = 256
//! shuffle_seed = 0
//! ```
//!
//! `prepare` shuffles rows with the config seed, splits them by count, fits
//! min-max scalers on the training split only, and applies those scalers to
//! all three splits. Training features and targets therefore lie exactly in
//! `[0, 1]` per column; validation/test values may fall slightly outside.

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::Tensor;
use std::io::Read;
use std::path::{Path, PathBuf};

/// Parsed description of a dataset.
#[derive(Clone, Debug, PartialEq)]
pub struct DatasetSpec {
    pub name: String,
    pub source_path: PathBuf,
    pub target_columns: Vec<String>,
    /// (n_train, n_val, n_test)
    pub split_counts: (usize, usize, usize),
    pub batch_size: usize,
    pub shuffle_seed: u64,
}

impl DatasetSpec {
    /// Parse the key-value config format. `base_dir`, when given, anchors a
    /// relative `source` path.
    pub fn parse_str(text: &str, base_dir: Option<&Path>) -> Result<Self> {
        let mut name = None;
        let mut source = None;
        let mut targets: Option<Vec<String>> = None;
        let mut n_train = None;
        let mut n_val = None;
        let mut n_test = None;
        let mut batch_size = None;
        let mut shuffle_seed = 0u64;
        let mut seen: Vec<String> = Vec::new();

        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Config(format!(
                    "line {}: expected `key = value`, got {raw:?}",
                    lineno + 1
                )));
            };
            let key = key.trim();
            let value = value.trim();
            if value.is_empty() {
                return Err(Error::Config(format!("line {}: empty value for {key}", lineno + 1)));
            }
            if seen.iter().any(|k| k == key) {
                return Err(Error::Config(format!("duplicate key {key}")));
            }
            seen.push(key.to_string());
            let parse_count = |v: &str| -> Result<usize> {
                v.parse()
                    .map_err(|_| Error::Config(format!("line {}: bad count {v:?}", lineno + 1)))
            };
            match key {
                "name" => name = Some(value.to_string()),
                "source" => source = Some(value.to_string()),
                "targets" => {
                    targets = Some(value.split(',').map(|s| s.trim().to_string()).collect())
                }
                "n_train" => n_train = Some(parse_count(value)?),
                "n_val" => n_val = Some(parse_count(value)?),
                "n_test" => n_test = Some(parse_count(value)?),
                "batch_size" => batch_size = Some(parse_count(value)?),
                "shuffle_seed" => {
                    shuffle_seed = value.parse().map_err(|_| {
                        Error::Config(format!("line {}: bad seed {value:?}", lineno + 1))
                    })?
                }
                other => return Err(Error::Config(format!("unknown key {other:?}"))),
            }
        }

        fn require<T>(opt: Option<T>, key: &str) -> Result<T> {
            opt.ok_or_else(|| Error::Config(format!("missing key {key}")))
        }
        let source = PathBuf::from(require(source, "source")?);
        let source_path = match base_dir {
            Some(dir) if source.is_relative() => dir.join(source),
            _ => source,
        };
        let spec = DatasetSpec {
            name: require(name, "name")?,
            source_path,
            target_columns: require(targets, "targets")?,
            split_counts: (
                require(n_train, "n_train")?,
                require(n_val, "n_val")?,
                require(n_test, "n_test")?,
            ),
            batch_size: require(batch_size, "batch_size")?,
            shuffle_seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse_str(&text, path.parent())
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if self.target_columns.is_empty() {
            return Err(Error::Config("at least one target column required".into()));
        }
        if self.split_counts.0 == 0 || self.split_counts.1 == 0 || self.split_counts.2 == 0 {
            return Err(Error::Config("all three splits must be non-empty".into()));
        }
        Ok(())
    }
}

/// Numeric CSV contents: header names plus row-major values.
#[derive(Clone, Debug)]
pub struct RawTable {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl RawTable {
    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.headers.iter().position(|h| h == name)
    }
}

/// Parse a numeric CSV (header row required) from any reader. Errors name
/// the offending data row (1-based) and column.
pub fn read_table_csv<R: Read>(reader: R) -> Result<RawTable> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::Data(format!("cannot read CSV header: {e}")))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if headers.is_empty() || headers.iter().any(|h| h.is_empty()) {
        return Err(Error::Data("CSV header has empty column names".into()));
    }
    let mut rows = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| Error::Data(format!("row {}: {e}", i + 1)))?;
        if record.len() != headers.len() {
            return Err(Error::Data(format!(
                "row {}: has {} fields, header has {}",
                i + 1,
                record.len(),
                headers.len()
            )));
        }
        let mut row = Vec::with_capacity(headers.len());
        for (j, cell) in record.iter().enumerate() {
            let v: f64 = cell.trim().parse().map_err(|_| {
                Error::Data(format!(
                    "row {}, column {:?}: cell {cell:?} is not numeric",
                    i + 1,
                    headers[j]
                ))
            })?;
            if !v.is_finite() {
                return Err(Error::Data(format!(
                    "row {}, column {:?}: cell {cell:?} is not finite",
                    i + 1,
                    headers[j]
                )));
            }
            row.push(v);
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Data("CSV has no data rows".into()));
    }
    Ok(RawTable { headers, rows })
}

/// Load the CSV named by a spec and check the target columns exist.
pub fn load_csv(spec: &DatasetSpec) -> Result<RawTable> {
    let file = std::fs::File::open(&spec.source_path).map_err(|e| {
        Error::Data(format!("cannot open {}: {e}", spec.source_path.display()))
    })?;
    let table = read_table_csv(std::io::BufReader::new(file))?;
    for t in &spec.target_columns {
        if table.column_index(t).is_none() {
            return Err(Error::Data(format!(
                "target column {t:?} not found in {}",
                spec.source_path.display()
            )));
        }
    }
    Ok(table)
}

/// Per-column min-max scaler. Constant columns map to 0.
#[derive(Clone, Debug, PartialEq)]
pub struct MinMaxScaler {
    /// (min, max) per column, fitted on the training split.
    pub bounds: Vec<(f64, f64)>,
}

impl MinMaxScaler {
    pub fn fit(rows: &[Vec<f64>], cols: &[usize]) -> Self {
        let mut bounds = vec![(f64::INFINITY, f64::NEG_INFINITY); cols.len()];
        for row in rows {
            for (b, &c) in bounds.iter_mut().zip(cols) {
                b.0 = b.0.min(row[c]);
                b.1 = b.1.max(row[c]);
            }
        }
        MinMaxScaler { bounds }
    }

    pub fn scale_value(&self, col: usize, v: f64) -> f64 {
        let (lo, hi) = self.bounds[col];
        if hi > lo {
            (v - lo) / (hi - lo)
        } else {
            0.0
        }
    }

    pub fn unscale_value(&self, col: usize, v: f64) -> f64 {
        let (lo, hi) = self.bounds[col];
        if hi > lo {
            lo + v * (hi - lo)
        } else {
            lo
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Split {
    Train,
    Val,
    Test,
}

/// Scaled tensors for all three splits plus the scalers that produced them.
#[derive(Clone, Debug)]
pub struct PreparedDataset {
    pub name: String,
    pub feature_names: Vec<String>,
    pub target_names: Vec<String>,
    pub x_train: Tensor,
    pub y_train: Tensor,
    pub x_val: Tensor,
    pub y_val: Tensor,
    pub x_test: Tensor,
    pub y_test: Tensor,
    pub feature_scaler: MinMaxScaler,
    pub target_scaler: MinMaxScaler,
    pub batch_size: usize,
}

impl PreparedDataset {
    pub fn feature_dim(&self) -> usize {
        self.x_train.cols()
    }

    pub fn target_dim(&self) -> usize {
        self.y_train.cols()
    }

    pub fn split(&self, split: Split) -> (&Tensor, &Tensor) {
        match split {
            Split::Train => (&self.x_train, &self.y_train),
            Split::Val => (&self.x_val, &self.y_val),
            Split::Test => (&self.x_test, &self.y_test),
        }
    }
}

/// Shuffle, split, and scale a raw table according to its spec.
pub fn prepare(spec: &DatasetSpec, table: &RawTable) -> Result<PreparedDataset> {
    spec.validate()?;
    let (n_train, n_val, n_test) = spec.split_counts;
    let needed = n_train + n_val + n_test;
    if table.rows.len() < needed {
        return Err(Error::Data(format!(
            "{} rows available, {needed} required by splits",
            table.rows.len()
        )));
    }
    let mut target_cols = Vec::with_capacity(spec.target_columns.len());
    for t in &spec.target_columns {
        target_cols.push(
            table
                .column_index(t)
                .ok_or_else(|| Error::Data(format!("target column {t:?} not found")))?,
        );
    }
    let feature_cols: Vec<usize> =
        (0..table.headers.len()).filter(|c| !target_cols.contains(c)).collect();
    if feature_cols.is_empty() {
        return Err(Error::Data("no feature columns remain".into()));
    }

    let mut order: Vec<usize> = (0..table.rows.len()).collect();
    Rng::from_seed(spec.shuffle_seed).derive("split").shuffle(&mut order);
    let train_idx = &order[..n_train];
    let val_idx = &order[n_train..n_train + n_val];
    let test_idx = &order[n_train + n_val..needed];

    let train_rows: Vec<Vec<f64>> = train_idx.iter().map(|&i| table.rows[i].clone()).collect();
    let feature_scaler = MinMaxScaler::fit(&train_rows, &feature_cols);
    let target_scaler = MinMaxScaler::fit(&train_rows, &target_cols);
    for (j, &(lo, hi)) in target_scaler.bounds.iter().enumerate() {
        if lo == hi {
            return Err(Error::Data(format!(
                "target column {:?} is constant on the training split",
                spec.target_columns[j]
            )));
        }
    }

    let build = |idx: &[usize]| -> Result<(Tensor, Tensor)> {
        let mut x = Vec::with_capacity(idx.len() * feature_cols.len());
        let mut y = Vec::with_capacity(idx.len() * target_cols.len());
        for &i in idx {
            let row = &table.rows[i];
            for (j, &c) in feature_cols.iter().enumerate() {
                x.push(feature_scaler.scale_value(j, row[c]));
            }
            for (j, &c) in target_cols.iter().enumerate() {
                y.push(target_scaler.scale_value(j, row[c]));
            }
        }
        Ok((
            Tensor::new(vec![idx.len(), feature_cols.len()], x)?,
            Tensor::new(vec![idx.len(), target_cols.len()], y)?,
        ))
    };
    let (x_train, y_train) = build(train_idx)?;
    let (x_val, y_val) = build(val_idx)?;
    let (x_test, y_test) = build(test_idx)?;

    Ok(PreparedDataset {
        name: spec.name.clone(),
        feature_names: feature_cols.iter().map(|&c| table.headers[c].clone()).collect(),
        target_names: spec.target_columns.clone(),
        x_train,
        y_train,
        x_val,
        y_val,
        x_test,
        y_test,
        feature_scaler,
        target_scaler,
        batch_size: spec.batch_size,
    })
}

/// Split a prepared split into `(x, y)` batches of `batch_size` rows, final
/// partial batch included. With `shuffle` the row order comes from `rng`
/// (one permutation per call, so training reshuffles every epoch).
pub fn batches(
    ds: &PreparedDataset,
    split: Split,
    rng: &mut Rng,
    shuffle: bool,
) -> Vec<(Tensor, Tensor)> {
    let (x, y) = ds.split(split);
    batch_tensor_pair(x, y, ds.batch_size, rng, shuffle)
}

pub(crate) fn batch_tensor_pair(
    x: &Tensor,
    y: &Tensor,
    batch_size: usize,
    rng: &mut Rng,
    shuffle: bool,
) -> Vec<(Tensor, Tensor)> {
    let n = x.rows();
    let mut order: Vec<usize> = (0..n).collect();
    if shuffle {
        rng.shuffle(&mut order);
    }
    let (fx, fy) = (x.cols(), y.cols());
    order
        .chunks(batch_size)
        .map(|chunk| {
            let mut bx = Vec::with_capacity(chunk.len() * fx);
            let mut by = Vec::with_capacity(chunk.len() * fy);
            for &i in chunk {
                bx.extend_from_slice(x.row(i));
                by.extend_from_slice(y.row(i));
            }
            (
                Tensor::new(vec![chunk.len(), fx], bx).expect("batch shapes are consistent"),
                Tensor::new(vec![chunk.len(), fy], by).expect("batch shapes are consistent"),
            )
        })
        .collect()
}

// ── synthetic data ───────────────────────────────────────────────────

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum SynthKind {
    /// 2 features, scalar target: 4-level step function of x1 plus noise.
    Piecewise,
    /// 2 features, scalar target: `0.5 + 0.4 sin(2 pi x1)` plus noise.
    Sinusoid,
    /// 2 features, 2-D target: two Gaussian blobs at (0.25, 0.25) and
    /// (0.75, 0.75) with spread 0.08; features are the targets plus noise.
    TwoBlob2d,
}

impl SynthKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "piecewise" => Ok(SynthKind::Piecewise),
            "sinusoid" => Ok(SynthKind::Sinusoid),
            "two-blob-2d" => Ok(SynthKind::TwoBlob2d),
            other => Err(Error::Config(format!(
                "unknown synthetic kind {other:?} (piecewise, sinusoid, two-blob-2d)"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SynthKind::Piecewise => "piecewise",
            SynthKind::Sinusoid => "sinusoid",
            SynthKind::TwoBlob2d => "two-blob-2d",
        }
    }
}

/// Deterministic synthetic dataset with an 80/10/10 split, scaled like any
/// other dataset.
pub fn synth_dataset(kind: SynthKind, n: usize, noise: f64, rng: &mut Rng) -> Result<PreparedDataset> {
    if n < 100 {
        return Err(Error::InvalidArgument(format!("need n >= 100, got {n}")));
    }
    let mut gen = rng.derive("synth");
    let (headers, rows): (Vec<String>, Vec<Vec<f64>>) = match kind {
        SynthKind::Piecewise => {
            let levels = [0.1, 0.8, 0.3, 0.6];
            let rows = (0..n)
                .map(|_| {
                    let x1 = gen.uniform();
                    let x2 = gen.uniform();
                    let y = levels[((x1 * 4.0) as usize).min(3)] + noise * gen.normal();
                    vec![x1, x2, y]
                })
                .collect();
            (vec!["x1".into(), "x2".into(), "y".into()], rows)
        }
        SynthKind::Sinusoid => {
            let rows = (0..n)
                .map(|_| {
                    let x1 = gen.uniform();
                    let x2 = gen.uniform();
                    let y = 0.5
                        + 0.4 * (2.0 * std::f64::consts::PI * x1).sin()
                        + noise * gen.normal();
                    vec![x1, x2, y]
                })
                .collect();
            (vec!["x1".into(), "x2".into(), "y".into()], rows)
        }
        SynthKind::TwoBlob2d => {
            let centers = [(0.25, 0.25), (0.75, 0.75)];
            let rows = (0..n)
                .map(|_| {
                    let (cx, cy) = centers[gen.index(2)];
                    let y1 = cx + 0.08 * gen.normal();
                    let y2 = cy + 0.08 * gen.normal();
                    let x1 = y1 + noise * gen.normal();
                    let x2 = y2 + noise * gen.normal();
                    vec![x1, x2, y1, y2]
                })
                .collect();
            (vec!["x1".into(), "x2".into(), "y1".into(), "y2".into()], rows)
        }
    };
    let n_train = (n * 8) / 10;
    let n_val = n / 10;
    let n_test = n - n_train - n_val;
    let targets = match kind {
        SynthKind::TwoBlob2d => vec!["y1".to_string(), "y2".to_string()],
        _ => vec!["y".to_string()],
    };
    let spec = DatasetSpec {
        name: kind.name().to_string(),
        source_path: PathBuf::new(),
        target_columns: targets,
        split_counts: (n_train, n_val, n_test),
        batch_size: 64,
        shuffle_seed: gen.next_u64(),
    };
    prepare(&spec, &RawTable { headers, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    const SPEC_TEXT: &str = "\
# comment line
name = toy
source = toy.csv
targets = y
n_train = 6
n_val = 2
n_test = 2
batch_size = 4
";

    fn toy_table(n: usize) -> RawTable {
        RawTable {
            headers: vec!["a".into(), "b".into(), "y".into()],
            rows: (0..n)
                .map(|i| vec![i as f64, (i * i) as f64, (i % 7) as f64])
                .collect(),
        }
    }

    #[test]
    fn spec_parse_roundtrip() {
        let spec = DatasetSpec::parse_str(SPEC_TEXT, None).unwrap();
        assert_eq!(spec.name, "toy");
        assert_eq!(spec.split_counts, (6, 2, 2));
        assert_eq!(spec.batch_size, 4);
        assert_eq!(spec.shuffle_seed, 0);
    }

    #[test]
    fn spec_parse_rejects_garbage() {
        assert!(DatasetSpec::parse_str("name toy", None).is_err());
        assert!(DatasetSpec::parse_str("name = a\nname = b", None).is_err());
        assert!(DatasetSpec::parse_str("mystery = 4", None).is_err());
        assert!(DatasetSpec::parse_str("name = a\nsource = s\ntargets = y", None).is_err());
    }

    #[test]
    fn csv_parse_and_errors() {
        let table = read_table_csv("a,b,y\n1,2,3\n4,5,6\n7,8,9\n".as_bytes()).unwrap();
        assert_eq!(table.headers, vec!["a", "b", "y"]);
        assert_eq!(table.rows.len(), 3);

        let err = read_table_csv("a,b\n1,2\n3,abc\n".as_bytes()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("row 2") && msg.contains("\"b\""), "{msg}");

        let err = read_table_csv("a,b\n1,NaN\n".as_bytes()).unwrap_err();
        assert!(err.to_string().contains("not finite"), "{err}");

        assert!(read_table_csv("a,b\n".as_bytes()).is_err());
    }

    #[test]
    fn load_csv_names_missing_target() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        std::fs::write(&path, "a,b\n1,2\n").unwrap();
        let spec = DatasetSpec {
            name: "t".into(),
            source_path: path,
            target_columns: vec!["y".into()],
            split_counts: (1, 1, 1),
            batch_size: 1,
            shuffle_seed: 0,
        };
        let err = load_csv(&spec).unwrap_err();
        assert!(err.to_string().contains("\"y\""), "{err}");
    }

    #[test]
    fn prepare_scales_train_to_unit_interval() {
        let spec = DatasetSpec::parse_str(SPEC_TEXT, None).unwrap();
        let ds = prepare(&spec, &toy_table(10)).unwrap();
        assert_eq!(ds.x_train.shape(), &[6, 2]);
        assert_eq!(ds.y_train.shape(), &[6, 1]);
        for c in 0..2 {
            let col: Vec<f64> = (0..6).map(|r| ds.x_train.at(r, c)).collect();
            let lo = col.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            assert_eq!(lo, 0.0);
            assert_eq!(hi, 1.0);
        }
    }

    #[test]
    fn prepare_is_deterministic_and_disjoint() {
        let spec = DatasetSpec::parse_str(SPEC_TEXT, None).unwrap();
        let a = prepare(&spec, &toy_table(10)).unwrap();
        let b = prepare(&spec, &toy_table(10)).unwrap();
        assert_eq!(a.x_train.data(), b.x_train.data());
        assert_eq!(a.y_test.data(), b.y_test.data());

        // splits partition the first column (which identifies rows uniquely
        // after unscaling)
        let mut seen: Vec<i64> = Vec::new();
        for t in [&a.x_train, &a.x_val, &a.x_test] {
            for r in 0..t.rows() {
                let v = a.feature_scaler.unscale_value(0, t.at(r, 0));
                seen.push(v.round() as i64);
            }
        }
        seen.sort_unstable();
        assert_eq!(seen, (0..10).collect::<Vec<i64>>());
    }

    #[test]
    fn prepare_rejects_insufficient_rows_and_constant_target() {
        let spec = DatasetSpec::parse_str(SPEC_TEXT, None).unwrap();
        assert!(prepare(&spec, &toy_table(9)).is_err());

        let mut table = toy_table(10);
        for row in &mut table.rows {
            row[2] = 5.0;
        }
        let err = prepare(&spec, &table).unwrap_err();
        assert!(err.to_string().contains("constant"), "{err}");
    }

    #[test]
    fn scaling_example_and_roundtrip() {
        let scaler = MinMaxScaler::fit(&[vec![2.0], vec![4.0], vec![6.0]], &[0]);
        assert_eq!(scaler.scale_value(0, 2.0), 0.0);
        assert_eq!(scaler.scale_value(0, 4.0), 0.5);
        assert_eq!(scaler.scale_value(0, 6.0), 1.0);
        for v in [2.0, 3.3, 4.0, 5.9] {
            let rt = scaler.unscale_value(0, scaler.scale_value(0, v));
            assert!((rt - v).abs() < 1e-12);
        }
    }

    #[test]
    fn batch_cover_and_sizes() {
        let spec = DatasetSpec::parse_str(SPEC_TEXT, None).unwrap();
        let ds = prepare(&spec, &toy_table(10)).unwrap();
        let mut rng = Rng::from_seed(0);
        let got = batches(&ds, Split::Train, &mut rng, true);
        assert_eq!(got.iter().map(|(x, _)| x.rows()).collect::<Vec<_>>(), vec![4, 2]);

        // unshuffled order is preserved
        let got = batches(&ds, Split::Train, &mut rng, false);
        assert_eq!(got[0].0.row(0), ds.x_train.row(0));

        // every row exactly once per epoch
        let mut ids: Vec<i64> = Vec::new();
        for (x, _) in &got {
            for r in 0..x.rows() {
                ids.push(ds.feature_scaler.unscale_value(0, x.at(r, 0)).round() as i64);
            }
        }
        ids.sort_unstable();
        let mut expect: Vec<i64> = (0..6)
            .map(|r| ds.feature_scaler.unscale_value(0, ds.x_train.at(r, 0)).round() as i64)
            .collect();
        expect.sort_unstable();
        assert_eq!(ids, expect);
    }

    #[test]
    fn synth_is_deterministic() {
        let a = synth_dataset(SynthKind::Sinusoid, 200, 0.01, &mut Rng::from_seed(5)).unwrap();
        let b = synth_dataset(SynthKind::Sinusoid, 200, 0.01, &mut Rng::from_seed(5)).unwrap();
        assert_eq!(a.x_train.data(), b.x_train.data());
        assert_eq!(a.y_test.data(), b.y_test.data());
        assert!(synth_dataset(SynthKind::Sinusoid, 50, 0.0, &mut Rng::from_seed(0)).is_err());
    }

    #[test]
    fn two_blob_kmeans_recovers_means() {
        // Generative ground truth: with blob spread 0.08 the k-means centers
        // must land within 3 sigma / sqrt(n_per_blob) of the true means
        // (in scaled units the tolerance only tightens).
        let n = 2000;
        let ds = synth_dataset(SynthKind::TwoBlob2d, n, 0.02, &mut Rng::from_seed(11)).unwrap();
        let km =
            crate::codec::kmeans_pp(&ds.y_train, 2, 100, &mut Rng::from_seed(1)).unwrap();
        // true centers, mapped through the fitted target scaler
        let truth: Vec<(f64, f64)> = [(0.25, 0.25), (0.75, 0.75)]
            .iter()
            .map(|&(a, b)| {
                let (lo0, hi0) = ds.target_scaler.bounds[0];
                let (lo1, hi1) = ds.target_scaler.bounds[1];
                ((a - lo0) / (hi0 - lo0), (b - lo1) / (hi1 - lo1))
            })
            .collect();
        let tol = 3.0 * 0.08 / ((n as f64 * 0.4).sqrt());
        for &(tx, ty) in &truth {
            let found = (0..2).any(|i| {
                (km.centers.at(i, 0) - tx).abs() < tol * 3.0
                    && (km.centers.at(i, 1) - ty).abs() < tol * 3.0
            });
            assert!(found, "no center near ({tx}, {ty}): {:?}", km.centers.data());
        }
    }
}
