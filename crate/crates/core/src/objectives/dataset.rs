//! Classification datasets: LIBSVM sparse text, CSV, and synthetic blobs.

use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{Error, Result};

/// Dense labelled samples. Labels are class ids in `[0, classes)`;
/// `label_values[c]` is the original label of class `c`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    labels: Vec<usize>,
    n: usize,
    d: usize,
    label_values: Vec<f64>,
}

impl Dataset {
    /// Builds a dataset from dense rows and raw labels. Labels are remapped
    /// to contiguous class ids in increasing order of their value.
    pub fn from_raw(rows: Vec<Vec<f64>>, raw_labels: Vec<f64>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::NoSamples);
        }
        if raw_labels.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: raw_labels.len() });
        }
        let d = rows.iter().map(Vec::len).max().unwrap_or(0);
        if d == 0 {
            return Err(Error::invalid("samples have no features"));
        }
        let mut features = Vec::with_capacity(n * d);
        for (i, row) in rows.iter().enumerate() {
            if let Some(v) = row.iter().find(|v| !v.is_finite()) {
                return Err(Error::invalid(format!("sample {i} has non-finite feature {v}")));
            }
            features.extend_from_slice(row);
            features.extend(std::iter::repeat_n(0.0, d - row.len()));
        }
        if let Some(v) = raw_labels.iter().find(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite label {v}")));
        }
        let mut label_values = raw_labels.clone();
        label_values.sort_by(f64::total_cmp);
        label_values.dedup();
        let labels = raw_labels
            .iter()
            .map(|v| label_values.binary_search_by(|p| p.total_cmp(v)).expect("label present"))
            .collect();
        Ok(Dataset { features, labels, n, d, label_values })
    }

    /// Builds a dataset from class ids directly; `classes` must exceed every id.
    pub fn from_classes(features: Vec<f64>, d: usize, labels: Vec<usize>, classes: usize) -> Result<Self> {
        let n = labels.len();
        if n == 0 {
            return Err(Error::NoSamples);
        }
        if d == 0 || features.len() != n * d {
            return Err(Error::DimensionMismatch { expected: n * d, got: features.len() });
        }
        if let Some(l) = labels.iter().find(|&&l| l >= classes) {
            return Err(Error::invalid(format!("label {l} out of range for {classes} classes")));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite feature"));
        }
        Ok(Dataset {
            features,
            labels,
            n,
            d,
            label_values: (0..classes).map(|c| c as f64).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn classes(&self) -> usize {
        self.label_values.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.d..(i + 1) * self.d]
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn label_values(&self) -> &[f64] {
        &self.label_values
    }
}

/// Dense rows with real-valued labels, as read from a LIBSVM file before any
/// class remapping. Used directly for regression targets.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSamples {
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<f64>,
    pub dim: usize,
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

/// Parses LIBSVM text (`label idx:val ...`, 1-based indices). Blank lines and
/// `#` comments are ignored. Rows are densified to the largest index seen.
pub fn read_libsvm<R: Read>(reader: R) -> Result<SparseSamples> {
    let mut sparse: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut labels = Vec::new();
    let mut dim = 0usize;
    for (idx, line) in BufReader::new(reader).lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut tokens = content.split_whitespace();
        let label_tok = tokens.next().expect("nonempty line has a token");
        let label: f64 = label_tok
            .parse()
            .map_err(|_| parse_err(lineno, format!("label `{label_tok}` is not numeric")))?;
        if !label.is_finite() {
            return Err(parse_err(lineno, format!("label `{label_tok}` is not finite")));
        }
        let mut entries: Vec<(usize, f64)> = Vec::new();
        for tok in tokens {
            let (i, v) = tok
                .split_once(':')
                .ok_or_else(|| parse_err(lineno, format!("expected idx:val, found `{tok}`")))?;
            let i: usize = i
                .parse()
                .map_err(|_| parse_err(lineno, format!("index `{i}` is not a positive integer")))?;
            if i == 0 {
                return Err(parse_err(lineno, "indices are 1-based; found 0"));
            }
            let v: f64 = v
                .parse()
                .map_err(|_| parse_err(lineno, format!("value `{v}` is not numeric")))?;
            if !v.is_finite() {
                return Err(parse_err(lineno, format!("value `{v}` is not finite")));
            }
            if entries.iter().any(|(j, _)| *j == i) {
                return Err(parse_err(lineno, format!("duplicate index {i}")));
            }
            dim = dim.max(i);
            entries.push((i, v));
        }
        sparse.push(entries);
        labels.push(label);
    }
    if sparse.is_empty() {
        return Err(Error::NoSamples);
    }
    let rows = sparse
        .into_iter()
        .map(|entries| {
            let mut row = vec![0.0; dim];
            for (i, v) in entries {
                row[i - 1] = v;
            }
            row
        })
        .collect();
    Ok(SparseSamples { rows, labels, dim })
}

/// Loads a LIBSVM classification file.
pub fn load_libsvm(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| Error::File { path: path.to_path_buf(), source })?;
    let samples = read_libsvm(file)?;
    if samples.dim == 0 {
        return Err(Error::invalid("file contains no features"));
    }
    Dataset::from_raw(samples.rows, samples.labels)
}

/// Writes `dataset` in LIBSVM format using the original label values.
pub fn write_libsvm<W: Write>(dataset: &Dataset, out: W) -> Result<()> {
    let rows: Vec<&[f64]> = (0..dataset.len()).map(|i| dataset.row(i)).collect();
    let labels: Vec<f64> = (0..dataset.len()).map(|i| dataset.label_values[dataset.label(i)]).collect();
    write_libsvm_rows(&rows, &labels, out)
}

/// Writes dense rows with real-valued labels in LIBSVM format.
///
/// Zero entries are omitted except the last coordinate, which is always
/// written so the dimension survives a reload.
pub fn write_libsvm_rows<W: Write>(rows: &[&[f64]], labels: &[f64], mut out: W) -> Result<()> {
    if rows.len() != labels.len() {
        return Err(Error::DimensionMismatch { expected: rows.len(), got: labels.len() });
    }
    for (row, label) in rows.iter().zip(labels) {
        write!(out, "{label}")?;
        for (j, v) in row.iter().enumerate() {
            if *v != 0.0 || j + 1 == row.len() {
                write!(out, " {}:{}", j + 1, v)?;
            }
        }
        writeln!(out)?;
    }
    out.flush()?;
    Ok(())
}

/// Loads a CSV file with a header row; the last column is the label.
pub fn load_csv(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| Error::File { path: path.to_path_buf(), source })?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(file);
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        // header is line 1
        let lineno = idx + 2;
        let record = record?;
        if record.len() < 2 {
            return Err(parse_err(lineno, "need at least one feature column and a label column"));
        }
        let mut values = Vec::with_capacity(record.len());
        for field in record.iter() {
            let v: f64 = field
                .parse()
                .map_err(|_| parse_err(lineno, format!("`{field}` is not numeric")))?;
            values.push(v);
        }
        labels.push(values.pop().expect("len >= 2"));
        rows.push(values);
    }
    if rows.is_empty() {
        return Err(Error::NoSamples);
    }
    let d = rows[0].len();
    if let Some((i, _)) = rows.iter().enumerate().find(|(_, r)| r.len() != d) {
        return Err(parse_err(i + 2, "inconsistent column count"));
    }
    Dataset::from_raw(rows, labels)
}

/// `classes` Gaussian clusters in `R^d`. Centers are drawn with standard
/// deviation `spread`; samples have unit noise. Sample `i` belongs to class
/// `i % classes`.
pub fn gaussian_blobs(n: usize, d: usize, classes: usize, seed: u64, spread: f64) -> Result<Dataset> {
    if n == 0 || d == 0 || classes < 2 {
        return Err(Error::invalid("blobs need n >= 1, d >= 1 and at least 2 classes"));
    }
    if !(spread > 0.0 && spread.is_finite()) {
        return Err(Error::invalid(format!("spread must be positive, got {spread}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let center_dist = Normal::new(0.0, spread).expect("positive std");
    let centers: Vec<f64> = (0..classes * d).map(|_| center_dist.sample(&mut rng)).collect();
    let mut features = Vec::with_capacity(n * d);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let c = i % classes;
        for j in 0..d {
            let noise: f64 = StandardNormal.sample(&mut rng);
            features.push(centers[c * d + j] + noise);
        }
        labels.push(c);
    }
    Dataset::from_classes(features, d, labels, classes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_line() {
        let s = read_libsvm("2 1:0.5 3:1.0\n".as_bytes()).unwrap();
        assert_eq!(s.dim, 3);
        let ds = Dataset::from_raw(s.rows, s.labels).unwrap();
        assert_eq!(ds.len(), 1);
        assert_eq!(ds.dim(), 3);
        assert_eq!(ds.row(0), &[0.5, 0.0, 1.0]);
        assert_eq!(ds.label(0), 0);
        assert_eq!(ds.label_values(), &[2.0]);
    }

    #[test]
    fn labels_are_remapped_in_value_order() {
        let s = read_libsvm("+1 1:1\n-1 2:1\n+1 1:2\n".as_bytes()).unwrap();
        let ds = Dataset::from_raw(s.rows, s.labels).unwrap();
        assert_eq!(ds.labels(), &[1, 0, 1]);
        assert_eq!(ds.classes(), 2);
    }

    #[test]
    fn empty_input_is_no_samples() {
        let err = read_libsvm("".as_bytes()).unwrap_err();
        assert_eq!(err.to_string(), "no samples");
        let err = read_libsvm("\n# only a comment\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::NoSamples));
    }

    #[test]
    fn malformed_lines_name_the_line() {
        let cases = [
            ("1 1:0.5\n1 2-0.5\n", 2),
            ("1 1:0.5\nx 1:1\n", 2),
            ("1 0:1\n", 1),
            ("1 1:abc\n", 1),
            ("1 1:1 1:2\n", 1),
            ("\n\n1 a:1\n", 3),
        ];
        for (text, line) in cases {
            match read_libsvm(text.as_bytes()) {
                Err(Error::Parse { line: got, .. }) => assert_eq!(got, line, "{text:?}"),
                other => panic!("{text:?}: {other:?}"),
            }
        }
    }

    #[test]
    fn blobs_contract() {
        let ds = gaussian_blobs(200, 5, 3, 7, 3.0).unwrap();
        assert_eq!(ds.len(), 200);
        assert_eq!(ds.dim(), 5);
        assert_eq!(ds.classes(), 3);
        assert!(ds.labels().iter().all(|&l| l < 3));
        assert_eq!(ds, gaussian_blobs(200, 5, 3, 7, 3.0).unwrap());
    }

    #[test]
    fn csv_import() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        std::fs::write(&path, "a,b,label\n1.0,2.0,5\n3.0,4.0,7\n").unwrap();
        let ds = load_csv(&path).unwrap();
        assert_eq!(ds.dim(), 2);
        assert_eq!(ds.row(1), &[3.0, 4.0]);
        assert_eq!(ds.labels(), &[0, 1]);

        std::fs::write(&path, "a,label\n1.0,x\n").unwrap();
        assert!(matches!(load_csv(&path), Err(Error::Parse { line: 2, .. })));
        std::fs::write(&path, "a,label\n").unwrap();
        assert!(matches!(load_csv(&path), Err(Error::NoSamples)));
    }

    fn arb_dataset() -> impl Strategy<Value = Dataset> {
        (1usize..6, 1usize..8).prop_flat_map(|(d, n)| {
            (
                proptest::collection::vec(
                    proptest::collection::vec(prop_oneof![Just(0.0), -1e6f64..1e6], d),
                    n,
                ),
                proptest::collection::vec(-3i32..3, n),
            )
                .prop_map(|(rows, labels)| {
                    Dataset::from_raw(rows, labels.into_iter().map(f64::from).collect()).unwrap()
                })
        })
    }

    proptest! {
        #[test]
        fn libsvm_round_trip(ds in arb_dataset()) {
            let mut buf = Vec::new();
            write_libsvm(&ds, &mut buf).unwrap();
            let s = read_libsvm(buf.as_slice()).unwrap();
            let back = Dataset::from_raw(s.rows, s.labels).unwrap();
            prop_assert_eq!(back, ds);
        }
    }
}
