//! Dataset file formats.
//!
//! Binary matrices: `"LPLF"`, `u32` rows, `u32` cols (little-endian), then
//! `rows · cols` little-endian `f32` values in row-major order.
//!
//! CSV: features as `id,label,f0..f{C-1}`, attributes as
//! `class_id,a0..a{D-1}`, values written as `f32` with 9 significant digits.
//!
//! Split: plain text with one `key: ids` line for each of `seen`, `unseen`,
//! `train`, `test_seen` and `test_unseen`. Ids are separated by whitespace
//! or commas; `#` starts a comment.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{AttributeTable, Split, SplitDataset};
use crate::error::{Error, Result};
use crate::numerics::Matrix;

pub const MATRIX_MAGIC: &[u8; 4] = b"LPLF";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum DatasetFormat {
    Csv,
    Binary,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DatasetPaths {
    pub features: PathBuf,
    /// Only used by the binary format; CSV features carry their labels.
    pub labels: Option<PathBuf>,
    pub attributes: PathBuf,
    pub split: PathBuf,
}

impl DatasetPaths {
    /// Conventional file names inside `dir`.
    pub fn in_dir(dir: &Path, format: DatasetFormat) -> Self {
        match format {
            DatasetFormat::Csv => DatasetPaths {
                features: dir.join("features.csv"),
                labels: None,
                attributes: dir.join("attributes.csv"),
                split: dir.join("split.txt"),
            },
            DatasetFormat::Binary => DatasetPaths {
                features: dir.join("features.lplf"),
                labels: Some(dir.join("labels.lplf")),
                attributes: dir.join("attributes.lplf"),
                split: dir.join("split.txt"),
            },
        }
    }
}

pub fn encode_matrix(m: &Matrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + 4 * m.as_slice().len());
    out.extend_from_slice(MATRIX_MAGIC);
    out.extend_from_slice(&(m.rows() as u32).to_le_bytes());
    out.extend_from_slice(&(m.cols() as u32).to_le_bytes());
    for &v in m.as_slice() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

pub fn decode_matrix(bytes: &[u8], path: &Path) -> Result<Matrix> {
    let fail = |column: usize, message: String| Error::Format {
        path: path.to_path_buf(),
        line: 0,
        column,
        message,
    };
    if bytes.len() < 12 || &bytes[..4] != MATRIX_MAGIC {
        return Err(fail(0, "missing LPLF header".into()));
    }
    let rows = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let expected = 12 + 4 * rows * cols;
    if bytes.len() != expected {
        return Err(fail(
            12,
            format!(
                "{rows}x{cols} matrix needs {expected} bytes, file has {}",
                bytes.len()
            ),
        ));
    }
    let mut data = Vec::with_capacity(rows * cols);
    for (i, chunk) in bytes[12..].chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes(chunk.try_into().unwrap());
        if !v.is_finite() {
            return Err(fail(
                12 + 4 * i,
                format!("non-finite value at ({}, {})", i / cols, i % cols),
            ));
        }
        data.push(v as f64);
    }
    Matrix::from_vec(rows, cols, data)
}

pub fn write_matrix(path: &Path, m: &Matrix) -> Result<()> {
    fs::write(path, encode_matrix(m)).map_err(|e| Error::io(path, e))
}

pub fn read_matrix(path: &Path) -> Result<Matrix> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_matrix(&bytes, path)
}

fn fmt_value(v: f64) -> String {
    format!("{:.8e}", v as f32)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn save_dataset(ds: &SplitDataset, dir: &Path, format: DatasetFormat) -> Result<DatasetPaths> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let paths = DatasetPaths::in_dir(dir, format);
    match format {
        DatasetFormat::Csv => {
            write_text(&paths.features, &features_csv(ds))?;
            write_text(&paths.attributes, &attributes_csv(ds.attributes()))?;
        }
        DatasetFormat::Binary => {
            write_matrix(&paths.features, ds.features())?;
            let labels = Matrix::from_vec(
                ds.num_samples(),
                1,
                ds.labels().iter().map(|&l| l as f64).collect(),
            )?;
            write_matrix(paths.labels.as_ref().unwrap(), &labels)?;
            write_matrix(&paths.attributes, ds.attributes().values())?;
        }
    }
    write_text(&paths.split, &split_text(ds.split()))?;
    Ok(paths)
}

fn features_csv(ds: &SplitDataset) -> String {
    let mut s = String::from("id,label");
    for c in 0..ds.feature_dim() {
        write!(s, ",f{c}").unwrap();
    }
    s.push('\n');
    for (i, row) in ds.features().row_iter().enumerate() {
        write!(s, "{i},{}", ds.labels()[i]).unwrap();
        for &v in row {
            s.push(',');
            s.push_str(&fmt_value(v));
        }
        s.push('\n');
    }
    s
}

fn attributes_csv(attrs: &AttributeTable) -> String {
    let mut s = String::from("class_id");
    for d in 0..attrs.dim() {
        write!(s, ",a{d}").unwrap();
    }
    s.push('\n');
    for (k, row) in attrs.values().row_iter().enumerate() {
        write!(s, "{k}").unwrap();
        for &v in row {
            s.push(',');
            s.push_str(&fmt_value(v));
        }
        s.push('\n');
    }
    s
}

pub(crate) fn split_text(split: &Split) -> String {
    let mut s = String::new();
    for (key, ids) in [
        ("seen", &split.seen),
        ("unseen", &split.unseen),
        ("train", &split.train),
        ("test_seen", &split.test_seen),
        ("test_unseen", &split.test_unseen),
    ] {
        s.push_str(key);
        s.push(':');
        for id in ids {
            write!(s, " {id}").unwrap();
        }
        s.push('\n');
    }
    s
}

pub fn load_dataset(paths: &DatasetPaths, format: DatasetFormat) -> Result<SplitDataset> {
    let (features, labels, attributes) = match format {
        DatasetFormat::Csv => {
            let (features, labels) = read_features_csv(&paths.features)?;
            let attributes = read_attributes_csv(&paths.attributes)?;
            (features, labels, attributes)
        }
        DatasetFormat::Binary => {
            let features = read_matrix(&paths.features)?;
            let label_path = paths.labels.as_ref().ok_or_else(|| {
                Error::Usage("binary datasets need a labels file".into())
            })?;
            let labels = labels_from_matrix(&read_matrix(label_path)?, label_path)?;
            (features, labels, read_matrix(&paths.attributes)?)
        }
    };
    let split = read_split(&paths.split)?;
    SplitDataset::new(features, labels, AttributeTable::new(attributes)?, split)
}

/// Loads the conventional files in `dir`, choosing the binary format when
/// `features.lplf` is present.
pub fn load_dataset_dir(dir: &Path) -> Result<SplitDataset> {
    if !dir.is_dir() {
        return Err(Error::MissingInput(dir.to_path_buf()));
    }
    let format = if dir.join("features.lplf").exists() {
        DatasetFormat::Binary
    } else {
        DatasetFormat::Csv
    };
    load_dataset(&DatasetPaths::in_dir(dir, format), format)
}

fn labels_from_matrix(m: &Matrix, path: &Path) -> Result<Vec<usize>> {
    if m.cols() != 1 && m.rows() > 0 {
        return Err(Error::Format {
            path: path.to_path_buf(),
            line: 0,
            column: 0,
            message: format!("labels must be a single column, got {}", m.cols()),
        });
    }
    m.as_slice()
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            if v >= 0.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                Err(Error::Format {
                    path: path.to_path_buf(),
                    line: 0,
                    column: i,
                    message: format!("label {v} of sample {i} is not a class id"),
                })
            }
        })
        .collect()
}

fn format_err(path: &Path, line: u64, column: usize, message: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        line,
        column,
        message: message.into(),
    }
}

/// Reads a headered numeric CSV whose first `key_cols` columns are integer
/// keys named `key_names` and whose remaining columns are `{prefix}0..`.
fn read_numeric_csv(
    path: &Path,
    key_names: &[&str],
    prefix: &str,
) -> Result<(Vec<Vec<usize>>, Matrix)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| format_err(path, 1, 0, e.to_string()))?
        .clone();
    if headers.len() < key_names.len() {
        return Err(format_err(path, 1, headers.len() + 1, "header is too short"));
    }
    for (c, name) in key_names.iter().enumerate() {
        if &headers[c] != *name {
            return Err(format_err(
                path,
                1,
                c + 1,
                format!("expected column `{name}`, found `{}`", &headers[c]),
            ));
        }
    }
    let width = headers.len() - key_names.len();
    for j in 0..width {
        let got = &headers[key_names.len() + j];
        if got != format!("{prefix}{j}") {
            return Err(format_err(
                path,
                1,
                key_names.len() + j + 1,
                format!("expected column `{prefix}{j}`, found `{got}`"),
            ));
        }
    }

    let mut keys = Vec::new();
    let mut data = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            format_err(path, line, 0, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != headers.len() {
            return Err(format_err(
                path,
                line,
                record.len().min(headers.len()) + 1,
                format!("expected {} fields, found {}", headers.len(), record.len()),
            ));
        }
        let mut row_keys = Vec::with_capacity(key_names.len());
        for (c, field) in record.iter().take(key_names.len()).enumerate() {
            let v = field.parse::<usize>().map_err(|_| {
                format_err(path, line, c + 1, format!("`{field}` is not a non-negative integer"))
            })?;
            row_keys.push(v);
        }
        for (j, field) in record.iter().skip(key_names.len()).enumerate() {
            let v = field.parse::<f32>().map_err(|_| {
                format_err(path, line, key_names.len() + j + 1, format!("`{field}` is not a number"))
            })?;
            if !v.is_finite() {
                return Err(format_err(
                    path,
                    line,
                    key_names.len() + j + 1,
                    format!("non-finite value `{field}`"),
                ));
            }
            data.push(v as f64);
        }
        // rows must be listed in id order
        if row_keys[0] != keys.len() {
            return Err(format_err(
                path,
                line,
                1,
                format!("expected {} `{}`, found {}", key_names[0], keys.len(), row_keys[0]),
            ));
        }
        keys.push(row_keys);
    }
    let rows = keys.len();
    Ok((keys, Matrix::from_vec(rows, width, data)?))
}

fn read_features_csv(path: &Path) -> Result<(Matrix, Vec<usize>)> {
    let (keys, features) = read_numeric_csv(path, &["id", "label"], "f")?;
    Ok((features, keys.into_iter().map(|k| k[1]).collect()))
}

fn read_attributes_csv(path: &Path) -> Result<Matrix> {
    read_numeric_csv(path, &["class_id"], "a").map(|(_, m)| m)
}

pub(crate) fn read_split(path: &Path) -> Result<Split> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_split(&text, path)
}

pub(crate) fn parse_split(text: &str, path: &Path) -> Result<Split> {
    const KEYS: [&str; 5] = ["seen", "unseen", "train", "test_seen", "test_unseen"];
    let mut found: [Option<Vec<usize>>; 5] = Default::default();
    for (lineno, raw) in text.lines().enumerate() {
        let line_no = lineno as u64 + 1;
        let line = raw.split('#').next().unwrap().trim();
        if line.is_empty() {
            continue;
        }
        let (key, rest) = line
            .split_once(':')
            .ok_or_else(|| format_err(path, line_no, 1, "expected `key: ids`"))?;
        let key = key.trim();
        let slot = KEYS
            .iter()
            .position(|k| *k == key)
            .ok_or_else(|| format_err(path, line_no, 1, format!("unknown split key `{key}`")))?;
        if found[slot].is_some() {
            return Err(format_err(path, line_no, 1, format!("duplicate split key `{key}`")));
        }
        let mut ids = Vec::new();
        for (col, tok) in rest
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|t| !t.is_empty())
            .enumerate()
        {
            ids.push(tok.parse::<usize>().map_err(|_| {
                format_err(path, line_no, col + 1, format!("`{tok}` is not an id"))
            })?);
        }
        found[slot] = Some(ids);
    }
    let mut take = |i: usize| {
        found[i]
            .take()
            .ok_or_else(|| format_err(path, 0, 0, format!("missing split key `{}`", KEYS[i])))
    };
    Ok(Split {
        seen: take(0)?,
        unseen: take(1)?,
        train: take(2)?,
        test_seen: take(3)?,
        test_unseen: take(4)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_parsing_accepts_commas_comments_and_empty_lists() {
        let s = parse_split(
            "# fixture\nseen: 0, 1\nunseen: 2\ntrain: 0 1\ntest_seen: 2\ntest_unseen:\n",
            Path::new("x"),
        )
        .unwrap();
        assert_eq!(s.seen, vec![0, 1]);
        assert!(s.test_unseen.is_empty());
    }

    #[test]
    fn split_parsing_reports_location() {
        let err = parse_split("seen: 0 x\n", Path::new("split.txt")).unwrap_err();
        match err {
            Error::Format { line, column, .. } => assert_eq!((line, column), (1, 2)),
            other => panic!("{other}"),
        }
        assert!(parse_split("seen: 0\n", Path::new("s")).is_err());
        assert!(parse_split("bogus: 0\n", Path::new("s")).is_err());
    }

    #[test]
    fn binary_matrix_layout_is_exact() {
        let m = Matrix::from_rows(&[vec![1.0, -2.0], vec![0.5, 3.0]]).unwrap();
        let bytes = encode_matrix(&m);
        assert_eq!(&bytes[..4], b"LPLF");
        assert_eq!(&bytes[4..8], &2u32.to_le_bytes());
        assert_eq!(&bytes[8..12], &2u32.to_le_bytes());
        assert_eq!(&bytes[12..16], &1.0f32.to_le_bytes());
        assert_eq!(&bytes[16..20], &(-2.0f32).to_le_bytes());
        assert_eq!(bytes.len(), 28);
        assert_eq!(decode_matrix(&bytes, Path::new("m")).unwrap(), m);
    }

    #[test]
    fn binary_matrix_rejects_truncation() {
        let mut bytes = encode_matrix(&Matrix::zeros(2, 3));
        bytes.pop();
        assert!(matches!(
            decode_matrix(&bytes, Path::new("m")),
            Err(Error::Format { .. })
        ));
        assert!(decode_matrix(b"XXXX\0\0\0\0\0\0\0\0", Path::new("m")).is_err());
    }

    #[test]
    fn empty_matrix_round_trips() {
        let m = Matrix::zeros(0, 5);
        let back = decode_matrix(&encode_matrix(&m), Path::new("m")).unwrap();
        assert_eq!(back.shape(), (0, 5));
    }
}
