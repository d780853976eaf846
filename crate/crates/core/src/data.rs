//! XMLC sparse text format: a `num_samples num_features num_labels` header and
//! one `l1,l2,... f:v f:v ...` line per sample. A line that starts with a space
//! has no labels. Files ending in `.gz` are read and written through gzip.

use std::borrow::Cow;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use flate2::read::MultiGzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{SparseFeatures, TrainingSet};
use crate::pl::{mix_seed, rng_from_seed, ItemId, PartitionedPreference};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SparseSample {
    /// `(feature, value)` sorted by feature index.
    pub features: Vec<(u32, f64)>,
    /// Sorted label ids.
    pub labels: Vec<u32>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub samples: Vec<SparseSample>,
    pub n_features: usize,
    pub n_labels: usize,
    label_counts: Vec<usize>,
}

impl Dataset {
    pub fn new(samples: Vec<SparseSample>, n_features: usize, n_labels: usize) -> Result<Self> {
        let mut label_counts = vec![0; n_labels];
        for s in &samples {
            for w in s.features.windows(2) {
                if w[0].0 >= w[1].0 {
                    return Err(Error::DegenerateInput(
                        "feature indices must be strictly increasing".into(),
                    ));
                }
            }
            if let Some(&(f, _)) = s.features.last() {
                if f as usize >= n_features {
                    return Err(Error::IndexOutOfRange {
                        index: f as usize,
                        bound: n_features,
                        line: None,
                    });
                }
            }
            for &l in &s.labels {
                let l = l as usize;
                if l >= n_labels {
                    return Err(Error::IndexOutOfRange {
                        index: l,
                        bound: n_labels,
                        line: None,
                    });
                }
                label_counts[l] += 1;
            }
        }
        Ok(Self {
            samples,
            n_features,
            n_labels,
            label_counts,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Number of samples tagged with each label.
    pub fn label_counts(&self) -> &[usize] {
        &self.label_counts
    }

    /// A new dataset holding the given rows, in the given order.
    pub fn select(&self, rows: &[usize]) -> Dataset {
        let samples = rows.iter().map(|&i| self.samples[i].clone()).collect();
        Dataset::new(samples, self.n_features, self.n_labels)
            .expect("rows of a valid dataset are valid")
    }
}

fn open_maybe_gz(path: &Path) -> Result<Box<dyn BufRead>> {
    let file = File::open(path)?;
    let reader: Box<dyn Read> = if is_gz(path) {
        Box::new(MultiGzDecoder::new(file))
    } else {
        Box::new(file)
    };
    Ok(Box::new(BufReader::new(reader)))
}

fn is_gz(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "gz")
}

pub fn parse_xmlc(path: impl AsRef<Path>) -> Result<Dataset> {
    parse_xmlc_reader(open_maybe_gz(path.as_ref())?)
}

pub fn parse_xmlc_reader<R: BufRead>(reader: R) -> Result<Dataset> {
    let mut lines = reader.lines();
    let header = match lines.next() {
        Some(line) => line?,
        None => return Err(Error::MalformedHeader("file is empty".into())),
    };
    let fields: Vec<&str> = header.split_whitespace().collect();
    let parsed: Vec<usize> = fields.iter().filter_map(|f| f.parse().ok()).collect();
    let &[n_samples, n_features, n_labels] = parsed.as_slice() else {
        return Err(Error::MalformedHeader(format!(
            "expected three non-negative integers, got `{}`",
            header.trim_end()
        )));
    };
    if fields.len() != 3 {
        return Err(Error::MalformedHeader(format!(
            "expected three fields, got `{}`",
            header.trim_end()
        )));
    }

    let mut samples = Vec::with_capacity(n_samples.min(1 << 20));
    for (k, line) in lines.enumerate() {
        let lineno = k + 2;
        let line = line?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        if line.is_empty() {
            continue;
        }
        samples.push(parse_line(line, lineno, n_features, n_labels)?);
    }
    if samples.len() != n_samples {
        return Err(Error::MalformedHeader(format!(
            "header declares {n_samples} samples but the file has {}",
            samples.len()
        )));
    }
    Dataset::new(samples, n_features, n_labels)
}

fn parse_line(line: &str, lineno: usize, n_features: usize, n_labels: usize) -> Result<SparseSample> {
    let malformed = |msg: String| Error::MalformedLine { line: lineno, msg };
    let (label_field, rest) = if line.starts_with(char::is_whitespace) {
        ("", line)
    } else {
        match line.split_once(char::is_whitespace) {
            Some((first, rest)) if !first.contains(':') => (first, rest),
            Some(_) => ("", line),
            None if line.contains(':') => ("", line),
            None => (line, ""),
        }
    };

    let mut labels = Vec::new();
    if !label_field.is_empty() {
        for tok in label_field.split(',') {
            let l: usize = tok
                .parse()
                .map_err(|_| malformed(format!("bad label `{tok}`")))?;
            if l >= n_labels {
                return Err(Error::IndexOutOfRange {
                    index: l,
                    bound: n_labels,
                    line: Some(lineno),
                });
            }
            labels.push(l as u32);
        }
    }
    labels.sort_unstable();
    if labels.windows(2).any(|w| w[0] == w[1]) {
        return Err(malformed("duplicate label".into()));
    }

    let mut features = Vec::new();
    for tok in rest.split_whitespace() {
        let (f, v) = tok
            .split_once(':')
            .ok_or_else(|| malformed(format!("bad feature `{tok}`")))?;
        let f: usize = f
            .parse()
            .map_err(|_| malformed(format!("bad feature index in `{tok}`")))?;
        let v: f64 = v
            .parse()
            .map_err(|_| malformed(format!("bad feature value in `{tok}`")))?;
        if f >= n_features {
            return Err(Error::IndexOutOfRange {
                index: f,
                bound: n_features,
                line: Some(lineno),
            });
        }
        features.push((f as u32, v));
    }
    features.sort_unstable_by_key(|x| x.0);
    if features.windows(2).any(|w| w[0].0 == w[1].0) {
        return Err(malformed("duplicate feature index".into()));
    }
    Ok(SparseSample { features, labels })
}

/// Writes the canonical form: sorted labels and features, shortest round-trip
/// decimal values, LF line endings.
pub fn write_xmlc<W: Write>(ds: &Dataset, mut out: W) -> Result<()> {
    writeln!(out, "{} {} {}", ds.len(), ds.n_features, ds.n_labels)?;
    for s in &ds.samples {
        let labels: Vec<String> = s.labels.iter().map(u32::to_string).collect();
        let mut line = labels.join(",");
        for (f, v) in &s.features {
            line.push_str(&format!(" {f}:{v}"));
        }
        if line.is_empty() {
            line.push(' ');
        }
        writeln!(out, "{line}")?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_xmlc_file(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = BufWriter::new(File::create(path)?);
    if is_gz(path) {
        let mut enc = GzEncoder::new(file, Compression::default());
        write_xmlc(ds, &mut enc)?;
        enc.finish()?.flush()?;
        Ok(())
    } else {
        write_xmlc(ds, file)
    }
}

/// Seeded shuffle split into `(train_rows, valid_rows)`, each in ascending order.
pub fn split_indices(n: usize, valid_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let n_valid = ((valid_fraction * n as f64).round() as usize).min(n);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng_from_seed(mix_seed(seed, 0x5_0117)));
    let mut valid = order[..n_valid].to_vec();
    let mut train = order[n_valid..].to_vec();
    valid.sort_unstable();
    train.sort_unstable();
    (train, valid)
}

pub fn split(ds: &Dataset, valid_fraction: f64, seed: u64) -> (Dataset, Dataset) {
    let (train, valid) = split_indices(ds.len(), valid_fraction, seed);
    (ds.select(&train), ds.select(&valid))
}

/// Relevant labels above every other label.
pub fn to_partitioned_preference(sample: &SparseSample, n_labels: usize) -> Result<PartitionedPreference> {
    if sample.labels.is_empty() {
        return Err(Error::EmptyLabelSet);
    }
    if sample.labels.len() >= n_labels {
        return Err(Error::FullLabelSet);
    }
    let top = sample.labels.iter().map(|&l| ItemId(l)).collect();
    PartitionedPreference::from_top_blocks(n_labels, vec![top])
}

/// Rows usable by the ranking losses: at least one label and not every label.
pub struct XmlcTrainingSet<'a> {
    ds: &'a Dataset,
    rows: Vec<usize>,
}

impl<'a> XmlcTrainingSet<'a> {
    pub fn new(ds: &'a Dataset) -> Self {
        Self::from_rows(ds, (0..ds.len()).collect())
    }

    /// Keeps the usable subset of `rows`.
    pub fn from_rows(ds: &'a Dataset, rows: Vec<usize>) -> Self {
        let rows = rows
            .into_iter()
            .filter(|&i| {
                let k = ds.samples[i].labels.len();
                k > 0 && k < ds.n_labels
            })
            .collect();
        Self { ds, rows }
    }

    pub fn rows(&self) -> &[usize] {
        &self.rows
    }
}

impl TrainingSet for XmlcTrainingSet<'_> {
    fn len(&self) -> usize {
        self.rows.len()
    }

    fn features(&self, i: usize) -> &SparseFeatures {
        &self.ds.samples[self.rows[i]].features
    }

    fn preference(&self, i: usize) -> Result<Cow<'_, PartitionedPreference>> {
        to_partitioned_preference(&self.ds.samples[self.rows[i]], self.ds.n_labels).map(Cow::Owned)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<Dataset> {
        parse_xmlc_reader(s.as_bytes())
    }

    #[test]
    fn parses_the_basic_example() {
        let ds = parse("2 3 2\n0 0:1.5 2:0.5\n1 1:2.0\n").unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.samples[0].features, vec![(0, 1.5), (2, 0.5)]);
        assert_eq!(ds.samples[0].labels, vec![0]);
        assert_eq!(ds.samples[1].features, vec![(1, 2.0)]);
        assert_eq!(ds.label_counts(), &[1, 1]);
    }

    #[test]
    fn leading_space_means_no_labels() {
        let ds = parse("1 2 3\n 0:1.0\n").unwrap();
        assert!(ds.samples[0].labels.is_empty());
        assert_eq!(ds.samples[0].features, vec![(0, 1.0)]);
    }

    #[test]
    fn crlf_multilabel_and_unsorted_features() {
        let ds = parse("1 5 4\r\n3,1 4:2 0:-1e-3\r\n").unwrap();
        assert_eq!(ds.samples[0].labels, vec![1, 3]);
        assert_eq!(ds.samples[0].features, vec![(0, -1e-3), (4, 2.0)]);
    }

    #[test]
    fn errors_carry_line_numbers() {
        assert!(matches!(parse(""), Err(Error::MalformedHeader(_))));
        assert!(matches!(parse("2 x 3\n"), Err(Error::MalformedHeader(_))));
        assert!(matches!(parse("2 3 2\n0 0:1\n"), Err(Error::MalformedHeader(_))));
        assert!(matches!(
            parse("1 3 2\n0 0:1 0:2\n"),
            Err(Error::MalformedLine { line: 2, .. })
        ));
        assert!(matches!(
            parse("2 3 2\n0 0:1\n1 1:abc\n"),
            Err(Error::MalformedLine { line: 3, .. })
        ));
        assert!(matches!(
            parse("1 3 2\n0 3:1\n"),
            Err(Error::IndexOutOfRange { index: 3, line: Some(2), .. })
        ));
        assert!(matches!(
            parse("1 3 2\n2 0:1\n"),
            Err(Error::IndexOutOfRange { index: 2, line: Some(2), .. })
        ));
        assert!(matches!(parse("1 3 2\n1,1 0:1\n"), Err(Error::MalformedLine { .. })));
    }

    #[test]
    fn canonical_round_trip() {
        let src = "3 4 3\n2,0 3:0.25 1:2.0\n 0:1\n1\n";
        let ds = parse(src).unwrap();
        let mut buf = Vec::new();
        write_xmlc(&ds, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "3 4 3\n0,2 1:2 3:0.25\n 0:1\n1\n");
        assert_eq!(parse(&text).unwrap(), ds);
    }

    #[test]
    fn split_examples() {
        let (t, v) = split_indices(8, 0.0, 1);
        assert!(v.is_empty() && t.len() == 8);
        let (t, v) = split_indices(8, 0.25, 1);
        assert_eq!(v.len(), 2);
        assert_eq!(t.len(), 6);
        assert_eq!(split_indices(8, 0.25, 1), (t.clone(), v.clone()));
        let mut all: Vec<usize> = t.into_iter().chain(v).collect();
        all.sort_unstable();
        assert_eq!(all, (0..8).collect::<Vec<_>>());
    }

    #[test]
    fn preference_from_labels() {
        let s = SparseSample {
            features: vec![],
            labels: vec![0],
        };
        let p = to_partitioned_preference(&s, 3).unwrap();
        assert_eq!(p.partition(0), &[ItemId(0)]);
        assert_eq!(p.partition(1), &[ItemId(1), ItemId(2)]);
        let all = SparseSample {
            features: vec![],
            labels: vec![0, 1, 2],
        };
        assert!(matches!(to_partitioned_preference(&all, 3), Err(Error::FullLabelSet)));
        assert!(matches!(
            to_partitioned_preference(&SparseSample::default(), 3),
            Err(Error::EmptyLabelSet)
        ));
    }

    #[test]
    fn training_view_skips_unusable_rows() {
        let ds = parse("3 2 2\n0 0:1\n 1:1\n0,1 0:1\n").unwrap();
        let view = XmlcTrainingSet::new(&ds);
        assert_eq!(view.rows(), &[0]);
    }
}
