//! In-memory dataset and its text file format.
//!
//! ```text
//! feature_dim<TAB>n_labels
//! 0.12,-1.5,...|1,0,1,...|1
//! ```
//!
//! Each row holds comma-separated features, comma-separated label bits and
//! a labelled flag. Unlabelled rows carry all-zero bits and flag 0.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::losses::LabelVector;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub feature_dim: usize,
    pub n_labels: usize,
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<LabelVector>,
}

impl Dataset {
    pub fn new(feature_dim: usize, n_labels: usize) -> Self {
        Dataset {
            feature_dim,
            n_labels,
            ..Default::default()
        }
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn push(&mut self, features: Vec<f64>, labels: LabelVector) -> Result<()> {
        if features.len() != self.feature_dim {
            return Err(Error::Dimension {
                context: "feature row",
                expected: self.feature_dim,
                actual: features.len(),
            });
        }
        if labels.values.len() != self.n_labels {
            return Err(Error::Dimension {
                context: "label row",
                expected: self.n_labels,
                actual: labels.values.len(),
            });
        }
        self.features.push(features);
        self.labels.push(labels);
        Ok(())
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            feature_dim: self.feature_dim,
            n_labels: self.n_labels,
            features: indices.iter().map(|&i| self.features[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i].clone()).collect(),
        }
    }

    /// Appends every row of `other`; shapes must agree.
    pub fn extend(&mut self, other: &Dataset) -> Result<()> {
        for (x, y) in other.features.iter().zip(&other.labels) {
            self.push(x.clone(), y.clone())?;
        }
        Ok(())
    }

    pub fn labelled_count(&self) -> usize {
        self.labels.iter().filter(|y| y.labelled).count()
    }

    /// Only the labelled rows.
    pub fn labelled(&self) -> Dataset {
        let idx: Vec<usize> = (0..self.len())
            .filter(|&i| self.labels[i].labelled)
            .collect();
        self.subset(&idx)
    }

    /// Label rows as `Option`, `None` for unlabelled rows.
    pub fn label_rows(&self) -> Vec<Option<Vec<bool>>> {
        self.labels
            .iter()
            .map(|y| y.labelled.then(|| y.values.clone()))
            .collect()
    }

    /// Positive count per class over labelled rows.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_labels];
        for y in self.labels.iter().filter(|y| y.labelled) {
            for (c, &v) in y.values.iter().enumerate() {
                counts[c] += usize::from(v);
            }
        }
        counts
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{}\t{}\n", self.feature_dim, self.n_labels);
        for (x, y) in self.features.iter().zip(&self.labels) {
            for (i, v) in x.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write!(out, "{v}").unwrap();
            }
            out.push('|');
            for (i, &b) in y.values.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push(if b && y.labelled { '1' } else { '0' });
            }
            out.push('|');
            out.push(if y.labelled { '1' } else { '0' });
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str, source: &Path) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::parse(source, 1, "missing header line"))?;
        let (fd, nl) = header
            .split_once('\t')
            .ok_or_else(|| Error::parse(source, 1, "header must be `feature_dim<TAB>n_labels`"))?;
        let feature_dim = fd
            .trim()
            .parse()
            .map_err(|_| Error::parse(source, 1, "bad feature_dim"))?;
        let n_labels = nl
            .trim()
            .parse()
            .map_err(|_| Error::parse(source, 1, "bad n_labels"))?;
        let mut ds = Dataset::new(feature_dim, n_labels);
        for (i, line) in lines {
            let line_no = i + 1;
            let bad = |msg: &str| Error::parse(source, line_no, msg);
            let mut parts = line.trim_end_matches('\r').split('|');
            let (Some(f), Some(l), Some(flag), None) =
                (parts.next(), parts.next(), parts.next(), parts.next())
            else {
                return Err(bad("expected `features|labels|flag`"));
            };
            let features = if f.is_empty() {
                Vec::new()
            } else {
                f.split(',')
                    .map(|v| v.trim().parse::<f64>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|_| bad("bad feature value"))?
            };
            if features.iter().any(|v| !v.is_finite()) {
                return Err(bad("non-finite feature value"));
            }
            let values = if l.is_empty() {
                Vec::new()
            } else {
                l.split(',')
                    .map(|v| match v.trim() {
                        "0" => Ok(false),
                        "1" => Ok(true),
                        _ => Err(bad("label bits must be 0 or 1")),
                    })
                    .collect::<Result<Vec<_>>>()?
            };
            let labelled = match flag.trim() {
                "1" => true,
                "0" => false,
                _ => return Err(bad("labelled flag must be 0 or 1")),
            };
            ds.push(features, LabelVector { values, labelled })
                .map_err(|e| bad(&e.to_string()))?;
        }
        Ok(ds)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let mut ds = Dataset::new(2, 3);
        ds.push(
            vec![0.1, -2.5e-7],
            LabelVector::labelled(vec![true, false, true]),
        )
        .unwrap();
        ds.push(vec![1.0 / 3.0, 4.0], LabelVector::unlabelled(3))
            .unwrap();
        let text = ds.to_text();
        assert!(text.starts_with("2\t3\n"));
        assert!(text.lines().nth(2).unwrap().ends_with("|0,0,0|0"));
        assert_eq!(Dataset::parse(&text, Path::new("m")).unwrap(), ds);
    }

    #[test]
    fn rejects_wrong_widths() {
        let err = Dataset::parse("2\t1\n1.0|1|1\n", Path::new("d")).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err:?}");
        assert!(Dataset::parse("1\t1\n1.0|2|1\n", Path::new("d")).is_err());
    }

    #[test]
    fn counts_only_labelled_rows() {
        let mut ds = Dataset::new(1, 2);
        ds.push(vec![0.0], LabelVector::labelled(vec![true, true]))
            .unwrap();
        ds.push(vec![0.0], LabelVector::labelled(vec![true, false]))
            .unwrap();
        ds.push(
            vec![0.0],
            LabelVector {
                values: vec![true, true],
                labelled: false,
            },
        )
        .unwrap();
        assert_eq!(ds.class_counts(), vec![2, 1]);
        assert_eq!(ds.labelled().len(), 2);
    }
}
